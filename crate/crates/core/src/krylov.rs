//! Restarted GMRES for complex linear systems given as closures.

use crate::C64;

pub(crate) struct GmresOutcome {
    pub x: Vec<C64>,
    pub iterations: usize,
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Rotation `[[c, s], [-conj(s), c]]` zeroing the second component of `(a, b)`.
fn givens(a: C64, b: C64) -> (f64, C64) {
    let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
    if r == 0.0 {
        return (1.0, C64::new(0.0, 0.0));
    }
    if a.norm() == 0.0 {
        return (0.0, b.conj() / b.norm());
    }
    let c = a.norm() / r;
    let s = (a / a.norm()) * b.conj() / r;
    (c, s)
}

const STALL_FACTOR: f64 = 0.7;

/// Solves `A x = b` with GMRES(`restart`), starting from `x0`. Returns early,
/// unconverged, when a restart cycle fails to reduce the true residual.
pub(crate) fn gmres<F>(mut apply: F, b: &[C64], x0: Vec<C64>, restart: usize, tol: f64, max_iter: usize) -> GmresOutcome
where
    F: FnMut(&[C64], &mut [C64]),
{
    let n = b.len();
    let bnorm = norm(b).max(f64::MIN_POSITIVE);
    let mut x = x0;
    let mut work = vec![C64::new(0.0, 0.0); n];
    let mut iterations = 0;
    let restart = restart.max(1);
    let mut last_rel = f64::INFINITY;

    loop {
        apply(&x, &mut work);
        let mut r: Vec<C64> = b.iter().zip(&work).map(|(bi, wi)| bi - wi).collect();
        let beta = norm(&r);
        let rel = beta / bnorm;
        // a cycle that barely moves the true residual means rounding in the
        // operator has taken over; hand back to the caller
        let stalled = rel > STALL_FACTOR * last_rel;
        last_rel = rel;
        if rel < tol || iterations >= max_iter || stalled {
            return GmresOutcome { x, iterations };
        }
        r.iter_mut().for_each(|v| *v /= beta);
        let mut basis: Vec<Vec<C64>> = vec![r];
        let mut h: Vec<Vec<C64>> = Vec::with_capacity(restart);
        let mut cs: Vec<f64> = Vec::with_capacity(restart);
        let mut sn: Vec<C64> = Vec::with_capacity(restart);
        let mut g = vec![C64::new(beta, 0.0)];

        let mut k = 0;
        while k < restart && iterations < max_iter {
            iterations += 1;
            let mut w = vec![C64::new(0.0, 0.0); n];
            apply(&basis[k], &mut w);
            let mut col = vec![C64::new(0.0, 0.0); k + 2];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(v, &w);
                axpy(-hij, v, &mut w);
                col[i] = hij;
            }
            let wn = norm(&w);
            col[k + 1] = C64::new(wn, 0.0);
            for i in 0..k {
                let (c, s) = (cs[i], sn[i]);
                let (a, bb) = (col[i], col[i + 1]);
                col[i] = c * a + s * bb;
                col[i + 1] = -s.conj() * a + c * bb;
            }
            let (c, s) = givens(col[k], col[k + 1]);
            let (a, bb) = (col[k], col[k + 1]);
            col[k] = c * a + s * bb;
            col[k + 1] = C64::new(0.0, 0.0);
            cs.push(c);
            sn.push(s);
            let gk = g[k];
            g[k] = c * gk;
            g.push(-s.conj() * gk);
            h.push(col);
            k += 1;
            let est = g[k].norm() / bnorm;
            if est < tol || wn == 0.0 {
                break;
            }
            w.iter_mut().for_each(|v| *v /= wn);
            basis.push(w);
        }

        // back substitution on the k x k triangle
        let mut y = vec![C64::new(0.0, 0.0); k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for j in i + 1..k {
                acc -= h[j][i] * y[j];
            }
            y[i] = acc / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            axpy(*yj, &basis[j], &mut x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_nonsymmetric_system() {
        let a = [
            [C64::new(4.0, 1.0), C64::new(1.0, 0.0), C64::new(0.0, -0.5)],
            [C64::new(0.2, 0.0), C64::new(3.0, -1.0), C64::new(1.0, 0.0)],
            [C64::new(0.0, 0.3), C64::new(-1.0, 0.0), C64::new(5.0, 0.0)],
        ];
        let b = vec![C64::new(1.0, 0.0), C64::new(0.0, 2.0), C64::new(-1.0, 1.0)];
        let apply = |x: &[C64], y: &mut [C64]| {
            for i in 0..3 {
                y[i] = (0..3).map(|j| a[i][j] * x[j]).sum();
            }
        };
        let out = gmres(apply, &b, vec![C64::new(0.0, 0.0); 3], 2, 1e-13, 100);
        let mut ax = vec![C64::new(0.0, 0.0); 3];
        apply(&out.x, &mut ax);
        for i in 0..3 {
            assert!((ax[i] - b[i]).norm() < 1e-12);
        }
    }
}
