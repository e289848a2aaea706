//! Wigner functions of single-mode states, `W(alpha)` normalised so that
//! `integral W d^2 alpha = 1` (vacuum peak `2 / pi`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};
use crate::fock::{annihilation_op, shifted_op, DensityMatrix};
use crate::C64;

/// Default tolerance on the grid's probability mass.
pub const DEFAULT_MASS_TOL: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    Explicit {
        re_min: f64,
        re_max: f64,
        im_min: f64,
        im_max: f64,
        n_re: usize,
        n_im: usize,
    },
    /// Square grid centred on the state's centroid with half-width
    /// `4 max(std) + |centroid|`.
    Auto { points: usize },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Auto { points: 121 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub re_axis: Vec<f64>,
    pub im_axis: Vec<f64>,
    /// `values[i][j]` at `re_axis[j] + i im_axis[i]`.
    pub values: Vec<Vec<f64>>,
    /// Displacement folded into the evaluation.
    pub frame_offset: C64,
    /// Riemann sum of `W` over the grid.
    pub mass: f64,
    pub max_imag_residue: f64,
    pub warnings: Vec<String>,
}

impl WignerGrid {
    pub fn cell_area(&self) -> f64 {
        step(&self.re_axis) * step(&self.im_axis)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().flatten().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Rows `re,im,W` with a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "re,im,W")?;
        for (i, row) in self.values.iter().enumerate() {
            for (j, w) in row.iter().enumerate() {
                writeln!(out, "{:.12e},{:.12e},{:.12e}", self.re_axis[j], self.im_axis[i], w)?;
            }
        }
        Ok(())
    }
}

fn step(axis: &[f64]) -> f64 {
    if axis.len() < 2 {
        1.0
    } else {
        (axis[axis.len() - 1] - axis[0]) / (axis.len() - 1) as f64
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// Mean and largest quadrature standard deviation in the undisplaced frame.
fn centroid_and_spread(rho: &DensityMatrix) -> Result<(C64, f64)> {
    let a = shifted_op(&annihilation_op(rho.dim())?, rho.displacement()[0]);
    let ad = a.adjoint();
    let mean = rho.expect(&a)?;
    let n = rho.expect(&ad.mul(&a)?)?.re;
    let sigma = rho.expect(&a.mul(&a)?)?;
    // Var(x_theta) for x_theta = (a e^{-i theta} + h.c.) / 2, maximised over theta
    let sym = n + 0.5 - mean.norm_sqr();
    let anti = (sigma - mean * mean).norm();
    let var = 0.5 * (sym + anti);
    Ok((mean, var.max(0.0).sqrt()))
}

fn axes(rho: &DensityMatrix, spec: &GridSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    match *spec {
        GridSpec::Explicit {
            re_min,
            re_max,
            im_min,
            im_max,
            n_re,
            n_im,
        } => {
            let finite = [re_min, re_max, im_min, im_max].iter().all(|v| v.is_finite());
            if !finite || re_min >= re_max || im_min >= im_max || n_re < 2 || n_im < 2 {
                return Err(Error::param(
                    "grid",
                    "needs finite bounds with min < max and at least 2 points per axis",
                ));
            }
            Ok((linspace(re_min, re_max, n_re), linspace(im_min, im_max, n_im)))
        }
        GridSpec::Auto { points } => {
            if points < 2 {
                return Err(Error::param("grid.points", "must be at least 2"));
            }
            let (c, std) = centroid_and_spread(rho)?;
            let half = 4.0 * std.max(0.5) + c.norm();
            Ok((
                linspace(c.re - half, c.re + half, points),
                linspace(c.im - half, c.im + half, points),
            ))
        }
    }
}

/// Complex value of the Fock series at `a` (displaced-frame coordinate).
/// The real part is `W`; the imaginary part is round-off for Hermitian input.
fn series(rho: faer::MatRef<'_, C64>, a: C64, list: &mut [C64]) -> C64 {
    let m_dim = rho.nrows();
    let sq: Vec<f64> = (0..m_dim).map(|k| (k as f64).sqrt()).collect();
    list[0] = C64::new(2.0 / PI * (-2.0 * a.norm_sqr()).exp(), 0.0);
    let mut w = rho[(0, 0)] * list[0];
    for n in 1..m_dim {
        list[n] = 2.0 * a * list[n - 1] / sq[n];
        w += rho[(0, n)] * list[n] + rho[(n, 0)] * list[n].conj();
    }
    let ac = a.conj();
    for m in 1..m_dim {
        let mut temp = list[m];
        list[m] = (2.0 * ac * temp - sq[m] * list[m - 1]) / sq[m];
        w += rho[(m, m)] * list[m];
        for n in m + 1..m_dim {
            let next = (2.0 * a * list[n - 1] - sq[m] * temp) / sq[n];
            temp = list[n];
            list[n] = next;
            w += rho[(m, n)] * list[n] + rho[(n, m)] * list[n].conj();
        }
    }
    w
}

/// `W(alpha)` of a single-mode state on the requested grid, in the
/// undisplaced frame.
pub fn wigner(rho: &DensityMatrix, spec: &GridSpec) -> Result<WignerGrid> {
    wigner_with_tol(rho, spec, DEFAULT_MASS_TOL)
}

pub fn wigner_with_tol(rho: &DensityMatrix, spec: &GridSpec, mass_tol: f64) -> Result<WignerGrid> {
    if rho.dims().len() != 1 {
        return Err(Error::Shape(format!(
            "Wigner function needs a single-mode state, got dims {:?}",
            rho.dims()
        )));
    }
    rho.validate()?;
    let offset = rho.displacement()[0];
    let (re_axis, im_axis) = axes(rho, spec)?;
    let m = rho.matrix();
    let dim = rho.dim();
    let rows: Vec<(Vec<f64>, f64)> = im_axis
        .par_iter()
        .map(|&y| {
            let mut list = vec![C64::new(0.0, 0.0); dim];
            let mut residue: f64 = 0.0;
            let row = re_axis
                .iter()
                .map(|&x| {
                    let w = series(m, C64::new(x, y) - offset, &mut list);
                    residue = residue.max(w.im.abs());
                    w.re
                })
                .collect();
            (row, residue)
        })
        .collect();
    let max_imag_residue = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let values: Vec<Vec<f64>> = rows.into_iter().map(|r| r.0).collect();
    let mut grid = WignerGrid {
        re_axis,
        im_axis,
        values,
        frame_offset: offset,
        mass: 0.0,
        max_imag_residue,
        warnings: Vec::new(),
    };
    grid.mass = grid.values.iter().flatten().sum::<f64>() * grid.cell_area();
    if (grid.mass - 1.0).abs() > 10.0 * mass_tol {
        grid.warnings.push(format!(
            "grid captures probability mass {:.6}; widen it for a faithful picture",
            grid.mass
        ));
    }
    Ok(grid)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerSummary {
    pub min_value: f64,
    pub max_value: f64,
    /// Local maxima above half the global maximum, largest first.
    pub peak_locations: Vec<C64>,
    /// Angular variance about the centroid direction, weighted by `max(W, 0)`.
    pub phase_variance: f64,
    pub bimodality_flag: bool,
}

pub fn summarize(grid: &WignerGrid) -> WignerSummary {
    let v = &grid.values;
    let ni = v.len();
    let nj = if ni > 0 { v[0].len() } else { 0 };
    let max_value = grid.max_value();
    let mut peaks: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..ni {
        for j in 0..nj {
            let w = v[i][j];
            if w <= 0.5 * max_value {
                continue;
            }
            let mut is_max = true;
            'nb: for di in -1i64..=1 {
                for dj in -1i64..=1 {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let (ii, jj) = (i as i64 + di, j as i64 + dj);
                    if ii < 0 || jj < 0 || ii >= ni as i64 || jj >= nj as i64 {
                        continue;
                    }
                    let other = v[ii as usize][jj as usize];
                    // ties break toward the lower index so a flat top counts once
                    if other > w || (other == w && (di, dj) < (0, 0)) {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                peaks.push((w, i, j));
            }
        }
    }
    peaks.sort_by(|a, b| b.0.total_cmp(&a.0));
    let bimodality_flag = peaks.iter().enumerate().any(|(k, p)| {
        peaks[k + 1..].iter().any(|q| {
            let di = p.1.abs_diff(q.1);
            let dj = p.2.abs_diff(q.2);
            di.max(dj) > 3
        })
    });
    let peak_locations = peaks
        .iter()
        .map(|&(_, i, j)| C64::new(grid.re_axis[j], grid.im_axis[i]))
        .collect();

    let mut total = 0.0;
    let mut centroid = C64::new(0.0, 0.0);
    for (i, row) in v.iter().enumerate() {
        for (j, w) in row.iter().enumerate() {
            let w = w.max(0.0);
            total += w;
            centroid += w * C64::new(grid.re_axis[j], grid.im_axis[i]);
        }
    }
    let phase_variance = if total > 0.0 {
        let mean_angle = (centroid / total).arg();
        let mut acc = 0.0;
        for (i, row) in v.iter().enumerate() {
            for (j, w) in row.iter().enumerate() {
                let w = w.max(0.0);
                let z = C64::new(grid.re_axis[j], grid.im_axis[i]);
                if w == 0.0 || z.norm() == 0.0 {
                    continue;
                }
                let d = (z * C64::from_polar(1.0, -mean_angle)).arg();
                acc += w * d * d;
            }
        }
        acc / total
    } else {
        0.0
    };
    WignerSummary {
        min_value: grid.min_value(),
        max_value,
        peak_locations,
        phase_variance,
        bimodality_flag,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn explicit(h: f64, n: usize) -> GridSpec {
        GridSpec::Explicit {
            re_min: -h,
            re_max: h,
            im_min: -h,
            im_max: h,
            n_re: n,
            n_im: n,
        }
    }

    #[test]
    fn vacuum_peak() {
        let rho = DensityMatrix::fock(4, 0).unwrap();
        let g = wigner(&rho, &explicit(1.0, 3)).unwrap();
        assert_abs_diff_eq!(g.values[1][1], 2.0 / PI, epsilon = 1e-14);
        assert_abs_diff_eq!(g.values[0][0], 2.0 / PI * (-4.0f64).exp(), epsilon = 1e-14);
    }

    #[test]
    fn one_photon_negativity() {
        let rho = DensityMatrix::fock(4, 1).unwrap();
        let g = wigner(&rho, &explicit(1.0, 3)).unwrap();
        assert_abs_diff_eq!(g.values[1][1], -2.0 / PI, epsilon = 1e-14);
    }

    #[test]
    fn rejects_two_mode_input() {
        let a = DensityMatrix::fock(2, 0).unwrap();
        let rho = a.tensor(&a).unwrap();
        assert!(matches!(wigner(&rho, &GridSpec::default()), Err(Error::Shape(_))));
    }

    #[test]
    fn mass_warning_on_small_grid() {
        let rho = DensityMatrix::coherent(30, C64::new(3.0, 0.0)).unwrap();
        let g = wigner(&rho, &explicit(1.0, 21)).unwrap();
        assert!(!g.warnings.is_empty());
    }
}
