//! Two-mode master equation of the driven model in a displaced Fock basis.
//!
//! Mode 0 is the normal mode `c`, mode 1 the mechanical mode `b`. In the
//! frame rotating at the probe frequency
//!
//! `H = -2 Delta_p b^dag b + gtilde (c^dag^2 b + b^dag c^2) + i Omega_- (c^dag - c)`
//!
//! with dissipators `kappa_-(n_- + 1) D[c]`, `kappa_- n_- D[c^dag]`,
//! `gamma1 (n_1 + 1) D[b]` and `gamma1 n_1 D[b^dag]`. A displacement
//! `(d_c, d_b)` substitutes `c -> c + d_c`, `b -> b + d_b` everywhere, which is
//! the exact unitary change of frame. Superoperators act on column-stacked
//! density matrices: `vec(rho)[i + j N] = rho[i, j]`.

use std::sync::OnceLock;

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, MatRef, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{
    annihilation_op, hermitian_part, partial_trace, shifted_op, tensor_product, DensityMatrix, Operator,
    SparseMatrix,
};
use crate::krylov::gmres;
use crate::semiclassical::{solve_self_consistency, DpoModel, SolverOptions};
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Frame offsets: physical `c = c' + c`, physical `b = b' + b`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Displacement {
    pub c: C64,
    pub b: C64,
}

impl Displacement {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Semiclassical fixed point `(alpha, -i beta)`.
    pub fn semiclassical(model: &DpoModel, options: &SolverOptions) -> Result<Self> {
        let sol = match solve_self_consistency(model, options) {
            Ok(s) => s,
            Err(Error::SemiclassicalNoConvergence { best, .. }) => *best,
            Err(e) => return Err(e),
        };
        Ok(Displacement {
            c: sol.alpha,
            b: -I * sol.beta,
        })
    }

    fn as_vec(&self) -> Vec<C64> {
        vec![self.c, self.b]
    }
}

/// Model parameters the Liouvillian was assembled from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub kappa_minus: f64,
    pub gamma1: f64,
    pub nth_minus: f64,
    pub nth_1: f64,
    pub gtilde_minus: f64,
    pub delta_p: f64,
    pub omega_minus: f64,
}

impl From<&DpoModel> for Rates {
    fn from(m: &DpoModel) -> Self {
        Rates {
            kappa_minus: m.kappa_minus,
            gamma1: m.gamma1,
            nth_minus: m.nth_minus,
            nth_1: m.nth_1,
            gtilde_minus: m.gtilde_minus,
            delta_p: m.delta_p,
            omega_minus: m.omega_minus,
        }
    }
}

/// Largest composite dimension `Nc * Nb` accepted by [`build_liouvillian`].
pub const DEFAULT_MAX_STATE_DIM: usize = 2048;

fn ladder(dim: usize) -> Result<Operator> {
    if dim == 1 {
        Operator::zeros(&[1])
    } else {
        annihilation_op(dim)
    }
}

/// Undisplaced `c` and `b` on the composite space.
pub fn mode_operators(dims: (usize, usize)) -> Result<(Operator, Operator)> {
    let (nc, nb) = dims;
    let c = tensor_product(&ladder(nc)?, &Operator::identity(&[nb])?)?;
    let b = tensor_product(&Operator::identity(&[nc])?, &ladder(nb)?)?;
    Ok((c, b))
}

fn check_dims(dims: (usize, usize)) -> Result<()> {
    if dims.0 < 2 || dims.1 < 1 {
        return Err(Error::InvalidDimension(format!(
            "need Nc >= 2 and Nb >= 1, got {dims:?}"
        )));
    }
    Ok(())
}

pub fn build_hamiltonian(model: &DpoModel, dims: (usize, usize), displacement: Displacement) -> Result<Operator> {
    check_dims(dims)?;
    if !(displacement.c.is_finite() && displacement.b.is_finite()) {
        return Err(Error::param("displacement", "must be finite"));
    }
    let (c0, b0) = mode_operators(dims)?;
    let c = shifted_op(&c0, displacement.c);
    let b = shifted_op(&b0, displacement.b);
    let cd = c.adjoint();
    let bd = b.adjoint();
    let g = model.gtilde_minus;
    let mut h = Operator::zeros(c.dims())?;
    if model.delta_p != 0.0 {
        h = h.add(&bd.mul(&b)?.scale(C64::new(-2.0 * model.delta_p, 0.0)))?;
    }
    if g != 0.0 {
        let up = cd.mul(&cd)?.mul(&b)?;
        let down = bd.mul(&c)?.mul(&c)?;
        h = h.add(&up.add(&down)?.scale(C64::new(g, 0.0)))?;
    }
    if model.omega_minus != 0.0 {
        h = h.add(&cd.sub(&c)?.scale(I * model.omega_minus))?;
    }
    let defect = h.hermiticity_defect();
    let scale = h.matrix().iter().map(|(_, _, v)| v.norm()).fold(1.0, f64::max);
    if defect > 1e-10 * scale {
        return Err(Error::Internal(format!("Hamiltonian is not Hermitian (defect {defect:.3e})")));
    }
    Ok(h)
}

/// Dissipator `rate * D[op + offset]` in the displaced frame.
#[derive(Clone, Debug)]
pub struct Jump {
    pub rate: f64,
    pub op: SparseMatrix,
    pub offset: C64,
    op_dag: SparseMatrix,
}

#[derive(Debug)]
pub struct Liouvillian {
    dims: (usize, usize),
    displacement: Displacement,
    rates: Rates,
    hamiltonian: Operator,
    jumps: Vec<Jump>,
    /// `-i H' - 1/2 sum_k r_k J_k^dag J_k`, with `H'` absorbing the jump offsets
    a_eff: SparseMatrix,
    a_eff_dag: SparseMatrix,
    superop: OnceLock<SparseMatrix>,
}

pub fn build_liouvillian(
    h: &Operator,
    model: &DpoModel,
    dims: (usize, usize),
    displacement: Displacement,
) -> Result<Liouvillian> {
    build_liouvillian_with_capacity(h, model, dims, displacement, DEFAULT_MAX_STATE_DIM)
}

pub fn build_liouvillian_with_capacity(
    h: &Operator,
    model: &DpoModel,
    dims: (usize, usize),
    displacement: Displacement,
    max_state_dim: usize,
) -> Result<Liouvillian> {
    check_dims(dims)?;
    if h.dims() != [dims.0, dims.1] {
        return Err(Error::Shape(format!(
            "Hamiltonian dims {:?} vs requested {dims:?}",
            h.dims()
        )));
    }
    let n = dims.0 * dims.1;
    if n > max_state_dim {
        return Err(Error::Capacity(format!(
            "state dimension {n} (dims {dims:?}, superoperator {n}^2 = {}) exceeds the limit {max_state_dim}",
            n.saturating_mul(n)
        )));
    }
    let (c0, b0) = mode_operators(dims)?;
    let c = c0.matrix().clone();
    let b = b0.matrix().clone();
    let (dc, db) = (displacement.c, displacement.b);
    let km = model.kappa_minus;
    let g1 = model.gamma1;
    let mut jumps = Vec::new();
    for (rate, op, offset) in [
        (km * (model.nth_minus + 1.0), c.clone(), dc),
        (km * model.nth_minus, c.adjoint(), dc.conj()),
        (g1 * (model.nth_1 + 1.0), b.clone(), db),
        (g1 * model.nth_1, b.adjoint(), db.conj()),
    ] {
        if rate > 0.0 {
            let op_dag = op.adjoint();
            jumps.push(Jump { rate, op, op_dag, offset });
        }
    }
    // D[J + d] = D[J] - i[(i r / 2)(conj(d) J - d J^dag), .]: the scalar part
    // of a displaced jump moves into the Hamiltonian, which keeps the large
    // |d|^2 terms out of the drift the preconditioner inverts.
    let mut h_eff = h.matrix().clone();
    for j in &jumps {
        let corr = j.op.scale(j.offset.conj()).sub(&j.op_dag.scale(j.offset));
        h_eff = h_eff.add(&corr.scale(I * (0.5 * j.rate)));
    }
    let mut a_eff = h_eff.scale(-I);
    for j in &jumps {
        a_eff = a_eff.add(&j.op_dag.matmul(&j.op).scale(C64::new(-0.5 * j.rate, 0.0)));
    }
    let a_eff_dag = a_eff.adjoint();
    Ok(Liouvillian {
        dims,
        displacement,
        rates: Rates::from(model),
        hamiltonian: h.clone(),
        jumps,
        a_eff,
        a_eff_dag,
        superop: OnceLock::new(),
    })
}

/// `X * S` for dense `X` and sparse `S`.
fn dense_mul_sparse(x: MatRef<'_, C64>, s: &SparseMatrix) -> Mat<C64> {
    let mut out = Mat::<C64>::zeros(x.nrows(), s.ncols());
    for (k, j, v) in s.iter() {
        let src = x.col(k);
        let mut dst = out.col_mut(j);
        for i in 0..x.nrows() {
            dst[i] += v * src[i];
        }
    }
    out
}

impl Liouvillian {
    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn state_dim(&self) -> usize {
        self.dims.0 * self.dims.1
    }

    pub fn displacement(&self) -> Displacement {
        self.displacement
    }

    pub fn rates(&self) -> &Rates {
        &self.rates
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// `L rho` without assembling the superoperator.
    pub fn apply(&self, rho: MatRef<'_, C64>) -> Mat<C64> {
        let mut out = self.a_eff.mul_dense(rho);
        out += dense_mul_sparse(rho, &self.a_eff_dag);
        for j in &self.jumps {
            let t = j.op.mul_dense(rho);
            let mut u = dense_mul_sparse(t.as_ref(), &j.op_dag);
            u *= faer::Scale(C64::new(j.rate, 0.0));
            out += u;
        }
        out
    }

    /// `A rho + rho A^dag`, the part of `L` without recycling terms.
    fn apply_drift(&self, rho: MatRef<'_, C64>) -> Mat<C64> {
        let mut out = self.a_eff.mul_dense(rho);
        out += dense_mul_sparse(rho, &self.a_eff_dag);
        out
    }

    /// Column-stacked superoperator, assembled on first use.
    pub fn superoperator(&self) -> &SparseMatrix {
        self.superop.get_or_init(|| {
            let n = self.state_dim();
            let id = SparseMatrix::identity(n);
            let mut l = id.kron(&self.a_eff).add(&self.a_eff.conj().kron(&id));
            for j in &self.jumps {
                l = l.add(&j.op.conj().kron(&j.op).scale(C64::new(j.rate, 0.0)));
            }
            l
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.superoperator().frobenius_norm()
    }

    /// Largest entry of `vec(I)^T L`; zero for a trace-preserving generator.
    pub fn trace_preservation_defect(&self) -> f64 {
        let n = self.state_dim();
        let mut acc = vec![ZERO; n * n];
        for (row, col, v) in self.superoperator().iter() {
            if row % (n + 1) == 0 {
                acc[col] += v;
            }
        }
        acc.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

pub fn vectorize(rho: MatRef<'_, C64>) -> Vec<C64> {
    let n = rho.nrows();
    let mut v = Vec::with_capacity(n * rho.ncols());
    for j in 0..rho.ncols() {
        for i in 0..n {
            v.push(rho[(i, j)]);
        }
    }
    v
}

pub fn unvectorize(v: &[C64], n: usize) -> Mat<C64> {
    Mat::from_fn(n, n, |i, j| v[i + j * n])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// Sparse direct solve for small systems, preconditioned GMRES otherwise.
    Auto,
    Direct,
    Iterative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolvedBy {
    Direct,
    InverseIteration,
    Gmres,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateOptions {
    pub method: SolveMethod,
    /// Relative GMRES residual target.
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
    /// `Auto` uses the direct solver up to this composite dimension.
    pub direct_max_dim: usize,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        SteadyStateOptions {
            method: SolveMethod::Auto,
            tol: 1e-11,
            max_iter: 20_000,
            restart: 120,
            direct_max_dim: 48,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    pub method: SolvedBy,
    pub iterations: usize,
    /// `||L rho||_F` of the normalised solver output, before clipping.
    pub residual: f64,
    /// Total weight of the negative eigenvalues removed.
    pub clipped_mass: f64,
    pub min_eigenvalue: f64,
    pub warnings: Vec<String>,
}

/// Eigenvalues below this are reported as genuine positivity violations.
pub const CLIP_THRESHOLD: f64 = -1e-8;

pub fn steady_state(l: &Liouvillian, options: &SteadyStateOptions) -> Result<SteadyState> {
    steady_state_from(l, options, None)
}

/// Steady state with an optional starting guess for the iterative solver.
pub fn steady_state_from(
    l: &Liouvillian,
    options: &SteadyStateOptions,
    initial: Option<&DensityMatrix>,
) -> Result<SteadyState> {
    let n = l.state_dim();
    let direct = match options.method {
        SolveMethod::Direct => true,
        SolveMethod::Iterative => false,
        SolveMethod::Auto => n <= options.direct_max_dim,
    };
    let (raw, method, iterations) = if direct {
        solve_direct(l)?
    } else {
        let guess = match initial {
            Some(rho) if rho.dims() == [l.dims.0, l.dims.1] => rho.matrix().to_owned(),
            _ => default_guess(l)?,
        };
        let (x, its) = solve_gmres(l, options, guess)?;
        (x, SolvedBy::Gmres, its)
    };
    finalize(l, raw, method, iterations)
}

fn default_guess(l: &Liouvillian) -> Result<Mat<C64>> {
    let c = DensityMatrix::thermal(l.dims.0, l.rates.nth_minus)?;
    let b = DensityMatrix::thermal(l.dims.1, l.rates.nth_1)?;
    Ok(c.tensor(&b)?.matrix().to_owned())
}

fn finalize(l: &Liouvillian, raw: Mat<C64>, method: SolvedBy, iterations: usize) -> Result<SteadyState> {
    let n = l.state_dim();
    let tr: C64 = (0..n).map(|i| raw[(i, i)]).sum();
    if tr.norm() == 0.0 || !tr.is_finite() {
        return Err(Error::Numerical {
            message: "steady-state solution has zero or non-finite trace".into(),
            residual: f64::NAN,
        });
    }
    let mut rho = raw;
    rho *= faer::Scale(tr.inv());
    let residual = frob(l.apply(rho.as_ref()).as_ref());
    let herm = hermitian_part(rho.as_ref());
    let eig = herm.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Numerical {
        message: format!("eigendecomposition failed: {e:?}"),
        residual,
    })?;
    let values: Vec<f64> = (0..n).map(|i| eig.S().column_vector()[i].re).collect();
    let min_eigenvalue = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let clipped_mass: f64 = values.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
    let mut warnings = Vec::new();
    if min_eigenvalue < CLIP_THRESHOLD {
        warnings.push(format!(
            "steady state has eigenvalue {min_eigenvalue:.3e} below {CLIP_THRESHOLD:.0e}; clipped mass {clipped_mass:.3e}"
        ));
    }
    let data = if clipped_mass > 0.0 {
        let u = eig.U();
        let kept: Vec<f64> = values.iter().map(|&v| v.max(0.0)).collect();
        let total: f64 = kept.iter().sum();
        let mut scaled = u.to_owned();
        for (j, &w) in kept.iter().enumerate() {
            let s = C64::new(w / total, 0.0);
            scaled.col_mut(j).iter_mut().for_each(|z| *z *= s);
        }
        let out = &scaled * u.adjoint();
        hermitian_part(out.as_ref())
    } else {
        let t: f64 = (0..n).map(|i| herm[(i, i)].re).sum();
        let mut h = herm;
        h *= faer::Scale(C64::new(1.0 / t, 0.0));
        h
    };
    let rho = DensityMatrix::new(vec![l.dims.0, l.dims.1], data, l.displacement.as_vec())?;
    Ok(SteadyState {
        rho,
        method,
        iterations,
        residual,
        clipped_mass,
        min_eigenvalue,
        warnings,
    })
}

fn frob(m: MatRef<'_, C64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

fn to_faer(m: &SparseMatrix, replace_row: Option<usize>, shift: C64) -> Result<SparseColMat<usize, C64>> {
    let n = m.nrows();
    let mut triplets: Vec<Triplet<usize, usize, C64>> = m
        .iter()
        .filter(|&(r, _, _)| Some(r) != replace_row)
        .map(|(r, c, v)| Triplet::new(r, c, v))
        .collect();
    if shift != ZERO {
        triplets.extend((0..n).filter(|&i| Some(i) != replace_row).map(|i| Triplet::new(i, i, -shift)));
    }
    if let Some(row) = replace_row {
        let d = (n as f64).sqrt().round() as usize;
        triplets.extend((0..d).map(|i| Triplet::new(row, i * (d + 1), C64::new(1.0, 0.0))));
    }
    SparseColMat::try_new_from_triplets(n, n, &triplets)
        .map_err(|e| Error::Internal(format!("sparse assembly failed: {e:?}")))
}

/// Replaces the equation for `rho[0, 0]` by the trace condition and solves.
fn solve_direct(l: &Liouvillian) -> Result<(Mat<C64>, SolvedBy, usize)> {
    let n = l.state_dim();
    let sup = l.superoperator();
    let a = to_faer(sup, Some(0), ZERO)?;
    let attempt = a.sp_lu().ok().map(|lu| {
        let mut rhs = Mat::<C64>::zeros(n * n, 1);
        rhs[(0, 0)] = C64::new(1.0, 0.0);
        lu.solve_in_place(rhs.as_mut());
        rhs
    });
    if let Some(x) = attempt {
        let v: Vec<C64> = (0..n * n).map(|i| x[(i, 0)]).collect();
        if v.iter().all(|z| z.is_finite()) {
            let rho = unvectorize(&v, n);
            let res = frob(l.apply(rho.as_ref()).as_ref());
            if res <= 1e-8 * l.frobenius_norm().max(1.0) {
                return Ok((rho, SolvedBy::Direct, 1));
            }
        }
    }
    inverse_iteration(l)
}

/// Null vector of `L` by shifted inverse iteration from two different starts;
/// distinct limits signal a degenerate steady state.
fn inverse_iteration(l: &Liouvillian) -> Result<(Mat<C64>, SolvedBy, usize)> {
    let n = l.state_dim();
    let sup = l.superoperator();
    let scale = l.frobenius_norm() / (n as f64);
    let shift = C64::new(1e-9 * scale.max(1e-300), 0.0);
    let lu = to_faer(sup, None, shift)?
        .sp_lu()
        .map_err(|e| Error::DegenerateSteadyState(format!("shifted factorisation failed: {e:?}")))?;
    let run = |start: Vec<C64>| -> (Mat<C64>, usize) {
        let mut x = Mat::<C64>::from_fn(n * n, 1, |i, _| start[i]);
        let mut its = 0;
        for _ in 0..50 {
            its += 1;
            lu.solve_in_place(x.as_mut());
            let nrm = frob(x.as_ref());
            if !(nrm.is_finite() && nrm > 0.0) {
                break;
            }
            x *= faer::Scale(C64::new(1.0 / nrm, 0.0));
            let v: Vec<C64> = (0..n * n).map(|i| x[(i, 0)]).collect();
            let rho = unvectorize(&v, n);
            if frob(l.apply(rho.as_ref()).as_ref()) < 1e-12 * l.frobenius_norm() {
                break;
            }
        }
        let v: Vec<C64> = (0..n * n).map(|i| x[(i, 0)]).collect();
        (unvectorize(&v, n), its)
    };
    let identity: Vec<C64> = (0..n * n)
        .map(|k| if k % (n + 1) == 0 { C64::new(1.0, 0.0) } else { ZERO })
        .collect();
    let ground: Vec<C64> = (0..n * n).map(|k| if k == 0 { C64::new(1.0, 0.0) } else { ZERO }).collect();
    let (r1, i1) = run(identity);
    let (r2, i2) = run(ground);
    let normalise = |m: &Mat<C64>| -> Option<Mat<C64>> {
        let tr: C64 = (0..n).map(|i| m[(i, i)]).sum();
        if tr.norm() < 1e-12 * frob(m.as_ref()) || !tr.is_finite() {
            None
        } else {
            let mut out = m.clone();
            out *= faer::Scale(tr.inv());
            Some(out)
        }
    };
    let (a, b) = match (normalise(&r1), normalise(&r2)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::DegenerateSteadyState(
                "null vector of the Liouvillian has zero trace".into(),
            ))
        }
    };
    let diff = frob((&a - &b).as_ref()) / frob(a.as_ref());
    if diff > 1e-6 {
        return Err(Error::DegenerateSteadyState(format!(
            "inverse iteration converged to distinct states (relative difference {diff:.3e})"
        )));
    }
    Ok((a, SolvedBy::InverseIteration, i1 + i2))
}

/// Exact inverse of `rho -> A rho + rho A^dag` through the eigenbasis of `A`.
struct DriftInverse {
    v: Mat<C64>,
    v_inv: Mat<C64>,
    lambda: Vec<C64>,
    floor: f64,
}

impl DriftInverse {
    fn new(a: &SparseMatrix) -> Result<Self> {
        let dense = a.to_dense();
        let eig = dense.eigen().map_err(|e| Error::Numerical {
            message: format!("eigendecomposition of the drift failed: {e:?}"),
            residual: f64::NAN,
        })?;
        let v = eig.U().to_owned();
        let lambda: Vec<C64> = (0..v.ncols()).map(|i| eig.S().column_vector()[i]).collect();
        let v_inv = v.partial_piv_lu().inverse();
        let scale = lambda.iter().map(|z| z.norm()).fold(0.0, f64::max);
        Ok(DriftInverse {
            v,
            v_inv,
            lambda,
            floor: 1e-10 * scale.max(1e-300),
        })
    }

    fn apply(&self, y: MatRef<'_, C64>) -> Mat<C64> {
        let z = &self.v_inv * y * self.v_inv.adjoint();
        let n = z.nrows();
        let x = Mat::from_fn(n, n, |i, j| {
            let mut d = self.lambda[i] + self.lambda[j].conj();
            if d.norm() < self.floor {
                d = C64::new(-self.floor, 0.0);
            }
            z[(i, j)] / d
        });
        &self.v * x * self.v.adjoint()
    }
}

/// Solves `L rho - w tr(rho) = -w` with `w = s I / N`, right-preconditioned
/// by the drift inverse. The system is nonsingular when the steady state is
/// unique, and any solution has unit trace and `L rho = 0`.
///
/// The drift eigenbasis can be badly conditioned, which puts a floor under
/// the residual GMRES can reach through the preconditioner. An outer
/// refinement loop therefore recomputes the true residual without it and
/// solves only for corrections at a loose inner tolerance.
fn solve_gmres(l: &Liouvillian, options: &SteadyStateOptions, guess: Mat<C64>) -> Result<(Mat<C64>, usize)> {
    const INNER_TOL: f64 = 1e-6;
    const MAX_ROUNDS: usize = 30;
    let n = l.state_dim();
    let pre = DriftInverse::new(&l.a_eff)?;
    let s = l.rates.kappa_minus.max(l.rates.gamma1);
    let w_diag = C64::new(s / n as f64, 0.0);
    let shifted = |rho: MatRef<'_, C64>| -> Mat<C64> {
        let mut lr = l.apply(rho);
        let t = (0..n).map(|i| rho[(i, i)]).sum::<C64>() * w_diag;
        for i in 0..n {
            lr[(i, i)] -= t;
        }
        lr
    };
    let operator = |y: &[C64], out: &mut [C64]| {
        let rho = pre.apply(unvectorize(y, n).as_ref());
        out.copy_from_slice(&vectorize(shifted(rho.as_ref()).as_ref()));
    };
    let b_norm = w_diag.norm() * (n as f64).sqrt();
    // keep the Krylov basis within about 1 GiB
    let per_vector = (n * n * std::mem::size_of::<C64>()).max(1);
    let restart = options.restart.min((1usize << 30) / per_vector).max(10);

    let mut rho = guess;
    let mut iterations = 0;
    let mut rel = f64::INFINITY;
    for round in 0..MAX_ROUNDS {
        let mut r = shifted(rho.as_ref());
        r *= faer::Scale(C64::new(-1.0, 0.0));
        for i in 0..n {
            r[(i, i)] -= w_diag;
        }
        let r_norm = frob(r.as_ref());
        rel = r_norm / b_norm;
        if rel < options.tol || iterations >= options.max_iter {
            break;
        }
        let rhs = vectorize(r.as_ref());
        // the first round starts from the drift image of the guess
        let (target, y0) = if round == 0 {
            let y0 = vectorize(l.apply_drift(rho.as_ref()).as_ref());
            rho = Mat::zeros(n, n);
            let full: Vec<C64> = (0..n * n)
                .map(|k| if k % (n + 1) == 0 { -w_diag } else { ZERO })
                .collect();
            (full, y0)
        } else {
            (rhs, vec![ZERO; n * n])
        };
        let inner_tol = if round == 0 { options.tol.max(INNER_TOL) } else { (options.tol * b_norm / r_norm).max(INNER_TOL) };
        let out = gmres(
            operator,
            &target,
            y0,
            restart,
            inner_tol,
            options.max_iter - iterations,
        );
        iterations += out.iterations;
        rho += pre.apply(unvectorize(&out.x, n).as_ref());
    }
    if !(rel < options.tol) {
        return Err(Error::Numerical {
            message: format!(
                "GMRES did not reach tolerance {:.1e} in {iterations} iterations",
                options.tol
            ),
            residual: rel,
        });
    }
    Ok((rho, iterations))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub mean_c: C64,
    pub n_c: f64,
    pub sigma_c: C64,
    pub mean_b: C64,
    pub n_b: f64,
    /// `<c^dag^2 c^2> / <c^dag c>^2`; `None` when `<c^dag c> = 0`.
    pub g2: Option<f64>,
    /// Variance of `x = c e^{-i theta} + h.c.` with `theta = arg <c>`; vacuum gives 1.
    pub c_amplitude_variance: f64,
    pub purity: f64,
}

/// Physical-frame mode operators for a two-mode state.
fn physical_modes(rho: &DensityMatrix) -> Result<(Operator, Operator)> {
    let dims = rho.dims();
    if dims.len() != 2 {
        return Err(Error::Shape(format!("expected a two-mode state, got dims {dims:?}")));
    }
    let (c, b) = mode_operators((dims[0], dims[1]))?;
    let d = rho.displacement();
    Ok((shifted_op(&c, d[0]), shifted_op(&b, d[1])))
}

/// Moments in the undisplaced frame.
pub fn observables(rho: &DensityMatrix) -> Result<Observables> {
    let (c, b) = physical_modes(rho)?;
    let cd = c.adjoint();
    let mean_c = rho.expect(&c)?;
    let n_c = rho.expect(&cd.mul(&c)?)?.re;
    let sigma_c = rho.expect(&c.mul(&c)?)?;
    let mean_b = rho.expect(&b)?;
    let n_b = rho.expect(&b.adjoint().mul(&b)?)?.re;
    let g2 = g2_direct(rho).ok();
    let phase = if mean_c.norm() > 0.0 { mean_c / mean_c.norm() } else { C64::new(1.0, 0.0) };
    let rot = phase.conj() * phase.conj();
    let c_amplitude_variance = 2.0 * (rot * sigma_c).re + 2.0 * n_c + 1.0 - 4.0 * mean_c.norm_sqr();
    Ok(Observables {
        mean_c,
        n_c,
        sigma_c,
        mean_b,
        n_b,
        g2,
        c_amplitude_variance,
        purity: rho.purity(),
    })
}

/// `<c^dag^2 c^2> / <c^dag c>^2` from the truncated state.
pub fn g2_direct(rho: &DensityMatrix) -> Result<f64> {
    let (c, _) = physical_modes(rho)?;
    let cd = c.adjoint();
    let n = rho.expect(&cd.mul(&c)?)?.re;
    if !(n > 0.0) {
        return Err(Error::Undefined("g2 with zero occupation".into()));
    }
    let num = rho.expect(&cd.mul(&cd)?.mul(&c)?.mul(&c)?)?.re;
    Ok(num / (n * n))
}

/// Reduced states `(rho_c, rho_b)`.
pub fn reduced_states(rho: &DensityMatrix) -> Result<(DensityMatrix, DensityMatrix)> {
    Ok((partial_trace(rho, 0)?, partial_trace(rho, 1)?))
}

/// Summed population of the two highest Fock levels of a single-mode state.
pub fn top_two_tail(rho: &DensityMatrix) -> f64 {
    let p = rho.populations();
    p.iter().rev().take(2).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationStep {
    pub dims: (usize, usize),
    pub tail_c: f64,
    pub tail_b: f64,
    /// Trace distance to the previous step's state, zero-padded to these dims.
    pub trace_distance: Option<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationOptions {
    pub tol: f64,
    pub growth: f64,
    /// Largest composite dimension `Nc * Nb` to try.
    pub max_state_dim: usize,
    pub solver: SteadyStateOptions,
}

impl Default for TruncationOptions {
    fn default() -> Self {
        TruncationOptions {
            tol: 1e-4,
            growth: 1.5,
            max_state_dim: 600,
            solver: SteadyStateOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TruncationResult {
    pub dims: (usize, usize),
    pub state: SteadyState,
    pub steps: Vec<TruncationStep>,
}

/// Steady state at fixed dims.
pub fn solve_at(
    model: &DpoModel,
    dims: (usize, usize),
    displacement: Displacement,
    options: &SteadyStateOptions,
    initial: Option<&DensityMatrix>,
) -> Result<SteadyState> {
    let h = build_hamiltonian(model, dims, displacement)?;
    let l = build_liouvillian(&h, model, dims, displacement)?;
    steady_state_from(&l, options, initial)
}

/// Grows the truncation until successive states and the Fock tails agree
/// with `options.tol`. A mode grows (by `growth`, rounded up) while its tail
/// is above tolerance; both grow when only the trace distance fails.
pub fn converge_truncation(
    model: &DpoModel,
    displacement: Displacement,
    start: (usize, usize),
    options: &TruncationOptions,
) -> Result<TruncationResult> {
    if start.0 < 4 || start.1 < 4 {
        return Err(Error::InvalidDimension(format!(
            "truncation search starts at dims >= (4, 4), got {start:?}"
        )));
    }
    if !(options.tol > 0.0) || !(options.growth > 1.0) {
        return Err(Error::param("truncation", "tol must be > 0 and growth > 1"));
    }
    let mut dims = start;
    let mut steps: Vec<TruncationStep> = Vec::new();
    let mut previous: Option<DensityMatrix> = None;
    loop {
        if dims.0 * dims.1 > options.max_state_dim {
            let last = steps.last().map(|s| s.dims).unwrap_or(dims);
            return Err(Error::TruncationNotConverged { last_dims: last, steps });
        }
        let started = std::time::Instant::now();
        let guess = match &previous {
            Some(p) => Some(p.embed_into(&[dims.0, dims.1])?),
            None => None,
        };
        let state = solve_at(model, dims, displacement, &options.solver, guess.as_ref())?;
        let (rc, rb) = reduced_states(&state.rho)?;
        let tail_c = top_two_tail(&rc);
        let tail_b = top_two_tail(&rb);
        let trace_distance = match &guess {
            Some(g) => Some(state.rho.trace_distance(g)?),
            None => None,
        };
        steps.push(TruncationStep {
            dims,
            tail_c,
            tail_b,
            trace_distance,
            iterations: state.iterations,
            residual: state.residual,
            seconds: started.elapsed().as_secs_f64(),
        });
        let tails_ok = tail_c < options.tol && tail_b < options.tol;
        if tails_ok && trace_distance.is_some_and(|d| d < options.tol) {
            return Ok(TruncationResult { dims, state, steps });
        }
        let grow = |n: usize| ((n as f64) * options.growth).ceil() as usize;
        dims = if tails_ok {
            (grow(dims.0), grow(dims.1))
        } else {
            (
                if tail_c >= options.tol { grow(dims.0) } else { dims.0 },
                if tail_b >= options.tol { grow(dims.1) } else { dims.1 },
            )
        };
        previous = Some(state.rho);
    }
}
