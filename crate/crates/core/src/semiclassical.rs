//! Classical and Gaussian semiclassical probe response of the reduced model.
//!
//! The mechanical amplitude is written `<b> = -i beta` and scaled as
//! `B = beta / beta_crit`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal_modes::critical_amplitude;
use crate::C64;


/// Drive strength in one of the interchangeable conventions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Drive {
    /// Normal-mode drive amplitude `Omega_-`.
    OmegaMinus(f64),
    /// Bare coherence `alpha0 = 2 Omega_- / kappa_-`.
    Alpha0(f64),
    /// Rescaled drive `sqrt(C_-/2) alpha0`, equal to 1 at the classical threshold.
    OmegaTilde(f64),
}

/// Driven two-mode model in the frame rotating at the probe frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpoModel {
    pub kappa_minus: f64,
    pub gamma1: f64,
    pub gtilde_minus: f64,
    pub nth_minus: f64,
    pub nth_1: f64,
    pub delta_p: f64,
    pub omega_minus: f64,
    pub alpha0: f64,
    pub omega_tilde: f64,
    /// `kappa_- / (4 gtilde_-)`; infinite for a decoupled model.
    pub beta_crit: f64,
    pub c_minus: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl DpoModel {
    pub fn new(
        kappa_minus: f64,
        gamma1: f64,
        gtilde_minus: f64,
        nth_minus: f64,
        nth_1: f64,
        delta_p: f64,
        drive: Drive,
    ) -> Result<Self> {
        for (name, v) in [("kappa_minus", kappa_minus), ("gamma1", gamma1)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be finite and > 0, got {v}")));
            }
        }
        for (name, v) in [("nth_minus", nth_minus), ("nth_1", nth_1)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if !gtilde_minus.is_finite() {
            return Err(Error::param("gtilde_minus", "must be finite"));
        }
        if !delta_p.is_finite() {
            return Err(Error::param("delta_p", "must be finite"));
        }
        let c_minus = 4.0 * gtilde_minus * gtilde_minus / (kappa_minus * gamma1);
        let mut model = DpoModel {
            kappa_minus,
            gamma1,
            gtilde_minus,
            nth_minus,
            nth_1,
            delta_p,
            omega_minus: 0.0,
            alpha0: 0.0,
            omega_tilde: 0.0,
            beta_crit: critical_amplitude(kappa_minus, gtilde_minus),
            c_minus,
            warnings: Vec::new(),
        };
        model.set_drive(drive)?;
        Ok(model)
    }

    /// Model specified through `beta_crit` and `C_-` instead of the raw rates.
    pub fn from_critical(
        kappa_minus: f64,
        beta_crit: f64,
        c_minus: f64,
        nth_minus: f64,
        nth_1: f64,
        delta_p: f64,
        drive: Drive,
    ) -> Result<Self> {
        if !(beta_crit.is_finite() && beta_crit > 0.0) {
            return Err(Error::param("beta_crit", format!("must be finite and > 0, got {beta_crit}")));
        }
        if !(c_minus.is_finite() && c_minus > 0.0) {
            return Err(Error::param("c_minus", format!("must be finite and > 0, got {c_minus}")));
        }
        let gtilde = kappa_minus / (4.0 * beta_crit);
        let gamma1 = 4.0 * gtilde * gtilde / (kappa_minus * c_minus);
        Self::new(kappa_minus, gamma1, gtilde, nth_minus, nth_1, delta_p, drive)
    }

    pub fn set_drive(&mut self, drive: Drive) -> Result<()> {
        let k = self.kappa_minus;
        let scale = (self.c_minus / 2.0).sqrt();
        let (omega_minus, alpha0) = match drive {
            Drive::OmegaMinus(w) => (w, 2.0 * w / k),
            Drive::Alpha0(a) => (a * k / 2.0, a),
            Drive::OmegaTilde(t) => {
                if t != 0.0 && scale == 0.0 {
                    return Err(Error::DegenerateModel(
                        "rescaled drive needs a nonzero cooperativity".into(),
                    ));
                }
                let a = if t == 0.0 { 0.0 } else { t / scale };
                (a * k / 2.0, a)
            }
        };
        if !omega_minus.is_finite() {
            return Err(Error::param("drive", "must be finite"));
        }
        self.omega_minus = omega_minus;
        self.alpha0 = alpha0;
        self.omega_tilde = scale * alpha0;
        Ok(())
    }

    pub fn with_drive(&self, drive: Drive) -> Result<Self> {
        let mut m = self.clone();
        m.set_drive(drive)?;
        Ok(m)
    }

    pub fn with_delta_p(&self, delta_p: f64) -> Self {
        DpoModel {
            delta_p,
            ..self.clone()
        }
    }

    /// Critical bare coherence `sqrt(2 / C_-)`.
    pub fn alpha0_crit(&self) -> f64 {
        (2.0 / self.c_minus).sqrt()
    }

    fn coupled(&self) -> bool {
        self.gtilde_minus != 0.0
    }

    /// `1 - 4 i Delta_p / gamma1`
    fn detuning_factor(&self) -> C64 {
        C64::new(1.0, -4.0 * self.delta_p / self.gamma1)
    }

    /// Mechanical amplitude `beta` for scaled amplitude `B`.
    pub fn beta_of(&self, b: C64) -> C64 {
        if self.coupled() {
            b * self.beta_crit
        } else {
            C64::new(0.0, 0.0)
        }
    }
}

/// Steady state of the classical equations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalRoot {
    /// `|alpha|^2`
    pub x: f64,
    pub alpha: C64,
    pub beta: C64,
    /// Smallest root, the sub-critical branch.
    pub preferred: bool,
}

/// Roots of `x |1 + 2 C x u|^2 = alpha0^2` with `u = 1/(1 - 4 i Delta_p/gamma1)`.
///
/// Writing `2 C u = a + i b` the equation is
/// `(a^2 + b^2) x^3 + 2 a x^2 + x - alpha0^2 = 0`; `a >= 0` makes the left side
/// strictly increasing on `x >= 0`, so there is exactly one non-negative root.
pub fn classical_response(model: &DpoModel) -> Vec<ClassicalRoot> {
    let a0 = model.alpha0;
    if a0 == 0.0 {
        let zero = C64::new(0.0, 0.0);
        return vec![ClassicalRoot {
            x: 0.0,
            alpha: zero,
            beta: zero,
            preferred: true,
        }];
    }
    let u = model.detuning_factor().inv();
    let w = u * (2.0 * model.c_minus);
    let (a, b) = (w.re, w.im);
    let c3 = a * a + b * b;
    let target = a0 * a0;
    let poly = |x: f64| ((c3 * x + 2.0 * a) * x + 1.0) * x - target;
    let deriv = |x: f64| (3.0 * c3 * x + 4.0 * a) * x + 1.0;

    // root lies in (0, alpha0^2] since the bracket factor is >= 1
    let (mut lo, mut hi) = (0.0, target);
    let mut x = if poly(hi) <= 0.0 { hi } else { 0.5 * hi };
    for _ in 0..200 {
        let fx = poly(x);
        if fx == 0.0 {
            break;
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - fx / deriv(x);
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.max(f64::MIN_POSITIVE) {
            x = next;
            break;
        }
        x = next;
    }
    let alpha = C64::new(a0, 0.0) / (1.0 + w * x);
    let beta = model.gtilde_minus * alpha * alpha / C64::new(0.5 * model.gamma1, -2.0 * model.delta_p);
    vec![ClassicalRoot {
        x,
        alpha,
        beta,
        preferred: true,
    }]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiclassicalSolution {
    pub b: C64,
    /// Mechanical amplitude `beta = B beta_crit`, with `<b> = -i beta`.
    pub beta: C64,
    pub alpha: C64,
    pub n: f64,
    pub sigma: C64,
    pub n_inc: f64,
    pub sigma_inc: C64,
    /// Gaussian second-order coherence; only defined on the `Delta_p = 0` branch.
    pub g2: Option<f64>,
    pub delta_p: f64,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

impl SemiclassicalSolution {
    /// `|alpha / alpha0|`, equal to `|1 - B| / (1 - |B|^2)` for any drive.
    pub fn alpha_ratio(&self) -> f64 {
        let b = self.b;
        (1.0 - b).norm() / (1.0 - b.norm_sqr())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative residual `|LHS - RHS| / (1 + |RHS|)` accepted as converged.
    pub tol: f64,
    pub max_iter: usize,
    /// Starting point for the complex branch.
    pub seed: Option<C64>,
    pub damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-11,
            max_iter: 20_000,
            seed: None,
            damping: 0.5,
        }
    }
}

/// Upper edge of the real search interval, `1 - 1e-9`.
const B_MAX: f64 = 1.0 - 1e-9;

/// Residual of the self-consistency equation for `B`.
pub fn self_consistency_residual(model: &DpoModel, b: C64) -> f64 {
    let (lhs, rhs) = sides(model, b);
    (lhs - rhs).norm() / (1.0 + rhs.norm())
}

fn kfac(model: &DpoModel) -> f64 {
    model.c_minus * (1.0 + 2.0 * model.nth_minus)
}

fn sides(model: &DpoModel, b: C64) -> (C64, C64) {
    let s = 1.0 - b.norm_sqr();
    let lhs = (model.detuning_factor() + kfac(model) / s) * b;
    let one_minus = 1.0 - b;
    let rhs = 4.0 * model.omega_tilde * model.omega_tilde * one_minus * one_minus / (s * s);
    (lhs, rhs)
}

/// Moments of the Gaussian state for a given `B`.
pub fn moments(model: &DpoModel, b: C64) -> SemiclassicalSolution {
    let s = 1.0 - b.norm_sqr();
    let alpha = (1.0 - b) / s * model.alpha0;
    let n_inc = (model.nth_minus + 0.5 * b.norm_sqr()) / s;
    let sigma_inc = -(model.nth_minus + 0.5) / s * b;
    let mut sol = SemiclassicalSolution {
        b,
        beta: model.beta_of(b),
        alpha,
        n: alpha.norm_sqr() + n_inc,
        sigma: alpha * alpha + sigma_inc,
        n_inc,
        sigma_inc,
        g2: None,
        delta_p: model.delta_p,
        converged: false,
        iterations: 0,
        residual: self_consistency_residual(model, b),
    };
    sol.g2 = g2_gaussian(&sol).ok();
    sol
}

fn finish(model: &DpoModel, b: C64, iterations: usize, tol: f64) -> Result<SemiclassicalSolution> {
    let mut sol = moments(model, b);
    sol.iterations = iterations;
    sol.converged = sol.residual < tol;
    if sol.converged {
        Ok(sol)
    } else {
        Err(Error::SemiclassicalNoConvergence {
            iterations,
            residual: sol.residual,
            best: Box::new(sol),
        })
    }
}

/// Solves the self-consistency equation for `B` on the branch `|B| < 1`.
pub fn solve_self_consistency(model: &DpoModel, options: &SolverOptions) -> Result<SemiclassicalSolution> {
    if !(options.tol > 0.0) {
        return Err(Error::param("tol", "must be > 0"));
    }
    if model.omega_tilde == 0.0 {
        return finish(model, C64::new(0.0, 0.0), 0, options.tol);
    }
    if model.delta_p == 0.0 {
        solve_real_branch(model, options)
    } else {
        solve_complex_branch(model, options)
    }
}

fn solve_real_branch(model: &DpoModel, options: &SolverOptions) -> Result<SemiclassicalSolution> {
    let k = kfac(model);
    let w2 = 4.0 * model.omega_tilde * model.omega_tilde;
    // on real B the right side reduces to 4 Omega~^2 / (1 + B)^2
    let f = |b: f64| (1.0 + k / (1.0 - b * b)) * b - w2 / ((1.0 + b) * (1.0 + b));
    let (mut lo, mut hi) = (0.0f64, B_MAX);
    if f(hi) < 0.0 {
        return finish(model, C64::new(hi, 0.0), 0, options.tol);
    }
    let mut iterations = 0;
    while iterations < options.max_iter {
        iterations += 1;
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let best = if f(lo).abs() <= f(hi).abs() { lo } else { hi };
    finish(model, C64::new(best, 0.0), iterations, options.tol)
}

/// Newton step for `g(B, conj B) = 0` using Wirtinger derivatives.
fn newton_step(model: &DpoModel, b: C64) -> C64 {
    let k = kfac(model);
    let w2 = 4.0 * model.omega_tilde * model.omega_tilde;
    let bb = b.conj();
    let s = 1.0 - b.norm_sqr();
    let one_minus = 1.0 - b;
    let (lhs, rhs) = sides(model, b);
    let g = lhs - rhs;
    let p_lhs = model.detuning_factor() + k / s + k * b * bb / (s * s);
    let q_lhs = k * b * b / (s * s);
    let p_rhs = w2 * (-2.0 * one_minus / (s * s) + 2.0 * one_minus * one_minus * bb / (s * s * s));
    let q_rhs = w2 * 2.0 * one_minus * one_minus * b / (s * s * s);
    let p = p_lhs - p_rhs;
    let q = q_lhs - q_rhs;
    let det = p.norm_sqr() - q.norm_sqr();
    (-g * p.conj() + q * g.conj()) / det
}

/// Damped fixed-point iteration followed by Newton polishing, from `start`.
fn refine(model: &DpoModel, start: C64, options: &SolverOptions, budget: usize) -> (C64, usize) {
    let mut b = start;
    let mut used = 0;
    let d = options.damping;
    let fp_budget = budget / 2;
    while used < fp_budget {
        used += 1;
        let s = 1.0 - b.norm_sqr();
        let (_, rhs) = sides(model, b);
        let target = rhs / (model.detuning_factor() + kfac(model) / s);
        let mut next = b + d * (target - b);
        while next.norm() >= B_MAX {
            next = 0.5 * (next + b);
        }
        let step = (next - b).norm();
        b = next;
        if step < 1e-3 * options.tol || self_consistency_residual(model, b) < 1e-3 {
            break;
        }
    }
    while used < budget {
        used += 1;
        let res = self_consistency_residual(model, b);
        if res < 0.01 * options.tol {
            break;
        }
        let delta = newton_step(model, b);
        if !delta.is_finite() {
            break;
        }
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = b + lambda * delta;
            if trial.norm() < B_MAX && self_consistency_residual(model, trial) < res {
                b = trial;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    (b, used)
}

fn solve_complex_branch(model: &DpoModel, options: &SolverOptions) -> Result<SemiclassicalSolution> {
    let seed = options.seed.filter(|s| s.norm() < B_MAX).unwrap_or(C64::new(0.0, 0.0));
    let budget = options.max_iter.max(4);
    let (b, used) = refine(model, seed, options, budget / 2);
    if self_consistency_residual(model, b) < options.tol {
        return finish(model, b, used, options.tol);
    }
    // continuation in drive from zero
    const STEPS: usize = 20;
    let mut total = used;
    let mut current = C64::new(0.0, 0.0);
    let per_step = ((budget - used) / STEPS).max(2);
    for j in 1..=STEPS {
        let frac = j as f64 / STEPS as f64;
        let mut stage = model.clone();
        stage.omega_tilde = model.omega_tilde * frac;
        stage.alpha0 = model.alpha0 * frac;
        stage.omega_minus = model.omega_minus * frac;
        let (b, used) = refine(&stage, current, options, per_step);
        current = b;
        total += used;
    }
    finish(model, current, total, options.tol)
}

/// Closed-form `|B|` valid for `C_- >> 1 - |B|^2` at `Delta_p = 0`.
pub fn analytic_b(model: &DpoModel) -> Result<f64> {
    if model.delta_p != 0.0 {
        return Err(Error::Domain(format!(
            "analytic B requires delta_p = 0, got {}",
            model.delta_p
        )));
    }
    if model.omega_tilde == 0.0 {
        return Ok(0.0);
    }
    let lambda = 4.0 * model.omega_tilde.powi(2) / kfac(model);
    Ok(analytic_b_from_lambda(lambda))
}

/// `|B| = ((1+l)^2 + 4l)^(1/2)/2 - (1+l)/2`, evaluated without cancellation.
pub fn analytic_b_from_lambda(lambda: f64) -> f64 {
    let s = 1.0 + lambda;
    // difference of roots rewritten as 2 l / (sqrt(s^2 + 4 l) + s)
    2.0 * lambda / ((s * s + 4.0 * lambda).sqrt() + s)
}

/// Gaussian `g2` for real `alpha` (the `Delta_p = 0` branch).
pub fn g2_gaussian(sol: &SemiclassicalSolution) -> Result<f64> {
    if sol.delta_p != 0.0 {
        return Err(Error::Domain(
            "Gaussian g2 is only available for delta_p = 0".into(),
        ));
    }
    let a2 = sol.alpha.re * sol.alpha.re;
    let n = sol.n_inc;
    let s = sol.sigma_inc.re;
    let denom = a2 + n;
    if denom == 0.0 {
        return Err(Error::Undefined("g2 with zero occupation".into()));
    }
    Ok(1.0 + (2.0 * a2 * (n + s) + n * n + s * s) / (denom * denom))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// rescaled drive `Omega~_-`
    Drive,
    /// probe detuning `Delta_p`
    Detuning,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub b_abs: f64,
    pub alpha_ratio: f64,
    /// `n_inc C_- / 2`, the incoherent occupation relative to `alpha0_crit^2`.
    pub n_inc_scaled: f64,
    pub g2: Option<f64>,
    pub converged: bool,
    pub solution: SemiclassicalSolution,
}

fn point_model(template: &DpoModel, axis: SweepAxis, value: f64) -> Result<DpoModel> {
    match axis {
        SweepAxis::Drive => template.with_drive(Drive::OmegaTilde(value)),
        SweepAxis::Detuning => Ok(template.with_delta_p(value)),
    }
}

fn row_for(model: &DpoModel, value: f64, options: &SolverOptions) -> SweepRow {
    let solution = match solve_self_consistency(model, options) {
        Ok(s) => s,
        Err(Error::SemiclassicalNoConvergence { best, .. }) => *best,
        Err(_) => {
            let mut s = moments(model, C64::new(0.0, 0.0));
            s.converged = false;
            s
        }
    };
    SweepRow {
        axis_value: value,
        b_abs: solution.b.norm(),
        alpha_ratio: solution.alpha_ratio(),
        n_inc_scaled: solution.n_inc * model.c_minus / 2.0,
        g2: solution.g2,
        converged: solution.converged,
        solution,
    }
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Domain("sweep grid is empty".into()));
    }
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("sweep grid contains non-finite values".into()));
    }
    let up = grid.windows(2).all(|w| w[1] > w[0]);
    let down = grid.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(Error::Domain("sweep grid must be strictly monotone".into()));
    }
    Ok(())
}

/// Solves every grid point in order, seeding each from its predecessor.
pub fn sweep(
    template: &DpoModel,
    axis: SweepAxis,
    grid: &[f64],
    options: &SolverOptions,
) -> Result<Vec<SweepRow>> {
    validate_grid(grid)?;
    sweep_chunk(template, axis, grid, options)
}

fn sweep_chunk(
    template: &DpoModel,
    axis: SweepAxis,
    grid: &[f64],
    options: &SolverOptions,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(grid.len());
    let mut seed = options.seed;
    for &v in grid {
        let model = point_model(template, axis, v)?;
        let opts = SolverOptions {
            seed,
            ..options.clone()
        };
        let row = row_for(&model, v, &opts);
        seed = row.converged.then_some(row.solution.b);
        rows.push(row);
    }
    Ok(rows)
}

/// Like [`sweep`], split into `workers` contiguous chunks solved concurrently.
/// Each chunk restarts the continuation from its own first point, so the
/// output depends on `workers` only at the level of the solver tolerance.
pub fn sweep_parallel(
    template: &DpoModel,
    axis: SweepAxis,
    grid: &[f64],
    options: &SolverOptions,
    workers: usize,
) -> Result<Vec<SweepRow>> {
    use rayon::prelude::*;
    validate_grid(grid)?;
    let workers = workers.max(1).min(grid.len());
    if workers == 1 {
        return sweep_chunk(template, axis, grid, options);
    }
    let chunk = grid.len().div_ceil(workers);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Internal(format!("worker pool: {e}")))?;
    let parts: Vec<Result<Vec<SweepRow>>> = pool.install(|| {
        grid.par_chunks(chunk)
            .map(|g| sweep_chunk(template, axis, g, options))
            .collect()
    });
    let mut rows = Vec::with_capacity(grid.len());
    for p in parts {
        rows.extend(p?);
    }
    Ok(rows)
}
