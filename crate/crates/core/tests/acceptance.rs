//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use dpo_core::fock::{shifted_op, DensityMatrix, Operator};
use dpo_core::lindblad::*;
use dpo_core::normal_modes::*;
use dpo_core::semiclassical::*;
use dpo_core::wigner::*;
use dpo_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm()
}

fn criterion_1() -> Outcome {
    let base = PhysicalParams {
        g0: 1.0,
        coupling: 1e3,
        delta: 0.0,
        omega_m1: 2e4,
        omega_m2: 1e4,
        kappa: 100.0,
        gamma1: 1e-4,
        gamma2: 1e-4,
        bath: Bath::Occupations { n_b1: 0.0, n_b2: 0.0 },
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let p = PhysicalParams {
            coupling: rng.gen_range(200.0..2e3),
            delta: rng.gen_range(-2e3..2e3),
            gamma2: rng.gen_range(1e-5..1.0),
            ..base.clone()
        };
        let d = derive_normal_modes(&p).map_err(|e| e.to_string())?;
        let lhs = d.kappa_plus + d.kappa_minus;
        let rhs = p.kappa + p.gamma2;
        ensure!((lhs - rhs).abs() <= 1e-12 * rhs, "sum rule {lhs} vs {rhs}");
    }
    let d = derive_normal_modes(&base).map_err(|e| e.to_string())?;
    let gt = base.g0 * base.coupling / (4.0 * base.omega_m2);
    ensure!(d.r == 1.0 && d.p == 0.0 && d.gtilde_cross == 0.0, "resonant r={} p={} g+-={}", d.r, d.p, d.gtilde_cross);
    ensure!((d.gtilde_minus - gt).abs() <= 1e-14 * gt, "g- {} vs {gt}", d.gtilde_minus);
    let mut worst: f64 = 0.0;
    for gamma2 in [1e-4, 1e-3, 1e-2, 1e-1] {
        let p = PhysicalParams { gamma2, ..base.clone() };
        let d = derive_normal_modes(&p).map_err(|e| e.to_string())?;
        let eps = gamma2 / p.kappa;
        let mismatch = (d.c_minus / c_minus_resonant_shortcut(&p) - 1.0).abs();
        // first order: the mismatch is O(eps), the remainder O(eps^2)
        ensure!(mismatch <= 2.0 * eps, "C- shortcut mismatch {mismatch} at gamma2/kappa {eps}");
        ensure!((mismatch - eps).abs() <= 2.0 * eps * eps, "C- shortcut not first order at {eps}");
        worst = worst.max(mismatch / eps);
    }
    Ok(format!("sum rule to 1e-12 over 200 draws; C- shortcut mismatch / (gamma2/kappa) <= {worst:.4}"))
}

fn criterion_2() -> Outcome {
    let m = DpoModel::from_critical(1.0, 8.0, 5.0, 0.0, 1.0, 0.0, Drive::OmegaMinus(0.0)).map_err(|e| e.to_string())?;
    let s = solve_at(&m, (8, 12), Displacement::zero(), &SteadyStateOptions::default(), None).map_err(|e| e.to_string())?;
    let o = observables(&s.rho).map_err(|e| e.to_string())?;
    let (_, oracle) = dpo_cooling(m.gamma1, m.c_minus, m.nth_minus, m.nth_1);
    let err = (o.n_b / oracle - 1.0).abs();
    ensure!(err < 0.05, "n_b = {} vs {oracle}", o.n_b);
    Ok(format!("n_b = {:.5} vs adiabatic {oracle:.5} (rel {err:.2e}) at dims (8, 12)", o.n_b))
}

fn criterion_3() -> Outcome {
    let opts = SolverOptions::default();
    let m = DpoModel::from_critical(1.0, 8.0, 10.0, 0.0, 0.0, 0.0, Drive::OmegaTilde(0.0)).map_err(|e| e.to_string())?;
    let grid: Vec<f64> = std::iter::once(1e-3).chain((1..=400).map(|k| 0.25 * k as f64)).collect();
    let rows = sweep(&m, SweepAxis::Drive, &grid, &opts).map_err(|e| e.to_string())?;
    ensure!(rows.iter().all(|r| r.converged), "unconverged sweep rows");
    for w in rows.windows(2) {
        ensure!(w[1].b_abs > w[0].b_abs, "|B| not increasing at {}", w[1].axis_value);
        ensure!(w[1].alpha_ratio < w[0].alpha_ratio, "alpha ratio not decreasing at {}", w[1].axis_value);
    }
    ensure!(rows[0].alpha_ratio < 1.0 && rows[0].alpha_ratio > 0.999, "faint drive ratio {}", rows[0].alpha_ratio);
    let last = rows.last().unwrap();
    ensure!(last.axis_value == 100.0, "grid end {}", last.axis_value);
    ensure!((last.alpha_ratio / 0.5 - 1.0).abs() < 0.02, "ratio at 100 = {}", last.alpha_ratio);
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for r in &rows {
        let s = &r.solution;
        if m.c_minus * (1.0 + 2.0 * m.nth_minus) / (1.0 - s.b.norm_sqr()) >= 100.0 {
            let mm = m.with_drive(Drive::OmegaTilde(r.axis_value)).map_err(|e| e.to_string())?;
            let a = analytic_b(&mm).map_err(|e| e.to_string())?;
            worst = worst.max((a - s.b.norm()).abs());
            checked += 1;
        }
    }
    ensure!(checked > 0, "no sweep point in the analytic regime");
    ensure!(worst < 1e-3, "analytic B off by {worst}");
    Ok(format!(
        "|B| monotone over 401 drives; ratio(1e-3) = {:.6}; ratio(100) = {:.5}; analytic B within {worst:.1e} at {checked} points",
        rows[0].alpha_ratio,
        last.alpha_ratio
    ))
}

fn criterion_4() -> Outcome {
    let m = DpoModel::from_critical(1.0, 8.0, 2.0, 0.0, 0.0, 0.0, Drive::Alpha0(1.0)).map_err(|e| e.to_string())?;
    let roots = classical_response(&m);
    let best = roots.iter().find(|r| r.preferred).ok_or("no preferred root")?;
    ensure!((best.alpha - C64::new(0.5, 0.0)).norm() < 1e-12, "alpha = {}", best.alpha);
    let x = best.x;
    let cubic = x * (1.0 + 2.0 * m.c_minus * x).powi(2) - m.alpha0 * m.alpha0;
    ensure!(cubic.abs() < 1e-12, "cubic residual {cubic}");
    Ok(format!("alpha = {}, cubic residual {cubic:.1e}", best.alpha))
}

fn criterion_5() -> Outcome {
    let opts = SolverOptions::default();
    let m = DpoModel::from_critical(1.0, 8.0, 10.0, 0.001, 0.0, 0.0, Drive::OmegaTilde(0.0)).map_err(|e| e.to_string())?;
    let grid: Vec<f64> = (1..=200).map(|k| 0.01 * k as f64).collect();
    let rows = sweep(&m, SweepAxis::Drive, &grid, &opts).map_err(|e| e.to_string())?;
    let (w_min, g_min) = rows
        .iter()
        .filter_map(|r| r.g2.map(|g| (r.axis_value, g)))
        .fold((f64::NAN, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    ensure!(g_min < 1.0, "no antibunching: min g2 {g_min}");
    let faint = solve_self_consistency(&m.with_drive(Drive::OmegaTilde(1e-4)).map_err(|e| e.to_string())?, &opts)
        .map_err(|e| e.to_string())?;
    let g_faint = faint.g2.ok_or("g2 undefined at faint drive")?;
    ensure!((g_faint - 2.0).abs() < 1e-2, "thermal limit g2 = {g_faint}");
    let mut worst: f64 = 0.0;
    for w in [0.1, 0.3, 0.6] {
        let mw = m.with_drive(Drive::OmegaTilde(w)).map_err(|e| e.to_string())?;
        let sc = solve_self_consistency(&mw, &opts).map_err(|e| e.to_string())?;
        let d = Displacement::semiclassical(&mw, &opts).map_err(|e| e.to_string())?;
        let s = solve_at(&mw, (10, 10), d, &SteadyStateOptions::default(), None).map_err(|e| e.to_string())?;
        let g_l = observables(&s.rho).map_err(|e| e.to_string())?.g2.ok_or("Lindblad g2 undefined")?;
        let g_s = sc.g2.ok_or("Gaussian g2 undefined")?;
        let e = (g_l / g_s - 1.0).abs();
        ensure!(e < 0.1, "Lindblad g2 {g_l} vs Gaussian {g_s} at drive {w}");
        worst = worst.max(e);
    }
    Ok(format!(
        "min Gaussian g2 = {g_min:.4} at drive {w_min}; g2(1e-4) = {g_faint:.5}; Lindblad cross-check within {:.2}%",
        100.0 * worst
    ))
}

fn criterion_6() -> Outcome {
    let opts = SolverOptions::default();
    let m = DpoModel::from_critical(1.0, 8.0, 10.0, 0.01, 0.0, 0.0, Drive::OmegaTilde(0.3)).map_err(|e| e.to_string())?;
    let sc = solve_self_consistency(&m, &opts).map_err(|e| e.to_string())?;
    let d = Displacement::semiclassical(&m, &opts).map_err(|e| e.to_string())?;
    let s = solve_at(&m, (16, 16), d, &SteadyStateOptions::default(), None).map_err(|e| e.to_string())?;
    let o = observables(&s.rho).map_err(|e| e.to_string())?;
    let mean_b = -C64::i() * sc.beta;
    let errs = [
        ("<c>", rel(o.mean_c, sc.alpha)),
        ("<c^dag c>", rel(C64::new(o.n_c, 0.0), C64::new(sc.n, 0.0))),
        ("<c^2>", rel(o.sigma_c, sc.sigma)),
        ("<b>", rel(o.mean_b, mean_b)),
    ];
    for (name, e) in errs {
        ensure!(e < 0.1, "{name} off by {:.2}%", 100.0 * e);
    }
    Ok(errs.iter().map(|(n, e)| format!("{n} {:.3}%", 100.0 * e)).collect::<Vec<_>>().join(", "))
}

struct Fig8Point {
    drive: f64,
    amplitude_variance: f64,
    summary: WignerSummary,
    tails: (f64, f64),
}

fn fig8_point(drive: f64, dims: (usize, usize)) -> Result<Fig8Point, String> {
    let m = DpoModel::from_critical(1.0, 4.0, 15.6, 0.01, 1.0, 0.0, Drive::Alpha0(drive)).map_err(|e| e.to_string())?;
    let d = Displacement::semiclassical(&m, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let opts = SteadyStateOptions { tol: 1e-9, ..Default::default() };
    let s = solve_at(&m, dims, d, &opts, None).map_err(|e| e.to_string())?;
    let o = observables(&s.rho).map_err(|e| e.to_string())?;
    let (rc, rb) = reduced_states(&s.rho).map_err(|e| e.to_string())?;
    let g = wigner(&rb, &GridSpec::Auto { points: 121 }).map_err(|e| e.to_string())?;
    Ok(Fig8Point {
        drive,
        amplitude_variance: o.c_amplitude_variance,
        summary: summarize(&g),
        tails: (top_two_tail(&rc), top_two_tail(&rb)),
    })
}

fn criterion_7() -> Outcome {
    let runs = [(1.2, (12, 14)), (2.4, (16, 20)), (3.6, (22, 26))];
    let points: Vec<Result<Fig8Point, String>> = std::thread::scope(|scope| {
        let handles: Vec<_> = runs.iter().map(|&(a, dims)| scope.spawn(move || fig8_point(a, dims))).collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err("panic".into()))).collect()
    });
    let points = points.into_iter().collect::<Result<Vec<_>, _>>()?;
    for p in &points {
        println!(
            "    drive {}: Var(c + c^dag) = {:.4}, phase variance = {:.4}, bimodal = {}, min W = {:.2e}, tails c {:.1e} b {:.1e}",
            p.drive, p.amplitude_variance, p.summary.phase_variance, p.summary.bimodality_flag, p.summary.min_value, p.tails.0, p.tails.1
        );
    }
    ensure!(points[0].amplitude_variance < 1.0, "(a) no amplitude squeezing: {}", points[0].amplitude_variance);
    for w in points.windows(2) {
        ensure!(
            w[1].summary.phase_variance > w[0].summary.phase_variance,
            "(b) phase variance not increasing between {} and {}",
            w[0].drive,
            w[1].drive
        );
    }
    let flags: Vec<bool> = points.iter().map(|p| p.summary.bimodality_flag).collect();
    ensure!(flags == [false, false, true], "(c) bimodality flags {flags:?}");
    for p in &points {
        ensure!(p.summary.min_value >= -1e-3, "(d) min W = {} at drive {}", p.summary.min_value, p.drive);
    }
    Ok("squeezed at 1.2, phase variance increasing, bimodal only at 3.6, W >= -1e-3".into())
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    // trace preservation over random parameters and displacements
    let mut worst_trace: f64 = 0.0;
    for _ in 0..20 {
        let m = DpoModel::from_critical(
            1.0,
            rng.gen_range(2.0..10.0),
            rng.gen_range(0.5..20.0),
            rng.gen_range(0.0..1.0),
            rng.gen_range(0.0..2.0),
            rng.gen_range(-0.2..0.2),
            Drive::OmegaTilde(rng.gen_range(0.0..2.0)),
        )
        .map_err(|e| e.to_string())?;
        let d = Displacement {
            c: C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
            b: C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
        };
        let h = build_hamiltonian(&m, (5, 4), d).map_err(|e| e.to_string())?;
        let l = build_liouvillian(&h, &m, (5, 4), d).map_err(|e| e.to_string())?;
        worst_trace = worst_trace.max(l.trace_preservation_defect());
    }
    ensure!(worst_trace < 1e-10, "trace preservation defect {worst_trace}");

    // steady-state residual relative to the generator norm
    let m = DpoModel::from_critical(1.0, 8.0, 10.0, 0.01, 0.0, 0.0, Drive::OmegaTilde(0.3)).map_err(|e| e.to_string())?;
    let d = Displacement::semiclassical(&m, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let mut worst_res: f64 = 0.0;
    for (dims, method) in [((6, 6), SolveMethod::Direct), ((10, 10), SolveMethod::Iterative)] {
        let h = build_hamiltonian(&m, dims, d).map_err(|e| e.to_string())?;
        let l = build_liouvillian(&h, &m, dims, d).map_err(|e| e.to_string())?;
        let s = steady_state(&l, &SteadyStateOptions { method, ..Default::default() }).map_err(|e| e.to_string())?;
        let r = s.residual / l.frobenius_norm();
        ensure!(r < 1e-8, "residual {r} relative at {dims:?}");
        worst_res = worst_res.max(r);
    }

    // Langevin drift by a single Euler step
    let m = DpoModel::from_critical(1.0, 4.0, 6.0, 0.2, 0.5, 0.03, Drive::OmegaMinus(0.4)).map_err(|e| e.to_string())?;
    let dims = (12, 12);
    let d = Displacement { c: C64::new(0.4, -0.2), b: C64::new(-0.3, -0.9) };
    let h = build_hamiltonian(&m, dims, d).map_err(|e| e.to_string())?;
    let l = build_liouvillian(&h, &m, dims, d).map_err(|e| e.to_string())?;
    let mut psi = vec![C64::new(0.0, 0.0); dims.0 * dims.1];
    for i in 0..4 {
        for j in 0..4 {
            psi[i * dims.1 + j] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
    }
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    psi.iter_mut().for_each(|z| *z /= norm);
    let rho = DensityMatrix::from_pure(vec![dims.0, dims.1], &psi)
        .and_then(|r| r.with_displacement(vec![d.c, d.b]))
        .map_err(|e| e.to_string())?;
    let step = 1e-3;
    let mut next = rho.matrix().to_owned();
    next += l.apply(rho.matrix()) * faer::Scale(C64::new(step, 0.0));
    let next = DensityMatrix::new_unchecked(vec![dims.0, dims.1], next, vec![d.c, d.b]).map_err(|e| e.to_string())?;
    let (c0, b0) = mode_operators(dims).map_err(|e| e.to_string())?;
    let c = shifted_op(&c0, d.c);
    let b = shifted_op(&b0, d.b);
    let ev = |s: &DensityMatrix, op: &Operator| s.expect(op).unwrap();
    let i = C64::i();
    let drift_c = -0.5 * m.kappa_minus * ev(&rho, &c) - 2.0 * i * m.gtilde_minus * ev(&rho, &c.adjoint().mul(&b).unwrap())
        + m.omega_minus;
    let drift_b = -(0.5 * m.gamma1 - 2.0 * i * m.delta_p) * ev(&rho, &b) - i * m.gtilde_minus * ev(&rho, &c.mul(&c).unwrap());
    let dc = (ev(&next, &c) - ev(&rho, &c)) / step;
    let db = (ev(&next, &b) - ev(&rho, &b)) / step;
    let langevin = rel(dc, drift_c).max(rel(db, drift_b));
    ensure!(langevin <= 1e-6, "Langevin drift mismatch {langevin}");

    // Wigner normalization and closed forms
    let spec = GridSpec::Explicit { re_min: -3.0, re_max: 3.0, im_min: -3.0, im_max: 3.0, n_re: 61, n_im: 61 };
    let a0 = C64::new(0.9, -0.6);
    let mut worst_w: f64 = 0.0;
    for (rho, exact) in [
        (DensityMatrix::fock(10, 0), Box::new(|z: C64| 2.0 / PI * (-2.0 * z.norm_sqr()).exp()) as Box<dyn Fn(C64) -> f64>),
        (DensityMatrix::fock(10, 1), Box::new(|z: C64| 2.0 / PI * (4.0 * z.norm_sqr() - 1.0) * (-2.0 * z.norm_sqr()).exp())),
        (DensityMatrix::coherent(50, a0), Box::new(move |z: C64| 2.0 / PI * (-2.0 * (z - a0).norm_sqr()).exp())),
    ] {
        let g = wigner(&rho.map_err(|e| e.to_string())?, &spec).map_err(|e| e.to_string())?;
        for (k, y) in g.im_axis.iter().enumerate() {
            for (j, x) in g.re_axis.iter().enumerate() {
                worst_w = worst_w.max((g.values[k][j] - exact(C64::new(*x, *y))).abs());
            }
        }
    }
    ensure!(worst_w < 1e-8, "Wigner closed forms off by {worst_w}");
    let mut worst_mass: f64 = 0.0;
    for rho in [DensityMatrix::thermal(60, 1.5), DensityMatrix::coherent(60, C64::new(2.0, 1.0)), DensityMatrix::fock(20, 3)] {
        let g = wigner(&rho.map_err(|e| e.to_string())?, &GridSpec::Auto { points: 121 }).map_err(|e| e.to_string())?;
        worst_mass = worst_mass.max((g.mass - 1.0).abs());
    }
    ensure!(worst_mass < 1e-3, "Wigner mass off by {worst_mass}");

    Ok(format!(
        "trace defect {worst_trace:.1e}, residual/|L| {worst_res:.1e}, drift {langevin:.1e}, W closed forms {worst_w:.1e}, mass {worst_mass:.1e}"
    ))
}

type Criterion = (u32, fn() -> Outcome, Duration);

fn main() {
    let criteria: [Criterion; 8] = [
        (1, criterion_1, Duration::from_secs(1)),
        (2, criterion_2, Duration::from_secs(60)),
        (3, criterion_3, Duration::from_secs(1)),
        (4, criterion_4, Duration::from_secs(1)),
        (5, criterion_5, Duration::from_secs(300)),
        (6, criterion_6, Duration::from_secs(300)),
        (7, criterion_7, Duration::from_secs(1800)),
        (8, criterion_8, Duration::from_secs(120)),
    ];
    // optional criterion numbers on the command line select a subset
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, run, budget) in criteria {
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > budget => Err(format!("{detail}; runtime {took:.1?} over {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("criterion {n}: PASS ({detail}) [{took:.2?}]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n}: FAIL ({detail}) [{took:.2?}]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
