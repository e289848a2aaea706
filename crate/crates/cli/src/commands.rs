use std::fmt::Write as _;

use dpo_core::lindblad::{
    converge_truncation, observables, reduced_states, solve_at, top_two_tail, Displacement, Observables,
    SteadyState, TruncationStep,
};
use dpo_core::normal_modes::{
    check_validity, cooling_prediction, derive_normal_modes, dpo_cooling, CoolingModel, DEFAULT_MARGIN,
};
use dpo_core::semiclassical::{solve_self_consistency, sweep_parallel, DpoModel, SemiclassicalSolution, SweepRow};
use dpo_core::wigner::{summarize, wigner, WignerGrid, WignerSummary};
use dpo_core::{Error, C64};
use serde::Serialize;

use crate::config::{DisplacementMode, Format, SweepConfig};
use crate::output::Run;
use crate::CliError;

/// The model with every drive convention, echoed in each manifest.
fn resolve_model(run: &mut Run, model: &DpoModel) {
    run.resolve("model", model);
    run.warnings.extend(model.warnings.iter().cloned());
}

pub fn derive(run: &mut Run) -> Result<(), CliError> {
    let params = run
        .config()
        .physical
        .clone()
        .ok_or_else(|| CliError::Config("`derive` needs the `physical` block".into()))?;
    let data = run.timed("normal_modes", || derive_normal_modes(&params))?;
    let report = check_validity(&params, &data, DEFAULT_MARGIN);
    for c in report.checks.iter().filter(|c| !c.passed) {
        run.warnings.push(format!("validity check `{}` failed: {} (measured {:.3e})", c.name, c.inequality, c.measured));
    }
    let dpo = cooling_prediction(&data, &params, CoolingModel::Dpo);
    let ndpo = cooling_prediction(&data, &params, CoolingModel::Ndpo);
    run.warnings.extend(dpo.warnings.iter().chain(&ndpo.warnings).cloned());
    let model = match run.config().model() {
        Ok(m) => {
            resolve_model(run, &m);
            Some(m)
        }
        Err(CliError::Core(Error::DegenerateModel(msg))) => {
            run.warnings.push(format!("no reduced model: {msg}"));
            None
        }
        Err(e) => return Err(e),
    };
    run.resolve("normal_modes", &data);
    let out = serde_json::json!({
        "params": params,
        "normal_modes": data,
        "validity": report,
        "cooling": { "dpo": dpo, "ndpo": ndpo },
        "model": model,
    });
    run.write_json("derive.json", &out)?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("axis_value,B_abs,alpha_ratio,n_inc_scaled,g2,converged\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            r.axis_value,
            r.b_abs,
            r.alpha_ratio,
            r.n_inc_scaled,
            opt(r.g2),
            r.converged
        )
        .expect("string write");
    }
    s
}

pub fn sweep(run: &mut Run, spec: &SweepConfig) -> Result<usize, CliError> {
    let model = run.config().model()?;
    resolve_model(run, &model);
    let options = run.config().solver.semiclassical();
    let workers = run.config().solver.workers;
    let grid = spec.grid();
    let rows = run.timed("sweep", || sweep_parallel(&model, spec.axis.into(), &grid, &options, workers))?;
    let failed = rows.iter().filter(|r| !r.converged).count();
    if failed > 0 {
        run.warnings.push(format!("{failed} of {} sweep points did not converge", rows.len()));
    }
    if run.config().output.wants(Format::Csv) {
        run.write("sweep.csv", sweep_csv(&rows).as_bytes())?;
    }
    if run.config().output.wants(Format::Json) {
        run.write_json("sweep.json", &rows)?;
    }
    Ok(rows.len() - failed)
}

#[derive(Serialize)]
struct SolverReport {
    dims: (usize, usize),
    method: dpo_core::lindblad::SolvedBy,
    iterations: usize,
    residual: f64,
    clipped_mass: f64,
    min_eigenvalue: f64,
    tail_c: f64,
    tail_b: f64,
    truncation_steps: Vec<TruncationStep>,
}

#[derive(Serialize)]
struct SemiclassicalReference {
    converged: bool,
    b: C64,
    alpha: C64,
    n: f64,
    sigma: C64,
    mean_b: C64,
    g2: Option<f64>,
}

impl From<&SemiclassicalSolution> for SemiclassicalReference {
    fn from(s: &SemiclassicalSolution) -> Self {
        SemiclassicalReference {
            converged: s.converged,
            b: s.b,
            alpha: s.alpha,
            n: s.n,
            sigma: s.sigma,
            mean_b: -C64::i() * s.beta,
            g2: s.g2,
        }
    }
}

#[derive(Serialize)]
struct CoolingReference {
    gamma1_eff: f64,
    nth1_eff: f64,
}

#[derive(Serialize)]
struct WignerReport {
    summary: WignerSummary,
    grid: WignerGrid,
}

#[derive(Serialize)]
struct SteadyReport {
    displacement: Displacement,
    solver: SolverReport,
    moments: Observables,
    /// Mechanical occupation next to the adiabatic cooling prediction.
    n_b: f64,
    cooling_prediction: CoolingReference,
    semiclassical: Option<SemiclassicalReference>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wigner: Option<[WignerReport; 2]>,
}

/// Semiclassical displacement, truncation, steady state, moments and
/// optionally Wigner grids of both reduced states.
pub fn steady(run: &mut Run, with_wigner: bool) -> Result<(), CliError> {
    let model = run.config().model()?;
    resolve_model(run, &model);
    let solver = run.config().solver.clone();
    let sc_opts = solver.semiclassical();
    let semiclassical = if model.gtilde_minus != 0.0 {
        match run.timed("semiclassical", || solve_self_consistency(&model, &sc_opts)) {
            Ok(s) => Some(s),
            Err(Error::SemiclassicalNoConvergence { best, residual, .. }) => {
                run.warnings.push(format!("self-consistency unconverged (residual {residual:.3e})"));
                Some(*best)
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        None
    };
    let displacement = match (solver.displacement, &semiclassical) {
        (DisplacementMode::Semiclassical, Some(s)) => Displacement { c: s.alpha, b: -C64::i() * s.beta },
        _ => Displacement::zero(),
    };

    let (dims, state, steps): (_, SteadyState, _) = match solver.dims {
        Some(dims) => {
            let opts = solver.steady();
            let s = run.timed("steady_state", || solve_at(&model, dims, displacement, &opts, None))?;
            (dims, s, Vec::new())
        }
        None => {
            let opts = solver.truncation();
            let start = solver.start_dims;
            match run.timed("truncation", || converge_truncation(&model, displacement, start, &opts)) {
                Ok(t) => (t.dims, t.state, t.steps),
                Err(Error::TruncationNotConverged { last_dims, steps }) => {
                    run.write_json("truncation_failure.json", &steps)?;
                    return Err(CliError::Truncation { last_dims, steps });
                }
                Err(e) => return Err(e.into()),
            }
        }
    };
    run.warnings.extend(state.warnings.iter().cloned());
    let (rc, rb) = reduced_states(&state.rho)?;
    let moments = observables(&state.rho)?;
    let (gamma1_eff, nth1_eff) = dpo_cooling(model.gamma1, model.c_minus, model.nth_minus, model.nth_1);
    let wigner_out = if with_wigner || run.config().output.wigner {
        let spec = solver.wigner_grid.clone();
        let grids = run.timed("wigner", || -> Result<_, Error> { Ok([wigner(&rc, &spec)?, wigner(&rb, &spec)?]) })?;
        let mut reports = Vec::new();
        for (name, g) in ["c", "b"].into_iter().zip(grids) {
            run.warnings.extend(g.warnings.iter().map(|w| format!("wigner {name}: {w}")));
            let mut csv = Vec::new();
            g.write_csv(&mut csv).map_err(|e| CliError::Io(format!("wigner csv: {e}")))?;
            if run.config().output.wants(Format::Csv) {
                run.write(&format!("wigner_{name}.csv"), &csv)?;
            }
            reports.push(WignerReport { summary: summarize(&g), grid: g });
        }
        let [c, b]: [WignerReport; 2] = reports.try_into().ok().expect("two grids");
        Some([c, b])
    } else {
        None
    };
    let report = SteadyReport {
        displacement,
        solver: SolverReport {
            dims,
            method: state.method,
            iterations: state.iterations,
            residual: state.residual,
            clipped_mass: state.clipped_mass,
            min_eigenvalue: state.min_eigenvalue,
            tail_c: top_two_tail(&rc),
            tail_b: top_two_tail(&rb),
            truncation_steps: steps,
        },
        n_b: moments.n_b,
        moments,
        cooling_prediction: CoolingReference { gamma1_eff, nth1_eff },
        semiclassical: semiclassical.as_ref().map(Into::into),
        wigner: wigner_out,
    };
    run.resolve("displacement", displacement);
    run.resolve("dims", dims);
    if run.config().output.wants(Format::Json) {
        run.write_json("steady.json", &report)?;
    }
    Ok(())
}
