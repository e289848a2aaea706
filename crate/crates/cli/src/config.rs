//! Run configuration: JSON file, `DPO_` environment overrides, validation.

use std::path::{Path, PathBuf};

use dpo_core::lindblad::{SolveMethod, SteadyStateOptions, TruncationOptions};
use dpo_core::normal_modes::{build_dpo_model, derive_normal_modes, PhysicalParams, Probe};
use dpo_core::semiclassical::{DpoModel, Drive, SolverOptions, SweepAxis};
use dpo_core::wigner::GridSpec;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

pub const ENV_PREFIX: &str = "DPO_";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub physical: Option<PhysicalParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effective: Option<EffectiveModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeConfig>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Reduced-model rates given directly, either as `(gamma1, gtilde_minus)` or
/// as `(beta_crit, c_minus)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectiveModel {
    pub kappa_minus: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gtilde_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_crit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_minus: Option<f64>,
    #[serde(default)]
    pub nth_minus: f64,
    #[serde(default)]
    pub nth_1: f64,
}

/// Probe detuning plus exactly one drive convention.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(default)]
    pub delta_p: f64,
    /// Cavity drive amplitude; needs the physical block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_minus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_tilde: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisplacementMode {
    Semiclassical,
    None,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Self-consistency tolerance.
    pub tol: f64,
    pub max_iter: usize,
    pub steady_method: SolveMethod,
    pub steady_tol: f64,
    pub steady_max_iter: usize,
    pub gmres_restart: usize,
    pub truncation_tol: f64,
    pub start_dims: (usize, usize),
    /// Fixed truncation; skips the convergence search when set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<(usize, usize)>,
    pub max_state_dim: usize,
    pub displacement: DisplacementMode,
    pub wigner_grid: GridSpec,
    pub workers: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let sc = SolverOptions::default();
        let ss = SteadyStateOptions::default();
        let tr = TruncationOptions::default();
        SolverConfig {
            tol: sc.tol,
            max_iter: sc.max_iter,
            steady_method: ss.method,
            steady_tol: ss.tol,
            steady_max_iter: ss.max_iter,
            gmres_restart: ss.restart,
            truncation_tol: tr.tol,
            start_dims: (4, 4),
            dims: None,
            max_state_dim: tr.max_state_dim,
            displacement: DisplacementMode::Semiclassical,
            wigner_grid: GridSpec::default(),
            workers: 1,
        }
    }
}

impl SolverConfig {
    pub fn semiclassical(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            ..SolverOptions::default()
        }
    }

    pub fn steady(&self) -> SteadyStateOptions {
        SteadyStateOptions {
            method: self.steady_method,
            tol: self.steady_tol,
            max_iter: self.steady_max_iter,
            restart: self.gmres_restart,
            ..SteadyStateOptions::default()
        }
    }

    pub fn truncation(&self) -> TruncationOptions {
        TruncationOptions {
            tol: self.truncation_tol,
            max_state_dim: self.max_state_dim,
            solver: self.steady(),
            ..TruncationOptions::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    /// Rescaled drive `omega_tilde`.
    Drive,
    /// Probe detuning `delta_p`, in the rate units of the model.
    Detuning,
}

impl From<Axis> for SweepAxis {
    fn from(a: Axis) -> Self {
        match a {
            Axis::Drive => SweepAxis::Drive,
            Axis::Detuning => SweepAxis::Detuning,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: Axis,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl SweepConfig {
    pub fn grid(&self) -> Vec<f64> {
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|k| if k + 1 == self.count { self.stop } else { self.start + step * k as f64 })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
    /// Wigner grids of both reduced states in `steady`.
    pub wigner: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            formats: vec![Format::Json, Format::Csv],
            wigner: false,
        }
    }
}

impl OutputConfig {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// Parses `START:STOP:COUNT`.
pub fn parse_range(s: &str) -> Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected START:STOP:COUNT, got `{s}`"));
    }
    let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}"));
    let count = parts[2].trim().parse::<usize>().map_err(|e| format!("`{}`: {e}", parts[2]))?;
    Ok((num(parts[0])?, num(parts[1])?, count))
}

/// Loads a config (or the `config` section of a run manifest) and applies
/// environment overrides. Returns the parsed config and the override keys.
pub fn load(path: &Path) -> Result<(RunConfig, Vec<String>), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Some(inner) = value.get("config").filter(|_| value.get("outputs").is_some()) {
        value = inner.clone();
    }
    let overrides = apply_env(&mut value, std::env::vars())?;
    let config: RunConfig = serde_path_to_error::deserialize(value)
        .map_err(|e| CliError::Config(format!("{}: at `{}`: {}", path.display(), e.path(), e.inner())))?;
    config.validate()?;
    Ok((config, overrides))
}

/// `DPO_SOLVER__STEADY_TOL=1e-9` sets `solver.steady_tol`. Values are parsed
/// as JSON where possible and kept as strings otherwise.
pub fn apply_env(
    value: &mut Value,
    vars: impl Iterator<Item = (String, String)>,
) -> Result<Vec<String>, CliError> {
    let mut applied = Vec::new();
    let mut vars: Vec<(String, String)> = vars.filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
    vars.sort();
    for (key, raw) in vars {
        let path: Vec<String> = key[ENV_PREFIX.len()..].split("__").map(|s| s.to_ascii_lowercase()).collect();
        if path.iter().any(|p| p.is_empty()) {
            return Err(CliError::Config(format!("malformed override variable `{key}`")));
        }
        let new = serde_json::from_str(&raw).unwrap_or(Value::String(raw.clone()));
        let mut slot = &mut *value;
        for part in &path {
            if !slot.is_object() {
                return Err(CliError::Config(format!("override `{key}` descends into a non-object value")));
            }
            slot = slot
                .as_object_mut()
                .expect("checked above")
                .entry(part.clone())
                .or_insert_with(|| Value::Object(Default::default()));
        }
        *slot = new;
        applied.push(path.join("."));
    }
    Ok(applied)
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("`{name}` must be finite and > 0, got {v}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        match (&self.physical, &self.effective) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config("give either `physical` or `effective`, not both".into()))
            }
            (None, None) => return Err(CliError::Config("missing model block: `physical` or `effective`".into())),
            _ => {}
        }
        if let Some(e) = &self.effective {
            let raw = e.gamma1.is_some() || e.gtilde_minus.is_some();
            let scaled = e.beta_crit.is_some() || e.c_minus.is_some();
            if raw == scaled {
                return Err(CliError::Config(
                    "`effective` needs exactly one of (gamma1, gtilde_minus) or (beta_crit, c_minus)".into(),
                ));
            }
            let pair = if raw { (e.gamma1, e.gtilde_minus) } else { (e.beta_crit, e.c_minus) };
            let names = if raw { ("effective.gamma1", "effective.gtilde_minus") } else { ("effective.beta_crit", "effective.c_minus") };
            if pair.0.is_none() {
                return Err(CliError::Config(format!("missing field `{}`", names.0)));
            }
            if pair.1.is_none() {
                return Err(CliError::Config(format!("missing field `{}`", names.1)));
            }
        }
        if let Some(p) = &self.probe {
            let set = [p.omega_p, p.omega_minus, p.alpha0, p.omega_tilde].iter().filter(|v| v.is_some()).count();
            if set != 1 {
                return Err(CliError::Config(format!(
                    "`probe` needs exactly one of omega_p, omega_minus, alpha0, omega_tilde ({set} given)"
                )));
            }
            if p.omega_p.is_some() && self.physical.is_none() {
                return Err(CliError::Config("`probe.omega_p` needs the `physical` block".into()));
            }
        }
        let s = &self.solver;
        for (name, v) in [
            ("solver.tol", s.tol),
            ("solver.steady_tol", s.steady_tol),
            ("solver.truncation_tol", s.truncation_tol),
        ] {
            positive(name, v)?;
        }
        if s.workers == 0 {
            return Err(CliError::Config("`solver.workers` must be >= 1".into()));
        }
        if let Some(sw) = &self.sweep {
            sw.validate()?;
        }
        if self.output.formats.is_empty() {
            return Err(CliError::Config("`output.formats` is empty".into()));
        }
        Ok(())
    }

    /// Reduced model including the probe; no probe block means zero drive.
    pub fn model(&self) -> Result<DpoModel, CliError> {
        let probe = self.probe.clone().unwrap_or_default();
        let mut model = match (&self.physical, &self.effective) {
            (Some(p), _) => {
                let data = derive_normal_modes(p)?;
                build_dpo_model(p, &data, Probe { delta_p: probe.delta_p, omega_p: probe.omega_p.unwrap_or(0.0) })?
            }
            (None, Some(e)) => match (e.gamma1, e.gtilde_minus, e.beta_crit, e.c_minus) {
                (Some(g1), Some(gt), _, _) => {
                    DpoModel::new(e.kappa_minus, g1, gt, e.nth_minus, e.nth_1, probe.delta_p, Drive::OmegaMinus(0.0))?
                }
                (_, _, Some(bc), Some(c)) => DpoModel::from_critical(
                    e.kappa_minus,
                    bc,
                    c,
                    e.nth_minus,
                    e.nth_1,
                    probe.delta_p,
                    Drive::OmegaMinus(0.0),
                )?,
                _ => return Err(CliError::Config("incomplete `effective` block".into())),
            },
            (None, None) => return Err(CliError::Config("missing model block".into())),
        };
        let drive = if let Some(v) = probe.omega_minus {
            Some(Drive::OmegaMinus(v))
        } else if let Some(v) = probe.alpha0 {
            Some(Drive::Alpha0(v))
        } else {
            probe.omega_tilde.map(Drive::OmegaTilde)
        };
        if let Some(d) = drive {
            model.set_drive(d)?;
        }
        Ok(model)
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(CliError::Config("sweep range must be finite".into()));
        }
        if self.count < 2 {
            return Err(CliError::Config(format!("sweep count must be >= 2, got {}", self.count)));
        }
        if self.start == self.stop {
            return Err(CliError::Config(format!("zero-length sweep range at {}", self.start)));
        }
        Ok(())
    }
}
