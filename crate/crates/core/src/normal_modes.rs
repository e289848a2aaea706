//! Normal-mode description of the cavity / two-oscillator system.
//!
//! All frequencies and rates are angular frequencies in a common unit. The
//! laser detuning is parametrised as `Delta = -(omega_m2 + delta)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semiclassical::{Drive, DpoModel};

/// hbar / k_B in kelvin seconds; the Planck occupation takes `omega` in rad/s.
pub const HBAR_OVER_KB: f64 = 7.638_232_577_577_646e-12;

/// Mechanical bath specification.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bath {
    /// Common bath temperature in kelvin; occupations follow the Planck law.
    Temperature(f64),
    /// Bath occupations quoted directly for the two mechanical oscillators.
    Occupations { n_b1: f64, n_b2: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub g0: f64,
    /// Linear cavity / tweezer-oscillator coupling `G`.
    pub coupling: f64,
    pub delta: f64,
    pub omega_m1: f64,
    pub omega_m2: f64,
    pub kappa: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub bath: Bath,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("g0", self.g0),
            ("omega_m1", self.omega_m1),
            ("omega_m2", self.omega_m2),
            ("kappa", self.kappa),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.coupling.is_finite() && self.coupling >= 0.0) {
            return Err(Error::param("coupling", format!("must be finite and >= 0, got {}", self.coupling)));
        }
        if !self.delta.is_finite() {
            return Err(Error::param("delta", "must be finite"));
        }
        let non_negative = match self.bath {
            Bath::Temperature(t) => vec![("temperature", t)],
            Bath::Occupations { n_b1, n_b2 } => vec![("n_b1", n_b1), ("n_b2", n_b2)],
        };
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Laser detuning `Delta = -(omega_m2 + delta)`.
    pub fn laser_detuning(&self) -> f64 {
        -(self.omega_m2 + self.delta)
    }

    /// Single-photon cooperativity `4 g0^2 / (kappa gamma1)`.
    pub fn c0(&self) -> f64 {
        4.0 * self.g0 * self.g0 / (self.kappa * self.gamma1)
    }

    fn occupation(&self, omega: f64, direct: f64) -> Result<f64> {
        match self.bath {
            Bath::Temperature(t) => planck_occupation(omega, t),
            Bath::Occupations { .. } => Ok(direct),
        }
    }
}

/// Bose-Einstein occupation `1 / (exp(hbar omega / k_B T) - 1)`; zero at `T = 0`.
pub fn planck_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::Domain(format!("Planck occupation needs omega > 0, got {omega}")));
    }
    if !(temperature >= 0.0) {
        return Err(Error::Domain(format!("negative temperature {temperature}")));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    let x = HBAR_OVER_KB * omega / temperature;
    Ok(1.0 / x.exp_m1())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalModeData {
    pub r: f64,
    pub q_plus: f64,
    pub q_minus: f64,
    pub p: f64,
    pub omega_plus0: f64,
    pub omega_minus0: f64,
    pub omega_plus: f64,
    pub omega_minus: f64,
    pub kappa_plus: f64,
    pub kappa_minus: f64,
    /// `kappa / (1 + r^2)`, the leading-order form of `kappa_plus`.
    pub kappa_plus_approx: f64,
    /// `r^2 kappa / (1 + r^2)`, the leading-order form of `kappa_minus`.
    pub kappa_minus_approx: f64,
    pub kappa_cross: f64,
    pub kappa_cross_squeeze: f64,
    pub nth_plus: f64,
    pub nth_minus: f64,
    pub nth_1: f64,
    pub g_plus: f64,
    pub g_minus: f64,
    pub g_cross: f64,
    pub gtilde_plus: f64,
    pub gtilde_minus: f64,
    pub gtilde_cross: f64,
    pub c0: f64,
    pub c_minus: f64,
    pub c_plus: f64,
    pub c_cross: f64,
    /// `kappa_minus / (4 gtilde_minus)`; infinite when `gtilde_minus = 0`.
    pub beta_crit: f64,
}

/// Hybridisation ratio `r`, including the removable point `delta = 0`.
pub fn hybridization_ratio(coupling: f64, delta: f64) -> f64 {
    if coupling == 0.0 {
        return 0.0;
    }
    if delta == 0.0 {
        return 1.0;
    }
    let x = 2.0 * coupling / delta;
    let s = (1.0 + x * x).sqrt();
    if delta > 0.0 {
        x / (1.0 + s)
    } else {
        // x / (1 - s) rewritten without cancellation
        (1.0 + s) / x.abs()
    }
}

pub fn derive_normal_modes(params: &PhysicalParams) -> Result<NormalModeData> {
    params.validate()?;
    let g = params.coupling;
    let d = params.delta;
    let wm2 = params.omega_m2;
    let g0 = params.g0;
    let kappa = params.kappa;
    let gamma2 = params.gamma2;

    let r = hybridization_ratio(g, d);
    let r2 = r * r;
    let opr = 1.0 + r2;

    let root = ((0.5 * d).powi(2) + g * g).sqrt();
    let omega_plus0 = wm2 + 0.5 * d + root;
    let omega_minus0 = wm2 + 0.5 * d - root;
    let q_plus = r * g / (opr * omega_plus0);
    let q_minus = r * g / (opr * omega_minus0);
    let p = r * d / (opr * (omega_minus0 + omega_plus0));
    let shift = r2 * (4.0 * g * g + d * d) / (2.0 * opr * opr * wm2);
    let omega_plus = omega_plus0 - shift;
    let omega_minus = omega_minus0 - shift;
    if !(omega_minus > 0.0) {
        return Err(Error::Domain(format!(
            "lower normal-mode frequency {omega_minus} is not positive"
        )));
    }

    let kappa_plus = (kappa + r2 * gamma2) / opr;
    let kappa_minus = (r2 * kappa + gamma2) / opr;
    let kappa_cross = r * (kappa - gamma2) / opr;
    let kappa_cross_squeeze = (p + r * (q_plus + q_minus) / opr) * kappa;

    let (nb1_direct, nb2_direct) = match params.bath {
        Bath::Occupations { n_b1, n_b2 } => (n_b1, n_b2),
        Bath::Temperature(_) => (0.0, 0.0),
    };
    let nb_plus = params.occupation(omega_plus, nb2_direct)?;
    let nb_minus = params.occupation(omega_minus, nb2_direct)?;
    let nth_1 = params.occupation(params.omega_m1, nb1_direct)?;
    let heating = |rpow: f64| r2 * (4.0 * g * g + rpow * d * d) / (4.0 * opr * opr * wm2 * wm2);
    let nth_plus = r2 * gamma2 * nb_plus / kappa + heating(r2);
    let nth_minus = if r == 0.0 {
        // decoupled: the lower mode is the bare oscillator in its own bath
        nb_minus
    } else {
        gamma2 * nb_minus / (r2 * kappa) + heating(1.0 / r2)
    };

    let g_plus = g0 / opr;
    let g_minus = r2 * g0 / opr;
    let g_cross = -r * g0 / opr;
    let gtilde_plus = -r * (g - r * d / 2.0) * g0 / (opr * opr * wm2);
    let gtilde_minus = r2 * (r * g + d / 2.0) * g0 / (opr * opr * wm2);
    let gtilde_cross = -r * d * g0 / (2.0 * opr * wm2);

    let gamma1 = params.gamma1;
    let c0 = params.c0();
    let c_minus = 4.0 * gtilde_minus * gtilde_minus / (kappa_minus * gamma1);
    let c_plus = 4.0 * gtilde_plus * gtilde_plus / (kappa_plus * gamma1);
    let c_cross = 4.0 * gtilde_cross * gtilde_cross / ((kappa_plus + kappa_minus) * gamma1);
    let beta_crit = critical_amplitude(kappa_minus, gtilde_minus);

    Ok(NormalModeData {
        r,
        q_plus,
        q_minus,
        p,
        omega_plus0,
        omega_minus0,
        omega_plus,
        omega_minus,
        kappa_plus,
        kappa_minus,
        kappa_plus_approx: kappa / opr,
        kappa_minus_approx: r2 * kappa / opr,
        kappa_cross,
        kappa_cross_squeeze,
        nth_plus,
        nth_minus,
        nth_1,
        g_plus,
        g_minus,
        g_cross,
        gtilde_plus,
        gtilde_minus,
        gtilde_cross,
        c0,
        c_minus,
        c_plus,
        c_cross,
        beta_crit,
    })
}

/// `kappa_minus / (4 gtilde_minus)`, infinite without coupling.
pub fn critical_amplitude(kappa_minus: f64, gtilde_minus: f64) -> f64 {
    if gtilde_minus == 0.0 {
        f64::INFINITY
    } else {
        kappa_minus / (4.0 * gtilde_minus)
    }
}

/// `C_-` at `delta = 0` from the single-photon cooperativity.
pub fn c_minus_resonant_shortcut(params: &PhysicalParams) -> f64 {
    let x = params.coupling / (4.0 * params.omega_m2);
    2.0 * x * x * params.c0()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoolingModel {
    Dpo,
    Ndpo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoolingPrediction {
    pub model: CoolingModel,
    pub gamma1_eff: f64,
    pub nth1_eff: f64,
    pub warnings: Vec<String>,
}

/// Effective mechanical linewidth and occupation after eliminating the
/// normal modes.
pub fn cooling_prediction(
    data: &NormalModeData,
    params: &PhysicalParams,
    model: CoolingModel,
) -> CoolingPrediction {
    let gamma1 = params.gamma1;
    let mut warnings = Vec::new();
    let gamma1_eff = match model {
        CoolingModel::Dpo => {
            let detune = (params.omega_m1 - 2.0 * data.omega_minus).abs();
            if detune >= data.kappa_minus {
                warnings.push(format!(
                    "DPO resonance not met: |omega_m1 - 2 omega_-| = {detune:.3e} >= kappa_- = {:.3e}",
                    data.kappa_minus
                ));
            }
            gamma1 + 4.0 * data.gtilde_minus.powi(2) * (1.0 + 2.0 * data.nth_minus) / data.kappa_minus
        }
        CoolingModel::Ndpo => {
            let detune = (params.omega_m1 - data.omega_plus - data.omega_minus).abs();
            if detune >= data.kappa_plus.min(data.kappa_minus) {
                warnings.push(format!(
                    "NDPO resonance not met: |omega_m1 - omega_+ - omega_-| = {detune:.3e}"
                ));
            }
            gamma1
                + 4.0 * data.gtilde_cross.powi(2) * (1.0 + data.nth_plus + data.nth_minus)
                    / (data.kappa_plus + data.kappa_minus)
        }
    };
    CoolingPrediction {
        model,
        gamma1_eff,
        nth1_eff: gamma1 * data.nth_1 / gamma1_eff,
        warnings,
    }
}

/// DPO cooling in cooperativity form: returns `(gamma1_eff, nth1_eff)`.
pub fn dpo_cooling(gamma1: f64, c_minus: f64, nth_minus: f64, nth_1: f64) -> (f64, f64) {
    let gamma1_eff = gamma1 * (1.0 + c_minus * (1.0 + 2.0 * nth_minus));
    (gamma1_eff, gamma1 * nth_1 / gamma1_eff)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// passes when `measured < threshold`
    Below,
    /// passes when `measured > threshold`
    Above,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub inequality: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub relation: Relation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub margin: f64,
    pub checks: Vec<Check>,
}

impl DiagnosticsReport {
    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub const DEFAULT_MARGIN: f64 = 10.0;

/// Regime checks; `margin` is the factor used for every "much less than".
pub fn check_validity(params: &PhysicalParams, data: &NormalModeData, margin: f64) -> DiagnosticsReport {
    let mut checks = Vec::new();
    let mut push = |name: &str, inequality: &str, measured: f64, threshold: f64, relation: Relation| {
        let passed = match relation {
            Relation::Below => measured < threshold,
            Relation::Above => measured > threshold,
        };
        checks.push(Check {
            name: name.into(),
            inequality: inequality.into(),
            passed,
            measured,
            threshold,
            relation,
        });
    };
    let small = 1.0 / margin;
    let (nb1, nb2) = match params.bath {
        Bath::Occupations { n_b1, n_b2 } => (n_b1, n_b2),
        Bath::Temperature(t) => (
            planck_occupation(params.omega_m1, t).unwrap_or(f64::NAN),
            planck_occupation(params.omega_m2, t).unwrap_or(f64::NAN),
        ),
    };
    let g = params.coupling;

    push(
        "frequency_relation",
        "|omega_m1 - 2 omega_m2| << omega_m2",
        (params.omega_m1 - 2.0 * params.omega_m2).abs() / params.omega_m2,
        small,
        Relation::Below,
    );
    push(
        "thermal_condition_1",
        "gamma1 n_B(omega_m1) << kappa",
        params.gamma1 * nb1 / params.kappa,
        small,
        Relation::Below,
    );
    push(
        "thermal_condition_2",
        "gamma2 n_B(omega_m2) << kappa",
        params.gamma2 * nb2 / params.kappa,
        small,
        Relation::Below,
    );
    push("hierarchy_gamma2_kappa", "gamma2 < kappa", params.gamma2 / params.kappa, 1.0, Relation::Below);
    push("hierarchy_kappa_coupling", "kappa < G", params.kappa / g, 1.0, Relation::Below);
    push("hierarchy_coupling_omega_m2", "G < omega_m2", g / params.omega_m2, 1.0, Relation::Below);
    push("strong_coupling", "G >> kappa", g / params.kappa, margin, Relation::Above);
    push(
        "weak_single_photon_coupling",
        "g0^2 / (kappa omega_m1) << 1",
        params.g0 * params.g0 / (params.kappa * params.omega_m1),
        small,
        Relation::Below,
    );
    push(
        "perturbative_expansion",
        "q_+, q_-, |p| << 1",
        data.q_plus.max(data.q_minus).max(data.p.abs()),
        small,
        Relation::Below,
    );
    push(
        "detuning_range",
        "|delta| <~ G",
        params.delta.abs() / g,
        1.0 + 1e-12,
        Relation::Below,
    );
    push(
        "normal_mode_separation",
        "omega_+ - omega_- >> kappa_+, kappa_-",
        (data.omega_plus - data.omega_minus) / data.kappa_plus.max(data.kappa_minus),
        margin,
        Relation::Above,
    );
    push(
        "dpo_resonance",
        "|omega_m1 - 2 omega_-| << kappa_-",
        (params.omega_m1 - 2.0 * data.omega_minus).abs() / data.kappa_minus,
        small,
        Relation::Below,
    );
    push(
        "ndpo_resonance",
        "|omega_m1 - (omega_+ + omega_-)| << kappa_+, kappa_-",
        (params.omega_m1 - data.omega_plus - data.omega_minus).abs()
            / data.kappa_plus.min(data.kappa_minus),
        small,
        Relation::Below,
    );
    push(
        "phonon_number_at_critical",
        "beta_crit^2 < kappa omega_m1 / g0^2",
        data.beta_crit.powi(2) * params.g0 * params.g0 / (params.kappa * params.omega_m1),
        1.0,
        Relation::Below,
    );
    push(
        "critical_amplitude_validity",
        "G >~ sqrt(kappa omega_m1)",
        g / (params.kappa * params.omega_m1).sqrt(),
        1.0,
        Relation::Above,
    );
    let cooled = cooling_prediction(data, params, CoolingModel::Dpo).nth1_eff;
    push(
        "thermal_occupation_smallness",
        "n_th,-^2 << n~_th,1",
        if cooled > 0.0 {
            data.nth_minus.powi(2) / cooled
        } else if data.nth_minus == 0.0 {
            0.0
        } else {
            f64::INFINITY
        },
        small,
        Relation::Below,
    );
    push(
        "adiabatic_elimination",
        "gamma1 n_th,1, gtilde_- << kappa_-",
        (params.gamma1 * data.nth_1).max(data.gtilde_minus.abs()) / data.kappa_minus,
        small,
        Relation::Below,
    );
    push(
        "mechanical_linewidth",
        "gamma1 << kappa_-",
        params.gamma1 / data.kappa_minus,
        small,
        Relation::Below,
    );
    DiagnosticsReport { margin, checks }
}

/// Probe at frequency offset `delta_p` from `omega_m1 / 2` with cavity drive
/// amplitude `omega_p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub delta_p: f64,
    pub omega_p: f64,
}

/// Normal-mode drive amplitude produced by a cavity drive of strength `omega_p`.
pub fn normal_mode_drive(data: &NormalModeData, omega_p: f64) -> f64 {
    let r = data.r;
    r * (1.0 + 0.5 * (data.q_minus.powi(2) + data.p.powi(2))) / (1.0 + r * r).sqrt() * omega_p
}

/// Reduced driven model for the lower normal mode and the first oscillator.
pub fn build_dpo_model(params: &PhysicalParams, data: &NormalModeData, probe: Probe) -> Result<DpoModel> {
    if data.gtilde_minus == 0.0 {
        return Err(Error::DegenerateModel(
            "gtilde_minus = 0: the critical amplitude is undefined".into(),
        ));
    }
    let omega_minus = normal_mode_drive(data, probe.omega_p);
    let mut model = DpoModel::new(
        data.kappa_minus,
        params.gamma1,
        data.gtilde_minus,
        data.nth_minus,
        data.nth_1,
        probe.delta_p,
        Drive::OmegaMinus(omega_minus),
    )?;
    if probe.delta_p.abs() * DEFAULT_MARGIN >= data.kappa_minus {
        model.warnings.push(format!(
            "probe detuning |delta_p| = {:.3e} is not small compared to kappa_- = {:.3e}",
            probe.delta_p.abs(),
            data.kappa_minus
        ));
    }
    let detune = (params.omega_m1 - 2.0 * data.omega_minus).abs();
    if detune * DEFAULT_MARGIN >= data.kappa_minus {
        model.warnings.push(format!(
            "DPO resonance |omega_m1 - 2 omega_-| = {detune:.3e} is not small compared to kappa_- = {:.3e}",
            data.kappa_minus
        ));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn example() -> PhysicalParams {
        PhysicalParams {
            g0: 1.0,
            coupling: 1e3,
            delta: 0.0,
            omega_m1: 2e4,
            omega_m2: 1e4,
            kappa: 100.0,
            gamma1: 1e-4,
            gamma2: 1e-4,
            bath: Bath::Occupations { n_b1: 0.0, n_b2: 0.0 },
        }
    }

    #[test]
    fn planck_limits() {
        assert_eq!(planck_occupation(1.0, 0.0).unwrap(), 0.0);
        let omega = std::f64::consts::LN_2 / HBAR_OVER_KB;
        assert_relative_eq!(planck_occupation(omega, 1.0).unwrap(), 1.0, max_relative = 1e-12);
        let omega = 1e-3 / HBAR_OVER_KB;
        let n = planck_occupation(omega, 1.0).unwrap();
        assert_relative_eq!(n, 1e3, max_relative = 1e-2);
        assert!(matches!(planck_occupation(0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(planck_occupation(-1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn resonant_branch() {
        let d = derive_normal_modes(&example()).unwrap();
        assert_eq!(d.r, 1.0);
        assert_eq!(d.p, 0.0);
        assert_eq!(d.gtilde_cross, 0.0);
        assert_relative_eq!(d.omega_plus0, 1e4 + 1e3);
        assert_relative_eq!(d.omega_minus0, 1e4 - 1e3);
        assert_relative_eq!(d.gtilde_plus, -d.gtilde_minus, max_relative = 1e-15);
    }

    #[test]
    fn worked_cooperativity_example() {
        let params = example();
        let d = derive_normal_modes(&params).unwrap();
        assert_relative_eq!(d.c0, 400.0, max_relative = 1e-12);
        // independent route: gtilde_- = g0 G / (4 omega_m2), kappa_- = (kappa + gamma2) / 2
        let gt = 1.0 * 1e3 / (4.0 * 1e4);
        let km = (100.0 + 1e-4) / 2.0;
        let c = 4.0 * gt * gt / (km * 1e-4);
        assert_relative_eq!(d.gtilde_minus, gt, max_relative = 1e-14);
        assert_relative_eq!(d.c_minus, c, max_relative = 1e-12);
        assert_relative_eq!(d.c_minus, 0.5, max_relative = 1e-5);
        assert_relative_eq!(c_minus_resonant_shortcut(&params), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn decoupled_limit() {
        let mut params = example();
        params.coupling = 0.0;
        params.delta = 50.0;
        let d = derive_normal_modes(&params).unwrap();
        assert_eq!(d.r, 0.0);
        assert_eq!(d.gtilde_plus, 0.0);
        assert_eq!(d.gtilde_minus, 0.0);
        assert_eq!(d.gtilde_cross, 0.0);
        assert_relative_eq!(d.kappa_plus, params.kappa);
        assert_relative_eq!(d.kappa_minus, params.gamma2);
        assert!(d.beta_crit.is_infinite());
    }

    #[test]
    fn r_continuous_through_zero_detuning() {
        let g = 1e3;
        for eps in [1e-6 * g, -1e-6 * g] {
            // r = 1 - delta / (2G) + O(delta^2)
            assert!((hybridization_ratio(g, eps) - (1.0 - eps / (2.0 * g))).abs() < 1e-10);
        }
        // large negative detuning: the lower mode is photon-like, r > 1
        assert!(hybridization_ratio(g, -5.0 * g) > 1.0);
        assert!(hybridization_ratio(g, 5.0 * g) < 1.0);
    }

    #[test]
    fn cooling_examples() {
        let (_, n) = dpo_cooling(1.0, 5.0, 0.0, 1.0);
        assert_relative_eq!(n, 1.0 / 6.0, max_relative = 1e-15);
        let (g, _) = dpo_cooling(1.0, 10.0, 0.05, 1.0);
        assert_relative_eq!(g, 12.0, max_relative = 1e-14);

        let mut params = example();
        params.bath = Bath::Occupations { n_b1: 3.0, n_b2: 0.0 };
        let mut d = derive_normal_modes(&params).unwrap();
        d.gtilde_minus = 0.0;
        let pred = cooling_prediction(&d, &params, CoolingModel::Dpo);
        assert_eq!(pred.gamma1_eff, params.gamma1);
        assert_eq!(pred.nth1_eff, 3.0);
    }

    #[test]
    fn validity_checks() {
        let mut params = example();
        let data = derive_normal_modes(&params).unwrap();
        let report = check_validity(&params, &data, DEFAULT_MARGIN);
        for name in ["hierarchy_gamma2_kappa", "hierarchy_kappa_coupling", "hierarchy_coupling_omega_m2"] {
            assert!(report.get(name).unwrap().passed, "{name}");
        }
        params.coupling = params.kappa;
        let data = derive_normal_modes(&params).unwrap();
        let report = check_validity(&params, &data, DEFAULT_MARGIN);
        let strong = report.get("strong_coupling").unwrap();
        assert!(!strong.passed);
        assert_relative_eq!(strong.measured, 1.0);

        // tune omega_m1 onto the DPO resonance
        let mut params = example();
        let data = derive_normal_modes(&params).unwrap();
        params.omega_m1 = 2.0 * data.omega_minus;
        let report = check_validity(&params, &data, DEFAULT_MARGIN);
        let res = report.get("dpo_resonance").unwrap();
        assert!(res.passed);
        assert_eq!(res.measured, 0.0);
    }

    #[test]
    fn dpo_model_from_physical() {
        let params = example();
        let data = derive_normal_modes(&params).unwrap();
        let m = build_dpo_model(&params, &data, Probe { delta_p: 0.0, omega_p: 0.0 }).unwrap();
        assert_eq!(m.omega_tilde, 0.0);
        assert_eq!(m.alpha0, 0.0);
        let m = build_dpo_model(&params, &data, Probe { delta_p: 0.0, omega_p: 2.0 }).unwrap();
        // r = 1 and q_-, p small: Omega_- close to Omega_p / sqrt 2
        assert_relative_eq!(m.omega_minus, 2.0 / 2f64.sqrt(), max_relative = 1e-2);

        let mut decoupled = params.clone();
        decoupled.coupling = 0.0;
        let data = derive_normal_modes(&decoupled).unwrap();
        assert!(matches!(
            build_dpo_model(&decoupled, &data, Probe { delta_p: 0.0, omega_p: 1.0 }),
            Err(Error::DegenerateModel(_))
        ));
    }
}
