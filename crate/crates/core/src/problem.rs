//! The selective harmonic elimination system posed as a weighted
//! minimisation, plus the distortion metrics used to grade a solution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::waveform::{self, InverterConfig, SwitchingAngles};

/// Residual magnitude (per unit of base voltage) below which an operating
/// point counts as exactly solved.
pub const FEASIBILITY_TOL_PU: f64 = 1e-3;

/// Default window for [`thd_spectral`] reporting.
pub const DEFAULT_THD_MAX_ORDER: u32 = 49;

/// How each eliminated harmonic is weighted inside the cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HarmonicWeighting {
    /// `1/h` per order: low orders dominate.
    #[default]
    ReciprocalOrder,
    Uniform,
}

/// Problem-level knobs shared by every operating point of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SheOptions {
    pub eliminate_orders: Vec<u32>,
    pub weight_fundamental: f64,
    pub weight_harmonics: f64,
    pub harmonic_weighting: HarmonicWeighting,
    pub thd_max_order: u32,
}

impl Default for SheOptions {
    fn default() -> Self {
        Self {
            eliminate_orders: vec![3, 5],
            weight_fundamental: 100.0,
            weight_harmonics: 1.0,
            harmonic_weighting: HarmonicWeighting::ReciprocalOrder,
            thd_max_order: DEFAULT_THD_MAX_ORDER,
        }
    }
}

impl SheOptions {
    /// Non-triplen variant (5th and 7th), for three-phase style runs.
    pub fn non_triplen() -> Self {
        Self {
            eliminate_orders: vec![5, 7],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_orders(&self.eliminate_orders)?;
        for (name, w) in [
            ("weight_fundamental", self.weight_fundamental),
            ("weight_harmonics", self.weight_harmonics),
        ] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidProblem(format!(
                    "{name} must be >= 0, got {w}"
                )));
            }
        }
        if self.thd_max_order < 3 {
            return Err(Error::InvalidProblem(format!(
                "thd_max_order must be at least 3, got {}",
                self.thd_max_order
            )));
        }
        Ok(())
    }
}

fn validate_orders(orders: &[u32]) -> Result<()> {
    for (i, &h) in orders.iter().enumerate() {
        if h < 3 || h % 2 == 0 {
            return Err(Error::InvalidProblem(format!(
                "eliminated orders must be odd and >= 3, got {h}"
            )));
        }
        if orders[..i].contains(&h) {
            return Err(Error::InvalidProblem(format!("order {h} listed twice")));
        }
    }
    Ok(())
}

/// A single SHE operating point on a fixed plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheProblem {
    cfg: InverterConfig,
    target_pu: f64,
    options: SheOptions,
}

impl SheProblem {
    pub fn new(cfg: InverterConfig, target_pu: f64, options: SheOptions) -> Result<Self> {
        if !(target_pu > 0.0 && target_pu <= 1.0) {
            return Err(Error::InvalidProblem(format!(
                "target per-unit voltage must lie in (0, 1], got {target_pu}"
            )));
        }
        options.validate()?;
        Ok(Self {
            cfg,
            target_pu,
            options,
        })
    }

    pub fn cfg(&self) -> &InverterConfig {
        &self.cfg
    }

    pub fn target_pu(&self) -> f64 {
        self.target_pu
    }

    pub fn options(&self) -> &SheOptions {
        &self.options
    }

    pub fn eliminate_orders(&self) -> &[u32] {
        &self.options.eliminate_orders
    }

    /// Fundamental demanded, in volts.
    pub fn target_v1(&self) -> f64 {
        self.target_pu * self.cfg.base_voltage()
    }

    /// True when the number of eliminated orders uses up exactly the
    /// remaining degrees of freedom.
    pub fn is_square(&self) -> bool {
        self.options.eliminate_orders.len() + 1 == self.cfg.cells()
    }

    fn check_dims(&self, angles: &SwitchingAngles) -> Result<()> {
        if angles.len() != self.cfg.cells() {
            return Err(Error::DimensionMismatch {
                expected: self.cfg.cells(),
                got: angles.len(),
            });
        }
        Ok(())
    }

    pub fn residuals(&self, angles: &SwitchingAngles) -> Result<Residuals> {
        self.check_dims(angles)?;
        let a = angles.as_slice();
        let vdc = self.cfg.vdc();
        Ok(Residuals {
            fundamental_error: waveform::amplitude_of(vdc, a, 1) - self.target_v1(),
            harmonic_values: self
                .options
                .eliminate_orders
                .iter()
                .map(|&h| waveform::amplitude_of(vdc, a, h))
                .collect(),
        })
    }

    pub fn cost(&self, angles: &SwitchingAngles) -> Result<f64> {
        self.check_dims(angles)?;
        Ok(self.cost_raw(angles.as_slice()))
    }

    /// Weighted cost on a raw angle slice. Ordering is not checked; callers
    /// own that.
    ///
    /// ```text
    /// f = A·|M − |v1|/(D·vdc)| + B·Σ_h w_h·|v_h|/(D·vdc)
    /// ```
    pub(crate) fn cost_raw(&self, angles: &[f64]) -> f64 {
        let vdc = self.cfg.vdc();
        let norm = self.cfg.dc_sources() as f64 * vdc;
        let v1 = waveform::amplitude_of(vdc, angles, 1);
        let fundamental_term = (self.target_pu - v1.abs() / norm).abs();
        let harmonic_term: f64 = self
            .options
            .eliminate_orders
            .iter()
            .map(|&h| {
                let w = match self.options.harmonic_weighting {
                    HarmonicWeighting::ReciprocalOrder => 1.0 / f64::from(h),
                    HarmonicWeighting::Uniform => 1.0,
                };
                w * waveform::amplitude_of(vdc, angles, h).abs() / norm
            })
            .sum();
        self.options.weight_fundamental * fundamental_term
            + self.options.weight_harmonics * harmonic_term
    }

    /// All residual magnitudes below [`FEASIBILITY_TOL_PU`] of base voltage.
    pub fn is_feasible(&self, residuals: &Residuals) -> bool {
        let tol = FEASIBILITY_TOL_PU * self.cfg.base_voltage();
        residuals.fundamental_error.abs() < tol
            && residuals.harmonic_values.iter().all(|v| v.abs() < tol)
    }
}

/// Signed equation residuals in volts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// Achieved fundamental minus the target.
    pub fundamental_error: f64,
    /// Signed amplitude per eliminated order, in problem order.
    pub harmonic_values: Vec<f64>,
}

impl Residuals {
    pub fn max_abs(&self) -> f64 {
        self.harmonic_values
            .iter()
            .fold(self.fundamental_error.abs(), |m, v| m.max(v.abs()))
    }
}

fn fundamental_floor(cfg: &InverterConfig, v1: f64) -> Result<()> {
    if v1.is_nan() || v1.abs() < 1e-9 * cfg.vdc() {
        return Err(Error::ZeroFundamental(v1));
    }
    Ok(())
}

/// THD over the odd harmonics `3..=max_order`, as a fraction.
pub fn thd_spectral(cfg: &InverterConfig, angles: &SwitchingAngles, max_order: u32) -> Result<f64> {
    if max_order < 3 {
        return Err(Error::InvalidProblem(format!(
            "THD window must reach at least order 3, got {max_order}"
        )));
    }
    let a = angles.as_slice();
    let v1 = waveform::amplitude_of(cfg.vdc(), a, 1);
    fundamental_floor(cfg, v1)?;
    let sum_sq: f64 = (3..=max_order)
        .step_by(2)
        .map(|n| waveform::amplitude_of(cfg.vdc(), a, n).powi(2))
        .sum();
    Ok(sum_sq.sqrt() / v1.abs())
}

/// THD over every harmonic, from the closed-form RMS via Parseval.
pub fn thd_total(cfg: &InverterConfig, angles: &SwitchingAngles) -> Result<f64> {
    let a = angles.as_slice();
    let v1 = waveform::amplitude_of(cfg.vdc(), a, 1);
    fundamental_floor(cfg, v1)?;
    let rms = waveform::rms_of(cfg.vdc(), a);
    let harmonic_sq = (2.0 * rms * rms - v1 * v1).max(0.0);
    Ok(harmonic_sq.sqrt() / v1.abs())
}
