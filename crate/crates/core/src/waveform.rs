//! Analytic model of the quarter-wave symmetric staircase produced by a
//! cascaded H-bridge inverter.
//!
//! The output of `S` series cells with equal DC links is a staircase that
//! steps up by `vdc` at each switching angle `α_k` within the first quarter
//! period. Quarter-wave odd symmetry removes every even harmonic and every
//! cosine term, leaving
//!
//! ```text
//! v_n = 4·vdc / (n·π) · Σ_k cos(n·α_k)      (odd n)
//! v_n = 0                                   (even n)
//! ```

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used by [`InverterConfig::modulation_index`] before a demand is
/// declared infeasible.
pub const DEFAULT_MI_TOLERANCE: f64 = 1e-9;

/// The inverter plant: `cells` identical H-bridges fed by `vdc` each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInverterConfig")]
pub struct InverterConfig {
    cells: usize,
    vdc: f64,
    dc_sources: usize,
    base_voltage: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInverterConfig {
    cells: usize,
    vdc: f64,
    dc_sources: Option<usize>,
    base_voltage: Option<f64>,
}

impl TryFrom<RawInverterConfig> for InverterConfig {
    type Error = Error;

    fn try_from(raw: RawInverterConfig) -> Result<Self> {
        let mut cfg = InverterConfig::new(raw.cells, raw.vdc)?;
        if let Some(d) = raw.dc_sources {
            cfg = cfg.with_dc_sources(d)?;
        }
        if let Some(b) = raw.base_voltage {
            cfg = cfg.with_base_voltage(b)?;
        }
        Ok(cfg)
    }
}

impl InverterConfig {
    /// A plant with `D = S` sources and base voltage `S·vdc`.
    pub fn new(cells: usize, vdc: f64) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidConfig("cell count must be at least 1".into()));
        }
        if !(vdc.is_finite() && vdc > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "vdc must be positive, got {vdc}"
            )));
        }
        Ok(Self {
            cells,
            vdc,
            dc_sources: cells,
            base_voltage: cells as f64 * vdc,
        })
    }

    /// The 7-level reference plant: three 100 V cells, 300 V base.
    pub fn reference() -> Self {
        Self::new(3, 100.0).expect("reference plant is valid")
    }

    pub fn with_dc_sources(mut self, dc_sources: usize) -> Result<Self> {
        if dc_sources == 0 {
            return Err(Error::InvalidConfig(
                "dc source count must be at least 1".into(),
            ));
        }
        self.dc_sources = dc_sources;
        Ok(self)
    }

    pub fn with_base_voltage(mut self, base_voltage: f64) -> Result<Self> {
        if !(base_voltage.is_finite() && base_voltage > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "base voltage must be positive, got {base_voltage}"
            )));
        }
        self.base_voltage = base_voltage;
        Ok(self)
    }

    /// Same plant with a different per-cell DC voltage. The base voltage is
    /// left untouched.
    pub fn with_vdc(mut self, vdc: f64) -> Result<Self> {
        if !(vdc.is_finite() && vdc > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "vdc must be positive, got {vdc}"
            )));
        }
        self.vdc = vdc;
        Ok(self)
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn vdc(&self) -> f64 {
        self.vdc
    }

    pub fn dc_sources(&self) -> usize {
        self.dc_sources
    }

    pub fn base_voltage(&self) -> f64 {
        self.base_voltage
    }

    /// Number of distinct output levels, `2S + 1`.
    pub fn levels(&self) -> usize {
        2 * self.cells + 1
    }

    /// Peak of the staircase, `S·vdc`.
    pub fn peak_voltage(&self) -> f64 {
        self.cells as f64 * self.vdc
    }

    /// Largest reachable fundamental, obtained with every angle at zero.
    pub fn v1_max(&self) -> f64 {
        4.0 * self.cells as f64 * self.vdc / PI
    }

    /// `m_i = v1 / v1_max`. Rejects demands above 1 by more than
    /// [`DEFAULT_MI_TOLERANCE`].
    pub fn modulation_index(&self, v1: f64) -> Result<f64> {
        self.modulation_index_with_tolerance(v1, DEFAULT_MI_TOLERANCE)
    }

    pub fn modulation_index_with_tolerance(&self, v1: f64, tolerance: f64) -> Result<f64> {
        if !(v1.is_finite() && v1 >= 0.0) {
            return Err(Error::InvalidProblem(format!(
                "fundamental must be non-negative, got {v1}"
            )));
        }
        let mi = PI * v1 / (4.0 * self.cells as f64 * self.vdc);
        if mi > 1.0 + tolerance {
            return Err(Error::InfeasibleDemand(mi));
        }
        Ok(mi)
    }

    /// Inverse of [`Self::modulation_index`], defined for `0 < m_i ≤ 1`.
    pub fn target_v1(&self, modulation_index: f64) -> Result<f64> {
        if !(modulation_index > 0.0 && modulation_index <= 1.0) {
            return Err(Error::InvalidProblem(format!(
                "modulation index must lie in (0, 1], got {modulation_index}"
            )));
        }
        Ok(modulation_index * self.v1_max())
    }

    /// Fundamental amplitude in per-unit of the base voltage. This, not the
    /// modulation index, is the operating-point variable used everywhere
    /// above this module; the two differ by a factor of π/4.
    pub fn per_unit_voltage(&self, v1: f64) -> f64 {
        v1 / self.base_voltage
    }
}

/// Switching angles in radians, strictly increasing inside `(0, π/2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SwitchingAngles(Vec<f64>);

impl SwitchingAngles {
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::InvalidAngles(
                "at least one angle is required".into(),
            ));
        }
        if let Some(a) = angles.iter().find(|a| !a.is_finite()) {
            return Err(Error::InvalidAngles(format!("non-finite angle {a}")));
        }
        if angles[0] <= 0.0 {
            return Err(Error::InvalidAngles(format!(
                "first angle must be positive, got {}",
                angles[0]
            )));
        }
        let last = angles[angles.len() - 1];
        if last >= FRAC_PI_2 {
            return Err(Error::InvalidAngles(format!(
                "last angle must be below π/2, got {last}"
            )));
        }
        if let Some(w) = angles.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::InvalidAngles(format!(
                "angles must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        Ok(Self(angles))
    }

    pub fn from_degrees(degrees: &[f64]) -> Result<Self> {
        Self::new(degrees.iter().map(|d| d.to_radians()).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_degrees(&self) -> Vec<f64> {
        self.0.iter().map(|a| a.to_degrees()).collect()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for SwitchingAngles {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SwitchingAngles> for Vec<f64> {
    fn from(a: SwitchingAngles) -> Self {
        a.0
    }
}

/// Signed peak amplitudes of the odd harmonics of a staircase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicSpectrum {
    orders: Vec<u32>,
    amplitudes: Vec<f64>,
}

impl HarmonicSpectrum {
    pub fn orders(&self) -> &[u32] {
        &self.orders
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    /// Signed amplitude of harmonic `n`; zero for even orders and orders
    /// outside the computed window.
    pub fn amplitude(&self, n: u32) -> f64 {
        self.orders
            .iter()
            .position(|&o| o == n)
            .map_or(0.0, |i| self.amplitudes[i])
    }

    pub fn magnitude(&self, n: u32) -> f64 {
        self.amplitude(n).abs()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.orders
            .iter()
            .copied()
            .zip(self.amplitudes.iter().copied())
    }
}

pub(crate) fn amplitude_of(vdc: f64, angles: &[f64], n: u32) -> f64 {
    if n.is_multiple_of(2) {
        return 0.0;
    }
    let nf = f64::from(n);
    let sum: f64 = angles.iter().map(|a| (nf * a).cos()).sum();
    4.0 * vdc / (nf * PI) * sum
}

/// Peak amplitude of harmonic `n` (signed). Exactly zero for even `n`.
pub fn harmonic_amplitude(cfg: &InverterConfig, angles: &SwitchingAngles, n: u32) -> f64 {
    amplitude_of(cfg.vdc, angles.as_slice(), n)
}

pub fn fundamental(cfg: &InverterConfig, angles: &SwitchingAngles) -> f64 {
    harmonic_amplitude(cfg, angles, 1)
}

pub fn v1_max(cfg: &InverterConfig) -> f64 {
    cfg.v1_max()
}

pub fn modulation_index(cfg: &InverterConfig, v1: f64) -> Result<f64> {
    cfg.modulation_index(v1)
}

pub fn per_unit_voltage(cfg: &InverterConfig, v1: f64) -> f64 {
    cfg.per_unit_voltage(v1)
}

/// Odd harmonics `1, 3, …, max_order`.
pub fn spectrum(
    cfg: &InverterConfig,
    angles: &SwitchingAngles,
    max_order: u32,
) -> HarmonicSpectrum {
    let orders: Vec<u32> = (1..=max_order).step_by(2).collect();
    let amplitudes = orders
        .iter()
        .map(|&n| harmonic_amplitude(cfg, angles, n))
        .collect();
    HarmonicSpectrum { orders, amplitudes }
}

pub(crate) fn rms_of(vdc: f64, angles: &[f64]) -> f64 {
    let s = angles.len();
    let mut acc = 0.0;
    for k in 0..s {
        let next = if k + 1 < s { angles[k + 1] } else { FRAC_PI_2 };
        let level = (k + 1) as f64 * vdc;
        acc += level * level * (next - angles[k]);
    }
    (2.0 / PI * acc).sqrt()
}

/// Exact RMS of the staircase over one period.
pub fn rms_closed_form(cfg: &InverterConfig, angles: &SwitchingAngles) -> f64 {
    rms_of(cfg.vdc, angles.as_slice())
}

/// Staircase level (in units of vdc) at electrical angle `theta ∈ [0, π]`.
fn half_wave_level(angles: &[f64], theta: f64) -> usize {
    let q = if theta <= FRAC_PI_2 {
        theta
    } else {
        PI - theta
    };
    // steps are left-closed: the level changes at α_k itself
    angles.partition_point(|&a| a <= q)
}

/// Samples one fundamental period of the staircase at `t_i = i·T/N`.
pub fn synthesize(
    cfg: &InverterConfig,
    angles: &SwitchingAngles,
    samples_per_period: usize,
) -> Result<Vec<f64>> {
    let min = 4 * angles.len();
    if samples_per_period < min {
        return Err(Error::InvalidConfig(format!(
            "need at least {min} samples per period, got {samples_per_period}"
        )));
    }
    let n = samples_per_period;
    let a = angles.as_slice();
    let even = n.is_multiple_of(2);
    let half = n / 2;
    let out = (0..n)
        .map(|i| {
            // For even N the second half reuses the first half's phases so
            // that v[i + N/2] = -v[i] holds exactly.
            let (j, sign) = if even && i >= half {
                (i - half, -1.0)
            } else {
                (i, 1.0)
            };
            let mut theta = 2.0 * PI * j as f64 / n as f64;
            let mut sign = sign;
            if theta >= PI {
                theta -= PI;
                sign = -sign;
            }
            sign * half_wave_level(a, theta) as f64 * cfg.vdc
        })
        .collect();
    Ok(out)
}

/// Peak amplitude of harmonic `n` recovered from one period of samples by a
/// single-bin DFT (sine and cosine projections combined).
pub fn dft_amplitude(samples: &[f64], n: u32) -> f64 {
    let len = samples.len() as f64;
    let w = 2.0 * PI * f64::from(n) / len;
    let (re, im) = samples
        .iter()
        .enumerate()
        .fold((0.0, 0.0), |(re, im), (i, &x)| {
            let phase = w * i as f64;
            (re + x * phase.cos(), im + x * phase.sin())
        });
    2.0 / len * re.hypot(im)
}
