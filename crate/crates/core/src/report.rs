//! Run configuration, solve records and the CSV tables behind the plots.
//!
//! CSV files are comma separated with LF line endings and a fixed header on
//! the first line. Every numeric field is checked for finiteness before it
//! is written, and every file is written to a temporary sibling and then
//! renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{thd_spectral, thd_total, SheOptions};
use crate::solver::{PsoParams, TracePoint};
use crate::strategy::{
    compare_methods, validate_grid, ComparisonRow, Method, PointSolution, SweepRow, SweepTable,
    DEFAULT_THRESHOLD,
};
use crate::waveform::{self, InverterConfig, SwitchingAngles};

/// Per-unit grid of the reference THD comparison.
pub const DEFAULT_PU_GRID: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
pub const DEFAULT_SAMPLES: usize = 4096;
pub const DEFAULT_FREQUENCY_HZ: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Parse {
                what: "format".into(),
                detail: format!("expected `csv` or `json`, got `{other}`"),
            }),
        }
    }
}

/// Everything needed to reproduce a sweep. Missing fields take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub plant: InverterConfig,
    pub pu_grid: Vec<f64>,
    pub methods: Vec<Method>,
    pub pso: PsoParams,
    pub she: SheOptions,
    pub threshold: f64,
    pub output_dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            plant: InverterConfig::reference(),
            pu_grid: DEFAULT_PU_GRID.to_vec(),
            methods: Method::ALL.to_vec(),
            pso: PsoParams::default(),
            she: SheOptions::default(),
            threshold: DEFAULT_THRESHOLD,
            output_dir: PathBuf::from("out"),
            formats: vec![Format::Csv],
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            what: "run configuration".into(),
            detail: e.to_string(),
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse {
            what: "run configuration".into(),
            detail: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        validate_grid(&self.pu_grid)?;
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no method selected".into()));
        }
        if self.formats.is_empty() {
            return Err(Error::InvalidConfig("no output format selected".into()));
        }
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "threshold must lie in (0, 1], got {}",
                self.threshold
            )));
        }
        self.pso.validate()?;
        self.she.validate()
    }
}

fn finite(field: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite(field.to_string()))
    }
}

fn fixed(field: &str, x: f64) -> Result<String> {
    Ok(format!("{:.6}", finite(field, x)?))
}

fn sci(field: &str, x: f64) -> Result<String> {
    Ok(format!("{:.6e}", finite(field, x)?))
}

fn angle_columns(cells: usize) -> String {
    (1..=cells).map(|k| format!(",alpha_{k}_deg")).collect()
}

fn cells_of(rows: &[&SweepRow]) -> Result<usize> {
    let cells = rows.first().map_or(0, |r| r.angles.len());
    if rows.iter().any(|r| r.angles.len() != cells) {
        return Err(Error::InvalidConfig(
            "sweep rows disagree on the number of angles".into(),
        ));
    }
    Ok(cells)
}

pub fn sweep_header(cells: usize) -> String {
    format!(
        "pu,method,effective_vdc,effective_target_pu{},target_v1,achieved_v1,achieved_pu,\
         thd_spectral_pct,thd_total_pct,feasible,best_cost,seed",
        angle_columns(cells)
    )
}

pub const COMPARISON_HEADER: &str = "pu,thd_classic_pct,thd_proposed_pct,improvement_pct";
pub const TRACKING_HEADER: &str = "pu,method,target_v1,achieved_v1,error_pct,feasible";
pub const WAVEFORM_HEADER: &str = "time_s,volts";
pub const SPECTRUM_HEADER: &str = "order,amplitude_v,amplitude_pct";

pub fn angles_header(cells: usize) -> String {
    format!("pu{}", angle_columns(cells))
}

pub fn sweep_csv(table: &SweepTable) -> Result<String> {
    let rows: Vec<&SweepRow> = table.rows.iter().collect();
    let mut out = sweep_header(cells_of(&rows)?);
    out.push('\n');
    for r in rows {
        let mut line = format!(
            "{},{},{},{}",
            fixed("pu", r.v_out_pu)?,
            r.method,
            fixed("effective_vdc", r.effective_vdc)?,
            fixed("effective_target_pu", r.effective_target_pu)?
        );
        for a in r.angles.to_degrees() {
            line.push(',');
            line.push_str(&fixed("alpha_deg", a)?);
        }
        let _ = writeln!(
            line,
            ",{},{},{},{},{},{},{},{}",
            fixed("target_v1", r.target_v1)?,
            fixed("achieved_v1", r.achieved_v1)?,
            fixed("achieved_pu", r.achieved_pu)?,
            fixed("thd_spectral_pct", r.thd_spectral_pct)?,
            fixed("thd_total_pct", r.thd_total_pct)?,
            r.feasible,
            sci("best_cost", r.best_cost)?,
            r.seed
        );
        out.push_str(&line);
    }
    Ok(out)
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> Result<String> {
    let mut out = format!("{COMPARISON_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fixed("pu", r.v_out_pu)?,
            fixed("thd_classic_pct", r.thd_classic_pct)?,
            fixed("thd_proposed_pct", r.thd_proposed_pct)?,
            fixed("improvement_pct", r.improvement_pct)?
        );
    }
    Ok(out)
}

pub fn angles_csv(table: &SweepTable, method: Method) -> Result<String> {
    let rows: Vec<&SweepRow> = table.rows_for(method).collect();
    let mut out = angles_header(cells_of(&rows)?);
    out.push('\n');
    for r in rows {
        out.push_str(&fixed("pu", r.v_out_pu)?);
        for a in r.angles.to_degrees() {
            out.push(',');
            out.push_str(&fixed("alpha_deg", a)?);
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn tracking_csv(table: &SweepTable) -> Result<String> {
    let mut out = format!("{TRACKING_HEADER}\n");
    for r in &table.rows {
        let err = 100.0 * (r.achieved_v1 - r.target_v1) / r.target_v1;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fixed("pu", r.v_out_pu)?,
            r.method,
            fixed("target_v1", r.target_v1)?,
            fixed("achieved_v1", r.achieved_v1)?,
            fixed("error_pct", err)?,
            r.feasible
        );
    }
    Ok(out)
}

/// One period of the staircase, sampled at `samples` points.
pub fn waveform_csv(
    cfg: &InverterConfig,
    angles: &SwitchingAngles,
    samples: usize,
    frequency_hz: f64,
) -> Result<String> {
    if !(frequency_hz.is_finite() && frequency_hz > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "frequency must be positive, got {frequency_hz}"
        )));
    }
    let v = waveform::synthesize(cfg, angles, samples)?;
    let dt = 1.0 / (frequency_hz * samples as f64);
    let mut out = format!("{WAVEFORM_HEADER}\n");
    for (i, x) in v.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{}",
            sci("time_s", i as f64 * dt)?,
            fixed("volts", *x)?
        );
    }
    Ok(out)
}

/// Odd-harmonic magnitudes up to `max_order`, in volts and in percent of
/// the fundamental.
pub fn spectrum_csv(
    cfg: &InverterConfig,
    angles: &SwitchingAngles,
    max_order: u32,
) -> Result<String> {
    let spec = waveform::spectrum(cfg, angles, max_order.max(1));
    let v1 = spec.magnitude(1);
    if v1 < 1e-9 * cfg.vdc() {
        return Err(Error::ZeroFundamental(v1));
    }
    let mut out = format!("{SPECTRUM_HEADER}\n");
    for (n, a) in spec.iter() {
        let _ = writeln!(
            out,
            "{n},{},{}",
            fixed("amplitude_v", a.abs())?,
            fixed("amplitude_pct", 100.0 * a.abs() / v1)?
        );
    }
    Ok(out)
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Parse {
        what: "json output".into(),
        detail: e.to_string(),
    })?;
    s.push('\n');
    Ok(s)
}

fn check_rows(table: &SweepTable) -> Result<()> {
    for r in &table.rows {
        for (name, x) in [
            ("pu", r.v_out_pu),
            ("effective_vdc", r.effective_vdc),
            ("effective_target_pu", r.effective_target_pu),
            ("target_v1", r.target_v1),
            ("achieved_v1", r.achieved_v1),
            ("achieved_pu", r.achieved_pu),
            ("thd_spectral_pct", r.thd_spectral_pct),
            ("thd_total_pct", r.thd_total_pct),
            ("best_cost", r.best_cost),
        ] {
            finite(name, x)?;
        }
    }
    Ok(())
}

/// Writes the sweep tables into `dir` and returns the paths written.
pub fn write_sweep_outputs(
    table: &SweepTable,
    dir: &Path,
    formats: &[Format],
) -> Result<Vec<PathBuf>> {
    check_rows(table)?;
    let has = |m: Method| table.rows_for(m).next().is_some();
    let comparison = if has(Method::Classic) && has(Method::Proposed) {
        Some(compare_methods(table)?)
    } else {
        None
    };
    let mut files: Vec<(&str, String)> = Vec::new();
    if formats.contains(&Format::Csv) {
        files.push(("sweep.csv", sweep_csv(table)?));
        if let Some(c) = &comparison {
            files.push(("comparison.csv", comparison_csv(c)?));
        }
        for (m, name) in [
            (Method::Classic, "angles_classic.csv"),
            (Method::Proposed, "angles_proposed.csv"),
        ] {
            if has(m) {
                files.push((name, angles_csv(table, m)?));
            }
        }
        files.push(("tracking.csv", tracking_csv(table)?));
    }
    if formats.contains(&Format::Json) {
        files.push(("sweep.json", to_json(table)?));
        if let Some(c) = &comparison {
            files.push(("comparison.json", to_json(c)?));
        }
    }
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        write_atomic(&path, body.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicResidual {
    pub order: u32,
    pub amplitude_v: f64,
    /// Amplitude over the effective plant's base voltage.
    pub per_unit: f64,
    /// Amplitude over the achieved fundamental.
    pub relative_to_fundamental: f64,
}

/// Self-contained description of one solve, written as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveRecord {
    pub v_out_pu: f64,
    pub method: Method,
    pub threshold: f64,
    pub plant: InverterConfig,
    /// Plant the angles were solved for; equal to `plant` unless halved.
    pub effective_plant: InverterConfig,
    pub effective_vdc: f64,
    pub effective_target_pu: f64,
    pub halved: bool,
    pub angles_deg: Vec<f64>,
    pub angles_rad: Vec<f64>,
    pub target_v1: f64,
    pub achieved_v1: f64,
    pub achieved_pu: f64,
    pub fundamental_error_v: f64,
    pub harmonics: Vec<HarmonicResidual>,
    pub thd_spectral_pct: f64,
    pub thd_total_pct: f64,
    pub feasible: bool,
    pub best_cost: f64,
    pub iterations_used: usize,
    pub evaluations: u64,
    pub seed: u64,
    pub params: PsoParams,
    pub she: SheOptions,
    pub convergence_trace: Vec<TracePoint>,
}

impl SolveRecord {
    pub fn new(
        plant: &InverterConfig,
        threshold: f64,
        solution: &PointSolution,
        params: &PsoParams,
        she: &SheOptions,
    ) -> Self {
        let PointSolution {
            resolved,
            result,
            row,
        } = solution;
        let v1 = row.achieved_v1;
        let base = resolved.plant.base_voltage();
        let harmonics = she
            .eliminate_orders
            .iter()
            .zip(&result.residuals.harmonic_values)
            .map(|(&order, &value)| HarmonicResidual {
                order,
                amplitude_v: value,
                per_unit: value / base,
                relative_to_fundamental: value / v1,
            })
            .collect();
        Self {
            v_out_pu: row.v_out_pu,
            method: row.method,
            threshold,
            plant: *plant,
            effective_plant: resolved.plant,
            effective_vdc: resolved.effective_vdc,
            effective_target_pu: resolved.effective_target_pu,
            halved: resolved.halved,
            angles_deg: result.angles.to_degrees(),
            angles_rad: result.angles.as_slice().to_vec(),
            target_v1: row.target_v1,
            achieved_v1: v1,
            achieved_pu: row.achieved_pu,
            fundamental_error_v: result.residuals.fundamental_error,
            harmonics,
            thd_spectral_pct: row.thd_spectral_pct,
            thd_total_pct: row.thd_total_pct,
            feasible: result.feasible,
            best_cost: result.best_cost,
            iterations_used: result.iterations_used,
            evaluations: result.evaluations,
            seed: row.seed,
            params: params.clone(),
            she: she.clone(),
            convergence_trace: result.convergence_trace.clone(),
        }
    }

    pub fn angles(&self) -> Result<SwitchingAngles> {
        SwitchingAngles::new(self.angles_rad.clone())
    }

    /// Recomputes both THD figures (in percent) from the stored angles.
    pub fn reevaluate_thd(&self) -> Result<(f64, f64)> {
        let a = self.angles()?;
        let p = &self.effective_plant;
        Ok((
            100.0 * thd_spectral(p, &a, self.she.thd_max_order)?,
            100.0 * thd_total(p, &a)?,
        ))
    }

    fn check_finite(&self) -> Result<()> {
        let scalars = [
            ("v_out_pu", self.v_out_pu),
            ("threshold", self.threshold),
            ("effective_vdc", self.effective_vdc),
            ("effective_target_pu", self.effective_target_pu),
            ("target_v1", self.target_v1),
            ("achieved_v1", self.achieved_v1),
            ("achieved_pu", self.achieved_pu),
            ("fundamental_error_v", self.fundamental_error_v),
            ("thd_spectral_pct", self.thd_spectral_pct),
            ("thd_total_pct", self.thd_total_pct),
            ("best_cost", self.best_cost),
        ];
        for (name, x) in scalars {
            finite(name, x)?;
        }
        for x in self.angles_deg.iter().chain(&self.angles_rad) {
            finite("angles", *x)?;
        }
        for h in &self.harmonics {
            finite("harmonics.amplitude_v", h.amplitude_v)?;
            finite("harmonics.per_unit", h.per_unit)?;
            finite(
                "harmonics.relative_to_fundamental",
                h.relative_to_fundamental,
            )?;
        }
        for t in &self.convergence_trace {
            finite("convergence_trace", t.best_cost)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        self.check_finite()?;
        to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: Self = serde_json::from_str(text).map_err(|e| Error::Parse {
            what: "solve record".into(),
            detail: e.to_string(),
        })?;
        rec.angles()?;
        Ok(rec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

fn parse_err(detail: String) -> Error {
    Error::Parse {
        what: "sweep csv".into(),
        detail,
    }
}

/// Reads a table written by [`sweep_csv`]. Angles are restored from the
/// degree columns, so they carry the six-decimal rounding of the file.
pub fn parse_sweep_csv(text: &str) -> Result<SweepTable> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| parse_err("empty file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let cells = cols.iter().filter(|c| c.starts_with("alpha_")).count();
    if header != sweep_header(cells) {
        return Err(parse_err(format!("unexpected header `{header}`")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols.len() {
            return Err(parse_err(format!(
                "line {}: expected {} fields, got {}",
                i + 2,
                cols.len(),
                f.len()
            )));
        }
        let num = |j: usize| -> Result<f64> {
            f[j].parse::<f64>()
                .map_err(|e| parse_err(format!("line {}, column `{}`: {e}", i + 2, cols[j])))
        };
        let degrees = (0..cells).map(|k| num(4 + k)).collect::<Result<Vec<_>>>()?;
        let t = 4 + cells;
        rows.push(SweepRow {
            v_out_pu: num(0)?,
            method: f[1].parse()?,
            effective_vdc: num(2)?,
            effective_target_pu: num(3)?,
            angles: SwitchingAngles::from_degrees(&degrees)?,
            target_v1: num(t)?,
            achieved_v1: num(t + 1)?,
            achieved_pu: num(t + 2)?,
            thd_spectral_pct: num(t + 3)?,
            thd_total_pct: num(t + 4)?,
            feasible: f[t + 5]
                .parse()
                .map_err(|e| parse_err(format!("line {}, column `feasible`: {e}", i + 2)))?,
            best_cost: num(t + 6)?,
            seed: f[t + 7]
                .parse()
                .map_err(|e| parse_err(format!("line {}, column `seed`: {e}", i + 2)))?,
        });
    }
    Ok(SweepTable { rows })
}
