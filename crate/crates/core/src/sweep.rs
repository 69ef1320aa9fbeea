//! Design-space sweeps over (p/h × M_L), grid files, feasibility boundaries and
//! tariff-threshold tables.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::econ::FeasibilityResult;
use crate::error::{Error, Result};
use crate::optics::Orientation;
use crate::study::Study;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Rho,
    DeltaFitTh,
    Psi,
    YPar,
    YPv,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Rho,
        Metric::DeltaFitTh,
        Metric::Psi,
        Metric::YPar,
        Metric::YPv,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Rho => "rho",
            Metric::DeltaFitTh => "delta_fit_th",
            Metric::Psi => "psi",
            Metric::YPar => "y_par",
            Metric::YPv => "y_pv",
        }
    }

    /// The metric's value in a feasibility result; NaN when undefined (ψ
    /// without open-field profit).
    pub fn value(self, r: &FeasibilityResult) -> f64 {
        match self {
            Metric::Rho => r.rho,
            Metric::DeltaFitTh => r.delta_fit_th,
            Metric::Psi => r.psi.unwrap_or(f64::NAN),
            Metric::YPar => r.y_par,
            Metric::YPv => r.y_pv,
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid("metric", format!("unknown metric `{s}`")))
    }
}

/// Evenly spaced axis `start, start+step, …, stop`; `stop` must be reached
/// (to within rounding) by a whole number of steps.
pub fn axis_range(start: f64, stop: f64, step: f64) -> std::result::Result<Vec<f64>, String> {
    if !(step > 0.0 && step.is_finite() && start.is_finite() && stop.is_finite()) {
        return Err("step must be finite and > 0".into());
    }
    if stop < start {
        return Err("stop must not be below start".into());
    }
    let n = ((stop - start) / step).round();
    if ((start + n * step) - stop).abs() > 1e-9 * stop.abs().max(1.0) {
        return Err(format!("({stop} - {start}) is not a whole multiple of {step}"));
    }
    Ok((0..=n as usize).map(|i| start + i as f64 * step).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub ph_axis: Vec<f64>,
    pub ml_axis: Vec<f64>,
    pub metrics: Vec<Metric>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            ph_axis: axis_range(2.0, 6.0, 0.25).expect("valid default axis"),
            ml_axis: axis_range(5.0, 50.0, 2.5).expect("valid default axis"),
            metrics: Metric::ALL.to_vec(),
        }
    }
}

fn check_axis(key: &str, axis: &[f64], min: f64) -> Result<()> {
    if axis.is_empty() {
        return Err(Error::invalid(key, "axis is empty"));
    }
    if axis.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(key, "axis must be strictly increasing"));
    }
    if axis.iter().any(|v| !(v.is_finite() && *v >= min)) {
        return Err(Error::invalid(key, format!("values must be finite and >= {min}")));
    }
    Ok(())
}

impl SweepSpec {
    pub fn validate(&self, key: &str) -> Result<()> {
        check_axis(&format!("{key}.ph"), &self.ph_axis, 1.0)?;
        check_axis(&format!("{key}.ml"), &self.ml_axis, f64::MIN_POSITIVE)?;
        if self.metrics.is_empty() {
            return Err(Error::invalid(format!("{key}.metrics"), "at least one metric is required"));
        }
        Ok(())
    }
}

/// One metric over the (p/h × M_L) plane. `values[i][j]` belongs to
/// `ph_axis[i]` and `ml_axis[j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub metric: Metric,
    pub ph_axis: Vec<f64>,
    pub ml_axis: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub scenario_hash: String,
    pub kappa: f64,
    pub orientation: Orientation,
}

impl SweepGrid {
    pub fn get(&self, ph: f64, ml: f64) -> Option<f64> {
        let i = self.ph_axis.iter().position(|&v| v == ph)?;
        let j = self.ml_axis.iter().position(|&v| v == ml)?;
        Some(self.values[i][j])
    }

    /// Comma-separated table: `#` metadata lines, then the M_L axis as the
    /// first row and p/h as the first column. Numbers use the shortest
    /// representation that parses back to the same value.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# scenario_hash: {}", self.scenario_hash);
        let _ = writeln!(out, "# metric: {}", self.metric);
        let _ = writeln!(out, "# kappa: {}", self.kappa);
        let _ = writeln!(out, "# orientation: {}", self.orientation);
        out.push_str("ph\\ml");
        for ml in &self.ml_axis {
            let _ = write!(out, ",{ml}");
        }
        out.push('\n');
        for (ph, row) in self.ph_axis.iter().zip(&self.values) {
            let _ = write!(out, "{ph}");
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let grid_err = |line: usize, msg: &str| Error::Grid(format!("line {line}: {msg}"));
        let num = |line: usize, s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| grid_err(line, &format!("`{s}` is not a number")))
        };
        let (mut hash, mut metric, mut kappa, mut orientation) = (None, None, None, None);
        let mut ml_axis: Option<Vec<f64>> = None;
        let (mut ph_axis, mut values) = (Vec::new(), Vec::new());
        for (idx, line) in text.lines().enumerate() {
            let n = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                let (k, v) = meta
                    .split_once(':')
                    .ok_or_else(|| grid_err(n, "metadata line needs `key: value`"))?;
                let v = v.trim();
                match k.trim() {
                    "scenario_hash" => hash = Some(v.to_string()),
                    "metric" => metric = Some(v.parse::<Metric>()?),
                    "kappa" => kappa = Some(num(n, v)?),
                    "orientation" => {
                        orientation = Some(match v {
                            "ns_tilted" => Orientation::NsTilted,
                            "ew_vertical" => Orientation::EwVertical,
                            _ => return Err(grid_err(n, &format!("unknown orientation `{v}`"))),
                        })
                    }
                    other => return Err(grid_err(n, &format!("unknown metadata key `{other}`"))),
                }
                continue;
            }
            let mut cells = line.split(',');
            let head = cells.next().unwrap_or_default();
            match &ml_axis {
                None => {
                    if head.trim() != "ph\\ml" {
                        return Err(grid_err(n, "header row must start with `ph\\ml`"));
                    }
                    ml_axis = Some(cells.map(|c| num(n, c)).collect::<Result<_>>()?);
                }
                Some(axis) => {
                    ph_axis.push(num(n, head)?);
                    let row: Vec<f64> = cells.map(|c| num(n, c)).collect::<Result<_>>()?;
                    if row.len() != axis.len() {
                        return Err(grid_err(
                            n,
                            &format!("expected {} values, found {}", axis.len(), row.len()),
                        ));
                    }
                    values.push(row);
                }
            }
        }
        let missing = |what: &str| Error::Grid(format!("missing {what}"));
        Ok(SweepGrid {
            metric: metric.ok_or_else(|| missing("`# metric`"))?,
            ph_axis,
            ml_axis: ml_axis.ok_or_else(|| missing("header row"))?,
            values,
            scenario_hash: hash.ok_or_else(|| missing("`# scenario_hash`"))?,
            kappa: kappa.ok_or_else(|| missing("`# kappa`"))?,
            orientation: orientation.ok_or_else(|| missing("`# orientation`"))?,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

fn at_cell(ph: f64, ml: f64) -> impl Fn(Error) -> Error {
    move |e| Error::AtCell {
        ph,
        ml,
        source: Box::new(e),
    }
}

/// Evaluate every requested metric on the (p/h × M_L) grid.
///
/// Array simulations run once per p/h (in parallel across p/h values); the
/// economics are evaluated per cell. Results are assembled in axis order, so
/// the output does not depend on scheduling.
pub fn run_sweep(study: &Study, spec: &SweepSpec) -> Result<Vec<SweepGrid>> {
    spec.validate("sweep")?;
    let rows: Vec<Vec<FeasibilityResult>> = spec
        .ph_axis
        .par_iter()
        .map(|&ph| {
            study.av_report(ph).map_err(at_cell(ph, spec.ml_axis[0]))?;
            spec.ml_axis
                .iter()
                .map(|&ml| study.feasibility_at(ph, ml).map_err(at_cell(ph, ml)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    spec.metrics
        .iter()
        .map(|&metric| {
            let mut values = Vec::with_capacity(rows.len());
            for (&ph, row) in spec.ph_axis.iter().zip(&rows) {
                let mut out = Vec::with_capacity(row.len());
                for (&ml, r) in spec.ml_axis.iter().zip(row) {
                    let v = metric.value(r);
                    if !v.is_finite() {
                        return Err(at_cell(ph, ml)(Error::Degenerate(format!(
                            "{metric} is undefined (crop rotation has no open-field profit)"
                        ))));
                    }
                    out.push(v);
                }
                values.push(out);
            }
            Ok(SweepGrid {
                metric,
                ph_axis: spec.ph_axis.clone(),
                ml_axis: spec.ml_axis.clone(),
                values,
                scenario_hash: study.scenario_hash().to_string(),
                kappa: study.kappa(),
                orientation: study.scenario().av.orientation,
            })
        })
        .collect()
}

/// Smallest M_L on a column reaching ρ ≥ κ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryPoint {
    pub ph: f64,
    /// `None` when no M_L on the axis reaches κ.
    pub ml: Option<f64>,
    /// ρ re-evaluated at `ml`.
    pub rho: Option<f64>,
}

/// Target accuracy of the refined boundary, in ρ.
pub const BOUNDARY_RHO_TOLERANCE: f64 = 1e-3;

/// Per-p/h minimal M_L with ρ ≥ κ, from a ρ grid. The crossing is bracketed
/// on the grid, seeded by linear interpolation and refined by bisection on
/// the exact model.
pub fn feasibility_boundary(study: &Study, grid: &SweepGrid) -> Result<Vec<BoundaryPoint>> {
    if grid.metric != Metric::Rho {
        return Err(Error::Grid(format!(
            "feasibility boundary needs a rho grid, got {}",
            grid.metric
        )));
    }
    let kappa = grid.kappa;
    let rho_at = |ph: f64, ml: f64| -> Result<f64> {
        let pair = study.pair(ph).map_err(at_cell(ph, ml))?;
        let mut econ = study.econ_at(ml);
        econ.kappa = kappa;
        Ok(crate::econ::rho(&pair, &econ))
    };
    grid.ph_axis
        .iter()
        .zip(&grid.values)
        .map(|(&ph, row)| {
            let Some(j) = row.iter().position(|&r| r >= kappa) else {
                return Ok(BoundaryPoint { ph, ml: None, rho: None });
            };
            if j == 0 {
                return Ok(BoundaryPoint {
                    ph,
                    ml: Some(grid.ml_axis[0]),
                    rho: Some(row[0]),
                });
            }
            let (mut lo, mut hi) = (grid.ml_axis[j - 1], grid.ml_axis[j]);
            let (r_lo, r_hi) = (row[j - 1], row[j]);
            let mut x = lo + (kappa - r_lo) / (r_hi - r_lo) * (hi - lo);
            let mut r = rho_at(ph, x)?;
            for _ in 0..200 {
                if r >= kappa && r - kappa <= BOUNDARY_RHO_TOLERANCE * 1e-2 {
                    break;
                }
                if r >= kappa {
                    hi = x;
                } else {
                    lo = x;
                }
                if hi - lo <= f64::EPSILON * hi {
                    break;
                }
                x = 0.5 * (lo + hi);
                r = rho_at(ph, x)?;
            }
            if r < kappa {
                x = hi;
                r = rho_at(ph, x)?;
            }
            Ok(BoundaryPoint {
                ph,
                ml: Some(x),
                rho: Some(r),
            })
        })
        .collect()
}

/// ΔFIT_th as a percentage of the base tariff, one entry per (M_L, p/h),
/// ordered by M_L then p/h.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitTableEntry {
    pub ml: f64,
    pub ph: f64,
    pub delta_fit_th: f64,
    pub percent: f64,
}

pub fn min_fit_table(study: &Study, ph_list: &[f64], ml_list: &[f64]) -> Result<Vec<FitTableEntry>> {
    let mut out = Vec::with_capacity(ph_list.len() * ml_list.len());
    for &ml in ml_list {
        for &ph in ph_list {
            let r = study.feasibility_at(ph, ml).map_err(at_cell(ph, ml))?;
            out.push(FitTableEntry {
                ml,
                ph,
                delta_fit_th: r.delta_fit_th,
                percent: r.delta_fit_th_percent,
            });
        }
    }
    Ok(out)
}
