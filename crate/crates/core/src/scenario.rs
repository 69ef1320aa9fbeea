//! Scenario files: everything needed to evaluate one AV design against its
//! GMPV baseline.
//!
//! The format is TOML; the full grammar is documented in `docs/scenario.md`.
//! Unknown keys are rejected so that a typo in an economic input cannot be
//! silently replaced by a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::crop::{default_saturation, CropRotation, CropSeason};
use crate::econ::{default_kappa, EconParams};
use crate::energy::ModuleParams;
use crate::error::{Error, Result};
use crate::optics::{ArrayGeometry, Orientation, DEFAULT_ALBEDO, DEFAULT_GROUND_POINTS, MIN_GROUND_POINTS};
use crate::solar::{ClearSkyModel, Site};
use crate::sweep::{axis_range, Metric, SweepSpec};

pub const GMPV_PITCH_OVER_HEIGHT: f64 = 2.0;
pub const GMPV_CLEARANCE: f64 = 0.5;
pub const GMPV_TILT: f64 = 30.0;

/// Default lower-edge clearance of an AV array, in module heights.
pub fn default_av_clearance(orientation: Orientation) -> f64 {
    match orientation {
        Orientation::NsTilted => 2.5,
        Orientation::EwVertical => 0.5,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeatherSource {
    File {
        /// As written in the scenario.
        path: PathBuf,
        /// Resolved against the scenario file's directory.
        #[serde(skip)]
        resolved: PathBuf,
    },
    ClearSky(ClearSkyModel),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TiltChoice {
    Fixed(f64),
    /// Maximise GMPV annual yield.
    Optimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GmpvSpec {
    pub tilt: TiltChoice,
    pub pitch_over_height: f64,
    pub clearance_over_height: f64,
}

/// AV array as specified; orientation-dependent defaults stay unresolved so
/// that the orientation can be switched without re-reading the file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AvSpec {
    pub orientation: Orientation,
    pub pitch_over_height: f64,
    pub clearance_over_height: Option<f64>,
    /// N/S tilted only; `None` means "same tilt as the GMPV baseline".
    pub tilt: Option<f64>,
}

impl AvSpec {
    pub fn clearance(&self) -> f64 {
        self.clearance_over_height
            .unwrap_or_else(|| default_av_clearance(self.orientation))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EconSpec {
    pub c_m_pv: f64,
    pub m_l_pv: f64,
    pub kappa: Option<f64>,
    pub depreciation: f64,
    pub discount: f64,
    pub lifetime_years: u32,
    pub fit_pv: f64,
    /// Tariff premium granted to AV over GMPV, USD/kWh.
    pub delta_fit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: Option<String>,
    pub site: Site,
    pub weather: WeatherSource,
    pub albedo: f64,
    pub ground_points: usize,
    pub module: ModuleParams,
    pub gmpv: GmpvSpec,
    pub av: AvSpec,
    pub econ: EconSpec,
    pub crops: CropRotation,
    pub sweep: SweepSpec,
}

impl Scenario {
    pub fn kappa(&self) -> f64 {
        self.econ.kappa.unwrap_or_else(|| default_kappa(self.av.orientation))
    }

    pub fn econ_params(&self) -> EconParams {
        EconParams {
            c_m_pv: self.econ.c_m_pv,
            m_l_pv: self.econ.m_l_pv,
            kappa: self.kappa(),
            depreciation: self.econ.depreciation,
            discount: self.econ.discount,
            lifetime_years: self.econ.lifetime_years,
            fit_pv: self.econ.fit_pv,
        }
    }

    /// The same scenario with another AV orientation. Orientation-dependent
    /// defaults (κ, clearance) follow the new orientation unless they were
    /// given explicitly.
    pub fn with_orientation(&self, orientation: Orientation) -> Result<Scenario> {
        let mut s = self.clone();
        s.av.orientation = orientation;
        if orientation == Orientation::EwVertical {
            s.av.tilt = None;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn with_rotation(&self, crops: CropRotation) -> Scenario {
        Scenario {
            crops,
            ..self.clone()
        }
    }

    /// AV geometry at a given p/h once the GMPV tilt is known.
    pub fn av_geometry(&self, gmpv_tilt: f64, pitch_over_height: f64) -> Result<ArrayGeometry> {
        let tilt = match self.av.orientation {
            Orientation::EwVertical => 90.0,
            Orientation::NsTilted => self.av.tilt.unwrap_or(gmpv_tilt),
        };
        let g = ArrayGeometry {
            orientation: self.av.orientation,
            tilt,
            pitch_over_height,
            clearance_over_height: self.av.clearance(),
            albedo: self.albedo,
        };
        g.validate("av")?;
        Ok(g)
    }

    pub fn gmpv_geometry(&self, tilt: f64) -> Result<ArrayGeometry> {
        let g = ArrayGeometry {
            orientation: Orientation::NsTilted,
            tilt,
            pitch_over_height: self.gmpv.pitch_over_height,
            clearance_over_height: self.gmpv.clearance_over_height,
            albedo: self.albedo,
        };
        g.validate("gmpv")?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        self.site.validate("site")?;
        if let WeatherSource::ClearSky(m) = &self.weather {
            m.validate("weather.clearsky")?;
        }
        if !(0.0..=1.0).contains(&self.albedo) {
            return Err(Error::invalid("optics.albedo", "must lie in [0, 1]"));
        }
        if self.ground_points < MIN_GROUND_POINTS {
            return Err(Error::invalid(
                "optics.ground_points",
                format!("must be >= {MIN_GROUND_POINTS}, got {}", self.ground_points),
            ));
        }
        self.module.validate("module")?;
        if let TiltChoice::Fixed(t) = self.gmpv.tilt {
            self.gmpv_geometry(t)?;
        } else {
            self.gmpv_geometry(GMPV_TILT)?;
        }
        match (self.av.orientation, self.av.tilt) {
            (Orientation::EwVertical, Some(t)) if t != 90.0 => {
                return Err(Error::invalid("av.tilt", "ew_vertical modules must have tilt 90"))
            }
            _ => {}
        }
        let probe_tilt = self.av.tilt.unwrap_or(match self.gmpv.tilt {
            TiltChoice::Fixed(t) => t,
            TiltChoice::Optimal => GMPV_TILT,
        });
        self.av_geometry(probe_tilt, self.av.pitch_over_height)?;
        self.econ_params().validate("econ")?;
        if !(self.econ.delta_fit.is_finite()) {
            return Err(Error::invalid("econ.delta_fit", "must be finite"));
        }
        self.sweep.validate("sweep")?;
        Ok(())
    }

    /// SHA-256 over the canonical JSON form of the scenario plus the contents
    /// of any weather file, as lowercase hex.
    pub fn hash(&self) -> Result<String> {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(self).expect("scenario serializes"));
        if let WeatherSource::File { resolved, .. } = &self.weather {
            let bytes = std::fs::read(resolved).map_err(|e| Error::io(resolved, e))?;
            h.update(&bytes);
        }
        Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }
}

// ---------------------------------------------------------------------------
// File format

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    rotation: Option<String>,
    site: Option<RawSite>,
    weather: Option<RawWeather>,
    optics: Option<RawOptics>,
    module: Option<ModuleParams>,
    gmpv: Option<RawGmpv>,
    av: Option<RawAv>,
    econ: Option<RawEcon>,
    crops: Option<Vec<RawCrop>>,
    sweep: Option<RawSweep>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSite {
    latitude: f64,
    longitude: f64,
    utc_offset: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeather {
    file: Option<PathBuf>,
    clearsky: Option<toml::Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptics {
    albedo: Option<f64>,
    ground_points: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGmpv {
    tilt: Option<toml::Value>,
    pitch_over_height: Option<f64>,
    clearance_over_height: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAv {
    orientation: Orientation,
    pitch_over_height: f64,
    clearance_over_height: Option<f64>,
    tilt: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEcon {
    c_m_pv: Option<f64>,
    m_l_pv: Option<f64>,
    kappa: Option<f64>,
    depreciation: Option<f64>,
    discount: Option<f64>,
    lifetime_years: Option<u32>,
    fit_pv: Option<f64>,
    delta_fit: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCrop {
    name: String,
    start_month: u32,
    end_month: u32,
    open_profit: f64,
    par_saturation: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRange {
    start: f64,
    stop: f64,
    step: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    ph: Option<Vec<f64>>,
    ph_range: Option<RawRange>,
    ml: Option<Vec<f64>>,
    ml_range: Option<RawRange>,
    metrics: Option<Vec<Metric>>,
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() || prefix == "." {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn backticked(msg: &str) -> Option<&str> {
    let start = msg.find('`')? + 1;
    let len = msg[start..].find('`')?;
    Some(&msg[start..start + len])
}

fn map_de_error(prefix: &str, err: serde_path_to_error::Error<toml::de::Error>) -> Error {
    let path = join(prefix, &err.path().to_string());
    let inner = err.into_inner();
    let msg = inner.message().to_string();
    if msg.starts_with("missing field") {
        if let Some(field) = backticked(&msg) {
            return Error::MissingKey { key: join(&path, field) };
        }
    }
    if msg.starts_with("unknown field") {
        if let Some(field) = backticked(&msg) {
            // the path already ends at the unknown key for some containers
            let key = if path.ends_with(field) { path } else { join(&path, field) };
            return Error::UnknownKey { key };
        }
    }
    Error::invalid(if path.is_empty() { ".".to_string() } else { path }, msg)
}

fn deserialize_value<T: for<'de> Deserialize<'de>>(value: toml::Value, key: &str) -> Result<T> {
    let text = toml::to_string(&toml::Table::from_iter([("v".to_string(), value)]))
        .map_err(|e| Error::Parse(e.to_string()))?;
    #[derive(Deserialize)]
    struct Wrap<T> {
        v: T,
    }
    let w: Wrap<T> = serde_path_to_error::deserialize(toml::Deserializer::new(&text))
        .map_err(|e| {
            let mapped = map_de_error("", e);
            // rewrite the synthetic `v` root onto the real key
            match mapped {
                Error::MissingKey { key: k } => Error::MissingKey { key: rebase(key, &k) },
                Error::UnknownKey { key: k } => Error::UnknownKey { key: rebase(key, &k) },
                Error::Invalid { key: k, reason } => Error::Invalid { key: rebase(key, &k), reason },
                other => other,
            }
        })?;
    Ok(w.v)
}

fn rebase(root: &str, key: &str) -> String {
    match key.strip_prefix('v') {
        Some(rest) => format!("{root}{rest}"),
        None => root.to_string(),
    }
}

fn range_axis(key: &str, r: &RawRange) -> Result<Vec<f64>> {
    axis_range(r.start, r.stop, r.step).map_err(|reason| Error::invalid(key, reason))
}

fn pick_axis(
    section: &str,
    name: &str,
    list: Option<Vec<f64>>,
    range: Option<&RawRange>,
    default: Vec<f64>,
) -> Result<Vec<f64>> {
    match (list, range) {
        (Some(_), Some(_)) => Err(Error::Conflict(format!(
            "`{section}.{name}` and `{section}.{name}_range` are mutually exclusive"
        ))),
        (Some(v), None) => Ok(v),
        (None, Some(r)) => range_axis(&format!("{section}.{name}_range"), r),
        (None, None) => Ok(default),
    }
}

/// Parse and validate scenario text. Relative weather paths resolve against
/// `base_dir`.
pub fn parse_scenario_str(text: &str, base_dir: &Path) -> Result<Scenario> {
    // syntax first, so that structural errors below always carry a key path
    text.parse::<toml::Table>()
        .map_err(|e| Error::Parse(e.to_string()))?;
    let de = toml::Deserializer::new(text);
    let raw: RawScenario = serde_path_to_error::deserialize(de).map_err(|e| map_de_error("", e))?;

    let site = match raw.site {
        Some(s) => Site {
            latitude: s.latitude,
            longitude: s.longitude,
            utc_offset: s.utc_offset,
        },
        None => Site::KHANEWAL,
    };

    let weather = {
        let w = raw.weather.ok_or_else(|| Error::MissingKey { key: "weather".into() })?;
        let clearsky = match w.clearsky {
            None | Some(toml::Value::Boolean(false)) => None,
            Some(toml::Value::Boolean(true)) => Some(ClearSkyModel::default()),
            Some(v @ toml::Value::Table(_)) => Some(deserialize_value(v, "weather.clearsky")?),
            Some(other) => {
                return Err(Error::invalid(
                    "weather.clearsky",
                    format!("expected a boolean or a table, got {}", other.type_str()),
                ))
            }
        };
        match (w.file, clearsky) {
            (Some(_), Some(_)) => {
                return Err(Error::Conflict(
                    "`weather.file` and `weather.clearsky` both given; choose exactly one weather source".into(),
                ))
            }
            (Some(path), None) => WeatherSource::File {
                resolved: base_dir.join(&path),
                path,
            },
            (None, Some(m)) => WeatherSource::ClearSky(m),
            (None, None) => {
                return Err(Error::MissingKey {
                    key: "weather.file or weather.clearsky".into(),
                })
            }
        }
    };

    let optics = raw.optics.unwrap_or(RawOptics {
        albedo: None,
        ground_points: None,
    });

    let gmpv = {
        let g = raw.gmpv.unwrap_or(RawGmpv {
            tilt: None,
            pitch_over_height: None,
            clearance_over_height: None,
        });
        let tilt = match g.tilt {
            None => TiltChoice::Fixed(GMPV_TILT),
            Some(toml::Value::Float(t)) => TiltChoice::Fixed(t),
            Some(toml::Value::Integer(t)) => TiltChoice::Fixed(t as f64),
            Some(toml::Value::String(s)) if s == "optimal" => TiltChoice::Optimal,
            Some(other) => {
                return Err(Error::invalid(
                    "gmpv.tilt",
                    format!("expected degrees or \"optimal\", got {other}"),
                ))
            }
        };
        GmpvSpec {
            tilt,
            pitch_over_height: g.pitch_over_height.unwrap_or(GMPV_PITCH_OVER_HEIGHT),
            clearance_over_height: g.clearance_over_height.unwrap_or(GMPV_CLEARANCE),
        }
    };

    let av = {
        let a = raw.av.ok_or_else(|| Error::MissingKey { key: "av".into() })?;
        AvSpec {
            orientation: a.orientation,
            pitch_over_height: a.pitch_over_height,
            clearance_over_height: a.clearance_over_height,
            tilt: a.tilt,
        }
    };

    let econ = {
        let d = EconParams::with_defaults(1.0);
        let e = raw.econ.unwrap_or(RawEcon {
            c_m_pv: None,
            m_l_pv: None,
            kappa: None,
            depreciation: None,
            discount: None,
            lifetime_years: None,
            fit_pv: None,
            delta_fit: None,
        });
        EconSpec {
            c_m_pv: e.c_m_pv.unwrap_or(d.c_m_pv),
            m_l_pv: e.m_l_pv.unwrap_or(d.m_l_pv),
            kappa: e.kappa,
            depreciation: e.depreciation.unwrap_or(d.depreciation),
            discount: e.discount.unwrap_or(d.discount),
            lifetime_years: e.lifetime_years.unwrap_or(d.lifetime_years),
            fit_pv: e.fit_pv.unwrap_or(d.fit_pv),
            delta_fit: e.delta_fit.unwrap_or(0.0),
        }
    };

    let crops = match (raw.rotation, raw.crops) {
        (Some(_), Some(_)) => {
            return Err(Error::Conflict(
                "`rotation` and `[[crops]]` both given; choose exactly one".into(),
            ))
        }
        (Some(name), None) => CropRotation::preset(&name).ok_or_else(|| {
            Error::invalid(
                "rotation",
                format!("unknown preset `{name}` (expected high_value, low_value or fallow)"),
            )
        })?,
        (None, Some(list)) => {
            let mut seasons = Vec::with_capacity(list.len());
            for (i, c) in list.into_iter().enumerate() {
                let key = format!("crops[{i}]");
                let sat = match c.par_saturation {
                    Some(s) => s,
                    None => default_saturation(&c.name).ok_or_else(|| Error::MissingKey {
                        key: format!("{key}.par_saturation"),
                    })?,
                };
                let season = CropSeason {
                    name: c.name,
                    start_month: c.start_month,
                    end_month: c.end_month,
                    open_profit: c.open_profit,
                    par_saturation: sat,
                };
                season.validate(&key)?;
                seasons.push(season);
            }
            CropRotation::validated(seasons, "crops")?
        }
        (None, None) => {
            return Err(Error::MissingKey {
                key: "rotation or [[crops]]".into(),
            })
        }
    };

    let sweep = {
        let d = SweepSpec::default();
        match raw.sweep {
            None => d,
            Some(s) => SweepSpec {
                ph_axis: pick_axis("sweep", "ph", s.ph, s.ph_range.as_ref(), d.ph_axis)?,
                ml_axis: pick_axis("sweep", "ml", s.ml, s.ml_range.as_ref(), d.ml_axis)?,
                metrics: s.metrics.unwrap_or(d.metrics),
            },
        }
    };

    let scenario = Scenario {
        name: raw.name,
        site,
        weather,
        albedo: optics.albedo.unwrap_or(DEFAULT_ALBEDO),
        ground_points: optics.ground_points.unwrap_or(DEFAULT_GROUND_POINTS),
        module: raw.module.unwrap_or_default(),
        gmpv,
        av,
        econ,
        crops,
        sweep,
    };
    scenario.validate()?;
    Ok(scenario)
}

pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_scenario_str(&text, base).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}
