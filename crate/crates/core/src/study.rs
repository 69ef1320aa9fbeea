//! A loaded scenario: weather and sun positions, the GMPV baseline, and a
//! cache of AV array simulations keyed by geometry.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::crop::{rotation_profit, CropRotation};
use crate::econ::{feasibility, EconParams, FeasibilityResult, SystemPair};
use crate::energy::find_optimal_tilt;
use crate::error::Result;
use crate::optics::{ArrayGeometry, ArrayOptics};
use crate::scenario::{Scenario, TiltChoice, WeatherSource, GMPV_TILT};
use crate::simulate::{simulate_array, ArrayReport, Climate};
use crate::solar::{clearsky_weather_with, load_weather, REPRESENTATIVE_YEAR};

/// Bit-exact identity of an array geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct GeometryKey([u64; 4], u8);

impl GeometryKey {
    fn of(g: &ArrayGeometry) -> Self {
        GeometryKey(
            [
                g.tilt.to_bits(),
                g.pitch_over_height.to_bits(),
                g.clearance_over_height.to_bits(),
                g.albedo.to_bits(),
            ],
            g.orientation as u8,
        )
    }
}

pub struct Study {
    scenario: Scenario,
    hash: String,
    climate: Climate,
    gmpv_tilt: f64,
    gmpv_geometry: ArrayGeometry,
    gmpv: ArrayReport,
    cache: RwLock<HashMap<GeometryKey, Arc<ArrayReport>>>,
}

impl Study {
    pub fn new(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let hash = scenario.hash()?;
        let weather = match &scenario.weather {
            WeatherSource::File { resolved, .. } => load_weather(resolved)?,
            WeatherSource::ClearSky(m) => clearsky_weather_with(&scenario.site, m, REPRESENTATIVE_YEAR),
        };
        let climate = Climate::new(scenario.site, weather);
        let gmpv_tilt = match scenario.gmpv.tilt {
            TiltChoice::Fixed(t) => t,
            TiltChoice::Optimal => find_optimal_tilt(
                &scenario.gmpv_geometry(GMPV_TILT)?,
                &climate.weather,
                &climate.suns,
                &scenario.module,
                scenario.ground_points,
            )?,
        };
        let gmpv_geometry = scenario.gmpv_geometry(gmpv_tilt)?;
        let gmpv = simulate_array(
            &ArrayOptics::new(&gmpv_geometry, scenario.ground_points)?,
            &climate,
            &scenario.module,
            &CropRotation::fallow(),
        )?;
        Ok(Study {
            scenario,
            hash,
            climate,
            gmpv_tilt,
            gmpv_geometry,
            gmpv,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn scenario_hash(&self) -> &str {
        &self.hash
    }

    pub fn climate(&self) -> &Climate {
        &self.climate
    }

    pub fn gmpv_tilt(&self) -> f64 {
        self.gmpv_tilt
    }

    pub fn gmpv_geometry(&self) -> &ArrayGeometry {
        &self.gmpv_geometry
    }

    pub fn gmpv_report(&self) -> &ArrayReport {
        &self.gmpv
    }

    pub fn kappa(&self) -> f64 {
        self.scenario.kappa()
    }

    pub fn av_geometry(&self, ph: f64) -> Result<ArrayGeometry> {
        self.scenario.av_geometry(self.gmpv_tilt, ph)
    }

    /// Energy and crop light of the AV array at `ph`, simulated once per
    /// geometry. Concurrent callers may simulate the same geometry twice; the
    /// first result inserted wins and both are identical.
    pub fn av_report(&self, ph: f64) -> Result<Arc<ArrayReport>> {
        let geom = self.av_geometry(ph)?;
        let key = GeometryKey::of(&geom);
        if let Some(hit) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(Arc::clone(hit));
        }
        let optics = ArrayOptics::new(&geom, self.scenario.ground_points)?;
        let report = Arc::new(simulate_array(
            &optics,
            &self.climate,
            &self.scenario.module,
            &self.scenario.crops,
        )?);
        let mut cache = self.cache.write().expect("cache lock");
        Ok(Arc::clone(cache.entry(key).or_insert(report)))
    }

    /// Number of distinct AV geometries simulated so far.
    pub fn cached_geometries(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }

    pub fn pair(&self, ph: f64) -> Result<SystemPair> {
        let av = self.av_report(ph)?;
        let p_c = rotation_profit(&self.scenario.crops, &av.seasonal)?;
        SystemPair::new(
            ph,
            self.gmpv_geometry.pitch_over_height,
            av.annual_yield.0,
            self.gmpv.annual_yield.0,
            p_c,
            self.scenario.crops.open_profit(),
        )
    }

    pub fn econ_at(&self, m_l: f64) -> EconParams {
        EconParams {
            m_l_pv: m_l,
            ..self.scenario.econ_params()
        }
    }

    pub fn feasibility_at(&self, ph: f64, m_l: f64) -> Result<FeasibilityResult> {
        let pair = self.pair(ph)?;
        let econ = self.econ_at(m_l);
        econ.validate("econ")?;
        Ok(feasibility(&pair, &econ, self.scenario.econ.delta_fit))
    }

    /// Feasibility at the scenario's own p/h and M_L.
    pub fn feasibility(&self) -> Result<FeasibilityResult> {
        self.feasibility_at(self.scenario.av.pitch_over_height, self.scenario.econ.m_l_pv)
    }
}
