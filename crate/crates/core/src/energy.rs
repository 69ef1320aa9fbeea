//! Annual electrical yield per unit module area and the AV/GMPV yield ratio.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{project_sun, ArrayGeometry, ArrayOptics, Orientation};
use crate::solar::{SunPosition, WeatherSeries};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModuleParams {
    pub efficiency: f64,
    pub bifaciality: f64,
    pub performance_ratio: f64,
}

impl Default for ModuleParams {
    fn default() -> Self {
        ModuleParams {
            efficiency: 0.20,
            bifaciality: 0.9,
            performance_ratio: 0.80,
        }
    }
}

impl ModuleParams {
    pub fn validate(&self, key: &str) -> Result<()> {
        for (name, v) in [
            ("efficiency", self.efficiency),
            ("bifaciality", self.bifaciality),
            ("performance_ratio", self.performance_ratio),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::invalid(
                    format!("{key}.{name}"),
                    format!("must lie in (0, 1], got {v}"),
                ));
            }
        }
        Ok(())
    }
}

/// kWh per m² of module per year.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct AnnualYield(pub f64);

/// Sum of `front + bifaciality·back` plane-of-array irradiation over the year,
/// in kWh/m², before electrical conversion.
pub fn annual_irradiation(
    optics: &ArrayOptics,
    weather: &WeatherSeries,
    suns: &[SunPosition],
    bifaciality: f64,
) -> f64 {
    let orientation = optics.geometry().orientation;
    let mut wh = 0.0;
    for (sample, sun) in weather.samples().iter().zip(suns) {
        if sample.dni == 0.0 && sample.dhi == 0.0 {
            continue;
        }
        let ps = project_sun(*sun, orientation);
        let ground = optics.ground_profile(&ps, sample.dni, sample.dhi);
        let m = optics.module_irradiance(&ps, sample.dni, sample.dhi, &ground);
        wh += m.front + bifaciality * m.back;
    }
    wh / 1000.0
}

/// Annual yield from precomputed optics and sun positions.
pub fn annual_yield_with(
    optics: &ArrayOptics,
    weather: &WeatherSeries,
    suns: &[SunPosition],
    mp: &ModuleParams,
) -> AnnualYield {
    let irradiation = annual_irradiation(optics, weather, suns, mp.bifaciality);
    AnnualYield(mp.performance_ratio * mp.efficiency * irradiation)
}

pub fn annual_yield(
    geom: &ArrayGeometry,
    weather: &WeatherSeries,
    suns: &[SunPosition],
    mp: &ModuleParams,
    n_points: usize,
) -> Result<AnnualYield> {
    let optics = ArrayOptics::new(geom, n_points)?;
    Ok(annual_yield_with(&optics, weather, suns, mp))
}

pub fn y_pv_ratio(av: AnnualYield, gmpv: AnnualYield) -> Result<f64> {
    if !(gmpv.0 > 0.0) {
        return Err(Error::Degenerate(format!(
            "GMPV annual yield must be positive, got {}",
            gmpv.0
        )));
    }
    Ok(av.0 / gmpv.0)
}

/// Flat modules are outside the geometry domain; the search floor equals its
/// tolerance so a near-flat optimum still yields a valid array.
pub const TILT_SEARCH_MIN: f64 = 0.5;
pub const TILT_SEARCH_MAX: f64 = 60.0;
const TILT_TOLERANCE: f64 = 0.5;

/// Tilt in [0.5°, 60°] maximising annual yield of an N/S tilted array.
///
/// Golden-section search; if the objective turns out not to be unimodal on the
/// bracket (an interior 1° grid sample beats the golden-section result), the
/// grid argmax is returned instead.
pub fn find_optimal_tilt(
    template: &ArrayGeometry,
    weather: &WeatherSeries,
    suns: &[SunPosition],
    mp: &ModuleParams,
    n_points: usize,
) -> Result<f64> {
    let objective = |tilt: f64| -> Result<f64> {
        let geom = ArrayGeometry {
            orientation: Orientation::NsTilted,
            tilt,
            ..*template
        };
        let optics = ArrayOptics::new(&geom, n_points)?;
        Ok(annual_yield_with(&optics, weather, suns, mp).0)
    };

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (TILT_SEARCH_MIN, TILT_SEARCH_MAX);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (objective(c)?, objective(d)?);
    while b - a > TILT_TOLERANCE {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d)?;
        }
    }
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    for end in [TILT_SEARCH_MIN, TILT_SEARCH_MAX] {
        let f = objective(end)?;
        if f > best.1 {
            best = (end, f);
        }
    }

    // Unimodality check on a coarse grid; fall back to a 1° scan if violated.
    let coarse: Vec<f64> = (0..=12).map(|i| (i as f64 * 5.0).max(TILT_SEARCH_MIN)).collect();
    let mut coarse_best = (0.0, f64::NEG_INFINITY);
    for &t in &coarse {
        let f = objective(t)?;
        if f > coarse_best.1 {
            coarse_best = (t, f);
        }
    }
    if coarse_best.1 > best.1 * (1.0 + 1e-3) {
        let mut grid_best = coarse_best;
        for i in 0..=60 {
            let t = (i as f64).max(TILT_SEARCH_MIN);
            let f = objective(t)?;
            if f > grid_best.1 {
                grid_best = (t, f);
            }
        }
        best = grid_best;
    }
    Ok(best.0)
}
