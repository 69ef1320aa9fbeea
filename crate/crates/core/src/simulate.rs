//! One pass over the weather year producing both module energy and crop light
//! for an array.

use chrono::Datelike;

use crate::crop::{CropRotation, CropSeason, SeasonLight, SeasonalYield};
use crate::energy::{AnnualYield, ModuleParams};
use crate::error::Result;
use crate::optics::{open_field_irradiance, project_sun, ArrayGeometry, ArrayOptics};
use crate::solar::{Site, SunPosition, WeatherSeries};

/// Weather with its sun positions, shared by every array evaluated at a site.
#[derive(Debug, Clone)]
pub struct Climate {
    pub site: Site,
    pub weather: WeatherSeries,
    pub suns: Vec<SunPosition>,
}

impl Climate {
    pub fn new(site: Site, weather: WeatherSeries) -> Self {
        let suns = weather.sun_positions(&site);
        Climate {
            site,
            weather,
            suns,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayReport {
    /// Front + bifaciality·back irradiation, kWh/m² module per year.
    pub irradiation: f64,
    pub annual_yield: AnnualYield,
    /// One entry per season of the rotation, in rotation order.
    pub seasonal: Vec<SeasonalYield>,
}

pub fn simulate_array(
    optics: &ArrayOptics,
    climate: &Climate,
    mp: &ModuleParams,
    rotation: &CropRotation,
) -> Result<ArrayReport> {
    let mut seasons: Vec<SeasonLight> = rotation.seasons().iter().map(SeasonLight::new).collect();
    let irradiation = accumulate(optics, climate, mp.bifaciality, &mut seasons);
    let seasonal = seasons
        .iter()
        .zip(rotation.seasons())
        .map(|(acc, s)| acc.finish(&s.name))
        .collect::<Result<Vec<_>>>()?;
    Ok(ArrayReport {
        irradiation,
        annual_yield: AnnualYield(mp.performance_ratio * mp.efficiency * irradiation),
        seasonal,
    })
}

fn accumulate(
    optics: &ArrayOptics,
    climate: &Climate,
    bifaciality: f64,
    seasons: &mut [SeasonLight],
) -> f64 {
    let orientation = optics.geometry().orientation;
    let mut wh = 0.0;
    for (sample, sun) in climate.weather.samples().iter().zip(&climate.suns) {
        if sample.dni == 0.0 && sample.dhi == 0.0 {
            continue;
        }
        let ps = project_sun(*sun, orientation);
        let ground = optics.ground_profile(&ps, sample.dni, sample.dhi);
        let m = optics.module_irradiance(&ps, sample.dni, sample.dhi, &ground);
        wh += m.front + bifaciality * m.back;

        let month = sample.timestamp.month();
        let open = open_field_irradiance(&ps, sample.dni, sample.dhi);
        for acc in seasons.iter_mut().filter(|a| a.covers(month)) {
            acc.add_hour(&ground, open);
        }
    }
    wh / 1000.0
}

/// Relative useful PAR for one season under an array.
pub fn seasonal_y_par(
    geom: &ArrayGeometry,
    climate: &Climate,
    season: &CropSeason,
    n_points: usize,
) -> Result<SeasonalYield> {
    let optics = ArrayOptics::new(geom, n_points)?;
    let mut acc = [SeasonLight::new(season)];
    accumulate(&optics, climate, 0.0, &mut acc);
    acc[0].finish(&season.name)
}
