//! Relative crop yield from useful (light-saturation clipped) PAR, and crop
//! rotation profit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::GroundLightProfile;

/// Fraction of broadband shortwave irradiance that is photosynthetically active.
pub const PAR_FRACTION: f64 = 0.45;
/// µmol of PAR photons per joule.
pub const PHOTONS_PER_JOULE: f64 = 4.57;

pub fn par_from_irradiance(ghi_w_m2: f64) -> f64 {
    ghi_w_m2 * PAR_FRACTION * PHOTONS_PER_JOULE
}

/// Daily useful PAR in mol·m⁻²·day⁻¹ from hourly PAR values in µmol·m⁻²·s⁻¹.
pub fn daily_useful_par(par_series: &[f64], saturation: f64) -> f64 {
    par_series
        .iter()
        .map(|&par| par.min(saturation) * 3600.0)
        .sum::<f64>()
        / 1e6
}

/// Default light-saturation point for a crop name, µmol·m⁻²·s⁻¹.
pub fn default_saturation(crop: &str) -> Option<f64> {
    match crop.to_ascii_lowercase().as_str() {
        "tomato" => Some(1400.0),
        "cauliflower" => Some(900.0),
        "garlic" => Some(800.0),
        "wheat" => Some(1200.0),
        "cotton" => Some(1600.0),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropSeason {
    pub name: String,
    pub start_month: u32,
    pub end_month: u32,
    /// USD per hectare per season, open field.
    pub open_profit: f64,
    /// µmol·m⁻²·s⁻¹.
    pub par_saturation: f64,
}

impl CropSeason {
    pub fn new(
        name: &str,
        start_month: u32,
        end_month: u32,
        open_profit: f64,
        par_saturation: f64,
    ) -> Result<Self> {
        let s = CropSeason {
            name: name.to_string(),
            start_month,
            end_month,
            open_profit,
            par_saturation,
        };
        s.validate("crop")?;
        Ok(s)
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        for (field, m) in [("start_month", self.start_month), ("end_month", self.end_month)] {
            if !(1..=12).contains(&m) {
                return Err(Error::invalid(
                    format!("{key}.{field}"),
                    format!("month must lie in 1..=12, got {m}"),
                ));
            }
        }
        if !(self.open_profit >= 0.0 && self.open_profit.is_finite()) {
            return Err(Error::invalid(
                format!("{key}.open_profit"),
                "must be finite and >= 0",
            ));
        }
        if !(self.par_saturation > 0.0) {
            return Err(Error::invalid(format!("{key}.par_saturation"), "must be > 0"));
        }
        Ok(())
    }

    /// Months covered, wrapping across the new year (e.g. Oct–Mar).
    pub fn contains_month(&self, month: u32) -> bool {
        if self.start_month <= self.end_month {
            (self.start_month..=self.end_month).contains(&month)
        } else {
            month >= self.start_month || month <= self.end_month
        }
    }

    pub fn months(&self) -> Vec<u32> {
        (1..=12).filter(|&m| self.contains_month(m)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropRotation {
    seasons: Vec<CropSeason>,
}

impl CropRotation {
    pub fn new(seasons: Vec<CropSeason>) -> Result<Self> {
        Self::validated(seasons, "crops")
    }

    pub fn validated(seasons: Vec<CropSeason>, key: &str) -> Result<Self> {
        let mut owner: [Option<usize>; 13] = [None; 13];
        for (i, s) in seasons.iter().enumerate() {
            s.validate(&format!("{key}[{i}]"))?;
            for m in s.months() {
                if let Some(j) = owner[m as usize] {
                    return Err(Error::invalid(
                        format!("{key}[{i}]"),
                        format!("month {m} already belongs to season {j} ({})", seasons[j].name),
                    ));
                }
                owner[m as usize] = Some(i);
            }
        }
        Ok(CropRotation { seasons })
    }

    pub fn seasons(&self) -> &[CropSeason] {
        &self.seasons
    }

    /// Open-field profit per hectare per year.
    pub fn open_profit(&self) -> f64 {
        self.seasons.iter().map(|s| s.open_profit).sum()
    }

    /// No crops at all: the land under the array is left fallow.
    pub fn fallow() -> Self {
        CropRotation { seasons: Vec::new() }
    }

    /// Named rotation: `high_value`, `low_value` or `fallow`.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "high_value" => Some(Self::high_value()),
            "low_value" => Some(Self::low_value()),
            "fallow" => Some(Self::fallow()),
            _ => None,
        }
    }

    /// Tomato (Apr–Jun), cauliflower (Jul–Sep), garlic (Oct–Mar), Khanewal.
    pub fn high_value() -> Self {
        CropRotation {
            seasons: vec![
                season("Tomato", 4, 6, 948.81),
                season("Cauliflower", 7, 9, 1145.98),
                season("Garlic", 10, 3, 7097.54),
            ],
        }
    }

    /// Cotton (Apr–Sep), wheat (Oct–Mar), Khanewal.
    pub fn low_value() -> Self {
        CropRotation {
            seasons: vec![season("Cotton", 4, 9, 69.88), season("Wheat", 10, 3, 228.43)],
        }
    }
}

fn season(name: &str, start: u32, end: u32, profit: f64) -> CropSeason {
    CropSeason {
        name: name.to_string(),
        start_month: start,
        end_month: end,
        open_profit: profit,
        par_saturation: default_saturation(name).expect("known crop"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeasonalYield {
    pub y_par: f64,
}

pub fn rotation_profit(rotation: &CropRotation, yields: &[SeasonalYield]) -> Result<f64> {
    if yields.len() != rotation.seasons.len() {
        return Err(Error::invalid(
            "yields",
            format!(
                "expected {} seasonal yields, got {}",
                rotation.seasons.len(),
                yields.len()
            ),
        ));
    }
    Ok(rotation
        .seasons
        .iter()
        .zip(yields)
        .map(|(s, y)| y.y_par * s.open_profit)
        .sum())
}

/// Running totals of useful PAR for one season, fed hour by hour.
///
/// Y_PAR is a ratio of means over the same set of days, so the daily sums need
/// not be kept: hour-level clipped sums give the same numerator and
/// denominator.
#[derive(Debug, Clone)]
pub struct SeasonLight {
    saturation: f64,
    months: [bool; 13],
    av_sum: f64,
    open_sum: f64,
}

impl SeasonLight {
    pub fn new(season: &CropSeason) -> Self {
        let mut months = [false; 13];
        for m in season.months() {
            months[m as usize] = true;
        }
        SeasonLight {
            saturation: season.par_saturation,
            months,
            av_sum: 0.0,
            open_sum: 0.0,
        }
    }

    pub fn covers(&self, month: u32) -> bool {
        self.months[month as usize]
    }

    /// Add one hour. `profile` is the ground light under the array; `open_ghi`
    /// the open-field horizontal irradiance for the same hour.
    pub fn add_hour(&mut self, profile: &GroundLightProfile, open_ghi: f64) {
        let sat = self.saturation;
        let n = profile.len() as f64;
        let av: f64 = (0..profile.len())
            .map(|j| par_from_irradiance(profile.global(j)).min(sat))
            .sum();
        self.av_sum += av / n * 3600.0 / 1e6;
        self.open_sum += par_from_irradiance(open_ghi).min(sat) * 3600.0 / 1e6;
    }

    pub fn finish(&self, name: &str) -> Result<SeasonalYield> {
        if !(self.open_sum > 0.0) {
            return Err(Error::Degenerate(format!(
                "season `{name}` receives no useful PAR in the open field"
            )));
        }
        Ok(SeasonalYield {
            y_par: (self.av_sum / self.open_sum).clamp(0.0, 1.0),
        })
    }
}
