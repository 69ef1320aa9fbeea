//! Sun position, hourly weather ingestion and the clear-sky fallback series.
//!
//! Angles at the public surface are in degrees. Azimuth is measured clockwise
//! from North. Timestamps are local standard time (no daylight saving).
//!
//! A weather sample stamped `HH:00` stands for the hour `[HH:00, HH+1:00)`;
//! the sun is evaluated at the middle of that hour.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HOURS_PER_YEAR: usize = 8760;
pub const WEATHER_HEADER: &str = "timestamp,dni_w_m2,dhi_w_m2";
const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M";

/// Minutes added to a sample timestamp to get the instant the sun is evaluated at.
pub const SUN_SAMPLE_OFFSET_MINUTES: i64 = 30;

/// Non-leap year used for synthetic series.
pub const REPRESENTATIVE_YEAR: i32 = 2023;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub latitude: f64,
    pub longitude: f64,
    pub utc_offset: f64,
}

impl Site {
    /// Khanewal, Punjab (UTC+5).
    pub const KHANEWAL: Site = Site {
        latitude: 30.2864,
        longitude: 71.9320,
        utc_offset: 5.0,
    };

    pub fn new(latitude: f64, longitude: f64, utc_offset: f64) -> Result<Self> {
        let site = Site {
            latitude,
            longitude,
            utc_offset,
        };
        site.validate("site")?;
        Ok(site)
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.latitude) {
            return Err(Error::invalid(
                format!("{key}.latitude"),
                "must lie in [-90, 90]",
            ));
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return Err(Error::invalid(
                format!("{key}.longitude"),
                "must lie in [-180, 180]",
            ));
        }
        if !(-14.0..=14.0).contains(&self.utc_offset) {
            return Err(Error::invalid(
                format!("{key}.utc_offset"),
                "must lie in [-14, 14] hours",
            ));
        }
        Ok(())
    }
}

impl Default for Site {
    fn default() -> Self {
        Site::KHANEWAL
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SunPosition {
    /// Degrees above the horizon.
    pub elevation: f64,
    /// Degrees clockwise from North, in [0, 360).
    pub azimuth: f64,
}

impl SunPosition {
    pub fn is_up(&self) -> bool {
        self.elevation > 0.0
    }

    /// Unit vector towards the sun as (east, north, up).
    pub fn direction(&self) -> [f64; 3] {
        let (se, ce) = self.elevation.to_radians().sin_cos();
        let (sa, ca) = self.azimuth.to_radians().sin_cos();
        [ce * sa, ce * ca, se]
    }
}

/// Fractional-year angle used by the declination and equation-of-time series.
fn fractional_year(day_of_year: u32, hour: f64) -> f64 {
    2.0 * PI / 365.0 * (day_of_year as f64 - 1.0 + (hour - 12.0) / 24.0)
}

/// Solar declination in radians (Spencer series).
pub fn declination(day_of_year: u32, hour: f64) -> f64 {
    let g = fractional_year(day_of_year, hour);
    0.006918 - 0.399912 * g.cos() + 0.070257 * g.sin() - 0.006758 * (2.0 * g).cos()
        + 0.000907 * (2.0 * g).sin()
        - 0.002697 * (3.0 * g).cos()
        + 0.00148 * (3.0 * g).sin()
}

/// Equation of time in minutes.
pub fn equation_of_time(day_of_year: u32, hour: f64) -> f64 {
    let g = fractional_year(day_of_year, hour);
    229.18
        * (0.000075 + 0.001868 * g.cos()
            - 0.032077 * g.sin()
            - 0.014615 * (2.0 * g).cos()
            - 0.040849 * (2.0 * g).sin())
}

/// Hour angle in degrees (negative before solar noon).
pub fn hour_angle(site: &Site, timestamp: NaiveDateTime) -> f64 {
    let hour = fractional_hour(timestamp);
    let eot = equation_of_time(timestamp.ordinal(), hour);
    let true_solar_minutes = hour * 60.0 + eot + 4.0 * site.longitude - 60.0 * site.utc_offset;
    true_solar_minutes / 4.0 - 180.0
}

fn fractional_hour(timestamp: NaiveDateTime) -> f64 {
    timestamp.hour() as f64 + timestamp.minute() as f64 / 60.0 + timestamp.second() as f64 / 3600.0
}

pub fn sun_position(site: &Site, timestamp: NaiveDateTime) -> SunPosition {
    let hour = fractional_hour(timestamp);
    let decl = declination(timestamp.ordinal(), hour);
    let omega = hour_angle(site, timestamp).to_radians();
    let phi = site.latitude.to_radians();

    let east = -decl.cos() * omega.sin();
    let north = phi.cos() * decl.sin() - phi.sin() * decl.cos() * omega.cos();
    let up = phi.sin() * decl.sin() + phi.cos() * decl.cos() * omega.cos();

    let elevation = up.clamp(-1.0, 1.0).asin().to_degrees();
    let mut azimuth = east.atan2(north).to_degrees().rem_euclid(360.0);
    if azimuth >= 360.0 {
        azimuth = 0.0;
    }
    SunPosition {
        elevation,
        azimuth,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeatherSample {
    pub timestamp: NaiveDateTime,
    pub dni: f64,
    pub dhi: f64,
}

impl WeatherSample {
    /// Instant at which the sun is evaluated for this sample.
    pub fn sun_instant(&self) -> NaiveDateTime {
        self.timestamp + Duration::minutes(SUN_SAMPLE_OFFSET_MINUTES)
    }
}

/// One representative year of hourly direct-normal and diffuse-horizontal
/// irradiance. Construction enforces the invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct WeatherSeries {
    samples: Vec<WeatherSample>,
}

impl WeatherSeries {
    pub fn new(samples: Vec<WeatherSample>) -> Result<Self> {
        if samples.len() != HOURS_PER_YEAR {
            return Err(Error::invalid(
                "weather",
                format!("expected {HOURS_PER_YEAR} samples, got {}", samples.len()),
            ));
        }
        for (i, s) in samples.iter().enumerate() {
            check_sample(s).map_err(|reason| Error::invalid(format!("weather[{i}]"), reason))?;
            if i > 0 && s.timestamp - samples[i - 1].timestamp != Duration::hours(1) {
                return Err(Error::invalid(
                    format!("weather[{i}]"),
                    "timestamps must advance by exactly one hour",
                ));
            }
        }
        Ok(WeatherSeries { samples })
    }

    pub fn samples(&self) -> &[WeatherSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Multiply every irradiance value by `factor` (must be non-negative).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor >= 0.0 && factor.is_finite()) {
            return Err(Error::invalid("factor", "must be finite and >= 0"));
        }
        Ok(WeatherSeries {
            samples: self
                .samples
                .iter()
                .map(|s| WeatherSample {
                    dni: s.dni * factor,
                    dhi: s.dhi * factor,
                    ..*s
                })
                .collect(),
        })
    }

    /// Sun position for every sample, in order.
    pub fn sun_positions(&self, site: &Site) -> Vec<SunPosition> {
        self.samples
            .iter()
            .map(|s| sun_position(site, s.sun_instant()))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 32);
        out.push_str(WEATHER_HEADER);
        out.push('\n');
        for s in &self.samples {
            let _ = writeln!(
                out,
                "{},{},{}",
                s.timestamp.format("%Y-%m-%dT%H:00"),
                s.dni,
                s.dhi
            );
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn check_sample(s: &WeatherSample) -> std::result::Result<(), String> {
    if !s.dni.is_finite() || !s.dhi.is_finite() {
        return Err("irradiance must be finite".into());
    }
    if s.dni < 0.0 {
        return Err(format!("negative dni {}", s.dni));
    }
    if s.dhi < 0.0 {
        return Err(format!("negative dhi {}", s.dhi));
    }
    Ok(())
}

pub fn load_weather(path: &Path) -> Result<WeatherSeries> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_weather(&text, path)
}

/// Parse weather text. `path` is used only for error messages.
pub fn parse_weather(text: &str, path: &Path) -> Result<WeatherSeries> {
    let row_err = |line: usize, reason: String| Error::WeatherRow {
        path: path.to_path_buf(),
        line,
        reason,
    };

    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == WEATHER_HEADER => {}
        Some((_, header)) => {
            return Err(row_err(
                1,
                format!("expected header `{WEATHER_HEADER}`, found `{}`", header.trim()),
            ))
        }
        None => return Err(row_err(1, "empty file".into())),
    }

    let mut samples: Vec<WeatherSample> = Vec::with_capacity(HOURS_PER_YEAR);
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(row_err(
                line_no,
                format!("expected 3 fields, found {}", fields.len()),
            ));
        }
        let ts = fields[0].trim();
        let timestamp = NaiveDateTime::parse_from_str(ts, TIMESTAMP_FORMAT)
            .ok()
            .filter(|t| t.minute() == 0 && t.second() == 0)
            .ok_or_else(|| row_err(line_no, format!("bad timestamp `{ts}`")))?;
        let parse_num = |s: &str, name: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| row_err(line_no, format!("bad {name} value `{}`", s.trim())))
        };
        let sample = WeatherSample {
            timestamp,
            dni: parse_num(fields[1], "dni")?,
            dhi: parse_num(fields[2], "dhi")?,
        };
        check_sample(&sample).map_err(|r| row_err(line_no, r))?;
        if let Some(prev) = samples.last() {
            if sample.timestamp - prev.timestamp != Duration::hours(1) {
                return Err(row_err(
                    line_no,
                    "timestamps must advance by exactly one hour".into(),
                ));
            }
        }
        samples.push(sample);
    }

    if samples.len() != HOURS_PER_YEAR {
        return Err(Error::SampleCount {
            path: path.to_path_buf(),
            expected: HOURS_PER_YEAR,
            found: samples.len(),
        });
    }
    Ok(WeatherSeries { samples })
}

/// Air-mass attenuation clear-sky model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClearSkyModel {
    /// Extraterrestrial normal irradiance, W/m².
    pub e0: f64,
    /// Per-air-mass transmittance base.
    pub transmittance: f64,
    pub exponent: f64,
    /// DHI as a fraction of the horizontal beam component.
    pub diffuse_fraction: f64,
    /// Elevations at or below this (degrees) use the air mass at this elevation.
    pub min_elevation: f64,
}

impl Default for ClearSkyModel {
    fn default() -> Self {
        ClearSkyModel {
            e0: 1361.0,
            transmittance: 0.7,
            exponent: 0.678,
            diffuse_fraction: 0.1,
            min_elevation: 2.0,
        }
    }
}

impl ClearSkyModel {
    pub fn validate(&self, key: &str) -> Result<()> {
        let checks = [
            ("e0", self.e0 > 0.0),
            (
                "transmittance",
                self.transmittance > 0.0 && self.transmittance <= 1.0,
            ),
            ("exponent", self.exponent > 0.0),
            ("diffuse_fraction", self.diffuse_fraction >= 0.0),
            (
                "min_elevation",
                self.min_elevation > 0.0 && self.min_elevation < 90.0,
            ),
        ];
        for (name, ok) in checks {
            if !ok {
                return Err(Error::invalid(format!("{key}.{name}"), "out of range"));
            }
        }
        Ok(())
    }

    /// (dni, dhi) in W/m² for a given sun position.
    pub fn irradiance(&self, sun: SunPosition) -> (f64, f64) {
        if sun.elevation <= 0.0 {
            return (0.0, 0.0);
        }
        let air_mass = 1.0 / sun.elevation.max(self.min_elevation).to_radians().sin();
        let dni = self.e0 * self.transmittance.powf(air_mass.powf(self.exponent));
        let dhi = self.diffuse_fraction * dni * sun.elevation.to_radians().sin();
        (dni, dhi)
    }
}

pub fn clearsky_weather(site: &Site) -> WeatherSeries {
    clearsky_weather_with(site, &ClearSkyModel::default(), REPRESENTATIVE_YEAR)
}

pub fn clearsky_weather_with(site: &Site, model: &ClearSkyModel, year: i32) -> WeatherSeries {
    let start = NaiveDate::from_ymd_opt(year, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid start of year");
    let samples = (0..HOURS_PER_YEAR as i64)
        .map(|h| {
            let timestamp = start + Duration::hours(h);
            let sun = sun_position(site, timestamp + Duration::minutes(SUN_SAMPLE_OFFSET_MINUTES));
            let (dni, dhi) = model.irradiance(sun);
            WeatherSample {
                timestamp,
                dni,
                dhi,
            }
        })
        .collect();
    WeatherSeries { samples }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ts(y: i32, m: u32, d: u32, h: u32, min: u32) -> NaiveDateTime {
        NaiveDate::from_ymd_opt(y, m, d)
            .unwrap()
            .and_hms_opt(h, min, 0)
            .unwrap()
    }

    /// Local standard time of solar noon for a date at a site.
    fn solar_noon(site: &Site, date: NaiveDate) -> NaiveDateTime {
        let mut t = date.and_hms_opt(12, 0, 0).unwrap();
        for _ in 0..3 {
            let ha = hour_angle(site, t);
            t -= Duration::milliseconds((ha * 4.0 * 60_000.0) as i64);
        }
        t
    }

    #[test]
    fn equinox_noon_elevation_is_colatitude() {
        let site = Site::KHANEWAL;
        let noon = solar_noon(&site, NaiveDate::from_ymd_opt(2023, 3, 20).unwrap());
        let sun = sun_position(&site, noon);
        assert!((sun.elevation - 59.7).abs() < 0.5, "{sun:?}");
        assert!((sun.azimuth - 180.0).abs() < 0.5, "{sun:?}");
    }

    #[test]
    fn midnight_is_dark() {
        let sun = sun_position(&Site::KHANEWAL, ts(2023, 6, 21, 0, 0));
        assert!(sun.elevation < 0.0);
    }

    #[test]
    fn noon_elevation_matches_declination_every_tenth_day() {
        for lat in [-45.0, 0.0, 30.2864, 60.0] {
            let site = Site::new(lat, 10.0, 1.0).unwrap();
            for doy in (1..365).step_by(10) {
                let date = NaiveDate::from_yo_opt(2023, doy).unwrap();
                let noon = solar_noon(&site, date);
                let decl = declination(doy, 12.0).to_degrees();
                let expected = 90.0 - (lat - decl).abs();
                let got = sun_position(&site, noon).elevation;
                assert!((got - expected).abs() < 0.5, "lat {lat} doy {doy}: {got} vs {expected}");
            }
        }
    }

    #[test]
    fn morning_sun_is_in_the_east() {
        let sun = sun_position(&Site::KHANEWAL, ts(2023, 6, 21, 8, 0));
        assert!(sun.is_up());
        assert!(sun.azimuth > 45.0 && sun.azimuth < 135.0, "{sun:?}");
    }

    #[test]
    fn site_rejects_out_of_range() {
        assert!(Site::new(91.0, 0.0, 0.0).is_err());
        assert!(Site::new(0.0, -181.0, 0.0).is_err());
    }

    #[test]
    fn clearsky_zenith_value() {
        let (dni, dhi) = ClearSkyModel::default().irradiance(SunPosition {
            elevation: 90.0,
            azimuth: 0.0,
        });
        assert!((dni - 0.7 * 1361.0).abs() < 1e-9);
        assert!((dni - 952.7).abs() < 0.01);
        assert!((dhi - 0.1 * dni).abs() < 1e-9);
    }

    #[test]
    fn clearsky_dark_hours_are_zero() {
        let site = Site::KHANEWAL;
        let series = clearsky_weather(&site);
        assert_eq!(series.len(), HOURS_PER_YEAR);
        for (s, sun) in series.samples().iter().zip(series.sun_positions(&site)) {
            if sun.elevation <= 0.0 {
                assert_eq!((s.dni, s.dhi), (0.0, 0.0));
            }
        }
    }

    #[test]
    fn clearsky_low_sun_is_clamped() {
        let m = ClearSkyModel::default();
        let at = |e: f64| m.irradiance(SunPosition { elevation: e, azimuth: 90.0 }).0;
        assert_eq!(at(0.5), at(2.0));
        assert!(at(1.0) > 0.0);
    }

    #[test]
    fn clearsky_symmetric_about_solar_noon_at_equator() {
        let site = Site::new(0.0, 0.0, 0.0).unwrap();
        let model = ClearSkyModel::default();
        for doy in [15, 80, 172, 266, 355] {
            let noon = solar_noon(&site, NaiveDate::from_yo_opt(2023, doy).unwrap());
            for minutes in [30, 90, 200, 330] {
                let am = model.irradiance(sun_position(&site, noon - Duration::minutes(minutes)));
                let pm = model.irradiance(sun_position(&site, noon + Duration::minutes(minutes)));
                assert!((am.0 - pm.0).abs() < 1.0, "doy {doy} +-{minutes}: {am:?} {pm:?}");
                assert!((am.1 - pm.1).abs() < 0.2);
            }
        }
    }

    fn small_series_text(rows: usize, bad_row: Option<usize>) -> String {
        let start = ts(2023, 1, 1, 0, 0);
        let mut s = String::from(WEATHER_HEADER);
        s.push('\n');
        for h in 0..rows {
            let dni = if Some(h) == bad_row { -5.0 } else { 100.0 };
            s.push_str(&format!(
                "{},{},{}\n",
                (start + Duration::hours(h as i64)).format("%Y-%m-%dT%H:00"),
                dni,
                20.5
            ));
        }
        s
    }

    #[test]
    fn parse_full_year() {
        let series = parse_weather(&small_series_text(8760, None), Path::new("w.csv")).unwrap();
        assert_eq!(series.len(), 8760);
    }

    #[test]
    fn negative_dni_reports_line() {
        let err = parse_weather(&small_series_text(8760, Some(41)), Path::new("w.csv")).unwrap_err();
        match err {
            // data row 41 (0-based) sits on file line 43 (header is line 1)
            Error::WeatherRow { line, ref reason, .. } => {
                assert_eq!(line, 43);
                assert!(reason.contains("dni"), "{reason}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn short_file_rejected() {
        let err = parse_weather(&small_series_text(8759, None), Path::new("w.csv")).unwrap_err();
        assert!(matches!(err, Error::SampleCount { found: 8759, .. }), "{err:?}");
    }

    #[test]
    fn malformed_row_reports_line() {
        let mut text = small_series_text(8760, None);
        text = text.replacen("2023-01-01T05:00,100,20.5", "2023-01-01T05:00,1x0,20.5", 1);
        let err = parse_weather(&text, Path::new("w.csv")).unwrap_err();
        assert!(matches!(err, Error::WeatherRow { line: 7, .. }), "{err:?}");
    }

    #[test]
    fn gap_in_timestamps_rejected() {
        let text = small_series_text(8760, None).replacen("2023-01-01T05:00", "2023-01-01T06:00", 1);
        assert!(parse_weather(&text, Path::new("w.csv")).is_err());
    }

    #[test]
    fn csv_round_trip_clearsky() {
        let series = clearsky_weather(&Site::KHANEWAL);
        let back = parse_weather(&series.to_csv(), Path::new("x")).unwrap();
        assert_eq!(series, back);
    }
}
