//! Two-dimensional optics of an infinite array of PV rows.
//!
//! Work happens in the vertical cross-section perpendicular to the row axis.
//! `x` runs across the rows (towards South for N/S tilted rows, towards East
//! for E/W vertical rows) and `z` points up. Lengths are in units of the module
//! slant height. Row `k` has its lower edge at `(k·p, c)` and its upper edge at
//! `(k·p − cos β, c + sin β)`; the front face normal is `(sin β, cos β)`.
//!
//! View factors between segments use the crossed-strings rule. The ground seen
//! by a module face is split into the same strips as [`GroundLightProfile`] and
//! integrated along the face with composite Gauss–Legendre quadrature, then
//! rescaled to the exact crossed-strings total so each face's row sums to one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solar::SunPosition;

pub const DEFAULT_GROUND_POINTS: usize = 100;
pub const MIN_GROUND_POINTS: usize = 16;
pub const DEFAULT_ALBEDO: f64 = 0.25;

/// Rows examined on each side before the far-field tail is closed analytically.
const MIN_ROWS_PER_SIDE: usize = 3;
const MAX_ROWS_PER_SIDE: usize = 4000;

const QUAD_PANELS: usize = 48;
/// Ground farther than this many pitches from a module point is treated as
/// uniformly spread over the period when folding face → ground view factors.
const NEAR_FIELD_PERIODS: f64 = 64.0;
const GAUSS_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Rows run East–West, modules face South (North in the southern hemisphere
    /// is not modelled).
    NsTilted,
    /// Rows run North–South, vertical bifacial modules face East and West.
    EwVertical,
}

impl Orientation {
    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::NsTilted => "ns_tilted",
            Orientation::EwVertical => "ew_vertical",
        }
    }
}

impl std::fmt::Display for Orientation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Face {
    Front,
    Back,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub orientation: Orientation,
    /// Degrees from horizontal.
    pub tilt: f64,
    pub pitch_over_height: f64,
    pub clearance_over_height: f64,
    pub albedo: f64,
}

impl ArrayGeometry {
    pub fn new(
        orientation: Orientation,
        tilt: f64,
        pitch_over_height: f64,
        clearance_over_height: f64,
        albedo: f64,
    ) -> Result<Self> {
        let g = ArrayGeometry {
            orientation,
            tilt,
            pitch_over_height,
            clearance_over_height,
            albedo,
        };
        g.validate("geometry")?;
        Ok(g)
    }

    pub fn ns_tilted(tilt: f64, pitch_over_height: f64, clearance: f64) -> Result<Self> {
        Self::new(
            Orientation::NsTilted,
            tilt,
            pitch_over_height,
            clearance,
            DEFAULT_ALBEDO,
        )
    }

    pub fn ew_vertical(pitch_over_height: f64, clearance: f64) -> Result<Self> {
        Self::new(
            Orientation::EwVertical,
            90.0,
            pitch_over_height,
            clearance,
            DEFAULT_ALBEDO,
        )
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        if !(self.pitch_over_height >= 1.0 && self.pitch_over_height.is_finite()) {
            return Err(Error::invalid(
                format!("{key}.pitch_over_height"),
                format!("must be finite and >= 1, got {}", self.pitch_over_height),
            ));
        }
        if !(self.tilt > 0.0 && self.tilt <= 90.0) {
            return Err(Error::invalid(
                format!("{key}.tilt"),
                format!("must lie in (0, 90], got {}", self.tilt),
            ));
        }
        if self.orientation == Orientation::EwVertical && self.tilt != 90.0 {
            return Err(Error::invalid(
                format!("{key}.tilt"),
                "ew_vertical modules must have tilt 90",
            ));
        }
        if !(self.clearance_over_height >= 0.0 && self.clearance_over_height.is_finite()) {
            return Err(Error::invalid(
                format!("{key}.clearance_over_height"),
                "must be finite and >= 0",
            ));
        }
        if !(0.0..=1.0).contains(&self.albedo) {
            return Err(Error::invalid(format!("{key}.albedo"), "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn with_pitch(mut self, pitch_over_height: f64) -> Self {
        self.pitch_over_height = pitch_over_height;
        self
    }

    pub fn pitch(&self) -> f64 {
        self.pitch_over_height
    }

    fn cos_sin_tilt(&self) -> (f64, f64) {
        let (s, c) = self.tilt.to_radians().sin_cos();
        // exact zero for vertical modules
        if self.tilt == 90.0 {
            (0.0, 1.0)
        } else {
            (c, s)
        }
    }

    /// Lower and upper edge of row `k`.
    pub fn row(&self, k: i64) -> ([f64; 2], [f64; 2]) {
        let (ct, st) = self.cos_sin_tilt();
        let x0 = k as f64 * self.pitch();
        let c = self.clearance_over_height;
        ([x0, c], [x0 - ct, c + st])
    }

    /// Outward unit normal of a face.
    pub fn normal(&self, face: Face) -> [f64; 2] {
        let (ct, st) = self.cos_sin_tilt();
        match face {
            Face::Front => [st, ct],
            Face::Back => [-st, -ct],
        }
    }
}

/// The sun direction expressed in the array cross-section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedSun {
    /// Component of the unit sun vector along the cross-section `x` axis.
    pub x: f64,
    /// Vertical component of the unit sun vector (sine of the true elevation).
    pub z: f64,
    pub below_horizon: bool,
}

impl ProjectedSun {
    /// Elevation of the projected sun in the cross-section, degrees in [0, 180]
    /// measured from the `+x` axis. 90 means the beam is edge-on to vertical rows.
    pub fn elevation(&self) -> f64 {
        self.z.atan2(self.x).to_degrees()
    }

    /// Unit vector of the in-plane beam direction (towards the sun).
    pub fn in_plane(&self) -> [f64; 2] {
        let n = self.x.hypot(self.z);
        if n == 0.0 {
            [0.0, 1.0]
        } else {
            [self.x / n, self.z / n]
        }
    }
}

pub fn project_sun(sun: SunPosition, orientation: Orientation) -> ProjectedSun {
    let [east, north, up] = sun.direction();
    let x = match orientation {
        Orientation::NsTilted => -north,
        Orientation::EwVertical => east,
    };
    ProjectedSun {
        x,
        z: up,
        below_horizon: sun.elevation <= 0.0,
    }
}

/// Cosine of the beam incidence angle on a face (negative when the face is
/// turned away from the sun).
pub fn cos_incidence(geom: &ArrayGeometry, sun: &ProjectedSun, face: Face) -> f64 {
    let n = geom.normal(face);
    n[0] * sun.x + n[1] * sun.z
}

/// Unshaded fraction of the sunlit face given the shadow of the neighbouring
/// row on the sun side.
pub fn beam_module_shading(geom: &ArrayGeometry, sun: &ProjectedSun) -> f64 {
    if sun.below_horizon {
        return 0.0;
    }
    let (a, b) = geom.row(0);
    let d = [b[0] - a[0], b[1] - a[1]];
    let u = sun.in_plane();
    let det = d[0] * u[1] - d[1] * u[0];
    if det.abs() < 1e-12 {
        // beam parallel to the module plane
        return 0.0;
    }
    // The shadow of row ±1 covers the face parameter range of length 1 − |shift|.
    let shift = geom.pitch() * u[1] / det;
    shift.abs().min(1.0)
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Crossed-strings view factor from segment `ab` to segment `cd`, assuming the
/// two are fully visible to each other.
pub fn crossed_strings(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> f64 {
    let crossed = dist(a, d) + dist(b, c);
    let uncrossed = dist(a, c) + dist(b, d);
    ((crossed - uncrossed) / (2.0 * dist(a, b))).abs()
}

/// The openings through which a face sees the sky (top) and the ground (bottom).
fn face_openings(geom: &ArrayGeometry, face: Face) -> (([f64; 2], [f64; 2]), ([f64; 2], [f64; 2])) {
    let (a0, b0) = geom.row(0);
    let k = match face {
        Face::Front => 1,
        Face::Back => -1,
    };
    let (ak, bk) = geom.row(k);
    ((b0, bk), (a0, ak))
}

/// Face-averaged view factor to the sky, masked by the neighbouring rows.
pub fn sky_view_factor_segment(geom: &ArrayGeometry, face: Face) -> f64 {
    let (a0, b0) = geom.row(0);
    let (top, _) = face_openings(geom, face);
    crossed_strings(a0, b0, top.0, top.1).clamp(0.0, 1.0)
}

/// Face-averaged view factor to the ground (all of it, across every period).
pub fn ground_view_factor_segment(geom: &ArrayGeometry, face: Face) -> f64 {
    let (a0, b0) = geom.row(0);
    let (_, bottom) = face_openings(geom, face);
    crossed_strings(a0, b0, bottom.0, bottom.1).clamp(0.0, 1.0)
}

/// Face-averaged view factor to the facing neighbouring row.
pub fn row_view_factor_segment(geom: &ArrayGeometry, face: Face) -> f64 {
    let (a0, b0) = geom.row(0);
    let k = if face == Face::Front { 1 } else { -1 };
    let (ak, bk) = geom.row(k);
    crossed_strings(a0, b0, ak, bk).clamp(0.0, 1.0)
}

/// How the hemisphere above a ground point splits between sky and modules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundPointView {
    pub sky: f64,
    pub modules: f64,
}

/// Angular interval (radians from `+x`) subtended by row `k` at ground point `x`.
fn row_interval(geom: &ArrayGeometry, x: f64, k: i64) -> (f64, f64) {
    let (a, b) = geom.row(k);
    let ta = a[1].atan2(a[0] - x);
    let tb = b[1].atan2(b[0] - x);
    (ta.min(tb), ta.max(tb))
}

pub fn ground_point_view(geom: &ArrayGeometry, x: f64) -> GroundPointView {
    use std::f64::consts::PI;

    let mut intervals: Vec<(f64, f64)> = Vec::new();
    // +x side: rows whose angles fall towards 0; -x side: towards π.
    for side in [1_i64, -1] {
        let mut prev = row_interval(geom, x, 0);
        intervals.push(prev);
        for step in 1..=MAX_ROWS_PER_SIDE as i64 {
            let cur = row_interval(geom, x, side * step);
            intervals.push(cur);
            let contiguous = if side > 0 {
                cur.1 >= prev.0
            } else {
                cur.0 <= prev.1
            };
            if step as usize >= MIN_ROWS_PER_SIDE && contiguous {
                // Once neighbouring rows overlap in angle they keep doing so
                // further out, closing the band down to the horizon.
                intervals.push(if side > 0 { (0.0, cur.1) } else { (cur.0, PI) });
                break;
            }
            prev = cur;
        }
    }

    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut blocked = 0.0;
    let mut current: Option<(f64, f64)> = None;
    for (lo, hi) in intervals {
        let (lo, hi) = (lo.clamp(0.0, PI), hi.clamp(0.0, PI));
        match current {
            Some((clo, chi)) if lo <= chi => current = Some((clo, chi.max(hi))),
            Some((clo, chi)) => {
                blocked += 0.5 * (clo.cos() - chi.cos());
                current = Some((lo, hi));
            }
            None => current = Some((lo, hi)),
        }
    }
    if let Some((clo, chi)) = current {
        blocked += 0.5 * (clo.cos() - chi.cos());
    }
    let modules = blocked.clamp(0.0, 1.0);
    GroundPointView {
        sky: 1.0 - modules,
        modules,
    }
}

pub fn ground_point_sky_vf(geom: &ArrayGeometry, x: f64) -> f64 {
    ground_point_view(geom, x).sky
}

/// Ground interval `[lo, hi]` shadowed by row 0 for a sun above the horizon.
pub fn ground_shadow_interval(geom: &ArrayGeometry, sun: &ProjectedSun) -> (f64, f64) {
    let (a, b) = geom.row(0);
    let u = sun.in_plane();
    let project = |p: [f64; 2]| {
        if u[1] <= 0.0 {
            f64::NEG_INFINITY
        } else {
            p[0] - p[1] * u[0] / u[1]
        }
    };
    let (xa, xb) = (project(a), project(b));
    (xa.min(xb), xa.max(xb))
}

/// True if ground point `x` lies in the shadow of any row.
pub fn ground_point_shaded(geom: &ArrayGeometry, sun: &ProjectedSun, x: f64) -> bool {
    let (lo, hi) = ground_shadow_interval(geom, sun);
    is_shaded(lo, hi, geom.pitch(), x)
}

fn is_shaded(lo: f64, hi: f64, pitch: f64, x: f64) -> bool {
    let width = hi - lo;
    if !width.is_finite() || width >= pitch {
        return true;
    }
    (x - lo).rem_euclid(pitch) < width
}

/// Horizontal-plane irradiance at ground level across one pitch.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundLightProfile {
    pub pitch: f64,
    /// Sample positions (strip centres) in `[0, pitch)`.
    pub positions: Vec<f64>,
    pub direct: Vec<f64>,
    pub diffuse: Vec<f64>,
}

impl GroundLightProfile {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn global(&self, j: usize) -> f64 {
        self.direct[j] + self.diffuse[j]
    }

    pub fn mean_global(&self) -> f64 {
        (0..self.len()).map(|j| self.global(j)).sum::<f64>() / self.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModuleIrradiance {
    pub front: f64,
    pub back: f64,
}

/// Geometry-only quantities precomputed once per array and reused every hour.
#[derive(Debug, Clone)]
pub struct ArrayOptics {
    geom: ArrayGeometry,
    positions: Vec<f64>,
    ground_sky: Vec<f64>,
    face_sky: [f64; 2],
    /// Face → ground strip view factors, folded onto one period.
    face_ground: [Vec<f64>; 2],
}

impl ArrayOptics {
    pub fn new(geom: &ArrayGeometry, n_points: usize) -> Result<Self> {
        if n_points < MIN_GROUND_POINTS {
            return Err(Error::invalid(
                "n_points",
                format!("must be >= {MIN_GROUND_POINTS}, got {n_points}"),
            ));
        }
        let p = geom.pitch();
        let positions: Vec<f64> = (0..n_points)
            .map(|j| (j as f64 + 0.5) * p / n_points as f64)
            .collect();
        let ground_sky = positions
            .iter()
            .map(|&x| ground_point_sky_vf(geom, x))
            .collect();
        Ok(ArrayOptics {
            geom: *geom,
            positions,
            ground_sky,
            face_sky: [
                sky_view_factor_segment(geom, Face::Front),
                sky_view_factor_segment(geom, Face::Back),
            ],
            face_ground: [
                face_ground_strips(geom, Face::Front, n_points),
                face_ground_strips(geom, Face::Back, n_points),
            ],
        })
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geom
    }

    pub fn n_points(&self) -> usize {
        self.positions.len()
    }

    pub fn ground_sky_vf(&self) -> &[f64] {
        &self.ground_sky
    }

    pub fn face_sky_vf(&self, face: Face) -> f64 {
        self.face_sky[face_index(face)]
    }

    pub fn face_ground_vf(&self, face: Face) -> &[f64] {
        &self.face_ground[face_index(face)]
    }

    pub fn ground_profile(&self, sun: &ProjectedSun, dni: f64, dhi: f64) -> GroundLightProfile {
        let n = self.positions.len();
        let mut direct = vec![0.0; n];
        if !sun.below_horizon && dni > 0.0 && sun.z > 0.0 {
            let (lo, hi) = ground_shadow_interval(&self.geom, sun);
            let beam = dni * sun.z;
            for (d, &x) in direct.iter_mut().zip(&self.positions) {
                if !is_shaded(lo, hi, self.geom.pitch(), x) {
                    *d = beam;
                }
            }
        }
        let diffuse = self.ground_sky.iter().map(|vf| dhi * vf).collect();
        GroundLightProfile {
            pitch: self.geom.pitch(),
            positions: self.positions.clone(),
            direct,
            diffuse,
        }
    }

    /// Plane-of-array irradiance on both faces. `ground` must come from
    /// [`ArrayOptics::ground_profile`] for the same hour.
    pub fn module_irradiance(
        &self,
        sun: &ProjectedSun,
        dni: f64,
        dhi: f64,
        ground: &GroundLightProfile,
    ) -> ModuleIrradiance {
        let mut out = [0.0; 2];
        let unshaded = beam_module_shading(&self.geom, sun);
        for (i, face) in [Face::Front, Face::Back].into_iter().enumerate() {
            let mut e = dhi * self.face_sky[i];
            if !sun.below_horizon {
                let cos_i = cos_incidence(&self.geom, sun, face);
                if cos_i > 0.0 {
                    e += dni * cos_i * unshaded;
                }
            }
            if self.geom.albedo > 0.0 {
                let reflected: f64 = self.face_ground[i]
                    .iter()
                    .enumerate()
                    .map(|(j, f)| f * ground.global(j))
                    .sum();
                e += self.geom.albedo * reflected;
            }
            out[i] = e;
        }
        ModuleIrradiance {
            front: out[0],
            back: out[1],
        }
    }
}

fn face_index(face: Face) -> usize {
    match face {
        Face::Front => 0,
        Face::Back => 1,
    }
}

/// View factors from a face of row 0 to each ground strip `[jΔ, (j+1)Δ)`,
/// summed over every period the face can see through its bottom opening.
fn face_ground_strips(geom: &ArrayGeometry, face: Face, n: usize) -> Vec<f64> {
    let p = geom.pitch();
    let strip = p / n as f64;
    let (a0, b0) = geom.row(0);
    let normal = geom.normal(face);
    let (_, (w0, w1)) = face_openings(geom, face);
    let mut vf = vec![0.0; n];

    // sin of the angle between the normal and the direction to ground point g
    let sin_angle = |pt: [f64; 2], g: f64| {
        let dx = g - pt[0];
        let dz = -pt[1];
        let len = dx.hypot(dz);
        (normal[0] * dz - normal[1] * dx) / len
    };

    let panel = 1.0 / QUAD_PANELS as f64;
    for q in 0..QUAD_PANELS {
        for (node, weight) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
            let t = panel * (q as f64 + 0.5 * (node + 1.0));
            let w = 0.5 * panel * weight;
            let pt = [a0[0] + t * (b0[0] - a0[0]), a0[1] + t * (b0[1] - a0[1])];
            // visible ground is the projection of the bottom opening through pt
            let through = |o: [f64; 2]| {
                if pt[1] - o[1] <= 1e-15 {
                    o[0]
                } else {
                    pt[0] + (o[0] - pt[0]) * pt[1] / (pt[1] - o[1])
                }
            };
            let (g0, g1) = {
                let (u, v) = (through(w0), through(w1));
                (u.min(v), u.max(v))
            };
            if g1 - g0 <= 0.0 {
                continue;
            }
            // Nearly flat modules see ground out to huge distances through the
            // row gap; only the near field is resolved strip by strip.
            let reach = NEAR_FIELD_PERIODS * p;
            let (n0, n1) = (g0.max(pt[0] - reach), g1.min(pt[0] + reach));
            let far = 0.5 * (sin_angle(pt, n0) - sin_angle(pt, g0)).abs()
                + 0.5 * (sin_angle(pt, g1) - sin_angle(pt, n1)).abs();
            if far > 0.0 {
                let share = w * far / n as f64;
                vf.iter_mut().for_each(|v| *v += share);
            }
            if n1 <= n0 {
                continue;
            }
            let first = (n0 / strip).floor() as i64;
            let last = (n1 / strip).ceil() as i64;
            for s in first..last {
                let lo = (s as f64 * strip).max(n0);
                let hi = ((s + 1) as f64 * strip).min(n1);
                if hi <= lo {
                    continue;
                }
                let f = 0.5 * (sin_angle(pt, hi) - sin_angle(pt, lo)).abs();
                vf[s.rem_euclid(n as i64) as usize] += w * f;
            }
        }
    }

    let total: f64 = vf.iter().sum();
    let exact = ground_view_factor_segment(geom, face);
    if total > 0.0 {
        let scale = exact / total;
        vf.iter_mut().for_each(|v| *v *= scale);
    }
    vf
}

/// Open-field horizontal irradiance.
pub fn open_field_irradiance(sun: &ProjectedSun, dni: f64, dhi: f64) -> f64 {
    let beam = if sun.below_horizon { 0.0 } else { dni * sun.z.max(0.0) };
    beam + dhi
}

/// Module irradiance for a single hour using [`DEFAULT_GROUND_POINTS`] strips.
///
/// Sweeps should build an [`ArrayOptics`] once and reuse it.
pub fn module_irradiance(
    geom: &ArrayGeometry,
    sun: SunPosition,
    dni: f64,
    dhi: f64,
) -> Result<ModuleIrradiance> {
    let optics = ArrayOptics::new(geom, DEFAULT_GROUND_POINTS)?;
    let ps = project_sun(sun, geom.orientation);
    let ground = optics.ground_profile(&ps, dni, dhi);
    Ok(optics.module_irradiance(&ps, dni, dhi, &ground))
}

pub fn ground_par_profile(
    geom: &ArrayGeometry,
    sun: SunPosition,
    dni: f64,
    dhi: f64,
    n_points: usize,
) -> Result<GroundLightProfile> {
    let optics = ArrayOptics::new(geom, n_points)?;
    Ok(optics.ground_profile(&project_sun(sun, geom.orientation), dni, dhi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sun(elevation: f64, azimuth: f64) -> SunPosition {
        SunPosition { elevation, azimuth }
    }

    fn in_plane_sun(elevation_deg: f64) -> ProjectedSun {
        let (s, c) = elevation_deg.to_radians().sin_cos();
        ProjectedSun {
            x: c,
            z: s,
            below_horizon: false,
        }
    }

    #[test]
    fn south_sun_lies_in_ns_cross_section() {
        let ps = project_sun(sun(45.0, 180.0), Orientation::NsTilted);
        assert!((ps.elevation() - 45.0).abs() < 1e-9);
        assert!(ps.x > 0.0);
    }

    #[test]
    fn south_sun_is_edge_on_for_ew_rows() {
        let geom = ArrayGeometry::ew_vertical(2.0, 0.5).unwrap();
        for e in [10.0, 40.0, 80.0] {
            let ps = project_sun(sun(e, 180.0), Orientation::EwVertical);
            assert!((ps.elevation() - 90.0).abs() < 1e-9);
            assert!(cos_incidence(&geom, &ps, Face::Front).abs() < 1e-12);
            assert!(cos_incidence(&geom, &ps, Face::Back).abs() < 1e-12);
        }
    }

    #[test]
    fn projected_elevation_oblique_sun() {
        let ps = project_sun(sun(30.0, 120.0), Orientation::EwVertical);
        let expected = (30f64.to_radians().tan() / 120f64.to_radians().sin())
            .atan()
            .to_degrees();
        assert!((ps.elevation() - expected).abs() < 1e-9);
        assert!((ps.elevation() - 33.690).abs() < 1e-3);
    }

    #[test]
    fn no_mutual_shading_when_rows_far_apart() {
        let geom = ArrayGeometry::ns_tilted(30.0, 2.0, 0.5).unwrap();
        assert_eq!(beam_module_shading(&geom, &in_plane_sun(60.0)), 1.0);
    }

    #[test]
    fn grazing_sun_lights_nothing() {
        let geom = ArrayGeometry::ns_tilted(30.0, 2.0, 0.5).unwrap();
        // beam parallel to the module plane: projected elevation 150°
        let ps = in_plane_sun(150.0);
        assert_eq!(beam_module_shading(&geom, &ps), 0.0);
        assert!(cos_incidence(&geom, &ps, Face::Front).abs() < 1e-12);
    }

    #[test]
    fn vertical_wall_shadow_fraction() {
        let geom = ArrayGeometry::ew_vertical(2.0, 0.0).unwrap();
        let f = beam_module_shading(&geom, &in_plane_sun(20.0));
        assert!((f - 2.0 * 20f64.to_radians().tan()).abs() < 1e-12);
    }

    #[test]
    fn sky_vf_limits() {
        // nearly horizontal face-up module, isolated
        let flat = ArrayGeometry::ns_tilted(1e-6, 1e6, 0.0).unwrap();
        assert!((sky_view_factor_segment(&flat, Face::Front) - 1.0).abs() < 1e-6);
        let wall = ArrayGeometry::ew_vertical(1e6, 0.0).unwrap();
        for face in [Face::Front, Face::Back] {
            assert!((sky_view_factor_segment(&wall, face) - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn face_view_factors_sum_to_one() {
        for (tilt, ph, c) in [(30.0, 2.0, 0.5), (15.0, 1.2, 2.5), (90.0, 3.0, 0.0), (60.0, 5.0, 1.0)] {
            let g = ArrayGeometry::ns_tilted(tilt, ph, c).unwrap();
            for face in [Face::Front, Face::Back] {
                let s = sky_view_factor_segment(&g, face)
                    + ground_view_factor_segment(&g, face)
                    + row_view_factor_segment(&g, face);
                assert!((s - 1.0).abs() < 1e-12, "{tilt} {ph} {c} {face:?}: {s}");
            }
        }
    }

    #[test]
    fn strip_vfs_sum_to_ground_vf_before_rescale() {
        // the quadrature should already be close to the exact total
        let g = ArrayGeometry::ns_tilted(30.0, 2.0, 2.5).unwrap();
        let optics = ArrayOptics::new(&g, 100).unwrap();
        for face in [Face::Front, Face::Back] {
            let total: f64 = optics.face_ground_vf(face).iter().sum();
            assert!((total - ground_view_factor_segment(&g, face)).abs() < 1e-12);
            assert!(optics.face_ground_vf(face).iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn open_ground_sees_whole_sky() {
        let g = ArrayGeometry::ew_vertical(1e7, 0.0).unwrap();
        assert!((ground_point_sky_vf(&g, 0.5e7) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn midpoint_between_walls() {
        let g = ArrayGeometry::ew_vertical(2.0, 0.0).unwrap();
        let vf = ground_point_sky_vf(&g, 1.0);
        // walls subtend 45° on either side: sky is the [45°, 135°] wedge
        assert!((vf - 45f64.to_radians().cos()).abs() < 1e-12, "{vf}");
    }

    #[test]
    fn ground_sky_vf_grows_with_pitch() {
        let mut prev = 0.0;
        for ph in [1.5, 2.0, 3.0, 4.0, 6.0, 10.0] {
            let g = ArrayGeometry::ns_tilted(30.0, ph, 2.5).unwrap();
            let vf = ground_point_sky_vf(&g, 0.3 * ph);
            assert!(vf >= prev - 1e-12, "p/h {ph}: {vf} < {prev}");
            prev = vf;
        }
    }

    #[test]
    fn vertical_wall_shadow_band_width() {
        let g = ArrayGeometry::ew_vertical(3.0, 0.0).unwrap();
        let (lo, hi) = ground_shadow_interval(&g, &in_plane_sun(45.0));
        assert!((hi - lo - 1.0).abs() < 1e-12);
        let optics = ArrayOptics::new(&g, 300).unwrap();
        let prof = optics.ground_profile(&in_plane_sun(45.0), 800.0, 0.0);
        let shaded = prof.direct.iter().filter(|&&d| d == 0.0).count();
        assert_eq!(shaded, 100);
    }

    #[test]
    fn dark_sky_gives_zero() {
        let g = ArrayGeometry::ns_tilted(30.0, 2.0, 0.5).unwrap();
        let m = module_irradiance(&g, sun(40.0, 160.0), 0.0, 0.0).unwrap();
        assert_eq!(m, ModuleIrradiance::default());
        let p = ground_par_profile(&g, sun(-5.0, 0.0), 500.0, 0.0, 32).unwrap();
        assert!(p.direct.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn too_few_ground_points() {
        let g = ArrayGeometry::ns_tilted(30.0, 2.0, 0.5).unwrap();
        assert!(ground_par_profile(&g, sun(40.0, 180.0), 1.0, 1.0, 8).is_err());
    }

    #[test]
    fn sparse_array_matches_open_field() {
        let g = ArrayGeometry::ns_tilted(30.0, 1e5, 2.5).unwrap();
        let s = sun(50.0, 150.0);
        let ps = project_sun(s, g.orientation);
        let p = ground_par_profile(&g, s, 700.0, 90.0, 64).unwrap();
        let open = open_field_irradiance(&ps, 700.0, 90.0);
        for j in 0..p.len() {
            assert!((p.global(j) - open).abs() / open < 1e-3);
        }
    }

    #[test]
    fn vertical_east_face_normal_sun() {
        let g = ArrayGeometry::new(Orientation::EwVertical, 90.0, 1e4, 0.5, 0.0).unwrap();
        // sun just above the eastern horizon: near-normal incidence on the East
        // face, and rows far enough apart that nothing is shaded
        let z: f64 = 1e-3;
        let ps = ProjectedSun {
            x: (1.0 - z * z).sqrt(),
            z,
            below_horizon: false,
        };
        let optics = ArrayOptics::new(&g, 32).unwrap();
        let ground = optics.ground_profile(&ps, 800.0, 100.0);
        let m = optics.module_irradiance(&ps, 800.0, 100.0, &ground);
        let vf_back = sky_view_factor_segment(&g, Face::Back);
        assert!((m.front - (800.0 * ps.x + 100.0 * vf_back)).abs() < 1e-6, "{m:?}");
        assert!((m.back - 100.0 * vf_back).abs() < 1e-9);
    }

    #[test]
    fn reject_bad_geometry() {
        assert!(ArrayGeometry::ns_tilted(30.0, 0.5, 0.5).is_err());
        assert!(ArrayGeometry::ns_tilted(0.0, 2.0, 0.5).is_err());
        assert!(ArrayGeometry::ns_tilted(30.0, 2.0, -0.1).is_err());
        assert!(ArrayGeometry::new(Orientation::EwVertical, 45.0, 2.0, 0.5, 0.2).is_err());
    }
}
