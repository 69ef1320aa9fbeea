//! Independent oracles used by the `validate` command and the test suites.
//!
//! None of these share code paths with the production models they check:
//! view factors are estimated by Monte-Carlo ray tracing through the 2D row
//! cross-section, beam shading by bisecting ray occlusion tests, and the
//! economic criterion by explicit year-by-year cash flows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::econ::{self, EconParams, SystemPair, M2_PER_HECTARE};
use crate::optics::{
    beam_module_shading, ground_point_sky_vf, sky_view_factor_segment, ArrayGeometry, Face,
    Orientation, ProjectedSun,
};

pub const DEFAULT_SEED: u64 = 20_220_601;
pub const DEFAULT_MC_RAYS: usize = 1_000_000;
pub const DEFAULT_SCENARIOS: usize = 1000;
/// Absolute tolerance between crossed-strings and Monte-Carlo view factors.
pub const VF_TOLERANCE: f64 = 0.01;
/// Cases with `|ρ_eff − κ|` inside this band are too close to call.
pub const EQUALITY_BAND: f64 = 1e-9;

/// What a ray leaving a point in the cross-section hits first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RayHit {
    Sky,
    Ground,
    Row(i64),
}

fn segment_hit(o: [f64; 2], d: [f64; 2], a: [f64; 2], b: [f64; 2]) -> Option<f64> {
    let e = [b[0] - a[0], b[1] - a[1]];
    let den = d[0] * e[1] - d[1] * e[0];
    if den == 0.0 {
        return None;
    }
    let w = [a[0] - o[0], a[1] - o[1]];
    let t = (w[0] * e[1] - w[1] * e[0]) / den;
    let s = (w[0] * d[1] - w[1] * d[0]) / den;
    (t > 1e-12 && (0.0..=1.0).contains(&s)).then_some(t)
}

/// Trace a ray from `origin` along `dir` through the infinite row array.
///
/// Rows only occupy the height band between the clearance and the top edge,
/// so only rows whose columns the ray crosses inside that band are tested,
/// nearest first. Row `skip` (the emitting surface) is ignored.
pub fn trace(geom: &ArrayGeometry, origin: [f64; 2], dir: [f64; 2], skip: Option<i64>) -> RayHit {
    let (a0, b0) = geom.row(0);
    let (lo, hi) = (a0[1].min(b0[1]), a0[1].max(b0[1]));
    let p = geom.pitch_over_height;
    // ray parameter range inside the band
    let (t_in, t_out) = if dir[1] > 0.0 {
        (((lo - origin[1]) / dir[1]).max(0.0), (hi - origin[1]) / dir[1])
    } else if dir[1] < 0.0 {
        (((hi - origin[1]) / dir[1]).max(0.0), (lo - origin[1]) / dir[1])
    } else if (lo..=hi).contains(&origin[1]) {
        (0.0, f64::INFINITY)
    } else {
        (0.0, -1.0)
    };
    let escaped = if dir[1] > 0.0 { RayHit::Sky } else { RayHit::Ground };
    if t_out < t_in {
        return escaped;
    }
    // Row k spans x ∈ [k·p − width, k·p] (tilted rows lean towards −x); only
    // rows overlapping the ray's x-extent inside the band can be hit.
    let width = (a0[0] - b0[0]).abs();
    let x_in = origin[0] + t_in * dir[0];
    let x_out = if t_out.is_finite() {
        origin[0] + t_out * dir[0]
    } else {
        dir[0].signum() * f64::INFINITY
    };
    let (x_min, x_max) = (x_in.min(x_out), x_in.max(x_out));
    let first = (x_min / p).ceil();
    let last = ((x_max + width) / p).floor();
    const MAX_ROWS: f64 = 1e7;
    let (mut k, end, step) = if dir[0] >= 0.0 {
        (first, last.min(first + MAX_ROWS), 1.0)
    } else {
        (last, first.max(last - MAX_ROWS), -1.0)
    };
    while (end - k) * step >= 0.0 {
        let ki = k as i64;
        if Some(ki) != skip {
            let (a, b) = geom.row(ki);
            if segment_hit(origin, dir, a, b).is_some() {
                return RayHit::Row(ki);
            }
        }
        k += step;
    }
    escaped
}

/// Cosine-weighted direction about unit normal `n` in the plane: the 2D view
/// factor density is ½·cos θ dθ, so sin θ is uniform on [−1, 1].
fn cosine_direction(n: [f64; 2], rng: &mut impl Rng) -> [f64; 2] {
    let s: f64 = rng.gen_range(-1.0..1.0);
    let c = (1.0 - s * s).sqrt();
    // rotate n by θ
    [n[0] * c - n[1] * s, n[0] * s + n[1] * c]
}

/// Monte-Carlo sky view factor of a module face of row 0.
pub fn mc_face_sky_vf(geom: &ArrayGeometry, face: Face, rays: usize, rng: &mut impl Rng) -> f64 {
    let (a, b) = geom.row(0);
    let n = geom.normal(face);
    let mut sky = 0usize;
    for _ in 0..rays {
        let s: f64 = rng.gen();
        let o = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
        let d = cosine_direction(n, rng);
        if trace(geom, o, d, Some(0)) == RayHit::Sky {
            sky += 1;
        }
    }
    sky as f64 / rays as f64
}

/// Monte-Carlo sky view factor of a horizontal ground point at `x`.
pub fn mc_ground_sky_vf(geom: &ArrayGeometry, x: f64, rays: usize, rng: &mut impl Rng) -> f64 {
    let mut sky = 0usize;
    for _ in 0..rays {
        let d = cosine_direction([0.0, 1.0], rng);
        if trace(geom, [x, 0.0], d, None) == RayHit::Sky {
            sky += 1;
        }
    }
    sky as f64 / rays as f64
}

/// Lit fraction of the sun-facing side of row 0, found by bisecting the
/// boundary between occluded and clear points along the module.
///
/// The shadow cast on a planar face by a parallel neighbouring row is a
/// single interval touching one module edge, so the lit set is an interval
/// too; its extent is located by ray occlusion tests alone.
pub fn ray_lit_fraction(geom: &ArrayGeometry, sun: &ProjectedSun) -> f64 {
    if sun.below_horizon {
        return 0.0;
    }
    let (a, b) = geom.row(0);
    let u = sun.in_plane();
    let e = [b[0] - a[0], b[1] - a[1]];
    if (e[0] * u[1] - e[1] * u[0]).abs() < 1e-12 {
        return 0.0;
    }
    let point = |s: f64| [a[0] + s * e[0], a[1] + s * e[1]];
    let blocked = |s: f64| matches!(trace(geom, point(s), u, Some(0)), RayHit::Row(_));
    let (b0, b1) = (blocked(0.0), blocked(1.0));
    match (b0, b1) {
        (false, false) => 1.0,
        (true, true) => {
            // either all shaded or a lit island — probe the middle
            if blocked(0.5) {
                0.0
            } else {
                1.0
            }
        }
        _ => {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if blocked(mid) == b0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let edge = 0.5 * (lo + hi);
            if b0 {
                1.0 - edge
            } else {
                edge
            }
        }
    }
}

/// Outcome of one oracle suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub passed: usize,
    pub failed: usize,
    /// Largest observed discrepancy (suite-specific units).
    pub worst: f64,
    pub notes: Vec<String>,
}

impl SuiteReport {
    fn new(name: &str) -> Self {
        SuiteReport {
            name: name.to_string(),
            passed: 0,
            failed: 0,
            worst: 0.0,
            notes: Vec::new(),
        }
    }

    fn record(&mut self, ok: bool, err: f64, note: impl FnOnce() -> String) {
        self.worst = self.worst.max(err);
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
            if self.notes.len() < 5 {
                self.notes.push(note());
            }
        }
    }

    pub fn ok(&self) -> bool {
        self.failed == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub suites: Vec<SuiteReport>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.suites.iter().all(SuiteReport::ok)
    }
}

/// Deliberate perturbations used to prove the oracles can fail.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ValidationHooks {
    /// Added to κ on the model side only.
    pub kappa_perturbation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationConfig {
    pub seed: u64,
    pub mc_rays: usize,
    pub geometries: usize,
    pub scenarios: usize,
    pub hooks: ValidationHooks,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            seed: DEFAULT_SEED,
            mc_rays: DEFAULT_MC_RAYS,
            geometries: 20,
            scenarios: DEFAULT_SCENARIOS,
            hooks: ValidationHooks::default(),
        }
    }
}

fn sub_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn random_geometry(rng: &mut impl Rng) -> ArrayGeometry {
    let ph = rng.gen_range(1.0..6.0);
    let clearance = rng.gen_range(0.0..3.0);
    let albedo = rng.gen_range(0.0..1.0);
    if rng.gen_bool(0.5) {
        ArrayGeometry::new(Orientation::NsTilted, rng.gen_range(5.0..85.0), ph, clearance, albedo)
    } else {
        ArrayGeometry::new(Orientation::EwVertical, 90.0, ph, clearance, albedo)
    }
    .expect("sampled inside the valid domain")
}

/// Crossed-strings face and ground-point sky view factors against Monte-Carlo
/// ray sampling on randomized geometries.
pub fn view_factor_suite(cfg: &ValidationConfig) -> SuiteReport {
    let results: Vec<(String, f64)> = (0..cfg.geometries)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut rng = sub_rng(cfg.seed, 1000 + i as u64);
            let geom = random_geometry(&mut rng);
            let x = rng.gen_range(0.0..geom.pitch());
            let label = format!(
                "{} tilt {:.1} p/h {:.3} c {:.3}",
                geom.orientation, geom.tilt, geom.pitch_over_height, geom.clearance_over_height
            );
            let mut out = Vec::with_capacity(3);
            for face in [Face::Front, Face::Back] {
                let mc = mc_face_sky_vf(&geom, face, cfg.mc_rays, &mut rng);
                let cs = sky_view_factor_segment(&geom, face);
                out.push((format!("{label} {face:?}: crossed-strings {cs:.5} vs MC {mc:.5}"), (cs - mc).abs()));
            }
            let mc = mc_ground_sky_vf(&geom, x, cfg.mc_rays, &mut rng);
            let an = ground_point_sky_vf(&geom, x);
            out.push((format!("{label} ground x={x:.3}: analytic {an:.5} vs MC {mc:.5}"), (an - mc).abs()));
            out.into_iter()
        })
        .collect();
    let mut report = SuiteReport::new("view factors vs Monte-Carlo");
    for (label, err) in results {
        report.record(err <= VF_TOLERANCE, err, || label);
    }
    report
}

/// Beam lit fraction against ray-bisection on randomized geometries and suns.
pub fn shading_suite(cfg: &ValidationConfig) -> SuiteReport {
    let mut rng = sub_rng(cfg.seed, 2);
    let mut report = SuiteReport::new("beam shading vs ray occlusion");
    for _ in 0..cfg.scenarios {
        let geom = random_geometry(&mut rng);
        let elev: f64 = rng.gen_range(1.0_f64..179.0).to_radians();
        let sun = ProjectedSun {
            x: elev.cos(),
            z: elev.sin(),
            below_horizon: false,
        };
        let model = beam_module_shading(&geom, &sun);
        let oracle = ray_lit_fraction(&geom, &sun);
        let err = (model - oracle).abs();
        report.record(err <= 1e-6, err, || {
            format!("{geom:?} elevation {:.2}: model {model} oracle {oracle}", elev.to_degrees())
        });
    }
    report
}

/// One randomized economic scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EconCase {
    pub pair: SystemPair,
    pub econ: EconParams,
    pub delta_fit: f64,
}

pub fn random_econ_case(rng: &mut impl Rng) -> EconCase {
    let ph_pv = rng.gen_range(1.0..4.0);
    let ph_av = rng.gen_range(1.0..10.0);
    let yy_pv = rng.gen_range(50.0..600.0);
    let yy_av = yy_pv * rng.gen_range(0.5..1.2);
    let p_c_open = rng.gen_range(0.0..20_000.0);
    let y_par = rng.gen_range(0.0..1.0);
    let pair = SystemPair::new(ph_av, ph_pv, yy_av, yy_pv, y_par * p_c_open, p_c_open)
        .expect("positive GMPV yield");
    let econ = EconParams {
        c_m_pv: rng.gen_range(20.0..400.0),
        m_l_pv: rng.gen_range(1.0..100.0),
        kappa: rng.gen_range(0.8..2.0),
        depreciation: rng.gen_range(0.0..0.05),
        discount: rng.gen_range(0.0..0.12),
        lifetime_years: rng.gen_range(5..=40),
        fit_pv: rng.gen_range(0.02..0.2),
    };
    let delta_fit = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..0.1) };
    EconCase { pair, econ, delta_fit }
}

/// Lifetime profit of AV (energy + crops) minus GMPV at equal annual energy,
/// per m² of AV module, built year by year.
pub fn cash_flow_profit_difference(case: &EconCase) -> f64 {
    let EconCase { pair, econ, delta_fit } = *case;
    let area_av = 1.0;
    let area_pv = area_av * pair.yy_av / pair.yy_pv;
    let land_cost = econ.c_m_pv / econ.m_l_pv;
    let capex_av = econ.kappa * econ.c_m_pv * area_av + land_cost * pair.ph_av * area_av;
    let capex_pv = econ.c_m_pv * area_pv + land_cost * pair.ph_pv * area_pv;
    let land_av_ha = pair.ph_av * area_av / M2_PER_HECTARE;
    let mut av = -capex_av;
    let mut pv = -capex_pv;
    for k in 1..=econ.lifetime_years {
        let k = k as f64;
        let weight = (1.0 - econ.depreciation).powf(k) / (1.0 + econ.discount).powf(k);
        let energy_av = pair.yy_av * area_av * weight;
        let energy_pv = pair.yy_pv * area_pv * weight;
        av += (econ.fit_pv + delta_fit) * energy_av + pair.p_c * land_av_ha * weight;
        pv += econ.fit_pv * energy_pv;
    }
    av - pv
}

/// Sign of `ρ + ΔFIT/β − κ` against the explicit cash-flow comparison.
pub fn cash_flow_suite(cfg: &ValidationConfig) -> SuiteReport {
    let mut rng = sub_rng(cfg.seed, 3);
    let mut report = SuiteReport::new("rho vs discounted cash flow");
    let mut checked = 0;
    while checked < cfg.scenarios {
        let case = random_econ_case(&mut rng);
        let r = econ::feasibility(&case.pair, &case.econ, case.delta_fit);
        let margin = r.rho_effective - (case.econ.kappa + cfg.hooks.kappa_perturbation);
        if margin.abs() <= EQUALITY_BAND {
            continue;
        }
        checked += 1;
        let profit = cash_flow_profit_difference(&case);
        let ok = (margin > 0.0) == (profit > 0.0);
        report.record(ok, if ok { 0.0 } else { margin.abs() }, || {
            format!("{case:?}: rho margin {margin:.6e}, cash-flow difference {profit:.6e}")
        });
    }
    report
}

/// `κ ≤ ρ + ΔFIT/β`, `ΔFIT ≥ ΔFIT_th` and `Y_PAR ≥ ψ` give the same verdict.
pub fn criterion_suite(cfg: &ValidationConfig) -> SuiteReport {
    let mut rng = sub_rng(cfg.seed, 4);
    let mut report = SuiteReport::new("criterion equivalence");
    let mut checked = 0;
    while checked < cfg.scenarios {
        let case = random_econ_case(&mut rng);
        if !(case.pair.p_c_open > 0.0) {
            continue;
        }
        let r = econ::feasibility(&case.pair, &case.econ, case.delta_fit);
        if (r.rho_effective - r.kappa).abs() <= EQUALITY_BAND {
            continue;
        }
        checked += 1;
        let by_rho = r.feasible_vs_gmpv;
        let by_fit = case.delta_fit >= r.delta_fit_th;
        let by_psi = r.y_par >= r.psi.expect("positive open profit");
        let ok = by_rho == by_fit && by_fit == by_psi;
        report.record(ok, 0.0, || {
            format!("{case:?}: rho {by_rho}, fit {by_fit}, psi {by_psi}")
        });
    }
    report
}

pub fn run_validation(cfg: &ValidationConfig) -> ValidationReport {
    ValidationReport {
        seed: cfg.seed,
        suites: vec![
            view_factor_suite(cfg),
            shading_suite(cfg),
            cash_flow_suite(cfg),
            criterion_suite(cfg),
        ],
    }
}
