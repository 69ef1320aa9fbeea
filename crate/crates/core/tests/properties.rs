use chrono::{Duration, NaiveDate};
use proptest::prelude::*;

use agrivolt::econ::{
    chi, delta_fit_threshold, feasibility, lcoe, lcoe_ml, rho, EconParams, SystemPair,
};
use agrivolt::optics::{
    ground_point_view, open_field_irradiance, project_sun, row_view_factor_segment, sky_view_factor_segment,
    ground_view_factor_segment, ArrayGeometry, ArrayOptics, Face, Orientation,
};
use agrivolt::solar::{parse_weather, SunPosition, WeatherSample, WeatherSeries, HOURS_PER_YEAR};
use agrivolt::sweep::{Metric, SweepGrid};

fn geometry() -> impl Strategy<Value = ArrayGeometry> {
    (any::<bool>(), 1.0..85.0f64, 1.0..8.0f64, 0.0..3.0f64, 0.0..=1.0f64).prop_map(|(ns, tilt, ph, c, albedo)| {
        if ns {
            ArrayGeometry::new(Orientation::NsTilted, tilt, ph, c, albedo)
        } else {
            ArrayGeometry::new(Orientation::EwVertical, 90.0, ph, c, albedo)
        }
        .unwrap()
    })
}

fn sun() -> impl Strategy<Value = SunPosition> {
    (0.5..89.5f64, 0.0..360.0f64).prop_map(|(elevation, azimuth)| SunPosition { elevation, azimuth })
}

fn pair() -> impl Strategy<Value = SystemPair> {
    (1.0..10.0f64, 1.0..4.0f64, 50.0..600.0f64, 0.5..1.2f64, 0.0..20_000.0f64, 0.0..=1.0f64).prop_map(
        |(ph_av, ph_pv, yy_pv, ratio, open, y)| {
            SystemPair::new(ph_av, ph_pv, yy_pv * ratio, yy_pv, y * open, open).unwrap()
        },
    )
}

fn econ() -> impl Strategy<Value = EconParams> {
    (
        20.0..400.0f64,
        1.0..100.0f64,
        0.8..2.0f64,
        0.0..0.05f64,
        0.0..0.12f64,
        5u32..=40,
        0.02..0.2f64,
    )
        .prop_map(|(c_m_pv, m_l_pv, kappa, depreciation, discount, lifetime_years, fit_pv)| EconParams {
            c_m_pv,
            m_l_pv,
            kappa,
            depreciation,
            discount,
            lifetime_years,
            fit_pv,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn face_view_factors_form_an_enclosure(g in geometry()) {
        for face in [Face::Front, Face::Back] {
            let (s, gr, r) = (
                sky_view_factor_segment(&g, face),
                ground_view_factor_segment(&g, face),
                row_view_factor_segment(&g, face),
            );
            for v in [s, gr, r] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!((s + gr + r - 1.0).abs() < 1e-9, "{face:?}: {s} + {gr} + {r}");
        }
    }

    #[test]
    fn ground_point_view_is_complete(g in geometry(), frac in 0.0..1.0f64) {
        let v = ground_point_view(&g, frac * g.pitch());
        prop_assert!((0.0..=1.0).contains(&v.sky));
        prop_assert!((0.0..=1.0).contains(&v.modules));
        prop_assert!((v.sky + v.modules - 1.0).abs() < 1e-3);
    }

    #[test]
    fn mean_ground_sky_view_grows_with_pitch(g in geometry(), extra in 0.1..4.0f64) {
        let mean = |g: &ArrayGeometry| {
            let o = ArrayOptics::new(g, 64).unwrap();
            o.ground_sky_vf().iter().sum::<f64>() / o.n_points() as f64
        };
        let wider = g.with_pitch(g.pitch_over_height + extra);
        prop_assert!(mean(&wider) >= mean(&g) - 1e-9);
    }

    #[test]
    fn irradiance_is_linear_and_non_negative(
        g in geometry(),
        s in sun(),
        dni in 0.0..1000.0f64,
        dhi in 0.0..400.0f64,
        k in 0.0..5.0f64,
    ) {
        let optics = ArrayOptics::new(&g, 32).unwrap();
        let ps = project_sun(s, g.orientation);
        let eval = |dni: f64, dhi: f64| {
            let ground = optics.ground_profile(&ps, dni, dhi);
            let m = optics.module_irradiance(&ps, dni, dhi, &ground);
            (ground, m)
        };
        let (g1, m1) = eval(dni, dhi);
        let (gk, mk) = eval(k * dni, k * dhi);
        let tol = |a: f64| 1e-9 * (1.0 + a.abs());
        prop_assert!(m1.front >= 0.0 && m1.back >= 0.0);
        prop_assert!((mk.front - k * m1.front).abs() <= tol(mk.front));
        prop_assert!((mk.back - k * m1.back).abs() <= tol(mk.back));
        for j in 0..g1.len() {
            prop_assert!(g1.global(j) >= 0.0);
            prop_assert!((gk.global(j) - k * g1.global(j)).abs() <= tol(gk.global(j)));
        }
    }

    #[test]
    fn opaque_array_darkens_the_ground(g in geometry(), s in sun(), dni in 0.0..1000.0f64, dhi in 0.0..400.0f64) {
        let g = ArrayGeometry { albedo: 0.0, ..g };
        let ps = project_sun(s, g.orientation);
        let profile = ArrayOptics::new(&g, 64).unwrap().ground_profile(&ps, dni, dhi);
        let open = open_field_irradiance(&ps, dni, dhi);
        prop_assert!(profile.mean_global() <= open * (1.0 + 1e-12) + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn lcoe_forms_agree(c_m in 1.0..1000.0f64, m_l in 0.5..200.0f64, ph in 1.0..10.0f64, yy in 1.0..1000.0f64, x in 1.0..40.0f64) {
        let a = lcoe(c_m, c_m / m_l, ph, yy, x).unwrap();
        let b = lcoe_ml(c_m / m_l, m_l, ph, yy, x).unwrap();
        prop_assert!(((a - b) / a).abs() <= 1e-12);
    }

    #[test]
    fn chi_without_depreciation_is_an_annuity(r in 0.001..0.3f64, years in 1u32..60) {
        let closed = (1.0 - (1.0 + r).powi(-(years as i32))) / r;
        prop_assert!(((chi(0.0, r, years) - closed) / closed).abs() <= 1e-12);
    }

    #[test]
    fn three_criteria_agree(p in pair(), e in econ(), delta_fit in 0.0..0.1f64) {
        prop_assume!(p.p_c_open > 0.0);
        let r = feasibility(&p, &e, delta_fit);
        prop_assume!((r.rho_effective - r.kappa).abs() > 1e-9);
        let by_fit = delta_fit >= r.delta_fit_th;
        let by_psi = r.y_par >= r.psi.unwrap();
        prop_assert_eq!(r.feasible_vs_gmpv, by_fit);
        prop_assert_eq!(by_fit, by_psi);
    }

    #[test]
    fn threshold_is_clamped_gap(p in pair(), e in econ()) {
        let r = feasibility(&p, &e, 0.0);
        prop_assert_eq!(r.delta_fit_th, (r.beta * (e.kappa - r.rho)).max(0.0));
        prop_assert_eq!(r.delta_fit_th == 0.0, r.rho >= e.kappa);
        prop_assert_eq!(delta_fit_threshold(&p, &e), r.delta_fit_th);
    }

    #[test]
    fn rho_is_affine_increasing_in_crop_profit(p in pair(), e in econ(), a in 0.0..10_000.0f64, b in 0.0..10_000.0f64) {
        let with = |pc: f64| rho(&SystemPair { p_c: pc, ..p }, &e);
        let (ra, rb, rm) = (with(a), with(b), with(0.5 * (a + b)));
        prop_assert!((rm - 0.5 * (ra + rb)).abs() <= 1e-9 * (1.0 + rm.abs()));
        if a < b {
            prop_assert!(ra < rb);
        }
    }

    #[test]
    fn rho_effective_is_affine_in_tariff(p in pair(), e in econ(), f in 0.0..0.2f64) {
        let r0 = feasibility(&p, &e, 0.0);
        let r = feasibility(&p, &e, f);
        prop_assert!((r.rho_effective - (r0.rho + f / r0.beta)).abs() <= 1e-9 * (1.0 + r.rho_effective.abs()));
    }

    #[test]
    fn rho_falls_with_av_density_without_crops(p in pair(), e in econ(), step in 0.01..3.0f64) {
        let p = SystemPair { p_c: 0.0, ..p };
        prop_assume!(p.ph_av > p.y_pv * p.ph_pv);
        let denser = SystemPair { ph_av: p.ph_av + step, ..p };
        prop_assert!(rho(&denser, &e) < rho(&p, &e));
    }

    #[test]
    fn rho_rises_with_land_cost_ratio_when_av_uses_more_land(p in pair(), e in econ(), step in 0.1..50.0f64) {
        prop_assume!(p.ph_av > p.y_pv * p.ph_pv);
        let cheaper_land = EconParams { m_l_pv: e.m_l_pv + step, ..e };
        prop_assert!(rho(&p, &cheaper_land) >= rho(&p, &e));
    }
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
        -1e3..1e3f64,
        Just(0.0),
        Just(-0.0),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn grid_csv_round_trips_exactly(
        ph in proptest::collection::vec(1.0..100.0f64, 1..6),
        ml in proptest::collection::vec(0.01..100.0f64, 1..6),
        cells in proptest::collection::vec(finite(), 36),
        kappa in 0.1..3.0f64,
    ) {
        let mut ph = ph;
        ph.sort_by(f64::total_cmp);
        ph.dedup();
        let mut ml = ml;
        ml.sort_by(f64::total_cmp);
        ml.dedup();
        let values = (0..ph.len())
            .map(|i| (0..ml.len()).map(|j| cells[i * 6 + j]).collect())
            .collect();
        let grid = SweepGrid {
            metric: Metric::Psi,
            ph_axis: ph,
            ml_axis: ml,
            values,
            scenario_hash: "abc123".into(),
            kappa,
            orientation: Orientation::EwVertical,
        };
        let back = SweepGrid::parse(&grid.to_csv()).unwrap();
        prop_assert_eq!(back.ph_axis.len(), grid.ph_axis.len());
        for (a, b) in back.values.iter().flatten().zip(grid.values.iter().flatten()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        prop_assert_eq!(back, grid);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn weather_round_trips_bit_identically(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let start = NaiveDate::from_ymd_opt(2023, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        let samples: Vec<WeatherSample> = (0..HOURS_PER_YEAR)
            .map(|h| WeatherSample {
                timestamp: start + Duration::hours(h as i64),
                dni: if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.0..1100.0) },
                dhi: rng.gen::<f64>() * 10f64.powi(rng.gen_range(-6..4)),
            })
            .collect();
        let series = WeatherSeries::new(samples).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weather.csv");
        series.write(&path).unwrap();
        let back = agrivolt::solar::load_weather(&path).unwrap();
        for (a, b) in back.samples().iter().zip(series.samples()) {
            prop_assert_eq!(a.timestamp, b.timestamp);
            prop_assert_eq!(a.dni.to_bits(), b.dni.to_bits());
            prop_assert_eq!(a.dhi.to_bits(), b.dhi.to_bits());
        }
        prop_assert_eq!(parse_weather(&series.to_csv(), &path).unwrap(), series);
    }
}
