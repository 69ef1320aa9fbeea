//! Food-energy economics of an agrivoltaic array relative to ground-mounted PV.
//!
//! Both systems are sized for the same annual energy, so the GMPV module area
//! is `y_pv` times the AV module area, and both pay the same land-related cost
//! per unit land `c_L = c_M,PV / M_L`. Starting from
//! `(LCOE_AV − LCOE_PV)·YY_T ≤ P_C` with `LCOE = (c_M·A_M + c_L·A_L)/(YY·A_M·χ)`
//! and `A_L = (p/h)·A_M`, dividing by `c_M,PV·A_M,AV/χ` gives
//!
//! ```text
//! κ ≤ P'_c − c'_L + Y_PV (+ ΔFIT/β)
//! P'_c = p_c·(p/h)_AV·χ / (c_M,PV·10⁴)         p_c in USD/ha/yr
//! c'_L = ((p/h)_AV − Y_PV·(p/h)_PV) / M_L
//! β    = c_M,PV / (YY_AV·χ)
//! ```
//!
//! The right-hand side is ρ. The crop criterion `Y_PAR ≥ ψ` and the tariff
//! threshold `ΔFIT_th = max(0, β(κ − ρ))` are rearrangements of the same
//! inequality.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::Orientation;

pub const M2_PER_HECTARE: f64 = 1e4;

/// Land preservation cost for an elevated N/S tilted AV array.
pub const KAPPA_NS_TILTED: f64 = 1.38;
/// Land preservation cost for a vertical E/W bifacial AV array.
pub const KAPPA_EW_VERTICAL: f64 = 1.2;

pub fn default_kappa(orientation: Orientation) -> f64 {
    match orientation {
        Orientation::NsTilted => KAPPA_NS_TILTED,
        Orientation::EwVertical => KAPPA_EW_VERTICAL,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EconParams {
    /// Lifetime module-technology cost of GMPV, USD per m² of module.
    pub c_m_pv: f64,
    /// `M_L = c_M,PV / c_L`.
    pub m_l_pv: f64,
    /// `c_M,AV / c_M,PV`.
    pub kappa: f64,
    /// Per-year depreciation (energy degradation) rate.
    pub depreciation: f64,
    /// Per-year discount rate.
    pub discount: f64,
    pub lifetime_years: u32,
    /// Base feed-in tariff, USD/kWh.
    pub fit_pv: f64,
}

impl EconParams {
    pub fn with_defaults(kappa: f64) -> Self {
        EconParams {
            c_m_pv: 100.0,
            m_l_pv: 20.0,
            kappa,
            depreciation: 0.01,
            discount: 0.05,
            lifetime_years: 25,
            fit_pv: 0.07,
        }
    }

    pub fn validate(&self, key: &str) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::invalid(format!("{key}.{field}"), why));
        if !(self.c_m_pv > 0.0 && self.c_m_pv.is_finite()) {
            return bad("c_m_pv", "must be finite and > 0");
        }
        if !(self.m_l_pv > 0.0 && self.m_l_pv.is_finite()) {
            return bad("m_l_pv", "must be finite and > 0");
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return bad("kappa", "must be finite and > 0");
        }
        if !(0.0..1.0).contains(&self.depreciation) {
            return bad("depreciation", "must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.discount) {
            return bad("discount", "must lie in [0, 1)");
        }
        if self.lifetime_years < 1 {
            return bad("lifetime_years", "must be >= 1");
        }
        if !(self.fit_pv >= 0.0 && self.fit_pv.is_finite()) {
            return bad("fit_pv", "must be finite and >= 0");
        }
        Ok(())
    }

    pub fn chi(&self) -> f64 {
        chi(self.depreciation, self.discount, self.lifetime_years)
    }

    /// Land-related cost per m² of land.
    pub fn c_l(&self) -> f64 {
        self.c_m_pv / self.m_l_pv
    }
}

/// Annual yields, array densities and crop profits of an AV/GMPV pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemPair {
    pub ph_av: f64,
    pub ph_pv: f64,
    /// kWh per m² module per year.
    pub yy_av: f64,
    pub yy_pv: f64,
    pub y_pv: f64,
    /// AV crop profit, USD/ha/yr (already scaled by relative yield).
    pub p_c: f64,
    /// Open-field crop profit, USD/ha/yr.
    pub p_c_open: f64,
}

impl SystemPair {
    pub fn new(ph_av: f64, ph_pv: f64, yy_av: f64, yy_pv: f64, p_c: f64, p_c_open: f64) -> Result<Self> {
        if !(yy_pv > 0.0) {
            return Err(Error::Degenerate("GMPV annual yield must be positive".into()));
        }
        Ok(SystemPair {
            ph_av,
            ph_pv,
            yy_av,
            yy_pv,
            y_pv: yy_av / yy_pv,
            p_c,
            p_c_open,
        })
    }

    /// Profit-weighted relative crop yield.
    pub fn y_par(&self) -> f64 {
        if self.p_c_open > 0.0 {
            self.p_c / self.p_c_open
        } else {
            0.0
        }
    }
}

/// `Σ_{k=1..Y} (1−d)^k (1+r)^−k`.
pub fn chi(depreciation: f64, discount: f64, lifetime_years: u32) -> f64 {
    let q = (1.0 - depreciation) / (1.0 + discount);
    let mut factor = 1.0;
    let mut sum = 0.0;
    for _ in 0..lifetime_years {
        factor *= q;
        sum += factor;
    }
    sum
}

/// Levelized cost of electricity, USD/kWh.
pub fn lcoe(c_m: f64, c_l: f64, p_over_h: f64, yy: f64, chi: f64) -> Result<f64> {
    let denom = yy * chi;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::Degenerate(format!(
            "lifetime energy yy·chi must be non-zero, got {denom}"
        )));
    }
    Ok((c_m + c_l * p_over_h) / denom)
}

/// LCOE written with `M_L = c_M / c_L`.
pub fn lcoe_ml(c_l: f64, m_l: f64, p_over_h: f64, yy: f64, chi: f64) -> Result<f64> {
    let denom = yy * chi / c_l;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::Degenerate("lifetime energy yy·chi/c_L must be non-zero".into()));
    }
    Ok((m_l + p_over_h) / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedTerms {
    pub p_c_norm: f64,
    pub c_l_norm: f64,
}

fn crop_norm(profit: f64, ph_av: f64, econ: &EconParams, chi: f64) -> f64 {
    profit * ph_av * chi / (econ.c_m_pv * M2_PER_HECTARE)
}

pub fn normalized_terms(pair: &SystemPair, econ: &EconParams) -> NormalizedTerms {
    let chi = econ.chi();
    NormalizedTerms {
        p_c_norm: crop_norm(pair.p_c, pair.ph_av, econ, chi),
        c_l_norm: (pair.ph_av - pair.y_pv * pair.ph_pv) / econ.m_l_pv,
    }
}

pub fn rho(pair: &SystemPair, econ: &EconParams) -> f64 {
    let t = normalized_terms(pair, econ);
    t.p_c_norm - t.c_l_norm + pair.y_pv
}

/// Module technology cost per unit of AV lifetime energy, USD/kWh.
pub fn beta(pair: &SystemPair, econ: &EconParams) -> f64 {
    econ.c_m_pv / (pair.yy_av * econ.chi())
}

pub fn delta_fit_threshold(pair: &SystemPair, econ: &EconParams) -> f64 {
    (beta(pair, econ) * (econ.kappa - rho(pair, econ))).max(0.0)
}

/// Minimum relative crop yield for equivalence with GMPV at tariff premium
/// `delta_fit`.
pub fn psi(pair: &SystemPair, econ: &EconParams, delta_fit: f64) -> Result<f64> {
    if !(pair.p_c_open > 0.0) {
        return Err(Error::Degenerate(
            "psi needs a positive open-field crop profit".into(),
        ));
    }
    let chi = econ.chi();
    let t = normalized_terms(pair, econ);
    let open_norm = crop_norm(pair.p_c_open, pair.ph_av, econ, chi);
    let fit_term = delta_fit / beta(pair, econ);
    Ok((econ.kappa - pair.y_pv + t.c_l_norm - fit_term) / open_norm)
}

/// Lifetime discounted totals per hectare of AV land: the AV system (energy
/// plus crops, net of capital) and the open-field farm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpenFieldComparison {
    pub av_total: f64,
    pub open_total: f64,
}

pub fn open_field_comparison(pair: &SystemPair, econ: &EconParams, delta_fit: f64) -> OpenFieldComparison {
    let module_area = M2_PER_HECTARE / pair.ph_av;
    let capital = (econ.kappa * econ.c_m_pv + econ.c_l() * pair.ph_av) * module_area;
    let annual_energy = pair.yy_av * module_area;
    let tariff = econ.fit_pv + delta_fit;
    let q = (1.0 - econ.depreciation) / (1.0 + econ.discount);
    let mut factor = 1.0;
    let (mut av, mut open) = (-capital, 0.0);
    for _ in 0..econ.lifetime_years {
        factor *= q;
        av += factor * (tariff * annual_energy + pair.p_c);
        open += factor * pair.p_c_open;
    }
    OpenFieldComparison {
        av_total: av,
        open_total: open,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityResult {
    pub rho: f64,
    /// `rho + delta_fit / beta`.
    pub rho_effective: f64,
    pub kappa: f64,
    pub beta: f64,
    pub chi: f64,
    pub p_c_norm: f64,
    pub c_l_norm: f64,
    /// `None` when there is no open-field profit to normalize with.
    pub psi: Option<f64>,
    pub y_par: f64,
    pub y_pv: f64,
    pub delta_fit: f64,
    pub delta_fit_th: f64,
    /// `100·ΔFIT_th / FIT_PV`.
    pub delta_fit_th_percent: f64,
    pub feasible_vs_gmpv: bool,
    pub feasible_vs_open: bool,
}

pub fn feasibility(pair: &SystemPair, econ: &EconParams, delta_fit: f64) -> FeasibilityResult {
    let chi = econ.chi();
    let t = normalized_terms(pair, econ);
    let rho = t.p_c_norm - t.c_l_norm + pair.y_pv;
    let beta = beta(pair, econ);
    let rho_effective = rho + delta_fit / beta;
    let delta_fit_th = (beta * (econ.kappa - rho)).max(0.0);
    let open = open_field_comparison(pair, econ, delta_fit);
    FeasibilityResult {
        rho,
        rho_effective,
        kappa: econ.kappa,
        beta,
        chi,
        p_c_norm: t.p_c_norm,
        c_l_norm: t.c_l_norm,
        psi: psi(pair, econ, delta_fit).ok(),
        y_par: pair.y_par(),
        y_pv: pair.y_pv,
        delta_fit,
        delta_fit_th,
        delta_fit_th_percent: if econ.fit_pv > 0.0 {
            100.0 * delta_fit_th / econ.fit_pv
        } else {
            f64::INFINITY
        },
        feasible_vs_gmpv: econ.kappa <= rho_effective,
        feasible_vs_open: open.av_total >= open.open_total,
    }
}
