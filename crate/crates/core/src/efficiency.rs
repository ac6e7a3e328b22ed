//! Price of Anarchy: worst equilibrium cost over the centralized optimum.

use rayon::prelude::*;
use serde::Serialize;

use crate::central::{solve_central_es_seeded, solve_central_pa, CentralConfig};
use crate::equilibrium::{select_ne_profile, social_cost, solve_ne, NeCase, Selector};
use crate::error::Result;
use crate::model::{Scenario, StrategyProfile};
use crate::policies::Policy;

/// Efficiency comparison of one scenario under one policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoAReport {
    pub policy: Policy,
    pub ne_case: NeCase,
    pub worst_ne_cost: f64,
    pub best_ne_cost: f64,
    pub central_cost: f64,
    pub poa: f64,
    pub worst_profile: StrategyProfile,
    pub central_profile: StrategyProfile,
    /// Expected day demand at the worst equilibrium profile.
    pub ne_day_demand: f64,
}

/// [`compute_poa_with`] using the default search configuration.
pub fn compute_poa(s: &Scenario, policy: Policy) -> Result<PoAReport> {
    compute_poa_with(s, policy, &CentralConfig::default())
}

/// Solves both mechanisms and assembles the report. Equal-sharing central
/// search is also seeded with the equilibrium profiles.
pub fn compute_poa_with(s: &Scenario, policy: Policy, cfg: &CentralConfig) -> Result<PoAReport> {
    let sol = solve_ne(policy, s)?;
    let worst = select_ne_profile(&sol, s, Selector::WorstCost)?;
    let best = select_ne_profile(&sol, s, Selector::BestCost)?;
    let worst_cost = social_cost(policy, s, &worst).total;
    let best_cost = social_cost(policy, s, &best).total;
    let central = match policy {
        Policy::Proportional => solve_central_pa(s),
        Policy::EqualSharing => solve_central_es_seeded(s, cfg, &[worst.clone(), best.clone()]),
    };
    let (ne_day_demand, _) = s.expected_demands(&worst);
    Ok(PoAReport {
        policy,
        ne_case: sol.case,
        worst_ne_cost: worst_cost.max(best_cost),
        best_ne_cost: worst_cost.min(best_cost),
        central_cost: central.cost.total,
        poa: worst_cost.max(best_cost) / central.cost.total,
        worst_profile: worst,
        central_profile: central.profile,
        ne_day_demand,
    })
}

/// One point of a capacity sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub re_ratio: f64,
    pub res_capacity: f64,
    pub report: Result<PoAReport>,
}

/// PoA for each `RE = ratio * D_total`. An attached calibration is redone
/// at every point; failures are kept per point.
pub fn poa_curve(s: &Scenario, re_ratios: &[f64], policy: Policy) -> Vec<CurvePoint> {
    poa_curve_with(s, re_ratios, policy, &CentralConfig::default())
}

pub fn poa_curve_with(
    s: &Scenario,
    re_ratios: &[f64],
    policy: Policy,
    cfg: &CentralConfig,
) -> Vec<CurvePoint> {
    let total: f64 = s.n()
        * s.types()
            .iter()
            .map(|t| t.share * t.day_demand)
            .sum::<f64>();
    re_ratios
        .par_iter()
        .map(|&ratio| {
            let re = ratio * total;
            let report = s
                .with_res_capacity(re)
                .and_then(|sc| compute_poa_with(&sc, policy, cfg));
            CurvePoint {
                re_ratio: ratio,
                res_capacity: re,
                report,
            }
        })
        .collect()
}

/// Evenly spaced ratios `start, start+step, ..., <= stop`, rounded to
/// the step's decimal precision to avoid drift.
pub fn ratio_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    if step.is_nan() || step <= 0.0 || stop < start {
        return Vec::new();
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|k| {
            let x = start + k as f64 * step;
            (x * 1e12).round() / 1e12
        })
        .collect()
}
