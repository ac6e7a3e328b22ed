//! Closed-form Nash equilibria of the decentralized mechanism, social costs
//! and selection of a profile on the equilibrium set.
//!
//! Under proportional allocation the mixed types are tied together by one
//! linear equation in energy units: a deviator of type `t` who plays day
//! sees demand `E_t + (N-1) * sum r*E*p`, and indifference requires that
//! demand to hit `RE (gamma-1)/(gamma - eps_t beta)`. Under equal sharing
//! the equation is in competitor counts and the equilibrium is found by
//! water-filling over the critical count of each type.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ConsumerType, Scenario, StrategyProfile, TariffSet, TypeId};
use crate::policies::{es_allocation, Policy};

/// Relative tolerance of the mixed-equilibrium existence test.
pub const EXISTENCE_TOL: f64 = 1e-6;

/// Which regime produced an equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NeCase {
    /// Renewables cover the whole community; everyone plays day.
    Case1AllDay,
    /// Only pure strategies, every type at day.
    DominantDay,
    /// Only pure strategies, at least one type at night.
    DominantNight,
    /// At least one type mixes.
    Mixed,
    /// The existence condition fails. Only used in reports.
    NoEquilibrium,
}

impl NeCase {
    pub fn as_str(&self) -> &'static str {
        match self {
            NeCase::Case1AllDay => "case1_all_day",
            NeCase::DominantDay => "dominant_day",
            NeCase::DominantNight => "dominant_night",
            NeCase::Mixed => "mixed",
            NeCase::NoEquilibrium => "no_equilibrium",
        }
    }
}

impl fmt::Display for NeCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Equilibrium value of one type's day probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Resolution {
    Fixed(f64),
    Mixed { min: f64, max: f64 },
}

impl Resolution {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Resolution::Fixed(v) => (v, v),
            Resolution::Mixed { min, max } => (min, max),
        }
    }

    pub fn is_mixed(&self) -> bool {
        matches!(self, Resolution::Mixed { .. })
    }
}

/// `sum coefficients[t] * p[t] = rhs`; zero coefficients for types outside
/// the mixed set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearConstraint {
    pub coefficients: Vec<f64>,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn evaluate(&self, p: &StrategyProfile) -> f64 {
        self.coefficients
            .iter()
            .zip(p.as_slice())
            .map(|(c, x)| c * x)
            .sum()
    }

    /// Relative residual of `p`, scaled by the magnitude of the terms.
    pub fn residual(&self, p: &StrategyProfile) -> f64 {
        let scale = self
            .rhs
            .abs()
            .max(self.coefficients.iter().map(|c| c.abs()).sum());
        (self.evaluate(p) - self.rhs).abs() / scale.max(f64::MIN_POSITIVE)
    }
}

/// Equilibrium set of the decentralized game.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NESolution {
    pub policy: Policy,
    pub case: NeCase,
    pub resolutions: Vec<Resolution>,
    /// Present when at least one type mixes.
    pub constraint: Option<LinearConstraint>,
    /// Smallest and largest expected day demand over the equilibrium set.
    /// Equal under proportional allocation.
    pub day_demand_range: (f64, f64),
}

impl NESolution {
    /// Expected day demand at equilibrium (midpoint of the range, exact
    /// under proportional allocation).
    pub fn day_demand_ne(&self) -> f64 {
        0.5 * (self.day_demand_range.0 + self.day_demand_range.1)
    }

    pub fn mixed_types(&self) -> Vec<TypeId> {
        self.resolutions
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_mixed())
            .map(|(i, _)| i)
            .collect()
    }

    /// Whether `p` lies on the equilibrium set within `tol`.
    pub fn contains(&self, p: &StrategyProfile, tol: f64) -> bool {
        if p.len() != self.resolutions.len() {
            return false;
        }
        let boxed = self.resolutions.iter().zip(p.as_slice()).all(|(r, &x)| {
            let (lo, hi) = r.bounds();
            x >= lo - tol && x <= hi + tol
        });
        boxed
            && self
                .constraint
                .as_ref()
                .is_none_or(|c| c.residual(p) <= tol)
    }
}

/// Cost split of one profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub res_cost: f64,
    pub day_grid_cost: f64,
    pub night_cost: f64,
    pub total: f64,
    pub served_by_res: f64,
    pub day_grid_energy: f64,
    pub night_energy: f64,
}

impl CostBreakdown {
    fn assemble(tr: &TariffSet, served: f64, day_grid: f64, night: f64) -> Self {
        let res_cost = served * tr.c_res;
        let day_grid_cost = day_grid * tr.day_grid_price();
        let night_cost = night * tr.night_price();
        CostBreakdown {
            res_cost,
            day_grid_cost,
            night_cost,
            total: res_cost + day_grid_cost + night_cost,
            served_by_res: served,
            day_grid_energy: day_grid,
            night_energy: night,
        }
    }
}

/// Profile selector on the equilibrium set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Selector {
    WorstCost,
    BestCost,
    Midpoint,
}

impl FromStr for Selector {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "worst" | "worst_cost" => Ok(Selector::WorstCost),
            "best" | "best_cost" => Ok(Selector::BestCost),
            "midpoint" | "mid" => Ok(Selector::Midpoint),
            other => Err(format!(
                "unknown selector `{other}` (expected worst, best or midpoint)"
            )),
        }
    }
}

/// Renewable energy a type must receive to be indifferent between day and
/// night: `(gamma - eps*beta)/(gamma - 1) * E`. Negative for dominant-day
/// types.
pub fn ne_target_allocation(t: &ConsumerType, tariffs: &TariffSet) -> f64 {
    tariffs.indifference_fraction(t.inv_risk) * t.day_demand
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

fn case_of(resolutions: &[Resolution], case1: bool) -> NeCase {
    if resolutions.iter().any(Resolution::is_mixed) {
        NeCase::Mixed
    } else if resolutions.contains(&Resolution::Fixed(0.0)) {
        NeCase::DominantNight
    } else if case1 {
        NeCase::Case1AllDay
    } else {
        NeCase::DominantDay
    }
}

/// Coordinate bounds of `{sum w_i p_i = rhs, 0 <= p <= 1}` for the listed
/// types, with `rhs` strictly inside the reachable range.
fn projected_bounds(weights: &[(TypeId, f64)], rhs: f64) -> Vec<(TypeId, f64, f64)> {
    let total: f64 = weights.iter().map(|(_, w)| w).sum();
    weights
        .iter()
        .map(|&(i, w)| {
            let lo = ((rhs - (total - w)) / w).clamp(0.0, 1.0);
            let hi = (rhs / w).clamp(0.0, 1.0);
            (i, lo, hi)
        })
        .collect()
}

/// Fractional knapsack over `{sum w_i p_i = rhs, 0 <= p <= 1}`: fills types
/// in the given order. Returns `(type, p)` pairs.
fn greedy_fill(order: &[(TypeId, f64)], rhs: f64) -> Vec<(TypeId, f64)> {
    let mut budget = rhs.max(0.0);
    order
        .iter()
        .map(|&(i, w)| {
            let p = if budget <= 0.0 {
                0.0
            } else {
                (budget / w).min(1.0)
            };
            budget -= p * w;
            (i, p)
        })
        .collect()
}

fn energy_range(s: &Scenario, fixed_day: f64, weights: &[(TypeId, f64)], rhs: f64) -> (f64, f64) {
    // Maximise / minimise sum N r E p over the constraint; ratio is E / w * N r.
    let value = |i: TypeId, w: f64| s.population(i) * s.types()[i].day_demand / w;
    let mut order: Vec<(TypeId, f64)> = weights.to_vec();
    order.sort_by(|a, b| {
        value(b.0, b.1)
            .total_cmp(&value(a.0, a.1))
            .then(a.0.cmp(&b.0))
    });
    let energy = |fill: Vec<(TypeId, f64)>| {
        fill.into_iter()
            .map(|(i, p)| s.population(i) * s.types()[i].day_demand * p)
            .sum::<f64>()
    };
    let hi = energy(greedy_fill(&order, rhs));
    order.reverse();
    let lo = energy(greedy_fill(&order, rhs));
    (fixed_day + lo, fixed_day + hi)
}

/// Equilibrium under proportional allocation.
pub fn solve_ne_pa(s: &Scenario) -> Result<NESolution> {
    let m = s.num_types();
    let total = s.total_day_demand(None)?;
    if s.res_capacity() >= total {
        return Ok(NESolution {
            policy: Policy::Proportional,
            case: NeCase::Case1AllDay,
            resolutions: vec![Resolution::Fixed(1.0); m],
            constraint: None,
            day_demand_range: (total, total),
        });
    }

    let part = s.partition_types();
    let mut resolutions = vec![Resolution::Fixed(0.0); m];
    for &i in &part.sigma1 {
        resolutions[i] = Resolution::Fixed(1.0);
    }
    let n = s.n();
    let sigma1_demand = s.total_day_demand(Some(&part.sigma1))?;
    let mut constraint = None;
    let mut day = sigma1_demand;

    if !part.sigma22.is_empty() {
        let levels: Vec<f64> = part
            .sigma22
            .iter()
            .map(|&i| s.indifference_demand(i) - s.types()[i].day_demand)
            .collect();
        for (k, &lvl) in levels.iter().enumerate().skip(1) {
            if !rel_close(levels[0], lvl, EXISTENCE_TOL) {
                return Err(Error::NoEquilibrium {
                    first: part.sigma22[0],
                    second: part.sigma22[k],
                    lhs: levels[0],
                    rhs: lvl,
                });
            }
        }
        let level = levels.iter().sum::<f64>() / levels.len() as f64;
        let scale = (n - 1.0) / n;
        let rhs = level - scale * sigma1_demand;
        let weights: Vec<(TypeId, f64)> = part
            .sigma22
            .iter()
            .map(|&i| (i, (n - 1.0) * s.types()[i].share * s.types()[i].day_demand))
            .collect();
        let reach: f64 = weights.iter().map(|(_, w)| w).sum();
        if rhs <= 0.0 {
            // Dominant-day load alone already pushes every mixed type to night.
        } else if rhs >= reach {
            for &(i, _) in &weights {
                resolutions[i] = Resolution::Fixed(1.0);
            }
            day += reach / scale;
        } else {
            for (i, lo, hi) in projected_bounds(&weights, rhs) {
                resolutions[i] = Resolution::Mixed { min: lo, max: hi };
            }
            let mut coefficients = vec![0.0; m];
            for &(i, w) in &weights {
                coefficients[i] = w;
            }
            constraint = Some(LinearConstraint { coefficients, rhs });
            day += rhs / scale;
        }
    }

    Ok(NESolution {
        policy: Policy::Proportional,
        case: case_of(&resolutions, false),
        resolutions,
        constraint,
        day_demand_range: (day, day),
    })
}

/// Competitor count at which a type is indifferent under equal sharing,
/// `RE (gamma-1) / (E (gamma - eps beta))`; infinite for dominant-day types.
pub fn es_critical_count(s: &Scenario, id: TypeId) -> f64 {
    let t = &s.types()[id];
    let a = s.tariffs().indifference_fraction(t.inv_risk);
    if a <= 0.0 {
        f64::INFINITY
    } else {
        s.res_capacity() / (a * t.day_demand)
    }
}

/// Equilibrium under equal sharing.
///
/// A consumer prefers day exactly when the expected competitor count is at
/// most its critical count. Types are admitted in decreasing critical count
/// until the count is reached; a group of types with equal critical counts
/// at the margin mixes along `sum N r p = C - admitted`.
pub fn solve_ne_es(s: &Scenario) -> Result<NESolution> {
    let m = s.num_types();
    let total = s.total_day_demand(None)?;
    let case1 = s.res_capacity() >= total;
    let part = s.partition_types();
    let ratio = s.tariffs().dominance_ratio();

    let mut resolutions = vec![Resolution::Fixed(0.0); m];
    let mut admitted = 0.0;
    let mut free: Vec<(TypeId, f64)> = Vec::new();
    for t in s.types() {
        if t.inv_risk >= ratio {
            resolutions[t.index] = Resolution::Fixed(1.0);
            admitted += s.population(t.index);
        } else if !part.sigma21.contains(&t.index) {
            free.push((t.index, es_critical_count(s, t.index)));
        }
    }
    free.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut constraint = None;
    let mut k = 0;
    while k < free.len() {
        let crit = free[k].1;
        let mut end = k + 1;
        while end < free.len() && rel_close(free[end].1, crit, EXISTENCE_TOL) {
            end += 1;
        }
        let group: Vec<(TypeId, f64)> = free[k..end]
            .iter()
            .map(|&(i, _)| (i, s.population(i)))
            .collect();
        let weight: f64 = group.iter().map(|(_, w)| w).sum();
        if admitted >= crit {
            break;
        } else if admitted + weight <= crit {
            for &(i, _) in &group {
                resolutions[i] = Resolution::Fixed(1.0);
            }
            admitted += weight;
        } else {
            let rhs = crit - admitted;
            for (i, lo, hi) in projected_bounds(&group, rhs) {
                resolutions[i] = Resolution::Mixed { min: lo, max: hi };
            }
            let mut coefficients = vec![0.0; m];
            for &(i, w) in &group {
                coefficients[i] = w;
            }
            constraint = Some(LinearConstraint { coefficients, rhs });
            break;
        }
        k = end;
    }

    let fixed_day: f64 = resolutions
        .iter()
        .enumerate()
        .filter_map(|(i, r)| match r {
            Resolution::Fixed(v) => Some(s.population(i) * s.types()[i].day_demand * v),
            _ => None,
        })
        .sum();
    let day_demand_range = match &constraint {
        None => (fixed_day, fixed_day),
        Some(c) => {
            let weights: Vec<(TypeId, f64)> = c
                .coefficients
                .iter()
                .enumerate()
                .filter(|(_, &w)| w > 0.0)
                .map(|(i, &w)| (i, w))
                .collect();
            energy_range(s, fixed_day, &weights, c.rhs)
        }
    };

    Ok(NESolution {
        policy: Policy::EqualSharing,
        case: case_of(&resolutions, case1),
        resolutions,
        constraint,
        day_demand_range,
    })
}

pub fn solve_ne(policy: Policy, s: &Scenario) -> Result<NESolution> {
    match policy {
        Policy::Proportional => solve_ne_pa(s),
        Policy::EqualSharing => solve_ne_es(s),
    }
}

/// Social cost under proportional allocation.
///
/// # Panics
/// If the profile length differs from the number of types.
pub fn social_cost_pa(s: &Scenario, p: &StrategyProfile) -> CostBreakdown {
    assert_eq!(p.len(), s.num_types(), "profile length mismatch");
    let (day, night) = s.expected_demands(p);
    let re = s.res_capacity();
    CostBreakdown::assemble(s.tariffs(), re.min(day), (day - re).max(0.0), night)
}

/// Social cost under equal sharing. Demand above the fair share is bought
/// from the grid at the day price.
///
/// # Panics
/// If the profile length differs from the number of types.
pub fn social_cost_es(s: &Scenario, p: &StrategyProfile) -> CostBreakdown {
    assert_eq!(p.len(), s.num_types(), "profile length mismatch");
    let (day, night) = s.expected_demands(p);
    let served = match es_allocation(s, p) {
        Ok(a) => a.served_by_res,
        Err(_) => 0.0,
    };
    CostBreakdown::assemble(s.tariffs(), served, (day - served).max(0.0), night)
}

pub fn social_cost(policy: Policy, s: &Scenario, p: &StrategyProfile) -> CostBreakdown {
    match policy {
        Policy::Proportional => social_cost_pa(s, p),
        Policy::EqualSharing => social_cost_es(s, p),
    }
}

/// Expected `(day, night)` cost of a single consumer of type `id` who
/// deviates to a pure strategy while everyone else plays `p`, in the
/// mean-field model.
pub fn deviator_costs(policy: Policy, s: &Scenario, p: &StrategyProfile, id: TypeId) -> (f64, f64) {
    let t = &s.types()[id];
    let tr = s.tariffs();
    let n = s.n();
    let re = s.res_capacity();
    let res = match policy {
        Policy::Proportional => {
            let others: f64 = s
                .types()
                .iter()
                .zip(p.as_slice())
                .map(|(u, &x)| u.share * u.day_demand * x)
                .sum();
            let demand = t.day_demand + (n - 1.0) * others;
            t.day_demand * re / re.max(demand)
        }
        Policy::EqualSharing => {
            let count = s.expected_competitors(p).max(1.0);
            t.day_demand.min(re / count)
        }
    };
    let day = res * tr.c_res + (t.day_demand - res) * tr.day_grid_price();
    (day, t.flexible_load() * tr.night_price())
}

/// Marginal social cost of raising one type's day probability on the
/// equilibrium set, where aggregate day demand (proportional) or the
/// competitor count (equal sharing) is constant along the constraint.
fn cost_slope(sol: &NESolution, s: &Scenario, id: TypeId) -> f64 {
    let t = &s.types()[id];
    let tr = s.tariffs();
    let pop = s.population(id);
    let night = -pop * t.flexible_load() * tr.night_price();
    match sol.policy {
        Policy::Proportional => night,
        Policy::EqualSharing => {
            let count = sol.constraint.as_ref().map_or(0.0, |c| c.rhs) + fixed_count(sol, s);
            let sh = if count > 0.0 {
                s.res_capacity() / count
            } else {
                f64::INFINITY
            };
            let res = t.day_demand.min(sh);
            pop * (res * tr.c_res + (t.day_demand - res) * tr.day_grid_price()) + night
        }
    }
}

fn fixed_count(sol: &NESolution, s: &Scenario) -> f64 {
    sol.resolutions
        .iter()
        .enumerate()
        .filter_map(|(i, r)| match r {
            Resolution::Fixed(v) => Some(s.population(i) * v),
            _ => None,
        })
        .sum()
}

/// Picks one profile on the equilibrium set.
///
/// `WorstCost` and `BestCost` solve the linear program over the constraint
/// by greedy filling (ties by type index); `Midpoint` projects the centre of
/// the bound box onto the constraint.
pub fn select_ne_profile(
    sol: &NESolution,
    s: &Scenario,
    selector: Selector,
) -> Result<StrategyProfile> {
    if sol.case == NeCase::NoEquilibrium {
        return Err(Error::InvalidProfile(
            "cannot select a profile from a solution without equilibrium".into(),
        ));
    }
    if sol.resolutions.len() != s.num_types() {
        return Err(Error::InvalidProfile(format!(
            "solution has {} types, scenario has {}",
            sol.resolutions.len(),
            s.num_types()
        )));
    }
    let mut p: Vec<f64> = sol.resolutions.iter().map(|r| r.bounds().0).collect();
    let Some(c) = &sol.constraint else {
        return StrategyProfile::new(p);
    };
    let weights: Vec<(TypeId, f64)> = sol
        .mixed_types()
        .into_iter()
        .map(|i| (i, c.coefficients[i]))
        .collect();

    match selector {
        Selector::WorstCost | Selector::BestCost => {
            let mut order: Vec<(TypeId, f64, f64)> = weights
                .iter()
                .map(|&(i, w)| (i, w, cost_slope(sol, s, i) / w))
                .collect();
            if selector == Selector::WorstCost {
                order.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
            } else {
                order.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));
            }
            let order: Vec<(TypeId, f64)> = order.into_iter().map(|(i, w, _)| (i, w)).collect();
            for (i, x) in greedy_fill(&order, c.rhs) {
                p[i] = x;
            }
        }
        Selector::Midpoint => {
            let boxes: Vec<(TypeId, f64, f64, f64)> = weights
                .iter()
                .map(|&(i, w)| {
                    let (lo, hi) = sol.resolutions[i].bounds();
                    (i, w, lo, hi)
                })
                .collect();
            let at = |mu: f64| -> f64 {
                boxes
                    .iter()
                    .map(|&(_, w, lo, hi)| w * (0.5 * (lo + hi) + mu * w).clamp(lo, hi))
                    .sum()
            };
            let reach_lo: f64 = boxes.iter().map(|b| b.1 * b.2).sum();
            let reach_hi: f64 = boxes.iter().map(|b| b.1 * b.3).sum();
            let target = c.rhs.clamp(reach_lo, reach_hi);
            let wmin = boxes.iter().map(|b| b.1).fold(f64::INFINITY, f64::min);
            let mut span = 1.0 / (wmin * wmin);
            let (mut lo_mu, mut hi_mu) = (-span, span);
            while (at(lo_mu) > target || at(hi_mu) < target) && span < f64::MAX / 4.0 {
                span *= 2.0;
                lo_mu = -span;
                hi_mu = span;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo_mu + hi_mu);
                if at(mid) < target {
                    lo_mu = mid;
                } else {
                    hi_mu = mid;
                }
            }
            let mu = 0.5 * (lo_mu + hi_mu);
            for &(i, w, lo, hi) in &boxes {
                p[i] = (0.5 * (lo + hi) + mu * w).clamp(lo, hi);
            }
        }
    }
    Ok(StrategyProfile::clamped(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{five_type, two_type, two_type_literal};
    use approx::assert_relative_eq;

    fn tariffs(c: f64, beta: f64, gamma: f64) -> TariffSet {
        TariffSet::new(c, beta, gamma).unwrap()
    }

    #[test]
    fn target_allocation_examples() {
        let tr = tariffs(100.0, 2.0, 4.0);
        let t = |e: f64, eps: f64| ConsumerType {
            index: 0,
            day_demand: e,
            inv_risk: eps,
            share: 1.0,
        };
        assert_relative_eq!(ne_target_allocation(&t(100.0, 1.0), &tr), 200.0 / 3.0);
        assert_eq!(ne_target_allocation(&t(100.0, 2.0), &tr), 0.0);
        assert_relative_eq!(
            ne_target_allocation(&t(2.0, 1.0), &tariffs(1.0, 2.0, 3.0)),
            1.0
        );
    }

    #[test]
    fn pa_two_type_equilibrium() {
        let s = two_type();
        let sol = solve_ne_pa(&s).unwrap();
        assert_eq!(sol.case, NeCase::Mixed);
        assert_eq!(sol.mixed_types(), vec![0, 1]);
        assert_relative_eq!(
            sol.day_demand_ne(),
            500.0 / 499.0 * 24275.0,
            max_relative = 1e-12
        );
        assert!((sol.day_demand_ne() - 24323.6).abs() < 0.1);
        let c = sol.constraint.as_ref().unwrap();
        assert_relative_eq!(c.rhs, 24275.0, max_relative = 1e-12);
        assert_relative_eq!(c.coefficients[0], 499.0 * 70.0);
    }

    #[test]
    fn pa_rounded_epsilon_has_no_equilibrium() {
        let err = solve_ne_pa(&two_type_literal()).unwrap_err();
        assert!(matches!(
            err,
            Error::NoEquilibrium {
                first: 0,
                second: 1,
                ..
            }
        ));
    }

    #[test]
    fn pa_case1_and_dominance() {
        let s = two_type().with_res_capacity(70000.0).unwrap();
        let sol = solve_ne_pa(&s).unwrap();
        assert_eq!(sol.case, NeCase::Case1AllDay);
        assert_eq!(sol.resolutions, vec![Resolution::Fixed(1.0); 2]);
        assert_eq!(sol.day_demand_ne(), 65000.0);

        let s = Scenario::build(
            10,
            tariffs(1.0, 2.0, 3.0),
            5.0,
            &[(1.0, 0.5, 2.0), (2.0, 0.5, 2.0)],
        )
        .unwrap();
        let sol = solve_ne_pa(&s).unwrap();
        assert_eq!(sol.case, NeCase::DominantDay);
        assert_eq!(sol.resolutions, vec![Resolution::Fixed(1.0); 2]);
    }

    #[test]
    fn pa_equal_risk_unequal_demand_has_no_equilibrium() {
        let s = Scenario::build(
            500,
            tariffs(100.0, 2.0, 4.0),
            16250.0,
            &[(100.0, 0.7, 1.0), (200.0, 0.3, 1.0)],
        )
        .unwrap();
        assert!(matches!(solve_ne_pa(&s), Err(Error::NoEquilibrium { .. })));
    }

    #[test]
    fn pa_saturation_below_and_above() {
        // Dominant-day load exceeds the mixed type's threshold: it goes to night.
        let s = Scenario::build(
            100,
            tariffs(1.0, 2.0, 3.0),
            100.0,
            &[(1.0, 0.5, 1.0), (10.0, 0.5, 1.6)],
        )
        .unwrap();
        let sol = solve_ne_pa(&s).unwrap();
        assert_eq!(
            sol.resolutions,
            vec![Resolution::Fixed(0.0), Resolution::Fixed(1.0)]
        );
        assert_eq!(sol.case, NeCase::DominantNight);
        assert_eq!(sol.day_demand_ne(), 500.0);
    }

    #[test]
    fn pa_bounds_against_published_form() {
        let s = two_type();
        let sol = solve_ne_pa(&s).unwrap();
        let n = s.n();
        for (i, t) in s.types().iter().enumerate() {
            let (_, hi) = sol.resolutions[i].bounds();
            let published = (s.indifference_demand(i) / (n * t.share * t.day_demand)).min(1.0);
            // Closed-form gap between the N- and (N-1)-weighted forms.
            let gap = (n * t.day_demand - s.indifference_demand(i))
                / (n * (n - 1.0) * t.share * t.day_demand);
            assert_relative_eq!(published - hi, gap, max_relative = 1e-9);
            if i == 0 {
                assert!((published - hi).abs() / hi <= 2.0 / n);
            }
        }
    }

    #[test]
    fn midpoint_single_calibrated_type() {
        let s = Scenario::build(
            2405,
            tariffs(3.3149515218146703, 2.936917202834982, 3.9863667107521863),
            10236.9680678843,
            &[(20.993979173570157, 1.0, 1.0)],
        )
        .unwrap()
        .with_calibration(crate::model::EpsilonCalibration {
            base_type: 0,
            base_epsilon: 1.0,
        })
        .unwrap();
        let sol = solve_ne_pa(&s).unwrap();
        let p = select_ne_profile(&sol, &s, Selector::Midpoint).unwrap();
        assert!(sol.contains(&p, 1e-9));
    }

    #[test]
    fn pa_cost_equalization_at_selected_profiles() {
        let s = two_type();
        let sol = solve_ne_pa(&s).unwrap();
        for sel in [Selector::WorstCost, Selector::BestCost, Selector::Midpoint] {
            let p = select_ne_profile(&sol, &s, sel).unwrap();
            assert!(sol.contains(&p, 1e-9));
            for i in sol.mixed_types() {
                let (day, night) = deviator_costs(Policy::Proportional, &s, &p, i);
                assert_relative_eq!(day, night, max_relative = 1e-9);
            }
            let (d, _) = s.expected_demands(&p);
            assert_relative_eq!(d, sol.day_demand_ne(), max_relative = 1e-9);
        }
    }

    #[test]
    fn worst_and_best_two_type_costs() {
        let s = two_type();
        let sol = solve_ne_pa(&s).unwrap();
        let worst = select_ne_profile(&sol, &s, Selector::WorstCost).unwrap();
        let best = select_ne_profile(&sol, &s, Selector::BestCost).unwrap();
        // Worst fills the lower-eps type first.
        assert_eq!(worst.day(1), 0.0);
        assert_eq!(best.day(0), 0.0);
        let cw = social_cost_pa(&s, &worst).total;
        let cb = social_cost_pa(&s, &best).total;
        assert!(cw >= cb);
        assert!((cw / 13.0e6 - 1.0).abs() < 0.01);
        assert!((cb / 12.99e6 - 1.0).abs() < 0.001);
    }

    #[test]
    fn equal_epsilon_selectors_coincide() {
        let s = Scenario::build(
            100,
            tariffs(1.0, 2.0, 3.0),
            200.0,
            &[(2.0, 0.5, 1.0), (2.0, 0.5, 1.0)],
        )
        .unwrap();
        let sol = solve_ne_pa(&s).unwrap();
        let w = social_cost_pa(
            &s,
            &select_ne_profile(&sol, &s, Selector::WorstCost).unwrap(),
        )
        .total;
        let b = social_cost_pa(
            &s,
            &select_ne_profile(&sol, &s, Selector::BestCost).unwrap(),
        )
        .total;
        assert_relative_eq!(w, b, max_relative = 1e-12);
    }

    #[test]
    fn single_mixed_type_is_unique() {
        let s =
            Scenario::build(500, tariffs(100.0, 2.0, 4.0), 16250.0, &[(100.0, 1.0, 1.0)]).unwrap();
        let sol = solve_ne_pa(&s).unwrap();
        let ps: Vec<_> = [Selector::WorstCost, Selector::BestCost, Selector::Midpoint]
            .iter()
            .map(|&sel| select_ne_profile(&sol, &s, sel).unwrap())
            .collect();
        assert_relative_eq!(ps[0].day(0), ps[1].day(0), max_relative = 1e-12);
        assert_relative_eq!(ps[0].day(0), ps[2].day(0), max_relative = 1e-9);
    }

    #[test]
    fn es_single_type_example() {
        let s =
            Scenario::build(500, tariffs(100.0, 2.0, 4.0), 16250.0, &[(100.0, 1.0, 1.0)]).unwrap();
        let sol = solve_ne_es(&s).unwrap();
        let p = select_ne_profile(&sol, &s, Selector::WorstCost).unwrap();
        assert_relative_eq!(p.day(0), 0.4875, max_relative = 1e-12);
        let (day, night) = deviator_costs(Policy::EqualSharing, &s, &p, 0);
        assert_relative_eq!(day, night, max_relative = 1e-12);
    }

    #[test]
    fn es_case1_all_day() {
        let s = two_type().with_res_capacity(70000.0).unwrap();
        // sh at full participation is 140 >= max E, so day is dominant.
        let sol = solve_ne_es(&s).unwrap();
        assert_eq!(sol.case, NeCase::Case1AllDay);
    }

    #[test]
    fn es_unequal_critical_counts_water_fill() {
        let s = two_type();
        let sol = solve_ne_es(&s).unwrap();
        // Type 0 has the larger critical count: it is admitted first and mixes.
        assert!(es_critical_count(&s, 0) > es_critical_count(&s, 1));
        assert!(sol.resolutions[0].is_mixed());
        assert_eq!(sol.resolutions[1], Resolution::Fixed(0.0));
        let p = select_ne_profile(&sol, &s, Selector::WorstCost).unwrap();
        let (day, night) = deviator_costs(Policy::EqualSharing, &s, &p, 0);
        assert_relative_eq!(day, night, max_relative = 1e-9);
        let (day1, night1) = deviator_costs(Policy::EqualSharing, &s, &p, 1);
        assert!(day1 > night1);
    }

    #[test]
    fn social_cost_examples() {
        let s = two_type();
        let c = social_cost_pa(&s, &StrategyProfile::uniform(2, 1.0).unwrap());
        assert_relative_eq!(c.total, 2.1125e7, max_relative = 1e-12);
        assert_eq!(c.night_cost, 0.0);
        let c = social_cost_pa(
            &two_type_literal(),
            &StrategyProfile::uniform(2, 0.0).unwrap(),
        );
        assert_relative_eq!(c.total, 1.3024e7, max_relative = 1e-12);
        assert_relative_eq!(c.night_cost, c.total);

        let es = social_cost_es(&s, &StrategyProfile::uniform(2, 1.0).unwrap());
        assert_relative_eq!(es.served_by_res, 16250.0, max_relative = 1e-12);
        assert_relative_eq!(es.total, 2.1125e7, max_relative = 1e-12);
    }

    #[test]
    fn capacity_boundary_has_no_grid_cost() {
        let s = two_type().with_res_capacity(65000.0).unwrap();
        let c = social_cost_pa(&s, &StrategyProfile::uniform(2, 1.0).unwrap());
        assert_eq!(c.day_grid_cost, 0.0);
    }

    #[test]
    fn es_matches_pa_without_rationing() {
        let s = two_type().with_res_capacity(200000.0).unwrap();
        let p = StrategyProfile::new(vec![0.3, 0.8]).unwrap();
        assert_eq!(social_cost_es(&s, &p), social_cost_pa(&s, &p));
    }

    #[test]
    fn es_costlier_than_pa_on_witness() {
        let s = Scenario::build(
            10,
            tariffs(1.0, 2.0, 3.0),
            30.0,
            &[(1.0, 0.5, 1.0), (10.0, 0.5, 1.0)],
        )
        .unwrap();
        let p = StrategyProfile::uniform(2, 1.0).unwrap();
        assert!(social_cost_es(&s, &p).total > social_cost_pa(&s, &p).total);
    }

    #[test]
    fn five_type_half_capacity_poa_components() {
        let s = five_type(2.0, 0.5);
        let sol = solve_ne_pa(&s).unwrap();
        let p = select_ne_profile(&sol, &s, Selector::WorstCost).unwrap();
        assert!((social_cost_pa(&s, &p).total - 8500.0).abs() < 5.0);
    }

    #[test]
    fn price_scaling_leaves_solution_unchanged() {
        let s = two_type();
        let scaled = s.with_tariffs(s.tariffs().scaled(3.0)).unwrap();
        assert_eq!(solve_ne_pa(&s).unwrap(), solve_ne_pa(&scaled).unwrap());
    }
}
