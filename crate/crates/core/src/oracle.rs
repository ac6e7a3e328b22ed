//! Brute-force checks on small populations: exact finite-N expected costs by
//! binomial enumeration, equilibrium verification by deviation, and
//! exhaustive grid search of the central problem.

use crate::equilibrium::social_cost;
use crate::error::{Error, Result};
use crate::model::{Scenario, StrategyProfile, TypeId};
use crate::policies::Policy;

/// Largest population the enumeration accepts.
pub const MAX_POPULATION: u64 = 12;
/// Largest number of types accepted by [`grid_search_central`].
pub const MAX_GRID_TYPES: usize = 3;
/// Largest per-axis resolution accepted by [`grid_search_central`].
pub const MAX_GRID_RESOLUTION: usize = 201;

/// Scenario with integral type populations and `N <= 12`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallScenario {
    scenario: Scenario,
    counts: Vec<u64>,
}

impl SmallScenario {
    pub fn new(scenario: Scenario) -> Result<Self> {
        if scenario.n_consumers() > MAX_POPULATION {
            return Err(Error::EnumerationBound(format!(
                "population {} exceeds {MAX_POPULATION}",
                scenario.n_consumers()
            )));
        }
        let mut counts = Vec::with_capacity(scenario.num_types());
        for t in scenario.types() {
            let c = scenario.n() * t.share;
            if (c - c.round()).abs() > 1e-9 {
                return Err(Error::validation(
                    format!("types[{}].share", t.index),
                    format!("population {c} is not an integer"),
                ));
            }
            counts.push(c.round() as u64);
        }
        Ok(SmallScenario { scenario, counts })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut choose = 1.0;
    for k in 0..=n {
        if k > 0 {
            choose = choose * (n - k + 1) as f64 / k as f64;
        }
        out.push(choose * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32));
    }
    out
}

/// Exact expected `(day, night)` cost of one consumer of `type_id` playing
/// each pure strategy while the other `N - 1` consumers mix according to
/// `p`. The allocation is recomputed for every realized set of day
/// competitors.
pub fn exact_expected_costs(
    ss: &SmallScenario,
    p: &StrategyProfile,
    type_id: TypeId,
    policy: Policy,
) -> Result<(f64, f64)> {
    let s = &ss.scenario;
    s.check_profile(p)?;
    let dev = *s.ty(type_id)?;
    if ss.counts[type_id] == 0 {
        return Err(Error::validation(
            format!("types[{type_id}].share"),
            "type has no consumers",
        ));
    }
    let tr = s.tariffs();
    let re = s.res_capacity();
    let others: Vec<u64> = ss
        .counts
        .iter()
        .enumerate()
        .map(|(i, &c)| if i == type_id { c - 1 } else { c })
        .collect();
    let pmfs: Vec<Vec<f64>> = others
        .iter()
        .zip(p.as_slice())
        .map(|(&n, &x)| binomial_pmf(n, x))
        .collect();

    let mut day = 0.0;
    let mut ks = vec![0usize; others.len()];
    loop {
        let weight: f64 = ks.iter().zip(&pmfs).map(|(&k, pmf)| pmf[k]).product();
        if weight > 0.0 {
            let res = match policy {
                Policy::Proportional => {
                    let demand = dev.day_demand
                        + ks.iter()
                            .zip(s.types())
                            .map(|(&k, t)| k as f64 * t.day_demand)
                            .sum::<f64>();
                    dev.day_demand * re / re.max(demand)
                }
                Policy::EqualSharing => {
                    let count = 1.0 + ks.iter().sum::<usize>() as f64;
                    dev.day_demand.min(re / count)
                }
            };
            day += weight * (res * tr.c_res + (dev.day_demand - res) * tr.day_grid_price());
        }
        // Odometer over the joint outcome space.
        let mut d = 0;
        while d < ks.len() {
            ks[d] += 1;
            if ks[d] as u64 <= others[d] {
                break;
            }
            ks[d] = 0;
            d += 1;
        }
        if d == ks.len() {
            break;
        }
    }
    Ok((day, dev.flexible_load() * tr.night_price()))
}

/// Largest gain any type can obtain by moving from its mixed strategy to
/// the cheaper pure strategy. At an exact finite-N equilibrium this is
/// zero up to rounding.
pub fn verify_ne_by_deviation(
    ss: &SmallScenario,
    p: &StrategyProfile,
    policy: Policy,
) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for (i, &count) in ss.counts.iter().enumerate() {
        if count == 0 {
            continue;
        }
        let (day, night) = exact_expected_costs(ss, p, i, policy)?;
        let x = p.day(i);
        let mixed = x * day + (1.0 - x) * night;
        worst = worst.max(mixed - day.min(night));
    }
    Ok(worst)
}

/// Exhaustive minimization of the social cost on a uniform grid over
/// `[0,1]^M`. The first minimizer in lexicographic order wins ties.
pub fn grid_search_central(
    s: &Scenario,
    policy: Policy,
    resolution: usize,
) -> Result<(StrategyProfile, f64)> {
    let m = s.num_types();
    if m > MAX_GRID_TYPES {
        return Err(Error::EnumerationBound(format!(
            "{m} types exceed the grid limit of {MAX_GRID_TYPES}"
        )));
    }
    if !(2..=MAX_GRID_RESOLUTION).contains(&resolution) {
        return Err(Error::EnumerationBound(format!(
            "resolution {resolution} outside [2, {MAX_GRID_RESOLUTION}]"
        )));
    }
    let step = 1.0 / (resolution - 1) as f64;
    let mut idx = vec![0usize; m];
    let mut best: Option<(Vec<f64>, f64)> = None;
    loop {
        let p: Vec<f64> = idx.iter().map(|&k| k as f64 * step).collect();
        let cost = social_cost(policy, s, &StrategyProfile::clamped(p.clone())).total;
        if best.as_ref().is_none_or(|(_, b)| cost < *b) {
            best = Some((p, cost));
        }
        // Last coordinate fastest, so iteration order is lexicographic.
        let mut d = m;
        loop {
            if d == 0 {
                let (p, c) = best.expect("grid is non-empty");
                return Ok((StrategyProfile::clamped(p), c));
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < resolution {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// Upper bound on how far the grid minimum can sit above the true minimum
/// of the proportional-allocation cost: each coordinate is within half a
/// step of a grid point and the cost moves by at most
/// `N r E (gamma + eps beta) c_res` per unit of `p`.
pub fn grid_slack(s: &Scenario, resolution: usize) -> f64 {
    let h = 1.0 / (resolution.max(2) - 1) as f64;
    let tr = s.tariffs();
    s.types()
        .iter()
        .map(|t| {
            0.5 * h * s.n() * t.share * t.day_demand * (tr.gamma + t.inv_risk * tr.beta) * tr.c_res
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::central::solve_central_pa;
    use crate::model::fixtures::two_type;
    use crate::model::TariffSet;
    use approx::assert_relative_eq;

    fn tariffs() -> TariffSet {
        TariffSet::new(1.0, 2.0, 3.0).unwrap()
    }

    #[test]
    fn two_consumer_enumeration() {
        let s = Scenario::build(2, tariffs(), 15.0, &[(10.0, 1.0, 1.0)]).unwrap();
        let ss = SmallScenario::new(s).unwrap();
        let p = StrategyProfile::new(vec![0.5]).unwrap();
        let (day, night) = exact_expected_costs(&ss, &p, 0, Policy::Proportional).unwrap();
        assert_relative_eq!(day, 12.5);
        assert_eq!(night, 20.0);
    }

    #[test]
    fn lone_competitor_cost() {
        let s = Scenario::build(4, tariffs(), 6.0, &[(10.0, 1.0, 1.0)]).unwrap();
        let ss = SmallScenario::new(s).unwrap();
        let p = StrategyProfile::new(vec![0.0]).unwrap();
        for policy in [Policy::Proportional, Policy::EqualSharing] {
            let (day, _) = exact_expected_costs(&ss, &p, 0, policy).unwrap();
            assert_relative_eq!(day, 6.0 + 4.0 * 3.0);
        }
    }

    #[test]
    fn indifferent_risk_prefers_full_renewables() {
        let s = Scenario::build(4, tariffs(), 50.0, &[(10.0, 1.0, 1.5)]).unwrap();
        let ss = SmallScenario::new(s).unwrap();
        let (day, night) = exact_expected_costs(
            &ss,
            &StrategyProfile::new(vec![0.0]).unwrap(),
            0,
            Policy::Proportional,
        )
        .unwrap();
        assert_eq!(day, 10.0);
        assert_eq!(night, 30.0);
    }

    #[test]
    fn case1_all_day_has_no_gain() {
        let s = Scenario::build(4, tariffs(), 100.0, &[(10.0, 0.5, 1.0), (5.0, 0.5, 1.2)]).unwrap();
        let ss = SmallScenario::new(s).unwrap();
        let gain = verify_ne_by_deviation(
            &ss,
            &StrategyProfile::uniform(2, 1.0).unwrap(),
            Policy::Proportional,
        )
        .unwrap();
        assert!(gain <= 0.0);
    }

    #[test]
    fn dominant_night_at_all_day_is_unstable() {
        let s = Scenario::build(4, tariffs(), 2.0, &[(10.0, 1.0, 1.0)]).unwrap();
        assert_eq!(s.partition_types().sigma21, vec![0]);
        let ss = SmallScenario::new(s).unwrap();
        let gain = verify_ne_by_deviation(
            &ss,
            &StrategyProfile::uniform(1, 1.0).unwrap(),
            Policy::Proportional,
        )
        .unwrap();
        assert!(gain > 0.0);
    }

    #[test]
    fn enumeration_bounds() {
        assert!(matches!(
            SmallScenario::new(two_type()),
            Err(Error::EnumerationBound(_))
        ));
        let s = Scenario::build(5, tariffs(), 2.0, &[(1.0, 0.5, 1.0), (2.0, 0.5, 1.0)]).unwrap();
        assert!(matches!(
            SmallScenario::new(s),
            Err(Error::Validation { .. })
        ));
        let s = Scenario::build(
            10,
            tariffs(),
            2.0,
            &[
                (1.0, 0.25, 1.0),
                (2.0, 0.25, 1.0),
                (3.0, 0.25, 1.0),
                (4.0, 0.25, 1.0),
            ],
        )
        .unwrap();
        assert!(matches!(
            grid_search_central(&s, Policy::Proportional, 11),
            Err(Error::EnumerationBound(_))
        ));
        assert!(matches!(
            grid_search_central(&two_type(), Policy::Proportional, 202),
            Err(Error::EnumerationBound(_))
        ));
    }

    #[test]
    fn grid_matches_central_on_two_types() {
        let s = two_type();
        let (_, cost) = grid_search_central(&s, Policy::Proportional, 201).unwrap();
        let central = solve_central_pa(&s).cost.total;
        assert!(cost >= central - 1e-9 * central);
        assert!(cost <= central + grid_slack(&s, 201));
    }

    #[test]
    fn grid_case1_is_all_day() {
        let s = two_type().with_res_capacity(70000.0).unwrap();
        let (p, _) = grid_search_central(&s, Policy::Proportional, 11).unwrap();
        assert_eq!(p.as_slice(), &[1.0, 1.0]);
    }
}
