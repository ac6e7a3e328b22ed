//! Centralized scheduling: the social-cost minimizing profile.
//!
//! Proportional allocation reduces to a merit-order fill; equal sharing is
//! non-convex and handled by a deterministic multi-start search.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::Serialize;

use crate::equilibrium::{social_cost_es, social_cost_pa, CostBreakdown};
use crate::model::{Scenario, StrategyProfile, TypeId};
use crate::policies::Policy;

/// Result of a centralized solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentralSolution {
    pub profile: StrategyProfile,
    /// Day energy bought from the grid.
    pub day_grid_import: f64,
    pub cost: CostBreakdown,
    /// Night price of the marginal type (`beta * c_res * eps`) when one type
    /// is dispatched fractionally.
    pub dual_threshold: Option<f64>,
    /// Distinct local optima met by the numeric search (1 for the
    /// analytic solver).
    pub local_optima: usize,
}

/// Search parameters for the equal-sharing solver.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentralConfig {
    /// Seed grid resolution per axis.
    pub grid: usize,
    /// Number of grid seeds polished.
    pub restarts: usize,
    /// Coordinate tolerance of the line searches.
    pub tol: f64,
    /// Upper bound on coordinate-descent sweeps per seed.
    pub max_sweeps: usize,
    /// Largest seed grid evaluated; the resolution is lowered to fit.
    pub max_grid_points: usize,
}

impl Default for CentralConfig {
    fn default() -> Self {
        CentralConfig {
            grid: 21,
            restarts: 16,
            tol: 1e-8,
            max_sweeps: 200,
            max_grid_points: 1 << 22,
        }
    }
}

fn finish(
    s: &Scenario,
    policy: Policy,
    profile: StrategyProfile,
    dual: Option<f64>,
    optima: usize,
) -> CentralSolution {
    let cost = match policy {
        Policy::Proportional => social_cost_pa(s, &profile),
        Policy::EqualSharing => social_cost_es(s, &profile),
    };
    let (day, _) = s.expected_demands(&profile);
    let re = s.res_capacity();
    // Rounding residue of an exact capacity fill is not an import.
    let excess = day - re;
    let import = if excess <= 1e-12 * re.max(1.0) {
        0.0
    } else {
        excess
    };
    CentralSolution {
        day_grid_import: import,
        profile,
        cost,
        dual_threshold: dual,
        local_optima: optima,
    }
}

/// Optimal schedule under proportional allocation.
///
/// Dominant-day types stay at day. The remaining capacity is handed out in
/// decreasing inverse risk-aversion (ties by index), since each kWh moved
/// to day saves `(eps*beta - 1) * c_res`.
pub fn solve_central_pa(s: &Scenario) -> CentralSolution {
    let m = s.num_types();
    let re = s.res_capacity();
    let total: f64 = s.n()
        * s.types()
            .iter()
            .map(|t| t.share * t.day_demand)
            .sum::<f64>();
    if re >= total {
        return finish(
            s,
            Policy::Proportional,
            StrategyProfile::clamped(vec![1.0; m]),
            None,
            1,
        );
    }
    let ratio = s.tariffs().dominance_ratio();
    let mut p = vec![0.0; m];
    let mut budget = re;
    let mut rest: Vec<TypeId> = Vec::new();
    for t in s.types() {
        if t.inv_risk >= ratio {
            p[t.index] = 1.0;
            budget -= s.population(t.index) * t.day_demand;
        } else {
            rest.push(t.index);
        }
    }
    rest.sort_by(|&a, &b| {
        s.types()[b]
            .inv_risk
            .total_cmp(&s.types()[a].inv_risk)
            .then(a.cmp(&b))
    });
    let mut dual = None;
    for i in rest {
        if budget <= 0.0 {
            break;
        }
        let load = s.population(i) * s.types()[i].day_demand;
        if load <= 0.0 {
            continue;
        }
        let x = (budget / load).min(1.0);
        p[i] = x;
        budget -= x * load;
        if x < 1.0 {
            dual = Some(s.tariffs().night_price() * s.types()[i].inv_risk);
            break;
        }
    }
    finish(
        s,
        Policy::Proportional,
        StrategyProfile::clamped(p),
        dual,
        1,
    )
}

/// Flat view of a scenario for fast repeated equal-sharing cost evaluation.
struct EsCost {
    n: f64,
    re: f64,
    c: f64,
    day_price: f64,
    night_price: f64,
    share: Vec<f64>,
    demand: Vec<f64>,
    flex: Vec<f64>,
}

impl EsCost {
    fn new(s: &Scenario) -> Self {
        let tr = s.tariffs();
        EsCost {
            n: s.n(),
            re: s.res_capacity(),
            c: tr.c_res,
            day_price: tr.day_grid_price(),
            night_price: tr.night_price(),
            share: s.types().iter().map(|t| t.share).collect(),
            demand: s.types().iter().map(|t| t.day_demand).collect(),
            flex: s.types().iter().map(|t| t.flexible_load()).collect(),
        }
    }

    fn total(&self, p: &[f64]) -> f64 {
        let mut count = 0.0;
        let mut day = 0.0;
        let mut night = 0.0;
        for (i, &x) in p.iter().enumerate() {
            count += self.share[i] * x;
            day += self.share[i] * x * self.demand[i];
            night += self.share[i] * (1.0 - x) * self.flex[i];
        }
        count *= self.n;
        day *= self.n;
        night *= self.n;
        let served = if count > 0.0 {
            let sh = self.re / count;
            let raw: f64 = (0..p.len())
                .map(|i| self.share[i] * p[i] * self.demand[i].min(sh))
                .sum::<f64>()
                * self.n;
            raw.min(self.re)
        } else {
            0.0
        };
        served * self.c + (day - served).max(0.0) * self.day_price + night * self.night_price
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Scored {
    cost: f64,
    index: usize,
}

impl Eq for Scored {}

impl Ord for Scored {
    fn cmp(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn decode(mut index: usize, g: usize, m: usize) -> Vec<usize> {
    let mut digits = vec![0; m];
    for d in digits.iter_mut().rev() {
        *d = index % g;
        index /= g;
    }
    digits
}

/// Seed-grid resolution actually used for `m` types.
pub fn effective_grid(cfg: &CentralConfig, m: usize) -> usize {
    let mut g = cfg.grid.max(2);
    while g > 2 && (g as f64).powi(m as i32) > cfg.max_grid_points as f64 {
        g -= 1;
    }
    g
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

/// Golden-section minimum of `f` on `[lo, hi]`.
fn golden(mut f: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

const SCAN_POINTS: usize = 41;

/// Cyclic coordinate descent from `start`; every coordinate move is a
/// coarse scan followed by a golden-section refinement.
fn polish(cost: &EsCost, start: &[f64], cfg: &CentralConfig) -> (Vec<f64>, f64) {
    let mut p = start.to_vec();
    let mut best = cost.total(&p);
    for _ in 0..cfg.max_sweeps {
        let mut moved = 0.0f64;
        for k in 0..p.len() {
            let mut q = p.clone();
            let mut eval = |x: f64| {
                q[k] = x;
                cost.total(&q)
            };
            let step = 1.0 / (SCAN_POINTS - 1) as f64;
            let (mut j, mut fj) = (0, f64::INFINITY);
            for i in 0..SCAN_POINTS {
                let v = eval(i as f64 * step);
                if v < fj {
                    j = i;
                    fj = v;
                }
            }
            let lo = (j as f64 - 1.0).max(0.0) * step;
            let hi = ((j + 1) as f64 * step).min(1.0);
            let x = golden(&mut eval, lo, hi, cfg.tol).clamp(0.0, 1.0);
            let mut candidates = [
                (x, eval(x)),
                (j as f64 * step, fj),
                (lo, eval(lo)),
                (hi, eval(hi)),
            ];
            candidates.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
            let (x, fx) = candidates[0];
            if fx < best {
                moved = moved.max((x - p[k]).abs());
                p[k] = x;
                best = fx;
            }
        }
        if moved <= cfg.tol {
            break;
        }
    }
    (p, best)
}

/// Optimal schedule under equal sharing, by multi-start coordinate descent.
pub fn solve_central_es(s: &Scenario, cfg: &CentralConfig) -> CentralSolution {
    solve_central_es_seeded(s, cfg, &[])
}

/// Like [`solve_central_es`], also polishing the caller's `seeds`.
pub fn solve_central_es_seeded(
    s: &Scenario,
    cfg: &CentralConfig,
    seeds: &[StrategyProfile],
) -> CentralSolution {
    let m = s.num_types();
    let cost = EsCost::new(s);
    let g = effective_grid(cfg, m);
    let points = g.pow(m as u32);
    let keep = (cfg.restarts * 8).max(1);
    let coord = |d: usize| d as f64 / (g - 1) as f64;

    let heap = (0..points)
        .into_par_iter()
        .fold(BinaryHeap::<Scored>::new, |mut heap, index| {
            let p: Vec<f64> = decode(index, g, m).into_iter().map(coord).collect();
            heap.push(Scored {
                cost: cost.total(&p),
                index,
            });
            if heap.len() > keep {
                heap.pop();
            }
            heap
        })
        .reduce(BinaryHeap::new, |mut a, b| {
            for x in b {
                a.push(x);
                if a.len() > keep {
                    a.pop();
                }
            }
            a
        });
    let ranked = heap.into_sorted_vec();

    let mut chosen: Vec<Vec<usize>> = Vec::new();
    for sc in &ranked {
        if chosen.len() >= cfg.restarts {
            break;
        }
        let digits = decode(sc.index, g, m);
        let far = chosen
            .iter()
            .all(|c| c.iter().zip(&digits).any(|(a, b)| a.abs_diff(*b) >= 2));
        if far {
            chosen.push(digits);
        }
    }
    let mut starts: Vec<Vec<f64>> = chosen
        .into_iter()
        .map(|d| d.into_iter().map(coord).collect())
        .collect();
    starts.push(vec![1.0; m]);
    starts.push(vec![0.0; m]);
    starts.extend(
        seeds
            .iter()
            .filter(|p| p.len() == m)
            .map(|p| p.as_slice().to_vec()),
    );

    let polished: Vec<(Vec<f64>, f64)> =
        starts.par_iter().map(|st| polish(&cost, st, cfg)).collect();

    let mut optima: Vec<&Vec<f64>> = Vec::new();
    let cluster = cfg.tol.sqrt().max(1e-6);
    for (p, _) in &polished {
        if !optima
            .iter()
            .any(|q| q.iter().zip(p).all(|(a, b)| (a - b).abs() <= cluster))
        {
            optima.push(p);
        }
    }
    let (best, _) = polished
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| lex_cmp(&a.0, &b.0)))
        .expect("at least two starts");
    finish(
        s,
        Policy::EqualSharing,
        StrategyProfile::clamped(best.clone()),
        None,
        optima.len(),
    )
}

/// Dispatches to the solver of `policy`.
pub fn solve_central(policy: Policy, s: &Scenario, cfg: &CentralConfig) -> CentralSolution {
    match policy {
        Policy::Proportional => solve_central_pa(s),
        Policy::EqualSharing => solve_central_es(s, cfg),
    }
}
