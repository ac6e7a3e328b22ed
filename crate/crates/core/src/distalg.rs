//! Uncoordinated best-response scheme with capping.
//!
//! Consumers of the mixed types are visited in a random order every step.
//! The first consumer of a type in a step computes a best-response increment
//! against the broadcast aggregate day demand `X`, scales it by the cap and
//! publishes the new type probability; later consumers of the same type in
//! that step reuse it.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::model::{Scenario, StrategyProfile, TypeId};

/// Default convergence tolerance on the largest probability change.
pub const DEFAULT_TOL: f64 = 1e-4;

/// Multiplier applied to every best-response increment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CapPolicy {
    /// Fixed multiplier in `[0, 1]`.
    Equal(f64),
    /// Fresh uniform `[0, 1)` draw per step and type.
    Random,
    /// No capping (multiplier 1).
    None,
}

impl fmt::Display for CapPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CapPolicy::Equal(v) => write!(f, "equal:{v}"),
            CapPolicy::Random => f.write_str("random"),
            CapPolicy::None => f.write_str("none"),
        }
    }
}

impl FromStr for CapPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(CapPolicy::None),
            "random" => Ok(CapPolicy::Random),
            _ => {
                let v = s.strip_prefix("equal:").ok_or_else(|| {
                    format!("unknown cap `{s}` (expected equal:<v>, random or none)")
                })?;
                let v: f64 = v.parse().map_err(|_| format!("invalid cap value `{v}`"))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(format!("cap value {v} outside [0, 1]"));
                }
                Ok(CapPolicy::Equal(v))
            }
        }
    }
}

/// One best-response event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: usize,
    #[serde(rename = "type")]
    pub type_id: TypeId,
    pub eqp: f64,
    pub x_sigma: f64,
}

/// Outcome of a distributed run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgoRun {
    pub final_profile: StrategyProfile,
    pub steps_used: usize,
    pub converged: bool,
    /// Set when a zero cap froze the run at its initial state.
    pub degenerate: bool,
    /// `X` after every step.
    pub x_sigma_trace: Vec<f64>,
    /// Type probabilities after every step.
    pub profile_history: Vec<StrategyProfile>,
    pub trace: Vec<TraceRow>,
}

fn expected_cost(s: &Scenario, id: TypeId, x_sigma: f64, q: f64) -> f64 {
    let t = &s.types()[id];
    let tr = s.tariffs();
    let slope = (s.n() - 1.0) * t.share * t.day_demand;
    let demand = x_sigma + slope * q + t.day_demand;
    let res = if demand > 0.0 {
        (t.day_demand * s.res_capacity() / demand).min(t.day_demand)
    } else {
        t.day_demand
    };
    let day = res * tr.c_res + (t.day_demand - res) * tr.day_grid_price();
    q * day + (1.0 - q) * t.flexible_load() * tr.night_price()
}

/// Cost-minimizing day-probability increment in `[0, 1 - current_p]` for a
/// type facing aggregate day demand `x_sigma` (own type's current share
/// already included).
///
/// With `D = x_sigma + E + (N-1) r E q` the expected cost is linear in `q`
/// while `D <= RE` and convex in `D` beyond, with stationary point
/// `D* = sqrt(T (x_sigma + E))`, `T` the indifference demand. The minimum
/// is among the interval ends, the kink and `D*`.
pub fn best_response(s: &Scenario, type_id: TypeId, current_p: f64, x_sigma: f64) -> f64 {
    let t = &s.types()[type_id];
    let upper = (1.0 - current_p).clamp(0.0, 1.0);
    let slope = (s.n() - 1.0) * t.share * t.day_demand;
    let base = x_sigma + t.day_demand;
    let mut candidates = vec![0.0, upper];
    if slope > 0.0 {
        candidates.push((s.res_capacity() - base) / slope);
        let threshold = s.indifference_demand(type_id);
        if threshold.is_finite() {
            candidates.push(((threshold * base).sqrt() - base) / slope);
        }
    }
    candidates
        .into_iter()
        .map(|q| q.clamp(0.0, upper))
        .map(|q| (q, expected_cost(s, type_id, x_sigma, q)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)))
        .map(|(q, _)| q)
        .unwrap_or(0.0)
}

/// Runs the best-response scheme for at most `n_step` steps.
pub fn run_distributed(
    s: &Scenario,
    cap: CapPolicy,
    seed: u64,
    n_step: usize,
    tol: f64,
) -> AlgoRun {
    let part = s.partition_types();
    let m = s.num_types();
    let n = s.n();

    let mut eqp = vec![0.0; m];
    let mut x_sigma = 0.0;
    if part.case1 {
        // Every type competes at capacity; the scheme starts from all-day.
        eqp = vec![1.0; m];
        x_sigma = s.total_day_demand(None).unwrap_or(0.0);
    } else {
        for &i in &part.sigma1 {
            eqp[i] = 1.0;
            x_sigma += n * s.types()[i].share * s.types()[i].day_demand;
        }
    }

    let initial = AlgoRun {
        final_profile: StrategyProfile::clamped(eqp.clone()),
        steps_used: 0,
        converged: true,
        degenerate: false,
        x_sigma_trace: Vec::new(),
        profile_history: Vec::new(),
        trace: Vec::new(),
    };
    if part.case1 || part.sigma22.is_empty() {
        return initial;
    }
    if cap == CapPolicy::Equal(0.0) {
        return AlgoRun {
            degenerate: true,
            ..initial
        };
    }

    let mut consumers: Vec<TypeId> = Vec::new();
    for &i in &part.sigma22 {
        let count = (n * s.types()[i].share).round() as usize;
        consumers.extend(std::iter::repeat_n(i, count.max(1)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut run = AlgoRun {
        converged: false,
        ..initial
    };
    for step in 1..=n_step.max(1) {
        let old = eqp.clone();
        consumers.shuffle(&mut rng);
        let mut played = vec![false; m];
        for &i in &consumers {
            if played[i] {
                continue;
            }
            played[i] = true;
            let factor = match cap {
                CapPolicy::Equal(v) => v,
                CapPolicy::Random => rng.gen::<f64>(),
                CapPolicy::None => 1.0,
            };
            let q = best_response(s, i, eqp[i], x_sigma);
            let next = (eqp[i] + factor * q).clamp(0.0, 1.0);
            let t = &s.types()[i];
            x_sigma += (n - 1.0) * t.share * (next - eqp[i]) * t.day_demand;
            eqp[i] = next;
            run.trace.push(TraceRow {
                step,
                type_id: i,
                eqp: next,
                x_sigma,
            });
        }
        run.steps_used = step;
        run.x_sigma_trace.push(x_sigma);
        run.profile_history
            .push(StrategyProfile::clamped(eqp.clone()));
        let change = eqp
            .iter()
            .zip(&old)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if change <= tol {
            run.converged = true;
            break;
        }
    }
    run.final_profile = StrategyProfile::clamped(eqp);
    run
}
