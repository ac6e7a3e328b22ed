//! Community model: tariffs, consumer types, scenarios and the aggregate
//! demand primitives every solver is built on.
//!
//! Energy is in kWh, prices in currency units per kWh. Type populations
//! `share * n_consumers` are allowed to be fractional (mean-field reading);
//! only the [`crate::oracle`] module insists on integral counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a consumer type inside a validated [`Scenario`] (position after
/// sorting by day demand).
pub type TypeId = usize;

/// Tolerance on the sum of type shares.
pub const SHARE_SUM_TOL: f64 = 1e-9;

/// Renewable price and the two time-of-use grid multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TariffSet {
    /// Price of local renewable energy.
    pub c_res: f64,
    /// Nighttime grid price multiplier.
    pub beta: f64,
    /// Daytime grid price multiplier.
    pub gamma: f64,
}

impl TariffSet {
    pub fn new(c_res: f64, beta: f64, gamma: f64) -> Result<Self> {
        let t = TariffSet { c_res, beta, gamma };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_res.is_finite() && self.c_res > 0.0) {
            return Err(Error::validation("tariffs.c_res", "must be finite and > 0"));
        }
        if !(self.beta.is_finite() && self.beta > 1.0) {
            return Err(Error::validation("tariffs.beta", "must be finite and > 1"));
        }
        if !(self.gamma.is_finite() && self.gamma > self.beta) {
            return Err(Error::validation(
                "tariffs.gamma",
                format!("must exceed beta ({} <= {})", self.gamma, self.beta),
            ));
        }
        Ok(())
    }

    /// Daytime grid price.
    pub fn day_grid_price(&self) -> f64 {
        self.gamma * self.c_res
    }

    /// Nighttime grid price.
    pub fn night_price(&self) -> f64 {
        self.beta * self.c_res
    }

    /// `gamma / beta`, the inverse risk-aversion above which daytime dominates.
    pub fn dominance_ratio(&self) -> f64 {
        self.gamma / self.beta
    }

    /// Share of its day demand a consumer with inverse risk-aversion `eps`
    /// must receive from renewables to be indifferent between day and night:
    /// `(gamma - eps*beta) / (gamma - 1)`.
    pub fn indifference_fraction(&self, eps: f64) -> f64 {
        (self.gamma - eps * self.beta) / (self.gamma - 1.0)
    }

    pub fn scaled(&self, k: f64) -> Self {
        TariffSet {
            c_res: self.c_res * k,
            ..*self
        }
    }
}

/// One consumer type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsumerType {
    /// Position of the type in the validated scenario.
    pub index: TypeId,
    /// Energy demanded if scheduled during the day (kWh).
    pub day_demand: f64,
    /// Inverse risk-aversion (>= 1). The full flexible load is
    /// `inv_risk * day_demand`.
    pub inv_risk: f64,
    /// Probability that a consumer is of this type.
    pub share: f64,
}

impl ConsumerType {
    /// Daily flexible load, served at night when the consumer defers.
    pub fn flexible_load(&self) -> f64 {
        self.inv_risk * self.day_demand
    }

    /// Risk-aversion degree (fraction of the flexible load consumed at day).
    pub fn risk_aversion(&self) -> f64 {
        1.0 / self.inv_risk
    }
}

/// Unvalidated type description, as read from a scenario file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeRecord {
    pub day_demand: f64,
    pub share: f64,
    pub inv_risk: f64,
}

/// Unvalidated scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub n_consumers: u64,
    pub tariffs: TariffSet,
    pub res_capacity: f64,
    pub types: Vec<TypeRecord>,
}

/// Request to derive inverse risk-aversions from a base type so that every
/// type sits on the same mixed-equilibrium indifference level. Re-applied
/// whenever the renewable capacity changes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonCalibration {
    pub base_type: TypeId,
    pub base_epsilon: f64,
}

/// A validated community: population, types sorted by day demand, tariffs
/// and renewable capacity. Immutable; derive variants with the `with_*`
/// methods.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    n_consumers: u64,
    types: Vec<ConsumerType>,
    tariffs: TariffSet,
    res_capacity: f64,
    calibration: Option<EpsilonCalibration>,
    record_order: Vec<usize>,
}

/// Checks every scenario invariant and returns a [`Scenario`] with types
/// sorted by non-decreasing day demand.
pub fn validate_scenario(raw: &ScenarioRecord) -> Result<Scenario> {
    Scenario::from_record(raw)
}

impl Scenario {
    pub fn from_record(raw: &ScenarioRecord) -> Result<Self> {
        raw.tariffs.validate()?;
        if raw.n_consumers <= 1 {
            return Err(Error::validation("n_consumers", "must be > 1"));
        }
        if !(raw.res_capacity.is_finite() && raw.res_capacity >= 0.0) {
            return Err(Error::validation("res_capacity", "must be finite and >= 0"));
        }
        if raw.types.is_empty() {
            return Err(Error::validation("types", "at least one type is required"));
        }
        if raw.types.len() as u64 > raw.n_consumers {
            return Err(Error::validation(
                "types",
                format!(
                    "{} types exceed the population of {}",
                    raw.types.len(),
                    raw.n_consumers
                ),
            ));
        }
        for (i, t) in raw.types.iter().enumerate() {
            if !(t.day_demand.is_finite() && t.day_demand > 0.0) {
                return Err(Error::validation(
                    format!("types[{i}].day_demand"),
                    "must be finite and > 0",
                ));
            }
            if !(t.inv_risk.is_finite() && t.inv_risk >= 1.0) {
                return Err(Error::validation(
                    format!("types[{i}].inv_risk"),
                    "must be finite and >= 1",
                ));
            }
            if !(t.share.is_finite() && (0.0..=1.0).contains(&t.share)) {
                return Err(Error::validation(
                    format!("types[{i}].share"),
                    "must lie in [0, 1]",
                ));
            }
        }
        let share_sum: f64 = raw.types.iter().map(|t| t.share).sum();
        if (share_sum - 1.0).abs() > SHARE_SUM_TOL {
            return Err(Error::validation(
                "types.share",
                format!("shares sum to {share_sum}, expected 1"),
            ));
        }

        let mut order: Vec<usize> = (0..raw.types.len()).collect();
        order.sort_by(|&a, &b| raw.types[a].day_demand.total_cmp(&raw.types[b].day_demand));
        let types = order
            .iter()
            .enumerate()
            .map(|(index, &src)| {
                let t = raw.types[src];
                ConsumerType {
                    index,
                    day_demand: t.day_demand,
                    inv_risk: t.inv_risk,
                    share: t.share,
                }
            })
            .collect();

        Ok(Scenario {
            n_consumers: raw.n_consumers,
            types,
            tariffs: raw.tariffs,
            res_capacity: raw.res_capacity,
            calibration: None,
            record_order: order,
        })
    }

    /// Builds a scenario from `(day_demand, share, inv_risk)` triples.
    pub fn build(
        n_consumers: u64,
        tariffs: TariffSet,
        res_capacity: f64,
        types: &[(f64, f64, f64)],
    ) -> Result<Self> {
        Self::from_record(&ScenarioRecord {
            n_consumers,
            tariffs,
            res_capacity,
            types: types
                .iter()
                .map(|&(day_demand, share, inv_risk)| TypeRecord {
                    day_demand,
                    share,
                    inv_risk,
                })
                .collect(),
        })
    }

    pub fn n_consumers(&self) -> u64 {
        self.n_consumers
    }

    /// Population as a float, for the mean-field formulas.
    pub fn n(&self) -> f64 {
        self.n_consumers as f64
    }

    pub fn types(&self) -> &[ConsumerType] {
        &self.types
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn tariffs(&self) -> &TariffSet {
        &self.tariffs
    }

    pub fn res_capacity(&self) -> f64 {
        self.res_capacity
    }

    pub fn calibration(&self) -> Option<EpsilonCalibration> {
        self.calibration
    }

    /// Type id of the `i`-th type of the originating record.
    pub fn type_for_record_index(&self, i: usize) -> Option<TypeId> {
        self.record_order.iter().position(|&src| src == i)
    }

    pub fn ty(&self, id: TypeId) -> Result<&ConsumerType> {
        self.types.get(id).ok_or(Error::UnknownType(id))
    }

    /// `n * share` for one type, the (possibly fractional) type population.
    pub fn population(&self, id: TypeId) -> f64 {
        self.n() * self.types[id].share
    }

    /// Maximum day demand of the whole community or of a subset of types.
    pub fn total_day_demand(&self, subset: Option<&[TypeId]>) -> Result<f64> {
        match subset {
            None => Ok(self.n()
                * self
                    .types
                    .iter()
                    .map(|t| t.share * t.day_demand)
                    .sum::<f64>()),
            Some(ids) => {
                let mut acc = 0.0;
                for &id in ids {
                    let t = self.ty(id)?;
                    acc += t.share * t.day_demand;
                }
                Ok(self.n() * acc)
            }
        }
    }

    /// Total flexible load `N * sum r*eps*E`, i.e. night demand if nobody
    /// competes for renewables.
    pub fn total_flexible_load(&self) -> f64 {
        self.n()
            * self
                .types
                .iter()
                .map(|t| t.share * t.flexible_load())
                .sum::<f64>()
    }

    /// Expected aggregate `(day, night)` demand under a profile.
    pub fn expected_demands(&self, p: &StrategyProfile) -> (f64, f64) {
        let n = self.n();
        let mut day = 0.0;
        let mut night = 0.0;
        for (t, &pd) in self.types.iter().zip(p.as_slice()) {
            day += t.share * pd * t.day_demand;
            night += t.share * (1.0 - pd) * t.flexible_load();
        }
        (n * day, n * night)
    }

    /// Expected number of consumers competing for renewables.
    pub fn expected_competitors(&self, p: &StrategyProfile) -> f64 {
        self.n()
            * self
                .types
                .iter()
                .zip(p.as_slice())
                .map(|(t, &pd)| t.share * pd)
                .sum::<f64>()
    }

    /// Day demand (including the deviator's own demand) at which a type is
    /// indifferent under proportional allocation:
    /// `RE * (gamma - 1) / (gamma - eps*beta)`. Infinite for dominant-day
    /// types.
    pub fn indifference_demand(&self, id: TypeId) -> f64 {
        let a = self.tariffs.indifference_fraction(self.types[id].inv_risk);
        if a <= 0.0 {
            f64::INFINITY
        } else {
            self.res_capacity / a
        }
    }

    /// Splits the types into dominant-day, dominant-night and mixed sets.
    pub fn partition_types(&self) -> Partition {
        let total = self.n()
            * self
                .types
                .iter()
                .map(|t| t.share * t.day_demand)
                .sum::<f64>();
        if self.res_capacity >= total {
            return Partition {
                case1: true,
                ..Partition::default()
            };
        }
        let ratio = self.tariffs.dominance_ratio();
        let mut part = Partition::default();
        for t in &self.types {
            if t.inv_risk >= ratio {
                part.sigma1.push(t.index);
            } else if t.day_demand > self.indifference_demand(t.index) {
                part.sigma21.push(t.index);
            } else {
                part.sigma22.push(t.index);
            }
        }
        part
    }

    /// Inverse risk-aversions that put every type on the same indifference
    /// level as `base_type` with `base_eps`.
    pub fn calibrate_epsilons(&self, base_type: TypeId, base_eps: f64) -> Result<Vec<f64>> {
        let base = *self.ty(base_type)?;
        let tr = &self.tariffs;
        let re = self.res_capacity;
        let fail =
            |type_id: usize, reason: String| Error::InfeasibleCalibration { type_id, reason };
        if !(base_eps.is_finite() && base_eps >= 1.0) {
            return Err(fail(
                base_type,
                format!("base epsilon {base_eps} must be >= 1"),
            ));
        }
        if base_eps >= tr.dominance_ratio() {
            return Err(fail(
                base_type,
                format!(
                    "base epsilon {base_eps} must be below gamma/beta = {}",
                    tr.dominance_ratio()
                ),
            ));
        }
        if re <= 0.0 {
            return Err(fail(base_type, "renewable capacity must be > 0".into()));
        }
        let level = re * (tr.gamma - 1.0) / (tr.gamma - base_eps * tr.beta) - base.day_demand;
        if level <= 0.0 {
            return Err(fail(
                base_type,
                format!("indifference level {level} must be > 0"),
            ));
        }
        self.types
            .iter()
            .map(|t| {
                if t.day_demand == base.day_demand {
                    return Ok(base_eps);
                }
                let eps = (tr.gamma - re * (tr.gamma - 1.0) / (level + t.day_demand)) / tr.beta;
                if eps < 1.0 {
                    Err(fail(t.index, format!("epsilon {eps} < 1")))
                } else if eps >= tr.dominance_ratio() {
                    Err(fail(t.index, format!("epsilon {eps} >= gamma/beta")))
                } else {
                    Ok(eps)
                }
            })
            .collect()
    }

    /// Replaces every type's inverse risk-aversion.
    pub fn with_inv_risk(&self, eps: &[f64]) -> Result<Self> {
        if eps.len() != self.types.len() {
            return Err(Error::validation(
                "inv_risk",
                format!("expected {} values, got {}", self.types.len(), eps.len()),
            ));
        }
        let mut out = self.clone();
        for (t, &e) in out.types.iter_mut().zip(eps) {
            if !(e.is_finite() && e >= 1.0) {
                return Err(Error::validation(
                    format!("types[{}].inv_risk", t.index),
                    "must be finite and >= 1",
                ));
            }
            t.inv_risk = e;
        }
        Ok(out)
    }

    /// Applies a calibration now and remembers it so that later capacity
    /// changes re-calibrate.
    pub fn with_calibration(&self, cal: EpsilonCalibration) -> Result<Self> {
        let eps = self.calibrate_epsilons(cal.base_type, cal.base_epsilon)?;
        let mut out = self.with_inv_risk(&eps)?;
        out.calibration = Some(cal);
        Ok(out)
    }

    /// Same community with a different renewable capacity, re-calibrated
    /// if a calibration is attached.
    pub fn with_res_capacity(&self, res_capacity: f64) -> Result<Self> {
        if !(res_capacity.is_finite() && res_capacity >= 0.0) {
            return Err(Error::validation("res_capacity", "must be finite and >= 0"));
        }
        let mut out = self.clone();
        out.res_capacity = res_capacity;
        match self.calibration {
            Some(cal) => out.with_calibration(cal),
            None => Ok(out),
        }
    }

    pub fn with_tariffs(&self, tariffs: TariffSet) -> Result<Self> {
        tariffs.validate()?;
        let mut out = self.clone();
        out.tariffs = tariffs;
        match self.calibration {
            Some(cal) => out.with_calibration(cal),
            None => Ok(out),
        }
    }

    /// Checks that a profile has one entry per type.
    pub(crate) fn check_profile(&self, p: &StrategyProfile) -> Result<()> {
        if p.len() != self.types.len() {
            return Err(Error::InvalidProfile(format!(
                "profile has {} entries, scenario has {} types",
                p.len(),
                self.types.len()
            )));
        }
        Ok(())
    }
}

/// `N * sum r*E` over `subset` (all types if `None`).
pub fn total_day_demand(s: &Scenario, subset: Option<&[TypeId]>) -> Result<f64> {
    s.total_day_demand(subset)
}

pub fn partition_types(s: &Scenario) -> Partition {
    s.partition_types()
}

pub fn expected_demands(s: &Scenario, p: &StrategyProfile) -> (f64, f64) {
    s.expected_demands(p)
}

pub fn calibrate_epsilons(s: &Scenario, base_type: TypeId, base_eps: f64) -> Result<Vec<f64>> {
    s.calibrate_epsilons(base_type, base_eps)
}

/// Type sets of the equilibrium case analysis.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Partition {
    /// `RE >= D_total`: every type competes, the sets below are empty.
    pub case1: bool,
    /// Dominant-day types (`eps >= gamma/beta`).
    pub sigma1: Vec<TypeId>,
    /// Dominant-night types.
    pub sigma21: Vec<TypeId>,
    /// Types that can mix.
    pub sigma22: Vec<TypeId>,
}

impl Partition {
    pub fn contains_all(&self, m: usize) -> bool {
        let mut seen = vec![0u8; m];
        for &i in self.sigma1.iter().chain(&self.sigma21).chain(&self.sigma22) {
            if i >= m {
                return false;
            }
            seen[i] += 1;
        }
        seen.iter().all(|&c| c == 1)
    }
}

/// Per-type probability of scheduling the flexible load during daytime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile(Vec<f64>);

impl StrategyProfile {
    pub fn new(p_day: Vec<f64>) -> Result<Self> {
        for (i, &p) in p_day.iter().enumerate() {
            if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                return Err(Error::InvalidProfile(format!(
                    "entry {i} = {p} outside [0, 1]"
                )));
            }
        }
        Ok(StrategyProfile(p_day))
    }

    /// Clamps entries into `[0, 1]`; used where rounding may overshoot.
    pub(crate) fn clamped(p_day: Vec<f64>) -> Self {
        StrategyProfile(p_day.into_iter().map(|p| p.clamp(0.0, 1.0)).collect())
    }

    pub fn uniform(m: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; m])
    }

    pub fn day(&self, id: TypeId) -> f64 {
        self.0[id]
    }

    pub fn night(&self, id: TypeId) -> f64 {
        1.0 - self.0[id]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}
