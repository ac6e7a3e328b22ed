//! Renewable allocation rules applied to a strategy profile.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Scenario, StrategyProfile};

/// Rule used to ration renewable energy among daytime competitors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Policy {
    /// Share in proportion to each competitor's day demand.
    Proportional,
    /// Each competitor receives at most `capacity / competitor count`.
    EqualSharing,
}

impl Policy {
    pub fn as_str(&self) -> &'static str {
        match self {
            Policy::Proportional => "pa",
            Policy::EqualSharing => "es",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pa" | "proportional" => Ok(Policy::Proportional),
            "es" | "equal" | "equal_sharing" => Ok(Policy::EqualSharing),
            other => Err(format!("unknown policy `{other}` (expected pa or es)")),
        }
    }
}

/// Outcome of applying an allocation rule to a profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationResult {
    /// Renewable energy received by one daytime consumer of each type.
    pub res_per_type: Vec<f64>,
    /// Fair share, for equal sharing only.
    pub fair_share: Option<f64>,
    /// Aggregate energy covered by renewables.
    pub served_by_res: f64,
    /// Capacity left unused.
    pub unused_res: f64,
    /// Amount removed when rounding pushed `served_by_res` above capacity.
    pub clamped: f64,
}

/// Proportional allocation: `res = E * RE / max(RE, D_day)`.
pub fn pa_allocation(s: &Scenario, p: &StrategyProfile) -> AllocationResult {
    let re = s.res_capacity();
    let (day, _) = s.expected_demands(p);
    let denom = re.max(day);
    let res_per_type = s
        .types()
        .iter()
        .map(|t| {
            if denom > 0.0 {
                t.day_demand * re / denom
            } else {
                t.day_demand
            }
        })
        .collect();
    let served = re.min(day);
    AllocationResult {
        res_per_type,
        fair_share: None,
        served_by_res: served,
        unused_res: re - served,
        clamped: 0.0,
    }
}

/// Fair share `RE / (N * sum r*p)`. The denominator counts competitors,
/// not energy.
pub fn es_fair_share(s: &Scenario, p: &StrategyProfile) -> Result<f64> {
    let count = s.expected_competitors(p);
    if count <= 0.0 {
        return Err(Error::ZeroCompetitors);
    }
    Ok(s.res_capacity() / count)
}

/// Equal sharing: each competitor receives `min(E, sh)`.
pub fn es_allocation(s: &Scenario, p: &StrategyProfile) -> Result<AllocationResult> {
    let sh = es_fair_share(s, p)?;
    let re = s.res_capacity();
    let res_per_type: Vec<f64> = s.types().iter().map(|t| t.day_demand.min(sh)).collect();
    let raw: f64 = s.n()
        * s.types()
            .iter()
            .zip(&res_per_type)
            .zip(p.as_slice())
            .map(|((t, &res), &pd)| t.share * pd * res)
            .sum::<f64>();
    let served = raw.min(re);
    Ok(AllocationResult {
        res_per_type,
        fair_share: Some(sh),
        served_by_res: served,
        unused_res: (re - served).max(0.0),
        clamped: raw - served,
    })
}

/// Dispatches to the allocation rule of `policy`.
pub fn allocate(policy: Policy, s: &Scenario, p: &StrategyProfile) -> Result<AllocationResult> {
    match policy {
        Policy::Proportional => Ok(pa_allocation(s, p)),
        Policy::EqualSharing => es_allocation(s, p),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::two_type;
    use crate::model::TariffSet;
    use approx::assert_relative_eq;

    fn prof(v: &[f64]) -> StrategyProfile {
        StrategyProfile::new(v.to_vec()).unwrap()
    }

    #[test]
    fn pa_full_satisfaction_below_capacity() {
        let s = two_type().with_res_capacity(70000.0).unwrap();
        let a = pa_allocation(&s, &prof(&[1.0, 1.0]));
        assert_eq!(a.res_per_type, vec![100.0, 200.0]);
        assert_eq!(a.served_by_res, 65000.0);
        assert_eq!(a.unused_res, 5000.0);
    }

    #[test]
    fn pa_at_equilibrium_demand() {
        let s = two_type();
        // Day demand 24323.6 is reached at p0 = 24323.6 / 35000 with p1 = 0.
        let p0 = 24323.6 / 35000.0;
        let a = pa_allocation(&s, &prof(&[p0, 0.0]));
        assert!((a.res_per_type[0] - 66.81).abs() < 0.01);
        assert_relative_eq!(a.served_by_res, 16250.0);
    }

    #[test]
    fn pa_zero_profile() {
        let a = pa_allocation(&two_type(), &prof(&[0.0, 0.0]));
        assert_eq!(a.res_per_type, vec![100.0, 200.0]);
        assert_eq!(a.served_by_res, 0.0);
    }

    #[test]
    fn fair_share_examples() {
        let s = two_type();
        assert_relative_eq!(es_fair_share(&s, &prof(&[1.0, 1.0])).unwrap(), 32.5);
        let p = prof(&[1.0 / 350.0, 0.0]);
        assert_relative_eq!(
            es_fair_share(&s, &p).unwrap(),
            16250.0,
            max_relative = 1e-12
        );
        assert_eq!(
            es_fair_share(&s, &prof(&[0.0, 0.0])),
            Err(Error::ZeroCompetitors)
        );
    }

    #[test]
    fn es_allocation_examples() {
        let a = es_allocation(&two_type(), &prof(&[1.0, 1.0])).unwrap();
        assert_eq!(a.res_per_type, vec![32.5, 32.5]);
        assert_relative_eq!(a.served_by_res, 16250.0, max_relative = 1e-12);

        let single = Scenario::build(
            10,
            TariffSet::new(1.0, 2.0, 3.0).unwrap(),
            30.0,
            &[(5.0, 1.0, 1.0)],
        )
        .unwrap();
        let a = es_allocation(&single, &prof(&[1.0])).unwrap();
        assert_eq!(a.served_by_res, 30.0);
        assert_eq!(a.unused_res, 0.0);
    }

    #[test]
    fn es_wastes_capacity_with_excess_energy_demand() {
        // sh = 3 sits between the two demands; day demand 55 exceeds RE = 30.
        let s = Scenario::build(
            10,
            TariffSet::new(1.0, 2.0, 3.0).unwrap(),
            30.0,
            &[(1.0, 0.5, 1.0), (10.0, 0.5, 1.0)],
        )
        .unwrap();
        let p = prof(&[1.0, 1.0]);
        let es = es_allocation(&s, &p).unwrap();
        assert_relative_eq!(es.served_by_res, 20.0);
        assert_relative_eq!(es.unused_res, 10.0);
        assert!(s.expected_demands(&p).0 > s.res_capacity());
        assert_eq!(pa_allocation(&s, &p).unused_res, 0.0);
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("pa".parse::<Policy>().unwrap(), Policy::Proportional);
        assert_eq!("ES".parse::<Policy>().unwrap(), Policy::EqualSharing);
        assert!("xx".parse::<Policy>().is_err());
    }
}
