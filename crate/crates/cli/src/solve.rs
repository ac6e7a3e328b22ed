//! Dispatch of one scenario (or a capacity sweep) to the solvers, producing
//! flat CSV rows.

use std::fmt;
use std::io::Write;

use esgame_core::{
    run_distributed, select_ne_profile, social_cost, solve_central_es_seeded, solve_central_pa,
    solve_ne, AlgoRun, CapPolicy, CentralConfig, CostBreakdown, Policy, Scenario, Selector,
    StrategyProfile, TypeId,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Outcome to report for a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Mechanism {
    Central,
    NeWorst,
    NeBest,
    Distributed,
}

impl Mechanism {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mechanism::Central => "central",
            Mechanism::NeWorst => "ne_worst",
            Mechanism::NeBest => "ne_best",
            Mechanism::Distributed => "distributed",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub policy: Policy,
    pub mechanisms: Vec<Mechanism>,
    /// Overrides the equilibrium profile of the `ne_*` mechanisms.
    pub selector: Option<Selector>,
    pub cap: CapPolicy,
    pub seed: u64,
    pub steps: usize,
    pub tol: f64,
    pub central: CentralConfig,
}

impl SolveOptions {
    pub fn new(policy: Policy, mechanisms: Vec<Mechanism>) -> Self {
        SolveOptions {
            policy,
            mechanisms,
            selector: None,
            cap: CapPolicy::None,
            seed: 0,
            steps: 1000,
            tol: esgame_core::distalg::DEFAULT_TOL,
            central: CentralConfig::default(),
        }
    }

    /// Rejects flag combinations that have no meaning.
    pub fn check(&self) -> CliResult<()> {
        if self.mechanisms.is_empty() {
            return Err(CliError::Usage("at least one mechanism is required".into()));
        }
        if self.mechanisms.contains(&Mechanism::Distributed) && self.policy != Policy::Proportional
        {
            return Err(CliError::Usage(
                "the distributed mechanism is defined for --policy pa only".into(),
            ));
        }
        if let Some(sel) = self.selector {
            if !self
                .mechanisms
                .iter()
                .any(|m| matches!(m, Mechanism::NeWorst | Mechanism::NeBest))
            {
                return Err(CliError::Usage(
                    "--selector needs --mechanism ne_worst or ne_best".into(),
                ));
            }
            let clash = (sel == Selector::BestCost
                && self.mechanisms.contains(&Mechanism::NeWorst))
                || (sel == Selector::WorstCost && self.mechanisms.contains(&Mechanism::NeBest));
            if clash {
                return Err(CliError::Usage(
                    "--selector contradicts the requested ne mechanism".into(),
                ));
            }
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(CliError::Usage("--tol must be finite and >= 0".into()));
        }
        if self.central.grid < 2 {
            return Err(CliError::Usage("--grid must be at least 2".into()));
        }
        Ok(())
    }

    fn selector_for(&self, m: Mechanism) -> Selector {
        match (self.selector, m) {
            (Some(sel), _) => sel,
            (None, Mechanism::NeBest) => Selector::BestCost,
            (None, _) => Selector::WorstCost,
        }
    }
}

/// One output record. `poa` is the row cost over the central optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub re_ratio: f64,
    pub policy: String,
    pub mechanism: String,
    pub cost_total: f64,
    pub cost_res: f64,
    pub cost_day_grid: f64,
    pub cost_night: f64,
    pub demand_day: f64,
    pub poa: Option<f64>,
    pub ne_case: Option<String>,
    pub steps: Option<usize>,
    pub seed: Option<u64>,
}

/// Rows for one scenario, plus the distributed run if one was requested.
pub struct PointResult {
    pub rows: Vec<SweepRow>,
    pub run: Option<AlgoRun>,
}

fn row(
    re_ratio: f64,
    opts: &SolveOptions,
    mechanism: Mechanism,
    s: &Scenario,
    p: &StrategyProfile,
    central: f64,
) -> SweepRow {
    let CostBreakdown {
        res_cost,
        day_grid_cost,
        night_cost,
        total,
        ..
    } = social_cost(opts.policy, s, p);
    SweepRow {
        re_ratio,
        policy: opts.policy.as_str().to_string(),
        mechanism: mechanism.as_str().to_string(),
        cost_total: total,
        cost_res: res_cost,
        cost_day_grid: day_grid_cost,
        cost_night: night_cost,
        demand_day: s.expected_demands(p).0,
        poa: (central > 0.0).then(|| total / central),
        ne_case: None,
        steps: None,
        seed: None,
    }
}

/// Evaluates the requested mechanisms on one scenario.
pub fn solve_point(s: &Scenario, re_ratio: f64, opts: &SolveOptions) -> CliResult<PointResult> {
    let needs_ne = opts
        .mechanisms
        .iter()
        .any(|m| matches!(m, Mechanism::NeWorst | Mechanism::NeBest));
    let ne = solve_ne(opts.policy, s);
    let sol = match ne {
        Ok(sol) => Some(sol),
        Err(e) if needs_ne => return Err(e.into()),
        Err(_) => None,
    };
    let central = match (opts.policy, &sol) {
        (Policy::Proportional, _) => solve_central_pa(s),
        (Policy::EqualSharing, Some(sol)) => {
            let seeds = [Selector::WorstCost, Selector::BestCost]
                .iter()
                .map(|&sel| select_ne_profile(sol, s, sel))
                .collect::<esgame_core::Result<Vec<_>>>()?;
            solve_central_es_seeded(s, &opts.central, &seeds)
        }
        (Policy::EqualSharing, None) => solve_central_es_seeded(s, &opts.central, &[]),
    };
    let central_cost = central.cost.total;
    let ne_case = sol.as_ref().map(|sol| sol.case.as_str().to_string());

    let mut rows = Vec::with_capacity(opts.mechanisms.len());
    let mut run = None;
    for &m in &opts.mechanisms {
        let mut r = match m {
            Mechanism::Central => row(re_ratio, opts, m, s, &central.profile, central_cost),
            Mechanism::NeWorst | Mechanism::NeBest => {
                let sol = sol.as_ref().expect("equilibrium solved above");
                let p = select_ne_profile(sol, s, opts.selector_for(m))?;
                row(re_ratio, opts, m, s, &p, central_cost)
            }
            Mechanism::Distributed => {
                let algo = run_distributed(s, opts.cap, opts.seed, opts.steps, opts.tol);
                let mut r = row(re_ratio, opts, m, s, &algo.final_profile, central_cost);
                r.steps = Some(algo.steps_used);
                r.seed = Some(opts.seed);
                run = Some(algo);
                r
            }
        };
        r.ne_case = ne_case.clone();
        rows.push(r);
    }
    Ok(PointResult { rows, run })
}

/// `RE / D_total` of a scenario.
pub fn current_ratio(s: &Scenario) -> CliResult<f64> {
    Ok(s.res_capacity() / s.total_day_demand(None)?)
}

/// Parses `start:stop:step` into the list of ratios; an empty range is a
/// usage error.
pub fn parse_sweep(spec: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || CliError::Usage(format!("invalid sweep `{spec}` (expected start:stop:step)"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut v = [0.0; 3];
    for (slot, part) in v.iter_mut().zip(&parts) {
        *slot = part.trim().parse::<f64>().map_err(|_| bad())?;
        if !slot.is_finite() {
            return Err(bad());
        }
    }
    let [start, stop, step] = v;
    if start < 0.0 {
        return Err(CliError::Usage(format!("sweep start {start} is negative")));
    }
    let ratios = esgame_core::ratio_grid(start, stop, step);
    if ratios.is_empty() {
        return Err(CliError::Usage(format!("sweep `{spec}` is empty")));
    }
    Ok(ratios)
}

/// Evaluates every ratio in parallel; rows keep the ratio order and the
/// first failing point aborts the sweep.
pub fn sweep(s: &Scenario, ratios: &[f64], opts: &SolveOptions) -> CliResult<Vec<SweepRow>> {
    let total = s.total_day_demand(None)?;
    let points: Vec<CliResult<Vec<SweepRow>>> = ratios
        .par_iter()
        .map(|&ratio| {
            let sc = s.with_res_capacity(ratio * total)?;
            Ok(solve_point(&sc, ratio, opts)?.rows)
        })
        .collect();
    let mut rows = Vec::new();
    for p in points {
        rows.extend(p?);
    }
    Ok(rows)
}

pub fn write_rows<W: Write>(out: W, rows: &[SweepRow]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: std::io::Read>(input: R) -> CliResult<Vec<SweepRow>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Trace record with the type given by its position in the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCsvRow {
    pub step: usize,
    #[serde(rename = "type")]
    pub type_index: usize,
    pub eqp: f64,
    pub x_sigma: f64,
}

pub fn write_trace<W: Write>(out: W, s: &Scenario, run: &AlgoRun) -> CliResult<()> {
    let file_index = |id: TypeId| {
        (0..s.num_types())
            .find(|&j| s.type_for_record_index(j) == Some(id))
            .unwrap_or(id)
    };
    let mut w = csv::Writer::from_writer(out);
    for t in &run.trace {
        w.serialize(TraceCsvRow {
            step: t.step,
            type_index: file_index(t.type_id),
            eqp: t.eqp,
            x_sigma: t.x_sigma,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use esgame_core::TariffSet;

    fn two_type() -> Scenario {
        Scenario::build(
            500,
            TariffSet::new(100.0, 2.0, 4.0).unwrap(),
            16250.0,
            &[(100.0, 0.7, 1.0), (200.0, 0.3, 1.0)],
        )
        .unwrap()
        .with_calibration(esgame_core::EpsilonCalibration {
            base_type: 0,
            base_epsilon: 1.0,
        })
        .unwrap()
    }

    #[test]
    fn sweep_parsing() {
        assert_eq!(parse_sweep("0.05:1.25:0.05").unwrap().len(), 25);
        assert_eq!(parse_sweep("0.5:0.5:0.1").unwrap(), vec![0.5]);
        for bad in [
            "1:0.5:0.1",
            "0.1:0.5:0",
            "0.1:0.5",
            "a:b:c",
            "-0.1:0.5:0.1",
            "0.1:inf:0.1",
        ] {
            let err = parse_sweep(bad).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{bad}");
        }
    }

    #[test]
    fn point_rows_follow_mechanism_order() {
        let opts = SolveOptions::new(
            Policy::Proportional,
            vec![Mechanism::NeBest, Mechanism::Central, Mechanism::NeWorst],
        );
        let res = solve_point(&two_type(), 0.25, &opts).unwrap();
        let names: Vec<&str> = res.rows.iter().map(|r| r.mechanism.as_str()).collect();
        assert_eq!(names, ["ne_best", "central", "ne_worst"]);
        assert_eq!(res.rows[1].poa, Some(1.0));
        assert!(res.rows[2].poa.unwrap() >= res.rows[0].poa.unwrap());
        assert!((res.rows[2].poa.unwrap() - 1.14).abs() < 0.01);
        assert!(res
            .rows
            .iter()
            .all(|r| r.ne_case.as_deref() == Some("mixed")));
        assert!(res.run.is_none());
    }

    #[test]
    fn distributed_row_carries_steps_and_seed() {
        let mut opts = SolveOptions::new(Policy::Proportional, vec![Mechanism::Distributed]);
        opts.seed = 7;
        let res = solve_point(&two_type(), 0.25, &opts).unwrap();
        let r = &res.rows[0];
        assert_eq!(r.seed, Some(7));
        assert_eq!(r.steps, Some(res.run.as_ref().unwrap().steps_used));
        assert!((r.demand_day / 24324.0 - 1.0).abs() < 0.005);
    }

    #[test]
    fn flag_checks() {
        let opts = SolveOptions::new(Policy::EqualSharing, vec![Mechanism::Distributed]);
        assert_eq!(opts.check().unwrap_err().exit_code(), 2);
        let mut opts = SolveOptions::new(Policy::Proportional, vec![Mechanism::NeWorst]);
        opts.selector = Some(Selector::BestCost);
        assert!(opts.check().is_err());
        opts.selector = Some(Selector::Midpoint);
        assert!(opts.check().is_ok());
        let mut opts = SolveOptions::new(Policy::Proportional, vec![Mechanism::Central]);
        opts.selector = Some(Selector::Midpoint);
        assert!(opts.check().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let opts = SolveOptions::new(
            Policy::Proportional,
            vec![
                Mechanism::Central,
                Mechanism::NeWorst,
                Mechanism::Distributed,
            ],
        );
        let rows = solve_point(&two_type(), 0.25, &opts).unwrap().rows;
        let mut buf = Vec::new();
        write_rows(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "re_ratio,policy,mechanism,cost_total,cost_res,cost_day_grid,cost_night,demand_day,poa,ne_case,steps,seed\n"
        ));
        assert_eq!(read_rows(buf.as_slice()).unwrap(), rows);
    }
}
