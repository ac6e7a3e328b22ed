//! Risk-aware energy sharing game.
//!
//! A community of `N` consumers, grouped into types, decides whether to run
//! its flexible load during the day (competing for local renewable energy,
//! topped up from the grid at `gamma * c_res`) or at night (grid at
//! `beta * c_res`, with the load inflated by the inverse risk-aversion
//! `eps`). The crate computes the decentralized equilibria under
//! proportional and equal-sharing allocation, the centralized optimum, the
//! Price of Anarchy, trajectories of a distributed best-response scheme, and
//! brute-force oracles for small populations.

pub mod central;
pub mod distalg;
pub mod efficiency;
pub mod equilibrium;
pub mod error;
pub mod model;
pub mod oracle;
pub mod policies;

pub use central::{
    solve_central, solve_central_es, solve_central_es_seeded, solve_central_pa, CentralConfig,
    CentralSolution,
};
pub use distalg::{best_response, run_distributed, AlgoRun, CapPolicy, TraceRow};
pub use efficiency::{
    compute_poa, compute_poa_with, poa_curve, poa_curve_with, ratio_grid, CurvePoint, PoAReport,
};
pub use equilibrium::{
    deviator_costs, ne_target_allocation, select_ne_profile, social_cost, social_cost_es,
    social_cost_pa, solve_ne, solve_ne_es, solve_ne_pa, CostBreakdown, LinearConstraint,
    NESolution, NeCase, Resolution, Selector,
};
pub use error::{Error, Result};
pub use model::{
    validate_scenario, ConsumerType, EpsilonCalibration, Partition, Scenario, ScenarioRecord,
    StrategyProfile, TariffSet, TypeId, TypeRecord,
};
pub use policies::{
    allocate, es_allocation, es_fair_share, pa_allocation, AllocationResult, Policy,
};
