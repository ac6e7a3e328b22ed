use esgame_core::oracle::{grid_search_central, grid_slack};
use esgame_core::*;
use proptest::prelude::*;

fn small_scenario() -> impl Strategy<Value = Scenario> {
    (
        2u64..500,
        prop::collection::vec((0.5f64..40.0, 0.1f64..1.0, 1.0f64..2.0), 1..=2),
        1.1f64..3.0,
        0.1f64..2.0,
        0.05f64..1.2,
    )
        .prop_filter_map("valid scenario", |(n, raw, beta, dg, ratio)| {
            let sum: f64 = raw.iter().map(|t| t.1).sum();
            let types: Vec<(f64, f64, f64)> =
                raw.iter().map(|&(e, r, eps)| (e, r / sum, eps)).collect();
            let s = Scenario::build(
                n.max(2),
                TariffSet::new(1.0, beta, beta + dg).ok()?,
                1.0,
                &types,
            )
            .ok()?;
            let total = s.total_day_demand(None).ok()?;
            s.with_res_capacity(ratio * total).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn pa_central_beats_every_grid_point(s in small_scenario()) {
        let central = solve_central_pa(&s).cost.total;
        let (_, grid) = grid_search_central(&s, Policy::Proportional, 41).unwrap();
        prop_assert!(central <= grid * (1.0 + 1e-12));
        prop_assert!(grid <= central + grid_slack(&s, 41) + 1e-9 * central);
    }

    #[test]
    fn es_central_no_worse_than_grid(s in small_scenario()) {
        let central = solve_central_es(&s, &CentralConfig::default()).cost.total;
        let (_, grid) = grid_search_central(&s, Policy::EqualSharing, 41).unwrap();
        prop_assert!(central <= grid * (1.0 + 1e-9), "{central} > {grid}");
    }

    #[test]
    fn selected_profiles_satisfy_the_equilibrium(s in small_scenario()) {
        for policy in [Policy::Proportional, Policy::EqualSharing] {
            let Ok(sol) = solve_ne(policy, &s) else { continue };
            for sel in [Selector::WorstCost, Selector::BestCost, Selector::Midpoint] {
                let p = select_ne_profile(&sol, &s, sel).unwrap();
                prop_assert!(sol.contains(&p, 1e-7), "{policy} {sel:?} {:?}", p);
                for i in sol.mixed_types() {
                    let (day, night) = deviator_costs(policy, &s, &p, i);
                    prop_assert!((day - night).abs() <= 1e-6 * night.max(1.0), "{policy} type {i}: {day} vs {night}");
                }
            }
        }
    }

    #[test]
    fn allocations_never_exceed_capacity(s in small_scenario(), x in prop::collection::vec(0.0f64..=1.0, 2)) {
        let p = StrategyProfile::new(x[..s.num_types()].to_vec()).unwrap();
        for policy in [Policy::Proportional, Policy::EqualSharing] {
            if let Ok(a) = allocate(policy, &s, &p) {
                prop_assert!(a.served_by_res <= s.res_capacity() * (1.0 + 1e-12));
                prop_assert!(a.res_per_type.iter().zip(s.types()).all(|(r, t)| *r <= t.day_demand * (1.0 + 1e-12)));
            }
        }
    }
}
