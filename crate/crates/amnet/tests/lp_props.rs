mod common;

use amnet::lp::{feasible, maximize, FeasResult, LinSystem, MaxResult, RowRel};
use amnet::rational::{dot, int};
use common::{lp_oracle, rng};
use proptest::prelude::*;
use rand::Rng;

fn system(seed: u64, strict: bool) -> LinSystem {
    let mut r = rng(seed);
    let n = r.random_range(1..=3);
    let mut sys = LinSystem::new(n);
    for _ in 0..r.random_range(1..=6) {
        let rel = match r.random_range(0..4) {
            0 if strict => RowRel::Lt,
            1 => RowRel::Eq,
            _ => RowRel::Le,
        };
        sys.push((0..n).map(|_| int(r.random_range(-3..=3))).collect(), rel, int(r.random_range(-5..=5)));
    }
    sys
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn feasibility_matches_the_oracle(seed in any::<u64>()) {
        let sys = system(seed, true);
        match feasible(&sys) {
            FeasResult::Feasible(x) => {
                prop_assert!(sys.satisfied_by(&x));
                prop_assert!(lp_oracle(&sys, 1_000_000));
            }
            FeasResult::Infeasible => prop_assert!(!lp_oracle(&sys, 1_000_000)),
        }
    }

    /// Adding `c·x ≥ opt + 1` to an optimum makes the system infeasible.
    #[test]
    fn optimum_is_exact(seed in any::<u64>()) {
        let sys = system(seed, false);
        let c: Vec<_> = (0..sys.var_count()).map(|i| int(i as i64 % 3 - 1)).collect();
        if let MaxResult::Optimal { point: x, value } = maximize(&sys, &c) {
            prop_assert!(sys.satisfied_by(&x));
            prop_assert_eq!(dot(&c, &x), value.clone());
            let mut cut = sys.clone();
            cut.push(c.iter().map(|v| -v).collect(), RowRel::Lt, -value);
            prop_assert!(!feasible(&cut).is_feasible());
        }
    }
}
