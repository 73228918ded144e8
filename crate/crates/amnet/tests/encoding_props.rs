mod common;

use std::collections::BTreeMap;

use amnet::formula::Formula;
use amnet::mip::{derive_big_m, encode_mip, mip_membership_formula};
use amnet::network::Node;
use amnet::rational::{int, Rational};
use amnet::smt::{encode_smt, vector_names};
use amnet::solver::enumerate::solve_enumerate;
use amnet::solver::Verdict;
use common::{point, random_network, rng};
use num_traits::Signed;
use proptest::prelude::*;

fn has_poly(f: &Formula) -> bool {
    match f {
        Formula::Poly(_) => true,
        Formula::True | Formula::False | Formula::Lin(_) => false,
        Formula::And(v) | Formula::Or(v) => v.iter().any(has_poly),
        Formula::Not(g) | Formula::Exists(_, g) => has_poly(g),
        Formula::Implies(a, b) => has_poly(a) || has_poly(b),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// The node values of a forward pass satisfy the body of the encoding.
    #[test]
    fn smt_branches_follow_the_guards(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = random_network(&mut r, 6, 3);
        let enc = encode_smt(&net, "x", "y");
        let x = point(&mut r, net.input_dim(), 3);
        let values = net.evaluate_all(&x).unwrap();
        let mut model = BTreeMap::new();
        let mut bind = |names: Vec<String>, vals: &[Rational]| {
            for (n, v) in names.into_iter().zip(vals) {
                model.insert(n, v.clone());
            }
        };
        bind(vector_names("x", x.len()), &x);
        bind(vector_names("vu", x.len()), &x);
        bind(vector_names("y", net.output_dim()), &values[net.output().0]);
        for id in net.ids() {
            bind(vector_names(&format!("v{}", id.0), net.dim(id)), &values[id.0]);
        }
        prop_assert_eq!(enc.body().eval(&model), Some(true));
        // a wrong output falsifies it
        let y0 = vector_names("y", net.output_dim())[0].clone();
        let bumped = &model[&y0] + int(1);
        model.insert(y0, bumped);
        prop_assert_eq!(enc.body().eval(&model), Some(false));
    }

    #[test]
    fn smt_variables_are_hygienic_and_linear(seed in any::<u64>()) {
        let net = random_network(&mut rng(seed), 6, 3);
        let enc = encode_smt(&net, "x", "y");
        let mut expected = vector_names("x", net.input_dim());
        expected.extend(vector_names("y", net.output_dim()));
        let free: Vec<String> = enc.formula.free_vars().into_iter().collect();
        for v in &free {
            prop_assert!(expected.contains(v), "unexpected free variable {}", v);
        }
        for v in &enc.aux {
            prop_assert!(!expected.contains(v));
        }
        let aux: std::collections::BTreeSet<_> = enc.aux.iter().collect();
        prop_assert_eq!(aux.len(), enc.aux.len());
        prop_assert!(!has_poly(&enc.formula));
    }

    /// Graph membership through the big-M encoding on a box covering the point.
    #[test]
    fn mip_membership(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = random_network(&mut r, 4, 2);
        let bx = vec![(int(-3), int(3)); net.input_dim()];
        let m = derive_big_m(&net, Some(&bx)).unwrap();
        let model = encode_mip(&net, &m).unwrap();
        prop_assert_eq!(model.bin_vars.len(), net.nodes().iter().filter(|n| matches!(n, Node::Mux { .. })).count());
        let a = point(&mut r, net.input_dim(), 3);
        let y = net.evaluate(&a).unwrap();
        let on = solve_enumerate(&mip_membership_formula(&model, &a, &y), None).unwrap();
        prop_assert!(on.is_sat());
        let off: Vec<Rational> = y.iter().map(|v| v + int(1)).collect();
        prop_assert_eq!(solve_enumerate(&mip_membership_formula(&model, &a, &off), None).unwrap(), Verdict::Unsat);
        prop_assert!(m.is_positive());
    }
}
