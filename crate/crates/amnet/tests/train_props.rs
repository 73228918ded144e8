mod common;

use amnet::network::Node;
use amnet::rational::{to_f64, Rational};
use amnet::train::{
    consistency_train, evaluate_f64, gd_train, is_consistent, weak_gradient_f64, Consistency, ConsistencyOptions,
    Dataset, Init, LearningRate, TrainConfig, TrainError,
};
use amnet::solver::Backend;
use common::{grid_rational, point, random_network, rng};
use num_traits::Signed;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// Parameters that only feed guards never move under gradient descent.
    #[test]
    fn enable_parameters_stay_put(seed in any::<u64>(), rate in 0.001f64..0.1) {
        let mut r = rng(seed);
        let net = random_network(&mut r, 4, 2);
        let pairs = (0..6).map(|_| (point(&mut r, net.input_dim(), 2), point(&mut r, net.output_dim(), 2))).collect();
        let cfg = TrainConfig {
            rate: LearningRate::Constant(rate),
            grad_tol: 0.0,
            max_iters: 50,
            init: Init::Random { seed },
        };
        match gd_train(&net, &Dataset::new(pairs), &cfg) {
            Ok(res) => {
                for (k, frozen) in net.enable_parameter_mask().iter().enumerate() {
                    if *frozen {
                        prop_assert_eq!(res.theta[k].to_bits(), res.initial_theta[k].to_bits());
                    }
                }
            }
            Err(TrainError::Divergence { .. }) => {}
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    /// Away from guard switching surfaces the weak gradient is the gradient.
    #[test]
    fn weak_gradient_matches_central_differences(seed in any::<u64>()) {
        let mut r = rng(seed);
        let net = random_network(&mut r, 4, 3);
        let x = point(&mut r, net.input_dim(), 2);
        let values = net.evaluate_all(&x).unwrap();
        let clear = net.nodes().iter().all(|n| match n {
            Node::Mux { z, .. } => values[z.0][0].abs() >= amnet::rational::ratio(1, 1000),
            _ => true,
        });
        prop_assume!(clear);
        let theta: Vec<f64> = net.parameters().theta.iter().map(to_f64).collect();
        let xf: Vec<f64> = x.iter().map(to_f64).collect();
        let g = weak_gradient_f64(&net, &theta, &xf);
        let h = 1e-7;
        for k in 0..theta.len() {
            let (mut tp, mut tm) = (theta.clone(), theta.clone());
            tp[k] += h;
            tm[k] -= h;
            let fd = (evaluate_f64(&net, &tp, &xf).iter().sum::<f64>() - evaluate_f64(&net, &tm, &xf).iter().sum::<f64>()) / (2.0 * h);
            prop_assert!((g[k] - fd).abs() <= 1e-4 * fd.abs().max(1.0), "parameter {}: {} vs {}", k, g[k], fd);
        }
    }

    /// Returned parameters fit every pair within eps.
    #[test]
    fn consistent_parameters_fit(seed in any::<u64>(), eps_num in 0i64..4) {
        let mut r = rng(seed);
        let theta: Vec<Rational> = (0..6).map(|_| grid_rational(&mut r, -2, 2, 2)).collect();
        let net = amnet::library::perceptron(1, &theta).unwrap();
        let pairs = (0..3).map(|_| (vec![grid_rational(&mut r, -2, 2, 1)], vec![grid_rational(&mut r, -2, 2, 2)])).collect();
        let data = Dataset::new(pairs);
        let eps = amnet::rational::ratio(eps_num, 4);
        let opts = ConsistencyOptions { backend: Backend::Enumerate, ..Default::default() };
        if let Consistency::Params(p) = consistency_train(&net, &data, &eps, &opts).unwrap() {
            let bound = net.bind_params(&p).unwrap();
            prop_assert!(is_consistent(&bound, &data, &eps).unwrap());
        }
    }
}
