//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! `cargo test --test acceptance -- 1 5` runs only criteria 1 and 5.

mod common;

use std::time::{Duration, Instant};

use amnet::formula::Rel;
use amnet::library::{self, DenseLayer};
use amnet::lp::{feasible, FeasResult, LinSystem, RowRel};
use amnet::lyapunov::{
    cegis, contractive_check, f_solve, refutes, symmetric_box, CegisConfig, CegisOutcome, Contractive, FSolve,
    LyapSpec,
};
use amnet::optimize::{bisection_bound, minimize, BisectionConfig, MinResult};
use amnet::rational::{int, ratio, to_decimal_string, to_f64, Matrix, Rational};
use amnet::smt::{feasibility_formula, vector_names, Constraint};
use amnet::solver::external::solver_path;
use amnet::solver::{check_graph_membership, solve, Backend, Query, Verdict};
use amnet::systems;
use amnet::train::{
    consistency_train, evaluate_f64, gd_train, is_consistent, weak_gradient_f64, Consistency, ConsistencyOptions,
    Dataset, Init, LearningRate, TrainConfig,
};
use amnet::{Network, NetworkBuilder};
use num_traits::{One, Signed, Zero};
use rand::Rng;

use common::{control_oracle, grid_rational, lp_oracle, lyapunov_grid_check, point, random_network, rational_in, rng};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn need_solver() -> Result<(), String> {
    ensure(solver_path().is_some(), || "external SMT solver not found (set AMNET_SMT_SOLVER or put z3 on PATH)".into())
}

fn both_backends() -> [Backend; 2] {
    [Backend::Enumerate, Backend::External]
}

fn c1_encoding_theorem() -> Check {
    need_solver()?;
    let start = Instant::now();
    let mut r = rng(1);
    let mut queries = 0;
    for i in 0..200 {
        let net = random_network(&mut r, 6, 3);
        for _ in 0..5 {
            let a = point(&mut r, net.input_dim(), 3);
            let y = net.evaluate(&a).map_err(|e| e.to_string())?;
            let k = r.random_range(0..y.len());
            let mut off = y.clone();
            for (j, v) in off.iter_mut().enumerate() {
                *v += if j == k {
                    if r.random_bool(0.5) { int(1) } else { int(-1) }
                } else {
                    grid_rational(&mut r, -1, 1, 4)
                };
            }
            for b in both_backends() {
                let on = check_graph_membership(&net, &a, &y, b).map_err(|e| e.to_string())?;
                let miss = check_graph_membership(&net, &a, &off, b).map_err(|e| e.to_string())?;
                queries += 2;
                ensure(on.is_sat() && miss.is_unsat(), || {
                    format!("network {i} ({} muxes) on {b:?}: on-graph {on:?}, off-graph {miss:?}", net.mux_count())
                })?;
            }
        }
    }
    let t = start.elapsed();
    ensure(t < Duration::from_secs(300), || format!("{queries} queries agreed but took {t:.1?} (target 5 min)"))?;
    Ok(format!("1000 points, {queries} queries, both backends agree, {t:.1?}"))
}

fn stdlib_inputs(r: &mut impl Rng, n: usize) -> Vec<Rational> {
    // a third of the coordinates come from a coarse grid so ties and zeros occur
    (0..n)
        .map(|_| if r.random_bool(0.33) { grid_rational(r, -2, 2, 2) } else { rational_in(r, -4, 4) })
        .collect()
}

fn c2_stdlib_fidelity() -> Check {
    type Reference = fn(&[Rational]) -> Rational;
    let cases: Vec<(&str, Network, Reference)> = vec![
        ("max", library::max2(), |x| x[0].clone().max(x[1].clone())),
        ("min", library::min2(), |x| x[0].clone().min(x[1].clone())),
        ("relu", library::relu(), |x| x[0].clone().max(Rational::zero())),
        ("abs", library::abs(), |x| x[0].abs()),
        ("sat", library::sat(), |x| x[0].clone().max(-Rational::one()).min(Rational::one())),
        ("deadzone", library::deadzone(), |x| {
            if x[0] > Rational::one() {
                &x[0] - Rational::one()
            } else if x[0] < -Rational::one() {
                &x[0] + Rational::one()
            } else {
                Rational::zero()
            }
        }),
        ("inf_norm", library::inf_norm(3).unwrap(), |x| x.iter().map(|v| v.abs()).max().unwrap()),
        ("one_norm", library::one_norm(3).unwrap(), |x| x.iter().map(|v| v.abs()).sum()),
        ("card", library::card(3).unwrap(), |x| int(x.iter().filter(|v| !v.is_zero()).count() as i64)),
        ("and", library::gate_and(), |x| if !x[2].is_positive() && !x[3].is_positive() { x[0].clone() } else { x[1].clone() }),
        ("or", library::gate_or(), |x| if !x[2].is_positive() || !x[3].is_positive() { x[0].clone() } else { x[1].clone() }),
        ("not", library::gate_not(), |x| if x[2].is_positive() { x[0].clone() } else { x[1].clone() }),
        ("xor", library::gate_xor(), |x| {
            if !x[2].is_positive() != !x[3].is_positive() { x[0].clone() } else { x[1].clone() }
        }),
        ("le", library::cmp_le(), |x| if x[2] <= Rational::zero() { x[0].clone() } else { x[1].clone() }),
        ("ge", library::cmp_ge(), |x| if x[2] >= Rational::zero() { x[0].clone() } else { x[1].clone() }),
        ("lt", library::cmp_lt(), |x| if x[2] < Rational::zero() { x[0].clone() } else { x[1].clone() }),
        ("gt", library::cmp_gt(), |x| if x[2] > Rational::zero() { x[0].clone() } else { x[1].clone() }),
        ("eq", library::cmp_eq(), |x| if x[2].is_zero() { x[0].clone() } else { x[1].clone() }),
        ("neq", library::cmp_neq(), |x| if !x[2].is_zero() { x[0].clone() } else { x[1].clone() }),
    ];
    let mut r = rng(2);
    for (name, net, reference) in &cases {
        for _ in 0..1000 {
            let x = stdlib_inputs(&mut r, net.input_dim());
            let got = net.evaluate(&x).map_err(|e| e.to_string())?;
            ensure(got == vec![reference(&x)], || format!("{name} at {x:?}: got {got:?}"))?;
        }
    }
    let (sat, sat2) = (library::sat(), library::sat_relu());
    for _ in 0..1000 {
        let x = stdlib_inputs(&mut r, 1);
        ensure(sat.evaluate(&x) == sat2.evaluate(&x), || format!("sat and sat' differ at {x:?}"))?;
    }
    ensure(sat != sat2, || "sat and sat' should be different networks".into())?;
    Ok(format!("{} entries x 1000 inputs exact; sat = sat' on 1000 inputs", cases.len()))
}

fn c3_bisection_bound() -> Check {
    let mut b = NetworkBuilder::new(1);
    let x = b.input();
    let c = b.scale_shift(x, int(-1), int(3)).unwrap();
    let at_least_three = b.finish(c).unwrap();
    let cfg = BisectionConfig::new(int(0), int(8), ratio(1, 100)).backend(Backend::Enumerate);
    let res = minimize(&library::abs(), &[at_least_three], &cfg).map_err(|e| e.to_string())?;
    let MinResult::Optimal { lower, upper, bisection_queries, endpoint_queries, .. } = res else {
        return Err(format!("{res:?}"));
    };
    let bound = bisection_bound(&int(0), &int(8), &ratio(1, 100));
    ensure(lower <= int(3) && int(3) <= upper, || format!("[{lower}, {upper}] misses 3"))?;
    ensure(&upper - &lower <= ratio(1, 100), || format!("width {}", &upper - &lower))?;
    ensure(bisection_queries <= 10 && bound == 10, || format!("{bisection_queries} bisection queries, bound {bound}"))?;
    ensure(endpoint_queries == 2, || format!("{endpoint_queries} endpoint queries"))?;
    Ok(format!(
        "[{}, {}], {bisection_queries} bisection + {endpoint_queries} endpoint queries",
        to_decimal_string(&lower, 4),
        to_decimal_string(&upper, 4)
    ))
}

fn c4_optimal_control() -> Check {
    let p = systems::double_integrator(4).map_err(|e| e.to_string())?;
    let gains: Vec<Rational> = (0..4).map(|t| p.position_gain(t)).collect();
    let (opt, opt_u) = control_oracle(&gains, &p.dt, &p.lo, &p.hi).ok_or("oracle found no feasible control")?;
    let eps = ratio(1, 1000);
    let mut cfg = BisectionConfig::new(p.bracket.0.clone(), p.bracket.1.clone(), eps.clone()).backend(Backend::Enumerate);
    cfg.timeout = Duration::from_secs(600);
    let res = minimize(&p.objective, &p.constraints, &cfg).map_err(|e| e.to_string())?;
    let MinResult::Optimal { lower, upper, witness, .. } = res else {
        return Err(format!("{res:?}"));
    };
    let value = p.objective.evaluate(&witness).map_err(|e| e.to_string())?[0].clone();
    ensure((&value - &opt).abs() <= eps && lower <= opt && opt <= upper, || {
        format!("value {value}, interval [{lower}, {upper}], oracle {opt} at {opt_u:?}")
    })?;
    for u in &witness {
        ensure(p.lo <= u.abs() && u.abs() <= p.hi, || format!("|u| = {} violates the bounds", u.abs()))?;
    }
    let [pos, vel] = p.final_state(&witness);
    ensure(pos == int(1) && vel.is_zero(), || format!("final state ({pos}, {vel})"))?;
    Ok(format!(
        "optimum {} (oracle {}), u = [{}]",
        to_decimal_string(&value, 6),
        to_decimal_string(&opt, 6),
        witness.iter().map(|u| to_decimal_string(u, 5)).collect::<Vec<_>>().join(", ")
    ))
}

fn c5_lyapunov() -> Check {
    need_solver()?;
    let a = systems::schur_matrix();
    let dynamics = systems::linear_map(&a).map_err(|e| e.to_string())?;
    let spec = LyapSpec::roa(dynamics, symmetric_box(2, int(10))).map_err(|e| e.to_string())?;
    let mut cfg = CegisConfig::new(8, 50, vec![int(10), int(10)]);
    cfg.budget = Some(Duration::from_secs(600));
    let start = Instant::now();
    let out = cegis(&spec, &cfg).map_err(|e| e.to_string())?;
    let t = start.elapsed();
    let CegisOutcome::Stable { v, log } = out else {
        return Err(format!("cegis gave {out:?}"));
    };
    for b in both_backends() {
        let r = f_solve(&spec, &v, b, Duration::from_secs(120)).map_err(|e| e.to_string())?;
        ensure(r == FSolve::Certified, || format!("synthesized V not certified on {b:?}: {r:?}"))?;
    }
    let step = |x: &[Rational]| a.mul_vec(x);
    lyapunov_grid_check(&|x| v.eval(x), &step, 10, 41).map_err(|x| format!("grid violation at {x:?}"))?;
    Ok(format!(
        "stable after {} iterations with {} pieces in {t:.1?}; both backends and 41x41 grid agree",
        log.history.len(),
        v.pieces().len()
    ))
}

fn c5_published_certificate() -> Check {
    need_solver()?;
    let a = systems::schur_matrix();
    let dynamics = systems::linear_map(&a).map_err(|e| e.to_string())?;
    let spec = LyapSpec::roa(dynamics, symmetric_box(2, int(10))).map_err(|e| e.to_string())?;
    let published = systems::published_lyapunov();
    let at = published.eval(&[int(10), int(0)]);
    ensure(at == ratio(5036, 1000), || format!("V(10, 0) = {at}, expected 5.036"))?;
    for b in both_backends() {
        match f_solve(&spec, &published, b, Duration::from_secs(120)).map_err(|e| e.to_string())? {
            FSolve::Certified => {}
            FSolve::Counterexample(x) => {
                let (vx, vax) = (published.eval(&x), published.eval(&a.mul_vec(&x)));
                return Err(format!(
                    "V(10,0) = 5.036 but the 4-decimal coefficients are not a certificate on {b:?}: x = ({}), V(x) = {}, V(Ax) = {}",
                    x.iter().map(|v| to_decimal_string(v, 5)).collect::<Vec<_>>().join(", "),
                    to_decimal_string(&vx, 6),
                    to_decimal_string(&vax, 6)
                ));
            }
            other => return Err(format!("published V on {b:?}: {other:?}")),
        }
    }
    let step = |x: &[Rational]| a.mul_vec(x);
    lyapunov_grid_check(&|x| published.eval(x), &step, 10, 41).map_err(|x| format!("published V fails the grid at {x:?}"))?;
    Ok("V(10,0) = 5.036; certified on both backends and the grid".into())
}

fn c6_contractive() -> Check {
    need_solver()?;
    let phi = systems::milani_loop().network().map_err(|e| e.to_string())?;
    let poly = systems::milani_polyhedron();
    let timeout = Duration::from_secs(300);
    let word = |c: &Contractive| match c {
        Contractive::Verified => "verified",
        Contractive::Refuted { .. } => "refuted",
        Contractive::Unknown(_) => "unknown",
    };
    let mut sweep = Vec::new();
    for l in ["0.9", "0.95", "0.99"] {
        let lambda = amnet::rational::parse_rational(l).unwrap();
        let mut words = Vec::new();
        for b in both_backends() {
            let c = contractive_check(&phi, &poly, &lambda, b, timeout).map_err(|e| e.to_string())?;
            if let Contractive::Refuted { x, x_plus, epsilon } = &c {
                ensure(refutes(&poly, &lambda, x, x_plus, epsilon), || format!("witness at lambda {l} fails recheck"))?;
            }
            words.push(word(&c));
        }
        ensure(words[0] == words[1], || format!("backends disagree at lambda {l}: {words:?}"))?;
        sweep.push(format!("{l}:{}", words[0]));
    }
    let lambda = ratio(95, 100);
    let scaled = poly.scaled_w(&ratio(101, 100));
    let mut witness = String::new();
    for b in both_backends() {
        let ok = contractive_check(&phi, &poly, &lambda, b, timeout).map_err(|e| e.to_string())?;
        ensure(ok == Contractive::Verified, || format!("fixture lambda 0.95 on {b:?}: {ok:?}"))?;
        match contractive_check(&phi, &scaled, &lambda, b, timeout).map_err(|e| e.to_string())? {
            Contractive::Refuted { x, x_plus, epsilon } => {
                ensure(refutes(&scaled, &lambda, &x, &x_plus, &epsilon), || "scaled witness fails recheck".into())?;
                let xf: Vec<String> = x.iter().map(|v| to_decimal_string(v, 6)).collect();
                witness = format!("x = ({}), eps = {}", xf.join(", "), to_decimal_string(&epsilon, 6));
            }
            other => return Err(format!("w*1.01 on {b:?}: {other:?}")),
        }
    }
    Ok(format!("sweep {}; w*1.01 refuted, {witness}", sweep.join(" ")))
}

fn c7_training() -> Check {
    // (a) stuck enable parameters
    let mut r = rng(7);
    let mut runs = 0;
    for i in 0..20 {
        let net = random_network(&mut r, 3, 2);
        let pairs: Vec<_> = (0..8)
            .map(|_| {
                let x = point(&mut r, net.input_dim(), 2);
                let y = point(&mut r, net.output_dim(), 2);
                (x, y)
            })
            .collect();
        let data = Dataset::new(pairs);
        let cfg = TrainConfig {
            rate: LearningRate::Decay(0.05),
            grad_tol: 1e-10,
            max_iters: 200,
            init: if i % 2 == 0 { Init::Network } else { Init::Random { seed: i } },
        };
        let res = match gd_train(&net, &data, &cfg) {
            Ok(res) => res,
            Err(amnet::train::TrainError::Divergence { .. }) => continue,
            Err(e) => return Err(e.to_string()),
        };
        runs += 1;
        for (k, frozen) in net.enable_parameter_mask().iter().enumerate() {
            ensure(!frozen || res.theta[k].to_bits() == res.initial_theta[k].to_bits(), || {
                format!("run {i}: enable parameter {k} moved")
            })?;
        }
    }
    ensure(runs >= 10, || format!("only {runs} of 20 training runs finished"))?;

    // (b) weak gradient against central differences
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    while checked < 100 {
        let net = random_network(&mut r, 4, 3);
        let x = point(&mut r, net.input_dim(), 2);
        let values = net.evaluate_all(&x).map_err(|e| e.to_string())?;
        let guards_clear = net.nodes().iter().all(|n| match n {
            amnet::Node::Mux { z, .. } => to_f64(&values[z.0][0]).abs() >= 1e-3,
            _ => true,
        });
        if !guards_clear {
            continue;
        }
        checked += 1;
        let theta: Vec<f64> = net.parameters().theta.iter().map(to_f64).collect();
        let xf: Vec<f64> = x.iter().map(to_f64).collect();
        let g = weak_gradient_f64(&net, &theta, &xf);
        let h = 1e-7;
        for k in 0..theta.len() {
            let (mut tp, mut tm) = (theta.clone(), theta.clone());
            tp[k] += h;
            tm[k] -= h;
            let fp: f64 = evaluate_f64(&net, &tp, &xf).iter().sum();
            let fm: f64 = evaluate_f64(&net, &tm, &xf).iter().sum();
            let fd = (fp - fm) / (2.0 * h);
            let rel = (g[k] - fd).abs() / fd.abs().max(1.0);
            worst = worst.max(rel);
            ensure(rel <= 1e-4, || format!("parameter {k}: weak gradient {} vs finite difference {fd}", g[k]))?;
        }
    }

    // (c) consistency
    need_solver()?;
    let net = library::perceptron(1, &[int(1), int(0), int(2), int(1), int(1), int(-1)]).unwrap();
    let interp = Dataset::new(vec![(vec![int(0)], vec![int(0)]), (vec![int(1)], vec![int(1)])]);
    let clash = Dataset::new(vec![(vec![int(0)], vec![int(0)]), (vec![int(0)], vec![int(1)])]);
    let opts = ConsistencyOptions::default();
    let first = match consistency_train(&net, &interp, &int(0), &opts).map_err(|e| e.to_string())? {
        Consistency::Params(p) => {
            let bound = net.bind_params(&p).map_err(|e| e.to_string())?;
            ensure(is_consistent(&bound, &interp, &int(0)).unwrap_or(false), || "Params fail forward recheck".into())?;
            "params"
        }
        Consistency::Unknown(_) => "unknown",
        Consistency::Inconsistent => return Err("interpolation dataset reported inconsistent".into()),
    };
    let second = match consistency_train(&net, &clash, &ratio(2, 5), &opts).map_err(|e| e.to_string())? {
        Consistency::Inconsistent => "inconsistent",
        Consistency::Unknown(_) => "unknown",
        Consistency::Params(_) => return Err("clashing dataset reported consistent".into()),
    };
    ensure(first == "params" && second == "inconsistent", || format!("consistency gave {first}/{second}"))?;
    Ok(format!(
        "{runs} gd runs keep enable parameters bitwise; 100 gradients within {worst:.1e}; consistency {first}/{second}"
    ))
}

fn random_system(r: &mut impl Rng) -> LinSystem {
    let n = r.random_range(1..=4);
    let m = r.random_range(1..=8);
    let mut sys = LinSystem::new(n);
    for _ in 0..m {
        let coeffs = (0..n).map(|_| int(r.random_range(-3..=3))).collect();
        let rel = match r.random_range(0..10) {
            0..=4 => RowRel::Le,
            5..=8 => RowRel::Lt,
            _ => RowRel::Eq,
        };
        sys.push(coeffs, rel, int(r.random_range(-5..=5)));
    }
    sys
}

fn c8_lp_kernel() -> Check {
    let mut r = rng(8);
    let (mut feas, mut infeas) = (0, 0);
    for i in 0..500 {
        let sys = random_system(&mut r);
        let oracle = lp_oracle(&sys, 1_000_000);
        match feasible(&sys) {
            FeasResult::Feasible(x) => {
                ensure(sys.satisfied_by(&x), || format!("system {i}: witness {x:?} fails exact recheck"))?;
                ensure(oracle, || format!("system {i}: simplex feasible, oracle infeasible"))?;
                feas += 1;
            }
            FeasResult::Infeasible => {
                ensure(!oracle, || format!("system {i}: simplex infeasible, oracle feasible: {sys:?}"))?;
                infeas += 1;
            }
        }
    }
    Ok(format!("500 systems ({feas} feasible, {infeas} infeasible) agree with grid + vertex oracle"))
}

/// Does some `x` with `‖x − x0‖∞ ≤ δ` flip the predicted class?
fn misclassification(net: &Network, x0: &[Rational], class: usize, delta: &Rational, b: Backend) -> Result<Verdict, String> {
    let n = net.input_dim();
    let mut bld = NetworkBuilder::new(n);
    let x = bld.input();
    let y = bld.embed(net, x).map_err(|e| e.to_string())?;
    let other = 1 - class;
    let mut row = vec![Rational::zero(); 2];
    row[class] = Rational::one();
    row[other] = -Rational::one();
    let margin = bld.affine(Matrix::row(row), vec![Rational::zero()], y).map_err(|e| e.to_string())?;
    let flip = bld.finish(margin).map_err(|e| e.to_string())?;
    let mut bld = NetworkBuilder::new(n);
    let x = bld.input();
    let lo: Vec<Rational> = x0.iter().map(|v| v - delta).collect();
    let hi: Vec<Rational> = x0.iter().map(|v| v + delta).collect();
    let shifted = bld.affine(Matrix::identity(n), hi.iter().map(|v| -v).collect(), x).map_err(|e| e.to_string())?;
    let upper = bld.finish(shifted).map_err(|e| e.to_string())?;
    let mut bld = NetworkBuilder::new(n);
    let x = bld.input();
    let shifted = bld.affine(Matrix::identity(n).scaled(&int(-1)), lo, x).map_err(|e| e.to_string())?;
    let lower = bld.finish(shifted).map_err(|e| e.to_string())?;
    let cs = vec![
        Constraint::zero(flip, Rel::Le),
        Constraint::zero(upper, Rel::Le),
        Constraint::zero(lower, Rel::Le),
    ];
    let f = feasibility_formula(&vector_names("x", n), &cs, &[]).map_err(|e| e.to_string())?;
    solve(&Query::new(f).backend(b)).map_err(|e| e.to_string())
}

fn mnist_replacement() -> Check {
    need_solver()?;
    let mut r = rng(9);
    let layer = |r: &mut rand_chacha::ChaCha8Rng, rows: usize, cols: usize| {
        DenseLayer::new(
            Matrix::from_rows((0..rows).map(|_| (0..cols).map(|_| grid_rational(r, -2, 2, 8)).collect()).collect()).unwrap(),
            (0..rows).map(|_| grid_rational(r, -1, 1, 8)).collect(),
        )
    };
    let layers = [layer(&mut r, 4, 2), layer(&mut r, 2, 4)];
    let net = library::from_relu_nn(&layers).map_err(|e| e.to_string())?;
    let x0 = vec![ratio(1, 2), ratio(-1, 4)];
    let y0 = net.evaluate(&x0).map_err(|e| e.to_string())?;
    let class = usize::from(y0[1] > y0[0]);
    let mut verdicts = Vec::new();
    for delta in [ratio(1, 100), ratio(1, 10), int(1), int(5)] {
        let mut words = Vec::new();
        for b in both_backends() {
            let v = misclassification(&net, &x0, class, &delta, b)?;
            let word = match &v {
                Verdict::Sat(m) => {
                    let x: Vec<Rational> = vector_names("x", 2).iter().map(|k| m.get(k).cloned().unwrap_or_default()).collect();
                    let y = net.evaluate(&x).map_err(|e| e.to_string())?;
                    let inside = x.iter().zip(&x0).all(|(a, c)| (a - c).abs() <= delta);
                    let flipped = y[class] <= y[1 - class];
                    let close = inside && flipped;
                    if b == Backend::External && !close {
                        // external models are rechecked with a tolerance; accept tiny slack
                        let slack = to_f64(&(&y[1 - class] - &y[class]));
                        ensure(slack > -1e-6, || format!("external witness fails forward check by {slack}"))?;
                    } else {
                        ensure(close, || format!("witness {x:?} fails forward check"))?;
                    }
                    "sat"
                }
                Verdict::Unsat => "unsat",
                Verdict::Unknown(_) => "unknown",
            };
            words.push(word);
        }
        ensure(words[0] == words[1], || format!("backends disagree at delta {delta}: {words:?}"))?;
        verdicts.push(format!("{}:{}", to_decimal_string(&delta, 2), words[0]));
    }
    Ok(format!("2-4-2 network, class {class}; perturbation sweep {}", verdicts.join(" ")))
}

fn main() {
    let wanted: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, &str, fn() -> Check); 10] = [
        ("1", "encoding theorem", c1_encoding_theorem),
        ("2", "stdlib fidelity", c2_stdlib_fidelity),
        ("3", "bisection bound", c3_bisection_bound),
        ("4", "nonconvex optimal control", c4_optimal_control),
        ("5", "lyapunov cegis", c5_lyapunov),
        ("5b", "published lyapunov certificate", c5_published_certificate),
        ("6", "contractiveness", c6_contractive),
        ("7", "training", c7_training),
        ("8", "lp kernel", c8_lp_kernel),
        ("mnist", "relu network robustness query", mnist_replacement),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !wanted.is_empty() && !wanted.iter().any(|w| w == id) {
            continue;
        }
        let start = Instant::now();
        let res = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let t = start.elapsed();
        match res {
            Ok(detail) => println!("[PASS] {id} {name} ({t:.1?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {id} {name} ({t:.1?}): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
