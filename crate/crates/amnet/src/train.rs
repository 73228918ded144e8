//! Parameter fitting: gradient descent with the weak mux derivative, and
//! exact consistency training over the dual encoding.
//!
//! The weak derivative routes the adjoint of a mux to the argument it
//! currently selects and gives its guard nothing, so parameters that only
//! feed guards never move.

use std::collections::BTreeMap;
use std::io::Read;
use std::ops::{Add, Mul};
use std::path::PathBuf;
use std::time::Duration;

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::formula::{Formula, LinExpr, Rel};
use crate::network::{Network, NetworkError, Node, ParameterVector};
use crate::rational::{from_f64, parse_rational, to_f64, ParseRationalError, Rational};
use crate::smt::{encode_dual, vector_names};
use crate::solver::{solve, Backend, Query, SolveError, Verdict, DEFAULT_TIMEOUT};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    pub pairs: Vec<(Vec<Rational>, Vec<Rational>)>,
}

#[derive(Debug, Error)]
pub enum DataError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: {source}")]
    Value { row: usize, source: ParseRationalError },
    #[error("row {row}: expected {expected} columns, found {found}")]
    Width { row: usize, expected: usize, found: usize },
    #[error("dataset needs at least one input and one output column")]
    Shape,
}

impl Dataset {
    pub fn new(pairs: Vec<(Vec<Rational>, Vec<Rational>)>) -> Self {
        Self { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Reads CSV with a header row: `q` input columns, then outputs.
    pub fn from_csv<R: Read>(reader: R, q: usize) -> Result<Self, DataError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let width = rdr.headers()?.len();
        if q == 0 || width <= q {
            return Err(DataError::Shape);
        }
        let mut pairs = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = i + 2;
            if rec.len() != width {
                return Err(DataError::Width {
                    row,
                    expected: width,
                    found: rec.len(),
                });
            }
            let vals: Vec<Rational> = rec
                .iter()
                .map(parse_rational)
                .collect::<Result<_, _>>()
                .map_err(|source| DataError::Value { row, source })?;
            pairs.push((vals[..q].to_vec(), vals[q..].to_vec()));
        }
        Ok(Self { pairs })
    }

    fn check(&self, net: &Network) -> Result<(), TrainError> {
        if self.pairs.is_empty() {
            return Err(TrainError::EmptyData);
        }
        for (x, y) in &self.pairs {
            if x.len() != net.input_dim() || y.len() != net.output_dim() {
                return Err(TrainError::Network(NetworkError::Dim(format!(
                    "data pair has shape {} -> {}, network is {} -> {}",
                    x.len(),
                    y.len(),
                    net.input_dim(),
                    net.output_dim()
                ))));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dataset is empty")]
    EmptyData,
    #[error("loss diverged at iteration {iteration}: {loss:e}")]
    Divergence { iteration: usize, loss: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Forward values and reverse-mode weak gradient of `seed · φθ(x)` with
/// respect to θ, for any ordered field type.
fn vjp<T>(net: &Network, theta: &[T], x: &[T], seed: &[T]) -> (Vec<T>, Vec<T>)
where
    T: Clone + Zero + PartialOrd + Add<Output = T> + Mul<Output = T>,
{
    let layout = net.parameter_layout();
    let mut offset = vec![0; net.len()];
    for s in layout.slots.iter().rev() {
        offset[s.node.0] = s.offset;
    }
    let mut vals: Vec<Vec<T>> = Vec::with_capacity(net.len());
    for id in net.ids() {
        let v = match net.node(id) {
            Node::Input { .. } => x.to_vec(),
            Node::Constant { value } => theta[offset[id.0]..offset[id.0] + value.len()].to_vec(),
            Node::Affine { children, .. } => {
                let arg: Vec<&T> = children.iter().flat_map(|c| vals[c.0].iter()).collect();
                let (rows, cols) = (net.dim(id), arg.len());
                let w = &theta[offset[id.0]..offset[id.0] + rows * cols];
                let b = &theta[offset[id.0] + rows * cols..offset[id.0] + rows * cols + rows];
                (0..rows)
                    .map(|i| {
                        let mut acc = b[i].clone();
                        for (j, a) in arg.iter().enumerate() {
                            acc = acc + w[i * cols + j].clone() * (*a).clone();
                        }
                        acc
                    })
                    .collect()
            }
            Node::Mux { x: a, y: b, z } => {
                if vals[z.0][0] <= T::zero() {
                    vals[a.0].clone()
                } else {
                    vals[b.0].clone()
                }
            }
        };
        vals.push(v);
    }
    let mut grad = vec![T::zero(); theta.len()];
    let mut adj: Vec<Vec<T>> = (0..net.len()).map(|k| vec![T::zero(); net.dim(crate::network::NodeId(k))]).collect();
    adj[net.output().0] = seed.to_vec();
    for id in net.ids().collect::<Vec<_>>().into_iter().rev() {
        let g = std::mem::take(&mut adj[id.0]);
        if g.iter().all(Zero::is_zero) {
            continue;
        }
        match net.node(id) {
            Node::Input { .. } => {}
            Node::Constant { value } => {
                for i in 0..value.len() {
                    grad[offset[id.0] + i] = grad[offset[id.0] + i].clone() + g[i].clone();
                }
            }
            Node::Affine { children, .. } => {
                let arg: Vec<T> = children.iter().flat_map(|c| vals[c.0].iter().cloned()).collect();
                let (rows, cols) = (net.dim(id), arg.len());
                let o = offset[id.0];
                let mut darg = vec![T::zero(); cols];
                for i in 0..rows {
                    if g[i].is_zero() {
                        continue;
                    }
                    for j in 0..cols {
                        let k = o + i * cols + j;
                        grad[k] = grad[k].clone() + g[i].clone() * arg[j].clone();
                        darg[j] = darg[j].clone() + theta[k].clone() * g[i].clone();
                    }
                    let kb = o + rows * cols + i;
                    grad[kb] = grad[kb].clone() + g[i].clone();
                }
                let mut pos = 0;
                for c in children {
                    let d = net.dim(*c);
                    for i in 0..d {
                        adj[c.0][i] = adj[c.0][i].clone() + darg[pos + i].clone();
                    }
                    pos += d;
                }
            }
            Node::Mux { x: a, y: b, z } => {
                let target = if vals[z.0][0] <= T::zero() { a } else { b };
                for (i, gi) in g.into_iter().enumerate() {
                    adj[target.0][i] = adj[target.0][i].clone() + gi;
                }
            }
        }
    }
    (std::mem::take(&mut vals[net.output().0]), grad)
}

/// Exact weak gradient of the (summed) output with respect to θ.
pub fn weak_gradient(net: &Network, theta: &ParameterVector, x: &[Rational]) -> Result<Vec<Rational>, NetworkError> {
    check_layout(net, theta)?;
    if x.len() != net.input_dim() {
        return Err(NetworkError::Dim("gradient input dimension".into()));
    }
    let seed = vec![Rational::from_integer(1.into()); net.output_dim()];
    Ok(vjp(net, &theta.theta, x, &seed).1)
}

/// Float weak gradient of the (summed) output.
pub fn weak_gradient_f64(net: &Network, theta: &[f64], x: &[f64]) -> Vec<f64> {
    let seed = vec![1.0; net.output_dim()];
    vjp(net, theta, x, &seed).1
}

/// Float forward evaluation with parameters `theta`.
pub fn evaluate_f64(net: &Network, theta: &[f64], x: &[f64]) -> Vec<f64> {
    let seed = vec![0.0; net.output_dim()];
    vjp(net, theta, x, &seed).0
}

fn check_layout(net: &Network, theta: &ParameterVector) -> Result<(), NetworkError> {
    let layout = net.parameter_layout();
    if theta.layout != layout || theta.theta.len() != layout.len {
        return Err(NetworkError::Layout("parameter vector does not match network".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LearningRate {
    Constant(f64),
    /// `α₀ / (k + 1)` at iteration `k`.
    Decay(f64),
}

impl LearningRate {
    pub fn at(self, k: usize) -> f64 {
        match self {
            LearningRate::Constant(a) => a,
            LearningRate::Decay(a) => a / (k as f64 + 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Start from the network's own parameters.
    Network,
    /// Start from the given parameters.
    Theta(Vec<f64>),
    /// Weights uniform on `[-1, 1]`; guard biases placed at data quantiles.
    Random { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub rate: LearningRate,
    pub grad_tol: f64,
    pub max_iters: usize,
    pub init: Init,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            rate: LearningRate::Constant(0.1),
            grad_tol: 1e-8,
            max_iters: 1000,
            init: Init::Random { seed: 0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub theta: Vec<f64>,
    pub initial_theta: Vec<f64>,
    /// Loss before each update, plus the final loss.
    pub loss_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl TrainResult {
    /// Final parameters as exact rationals in the network's layout.
    pub fn parameters(&self, net: &Network) -> ParameterVector {
        let p = net.parameters();
        let theta = self.theta.iter().map(|v| from_f64(*v).unwrap_or_default()).collect();
        p.with_theta(theta)
    }
}

fn to_f64_pairs(data: &Dataset) -> Vec<(Vec<f64>, Vec<f64>)> {
    data.pairs
        .iter()
        .map(|(x, y)| (x.iter().map(to_f64).collect(), y.iter().map(to_f64).collect()))
        .collect()
}

/// Least-squares loss `1/(2N) Σ ‖φθ(x) − y‖²` and its weak gradient.
pub fn loss_and_gradient(net: &Network, theta: &[f64], data: &[(Vec<f64>, Vec<f64>)]) -> (f64, Vec<f64>) {
    let n = data.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; theta.len()];
    for (x, y) in data {
        let out = evaluate_f64(net, theta, x);
        let r: Vec<f64> = out.iter().zip(y).map(|(a, b)| a - b).collect();
        loss += r.iter().map(|v| v * v).sum::<f64>();
        let (_, g) = vjp(net, theta, x, &r);
        for (acc, gi) in grad.iter_mut().zip(g) {
            *acc += gi;
        }
    }
    for g in &mut grad {
        *g /= n;
    }
    (loss / (2.0 * n), grad)
}

/// Random weights in `[-1, 1]`; each guard node's bias is then set so its
/// zero crossing sits at quantile `(j+1)/(G+1)` of its pre-activations over
/// the data, `j` being the guard's rank among the `G` guards.
pub fn random_init(net: &Network, data: &Dataset, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = net.parameter_layout();
    let mut theta: Vec<f64> = (0..layout.len).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let guards: Vec<_> = net.guard_nodes().into_iter().filter(|g| matches!(net.node(*g), Node::Affine { .. })).collect();
    let xs: Vec<Vec<f64>> = data.pairs.iter().map(|(x, _)| x.iter().map(to_f64).collect()).collect();
    let g_count = guards.len();
    for (j, g) in guards.iter().enumerate() {
        let slot_b = layout
            .slots
            .iter()
            .find(|s| s.node == *g && s.field == crate::network::ParamField::Bias)
            .expect("affine node has a bias");
        theta[slot_b.offset] = 0.0;
        let sub = sub_network(net, *g);
        let mut pre: Vec<f64> = xs
            .iter()
            .map(|x| evaluate_f64(&sub.0, &sub.1(&theta), x)[0])
            .collect();
        if pre.is_empty() {
            continue;
        }
        pre.sort_by(f64::total_cmp);
        let q = (j + 1) as f64 / (g_count + 1) as f64;
        let idx = ((pre.len() - 1) as f64 * q).round() as usize;
        theta[slot_b.offset] = -pre[idx];
    }
    theta
}

type ThetaMap = Box<dyn Fn(&[f64]) -> Vec<f64>>;

/// The sub-network computing node `out` and a map from full θ to its θ.
fn sub_network(net: &Network, out: crate::network::NodeId) -> (Network, ThetaMap) {
    let mut b = crate::network::NetworkBuilder::new(net.input_dim());
    let x = b.input();
    let mut map = Vec::with_capacity(net.len());
    for id in net.ids() {
        let nid = match net.node(id) {
            Node::Input { .. } => x,
            Node::Constant { value } => b.constant(value.clone()).unwrap(),
            Node::Affine {
                weights,
                bias,
                children,
            } => {
                let ch: Vec<_> = children.iter().map(|c| map[c.0]).collect();
                b.affine_stacked(weights.clone(), bias.clone(), &ch).unwrap()
            }
            Node::Mux { x: a, y: c, z } => b.mux(map[a.0], map[c.0], map[z.0]).unwrap(),
        };
        map.push(nid);
        if id == out {
            break;
        }
    }
    let sub = b.finish(map[out.0]).expect("prefix of a valid network");
    // parameter blocks of kept nodes, matched by structure in node order
    let full = net.parameter_layout();
    let kept: Vec<usize> = {
        let mut used = vec![false; net.len()];
        used[out.0] = true;
        for k in (0..=out.0).rev() {
            if used[k] {
                for c in net.node(crate::network::NodeId(k)).children() {
                    used[c.0] = true;
                }
            }
        }
        used.iter().enumerate().filter(|(_, u)| **u).map(|(k, _)| k).collect()
    };
    let ranges: Vec<(usize, usize)> = full
        .slots
        .iter()
        .filter(|s| kept.contains(&s.node.0))
        .map(|s| (s.offset, s.rows * s.cols))
        .collect();
    (
        sub,
        Box::new(move |theta: &[f64]| ranges.iter().flat_map(|&(o, n)| theta[o..o + n].iter().copied()).collect()),
    )
}

/// Gradient descent `θ ← θ − α_k ∇J(θ)` until `‖∇J‖ ≤ grad_tol` or
/// `max_iters`. Parameters that only feed guards are never updated.
pub fn gd_train(net: &Network, data: &Dataset, cfg: &TrainConfig) -> Result<TrainResult, TrainError> {
    data.check(net)?;
    let layout = net.parameter_layout();
    let mut theta = match &cfg.init {
        Init::Network => net.parameters().theta.iter().map(to_f64).collect(),
        Init::Theta(t) => {
            if t.len() != layout.len {
                return Err(TrainError::Config(format!("initial theta has {} entries, need {}", t.len(), layout.len)));
            }
            t.clone()
        }
        Init::Random { seed } => random_init(net, data, *seed),
    };
    let initial_theta = theta.clone();
    let frozen = net.enable_parameter_mask();
    let pairs = to_f64_pairs(data);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut k = 0;
    let initial_loss;
    {
        let (l, _) = loss_and_gradient(net, &theta, &pairs);
        initial_loss = l;
    }
    loop {
        let (loss, grad) = loss_and_gradient(net, &theta, &pairs);
        trace.push(loss);
        if !loss.is_finite() || loss > 1e6 * initial_loss.max(f64::MIN_POSITIVE) {
            return Err(TrainError::Divergence { iteration: k, loss });
        }
        let norm = grad
            .iter()
            .zip(&frozen)
            .filter(|(_, f)| !**f)
            .map(|(g, _)| g * g)
            .sum::<f64>()
            .sqrt();
        if norm <= cfg.grad_tol {
            converged = true;
            break;
        }
        if k >= cfg.max_iters {
            break;
        }
        let alpha = cfg.rate.at(k);
        for ((t, g), f) in theta.iter_mut().zip(&grad).zip(&frozen) {
            if !*f {
                *t -= alpha * g;
            }
        }
        k += 1;
    }
    Ok(TrainResult {
        theta,
        initial_theta,
        loss_trace: trace,
        iterations: k,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Consistency {
    Params(ParameterVector),
    Inconsistent,
    Unknown(String),
}

#[derive(Debug, Clone)]
pub struct ConsistencyOptions {
    pub backend: Backend,
    pub timeout: Duration,
    pub solver: Option<PathBuf>,
}

impl Default for ConsistencyOptions {
    fn default() -> Self {
        Self {
            backend: Backend::Auto,
            timeout: DEFAULT_TIMEOUT,
            solver: None,
        }
    }
}

/// `⋀_i ‖y_i − φθ(x_i)‖₁ ≤ ε` over the dual encodings; free variables are
/// the parameter names.
pub fn consistency_formula(net: &Network, data: &Dataset, eps: &Rational, theta_names: &[String]) -> Result<Formula, NetworkError> {
    let mut parts = Vec::new();
    let mut bound = Vec::new();
    for (i, (x, y)) in data.pairs.iter().enumerate() {
        let out = vector_names(&format!("p{i}y"), net.output_dim());
        let enc = encode_dual(net, x, theta_names, &out, &format!("p{i}v"))?;
        bound.extend(enc.aux.iter().cloned());
        bound.extend(out.iter().cloned());
        parts.push(enc.body());
        let mut sum = LinExpr::zero();
        for (j, (o, target)) in out.iter().zip(y).enumerate() {
            let s = format!("p{i}s{j}");
            let diff = LinExpr::var(o).sub(&LinExpr::constant(target.clone()));
            parts.push(Formula::cmp(diff.clone(), Rel::Le, &LinExpr::var(&s)));
            parts.push(Formula::cmp(diff.scale(&-Rational::from_integer(1.into())), Rel::Le, &LinExpr::var(&s)));
            sum = sum.add(&LinExpr::var(&s));
            bound.push(s);
        }
        parts.push(Formula::cmp(sum, Rel::Le, &LinExpr::constant(eps.clone())));
    }
    Ok(Formula::exists(bound, Formula::and(parts)))
}

/// Exact check `‖y − φθ(x)‖₁ ≤ ε` on every pair.
pub fn is_consistent(net: &Network, data: &Dataset, eps: &Rational) -> Result<bool, NetworkError> {
    for (x, y) in &data.pairs {
        let out = net.evaluate(x)?;
        let err: Rational = out.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
        if &err > eps {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Finds parameters making the network ε-consistent with the data, or
/// proves none exist. Returned parameters always pass [`is_consistent`].
pub fn consistency_train(
    net: &Network,
    data: &Dataset,
    eps: &Rational,
    opts: &ConsistencyOptions,
) -> Result<Consistency, TrainError> {
    data.check(net)?;
    if eps.is_negative() {
        return Err(TrainError::Config("epsilon must be non-negative".into()));
    }
    let names: Vec<String> = (0..net.parameter_layout().len).map(|k| format!("theta{k}")).collect();
    let f = consistency_formula(net, data, eps, &names)?;
    let mut q = Query::new(f).backend(opts.backend).timeout(opts.timeout);
    q.solver = opts.solver.clone();
    match solve(&q)? {
        Verdict::Unsat => Ok(Consistency::Inconsistent),
        Verdict::Unknown(r) => Ok(Consistency::Unknown(r)),
        Verdict::Sat(m) => {
            let theta: Vec<Rational> = names.iter().map(|n| m.get(n).cloned().unwrap_or_default()).collect();
            let params = net.parameters().with_theta(theta);
            let bound = net.bind_params(&params)?;
            if is_consistent(&bound, data, eps)? {
                Ok(Consistency::Params(params))
            } else {
                Ok(Consistency::Unknown("parameters failed the forward recheck".into()))
            }
        }
    }
}

/// Model values keyed by parameter index, for reporting.
pub fn theta_map(p: &ParameterVector) -> BTreeMap<usize, Rational> {
    p.theta.iter().cloned().enumerate().collect()
}
