//! Max-of-affine Lyapunov functions for `x(t+1) = φ(x(t))`: synthesis by
//! counterexample-guided search, certificate logs, and λ-contractiveness of
//! polyhedra under saturated linear feedback.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::formula::{Formula, LinExpr, Rel};
use crate::lp::{maximize, LinSystem, MaxResult, RowRel};
use crate::network::{Network, NetworkBuilder, NetworkError, NodeId};
use crate::rational::{dot, max_abs, parse_rational, to_canonical_string, Matrix, Rational};
use crate::smt::{encode_with, vector_names};
use crate::solver::{solve, Backend, Query, SolveError, Verdict, DEFAULT_TIMEOUT};

/// Default margin `η`.
pub fn default_eta() -> Rational {
    Rational::new(1.into(), 1000.into())
}

/// Budget of activation patterns tried by [`e_solve`].
pub const PATTERN_BUDGET: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LyapError {
    #[error("invalid specification: {0}")]
    Spec(String),
    #[error("certificate log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// `V(x) = max_i (g_i·x + h_i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaxAffineFn {
    pieces: Vec<(Vec<Rational>, Rational)>,
}

impl MaxAffineFn {
    pub fn new(pieces: Vec<(Vec<Rational>, Rational)>) -> Result<Self, LyapError> {
        let Some(n) = pieces.first().map(|p| p.0.len()) else {
            return Err(LyapError::Spec("a max-affine function needs at least one piece".into()));
        };
        if n == 0 || pieces.iter().any(|p| p.0.len() != n) {
            return Err(LyapError::Spec("pieces must share one positive dimension".into()));
        }
        Ok(Self { pieces })
    }

    /// `‖x‖∞` as the pieces `±e_i`, shifted by `h`.
    pub fn inf_norm(n: usize, h: Rational) -> Self {
        let mut pieces = Vec::with_capacity(2 * n);
        for i in 0..n {
            for s in [1, -1] {
                let mut g = vec![Rational::zero(); n];
                g[i] = Rational::from_integer(s.into());
                pieces.push((g, h.clone()));
            }
        }
        Self { pieces }
    }

    pub fn pieces(&self) -> &[(Vec<Rational>, Rational)] {
        &self.pieces
    }

    pub fn dim(&self) -> usize {
        self.pieces[0].0.len()
    }

    pub fn eval(&self, x: &[Rational]) -> Rational {
        self.pieces
            .iter()
            .map(|(g, h)| dot(g, x) + h)
            .max()
            .expect("at least one piece")
    }

    /// Index of the first piece attaining the max.
    pub fn active_piece(&self, x: &[Rational]) -> usize {
        let v = self.eval(x);
        self.pieces.iter().position(|(g, h)| dot(g, x) + h == v).unwrap()
    }

    /// Network computing `V` as a chain of two-way maxima.
    pub fn to_network(&self) -> Network {
        let mut b = NetworkBuilder::new(self.dim());
        let x = b.input();
        let nodes: Vec<NodeId> = self
            .pieces
            .iter()
            .map(|(g, h)| b.affine(Matrix::row(g.clone()), vec![h.clone()], x).unwrap())
            .collect();
        let m = max_chain(&mut b, &nodes);
        b.finish(m).unwrap()
    }
}

/// `max(p_0, …, p_k)` of scalar nodes via `max(a, b) = μ(a, b, b − a)`.
fn max_chain(b: &mut NetworkBuilder, nodes: &[NodeId]) -> NodeId {
    let one = Rational::one();
    let mut m = nodes[0];
    for &p in &nodes[1..] {
        let guard = b.combine(&[(p, one.clone()), (m, -one.clone())], vec![Rational::zero()]).unwrap();
        m = b.mux(m, p, guard).unwrap();
    }
    m
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Variant {
    Global,
    /// The domain box is a region of attraction.
    Roa,
    /// `V(x⁺) < γ V(x)`.
    DecayRate(Rational),
    /// `{V ≤ 0}` is positively invariant.
    InvariantSet,
}

impl Variant {
    fn rho(&self) -> Rational {
        match self {
            Variant::DecayRate(g) => g.clone(),
            _ => Rational::one(),
        }
    }
}

/// Box `lo_i ≤ x_i ≤ hi_i`.
pub type Domain = Vec<(Rational, Rational)>;

pub fn symmetric_box(n: usize, r: Rational) -> Domain {
    vec![(-r.clone(), r); n]
}

#[derive(Debug, Clone)]
pub struct LyapSpec {
    pub variant: Variant,
    pub dynamics: Network,
    /// `None` searches all of `ℝⁿ`.
    pub domain: Option<Domain>,
    pub eta: Rational,
}

impl LyapSpec {
    pub fn new(variant: Variant, dynamics: Network, domain: Option<Domain>) -> Result<Self, LyapError> {
        let n = dynamics.input_dim();
        if dynamics.output_dim() != n {
            return Err(LyapError::Spec("dynamics must map R^n to R^n".into()));
        }
        if let Variant::DecayRate(g) = &variant {
            if !g.is_positive() || g > &Rational::one() {
                return Err(LyapError::Spec("decay rate must lie in (0, 1]".into()));
            }
        }
        if let Some(d) = &domain {
            if d.len() != n || d.iter().any(|(lo, hi)| lo >= hi) {
                return Err(LyapError::Spec("domain box must have dimension n and positive volume".into()));
            }
        } else if matches!(variant, Variant::Roa | Variant::InvariantSet) {
            return Err(LyapError::Spec("this variant needs a domain box".into()));
        }
        let domain = if variant == Variant::Global { None } else { domain };
        Ok(Self {
            variant,
            dynamics,
            domain,
            eta: default_eta(),
        })
    }

    pub fn global(dynamics: Network) -> Result<Self, LyapError> {
        Self::new(Variant::Global, dynamics, None)
    }

    pub fn roa(dynamics: Network, domain: Domain) -> Result<Self, LyapError> {
        Self::new(Variant::Roa, dynamics, Some(domain))
    }

    pub fn with_eta(mut self, eta: Rational) -> Self {
        self.eta = eta;
        self
    }

    pub fn dim(&self) -> usize {
        self.dynamics.input_dim()
    }

    fn in_domain(&self, x: &[Rational]) -> bool {
        self.domain
            .as_ref()
            .is_none_or(|d| d.iter().zip(x).all(|((lo, hi), v)| lo <= v && v <= hi))
    }

    fn invariant(&self) -> bool {
        self.variant == Variant::InvariantSet
    }

    /// Whether `x` lies in the searched region and violates the condition.
    pub fn violates(&self, v: &MaxAffineFn, x: &[Rational]) -> Result<bool, NetworkError> {
        if x.len() != self.dim() || !self.in_domain(x) {
            return Ok(false);
        }
        let xp = self.dynamics.evaluate(x)?;
        let (vx, vp) = (v.eval(x), v.eval(&xp));
        if self.invariant() {
            return Ok(!vx.is_positive() && vp.is_positive());
        }
        if max_abs(x) <= self.eta {
            return Ok(false);
        }
        Ok(!vx.is_positive() || vp - self.variant.rho() * vx >= Rational::zero())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ESolve {
    Candidate { v: MaxAffineFn, pattern: Vec<usize> },
    NoCandidate,
}

/// Finds a candidate satisfying the condition on every counterexample.
pub fn e_solve(spec: &LyapSpec, cex: &[Vec<Rational>], n_pieces: usize) -> Result<ESolve, LyapError> {
    e_solve_with_hint(spec, cex, n_pieces, &[])
}

/// As [`e_solve`], trying the choices in `hint` first. Every prefix of the
/// hint is assumed feasible, so a hint from the previous call on a shorter
/// counterexample list saves most LP solves.
///
/// Lyapunov variants: `V(0) = 0`, `V(x_c) ≥ η‖x_c‖∞` and
/// `V(φ(x_c)) − ρV(x_c) ≤ −η‖x_c‖∞`, with `‖g_i‖∞ ≤ 1`. Choosing a piece `a`
/// per counterexample and bounding `V(x_c)` below by piece `a` makes each
/// choice a linear system. Invariant sets use `h_i = −1` and either exclude
/// `x_c` via one piece or include `φ(x_c)` in every piece.
pub fn e_solve_with_hint(spec: &LyapSpec, cex: &[Vec<Rational>], n_pieces: usize, hint: &[usize]) -> Result<ESolve, LyapError> {
    if n_pieces == 0 {
        return Err(LyapError::Spec("need at least one piece".into()));
    }
    let n = spec.dim();
    let h = if spec.invariant() { -Rational::one() } else { Rational::zero() };
    if cex.is_empty() {
        return Ok(ESolve::Candidate {
            v: MaxAffineFn::inf_norm(n, h),
            pattern: Vec::new(),
        });
    }
    let mut rows = Vec::with_capacity(cex.len());
    for x in cex {
        if x.len() != n {
            return Err(LyapError::Spec("counterexample dimension".into()));
        }
        rows.push((x.clone(), spec.dynamics.evaluate(x)?));
    }
    let mut search = PatternSearch {
        spec,
        k: n_pieces,
        n,
        data: rows,
        hint: hint.to_vec(),
        budget: PATTERN_BUDGET,
        chosen: Vec::new(),
    };
    match search.dfs(0, 0) {
        Some(g) => {
            let g = round_candidate(spec, cex, g, n, &h);
            let mut pieces: Vec<(Vec<Rational>, Rational)> = Vec::with_capacity(n_pieces);
            for c in g.chunks(n) {
                if !pieces.iter().any(|p| p.0 == c) {
                    pieces.push((c.to_vec(), h.clone()));
                }
            }
            Ok(ESolve::Candidate {
                v: MaxAffineFn { pieces },
                pattern: search.chosen,
            })
        }
        None => Ok(ESolve::NoCandidate),
    }
}

/// The coefficients rounded to the shortest decimal grid on which every
/// counterexample is still handled; short coefficients keep later LPs cheap.
fn round_candidate(spec: &LyapSpec, cex: &[Vec<Rational>], g: Vec<Rational>, n: usize, h: &Rational) -> Vec<Rational> {
    let ten = Rational::from_integer(10.into());
    let mut scale = Rational::from_integer(100.into());
    for _ in 0..5 {
        let r: Vec<Rational> = g.iter().map(|c| (c * &scale).round() / &scale).collect();
        let v = MaxAffineFn {
            pieces: r.chunks(n).map(|c| (c.to_vec(), h.clone())).collect(),
        };
        if cex.iter().all(|x| !spec.violates(&v, x).unwrap_or(true)) {
            return r;
        }
        scale *= &ten;
    }
    g
}

struct PatternSearch<'a> {
    spec: &'a LyapSpec,
    k: usize,
    n: usize,
    data: Vec<(Vec<Rational>, Vec<Rational>)>,
    hint: Vec<usize>,
    budget: usize,
    chosen: Vec<usize>,
}

impl PatternSearch<'_> {
    fn options(&self, depth: usize, used: usize) -> Vec<usize> {
        // pieces are interchangeable, so a fresh piece is always the next one
        let count = if self.spec.invariant() { self.k + 1 } else { self.k };
        let limit = if self.spec.invariant() { count } else { (used + 1).min(count) };
        let mut opts: Vec<usize> = (0..limit).collect();
        if limit > used && !self.spec.invariant() {
            // a fresh piece first
            opts.rotate_right(1);
        }
        if let Some(&h) = self.hint.get(depth) {
            if let Some(p) = opts.iter().position(|&o| o == h) {
                opts.remove(p);
                opts.insert(0, h);
            }
        }
        opts
    }

    fn dfs(&mut self, depth: usize, used: usize) -> Option<Vec<Rational>> {
        if depth == self.data.len() {
            return self.spend().then(|| self.solve_lp()).flatten();
        }
        for opt in self.options(depth, used) {
            self.chosen.push(opt);
            let on_hint = self.chosen.len() <= self.hint.len() && self.chosen[..] == self.hint[..self.chosen.len()];
            let leaf = depth + 1 == self.data.len();
            // prefixes of the hint are known feasible; leaves are solved below
            let prune = !on_hint && !leaf && !(self.spend() && self.solve_lp().is_some());
            if !prune {
                if let Some(g) = self.dfs(depth + 1, used.max(opt + 1)) {
                    return Some(g);
                }
            }
            self.chosen.pop();
            if self.budget == 0 {
                return None;
            }
        }
        None
    }

    fn spend(&mut self) -> bool {
        if self.budget == 0 {
            return false;
        }
        self.budget -= 1;
        true
    }

    /// Maximizes a common margin `t ≤ 1` over the chosen pattern; the
    /// pattern is feasible iff the optimum is non-negative. The LP is posed
    /// in `w = t + 1 + η` so that `g = 0`, `w = 0` is a feasible start.
    fn solve_lp(&self) -> Option<Vec<Rational>> {
        let (k, n) = (self.k, self.n);
        let nv = k * n + 1;
        let w = k * n;
        let one = Rational::one();
        let eta = &self.spec.eta;
        let rho = self.spec.variant.rho();
        let mut base = LinSystem::new(nv);
        for j in 0..k * n {
            let mut c = vec![Rational::zero(); nv];
            c[j] = one.clone();
            base.push(c.clone(), RowRel::Le, one.clone());
            c[j] = -one.clone();
            base.push(c, RowRel::Le, one.clone());
        }
        let mut c = vec![Rational::zero(); nv];
        c[w] = one.clone();
        base.push(c, RowRel::Le, &one + &one + eta);
        let mut cuts: Vec<(Vec<Rational>, Rational)> = Vec::new();
        for (&a, (x, xp)) in self.chosen.iter().zip(&self.data) {
            if self.spec.invariant() {
                if a < k {
                    // g_a·x_c ≥ 1 + η + t
                    let mut c = vec![Rational::zero(); nv];
                    for d in 0..n {
                        c[a * n + d] = -x[d].clone();
                    }
                    c[w] = one.clone();
                    cuts.push((c, Rational::zero()));
                } else {
                    // g_i·x⁺ ≤ 1 − η − t
                    for i in 0..k {
                        let mut c = vec![Rational::zero(); nv];
                        for d in 0..n {
                            c[i * n + d] = xp[d].clone();
                        }
                        c[w] = one.clone();
                        cuts.push((c, &one + &one));
                    }
                }
                continue;
            }
            let s = max_abs(x);
            // g_a·x_c ≥ (η + t) s
            let mut c = vec![Rational::zero(); nv];
            for d in 0..n {
                c[a * n + d] = -x[d].clone();
            }
            c[w] = s.clone();
            cuts.push((c, s.clone()));
            // g_j·x⁺ − ρ g_a·x_c ≤ −(η + t) s
            for j in 0..k {
                let mut c = vec![Rational::zero(); nv];
                for d in 0..n {
                    c[j * n + d] += &xp[d];
                    c[a * n + d] -= &rho * &x[d];
                }
                c[w] = s.clone();
                cuts.push((c, s.clone()));
            }
        }
        let mut obj = vec![Rational::zero(); nv];
        obj[w] = one.clone();
        // Constraint generation: the optimum over a subset of the cuts is an
        // upper bound, and it is the true optimum once no cut is violated.
        let mut active = vec![false; cuts.len()];
        let mut sys = base;
        loop {
            let (value, point) = match maximize(&sys, &obj) {
                MaxResult::Optimal { value, point } | MaxResult::Supremum { value, point } => (value, point),
                _ => return None,
            };
            if value < &one + eta {
                return None;
            }
            let mut violated: Vec<(Rational, usize)> = cuts
                .iter()
                .enumerate()
                .filter(|(i, _)| !active[*i])
                .filter_map(|(i, (c, b))| {
                    let excess = dot(c, &point) - b;
                    excess.is_positive().then_some((excess, i))
                })
                .collect();
            // a few at a time: adding every violated cut at once makes the
            // next LP start on a heavily degenerate vertex
            violated.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
            violated.truncate(nv);
            let added = violated.len();
            for (_, i) in violated {
                active[i] = true;
                sys.push(cuts[i].0.clone(), RowRel::Le, cuts[i].1.clone());
            }
            if added == 0 {
                let mut g = point;
                g.truncate(k * n);
                return Some(g);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FSolve {
    /// No violation exists: `V` is a certificate.
    Certified,
    Counterexample(Vec<Rational>),
    Unknown(String),
}

/// How max-of-affine functions enter a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaxEncoding {
    /// Through the encoding of the max-chain network.
    Network,
    /// Expanded over the pieces: `max_i a_i ≤ c` as `⋀_i a_i ≤ c` and
    /// `max_i a_i > c` as `⋁_i a_i > c`. Equivalent, and far cheaper for the
    /// enumeration backend.
    Pieces,
}

impl MaxEncoding {
    /// Pieces for the enumeration backend, networks otherwise.
    pub fn for_backend(backend: Backend) -> Self {
        match backend {
            Backend::External => MaxEncoding::Network,
            _ => MaxEncoding::Pieces,
        }
    }
}

fn piece_expr(g: &[Rational], h: &Rational, vars: &[String]) -> LinExpr {
    let mut e = LinExpr::constant(h.clone());
    for (c, v) in g.iter().zip(vars) {
        e.add_term(v, c.clone());
    }
    e
}

/// The formula `∃x ∈ 𝒳 . ¬lyap(V, x)` with free variables `x`.
pub fn f_solve_formula(spec: &LyapSpec, v: &MaxAffineFn, enc: MaxEncoding) -> Result<Formula, LyapError> {
    let n = spec.dim();
    if v.dim() != n {
        return Err(LyapError::Spec("candidate dimension differs from dynamics".into()));
    }
    let x = vector_names("x", n);
    let xp = vector_names("xp", n);
    let dynamics = encode_with(&spec.dynamics, &x, &xp, "b")?;
    let mut parts = vec![dynamics.body()];
    let mut bound = dynamics.aux;
    bound.extend(xp.iter().cloned());
    if let Some(d) = &spec.domain {
        for ((lo, hi), name) in d.iter().zip(&x) {
            parts.push(Formula::cmp(LinExpr::var(name), Rel::Ge, &LinExpr::constant(lo.clone())));
            parts.push(Formula::cmp(LinExpr::var(name), Rel::Le, &LinExpr::constant(hi.clone())));
        }
    }
    if !spec.invariant() {
        let eta = LinExpr::constant(spec.eta.clone());
        let faces = x
            .iter()
            .flat_map(|name| {
                [
                    Formula::cmp(LinExpr::var(name), Rel::Gt, &eta),
                    Formula::cmp(LinExpr::var(name).scale(&-Rational::one()), Rel::Gt, &eta),
                ]
            })
            .collect();
        parts.push(Formula::or(faces));
    }
    let rho = spec.variant.rho();
    let violation = match enc {
        MaxEncoding::Network => {
            let vnet = v.to_network();
            let (vx, vp) = ("v".to_string(), "vp".to_string());
            let e1 = encode_with(&vnet, &x, std::slice::from_ref(&vx), "a")?;
            let e3 = encode_with(&vnet, &xp, std::slice::from_ref(&vp), "c")?;
            parts.push(e1.body());
            parts.push(e3.body());
            bound.extend(e1.aux);
            bound.extend(e3.aux);
            bound.push(vx.clone());
            bound.push(vp.clone());
            let zero = LinExpr::zero();
            if spec.invariant() {
                Formula::and(vec![
                    Formula::cmp(LinExpr::var(&vx), Rel::Le, &zero),
                    Formula::cmp(LinExpr::var(&vp), Rel::Gt, &zero),
                ])
            } else {
                let decrease = LinExpr::var(&vp).sub(&LinExpr::var(&vx).scale(&rho));
                Formula::or(vec![Formula::cmp(LinExpr::var(&vx), Rel::Le, &zero), Formula::atom(decrease, Rel::Ge)])
            }
        }
        MaxEncoding::Pieces => {
            let at_x: Vec<LinExpr> = v.pieces().iter().map(|(g, h)| piece_expr(g, h, &x)).collect();
            let at_xp: Vec<LinExpr> = v.pieces().iter().map(|(g, h)| piece_expr(g, h, &xp)).collect();
            let nonpositive = Formula::and(at_x.iter().map(|e| Formula::atom(e.clone(), Rel::Le)).collect());
            if spec.invariant() {
                let outside = Formula::or(at_xp.iter().map(|e| Formula::atom(e.clone(), Rel::Gt)).collect());
                Formula::and(vec![nonpositive, outside])
            } else {
                // V(x⁺) ≥ ρV(x) iff some piece at x⁺ dominates every scaled piece at x
                let no_decrease = at_xp
                    .iter()
                    .map(|ej| {
                        Formula::and(
                            at_x.iter()
                                .map(|ei| Formula::atom(ej.clone().sub(&ei.scale(&rho)), Rel::Ge))
                                .collect(),
                        )
                    })
                    .collect();
                Formula::or(vec![nonpositive, Formula::or(no_decrease)])
            }
        }
    };
    parts.push(violation);
    Ok(Formula::exists(bound, Formula::and(parts)))
}

/// Searches the domain for a point violating the condition. Witnesses are
/// rechecked exactly; one that fails is reported as `Unknown`.
pub fn f_solve(spec: &LyapSpec, v: &MaxAffineFn, backend: Backend, timeout: Duration) -> Result<FSolve, LyapError> {
    let f = f_solve_formula(spec, v, MaxEncoding::for_backend(backend))?;
    match solve(&Query::new(f).backend(backend).timeout(timeout))? {
        Verdict::Unsat => Ok(FSolve::Certified),
        Verdict::Unknown(r) => Ok(FSolve::Unknown(r)),
        Verdict::Sat(m) => {
            let x: Vec<Rational> = vector_names("x", spec.dim())
                .iter()
                .map(|n| m.get(n).cloned().unwrap_or_default())
                .collect();
            if spec.violates(v, &x)? {
                Ok(FSolve::Counterexample(x))
            } else {
                Ok(FSolve::Unknown("counterexample failed exact recheck".into()))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CegisConfig {
    pub n_pieces: usize,
    pub max_iters: usize,
    pub backend: Backend,
    /// Per-query solver timeout.
    pub timeout: Duration,
    /// Wall-clock budget for the whole loop.
    pub budget: Option<Duration>,
    pub x0: Vec<Rational>,
}

impl CegisConfig {
    pub fn new(n_pieces: usize, max_iters: usize, x0: Vec<Rational>) -> Self {
        Self {
            n_pieces,
            max_iters,
            backend: Backend::Enumerate,
            timeout: DEFAULT_TIMEOUT,
            budget: None,
            x0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterRecord {
    pub candidate: MaxAffineFn,
    pub counterexample: Option<Vec<Rational>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CegisState {
    pub counterexamples: Vec<Vec<Rational>>,
    pub iteration: usize,
    pub candidate: Option<MaxAffineFn>,
    pub history: Vec<IterRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CegisOutcome {
    Stable { v: MaxAffineFn, log: CertificateLog },
    Unknown { state: CegisState, reason: String },
}

/// A nearby point with a short decimal expansion that is still a valid
/// counterexample, or `x` itself.
fn simplify_counterexample(spec: &LyapSpec, v: &MaxAffineFn, x: &[Rational]) -> Vec<Rational> {
    let mut scale = Rational::one();
    for _ in 0..8 {
        scale *= Rational::from_integer(10.into());
        let y: Vec<Rational> = x.iter().map(|c| (c * &scale).round() / &scale).collect();
        if spec.violates(v, &y).unwrap_or(false) {
            return y;
        }
    }
    x.to_vec()
}

/// Alternates [`e_solve`] and [`f_solve`] starting from `{x0}`.
pub fn cegis(spec: &LyapSpec, cfg: &CegisConfig) -> Result<CegisOutcome, LyapError> {
    cegis_with_progress(spec, cfg, &mut |_| {})
}

/// [`cegis`], calling `progress` after every iteration.
pub fn cegis_with_progress(
    spec: &LyapSpec,
    cfg: &CegisConfig,
    progress: &mut dyn FnMut(&CegisState),
) -> Result<CegisOutcome, LyapError> {
    if cfg.x0.len() != spec.dim() || !spec.in_domain(&cfg.x0) {
        return Err(LyapError::Spec("seed point must lie in the domain".into()));
    }
    let start = Instant::now();
    let mut state = CegisState {
        counterexamples: vec![cfg.x0.clone()],
        ..CegisState::default()
    };
    let mut hint = Vec::new();
    let unknown = |state: CegisState, reason: &str| Ok(CegisOutcome::Unknown { state, reason: reason.into() });
    while state.iteration < cfg.max_iters {
        if cfg.budget.is_some_and(|b| start.elapsed() >= b) {
            return unknown(state, "time budget exhausted");
        }
        let v = match e_solve_with_hint(spec, &state.counterexamples, cfg.n_pieces, &hint)? {
            ESolve::NoCandidate => return unknown(state, "no candidate fits the counterexamples"),
            ESolve::Candidate { v, pattern } => {
                hint = pattern;
                v
            }
        };
        state.candidate = Some(v.clone());
        state.iteration += 1;
        match f_solve(spec, &v, cfg.backend, cfg.timeout)? {
            FSolve::Certified => {
                state.history.push(IterRecord {
                    candidate: v.clone(),
                    counterexample: None,
                });
                let log = CertificateLog::from_run(spec, &state.history, true);
                return Ok(CegisOutcome::Stable { v, log });
            }
            FSolve::Counterexample(x) => {
                let x = simplify_counterexample(spec, &v, &x);
                state.history.push(IterRecord {
                    candidate: v,
                    counterexample: Some(x.clone()),
                });
                state.counterexamples.push(x);
            }
            FSolve::Unknown(r) => return unknown(state, &r),
        }
        progress(&state);
    }
    unknown(state, "iteration limit reached")
}

/// Line-oriented record of a synthesis run:
///
/// ```text
/// amnet-lyapunov 1
/// variant roa
/// eta 1/1000
/// box -10 10 -10 10
/// candidate 1
/// piece 1 0 0
/// counterexample 3/2 -1
/// verdict stable
/// ```
///
/// `piece` lines list `g` then `h`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CertificateLog {
    pub variant: Variant,
    pub eta: Rational,
    pub domain: Option<Domain>,
    pub history: Vec<IterRecord>,
    pub stable: bool,
}

impl CertificateLog {
    fn from_run(spec: &LyapSpec, history: &[IterRecord], stable: bool) -> Self {
        Self {
            variant: spec.variant.clone(),
            eta: spec.eta.clone(),
            domain: spec.domain.clone(),
            history: history.to_vec(),
            stable,
        }
    }

    pub fn final_candidate(&self) -> Option<&MaxAffineFn> {
        self.history.last().map(|r| &r.candidate)
    }

    pub fn write(&self) -> String {
        let q = to_canonical_string;
        let join = |v: &[Rational]| v.iter().map(q).collect::<Vec<_>>().join(" ");
        let mut s = String::from("amnet-lyapunov 1\n");
        let variant = match &self.variant {
            Variant::Global => "global".to_string(),
            Variant::Roa => "roa".to_string(),
            Variant::DecayRate(g) => format!("decay {}", q(g)),
            Variant::InvariantSet => "invariant".to_string(),
        };
        writeln!(s, "variant {variant}").unwrap();
        writeln!(s, "eta {}", q(&self.eta)).unwrap();
        match &self.domain {
            None => s.push_str("box none\n"),
            Some(d) => {
                let flat: Vec<Rational> = d.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect();
                writeln!(s, "box {}", join(&flat)).unwrap();
            }
        }
        for (i, r) in self.history.iter().enumerate() {
            writeln!(s, "candidate {}", i + 1).unwrap();
            for (g, h) in r.candidate.pieces() {
                writeln!(s, "piece {} {}", join(g), q(h)).unwrap();
            }
            if let Some(x) = &r.counterexample {
                writeln!(s, "counterexample {}", join(x)).unwrap();
            }
        }
        writeln!(s, "verdict {}", if self.stable { "stable" } else { "unknown" }).unwrap();
        s
    }

    pub fn parse(text: &str) -> Result<Self, LyapError> {
        let err = |line: usize, m: &str| LyapError::Log {
            line,
            message: m.to_string(),
        };
        let nums = |line: usize, items: &[&str]| -> Result<Vec<Rational>, LyapError> {
            items
                .iter()
                .map(|t| parse_rational(t).map_err(|e| err(line, &e.to_string())))
                .collect()
        };
        let mut variant = None;
        let mut eta = None;
        let mut domain = None;
        let mut stable = None;
        let mut history: Vec<IterRecord> = Vec::new();
        let mut pending: Option<Vec<(Vec<Rational>, Rational)>> = None;
        let mut seen_header = false;
        let flush = |pending: &mut Option<Vec<(Vec<Rational>, Rational)>>,
                     history: &mut Vec<IterRecord>,
                     cex: Option<Vec<Rational>>,
                     line: usize|
         -> Result<(), LyapError> {
            if let Some(p) = pending.take() {
                let candidate = MaxAffineFn::new(p).map_err(|e| err(line, &e.to_string()))?;
                history.push(IterRecord {
                    candidate,
                    counterexample: cex,
                });
            } else if cex.is_some() {
                return Err(err(line, "counterexample without candidate"));
            }
            Ok(())
        };
        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let toks: Vec<&str> = raw.split_whitespace().collect();
            let Some((&head, rest)) = toks.split_first() else {
                continue;
            };
            if head.starts_with('#') {
                continue;
            }
            match head {
                "amnet-lyapunov" if rest == ["1"] => seen_header = true,
                _ if !seen_header => return Err(err(ln, "missing header")),
                "variant" => {
                    variant = Some(match rest {
                        ["global"] => Variant::Global,
                        ["roa"] => Variant::Roa,
                        ["invariant"] => Variant::InvariantSet,
                        ["decay", g] => Variant::DecayRate(nums(ln, &[g])?.remove(0)),
                        _ => return Err(err(ln, "unknown variant")),
                    })
                }
                "eta" if rest.len() == 1 => eta = Some(nums(ln, rest)?.remove(0)),
                "box" if rest == ["none"] => domain = Some(None),
                "box" if !rest.is_empty() && rest.len() % 2 == 0 => {
                    let v = nums(ln, rest)?;
                    domain = Some(Some(v.chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect()));
                }
                "candidate" => {
                    flush(&mut pending, &mut history, None, ln)?;
                    pending = Some(Vec::new());
                }
                "piece" if rest.len() >= 2 => {
                    let mut v = nums(ln, rest)?;
                    let h = v.pop().unwrap();
                    pending.as_mut().ok_or_else(|| err(ln, "piece outside candidate"))?.push((v, h));
                }
                "counterexample" if !rest.is_empty() => {
                    let x = nums(ln, rest)?;
                    flush(&mut pending, &mut history, Some(x), ln)?;
                }
                "verdict" => {
                    flush(&mut pending, &mut history, None, ln)?;
                    stable = Some(match rest {
                        ["stable"] => true,
                        ["unknown"] => false,
                        _ => return Err(err(ln, "unknown verdict")),
                    });
                }
                _ => return Err(err(ln, &format!("unexpected `{raw}`"))),
            }
        }
        let end = text.lines().count();
        Ok(Self {
            variant: variant.ok_or_else(|| err(end, "missing variant"))?,
            eta: eta.ok_or_else(|| err(end, "missing eta"))?,
            domain: domain.ok_or_else(|| err(end, "missing box"))?,
            history,
            stable: stable.ok_or_else(|| err(end, "missing verdict"))?,
        })
    }

    /// The specification the log was produced for, given the dynamics.
    pub fn spec(&self, dynamics: Network) -> Result<LyapSpec, LyapError> {
        Ok(LyapSpec::new(self.variant.clone(), dynamics, self.domain.clone())?.with_eta(self.eta.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Replay {
    /// Every counterexample violates its candidate and the final candidate
    /// is certified.
    Valid,
    BadCounterexample(usize),
    NotCertified(FSolve),
}

/// Rechecks a certificate log against the dynamics.
pub fn replay(log: &CertificateLog, dynamics: Network, backend: Backend, timeout: Duration) -> Result<Replay, LyapError> {
    let spec = log.spec(dynamics)?;
    for (i, r) in log.history.iter().enumerate() {
        if let Some(x) = &r.counterexample {
            if !spec.violates(&r.candidate, x)? {
                return Ok(Replay::BadCounterexample(i + 1));
            }
        }
    }
    let Some(v) = log.final_candidate() else {
        return Ok(Replay::NotCertified(FSolve::Unknown("log has no candidate".into())));
    };
    match f_solve(&spec, v, backend, timeout)? {
        FSolve::Certified => Ok(Replay::Valid),
        other => Ok(Replay::NotCertified(other)),
    }
}

/// `S(G, w) = {x | Gx ⪯ w}` with `w ≻ 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polyhedron {
    g: Matrix,
    w: Vec<Rational>,
}

impl Polyhedron {
    pub fn new(g: Matrix, w: Vec<Rational>) -> Result<Self, LyapError> {
        if g.rows() != w.len() || g.rows() == 0 {
            return Err(LyapError::Spec("G and w row counts differ".into()));
        }
        if w.iter().any(|v| !v.is_positive()) {
            return Err(LyapError::Spec("w must be positive".into()));
        }
        Ok(Self { g, w })
    }

    pub fn g(&self) -> &Matrix {
        &self.g
    }

    pub fn w(&self) -> &[Rational] {
        &self.w
    }

    pub fn scaled_w(&self, d: &Rational) -> Self {
        Self {
            g: self.g.clone(),
            w: self.w.iter().map(|v| v * d).collect(),
        }
    }

    /// `Gx ⪯ s·w`.
    pub fn contains_scaled(&self, x: &[Rational], s: &Rational) -> bool {
        self.g.mul_vec(x).iter().zip(&self.w).all(|(a, b)| a <= &(b * s))
    }
}

/// `x ↦ Ax + B·sat(Fx)` with `sat` clipping to `[−u_min, u_max]`.
pub fn saturated_feedback(
    a: &Matrix,
    b: &[Rational],
    f: &[Rational],
    u_min: &Rational,
    u_max: &Rational,
) -> Result<Network, LyapError> {
    let n = a.rows();
    if a.cols() != n || b.len() != n || f.len() != n {
        return Err(LyapError::Spec("A must be n×n, B and F length n".into()));
    }
    if -u_min > *u_max {
        return Err(LyapError::Spec("empty saturation interval".into()));
    }
    let one = Rational::one();
    let mut nb = NetworkBuilder::new(n);
    let x = nb.input();
    let s = nb.affine(Matrix::row(f.to_vec()), vec![Rational::zero()], x)?;
    let lo = nb.constant(vec![-u_min.clone()])?;
    let hi = nb.constant(vec![u_max.clone()])?;
    let below = nb.scale_shift(s, one.clone(), u_min.clone())?;
    let inner = nb.mux(lo, s, below)?;
    let above = nb.scale_shift(s, -one, u_max.clone())?;
    let u = nb.mux(hi, inner, above)?;
    let bcol = Matrix::from_rows(b.iter().map(|v| vec![v.clone()]).collect()).unwrap();
    let next = nb.affine_stacked(a.hcat(&bcol), vec![Rational::zero(); n], &[x, u])?;
    Ok(nb.finish(next)?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Contractive {
    Verified,
    Refuted {
        x: Vec<Rational>,
        x_plus: Vec<Rational>,
        epsilon: Rational,
    },
    Unknown(String),
}

/// `V₁(x, ε) = max_i(g_i x − ε w_i)` and
/// `V₂(x, ε) = max_i(g_i φ(x) − ε λ w_i)` on the stacked input `(x, ε)`.
pub fn contractive_networks(phi: &Network, poly: &Polyhedron, lambda: &Rational) -> Result<(Network, Network), LyapError> {
    let n = phi.input_dim();
    if poly.g.cols() != n || phi.output_dim() != n {
        return Err(LyapError::Spec("G, w and dynamics dimensions differ".into()));
    }
    let row = |i: usize, s: &Rational| {
        let mut r = poly.g.row_slice(i).to_vec();
        r.push(-(&poly.w[i] * s));
        Matrix::row(r)
    };
    let mut b1 = NetworkBuilder::new(n + 1);
    let z = b1.input();
    let pieces: Vec<NodeId> = (0..poly.g.rows())
        .map(|i| b1.affine(row(i, &Rational::one()), vec![Rational::zero()], z).unwrap())
        .collect();
    let m = max_chain(&mut b1, &pieces);
    let v1 = b1.finish(m)?;

    let mut b2 = NetworkBuilder::new(n + 1);
    let z = b2.input();
    let proj = Matrix::identity(n).hcat(&Matrix::zeros(n, 1));
    let x = b2.affine(proj, vec![Rational::zero(); n], z)?;
    let next = b2.embed(phi, x)?;
    let eps = b2.select(z, n)?;
    let pieces: Vec<NodeId> = (0..poly.g.rows())
        .map(|i| b2.affine_stacked(row(i, lambda), vec![Rational::zero()], &[next, eps]).unwrap())
        .collect();
    let m = max_chain(&mut b2, &pieces);
    Ok((v1, b2.finish(m)?))
}

/// `¬Φ = ∃x, ε . V₁ ≤ 0 ∧ V₂ > 0 ∧ 0 < ε ≤ 1`.
pub fn contractive_formula(phi: &Network, poly: &Polyhedron, lambda: &Rational, enc: MaxEncoding) -> Result<Formula, LyapError> {
    let n = phi.input_dim();
    let mut z = vector_names("x", n);
    z.push("eps".into());
    let zero = LinExpr::zero();
    let eps = LinExpr::var("eps");
    let mut parts = vec![
        Formula::cmp(eps.clone(), Rel::Gt, &zero),
        Formula::cmp(eps.clone(), Rel::Le, &LinExpr::constant(Rational::one())),
    ];
    let mut bound = Vec::new();
    match enc {
        MaxEncoding::Network => {
            let (v1, v2) = contractive_networks(phi, poly, lambda)?;
            let e1 = encode_with(&v1, &z, &["v1".to_string()], "a")?;
            let e2 = encode_with(&v2, &z, &["v2".to_string()], "b")?;
            parts.extend([
                e1.body(),
                e2.body(),
                Formula::cmp(LinExpr::var("v1"), Rel::Le, &zero),
                Formula::cmp(LinExpr::var("v2"), Rel::Gt, &zero),
            ]);
            bound.extend(e1.aux);
            bound.extend(e2.aux);
            bound.extend(["v1".to_string(), "v2".to_string()]);
        }
        MaxEncoding::Pieces => {
            if poly.g.cols() != n || phi.output_dim() != n {
                return Err(LyapError::Spec("G, w and dynamics dimensions differ".into()));
            }
            let xp = vector_names("xp", n);
            let e = encode_with(phi, &z[..n], &xp, "b")?;
            parts.push(e.body());
            bound.extend(e.aux);
            bound.extend(xp.iter().cloned());
            let zero_h = Rational::zero();
            let mut outside = Vec::with_capacity(poly.g.rows());
            for i in 0..poly.g.rows() {
                let g = poly.g.row_slice(i);
                let inside = piece_expr(g, &zero_h, &z[..n]).sub(&eps.scale(&poly.w[i]));
                parts.push(Formula::atom(inside, Rel::Le));
                let after = piece_expr(g, &zero_h, &xp).sub(&eps.scale(&(&poly.w[i] * lambda)));
                outside.push(Formula::atom(after, Rel::Gt));
            }
            parts.push(Formula::or(outside));
        }
    }
    Ok(Formula::exists(bound, Formula::and(parts)))
}

/// Decides whether `S(G, w)` is λ-contractive for `φ`. Refutations are
/// rechecked exactly.
pub fn contractive_check(
    phi: &Network,
    poly: &Polyhedron,
    lambda: &Rational,
    backend: Backend,
    timeout: Duration,
) -> Result<Contractive, LyapError> {
    if !lambda.is_positive() || lambda >= &Rational::one() {
        return Err(LyapError::Spec("lambda must lie in (0, 1)".into()));
    }
    let f = contractive_formula(phi, poly, lambda, MaxEncoding::for_backend(backend))?;
    match solve(&Query::new(f).backend(backend).timeout(timeout))? {
        Verdict::Unsat => Ok(Contractive::Verified),
        Verdict::Unknown(r) => Ok(Contractive::Unknown(r)),
        Verdict::Sat(m) => {
            let x: Vec<Rational> = vector_names("x", phi.input_dim())
                .iter()
                .map(|k| m.get(k).cloned().unwrap_or_default())
                .collect();
            let epsilon = m.get("eps").cloned().unwrap_or_default();
            let x_plus = phi.evaluate(&x)?;
            if refutes(poly, lambda, &x, &x_plus, &epsilon) {
                Ok(Contractive::Refuted { x, x_plus, epsilon })
            } else {
                Ok(Contractive::Unknown("witness failed exact recheck".into()))
            }
        }
    }
}

/// `Gx ⪯ εw`, `0 < ε ≤ 1` and `Gx⁺ ⋠ ελw`.
pub fn refutes(poly: &Polyhedron, lambda: &Rational, x: &[Rational], x_plus: &[Rational], epsilon: &Rational) -> bool {
    epsilon.is_positive()
        && epsilon <= &Rational::one()
        && poly.contains_scaled(x, epsilon)
        && !poly.contains_scaled(x_plus, &(epsilon * lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn linear(a: Matrix) -> Network {
        let n = a.rows();
        let mut b = NetworkBuilder::new(n);
        let x = b.input();
        let y = b.affine(a, vec![Rational::zero(); n], x).unwrap();
        b.finish(y).unwrap()
    }

    fn half() -> Network {
        linear(Matrix::identity(2).scaled(&ratio(1, 2)))
    }

    #[test]
    fn max_affine_network_matches_eval() {
        let v = MaxAffineFn::new(vec![
            (vec![int(1), int(-2)], int(0)),
            (vec![int(-1), int(0)], int(1)),
            (vec![int(0), int(3)], int(-2)),
        ])
        .unwrap();
        let net = v.to_network();
        for p in [[0, 0], [3, -1], [-4, 2], [1, 5]] {
            let x = [int(p[0]), int(p[1])];
            assert_eq!(net.evaluate(&x).unwrap()[0], v.eval(&x));
        }
        assert!(MaxAffineFn::new(vec![]).is_err());
    }

    #[test]
    fn empty_counterexamples_give_inf_norm() {
        let spec = LyapSpec::roa(half(), symmetric_box(2, int(10))).unwrap();
        let ESolve::Candidate { v, .. } = e_solve(&spec, &[], 3).unwrap() else {
            panic!()
        };
        assert_eq!(v, MaxAffineFn::inf_norm(2, int(0)));
    }

    #[test]
    fn fixed_points_admit_no_candidate() {
        let spec = LyapSpec::roa(linear(Matrix::identity(2)), symmetric_box(2, int(10))).unwrap();
        assert_eq!(e_solve(&spec, &[vec![int(1), int(1)]], 4).unwrap(), ESolve::NoCandidate);
    }

    #[test]
    fn certificate_and_counterexample() {
        let v = MaxAffineFn::inf_norm(2, int(0));
        let spec = LyapSpec::roa(half(), symmetric_box(2, int(10))).unwrap();
        assert_eq!(f_solve(&spec, &v, Backend::Enumerate, DEFAULT_TIMEOUT).unwrap(), FSolve::Certified);
        let unstable = LyapSpec::roa(linear(Matrix::identity(2).scaled(&int(2))), symmetric_box(2, int(10))).unwrap();
        let FSolve::Counterexample(x) = f_solve(&unstable, &v, Backend::Enumerate, DEFAULT_TIMEOUT).unwrap() else {
            panic!()
        };
        assert!(unstable.violates(&v, &x).unwrap());
        let flat = MaxAffineFn::new(vec![(vec![int(0), int(0)], int(0))]).unwrap();
        assert!(matches!(
            f_solve(&spec, &flat, Backend::Enumerate, DEFAULT_TIMEOUT).unwrap(),
            FSolve::Counterexample(_)
        ));
    }

    #[test]
    fn cegis_and_log_roundtrip() {
        // ‖A‖∞ > 1, so ‖x‖∞ alone does not decrease
        let a = Matrix::from_rows(vec![vec![ratio(1, 2), ratio(3, 5)], vec![ratio(-3, 10), ratio(2, 5)]]).unwrap();
        let spec = LyapSpec::roa(linear(a.clone()), symmetric_box(2, int(10))).unwrap();
        let cfg = CegisConfig::new(8, 50, vec![int(10), int(10)]);
        let CegisOutcome::Stable { v, log } = cegis(&spec, &cfg).unwrap() else {
            panic!()
        };
        let text = log.write();
        let back = CertificateLog::parse(&text).unwrap();
        assert_eq!(back, log);
        assert_eq!(back.final_candidate(), Some(&v));
        assert_eq!(replay(&back, linear(a), Backend::Enumerate, DEFAULT_TIMEOUT).unwrap(), Replay::Valid);
        for r in &log.history {
            if let Some(x) = &r.counterexample {
                assert!(spec.violates(&r.candidate, x).unwrap());
            }
        }
    }

    #[test]
    fn doubling_is_unknown() {
        let spec = LyapSpec::roa(linear(Matrix::identity(2).scaled(&int(2))), symmetric_box(2, int(10))).unwrap();
        let cfg = CegisConfig::new(4, 20, vec![int(1), int(0)]);
        assert!(matches!(cegis(&spec, &cfg).unwrap(), CegisOutcome::Unknown { .. }));
    }

    #[test]
    fn invariant_set_for_contraction() {
        let spec = LyapSpec::new(Variant::InvariantSet, half(), Some(symmetric_box(2, int(10)))).unwrap();
        let v = MaxAffineFn::inf_norm(2, int(-1));
        assert_eq!(f_solve(&spec, &v, Backend::Enumerate, DEFAULT_TIMEOUT).unwrap(), FSolve::Certified);
    }

    #[test]
    fn zero_dynamics_are_contractive() {
        let g = Matrix::identity(2).vcat(&Matrix::identity(2).scaled(&int(-1)));
        let poly = Polyhedron::new(g, vec![int(1); 4]).unwrap();
        let phi = saturated_feedback(&Matrix::zeros(2, 2), &[int(0), int(0)], &[int(1), int(1)], &int(1), &int(1)).unwrap();
        assert_eq!(
            contractive_check(&phi, &poly, &ratio(1, 2), Backend::Enumerate, DEFAULT_TIMEOUT).unwrap(),
            Contractive::Verified
        );
        let grow = saturated_feedback(&Matrix::identity(2), &[int(0), int(0)], &[int(1), int(1)], &int(1), &int(1)).unwrap();
        let Contractive::Refuted { x, x_plus, epsilon } =
            contractive_check(&grow, &poly, &ratio(1, 2), Backend::Enumerate, DEFAULT_TIMEOUT).unwrap()
        else {
            panic!()
        };
        assert!(refutes(&poly, &ratio(1, 2), &x, &x_plus, &epsilon));
    }

    #[test]
    fn saturation_clips() {
        let phi = saturated_feedback(&Matrix::zeros(1, 1), &[int(1)], &[int(1)], &int(2), &int(3)).unwrap();
        assert_eq!(phi.evaluate(&[int(-5)]).unwrap(), vec![int(-2)]);
        assert_eq!(phi.evaluate(&[int(1)]).unwrap(), vec![int(1)]);
        assert_eq!(phi.evaluate(&[int(7)]).unwrap(), vec![int(3)]);
    }
}
