//! Satisfiability of formulas through two backends: an internal complete
//! search for linear formulas and an external SMT-LIB solver.

pub mod enumerate;
pub mod external;
pub mod sexpr;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::formula::{Formula, LinExpr, Rel};
use crate::network::{Network, NetworkError};
use crate::rational::{to_f64, Rational};
use crate::smt::{emit_formula, vector_names, encode_with, EncodeError, Logic};

/// Tolerance for rechecking models returned by an external solver.
pub const EXTERNAL_TOLERANCE: f64 = 1e-6;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    Enumerate,
    External,
    /// Enumerate for linear formulas, External otherwise.
    #[default]
    Auto,
}

impl FromStr for Backend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "enum" | "enumerate" => Ok(Backend::Enumerate),
            "smt" | "external" => Ok(Backend::External),
            "auto" => Ok(Backend::Auto),
            other => Err(format!("unknown backend `{other}` (expected enum, smt or auto)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Sat(BTreeMap<String, Rational>),
    Unsat,
    Unknown(String),
}

impl Verdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, Verdict::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, Verdict::Unsat)
    }

    pub fn model(&self) -> Option<&BTreeMap<String, Rational>> {
        match self {
            Verdict::Sat(m) => Some(m),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("SMT solver not available: {0}")]
    SolverNotFound(String),
    #[error("cannot parse solver output: {0}")]
    Parse(String),
    #[error("the enumerate backend only accepts linear formulas")]
    NonlinearUnderEnumerate,
    #[error("timeout")]
    Timeout,
    #[error("solver i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone)]
pub struct Query {
    pub formula: Formula,
    /// Logic for the external backend; inferred when `None`.
    pub logic: Option<Logic>,
    pub timeout: Duration,
    pub backend: Backend,
    /// Solver binary; `AMNET_SMT_SOLVER` or `z3` when `None`.
    pub solver: Option<PathBuf>,
}

impl Query {
    pub fn new(formula: Formula) -> Self {
        Self {
            formula,
            logic: None,
            timeout: DEFAULT_TIMEOUT,
            backend: Backend::Auto,
            solver: None,
        }
    }

    pub fn backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }

    pub fn timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn logic(mut self, logic: Logic) -> Self {
        self.logic = Some(logic);
        self
    }

    /// The backend that will actually run.
    pub fn resolved_backend(&self) -> Backend {
        match self.backend {
            Backend::Auto if self.formula.has_poly() => Backend::External,
            Backend::Auto => Backend::Enumerate,
            b => b,
        }
    }
}

/// Decides the query. Sat verdicts always pass [`model_recheck`]; an
/// external model that fails the recheck is reported as `Unknown`.
pub fn solve(q: &Query) -> Result<Verdict, SolveError> {
    match q.resolved_backend() {
        Backend::External => {
            let logic = q
                .logic
                .unwrap_or(if q.formula.has_poly() { Logic::QfNra } else { Logic::QfLra });
            let free: Vec<String> = q.formula.free_vars().into_iter().collect();
            let script = emit_formula(&q.formula, logic, &free)?;
            let path = match &q.solver {
                Some(p) => p.clone(),
                None => external::solver_path()
                    .ok_or_else(|| SolveError::SolverNotFound(format!("set {} or put z3 on PATH", external::SOLVER_ENV)))?,
            };
            let verdict = external::run(&script, &path, q.timeout)?;
            match verdict {
                Verdict::Sat(mut m) => {
                    for v in q.formula.all_vars() {
                        m.entry(v).or_insert_with(|| Rational::from_integer(0.into()));
                    }
                    if model_recheck(q, &m) {
                        Ok(Verdict::Sat(m))
                    } else {
                        Ok(Verdict::Unknown("solver model failed recheck".into()))
                    }
                }
                other => Ok(other),
            }
        }
        _ => enumerate::solve_enumerate(&q.formula, Some(Instant::now() + q.timeout)),
    }
}

/// Substitutes the model into every atom: exact for the enumerate backend,
/// exact or within [`EXTERNAL_TOLERANCE`] for the external one.
pub fn model_recheck(q: &Query, model: &BTreeMap<String, Rational>) -> bool {
    if q.formula.eval(model) == Some(true) {
        return true;
    }
    if q.resolved_backend() != Backend::External {
        return false;
    }
    let approx: BTreeMap<String, f64> = model.iter().map(|(k, v)| (k.clone(), to_f64(v))).collect();
    q.formula.eval_approx(&approx, EXTERNAL_TOLERANCE) == Some(true)
}

/// Formula `x = a ∧ y = b ∧ smt_φ[x, y]`.
pub fn membership_formula(net: &Network, a: &[Rational], b: &[Rational]) -> Result<Formula, NetworkError> {
    if a.len() != net.input_dim() || b.len() != net.output_dim() {
        return Err(NetworkError::Dim(format!(
            "point has dimension {} -> {}, network is {} -> {}",
            a.len(),
            b.len(),
            net.input_dim(),
            net.output_dim()
        )));
    }
    let x = vector_names("x", a.len());
    let y = vector_names("y", b.len());
    let enc = encode_with(net, &x, &y, "v")?;
    let mut parts = vec![enc.formula];
    for (name, v) in x.iter().zip(a).chain(y.iter().zip(b)) {
        parts.push(Formula::cmp(LinExpr::var(name), Rel::Eq, &LinExpr::constant(v.clone())));
    }
    Ok(Formula::and(parts))
}

/// Sat iff `b = net(a)`.
pub fn check_graph_membership(
    net: &Network,
    a: &[Rational],
    b: &[Rational],
    backend: Backend,
) -> Result<Verdict, SolveError> {
    let f = membership_formula(net, a, b)?;
    solve(&Query::new(f).backend(backend))
}
