//! Minimization of a network objective under network constraints by
//! bisection on the level `t` of `objective(x) ≤ t`.

use std::time::Duration;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::formula::{Formula, Rel};
use crate::network::{Network, NetworkError};
use crate::rational::Rational;
use crate::smt::{feasibility_formula, vector_names, Constraint};
use crate::solver::{solve, Backend, Query, SolveError, Verdict, DEFAULT_TIMEOUT};

#[derive(Debug, Clone)]
pub struct BisectionConfig {
    pub lower: Rational,
    pub upper: Rational,
    pub eps: Rational,
    pub backend: Backend,
    pub max_iters: usize,
    pub timeout: Duration,
}

impl BisectionConfig {
    pub fn new(lower: Rational, upper: Rational, eps: Rational) -> Self {
        Self {
            lower,
            upper,
            eps,
            backend: Backend::Auto,
            max_iters: 200,
            timeout: DEFAULT_TIMEOUT,
        }
    }

    pub fn backend(mut self, backend: Backend) -> Self {
        self.backend = backend;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MinResult {
    /// The optimum lies in `[lower, upper]`; `witness` is feasible with
    /// objective value at most `upper`.
    Optimal {
        lower: Rational,
        upper: Rational,
        witness: Vec<Rational>,
        bisection_queries: usize,
        endpoint_queries: usize,
    },
    InfeasibleProblem,
    /// The objective exceeds the upper end of the bracket everywhere.
    BracketError,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OptError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("solver returned unknown: {0}")]
    Unknown(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

fn level_formula(objective: &Network, constraints: &[Network], t: Option<&Rational>) -> Result<Formula, OptError> {
    if objective.output_dim() != 1 {
        return Err(OptError::Config("objective must be scalar".into()));
    }
    let x = vector_names("x", objective.input_dim());
    let mut cs = Vec::with_capacity(constraints.len() + 1);
    if let Some(t) = t {
        cs.push(Constraint::new(objective.clone(), Rel::Le, vec![t.clone()]));
    }
    cs.extend(constraints.iter().cloned().map(|n| Constraint::zero(n, Rel::Le)));
    Ok(feasibility_formula(&x, &cs, &[])?)
}

fn query(f: Formula, backend: Backend, timeout: Duration) -> Result<Verdict, OptError> {
    Ok(solve(&Query::new(f).backend(backend).timeout(timeout))?)
}

/// Single query: is there a feasible `x` with `objective(x) ≤ t`?
pub fn check_level(objective: &Network, constraints: &[Network], t: &Rational, backend: Backend) -> Result<Verdict, OptError> {
    query(level_formula(objective, constraints, Some(t))?, backend, DEFAULT_TIMEOUT)
}

fn witness(objective: &Network, v: &Verdict) -> Vec<Rational> {
    let m = v.model().expect("sat verdict");
    vector_names("x", objective.input_dim())
        .iter()
        .map(|n| m.get(n).cloned().unwrap_or_else(Rational::zero))
        .collect()
}

/// Number of bisection steps needed to shrink `[l, u]` below `eps`.
pub fn bisection_bound(l: &Rational, u: &Rational, eps: &Rational) -> usize {
    let mut width = u - l;
    let two = Rational::from_integer(2.into());
    let mut k = 0;
    while &width > eps {
        width /= &two;
        k += 1;
    }
    k
}

/// Bisection: the upper end is checked first (`BracketError` or
/// `InfeasibleProblem` when it fails), then the lower end; afterwards each
/// query halves the bracket until its width is at most `eps`.
pub fn minimize(objective: &Network, constraints: &[Network], cfg: &BisectionConfig) -> Result<MinResult, OptError> {
    if cfg.lower > cfg.upper {
        return Err(OptError::Config("lower bound exceeds upper bound".into()));
    }
    if cfg.eps <= Rational::zero() {
        return Err(OptError::Config("tolerance must be positive".into()));
    }
    let at = |t: &Rational| -> Result<Verdict, OptError> {
        query(level_formula(objective, constraints, Some(t))?, cfg.backend, cfg.timeout)
    };
    let (mut l, mut u) = (cfg.lower.clone(), cfg.upper.clone());
    let mut endpoint_queries = 1;
    let top = at(&u)?;
    let mut best = match top {
        Verdict::Sat(_) => witness(objective, &top),
        Verdict::Unknown(r) => return Err(OptError::Unknown(r)),
        Verdict::Unsat => {
            let plain = query(level_formula(objective, constraints, None)?, cfg.backend, cfg.timeout)?;
            return match plain {
                Verdict::Unsat => Ok(MinResult::InfeasibleProblem),
                Verdict::Sat(_) => Ok(MinResult::BracketError),
                Verdict::Unknown(r) => Err(OptError::Unknown(r)),
            };
        }
    };
    endpoint_queries += 1;
    let bottom = at(&l)?;
    match bottom {
        Verdict::Sat(_) => {
            return Ok(MinResult::Optimal {
                upper: l.clone(),
                lower: l,
                witness: witness(objective, &bottom),
                bisection_queries: 0,
                endpoint_queries,
            })
        }
        Verdict::Unknown(r) => return Err(OptError::Unknown(r)),
        Verdict::Unsat => {}
    }
    let two = Rational::one() + Rational::one();
    let mut n = 0;
    while &u - &l > cfg.eps && n < cfg.max_iters {
        let mid = (&l + &u) / &two;
        n += 1;
        match at(&mid)? {
            v @ Verdict::Sat(_) => {
                best = witness(objective, &v);
                u = mid;
            }
            Verdict::Unsat => l = mid,
            Verdict::Unknown(r) => return Err(OptError::Unknown(r)),
        }
    }
    Ok(MinResult::Optimal {
        lower: l,
        upper: u,
        witness: best,
        bisection_queries: n,
        endpoint_queries,
    })
}
