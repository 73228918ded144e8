//! Exact rational linear programming with strict inequalities.
//!
//! Systems are lists of rows `a·x ⋈ c` with `⋈ ∈ {≤, <, =}` over free real
//! variables. Equalities are eliminated by substitution, the remaining
//! inequalities go through a dense two-phase simplex (Dantzig pricing with a
//! Bland fallback).
//! Strict rows share one slack `t ≤ 1`: `a·x + t ≤ c`, and the system is
//! strictly feasible iff the maximal `t` is positive.

use num_traits::{One, Signed, Zero};

use crate::rational::{dot, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowRel {
    Le,
    Lt,
    Eq,
}

/// `coeffs · x  rel  constant`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LinRow {
    pub coeffs: Vec<Rational>,
    pub constant: Rational,
    pub rel: RowRel,
}

impl LinRow {
    pub fn new(coeffs: Vec<Rational>, rel: RowRel, constant: Rational) -> Self {
        Self { coeffs, constant, rel }
    }

    pub fn holds(&self, x: &[Rational]) -> bool {
        let lhs = dot(&self.coeffs, x);
        match self.rel {
            RowRel::Le => lhs <= self.constant,
            RowRel::Lt => lhs < self.constant,
            RowRel::Eq => lhs == self.constant,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinSystem {
    pub var_names: Vec<String>,
    pub rows: Vec<LinRow>,
}

impl LinSystem {
    pub fn new(var_count: usize) -> Self {
        Self {
            var_names: (0..var_count).map(|i| format!("v{i}")).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_names(var_names: Vec<String>) -> Self {
        Self {
            var_names,
            rows: Vec::new(),
        }
    }

    pub fn var_count(&self) -> usize {
        self.var_names.len()
    }

    /// Adds a row; panics when its width differs from the variable count.
    pub fn push(&mut self, coeffs: Vec<Rational>, rel: RowRel, constant: Rational) {
        assert_eq!(coeffs.len(), self.var_count(), "row width");
        self.rows.push(LinRow::new(coeffs, rel, constant));
    }

    /// Exact row-by-row check of a point.
    pub fn satisfied_by(&self, x: &[Rational]) -> bool {
        x.len() == self.var_count() && self.rows.iter().all(|r| r.holds(x))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FeasResult {
    Feasible(Vec<Rational>),
    Infeasible,
}

impl FeasResult {
    pub fn is_feasible(&self) -> bool {
        matches!(self, FeasResult::Feasible(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MaxResult {
    Optimal { value: Rational, point: Vec<Rational> },
    /// The supremum is finite but only approached, because strict rows cut
    /// off every maximizer. `point` is some feasible point.
    Supremum { value: Rational, point: Vec<Rational> },
    Unbounded,
    Infeasible,
}

pub fn feasible(sys: &LinSystem) -> FeasResult {
    match solve(sys, None) {
        Outcome::Infeasible => FeasResult::Infeasible,
        Outcome::Point(p) | Outcome::Optimal(_, p) | Outcome::Supremum(_, p) => FeasResult::Feasible(p),
        Outcome::Unbounded => unreachable!("feasibility has no objective"),
    }
}

pub fn maximize(sys: &LinSystem, objective: &[Rational]) -> MaxResult {
    assert_eq!(objective.len(), sys.var_count(), "objective width");
    match solve(sys, Some(objective)) {
        Outcome::Infeasible => MaxResult::Infeasible,
        Outcome::Unbounded => MaxResult::Unbounded,
        Outcome::Optimal(value, point) => MaxResult::Optimal { value, point },
        Outcome::Supremum(value, point) => MaxResult::Supremum { value, point },
        Outcome::Point(_) => unreachable!(),
    }
}

enum Outcome {
    Infeasible,
    Unbounded,
    Point(Vec<Rational>),
    Optimal(Rational, Vec<Rational>),
    Supremum(Rational, Vec<Rational>),
}

/// Linear map `x_full = base + Σ_k coef_k · y_k` from reduced to original
/// variables, produced by equality elimination.
struct Reduction {
    n: usize,
    /// For each eliminated variable in elimination order: its index and the
    /// row `(coeffs over all vars, constant)` meaning `x_p = constant - Σ coeffs·x`.
    eliminated: Vec<(usize, Vec<Rational>, Rational)>,
    /// Surviving variables, in original order.
    kept: Vec<usize>,
}

impl Reduction {
    fn expand(&self, y: &[Rational]) -> Vec<Rational> {
        let mut x = vec![Rational::zero(); self.n];
        for (k, &v) in self.kept.iter().enumerate() {
            x[v] = y[k].clone();
        }
        for (p, coeffs, c) in self.eliminated.iter().rev() {
            let mut val = c.clone();
            for (j, a) in coeffs.iter().enumerate() {
                if !a.is_zero() {
                    val -= a * &x[j];
                }
            }
            x[*p] = val;
        }
        x
    }
}

/// Inequality row over reduced variables.
struct Ineq {
    coeffs: Vec<Rational>,
    constant: Rational,
    strict: bool,
}

fn substitute(row: &mut [Rational], constant: &mut Rational, p: usize, coeffs: &[Rational], c: &Rational) {
    // row·x with x_p = c - coeffs·x
    let a = std::mem::replace(&mut row[p], Rational::zero());
    if a.is_zero() {
        return;
    }
    for (j, b) in coeffs.iter().enumerate() {
        if !b.is_zero() {
            row[j] -= &a * b;
        }
    }
    *constant -= &a * c;
}

/// Eliminates equalities. Returns `None` when an equality is inconsistent.
fn reduce(sys: &LinSystem, objective: Option<&[Rational]>) -> Option<(Reduction, Vec<Ineq>, Option<(Vec<Rational>, Rational)>)> {
    let n = sys.var_count();
    let mut eqs: Vec<(Vec<Rational>, Rational)> = Vec::new();
    let mut ineqs: Vec<(Vec<Rational>, Rational, bool)> = Vec::new();
    for r in &sys.rows {
        match r.rel {
            RowRel::Eq => eqs.push((r.coeffs.clone(), r.constant.clone())),
            RowRel::Le => ineqs.push((r.coeffs.clone(), r.constant.clone(), false)),
            RowRel::Lt => ineqs.push((r.coeffs.clone(), r.constant.clone(), true)),
        }
    }
    let mut obj = objective.map(|o| (o.to_vec(), Rational::zero()));
    let mut eliminated = Vec::new();
    let mut is_elim = vec![false; n];
    for i in 0..eqs.len() {
        let (row, c) = eqs[i].clone();
        let Some(p) = (0..n).rev().find(|&j| !row[j].is_zero()) else {
            if c.is_zero() {
                continue;
            }
            return None;
        };
        let inv = Rational::one() / &row[p];
        let mut coeffs: Vec<Rational> = row.iter().map(|a| a * &inv).collect();
        coeffs[p] = Rational::zero();
        let c = c * &inv;
        for (r2, c2) in eqs[i + 1..].iter_mut() {
            substitute(r2, c2, p, &coeffs, &c);
        }
        for (r2, c2, _) in ineqs.iter_mut() {
            substitute(r2, c2, p, &coeffs, &c);
        }
        if let Some((o, oc)) = obj.as_mut() {
            // objective constant accumulates with the opposite sign
            let mut neg = -oc.clone();
            substitute(o, &mut neg, p, &coeffs, &c);
            *oc = -neg;
        }
        is_elim[p] = true;
        eliminated.push((p, coeffs, c));
    }
    let kept: Vec<usize> = (0..n).filter(|&j| !is_elim[j]).collect();
    let mut out = Vec::new();
    for (row, c, strict) in ineqs {
        let coeffs: Vec<Rational> = kept.iter().map(|&j| row[j].clone()).collect();
        if coeffs.iter().all(Zero::is_zero) {
            let ok = if strict { c.is_positive() } else { !c.is_negative() };
            if !ok {
                return None;
            }
            continue;
        }
        if !out.iter().any(|r: &Ineq| r.strict == strict && r.coeffs == coeffs && r.constant == c) {
            out.push(Ineq {
                coeffs,
                constant: c,
                strict,
            });
        }
    }
    let obj = obj.map(|(o, oc)| (kept.iter().map(|&j| o[j].clone()).collect(), oc));
    Some((
        Reduction {
            n,
            eliminated,
            kept,
        },
        out,
        obj,
    ))
}

fn solve(sys: &LinSystem, objective: Option<&[Rational]>) -> Outcome {
    let Some((red, rows, obj)) = reduce(sys, objective) else {
        return Outcome::Infeasible;
    };
    let k = red.kept.len();
    let has_strict = rows.iter().any(|r| r.strict);

    // Stage 1: (strict) feasibility, maximizing the shared slack when needed.
    let mut interior: Option<Vec<Rational>> = None;
    if has_strict || obj.is_none() {
        let (a, b) = slack_rows(&rows, k, has_strict);
        let mut c = vec![Rational::zero(); k + usize::from(has_strict)];
        if has_strict {
            c[k] = Rational::one();
        }
        match simplex(&a, &b, &c) {
            Lp::Infeasible => return Outcome::Infeasible,
            Lp::Unbounded => unreachable!("slack is bounded"),
            Lp::Optimal(v, y) => {
                if has_strict && !v.is_positive() {
                    return Outcome::Infeasible;
                }
                interior = Some(y[..k].to_vec());
            }
        }
    }
    let Some((oc, ooff)) = obj else {
        return Outcome::Point(red.expand(&interior.expect("stage 1 ran")));
    };

    // Stage 2: optimize over the closure.
    let (a, b) = slack_rows(&rows, k, false);
    let (value, y) = match simplex(&a, &b, &oc) {
        Lp::Infeasible => return Outcome::Infeasible,
        Lp::Unbounded => return Outcome::Unbounded,
        Lp::Optimal(v, y) => (v, y),
    };
    let total = &value + &ooff;
    if !has_strict || strict_ok(&rows, &y) {
        return Outcome::Optimal(total, red.expand(&y));
    }
    // Is the optimum attained at some strictly feasible point? Fix the
    // objective at its optimum and maximize the slack again.
    let mut rows2: Vec<Ineq> = rows
        .iter()
        .map(|r| Ineq {
            coeffs: r.coeffs.clone(),
            constant: r.constant.clone(),
            strict: r.strict,
        })
        .collect();
    rows2.push(Ineq {
        coeffs: oc.iter().map(|v| -v).collect(),
        constant: -value.clone(),
        strict: false,
    });
    let (a, b) = slack_rows(&rows2, k, true);
    let mut c = vec![Rational::zero(); k + 1];
    c[k] = Rational::one();
    if let Lp::Optimal(t, y2) = simplex(&a, &b, &c) {
        if t.is_positive() {
            return Outcome::Optimal(total, red.expand(&y2[..k]));
        }
    }
    Outcome::Supremum(total, red.expand(&interior.expect("strict systems run stage 1")))
}

fn strict_ok(rows: &[Ineq], y: &[Rational]) -> bool {
    rows.iter().all(|r| {
        let lhs = dot(&r.coeffs, y);
        if r.strict {
            lhs < r.constant
        } else {
            lhs <= r.constant
        }
    })
}

/// Rows `a·y (+ t) ≤ c`, plus `t ≤ 1` when a slack column is requested.
fn slack_rows(rows: &[Ineq], k: usize, with_t: bool) -> (Vec<Vec<Rational>>, Vec<Rational>) {
    let width = k + usize::from(with_t);
    let mut a = Vec::with_capacity(rows.len() + 1);
    let mut b = Vec::with_capacity(rows.len() + 1);
    for r in rows {
        let mut coeffs = r.coeffs.clone();
        if with_t {
            coeffs.push(if r.strict { Rational::one() } else { Rational::zero() });
        }
        a.push(coeffs);
        b.push(r.constant.clone());
    }
    if with_t {
        let mut cap = vec![Rational::zero(); width];
        cap[k] = Rational::one();
        a.push(cap);
        b.push(Rational::one());
    }
    (a, b)
}

enum Lp {
    Infeasible,
    Unbounded,
    Optimal(Rational, Vec<Rational>),
}

/// Maximizes `c·y` subject to `A y ≤ b` with `y` free.
fn simplex(a: &[Vec<Rational>], b: &[Rational], c: &[Rational]) -> Lp {
    let m = a.len();
    let n = c.len();
    // columns: y+ (n), y- (n), slack (m), artificial (one per negative rhs)
    let needs_art: Vec<bool> = b.iter().map(Signed::is_negative).collect();
    let n_art = needs_art.iter().filter(|&&x| x).count();
    let first_slack = 2 * n;
    let first_art = first_slack + m;
    let cols = first_art + n_art;
    let mut t = Tableau {
        rows: Vec::with_capacity(m),
        basis: Vec::with_capacity(m),
        cols,
    };
    let mut art = first_art;
    for i in 0..m {
        let mut row = vec![Rational::zero(); cols + 1];
        let sign = if needs_art[i] { -Rational::one() } else { Rational::one() };
        for j in 0..n {
            if !a[i][j].is_zero() {
                row[j] = &a[i][j] * &sign;
                row[n + j] = -&row[j];
            }
        }
        row[first_slack + i] = sign.clone();
        row[cols] = &b[i] * &sign;
        if needs_art[i] {
            row[art] = Rational::one();
            t.basis.push(art);
            art += 1;
        } else {
            t.basis.push(first_slack + i);
        }
        t.rows.push(row);
    }

    if n_art > 0 {
        let mut obj = vec![Rational::zero(); cols + 1];
        for (i, row) in t.rows.iter().enumerate() {
            if needs_art[i] {
                for (j, v) in row.iter().enumerate() {
                    if j < first_art || j == cols {
                        obj[j] += v;
                    }
                }
            }
        }
        let allowed = vec![true; cols];
        if !t.run(&mut obj, &allowed) {
            unreachable!("phase 1 is bounded");
        }
        if obj[cols].is_positive() {
            return Lp::Infeasible;
        }
        // drive artificials out of the basis
        let mut i = 0;
        while i < t.rows.len() {
            if t.basis[i] >= first_art {
                match (0..first_art).find(|&j| !t.rows[i][j].is_zero()) {
                    Some(j) => {
                        t.pivot(&mut obj, i, j);
                        i += 1;
                    }
                    None => {
                        t.rows.swap_remove(i);
                        t.basis.swap_remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }

    let mut cost = vec![Rational::zero(); cols];
    for j in 0..n {
        cost[j] = c[j].clone();
        cost[n + j] = -&c[j];
    }
    let mut obj = vec![Rational::zero(); cols + 1];
    obj[..cols].clone_from_slice(&cost);
    for (i, row) in t.rows.iter().enumerate() {
        let cb = &cost[t.basis[i]];
        if cb.is_zero() {
            continue;
        }
        for (o, v) in obj.iter_mut().zip(row) {
            if !v.is_zero() {
                *o -= cb * v;
            }
        }
    }
    let allowed: Vec<bool> = (0..cols).map(|j| j < first_art).collect();
    if !t.run(&mut obj, &allowed) {
        return Lp::Unbounded;
    }
    let mut y = vec![Rational::zero(); n];
    for (i, &bv) in t.basis.iter().enumerate() {
        if bv < n {
            y[bv] += &t.rows[i][cols];
        } else if bv < 2 * n {
            y[bv - n] -= &t.rows[i][cols];
        }
    }
    Lp::Optimal(-obj[cols].clone(), y)
}

struct Tableau {
    rows: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, obj: &mut [Rational], r: usize, k: usize) {
        let inv = Rational::one() / &self.rows[r][k];
        for v in self.rows[r].iter_mut() {
            if !v.is_zero() {
                *v *= &inv;
            }
        }
        let pivot_row = std::mem::take(&mut self.rows[r]);
        let nz: Vec<usize> = (0..=self.cols).filter(|&j| !pivot_row[j].is_zero()).collect();
        let eliminate = |row: &mut [Rational]| {
            let f = row[k].clone();
            if f.is_zero() {
                return;
            }
            for &j in &nz {
                row[j] -= &f * &pivot_row[j];
            }
        };
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                eliminate(row);
            }
        }
        eliminate(obj);
        self.rows[r] = pivot_row;
        self.basis[r] = k;
    }

    /// Primal simplex entering on the largest reduced cost, switching to
    /// Bland's rule for good after a run of degenerate pivots. Returns
    /// `false` on unboundedness.
    fn run(&mut self, obj: &mut [Rational], allowed: &[bool]) -> bool {
        let rhs = self.cols;
        let mut degenerate = 0;
        loop {
            let candidates = (0..self.cols).filter(|&j| allowed[j] && obj[j].is_positive());
            let entering = if degenerate < DEGENERATE_LIMIT {
                candidates.max_by(|&a, &b| obj[a].cmp(&obj[b]).then(b.cmp(&a)))
            } else {
                candidates.min()
            };
            let Some(k) = entering else {
                return true;
            };
            let mut best: Option<(usize, Rational)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if !row[k].is_positive() {
                    continue;
                }
                let ratio = &row[rhs] / &row[k];
                let better = match &best {
                    None => true,
                    Some((bi, br)) => ratio < *br || (ratio == *br && self.basis[i] < self.basis[*bi]),
                };
                if better {
                    best = Some((i, ratio));
                }
            }
            let Some((r, ratio)) = best else {
                return false;
            };
            if ratio.is_zero() {
                degenerate += 1;
            } else if degenerate < DEGENERATE_LIMIT {
                degenerate = 0;
            }
            self.pivot(obj, r, k);
        }
    }
}

/// Consecutive degenerate pivots tolerated before falling back to Bland.
const DEGENERATE_LIMIT: usize = 50;
