//! First-order formulas over real arithmetic.
//!
//! Atoms compare an expression against zero: [`LinAtom`] holds a linear
//! expression with rational coefficients, [`PolyAtom`] a polynomial (used
//! only by the dual encoding, where weights become variables). Variables are
//! scalar and identified by name.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::rational::Rational;

/// Relation of an atom's expression to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    Le,
    Lt,
    Eq,
    Ge,
    Gt,
    Ne,
}

impl Rel {
    pub fn negate(self) -> Rel {
        match self {
            Rel::Le => Rel::Gt,
            Rel::Lt => Rel::Ge,
            Rel::Eq => Rel::Ne,
            Rel::Ge => Rel::Lt,
            Rel::Gt => Rel::Le,
            Rel::Ne => Rel::Eq,
        }
    }

    /// Relation obtained when both sides are multiplied by -1.
    pub fn mirror(self) -> Rel {
        match self {
            Rel::Le => Rel::Ge,
            Rel::Lt => Rel::Gt,
            Rel::Ge => Rel::Le,
            Rel::Gt => Rel::Lt,
            r => r,
        }
    }

    pub fn holds(self, value: &Rational) -> bool {
        let zero = Rational::zero();
        match self {
            Rel::Le => *value <= zero,
            Rel::Lt => *value < zero,
            Rel::Eq => value.is_zero(),
            Rel::Ge => *value >= zero,
            Rel::Gt => *value > zero,
            Rel::Ne => !value.is_zero(),
        }
    }

    /// Like [`Rel::holds`] on a float with slack `tol` in the permissive
    /// direction.
    pub fn holds_approx(self, value: f64, tol: f64) -> bool {
        match self {
            Rel::Le => value <= tol,
            Rel::Lt => value < tol,
            Rel::Eq => value.abs() <= tol,
            Rel::Ge => value >= -tol,
            Rel::Gt => value > -tol,
            Rel::Ne => tol > 0.0 || value != 0.0,
        }
    }

    pub fn smtlib(self) -> &'static str {
        match self {
            Rel::Le => "<=",
            Rel::Lt => "<",
            Rel::Eq => "=",
            Rel::Ge => ">=",
            Rel::Gt => ">",
            Rel::Ne => "distinct",
        }
    }
}

impl fmt::Display for Rel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rel::Le => "<=",
            Rel::Lt => "<",
            Rel::Eq => "=",
            Rel::Ge => ">=",
            Rel::Gt => ">",
            Rel::Ne => "!=",
        })
    }
}

/// `Σ c_i v_i + constant`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct LinExpr {
    pub terms: BTreeMap<String, Rational>,
    pub constant: Rational,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Rational) -> Self {
        Self {
            terms: BTreeMap::new(),
            constant: c,
        }
    }

    pub fn var(name: impl Into<String>) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(name.into(), Rational::one());
        Self {
            terms,
            constant: Rational::zero(),
        }
    }

    pub fn term(name: impl Into<String>, coeff: Rational) -> Self {
        let mut e = Self::zero();
        e.add_term(name, coeff);
        e
    }

    pub fn add_term(&mut self, name: impl Into<String>, coeff: Rational) {
        if coeff.is_zero() {
            return;
        }
        let name = name.into();
        let slot = self.terms.entry(name.clone()).or_insert_with(Rational::zero);
        *slot += coeff;
        if slot.is_zero() {
            self.terms.remove(&name);
        }
    }

    pub fn add(mut self, other: &LinExpr) -> Self {
        for (v, c) in &other.terms {
            self.add_term(v.clone(), c.clone());
        }
        self.constant += &other.constant;
        self
    }

    pub fn sub(self, other: &LinExpr) -> Self {
        self.add(&other.scale(&-Rational::one()))
    }

    pub fn scale(&self, s: &Rational) -> Self {
        if s.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(v, c)| (v.clone(), c * s)).collect(),
            constant: &self.constant * s,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, model: &BTreeMap<String, Rational>) -> Option<Rational> {
        let mut acc = self.constant.clone();
        for (v, c) in &self.terms {
            acc += c * model.get(v)?;
        }
        Some(acc)
    }

    pub fn eval_f64(&self, model: &BTreeMap<String, f64>) -> Option<f64> {
        let mut acc = crate::rational::to_f64(&self.constant);
        for (v, c) in &self.terms {
            acc += crate::rational::to_f64(c) * model.get(v)?;
        }
        Some(acc)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LinAtom {
    pub expr: LinExpr,
    pub rel: Rel,
}

impl LinAtom {
    pub fn new(expr: LinExpr, rel: Rel) -> Self {
        Self { expr, rel }
    }

    /// `lhs rel rhs`.
    pub fn compare(lhs: LinExpr, rel: Rel, rhs: &LinExpr) -> Self {
        Self::new(lhs.sub(rhs), rel)
    }

    pub fn negate(&self) -> Self {
        Self::new(self.expr.clone(), self.rel.negate())
    }
}

/// Polynomial `Σ coeff · Π vars`; the key of a monomial is its sorted
/// variable multiset (empty for the constant term).
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Poly {
    pub terms: BTreeMap<Vec<String>, Rational>,
}

impl Poly {
    pub fn add_monomial(&mut self, mut vars: Vec<String>, coeff: Rational) {
        if coeff.is_zero() {
            return;
        }
        vars.sort();
        let slot = self.terms.entry(vars.clone()).or_insert_with(Rational::zero);
        *slot += coeff;
        if slot.is_zero() {
            self.terms.remove(&vars);
        }
    }

    pub fn from_lin(e: &LinExpr) -> Self {
        let mut p = Poly::default();
        p.add_monomial(Vec::new(), e.constant.clone());
        for (v, c) in &e.terms {
            p.add_monomial(vec![v.clone()], c.clone());
        }
        p
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    /// The linear expression when every monomial has degree ≤ 1.
    pub fn to_lin(&self) -> Option<LinExpr> {
        let mut e = LinExpr::zero();
        for (vars, c) in &self.terms {
            match vars.as_slice() {
                [] => e.constant += c,
                [v] => e.add_term(v.clone(), c.clone()),
                _ => return None,
            }
        }
        Some(e)
    }

    pub fn substitute(&self, values: &BTreeMap<String, Rational>) -> Poly {
        let mut out = Poly::default();
        for (vars, c) in &self.terms {
            let mut coeff = c.clone();
            let mut rest = Vec::new();
            for v in vars {
                match values.get(v) {
                    Some(val) => coeff *= val,
                    None => rest.push(v.clone()),
                }
            }
            out.add_monomial(rest, coeff);
        }
        out
    }

    pub fn eval(&self, model: &BTreeMap<String, Rational>) -> Option<Rational> {
        let mut acc = Rational::zero();
        for (vars, c) in &self.terms {
            let mut t = c.clone();
            for v in vars {
                t *= model.get(v)?;
            }
            acc += t;
        }
        Some(acc)
    }

    pub fn eval_f64(&self, model: &BTreeMap<String, f64>) -> Option<f64> {
        let mut acc = 0.0;
        for (vars, c) in &self.terms {
            let mut t = crate::rational::to_f64(c);
            for v in vars {
                t *= model.get(v)?;
            }
            acc += t;
        }
        Some(acc)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PolyAtom {
    pub poly: Poly,
    pub rel: Rel,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Lin(LinAtom),
    Poly(PolyAtom),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Exists(Vec<String>, Box<Formula>),
}

impl Formula {
    pub fn atom(expr: LinExpr, rel: Rel) -> Self {
        Formula::Lin(LinAtom::new(expr, rel))
    }

    /// `lhs rel rhs` between linear expressions.
    pub fn cmp(lhs: LinExpr, rel: Rel, rhs: &LinExpr) -> Self {
        Formula::Lin(LinAtom::compare(lhs, rel, rhs))
    }

    /// Component-wise `lhs_i = rhs_i`.
    pub fn vec_eq(lhs: &[LinExpr], rhs: &[LinExpr]) -> Self {
        debug_assert_eq!(lhs.len(), rhs.len());
        Formula::and(
            lhs.iter()
                .zip(rhs)
                .map(|(a, b)| Formula::cmp(a.clone(), Rel::Eq, b))
                .collect(),
        )
    }

    /// Conjunction, flattening nested `And`s and collapsing trivial cases.
    pub fn and(parts: Vec<Formula>) -> Self {
        let mut out = Vec::with_capacity(parts.len());
        for p in parts {
            match p {
                Formula::True => {}
                Formula::False => return Formula::False,
                Formula::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::True,
            1 => out.pop().unwrap(),
            _ => Formula::And(out),
        }
    }

    pub fn or(parts: Vec<Formula>) -> Self {
        let mut out = Vec::with_capacity(parts.len());
        for p in parts {
            match p {
                Formula::False => {}
                Formula::True => return Formula::True,
                Formula::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => Formula::False,
            1 => out.pop().unwrap(),
            _ => Formula::Or(out),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn implies(lhs: Formula, rhs: Formula) -> Self {
        Formula::Implies(Box::new(lhs), Box::new(rhs))
    }

    pub fn exists(vars: Vec<String>, body: Formula) -> Self {
        if vars.is_empty() {
            body
        } else {
            Formula::Exists(vars, Box::new(body))
        }
    }

    pub fn has_poly(&self) -> bool {
        match self {
            Formula::Poly(p) => p.poly.degree() > 1,
            Formula::And(v) | Formula::Or(v) => v.iter().any(Formula::has_poly),
            Formula::Not(f) | Formula::Exists(_, f) => f.has_poly(),
            Formula::Implies(a, b) => a.has_poly() || b.has_poly(),
            _ => false,
        }
    }

    fn collect_vars(&self, bound: &mut Vec<String>, free: &mut BTreeSet<String>, all: &mut BTreeSet<String>) {
        let mut visit = |name: &String, bound: &Vec<String>| {
            all.insert(name.clone());
            if !bound.contains(name) {
                free.insert(name.clone());
            }
        };
        match self {
            Formula::True | Formula::False => {}
            Formula::Lin(a) => a.expr.terms.keys().for_each(|v| visit(v, bound)),
            Formula::Poly(a) => a.poly.terms.keys().flatten().for_each(|v| visit(v, bound)),
            Formula::And(v) | Formula::Or(v) => v.iter().for_each(|f| f.collect_vars(bound, free, all)),
            Formula::Not(f) => f.collect_vars(bound, free, all),
            Formula::Implies(a, b) => {
                a.collect_vars(bound, free, all);
                b.collect_vars(bound, free, all);
            }
            Formula::Exists(vs, body) => {
                let n = bound.len();
                bound.extend(vs.iter().cloned());
                body.collect_vars(bound, free, all);
                bound.truncate(n);
            }
        }
    }

    /// Variables not bound by an enclosing `Exists`.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let (mut free, mut all) = (BTreeSet::new(), BTreeSet::new());
        self.collect_vars(&mut Vec::new(), &mut free, &mut all);
        free
    }

    /// Every variable occurring in an atom.
    pub fn all_vars(&self) -> BTreeSet<String> {
        let (mut free, mut all) = (BTreeSet::new(), BTreeSet::new());
        self.collect_vars(&mut Vec::new(), &mut free, &mut all);
        all
    }

    /// Variables bound by `Exists`, in order of appearance.
    pub fn bound_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(&mut |f| {
            if let Formula::Exists(vs, _) = f {
                out.extend(vs.iter().cloned());
            }
        });
        out
    }

    fn visit(&self, f: &mut impl FnMut(&Formula)) {
        f(self);
        match self {
            Formula::And(v) | Formula::Or(v) => v.iter().for_each(|c| c.visit(f)),
            Formula::Not(c) | Formula::Exists(_, c) => c.visit(f),
            Formula::Implies(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    /// Drops every existential quantifier, keeping the body. Sound for
    /// satisfiability when all quantifiers are outermost existentials.
    pub fn strip_exists(&self) -> Formula {
        match self {
            Formula::Exists(_, body) => body.strip_exists(),
            Formula::And(v) => Formula::and(v.iter().map(Formula::strip_exists).collect()),
            Formula::Or(v) => Formula::or(v.iter().map(Formula::strip_exists).collect()),
            Formula::Not(f) => Formula::not(f.strip_exists()),
            Formula::Implies(a, b) => Formula::implies(a.strip_exists(), b.strip_exists()),
            other => other.clone(),
        }
    }

    /// Replaces variables by values; polynomial atoms that become linear are
    /// turned into linear atoms, constant atoms into `True`/`False`.
    pub fn substitute(&self, values: &BTreeMap<String, Rational>) -> Formula {
        match self {
            Formula::True | Formula::False => self.clone(),
            Formula::Lin(a) => {
                let mut e = LinExpr::constant(a.expr.constant.clone());
                for (v, c) in &a.expr.terms {
                    match values.get(v) {
                        Some(val) => e.constant += c * val,
                        None => e.add_term(v.clone(), c.clone()),
                    }
                }
                Self::fold_lin(e, a.rel)
            }
            Formula::Poly(a) => {
                let p = a.poly.substitute(values);
                match p.to_lin() {
                    Some(e) => Self::fold_lin(e, a.rel),
                    None => Formula::Poly(PolyAtom { poly: p, rel: a.rel }),
                }
            }
            Formula::And(v) => Formula::and(v.iter().map(|f| f.substitute(values)).collect()),
            Formula::Or(v) => Formula::or(v.iter().map(|f| f.substitute(values)).collect()),
            Formula::Not(f) => match f.substitute(values) {
                Formula::True => Formula::False,
                Formula::False => Formula::True,
                g => Formula::not(g),
            },
            Formula::Implies(a, b) => match (a.substitute(values), b.substitute(values)) {
                (Formula::False, _) | (_, Formula::True) => Formula::True,
                (Formula::True, g) => g,
                (a, b) => Formula::implies(a, b),
            },
            Formula::Exists(vs, body) => {
                let kept: Vec<String> = vs.iter().filter(|v| !values.contains_key(*v)).cloned().collect();
                Formula::exists(kept, body.substitute(values))
            }
        }
    }

    fn fold_lin(e: LinExpr, rel: Rel) -> Formula {
        if e.is_constant() {
            if rel.holds(&e.constant) {
                Formula::True
            } else {
                Formula::False
            }
        } else {
            Formula::atom(e, rel)
        }
    }

    /// Exact truth value under a complete model; `None` if a variable is
    /// unassigned. Quantified variables are read from the model too.
    pub fn eval(&self, model: &BTreeMap<String, Rational>) -> Option<bool> {
        Some(match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Lin(a) => a.rel.holds(&a.expr.eval(model)?),
            Formula::Poly(a) => a.rel.holds(&a.poly.eval(model)?),
            Formula::And(v) => {
                for f in v {
                    if !f.eval(model)? {
                        return Some(false);
                    }
                }
                true
            }
            Formula::Or(v) => {
                for f in v {
                    if f.eval(model)? {
                        return Some(true);
                    }
                }
                false
            }
            Formula::Not(f) => !f.eval(model)?,
            Formula::Implies(a, b) => !a.eval(model)? || b.eval(model)?,
            Formula::Exists(_, body) => body.eval(model)?,
        })
    }

    /// Float evaluation where every atom is relaxed by `tol`.
    pub fn eval_approx(&self, model: &BTreeMap<String, f64>, tol: f64) -> Option<bool> {
        Some(match self {
            Formula::True => true,
            Formula::False => false,
            Formula::Lin(a) => a.rel.holds_approx(a.expr.eval_f64(model)?, tol),
            Formula::Poly(a) => a.rel.holds_approx(a.poly.eval_f64(model)?, tol),
            Formula::And(v) => {
                for f in v {
                    if !f.eval_approx(model, tol)? {
                        return Some(false);
                    }
                }
                true
            }
            Formula::Or(v) => {
                for f in v {
                    if f.eval_approx(model, tol)? {
                        return Some(true);
                    }
                }
                false
            }
            // Under a relaxed reading, a negated atom is relaxed as well.
            Formula::Not(f) => match f.as_ref() {
                Formula::Lin(a) => a.rel.negate().holds_approx(a.expr.eval_f64(model)?, tol),
                Formula::Poly(a) => a.rel.negate().holds_approx(a.poly.eval_f64(model)?, tol),
                inner => !inner.eval_approx(model, tol)?,
            },
            Formula::Implies(a, b) => {
                Formula::or(vec![Formula::not((**a).clone()), (**b).clone()]).eval_approx(model, tol)?
            }
            Formula::Exists(_, body) => body.eval_approx(model, tol)?,
        })
    }

    /// Negation normal form: negations pushed into atoms, implications
    /// expanded, `≠` split into `<` or `>`. Quantifiers are dropped.
    pub fn nnf(&self) -> Formula {
        self.nnf_polarity(true)
    }

    fn nnf_polarity(&self, positive: bool) -> Formula {
        match (self, positive) {
            (Formula::True, true) | (Formula::False, false) => Formula::True,
            (Formula::True, false) | (Formula::False, true) => Formula::False,
            (Formula::Lin(a), _) => {
                let rel = if positive { a.rel } else { a.rel.negate() };
                if rel == Rel::Ne {
                    Formula::or(vec![
                        Formula::atom(a.expr.clone(), Rel::Lt),
                        Formula::atom(a.expr.clone(), Rel::Gt),
                    ])
                } else {
                    Formula::atom(a.expr.clone(), rel)
                }
            }
            (Formula::Poly(a), _) => {
                let rel = if positive { a.rel } else { a.rel.negate() };
                if rel == Rel::Ne {
                    Formula::or(vec![
                        Formula::Poly(PolyAtom {
                            poly: a.poly.clone(),
                            rel: Rel::Lt,
                        }),
                        Formula::Poly(PolyAtom {
                            poly: a.poly.clone(),
                            rel: Rel::Gt,
                        }),
                    ])
                } else {
                    Formula::Poly(PolyAtom {
                        poly: a.poly.clone(),
                        rel,
                    })
                }
            }
            (Formula::And(v), true) | (Formula::Or(v), false) => {
                Formula::and(v.iter().map(|f| f.nnf_polarity(positive)).collect())
            }
            (Formula::Or(v), true) | (Formula::And(v), false) => {
                Formula::or(v.iter().map(|f| f.nnf_polarity(positive)).collect())
            }
            (Formula::Not(f), _) => f.nnf_polarity(!positive),
            (Formula::Implies(a, b), true) => Formula::or(vec![a.nnf_polarity(false), b.nnf_polarity(true)]),
            (Formula::Implies(a, b), false) => Formula::and(vec![a.nnf_polarity(true), b.nnf_polarity(false)]),
            (Formula::Exists(_, body), _) => body.nnf_polarity(positive),
        }
    }

    /// Number of atoms, for diagnostics.
    pub fn atom_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |f| {
            if matches!(f, Formula::Lin(_) | Formula::Poly(_)) {
                n += 1;
            }
        });
        n
    }
}

/// Sum of absolute values of a vector of rationals.
pub fn l1(values: &[Rational]) -> Rational {
    values.iter().fold(Rational::zero(), |acc, v| acc + v.abs())
}
