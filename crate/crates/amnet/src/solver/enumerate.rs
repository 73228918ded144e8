//! Complete decision procedure for linear formulas.
//!
//! The formula is put in negation normal form and explored depth first:
//! atoms are collected into a literal set, disjunctions are split one at a
//! time, and every split is pruned by an exact LP feasibility check. A leaf
//! is a conjunction of linear atoms, i.e. one [`LinSystem`].

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use num_traits::{One, Signed, Zero};

use crate::formula::{Formula, LinAtom, LinExpr, Rel};
use crate::lp::{feasible, FeasResult, LinSystem, RowRel};
use crate::rational::Rational;

use super::{SolveError, Verdict};

/// Canonical literal: `expr base 0` with the leading coefficient of `expr`
/// equal to one, `base ∈ {≤, <, =}`, and a polarity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Key {
    expr: LinExpr,
    base: Rel,
}

fn canonical(atom: &LinAtom) -> Result<(Key, bool), bool> {
    let Some(lead) = atom.expr.terms.values().next().cloned() else {
        return Err(atom.rel.holds(&atom.expr.constant));
    };
    let expr = atom.expr.scale(&(Rational::one() / &lead));
    let rel = if lead.is_negative() { atom.rel.mirror() } else { atom.rel };
    let (base, positive) = match rel {
        Rel::Le => (Rel::Le, true),
        Rel::Lt => (Rel::Lt, true),
        Rel::Eq => (Rel::Eq, true),
        Rel::Gt => (Rel::Le, false),
        Rel::Ge => (Rel::Lt, false),
        Rel::Ne => (Rel::Eq, false),
    };
    Ok((Key { expr, base }, positive))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    True,
    False,
    Open,
}

struct Search {
    vars: Vec<String>,
    index: HashMap<String, usize>,
    deadline: Option<Instant>,
    lits: Vec<(Key, bool)>,
    assigned: HashMap<Key, bool>,
}

impl Search {
    fn status(&self, f: &Formula) -> Status {
        match f {
            Formula::True => Status::True,
            Formula::False => Status::False,
            Formula::Lin(a) => match canonical(a) {
                Err(true) => Status::True,
                Err(false) => Status::False,
                Ok((k, pol)) => match self.assigned.get(&k) {
                    Some(&p) if p == pol => Status::True,
                    Some(_) => Status::False,
                    None => Status::Open,
                },
            },
            Formula::And(v) => {
                let mut all = true;
                for g in v {
                    match self.status(g) {
                        Status::False => return Status::False,
                        Status::Open => all = false,
                        Status::True => {}
                    }
                }
                if all {
                    Status::True
                } else {
                    Status::Open
                }
            }
            Formula::Or(v) => {
                let mut none = true;
                for g in v {
                    match self.status(g) {
                        Status::True => return Status::True,
                        Status::Open => none = false,
                        Status::False => {}
                    }
                }
                if none {
                    Status::False
                } else {
                    Status::Open
                }
            }
            _ => Status::Open,
        }
    }

    /// Adds a literal; `false` on a direct contradiction.
    fn assume(&mut self, a: &LinAtom) -> bool {
        match canonical(a) {
            Err(v) => v,
            Ok((k, pol)) => match self.assigned.get(&k) {
                Some(&p) => p == pol,
                None => {
                    self.assigned.insert(k.clone(), pol);
                    self.lits.push((k, pol));
                    true
                }
            },
        }
    }

    fn retract_to(&mut self, n: usize) {
        while self.lits.len() > n {
            let (k, _) = self.lits.pop().unwrap();
            self.assigned.remove(&k);
        }
    }

    fn system(&self) -> LinSystem {
        let mut sys = LinSystem::with_names(self.vars.clone());
        let n = self.vars.len();
        for (k, pol) in &self.lits {
            let mut coeffs = vec![Rational::zero(); n];
            for (v, c) in &k.expr.terms {
                coeffs[self.index[v]] = c.clone();
            }
            let rhs = -k.expr.constant.clone();
            match (k.base, pol) {
                (Rel::Le, true) => sys.push(coeffs, RowRel::Le, rhs),
                (Rel::Lt, true) => sys.push(coeffs, RowRel::Lt, rhs),
                (Rel::Eq, true) => sys.push(coeffs, RowRel::Eq, rhs),
                // ¬(e ≤ 0) is -e < 0, ¬(e < 0) is -e ≤ 0
                (Rel::Le, false) => sys.push(neg(coeffs), RowRel::Lt, -rhs),
                (Rel::Lt, false) => sys.push(neg(coeffs), RowRel::Le, -rhs),
                (Rel::Eq, false) => unreachable!("≠ is split before search"),
                _ => unreachable!("canonical bases"),
            }
        }
        sys
    }

    fn check(&self) -> FeasResult {
        feasible(&self.system())
    }

    fn timed_out(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    /// Explores the conjunction `pending`.
    fn dfs(&mut self, mut pending: Vec<Formula>) -> Result<Option<Vec<Rational>>, SolveError> {
        if self.timed_out() {
            return Err(SolveError::Timeout);
        }
        let mark = self.lits.len();
        // Propagate atoms, conjunctions, and forced disjunctions to a fixpoint.
        let mut ors: Vec<Formula> = Vec::new();
        loop {
            while let Some(f) = pending.pop() {
                match f {
                    Formula::True => {}
                    Formula::False => {
                        self.retract_to(mark);
                        return Ok(None);
                    }
                    Formula::Lin(a) => {
                        if !self.assume(&a) {
                            self.retract_to(mark);
                            return Ok(None);
                        }
                    }
                    Formula::And(v) => pending.extend(v),
                    Formula::Or(_) => ors.push(f),
                    Formula::Poly(_) => return Err(SolveError::NonlinearUnderEnumerate),
                    other => pending.push(other.nnf()),
                }
            }
            let mut next = Vec::with_capacity(ors.len());
            for f in ors.drain(..) {
                let Formula::Or(v) = &f else { unreachable!() };
                let open: Vec<&Formula> = v.iter().filter(|g| self.status(g) != Status::False).collect();
                if open.iter().any(|g| self.status(g) == Status::True) {
                    continue;
                }
                match open.len() {
                    0 => {
                        self.retract_to(mark);
                        return Ok(None);
                    }
                    1 => {
                        pending.push(open[0].clone());
                    }
                    _ => next.push(f),
                }
            }
            ors = next;
            if pending.is_empty() {
                break;
            }
        }

        let FeasResult::Feasible(point) = self.check() else {
            self.retract_to(mark);
            return Ok(None);
        };
        if ors.is_empty() {
            self.retract_to(mark);
            return Ok(Some(point));
        }
        // Branch on the disjunction with the fewest open alternatives.
        let pick = (0..ors.len())
            .min_by_key(|&i| match &ors[i] {
                Formula::Or(v) => v.iter().filter(|g| self.status(g) == Status::Open).count(),
                _ => usize::MAX,
            })
            .unwrap();
        let chosen = ors.swap_remove(pick);
        let Formula::Or(alts) = chosen else { unreachable!() };
        for alt in alts {
            if self.status(&alt) == Status::False {
                continue;
            }
            let mut branch = ors.clone();
            branch.push(alt);
            if let Some(p) = self.dfs(branch)? {
                self.retract_to(mark);
                return Ok(Some(p));
            }
        }
        self.retract_to(mark);
        Ok(None)
    }
}

fn neg(v: Vec<Rational>) -> Vec<Rational> {
    v.into_iter().map(|c| -c).collect()
}

/// Decides a linear formula. Existential quantifiers are treated as free
/// variables; the model assigns every variable of the formula.
pub fn solve_enumerate(f: &Formula, deadline: Option<Instant>) -> Result<Verdict, SolveError> {
    if f.has_poly() {
        return Err(SolveError::NonlinearUnderEnumerate);
    }
    let nnf = f.nnf();
    let vars: Vec<String> = f.all_vars().into_iter().collect();
    let index = vars.iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
    let mut s = Search {
        vars: vars.clone(),
        index,
        deadline,
        lits: Vec::new(),
        assigned: HashMap::new(),
    };
    match s.dfs(vec![nnf]) {
        Ok(Some(point)) => {
            let model: BTreeMap<String, Rational> = vars.into_iter().zip(point).collect();
            Ok(Verdict::Sat(model))
        }
        Ok(None) => Ok(Verdict::Unsat),
        Err(SolveError::Timeout) => Ok(Verdict::Unknown("timeout".into())),
        Err(e) => Err(e),
    }
}
