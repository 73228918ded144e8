//! Translation of networks into formulas and SMT-LIB text.
//!
//! Each graph node is encoded once. Affine and mux nodes get auxiliary
//! variables named `{prefix}{index}` (with `_{i}` per component for vector
//! nodes); the output node uses the caller's output names instead. Constants
//! are inlined. When a mux selects the input node directly, the input is
//! routed through an alias `{prefix}u = x`.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::formula::{Formula, LinExpr, Poly, PolyAtom, Rel};
use crate::network::{Network, NetworkError, Node, NodeId};
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingResult {
    pub formula: Formula,
    pub free_in: Vec<String>,
    pub free_out: Vec<String>,
    /// Existentially bound variables in creation order.
    pub aux: Vec<String>,
}

impl EncodingResult {
    pub fn aux_count(&self) -> usize {
        self.aux.len()
    }

    /// The encoding without its outer quantifier.
    pub fn body(&self) -> Formula {
        self.formula.strip_exists()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Logic {
    QfLra,
    QfNra,
}

impl Logic {
    pub fn name(self) -> &'static str {
        match self {
            Logic::QfLra => "QF_LRA",
            Logic::QfNra => "QF_NRA",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("formula contains nonlinear atoms but logic {0} was requested")]
    Logic(&'static str),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Scalar variable names for a vector called `base`.
pub fn vector_names(base: &str, dim: usize) -> Vec<String> {
    if dim == 1 {
        vec![base.to_string()]
    } else {
        (0..dim).map(|i| format!("{base}_{i}")).collect()
    }
}

/// Encodes `net` with input variables `x` and output variables `y`
/// (default prefix `v`).
pub fn encode_smt(net: &Network, x_name: &str, y_name: &str) -> EncodingResult {
    let x = vector_names(x_name, net.input_dim());
    let y = vector_names(y_name, net.output_dim());
    encode_with(net, &x, &y, "v").expect("names sized from the network")
}

/// Encoding with explicit scalar names and auxiliary prefix.
pub fn encode_with(net: &Network, x: &[String], y: &[String], prefix: &str) -> Result<EncodingResult, NetworkError> {
    let inputs: Vec<LinExpr> = x.iter().map(LinExpr::var).collect();
    encode_signals(net, &inputs, y, prefix, x.to_vec())
}

/// Encoding where the input is an arbitrary vector of linear expressions
/// (e.g. the output variables of another encoding).
pub fn encode_on(net: &Network, inputs: &[LinExpr], y: &[String], prefix: &str) -> Result<EncodingResult, NetworkError> {
    let mut free: BTreeSet<String> = BTreeSet::new();
    for e in inputs {
        free.extend(e.terms.keys().cloned());
    }
    encode_signals(net, inputs, y, prefix, free.into_iter().collect())
}

fn encode_signals(
    net: &Network,
    inputs: &[LinExpr],
    y: &[String],
    prefix: &str,
    free_in: Vec<String>,
) -> Result<EncodingResult, NetworkError> {
    if inputs.len() != net.input_dim() || y.len() != net.output_dim() {
        return Err(NetworkError::Dim(format!(
            "encoding names: {} inputs for dimension {}, {} outputs for dimension {}",
            inputs.len(),
            net.input_dim(),
            y.len(),
            net.output_dim()
        )));
    }
    let mut sig: Vec<Vec<LinExpr>> = Vec::with_capacity(net.len());
    let mut clauses = Vec::new();
    let mut aux = Vec::new();
    let mut alias: Option<Vec<LinExpr>> = None;
    let out = net.output();

    for id in net.ids() {
        let node = net.node(id);
        let target = |aux: &mut Vec<String>| -> Vec<String> {
            if id == out {
                y.to_vec()
            } else {
                let names = vector_names(&format!("{prefix}{}", id.0), net.dim(id));
                aux.extend(names.iter().cloned());
                names
            }
        };
        let s = match node {
            Node::Input { .. } => {
                if id == out {
                    clauses.push(Formula::vec_eq(&y.iter().map(LinExpr::var).collect::<Vec<_>>(), inputs));
                }
                inputs.to_vec()
            }
            Node::Constant { value } => {
                let c: Vec<LinExpr> = value.iter().cloned().map(LinExpr::constant).collect();
                if id == out {
                    clauses.push(Formula::vec_eq(&y.iter().map(LinExpr::var).collect::<Vec<_>>(), &c));
                }
                c
            }
            Node::Affine {
                weights,
                bias,
                children,
            } => {
                let arg: Vec<&LinExpr> = children.iter().flat_map(|c| sig[c.0].iter()).collect();
                let names = target(&mut aux);
                for (i, v) in names.iter().enumerate() {
                    let mut rhs = LinExpr::constant(bias[i].clone());
                    for (j, a) in weights.row_slice(i).iter().enumerate() {
                        if !a.is_zero() {
                            rhs = rhs.add(&arg[j].scale(a));
                        }
                    }
                    clauses.push(Formula::cmp(LinExpr::var(v), Rel::Eq, &rhs));
                }
                names.iter().map(LinExpr::var).collect()
            }
            Node::Mux { x: a, y: b, z } => {
                let mut created = Vec::new();
                let mut arg = |c: NodeId, aux: &mut Vec<String>| -> Vec<LinExpr> {
                    if c != net.input() {
                        return sig[c.0].clone();
                    }
                    alias
                        .get_or_insert_with(|| {
                            let names = vector_names(&format!("{prefix}u"), inputs.len());
                            aux.extend(names.iter().cloned());
                            let vars: Vec<LinExpr> = names.iter().map(LinExpr::var).collect();
                            created.push(Formula::vec_eq(&vars, inputs));
                            vars
                        })
                        .clone()
                };
                let first = arg(*a, &mut aux);
                let second = arg(*b, &mut aux);
                let guard = sig[z.0][0].clone();
                let names = target(&mut aux);
                let vars: Vec<LinExpr> = names.iter().map(LinExpr::var).collect();
                clauses.push(Formula::implies(
                    Formula::atom(guard.clone(), Rel::Le),
                    Formula::vec_eq(&vars, &first),
                ));
                clauses.push(Formula::implies(Formula::atom(guard, Rel::Gt), Formula::vec_eq(&vars, &second)));
                clauses.extend(created);
                vars
            }
        };
        sig.push(s);
    }
    let body = Formula::and(clauses);
    Ok(EncodingResult {
        formula: Formula::exists(aux.clone(), body),
        free_in,
        free_out: y.to_vec(),
        aux,
    })
}

/// Dual encoding: the input is fixed to `x_value` and every parameter of the
/// layout becomes the variable `theta_names[k]`. Products of parameters with
/// internal signals yield polynomial atoms.
pub fn encode_dual(
    net: &Network,
    x_value: &[Rational],
    theta_names: &[String],
    y: &[String],
    prefix: &str,
) -> Result<EncodingResult, NetworkError> {
    let layout = net.parameter_layout();
    if theta_names.len() != layout.len {
        return Err(NetworkError::Layout(format!(
            "{} parameter names for {} parameters",
            theta_names.len(),
            layout.len
        )));
    }
    if x_value.len() != net.input_dim() || y.len() != net.output_dim() {
        return Err(NetworkError::Dim("dual encoding: input value or output names".into()));
    }
    // offset of each node's first parameter
    let mut offset = vec![usize::MAX; net.len()];
    for slot in layout.slots.iter().rev() {
        offset[slot.node.0] = offset[slot.node.0].min(slot.offset);
    }
    let mut sig: Vec<Vec<LinExpr>> = Vec::with_capacity(net.len());
    let mut clauses = Vec::new();
    let mut aux = Vec::new();
    let out = net.output();
    for id in net.ids() {
        let names = || {
            if id == out {
                y.to_vec()
            } else {
                vector_names(&format!("{prefix}{}", id.0), net.dim(id))
            }
        };
        let s: Vec<LinExpr> = match net.node(id) {
            Node::Input { .. } => x_value.iter().cloned().map(LinExpr::constant).collect(),
            Node::Constant { value } => (0..value.len())
                .map(|i| LinExpr::var(&theta_names[offset[id.0] + i]))
                .collect(),
            Node::Affine {
                weights, children, ..
            } => {
                let arg: Vec<&LinExpr> = children.iter().flat_map(|c| sig[c.0].iter()).collect();
                let (rows, cols) = (weights.rows(), weights.cols());
                let base = offset[id.0];
                let vars = names();
                if id != out {
                    aux.extend(vars.iter().cloned());
                }
                for (i, v) in vars.iter().enumerate() {
                    let mut p = Poly::default();
                    p.add_monomial(vec![v.clone()], -Rational::one());
                    p.add_monomial(vec![theta_names[base + rows * cols + i].clone()], Rational::one());
                    for (j, a) in arg.iter().enumerate() {
                        let w = &theta_names[base + i * cols + j];
                        p.add_monomial(vec![w.clone()], a.constant.clone());
                        for (s, c) in &a.terms {
                            p.add_monomial(vec![w.clone(), s.clone()], c.clone());
                        }
                    }
                    clauses.push(poly_atom(p, Rel::Eq));
                }
                vars.iter().map(LinExpr::var).collect()
            }
            Node::Mux { x: a, y: b, z } => {
                let vars = names();
                if id != out {
                    aux.extend(vars.iter().cloned());
                }
                let lv: Vec<LinExpr> = vars.iter().map(LinExpr::var).collect();
                let guard = sig[z.0][0].clone();
                clauses.push(Formula::implies(
                    Formula::atom(guard.clone(), Rel::Le),
                    Formula::vec_eq(&lv, &sig[a.0]),
                ));
                clauses.push(Formula::implies(Formula::atom(guard, Rel::Gt), Formula::vec_eq(&lv, &sig[b.0])));
                lv
            }
        };
        if id == out && matches!(net.node(id), Node::Input { .. } | Node::Constant { .. }) {
            clauses.push(Formula::vec_eq(&y.iter().map(LinExpr::var).collect::<Vec<_>>(), &s));
        }
        sig.push(s);
    }
    Ok(EncodingResult {
        formula: Formula::exists(aux.clone(), Formula::and(clauses)),
        free_in: theta_names.to_vec(),
        free_out: y.to_vec(),
        aux,
    })
}

fn poly_atom(p: Poly, rel: Rel) -> Formula {
    match p.to_lin() {
        Some(e) => Formula::atom(e, rel),
        None => Formula::Poly(PolyAtom { poly: p, rel }),
    }
}

/// Parameter names `t0, t1, …` for a network's layout.
pub fn default_theta_names(net: &Network) -> Vec<String> {
    (0..net.parameter_layout().len).map(|k| format!("t{k}")).collect()
}

/// One network output compared component-wise against a constant vector.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub net: Network,
    pub rel: Rel,
    pub rhs: Vec<Rational>,
}

impl Constraint {
    /// `net(x) rel 0`.
    pub fn zero(net: Network, rel: Rel) -> Self {
        let rhs = vec![Rational::zero(); net.output_dim()];
        Self { net, rel, rhs }
    }

    pub fn new(net: Network, rel: Rel, rhs: Vec<Rational>) -> Self {
        Self { net, rel, rhs }
    }
}

/// Conjunction of every constraint's encoding and output relation, plus
/// `a(x) = b(x)` for each equality pair. Free variables are the input names.
pub fn feasibility_formula(
    x: &[String],
    constraints: &[Constraint],
    equalities: &[(Network, Network)],
) -> Result<Formula, NetworkError> {
    let q = x.len();
    let mut parts = Vec::new();
    let mut bound = Vec::new();
    let mut add = |net: &Network, tag: String, parts: &mut Vec<Formula>| -> Result<Vec<String>, NetworkError> {
        if net.input_dim() != q {
            return Err(NetworkError::Dim(format!(
                "constraint network has input dimension {}, expected {q}",
                net.input_dim()
            )));
        }
        let y = vector_names(&format!("{tag}y"), net.output_dim());
        let enc = encode_with(net, x, &y, &format!("{tag}v"))?;
        bound.extend(enc.aux.iter().cloned());
        bound.extend(y.iter().cloned());
        parts.push(enc.body());
        Ok(y)
    };
    for (k, c) in constraints.iter().enumerate() {
        if c.rhs.len() != c.net.output_dim() {
            return Err(NetworkError::Dim("constraint right-hand side".into()));
        }
        let y = add(&c.net, format!("c{k}"), &mut parts)?;
        for (v, r) in y.iter().zip(&c.rhs) {
            parts.push(Formula::cmp(LinExpr::var(v), c.rel, &LinExpr::constant(r.clone())));
        }
    }
    for (k, (a, b)) in equalities.iter().enumerate() {
        if a.output_dim() != b.output_dim() {
            return Err(NetworkError::Dim("equality sides differ in dimension".into()));
        }
        let ya = add(a, format!("e{k}a"), &mut parts)?;
        let yb = add(b, format!("e{k}b"), &mut parts)?;
        let la: Vec<LinExpr> = ya.iter().map(LinExpr::var).collect();
        let lb: Vec<LinExpr> = yb.iter().map(LinExpr::var).collect();
        parts.push(Formula::vec_eq(&la, &lb));
    }
    Ok(Formula::exists(bound, Formula::and(parts)))
}

/// SMT-LIB rendering of a rational: `3`, `(- 3)`, `(/ 1 3)`, `(- (/ 1 3))`.
pub fn smt_rational(q: &Rational) -> String {
    let a = q.abs();
    let body = if a.is_integer() {
        a.numer().to_string()
    } else {
        format!("(/ {} {})", a.numer(), a.denom())
    };
    if q.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

fn smt_term(coeff: &Rational, vars: &[String]) -> String {
    if vars.is_empty() {
        return smt_rational(coeff);
    }
    if coeff.is_one() && vars.len() == 1 {
        return vars[0].clone();
    }
    let mut s = String::from("(*");
    if !coeff.is_one() {
        s.push(' ');
        s.push_str(&smt_rational(coeff));
    }
    for v in vars {
        s.push(' ');
        s.push_str(v);
    }
    s.push(')');
    s
}

fn smt_sum(terms: Vec<String>) -> String {
    match terms.len() {
        0 => "0".to_string(),
        1 => terms.into_iter().next().unwrap(),
        _ => format!("(+ {})", terms.join(" ")),
    }
}

/// `Σ terms rel 0` written with positive coefficients on both sides.
fn smt_atom(terms: &[(Vec<String>, Rational)], rel: Rel) -> String {
    let mut lhs = Vec::new();
    let mut rhs = Vec::new();
    for (vars, c) in terms {
        if c.is_positive() {
            lhs.push(smt_term(c, vars));
        } else if c.is_negative() {
            rhs.push(smt_term(&-c, vars));
        }
    }
    let (l, r) = (smt_sum(lhs), smt_sum(rhs));
    match rel {
        Rel::Ne => format!("(not (= {l} {r}))"),
        _ => format!("({} {l} {r})", rel.smtlib()),
    }
}

fn lin_terms(e: &LinExpr) -> Vec<(Vec<String>, Rational)> {
    let mut t: Vec<(Vec<String>, Rational)> = e.terms.iter().map(|(v, c)| (vec![v.clone()], c.clone())).collect();
    if !e.constant.is_zero() {
        t.push((Vec::new(), e.constant.clone()));
    }
    t
}

/// S-expression text of a formula; quantifiers are dropped (their variables
/// are declared at top level).
pub fn smt_formula(f: &Formula) -> String {
    match f {
        Formula::True => "true".into(),
        Formula::False => "false".into(),
        Formula::Lin(a) => smt_atom(&lin_terms(&a.expr), a.rel),
        Formula::Poly(a) => {
            let t: Vec<(Vec<String>, Rational)> = a.poly.terms.iter().map(|(v, c)| (v.clone(), c.clone())).collect();
            smt_atom(&t, a.rel)
        }
        Formula::And(v) => format!("(and {})", v.iter().map(smt_formula).collect::<Vec<_>>().join(" ")),
        Formula::Or(v) => format!("(or {})", v.iter().map(smt_formula).collect::<Vec<_>>().join(" ")),
        Formula::Not(g) => format!("(not {})", smt_formula(g)),
        Formula::Implies(a, b) => format!("(=> {} {})", smt_formula(a), smt_formula(b)),
        Formula::Exists(_, body) => smt_formula(body),
    }
}

/// Variables of `f` in first-occurrence order.
pub fn variables_in_order(f: &Formula) -> Vec<String> {
    fn walk(f: &Formula, seen: &mut HashSet<String>, out: &mut Vec<String>) {
        let mut push = |v: &String| {
            if seen.insert(v.clone()) {
                out.push(v.clone());
            }
        };
        match f {
            Formula::Lin(a) => a.expr.terms.keys().for_each(&mut push),
            Formula::Poly(a) => a.poly.terms.keys().flatten().for_each(&mut push),
            Formula::And(v) | Formula::Or(v) => v.iter().for_each(|g| walk(g, seen, out)),
            Formula::Not(g) => walk(g, seen, out),
            Formula::Implies(a, b) => {
                walk(a, seen, out);
                walk(b, seen, out);
            }
            Formula::Exists(vs, body) => {
                vs.iter().for_each(&mut push);
                walk(body, seen, out);
            }
            Formula::True | Formula::False => {}
        }
    }
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    walk(f, &mut seen, &mut out);
    out
}

/// SMT-LIB script for a formula. `leading` variables are declared first in
/// the given order; the rest follow in order of first occurrence.
pub fn emit_formula(f: &Formula, logic: Logic, leading: &[String]) -> Result<String, EncodeError> {
    if logic == Logic::QfLra && f.has_poly() {
        return Err(EncodeError::Logic(logic.name()));
    }
    let mut out = String::new();
    writeln!(out, "(set-logic {})", logic.name()).unwrap();
    writeln!(out, "(set-option :produce-models true)").unwrap();
    let mut seen = HashSet::new();
    for v in leading.iter().cloned().chain(variables_in_order(f)) {
        if seen.insert(v.clone()) {
            writeln!(out, "(declare-fun {v} () Real)").unwrap();
        }
    }
    let body = f.strip_exists();
    let conjuncts = match body {
        Formula::And(v) => v,
        Formula::True => Vec::new(),
        other => vec![other],
    };
    for c in &conjuncts {
        writeln!(out, "(assert {})", smt_formula(c)).unwrap();
    }
    writeln!(out, "(check-sat)").unwrap();
    writeln!(out, "(get-model)").unwrap();
    Ok(out)
}

/// SMT-LIB script for an encoding conjoined with extra assertions.
pub fn emit_smtlib(result: &EncodingResult, logic: Logic, extra: &[Formula]) -> Result<String, EncodeError> {
    let mut parts = vec![result.body()];
    parts.extend(extra.iter().cloned());
    let mut leading = result.free_in.clone();
    leading.extend(result.free_out.iter().cloned());
    leading.extend(result.aux.iter().cloned());
    emit_formula(&Formula::and(parts), logic, &leading)
}
