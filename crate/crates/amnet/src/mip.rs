//! Big-M mixed-integer encoding of networks and CPLEX-LP export.
//!
//! Each affine or mux node `k` gets real variables `v{k}` (`v{k}_{i}` for
//! vector nodes), the input node is the variable `x` itself, and each mux gets
//! one binary `b{k}` that is 1 exactly when its guard is `≤ 0`. The output is
//! bound by `y = v_out`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::formula::{Formula, LinAtom, LinExpr, Rel};
use crate::network::{Network, NetworkError, Node};
use crate::rational::{to_decimal_string, Rational};
use crate::smt::vector_names;

pub const DEFAULT_EPS_STRICT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MipError {
    #[error("big-M must be positive")]
    NonPositiveM,
    #[error("an input box is required to derive big-M")]
    Unbounded,
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Inequality `expr rel 0` (`rel ∈ {≤, <}`) gated by one binary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BigMRow {
    pub atom: LinAtom,
    pub binary: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MipModel {
    pub real_vars: Vec<String>,
    pub bounds: BTreeMap<String, (Option<Rational>, Option<Rational>)>,
    pub bin_vars: Vec<String>,
    /// Equalities `expr = 0`.
    pub lin_eqs: Vec<LinExpr>,
    pub big_m_rows: Vec<BigMRow>,
    /// The constant used for each binary, in `bin_vars` order.
    pub big_m: Vec<Rational>,
    pub x_names: Vec<String>,
    pub y_names: Vec<String>,
}

impl MipModel {
    pub fn row_count(&self) -> usize {
        self.lin_eqs.len() + self.big_m_rows.len()
    }

    /// The model as a formula with each binary restricted to `{0, 1}`.
    pub fn to_formula(&self) -> Formula {
        let mut parts = Vec::new();
        for b in &self.bin_vars {
            parts.push(Formula::or(vec![
                Formula::atom(LinExpr::var(b), Rel::Eq),
                Formula::cmp(LinExpr::var(b), Rel::Eq, &LinExpr::constant(Rational::one())),
            ]));
        }
        for e in &self.lin_eqs {
            parts.push(Formula::atom(e.clone(), Rel::Eq));
        }
        for r in &self.big_m_rows {
            parts.push(Formula::Lin(r.atom.clone()));
        }
        for (v, (lo, hi)) in &self.bounds {
            if let Some(lo) = lo {
                parts.push(Formula::cmp(LinExpr::var(v), Rel::Ge, &LinExpr::constant(lo.clone())));
            }
            if let Some(hi) = hi {
                parts.push(Formula::cmp(LinExpr::var(v), Rel::Le, &LinExpr::constant(hi.clone())));
            }
        }
        Formula::and(parts)
    }
}

/// Encoding with one global `M`.
pub fn encode_mip(net: &Network, m: &Rational) -> Result<MipModel, MipError> {
    if !m.is_positive() {
        return Err(MipError::NonPositiveM);
    }
    encode(net, &|_| m.clone())
}

/// Encoding with a separate `M` per mux, derived from interval bounds on the
/// box.
pub fn encode_mip_per_mux(net: &Network, input_box: &[(Rational, Rational)]) -> Result<MipModel, MipError> {
    let iv = intervals(net, input_box)?;
    let mag = |k: usize| iv[k].iter().map(|(l, h)| l.abs().max(h.abs())).max().unwrap_or_default();
    let per: Vec<Rational> = net
        .nodes()
        .iter()
        .enumerate()
        .map(|(j, n)| match n {
            Node::Mux { x, y, z } => {
                let m = mag(z.0).max(mag(j) + mag(x.0)).max(mag(j) + mag(y.0));
                let m = m * Rational::from_integer(2.into());
                if m.is_zero() {
                    Rational::one()
                } else {
                    m
                }
            }
            _ => Rational::zero(),
        })
        .collect();
    encode(net, &|k| per[k].clone())
}

fn encode(net: &Network, m_for: &dyn Fn(usize) -> Rational) -> Result<MipModel, MipError> {
    let x_names = vector_names("x", net.input_dim());
    let y_names = vector_names("y", net.output_dim());
    let mut real_vars = x_names.clone();
    let mut bin_vars = Vec::new();
    let mut big_m = Vec::new();
    let mut lin_eqs = Vec::new();
    let mut rows = Vec::new();
    let mut sig: Vec<Vec<LinExpr>> = Vec::with_capacity(net.len());
    let one = Rational::one();

    for id in net.ids() {
        let k = id.0;
        let s: Vec<LinExpr> = match net.node(id) {
            Node::Input { .. } => x_names.iter().map(LinExpr::var).collect(),
            Node::Constant { value } => value.iter().cloned().map(LinExpr::constant).collect(),
            Node::Affine {
                weights,
                bias,
                children,
            } => {
                let arg: Vec<&LinExpr> = children.iter().flat_map(|c| sig[c.0].iter()).collect();
                let names = vector_names(&format!("v{k}"), net.dim(id));
                for (i, v) in names.iter().enumerate() {
                    let mut e = LinExpr::var(v);
                    e.constant -= &bias[i];
                    for (j, a) in weights.row_slice(i).iter().enumerate() {
                        if !a.is_zero() {
                            e = e.sub(&arg[j].scale(a));
                        }
                    }
                    lin_eqs.push(e);
                }
                real_vars.extend(names.iter().cloned());
                names.iter().map(LinExpr::var).collect()
            }
            Node::Mux { x: kk, y: ll, z: mm } => {
                let m = m_for(k);
                let b = format!("b{k}");
                let bm = LinExpr::term(&b, m.clone());
                let names = vector_names(&format!("v{k}"), net.dim(id));
                let guard = &sig[mm.0][0];
                let mut push = |e: LinExpr, rel: Rel| {
                    rows.push(BigMRow {
                        atom: LinAtom::new(e, rel),
                        binary: b.clone(),
                    })
                };
                // -M b < v_m  and  v_m <= M (1 - b)
                push(bm.scale(&-one.clone()).sub(guard), Rel::Lt);
                push(guard.clone().add(&bm).sub(&LinExpr::constant(m.clone())), Rel::Le);
                for (i, v) in names.iter().enumerate() {
                    let vj = LinExpr::var(v);
                    let dl = vj.clone().sub(&sig[ll.0][i]);
                    let dk = vj.sub(&sig[kk.0][i]);
                    // |v_j - v_l| <= M b
                    push(dl.clone().sub(&bm), Rel::Le);
                    push(dl.scale(&-one.clone()).sub(&bm), Rel::Le);
                    // |v_j - v_k| <= M (1 - b)
                    let slack = LinExpr::constant(m.clone()).sub(&bm);
                    push(dk.clone().sub(&slack), Rel::Le);
                    push(dk.scale(&-one.clone()).sub(&slack), Rel::Le);
                }
                real_vars.extend(names.iter().cloned());
                bin_vars.push(b);
                big_m.push(m);
                names.iter().map(LinExpr::var).collect()
            }
        };
        sig.push(s);
    }
    for (yv, e) in y_names.iter().zip(&sig[net.output().0]) {
        lin_eqs.push(LinExpr::var(yv).sub(e));
    }
    real_vars.extend(y_names.iter().cloned());
    Ok(MipModel {
        bounds: BTreeMap::new(),
        real_vars,
        bin_vars,
        lin_eqs,
        big_m_rows: rows,
        big_m,
        x_names,
        y_names,
    })
}

type Interval = (Rational, Rational);

/// Interval bounds of every node's signal over the box.
pub fn intervals(net: &Network, input_box: &[(Rational, Rational)]) -> Result<Vec<Vec<Interval>>, MipError> {
    if input_box.len() != net.input_dim() {
        return Err(NetworkError::Dim(format!(
            "box has {} coordinates, network input has {}",
            input_box.len(),
            net.input_dim()
        ))
        .into());
    }
    let mut iv: Vec<Vec<Interval>> = Vec::with_capacity(net.len());
    for id in net.ids() {
        let v = match net.node(id) {
            Node::Input { .. } => input_box.to_vec(),
            Node::Constant { value } => value.iter().map(|c| (c.clone(), c.clone())).collect(),
            Node::Affine {
                weights,
                bias,
                children,
            } => {
                let arg: Vec<&Interval> = children.iter().flat_map(|c| iv[c.0].iter()).collect();
                (0..weights.rows())
                    .map(|i| {
                        let (mut lo, mut hi) = (bias[i].clone(), bias[i].clone());
                        for (a, (l, h)) in weights.row_slice(i).iter().zip(&arg) {
                            if a.is_positive() {
                                lo += a * l;
                                hi += a * h;
                            } else if a.is_negative() {
                                lo += a * h;
                                hi += a * l;
                            }
                        }
                        (lo, hi)
                    })
                    .collect()
            }
            Node::Mux { x, y, .. } => iv[x.0]
                .iter()
                .zip(&iv[y.0])
                .map(|((l1, h1), (l2, h2))| (l1.clone().min(l2.clone()), h1.clone().max(h2.clone())))
                .collect(),
        };
        iv.push(v);
    }
    Ok(iv)
}

/// `2 · max |signal|` over the box (1 if every signal is zero).
pub fn derive_big_m(net: &Network, input_box: Option<&[(Rational, Rational)]>) -> Result<Rational, MipError> {
    let input_box = input_box.ok_or(MipError::Unbounded)?;
    let iv = intervals(net, input_box)?;
    let max = iv
        .iter()
        .flatten()
        .map(|(l, h)| l.abs().max(h.abs()))
        .max()
        .unwrap_or_default();
    Ok(if max.is_zero() {
        Rational::one()
    } else {
        max * Rational::from_integer(2.into())
    })
}

fn lp_number(q: &Rational) -> String {
    to_decimal_string(q, 17)
}

fn lp_expr(e: &LinExpr) -> String {
    let mut s = String::new();
    for (k, (v, c)) in e.terms.iter().enumerate() {
        let sign = if c.is_negative() { "-" } else { "+" };
        if k == 0 {
            if c.is_negative() {
                s.push_str("- ");
            }
        } else {
            let _ = write!(s, " {sign} ");
        }
        let a = c.abs();
        if a.is_one() {
            s.push_str(v);
        } else {
            let _ = write!(s, "{} {v}", lp_number(&a));
        }
    }
    if s.is_empty() {
        s.push('0');
    }
    s
}

/// CPLEX-LP text with objective 0. Strict rows `e < 0` become
/// `e <= -eps_strict`.
pub fn emit_lp(model: &MipModel, eps_strict: f64) -> String {
    let eps = Rational::from_float(eps_strict).unwrap_or_default();
    let mut out = String::new();
    out.push_str("\\ AMN big-M encoding\n");
    let _ = writeln!(out, "\\ strict rows relaxed by eps_strict = {eps_strict:e}");
    out.push_str("Minimize\n");
    let _ = writeln!(out, " obj: 0 {}", model.real_vars.first().map_or("x", String::as_str));
    out.push_str("Subject To\n");
    let mut k = 0;
    let mut row = |e: &LinExpr, op: &str, rhs: Rational, out: &mut String| {
        let mut lhs = e.clone();
        lhs.constant = Rational::zero();
        let _ = writeln!(out, " r{k}: {} {op} {}", lp_expr(&lhs), lp_number(&(rhs - &e.constant)));
        k += 1;
    };
    for e in &model.lin_eqs {
        row(e, "=", Rational::zero(), &mut out);
    }
    for r in &model.big_m_rows {
        let e = &r.atom.expr;
        match r.atom.rel {
            Rel::Lt => row(e, "<=", -eps.clone(), &mut out),
            Rel::Le => row(e, "<=", Rational::zero(), &mut out),
            Rel::Ge => row(e, ">=", Rational::zero(), &mut out),
            Rel::Gt => row(e, ">=", eps.clone(), &mut out),
            Rel::Eq => row(e, "=", Rational::zero(), &mut out),
            Rel::Ne => unreachable!("big-M rows are inequalities"),
        }
    }
    out.push_str("Bounds\n");
    for v in &model.real_vars {
        match model.bounds.get(v) {
            None | Some((None, None)) => {
                let _ = writeln!(out, " {v} free");
            }
            Some((lo, hi)) => {
                let lo = lo.as_ref().map_or("-inf".to_string(), lp_number);
                let hi = hi.as_ref().map_or("+inf".to_string(), lp_number);
                let _ = writeln!(out, " {lo} <= {v} <= {hi}");
            }
        }
    }
    if !model.bin_vars.is_empty() {
        out.push_str("Binary\n");
        for b in &model.bin_vars {
            let _ = writeln!(out, " {b}");
        }
    }
    out.push_str("End\n");
    out
}

/// The model with `x` and `y` fixed, as a formula.
pub fn mip_membership_formula(model: &MipModel, a: &[Rational], b: &[Rational]) -> Formula {
    let mut parts = vec![model.to_formula()];
    for (v, val) in model.x_names.iter().zip(a).chain(model.y_names.iter().zip(b)) {
        parts.push(Formula::cmp(LinExpr::var(v), Rel::Eq, &LinExpr::constant(val.clone())));
    }
    Formula::and(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library;
    use crate::network::NetworkBuilder;
    use crate::rational::int;
    use crate::solver::enumerate::solve_enumerate;
    use crate::solver::Verdict;

    fn boxed(lo: i64, hi: i64, n: usize) -> Vec<(Rational, Rational)> {
        vec![(int(lo), int(hi)); n]
    }

    #[test]
    fn big_m_examples() {
        let id = NetworkBuilder::new(1);
        let x = id.input();
        let id = id.finish(x).unwrap();
        assert_eq!(derive_big_m(&id, Some(&boxed(-1, 1, 1))).unwrap(), int(2));
        assert_eq!(derive_big_m(&library::relu(), Some(&boxed(-10, 10, 1))).unwrap(), int(20));
        let mut b = NetworkBuilder::new(1);
        let x = b.input();
        let a = b.scale_shift(x, int(3), int(1)).unwrap();
        let r = b.embed(&library::relu(), a).unwrap();
        let net = b.finish(r).unwrap();
        assert_eq!(derive_big_m(&net, Some(&boxed(-1, 1, 1))).unwrap(), int(8));
        assert_eq!(derive_big_m(&net, None), Err(MipError::Unbounded));
    }

    #[test]
    fn relu_branch_selection() {
        let model = encode_mip(&library::relu(), &int(100)).unwrap();
        assert_eq!(model.bin_vars.len(), 1);
        assert!(model.row_count() >= 8);
        let f = mip_membership_formula(&model, &[int(5)], &[int(5)]);
        let Verdict::Sat(m) = solve_enumerate(&f, None).unwrap() else { panic!() };
        // guard -5 <= 0 selects the first argument
        assert_eq!(m[&model.bin_vars[0]], int(1));
        let f = mip_membership_formula(&model, &[int(5)], &[int(4)]);
        assert_eq!(solve_enumerate(&f, None).unwrap(), Verdict::Unsat);
    }

    #[test]
    fn max_selects_second_argument() {
        let model = encode_mip(&library::max2(), &int(100)).unwrap();
        let f = mip_membership_formula(&model, &[int(3), int(5)], &[int(5)]);
        let Verdict::Sat(m) = solve_enumerate(&f, None).unwrap() else { panic!() };
        assert_eq!(m[&model.bin_vars[0]], int(0));
    }

    #[test]
    fn identity_and_determinism() {
        let id = NetworkBuilder::new(1);
        let x = id.input();
        let model = encode_mip(&id.finish(x).unwrap(), &int(1)).unwrap();
        assert!(model.bin_vars.is_empty());
        assert_eq!(model.lin_eqs.len(), 1);
        let text = emit_lp(&model, DEFAULT_EPS_STRICT);
        assert!(!text.contains("Binary"));
        let relu = encode_mip(&library::relu(), &int(20)).unwrap();
        let t1 = emit_lp(&relu, DEFAULT_EPS_STRICT);
        assert_eq!(t1, emit_lp(&relu, DEFAULT_EPS_STRICT));
        assert!(t1.contains(&format!("Binary\n {}\n", relu.bin_vars[0])));
        assert!(t1.contains("Subject To") && t1.ends_with("End\n"));
    }

    #[test]
    fn nonpositive_m_rejected() {
        assert_eq!(encode_mip(&library::relu(), &int(0)), Err(MipError::NonPositiveM));
    }
}
