//! Standard AMN constructors: common piecewise-affine functions, gates and
//! comparisons, the triplexer, and a ReLU network importer.
//!
//! Gate and comparison networks take their operands as one stacked input
//! vector: `(x, y, z)` or `(x, y, z1, z2)`, and return `x` when the
//! condition holds and `y` otherwise.

use num_traits::{One, Zero};

use crate::network::{Network, NetworkBuilder, NetworkError, NodeId};
use crate::rational::{int, Matrix, Rational};

fn coord(b: &mut NetworkBuilder, i: usize, a: i64, c: i64) -> Result<NodeId, NetworkError> {
    let n = b.dim(b.input());
    let mut row = vec![Rational::zero(); n];
    row[i] = int(a);
    let x = b.input();
    b.affine(Matrix::row(row), vec![int(c)], x)
}

/// `mux(v, 0, -v)` on scalar node `v`.
pub(crate) fn relu_of(b: &mut NetworkBuilder, v: NodeId) -> Result<NodeId, NetworkError> {
    let zero = b.constant(vec![Rational::zero()])?;
    let neg = b.scale_shift(v, -Rational::one(), Rational::zero())?;
    b.mux(v, zero, neg)
}

/// `mux(-v, v, v)` on scalar node `v`.
pub(crate) fn abs_of(b: &mut NetworkBuilder, v: NodeId) -> Result<NodeId, NetworkError> {
    let neg = b.scale_shift(v, -Rational::one(), Rational::zero())?;
    b.mux(neg, v, v)
}

/// `max(u, v) = mux(u, v, v - u)` on equal-sized nodes with scalar difference.
pub(crate) fn max_of(b: &mut NetworkBuilder, u: NodeId, v: NodeId) -> Result<NodeId, NetworkError> {
    let diff = b.combine(&[(u, -Rational::one()), (v, Rational::one())], vec![Rational::zero()])?;
    b.mux(u, v, diff)
}

/// `max(x1, x2) = mux(x1, x2, -x1 + x2)`.
pub fn max2() -> Network {
    let mut b = NetworkBuilder::new(2);
    let x1 = coord(&mut b, 0, 1, 0).unwrap();
    let x2 = coord(&mut b, 1, 1, 0).unwrap();
    let x = b.input();
    let g = b.affine(Matrix::from_ints(&[&[-1, 1]]), vec![int(0)], x).unwrap();
    let m = b.mux(x1, x2, g).unwrap();
    b.finish(m).unwrap()
}

/// `min(x1, x2) = mux(x2, x1, -x1 + x2)`.
pub fn min2() -> Network {
    let mut b = NetworkBuilder::new(2);
    let x1 = coord(&mut b, 0, 1, 0).unwrap();
    let x2 = coord(&mut b, 1, 1, 0).unwrap();
    let x = b.input();
    let g = b.affine(Matrix::from_ints(&[&[-1, 1]]), vec![int(0)], x).unwrap();
    let m = b.mux(x2, x1, g).unwrap();
    b.finish(m).unwrap()
}

/// Rectifier `mux(x, 0, -x)`.
pub fn relu() -> Network {
    let mut b = NetworkBuilder::new(1);
    let x = b.input();
    let out = relu_of(&mut b, x).unwrap();
    b.finish(out).unwrap()
}

/// `|x| = mux(-x, x, x)`.
pub fn abs() -> Network {
    let mut b = NetworkBuilder::new(1);
    let x = b.input();
    let out = abs_of(&mut b, x).unwrap();
    b.finish(out).unwrap()
}

/// Saturation `mux(1, mux(-1, x, x + 1), -x + 1)`.
pub fn sat() -> Network {
    let mut b = NetworkBuilder::new(1);
    let x = b.input();
    let one = b.constant(vec![int(1)]).unwrap();
    let minus_one = b.constant(vec![int(-1)]).unwrap();
    let xp1 = b.scale_shift(x, int(1), int(1)).unwrap();
    let inner = b.mux(minus_one, x, xp1).unwrap();
    let g = b.scale_shift(x, int(-1), int(1)).unwrap();
    let out = b.mux(one, inner, g).unwrap();
    b.finish(out).unwrap()
}

/// Saturation built from rectifiers: `r(x + 1) - r(x - 1) - 1`.
pub fn sat_relu() -> Network {
    let mut b = NetworkBuilder::new(1);
    let x = b.input();
    let xp1 = b.scale_shift(x, int(1), int(1)).unwrap();
    let xm1 = b.scale_shift(x, int(1), int(-1)).unwrap();
    let r1 = relu_of(&mut b, xp1).unwrap();
    let r2 = relu_of(&mut b, xm1).unwrap();
    let out = b.combine(&[(r1, int(1)), (r2, int(-1))], vec![int(-1)]).unwrap();
    b.finish(out).unwrap()
}

/// Deadzone: `x - 1` above 1, `x + 1` below -1, zero in between.
///
/// Built as `mux(x - 1, mux(x + 1, 0, x + 1), -x + 1)`.
pub fn deadzone() -> Network {
    let mut b = NetworkBuilder::new(1);
    let x = b.input();
    let zero = b.constant(vec![int(0)]).unwrap();
    let xm1 = b.scale_shift(x, int(1), int(-1)).unwrap();
    let xp1 = b.scale_shift(x, int(1), int(1)).unwrap();
    let inner = b.mux(xp1, zero, xp1).unwrap();
    let g = b.scale_shift(x, int(-1), int(1)).unwrap();
    let out = b.mux(xm1, inner, g).unwrap();
    b.finish(out).unwrap()
}

fn require_positive(n: usize) -> Result<(), NetworkError> {
    if n == 0 {
        Err(NetworkError::Dim("dimension must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// `‖x‖∞` as a right-nested chain `max(|x1|, max(|x2|, ...))`.
pub fn inf_norm(n: usize) -> Result<Network, NetworkError> {
    require_positive(n)?;
    let mut b = NetworkBuilder::new(n);
    let mut abs_parts = Vec::with_capacity(n);
    for i in 0..n {
        let xi = coord(&mut b, i, 1, 0)?;
        abs_parts.push(abs_of(&mut b, xi)?);
    }
    let mut acc = abs_parts[n - 1];
    for &part in abs_parts[..n - 1].iter().rev() {
        acc = max_of(&mut b, part, acc)?;
    }
    b.finish(acc)
}

/// `‖x‖₁ = Σ mux(-x_i, x_i, x_i)`.
pub fn one_norm(n: usize) -> Result<Network, NetworkError> {
    require_positive(n)?;
    let mut b = NetworkBuilder::new(n);
    let mut parts = Vec::with_capacity(n);
    for i in 0..n {
        let xi = coord(&mut b, i, 1, 0)?;
        parts.push((abs_of(&mut b, xi)?, int(1)));
    }
    let out = b.combine(&parts, vec![int(0)])?;
    b.finish(out)
}

/// Number of nonzero entries, `Σ mux(mux(0, 1, x_i), 1, -x_i)`.
pub fn card(n: usize) -> Result<Network, NetworkError> {
    require_positive(n)?;
    let mut b = NetworkBuilder::new(n);
    let zero = b.constant(vec![int(0)])?;
    let one = b.constant(vec![int(1)])?;
    let mut parts = Vec::with_capacity(n);
    for i in 0..n {
        let xi = coord(&mut b, i, 1, 0)?;
        let neg = coord(&mut b, i, -1, 0)?;
        let inner = b.mux(zero, one, xi)?;
        parts.push((b.mux(inner, one, neg)?, int(1)));
    }
    let out = b.combine(&parts, vec![int(0)])?;
    b.finish(out)
}

struct Operands {
    b: NetworkBuilder,
    ops: Vec<NodeId>,
}

fn operands(n: usize) -> Operands {
    let mut b = NetworkBuilder::new(n);
    let ops = (0..n).map(|i| coord(&mut b, i, 1, 0).unwrap()).collect();
    Operands { b, ops }
}

fn negate(b: &mut NetworkBuilder, v: NodeId) -> NodeId {
    b.scale_shift(v, int(-1), int(0)).unwrap()
}

/// AND over `(x, y, z1, z2)`: `mux(mux(x, y, z1), y, z2)`.
pub fn gate_and() -> Network {
    let Operands { mut b, ops } = operands(4);
    let inner = b.mux(ops[0], ops[1], ops[2]).unwrap();
    let out = b.mux(inner, ops[1], ops[3]).unwrap();
    b.finish(out).unwrap()
}

/// OR over `(x, y, z1, z2)`: `mux(x, mux(x, y, z1), z2)`.
pub fn gate_or() -> Network {
    let Operands { mut b, ops } = operands(4);
    let inner = b.mux(ops[0], ops[1], ops[2]).unwrap();
    let out = b.mux(ops[0], inner, ops[3]).unwrap();
    b.finish(out).unwrap()
}

/// NOT over `(x, y, z)`: `mux(y, x, z)`.
pub fn gate_not() -> Network {
    let Operands { mut b, ops } = operands(3);
    let out = b.mux(ops[1], ops[0], ops[2]).unwrap();
    b.finish(out).unwrap()
}

/// XOR over `(x, y, z1, z2)`: `mux(mux(y, x, z1), mux(x, y, z1), z2)`.
pub fn gate_xor() -> Network {
    let Operands { mut b, ops } = operands(4);
    let left = b.mux(ops[1], ops[0], ops[2]).unwrap();
    let right = b.mux(ops[0], ops[1], ops[2]).unwrap();
    let out = b.mux(left, right, ops[3]).unwrap();
    b.finish(out).unwrap()
}

/// `x` if `z <= 0`.
pub fn cmp_le() -> Network {
    let Operands { mut b, ops } = operands(3);
    let out = b.mux(ops[0], ops[1], ops[2]).unwrap();
    b.finish(out).unwrap()
}

/// `x` if `z >= 0`.
pub fn cmp_ge() -> Network {
    let Operands { mut b, ops } = operands(3);
    let nz = negate(&mut b, ops[2]);
    let out = b.mux(ops[0], ops[1], nz).unwrap();
    b.finish(out).unwrap()
}

/// `x` if `z < 0`: NOT with negated guard.
pub fn cmp_lt() -> Network {
    let Operands { mut b, ops } = operands(3);
    let nz = negate(&mut b, ops[2]);
    let out = b.mux(ops[1], ops[0], nz).unwrap();
    b.finish(out).unwrap()
}

/// `x` if `z > 0`: NOT.
pub fn cmp_gt() -> Network {
    let Operands { mut b, ops } = operands(3);
    let out = b.mux(ops[1], ops[0], ops[2]).unwrap();
    b.finish(out).unwrap()
}

/// `x` if `z = 0`: AND of `z <= 0` and `-z <= 0`.
pub fn cmp_eq() -> Network {
    let Operands { mut b, ops } = operands(3);
    let nz = negate(&mut b, ops[2]);
    let inner = b.mux(ops[0], ops[1], ops[2]).unwrap();
    let out = b.mux(inner, ops[1], nz).unwrap();
    b.finish(out).unwrap()
}

/// `x` if `z != 0`: AND with swapped signals.
pub fn cmp_neq() -> Network {
    let Operands { mut b, ops } = operands(3);
    let nz = negate(&mut b, ops[2]);
    let inner = b.mux(ops[1], ops[0], ops[2]).unwrap();
    let out = b.mux(inner, ops[0], nz).unwrap();
    b.finish(out).unwrap()
}

/// Two-layer, four-mux network on a scalar input, parameterized by
/// `θ = (a1, b1, c1, d1, e1, f1, ..., a4, ..., f4)`.
///
/// ```text
/// x_i = a_i x + b_i,  y_i = c_i x + d_i,  z_i = e_i x + f_i,  w_i = mux(x_i, y_i, z_i)   (i = 1..3)
/// x_4 = a_4 w_2 + b_4, y_4 = c_4 w_3 + d_4, z_4 = e_4 w_1 + f_4
/// y   = mux(x_4, y_4, z_4)
/// ```
///
/// The parameter layout of the result lists θ in exactly this order.
pub fn triplexer(theta: &[Rational]) -> Result<Network, NetworkError> {
    if theta.len() != 24 {
        return Err(NetworkError::Dim(format!("triplexer needs 24 parameters, got {}", theta.len())));
    }
    let mut b = NetworkBuilder::new(1);
    let x = b.input();
    let p = |k: usize| theta[k].clone();
    let mut first = Vec::new();
    for layer in 0..3 {
        let o = 6 * layer;
        let mut unit = Vec::new();
        for (j, prefix) in ["x", "y", "z"].iter().enumerate() {
            let name = format!("{prefix}{}", layer + 1);
            let id = b.named_affine(
                Some(&name),
                Matrix::row(vec![p(o + 2 * j)]),
                vec![p(o + 2 * j + 1)],
                &[x],
            )?;
            unit.push(id);
        }
        first.push(unit);
    }
    let mut w = Vec::new();
    for (i, unit) in first.iter().enumerate() {
        let name = format!("w{}", i + 1);
        w.push(b.named_mux(Some(&name), unit[0], unit[1], unit[2])?);
    }
    let x4 = b.named_affine(Some("x4"), Matrix::row(vec![p(18)]), vec![p(19)], &[w[1]])?;
    let y4 = b.named_affine(Some("y4"), Matrix::row(vec![p(20)]), vec![p(21)], &[w[2]])?;
    let z4 = b.named_affine(Some("z4"), Matrix::row(vec![p(22)]), vec![p(23)], &[w[0]])?;
    let y = b.named_mux(Some("y"), x4, y4, z4)?;
    b.finish(y)
}

/// Single-layer perceptron on `R^n`:
/// `mux(aᵀx + b, cᵀx + d, eᵀx + f)` with `θ = (a, b, c, d, e, f)`.
pub fn perceptron(n: usize, theta: &[Rational]) -> Result<Network, NetworkError> {
    require_positive(n)?;
    if theta.len() != 3 * (n + 1) {
        return Err(NetworkError::Dim(format!(
            "perceptron on R^{n} needs {} parameters, got {}",
            3 * (n + 1),
            theta.len()
        )));
    }
    let mut b = NetworkBuilder::new(n);
    let x = b.input();
    let mut parts = Vec::new();
    for (k, name) in ["alpha", "beta", "gamma"].iter().enumerate() {
        let o = k * (n + 1);
        parts.push(b.named_affine(
            Some(name),
            Matrix::row(theta[o..o + n].to_vec()),
            vec![theta[o + n].clone()],
            &[x],
        )?);
    }
    let out = b.named_mux(Some("y"), parts[0], parts[1], parts[2])?;
    b.finish(out)
}

/// Switched linear system `mux(A⁻x, A⁺x, e₁ᵀx)`.
pub fn switched(a_minus: &Matrix, a_plus: &Matrix) -> Result<Network, NetworkError> {
    let n = a_minus.cols();
    if a_minus.rows() != n || a_plus.rows() != n || a_plus.cols() != n {
        return Err(NetworkError::Dim("switched system needs square matrices of equal size".into()));
    }
    let mut b = NetworkBuilder::new(n);
    let x = b.input();
    let lo = b.affine(a_minus.clone(), vec![Rational::zero(); n], x)?;
    let hi = b.affine(a_plus.clone(), vec![Rational::zero(); n], x)?;
    let g = coord(&mut b, 0, 1, 0)?;
    let out = b.mux(lo, hi, g)?;
    b.finish(out)
}

/// Phase-based variable-gain nonlinearity on `(e, ė)`: `α e` when
/// `e ė > 0`, else 0. Built from two OR gates.
pub fn variable_gain(alpha: Rational) -> Network {
    let mut b = NetworkBuilder::new(2);
    let e = coord(&mut b, 0, 1, 0).unwrap();
    let de = coord(&mut b, 1, 1, 0).unwrap();
    let ne = coord(&mut b, 0, -1, 0).unwrap();
    let nde = coord(&mut b, 1, -1, 0).unwrap();
    let x = b.input();
    let ae = b.affine(Matrix::row(vec![alpha, Rational::zero()]), vec![int(0)], x).unwrap();
    let zero = b.constant(vec![int(0)]).unwrap();
    // OR(x, y, z1, z2) = mux(x, mux(x, y, z1), z2)
    let i1 = b.mux(zero, ae, ne).unwrap();
    let inner = b.mux(zero, i1, nde).unwrap();
    let o1 = b.mux(inner, ae, e).unwrap();
    let out = b.mux(inner, o1, de).unwrap();
    b.finish(out).unwrap()
}

/// Dense layer `(A, b)` of a feed-forward network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<Rational>,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<Rational>) -> Self {
        Self { weights, bias }
    }
}

/// Converts a ReLU feed-forward network (ReLU after every layer except the
/// last) into an AMN with one mux `mux(v, 0, -v)` per hidden unit.
pub fn from_relu_nn(layers: &[DenseLayer]) -> Result<Network, NetworkError> {
    let first = layers.first().ok_or_else(|| NetworkError::Dim("no layers".into()))?;
    let mut b = NetworkBuilder::new(first.weights.cols());
    let mut current: Vec<NodeId> = vec![b.input()];
    let zero = b.constant(vec![int(0)])?;
    for (li, layer) in layers.iter().enumerate() {
        let width: usize = current.iter().map(|&c| b.dim(c)).sum();
        if layer.weights.cols() != width || layer.weights.rows() != layer.bias.len() {
            return Err(NetworkError::Dim(format!(
                "layer {li}: weights {}x{} and bias {} do not fit input width {width}",
                layer.weights.rows(),
                layer.weights.cols(),
                layer.bias.len()
            )));
        }
        if li + 1 == layers.len() {
            let out = b.affine_stacked(layer.weights.clone(), layer.bias.clone(), &current)?;
            return b.finish(out);
        }
        let mut next = Vec::with_capacity(layer.bias.len());
        for i in 0..layer.bias.len() {
            let row = layer.weights.row_slice(i).to_vec();
            let neg_row = row.iter().map(|v| -v).collect();
            let v = b.affine_stacked(Matrix::row(row), vec![layer.bias[i].clone()], &current)?;
            let g = b.affine_stacked(Matrix::row(neg_row), vec![-layer.bias[i].clone()], &current)?;
            next.push(b.mux(v, zero, g)?);
        }
        current = next;
    }
    unreachable!("loop returns on the last layer")
}

/// The identity `v = r(v) - r(-v)` applied to a linear map: a one-hidden-layer
/// ReLU network with weights `K` and `-K` that computes `Kx`.
pub fn linear_feedback_relu(k: &Matrix) -> Result<Network, NetworkError> {
    let m = k.rows();
    let hidden = k.vcat(&k.scaled(&int(-1)));
    let out_rows = Matrix::identity(m).hcat(&Matrix::identity(m).scaled(&int(-1)));
    from_relu_nn(&[
        DenseLayer::new(hidden, vec![Rational::zero(); 2 * m]),
        DenseLayer::new(out_rows, vec![Rational::zero(); m]),
    ])
}
