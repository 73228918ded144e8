//! Affine multiplexing networks as validated computation graphs.
//!
//! A [`Network`] is a DAG of four node kinds: the single vector input, affine
//! maps `A v + b`, constants (affine maps with no child), and multiplexers
//! `mux(x, y, z)` that select `x` when the scalar guard `z <= 0` and `y`
//! otherwise. Nodes are stored in topological order and addressed by dense
//! [`NodeId`]s.
//!
//! An affine node may read several children; the matrix then acts on their
//! concatenation. This is how tuple outputs and sums of sub-networks are
//! expressed.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::rational::{Matrix, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("dependency cycle through node `{0}`")]
    Cycle(String),
    #[error("dimension error: {0}")]
    Dim(String),
    #[error("reference to unknown node `{0}`")]
    DanglingRef(String),
    #[error("node name `{0}` declared twice")]
    DuplicateName(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("parameter layout mismatch: {0}")]
    Layout(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Input {
        dim: usize,
    },
    Affine {
        weights: Matrix,
        bias: Vec<Rational>,
        children: Vec<NodeId>,
    },
    /// `x` if the scalar `z <= 0`, else `y`.
    Mux {
        x: NodeId,
        y: NodeId,
        z: NodeId,
    },
    Constant {
        value: Vec<Rational>,
    },
}

impl Node {
    pub fn children(&self) -> Vec<NodeId> {
        match self {
            Node::Input { .. } | Node::Constant { .. } => Vec::new(),
            Node::Affine { children, .. } => children.clone(),
            Node::Mux { x, y, z } => vec![*x, *y, *z],
        }
    }

    pub fn is_mux(&self) -> bool {
        matches!(self, Node::Mux { .. })
    }
}

/// A validated, immutable AMN.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    nodes: Vec<Node>,
    names: Vec<String>,
    dims: Vec<usize>,
    input: NodeId,
    output: NodeId,
}

/// Structural description of one node, with children referenced by name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeDesc {
    Input {
        dim: usize,
    },
    Affine {
        weights: Matrix,
        bias: Vec<Rational>,
        children: Vec<String>,
    },
    Mux {
        x: String,
        y: String,
        z: String,
    },
    Constant {
        value: Vec<Rational>,
    },
}

impl NodeDesc {
    fn refs(&self) -> Vec<&str> {
        match self {
            NodeDesc::Input { .. } | NodeDesc::Constant { .. } => Vec::new(),
            NodeDesc::Affine { children, .. } => children.iter().map(String::as_str).collect(),
            NodeDesc::Mux { x, y, z } => vec![x.as_str(), y.as_str(), z.as_str()],
        }
    }
}

/// Builds a network from named declarations in any order.
///
/// Declarations may reference each other freely; the dependency graph is
/// topologically sorted (keeping declaration order where the dependencies
/// allow) and rejected if it contains a cycle. Only nodes the output depends
/// on are kept, plus the input node.
pub fn build(decls: &[(String, NodeDesc)], output: &str) -> Result<Network, NetworkError> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, (name, _)) in decls.iter().enumerate() {
        if index.insert(name.as_str(), i).is_some() {
            return Err(NetworkError::DuplicateName(name.clone()));
        }
    }
    let inputs: Vec<usize> = decls
        .iter()
        .enumerate()
        .filter(|(_, (_, d))| matches!(d, NodeDesc::Input { .. }))
        .map(|(i, _)| i)
        .collect();
    let input = match inputs.as_slice() {
        [i] => *i,
        [] => return Err(NetworkError::Input("no input declared".into())),
        _ => return Err(NetworkError::Input("more than one input declared".into())),
    };
    let &out = index
        .get(output)
        .ok_or_else(|| NetworkError::DanglingRef(output.to_string()))?;
    let mut deps: Vec<Vec<usize>> = Vec::with_capacity(decls.len());
    for (_, desc) in decls {
        let mut d = Vec::new();
        for r in desc.refs() {
            d.push(*index.get(r).ok_or_else(|| NetworkError::DanglingRef(r.to_string()))?);
        }
        deps.push(d);
    }

    // Iterative DFS from the output: reachability plus cycle detection.
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        New,
        Active,
        Done,
    }
    let mut mark = vec![Mark::New; decls.len()];
    let mut post = Vec::new();
    let mut stack = vec![(out, 0usize)];
    mark[out] = Mark::Active;
    while let Some((v, next)) = stack.pop() {
        if next < deps[v].len() {
            stack.push((v, next + 1));
            let c = deps[v][next];
            match mark[c] {
                Mark::New => {
                    mark[c] = Mark::Active;
                    stack.push((c, 0));
                }
                Mark::Active => return Err(NetworkError::Cycle(decls[c].0.clone())),
                Mark::Done => {}
            }
        } else {
            mark[v] = Mark::Done;
            post.push(v);
        }
    }
    let mut keep: BTreeSet<usize> = post.iter().copied().collect();
    keep.insert(input);

    // Kahn's algorithm with the smallest declaration index first.
    let mut indeg: HashMap<usize, usize> = keep.iter().map(|&v| (v, 0)).collect();
    let mut users: HashMap<usize, Vec<usize>> = HashMap::new();
    for &v in &keep {
        let unique: BTreeSet<usize> = deps[v].iter().copied().collect();
        *indeg.get_mut(&v).unwrap() = unique.len();
        for c in unique {
            users.entry(c).or_default().push(v);
        }
    }
    let mut ready: BTreeSet<usize> = indeg.iter().filter(|(_, &d)| d == 0).map(|(&v, _)| v).collect();
    let mut order = Vec::with_capacity(keep.len());
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &u in users.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
            let d = indeg.get_mut(&u).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.insert(u);
            }
        }
    }
    let new_id: HashMap<usize, NodeId> = order.iter().enumerate().map(|(k, &v)| (v, NodeId(k))).collect();
    let map = |name: &String| new_id[&index[name.as_str()]];

    let mut nodes = Vec::with_capacity(order.len());
    let mut names = Vec::with_capacity(order.len());
    for &v in &order {
        let (name, desc) = &decls[v];
        let node = match desc {
            NodeDesc::Input { dim } => Node::Input { dim: *dim },
            NodeDesc::Constant { value } => Node::Constant { value: value.clone() },
            NodeDesc::Affine {
                weights,
                bias,
                children,
            } => Node::Affine {
                weights: weights.clone(),
                bias: bias.clone(),
                children: children.iter().map(map).collect(),
            },
            NodeDesc::Mux { x, y, z } => Node::Mux {
                x: map(x),
                y: map(y),
                z: map(z),
            },
        };
        nodes.push(node);
        names.push(name.clone());
    }
    Network::from_parts(nodes, names, new_id[&input], new_id[&out])
}

impl Network {
    /// Validates nodes already in topological order.
    fn from_parts(
        nodes: Vec<Node>,
        names: Vec<String>,
        input: NodeId,
        output: NodeId,
    ) -> Result<Self, NetworkError> {
        let mut dims: Vec<usize> = Vec::with_capacity(nodes.len());
        for (k, node) in nodes.iter().enumerate() {
            let name = &names[k];
            for c in node.children() {
                if c.0 >= k {
                    return Err(NetworkError::Cycle(name.clone()));
                }
            }
            let dim = match node {
                Node::Input { dim } => {
                    if *dim == 0 {
                        return Err(NetworkError::Dim(format!("input `{name}` has dimension 0")));
                    }
                    *dim
                }
                Node::Constant { value } => {
                    if value.is_empty() {
                        return Err(NetworkError::Dim(format!("constant `{name}` is empty")));
                    }
                    value.len()
                }
                Node::Affine {
                    weights,
                    bias,
                    children,
                } => {
                    let n: usize = children.iter().map(|c| dims[c.0]).sum();
                    if children.is_empty() {
                        return Err(NetworkError::Dim(format!("affine `{name}` has no argument")));
                    }
                    if weights.cols() != n {
                        return Err(NetworkError::Dim(format!(
                            "affine `{name}`: weight matrix has {} columns, argument has dimension {n}",
                            weights.cols()
                        )));
                    }
                    if weights.rows() != bias.len() || bias.is_empty() {
                        return Err(NetworkError::Dim(format!(
                            "affine `{name}`: {} weight rows but bias of length {}",
                            weights.rows(),
                            bias.len()
                        )));
                    }
                    bias.len()
                }
                Node::Mux { x, y, z } => {
                    if dims[x.0] != dims[y.0] {
                        return Err(NetworkError::Dim(format!(
                            "mux `{name}`: signals have dimensions {} and {}",
                            dims[x.0], dims[y.0]
                        )));
                    }
                    if dims[z.0] != 1 {
                        return Err(NetworkError::Dim(format!(
                            "mux `{name}`: guard has dimension {}, expected 1",
                            dims[z.0]
                        )));
                    }
                    dims[x.0]
                }
            };
            dims.push(dim);
        }
        if !matches!(nodes.get(input.0), Some(Node::Input { .. })) {
            return Err(NetworkError::Input("input id does not name an input node".into()));
        }
        if output.0 >= nodes.len() {
            return Err(NetworkError::DanglingRef(format!("{output}")));
        }
        let mut seen = BTreeSet::new();
        for n in &names {
            if !seen.insert(n) {
                return Err(NetworkError::DuplicateName(n.clone()));
            }
        }
        Ok(Self {
            nodes,
            names,
            dims,
            input,
            output,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.names[id.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dim(&self, id: NodeId) -> usize {
        self.dims[id.0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn input(&self) -> NodeId {
        self.input
    }

    pub fn output(&self) -> NodeId {
        self.output
    }

    pub fn input_dim(&self) -> usize {
        self.dims[self.input.0]
    }

    pub fn output_dim(&self) -> usize {
        self.dims[self.output.0]
    }

    pub fn mux_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_mux()).count()
    }

    /// Value of every node at input `x`, in node order.
    pub fn evaluate_all(&self, x: &[Rational]) -> Result<Vec<Vec<Rational>>, NetworkError> {
        if x.len() != self.input_dim() {
            return Err(NetworkError::Dim(format!(
                "input has length {}, network expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut values: Vec<Vec<Rational>> = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let v = match node {
                Node::Input { .. } => x.to_vec(),
                Node::Constant { value } => value.clone(),
                Node::Affine {
                    weights,
                    bias,
                    children,
                } => {
                    let arg = stacked(&values, children);
                    weights
                        .mul_vec(&arg)
                        .into_iter()
                        .zip(bias)
                        .map(|(a, b)| a + b)
                        .collect()
                }
                Node::Mux { x, y, z } => {
                    if values[z.0][0] <= Rational::zero() {
                        values[x.0].clone()
                    } else {
                        values[y.0].clone()
                    }
                }
            };
            values.push(v);
        }
        Ok(values)
    }

    pub fn evaluate(&self, x: &[Rational]) -> Result<Vec<Rational>, NetworkError> {
        let mut all = self.evaluate_all(x)?;
        Ok(all.swap_remove(self.output.0))
    }

    /// Variables, dependency edges, inputs/outputs and a topological order.
    ///
    /// A constant is an affine map of the input with zero weights, so it
    /// carries an edge from the input node.
    pub fn graph_meta(&self) -> GraphMeta {
        let mut edges = BTreeSet::new();
        for (k, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Constant { .. } => {
                    edges.insert((self.input, NodeId(k)));
                }
                _ => {
                    for c in node.children() {
                        edges.insert((c, NodeId(k)));
                    }
                }
            }
        }
        let has_in: BTreeSet<NodeId> = edges.iter().map(|e| e.1).collect();
        let has_out: BTreeSet<NodeId> = edges.iter().map(|e| e.0).collect();
        let vars: Vec<NodeId> = self.ids().collect();
        GraphMeta {
            inputs: vars.iter().copied().filter(|v| !has_in.contains(v)).collect(),
            outputs: vars.iter().copied().filter(|v| !has_out.contains(v)).collect(),
            topo_order: vars.clone(),
            vars,
            edges: edges.into_iter().collect(),
        }
    }

    /// The layout of all affine parameters: weights (row-major) then bias,
    /// per affine node in node order; constants contribute their value as a
    /// bias.
    pub fn parameter_layout(&self) -> ParameterLayout {
        let mut slots = Vec::new();
        let mut offset = 0;
        for (k, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Affine { weights, bias, .. } => {
                    slots.push(ParamSlot {
                        node: NodeId(k),
                        field: ParamField::Weights,
                        rows: weights.rows(),
                        cols: weights.cols(),
                        offset,
                    });
                    offset += weights.rows() * weights.cols();
                    slots.push(ParamSlot {
                        node: NodeId(k),
                        field: ParamField::Bias,
                        rows: bias.len(),
                        cols: 1,
                        offset,
                    });
                    offset += bias.len();
                }
                Node::Constant { value } => {
                    slots.push(ParamSlot {
                        node: NodeId(k),
                        field: ParamField::Bias,
                        rows: value.len(),
                        cols: 1,
                        offset,
                    });
                    offset += value.len();
                }
                _ => {}
            }
        }
        ParameterLayout { slots, len: offset }
    }

    /// Current parameter vector θ.
    pub fn parameters(&self) -> ParameterVector {
        let layout = self.parameter_layout();
        let mut theta = Vec::with_capacity(layout.len);
        for node in &self.nodes {
            match node {
                Node::Affine { weights, bias, .. } => {
                    theta.extend(weights.entries().iter().cloned());
                    theta.extend(bias.iter().cloned());
                }
                Node::Constant { value } => theta.extend(value.iter().cloned()),
                _ => {}
            }
        }
        ParameterVector { theta, layout }
    }

    /// Returns a copy of the network with every affine parameter replaced
    /// according to `params`.
    pub fn bind_params(&self, params: &ParameterVector) -> Result<Network, NetworkError> {
        let expected = self.parameter_layout();
        if params.layout != expected {
            return Err(NetworkError::Layout("layout does not match network".into()));
        }
        if params.theta.len() != expected.len {
            return Err(NetworkError::Layout(format!(
                "theta has {} entries, layout needs {}",
                params.theta.len(),
                expected.len
            )));
        }
        let mut out = self.clone();
        for slot in &expected.slots {
            let src = &params.theta[slot.offset..slot.offset + slot.rows * slot.cols];
            match (&mut out.nodes[slot.node.0], slot.field) {
                (Node::Affine { weights, .. }, ParamField::Weights) => {
                    weights.entries_mut().clone_from_slice(src)
                }
                (Node::Affine { bias, .. }, ParamField::Bias) => bias.clone_from_slice(src),
                (Node::Constant { value }, ParamField::Bias) => value.clone_from_slice(src),
                _ => unreachable!("layout built from this network"),
            }
        }
        Ok(out)
    }

    /// `true` for every θ component whose weak gradient is structurally zero:
    /// parameters of nodes that reach the output only through mux guards.
    pub fn enable_parameter_mask(&self) -> Vec<bool> {
        let live = self.signal_live_nodes();
        let layout = self.parameter_layout();
        let mut mask = vec![false; layout.len];
        for slot in &layout.slots {
            if !live[slot.node.0] {
                for m in &mut mask[slot.offset..slot.offset + slot.rows * slot.cols] {
                    *m = true;
                }
            }
        }
        mask
    }

    /// Nodes connected to the output by a path that avoids every guard edge.
    pub fn signal_live_nodes(&self) -> Vec<bool> {
        let mut live = vec![false; self.nodes.len()];
        live[self.output.0] = true;
        for k in (0..self.nodes.len()).rev() {
            if !live[k] {
                continue;
            }
            match &self.nodes[k] {
                Node::Affine { children, .. } => {
                    for c in children {
                        live[c.0] = true;
                    }
                }
                Node::Mux { x, y, .. } => {
                    live[x.0] = true;
                    live[y.0] = true;
                }
                _ => {}
            }
        }
        live
    }

    /// Nodes used as a mux guard.
    pub fn guard_nodes(&self) -> BTreeSet<NodeId> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Mux { z, .. } => Some(*z),
                _ => None,
            })
            .collect()
    }

    /// `outer ∘ inner`; `inner`'s output dimension must equal `outer`'s input.
    pub fn compose(outer: &Network, inner: &Network) -> Result<Network, NetworkError> {
        let mut b = NetworkBuilder::new(inner.input_dim());
        let x = b.input();
        let mid = b.embed(inner, x)?;
        let out = b.embed(outer, mid)?;
        b.finish(out)
    }
}

pub(crate) fn stacked(values: &[Vec<Rational>], children: &[NodeId]) -> Vec<Rational> {
    if let [c] = children {
        return values[c.0].clone();
    }
    children.iter().flat_map(|c| values[c.0].iter().cloned()).collect()
}

/// Computation graph `G(φ)` with its inputs and outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphMeta {
    pub vars: Vec<NodeId>,
    pub edges: Vec<(NodeId, NodeId)>,
    pub inputs: Vec<NodeId>,
    pub outputs: Vec<NodeId>,
    pub topo_order: Vec<NodeId>,
}

impl GraphMeta {
    /// Checks that `topo_order` lists every variable once with each edge
    /// pointing forward.
    pub fn is_valid_topological_order(&self) -> bool {
        let pos: HashMap<NodeId, usize> = self.topo_order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        pos.len() == self.vars.len()
            && self
                .edges
                .iter()
                .all(|(a, b)| matches!((pos.get(a), pos.get(b)), (Some(i), Some(j)) if i < j))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamField {
    Weights,
    Bias,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParamSlot {
    pub node: NodeId,
    pub field: ParamField,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParameterLayout {
    pub slots: Vec<ParamSlot>,
    pub len: usize,
}

impl ParameterLayout {
    /// For θ index `i`, the owning slot and the (row, col) within it.
    pub fn locate(&self, i: usize) -> Option<(&ParamSlot, usize, usize)> {
        self.slots.iter().find_map(|s| {
            let size = s.rows * s.cols;
            (i >= s.offset && i < s.offset + size).then(|| {
                let k = i - s.offset;
                (s, k / s.cols, k % s.cols)
            })
        })
    }
}

/// θ together with the layout that maps it onto affine weights and biases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParameterVector {
    pub theta: Vec<Rational>,
    pub layout: ParameterLayout,
}

impl ParameterVector {
    pub fn with_theta(&self, theta: Vec<Rational>) -> Self {
        Self {
            theta,
            layout: self.layout.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// Incremental construction of networks whose nodes are always declared
/// before use (so the result is acyclic by construction).
#[derive(Debug, Clone)]
pub struct NetworkBuilder {
    nodes: Vec<Node>,
    names: Vec<String>,
    dims: Vec<usize>,
}

impl NetworkBuilder {
    /// Starts a network whose input node `x` has dimension `input_dim`.
    pub fn new(input_dim: usize) -> Self {
        Self::with_input_name(input_dim, "x")
    }

    pub fn with_input_name(input_dim: usize, name: &str) -> Self {
        Self {
            nodes: vec![Node::Input { dim: input_dim }],
            names: vec![name.to_string()],
            dims: vec![input_dim],
        }
    }

    pub fn input(&self) -> NodeId {
        NodeId(0)
    }

    pub fn dim(&self, id: NodeId) -> usize {
        self.dims[id.0]
    }

    fn push(&mut self, node: Node, dim: usize, name: Option<&str>) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(node);
        self.names.push(name.map_or_else(|| format!("n{}", id.0), str::to_string));
        self.dims.push(dim);
        id
    }

    fn check(&self, id: NodeId) -> Result<(), NetworkError> {
        if id.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(NetworkError::DanglingRef(id.to_string()))
        }
    }

    pub fn named_affine(
        &mut self,
        name: Option<&str>,
        weights: Matrix,
        bias: Vec<Rational>,
        children: &[NodeId],
    ) -> Result<NodeId, NetworkError> {
        for &c in children {
            self.check(c)?;
        }
        let n: usize = children.iter().map(|c| self.dims[c.0]).sum();
        if children.is_empty() || weights.cols() != n || weights.rows() != bias.len() || bias.is_empty() {
            return Err(NetworkError::Dim(format!(
                "affine: weights {}x{}, bias {}, argument dimension {n}",
                weights.rows(),
                weights.cols(),
                bias.len()
            )));
        }
        let dim = bias.len();
        Ok(self.push(
            Node::Affine {
                weights,
                bias,
                children: children.to_vec(),
            },
            dim,
            name,
        ))
    }

    pub fn affine(&mut self, weights: Matrix, bias: Vec<Rational>, child: NodeId) -> Result<NodeId, NetworkError> {
        self.named_affine(None, weights, bias, &[child])
    }

    /// Affine map over the concatenation of several children.
    pub fn affine_stacked(
        &mut self,
        weights: Matrix,
        bias: Vec<Rational>,
        children: &[NodeId],
    ) -> Result<NodeId, NetworkError> {
        self.named_affine(None, weights, bias, children)
    }

    pub fn named_mux(&mut self, name: Option<&str>, x: NodeId, y: NodeId, z: NodeId) -> Result<NodeId, NetworkError> {
        for id in [x, y, z] {
            self.check(id)?;
        }
        if self.dims[x.0] != self.dims[y.0] {
            return Err(NetworkError::Dim(format!(
                "mux signals have dimensions {} and {}",
                self.dims[x.0], self.dims[y.0]
            )));
        }
        if self.dims[z.0] != 1 {
            return Err(NetworkError::Dim(format!("mux guard has dimension {}", self.dims[z.0])));
        }
        let dim = self.dims[x.0];
        Ok(self.push(Node::Mux { x, y, z }, dim, name))
    }

    pub fn mux(&mut self, x: NodeId, y: NodeId, z: NodeId) -> Result<NodeId, NetworkError> {
        self.named_mux(None, x, y, z)
    }

    pub fn constant(&mut self, value: Vec<Rational>) -> Result<NodeId, NetworkError> {
        if value.is_empty() {
            return Err(NetworkError::Dim("empty constant".into()));
        }
        let dim = value.len();
        Ok(self.push(Node::Constant { value }, dim, None))
    }

    /// `a * v + c` for scalar `a`, `c` applied component-wise.
    pub fn scale_shift(&mut self, v: NodeId, a: Rational, c: Rational) -> Result<NodeId, NetworkError> {
        let n = self.dims[v.0];
        self.affine(Matrix::identity(n).scaled(&a), vec![c; n], v)
    }

    /// Component `i` of `v`.
    pub fn select(&mut self, v: NodeId, i: usize) -> Result<NodeId, NetworkError> {
        let n = self.dims[v.0];
        if i >= n {
            return Err(NetworkError::Dim(format!("select {i} from dimension {n}")));
        }
        let mut row = vec![Rational::zero(); n];
        row[i] = Rational::from_integer(1.into());
        self.affine(Matrix::row(row), vec![Rational::zero()], v)
    }

    /// Linear combination `Σ coeffs[k] * parts[k] + c` of equally sized parts.
    pub fn combine(&mut self, parts: &[(NodeId, Rational)], c: Vec<Rational>) -> Result<NodeId, NetworkError> {
        let n = c.len();
        let mut blocks: Option<Matrix> = None;
        let mut children = Vec::with_capacity(parts.len());
        for (id, a) in parts {
            self.check(*id)?;
            if self.dims[id.0] != n {
                return Err(NetworkError::Dim("combine: parts differ in dimension".into()));
            }
            let block = Matrix::identity(n).scaled(a);
            blocks = Some(match blocks {
                None => block,
                Some(m) => m.hcat(&block),
            });
            children.push(*id);
        }
        let weights = blocks.ok_or_else(|| NetworkError::Dim("combine: no parts".into()))?;
        self.affine_stacked(weights, c, &children)
    }

    /// Concatenation of several nodes into one vector.
    pub fn stack(&mut self, parts: &[NodeId]) -> Result<NodeId, NetworkError> {
        let n: usize = parts.iter().map(|p| self.dims[p.0]).sum();
        self.affine_stacked(Matrix::identity(n), vec![Rational::zero(); n], parts)
    }

    /// Copies `net` into this builder with its input wired to `input`;
    /// returns the copy of its output node.
    pub fn embed(&mut self, net: &Network, input: NodeId) -> Result<NodeId, NetworkError> {
        self.check(input)?;
        if self.dims[input.0] != net.input_dim() {
            return Err(NetworkError::Dim(format!(
                "embed: network expects input dimension {}, got {}",
                net.input_dim(),
                self.dims[input.0]
            )));
        }
        let mut map = Vec::with_capacity(net.len());
        for (k, node) in net.nodes().iter().enumerate() {
            let id = match node {
                Node::Input { .. } => input,
                Node::Constant { value } => self.constant(value.clone())?,
                Node::Affine {
                    weights,
                    bias,
                    children,
                } => {
                    let ch: Vec<NodeId> = children.iter().map(|c| map[c.0]).collect();
                    self.named_affine(None, weights.clone(), bias.clone(), &ch)?
                }
                Node::Mux { x, y, z } => self.mux(map[x.0], map[y.0], map[z.0])?,
            };
            debug_assert!(k == map.len());
            map.push(id);
        }
        Ok(map[net.output().0])
    }

    /// Validates and returns the network computing node `output`, dropping
    /// nodes the output does not depend on.
    pub fn finish(self, output: NodeId) -> Result<Network, NetworkError> {
        self.check(output)?;
        let mut used = vec![false; self.nodes.len()];
        used[output.0] = true;
        used[0] = true;
        for k in (0..self.nodes.len()).rev() {
            if used[k] {
                for c in self.nodes[k].children() {
                    used[c.0] = true;
                }
            }
        }
        let mut remap = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::new();
        let mut names = Vec::new();
        for (k, node) in self.nodes.into_iter().enumerate() {
            if !used[k] {
                continue;
            }
            remap[k] = nodes.len();
            let r = |id: NodeId| NodeId(remap[id.0]);
            let node = match node {
                Node::Affine {
                    weights,
                    bias,
                    children,
                } => Node::Affine {
                    weights,
                    bias,
                    children: children.into_iter().map(r).collect(),
                },
                Node::Mux { x, y, z } => Node::Mux {
                    x: r(x),
                    y: r(y),
                    z: r(z),
                },
                other => other,
            };
            nodes.push(node);
            names.push(self.names[k].clone());
        }
        // Auto-generated names follow the final positions.
        for (k, name) in names.iter_mut().enumerate() {
            if k > 0 && name.starts_with('n') && name[1..].chars().all(|c| c.is_ascii_digit()) {
                *name = format!("n{k}");
            }
        }
        let out = NodeId(remap[output.0]);
        Network::from_parts(nodes, names, NodeId(0), out)
    }
}

/// Largest absolute entry of any weight or bias.
pub fn max_parameter_magnitude(net: &Network) -> Rational {
    net.parameters()
        .theta
        .iter()
        .map(|v| v.abs())
        .fold(Rational::zero(), |a, b| if b > a { b } else { a })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    fn desc_affine(rows: &[&[i64]], bias: &[i64], children: &[&str]) -> NodeDesc {
        NodeDesc::Affine {
            weights: Matrix::from_ints(rows),
            bias: bias.iter().map(|&b| int(b)).collect(),
            children: children.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn max_decls() -> Vec<(String, NodeDesc)> {
        vec![
            ("x".into(), NodeDesc::Input { dim: 2 }),
            ("a1".into(), desc_affine(&[&[1, 0]], &[0], &["x"])),
            ("a2".into(), desc_affine(&[&[0, 1]], &[0], &["x"])),
            ("a3".into(), desc_affine(&[&[-1, 1]], &[0], &["x"])),
            (
                "m".into(),
                NodeDesc::Mux {
                    x: "a1".into(),
                    y: "a2".into(),
                    z: "a3".into(),
                },
            ),
        ]
    }

    #[test]
    fn max_network_from_descriptions() {
        let net = build(&max_decls(), "m").unwrap();
        assert_eq!(net.input_dim(), 2);
        assert_eq!(net.output_dim(), 1);
        assert_eq!(net.evaluate(&[int(3), int(5)]).unwrap(), vec![int(5)]);
        assert_eq!(net.evaluate(&[int(7), int(5)]).unwrap(), vec![int(7)]);
        // tie selects the first signal
        assert_eq!(net.evaluate(&[int(4), int(4)]).unwrap(), vec![int(4)]);
    }

    #[test]
    fn identity_network() {
        let net = build(&[("x".into(), NodeDesc::Input { dim: 2 })], "x").unwrap();
        assert_eq!(net.input_dim(), 2);
        assert_eq!(net.output_dim(), 2);
        let meta = net.graph_meta();
        assert_eq!(meta.vars.len(), 1);
        assert!(meta.edges.is_empty());
        assert_eq!(meta.inputs, vec![NodeId(0)]);
        assert_eq!(meta.outputs, vec![NodeId(0)]);
    }

    #[test]
    fn self_feeding_guard_is_a_cycle() {
        let decls = vec![
            ("x".into(), NodeDesc::Input { dim: 1 }),
            (
                "m".into(),
                NodeDesc::Mux {
                    x: "x".into(),
                    y: "x".into(),
                    z: "m".into(),
                },
            ),
        ];
        assert!(matches!(build(&decls, "m"), Err(NetworkError::Cycle(_))));
    }

    #[test]
    fn longer_cycle_detected() {
        let decls = vec![
            ("x".into(), NodeDesc::Input { dim: 1 }),
            ("a".into(), desc_affine(&[&[1]], &[0], &["b"])),
            ("b".into(), desc_affine(&[&[1]], &[0], &["a"])),
            (
                "m".into(),
                NodeDesc::Mux {
                    x: "x".into(),
                    y: "a".into(),
                    z: "x".into(),
                },
            ),
        ];
        assert!(matches!(build(&decls, "m"), Err(NetworkError::Cycle(_))));
    }

    #[test]
    fn dimension_and_reference_errors() {
        let mut decls = max_decls();
        decls[3] = ("a3".into(), desc_affine(&[&[-1, 1], &[0, 1]], &[0, 0], &["x"]));
        assert!(matches!(build(&decls, "m"), Err(NetworkError::Dim(_))));

        let mut decls = max_decls();
        decls[1] = ("a1".into(), desc_affine(&[&[1, 0, 0]], &[0], &["x"]));
        assert!(matches!(build(&decls, "m"), Err(NetworkError::Dim(_))));

        let mut decls = max_decls();
        decls[1] = ("a1".into(), desc_affine(&[&[1, 0]], &[0], &["nope"]));
        assert!(matches!(build(&decls, "m"), Err(NetworkError::DanglingRef(_))));

        let mut decls = max_decls();
        decls.push(("a1".into(), NodeDesc::Constant { value: vec![int(1)] }));
        assert!(matches!(build(&decls, "m"), Err(NetworkError::DuplicateName(_))));

        let mut decls = max_decls();
        decls.push(("y".into(), NodeDesc::Input { dim: 1 }));
        assert!(matches!(build(&decls, "m"), Err(NetworkError::Input(_))));
    }

    #[test]
    fn out_of_order_declarations_are_sorted() {
        let mut decls = max_decls();
        decls.reverse();
        let net = build(&decls, "m").unwrap();
        assert!(net.graph_meta().is_valid_topological_order());
        assert_eq!(net.evaluate(&[int(-1), int(-2)]).unwrap(), vec![int(-1)]);
    }

    #[test]
    fn wrong_input_length() {
        let net = build(&max_decls(), "m").unwrap();
        assert!(matches!(net.evaluate(&[int(1)]), Err(NetworkError::Dim(_))));
    }

    #[test]
    fn builder_prunes_unused_nodes() {
        let mut b = NetworkBuilder::new(1);
        let x = b.input();
        let _dead = b.scale_shift(x, int(3), int(1)).unwrap();
        let live = b.scale_shift(x, int(2), int(0)).unwrap();
        let net = b.finish(live).unwrap();
        assert_eq!(net.len(), 2);
        assert_eq!(net.evaluate(&[int(4)]).unwrap(), vec![int(8)]);
    }

    #[test]
    fn bind_params_roundtrip_and_layout_errors() {
        let net = build(&max_decls(), "m").unwrap();
        let p = net.parameters();
        assert_eq!(p.len(), 9);
        assert_eq!(net.bind_params(&p).unwrap(), net);
        let short = p.with_theta(p.theta[..5].to_vec());
        assert!(matches!(net.bind_params(&short), Err(NetworkError::Layout(_))));
        let mut other = p.clone();
        other.layout.slots.pop();
        assert!(matches!(net.bind_params(&other), Err(NetworkError::Layout(_))));
    }

    #[test]
    fn enable_mask_marks_guard_only_parameters() {
        let net = build(&max_decls(), "m").unwrap();
        let mask = net.enable_parameter_mask();
        // a1 (3 params), a2 (3 params) are signals; a3 feeds the guard only
        assert_eq!(mask, vec![false, false, false, false, false, false, true, true, true]);
    }
}
