use std::fmt;

use super::matrix::{gemm, Matrix};
use super::params::ParamStore;
use super::DiffError;

/// Primitive operations that can be recorded on a [`Graph`].
///
/// Elementwise binary primitives broadcast along any axis of extent 1, so a
/// 1x1 node combines with any matrix and a 1xN row combines with a BxN batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Primitive {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Tanh,
    Relu,
    /// `max(x, 0)`; same semantics as [`Primitive::Relu`], kept as its own tag.
    Max0,
    Exp,
    Log,
    Square,
    MatMul,
    /// Sum of all entries, producing a 1x1 node.
    Sum,
    /// Hard clamp to `[lo, hi]`; gradient passes only inside the interval.
    Clamp { lo: f64, hi: f64 },
    /// Multiplication by a fixed real.
    Scale(f64),
}

impl Primitive {
    fn arity(self) -> usize {
        match self {
            Primitive::Add | Primitive::Sub | Primitive::Mul | Primitive::Div | Primitive::MatMul => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Primitive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Parameter { store: u64, offset: usize },
    Prim(Primitive),
    ConcatCols,
    SelectCols(Vec<usize>),
}

#[derive(Debug)]
struct Node {
    op: Op,
    parents: Vec<usize>,
    value: Matrix,
    needs_grad: bool,
}

/// Handle to a node of a [`Graph`]. Only meaningful for the graph that made it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Value(usize);

impl Value {
    pub fn id(self) -> usize {
        self.0
    }
}

/// Eagerly evaluated reverse-mode tape.
///
/// Nodes are appended in creation order, so every parent precedes its child
/// and the tape is acyclic by construction. A graph is meant to live for one
/// batch: build the loss, call [`Graph::backward`], drop it.
///
/// The convenience methods (`add`, `matmul`, ...) panic on shape errors, which
/// are programming mistakes; [`Graph::apply`] is the fallible entry point.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn broadcast(a: (usize, usize), b: (usize, usize)) -> Option<(usize, usize)> {
    let dim = |x: usize, y: usize| {
        if x == y {
            Some(x)
        } else if x == 1 {
            Some(y)
        } else if y == 1 {
            Some(x)
        } else {
            None
        }
    };
    Some((dim(a.0, b.0)?, dim(a.1, b.1)?))
}

/// Index into an operand of shape `shape` for output position `(r, c)` under broadcasting.
#[inline]
fn bidx(shape: (usize, usize), r: usize, c: usize) -> usize {
    let rr = if shape.0 == 1 { 0 } else { r };
    let cc = if shape.1 == 1 { 0 } else { c };
    rr * shape.1 + cc
}

fn binary_map(a: &Matrix, b: &Matrix, out: (usize, usize), f: impl Fn(f64, f64) -> f64) -> Matrix {
    if a.shape() == b.shape() {
        let data = a.as_slice().iter().zip(b.as_slice()).map(|(&x, &y)| f(x, y)).collect();
        return Matrix::from_vec(out.0, out.1, data);
    }
    let mut data = Vec::with_capacity(out.0 * out.1);
    let (sa, sb) = (a.shape(), b.shape());
    for r in 0..out.0 {
        for c in 0..out.1 {
            data.push(f(a.as_slice()[bidx(sa, r, c)], b.as_slice()[bidx(sb, r, c)]));
        }
    }
    Matrix::from_vec(out.0, out.1, data)
}

impl Graph {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, parents: Vec<usize>, value: Matrix, needs_grad: bool) -> Value {
        self.nodes.push(Node { op, parents, value, needs_grad });
        Value(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, m: Matrix) -> Value {
        self.push(Op::Constant, Vec::new(), m, false)
    }

    pub fn scalar(&mut self, x: f64) -> Value {
        self.constant(Matrix::scalar(x))
    }

    /// Leaf reading a `rows x cols` block of `store` starting at `offset`.
    ///
    /// The block must lie inside a single segment. Whether the leaf will
    /// receive gradient is decided from the segment's frozen flag now.
    pub fn param(&mut self, store: &ParamStore, offset: usize, rows: usize, cols: usize) -> Value {
        let len = rows * cols;
        let seg = store.segment_of(offset).expect("parameter offset outside store");
        assert!(
            offset + len <= store.segment(seg).range.end,
            "parameter block crosses a segment boundary"
        );
        let value = Matrix::from_vec(rows, cols, store.values()[offset..offset + len].to_vec());
        let needs_grad = !store.segment(seg).frozen;
        self.push(Op::Parameter { store: store.id(), offset }, Vec::new(), value, needs_grad)
    }

    pub fn param_scalar(&mut self, store: &ParamStore, index: usize) -> Value {
        self.param(store, index, 1, 1)
    }

    pub fn data(&self, v: Value) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Data of a 1x1 node.
    pub fn scalar_value(&self, v: Value) -> f64 {
        let m = self.data(v);
        assert_eq!(m.shape(), (1, 1), "scalar_value on non-scalar node");
        m.as_slice()[0]
    }

    pub fn parents(&self, v: Value) -> &[usize] {
        &self.nodes[v.0].parents
    }

    /// Records `op` applied to `inputs`.
    pub fn apply(&mut self, op: Primitive, inputs: &[Value]) -> Result<Value, DiffError> {
        if inputs.len() != op.arity() {
            return Err(DiffError::Arity { op, expected: op.arity(), got: inputs.len() });
        }
        for v in inputs {
            if v.0 >= self.nodes.len() {
                return Err(DiffError::ForeignValue(v.0));
            }
        }
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        let parents: Vec<usize> = inputs.iter().map(|v| v.0).collect();
        let value = {
            let a = &self.nodes[inputs[0].0].value;
            match op {
                Primitive::Add | Primitive::Sub | Primitive::Mul | Primitive::Div => {
                    let b = &self.nodes[inputs[1].0].value;
                    let out = broadcast(a.shape(), b.shape()).ok_or(DiffError::Shape {
                        op,
                        left: a.shape(),
                        right: b.shape(),
                    })?;
                    match op {
                        Primitive::Add => binary_map(a, b, out, |x, y| x + y),
                        Primitive::Sub => binary_map(a, b, out, |x, y| x - y),
                        Primitive::Mul => binary_map(a, b, out, |x, y| x * y),
                        _ => {
                            if b.as_slice().iter().any(|&y| y == 0.0) {
                                return Err(DiffError::DivisionByZero { node: self.nodes.len() });
                            }
                            binary_map(a, b, out, |x, y| x / y)
                        }
                    }
                }
                Primitive::MatMul => {
                    let b = &self.nodes[inputs[1].0].value;
                    if a.cols() != b.rows() {
                        return Err(DiffError::Shape { op, left: a.shape(), right: b.shape() });
                    }
                    a.matmul(b)
                }
                Primitive::Neg => a.map(|x| -x),
                Primitive::Tanh => a.map(f64::tanh),
                Primitive::Relu | Primitive::Max0 => a.map(|x| if x > 0.0 { x } else { 0.0 }),
                Primitive::Exp => a.map(f64::exp),
                Primitive::Log => a.map(f64::ln),
                Primitive::Square => a.map(|x| x * x),
                Primitive::Sum => Matrix::scalar(a.as_slice().iter().sum()),
                Primitive::Clamp { lo, hi } => a.map(|x| x.clamp(lo, hi)),
                Primitive::Scale(c) => a.map(|x| c * x),
            }
        };
        Ok(self.push(Op::Prim(op), parents, value, needs_grad))
    }

    fn must(&mut self, op: Primitive, inputs: &[Value]) -> Value {
        self.apply(op, inputs).unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn add(&mut self, a: Value, b: Value) -> Value {
        self.must(Primitive::Add, &[a, b])
    }
    pub fn sub(&mut self, a: Value, b: Value) -> Value {
        self.must(Primitive::Sub, &[a, b])
    }
    pub fn mul(&mut self, a: Value, b: Value) -> Value {
        self.must(Primitive::Mul, &[a, b])
    }
    pub fn div(&mut self, a: Value, b: Value) -> Result<Value, DiffError> {
        self.apply(Primitive::Div, &[a, b])
    }
    pub fn neg(&mut self, a: Value) -> Value {
        self.must(Primitive::Neg, &[a])
    }
    pub fn tanh(&mut self, a: Value) -> Value {
        self.must(Primitive::Tanh, &[a])
    }
    pub fn relu(&mut self, a: Value) -> Value {
        self.must(Primitive::Relu, &[a])
    }
    pub fn max0(&mut self, a: Value) -> Value {
        self.must(Primitive::Max0, &[a])
    }
    pub fn exp(&mut self, a: Value) -> Value {
        self.must(Primitive::Exp, &[a])
    }
    pub fn log(&mut self, a: Value) -> Value {
        self.must(Primitive::Log, &[a])
    }
    pub fn square(&mut self, a: Value) -> Value {
        self.must(Primitive::Square, &[a])
    }
    pub fn matmul(&mut self, a: Value, b: Value) -> Value {
        self.must(Primitive::MatMul, &[a, b])
    }
    pub fn sum(&mut self, a: Value) -> Value {
        self.must(Primitive::Sum, &[a])
    }
    pub fn clamp(&mut self, a: Value, lo: f64, hi: f64) -> Value {
        self.must(Primitive::Clamp { lo, hi }, &[a])
    }
    pub fn scale(&mut self, a: Value, c: f64) -> Value {
        self.must(Primitive::Scale(c), &[a])
    }

    /// Mean of all entries.
    pub fn mean(&mut self, a: Value) -> Value {
        let n = self.data(a).len();
        let s = self.sum(a);
        self.scale(s, 1.0 / n as f64)
    }

    /// Horizontal concatenation of nodes with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Value]) -> Value {
        assert!(!parts.is_empty(), "concat_cols of nothing");
        let rows = self.data(parts[0]).rows();
        let cols: usize = parts.iter().map(|p| self.data(*p).cols()).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut c0 = 0;
        for p in parts {
            let m = self.data(*p);
            assert_eq!(m.rows(), rows, "concat_cols row mismatch");
            for r in 0..rows {
                for c in 0..m.cols() {
                    out.set(r, c0 + c, m.get(r, c));
                }
            }
            c0 += m.cols();
        }
        let needs_grad = parts.iter().any(|p| self.nodes[p.0].needs_grad);
        self.push(Op::ConcatCols, parts.iter().map(|p| p.0).collect(), out, needs_grad)
    }

    /// Picks columns of `a` in the given order.
    pub fn select_cols(&mut self, a: Value, cols: &[usize]) -> Value {
        let m = self.data(a);
        let mut out = Matrix::zeros(m.rows(), cols.len());
        for r in 0..m.rows() {
            for (j, &c) in cols.iter().enumerate() {
                out.set(r, j, m.get(r, c));
            }
        }
        let needs_grad = self.nodes[a.0].needs_grad;
        self.push(Op::SelectCols(cols.to_vec()), vec![a.0], out, needs_grad)
    }

    /// Gradient of the scalar `root` with respect to every value of `params`.
    ///
    /// Leaves read from other stores are treated as constants. Segments that
    /// are frozen receive exactly zero. Adjoints are accumulated in reverse
    /// creation order, so repeated calls are bit-identical.
    pub fn backward(&self, root: Value, params: &ParamStore) -> Result<Vec<f64>, DiffError> {
        let rootv = &self.nodes[root.0].value;
        if rootv.shape() != (1, 1) {
            return Err(DiffError::NotScalar { shape: rootv.shape() });
        }
        if let Some(i) = self.nodes[..=root.0].iter().position(|n| n.value.as_slice().iter().any(|x| x.is_nan())) {
            return Err(DiffError::NaN { node: i });
        }
        let mut grad = vec![0.0; params.len()];
        let mut adj: Vec<Option<Matrix>> = vec![None; root.0 + 1];
        adj[root.0] = Some(Matrix::scalar(1.0));

        for i in (0..=root.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Constant => {}
                Op::Parameter { store, offset } => {
                    if *store == params.id() && !params.is_frozen_at(*offset) {
                        for (k, x) in g.as_slice().iter().enumerate() {
                            grad[offset + k] += x;
                        }
                    }
                }
                Op::ConcatCols => {
                    let mut c0 = 0;
                    for &p in &node.parents {
                        let pm = &self.nodes[p].value;
                        if self.nodes[p].needs_grad {
                            let mut part = Matrix::zeros(pm.rows(), pm.cols());
                            for r in 0..pm.rows() {
                                for c in 0..pm.cols() {
                                    part.set(r, c, g.get(r, c0 + c));
                                }
                            }
                            accumulate(&mut adj[p], part);
                        }
                        c0 += pm.cols();
                    }
                }
                Op::SelectCols(cols) => {
                    let p = node.parents[0];
                    let pm = &self.nodes[p].value;
                    let mut part = Matrix::zeros(pm.rows(), pm.cols());
                    for r in 0..pm.rows() {
                        for (j, &c) in cols.iter().enumerate() {
                            let v = part.get(r, c) + g.get(r, j);
                            part.set(r, c, v);
                        }
                    }
                    accumulate(&mut adj[p], part);
                }
                Op::Prim(prim) => self.backprop_prim(*prim, node, &g, &mut adj),
            }
        }
        Ok(grad)
    }

    fn backprop_prim(&self, prim: Primitive, node: &Node, g: &Matrix, adj: &mut [Option<Matrix>]) {
        let pa = node.parents[0];
        let a = &self.nodes[pa].value;
        let a_needs = self.nodes[pa].needs_grad;
        let y = &node.value;
        let unary = |f: &dyn Fn(usize) -> f64| -> Matrix {
            Matrix::from_vec(a.rows(), a.cols(), (0..a.len()).map(f).collect())
        };
        match prim {
            Primitive::Add | Primitive::Sub | Primitive::Mul | Primitive::Div => {
                let pb = node.parents[1];
                let b = &self.nodes[pb].value;
                let b_needs = self.nodes[pb].needs_grad;
                let (sa, sb) = (a.shape(), b.shape());
                let (av, bv, gv) = (a.as_slice(), b.as_slice(), g.as_slice());
                let mut ga = a_needs.then(|| Matrix::zeros(sa.0, sa.1));
                let mut gb = b_needs.then(|| Matrix::zeros(sb.0, sb.1));
                let (rows, cols) = g.shape();
                for r in 0..rows {
                    for c in 0..cols {
                        let gi = gv[r * cols + c];
                        let ia = bidx(sa, r, c);
                        let ib = bidx(sb, r, c);
                        let (da, db) = match prim {
                            Primitive::Add => (gi, gi),
                            Primitive::Sub => (gi, -gi),
                            Primitive::Mul => (gi * bv[ib], gi * av[ia]),
                            _ => (gi / bv[ib], -gi * av[ia] / (bv[ib] * bv[ib])),
                        };
                        if let Some(m) = ga.as_mut() {
                            m.as_mut_slice()[ia] += da;
                        }
                        if let Some(m) = gb.as_mut() {
                            m.as_mut_slice()[ib] += db;
                        }
                    }
                }
                if let Some(m) = ga {
                    accumulate(&mut adj[pa], m);
                }
                if let Some(m) = gb {
                    accumulate(&mut adj[pb], m);
                }
            }
            Primitive::MatMul => {
                let pb = node.parents[1];
                let b = &self.nodes[pb].value;
                if a_needs {
                    let mut ga = Matrix::zeros(a.rows(), a.cols());
                    gemm(false, g, true, b, &mut ga);
                    accumulate(&mut adj[pa], ga);
                }
                if self.nodes[pb].needs_grad {
                    let mut gb = Matrix::zeros(b.rows(), b.cols());
                    gemm(true, a, false, g, &mut gb);
                    accumulate(&mut adj[pb], gb);
                }
            }
            _ if !a_needs => {}
            Primitive::Neg => accumulate(&mut adj[pa], g.map(|x| -x)),
            Primitive::Tanh => {
                let (gv, yv) = (g.as_slice(), y.as_slice());
                accumulate(&mut adj[pa], unary(&|i| gv[i] * (1.0 - yv[i] * yv[i])));
            }
            Primitive::Relu | Primitive::Max0 => {
                let (gv, av) = (g.as_slice(), a.as_slice());
                accumulate(&mut adj[pa], unary(&|i| if av[i] > 0.0 { gv[i] } else { 0.0 }));
            }
            Primitive::Exp => {
                let (gv, yv) = (g.as_slice(), y.as_slice());
                accumulate(&mut adj[pa], unary(&|i| gv[i] * yv[i]));
            }
            Primitive::Log => {
                let (gv, av) = (g.as_slice(), a.as_slice());
                accumulate(&mut adj[pa], unary(&|i| gv[i] / av[i]));
            }
            Primitive::Square => {
                let (gv, av) = (g.as_slice(), a.as_slice());
                accumulate(&mut adj[pa], unary(&|i| 2.0 * av[i] * gv[i]));
            }
            Primitive::Sum => {
                let s = g.as_slice()[0];
                accumulate(&mut adj[pa], Matrix::from_vec(a.rows(), a.cols(), vec![s; a.len()]));
            }
            Primitive::Clamp { lo, hi } => {
                let (gv, av) = (g.as_slice(), a.as_slice());
                accumulate(&mut adj[pa], unary(&|i| if av[i] >= lo && av[i] <= hi { gv[i] } else { 0.0 }));
            }
            Primitive::Scale(c) => accumulate(&mut adj[pa], g.map(|x| c * x)),
        }
    }
}

fn accumulate(slot: &mut Option<Matrix>, delta: Matrix) {
    match slot {
        Some(m) => {
            for (x, d) in m.as_mut_slice().iter_mut().zip(delta.as_slice()) {
                *x += d;
            }
        }
        None => *slot = Some(delta),
    }
}
