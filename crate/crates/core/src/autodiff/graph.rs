//! A small tape for reverse-mode differentiation over dense `f64` matrices.
//!
//! Every value is a 2D array; scalars are `1×1`. Nodes are appended in
//! evaluation order, so a reverse sweep over the tape visits each node after
//! all of its consumers.

use std::ops::Range;
use std::sync::Arc;

use ndarray::{s, Array1, Array2, Axis, Zip};

use crate::metrics::{nearest_neighbors, transport_plan, EmdSolver};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// `aᵀ·b`
    MatMulTn(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    MaxPoolRows { x: Var, argmax: Vec<usize> },
    BroadcastRows(Var),
    ConcatCols(Var, Var),
    SliceCols { x: Var, start: usize },
    Reshape(Var),
    RepeatRows { x: Var, times: usize },
    ColSoftmax { x: Var, tau: f64 },
    NormalizeRows { x: Var, norms: Vec<f64> },
    SumSquares(Var),
    Sum(Var),
    CrossEntropy { logits: Var, label: usize, probs: Vec<f64> },
    NearestSq { from: Var, to: Var, nearest: Vec<usize> },
    Transport { a: Var, b: Var, plan: Vec<(usize, usize, f64)> },
}

#[derive(Debug)]
struct Node {
    value: Arc<Array2<f64>>,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of one scalar with respect to every node that required them.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// The gradient, or zeros of the given shape if nothing flowed into `v`.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Array2<f64> {
        self.get(v).cloned().unwrap_or_else(|| Array2::zeros(shape))
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op, needs_grad: bool) -> Var {
        self.push_shared(Arc::new(value), op, needs_grad)
    }

    fn push_shared(&mut self, value: Arc<Array2<f64>>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn variable(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that shares storage with the caller, e.g. a model parameter.
    pub fn shared_leaf(&mut self, value: Arc<Array2<f64>>, needs_grad: bool) -> Var {
        self.push_shared(value, Op::Leaf, needs_grad)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let value = self.value(v);
        assert_eq!(value.dim(), (1, 1), "not a scalar");
        value[[0, 0]]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).dim()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).dot(self.value(b));
        let needs = self.needs(a) || self.needs(b);
        self.push(out, Op::MatMul(a, b), needs)
    }

    /// `aᵀ·b` without materializing the transpose.
    pub fn matmul_tn(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).t().dot(self.value(b));
        let needs = self.needs(a) || self.needs(b);
        self.push(out, Op::MatMulTn(a, b), needs)
    }

    /// Adds the `1×k` row `row` to every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Var {
        assert_eq!(self.shape(row).0, 1);
        let out = self.value(x) + self.value(row);
        let needs = self.needs(x) || self.needs(row);
        self.push(out, Op::AddRow(x, row), needs)
    }

    /// Multiplies every row of `x` elementwise by the `1×k` row `row`.
    pub fn mul_row(&mut self, x: Var, row: Var) -> Var {
        assert_eq!(self.shape(row).0, 1);
        let out = self.value(x) * self.value(row);
        let needs = self.needs(x) || self.needs(row);
        self.push(out, Op::MulRow(x, row), needs)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b));
        let out = self.value(a) + self.value(b);
        let needs = self.needs(a) || self.needs(b);
        self.push(out, Op::Add(a, b), needs)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b));
        let out = self.value(a) - self.value(b);
        let needs = self.needs(a) || self.needs(b);
        self.push(out, Op::Sub(a, b), needs)
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let out = self.value(x) * factor;
        let needs = self.needs(x);
        self.push(out, Op::Scale(x, factor), needs)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).mapv(|v| v.max(0.0));
        let needs = self.needs(x);
        self.push(out, Op::Relu(x), needs)
    }

    /// Column-wise maximum over rows, `n×k → 1×k`. Ties go to the first row.
    pub fn max_pool_rows(&mut self, x: Var) -> Var {
        let value = self.value(x);
        let (n, k) = value.dim();
        assert!(n > 0, "max-pool over zero rows");
        let mut out = Array2::from_elem((1, k), f64::NEG_INFINITY);
        let mut argmax = vec![0; k];
        for i in 0..n {
            for j in 0..k {
                let v = value[[i, j]];
                if v > out[[0, j]] {
                    out[[0, j]] = v;
                    argmax[j] = i;
                }
            }
        }
        let needs = self.needs(x);
        self.push(out, Op::MaxPoolRows { x, argmax }, needs)
    }

    /// Repeats a `1×k` row `n` times.
    pub fn broadcast_rows(&mut self, x: Var, n: usize) -> Var {
        assert_eq!(self.shape(x).0, 1);
        let out = self.value(x).broadcast((n, self.shape(x).1)).unwrap().to_owned();
        let needs = self.needs(x);
        self.push(out, Op::BroadcastRows(x), needs)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a).0, self.shape(b).0);
        let out = ndarray::concatenate(Axis(1), &[self.value(a).view(), self.value(b).view()]).unwrap();
        let needs = self.needs(a) || self.needs(b);
        self.push(out, Op::ConcatCols(a, b), needs)
    }

    pub fn slice_cols(&mut self, x: Var, cols: Range<usize>) -> Var {
        let out = self.value(x).slice(s![.., cols.clone()]).to_owned();
        let needs = self.needs(x);
        self.push(out, Op::SliceCols { x, start: cols.start }, needs)
    }

    /// Row-major reshape.
    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Var {
        let flat: Vec<f64> = self.value(x).iter().copied().collect();
        let out = Array2::from_shape_vec((rows, cols), flat).expect("reshape preserves size");
        let needs = self.needs(x);
        self.push(out, Op::Reshape(x), needs)
    }

    /// Each row repeated `times` times consecutively.
    pub fn repeat_rows(&mut self, x: Var, times: usize) -> Var {
        let value = self.value(x);
        let (n, k) = value.dim();
        let mut out = Array2::zeros((n * times, k));
        for i in 0..n {
            for t in 0..times {
                out.row_mut(i * times + t).assign(&value.row(i));
            }
        }
        let needs = self.needs(x);
        self.push(out, Op::RepeatRows { x, times }, needs)
    }

    /// Softmax over the rows of each column at temperature `tau`.
    pub fn col_softmax(&mut self, x: Var, tau: f64) -> Var {
        assert!(tau > 0.0);
        let out = column_softmax(self.value(x), tau);
        let needs = self.needs(x);
        self.push(out, Op::ColSoftmax { x, tau }, needs)
    }

    /// Each row divided by its Euclidean norm.
    pub fn normalize_rows(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        let mut norms = Vec::with_capacity(out.nrows());
        for mut row in out.rows_mut() {
            let norm = row.dot(&row).sqrt().max(1e-12);
            row.mapv_inplace(|v| v / norm);
            norms.push(norm);
        }
        let needs = self.needs(x);
        self.push(out, Op::NormalizeRows { x, norms }, needs)
    }

    pub fn sum_squares(&mut self, x: Var) -> Var {
        let v: f64 = self.value(x).iter().map(|v| v * v).sum();
        let needs = self.needs(x);
        self.push(Array2::from_elem((1, 1), v), Op::SumSquares(x), needs)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let v = self.value(x).sum();
        let needs = self.needs(x);
        self.push(Array2::from_elem((1, 1), v), Op::Sum(x), needs)
    }

    /// Negative log-softmax probability of `label` for `1×C` logits.
    pub fn cross_entropy(&mut self, logits: Var, label: usize) -> Var {
        let value = self.value(logits);
        assert_eq!(value.nrows(), 1);
        assert!(label < value.ncols(), "label out of range");
        let max = value.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = value.iter().map(|v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        let probs: Vec<f64> = exps.iter().map(|e| e / total).collect();
        let loss = -(value[[0, label]] - max - total.ln());
        let needs = self.needs(logits);
        self.push(
            Array2::from_elem((1, 1), loss),
            Op::CrossEntropy { logits, label, probs },
            needs,
        )
    }

    /// Mean over rows of `from` of the squared distance to the nearest row of `to`.
    pub fn nearest_sq(&mut self, from: Var, to: Var) -> Var {
        let nn = nearest_neighbors(self.value(from).view(), self.value(to).view());
        let loss = nn.iter().map(|&(_, d)| d).sum::<f64>() / nn.len() as f64;
        let nearest = nn.into_iter().map(|(j, _)| j).collect();
        let needs = self.needs(from) || self.needs(to);
        self.push(Array2::from_elem((1, 1), loss), Op::NearestSq { from, to, nearest }, needs)
    }

    /// Chamfer distance: `nearest_sq(a, b) + nearest_sq(b, a)`.
    pub fn chamfer(&mut self, a: Var, b: Var) -> Var {
        let ab = self.nearest_sq(a, b);
        let ba = self.nearest_sq(b, a);
        self.add(ab, ba)
    }

    /// Mean Euclidean transport cost between equal-size point sets. The
    /// gradient treats the optimal coupling as fixed.
    pub fn earth_mover(&mut self, a: Var, b: Var) -> Var {
        let plan = transport_plan(self.value(a).view(), self.value(b).view(), EmdSolver::Auto)
            .expect("earth mover's distance needs equal, nonempty sets");
        let needs = self.needs(a) || self.needs(b);
        self.push(
            Array2::from_elem((1, 1), plan.cost),
            Op::Transport { a, b, plan: plan.entries },
            needs,
        )
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(self.shape(loss), (1, 1), "backward needs a scalar");
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Array2::ones((1, 1)));
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad {
                grads[idx] = None;
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    fn accumulate(&self, grads: &mut [Option<Array2<f64>>], v: Var, contribution: Array2<f64>) {
        if !self.needs(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => *existing += &contribution,
            slot @ None => *slot = Some(contribution),
        }
    }

    fn propagate(&self, node: &Node, g: &Array2<f64>, grads: &mut [Option<Array2<f64>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.needs(*a) {
                    self.accumulate(grads, *a, g.dot(&self.value(*b).t()));
                }
                if self.needs(*b) {
                    self.accumulate(grads, *b, self.value(*a).t().dot(g));
                }
            }
            Op::MatMulTn(a, b) => {
                if self.needs(*a) {
                    self.accumulate(grads, *a, self.value(*b).dot(&g.t()));
                }
                if self.needs(*b) {
                    self.accumulate(grads, *b, self.value(*a).dot(g));
                }
            }
            Op::AddRow(x, row) => {
                self.accumulate(grads, *x, g.clone());
                if self.needs(*row) {
                    self.accumulate(grads, *row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
            }
            Op::MulRow(x, row) => {
                if self.needs(*x) {
                    self.accumulate(grads, *x, g * self.value(*row));
                }
                if self.needs(*row) {
                    let prod = g * self.value(*x);
                    self.accumulate(grads, *row, prod.sum_axis(Axis(0)).insert_axis(Axis(0)));
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                if self.needs(*b) {
                    self.accumulate(grads, *b, -g);
                }
            }
            Op::Scale(x, factor) => self.accumulate(grads, *x, g * *factor),
            Op::Relu(x) => {
                let mut d = g.clone();
                Zip::from(&mut d)
                    .and(node.value.as_ref())
                    .for_each(|d, &y| {
                        if y <= 0.0 {
                            *d = 0.0;
                        }
                    });
                self.accumulate(grads, *x, d);
            }
            Op::MaxPoolRows { x, argmax } => {
                let mut d = Array2::zeros(self.shape(*x));
                for (j, &i) in argmax.iter().enumerate() {
                    d[[i, j]] += g[[0, j]];
                }
                self.accumulate(grads, *x, d);
            }
            Op::BroadcastRows(x) => {
                self.accumulate(grads, *x, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
            Op::ConcatCols(a, b) => {
                let split = self.shape(*a).1;
                if self.needs(*a) {
                    self.accumulate(grads, *a, g.slice(s![.., ..split]).to_owned());
                }
                if self.needs(*b) {
                    self.accumulate(grads, *b, g.slice(s![.., split..]).to_owned());
                }
            }
            Op::SliceCols { x, start } => {
                let mut d = Array2::zeros(self.shape(*x));
                d.slice_mut(s![.., *start..*start + g.ncols()]).assign(g);
                self.accumulate(grads, *x, d);
            }
            Op::Reshape(x) => {
                let shape = self.shape(*x);
                let flat: Vec<f64> = g.iter().copied().collect();
                self.accumulate(grads, *x, Array2::from_shape_vec(shape, flat).unwrap());
            }
            Op::RepeatRows { x, times } => {
                let (n, k) = self.shape(*x);
                let mut d = Array2::zeros((n, k));
                for i in 0..n {
                    for t in 0..*times {
                        let mut row = d.row_mut(i);
                        row += &g.row(i * times + t);
                    }
                }
                self.accumulate(grads, *x, d);
            }
            Op::ColSoftmax { x, tau } => {
                let out = node.value.as_ref();
                // dX = S ⊙ (G − 1·colsum(G ⊙ S)) / τ
                let weighted = (g * out).sum_axis(Axis(0));
                let mut d = g - &weighted.insert_axis(Axis(0));
                d *= out;
                d /= *tau;
                self.accumulate(grads, *x, d);
            }
            Op::NormalizeRows { x, norms } => {
                let out = node.value.as_ref();
                let mut d = g.clone();
                for (i, mut row) in d.rows_mut().into_iter().enumerate() {
                    let y = out.row(i);
                    let proj = y.dot(&g.row(i));
                    row.zip_mut_with(&y, |gv, &yv| *gv = (*gv - yv * proj) / norms[i]);
                }
                self.accumulate(grads, *x, d);
            }
            Op::SumSquares(x) => {
                let scale = 2.0 * g[[0, 0]];
                self.accumulate(grads, *x, self.value(*x) * scale);
            }
            Op::Sum(x) => {
                self.accumulate(grads, *x, Array2::from_elem(self.shape(*x), g[[0, 0]]));
            }
            Op::CrossEntropy { logits, label, probs } => {
                let mut d = Array2::from_shape_vec((1, probs.len()), probs.clone()).unwrap();
                d[[0, *label]] -= 1.0;
                d *= g[[0, 0]];
                self.accumulate(grads, *logits, d);
            }
            Op::NearestSq { from, to, nearest } => {
                let f = self.value(*from);
                let t = self.value(*to);
                let scale = 2.0 * g[[0, 0]] / nearest.len() as f64;
                let mut df = Array2::zeros(f.dim());
                let mut dt = Array2::zeros(t.dim());
                for (i, &j) in nearest.iter().enumerate() {
                    for k in 0..3 {
                        let diff = scale * (f[[i, k]] - t[[j, k]]);
                        df[[i, k]] += diff;
                        dt[[j, k]] -= diff;
                    }
                }
                self.accumulate(grads, *from, df);
                self.accumulate(grads, *to, dt);
            }
            Op::Transport { a, b, plan } => {
                let av = self.value(*a);
                let bv = self.value(*b);
                let mut da = Array2::zeros(av.dim());
                let mut db = Array2::zeros(bv.dim());
                for &(i, j, mass) in plan {
                    let diff = [av[[i, 0]] - bv[[j, 0]], av[[i, 1]] - bv[[j, 1]], av[[i, 2]] - bv[[j, 2]]];
                    let dist = (diff[0] * diff[0] + diff[1] * diff[1] + diff[2] * diff[2]).sqrt();
                    if dist == 0.0 {
                        continue;
                    }
                    let w = g[[0, 0]] * mass / dist;
                    for k in 0..3 {
                        da[[i, k]] += w * diff[k];
                        db[[j, k]] -= w * diff[k];
                    }
                }
                self.accumulate(grads, *a, da);
                self.accumulate(grads, *b, db);
            }
        }
    }
}

/// Numerically stabilized column softmax at temperature `tau`.
pub fn column_softmax(x: &Array2<f64>, tau: f64) -> Array2<f64> {
    let mut max = Array1::from_elem(x.ncols(), f64::NEG_INFINITY);
    for row in x.rows() {
        max.zip_mut_with(&row, |m, &v| *m = m.max(v));
    }
    let mut out = x.clone();
    let mut total = Array1::<f64>::zeros(x.ncols());
    for mut row in out.rows_mut() {
        row.zip_mut_with(&max, |v, &m| *v = ((*v - m) / tau).exp());
        total += &row;
    }
    for mut row in out.rows_mut() {
        row /= &total;
    }
    out
}
