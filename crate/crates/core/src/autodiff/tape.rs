use std::cell::{Cell, RefCell};
use std::collections::BTreeMap;
use std::rc::Rc;

use super::tensor::gemm;
use super::{ParamId, ParamStore, Tensor};
use crate::{Error, Result};

#[derive(Debug)]
enum Op {
    Leaf(Option<ParamId>),
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddRow(usize, usize),
    Scale(usize, f64),
    MulScalar(usize, usize),
    Tanh(usize),
    Square(usize),
    Sum(usize),
    Mean(usize),
    Dot(usize, usize),
    SoftmaxRows(usize),
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    GatherCols(usize, Rc<Vec<usize>>),
    GatherRows(usize, Rc<Vec<usize>>),
    ScatterAddRows(usize, Rc<Vec<usize>>),
    SegmentSoftmax(usize, Rc<Vec<usize>>, usize),
    BlockRowDot(usize, usize),
    ScaleBlocks(usize, usize),
    ScaleRowsConst(usize, Rc<Vec<f64>>),
    SliceCols(usize, usize),
    Reshape(usize),
}

impl Op {
    fn inputs(&self) -> Vec<usize> {
        use Op::*;
        match self {
            Leaf(_) => vec![],
            MatMul(a, b) | Add(a, b) | Sub(a, b) | Mul(a, b) | AddRow(a, b) | MulScalar(a, b)
            | Dot(a, b) | BlockRowDot(a, b) | ScaleBlocks(a, b) => vec![*a, *b],
            Scale(a, _) | Tanh(a) | Square(a) | Sum(a) | Mean(a) | SoftmaxRows(a) | SliceCols(a, _)
            | Reshape(a) => vec![*a],
            GatherCols(a, _) | GatherRows(a, _) | ScatterAddRows(a, _) | SegmentSoftmax(a, _, _)
            | ScaleRowsConst(a, _) => vec![*a],
            ConcatCols(v) | ConcatRows(v) => v.clone(),
        }
    }
}

struct Node {
    value: Rc<Tensor>,
    op: Op,
    /// Whether any differentiable leaf feeds this node.
    needs: bool,
}

/// Records a forward computation for one reverse pass.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
    done: Cell<bool>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let v = self.value();
        write!(f, "Var#{}({}x{})", self.id, v.rows(), v.cols())
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug, Default)]
pub struct Gradients {
    params: BTreeMap<ParamId, Tensor>,
    leaves: BTreeMap<usize, Tensor>,
}

impl Gradients {
    pub fn param(&self, id: ParamId) -> Option<&Tensor> {
        self.params.get(&id)
    }

    /// Gradient with respect to any leaf created on the tape.
    pub fn wrt(&self, v: Var<'_>) -> Option<&Tensor> {
        self.leaves.get(&v.id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.params.iter().map(|(k, v)| (*k, v))
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, &a.shape(), &b.shape()));
    }
    Ok(())
}

fn map(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::new(t.rows(), t.cols(), t.data().iter().map(|&x| f(x)).collect())
        .expect("same length")
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    Tensor::new(
        a.rows(),
        a.cols(),
        a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect(),
    )
    .expect("same length")
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    fn push(&self, value: Tensor, op: Op) -> Var<'_> {
        let needs = {
            let nodes = self.nodes.borrow();
            op.inputs().iter().any(|&i| nodes[i].needs)
        };
        self.push_node(value, op, needs)
    }

    fn push_node(&self, value: Tensor, op: Op, needs: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            op,
            needs,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn val(&self, id: usize) -> Rc<Tensor> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    /// A leaf that is differentiated but not tied to a parameter.
    pub fn leaf(&self, t: Tensor) -> Var<'_> {
        self.push_node(t, Op::Leaf(None), true)
    }

    /// A value that is never differentiated.
    pub fn constant(&self, t: Tensor) -> Var<'_> {
        self.push_node(t, Op::Leaf(None), false)
    }

    /// Binds a parameter. Frozen parameters become plain constants.
    pub fn param(&self, store: &ParamStore, id: ParamId) -> Var<'_> {
        let p = store.get(id);
        let tag = if p.trainable { Some(id) } else { None };
        self.push_node(p.value.clone(), Op::Leaf(tag), p.trainable)
    }

    /// Reverse pass from a `1 x 1` loss. A tape supports one pass.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        if self.done.replace(true) {
            return Err(Error::Tape("backward already ran on this tape".into()));
        }
        let nodes = self.nodes.borrow();
        let lv = &nodes[loss.id].value;
        if lv.len() != 1 {
            return Err(Error::Tape(format!(
                "loss must be scalar, got {}x{}",
                lv.rows(),
                lv.cols()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..=loss.id).map(|_| None).collect();
        grads[loss.id] = Some(Tensor::filled(lv.rows(), lv.cols(), 1.0));
        let mut out = Gradients::default();

        let needs: Vec<bool> = nodes[..=loss.id].iter().map(|n| n.needs).collect();
        let acc = |grads: &mut [Option<Tensor>], id: usize, t: Tensor| {
            if !needs[id] {
                return;
            }
            match &mut grads[id] {
                Some(g) => g.add_assign(&t),
                slot => *slot = Some(t),
            }
        };

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            let y = &node.value;
            let v = |i: usize| &nodes[i].value;
            match &node.op {
                Op::Leaf(p) => {
                    if let Some(p) = p {
                        match out.params.get_mut(p) {
                            Some(t) => t.add_assign(&g),
                            None => {
                                out.params.insert(*p, g.clone());
                            }
                        }
                    }
                    out.leaves.insert(id, g);
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (v(*a), v(*b));
                    if needs[*a] {
                        let mut da = vec![0.0; av.len()];
                        gemm(g.data(), g.rows(), g.cols(), false, bv.data(), bv.rows(), bv.cols(), true, 0.0, &mut da);
                        acc(&mut grads, *a, Tensor::new(av.rows(), av.cols(), da)?);
                    }
                    if needs[*b] {
                        let mut db = vec![0.0; bv.len()];
                        gemm(av.data(), av.rows(), av.cols(), true, g.data(), g.rows(), g.cols(), false, 0.0, &mut db);
                        acc(&mut grads, *b, Tensor::new(bv.rows(), bv.cols(), db)?);
                    }
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *a, g.clone());
                    acc(&mut grads, *b, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *b, map(&g, |x| -x));
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    acc(&mut grads, *a, zip(&g, v(*b), |x, y| x * y));
                    acc(&mut grads, *b, zip(&g, v(*a), |x, y| x * y));
                }
                Op::AddRow(a, b) => {
                    let mut db = vec![0.0; g.cols()];
                    for r in 0..g.rows() {
                        for (d, x) in db.iter_mut().zip(g.row(r)) {
                            *d += x;
                        }
                    }
                    acc(&mut grads, *b, Tensor::row_vector(db));
                    acc(&mut grads, *a, g);
                }
                Op::Scale(a, c) => acc(&mut grads, *a, map(&g, |x| x * c)),
                Op::MulScalar(a, s) => {
                    let sv = v(*s).item();
                    let ds: f64 = g.data().iter().zip(v(*a).data()).map(|(x, y)| x * y).sum();
                    acc(&mut grads, *s, Tensor::scalar(ds));
                    acc(&mut grads, *a, map(&g, |x| x * sv));
                }
                Op::Tanh(a) => acc(&mut grads, *a, zip(&g, y, |gx, t| gx * (1.0 - t * t))),
                Op::Square(a) => acc(&mut grads, *a, zip(&g, v(*a), |gx, x| 2.0 * gx * x)),
                Op::Sum(a) => {
                    let av = v(*a);
                    acc(&mut grads, *a, Tensor::filled(av.rows(), av.cols(), g.item()));
                }
                Op::Mean(a) => {
                    let av = v(*a);
                    let n = av.len().max(1) as f64;
                    acc(&mut grads, *a, Tensor::filled(av.rows(), av.cols(), g.item() / n));
                }
                Op::Dot(a, b) => {
                    let gs = g.item();
                    acc(&mut grads, *a, map(v(*b), |x| x * gs));
                    acc(&mut grads, *b, map(v(*a), |x| x * gs));
                }
                Op::SoftmaxRows(a) => {
                    let mut d = vec![0.0; y.len()];
                    for r in 0..y.rows() {
                        let (yr, gr) = (y.row(r), g.row(r));
                        let s: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                        for c in 0..y.cols() {
                            d[r * y.cols() + c] = yr[c] * (gr[c] - s);
                        }
                    }
                    acc(&mut grads, *a, Tensor::new(y.rows(), y.cols(), d)?);
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let w = v(p).cols();
                        let mut d = Vec::with_capacity(g.rows() * w);
                        for r in 0..g.rows() {
                            d.extend_from_slice(&g.row(r)[off..off + w]);
                        }
                        acc(&mut grads, p, Tensor::new(g.rows(), w, d)?);
                        off += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let h = v(p).rows();
                        let d = g.data()[off * g.cols()..(off + h) * g.cols()].to_vec();
                        acc(&mut grads, p, Tensor::new(h, g.cols(), d)?);
                        off += h;
                    }
                }
                Op::GatherCols(a, idx) => {
                    let av = v(*a);
                    let mut d = vec![0.0; av.len()];
                    for r in 0..g.rows() {
                        for (c, x) in g.row(r).iter().enumerate() {
                            d[r * av.cols() + idx[r * g.cols() + c]] += x;
                        }
                    }
                    acc(&mut grads, *a, Tensor::new(av.rows(), av.cols(), d)?);
                }
                Op::GatherRows(a, idx) => {
                    let av = v(*a);
                    let w = av.cols();
                    let mut d = vec![0.0; av.len()];
                    for (r, &src) in idx.iter().enumerate() {
                        for (x, y) in d[src * w..(src + 1) * w].iter_mut().zip(g.row(r)) {
                            *x += y;
                        }
                    }
                    acc(&mut grads, *a, Tensor::new(av.rows(), w, d)?);
                }
                Op::ScatterAddRows(a, idx) => {
                    let w = g.cols();
                    let mut d = Vec::with_capacity(idx.len() * w);
                    for &dst in idx.iter() {
                        d.extend_from_slice(g.row(dst));
                    }
                    acc(&mut grads, *a, Tensor::new(idx.len(), w, d)?);
                }
                Op::SegmentSoftmax(a, seg, nseg) => {
                    let w = y.cols();
                    let mut s = vec![0.0; nseg * w];
                    for (r, &k) in seg.iter().enumerate() {
                        for c in 0..w {
                            s[k * w + c] += y.get(r, c) * g.get(r, c);
                        }
                    }
                    let mut d = vec![0.0; y.len()];
                    for (r, &k) in seg.iter().enumerate() {
                        for c in 0..w {
                            d[r * w + c] = y.get(r, c) * (g.get(r, c) - s[k * w + c]);
                        }
                    }
                    acc(&mut grads, *a, Tensor::new(y.rows(), w, d)?);
                }
                Op::BlockRowDot(a, b) => {
                    let (av, bv) = (v(*a), v(*b));
                    let blocks = g.cols();
                    let w = av.cols() / blocks;
                    let mut da = vec![0.0; av.len()];
                    let mut db = vec![0.0; bv.len()];
                    for r in 0..av.rows() {
                        for k in 0..blocks {
                            let gk = g.get(r, k);
                            for c in k * w..(k + 1) * w {
                                let i = r * av.cols() + c;
                                da[i] = gk * bv.data()[i];
                                db[i] = gk * av.data()[i];
                            }
                        }
                    }
                    acc(&mut grads, *a, Tensor::new(av.rows(), av.cols(), da)?);
                    acc(&mut grads, *b, Tensor::new(bv.rows(), bv.cols(), db)?);
                }
                Op::ScaleBlocks(a, s) => {
                    let (av, sv) = (v(*a), v(*s));
                    let blocks = sv.cols();
                    let w = av.cols() / blocks;
                    let mut da = vec![0.0; av.len()];
                    let mut ds = vec![0.0; sv.len()];
                    let chunks = da.chunks_mut(w).zip(g.data().chunks(w)).zip(av.data().chunks(w));
                    for (((d, gb), ab), (&sk, t)) in chunks.zip(sv.data().iter().zip(ds.iter_mut())) {
                        let mut acc = 0.0;
                        for ((d, &gx), &ax) in d.iter_mut().zip(gb).zip(ab) {
                            *d = gx * sk;
                            acc += gx * ax;
                        }
                        *t = acc;
                    }
                    acc(&mut grads, *a, Tensor::new(av.rows(), av.cols(), da)?);
                    acc(&mut grads, *s, Tensor::new(sv.rows(), blocks, ds)?);
                }
                Op::ScaleRowsConst(a, s) => {
                    let mut d = g.clone();
                    let w = d.cols();
                    for (r, &f) in s.iter().enumerate() {
                        for x in &mut d.data_mut()[r * w..(r + 1) * w] {
                            *x *= f;
                        }
                    }
                    acc(&mut grads, *a, d);
                }
                Op::SliceCols(a, start) => {
                    let av = v(*a);
                    let mut d = vec![0.0; av.len()];
                    for r in 0..g.rows() {
                        let base = r * av.cols() + start;
                        d[base..base + g.cols()].copy_from_slice(g.row(r));
                    }
                    acc(&mut grads, *a, Tensor::new(av.rows(), av.cols(), d)?);
                }
                Op::Reshape(a) => {
                    let av = v(*a);
                    acc(&mut grads, *a, g.reshaped(av.rows(), av.cols())?);
                }
            }
        }
        Ok(out)
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> Rc<Tensor> {
        self.tape.val(self.id)
    }

    pub fn item(&self) -> f64 {
        self.value().item()
    }

    pub fn shape(&self) -> [usize; 2] {
        self.value().shape()
    }

    fn binary(self, other: Var<'t>, op: &'static str, f: impl Fn(f64, f64) -> f64, mk: fn(usize, usize) -> Op) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        same_shape(op, &a, &b)?;
        Ok(self.tape.push(zip(&a, &b, f), mk(self.id, other.id)))
    }

    /// Matrix product `self * other`.
    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        if a.cols() != b.rows() {
            return Err(Error::shape("matmul", &a.shape(), &b.shape()));
        }
        let mut out = vec![0.0; a.rows() * b.cols()];
        gemm(a.data(), a.rows(), a.cols(), false, b.data(), b.rows(), b.cols(), false, 0.0, &mut out);
        Ok(self.tape.push(Tensor::new(a.rows(), b.cols(), out)?, Op::MatMul(self.id, other.id)))
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "add", |x, y| x + y, Op::Add)
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "sub", |x, y| x - y, Op::Sub)
    }

    /// Elementwise product.
    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(other, "mul", |x, y| x * y, Op::Mul)
    }

    /// Adds the `1 x n` row `bias` to every row.
    pub fn add_row(self, bias: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), bias.value());
        if b.rows() != 1 || b.cols() != a.cols() {
            return Err(Error::shape("add_row", &a.shape(), &b.shape()));
        }
        let mut out = (*a).clone();
        let w = a.cols();
        for r in 0..a.rows() {
            for (x, y) in out.data_mut()[r * w..(r + 1) * w].iter_mut().zip(b.data()) {
                *x += y;
            }
        }
        Ok(self.tape.push(out, Op::AddRow(self.id, bias.id)))
    }

    /// Multiplies by a constant.
    pub fn scale(self, c: f64) -> Var<'t> {
        let out = map(&self.value(), |x| x * c);
        self.tape.push(out, Op::Scale(self.id, c))
    }

    /// Multiplies by a `1 x 1` variable.
    pub fn mul_scalar(self, s: Var<'t>) -> Result<Var<'t>> {
        let sv = s.value();
        if sv.len() != 1 {
            return Err(Error::shape("mul_scalar", &self.shape(), &sv.shape()));
        }
        let k = sv.item();
        let out = map(&self.value(), |x| x * k);
        Ok(self.tape.push(out, Op::MulScalar(self.id, s.id)))
    }

    pub fn tanh(self) -> Var<'t> {
        let out = map(&self.value(), f64::tanh);
        self.tape.push(out, Op::Tanh(self.id))
    }

    pub fn square(self) -> Var<'t> {
        let out = map(&self.value(), |x| x * x);
        self.tape.push(out, Op::Square(self.id))
    }

    pub fn sum(self) -> Var<'t> {
        let s = self.value().data().iter().sum();
        self.tape.push(Tensor::scalar(s), Op::Sum(self.id))
    }

    pub fn mean(self) -> Var<'t> {
        let v = self.value();
        let s = v.data().iter().sum::<f64>() / v.len().max(1) as f64;
        self.tape.push(Tensor::scalar(s), Op::Mean(self.id))
    }

    /// Inner product of two same-shape tensors.
    pub fn dot(self, other: Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        same_shape("dot", &a, &b)?;
        let s = a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum();
        Ok(self.tape.push(Tensor::scalar(s), Op::Dot(self.id, other.id)))
    }

    /// Softmax along each row.
    pub fn softmax_rows(self) -> Var<'t> {
        let a = self.value();
        let mut out = (*a).clone();
        let w = a.cols();
        for r in 0..a.rows() {
            let row = &mut out.data_mut()[r * w..(r + 1) * w];
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for x in row.iter_mut() {
                *x = (*x - m).exp();
                z += *x;
            }
            for x in row.iter_mut() {
                *x /= z;
            }
        }
        self.tape.push(out, Op::SoftmaxRows(self.id))
    }

    /// Elements picked per row: `out[r][c] = self[r][idx[r * out_cols + c]]`.
    /// The index list is a constant of the forward pass.
    pub fn gather_cols(self, idx: Vec<usize>, out_cols: usize) -> Result<Var<'t>> {
        let a = self.value();
        if idx.len() != a.rows() * out_cols || idx.iter().any(|&i| i >= a.cols()) {
            return Err(Error::shape("gather_cols", &a.shape(), &[a.rows(), out_cols]));
        }
        let data = idx
            .iter()
            .enumerate()
            .map(|(k, &c)| a.get(k / out_cols.max(1), c))
            .collect();
        let out = Tensor::new(a.rows(), out_cols, data)?;
        Ok(self.tape.push(out, Op::GatherCols(self.id, Rc::new(idx))))
    }

    /// Row `r` of the output is row `idx[r]` of `self`.
    pub fn gather_rows(self, idx: Rc<Vec<usize>>) -> Result<Var<'t>> {
        let a = self.value();
        if let Some(&bad) = idx.iter().find(|&&i| i >= a.rows()) {
            return Err(Error::shape("gather_rows", &a.shape(), &[bad]));
        }
        let mut data = Vec::with_capacity(idx.len() * a.cols());
        for &i in idx.iter() {
            data.extend_from_slice(a.row(i));
        }
        let out = Tensor::new(idx.len(), a.cols(), data)?;
        Ok(self.tape.push(out, Op::GatherRows(self.id, idx)))
    }

    /// `out[idx[r]] += self[r]` into an `n x cols` zero matrix.
    pub fn scatter_add_rows(self, idx: Rc<Vec<usize>>, n: usize) -> Result<Var<'t>> {
        let a = self.value();
        if idx.len() != a.rows() || idx.iter().any(|&i| i >= n) {
            return Err(Error::shape("scatter_add_rows", &a.shape(), &[idx.len(), n]));
        }
        let w = a.cols();
        let mut out = Tensor::zeros(n, w);
        for (r, &dst) in idx.iter().enumerate() {
            for (x, y) in out.data_mut()[dst * w..(dst + 1) * w].iter_mut().zip(a.row(r)) {
                *x += y;
            }
        }
        Ok(self.tape.push(out, Op::ScatterAddRows(self.id, idx)))
    }

    /// Softmax over the rows sharing a segment id, independently per column.
    pub fn segment_softmax(self, seg: Rc<Vec<usize>>, nseg: usize) -> Result<Var<'t>> {
        let a = self.value();
        if seg.len() != a.rows() || seg.iter().any(|&k| k >= nseg) {
            return Err(Error::shape("segment_softmax", &a.shape(), &[seg.len(), nseg]));
        }
        let w = a.cols();
        let mut mx = vec![f64::NEG_INFINITY; nseg * w];
        for (r, &k) in seg.iter().enumerate() {
            for c in 0..w {
                mx[k * w + c] = mx[k * w + c].max(a.get(r, c));
            }
        }
        let mut out = (*a).clone();
        let mut z = vec![0.0; nseg * w];
        for (r, &k) in seg.iter().enumerate() {
            for c in 0..w {
                let e = (a.get(r, c) - mx[k * w + c]).exp();
                out.data_mut()[r * w + c] = e;
                z[k * w + c] += e;
            }
        }
        for (r, &k) in seg.iter().enumerate() {
            for c in 0..w {
                out.data_mut()[r * w + c] /= z[k * w + c];
            }
        }
        Ok(self.tape.push(out, Op::SegmentSoftmax(self.id, seg, nseg)))
    }

    /// Per-row dot products over `blocks` equal column blocks, giving an
    /// `n x blocks` result.
    pub fn block_row_dot(self, other: Var<'t>, blocks: usize) -> Result<Var<'t>> {
        let (a, b) = (self.value(), other.value());
        same_shape("block_row_dot", &a, &b)?;
        if blocks == 0 || a.cols() % blocks != 0 {
            return Err(Error::shape("block_row_dot", &a.shape(), &[blocks]));
        }
        let w = a.cols() / blocks;
        let mut out = Vec::with_capacity(a.rows() * blocks);
        for r in 0..a.rows() {
            let (ar, br) = (a.row(r), b.row(r));
            for k in 0..blocks {
                out.push((k * w..(k + 1) * w).map(|c| ar[c] * br[c]).sum());
            }
        }
        Ok(self.tape.push(Tensor::new(a.rows(), blocks, out)?, Op::BlockRowDot(self.id, other.id)))
    }

    /// Multiplies column block `k` of row `r` by `s[r][k]`. With a single
    /// column in `s` this scales whole rows.
    pub fn scale_blocks(self, s: Var<'t>) -> Result<Var<'t>> {
        let (a, sv) = (self.value(), s.value());
        if sv.rows() != a.rows() || sv.cols() == 0 || a.cols() % sv.cols() != 0 {
            return Err(Error::shape("scale_blocks", &a.shape(), &sv.shape()));
        }
        let w = a.cols() / sv.cols();
        let mut out = (*a).clone();
        let cols = a.cols();
        for (row, sr) in out.data_mut().chunks_mut(cols).zip(sv.data().chunks(sv.cols())) {
            for (blk, &f) in row.chunks_mut(w).zip(sr) {
                blk.iter_mut().for_each(|x| *x *= f);
            }
        }
        Ok(self.tape.push(out, Op::ScaleBlocks(self.id, s.id)))
    }

    /// Multiplies row `r` by the constant `s[r]`.
    pub fn scale_rows_const(self, s: Rc<Vec<f64>>) -> Result<Var<'t>> {
        let a = self.value();
        if s.len() != a.rows() {
            return Err(Error::shape("scale_rows_const", &a.shape(), &[s.len()]));
        }
        let mut out = (*a).clone();
        let w = a.cols();
        for (r, &f) in s.iter().enumerate() {
            for x in &mut out.data_mut()[r * w..(r + 1) * w] {
                *x *= f;
            }
        }
        Ok(self.tape.push(out, Op::ScaleRowsConst(self.id, s)))
    }

    /// Columns `start..end`.
    pub fn slice_cols(self, start: usize, end: usize) -> Result<Var<'t>> {
        let a = self.value();
        if start > end || end > a.cols() {
            return Err(Error::shape("slice_cols", &a.shape(), &[start, end]));
        }
        let mut data = Vec::with_capacity(a.rows() * (end - start));
        for r in 0..a.rows() {
            data.extend_from_slice(&a.row(r)[start..end]);
        }
        let out = Tensor::new(a.rows(), end - start, data)?;
        Ok(self.tape.push(out, Op::SliceCols(self.id, start)))
    }

    /// Same buffer, new row-major shape.
    pub fn reshape(self, rows: usize, cols: usize) -> Result<Var<'t>> {
        let out = (*self.value()).clone().reshaped(rows, cols)?;
        Ok(self.tape.push(out, Op::Reshape(self.id)))
    }
}

/// Joins along columns; all parts need the same row count.
pub fn concat_cols<'t>(parts: &[Var<'t>]) -> Result<Var<'t>> {
    let first = parts.first().ok_or_else(|| Error::Tape("concat of nothing".into()))?;
    let vals: Vec<Rc<Tensor>> = parts.iter().map(Var::value).collect();
    let rows = vals[0].rows();
    for v in &vals {
        if v.rows() != rows {
            return Err(Error::shape("concat_cols", &vals[0].shape(), &v.shape()));
        }
    }
    let cols: usize = vals.iter().map(|v| v.cols()).sum();
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for v in &vals {
            data.extend_from_slice(v.row(r));
        }
    }
    let out = Tensor::new(rows, cols, data)?;
    Ok(first.tape.push(out, Op::ConcatCols(parts.iter().map(|p| p.id).collect())))
}

/// Stacks along rows; all parts need the same column count.
pub fn concat_rows<'t>(parts: &[Var<'t>]) -> Result<Var<'t>> {
    let first = parts.first().ok_or_else(|| Error::Tape("concat of nothing".into()))?;
    let vals: Vec<Rc<Tensor>> = parts.iter().map(Var::value).collect();
    let cols = vals[0].cols();
    let mut data = Vec::new();
    let mut rows = 0;
    for v in &vals {
        if v.cols() != cols {
            return Err(Error::shape("concat_rows", &vals[0].shape(), &v.shape()));
        }
        data.extend_from_slice(v.data());
        rows += v.rows();
    }
    let out = Tensor::new(rows, cols, data)?;
    Ok(first.tape.push(out, Op::ConcatRows(parts.iter().map(|p| p.id).collect())))
}
