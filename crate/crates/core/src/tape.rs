//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every operation evaluates eagerly and appends a node; nodes only refer to
//! earlier nodes, so the tape is topologically ordered by construction and
//! [`Tape::gradients`] is a single reverse sweep. Parameters are borrowed from
//! a [`ParamStore`] rather than copied, and each parameter gets at most one
//! leaf per tape so its gradient is accumulated in one place.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::math;
use crate::tensor::{GradStore, ParamId, ParamStore, Tensor};

/// A node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Storage {
    Owned(Vec<f64>),
    Param(ParamId),
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    MatVec(Var, Var),
    MatTVec(Var, Var),
    Row(Var, usize),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    OneMinus(Var),
    Sigmoid(Var),
    Tanh(Var),
    Concat(Vec<Var>),
    Dot(Var, Var),
    Stack(Vec<Var>),
    Softmax(Var),
    WeightedSum(Var, Vec<Var>),
    MaxPool(Vec<Var>, Vec<usize>),
    /// Negative log-softmax at a target index; caches the probabilities.
    Nll(Var, usize, Vec<f64>),
    SumSquares(Var),
    Sum(Vec<Var>),
    Scale(Var, f64),
}

#[derive(Debug)]
struct Node {
    rows: usize,
    cols: usize,
    storage: Storage,
    op: Op,
}

/// Records a computation graph over borrowed parameters.
pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

/// Adjoint of every node for one backward sweep; `None` where unreachable.
#[derive(Debug)]
pub struct Adjoints {
    adj: Vec<Option<Vec<f64>>>,
}

impl Adjoints {
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.adj[v.0].as_deref()
    }
}

fn acc(adj: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    adj[v.0].get_or_insert_with(|| vec![0.0; len])
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
            param_vars: vec![None; params.len()],
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, rows: usize, cols: usize, data: Vec<f64>, op: Op) -> Var {
        debug_assert_eq!(rows * cols, data.len());
        self.nodes.push(Node {
            rows,
            cols,
            storage: Storage::Owned(data),
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        match &self.nodes[v.0].storage {
            Storage::Owned(d) => d,
            Storage::Param(id) => self.params.get(*id).data(),
        }
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[0]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    /// Number of entries of `v`.
    pub fn size(&self, v: Var) -> usize {
        let n = &self.nodes[v.0];
        n.rows * n.cols
    }

    /// Vector constant. Rejects non-finite entries.
    pub fn constant(&mut self, data: Vec<f64>) -> Result<Var> {
        if data.is_empty() {
            bail!(Domain, "empty constant");
        }
        if data.iter().any(|x| !x.is_finite()) {
            bail!(NonFinite, "constant with non-finite entry");
        }
        let n = data.len();
        Ok(self.push(n, 1, data, Op::Leaf))
    }

    pub fn constant_tensor(&mut self, t: &Tensor) -> Var {
        self.push(t.rows(), t.cols(), t.data().to_vec(), Op::Leaf)
    }

    pub fn zeros(&mut self, n: usize) -> Var {
        self.push(n, 1, vec![0.0; n], Op::Leaf)
    }

    /// Leaf for a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        let t = self.params.get(id);
        self.nodes.push(Node {
            rows: t.rows(),
            cols: t.cols(),
            storage: Storage::Param(id),
            op: Op::Param,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    fn vector_len(&self, v: Var, what: &str) -> Result<usize> {
        let (r, c) = self.shape(v);
        if c != 1 {
            bail!(Dimension, "{what}: expected a vector, got {r}x{c}");
        }
        Ok(r)
    }

    fn same_len(&self, a: Var, b: Var, what: &str) -> Result<usize> {
        let n = self.vector_len(a, what)?;
        let m = self.vector_len(b, what)?;
        if n != m {
            bail!(Dimension, "{what}: lengths {n} and {m} differ");
        }
        Ok(n)
    }

    /// `W x` for a `rows x cols` matrix and a length-`cols` vector.
    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let (rows, cols) = self.shape(w);
        let n = self.vector_len(x, "matvec")?;
        if n != cols {
            bail!(Dimension, "matvec: {rows}x{cols} matrix times length-{n} vector");
        }
        let (wv, xv) = (self.value(w), self.value(x));
        let out = wv
            .chunks_exact(cols)
            .map(|row| row.iter().zip(xv).map(|(a, b)| a * b).sum())
            .collect();
        Ok(self.push(rows, 1, out, Op::MatVec(w, x)))
    }

    /// `Wᵀ x` for a `rows x cols` matrix and a length-`rows` vector.
    pub fn matvec_t(&mut self, w: Var, x: Var) -> Result<Var> {
        let (rows, cols) = self.shape(w);
        let n = self.vector_len(x, "matvec_t")?;
        if n != rows {
            bail!(Dimension, "matvec_t: ({rows}x{cols})ᵀ times length-{n} vector");
        }
        let (wv, xv) = (self.value(w), self.value(x));
        let mut out = vec![0.0; cols];
        for (row, &xr) in wv.chunks_exact(cols).zip(xv) {
            for (o, &a) in out.iter_mut().zip(row) {
                *o += a * xr;
            }
        }
        Ok(self.push(cols, 1, out, Op::MatTVec(w, x)))
    }

    /// Row `index` of a matrix as a vector (embedding lookup).
    pub fn row(&mut self, m: Var, index: usize) -> Result<Var> {
        let (rows, cols) = self.shape(m);
        if index >= rows {
            bail!(Dimension, "row {index} out of range for {rows}x{cols} matrix");
        }
        let out = self.value(m)[index * cols..(index + 1) * cols].to_vec();
        Ok(self.push(cols, 1, out, Op::Row(m, index)))
    }

    fn zip_with(&mut self, a: Var, b: Var, what: &str, f: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>> {
        self.same_len(a, b, what)?;
        Ok(self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(&x, &y)| f(x, y))
            .collect())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with(a, b, "add", |x, y| x + y)?;
        let n = out.len();
        Ok(self.push(n, 1, out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with(a, b, "sub", |x, y| x - y)?;
        let n = out.len();
        Ok(self.push(n, 1, out, Op::Sub(a, b)))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with(a, b, "mul", |x, y| x * y)?;
        let n = out.len();
        Ok(self.push(n, 1, out, Op::Mul(a, b)))
    }

    pub fn one_minus(&mut self, a: Var) -> Result<Var> {
        let n = self.vector_len(a, "one_minus")?;
        let out = self.value(a).iter().map(|x| 1.0 - x).collect();
        Ok(self.push(n, 1, out, Op::OneMinus(a)))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let n = self.vector_len(a, "sigmoid")?;
        let out = self.value(a).iter().map(|&x| math::sigmoid(x)).collect();
        Ok(self.push(n, 1, out, Op::Sigmoid(a)))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let n = self.vector_len(a, "tanh")?;
        let out = self.value(a).iter().map(|&x| math::tanh(x)).collect();
        Ok(self.push(n, 1, out, Op::Tanh(a)))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            bail!(Domain, "concat of nothing");
        }
        let mut out = Vec::new();
        for &p in parts {
            self.vector_len(p, "concat")?;
            out.extend_from_slice(self.value(p));
        }
        let n = out.len();
        Ok(self.push(n, 1, out, Op::Concat(parts.to_vec())))
    }

    /// Inner product as a length-1 node.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_len(a, b, "dot")?;
        let s = self.value(a).iter().zip(self.value(b)).map(|(x, y)| x * y).sum();
        Ok(self.push(1, 1, vec![s], Op::Dot(a, b)))
    }

    /// Gathers length-1 nodes into a vector.
    pub fn stack(&mut self, scalars: &[Var]) -> Result<Var> {
        if scalars.is_empty() {
            bail!(Domain, "stack of nothing");
        }
        let mut out = Vec::with_capacity(scalars.len());
        for &s in scalars {
            if self.size(s) != 1 {
                bail!(Dimension, "stack expects scalars");
            }
            out.push(self.scalar(s));
        }
        let n = out.len();
        Ok(self.push(n, 1, out, Op::Stack(scalars.to_vec())))
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let n = self.vector_len(a, "softmax")?;
        let out = softmax(self.value(a))?;
        Ok(self.push(n, 1, out, Op::Softmax(a)))
    }

    /// `Σ_k weights[k] · items[k]`.
    pub fn weighted_sum(&mut self, weights: Var, items: &[Var]) -> Result<Var> {
        let k = self.vector_len(weights, "weighted_sum")?;
        if k != items.len() || k == 0 {
            bail!(Dimension, "weighted_sum: {k} weights for {} items", items.len());
        }
        let n = self.vector_len(items[0], "weighted_sum")?;
        let mut out = vec![0.0; n];
        for (i, &item) in items.iter().enumerate() {
            if self.vector_len(item, "weighted_sum")? != n {
                bail!(Dimension, "weighted_sum: items of unequal length");
            }
            let w = self.value(weights)[i];
            for (o, &x) in out.iter_mut().zip(self.value(item)) {
                *o += w * x;
            }
        }
        Ok(self.push(n, 1, out, Op::WeightedSum(weights, items.to_vec())))
    }

    /// Element-wise maximum over equal-length vectors; ties go to the first.
    pub fn max_pool(&mut self, items: &[Var]) -> Result<Var> {
        if items.is_empty() {
            bail!(Domain, "max_pool of nothing");
        }
        let n = self.vector_len(items[0], "max_pool")?;
        let mut out = self.value(items[0]).to_vec();
        let mut src = vec![0usize; n];
        for (k, &item) in items.iter().enumerate().skip(1) {
            if self.vector_len(item, "max_pool")? != n {
                bail!(Dimension, "max_pool: items of unequal length");
            }
            for (d, &x) in self.value(item).iter().enumerate() {
                if x > out[d] {
                    out[d] = x;
                    src[d] = k;
                }
            }
        }
        Ok(self.push(n, 1, out, Op::MaxPool(items.to_vec(), src)))
    }

    /// `-log softmax(logits)[target]` as a length-1 node.
    pub fn nll(&mut self, logits: Var, target: usize) -> Result<Var> {
        let n = self.vector_len(logits, "nll")?;
        if target >= n {
            bail!(Dimension, "nll target {target} outside {n} classes");
        }
        let lv = self.value(logits);
        let lse = math::log_sum_exp(lv);
        let loss = lse - lv[target];
        let probs = lv.iter().map(|&x| math::exp(x - lse)).collect();
        Ok(self.push(1, 1, vec![loss], Op::Nll(logits, target, probs)))
    }

    /// Squared Frobenius norm of any node (vectors or matrices).
    pub fn sum_squares(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().map(|x| x * x).sum();
        self.push(1, 1, vec![s], Op::SumSquares(a))
    }

    /// Element-wise sum of equal-shape vectors.
    pub fn sum(&mut self, items: &[Var]) -> Result<Var> {
        if items.is_empty() {
            bail!(Domain, "sum of nothing");
        }
        let n = self.vector_len(items[0], "sum")?;
        let mut out = vec![0.0; n];
        for &item in items {
            if self.vector_len(item, "sum")? != n {
                bail!(Dimension, "sum: items of unequal length");
            }
            for (o, &x) in out.iter_mut().zip(self.value(item)) {
                *o += x;
            }
        }
        Ok(self.push(n, 1, out, Op::Sum(items.to_vec())))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let n = self.vector_len(a, "scale")?;
        let out = self.value(a).iter().map(|x| x * factor).collect();
        Ok(self.push(n, 1, out, Op::Scale(a, factor)))
    }

    /// Reverse sweep from a scalar `loss`, returning every node's adjoint.
    pub fn gradients(&self, loss: Var) -> Result<Adjoints> {
        if self.size(loss) != 1 {
            bail!(
                Contract,
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            );
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let (lower, upper) = adj.split_at_mut(i);
            let Some(g) = upper[0].as_deref() else {
                continue;
            };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf | Op::Param => {}
                &Op::MatVec(w, x) => {
                    let (rows, cols) = self.shape(w);
                    let (wv, xv) = (self.value(w), self.value(x));
                    let dx = acc(lower, x, cols);
                    for (row, &gr) in wv.chunks_exact(cols).zip(g) {
                        for (d, &a) in dx.iter_mut().zip(row) {
                            *d += a * gr;
                        }
                    }
                    let dw = acc(lower, w, rows * cols);
                    for (drow, &gr) in dw.chunks_exact_mut(cols).zip(g) {
                        if gr != 0.0 {
                            for (d, &xc) in drow.iter_mut().zip(xv) {
                                *d += gr * xc;
                            }
                        }
                    }
                }
                &Op::MatTVec(w, x) => {
                    let (rows, cols) = self.shape(w);
                    let (wv, xv) = (self.value(w), self.value(x));
                    let dx = acc(lower, x, rows);
                    for (d, row) in dx.iter_mut().zip(wv.chunks_exact(cols)) {
                        *d += row.iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
                    }
                    let dw = acc(lower, w, rows * cols);
                    for (drow, &xr) in dw.chunks_exact_mut(cols).zip(xv) {
                        if xr != 0.0 {
                            for (d, &gc) in drow.iter_mut().zip(g) {
                                *d += xr * gc;
                            }
                        }
                    }
                }
                &Op::Row(m, index) => {
                    let (rows, cols) = self.shape(m);
                    let dm = acc(lower, m, rows * cols);
                    for (d, &x) in dm[index * cols..(index + 1) * cols].iter_mut().zip(g) {
                        *d += x;
                    }
                }
                &Op::Add(a, b) => {
                    add_into(acc(lower, a, g.len()), g);
                    add_into(acc(lower, b, g.len()), g);
                }
                &Op::Sub(a, b) => {
                    add_into(acc(lower, a, g.len()), g);
                    for (d, &x) in acc(lower, b, g.len()).iter_mut().zip(g) {
                        *d -= x;
                    }
                }
                &Op::Mul(a, b) => {
                    let (av, bv) = (self.value(a), self.value(b));
                    for ((d, &x), &y) in acc(lower, a, g.len()).iter_mut().zip(g).zip(bv) {
                        *d += x * y;
                    }
                    for ((d, &x), &y) in acc(lower, b, g.len()).iter_mut().zip(g).zip(av) {
                        *d += x * y;
                    }
                }
                &Op::OneMinus(a) => {
                    for (d, &x) in acc(lower, a, g.len()).iter_mut().zip(g) {
                        *d -= x;
                    }
                }
                &Op::Sigmoid(a) => {
                    let y = self.value(Var(i));
                    for ((d, &x), &s) in acc(lower, a, g.len()).iter_mut().zip(g).zip(y) {
                        *d += x * s * (1.0 - s);
                    }
                }
                &Op::Tanh(a) => {
                    let y = self.value(Var(i));
                    for ((d, &x), &t) in acc(lower, a, g.len()).iter_mut().zip(g).zip(y) {
                        *d += x * (1.0 - t * t);
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = self.size(p);
                        add_into(acc(lower, p, n), &g[offset..offset + n]);
                        offset += n;
                    }
                }
                &Op::Dot(a, b) => {
                    let (av, bv) = (self.value(a), self.value(b));
                    let s = g[0];
                    for (d, &y) in acc(lower, a, av.len()).iter_mut().zip(bv) {
                        *d += s * y;
                    }
                    for (d, &x) in acc(lower, b, bv.len()).iter_mut().zip(av) {
                        *d += s * x;
                    }
                }
                Op::Stack(scalars) => {
                    for (&s, &x) in scalars.iter().zip(g) {
                        acc(lower, s, 1)[0] += x;
                    }
                }
                &Op::Softmax(a) => {
                    let y = self.value(Var(i));
                    let inner: f64 = g.iter().zip(y).map(|(x, p)| x * p).sum();
                    for ((d, &x), &p) in acc(lower, a, g.len()).iter_mut().zip(g).zip(y) {
                        *d += p * (x - inner);
                    }
                }
                Op::WeightedSum(weights, items) => {
                    let wv = self.value(*weights).to_vec();
                    let mut dweights = vec![0.0; items.len()];
                    for (k, &item) in items.iter().enumerate() {
                        let iv = self.value(item);
                        dweights[k] = iv.iter().zip(g).map(|(a, b)| a * b).sum();
                        for (d, &x) in acc(lower, item, g.len()).iter_mut().zip(g) {
                            *d += wv[k] * x;
                        }
                    }
                    add_into(acc(lower, *weights, items.len()), &dweights);
                }
                Op::MaxPool(items, src) => {
                    for (dim, (&k, &x)) in src.iter().zip(g).enumerate() {
                        acc(lower, items[k], g.len())[dim] += x;
                    }
                }
                Op::Nll(logits, target, probs) => {
                    let s = g[0];
                    let dl = acc(lower, *logits, probs.len());
                    for (d, &p) in dl.iter_mut().zip(probs) {
                        *d += s * p;
                    }
                    dl[*target] -= s;
                }
                &Op::SumSquares(a) => {
                    let av = self.value(a);
                    let s = 2.0 * g[0];
                    for (d, &x) in acc(lower, a, av.len()).iter_mut().zip(av) {
                        *d += s * x;
                    }
                }
                Op::Sum(items) => {
                    for &item in items {
                        add_into(acc(lower, item, g.len()), g);
                    }
                }
                &Op::Scale(a, factor) => {
                    for (d, &x) in acc(lower, a, g.len()).iter_mut().zip(g) {
                        *d += factor * x;
                    }
                }
            }
        }
        Ok(Adjoints { adj })
    }

    /// Adds `∂loss/∂θ` for every parameter reachable from `loss` into `grads`.
    /// Gradients accumulate across calls; zeroing is the caller's job.
    pub fn backward(&self, loss: Var, grads: &mut GradStore) -> Result<()> {
        let adjoints = self.gradients(loss)?;
        for (index, v) in self.param_vars.iter().enumerate() {
            let Some(v) = v else { continue };
            if let Some(g) = adjoints.get(*v) {
                add_into(grads.get_mut(ParamId(index)), g);
            }
        }
        Ok(())
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Numerically stable softmax of a nonempty vector.
pub fn softmax(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::Domain("softmax of an empty vector".into()));
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|&s| math::exp(s - max)).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// `log softmax`, computed through a shifted log-sum-exp.
pub fn log_softmax(scores: &[f64]) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::Domain("log_softmax of an empty vector".into()));
    }
    let lse = math::log_sum_exp(scores);
    Ok(scores.iter().map(|&s| s - lse).collect())
}
