//! Dense f64 tensors with reverse-mode automatic differentiation.
//!
//! Just enough machinery for the models in this crate: LSTMs, 1-D
//! convolutions, linear-chain CRFs, softmax classifiers, and dropout.
//! Tensors are rank 1 or 2, row-major, always f64. Ops record a backward
//! closure when any input participates in the gradient; [`Tensor::backward`]
//! walks the graph in reverse topological order, accumulates (`+=`) into the
//! gradient of every `requires_grad` ancestor, and then clears the tape.
//!
//! Broadcasting is limited to equal shapes and scalar-vs-tensor; nothing the
//! models need goes further. All reductions run in a fixed left-to-right
//! order, so a forward+backward pass is bitwise reproducible for a given
//! [`Rng`] seed.

mod rng;

pub mod gradcheck;

pub use rng::Rng;

use std::cell::{Ref, RefCell};
use std::collections::HashSet;
use std::fmt;
use std::rc::Rc;

use crate::error::{Error, Result};

/// Dropout / batch-norm style switch between training and inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

type BackwardFn = Box<dyn FnOnce(&[f64], &[f64])>;

struct Node {
    shape: Vec<usize>,
    data: Vec<f64>,
    grad: Option<Vec<f64>>,
    /// Leaf parameter: gradient is retained after backward.
    requires_grad: bool,
    /// Participates in some gradient path (requires_grad or has a tracked
    /// ancestor).
    track: bool,
    parents: Vec<Tensor>,
    backward: Option<BackwardFn>,
}

/// Shared handle to a tensor node. Cloning is cheap and aliases the storage.
#[derive(Clone)]
pub struct Tensor(Rc<RefCell<Node>>);

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.0.borrow();
        write!(
            f,
            "Tensor(shape={:?}, requires_grad={}, data[..{}]={:?})",
            n.shape,
            n.requires_grad,
            n.data.len().min(4),
            &n.data[..n.data.len().min(4)]
        )
    }
}

fn check_shape(shape: &[usize], len: usize, op: &'static str) -> Result<()> {
    let numel: usize = shape.iter().product();
    if numel != len {
        return Err(Error::InvalidArgument {
            op,
            msg: format!("shape {shape:?} does not match data length {len}"),
        });
    }
    Ok(())
}

impl Tensor {
    // ── Constructors ──────────────────────────────────────────────────

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        check_shape(shape, data.len(), "from_vec")?;
        Ok(Tensor::raw(shape.to_vec(), data, false))
    }

    /// Trainable leaf: gradient is accumulated and retained by backward().
    pub fn param(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        check_shape(shape, data.len(), "param")?;
        Ok(Tensor::raw(shape.to_vec(), data, true))
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor::raw(shape.to_vec(), vec![0.0; shape.iter().product()], false)
    }

    pub fn ones(shape: &[usize]) -> Tensor {
        Tensor::raw(shape.to_vec(), vec![1.0; shape.iter().product()], false)
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor::raw(vec![1], vec![v], false)
    }

    /// Entries uniform in [lo, hi).
    pub fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut Rng, trainable: bool) -> Tensor {
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| rng.uniform_in(lo, hi)).collect();
        Tensor::raw(shape.to_vec(), data, trainable)
    }

    fn raw(shape: Vec<usize>, data: Vec<f64>, requires_grad: bool) -> Tensor {
        Tensor(Rc::new(RefCell::new(Node {
            shape,
            data,
            grad: None,
            requires_grad,
            track: requires_grad,
            parents: Vec::new(),
            backward: None,
        })))
    }

    fn op(shape: Vec<usize>, data: Vec<f64>, parents: Vec<Tensor>, backward: BackwardFn) -> Tensor {
        let track = parents.iter().any(|p| p.0.borrow().track);
        if !track {
            return Tensor::raw(shape, data, false);
        }
        Tensor(Rc::new(RefCell::new(Node {
            shape,
            data,
            grad: None,
            requires_grad: false,
            track: true,
            parents,
            backward: Some(backward),
        })))
    }

    // ── Accessors ─────────────────────────────────────────────────────

    pub fn shape(&self) -> Vec<usize> {
        self.0.borrow().shape.clone()
    }

    pub fn numel(&self) -> usize {
        self.0.borrow().data.len()
    }

    pub fn requires_grad(&self) -> bool {
        self.0.borrow().requires_grad
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.borrow().data.clone()
    }

    /// Borrow the raw data without copying.
    pub fn data_ref(&self) -> Ref<'_, [f64]> {
        Ref::map(self.0.borrow(), |n| n.data.as_slice())
    }

    /// Value of a one-element tensor.
    pub fn item(&self) -> f64 {
        let n = self.0.borrow();
        debug_assert_eq!(n.data.len(), 1, "item() on non-scalar");
        n.data[0]
    }

    pub fn grad(&self) -> Option<Vec<f64>> {
        self.0.borrow().grad.clone()
    }

    pub fn zero_grad(&self) {
        self.0.borrow_mut().grad = None;
    }

    /// Replace the stored values in place (same length required). Used by
    /// optimizers and finite-difference checks.
    pub fn set_data(&self, data: &[f64]) -> Result<()> {
        let mut n = self.0.borrow_mut();
        if n.data.len() != data.len() {
            return Err(Error::InvalidArgument {
                op: "set_data",
                msg: format!("length {} != {}", data.len(), n.data.len()),
            });
        }
        n.data.copy_from_slice(data);
        Ok(())
    }

    // ── Elementwise ops ───────────────────────────────────────────────

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip("add", other, |a, b| a + b, AddLike::Add)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip("sub", other, |a, b| a - b, AddLike::Sub)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip("mul", other, |a, b| a * b, AddLike::Mul)
    }

    fn zip(
        &self,
        op: &'static str,
        other: &Tensor,
        f: impl Fn(f64, f64) -> f64,
        kind: AddLike,
    ) -> Result<Tensor> {
        let (la, lb) = (self.numel(), other.numel());
        let sa = self.shape();
        let sb = other.shape();
        let (out_shape, a_scalar, b_scalar) = if sa == sb {
            (sa.clone(), false, false)
        } else if la == 1 {
            (sb.clone(), true, false)
        } else if lb == 1 {
            (sa.clone(), false, true)
        } else {
            return Err(Error::ShapeMismatch {
                op,
                lhs: sa,
                rhs: sb,
            });
        };
        let ad = self.0.borrow();
        let bd = other.0.borrow();
        let n = out_shape.iter().product();
        let mut data = Vec::with_capacity(n);
        for i in 0..n {
            let a = ad.data[if a_scalar { 0 } else { i }];
            let b = bd.data[if b_scalar { 0 } else { i }];
            data.push(f(a, b));
        }
        drop(ad);
        drop(bd);
        let (pa, pb) = (self.clone(), other.clone());
        let backward: BackwardFn = Box::new(move |g, _| {
            match kind {
                AddLike::Add => {
                    accumulate_bcast(&pa, g, a_scalar, |gi, _| gi);
                    accumulate_bcast(&pb, g, b_scalar, |gi, _| gi);
                }
                AddLike::Sub => {
                    accumulate_bcast(&pa, g, a_scalar, |gi, _| gi);
                    accumulate_bcast(&pb, g, b_scalar, |gi, _| -gi);
                }
                AddLike::Mul => {
                    // d a = g * b, d b = g * a
                    let bdat = pb.to_vec();
                    accumulate_bcast(&pa, g, a_scalar, |gi, i| {
                        gi * bdat[if b_scalar { 0 } else { i }]
                    });
                    let adat = pa.to_vec();
                    accumulate_bcast(&pb, g, b_scalar, |gi, i| {
                        gi * adat[if a_scalar { 0 } else { i }]
                    });
                }
            };
        });
        Ok(Tensor::op(
            out_shape,
            data,
            vec![self.clone(), other.clone()],
            backward,
        ))
    }

    pub fn neg(&self) -> Tensor {
        self.map_unary(|x| -x, |_, _y, g| -g)
    }

    /// Multiply by a plain constant.
    pub fn scale(&self, c: f64) -> Tensor {
        self.map_unary(move |x| c * x, move |_, _y, g| c * g)
    }

    pub fn tanh(&self) -> Tensor {
        self.map_unary(|x| x.tanh(), |_, y, g| g * (1.0 - y * y))
    }

    pub fn sigmoid(&self) -> Tensor {
        self.map_unary(|x| 1.0 / (1.0 + (-x).exp()), |_, y, g| g * y * (1.0 - y))
    }

    pub fn relu(&self) -> Tensor {
        self.map_unary(|x| x.max(0.0), |x, _y, g| if x > 0.0 { g } else { 0.0 })
    }

    fn map_unary(
        &self,
        f: impl Fn(f64) -> f64,
        df: impl Fn(f64, f64, f64) -> f64 + 'static,
    ) -> Tensor {
        let shape = self.shape();
        let data: Vec<f64> = self.0.borrow().data.iter().map(|&x| f(x)).collect();
        let parent = self.clone();
        let backward: BackwardFn = Box::new(move |g, out| {
            let xs = parent.to_vec();
            let contrib: Vec<f64> = (0..g.len()).map(|i| df(xs[i], out[i], g[i])).collect();
            accumulate(&parent, &contrib);
        });
        Tensor::op(shape, data, vec![self.clone()], backward)
    }

    // ── Linear algebra ────────────────────────────────────────────────

    /// Standard 2-D product; gradients dA = G·Bᵀ, dB = Aᵀ·G.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let sa = self.shape();
        let sb = other.shape();
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: sa,
                rhs: sb,
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut data = vec![0.0; m * n];
        matmul_raw(&self.0.borrow().data, &other.0.borrow().data, m, k, n, &mut data);
        let (pa, pb) = (self.clone(), other.clone());
        let backward: BackwardFn = Box::new(move |g, _| {
            let a = pa.to_vec();
            let b = pb.to_vec();
            if pa.0.borrow().track {
                // dA[i,p] = Σ_j G[i,j] B[p,j]
                let mut da = vec![0.0; m * k];
                for i in 0..m {
                    let grow = &g[i * n..(i + 1) * n];
                    for p in 0..k {
                        let brow = &b[p * n..(p + 1) * n];
                        let mut s = 0.0;
                        for j in 0..n {
                            s += grow[j] * brow[j];
                        }
                        da[i * k + p] = s;
                    }
                }
                accumulate(&pa, &da);
            }
            if pb.0.borrow().track {
                // dB[p,j] = Σ_i A[i,p] G[i,j]
                let mut db = vec![0.0; k * n];
                for i in 0..m {
                    let grow = &g[i * n..(i + 1) * n];
                    let arow = &a[i * k..(i + 1) * k];
                    for (p, &ap) in arow.iter().enumerate() {
                        let dbrow = &mut db[p * n..(p + 1) * n];
                        for j in 0..n {
                            dbrow[j] += ap * grow[j];
                        }
                    }
                }
                accumulate(&pb, &db);
            }
        });
        Ok(Tensor::op(
            vec![m, n],
            data,
            vec![self.clone(), other.clone()],
            backward,
        ))
    }

    pub fn transpose(&self) -> Result<Tensor> {
        let s = self.shape();
        if s.len() != 2 {
            return Err(Error::InvalidArgument {
                op: "transpose",
                msg: format!("rank-2 required, got {s:?}"),
            });
        }
        let (m, n) = (s[0], s[1]);
        let src = self.0.borrow();
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = src.data[i * n + j];
            }
        }
        drop(src);
        let parent = self.clone();
        let backward: BackwardFn = Box::new(move |g, _| {
            let mut dg = vec![0.0; m * n];
            for j in 0..n {
                for i in 0..m {
                    dg[i * n + j] = g[j * m + i];
                }
            }
            accumulate(&parent, &dg);
        });
        Ok(Tensor::op(vec![n, m], data, vec![self.clone()], backward))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        check_shape(shape, self.numel(), "reshape")?;
        let data = self.to_vec();
        let parent = self.clone();
        let backward: BackwardFn = Box::new(move |g, _| accumulate(&parent, g));
        Ok(Tensor::op(
            shape.to_vec(),
            data,
            vec![self.clone()],
            backward,
        ))
    }

    // ── Slicing / assembly ────────────────────────────────────────────

    /// Contiguous sub-range along `axis` (rank 1 or 2).
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        let s = self.shape();
        if axis >= s.len() || start + len > s[axis] || len == 0 {
            return Err(Error::InvalidArgument {
                op: "narrow",
                msg: format!("axis {axis} range {start}..{} of shape {s:?}", start + len),
            });
        }
        let src = self.0.borrow();
        let (out_shape, data, positions): (Vec<usize>, Vec<f64>, Vec<usize>) =
            if s.len() == 1 || axis == 0 {
                let width: usize = s.iter().skip(1).product::<usize>().max(1);
                let range = start * width..(start + len) * width;
                let mut out_shape = s.clone();
                out_shape[0] = len;
                (
                    out_shape,
                    src.data[range.clone()].to_vec(),
                    range.collect(),
                )
            } else {
                let (m, n) = (s[0], s[1]);
                let mut data = Vec::with_capacity(m * len);
                let mut pos = Vec::with_capacity(m * len);
                for i in 0..m {
                    for j in start..start + len {
                        data.push(src.data[i * n + j]);
                        pos.push(i * n + j);
                    }
                }
                (vec![m, len], data, pos)
            };
        drop(src);
        let parent = self.clone();
        let total = self.numel();
        let backward: BackwardFn = Box::new(move |g, _| {
            let mut dg = vec![0.0; total];
            for (gi, &p) in g.iter().zip(positions.iter()) {
                dg[p] += gi;
            }
            accumulate(&parent, &dg);
        });
        Ok(Tensor::op(out_shape, data, vec![self.clone()], backward))
    }

    /// Row `i` of a rank-2 tensor as shape [1, n].
    pub fn row(&self, i: usize) -> Result<Tensor> {
        self.narrow(0, i, 1)
    }

    /// Concatenate along `axis`. All parts must agree on the other axis.
    pub fn cat(parts: &[Tensor], axis: usize) -> Result<Tensor> {
        if parts.is_empty() {
            return Err(Error::InvalidArgument {
                op: "cat",
                msg: "no tensors given".into(),
            });
        }
        let rank = parts[0].shape().len();
        if axis >= rank {
            return Err(Error::InvalidArgument {
                op: "cat",
                msg: format!("axis {axis} out of range for rank {rank}"),
            });
        }
        for p in parts {
            let s = p.shape();
            let s0 = parts[0].shape();
            if s.len() != rank
                || (0..rank).any(|d| d != axis && s[d] != s0[d])
            {
                return Err(Error::ShapeMismatch {
                    op: "cat",
                    lhs: s0,
                    rhs: s,
                });
            }
        }
        let shapes: Vec<Vec<usize>> = parts.iter().map(|p| p.shape()).collect();
        let mut out_shape = shapes[0].clone();
        out_shape[axis] = shapes.iter().map(|s| s[axis]).sum();
        let numel: usize = out_shape.iter().product();
        let mut data = vec![0.0; numel];

        // Per-part flat destination indices, reused by the backward split.
        let mut dest: Vec<Vec<usize>> = Vec::with_capacity(parts.len());
        if rank == 1 || axis == 0 {
            let mut offset = 0;
            for p in parts {
                let pd = p.0.borrow();
                let idx: Vec<usize> = (offset..offset + pd.data.len()).collect();
                data[offset..offset + pd.data.len()].copy_from_slice(&pd.data);
                offset += pd.data.len();
                dest.push(idx);
            }
        } else {
            let rows = out_shape[0];
            let ncols = out_shape[1];
            let mut col0 = 0;
            for (p, s) in parts.iter().zip(&shapes) {
                let pd = p.0.borrow();
                let w = s[1];
                let mut idx = Vec::with_capacity(pd.data.len());
                for r in 0..rows {
                    for c in 0..w {
                        let at = r * ncols + col0 + c;
                        data[at] = pd.data[r * w + c];
                        idx.push(at);
                    }
                }
                col0 += w;
                dest.push(idx);
            }
        }
        let owned: Vec<Tensor> = parts.to_vec();
        let handles = owned.clone();
        let backward: BackwardFn = Box::new(move |g, _| {
            for (p, idx) in handles.iter().zip(dest.iter()) {
                let part: Vec<f64> = idx.iter().map(|&i| g[i]).collect();
                accumulate(p, &part);
            }
        });
        Ok(Tensor::op(out_shape, data, owned, backward))
    }

    /// Select rows of a rank-2 tensor; gradient scatter-adds back, so a row
    /// used several times accumulates all contributions.
    pub fn gather_rows(&self, indices: &[usize]) -> Result<Tensor> {
        let s = self.shape();
        if s.len() != 2 {
            return Err(Error::InvalidArgument {
                op: "gather_rows",
                msg: format!("rank-2 required, got {s:?}"),
            });
        }
        let (v, d) = (s[0], s[1]);
        if let Some(&bad) = indices.iter().find(|&&i| i >= v) {
            return Err(Error::InvalidArgument {
                op: "gather_rows",
                msg: format!("row {bad} out of range 0..{v}"),
            });
        }
        let src = self.0.borrow();
        let mut data = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            data.extend_from_slice(&src.data[i * d..(i + 1) * d]);
        }
        drop(src);
        let parent = self.clone();
        let idx = indices.to_vec();
        let backward: BackwardFn = Box::new(move |g, _| {
            let mut dg = vec![0.0; v * d];
            for (r, &i) in idx.iter().enumerate() {
                let grow = &g[r * d..(r + 1) * d];
                let drow = &mut dg[i * d..(i + 1) * d];
                for (dj, &gj) in drow.iter_mut().zip(grow) {
                    *dj += gj;
                }
            }
            accumulate(&parent, &dg);
        });
        Ok(Tensor::op(
            vec![indices.len(), d],
            data,
            vec![self.clone()],
            backward,
        ))
    }

    /// Select individual entries (row, col) of a rank-2 tensor into a rank-1
    /// tensor.
    pub fn gather_nd(&self, coords: &[(usize, usize)]) -> Result<Tensor> {
        let s = self.shape();
        if s.len() != 2 {
            return Err(Error::InvalidArgument {
                op: "gather_nd",
                msg: format!("rank-2 required, got {s:?}"),
            });
        }
        let (m, n) = (s[0], s[1]);
        if let Some(&bad) = coords.iter().find(|&&(r, c)| r >= m || c >= n) {
            return Err(Error::InvalidArgument {
                op: "gather_nd",
                msg: format!("coordinate {bad:?} out of range for {s:?}"),
            });
        }
        let src = self.0.borrow();
        let data: Vec<f64> = coords.iter().map(|&(r, c)| src.data[r * n + c]).collect();
        drop(src);
        let parent = self.clone();
        let count = coords.len();
        let coords = coords.to_vec();
        let backward: BackwardFn = Box::new(move |g, _| {
            let mut dg = vec![0.0; m * n];
            for (&(r, c), &gi) in coords.iter().zip(g.iter()) {
                dg[r * n + c] += gi;
            }
            accumulate(&parent, &dg);
        });
        Ok(Tensor::op(
            vec![count],
            data,
            vec![self.clone()],
            backward,
        ))
    }

    // ── Reductions ────────────────────────────────────────────────────

    pub fn sum_all(&self) -> Tensor {
        let total: f64 = self.0.borrow().data.iter().sum();
        let parent = self.clone();
        let n = self.numel();
        let backward: BackwardFn = Box::new(move |g, _| {
            accumulate(&parent, &vec![g[0]; n]);
        });
        Tensor::op(vec![1], vec![total], vec![self.clone()], backward)
    }

    /// Sum a rank-2 tensor along `axis` (0 → [1,n], 1 → [m,1]).
    pub fn sum_axis(&self, axis: usize) -> Result<Tensor> {
        let (m, n) = self.rank2("sum_axis")?;
        let src = self.0.borrow();
        let (out_shape, data): (Vec<usize>, Vec<f64>) = if axis == 0 {
            let mut out = vec![0.0; n];
            for i in 0..m {
                for j in 0..n {
                    out[j] += src.data[i * n + j];
                }
            }
            (vec![1, n], out)
        } else {
            let mut out = vec![0.0; m];
            for i in 0..m {
                out[i] = src.data[i * n..(i + 1) * n].iter().sum();
            }
            (vec![m, 1], out)
        };
        drop(src);
        let parent = self.clone();
        let backward: BackwardFn = Box::new(move |g, _| {
            let mut dg = vec![0.0; m * n];
            for i in 0..m {
                for j in 0..n {
                    dg[i * n + j] = if axis == 0 { g[j] } else { g[i] };
                }
            }
            accumulate(&parent, &dg);
        });
        Ok(Tensor::op(out_shape, data, vec![self.clone()], backward))
    }

    /// Max of a rank-2 tensor along `axis`; gradient flows to the first
    /// maximal entry of each lane.
    pub fn max_axis(&self, axis: usize) -> Result<Tensor> {
        let (m, n) = self.rank2("max_axis")?;
        let src = self.0.borrow();
        let lanes = if axis == 0 { n } else { m };
        let lane_len = if axis == 0 { m } else { n };
        let at = |lane: usize, k: usize| {
            if axis == 0 {
                k * n + lane
            } else {
                lane * n + k
            }
        };
        let mut data = Vec::with_capacity(lanes);
        let mut arg = Vec::with_capacity(lanes);
        for lane in 0..lanes {
            let mut best = f64::NEG_INFINITY;
            let mut best_k = 0;
            for k in 0..lane_len {
                let v = src.data[at(lane, k)];
                if v > best {
                    best = v;
                    best_k = k;
                }
            }
            data.push(best);
            arg.push(at(lane, best_k));
        }
        drop(src);
        let out_shape = if axis == 0 { vec![1, n] } else { vec![m, 1] };
        let parent = self.clone();
        let backward: BackwardFn = Box::new(move |g, _| {
            let mut dg = vec![0.0; m * n];
            for (lane, &pos) in arg.iter().enumerate() {
                dg[pos] += g[lane];
            }
            accumulate(&parent, &dg);
        });
        Ok(Tensor::op(out_shape, data, vec![self.clone()], backward))
    }

    /// Max-shifted log(Σ exp) along `axis`. Rank-1 tensors reduce to a
    /// single element (axis must be 0); rank-2 as in [`sum_axis`](Self::sum_axis).
    /// Lanes that are entirely -inf yield -inf with zero gradient.
    pub fn log_sum_exp(&self, axis: usize) -> Result<Tensor> {
        let lanes = self.lanes(axis, "log_sum_exp")?;
        let src = self.0.borrow();
        let mut data = Vec::with_capacity(lanes.count);
        for lane in 0..lanes.count {
            let mut mx = f64::NEG_INFINITY;
            for k in 0..lanes.len {
                mx = mx.max(src.data[lanes.at(lane, k)]);
            }
            if mx == f64::NEG_INFINITY {
                data.push(f64::NEG_INFINITY);
                continue;
            }
            let mut s = 0.0;
            for k in 0..lanes.len {
                s += (src.data[lanes.at(lane, k)] - mx).exp();
            }
            data.push(mx + s.ln());
        }
        drop(src);
        let parent = self.clone();
        let total = self.numel();
        let lanes_b = lanes.clone();
        let backward: BackwardFn = Box::new(move |g, out| {
            let xs = parent.to_vec();
            let mut dg = vec![0.0; total];
            for lane in 0..lanes_b.count {
                let lse = out[lane];
                if lse == f64::NEG_INFINITY {
                    continue;
                }
                for k in 0..lanes_b.len {
                    let p = lanes_b.at(lane, k);
                    dg[p] = g[lane] * (xs[p] - lse).exp();
                }
            }
            accumulate(&parent, &dg);
        });
        Ok(Tensor::op(
            lanes.out_shape.clone(),
            data,
            vec![self.clone()],
            backward,
        ))
    }

    /// Softmax along `axis`; each lane is non-negative and sums to 1.
    pub fn softmax(&self, axis: usize) -> Result<Tensor> {
        let lanes = self.lanes(axis, "softmax")?;
        let src = self.0.borrow();
        let mut data = vec![0.0; self.numel()];
        for lane in 0..lanes.count {
            let mut mx = f64::NEG_INFINITY;
            for k in 0..lanes.len {
                mx = mx.max(src.data[lanes.at(lane, k)]);
            }
            if mx == f64::NEG_INFINITY {
                // Degenerate all-masked lane: fall back to uniform.
                for k in 0..lanes.len {
                    data[lanes.at(lane, k)] = 1.0 / lanes.len as f64;
                }
                continue;
            }
            let mut s = 0.0;
            for k in 0..lanes.len {
                let e = (src.data[lanes.at(lane, k)] - mx).exp();
                data[lanes.at(lane, k)] = e;
                s += e;
            }
            for k in 0..lanes.len {
                data[lanes.at(lane, k)] /= s;
            }
        }
        drop(src);
        let shape = self.shape();
        let parent = self.clone();
        let lanes_b = lanes.clone();
        let backward: BackwardFn = Box::new(move |g, y| {
            let mut dg = vec![0.0; y.len()];
            for lane in 0..lanes_b.count {
                let mut dot = 0.0;
                for k in 0..lanes_b.len {
                    let p = lanes_b.at(lane, k);
                    dot += g[p] * y[p];
                }
                for k in 0..lanes_b.len {
                    let p = lanes_b.at(lane, k);
                    dg[p] = (g[p] - dot) * y[p];
                }
            }
            accumulate(&parent, &dg);
        });
        Ok(Tensor::op(shape, data, vec![self.clone()], backward))
    }

    /// Inverted dropout: in train mode each element is zeroed with
    /// probability `rate` and survivors are scaled by 1/(1-rate); eval mode
    /// is the identity.
    pub fn dropout(&self, rate: f64, mode: Mode, rng: &mut Rng) -> Result<Tensor> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument {
                op: "dropout",
                msg: format!("rate {rate} outside [0, 1)"),
            });
        }
        if mode == Mode::Eval || rate == 0.0 {
            return Ok(self.clone());
        }
        let keep = 1.0 - rate;
        let scale = 1.0 / keep;
        let mask: Vec<f64> = (0..self.numel())
            .map(|_| if rng.bernoulli(keep) { scale } else { 0.0 })
            .collect();
        let data: Vec<f64> = self
            .0
            .borrow()
            .data
            .iter()
            .zip(&mask)
            .map(|(&x, &m)| x * m)
            .collect();
        let shape = self.shape();
        let parent = self.clone();
        let backward: BackwardFn = Box::new(move |g, _| {
            let dg: Vec<f64> = g.iter().zip(&mask).map(|(&gi, &m)| gi * m).collect();
            accumulate(&parent, &dg);
        });
        Ok(Tensor::op(shape, data, vec![self.clone()], backward))
    }

    // ── Backward ──────────────────────────────────────────────────────

    /// Reverse-mode sweep from a scalar loss. Gradients accumulate into
    /// every `requires_grad` ancestor; the recorded graph is then freed.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::NonScalarLoss {
                shape: self.shape(),
            });
        }
        // Iterative post-order DFS over tracked ancestors.
        enum Frame {
            Enter(Tensor),
            Exit(Tensor),
        }
        let mut topo: Vec<Tensor> = Vec::new();
        let mut visited: HashSet<*const RefCell<Node>> = HashSet::new();
        let mut stack = vec![Frame::Enter(self.clone())];
        while let Some(frame) = stack.pop() {
            match frame {
                Frame::Enter(t) => {
                    let ptr = Rc::as_ptr(&t.0);
                    if !visited.insert(ptr) {
                        continue;
                    }
                    stack.push(Frame::Exit(t.clone()));
                    for p in t.0.borrow().parents.iter() {
                        if p.0.borrow().track {
                            stack.push(Frame::Enter(p.clone()));
                        }
                    }
                }
                Frame::Exit(t) => topo.push(t),
            }
        }
        accumulate(self, &[1.0]);
        for t in topo.iter().rev() {
            let bw = t.0.borrow_mut().backward.take();
            if let Some(bw) = bw {
                let n = t.0.borrow();
                if let Some(grad) = n.grad.as_ref() {
                    bw(grad, &n.data);
                }
            }
        }
        // Clear the tape: drop parent links and intermediate grads.
        for t in &topo {
            let mut n = t.0.borrow_mut();
            n.parents.clear();
            if !n.requires_grad {
                n.grad = None;
            }
        }
        Ok(())
    }

    // ── internal helpers ──────────────────────────────────────────────

    fn rank2(&self, op: &'static str) -> Result<(usize, usize)> {
        let s = self.shape();
        if s.len() != 2 {
            return Err(Error::InvalidArgument {
                op,
                msg: format!("rank-2 required, got {s:?}"),
            });
        }
        Ok((s[0], s[1]))
    }

    fn lanes(&self, axis: usize, op: &'static str) -> Result<Lanes> {
        let s = self.shape();
        match s.len() {
            1 => {
                if axis != 0 {
                    return Err(Error::InvalidArgument {
                        op,
                        msg: format!("axis {axis} invalid for rank-1"),
                    });
                }
                if s[0] == 0 {
                    return Err(Error::InvalidArgument {
                        op,
                        msg: "empty axis".into(),
                    });
                }
                Ok(Lanes {
                    count: 1,
                    len: s[0],
                    stride: 1,
                    lane_stride: 0,
                    out_shape: vec![1],
                })
            }
            2 => {
                let (m, n) = (s[0], s[1]);
                if m == 0 || n == 0 {
                    return Err(Error::InvalidArgument {
                        op,
                        msg: "empty axis".into(),
                    });
                }
                if axis == 0 {
                    Ok(Lanes {
                        count: n,
                        len: m,
                        stride: n,
                        lane_stride: 1,
                        out_shape: vec![1, n],
                    })
                } else if axis == 1 {
                    Ok(Lanes {
                        count: m,
                        len: n,
                        stride: 1,
                        lane_stride: n,
                        out_shape: vec![m, 1],
                    })
                } else {
                    Err(Error::InvalidArgument {
                        op,
                        msg: format!("axis {axis} invalid for rank-2"),
                    })
                }
            }
            _ => Err(Error::InvalidArgument {
                op,
                msg: format!("rank ≤ 2 required, got {s:?}"),
            }),
        }
    }
}

#[derive(Clone)]
struct Lanes {
    count: usize,
    len: usize,
    stride: usize,
    lane_stride: usize,
    out_shape: Vec<usize>,
}

impl Lanes {
    #[inline]
    fn at(&self, lane: usize, k: usize) -> usize {
        lane * self.lane_stride + k * self.stride
    }
}

#[derive(Clone, Copy)]
enum AddLike {
    Add,
    Sub,
    Mul,
}

/// Add a contribution into a tensor's gradient buffer (no-op for untracked
/// tensors).
fn accumulate(t: &Tensor, contribution: &[f64]) {
    let mut n = t.0.borrow_mut();
    if !n.track {
        return;
    }
    let len = n.data.len();
    debug_assert_eq!(len, contribution.len());
    let grad = n.grad.get_or_insert_with(|| vec![0.0; len]);
    for (g, &c) in grad.iter_mut().zip(contribution) {
        *g += c;
    }
}

/// Accumulate `f(g[i], i)` into `t`, collapsing to a scalar sum when the
/// operand was broadcast.
fn accumulate_bcast(t: &Tensor, g: &[f64], was_scalar: bool, f: impl Fn(f64, usize) -> f64) {
    if !t.0.borrow().track {
        return;
    }
    if was_scalar && g.len() > 1 {
        let mut s = 0.0;
        for (i, &gi) in g.iter().enumerate() {
            s += f(gi, i);
        }
        accumulate(t, &[s]);
    } else {
        let contrib: Vec<f64> = g.iter().enumerate().map(|(i, &gi)| f(gi, i)).collect();
        accumulate(t, &contrib);
    }
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &ap) in arow.iter().enumerate() {
            let brow = &b[p * n..(p + 1) * n];
            for j in 0..n {
                orow[j] += ap * brow[j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::gradcheck::{finite_diff_grad, max_rel_err};
    use super::*;

    #[test]
    fn sigmoid_at_zero() {
        let x = Tensor::param(&[1], vec![0.0]).unwrap();
        let y = x.sigmoid();
        assert!((y.item() - 0.5).abs() < 1e-15);
        y.backward().unwrap();
        let g = x.grad().unwrap();
        assert!((g[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn add_zero_is_identity() {
        let x = Tensor::from_vec(&[3], vec![1.5, -2.0, 0.25]).unwrap();
        let z = Tensor::zeros(&[3]);
        let y = x.add(&z).unwrap();
        assert_eq!(y.to_vec(), x.to_vec());
    }

    #[test]
    fn scalar_broadcast_both_sides() {
        let x = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let c = Tensor::scalar(10.0);
        assert_eq!(x.add(&c).unwrap().to_vec(), vec![11.0, 12.0, 13.0, 14.0]);
        assert_eq!(c.sub(&x).unwrap().to_vec(), vec![9.0, 8.0, 7.0, 6.0]);
        assert_eq!(c.mul(&x).unwrap().to_vec(), vec![10.0, 20.0, 30.0, 40.0]);
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[3, 3]);
        let err = a.add(&b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[3, 3]"), "{msg}");
    }

    #[test]
    fn matmul_identity_and_hand_case() {
        let eye = Tensor::from_vec(&[3, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
            .unwrap();
        let v = Tensor::from_vec(&[3, 1], vec![2.0, -1.0, 0.5]).unwrap();
        assert_eq!(eye.matmul(&v).unwrap().to_vec(), vec![2.0, -1.0, 0.5]);

        let a = Tensor::from_vec(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = Tensor::from_vec(&[2, 1], vec![1.0, 1.0]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().to_vec(), vec![3.0, 7.0]);
    }

    #[test]
    fn matmul_inner_dim_mismatch() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2, 3]);
        assert!(a.matmul(&b).is_err());
    }

    #[test]
    fn softmax_symmetry_and_normalization() {
        let x = Tensor::from_vec(&[3], vec![0.0, 0.0, 0.0]).unwrap();
        let y = x.softmax(0).unwrap();
        for v in y.to_vec() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let m = Tensor::from_vec(&[2, 3], vec![1.0, -2.0, 0.5, 100.0, 100.0, -100.0]).unwrap();
        let s = m.softmax(1).unwrap().to_vec();
        for row in s.chunks(3) {
            let total: f64 = row.iter().sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn log_sum_exp_single_element_and_naive_oracle() {
        let x = Tensor::from_vec(&[1], vec![-3.7]).unwrap();
        assert!((x.log_sum_exp(0).unwrap().item() + 3.7).abs() < 1e-15);

        let mut rng = Rng::seed_from(5);
        let vals: Vec<f64> = (0..5).map(|_| rng.uniform_in(-4.0, 4.0)).collect();
        let naive = vals.iter().map(|v| v.exp()).sum::<f64>().ln();
        let t = Tensor::from_vec(&[5], vals).unwrap();
        assert!((t.log_sum_exp(0).unwrap().item() - naive).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_handles_neg_infinity() {
        let x = Tensor::from_vec(&[3], vec![f64::NEG_INFINITY, 0.0, f64::NEG_INFINITY]).unwrap();
        assert!((x.log_sum_exp(0).unwrap().item() - 0.0).abs() < 1e-12);
        let all = Tensor::from_vec(&[2], vec![f64::NEG_INFINITY; 2]).unwrap();
        assert_eq!(all.log_sum_exp(0).unwrap().item(), f64::NEG_INFINITY);
    }

    #[test]
    fn dropout_eval_and_rate_zero_are_identity() {
        let mut rng = Rng::seed_from(1);
        let x = Tensor::from_vec(&[4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let e = x.dropout(0.9, Mode::Eval, &mut rng).unwrap();
        assert_eq!(e.to_vec(), x.to_vec());
        let z = x.dropout(0.0, Mode::Train, &mut rng).unwrap();
        assert_eq!(z.to_vec(), x.to_vec());
        assert!(x.dropout(1.0, Mode::Train, &mut rng).is_err());
        assert!(x.dropout(-0.1, Mode::Train, &mut rng).is_err());
    }

    #[test]
    fn dropout_survivor_fraction() {
        let mut rng = Rng::seed_from(77).fork("dropout");
        let n = 100_000;
        let x = Tensor::ones(&[n]);
        let y = x.dropout(0.3, Mode::Train, &mut rng).unwrap();
        let survivors = y.to_vec().iter().filter(|&&v| v != 0.0).count();
        let frac = survivors as f64 / n as f64;
        assert!((frac - 0.7).abs() < 0.01, "survivor fraction {frac}");
        // Survivors are scaled by 1/(1-rate).
        let v = y.to_vec().into_iter().find(|&v| v != 0.0).unwrap();
        assert!((v - 1.0 / 0.7).abs() < 1e-12);
    }

    #[test]
    fn backward_on_scalar_leaf() {
        let x = Tensor::param(&[1], vec![3.0]).unwrap();
        x.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![1.0]);
    }

    #[test]
    fn backward_linear_case() {
        // loss = sum(W·x) → grad(W)[i][j] = x[j]
        let w = Tensor::param(&[2, 3], vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let x = Tensor::from_vec(&[3, 1], vec![2.0, -1.0, 4.0]).unwrap();
        let loss = w.matmul(&x).unwrap().sum_all();
        loss.backward().unwrap();
        assert_eq!(w.grad().unwrap(), vec![2.0, -1.0, 4.0, 2.0, -1.0, 4.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let x = Tensor::param(&[2], vec![1.0, 2.0]).unwrap();
        let y = x.scale(2.0);
        assert!(matches!(y.backward(), Err(Error::NonScalarLoss { .. })));
    }

    #[test]
    fn grads_accumulate_until_zeroed() {
        let x = Tensor::param(&[1], vec![2.0]).unwrap();
        for pass in 1..=3 {
            let loss = x.scale(3.0);
            loss.backward().unwrap();
            assert_eq!(x.grad().unwrap(), vec![3.0 * pass as f64]);
        }
        x.zero_grad();
        assert!(x.grad().is_none());
    }

    #[test]
    fn off_path_parameters_untouched() {
        let used = Tensor::param(&[2], vec![1.0, 2.0]).unwrap();
        let unused = Tensor::param(&[2], vec![5.0, 6.0]).unwrap();
        let loss = used.sum_all();
        loss.backward().unwrap();
        assert!(used.grad().is_some());
        assert!(unused.grad().is_none());
    }

    #[test]
    fn shared_parameter_gets_both_contributions() {
        let p = Tensor::param(&[2], vec![1.0, 2.0]).unwrap();
        let a = p.scale(2.0);
        let b = p.scale(3.0);
        let loss = a.add(&b).unwrap().sum_all();
        loss.backward().unwrap();
        assert_eq!(p.grad().unwrap(), vec![5.0, 5.0]);
    }

    #[test]
    fn tanh_gradient_matches_finite_differences() {
        let mut rng = Rng::seed_from(11);
        let x = Tensor::param(&[4], (0..4).map(|_| rng.uniform_in(-2.0, 2.0)).collect()).unwrap();
        let loss = x.tanh().sum_all();
        loss.backward().unwrap();
        let analytic = x.grad().unwrap();
        let numeric = finite_diff_grad(&x, 1e-5, || x.tanh().sum_all().item());
        assert!(max_rel_err(&analytic, &numeric) < 1e-4);
    }

    #[test]
    fn matmul_gradient_matches_finite_differences() {
        let mut rng = Rng::seed_from(12);
        let a = Tensor::param(&[3, 4], (0..12).map(|_| rng.uniform_in(-1.0, 1.0)).collect())
            .unwrap();
        let b = Tensor::param(&[4, 2], (0..8).map(|_| rng.uniform_in(-1.0, 1.0)).collect())
            .unwrap();
        let loss = a.matmul(&b).unwrap().sum_all();
        loss.backward().unwrap();
        for t in [&a, &b] {
            let analytic = t.grad().unwrap();
            let numeric = finite_diff_grad(t, 1e-5, || a.matmul(&b).unwrap().sum_all().item());
            assert!(max_rel_err(&analytic, &numeric) < 1e-4);
        }
    }

    #[test]
    fn composite_ops_gradients_match_finite_differences() {
        let mut rng = Rng::seed_from(13);
        let x = Tensor::param(&[2, 3], (0..6).map(|_| rng.uniform_in(-1.5, 1.5)).collect())
            .unwrap();
        let forward = |x: &Tensor| -> f64 {
            let s = x.softmax(1).unwrap();
            let l = x.log_sum_exp(0).unwrap();
            let r = x.relu().sum_all();
            let t = x.sigmoid().mul(&x.tanh()).unwrap().sum_all();
            s.sum_all()
                .add(&l.sum_all())
                .unwrap()
                .add(&r)
                .unwrap()
                .add(&t)
                .unwrap()
                .item()
        };
        let s = x.softmax(1).unwrap();
        let l = x.log_sum_exp(0).unwrap();
        let r = x.relu().sum_all();
        let t = x.sigmoid().mul(&x.tanh()).unwrap().sum_all();
        let loss = s
            .sum_all()
            .add(&l.sum_all())
            .unwrap()
            .add(&r)
            .unwrap()
            .add(&t)
            .unwrap();
        loss.backward().unwrap();
        let analytic = x.grad().unwrap();
        let numeric = finite_diff_grad(&x, 1e-5, || forward(&x));
        assert!(max_rel_err(&analytic, &numeric) < 1e-4);
    }

    #[test]
    fn narrow_cat_gather_gradients() {
        let mut rng = Rng::seed_from(14);
        let x = Tensor::param(&[3, 4], (0..12).map(|_| rng.uniform_in(-1.0, 1.0)).collect())
            .unwrap();
        let forward = |x: &Tensor| {
            let a = x.narrow(1, 1, 2).unwrap();
            let b = x.gather_rows(&[2, 0, 2]).unwrap();
            let c = Tensor::cat(&[x.row(0).unwrap(), x.row(2).unwrap()], 0).unwrap();
            let d = x.gather_nd(&[(0, 0), (2, 3), (0, 0)]).unwrap();
            a.sum_all()
                .add(&b.sum_all())
                .unwrap()
                .add(&c.max_axis(1).unwrap().sum_all())
                .unwrap()
                .add(&d.sum_all())
                .unwrap()
        };
        let loss = forward(&x);
        loss.backward().unwrap();
        let analytic = x.grad().unwrap();
        let numeric = finite_diff_grad(&x, 1e-5, || forward(&x).item());
        assert!(max_rel_err(&analytic, &numeric) < 1e-4);
    }

    #[test]
    fn deterministic_forward_backward() {
        let run = || {
            let mut rng = Rng::seed_from(42).fork("det");
            let w = Tensor::uniform(&[4, 4], -0.5, 0.5, &mut rng, true);
            let x = Tensor::uniform(&[1, 4], -1.0, 1.0, &mut rng, false);
            let y = x
                .matmul(&w)
                .unwrap()
                .tanh()
                .dropout(0.5, Mode::Train, &mut rng)
                .unwrap()
                .sum_all();
            y.backward().unwrap();
            (y.item().to_bits(), w.grad().unwrap().iter().map(|g| g.to_bits()).collect::<Vec<_>>())
        };
        assert_eq!(run(), run());
    }
}
