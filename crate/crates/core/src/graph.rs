//! Tape-based reverse-mode automatic differentiation over dense tensors.
//!
//! A [`Tape`] records the forward pass as a flat list of nodes; `backward`
//! walks the list in reverse and accumulates gradients into every node that
//! requires them. Each training step builds a fresh tape, so the engine is a
//! dynamic define-by-run graph.

use alloc::vec::Vec;
use num_traits::Float;

use crate::error::Error;
use crate::tensor::Tensor;
use crate::Result;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// `[n,m] x [m,p] -> [n,p]`
    MatMul(Var, Var),
    /// Broadcast-add a `[m]` row vector to every row of `[n,m]`.
    AddRow(Var, Var),
    /// Broadcast-add a `[c]` vector to every channel of `[n,c,h,w]`.
    AddChan(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    /// Extract one element as a `[1]` scalar.
    Index(Var, usize),
    Relu(Var),
    /// Direct convolution, stride 1, zero padding.
    Conv2d { input: Var, kernel: Var, pad: usize },
    Reshape(Var),
    SoftmaxRows(Var),
    /// Mean soft-label cross-entropy between `[n,k]` logits and fixed targets.
    CrossEntropy { logits: Var, targets: Tensor },
    /// Biased MMD^2 V-statistic with a Gaussian kernel of fixed bandwidth.
    Mmd2 { a: Var, b: Var, bandwidth: f64 },
}

struct Node {
    value: Tensor,
    grad: Option<Tensor>,
    op: Op,
    requires: bool,
}

/// A recording of one forward pass.
pub struct Tape {
    nodes: Vec<Node>,
    ran_backward: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), ran_backward: false }
    }

    fn push(&mut self, value: Tensor, op: Op, requires: bool) -> Var {
        self.nodes.push(Node { value, grad: None, op, requires });
        Var(self.nodes.len() - 1)
    }

    fn requires(&self, v: Var) -> bool {
        self.nodes[v.0].requires
    }

    /// Insert a leaf tensor. Gradients are accumulated only if `requires_grad`.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// Insert a constant (no gradient tracking).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` target with respect to `v`.
    pub fn grad(&self, v: Var) -> Result<&Tensor> {
        if !self.ran_backward {
            return Err(Error::State("backward has not been run on this tape"));
        }
        self.nodes[v.0]
            .grad
            .as_ref()
            .ok_or(Error::State("node does not track gradients"))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::ShapeMismatch { expected: sa.to_vec(), got: sb.to_vec() });
        }
        let (n, m, p) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; n * p];
        let (da, db) = (self.value(a).data(), self.value(b).data());
        for i in 0..n {
            for l in 0..m {
                let ail = da[i * m + l];
                if ail == 0.0 {
                    continue;
                }
                for j in 0..p {
                    out[i * p + j] += ail * db[l * p + j];
                }
            }
        }
        let req = self.requires(a) || self.requires(b);
        Ok(self.push(Tensor::new(vec![n, p], out)?, Op::MatMul(a, b), req))
    }

    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(bias).shape());
        if sa.len() != 2 || sb.len() != 1 || sa[1] != sb[0] {
            return Err(Error::ShapeMismatch { expected: sa.to_vec(), got: sb.to_vec() });
        }
        let m = sa[1];
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v + self.value(bias).data()[i % m])
            .collect();
        let req = self.requires(a) || self.requires(bias);
        Ok(self.push(Tensor::new(sa.to_vec(), data)?, Op::AddRow(a, bias), req))
    }

    pub fn add_chan(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(bias).shape());
        if sa.len() != 4 || sb.len() != 1 || sa[1] != sb[0] {
            return Err(Error::ShapeMismatch { expected: sa.to_vec(), got: sb.to_vec() });
        }
        let (c, h, w) = (sa[1], sa[2], sa[3]);
        let plane = h * w;
        let data: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v + self.value(bias).data()[(i / plane) % c])
            .collect();
        let req = self.requires(a) || self.requires(bias);
        Ok(self.push(Tensor::new(sa.to_vec(), data)?, Op::AddChan(a, bias), req))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::ShapeMismatch {
                expected: self.value(a).shape().to_vec(),
                got: self.value(b).shape().to_vec(),
            });
        }
        let data: Vec<f64> =
            self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x + y).collect();
        let shape = self.value(a).shape().to_vec();
        let req = self.requires(a) || self.requires(b);
        Ok(self.push(Tensor::new(shape, data)?, Op::Add(a, b), req))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::ShapeMismatch {
                expected: self.value(a).shape().to_vec(),
                got: self.value(b).shape().to_vec(),
            });
        }
        let data: Vec<f64> =
            self.value(a).data().iter().zip(self.value(b).data()).map(|(x, y)| x * y).collect();
        let shape = self.value(a).shape().to_vec();
        let req = self.requires(a) || self.requires(b);
        Ok(self.push(Tensor::new(shape, data)?, Op::Mul(a, b), req))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let data: Vec<f64> = self.value(a).data().iter().map(|v| v * c).collect();
        let shape = self.value(a).shape().to_vec();
        let req = self.requires(a);
        self.push(Tensor::new(shape, data).expect("same shape"), Op::Scale(a, c), req)
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let data: Vec<f64> = self.value(a).data().iter().map(|v| v + c).collect();
        let shape = self.value(a).shape().to_vec();
        let req = self.requires(a);
        self.push(Tensor::new(shape, data).expect("same shape"), Op::AddConst(a), req)
    }

    pub fn index(&mut self, a: Var, idx: usize) -> Result<Var> {
        let len = self.value(a).numel();
        if idx >= len {
            return Err(Error::Index { index: idx, len });
        }
        let v = self.value(a).data()[idx];
        let req = self.requires(a);
        Ok(self.push(Tensor::scalar(v), Op::Index(a, idx), req))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let data: Vec<f64> = self.value(a).data().iter().map(|v| v.max(0.0)).collect();
        let shape = self.value(a).shape().to_vec();
        let req = self.requires(a);
        self.push(Tensor::new(shape, data).expect("same shape"), Op::Relu(a), req)
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let t = self.value(a).reshaped(shape)?;
        let req = self.requires(a);
        Ok(self.push(t, Op::Reshape(a), req))
    }

    /// Stride-1 zero-padded convolution: `[n,ci,h,w] * [co,ci,kh,kw]`.
    pub fn conv2d(&mut self, input: Var, kernel: Var, pad: usize) -> Result<Var> {
        let (si, sk) = (self.value(input).shape(), self.value(kernel).shape());
        if si.len() != 4 || sk.len() != 4 || si[1] != sk[1] {
            return Err(Error::ShapeMismatch { expected: si.to_vec(), got: sk.to_vec() });
        }
        let (n, ci, h, w) = (si[0], si[1], si[2], si[3]);
        let (co, _, kh, kw) = (sk[0], sk[1], sk[2], sk[3]);
        if h + 2 * pad < kh || w + 2 * pad < kw {
            return Err(Error::invalid("convolution kernel larger than padded input"));
        }
        let (oh, ow) = (h + 2 * pad - kh + 1, w + 2 * pad - kw + 1);
        let mut out = vec![0.0; n * co * oh * ow];
        let din = self.value(input).data();
        let dk = self.value(kernel).data();
        for b in 0..n {
            for oc in 0..co {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = 0.0;
                        for icn in 0..ci {
                            for ky in 0..kh {
                                let iy = (oy + ky) as isize - pad as isize;
                                if iy < 0 || iy >= h as isize {
                                    continue;
                                }
                                for kx in 0..kw {
                                    let ix = (ox + kx) as isize - pad as isize;
                                    if ix < 0 || ix >= w as isize {
                                        continue;
                                    }
                                    let ii = ((b * ci + icn) * h + iy as usize) * w + ix as usize;
                                    let ki = ((oc * ci + icn) * kh + ky) * kw + kx;
                                    acc += din[ii] * dk[ki];
                                }
                            }
                        }
                        out[((b * co + oc) * oh + oy) * ow + ox] = acc;
                    }
                }
            }
        }
        let req = self.requires(input) || self.requires(kernel);
        Ok(self.push(
            Tensor::new(vec![n, co, oh, ow], out)?,
            Op::Conv2d { input, kernel, pad },
            req,
        ))
    }

    /// Row-wise softmax of a `[n,k]` matrix, with max subtraction.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let sa = self.value(a).shape();
        if sa.len() != 2 {
            return Err(Error::ShapeMismatch { expected: vec![0, 0], got: sa.to_vec() });
        }
        let (n, k) = (sa[0], sa[1]);
        let din = self.value(a).data();
        let mut out = vec![0.0; n * k];
        for r in 0..n {
            let row = &din[r * k..(r + 1) * k];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (j, &z) in row.iter().enumerate() {
                let e = Float::exp(z - max);
                out[r * k + j] = e;
                sum += e;
            }
            for j in 0..k {
                out[r * k + j] /= sum;
            }
        }
        let req = self.requires(a);
        Ok(self.push(Tensor::new(vec![n, k], out)?, Op::SoftmaxRows(a), req))
    }

    /// Mean cross-entropy between logits and fixed soft-label targets.
    pub fn cross_entropy(&mut self, logits: Var, targets: Tensor) -> Result<Var> {
        let sl = self.value(logits).shape();
        if sl != targets.shape() {
            return Err(Error::ShapeMismatch {
                expected: sl.to_vec(),
                got: targets.shape().to_vec(),
            });
        }
        let (n, k) = (sl[0], sl[1]);
        let dz = self.value(logits).data();
        let dt = targets.data();
        let mut loss = 0.0;
        for r in 0..n {
            let row = &dz[r * k..(r + 1) * k];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = Float::ln(row.iter().map(|&z| Float::exp(z - max)).sum::<f64>()) + max;
            for j in 0..k {
                loss -= dt[r * k + j] * (row[j] - lse);
            }
        }
        loss /= n as f64;
        let req = self.requires(logits);
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy { logits, targets }, req))
    }

    /// Biased MMD^2 between two posterior sets with Gaussian kernel
    /// `k(x,y) = exp(-|x-y|^2 / (2 h^2))`.
    pub fn mmd2(&mut self, a: Var, b: Var, bandwidth: f64) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[1] {
            return Err(Error::ShapeMismatch { expected: sa.to_vec(), got: sb.to_vec() });
        }
        if bandwidth <= 0.0 {
            return Err(Error::invalid("MMD bandwidth must be positive"));
        }
        let v = mmd2_value(self.value(a), self.value(b), bandwidth);
        let req = self.requires(a) || self.requires(b);
        Ok(self.push(Tensor::scalar(v), Op::Mmd2 { a, b, bandwidth }, req))
    }

    /// Run reverse-mode accumulation from a scalar loss node.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.ran_backward {
            return Err(Error::State("backward already run on this tape"));
        }
        if self.value(loss).numel() != 1 {
            return Err(Error::invalid("backward target must be a scalar"));
        }
        for node in &mut self.nodes {
            if node.requires {
                node.grad = Some(Tensor::zeros(node.value.shape().to_vec()));
            }
        }
        if self.nodes[loss.0].requires {
            self.nodes[loss.0].grad.as_mut().expect("allocated").data_mut()[0] = 1.0;
        }
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires {
                continue;
            }
            let op = self.nodes[i].op.clone();
            let out_grad = match self.nodes[i].grad.as_ref() {
                Some(g) => g.clone(),
                None => continue,
            };
            self.backprop_one(i, &op, &out_grad);
        }
        self.ran_backward = true;
        Ok(())
    }

    fn accum(&mut self, v: Var, delta: &[f64]) {
        if !self.nodes[v.0].requires {
            return;
        }
        let g = self.nodes[v.0].grad.as_mut().expect("allocated").data_mut();
        for (gi, di) in g.iter_mut().zip(delta) {
            *gi += di;
        }
    }

    fn backprop_one(&mut self, node: usize, op: &Op, out_grad: &Tensor) {
        let og = out_grad.data();
        match *op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let sa = self.value(a).shape().to_vec();
                let sb = self.value(b).shape().to_vec();
                let (n, m, p) = (sa[0], sa[1], sb[1]);
                let da = self.value(a).data().to_vec();
                let db = self.value(b).data().to_vec();
                if self.requires(a) {
                    // dA = dC * B^T
                    let mut ga = vec![0.0; n * m];
                    for i in 0..n {
                        for j in 0..p {
                            let g = og[i * p + j];
                            if g == 0.0 {
                                continue;
                            }
                            for l in 0..m {
                                ga[i * m + l] += g * db[l * p + j];
                            }
                        }
                    }
                    self.accum(a, &ga);
                }
                if self.requires(b) {
                    // dB = A^T * dC
                    let mut gb = vec![0.0; m * p];
                    for i in 0..n {
                        for l in 0..m {
                            let av = da[i * m + l];
                            if av == 0.0 {
                                continue;
                            }
                            for j in 0..p {
                                gb[l * p + j] += av * og[i * p + j];
                            }
                        }
                    }
                    self.accum(b, &gb);
                }
            }
            Op::AddRow(a, bias) => {
                self.accum(a, og);
                if self.requires(bias) {
                    let m = self.value(bias).numel();
                    let mut gb = vec![0.0; m];
                    for (i, g) in og.iter().enumerate() {
                        gb[i % m] += g;
                    }
                    self.accum(bias, &gb);
                }
            }
            Op::AddChan(a, bias) => {
                self.accum(a, og);
                if self.requires(bias) {
                    let sa = self.value(a).shape();
                    let (c, plane) = (sa[1], sa[2] * sa[3]);
                    let mut gb = vec![0.0; c];
                    for (i, g) in og.iter().enumerate() {
                        gb[(i / plane) % c] += g;
                    }
                    self.accum(bias, &gb);
                }
            }
            Op::Add(a, b) => {
                self.accum(a, og);
                self.accum(b, og);
            }
            Op::Mul(a, b) => {
                if self.requires(a) {
                    let d: Vec<f64> =
                        og.iter().zip(self.value(b).data()).map(|(g, y)| g * y).collect();
                    self.accum(a, &d);
                }
                if self.requires(b) {
                    let d: Vec<f64> =
                        og.iter().zip(self.value(a).data()).map(|(g, x)| g * x).collect();
                    self.accum(b, &d);
                }
            }
            Op::Scale(a, c) => {
                let d: Vec<f64> = og.iter().map(|g| g * c).collect();
                self.accum(a, &d);
            }
            Op::AddConst(a) => self.accum(a, og),
            Op::Index(a, idx) => {
                if self.requires(a) {
                    let mut d = vec![0.0; self.value(a).numel()];
                    d[idx] = og[0];
                    self.accum(a, &d);
                }
            }
            Op::Relu(a) => {
                let d: Vec<f64> = og
                    .iter()
                    .zip(self.value(a).data())
                    .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
                    .collect();
                self.accum(a, &d);
            }
            Op::Reshape(a) => self.accum(a, og),
            Op::Conv2d { input, kernel, pad } => {
                let si = self.value(input).shape().to_vec();
                let sk = self.value(kernel).shape().to_vec();
                let (n, ci, h, w) = (si[0], si[1], si[2], si[3]);
                let (co, _, kh, kw) = (sk[0], sk[1], sk[2], sk[3]);
                let (oh, ow) = (h + 2 * pad - kh + 1, w + 2 * pad - kw + 1);
                let din = self.value(input).data().to_vec();
                let dk = self.value(kernel).data().to_vec();
                let mut gin = vec![0.0; din.len()];
                let mut gk = vec![0.0; dk.len()];
                for b in 0..n {
                    for oc in 0..co {
                        for oy in 0..oh {
                            for ox in 0..ow {
                                let g = og[((b * co + oc) * oh + oy) * ow + ox];
                                if g == 0.0 {
                                    continue;
                                }
                                for icn in 0..ci {
                                    for ky in 0..kh {
                                        let iy = (oy + ky) as isize - pad as isize;
                                        if iy < 0 || iy >= h as isize {
                                            continue;
                                        }
                                        for kx in 0..kw {
                                            let ix = (ox + kx) as isize - pad as isize;
                                            if ix < 0 || ix >= w as isize {
                                                continue;
                                            }
                                            let ii = ((b * ci + icn) * h + iy as usize) * w
                                                + ix as usize;
                                            let ki = ((oc * ci + icn) * kh + ky) * kw + kx;
                                            gin[ii] += g * dk[ki];
                                            gk[ki] += g * din[ii];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                self.accum(input, &gin);
                self.accum(kernel, &gk);
            }
            Op::SoftmaxRows(a) => {
                let s = self.nodes[node].value.clone();
                let (n, k) = (s.shape()[0], s.shape()[1]);
                let sd = s.data();
                let mut d = vec![0.0; n * k];
                for r in 0..n {
                    let dot: f64 =
                        (0..k).map(|j| og[r * k + j] * sd[r * k + j]).sum();
                    for j in 0..k {
                        d[r * k + j] = sd[r * k + j] * (og[r * k + j] - dot);
                    }
                }
                self.accum(a, &d);
            }
            Op::CrossEntropy { logits, ref targets } => {
                let sl = self.value(logits).shape().to_vec();
                let (n, k) = (sl[0], sl[1]);
                let dz = self.value(logits).data().to_vec();
                let dt = targets.data();
                let scale = og[0] / n as f64;
                let mut d = vec![0.0; n * k];
                for r in 0..n {
                    let row = &dz[r * k..(r + 1) * k];
                    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let sum: f64 = row.iter().map(|&z| Float::exp(z - max)).sum();
                    for j in 0..k {
                        let soft = Float::exp(row[j] - max) / sum;
                        d[r * k + j] = scale * (soft - dt[r * k + j]);
                    }
                }
                self.accum(logits, &d);
            }
            Op::Mmd2 { a, b, bandwidth } => {
                let g = og[0];
                let (ga, gb) = mmd2_grads(self.value(a), self.value(b), bandwidth);
                let da: Vec<f64> = ga.iter().map(|v| v * g).collect();
                let db: Vec<f64> = gb.iter().map(|v| v * g).collect();
                self.accum(a, &da);
                self.accum(b, &db);
            }
        }
    }
}

/// Gaussian kernel value between two rows.
fn gauss(a: &[f64], b: &[f64], h: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Float::exp(-d2 / (2.0 * h * h))
}

fn row(d: &[f64], i: usize, k: usize) -> &[f64] {
    &d[i * k..(i + 1) * k]
}

/// Plain (non-autodiff) biased MMD^2 V-statistic between two `[n,k]` sets.
pub(crate) fn mmd2_value(a: &Tensor, b: &Tensor, h: f64) -> f64 {
    let k = a.shape()[1];
    let (n, m) = (a.shape()[0], b.shape()[0]);
    let (da, db) = (a.data(), b.data());
    let mut saa = 0.0;
    for i in 0..n {
        for j in 0..n {
            saa += gauss(row(da, i, k), row(da, j, k), h);
        }
    }
    let mut sbb = 0.0;
    for i in 0..m {
        for j in 0..m {
            sbb += gauss(row(db, i, k), row(db, j, k), h);
        }
    }
    let mut sab = 0.0;
    for i in 0..n {
        for j in 0..m {
            sab += gauss(row(da, i, k), row(db, j, k), h);
        }
    }
    saa / (n * n) as f64 + sbb / (m * m) as f64 - 2.0 * sab / (n * m) as f64
}

fn mmd2_grads(a: &Tensor, b: &Tensor, h: f64) -> (Vec<f64>, Vec<f64>) {
    let k = a.shape()[1];
    let (n, m) = (a.shape()[0], b.shape()[0]);
    let (da, db) = (a.data(), b.data());
    let h2 = h * h;
    let mut ga = vec![0.0; da.len()];
    let mut gb = vec![0.0; db.len()];
    for r in 0..n {
        let ar = row(da, r, k);
        for j in 0..n {
            let kv = gauss(ar, row(da, j, k), h);
            let c = -2.0 / (n * n) as f64 * kv / h2;
            for t in 0..k {
                ga[r * k + t] += c * (ar[t] - da[j * k + t]);
            }
        }
        for j in 0..m {
            let kv = gauss(ar, row(db, j, k), h);
            let c = 2.0 / (n * m) as f64 * kv / h2;
            for t in 0..k {
                ga[r * k + t] += c * (ar[t] - db[j * k + t]);
            }
        }
    }
    for s in 0..m {
        let bs = row(db, s, k);
        for j in 0..m {
            let kv = gauss(bs, row(db, j, k), h);
            let c = -2.0 / (m * m) as f64 * kv / h2;
            for t in 0..k {
                gb[s * k + t] += c * (bs[t] - db[j * k + t]);
            }
        }
        for i in 0..n {
            let kv = gauss(bs, row(da, i, k), h);
            let c = 2.0 / (n * m) as f64 * kv / h2;
            for t in 0..k {
                gb[s * k + t] += c * (bs[t] - da[i * k + t]);
            }
        }
    }
    (ga, gb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        // f(w) = w^2 at w=3 -> df/dw = 6
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::scalar(3.0), true);
        let f = tape.mul(w, w).unwrap();
        tape.backward(f).unwrap();
        assert_eq!(tape.grad(w).unwrap().data()[0], 6.0);
    }

    #[test]
    fn constant_gradient_is_zero() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::scalar(2.0), true);
        let c = tape.constant(Tensor::scalar(5.0));
        let f = tape.add_const(c, 0.0);
        // loss does not depend on w at all
        tape.backward(f).unwrap();
        assert_eq!(tape.grad(w).unwrap().data()[0], 0.0);
    }

    #[test]
    fn backward_before_forward_is_state_error() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::scalar(1.0), true);
        assert!(matches!(tape.grad(w), Err(Error::State(_))));
    }

    #[test]
    fn backward_requires_scalar() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::from_vec(vec![1.0, 2.0]), true);
        assert!(tape.backward(w).is_err());
    }

    #[test]
    fn double_backward_rejected() {
        let mut tape = Tape::new();
        let w = tape.leaf(Tensor::scalar(1.0), true);
        let f = tape.mul(w, w).unwrap();
        tape.backward(f).unwrap();
        assert!(matches!(tape.backward(f), Err(Error::State(_))));
    }

    #[test]
    fn matmul_shapes_checked() {
        let mut tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(vec![2, 3]), true);
        let b = tape.leaf(Tensor::zeros(vec![4, 2]), true);
        assert!(tape.matmul(a, b).is_err());
    }

    #[test]
    fn mmd_two_point_closed_form() {
        // A = {[1,0]}, B = {[0,1]}, h = 1 -> 2 (1 - e^{-1})
        let a = Tensor::new(vec![1, 2], vec![1.0, 0.0]).unwrap();
        let b = Tensor::new(vec![1, 2], vec![0.0, 1.0]).unwrap();
        let v = mmd2_value(&a, &b, 1.0);
        assert!((v - 1.2642411176571153).abs() < 1e-12);
    }
}
