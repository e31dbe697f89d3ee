use alloc::rc::Rc;
use alloc::vec;
use alloc::vec::Vec;

use super::{Input, Tensor};
use crate::error::{Error, Result};
use crate::numeric::{sigmoid, softplus};

pub(crate) enum Op {
    Leaf,
    Binary {
        kind: Binary,
        a: Input,
        b: Input,
    },
    Unary {
        kind: Unary,
        x: Input,
        y: Rc<Vec<f64>>,
    },
    MatMul {
        a: Input,
        b: Input,
    },
    Sum {
        x: Input,
    },
    Mean {
        x: Input,
    },
    SumLast {
        x: Input,
    },
    SliceCols {
        x: Input,
        start: usize,
        end: usize,
    },
    PairwiseSqDist {
        a: Input,
        b: Input,
    },
}

#[derive(Clone, Copy)]
pub(crate) enum Binary {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Copy)]
pub(crate) enum Unary {
    Exp,
    Log,
    Tanh,
    Softplus,
    Square,
    Clamp { lo: f64, hi: f64 },
    Scale(f64),
    AddScalar,
}

/// How a binary elementwise op lines up its operands. Only the leading
/// batch dimension broadcasts.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Layout {
    Same,
    RhsOverBatch,
    LhsOverBatch,
}

fn layout(op: &'static str, a: &[usize], b: &[usize]) -> Result<Layout> {
    if a == b {
        Ok(Layout::Same)
    } else if a.len() == b.len() + 1 && a[1..] == *b {
        Ok(Layout::RhsOverBatch)
    } else if b.len() == a.len() + 1 && b[1..] == *a {
        Ok(Layout::LhsOverBatch)
    } else {
        Err(Error::ShapeMismatch {
            op,
            lhs: a.to_vec(),
            rhs: b.to_vec(),
        })
    }
}

impl Binary {
    fn name(self) -> &'static str {
        match self {
            Binary::Add => "add",
            Binary::Sub => "sub",
            Binary::Mul => "mul",
            Binary::Div => "div",
        }
    }

    fn apply(self, x: f64, y: f64) -> f64 {
        match self {
            Binary::Add => x + y,
            Binary::Sub => x - y,
            Binary::Mul => x * y,
            Binary::Div => x / y,
        }
    }

    /// Partial derivatives `(∂/∂x, ∂/∂y)`.
    fn partials(self, x: f64, y: f64) -> (f64, f64) {
        match self {
            Binary::Add => (1.0, 1.0),
            Binary::Sub => (1.0, -1.0),
            Binary::Mul => (y, x),
            Binary::Div => (1.0 / y, -x / (y * y)),
        }
    }
}

impl Unary {
    fn apply(self, x: f64) -> f64 {
        match self {
            Unary::Exp => libm::exp(x),
            Unary::Log => libm::log(x),
            Unary::Tanh => libm::tanh(x),
            Unary::Softplus => softplus(x),
            Unary::Square => x * x,
            Unary::Clamp { lo, hi } => x.clamp(lo, hi),
            Unary::Scale(c) => c * x,
            Unary::AddScalar => x,
        }
    }

    /// Derivative at input `x` with output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Unary::Exp => y,
            Unary::Log => 1.0 / x,
            Unary::Tanh => 1.0 - y * y,
            Unary::Softplus => sigmoid(x),
            Unary::Square => 2.0 * x,
            Unary::Clamp { lo, hi } => {
                if x >= lo && x <= hi {
                    1.0
                } else {
                    0.0
                }
            }
            Unary::Scale(c) => c,
            Unary::AddScalar => 1.0,
        }
    }
}

/// Row-major `out = op(A)·op(B)` with `op(A)` of shape `[m, k]` and
/// `op(B)` of shape `[k, n]`; `trans_*` reads the stored matrix transposed.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    out: &mut [f64],
) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(out.len(), m * n);
    let (rsa, csa) = if trans_a {
        (1, m as isize)
    } else {
        (k as isize, 1)
    };
    let (rsb, csb) = if trans_b {
        (1, k as isize)
    } else {
        (n as isize, 1)
    };
    // SAFETY: the asserts above bound every index dgemm touches for these
    // dimensions and strides; `out` is exclusively borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            0.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Tensor {
    fn binary(&self, other: &Tensor, kind: Binary) -> Result<Tensor> {
        let lay = layout(kind.name(), &self.shape, &other.shape)?;
        let (a, b) = (&self.values, &other.values);
        let (shape, values) = match lay {
            Layout::Same => (
                self.shape.clone(),
                a.iter()
                    .zip(b.iter())
                    .map(|(&x, &y)| kind.apply(x, y))
                    .collect(),
            ),
            Layout::RhsOverBatch => (
                self.shape.clone(),
                a.iter()
                    .enumerate()
                    .map(|(i, &x)| kind.apply(x, b[i % b.len()]))
                    .collect(),
            ),
            Layout::LhsOverBatch => (
                other.shape.clone(),
                b.iter()
                    .enumerate()
                    .map(|(i, &y)| kind.apply(a[i % a.len()], y))
                    .collect(),
            ),
        };
        Tensor::record(&[self, other], shape, values, |mut ins, _| {
            let b = ins.pop().unwrap();
            let a = ins.pop().unwrap();
            Op::Binary { kind, a, b }
        })
    }

    /// Elementwise sum; `other` may omit this tensor's leading batch dimension
    /// (or vice versa).
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, Binary::Add)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, Binary::Sub)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, Binary::Mul)
    }

    pub fn div(&self, other: &Tensor) -> Result<Tensor> {
        self.binary(other, Binary::Div)
    }

    fn unary(&self, kind: Unary) -> Result<Tensor> {
        let values = self.values.iter().map(|&x| kind.apply(x)).collect();
        Tensor::record(&[self], self.shape.clone(), values, |mut ins, y| {
            Op::Unary {
                y: Rc::clone(y),
                kind,
                x: ins.pop().unwrap(),
            }
        })
    }

    pub fn exp(&self) -> Result<Tensor> {
        self.unary(Unary::Exp)
    }

    pub fn log(&self) -> Result<Tensor> {
        self.unary(Unary::Log)
    }

    pub fn tanh(&self) -> Result<Tensor> {
        self.unary(Unary::Tanh)
    }

    /// `log(1 + e^x)`.
    pub fn softplus(&self) -> Result<Tensor> {
        self.unary(Unary::Softplus)
    }

    pub fn square(&self) -> Result<Tensor> {
        self.unary(Unary::Square)
    }

    /// Clamps into `[lo, hi]`; the gradient is zero outside the interval.
    pub fn clamp(&self, lo: f64, hi: f64) -> Result<Tensor> {
        self.unary(Unary::Clamp { lo, hi })
    }

    pub fn scale(&self, c: f64) -> Result<Tensor> {
        self.unary(Unary::Scale(c))
    }

    pub fn neg(&self) -> Result<Tensor> {
        self.scale(-1.0)
    }

    pub fn add_scalar(&self, c: f64) -> Result<Tensor> {
        let values = self.values.iter().map(|&x| x + c).collect();
        Tensor::record(&[self], self.shape.clone(), values, |mut ins, y| {
            Op::Unary {
                y: Rc::clone(y),
                kind: Unary::AddScalar,
                x: ins.pop().unwrap(),
            }
        })
    }

    /// `[m, k] × [k, n] → [m, n]`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape.len() != 2 || other.shape.len() != 2 || self.shape[1] != other.shape[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let (m, k, n) = (self.shape[0], self.shape[1], other.shape[1]);
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, &self.values, false, &other.values, false, &mut out);
        Tensor::record(&[self, other], vec![m, n], out, |mut ins, _| {
            let b = ins.pop().unwrap();
            let a = ins.pop().unwrap();
            Op::MatMul { a, b }
        })
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&self) -> Result<Tensor> {
        let s = self.values.iter().sum();
        Tensor::record(&[self], Vec::new(), vec![s], |mut ins, _| Op::Sum {
            x: ins.pop().unwrap(),
        })
    }

    pub fn mean(&self) -> Result<Tensor> {
        let s: f64 = self.values.iter().sum();
        let m = s / self.values.len() as f64;
        Tensor::record(&[self], Vec::new(), vec![m], |mut ins, _| Op::Mean {
            x: ins.pop().unwrap(),
        })
    }

    /// Sums over the last axis: `[.., d] → [..]`.
    pub fn sum_last(&self) -> Result<Tensor> {
        let Some((&d, outer)) = self.shape.split_last() else {
            return Err(Error::ShapeMismatch {
                op: "sum_last",
                lhs: self.shape.clone(),
                rhs: Vec::new(),
            });
        };
        let values = self.values.chunks(d).map(|c| c.iter().sum()).collect();
        Tensor::record(&[self], outer.to_vec(), values, |mut ins, _| Op::SumLast {
            x: ins.pop().unwrap(),
        })
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&self, start: usize, end: usize) -> Result<Tensor> {
        if self.shape.len() != 2 || start >= end || end > self.shape[1] {
            return Err(Error::ShapeMismatch {
                op: "slice_cols",
                lhs: self.shape.clone(),
                rhs: vec![start, end],
            });
        }
        let (rows, cols) = (self.shape[0], self.shape[1]);
        let mut values = Vec::with_capacity(rows * (end - start));
        for r in 0..rows {
            values.extend_from_slice(&self.values[r * cols + start..r * cols + end]);
        }
        Tensor::record(&[self], vec![rows, end - start], values, |mut ins, _| {
            Op::SliceCols {
                x: ins.pop().unwrap(),
                start,
                end,
            }
        })
    }

    /// Squared Euclidean distances between rows: `[n, d], [m, d] → [n, m]`.
    pub fn pairwise_sq_dist(&self, other: &Tensor) -> Result<Tensor> {
        if self.shape.len() != 2 || other.shape.len() != 2 || self.shape[1] != other.shape[1] {
            return Err(Error::ShapeMismatch {
                op: "pairwise_sq_dist",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let (n, m, d) = (self.shape[0], other.shape[0], self.shape[1]);
        let mut out = Vec::with_capacity(n * m);
        for i in 0..n {
            let a = &self.values[i * d..(i + 1) * d];
            for j in 0..m {
                let b = &other.values[j * d..(j + 1) * d];
                out.push(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum());
            }
        }
        Tensor::record(&[self, other], vec![n, m], out, |mut ins, _| {
            let b = ins.pop().unwrap();
            let a = ins.pop().unwrap();
            Op::PairwiseSqDist { a, b }
        })
    }
}

/// Pushes the contribution of output gradient `g` to each operand of `op`.
pub(crate) fn propagate(op: &Op, g: &[f64], emit: &mut dyn FnMut(&Input, Vec<f64>)) {
    match op {
        Op::Leaf => {}
        Op::Binary { kind, a, b } => {
            let lay = layout(kind.name(), &a.shape, &b.shape).expect("validated in forward");
            let (av, bv) = (&a.values, &b.values);
            let mut ga = vec![0.0; av.len()];
            let mut gb = vec![0.0; bv.len()];
            for (i, &gi) in g.iter().enumerate() {
                let (ia, ib) = match lay {
                    Layout::Same => (i, i),
                    Layout::RhsOverBatch => (i, i % bv.len()),
                    Layout::LhsOverBatch => (i % av.len(), i),
                };
                let (da, db) = kind.partials(av[ia], bv[ib]);
                ga[ia] += gi * da;
                gb[ib] += gi * db;
            }
            if a.id.is_some() {
                emit(a, ga);
            }
            if b.id.is_some() {
                emit(b, gb);
            }
        }
        Op::Unary { kind, x, y } => {
            if x.id.is_some() {
                let gx = x
                    .values
                    .iter()
                    .zip(y.iter())
                    .zip(g)
                    .map(|((&xi, &yi), &gi)| gi * kind.derivative(xi, yi))
                    .collect();
                emit(x, gx);
            }
        }
        Op::MatMul { a, b } => {
            let (m, k, n) = (a.shape[0], a.shape[1], b.shape[1]);
            if a.id.is_some() {
                // dA = G · Bᵀ
                let mut ga = vec![0.0; m * k];
                gemm(m, n, k, g, false, &b.values, true, &mut ga);
                emit(a, ga);
            }
            if b.id.is_some() {
                // dB = Aᵀ · G
                let mut gb = vec![0.0; k * n];
                gemm(k, m, n, &a.values, true, g, false, &mut gb);
                emit(b, gb);
            }
        }
        Op::Sum { x } => {
            if x.id.is_some() {
                emit(x, vec![g[0]; x.values.len()]);
            }
        }
        Op::Mean { x } => {
            if x.id.is_some() {
                let n = x.values.len() as f64;
                emit(x, vec![g[0] / n; x.values.len()]);
            }
        }
        Op::SumLast { x } => {
            if x.id.is_some() {
                let d = *x.shape.last().unwrap();
                let gx = (0..x.values.len()).map(|i| g[i / d]).collect();
                emit(x, gx);
            }
        }
        Op::SliceCols { x, start, end } => {
            if x.id.is_some() {
                let cols = x.shape[1];
                let w = end - start;
                let mut gx = vec![0.0; x.values.len()];
                for (r, chunk) in g.chunks(w).enumerate() {
                    gx[r * cols + start..r * cols + end].copy_from_slice(chunk);
                }
                emit(x, gx);
            }
        }
        Op::PairwiseSqDist { a, b } => {
            let (n, m, d) = (a.shape[0], b.shape[0], a.shape[1]);
            let mut ga = vec![0.0; n * d];
            let mut gb = vec![0.0; m * d];
            for i in 0..n {
                for j in 0..m {
                    let gij = g[i * m + j];
                    if gij == 0.0 {
                        continue;
                    }
                    for t in 0..d {
                        let diff = 2.0 * gij * (a.values[i * d + t] - b.values[j * d + t]);
                        ga[i * d + t] += diff;
                        gb[j * d + t] -= diff;
                    }
                }
            }
            if a.id.is_some() {
                emit(a, ga);
            }
            if b.id.is_some() {
                emit(b, gb);
            }
        }
    }
}
