//! Define-by-run reverse-mode automatic differentiation over dense `f64`
//! tensors.
//!
//! A [`Tape`] records every operation whose inputs include a tape-attached
//! tensor. Tensors that are not attached behave as constants, so the same
//! forward code serves both training (with a fresh tape per step) and plain
//! evaluation (no tape at all).
//!
//! ```
//! use infovae_core::{backward, Tape, Tensor};
//!
//! let tape = Tape::new();
//! let x = tape.leaf(&Tensor::scalar(3.0));
//! let y = x.square().unwrap().sum().unwrap();
//! let grads = backward(&y).unwrap();
//! assert_eq!(grads.wrt(&x).item(), 6.0);
//! ```

mod check;
mod ops;

use alloc::rc::Rc;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;
use core::fmt;

use crate::error::{Error, Result};

pub use check::grad_check;

/// Dense row-major tensor, optionally attached to a [`Tape`].
#[derive(Clone)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Rc<Vec<f64>>,
    node: Option<Node>,
}

#[derive(Clone)]
struct Node {
    tape: Tape,
    id: usize,
}

/// Operation record list. Cheap to clone; clones share the same records.
#[derive(Clone, Default)]
pub struct Tape {
    records: Rc<RefCell<Vec<Record>>>,
}

struct Record {
    len: usize,
    op: ops::Op,
}

/// Snapshot of an operand as seen by the backward pass.
#[derive(Clone)]
pub(crate) struct Input {
    id: Option<usize>,
    shape: Vec<usize>,
    values: Rc<Vec<f64>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.records.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Attaches a copy of `t` to this tape as a leaf.
    pub fn leaf(&self, t: &Tensor) -> Tensor {
        let id = self.push(t.values.len(), ops::Op::Leaf);
        Tensor {
            shape: t.shape.clone(),
            values: Rc::clone(&t.values),
            node: Some(Node {
                tape: self.clone(),
                id,
            }),
        }
    }

    fn push(&self, len: usize, op: ops::Op) -> usize {
        let mut records = self.records.borrow_mut();
        records.push(Record { len, op });
        records.len() - 1
    }

    fn same(&self, other: &Tape) -> bool {
        Rc::ptr_eq(&self.records, &other.records)
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != values.len() || shape.contains(&0) {
            return Err(Error::ShapeMismatch {
                op: "tensor",
                lhs: shape,
                rhs: vec![values.len()],
            });
        }
        Ok(Self::from_parts(shape, values))
    }

    /// Mutable values of a detached tensor, copied first if shared.
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        self.node = None;
        Rc::make_mut(&mut self.values).as_mut_slice()
    }

    pub(crate) fn from_parts(shape: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        Tensor {
            shape,
            values: Rc::new(values),
            node: None,
        }
    }

    pub fn scalar(v: f64) -> Self {
        Self::from_parts(Vec::new(), vec![v])
    }

    pub fn vector(values: Vec<f64>) -> Self {
        let n = values.len();
        Self::from_parts(vec![n], values)
    }

    pub fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], values)
    }

    /// Stacks equal-length rows into a `[rows, cols]` matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::Empty("from_rows"))?;
        let cols = first.as_ref().len();
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::ShapeMismatch {
                    op: "from_rows",
                    lhs: vec![cols],
                    rhs: vec![r.len()],
                });
            }
            values.extend_from_slice(r);
        }
        Self::new(vec![rows.len(), cols], values)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self::from_parts(shape.to_vec(), vec![0.0; n])
    }

    pub fn full(shape: &[usize], v: f64) -> Self {
        let n = shape.iter().product();
        Self::from_parts(shape.to_vec(), vec![v; n])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// First element; the value of a scalar tensor.
    pub fn item(&self) -> f64 {
        self.values[0]
    }

    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    /// Trailing extent for a matrix; 1 for vectors and scalars.
    pub fn cols(&self) -> usize {
        if self.shape.len() >= 2 {
            self.shape[1..].iter().product()
        } else {
            1
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.cols())
    }

    pub fn is_attached(&self) -> bool {
        self.node.is_some()
    }

    /// A constant copy that the backward pass does not see through.
    pub fn detach(&self) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            values: Rc::clone(&self.values),
            node: None,
        }
    }

    pub fn into_values(self) -> Vec<f64> {
        Rc::try_unwrap(self.values).unwrap_or_else(|rc| (*rc).clone())
    }

    fn as_input(&self) -> Input {
        Input {
            id: self.node.as_ref().map(|n| n.id),
            shape: self.shape.clone(),
            values: Rc::clone(&self.values),
        }
    }

    /// Builds the result of an op, recording it when any operand is attached.
    fn record<F>(inputs: &[&Tensor], shape: Vec<usize>, values: Vec<f64>, op: F) -> Result<Tensor>
    where
        F: FnOnce(Vec<Input>, &Rc<Vec<f64>>) -> ops::Op,
    {
        let mut tape: Option<&Tape> = None;
        for t in inputs {
            if let Some(node) = &t.node {
                match tape {
                    None => tape = Some(&node.tape),
                    Some(existing) if !existing.same(&node.tape) => {
                        return Err(Error::TapeMismatch)
                    }
                    Some(_) => {}
                }
            }
        }
        let values = Rc::new(values);
        let node = tape.map(|tape| {
            let len = values.len();
            let op = op(inputs.iter().map(|t| t.as_input()).collect(), &values);
            Node {
                tape: tape.clone(),
                id: tape.push(len, op),
            }
        });
        Ok(Tensor {
            shape,
            values,
            node,
        })
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("values", &self.values)
            .field("attached", &self.node.is_some())
            .finish()
    }
}

/// Gradients of a scalar root with respect to every node on its tape.
pub struct Gradients {
    tape: Option<Tape>,
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Raw gradient of `t`, or `None` when `t` does not influence the root.
    pub fn get(&self, t: &Tensor) -> Option<&[f64]> {
        let node = t.node.as_ref()?;
        let tape = self.tape.as_ref()?;
        if !tape.same(&node.tape) {
            return None;
        }
        self.grads.get(node.id)?.as_deref()
    }

    /// Gradient of `t` shaped like `t`; zeros when unreachable.
    pub fn wrt(&self, t: &Tensor) -> Tensor {
        match self.get(t) {
            Some(g) => Tensor::from_parts(t.shape.clone(), g.to_vec()),
            None => Tensor::from_parts(t.shape.clone(), vec![0.0; t.len()]),
        }
    }
}

/// Runs the backward pass from a scalar `root`.
pub fn backward(root: &Tensor) -> Result<Gradients> {
    if root.len() != 1 {
        return Err(Error::NonScalarRoot(root.shape.clone()));
    }
    let Some(node) = &root.node else {
        return Ok(Gradients {
            tape: None,
            grads: Vec::new(),
        });
    };
    let records = node.tape.records.borrow();
    let mut grads: Vec<Option<Vec<f64>>> = vec![None; node.id + 1];
    grads[node.id] = Some(vec![1.0]);
    for id in (0..=node.id).rev() {
        let Some(g) = grads[id].take() else { continue };
        let record = &records[id];
        debug_assert_eq!(g.len(), record.len);
        ops::propagate(
            &record.op,
            &g,
            &mut |input: &Input, contribution: Vec<f64>| {
                if let Some(i) = input.id {
                    accumulate(&mut grads[i], contribution);
                }
            },
        );
        grads[id] = Some(g);
    }
    drop(records);
    Ok(Gradients {
        tape: Some(node.tape.clone()),
        grads,
    })
}

fn accumulate(slot: &mut Option<Vec<f64>>, contribution: Vec<f64>) {
    match slot {
        Some(existing) => {
            for (e, c) in existing.iter_mut().zip(contribution) {
                *e += c;
            }
        }
        None => *slot = Some(contribution),
    }
}
