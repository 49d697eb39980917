//! The [`Tensor`] handle and the reverse-mode gradient sweep.
//!
//! Every op builds a new immutable node that remembers its parents and a
//! closure mapping the output gradient to per-parent gradients. Leaves that
//! require grad (parameters, probe inputs) accumulate into their own grad
//! buffer when [`Tensor::backward`] runs; intermediate grads live only for
//! the duration of the sweep.

use std::cell::Cell;
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use crate::error::{Result, TensorError};

/// Maps (output gradient, output data) to one optional gradient per parent.
pub type BackwardFn = dyn Fn(&[f32], &[f32]) -> Vec<Option<Vec<f32>>> + Send + Sync;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

/// Runs `f` without recording any graph. Outputs never require grad.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    let prev = GRAD_ENABLED.with(|g| g.replace(false));
    let out = f();
    GRAD_ENABLED.with(|g| g.set(prev));
    out
}

pub fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

struct GradFn {
    parents: Vec<Tensor>,
    backward: Box<BackwardFn>,
}

struct Node {
    id: u64,
    shape: Vec<usize>,
    data: Vec<f32>,
    requires_grad: bool,
    grad: Mutex<Option<Vec<f32>>>,
    grad_fn: Option<GradFn>,
}

/// Shared handle to an immutable n-d array of `f32` in row-major order.
#[derive(Clone)]
pub struct Tensor(Arc<Node>);

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let preview: Vec<f32> = self.0.data.iter().take(8).copied().collect();
        f.debug_struct("Tensor")
            .field("shape", &self.0.shape)
            .field("requires_grad", &self.0.requires_grad)
            .field("data", &preview)
            .finish()
    }
}

pub(crate) fn numel_of(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    fn build(
        data: Vec<f32>,
        shape: Vec<usize>,
        requires_grad: bool,
        grad_fn: Option<GradFn>,
    ) -> Tensor {
        debug_assert_eq!(numel_of(&shape), data.len(), "shape {shape:?}");
        Tensor(Arc::new(Node {
            id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
            shape,
            data,
            requires_grad,
            grad: Mutex::new(None),
            grad_fn,
        }))
    }

    /// Constant tensor (never receives a gradient).
    pub fn new(data: Vec<f32>, shape: &[usize]) -> Result<Tensor> {
        Self::check_shape(&data, shape)?;
        Ok(Self::build(data, shape.to_vec(), false, None))
    }

    /// Leaf tensor that accumulates a gradient on `backward`.
    pub fn param(data: Vec<f32>, shape: &[usize]) -> Result<Tensor> {
        Self::check_shape(&data, shape)?;
        Ok(Self::build(data, shape.to_vec(), true, None))
    }

    fn check_shape(data: &[f32], shape: &[usize]) -> Result<()> {
        if shape.contains(&0) || numel_of(shape) != data.len() {
            return Err(TensorError::dim("new", shape, &[data.len()]));
        }
        Ok(())
    }

    pub fn zeros(shape: &[usize]) -> Tensor {
        Self::build(vec![0.0; numel_of(shape)], shape.to_vec(), false, None)
    }

    pub fn full(shape: &[usize], value: f32) -> Tensor {
        Self::build(vec![value; numel_of(shape)], shape.to_vec(), false, None)
    }

    pub fn scalar(value: f32) -> Tensor {
        Self::build(vec![value], vec![1], false, None)
    }

    /// Creates the output of a differentiable op.
    ///
    /// `backward` receives the gradient w.r.t. the output together with the
    /// output values and must return one entry per parent, in order. Parents
    /// that do not require grad may be answered with `None`.
    pub fn from_op<F>(
        data: Vec<f32>,
        shape: Vec<usize>,
        parents: Vec<Tensor>,
        backward: F,
    ) -> Tensor
    where
        F: Fn(&[f32], &[f32]) -> Vec<Option<Vec<f32>>> + Send + Sync + 'static,
    {
        let requires_grad = grad_enabled() && parents.iter().any(Tensor::requires_grad);
        let grad_fn = requires_grad.then(|| GradFn {
            parents,
            backward: Box::new(backward),
        });
        Self::build(data, shape, requires_grad, grad_fn)
    }

    pub fn shape(&self) -> &[usize] {
        &self.0.shape
    }

    pub fn rank(&self) -> usize {
        self.0.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.0.data.len()
    }

    pub fn data(&self) -> &[f32] {
        &self.0.data
    }

    pub fn to_vec(&self) -> Vec<f32> {
        self.0.data.clone()
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> f32 {
        assert_eq!(self.numel(), 1, "item() on shape {:?}", self.shape());
        self.0.data[0]
    }

    pub fn requires_grad(&self) -> bool {
        self.0.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.0.grad_fn.is_none()
    }

    pub fn id(&self) -> u64 {
        self.0.id
    }

    /// Accumulated gradient, if any backward pass has reached this leaf.
    pub fn grad(&self) -> Option<Vec<f32>> {
        self.0.grad.lock().expect("grad lock").clone()
    }

    pub fn zero_grad(&self) {
        *self.0.grad.lock().expect("grad lock") = None;
    }

    /// Same values, cut from the graph.
    pub fn detach(&self) -> Tensor {
        Self::build(self.0.data.clone(), self.0.shape.clone(), false, None)
    }

    /// Back-propagates from a one-element tensor into every reachable leaf.
    ///
    /// Calling it repeatedly without [`Tensor::zero_grad`] accumulates.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(TensorError::contract(
                "backward",
                format!("loss must be scalar, got shape {:?}", self.shape()),
            ));
        }
        if !self.requires_grad() {
            return Ok(());
        }
        let order = self.topo_order();
        let mut grads: HashMap<u64, Vec<f32>> = HashMap::new();
        grads.insert(self.id(), vec![1.0]);
        for node in order.iter().rev() {
            let Some(g) = grads.remove(&node.id()) else {
                continue;
            };
            match &node.0.grad_fn {
                None => {
                    let mut slot = node.0.grad.lock().expect("grad lock");
                    match slot.as_mut() {
                        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                        None => *slot = Some(g),
                    }
                }
                Some(gf) => {
                    let parent_grads = (gf.backward)(&g, &node.0.data);
                    debug_assert_eq!(parent_grads.len(), gf.parents.len());
                    for (parent, pg) in gf.parents.iter().zip(parent_grads) {
                        let Some(pg) = pg else { continue };
                        if !parent.requires_grad() {
                            continue;
                        }
                        debug_assert_eq!(pg.len(), parent.numel());
                        match grads.get_mut(&parent.id()) {
                            Some(acc) => acc.iter_mut().zip(&pg).for_each(|(a, b)| *a += b),
                            None => {
                                grads.insert(parent.id(), pg);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Post-order over the grad-requiring subgraph rooted at `self`.
    fn topo_order(&self) -> Vec<Tensor> {
        let mut order = Vec::new();
        let mut seen = HashSet::new();
        let mut stack: Vec<(Tensor, bool)> = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if !seen.insert(t.id()) {
                continue;
            }
            stack.push((t.clone(), true));
            if let Some(gf) = &t.0.grad_fn {
                for p in &gf.parents {
                    if p.requires_grad() && !seen.contains(&p.id()) {
                        stack.push((p.clone(), false));
                    }
                }
            }
        }
        order
    }
}
