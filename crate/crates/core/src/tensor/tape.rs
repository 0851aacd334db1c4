use std::cell::{Ref, RefCell};
use std::collections::HashMap;
use std::fmt;

use super::ops::Function;
use super::{Param, ParamKey, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

struct Node<T: Scalar> {
    value: Tensor<T>,
    parents: Vec<usize>,
    func: Option<Box<dyn Function<T>>>,
    requires_grad: bool,
}

/// Records operations in execution order; node ids are topologically sorted
/// by construction because an op can only reference existing nodes.
pub struct Tape<T: Scalar> {
    nodes: RefCell<Vec<Node<T>>>,
    bound: RefCell<HashMap<ParamKey, usize>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> fmt::Debug for Tape<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("nodes", &self.len()).finish()
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, T: Scalar> {
    pub(super) tape: &'t Tape<T>,
    pub(super) id: usize,
}

impl<T: Scalar> fmt::Debug for Var<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Var")
            .field("id", &self.id)
            .field("shape", &self.shape())
            .finish()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
            bound: RefCell::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records a leaf. It participates in gradients iff `value.requires_grad()`.
    pub fn leaf(&self, value: Tensor<T>) -> Var<'_, T> {
        let requires_grad = value.requires_grad();
        self.push(Node {
            value,
            parents: Vec::new(),
            func: None,
            requires_grad,
        })
    }

    /// Binds a parameter as a gradient-tracked leaf. Binding the same
    /// parameter twice on one tape returns the existing node.
    pub fn param(&self, p: &Param<T>) -> Var<'_, T> {
        if let Some(&id) = self.bound.borrow().get(&p.key()) {
            return Var { tape: self, id };
        }
        let mut value = p.tensor.clone();
        value.grad = None;
        let v = self.leaf(value.with_requires_grad(true));
        self.bound.borrow_mut().insert(p.key(), v.id);
        v
    }

    /// Gradient accumulated for a bound parameter, if it was bound and reached.
    pub fn param_grad(&self, key: ParamKey) -> Option<Vec<T>> {
        let id = *self.bound.borrow().get(&key)?;
        self.nodes.borrow()[id].value.grad.clone()
    }

    /// Records the result of a [`Function`] applied to `inputs`.
    pub fn apply<'t>(
        &'t self,
        func: impl Function<T> + 'static,
        inputs: &[Var<'t, T>],
        output: Tensor<T>,
    ) -> Var<'t, T> {
        let parents: Vec<usize> = inputs.iter().map(|v| v.id).collect();
        let requires_grad = {
            let nodes = self.nodes.borrow();
            parents.iter().any(|&p| nodes[p].requires_grad)
        };
        debug_assert!(
            output.all_finite() || !inputs.iter().all(|v| v.value().all_finite()),
            "{} produced non-finite output from finite inputs",
            func.name()
        );
        self.push(Node {
            value: output.with_requires_grad(requires_grad),
            parents,
            func: Some(Box::new(func)),
            requires_grad,
        })
    }

    fn push(&self, node: Node<T>) -> Var<'_, T> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    /// Reverse sweep from a scalar `loss`. Gradients are accumulated (`+=`)
    /// into every gradient-tracked leaf reachable from the loss; intermediate
    /// adjoints are transient.
    pub fn backward(&self, loss: Var<'_, T>) -> Result<()> {
        if !std::ptr::eq(loss.tape, self) {
            return Err(Error::contract("loss belongs to a different tape"));
        }
        let mut leaf_updates: Vec<(usize, Vec<T>)> = Vec::new();
        {
            let nodes = self.nodes.borrow();
            if nodes.is_empty() {
                return Err(Error::contract("backward on an empty tape"));
            }
            let root = &nodes[loss.id];
            if root.value.numel() != 1 {
                return Err(Error::contract(format!(
                    "backward needs a scalar loss, got shape {:?}",
                    root.value.shape()
                )));
            }
            let mut adjoint: Vec<Option<Vec<T>>> = (0..=loss.id).map(|_| None).collect();
            adjoint[loss.id] = Some(vec![T::one()]);
            for id in (0..=loss.id).rev() {
                let Some(g) = adjoint[id].take() else {
                    continue;
                };
                let node = &nodes[id];
                if !node.requires_grad {
                    continue;
                }
                let Some(func) = &node.func else {
                    leaf_updates.push((id, g));
                    continue;
                };
                let inputs: Vec<&Tensor<T>> =
                    node.parents.iter().map(|&p| &nodes[p].value).collect();
                let needs: Vec<bool> = node
                    .parents
                    .iter()
                    .map(|&p| nodes[p].requires_grad)
                    .collect();
                let grads = func.backward(&inputs, &node.value, &g, &needs);
                for ((&p, pg), need) in node.parents.iter().zip(grads).zip(needs) {
                    let Some(pg) = pg.filter(|_| need) else {
                        continue;
                    };
                    debug_assert_eq!(pg.len(), nodes[p].value.numel(), "{}", func.name());
                    match &mut adjoint[p] {
                        Some(acc) => acc.iter_mut().zip(&pg).for_each(|(a, &b)| *a = *a + b),
                        slot @ None => *slot = Some(pg),
                    }
                }
            }
        }
        let mut nodes = self.nodes.borrow_mut();
        for (id, g) in leaf_updates {
            nodes[id].value.accumulate_grad(&g)?;
        }
        Ok(())
    }

    /// Clears gradient buffers of every leaf on the tape.
    pub fn zero_grads(&self) {
        for node in self.nodes.borrow_mut().iter_mut() {
            if node.func.is_none() {
                node.value.zero_grad();
            }
        }
    }
}

impl<'t, T: Scalar> Var<'t, T> {
    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }

    pub fn value(&self) -> Ref<'t, Tensor<T>> {
        Ref::map(self.tape.nodes.borrow(), |n| &n[self.id].value)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    pub fn data(&self) -> Vec<T> {
        self.value().data().to_vec()
    }

    /// Gradient stored on this node (leaves only; populated by backward).
    pub fn grad(&self) -> Option<Vec<T>> {
        self.value().grad().map(<[T]>::to_vec)
    }

    pub fn requires_grad(&self) -> bool {
        self.tape.nodes.borrow()[self.id].requires_grad
    }
}
