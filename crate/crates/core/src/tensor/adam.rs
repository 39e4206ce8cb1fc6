//! Named parameter store with per-parameter Adam state.

use std::collections::BTreeMap;

use rand::Rng;

use super::{Tape, Tensor, VarId};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: Tensor,
    pub v: Tensor,
    pub step: u64,
}

/// Named parameter tensors plus their optimizer state. Names are kept in a
/// `BTreeMap` so every iteration order is deterministic.
#[derive(Debug, Clone, Default)]
pub struct ParameterStore {
    params: BTreeMap<String, Tensor>,
    state: BTreeMap<String, AdamState>,
}

impl ParameterStore {
    pub fn new() -> Self {
        ParameterStore::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) {
        let name = name.into();
        self.state.insert(
            name.clone(),
            AdamState {
                m: Tensor::zeros(value.shape()),
                v: Tensor::zeros(value.shape()),
                step: 0,
            },
        );
        self.params.insert(name, value);
    }

    /// Insert a parameter initialized uniformly on `[-scale, scale]`.
    pub fn init_uniform<R: Rng>(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        scale: f64,
        rng: &mut R,
    ) {
        self.insert(name, Tensor::uniform(shape, scale, rng));
    }

    pub fn get(&self, name: &str) -> &Tensor {
        self.params
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name:?}"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor {
        self.params
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name:?}"))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn adam_state(&self, name: &str) -> &AdamState {
        &self.state[name]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.params.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.params.keys()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Reset all Adam moments and step counts to zero.
    pub fn reset_optimizer(&mut self) {
        for (name, value) in &self.params {
            self.state.insert(
                name.clone(),
                AdamState {
                    m: Tensor::zeros(value.shape()),
                    v: Tensor::zeros(value.shape()),
                    step: 0,
                },
            );
        }
    }

    /// Stage every parameter as a differentiable leaf on `tape`; the returned
    /// map is consumed by the forward functions and by
    /// [`collect_grads`](Self::collect_grads).
    pub fn stage(&self, tape: &mut Tape) -> BTreeMap<String, VarId> {
        self.params
            .iter()
            .map(|(name, value)| (name.clone(), tape.leaf(value.clone())))
            .collect()
    }

    /// Gather gradients for staged parameters into a name-keyed map; absent
    /// gradients become zero tensors.
    pub fn collect_grads(
        &self,
        vars: &BTreeMap<String, VarId>,
        grads: &mut super::Gradients,
    ) -> BTreeMap<String, Tensor> {
        self.params
            .iter()
            .map(|(name, value)| {
                let g = vars
                    .get(name)
                    .and_then(|&id| grads.take(id))
                    .unwrap_or_else(|| Tensor::zeros(value.shape()));
                (name.clone(), g)
            })
            .collect()
    }

    /// One Adam update (beta1 = 0.9, beta2 = 0.999, eps = 1e-8) with bias
    /// correction over every parameter; names missing from `grads` are treated
    /// as zero gradients.
    pub fn adam_step(&mut self, grads: &BTreeMap<String, Tensor>, lr: f64) {
        for (name, _) in grads {
            assert!(
                self.params.contains_key(name),
                "gradient for unknown parameter {name:?}"
            );
        }
        for (name, param) in self.params.iter_mut() {
            let st = self.state.get_mut(name).expect("state for every parameter");
            st.step += 1;
            let t = st.step;
            let zero;
            let g = match grads.get(name) {
                Some(g) => {
                    param.assert_same_shape(g, "adam_step gradient");
                    g
                }
                None => {
                    zero = Tensor::zeros(param.shape());
                    &zero
                }
            };
            let bc1 = 1.0 - ADAM_BETA1.powi(t as i32);
            let bc2 = 1.0 - ADAM_BETA2.powi(t as i32);
            for i in 0..param.len() {
                let gi = g.data()[i];
                let m = &mut st.m.data_mut()[i];
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * gi;
                let v = &mut st.v.data_mut()[i];
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * gi * gi;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                param.data_mut()[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
            }
        }
    }
}
