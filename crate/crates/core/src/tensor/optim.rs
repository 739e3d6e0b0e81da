use super::param::{ParamId, ParamStore};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// SGD with classical momentum.
///
/// Per step and parameter: `v ← momentum·v + grad`, `value ← value −
/// lr·v`, then the gradient accumulator is zeroed. Frozen parameters are
/// skipped entirely (their velocity never even allocates).
pub struct SgdMomentum<F> {
    learning_rate: F,
    momentum: F,
    velocity: Vec<Option<Vec<F>>>,
}

impl<F: Scalar> SgdMomentum<F> {
    pub fn new(learning_rate: F, momentum: F) -> Result<Self> {
        if !(learning_rate > F::zero() && learning_rate.is_finite()) {
            return Err(Error::Argument(format!(
                "learning rate must be positive and finite, got {learning_rate}"
            )));
        }
        if !(momentum >= F::zero() && momentum < F::one()) {
            return Err(Error::Argument(format!(
                "momentum must lie in [0, 1), got {momentum}"
            )));
        }
        Ok(SgdMomentum {
            learning_rate,
            momentum,
            velocity: Vec::new(),
        })
    }

    /// Applies one update to every non-frozen parameter in the store and
    /// clears all gradients.
    pub fn step(&mut self, store: &mut ParamStore<F>) {
        if self.velocity.len() < store.len() {
            self.velocity.resize(store.len(), None);
        }
        let ids: Vec<ParamId> = store.ids().collect();
        for (i, id) in ids.into_iter().enumerate() {
            if store.get(id).frozen() {
                store.clear_grad(id);
                continue;
            }
            let len = store.get(id).shape().len();
            let vel = self.velocity[i].get_or_insert_with(|| vec![F::zero(); len]);
            let (m, lr) = (self.momentum, self.learning_rate);
            store.update_value(id, |value, grad| {
                for ((v, g), p) in vel.iter_mut().zip(grad).zip(value.iter_mut()) {
                    *v = m * *v + *g;
                    *p -= lr * *v;
                }
            });
            store.clear_grad(id);
        }
    }
}
