use super::{Shape, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A trainable tensor: value, gradient accumulator, and a freeze flag that
/// exempts it from both gradient accumulation and optimizer updates.
#[derive(Clone, Debug)]
pub struct Parameter<F> {
    name: String,
    value: Tensor<F>,
    grad: Tensor<F>,
    frozen: bool,
}

impl<F: Scalar> Parameter<F> {
    fn new(name: String, value: Tensor<F>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Parameter {
            name,
            value,
            grad,
            frozen: false,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn value(&self) -> &Tensor<F> {
        &self.value
    }

    pub fn grad(&self) -> &Tensor<F> {
        &self.grad
    }

    pub fn frozen(&self) -> bool {
        self.frozen
    }

    pub fn shape(&self) -> Shape {
        self.value.shape()
    }
}

/// Handle into a [`ParamStore`].
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ParamId(usize);

/// Owns every parameter of a model in registration order.
///
/// Registration order is the persistence and optimizer-state order, so it
/// must be deterministic for a given architecture.
#[derive(Clone, Debug, Default)]
pub struct ParamStore<F> {
    params: Vec<Parameter<F>>,
}

impl<F: Scalar> ParamStore<F> {
    pub fn new() -> Self {
        ParamStore { params: Vec::new() }
    }

    /// Registers a parameter under a unique name.
    pub fn add(&mut self, name: impl Into<String>, value: Tensor<F>) -> ParamId {
        let name = name.into();
        assert!(
            self.by_name(&name).is_none(),
            "duplicate parameter name {name:?}"
        );
        self.params.push(Parameter::new(name, value));
        ParamId(self.params.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter<F> {
        &self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor<F> {
        &self.params[id.0].value
    }

    pub fn by_name(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<F>> {
        self.params.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    /// Replaces a parameter value; the shape must be unchanged.
    pub fn set_value(&mut self, id: ParamId, value: Tensor<F>) -> Result<()> {
        let p = &mut self.params[id.0];
        if value.shape() != p.value.shape() {
            return Err(Error::Dimension(format!(
                "parameter {:?} has shape {}, got {}",
                p.name,
                p.value.shape(),
                value.shape()
            )));
        }
        p.value = value;
        Ok(())
    }

    pub fn set_frozen(&mut self, id: ParamId, frozen: bool) {
        self.params[id.0].frozen = frozen;
    }

    /// Adds `delta` into the gradient accumulator. Frozen parameters are
    /// skipped so no gradient ever reaches them.
    pub fn accumulate_grad(&mut self, id: ParamId, delta: &[F]) {
        let p = &mut self.params[id.0];
        if p.frozen {
            return;
        }
        debug_assert_eq!(delta.len(), p.grad.shape().len());
        for (g, d) in p.grad.data_mut().iter_mut().zip(delta) {
            *g += *d;
        }
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            for g in p.grad.data_mut() {
                *g = F::zero();
            }
        }
    }

    pub(crate) fn update_value(&mut self, id: ParamId, f: impl FnOnce(&mut [F], &[F])) {
        let p = &mut self.params[id.0];
        // Split borrows: mutate the value slice while reading the gradient.
        let grad = p.grad.clone();
        f(p.value.data_mut(), grad.data());
    }

    pub(crate) fn clear_grad(&mut self, id: ParamId) {
        for g in self.params[id.0].grad.data_mut() {
            *g = F::zero();
        }
    }

    /// Copies of all parameter values, in registration order.
    pub fn snapshot(&self) -> Vec<Tensor<F>> {
        self.params.iter().map(|p| p.value.clone()).collect()
    }

    /// Restores values captured by [`ParamStore::snapshot`].
    pub fn restore(&mut self, values: &[Tensor<F>]) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(Error::Dimension(format!(
                "snapshot has {} tensors, store has {}",
                values.len(),
                self.params.len()
            )));
        }
        for (i, v) in values.iter().enumerate() {
            self.set_value(ParamId(i), v.clone())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accumulate_respects_freeze() {
        let mut store = ParamStore::<f32>::new();
        let id = store.add("w", Tensor::filled(Shape::new(1, 1, 1, 2), 0.0));
        store.accumulate_grad(id, &[1.0, 2.0]);
        store.accumulate_grad(id, &[1.0, 2.0]);
        assert_eq!(store.get(id).grad().data(), &[2.0, 4.0]);

        store.set_frozen(id, true);
        store.accumulate_grad(id, &[5.0, 5.0]);
        assert_eq!(store.get(id).grad().data(), &[2.0, 4.0]);
    }

    #[test]
    fn set_value_checks_shape() {
        let mut store = ParamStore::<f32>::new();
        let id = store.add("w", Tensor::zeros(Shape::new(1, 1, 2, 2)));
        let bad = Tensor::zeros(Shape::new(1, 1, 2, 3));
        assert!(store.set_value(id, bad).is_err());
    }

    #[test]
    #[should_panic(expected = "duplicate parameter name")]
    fn duplicate_names_rejected() {
        let mut store = ParamStore::<f32>::new();
        store.add("w", Tensor::zeros(Shape::new(1, 1, 1, 1)));
        store.add("w", Tensor::zeros(Shape::new(1, 1, 1, 1)));
    }

    #[test]
    fn snapshot_restore_round_trips() {
        let mut store = ParamStore::<f64>::new();
        let id = store.add("w", Tensor::filled(Shape::new(1, 1, 1, 2), 3.0));
        let snap = store.snapshot();
        store
            .set_value(id, Tensor::filled(Shape::new(1, 1, 1, 2), -1.0))
            .unwrap();
        store.restore(&snap).unwrap();
        assert_eq!(store.value(id).data(), &[3.0, 3.0]);
    }
}
