use std::collections::HashMap;

use rand::Rng;

use super::{NeuralError, Tensor};

/// Index of a parameter inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named trainable parameters plus their Adadelta accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    /// Running average of squared gradients.
    pub(crate) sq_grad: Vec<Tensor>,
    /// Running average of squared updates.
    pub(crate) sq_update: Vec<Tensor>,
    by_name: HashMap<String, ParamId>,
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            values: Vec::new(),
            sq_grad: Vec::new(),
            sq_update: Vec::new(),
            by_name: HashMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, value: Tensor) -> Result<ParamId, NeuralError> {
        if self.by_name.contains_key(name) {
            return Err(NeuralError::DuplicateParam(name.to_string()));
        }
        let id = ParamId(self.values.len());
        self.sq_grad.push(Tensor::zeros(value.shape()));
        self.sq_update.push(Tensor::zeros(value.shape()));
        self.names.push(name.to_string());
        self.values.push(value);
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    /// Registers a parameter drawn uniformly from `[-scale, scale]`.
    pub fn insert_uniform<R: Rng>(
        &mut self,
        name: &str,
        shape: &[usize],
        scale: f64,
        rng: &mut R,
    ) -> Result<ParamId, NeuralError> {
        let mut t = Tensor::zeros(shape);
        for v in t.data_mut() {
            *v = rng.gen_range(-scale..=scale);
        }
        self.insert(name, t)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    pub fn accumulators(&self, id: ParamId) -> (&Tensor, &Tensor) {
        (&self.sq_grad[id.0], &self.sq_update[id.0])
    }

    pub(crate) fn set_accumulators(
        &mut self,
        id: ParamId,
        sq_grad: Tensor,
        sq_update: Tensor,
    ) -> Result<(), NeuralError> {
        let shape = self.values[id.0].shape().to_vec();
        for t in [&sq_grad, &sq_update] {
            if t.shape() != shape.as_slice() {
                return Err(NeuralError::ShapeMismatch {
                    context: "accumulator restore",
                    expected: shape.clone(),
                    found: t.shape().to_vec(),
                });
            }
        }
        self.sq_grad[id.0] = sq_grad;
        self.sq_update[id.0] = sq_update;
        Ok(())
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            grads: self.values.iter().map(|v| Tensor::zeros(v.shape())).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(Tensor::is_finite)
    }
}

/// Gradient buffers shaped like a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Tensor>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.grads[id.0]
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.grads.iter().enumerate().map(|(i, g)| (ParamId(i), g))
    }

    pub fn global_norm(&self) -> f64 {
        self.grads.iter().map(Tensor::sum_squares).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.grads {
            g.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Rescales so the global L2 norm is at most `max_norm`; returns the
    /// norm before clipping.
    pub fn clip_global_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.global_norm();
        if norm > max_norm && norm > 0.0 {
            self.scale(max_norm / norm);
        }
        norm
    }

    pub fn add_assign(&mut self, other: &Gradients) -> Result<(), NeuralError> {
        if self.grads.len() != other.grads.len() {
            return Err(NeuralError::ShapeMismatch {
                context: "gradient accumulation",
                expected: vec![self.grads.len()],
                found: vec![other.grads.len()],
            });
        }
        for (a, b) in self.grads.iter_mut().zip(&other.grads) {
            for (x, y) in a.data_mut().iter_mut().zip(b.data()) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().all(Tensor::is_finite)
    }
}
