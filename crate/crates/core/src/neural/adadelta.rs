use super::{Gradients, NeuralError, ParamStore};

/// Adadelta hyper-parameters. There is no learning rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adadelta {
    pub rho: f64,
    pub epsilon: f64,
}

impl Default for Adadelta {
    fn default() -> Self {
        Self {
            rho: 0.95,
            epsilon: 1e-6,
        }
    }
}

impl Adadelta {
    pub fn update(&self, store: &mut ParamStore, grads: &Gradients) -> Result<(), NeuralError> {
        adadelta_update(store, grads, self.rho, self.epsilon)
    }
}

/// Applies one Adadelta step in place:
///
/// ```text
/// E[g²]  ← ρ E[g²]  + (1-ρ) g²
/// Δ      ← -sqrt(E[Δ²] + ε) / sqrt(E[g²] + ε) · g
/// E[Δ²]  ← ρ E[Δ²]  + (1-ρ) Δ²
/// θ      ← θ + Δ
/// ```
pub fn adadelta_update(
    store: &mut ParamStore,
    grads: &Gradients,
    rho: f64,
    epsilon: f64,
) -> Result<(), NeuralError> {
    if grads.len() != store.len() {
        return Err(NeuralError::ShapeMismatch {
            context: "adadelta gradients",
            expected: vec![store.len()],
            found: vec![grads.len()],
        });
    }
    for id in store.ids().collect::<Vec<_>>() {
        if grads.get(id).shape() != store.get(id).shape() {
            return Err(NeuralError::ShapeMismatch {
                context: "adadelta gradients",
                expected: store.get(id).shape().to_vec(),
                found: grads.get(id).shape().to_vec(),
            });
        }
    }
    for id in store.ids().collect::<Vec<_>>() {
        let g = grads.get(id).data();
        let i = id.index();
        let sq_grad = store.sq_grad[i].data_mut();
        for (acc, gi) in sq_grad.iter_mut().zip(g) {
            *acc = rho * *acc + (1.0 - rho) * gi * gi;
        }
        let deltas: Vec<f64> = store.sq_update[i]
            .data()
            .iter()
            .zip(store.sq_grad[i].data())
            .zip(g)
            .map(|((su, sg), gi)| -((su + epsilon).sqrt() / (sg + epsilon).sqrt()) * gi)
            .collect();
        for (acc, d) in store.sq_update[i].data_mut().iter_mut().zip(&deltas) {
            *acc = rho * *acc + (1.0 - rho) * d * d;
        }
        for (p, d) in store.get_mut(id).data_mut().iter_mut().zip(&deltas) {
            *p += d;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Tensor;

    fn scalar_store(theta: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("theta", Tensor::vector(vec![theta])).unwrap();
        s
    }

    #[test]
    fn zero_gradient_only_decays_accumulators() {
        let mut s = scalar_store(1.5);
        let id = s.id("theta").unwrap();
        s.set_accumulators(id, Tensor::vector(vec![0.4]), Tensor::vector(vec![0.2]))
            .unwrap();
        let g = s.zero_gradients();
        adadelta_update(&mut s, &g, 0.95, 1e-6).unwrap();
        assert_eq!(s.get(id).data(), &[1.5]);
        let (sg, su) = s.accumulators(id);
        assert_eq!(sg.data(), &[0.95 * 0.4]);
        assert_eq!(su.data(), &[0.95 * 0.2]);
    }

    #[test]
    fn first_step_matches_hand_arithmetic() {
        let mut s = scalar_store(0.0);
        let id = s.id("theta").unwrap();
        let mut g = s.zero_gradients();
        g.get_mut(id).data_mut()[0] = 1.0;
        adadelta_update(&mut s, &g, 0.95, 1e-6).unwrap();
        let expected = -(1e-6f64 / (0.05 + 1e-6)).sqrt();
        assert!((s.get(id).data()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn repeated_gradient_steps_grow_monotonically_with_vanishing_increments() {
        // Independent simulation of the recurrences on plain scalars.
        let (rho, eps) = (0.95, 1e-6);
        let (mut eg, mut ed) = (0.0f64, 0.0f64);
        let mut oracle = Vec::new();
        for _ in 0..400 {
            eg = rho * eg + (1.0 - rho);
            let d = (ed + eps).sqrt() / (eg + eps).sqrt();
            ed = rho * ed + (1.0 - rho) * d * d;
            oracle.push(d);
        }

        let mut s = scalar_store(0.0);
        let id = s.id("theta").unwrap();
        let mut g = s.zero_gradients();
        g.get_mut(id).data_mut()[0] = 1.0;
        let mut prev = 0.0;
        let mut steps = Vec::new();
        for _ in 0..400 {
            adadelta_update(&mut s, &g, rho, eps).unwrap();
            let theta = s.get(id).data()[0];
            steps.push((prev - theta).abs());
            prev = theta;
        }
        for (a, b) in steps.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(steps.windows(2).all(|w| w[1] >= w[0]));
        // Increments shrink: |Δ| grows like sqrt(k) once E[g²] settles.
        let incr: Vec<f64> = steps.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(incr[100..].windows(2).all(|w| w[1] <= w[0]));
        assert!(incr[incr.len() - 1] < 0.001 * steps[steps.len() - 1]);
    }

    #[test]
    fn shape_mismatch_errors() {
        let mut s = scalar_store(0.0);
        let other = ParamStore::new().zero_gradients();
        assert!(adadelta_update(&mut s, &other, 0.95, 1e-6).is_err());
    }
}
