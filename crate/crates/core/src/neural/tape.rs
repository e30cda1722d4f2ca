//! Reverse-mode differentiation over a recorded list of vector operations.
//!
//! Every node holds a dense `f64` vector. Parameters are referenced by
//! [`ParamId`] and are never copied for matrix products or embedding lookups;
//! their gradients are accumulated straight into a [`Gradients`] buffer.

use super::tensor::{axpy, sigmoid};
use super::{Gradients, NeuralError, ParamId, ParamStore};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatVec { w: ParamId, x: Var },
    Gather { table: ParamId, row: usize },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    OneMinus(Var),
    Sigmoid(Var),
    Tanh(Var),
    Concat(Vec<Var>),
    Slice { src: Var, start: usize },
    Sum(Var),
    SoftmaxXent { logits: Var, target: usize, probs: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Vec<f64>,
    op: Op,
}

/// Forward-pass recorder bound to one parameter store.
pub struct Tape<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
}

impl<'a> Tape<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Self {
            store,
            nodes: Vec::new(),
        }
    }

    pub fn store(&self) -> &'a ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn check_same(&self, a: Var, b: Var, context: &'static str) -> Result<(), NeuralError> {
        let (la, lb) = (self.value(a).len(), self.value(b).len());
        if la != lb {
            return Err(NeuralError::ShapeMismatch {
                context,
                expected: vec![la],
                found: vec![lb],
            });
        }
        Ok(())
    }

    /// Constant input (no gradient flows out of the tape).
    pub fn input(&mut self, value: Vec<f64>) -> Var {
        self.push(value, Op::Input)
    }

    /// A whole parameter tensor, flattened, as a differentiable node.
    pub fn param(&mut self, id: ParamId) -> Var {
        let value = self.store.get(id).data().to_vec();
        self.push(value, Op::Param(id))
    }

    /// `W · x` for a 2-d parameter `W`.
    pub fn matvec(&mut self, w: ParamId, x: Var) -> Result<Var, NeuralError> {
        let value = self.store.get(w).matvec(self.value(x))?;
        Ok(self.push(value, Op::MatVec { w, x }))
    }

    /// Row `row` of a 2-d parameter (embedding lookup).
    pub fn gather(&mut self, table: ParamId, row: usize) -> Result<Var, NeuralError> {
        let t = self.store.get(table);
        if row >= t.rows() {
            return Err(NeuralError::IndexOutOfRange {
                index: row,
                len: t.rows(),
            });
        }
        let value = t.row(row).to_vec();
        Ok(self.push(value, Op::Gather { table, row }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NeuralError> {
        self.check_same(a, b, "add")?;
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x + y)
            .collect();
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NeuralError> {
        self.check_same(a, b, "sub")?;
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x - y)
            .collect();
        Ok(self.push(value, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NeuralError> {
        self.check_same(a, b, "mul")?;
        let value = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .collect();
        Ok(self.push(value, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).iter().map(|x| x * factor).collect();
        self.push(value, Op::Scale(a, factor))
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        let value = self.value(a).iter().map(|x| 1.0 - x).collect();
        self.push(value, Op::OneMinus(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).iter().map(|&x| sigmoid(x)).collect();
        self.push(value, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).iter().map(|x| x.tanh()).collect();
        self.push(value, Op::Tanh(a))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut value = Vec::with_capacity(parts.iter().map(|p| self.value(*p).len()).sum());
        for p in parts {
            value.extend_from_slice(self.value(*p));
        }
        self.push(value, Op::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, src: Var, start: usize, len: usize) -> Result<Var, NeuralError> {
        let n = self.value(src).len();
        if start + len > n {
            return Err(NeuralError::IndexOutOfRange {
                index: start + len,
                len: n,
            });
        }
        let value = self.value(src)[start..start + len].to_vec();
        Ok(self.push(value, Op::Slice { src, start }))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().sum();
        self.push(vec![s], Op::Sum(a))
    }

    /// Negative log-likelihood of `target` under `softmax(logits)`.
    pub fn softmax_xent(&mut self, logits: Var, target: usize) -> Result<Var, NeuralError> {
        let (loss, probs) = super::loss::softmax_cross_entropy(self.value(logits), target)?;
        Ok(self.push(
            vec![loss],
            Op::SoftmaxXent {
                logits,
                target,
                probs,
            },
        ))
    }

    /// Back-propagates `scale · d(loss)/dθ` into `grads`.
    ///
    /// `loss` must be a scalar node. Parameters that do not influence the loss
    /// receive no contribution.
    pub fn backward_into(
        &self,
        loss: Var,
        scale: f64,
        grads: &mut Gradients,
    ) -> Result<(), NeuralError> {
        if self.nodes.is_empty() {
            return Err(NeuralError::BackwardBeforeForward);
        }
        if loss.0 >= self.nodes.len() {
            return Err(NeuralError::IndexOutOfRange {
                index: loss.0,
                len: self.nodes.len(),
            });
        }
        if self.value(loss).len() != 1 {
            return Err(NeuralError::NonScalarLoss(self.value(loss).len()));
        }
        if grads.len() != self.store.len() {
            return Err(NeuralError::ShapeMismatch {
                context: "gradient buffer",
                expected: vec![self.store.len()],
                found: vec![grads.len()],
            });
        }

        let mut adj: Vec<Option<Vec<f64>>> = Vec::with_capacity(loss.0 + 1);
        adj.resize_with(loss.0 + 1, || None);
        adj[loss.0] = Some(vec![scale]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input => {}
                Op::Param(id) => {
                    axpy(1.0, &g, grads.get_mut(*id).data_mut());
                }
                Op::MatVec { w, x } => {
                    let wt = self.store.get(*w);
                    let xv = self.value(*x);
                    let gw = grads.get_mut(*w);
                    for (i, gi) in g.iter().enumerate() {
                        if *gi != 0.0 {
                            axpy(*gi, xv, gw.row_mut(i));
                        }
                    }
                    let mut gx = vec![0.0; xv.len()];
                    for (i, gi) in g.iter().enumerate() {
                        if *gi != 0.0 {
                            axpy(*gi, wt.row(i), &mut gx);
                        }
                    }
                    accumulate(&mut adj, *x, gx);
                }
                Op::Gather { table, row } => {
                    axpy(1.0, &g, grads.get_mut(*table).row_mut(*row));
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj, *b, g.clone());
                    accumulate(&mut adj, *a, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut adj, *b, g.iter().map(|v| -v).collect());
                    accumulate(&mut adj, *a, g);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let ga = g.iter().zip(bv).map(|(gi, bi)| gi * bi).collect();
                    let gb = g.iter().zip(av).map(|(gi, ai)| gi * ai).collect();
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::Scale(a, f) => {
                    accumulate(&mut adj, *a, g.iter().map(|v| v * f).collect());
                }
                Op::OneMinus(a) => {
                    accumulate(&mut adj, *a, g.iter().map(|v| -v).collect());
                }
                Op::Sigmoid(a) => {
                    let y = &node.value;
                    let ga = g
                        .iter()
                        .zip(y)
                        .map(|(gi, yi)| gi * yi * (1.0 - yi))
                        .collect();
                    accumulate(&mut adj, *a, ga);
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    let ga = g
                        .iter()
                        .zip(y)
                        .map(|(gi, yi)| gi * (1.0 - yi * yi))
                        .collect();
                    accumulate(&mut adj, *a, ga);
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = self.value(*p).len();
                        accumulate(&mut adj, *p, g[offset..offset + n].to_vec());
                        offset += n;
                    }
                }
                Op::Slice { src, start } => {
                    let mut gs = vec![0.0; self.value(*src).len()];
                    gs[*start..*start + g.len()].copy_from_slice(&g);
                    accumulate(&mut adj, *src, gs);
                }
                Op::Sum(a) => {
                    let n = self.value(*a).len();
                    accumulate(&mut adj, *a, vec![g[0]; n]);
                }
                Op::SoftmaxXent {
                    logits,
                    target,
                    probs,
                } => {
                    let mut gl: Vec<f64> = probs.iter().map(|p| p * g[0]).collect();
                    gl[*target] -= g[0];
                    accumulate(&mut adj, *logits, gl);
                }
            }
        }
        Ok(())
    }

    /// Convenience wrapper returning fresh gradients for `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NeuralError> {
        let mut grads = self.store.zero_gradients();
        self.backward_into(loss, 1.0, &mut grads)?;
        Ok(grads)
    }
}

fn accumulate(adj: &mut [Option<Vec<f64>>], v: Var, g: Vec<f64>) {
    match &mut adj[v.0] {
        Some(existing) => axpy(1.0, &g, existing),
        slot @ None => *slot = Some(g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Tensor;

    fn store_with(values: &[(&str, Tensor)]) -> ParamStore {
        let mut s = ParamStore::new();
        for (n, t) in values {
            s.insert(n, t.clone()).unwrap();
        }
        s
    }

    #[test]
    fn sum_of_params_has_unit_gradient() {
        let s = store_with(&[("theta", Tensor::vector(vec![0.3, -1.2, 4.0]))]);
        let mut tape = Tape::new(&s);
        let p = tape.param(s.id("theta").unwrap());
        let loss = tape.sum(p);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(s.id("theta").unwrap()).data(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn zero_scaled_loss_has_zero_gradient() {
        let s = store_with(&[
            ("w", Tensor::from_vec(&[2, 2], vec![0.5, -0.1, 0.2, 0.7]).unwrap()),
            ("unused", Tensor::vector(vec![1.0, 2.0])),
        ]);
        let mut tape = Tape::new(&s);
        let x = tape.input(vec![1.0, -2.0]);
        let h = tape.matvec(s.id("w").unwrap(), x).unwrap();
        let t = tape.tanh(h);
        let f = tape.sum(t);
        let loss = tape.scale(f, 0.0);
        let g = tape.backward(loss).unwrap();
        for (_, t) in g.iter() {
            assert!(t.data().iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn backward_on_empty_tape_errors() {
        let s = ParamStore::new();
        let tape = Tape::new(&s);
        assert!(matches!(
            tape.backward(Var(0)),
            Err(NeuralError::BackwardBeforeForward)
        ));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let s = store_with(&[("w", Tensor::vector(vec![1.0, 2.0]))]);
        let mut tape = Tape::new(&s);
        let p = tape.param(s.id("w").unwrap());
        assert!(matches!(
            tape.backward(p),
            Err(NeuralError::NonScalarLoss(2))
        ));
    }

    #[test]
    fn matvec_gradient_matches_hand_derivation() {
        // loss = sum(W x) => dW = 1 x^T
        let s = store_with(&[("w", Tensor::zeros(&[2, 3]))]);
        let w = s.id("w").unwrap();
        let mut tape = Tape::new(&s);
        let x = tape.input(vec![1.0, 2.0, 3.0]);
        let y = tape.matvec(w, x).unwrap();
        let loss = tape.sum(y);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(w).data(), &[1.0, 2.0, 3.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn gather_out_of_range_errors() {
        let s = store_with(&[("e", Tensor::zeros(&[3, 2]))]);
        let mut tape = Tape::new(&s);
        assert!(tape.gather(s.id("e").unwrap(), 3).is_err());
    }
}
