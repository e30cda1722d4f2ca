use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tape::{Tape, Var};
use super::tensor::{dot, sigmoid};
use super::{NeuralError, ParamId, ParamStore, Tensor};

/// Recurrent cell variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    /// Gated recurrent unit.
    #[default]
    Gru,
    /// Plain `tanh(W x + U h + b)` recurrence.
    Tanh,
}

/// Standalone weights for one direction of one GRU layer.
///
/// Gate rows are stacked as `[update; reset; candidate]` in `w_input` and
/// `bias`, and `[update; reset]` in `u_gates`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_input: Tensor,
    pub u_gates: Tensor,
    pub u_cand: Tensor,
    pub bias: Tensor,
}

impl GruParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            w_input: Tensor::zeros(&[3 * hidden_dim, input_dim]),
            u_gates: Tensor::zeros(&[2 * hidden_dim, hidden_dim]),
            u_cand: Tensor::zeros(&[hidden_dim, hidden_dim]),
            bias: Tensor::zeros(&[3 * hidden_dim]),
        }
    }

    pub fn uniform<R: Rng>(input_dim: usize, hidden_dim: usize, scale: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim);
        for t in [&mut p.w_input, &mut p.u_gates, &mut p.u_cand, &mut p.bias] {
            for v in t.data_mut() {
                *v = rng.gen_range(-scale..=scale);
            }
        }
        p
    }

    fn check(&self, x: &[f64], h: &[f64]) -> Result<(), NeuralError> {
        let h3 = 3 * self.hidden_dim;
        let consistent = self.w_input.shape() == [h3, self.input_dim]
            && self.u_gates.shape() == [2 * self.hidden_dim, self.hidden_dim]
            && self.u_cand.shape() == [self.hidden_dim, self.hidden_dim]
            && self.bias.shape() == [h3];
        if !consistent {
            return Err(NeuralError::ShapeMismatch {
                context: "gru parameters",
                expected: vec![h3, self.input_dim],
                found: self.w_input.shape().to_vec(),
            });
        }
        if x.len() != self.input_dim {
            return Err(NeuralError::ShapeMismatch {
                context: "gru input",
                expected: vec![self.input_dim],
                found: vec![x.len()],
            });
        }
        if h.len() != self.hidden_dim {
            return Err(NeuralError::ShapeMismatch {
                context: "gru hidden state",
                expected: vec![self.hidden_dim],
                found: vec![h.len()],
            });
        }
        Ok(())
    }

    /// One GRU update without recording a tape.
    pub fn step(&self, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>, NeuralError> {
        self.check(x, h_prev)?;
        let n = self.hidden_dim;
        let xw = self.w_input.matvec(x)?;
        let xb: Vec<f64> = xw.iter().zip(self.bias.data()).map(|(a, b)| a + b).collect();
        let hu = self.u_gates.matvec(h_prev)?;
        let zr: Vec<f64> = (0..2 * n).map(|i| sigmoid(xb[i] + hu[i])).collect();
        let rh: Vec<f64> = (0..n).map(|i| zr[n + i] * h_prev[i]).collect();
        let h_new = (0..n)
            .map(|i| {
                let cand = (xb[2 * n + i] + dot(self.u_cand.row(i), &rh)).tanh();
                let z = zr[i];
                z * h_prev[i] + (1.0 - z) * cand
            })
            .collect();
        Ok(h_new)
    }
}

/// `h_t = z ⊙ h_{t-1} + (1 - z) ⊙ tanh(W_c x + U_c (r ⊙ h_{t-1}) + b_c)`
/// with `z, r = σ(W x + U h_{t-1} + b)`.
pub fn gru_step(params: &GruParams, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>, NeuralError> {
    params.step(x, h_prev)
}

/// A recurrent cell whose weights live in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecurrentCell {
    pub kind: CellKind,
    pub input_dim: usize,
    pub hidden_dim: usize,
    w_input: ParamId,
    u_gates: Option<ParamId>,
    u_cand: ParamId,
    bias: ParamId,
}

impl RecurrentCell {
    /// Registers `<prefix>.w_input`, `<prefix>.u_gates` (GRU only),
    /// `<prefix>.u_cand` and `<prefix>.bias`.
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        kind: CellKind,
        input_dim: usize,
        hidden_dim: usize,
        init_scale: f64,
        rng: &mut R,
    ) -> Result<Self, NeuralError> {
        let gates = match kind {
            CellKind::Gru => 3,
            CellKind::Tanh => 1,
        };
        let w_input = store.insert_uniform(
            &format!("{prefix}.w_input"),
            &[gates * hidden_dim, input_dim],
            init_scale,
            rng,
        )?;
        let u_gates = match kind {
            CellKind::Gru => Some(store.insert_uniform(
                &format!("{prefix}.u_gates"),
                &[2 * hidden_dim, hidden_dim],
                init_scale,
                rng,
            )?),
            CellKind::Tanh => None,
        };
        let u_cand = store.insert_uniform(
            &format!("{prefix}.u_cand"),
            &[hidden_dim, hidden_dim],
            init_scale,
            rng,
        )?;
        let bias = store.insert_uniform(
            &format!("{prefix}.bias"),
            &[gates * hidden_dim],
            init_scale,
            rng,
        )?;
        Ok(Self {
            kind,
            input_dim,
            hidden_dim,
            w_input,
            u_gates,
            u_cand,
            bias,
        })
    }

    /// Re-binds a cell to parameters already present in `store`.
    pub fn bind(
        store: &ParamStore,
        prefix: &str,
        kind: CellKind,
        input_dim: usize,
        hidden_dim: usize,
    ) -> Result<Self, NeuralError> {
        let find = |suffix: &str| {
            let name = format!("{prefix}.{suffix}");
            store.id(&name).ok_or(NeuralError::MissingParam(name))
        };
        Ok(Self {
            kind,
            input_dim,
            hidden_dim,
            w_input: find("w_input")?,
            u_gates: match kind {
                CellKind::Gru => Some(find("u_gates")?),
                CellKind::Tanh => None,
            },
            u_cand: find("u_cand")?,
            bias: find("bias")?,
        })
    }

    /// Copies the weights out as standalone [`GruParams`] (GRU cells only).
    pub fn to_params(&self, store: &ParamStore) -> Option<GruParams> {
        let u_gates = self.u_gates?;
        Some(GruParams {
            input_dim: self.input_dim,
            hidden_dim: self.hidden_dim,
            w_input: store.get(self.w_input).clone(),
            u_gates: store.get(u_gates).clone(),
            u_cand: store.get(self.u_cand).clone(),
            bias: store.get(self.bias).clone(),
        })
    }

    /// Bias node for this cell. Record once per tape and pass to [`Self::step`].
    pub fn bias_var(&self, tape: &mut Tape<'_>) -> Var {
        tape.param(self.bias)
    }

    /// Records one recurrence step on `tape`.
    pub fn step(
        &self,
        tape: &mut Tape<'_>,
        bias: Var,
        x: Var,
        h_prev: Var,
    ) -> Result<Var, NeuralError> {
        let n = self.hidden_dim;
        let xw = tape.matvec(self.w_input, x)?;
        let xb = tape.add(xw, bias)?;
        match (self.kind, self.u_gates) {
            (CellKind::Gru, Some(u_gates)) => {
                let gate_x = tape.slice(xb, 0, 2 * n)?;
                let gate_h = tape.matvec(u_gates, h_prev)?;
                let gate_pre = tape.add(gate_x, gate_h)?;
                let zr = tape.sigmoid(gate_pre);
                let z = tape.slice(zr, 0, n)?;
                let r = tape.slice(zr, n, n)?;
                let rh = tape.mul(r, h_prev)?;
                let cand_x = tape.slice(xb, 2 * n, n)?;
                let cand_h = tape.matvec(self.u_cand, rh)?;
                let cand_pre = tape.add(cand_x, cand_h)?;
                let cand = tape.tanh(cand_pre);
                let keep = tape.mul(z, h_prev)?;
                let one_minus_z = tape.one_minus(z);
                let write = tape.mul(one_minus_z, cand)?;
                tape.add(keep, write)
            }
            _ => {
                let hu = tape.matvec(self.u_cand, h_prev)?;
                let pre = tape.add(xb, hu)?;
                Ok(tape.tanh(pre))
            }
        }
    }
}
