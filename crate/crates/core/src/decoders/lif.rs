//! Leaky integrate-and-fire layer.
//!
//! Membrane update per step:
//!
//! ```text
//! U[t] = beta * U[t-1] + W * X[t] - S[t-1] * theta
//! theta = beta * U[t-1] + W * X[t]   (reset-to-zero)
//!       = 0                          (no reset)
//! S[t]  = 1 if U[t] > U_thr else 0   (strict inequality)
//! ```
//!
//! With reset-to-zero, a neuron that spiked at `t-1` integrates to exactly
//! zero at `t` (the subtraction cancels term-for-term in floating point).
//! `beta` is kept in (0, 1) by a sigmoid reparameterization; the trainable
//! quantity is `raw_beta`. During backprop the reset value `theta` is treated
//! as a constant, and the spike nonlinearity uses the arctangent surrogate.

use rand_chacha::ChaCha8Rng;

use super::matrix::Matrix;
use super::real::Real;
use super::surrogate::{surrogate_grad, surrogate_spike};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResetMode {
    ToZero,
    NoReset,
}

/// Spike nonlinearity selector: `Hard` is the production Heaviside; `Smooth`
/// substitutes the surrogate's antiderivative so gradient checks can compare
/// analytic and numerical derivatives of the same function.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpikeMode {
    Hard,
    Smooth,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LifLayer<S> {
    /// out x in synaptic weights (no bias; drive is `W * X`).
    pub w: Matrix<S>,
    /// beta = sigmoid(raw_beta), per layer.
    pub raw_beta: S,
    /// Spike threshold, per layer.
    pub u_thr: S,
    pub reset: ResetMode,
}

#[derive(Clone, Debug)]
pub struct LifState<S> {
    pub u: Vec<S>,
    pub s: Vec<S>,
}

impl<S: Real> LifState<S> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            u: vec![S::zero(); dim],
            s: vec![S::zero(); dim],
        }
    }
}

/// Everything one step of BPTT needs.
#[derive(Clone, Debug)]
pub struct LifStepRecord<S> {
    pub input: Vec<S>,
    pub u_prev: Vec<S>,
    pub theta: Vec<S>,
    pub u: Vec<S>,
    pub s: Vec<S>,
}

impl<S: Real> LifLayer<S> {
    pub fn init(out_dim: usize, in_dim: usize, reset: ResetMode, rng: &mut ChaCha8Rng) -> Self {
        // uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
        let k = 1.0 / (in_dim as f64).sqrt();
        let w = Matrix::from_fn(out_dim, in_dim, |_, _| S::uniform(rng, -k, k));
        Self {
            w,
            raw_beta: S::of(2.0), // beta ~ 0.88
            u_thr: S::one(),
            reset,
        }
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols
    }

    pub fn beta(&self) -> S {
        self.raw_beta.sigmoid()
    }

    /// Advances one step, returning the full record; `frozen_theta`
    /// substitutes externally fixed reset values (gradient checks only).
    pub fn step(
        &self,
        state: &mut LifState<S>,
        x: &[S],
        mode: SpikeMode,
        alpha: S,
        frozen_theta: Option<&[S]>,
    ) -> LifStepRecord<S> {
        debug_assert_eq!(x.len(), self.in_dim());
        let beta = self.beta();
        let drive = self.w.matvec(x);
        let u_prev = std::mem::take(&mut state.u);
        let s_prev = std::mem::take(&mut state.s);

        let integrated: Vec<S> = u_prev
            .iter()
            .zip(&drive)
            .map(|(&u, &d)| beta * u + d)
            .collect();
        let theta: Vec<S> = match frozen_theta {
            Some(t) => t.to_vec(),
            None => match self.reset {
                ResetMode::ToZero => integrated.clone(),
                ResetMode::NoReset => vec![S::zero(); self.out_dim()],
            },
        };
        let u: Vec<S> = integrated
            .iter()
            .zip(&s_prev)
            .zip(&theta)
            .map(|((&acc, &sp), &th)| acc - sp * th)
            .collect();
        let s: Vec<S> = u
            .iter()
            .map(|&uj| match mode {
                SpikeMode::Hard => {
                    if uj > self.u_thr {
                        S::one()
                    } else {
                        S::zero()
                    }
                }
                SpikeMode::Smooth => surrogate_spike(uj - self.u_thr, alpha),
            })
            .collect();

        state.u = u.clone();
        state.s = s.clone();
        LifStepRecord {
            input: x.to_vec(),
            u_prev,
            theta,
            u,
            s,
        }
    }

    pub fn param_count(&self) -> usize {
        self.w.data.len() + 2
    }

    pub fn push_params(&self, out: &mut Vec<S>) {
        out.extend_from_slice(&self.w.data);
        out.push(self.raw_beta);
        out.push(self.u_thr);
    }

    pub fn read_params(&mut self, src: &mut std::slice::Iter<'_, S>) {
        for w in &mut self.w.data {
            *w = *src.next().expect("parameter vector too short");
        }
        self.raw_beta = *src.next().expect("parameter vector too short");
        self.u_thr = *src.next().expect("parameter vector too short");
    }
}

/// One LIF step in production (hard-spike) mode. Returns the spike vector;
/// the updated membrane potential lives in `state.u`.
pub fn lif_step<S: Real>(layer: &LifLayer<S>, state: &mut LifState<S>, x: &[S]) -> Vec<S> {
    layer
        .step(state, x, SpikeMode::Hard, S::of(super::surrogate::DEFAULT_ALPHA), None)
        .s
}

/// Gradients of a LIF layer over a full sequence.
#[derive(Clone, Debug)]
pub struct LifSeqGrads<S> {
    pub dw: Matrix<S>,
    pub draw_beta: S,
    pub du_thr: S,
}

/// Reverse pass over a recorded sequence for a spiking (reset-capable) layer.
///
/// `ds_above[t]` is the loss gradient with respect to this layer's emitted
/// spikes at step `t` (already routed through any dropout mask). Returns the
/// parameter gradients and the per-step gradient with respect to the layer
/// inputs.
pub fn lif_backward_seq<S: Real>(
    layer: &LifLayer<S>,
    records: &[LifStepRecord<S>],
    ds_above: &[Vec<S>],
    alpha: S,
) -> (LifSeqGrads<S>, Vec<Vec<S>>) {
    let steps = records.len();
    assert_eq!(ds_above.len(), steps);
    let out_dim = layer.out_dim();
    let beta = layer.beta();

    let mut dw = Matrix::zeros(out_dim, layer.in_dim());
    let mut dbeta = S::zero();
    let mut du_thr = S::zero();
    let mut dinputs = vec![Vec::new(); steps];

    let mut du_next = vec![S::zero(); out_dim];
    let mut theta_next: &[S] = &[];
    for t in (0..steps).rev() {
        let rec = &records[t];
        // gradient reaching s[t]: from the layer above plus the reset path of
        // step t+1 (U[t+1] subtracts s[t] * theta[t+1], theta detached)
        let mut ds = ds_above[t].clone();
        if !theta_next.is_empty() {
            for j in 0..out_dim {
                ds[j] = ds[j] - du_next[j] * theta_next[j];
            }
        }
        // through the spike nonlinearity with the surrogate derivative
        let mut du = vec![S::zero(); out_dim];
        for j in 0..out_dim {
            let g = surrogate_grad(rec.u[j] - layer.u_thr, alpha);
            du[j] = du_next[j] * beta + ds[j] * g;
            du_thr = du_thr - ds[j] * g;
        }
        // U[t] = beta*U[t-1] + W*x[t] - s[t-1]*theta[t]
        dw.add_outer(&du, &rec.input);
        dinputs[t] = layer.w.matvec_t(&du);
        for j in 0..out_dim {
            dbeta = dbeta + du[j] * rec.u_prev[j];
        }
        du_next = du;
        theta_next = &rec.theta;
    }

    // chain through beta = sigmoid(raw_beta)
    let draw_beta = dbeta * beta * (S::one() - beta);
    (
        LifSeqGrads {
            dw,
            draw_beta,
            du_thr,
        },
        dinputs,
    )
}
