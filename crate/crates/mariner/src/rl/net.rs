//! Fully connected value network with hand-rolled backprop.
//!
//! The production shape is 27-64-64-4 (ray grid plus target bearing in,
//! one value per control primitive out), but layer sizes stay generic so
//! gradient tests can run on tiny networks against finite differences.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Transition;

/// Huber delta for the TD loss.
pub const HUBER_DELTA: f64 = 1.0;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetError {
    #[error("input has {got} features, network expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite loss at gradient step {0}: training diverged")]
    Diverged(u64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `out_dim x in_dim`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Layer {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Layer { in_dim, out_dim, w: vec![0.0; in_dim * out_dim], b: vec![0.0; out_dim] }
    }

    fn seeded<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        // Xavier-uniform fan-in/fan-out limit.
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let w = (0..in_dim * out_dim).map(|_| rng.gen_range(-limit..limit)).collect();
        let b = vec![0.0; out_dim];
        Layer { in_dim, out_dim, w, b }
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.b.clone();
        for (o, out_v) in out.iter_mut().enumerate() {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            *out_v += row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
        }
        out
    }
}

/// A multilayer perceptron with rectified-linear hidden units and a linear
/// output layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
}

impl Mlp {
    pub fn seeded<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        let layers =
            sizes.windows(2).map(|pair| Layer::seeded(pair[0], pair[1], rng)).collect();
        Mlp { layers }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        let layers = sizes.windows(2).map(|pair| Layer::zeros(pair[0], pair[1])).collect();
        Mlp { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map(|l| l.in_dim).unwrap_or(0)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim).unwrap_or(0)
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.input_dim()];
        sizes.extend(self.layers.iter().map(|l| l.out_dim));
        sizes
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Forward pass; errors on a dimension mismatch.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NetError> {
        if x.len() != self.input_dim() {
            return Err(NetError::DimensionMismatch { expected: self.input_dim(), got: x.len() });
        }
        let mut act = x.to_vec();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            act = layer.affine(&act);
            if i != last {
                for v in &mut act {
                    *v = v.max(0.0);
                }
            }
        }
        Ok(act)
    }

    /// Forward pass keeping every post-activation, for backprop.
    fn forward_trace(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut a = layer.affine(acts.last().unwrap());
            if i != last {
                for v in &mut a {
                    *v = v.max(0.0);
                }
            }
            acts.push(a);
        }
        acts
    }
}

/// Gradient accumulator with the same shape as the network.
#[derive(Clone, Debug)]
pub struct Grads {
    pub layers: Vec<Layer>,
}

impl Grads {
    fn zeros_like(net: &Mlp) -> Self {
        Grads {
            layers: net.layers.iter().map(|l| Layer::zeros(l.in_dim, l.out_dim)).collect(),
        }
    }
}

fn huber(d: f64) -> f64 {
    if d.abs() <= HUBER_DELTA {
        0.5 * d * d
    } else {
        HUBER_DELTA * (d.abs() - 0.5 * HUBER_DELTA)
    }
}

fn huber_grad(d: f64) -> f64 {
    d.clamp(-HUBER_DELTA, HUBER_DELTA)
}

/// Computes the batch TD loss and its gradient without touching the network.
///
/// Targets are `y = r + gamma * max_a Q_target(z', a)` and plain `y = r` on
/// terminal transitions; the loss is the mean Huber loss between the taken
/// action's value and `y`.
pub fn td_grads(
    net: &Mlp,
    target_net: &Mlp,
    batch: &[Transition],
    gamma: f64,
) -> Result<(f64, Grads), NetError> {
    let mut grads = Grads::zeros_like(net);
    let mut loss = 0.0;
    let scale = 1.0 / batch.len() as f64;
    for tr in batch {
        let y = if tr.terminal {
            tr.reward
        } else {
            let next_q = target_net.forward(&tr.next_observation)?;
            tr.reward + gamma * next_q.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        };
        let acts = net.forward_trace(&tr.observation);
        let q = acts.last().unwrap()[tr.action.index()];
        let diff = q - y;
        loss += huber(diff) * scale;

        // Output gradient: only the taken action's unit carries error.
        let mut g = vec![0.0; net.output_dim()];
        g[tr.action.index()] = huber_grad(diff) * scale;
        for (i, layer) in net.layers.iter().enumerate().rev() {
            let input = &acts[i];
            let gl = &mut grads.layers[i];
            for o in 0..layer.out_dim {
                gl.b[o] += g[o];
                let row = &mut gl.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (wv, xv) in row.iter_mut().zip(input) {
                    *wv += g[o] * xv;
                }
            }
            if i > 0 {
                let mut g_prev = vec![0.0; layer.in_dim];
                for o in 0..layer.out_dim {
                    let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (gp, wv) in g_prev.iter_mut().zip(row) {
                        *gp += g[o] * wv;
                    }
                }
                // ReLU mask from the stored post-activation.
                for (gp, &a) in g_prev.iter_mut().zip(input.iter()) {
                    if a <= 0.0 {
                        *gp = 0.0;
                    }
                }
                g = g_prev;
            }
        }
    }
    Ok((loss, grads))
}

/// One stochastic-gradient-descent step.
pub fn apply_sgd(net: &mut Mlp, grads: &Grads, lr: f64) {
    for (layer, g) in net.layers.iter_mut().zip(&grads.layers) {
        for (w, gw) in layer.w.iter_mut().zip(&g.w) {
            *w -= lr * gw;
        }
        for (b, gb) in layer.b.iter_mut().zip(&g.b) {
            *b -= lr * gb;
        }
    }
}

/// TD loss plus one gradient step; returns the pre-step mean batch loss.
pub fn td_update(
    net: &mut Mlp,
    target_net: &Mlp,
    batch: &[Transition],
    gamma: f64,
    lr: f64,
) -> Result<f64, NetError> {
    let (loss, grads) = td_grads(net, target_net, batch, gamma)?;
    apply_sgd(net, &grads, lr);
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::ControlPrimitive;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(obs: Vec<f64>, action: ControlPrimitive, reward: f64, next: Vec<f64>, terminal: bool) -> Transition {
        Transition { observation: obs, action, reward, next_observation: next, terminal }
    }

    #[test]
    fn zero_net_outputs_zeros() {
        let net = Mlp::zeros(&[27, 64, 64, 4]);
        let out = net.forward(&vec![0.3; 27]).unwrap();
        assert_eq!(out, vec![0.0; 4]);
    }

    #[test]
    fn hand_computed_two_parameter_forward() {
        // 1 input -> 1 hidden (relu) -> 1 output, weights set by hand:
        // h = relu(2x + 1), y = -0.5h + 0.25.
        let mut net = Mlp::zeros(&[1, 1, 1]);
        net.layers[0].w[0] = 2.0;
        net.layers[0].b[0] = 1.0;
        net.layers[1].w[0] = -0.5;
        net.layers[1].b[0] = 0.25;
        let y = net.forward(&[3.0]).unwrap()[0];
        assert!((y - (-0.5 * 7.0 + 0.25)).abs() < 1e-15);
        // Negative pre-activation rectifies to zero.
        let y = net.forward(&[-1.0]).unwrap()[0];
        assert!((y - 0.25).abs() < 1e-15);
    }

    #[test]
    fn outputs_stay_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Mlp::seeded(&[27, 64, 64, 4], &mut rng);
        let out = net.forward(&vec![1.0; 27]).unwrap();
        assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let net = Mlp::zeros(&[27, 64, 64, 4]);
        assert_eq!(
            net.forward(&[0.0; 5]).unwrap_err(),
            NetError::DimensionMismatch { expected: 27, got: 5 }
        );
    }

    #[test]
    fn exact_fit_has_zero_loss() {
        // Zero net predicts 0 for every action; terminal reward 0 gives y=0.
        let mut net = Mlp::zeros(&[2, 2, 4]);
        let target = net.clone();
        let batch = vec![tr(vec![0.5, 0.5], ControlPrimitive::TurnLeft, 0.0, vec![0.0, 0.0], true)];
        let loss = td_update(&mut net, &target, &batch, 0.95, 0.005).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn batch_of_identical_transitions_matches_single_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = Mlp::seeded(&[4, 8, 4], &mut rng);
        let target = net.clone();
        let one = tr(vec![0.1, -0.2, 0.3, 0.9], ControlPrimitive::MoveForward, -0.1,
                     vec![0.2, -0.1, 0.4, 0.8], false);
        let (single, _) = td_grads(&net, &target, &[one.clone()], 0.95).unwrap();
        let (batch, _) = td_grads(&net, &target, &vec![one; 64], 0.95).unwrap();
        assert!((single - batch).abs() < 1e-12);
    }

    /// Central finite differences over every parameter of a tiny network.
    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        // 2-2-2: ten parameters, two actions.
        let net = Mlp::seeded(&[2, 2, 2], &mut rng);
        let target = Mlp::seeded(&[2, 2, 2], &mut rng);
        let batch = vec![
            tr(vec![0.4, -0.7], ControlPrimitive::TurnLeft, -0.1, vec![0.1, 0.2], false),
            tr(vec![-0.3, 0.6], ControlPrimitive::TurnRight, 9.9, vec![0.0, 0.0], true),
            tr(vec![0.9, 0.2], ControlPrimitive::TurnLeft, -0.2, vec![-0.5, 0.3], false),
        ];
        let gamma = 0.95;
        let (_, grads) = td_grads(&net, &target, &batch, gamma).unwrap();

        let eps = 1e-6;
        let loss_of = |net: &Mlp| td_grads(net, &target, &batch, gamma).unwrap().0;
        for li in 0..net.layers.len() {
            for (is_w, len) in [(true, net.layers[li].w.len()), (false, net.layers[li].b.len())] {
                for k in 0..len {
                    let mut plus = net.clone();
                    let mut minus = net.clone();
                    if is_w {
                        plus.layers[li].w[k] += eps;
                        minus.layers[li].w[k] -= eps;
                    } else {
                        plus.layers[li].b[k] += eps;
                        minus.layers[li].b[k] -= eps;
                    }
                    let fd = (loss_of(&plus) - loss_of(&minus)) / (2.0 * eps);
                    let analytic =
                        if is_w { grads.layers[li].w[k] } else { grads.layers[li].b[k] };
                    let denom = fd.abs().max(analytic.abs()).max(1e-8);
                    assert!(
                        (fd - analytic).abs() / denom < 1e-4,
                        "layer {li} param {k}: fd {fd} vs analytic {analytic}"
                    );
                }
            }
        }
    }

    #[test]
    fn sgd_moves_against_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut net = Mlp::seeded(&[2, 2, 2], &mut rng);
        let target = net.clone();
        let batch =
            vec![tr(vec![0.4, -0.7], ControlPrimitive::TurnLeft, 5.0, vec![0.0, 0.0], true)];
        let before = td_grads(&net, &target, &batch, 0.95).unwrap().0;
        for _ in 0..50 {
            td_update(&mut net, &target, &batch, 0.95, 0.05).unwrap();
        }
        let after = td_grads(&net, &target, &batch, 0.95).unwrap().0;
        assert!(after < before, "loss should fall on a fixed batch: {before} -> {after}");
    }
}
