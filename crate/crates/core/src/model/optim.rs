//! Stochastic gradient descent with classical momentum.

use crate::error::{Error, Result};

pub const DEFAULT_LR: f64 = 0.001;
pub const DEFAULT_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub velocity: Vec<Vec<f64>>,
    pub lr: f64,
    pub momentum: f64,
}

impl OptimizerState {
    /// Zero velocity shaped like `params`.
    pub fn new<'a>(params: impl IntoIterator<Item = &'a [f64]>, lr: f64, momentum: f64) -> Self {
        OptimizerState {
            velocity: params.into_iter().map(|p| vec![0.0; p.len()]).collect(),
            lr,
            momentum,
        }
    }
}

/// `v ← momentum·v + g`, then `w ← w − lr·v`.
pub fn sgd_step(params: &mut [&mut Vec<f64>], grads: &[Vec<f64>], state: &mut OptimizerState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.velocity.len() {
        return Err(Error::Shape(format!(
            "{} parameter tensors, {} gradients, {} velocities",
            params.len(),
            grads.len(),
            state.velocity.len()
        )));
    }
    for ((p, g), v) in params.iter().zip(grads).zip(&state.velocity) {
        if p.len() != g.len() || p.len() != v.len() {
            return Err(Error::Shape("gradient or velocity does not match its parameter".into()));
        }
    }
    let (lr, mu) = (state.lr, state.momentum);
    for ((p, g), v) in params.iter_mut().zip(grads).zip(state.velocity.iter_mut()) {
        for ((w, &gi), vi) in p.iter_mut().zip(g).zip(v.iter_mut()) {
            *vi = mu * *vi + gi;
            *w -= lr * *vi;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step() {
        let mut w = vec![0.5];
        let mut state = OptimizerState::new([w.as_slice()], DEFAULT_LR, DEFAULT_MOMENTUM);
        sgd_step(&mut [&mut w], &[vec![1.0]], &mut state).unwrap();
        assert!((w[0] - (0.5 - 0.001)).abs() < 1e-15);
        assert_eq!(state.velocity[0][0], 1.0);
    }

    #[test]
    fn velocity_decays_without_gradient() {
        let mut w = vec![0.0];
        let mut state = OptimizerState::new([w.as_slice()], DEFAULT_LR, DEFAULT_MOMENTUM);
        state.velocity[0][0] = 1.0;
        let mut expected = 1.0;
        for _ in 0..5 {
            sgd_step(&mut [&mut w], &[vec![0.0]], &mut state).unwrap();
            expected *= 0.9;
            assert!((state.velocity[0][0] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn two_step_unroll() {
        let mut w = vec![0.0];
        let mut state = OptimizerState::new([w.as_slice()], 0.001, 0.9);
        for _ in 0..2 {
            sgd_step(&mut [&mut w], &[vec![1.0]], &mut state).unwrap();
        }
        assert!((w[0] - -0.0029).abs() <= 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let mut w = vec![0.0, 1.0];
        let mut state = OptimizerState::new([w.as_slice()], 0.001, 0.9);
        assert!(sgd_step(&mut [&mut w], &[vec![1.0]], &mut state).is_err());
        assert!(sgd_step(&mut [&mut w], &[], &mut state).is_err());
    }
}
