//! AdamW with decoupled weight decay.

use crate::model::params::TensorKind;
use crate::model::Classifier;

use super::TrainError;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates, one pair of buffers per tensor, in the
/// same order the parameter containers enumerate their tensors.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl OptimizerState {
    pub fn new(tensor_lens: impl IntoIterator<Item = usize>) -> OptimizerState {
        let m: Vec<Vec<f64>> = tensor_lens.into_iter().map(|n| vec![0.0; n]).collect();
        let v = m.clone();
        OptimizerState { m, v, t: 0 }
    }

    pub fn for_classifier(classifier: &Classifier) -> OptimizerState {
        let lens = classifier
            .encoder
            .tensors()
            .into_iter()
            .chain(classifier.head.tensors())
            .map(|(data, _)| data.len())
            .collect::<Vec<_>>();
        OptimizerState::new(lens)
    }

    /// Number of optimizer steps taken so far.
    pub fn steps(&self) -> u64 {
        self.t
    }
}

/// One AdamW step over a flat list of (tensor, kind) pairs.
///
/// Update per coordinate: `θ ← θ − lr · (m̂ / (√v̂ + ε) + wd · θ)` with
/// bias-corrected moments. Decay applies only to kinds that decay (weights);
/// biases and layer-norm parameters are exempt. A non-finite gradient aborts
/// the step before any parameter or state buffer is touched.
pub fn adamw_step(
    params: &mut [(&mut [f64], TensorKind)],
    grads: &[(&[f64], TensorKind)],
    state: &mut OptimizerState,
    lr: f64,
    weight_decay: f64,
) -> Result<(), TrainError> {
    assert_eq!(params.len(), grads.len(), "tensor list mismatch");
    assert_eq!(params.len(), state.m.len(), "optimizer state mismatch");
    for (ti, (g, _)) in grads.iter().enumerate() {
        assert_eq!(g.len(), params[ti].0.len(), "tensor length mismatch");
        if g.iter().any(|x| !x.is_finite()) {
            return Err(TrainError::NonFiniteGradient { tensor: ti });
        }
    }

    state.t += 1;
    let bc1 = 1.0 - BETA1.powi(state.t as i32);
    let bc2 = 1.0 - BETA2.powi(state.t as i32);

    for (ti, ((theta, kind), (g, _))) in params.iter_mut().zip(grads).enumerate() {
        let decay = if kind.decays() { weight_decay } else { 0.0 };
        let m = &mut state.m[ti];
        let v = &mut state.v[ti];
        for i in 0..theta.len() {
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            theta[i] -= lr * (m_hat / (v_hat.sqrt() + ADAM_EPS) + decay * theta[i]);
        }
    }
    Ok(())
}

/// [`adamw_step`] over a whole classifier, gradients carried in a classifier
/// of the same shape.
pub fn adamw_step_classifier(
    params: &mut Classifier,
    grads: &Classifier,
    state: &mut OptimizerState,
    lr: f64,
    weight_decay: f64,
) -> Result<(), TrainError> {
    let mut p: Vec<(&mut [f64], TensorKind)> = params.encoder.tensors_mut();
    p.extend(params.head.tensors_mut());
    let mut g: Vec<(&[f64], TensorKind)> = grads.encoder.tensors();
    g.extend(grads.head.tensors());
    adamw_step(&mut p, &g, state, lr, weight_decay)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_step(
        theta: &mut f64,
        grad: f64,
        kind: TensorKind,
        state: &mut OptimizerState,
        lr: f64,
        wd: f64,
    ) -> Result<(), TrainError> {
        let mut slot = [*theta];
        let g = [grad];
        adamw_step(
            &mut [(&mut slot[..], kind)],
            &[(&g[..], kind)],
            state,
            lr,
            wd,
        )?;
        *theta = slot[0];
        Ok(())
    }

    #[test]
    fn zero_gradient_without_decay_is_a_fixpoint() {
        let mut theta = 0.731;
        let mut state = OptimizerState::new([1]);
        for _ in 0..5 {
            scalar_step(&mut theta, 0.0, TensorKind::Weight, &mut state, 0.01, 0.0).unwrap();
        }
        assert_eq!(theta, 0.731);
        assert_eq!(state.steps(), 5);
    }

    #[test]
    fn zero_gradient_with_decay_contracts_weights_exactly() {
        // lr·wd = 1·0.01, so each step multiplies a weight by exactly 0.99.
        let mut theta = 2.0;
        let mut state = OptimizerState::new([1]);
        scalar_step(&mut theta, 0.0, TensorKind::Weight, &mut state, 1.0, 0.01).unwrap();
        assert_eq!(theta, 2.0 * 0.99);
        scalar_step(&mut theta, 0.0, TensorKind::Weight, &mut state, 1.0, 0.01).unwrap();
        assert_eq!(theta, 2.0 * 0.99 * 0.99);
    }

    #[test]
    fn decay_exempts_biases_and_layer_norm() {
        for kind in [TensorKind::Bias, TensorKind::LnScale, TensorKind::LnShift] {
            let mut theta = 2.0;
            let mut state = OptimizerState::new([1]);
            scalar_step(&mut theta, 0.0, kind, &mut state, 1.0, 0.01).unwrap();
            assert_eq!(theta, 2.0, "{kind:?} must not decay");
        }
    }

    #[test]
    fn first_step_matches_hand_computation() {
        // t=1: m̂ = g, v̂ = g², so the update is lr·(sign(g)/(1+ε·...)+wd·θ).
        let mut theta = 1.0;
        let mut state = OptimizerState::new([1]);
        scalar_step(&mut theta, 1.0, TensorKind::Weight, &mut state, 0.001, 0.01).unwrap();
        let m_hat = 1.0f64;
        let v_hat = 1.0f64;
        let expected = 1.0 - 0.001 * (m_hat / (v_hat.sqrt() + ADAM_EPS) + 0.01 * 1.0);
        assert!((theta - expected).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_aborts_without_touching_state() {
        let mut theta = 1.0;
        let mut state = OptimizerState::new([1]);
        let err = scalar_step(
            &mut theta,
            f64::NAN,
            TensorKind::Weight,
            &mut state,
            0.001,
            0.01,
        )
        .unwrap_err();
        assert!(matches!(err, TrainError::NonFiniteGradient { tensor: 0 }));
        assert_eq!(theta, 1.0);
        assert_eq!(state.steps(), 0);
    }

    #[test]
    fn moments_shrink_the_step_for_oscillating_gradients() {
        // Alternating ±g leaves the first moment near zero while the second
        // moment stays at g², so total movement lands far below what the
        // same gradient magnitude produces when its sign is consistent.
        let lr = 0.1;
        let steps = 50;
        let mut osc = 0.0;
        let mut state = OptimizerState::new([1]);
        for k in 0..steps {
            let g = if k % 2 == 0 { 1.0 } else { -1.0 };
            scalar_step(&mut osc, g, TensorKind::Weight, &mut state, lr, 0.0).unwrap();
        }
        let mut steady = 0.0;
        let mut state = OptimizerState::new([1]);
        for _ in 0..steps {
            scalar_step(&mut steady, 1.0, TensorKind::Weight, &mut state, lr, 0.0).unwrap();
        }
        assert!((steady + lr * steps as f64).abs() < 1e-6 * lr * steps as f64);
        assert!(osc.abs() < 0.1 * steady.abs());
    }
}
