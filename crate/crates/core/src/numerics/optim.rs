//! First-order parameter updates.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::tape::{Gradients, ParamId, ParamStore};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Descend,
    Ascend,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Descend => -1.0,
            Direction::Ascend => 1.0,
        }
    }
}

/// `param ← param − lr·grad`.
pub fn sgd_update(param: &mut Matrix, grad: &Matrix, lr: f64) -> Result<()> {
    if param.shape() != grad.shape() {
        return Err(Error::shape("sgd_update", param.shape(), grad.shape()));
    }
    param.axpy(-lr, grad)
}

/// Plain gradient step over a parameter group. Parameters absent from
/// `grads` are left untouched.
pub fn sgd_step(
    store: &mut ParamStore,
    ids: &[ParamId],
    grads: &Gradients,
    lr: f64,
    direction: Direction,
) -> Result<()> {
    for &id in ids {
        if let Some(g) = grads.param(id) {
            sgd_update(store.get_mut(id), g, -direction.sign() * lr)?;
        }
    }
    Ok(())
}

/// One Adam update of a single tensor. `step` is 1-based.
#[allow(clippy::too_many_arguments)]
pub fn adam_update(
    param: &mut Matrix,
    grad: &Matrix,
    m: &mut Matrix,
    v: &mut Matrix,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
) -> Result<()> {
    for other in [grad, &*m, &*v] {
        if param.shape() != other.shape() {
            return Err(Error::shape("adam_update", param.shape(), other.shape()));
        }
    }
    let bc1 = 1.0 - beta1.powi(step as i32);
    let bc2 = 1.0 - beta2.powi(step as i32);
    let (p, g) = (param.data_mut(), grad.data());
    for (((p, g), m), v) in p.iter_mut().zip(g).zip(m.data_mut()).zip(v.data_mut()) {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Adam state for a fixed parameter group (always descends).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    moments: BTreeMap<ParamId, (Matrix, Matrix)>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            moments: BTreeMap::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, store: &mut ParamStore, ids: &[ParamId], grads: &Gradients) -> Result<()> {
        self.step += 1;
        for &id in ids {
            let Some(g) = grads.param(id) else { continue };
            let p = store.get_mut(id);
            let (m, v) = self.moments.entry(id).or_insert_with(|| {
                (Matrix::zeros(p.rows(), p.cols()), Matrix::zeros(p.rows(), p.cols()))
            });
            adam_update(p, g, m, v, self.lr, self.beta1, self.beta2, self.eps, self.step)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::tape::Tape;

    fn square_grad(store: &ParamStore, id: ParamId, sign: f64) -> Gradients {
        let mut tape = Tape::new();
        let x = tape.param(store, id);
        let sq = tape.hadamard(x, x).unwrap();
        let loss = tape.scale(sq, sign);
        tape.backward(loss).unwrap()
    }

    #[test]
    fn zero_lr_leaves_params_unchanged() {
        let mut p = Matrix::from_rows(&[&[1.0, 2.0]]);
        let before = p.clone();
        sgd_update(&mut p, &Matrix::ones(1, 2), 0.0).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn sgd_on_square_decays_geometrically() {
        let mut store = ParamStore::new();
        let x = store.add("x", Matrix::filled(1, 1, 1.0));
        for _ in 0..100 {
            let g = square_grad(&store, x, 1.0);
            sgd_step(&mut store, &[x], &g, 0.1, Direction::Descend).unwrap();
        }
        // x_{k+1} = (1 - 2·0.1) x_k  →  0.8^100 ≈ 2.0e-10
        let v = store.get(x).scalar();
        assert!(v.abs() < 1e-4);
        assert!((v - 0.8f64.powi(100)).abs() < 1e-15);
    }

    #[test]
    fn ascent_on_negative_square_converges_to_zero() {
        let mut store = ParamStore::new();
        let x = store.add("x", Matrix::filled(1, 1, -1.0));
        for _ in 0..100 {
            let g = square_grad(&store, x, -1.0);
            sgd_step(&mut store, &[x], &g, 0.1, Direction::Ascend).unwrap();
        }
        assert!(store.get(x).scalar().abs() < 1e-4);
    }

    #[test]
    fn adam_shape_mismatch_errors() {
        let mut p = Matrix::zeros(1, 2);
        let mut m = Matrix::zeros(1, 2);
        let mut v = Matrix::zeros(1, 2);
        let err = adam_update(&mut p, &Matrix::zeros(2, 1), &mut m, &mut v, 0.1, 0.9, 0.999, 1e-8, 1);
        assert!(matches!(err, Err(Error::Shape { .. })));
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut store = ParamStore::new();
        let x = store.add("x", Matrix::filled(1, 1, 1.0));
        let mut adam = Adam::new(0.01);
        let g = square_grad(&store, x, 1.0);
        adam.step(&mut store, &[x], &g).unwrap();
        assert!((store.get(x).scalar() - 0.99).abs() < 1e-6);
    }
}
