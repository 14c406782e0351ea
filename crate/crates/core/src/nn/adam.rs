//! Adaptive moment estimation with bias correction.

use super::params::{Matrix, TensorSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m: Vec<Matrix>,
    v: Vec<Matrix>,
}

impl OptimizerState {
    pub fn new(params: &impl TensorSet, lr: f64) -> Self {
        let m = params
            .tensors()
            .iter()
            .map(|(_, t)| Matrix::zeros(t.raw_dim()))
            .collect::<Vec<_>>();
        let v = m.clone();
        OptimizerState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m,
            v,
        }
    }

    /// One update. `params` and `grads` must enumerate tensors in the same
    /// order the state was built from.
    pub fn step<P: TensorSet>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let mut ps = params.tensors_mut();
        let gs = grads.tensors();
        if ps.len() != self.m.len() || gs.len() != self.m.len() {
            return Err(Error::shape("optimizer tensor count mismatch".to_string()));
        }
        for (idx, ((_, p), (_, g))) in ps.iter_mut().zip(gs.iter()).enumerate() {
            if p.raw_dim() != g.raw_dim() || p.raw_dim() != self.m[idx].raw_dim() {
                return Err(Error::shape("optimizer tensor shape mismatch".to_string()));
            }
            let m = &mut self.m[idx];
            let v = &mut self.v[idx];
            m.zip_mut_with(g, |mv, gv| *mv = self.beta1 * *mv + (1.0 - self.beta1) * gv);
            v.zip_mut_with(g, |vv, gv| *vv = self.beta2 * *vv + (1.0 - self.beta2) * gv * gv);
            let lr = self.lr;
            let eps = self.epsilon;
            ndarray::Zip::from(&mut **p)
                .and(&*m)
                .and(&*v)
                .for_each(|pv, mv, vv| {
                    let m_hat = mv / bc1;
                    let v_hat = vv / bc2;
                    *pv -= lr * m_hat / (v_hat.sqrt() + eps);
                });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::dense::DenseParams;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = DenseParams::zeros(2, 2);
        p.w.mapv_inplace(|_| 1.5);
        let g = p.zeros_like();
        let mut opt = OptimizerState::new(&p, 1e-3);
        opt.step(&mut p, &g).unwrap();
        assert_eq!(opt.step, 1);
        assert!(p.w.iter().all(|v| *v == 1.5));
    }

    #[test]
    fn first_step_moves_by_lr_in_sign_of_gradient() {
        let mut p = DenseParams::zeros(1, 2);
        let mut g = p.zeros_like();
        g.w[[0, 0]] = 3.0;
        g.w[[0, 1]] = -0.5;
        let mut opt = OptimizerState::new(&p, 0.1);
        opt.step(&mut p, &g).unwrap();
        // At t=1 bias correction makes the update lr * g/|g| up to epsilon.
        assert_abs_diff_eq!(p.w[[0, 0]], -0.1, epsilon = 1e-6);
        assert_abs_diff_eq!(p.w[[0, 1]], 0.1, epsilon = 1e-6);
    }

    #[test]
    fn minimizes_scalar_quadratic() {
        // f(w) = w^2 starting at w = 1 with lr 0.1: |w| shrinks toward 0.
        let mut p = DenseParams::zeros(1, 1);
        p.w[[0, 0]] = 1.0;
        let mut opt = OptimizerState::new(&p, 0.1);
        for _ in 0..200 {
            let mut g = p.zeros_like();
            g.w[[0, 0]] = 2.0 * p.w[[0, 0]];
            opt.step(&mut p, &g).unwrap();
        }
        // Adam oscillates near the optimum, so only assert a big shrink.
        assert!(p.w[[0, 0]].abs() < 0.05, "w = {}", p.w[[0, 0]]);
    }
}
