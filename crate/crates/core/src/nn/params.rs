//! Parameter containers and the tensor-enumeration trait shared by the
//! optimizer and the finite-difference gradient checker.

use ndarray::Array2;
use rand::Rng as _;

use crate::rng::Rng;

/// Dense 64-bit matrix; vectors are stored as single-column matrices so that
/// every trainable tensor has a uniform representation.
pub type Matrix = Array2<f64>;

/// Anything that exposes its trainable tensors in a stable order.
///
/// The order must be identical between a model and its gradient container;
/// the optimizer and gradient checker walk both in lockstep.
pub trait TensorSet {
    fn tensors(&self) -> Vec<(String, &Matrix)>;
    fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)>;

    fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}

/// Uniform Glorot initialization: U(-b, b) with b = sqrt(6 / (fan_in + fan_out)).
pub fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Matrix::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound))
}

pub fn zeros(rows: usize, cols: usize) -> Matrix {
    Matrix::zeros((rows, cols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::master_rng;

    #[test]
    fn glorot_bounds_and_determinism() {
        let mut rng = master_rng(1);
        let w = glorot(10, 20, &mut rng);
        let bound = (6.0 / 30.0f64).sqrt();
        assert!(w.iter().all(|v| v.abs() < bound));

        let mut rng2 = master_rng(1);
        let w2 = glorot(10, 20, &mut rng2);
        assert_eq!(w, w2);
    }
}
