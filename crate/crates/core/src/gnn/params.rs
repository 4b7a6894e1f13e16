use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{bail, Result};
use crate::matrix::Matrix;

/// Layer weights `W⁽⁰⁾ … W⁽ᴸ⁻¹⁾` and the head `W⁽ᴸ⁾`. There are no biases.
#[derive(Clone, Debug, PartialEq)]
pub struct GcnParams {
    layers: Vec<Matrix>,
    head: Matrix,
    seed: u64,
}

impl GcnParams {
    /// Glorot-uniform initialisation of `num_layers` GCN layers of width
    /// `hidden` and an `hidden x out_dim` head.
    pub fn init(in_dim: usize, hidden: usize, num_layers: usize, out_dim: usize, seed: u64) -> Result<Self> {
        if num_layers == 0 {
            bail!(InvalidArgument, "a model needs at least one layer");
        }
        if in_dim == 0 || hidden == 0 || out_dim == 0 {
            bail!(InvalidArgument, "layer widths must be positive");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut glorot = |rows: usize, cols: usize| {
            let limit = libm::sqrt(6.0 / (rows + cols) as f64);
            let data = (0..rows * cols)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            Matrix::from_vec(rows, cols, data).expect("sized buffer")
        };
        let mut layers = Vec::with_capacity(num_layers);
        let mut fan_in = in_dim;
        for _ in 0..num_layers {
            layers.push(glorot(fan_in, hidden));
            fan_in = hidden;
        }
        let head = glorot(hidden, out_dim);
        Ok(Self { layers, head, seed })
    }

    pub fn from_parts(layers: Vec<Matrix>, head: Matrix, seed: u64) -> Result<Self> {
        if layers.is_empty() {
            bail!(InvalidArgument, "a model needs at least one layer");
        }
        for (l, pair) in layers.windows(2).enumerate() {
            if pair[0].cols() != pair[1].rows() {
                bail!(Shape, "layer {} outputs {} columns but layer {} takes {}", l, pair[0].cols(), l + 1, pair[1].rows());
            }
        }
        let last = layers.last().unwrap().cols();
        if head.rows() != last {
            bail!(Shape, "head takes {} rows but the last layer outputs {}", head.rows(), last);
        }
        if !layers.iter().all(Matrix::is_finite) || !head.is_finite() {
            bail!(NonFinite, "parameters contain NaN or infinity");
        }
        Ok(Self { layers, head, seed })
    }

    pub fn layers(&self) -> &[Matrix] {
        &self.layers
    }

    pub fn head(&self) -> &Matrix {
        &self.head
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].rows()
    }

    pub fn out_dim(&self) -> usize {
        self.head.cols()
    }

    /// `[in, hidden_1, …, hidden_L, out]`
    pub fn dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.layers.iter().map(Matrix::rows).collect();
        d.push(self.head.rows());
        d.push(self.head.cols());
        d
    }

    pub fn bytes(&self) -> u64 {
        self.matrices().map(Matrix::bytes).sum()
    }

    pub fn matrices(&self) -> impl Iterator<Item = &Matrix> {
        self.layers.iter().chain(core::iter::once(&self.head))
    }

    pub(crate) fn matrices_mut(&mut self) -> impl Iterator<Item = &mut Matrix> {
        self.layers.iter_mut().chain(core::iter::once(&mut self.head))
    }

    pub fn zero_grads(&self) -> Grads {
        Grads {
            layers: self
                .layers
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            head: Matrix::zeros(self.head.rows(), self.head.cols()),
        }
    }

    /// Sum of squared weights over every matrix.
    pub fn l2_penalty(&self) -> f64 {
        self.matrices().map(Matrix::sum_of_squares).sum()
    }
}

/// Gradients with the same shapes as a [`GcnParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct Grads {
    pub layers: Vec<Matrix>,
    pub head: Matrix,
}

impl Grads {
    pub fn matrices(&self) -> impl Iterator<Item = &Matrix> {
        self.layers.iter().chain(core::iter::once(&self.head))
    }

    pub fn matrices_mut(&mut self) -> impl Iterator<Item = &mut Matrix> {
        self.layers.iter_mut().chain(core::iter::once(&mut self.head))
    }

    pub fn add(&mut self, other: &Grads, scale: f64) {
        for (a, b) in self.matrices_mut().zip(other.matrices()) {
            a.add_scaled(b, scale);
        }
    }

    /// Adds the gradient `2λW` of the penalty `λ Σ‖W‖²`.
    pub fn add_weight_decay(&mut self, params: &GcnParams, lambda: f64) {
        for (g, w) in self.matrices_mut().zip(params.matrices()) {
            g.add_scaled(w, 2.0 * lambda);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.matrices().all(Matrix::is_finite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_shapes_and_bounds() {
        let p = GcnParams::init(5, 8, 2, 3, 1).unwrap();
        assert_eq!(p.dims(), alloc::vec![5, 8, 8, 3]);
        let limit = libm::sqrt(6.0 / 13.0);
        assert!(p.layers()[0].as_slice().iter().all(|v| v.abs() < limit));
        assert_eq!(p, GcnParams::init(5, 8, 2, 3, 1).unwrap());
        assert_ne!(p, GcnParams::init(5, 8, 2, 3, 2).unwrap());
    }

    #[test]
    fn zero_layers_rejected() {
        assert!(GcnParams::init(5, 8, 0, 3, 1).is_err());
    }

    #[test]
    fn broken_shape_chain_rejected() {
        let l = alloc::vec![Matrix::zeros(3, 4), Matrix::zeros(5, 4)];
        assert!(GcnParams::from_parts(l, Matrix::zeros(4, 2), 0).is_err());
        let l = alloc::vec![Matrix::zeros(3, 4)];
        assert!(GcnParams::from_parts(l.clone(), Matrix::zeros(3, 2), 0).is_err());
        let mut bad = Matrix::zeros(4, 2);
        bad[(0, 0)] = f64::NAN;
        assert!(GcnParams::from_parts(l, bad, 0).is_err());
    }
}
