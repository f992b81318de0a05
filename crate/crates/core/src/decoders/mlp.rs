use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::math;

/// Seeded two-layer map `W2 relu(W1 x + b1) + b2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

impl Mlp {
    pub fn seeded(input: usize, hidden: usize, output: usize, seed: u64) -> Self {
        let mut rng = math::rng_from(seed);
        let bi = math::init_bound(input);
        let bh = math::init_bound(hidden);
        Self {
            w1: math::uniform_matrix(&mut rng, hidden, input, bi),
            b1: math::uniform_vector(&mut rng, hidden, bi),
            w2: math::uniform_matrix(&mut rng, output, hidden, bh),
            b2: math::uniform_vector(&mut rng, output, bh),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn forward(&self, x: &DVector<f64>) -> DVector<f64> {
        let h = (&self.w1 * x + &self.b1).map(|v| v.max(0.0));
        &self.w2 * h + &self.b2
    }

    pub fn forward_slice(&self, x: &[f64]) -> Vec<f64> {
        self.forward(&DVector::from_row_slice(x)).as_slice().to_vec()
    }
}

pub(crate) fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + math::exp(-x))
}
