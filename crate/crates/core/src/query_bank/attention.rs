//! Scaled dot-product cross attention followed by the residual FFN
//! `Q' = FFN(Q + Q~)`, with seeded constant weights.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::math;

pub const LAYER_NORM_EPS: f64 = 1e-12;

/// Max-subtracted softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    if z.is_empty() {
        return Vec::new();
    }
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|&x| math::exp(x - m)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Zero-mean, unit-variance normalisation before gain and bias.
pub fn standardize(x: &DVector<f64>) -> DVector<f64> {
    let n = x.len().max(1) as f64;
    let mean = x.sum() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv = 1.0 / math::sqrt(var + LAYER_NORM_EPS);
    x.map(|v| (v - mean) * inv)
}

pub fn layer_norm(x: &DVector<f64>, gain: &DVector<f64>, bias: &DVector<f64>) -> DVector<f64> {
    standardize(x).component_mul(gain) + bias
}

/// `FFN(x) = LayerNorm(x + W2 relu(W1 x + b1) + b2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ffn {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
    pub gain: DVector<f64>,
    pub bias: DVector<f64>,
}

impl Ffn {
    pub fn seeded(d: usize, seed: u64) -> Self {
        let mut rng = math::rng_from(seed);
        let bound = math::init_bound(d);
        let w1 = math::uniform_matrix(&mut rng, d, d, bound);
        let b1 = math::uniform_vector(&mut rng, d, bound);
        let w2 = math::uniform_matrix(&mut rng, d, d, bound);
        let b2 = math::uniform_vector(&mut rng, d, bound);
        Self {
            w1,
            b1,
            w2,
            b2,
            gain: DVector::from_element(d, 1.0),
            bias: DVector::zeros(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.b1.len()
    }

    pub fn forward(&self, x: &DVector<f64>) -> DVector<f64> {
        let hidden = (&self.w1 * x + &self.b1).map(|v| v.max(0.0));
        let y = x + &self.w2 * hidden + &self.b2;
        layer_norm(&y, &self.gain, &self.bias)
    }
}

/// Projections `W^Q, W^K, W^V` (`d_h x d_k`), an output projection
/// `W^O` (`d_k x d_h`) when `d_k != d_h`, and the FFN.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub d_h: usize,
    pub d_k: usize,
    pub seed: u64,
    pub w_q: DMatrix<f64>,
    pub w_k: DMatrix<f64>,
    pub w_v: DMatrix<f64>,
    pub w_o: Option<DMatrix<f64>>,
    pub ffn: Ffn,
}

impl AttentionParams {
    pub fn seeded(d_h: usize, d_k: usize, seed: u64) -> Result<Self> {
        if d_h == 0 || d_k == 0 {
            return Err(Error::config("attention widths must be positive"));
        }
        let mut rng = math::rng_from(math::derive_seed(seed, &[0xA77E]));
        let b = math::init_bound(d_h);
        let w_q = math::uniform_matrix(&mut rng, d_h, d_k, b);
        let w_k = math::uniform_matrix(&mut rng, d_h, d_k, b);
        let w_v = math::uniform_matrix(&mut rng, d_h, d_k, b);
        let w_o = (d_k != d_h).then(|| math::uniform_matrix(&mut rng, d_k, d_h, math::init_bound(d_k)));
        let ffn = Ffn::seeded(d_h, math::derive_seed(seed, &[0xFF4]));
        Ok(Self { d_h, d_k, seed, w_q, w_k, w_v, w_o, ffn })
    }

    /// `W^V W^O` as a `d_h x d_h` map on row vectors.
    pub fn value_output(&self) -> DMatrix<f64> {
        match &self.w_o {
            Some(o) => &self.w_v * o,
            None => self.w_v.clone(),
        }
    }

    fn project_values(&self, kv: &DMatrix<f64>) -> DMatrix<f64> {
        let v = kv * &self.w_v;
        match &self.w_o {
            Some(o) => v * o,
            None => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionOutput {
    /// `FFN(Q + Q~)`, one row per query.
    pub queries: DMatrix<f64>,
    /// The attention readout `Q~`.
    pub evidence: DMatrix<f64>,
    /// Row-stochastic attention weights, `n_queries x n_keys`.
    pub weights: DMatrix<f64>,
}

fn check_dims(m: &DMatrix<f64>, d_h: usize, what: &str) -> Result<()> {
    if m.ncols() != d_h {
        return Err(Error::invalid(format!("{what} have width {}, expected {d_h}", m.ncols())));
    }
    if !math::all_finite(m.as_slice()) {
        return Err(Error::invalid(format!("{what} contain non-finite values")));
    }
    Ok(())
}

pub fn attention_weights(
    queries: &DMatrix<f64>,
    keys: &DMatrix<f64>,
    params: &AttentionParams,
) -> Result<DMatrix<f64>> {
    check_dims(queries, params.d_h, "queries")?;
    check_dims(keys, params.d_h, "keys")?;
    if keys.nrows() == 0 {
        return Err(Error::invalid("attention needs at least one key"));
    }
    let q = queries * &params.w_q;
    let k = keys * &params.w_k;
    let logits = (q * k.transpose()) / math::sqrt(params.d_k as f64);
    let mut w = DMatrix::zeros(logits.nrows(), logits.ncols());
    for i in 0..logits.nrows() {
        let row: Vec<f64> = logits.row(i).iter().copied().collect();
        for (j, p) in softmax(&row).into_iter().enumerate() {
            w[(i, j)] = p;
        }
    }
    Ok(w)
}

/// `Q~ = softmax(Q W^Q (L W^K)^T / sqrt(d_k)) L W^V [W^O]`, then
/// `Q' = FFN(Q + Q~)` row by row.
pub fn cross_attention_update(
    queries: &DMatrix<f64>,
    keys_values: &DMatrix<f64>,
    params: &AttentionParams,
) -> Result<AttentionOutput> {
    let weights = attention_weights(queries, keys_values, params)?;
    let evidence = &weights * params.project_values(keys_values);
    let mut out = DMatrix::zeros(queries.nrows(), params.d_h);
    for i in 0..queries.nrows() {
        let x: DVector<f64> = (queries.row(i) + evidence.row(i)).transpose();
        out.set_row(i, &params.ffn.forward(&x).transpose());
    }
    Ok(AttentionOutput { queries: out, evidence, weights })
}

/// Stacks vectors as matrix rows.
pub fn stack_rows(rows: &[DVector<f64>], width: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows.len(), width);
    for (i, r) in rows.iter().enumerate() {
        m.set_row(i, &r.transpose());
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_rows(seed: u64, n: usize, d: usize) -> DMatrix<f64> {
        math::uniform_matrix(&mut math::rng_from(seed), n, d, 1.0)
    }

    #[test]
    fn softmax_shift_and_sum() {
        let z = [0.3, -1.2, 4.0, 4.0];
        let a = softmax(&z);
        let b = softmax(&z.map(|x| x + 1000.0));
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(a[2], a[3]);
    }

    #[test]
    fn layer_norm_moments() {
        let x = DVector::from_vec(alloc::vec![1.0, 5.0, -3.0, 2.5, 0.0]);
        let y = standardize(&x);
        let mean = y.sum() / 5.0;
        let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 5.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_key_gets_all_weight() {
        let p = AttentionParams::seeded(16, 4, 3).unwrap();
        let q = random_rows(1, 2, 16);
        let kv = random_rows(2, 1, 16);
        let out = cross_attention_update(&q, &kv, &p).unwrap();
        assert_eq!(out.weights[(0, 0)], 1.0);
        assert_eq!(out.weights[(1, 0)], 1.0);
        let v = &kv * &p.w_v * p.w_o.as_ref().unwrap();
        let expect = p.ffn.forward(&(q.row(0) + v.row(0)).transpose());
        assert!((out.queries.row(0).transpose() - expect).amax() < 1e-12);
    }

    #[test]
    fn duplicate_keys_are_uniform() {
        let p = AttentionParams::seeded(8, 8, 5).unwrap();
        assert!(p.w_o.is_none());
        let row = random_rows(9, 1, 8);
        let kv = DMatrix::from_fn(3, 8, |_, j| row[(0, j)]);
        let w = attention_weights(&random_rows(4, 1, 8), &kv, &p).unwrap();
        for j in 0..3 {
            assert!((w[(0, j)] - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn explicit_arithmetic_oracle() {
        let (d_h, d_k) = (6, 3);
        let p = AttentionParams::seeded(d_h, d_k, 17).unwrap();
        let q = random_rows(20, 2, d_h);
        let kv = random_rows(21, 3, d_h);
        let out = cross_attention_update(&q, &kv, &p).unwrap();
        let wo = p.w_o.as_ref().unwrap();
        for i in 0..2 {
            let mut logits = [0.0; 3];
            for (j, l) in logits.iter_mut().enumerate() {
                let mut s = 0.0;
                for c in 0..d_k {
                    let mut qa = 0.0;
                    let mut ka = 0.0;
                    for r in 0..d_h {
                        qa += q[(i, r)] * p.w_q[(r, c)];
                        ka += kv[(j, r)] * p.w_k[(r, c)];
                    }
                    s += qa * ka;
                }
                *l = s / (d_k as f64).sqrt();
            }
            let m = logits.iter().cloned().fold(f64::MIN, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let z: f64 = e.iter().sum();
            let mut x = DVector::zeros(d_h);
            for col in 0..d_h {
                let mut acc = 0.0;
                for j in 0..3 {
                    let mut v = 0.0;
                    for c in 0..d_k {
                        let mut vv = 0.0;
                        for r in 0..d_h {
                            vv += kv[(j, r)] * p.w_v[(r, c)];
                        }
                        v += vv * wo[(c, col)];
                    }
                    acc += e[j] / z * v;
                }
                x[col] = q[(i, col)] + acc;
            }
            let h: Vec<f64> = (0..d_h)
                .map(|r| ((0..d_h).map(|c| p.ffn.w1[(r, c)] * x[c]).sum::<f64>() + p.ffn.b1[r]).max(0.0))
                .collect();
            let y: Vec<f64> = (0..d_h)
                .map(|r| x[r] + (0..d_h).map(|c| p.ffn.w2[(r, c)] * h[c]).sum::<f64>() + p.ffn.b2[r])
                .collect();
            let mean = y.iter().sum::<f64>() / d_h as f64;
            let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d_h as f64;
            for r in 0..d_h {
                let expect = (y[r] - mean) / (var + LAYER_NORM_EPS).sqrt();
                assert!((out.queries[(i, r)] - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dimension_errors() {
        let p = AttentionParams::seeded(8, 4, 1).unwrap();
        assert!(cross_attention_update(&random_rows(1, 1, 7), &random_rows(2, 2, 8), &p).is_err());
        assert!(cross_attention_update(&random_rows(1, 1, 8), &DMatrix::zeros(0, 8), &p).is_err());
    }
}
