//! Dense double-precision linear algebra, a deterministic RNG, parameter
//! initialization, the RMSprop optimizer, and a central-difference gradient
//! oracle.
//!
//! Everything here is plain `f64` with value semantics. There is no global
//! RNG: callers own their [`Rng`] and pass it down, so any pipeline is
//! bit-reproducible from its seed.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "expected {rows}x{cols} = {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { 1.0 } else { 0.0 })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `self * x` for a column vector `x` of length `cols`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    /// `self^T * x` for a column vector `x` of length `rows`.
    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (row, &xi) in self.data.chunks_exact(self.cols).zip(x) {
            axpy(&mut out, xi, row);
        }
        out
    }

    /// Rank-1 update `self += u * v^T`.
    pub fn add_outer(&mut self, u: &[f64], v: &[f64]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for (row, &ui) in self.data.chunks_exact_mut(self.cols).zip(u) {
            axpy(row, ui, v);
        }
    }

    /// True when every entry has identical bits in `other`.
    pub fn bits_eq(&self, other: &Mat) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity; defined as 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = l2_norm(a);
    let nb = l2_norm(b);
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot(a, b) / (na * nb)
    }
}

/// `y += a * x`.
pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Deterministic counter-based random number generator (ChaCha8).
///
/// Identical seed + identical call sequence produces identical outputs on
/// every platform. Callers own their generator; no global state exists.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (((self.next_u64() as u128) * (n as u128)) >> 64) as usize
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }
}

/// RMSprop hyperparameters.
///
/// Defaults: learning rate 0.01, decay 0.9, epsilon 1e-6.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmspropConfig {
    pub learning_rate: f64,
    pub decay: f64,
    pub epsilon: f64,
}

impl Default for RmspropConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            decay: 0.9,
            epsilon: 1e-6,
        }
    }
}

impl RmspropConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Per-parameter RMSprop accumulator state.
///
/// One state covers one flat parameter buffer (a matrix or a vector).
/// `update_at` supports sparse row updates: only the touched slice of the
/// accumulator is advanced, untouched entries keep their running mean.
#[derive(Debug, Clone)]
pub struct RmspropState {
    name: String,
    accum: Vec<f64>,
    pub config: RmspropConfig,
}

impl RmspropState {
    pub fn new(name: impl Into<String>, len: usize, config: RmspropConfig) -> Self {
        Self {
            name: name.into(),
            accum: vec![0.0; len],
            config,
        }
    }

    pub fn accum(&self) -> &[f64] {
        &self.accum
    }

    /// Full update: `accum = decay*accum + (1-decay)*g^2`,
    /// `param -= lr * g / sqrt(accum + eps)`, element-wise.
    pub fn update(&mut self, param: &mut [f64], grad: &[f64]) -> Result<()> {
        if param.len() != self.accum.len() {
            return Err(Error::ShapeMismatch(format!(
                "parameter '{}' has {} entries, optimizer state has {}",
                self.name,
                param.len(),
                self.accum.len()
            )));
        }
        self.update_at(0, param, grad)
    }

    /// Update a slice of the parameter starting at flat `offset`.
    pub fn update_at(&mut self, offset: usize, param: &mut [f64], grad: &[f64]) -> Result<()> {
        if param.len() != grad.len() || offset + param.len() > self.accum.len() {
            return Err(Error::ShapeMismatch(format!(
                "parameter '{}': param len {}, grad len {}, offset {}, state len {}",
                self.name,
                param.len(),
                grad.len(),
                offset,
                self.accum.len()
            )));
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient(self.name.clone()));
        }
        let RmspropConfig {
            learning_rate,
            decay,
            epsilon,
        } = self.config;
        let accum = &mut self.accum[offset..offset + param.len()];
        for ((p, &g), a) in param.iter_mut().zip(grad).zip(accum.iter_mut()) {
            *a = decay * *a + (1.0 - decay) * g * g;
            *p -= learning_rate * g / (*a + epsilon).sqrt();
        }
        Ok(())
    }
}

/// Glorot (uniform Xavier) initialization: entries i.i.d. uniform in
/// `[-sqrt(6/(rows+cols)), +sqrt(6/(rows+cols))]`.
pub fn glorot_init(rows: usize, cols: usize, rng: &mut Rng) -> Result<Mat> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument(format!(
            "glorot_init: dimensions must be positive, got {rows}x{cols}"
        )));
    }
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Ok(Mat::from_fn(rows, cols, |_, _| rng.uniform(-bound, bound)))
}

/// Central-difference gradient: `(f(x + h e_i) - f(x - h e_i)) / 2h` per
/// coordinate. Test oracle for every analytic gradient in this crate.
pub fn finite_diff_grad<F>(mut f: F, at: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if h <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "finite_diff_grad: step must be positive, got {h}"
        )));
    }
    let mut x = at.to_vec();
    let mut grad = vec![0.0; at.len()];
    for i in 0..at.len() {
        let orig = x[i];
        x[i] = orig + h;
        let fp = f(&x);
        x[i] = orig - h;
        let fm = f(&x);
        x[i] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite(format!(
                "finite_diff_grad: f(x +/- h) not finite at coordinate {i}"
            )));
        }
        grad[i] = (fp - fm) / (2.0 * h);
    }
    Ok(grad)
}
