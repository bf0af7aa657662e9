//! Dirichlet priors over categorical distributions.
//!
//! A network emits logits `z`; the concentration parameters are
//! `alpha_k = exp(z_k) + eps2`. The predictive distribution is the
//! Dirichlet mean `alpha_k / alpha0`, which equals `softmax(z)` when
//! `eps2 = 0` and does not change when `alpha` is rescaled.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::specfun::{digamma_unchecked, ln_gamma_unchecked};

/// Tolerance on `sum(p) = 1` accepted by [`CategoricalDist::new`].
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Largest logit whose exponential is finite.
pub const MAX_LOGIT: f64 = 709.0;

/// A probability vector over K classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CategoricalDist(Vec<f64>);

impl CategoricalDist {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::invalid("empty distribution"));
        }
        if p.iter().any(|&v| !(v.is_finite() && v >= 0.0)) {
            return Err(Error::invalid(format!("distribution has a negative or non-finite entry: {p:?}")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid(format!("distribution sums to {total}, not 1")));
        }
        Ok(Self(p))
    }

    pub(crate) fn from_vec_unchecked(p: Vec<f64>) -> Self {
        debug_assert!((p.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL);
        Self(p)
    }

    pub fn uniform(k: usize) -> Self {
        Self(vec![1.0 / k as f64; k])
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Index of the largest probability, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.0.iter().enumerate().skip(1) {
            if v > self.0[best] {
                best = i;
            }
        }
        best
    }
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> CategoricalDist {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    CategoricalDist(exps.into_iter().map(|e| e / total).collect())
}

/// Concentration parameters `alpha` and their sum `alpha0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams {
    alpha: Vec<f64>,
    alpha0: f64,
}

impl DirichletParams {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 {
            return Err(Error::invalid("a Dirichlet needs at least 2 components"));
        }
        if let Some((i, a)) = alpha.iter().enumerate().find(|(_, a)| !(a.is_finite() && **a > 0.0)) {
            return Err(Error::invalid(format!("alpha[{i}] = {a} is not a positive finite number")));
        }
        let alpha0 = alpha.iter().sum();
        Ok(Self { alpha, alpha0 })
    }

    /// `alpha_k = exp(z_k) + eps2`.
    pub fn from_logits(z: &[f64], eps2: f64) -> Result<Self> {
        if !(eps2.is_finite() && eps2 >= 0.0) {
            return Err(Error::invalid(format!("eps2 = {eps2} must be non-negative")));
        }
        let mut alpha = Vec::with_capacity(z.len());
        for (index, &value) in z.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::invalid(format!("logit {index} is {value}")));
            }
            if value > MAX_LOGIT {
                return Err(Error::Overflow { index, value });
            }
            alpha.push(value.exp() + eps2);
        }
        // exp() of a very negative logit underflows to 0 with eps2 = 0
        if let Some(index) = alpha.iter().position(|&a| a <= 0.0) {
            return Err(Error::invalid(format!(
                "logit {index} = {} underflows to alpha = 0",
                z[index]
            )));
        }
        Self::new(alpha)
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn k(&self) -> usize {
        self.alpha.len()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.alpha.iter().map(|a| a * c).collect())
    }

    /// `ln Γ(alpha0) - sum_k ln Γ(alpha_k)`.
    pub fn log_normalizer(&self) -> f64 {
        ln_gamma_unchecked(self.alpha0) - self.alpha.iter().map(|&a| ln_gamma_unchecked(a)).sum::<f64>()
    }

    /// Log-density at `mu`.
    ///
    /// A zero component contributes nothing when `alpha_k = 1`, sends the
    /// density to `-inf` when `alpha_k > 1`, and is an error when
    /// `alpha_k < 1` because the density is unbounded there.
    pub fn log_pdf(&self, mu: &CategoricalDist) -> Result<f64> {
        if mu.k() != self.k() {
            return Err(Error::invalid(format!(
                "mu has {} components, alpha has {}",
                mu.k(),
                self.k()
            )));
        }
        let mut acc = self.log_normalizer();
        for (index, (&a, &m)) in self.alpha.iter().zip(mu.as_slice()).enumerate() {
            if m > 0.0 {
                acc += (a - 1.0) * m.ln();
            } else if a < 1.0 {
                return Err(Error::Singularity { index, alpha: a });
            } else if a > 1.0 {
                return Ok(f64::NEG_INFINITY);
            }
        }
        Ok(acc)
    }

    /// `psi(alpha0) - psi(alpha_k) + mean_log_mu[k]`, the gradient of the
    /// mean log-density over labels whose mean log-components are given.
    pub(crate) fn log_pdf_grad_alpha_mean(&self, mean_log_mu: &[f64]) -> Vec<f64> {
        let psi0 = digamma_unchecked(self.alpha0);
        self.alpha
            .iter()
            .zip(mean_log_mu)
            .map(|(&a, &lm)| psi0 - digamma_unchecked(a) + lm)
            .collect()
    }

    /// Expected categorical distribution, `alpha_k / alpha0`.
    pub fn predictive_mean(&self) -> CategoricalDist {
        CategoricalDist(self.alpha.iter().map(|a| a / self.alpha0).collect())
    }
}
