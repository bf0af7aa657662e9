//! Training objectives and their gradients with respect to the logits.
//!
//! * `hard`: cross-entropy to the majority label (KL to a one-hot target).
//! * `soft`: KL from the soft label to `softmax(z)`.
//! * `dpn`: mean negative Dirichlet log-likelihood of the smoothed
//!   observations, one per evaluation (uniform over its tags).
//! * `dpn-kl`: the DPN term plus `lambda` times the soft KL term.
//!
//! The soft label counts every tag as a label, so `{A},{B},{C}` and three
//! `{A,B,C}` evaluations share it; the Dirichlet term sees three one-hot
//! observations in the first case and three flat ones in the second.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotations::{smooth, AnnotationSet, OneHot};
use crate::dirichlet::{CategoricalDist, DirichletParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub grad_z: Vec<f64>,
}

impl LossValue {
    fn scaled_add(mut self, other: &LossValue, weight: f64) -> Self {
        self.value += weight * other.value;
        for (g, o) in self.grad_z.iter_mut().zip(&other.grad_z) {
            *g += weight * o;
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossKind {
    #[serde(rename = "hard")]
    Hard,
    #[serde(rename = "soft")]
    SoftKl,
    #[serde(rename = "dpn")]
    Dpn,
    #[serde(rename = "dpn-kl")]
    DpnKl,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [Self::Hard, Self::SoftKl, Self::Dpn, Self::DpnKl];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Hard => "hard",
            Self::SoftKl => "soft",
            Self::Dpn => "dpn",
            Self::DpnKl => "dpn-kl",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown loss {s:?} (expected hard, soft, dpn or dpn-kl)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub kind: LossKind,
    /// Label smoothing for the DPN term.
    pub eps1: f64,
    /// Offset added to every concentration parameter.
    pub eps2: f64,
    /// Weight of the KL term in `dpn-kl`.
    pub lambda: f64,
}

pub const DEFAULT_EPS1: f64 = 1e-2;
pub const DEFAULT_EPS2: f64 = 1e-8;
pub const DEFAULT_LAMBDA: f64 = 20.0;

impl LossConfig {
    /// Defaults per kind: `dpn` smooths with eps1 = 1e-2, eps2 = 1e-8;
    /// `dpn-kl` uses eps1 = eps2 = 0 and lambda = 20.
    pub fn new(kind: LossKind) -> Self {
        let (eps1, eps2) = match kind {
            LossKind::Dpn => (DEFAULT_EPS1, DEFAULT_EPS2),
            _ => (0.0, 0.0),
        };
        Self {
            kind,
            eps1,
            eps2,
            lambda: DEFAULT_LAMBDA,
        }
    }

    pub fn validate(&self, k: usize) -> Result<()> {
        let upper = 1.0 / (k as f64 - 1.0);
        if !(self.eps1 >= 0.0 && self.eps1 < upper) {
            return Err(Error::config(format!("eps1 = {} must lie in [0, {upper})", self.eps1)));
        }
        if !(self.eps2.is_finite() && self.eps2 >= 0.0) {
            return Err(Error::config(format!("eps2 = {} must be >= 0", self.eps2)));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::config(format!("lambda = {} must be >= 0", self.lambda)));
        }
        Ok(())
    }

    /// Loss of one annotated utterance.
    ///
    /// `hard` needs a majority class; the others use every evaluation.
    pub fn evaluate(&self, ann: &AnnotationSet, z: &[f64]) -> Result<LossValue> {
        match self.kind {
            LossKind::Hard => {
                let class = ann
                    .agreement()
                    .majority
                    .ok_or_else(|| Error::invalid("hard loss needs a majority label"))?;
                hard_loss(OneHot::new(class, z.len())?, z)
            }
            LossKind::SoftKl => kl_loss(&ann.soft_label(), z),
            LossKind::Dpn => dpn_loss(ann.observations(), z, self.eps1, self.eps2),
            LossKind::DpnKl => dpn_kl_loss(ann.observations(), &ann.soft_label(), z, self),
        }
    }
}

fn log_softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
    z.iter().map(|&v| v - lse).collect()
}

/// `KL(target || softmax(z))`, gradient `softmax(z) - target`.
pub fn kl_loss(target: &CategoricalDist, z: &[f64]) -> Result<LossValue> {
    if target.k() != z.len() {
        return Err(Error::invalid(format!(
            "target has {} classes, logits have {}",
            target.k(),
            z.len()
        )));
    }
    let log_y = log_softmax(z);
    let mut value = 0.0;
    let mut grad_z = Vec::with_capacity(z.len());
    for (&t, &ly) in target.as_slice().iter().zip(&log_y) {
        if t > 0.0 {
            value += t * (t.ln() - ly);
        }
        grad_z.push(ly.exp() - t);
    }
    Ok(LossValue { value, grad_z })
}

pub fn hard_loss(label: OneHot, z: &[f64]) -> Result<LossValue> {
    kl_loss(&label.into(), z)
}

/// How zero components of unsmoothed labels enter the DPN term.
#[derive(Debug, Clone, Copy, PartialEq)]
enum ZeroComponents {
    /// Follow the density: singular or `-inf`, both reported as errors.
    Strict,
    /// Evaluate them at `mu_k = floor`.
    Floor(f64),
}

fn dpn_term(
    observations: &[CategoricalDist],
    z: &[f64],
    eps1: f64,
    eps2: f64,
    zeros: ZeroComponents,
) -> Result<LossValue> {
    if observations.is_empty() {
        return Err(Error::invalid("DPN loss of an empty observation list"));
    }
    let k = z.len();
    if let Some(o) = observations.iter().find(|o| o.k() != k) {
        return Err(Error::invalid(format!("observation over K = {} with {k} logits", o.k())));
    }
    let params = DirichletParams::from_logits(z, eps2)?;
    let alpha = params.alpha();
    let m = observations.len() as f64;

    // mean over observations of ln mu_k, zero components contributing nothing
    let mut mean_log_mu = vec![0.0; k];
    for obs in observations {
        let mu = smooth(obs, eps1)?;
        for (i, &p) in mu.as_slice().iter().enumerate() {
            if p > 0.0 {
                mean_log_mu[i] += p.ln() / m;
            } else if let ZeroComponents::Floor(f) = zeros {
                mean_log_mu[i] += f.ln() / m;
            } else if zeros == ZeroComponents::Strict {
                if alpha[i] < 1.0 {
                    return Err(Error::Singularity { index: i, alpha: alpha[i] });
                }
                if alpha[i] > 1.0 {
                    return Err(Error::ZeroDensity { index: i, alpha: alpha[i] });
                }
            }
        }
    }

    let mut value = -params.log_normalizer();
    for (&a, &lm) in alpha.iter().zip(&mean_log_mu) {
        value -= (a - 1.0) * lm;
    }
    let grad_alpha = params.log_pdf_grad_alpha_mean(&mean_log_mu);
    let grad_z = grad_alpha
        .iter()
        .zip(z)
        .map(|(g, &zk)| -g * zk.exp())
        .collect();
    Ok(LossValue { value, grad_z })
}

/// `-(1/M) sum_m ln Dir(smooth(mu_m, eps1) | exp(z) + eps2)` over the
/// observations `mu_m`.
pub fn dpn_loss(observations: &[CategoricalDist], z: &[f64], eps1: f64, eps2: f64) -> Result<LossValue> {
    dpn_term(observations, z, eps1, eps2, ZeroComponents::Strict)
}

/// Value at which `dpn-kl` evaluates zero components of unsmoothed labels.
///
/// Leaving those terms out makes the DPN term independent of the labels and
/// unbounded below as all logits grow together; the floor keeps a finite
/// minimum and only matters when `eps1 = 0`.
pub const DPN_KL_ZERO_FLOOR: f64 = 1e-8;

/// DPN term on the observations plus `lambda` times the KL to `soft`.
pub fn dpn_kl_loss(
    observations: &[CategoricalDist],
    soft: &CategoricalDist,
    z: &[f64],
    config: &LossConfig,
) -> Result<LossValue> {
    let dpn = dpn_term(observations, z, config.eps1, config.eps2, ZeroComponents::Floor(DPN_KL_ZERO_FLOOR))?;
    let kl = kl_loss(soft, z)?;
    Ok(dpn.scaled_add(&kl, config.lambda))
}
