//! Oracles and helpers shared by the integration tests.
#![allow(dead_code)]

use serde::Deserialize;

#[derive(Deserialize)]
pub struct SpecialPoint {
    pub x: f64,
    pub log_gamma: f64,
    pub digamma: f64,
}

#[derive(Deserialize)]
pub struct DirichletCase {
    pub alpha: Vec<f64>,
    pub mu: Vec<f64>,
    pub log_pdf: f64,
}

/// 50-digit mpmath references, frozen by `tests/data/make_oracles.py`.
#[derive(Deserialize)]
pub struct Oracles {
    pub special: Vec<SpecialPoint>,
    pub dirichlet: Vec<DirichletCase>,
    pub named_dirichlet: Vec<DirichletCase>,
}

pub fn oracles() -> Oracles {
    serde_json::from_str(include_str!("../data/oracles.json")).expect("oracle file")
}

/// Average precision by direct enumeration: for each positive item, the
/// precision of the set scored at least as confidently as it, averaged.
pub fn brute_force_ap(scores: &[f64], positive: &[bool], higher_is_positive: bool) -> f64 {
    let at_least = |a: f64, t: f64| if higher_is_positive { a >= t } else { a <= t };
    let n_pos = positive.iter().filter(|&&p| p).count();
    let mut total = 0.0;
    for i in (0..scores.len()).filter(|&i| positive[i]) {
        let selected: Vec<usize> = (0..scores.len()).filter(|&j| at_least(scores[j], scores[i])).collect();
        let tp = selected.iter().filter(|&&j| positive[j]).count();
        total += tp as f64 / selected.len() as f64;
    }
    total / n_pos as f64
}

/// `(threshold, precision, recall)` at every distinct score, by enumeration.
pub fn brute_force_curve(scores: &[f64], positive: &[bool], higher_is_positive: bool) -> Vec<(f64, f64, f64)> {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| if higher_is_positive { b.total_cmp(a) } else { a.total_cmp(b) });
    thresholds.dedup();
    let n_pos = positive.iter().filter(|&&p| p).count() as f64;
    thresholds
        .into_iter()
        .map(|t| {
            let (mut tp, mut fp) = (0.0, 0.0);
            for (s, &p) in scores.iter().zip(positive) {
                let hit = if higher_is_positive { *s >= t } else { *s <= t };
                if hit {
                    if p {
                        tp += 1.0;
                    } else {
                        fp += 1.0;
                    }
                }
            }
            (t, tp / (tp + fp), tp / n_pos)
        })
        .collect()
}

/// Central differences of `f` at `x` with step `h`.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[i] += h;
            dn[i] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

/// Elementwise relative error with denominator `max(|a|, 1e-8)`.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(1e-8))
        .fold(0.0, f64::max)
}
