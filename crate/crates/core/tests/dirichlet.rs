mod common;

use dirprior::dirichlet::{softmax, CategoricalDist, DirichletParams};
use dirprior::specfun::log_gamma;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

fn log_pdf(alpha: &[f64], mu: &[f64]) -> f64 {
    let params = DirichletParams::new(alpha.to_vec()).unwrap();
    params.log_pdf(&CategoricalDist::new(mu.to_vec()).unwrap()).unwrap()
}

#[test]
fn matches_high_precision_references() {
    let o = common::oracles();
    for c in o.dirichlet.iter().chain(&o.named_dirichlet) {
        let got = log_pdf(&c.alpha, &c.mu);
        assert!((got - c.log_pdf).abs() <= 1e-10, "{:?}: {got} vs {}", c.alpha, c.log_pdf);
    }
}

#[test]
fn uniform_concentration_is_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in 2..=8 {
        let mu: Vec<f64> = {
            let raw: Vec<f64> = (0..k).map(|_| Exp1.sample(&mut rng)).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        };
        let expected = log_gamma(k as f64).unwrap();
        assert!((log_pdf(&vec![1.0; k], &mu) - expected).abs() <= 1e-12);
    }
}

#[test]
fn mean_ignores_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let k = rng.random_range(2..7);
        let alpha: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..20.0)).collect();
        let p = DirichletParams::new(alpha).unwrap();
        let base = p.predictive_mean();
        for c in [1e-3, 1.0, 1e3] {
            let scaled = p.scaled(c).unwrap().predictive_mean();
            for (a, b) in base.as_slice().iter().zip(scaled.as_slice()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn mean_is_softmax_without_offset() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let k = rng.random_range(2..7);
        let z: Vec<f64> = (0..k).map(|_| rng.random_range(-10.0..10.0)).collect();
        let mean = DirichletParams::from_logits(&z, 0.0).unwrap().predictive_mean();
        for (a, b) in mean.as_slice().iter().zip(softmax(&z).as_slice()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}

#[test]
fn density_integrates_to_one() {
    // uniform samples on the 2-simplex (area measure of the (mu1, mu2) chart is 1/2)
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for alpha in [[0.8, 1.2, 1.5], [1.5, 2.0, 1.1], [2.0, 2.0, 2.0]] {
        let params = DirichletParams::new(alpha.to_vec()).unwrap();
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let e: [f64; 3] = std::array::from_fn(|_| Exp1.sample(&mut rng));
            let s: f64 = e.iter().sum();
            let mu = CategoricalDist::new(e.iter().map(|v| v / s).collect()).unwrap();
            sum += params.log_pdf(&mu).unwrap().exp();
        }
        let integral = sum / n as f64 * 0.5;
        assert!((integral - 1.0).abs() < 0.05, "{alpha:?}: {integral}");
    }
}

#[test]
fn boundary_components() {
    let mu = CategoricalDist::new(vec![0.0, 0.4, 0.6]).unwrap();
    let singular = DirichletParams::new(vec![0.5, 1.0, 2.0]).unwrap();
    assert!(singular.log_pdf(&mu).is_err());
    let zero = DirichletParams::new(vec![1.5, 1.0, 2.0]).unwrap();
    assert_eq!(zero.log_pdf(&mu).unwrap(), f64::NEG_INFINITY);
    let flat = DirichletParams::new(vec![1.0, 1.0, 2.0]).unwrap();
    assert!(flat.log_pdf(&mu).unwrap().is_finite());
}
