//! Seeded synthetic corpora with per-utterance label ambiguity.
//!
//! For every utterance the generator
//! 1. picks an ambiguity regime from `group_mix` and a dominant class,
//! 2. draws the true class distribution `mu ~ Dir(alpha)` with
//!    `alpha_dominant = alpha0 - (K - 1)` and `alpha_other = 1`,
//! 3. lets each annotator tag one class from `mu`, and with probability
//!    `multi_tag_prob` a second, distinct class from `mu` renormalised,
//! 4. emits features `x = sum_k mu_k e_k + N(0, noise_sigma^2)`, the
//!    centroids `e_k` being the first K standard basis vectors of R^d.
//!
//! Randomness comes from ChaCha8 keyed by the seed with the utterance
//! index as the stream number, so every utterance can be regenerated on
//! its own. Within an utterance the draws are made in the order above,
//! the split coin first.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::annotations::{AgreementGroup, AnnotationSet, ClassSpace, Evaluation};
use crate::dirichlet::CategoricalDist;
use crate::error::{Error, Result};
use crate::io::{Dataset, Record, Split};

/// Regime order used by `group_mix` and `precisions`.
pub const REGIMES: [&str; 3] = ["low", "medium", "high"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub annotators: usize,
    pub seed: u64,
    /// Probability of the low, medium and high ambiguity regimes.
    pub group_mix: [f64; 3],
    /// Dirichlet precision `alpha0` of each regime; must exceed `K - 1`.
    pub precisions: [f64; 3],
    pub multi_tag_prob: f64,
    pub noise_sigma: f64,
    pub test_fraction: f64,
}

impl SynthConfig {
    pub fn new(n: usize, k: usize, d: usize, seed: u64) -> Self {
        Self {
            n,
            k,
            d,
            annotators: 3,
            seed,
            group_mix: [0.237, 0.513, 0.250],
            precisions: Self::default_precisions(k),
            multi_tag_prob: 0.04,
            noise_sigma: 0.05,
            test_fraction: 0.2,
        }
    }

    /// `alpha0 = K + 15, K + 3, K`; the high regime is the flat Dirichlet.
    pub fn default_precisions(k: usize) -> [f64; 3] {
        let k = k as f64;
        [k + 15.0, k + 3.0, k]
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("n must be at least 1"));
        }
        if self.k < 2 {
            return Err(Error::config("K must be at least 2"));
        }
        if self.k > self.d {
            return Err(Error::config(format!(
                "K = {} exceeds the feature dimension d = {}; class centroids need d >= K",
                self.k, self.d
            )));
        }
        if self.annotators == 0 {
            return Err(Error::config("at least one annotator is needed"));
        }
        let mix_sum: f64 = self.group_mix.iter().sum();
        if self.group_mix.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (mix_sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("group_mix {:?} must be a probability vector", self.group_mix)));
        }
        let floor = self.k as f64 - 1.0;
        if let Some(p) = self.precisions.iter().find(|p| !(p.is_finite() && **p > floor)) {
            return Err(Error::config(format!("regime precision {p} must exceed K - 1 = {floor}")));
        }
        if !(0.0..1.0).contains(&self.multi_tag_prob) {
            return Err(Error::config("multi_tag_prob must lie in [0, 1)"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::config("noise_sigma must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.test_fraction) {
            return Err(Error::config("test_fraction must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthUtterance {
    pub id: String,
    pub index: usize,
    pub split: Split,
    pub regime: usize,
    pub dominant: usize,
    pub true_mu: CategoricalDist,
    pub features: Vec<f64>,
    pub annotations: AnnotationSet,
}

impl SynthUtterance {
    pub fn group(&self) -> AgreementGroup {
        self.annotations.group()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub config: SynthConfig,
    pub space: ClassSpace,
    pub utterances: Vec<SynthUtterance>,
}

impl Corpus {
    pub fn to_dataset(&self) -> Dataset {
        Dataset {
            space: self.space.clone(),
            dim: self.config.d,
            records: self
                .utterances
                .iter()
                .map(|u| Record {
                    id: u.id.clone(),
                    split: u.split,
                    features: u.features.clone(),
                    annotations: u.annotations.clone(),
                })
                .collect(),
        }
    }
}

pub fn utterance_id(index: usize) -> String {
    format!("utt{index:06}")
}

/// The random stream of one utterance.
pub fn utterance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn pick(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // rounding at the top end: last class with positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// Generate utterance `index` of the corpus described by `config`.
pub fn generate_one(config: &SynthConfig, space: &ClassSpace, index: usize) -> Result<SynthUtterance> {
    let k = config.k;
    let mut rng = utterance_rng(config.seed, index);

    let split = if rng.random::<f64>() < config.test_fraction {
        Split::Test
    } else {
        Split::Train
    };
    let regime = pick(&mut rng, &config.group_mix);
    let dominant = rng.random_range(0..k);

    let mut mu = Vec::with_capacity(k);
    for c in 0..k {
        let shape = if c == dominant {
            config.precisions[regime] - (k as f64 - 1.0)
        } else {
            1.0
        };
        let g = Gamma::new(shape, 1.0).map_err(|e| Error::config(format!("gamma shape {shape}: {e}")))?;
        mu.push(g.sample(&mut rng));
    }
    let total: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|v| *v /= total);

    let mut evaluations = Vec::with_capacity(config.annotators);
    for _ in 0..config.annotators {
        let first = pick(&mut rng, &mu);
        let coin: f64 = rng.random();
        if coin < config.multi_tag_prob {
            let mut rest = mu.clone();
            rest[first] = 0.0;
            if rest.iter().any(|&w| w > 0.0) {
                let second = pick(&mut rng, &rest);
                evaluations.push(Evaluation::new([first, second])?);
                continue;
            }
        }
        evaluations.push(Evaluation::single(first));
    }

    let mut features = Vec::with_capacity(config.d);
    for j in 0..config.d {
        let noise: f64 = rng.sample(StandardNormal);
        let centre = if j < k { mu[j] } else { 0.0 };
        features.push(centre + config.noise_sigma * noise);
    }

    let annotations = AnnotationSet::new(evaluations, space)?;
    Ok(SynthUtterance {
        id: utterance_id(index),
        index,
        split,
        regime,
        dominant,
        true_mu: CategoricalDist::new(mu)?,
        features,
        annotations,
    })
}

pub fn generate(config: &SynthConfig) -> Result<Corpus> {
    config.validate()?;
    let space = ClassSpace::with_letters(config.k)?;
    let utterances = (0..config.n)
        .map(|i| generate_one(config, &space, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus {
        config: config.clone(),
        space,
        utterances,
    })
}

/// Corpus statistics, one row per line of [`CorpusStats::table`].
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusStats {
    pub utterances: usize,
    pub evaluations: usize,
    pub multi_tag_evaluations: usize,
    /// Utterances with more labels than evaluations.
    pub extra_label_utterances: usize,
    pub labels: usize,
    pub full: usize,
    pub majority: usize,
    pub none: usize,
}

impl CorpusStats {
    pub fn avg_labels(&self) -> f64 {
        self.labels as f64 / self.utterances as f64
    }

    pub fn group_count(&self, g: AgreementGroup) -> usize {
        match g {
            AgreementGroup::Full => self.full,
            AgreementGroup::Majority => self.majority,
            AgreementGroup::NoMajority => self.none,
        }
    }

    pub fn table(&self) -> String {
        let rows: [(&str, String); 8] = [
            ("Number of total utterances", self.utterances.to_string()),
            ("Number of total evaluations", self.evaluations.to_string()),
            ("Evaluation with more than one label", self.multi_tag_evaluations.to_string()),
            ("Utterance with more labels than evaluations", self.extra_label_utterances.to_string()),
            ("Average number of labels per utterance", format!("{:.2}", self.avg_labels())),
            ("Number of full-agreement utterances", self.full.to_string()),
            ("Number of majority-agreement utterances", self.majority.to_string()),
            ("Number of no-majority utterances", self.none.to_string()),
        ];
        let mut out = String::new();
        for (name, value) in rows {
            out.push_str(&format!("{name:<46}{value:>10}\n"));
        }
        out
    }
}

pub fn stats<'a>(sets: impl IntoIterator<Item = &'a AnnotationSet>) -> Result<CorpusStats> {
    let mut s = CorpusStats {
        utterances: 0,
        evaluations: 0,
        multi_tag_evaluations: 0,
        extra_label_utterances: 0,
        labels: 0,
        full: 0,
        majority: 0,
        none: 0,
    };
    for set in sets {
        s.utterances += 1;
        s.evaluations += set.evaluations().len();
        s.multi_tag_evaluations += set.evaluations().iter().filter(|e| e.is_multi_tag()).count();
        s.labels += set.labels().len();
        if set.labels().len() > set.evaluations().len() {
            s.extra_label_utterances += 1;
        }
        match set.group() {
            AgreementGroup::Full => s.full += 1,
            AgreementGroup::Majority => s.majority += 1,
            AgreementGroup::NoMajority => s.none += 1,
        }
    }
    if s.utterances == 0 {
        return Err(Error::invalid("statistics of an empty corpus"));
    }
    Ok(s)
}
