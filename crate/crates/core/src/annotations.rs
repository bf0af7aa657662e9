//! Multi-annotator label handling.
//!
//! Each annotator gives one [`Evaluation`], a set of one or more class tags.
//! Every tag becomes one one-hot label, so an utterance with evaluations
//! `{A}, {A,B}, {C}` carries the four labels `A, A, B, C`. Agreement groups
//! are decided per annotator: a class scores one vote from every annotator
//! whose tag set contains it.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dirichlet::CategoricalDist;
use crate::error::{Error, Result};

/// Ordered, case-sensitive class names. Index order is canonical.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassSpace {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl ClassSpace {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() < 2 {
            return Err(Error::invalid(format!(
                "a class space needs at least 2 classes, got {}",
                names.len()
            )));
        }
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::invalid("empty class name"));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate class name {name:?}")));
            }
        }
        Ok(Self { names, index })
    }

    /// `A`, `B`, ... for up to 26 classes, `K26`, `K27`, ... beyond.
    pub fn with_letters(k: usize) -> Result<Self> {
        Self::new((0..k).map(|i| {
            if i < 26 {
                char::from(b'A' + i as u8).to_string()
            } else {
                format!("K{i}")
            }
        }))
    }

    pub fn k(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, class: usize) -> &str {
        &self.names[class]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

/// The tag set chosen by one annotator, stored sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Evaluation {
    tags: Vec<usize>,
}

impl Evaluation {
    pub fn new(tags: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut tags: Vec<usize> = tags.into_iter().collect();
        if tags.is_empty() {
            return Err(Error::invalid("an evaluation needs at least one tag"));
        }
        tags.sort_unstable();
        if tags.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("duplicate tag in evaluation {tags:?}")));
        }
        Ok(Self { tags })
    }

    pub fn single(class: usize) -> Self {
        Self { tags: vec![class] }
    }

    pub fn tags(&self) -> &[usize] {
        &self.tags
    }

    pub fn contains(&self, class: usize) -> bool {
        self.tags.binary_search(&class).is_ok()
    }

    pub fn is_multi_tag(&self) -> bool {
        self.tags.len() > 1
    }
}

/// A hard label: class `class` out of `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OneHot {
    pub class: usize,
    pub k: usize,
}

impl OneHot {
    pub fn new(class: usize, k: usize) -> Result<Self> {
        if class >= k {
            return Err(Error::invalid(format!("class {class} out of range for K = {k}")));
        }
        Ok(Self { class, k })
    }

    pub fn to_vec(self) -> Vec<f64> {
        let mut v = vec![0.0; self.k];
        v[self.class] = 1.0;
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgreementGroup {
    /// Every annotator tagged the same class.
    Full,
    /// A unique plurality class backed by at least two annotators.
    Majority,
    /// No unique plurality.
    #[serde(rename = "none")]
    NoMajority,
}

impl AgreementGroup {
    pub const ALL: [AgreementGroup; 3] = [Self::Full, Self::Majority, Self::NoMajority];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Majority => "majority",
            Self::NoMajority => "none",
        }
    }

    /// FULL and MAJORITY utterances have a usable reference class.
    pub fn has_majority(self) -> bool {
        !matches!(self, Self::NoMajority)
    }
}

impl std::fmt::Display for AgreementGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Agreement group plus the majority class (present iff the group has one).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Agreement {
    pub group: AgreementGroup,
    pub majority: Option<usize>,
}

fn check_tags(evals: &[Evaluation], space: &ClassSpace) -> Result<()> {
    if evals.is_empty() {
        return Err(Error::invalid("empty evaluation list"));
    }
    let k = space.k();
    for e in evals {
        if let Some(&bad) = e.tags().iter().find(|&&t| t >= k) {
            return Err(Error::invalid(format!("tag {bad} out of range for K = {k}")));
        }
    }
    Ok(())
}

/// One one-hot label per tag, annotator order then tag-index order.
pub fn expand(evals: &[Evaluation], space: &ClassSpace) -> Result<Vec<OneHot>> {
    check_tags(evals, space)?;
    let k = space.k();
    Ok(evals
        .iter()
        .flat_map(|e| e.tags().iter().map(move |&class| OneHot { class, k }))
        .collect())
}

/// Number of annotators whose tag set contains each class.
pub fn vote_counts(evals: &[Evaluation], space: &ClassSpace) -> Result<Vec<usize>> {
    check_tags(evals, space)?;
    let mut counts = vec![0usize; space.k()];
    for e in evals {
        for &t in e.tags() {
            counts[t] += 1;
        }
    }
    Ok(counts)
}

pub fn classify_agreement(evals: &[Evaluation], space: &ClassSpace) -> Result<Agreement> {
    let counts = vote_counts(evals, space)?;
    Ok(agreement_from_counts(&counts, evals.len()))
}

pub(crate) fn agreement_from_counts(counts: &[usize], annotators: usize) -> Agreement {
    let top = counts.iter().copied().max().unwrap_or(0);
    let mut at_top = counts.iter().enumerate().filter(|(_, &c)| c == top);
    let first = at_top.next().map(|(i, _)| i);
    let unique = at_top.next().is_none();
    match first {
        Some(class) if unique && top == annotators && top >= 1 => Agreement {
            group: AgreementGroup::Full,
            majority: Some(class),
        },
        Some(class) if unique && top >= 2 => Agreement {
            group: AgreementGroup::Majority,
            majority: Some(class),
        },
        _ => Agreement {
            group: AgreementGroup::NoMajority,
            majority: None,
        },
    }
}

/// Relative frequency of each class among the labels.
pub fn soft_label(labels: &[OneHot]) -> Result<CategoricalDist> {
    let first = labels
        .first()
        .ok_or_else(|| Error::invalid("soft label of an empty label list"))?;
    let k = first.k;
    let mut p = vec![0.0; k];
    for l in labels {
        if l.k != k {
            return Err(Error::invalid("labels over different class counts"));
        }
        p[l.class] += 1.0;
    }
    let m = labels.len() as f64;
    p.iter_mut().for_each(|v| *v /= m);
    Ok(CategoricalDist::from_vec_unchecked(p))
}

/// Label smoothing: `eps1` on every non-target class, the rest on the target.
///
/// `eps1 = 0` gives back the one-hot label.
pub fn smooth_label(label: OneHot, eps1: f64) -> Result<CategoricalDist> {
    let k = label.k;
    let upper = 1.0 / (k as f64 - 1.0);
    if !(eps1.is_finite() && eps1 >= 0.0 && eps1 < upper) {
        return Err(Error::invalid(format!(
            "eps1 = {eps1} must lie in [0, {upper}) for K = {k}"
        )));
    }
    let mut p = vec![eps1; k];
    p[label.class] = 1.0 - (k as f64 - 1.0) * eps1;
    Ok(CategoricalDist::from_vec_unchecked(p))
}

/// Smoothing of an arbitrary observation: `(1 - K eps1) mu + eps1`.
///
/// On a one-hot label this is [`smooth_label`].
pub fn smooth(mu: &CategoricalDist, eps1: f64) -> Result<CategoricalDist> {
    let k = mu.k();
    let upper = 1.0 / (k as f64 - 1.0);
    if !(eps1.is_finite() && eps1 >= 0.0 && eps1 < upper) {
        return Err(Error::invalid(format!(
            "eps1 = {eps1} must lie in [0, {upper}) for K = {k}"
        )));
    }
    let keep = 1.0 - k as f64 * eps1;
    Ok(CategoricalDist::from_vec_unchecked(
        mu.as_slice().iter().map(|&p| keep * p + eps1).collect(),
    ))
}

/// One observed distribution per evaluation: uniform over its tags.
pub fn observations(evals: &[Evaluation], space: &ClassSpace) -> Result<Vec<CategoricalDist>> {
    check_tags(evals, space)?;
    let k = space.k();
    Ok(evals
        .iter()
        .map(|e| {
            let mut p = vec![0.0; k];
            let w = 1.0 / e.tags().len() as f64;
            for &t in e.tags() {
                p[t] = w;
            }
            CategoricalDist::from_vec_unchecked(p)
        })
        .collect())
}

impl From<OneHot> for CategoricalDist {
    fn from(label: OneHot) -> Self {
        CategoricalDist::from_vec_unchecked(label.to_vec())
    }
}

/// Replace an agreed utterance's labels with as many copies of its majority
/// class; utterances without a majority keep their labels.
pub fn vote_and_replace(labels: &[OneHot], agreement: &Agreement) -> Vec<OneHot> {
    match agreement.majority {
        Some(class) if agreement.group.has_majority() => labels
            .iter()
            .map(|l| OneHot { class, k: l.k })
            .collect(),
        _ => labels.to_vec(),
    }
}

/// The evaluations of one utterance together with their label expansion.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet {
    evaluations: Vec<Evaluation>,
    labels: Vec<OneHot>,
    observations: Vec<CategoricalDist>,
    agreement: Agreement,
}

impl AnnotationSet {
    pub fn new(evaluations: Vec<Evaluation>, space: &ClassSpace) -> Result<Self> {
        let labels = expand(&evaluations, space)?;
        let observations = observations(&evaluations, space)?;
        let agreement = classify_agreement(&evaluations, space)?;
        Ok(Self {
            evaluations,
            labels,
            observations,
            agreement,
        })
    }

    pub fn evaluations(&self) -> &[Evaluation] {
        &self.evaluations
    }

    /// The M one-hot labels.
    pub fn labels(&self) -> &[OneHot] {
        &self.labels
    }

    /// One distribution per evaluation, as seen by the Dirichlet likelihood.
    pub fn observations(&self) -> &[CategoricalDist] {
        &self.observations
    }

    pub fn k(&self) -> usize {
        self.labels[0].k
    }

    pub fn agreement(&self) -> Agreement {
        self.agreement
    }

    pub fn group(&self) -> AgreementGroup {
        self.agreement.group
    }

    pub fn soft_label(&self) -> CategoricalDist {
        soft_label(&self.labels).expect("annotation sets are never empty")
    }

    /// The vote-and-replace transform, as single-tag evaluations.
    pub fn vote_and_replace(&self, space: &ClassSpace) -> Result<Self> {
        if !self.agreement.group.has_majority() {
            return Ok(self.clone());
        }
        let replaced = vote_and_replace(&self.labels, &self.agreement);
        let evals = replaced.iter().map(|l| Evaluation::single(l.class)).collect();
        Self::new(evals, space)
    }
}
