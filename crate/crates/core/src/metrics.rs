//! Accuracy, distribution quality and uncertainty-detection metrics.
//!
//! Detection treats utterances with a majority class (FULL and MAJORITY)
//! as positives and no-majority utterances as negatives. Max.P scores
//! positives high; entropy scores them low. AUPR is uninterpolated average
//! precision over the distinct score thresholds.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::annotations::{AgreementGroup, AnnotationSet};
use crate::dirichlet::CategoricalDist;
use crate::error::{Error, Result};

/// Weighted accuracy (overall) and unweighted accuracy (mean per-class
/// recall over the classes present in `refs`).
pub fn wa_ua(refs: &[usize], preds: &[usize], k: usize) -> Result<(f64, f64)> {
    if refs.is_empty() || refs.len() != preds.len() {
        return Err(Error::invalid(format!(
            "need equal, non-empty reference and prediction lists ({} vs {})",
            refs.len(),
            preds.len()
        )));
    }
    let mut per_class = vec![(0usize, 0usize); k];
    let mut correct = 0;
    for (&r, &p) in refs.iter().zip(preds) {
        if r >= k || p >= k {
            return Err(Error::invalid(format!("class index out of range for K = {k}")));
        }
        per_class[r].1 += 1;
        if r == p {
            per_class[r].0 += 1;
            correct += 1;
        }
    }
    let wa = correct as f64 / refs.len() as f64;
    let present: Vec<f64> = per_class
        .iter()
        .filter(|(_, n)| *n > 0)
        .map(|&(c, n)| c as f64 / n as f64)
        .collect();
    let ua = present.iter().sum::<f64>() / present.len() as f64;
    Ok((wa, ua))
}

pub fn max_p(y: &CategoricalDist) -> f64 {
    y.as_slice().iter().copied().fold(0.0, f64::max)
}

/// Natural-log entropy, `0 ln 0 = 0`.
pub fn entropy(y: &CategoricalDist) -> f64 {
    -y.as_slice()
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// `KL(target || pred)`; `+inf` when `pred` misses mass that `target` has.
pub fn kl_divergence(target: &CategoricalDist, pred: &CategoricalDist) -> f64 {
    target
        .as_slice()
        .iter()
        .zip(pred.as_slice())
        .filter(|(&t, _)| t > 0.0)
        .map(|(&t, &p)| if p > 0.0 { t * (t / p).ln() } else { f64::INFINITY })
        .sum()
}

pub fn mean_kl(targets: &[CategoricalDist], preds: &[CategoricalDist]) -> Result<f64> {
    if targets.is_empty() || targets.len() != preds.len() {
        return Err(Error::invalid("need equal, non-empty target and prediction lists"));
    }
    Ok(mean(targets.iter().zip(preds).map(|(t, p)| kl_divergence(t, p))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    MaxP,
    Entropy,
}

impl Measure {
    pub fn as_str(self) -> &'static str {
        match self {
            Measure::MaxP => "maxp",
            Measure::Entropy => "ent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision/recall at every distinct threshold, strictest first.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub measure: Option<Measure>,
    pub higher_is_positive: bool,
    pub points: Vec<PrPoint>,
    pub positives: usize,
    pub negatives: usize,
}

impl PrCurve {
    pub fn prevalence(&self) -> f64 {
        self.positives as f64 / (self.positives + self.negatives) as f64
    }

    /// `threshold,precision,recall` CSV.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,precision,recall\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{},{}", p.threshold, p.precision, p.recall);
        }
        s
    }
}

/// Sweep the distinct scores from most to least confident. Tied scores
/// enter together at one threshold.
pub fn pr_curve(scores: &[f64], is_positive: &[bool], higher_is_positive: bool) -> Result<PrCurve> {
    if scores.len() != is_positive.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    let positives = is_positive.iter().filter(|&&p| p).count();
    let negatives = is_positive.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::invalid(format!(
            "detection needs both classes ({positives} positives, {negatives} negatives)"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = scores[a].total_cmp(&scores[b]);
        let ord = if higher_is_positive { ord.reverse() } else { ord };
        ord.then(a.cmp(&b))
    });

    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if is_positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            threshold,
            precision: tp as f64 / (tp + fp) as f64,
            recall: tp as f64 / positives as f64,
        });
    }
    Ok(PrCurve {
        measure: None,
        higher_is_positive,
        points,
        positives,
        negatives,
    })
}

/// Average precision: `sum_i (recall_i - recall_{i-1}) * precision_i`.
pub fn aupr(curve: &PrCurve) -> f64 {
    let mut prev = 0.0;
    let mut area = 0.0;
    for p in &curve.points {
        area += (p.recall - prev) * p.precision;
        prev = p.recall;
    }
    area
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub maxp: PrCurve,
    pub ent: PrCurve,
    pub aupr_maxp: f64,
    pub aupr_ent: f64,
}

/// Detect no-majority utterances from the predictive distributions.
pub fn detect_report(groups: &[AgreementGroup], preds: &[CategoricalDist]) -> Result<Detection> {
    if groups.len() != preds.len() {
        return Err(Error::invalid("groups and predictions differ in length"));
    }
    let positive: Vec<bool> = groups.iter().map(|g| g.has_majority()).collect();
    let maxp_scores: Vec<f64> = preds.iter().map(max_p).collect();
    let ent_scores: Vec<f64> = preds.iter().map(entropy).collect();
    let mut maxp = pr_curve(&maxp_scores, &positive, true)?;
    maxp.measure = Some(Measure::MaxP);
    let mut ent = pr_curve(&ent_scores, &positive, false)?;
    ent.measure = Some(Measure::Entropy);
    Ok(Detection {
        aupr_maxp: aupr(&maxp),
        aupr_ent: aupr(&ent),
        maxp,
        ent,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupMetrics {
    pub count: usize,
    pub mean_maxp: f64,
    pub mean_entropy: f64,
    pub mean_kl: f64,
    /// Only for groups with a majority class.
    pub wa: Option<f64>,
    pub ua: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub count: usize,
    /// Over FULL and MAJORITY utterances; absent when there are none.
    pub wa: Option<f64>,
    pub ua: Option<f64>,
    pub mean_kl: f64,
    pub mean_entropy: f64,
    pub mean_maxp: f64,
    /// Absent when the set lacks either positives or negatives.
    pub aupr_maxp: Option<f64>,
    pub aupr_ent: Option<f64>,
    pub per_group: BTreeMap<AgreementGroup, GroupMetrics>,
}

/// Mean with Neumaier-compensated summation.
fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp, mut n) = (0.0f64, 0.0f64, 0usize);
    for x in v {
        n += 1;
        let t = sum + x;
        if !t.is_finite() {
            sum = t;
            continue;
        }
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    match n {
        0 => f64::NAN,
        _ if !sum.is_finite() => sum,
        _ => (sum + comp) / n as f64,
    }
}

/// Every report metric for a set of annotated utterances and their
/// predictive distributions. KL targets are the soft labels.
pub fn evaluate(sets: &[&AnnotationSet], preds: &[CategoricalDist]) -> Result<MetricsReport> {
    if sets.is_empty() || sets.len() != preds.len() {
        return Err(Error::invalid("need equal, non-empty annotation and prediction lists"));
    }
    let k = preds[0].k();
    let targets: Vec<CategoricalDist> = sets.iter().map(|s| s.soft_label()).collect();
    let kls: Vec<f64> = targets.iter().zip(preds).map(|(t, p)| kl_divergence(t, p)).collect();
    let ents: Vec<f64> = preds.iter().map(entropy).collect();
    let maxps: Vec<f64> = preds.iter().map(max_p).collect();
    let groups: Vec<AgreementGroup> = sets.iter().map(|s| s.group()).collect();

    let accuracy = |keep: &dyn Fn(AgreementGroup) -> bool| -> Result<Option<(f64, f64)>> {
        let (refs, hyp): (Vec<usize>, Vec<usize>) = sets
            .iter()
            .zip(preds)
            .filter(|(s, _)| keep(s.group()))
            .filter_map(|(s, p)| s.agreement().majority.map(|m| (m, p.argmax())))
            .unzip();
        if refs.is_empty() {
            Ok(None)
        } else {
            wa_ua(&refs, &hyp, k).map(Some)
        }
    };

    let overall = accuracy(&|g| g.has_majority())?;
    let mut per_group = BTreeMap::new();
    for g in AgreementGroup::ALL {
        let idx: Vec<usize> = (0..sets.len()).filter(|&i| groups[i] == g).collect();
        if idx.is_empty() {
            continue;
        }
        let acc = if g.has_majority() { accuracy(&|h| h == g)? } else { None };
        per_group.insert(
            g,
            GroupMetrics {
                count: idx.len(),
                mean_maxp: mean(idx.iter().map(|&i| maxps[i])),
                mean_entropy: mean(idx.iter().map(|&i| ents[i])),
                mean_kl: mean(idx.iter().map(|&i| kls[i])),
                wa: acc.map(|a| a.0),
                ua: acc.map(|a| a.1),
            },
        );
    }
    let detection = detect_report(&groups, preds).ok();
    Ok(MetricsReport {
        count: sets.len(),
        wa: overall.map(|a| a.0),
        ua: overall.map(|a| a.1),
        mean_kl: mean(kls.iter().copied()),
        mean_entropy: mean(ents.iter().copied()),
        mean_maxp: mean(maxps.iter().copied()),
        aupr_maxp: detection.as_ref().map(|d| d.aupr_maxp),
        aupr_ent: detection.as_ref().map(|d| d.aupr_ent),
        per_group,
    })
}

fn fixed(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:.6}"),
        _ => "null".into(),
    }
}

impl MetricsReport {
    /// JSON document with every real at 6 decimal places.
    pub fn to_json(&self) -> String {
        let mut s = String::from("{\n");
        let _ = writeln!(s, "  \"count\": {},", self.count);
        for (name, v) in [
            ("wa", self.wa),
            ("ua", self.ua),
            ("mean_kl", Some(self.mean_kl)),
            ("mean_entropy", Some(self.mean_entropy)),
            ("mean_maxp", Some(self.mean_maxp)),
            ("aupr_maxp", self.aupr_maxp),
            ("aupr_ent", self.aupr_ent),
        ] {
            let _ = writeln!(s, "  \"{name}\": {},", fixed(v));
        }
        s.push_str("  \"per_group\": {");
        for (n, (g, m)) in self.per_group.iter().enumerate() {
            s.push_str(if n == 0 { "\n" } else { ",\n" });
            let _ = write!(
                s,
                "    \"{g}\": {{\"count\": {}, \"mean_maxp\": {}, \"mean_entropy\": {}, \"mean_kl\": {}, \"wa\": {}, \"ua\": {}}}",
                m.count,
                fixed(Some(m.mean_maxp)),
                fixed(Some(m.mean_entropy)),
                fixed(Some(m.mean_kl)),
                fixed(m.wa),
                fixed(m.ua),
            );
        }
        s.push_str("\n  }\n}\n");
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let num = |v: &serde_json::Value, key: &str| -> Result<Option<f64>> {
            match v.get(key) {
                Some(serde_json::Value::Null) => Ok(None),
                Some(x) => x
                    .as_f64()
                    .map(Some)
                    .ok_or_else(|| Error::Format(format!("{key} is not a number"))),
                None => Err(Error::Format(format!("missing field {key}"))),
            }
        };
        // non-finite values are written as null
        let req = |v: &serde_json::Value, key: &str| -> Result<f64> { Ok(num(v, key)?.unwrap_or(f64::NAN)) };
        let count = |v: &serde_json::Value| -> Result<usize> {
            v.get("count")
                .and_then(serde_json::Value::as_u64)
                .map(|c| c as usize)
                .ok_or_else(|| Error::Format("missing count".into()))
        };
        let mut per_group = BTreeMap::new();
        if let Some(obj) = v.get("per_group").and_then(serde_json::Value::as_object) {
            for (name, g) in obj {
                let group = AgreementGroup::ALL
                    .into_iter()
                    .find(|a| a.as_str() == name)
                    .ok_or_else(|| Error::Format(format!("unknown group {name:?}")))?;
                per_group.insert(
                    group,
                    GroupMetrics {
                        count: count(g)?,
                        mean_maxp: req(g, "mean_maxp")?,
                        mean_entropy: req(g, "mean_entropy")?,
                        mean_kl: req(g, "mean_kl")?,
                        wa: num(g, "wa")?,
                        ua: num(g, "ua")?,
                    },
                );
            }
        }
        Ok(Self {
            count: count(&v)?,
            wa: num(&v, "wa")?,
            ua: num(&v, "ua")?,
            mean_kl: req(&v, "mean_kl")?,
            mean_entropy: req(&v, "mean_entropy")?,
            mean_maxp: req(&v, "mean_maxp")?,
            aupr_maxp: num(&v, "aupr_maxp")?,
            aupr_ent: num(&v, "aupr_ent")?,
            per_group,
        })
    }

    /// Copy with every real rounded to 6 decimals, as it reads back from a file.
    pub fn rounded(&self) -> Self {
        let r = |x: f64| format!("{x:.6}").parse::<f64>().unwrap_or(x);
        let ro = |x: Option<f64>| x.filter(|v| v.is_finite()).map(r);
        Self {
            count: self.count,
            wa: ro(self.wa),
            ua: ro(self.ua),
            mean_kl: r(self.mean_kl),
            mean_entropy: r(self.mean_entropy),
            mean_maxp: r(self.mean_maxp),
            aupr_maxp: ro(self.aupr_maxp),
            aupr_ent: ro(self.aupr_ent),
            per_group: self
                .per_group
                .iter()
                .map(|(g, m)| {
                    (
                        *g,
                        GroupMetrics {
                            count: m.count,
                            mean_maxp: r(m.mean_maxp),
                            mean_entropy: r(m.mean_entropy),
                            mean_kl: r(m.mean_kl),
                            wa: ro(m.wa),
                            ua: ro(m.ua),
                        },
                    )
                })
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::{ClassSpace, Evaluation};

    fn dist(p: &[f64]) -> CategoricalDist {
        CategoricalDist::new(p.to_vec()).unwrap()
    }

    #[test]
    fn accuracy_examples() {
        assert_eq!(wa_ua(&[0, 0, 0, 1], &[0, 0, 0, 0], 2).unwrap(), (0.75, 0.5));
        assert_eq!(wa_ua(&[0, 1, 2], &[0, 1, 2], 3).unwrap(), (1.0, 1.0));
        assert_eq!(wa_ua(&[0, 1], &[1, 0], 2).unwrap(), (0.0, 0.0));
        assert!(wa_ua(&[], &[], 2).is_err());
        assert!(wa_ua(&[0], &[0, 1], 2).is_err());
    }

    #[test]
    fn uncertainty_measures() {
        assert_eq!(max_p(&dist(&[0.5, 0.25, 0.25])), 0.5);
        assert!((max_p(&CategoricalDist::uniform(5)) - 0.2).abs() < 1e-15);
        assert_eq!(max_p(&dist(&[0.0, 1.0, 0.0])), 1.0);
        assert!((entropy(&CategoricalDist::uniform(5)) - 5f64.ln()).abs() < 1e-12);
        assert_eq!(entropy(&dist(&[0.0, 1.0, 0.0])), 0.0);
        assert!((entropy(&dist(&[0.5, 0.5])) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn kl_examples() {
        let a = dist(&[0.2, 0.3, 0.5]);
        assert_eq!(mean_kl(&[a.clone()], &[a.clone()]).unwrap(), 0.0);
        let kl = mean_kl(&[dist(&[1.0, 0.0])], &[dist(&[0.5, 0.5])]).unwrap();
        assert!((kl - 2f64.ln()).abs() < 1e-15);
        assert_eq!(kl_divergence(&dist(&[0.5, 0.5]), &dist(&[1.0, 0.0])), f64::INFINITY);
        assert!(mean_kl(&[a.clone()], &[]).is_err());
    }

    #[test]
    fn means_survive_infinite_terms() {
        assert_eq!(mean([1.0, f64::INFINITY, 2.0].into_iter()), f64::INFINITY);
        assert_eq!(mean(std::iter::repeat_n(0.1, 10)), 0.1);
        assert!(mean(std::iter::empty()).is_nan());
        let kl = mean_kl(&[dist(&[0.5, 0.5]), dist(&[0.5, 0.5])], &[dist(&[1.0, 0.0]), dist(&[0.5, 0.5])]).unwrap();
        assert_eq!(kl, f64::INFINITY);
    }

    #[test]
    fn pr_perfect_separation() {
        let c = pr_curve(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false], true).unwrap();
        assert_eq!((c.points[1].precision, c.points[1].recall), (1.0, 1.0));
        assert_eq!(aupr(&c), 1.0);
        let c = pr_curve(&[0.1, 0.2, 0.8, 0.9], &[true, true, false, false], false).unwrap();
        assert_eq!(aupr(&c), 1.0);
    }

    #[test]
    fn pr_tied_scores_form_one_point() {
        let c = pr_curve(&[0.4; 5], &[true, false, true, true, false], true).unwrap();
        assert_eq!(c.points.len(), 1);
        assert_eq!((c.points[0].precision, c.points[0].recall), (0.6, 1.0));
        assert!((aupr(&c) - 0.6).abs() < 1e-15);
        assert_eq!(c.prevalence(), 0.6);
    }

    #[test]
    fn pr_needs_both_classes() {
        assert!(pr_curve(&[0.1, 0.2], &[true, true], true).is_err());
        assert!(pr_curve(&[0.1, 0.2], &[false, false], true).is_err());
        assert!(pr_curve(&[0.1, f64::NAN], &[true, false], true).is_err());
    }

    #[test]
    fn pr_recall_never_decreases() {
        let scores = [0.3, 0.7, 0.7, 0.1, 0.9, 0.5, 0.5, 0.2];
        let pos = [true, false, true, false, true, true, false, false];
        let c = pr_curve(&scores, &pos, true).unwrap();
        assert!(c.points.windows(2).all(|w| w[0].recall <= w[1].recall && w[0].threshold > w[1].threshold));
        assert_eq!(c.points.last().unwrap().recall, 1.0);
        assert!(c.to_csv().starts_with("threshold,precision,recall\n0.9,1,0.25\n"));
    }

    #[test]
    fn detection_extremes() {
        let groups = [AgreementGroup::Full, AgreementGroup::NoMajority, AgreementGroup::Full, AgreementGroup::NoMajority];
        let onehot = dist(&[1.0, 0.0, 0.0]);
        let flat = CategoricalDist::uniform(3);
        let d = detect_report(&groups, &[onehot.clone(), flat.clone(), onehot, flat.clone()]).unwrap();
        assert_eq!((d.aupr_maxp, d.aupr_ent), (1.0, 1.0));
        assert_eq!(d.maxp.measure, Some(Measure::MaxP));
        assert!(!d.ent.higher_is_positive);

        let groups = [AgreementGroup::Full, AgreementGroup::Majority, AgreementGroup::NoMajority];
        let d = detect_report(&groups, &vec![dist(&[0.5, 0.3, 0.2]); 3]).unwrap();
        assert!((d.aupr_maxp - 2.0 / 3.0).abs() < 1e-15);
        assert!((d.aupr_ent - 2.0 / 3.0).abs() < 1e-15);
    }

    fn set(space: &ClassSpace, evals: &[&[usize]]) -> AnnotationSet {
        let evals = evals.iter().map(|t| Evaluation::new(t.to_vec()).unwrap()).collect();
        AnnotationSet::new(evals, space).unwrap()
    }

    #[test]
    fn report_over_groups() {
        let space = ClassSpace::with_letters(3).unwrap();
        let sets = [
            set(&space, &[&[0], &[0], &[0]]),
            set(&space, &[&[1], &[1], &[2]]),
            set(&space, &[&[0], &[1], &[2]]),
            set(&space, &[&[2], &[2], &[2]]),
        ];
        let preds = [
            dist(&[0.8, 0.1, 0.1]),
            dist(&[0.2, 0.7, 0.1]),
            CategoricalDist::uniform(3),
            dist(&[0.6, 0.2, 0.2]),
        ];
        let refs: Vec<&AnnotationSet> = sets.iter().collect();
        let r = evaluate(&refs, &preds).unwrap();
        assert_eq!(r.count, 4);
        // majority refs A, B, C; predictions A, B, A
        assert!((r.wa.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((r.ua.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.per_group.values().map(|g| g.count).sum::<usize>(), 4);
        let none = &r.per_group[&AgreementGroup::NoMajority];
        assert_eq!((none.wa, none.ua), (None, None));
        assert!(none.mean_kl.abs() < 1e-15);
        assert_eq!(r.per_group[&AgreementGroup::Full].count, 2);
        assert_eq!(r.per_group[&AgreementGroup::Majority].wa, Some(1.0));
        assert!(r.mean_entropy >= 0.0 && r.mean_entropy <= 3f64.ln());
        assert!(r.aupr_maxp.is_some());

        let back = MetricsReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r.rounded());
    }

    #[test]
    fn report_without_negatives_has_no_aupr() {
        let space = ClassSpace::with_letters(2).unwrap();
        let sets = [set(&space, &[&[0], &[0], &[1]])];
        let r = evaluate(&[&sets[0]], &[dist(&[0.5, 0.5])]).unwrap();
        assert_eq!((r.aupr_maxp, r.aupr_ent), (None, None));
        assert!(r.to_json().contains("\"aupr_ent\": null"));
    }
}
