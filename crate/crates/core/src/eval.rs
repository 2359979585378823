//! Non-PSL baselines and the evaluation metrics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::models::Characteristic;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("no training labels")]
    EmptyTrain,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("{0} has a score but no gold label")]
    MissingGold(String),
    #[error("{0} has a gold label but no score")]
    MissingScore(String),
    #[error("score {1} for {0} is not a number")]
    NanScore(String, f64),
}

fn mean<'a>(values: impl Iterator<Item = &'a f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Every test user gets the mean training label.
pub fn baseline_average(
    train: &BTreeMap<String, f64>,
    test: &BTreeSet<String>,
) -> Result<BTreeMap<String, f64>, EvalError> {
    let m = mean(train.values()).ok_or(EvalError::EmptyTrain)?;
    Ok(test.iter().map(|u| (u.clone(), m)).collect())
}

/// User-page-user propagation: a page scores the mean label of its labeled
/// likers, a test user the mean score of the pages they like. Both fall back
/// to the global training mean (0.5 with no training labels).
pub fn baseline_upu(
    likes: &BTreeSet<(String, String)>,
    train: &BTreeMap<String, f64>,
    test: &BTreeSet<String>,
) -> BTreeMap<String, f64> {
    let global = mean(train.values()).unwrap_or(0.5);
    let mut page_labels: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (u, p) in likes {
        if let Some(&label) = train.get(u) {
            page_labels.entry(p).or_default().push(label);
        }
    }
    let page_score = |p: &str| page_labels.get(p).and_then(|l| mean(l.iter())).unwrap_or(global);
    let mut user_pages: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (u, p) in likes {
        if test.contains(u) {
            user_pages.entry(u).or_default().push(page_score(p));
        }
    }
    test.iter()
        .map(|u| {
            let s = user_pages.get(u.as_str()).and_then(|s| mean(s.iter())).unwrap_or(global);
            (u.clone(), s)
        })
        .collect()
}

/// Mean label of the `k` training users sharing the most liked pages with
/// each test user; ties go to the smaller user id. Users with no overlap get
/// the global training mean.
pub fn baseline_knn(
    likes: &BTreeSet<(String, String)>,
    train: &BTreeMap<String, f64>,
    test: &BTreeSet<String>,
    k: usize,
) -> Result<BTreeMap<String, f64>, EvalError> {
    if k == 0 {
        return Err(EvalError::ZeroK);
    }
    let global = mean(train.values()).unwrap_or(0.5);
    let mut likers: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (u, p) in likes {
        if train.contains_key(u) {
            likers.entry(p).or_default().push(u);
        }
    }
    let mut pages_of: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (u, p) in likes {
        if test.contains(u) {
            pages_of.entry(u).or_default().push(p);
        }
    }
    let mut out = BTreeMap::new();
    for u in test {
        let mut shared: BTreeMap<&str, usize> = BTreeMap::new();
        for p in pages_of.get(u.as_str()).into_iter().flatten() {
            for &v in likers.get(p).into_iter().flatten() {
                if v != u {
                    *shared.entry(v).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<(&str, usize)> = shared.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        let score = mean(ranked.iter().take(k).map(|(v, _)| &train[*v])).unwrap_or(global);
        out.insert(u.clone(), score);
    }
    Ok(out)
}

/// Metrics for one characteristic. Ranking metrics are `None` when the gold
/// labels contain a single class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub auc: Option<f64>,
    pub pr_pos: Option<f64>,
    pub pr_neg: Option<f64>,
    pub positives: usize,
    pub negatives: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsReport {
    pub per_characteristic: BTreeMap<Characteristic, Metrics>,
}

/// Twice the Mann-Whitney U statistic: 2 per positive ranked above a
/// negative, 1 per tie.
pub fn doubled_mann_whitney(pairs: &[(f64, bool)]) -> u64 {
    let mut sorted: Vec<(f64, bool)> = pairs.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut total, mut below) = (0u64, 0u64);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u64, 0u64);
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            if sorted[j].1 {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        total += pos * (2 * below + neg);
        below += neg;
        i = j;
    }
    total
}

fn class_counts(pairs: &[(f64, bool)]) -> (usize, usize) {
    let pos = pairs.iter().filter(|p| p.1).count();
    (pos, pairs.len() - pos)
}

pub fn auc(pairs: &[(f64, bool)]) -> Option<f64> {
    let (pos, neg) = class_counts(pairs);
    if pos == 0 || neg == 0 {
        return None;
    }
    Some(doubled_mann_whitney(pairs) as f64 / (2 * pos as u64 * neg as u64) as f64)
}

/// Area under the precision-recall curve for the positive class, with
/// step-wise interpolation and tied scores entering together.
pub fn pr_area(pairs: &[(f64, bool)]) -> Option<f64> {
    let (pos, neg) = class_counts(pairs);
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut sorted: Vec<(f64, bool)> = pairs.to_vec();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut tp, mut seen, mut area) = (0usize, 0usize, 0.0);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        let before = tp;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            tp += usize::from(sorted[j].1);
            j += 1;
        }
        seen = j;
        if tp > before {
            area += (tp - before) as f64 / pos as f64 * (tp as f64 / seen as f64);
        }
        i = j;
    }
    debug_assert_eq!(seen, pairs.len());
    Some(area)
}

/// Accuracy maps scores `>= threshold` to 1; AUC and PR areas use the raw
/// scores. PR- is the positive-class area for flipped labels and negated
/// scores.
pub fn compute_metrics(
    scores: &BTreeMap<String, f64>,
    gold: &BTreeMap<String, bool>,
    threshold: f64,
) -> Result<Metrics, EvalError> {
    let mut pairs = Vec::with_capacity(gold.len());
    for (u, &s) in scores {
        let &g = gold.get(u).ok_or_else(|| EvalError::MissingGold(u.clone()))?;
        if s.is_nan() {
            return Err(EvalError::NanScore(u.clone(), s));
        }
        pairs.push((s, g));
    }
    if let Some(u) = gold.keys().find(|u| !scores.contains_key(*u)) {
        return Err(EvalError::MissingScore(u.clone()));
    }
    let (positives, negatives) = class_counts(&pairs);
    let correct = pairs.iter().filter(|&&(s, g)| (s >= threshold) == g).count();
    let flipped: Vec<(f64, bool)> = pairs.iter().map(|&(s, g)| (-s, !g)).collect();
    Ok(Metrics {
        accuracy: if pairs.is_empty() { 0.0 } else { correct as f64 / pairs.len() as f64 },
        auc: auc(&pairs),
        pr_pos: pr_area(&pairs),
        pr_neg: pr_area(&flipped),
        positives,
        negatives,
    })
}

/// [`compute_metrics`] per characteristic.
pub fn compute_report(
    scores: &BTreeMap<(String, Characteristic), f64>,
    gold: &BTreeMap<(String, Characteristic), bool>,
    threshold: f64,
) -> Result<MetricsReport, EvalError> {
    let mut split_scores: BTreeMap<Characteristic, BTreeMap<String, f64>> = BTreeMap::new();
    let mut split_gold: BTreeMap<Characteristic, BTreeMap<String, bool>> = BTreeMap::new();
    for ((u, c), &s) in scores {
        split_scores.entry(*c).or_default().insert(u.clone(), s);
    }
    for ((u, c), &g) in gold {
        split_gold.entry(*c).or_default().insert(u.clone(), g);
    }
    let characteristics: BTreeSet<Characteristic> =
        split_scores.keys().chain(split_gold.keys()).copied().collect();
    let mut report = MetricsReport::default();
    for c in characteristics {
        let s = split_scores.remove(&c).unwrap_or_default();
        let g = split_gold.remove(&c).unwrap_or_default();
        let m = compute_metrics(&s, &g, threshold).map_err(|e| match e {
            EvalError::MissingGold(u) => EvalError::MissingGold(alloc::format!("({u}, {c})")),
            EvalError::MissingScore(u) => EvalError::MissingScore(alloc::format!("({u}, {c})")),
            other => other,
        })?;
        report.per_characteristic.insert(c, m);
    }
    Ok(report)
}
