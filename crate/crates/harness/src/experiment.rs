//! Cross-validation over users, with optional missing-source ablation.
//!
//! Users are shuffled with the seed and dealt round-robin into folds; pinned
//! users train in every fold. Per fold the training users' labels become
//! known `Is` atoms, the test users' become targets, and `Average` is
//! recomputed from the training labels. Every (fold, method) pair is an
//! independent task, so tasks run in parallel on the current rayon pool and
//! the report is assembled in a fixed order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use psl_core::eval::{baseline_average, baseline_knn, baseline_upu, compute_report, Metrics, MetricsReport};
use psl_core::models::{evidence_to_db, Characteristic, ProfileEvidence, SourceKind, CHARACTERISTICS};
use psl_core::{ground, solve_map, EvidenceDb, GroundAtom, ModelFile, SolverConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::tsv::{Gold, Scores};
use crate::{HarnessError, Result};

const FOLD_STREAM: u64 = 10;
const ABLATION_STREAM: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    Average,
    Upu,
    Knn,
}

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Self::Average => "average",
            Self::Upu => "upu",
            Self::Knn => "knn",
        }
    }
}

impl FromStr for Baseline {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "average" => Ok(Self::Average),
            "upu" => Ok(Self::Upu),
            "knn" => Ok(Self::Knn),
            _ => Err(format!("unknown baseline {s:?} (expected average, upu or knn)")),
        }
    }
}

#[derive(Debug, Clone)]
pub enum MethodKind {
    Psl(ModelFile),
    Baseline(Baseline),
}

#[derive(Debug, Clone)]
pub struct Method {
    pub name: String,
    pub kind: MethodKind,
}

impl Method {
    pub fn psl(name: impl Into<String>, model: ModelFile) -> Self {
        Self { name: name.into(), kind: MethodKind::Psl(model) }
    }

    pub fn baseline(b: Baseline) -> Self {
        Self { name: b.name().into(), kind: MethodKind::Baseline(b) }
    }
}

/// Which evidence an ablation withholds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AblatedSource {
    Content(SourceKind),
    /// The page likes (the relational source).
    Likes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ablation {
    pub source: AblatedSource,
    pub fraction: f64,
}

impl FromStr for Ablation {
    type Err = String;
    /// `source:fraction`, e.g. `img:0.4` or `likes:0.2`.
    fn from_str(s: &str) -> Result<Self, String> {
        let (src, frac) = s.split_once(':').ok_or_else(|| format!("ablation {s:?} is not source:fraction"))?;
        let fraction: f64 = frac.parse().map_err(|_| format!("ablation fraction {frac:?} is not a number"))?;
        if !(0.0..=1.0).contains(&fraction) {
            return Err(format!("ablation fraction {fraction} outside [0, 1]"));
        }
        let source = match src {
            "likes" => AblatedSource::Likes,
            other => AblatedSource::Content(other.parse().map_err(|e| format!("{e}"))?),
        };
        Ok(Self { source, fraction })
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            AblatedSource::Likes => write!(f, "likes:{}", self.fraction),
            AblatedSource::Content(s) => write!(f, "{s}:{}", self.fraction),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    /// Adds a `vote` method: the fraction of methods scoring at least the
    /// threshold.
    pub ensemble: bool,
    pub folds: usize,
    pub ablation: Option<Ablation>,
    pub solver: SolverConfig,
    pub seed: u64,
    pub threshold: f64,
    pub knn_k: usize,
    pub pinned: BTreeSet<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            methods: Vec::new(),
            ensemble: false,
            folds: 10,
            ablation: None,
            solver: SolverConfig::default(),
            seed: 0,
            threshold: 0.5,
            knn_k: 5,
            pinned: BTreeSet::new(),
        }
    }
}

/// Solver outcome of one PSL task.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveSummary {
    pub iterations: usize,
    pub converged: bool,
    pub potentials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodResult {
    pub name: String,
    pub report: MetricsReport,
    pub scores: Scores,
    pub solve: Option<SolveSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub test_users: Vec<String>,
    /// Test users whose evidence the ablation withheld.
    pub ablated_users: Vec<String>,
    pub methods: Vec<MethodResult>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub mean: Option<f64>,
    pub stderr: Option<f64>,
    /// Folds contributing a value.
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = (n > 1).then(|| {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        });
        Self { mean: Some(mean), stderr, n }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub method_names: Vec<String>,
    pub folds: Vec<FoldResult>,
}

/// The four reported metrics, in column order.
pub const METRICS: [&str; 4] = ["accuracy", "auc", "pr_pos", "pr_neg"];

fn metric(m: &Metrics, i: usize) -> Option<f64> {
    [Some(m.accuracy), m.auc, m.pr_pos, m.pr_neg][i]
}

/// Mean over the characteristics that have a value.
fn characteristic_mean(report: &MetricsReport, i: usize) -> Option<f64> {
    let v: Vec<f64> = report.per_characteristic.values().filter_map(|m| metric(m, i)).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl ExperimentReport {
    fn method_index(&self, method: &str) -> Option<usize> {
        self.method_names.iter().position(|m| m == method)
    }

    /// Fold summary of one metric (by name) for one characteristic, or of
    /// the per-fold mean over characteristics when `characteristic` is
    /// `None`.
    pub fn summary(&self, method: &str, characteristic: Option<Characteristic>, metric_name: &str) -> Summary {
        Summary::of(&self.fold_values(method, characteristic, metric_name))
    }

    /// The per-fold values behind [`ExperimentReport::summary`]; folds
    /// without a value are skipped.
    pub fn fold_values(&self, method: &str, characteristic: Option<Characteristic>, metric_name: &str) -> Vec<f64> {
        let (Some(k), Some(i)) = (self.method_index(method), METRICS.iter().position(|m| *m == metric_name)) else {
            return Vec::new();
        };
        self.folds
            .iter()
            .filter_map(|f| {
                let r = &f.methods[k].report;
                match characteristic {
                    Some(c) => r.per_characteristic.get(&c).and_then(|m| metric(m, i)),
                    None => characteristic_mean(r, i),
                }
            })
            .collect()
    }

    /// Mean AUC over folds and characteristics.
    pub fn mean_auc(&self, method: &str) -> Option<f64> {
        self.summary(method, None, "auc").mean
    }

    pub fn all_converged(&self) -> bool {
        self.folds.iter().flat_map(|f| &f.methods).all(|m| m.solve.is_none_or(|s| s.converged))
    }

    /// Per-fold rows followed by `mean` and `stderr` rows per method and
    /// characteristic; `all` is the mean over characteristics.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("method\tfold\tcharacteristic\tpositives\tnegatives");
        for m in METRICS {
            out.push('\t');
            out.push_str(m);
        }
        out.push('\n');
        let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"));
        let keys: Vec<Option<Characteristic>> =
            CHARACTERISTICS.into_iter().map(Some).chain(std::iter::once(None)).collect();
        let label = |c: Option<Characteristic>| c.map_or("all", |c| c.code());
        for (k, name) in self.method_names.iter().enumerate() {
            for (f, fold) in self.folds.iter().enumerate() {
                let r = &fold.methods[k].report;
                for &c in &keys {
                    let (pos, neg, vals): (usize, usize, Vec<Option<f64>>) = match c {
                        Some(c) => match r.per_characteristic.get(&c) {
                            Some(m) => (m.positives, m.negatives, (0..4).map(|i| metric(m, i)).collect()),
                            None => continue,
                        },
                        None => {
                            let pos = r.per_characteristic.values().map(|m| m.positives).sum();
                            let neg = r.per_characteristic.values().map(|m| m.negatives).sum();
                            (pos, neg, (0..4).map(|i| characteristic_mean(r, i)).collect())
                        }
                    };
                    let _ = write!(out, "{name}\t{f}\t{}\t{pos}\t{neg}", label(c));
                    for v in vals {
                        let _ = write!(out, "\t{}", fmt(v));
                    }
                    out.push('\n');
                }
            }
            for &c in &keys {
                let sums: Vec<Summary> = METRICS.iter().map(|m| self.summary(name, c, m)).collect();
                let (pos, neg) = self.folds.iter().fold((0, 0), |(p, n), f| {
                    let r = &f.methods[k].report;
                    let ms: Vec<&Metrics> = match c {
                        Some(c) => r.per_characteristic.get(&c).into_iter().collect(),
                        None => r.per_characteristic.values().collect(),
                    };
                    (p + ms.iter().map(|m| m.positives).sum::<usize>(), n + ms.iter().map(|m| m.negatives).sum::<usize>())
                });
                let _ = write!(out, "{name}\tmean\t{}\t{pos}\t{neg}", label(c));
                for s in &sums {
                    let _ = write!(out, "\t{}", fmt(s.mean));
                }
                out.push('\n');
                let _ = write!(out, "{name}\tstderr\t{}\t-\t-", label(c));
                for s in &sums {
                    let _ = write!(out, "\t{}", fmt(s.stderr));
                }
                out.push('\n');
            }
        }
        out
    }

    /// Mean ± standard error per method and metric, averaged over
    /// characteristics.
    pub fn to_table(&self) -> String {
        let width = self.method_names.iter().map(|m| m.len()).max().unwrap_or(6).max(6);
        let mut out = format!("{:width$}", "method");
        for m in METRICS {
            let _ = write!(out, "  {m:>17}");
        }
        out.push('\n');
        for name in &self.method_names {
            let _ = write!(out, "{name:width$}");
            for m in METRICS {
                let s = self.summary(name, None, m);
                let cell = match (s.mean, s.stderr) {
                    (Some(v), Some(e)) => format!("{v:.3} ± {e:.3}"),
                    (Some(v), None) => format!("{v:.3}"),
                    _ => "NA".into(),
                };
                let _ = write!(out, "  {cell:>17}");
            }
            out.push('\n');
        }
        out
    }
}

/// Test users of each fold; pinned users are never tested.
pub fn assign_folds(users: &BTreeSet<String>, pinned: &BTreeSet<String>, folds: usize, seed: u64) -> Vec<Vec<String>> {
    let mut pool: Vec<&String> = users.iter().filter(|u| !pinned.contains(*u)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(FOLD_STREAM);
    pool.shuffle(&mut rng);
    let mut out = vec![Vec::new(); folds];
    for (i, u) in pool.into_iter().enumerate() {
        out[i % folds].push(u.clone());
    }
    for f in &mut out {
        f.sort();
    }
    out
}

/// The `round(fraction · |test|)` test users chosen to lose evidence in
/// fold `fold`.
pub fn ablated_users(test: &[String], fraction: f64, seed: u64, fold: usize) -> Vec<String> {
    let mut pool = test.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(ABLATION_STREAM + fold as u64);
    pool.shuffle(&mut rng);
    pool.truncate((fraction * test.len() as f64).round() as usize);
    pool.sort();
    pool
}

fn withhold(ev: &mut ProfileEvidence, source: &AblatedSource, users: &BTreeSet<&str>) {
    match source {
        AblatedSource::Likes => ev.likes.retain(|(u, _), _| !users.contains(u.as_str())),
        AblatedSource::Content(s) => ev.predicts.retain(|(u, _, src), _| src != s || !users.contains(u.as_str())),
    }
}

/// The database restricted to predicates the model declares.
fn restrict(db: EvidenceDb, model: &ModelFile) -> Result<EvidenceDb> {
    if db.observed().iter().all(|(a, _)| model.declaration(&a.predicate).is_some())
        && db.targets().iter().all(|a| model.declaration(&a.predicate).is_some())
    {
        return Ok(db);
    }
    let mut out = EvidenceDb::new();
    for (a, &v) in db.observed() {
        if model.declaration(&a.predicate).is_some() {
            out.observe(a.clone(), v)?;
        }
    }
    for a in db.targets() {
        if model.declaration(&a.predicate).is_some() {
            out.add_target(a.clone())?;
        }
    }
    Ok(out)
}

/// MAP scores of the `Is` targets under `model`.
pub fn psl_scores(
    model: &ModelFile,
    ev: &ProfileEvidence,
    targets: &BTreeSet<(String, Characteristic)>,
    solver: &SolverConfig,
) -> Result<(Scores, SolveSummary)> {
    let (db, _) = evidence_to_db(ev, targets, model)?;
    let db = restrict(db, model)?;
    let program = ground(model, &db)?;
    let result = solve_map(&program, solver)?;
    let mut scores = Scores::new();
    for (u, c) in targets {
        let atom = GroundAtom::new("Is", [u.as_str(), c.code()]);
        // a target no rule touches keeps the solver's starting value
        let v = program.variable_index(&atom).map_or(0.5, |i| result.assignment[i]);
        scores.insert((u.clone(), *c), v);
    }
    let summary =
        SolveSummary { iterations: result.iterations, converged: result.converged, potentials: program.potentials.len() };
    Ok((scores, summary))
}

pub fn baseline_scores(
    b: Baseline,
    ev: &ProfileEvidence,
    gold: &Gold,
    train: &BTreeSet<String>,
    test: &BTreeSet<String>,
    k: usize,
) -> Result<Scores> {
    let likes: BTreeSet<(String, String)> = ev.likes.keys().cloned().collect();
    let mut out = Scores::new();
    for c in CHARACTERISTICS {
        let labels: BTreeMap<String, f64> = train
            .iter()
            .filter_map(|u| gold.get(&(u.clone(), c)).map(|&l| (u.clone(), if l { 1.0 } else { 0.0 })))
            .collect();
        let s = match b {
            Baseline::Average => baseline_average(&labels, test)?,
            Baseline::Upu => baseline_upu(&likes, &labels, test),
            Baseline::Knn => baseline_knn(&likes, &labels, test, k)?,
        };
        out.extend(s.into_iter().map(|(u, v)| ((u, c), v)));
    }
    Ok(out)
}

struct FoldData {
    evidence: ProfileEvidence,
    train: BTreeSet<String>,
    test: BTreeSet<String>,
    targets: BTreeSet<(String, Characteristic)>,
    test_gold: Gold,
    ablated: Vec<String>,
}

fn check_inputs(config: &ExperimentConfig, evidence: &ProfileEvidence, gold: &Gold) -> Result<BTreeSet<String>> {
    if config.folds < 2 {
        return Err(HarnessError::Usage(format!("need at least 2 folds, got {}", config.folds)));
    }
    if config.methods.is_empty() {
        return Err(HarnessError::Usage("no methods to evaluate".into()));
    }
    let users: BTreeSet<String> = gold.keys().map(|(u, _)| u.clone()).collect();
    for u in &users {
        if let Some(c) = CHARACTERISTICS.into_iter().find(|&c| !gold.contains_key(&(u.clone(), c))) {
            return Err(HarnessError::Data(format!("gold labels miss ({u}, {c})")));
        }
    }
    if let Some(u) = evidence.users().into_iter().find(|u| !users.contains(*u)) {
        return Err(HarnessError::Data(format!("user {u} has evidence but no gold labels")));
    }
    if let Some(u) = config.pinned.iter().find(|u| !users.contains(*u)) {
        return Err(HarnessError::Data(format!("pinned user {u} has no gold labels")));
    }
    let testable = users.len() - config.pinned.len();
    if testable < config.folds {
        return Err(HarnessError::Data(format!("{testable} testable users cannot fill {} folds", config.folds)));
    }
    Ok(users)
}

fn fold_data(config: &ExperimentConfig, evidence: &ProfileEvidence, gold: &Gold, users: &BTreeSet<String>, fold: usize, test: &[String]) -> FoldData {
    let test_set: BTreeSet<String> = test.iter().cloned().collect();
    let train: BTreeSet<String> = users.difference(&test_set).cloned().collect();
    let mut ev = evidence.clone();
    ev.known_traits = gold.iter().filter(|((u, _), _)| train.contains(u)).map(|(k, &l)| (k.clone(), l)).collect();
    ev.recompute_averages();
    let ablated = match &config.ablation {
        Some(a) => {
            let chosen = ablated_users(test, a.fraction, config.seed, fold);
            withhold(&mut ev, &a.source, &chosen.iter().map(String::as_str).collect());
            chosen
        }
        None => Vec::new(),
    };
    let targets = test.iter().flat_map(|u| CHARACTERISTICS.map(|c| (u.clone(), c))).collect();
    let test_gold = gold.iter().filter(|((u, _), _)| test_set.contains(u)).map(|(k, &l)| (k.clone(), l)).collect();
    FoldData { evidence: ev, train, test: test_set, targets, test_gold, ablated }
}

fn run_task(config: &ExperimentConfig, gold: &Gold, data: &FoldData, method: &Method) -> Result<(Scores, Option<SolveSummary>)> {
    match &method.kind {
        MethodKind::Psl(model) => {
            let (s, summary) = psl_scores(model, &data.evidence, &data.targets, &config.solver)?;
            Ok((s, Some(summary)))
        }
        MethodKind::Baseline(b) => {
            Ok((baseline_scores(*b, &data.evidence, gold, &data.train, &data.test, config.knn_k)?, None))
        }
    }
}

/// Majority vote: the fraction of member scores at or above `threshold`.
pub fn vote(members: &[&Scores], threshold: f64) -> Scores {
    let mut out = Scores::new();
    let Some(first) = members.first() else { return out };
    for key in first.keys() {
        let votes = members.iter().filter(|s| s.get(key).is_some_and(|&v| v >= threshold)).count();
        out.insert(key.clone(), votes as f64 / members.len() as f64);
    }
    out
}

pub fn run_experiment(config: &ExperimentConfig, evidence: &ProfileEvidence, gold: &Gold) -> Result<ExperimentReport> {
    config.solver.validate()?;
    let users = check_inputs(config, evidence, gold)?;
    let assignment = assign_folds(&users, &config.pinned, config.folds, config.seed);
    let data: Vec<FoldData> =
        assignment.iter().enumerate().map(|(f, test)| fold_data(config, evidence, gold, &users, f, test)).collect();

    let tasks: Vec<(usize, usize)> =
        (0..data.len()).flat_map(|f| (0..config.methods.len()).map(move |m| (f, m))).collect();
    let outputs: Vec<Result<(Scores, Option<SolveSummary>)>> =
        tasks.par_iter().map(|&(f, m)| run_task(config, gold, &data[f], &config.methods[m])).collect();
    let mut outputs = outputs.into_iter();

    let mut method_names: Vec<String> = config.methods.iter().map(|m| m.name.clone()).collect();
    if config.ensemble {
        method_names.push("vote".into());
    }
    let mut folds = Vec::with_capacity(data.len());
    for d in &data {
        let mut methods = Vec::new();
        for m in &config.methods {
            let (scores, solve) = outputs.next().expect("one output per task")?;
            let report = compute_report(&scores, &d.test_gold, config.threshold)?;
            methods.push(MethodResult { name: m.name.clone(), report, scores, solve });
        }
        if config.ensemble {
            let members: Vec<&Scores> = methods.iter().map(|m| &m.scores).collect();
            let scores = vote(&members, config.threshold);
            let report = compute_report(&scores, &d.test_gold, config.threshold)?;
            methods.push(MethodResult { name: "vote".into(), report, scores, solve: None });
        }
        folds.push(FoldResult { test_users: d.test.iter().cloned().collect(), ablated_users: d.ablated.clone(), methods });
    }
    Ok(ExperimentReport { method_names, folds })
}
