//! The `psl` command line.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use psl_core::eval::{compute_report, MetricsReport};
use psl_core::models::{SourceKind, CHARACTERISTICS};
use psl_core::{ground_with, parse_model, solve_map, EvidenceDb, GroundAtom, GroundConfig, ModelFile, SolverConfig};

use crate::experiment::{run_experiment, Ablation, Baseline, ExperimentConfig, ExperimentReport, Method};
use crate::synth::{generate_synthetic, SynthConfig};
use crate::tsv::{self, Gold};
use crate::{exit, HarnessError, Result};

#[derive(Debug, Parser)]
#[command(name = "psl", version, about = "Probabilistic soft logic inference and user-profiling experiments")]
pub struct Cli {
    /// Worker threads; 0 uses every core. Output does not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ground a model against evidence and report per-rule counts.
    Ground(GroundArgs),
    /// Ground, solve MAP inference and write the target values.
    Infer(InferArgs),
    /// Score predictions against gold labels.
    Eval(EvalArgs),
    /// Generate synthetic profiling data.
    Synth(SynthArgs),
    /// Cross-validate PSL models (and optionally baselines).
    Experiment(ExperimentArgs),
    /// Cross-validate the relational baselines only.
    Baselines(BaselinesArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SolverKind {
    Admm,
    Gradient,
    Grid,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value = "admm")]
    pub solver: SolverKind,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long = "max-iter")]
    pub max_iter: Option<usize>,
    #[arg(long = "eps-abs")]
    pub eps_abs: Option<f64>,
    #[arg(long = "eps-rel")]
    pub eps_rel: Option<f64>,
    /// Lattice spacing of the grid solver.
    #[arg(long = "grid-step")]
    pub grid_step: Option<f64>,
    /// Residual-balancing ρ updates for ADMM.
    #[arg(long = "adaptive-rho")]
    pub adaptive_rho: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SolverArgs {
    pub fn config(&self) -> SolverConfig {
        let d = SolverConfig::default();
        SolverConfig {
            method: match self.solver {
                SolverKind::Admm => psl_core::Method::Admm,
                SolverKind::Gradient => psl_core::Method::ProjectedGradient,
                SolverKind::Grid => psl_core::Method::GridOracle,
            },
            rho: self.rho.unwrap_or(d.rho),
            max_iterations: self.max_iter.unwrap_or(d.max_iterations),
            eps_abs: self.eps_abs.unwrap_or(d.eps_abs),
            eps_rel: self.eps_rel.unwrap_or(d.eps_rel),
            grid_step: self.grid_step.unwrap_or(d.grid_step),
            seed: self.seed,
            adaptive_rho: self.adaptive_rho,
        }
    }
}

#[derive(Debug, Args)]
pub struct ProgramArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub evidence: PathBuf,
    #[arg(long)]
    pub targets: PathBuf,
    /// Drop likes of pages with fewer likers.
    #[arg(long = "min-page-likes", default_value_t = 3)]
    pub min_page_likes: usize,
    /// Stop grounding after this many groundings.
    #[arg(long = "max-groundings")]
    pub max_groundings: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GroundArgs {
    #[command(flatten)]
    pub program: ProgramArgs,
    /// Per-rule counts; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the ground program as a text dump.
    #[arg(long = "dump-ground")]
    pub dump_ground: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub program: ProgramArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Target values as evidence lines; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Scores (`user, characteristic, score`) or `Is` atoms from `infer`.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print a human-readable table to stdout as well.
    #[arg(long)]
    pub table: bool,
}

#[derive(Debug, Args)]
pub struct SynthOptions {
    #[arg(long, default_value_t = 500)]
    pub users: usize,
    #[arg(long, default_value_t = 2000)]
    pub pages: usize,
    #[arg(long = "likes-per-user", default_value_t = 40)]
    pub likes_per_user: usize,
    /// Flip probability per content source, `source=p`; repeatable.
    #[arg(long = "noise", value_parser = parse_noise, default_values = ["txt=0.35", "img=0.35"])]
    pub noise: Vec<(SourceKind, f64)>,
    /// Strength tying page choice to traits, in [0, 1].
    #[arg(long, default_value_t = 0.4)]
    pub affinity: f64,
}

fn parse_noise(s: &str) -> std::result::Result<(SourceKind, f64), String> {
    let (src, p) = s.split_once('=').ok_or_else(|| format!("{s:?} is not source=p"))?;
    let source = src.parse::<SourceKind>().map_err(|e| e.to_string())?;
    let p: f64 = p.parse().map_err(|_| format!("{p:?} is not a number"))?;
    Ok((source, p))
}

impl SynthOptions {
    pub fn config(&self, seed: u64) -> Result<SynthConfig> {
        let mut noise = BTreeMap::new();
        for (s, p) in &self.noise {
            if noise.insert(s.clone(), *p).is_some() {
                return Err(HarnessError::Usage(format!("noise for {s} given twice")));
            }
        }
        Ok(SynthConfig {
            n_users: self.users,
            n_pages: self.pages,
            likes_per_user: self.likes_per_user,
            source_noise: noise,
            trait_page_affinity: self.affinity,
            seed,
        })
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub options: SynthOptions,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Receives `evidence.tsv` and `gold.tsv`.
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Profiling evidence; synthetic data is generated with --seed when omitted.
    #[arg(long, requires = "gold")]
    pub evidence: Option<PathBuf>,
    #[arg(long, requires = "evidence")]
    pub gold: Option<PathBuf>,
    /// Users that train in every fold, one per line.
    #[arg(long = "pin-train")]
    pub pin_train: Option<PathBuf>,
    #[arg(long = "min-page-likes", default_value_t = 3)]
    pub min_page_likes: usize,
    #[command(flatten)]
    pub synth: SynthOptions,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Withhold one source from a fraction of each test fold, `source:fraction`
    /// (`likes` is the relational source).
    #[arg(long)]
    pub ablation: Option<Ablation>,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Neighbours for the knn baseline.
    #[arg(long = "knn-k", default_value_t = 5)]
    pub knn_k: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub table: bool,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Model file; repeatable. The method is named after the file stem.
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    /// Also run a baseline (average, upu, knn); repeatable.
    #[arg(long = "baseline")]
    pub baselines: Vec<Baseline>,
    /// Add a majority-vote ensemble of all methods.
    #[arg(long)]
    pub ensemble: bool,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub cv: CvArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct BaselinesArgs {
    /// Baselines to run; all three by default.
    #[arg(long = "baseline")]
    pub baselines: Vec<Baseline>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub cv: CvArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Errors go to stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("psl: error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| HarnessError::Usage(format!("cannot start {} threads: {e}", cli.threads)))?;
    pool.install(|| dispatch(cli.command))
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Ground(a) => ground_cmd(&a),
        Command::Infer(a) => infer_cmd(&a),
        Command::Eval(a) => eval_cmd(&a),
        Command::Synth(a) => synth_cmd(&a),
        Command::Experiment(a) => experiment_cmd(&a),
        Command::Baselines(a) => baselines_cmd(&a),
    }
}

pub fn load_model(path: &Path) -> Result<ModelFile> {
    let text = tsv::read_text(path)?;
    parse_model(&text).map_err(|source| HarnessError::Parse { path: path.into(), source })
}

/// Builds the database for `ground` and `infer`. `Represents(p, c)` targets
/// are added for every observed `Item(p)` and characteristic when the model
/// declares `Represents` and the file does not already mention the atom.
fn load_program_inputs(a: &ProgramArgs) -> Result<(ModelFile, EvidenceDb, Vec<GroundAtom>)> {
    let model = load_model(&a.model)?;
    let evidence = tsv::ingest_evidence(&a.evidence, a.min_page_likes)?;
    let targets = tsv::read_targets(&a.targets)?;
    let mut db = EvidenceDb::new();
    for (atom, v) in &evidence {
        db.observe(atom.clone(), *v)?;
    }
    for t in &targets {
        db.add_target(t.clone())?;
    }
    if model.declaration("Represents").is_some_and(|d| d.arity == 2) {
        let items: Vec<String> = evidence
            .iter()
            .filter(|(a, v)| a.predicate == "Item" && a.args.len() == 1 && *v > 0.0)
            .map(|(a, _)| a.args[0].clone())
            .collect();
        for p in items {
            for c in CHARACTERISTICS {
                let atom = GroundAtom::new("Represents", [p.as_str(), c.code()]);
                if !db.observed().contains(&atom) && !db.is_target(&atom) {
                    db.add_target(atom)?;
                }
            }
        }
    }
    Ok((model, db, targets))
}

fn ground_config(a: &ProgramArgs) -> GroundConfig {
    let mut g = GroundConfig::default();
    if let Some(cap) = a.max_groundings {
        g.cap = cap;
    }
    g
}

fn ground_cmd(a: &GroundArgs) -> Result<i32> {
    let (model, db, _) = load_program_inputs(&a.program)?;
    let program = ground_with(&model, &db, &ground_config(&a.program))?;
    if let Some(path) = &a.dump_ground {
        tsv::write_text(path, &tsv::format_ground_dump(&program))?;
    }
    tsv::emit(a.out.as_deref(), &tsv::format_rule_counts(&model, &program))?;
    Ok(exit::OK)
}

fn infer_cmd(a: &InferArgs) -> Result<i32> {
    let config = a.solver.config();
    config.validate()?;
    let (model, db, targets) = load_program_inputs(&a.program)?;
    let program = ground_with(&model, &db, &ground_config(&a.program))?;
    let result = solve_map(&program, &config)?;
    let values: Vec<(&GroundAtom, f64)> = targets
        .iter()
        .map(|t| (t, program.variable_index(t).map_or(psl_core::solver::INITIAL_VALUE, |i| result.assignment[i])))
        .collect();
    tsv::emit(a.out.as_deref(), &tsv::format_atoms(values))?;
    if !result.converged {
        let e = HarnessError::NotConverged {
            iterations: result.iterations,
            primal: result.primal_residual,
            dual: result.dual_residual,
        };
        eprintln!("psl: warning: {e}");
        return Ok(e.exit_code());
    }
    Ok(exit::OK)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |v| format!("{v:.6}"))
}

/// `characteristic, positives, negatives, accuracy, auc, pr_pos, pr_neg`,
/// one row per characteristic and an `all` row of means.
pub fn format_metrics(report: &MetricsReport) -> String {
    let mut out = String::from("characteristic\tpositives\tnegatives\taccuracy\tauc\tpr_pos\tpr_neg\n");
    let mut cols: [Vec<f64>; 4] = Default::default();
    let (mut pos, mut neg) = (0, 0);
    for (c, m) in &report.per_characteristic {
        let vals = [Some(m.accuracy), m.auc, m.pr_pos, m.pr_neg];
        let _ = write!(out, "{c}\t{}\t{}", m.positives, m.negatives);
        for (col, v) in cols.iter_mut().zip(vals) {
            let _ = write!(out, "\t{}", fmt_opt(v));
            col.extend(v);
        }
        out.push('\n');
        pos += m.positives;
        neg += m.negatives;
    }
    let _ = write!(out, "all\t{pos}\t{neg}");
    for col in &cols {
        let mean = (!col.is_empty()).then(|| col.iter().sum::<f64>() / col.len() as f64);
        let _ = write!(out, "\t{}", fmt_opt(mean));
    }
    out.push('\n');
    out
}

fn format_metrics_table(report: &MetricsReport) -> String {
    let mut out = format!("{:<6} {:>5} {:>5} {:>8} {:>8} {:>8} {:>8}\n", "char", "pos", "neg", "acc", "auc", "pr+", "pr-");
    let cell = |v: Option<f64>| v.map_or_else(|| "NA".into(), |v| format!("{v:.3}"));
    for (c, m) in &report.per_characteristic {
        let _ = writeln!(
            out,
            "{:<6} {:>5} {:>5} {:>8} {:>8} {:>8} {:>8}",
            c.code(),
            m.positives,
            m.negatives,
            cell(Some(m.accuracy)),
            cell(m.auc),
            cell(m.pr_pos),
            cell(m.pr_neg)
        );
    }
    out
}

fn check_threshold(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(HarnessError::Usage(format!("threshold {t} outside [0, 1]")))
    }
}

/// Predictions are scored against the gold labels of the predicted
/// (user, characteristic) pairs; a prediction without a gold label is an
/// error.
fn eval_cmd(a: &EvalArgs) -> Result<i32> {
    check_threshold(a.threshold)?;
    let scores = tsv::read_scores(&a.pred)?;
    let gold_all = tsv::read_gold(&a.gold)?;
    let gold: Gold = scores.keys().filter_map(|k| gold_all.get(k).map(|&l| (k.clone(), l))).collect();
    let report = compute_report(&scores, &gold, a.threshold)?;
    write_report(a.out.as_deref(), &format_metrics(&report), a.table.then(|| format_metrics_table(&report)))?;
    Ok(exit::OK)
}

fn write_report(out: Option<&Path>, tsv_text: &str, table: Option<String>) -> Result<()> {
    tsv::emit(out, tsv_text)?;
    if let Some(t) = table {
        tsv::emit(None, &t)?;
    }
    Ok(())
}

fn synth_cmd(a: &SynthArgs) -> Result<i32> {
    let data = generate_synthetic(&a.options.config(a.seed)?)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|source| HarnessError::Io { path: a.out_dir.clone(), source })?;
    let atoms = tsv::profile_to_atoms(&data.evidence);
    tsv::write_text(&a.out_dir.join("evidence.tsv"), &tsv::format_atoms(atoms.iter().map(|(a, v)| (a, *v))))?;
    tsv::write_text(&a.out_dir.join("gold.tsv"), &tsv::format_gold(&data.gold))?;
    Ok(exit::OK)
}

/// Evidence (with the page-degree filter applied), gold labels and pinned
/// users.
fn load_data(d: &DataArgs, seed: u64) -> Result<(psl_core::models::ProfileEvidence, Gold, BTreeSet<String>)> {
    let (atoms, gold, origin) = match (&d.evidence, &d.gold) {
        (Some(e), Some(g)) => (tsv::read_evidence(e)?, tsv::read_gold(g)?, e.clone()),
        _ => {
            let data = generate_synthetic(&d.synth.config(seed)?)?;
            (tsv::profile_to_atoms(&data.evidence), data.gold, PathBuf::from("<synthetic>"))
        }
    };
    let atoms = tsv::filter_page_likes(atoms, d.min_page_likes);
    let mut evidence = tsv::atoms_to_profile(&origin, &atoms)?;
    // labels come from the gold file, fold by fold
    evidence.known_traits.clear();
    evidence.recompute_averages();
    let pinned = match &d.pin_train {
        Some(p) => tsv::read_users(p)?,
        None => BTreeSet::new(),
    };
    Ok((evidence, gold, pinned))
}

fn cv_config(cv: &CvArgs, methods: Vec<Method>, pinned: BTreeSet<String>, seed: u64) -> Result<ExperimentConfig> {
    check_threshold(cv.threshold)?;
    if cv.knn_k == 0 {
        return Err(HarnessError::Usage("--knn-k must be at least 1".into()));
    }
    let mut names = BTreeSet::new();
    if let Some(dup) = methods.iter().find(|m| !names.insert(m.name.clone())) {
        return Err(HarnessError::Usage(format!("method {} given twice", dup.name)));
    }
    Ok(ExperimentConfig {
        methods,
        folds: cv.folds,
        ablation: cv.ablation.clone(),
        seed,
        threshold: cv.threshold,
        knn_k: cv.knn_k,
        pinned,
        ..ExperimentConfig::default()
    })
}

fn finish_experiment(cv: &CvArgs, report: &ExperimentReport) -> Result<i32> {
    write_report(cv.out.as_deref(), &report.to_tsv(), cv.table.then(|| report.to_table()))?;
    if !report.all_converged() {
        eprintln!("psl: warning: the solver did not converge on every fold");
        return Ok(exit::RESOURCE);
    }
    Ok(exit::OK)
}

fn experiment_cmd(a: &ExperimentArgs) -> Result<i32> {
    let solver = a.solver.config();
    solver.validate()?;
    let mut methods = Vec::new();
    for path in &a.models {
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        methods.push(Method::psl(name, load_model(path)?));
    }
    methods.extend(a.baselines.iter().map(|&b| Method::baseline(b)));
    let (evidence, gold, pinned) = load_data(&a.data, a.solver.seed)?;
    let mut config = cv_config(&a.cv, methods, pinned, a.solver.seed)?;
    config.ensemble = a.ensemble;
    config.solver = solver;
    let report = run_experiment(&config, &evidence, &gold)?;
    finish_experiment(&a.cv, &report)
}

fn baselines_cmd(a: &BaselinesArgs) -> Result<i32> {
    let chosen =
        if a.baselines.is_empty() { vec![Baseline::Average, Baseline::Upu, Baseline::Knn] } else { a.baselines.clone() };
    let methods = chosen.into_iter().map(Method::baseline).collect();
    let (evidence, gold, pinned) = load_data(&a.data, a.seed)?;
    let config = cv_config(&a.cv, methods, pinned, a.seed)?;
    let report = run_experiment(&config, &evidence, &gold)?;
    finish_experiment(&a.cv, &report)
}
