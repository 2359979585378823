//! Tab-separated file formats.
//!
//! Blank lines and lines starting with `#` are ignored everywhere. Evidence
//! lines are `predicate<TAB>arg…<TAB>value`, target lines the same without
//! the value, score lines `user<TAB>characteristic<TAB>score` and gold lines
//! `user<TAB>characteristic<TAB>label`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use psl_core::models::{Characteristic, ProfileEvidence, SourceKind};
use psl_core::{render_rule, GroundAtom, GroundProgram, ModelFile};

use crate::{HarnessError, Result};

pub type Scores = BTreeMap<(String, Characteristic), f64>;
pub type Gold = BTreeMap<(String, Characteristic), bool>;

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.into(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| HarnessError::Io { path: path.into(), source })
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_text(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| HarnessError::Io { path: "<stdout>".into(), source })
        }
    }
}

struct Lines {
    path: PathBuf,
    text: String,
}

impl Lines {
    fn open(path: &Path) -> Result<Self> {
        Ok(Self { path: path.into(), text: read_text(path)? })
    }

    /// (1-based line number, fields) for every content line.
    fn records(&self) -> impl Iterator<Item = (usize, Vec<&str>)> {
        self.text.lines().enumerate().filter_map(|(i, line)| {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.trim().is_empty() || line.starts_with('#') {
                None
            } else {
                Some((i + 1, line.split('\t').collect()))
            }
        })
    }

    fn err(&self, line: usize, message: impl Into<String>) -> HarnessError {
        HarnessError::Format { path: self.path.clone(), line, message: message.into() }
    }
}

fn unit_value(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| (0.0..=1.0).contains(v))
}

fn atom(fields: &[&str]) -> Option<GroundAtom> {
    let (pred, args) = fields.split_first()?;
    if pred.is_empty() || args.is_empty() || args.iter().any(|a| a.is_empty()) {
        return None;
    }
    Some(GroundAtom::new(*pred, args.iter().copied()))
}

/// Observed atoms with their values, in file order. A repeated atom is an
/// error.
pub fn read_evidence(path: &Path) -> Result<Vec<(GroundAtom, f64)>> {
    let lines = Lines::open(path)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (n, fields) in lines.records() {
        let (value, head) = fields.split_last().ok_or_else(|| lines.err(n, "empty line"))?;
        let v = unit_value(value).ok_or_else(|| lines.err(n, format!("value {value:?} is not a number in [0, 1]")))?;
        let a = atom(head).ok_or_else(|| lines.err(n, "expected predicate, arguments and value"))?;
        if !seen.insert(a.clone()) {
            return Err(lines.err(n, format!("{a} appears twice")));
        }
        out.push((a, v));
    }
    Ok(out)
}

pub fn read_targets(path: &Path) -> Result<Vec<GroundAtom>> {
    let lines = Lines::open(path)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (n, fields) in lines.records() {
        let a = atom(&fields).ok_or_else(|| lines.err(n, "expected predicate and arguments"))?;
        if seen.insert(a.clone()) {
            out.push(a);
        }
    }
    Ok(out)
}

pub fn format_atoms<'a>(atoms: impl IntoIterator<Item = (&'a GroundAtom, f64)>) -> String {
    let mut out = String::new();
    for (a, v) in atoms {
        out.push_str(&a.predicate);
        for arg in &a.args {
            out.push('\t');
            out.push_str(arg);
        }
        let _ = writeln!(out, "\t{v}");
    }
    out
}

/// Drops likes of pages liked (with a positive value) by fewer than `min`
/// users, together with those pages' `Item` atoms.
pub fn filter_page_likes(atoms: Vec<(GroundAtom, f64)>, min: usize) -> Vec<(GroundAtom, f64)> {
    let mut degree: BTreeMap<String, usize> = BTreeMap::new();
    for (a, v) in &atoms {
        if a.predicate == "Likes" && a.args.len() == 2 && *v > 0.0 {
            *degree.entry(a.args[1].clone()).or_default() += 1;
        }
    }
    let rare = |page: &str| degree.get(page).copied().unwrap_or(0) < min;
    atoms
        .into_iter()
        .filter(|(a, _)| match (a.predicate.as_str(), a.args.len()) {
            ("Likes", 2) => !rare(&a.args[1]),
            ("Item", 1) => !rare(&a.args[0]),
            _ => true,
        })
        .collect()
}

/// [`filter_page_likes`] on profiling evidence.
pub fn filter_profile_likes(ev: &ProfileEvidence, min: usize) -> ProfileEvidence {
    let mut degree: BTreeMap<&str, usize> = BTreeMap::new();
    for (_, p) in ev.likes.keys() {
        *degree.entry(p).or_default() += 1;
    }
    let mut out = ev.clone();
    out.likes.retain(|(_, p), _| degree[p.as_str()] >= min);
    out
}

/// Reads evidence and applies the page-degree filter.
pub fn ingest_evidence(path: &Path, min_page_likes: usize) -> Result<Vec<(GroundAtom, f64)>> {
    Ok(filter_page_likes(read_evidence(path)?, min_page_likes))
}

/// Interprets evidence atoms as profiling evidence. `Predicts`, `Likes` and
/// `Is` (0 or 1) are kept; `User`, `Item` and `Average` are derived data and
/// skipped. Averages are recomputed from the `Is` atoms.
pub fn atoms_to_profile(path: &Path, atoms: &[(GroundAtom, f64)]) -> Result<ProfileEvidence> {
    let bad = |message: String| HarnessError::Data(format!("{}: {message}", path.display()));
    let characteristic = |a: &GroundAtom, s: &str| {
        s.parse::<Characteristic>().map_err(|e| bad(format!("{a}: {e}")))
    };
    let mut ev = ProfileEvidence::new();
    for (a, v) in atoms {
        match (a.predicate.as_str(), a.args.as_slice()) {
            ("Predicts", [u, c, s]) => {
                let source = s.parse::<SourceKind>().map_err(|e| bad(format!("{a}: {e}")))?;
                ev.predicts.insert((u.clone(), characteristic(a, c)?, source), *v);
            }
            ("Likes", [u, p]) => {
                if *v > 0.0 {
                    ev.likes.insert((u.clone(), p.clone()), *v);
                }
            }
            ("Is", [u, c]) => {
                let label = match *v {
                    0.0 => false,
                    1.0 => true,
                    _ => return Err(bad(format!("{a}: known characteristics must be 0 or 1, found {v}"))),
                };
                ev.known_traits.insert((u.clone(), characteristic(a, c)?), label);
            }
            ("User", [_]) | ("Item", [_]) | ("Average", [_]) => {}
            _ => return Err(bad(format!("{a} is not a profiling evidence atom"))),
        }
    }
    ev.recompute_averages();
    Ok(ev)
}

/// `Predicts`, `Likes` and known `Is` atoms of `ev`, sorted.
pub fn profile_to_atoms(ev: &ProfileEvidence) -> Vec<(GroundAtom, f64)> {
    let mut out: Vec<(GroundAtom, f64)> = Vec::new();
    for ((u, c, s), &v) in &ev.predicts {
        out.push((GroundAtom::new("Predicts", [u.as_str(), c.code(), s.code()]), v));
    }
    for ((u, p), &v) in &ev.likes {
        out.push((GroundAtom::new("Likes", [u.as_str(), p.as_str()]), v));
    }
    for ((u, c), &l) in &ev.known_traits {
        out.push((GroundAtom::new("Is", [u.as_str(), c.code()]), if l { 1.0 } else { 0.0 }));
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Scores in either `user, characteristic, score` form or as `Is` atoms
/// (the output of `infer`); other atoms in the second form are skipped.
pub fn read_scores(path: &Path) -> Result<Scores> {
    let lines = Lines::open(path)?;
    let mut out = Scores::new();
    for (n, fields) in lines.records() {
        let (u, c, s) = match fields.as_slice() {
            ["Is", u, c, s] => (*u, *c, *s),
            [p, ..] if fields.len() != 3 && p.chars().next().is_some_and(char::is_uppercase) => continue,
            [u, c, s] => (*u, *c, *s),
            _ => return Err(lines.err(n, "expected user, characteristic and score")),
        };
        let c: Characteristic = c.parse().map_err(|e| lines.err(n, format!("{e}")))?;
        let score: f64 = s.trim().parse().map_err(|_| lines.err(n, format!("score {s:?} is not a number")))?;
        if score.is_nan() {
            return Err(lines.err(n, "score is NaN"));
        }
        if out.insert((u.to_string(), c), score).is_some() {
            return Err(lines.err(n, format!("({u}, {c}) scored twice")));
        }
    }
    Ok(out)
}

pub fn format_scores(scores: &Scores) -> String {
    let mut out = String::new();
    for ((u, c), s) in scores {
        let _ = writeln!(out, "{u}\t{c}\t{s}");
    }
    out
}

pub fn read_gold(path: &Path) -> Result<Gold> {
    let lines = Lines::open(path)?;
    let mut out = Gold::new();
    for (n, fields) in lines.records() {
        let [u, c, l] = fields.as_slice() else {
            return Err(lines.err(n, "expected user, characteristic and label"));
        };
        let c: Characteristic = c.parse().map_err(|e| lines.err(n, format!("{e}")))?;
        let label = match l.trim() {
            "0" => false,
            "1" => true,
            other => return Err(lines.err(n, format!("label {other:?} is not 0 or 1"))),
        };
        if out.insert((u.to_string(), c), label).is_some() {
            return Err(lines.err(n, format!("({u}, {c}) labeled twice")));
        }
    }
    Ok(out)
}

pub fn format_gold(gold: &Gold) -> String {
    let mut out = String::new();
    for ((u, c), l) in gold {
        let _ = writeln!(out, "{u}\t{c}\t{}", u8::from(*l));
    }
    out
}

/// One user id per line.
pub fn read_users(path: &Path) -> Result<BTreeSet<String>> {
    let lines = Lines::open(path)?;
    let mut out = BTreeSet::new();
    for (n, fields) in lines.records() {
        match fields.as_slice() {
            [u] if !u.trim().is_empty() => {
                out.insert(u.trim().to_string());
            }
            _ => return Err(lines.err(n, "expected one user id")),
        }
    }
    Ok(out)
}

/// Per-rule grounding counts: `rule, groundings, potentials, rule text`.
pub fn format_rule_counts(model: &ModelFile, program: &GroundProgram) -> String {
    let mut out = String::from("rule\tgroundings\tpotentials\ttext\n");
    for (i, (rule, c)) in model.rules.iter().zip(&program.rule_counts).enumerate() {
        let _ = writeln!(out, "{i}\t{}\t{}\t{}", c.groundings, c.potentials, render_rule(rule));
    }
    out
}

/// Text dump of a ground program: variables, then potentials and hard
/// constraints as `weight, exponent, constant, coefficients, rule, constants`.
pub fn format_ground_dump(program: &GroundProgram) -> String {
    let mut out = String::from("# psl ground dump v1\n");
    for (i, v) in program.variables.iter().enumerate() {
        let _ = writeln!(out, "variable\t{i}\t{v}");
    }
    let coefs = |c: &[(usize, f64)]| c.iter().map(|(i, a)| format!("{i}:{a}")).collect::<Vec<_>>().join(",");
    let substitution = |s: &[u32]| {
        s.iter().map(|&k| program.constants[k as usize].as_str()).collect::<Vec<_>>().join(",")
    };
    for p in &program.potentials {
        let _ = writeln!(
            out,
            "potential\t{}\t{}\t{}\t{}\t{}\t{}",
            p.weight,
            p.exponent.power(),
            p.constant,
            coefs(&p.coefficients),
            p.provenance.rule,
            substitution(&p.provenance.substitution)
        );
    }
    for h in &program.hard_constraints {
        let _ = writeln!(
            out,
            "hard\t-\t-\t{}\t{}\t{}\t{}",
            h.constant,
            coefs(&h.coefficients),
            h.provenance.rule,
            substitution(&h.provenance.substitution)
        );
    }
    out
}
