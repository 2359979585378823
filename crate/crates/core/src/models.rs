//! The user-profiling models and the evidence they ground against.
//!
//! Every model declares the same seven predicates so that models can be
//! combined rule-by-rule; rules are instantiated once per characteristic.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::ground::{EvidenceDb, GroundError};
use crate::lang::{parse_model, ModelFile};
use crate::logic::GroundAtom;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("unknown characteristic {0:?}")]
    UnknownCharacteristic(String),
    #[error("invalid source name {0:?}")]
    InvalidSource(String),
    #[error("{what} value {value} for {key} outside [0, 1]")]
    OutOfRange { what: &'static str, key: String, value: f64 },
    #[error("like weight for ({0}, {1}) must lie in (0, 1]")]
    BadLike(String, String),
    #[error("Average({characteristic}) is {stored}, the known labels average {expected}")]
    StaleAverage { characteristic: Characteristic, stored: f64, expected: f64 },
    #[error("Is({0}, {1}) is both known and a target")]
    KnownTarget(String, Characteristic),
    #[error("user {0} has no known value or target for {1}")]
    Uncovered(String, Characteristic),
    #[error(transparent)]
    Ground(#[from] GroundError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Characteristic {
    Fem,
    Yng,
    Opn,
    Con,
    Ext,
    Agr,
    Neu,
}

pub const CHARACTERISTICS: [Characteristic; 7] = [
    Characteristic::Fem,
    Characteristic::Yng,
    Characteristic::Opn,
    Characteristic::Con,
    Characteristic::Ext,
    Characteristic::Agr,
    Characteristic::Neu,
];

impl Characteristic {
    pub fn code(self) -> &'static str {
        match self {
            Self::Fem => "fem",
            Self::Yng => "yng",
            Self::Opn => "opn",
            Self::Con => "con",
            Self::Ext => "ext",
            Self::Agr => "agr",
            Self::Neu => "neu",
        }
    }
}

impl fmt::Display for Characteristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Characteristic {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CHARACTERISTICS
            .into_iter()
            .find(|c| c.code() == s)
            .ok_or_else(|| ModelError::UnknownCharacteristic(s.into()))
    }
}

/// A content source. `txt` and `img` are built in; any lowercase identifier
/// works as an additional source.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourceKind(String);

impl SourceKind {
    pub fn txt() -> Self {
        Self("txt".into())
    }

    pub fn img() -> Self {
        Self("img".into())
    }

    pub fn new(code: &str) -> Result<Self, ModelError> {
        let mut chars = code.chars();
        let ok = chars.next().is_some_and(|c| c.is_ascii_lowercase())
            && chars.all(|c| c.is_ascii_alphanumeric() || c == '_');
        if ok {
            Ok(Self(code.into()))
        } else {
            Err(ModelError::InvalidSource(code.into()))
        }
    }

    pub fn code(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for SourceKind {
    type Err = ModelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

/// Everything observed about users and pages.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProfileEvidence {
    pub predicts: BTreeMap<(String, Characteristic, SourceKind), f64>,
    pub likes: BTreeMap<(String, String), f64>,
    pub known_traits: BTreeMap<(String, Characteristic), bool>,
    pub averages: BTreeMap<Characteristic, f64>,
}

impl ProfileEvidence {
    pub fn new() -> Self {
        Self::default()
    }

    /// Mean known label per characteristic; 0.5 when nobody is labeled.
    pub fn known_averages(&self) -> BTreeMap<Characteristic, f64> {
        let mut sums: BTreeMap<Characteristic, (usize, usize)> = BTreeMap::new();
        for (&(_, c), &label) in &self.known_traits {
            let e = sums.entry(c).or_default();
            e.0 += usize::from(label);
            e.1 += 1;
        }
        CHARACTERISTICS
            .into_iter()
            .map(|c| {
                let avg = sums.get(&c).map_or(0.5, |&(pos, n)| pos as f64 / n as f64);
                (c, avg)
            })
            .collect()
    }

    pub fn recompute_averages(&mut self) {
        self.averages = self.known_averages();
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for ((u, c, s), &v) in &self.predicts {
            if !(0.0..=1.0).contains(&v) {
                return Err(ModelError::OutOfRange {
                    what: "Predicts",
                    key: format!("{u}, {c}, {s}"),
                    value: v,
                });
            }
        }
        for ((u, p), &v) in &self.likes {
            if !(v > 0.0 && v <= 1.0) {
                return Err(ModelError::BadLike(u.clone(), p.clone()));
            }
        }
        let expected = self.known_averages();
        for c in CHARACTERISTICS {
            let stored = self.averages.get(&c).copied().unwrap_or(f64::NAN);
            let gap = (stored - expected[&c]).abs();
            if gap.is_nan() || gap > 1e-9 {
                return Err(ModelError::StaleAverage { characteristic: c, stored, expected: expected[&c] });
            }
        }
        Ok(())
    }

    /// Users mentioned anywhere in the evidence.
    pub fn users(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        out.extend(self.predicts.keys().map(|(u, _, _)| u.as_str()));
        out.extend(self.likes.keys().map(|(u, _)| u.as_str()));
        out.extend(self.known_traits.keys().map(|(u, _)| u.as_str()));
        out
    }

    pub fn items(&self) -> BTreeSet<&str> {
        self.likes.keys().map(|(_, p)| p.as_str()).collect()
    }
}

/// Non-fatal observations made while assembling a database.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvidenceWarning {
    /// The target user has neither content predictions nor likes, so only
    /// the prior rules reach it.
    NoEvidence(String),
}

impl fmt::Display for EvidenceWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NoEvidence(u) => write!(f, "user {u} has no predictions or likes; only the prior applies"),
        }
    }
}

/// Builds the grounding database. `Represents` targets are added for every
/// liked page and characteristic when `model` mentions `Represents`.
pub fn evidence_to_db(
    ev: &ProfileEvidence,
    targets: &BTreeSet<(String, Characteristic)>,
    model: &ModelFile,
) -> Result<(EvidenceDb, Vec<EvidenceWarning>), ModelError> {
    ev.validate()?;
    let mut db = EvidenceDb::new();
    let mut warnings = Vec::new();

    let mut users: BTreeSet<&str> = ev.users();
    users.extend(targets.iter().map(|(u, _)| u.as_str()));
    for (u, c) in targets {
        if ev.known_traits.contains_key(&(u.clone(), *c)) {
            return Err(ModelError::KnownTarget(u.clone(), *c));
        }
    }
    for &u in &users {
        for c in CHARACTERISTICS {
            let key = (u.to_string(), c);
            if !ev.known_traits.contains_key(&key) && !targets.contains(&key) {
                return Err(ModelError::Uncovered(u.into(), c));
            }
        }
        db.observe(GroundAtom::new("User", [u]), 1.0)?;
    }
    let items = ev.items();
    for &p in &items {
        db.observe(GroundAtom::new("Item", [p]), 1.0)?;
    }
    for ((u, c, s), &v) in &ev.predicts {
        db.observe(GroundAtom::new("Predicts", [u.as_str(), c.code(), s.code()]), v)?;
    }
    for ((u, p), &v) in &ev.likes {
        db.observe(GroundAtom::new("Likes", [u.as_str(), p.as_str()]), v)?;
    }
    for ((u, c), &label) in &ev.known_traits {
        db.observe(GroundAtom::new("Is", [u.as_str(), c.code()]), if label { 1.0 } else { 0.0 })?;
    }
    for c in CHARACTERISTICS {
        db.observe(GroundAtom::new("Average", [c.code()]), ev.averages[&c])?;
    }

    let with_content: BTreeSet<&str> = ev
        .predicts
        .keys()
        .map(|(u, _, _)| u.as_str())
        .chain(ev.likes.keys().map(|(u, _)| u.as_str()))
        .collect();
    let mut warned = BTreeSet::new();
    for (u, c) in targets {
        db.add_target(GroundAtom::new("Is", [u.as_str(), c.code()]))?;
        if !with_content.contains(u.as_str()) && warned.insert(u.as_str()) {
            warnings.push(EvidenceWarning::NoEvidence(u.clone()));
        }
    }
    if model.uses_predicate("Represents") {
        for &p in &items {
            for c in CHARACTERISTICS {
                db.add_target(GroundAtom::new("Represents", [p, c.code()]))?;
            }
        }
    }
    Ok((db, warnings))
}

const DECLARATIONS: &str = "\
predicate Is/2 : open
predicate Represents/2 : open
predicate Predicts/3 : closed
predicate Likes/2 : closed
predicate Average/1 : closed
predicate User/1 : closed
predicate Item/1 : closed
";

fn prior_rules(c: &str) -> [String; 2] {
    [
        format!("1 : Average({c}) & User(U) -> Is(U, {c})"),
        format!("1 : Is(U, {c}) & User(U) -> Average({c})"),
    ]
}

fn source_rules(c: &str, s: &str) -> [String; 2] {
    [
        format!("1 : Predicts(U, {c}, {s}) -> Is(U, {c})"),
        format!("1 : Is(U, {c}) -> Predicts(U, {c}, {s})"),
    ]
}

fn co_like_rules(c: &str) -> [String; 2] {
    [
        format!("1 : Is(U, {c}) & Likes(U, P) & Likes(V, P) -> Is(V, {c})"),
        format!("1 : !Is(U, {c}) & Likes(U, P) & Likes(V, P) -> !Is(V, {c})"),
    ]
}

fn latent_rules(c: &str) -> [String; 6] {
    [
        format!("1 : Is(U, {c}) & Likes(U, P) -> Represents(P, {c})"),
        format!("1 : !Is(U, {c}) & Likes(U, P) -> !Represents(P, {c})"),
        format!("1 : Represents(P, {c}) & Likes(U, P) -> Is(U, {c})"),
        format!("1 : !Represents(P, {c}) & Likes(U, P) -> !Is(U, {c})"),
        format!("1 : Average({c}) & Item(P) -> Represents(P, {c})"),
        format!("1 : Represents(P, {c}) & Item(P) -> Average({c})"),
    ]
}

/// Renders a template: the shared declarations, then one block of rules per
/// characteristic.
fn template(title: &str, rules: impl Fn(&str) -> Vec<String>) -> String {
    let mut out = format!("# {title}\n\n{DECLARATIONS}");
    for c in CHARACTERISTICS {
        out.push_str(&format!("\n# {c}\n"));
        for r in rules(c.code()) {
            out.push_str(&r);
            out.push('\n');
        }
    }
    out
}

pub fn prior_template() -> String {
    template("PSL-PRIOR: every user starts at the characteristic's average", |c| {
        prior_rules(c).to_vec()
    })
}

pub fn source_template(source: &SourceKind) -> String {
    let s = source.code();
    template(&format!("PSL-{}: external {s} predictions", s.to_uppercase()), |c| {
        source_rules(c, s).to_vec()
    })
}

pub fn direct_template() -> String {
    template("PSL-DIRECT: users who like the same page share characteristics", |c| {
        let mut r = co_like_rules(c).to_vec();
        r.extend(prior_rules(c));
        r
    })
}

pub fn latent_template() -> String {
    template("PSL-LATENT: pages carry latent characteristics", |c| {
        let mut r = latent_rules(c).to_vec();
        r.extend(prior_rules(c));
        r
    })
}

fn parse_builtin(text: &str) -> ModelFile {
    parse_model(text).expect("built-in templates are valid")
}

pub fn build_prior_model() -> ModelFile {
    parse_builtin(&prior_template())
}

pub fn build_source_model(source: &SourceKind) -> ModelFile {
    parse_builtin(&source_template(source))
}

pub fn build_direct_model() -> ModelFile {
    parse_builtin(&direct_template())
}

pub fn build_latent_model() -> ModelFile {
    parse_builtin(&latent_template())
}

/// Rule counts of a combined model, before and after merging rules shared
/// between its constituents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CombinedCounts {
    pub before_dedup: usize,
    pub after_dedup: usize,
}

fn constituents(sources: &BTreeSet<SourceKind>) -> Vec<ModelFile> {
    let mut parts = alloc::vec![build_latent_model()];
    parts.extend(sources.iter().map(build_source_model));
    parts.push(build_prior_model());
    parts
}

/// PSL-PROFILE: the latent model, one source model per entry of `sources`,
/// and the prior model, with repeated rules kept once. Each characteristic
/// block lists latent rules first, so an empty `sources` yields exactly
/// [`build_latent_model`].
pub fn build_profile_model(sources: &BTreeSet<SourceKind>) -> ModelFile {
    parse_builtin(&profile_template(sources))
}

pub fn profile_rule_counts(sources: &BTreeSet<SourceKind>) -> CombinedCounts {
    combine(&constituents(sources)).1
}

/// Concatenates models, dropping rules already present. All parts must use
/// compatible declarations.
pub fn combine(parts: &[ModelFile]) -> (ModelFile, CombinedCounts) {
    let mut out = ModelFile::new();
    let mut before = 0;
    for part in parts {
        for d in &part.declarations {
            if out.declaration(&d.symbol).is_none() {
                out.declare(d.clone()).expect("new declaration");
            }
        }
        for rule in &part.rules {
            before += 1;
            if !out.rules.contains(rule) {
                out.add_rule(rule.clone()).expect("declared predicates");
            }
        }
    }
    let after = out.rules.len();
    (out, CombinedCounts { before_dedup: before, after_dedup: after })
}

pub fn profile_template(sources: &BTreeSet<SourceKind>) -> String {
    let names: Vec<&str> = sources.iter().map(|s| s.code()).collect();
    let title = if names.is_empty() {
        String::from("PSL-PROFILE: latent model and prior")
    } else {
        format!("PSL-PROFILE: latent model, {} predictions and prior", names.join(" and "))
    };
    template(&title, |c| {
        let mut r = latent_rules(c).to_vec();
        r.extend(prior_rules(c));
        for s in sources {
            r.extend(source_rules(c, s.code()));
        }
        r
    })
}

/// Homophily over an explicit friendship relation; shipped as an example
/// only.
pub fn homophily_example_template() -> String {
    let mut out = String::from(
        "# Homophily example: friends tend to share characteristics.\n\
         # Not part of the evaluated models; ground it with a Friend/2 relation.\n\n",
    );
    out.push_str(DECLARATIONS);
    out.push_str("predicate Friend/2 : closed\n");
    for c in CHARACTERISTICS {
        out.push_str(&format!("\n# {c}\n"));
        out.push_str(&format!("1 : Is(U, {c}) & Friend(U, V) -> Is(V, {c})\n"));
        for r in prior_rules(c.code()) {
            out.push_str(&r);
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ground::ground;
    use crate::logic::Term;
    use crate::render_model;
    use crate::solver::{solve_map, Method, SolverConfig};
    use alloc::string::ToString;

    fn sources(list: &[&str]) -> BTreeSet<SourceKind> {
        list.iter().map(|s| SourceKind::new(s).unwrap()).collect()
    }

    #[test]
    fn rule_counts() {
        assert_eq!(build_prior_model().rules.len(), 14);
        assert_eq!(build_source_model(&SourceKind::txt()).rules.len(), 14);
        assert_eq!(build_source_model(&SourceKind::img()).rules.len(), 14);
        assert_eq!(build_direct_model().rules.len(), 28);
        assert_eq!(build_latent_model().rules.len(), 56);
        let both = sources(&["img", "txt"]);
        assert_eq!(build_profile_model(&both).rules.len(), 84);
        assert_eq!(
            profile_rule_counts(&both),
            CombinedCounts { before_dedup: 98, after_dedup: 84 }
        );
    }

    #[test]
    fn source_models_mention_their_constant() {
        let txt = render_model(&build_source_model(&SourceKind::txt()));
        assert!(txt.contains("Predicts(U, ext, txt) -> Is(U, ext)"), "{txt}");
        assert!(txt.contains("Is(U, ext) -> Predicts(U, ext, txt)"));
        let img = render_model(&build_source_model(&SourceKind::img()));
        assert!(img.contains("Predicts(U, fem, img) -> Is(U, fem)"));
        assert!(img.contains("Is(U, fem) -> Predicts(U, fem, img)"));
        let audio = build_source_model(&SourceKind::new("audio").unwrap());
        assert_eq!(audio.rules[0].body[0].args[2], Term::constant("audio"));
        assert!(SourceKind::new("Bad source").is_err());
    }

    #[test]
    fn profile_composition() {
        assert_eq!(build_profile_model(&BTreeSet::new()), build_latent_model());
        let txt = build_profile_model(&sources(&["txt"]));
        assert_eq!(txt.rules.len(), 70);
        let both = build_profile_model(&sources(&["txt", "img"]));
        for part in [build_latent_model(), build_source_model(&SourceKind::txt()), build_source_model(&SourceKind::img())] {
            assert!(part.rules.iter().all(|r| both.rules.contains(r)));
        }
    }

    #[test]
    fn profile_is_the_deduplicated_union() {
        for list in [&[][..], &["txt"], &["img", "txt"]] {
            let s = sources(list);
            let (union, _) = combine(&constituents(&s));
            let built = build_profile_model(&s);
            assert_eq!(union.rules.len(), built.rules.len());
            assert!(union.rules.iter().all(|r| built.rules.contains(r)));
        }
        assert!(parse_model(&homophily_example_template()).is_ok());
    }

    fn one_user(avg_fem: f64) -> ProfileEvidence {
        let mut ev = ProfileEvidence::new();
        ev.recompute_averages();
        ev.averages.insert(Characteristic::Fem, avg_fem);
        ev
    }

    fn solve(model: &ModelFile, ev: &ProfileEvidence, targets: &BTreeSet<(String, Characteristic)>) -> BTreeMap<String, f64> {
        let (db, _) = evidence_to_db_unchecked(ev, targets, model);
        let program = ground(model, &db).unwrap();
        let r = solve_map(&program, &SolverConfig { method: Method::Admm, ..SolverConfig::default() }).unwrap();
        program.variables.iter().zip(&r.assignment).map(|(a, &v)| (a.to_string(), v)).collect()
    }

    /// `evidence_to_db` without the stored-average check, for hand-set averages.
    fn evidence_to_db_unchecked(
        ev: &ProfileEvidence,
        targets: &BTreeSet<(String, Characteristic)>,
        model: &ModelFile,
    ) -> (EvidenceDb, Vec<EvidenceWarning>) {
        let mut fixed = ev.clone();
        let averages = core::mem::take(&mut fixed.averages);
        fixed.recompute_averages();
        let (mut db, w) = evidence_to_db(&fixed, targets, model).unwrap();
        for (c, v) in averages {
            db.observe(GroundAtom::new("Average", [c.code()]), v).unwrap();
        }
        (db, w)
    }

    fn all_targets(users: &[&str]) -> BTreeSet<(String, Characteristic)> {
        users
            .iter()
            .flat_map(|u| CHARACTERISTICS.map(|c| (u.to_string(), c)))
            .collect()
    }

    #[test]
    fn prior_fixed_point() {
        let values = solve(&build_prior_model(), &one_user(0.61), &all_targets(&["u"]));
        assert!((values["Is(u, fem)"] - 0.61).abs() < 1e-3, "{values:?}");
        assert!((values["Is(u, yng)"] - 0.5).abs() < 1e-3);
        let values = solve(&build_prior_model(), &one_user(0.0), &all_targets(&["u"]));
        assert!(values["Is(u, fem)"].abs() < 1e-3);
    }

    #[test]
    fn item_prior_in_isolation() {
        let mut ev = one_user(0.61);
        ev.likes.insert(("u".into(), "123".into()), 1.0);
        // item prior pair plus the user prior, no like rules
        let model = parse_model(&template("item prior", |c| {
            let mut r = latent_rules(c)[4..].to_vec();
            r.extend(prior_rules(c));
            r
        }))
        .unwrap();
        let values = solve(&model, &ev, &all_targets(&["u"]));
        assert!((values["Represents(123, fem)"] - 0.61).abs() < 1e-3, "{values:?}");
    }

    #[test]
    fn direct_pull_and_isolation() {
        let mut ev = ProfileEvidence::new();
        ev.known_traits.extend(CHARACTERISTICS.map(|c| (("a".into(), c), c == Characteristic::Fem)));
        ev.likes.insert(("a".into(), "p".into()), 1.0);
        ev.likes.insert(("b".into(), "p".into()), 1.0);
        ev.recompute_averages();
        let values = solve(&build_direct_model(), &one_user_averages(ev.clone(), 0.5), &all_targets(&["b"]));
        assert!(values["Is(b, fem)"] > 0.5 + 1e-3, "{values:?}");

        ev.likes.remove(&("a".into(), "p".into()));
        let values = solve(&build_direct_model(), &one_user_averages(ev, 0.5), &all_targets(&["b"]));
        assert!((values["Is(b, fem)"] - 0.5).abs() < 1e-3, "{values:?}");
    }

    fn one_user_averages(mut ev: ProfileEvidence, v: f64) -> ProfileEvidence {
        for c in CHARACTERISTICS {
            ev.averages.insert(c, v);
        }
        ev
    }

    #[test]
    fn latent_symmetric_page() {
        let mut ev = ProfileEvidence::new();
        for (u, label) in [("a", true), ("b", false)] {
            ev.known_traits.extend(CHARACTERISTICS.map(|c| ((u.to_string(), c), label)));
            ev.likes.insert((u.into(), "p".into()), 1.0);
        }
        ev.recompute_averages();
        let values = solve(&build_latent_model(), &ev, &BTreeSet::new());
        assert!((values["Represents(p, fem)"] - 0.5).abs() < 1e-3, "{values:?}");
    }

    #[test]
    fn txt_pull_is_monotone() {
        let model = build_source_model(&SourceKind::txt());
        let mut last = -1.0;
        for k in 0..=10 {
            let mut ev = ProfileEvidence::new();
            for c in CHARACTERISTICS {
                ev.predicts.insert(("u".into(), c, SourceKind::txt()), k as f64 / 10.0);
            }
            ev.recompute_averages();
            let v = solve(&model, &ev, &all_targets(&["u"]))["Is(u, fem)"];
            assert!(v >= last - 1e-6, "score {k}: {v} < {last}");
            last = v;
        }
    }

    #[test]
    fn db_contents() {
        let mut ev = ProfileEvidence::new();
        ev.likes.insert(("u".into(), "p1".into()), 1.0);
        ev.likes.insert(("u".into(), "p2".into()), 1.0);
        ev.recompute_averages();
        let (db, warnings) = evidence_to_db(&ev, &all_targets(&["u"]), &build_latent_model()).unwrap();
        assert_eq!(db.targets().len(), 7 + 14);
        assert!(warnings.is_empty());
        let averages = db.observed().iter().filter(|(a, _)| a.predicate == "Average").count();
        assert_eq!(averages, 7);

        let mut ev = ProfileEvidence::new();
        ev.predicts.insert(("u".into(), Characteristic::Fem, SourceKind::txt()), 0.4);
        ev.recompute_averages();
        let (db, _) = evidence_to_db(&ev, &all_targets(&["u"]), &build_prior_model()).unwrap();
        assert!(db.observed().iter().all(|(a, _)| a.predicate != "Likes"));
        assert_eq!(db.targets().len(), 7);

        let (_, warnings) = evidence_to_db(&ProfileEvidence { averages: ev.averages.clone(), ..ProfileEvidence::new() }, &all_targets(&["ghost"]), &build_prior_model()).unwrap();
        assert_eq!(warnings, alloc::vec![EvidenceWarning::NoEvidence("ghost".into())]);
    }

    #[test]
    fn db_errors() {
        let mut ev = ProfileEvidence::new();
        ev.known_traits.insert(("u".into(), Characteristic::Fem), true);
        assert!(matches!(
            evidence_to_db(&ev, &BTreeSet::new(), &build_prior_model()),
            Err(ModelError::StaleAverage { .. })
        ));
        ev.recompute_averages();
        assert_eq!(ev.averages[&Characteristic::Fem], 1.0);
        assert_eq!(ev.averages[&Characteristic::Neu], 0.5);
        assert_eq!(
            evidence_to_db(&ev, &BTreeSet::new(), &build_prior_model()).unwrap_err(),
            ModelError::Uncovered("u".into(), Characteristic::Yng)
        );
        let mut targets = all_targets(&["u"]);
        assert_eq!(
            evidence_to_db(&ev, &targets, &build_prior_model()).unwrap_err(),
            ModelError::KnownTarget("u".into(), Characteristic::Fem)
        );
        targets.remove(&("u".into(), Characteristic::Fem));
        assert!(evidence_to_db(&ev, &targets, &build_prior_model()).is_ok());
        assert_eq!("agr".parse::<Characteristic>().unwrap(), Characteristic::Agr);
        assert!("age".parse::<Characteristic>().is_err());
    }
}
