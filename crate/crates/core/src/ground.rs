//! Grounding: joins rules against evidence and compiles every ground rule
//! into a hinge-loss potential over the target variables.
//!
//! A substitution is a grounding when every positive body literal over a
//! closed predicate hits an observed atom with a nonzero value, and every
//! literal over an open predicate (either polarity) hits a known atom, that
//! is, one that is observed or a target. Negated closed literals never drive
//! the join; unlisted closed atoms read as 0. The join is driven by the
//! indexed evidence, so the constant cross product is never enumerated.
//!
//! Two kinds of groundings are dropped:
//! * ground rules whose head literal also occurs in the body are satisfied
//!   under every interpretation and are not counted at all;
//! * groundings whose hinge is 0 everywhere on the unit box once evidence is
//!   folded in are counted as groundings but produce no potential.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::lang::ModelFile;
use crate::logic::{
    Closure, Exponent, GroundAtom, GroundLiteral, GroundRule, Interpretation, LogicError, Rule,
    Term, Weight,
};

/// Default limit on groundings per program.
pub const DEFAULT_GROUNDING_CAP: usize = 50_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GroundError {
    #[error("predicate {0} occurs in the evidence but is not declared in the model")]
    UndeclaredPredicate(String),
    #[error("atom {atom} does not match the declared arity {expected}")]
    ArityMismatch { atom: GroundAtom, expected: usize },
    #[error("target {0} belongs to a closed predicate")]
    TargetOnClosedPredicate(GroundAtom),
    #[error("atom {0} is both observed and a target")]
    ObservedTarget(GroundAtom),
    #[error("open atom {0} is neither observed nor a target")]
    UnknownOpenAtom(GroundAtom),
    #[error("rule {rule}: variable {variable} only occurs in negated closed literals")]
    UnsafeRule { rule: usize, variable: String },
    #[error("grounding exceeded the cap of {cap} groundings")]
    CapExceeded { cap: usize },
    #[error("unknown rule id {0}")]
    UnknownRule(usize),
    #[error(transparent)]
    Logic(#[from] LogicError),
}

/// Observed atoms (with values) and target atoms (unknown values).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvidenceDb {
    observed: Interpretation,
    targets: BTreeSet<GroundAtom>,
}

impl EvidenceDb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, atom: GroundAtom, value: f64) -> Result<(), GroundError> {
        if self.targets.contains(&atom) {
            return Err(GroundError::ObservedTarget(atom));
        }
        self.observed.insert(atom, value)?;
        Ok(())
    }

    pub fn add_target(&mut self, atom: GroundAtom) -> Result<(), GroundError> {
        if self.observed.contains(&atom) {
            return Err(GroundError::ObservedTarget(atom));
        }
        self.targets.insert(atom);
        Ok(())
    }

    pub fn observed(&self) -> &Interpretation {
        &self.observed
    }

    pub fn targets(&self) -> &BTreeSet<GroundAtom> {
        &self.targets
    }

    pub fn is_target(&self, atom: &GroundAtom) -> bool {
        self.targets.contains(atom)
    }

    /// Constants seen at `position` of `predicate` across observed and target atoms.
    pub fn domain(&self, predicate: &str, position: usize) -> BTreeSet<&str> {
        self.observed
            .iter()
            .map(|(a, _)| a)
            .chain(self.targets.iter())
            .filter(|a| a.predicate == predicate)
            .filter_map(|a| a.args.get(position).map(String::as_str))
            .collect()
    }
}

/// Where a potential came from: the rule id and the constant bound to each
/// rule variable, in [`Rule::variables`] order. Constants index
/// [`GroundProgram::constants`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Provenance {
    pub rule: usize,
    pub substitution: Vec<u32>,
}

/// `weight * max(constant + sum(coef * y), 0)^p` over target variables `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct HingeLossPotential {
    pub weight: f64,
    /// Sorted by variable index, no zero entries.
    pub coefficients: Vec<(usize, f64)>,
    pub constant: f64,
    pub exponent: Exponent,
    pub provenance: Provenance,
}

impl HingeLossPotential {
    pub fn linear(&self, assignment: &[f64]) -> f64 {
        self.coefficients
            .iter()
            .fold(self.constant, |acc, &(i, c)| acc + c * assignment[i])
    }

    /// Unweighted hinge value `max(l, 0)^p`.
    pub fn hinge(&self, assignment: &[f64]) -> f64 {
        self.exponent.apply(self.linear(assignment).max(0.0))
    }
}

/// Linear inequality `constant + sum(coef * y) <= 0` from a hard rule.
#[derive(Debug, Clone, PartialEq)]
pub struct HardConstraint {
    pub coefficients: Vec<(usize, f64)>,
    pub constant: f64,
    pub provenance: Provenance,
}

impl HardConstraint {
    pub fn linear(&self, assignment: &[f64]) -> f64 {
        self.coefficients
            .iter()
            .fold(self.constant, |acc, &(i, c)| acc + c * assignment[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RuleCounts {
    /// Groundings found by the join, before dropping constant-zero hinges.
    pub groundings: usize,
    /// Potentials (or hard constraints) kept.
    pub potentials: usize,
}

/// All potentials of a model on one evidence database.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundProgram {
    /// Target atoms in canonical order; a variable's index is its position.
    pub variables: Vec<GroundAtom>,
    /// Sorted by provenance.
    pub potentials: Vec<HingeLossPotential>,
    /// Sorted by provenance.
    pub hard_constraints: Vec<HardConstraint>,
    /// Sorted constant table referenced by provenance substitutions.
    pub constants: Vec<String>,
    /// Per rule id.
    pub rule_counts: Vec<RuleCounts>,
}

impl GroundProgram {
    pub fn variable_index(&self, atom: &GroundAtom) -> Option<usize> {
        self.variables.binary_search(atom).ok()
    }

    pub fn is_empty(&self) -> bool {
        self.potentials.is_empty() && self.hard_constraints.is_empty()
    }

    /// Re-instantiates the rule a potential came from.
    pub fn ground_rule(&self, model: &ModelFile, provenance: &Provenance) -> Option<GroundRule> {
        let rule = model.rules.get(provenance.rule)?;
        let vars = rule.variables();
        let lookup = |t: &Term| -> Option<String> {
            match t {
                Term::Const(c) => Some(c.clone()),
                Term::Var(v) => {
                    let slot = vars.iter().position(|x| x == v)?;
                    let id = *provenance.substitution.get(slot)?;
                    self.constants.get(id as usize).cloned()
                }
            }
        };
        let lit = |l: &crate::logic::Literal| -> Option<GroundLiteral> {
            let args = l.args.iter().map(lookup).collect::<Option<Vec<_>>>()?;
            Some(GroundLiteral {
                atom: GroundAtom {
                    predicate: l.predicate.clone(),
                    args,
                },
                negated: l.negated,
            })
        };
        Some(GroundRule {
            weight: rule.weight,
            body: rule.body.iter().map(lit).collect::<Option<Vec<_>>>()?,
            head: lit(&rule.head)?,
            exponent: rule.exponent,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroundConfig {
    /// Maximum number of groundings before failing with [`GroundError::CapExceeded`].
    pub cap: usize,
}

impl Default for GroundConfig {
    fn default() -> Self {
        Self {
            cap: DEFAULT_GROUNDING_CAP,
        }
    }
}

/// Exact per-rule counts.
pub fn count_potentials(program: &GroundProgram, rule_id: usize) -> Result<RuleCounts, GroundError> {
    program
        .rule_counts
        .get(rule_id)
        .copied()
        .ok_or(GroundError::UnknownRule(rule_id))
}

pub fn ground(model: &ModelFile, db: &EvidenceDb) -> Result<GroundProgram, GroundError> {
    ground_with(model, db, &GroundConfig::default())
}

#[derive(Debug, Clone, Copy)]
enum Known {
    Observed(f64),
    Target(usize),
}

struct PredicateStore {
    arity: usize,
    closed: bool,
    /// Row-major argument ids, `arity` per atom.
    args: Vec<u32>,
    state: Vec<Known>,
    /// Per position: constant id to atom ids.
    by_position: Vec<BTreeMap<u32, Vec<u32>>>,
}

impl PredicateStore {
    fn atom_args(&self, atom: u32) -> &[u32] {
        let start = atom as usize * self.arity;
        &self.args[start..start + self.arity]
    }

    fn len(&self) -> usize {
        self.state.len()
    }

    fn find(&self, args: &[u32]) -> Option<u32> {
        let mut best: Option<&Vec<u32>> = None;
        for (pos, a) in args.iter().enumerate() {
            let list = self.by_position[pos].get(a)?;
            if best.is_none_or(|b| list.len() < b.len()) {
                best = Some(list);
            }
        }
        best?.iter().copied().find(|&id| self.atom_args(id) == args)
    }
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Var(usize),
    /// `None` when the constant never occurs in the evidence.
    Const(Option<u32>),
}

struct CompiledLiteral<'m> {
    source: &'m crate::logic::Literal,
    predicate: usize,
    slots: Vec<Slot>,
    negated: bool,
    closed: bool,
}

impl CompiledLiteral<'_> {
    fn drives_join(&self) -> bool {
        !(self.negated && self.closed)
    }
}

struct Tables<'a> {
    constants: Vec<&'a str>,
    ids: BTreeMap<&'a str, u32>,
    predicates: Vec<PredicateStore>,
    predicate_ids: BTreeMap<&'a str, usize>,
}

fn build_tables<'a>(
    model: &'a ModelFile,
    db: &'a EvidenceDb,
) -> Result<(Tables<'a>, Vec<GroundAtom>), GroundError> {
    let mut predicate_ids = BTreeMap::new();
    let mut predicates = Vec::new();
    for (i, d) in model.declarations.iter().enumerate() {
        predicate_ids.insert(d.symbol.as_str(), i);
        predicates.push(PredicateStore {
            arity: d.arity,
            closed: d.closure == Closure::Closed,
            args: Vec::new(),
            state: Vec::new(),
            by_position: (0..d.arity).map(|_| BTreeMap::new()).collect(),
        });
    }

    let mut names: BTreeSet<&str> = BTreeSet::new();
    for atom in db.observed.iter().map(|(a, _)| a).chain(db.targets.iter()) {
        names.extend(atom.args.iter().map(String::as_str));
    }
    for rule in &model.rules {
        for lit in rule.body.iter().chain(core::iter::once(&rule.head)) {
            for t in &lit.args {
                if let Term::Const(c) = t {
                    names.insert(c.as_str());
                }
            }
        }
    }
    let constants: Vec<&str> = names.into_iter().collect();
    let ids: BTreeMap<&str, u32> = constants.iter().enumerate().map(|(i, &c)| (c, i as u32)).collect();

    let mut insert = |atom: &GroundAtom, state: Known| -> Result<(), GroundError> {
        let &p = predicate_ids
            .get(atom.predicate.as_str())
            .ok_or_else(|| GroundError::UndeclaredPredicate(atom.predicate.clone()))?;
        let store = &mut predicates[p];
        if atom.args.len() != store.arity {
            return Err(GroundError::ArityMismatch {
                atom: atom.clone(),
                expected: store.arity,
            });
        }
        if store.closed && matches!(state, Known::Target(_)) {
            return Err(GroundError::TargetOnClosedPredicate(atom.clone()));
        }
        let id = store.state.len() as u32;
        for (pos, a) in atom.args.iter().enumerate() {
            let c = ids[a.as_str()];
            store.args.push(c);
            store.by_position[pos].entry(c).or_default().push(id);
        }
        store.state.push(state);
        Ok(())
    };
    for (atom, &v) in db.observed.iter() {
        insert(atom, Known::Observed(v))?;
    }
    let mut variables = Vec::with_capacity(db.targets.len());
    for atom in db.targets.iter() {
        insert(atom, Known::Target(variables.len()))?;
        variables.push(atom.clone());
    }
    Ok((
        Tables {
            constants,
            ids,
            predicates,
            predicate_ids,
        },
        variables,
    ))
}

struct Linear {
    constant: f64,
    coefficients: Vec<(usize, f64)>,
}

impl Linear {
    fn add_literal(&mut self, state: Known, negated: bool, sign: f64) {
        match state {
            Known::Observed(v) => self.constant += sign * if negated { 1.0 - v } else { v },
            Known::Target(i) => {
                if negated {
                    self.constant += sign;
                    self.coefficients.push((i, -sign));
                } else {
                    self.coefficients.push((i, sign));
                }
            }
        }
    }

    fn finish(mut self) -> Self {
        self.coefficients.sort_by_key(|&(i, _)| i);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(self.coefficients.len());
        for (i, c) in self.coefficients {
            match merged.last_mut() {
                Some((j, acc)) if *j == i => *acc += c,
                _ => merged.push((i, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        self.coefficients = merged;
        self
    }

    /// Maximum of the linear form over the unit box.
    fn box_max(&self) -> f64 {
        self.coefficients
            .iter()
            .fold(self.constant, |acc, &(_, c)| acc + c.max(0.0))
    }
}

struct RuleGrounder<'a, 'm> {
    rule_id: usize,
    rule: &'m Rule,
    tables: &'a Tables<'a>,
    body: Vec<CompiledLiteral<'m>>,
    head: CompiledLiteral<'m>,
    plan: Vec<usize>,
    checks: Vec<usize>,
    binding: Vec<Option<u32>>,
    matched: Vec<Option<u32>>,
    groundings: usize,
    total: &'a mut usize,
    cap: usize,
    potentials: Vec<HingeLossPotential>,
    hard: Vec<HardConstraint>,
}

impl<'a, 'm> RuleGrounder<'a, 'm> {
    fn new(
        rule_id: usize,
        rule: &'m Rule,
        tables: &'a Tables<'a>,
        total: &'a mut usize,
        cap: usize,
    ) -> Result<Self, GroundError> {
        let vars = rule.variables();
        let compile = |lit: &'m crate::logic::Literal| -> CompiledLiteral<'m> {
            let predicate = tables.predicate_ids[lit.predicate.as_str()];
            let slots = lit
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => Slot::Var(vars.iter().position(|x| x == v).expect("variable listed")),
                    Term::Const(c) => Slot::Const(tables.ids.get(c.as_str()).copied()),
                })
                .collect();
            CompiledLiteral {
                source: lit,
                predicate,
                slots,
                negated: lit.negated,
                closed: tables.predicates[predicate].closed,
            }
        };
        let body: Vec<_> = rule.body.iter().map(compile).collect();
        let head = compile(&rule.head);

        let mut bound = alloc::vec![false; vars.len()];
        let mut pending: Vec<usize> = (0..body.len()).filter(|&i| body[i].drives_join()).collect();
        let mut plan = Vec::new();
        while !pending.is_empty() {
            let (k, _) = pending
                .iter()
                .enumerate()
                .map(|(k, &i)| (k, Self::estimate(tables, &body[i], &bound)))
                .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite estimates"))
                .expect("pending is nonempty");
            let i = pending.remove(k);
            for s in &body[i].slots {
                if let Slot::Var(v) = s {
                    bound[*v] = true;
                }
            }
            plan.push(i);
        }
        if let Some(v) = bound.iter().position(|b| !b) {
            return Err(GroundError::UnsafeRule {
                rule: rule_id,
                variable: vars[v].into(),
            });
        }
        let checks = (0..body.len()).filter(|&i| !body[i].drives_join()).collect();
        let nvars = vars.len();
        let nbody = body.len();
        Ok(Self {
            rule_id,
            rule,
            tables,
            body,
            head,
            plan,
            checks,
            binding: alloc::vec![None; nvars],
            matched: alloc::vec![None; nbody],
            groundings: 0,
            total,
            cap,
            potentials: Vec::new(),
            hard: Vec::new(),
        })
    }

    /// Expected candidate count for a literal given which variables are bound.
    /// Closed literals win ties since they usually carry the sparse evidence.
    fn estimate(tables: &Tables<'_>, lit: &CompiledLiteral<'_>, bound: &[bool]) -> (f64, u8) {
        let store = &tables.predicates[lit.predicate];
        let mut est = store.len() as f64;
        for (pos, s) in lit.slots.iter().enumerate() {
            let e = match *s {
                Slot::Const(None) => 0.0,
                Slot::Const(Some(c)) => store.by_position[pos].get(&c).map_or(0.0, |l| l.len() as f64),
                Slot::Var(v) if bound[v] => {
                    let distinct = store.by_position[pos].len().max(1);
                    store.len() as f64 / distinct as f64
                }
                Slot::Var(_) => continue,
            };
            est = est.min(e);
        }
        (est, u8::from(!lit.closed))
    }

    fn slot_value(&self, s: Slot) -> Option<Option<u32>> {
        match s {
            Slot::Var(v) => self.binding[v].map(Some),
            Slot::Const(c) => Some(c),
        }
    }

    fn run(&mut self) -> Result<(), GroundError> {
        self.join(0)
    }

    fn join(&mut self, depth: usize) -> Result<(), GroundError> {
        if depth == self.plan.len() {
            return self.emit();
        }
        let tables: &'a Tables<'a> = self.tables;
        let li = self.plan[depth];
        let lit = &self.body[li];
        let store = &tables.predicates[lit.predicate];
        let slots = lit.slots.clone();
        let positive_closed = lit.closed && !lit.negated;

        // shortest index list among bound positions
        let mut candidates: Option<&[u32]> = None;
        for (pos, &s) in slots.iter().enumerate() {
            match self.slot_value(s) {
                Some(None) => return Ok(()),
                Some(Some(c)) => {
                    let Some(list) = store.by_position[pos].get(&c) else {
                        return Ok(());
                    };
                    if candidates.is_none_or(|l| list.len() < l.len()) {
                        candidates = Some(list);
                    }
                }
                None => {}
            }
        }
        let all: Vec<u32>;
        let candidates = match candidates {
            Some(c) => c,
            None => {
                all = (0..store.len() as u32).collect();
                &all
            }
        };

        for &atom in candidates {
            if positive_closed && !matches!(store.state[atom as usize], Known::Observed(v) if v > 0.0) {
                continue;
            }
            let args = store.atom_args(atom);
            let mut newly = Vec::new();
            let mut ok = true;
            for (pos, s) in slots.iter().enumerate() {
                match *s {
                    Slot::Const(c) => ok &= c == Some(args[pos]),
                    Slot::Var(v) => match self.binding[v] {
                        Some(b) => ok &= b == args[pos],
                        None => {
                            self.binding[v] = Some(args[pos]);
                            newly.push(v);
                        }
                    },
                }
                if !ok {
                    break;
                }
            }
            if ok {
                self.matched[li] = Some(atom);
                self.join(depth + 1)?;
                self.matched[li] = None;
            }
            for v in newly {
                self.binding[v] = None;
            }
        }
        Ok(())
    }

    fn ground_args(&self, lit: &CompiledLiteral<'_>) -> Vec<Option<u32>> {
        lit.slots
            .iter()
            .map(|&s| self.slot_value(s).expect("all variables bound at emit"))
            .collect()
    }

    fn ground_atom(&self, lit: &CompiledLiteral<'_>) -> GroundAtom {
        let args = lit
            .slots
            .iter()
            .zip(&lit.source.args)
            .map(|(&s, t)| match (self.slot_value(s).flatten(), t) {
                (Some(c), _) => String::from(self.tables.constants[c as usize]),
                (None, Term::Const(c)) => c.clone(),
                (None, Term::Var(v)) => v.clone(),
            })
            .collect();
        GroundAtom {
            predicate: lit.source.predicate.clone(),
            args,
        }
    }

    /// Resolves a fully bound literal that was not matched during the join.
    fn resolve(&self, lit: &CompiledLiteral<'_>) -> Result<(Option<u32>, Known), GroundError> {
        let store = &self.tables.predicates[lit.predicate];
        let args = self.ground_args(lit);
        let found = args
            .iter()
            .copied()
            .collect::<Option<Vec<u32>>>()
            .and_then(|a| store.find(&a));
        match found {
            Some(id) => Ok((Some(id), store.state[id as usize])),
            None if store.closed => Ok((None, Known::Observed(0.0))),
            None => Err(GroundError::UnknownOpenAtom(self.ground_atom(lit))),
        }
    }

    fn emit(&mut self) -> Result<(), GroundError> {
        let (head_id, head_state) = self.resolve(&self.head)?;

        // head literal repeated in the body: satisfied by every interpretation
        if let Some(h) = head_id {
            let tautology = self.body.iter().enumerate().any(|(i, b)| {
                b.predicate == self.head.predicate
                    && b.negated == self.head.negated
                    && self.matched[i].map_or_else(
                        || self.ground_args(b) == self.ground_args(&self.head),
                        |m| m == h,
                    )
            });
            if tautology {
                return Ok(());
            }
        }

        self.groundings += 1;
        *self.total += 1;
        if *self.total > self.cap {
            return Err(GroundError::CapExceeded { cap: self.cap });
        }

        let mut linear = Linear {
            constant: -(self.body.len() as f64 - 1.0),
            coefficients: Vec::new(),
        };
        for (i, lit) in self.body.iter().enumerate() {
            let state = match self.matched[i] {
                Some(atom) => self.tables.predicates[lit.predicate].state[atom as usize],
                None => {
                    debug_assert!(self.checks.contains(&i));
                    self.resolve(lit)?.1
                }
            };
            linear.add_literal(state, lit.negated, 1.0);
        }
        linear.add_literal(head_state, self.head.negated, -1.0);
        let linear = linear.finish();
        if linear.box_max() <= 0.0 {
            return Ok(());
        }

        let provenance = Provenance {
            rule: self.rule_id,
            substitution: self.binding.iter().map(|b| b.expect("bound")).collect(),
        };
        match self.rule.weight {
            Weight::Hard => self.hard.push(HardConstraint {
                coefficients: linear.coefficients,
                constant: linear.constant,
                provenance,
            }),
            Weight::Soft(w) => self.potentials.push(HingeLossPotential {
                weight: w,
                coefficients: linear.coefficients,
                constant: linear.constant,
                exponent: self.rule.exponent,
                provenance,
            }),
        }
        Ok(())
    }
}

/// Grounds `model` against `db`.
pub fn ground_with(
    model: &ModelFile,
    db: &EvidenceDb,
    config: &GroundConfig,
) -> Result<GroundProgram, GroundError> {
    let (tables, variables) = build_tables(model, db)?;
    let mut potentials = Vec::new();
    let mut hard_constraints = Vec::new();
    let mut rule_counts = Vec::with_capacity(model.rules.len());
    let mut total = 0usize;
    for (rule_id, rule) in model.rules.iter().enumerate() {
        let mut g = RuleGrounder::new(rule_id, rule, &tables, &mut total, config.cap)?;
        g.run()?;
        g.potentials.sort_by(|a, b| a.provenance.cmp(&b.provenance));
        g.hard.sort_by(|a, b| a.provenance.cmp(&b.provenance));
        rule_counts.push(RuleCounts {
            groundings: g.groundings,
            potentials: g.potentials.len() + g.hard.len(),
        });
        potentials.append(&mut g.potentials);
        hard_constraints.append(&mut g.hard);
    }
    Ok(GroundProgram {
        variables,
        potentials,
        hard_constraints,
        constants: tables.constants.iter().map(|&c| String::from(c)).collect(),
        rule_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_model;
    use crate::logic::distance_to_satisfaction;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn atom(p: &str, args: &[&str]) -> GroundAtom {
        GroundAtom::new(p, args.iter().copied())
    }

    const PROFILE_DECLS: &str = "predicate Is/2 : open\npredicate Represents/2 : open\npredicate Likes/2 : closed\npredicate Predicts/3 : closed\npredicate Friend/2 : closed\n";

    #[test]
    fn source_rule_grounding() {
        let m = parse_model(&alloc::format!(
            "{PROFILE_DECLS}1 : Predicts(U, ext, txt) -> Is(U, ext)\n1 : Is(U, ext) -> Predicts(U, ext, txt)"
        ))
        .unwrap();
        let mut db = EvidenceDb::new();
        db.observe(atom("Predicts", &["carol", "ext", "txt"]), 0.8).unwrap();
        db.add_target(atom("Is", &["carol", "ext"])).unwrap();
        let p = ground(&m, &db).unwrap();
        assert_eq!(p.variables, vec![atom("Is", &["carol", "ext"])]);
        assert_eq!(p.potentials.len(), 2);
        // max(0.8 - y, 0)
        let first = &p.potentials[0];
        assert_eq!(first.coefficients, vec![(0, -1.0)]);
        assert!((first.constant - 0.8).abs() < 1e-15);
        // max(y - 0.8, 0)
        let second = &p.potentials[1];
        assert_eq!(second.coefficients, vec![(0, 1.0)]);
        assert!((second.constant + 0.8).abs() < 1e-15);
    }

    #[test]
    fn example_two_potential() {
        let m = parse_model(&alloc::format!("{PROFILE_DECLS}1 : Is(U, C) & Friend(U, V) -> Is(V, C)")).unwrap();
        let mut db = EvidenceDb::new();
        db.observe(atom("Is", &["alice", "yng"]), 1.0).unwrap();
        db.observe(atom("Friend", &["alice", "bob"]), 0.7).unwrap();
        db.add_target(atom("Is", &["bob", "yng"])).unwrap();
        let p = ground(&m, &db).unwrap();
        assert_eq!(p.potentials.len(), 1);
        let pot = &p.potentials[0];
        assert_eq!(pot.coefficients, vec![(0, -1.0)]);
        assert!((pot.constant - 0.7).abs() < 1e-12);
        assert!((pot.hinge(&[0.5]) - 0.2).abs() < 1e-12);
        assert_eq!(count_potentials(&p, 0).unwrap(), RuleCounts { groundings: 1, potentials: 1 });
        assert_eq!(count_potentials(&p, 1), Err(GroundError::UnknownRule(1)));
    }

    #[test]
    fn direct_pair_groundings() {
        let m = parse_model(&alloc::format!(
            "{PROFILE_DECLS}1 : Is(U, c) & Likes(U, P) & Likes(V, P) -> Is(V, c)\n1 : !Is(U, c) & Likes(U, P) & Likes(V, P) -> !Is(V, c)"
        ))
        .unwrap();
        let mut db = EvidenceDb::new();
        db.observe(atom("Likes", &["a", "p"]), 1.0).unwrap();
        db.observe(atom("Likes", &["b", "p"]), 1.0).unwrap();
        db.observe(atom("Is", &["a", "c"]), 1.0).unwrap();
        db.add_target(atom("Is", &["b", "c"])).unwrap();
        let p = ground(&m, &db).unwrap();
        // (U=a,V=b) and (U=b,V=a) per rule; self pairs are tautologies
        assert_eq!(p.rule_counts[0].groundings, 2);
        assert_eq!(p.rule_counts[1].groundings, 2);
        // U=b pairs in rule 8 push toward Is(a,c), already 1; rule 9 at U=a is
        // inactive because !Is(a,c) = 0
        assert_eq!(p.rule_counts[0].potentials, 1);
        assert_eq!(p.rule_counts[1].potentials, 1);
    }

    #[test]
    fn closed_default_and_open_errors() {
        let m = parse_model(&alloc::format!("{PROFILE_DECLS}1 : Is(U, c) -> Predicts(U, c, txt)")).unwrap();
        let mut db = EvidenceDb::new();
        db.add_target(atom("Is", &["u", "c"])).unwrap();
        let p = ground(&m, &db).unwrap();
        // missing Predicts reads as 0: max(y, 0)
        assert_eq!(p.potentials[0].coefficients, vec![(0, 1.0)]);
        assert_eq!(p.potentials[0].constant, 0.0);

        let m = parse_model(&alloc::format!("{PROFILE_DECLS}1 : Likes(U, P) -> Is(U, c)")).unwrap();
        let mut db = EvidenceDb::new();
        db.observe(atom("Likes", &["u", "p"]), 1.0).unwrap();
        assert_eq!(
            ground(&m, &db),
            Err(GroundError::UnknownOpenAtom(atom("Is", &["u", "c"])))
        );
    }

    #[test]
    fn evidence_errors() {
        let m = parse_model(PROFILE_DECLS).unwrap();
        let mut db = EvidenceDb::new();
        db.observe(atom("Knows", &["a", "b"]), 1.0).unwrap();
        assert_eq!(ground(&m, &db), Err(GroundError::UndeclaredPredicate("Knows".into())));

        let mut db = EvidenceDb::new();
        db.add_target(atom("Likes", &["a", "b"])).unwrap();
        assert!(matches!(ground(&m, &db), Err(GroundError::TargetOnClosedPredicate(_))));

        let mut db = EvidenceDb::new();
        db.observe(atom("Is", &["a"]), 1.0).unwrap();
        assert!(matches!(ground(&m, &db), Err(GroundError::ArityMismatch { .. })));

        let mut db = EvidenceDb::new();
        db.add_target(atom("Is", &["a", "c"])).unwrap();
        assert!(matches!(db.observe(atom("Is", &["a", "c"]), 0.5), Err(GroundError::ObservedTarget(_))));
        assert!(db.observe(atom("Is", &["b", "c"]), 1.5).is_err());
    }

    #[test]
    fn unsafe_rule_rejected() {
        let m = parse_model(&alloc::format!("{PROFILE_DECLS}1 : !Likes(U, P) & Is(U, c) -> Is(U, d)")).unwrap();
        let db = EvidenceDb::new();
        assert!(matches!(ground(&m, &db), Err(GroundError::UnsafeRule { rule: 0, .. })));
    }

    #[test]
    fn cap_is_enforced() {
        let m = parse_model(&alloc::format!("{PROFILE_DECLS}1 : Likes(U, P) & Likes(V, P) -> Is(V, c)")).unwrap();
        let mut db = EvidenceDb::new();
        for u in 0..10 {
            db.observe(GroundAtom::new("Likes", [alloc::format!("u{u}"), "p".into()]), 1.0).unwrap();
            db.add_target(GroundAtom::new("Is", [alloc::format!("u{u}"), "c".into()])).unwrap();
        }
        assert_eq!(
            ground_with(&m, &db, &GroundConfig { cap: 50 }),
            Err(GroundError::CapExceeded { cap: 50 })
        );
        assert_eq!(ground_with(&m, &db, &GroundConfig { cap: 100 }).unwrap().rule_counts[0].groundings, 100);
    }

    #[test]
    fn hard_rules_become_constraints() {
        let m = parse_model(&alloc::format!("{PROFILE_DECLS}hard : Is(U, c) -> Represents(U, c)")).unwrap();
        let mut db = EvidenceDb::new();
        db.add_target(atom("Is", &["u", "c"])).unwrap();
        db.add_target(atom("Represents", &["u", "c"])).unwrap();
        let p = ground(&m, &db).unwrap();
        assert!(p.potentials.is_empty());
        assert_eq!(p.hard_constraints.len(), 1);
        assert_eq!(p.hard_constraints[0].coefficients, vec![(0, 1.0), (1, -1.0)]);
    }

    /// Random latent-style instance; checks linear forms against distance to
    /// satisfaction on the re-instantiated ground rule.
    #[test]
    fn potentials_match_distance_to_satisfaction() {
        let m = parse_model(&alloc::format!(
            "{PROFILE_DECLS}\
             1 : Is(U, c) & Likes(U, P) -> Represents(P, c)\n\
             1 : !Is(U, c) & Likes(U, P) -> !Represents(P, c) ^2\n\
             2 : Represents(P, c) & Likes(U, P) -> Is(U, c)\n\
             0.5 : !Represents(P, c) & Likes(U, P) -> !Is(U, c) ^2\n\
             1 : Is(U, c) & Likes(U, P) & Likes(V, P) -> Is(V, c)\n\
             1 : Is(U, c) & !Friend(U, V) & Is(V, c) -> Represents(U, c)\n"
        ))
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let mut db = EvidenceDb::new();
            for u in 0..6 {
                let is = GroundAtom::new("Is", [alloc::format!("u{u}"), "c".into()]);
                if rng.random_bool(0.5) {
                    db.observe(is, rng.random_range(0..=4) as f64 / 4.0).unwrap();
                } else {
                    db.add_target(is).unwrap();
                }
                db.add_target(GroundAtom::new("Represents", [alloc::format!("u{u}"), "c".into()])).unwrap();
                for v in 0..6 {
                    if rng.random_bool(0.3) {
                        db.observe(GroundAtom::new("Friend", [alloc::format!("u{u}"), alloc::format!("u{v}")]), rng.random()).unwrap();
                    }
                }
            }
            for p in 0..4 {
                let page = alloc::format!("p{p}");
                db.add_target(GroundAtom::new("Represents", [page.clone(), "c".into()])).unwrap();
                for u in 0..6 {
                    if rng.random_bool(0.4) {
                        db.observe(GroundAtom::new("Likes", [alloc::format!("u{u}"), page.clone()]), rng.random_range(0.1..=1.0)).unwrap();
                    }
                }
            }
            let program = ground(&m, &db).unwrap();
            let assignment: Vec<f64> = program.variables.iter().map(|_| rng.random()).collect();
            let mut interp = db.observed().clone();
            for (a, &v) in program.variables.iter().zip(&assignment) {
                interp.insert(a.clone(), v).unwrap();
            }
            for pot in &program.potentials {
                let rule = program.ground_rule(&m, &pot.provenance).unwrap();
                let mut local = interp.clone();
                for lit in rule.body.iter().chain(core::iter::once(&rule.head)) {
                    if !local.contains(&lit.atom) {
                        local.insert(lit.atom.clone(), 0.0).unwrap();
                    }
                }
                let d = distance_to_satisfaction(&rule, &local).unwrap();
                let expected = rule.exponent.apply(d);
                assert!((pot.hinge(&assignment) - expected).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn grounding_is_deterministic() {
        let m = parse_model(&alloc::format!(
            "{PROFILE_DECLS}1 : Is(U, c) & Likes(U, P) -> Represents(P, c)\n1 : Represents(P, c) & Likes(U, P) -> Is(U, c)"
        ))
        .unwrap();
        let mut db = EvidenceDb::new();
        for u in ["b", "a", "c"] {
            db.add_target(GroundAtom::new("Is", [u, "c"])).unwrap();
            for p in ["x", "y"] {
                db.observe(GroundAtom::new("Likes", [u, p]), 1.0).unwrap();
            }
        }
        for p in ["x", "y"] {
            db.add_target(GroundAtom::new("Represents", [p, "c"])).unwrap();
        }
        let a = ground(&m, &db).unwrap();
        let b = ground(&m, &db.clone()).unwrap();
        assert_eq!(a, b);
        let subs: Vec<_> = a.potentials.iter().map(|p| p.provenance.clone()).collect();
        let mut sorted = subs.clone();
        sorted.sort();
        assert_eq!(subs, sorted);
    }
}
