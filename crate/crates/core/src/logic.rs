//! Atoms, rules, interpretations and Łukasiewicz semantics.

use alloc::collections::btree_map::{self, BTreeMap};
use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LogicError {
    #[error("truth value {0} is outside [0, 1]")]
    Domain(f64),
    #[error("no truth value for ground atom {0}")]
    MissingAtom(GroundAtom),
    #[error("rule body is empty")]
    EmptyBody,
    #[error("rule weight {0} is not a nonnegative finite number")]
    InvalidWeight(f64),
    #[error("head variable {0} does not occur in the rule body")]
    UnboundHeadVariable(String),
    #[error("predicate {symbol} must have positive arity")]
    ZeroArity { symbol: String },
}

fn check_truth(v: f64) -> Result<f64, LogicError> {
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(LogicError::Domain(v))
    }
}

/// Łukasiewicz t-norm, `max(0, p + q - 1)`.
pub fn luk_and(p: f64, q: f64) -> Result<f64, LogicError> {
    let (p, q) = (check_truth(p)?, check_truth(q)?);
    Ok((p + q - 1.0).max(0.0))
}

/// Łukasiewicz t-conorm, `min(p + q, 1)`.
pub fn luk_or(p: f64, q: f64) -> Result<f64, LogicError> {
    let (p, q) = (check_truth(p)?, check_truth(q)?);
    Ok((p + q).min(1.0))
}

/// Łukasiewicz negation, `1 - p`.
pub fn luk_not(p: f64) -> Result<f64, LogicError> {
    Ok(1.0 - check_truth(p)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Closure {
    /// Unlisted ground atoms are false.
    Closed,
    /// Unlisted ground atoms must be inference targets.
    Open,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PredicateDecl {
    pub symbol: String,
    pub arity: usize,
    pub closure: Closure,
}

impl PredicateDecl {
    pub fn new(
        symbol: impl Into<String>,
        arity: usize,
        closure: Closure,
    ) -> Result<Self, LogicError> {
        let symbol = symbol.into();
        if arity == 0 {
            return Err(LogicError::ZeroArity { symbol });
        }
        Ok(Self {
            symbol,
            arity,
            closure,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(name.into())
    }

    pub fn constant(name: impl Into<String>) -> Self {
        Term::Const(name.into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub predicate: String,
    pub args: Vec<Term>,
    pub negated: bool,
}

impl Literal {
    pub fn positive(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Self {
            predicate: predicate.into(),
            args,
            negated: false,
        }
    }

    pub fn negative(predicate: impl Into<String>, args: Vec<Term>) -> Self {
        Self {
            negated: true,
            ..Self::positive(predicate, args)
        }
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    Soft(f64),
    /// Infinite weight: the rule becomes a hard constraint.
    Hard,
}

impl Weight {
    pub fn is_hard(self) -> bool {
        matches!(self, Weight::Hard)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Exponent {
    #[default]
    Linear,
    Squared,
}

impl Exponent {
    pub fn power(self) -> u32 {
        match self {
            Exponent::Linear => 1,
            Exponent::Squared => 2,
        }
    }

    /// Raises a hinge value `max(l, 0)` to this exponent.
    pub fn apply(self, hinge: f64) -> f64 {
        match self {
            Exponent::Linear => hinge,
            Exponent::Squared => hinge * hinge,
        }
    }
}

/// A weighted implication `weight : body -> head`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub weight: Weight,
    pub body: Vec<Literal>,
    pub head: Literal,
    pub exponent: Exponent,
}

impl Rule {
    /// Builds a rule, checking the weight, a nonempty body and range restriction.
    pub fn new(
        weight: Weight,
        body: Vec<Literal>,
        head: Literal,
        exponent: Exponent,
    ) -> Result<Self, LogicError> {
        if let Weight::Soft(w) = weight {
            if !(w.is_finite() && w >= 0.0) {
                return Err(LogicError::InvalidWeight(w));
            }
        }
        if body.is_empty() {
            return Err(LogicError::EmptyBody);
        }
        let bound: BTreeSet<&str> = body.iter().flat_map(Literal::variables).collect();
        if let Some(v) = head.variables().find(|v| !bound.contains(v)) {
            return Err(LogicError::UnboundHeadVariable(v.into()));
        }
        Ok(Self {
            weight,
            body,
            head,
            exponent,
        })
    }

    /// Variables in order of first appearance, body first.
    pub fn variables(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for v in self.body.iter().chain(core::iter::once(&self.head)).flat_map(Literal::variables) {
            if !seen.contains(&v) {
                seen.push(v);
            }
        }
        seen
    }
}

/// A predicate applied to constants. Ordered by predicate, then arguments.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new<I, S>(predicate: impl Into<String>, args: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            predicate: predicate.into(),
            args: args.into_iter().map(Into::into).collect(),
        }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(a)?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundLiteral {
    pub atom: GroundAtom,
    pub negated: bool,
}

impl GroundLiteral {
    pub fn positive(atom: GroundAtom) -> Self {
        Self {
            atom,
            negated: false,
        }
    }

    pub fn negative(atom: GroundAtom) -> Self {
        Self {
            atom,
            negated: true,
        }
    }
}

/// A rule with every variable replaced by a constant.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundRule {
    pub weight: Weight,
    pub body: Vec<GroundLiteral>,
    pub head: GroundLiteral,
    pub exponent: Exponent,
}

/// Truth values for ground atoms. Every stored value lies in `[0, 1]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Interpretation {
    values: BTreeMap<GroundAtom, f64>,
}

impl Interpretation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, atom: GroundAtom, value: f64) -> Result<Option<f64>, LogicError> {
        check_truth(value)?;
        Ok(self.values.insert(atom, value))
    }

    pub fn get(&self, atom: &GroundAtom) -> Option<f64> {
        self.values.get(atom).copied()
    }

    pub fn contains(&self, atom: &GroundAtom) -> bool {
        self.values.contains_key(atom)
    }

    pub fn remove(&mut self, atom: &GroundAtom) -> Option<f64> {
        self.values.remove(atom)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Entries in canonical atom order.
    pub fn iter(&self) -> btree_map::Iter<'_, GroundAtom, f64> {
        self.values.iter()
    }
}

impl<'a> IntoIterator for &'a Interpretation {
    type Item = (&'a GroundAtom, &'a f64);
    type IntoIter = btree_map::Iter<'a, GroundAtom, f64>;

    fn into_iter(self) -> Self::IntoIter {
        self.values.iter()
    }
}

/// `I(atom)`, or `1 - I(atom)` for a negated literal.
pub fn literal_value(lit: &GroundLiteral, interp: &Interpretation) -> Result<f64, LogicError> {
    let v = interp
        .get(&lit.atom)
        .ok_or_else(|| LogicError::MissingAtom(lit.atom.clone()))?;
    Ok(if lit.negated { 1.0 - v } else { v })
}

/// `max(0, I(body) - I(head))` with the body read as a Łukasiewicz conjunction.
///
/// The chained conjunction of `m` literal values is `max(0, sum - (m - 1))`;
/// when that clamps, the outer hinge is zero anyway, so only the outer max
/// is needed.
pub fn distance_to_satisfaction(rule: &GroundRule, interp: &Interpretation) -> Result<f64, LogicError> {
    let mut sum = 0.0;
    for lit in &rule.body {
        sum += literal_value(lit, interp)?;
    }
    let body = sum - (rule.body.len() as f64 - 1.0);
    let head = literal_value(&rule.head, interp)?;
    Ok((body - head).max(0.0))
}
