//! Independent oracles and seeded generators shared by integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use psl_core::ground::{HingeLossPotential, Provenance};
use psl_core::models::{Characteristic, ProfileEvidence, CHARACTERISTICS};
use psl_core::{
    Closure, EvidenceDb, Exponent, GroundAtom, GroundProgram, Literal, ModelFile, PredicateDecl, Rule, Term,
    Weight,
};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A PSL-shaped random program: hinges over one or two variables with unit
/// coefficients and constants on a 0.004 lattice, so piecewise-linear
/// vertices fall on the 0.001 grid.
pub fn random_program(rng: &mut ChaCha8Rng, max_vars: usize, max_potentials: usize) -> GroundProgram {
    let n = rng.random_range(1..=max_vars);
    let m = rng.random_range(1..=max_potentials);
    let sign = |rng: &mut ChaCha8Rng| if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let mut potentials = Vec::new();
    while potentials.len() < m {
        let a = rng.random_range(0..n);
        let mut coefficients: Vec<(usize, f64)> = vec![(a, sign(rng))];
        if n > 1 && rng.random_bool(0.5) {
            let b = (a + rng.random_range(1..n)) % n;
            coefficients.push((b, sign(rng)));
        }
        let constant = rng.random_range(-500i32..=500) as f64 * 0.004;
        let box_max = constant + coefficients.iter().map(|(_, c)| c.max(0.0)).sum::<f64>();
        if box_max <= 0.0 {
            continue;
        }
        potentials.push(HingeLossPotential {
            weight: rng.random_range(1..=300u32) as f64 / 100.0,
            coefficients,
            constant,
            exponent: if rng.random_bool(0.5) { Exponent::Squared } else { Exponent::Linear },
            provenance: Provenance { rule: potentials.len(), substitution: vec![] },
        });
    }
    GroundProgram {
        variables: (0..n).map(|i| GroundAtom::new("Y", [format!("y{i}")])).collect(),
        potentials,
        hard_constraints: vec![],
        constants: vec![],
        rule_counts: vec![],
    }
}

/// Grounding counts found by trying every substitution drawn from the
/// constants seen at each variable's body positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BruteCounts {
    pub groundings: usize,
    pub potentials: usize,
}

pub fn brute_force_counts(model: &ModelFile, rule: &Rule, db: &EvidenceDb) -> BruteCounts {
    let vars: Vec<String> = rule.variables().into_iter().map(String::from).collect();
    let domains: Vec<Vec<String>> = vars
        .iter()
        .map(|v| {
            let mut dom: Option<BTreeSet<String>> = None;
            for lit in &rule.body {
                for (pos, t) in lit.args.iter().enumerate() {
                    if *t == Term::Var(v.clone()) {
                        let here: BTreeSet<String> =
                            db.domain(&lit.predicate, pos).into_iter().map(String::from).collect();
                        dom = Some(match dom {
                            None => here,
                            Some(d) => d.intersection(&here).cloned().collect(),
                        });
                    }
                }
            }
            dom.unwrap_or_default().into_iter().collect()
        })
        .collect();
    let closed = |p: &str| model.declaration(p).map(|d| d.closure == Closure::Closed).unwrap();
    let mut counts = BruteCounts::default();
    let mut idx = vec![0usize; vars.len()];
    if domains.iter().any(|d| d.is_empty()) {
        return counts;
    }
    loop {
        let sub: BTreeMap<&str, &str> =
            vars.iter().zip(&idx).enumerate().map(|(k, (v, &i))| (v.as_str(), domains[k][i].as_str())).collect();
        let ground = |lit: &Literal| {
            let args: Vec<String> = lit
                .args
                .iter()
                .map(|t| match t {
                    Term::Var(v) => sub[v.as_str()].to_string(),
                    Term::Const(c) => c.clone(),
                })
                .collect();
            (GroundAtom::new(lit.predicate.clone(), args), lit.negated)
        };
        let head = ground(&rule.head);
        let body: Vec<_> = rule.body.iter().map(ground).collect();
        let tautology = body.contains(&head);
        let known = |a: &GroundAtom| db.observed().contains(a) || db.is_target(a);
        let admissible = body.iter().all(|(a, neg)| {
            if closed(&a.predicate) {
                *neg || db.observed().get(a).is_some_and(|v| v > 0.0)
            } else {
                known(a)
            }
        });
        if admissible && !tautology {
            counts.groundings += 1;
            // distance to satisfaction as an affine function of the targets
            let mut constant = -(body.len() as f64 - 1.0);
            let mut coefs: BTreeMap<GroundAtom, f64> = BTreeMap::new();
            let mut add = |(a, neg): &(GroundAtom, bool), sign: f64| {
                if db.is_target(a) {
                    if *neg {
                        constant += sign;
                        *coefs.entry(a.clone()).or_default() -= sign;
                    } else {
                        *coefs.entry(a.clone()).or_default() += sign;
                    }
                } else {
                    let v = db.observed().get(a).unwrap_or(0.0);
                    constant += sign * if *neg { 1.0 - v } else { v };
                }
            };
            for b in &body {
                add(b, 1.0);
            }
            add(&head, -1.0);
            let box_max = constant + coefs.values().map(|c| c.max(0.0)).sum::<f64>();
            if box_max > 0.0 {
                counts.potentials += 1;
            }
        }
        // odometer over the domains
        let mut d = vars.len();
        loop {
            if d == 0 {
                return counts;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < domains[d].len() {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// AUC by enumerating every positive/negative pair, returned as the pair
/// score total (2 per win, 1 per tie) over twice the pair count.
pub fn brute_force_auc(pairs: &[(f64, bool)]) -> Option<f64> {
    let (mut won, mut total) = (0u64, 0u64);
    for &(sp, gp) in pairs {
        for &(sn, gn) in pairs {
            if gp && !gn {
                total += 2;
                won += if sp > sn {
                    2
                } else if sp == sn {
                    1
                } else {
                    0
                };
            }
        }
    }
    (total > 0).then(|| won as f64 / total as f64)
}

/// A random like graph with exactly `edges` distinct edges.
pub fn random_likes(rng: &mut ChaCha8Rng, users: usize, pages: usize, edges: usize) -> BTreeSet<(String, String)> {
    let mut all: Vec<(usize, usize)> = (0..users).flat_map(|u| (0..pages).map(move |p| (u, p))).collect();
    all.shuffle(rng);
    all.into_iter()
        .take(edges)
        .map(|(u, p)| (format!("u{u:03}"), format!("p{p:03}")))
        .collect()
}

/// Evidence over a like graph where every other user is labeled.
pub fn like_graph_evidence(
    rng: &mut ChaCha8Rng,
    users: usize,
    likes: &BTreeSet<(String, String)>,
) -> (ProfileEvidence, BTreeSet<(String, Characteristic)>) {
    let mut ev = ProfileEvidence::new();
    let mut targets = BTreeSet::new();
    for u in 0..users {
        let name = format!("u{u:03}");
        for c in CHARACTERISTICS {
            if u % 2 == 0 {
                ev.known_traits.insert((name.clone(), c), rng.random_bool(0.5));
            } else {
                targets.insert((name.clone(), c));
            }
        }
    }
    for (u, p) in likes {
        ev.likes.insert((u.clone(), p.clone()), 1.0);
    }
    ev.recompute_averages();
    (ev, targets)
}

fn random_constant(rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..3) {
        0 => {
            let len = rng.random_range(1..6);
            let mut s: String = (0..len).map(|_| (b'a' + rng.random_range(0..26u8)) as char).collect();
            if rng.random_bool(0.3) {
                s.push('_');
                s.push_str(&rng.random_range(0..100u32).to_string());
            }
            s
        }
        1 => rng.random_range(0..10_000u32).to_string(),
        _ => {
            let pool = "ABC xyz-,&()!:";
            let len = rng.random_range(0..8);
            (0..len).map(|_| pool.as_bytes()[rng.random_range(0..pool.len())] as char).collect()
        }
    }
}

/// A random well-formed model: a few declarations and rules over them with
/// range-restricted heads, mixed weights, polarity and exponents.
pub fn random_model(rng: &mut ChaCha8Rng) -> ModelFile {
    let mut m = ModelFile::new();
    let npred = rng.random_range(1..6);
    let arities: Vec<usize> = (0..npred).map(|_| rng.random_range(1..4)).collect();
    for (i, &arity) in arities.iter().enumerate() {
        let closure = if rng.random_bool(0.5) { Closure::Open } else { Closure::Closed };
        m.declare(PredicateDecl::new(format!("P{i}"), arity, closure).unwrap()).unwrap();
    }
    let literal = |rng: &mut ChaCha8Rng, allowed: Option<&[String]>| {
        let p = rng.random_range(0..npred);
        let args = (0..arities[p])
            .map(|_| match allowed {
                Some(vars) if !vars.is_empty() && rng.random_bool(0.6) => {
                    Term::Var(vars[rng.random_range(0..vars.len())].clone())
                }
                Some(_) => Term::Const(random_constant(rng)),
                None if rng.random_bool(0.6) => Term::Var(format!("V{}", rng.random_range(0..4))),
                None => Term::Const(random_constant(rng)),
            })
            .collect();
        Literal { predicate: format!("P{p}"), args, negated: rng.random_bool(0.3) }
    };
    for _ in 0..rng.random_range(0..8) {
        let body: Vec<Literal> = (0..rng.random_range(1..4)).map(|_| literal(rng, None)).collect();
        let bound: Vec<String> = body.iter().flat_map(|l| l.variables().map(String::from)).collect();
        let head = literal(rng, Some(&bound));
        let weight = match rng.random_range(0..3) {
            0 => Weight::Hard,
            1 => Weight::Soft(rng.random_range(0..100_000u32) as f64 / 1000.0),
            _ => Weight::Soft(rng.random_range(0.0..50.0)),
        };
        let exponent = if rng.random_bool(0.5) { Exponent::Squared } else { Exponent::Linear };
        m.add_rule(Rule::new(weight, body, head, exponent).unwrap()).unwrap();
    }
    m
}
