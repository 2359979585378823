mod support;

use std::collections::BTreeSet;

use psl_core::models::{
    build_latent_model, build_prior_model, build_profile_model, build_source_model, evidence_to_db, Characteristic,
    ProfileEvidence, SourceKind, CHARACTERISTICS,
};
use psl_core::{ground, solve_map, GroundProgram, ModelFile, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{like_graph_evidence, random_likes};

fn solve(model: &ModelFile, ev: &ProfileEvidence, targets: &BTreeSet<(String, Characteristic)>) -> Vec<(String, f64)> {
    let (db, _) = evidence_to_db(ev, targets, model).unwrap();
    let program = ground(model, &db).unwrap();
    let r = solve_map(&program, &SolverConfig::default()).unwrap();
    program.variables.iter().map(|a| a.to_string()).zip(r.assignment).collect()
}

#[test]
fn latent_label_swap_complements_the_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let likes = random_likes(&mut rng, 12, 15, 40);
    let (ev, targets) = like_graph_evidence(&mut rng, 12, &likes);
    let mut swapped = ev.clone();
    for label in swapped.known_traits.values_mut() {
        *label = !*label;
    }
    swapped.recompute_averages();
    for c in CHARACTERISTICS {
        assert!((swapped.averages[&c] - (1.0 - ev.averages[&c])).abs() < 1e-12);
    }
    let model = build_latent_model();
    let a = solve(&model, &ev, &targets);
    let b = solve(&model, &swapped, &targets);
    for ((atom, x), (_, y)) in a.iter().zip(&b) {
        assert!((x + y - 1.0).abs() < 1e-4, "{atom}: {x} vs {y}");
    }
}

#[test]
fn prior_fixed_point_on_random_labels() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut ev = ProfileEvidence::new();
    let mut targets = BTreeSet::new();
    for u in 0..60 {
        for c in CHARACTERISTICS {
            if u < 40 {
                ev.known_traits.insert((format!("u{u}"), c), rng.random_bool(0.3));
            } else {
                targets.insert((format!("u{u}"), c));
            }
        }
    }
    ev.recompute_averages();
    for (atom, v) in solve(&build_prior_model(), &ev, &targets) {
        let c: Characteristic = atom.trim_end_matches(')').rsplit(", ").next().unwrap().parse().unwrap();
        assert!((v - ev.averages[&c]).abs() < 1e-3, "{atom} = {v}, average {}", ev.averages[&c]);
    }
}

/// Potentials as comparable keys: weight, named coefficients, constant.
fn potential_keys(p: &GroundProgram) -> Vec<String> {
    let mut keys: Vec<String> = p
        .potentials
        .iter()
        .map(|h| {
            let coefs: Vec<String> = h.coefficients.iter().map(|&(v, a)| format!("{a}*{}", p.variables[v])).collect();
            format!("{}|{}|{:.12}|{:?}", h.weight, coefs.join("+"), h.constant, h.exponent)
        })
        .collect();
    keys.sort();
    keys
}

#[test]
fn profile_grounds_to_the_union_of_its_parts() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let likes = random_likes(&mut rng, 20, 30, 80);
    let (mut ev, targets) = like_graph_evidence(&mut rng, 20, &likes);
    for (u, c) in &targets {
        for s in [SourceKind::txt(), SourceKind::img()] {
            ev.predicts.insert((u.clone(), *c, s), rng.random_range(0.0..=1.0));
        }
    }
    let sources: BTreeSet<SourceKind> = [SourceKind::txt(), SourceKind::img()].into();
    let profile = build_profile_model(&sources);
    let (db, _) = evidence_to_db(&ev, &targets, &profile).unwrap();
    let whole = potential_keys(&ground(&profile, &db).unwrap());

    let parts = [build_latent_model(), build_source_model(&SourceKind::txt()), build_source_model(&SourceKind::img())];
    let mut union: Vec<String> = parts.iter().flat_map(|m| potential_keys(&ground(m, &db).unwrap())).collect();
    union.sort();
    assert_eq!(whole, union);

    // adding the prior model as a further part only repeats potentials
    let prior = potential_keys(&ground(&build_prior_model(), &db).unwrap());
    assert!(prior.iter().all(|k| whole.binary_search(k).is_ok()));
}
