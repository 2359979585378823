//! Seeded synthetic profiling data.
//!
//! Every user has a standard-normal latent trait per characteristic and every
//! page a standard-normal affinity vector. A user likes the `likes_per_user`
//! pages with the largest `γ·⟨trait, affinity⟩/√7 + Gumbel` keys, which
//! samples pages without replacement with probability proportional to
//! `exp(γ·alignment)`; γ grows with `trait_page_affinity`. Gold labels are
//! the median split of each trait. Content predictions are the gold label,
//! flipped with probability `source_noise`, then drawn uniformly from the
//! chosen half of [0, 1].
//!
//! Traits, pages, likes and predictions use separate random streams, so for
//! a fixed seed the like lists of a smaller `likes_per_user` are prefixes of
//! the larger ones and predictions do not depend on the like count.

use std::collections::BTreeMap;

use psl_core::models::{ProfileEvidence, SourceKind, CHARACTERISTICS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::tsv::Gold;
use crate::{HarnessError, Result};

/// γ at `trait_page_affinity = 1`.
pub const AFFINITY_SCALE: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_pages: usize,
    pub likes_per_user: usize,
    pub source_noise: BTreeMap<SourceKind, f64>,
    pub trait_page_affinity: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_users: 500,
            n_pages: 2000,
            likes_per_user: 40,
            source_noise: [(SourceKind::txt(), 0.35), (SourceKind::img(), 0.35)].into(),
            trait_page_affinity: 0.4,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Usage(m));
        if self.n_users < 2 || self.n_pages == 0 || self.likes_per_user == 0 {
            return bad("need at least two users, one page and one like per user".into());
        }
        if self.likes_per_user > self.n_pages {
            return bad(format!("{} likes per user exceed {} pages", self.likes_per_user, self.n_pages));
        }
        if !(0.0..=1.0).contains(&self.trait_page_affinity) {
            return bad(format!("trait-page affinity {} outside [0, 1]", self.trait_page_affinity));
        }
        for (s, &noise) in &self.source_noise {
            if !(0.0..=0.5).contains(&noise) {
                return bad(format!("noise {noise} for {s} outside [0, 0.5]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    /// Predictions and likes; no characteristic is known.
    pub evidence: ProfileEvidence,
    pub gold: Gold,
}

const TRAIT_STREAM: u64 = 1;
const PAGE_STREAM: u64 = 2;
const LIKE_STREAM: u64 = 3;
const PREDICT_STREAM: u64 = 4;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn name(prefix: char, i: usize, n: usize) -> String {
    let width = (n.saturating_sub(1)).to_string().len().max(3);
    format!("{prefix}{i:0width$}")
}

fn normal_rows(rng: &mut ChaCha8Rng, rows: usize) -> Vec<[f64; 7]> {
    (0..rows)
        .map(|_| {
            let mut row = [0.0; 7];
            for x in &mut row {
                *x = rng.sample(StandardNormal);
            }
            row
        })
        .collect()
}

/// Median of an unsorted sample; the mean of the middle pair for even sizes.
fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

pub fn generate_synthetic(config: &SynthConfig) -> Result<SynthData> {
    config.validate()?;
    let traits = normal_rows(&mut stream(config.seed, TRAIT_STREAM), config.n_users);
    let pages = normal_rows(&mut stream(config.seed, PAGE_STREAM), config.n_pages);
    let users: Vec<String> = (0..config.n_users).map(|i| name('u', i, config.n_users)).collect();
    let page_names: Vec<String> = (0..config.n_pages).map(|i| name('p', i, config.n_pages)).collect();

    let mut gold = Gold::new();
    for (k, c) in CHARACTERISTICS.into_iter().enumerate() {
        let column: Vec<f64> = traits.iter().map(|t| t[k]).collect();
        let m = median(&column);
        for (u, &z) in users.iter().zip(&column) {
            gold.insert((u.clone(), c), z >= m);
        }
    }

    let mut evidence = ProfileEvidence::new();
    let gamma = config.trait_page_affinity * AFFINITY_SCALE / 7f64.sqrt();
    let mut rng = stream(config.seed, LIKE_STREAM);
    let mut keys: Vec<(f64, usize)> = Vec::with_capacity(config.n_pages);
    for (u, t) in users.iter().zip(&traits) {
        keys.clear();
        for (p, a) in pages.iter().enumerate() {
            let align: f64 = t.iter().zip(a).map(|(x, y)| x * y).sum();
            let uniform: f64 = rng.random();
            let gumbel = -(-(uniform.max(f64::MIN_POSITIVE)).ln()).ln();
            keys.push((gamma * align + gumbel, p));
        }
        keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, p) in &keys[..config.likes_per_user] {
            evidence.likes.insert((u.clone(), page_names[p].clone()), 1.0);
        }
    }

    let mut rng = stream(config.seed, PREDICT_STREAM);
    for u in &users {
        for c in CHARACTERISTICS {
            for (s, &noise) in &config.source_noise {
                let label = gold[&(u.clone(), c)];
                let side = if rng.random_bool(noise) { !label } else { label };
                let jitter: f64 = rng.random();
                let v = if side { round6(0.5 + 0.5 * jitter) } else { round6(0.5 * jitter).min(0.499999) };
                evidence.predicts.insert((u.clone(), c, s.clone()), v);
            }
        }
    }
    evidence.recompute_averages();
    Ok(SynthData { evidence, gold })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SynthConfig {
        SynthConfig { n_users: 41, n_pages: 60, likes_per_user: 8, seed, ..SynthConfig::default() }
    }

    #[test]
    fn same_seed_same_data() {
        assert_eq!(generate_synthetic(&small(3)).unwrap(), generate_synthetic(&small(3)).unwrap());
        assert_ne!(generate_synthetic(&small(3)).unwrap(), generate_synthetic(&small(4)).unwrap());
    }

    #[test]
    fn median_split_is_balanced() {
        let d = generate_synthetic(&small(1)).unwrap();
        for c in CHARACTERISTICS {
            let pos = d.gold.iter().filter(|((_, k), &l)| *k == c && l).count();
            // odd user count: the median user itself is positive
            assert_eq!(pos, 21);
        }
    }

    #[test]
    fn like_lists_are_nested_across_counts() {
        let few = generate_synthetic(&small(9)).unwrap();
        let many = generate_synthetic(&SynthConfig { likes_per_user: 20, ..small(9) }).unwrap();
        assert_eq!(few.evidence.likes.len(), 41 * 8);
        assert!(few.evidence.likes.keys().all(|k| many.evidence.likes.contains_key(k)));
        assert_eq!(few.evidence.predicts, many.evidence.predicts);
        assert_eq!(few.gold, many.gold);
    }

    #[test]
    fn noiseless_predictions_sit_on_the_gold_side() {
        let cfg = SynthConfig { source_noise: [(SourceKind::txt(), 0.0)].into(), ..small(2) };
        let d = generate_synthetic(&cfg).unwrap();
        for ((u, c, _), &v) in &d.evidence.predicts {
            assert_eq!(v >= 0.5, d.gold[&(u.clone(), *c)]);
        }
    }

    #[test]
    fn rejects_infeasible_configs() {
        assert!(generate_synthetic(&SynthConfig { likes_per_user: 61, ..small(0) }).is_err());
        assert!(generate_synthetic(&SynthConfig { trait_page_affinity: 1.5, ..small(0) }).is_err());
        let noisy = SynthConfig { source_noise: [(SourceKind::img(), 0.7)].into(), ..small(0) };
        assert!(generate_synthetic(&noisy).is_err());
    }
}
