//! Consensus ADMM. Every potential and hard constraint keeps a local copy of
//! the variables it touches; the consensus step averages the copies and
//! clips to `[0, 1]`. Connected components are solved independently.

use alloc::vec;
use alloc::vec::Vec;

use super::{components, Component, SolveResult, SolverConfig, HARD_TOLERANCE, INITIAL_VALUE};
use crate::ground::GroundProgram;
use crate::logic::Exponent;

#[derive(Clone, Copy)]
enum Kind {
    Linear,
    Squared,
    Hard,
}

struct Block {
    start: usize,
    end: usize,
    weight: f64,
    constant: f64,
    norm2: f64,
    kind: Kind,
}

/// Flattened view of one component.
struct Problem {
    blocks: Vec<Block>,
    /// Local (component-relative) variable per copy.
    var: Vec<usize>,
    coef: Vec<f64>,
    /// Number of copies per variable.
    count: Vec<f64>,
    has_hard: bool,
}

impl Problem {
    fn new(program: &GroundProgram, comp: &Component) -> Self {
        let local = |v: usize| comp.variables.binary_search(&v).expect("variable in component");
        let mut p = Problem {
            blocks: Vec::new(),
            var: Vec::new(),
            coef: Vec::new(),
            count: vec![0.0; comp.variables.len()],
            has_hard: !comp.hard.is_empty(),
        };
        let push = |coefs: &[(usize, f64)], weight: f64, constant: f64, kind: Kind, p: &mut Problem| {
            let start = p.var.len();
            for &(v, a) in coefs {
                let l = local(v);
                p.var.push(l);
                p.coef.push(a);
                p.count[l] += 1.0;
            }
            p.blocks.push(Block {
                start,
                end: p.var.len(),
                weight,
                constant,
                norm2: coefs.iter().map(|(_, a)| a * a).sum(),
                kind,
            });
        };
        for &k in &comp.potentials {
            let pot = &program.potentials[k];
            let kind = match pot.exponent {
                Exponent::Linear => Kind::Linear,
                Exponent::Squared => Kind::Squared,
            };
            push(&pot.coefficients, pot.weight, pot.constant, kind, &mut p);
        }
        for &k in &comp.hard {
            let h = &program.hard_constraints[k];
            push(&h.coefficients, 0.0, h.constant, Kind::Hard, &mut p);
        }
        p
    }
}

impl Problem {
    /// Soft part of the objective restricted to this component.
    fn energy(&self, z: &[f64]) -> f64 {
        self.blocks
            .iter()
            .map(|b| {
                let l = b.constant + (b.start..b.end).map(|k| self.coef[k] * z[self.var[k]]).sum::<f64>();
                let h = l.max(0.0);
                match b.kind {
                    Kind::Linear => b.weight * h,
                    Kind::Squared => b.weight * h * h,
                    Kind::Hard => 0.0,
                }
            })
            .sum()
    }
}

fn dot(coef: &[f64], x: &[f64]) -> f64 {
    coef.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Minimizes `w * max(l(x), 0)^p + (rho / 2) * |x - v|^2` in place, where `x`
/// holds `v` on entry.
fn prox(b: &Block, coef: &[f64], x: &mut [f64], rho: f64) {
    if b.norm2 == 0.0 {
        return;
    }
    let l = b.constant + dot(coef, x);
    let shift = |x: &mut [f64], t: f64| {
        for (xi, a) in x.iter_mut().zip(coef) {
            *xi -= t * a;
        }
    };
    match b.kind {
        Kind::Linear => {
            if l <= 0.0 {
                return;
            }
            let t = b.weight / rho;
            if l - t * b.norm2 >= 0.0 {
                shift(x, t);
            } else {
                shift(x, l / b.norm2);
            }
        }
        Kind::Squared => {
            if l <= 0.0 {
                return;
            }
            shift(x, 2.0 * b.weight * l / (rho + 2.0 * b.weight * b.norm2));
        }
        Kind::Hard => {
            if l > 0.0 {
                shift(x, l / b.norm2);
            }
        }
    }
}

struct Outcome {
    iterations: usize,
    r2: f64,
    s2: f64,
    converged: bool,
}

fn run(problem: &Problem, z: &mut [f64], config: &SolverConfig) -> Outcome {
    let m = problem.var.len();
    let mut x: Vec<f64> = problem.var.iter().map(|&v| z[v]).collect();
    let mut u = vec![0.0; m];
    let mut sum = vec![0.0; z.len()];
    let mut rho = config.rho;
    let mut out = Outcome { iterations: 0, r2: 0.0, s2: 0.0, converged: false };

    for it in 0..config.max_iterations {
        for b in &problem.blocks {
            let (s, e) = (b.start, b.end);
            for k in s..e {
                x[k] = z[problem.var[k]] - u[k];
            }
            prox(b, &problem.coef[s..e], &mut x[s..e], rho);
        }

        sum.iter_mut().for_each(|s| *s = 0.0);
        for k in 0..m {
            sum[problem.var[k]] += x[k] + u[k];
        }
        let mut s2 = 0.0;
        let mut z_norm2 = 0.0;
        for (i, zi) in z.iter_mut().enumerate() {
            let next = (sum[i] / problem.count[i]).clamp(0.0, 1.0);
            s2 += problem.count[i] * (next - *zi) * (next - *zi);
            z_norm2 += problem.count[i] * next * next;
            *zi = next;
        }
        s2 *= rho * rho;

        let (mut r2, mut x_norm2, mut u_norm2) = (0.0, 0.0, 0.0);
        for k in 0..m {
            let d = x[k] - z[problem.var[k]];
            r2 += d * d;
            u[k] += d;
            x_norm2 += x[k] * x[k];
            u_norm2 += u[k] * u[k];
        }

        let eps_pri = config.eps_abs + config.eps_rel * libm::sqrt(x_norm2.max(z_norm2));
        let eps_dual = config.eps_abs + config.eps_rel * rho * libm::sqrt(u_norm2);
        let (r, s) = (libm::sqrt(r2), libm::sqrt(s2));
        out = Outcome { iterations: it + 1, r2, s2, converged: false };
        if r <= eps_pri && s <= eps_dual && (!problem.has_hard || max_violation(problem, z) <= HARD_TOLERANCE) {
            out.converged = true;
            break;
        }

        if config.adaptive_rho && it % 10 == 9 {
            let scale = if r > 10.0 * s {
                2.0
            } else if s > 10.0 * r {
                0.5
            } else {
                1.0
            };
            if scale != 1.0 {
                rho *= scale;
                u.iter_mut().for_each(|ui| *ui /= scale);
            }
        }
    }
    out
}

fn max_violation(problem: &Problem, z: &[f64]) -> f64 {
    problem
        .blocks
        .iter()
        .filter(|b| matches!(b.kind, Kind::Hard))
        .map(|b| {
            b.constant
                + (b.start..b.end)
                    .map(|k| problem.coef[k] * z[problem.var[k]])
                    .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

pub(super) fn solve(program: &GroundProgram, config: &SolverConfig) -> SolveResult {
    let mut assignment = vec![INITIAL_VALUE; program.variables.len()];
    let (mut iterations, mut r2, mut s2, mut converged) = (0, 0.0, 0.0, true);
    for comp in components(program) {
        let problem = Problem::new(program, &comp);
        let start: Vec<f64> = comp.variables.iter().map(|&v| assignment[v]).collect();
        let mut z = start.clone();
        let out = run(&problem, &mut z, config);
        // an early stop can leave a flat component marginally worse off than
        // where it started
        if !problem.has_hard && problem.energy(&start) < problem.energy(&z) {
            z = start;
        }
        for (&v, &zi) in comp.variables.iter().zip(&z) {
            assignment[v] = zi;
        }
        iterations = iterations.max(out.iterations);
        r2 += out.r2;
        s2 += out.s2;
        converged &= out.converged;
    }
    SolveResult {
        assignment,
        objective: 0.0,
        iterations,
        primal_residual: libm::sqrt(r2),
        dual_residual: libm::sqrt(s2),
        converged,
        unique: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(coefs: &[f64], constant: f64, weight: f64, kind: Kind) -> Block {
        Block {
            start: 0,
            end: coefs.len(),
            weight,
            constant,
            norm2: coefs.iter().map(|a| a * a).sum(),
            kind,
        }
    }

    fn brute_prox(coefs: &[f64], constant: f64, w: f64, sq: bool, v: f64, rho: f64) -> f64 {
        // 1-d brute force over a fine grid on [-2, 3]
        let f = |x: f64| {
            let h = (constant + coefs[0] * x).max(0.0);
            w * if sq { h * h } else { h } + rho / 2.0 * (x - v) * (x - v)
        };
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=500_000 {
            let x = -2.0 + 5.0 * i as f64 / 500_000.0;
            let fx = f(x);
            if fx < best.0 {
                best = (fx, x);
            }
        }
        best.1
    }

    #[test]
    fn prox_matches_brute_force() {
        for &(a, c, w, rho, v) in &[
            (1.0, -0.3, 1.0, 1.0, 0.9),
            (1.0, -0.3, 0.1, 1.0, 0.9),
            (-1.0, 0.8, 2.0, 0.5, 0.1),
            (-1.0, 0.8, 0.2, 3.0, 0.75),
            (2.0, -1.0, 1.0, 1.0, 0.2),
        ] {
            for (sq, kind) in [(false, Kind::Linear), (true, Kind::Squared)] {
                let mut x = [v];
                prox(&block(&[a], c, w, kind), &[a], &mut x, rho);
                let want = brute_prox(&[a], c, w, sq, v, rho);
                assert!((x[0] - want).abs() < 2e-5, "a={a} c={c} w={w} rho={rho} v={v} sq={sq}: {} vs {want}", x[0]);
            }
        }
    }

    #[test]
    fn hard_prox_projects() {
        let mut x = [0.9, 0.1];
        prox(&block(&[1.0, -1.0], 0.0, 0.0, Kind::Hard), &[1.0, -1.0], &mut x, 1.0);
        assert!((x[0] - 0.5).abs() < 1e-12 && (x[1] - 0.5).abs() < 1e-12);
    }
}
