//! Accelerated projected gradient on a Huber-smoothed objective.
//!
//! Linear hinges `max(l, 0)` are replaced by their Huber smoothing with
//! width `mu`, which is shrunk geometrically (warm-started each time) until
//! the smoothing error is negligible. Squared hinges are already smooth.

use alloc::vec;
use alloc::vec::Vec;

use super::{SolveError, SolveResult, SolverConfig, INITIAL_VALUE};
use crate::ground::GroundProgram;
use crate::logic::Exponent;

const MU_START: f64 = 1e-1;
const MU_END: f64 = 1e-9;

fn gradient(program: &GroundProgram, x: &[f64], mu: f64, g: &mut [f64]) {
    g.iter_mut().for_each(|gi| *gi = 0.0);
    for p in &program.potentials {
        let l = p.linear(x);
        if l <= 0.0 {
            continue;
        }
        let d = match p.exponent {
            Exponent::Linear => p.weight * (l / mu).min(1.0),
            Exponent::Squared => 2.0 * p.weight * l,
        };
        for &(v, a) in &p.coefficients {
            g[v] += d * a;
        }
    }
}

fn lipschitz(program: &GroundProgram, mu: f64) -> f64 {
    program
        .potentials
        .iter()
        .map(|p| {
            let norm2: f64 = p.coefficients.iter().map(|(_, a)| a * a).sum();
            let curvature = match p.exponent {
                Exponent::Linear => 1.0 / mu,
                Exponent::Squared => 2.0,
            };
            p.weight * norm2 * curvature
        })
        .sum()
}

pub(super) fn solve(program: &GroundProgram, config: &SolverConfig) -> Result<SolveResult, SolveError> {
    if !program.hard_constraints.is_empty() {
        return Err(SolveError::Unsupported("projected gradient"));
    }
    let n = program.variables.len();
    let mut x = vec![INITIAL_VALUE; n];
    if program.potentials.is_empty() {
        return Ok(SolveResult {
            assignment: x,
            objective: 0.0,
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            converged: true,
            unique: None,
        });
    }
    let has_linear = program
        .potentials
        .iter()
        .any(|p| p.exponent == Exponent::Linear);

    let mut stages = Vec::new();
    let mut mu = if has_linear { MU_START } else { 1.0 };
    loop {
        stages.push(mu);
        if !has_linear || mu <= MU_END {
            break;
        }
        mu *= 0.1;
    }

    let mut g = vec![0.0; n];
    let mut y = x.clone();
    let mut next = x.clone();
    let mut iterations = 0;
    let mut converged = true;
    let mut mapping_norm = 0.0;
    for &mu in &stages {
        let step = 1.0 / lipschitz(program, mu);
        y.copy_from_slice(&x);
        let mut t = 1.0_f64;
        let mut stage_converged = false;
        while iterations < config.max_iterations {
            iterations += 1;
            gradient(program, &y, mu, &mut g);
            for i in 0..n {
                next[i] = (y[i] - step * g[i]).clamp(0.0, 1.0);
            }
            // gradient mapping at y measures stationarity
            mapping_norm = libm::sqrt(
                (0..n).map(|i| (y[i] - next[i]) * (y[i] - next[i])).sum::<f64>(),
            ) / step;
            let restart = (0..n)
                .map(|i| (y[i] - next[i]) * (next[i] - x[i]))
                .sum::<f64>()
                > 0.0;
            let t_next = if restart { 1.0 } else { (1.0 + libm::sqrt(1.0 + 4.0 * t * t)) / 2.0 };
            let momentum = if restart { 0.0 } else { (t - 1.0) / t_next };
            for i in 0..n {
                y[i] = next[i] + momentum * (next[i] - x[i]);
            }
            core::mem::swap(&mut x, &mut next);
            t = t_next;
            if mapping_norm <= config.eps_abs {
                stage_converged = true;
                break;
            }
        }
        converged = stage_converged;
        if iterations >= config.max_iterations {
            break;
        }
    }
    Ok(SolveResult {
        assignment: x,
        objective: 0.0,
        iterations,
        primal_residual: mapping_norm,
        dual_residual: 0.0,
        converged,
        unique: None,
    })
}
