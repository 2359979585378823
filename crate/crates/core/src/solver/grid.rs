//! Lattice search for tiny programs.
//!
//! Points live on the lattice `k * grid_step`. A full pass at a coarse
//! spacing is followed by windowed refinements around the incumbent, halving
//! the spacing each time until it reaches `grid_step`; a window is re-centred
//! whenever the incumbent lands on its edge. For the convex objectives the
//! grounder produces this finds the lattice optimum without enumerating the
//! whole `(1 / grid_step + 1)^n` grid.

use alloc::vec;
use alloc::vec::Vec;

use super::{objective, SolveError, SolveResult, SolverConfig, GRID_MAX_VARIABLES};
use crate::ground::GroundProgram;

/// Points evaluated by the coarse pass, at most.
const COARSE_BUDGET: f64 = 2e5;

struct Search<'a> {
    program: &'a GroundProgram,
    scale: f64,
    best: Option<(f64, Vec<i64>)>,
    second: Option<(f64, Vec<i64>)>,
    evaluated: usize,
    buf: Vec<f64>,
}

impl Search<'_> {
    fn visit(&mut self, point: &[i64]) {
        for (b, &p) in self.buf.iter_mut().zip(point) {
            *b = p as f64 * self.scale;
        }
        let value = objective(self.program, &self.buf).expect("lengths match");
        self.evaluated += 1;
        if !value.is_finite() {
            return;
        }
        let same = |o: &Option<(f64, Vec<i64>)>| o.as_ref().is_some_and(|(_, q)| q == point);
        if same(&self.best) || same(&self.second) {
            return;
        }
        let better = |o: &Option<(f64, Vec<i64>)>| o.as_ref().is_none_or(|(v, _)| value < *v);
        if better(&self.best) {
            self.second = self.best.take();
            self.best = Some((value, point.to_vec()));
        } else if better(&self.second) {
            self.second = Some((value, point.to_vec()));
        }
    }

    /// Visits `center[i] + j * step` for `|j * step| <= radius`, clipped to
    /// `[0, top]`, in lexicographic order.
    fn window(&mut self, center: &[i64], radius: i64, step: i64, top: i64) {
        let axes: Vec<Vec<i64>> = center
            .iter()
            .map(|&c| {
                let reach = radius / step;
                (-reach..=reach)
                    .map(|j| c + j * step)
                    .filter(|&p| (0..=top).contains(&p))
                    .collect()
            })
            .collect();
        self.product(&axes);
    }

    fn product(&mut self, axes: &[Vec<i64>]) {
        if axes.iter().any(|a| a.is_empty()) {
            return;
        }
        let mut idx = vec![0usize; axes.len()];
        let mut point: Vec<i64> = axes.iter().map(|a| a[0]).collect();
        loop {
            self.visit(&point);
            let mut d = axes.len();
            loop {
                if d == 0 {
                    return;
                }
                d -= 1;
                idx[d] += 1;
                if idx[d] < axes[d].len() {
                    point[d] = axes[d][idx[d]];
                    break;
                }
                idx[d] = 0;
                point[d] = axes[d][0];
            }
        }
    }
}

pub(super) fn solve(program: &GroundProgram, config: &SolverConfig) -> Result<SolveResult, SolveError> {
    let n = program.variables.len();
    if n > GRID_MAX_VARIABLES {
        return Err(SolveError::TooManyVariables { found: n, limit: GRID_MAX_VARIABLES });
    }
    let top = libm::round(1.0 / config.grid_step);
    if (top * config.grid_step - 1.0).abs() > 1e-9 {
        return Err(SolveError::InvalidConfig("1 / grid_step must be an integer"));
    }
    let top = top as i64;
    let mut search = Search {
        program,
        scale: 1.0 / top as f64,
        best: None,
        second: None,
        evaluated: 0,
        buf: vec![0.0; n],
    };

    if program.potentials.is_empty() && program.hard_constraints.is_empty() {
        return Ok(SolveResult {
            assignment: vec![super::INITIAL_VALUE; n],
            objective: 0.0,
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            converged: true,
            unique: Some(n == 0),
        });
    }

    // coarse pass: the largest per-axis resolution that fits the budget
    let per_axis = if n == 0 {
        1
    } else {
        (libm::floor(libm::pow(COARSE_BUDGET, 1.0 / n as f64)) as i64 - 1).max(1)
    };
    let mut step = ((top + per_axis - 1) / per_axis).max(1);
    let axes: Vec<Vec<i64>> = (0..n)
        .map(|_| {
            let mut a: Vec<i64> = (0..=top / step).map(|j| j * step).collect();
            if *a.last().unwrap() != top {
                a.push(top);
            }
            a
        })
        .collect();
    if n == 0 {
        search.visit(&[]);
    } else {
        search.product(&axes);
    }

    while step > 1 {
        let finer = (step / 2).max(1);
        let radius = 2 * step;
        loop {
            let Some((_, center)) = search.best.clone() else {
                return Err(SolveError::Infeasible);
            };
            search.window(&center, radius, finer, top);
            let moved = &search.best.as_ref().unwrap().1;
            let on_edge = moved.iter().zip(&center).any(|(&m, &c)| {
                (m - c).abs() >= radius / finer * finer && m != 0 && m != top
            });
            if !on_edge {
                break;
            }
        }
        step = finer;
    }

    let Some((value, point)) = search.best.clone() else {
        return Err(SolveError::Infeasible);
    };
    let unique = search
        .second
        .as_ref()
        .is_none_or(|(v, _)| *v - value > config.grid_step);
    Ok(SolveResult {
        assignment: point.iter().map(|&p| p as f64 / top as f64).collect(),
        objective: value,
        iterations: search.evaluated,
        primal_residual: 0.0,
        dual_residual: 0.0,
        converged: true,
        unique: Some(unique),
    })
}
