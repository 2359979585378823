//! MAP inference: minimize the weighted hinge sum over `[0, 1]^n`.
//!
//! Three methods share one entry point, [`solve_map`]:
//! * [`Method::Admm`], consensus ADMM with closed-form local steps, the
//!   production solver;
//! * [`Method::ProjectedGradient`], accelerated projected gradient on a
//!   smoothed objective, used as a cross-check;
//! * [`Method::GridOracle`], a lattice search for programs with at most six
//!   variables, used as a test oracle.

mod admm;
mod gradient;
mod grid;

use alloc::vec::Vec;

use crate::ground::GroundProgram;
use crate::logic::{Interpretation, LogicError};

/// Hard constraints count as violated beyond this slack.
pub const HARD_TOLERANCE: f64 = 1e-6;

/// Value every target starts from.
pub const INITIAL_VALUE: f64 = 0.5;

/// Largest program the grid oracle accepts.
pub const GRID_MAX_VARIABLES: usize = 6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("the grid oracle handles at most {limit} variables, program has {found}")]
    TooManyVariables { found: usize, limit: usize },
    #[error("{0} does not support hard constraints")]
    Unsupported(&'static str),
    #[error("assignment has {found} values for {expected} variables")]
    AssignmentLength { expected: usize, found: usize },
    #[error("no value for target variable {0}")]
    MissingVariable(usize),
    #[error("objective is not finite")]
    NonFinite,
    #[error("no grid point satisfies the hard constraints")]
    Infeasible,
    #[error(transparent)]
    Logic(#[from] LogicError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Admm,
    ProjectedGradient,
    GridOracle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    /// ADMM penalty.
    pub rho: f64,
    pub max_iterations: usize,
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Lattice spacing for the grid oracle; `1 / grid_step` must be an integer.
    pub grid_step: f64,
    /// Recorded for reproducibility. Every method starts from
    /// [`INITIAL_VALUE`] and draws no random numbers.
    pub seed: u64,
    /// Residual balancing for ADMM; off by default.
    pub adaptive_rho: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Admm,
            rho: 1.0,
            max_iterations: 25_000,
            eps_abs: 1e-5,
            eps_rel: 1e-5,
            grid_step: 1e-3,
            seed: 0,
            adaptive_rho: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.rho) {
            return Err(SolveError::InvalidConfig("rho must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(SolveError::InvalidConfig("max_iterations must be positive"));
        }
        if !positive(self.eps_abs) || !positive(self.eps_rel) {
            return Err(SolveError::InvalidConfig("tolerances must be positive"));
        }
        if !positive(self.grid_step) || self.grid_step > 1.0 {
            return Err(SolveError::InvalidConfig("grid_step must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// One value per entry of [`GroundProgram::variables`].
    pub assignment: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub converged: bool,
    /// Grid oracle only: whether every other visited lattice point is worse
    /// than the optimum by more than the grid step.
    pub unique: Option<bool>,
}

impl SolveResult {
    pub fn to_interpretation(&self, program: &GroundProgram) -> Result<Interpretation, SolveError> {
        let mut interp = Interpretation::new();
        for (atom, &v) in program.variables.iter().zip(&self.assignment) {
            interp.insert(atom.clone(), v)?;
        }
        Ok(interp)
    }
}

/// `sum(weight * max(l, 0)^p)`, or `+inf` when a hard constraint is violated
/// by more than [`HARD_TOLERANCE`].
pub fn objective(program: &GroundProgram, assignment: &[f64]) -> Result<f64, SolveError> {
    if assignment.len() != program.variables.len() {
        return Err(SolveError::AssignmentLength {
            expected: program.variables.len(),
            found: assignment.len(),
        });
    }
    if program
        .hard_constraints
        .iter()
        .any(|h| h.linear(assignment) > HARD_TOLERANCE)
    {
        return Ok(f64::INFINITY);
    }
    Ok(program
        .potentials
        .iter()
        .map(|p| p.weight * p.hinge(assignment))
        .sum())
}

/// [`objective`] for an interpretation covering every target variable.
pub fn objective_at(program: &GroundProgram, interp: &Interpretation) -> Result<f64, SolveError> {
    let assignment = program
        .variables
        .iter()
        .enumerate()
        .map(|(i, a)| interp.get(a).ok_or(SolveError::MissingVariable(i)))
        .collect::<Result<Vec<_>, _>>()?;
    objective(program, &assignment)
}

pub fn solve_map(program: &GroundProgram, config: &SolverConfig) -> Result<SolveResult, SolveError> {
    config.validate()?;
    let mut result = match config.method {
        Method::Admm => admm::solve(program, config),
        Method::ProjectedGradient => gradient::solve(program, config)?,
        Method::GridOracle => return grid::solve(program, config),
    };
    result.objective = objective(program, &result.assignment)?;
    if !result.objective.is_finite() {
        return Err(SolveError::NonFinite);
    }
    Ok(result)
}

/// Connected components of the variable/potential graph, each listed as
/// (variables, potentials, hard constraints) in increasing index order.
/// Components are ordered by their smallest variable; isolated variables
/// are omitted.
pub(crate) struct Component {
    pub variables: Vec<usize>,
    pub potentials: Vec<usize>,
    pub hard: Vec<usize>,
}

pub(crate) fn components(program: &GroundProgram) -> Vec<Component> {
    let n = program.variables.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let coefficient_lists = program
        .potentials
        .iter()
        .map(|p| &p.coefficients)
        .chain(program.hard_constraints.iter().map(|h| &h.coefficients));
    for coefs in coefficient_lists {
        if let Some(&(first, _)) = coefs.first() {
            for &(v, _) in &coefs[1..] {
                let (a, b) = (find(&mut parent, first), find(&mut parent, v));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut slot = alloc::vec![usize::MAX; n];
    let mut out: Vec<Component> = Vec::new();
    let mut used = alloc::vec![false; n];
    for c in program.potentials.iter().map(|p| &p.coefficients).chain(program.hard_constraints.iter().map(|h| &h.coefficients)) {
        for &(v, _) in c {
            used[v] = true;
        }
    }
    for v in (0..n).filter(|&v| used[v]) {
        let root = find(&mut parent, v);
        if slot[root] == usize::MAX {
            slot[root] = out.len();
            out.push(Component {
                variables: Vec::new(),
                potentials: Vec::new(),
                hard: Vec::new(),
            });
        }
        out[slot[root]].variables.push(v);
    }
    for (k, p) in program.potentials.iter().enumerate() {
        if let Some(&(v, _)) = p.coefficients.first() {
            let root = find(&mut parent, v);
            out[slot[root]].potentials.push(k);
        }
    }
    for (k, h) in program.hard_constraints.iter().enumerate() {
        if let Some(&(v, _)) = h.coefficients.first() {
            let root = find(&mut parent, v);
            out[slot[root]].hard.push(k);
        }
    }
    out
}
