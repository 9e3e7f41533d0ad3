//! Continuation of solution branches in the peak height `s = u(x_peak)`.
//!
//! Parameterizing by `s` instead of `λ` passes through folds, where the
//! Jacobian `∂F/∂u` is singular but the bordered system is not.

use serde::Serialize;

use super::ansatz::{lambda_for_peak, liouville_ansatz};
use super::newton::{GelfandProblem, NewtonOptions};
use super::DiscreteSolution;
use crate::error::{Error, Result};
use crate::green::GreenEvaluator;
use crate::hamiltonian::{d_constants, Configuration};

#[derive(Debug, Clone)]
pub struct BranchOptions {
    pub newton: NewtonOptions,
    /// times a failed step may be split in half before giving up
    pub max_subdivisions: usize,
}

impl Default for BranchOptions {
    fn default() -> Self {
        Self { newton: NewtonOptions::default(), max_subdivisions: 4 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchPoint {
    pub s: f64,
    pub peak_vertex: usize,
    pub solution: DiscreteSolution,
    /// `dλ/ds` changes sign at this point
    pub fold: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fold {
    pub s: f64,
    pub lambda: f64,
}

fn check_increasing(s_values: &[f64]) -> Result<()> {
    if s_values.is_empty() {
        return Err(Error::InvalidInput("empty list of peak heights".into()));
    }
    if s_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("peak heights must be strictly increasing".into()));
    }
    Ok(())
}

struct Stepper<'a> {
    problem: &'a GelfandProblem,
    peak: usize,
    opts: &'a BranchOptions,
}

impl Stepper<'_> {
    /// Solves at `s` from the two most recent points, splitting the step on
    /// failure.
    fn advance(&self, prev: Option<(f64, &DiscreteSolution)>, last: (f64, &DiscreteSolution), s: f64, depth: usize) -> Result<DiscreteSolution> {
        let (s1, sol1) = last;
        let (lambda0, u0) = match prev {
            Some((s0, sol0)) => {
                let t = (s - s1) / (s1 - s0);
                let ll = sol1.lambda.ln() + t * (sol1.lambda.ln() - sol0.lambda.ln());
                let u: Vec<f64> = sol1.u.iter().zip(&sol0.u).map(|(a, b)| a + t * (a - b)).collect();
                (ll.exp(), u)
            }
            None => (sol1.lambda, sol1.u.clone()),
        };
        match self.problem.solve_pinned(s, self.peak, lambda0, &u0, &self.opts.newton) {
            Ok(sol) => Ok(sol),
            Err(e) if depth < self.opts.max_subdivisions => {
                let mid = 0.5 * (s1 + s);
                let half = self.advance(prev, last, mid, depth + 1).map_err(|_| e)?;
                self.advance(Some((s1, sol1)), (mid, &half), s, depth + 1)
            }
            Err(e) => Err(e),
        }
    }

    fn run(&self, first: DiscreteSolution, s_values: &[f64]) -> Result<Vec<BranchPoint>> {
        let mut sols = vec![first];
        for k in 1..s_values.len() {
            let prev = (k >= 2).then(|| (s_values[k - 2], &sols[k - 2]));
            let next = self.advance(prev, (s_values[k - 1], &sols[k - 1]), s_values[k], 0)?;
            sols.push(next);
        }
        let lambdas: Vec<f64> = sols.iter().map(|s| s.lambda).collect();
        Ok(sols
            .into_iter()
            .enumerate()
            .map(|(k, solution)| BranchPoint {
                s: s_values[k],
                peak_vertex: self.peak,
                fold: k > 0 && k + 1 < lambdas.len() && {
                    let (a, b) = (lambdas[k] - lambdas[k - 1], lambdas[k + 1] - lambdas[k]);
                    a * b < 0.0
                },
                solution,
            })
            .collect())
    }
}

/// Follows the branch emanating from the critical configuration `config`,
/// seeded by the multi-bubble ansatz at the first peak height. The tracked
/// peak is the vertex nearest `κ_1`.
pub fn continue_branch(
    problem: &GelfandProblem,
    ev: &GreenEvaluator,
    config: &Configuration,
    s_values: &[f64],
    opts: &BranchOptions,
) -> Result<Vec<BranchPoint>> {
    check_increasing(s_values)?;
    let mesh = problem.mesh();
    let d = d_constants(ev, config)?;
    let lambda0 = lambda_for_peak(d[0], s_values[0]);
    let u0 = liouville_ansatz(mesh, ev, config, &d, lambda0)?;
    let peak = mesh.nearest_vertex(config.points[0]);
    let first = problem
        .solve_pinned(s_values[0], peak, lambda0, &u0, &opts.newton)
        .map_err(|e| Error::AnsatzFailure(format!("first solve at s = {}: {e}", s_values[0])))?;
    Stepper { problem, peak, opts }.run(first, s_values)
}

/// Follows a branch from an existing solution, pinning `u` at `peak`.
pub fn continue_branch_from(
    problem: &GelfandProblem,
    start: &DiscreteSolution,
    peak: usize,
    s_values: &[f64],
    opts: &BranchOptions,
) -> Result<Vec<BranchPoint>> {
    check_increasing(s_values)?;
    let first = problem.solve_pinned(s_values[0], peak, start.lambda, &start.u, &opts.newton)?;
    Stepper { problem, peak, opts }.run(first, s_values)
}

/// Folds along a branch, each refined by a parabola through the three
/// samples around the sign change of `Δλ`.
pub fn locate_fold(points: &[BranchPoint]) -> Vec<Fold> {
    let mut out = Vec::new();
    for k in 1..points.len().saturating_sub(1) {
        if !points[k].fold {
            continue;
        }
        let (s0, s1, s2) = (points[k - 1].s, points[k].s, points[k + 1].s);
        let (l0, l1, l2) = (
            points[k - 1].solution.lambda,
            points[k].solution.lambda,
            points[k + 1].solution.lambda,
        );
        // Newton divided differences
        let f01 = (l1 - l0) / (s1 - s0);
        let f12 = (l2 - l1) / (s2 - s1);
        let f012 = (f12 - f01) / (s2 - s0);
        if f012 == 0.0 {
            out.push(Fold { s: s1, lambda: l1 });
            continue;
        }
        // p(s) = l0 + f01 (s − s0) + f012 (s − s0)(s − s1)
        let s_star = 0.5 * (s0 + s1) - f01 / (2.0 * f012);
        let lambda = l0 + f01 * (s_star - s0) + f012 * (s_star - s0) * (s_star - s1);
        out.push(Fold { s: s_star, lambda });
    }
    out
}
