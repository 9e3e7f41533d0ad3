//! Adaptive longest-edge refinement driven by `λ e^u h_T²`.

use super::assembly::Assembler;
use super::DiscreteSolution;
use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::mesh::{Mesh, Refined};

/// Indicator threshold relative to the median.
pub const MEDIAN_FACTOR: f64 = 4.0;

/// Triangles whose indicator exceeds [`MEDIAN_FACTOR`] times the median.
pub fn mark(mesh: &Mesh, sol: &DiscreteSolution) -> (Vec<bool>, Vec<f64>) {
    let eta = Assembler::new(mesh).indicators(mesh, sol.lambda, &sol.u);
    let mut sorted = eta.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    let marked = eta.iter().map(|&e| e > MEDIAN_FACTOR * median).collect();
    (marked, eta)
}

/// Refines where the solution concentrates, keeping the mesh conforming and
/// at most `budget` vertices. Boundary midpoints go through `project`.
pub fn refine_with(
    mesh: &Mesh,
    sol: &DiscreteSolution,
    budget: usize,
    project: Option<&dyn Fn(Point2) -> Point2>,
) -> Result<Refined> {
    if sol.u.len() != mesh.n_vertices() {
        return Err(Error::InvalidInput("solution does not live on this mesh".into()));
    }
    if mesh.n_vertices() >= budget {
        return Err(Error::BudgetExceeded { budget, vertices: mesh.n_vertices() });
    }
    let (mut marked, eta) = mark(mesh, sol);
    let room = budget - mesh.n_vertices();
    if mesh.bisection_cost(&marked) > room {
        // keep the largest indicators that still fit
        let mut order: Vec<usize> = (0..eta.len()).filter(|&t| marked[t]).collect();
        order.sort_by(|&a, &b| eta[b].total_cmp(&eta[a]));
        let (mut lo, mut hi) = (0, order.len());
        let subset = |k: usize| {
            let mut m = vec![false; eta.len()];
            for &t in &order[..k] {
                m[t] = true;
            }
            m
        };
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if mesh.bisection_cost(&subset(mid)) <= room {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        marked = subset(lo);
    }
    mesh.bisect_marked(&marked, project)
}

/// [`refine_with`] without boundary projection.
pub fn refine(mesh: &Mesh, sol: &DiscreteSolution, budget: usize) -> Result<Refined> {
    refine_with(mesh, sol, budget, None)
}
