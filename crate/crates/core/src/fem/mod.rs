//! P1 finite elements for `−Δu = λe^u` with `u = 0` on the boundary:
//! Newton solves, continuation in the peak height, the multi-bubble initial
//! guess and adaptive refinement.

pub mod ansatz;
pub mod assembly;
pub mod continuation;
pub mod newton;
pub mod refine;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geometry::Point2;
use crate::mesh::Mesh;

pub use ansatz::liouville_ansatz;
pub use continuation::{continue_branch, continue_branch_from, locate_fold, BranchOptions, BranchPoint, Fold};
pub use newton::{solve_newton, GelfandProblem, NewtonOptions};
pub use refine::refine;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub vertex: usize,
    pub position: Point2,
    pub value: f64,
}

/// A converged discrete solution `(λ, u_h)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiscreteSolution {
    pub lambda: f64,
    /// vertex values, zero on boundary vertices
    pub u: Vec<f64>,
    /// local maxima, highest first
    pub peaks: Vec<Peak>,
    /// `λ ∫ e^u`
    pub mass: f64,
    /// ∞-norm of the discrete residual at convergence
    pub residual: f64,
    pub iterations: usize,
}

impl DiscreteSolution {
    pub fn max_value(&self) -> f64 {
        self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV body `vertex,x,y,u` and the JSON metadata for its header line.
    pub fn to_csv(&self, mesh: &Mesh) -> (serde_json::Value, String) {
        let meta = serde_json::json!({
            "lambda": self.lambda,
            "mass": self.mass,
            "peaks": self.peaks,
        });
        let mut body = String::from("vertex,x,y,u\n");
        for (i, (p, u)) in mesh.vertices().iter().zip(&self.u).enumerate() {
            let _ = writeln!(body, "{i},{:.12e},{:.12e},{:.12e}", p.x, p.y, u);
        }
        (meta, body)
    }
}

/// Interior vertices whose value strictly exceeds all neighbours.
pub fn find_peaks(mesh: &Mesh, u: &[f64]) -> Vec<Peak> {
    let n = mesh.n_vertices();
    let mut is_max: Vec<bool> = (0..n).map(|v| !mesh.is_boundary(v)).collect();
    for tri in mesh.triangles() {
        for i in 0..3 {
            for j in 0..3 {
                if i != j && u[tri[j]] >= u[tri[i]] {
                    is_max[tri[i]] = false;
                }
            }
        }
    }
    let mut peaks: Vec<Peak> = (0..n)
        .filter(|&v| is_max[v])
        .map(|v| Peak { vertex: v, position: mesh.vertices()[v], value: u[v] })
        .collect();
    peaks.sort_by(|a, b| b.value.total_cmp(&a.value));
    peaks
}

/// Scale `δ` of the best-fitting bubble `u(p) − 2 log(1 + |x − p|²/(8δ²))`
/// around the vertex `peak`, by least squares in `|x − p|²` over vertices
/// within `radius`.
pub fn fit_bubble_scale(mesh: &Mesh, u: &[f64], peak: usize, radius: f64) -> Option<f64> {
    let p = mesh.vertices()[peak];
    let s = u[peak];
    let (mut num, mut den) = (0.0, 0.0);
    for (v, &x) in mesh.vertices().iter().enumerate() {
        let r2 = x.dist(p).powi(2);
        if v == peak || r2 > radius * radius {
            continue;
        }
        let y = ((s - u[v]) / 2.0).exp() - 1.0;
        num += y * r2;
        den += r2 * r2;
    }
    (num > 0.0).then(|| (den / (8.0 * num)).sqrt())
}
