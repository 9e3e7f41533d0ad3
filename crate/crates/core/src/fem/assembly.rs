//! P1 assembly of the stiffness matrix and of the `λe^u` terms.

use crate::geometry::Point2;
use crate::linalg::quadrature::TRIANGLE_ORDER2;
use crate::linalg::CsrMatrix;
use crate::mesh::Mesh;

/// Per-triangle geometry cached for repeated assembly.
#[derive(Debug, Clone)]
pub struct Assembler {
    triangles: Vec<[usize; 3]>,
    areas: Vec<f64>,
    grads: Vec<[Point2; 3]>,
    pattern: CsrMatrix,
}

/// Result of assembling the nonlinear term at a given `(λ, u)`.
#[derive(Debug, Clone)]
pub struct Nonlinear {
    /// `b_i = λ ∫ e^u φ_i`
    pub load: Vec<f64>,
    /// `W_ij = λ ∫ e^u φ_i φ_j`
    pub weighted_mass: CsrMatrix,
    /// `λ ∫ e^u`
    pub mass: f64,
}

impl Assembler {
    pub fn new(mesh: &Mesh) -> Self {
        let triangles = mesh.triangles().to_vec();
        let mut areas = Vec::with_capacity(triangles.len());
        let mut grads = Vec::with_capacity(triangles.len());
        for t in 0..triangles.len() {
            let p = mesh.triangle_points(t);
            let area = mesh.area(t);
            // ∇φ_i = perp(opposite edge) / (2·area), pointing into the triangle
            let g = |i: usize| {
                let e = p[(i + 2) % 3] - p[(i + 1) % 3];
                Point2::new(-e.y, e.x) * (1.0 / (2.0 * area))
            };
            areas.push(area);
            grads.push([g(0), g(1), g(2)]);
        }
        let pattern = CsrMatrix::from_elements(mesh.n_vertices(), &triangles);
        Self { triangles, areas, grads, pattern }
    }

    pub fn n(&self) -> usize {
        self.pattern.n()
    }

    pub fn pattern(&self) -> &CsrMatrix {
        &self.pattern
    }

    pub fn stiffness(&self) -> CsrMatrix {
        let mut s = self.pattern.clone();
        for ((tri, &area), g) in self.triangles.iter().zip(&self.areas).zip(&self.grads) {
            for i in 0..3 {
                for j in 0..3 {
                    s.add(tri[i], tri[j], area * g[i].dot(g[j]));
                }
            }
        }
        s
    }

    /// Consistent mass matrix, load and total for the weight `weight(u_q)`
    /// evaluated at each quadrature point.
    fn weighted(&self, u: &[f64], weight: impl Fn(f64) -> f64) -> Nonlinear {
        let mut w_mat = self.pattern.clone();
        let mut load = vec![0.0; self.n()];
        let mut mass = 0.0;
        for (tri, &area) in self.triangles.iter().zip(&self.areas) {
            for (bary, wq) in TRIANGLE_ORDER2 {
                let uq = bary[0] * u[tri[0]] + bary[1] * u[tri[1]] + bary[2] * u[tri[2]];
                let f = weight(uq) * wq * area;
                mass += f;
                for i in 0..3 {
                    load[tri[i]] += f * bary[i];
                    for j in 0..3 {
                        w_mat.add(tri[i], tri[j], f * bary[i] * bary[j]);
                    }
                }
            }
        }
        Nonlinear { load, weighted_mass: w_mat, mass }
    }

    /// Load, weighted mass matrix and total mass of `λe^u`.
    pub fn nonlinear(&self, lambda: f64, u: &[f64]) -> Nonlinear {
        self.weighted(u, |uq| lambda * uq.exp())
    }

    /// Consistent (unweighted) mass matrix.
    pub fn mass_matrix(&self) -> CsrMatrix {
        self.weighted(&vec![0.0; self.n()], |_| 1.0).weighted_mass
    }

    /// `λ ∫ e^u` by the same quadrature used in the load.
    pub fn mass(&self, lambda: f64, u: &[f64]) -> f64 {
        let mut total = 0.0;
        for (tri, &area) in self.triangles.iter().zip(&self.areas) {
            for (bary, wq) in TRIANGLE_ORDER2 {
                let uq = bary[0] * u[tri[0]] + bary[1] * u[tri[1]] + bary[2] * u[tri[2]];
                total += lambda * uq.exp() * wq * area;
            }
        }
        total
    }

    /// Error indicator `λ e^u h_T²` per triangle, with `e^u` averaged over the
    /// quadrature points and `h_T` the longest edge.
    pub fn indicators(&self, mesh: &Mesh, lambda: f64, u: &[f64]) -> Vec<f64> {
        (0..self.triangles.len())
            .map(|t| {
                let tri = self.triangles[t];
                let avg: f64 = TRIANGLE_ORDER2
                    .iter()
                    .map(|(b, w)| w * (b[0] * u[tri[0]] + b[1] * u[tri[1]] + b[2] * u[tri[2]]).exp())
                    .sum();
                let h = mesh.diameter_of(t);
                lambda * avg * h * h
            })
            .collect()
    }
}
