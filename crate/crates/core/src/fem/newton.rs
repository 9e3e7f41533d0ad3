use std::sync::Arc;

use super::assembly::Assembler;
use super::{find_peaks, DiscreteSolution};
use crate::error::{Error, Result};
use crate::linalg::skyline::reverse_cuthill_mckee;
use crate::linalg::sparse::norm_inf;
use crate::linalg::{CsrMatrix, SkylineLdl};
use crate::mesh::Mesh;

#[derive(Debug, Clone)]
pub struct NewtonOptions {
    /// ∞-norm of the residual at which Newton stops
    pub tol: f64,
    pub max_iterations: usize,
    /// consecutive residual increases tolerated before giving up
    pub max_growth: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iterations: 60, max_growth: 5 }
    }
}

/// The discrete Gel'fand system on a fixed mesh. Caches the stiffness matrix,
/// the interior index set and a fill-reducing ordering.
#[derive(Debug, Clone)]
pub struct GelfandProblem {
    mesh: Arc<Mesh>,
    assembler: Assembler,
    stiffness: CsrMatrix,
    interior: Vec<usize>,
    ordering: Vec<usize>,
}

/// Factorization of the interior Jacobian `S − W` at some `(λ, u)`.
pub struct Linearization {
    pub jacobian: CsrMatrix,
    pub factor: SkylineLdl,
    /// interior load `b_i = λ ∫ e^u φ_i`
    pub load: Vec<f64>,
}

impl GelfandProblem {
    pub fn new(mesh: Arc<Mesh>) -> Result<Self> {
        let assembler = Assembler::new(&mesh);
        let stiffness = assembler.stiffness();
        let interior = mesh.interior_vertices();
        if interior.is_empty() {
            return Err(Error::InvalidMesh("mesh has no interior vertices".into()));
        }
        let (s_ii, _) = stiffness.principal_submatrix(&interior);
        let ordering = reverse_cuthill_mckee(&s_ii);
        Ok(Self { mesh, assembler, stiffness, interior, ordering })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn assembler(&self) -> &Assembler {
        &self.assembler
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn ordering(&self) -> &[usize] {
        &self.ordering
    }

    /// Interior residual `(S u − b)_I` and the load `b_I`.
    pub fn residual(&self, lambda: f64, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let nl = self.assembler.nonlinear(lambda, u);
        let su = self.stiffness.matvec(u);
        let f = self.interior.iter().map(|&i| su[i] - nl.load[i]).collect();
        let b = self.interior.iter().map(|&i| nl.load[i]).collect();
        (f, b)
    }

    /// Interior Jacobian `S_II − W_II` and its factorization.
    pub fn linearize(&self, lambda: f64, u: &[f64]) -> Result<Linearization> {
        let nl = self.assembler.nonlinear(lambda, u);
        let j_full = self.stiffness.axpy(-1.0, &nl.weighted_mass);
        let (jacobian, _) = j_full.principal_submatrix(&self.interior);
        let factor = SkylineLdl::factor_with_ordering(&jacobian, self.ordering.clone())?;
        let load = self.interior.iter().map(|&i| nl.load[i]).collect();
        Ok(Linearization { jacobian, factor, load })
    }

    fn scatter(&self, u: &mut [f64], du: &[f64], t: f64) {
        for (&i, d) in self.interior.iter().zip(du) {
            u[i] += t * d;
        }
    }

    pub fn finish(&self, lambda: f64, u: Vec<f64>, residual: f64, iterations: usize) -> DiscreteSolution {
        DiscreteSolution {
            lambda,
            mass: self.assembler.mass(lambda, &u),
            peaks: find_peaks(&self.mesh, &u),
            u,
            residual,
            iterations,
        }
    }

    fn zero_boundary(&self, u0: &[f64]) -> Result<Vec<f64>> {
        if u0.len() != self.mesh.n_vertices() {
            return Err(Error::InvalidInput(format!(
                "initial guess has {} entries, mesh has {} vertices",
                u0.len(),
                self.mesh.n_vertices()
            )));
        }
        let mut u = u0.to_vec();
        for (v, x) in u.iter_mut().enumerate() {
            if self.mesh.is_boundary(v) {
                *x = 0.0;
            }
        }
        Ok(u)
    }

    /// Newton iteration for fixed `λ`.
    pub fn solve(&self, lambda: f64, u0: &[f64], opts: &NewtonOptions) -> Result<DiscreteSolution> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
        }
        let mut u = self.zero_boundary(u0)?;
        let (mut f, _) = self.residual(lambda, &u);
        let mut norm = norm_inf(&f);
        let mut growth = 0;
        for it in 0..opts.max_iterations {
            if norm <= opts.tol {
                return Ok(self.finish(lambda, u, norm, it));
            }
            let lin = self.linearize(lambda, &u)?;
            let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
            let du = lin.factor.solve(&rhs);
            // halve the step while the residual grows, but accept the last try
            let mut t = 1.0;
            let mut trial = u.clone();
            let mut trial_f = Vec::new();
            let mut trial_norm = f64::INFINITY;
            for _ in 0..5 {
                trial.copy_from_slice(&u);
                self.scatter(&mut trial, &du, t);
                let (tf, _) = self.residual(lambda, &trial);
                trial_norm = norm_inf(&tf);
                trial_f = tf;
                if trial_norm < norm {
                    break;
                }
                t *= 0.5;
            }
            if !trial_norm.is_finite() {
                return Err(Error::NewtonDivergence { iterations: it + 1, residual: trial_norm });
            }
            growth = if trial_norm >= norm { growth + 1 } else { 0 };
            if growth >= opts.max_growth {
                return Err(Error::NewtonDivergence { iterations: it + 1, residual: trial_norm });
            }
            u = trial;
            f = trial_f;
            norm = trial_norm;
        }
        if norm <= opts.tol {
            return Ok(self.finish(lambda, u, norm, opts.max_iterations));
        }
        Err(Error::NewtonDivergence { iterations: opts.max_iterations, residual: norm })
    }

    /// Newton on the bordered system `{F(u, λ) = 0, u[peak] = s}` for the
    /// unknowns `(u, λ)`.
    pub fn solve_pinned(
        &self,
        s: f64,
        peak: usize,
        lambda0: f64,
        u0: &[f64],
        opts: &NewtonOptions,
    ) -> Result<DiscreteSolution> {
        if self.mesh.is_boundary(peak) {
            return Err(Error::InvalidInput("pinned vertex lies on the boundary".into()));
        }
        let p = self.interior.binary_search(&peak).expect("interior vertex");
        let mut u = self.zero_boundary(u0)?;
        let mut lambda = lambda0;
        let merit = |f: &[f64], u: &[f64]| norm_inf(f).max((u[peak] - s).abs());
        let (mut f, _) = self.residual(lambda, &u);
        let mut norm = merit(&f, &u);
        let mut growth = 0;
        for it in 0..opts.max_iterations {
            if norm <= opts.tol {
                return Ok(self.finish(lambda, u, norm_inf(&f), it));
            }
            let lin = self.linearize(lambda, &u)?;
            let neg_f: Vec<f64> = f.iter().map(|v| -v).collect();
            let x1 = lin.factor.solve(&neg_f);
            // ∂F/∂λ = −b/λ
            let l: Vec<f64> = lin.load.iter().map(|b| b / lambda).collect();
            let x2 = lin.factor.solve(&l);
            if x2[p] == 0.0 || !x2[p].is_finite() {
                return Err(Error::SingularMatrix { row: peak });
            }
            let dl = (s - u[peak] - x1[p]) / x2[p];
            let du: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a + dl * b).collect();

            let mut t = 1.0;
            let mut best = None;
            for _ in 0..8 {
                let lam = lambda + t * dl;
                if lam > 0.0 {
                    let mut trial = u.clone();
                    self.scatter(&mut trial, &du, t);
                    let (tf, _) = self.residual(lam, &trial);
                    let tn = merit(&tf, &trial);
                    let better = tn < norm;
                    best = Some((lam, trial, tf, tn));
                    if better {
                        break;
                    }
                }
                t *= 0.5;
            }
            let Some((lam, trial, tf, tn)) = best else {
                return Err(Error::NewtonDivergence { iterations: it + 1, residual: norm });
            };
            if !tn.is_finite() {
                return Err(Error::NewtonDivergence { iterations: it + 1, residual: tn });
            }
            growth = if tn >= norm { growth + 1 } else { 0 };
            if growth >= opts.max_growth {
                return Err(Error::NewtonDivergence { iterations: it + 1, residual: tn });
            }
            lambda = lam;
            u = trial;
            f = tf;
            norm = tn;
        }
        if norm <= opts.tol {
            return Ok(self.finish(lambda, u, norm_inf(&f), opts.max_iterations));
        }
        Err(Error::NewtonDivergence { iterations: opts.max_iterations, residual: norm })
    }
}

/// Solves the discrete Gel'fand problem at fixed `λ` from `u0`.
pub fn solve_newton(mesh: &Mesh, lambda: f64, u0: &[f64], tol: f64) -> Result<DiscreteSolution> {
    let problem = GelfandProblem::new(Arc::new(mesh.clone()))?;
    problem.solve(lambda, u0, &NewtonOptions { tol, ..NewtonOptions::default() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_solution_on_coarse_disk() {
        let mesh = Mesh::disk_uniform(64).unwrap();
        let sol = solve_newton(&mesh, 1.0, &vec![0.0; mesh.n_vertices()], 1e-10).unwrap();
        // exact: u(0) = log(8/δ²) with δ² = 3 + 2√2
        let exact = (8.0 / (3.0 + 2.0 * 2f64.sqrt())).ln();
        assert!((sol.peaks[0].value - exact).abs() < 0.02 * exact);
        assert!(sol.residual <= 1e-10);
        assert!(sol.u.iter().all(|&v| v >= -1e-8));
    }

    #[test]
    fn small_lambda_gives_small_solution() {
        let mesh = Mesh::disk_uniform(32).unwrap();
        let sol = solve_newton(&mesh, 1e-6, &vec![0.0; mesh.n_vertices()], 1e-12).unwrap();
        assert!(sol.max_value() < 1e-6);
        assert!(sol.mass < 1e-5);
    }

    #[test]
    fn pinned_solve_recovers_lambda() {
        let mesh = Arc::new(Mesh::disk_uniform(64).unwrap());
        let problem = GelfandProblem::new(Arc::clone(&mesh)).unwrap();
        let free = problem.solve(1.0, &vec![0.0; mesh.n_vertices()], &NewtonOptions::default()).unwrap();
        let peak = mesh.nearest_vertex(crate::Point2::ORIGIN);
        let pinned = problem
            .solve_pinned(free.u[peak], peak, 0.8, &vec![0.0; mesh.n_vertices()], &NewtonOptions::default())
            .unwrap();
        assert!((pinned.lambda - 1.0).abs() < 1e-8);
    }
}
