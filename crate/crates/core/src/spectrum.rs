//! Linearized eigenproblem `−Δv = μ λ e^u v` at a discrete solution, Morse
//! indices, and the small-`λ` laws of the eigenvalues along a blow-up branch.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{BranchPoint, DiscreteSolution, GelfandProblem};
use crate::hamiltonian::HamiltonianReport;
use crate::linalg::sparse::{dot, norm2};
use crate::linalg::{krylov_eigenpairs, KrylovOptions, Select, SkylineLdl};

/// `μ` within this distance above 1 counts toward the augmented index.
pub const AUGMENTED_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub lambda: f64,
    /// ascending
    pub mu: Vec<f64>,
    /// vertex vectors with `max v = ‖v‖_∞ = 1`, zero on the boundary
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub eigenvectors: Vec<Vec<f64>>,
    /// `‖S v − μ W v‖ / ‖S v‖` per pair
    pub residuals: Vec<f64>,
    /// `#{μ < 1}`
    pub morse_index: usize,
    /// `#{μ ≤ 1 + tol}`
    pub augmented_morse_index: usize,
    /// negative inertia of `S − W`, when that matrix could be factored
    pub inertia_below_one: Option<usize>,
}

impl SpectrumReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "lambda": self.lambda,
            "mu": self.mu,
            "morse_index": self.morse_index,
            "augmented_index": self.augmented_morse_index,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Law {
    /// `μ ≈ c / (−2 log λ)`, expected `c = 1`
    InverseLog,
    /// `μ ≈ 1 + c λ`, expected `c = −48π η`
    LinearInLambda,
}

impl Law {
    pub fn name(self) -> &'static str {
        match self {
            Law::InverseLog => "inverse-log",
            Law::LinearInLambda => "linear-in-lambda",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticFit {
    /// 1-based eigenvalue index
    pub k: usize,
    pub law: Law,
    /// least-squares coefficient over the samples
    pub coefficient: f64,
    pub expected: f64,
    /// max relative deviation of the fitted law from the samples
    pub residual: f64,
    pub sample_lambdas: Vec<f64>,
    /// the scaled quantity at each sample: `μ(−2 log λ)` or `(μ − 1)/λ`
    pub sample_values: Vec<f64>,
}

impl AsymptoticFit {
    pub fn relative_error(&self) -> f64 {
        ((self.coefficient - self.expected) / self.expected).abs()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Theorem2Fits {
    pub fits: Vec<AsymptoticFit>,
    /// `μ^{3m+1} > 1` at every sample
    pub upper_above_one: bool,
}

impl Theorem2Fits {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,law,coefficient,residual\n");
        for f in &self.fits {
            let _ = writeln!(out, "{},{},{:.10e},{:.3e}", f.k, f.law.name(), f.coefficient, f.residual);
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexVerdict {
    pub m: usize,
    pub index: usize,
    pub augmented_index: usize,
    pub hamiltonian_index: usize,
    pub hamiltonian_augmented_index: usize,
    /// `m + ind(−H) ≤ ind(u)`
    pub lower: bool,
    /// `ind*(u) ≤ m + ind*(−H)`
    pub upper: bool,
    /// `ind(u) = m + ind(−H)`, checked only at non-degenerate points
    pub equality: Option<bool>,
    /// `m ≤ ind(u) ≤ ind*(u) ≤ 3m`
    pub universal: bool,
}

impl IndexVerdict {
    pub fn all_hold(&self) -> bool {
        self.lower && self.upper && self.universal && self.equality.unwrap_or(true)
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumOptions {
    pub krylov: KrylovOptions,
    pub keep_vectors: bool,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self { krylov: KrylovOptions { tol: 1e-9, ..KrylovOptions::default() }, keep_vectors: true }
    }
}

/// Lowest `k` eigenpairs of `S_II v = μ W_II v` with `W` the `λe^u`-weighted
/// mass matrix, by shift-invert at 0. The count below 1 is cross-checked with
/// the inertia of `S − W`.
pub fn linearized_spectrum(
    problem: &GelfandProblem,
    sol: &DiscreteSolution,
    k: usize,
    opts: &SpectrumOptions,
) -> Result<SpectrumReport> {
    let interior = problem.interior();
    if k == 0 || k > interior.len() {
        return Err(Error::TooManyEigenpairs { requested: k, available: interior.len() });
    }
    let nl = problem.assembler().nonlinear(sol.lambda, &sol.u);
    let (w, _) = nl.weighted_mass.principal_submatrix(interior);
    let (s, _) = problem.stiffness().principal_submatrix(interior);
    let s_factor = SkylineLdl::factor_with_ordering(&s, problem.ordering().to_vec())?;
    let op = |x: &[f64]| s_factor.solve(&w.matvec(x));
    let mut kopts = opts.krylov.clone();
    kopts.block = kopts.block.max(4);
    let pairs = krylov_eigenpairs(&s, &w, op, k, Select::Lowest, &kopts)?;
    if let Some(&bad) = pairs.values.iter().find(|&&mu| !(mu > 0.0)) {
        return Err(Error::EigenBreakdown(format!("non-positive eigenvalue {bad:e}")));
    }

    let inertia_below_one = match SkylineLdl::factor_with_ordering(&s.axpy(-1.0, &w), problem.ordering().to_vec()) {
        Ok(f) => Some(f.inertia().0),
        Err(Error::SingularMatrix { .. }) => None,
        Err(e) => return Err(e),
    };
    let morse_index = pairs.values.iter().filter(|&&mu| mu < 1.0).count();
    let augmented_morse_index = pairs.values.iter().filter(|&&mu| mu <= 1.0 + AUGMENTED_TOL).count();
    if let Some(count) = inertia_below_one {
        if morse_index < k && count != morse_index {
            return Err(Error::EigenBreakdown(format!(
                "{morse_index} computed eigenvalues below 1 but the inertia of S − W gives {count}"
            )));
        }
    }

    let n = problem.mesh().n_vertices();
    let eigenvectors = if opts.keep_vectors {
        pairs
            .vectors
            .iter()
            .map(|x| {
                let (imax, _) = x
                    .iter()
                    .enumerate()
                    .fold((0, 0.0), |acc, (i, &v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
                let scale = 1.0 / x[imax];
                let mut full = vec![0.0; n];
                for (&vtx, &v) in interior.iter().zip(x) {
                    full[vtx] = v * scale;
                }
                full
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(SpectrumReport {
        lambda: sol.lambda,
        mu: pairs.values,
        eigenvectors,
        residuals: pairs.residuals,
        morse_index,
        augmented_morse_index,
        inertia_below_one,
    })
}

/// Richardson extrapolation of two spectra of the same branch point computed
/// on meshes whose sizes differ by a factor 2 (second-order convergence).
/// Indices are recounted from the extrapolated eigenvalues; vectors and
/// `λ` come from the fine spectrum.
pub fn extrapolate(coarse: &SpectrumReport, fine: &SpectrumReport) -> Result<SpectrumReport> {
    if coarse.mu.len() != fine.mu.len() {
        return Err(Error::InvalidInput(format!(
            "spectra have {} and {} eigenvalues",
            coarse.mu.len(),
            fine.mu.len()
        )));
    }
    let mu: Vec<f64> = coarse.mu.iter().zip(&fine.mu).map(|(c, f)| (4.0 * f - c) / 3.0).collect();
    Ok(SpectrumReport {
        lambda: fine.lambda,
        morse_index: mu.iter().filter(|&&v| v < 1.0).count(),
        augmented_morse_index: mu.iter().filter(|&&v| v <= 1.0 + AUGMENTED_TOL).count(),
        mu,
        eigenvectors: fine.eigenvectors.clone(),
        residuals: fine.residuals.clone(),
        inertia_below_one: fine.inertia_below_one,
    })
}

/// Largest `|vᵢᵀ S vⱼ| / √(vᵢᵀ S vᵢ · vⱼᵀ S vⱼ)` over distinct eigenvectors.
pub fn stiffness_orthogonality(problem: &GelfandProblem, report: &SpectrumReport) -> f64 {
    let s = problem.stiffness();
    let sv: Vec<Vec<f64>> = report.eigenvectors.iter().map(|v| s.matvec(v)).collect();
    let mut worst: f64 = 0.0;
    for i in 0..sv.len() {
        for j in i + 1..sv.len() {
            let num = dot(&report.eigenvectors[i], &sv[j]).abs();
            let den = (dot(&report.eigenvectors[i], &sv[i]) * dot(&report.eigenvectors[j], &sv[j])).sqrt();
            worst = worst.max(num / den);
        }
    }
    worst
}

/// `‖S v − μ W v‖ / ‖v‖` for each pair, on interior rows.
pub fn absolute_residuals(problem: &GelfandProblem, sol: &DiscreteSolution, report: &SpectrumReport) -> Vec<f64> {
    let nl = problem.assembler().nonlinear(sol.lambda, &sol.u);
    report
        .eigenvectors
        .iter()
        .zip(&report.mu)
        .map(|(v, &mu)| {
            let sv = problem.stiffness().matvec(v);
            let wv = nl.weighted_mass.matvec(v);
            let r: Vec<f64> = problem.interior().iter().map(|&i| sv[i] - mu * wv[i]).collect();
            norm2(&r) / norm2(v)
        })
        .collect()
}

fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let c = dot(x, y) / dot(x, x);
    let residual = x.iter().zip(y).map(|(&xi, &yi)| ((yi - c * xi) / (c * xi)).abs()).fold(0.0, f64::max);
    (c, residual)
}

/// Fits the first `m` eigenvalues to `c/(−2 log λ)` and the next `2m` to
/// `1 + cλ`, matching `μ^{m+i}` with the `i`-th largest `η`.
pub fn verify_theorem2(branch: &[BranchPoint], reports: &[SpectrumReport], eta: &[f64]) -> Result<Theorem2Fits> {
    let m = eta.len() / 2;
    if m == 0 || eta.len() != 2 * m {
        return Err(Error::InvalidInput(format!("expected 2m scaled Hessian eigenvalues, got {}", eta.len())));
    }
    if branch.len() != reports.len() {
        return Err(Error::InvalidInput(format!("{} branch points but {} spectra", branch.len(), reports.len())));
    }
    if branch.len() < 3 {
        return Err(Error::InsufficientSamples(format!("{} samples, at least 3 are needed", branch.len())));
    }
    for (b, r) in branch.iter().zip(reports) {
        if b.solution.peaks.len() != m {
            return Err(Error::MismatchedBranch(format!(
                "solution at s = {} has {} peaks, expected {m}",
                b.s,
                b.solution.peaks.len()
            )));
        }
        if r.mu.len() < 3 * m + 1 {
            return Err(Error::InsufficientSamples(format!("{} eigenvalues, need {}", r.mu.len(), 3 * m + 1)));
        }
        if (r.lambda - b.solution.lambda).abs() > 1e-12 * b.solution.lambda {
            return Err(Error::MismatchedBranch(format!("spectrum at λ = {} paired with λ = {}", r.lambda, b.solution.lambda)));
        }
    }
    let mut sorted_eta = eta.to_vec();
    sorted_eta.sort_by(f64::total_cmp);
    let lambdas: Vec<f64> = reports.iter().map(|r| r.lambda).collect();

    let mut fits = Vec::with_capacity(3 * m);
    for k in 1..=m {
        let x: Vec<f64> = lambdas.iter().map(|l| 1.0 / (-2.0 * l.ln())).collect();
        let y: Vec<f64> = reports.iter().map(|r| r.mu[k - 1]).collect();
        let (c, residual) = least_squares(&x, &y);
        fits.push(AsymptoticFit {
            k,
            law: Law::InverseLog,
            coefficient: c,
            expected: 1.0,
            residual,
            sample_lambdas: lambdas.clone(),
            sample_values: y.iter().zip(&x).map(|(yi, xi)| yi / xi).collect(),
        });
    }
    for i in 1..=2 * m {
        let k = m + i;
        let y: Vec<f64> = reports.iter().map(|r| r.mu[k - 1] - 1.0).collect();
        let (c, residual) = least_squares(&lambdas, &y);
        fits.push(AsymptoticFit {
            k,
            law: Law::LinearInLambda,
            coefficient: c,
            expected: -48.0 * std::f64::consts::PI * sorted_eta[2 * m - i],
            residual,
            sample_lambdas: lambdas.clone(),
            sample_values: y.iter().zip(&lambdas).map(|(yi, l)| yi / l).collect(),
        });
    }
    let upper_above_one = reports.iter().all(|r| r.mu[3 * m] > 1.0);
    Ok(Theorem2Fits { fits, upper_above_one })
}

/// Compares the Morse indices of a blow-up solution with those of `−H^m` at
/// the matching critical point.
pub fn index_inequalities(report: &SpectrumReport, hreport: &HamiltonianReport, m: usize) -> IndexVerdict {
    let (ind, ind_star) = (report.morse_index, report.augmented_morse_index);
    let (h, h_star) = (hreport.morse_index_neg, hreport.augmented_morse_index_neg);
    IndexVerdict {
        m,
        index: ind,
        augmented_index: ind_star,
        hamiltonian_index: h,
        hamiltonian_augmented_index: h_star,
        lower: m + h <= ind,
        upper: ind_star <= m + h_star,
        equality: (!hreport.degenerate).then_some(ind == m + h),
        universal: m <= ind && ind <= ind_star && ind_star <= 3 * m,
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::fem::NewtonOptions;
    use crate::mesh::Mesh;

    fn minimal(n: usize, lambda: f64) -> (GelfandProblem, DiscreteSolution) {
        let mesh = Arc::new(Mesh::disk_uniform(n).unwrap());
        let p = GelfandProblem::new(mesh.clone()).unwrap();
        let sol = p.solve(lambda, &vec![0.0; mesh.n_vertices()], &NewtonOptions::default()).unwrap();
        (p, sol)
    }

    #[test]
    fn minimal_solution_is_stable() {
        let (p, sol) = minimal(48, 1.0);
        let r = linearized_spectrum(&p, &sol, 5, &SpectrumOptions::default()).unwrap();
        assert!(r.mu[0] > 1.0);
        assert_eq!(r.morse_index, 0);
        assert_eq!(r.inertia_below_one, Some(0));
        assert!(r.mu.windows(2).all(|w| w[0] <= w[1]));
        assert!(stiffness_orthogonality(&p, &r) < 1e-6);
        let v1 = &r.eigenvectors[0];
        assert!(v1.iter().all(|&v| v >= -1e-10));
        assert!((v1.iter().copied().fold(f64::MIN, f64::max) - 1.0).abs() < 1e-14);
        // second and third are the rotated pair
        assert!((r.mu[1] - r.mu[2]).abs() < 0.02 * r.mu[1]);
    }

    #[test]
    fn tiny_lambda_recovers_dirichlet_ratio() {
        // λ → 0: u → 0, so μ λ approaches the Dirichlet eigenvalue j₀₁²
        let (p, sol) = minimal(64, 1e-6);
        let r = linearized_spectrum(&p, &sol, 3, &SpectrumOptions::default()).unwrap();
        let j01 = 2.404_825_557_695_773_f64;
        assert!((r.mu[0] * 1e-6 / (j01 * j01) - 1.0).abs() < 5e-3);
    }

    #[test]
    fn too_many_pairs() {
        let (p, sol) = minimal(16, 0.5);
        let n = p.interior().len();
        assert!(matches!(
            linearized_spectrum(&p, &sol, n + 1, &SpectrumOptions::default()),
            Err(Error::TooManyEigenpairs { .. })
        ));
    }

    #[test]
    fn inverse_log_fit_is_exact_on_model_data() {
        let (x, y): (Vec<f64>, Vec<f64>) = [1e-2, 1e-3, 1e-4].iter().map(|l: &f64| (1.0 / (-2.0 * l.ln()), 0.9 / (-2.0 * l.ln()))).unzip();
        let (c, r) = least_squares(&x, &y);
        assert!((c - 0.9).abs() < 1e-14 && r < 1e-14);
    }
}
