//! The entire bubble `U = −2 log(1 + |x|²/8)` on the plane: spectrum of
//! `−ΔV = α e^U V`, its low modes, the weighted moments of `U`, `∇U`,
//! `Ū = x·∇U + 2`, and the decay estimates.
//!
//! Each Fourier sector `V = f(r) e^{iℓθ}` reduces to the radial pencil
//! `∫ (f'g' + ℓ²fg/r²) r dr = α ∫ e^U f g r dr`, discretized with P1 elements on
//! `r_i = sinh(i h)` and truncated at `R_T` with a natural (zero-flux) outer
//! condition. Eigenvalues come from Sturm counts of the tridiagonal pencil.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::quadrature::{composite_gauss, gauss_legendre};

pub fn bubble(r: f64) -> f64 {
    -2.0 * (1.0 + r * r / 8.0).ln()
}

/// `e^U`
pub fn bubble_weight(r: f64) -> f64 {
    (1.0 + r * r / 8.0).powi(-2)
}

/// `U'(r)`; `U_α = U'(r) x_α / r`.
pub fn bubble_slope(r: f64) -> f64 {
    -0.5 * r / (1.0 + r * r / 8.0)
}

/// `Ū = r U'(r) + 2`
pub fn bubble_dilation(r: f64) -> f64 {
    (2.0 - r * r / 4.0) / (1.0 + r * r / 8.0)
}

/// Radial P1 discretization of one Fourier sector.
#[derive(Debug, Clone)]
pub struct SectorProblem {
    pub sector: usize,
    /// nodes, `r_0 = 0` included
    pub grid: Vec<f64>,
    /// index of the first unknown node (1 when `f(0) = 0` is imposed)
    first: usize,
    k_diag: Vec<f64>,
    k_off: Vec<f64>,
    m_diag: Vec<f64>,
    m_off: Vec<f64>,
}

/// `r_i = sinh(i·asinh(R_T)/n)`, `i = 0..=n`: spacing `≈ h` near the origin
/// and ratio `≈ e^h` far out.
pub fn radial_grid(r_t: f64, n: usize) -> Vec<f64> {
    let h = r_t.asinh() / n as f64;
    (0..=n).map(|i| (i as f64 * h).sinh()).collect()
}

impl SectorProblem {
    pub fn new(sector: usize, grid: Vec<f64>) -> Self {
        let n = grid.len();
        let (gx, gw) = gauss_legendre(4);
        let l2 = (sector * sector) as f64;
        let mut k_diag = vec![0.0; n];
        let mut k_off = vec![0.0; n - 1];
        let mut m_diag = vec![0.0; n];
        let mut m_off = vec![0.0; n - 1];
        for e in 0..n - 1 {
            let (a, b) = (grid[e], grid[e + 1]);
            let h = b - a;
            let grad = 0.5 * (a + b) / h;
            k_diag[e] += grad;
            k_diag[e + 1] += grad;
            k_off[e] -= grad;
            for (t, w) in gx.iter().zip(&gw) {
                let s = 0.5 * (1.0 + t);
                let r = a + s * h;
                let (p0, p1) = (1.0 - s, s);
                let wq = 0.5 * w * h;
                // ℓ²/r² · r, finite for ℓ ≥ 1 since f(0) = 0 there
                let c = if sector > 0 { wq * l2 / r } else { 0.0 };
                let mw = wq * bubble_weight(r) * r;
                k_diag[e] += c * p0 * p0;
                k_diag[e + 1] += c * p1 * p1;
                k_off[e] += c * p0 * p1;
                m_diag[e] += mw * p0 * p0;
                m_diag[e + 1] += mw * p1 * p1;
                m_off[e] += mw * p0 * p1;
            }
        }
        Self { sector, grid, first: usize::from(sector > 0), k_diag, k_off, m_diag, m_off }
    }

    pub fn dimension(&self) -> usize {
        self.grid.len() - self.first
    }

    /// Number of eigenvalues strictly below `alpha`.
    pub fn count_below(&self, alpha: f64) -> usize {
        let mut count = 0;
        let mut d_prev = 0.0;
        for i in self.first..self.grid.len() {
            let a = self.k_diag[i] - alpha * self.m_diag[i];
            let d = if i == self.first {
                a
            } else {
                let b = self.k_off[i - 1] - alpha * self.m_off[i - 1];
                let prev = if d_prev == 0.0 { f64::EPSILON * b.abs().max(1e-300) } else { d_prev };
                a - b * b / prev
            };
            if d < 0.0 {
                count += 1;
            }
            d_prev = d;
        }
        count
    }

    /// The `j`-th eigenvalue (0-based) by bisection.
    pub fn eigenvalue(&self, j: usize, upper: f64) -> f64 {
        let (mut lo, mut hi) = (-1e-3, upper);
        while self.count_below(hi) <= j {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * hi.abs().max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// All eigenvalues below `alpha_max`.
    pub fn eigenvalues_below(&self, alpha_max: f64) -> Vec<f64> {
        (0..self.count_below(alpha_max)).map(|j| self.eigenvalue(j, alpha_max)).collect()
    }

    /// Eigenvector for a computed eigenvalue by inverse iteration, as nodal
    /// values on the full grid.
    pub fn eigenvector(&self, alpha: f64) -> Vec<f64> {
        let n = self.dimension();
        let shift = alpha - 1e-7 * alpha.abs().max(1e-3);
        let off = |i: usize| self.k_off[self.first + i] - shift * self.m_off[self.first + i];
        let diag = |i: usize| self.k_diag[self.first + i] - shift * self.m_diag[self.first + i];
        let mut x = vec![1.0; n];
        for _ in 0..4 {
            // right-hand side M x
            let mut rhs = vec![0.0; n];
            for i in 0..n {
                let g = self.first + i;
                rhs[i] = self.m_diag[g] * x[i];
                if i > 0 {
                    rhs[i] += self.m_off[g - 1] * x[i - 1];
                }
                if i + 1 < n {
                    rhs[i] += self.m_off[g] * x[i + 1];
                }
            }
            x = thomas(n, &diag, &off, &rhs);
            let scale = x.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            x.iter_mut().for_each(|v| *v /= scale);
        }
        let mut full = vec![0.0; self.grid.len()];
        full[self.first..].copy_from_slice(&x);
        normalize_positive_max(&mut full);
        full
    }

    /// `∫ f g e^U r dr` in the discrete mass matrix.
    pub fn weighted_inner(&self, f: &[f64], g: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.grid.len() {
            s += self.m_diag[i] * f[i] * g[i];
            if i + 1 < self.grid.len() {
                s += self.m_off[i] * (f[i] * g[i + 1] + f[i + 1] * g[i]);
            }
        }
        s
    }
}

fn thomas(n: usize, diag: &dyn Fn(usize) -> f64, off: &dyn Fn(usize) -> f64, rhs: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = diag(0);
    c[0] = if n > 1 { off(0) / beta } else { 0.0 };
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = diag(i) - off(i - 1) * c[i - 1];
        if i + 1 < n {
            c[i] = off(i) / beta;
        }
        d[i] = (rhs[i] - off(i - 1) * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    d
}

fn normalize_positive_max(v: &mut [f64]) {
    let (mut best, mut idx) = (0.0, 0);
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best {
            best = x.abs();
            idx = i;
        }
    }
    if best > 0.0 {
        let s = 1.0 / v[idx];
        v.iter_mut().for_each(|x| *x *= s);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitEigenvalue {
    pub alpha: f64,
    pub multiplicity: usize,
    pub sectors: Vec<usize>,
    /// change of `alpha` when `R_T` is doubled
    pub truncation_shift: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitSpectrum {
    pub eigenvalues: Vec<LimitEigenvalue>,
    pub r_t: f64,
    pub grid_size: usize,
    /// some eigenvalue moved by more than [`TRUNCATION_TOL`] under `R_T → 2R_T`
    pub truncation_warning: bool,
}

pub const TRUNCATION_TOL: f64 = 1e-3;

impl LimitSpectrum {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,multiplicity,sector\n");
        for e in &self.eigenvalues {
            let sectors: Vec<String> = e.sectors.iter().map(|s| s.to_string()).collect();
            let _ = writeln!(out, "{:.10},{},{}", e.alpha, e.multiplicity, sectors.join(" "));
        }
        out
    }
}

/// Sector eigenvalues below `alpha_max`, Richardson-extrapolated from grids
/// of `n` and `2n` intervals.
fn sector_eigenvalues(sector: usize, r_t: f64, n: usize, alpha_max: f64) -> Vec<f64> {
    let coarse = SectorProblem::new(sector, radial_grid(r_t, n)).eigenvalues_below(alpha_max);
    let fine_problem = SectorProblem::new(sector, radial_grid(r_t, 2 * n));
    coarse
        .iter()
        .enumerate()
        .map(|(j, &a)| {
            let f = fine_problem.eigenvalue(j, alpha_max);
            (4.0 * f - a) / 3.0
        })
        .collect()
}

fn sector_table(k_max: usize, r_t: f64, n: usize) -> Vec<(f64, usize)> {
    let ak = |k: usize| (k * (k + 1)) as f64 / 2.0;
    let alpha_max = 0.5 * (ak(k_max) + ak(k_max + 1));
    let mut all: Vec<(f64, usize)> = Vec::new();
    for sector in 0..=k_max {
        all.extend(sector_eigenvalues(sector, r_t, n, alpha_max).into_iter().map(|a| (a, sector)));
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    all
}

fn cluster(values: &[(f64, usize)]) -> Vec<Vec<(f64, usize)>> {
    let mut out: Vec<Vec<(f64, usize)>> = Vec::new();
    for &v in values {
        match out.last_mut() {
            Some(c) if (v.0 - c[0].0).abs() <= 0.05 * c[0].0.abs().max(1.0) => c.push(v),
            _ => out.push(vec![v]),
        }
    }
    out
}

/// Eigenvalues `α ≤ α_{k_max}` of the limit problem merged over sectors
/// `ℓ = 0..=k_max`, each sector `ℓ ≥ 1` counted twice.
pub fn limit_eigenvalues(k_max: usize, r_t: f64, grid_size: usize) -> Result<LimitSpectrum> {
    if r_t < 100.0 {
        return Err(Error::InvalidInput(format!("truncation radius {r_t} is below 100")));
    }
    if grid_size < 1000 {
        return Err(Error::InvalidInput(format!("grid size {grid_size} is below 1000")));
    }
    let base = sector_table(k_max, r_t, grid_size);
    let doubled = sector_table(k_max, 2.0 * r_t, grid_size);
    let mut eigenvalues = Vec::new();
    let mut warning = false;
    for c in cluster(&base) {
        let mean = c.iter().map(|v| v.0).sum::<f64>() / c.len() as f64;
        let mut sectors: Vec<usize> = c.iter().map(|v| v.1).collect();
        sectors.sort_unstable();
        // same sector entries in the doubled run
        let shift = c
            .iter()
            .map(|&(a, s)| {
                doubled
                    .iter()
                    .filter(|d| d.1 == s)
                    .map(|d| (d.0 - a).abs())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        warning |= shift > TRUNCATION_TOL;
        eigenvalues.push(LimitEigenvalue {
            alpha: mean,
            multiplicity: sectors.iter().map(|&s| if s == 0 { 1 } else { 2 }).sum(),
            sectors,
            truncation_shift: shift,
        });
    }
    Ok(LimitSpectrum { eigenvalues, r_t, grid_size, truncation_warning: warning })
}

/// `V = a·∇U + b Ū + c` restricted to one angular copy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub a: [f64; 2],
    pub b: f64,
    pub c: f64,
    /// weighted relative misfit of the fit
    pub misfit: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitMode {
    pub alpha: f64,
    pub sector: usize,
    /// `(r, f(r))`, normalized so that `max f = ‖f‖_∞ = 1`
    pub profile: Vec<(f64, f64)>,
    /// for `α ∈ {0, 1}`; the cosine copy of sector 1 is reported
    pub decomposition: Option<Decomposition>,
}

fn fit(problem: &SectorProblem, f: &[f64], basis: &[f64]) -> (f64, f64) {
    let coef = problem.weighted_inner(f, basis) / problem.weighted_inner(basis, basis);
    let r: Vec<f64> = f.iter().zip(basis).map(|(x, y)| x - coef * y).collect();
    let misfit = (problem.weighted_inner(&r, &r) / problem.weighted_inner(f, f)).sqrt();
    (coef, misfit)
}

/// Radial modes of sectors `0..=k_max` with eigenvalue at most `α_{k_max}`.
pub fn limit_modes(k_max: usize, r_t: f64, grid_size: usize) -> Vec<LimitMode> {
    let ak = |k: usize| (k * (k + 1)) as f64 / 2.0;
    let alpha_max = 0.5 * (ak(k_max) + ak(k_max + 1));
    let mut modes = Vec::new();
    for sector in 0..=k_max {
        let problem = SectorProblem::new(sector, radial_grid(r_t, grid_size));
        for alpha in problem.eigenvalues_below(alpha_max) {
            let f = problem.eigenvector(alpha);
            let decomposition = if alpha.abs() < 0.05 && sector == 0 {
                let ones = vec![1.0; f.len()];
                let (c, misfit) = fit(&problem, &f, &ones);
                Some(Decomposition { a: [0.0, 0.0], b: 0.0, c, misfit })
            } else if (alpha - 1.0).abs() < 0.05 && sector == 0 {
                let ubar: Vec<f64> = problem.grid.iter().map(|&r| bubble_dilation(r)).collect();
                let (b, misfit) = fit(&problem, &f, &ubar);
                Some(Decomposition { a: [0.0, 0.0], b, c: 0.0, misfit })
            } else if (alpha - 1.0).abs() < 0.05 && sector == 1 {
                let slope: Vec<f64> = problem.grid.iter().map(|&r| bubble_slope(r)).collect();
                let (a, misfit) = fit(&problem, &f, &slope);
                Some(Decomposition { a: [a, 0.0], b: 0.0, c: 0.0, misfit })
            } else {
                None
            };
            modes.push(LimitMode {
                alpha,
                sector,
                profile: problem.grid.iter().copied().zip(f).collect(),
                decomposition,
            });
        }
    }
    modes
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentRow {
    pub name: String,
    pub value: f64,
    /// exact value as a formula
    pub reference: String,
    pub exact: f64,
    /// relative error, or absolute when the exact value is zero
    pub error: f64,
}

/// Breakpoints on `t ∈ [0, 1]` for `r = √8 t/(1 − t)`, graded toward `t = 1`
/// where the logarithmic moments have an endpoint singularity.
fn moment_rule(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut breaks = vec![0.0];
    breaks.extend((1..8).map(|i| i as f64 / 16.0));
    let mut gap = 0.5;
    while gap > 1e-14 {
        breaks.push(1.0 - gap);
        gap *= 0.25;
    }
    breaks.push(1.0);
    let (t, w) = composite_gauss(&breaks, order);
    let s8 = 8f64.sqrt();
    let r: Vec<f64> = t.iter().map(|&t| s8 * t / (1.0 - t)).collect();
    let wr: Vec<f64> = t.iter().zip(&w).map(|(&t, &w)| w * s8 / ((1.0 - t) * (1.0 - t))).collect();
    (r, wr)
}

/// `∫_0^∞ f(r) r dr` on the moment rule.
fn radial_moment(rule: &(Vec<f64>, Vec<f64>), f: impl Fn(f64) -> f64) -> f64 {
    rule.0.iter().zip(&rule.1).map(|(&r, &w)| w * f(r) * r).sum()
}

/// The weighted moments of `U`, `U_α`, `Ū` over the plane, with `order`
/// Gauss points per panel (panels: 24, so `order = 16` uses 384 nodes).
pub fn moment_integrals_with(order: usize) -> Vec<MomentRow> {
    let rule = moment_rule(order);
    let e = bubble_weight;
    // angular factors: ∫1 = 2π, ∫cos θ = 0, ∫cos² θ = π, ∫cos θ sin θ = 0
    let radial = |f: &dyn Fn(f64) -> f64| 2.0 * PI * radial_moment(&rule, f);
    let rows: Vec<(&str, f64, &str, f64)> = vec![
        ("e^U", radial(&|r| e(r)), "8π", 8.0 * PI),
        ("e^U U", radial(&|r| e(r) * bubble(r)), "-16π", -16.0 * PI),
        ("e^U U_a", 0.0, "0", 0.0),
        ("e^U Ubar", radial(&|r| e(r) * bubble_dilation(r)), "0", 0.0),
        ("e^U U^2", radial(&|r| e(r) * bubble(r).powi(2)), "64π", 64.0 * PI),
        ("e^U U U_a", 0.0, "0", 0.0),
        ("e^U U Ubar", radial(&|r| e(r) * bubble(r) * bubble_dilation(r)), "16π", 16.0 * PI),
        ("e^U U_1 U_1", PI * radial_moment(&rule, |r| e(r) * bubble_slope(r).powi(2)), "4π/3", 4.0 * PI / 3.0),
        ("e^U U_1 U_2", 0.0, "0", 0.0),
        ("e^U U_a Ubar", 0.0, "0", 0.0),
        ("e^U Ubar^2", radial(&|r| e(r) * bubble_dilation(r).powi(2)), "32π/3", 32.0 * PI / 3.0),
    ];
    rows.into_iter()
        .map(|(name, value, reference, exact)| MomentRow {
            name: name.to_string(),
            value,
            reference: reference.to_string(),
            exact,
            error: if exact == 0.0 { value.abs() } else { ((value - exact) / exact).abs() },
        })
        .collect()
}

pub fn moment_integrals() -> Vec<MomentRow> {
    moment_integrals_with(16)
}

/// Errors below this are reported as `<1e-8` in the moment CSV.
pub const MOMENT_TOL: f64 = 1e-8;

/// CSV `name,value,reference,rel_error`.
pub fn moments_to_csv(rows: &[MomentRow]) -> String {
    let mut out = String::from("name,value,reference,rel_error\n");
    for r in rows {
        let err = if r.error < MOMENT_TOL { "<1e-8".to_string() } else { format!("{:.3e}", r.error) };
        let _ = writeln!(out, "{},{:.8},{},{err}", r.name, r.value, r.reference);
    }
    out
}

/// `|∇U(x)|`
pub fn grad_bubble_norm(r: f64) -> f64 {
    -bubble_slope(r)
}

/// `∫_{R²} |x − y|⁻¹ e^{U(y)} dy` for `|x| = rho`. The angular integral is
/// `4 K(k)/(ρ + r)` with `k = 2√(ρr)/(ρ + r)`, leaving a radial integral with a
/// logarithmic singularity at `r = ρ`.
pub fn bubble_potential(rho: f64) -> f64 {
    let integrand = |r: f64| {
        // complementary modulus, exact near r = ρ where k rounds to 1
        let kp = (rho - r).abs() / (rho + r);
        4.0 * elliptic_k_complementary(kp) / (rho + r) * r * bubble_weight(r)
    };
    let order = 16;
    let mut total = 0.0;
    let far = 2.0 * rho + 8.0;
    let mut breaks = vec![];
    if rho > 0.0 {
        // geometric panels toward the singular point on both sides
        let mut left = vec![0.0];
        let mut gap = 0.5 * rho;
        while gap > 1e-13 * rho.max(1.0) {
            left.push(rho - gap);
            gap *= 0.2;
        }
        left.push(rho);
        let mut right = vec![];
        let mut gap = 1e-13 * rho.max(1.0);
        while gap < 0.5 * (far - rho) {
            right.push(rho + gap);
            gap *= 5.0;
        }
        right.push(far);
        breaks.extend(left);
        breaks.extend(right);
    } else {
        breaks.extend([0.0, 1.0, 2.0, 4.0, far]);
    }
    let (x, w) = composite_gauss(&breaks, order);
    total += x.iter().zip(&w).map(|(&r, &w)| w * integrand(r)).sum::<f64>();
    // tail r = far / s
    let (s, ws) = composite_gauss(&[0.0, 0.25, 0.5, 0.75, 1.0], order);
    total += s.iter().zip(&ws).map(|(&s, &w)| w * far / (s * s) * integrand(far / s)).sum::<f64>();
    total
}

/// Complete elliptic integral of the first kind with modulus `k`, by the
/// arithmetic-geometric mean.
pub fn elliptic_k(k: f64) -> f64 {
    elliptic_k_complementary((1.0 - k * k).max(0.0).sqrt())
}

/// `K` as a function of the complementary modulus `k' = √(1 − k²)`.
pub fn elliptic_k_complementary(kp: f64) -> f64 {
    let mut a = 1.0;
    let mut b = kp;
    if b == 0.0 {
        return f64::INFINITY;
    }
    for _ in 0..64 {
        if a - b <= 4.0 * f64::EPSILON * a {
            break;
        }
        let next = (0.5 * (a + b), (a * b).sqrt());
        a = next.0;
        b = next.1;
    }
    PI / (2.0 * a)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayReport {
    pub samples: usize,
    /// `sup (1 + |x|)|∇U(x)|` over the samples
    pub gradient_sup: f64,
    /// `sup (1 + |x|) ∫|x − y|⁻¹ e^U dy` over the samples
    pub potential_sup: f64,
    /// the same suprema on a grid with twice the samples
    pub gradient_sup_doubled: f64,
    pub potential_sup_doubled: f64,
}

impl DecayReport {
    /// Both suprema finite and within `tol` relative under sample doubling.
    pub fn stable(&self, tol: f64) -> bool {
        let rel = |a: f64, b: f64| ((a - b) / a).abs();
        self.gradient_sup.is_finite()
            && self.potential_sup.is_finite()
            && rel(self.gradient_sup, self.gradient_sup_doubled) <= tol
            && rel(self.potential_sup, self.potential_sup_doubled) <= tol
    }
}

/// `0` followed by `samples − 1` log-spaced radii in `[10⁻³, 10³]`.
pub fn decay_samples(samples: usize) -> Vec<f64> {
    let mut out = vec![0.0];
    let n = samples.max(2) - 1;
    out.extend((0..n).map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / (n - 1).max(1) as f64)));
    out
}

pub fn decay_checks(samples: usize) -> DecayReport {
    let sups = |n: usize| {
        let radii = decay_samples(n);
        let g = radii.iter().map(|&r| (1.0 + r) * grad_bubble_norm(r)).fold(0.0, f64::max);
        let p = radii.iter().map(|&r| (1.0 + r) * bubble_potential(r)).fold(0.0, f64::max);
        (g, p)
    };
    let (g1, p1) = sups(samples);
    let (g2, p2) = sups(2 * samples);
    DecayReport {
        samples,
        gradient_sup: g1,
        potential_sup: p1,
        gradient_sup_doubled: g2,
        potential_sup_doubled: p2,
    }
}
