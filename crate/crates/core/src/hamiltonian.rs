//! The point-vortex Hamiltonian
//!
//! ```text
//! H^m(x_1,…,x_m) = ½ Σ_j R(x_j) + ½ Σ_{j≠h} G(x_j, x_h)
//! ```
//!
//! (sum over ordered pairs), its derivatives, critical points, the scale
//! constants `d_j` and the spectrum of `D·Hess H^m·D`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::green::GreenEvaluator;
use crate::linalg::dense::sym_eigenvalues_sorted;

/// Eigenvalues with magnitude below this count as zero.
pub const ZERO_TOL: f64 = 1e-8;

/// An ordered m-tuple of interior points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub points: Vec<Point2>,
}

impl Configuration {
    pub fn new(points: Vec<Point2>) -> Self {
        Self { points }
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.points.iter().flat_map(|p| [p.x, p.y]).collect()
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self { points: v.chunks(2).map(|c| Point2::new(c[0], c[1])).collect() }
    }

    pub fn min_pair_distance(&self) -> f64 {
        let mut d = f64::INFINITY;
        for i in 0..self.m() {
            for j in i + 1..self.m() {
                d = d.min(self.points[i].dist(self.points[j]));
            }
        }
        d
    }

    /// Checks the clearance invariants against the evaluator's domain.
    pub fn validate(&self, ev: &GreenEvaluator) -> Result<()> {
        let diam = ev.diameter();
        if self.points.is_empty() {
            return Err(Error::InvalidInput("configuration has no points".into()));
        }
        for (j, &p) in self.points.iter().enumerate() {
            if !p.is_finite() || !ev.domain().contains(p) {
                return Err(Error::Collision(format!("point {j} at {p} is outside the domain")));
            }
            if ev.domain().boundary_distance(p) <= 1e-6 * diam {
                return Err(Error::Collision(format!("point {j} at {p} is too close to the boundary")));
            }
        }
        if self.min_pair_distance() <= 1e-8 * diam {
            return Err(Error::Collision("two points coincide".into()));
        }
        Ok(())
    }

    /// Distance to `other` minimized over relabelings of `other`'s points.
    pub fn permutation_distance(&self, other: &Configuration) -> f64 {
        if self.m() != other.m() {
            return f64::INFINITY;
        }
        let mut idx: Vec<usize> = (0..self.m()).collect();
        let mut best = f64::INFINITY;
        permute(&mut idx, 0, &mut |perm| {
            let d = self
                .points
                .iter()
                .zip(perm)
                .map(|(p, &k)| p.dist(other.points[k]))
                .fold(0.0, f64::max);
            best = best.min(d);
        });
        best
    }

    /// Points sorted lexicographically; `H^m` is invariant under relabeling.
    pub fn canonical(&self) -> Self {
        let mut points = self.points.clone();
        points.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        Self { points }
    }
}

fn permute(idx: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == idx.len() {
        visit(idx);
        return;
    }
    for i in k..idx.len() {
        idx.swap(k, i);
        permute(idx, k + 1, visit);
        idx.swap(k, i);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HamiltonianReport {
    pub points: Vec<Point2>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub gradient_norm: f64,
    pub hessian: Vec<Vec<f64>>,
    /// ascending eigenvalues of the Hessian
    pub hessian_eigenvalues: Vec<f64>,
    pub d: Vec<f64>,
    pub scaled_hessian: Vec<Vec<f64>>,
    /// ascending eigenvalues of `D·Hess·D`
    pub eta: Vec<f64>,
    /// `#{η < 0}` and `#{η ≤ 0}`: indices of `H^m`
    pub morse_index: usize,
    pub augmented_morse_index: usize,
    /// `#{η > 0}` and `#{η ≥ 0}`: indices of `−H^m`
    pub morse_index_neg: usize,
    pub augmented_morse_index_neg: usize,
    pub degenerate: bool,
}

pub fn h_value(ev: &GreenEvaluator, c: &Configuration) -> Result<f64> {
    c.validate(ev)?;
    let mut h = 0.0;
    for (j, &x) in c.points.iter().enumerate() {
        h += 0.5 * ev.robin(x)?;
        for (k, &y) in c.points.iter().enumerate() {
            if k != j {
                h += 0.5 * ev.green(x, y)?;
            }
        }
    }
    Ok(h)
}

pub fn h_grad(ev: &GreenEvaluator, c: &Configuration) -> Result<Vec<f64>> {
    c.validate(ev)?;
    let mut g = vec![0.0; 2 * c.m()];
    for (j, &x) in c.points.iter().enumerate() {
        let r = ev.robin_grad(x)?;
        g[2 * j] += 0.5 * r[0];
        g[2 * j + 1] += 0.5 * r[1];
        for (k, &y) in c.points.iter().enumerate() {
            if k != j {
                let gx = ev.grad_x(x, y)?;
                g[2 * j] += gx[0];
                g[2 * j + 1] += gx[1];
            }
        }
    }
    Ok(g)
}

pub fn h_hess(ev: &GreenEvaluator, c: &Configuration) -> Result<DMatrix<f64>> {
    c.validate(ev)?;
    let m = c.m();
    let mut h = DMatrix::zeros(2 * m, 2 * m);
    for (j, &x) in c.points.iter().enumerate() {
        let r = ev.robin_hess(x)?;
        for a in 0..2 {
            for b in 0..2 {
                h[(2 * j + a, 2 * j + b)] += 0.5 * r[a][b];
            }
        }
        for (l, &y) in c.points.iter().enumerate() {
            if l == j {
                continue;
            }
            let xx = ev.hess_xx(x, y)?;
            let xy = ev.hess_xy(x, y)?;
            for a in 0..2 {
                for b in 0..2 {
                    h[(2 * j + a, 2 * j + b)] += xx[a][b];
                    h[(2 * j + a, 2 * l + b)] += xy[a][b];
                }
            }
        }
    }
    Ok(0.5 * (&h + h.transpose()))
}

/// `d_j = (1/8) exp{4π R(κ_j) + 4π Σ_{i≠j} G(κ_j, κ_i)}`.
pub fn d_constants(ev: &GreenEvaluator, c: &Configuration) -> Result<Vec<f64>> {
    c.validate(ev)?;
    let four_pi = 4.0 * std::f64::consts::PI;
    c.points
        .iter()
        .enumerate()
        .map(|(j, &x)| {
            let mut e = four_pi * ev.robin(x)?;
            for (i, &y) in c.points.iter().enumerate() {
                if i != j {
                    e += four_pi * ev.green(x, y)?;
                }
            }
            Ok(e.exp() / 8.0)
        })
        .collect()
}

/// `D·H·D` with `D = diag(d_1, d_1, …, d_m, d_m)`.
pub fn scale_hessian(hess: &DMatrix<f64>, d: &[f64]) -> DMatrix<f64> {
    let diag = DVector::from_iterator(2 * d.len(), d.iter().flat_map(|&v| [v, v]));
    DMatrix::from_fn(hess.nrows(), hess.ncols(), |i, j| diag[i] * hess[(i, j)] * diag[j])
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn report(ev: &GreenEvaluator, c: &Configuration) -> Result<HamiltonianReport> {
    let value = h_value(ev, c)?;
    let gradient = h_grad(ev, c)?;
    let hess = h_hess(ev, c)?;
    let d = d_constants(ev, c)?;
    let scaled = scale_hessian(&hess, &d);
    let eta = sym_eigenvalues_sorted(&scaled);
    let count = |f: &dyn Fn(f64) -> bool| eta.iter().filter(|&&e| f(e)).count();
    Ok(HamiltonianReport {
        points: c.points.clone(),
        value,
        gradient_norm: gradient.iter().map(|g| g * g).sum::<f64>().sqrt(),
        gradient,
        hessian: to_rows(&hess),
        hessian_eigenvalues: sym_eigenvalues_sorted(&hess),
        d,
        scaled_hessian: to_rows(&scaled),
        morse_index: count(&|e| e < -ZERO_TOL),
        augmented_morse_index: count(&|e| e <= ZERO_TOL),
        morse_index_neg: count(&|e| e > ZERO_TOL),
        augmented_morse_index_neg: count(&|e| e >= -ZERO_TOL),
        degenerate: eta.iter().any(|e| e.abs() <= ZERO_TOL),
        eta,
    })
}

#[derive(Debug, Clone)]
pub struct CriticalOptions {
    pub max_iterations: usize,
    pub gradient_tol: f64,
    /// number of low-discrepancy seeds added to the user seeds
    pub halton_seeds: usize,
    /// minimum boundary and pairwise clearance of generated seeds (diameter units)
    pub seed_clearance: f64,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        Self { max_iterations: 100, gradient_tol: 1e-10, halton_seeds: 32, seed_clearance: 0.02 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedFailure {
    pub seed: Configuration,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalSearch {
    pub critical_points: Vec<HamiltonianReport>,
    pub failures: Vec<SeedFailure>,
}

fn halton(index: usize, base: usize) -> f64 {
    let (mut f, mut r, mut i) = (1.0, 0.0, index);
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

const PRIMES: [usize; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Low-discrepancy interior configurations, filtered by clearance.
pub fn halton_seeds(ev: &GreenEvaluator, m: usize, count: usize, clearance: f64) -> Vec<Configuration> {
    let (lo, hi) = match ev.domain() {
        crate::green::Domain::UnitDisk => (Point2::new(-1.0, -1.0), Point2::new(1.0, 1.0)),
        crate::green::Domain::Meshed { mesh, .. } => mesh.vertices().iter().fold(
            (Point2::new(f64::MAX, f64::MAX), Point2::new(f64::MIN, f64::MIN)),
            |(lo, hi), p| (Point2::new(lo.x.min(p.x), lo.y.min(p.y)), Point2::new(hi.x.max(p.x), hi.y.max(p.y))),
        ),
    };
    let diam = ev.diameter();
    let mut out = Vec::new();
    let mut index = 1;
    while out.len() < count && index < 1000 * count.max(1) {
        let points: Vec<Point2> = (0..m)
            .map(|j| {
                let u = halton(index, PRIMES[(2 * j) % PRIMES.len()]);
                let v = halton(index, PRIMES[(2 * j + 1) % PRIMES.len()]);
                Point2::new(lo.x + u * (hi.x - lo.x), lo.y + v * (hi.y - lo.y))
            })
            .collect();
        index += 1;
        let c = Configuration::new(points);
        let clear = c.points.iter().all(|&p| ev.domain().boundary_distance(p) > clearance * diam)
            && (m < 2 || c.min_pair_distance() > clearance * diam);
        if clear {
            out.push(c);
        }
    }
    out
}

fn grad_norm(g: &[f64]) -> f64 {
    g.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Damped Newton on `∇H^m = 0` from one seed.
pub fn newton_critical(ev: &GreenEvaluator, seed: &Configuration, opts: &CriticalOptions) -> Result<Configuration> {
    seed.validate(ev)?;
    let cap = 0.1 * ev.diameter();
    let mut x = seed.to_vec();
    let mut g = h_grad(ev, seed)?;
    let mut gn = grad_norm(&g);
    for _ in 0..opts.max_iterations {
        if gn <= opts.gradient_tol {
            return Ok(Configuration::from_slice(&x));
        }
        let hess = h_hess(ev, &Configuration::from_slice(&x))?;
        let rhs = -DVector::from_column_slice(&g);
        let mut step = match hess.clone().lu().solve(&rhs) {
            Some(s) if s.iter().all(|v| v.is_finite()) => s,
            _ => rhs.clone(),
        };
        let norm = step.norm();
        if norm > cap {
            step *= cap / norm;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
            let c = Configuration::from_slice(&trial);
            if let Ok(gt) = h_grad(ev, &c) {
                let gtn = grad_norm(&gt);
                if gtn < gn {
                    x = trial;
                    g = gt;
                    gn = gtn;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        let c = Configuration::from_slice(&x);
        if collapsed(&c, ev) {
            return Err(Error::Collision("Newton iteration drove points together".into()));
        }
    }
    if gn <= opts.gradient_tol {
        Ok(Configuration::from_slice(&x))
    } else {
        Err(Error::NewtonDivergence { iterations: opts.max_iterations, residual: gn })
    }
}

fn collapsed(c: &Configuration, ev: &GreenEvaluator) -> bool {
    c.m() > 1 && c.min_pair_distance() < 1e-4 * ev.diameter()
}

/// Multistart search for critical points of `H^m`: user seeds plus Halton
/// seeds, solved in parallel and merged up to relabeling.
pub fn find_critical(
    ev: &GreenEvaluator,
    m: usize,
    seeds: &[Configuration],
    opts: &CriticalOptions,
) -> Result<CriticalSearch> {
    if m == 0 {
        return Err(Error::InvalidInput("m must be at least 1".into()));
    }
    if let Some(bad) = seeds.iter().find(|s| s.m() != m) {
        return Err(Error::InvalidInput(format!("seed has {} points, expected {m}", bad.m())));
    }
    let mut all: Vec<Configuration> = seeds.to_vec();
    all.extend(halton_seeds(ev, m, opts.halton_seeds, opts.seed_clearance));
    let results: Vec<Result<Configuration>> = all.par_iter().map(|s| newton_critical(ev, s, opts)).collect();

    let merge_tol = 1e-6 * ev.diameter();
    let mut found: Vec<Configuration> = Vec::new();
    let mut failures = Vec::new();
    for (seed, r) in all.into_iter().zip(results) {
        match r {
            Ok(c) => {
                if !found.iter().any(|f| f.permutation_distance(&c) <= merge_tol) {
                    found.push(c.canonical());
                }
            }
            Err(e) => failures.push(SeedFailure { seed, reason: e.to_string() }),
        }
    }
    let critical_points = found.iter().map(|c| report(ev, c)).collect::<Result<Vec<_>>>()?;
    Ok(CriticalSearch { critical_points, failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn single_vortex_at_disk_center() {
        let ev = GreenEvaluator::unit_disk();
        let c = Configuration::new(vec![Point2::ORIGIN]);
        let r = report(&ev, &c).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.gradient_norm == 0.0);
        assert!((r.hessian[0][0] + 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!((r.d[0] - 0.125).abs() < 1e-15);
        for e in &r.eta {
            assert!((e + 1.0 / (128.0 * PI)).abs() < 1e-15);
        }
        assert_eq!((r.morse_index, r.morse_index_neg), (2, 0));
    }

    #[test]
    fn value_off_center() {
        let ev = GreenEvaluator::unit_disk();
        let c = Configuration::new(vec![Point2::new(0.5, 0.0)]);
        assert!((h_value(&ev, &c).unwrap() - 0.75f64.ln() / (4.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn pair_term_counts_each_unordered_pair_once() {
        let ev = GreenEvaluator::unit_disk();
        let (p, q) = (Point2::new(0.3, 0.1), Point2::new(-0.2, -0.4));
        let c = Configuration::new(vec![p, q]);
        let expected = 0.5 * (ev.robin(p).unwrap() + ev.robin(q).unwrap()) + ev.green(p, q).unwrap();
        assert!((h_value(&ev, &c).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn collisions_rejected() {
        let ev = GreenEvaluator::unit_disk();
        let p = Point2::new(0.2, 0.2);
        assert!(matches!(h_value(&ev, &Configuration::new(vec![p, p])), Err(Error::Collision(_))));
        let edge = Configuration::new(vec![Point2::new(1.0 - 1e-7, 0.0)]);
        assert!(matches!(h_value(&ev, &edge), Err(Error::Collision(_))));
    }

    #[test]
    fn permutation_distance_ignores_labels() {
        let a = Configuration::new(vec![Point2::new(0.1, 0.0), Point2::new(-0.3, 0.2)]);
        let b = Configuration::new(vec![Point2::new(-0.3, 0.2), Point2::new(0.1, 0.0)]);
        assert_eq!(a.permutation_distance(&b), 0.0);
    }
}
