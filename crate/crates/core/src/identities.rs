//! Numerical checks of three exact identities: the bilinear Pohozaev identity
//! on a ball, the boundary-integral table for products of Green derivatives,
//! and sign preservation of eigenvalues under diagonal congruence.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::green::GreenEvaluator;
use crate::linalg::dense::sym_eigenvalues_sorted;
use crate::linalg::quadrature::{circle_nodes, gauss_legendre_on};

/// A `C²` field on a closed ball with value, gradient and Laplacian.
#[derive(Debug, Clone)]
pub enum TestField<'a> {
    /// `Σ c_{ij} x^i y^j`, keyed by `(i, j)`
    Polynomial(Vec<((u32, u32), f64)>),
    /// `Re (z − c)^k` (`imaginary = false`) or `Im (z − c)^k`
    Harmonic { center: Point2, power: u32, imaginary: bool },
    /// `x ↦ G(x, pole)` with the pole outside the ball
    Green { ev: &'a GreenEvaluator, pole: Point2 },
}

impl TestField<'_> {
    pub fn kind(&self) -> &'static str {
        match self {
            TestField::Polynomial(_) => "polynomial",
            TestField::Harmonic { .. } => "harmonic",
            TestField::Green { .. } => "green-derived",
        }
    }

    pub fn value(&self, p: Point2) -> Result<f64> {
        Ok(match self {
            TestField::Polynomial(terms) => {
                terms.iter().map(|&((i, j), c)| c * p.x.powi(i as i32) * p.y.powi(j as i32)).sum()
            }
            TestField::Harmonic { center, power, imaginary } => {
                let (re, im) = complex_pow(p - *center, *power);
                if *imaginary {
                    im
                } else {
                    re
                }
            }
            TestField::Green { ev, pole } => ev.green(p, *pole)?,
        })
    }

    pub fn gradient(&self, p: Point2) -> Result<[f64; 2]> {
        Ok(match self {
            TestField::Polynomial(terms) => {
                let mut g = [0.0; 2];
                for &((i, j), c) in terms {
                    if i > 0 {
                        g[0] += c * i as f64 * p.x.powi(i as i32 - 1) * p.y.powi(j as i32);
                    }
                    if j > 0 {
                        g[1] += c * j as f64 * p.x.powi(i as i32) * p.y.powi(j as i32 - 1);
                    }
                }
                g
            }
            TestField::Harmonic { center, power, imaginary } => {
                // d/dz (z − c)^k = k (z − c)^{k−1}; ∇Re = (Re, −Im), ∇Im = (Im, Re)
                if *power == 0 {
                    return Ok([0.0, 0.0]);
                }
                let (re, im) = complex_pow(p - *center, power - 1);
                let k = *power as f64;
                if *imaginary {
                    [k * im, k * re]
                } else {
                    [k * re, -k * im]
                }
            }
            TestField::Green { ev, pole } => ev.grad_x(p, *pole)?,
        })
    }

    pub fn laplacian(&self, p: Point2) -> f64 {
        match self {
            TestField::Polynomial(terms) => {
                let mut l = 0.0;
                for &((i, j), c) in terms {
                    if i > 1 {
                        l += c * (i * (i - 1)) as f64 * p.x.powi(i as i32 - 2) * p.y.powi(j as i32);
                    }
                    if j > 1 {
                        l += c * (j * (j - 1)) as f64 * p.x.powi(i as i32) * p.y.powi(j as i32 - 2);
                    }
                }
                l
            }
            TestField::Harmonic { .. } | TestField::Green { .. } => 0.0,
        }
    }
}

fn complex_pow(z: Point2, k: u32) -> (f64, f64) {
    let (mut re, mut im) = (1.0, 0.0);
    for _ in 0..k {
        (re, im) = (re * z.x - im * z.y, re * z.y + im * z.x);
    }
    (re, im)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PohozaevCheck {
    /// `∫_B [(x−p)·∇f] Δg + Δf [(x−p)·∇g]`
    pub volume: f64,
    /// `R ∫_{∂B} (2 ∂_ν f ∂_ν g − ∇f·∇g)`
    pub boundary: f64,
    pub residual: f64,
}

impl PohozaevCheck {
    /// `|volume − boundary| ≤ rel·max(|volume|, |boundary|)` or `≤ abs`.
    pub fn passes(&self, rel: f64, abs: f64) -> bool {
        self.residual <= abs || self.residual <= rel * self.volume.abs().max(self.boundary.abs())
    }
}

pub const POHOZAEV_REL_TOL: f64 = 1e-8;
pub const POHOZAEV_ABS_TOL: f64 = 1e-10;
pub const POHOZAEV_RADIAL_ORDER: usize = 16;
pub const POHOZAEV_ANGULAR_NODES: usize = 64;
pub const POHOZAEV_BOUNDARY_NODES: usize = 512;

/// Both sides of the bilinear Pohozaev identity on `B_R(p)`.
pub fn pohozaev_residual(p: Point2, radius: f64, f: &TestField, g: &TestField) -> Result<PohozaevCheck> {
    pohozaev_with(p, radius, f, g, 1)
}

/// As [`pohozaev_residual`] with every quadrature order multiplied by `scale`.
pub fn pohozaev_with(p: Point2, radius: f64, f: &TestField, g: &TestField, scale: usize) -> Result<PohozaevCheck> {
    if !(radius > 0.0) {
        return Err(Error::InvalidInput(format!("radius must be positive, got {radius}")));
    }
    let (rs, rw) = gauss_legendre_on(POHOZAEV_RADIAL_ORDER * scale, 0.0, radius);
    let mut volume = 0.0;
    for (theta, wt) in circle_nodes(POHOZAEV_ANGULAR_NODES * scale) {
        let e = Point2::new(theta.cos(), theta.sin());
        for (&r, &wr) in rs.iter().zip(&rw) {
            let x = p + e * r;
            let d = e * r;
            let (gf, gg) = (f.gradient(x)?, g.gradient(x)?);
            let df = d.x * gf[0] + d.y * gf[1];
            let dg = d.x * gg[0] + d.y * gg[1];
            volume += wt * wr * r * (df * g.laplacian(x) + f.laplacian(x) * dg);
        }
    }
    let mut boundary = 0.0;
    for (theta, wt) in circle_nodes(POHOZAEV_BOUNDARY_NODES * scale) {
        let nu = Point2::new(theta.cos(), theta.sin());
        let x = p + nu * radius;
        let (gf, gg) = (f.gradient(x)?, g.gradient(x)?);
        let fn_ = nu.x * gf[0] + nu.y * gf[1];
        let gn = nu.x * gg[0] + nu.y * gg[1];
        boundary += wt * radius * (2.0 * fn_ * gn - (gf[0] * gg[0] + gf[1] * gg[1]));
    }
    boundary *= radius;
    Ok(PohozaevCheck { volume, boundary, residual: (volume - boundary).abs() })
}

/// Random polynomial of total degree at most `degree` with coefficients in
/// `[-1, 1]`.
pub fn random_polynomial(rng: &mut impl Rng, degree: u32) -> TestField<'static> {
    let mut terms = Vec::new();
    for i in 0..=degree {
        for j in 0..=degree - i {
            terms.push(((i, j), rng.gen_range(-1.0..1.0)));
        }
    }
    TestField::Polynomial(terms)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PohozaevSuite {
    pub pairs: usize,
    pub failures: usize,
    pub worst_relative: f64,
    pub checks: Vec<PohozaevCheck>,
}

/// `pairs` random polynomial pairs of degree ≤ 4 on random balls.
pub fn pohozaev_suite(pairs: usize, seed: u64) -> Result<PohozaevSuite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::with_capacity(pairs);
    for _ in 0..pairs {
        let p = Point2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let radius = rng.gen_range(0.2..1.5);
        let (df, dg) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let f = random_polynomial(&mut rng, df);
        let g = random_polynomial(&mut rng, dg);
        checks.push(pohozaev_residual(p, radius, &f, &g)?);
    }
    let failures = checks.iter().filter(|c| !c.passes(POHOZAEV_REL_TOL, POHOZAEV_ABS_TOL)).count();
    // pairs whose sides vanish are judged by the absolute tolerance only
    let worst_relative = checks
        .iter()
        .map(|c| (c.volume.abs().max(c.boundary.abs()), c.residual))
        .filter(|&(scale, _)| scale > POHOZAEV_ABS_TOL)
        .map(|(scale, r)| r / scale)
        .fold(0.0, f64::max);
    Ok(PohozaevSuite { pairs, failures, worst_relative, checks })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ICase {
    /// all three points distinct from `z_1`
    Vanishing,
    /// `z_1 = z_2 = z_3`
    Robin,
    /// `z_1 = z_2 ≠ z_3`
    Mixed,
    /// `z_1 = z_3 ≠ z_2`
    Second,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IValue {
    pub case: ICase,
    pub integral: f64,
    pub closed_form: f64,
}

impl IValue {
    pub fn error(&self) -> f64 {
        (self.integral - self.closed_form).abs()
    }
}

pub const I_NODES: usize = 1024;

/// `∮_{∂B_R(z_1)} ∂_ν G_{x_α}(x, z_2) G_{y_β}(x, z_3) − G_{x_α}(x, z_2) ∂_ν G_{y_β}(x, z_3)`
/// and its closed form.
pub fn i_table(
    ev: &GreenEvaluator,
    z1: Point2,
    z2: Point2,
    z3: Point2,
    radius: f64,
    alpha: usize,
    beta: usize,
) -> Result<IValue> {
    if alpha > 1 || beta > 1 {
        return Err(Error::InvalidInput("derivative indices are 0 or 1".into()));
    }
    let domain = ev.domain();
    for z in [z1, z2, z3] {
        if !domain.contains(z) {
            return Err(Error::Geometry(format!("{z} lies outside the domain")));
        }
    }
    if domain.boundary_distance(z1) <= radius {
        return Err(Error::Geometry(format!("ball of radius {radius} around {z1} leaves the domain")));
    }
    for z in [z2, z3] {
        if z != z1 && domain.boundary_distance(z) <= 2.0 * radius {
            return Err(Error::Geometry(format!("{z} is within 2R of the boundary")));
        }
    }
    let pts = [z1, z2, z3];
    for i in 0..3 {
        for j in i + 1..3 {
            if pts[i] != pts[j] && pts[i].dist(pts[j]) <= 2.0 * radius {
                return Err(Error::Geometry(format!(
                    "radius {radius} is not below half the distance between {} and {}",
                    pts[i], pts[j]
                )));
            }
        }
    }

    let mut integral = 0.0;
    for (theta, w) in circle_nodes(I_NODES) {
        let nu = Point2::new(theta.cos(), theta.sin());
        let x = z1 + nu * radius;
        let hxx = ev.hess_xx(x, z2)?;
        let gx = ev.grad_x(x, z2)?;
        let gy = ev.grad_y(x, z3)?;
        let hxy = ev.hess_xy(x, z3)?;
        let dn_gx = nu.x * hxx[alpha][0] + nu.y * hxx[alpha][1];
        let dn_gy = nu.x * hxy[0][beta] + nu.y * hxy[1][beta];
        integral += w * radius * (dn_gx * gy[beta] - gx[alpha] * dn_gy);
    }
    let (case, closed_form) = match (z1 == z2, z1 == z3) {
        (false, false) => (ICase::Vanishing, 0.0),
        (true, true) => (ICase::Robin, 0.5 * ev.robin_hess(z1)?[alpha][beta]),
        (true, false) => (ICase::Mixed, ev.hess_xy(z1, z3)?[alpha][beta]),
        (false, true) => (ICase::Second, ev.hess_xx(z1, z2)?[alpha][beta]),
    };
    Ok(IValue { case, integral, closed_form })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignVerdict {
    /// ascending eigenvalues of `H`
    pub lambda: Vec<f64>,
    /// ascending eigenvalues of `D H D`
    pub lambda_scaled: Vec<f64>,
    pub signs_match: bool,
    /// `Λ min d² ≤ Λ̃ ≤ Λ max d²` (reversed for `Λ < 0`) for every `k`
    pub bounds_hold: bool,
}

fn sign_with_tol(v: f64, tol: f64) -> i8 {
    if v > tol {
        1
    } else if v < -tol {
        -1
    } else {
        0
    }
}

/// Compares the ascending eigenvalues of `H` and `D H D` for diagonal `D`.
pub fn sign_check(h: &DMatrix<f64>, d: &[f64]) -> Result<SignVerdict> {
    let n = h.nrows();
    if h.ncols() != n || d.len() != n {
        return Err(Error::InvalidInput(format!("H is {}x{}, D has {} entries", n, h.ncols(), d.len())));
    }
    if let Some(i) = d.iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroDiagonal(i));
    }
    let scaled = DMatrix::from_fn(n, n, |i, j| d[i] * h[(i, j)] * d[j]);
    let lambda = sym_eigenvalues_sorted(h);
    let lambda_scaled = sym_eigenvalues_sorted(&scaled);
    let (d2min, d2max) = d.iter().fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(v * v), hi.max(v * v)));
    let tol = 1e-10 * h.norm();
    let tol_scaled = 1e-10 * scaled.norm();
    let signs_match = lambda
        .iter()
        .zip(&lambda_scaled)
        .all(|(&a, &b)| sign_with_tol(a, tol) == sign_with_tol(b, tol_scaled));
    let slack = 1e-10 * h.norm() * d2max;
    let bounds_hold = lambda.iter().zip(&lambda_scaled).all(|(&a, &b)| {
        let (lo, hi) = if a >= 0.0 { (a * d2min, a * d2max) } else { (a * d2max, a * d2min) };
        b >= lo - slack && b <= hi + slack
    });
    Ok(SignVerdict { lambda, lambda_scaled, signs_match, bounds_hold })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignSuite {
    pub trials: usize,
    pub sign_failures: usize,
    pub bound_failures: usize,
}

/// Random symmetric `H` of size `1..=8` and diagonal `D` with entries in
/// `±[0.1, 10]`.
pub fn sign_suite(trials: usize, seed: u64) -> Result<SignSuite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sign_failures, mut bound_failures) = (0, 0);
    for _ in 0..trials {
        let n = rng.gen_range(1..=8);
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let h = (&a + a.transpose()) * 0.5;
        let d: Vec<f64> = (0..n)
            .map(|_| {
                let mag = 10f64.powf(rng.gen_range(-1.0..1.0));
                if rng.gen_bool(0.5) {
                    mag
                } else {
                    -mag
                }
            })
            .collect();
        let v = sign_check(&h, &d)?;
        sign_failures += usize::from(!v.signs_match);
        bound_failures += usize::from(!v.bounds_hold);
    }
    Ok(SignSuite { trials, sign_failures, bound_failures })
}

/// Expected value of `½ R_{x_α x_β}` at the centre of the unit disk.
pub fn disk_center_half_robin_hess(alpha: usize, beta: usize) -> f64 {
    if alpha == beta {
        -1.0 / (2.0 * PI)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fields_both_sides_vanish() {
        let f = TestField::Polynomial(vec![((1, 0), 1.0)]);
        let c = pohozaev_residual(Point2::new(0.3, -0.2), 0.7, &f, &f).unwrap();
        assert!(c.volume.abs() < 1e-14);
        assert!(c.residual <= 1e-10);
    }

    #[test]
    fn quadratic_field_gives_eight_pi() {
        let p = Point2::new(0.25, 0.5);
        // |x − p|² expanded about the origin
        let f = TestField::Polynomial(vec![
            ((2, 0), 1.0),
            ((0, 2), 1.0),
            ((1, 0), -2.0 * p.x),
            ((0, 1), -2.0 * p.y),
            ((0, 0), p.norm_sq()),
        ]);
        let c = pohozaev_residual(p, 1.0, &f, &f).unwrap();
        assert!((c.volume - 8.0 * PI).abs() < 1e-12);
        assert!((c.boundary - 8.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn harmonic_gradient_matches_difference_quotient() {
        let f = TestField::Harmonic { center: Point2::new(0.1, 0.2), power: 3, imaginary: true };
        let x = Point2::new(0.4, -0.3);
        let h = 1e-6;
        let g = f.gradient(x).unwrap();
        let gx = (f.value(x + Point2::new(h, 0.0)).unwrap() - f.value(x - Point2::new(h, 0.0)).unwrap()) / (2.0 * h);
        let gy = (f.value(x + Point2::new(0.0, h)).unwrap() - f.value(x - Point2::new(0.0, h)).unwrap()) / (2.0 * h);
        assert!((g[0] - gx).abs() < 1e-8 && (g[1] - gy).abs() < 1e-8);
    }

    #[test]
    fn robin_case_at_disk_center() {
        let ev = GreenEvaluator::unit_disk();
        let o = Point2::ORIGIN;
        let v = i_table(&ev, o, o, o, 0.2, 0, 0).unwrap();
        assert_eq!(v.case, ICase::Robin);
        assert!((v.closed_form - disk_center_half_robin_hess(0, 0)).abs() < 1e-14);
        assert!(v.error() < 1e-4);
    }

    #[test]
    fn diagonal_sign_example() {
        let h = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -2.0]));
        let v = sign_check(&h, &[3.0, 0.5]).unwrap();
        assert!((v.lambda_scaled[0] + 0.5).abs() < 1e-14 && (v.lambda_scaled[1] - 9.0).abs() < 1e-14);
        assert!(v.signs_match && v.bounds_hold);
        assert!(matches!(sign_check(&h, &[1.0, 0.0]), Err(Error::ZeroDiagonal(1))));
    }
}
