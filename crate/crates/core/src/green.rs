//! Dirichlet Green function `G(x,y) = −(1/2π) log|x−y| + K(x,y)`, its regular
//! part `K`, the Robin function `R(x) = K(x,x)` and their derivatives.
//!
//! The unit disk uses closed forms. On a meshed polygon, `K(·,a)` is the
//! harmonic extension `h_a` of `Φ_a = (1/2π) log|·−a|` from the boundary, and
//! `K(b,a)` is evaluated through the reciprocity identity
//!
//! ```text
//! K(b,a) = ∫_∂Ω Φ_a ∂_ν Φ_b dσ − ∫_Ω ∇h_a · ∇h_b dx
//! ```
//!
//! with `h_a` replaced by its discrete (P1) harmonic extension `w_a`. The
//! boundary term is symmetrized. The result is smooth in both arguments,
//! which makes finite-difference derivatives meaningful; nodal interpolation
//! of `w_a` would not be.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::assembly::Assembler;
use crate::geometry::{Mat2, Point2};
use crate::linalg::quadrature::gauss_legendre;
use crate::linalg::sparse::norm_inf;
use crate::linalg::{CsrMatrix, SkylineLdl};
use crate::mesh::{Locator, Mesh};

const INV_2PI: f64 = 1.0 / (2.0 * PI);
const INV_4PI: f64 = 1.0 / (4.0 * PI);

/// Default finite-difference step, in units of the domain diameter.
pub const DEFAULT_FD_STEP: f64 = 1e-4;
/// Source positions closer than this (times the diameter) share a cache entry.
pub const CACHE_QUANTUM: f64 = 1e-10;
/// Smallest finite-difference step resolvable by the cache (diameter units).
pub const MIN_FD_STEP: f64 = 100.0 * CACHE_QUANTUM;
const BOUNDARY_GAUSS_POINTS: usize = 8;

/// JSON description of a domain: `{"kind":"unit-disk"}` or
/// `{"kind":"mesh","file":"<path>"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DomainSpec {
    #[serde(alias = "disk")]
    UnitDisk,
    Mesh { file: PathBuf },
}

#[derive(Debug, Clone)]
pub enum Domain {
    UnitDisk,
    Meshed { mesh: Arc<Mesh>, diameter: f64 },
}

impl Domain {
    pub fn meshed(mesh: Mesh) -> Self {
        let diameter = mesh.diameter();
        Domain::Meshed { mesh: Arc::new(mesh), diameter }
    }

    /// Resolves a spec; relative mesh paths are taken relative to `base`.
    pub fn from_spec(spec: &DomainSpec, base: Option<&Path>) -> Result<Self> {
        match spec {
            DomainSpec::UnitDisk => Ok(Domain::UnitDisk),
            DomainSpec::Mesh { file } => {
                let path = match base {
                    Some(dir) if file.is_relative() => dir.join(file),
                    _ => file.clone(),
                };
                Ok(Self::meshed(Mesh::read(path)?))
            }
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let spec: DomainSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_spec(&spec, path.parent())
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::UnitDisk => 2.0,
            Domain::Meshed { diameter, .. } => *diameter,
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        match self {
            Domain::UnitDisk => p.is_finite() && p.norm_sq() < 1.0,
            Domain::Meshed { mesh, .. } => p.is_finite() && mesh.contains(p),
        }
    }

    pub fn boundary_distance(&self, p: Point2) -> f64 {
        match self {
            Domain::UnitDisk => 1.0 - p.norm(),
            Domain::Meshed { mesh, .. } => {
                let d = mesh.boundary_distance(p);
                if mesh.contains(p) {
                    d
                } else {
                    -d
                }
            }
        }
    }

    pub fn is_unit_disk(&self) -> bool {
        matches!(self, Domain::UnitDisk)
    }
}

/// Which partial derivatives [`GreenEvaluator::green_derivatives`] returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeOrder {
    GradX,
    GradY,
    /// `∂²G/∂x_α∂y_β`, row-major in `(α, β)`
    HessXY,
    /// `∂²G/∂x_α∂x_β`, row-major
    HessXX,
}

struct MeshGreen {
    mesh: Arc<Mesh>,
    stiffness: CsrMatrix,
    interior: Vec<usize>,
    boundary_nodes: Vec<usize>,
    factor: SkylineLdl,
    /// boundary quadrature: point and outward normal scaled by the weight
    quad: Vec<(Point2, Point2)>,
    locator: Locator,
    quantum: f64,
    cache: RwLock<HashMap<(i64, i64), Arc<Vec<f64>>>>,
}

impl MeshGreen {
    fn new(mesh: Arc<Mesh>, diameter: f64) -> Result<Self> {
        let stiffness = Assembler::new(&mesh).stiffness();
        let interior = mesh.interior_vertices();
        let boundary_nodes: Vec<usize> = (0..mesh.n_vertices()).filter(|&v| mesh.is_boundary(v)).collect();
        if interior.is_empty() {
            return Err(Error::InvalidMesh("mesh has no interior vertices".into()));
        }
        let (s_ii, _) = stiffness.principal_submatrix(&interior);
        let factor = SkylineLdl::factor(&s_ii)?;
        let (nodes, weights) = gauss_legendre(BOUNDARY_GAUSS_POINTS);
        let mut quad = Vec::new();
        for (a, b) in mesh.boundary_edges() {
            let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
            let e = pb - pa;
            // domain on the left, so the outward normal is e rotated by −π/2
            let normal = Point2::new(e.y, -e.x) * (1.0 / e.norm());
            for (t, w) in nodes.iter().zip(&weights) {
                let z = pa + e * (0.5 * (t + 1.0));
                quad.push((z, normal * (0.5 * w * e.norm())));
            }
        }
        let locator = Locator::new(&mesh);
        Ok(Self {
            mesh,
            stiffness,
            interior,
            boundary_nodes,
            factor,
            quad,
            locator,
            quantum: CACHE_QUANTUM * diameter,
            cache: RwLock::new(HashMap::new()),
        })
    }

    fn key(&self, a: Point2) -> (i64, i64) {
        ((a.x / self.quantum).round() as i64, (a.y / self.quantum).round() as i64)
    }

    fn extend_harmonic(&self, a: Point2) -> Vec<f64> {
        let n = self.mesh.n_vertices();
        let mut w = vec![0.0; n];
        for &v in &self.boundary_nodes {
            w[v] = INV_2PI * self.mesh.vertices()[v].dist(a).ln();
        }
        let sw = self.stiffness.matvec(&w);
        let rhs: Vec<f64> = self.interior.iter().map(|&i| -sw[i]).collect();
        let wi = self.factor.solve(&rhs);
        for (&i, v) in self.interior.iter().zip(wi) {
            w[i] = v;
        }
        w
    }

    fn field(&self, a: Point2) -> Arc<Vec<f64>> {
        let key = self.key(a);
        if let Some(w) = self.cache.read().expect("cache lock").get(&key) {
            return Arc::clone(w);
        }
        let w = Arc::new(self.extend_harmonic(a));
        let mut cache = self.cache.write().expect("cache lock");
        Arc::clone(cache.entry(key).or_insert(w))
    }

    fn boundary_term(&self, a: Point2, b: Point2) -> f64 {
        self.quad
            .iter()
            .map(|&(z, nw)| {
                let (da, db) = (z - a, z - b);
                let phi_a = INV_2PI * da.norm().ln();
                let phi_b = INV_2PI * db.norm().ln();
                let dn_a = INV_2PI * da.dot(nw) / da.norm_sq();
                let dn_b = INV_2PI * db.dot(nw) / db.norm_sq();
                0.5 * (phi_a * dn_b + phi_b * dn_a)
            })
            .sum()
    }

    fn regular(&self, x: Point2, y: Point2) -> f64 {
        let wx = self.field(x);
        let wy = self.field(y);
        self.boundary_term(x, y) - self.stiffness.quadratic_form(&wx, &wy)
    }

    fn residual(&self, a: Point2) -> f64 {
        let w = self.field(a);
        let sw = self.stiffness.matvec(&w);
        let r: Vec<f64> = self.interior.iter().map(|&i| sw[i]).collect();
        norm_inf(&r)
    }
}

/// Evaluates `G`, `K`, `R` and derivatives on a [`Domain`].
///
/// Immutable apart from an internal cache of harmonic extensions, so it can be
/// shared across threads.
pub struct GreenEvaluator {
    domain: Domain,
    fd_step: f64,
    mesh: Option<MeshGreen>,
}

impl std::fmt::Debug for GreenEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GreenEvaluator")
            .field("domain", &self.domain)
            .field("fd_step", &self.fd_step)
            .finish_non_exhaustive()
    }
}

fn log_kernel_grad_x(x: Point2, y: Point2) -> [f64; 2] {
    let d = x - y;
    let s = -INV_2PI / d.norm_sq();
    [s * d.x, s * d.y]
}

fn log_kernel_hess_xx(x: Point2, y: Point2) -> Mat2 {
    let d = x - y;
    let r2 = d.norm_sq();
    let c = -INV_2PI / r2;
    let dd = [d.x, d.y];
    let mut h = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let delta = if a == b { 1.0 } else { 0.0 };
            h[a][b] = c * (delta - 2.0 * dd[a] * dd[b] / r2);
        }
    }
    h
}

impl GreenEvaluator {
    pub fn new(domain: Domain) -> Result<Self> {
        let mesh = match &domain {
            Domain::UnitDisk => None,
            Domain::Meshed { mesh, diameter } => Some(MeshGreen::new(Arc::clone(mesh), *diameter)?),
        };
        Ok(Self { domain, fd_step: DEFAULT_FD_STEP, mesh })
    }

    pub fn unit_disk() -> Self {
        Self { domain: Domain::UnitDisk, fd_step: DEFAULT_FD_STEP, mesh: None }
    }

    /// Sets the finite-difference step (diameter units) for meshed domains.
    pub fn with_fd_step(mut self, step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidInput(format!("finite-difference step must be positive, got {step}")));
        }
        if step < MIN_FD_STEP {
            return Err(Error::StepUnderflow { step, resolution: MIN_FD_STEP });
        }
        self.fd_step = step;
        Ok(self)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn diameter(&self) -> f64 {
        self.domain.diameter()
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    fn check_inside(&self, p: Point2) -> Result<()> {
        if self.domain.contains(p) {
            Ok(())
        } else {
            Err(Error::OutsideDomain(p))
        }
    }

    fn check_pair(&self, x: Point2, y: Point2) -> Result<()> {
        self.check_inside(x)?;
        self.check_inside(y)?;
        if x.dist(y) < 1e-12 * self.diameter() {
            return Err(Error::CoincidentPoints(x, y));
        }
        Ok(())
    }

    fn h(&self) -> f64 {
        self.fd_step * self.diameter()
    }

    /// Regular part `K(x,y)`; `x = y` is allowed.
    pub fn regular(&self, x: Point2, y: Point2) -> Result<f64> {
        self.check_inside(x)?;
        self.check_inside(y)?;
        Ok(match &self.mesh {
            None => INV_4PI * (1.0 - 2.0 * x.dot(y) + x.norm_sq() * y.norm_sq()).ln(),
            Some(m) => m.regular(x, y),
        })
    }

    pub fn green(&self, x: Point2, y: Point2) -> Result<f64> {
        self.check_pair(x, y)?;
        Ok(-INV_2PI * x.dist(y).ln() + self.regular(x, y)?)
    }

    pub fn robin(&self, x: Point2) -> Result<f64> {
        self.check_inside(x)?;
        Ok(match &self.mesh {
            None => INV_2PI * (1.0 - x.norm_sq()).ln(),
            Some(m) => m.regular(x, x),
        })
    }

    pub fn robin_grad(&self, x: Point2) -> Result<[f64; 2]> {
        self.check_inside(x)?;
        match &self.mesh {
            None => {
                let s = -1.0 / (PI * (1.0 - x.norm_sq()));
                Ok([s * x.x, s * x.y])
            }
            Some(_) => fd_grad(|p| self.robin(p), x, self.h()),
        }
    }

    pub fn robin_hess(&self, x: Point2) -> Result<Mat2> {
        self.check_inside(x)?;
        match &self.mesh {
            None => {
                let q = 1.0 - x.norm_sq();
                let v = [x.x, x.y];
                let mut h = [[0.0; 2]; 2];
                for a in 0..2 {
                    for b in 0..2 {
                        let delta = if a == b { 1.0 } else { 0.0 };
                        h[a][b] = -(delta / q + 2.0 * v[a] * v[b] / (q * q)) / PI;
                    }
                }
                Ok(h)
            }
            Some(_) => fd_hess(|p| self.robin(p), x, self.h()),
        }
    }

    /// `∇_x K(x,y)`.
    pub fn regular_grad_x(&self, x: Point2, y: Point2) -> Result<[f64; 2]> {
        self.check_inside(x)?;
        self.check_inside(y)?;
        match &self.mesh {
            None => {
                let q = 1.0 - 2.0 * x.dot(y) + x.norm_sq() * y.norm_sq();
                let g = y * -2.0 + x * (2.0 * y.norm_sq());
                Ok([INV_4PI * g.x / q, INV_4PI * g.y / q])
            }
            Some(_) => fd_grad(|p| self.regular(p, y), x, self.h()),
        }
    }

    /// `∂²K/∂x_α∂x_β`.
    pub fn regular_hess_xx(&self, x: Point2, y: Point2) -> Result<Mat2> {
        self.check_inside(x)?;
        self.check_inside(y)?;
        match &self.mesh {
            None => {
                let q = 1.0 - 2.0 * x.dot(y) + x.norm_sq() * y.norm_sq();
                let g = y * -2.0 + x * (2.0 * y.norm_sq());
                let g = [g.x, g.y];
                let mut h = [[0.0; 2]; 2];
                for a in 0..2 {
                    for b in 0..2 {
                        let delta = if a == b { 1.0 } else { 0.0 };
                        h[a][b] = INV_4PI * (2.0 * y.norm_sq() * delta / q - g[a] * g[b] / (q * q));
                    }
                }
                Ok(h)
            }
            Some(_) => fd_hess(|p| self.regular(p, y), x, self.h()),
        }
    }

    /// `∂²K/∂x_α∂y_β`.
    pub fn regular_hess_xy(&self, x: Point2, y: Point2) -> Result<Mat2> {
        self.check_inside(x)?;
        self.check_inside(y)?;
        match &self.mesh {
            None => {
                let q = 1.0 - 2.0 * x.dot(y) + x.norm_sq() * y.norm_sq();
                let gx = y * -2.0 + x * (2.0 * y.norm_sq());
                let gy = x * -2.0 + y * (2.0 * x.norm_sq());
                let (xv, yv) = ([x.x, x.y], [y.x, y.y]);
                let (gx, gy) = ([gx.x, gx.y], [gy.x, gy.y]);
                let mut h = [[0.0; 2]; 2];
                for a in 0..2 {
                    for b in 0..2 {
                        let delta = if a == b { 1.0 } else { 0.0 };
                        let dxy = -2.0 * delta + 4.0 * xv[a] * yv[b];
                        h[a][b] = INV_4PI * (dxy / q - gx[a] * gy[b] / (q * q));
                    }
                }
                Ok(h)
            }
            Some(_) => fd_mixed(|p, q| self.regular(p, q), x, y, self.h()),
        }
    }

    pub fn grad_x(&self, x: Point2, y: Point2) -> Result<[f64; 2]> {
        self.check_pair(x, y)?;
        let l = log_kernel_grad_x(x, y);
        let k = self.regular_grad_x(x, y)?;
        Ok([l[0] + k[0], l[1] + k[1]])
    }

    /// `∇_y G(x,y) = ∇_x G(y,x)` by symmetry.
    pub fn grad_y(&self, x: Point2, y: Point2) -> Result<[f64; 2]> {
        self.grad_x(y, x)
    }

    pub fn hess_xx(&self, x: Point2, y: Point2) -> Result<Mat2> {
        self.check_pair(x, y)?;
        let l = log_kernel_hess_xx(x, y);
        let k = self.regular_hess_xx(x, y)?;
        Ok([[l[0][0] + k[0][0], l[0][1] + k[0][1]], [l[1][0] + k[1][0], l[1][1] + k[1][1]]])
    }

    pub fn hess_xy(&self, x: Point2, y: Point2) -> Result<Mat2> {
        self.check_pair(x, y)?;
        let l = log_kernel_hess_xx(x, y);
        let k = self.regular_hess_xy(x, y)?;
        Ok([[k[0][0] - l[0][0], k[0][1] - l[0][1]], [k[1][0] - l[1][0], k[1][1] - l[1][1]]])
    }

    /// Partial derivatives of `G` selected by `order`, flattened row-major.
    pub fn green_derivatives(&self, x: Point2, y: Point2, order: DerivativeOrder) -> Result<Vec<f64>> {
        Ok(match order {
            DerivativeOrder::GradX => self.grad_x(x, y)?.to_vec(),
            DerivativeOrder::GradY => self.grad_y(x, y)?.to_vec(),
            DerivativeOrder::HessXY => self.hess_xy(x, y)?.concat(),
            DerivativeOrder::HessXX => self.hess_xx(x, y)?.concat(),
        })
    }

    /// `G(p, y)` for many points `p`. On meshed domains the regular part is
    /// interpolated from the discrete harmonic extension, which is cheaper
    /// but only `O(h²)` accurate; points may coincide with mesh vertices.
    pub fn green_field(&self, y: Point2, points: &[Point2]) -> Result<Vec<f64>> {
        self.check_inside(y)?;
        match &self.mesh {
            None => points
                .iter()
                .map(|&p| {
                    let q = 1.0 - 2.0 * p.dot(y) + p.norm_sq() * y.norm_sq();
                    Ok(-INV_2PI * p.dist(y).ln() + INV_4PI * q.max(0.0).ln())
                })
                .collect(),
            Some(m) => {
                let w = m.field(y);
                points
                    .iter()
                    .map(|&p| {
                        let k = m.locator.interpolate(&m.mesh, &w, p).ok_or(Error::OutsideDomain(p))?;
                        Ok(-INV_2PI * p.dist(y).ln() + k)
                    })
                    .collect()
            }
        }
    }

    /// Max-norm of the discrete Laplacian of the cached harmonic extension for
    /// source `y` over interior vertices (zero for the analytic disk).
    pub fn correction_residual(&self, y: Point2) -> Result<f64> {
        self.check_inside(y)?;
        Ok(self.mesh.as_ref().map_or(0.0, |m| m.residual(y)))
    }

    /// Number of cached harmonic extensions.
    pub fn cache_len(&self) -> usize {
        self.mesh.as_ref().map_or(0, |m| m.cache.read().expect("cache lock").len())
    }
}

fn richardson(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}

fn fd_grad(f: impl Fn(Point2) -> Result<f64>, x: Point2, h: f64) -> Result<[f64; 2]> {
    let mut g = [0.0; 2];
    for (a, ga) in g.iter_mut().enumerate() {
        let e = Point2::unit(a);
        let d = |h: f64| -> Result<f64> { Ok((f(x + e * h)? - f(x - e * h)?) / (2.0 * h)) };
        *ga = richardson(d(h)?, d(0.5 * h)?);
    }
    Ok(g)
}

fn fd_hess(f: impl Fn(Point2) -> Result<f64>, x: Point2, h: f64) -> Result<Mat2> {
    let f0 = f(x)?;
    let mut m = [[0.0; 2]; 2];
    for a in 0..2 {
        let ea = Point2::unit(a);
        let d = |h: f64| -> Result<f64> { Ok((f(x + ea * h)? - 2.0 * f0 + f(x - ea * h)?) / (h * h)) };
        m[a][a] = richardson(d(h)?, d(0.5 * h)?);
    }
    let (e0, e1) = (Point2::unit(0), Point2::unit(1));
    let d = |h: f64| -> Result<f64> {
        Ok((f(x + e0 * h + e1 * h)? - f(x + e0 * h - e1 * h)? - f(x - e0 * h + e1 * h)? + f(x - e0 * h - e1 * h)?)
            / (4.0 * h * h))
    };
    let off = richardson(d(h)?, d(0.5 * h)?);
    m[0][1] = off;
    m[1][0] = off;
    Ok(m)
}

fn fd_mixed(f: impl Fn(Point2, Point2) -> Result<f64>, x: Point2, y: Point2, h: f64) -> Result<Mat2> {
    let mut m = [[0.0; 2]; 2];
    for (a, row) in m.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            let (ea, eb) = (Point2::unit(a), Point2::unit(b));
            let d = |h: f64| -> Result<f64> {
                Ok((f(x + ea * h, y + eb * h)? - f(x + ea * h, y - eb * h)? - f(x - ea * h, y + eb * h)?
                    + f(x - ea * h, y - eb * h)?)
                    / (4.0 * h * h))
            };
            *v = richardson(d(h)?, d(0.5 * h)?);
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::project_to_unit_circle;

    #[test]
    fn disk_closed_forms() {
        let ev = GreenEvaluator::unit_disk();
        let g = ev.green(Point2::ORIGIN, Point2::new(0.5, 0.0)).unwrap();
        assert!((g - INV_2PI * 2f64.ln()).abs() < 1e-14);
        assert!((ev.robin(Point2::new(0.5, 0.0)).unwrap() - INV_2PI * 0.75f64.ln()).abs() < 1e-15);
        let gx = ev.grad_x(Point2::ORIGIN, Point2::new(0.5, 0.0)).unwrap();
        assert!((gx[0] - INV_2PI * 1.5).abs() < 1e-14 && gx[1].abs() < 1e-15);
        // image-charge form: log(|y|·|x − y/|y|²| / |x − y|) / 2π
        let (x, y) = (Point2::new(0.2, -0.3), Point2::new(-0.4, 0.1));
        let image = INV_2PI * (y.norm() * (x - y * (1.0 / y.norm_sq())).norm() / x.dist(y)).ln();
        assert!((ev.green(x, y).unwrap() - image).abs() < 1e-14);
    }

    #[test]
    fn disk_derivatives_match_differences() {
        let ev = GreenEvaluator::unit_disk();
        let (x, y) = (Point2::new(0.3, 0.1), Point2::new(-0.2, 0.45));
        let h = 1e-5;
        let hxy = ev.hess_xy(x, y).unwrap();
        let hxx = ev.hess_xx(x, y).unwrap();
        for a in 0..2 {
            let e = Point2::unit(a);
            let gp = ev.grad_y(x + e * h, y).unwrap();
            let gm = ev.grad_y(x - e * h, y).unwrap();
            let xp = ev.grad_x(x + e * h, y).unwrap();
            let xm = ev.grad_x(x - e * h, y).unwrap();
            for b in 0..2 {
                assert!(((gp[b] - gm[b]) / (2.0 * h) - hxy[a][b]).abs() < 1e-6);
                assert!(((xp[b] - xm[b]) / (2.0 * h) - hxx[a][b]).abs() < 1e-6);
            }
        }
        let rh = ev.robin_hess(Point2::ORIGIN).unwrap();
        assert!((rh[0][0] + 1.0 / PI).abs() < 1e-15 && rh[0][1] == 0.0);
    }

    #[test]
    fn errors() {
        let ev = GreenEvaluator::unit_disk();
        let p = Point2::new(0.1, 0.1);
        assert!(matches!(ev.green(p, p), Err(Error::CoincidentPoints(..))));
        assert!(matches!(ev.robin(Point2::new(1.0, 0.0)), Err(Error::OutsideDomain(_))));
        assert!(matches!(
            GreenEvaluator::unit_disk().with_fd_step(1e-12),
            Err(Error::StepUnderflow { .. })
        ));
    }

    #[test]
    fn meshed_disk_approximates_closed_forms() {
        let mesh = Mesh::disk_uniform(96).unwrap().refine_uniform(Some(&project_to_unit_circle)).unwrap().mesh;
        let ev = GreenEvaluator::new(Domain::meshed(mesh)).unwrap();
        let disk = GreenEvaluator::unit_disk();
        let (x, y) = (Point2::new(0.3, 0.2), Point2::new(-0.1, -0.4));
        assert!((ev.green(x, y).unwrap() - disk.green(x, y).unwrap()).abs() < 2e-3);
        assert!((ev.green(x, y).unwrap() - ev.green(y, x).unwrap()).abs() < 1e-12);
        assert!((ev.robin(x).unwrap() - disk.robin(x).unwrap()).abs() < 2e-3);
        assert!(ev.correction_residual(y).unwrap() < 1e-10);
        let g = ev.robin_grad(x).unwrap();
        let gd = disk.robin_grad(x).unwrap();
        assert!((g[0] - gd[0]).abs() < 5e-3 && (g[1] - gd[1]).abs() < 5e-3);
    }

    #[test]
    fn domain_spec_parses() {
        let s: DomainSpec = serde_json::from_str(r#"{"kind":"unit-disk"}"#).unwrap();
        assert_eq!(s, DomainSpec::UnitDisk);
        let s: DomainSpec = serde_json::from_str(r#"{"kind":"mesh","file":"a.mesh"}"#).unwrap();
        assert_eq!(s, DomainSpec::Mesh { file: "a.mesh".into() });
    }
}
