//! Block Krylov eigensolver for the symmetric pencil `A x = μ B x`.
//!
//! The caller supplies the shift-invert operator `x ↦ (A − σB)⁻¹ B x`; the
//! basis is kept `B`-orthonormal with two passes of classical Gram–Schmidt and
//! Ritz pairs are extracted from the pencil itself. Blocks wider than the
//! largest expected multiplicity are required to resolve degenerate pairs.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dense::sym_eigen_sorted;
use super::sparse::{dot, norm2, CsrMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub enum Select {
    /// the `k` smallest eigenvalues (use with a shift below the spectrum)
    Lowest,
    /// the `k` eigenvalues closest to the shift
    Nearest(f64),
}

#[derive(Debug, Clone)]
pub struct KrylovOptions {
    pub block: usize,
    pub max_basis: usize,
    pub max_restarts: usize,
    /// relative residual `‖Ax − μBx‖ / ‖Ax‖`
    pub tol: f64,
    pub seed: u64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self { block: 4, max_basis: 160, max_restarts: 20, tol: 1e-10, seed: 0x5eed }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

struct Basis<'a> {
    a: &'a CsrMatrix,
    b: &'a CsrMatrix,
    q: Vec<Vec<f64>>,
    aq: Vec<Vec<f64>>,
    bq: Vec<Vec<f64>>,
}

impl<'a> Basis<'a> {
    fn new(a: &'a CsrMatrix, b: &'a CsrMatrix) -> Self {
        Self { a, b, q: Vec::new(), aq: Vec::new(), bq: Vec::new() }
    }

    fn len(&self) -> usize {
        self.q.len()
    }

    /// B-orthogonalizes `z` against the basis and appends it; returns false if
    /// it was numerically dependent.
    fn push(&mut self, mut z: Vec<f64>) -> bool {
        let before = dot(&z, &self.b.matvec(&z)).max(0.0).sqrt();
        if before == 0.0 || !before.is_finite() {
            return false;
        }
        for _ in 0..2 {
            for (qi, bqi) in self.q.iter().zip(&self.bq) {
                let c = dot(&z, bqi);
                z.iter_mut().zip(qi).for_each(|(zv, qv)| *zv -= c * qv);
            }
        }
        let bz = self.b.matvec(&z);
        let nrm = dot(&z, &bz).max(0.0).sqrt();
        if nrm < 1e-10 * before {
            return false;
        }
        let inv = 1.0 / nrm;
        z.iter_mut().for_each(|v| *v *= inv);
        let bz: Vec<f64> = bz.into_iter().map(|v| v * inv).collect();
        let az = self.a.matvec(&z);
        self.q.push(z);
        self.bq.push(bz);
        self.aq.push(az);
        true
    }

    fn combine(vectors: &[Vec<f64>], coeffs: impl Iterator<Item = f64> + Clone) -> Vec<f64> {
        let n = vectors[0].len();
        let mut out = vec![0.0; n];
        for (v, c) in vectors.iter().zip(coeffs) {
            if c != 0.0 {
                out.iter_mut().zip(v).for_each(|(o, x)| *o += c * x);
            }
        }
        out
    }
}

struct Ritz {
    values: Vec<f64>,
    coeffs: DMatrix<f64>,
    order: Vec<usize>,
}

fn rayleigh_ritz(basis: &Basis, select: Select) -> Ritz {
    let d = basis.len();
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let v = dot(&basis.q[i], &basis.aq[j]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    let (values, coeffs) = sym_eigen_sorted(&m);
    let mut order: Vec<usize> = (0..d).collect();
    if let Select::Nearest(s) = select {
        order.sort_by(|&a, &b| (values[a] - s).abs().total_cmp(&(values[b] - s).abs()));
    }
    Ritz { values, coeffs, order }
}

/// Computes `k` eigenpairs of `A x = μ B x` (both symmetric, `B` positive
/// definite) selected by `select`, using the shift-invert operator `op`.
///
/// Returned pairs are sorted by ascending eigenvalue with `B`-orthonormal
/// vectors.
pub fn krylov_eigenpairs<F>(
    a: &CsrMatrix,
    b: &CsrMatrix,
    op: F,
    k: usize,
    select: Select,
    opts: &KrylovOptions,
) -> Result<EigenPairs>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = a.n();
    if k == 0 || k > n {
        return Err(Error::TooManyEigenpairs { requested: k, available: n });
    }
    let block = opts.block.max(1).min(n);
    let max_basis = opts.max_basis.max(k + 2 * block).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random_vec = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect() };

    let mut basis = Basis::new(a, b);
    let mut frontier = Vec::new();
    while frontier.len() < block {
        if basis.push(random_vec(&mut rng)) {
            frontier.push(basis.len() - 1);
        }
    }

    let mut restarts = 0;
    loop {
        // expand
        let mut next = Vec::new();
        for &i in &frontier {
            let z = op(&basis.q[i]);
            // a dependent image is replaced by a fresh random direction
            if basis.push(z) || (basis.len() < n && basis.push(random_vec(&mut rng))) {
                next.push(basis.len() - 1);
            }
            if basis.len() >= max_basis {
                break;
            }
        }
        frontier = next;

        let exhausted = basis.len() >= n;
        if basis.len() >= k + block || exhausted {
            let ritz = rayleigh_ritz(&basis, select);
            let chosen: Vec<usize> = ritz.order.iter().copied().take(k).collect();
            let mut pairs: Vec<(f64, Vec<f64>, f64)> = Vec::with_capacity(k);
            let mut converged = true;
            for &c in &chosen {
                let col = ritz.coeffs.column(c);
                let x = Basis::combine(&basis.q, col.iter().copied());
                let ax = Basis::combine(&basis.aq, col.iter().copied());
                let bx = Basis::combine(&basis.bq, col.iter().copied());
                let mu = ritz.values[c];
                let r: Vec<f64> = ax.iter().zip(&bx).map(|(p, q)| p - mu * q).collect();
                let rel = norm2(&r) / norm2(&ax).max(mu.abs() * norm2(&bx)).max(f64::MIN_POSITIVE);
                if rel > opts.tol {
                    converged = false;
                }
                pairs.push((mu, x, rel));
            }
            if converged || exhausted {
                pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
                return Ok(EigenPairs {
                    values: pairs.iter().map(|p| p.0).collect(),
                    residuals: pairs.iter().map(|p| p.2).collect(),
                    vectors: pairs.into_iter().map(|p| p.1).collect(),
                });
            }
            if basis.len() + block > max_basis || frontier.is_empty() {
                restarts += 1;
                if restarts > opts.max_restarts {
                    let worst = pairs.iter().map(|p| p.2).fold(0.0, f64::max);
                    return Err(Error::EigenBreakdown(format!(
                        "no convergence after {} restarts (worst residual {worst:e})",
                        opts.max_restarts
                    )));
                }
                // thick restart from the leading Ritz vectors
                let keep = (k + block).min(ritz.order.len());
                let kept: Vec<Vec<f64>> = ritz.order[..keep]
                    .iter()
                    .map(|&c| Basis::combine(&basis.q, ritz.coeffs.column(c).iter().copied()))
                    .collect();
                let residual_rank: Vec<usize> = {
                    let mut idx: Vec<usize> = (0..k).collect();
                    idx.sort_by(|&p, &q| pairs[q].2.total_cmp(&pairs[p].2));
                    idx
                };
                basis = Basis::new(a, b);
                let mut map = Vec::new();
                for v in kept {
                    map.push(if basis.push(v) { Some(basis.len() - 1) } else { None });
                }
                frontier = residual_rank
                    .into_iter()
                    .filter_map(|i| map.get(i).copied().flatten())
                    .take(block)
                    .collect();
                if frontier.is_empty() {
                    frontier = (0..basis.len().min(block)).collect();
                }
            }
        }
    }
}
