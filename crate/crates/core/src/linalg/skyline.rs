//! Envelope (skyline) `L D Lᵀ` factorization with reverse Cuthill–McKee ordering.
//!
//! Used for every sparse solve in the crate: the Dirichlet Laplacian behind the
//! Green evaluator, the Newton Jacobian of the Gel'fand system (indefinite past
//! the fold) and the shift-invert operators of the eigensolver. No pivoting is
//! performed; the diagonal `D` carries the inertia of the matrix.

use std::collections::VecDeque;

use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// Reverse Cuthill–McKee permutation: `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).0.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    while order.len() < n {
        // start each component from a pseudo-peripheral node
        let seed = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| degree[i])
            .expect("unvisited node exists");
        let start = pseudo_peripheral(a, seed, &degree);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> = a.row(v).0.iter().copied().filter(|&w| !visited[w]).collect();
            nbrs.sort_by_key(|&w| degree[w]);
            for w in nbrs {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(a: &CsrMatrix, start: usize) -> (Vec<usize>, usize) {
    let n = a.n();
    let mut level = vec![usize::MAX; n];
    level[start] = 0;
    let mut queue = VecDeque::from([start]);
    let mut last = start;
    while let Some(v) = queue.pop_front() {
        last = v;
        for &w in a.row(v).0 {
            if level[w] == usize::MAX {
                level[w] = level[v] + 1;
                queue.push_back(w);
            }
        }
    }
    (level, last)
}

fn pseudo_peripheral(a: &CsrMatrix, seed: usize, degree: &[usize]) -> usize {
    let mut current = seed;
    let (mut levels, _) = bfs_levels(a, current);
    let mut ecc = levels.iter().filter(|&&l| l != usize::MAX).max().copied().unwrap_or(0);
    for _ in 0..10 {
        // lowest-degree node in the deepest level
        let candidate = (0..a.n())
            .filter(|&i| levels[i] == ecc)
            .min_by_key(|&i| degree[i])
            .unwrap_or(current);
        let (l2, _) = bfs_levels(a, candidate);
        let e2 = l2.iter().filter(|&&l| l != usize::MAX).max().copied().unwrap_or(0);
        if e2 <= ecc {
            break;
        }
        current = candidate;
        levels = l2;
        ecc = e2;
    }
    current
}

/// `P A Pᵀ = L D Lᵀ` in envelope storage.
#[derive(Debug, Clone)]
pub struct SkylineLdl {
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// `inv[old] = new`
    inv: Vec<usize>,
    /// first stored column of each (permuted) row
    first: Vec<usize>,
    /// offset of row `i`'s envelope in `data`
    offset: Vec<usize>,
    /// strictly-lower entries of `L`, row by row
    data: Vec<f64>,
    diag: Vec<f64>,
}

impl SkylineLdl {
    /// Factorizes with an RCM ordering computed from the pattern of `a`.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let perm = reverse_cuthill_mckee(a);
        Self::factor_with_ordering(a, perm)
    }

    pub fn factor_with_ordering(a: &CsrMatrix, perm: Vec<usize>) -> Result<Self> {
        let n = a.n();
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for old_i in 0..n {
            let i = inv[old_i];
            for &old_j in a.row(old_i).0 {
                let j = inv[old_j];
                if j < i {
                    first[i] = first[i].min(j);
                } else if i < j {
                    first[j] = first[j].min(i);
                }
            }
        }
        let mut offset = Vec::with_capacity(n + 1);
        let mut total = 0;
        for i in 0..n {
            offset.push(total);
            total += i - first[i];
        }
        offset.push(total);
        let mut data = vec![0.0; total];
        let mut diag = vec![0.0; n];
        for old_i in 0..n {
            let i = inv[old_i];
            let (cols, vals) = a.row(old_i);
            for (&old_j, &v) in cols.iter().zip(vals) {
                let j = inv[old_j];
                if j < i {
                    data[offset[i] + j - first[i]] = v;
                } else if j == i {
                    diag[i] = v;
                }
            }
        }

        let scale = diag.iter().fold(0.0f64, |m, d| m.max(d.abs())).max(f64::MIN_POSITIVE);
        let mut work = Vec::new();
        for i in 0..n {
            let fi = first[i];
            let len = i - fi;
            work.clear();
            work.resize(len, 0.0);
            // work[j - fi] = l_ij * d_j, accumulated left to right
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let row_j = &data[offset[j] + (k0 - fj)..offset[j] + (j - fj)];
                let w = &work[k0 - fi..j - fi];
                let s: f64 = w.iter().zip(row_j).map(|(a, b)| a * b).sum();
                work[j - fi] = data[offset[i] + j - fi] - s;
            }
            let row_i = &mut data[offset[i]..offset[i] + len];
            let mut d = diag[i];
            for (k, (l, &u)) in row_i.iter_mut().zip(&work).enumerate() {
                let dj = diag[fi + k];
                let lij = u / dj;
                *l = lij;
                d -= u * lij;
            }
            if !d.is_finite() || d.abs() <= 1e-14 * scale {
                return Err(Error::SingularMatrix { row: perm[i] });
            }
            diag[i] = d;
        }
        Ok(Self { n, perm, inv, first, offset, data, diag })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of (negative, positive) pivots, i.e. the inertia of the matrix.
    pub fn inertia(&self) -> (usize, usize) {
        let neg = self.diag.iter().filter(|&&d| d < 0.0).count();
        (neg, self.n - neg)
    }

    pub fn envelope_size(&self) -> usize {
        self.data.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        self.solve_into(b, &mut x);
        x
    }

    pub fn solve_into(&self, b: &[f64], out: &mut [f64]) {
        let n = self.n;
        let mut y: Vec<f64> = (0..n).map(|i| b[self.perm[i]]).collect();
        // L y = b
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            let s: f64 = row.iter().zip(&y[fi..i]).map(|(l, v)| l * v).sum();
            y[i] -= s;
        }
        for (yi, d) in y.iter_mut().zip(&self.diag) {
            *yi /= d;
        }
        // Lᵀ x = y
        for i in (0..n).rev() {
            let fi = self.first[i];
            let yi = y[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            for (l, v) in row.iter().zip(&mut y[fi..i]) {
                *v -= l * yi;
            }
        }
        for (old, o) in out.iter_mut().enumerate() {
            *o = y[self.inv[old]];
        }
    }
}
