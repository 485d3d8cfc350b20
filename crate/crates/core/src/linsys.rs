//! Sparse linear algebra for the desk-scale solves in this crate.
//!
//! Everything downstream (mixed biharmonic FEM, Monge-Ampère Newton steps,
//! harmonic initialization) funnels into one backend: assemble triplets into
//! CSR, reorder with reverse Cuthill-McKee, factor as a banded LU with
//! partial pivoting. A plain BiCGSTAB iteration is kept as a fallback for
//! the rare factorization failure.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinsysError {
    #[error("matrix is singular to working precision (pivot {pivot:.3e} at column {col})")]
    Singular { col: usize, pivot: f64 },
    #[error("iterative fallback did not reach tolerance {tol:.3e} (residual {residual:.3e})")]
    IterativeStagnation { tol: f64, residual: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Compressed sparse row matrix. Rows are sorted by column, duplicates merged.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> SparseMatrix {
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, _, _) in triplets {
            debug_assert!(r < n_rows);
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut order: Vec<usize> = vec![0; triplets.len()];
        {
            let mut cursor = counts.clone();
            for (k, &(r, _, _)) in triplets.iter().enumerate() {
                order[cursor[r]] = k;
                cursor[r] += 1;
            }
        }
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut row_buf: Vec<(usize, f64)> = Vec::new();
        for r in 0..n_rows {
            row_buf.clear();
            for &k in &order[counts[r]..counts[r + 1]] {
                let (_, c, v) = triplets[k];
                debug_assert!(c < n_cols);
                row_buf.push((c, v));
            }
            row_buf.sort_unstable_by_key(|&(c, _)| c);
            let mut i = 0;
            while i < row_buf.len() {
                let c = row_buf[i].0;
                let mut v = row_buf[i].1;
                let mut j = i + 1;
                while j < row_buf.len() && row_buf[j].0 == c {
                    v += row_buf[j].1;
                    j += 1;
                }
                cols.push(c);
                vals.push(v);
                i = j;
            }
            row_ptr.push(cols.len());
        }
        SparseMatrix { n_rows, n_cols, row_ptr, cols, vals }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        for r in 0..self.n_rows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[r] = acc;
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        match self.cols[lo..hi].binary_search(&c) {
            Ok(k) => self.vals[lo + k],
            Err(_) => 0.0,
        }
    }

    /// Largest |a_ij - a_ji| over the stored pattern. Square matrices only.
    pub fn max_asymmetry(&self) -> f64 {
        assert_eq!(self.n_rows, self.n_cols);
        let mut worst: f64 = 0.0;
        for r in 0..self.n_rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k];
                worst = worst.max((self.vals[k] - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn residual_norm(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut ax = vec![0.0; self.n_rows];
        self.matvec(x, &mut ax);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..self.n_rows {
            num += (ax[i] - b[i]) * (ax[i] - b[i]);
            den += b[i] * b[i];
        }
        (num.sqrt()) / den.sqrt().max(1e-300)
    }
}

/// Reverse Cuthill-McKee ordering of an undirected adjacency structure.
/// Returns `perm` with `perm[new] = old`. Deterministic: components are
/// visited from their minimum-degree vertex, neighbors sorted by
/// (degree, index).
pub fn reverse_cuthill_mckee(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let degree: Vec<usize> = adjacency.iter().map(|a| a.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_unstable_by_key(|&v| (degree[v], v));
    let mut queue = std::collections::VecDeque::new();
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut nbrs: Vec<usize> =
                adjacency[v].iter().copied().filter(|&u| !visited[u]).collect();
            nbrs.sort_unstable_by_key(|&u| (degree[u], u));
            for u in nbrs {
                if !visited[u] {
                    visited[u] = true;
                    queue.push_back(u);
                }
            }
        }
    }
    order.reverse();
    order
}

/// LU factorization of a band matrix with partial pivoting, LAPACK `gbtrf`
/// storage: entry (i, j) lives at `ab[(kl + ku + i - j) * n + j]`, with the
/// upper bandwidth widened to `kl + ku` for pivoting fill.
struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    fn band_index(&self, i: usize, j: usize) -> usize {
        (self.kl + self.ku + i - j) * self.n + j
    }

    fn factor(mut self) -> Result<BandedLu, LinsysError> {
        let n = self.n;
        let kl = self.kl;
        let ku = self.ku;
        let width = kl + ku; // widened upper bandwidth
        for j in 0..n {
            // pivot search in column j, rows j..=j+kl
            let i_max = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = 0.0f64;
            for i in j..=i_max {
                let v = self.ab[self.band_index(i, j)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(LinsysError::Singular { col: j, pivot: best });
            }
            self.ipiv[j] = p;
            if p != j {
                let c_hi = (j + width).min(n - 1);
                for c in j..=c_hi {
                    let a = self.band_index(j, c);
                    let b = self.band_index(p, c);
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[self.band_index(j, j)];
            let c_hi = (j + width).min(n - 1);
            for i in (j + 1)..=i_max {
                let idx = self.band_index(i, j);
                let m = self.ab[idx] / pivot;
                self.ab[idx] = m;
                if m != 0.0 {
                    for c in (j + 1)..=c_hi {
                        let u = self.ab[self.band_index(j, c)];
                        if u != 0.0 {
                            let t = self.band_index(i, c);
                            self.ab[t] -= m * u;
                        }
                    }
                }
            }
        }
        Ok(self)
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let kl = self.kl;
        let width = self.kl + self.ku;
        // forward: apply pivots and L
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != 0.0 {
                let i_max = (j + kl).min(n - 1);
                for i in (j + 1)..=i_max {
                    b[i] -= self.ab[self.band_index(i, j)] * bj;
                }
            }
        }
        // back substitution with U
        for j in (0..n).rev() {
            let c_hi = (j + width).min(n - 1);
            let mut acc = b[j];
            for c in (j + 1)..=c_hi {
                acc -= self.ab[self.band_index(j, c)] * b[c];
            }
            b[j] = acc / self.ab[self.band_index(j, j)];
        }
    }
}

/// Direct solver: RCM reordering wrapped around the banded LU.
pub struct DirectSolver {
    perm: Vec<usize>,     // perm[new] = old
    inv_perm: Vec<usize>, // inv_perm[old] = new
    lu: BandedLu,
}

impl DirectSolver {
    /// Factor a square sparse matrix. `perm` overrides the RCM ordering
    /// (useful when the caller's natural ordering is already banded).
    pub fn new(a: &SparseMatrix, perm: Option<Vec<usize>>) -> Result<DirectSolver, LinsysError> {
        if a.n_rows != a.n_cols {
            return Err(LinsysError::Dimension(format!(
                "expected square matrix, got {}x{}",
                a.n_rows, a.n_cols
            )));
        }
        let n = a.n_rows;
        let perm = perm.unwrap_or_else(|| {
            let mut adj = vec![Vec::new(); n];
            for r in 0..n {
                for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                    let c = a.cols[k];
                    if c != r {
                        adj[r].push(c);
                        adj[c].push(r);
                    }
                }
            }
            for l in adj.iter_mut() {
                l.sort_unstable();
                l.dedup();
            }
            reverse_cuthill_mckee(&adj)
        });
        let mut inv_perm = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv_perm[old] = new;
        }
        let mut kl = 0usize;
        let mut ku = 0usize;
        for r in 0..n {
            let pr = inv_perm[r];
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                let pc = inv_perm[a.cols[k]];
                if pr > pc {
                    kl = kl.max(pr - pc);
                } else {
                    ku = ku.max(pc - pr);
                }
            }
        }
        let mut ab = vec![0.0; (2 * kl + ku + 1) * n];
        let band_index = |i: usize, j: usize| (kl + ku + i - j) * n + j;
        for r in 0..n {
            let pr = inv_perm[r];
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                let pc = inv_perm[a.cols[k]];
                ab[band_index(pr, pc)] = a.vals[k];
            }
        }
        let lu = BandedLu { n, kl, ku, ab, ipiv: vec![0; n] }.factor()?;
        Ok(DirectSolver { perm, inv_perm, lu })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.n;
        assert_eq!(b.len(), n);
        let mut pb = vec![0.0; n];
        for new in 0..n {
            pb[new] = b[self.perm[new]];
        }
        self.lu.solve_in_place(&mut pb);
        let mut x = vec![0.0; n];
        for old in 0..n {
            x[old] = pb[self.inv_perm[old]];
        }
        x
    }
}

/// Unpreconditioned BiCGSTAB. Fallback path only; the direct solver is the
/// workhorse.
pub fn bicgstab(
    a: &SparseMatrix,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, LinsysError> {
    let n = a.n_rows;
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r0 = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut res = bnorm;
    for _ in 0..max_iter {
        let rho_new: f64 = r0.iter().zip(&r).map(|(a, b)| a * b).sum();
        if rho_new.abs() < 1e-300 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        a.matvec(&p, &mut v);
        let r0v: f64 = r0.iter().zip(&v).map(|(a, b)| a * b).sum();
        if r0v.abs() < 1e-300 {
            break;
        }
        alpha = rho_new / r0v;
        let s: Vec<f64> = (0..n).map(|i| r[i] - alpha * v[i]).collect();
        let mut t = vec![0.0; n];
        a.matvec(&s, &mut t);
        let tt: f64 = t.iter().map(|a| a * a).sum();
        omega = if tt > 0.0 { t.iter().zip(&s).map(|(a, b)| a * b).sum::<f64>() / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        res = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if res / bnorm < tol {
            return Ok(x);
        }
        rho = rho_new;
    }
    if res / bnorm < tol {
        Ok(x)
    } else {
        Err(LinsysError::IterativeStagnation { tol, residual: res / bnorm })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn dense_of(a: &SparseMatrix) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(a.n_rows, a.n_cols);
        for r in 0..a.n_rows {
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                m[(r, a.cols[k])] += a.vals[k];
            }
        }
        m
    }

    // deterministic xorshift so the tests need no rng dependency
    struct Rng(u64);
    impl Rng {
        fn next_f64(&mut self) -> f64 {
            self.0 ^= self.0 << 13;
            self.0 ^= self.0 >> 7;
            self.0 ^= self.0 << 17;
            (self.0 >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        }
    }

    fn random_banded(n: usize, half_band: usize, seed: u64) -> Vec<(usize, usize, f64)> {
        let mut rng = Rng(seed | 1);
        let mut t = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(half_band)..(i + half_band + 1).min(n) {
                let v = rng.next_f64();
                if (i == j) || v.abs() > 0.3 {
                    t.push((i, j, if i == j { v + 3.0 } else { v }));
                }
            }
        }
        t
    }

    #[test]
    fn from_triplets_merges_duplicates() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, -1.0)]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(1, 0), -1.0);
        assert_eq!(a.get(1, 1), 0.0);
    }

    #[test]
    fn direct_solver_matches_dense_lu() {
        for seed in [3u64, 17, 99] {
            let n = 60;
            let trip = random_banded(n, 6, seed);
            let a = SparseMatrix::from_triplets(n, n, &trip);
            let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
            let x = DirectSolver::new(&a, None).unwrap().solve(&b);
            let dense = dense_of(&a);
            let xd = dense
                .lu()
                .solve(&nalgebra::DVector::from_column_slice(&b))
                .expect("dense solve");
            for i in 0..n {
                assert!((x[i] - xd[i]).abs() < 1e-9, "i={} {} vs {}", i, x[i], xd[i]);
            }
        }
    }

    #[test]
    fn direct_solver_handles_indefinite_saddle() {
        // [ -I  B ; B^T  0 ] with B well-conditioned: zero diagonal block
        // forces pivoting.
        let m = 12;
        let mut trip = Vec::new();
        for i in 0..m {
            trip.push((i, i, -1.0));
            trip.push((i, m + i, 2.0));
            trip.push((m + i, i, 2.0));
            if i + 1 < m {
                trip.push((i, m + i + 1, 0.5));
                trip.push((m + i + 1, i, 0.5));
            }
        }
        let n = 2 * m;
        let a = SparseMatrix::from_triplets(n, n, &trip);
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let x = DirectSolver::new(&a, None).unwrap().solve(&b);
        assert!(a.residual_norm(&x, &b) < 1e-12);
    }

    #[test]
    fn direct_solver_reports_singular() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 1, 1.0)]);
        assert!(matches!(DirectSolver::new(&a, None), Err(LinsysError::Singular { .. })));
    }

    #[test]
    fn rcm_shrinks_bandwidth_on_a_grid() {
        // 2D grid graph numbered randomly; RCM must recover O(side) bandwidth
        let side = 10;
        let idx = |i: usize, j: usize| i * side + j;
        let mut adj = vec![Vec::new(); side * side];
        for i in 0..side {
            for j in 0..side {
                if i + 1 < side {
                    adj[idx(i, j)].push(idx(i + 1, j));
                    adj[idx(i + 1, j)].push(idx(i, j));
                }
                if j + 1 < side {
                    adj[idx(i, j)].push(idx(i, j + 1));
                    adj[idx(i, j + 1)].push(idx(i, j));
                }
            }
        }
        let perm = reverse_cuthill_mckee(&adj);
        let mut inv = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut bw = 0usize;
        for (v, nbrs) in adj.iter().enumerate() {
            for &u in nbrs {
                bw = bw.max(inv[v].abs_diff(inv[u]));
            }
        }
        assert!(bw <= 2 * side, "bandwidth {} too large", bw);
    }

    #[test]
    fn bicgstab_solves_spd_system() {
        let n = 40;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 4.0));
            if i + 1 < n {
                trip.push((i, i + 1, -1.0));
                trip.push((i + 1, i, -1.0));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, &trip);
        let b = vec![1.0; n];
        let x = bicgstab(&a, &b, 1e-12, 1000).unwrap();
        assert!(a.residual_norm(&x, &b) < 1e-10);
    }
}
