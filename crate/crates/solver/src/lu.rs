//! Sparse LU factorization of a simplex basis with product-form updates.
//!
//! Factorization is right-looking Gaussian elimination with Markowitz pivot
//! selection and threshold partial pivoting. Singletons are taken first, so
//! the many slack columns of a typical basis never cause fill-in. Basis
//! changes between refactorizations are applied as eta columns.

const PIVOT_ABS_TOL: f64 = 1e-11;
const THRESHOLD: f64 = 0.1;
const MARKOWITZ_CANDIDATES: usize = 4;

/// Positions (basis columns) and rows left unpivoted by a failed factorization.
#[derive(Debug, Clone)]
pub struct Singular {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct BasisFactor {
    m: usize,
    // L: one column of multipliers per elimination step
    l_pivot: Vec<usize>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    // U: one row per elimination step
    u_row: Vec<usize>,
    u_col: Vec<usize>,
    u_diag: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    // product-form updates
    eta_pos: Vec<usize>,
    eta_pivot: Vec<f64>,
    eta_start: Vec<usize>,
    eta_idx: Vec<usize>,
    eta_val: Vec<f64>,
}

impl BasisFactor {
    /// Factorizes the square matrix whose `k`-th column is `columns[k]`
    /// (sparse `(row, value)` pairs).
    pub fn factorize(m: usize, columns: &[Vec<(usize, f64)>]) -> Result<Self, Singular> {
        debug_assert_eq!(columns.len(), m);
        let mut cols: Vec<Vec<(usize, f64)>> =
            columns.iter().map(|c| c.iter().copied().filter(|&(_, v)| v != 0.0).collect()).collect();
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (j, col) in cols.iter().enumerate() {
            for &(i, _) in col {
                rows[i].push(j);
            }
        }
        let mut col_active = vec![true; m];
        let mut row_active = vec![true; m];

        let mut f = BasisFactor { m, ..Default::default() };
        f.l_start.push(0);
        f.u_start.push(0);
        f.eta_start.push(0);

        for _step in 0..m {
            let Some((p, q)) = choose_pivot(&cols, &rows, &col_active, &row_active) else {
                let positions = (0..m).filter(|&j| col_active[j]).collect();
                let rows = (0..m).filter(|&i| row_active[i]).collect();
                return Err(Singular { positions, rows });
            };

            let pivot_val = cols[q].iter().find(|&&(i, _)| i == p).map(|&(_, v)| v).unwrap();

            // U row: remaining active entries of row p, removed from their columns.
            f.u_row.push(p);
            f.u_col.push(q);
            f.u_diag.push(pivot_val);
            let prow = std::mem::take(&mut rows[p]);
            let mut urow: Vec<(usize, f64)> = Vec::with_capacity(prow.len());
            for &j in &prow {
                if j == q {
                    continue;
                }
                if let Some(pos) = cols[j].iter().position(|&(i, _)| i == p) {
                    let (_, v) = cols[j].swap_remove(pos);
                    urow.push((j, v));
                }
            }
            for &(j, v) in &urow {
                f.u_idx.push(j);
                f.u_val.push(v);
            }
            f.u_start.push(f.u_idx.len());

            // L column: multipliers for the other rows of column q.
            let qcol = std::mem::take(&mut cols[q]);
            f.l_pivot.push(p);
            let mut lcol: Vec<(usize, f64)> = Vec::with_capacity(qcol.len());
            for &(i, v) in &qcol {
                if i != p {
                    lcol.push((i, v / pivot_val));
                }
            }
            for &(i, l) in &lcol {
                f.l_idx.push(i);
                f.l_val.push(l);
                rows[i].retain(|&c| c != q);
            }
            f.l_start.push(f.l_idx.len());

            // Schur complement update.
            for &(j, upj) in &urow {
                for &(i, li) in &lcol {
                    let delta = -li * upj;
                    if let Some(e) = cols[j].iter_mut().find(|e| e.0 == i) {
                        e.1 += delta;
                    } else {
                        cols[j].push((i, delta));
                        rows[i].push(j);
                    }
                }
            }

            col_active[q] = false;
            row_active[p] = false;
        }
        Ok(f)
    }

    pub fn num_etas(&self) -> usize {
        self.eta_pos.len()
    }

    /// Solves `B x = rhs` in place. `rhs` is indexed by row on entry and by
    /// basis position on exit.
    pub fn ftran(&self, rhs: &mut [f64], work: &mut Vec<f64>) {
        let m = self.m;
        // forward elimination with L
        for k in 0..m {
            let p = self.l_pivot[k];
            let v = rhs[p];
            if v != 0.0 {
                for t in self.l_start[k]..self.l_start[k + 1] {
                    rhs[self.l_idx[t]] -= self.l_val[t] * v;
                }
            }
        }
        // back substitution with U
        work.clear();
        work.resize(m, 0.0);
        for k in (0..m).rev() {
            let mut s = rhs[self.u_row[k]];
            for t in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[t] * work[self.u_idx[t]];
            }
            work[self.u_col[k]] = s / self.u_diag[k];
        }
        rhs.copy_from_slice(work);
        // eta file
        for e in 0..self.eta_pos.len() {
            let r = self.eta_pos[e];
            let xr = rhs[r] / self.eta_pivot[e];
            if xr != 0.0 {
                for t in self.eta_start[e]..self.eta_start[e + 1] {
                    rhs[self.eta_idx[t]] -= self.eta_val[t] * xr;
                }
            }
            rhs[r] = xr;
        }
    }

    /// Solves `B^T y = rhs` in place. `rhs` is indexed by basis position on
    /// entry and by row on exit.
    pub fn btran(&self, rhs: &mut [f64], work: &mut Vec<f64>) {
        let m = self.m;
        for e in (0..self.eta_pos.len()).rev() {
            let r = self.eta_pos[e];
            let mut s = rhs[r];
            for t in self.eta_start[e]..self.eta_start[e + 1] {
                s -= self.eta_val[t] * rhs[self.eta_idx[t]];
            }
            rhs[r] = s / self.eta_pivot[e];
        }
        // U^T, pivot order
        work.clear();
        work.resize(m, 0.0);
        for k in 0..m {
            let w = rhs[self.u_col[k]] / self.u_diag[k];
            work[self.u_row[k]] = w;
            if w != 0.0 {
                for t in self.u_start[k]..self.u_start[k + 1] {
                    rhs[self.u_idx[t]] -= self.u_val[t] * w;
                }
            }
        }
        // L^T, reverse pivot order
        for k in (0..m).rev() {
            let p = self.l_pivot[k];
            let mut s = work[p];
            for t in self.l_start[k]..self.l_start[k + 1] {
                s -= self.l_val[t] * work[self.l_idx[t]];
            }
            work[p] = s;
        }
        rhs.copy_from_slice(work);
    }

    /// Records the replacement of basis position `r` by a column whose
    /// FTRAN image is `alpha` (indexed by position).
    pub fn push_eta(&mut self, r: usize, alpha: &[f64]) {
        self.eta_pos.push(r);
        self.eta_pivot.push(alpha[r]);
        for (i, &a) in alpha.iter().enumerate() {
            if i != r && a != 0.0 {
                self.eta_idx.push(i);
                self.eta_val.push(a);
            }
        }
        self.eta_start.push(self.eta_idx.len());
    }
}

fn choose_pivot(
    cols: &[Vec<(usize, f64)>],
    rows: &[Vec<usize>],
    col_active: &[bool],
    row_active: &[bool],
) -> Option<(usize, usize)> {
    let m = cols.len();
    let col_max = |j: usize| cols[j].iter().fold(0.0f64, |a, &(_, v)| a.max(v.abs()));

    // column singletons
    for j in 0..m {
        if col_active[j] && cols[j].len() == 1 && cols[j][0].1.abs() > PIVOT_ABS_TOL {
            return Some((cols[j][0].0, j));
        }
    }
    // row singletons passing the threshold test
    for i in 0..m {
        if row_active[i] && rows[i].len() == 1 {
            let j = rows[i][0];
            if let Some(&(_, v)) = cols[j].iter().find(|e| e.0 == i) {
                if v.abs() > PIVOT_ABS_TOL && v.abs() >= THRESHOLD * col_max(j) {
                    return Some((i, j));
                }
            }
        }
    }
    // Markowitz over the sparsest few columns
    let mut cand: Vec<(usize, usize)> =
        (0..m).filter(|&j| col_active[j] && !cols[j].is_empty()).map(|j| (cols[j].len(), j)).collect();
    if cand.is_empty() {
        return None;
    }
    let k = MARKOWITZ_CANDIDATES.min(cand.len());
    cand.select_nth_unstable(k - 1);
    cand.truncate(k);
    cand.sort_unstable();

    let mut best: Option<(usize, f64, usize, usize)> = None;
    for &(cnt, j) in &cand {
        let cmax = col_max(j);
        if cmax <= PIVOT_ABS_TOL {
            continue;
        }
        for &(i, v) in &cols[j] {
            if v.abs() < THRESHOLD * cmax || v.abs() <= PIVOT_ABS_TOL {
                continue;
            }
            let cost = (rows[i].len() - 1) * (cnt - 1);
            let better = match best {
                None => true,
                Some((bc, bv, _, _)) => cost < bc || (cost == bc && v.abs() > bv),
            };
            if better {
                best = Some((cost, v.abs(), i, j));
            }
        }
    }
    if let Some((_, _, i, j)) = best {
        return Some((i, j));
    }
    // fall back to any usable entry among the remaining columns
    let mut fallback: Option<(f64, usize, usize)> = None;
    for j in (0..m).filter(|&j| col_active[j]) {
        for &(i, v) in &cols[j] {
            if v.abs() > PIVOT_ABS_TOL && fallback.is_none_or(|(bv, _, _)| v.abs() > bv) {
                fallback = Some((v.abs(), i, j));
            }
        }
    }
    fallback.map(|(_, i, j)| (i, j))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_mul(cols: &[Vec<(usize, f64)>], x: &[f64], m: usize) -> Vec<f64> {
        let mut out = vec![0.0; m];
        for (j, col) in cols.iter().enumerate() {
            for &(i, v) in col {
                out[i] += v * x[j];
            }
        }
        out
    }

    fn dense_mul_t(cols: &[Vec<(usize, f64)>], y: &[f64]) -> Vec<f64> {
        cols.iter().map(|col| col.iter().map(|&(i, v)| v * y[i]).sum()).collect()
    }

    fn random_sparse(m: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<(usize, f64)>> {
        // diagonally anchored so it is nonsingular with overwhelming probability
        (0..m)
            .map(|j| {
                let mut col = vec![((j * 7) % m, 1.0 + rng.random::<f64>())];
                for _ in 0..3 {
                    let i = rng.random_range(0..m);
                    if col.iter().all(|e| e.0 != i) {
                        col.push((i, rng.random::<f64>() - 0.5));
                    }
                }
                col
            })
            .collect()
    }

    #[test]
    fn ftran_btran_solve_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut work = Vec::new();
        for m in [1, 5, 40, 200] {
            let cols = random_sparse(m, &mut rng);
            let f = BasisFactor::factorize(m, &cols).expect("nonsingular");
            let x_true: Vec<f64> = (0..m).map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
            let mut b = dense_mul(&cols, &x_true, m);
            f.ftran(&mut b, &mut work);
            for (a, e) in b.iter().zip(&x_true) {
                assert!((a - e).abs() < 1e-8, "ftran mismatch {a} vs {e}");
            }
            let y_true: Vec<f64> = (0..m).map(|_| rng.random::<f64>() - 0.5).collect();
            let mut c = dense_mul_t(&cols, &y_true);
            f.btran(&mut c, &mut work);
            for (a, e) in c.iter().zip(&y_true) {
                assert!((a - e).abs() < 1e-8, "btran mismatch {a} vs {e}");
            }
        }
    }

    #[test]
    fn eta_updates_track_column_replacement() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = 30;
        let mut work = Vec::new();
        let mut cols = random_sparse(m, &mut rng);
        let mut f = BasisFactor::factorize(m, &cols).unwrap();
        for step in 0..10 {
            let r = (step * 13) % m;
            // perturbed copy of the column it replaces keeps the basis well conditioned
            let mut newcol: Vec<(usize, f64)> = cols[r].iter().map(|&(i, v)| (i, v * (1.5 + step as f64))).collect();
            let extra = (r + 3) % m;
            if newcol.iter().all(|e| e.0 != extra) {
                newcol.push((extra, 0.1));
            }
            let mut alpha = vec![0.0; m];
            for &(i, v) in &newcol {
                alpha[i] = v;
            }
            f.ftran(&mut alpha, &mut work);
            f.push_eta(r, &alpha);
            cols[r] = newcol;
            let x_true: Vec<f64> = (0..m).map(|i| (i as f64).sin()).collect();
            let mut b = dense_mul(&cols, &x_true, m);
            f.ftran(&mut b, &mut work);
            for (a, e) in b.iter().zip(&x_true) {
                assert!((a - e).abs() < 1e-8);
            }
            let mut c = dense_mul_t(&cols, &x_true);
            f.btran(&mut c, &mut work);
            for (a, e) in c.iter().zip(&x_true) {
                assert!((a - e).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let cols = vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 2.0), (1, 2.0)], vec![(2, 1.0)]];
        let err = BasisFactor::factorize(3, &cols).unwrap_err();
        assert_eq!(err.positions.len(), 1);
        assert_eq!(err.rows.len(), 1);
    }
}
