//! Small direct solvers for the structures the cascade produces.
//!
//! * [`SliceHessian`]: symmetric tridiagonal plus a few rank-one terms, the
//!   Hessian of a spatial functional on one time slice.
//! * [`BandedSym`] / [`BandedLu`]: space-time systems ordered node-major
//!   (`k = i·N + n`), where both the periodic time wrap and the spatial stencil
//!   fall inside a half-bandwidth of `N`.
//! * [`DenseLu`] for capacitance matrices and least-squares problems.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::sqrt;

/// `coef · v vᵀ`, with `v` supported on `indices`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOne {
    pub coef: f64,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl RankOne {
    /// Dense vector on `0..len`.
    pub fn dense(coef: f64, values: Vec<f64>) -> Self {
        RankOne {
            coef,
            indices: (0..values.len()).collect(),
            values,
        }
    }

    /// Moves the support by `offset` and maps slot `i` through `map`.
    pub fn relocated(&self, coef_scale: f64, map: impl Fn(usize) -> usize) -> Self {
        RankOne {
            coef: self.coef * coef_scale,
            indices: self.indices.iter().map(|i| map(*i)).collect(),
            values: self.values.clone(),
        }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(i, v)| x[*i] * v)
            .sum()
    }

    fn squared_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// `y += coef · (v·x) v`.
    pub fn apply_add(&self, x: &[f64], y: &mut [f64]) {
        let s = self.coef * self.dot(x);
        for (i, v) in self.indices.iter().zip(&self.values) {
            y[*i] += s * v;
        }
    }
}

/// Symmetric tridiagonal matrix plus rank-one updates.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceHessian {
    pub diag: Vec<f64>,
    /// `off[i]` couples `i` and `i + 1`.
    pub off: Vec<f64>,
    pub rank_ones: Vec<RankOne>,
}

impl SliceHessian {
    pub fn zeros(n: usize) -> Self {
        SliceHessian {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
            rank_ones: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `self += s · other`.
    pub fn add_scaled(&mut self, s: f64, other: &SliceHessian) {
        for (a, b) in self.diag.iter_mut().zip(&other.diag) {
            *a += s * b;
        }
        for (a, b) in self.off.iter_mut().zip(&other.off) {
            *a += s * b;
        }
        for r in &other.rank_ones {
            self.rank_ones.push(r.relocated(s, |i| i));
        }
    }

    pub fn add_identity(&mut self, s: f64) {
        for d in &mut self.diag {
            *d += s;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for d in &mut self.diag {
            *d *= s;
        }
        for o in &mut self.off {
            *o *= s;
        }
        for r in &mut self.rank_ones {
            r.coef *= s;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            y[i] = self.diag[i] * x[i];
            if i > 0 {
                y[i] += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                y[i] += self.off[i] * x[i + 1];
            }
        }
        for r in &self.rank_ones {
            r.apply_add(x, &mut y);
        }
        y
    }

    /// Solves `H x = b` by the Thomas algorithm and Woodbury for the rank-one part.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let base = |rhs: &mut [f64]| thomas_solve(&self.diag, &self.off, rhs);
        solve_with_rank_ones(base, &self.rank_ones, b)
    }
}

/// In-place solve of a symmetric tridiagonal system without pivoting.
pub fn thomas_solve(diag: &[f64], off: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if n == 0 {
        return Ok(());
    }
    let mut c = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(Error::Singular(0));
    }
    rhs[0] /= pivot;
    for i in 1..n {
        c[i - 1] = off[i - 1] / pivot;
        pivot = diag[i] - off[i - 1] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::Singular(i));
        }
        rhs[i] = (rhs[i] - off[i - 1] * rhs[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

/// Solves `(B + Σ cₖ vₖ vₖᵀ) x = b` given an in-place solver for `B`.
///
/// Terms whose weight `|cₖ|·|vₖ|²` is negligible are dropped.
pub fn solve_with_rank_ones(
    mut base: impl FnMut(&mut [f64]) -> Result<()>,
    updates: &[RankOne],
    b: &[f64],
) -> Result<Vec<f64>> {
    let mut y = b.to_vec();
    base(&mut y)?;
    let active: Vec<&RankOne> = updates
        .iter()
        .filter(|r| r.coef != 0.0 && r.squared_norm() > 0.0)
        .collect();
    if active.is_empty() {
        return Ok(y);
    }
    let k = active.len();
    let n = b.len();
    // columns z_k = B⁻¹ v_k
    let mut z: Vec<Vec<f64>> = Vec::with_capacity(k);
    for r in &active {
        let mut col = vec![0.0; n];
        for (i, v) in r.indices.iter().zip(&r.values) {
            col[*i] = *v;
        }
        base(&mut col)?;
        z.push(col);
    }
    // capacitance C⁻¹ + Vᵀ B⁻¹ V
    let mut cap = DenseMatrix::zeros(k, k);
    for a in 0..k {
        for b2 in 0..k {
            let mut s = active[a].dot(&z[b2]);
            if a == b2 {
                s += 1.0 / active[a].coef;
            }
            cap.set(a, b2, s);
        }
    }
    let mut rhs: Vec<f64> = active.iter().map(|r| r.dot(&y)).collect();
    DenseLu::factor(cap)?.solve_in_place(&mut rhs);
    for (col, w) in z.iter().zip(&rhs) {
        for (yi, ci) in y.iter_mut().zip(col) {
            *yi -= w * ci;
        }
    }
    Ok(y)
}

#[derive(Debug, Clone)]
enum Band {
    Sym(BandedSym),
    General(BandedLu),
}

impl Band {
    fn dim(&self) -> usize {
        match self {
            Band::Sym(b) => b.dim(),
            Band::General(b) => b.dim(),
        }
    }

    fn solve_in_place(&self, x: &mut [f64]) -> Result<()> {
        match self {
            Band::Sym(b) => b.solve_in_place(x),
            Band::General(b) => b.solve_in_place(x),
        }
    }
}

/// A factored band matrix plus rank-one terms, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct FactoredSystem {
    band: Band,
    ones: Vec<RankOne>,
    /// `B⁻¹ vₖ` for every active rank-one term.
    z: Vec<Vec<f64>>,
    cap: Option<DenseLu>,
}

impl FactoredSystem {
    /// Cholesky of `band` plus the Woodbury correction for `rank_ones`.
    pub fn new(mut band: BandedSym, rank_ones: Vec<RankOne>) -> Result<Self> {
        band.factor()?;
        FactoredSystem::build(Band::Sym(band), rank_ones)
    }

    /// Same with a nonsymmetric band factored by LU.
    pub fn general(mut band: BandedLu, rank_ones: Vec<RankOne>) -> Result<Self> {
        band.factor()?;
        FactoredSystem::build(Band::General(band), rank_ones)
    }

    fn build(band: Band, rank_ones: Vec<RankOne>) -> Result<Self> {
        let ones: Vec<RankOne> = rank_ones
            .into_iter()
            .filter(|r| r.coef != 0.0 && r.squared_norm() > 0.0)
            .collect();
        let n = band.dim();
        let mut z = Vec::with_capacity(ones.len());
        for r in &ones {
            let mut col = vec![0.0; n];
            for (i, v) in r.indices.iter().zip(&r.values) {
                col[*i] = *v;
            }
            band.solve_in_place(&mut col)?;
            z.push(col);
        }
        let cap = if ones.is_empty() {
            None
        } else {
            let k = ones.len();
            let mut cap = DenseMatrix::zeros(k, k);
            for a in 0..k {
                for b in 0..k {
                    let mut s = ones[a].dot(&z[b]);
                    if a == b {
                        s += 1.0 / ones[a].coef;
                    }
                    cap.set(a, b, s);
                }
            }
            Some(DenseLu::factor(cap)?)
        };
        Ok(FactoredSystem { band, ones, z, cap })
    }

    pub fn dim(&self) -> usize {
        self.band.dim()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut y = b.to_vec();
        self.band.solve_in_place(&mut y)?;
        if let Some(cap) = &self.cap {
            let mut w: Vec<f64> = self.ones.iter().map(|r| r.dot(&y)).collect();
            cap.solve_in_place(&mut w);
            for (col, wk) in self.z.iter().zip(&w) {
                for (yi, ci) in y.iter_mut().zip(col) {
                    *yi -= wk * ci;
                }
            }
        }
        Ok(y)
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct DenseLu {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn factor(mut a: DenseMatrix) -> Result<Self> {
        let n = a.rows;
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, a.get(i, k).abs()))
                .fold(
                    (k, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
            if !(pmax > scale * 1e-300) || !pmax.is_finite() {
                return Err(Error::Singular(k));
            }
            if p != k {
                for j in 0..n {
                    a.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = a.get(k, k);
            for i in k + 1..n {
                let l = a.get(i, k) / pivot;
                a.set(i, k, l);
                if l != 0.0 {
                    for j in k + 1..n {
                        let v = a.get(k, j);
                        a.add(i, j, -l * v);
                    }
                }
            }
        }
        Ok(DenseLu { lu: a, perm })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.lu.rows;
        let pb: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        b.copy_from_slice(&pb);
        for i in 0..n {
            let mut s = b[i];
            for j in 0..i {
                s -= self.lu.get(i, j) * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= self.lu.get(i, j) * b[j];
            }
            b[i] = s / self.lu.get(i, i);
        }
    }
}

/// Symmetric positive definite band matrix, lower band stored row-wise.
#[derive(Debug, Clone)]
pub struct BandedSym {
    n: usize,
    bw: usize,
    data: Vec<f64>,
    factored: bool,
}

impl BandedSym {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedSym {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
            factored: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (i - j)
    }

    /// Adds `v` to entries `(i, j)` and `(j, i)` (once on the diagonal).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        assert!(
            r - c <= self.bw,
            "entry ({i}, {j}) outside band {}",
            self.bw
        );
        let k = self.idx(r, c);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r - c > self.bw {
            0.0
        } else {
            self.data[self.idx(r, c)]
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.bw);
            for j in lo..i {
                let a = self.data[self.idx(i, j)];
                y[i] += a * x[j];
                y[j] += a * x[i];
            }
            y[i] += self.data[self.idx(i, i)] * x[i];
        }
        y
    }

    /// In-place Cholesky factorization `A = L Lᵀ`.
    pub fn factor(&mut self) -> Result<()> {
        let bw = self.bw;
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(bw));
                let mut s = self.data[self.idx(i, j)];
                let ri = i * (bw + 1);
                let rj = j * (bw + 1);
                for k in klo..j {
                    s -= self.data[ri + (i - k)] * self.data[rj + (j - k)];
                }
                if i == j {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::Singular(i));
                    }
                    let k = self.idx(i, i);
                    self.data[k] = sqrt(s);
                } else {
                    let k = self.idx(i, j);
                    self.data[k] = s / self.data[self.idx(j, j)];
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        if !self.factored {
            return Err(Error::InvalidInput("banded matrix not factored".into()));
        }
        let bw = self.bw;
        for i in 0..self.n {
            let lo = i.saturating_sub(bw);
            let mut s = b[i];
            for k in lo..i {
                s -= self.data[self.idx(i, k)] * b[k];
            }
            b[i] = s / self.data[self.idx(i, i)];
        }
        for i in (0..self.n).rev() {
            let hi = (i + bw).min(self.n - 1);
            let mut s = b[i];
            for k in i + 1..=hi {
                s -= self.data[self.idx(k, i)] * b[k];
            }
            b[i] = s / self.data[self.idx(i, i)];
        }
        Ok(())
    }
}

/// General band matrix with equal lower and upper bandwidth; LU without pivoting.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    bw: usize,
    data: Vec<f64>,
    factored: bool,
}

impl BandedLu {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandedLu {
            n,
            bw,
            data: vec![0.0; n * (2 * bw + 1)],
            factored: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * (2 * self.bw + 1) + (j + self.bw - i)
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(i.abs_diff(j) <= self.bw, "entry ({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.bw);
                let hi = (i + self.bw).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.idx(i, j)] * x[j]).sum()
            })
            .collect()
    }

    pub fn factor(&mut self) -> Result<()> {
        let (n, bw) = (self.n, self.bw);
        for k in 0..n {
            let pivot = self.data[self.idx(k, k)];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::Singular(k));
            }
            let hi = (k + bw).min(n - 1);
            for i in k + 1..=hi {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=hi {
                    let kj = self.data[self.idx(k, j)];
                    let ij = self.idx(i, j);
                    self.data[ij] -= l * kj;
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        if !self.factored {
            return Err(Error::InvalidInput("banded matrix not factored".into()));
        }
        let (n, bw) = (self.n, self.bw);
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let mut s = b[i];
            for k in lo..i {
                s -= self.data[self.idx(i, k)] * b[k];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + bw).min(n - 1);
            let mut s = b[i];
            for k in i + 1..=hi {
                s -= self.data[self.idx(i, k)] * b[k];
            }
            b[i] = s / self.data[self.idx(i, i)];
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn residual(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn slice_hessian_with_rank_ones_solves() {
        let mut r = rng::seeded(3);
        let n = 9;
        let mut h = SliceHessian::zeros(n);
        for i in 0..n {
            h.diag[i] = 4.0 + r.gen_range(0.0..1.0);
        }
        for o in &mut h.off {
            *o = -1.0 + r.gen_range(-0.2..0.2);
        }
        h.rank_ones
            .push(RankOne::dense(0.7, rng::uniform_field(&mut r, n, 1.0)));
        h.rank_ones
            .push(RankOne::dense(-0.05, rng::uniform_field(&mut r, n, 1.0)));
        let b = rng::uniform_field(&mut r, n, 2.0);
        let x = h.solve(&b).unwrap();
        assert!(residual(&h.apply(&x), &b) < 1e-12);
    }

    #[test]
    fn banded_cholesky_matches_product() {
        let mut r = rng::seeded(11);
        let (n, bw) = (30, 4);
        let mut a = BandedSym::zeros(n, bw);
        for i in 0..n {
            a.add(i, i, 10.0);
            for j in i.saturating_sub(bw)..i {
                a.add(i, j, r.gen_range(-1.0..1.0));
            }
        }
        let x_true = rng::uniform_field(&mut r, n, 1.0);
        let mut b = a.mul_vec(&x_true);
        let mut f = a.clone();
        f.factor().unwrap();
        f.solve_in_place(&mut b).unwrap();
        assert!(residual(&b, &x_true) < 1e-12);
    }

    #[test]
    fn banded_lu_matches_product() {
        let mut r = rng::seeded(12);
        let (n, bw) = (25, 3);
        let mut a = BandedLu::zeros(n, bw);
        for i in 0..n {
            a.add(i, i, 8.0);
            for j in i.saturating_sub(bw)..(i + bw + 1).min(n) {
                if j != i {
                    a.add(i, j, r.gen_range(-1.0..1.0));
                }
            }
        }
        let x_true = rng::uniform_field(&mut r, n, 1.0);
        let mut b = a.mul_vec(&x_true);
        let mut f = a.clone();
        f.factor().unwrap();
        f.solve_in_place(&mut b).unwrap();
        assert!(residual(&b, &x_true) < 1e-12);
    }

    #[test]
    fn dense_lu_pivots() {
        let mut a = DenseMatrix::zeros(3, 3);
        let rows = [[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]];
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                a.set(i, j, *v);
            }
        }
        let x_true = [1.0, -2.0, 0.5];
        let mut b = a.mul_vec(&x_true);
        DenseLu::factor(a).unwrap().solve_in_place(&mut b);
        assert!(residual(&b, &x_true) < 1e-14);
    }

    #[test]
    fn singular_systems_are_reported() {
        let mut a = BandedSym::zeros(3, 1);
        a.add(0, 0, 1.0);
        a.add(1, 0, 1.0);
        a.add(1, 1, 1.0);
        a.add(2, 2, 1.0);
        assert!(matches!(a.factor(), Err(Error::Singular(1))));
        assert!(thomas_solve(&[0.0, 1.0], &[1.0], &mut [1.0, 1.0]).is_err());
    }
}
