//! Matrix-free linear operators.
//!
//! Every matrix in the sensing and recovery pipeline (the SRM factors `D`, `F`,
//! `R`, the wavelet synthesis and the diagonal weights) is a [`LinearOperator`]:
//! a rectangular map with an exact adjoint that is only ever applied, never
//! stored densely. Operators are immutable after construction, and each
//! application allocates its own scratch, so a shared operator can be applied
//! from several threads at once.

use std::fmt;
use std::sync::Arc;

use rand_chacha::rand_core::RngCore;
use rustdct::{DctPlanner, TransformType2And3};

use crate::error::{Error, Result};
use crate::seed;

/// A real `rows x cols` linear map with its adjoint.
pub trait LinearOperator: Send + Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;

    /// `out = A x`. `x.len() == cols()`, `out.len() == rows()`.
    fn apply_into(&self, x: &[f64], out: &mut [f64]);

    /// `out = A^T y`. `y.len() == rows()`, `out.len() == cols()`.
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]);

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows()];
        self.apply_into(x, &mut out);
        out
    }

    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols()];
        self.adjoint_into(y, &mut out);
        out
    }
}

/// Shared handle to a type-erased operator.
pub type Operator = Arc<dyn LinearOperator>;

fn check_len(what: &str, got: usize, want: usize) {
    assert_eq!(got, want, "{what}: expected length {want}, got {got}");
}

#[derive(Debug, Clone, Copy)]
pub struct Identity {
    n: usize,
}

impl Identity {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl LinearOperator for Identity {
    fn rows(&self) -> usize {
        self.n
    }
    fn cols(&self) -> usize {
        self.n
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        check_len("identity input", x.len(), self.n);
        out.copy_from_slice(x);
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        self.apply_into(y, out)
    }
}

/// Orthonormal DCT-II on length-`n` vectors; the adjoint is the orthonormal DCT-III.
pub struct Dct {
    n: usize,
    plan: Arc<dyn TransformType2And3<f64>>,
    dc_scale: f64,
    ac_scale: f64,
}

impl fmt::Debug for Dct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dct").field("n", &self.n).finish()
    }
}

pub fn dct_op(n: usize) -> Result<Dct> {
    if n == 0 {
        return Err(Error::InvalidShape("DCT length must be at least 1".into()));
    }
    let plan = DctPlanner::new().plan_dct2(n);
    Ok(Dct {
        n,
        plan,
        dc_scale: (1.0 / n as f64).sqrt(),
        ac_scale: (2.0 / n as f64).sqrt(),
    })
}

impl LinearOperator for Dct {
    fn rows(&self) -> usize {
        self.n
    }
    fn cols(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        check_len("dct input", x.len(), self.n);
        out.copy_from_slice(x);
        let mut scratch = vec![0.0; self.plan.get_scratch_len()];
        self.plan.process_dct2_with_scratch(out, &mut scratch);
        out[0] *= self.dc_scale;
        for v in &mut out[1..] {
            *v *= self.ac_scale;
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        check_len("dct adjoint input", y.len(), self.n);
        // rustdct's DCT-III halves the first input, so the DC term is pre-doubled.
        out[0] = 2.0 * self.dc_scale * y[0];
        for (o, &v) in out[1..].iter_mut().zip(&y[1..]) {
            *o = self.ac_scale * v;
        }
        let mut scratch = vec![0.0; self.plan.get_scratch_len()];
        self.plan.process_dct3_with_scratch(out, &mut scratch);
    }
}

/// `(R x)_i = x_{perm[i]}` for a uniform random permutation.
#[derive(Debug, Clone)]
pub struct Permutation {
    perm: Vec<usize>,
}

pub fn perm_op(n: usize, seed: u64) -> Result<Permutation> {
    if n == 0 {
        return Err(Error::InvalidShape("permutation length must be at least 1".into()));
    }
    Ok(Permutation {
        perm: seed::permutation(n, seed),
    })
}

impl Permutation {
    pub fn indices(&self) -> &[usize] {
        &self.perm
    }
}

impl LinearOperator for Permutation {
    fn rows(&self) -> usize {
        self.perm.len()
    }
    fn cols(&self) -> usize {
        self.perm.len()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        check_len("permutation input", x.len(), self.perm.len());
        for (o, &p) in out.iter_mut().zip(&self.perm) {
            *o = x[p];
        }
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        check_len("permutation adjoint input", y.len(), self.perm.len());
        for (&v, &p) in y.iter().zip(&self.perm) {
            out[p] = v;
        }
    }
}

/// Row selection `D`: keeps `m` of `n` coordinates, chosen at random and kept in ascending order.
#[derive(Debug, Clone)]
pub struct Subsample {
    n: usize,
    selected: Vec<usize>,
}

pub fn subsample_op(n: usize, m: usize, seed: u64) -> Result<Subsample> {
    if m == 0 || m > n {
        return Err(Error::InvalidShape(format!(
            "subsample needs 0 < m <= n, got m={m}, n={n}"
        )));
    }
    Ok(Subsample {
        n,
        selected: seed::subset(n, m, seed),
    })
}

/// Like [`subsample_op`] but index 0 is always kept; the other `m - 1`
/// indices are a seeded subset of `1..n`.
pub fn dc_subsample_op(n: usize, m: usize, seed: u64) -> Result<Subsample> {
    if m == 0 || m > n {
        return Err(Error::InvalidShape(format!(
            "subsample needs 0 < m <= n, got m={m}, n={n}"
        )));
    }
    let mut selected = Vec::with_capacity(m);
    selected.push(0);
    selected.extend(seed::subset(n - 1, m - 1, seed).into_iter().map(|i| i + 1));
    Ok(Subsample { n, selected })
}

impl Subsample {
    pub fn selected(&self) -> &[usize] {
        &self.selected
    }
}

impl LinearOperator for Subsample {
    fn rows(&self) -> usize {
        self.selected.len()
    }
    fn cols(&self) -> usize {
        self.n
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        check_len("subsample input", x.len(), self.n);
        for (o, &i) in out.iter_mut().zip(&self.selected) {
            *o = x[i];
        }
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        check_len("subsample adjoint input", y.len(), self.selected.len());
        out.fill(0.0);
        for (&v, &i) in y.iter().zip(&self.selected) {
            out[i] = v;
        }
    }
}

/// Elementwise scaling by a strictly positive vector.
#[derive(Debug, Clone)]
pub struct Diagonal {
    w: Vec<f64>,
}

pub fn diag_op(w: &[f64]) -> Result<Diagonal> {
    if w.is_empty() {
        return Err(Error::InvalidShape("empty diagonal".into()));
    }
    if let Some((i, v)) = w.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Domain(format!("diagonal entry {i} is {v}, must be positive")));
    }
    Ok(Diagonal { w: w.to_vec() })
}

impl Diagonal {
    pub fn inverse(&self) -> Diagonal {
        Diagonal {
            w: self.w.iter().map(|v| 1.0 / v).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }
}

impl LinearOperator for Diagonal {
    fn rows(&self) -> usize {
        self.w.len()
    }
    fn cols(&self) -> usize {
        self.w.len()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        check_len("diagonal input", x.len(), self.w.len());
        for ((o, &v), &w) in out.iter_mut().zip(x).zip(&self.w) {
            *o = w * v;
        }
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        self.apply_into(y, out)
    }
}

/// Product `ops[0] * ops[1] * ... * ops[k-1]`, applied right to left.
#[derive(Clone)]
pub struct Composite {
    ops: Vec<Operator>,
}

impl fmt::Debug for Composite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shapes: Vec<_> = self.ops.iter().map(|o| (o.rows(), o.cols())).collect();
        f.debug_struct("Composite").field("factors", &shapes).finish()
    }
}

pub fn compose(ops: Vec<Operator>) -> Result<Composite> {
    if ops.is_empty() {
        return Err(Error::InvalidShape("cannot compose an empty list".into()));
    }
    for (k, pair) in ops.windows(2).enumerate() {
        if pair[0].cols() != pair[1].rows() {
            return Err(Error::InvalidShape(format!(
                "factor {k} has {} columns but factor {} has {} rows",
                pair[0].cols(),
                k + 1,
                pair[1].rows()
            )));
        }
    }
    Ok(Composite { ops })
}

impl Composite {
    pub fn factors(&self) -> &[Operator] {
        &self.ops
    }
}

impl LinearOperator for Composite {
    fn rows(&self) -> usize {
        self.ops[0].rows()
    }
    fn cols(&self) -> usize {
        self.ops[self.ops.len() - 1].cols()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let (first, rest) = self.ops.split_first().expect("non-empty");
        let Some((last, middle)) = rest.split_last() else {
            return first.apply_into(x, out);
        };
        let mut cur = last.forward(x);
        for op in middle.iter().rev() {
            cur = op.forward(&cur);
        }
        first.apply_into(&cur, out);
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let (last, rest) = self.ops.split_last().expect("non-empty");
        let Some((first, middle)) = rest.split_first() else {
            return last.adjoint_into(y, out);
        };
        let mut cur = first.adjoint(y);
        for op in middle {
            cur = op.adjoint(&cur);
        }
        last.adjoint_into(&cur, out);
    }
}

/// Parameters of a structurally random matrix `Phi = D F R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SrmSpec {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
}

impl SrmSpec {
    pub fn new(n: usize, m: usize, seed: u64) -> Result<Self> {
        if n == 0 || m == 0 || m > n {
            return Err(Error::InvalidShape(format!(
                "SRM needs 0 < m <= n, got m={m}, n={n}"
            )));
        }
        Ok(Self { n, m, seed })
    }

    /// `m = round(rate * n)`, rounding half to even.
    pub fn from_rate(n: usize, rate: f64, seed: u64) -> Result<Self> {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(Error::Domain(format!("measurement rate {rate} not in (0, 1]")));
        }
        let m = (rate * n as f64).round_ties_even() as usize;
        Self::new(n, m.max(1), seed)
    }

    pub fn rate(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    /// Seed of the row selection `D`.
    pub fn subsample_seed(&self) -> u64 {
        seed::split_seed(self.seed, 1)
    }

    /// Seed of the permutation `R`.
    pub fn permutation_seed(&self) -> u64 {
        seed::split_seed(self.seed, 2)
    }
}

/// `D F R`. The DC row of `F` is always sampled: every other DCT row sums to
/// zero, so after any permutation the signal mean is otherwise unobserved.
pub fn srm_op(spec: SrmSpec) -> Result<Composite> {
    let d = dc_subsample_op(spec.n, spec.m, spec.subsample_seed())?;
    let f = dct_op(spec.n)?;
    let r = perm_op(spec.n, spec.permutation_seed())?;
    compose(vec![Arc::new(d), Arc::new(f), Arc::new(r)])
}

/// Rayleigh-quotient estimate of the largest eigenvalue of `A^T A`.
///
/// Starts from a seeded uniform vector and performs `iters` products with
/// `A^T A`, returning the final quotient. Returns 0 for an operator that
/// annihilates the iterate.
pub fn power_iteration(op: &dyn LinearOperator, iters: usize, seed: u64) -> f64 {
    let mut rng = seed::rng_from_seed(seed);
    let mut v: Vec<f64> = (0..op.cols())
        .map(|_| 2.0 * seed::uniform_unit(&mut rng) - 1.0)
        .collect();
    // A zero draw is astronomically unlikely but would stall the iteration.
    if v.iter().all(|&x| x == 0.0) {
        let i = (rng.next_u64() % v.len() as u64) as usize;
        v[i] = 1.0;
    }
    let mut norm = norm2(&v);
    v.iter_mut().for_each(|x| *x /= norm);

    let mut estimate = 0.0;
    for _ in 0..iters.max(1) {
        let w = op.adjoint(&op.forward(&v));
        estimate = dot(&v, &w);
        norm = norm2(&w);
        if norm == 0.0 || !norm.is_finite() {
            return if norm == 0.0 { 0.0 } else { estimate };
        }
        v = w;
        v.iter_mut().for_each(|x| *x /= norm);
    }
    estimate
}

/// Dense row-major matrix, used only as a test oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        self.data
            .chunks_exact(self.cols)
            .map(|row| dot(row, x))
            .collect()
    }

    pub fn transpose_matvec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (row, &yi) in self.data.chunks_exact(self.cols).zip(y) {
            for (o, &a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut data = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in data[i * other.cols..(i + 1) * other.cols].iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        DenseMatrix {
            rows: self.rows,
            cols: other.cols,
            data,
        }
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.get(i, j);
            }
        }
        DenseMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

impl LinearOperator for DenseMatrix {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        check_len("dense input", x.len(), self.cols);
        check_len("dense output", out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = dot(row, x);
        }
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        check_len("dense adjoint input", y.len(), self.rows);
        check_len("dense adjoint output", out.len(), self.cols);
        out.fill(0.0);
        for (row, &yi) in self.data.chunks_exact(self.cols).zip(y) {
            for (o, &a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
    }
}

/// Largest column count [`materialize`] accepts.
pub const MATERIALIZE_MAX_COLS: usize = 4096;

/// Builds the dense matrix of `op` column by column. Test oracle only.
pub fn materialize(op: &dyn LinearOperator) -> Result<DenseMatrix> {
    let (rows, cols) = (op.rows(), op.cols());
    if cols > MATERIALIZE_MAX_COLS {
        return Err(Error::TooLargeToMaterialize {
            rows,
            cols,
            limit: MATERIALIZE_MAX_COLS,
        });
    }
    let mut data = vec![0.0; rows * cols];
    let mut e = vec![0.0; cols];
    let mut col = vec![0.0; rows];
    for j in 0..cols {
        e[j] = 1.0;
        op.apply_into(&e, &mut col);
        e[j] = 0.0;
        for (i, &v) in col.iter().enumerate() {
            data[i * cols + j] = v;
        }
    }
    Ok(DenseMatrix { rows, cols, data })
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = seed::rng_from_seed(seed);
        (0..n).map(|_| 2.0 * seed::uniform_unit(&mut rng) - 1.0).collect()
    }

    #[test]
    fn dct_single_point_is_identity() {
        assert_eq!(dct_op(1).unwrap().forward(&[5.0]), vec![5.0]);
    }

    #[test]
    fn dct_of_ones_is_dc_spike() {
        let y = dct_op(4).unwrap().forward(&[1.0; 4]);
        assert!(close(&y, &[2.0, 0.0, 0.0, 0.0], 1e-14), "{y:?}");
    }

    #[test]
    fn dct_matches_direct_formula() {
        for n in [2, 5, 8, 12, 64] {
            let dense = materialize(&dct_op(n).unwrap()).unwrap();
            for k in 0..n {
                let s = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
                for j in 0..n {
                    let want = s
                        * (std::f64::consts::PI * (2 * j + 1) as f64 * k as f64 / (2 * n) as f64)
                            .cos();
                    assert!((dense.get(k, j) - want).abs() < 1e-12, "n={n} k={k} j={j}");
                }
            }
        }
    }

    #[test]
    fn dct_is_orthogonal_at_eight() {
        let q = materialize(&dct_op(8).unwrap()).unwrap();
        let qtq = q.transpose().matmul(&q);
        for i in 0..8 {
            for j in 0..8 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((qtq.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_length_rejected() {
        assert!(dct_op(0).is_err());
        assert!(perm_op(0, 1).is_err());
    }

    #[test]
    fn permutation_round_trip_and_multiset() {
        let r = perm_op(50, 3).unwrap();
        let x = random_vec(50, 4);
        let y = r.forward(&x);
        assert_eq!(r.adjoint(&y), x);
        let (mut a, mut b) = (x.clone(), y);
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
    }

    #[test]
    fn permutation_regression_seed_42() {
        // Frozen output of descending Fisher-Yates over ChaCha8 seeded with 42.
        assert_eq!(perm_op(4, 42).unwrap().indices(), &[1, 0, 3, 2]);
    }

    #[test]
    fn permutation_matrix_structure() {
        let p = materialize(&perm_op(4, 42).unwrap()).unwrap();
        for i in 0..4 {
            let row: f64 = (0..4).map(|j| p.get(i, j)).sum();
            let col: f64 = (0..4).map(|j| p.get(j, i)).sum();
            assert_eq!((row, col), (1.0, 1.0));
        }
        assert!(p.data.iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn subsample_full_is_identity() {
        let d = subsample_op(6, 6, 1).unwrap();
        let x = random_vec(6, 2);
        assert_eq!(d.forward(&x), x);
    }

    #[test]
    fn subsample_masks_and_rows_orthonormal() {
        let d = subsample_op(20, 7, 5).unwrap();
        let x = random_vec(20, 6);
        let masked = d.adjoint(&d.forward(&x));
        for i in 0..20 {
            let want = if d.selected().contains(&i) { x[i] } else { 0.0 };
            assert_eq!(masked[i], want);
        }
        let y = random_vec(7, 7);
        assert_eq!(d.forward(&d.adjoint(&y)), y);
    }

    #[test]
    fn subsample_rejects_bad_m() {
        assert!(matches!(subsample_op(4, 5, 0), Err(Error::InvalidShape(_))));
        assert!(subsample_op(4, 0, 0).is_err());
    }

    #[test]
    fn diagonal_basics() {
        let ones = diag_op(&[1.0; 3]).unwrap();
        assert_eq!(ones.forward(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
        let w = diag_op(&[0.1, 1.0]).unwrap();
        let y = w.forward(&[10.0, 3.0]);
        assert!(close(&y, &[1.0, 3.0], 1e-15));
        let x = random_vec(2, 8);
        assert!(close(&w.forward(&w.inverse().forward(&x)), &x, 1e-14));
        assert!(matches!(diag_op(&[1.0, 0.0]), Err(Error::Domain(_))));
        assert!(diag_op(&[-2.0]).is_err());
    }

    #[test]
    fn compose_checks_shapes() {
        let a: Operator = Arc::new(subsample_op(8, 4, 0).unwrap());
        let b: Operator = Arc::new(Identity::new(6));
        assert!(matches!(compose(vec![a, b]), Err(Error::InvalidShape(_))));
        assert!(compose(vec![]).is_err());
    }

    #[test]
    fn compose_single_identity() {
        let c = compose(vec![Arc::new(Identity::new(3)) as Operator]).unwrap();
        let x = [1.0, -2.0, 3.5];
        assert_eq!(c.forward(&x), x);
        assert_eq!(c.adjoint(&x), x);
    }

    #[test]
    fn materialize_small_cases() {
        let i3 = materialize(&Identity::new(3)).unwrap();
        assert_eq!(i3.data, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let d = materialize(&diag_op(&[2.0, 3.0]).unwrap()).unwrap();
        assert_eq!(d.data, vec![2.0, 0.0, 0.0, 3.0]);
    }

    #[test]
    fn materialize_refuses_large() {
        let err = materialize(&Identity::new(MATERIALIZE_MAX_COLS + 1)).unwrap_err();
        assert!(matches!(err, Error::TooLargeToMaterialize { .. }));
    }

    #[test]
    fn dc_subsample_keeps_first_row() {
        let d = dc_subsample_op(100, 30, 9).unwrap();
        let sel = d.selected();
        assert_eq!(sel.len(), 30);
        assert_eq!(sel[0], 0);
        assert!(sel.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(dc_subsample_op(5, 1, 3).unwrap().selected(), &[0]);
        assert_eq!(dc_subsample_op(6, 6, 3).unwrap().selected(), &[0, 1, 2, 3, 4, 5]);
        assert!(dc_subsample_op(6, 0, 3).is_err());

        // a constant signal is seen by the SRM whatever the seed
        for seed in 0..20 {
            let phi = srm_op(SrmSpec::new(64, 8, seed).unwrap()).unwrap();
            let y = phi.forward(&[1.0; 64]);
            assert!((norm2(&y) - 8.0).abs() < 1e-10);
        }
    }

    #[test]
    fn srm_spec_validation() {
        assert!(SrmSpec::new(16, 17, 0).is_err());
        assert!(SrmSpec::from_rate(16, 0.0, 0).is_err());
        assert!(SrmSpec::from_rate(16, 1.5, 0).is_err());
        let s = SrmSpec::from_rate(1 << 20, 0.25, 9).unwrap();
        assert_eq!(s.m, 262_144);
        assert!((s.rate() - 0.25).abs() <= 1.0 / s.n as f64);
        assert_ne!(s.subsample_seed(), s.permutation_seed());
    }

    #[test]
    fn power_iteration_identity_and_zero() {
        let est = power_iteration(&Identity::new(17), 5, 1);
        assert!((est - 1.0).abs() < 1e-12);
        let zero = compose(vec![
            Arc::new(diag_op(&[1.0; 4]).unwrap()) as Operator,
            Arc::new(ZeroOp(4)) as Operator,
        ])
        .unwrap();
        assert_eq!(power_iteration(&zero, 10, 1), 0.0);
    }

    struct ZeroOp(usize);
    impl LinearOperator for ZeroOp {
        fn rows(&self) -> usize {
            self.0
        }
        fn cols(&self) -> usize {
            self.0
        }
        fn apply_into(&self, _x: &[f64], out: &mut [f64]) {
            out.fill(0.0);
        }
        fn adjoint_into(&self, _y: &[f64], out: &mut [f64]) {
            out.fill(0.0);
        }
    }
}
