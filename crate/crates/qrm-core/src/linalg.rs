//! Dense complex linear algebra on `ndarray` matrices.
//!
//! Operators on the tri-partite space are stored in the ordered factorization
//! `H_A ⊗ H_C ⊗ H_B`, so the basis index of `|a, c, b⟩` is `(a·n_c + c)·n_b + b`.
//! Superoperators act on column-stacked vectorizations:
//! `vec(|i⟩⟨j|) = e_{i + j·n}` and `vec(A X B) = (Bᵀ ⊗ A) vec(X)`.

use ndarray::{Array1, Array2, Axis};
use ndarray_linalg::{Eig, EigVals, Eigh, Factorize, Inverse, Solve, SVD, UPLO};
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;
pub type CMatrix = Array2<C64>;
pub type CVector = Array1<C64>;

/// Default cap on `n_a·n_c·n_b`; the superoperator is then at most 4096×4096.
pub const DEFAULT_DIM_CAP: usize = 64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("empty matrix")]
    Empty,
    #[error("Hilbert dimension {0} exceeds cap {1}")]
    CapExceeded(usize, usize),
    #[error("vector length {0} is not a perfect square")]
    NotSquareLength(usize),
    #[error("LAPACK failure: {0}")]
    Lapack(String),
}

impl From<ndarray_linalg::error::LinalgError> for LinalgError {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        LinalgError::Lapack(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LinalgError>;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMatrix {
    Array2::from_diag_elem(n, ONE)
}

pub fn zeros(n: usize) -> CMatrix {
    Array2::zeros((n, n))
}

pub fn from_real(m: &Array2<f64>) -> CMatrix {
    m.mapv(|x| c(x, 0.0))
}

pub fn diag_real(d: &[f64]) -> CMatrix {
    let mut m = zeros(d.len());
    for (i, &x) in d.iter().enumerate() {
        m[[i, i]] = c(x, 0.0);
    }
    m
}

/// `|v⟩⟨w|`.
pub fn outer(v: &CVector, w: &CVector) -> CMatrix {
    Array2::from_shape_fn((v.len(), w.len()), |(i, j)| v[i] * w[j].conj())
}

/// Matrix unit `|i⟩⟨j|` in dimension `n`.
pub fn unit(n: usize, i: usize, j: usize) -> CMatrix {
    let mut m = zeros(n);
    m[[i, j]] = ONE;
    m
}

/// Validates the construction invariants: nonempty and finite.
pub fn check_matrix(m: &CMatrix) -> Result<()> {
    if m.is_empty() {
        return Err(LinalgError::Empty);
    }
    for ((i, j), z) in m.indexed_iter() {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(LinalgError::NonFinite(i, j));
        }
    }
    Ok(())
}

pub fn check_square(m: &CMatrix) -> Result<usize> {
    let (r, c) = m.dim();
    if r != c {
        return Err(LinalgError::NotSquare(r, c));
    }
    if r == 0 {
        return Err(LinalgError::Empty);
    }
    Ok(r)
}

pub fn dagger(a: &CMatrix) -> CMatrix {
    a.t().mapv(|z| z.conj())
}

pub fn trace(a: &CMatrix) -> C64 {
    a.diag().sum()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.dot(b) - b.dot(a)
}

pub fn fro_norm(a: &CMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_norm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).fold(0.0, |m, (x, y)| m.max((x - y).norm()))
}

/// `max |a − a†|` entrywise.
pub fn hermiticity_defect(a: &CMatrix) -> f64 {
    max_abs_diff(a, &dagger(a))
}

/// Induced 1-norm (max column sum).
pub fn norm1(a: &CMatrix) -> f64 {
    a.axis_iter(Axis(1))
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::zeros((ra * rb, ca * cb));
    for ((i, j), &x) in a.indexed_iter() {
        if x == ZERO {
            continue;
        }
        let mut blk = out.slice_mut(ndarray::s![i * rb..(i + 1) * rb, j * cb..(j + 1) * cb]);
        blk.zip_mut_with(b, |o, &y| *o = x * y);
    }
    out
}

pub fn kron3(a: &CMatrix, b: &CMatrix, c: &CMatrix) -> CMatrix {
    kron(&kron(a, b), c)
}

/// Dimensions of `H_A ⊗ H_C ⊗ H_B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct HilbertDims {
    pub n_a: usize,
    pub n_c: usize,
    pub n_b: usize,
}

impl HilbertDims {
    pub fn new(n_a: usize, n_c: usize, n_b: usize) -> Result<Self> {
        Self::with_cap(n_a, n_c, n_b, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(n_a: usize, n_c: usize, n_b: usize, cap: usize) -> Result<Self> {
        if n_a == 0 || n_c == 0 || n_b == 0 {
            return Err(LinalgError::Empty);
        }
        let n = n_a * n_c * n_b;
        if n > cap {
            return Err(LinalgError::CapExceeded(n, cap));
        }
        Ok(HilbertDims { n_a, n_c, n_b })
    }

    pub fn total(&self) -> usize {
        self.n_a * self.n_c * self.n_b
    }

    #[inline]
    pub fn index(&self, a: usize, c: usize, b: usize) -> usize {
        (a * self.n_c + c) * self.n_b + b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceOver {
    A,
    B,
    AB,
}

/// Partial trace over `A`, `B` or both. The result lives on `H_C⊗H_B`,
/// `H_A⊗H_C` or `H_C` respectively.
pub fn partial_trace(rho: &CMatrix, dims: HilbertDims, over: TraceOver) -> Result<CMatrix> {
    let n = check_square(rho)?;
    if n != dims.total() {
        return Err(LinalgError::Dimension(format!(
            "operator of size {n} on a space of dimension {}",
            dims.total()
        )));
    }
    Ok(match over {
        TraceOver::A => tr_a(rho, dims),
        TraceOver::B => tr_b(rho, dims),
        TraceOver::AB => tr_ab(rho, dims),
    })
}

pub(crate) fn tr_a(rho: &CMatrix, d: HilbertDims) -> CMatrix {
    let m = d.n_c * d.n_b;
    let mut out = Array2::zeros((m, m));
    for a in 0..d.n_a {
        let off = a * m;
        out += &rho.slice(ndarray::s![off..off + m, off..off + m]);
    }
    out
}

pub(crate) fn tr_b(rho: &CMatrix, d: HilbertDims) -> CMatrix {
    let m = d.n_a * d.n_c;
    let nb = d.n_b;
    Array2::from_shape_fn((m, m), |(i, j)| {
        (0..nb).map(|b| rho[[i * nb + b, j * nb + b]]).sum()
    })
}

pub(crate) fn tr_ab(rho: &CMatrix, d: HilbertDims) -> CMatrix {
    let mut out = Array2::zeros((d.n_c, d.n_c));
    for a in 0..d.n_a {
        for b in 0..d.n_b {
            for i in 0..d.n_c {
                let r = d.index(a, i, b);
                for j in 0..d.n_c {
                    out[[i, j]] += rho[[r, d.index(a, j, b)]];
                }
            }
        }
    }
    out
}

/// Column-stacking vectorization.
pub fn vectorize(rho: &CMatrix) -> CVector {
    rho.t().iter().copied().collect()
}

pub fn devectorize(v: &CVector, n: usize) -> Result<CMatrix> {
    if v.len() != n * n {
        return Err(LinalgError::NotSquareLength(v.len()));
    }
    Ok(Array2::from_shape_fn((n, n), |(i, j)| v[i + j * n]))
}

/// Infers `n` from `len = n²`.
pub fn devectorize_auto(v: &CVector) -> Result<CMatrix> {
    let n = (v.len() as f64).sqrt().round() as usize;
    devectorize(v, n)
}

/// A linear map on `B(Cⁿ)` stored as its `n²×n²` matrix on column-stacked vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOp {
    pub dim: usize,
    pub matrix: CMatrix,
}

impl SuperOp {
    pub fn from_matrix(dim: usize, matrix: CMatrix) -> Result<Self> {
        let (r, c) = matrix.dim();
        if r != dim * dim || c != dim * dim {
            return Err(LinalgError::Dimension(format!(
                "superoperator of size {r}x{c} for dimension {dim}"
            )));
        }
        Ok(SuperOp { dim, matrix })
    }

    /// Assembles the matrix by applying `f` to every matrix unit `|i⟩⟨j|`.
    pub fn from_map<F: Fn(&CMatrix) -> CMatrix>(dim: usize, f: F) -> Self {
        let n2 = dim * dim;
        let mut m = Array2::zeros((n2, n2));
        for j in 0..dim {
            for i in 0..dim {
                let img = f(&unit(dim, i, j));
                m.column_mut(i + j * dim).assign(&vectorize(&img));
            }
        }
        SuperOp { dim, matrix: m }
    }

    pub fn identity(dim: usize) -> Self {
        SuperOp { dim, matrix: identity(dim * dim) }
    }

    pub fn zero(dim: usize) -> Self {
        SuperOp { dim, matrix: zeros(dim * dim) }
    }

    /// `ρ ↦ a ρ b`.
    pub fn sandwich(a: &CMatrix, b: &CMatrix) -> Self {
        SuperOp { dim: a.nrows(), matrix: kron(&b.t().to_owned(), a) }
    }

    /// `ρ ↦ a ρ`.
    pub fn left(a: &CMatrix) -> Self {
        SuperOp { dim: a.nrows(), matrix: kron(&identity(a.nrows()), a) }
    }

    /// `ρ ↦ ρ b`.
    pub fn right(b: &CMatrix) -> Self {
        SuperOp { dim: b.nrows(), matrix: kron(&b.t().to_owned(), &identity(b.nrows())) }
    }

    /// `ρ ↦ [h, ρ]`.
    pub fn commutator(h: &CMatrix) -> Self {
        let n = h.nrows();
        let id = identity(n);
        SuperOp { dim: n, matrix: kron(&id, h) - kron(&h.t().to_owned(), &id) }
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let v = self.matrix.dot(&vectorize(rho));
        Array2::from_shape_fn((self.dim, self.dim), |(i, j)| v[i + j * self.dim])
    }

    pub fn apply_vec(&self, v: &CVector) -> CVector {
        self.matrix.dot(v)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &SuperOp) -> SuperOp {
        SuperOp { dim: self.dim, matrix: self.matrix.dot(&other.matrix) }
    }

    pub fn add(&self, other: &SuperOp) -> SuperOp {
        SuperOp { dim: self.dim, matrix: &self.matrix + &other.matrix }
    }

    pub fn sub(&self, other: &SuperOp) -> SuperOp {
        SuperOp { dim: self.dim, matrix: &self.matrix - &other.matrix }
    }

    pub fn scale(&self, s: C64) -> SuperOp {
        SuperOp { dim: self.dim, matrix: self.matrix.mapv(|z| z * s) }
    }

    /// Largest entrywise deviation between `self` and `f` over the matrix-unit basis.
    pub fn deviation_from_map<F: Fn(&CMatrix) -> CMatrix>(&self, f: F) -> f64 {
        let mut dev: f64 = 0.0;
        for j in 0..self.dim {
            for i in 0..self.dim {
                let e = unit(self.dim, i, j);
                dev = dev.max(max_abs_diff(&self.apply(&e), &f(&e)));
            }
        }
        dev
    }
}

/// Rotates `v` so that its largest-modulus entry (first one within 1e-8 of the
/// maximum) is real and positive.
pub fn fix_phase(v: &mut ndarray::ArrayViewMut1<C64>) {
    let mx = v.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if mx == 0.0 {
        return;
    }
    let k = v.iter().position(|z| z.norm() >= mx * (1.0 - 1e-8)).unwrap_or(0);
    let ph = v[k].conj() / v[k].norm();
    v.mapv_inplace(|z| z * ph);
}

fn cmp_complex(a: &C64, b: &C64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

/// Right eigenpairs of a general square matrix, sorted by `(Re, Im)`.
#[derive(Debug, Clone)]
pub struct EigDecomp {
    pub values: Vec<C64>,
    /// Unit-norm, phase-fixed eigenvectors as columns.
    pub vectors: CMatrix,
    /// `‖m v − λ v‖ / ‖m‖` per pair.
    pub residuals: Vec<f64>,
    /// True for eigenvalues in a cluster whose eigenvectors are numerically dependent.
    pub defective: Vec<bool>,
}

impl EigDecomp {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn any_defective(&self) -> bool {
        self.defective.iter().any(|&d| d)
    }
}

pub fn eig(m: &CMatrix) -> Result<EigDecomp> {
    let n = check_square(m)?;
    check_matrix(m)?;
    let (vals, vecs) = m.eig()?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| cmp_complex(&vals[i], &vals[j]));
    let values: Vec<C64> = order.iter().map(|&i| vals[i]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (k, &i) in order.iter().enumerate() {
        let mut col = vecs.column(i).to_owned();
        let nrm = vec_norm(&col);
        if nrm > 0.0 {
            col.mapv_inplace(|z| z / nrm);
        }
        fix_phase(&mut col.view_mut());
        vectors.column_mut(k).assign(&col);
    }
    let scale = fro_norm(m).max(f64::MIN_POSITIVE);
    let mv = m.dot(&vectors);
    let residuals = (0..n)
        .map(|k| {
            let r = &mv.column(k) - &vectors.column(k).mapv(|z| z * values[k]);
            r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / scale
        })
        .collect();

    // Defective eigenvalues split by ~sqrt(eps)·‖m‖, so cluster generously and
    // test the cluster's eigenvectors for linear dependence.
    let ctol = 1e-6 * scale;
    let mut defective = vec![false; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (values[end] - values[start]).norm() <= ctol {
            end += 1;
        }
        if end - start > 1 {
            let blk = vectors.slice(ndarray::s![.., start..end]).to_owned();
            let (_, s, _) = blk.svd(false, false)?;
            let smin = s.iter().copied().fold(f64::INFINITY, f64::min);
            if smin < 1e-6 {
                defective[start..end].iter_mut().for_each(|d| *d = true);
            }
        }
        start = end;
    }
    Ok(EigDecomp { values, vectors, residuals, defective })
}

/// Eigenvalues only, sorted by `(Re, Im)`.
pub fn eigvals(m: &CMatrix) -> Result<Vec<C64>> {
    check_square(m)?;
    check_matrix(m)?;
    let mut v = m.eigvals()?.to_vec();
    v.sort_by(cmp_complex);
    Ok(v)
}

/// Hermitian eigendecomposition with ascending eigenvalues and phase-fixed columns.
pub fn eigh(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    check_square(m)?;
    check_matrix(m)?;
    let herm = (m + &dagger(m)).mapv(|z| z * 0.5);
    // LAPACK sees the row-major buffer as the transpose, i.e. the conjugate.
    let (vals, vecs) = herm.eigh(UPLO::Lower)?;
    let mut vecs = vecs.mapv(|z| z.conj());
    for mut col in vecs.columns_mut() {
        fix_phase(&mut col);
    }
    Ok((vals.to_vec(), vecs))
}

/// Thin wrapper: `(U, s, Vᴴ)`.
pub fn svd(m: &CMatrix) -> Result<(CMatrix, Vec<f64>, CMatrix)> {
    check_matrix(m)?;
    let (u, s, vt) = m.svd(true, true)?;
    Ok((u.expect("requested U"), s.to_vec(), vt.expect("requested Vt")))
}

pub fn singular_values(m: &CMatrix) -> Result<Vec<f64>> {
    check_matrix(m)?;
    let (_, s, _) = m.svd(false, false)?;
    Ok(s.to_vec())
}

/// Number of singular values above `tol·σ_max`.
pub fn numeric_rank(m: &CMatrix, tol: f64) -> Result<usize> {
    let s = singular_values(m)?;
    let smax = s.first().copied().unwrap_or(0.0);
    Ok(s.iter().filter(|&&x| x > tol * smax).count())
}

/// Orthonormal basis of the numerical kernel: right singular vectors whose
/// singular value is at most `tol·σ_max`.
pub fn null_space(m: &CMatrix, tol: f64) -> Result<Vec<CVector>> {
    let n = check_square(m)?;
    let (_, s, vt) = svd(m)?;
    let smax = s.first().copied().unwrap_or(0.0);
    let mut out = Vec::new();
    for k in 0..n {
        let sk = s.get(k).copied().unwrap_or(0.0);
        if sk <= tol * smax {
            let mut v = vt.row(k).mapv(|z| z.conj());
            fix_phase(&mut v.view_mut());
            out.push(v);
        }
    }
    Ok(out)
}

pub fn inv(m: &CMatrix) -> Result<CMatrix> {
    check_square(m)?;
    Ok(m.inv()?)
}

pub fn solve_vec(a: &CMatrix, b: &CVector) -> Result<CVector> {
    check_square(a)?;
    Ok(a.solve(b)?)
}

/// Solves `a X = b` for a matrix right-hand side with one LU factorization.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let n = check_square(a)?;
    if b.nrows() != n {
        return Err(LinalgError::Dimension(format!("rhs has {} rows, expected {n}", b.nrows())));
    }
    let lu = a.factorize()?;
    let mut x = Array2::zeros(b.dim());
    for (k, col) in b.axis_iter(Axis(1)).enumerate() {
        x.column_mut(k).assign(&lu.solve(&col.to_owned())?);
    }
    Ok(x)
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152e0;

fn scaled(m: &CMatrix, s: f64) -> CMatrix {
    m.mapv(|z| z * s)
}

fn pade_low(a: &CMatrix, b: &[f64]) -> (CMatrix, CMatrix) {
    let n = a.nrows();
    let a2 = a.dot(a);
    let mut u = scaled(&identity(n), b[1]);
    let mut v = scaled(&identity(n), b[0]);
    let mut p = identity(n);
    for k in 1..b.len() / 2 {
        p = p.dot(&a2);
        u = u + scaled(&p, b[2 * k + 1]);
        v = v + scaled(&p, b[2 * k]);
    }
    (a.dot(&u), v)
}

fn pade13(a: &CMatrix) -> (CMatrix, CMatrix) {
    let b = &PADE13;
    let n = a.nrows();
    let id = identity(n);
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let inner_u = scaled(&a6, b[13]) + scaled(&a4, b[11]) + scaled(&a2, b[9]);
    let u = a6.dot(&inner_u) + scaled(&a6, b[7]) + scaled(&a4, b[5]) + scaled(&a2, b[3]) + scaled(&id, b[1]);
    let inner_v = scaled(&a6, b[12]) + scaled(&a4, b[10]) + scaled(&a2, b[8]);
    let v = a6.dot(&inner_v) + scaled(&a6, b[6]) + scaled(&a4, b[4]) + scaled(&a2, b[2]) + scaled(&id, b[0]);
    (a.dot(&u), v)
}

/// Matrix exponential by scaling and squaring with Padé approximants
/// (Higham, SIAM J. Matrix Anal. Appl. 26, 2005).
pub fn expm(m: &CMatrix) -> Result<CMatrix> {
    check_square(m)?;
    check_matrix(m)?;
    let nrm = norm1(m);
    for &(deg, theta) in THETA.iter() {
        if nrm <= theta {
            let b: &[f64] = match deg {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            let (u, v) = pade_low(m, b);
            return solve(&(&v - &u), &(&v + &u));
        }
    }
    let s = if nrm > THETA13 { (nrm / THETA13).log2().ceil().max(0.0) as i32 } else { 0 };
    let a = scaled(m, 0.5f64.powi(s));
    let (u, v) = pade13(&a);
    let mut r = solve(&(&v - &u), &(&v + &u))?;
    for _ in 0..s {
        r = r.dot(&r);
    }
    check_matrix(&r)?;
    Ok(r)
}

/// Real-matrix exponential through the complex routine.
pub fn expm_real(m: &Array2<f64>) -> Result<Array2<f64>> {
    Ok(expm(&from_real(m))?.mapv(|z| z.re))
}
