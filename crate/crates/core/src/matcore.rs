//! Dense complex Hermitian linear algebra: PSD matrices, spectral functions,
//! the matrix geometric mean, fidelity / Bures / purified distances, the star
//! product, partial traces, and the vec isomorphism.
//!
//! All matrix functions go through a Hermitian eigendecomposition of the
//! explicitly Hermitized input; eigenvalues in the noise band
//! `[-psd_tol * lambda_max, 0)` are clipped to zero.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix, the working representation throughout the crate.
pub type CMat = DMatrix<Complex64>;
/// Dense complex vector.
pub type CVec = DVector<Complex64>;

/// Tolerance bundle used by every numerical routine. All values are relative.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    /// Hermiticity / negative-eigenvalue noise band for PSD validation.
    pub psd_tol: f64,
    /// Eigenvalues below `rank_tol * lambda_max` count as zero.
    pub rank_tol: f64,
    /// Post-condition and agreement checks.
    pub rtol: f64,
    /// Feasibility acceptance for Gamma-map outputs.
    pub feas_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            psd_tol: 1e-10,
            rank_tol: 1e-10,
            rtol: 1e-9,
            feas_tol: 1e-8,
        }
    }
}

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Hermitian part (A + A†)/2.
pub fn hermitize(a: &CMat) -> CMat {
    (a + a.adjoint()) * cr(0.5)
}

/// Frobenius distance ‖A − B‖_F.
pub fn fro_dist(a: &CMat, b: &CMat) -> f64 {
    (a - b).norm()
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

/// Real part of the trace; the imaginary part is discarded.
pub fn trace_re(a: &CMat) -> f64 {
    a.trace().re
}

/// Hilbert–Schmidt inner product ⟨A, B⟩ = Tr[A† B].
pub fn hs_inner(a: &CMat, b: &CMat) -> Complex64 {
    (a.adjoint() * b).trace()
}

/// Kronecker product with factor 0 leftmost (slowest-varying index).
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Ordered subsystem dimensions d_1, ..., d_n of a tensor-product space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimensionSpec {
    factors: Vec<usize>,
}

impl DimensionSpec {
    pub fn new(factors: Vec<usize>) -> Result<Self> {
        if factors.is_empty() || factors.iter().any(|&d| d == 0) {
            return Err(Error::BadSpec("all factors must be >= 1".into()));
        }
        Ok(DimensionSpec { factors })
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    pub fn count(&self) -> usize {
        self.factors.len()
    }

    pub fn factor(&self, k: usize) -> Result<usize> {
        self.factors.get(k).copied().ok_or(Error::BadIndex {
            index: k,
            count: self.factors.len(),
        })
    }

    pub fn total(&self) -> usize {
        self.factors.iter().product()
    }

    /// Flat index of a multi-index, factor 0 slowest.
    pub fn flat(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for (d, &m) in self.factors.iter().zip(multi) {
            idx = idx * d + m;
        }
        idx
    }

    /// Multi-index of a flat index.
    pub fn multi(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.factors.len()];
        for k in (0..self.factors.len()).rev() {
            out[k] = idx % self.factors[k];
            idx /= self.factors[k];
        }
        out
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Unitary matrix whose columns are the eigenvectors, in the same order.
    pub eigenvectors: CMat,
}

impl SpectralDecomposition {
    /// V diag(f(λ)) V†, Hermitized.
    pub fn apply_fn(&self, f: impl Fn(f64) -> f64) -> CMat {
        let d = self.eigenvalues.len();
        let diag = CMat::from_diagonal(&CVec::from_iterator(
            d,
            self.eigenvalues.iter().map(|&l| cr(f(l))),
        ));
        hermitize(&(&self.eigenvectors * diag * self.eigenvectors.adjoint()))
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().unwrap_or(&0.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *self.eigenvalues.first().unwrap_or(&0.0)
    }
}

/// Hermitian eigendecomposition of the Hermitized input, eigenvalues ascending.
pub fn spectral(a: &CMat) -> SpectralDecomposition {
    let h = hermitize(a);
    let d = h.nrows();
    if d == 0 {
        return SpectralDecomposition {
            eigenvalues: vec![],
            eigenvectors: CMat::zeros(0, 0),
        };
    }
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = CMat::zeros(d, d);
    for (col, &i) in order.iter().enumerate() {
        eigenvectors.set_column(col, &eig.eigenvectors.column(i));
    }
    SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

/// A validated Hermitian positive semidefinite matrix.
///
/// Construction Hermitizes the input and rejects it if the asymmetry or the
/// most negative eigenvalue exceeds the noise band `psd_tol * max(lambda_max, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdMatrix {
    mat: CMat,
}

impl PsdMatrix {
    pub fn new(mat: CMat, psd_tol: f64) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::NotSquare(mat.nrows(), mat.ncols()));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::BadSpec("non-finite matrix entry".into()));
        }
        let h = hermitize(&mat);
        let scale = mat.norm().max(1.0);
        let asym = fro_dist(&mat, &h);
        if asym > psd_tol.max(1e-12) * scale {
            return Err(Error::NotHermitian(asym));
        }
        let spec = spectral(&h);
        let lmax = spec.max_eigenvalue().max(1.0);
        let threshold = psd_tol * lmax;
        if spec.min_eigenvalue() < -threshold {
            return Err(Error::NotPsd {
                min_eig: spec.min_eigenvalue(),
                threshold,
            });
        }
        Ok(PsdMatrix { mat: h })
    }

    pub fn new_default(mat: CMat) -> Result<Self> {
        Self::new(mat, Tolerances::default().psd_tol)
    }

    /// Hermitizes and clips the noise-band negative eigenvalues instead of
    /// erroring; larger negatives still fail.
    pub fn repair(mat: CMat, psd_tol: f64) -> Result<Self> {
        let h = hermitize(&mat);
        let spec = spectral(&h);
        let lmax = spec.max_eigenvalue().max(1.0);
        let threshold = psd_tol * lmax;
        if spec.min_eigenvalue() < -threshold {
            return Err(Error::NotPsd {
                min_eig: spec.min_eigenvalue(),
                threshold,
            });
        }
        Ok(PsdMatrix {
            mat: spec.apply_fn(|l| l.max(0.0)),
        })
    }

    pub fn identity(d: usize) -> Self {
        PsdMatrix { mat: identity(d) }
    }

    pub fn zeros(d: usize) -> Self {
        PsdMatrix {
            mat: CMat::zeros(d, d),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.iter().any(|&x| x < 0.0) {
            return Err(Error::NotPsd {
                min_eig: diag.iter().cloned().fold(f64::INFINITY, f64::min),
                threshold: 0.0,
            });
        }
        Ok(PsdMatrix {
            mat: CMat::from_diagonal(&CVec::from_iterator(diag.len(), diag.iter().map(|&x| cr(x)))),
        })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn trace(&self) -> f64 {
        trace_re(&self.mat)
    }

    pub fn spectral(&self) -> SpectralDecomposition {
        spectral(&self.mat)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.spectral().min_eigenvalue()
    }

    /// Numerical rank at `rank_tol` relative to the largest eigenvalue.
    pub fn rank(&self, rank_tol: f64) -> usize {
        let spec = self.spectral();
        let cut = rank_tol * spec.max_eigenvalue().max(0.0);
        spec.eigenvalues.iter().filter(|&&l| l > cut).count()
    }

    pub fn is_pd(&self, rank_tol: f64) -> bool {
        let spec = self.spectral();
        spec.min_eigenvalue() > rank_tol * spec.max_eigenvalue().max(0.0)
    }
}

fn check_same_dim(a: &PsdMatrix, b: &PsdMatrix) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch(a.dim(), b.dim()));
    }
    Ok(())
}

/// PSD square root: R with R·R = A.
pub fn psd_sqrt(a: &PsdMatrix) -> PsdMatrix {
    PsdMatrix {
        mat: a.spectral().apply_fn(|l| l.max(0.0).sqrt()),
    }
}

/// Moore–Penrose pseudo-inverse restricted to supp(A). Eigenvalues below
/// `rank_tol * lambda_max` are treated as zero; the zero matrix maps to itself.
pub fn inv_on_support(a: &PsdMatrix, rank_tol: f64) -> PsdMatrix {
    let spec = a.spectral();
    let cut = rank_tol * spec.max_eigenvalue().max(0.0);
    PsdMatrix {
        mat: spec.apply_fn(|l| if l > cut { 1.0 / l } else { 0.0 }),
    }
}

/// Inverse square root on the support.
pub fn inv_sqrt_on_support(a: &PsdMatrix, rank_tol: f64) -> PsdMatrix {
    let spec = a.spectral();
    let cut = rank_tol * spec.max_eigenvalue().max(0.0);
    PsdMatrix {
        mat: spec.apply_fn(|l| if l > cut { 1.0 / l.sqrt() } else { 0.0 }),
    }
}

/// Orthogonal projector onto supp(A).
pub fn support_projector(a: &PsdMatrix, rank_tol: f64) -> PsdMatrix {
    let spec = a.spectral();
    let cut = rank_tol * spec.max_eigenvalue().max(0.0);
    PsdMatrix {
        mat: spec.apply_fn(|l| if l > cut { 1.0 } else { 0.0 }),
    }
}

/// Matrix geometric mean A # B = A^{1/2} (A^{-1/2} B A^{-1/2})^{1/2} A^{1/2}.
///
/// Both arguments must be strictly positive definite; near-singular inputs are
/// refused rather than regularized.
pub fn geometric_mean(a: &PsdMatrix, b: &PsdMatrix) -> Result<PsdMatrix> {
    check_same_dim(a, b)?;
    let rank_tol = Tolerances::default().rank_tol;
    for m in [a, b] {
        let spec = m.spectral();
        if spec.min_eigenvalue() <= rank_tol * spec.max_eigenvalue().max(0.0) {
            return Err(Error::NotPd(spec.min_eigenvalue()));
        }
    }
    let sa = psd_sqrt(a);
    let isa = inv_sqrt_on_support(a, rank_tol);
    let inner = PsdMatrix::repair(isa.matrix() * b.matrix() * isa.matrix(), 1e-8)?;
    let mid = psd_sqrt(&inner);
    PsdMatrix::repair(sa.matrix() * mid.matrix() * sa.matrix(), 1e-8)
}

/// Geometric mean of the support-restricted pseudo-inverse of `a` with `b`:
/// A⁻ # B, the operator appearing in every Gamma-map sandwich.
pub fn geometric_mean_pinv(a: &PsdMatrix, b: &PsdMatrix, rank_tol: f64) -> Result<PsdMatrix> {
    geometric_mean(&inv_on_support(a, rank_tol), b)
}

/// Star product A ★ B = B^{1/2} A B^{1/2}.
pub fn star(a: &CMat, b: &PsdMatrix) -> Result<CMat> {
    if a.nrows() != b.dim() || a.ncols() != b.dim() {
        return Err(Error::DimMismatch(a.nrows(), b.dim()));
    }
    let sb = psd_sqrt(b);
    Ok(sb.matrix() * a * sb.matrix())
}

/// Star-multiplies K onto factor k of a multipartite matrix:
/// A ★_k K = A ★ (I ⊗ ... ⊗ K ⊗ ... ⊗ I).
pub fn star_on_subsystem(
    a: &CMat,
    dims: &DimensionSpec,
    k: usize,
    kmat: &PsdMatrix,
) -> Result<CMat> {
    let dk = dims.factor(k)?;
    if kmat.dim() != dk {
        return Err(Error::DimMismatch(kmat.dim(), dk));
    }
    if a.nrows() != dims.total() || a.ncols() != dims.total() {
        return Err(Error::DimMismatch(a.nrows(), dims.total()));
    }
    let dl: usize = dims.factors()[..k].iter().product();
    let dr: usize = dims.factors()[k + 1..].iter().product();
    let full = kron(&kron(&identity(dl), kmat.matrix()), &identity(dr));
    let factor = PsdMatrix {
        mat: hermitize(&full),
    };
    star(a, &factor)
}

/// Uhlmann fidelity F(P, Q) = Tr[(Q^{1/2} P Q^{1/2})^{1/2}], computed through
/// the spectral decomposition. See `oracle::uhlmann_fidelity` for the
/// purification-based cross-check and `fidelity_nuclear` for the nuclear-norm
/// route.
pub fn fidelity(p: &PsdMatrix, q: &PsdMatrix) -> Result<f64> {
    check_same_dim(p, q)?;
    let sq = psd_sqrt(q);
    let inner = sq.matrix() * p.matrix() * sq.matrix();
    let spec = spectral(&inner);
    Ok(spec
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .sum())
}

/// Nuclear norm ‖√Q √P‖_1, the alternative route to fidelity.
pub fn fidelity_nuclear(p: &PsdMatrix, q: &PsdMatrix) -> Result<f64> {
    check_same_dim(p, q)?;
    let m = psd_sqrt(q).into_matrix() * psd_sqrt(p).matrix();
    let svd = m.svd(false, false);
    Ok(svd.singular_values.iter().sum())
}

/// Squared Bures distance B(P, Q) = Tr[P] + Tr[Q] − 2 F(P, Q).
pub fn bures_sq(p: &PsdMatrix, q: &PsdMatrix) -> Result<f64> {
    Ok(p.trace() + q.trace() - 2.0 * fidelity(p, q)?)
}

/// Purified distance between subnormalized states, clamped to [0, 1].
pub fn purified_dist(p: &PsdMatrix, q: &PsdMatrix) -> Result<f64> {
    check_same_dim(p, q)?;
    let rtol = Tolerances::default().rtol;
    for m in [p, q] {
        if m.trace() > 1.0 + rtol {
            return Err(Error::NotSubnormalized(m.trace()));
        }
    }
    let gf = fidelity(p, q)?
        + ((1.0 - p.trace()).max(0.0) * (1.0 - q.trace()).max(0.0)).sqrt();
    let g = gf.clamp(0.0, 1.0);
    Ok((1.0 - g * g).max(0.0).sqrt())
}

/// Partial trace keeping the listed factors (original order preserved).
pub fn partial_trace(m: &CMat, dims: &DimensionSpec, keep: &[usize]) -> Result<CMat> {
    let total = dims.total();
    if m.nrows() != total || m.ncols() != total {
        return Err(Error::DimMismatch(m.nrows(), total));
    }
    let n = dims.count();
    for &k in keep {
        if k >= n {
            return Err(Error::BadIndex { index: k, count: n });
        }
    }
    let mut keep_sorted: Vec<usize> = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    let kept_dims: Vec<usize> = keep_sorted.iter().map(|&k| dims.factors()[k]).collect();
    let traced: Vec<usize> = (0..n).filter(|k| !keep_sorted.contains(k)).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| dims.factors()[k]).collect();
    let dk: usize = kept_dims.iter().product();
    let dt: usize = traced_dims.iter().product::<usize>().max(1);

    let kept_spec = DimensionSpec::new(if kept_dims.is_empty() {
        vec![1]
    } else {
        kept_dims.clone()
    })?;
    let traced_spec = DimensionSpec::new(if traced_dims.is_empty() {
        vec![1]
    } else {
        traced_dims.clone()
    })?;

    let assemble = |kept_multi: &[usize], traced_multi: &[usize]| -> usize {
        let mut full = vec![0usize; n];
        for (pos, &k) in keep_sorted.iter().enumerate() {
            full[k] = kept_multi[pos.min(kept_multi.len().saturating_sub(1))];
        }
        for (pos, &k) in traced.iter().enumerate() {
            full[k] = traced_multi[pos.min(traced_multi.len().saturating_sub(1))];
        }
        dims.flat(&full)
    };

    let mut out = CMat::zeros(dk.max(1), dk.max(1));
    for r in 0..dk.max(1) {
        let rm = kept_spec.multi(r);
        for cidx in 0..dk.max(1) {
            let cm = kept_spec.multi(cidx);
            let mut acc = Complex64::new(0.0, 0.0);
            for t in 0..dt {
                let tm = traced_spec.multi(t);
                acc += m[(assemble(&rm, &tm), assemble(&cm, &tm))];
            }
            out[(r, cidx)] = acc;
        }
    }
    Ok(out)
}

/// vec isomorphism with the convention vec(|j⟩⟨i|) = |i⟩ ⊗ |j⟩: for an
/// operator A mapping a space of dimension `cols` into one of dimension
/// `rows`, entry (i, j) of the bipartite vector is A[j, i].
pub fn vec_of(a: &CMat) -> CVec {
    let (rows, cols) = (a.nrows(), a.ncols());
    CVec::from_fn(rows * cols, |idx, _| {
        let i = idx / rows;
        let j = idx % rows;
        a[(j, i)]
    })
}

/// Inverse of [`vec_of`].
pub fn unvec(v: &CVec, rows: usize, cols: usize) -> Result<CMat> {
    if v.len() != rows * cols {
        return Err(Error::DimMismatch(v.len(), rows * cols));
    }
    Ok(CMat::from_fn(rows, cols, |j, i| v[i * rows + j]))
}

/// Swaps the two tensor factors of a bipartite matrix on C^{d1} ⊗ C^{d2},
/// returning the matrix on C^{d2} ⊗ C^{d1}.
pub fn swap_factors(m: &CMat, d1: usize, d2: usize) -> Result<CMat> {
    if m.nrows() != d1 * d2 || m.ncols() != d1 * d2 {
        return Err(Error::DimMismatch(m.nrows(), d1 * d2));
    }
    let idx = |a: usize, b: usize| a * d2 + b;
    let jdx = |b: usize, a: usize| b * d1 + a;
    let mut out = CMat::zeros(d1 * d2, d1 * d2);
    for a in 0..d1 {
        for b in 0..d2 {
            for ap in 0..d1 {
                for bp in 0..d2 {
                    out[(jdx(b, a), jdx(bp, ap))] = m[(idx(a, b), idx(ap, bp))];
                }
            }
        }
    }
    Ok(out)
}

/// Entrywise transpose of the first tensor factor (partial transpose on the
/// input factor of a Choi matrix).
pub fn partial_transpose_first(m: &CMat, d1: usize, d2: usize) -> Result<CMat> {
    if m.nrows() != d1 * d2 || m.ncols() != d1 * d2 {
        return Err(Error::DimMismatch(m.nrows(), d1 * d2));
    }
    let idx = |a: usize, b: usize| a * d2 + b;
    let mut out = CMat::zeros(d1 * d2, d1 * d2);
    for a in 0..d1 {
        for b in 0..d2 {
            for ap in 0..d1 {
                for bp in 0..d2 {
                    out[(idx(ap, b), idx(a, bp))] = m[(idx(a, b), idx(ap, bp))];
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag(vals: &[f64]) -> PsdMatrix {
        PsdMatrix::from_real_diagonal(vals).unwrap()
    }

    #[test]
    fn sqrt_identity_and_diagonal() {
        let id = PsdMatrix::identity(3);
        assert!(fro_dist(psd_sqrt(&id).matrix(), id.matrix()) < 1e-14);
        let r = psd_sqrt(&diag(&[4.0, 9.0]));
        assert!(fro_dist(r.matrix(), diag(&[2.0, 3.0]).matrix()) < 1e-12);
    }

    #[test]
    fn inv_on_support_cases() {
        let a = inv_on_support(&diag(&[2.0, 0.0]), 1e-10);
        assert!(fro_dist(a.matrix(), diag(&[0.5, 0.0]).matrix()) < 1e-12);
        let b = inv_on_support(&diag(&[1.0, 4.0]), 1e-10);
        assert!(fro_dist(b.matrix(), diag(&[1.0, 0.25]).matrix()) < 1e-12);
        // |+><+| is its own pseudo-inverse
        let plus = PsdMatrix::new_default(CMat::from_row_slice(
            2,
            2,
            &[cr(0.5), cr(0.5), cr(0.5), cr(0.5)],
        ))
        .unwrap();
        let pi = inv_on_support(&plus, 1e-10);
        assert!(fro_dist(pi.matrix(), plus.matrix()) < 1e-12);
    }

    #[test]
    fn support_projector_cases() {
        let p = support_projector(&diag(&[3.0, 0.0]), 1e-10);
        assert!(fro_dist(p.matrix(), diag(&[1.0, 0.0]).matrix()) < 1e-12);
        let full = support_projector(&diag(&[0.4, 2.0]), 1e-10);
        assert!(fro_dist(full.matrix(), &identity(2)) < 1e-12);
        let z = support_projector(&PsdMatrix::zeros(2), 1e-10);
        assert!(z.matrix().norm() < 1e-14);
    }

    #[test]
    fn geometric_mean_cases() {
        // (I, A) -> sqrt(A)
        let a = diag(&[4.0, 9.0]);
        let g = geometric_mean(&PsdMatrix::identity(2), &a).unwrap();
        assert!(fro_dist(g.matrix(), psd_sqrt(&a).matrix()) < 1e-12);
        // commuting case sqrt(AB)
        let g2 = geometric_mean(&diag(&[1.0, 4.0]), &diag(&[9.0, 16.0])).unwrap();
        assert!(fro_dist(g2.matrix(), diag(&[3.0, 8.0]).matrix()) < 1e-11);
        // idempotent on equal args
        let g3 = geometric_mean(&a, &a).unwrap();
        assert!(fro_dist(g3.matrix(), a.matrix()) < 1e-11);
        // singular input refused
        assert!(matches!(
            geometric_mean(&diag(&[1.0, 0.0]), &a),
            Err(Error::NotPd(_))
        ));
    }

    #[test]
    fn star_cases() {
        let a = CMat::from_row_slice(2, 2, &[cr(1.0), c(0.0, 2.0), c(0.0, -2.0), cr(3.0)]);
        let s = star(&a, &PsdMatrix::identity(2)).unwrap();
        assert!(fro_dist(&s, &a) < 1e-14);
        let b = diag(&[4.0, 9.0]);
        let s2 = star(&identity(2), &b).unwrap();
        assert!(fro_dist(&s2, b.matrix()) < 1e-12);
        let s3 = star(diag(&[2.0, 3.0]).matrix(), &b).unwrap();
        assert!(fro_dist(&s3, diag(&[8.0, 27.0]).matrix()) < 1e-11);
    }

    #[test]
    fn fidelity_cases() {
        let rho = diag(&[0.25, 0.75]);
        assert_relative_eq!(fidelity(&rho, &rho).unwrap(), 1.0, max_relative = 1e-12);
        let e0 = diag(&[1.0, 0.0]);
        let e1 = diag(&[0.0, 1.0]);
        assert!(fidelity(&e0, &e1).unwrap().abs() < 1e-12);
        let p = diag(&[0.3, 0.7]);
        let q = diag(&[0.6, 0.4]);
        let expect = (0.3f64 * 0.6).sqrt() + (0.7f64 * 0.4).sqrt();
        assert_relative_eq!(fidelity(&p, &q).unwrap(), expect, max_relative = 1e-12);
    }

    #[test]
    fn bures_cases() {
        let rho = diag(&[0.25, 0.75]);
        assert!(bures_sq(&rho, &rho).unwrap().abs() < 1e-12);
        let e0 = diag(&[1.0, 0.0]);
        let e1 = diag(&[0.0, 1.0]);
        assert_relative_eq!(bures_sq(&e0, &e1).unwrap(), 2.0, max_relative = 1e-12);
        let p = diag(&[1.0, 0.0]);
        let q = diag(&[0.5, 0.5]);
        assert_relative_eq!(
            bures_sq(&p, &q).unwrap(),
            2.0 - 2.0 * 0.5f64.sqrt(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn purified_dist_cases() {
        let rho = diag(&[0.25, 0.75]);
        assert!(purified_dist(&rho, &rho).unwrap() < 1e-7);
        let e0 = diag(&[1.0, 0.0]);
        let e1 = diag(&[0.0, 1.0]);
        assert_relative_eq!(purified_dist(&e0, &e1).unwrap(), 1.0, max_relative = 1e-12);
        let half = diag(&[0.25, 0.25]);
        assert!(purified_dist(&half, &half).unwrap() < 1e-7);
        assert!(matches!(
            purified_dist(&diag(&[1.0, 1.0]), &rho),
            Err(Error::NotSubnormalized(_))
        ));
    }

    #[test]
    fn partial_trace_product_state() {
        let rho = diag(&[0.3, 0.7]);
        let sigma = diag(&[1.0, 2.0, 3.0]);
        let joint = kron(rho.matrix(), sigma.matrix());
        let dims = DimensionSpec::new(vec![2, 3]).unwrap();
        let m0 = partial_trace(&joint, &dims, &[0]).unwrap();
        assert!(fro_dist(&m0, &(rho.matrix() * cr(6.0))) < 1e-12);
        let m1 = partial_trace(&joint, &dims, &[1]).unwrap();
        assert!(fro_dist(&m1, sigma.matrix()) < 1e-12);
    }

    #[test]
    fn partial_trace_max_entangled() {
        let d = 3;
        let mut omega = CVec::zeros(d * d);
        for i in 0..d {
            omega[i * d + i] = cr(1.0);
        }
        let proj = &omega * omega.adjoint();
        let dims = DimensionSpec::new(vec![d, d]).unwrap();
        let m = partial_trace(&proj, &dims, &[0]).unwrap();
        assert!(fro_dist(&m, &identity(d)) < 1e-12);
    }

    #[test]
    fn vec_convention() {
        // vec(|0><0|) = (1,0,0,0)
        let mut a = CMat::zeros(2, 2);
        a[(0, 0)] = cr(1.0);
        let v = vec_of(&a);
        assert_eq!(v.len(), 4);
        assert!((v[0] - cr(1.0)).norm() < 1e-15);
        // vec(|1><0|) = |0> ⊗ |1> = (0,1,0,0)
        let mut b = CMat::zeros(2, 2);
        b[(1, 0)] = cr(1.0);
        let w = vec_of(&b);
        assert!((w[1] - cr(1.0)).norm() < 1e-15);
        assert!(w[0].norm() + w[2].norm() + w[3].norm() < 1e-15);
    }

    #[test]
    fn vec_mixed_product_identity() {
        // vec(Y A X) = (X^T ⊗ Y) vec(A)
        let a = CMat::from_row_slice(2, 3, &[cr(1.0), c(0.5, 1.0), cr(2.0), c(0.0, -1.0), cr(3.0), cr(0.5)]);
        let x = CMat::from_row_slice(3, 3, &[cr(1.0), cr(2.0), cr(0.0), c(0.0, 1.0), cr(0.5), cr(1.0), cr(0.0), cr(1.0), cr(2.0)]);
        let y = CMat::from_row_slice(2, 2, &[cr(2.0), c(1.0, 1.0), cr(0.0), cr(1.0)]);
        let lhs = vec_of(&(&y * &a * &x));
        let rhs = kron(&x.transpose(), &y) * vec_of(&a);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn unvec_round_trip() {
        let a = CMat::from_fn(3, 2, |r, c_| c(r as f64 + 0.5, c_ as f64 - 1.0));
        let back = unvec(&vec_of(&a), 3, 2).unwrap();
        assert!(fro_dist(&a, &back) < 1e-15);
    }
}
