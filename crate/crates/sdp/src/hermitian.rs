//! Complex Hermitian matrices and the eigen utilities the solver and the
//! beamforming recovery steps rely on.

use nalgebra::{DMatrix, DVector};

use crate::error::SdpError;
use crate::{C64, CMat, CVec};

/// Relative eigenvalue floor used by [`HermitianMatrix::is_psd`].
pub const PSD_TOL: f64 = 1e-8;

/// A complex Hermitian matrix. Construction always symmetrizes, so
/// `A == A^H` holds exactly for every value of this type.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMat);

/// Eigen-decomposition with eigenvalues sorted in descending order.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: CMat,
}

impl HermitianMatrix {
    pub fn zeros(n: usize) -> Self {
        Self(CMat::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMat::identity(n, n))
    }

    /// Wraps `m` after replacing it with `(m + m^H) / 2`.
    pub fn from_matrix(m: CMat) -> Result<Self, SdpError> {
        if m.nrows() != m.ncols() {
            return Err(SdpError::Dimension(format!(
                "hermitian matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self::symmetrize(m))
    }

    /// Wraps `m` only if it is Hermitian within `tol` (max-abs deviation,
    /// relative to `max(1, ‖m‖_max)`).
    pub fn try_from_matrix(m: CMat, tol: f64) -> Result<Self, SdpError> {
        if m.nrows() != m.ncols() {
            return Err(SdpError::Dimension(format!(
                "hermitian matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.iter().map(|v| v.norm()).fold(1.0_f64, f64::max);
        let dev = (&m - m.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
        if dev > tol * scale {
            return Err(SdpError::NotHermitian(dev));
        }
        Ok(Self::symmetrize(m))
    }

    pub(crate) fn symmetrize(m: CMat) -> Self {
        let adj = m.adjoint();
        Self((m + adj) * C64::new(0.5, 0.0))
    }

    /// Real diagonal matrix.
    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = CMat::zeros(n, n);
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = C64::new(*v, 0.0);
        }
        Self(m)
    }

    /// `v v^H`.
    pub fn outer(v: &CVec) -> Self {
        Self::symmetrize(v * v.adjoint())
    }

    /// `L^H A L` for an arbitrary `n x k` matrix `L`.
    pub fn congruence(&self, l: &CMat) -> Self {
        Self::symmetrize(l.adjoint() * &self.0 * l)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    /// `Re Tr(A B)`; the real inner product on Hermitian matrices.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        self.0
            .iter()
            .zip(other.0.transpose().iter())
            .map(|(a, b)| (a * b).re)
            .sum()
    }

    /// `v^H A v` (real for Hermitian `A`).
    pub fn quad_form(&self, v: &CVec) -> f64 {
        (v.adjoint() * &self.0 * v)[(0, 0)].re
    }

    pub fn scale(&self, a: f64) -> Self {
        Self(&self.0 * C64::new(a, 0.0))
    }

    pub fn add(&self, other: &HermitianMatrix) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &HermitianMatrix) -> Self {
        Self(&self.0 - &other.0)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &HermitianMatrix) -> Self {
        Self(&self.0 + &other.0 * C64::new(a, 0.0))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn eigen(&self) -> HermitianEigen {
        hermitian_eigen(&self.0)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eigen().values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// PSD test with floor `λ_min ≥ −1e−8·max(1, λ_max)`.
    pub fn is_psd(&self) -> bool {
        self.is_psd_with(PSD_TOL)
    }

    pub fn is_psd_with(&self, tol: f64) -> bool {
        let ev = self.eigenvalues();
        match (ev.first(), ev.last()) {
            (Some(max), Some(min)) => *min >= -tol * max.abs().max(1.0),
            _ => true,
        }
    }

    /// Largest eigenvalue and a unit eigenvector.
    pub fn dominant_eig(&self) -> (f64, CVec) {
        let e = self.eigen();
        if e.values.is_empty() {
            return (0.0, CVec::zeros(0));
        }
        (e.values[0], e.vectors.column(0).into_owned())
    }

    /// `λ_2 / λ_1` of the two largest eigenvalues; 0 for the zero matrix
    /// and for 1x1 matrices.
    pub fn rank_ratio(&self) -> f64 {
        let ev = self.eigenvalues();
        if ev.len() < 2 || ev[0] <= 0.0 {
            return 0.0;
        }
        (ev[1] / ev[0]).max(0.0)
    }

    /// Projection onto the PSD cone (negative eigenvalues clipped).
    pub fn psd_part(&self) -> Self {
        let e = self.eigen();
        let n = self.dim();
        let mut out = CMat::zeros(n, n);
        for (k, &lam) in e.values.iter().enumerate() {
            if lam > 0.0 {
                let v = e.vectors.column(k);
                out += v * v.adjoint() * C64::new(lam, 0.0);
            }
        }
        Self::symmetrize(out)
    }
}

impl From<HermitianMatrix> for CMat {
    fn from(h: HermitianMatrix) -> CMat {
        h.0
    }
}

/// Eigen-decomposition of a Hermitian matrix (only the Hermitian part of
/// `m` is read), sorted by descending eigenvalue.
pub fn hermitian_eigen(m: &CMat) -> HermitianEigen {
    let n = m.nrows();
    if n == 0 {
        return HermitianEigen { values: vec![], vectors: CMat::zeros(0, 0) };
    }
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    HermitianEigen { values, vectors }
}

/// Real symmetric embedding `[[Re A, −Im A], [Im A, Re A]]` of size `2n`.
pub fn embed_hermitian(a: &HermitianMatrix) -> DMatrix<f64> {
    let n = a.dim();
    let m = a.as_matrix();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, ii) = (i / n, i % n);
        let (bj, jj) = (j / n, j % n);
        let v = m[(ii, jj)];
        match (bi, bj) {
            (0, 0) | (1, 1) => v.re,
            (0, 1) => -v.im,
            _ => v.im,
        }
    })
}

/// Orthonormal basis (as columns) of the kernel of `A^H`, i.e. the
/// orthogonal complement of the column space of `a` (`n x k`).
pub fn null_space_basis(a: &CMat) -> CMat {
    let n = a.nrows();
    let k = a.ncols();
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    // Pad to at least square so the SVD returns a full left basis.
    let width = k.max(n);
    let mut padded = CMat::zeros(n, width);
    padded.columns_mut(0, k).copy_from(a);
    let svd = padded.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let sv: &DVector<f64> = &svd.singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let thresh = smax * (n.max(k) as f64) * f64::EPSILON * 16.0;
    let keep: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] <= thresh || smax == 0.0).collect();
    let mut out = CMat::zeros(n, keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        out.set_column(dst, &u.column(src));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_hermitian(n: usize, seed: u64) -> HermitianMatrix {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let m = CMat::from_fn(n, n, |_, _| c(next(), next()));
        HermitianMatrix::from_matrix(m).unwrap()
    }

    #[test]
    fn construction_symmetrizes() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.3), c(2.0, 1.0), c(0.0, 0.0), c(3.0, 0.0)]);
        let h = HermitianMatrix::from_matrix(m).unwrap();
        assert_eq!(h.as_matrix(), &h.as_matrix().adjoint());
        assert_eq!(h.as_matrix()[(0, 0)].im, 0.0);
    }

    #[test]
    fn try_from_rejects_non_hermitian() {
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(0.0, 0.0), c(3.0, 0.0)]);
        assert!(matches!(HermitianMatrix::try_from_matrix(m, 1e-12), Err(SdpError::NotHermitian(_))));
    }

    #[test]
    fn dominant_eig_of_diagonal() {
        let a = HermitianMatrix::from_diagonal(&[3.0, 1.0]);
        let (lam, v) = a.dominant_eig();
        assert!((lam - 3.0).abs() < 1e-12);
        assert!((v[0].norm() - 1.0).abs() < 1e-12);
        assert!(v[1].norm() < 1e-12);
    }

    #[test]
    fn rank_ratio_of_outer_product_is_tiny() {
        let v = CVec::from_vec(vec![c(1.0, 0.5), c(-0.3, 2.0), c(0.7, -1.1)]);
        let a = HermitianMatrix::outer(&v);
        assert!(a.rank_ratio() <= 1e-12);
    }

    #[test]
    fn dominant_eig_matches_full_decomposition() {
        for seed in 0..20 {
            let a = random_hermitian(6, seed);
            let (lam, v) = a.dominant_eig();
            let full = a.eigenvalues();
            assert!((lam - full[0]).abs() < 1e-12);
            let av = a.as_matrix() * &v;
            let resid = (&av - &v * C64::new(lam, 0.0)).norm();
            assert!(resid <= 1e-10 * a.frobenius_norm().max(1.0));
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn embedding_of_identity_is_identity() {
        let e = embed_hermitian(&HermitianMatrix::identity(3));
        assert_eq!(e, DMatrix::<f64>::identity(6, 6));
    }

    #[test]
    fn embedding_doubles_eigenvalue_multiplicity() {
        let a = random_hermitian(4, 7);
        let lam = a.eigenvalues();
        let e = embed_hermitian(&a);
        let mut emb: Vec<f64> = e.symmetric_eigen().eigenvalues.iter().copied().collect();
        emb.sort_by(|x, y| y.total_cmp(x));
        for k in 0..4 {
            assert!((emb[2 * k] - lam[k]).abs() < 1e-10);
            assert!((emb[2 * k + 1] - lam[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn embedding_inner_product_identity() {
        for seed in 0..10 {
            let a = random_hermitian(5, seed);
            let b = random_hermitian(5, seed + 100);
            let lhs = (embed_hermitian(&a) * embed_hermitian(&b)).trace();
            assert!((lhs - 2.0 * a.inner(&b)).abs() < 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn null_space_of_identity_columns() {
        let a = CMat::identity(4, 4).columns(0, 2).into_owned();
        let basis = null_space_basis(&a);
        assert_eq!(basis.ncols(), 2);
        let resid = (a.adjoint() * &basis).norm();
        assert!(resid < 1e-12);
        let gram = basis.adjoint() * &basis;
        assert!((gram - CMat::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn null_space_dimension_count() {
        let raw = random_hermitian(7, 3).into_matrix();
        let a = raw.columns(0, 2).into_owned();
        let basis = null_space_basis(&a);
        assert_eq!(basis.ncols(), 5);
        assert!((a.adjoint() * &basis).norm() < 1e-10);
    }

    #[test]
    fn null_space_empty_when_full_rank() {
        let a = random_hermitian(3, 4).into_matrix() + CMat::identity(3, 3) * c(10.0, 0.0);
        assert_eq!(null_space_basis(&a).ncols(), 0);
    }

    #[test]
    fn psd_tolerance_rule() {
        let a = HermitianMatrix::from_diagonal(&[1.0, -5e-9]);
        assert!(a.is_psd());
        let b = HermitianMatrix::from_diagonal(&[1.0, -5e-8]);
        assert!(!b.is_psd());
        let big = HermitianMatrix::from_diagonal(&[100.0, -5e-7]);
        assert!(big.is_psd());
    }
}
