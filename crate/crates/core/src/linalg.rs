//! Dense complex matrices used as verification oracles and for exact propagators.

use nalgebra::DMatrix;

use crate::statevec::C64;

pub type CMat = DMatrix<C64>;

pub fn identity(dim: usize) -> CMat {
    CMat::identity(dim, dim)
}

/// Kronecker product with `high` on the more significant index bits.
pub fn kron(high: &CMat, low: &CMat) -> CMat {
    high.kronecker(low)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending and
/// eigenvectors as the matching columns.
pub fn hermitian_eigh(h: &CMat) -> (Vec<f64>, CMat) {
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..h.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(h.nrows(), h.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// e^{−iHτ} for Hermitian H.
pub fn expm_hermitian(h: &CMat, tau: f64) -> CMat {
    let (values, v) = hermitian_eigh(h);
    let phases = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        values.len(),
        values.iter().map(|&e| C64::from_polar(1.0, -e * tau)),
    ));
    &v * phases * v.adjoint()
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |a, &s| a.max(s))
}

/// Max entrywise |a − e^{iγ} b| with γ chosen to match the largest-magnitude entry of `b`.
pub fn phase_aligned_max_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let (idx, _) = b
        .iter()
        .enumerate()
        .fold((0, -1.0), |best, (i, z)| if z.norm() > best.1 { (i, z.norm()) } else { best });
    let ratio = a[idx] / b[idx];
    let phase = if ratio.norm() > 0.0 { ratio / ratio.norm() } else { C64::new(1.0, 0.0) };
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - phase * y).norm())
        .fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Block-diagonal diag(1, U): `u` controlled by one extra, most significant wire.
pub fn controlled_high(u: &CMat) -> CMat {
    let d = u.nrows();
    let mut out = identity(2 * d);
    out.view_mut((d, d), (d, d)).copy_from(u);
    out
}

/// Deviation from unitarity, max entry of |U†U − 1|.
pub fn unitarity_defect(u: &CMat) -> f64 {
    max_abs_diff(&(u.adjoint() * u), &identity(u.nrows()))
}
