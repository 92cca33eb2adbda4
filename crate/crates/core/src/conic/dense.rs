//! Dense complex kernels for the interior-point hot loop.
//!
//! nalgebra's products and decompositions are unblocked for dynamic sizes;
//! these route through faer on the same column-major storage.

use faer::linalg::matmul::matmul;
use faer::{Accum, MatMut, MatRef, Par, Side};
use nalgebra::{DMatrix, DVector};

use crate::C64;

fn view(m: &DMatrix<C64>) -> MatRef<'_, C64> {
    MatRef::from_column_major_slice(m.as_slice(), m.nrows(), m.ncols())
}

fn to_nalgebra(m: MatRef<'_, C64>) -> DMatrix<C64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn product(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> DMatrix<C64> {
    let mut out = DMatrix::<C64>::zeros(a.nrows(), b.ncols());
    let (r, c) = out.shape();
    let dst = MatMut::from_column_major_slice_mut(out.as_mut_slice(), r, c);
    matmul(dst, Accum::Replace, a, b, C64::new(1.0, 0.0), Par::Seq);
    out
}

/// `a b`.
pub fn mul(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    assert_eq!(a.ncols(), b.nrows());
    product(view(a), view(b))
}

/// `a^H b`.
pub fn mul_hn(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    assert_eq!(a.nrows(), b.nrows());
    let ah = view(a).adjoint().to_owned();
    product(ah.as_ref(), view(b))
}

/// `a b^H`.
pub fn mul_nh(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    assert_eq!(a.ncols(), b.ncols());
    let bh = view(b).adjoint().to_owned();
    product(view(a), bh.as_ref())
}

/// `(a + a^H) / 2`, in place.
pub fn hermitize(a: &mut DMatrix<C64>) {
    let n = a.nrows();
    for j in 0..n {
        a[(j, j)].im = 0.0;
        for i in j + 1..n {
            let v = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
    }
}

/// `r^H m r` for Hermitian `m`, with rounding asymmetry removed.
pub fn congruence_h(r: &DMatrix<C64>, m: &DMatrix<C64>) -> DMatrix<C64> {
    let mut out = mul(&mul_hn(r, m), r);
    hermitize(&mut out);
    out
}

/// `r m r^H` for Hermitian `m`, with rounding asymmetry removed.
pub fn congruence(r: &DMatrix<C64>, m: &DMatrix<C64>) -> DMatrix<C64> {
    let mut out = mul_nh(&mul(r, m), r);
    hermitize(&mut out);
    out
}

/// `a = U diag(σ) V^H`; `None` if the iteration fails to converge.
pub fn svd(a: &DMatrix<C64>) -> Option<(DMatrix<C64>, DVector<f64>, DMatrix<C64>)> {
    let s = view(a).svd().ok()?;
    let sig = s.S().column_vector();
    Some((
        to_nalgebra(s.U()),
        DVector::from_fn(sig.nrows(), |i, _| sig[i].re),
        to_nalgebra(s.V()),
    ))
}

/// Eigenvalues of a Hermitian matrix (lower triangle referenced).
pub fn hermitian_eigenvalues(a: &DMatrix<C64>) -> Vec<f64> {
    match view(a).self_adjoint_eigenvalues(Side::Lower) {
        Ok(ev) => ev,
        Err(_) => a.clone().symmetric_eigenvalues().iter().cloned().collect(),
    }
}
