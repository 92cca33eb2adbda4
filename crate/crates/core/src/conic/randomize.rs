//! Gaussian randomization: rank-one recovery of unit-modulus vectors from an
//! SDP solution `V ⪰ 0` of size `(I+1) × (I+1)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::PhaseVector;
use crate::C64;

/// Best candidate found by [`gaussian_randomize`].
#[derive(Clone, Debug)]
pub struct Randomized {
    /// Recovered relaxation vector (`I` unit-modulus entries).
    pub v: Vec<C64>,
    pub phases: PhaseVector,
    pub score: f64,
    /// Zero-based index of the winning draw.
    pub index: usize,
}

/// Eigenvalues at or below this fraction of the largest one are treated as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Factor `L = U Σ^{1/2}` of `V = U Σ U^H`. Negative eigenvalues and those
/// below `RANK_TOL · λ_max` are numerical noise and are clamped to zero.
pub fn sqrt_factor(v: &DMatrix<C64>) -> DMatrix<C64> {
    let eig = v.clone().symmetric_eigen();
    let cut = RANK_TOL * eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let mut l = eig.eigenvectors;
    for (j, mut col) in l.column_iter_mut().enumerate() {
        let lam = eig.eigenvalues[j];
        col *= C64::new(if lam > cut { lam.sqrt() } else { 0.0 }, 0.0);
    }
    l
}

/// `v_i = e^{j arg(ṽ_i / ṽ_{I+1})}` for the first `I` entries of `ṽ`.
pub fn recover_unit_modulus(vt: &DVector<C64>) -> Vec<C64> {
    let n = vt.len() - 1;
    let anchor = vt[n];
    (0..n)
        .map(|i| C64::from_polar(1.0, (vt[i] * anchor.conj()).arg()))
        .collect()
}

/// Draws `count` vectors `ṽ = U Σ^{1/2} ũ` with `ũ ~ CN(0, I)`, maps each to a
/// unit-modulus `v` and keeps the first one with the highest `score(v)`.
pub fn gaussian_randomize<R, F>(
    v: &DMatrix<C64>,
    mut score: F,
    count: usize,
    rng: &mut R,
) -> Result<Randomized>
where
    R: Rng + ?Sized,
    F: FnMut(&[C64]) -> f64,
{
    if count == 0 {
        return Err(Error::domain("randomization needs at least one draw"));
    }
    if v.nrows() < 1 || v.nrows() != v.ncols() {
        return Err(Error::domain("randomization needs a square matrix"));
    }
    let l = sqrt_factor(v);
    let n = v.nrows();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut best: Option<Randomized> = None;
    let mut u = DVector::<C64>::zeros(n);
    for idx in 0..count {
        for e in u.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *e = C64::new(re * s, im * s);
        }
        let cand = recover_unit_modulus(&(&l * &u));
        let sc = score(&cand);
        let sc = if sc.is_nan() { f64::NEG_INFINITY } else { sc };
        if best.as_ref().is_none_or(|b| sc > b.score) {
            best = Some(Randomized {
                phases: PhaseVector::from_v(&cand),
                v: cand,
                score: sc,
                index: idx,
            });
        }
    }
    best.ok_or_else(|| Error::solver("randomization produced no candidate"))
}

/// `ṽ^H Ω ṽ` with `ṽ = [v; 1]`.
pub fn augmented_quadratic(omega: &DMatrix<C64>, v: &[C64]) -> f64 {
    let n = v.len();
    let get = |i: usize| if i < n { v[i] } else { C64::new(1.0, 0.0) };
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..=n {
        let vi = get(i).conj();
        let mut row = C64::new(0.0, 0.0);
        for j in 0..=n {
            row += omega[(i, j)] * get(j);
        }
        acc += vi * row;
    }
    acc.re
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rank_one_recovery_is_exact() {
        let phases = [0.3, 2.1, -1.0, 4.0];
        let vt = DVector::from_iterator(4, phases.iter().map(|&t| C64::from_polar(1.0, t)));
        let v = &vt * vt.adjoint();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = gaussian_randomize(&v, |_| 0.0, 5, &mut rng).unwrap();
        for i in 0..3 {
            let want = C64::from_polar(1.0, phases[i] - phases[3]);
            assert!((r.v[i] - want).norm() < 1e-10);
        }
        assert_eq!(r.index, 0);
    }

    #[test]
    fn deterministic_and_unit_modulus() {
        let a = DMatrix::from_fn(5, 5, |i, j| C64::new((i + j) as f64, i as f64 - j as f64));
        let v = &a * a.adjoint();
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            gaussian_randomize(&v, |x| x[0].re + x[1].im, 100, &mut rng).unwrap()
        };
        let (r1, r2) = (run(7), run(7));
        assert_eq!(r1.v, r2.v);
        assert_eq!(r1.index, r2.index);
        assert!(r1.v.iter().all(|z| (z.norm() - 1.0).abs() < 1e-14));
        assert!(gaussian_randomize(&v, |_| 0.0, 0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn first_max_wins_ties() {
        let v = DMatrix::<C64>::identity(3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = gaussian_randomize(&v, |_| 1.0, 50, &mut rng).unwrap();
        assert_eq!(r.index, 0);
    }

    #[test]
    fn quadratic_form_matches_matrix_product() {
        let om = DMatrix::from_fn(3, 3, |i, j| C64::new((i * 3 + j) as f64, (i as f64) - (j as f64)));
        let om = (&om + om.adjoint()) * C64::new(0.5, 0.0);
        let v = [C64::from_polar(1.0, 0.4), C64::from_polar(1.0, -2.0)];
        let vt = DVector::from_vec(vec![v[0], v[1], C64::new(1.0, 0.0)]);
        let want = (vt.adjoint() * &om * &vt)[(0, 0)].re;
        assert!((augmented_quadratic(&om, &v) - want).abs() < 1e-12);
    }
}
