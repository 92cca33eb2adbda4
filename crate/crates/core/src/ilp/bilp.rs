//! Binary linearization of `max v^H Ψ v + 2 Re{v^H Ξ}` over `B`-level phases.
//!
//! Variable layout (all binaries):
//! - `z_{i,q}`   at `i·B + q`, one SOS1 group per phase `i`;
//! - `z̄_{p,q}`  at `I·B + p·B + q`, one SOS1 group per pair `p = (i1, i2)`, `i1 < i2`;
//! - `z̃_p`      at `I·B + P·B + p`, the wraparound flag of pair `p`.
//!
//! With `θ_i = qΔ`, the pair difference `θ_{i1} - θ_{i2}` is represented by the
//! level of `z̄_p` after adding `2π z̃_p`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::simplex::LpProblem;
use crate::error::{Error, Result};
use crate::model::level_angle;
use crate::C64;

#[derive(Clone, Debug)]
pub struct BilpProblem {
    pub bits: u32,
    /// `B = 2^bits`.
    pub levels: usize,
    /// `I`.
    pub num_phases: usize,
    /// `(i1, i2)` with `i1 < i2`, in row-major order.
    pub pairs: Vec<(usize, usize)>,
    /// `2 Re(Ξ_i e^{jqΔ})`, indexed like `z`.
    pub z_coef: Vec<f64>,
    /// `2 Re(Ψ_{i1 i2} e^{jqΔ})`, indexed like `z̄`.
    pub zbar_coef: Vec<f64>,
    /// `Σ_i Ψ_ii`.
    pub constant: f64,
    pub psi: DMatrix<C64>,
    pub xi: Vec<C64>,
}

/// Builds the linearized program. `bits = 0` is accepted and gives a single level.
pub fn build_bilp(psi: &DMatrix<C64>, xi: &[C64], bits: u32) -> Result<BilpProblem> {
    let i_count = xi.len();
    if psi.nrows() != i_count || psi.ncols() != i_count {
        return Err(Error::domain(format!(
            "Psi is {}x{} but Xi has length {i_count}",
            psi.nrows(),
            psi.ncols()
        )));
    }
    if bits > 16 {
        return Err(Error::domain(format!("{bits} bits is too many levels")));
    }
    if psi.iter().chain(xi).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::domain("non-finite entry in Psi or Xi"));
    }
    let scale = psi.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let herm = (psi - psi.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if herm > 1e-9 * scale {
        return Err(Error::domain(format!("Psi is not Hermitian (deviation {herm:.2e})")));
    }
    let b = 1usize << bits;
    let rot: Vec<C64> = (0..b).map(|q| C64::from_polar(1.0, level_angle(q, bits))).collect();
    let mut z_coef = Vec::with_capacity(i_count * b);
    for x in xi {
        z_coef.extend(rot.iter().map(|r| 2.0 * (x * r).re));
    }
    let mut pairs = Vec::new();
    let mut zbar_coef = Vec::new();
    for i1 in 0..i_count {
        for i2 in i1 + 1..i_count {
            pairs.push((i1, i2));
            zbar_coef.extend(rot.iter().map(|r| 2.0 * (psi[(i1, i2)] * r).re));
        }
    }
    let constant = (0..i_count).map(|i| psi[(i, i)].re).sum();
    Ok(BilpProblem {
        bits,
        levels: b,
        num_phases: i_count,
        pairs,
        z_coef,
        zbar_coef,
        constant,
        psi: psi.clone(),
        xi: xi.to_vec(),
    })
}

impl BilpProblem {
    /// The same program with every coefficient multiplied by `s > 0`.
    pub fn scaled(&self, s: f64) -> BilpProblem {
        let sc = C64::new(s, 0.0);
        BilpProblem {
            z_coef: self.z_coef.iter().map(|c| c * s).collect(),
            zbar_coef: self.zbar_coef.iter().map(|c| c * s).collect(),
            constant: self.constant * s,
            psi: self.psi.map(|z| z * sc),
            xi: self.xi.iter().map(|z| z * sc).collect(),
            pairs: self.pairs.clone(),
            ..*self
        }
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn num_vars(&self) -> usize {
        (self.num_phases + self.num_pairs()) * self.levels + self.num_pairs()
    }

    pub fn z_index(&self, i: usize, q: usize) -> usize {
        i * self.levels + q
    }

    pub fn zbar_index(&self, p: usize, q: usize) -> usize {
        (self.num_phases + p) * self.levels + q
    }

    pub fn ztilde_index(&self, p: usize) -> usize {
        (self.num_phases + self.num_pairs()) * self.levels + p
    }

    /// Level of `z̄_p` and the value of `z̃_p` implied by phase levels `q1`, `q2`.
    pub fn pair_levels(&self, q1: usize, q2: usize) -> (usize, bool) {
        ((q1 + self.levels - q2) % self.levels, q1 < q2)
    }

    fn check_levels(&self, levels: &[usize]) -> Result<()> {
        if levels.len() != self.num_phases {
            return Err(Error::domain(format!(
                "{} levels given for {} phases",
                levels.len(),
                self.num_phases
            )));
        }
        if let Some(q) = levels.iter().find(|&&q| q >= self.levels) {
            return Err(Error::domain(format!("level {q} out of range 0..{}", self.levels)));
        }
        Ok(())
    }

    /// The full binary vector implied by phase levels.
    pub fn assignment(&self, levels: &[usize]) -> Result<Vec<f64>> {
        self.check_levels(levels)?;
        let mut x = vec![0.0; self.num_vars()];
        for (i, &q) in levels.iter().enumerate() {
            x[self.z_index(i, q)] = 1.0;
        }
        for (p, &(i1, i2)) in self.pairs.iter().enumerate() {
            let (qb, wrap) = self.pair_levels(levels[i1], levels[i2]);
            x[self.zbar_index(p, qb)] = 1.0;
            if wrap {
                x[self.ztilde_index(p)] = 1.0;
            }
        }
        Ok(x)
    }

    /// Linear objective `c^T x + constant` at an arbitrary (possibly fractional) point.
    pub fn linear_objective(&self, x: &[f64]) -> f64 {
        let nz = self.z_coef.len();
        let zpart: f64 = self.z_coef.iter().zip(x).map(|(c, v)| c * v).sum();
        let zbpart: f64 = self.zbar_coef.iter().zip(&x[nz..]).map(|(c, v)| c * v).sum();
        zpart + zbpart + self.constant
    }

    /// BILP objective of the assignment implied by `levels`.
    pub fn objective(&self, levels: &[usize]) -> Result<f64> {
        Ok(self.linear_objective(&self.assignment(levels)?))
    }

    /// Largest SOS1 row deviation and largest linking residual (in radians) of `x`.
    pub fn constraint_residuals(&self, x: &[f64]) -> (f64, f64) {
        let b = self.levels;
        let mut sos: f64 = 0.0;
        for g in 0..self.num_phases + self.num_pairs() {
            let s: f64 = x[g * b..(g + 1) * b].iter().sum();
            sos = sos.max((s - 1.0).abs());
        }
        let dth = 2.0 * PI / b as f64;
        let y1 = |base: usize| -> f64 { (0..b).map(|q| q as f64 * dth * x[base + q]).sum() };
        let mut link: f64 = 0.0;
        for (p, &(i1, i2)) in self.pairs.iter().enumerate() {
            let r = y1(self.z_index(i1, 0)) - y1(self.z_index(i2, 0)) + 2.0 * PI * x[self.ztilde_index(p)]
                - y1(self.zbar_index(p, 0));
            link = link.max(r.abs());
        }
        (sos, link)
    }

    /// LP relaxation data with all variables in `[0, 1]`. Linking rows are divided by `Δ`.
    pub fn lp_relaxation(&self) -> LpProblem {
        let n = self.num_vars();
        let b = self.levels;
        let groups = self.num_phases + self.num_pairs();
        let m = groups + self.num_pairs();
        let mut a = DMatrix::zeros(m, n);
        let mut rhs = DVector::zeros(m);
        for g in 0..groups {
            for q in 0..b {
                a[(g, g * b + q)] = 1.0;
            }
            rhs[g] = 1.0;
        }
        for (p, &(i1, i2)) in self.pairs.iter().enumerate() {
            let r = groups + p;
            for q in 0..b {
                let y = q as f64;
                a[(r, self.z_index(i1, q))] += y;
                a[(r, self.z_index(i2, q))] -= y;
                a[(r, self.zbar_index(p, q))] -= y;
            }
            a[(r, self.ztilde_index(p))] = b as f64;
        }
        let mut c = DVector::zeros(n);
        for (j, v) in self.z_coef.iter().chain(&self.zbar_coef).enumerate() {
            c[j] = *v;
        }
        LpProblem {
            a,
            b: rhs,
            c,
            lower: vec![0.0; n],
            upper: vec![1.0; n],
        }
    }

    /// Exact objective `v^H Ψ v + 2 Re{v^H Ξ}` with `v_i = e^{-jθ_i}`.
    pub fn quadratic_objective(&self, levels: &[usize]) -> Result<f64> {
        self.check_levels(levels)?;
        let v: Vec<C64> = levels
            .iter()
            .map(|&q| C64::from_polar(1.0, -level_angle(q, self.bits)))
            .collect();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..v.len() {
            let mut row = self.xi[i] * 2.0;
            for j in 0..v.len() {
                row += self.psi[(i, j)] * v[j];
            }
            acc += v[i].conj() * row;
        }
        // Im(v^H Ψ v) = 0, so Re(v^H Ψ v + 2 v^H Ξ) is the objective.
        Ok(acc.re)
    }

    /// Coordinate ascent: each phase in turn moves to its best level given the
    /// others (lowest index on ties) until a full sweep changes nothing.
    pub fn one_opt(&self, levels: &mut [usize]) {
        let n = self.num_phases;
        let rot: Vec<C64> = (0..self.levels)
            .map(|q| C64::from_polar(1.0, level_angle(q, self.bits)))
            .collect();
        let mut v: Vec<C64> = levels.iter().map(|&q| rot[q].conj()).collect();
        for _ in 0..100 * (n + 1) {
            let mut changed = false;
            for i in 0..n {
                let mut a = self.xi[i];
                for j in 0..n {
                    if j != i {
                        a += self.psi[(i, j)] * v[j];
                    }
                }
                // Phase i contributes 2 Re(e^{jθ_i} a) + const.
                let score = |q: usize| (rot[q] * a).re;
                let mut best = levels[i];
                for q in 0..self.levels {
                    if score(q) > score(best) + 1e-12 * (1.0 + a.norm()) {
                        best = q;
                    }
                }
                if best != levels[i] {
                    levels[i] = best;
                    v[i] = rot[best].conj();
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_psi_xi(rng: &mut ChaCha8Rng, n: usize) -> (DMatrix<C64>, Vec<C64>) {
        let phi = DMatrix::from_fn(n, n + 1, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let g = DVector::from_fn(n + 1, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let psi = &phi * phi.adjoint();
        let xi = (&phi * g).iter().cloned().collect();
        (psi, xi)
    }

    #[test]
    fn single_phase_closed_form() {
        let psi = DMatrix::from_element(1, 1, C64::new(0.7, 0.0));
        let x = C64::from_polar(1.3, 2.2);
        let p = build_bilp(&psi, &[x], 2).unwrap();
        assert!(p.pairs.is_empty());
        for q in 0..4 {
            let th = level_angle(q, 2);
            let want = 2.0 * x.norm() * x.arg().cos() * th.cos() - 2.0 * x.norm() * x.arg().sin() * th.sin() + 0.7;
            assert!((p.objective(&[q]).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn linearization_matches_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for bits in 0..=3 {
            for n in 1..=6 {
                let (psi, xi) = random_psi_xi(&mut rng, n);
                let p = build_bilp(&psi, &xi, bits).unwrap();
                for _ in 0..20 {
                    let lv: Vec<usize> = (0..n).map(|_| rng.random_range(0..p.levels)).collect();
                    let lin = p.objective(&lv).unwrap();
                    let quad = p.quadratic_objective(&lv).unwrap();
                    assert!((lin - quad).abs() < 1e-9 * (1.0 + quad.abs()), "{lin} vs {quad}");
                    let x = p.assignment(&lv).unwrap();
                    let (sos, link) = p.constraint_residuals(&x);
                    assert_eq!(sos, 0.0);
                    assert!(link < 1e-9);
                }
            }
        }
    }

    #[test]
    fn wraparound_reproduces_pair_phase() {
        let psi = DMatrix::<C64>::identity(2, 2);
        let p = build_bilp(&psi, &[C64::new(0.0, 0.0); 2], 3).unwrap();
        for q1 in 0..8 {
            for q2 in 0..8 {
                let (qb, wrap) = p.pair_levels(q1, q2);
                let d = level_angle(q1, 3) - level_angle(q2, 3);
                assert!((C64::from_polar(1.0, d) - C64::from_polar(1.0, level_angle(qb, 3))).norm() < 1e-12);
                assert_eq!(wrap, d < 0.0);
            }
        }
    }

    #[test]
    fn lp_rows_accept_every_integral_assignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (psi, xi) = random_psi_xi(&mut rng, 4);
        let p = build_bilp(&psi, &xi, 2).unwrap();
        let lp = p.lp_relaxation();
        for _ in 0..30 {
            let lv: Vec<usize> = (0..4).map(|_| rng.random_range(0..4)).collect();
            let x = DVector::from_vec(p.assignment(&lv).unwrap());
            assert!((&lp.a * &x - &lp.b).amax() < 1e-12);
            assert!((lp.c.dot(&x) + p.constant - p.objective(&lv).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let psi = DMatrix::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, 1.0), C64::new(1.0, 0.0)]);
        assert!(build_bilp(&psi, &[C64::new(0.0, 0.0); 2], 1).is_err());
        assert!(build_bilp(&DMatrix::identity(2, 2), &[C64::new(0.0, 0.0); 3], 1).is_err());
        let p = build_bilp(&DMatrix::identity(2, 2), &[C64::new(0.0, 0.0); 2], 1).unwrap();
        assert!(p.objective(&[0, 2]).is_err());
        assert!(p.objective(&[0]).is_err());
    }
}
