//! Dense primal-dual interior-point method for linear cone programs
//!
//! ```text
//! minimize    c^T x                 maximize   -h^T z
//! subject to  G x + s = h           subject to G^T z + c = 0
//!             s ∈ K                             z ∈ K
//! ```
//!
//! where `K` is a product of a nonnegative orthant, second-order cones and
//! complex Hermitian PSD cones (inner product `Re tr(A^H B)`). The method is an infeasible-start path-following
//! scheme with Nesterov–Todd scaling and a Mehrotra predictor-corrector step.
//! Each Newton step reduces to the positive definite system
//! `G^T W^{-1} W^{-T} G Δx = r`, assembled column by column so that sparse
//! PSD columns cost O(nnz²) instead of O(n³).

use nalgebra::{DMatrix, DVector};

use super::dense;
use crate::error::{Error, Result};
use crate::C64;

/// Cone structure: `nonneg` orthant entries, then SOCs, then PSD blocks (by order).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConeDims {
    pub nonneg: usize,
    pub soc: Vec<usize>,
    pub psd: Vec<usize>,
}

impl ConeDims {
    /// Length of the vectorised (orthant + SOC) part.
    pub fn lin_len(&self) -> usize {
        self.nonneg + self.soc.iter().sum::<usize>()
    }

    /// Barrier degree `ν`.
    pub fn degree(&self) -> usize {
        self.nonneg + self.soc.len() + self.psd.iter().sum::<usize>()
    }

    fn soc_ranges(&self) -> Vec<(usize, usize)> {
        let mut off = self.nonneg;
        self.soc
            .iter()
            .map(|&d| {
                let r = (off, d);
                off += d;
                r
            })
            .collect()
    }
}

/// An element of the cone space.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeVec {
    pub lin: DVector<f64>,
    pub psd: Vec<DMatrix<C64>>,
}

impl ConeVec {
    pub fn zeros(d: &ConeDims) -> Self {
        ConeVec {
            lin: DVector::zeros(d.lin_len()),
            psd: d.psd.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
        }
    }

    /// The identity element `e`.
    pub fn identity(d: &ConeDims) -> Self {
        let mut v = ConeVec::zeros(d);
        for i in 0..d.nonneg {
            v.lin[i] = 1.0;
        }
        for (off, _) in d.soc_ranges() {
            v.lin[off] = 1.0;
        }
        for m in &mut v.psd {
            m.fill_with_identity();
        }
        v
    }

    pub fn dot(&self, o: &ConeVec) -> f64 {
        self.lin.dot(&o.lin) + self.psd.iter().zip(&o.psd).map(|(a, b)| a.dotc(b).re).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `self += a * o`.
    pub fn axpy(&mut self, a: f64, o: &ConeVec) {
        self.lin.axpy(a, &o.lin, 1.0);
        for (m, n) in self.psd.iter_mut().zip(&o.psd) {
            m.zip_apply(n, |x, y| *x += y * a);
        }
    }

    pub fn scaled(&self, a: f64) -> ConeVec {
        ConeVec {
            lin: &self.lin * a,
            psd: self.psd.iter().map(|m| m.map(|x| x * a)).collect(),
        }
    }

    fn sub(&self, o: &ConeVec) -> ConeVec {
        let mut r = self.clone();
        r.axpy(-1.0, o);
        r
    }
}

/// A PSD-block entry of one column of `G`.
#[derive(Clone, Debug, PartialEq)]
pub enum PsdEntry {
    /// Explicit `(row, col, value)` triplets; Hermitian pairs must both be listed.
    Sparse(Vec<(usize, usize, C64)>),
    Dense(DMatrix<C64>),
}

impl PsdEntry {
    /// Sparse Hermitian entry from upper-or-lower triplets (off-diagonals are mirrored).
    pub fn hermitian(entries: &[(usize, usize, C64)]) -> Self {
        let mut v = Vec::with_capacity(2 * entries.len());
        for &(i, j, x) in entries {
            v.push((i, j, x));
            if i != j {
                v.push((j, i, x.conj()));
            }
        }
        PsdEntry::Sparse(v)
    }

    fn inner(&self, m: &DMatrix<C64>) -> f64 {
        match self {
            PsdEntry::Sparse(t) => t.iter().map(|&(i, j, v)| (v.conj() * m[(i, j)]).re).sum(),
            PsdEntry::Dense(d) => d.dotc(m).re,
        }
    }

    fn add_to(&self, m: &mut DMatrix<C64>, a: f64) {
        match self {
            PsdEntry::Sparse(t) => {
                for &(i, j, v) in t {
                    m[(i, j)] += v * a;
                }
            }
            PsdEntry::Dense(d) => m.zip_apply(d, |x, y| *x += y * a),
        }
    }
}

/// One column of `G`: sparse entries in the orthant/SOC part plus PSD-block entries.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Column {
    pub lin: Vec<(usize, f64)>,
    pub psd: Vec<(usize, PsdEntry)>,
}

/// A cone program in the standard form above.
#[derive(Clone, Debug)]
pub struct ConeProgram {
    pub dims: ConeDims,
    pub c: DVector<f64>,
    pub g: Vec<Column>,
    pub h: ConeVec,
}

impl ConeProgram {
    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    fn validate(&self) -> Result<()> {
        let n_lin = self.dims.lin_len();
        if self.g.len() != self.c.len() {
            return Err(Error::domain("G must have one column per variable"));
        }
        if self.h.lin.len() != n_lin || self.h.psd.len() != self.dims.psd.len() {
            return Err(Error::domain("h does not match the cone dimensions"));
        }
        for (b, (m, &n)) in self.h.psd.iter().zip(&self.dims.psd).enumerate() {
            if m.shape() != (n, n) {
                return Err(Error::domain(format!("h block {b} is not {n}x{n}")));
            }
        }
        for (j, col) in self.g.iter().enumerate() {
            if col.lin.iter().any(|&(i, _)| i >= n_lin) {
                return Err(Error::domain(format!("column {j} indexes past the linear part")));
            }
            for (b, e) in &col.psd {
                let n = *self.dims.psd.get(*b).ok_or_else(|| {
                    Error::domain(format!("column {j} references PSD block {b}"))
                })?;
                let ok = match e {
                    PsdEntry::Sparse(t) => t.iter().all(|&(r, c, _)| r < n && c < n),
                    PsdEntry::Dense(d) => d.shape() == (n, n),
                };
                if !ok {
                    return Err(Error::domain(format!("column {j} block {b} out of shape")));
                }
            }
        }
        Ok(())
    }

    /// `G x`.
    pub fn g_mul(&self, x: &DVector<f64>) -> ConeVec {
        let mut out = ConeVec::zeros(&self.dims);
        for (j, col) in self.g.iter().enumerate() {
            let a = x[j];
            if a == 0.0 {
                continue;
            }
            for &(i, v) in &col.lin {
                out.lin[i] += a * v;
            }
            for (b, e) in &col.psd {
                e.add_to(&mut out.psd[*b], a);
            }
        }
        out
    }

    /// `G^T z`.
    pub fn gt_mul(&self, z: &ConeVec) -> DVector<f64> {
        DVector::from_iterator(
            self.g.len(),
            self.g.iter().map(|col| {
                col.lin.iter().map(|&(i, v)| v * z.lin[i]).sum::<f64>()
                    + col.psd.iter().map(|(b, e)| e.inner(&z.psd[*b])).sum::<f64>()
            }),
        )
    }
}

/// Early termination thresholds for feasibility-style problems.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EarlyStop {
    /// Stop once the primal side is feasible with `c^T x` at most this value.
    pub primal_at_most: f64,
    /// Stop once the dual side is feasible with `-h^T z` at least this value.
    pub dual_at_least: f64,
    /// Residual level regarded as feasible for these tests.
    pub feastol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IpmOptions {
    pub max_iters: usize,
    /// Relative residual target.
    pub feastol: f64,
    /// Gap target relative to `1 + |c^T x|`.
    pub gaptol: f64,
    /// Fraction of the distance to the boundary taken each step.
    pub step_fraction: f64,
    pub early_stop: Option<EarlyStop>,
}

impl Default for IpmOptions {
    fn default() -> Self {
        IpmOptions {
            max_iters: 200,
            feastol: 1e-10,
            gaptol: 1e-10,
            step_fraction: 0.99,
            early_stop: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IpmStatus {
    Optimal,
    /// An [`EarlyStop`] threshold was crossed.
    EarlyStop,
    MaxIters,
    /// Scaling or factorization broke down before convergence; the last iterate is returned.
    Stalled,
}

/// Per-iteration diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationLog {
    pub iter: usize,
    pub pcost: f64,
    pub dcost: f64,
    pub gap: f64,
    pub pres: f64,
    pub dres: f64,
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct IpmSolution {
    pub x: DVector<f64>,
    pub s: ConeVec,
    pub z: ConeVec,
    pub status: IpmStatus,
    pub pcost: f64,
    pub dcost: f64,
    /// Complementarity `s^T z`.
    pub gap: f64,
    pub pres: f64,
    pub dres: f64,
    pub iterations: usize,
    pub history: Vec<IterationLog>,
}

impl IpmSolution {
    /// Writes the iteration history as CSV rows.
    pub fn write_trace<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iter", "pcost", "dcost", "gap", "pres", "dres", "step"])?;
        for h in &self.history {
            w.write_record(&[
                h.iter.to_string(),
                format!("{:e}", h.pcost),
                format!("{:e}", h.dcost),
                format!("{:e}", h.gap),
                format!("{:e}", h.pres),
                format!("{:e}", h.dres),
                format!("{:e}", h.step),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Nesterov-Todd scaling

struct SocScale {
    beta: f64,
    w: DVector<f64>,
}

impl SocScale {
    /// `W̄ v` for the hyperbolic matrix `[[w0, w1^T], [w1, I + w1 w1^T/(1 + w0)]]`.
    fn hyp(&self, v: &[f64], inverse: bool) -> Vec<f64> {
        let w0 = self.w[0];
        let w1 = &self.w.as_slice()[1..];
        let (v0, v1) = (v[0], &v[1..]);
        let sign = if inverse { -1.0 } else { 1.0 };
        let wv1: f64 = w1.iter().zip(v1).map(|(a, b)| a * b).sum();
        let mut out = vec![0.0; v.len()];
        out[0] = w0 * v0 + sign * wv1;
        let coef = sign * v0 + wv1 / (1.0 + w0);
        for i in 0..v1.len() {
            out[i + 1] = v1[i] + coef * w1[i];
        }
        out
    }
}

struct PsdScale {
    r: DMatrix<C64>,
    rinv: DMatrix<C64>,
    lam: DVector<f64>,
}

struct Scaling {
    d: DVector<f64>,
    soc: Vec<SocScale>,
    psd: Vec<PsdScale>,
    /// `λ = W z = W^{-T} s`, with PSD parts diagonal.
    lambda: ConeVec,
}

fn jnorm(v: &[f64]) -> Option<f64> {
    let t = v[0] * v[0] - v[1..].iter().map(|x| x * x).sum::<f64>();
    if v[0] > 0.0 && t > 0.0 {
        Some(t.sqrt())
    } else {
        None
    }
}

impl Scaling {
    fn identity(dims: &ConeDims) -> Self {
        Scaling {
            d: DVector::from_element(dims.nonneg, 1.0),
            soc: dims
                .soc
                .iter()
                .map(|&n| {
                    let mut w = DVector::zeros(n);
                    w[0] = 1.0;
                    SocScale { beta: 1.0, w }
                })
                .collect(),
            psd: dims
                .psd
                .iter()
                .map(|&n| PsdScale {
                    r: DMatrix::identity(n, n),
                    rinv: DMatrix::identity(n, n),
                    lam: DVector::from_element(n, 1.0),
                })
                .collect(),
            lambda: ConeVec::identity(dims),
        }
    }

    /// NT scaling point of the interior pair `(s, z)`; `None` if either left the cone.
    fn compute(dims: &ConeDims, s: &ConeVec, z: &ConeVec) -> Option<Self> {
        let mut lambda = ConeVec::zeros(dims);
        let mut d = DVector::zeros(dims.nonneg);
        for i in 0..dims.nonneg {
            let (si, zi) = (s.lin[i], z.lin[i]);
            if !(si > 0.0 && zi > 0.0) {
                return None;
            }
            d[i] = (si / zi).sqrt();
            lambda.lin[i] = (si * zi).sqrt();
        }
        let mut soc = Vec::with_capacity(dims.soc.len());
        for (off, n) in dims.soc_ranges() {
            let sv = &s.lin.as_slice()[off..off + n];
            let zv = &z.lin.as_slice()[off..off + n];
            let (a, b) = (jnorm(sv)?, jnorm(zv)?);
            let sn: Vec<f64> = sv.iter().map(|x| x / a).collect();
            let zn: Vec<f64> = zv.iter().map(|x| x / b).collect();
            let sz: f64 = sn.iter().zip(&zn).map(|(x, y)| x * y).sum();
            let gamma = ((1.0 + sz) / 2.0).sqrt();
            let mut w = DVector::zeros(n);
            w[0] = (sn[0] + zn[0]) / (2.0 * gamma);
            for i in 1..n {
                w[i] = (sn[i] - zn[i]) / (2.0 * gamma);
            }
            let sc = SocScale {
                beta: (a / b).sqrt(),
                w,
            };
            let l = sc.hyp(zv, false);
            for i in 0..n {
                lambda.lin[off + i] = sc.beta * l[i];
            }
            soc.push(sc);
        }
        let mut psd = Vec::with_capacity(dims.psd.len());
        for (b, &n) in dims.psd.iter().enumerate() {
            let l1 = s.psd[b].clone().cholesky()?.unpack();
            let l2 = z.psd[b].clone().cholesky()?.unpack();
            let (u, sig, v) = dense::svd(&dense::mul_hn(&l2, &l1))?;
            if sig.iter().any(|&x| !(x > 0.0)) {
                return None;
            }
            // S = L1 L1^H, Z = L2 L2^H, L2^H L1 = U Σ V^H, R = L1 V Σ^{-1/2}.
            let isq = sig.map(|x| 1.0 / x.sqrt());
            let mut r = dense::mul(&l1, &v);
            for (j, mut col) in r.column_iter_mut().enumerate() {
                col.apply(|x| *x *= isq[j]);
            }
            // R^{-1} = Σ^{-1/2} U^H L2^H, since L2^H L1 V = U Σ.
            let mut rinv = dense::mul_hn(&u, &l2.adjoint());
            for (i, mut row) in rinv.row_iter_mut().enumerate() {
                row.apply(|x| *x *= isq[i]);
            }
            for i in 0..n {
                lambda.psd[b][(i, i)] = C64::new(sig[i], 0.0);
            }
            psd.push(PsdScale { r, rinv, lam: sig });
        }
        Some(Scaling {
            d,
            soc,
            psd,
            lambda,
        })
    }

    /// `W` (or `W^{-1}`) on the orthant and SOC part; both are symmetric there.
    fn lin_apply(&self, dims: &ConeDims, v: &DVector<f64>, inverse: bool) -> DVector<f64> {
        let mut out = v.clone();
        for i in 0..dims.nonneg {
            if inverse {
                out[i] /= self.d[i];
            } else {
                out[i] *= self.d[i];
            }
        }
        for ((off, n), sc) in dims.soc_ranges().into_iter().zip(&self.soc) {
            let r = sc.hyp(&v.as_slice()[off..off + n], inverse);
            let f = if inverse { 1.0 / sc.beta } else { sc.beta };
            for i in 0..n {
                out[off + i] = f * r[i];
            }
        }
        out
    }

    /// `W v`, with `W(U) = R^H U R` on PSD blocks.
    #[cfg(test)]
    fn w(&self, dims: &ConeDims, v: &ConeVec) -> ConeVec {
        ConeVec {
            lin: self.lin_apply(dims, &v.lin, false),
            psd: self.psd.iter().zip(&v.psd).map(|(sc, m)| dense::congruence_h(&sc.r, m)).collect(),
        }
    }

    /// `W^{-1} v`.
    fn w_inv(&self, dims: &ConeDims, v: &ConeVec) -> ConeVec {
        ConeVec {
            lin: self.lin_apply(dims, &v.lin, true),
            psd: self
                .psd
                .iter()
                .zip(&v.psd)
                .map(|(sc, m)| dense::congruence_h(&sc.rinv, m))
                .collect(),
        }
    }

    /// `W^{-T} v`.
    fn w_inv_t(&self, dims: &ConeDims, v: &ConeVec) -> ConeVec {
        ConeVec {
            lin: self.lin_apply(dims, &v.lin, true),
            psd: self
                .psd
                .iter()
                .zip(&v.psd)
                .map(|(sc, m)| dense::congruence(&sc.rinv, m))
                .collect(),
        }
    }

    /// `W^T v`.
    fn w_t(&self, dims: &ConeDims, v: &ConeVec) -> ConeVec {
        ConeVec {
            lin: self.lin_apply(dims, &v.lin, false),
            psd: self.psd.iter().zip(&v.psd).map(|(sc, m)| dense::congruence(&sc.r, m)).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Jordan-algebra helpers

/// Symmetric product `x ∘ y`.
fn jprod(dims: &ConeDims, x: &ConeVec, y: &ConeVec) -> ConeVec {
    let mut out = ConeVec::zeros(dims);
    for i in 0..dims.nonneg {
        out.lin[i] = x.lin[i] * y.lin[i];
    }
    for (off, n) in dims.soc_ranges() {
        let xs = &x.lin.as_slice()[off..off + n];
        let ys = &y.lin.as_slice()[off..off + n];
        out.lin[off] = xs.iter().zip(ys).map(|(a, b)| a * b).sum();
        for i in 1..n {
            out.lin[off + i] = xs[0] * ys[i] + ys[0] * xs[i];
        }
    }
    for b in 0..dims.psd.len() {
        let p = dense::mul(&x.psd[b], &y.psd[b]);
        out.psd[b] = (&p + p.adjoint()).map(|v| v * 0.5);
    }
    out
}

/// Solves `λ ∘ u = r` for the scaled point `λ` (PSD parts of `λ` are diagonal).
fn jdiv(dims: &ConeDims, sc: &Scaling, r: &ConeVec) -> ConeVec {
    let lam = &sc.lambda;
    let mut u = ConeVec::zeros(dims);
    for i in 0..dims.nonneg {
        u.lin[i] = r.lin[i] / lam.lin[i];
    }
    for (off, n) in dims.soc_ranges() {
        let l = &lam.lin.as_slice()[off..off + n];
        let rv = &r.lin.as_slice()[off..off + n];
        let l1r1: f64 = (1..n).map(|i| l[i] * rv[i]).sum();
        let det = l[0] * l[0] - (1..n).map(|i| l[i] * l[i]).sum::<f64>();
        let u0 = (l[0] * rv[0] - l1r1) / det;
        u.lin[off] = u0;
        for i in 1..n {
            u.lin[off + i] = (rv[i] - u0 * l[i]) / l[0];
        }
    }
    for (b, ps) in sc.psd.iter().enumerate() {
        let n = ps.lam.len();
        u.psd[b] = DMatrix::from_fn(n, n, |i, j| r.psd[b][(i, j)] * (2.0 / (ps.lam[i] + ps.lam[j])));
    }
    u
}

/// Largest `α ≥ 0` keeping `λ + α d` in the cone (`f64::INFINITY` if unbounded).
fn max_step_scaled(dims: &ConeDims, sc: &Scaling, d: &ConeVec) -> f64 {
    let lam = &sc.lambda;
    let mut a = f64::INFINITY;
    for i in 0..dims.nonneg {
        if d.lin[i] < 0.0 {
            a = a.min(-lam.lin[i] / d.lin[i]);
        }
    }
    for (off, n) in dims.soc_ranges() {
        a = a.min(soc_step(&lam.lin.as_slice()[off..off + n], &d.lin.as_slice()[off..off + n]));
    }
    for (b, ps) in sc.psd.iter().enumerate() {
        let n = ps.lam.len();
        let m = DMatrix::from_fn(n, n, |i, j| d.psd[b][(i, j)] / (ps.lam[i] * ps.lam[j]).sqrt());
        let ev = dense::hermitian_eigenvalues(&m);
        let mn = ev.iter().cloned().fold(f64::INFINITY, f64::min);
        if mn < 0.0 {
            a = a.min(-1.0 / mn);
        }
    }
    a
}

/// Largest step keeping `x + α d` in a second-order cone, for `x` interior.
fn soc_step(x: &[f64], d: &[f64]) -> f64 {
    let n = x.len();
    let qa = d[0] * d[0] - (1..n).map(|i| d[i] * d[i]).sum::<f64>();
    let qb = x[0] * d[0] - (1..n).map(|i| x[i] * d[i]).sum::<f64>();
    let qc = x[0] * x[0] - (1..n).map(|i| x[i] * x[i]).sum::<f64>();
    let mut a = f64::INFINITY;
    if d[0] < 0.0 {
        a = -x[0] / d[0];
    }
    // Smallest positive root of qa α² + 2 qb α + qc.
    let mut roots = Vec::with_capacity(2);
    if qa.abs() <= 1e-300 {
        if qb < 0.0 {
            roots.push(-qc / (2.0 * qb));
        }
    } else {
        let disc = qb * qb - qa * qc;
        if disc >= 0.0 {
            let q = -(qb + qb.signum() * disc.sqrt());
            if q != 0.0 {
                roots.push(q / qa);
                roots.push(qc / q);
            }
        }
    }
    for r in roots {
        if r > 0.0 {
            a = a.min(r);
        }
    }
    a
}

/// Smallest `t` with `x + t e` in the cone (negative when `x` is interior).
fn boundary_shift(dims: &ConeDims, x: &ConeVec) -> f64 {
    let mut t = f64::NEG_INFINITY;
    for i in 0..dims.nonneg {
        t = t.max(-x.lin[i]);
    }
    for (off, n) in dims.soc_ranges() {
        let v = &x.lin.as_slice()[off..off + n];
        let r = v[1..].iter().map(|a| a * a).sum::<f64>().sqrt();
        t = t.max(r - v[0]);
    }
    for m in &x.psd {
        let ev = dense::hermitian_eigenvalues(m);
        t = t.max(-ev.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    t
}

// ---------------------------------------------------------------------------
// Newton system

struct Kkt {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

fn assemble_h(prog: &ConeProgram, sc: &Scaling) -> Result<Kkt> {
    let dims = &prog.dims;
    let n = prog.num_vars();
    let n_lin = dims.lin_len();
    let mut h = DMatrix::<f64>::zeros(n, n);

    if n_lin > 0 {
        let mut a = DMatrix::<f64>::zeros(n_lin, n);
        let mut tmp = ConeVec {
            lin: DVector::zeros(n_lin),
            psd: Vec::new(),
        };
        for (j, col) in prog.g.iter().enumerate() {
            if col.lin.is_empty() {
                continue;
            }
            tmp.lin.fill(0.0);
            for &(i, v) in &col.lin {
                tmp.lin[i] += v;
            }
            a.set_column(j, &sc.lin_apply(dims, &tmp.lin, true));
        }
        h += a.transpose() * &a;
    }

    for (b, ps) in sc.psd.iter().enumerate() {
        let q = dense::mul_hn(&ps.rinv, &ps.rinv);
        let cols: Vec<(usize, &PsdEntry)> = prog
            .g
            .iter()
            .enumerate()
            .flat_map(|(j, c)| c.psd.iter().filter(|(bb, _)| *bb == b).map(move |(_, e)| (j, e)))
            .collect();
        // Q G_j Q for dense columns.
        let dense_t: Vec<Option<DMatrix<C64>>> = cols
            .iter()
            .map(|(_, e)| match e {
                PsdEntry::Dense(d) => Some(dense::congruence(&q, d)),
                PsdEntry::Sparse(_) => None,
            })
            .collect();
        for (ia, (i, ei)) in cols.iter().enumerate() {
            for (ja, (j, ej)) in cols.iter().enumerate().skip(ia) {
                let v = match (ei, ej, &dense_t[ia], &dense_t[ja]) {
                    (_, _, _, Some(tj)) => ei.inner(tj),
                    (_, _, Some(ti), None) => ej.inner(ti),
                    (PsdEntry::Sparse(si), PsdEntry::Sparse(sj), None, None) => {
                        let mut acc = 0.0;
                        for &(a1, b1, v1) in si {
                            for &(c1, d1, v2) in sj {
                                acc += (v1.conj() * q[(a1, c1)] * v2 * q[(d1, b1)]).re;
                            }
                        }
                        acc
                    }
                    _ => unreachable!(),
                };
                h[(*i, *j)] += v;
                if i != j {
                    h[(*j, *i)] += v;
                }
            }
        }
    }

    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = 0.0;
    for _ in 0..8 {
        let mut hr = h.clone();
        if reg > 0.0 {
            for i in 0..n {
                hr[(i, i)] += reg * scale;
            }
        }
        if let Some(chol) = hr.cholesky() {
            return Ok(Kkt { chol });
        }
        reg = if reg == 0.0 { 1e-14 } else { reg * 100.0 };
    }
    Err(Error::solver("reduced Newton matrix is not positive definite"))
}

struct Direction {
    dx: DVector<f64>,
    dz: ConeVec,
    ds: ConeVec,
    /// `W Δz` and `W^{-T} Δs`.
    dz_t: ConeVec,
    ds_t: ConeVec,
}

/// Solves `G^T Δz = bx`, `G Δx + Δs = bz`, `λ ∘ (W Δz + W^{-T} Δs) = bs`.
fn newton(
    prog: &ConeProgram,
    sc: &Scaling,
    kkt: &Kkt,
    bx: &DVector<f64>,
    bz: &ConeVec,
    bs: &ConeVec,
) -> Direction {
    let dims = &prog.dims;
    let u = jdiv(dims, sc, bs);
    let y = sc.w_inv_t(dims, bz).sub(&u);
    let rhs = bx + prog.gt_mul(&sc.w_inv(dims, &y));
    let dx = kkt.chol.solve(&rhs);
    let gdx = prog.g_mul(&dx);
    let mut dz_t = sc.w_inv_t(dims, &gdx.sub(bz));
    dz_t.axpy(1.0, &u);
    let dz = sc.w_inv(dims, &dz_t);
    let ds_t = u.sub(&dz_t);
    let ds = sc.w_t(dims, &ds_t);
    Direction {
        dx,
        dz,
        ds,
        dz_t,
        ds_t,
    }
}

/// Runs the interior-point method.
pub fn solve(prog: &ConeProgram, opts: &IpmOptions) -> Result<IpmSolution> {
    prog.validate()?;
    let dims = &prog.dims;
    let nu = dims.degree().max(1) as f64;
    let e = ConeVec::identity(dims);
    let hnorm = prog.h.norm().max(1.0);
    let cnorm = prog.c.norm().max(1.0);

    // Starting point from the W = I least-squares systems, shifted into the cone.
    let id = Scaling::identity(dims);
    let kkt0 = assemble_h(prog, &id)?;
    let mut x = kkt0.chol.solve(&prog.gt_mul(&prog.h));
    let mut s = prog.h.sub(&prog.g_mul(&x));
    let mut z = prog.g_mul(&kkt0.chol.solve(&(-&prog.c)));
    for v in [&mut s, &mut z] {
        let t = boundary_shift(dims, v);
        if t >= -1e-8 * v.norm().max(1.0) {
            v.axpy(1.0 + t, &e);
        }
    }

    let mut history = Vec::new();
    let mut status = IpmStatus::MaxIters;
    let mut last_step = 0.0;
    let mut iter = 0;
    let (mut pcost, mut dcost, mut gap, mut pres, mut dres);
    loop {
        let rx = prog.gt_mul(&z) + &prog.c;
        let mut rz = prog.g_mul(&x);
        rz.axpy(1.0, &s);
        rz.axpy(-1.0, &prog.h);
        pcost = prog.c.dot(&x);
        dcost = -prog.h.dot(&z);
        gap = s.dot(&z);
        pres = rz.norm() / hnorm;
        dres = rx.norm() / cnorm;
        history.push(IterationLog {
            iter,
            pcost,
            dcost,
            gap,
            pres,
            dres,
            step: last_step,
        });
        log::trace!(
            "ipm {iter:3} pcost {pcost:+.9e} dcost {dcost:+.9e} gap {gap:.2e} pres {pres:.2e} dres {dres:.2e}"
        );

        if pres <= opts.feastol && dres <= opts.feastol && gap <= opts.gaptol * (1.0 + pcost.abs()) {
            status = IpmStatus::Optimal;
            break;
        }
        if let Some(es) = &opts.early_stop {
            if (pres <= es.feastol && pcost <= es.primal_at_most)
                || (dres <= es.feastol && dcost >= es.dual_at_least)
            {
                status = IpmStatus::EarlyStop;
                break;
            }
        }
        if iter >= opts.max_iters {
            break;
        }

        let Some(sc) = Scaling::compute(dims, &s, &z) else {
            status = IpmStatus::Stalled;
            break;
        };
        let kkt = match assemble_h(prog, &sc) {
            Ok(k) => k,
            Err(_) => {
                status = IpmStatus::Stalled;
                break;
            }
        };
        let mu = gap / nu;
        let bx = -&rx;
        let bz = rz.scaled(-1.0);
        let ll = jprod(dims, &sc.lambda, &sc.lambda);

        // Predictor.
        let aff = newton(prog, &sc, &kkt, &bx, &bz, &ll.scaled(-1.0));
        let a_aff = max_step_scaled(dims, &sc, &aff.ds_t)
            .min(max_step_scaled(dims, &sc, &aff.dz_t))
            .min(1.0);
        let mut ls = sc.lambda.clone();
        ls.axpy(a_aff, &aff.ds_t);
        let mut lz = sc.lambda.clone();
        lz.axpy(a_aff, &aff.dz_t);
        let sigma = (ls.dot(&lz) / gap).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let mut bs = ll.scaled(-1.0);
        bs.axpy(-1.0, &jprod(dims, &aff.ds_t, &aff.dz_t));
        bs.axpy(sigma * mu, &e);
        let dir = newton(prog, &sc, &kkt, &bx, &bz, &bs);
        let amax = max_step_scaled(dims, &sc, &dir.ds_t).min(max_step_scaled(dims, &sc, &dir.dz_t));
        let mut alpha = (opts.step_fraction * amax).min(1.0);

        // Keep the complementarity gap non-increasing.
        let mut accepted = false;
        for _ in 0..40 {
            let mut s1 = s.clone();
            s1.axpy(alpha, &dir.ds);
            let mut z1 = z.clone();
            z1.axpy(alpha, &dir.dz);
            if s1.dot(&z1) <= gap {
                x.axpy(alpha, &dir.dx, 1.0);
                s = s1;
                z = z1;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted || !alpha.is_finite() {
            status = IpmStatus::Stalled;
            break;
        }
        last_step = alpha;
        iter += 1;
    }

    Ok(IpmSolution {
        x,
        s,
        z,
        status,
        pcost,
        dcost,
        gap,
        pres,
        dres,
        iterations: iter,
        history,
    })
}
