//! Channel algebra: composite and effective channels, SINR/rate, MRT and ZF
//! beamformers, and the SDR matrix assemblies.
//!
//! Phase convention: the reflection coefficient of element `i` is `e^{jθ_i}`.
//! The stacked vector `v` used by the relaxations has `v^H = [e^{jθ_1}, …]`,
//! i.e. `v_i = e^{-jθ_i}`, so that `g_RU^H Θ G_AR = v^H Φ`.

use nalgebra::{DMatrix, DVector, RowDVector};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::geometry::ChannelRealization;
use crate::C64;

/// Reflection phases of all `I = L·N` elements, index `i = l·N + n`.
#[derive(Clone, Debug, PartialEq)]
pub enum PhaseVector {
    /// Radians in `[0, 2π)`.
    Continuous(Vec<f64>),
    /// Level indices in `{0, …, 2^bits - 1}`; level `q` is the angle `q·2π/2^bits`.
    Discrete { bits: u32, levels: Vec<usize> },
}

/// Reduces an angle into `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

impl PhaseVector {
    /// Continuous phases, each reduced into `[0, 2π)`.
    pub fn continuous(thetas: impl IntoIterator<Item = f64>) -> Self {
        PhaseVector::Continuous(thetas.into_iter().map(wrap_angle).collect())
    }

    pub fn zeros(len: usize) -> Self {
        PhaseVector::Continuous(vec![0.0; len])
    }

    pub fn discrete(bits: u32, levels: Vec<usize>) -> Result<Self> {
        if bits > 30 {
            return Err(Error::domain(format!("{bits} phase bits is unsupported")));
        }
        let b = 1usize << bits;
        if let Some(q) = levels.iter().find(|&&q| q >= b) {
            return Err(Error::domain(format!("level {q} out of range for {bits} bits")));
        }
        Ok(PhaseVector::Discrete { bits, levels })
    }

    /// Phases recovered from a relaxation vector `v` (`θ_i = -arg v_i`).
    pub fn from_v(v: &[C64]) -> Self {
        PhaseVector::continuous(v.iter().map(|z| -z.arg()))
    }

    pub fn len(&self) -> usize {
        match self {
            PhaseVector::Continuous(t) => t.len(),
            PhaseVector::Discrete { levels, .. } => levels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn angle(&self, i: usize) -> f64 {
        match self {
            PhaseVector::Continuous(t) => t[i],
            PhaseVector::Discrete { bits, levels } => level_angle(levels[i], *bits),
        }
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.angle(i)).collect()
    }

    /// Reflection coefficients `e^{jθ_i}`.
    pub fn reflection(&self) -> Vec<C64> {
        (0..self.len())
            .map(|i| C64::from_polar(1.0, self.angle(i)))
            .collect()
    }

    /// The relaxation vector `v` with `v_i = e^{-jθ_i}`.
    pub fn v(&self) -> Vec<C64> {
        self.reflection().into_iter().map(|z| z.conj()).collect()
    }
}

/// Angle of discrete level `q` with `b` bits.
pub fn level_angle(q: usize, bits: u32) -> f64 {
    TAU * q as f64 / (1u64 << bits) as f64
}

/// `M × K` transmit beamformer; row `m` is AP `m`, column `k` is user `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamMatrix {
    pub w: DMatrix<C64>,
}

impl BeamMatrix {
    pub fn new(w: DMatrix<C64>) -> Self {
        BeamMatrix { w }
    }

    pub fn zeros(m: usize, k: usize) -> Self {
        BeamMatrix {
            w: DMatrix::zeros(m, k),
        }
    }

    pub fn num_aps(&self) -> usize {
        self.w.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.w.ncols()
    }

    /// `‖w̄_m‖²` for every AP.
    pub fn row_powers(&self) -> Vec<f64> {
        self.w
            .row_iter()
            .map(|r| r.iter().map(|z| z.norm_sqr()).sum())
            .collect()
    }

    pub fn max_row_power(&self) -> f64 {
        self.row_powers().into_iter().fold(0.0, f64::max)
    }

    /// Whether every per-AP power is at most `p + 1e-9`.
    pub fn satisfies_power(&self, p: f64) -> bool {
        self.row_powers().into_iter().all(|x| x <= p + 1e-9)
    }
}

fn check_phases(real: &ChannelRealization, phases: &PhaseVector) -> Result<()> {
    if phases.len() != real.num_phases() {
        return Err(Error::domain(format!(
            "{} phases supplied for {} reflecting elements",
            phases.len(),
            real.num_phases()
        )));
    }
    Ok(())
}

/// `Φ_lk = diag(g_RU,lk^H) G_AR,l` (`N × M`).
pub fn phi_matrix(real: &ChannelRealization, l: usize, k: usize) -> Result<DMatrix<C64>> {
    if l >= real.num_ris() || k >= real.num_users() {
        return Err(Error::Index(format!("(l, k) = ({l}, {k})")));
    }
    let g = &real.g_ar[l];
    let d = real.g_ru[l].row(k);
    Ok(DMatrix::from_fn(g.nrows(), g.ncols(), |n, m| d[n] * g[(n, m)]))
}

/// `g_RU,lk^H Θ_l G_AR,l`, the RIS `l` contribution to user `k` (length `M`).
pub fn composite_channel(
    real: &ChannelRealization,
    phases: &PhaseVector,
    l: usize,
    k: usize,
) -> Result<RowDVector<C64>> {
    check_phases(real, phases)?;
    if l >= real.num_ris() || k >= real.num_users() {
        return Err(Error::Index(format!("(l, k) = ({l}, {k})")));
    }
    let n = real.elements();
    let coeff = phases.reflection();
    let theta = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| coeff[l * n + i]));
    Ok(real.g_ru[l].row(k) * theta * &real.g_ar[l])
}

/// Effective channels `ḡ_k^H = Σ_l g_RU,lk^H Θ_l G_AR,l + g_AU,k` as the rows of a `K × M` matrix.
pub fn effective_channel(real: &ChannelRealization, phases: &PhaseVector) -> Result<DMatrix<C64>> {
    check_phases(real, phases)?;
    let n = real.elements();
    let coeff = phases.reflection();
    let mut eff = real.g_au.clone();
    for l in 0..real.num_ris() {
        let mut scaled = real.g_ru[l].clone();
        for (i, mut col) in scaled.column_iter_mut().enumerate() {
            col *= coeff[l * n + i];
        }
        eff += scaled * &real.g_ar[l];
    }
    Ok(eff)
}

/// Per-user SINR `|ḡ_k^H w_k|² / (Σ_{j≠k} |ḡ_k^H w_j|² + 1)` with unit noise.
pub fn sinrs(effective: &DMatrix<C64>, w: &BeamMatrix) -> Vec<f64> {
    let a = effective * &w.w;
    (0..a.nrows())
        .map(|k| {
            let mut interference = 1.0;
            for j in 0..a.ncols() {
                if j != k {
                    interference += a[(k, j)].norm_sqr();
                }
            }
            a[(k, k)].norm_sqr() / interference
        })
        .collect()
}

/// Achievable rate `log2(1 + SINR)` in bit/s/Hz.
pub fn rate(sinr: f64) -> f64 {
    (1.0 + sinr).log2()
}

/// Per-user `(SINR, rate)`.
pub fn sinr_rate(effective: &DMatrix<C64>, w: &BeamMatrix) -> Vec<(f64, f64)> {
    sinrs(effective, w)
        .into_iter()
        .map(|s| (s, rate(s)))
        .collect()
}

/// Maximum-ratio transmission for one user: `w_m = √P ḡ_m^*/|ḡ_m|`, zero on dead links.
pub fn mrt_beamformer(effective_row: &[C64], p: f64) -> DVector<C64> {
    let s = p.sqrt();
    DVector::from_iterator(
        effective_row.len(),
        effective_row.iter().map(|g| {
            let a = g.norm();
            if a > 0.0 {
                g.conj() * (s / a)
            } else {
                C64::new(0.0, 0.0)
            }
        }),
    )
}

/// Largest tolerated condition number of the stacked effective channel for ZF.
pub const ZF_MAX_CONDITION: f64 = 1e8;

/// ZF direction `H = Ḡ (Ḡ^H Ḡ)^{-1}` with `Ḡ = effective^H` (`M × K`), computed by QR.
pub fn zf_direction(effective: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let (k, m) = effective.shape();
    if m < k {
        return Err(Error::ZfInfeasible {
            reason: format!("{m} APs cannot zero-force {k} users"),
            levels: None,
        });
    }
    let g = effective.adjoint();
    let sv = g.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(smin > 0.0) || smax / smin > ZF_MAX_CONDITION {
        return Err(Error::ZfInfeasible {
            reason: format!("effective channel is rank deficient (condition {:.3e})", smax / smin),
            levels: None,
        });
    }
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    // H = Q R^{-H}, i.e. H^H = R^{-1} Q^H.
    let hh = r
        .solve_upper_triangular(&q.adjoint())
        .ok_or_else(|| Error::ZfInfeasible {
            reason: "singular triangular factor".into(),
            levels: None,
        })?;
    Ok(hh.adjoint())
}

/// `max_m ‖h̄_m‖²`, the worst per-AP power of a ZF direction.
pub fn zf_peak_row_power(h: &DMatrix<C64>) -> f64 {
    h.row_iter()
        .map(|r| r.iter().map(|z| z.norm_sqr()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// ZF beamformer `W = √α H` with `α = P / max_m ‖h̄_m‖²`; every user's SINR equals `α`.
pub fn zf_beamformer(effective: &DMatrix<C64>, p: f64) -> Result<(BeamMatrix, f64)> {
    let h = zf_direction(effective)?;
    let alpha = p / zf_peak_row_power(&h);
    Ok((BeamMatrix::new(h * C64::new(alpha.sqrt(), 0.0)), alpha))
}

fn hermitize(a: &DMatrix<C64>) -> DMatrix<C64> {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// Matrices consumed by the semidefinite relaxations.
#[derive(Clone, Debug)]
pub struct SdrAssembly {
    /// `Φ_lk`, indexed `[l][k]` (`N × M`).
    pub phi: Vec<Vec<DMatrix<C64>>>,
    /// `Φ̄_k`, the `I × M` stack of `Φ_lk` over `l`.
    pub phi_bar: Vec<DMatrix<C64>>,
    /// `Ψ_k = Φ̄_k Φ̄_k^H`.
    pub psi: Vec<DMatrix<C64>>,
    /// `Ξ_k = Φ̄_k g_AU,k^H`.
    pub xi: Vec<DVector<C64>>,
    /// `Ω_k = [[Ψ_k, Ξ_k], [Ξ_k^H, 0]]`, the single-user objective for user `k`.
    pub omega: Vec<DMatrix<C64>>,
    /// `Ω_kj`, present when a beamformer was supplied.
    pub omega_kj: Option<Vec<Vec<DMatrix<C64>>>>,
    /// `u_kj = Φ̄_k w_j`.
    pub u: Option<Vec<Vec<DVector<C64>>>>,
    /// `ū_kj = g_AU,k w_j`.
    pub ubar: Option<Vec<Vec<C64>>>,
}

impl SdrAssembly {
    pub fn num_phases(&self) -> usize {
        self.phi_bar.first().map_or(0, |p| p.nrows())
    }

    pub fn num_users(&self) -> usize {
        self.phi_bar.len()
    }
}

/// Builds `Φ`, `Ψ`, `Ξ`, `Ω` for every user and, given `w`, the `Ω_kj`, `u_kj`, `ū_kj` terms.
pub fn assemble_sdr(real: &ChannelRealization, w: Option<&BeamMatrix>) -> Result<SdrAssembly> {
    let (k_users, m) = real.g_au.shape();
    let (l_ris, n) = (real.num_ris(), real.elements());
    let i_len = l_ris * n;
    if let Some(w) = w {
        if w.w.shape() != (m, k_users) {
            return Err(Error::domain(format!(
                "beamformer is {:?}, expected {m}x{k_users}",
                w.w.shape()
            )));
        }
    }

    let mut phi = Vec::with_capacity(l_ris);
    for l in 0..l_ris {
        phi.push((0..k_users).map(|k| phi_matrix(real, l, k)).collect::<Result<Vec<_>>>()?);
    }
    let phi_bar: Vec<DMatrix<C64>> = (0..k_users)
        .map(|k| {
            let mut s = DMatrix::zeros(i_len, m);
            for (l, per_l) in phi.iter().enumerate() {
                s.rows_mut(l * n, n).copy_from(&per_l[k]);
            }
            s
        })
        .collect();

    let mut psi = Vec::with_capacity(k_users);
    let mut xi = Vec::with_capacity(k_users);
    let mut omega = Vec::with_capacity(k_users);
    for k in 0..k_users {
        let pb = &phi_bar[k];
        let ps = hermitize(&(pb * pb.adjoint()));
        let x: DVector<C64> = pb * real.g_au.row(k).adjoint();
        let mut om = DMatrix::zeros(i_len + 1, i_len + 1);
        om.view_mut((0, 0), (i_len, i_len)).copy_from(&ps);
        om.view_mut((0, i_len), (i_len, 1)).copy_from(&x);
        om.view_mut((i_len, 0), (1, i_len)).copy_from(&x.adjoint());
        psi.push(ps);
        xi.push(x);
        omega.push(om);
    }

    let (omega_kj, u, ubar) = match w {
        None => (None, None, None),
        Some(w) => {
            let mut om_all = Vec::with_capacity(k_users);
            let mut u_all = Vec::with_capacity(k_users);
            let mut ub_all = Vec::with_capacity(k_users);
            for k in 0..k_users {
                let mut om_k = Vec::with_capacity(k_users);
                let mut u_k = Vec::with_capacity(k_users);
                let mut ub_k = Vec::with_capacity(k_users);
                for j in 0..k_users {
                    let wj = w.w.column(j);
                    let ukj: DVector<C64> = &phi_bar[k] * wj;
                    let ubkj = (real.g_au.row(k) * wj)[(0, 0)];
                    om_k.push(omega_block(&ukj, ubkj));
                    u_k.push(ukj);
                    ub_k.push(ubkj);
                }
                om_all.push(om_k);
                u_all.push(u_k);
                ub_all.push(ub_k);
            }
            (Some(om_all), Some(u_all), Some(ub_all))
        }
    };

    Ok(SdrAssembly {
        phi,
        phi_bar,
        psi,
        xi,
        omega,
        omega_kj,
        u,
        ubar,
    })
}

/// `[[u u^H, u ū^*], [ū u^H, 0]]`.
pub fn omega_block(u: &DVector<C64>, ubar: C64) -> DMatrix<C64> {
    let i_len = u.len();
    let mut om = DMatrix::zeros(i_len + 1, i_len + 1);
    om.view_mut((0, 0), (i_len, i_len))
        .copy_from(&hermitize(&(u * u.adjoint())));
    let border = u * ubar.conj();
    om.view_mut((0, i_len), (i_len, 1)).copy_from(&border);
    om.view_mut((i_len, 0), (1, i_len)).copy_from(&border.adjoint());
    om
}

/// Maps each continuous phase to the nearest of `2^b` levels (ties to the lower level, wrapping at 2π).
pub fn quantize_phases(phases: &PhaseVector, bits: u32) -> Result<PhaseVector> {
    let thetas = match phases {
        PhaseVector::Continuous(t) => t,
        PhaseVector::Discrete { .. } => {
            return Err(Error::domain("quantize_phases expects continuous phases"))
        }
    };
    if bits < 1 || bits > 30 {
        return Err(Error::domain(format!("cannot quantize to {bits} bits")));
    }
    let b = 1usize << bits;
    let step = TAU / b as f64;
    let levels = thetas
        .iter()
        .map(|&t| {
            let x = wrap_angle(t) / step;
            let f = x.floor();
            let q = if x - f > 0.5 { f as usize + 1 } else { f as usize };
            q % b
        })
        .collect();
    PhaseVector::discrete(bits, levels)
}
