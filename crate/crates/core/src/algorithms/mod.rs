//! The joint beamforming / phase-shift algorithms and the two benchmark schemes.
//!
//! | routine | users | phases |
//! |---|---|---|
//! | [`algorithm1_single_user_continuous`] | 1 | continuous, SDR + randomization |
//! | [`algorithm2_single_user_discrete`] | 1 | discrete, binary ILP |
//! | [`algorithm3_multiuser_beamforming`] | K | fixed; SOCP bisection for `W` |
//! | [`algorithm4_multiuser_phases`] | K | continuous for fixed `W`; SDP bisection |
//! | [`algorithm5_alternating`] | K | continuous; alternates 3 and 4 |
//! | [`algorithm6_zf_refinement`] | K | discrete; ZF coordinate descent |

mod multi_user;
mod single_user;
mod zf;

pub use multi_user::{
    algorithm3_multiuser_beamforming, algorithm4_multiuser_phases, algorithm5_alternating, Beamforming,
    PhaseDesign,
};
pub use single_user::{algorithm1_single_user_continuous, algorithm2_single_user_discrete, sdr_phases};
pub use zf::{algorithm6_zf_refinement, zf_objective, zf_refinement, ZfRefinement};

use rand::Rng;

use crate::conic::sdp::SdpOptions;
use crate::conic::socp::SocpOptions;
use crate::error::Result;
use crate::geometry::ChannelRealization;
use crate::ilp::BilpOptions;
use crate::model::{effective_channel, level_angle, mrt_beamformer, rate, sinrs, BeamMatrix, PhaseVector};

#[derive(Clone, Debug, PartialEq)]
pub struct AlgorithmOptions {
    /// Gaussian randomization draws.
    pub rand_count: usize,
    /// Bisection width for algorithms 3 and 4.
    pub eps: f64,
    /// Outer iterations of algorithm 5.
    pub alt_iters: usize,
    /// Single-coordinate updates of algorithm 6.
    pub zf_updates: usize,
    /// Start algorithm 5 from uniformly random phases instead of zeros.
    pub random_init: bool,
    /// Seed the ILP incumbent with quantized SDR phases.
    pub sdr_seed: bool,
    pub sdp: SdpOptions,
    pub socp: SocpOptions,
    pub bilp: BilpOptions,
}

impl Default for AlgorithmOptions {
    fn default() -> Self {
        AlgorithmOptions {
            rand_count: 1000,
            eps: 0.1,
            alt_iters: 30,
            zf_updates: 300,
            random_init: false,
            sdr_seed: true,
            sdp: SdpOptions::default(),
            socp: SocpOptions::default(),
            bilp: BilpOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimizationResult {
    pub w: BeamMatrix,
    /// `None` for the scheme without RISs.
    pub phases: Option<PhaseVector>,
    pub per_user_sinr: Vec<f64>,
    /// bit/s/Hz.
    pub per_user_rate: Vec<f64>,
    pub min_rate: f64,
    pub iterations: usize,
    /// Per-iteration minimum SINR (algorithms 5 and 6).
    pub trace: Vec<f64>,
    /// Solver limits that were hit; the result is still usable.
    pub warnings: Vec<String>,
}

impl OptimizationResult {
    pub fn min_sinr(&self) -> f64 {
        self.per_user_sinr.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Evaluates `(w, phases)` from scratch and packages the result.
pub(crate) fn finish(
    real: &ChannelRealization,
    w: BeamMatrix,
    phases: Option<PhaseVector>,
    iterations: usize,
    trace: Vec<f64>,
    warnings: Vec<String>,
) -> Result<OptimizationResult> {
    let eff = match &phases {
        Some(ph) => effective_channel(real, ph)?,
        None => real.g_au.clone(),
    };
    let per_user_sinr = sinrs(&eff, &w);
    let per_user_rate: Vec<f64> = per_user_sinr.iter().map(|&s| rate(s)).collect();
    let min_rate = per_user_rate.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(OptimizationResult {
        w,
        phases,
        per_user_sinr,
        per_user_rate,
        min_rate,
        iterations,
        trace,
        warnings,
    })
}

/// MRT for a single user given the `1 × M` effective channel.
pub(crate) fn mrt_matrix(eff: &nalgebra::DMatrix<crate::C64>, p: f64) -> BeamMatrix {
    let row: Vec<crate::C64> = eff.row(0).iter().cloned().collect();
    let w = mrt_beamformer(&row, p);
    BeamMatrix::new(nalgebra::DMatrix::from_column_slice(w.len(), 1, w.as_slice()))
}

/// Uniform phases over `[0, 2π)` (`bits = None`) or over the `2^bits` levels.
pub fn random_phases<R: Rng + ?Sized>(len: usize, bits: Option<u32>, rng: &mut R) -> Result<PhaseVector> {
    match bits {
        None => Ok(PhaseVector::continuous(
            (0..len).map(|_| rng.random::<f64>() * std::f64::consts::TAU),
        )),
        Some(b) => {
            let levels = 1usize << b;
            PhaseVector::discrete(b, (0..len).map(|_| rng.random_range(0..levels)).collect())
        }
    }
}

/// Random phases followed by MRT (one user) or algorithm 3.
pub fn random_phase_baseline<R: Rng + ?Sized>(
    real: &ChannelRealization,
    p: f64,
    bits: Option<u32>,
    opts: &AlgorithmOptions,
    rng: &mut R,
) -> Result<OptimizationResult> {
    let phases = random_phases(real.num_phases(), bits, rng)?;
    let mut warnings = Vec::new();
    let w = if real.num_users() == 1 {
        mrt_matrix(&effective_channel(real, &phases)?, p)
    } else {
        let bf = algorithm3_multiuser_beamforming(real, &phases, p, opts)?;
        warnings.extend(bf.warnings);
        bf.w
    };
    finish(real, w, Some(phases), 1, vec![], warnings)
}

/// Direct links only: MRT (one user) or algorithm 3 on `g_AU`.
pub fn no_ris_baseline(real: &ChannelRealization, p: f64, opts: &AlgorithmOptions) -> Result<OptimizationResult> {
    let bare = real.without_ris();
    let mut warnings = Vec::new();
    let w = if real.num_users() == 1 {
        mrt_matrix(&real.g_au, p)
    } else {
        let bf = algorithm3_multiuser_beamforming(&bare, &PhaseVector::zeros(0), p, opts)?;
        warnings.extend(bf.warnings);
        bf.w
    };
    finish(real, w, None, 1, vec![], warnings)
}

/// Angle of every level for `bits` (used by the discrete searches).
pub(crate) fn level_table(bits: u32) -> Vec<f64> {
    (0..1usize << bits).map(|q| level_angle(q, bits)).collect()
}

#[cfg(test)]
pub(crate) mod test_util {
    use crate::geometry::ChannelRealization;
    use crate::C64;
    use nalgebra::DMatrix;
    use rand::Rng;

    /// Channels with realistic relative scales: strong cascaded links, weak direct links.
    pub fn realization<R: Rng>(rng: &mut R, m: usize, k: usize, l: usize, n: usize, direct: f64) -> ChannelRealization {
        let mut c = |s: f64| C64::new((rng.random::<f64>() - 0.5) * s, (rng.random::<f64>() - 0.5) * s);
        let g_ar = (0..l).map(|_| DMatrix::from_fn(n, m, |_, _| c(1.0))).collect::<Vec<_>>();
        let g_ru = (0..l).map(|_| DMatrix::from_fn(k, n, |_, _| c(1.0))).collect::<Vec<_>>();
        let g_au = DMatrix::from_fn(k, m, |_, _| c(direct));
        ChannelRealization::from_channels(g_ar, g_ru, g_au).unwrap()
    }
}
