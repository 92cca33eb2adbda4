use nalgebra::DMatrix;
use rand::Rng;

use super::{finish, random_phases, AlgorithmOptions, OptimizationResult};
use crate::conic::randomize::gaussian_randomize;
use crate::conic::sdp::{sdp_feasibility, SdpFeasibility};
use crate::conic::socp::{socp_feasibility, socp_max_slack, SocpFeasibilityProblem, SocpOutcome};
use crate::error::{Error, Result};
use crate::geometry::ChannelRealization;
use crate::model::{assemble_sdr, effective_channel, sinrs, BeamMatrix, PhaseVector, SdrAssembly};
use crate::C64;

/// Output of [`algorithm3_multiuser_beamforming`].
#[derive(Clone, Debug)]
pub struct Beamforming {
    pub w: BeamMatrix,
    /// Largest target certified feasible (`ξ_min` at exit).
    pub xi: f64,
    /// Smallest target found infeasible (`ξ_max` at exit).
    pub xi_upper: f64,
    pub socp_calls: usize,
    pub warnings: Vec<String>,
}

/// Bisection on the common SINR target `ξ` with an SOCP feasibility oracle.
///
/// The bracket starts at `[0, max_k M·P·‖ḡ_k‖²]`. If no midpoint is feasible the
/// max-slack beamformer at `ξ_min` is returned instead of the zero matrix.
pub fn algorithm3_multiuser_beamforming(
    real: &ChannelRealization,
    phases: &PhaseVector,
    p: f64,
    opts: &AlgorithmOptions,
) -> Result<Beamforming> {
    if !(opts.eps > 0.0) {
        return Err(Error::domain("bisection width must be positive"));
    }
    let eff = effective_channel(real, phases)?;
    let (k_users, m) = eff.shape();
    let mut lo = 0.0;
    let mut hi = (0..k_users)
        .map(|k| m as f64 * p * eff.row(k).iter().map(|z| z.norm_sqr()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut best: Option<BeamMatrix> = None;
    let mut calls = 0;
    let mut warnings = Vec::new();
    while hi - lo > opts.eps {
        let mid = 0.5 * (lo + hi);
        calls += 1;
        let prob = SocpFeasibilityProblem {
            effective: eff.clone(),
            xi: mid,
            p,
        };
        match socp_feasibility(&prob, &opts.socp) {
            Ok(SocpOutcome::Feasible { w, .. }) => {
                lo = mid;
                best = Some(w);
            }
            Ok(SocpOutcome::Infeasible { .. }) => hi = mid,
            Err(e @ Error::Solver(_)) => {
                // Undecided: shrink from above so the kept beamformer stays certified.
                let msg = format!("SOCP undecided at xi = {mid:.4e}, treated as infeasible: {e}");
                log::debug!("{msg}");
                warnings.push(msg);
                hi = mid;
            }
            Err(e) => return Err(e.context("beamforming bisection")),
        }
    }
    let w = match best {
        Some(w) => w,
        None => {
            calls += 1;
            let prob = SocpFeasibilityProblem {
                effective: eff.clone(),
                xi: lo,
                p,
            };
            socp_max_slack(&prob, &opts.socp)
                .map_err(|e| e.context("max-slack beamformer"))?
                .0
        }
    };
    Ok(Beamforming {
        w,
        xi: lo,
        xi_upper: hi,
        socp_calls: calls,
        warnings,
    })
}

/// Output of [`algorithm4_multiuser_phases`].
#[derive(Clone, Debug)]
pub struct PhaseDesign {
    pub phases: PhaseVector,
    /// Minimum SINR of the randomized phases with the given beamformer.
    pub min_sinr: f64,
    /// Largest relaxed target certified feasible.
    pub xi_bar: f64,
    pub sdp_calls: usize,
    pub warnings: Vec<String>,
}

/// `min_k |v^H u_kk + ū_kk|² / (Σ_{j≠k} |v^H u_kj + ū_kj|² + 1)`.
pub(crate) fn min_sinr_of_v(asm: &SdrAssembly, v: &[C64]) -> f64 {
    let (u, ub) = (asm.u.as_ref().unwrap(), asm.ubar.as_ref().unwrap());
    let k_users = u.len();
    let amp = |k: usize, j: usize| -> C64 {
        let s: C64 = v.iter().zip(u[k][j].iter()).map(|(a, b)| a.conj() * b).sum();
        s + ub[k][j]
    };
    (0..k_users)
        .map(|k| {
            let interf: f64 = (0..k_users).filter(|&j| j != k).map(|j| amp(k, j).norm_sqr()).sum();
            amp(k, k).norm_sqr() / (interf + 1.0)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Phase design for a fixed beamformer: bisection on `ξ̄` with the SDR feasibility
/// problem, then Gaussian randomization scored by the minimum SINR.
///
/// The bracket starts at `[0, min_k (‖u_kk‖₁ + |ū_kk|)²]`, an upper bound on every
/// user's interference-free SINR for unit-modulus `v`.
pub fn algorithm4_multiuser_phases<R: Rng + ?Sized>(
    real: &ChannelRealization,
    w: &BeamMatrix,
    opts: &AlgorithmOptions,
    rng: &mut R,
) -> Result<PhaseDesign> {
    if !(opts.eps > 0.0) {
        return Err(Error::domain("bisection width must be positive"));
    }
    let asm = assemble_sdr(real, Some(w))?;
    let i_len = asm.num_phases();
    if i_len == 0 {
        let empty = PhaseVector::zeros(0);
        return Ok(PhaseDesign {
            min_sinr: min_sinr_of_v(&asm, &[]),
            phases: empty,
            xi_bar: 0.0,
            sdp_calls: 0,
            warnings: vec![],
        });
    }
    let (u, ub) = (asm.u.as_ref().unwrap(), asm.ubar.as_ref().unwrap());
    let mut hi = (0..asm.num_users())
        .map(|k| {
            let l1: f64 = u[k][k].iter().map(|z| z.norm()).sum();
            (l1 + ub[k][k].norm()).powi(2)
        })
        .fold(f64::INFINITY, f64::min);
    let mut lo = 0.0;
    // ξ̄ = 0 is always feasible; any V with unit diagonal works.
    let mut v_best = DMatrix::<C64>::identity(i_len + 1, i_len + 1);
    let mut calls = 0;
    let mut warnings = Vec::new();
    while hi - lo > opts.eps {
        let mid = 0.5 * (lo + hi);
        calls += 1;
        match sdp_feasibility(&asm, mid, &opts.sdp) {
            Ok(SdpFeasibility::Feasible { v, .. }) => {
                lo = mid;
                v_best = v;
            }
            Ok(SdpFeasibility::Infeasible(_)) => hi = mid,
            Err(e @ Error::Solver(_)) => {
                let msg = format!("SDP undecided at xi_bar = {mid:.4e}, treated as infeasible: {e}");
                log::debug!("{msg}");
                warnings.push(msg);
                hi = mid;
            }
            Err(e) => return Err(e.context("phase bisection")),
        }
    }
    let best = gaussian_randomize(&v_best, |v| min_sinr_of_v(&asm, v), opts.rand_count, rng)?;
    Ok(PhaseDesign {
        phases: best.phases,
        min_sinr: best.score,
        xi_bar: lo,
        sdp_calls: calls,
        warnings,
    })
}

fn min_sinr(real: &ChannelRealization, phases: &PhaseVector, w: &BeamMatrix) -> Result<f64> {
    Ok(sinrs(&effective_channel(real, phases)?, w)
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}

/// Alternates [`algorithm3_multiuser_beamforming`] and [`algorithm4_multiuser_phases`].
///
/// Iteration `t` designs `W^(t)` for `Θ^(t)`, then `Θ^(t+1)` for `W^(t)`, and
/// records `SINR_min^(t)` of `(W^(t), Θ^(t+1))`. The loop stops when that value
/// fails to improve or after `opts.alt_iters` iterations. The best evaluated pair
/// is returned, including `(W^(t), Θ^(t))`.
pub fn algorithm5_alternating<R: Rng + ?Sized>(
    real: &ChannelRealization,
    p: f64,
    opts: &AlgorithmOptions,
    rng: &mut R,
) -> Result<OptimizationResult> {
    if opts.alt_iters == 0 {
        return Err(Error::domain("at least one alternating iteration is required"));
    }
    let mut phases = if opts.random_init {
        random_phases(real.num_phases(), None, rng)?
    } else {
        PhaseVector::zeros(real.num_phases())
    };
    let mut trace = Vec::new();
    let mut warnings = Vec::new();
    let mut best: Option<(f64, BeamMatrix, PhaseVector)> = None;
    let consider = |s: f64, w: &BeamMatrix, ph: &PhaseVector, best: &mut Option<(f64, BeamMatrix, PhaseVector)>| {
        if best.as_ref().is_none_or(|b| s > b.0) {
            *best = Some((s, w.clone(), ph.clone()));
        }
    };
    let mut t = 0;
    while t < opts.alt_iters {
        t += 1;
        let bf = algorithm3_multiuser_beamforming(real, &phases, p, opts)
            .map_err(|e| e.context(format!("alternating iteration {t}, beamforming")))?;
        warnings.extend(bf.warnings.iter().cloned());
        consider(min_sinr(real, &phases, &bf.w)?, &bf.w, &phases, &mut best);
        let pd = algorithm4_multiuser_phases(real, &bf.w, opts, rng)
            .map_err(|e| e.context(format!("alternating iteration {t}, phases")))?;
        warnings.extend(pd.warnings);
        let s = min_sinr(real, &pd.phases, &bf.w)?;
        consider(s, &bf.w, &pd.phases, &mut best);
        let stop = trace.last().is_some_and(|&prev| s <= prev);
        trace.push(s);
        phases = pd.phases;
        if stop {
            break;
        }
    }
    let (_, w, ph) = best.expect("at least one iteration ran");
    finish(real, w, Some(ph), t, trace, warnings)
}

#[cfg(test)]
mod tests {
    use super::super::test_util::realization;
    use super::super::{random_phase_baseline, sdr_phases};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_user_bisection_reaches_mrt_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let real = realization(&mut rng, 4, 1, 1, 2, 1.0);
            let ph = PhaseVector::continuous([0.3, 1.0]);
            let p = 5.0;
            let bf = algorithm3_multiuser_beamforming(&real, &ph, p, &AlgorithmOptions::default()).unwrap();
            let eff = effective_channel(&real, &ph).unwrap();
            let s: f64 = eff.iter().map(|z| z.norm()).sum();
            let opt = p * s * s;
            assert!(bf.xi <= opt + 1e-6 && opt - bf.xi <= 0.1 + 1e-6, "{} vs {opt}", bf.xi);
            assert!(bf.w.satisfies_power(p));
            let achieved = sinrs(&eff, &bf.w)[0];
            assert!(achieved >= bf.xi - 1e-6);
        }
    }

    #[test]
    fn two_user_bisection_matches_beam_grid() {
        // M = 2, K = 2: grid over per-AP power split and phases of each beam.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let real = realization(&mut rng, 2, 2, 0, 0, 1.0);
        let p = 4.0;
        let bf = algorithm3_multiuser_beamforming(&real, &PhaseVector::zeros(0), p, &AlgorithmOptions::default()).unwrap();
        let eff = &real.g_au;
        let mut grid_best: f64 = 0.0;
        let steps = 24;
        for a in 0..=steps {
            for b in 0..=steps {
                for pa in 0..steps {
                    for pb in 0..steps {
                        // AP m splits power: |w_m1|² = P c_m, |w_m2|² = P (1 - c_m).
                        let ca = a as f64 / steps as f64;
                        let cb = b as f64 / steps as f64;
                        let ta = std::f64::consts::TAU * pa as f64 / steps as f64;
                        let tb = std::f64::consts::TAU * pb as f64 / steps as f64;
                        let w = DMatrix::from_row_slice(
                            2,
                            2,
                            &[
                                C64::new((p * ca).sqrt(), 0.0),
                                C64::from_polar((p * (1.0 - ca)).sqrt(), ta),
                                C64::new((p * cb).sqrt(), 0.0) * C64::from_polar(1.0, tb),
                                C64::new((p * (1.0 - cb)).sqrt(), 0.0),
                            ],
                        );
                        let s = sinrs(eff, &BeamMatrix::new(w)).into_iter().fold(f64::INFINITY, f64::min);
                        grid_best = grid_best.max(s);
                    }
                }
            }
        }
        // The grid is a restriction, so the bisection must reach at least its value.
        assert!(bf.xi >= grid_best - 0.1 - 1e-6, "{} vs grid {grid_best}", bf.xi);
        let achieved = sinrs(eff, &bf.w).into_iter().fold(f64::INFINITY, f64::min);
        assert!(achieved >= bf.xi - 1e-6);
    }

    #[test]
    fn eps_bounds_the_bracket() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let real = realization(&mut rng, 4, 2, 1, 3, 0.5);
        let ph = PhaseVector::zeros(3);
        let opts = AlgorithmOptions::default();
        let a = algorithm3_multiuser_beamforming(&real, &ph, 10.0, &opts).unwrap();
        let b = algorithm3_multiuser_beamforming(&real, &ph, 10.0, &AlgorithmOptions { eps: 0.01, ..opts }).unwrap();
        assert!((a.xi - b.xi).abs() <= 0.1 + 1e-9);
        assert!(a.xi_upper - a.xi <= 0.1);
    }

    #[test]
    fn phase_design_respects_certified_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let real = realization(&mut rng, 3, 2, 1, 3, 0.3);
        let opts = AlgorithmOptions {
            rand_count: 300,
            ..Default::default()
        };
        let bf = algorithm3_multiuser_beamforming(&real, &PhaseVector::zeros(3), 10.0, &opts).unwrap();
        let pd = algorithm4_multiuser_phases(&real, &bf.w, &opts, &mut rng).unwrap();
        let eval = min_sinr(&real, &pd.phases, &bf.w).unwrap();
        assert!((eval - pd.min_sinr).abs() < 1e-9 * (1.0 + eval));
        assert!(pd.sdp_calls > 0);
    }

    #[test]
    fn single_user_phase_design_close_to_sdr() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let real = realization(&mut rng, 3, 1, 1, 4, 0.3);
        let opts = AlgorithmOptions::default();
        let (ph1, _) = sdr_phases(&real, &opts, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let eff = effective_channel(&real, &ph1).unwrap();
        let w = super::super::mrt_matrix(&eff, 2.0);
        let pd = algorithm4_multiuser_phases(&real, &w, &opts, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let s1 = min_sinr(&real, &ph1, &w).unwrap();
        // With a fixed MRT beam the bisection relaxation is at least as good as the SDR phases.
        assert!(pd.min_sinr >= 0.95 * s1, "{} vs {s1}", pd.min_sinr);
    }

    #[test]
    fn alternating_improves_on_random_phases() {
        let opts = AlgorithmOptions {
            rand_count: 200,
            ..Default::default()
        };
        let mut wins = 0;
        for seed in 0..6 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let real = realization(&mut rng, 4, 2, 1, 4, 0.2);
            let a5 = algorithm5_alternating(&real, 10.0, &opts, &mut rng).unwrap();
            let rp = random_phase_baseline(&real, 10.0, None, &opts, &mut rng).unwrap();
            assert!(a5.w.satisfies_power(10.0));
            assert!(a5.iterations >= 1 && a5.iterations <= 30);
            let best_trace = a5.trace.iter().cloned().fold(0.0, f64::max);
            assert!(a5.min_sinr() >= best_trace - 1e-9);
            if a5.min_rate >= rp.min_rate {
                wins += 1;
            }
        }
        assert!(wins >= 5, "{wins}");
    }

    #[test]
    fn one_iteration_is_one_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let real = realization(&mut rng, 3, 2, 1, 2, 0.5);
        let opts = AlgorithmOptions {
            alt_iters: 1,
            rand_count: 50,
            ..Default::default()
        };
        let r = algorithm5_alternating(&real, 5.0, &opts, &mut rng).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.trace.len(), 1);
    }
}
