use rand::Rng;

use super::{finish, mrt_matrix, AlgorithmOptions, OptimizationResult};
use crate::conic::randomize::{augmented_quadratic, gaussian_randomize};
use crate::conic::sdp::{solve_sdp, SdpProblem, SdpStatus};
use crate::error::{Error, Result};
use crate::geometry::ChannelRealization;
use crate::ilp::{build_bilp, solve_bilp, BilpOptions, BilpStatus};
use crate::model::{assemble_sdr, effective_channel, quantize_phases, PhaseVector};

fn require_single_user(real: &ChannelRealization) -> Result<()> {
    if real.num_users() != 1 {
        return Err(Error::domain(format!(
            "single-user algorithm called with {} users",
            real.num_users()
        )));
    }
    Ok(())
}

/// Continuous phases from the relaxation `max tr(Ω V)`, `diag V = 1`, `V ⪰ 0`,
/// followed by Gaussian randomization scored by `ṽ^H Ω ṽ`.
pub fn sdr_phases<R: Rng + ?Sized>(
    real: &ChannelRealization,
    opts: &AlgorithmOptions,
    rng: &mut R,
) -> Result<(PhaseVector, Vec<String>)> {
    require_single_user(real)?;
    let asm = assemble_sdr(real, None)?;
    let omega = &asm.omega[0];
    let sol = solve_sdp(
        &SdpProblem {
            objective: omega.clone(),
            unit_diagonal: true,
            inequalities: vec![],
        },
        &opts.sdp,
    )
    .map_err(|e| e.context("single-user SDR"))?;
    let mut warnings = Vec::new();
    if sol.status != SdpStatus::Optimal {
        warnings.push(format!(
            "SDR stopped with status {:?}, gap {:.2e}",
            sol.status, sol.duality_gap
        ));
    }
    let best = gaussian_randomize(&sol.v, |v| augmented_quadratic(omega, v), opts.rand_count, rng)?;
    Ok((best.phases, warnings))
}

pub fn algorithm1_single_user_continuous<R: Rng + ?Sized>(
    real: &ChannelRealization,
    p: f64,
    opts: &AlgorithmOptions,
    rng: &mut R,
) -> Result<OptimizationResult> {
    require_single_user(real)?;
    let (phases, warnings) = if real.num_phases() == 0 {
        (PhaseVector::zeros(0), vec![])
    } else {
        sdr_phases(real, opts, rng)?
    };
    let w = mrt_matrix(&effective_channel(real, &phases)?, p);
    finish(real, w, Some(phases), 1, vec![], warnings)
}

/// Discrete phases maximizing `v^H Ψ v + 2 Re{v^H Ξ}` exactly by branch-and-bound, then MRT.
///
/// With `opts.sdr_seed` the ILP incumbent starts from the quantized SDR phases; `rng`
/// is only used for that seed's randomization.
pub fn algorithm2_single_user_discrete<R: Rng + ?Sized>(
    real: &ChannelRealization,
    p: f64,
    bits: u32,
    opts: &AlgorithmOptions,
    rng: &mut R,
) -> Result<OptimizationResult> {
    require_single_user(real)?;
    let i_len = real.num_phases();
    let mut warnings = Vec::new();
    let asm = assemble_sdr(real, None)?;
    let xi: Vec<_> = asm.xi[0].iter().cloned().collect();
    let problem = build_bilp(&asm.psi[0], &xi, bits)?;
    let mut bopts: BilpOptions = opts.bilp.clone();
    if opts.sdr_seed && bits >= 1 && i_len > 0 && bopts.incumbent.is_none() {
        let (cont, w) = sdr_phases(real, opts, rng)?;
        warnings.extend(w);
        if let PhaseVector::Discrete { levels, .. } = quantize_phases(&cont, bits)? {
            bopts.incumbent = Some(levels);
        }
    }
    let sol = solve_bilp(&problem, &bopts).map_err(|e| e.context("discrete phase ILP"))?;
    if sol.status == BilpStatus::NodeLimit {
        let msg = format!(
            "ILP stopped before proving optimality ({} nodes, gap {:.3e}); incumbent used",
            sol.explored_nodes,
            sol.gap()
        );
        log::debug!("{msg}");
        warnings.push(msg);
    }
    let phases = PhaseVector::discrete(bits, sol.levels)?;
    let w = mrt_matrix(&effective_channel(real, &phases)?, p);
    finish(real, w, Some(phases), sol.explored_nodes, vec![], warnings)
}

#[cfg(test)]
mod tests {
    use super::super::test_util::realization;
    use super::super::{no_ris_baseline, random_phase_baseline};
    use super::*;
    use crate::model::level_angle;
    use crate::C64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mrt_rate(real: &ChannelRealization, phases: &PhaseVector, p: f64) -> f64 {
        let eff = effective_channel(real, phases).unwrap();
        let s: f64 = eff.iter().map(|z| z.norm()).sum();
        (1.0 + p * s * s).log2()
    }

    #[test]
    fn no_ris_reduces_to_direct_mrt() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let real = realization(&mut rng, 4, 1, 2, 3, 1.0).without_ris();
        let r = algorithm1_single_user_continuous(&real, 3.0, &AlgorithmOptions::default(), &mut rng).unwrap();
        let s: f64 = real.g_au.iter().map(|z| z.norm()).sum();
        assert!((r.min_rate - (1.0 + 3.0 * s * s).log2()).abs() < 1e-12);
    }

    #[test]
    fn beats_random_phases_and_direct_links() {
        let opts = AlgorithmOptions {
            rand_count: 200,
            ..Default::default()
        };
        let mut wins = 0;
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let real = realization(&mut rng, 4, 1, 2, 3, 0.2);
            let a1 = algorithm1_single_user_continuous(&real, 10.0, &opts, &mut rng).unwrap();
            let rp = random_phase_baseline(&real, 10.0, None, &opts, &mut rng).unwrap();
            let nr = no_ris_baseline(&real, 10.0, &opts).unwrap();
            assert!(a1.w.satisfies_power(10.0));
            if a1.min_rate >= rp.min_rate && a1.min_rate >= nr.min_rate - 1e-6 {
                wins += 1;
            }
        }
        assert!(wins >= 9, "{wins}");
    }

    #[test]
    fn discrete_matches_exhaustive_bound_search() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let real = realization(&mut rng, 3, 1, 1, 3, 0.5);
            let r = algorithm2_single_user_discrete(&real, 1.0, 2, &AlgorithmOptions::default(), &mut rng).unwrap();
            assert!(r.warnings.is_empty());
            let asm = assemble_sdr(&real, None).unwrap();
            // Bound objective = ‖ḡ‖² - ‖g_AU‖², maximized over 4^3 candidates.
            let score = |lv: &[usize]| {
                let v: Vec<C64> = lv.iter().map(|&q| C64::from_polar(1.0, -level_angle(q, 2))).collect();
                let mut ext = v.clone();
                ext.push(C64::new(1.0, 0.0));
                let x = nalgebra::DVector::from_vec(ext);
                (x.adjoint() * &asm.omega[0] * &x)[(0, 0)].re
            };
            let mut best = (f64::NEG_INFINITY, vec![]);
            for c in 0..64usize {
                let lv = vec![c % 4, (c / 4) % 4, c / 16];
                let s = score(&lv);
                if s > best.0 {
                    best = (s, lv);
                }
            }
            match r.phases.as_ref().unwrap() {
                PhaseVector::Discrete { levels, .. } => {
                    assert!((score(levels) - best.0).abs() < 1e-9 * (1.0 + best.0.abs()));
                }
                _ => panic!("expected discrete"),
            }
        }
    }

    #[test]
    fn single_level_gives_identity_reflection() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let real = realization(&mut rng, 3, 1, 2, 2, 0.5);
        let r = algorithm2_single_user_discrete(&real, 2.0, 0, &AlgorithmOptions::default(), &mut rng).unwrap();
        assert_eq!(r.phases, Some(PhaseVector::Discrete { bits: 0, levels: vec![0; 4] }));
        assert!((r.min_rate - mrt_rate(&real, &PhaseVector::zeros(4), 2.0)).abs() < 1e-12);
    }

    #[test]
    fn fine_quantization_approaches_continuous() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let real = realization(&mut rng, 4, 1, 2, 4, 0.3);
        let opts = AlgorithmOptions::default();
        let mut r1 = ChaCha8Rng::seed_from_u64(77);
        let mut r2 = ChaCha8Rng::seed_from_u64(77);
        let a1 = algorithm1_single_user_continuous(&real, 100.0, &opts, &mut r1).unwrap();
        let a2 = algorithm2_single_user_discrete(&real, 100.0, 8, &opts, &mut r2).unwrap();
        assert!(a2.min_rate >= 0.99 * a1.min_rate, "{} vs {}", a2.min_rate, a1.min_rate);
    }

    #[test]
    fn rejects_multi_user() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let real = realization(&mut rng, 3, 2, 1, 2, 0.5);
        let opts = AlgorithmOptions::default();
        assert!(algorithm1_single_user_continuous(&real, 1.0, &opts, &mut rng).is_err());
        assert!(algorithm2_single_user_discrete(&real, 1.0, 1, &opts, &mut rng).is_err());
    }
}
