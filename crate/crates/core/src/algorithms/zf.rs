use nalgebra::DMatrix;

use super::{finish, level_table, AlgorithmOptions, OptimizationResult};
use crate::error::{Error, Result};
use crate::geometry::ChannelRealization;
use crate::model::{effective_channel, zf_direction, zf_peak_row_power, BeamMatrix, PhaseVector};
use crate::C64;

/// `f = max_m ‖h̄_m‖²` of the ZF direction at the given phases.
pub fn zf_objective(real: &ChannelRealization, phases: &PhaseVector) -> Result<f64> {
    Ok(zf_peak_row_power(&zf_direction(&effective_channel(real, phases)?)?))
}

/// Outcome of the discrete coordinate descent on `f`.
#[derive(Clone, Debug)]
pub struct ZfRefinement {
    pub bits: u32,
    pub levels: Vec<usize>,
    /// `f` at the start and after every single-coordinate update.
    pub f_trace: Vec<f64>,
    pub updates: usize,
    /// A full sweep ended without any change.
    pub converged: bool,
}

fn attach_levels(e: Error, levels: &[usize]) -> Error {
    match e {
        Error::ZfInfeasible { reason, .. } => Error::ZfInfeasible {
            reason,
            levels: Some(levels.to_vec()),
        },
        other => other,
    }
}

/// Minimizes `f` one phase at a time in index order, starting from all-zero levels.
///
/// Each visit counts as one update. A level replaces the current one only if it
/// strictly lowers `f`; among such levels the smallest `f` wins, lowest index on
/// ties. Levels at which ZF is infeasible are skipped.
pub fn zf_refinement(real: &ChannelRealization, bits: u32, max_updates: usize) -> Result<ZfRefinement> {
    let i_len = real.num_phases();
    let n = real.elements();
    let angles = level_table(bits);
    let rot: Vec<C64> = angles.iter().map(|&a| C64::from_polar(1.0, a)).collect();
    let mut levels = vec![0usize; i_len];
    let start = PhaseVector::discrete(bits, levels.clone())?;
    let mut eff = effective_channel(real, &start)?;
    let mut f = zf_objective(real, &start).map_err(|e| attach_levels(e, &levels))?;
    let mut f_trace = vec![f];
    if rot.len() == 1 || i_len == 0 {
        return Ok(ZfRefinement {
            bits,
            levels,
            f_trace,
            updates: 0,
            converged: true,
        });
    }
    let (k_users, m) = eff.shape();
    let mut updates = 0;
    let mut unchanged = 0;
    let mut i = 0;
    let mut cand = DMatrix::<C64>::zeros(k_users, m);
    while updates < max_updates && unchanged < i_len {
        let (l, e) = (i / n, i % n);
        let cur = levels[i];
        let mut best = (f, cur);
        for (q, r) in rot.iter().enumerate() {
            if q == cur {
                continue;
            }
            let delta = r - rot[cur];
            for k in 0..k_users {
                let a = delta * real.g_ru[l][(k, e)];
                for mi in 0..m {
                    cand[(k, mi)] = eff[(k, mi)] + a * real.g_ar[l][(e, mi)];
                }
            }
            let fq = match zf_direction(&cand) {
                Ok(h) => zf_peak_row_power(&h),
                Err(Error::ZfInfeasible { .. }) => continue,
                Err(err) => return Err(err),
            };
            if fq < best.0 || (fq == best.0 && q < best.1 && best.1 != cur) {
                best = (fq, q);
            }
        }
        updates += 1;
        if best.1 != cur {
            let delta = rot[best.1] - rot[cur];
            for k in 0..k_users {
                let a = delta * real.g_ru[l][(k, e)];
                for mi in 0..m {
                    eff[(k, mi)] += a * real.g_ar[l][(e, mi)];
                }
            }
            levels[i] = best.1;
            f = best.0;
            unchanged = 0;
        } else {
            unchanged += 1;
        }
        f_trace.push(f);
        i = (i + 1) % i_len;
    }
    Ok(ZfRefinement {
        bits,
        levels,
        f_trace,
        updates,
        converged: unchanged >= i_len,
    })
}

/// ZF coordinate descent over discrete phases, then `W = √α H` with `α = P / f`.
pub fn algorithm6_zf_refinement(
    real: &ChannelRealization,
    p: f64,
    bits: u32,
    opts: &AlgorithmOptions,
) -> Result<OptimizationResult> {
    let zr = zf_refinement(real, bits, opts.zf_updates)?;
    let phases = PhaseVector::discrete(bits, zr.levels.clone())?;
    // Recompute from scratch rather than trusting the incremental channel.
    let h = zf_direction(&effective_channel(real, &phases)?).map_err(|e| attach_levels(e, &zr.levels))?;
    let alpha = p / zf_peak_row_power(&h);
    let w = BeamMatrix::new(h * C64::new(alpha.sqrt(), 0.0));
    let trace = zr.f_trace.iter().map(|f| p / f).collect();
    let mut warnings = Vec::new();
    if !zr.converged {
        warnings.push(format!("coordinate descent stopped after {} updates without converging", zr.updates));
    }
    finish(real, w, Some(phases), zr.updates, trace, warnings)
}
