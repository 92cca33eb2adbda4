//! Complex Hermitian SDPs
//!
//! ```text
//! maximize tr(C V)  s.t.  V_ii = 1 (optional),  tr(A_r V) >= b_r,  V ⪰ 0
//! ```
//!
//! `V` is the dual variable of a cone program with one Hermitian PSD block in
//! [`super::ipm`]. Problems with
//! inequalities are first solved as a max-slack program, which both decides
//! feasibility and supplies an infeasibility certificate.

use nalgebra::{DMatrix, DVector};

use super::ipm::{self, Column, ConeDims, ConeProgram, ConeVec, EarlyStop, IpmOptions, IpmStatus, PsdEntry};
use crate::error::{Error, Result};
use crate::C64;

/// `maximize tr(C V)` over Hermitian PSD `V` with optional unit diagonal and
/// linear inequalities `tr(A_r V) >= b_r`.
#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub objective: DMatrix<C64>,
    pub unit_diagonal: bool,
    pub inequalities: Vec<(DMatrix<C64>, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    MaxIters,
}

/// Evidence that the inequalities admit no PSD unit-diagonal `V`.
#[derive(Clone, Debug, PartialEq)]
pub struct InfeasibilityCertificate {
    /// Nonnegative multipliers of the inequalities from the max-slack dual.
    pub multipliers: Vec<f64>,
    /// Upper bound on the best achievable normalized slack (negative).
    pub max_slack_bound: f64,
    /// `-max_slack_bound`.
    pub violation: f64,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub v: DMatrix<C64>,
    /// `Re tr(C V)` at the returned `V`.
    pub objective_value: f64,
    /// Dual bound on the optimum.
    pub upper_bound: f64,
    pub status: SdpStatus,
    pub duality_gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    /// Complementarity gap per interior-point iteration (normalized units).
    pub gap_history: Vec<f64>,
    /// Best normalized inequality slack found by the max-slack phase, if it ran.
    pub max_slack: Option<f64>,
    pub certificate: Option<InfeasibilityCertificate>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpOptions {
    pub ipm: IpmOptions,
    /// Max-slack threshold: feasible iff the optimal slack is at least `-feas_tol`.
    pub feas_tol: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions {
            ipm: IpmOptions::default(),
            feas_tol: 1e-7,
        }
    }
}

fn hermitian_part(v: &DMatrix<C64>) -> DMatrix<C64> {
    (v + v.adjoint()).map(|z| z * 0.5)
}

/// `Re tr(A V)`.
pub fn trace_product(a: &DMatrix<C64>, v: &DMatrix<C64>) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * v[(j, i)]).re;
        }
    }
    acc
}

fn max_abs(a: &DMatrix<C64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn check_hermitian(a: &DMatrix<C64>, n: usize, what: &str) -> Result<()> {
    if a.shape() != (n, n) {
        return Err(Error::domain(format!("{what} is {:?}, expected {n}x{n}", a.shape())));
    }
    let dev = (a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if dev > 1e-12 * (1.0 + max_abs(a)) {
        return Err(Error::domain(format!("{what} is not Hermitian (deviation {dev:.2e})")));
    }
    Ok(())
}

/// Normalized inequality rows `(A_r, tr A_r, b_r)` scaled to unit magnitude.
struct Rows {
    mats: Vec<DMatrix<C64>>,
    traces: Vec<f64>,
    rhs: Vec<f64>,
}

fn normalized_rows(p: &SdpProblem) -> Rows {
    let mut rows = Rows {
        mats: Vec::new(),
        traces: Vec::new(),
        rhs: Vec::new(),
    };
    for (a, b) in &p.inequalities {
        let scale = max_abs(a).max(b.abs()).max(1e-300);
        let ah = (a + a.adjoint()) * C64::new(0.5 / scale, 0.0);
        rows.traces.push((0..ah.nrows()).map(|i| ah[(i, i)].re).sum());
        rows.mats.push(ah);
        rows.rhs.push(b / scale);
    }
    rows
}

fn diag_columns(n: usize) -> Vec<Column> {
    (0..n)
        .map(|i| Column {
            lin: vec![],
            psd: vec![(0, PsdEntry::hermitian(&[(i, i, C64::new(1.0, 0.0))]))],
        })
        .collect()
}

/// Max-slack program: maximize `τ` s.t. `tr(A_r V) - b_r >= t_low + τ`, `τ >= 0`.
fn max_slack_program(n: usize, unit: bool, rows: &Rows, t_low: f64) -> ConeProgram {
    let r = rows.mats.len();
    let mut g = if unit { diag_columns(n) } else { Vec::new() };
    let mut c = vec![-1.0; g.len()];
    for k in 0..r {
        g.push(Column {
            lin: vec![(k, -1.0), (r, -1.0)],
            psd: vec![(0, PsdEntry::Dense(rows.mats[k].clone()))],
        });
        c.push(-(rows.rhs[k] + t_low));
    }
    let mut h = ConeVec {
        lin: DVector::zeros(r + 1),
        psd: vec![DMatrix::zeros(n, n)],
    };
    h.lin[r] = -1.0;
    ConeProgram {
        dims: ConeDims {
            nonneg: r + 1,
            soc: vec![],
            psd: vec![n],
        },
        c: DVector::from_vec(c),
        g,
        h,
    }
}

/// Outcome of the max-slack phase.
enum Phase1 {
    Feasible { v: DMatrix<C64>, slack: f64, sol: ipm::IpmSolution },
    Infeasible { cert: InfeasibilityCertificate, sol: ipm::IpmSolution },
}

fn phase1(p: &SdpProblem, rows: &Rows, opts: &SdpOptions, stop_early: bool) -> Result<Phase1> {
    let n = p.objective.nrows();
    let r = rows.mats.len();
    // V = I is feasible for the diagonal constraint with slack tr(A_r) - b_r.
    let t_low = (0..r)
        .map(|k| rows.traces[k] - rows.rhs[k])
        .fold(f64::INFINITY, f64::min)
        - 1.0;
    let prog = max_slack_program(n, p.unit_diagonal, rows, t_low);
    let mut io = opts.ipm.clone();
    if stop_early {
        io.early_stop = Some(EarlyStop {
            primal_at_most: -t_low - opts.feas_tol,
            dual_at_least: -t_low,
            feastol: 1e-9,
        });
    }
    let sol = ipm::solve(&prog, &io)?;
    let lower = t_low + sol.dcost;
    let upper = t_low + sol.pcost;
    let dual_ok = sol.dres <= 1e-7;
    let primal_ok = sol.pres <= 1e-7;
    log::debug!(
        "max-slack phase: status {:?}, slack in [{lower:.3e}, {upper:.3e}], {} iterations",
        sol.status,
        sol.iterations
    );
    if primal_ok && upper < -opts.feas_tol {
        let multipliers = sol.x.as_slice()[sol.x.len() - r..].to_vec();
        return Ok(Phase1::Infeasible {
            cert: InfeasibilityCertificate {
                multipliers,
                max_slack_bound: upper,
                violation: -upper,
            },
            sol,
        });
    }
    if dual_ok && lower >= -opts.feas_tol {
        let v = hermitian_part(&sol.z.psd[0]);
        return Ok(Phase1::Feasible { v, slack: lower, sol });
    }
    Err(Error::solver(format!(
        "max-slack SDP undecided after {} iterations ({:?}): slack in [{lower:.3e}, {upper:.3e}], residuals {:.1e}/{:.1e}",
        sol.iterations, sol.status, sol.pres, sol.dres
    )))
}

fn validate(p: &SdpProblem) -> Result<usize> {
    let n = p.objective.nrows();
    if n == 0 {
        return Err(Error::domain("empty SDP"));
    }
    check_hermitian(&p.objective, n, "objective")?;
    for (r, (a, b)) in p.inequalities.iter().enumerate() {
        check_hermitian(a, n, &format!("inequality {r}"))?;
        if !b.is_finite() {
            return Err(Error::domain(format!("inequality {r} has a non-finite bound")));
        }
    }
    if !p.unit_diagonal && p.inequalities.is_empty() {
        return Err(Error::domain("SDP without constraints is unbounded or trivial"));
    }
    Ok(n)
}

fn from_ipm(
    p: &SdpProblem,
    sol: &ipm::IpmSolution,
    cscale: f64,
    max_slack: Option<f64>,
) -> SdpSolution {
    let v = hermitian_part(&sol.z.psd[0]);
    let objective_value = trace_product(&p.objective, &v);
    let gap = sol.gap.max((sol.pcost - sol.dcost).abs()) * cscale;
    let optimal = sol.status == IpmStatus::Optimal
        || (gap <= 1e-6 * (1.0 + objective_value.abs()) && sol.pres <= 1e-7 && sol.dres <= 1e-7);
    SdpSolution {
        v,
        objective_value,
        upper_bound: sol.pcost * cscale,
        status: if optimal {
            SdpStatus::Optimal
        } else {
            SdpStatus::MaxIters
        },
        duality_gap: gap,
        primal_residual: sol.dres,
        dual_residual: sol.pres,
        iterations: sol.iterations,
        gap_history: sol.history.iter().map(|h| h.gap).collect(),
        max_slack,
        certificate: None,
    }
}

/// Solves the SDP; inequality-constrained problems are checked for feasibility first.
pub fn solve_sdp(p: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    let n = validate(p)?;
    let rows = normalized_rows(p);
    let mut max_slack = None;
    let mut phase1_iters = 0;
    if !rows.mats.is_empty() {
        match phase1(p, &rows, opts, false)? {
            Phase1::Infeasible { cert, sol } => {
                let v = hermitian_part(&sol.z.psd[0]);
                return Ok(SdpSolution {
                    objective_value: trace_product(&p.objective, &v),
                    v,
                    upper_bound: f64::NEG_INFINITY,
                    status: SdpStatus::Infeasible,
                    duality_gap: f64::INFINITY,
                    primal_residual: sol.dres,
                    dual_residual: sol.pres,
                    iterations: sol.iterations,
                    gap_history: sol.history.iter().map(|h| h.gap).collect(),
                    max_slack: Some(cert.max_slack_bound),
                    certificate: Some(cert),
                });
            }
            Phase1::Feasible { slack, sol, .. } => {
                max_slack = Some(slack);
                phase1_iters = sol.iterations;
            }
        }
    }

    let cscale = max_abs(&p.objective).max(1e-300);
    let chat = (&p.objective + p.objective.adjoint()) * C64::new(0.5 / cscale, 0.0);
    let r = rows.mats.len();
    let mut g = if p.unit_diagonal { diag_columns(n) } else { Vec::new() };
    let mut c = vec![-1.0; g.len()];
    for k in 0..r {
        g.push(Column {
            lin: vec![(k, -1.0)],
            psd: vec![(0, PsdEntry::Dense(rows.mats[k].clone()))],
        });
        c.push(-rows.rhs[k]);
    }
    let prog = ConeProgram {
        dims: ConeDims {
            nonneg: r,
            soc: vec![],
            psd: vec![n],
        },
        c: DVector::from_vec(c),
        g,
        h: ConeVec {
            lin: DVector::zeros(r),
            psd: vec![-chat],
        },
    };
    let sol = ipm::solve(&prog, &opts.ipm)?;
    log::debug!(
        "SDP n = {n}: {:?} after {} iterations, gap {:.2e}",
        sol.status,
        sol.iterations,
        sol.gap
    );
    let mut out = from_ipm(p, &sol, cscale, max_slack);
    out.iterations += phase1_iters;
    Ok(out)
}

/// Result of a pure feasibility query.
#[derive(Clone, Debug)]
pub enum SdpFeasibility {
    /// A PSD `V` satisfying the constraints, with its normalized slack.
    Feasible { v: DMatrix<C64>, slack: f64 },
    Infeasible(InfeasibilityCertificate),
}

impl SdpFeasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, SdpFeasibility::Feasible { .. })
    }
}

/// Decides whether the constraints of `p` (objective ignored) admit a solution.
///
/// The interior-point run stops as soon as the sign of the optimal slack is certified.
pub fn sdp_constraints_feasible(p: &SdpProblem, opts: &SdpOptions) -> Result<SdpFeasibility> {
    let n = validate(p)?;
    let rows = normalized_rows(p);
    if rows.mats.is_empty() {
        return Ok(SdpFeasibility::Feasible {
            v: DMatrix::identity(n, n),
            slack: f64::INFINITY,
        });
    }
    Ok(match phase1(p, &rows, opts, true)? {
        Phase1::Feasible { v, slack, .. } => SdpFeasibility::Feasible { v, slack },
        Phase1::Infeasible { cert, .. } => SdpFeasibility::Infeasible(cert),
    })
}

/// Inequalities of the multi-user phase feasibility problem at target `xi_bar`:
/// `tr(Ω_kk V) + |ū_kk|² >= ξ̄ (Σ_{j≠k} tr(Ω_kj V) + Σ_{j≠k} |ū_kj|² + 1)`.
pub fn sinr_inequalities(
    omega_kj: &[Vec<DMatrix<C64>>],
    ubar: &[Vec<C64>],
    xi_bar: f64,
) -> Vec<(DMatrix<C64>, f64)> {
    let k_users = omega_kj.len();
    (0..k_users)
        .map(|k| {
            let mut a = omega_kj[k][k].clone();
            let mut b = 1.0;
            for j in 0..k_users {
                if j != k {
                    a -= &omega_kj[k][j] * C64::new(xi_bar, 0.0);
                    b += ubar[k][j].norm_sqr();
                }
            }
            (a, xi_bar * b - ubar[k][k].norm_sqr())
        })
        .collect()
}

/// Feasibility of the multi-user phase problem at `xi_bar` for an assembly built with a beamformer.
pub fn sdp_feasibility(
    assembly: &crate::model::SdrAssembly,
    xi_bar: f64,
    opts: &SdpOptions,
) -> Result<SdpFeasibility> {
    let (om, ub) = match (&assembly.omega_kj, &assembly.ubar) {
        (Some(o), Some(u)) => (o, u),
        _ => return Err(Error::domain("assembly lacks the beamformer-dependent terms")),
    };
    if !(xi_bar >= 0.0) {
        return Err(Error::domain("target SINR must be nonnegative"));
    }
    let n = assembly.num_phases() + 1;
    let p = SdpProblem {
        objective: DMatrix::zeros(n, n),
        unit_diagonal: true,
        inequalities: sinr_inequalities(om, ub, xi_bar),
    };
    sdp_constraints_feasible(&p, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<C64> {
        let a = DMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        (&a + a.adjoint()) * C64::new(0.5, 0.0)
    }

    #[test]
    fn identity_objective_is_constant() {
        let n = 5;
        let p = SdpProblem {
            objective: DMatrix::identity(n, n),
            unit_diagonal: true,
            inequalities: vec![],
        };
        let s = solve_sdp(&p, &SdpOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!((s.objective_value - n as f64).abs() < 1e-7);
    }

    #[test]
    fn all_ones_objective() {
        let n = 4;
        let p = SdpProblem {
            objective: DMatrix::from_element(n, n, C64::new(1.0, 0.0)),
            unit_diagonal: true,
            inequalities: vec![],
        };
        let s = solve_sdp(&p, &SdpOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!((s.objective_value - 16.0).abs() < 1e-6, "{}", s.objective_value);
        for z in s.v.iter() {
            assert!((z - C64::new(1.0, 0.0)).norm() < 1e-4);
        }
    }

    #[test]
    fn trace_product_matches_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = random_hermitian(&mut rng, 4);
        let b = DMatrix::from_fn(4, 4, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let v = &b * b.adjoint();
        let lhs = c.dotc(&v).re;
        assert!((lhs - trace_product(&c, &v)).abs() < 1e-12);
        assert!((hermitian_part(&v) - &v).iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn random_instance_is_optimal_with_monotone_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let c = random_hermitian(&mut rng, 6);
            let s = solve_sdp(
                &SdpProblem {
                    objective: c.clone(),
                    unit_diagonal: true,
                    inequalities: vec![],
                },
                &SdpOptions::default(),
            )
            .unwrap();
            assert_eq!(s.status, SdpStatus::Optimal);
            assert!(s.duality_gap <= 1e-6 * (1.0 + s.objective_value.abs()));
            for i in 0..6 {
                assert!((s.v[(i, i)].re - 1.0).abs() < 1e-7);
            }
            let ev = s.v.clone().symmetric_eigenvalues();
            assert!(ev.iter().all(|&e| e >= -1e-7));
            for w in s.gap_history.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn inequality_feasibility() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 4;
        let a = random_hermitian(&mut rng, n);
        // tr(A V) <= Σ|A_ij| under unit diagonal, so a larger bound is infeasible.
        let bound: f64 = a.iter().map(|z| z.norm()).sum();
        let infeasible = SdpProblem {
            objective: DMatrix::zeros(n, n),
            unit_diagonal: true,
            inequalities: vec![(a.clone(), bound + 1.0)],
        };
        let f = sdp_constraints_feasible(&infeasible, &SdpOptions::default()).unwrap();
        let SdpFeasibility::Infeasible(cert) = f else {
            panic!("expected infeasible")
        };
        assert!(cert.violation > 1e-7);
        assert!(cert.multipliers.iter().all(|&m| m >= -1e-12));
        let s = solve_sdp(&infeasible, &SdpOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Infeasible);

        let feasible = SdpProblem {
            objective: DMatrix::zeros(n, n),
            unit_diagonal: true,
            inequalities: vec![(a.clone(), trace_product(&a, &DMatrix::identity(n, n)) - 0.5)],
        };
        let f = sdp_constraints_feasible(&feasible, &SdpOptions::default()).unwrap();
        let SdpFeasibility::Feasible { v, .. } = f else {
            panic!("expected feasible")
        };
        assert!(trace_product(&a, &v) >= trace_product(&a, &DMatrix::identity(n, n)) - 0.5 - 1e-6);
    }

    #[test]
    fn constrained_objective() {
        // maximize Re V_12 subject to Re V_12 <= 0.3 (i.e. tr(A V) >= -0.3 with A = -E_12 sym).
        let n = 2;
        let mut c = DMatrix::zeros(n, n);
        c[(0, 1)] = C64::new(0.5, 0.0);
        c[(1, 0)] = C64::new(0.5, 0.0);
        let a = -c.clone();
        let p = SdpProblem {
            objective: c,
            unit_diagonal: true,
            inequalities: vec![(a, -0.3)],
        };
        let s = solve_sdp(&p, &SdpOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Optimal);
        assert!((s.objective_value - 0.3).abs() < 1e-6, "{}", s.objective_value);
    }
}
