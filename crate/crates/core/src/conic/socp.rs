//! SOCP feasibility oracle for the per-AP power constrained SINR targets
//!
//! ```text
//! ḡ_k^H w_k >= √ξ ‖[ḡ_k^H W_{-k}, 1]‖   for every user k
//! ‖w̄_m‖ <= √P                           for every AP m
//! ```
//!
//! posed as the max-slack program `max t` with `Re(ḡ_k^H w_k)/c_k - t` in the
//! head of each user cone. Only the real part enters the cone: any `W` that
//! satisfies the relaxed cone also satisfies the SINR target, and a phase
//! rotation of each column makes `ḡ_k^H w_k` real, so both are equivalent.

use nalgebra::{DMatrix, DVector};

use super::ipm::{self, Column, ConeDims, ConeProgram, ConeVec, EarlyStop, IpmOptions};
use crate::error::{Error, Result};
use crate::model::BeamMatrix;
use crate::C64;

#[derive(Clone, Debug)]
pub struct SocpFeasibilityProblem {
    /// `K × M`, row `k` is `ḡ_k^H`.
    pub effective: DMatrix<C64>,
    pub xi: f64,
    pub p: f64,
}

#[derive(Clone, Debug)]
pub enum SocpOutcome {
    /// A beamformer meeting every target; `margin` is the smallest
    /// `|ḡ_k^H w_k| - √ξ ‖[ḡ_k^H W_{-k}, 1]‖` in absolute units.
    Feasible { w: BeamMatrix, margin: f64 },
    /// No beamformer exists; `slack_bound` is an upper bound on the normalized max slack.
    Infeasible { slack_bound: f64 },
}

impl SocpOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, SocpOutcome::Feasible { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SocpOptions {
    pub ipm: IpmOptions,
    /// Feasible iff the optimal normalized slack is at least `-feas_tol`.
    pub feas_tol: f64,
}

impl Default for SocpOptions {
    fn default() -> Self {
        SocpOptions {
            ipm: IpmOptions::default(),
            feas_tol: 1e-7,
        }
    }
}

fn validate(p: &SocpFeasibilityProblem) -> Result<()> {
    if !(p.xi >= 0.0 && p.xi.is_finite()) {
        return Err(Error::domain(format!("SINR target {} must be finite and nonnegative", p.xi)));
    }
    if !(p.p > 0.0 && p.p.is_finite()) {
        return Err(Error::domain("power budget must be positive"));
    }
    if p.effective.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::domain("non-finite channel entry"));
    }
    Ok(())
}

/// Builds the max-slack program over `x = [Re W̃, Im W̃, t]` with `W = √P W̃`.
fn program(p: &SocpFeasibilityProblem) -> ConeProgram {
    let (k_users, m) = p.effective.shape();
    let mk = m * k_users;
    let n = 2 * mk + 1;
    let t_idx = 2 * mk;
    let sp = p.p.sqrt();
    let sx = p.xi.sqrt();
    let re = |mi: usize, j: usize| j * m + mi;
    let im = |mi: usize, j: usize| mk + j * m + mi;

    let user_dim = 2 * k_users;
    let power_dim = 2 * k_users + 1;
    let mut g: Vec<Column> = vec![Column::default(); n];
    let mut h = DVector::zeros(k_users * user_dim + m * power_dim);

    for k in 0..k_users {
        let hk: Vec<C64> = p.effective.row(k).iter().map(|z| z * sp).collect();
        let hn = hk.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let ck = hn.max(1e-6) * sx.max(1.0);
        let base = k * user_dim;
        // Re(h_k w̃_j) = Σ_m (hr Re w̃ - hi Im w̃), Im(h_k w̃_j) = Σ_m (hr Im w̃ + hi Re w̃).
        let mut row = base + 1;
        for j in 0..k_users {
            let (r_re, r_im, f) = if j == k {
                (base, usize::MAX, 1.0 / ck)
            } else {
                let r = (row, row + 1, sx / ck);
                row += 2;
                r
            };
            for (mi, z) in hk.iter().enumerate() {
                g[re(mi, j)].lin.push((r_re, -f * z.re));
                g[im(mi, j)].lin.push((r_re, f * z.im));
                if r_im != usize::MAX {
                    g[im(mi, j)].lin.push((r_im, -f * z.re));
                    g[re(mi, j)].lin.push((r_im, -f * z.im));
                }
            }
        }
        g[t_idx].lin.push((base, 1.0));
        h[base + user_dim - 1] = sx / ck;
    }
    let pbase = k_users * user_dim;
    for mi in 0..m {
        let base = pbase + mi * power_dim;
        h[base] = 1.0;
        for j in 0..k_users {
            g[re(mi, j)].lin.push((base + 1 + 2 * j, -1.0));
            g[im(mi, j)].lin.push((base + 2 + 2 * j, -1.0));
        }
    }
    let mut c = DVector::zeros(n);
    c[t_idx] = -1.0;
    ConeProgram {
        dims: ConeDims {
            nonneg: 0,
            soc: [vec![user_dim; k_users], vec![power_dim; m]].concat(),
            psd: vec![],
        },
        c,
        g,
        h: ConeVec {
            lin: h,
            psd: vec![],
        },
    }
}

/// `min_k |ḡ_k^H w_k| - √ξ ‖[ḡ_k^H W_{-k}, 1]‖`.
pub fn sinr_margin(effective: &DMatrix<C64>, w: &BeamMatrix, xi: f64) -> f64 {
    let a = effective * &w.w;
    let k_users = a.nrows();
    (0..k_users)
        .map(|k| {
            let interf: f64 = (0..k_users).filter(|&j| j != k).map(|j| a[(k, j)].norm_sqr()).sum();
            a[(k, k)].norm() - xi.sqrt() * (interf + 1.0).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

/// Recovers `W` from the solution, rotates each column so `ḡ_k^H w_k` is real
/// nonnegative and pulls rows back onto the power budget.
fn beamformer(p: &SocpFeasibilityProblem, x: &DVector<f64>) -> BeamMatrix {
    let (k_users, m) = p.effective.shape();
    let mk = m * k_users;
    let sp = p.p.sqrt();
    let mut w = DMatrix::from_fn(m, k_users, |mi, j| C64::new(x[j * m + mi], x[mk + j * m + mi]) * sp);
    for k in 0..k_users {
        let a: C64 = (0..m).map(|mi| p.effective[(k, mi)] * w[(mi, k)]).sum();
        if a.norm() > 0.0 {
            let rot = a.conj() / a.norm();
            for mi in 0..m {
                w[(mi, k)] *= rot;
            }
        }
    }
    for mi in 0..m {
        let pw: f64 = w.row(mi).iter().map(|z| z.norm_sqr()).sum();
        if pw > p.p {
            let f = (p.p / pw).sqrt();
            for j in 0..k_users {
                w[(mi, j)] *= f;
            }
        }
    }
    BeamMatrix::new(w)
}

/// Decides feasibility of the SINR target `ξ`; stops as soon as the sign of the max slack is certified.
pub fn socp_feasibility(p: &SocpFeasibilityProblem, opts: &SocpOptions) -> Result<SocpOutcome> {
    validate(p)?;
    let (k_users, m) = p.effective.shape();
    if p.xi == 0.0 {
        return Ok(SocpOutcome::Feasible {
            w: BeamMatrix::zeros(m, k_users),
            margin: 0.0,
        });
    }
    let prog = program(p);
    let mut io = opts.ipm.clone();
    io.early_stop = Some(EarlyStop {
        primal_at_most: 0.0,
        dual_at_least: opts.feas_tol,
        feastol: 1e-10,
    });
    let sol = ipm::solve(&prog, &io)?;
    let t_lower = -sol.pcost;
    let t_upper = -sol.dcost;
    if sol.pres <= 1e-9 && t_lower >= -opts.feas_tol {
        let w = beamformer(p, &sol.x);
        let margin = sinr_margin(&p.effective, &w, p.xi);
        return Ok(SocpOutcome::Feasible { w, margin });
    }
    if sol.dres <= 1e-9 && t_upper < -opts.feas_tol {
        return Ok(SocpOutcome::Infeasible {
            slack_bound: t_upper,
        });
    }
    Err(Error::solver(format!(
        "SOCP feasibility undecided at xi = {:.6e} ({:?}, {} iterations): slack in [{t_lower:.3e}, {t_upper:.3e}]",
        p.xi, sol.status, sol.iterations
    )))
}

/// Solves the max-slack program to optimality and returns the beamformer and its normalized slack.
pub fn socp_max_slack(p: &SocpFeasibilityProblem, opts: &SocpOptions) -> Result<(BeamMatrix, f64)> {
    validate(p)?;
    let prog = program(p);
    let mut io = opts.ipm.clone();
    io.early_stop = None;
    let sol = ipm::solve(&prog, &io)?;
    if sol.pres > 1e-7 {
        return Err(Error::solver(format!(
            "max-slack SOCP ended with primal residual {:.2e} ({:?})",
            sol.pres, sol.status
        )));
    }
    Ok((beamformer(p, &sol.x), -sol.pcost))
}
