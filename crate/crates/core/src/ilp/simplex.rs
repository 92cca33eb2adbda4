//! Dense bounded-variable revised simplex for
//!
//! ```text
//! maximize c^T x  s.t.  A x = b,  l <= x <= u   (finite bounds)
//! ```
//!
//! Phase 1 drives artificial variables out of an all-artificial basis; phase 2
//! optimizes with Dantzig pricing, falling back to Bland's rule after a run of
//! degenerate pivots. The basis inverse is kept explicitly and refactored
//! periodically.

use nalgebra::{DMatrix, DVector};

const FEAS_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;
const DEGENERATE_RUN: usize = 20;

#[derive(Clone, Debug)]
pub struct LpProblem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    /// The pivot budget ran out; the LP bound is not trustworthy.
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum State {
    Basic,
    AtLower,
    AtUpper,
}

struct Tableau<'a> {
    a: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    m: usize,
    /// Structural count; artificial `i` is column `n + i` with entry `sign[i]` in row `i`.
    n: usize,
    sign: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    binv: DMatrix<f64>,
    pivots: usize,
}

impl<'a> Tableau<'a> {
    fn column(&self, j: usize) -> DVector<f64> {
        if j < self.n {
            self.a.column(j).into_owned()
        } else {
            let mut e = DVector::zeros(self.m);
            e[j - self.n] = self.sign[j - self.n];
            e
        }
    }

    fn refactor(&mut self) -> bool {
        let mut bm = DMatrix::zeros(self.m, self.m);
        for (i, &j) in self.basis.iter().enumerate() {
            bm.set_column(i, &self.column(j));
        }
        let Some(inv) = bm.lu().try_inverse() else {
            return false;
        };
        self.binv = inv;
        // x_B = B^{-1} (b - N x_N)
        let mut r = self.b.clone();
        for j in 0..self.n + self.m {
            if self.state[j] != State::Basic && self.x[j] != 0.0 {
                r -= self.column(j) * self.x[j];
            }
        }
        let xb = &self.binv * r;
        for (i, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[i];
        }
        true
    }

    /// Runs simplex iterations for objective `c` (length `n + m`). Returns false on iteration limit.
    fn optimize(&mut self, c: &[f64], max_pivots: usize) -> bool {
        let total = self.n + self.m;
        let mut degenerate = 0usize;
        let mut since_refactor = 0usize;
        loop {
            if self.pivots >= max_pivots {
                return false;
            }
            let cb = DVector::from_iterator(self.m, self.basis.iter().map(|&j| c[j]));
            let y = self.binv.tr_mul(&cb);
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..total {
                if self.state[j] == State::Basic || self.upper[j] - self.lower[j] <= 0.0 {
                    continue;
                }
                let dj = c[j]
                    - if j < self.n {
                        self.a.column(j).dot(&y)
                    } else {
                        self.sign[j - self.n] * y[j - self.n]
                    };
                let improving = (self.state[j] == State::AtLower && dj > OPT_TOL)
                    || (self.state[j] == State::AtUpper && dj < -OPT_TOL);
                if !improving {
                    continue;
                }
                if bland {
                    enter = Some((j, dj));
                    break;
                }
                if enter.is_none_or(|(_, best)| dj.abs() > best.abs()) {
                    enter = Some((j, dj));
                }
            }
            let Some((j, _)) = enter else {
                return true;
            };
            let dir = if self.state[j] == State::AtLower { 1.0 } else { -1.0 };
            let alpha = &self.binv * self.column(j);

            // Ratio test: x_B(θ) = x_B - θ·dir·α.
            let mut theta = self.upper[j] - self.lower[j];
            let mut leave: Option<usize> = None;
            for i in 0..self.m {
                let d = dir * alpha[i];
                let bj = self.basis[i];
                let t = if d > PIVOT_TOL {
                    (self.x[bj] - self.lower[bj]).max(0.0) / d
                } else if d < -PIVOT_TOL {
                    (self.upper[bj] - self.x[bj]).max(0.0) / -d
                } else {
                    continue;
                };
                let better = match leave {
                    None => t < theta,
                    Some(li) => {
                        if t < theta - 1e-12 {
                            true
                        } else if t <= theta + 1e-12 {
                            if bland {
                                bj < self.basis[li]
                            } else {
                                alpha[i].abs() > alpha[li].abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    theta = t.min(theta);
                    leave = Some(i);
                }
            }
            if !theta.is_finite() {
                return false;
            }

            for i in 0..self.m {
                let bj = self.basis[i];
                self.x[bj] -= theta * dir * alpha[i];
            }
            self.pivots += 1;
            if theta <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            match leave {
                None => {
                    // Bound flip.
                    self.state[j] = if dir > 0.0 { State::AtUpper } else { State::AtLower };
                    self.x[j] = if dir > 0.0 { self.upper[j] } else { self.lower[j] };
                }
                Some(r) => {
                    let out = self.basis[r];
                    self.x[j] += dir * theta;
                    let d = dir * alpha[r];
                    if d > 0.0 {
                        self.state[out] = State::AtLower;
                        self.x[out] = self.lower[out];
                    } else {
                        self.state[out] = State::AtUpper;
                        self.x[out] = self.upper[out];
                    }
                    self.state[j] = State::Basic;
                    self.basis[r] = j;
                    // Eta update of B^{-1}.
                    let piv = alpha[r];
                    let row_r = self.binv.row(r) / piv;
                    for i in 0..self.m {
                        if i != r && alpha[i] != 0.0 {
                            let f = alpha[i];
                            for col in 0..self.m {
                                self.binv[(i, col)] -= f * row_r[col];
                            }
                        }
                    }
                    self.binv.set_row(r, &row_r);
                    since_refactor += 1;
                    if since_refactor >= REFACTOR_EVERY {
                        since_refactor = 0;
                        if !self.refactor() {
                            return false;
                        }
                    }
                }
            }
        }
    }
}

/// Solves the LP; the pivot budget defaults to `50 (m + n)`.
pub fn solve_lp(p: &LpProblem) -> LpSolution {
    let (m, n) = p.a.shape();
    debug_assert_eq!(p.b.len(), m);
    debug_assert_eq!(p.c.len(), n);
    if p.lower.iter().zip(&p.upper).any(|(l, u)| l > &(u + FEAS_TOL)) {
        return LpSolution {
            status: LpStatus::Infeasible,
            x: p.lower.clone(),
            objective: f64::NEG_INFINITY,
            pivots: 0,
        };
    }
    let mut x = p.lower.clone();
    x.extend(std::iter::repeat_n(0.0, m));
    let mut r = p.b.clone();
    for j in 0..n {
        if x[j] != 0.0 {
            r -= p.a.column(j) * x[j];
        }
    }
    let sign: Vec<f64> = r.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    for i in 0..m {
        x[n + i] = r[i].abs();
    }
    let mut lower = p.lower.clone();
    let mut upper = p.upper.clone();
    lower.extend(std::iter::repeat_n(0.0, m));
    upper.extend(std::iter::repeat_n(f64::INFINITY, m));
    let mut state = vec![State::AtLower; n];
    state.extend(std::iter::repeat_n(State::Basic, m));
    let mut t = Tableau {
        a: &p.a,
        b: &p.b,
        m,
        n,
        binv: DMatrix::from_diagonal(&DVector::from_vec(sign.clone())),
        sign,
        lower,
        upper,
        x,
        state,
        basis: (n..n + m).collect(),
        pivots: 0,
    };
    let budget = 50 * (m + n) + 1000;

    let mut c1 = vec![0.0; n + m];
    for v in c1.iter_mut().skip(n) {
        *v = -1.0;
    }
    if !t.optimize(&c1, budget) {
        return limit(p, &t);
    }
    let infeas: f64 = (0..m).map(|i| t.x[n + i]).sum();
    if infeas > 1e-7 * (1.0 + p.b.amax()) {
        return LpSolution {
            status: LpStatus::Infeasible,
            x: t.x[..n].to_vec(),
            objective: f64::NEG_INFINITY,
            pivots: t.pivots,
        };
    }
    for i in 0..m {
        t.upper[n + i] = 0.0;
        if t.state[n + i] != State::Basic {
            t.state[n + i] = State::AtLower;
            t.x[n + i] = 0.0;
        }
    }
    let mut c2 = p.c.as_slice().to_vec();
    c2.extend(std::iter::repeat_n(0.0, m));
    if !t.optimize(&c2, budget) {
        return limit(p, &t);
    }
    if !t.refactor() {
        return limit(p, &t);
    }
    let x: Vec<f64> = (0..n).map(|j| t.x[j].clamp(p.lower[j], p.upper[j])).collect();
    let objective = p.c.iter().zip(&x).map(|(a, b)| a * b).sum();
    LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        pivots: t.pivots,
    }
}

fn limit(p: &LpProblem, t: &Tableau) -> LpSolution {
    LpSolution {
        status: LpStatus::IterationLimit,
        x: t.x[..p.c.len()].to_vec(),
        objective: f64::NAN,
        pivots: t.pivots,
    }
}
