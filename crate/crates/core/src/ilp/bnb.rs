//! Best-bound branch-and-bound over the SOS1 groups of a [`BilpProblem`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use super::bilp::BilpProblem;
use super::simplex::{solve_lp, LpStatus};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct BilpOptions {
    pub node_limit: usize,
    /// Problems with more LP columns than this skip the tree search and return
    /// the local-search incumbent with a trivial bound and `NodeLimit` status.
    pub max_lp_vars: usize,
    pub int_tol: f64,
    /// Starting assignment (level per phase); all zeros when absent.
    pub incumbent: Option<Vec<usize>>,
    pub record_nodes: bool,
}

impl Default for BilpOptions {
    fn default() -> Self {
        BilpOptions {
            node_limit: 1_000_000,
            max_lp_vars: 200,
            int_tol: 1e-7,
            incumbent: None,
            record_nodes: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BilpStatus {
    Optimal,
    NodeLimit,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeRecord {
    pub id: usize,
    /// LP bound of the node (`-inf` when infeasible).
    pub bound: f64,
    /// Incumbent after processing the node.
    pub incumbent: f64,
}

#[derive(Clone, Debug)]
pub struct BilpSolution {
    /// Level index per phase.
    pub levels: Vec<usize>,
    pub objective_value: f64,
    pub status: BilpStatus,
    pub explored_nodes: usize,
    pub best_bound: f64,
    pub nodes: Vec<NodeRecord>,
}

impl BilpSolution {
    pub fn gap(&self) -> f64 {
        self.best_bound - self.objective_value
    }

    /// Writes the node log as `node,bound,incumbent` CSV.
    pub fn write_node_log<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node", "bound", "incumbent"])?;
        for n in &self.nodes {
            w.write_record([n.id.to_string(), n.bound.to_string(), n.incumbent.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Variable fixings: `upper[j] = 0` forbids a level, `lower[j] = 1` forces a wrap flag.
#[derive(Clone)]
struct Node {
    parent_bound: f64,
    depth: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Node {
    fn cmp(&self, o: &Self) -> Ordering {
        // Higher bound first, then deeper (dives toward leaves on ties).
        self.parent_bound
            .total_cmp(&o.parent_bound)
            .then(self.depth.cmp(&o.depth))
    }
}

struct Incumbent {
    levels: Vec<usize>,
    value: f64,
}

impl Incumbent {
    fn offer(&mut self, p: &BilpProblem, mut levels: Vec<usize>) -> Result<()> {
        p.one_opt(&mut levels);
        let v = p.objective(&levels)?;
        if v > self.value {
            self.value = v;
            self.levels = levels;
        }
        Ok(())
    }
}

/// `Σ Ψ_ii + 2 Σ_{i1<i2} |Ψ_{i1 i2}| + 2 Σ |Ξ_i|`, valid for every assignment.
pub fn trivial_bound(p: &BilpProblem) -> f64 {
    let pairs: f64 = p.pairs.iter().map(|&(a, b)| 2.0 * p.psi[(a, b)].norm()).sum();
    let lin: f64 = p.xi.iter().map(|x| 2.0 * x.norm()).sum();
    p.constant + pairs + lin
}

fn argmax_levels(p: &BilpProblem, x: &[f64]) -> Vec<usize> {
    (0..p.num_phases)
        .map(|i| {
            let g = &x[p.z_index(i, 0)..p.z_index(i, 0) + p.levels];
            let mut best = 0;
            for q in 1..p.levels {
                if g[q] > g[best] {
                    best = q;
                }
            }
            best
        })
        .collect()
}

pub fn solve_bilp(p: &BilpProblem, opts: &BilpOptions) -> Result<BilpSolution> {
    // Pruning and simplex tolerances are absolute, so work on unit-sized coefficients.
    let scale = p
        .z_coef
        .iter()
        .chain(&p.zbar_coef)
        .chain(std::iter::once(&p.constant))
        .fold(0.0f64, |a, c| a.max(c.abs()));
    if !(scale > 0.0 && scale.is_finite()) || scale == 1.0 {
        return solve_unit(p, opts);
    }
    let mut sol = solve_unit(&p.scaled(1.0 / scale), opts)?;
    sol.objective_value = p.objective(&sol.levels)?;
    sol.best_bound *= scale;
    for n in &mut sol.nodes {
        n.bound *= scale;
        n.incumbent *= scale;
    }
    Ok(sol)
}

fn solve_unit(p: &BilpProblem, opts: &BilpOptions) -> Result<BilpSolution> {
    let seed = match &opts.incumbent {
        Some(l) => l.clone(),
        None => vec![0; p.num_phases],
    };
    let mut inc = Incumbent {
        value: p.objective(&seed)?,
        levels: seed.clone(),
    };
    inc.offer(p, seed)?;

    if p.levels == 1 || p.num_phases == 0 {
        return Ok(BilpSolution {
            levels: inc.levels,
            objective_value: inc.value,
            status: BilpStatus::Optimal,
            explored_nodes: 0,
            best_bound: inc.value,
            nodes: vec![],
        });
    }
    if p.num_vars() > opts.max_lp_vars {
        log::debug!(
            "BILP with {} columns exceeds the tree-search limit {}; returning the local-search incumbent",
            p.num_vars(),
            opts.max_lp_vars
        );
        return Ok(BilpSolution {
            levels: inc.levels,
            objective_value: inc.value,
            status: BilpStatus::NodeLimit,
            explored_nodes: 0,
            best_bound: trivial_bound(p).max(inc.value),
            nodes: vec![],
        });
    }

    let mut lp = p.lp_relaxation();
    let n = p.num_vars();
    let b = p.levels;
    let groups = p.num_phases + p.num_pairs();
    let tol = opts.int_tol;
    let prune_tol = |v: f64| 1e-10 * (1.0 + v.abs());

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        parent_bound: f64::INFINITY,
        depth: 0,
        lower: vec![0.0; n],
        upper: vec![1.0; n],
    });
    let mut explored = 0usize;
    let mut nodes = Vec::new();
    let mut limit_bound = f64::NEG_INFINITY;

    while let Some(node) = heap.pop() {
        if node.parent_bound <= inc.value + prune_tol(inc.value) {
            continue;
        }
        if explored >= opts.node_limit {
            limit_bound = node.parent_bound;
            heap.push(node);
            break;
        }
        explored += 1;
        lp.lower.clone_from(&node.lower);
        lp.upper.clone_from(&node.upper);
        let sol = solve_lp(&lp);
        let bound = match sol.status {
            LpStatus::Infeasible => f64::NEG_INFINITY,
            LpStatus::Optimal => (sol.objective + p.constant).min(node.parent_bound),
            LpStatus::IterationLimit => {
                return Err(Error::solver(format!("LP relaxation hit its pivot limit at node {explored}")));
            }
        };
        if bound.is_finite() {
            inc.offer(p, argmax_levels(p, &sol.x))?;
        }
        if opts.record_nodes {
            nodes.push(NodeRecord {
                id: explored,
                bound,
                incumbent: inc.value,
            });
        }
        if bound <= inc.value + prune_tol(inc.value) {
            continue;
        }
        let x = &sol.x;

        // SOS1 group with the most fractional mass.
        let mut pick: Option<(usize, f64)> = None;
        for g in 0..groups {
            let vals = &x[g * b..(g + 1) * b];
            let mx = vals.iter().cloned().fold(0.0, f64::max);
            let mass = 1.0 - mx;
            if mass > tol && pick.is_none_or(|(_, m)| mass > m) {
                pick = Some((g, mass));
            }
        }
        if let Some((g, _)) = pick {
            let allowed: Vec<usize> = (0..b).filter(|&q| node.upper[g * b + q] > 0.5).collect();
            // Split so that the LP mass is divided: order allowed levels, cut at half the mass.
            let total: f64 = allowed.iter().map(|&q| x[g * b + q]).sum();
            let mut acc = 0.0;
            let mut cut = 1;
            for (k, &q) in allowed.iter().enumerate().take(allowed.len() - 1) {
                acc += x[g * b + q];
                cut = k + 1;
                if acc >= 0.5 * total {
                    break;
                }
            }
            for part in [&allowed[..cut], &allowed[cut..]] {
                let mut child = Node {
                    parent_bound: bound,
                    depth: node.depth + 1,
                    lower: node.lower.clone(),
                    upper: node.upper.clone(),
                };
                for &q in &allowed {
                    if !part.contains(&q) {
                        child.upper[g * b + q] = 0.0;
                    }
                }
                heap.push(child);
            }
            continue;
        }
        // All SOS1 groups integral; branch on a fractional wrap flag if any.
        let frac = (0..p.num_pairs()).map(|q| p.ztilde_index(q)).find(|&j| x[j] > tol && x[j] < 1.0 - tol);
        if let Some(j) = frac {
            for v in [0.0, 1.0] {
                let mut child = Node {
                    parent_bound: bound,
                    depth: node.depth + 1,
                    lower: node.lower.clone(),
                    upper: node.upper.clone(),
                };
                child.lower[j] = v;
                child.upper[j] = v;
                heap.push(child);
            }
            continue;
        }
        // Integral vertex: its value was already offered through argmax_levels.
    }

    let open_bound = heap
        .iter()
        .map(|n| n.parent_bound)
        .fold(limit_bound, f64::max);
    let status = if open_bound > inc.value + prune_tol(inc.value) {
        BilpStatus::NodeLimit
    } else {
        BilpStatus::Optimal
    };
    Ok(BilpSolution {
        best_bound: open_bound.max(inc.value),
        levels: inc.levels,
        objective_value: inc.value,
        status,
        explored_nodes: explored,
        nodes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ilp::bilp::build_bilp;
    use crate::C64;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_psi_xi(rng: &mut ChaCha8Rng, n: usize) -> (DMatrix<C64>, Vec<C64>) {
        let phi = DMatrix::from_fn(n, n + 1, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let g = DVector::from_fn(n + 1, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let psi = &phi * phi.adjoint();
        let xi = (&phi * g).iter().cloned().collect();
        (psi, xi)
    }

    /// Exhaustive maximum of the quadratic form over all `B^I` level vectors.
    fn enumerate(p: &BilpProblem) -> f64 {
        let total = p.levels.pow(p.num_phases as u32);
        (0..total)
            .map(|mut code| {
                let lv: Vec<usize> = (0..p.num_phases)
                    .map(|_| {
                        let q = code % p.levels;
                        code /= p.levels;
                        q
                    })
                    .collect();
                p.quadratic_objective(&lv).unwrap()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn single_level_is_its_only_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (psi, xi) = random_psi_xi(&mut rng, 3);
        let p = build_bilp(&psi, &xi, 0).unwrap();
        let s = solve_bilp(&p, &BilpOptions::default()).unwrap();
        assert_eq!(s.levels, vec![0, 0, 0]);
        assert_eq!(s.status, BilpStatus::Optimal);
    }

    #[test]
    fn matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (n, bits) in [(3, 2), (4, 1), (2, 2), (5, 1), (3, 1), (4, 2)] {
            for _ in 0..5 {
                let (psi, xi) = random_psi_xi(&mut rng, n);
                let p = build_bilp(&psi, &xi, bits).unwrap();
                let s = solve_bilp(
                    &p,
                    &BilpOptions {
                        record_nodes: true,
                        ..Default::default()
                    },
                )
                .unwrap();
                let best = enumerate(&p);
                assert_eq!(s.status, BilpStatus::Optimal);
                assert!((s.objective_value - best).abs() < 1e-9 * (1.0 + best.abs()), "{} vs {best}", s.objective_value);
                assert!(s.gap() <= 1e-6 * (1.0 + s.objective_value.abs()));
                let x = p.assignment(&s.levels).unwrap();
                let (sos, link) = p.constraint_residuals(&x);
                assert!(sos == 0.0 && link < 1e-9);
            }
        }
    }

    #[test]
    fn tiny_coefficients_match_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (n, bits) in [(3, 2), (4, 2), (4, 1)] {
            for _ in 0..5 {
                let (psi, xi) = random_psi_xi(&mut rng, n);
                let s = 1e-10;
                let p = build_bilp(&psi.map(|z| z * s), &xi.iter().map(|z| z * s).collect::<Vec<_>>(), bits).unwrap();
                let sol = solve_bilp(&p, &BilpOptions::default()).unwrap();
                let best = enumerate(&p);
                assert!((sol.objective_value - best).abs() < 1e-9 * best.abs(), "{} vs {best}", sol.objective_value);
                assert!(sol.best_bound >= best * (1.0 - 1e-9));
            }
        }
    }

    #[test]
    fn positive_real_data_prefers_zero_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=4 {
            let psi = DMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>(), 0.0));
            let psi = (&psi + psi.transpose()) * C64::new(0.5, 0.0);
            let xi: Vec<C64> = (0..n).map(|_| C64::new(rng.random::<f64>() + 0.1, 0.0)).collect();
            let p = build_bilp(&psi, &xi, 1).unwrap();
            let s = solve_bilp(&p, &BilpOptions::default()).unwrap();
            assert!(s.levels.iter().all(|&q| q == 0));
            assert!((s.objective_value - enumerate(&p)).abs() < 1e-12);
        }
    }

    #[test]
    fn tree_search_beats_weak_seed_and_logs_nodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (psi, xi) = random_psi_xi(&mut rng, 4);
        let p = build_bilp(&psi, &xi, 2).unwrap();
        let s = solve_bilp(
            &p,
            &BilpOptions {
                record_nodes: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(s.explored_nodes >= 1);
        assert_eq!(s.nodes.len(), s.explored_nodes);
        let mut buf = Vec::new();
        s.write_node_log(&mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("node,bound,incumbent"));
        // Incumbent values never decrease along the log.
        assert!(s.nodes.windows(2).all(|w| w[1].incumbent >= w[0].incumbent));
    }

    #[test]
    fn size_guard_returns_incumbent_with_valid_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (psi, xi) = random_psi_xi(&mut rng, 5);
        let p = build_bilp(&psi, &xi, 2).unwrap();
        let s = solve_bilp(
            &p,
            &BilpOptions {
                max_lp_vars: 10,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(s.status, BilpStatus::NodeLimit);
        assert!(s.best_bound >= enumerate(&p) - 1e-12);
        assert!(s.objective_value <= enumerate(&p) + 1e-12);
    }

    #[test]
    fn node_limit_reports_open_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (psi, xi) = random_psi_xi(&mut rng, 5);
        let p = build_bilp(&psi, &xi, 2).unwrap();
        let s = solve_bilp(
            &p,
            &BilpOptions {
                node_limit: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(s.best_bound >= enumerate(&p) - 1e-9);
        assert!(s.explored_nodes <= 1);
    }
}
