//! Branch-and-bound over binary variables with big-M indicator constraints.
//!
//! Nodes are explored depth first, with a best-bound restart every
//! [`BEST_FIRST_EVERY`] nodes. Each worker keeps one simplex tableau and
//! re-solves nodes from it with the dual simplex after changing binary bounds.
//! Branching takes the lowest-indexed fractional binary, which for the
//! rollout programs means the earliest step.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use log::debug;
use thiserror::Error;

use crate::lp::{merge_coeffs, LinearProgram, LpError};
use crate::simplex::{Outcome, Tableau};

pub const BEST_FIRST_EVERY: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// `binary == active_when  ⇒  Σ coeffs·x (sense) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorConstraint {
    pub binary: usize,
    pub active_when: bool,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MixedIntegerProgram {
    pub base: LinearProgram,
    pub binaries: Vec<usize>,
    pub indicators: Vec<IndicatorConstraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpOptions {
    pub node_limit: usize,
    pub time_limit: Option<Duration>,
    pub int_tol: f64,
    pub rel_gap: f64,
    pub lp_tol: f64,
    /// Worker threads; 0 or 1 runs the deterministic single-threaded search.
    pub threads: usize,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self {
            node_limit: 200_000,
            time_limit: None,
            int_tol: 1e-6,
            rel_gap: 1e-6,
            lp_tol: crate::lp::DEFAULT_TOL,
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    NodeLimit,
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Incumbent; empty when none was found.
    pub x: Vec<f64>,
    pub objective: f64,
    pub best_bound: f64,
    pub root_bound: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
}

impl MilpSolution {
    pub fn has_incumbent(&self) -> bool {
        !self.x.is_empty()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MilpError {
    #[error("indicator {index} references variable {var}, which is not a declared binary")]
    MalformedIndicator { index: usize, var: usize },
    #[error("binary index {0} is out of range")]
    BinaryOutOfRange(usize),
    #[error("indicator {0} has no finite big-M: a referenced variable is unbounded")]
    UnboundedIndicator(usize),
    #[error("the relaxation is unbounded")]
    Unbounded,
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Maps a node's relaxation point to a full candidate solution, if it can.
pub type NodeHeuristic<'a> = dyn Fn(&[f64]) -> Option<Vec<f64>> + Sync + 'a;

/// Problem-specific search aids.
#[derive(Default)]
pub struct MilpHooks<'a> {
    /// Candidate solutions checked and adopted before the search starts.
    pub initial: Vec<Vec<f64>>,
    /// Called with each node's relaxation point; may return a full candidate.
    pub heuristic: Option<&'a NodeHeuristic<'a>>,
}

pub fn solve_milp(
    mip: &MixedIntegerProgram,
    options: &MilpOptions,
) -> Result<MilpSolution, MilpError> {
    solve_milp_with(mip, options, &MilpHooks::default())
}

impl MixedIntegerProgram {
    pub fn new(base: LinearProgram) -> Self {
        Self {
            base,
            binaries: Vec::new(),
            indicators: Vec::new(),
        }
    }

    /// Adds a `{0,1}` variable.
    pub fn add_binary(&mut self, cost: f64) -> usize {
        let j = self.base.add_var(cost, 0.0, 1.0);
        self.binaries.push(j);
        j
    }

    pub fn add_indicator(
        &mut self,
        binary: usize,
        active_when: bool,
        coeffs: &[(usize, f64)],
        sense: Sense,
        rhs: f64,
    ) {
        self.indicators.push(IndicatorConstraint {
            binary,
            active_when,
            coeffs: coeffs.to_vec(),
            sense,
            rhs,
        });
    }

    fn check(&self) -> Result<(), MilpError> {
        self.base.check()?;
        let n = self.base.num_vars();
        let mut is_binary = vec![false; n];
        for &b in &self.binaries {
            if b >= n {
                return Err(MilpError::BinaryOutOfRange(b));
            }
            is_binary[b] = true;
        }
        for (index, ind) in self.indicators.iter().enumerate() {
            if ind.binary >= n || !is_binary[ind.binary] {
                return Err(MilpError::MalformedIndicator {
                    index,
                    var: ind.binary,
                });
            }
            if let Some(&(var, _)) = ind.coeffs.iter().find(|(j, _)| *j >= n) {
                return Err(MilpError::Lp(LpError::Dimension(format!(
                    "indicator {index} references column {var} of {n}"
                ))));
            }
        }
        Ok(())
    }

    /// The linear program with every indicator replaced by big-M rows and
    /// binaries boxed into `[0, 1]`.
    pub fn compile(&self) -> Result<LinearProgram, MilpError> {
        self.check()?;
        let mut lp = self.base.clone();
        for &b in &self.binaries {
            lp.var_lo[b] = lp.var_lo[b].max(0.0);
            lp.var_hi[b] = lp.var_hi[b].min(1.0);
        }
        for (index, ind) in self.indicators.iter().enumerate() {
            let coeffs = merge_coeffs(&ind.coeffs);
            let negated: Vec<(usize, f64)> = coeffs.iter().map(|&(j, a)| (j, -a)).collect();
            let mut parts: Vec<(&[(usize, f64)], f64)> = Vec::new();
            match ind.sense {
                Sense::Le => parts.push((&coeffs, ind.rhs)),
                Sense::Ge => parts.push((&negated, -ind.rhs)),
                Sense::Eq => {
                    parts.push((&coeffs, ind.rhs));
                    parts.push((&negated, -ind.rhs));
                }
            }
            for (row, rhs) in parts {
                let max_activity: f64 = row
                    .iter()
                    .map(|&(j, a)| if a > 0.0 { a * lp.var_hi[j] } else { a * lp.var_lo[j] })
                    .sum();
                if !max_activity.is_finite() {
                    return Err(MilpError::UnboundedIndicator(index));
                }
                let big_m = max_activity - rhs;
                if big_m <= 0.0 {
                    continue;
                }
                let mut full = row.to_vec();
                if ind.active_when {
                    // Σ a·x + M·b <= rhs + M
                    full.push((ind.binary, big_m));
                    lp.add_row(&full, f64::NEG_INFINITY, rhs + big_m);
                } else {
                    // Σ a·x - M·b <= rhs
                    full.push((ind.binary, -big_m));
                    lp.add_row(&full, f64::NEG_INFINITY, rhs);
                }
            }
        }
        Ok(lp)
    }
}

#[derive(Debug, Clone)]
struct Node {
    fixings: Vec<(usize, f64)>,
    bound: f64,
}

/// A worker's warm-started LP plus the solved root it can fall back to.
struct NodeLp {
    tableau: Tableau,
    root: Tableau,
    applied_lo: Vec<f64>,
    applied_hi: Vec<f64>,
}

struct Pool {
    open: Vec<Node>,
    active: usize,
    popped: usize,
}

struct Incumbent {
    x: Vec<f64>,
    objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stop {
    Nodes,
    Time,
}

struct Search<'a> {
    lp: &'a LinearProgram,
    binaries: &'a [usize],
    options: &'a MilpOptions,
    hooks: &'a MilpHooks<'a>,
    started: Instant,
    pool: Mutex<Pool>,
    incumbent: Mutex<Incumbent>,
    nodes: AtomicUsize,
    lp_iterations: AtomicUsize,
    stop: Mutex<Option<Stop>>,
    halted: AtomicBool,
    error: Mutex<Option<MilpError>>,
}

impl Search<'_> {
    fn cutoff(&self) -> f64 {
        let inc = self.incumbent.lock().unwrap().objective;
        if inc.is_finite() {
            inc - (self.options.rel_gap * inc.abs()).max(1e-9)
        } else {
            f64::INFINITY
        }
    }

    fn feasible(&self, x: &[f64]) -> bool {
        if x.len() != self.lp.num_vars() {
            return false;
        }
        let tol = 1e-6;
        let integral = self
            .binaries
            .iter()
            .all(|&b| (x[b] - x[b].round()).abs() <= self.options.int_tol);
        integral && self.lp.max_violation(x) <= tol
    }

    /// Adopts `x` if it is feasible and strictly improves the incumbent.
    fn offer(&self, mut x: Vec<f64>) -> bool {
        if !self.feasible(&x) {
            return false;
        }
        for &b in self.binaries {
            x[b] = x[b].round();
        }
        let objective = self.lp.objective_at(&x);
        let mut inc = self.incumbent.lock().unwrap();
        if objective < inc.objective {
            debug!("new incumbent {objective:.6} (was {:.6})", inc.objective);
            inc.objective = objective;
            inc.x = x;
            true
        } else {
            false
        }
    }

    fn halt(&self, why: Stop) {
        let mut stop = self.stop.lock().unwrap();
        if stop.is_none() {
            *stop = Some(why);
        }
        self.halted.store(true, Ordering::SeqCst);
    }

    fn next_node(&self) -> Option<Node> {
        loop {
            if self.halted.load(Ordering::SeqCst) {
                return None;
            }
            {
                let mut pool = self.pool.lock().unwrap();
                if !pool.open.is_empty() {
                    pool.popped += 1;
                    let node = if pool.popped.is_multiple_of(BEST_FIRST_EVERY) {
                        let (best, _) = pool
                            .open
                            .iter()
                            .enumerate()
                            .min_by(|a, b| a.1.bound.total_cmp(&b.1.bound))
                            .expect("non-empty pool");
                        pool.open.remove(best)
                    } else {
                        pool.open.pop().expect("non-empty pool")
                    };
                    pool.active += 1;
                    return Some(node);
                }
                if pool.active == 0 {
                    return None;
                }
            }
            std::thread::sleep(Duration::from_micros(50));
        }
    }

    fn finish_node(&self, children: Vec<Node>) {
        let mut pool = self.pool.lock().unwrap();
        pool.open.extend(children);
        pool.active -= 1;
    }

    fn worker(&self, tableau: Tableau, root_lo: &[f64], root_hi: &[f64]) {
        let mut lp = NodeLp {
            root: tableau.clone(),
            tableau,
            applied_lo: root_lo.to_vec(),
            applied_hi: root_hi.to_vec(),
        };
        let mut last_iterations = lp.tableau.iterations;
        while let Some(node) = self.next_node() {
            let processed = self.nodes.fetch_add(1, Ordering::SeqCst);
            let over_nodes = processed >= self.options.node_limit;
            let over_time = self
                .options
                .time_limit
                .is_some_and(|limit| self.started.elapsed() >= limit);
            if over_nodes || over_time {
                self.nodes.fetch_sub(1, Ordering::SeqCst);
                self.finish_node(vec![node]);
                self.halt(if over_nodes { Stop::Nodes } else { Stop::Time });
                break;
            }
            let children = self.process(&node, &mut lp, root_lo, root_hi);
            self.lp_iterations
                .fetch_add(lp.tableau.iterations - last_iterations, Ordering::Relaxed);
            last_iterations = lp.tableau.iterations;
            match children {
                Ok(children) => self.finish_node(children),
                Err(e) => {
                    *self.error.lock().unwrap() = Some(e);
                    self.finish_node(Vec::new());
                    self.halted.store(true, Ordering::SeqCst);
                    break;
                }
            }
        }
    }

    fn apply_bounds(&self, fixings: &[(usize, f64)], lp: &mut NodeLp, root_lo: &[f64], root_hi: &[f64]) {
        let mut want_lo = root_lo.to_vec();
        let mut want_hi = root_hi.to_vec();
        for &(var, val) in fixings {
            if let Some(k) = self.binaries.iter().position(|&b| b == var) {
                want_lo[k] = val;
                want_hi[k] = val;
            }
        }
        for (k, &b) in self.binaries.iter().enumerate() {
            if want_lo[k] != lp.applied_lo[k] || want_hi[k] != lp.applied_hi[k] {
                lp.tableau.set_bounds(b, want_lo[k], want_hi[k]);
                lp.applied_lo[k] = want_lo[k];
                lp.applied_hi[k] = want_hi[k];
            }
        }
    }

    fn resolve(&self, tableau: &mut Tableau) -> Result<Outcome, MilpError> {
        match tableau.dual() {
            Outcome::IterationLimit => match tableau.primal() {
                Outcome::IterationLimit => Err(LpError::IterationLimit(tableau.iterations).into()),
                other => Ok(other),
            },
            other => Ok(other),
        }
    }

    /// Re-solves under `fixings` from the current basis. Long dual sequences
    /// can leave the tableau badly conditioned, and its verdicts (infeasible
    /// in particular) are then unreliable, so such a node is solved again
    /// from the root basis.
    fn solve_node(
        &self,
        fixings: &[(usize, f64)],
        lp: &mut NodeLp,
        root_lo: &[f64],
        root_hi: &[f64],
    ) -> Result<Outcome, MilpError> {
        self.apply_bounds(fixings, lp, root_lo, root_hi);
        let outcome = self.resolve(&mut lp.tableau)?;
        if !lp.tableau.unstable() {
            return Ok(outcome);
        }
        debug!("node tableau unstable, restarting from the root basis");
        let iterations = lp.tableau.iterations;
        lp.tableau = lp.root.clone();
        lp.tableau.iterations = iterations;
        lp.applied_lo.copy_from_slice(root_lo);
        lp.applied_hi.copy_from_slice(root_hi);
        self.apply_bounds(fixings, lp, root_lo, root_hi);
        self.resolve(&mut lp.tableau)
    }

    fn process(
        &self,
        node: &Node,
        lp: &mut NodeLp,
        root_lo: &[f64],
        root_hi: &[f64],
    ) -> Result<Vec<Node>, MilpError> {
        if node.bound >= self.cutoff() {
            return Ok(Vec::new());
        }
        match self.solve_node(&node.fixings, lp, root_lo, root_hi)? {
            Outcome::Optimal => {}
            Outcome::Infeasible => return Ok(Vec::new()),
            Outcome::Unbounded => return Err(MilpError::Unbounded),
            Outcome::IterationLimit => unreachable!("handled in resolve"),
        }
        let bound = lp.tableau.objective().max(node.bound);
        if bound >= self.cutoff() {
            return Ok(Vec::new());
        }
        let x = lp.tableau.structural_values();
        if let Some(heuristic) = self.hooks.heuristic {
            if let Some(candidate) = heuristic(&x) {
                self.offer(candidate);
            }
            if bound >= self.cutoff() {
                return Ok(Vec::new());
            }
        }
        let branch = self.binaries.iter().copied().find(|&b| {
            let frac = (x[b] - x[b].floor()).min(x[b].ceil() - x[b]);
            frac > self.options.int_tol
        });
        let Some(var) = branch else {
            self.polish(&node.fixings, &x, lp, root_lo, root_hi)?;
            return Ok(Vec::new());
        };
        let near = x[var].round();
        let mut far_fix = node.fixings.clone();
        far_fix.push((var, 1.0 - near));
        let mut near_fix = node.fixings.clone();
        near_fix.push((var, near));
        // The near child is pushed last so the dive continues through it.
        Ok(vec![
            Node {
                fixings: far_fix,
                bound,
            },
            Node {
                fixings: near_fix,
                bound,
            },
        ])
    }

    /// Fixes every binary at its rounded value and re-solves, so the adopted
    /// incumbent satisfies the big-M rows with exactly integral binaries.
    fn polish(
        &self,
        fixings: &[(usize, f64)],
        x: &[f64],
        lp: &mut NodeLp,
        root_lo: &[f64],
        root_hi: &[f64],
    ) -> Result<(), MilpError> {
        let mut all: Vec<(usize, f64)> = fixings.to_vec();
        all.extend(self.binaries.iter().map(|&b| (b, x[b].round())));
        if self.solve_node(&all, lp, root_lo, root_hi)? == Outcome::Optimal {
            let polished = lp.tableau.structural_values();
            if !self.offer(polished) {
                self.offer(x.to_vec());
            }
        } else {
            self.offer(x.to_vec());
        }
        Ok(())
    }
}

/// Solves `mip` to global optimality (within `options.rel_gap`) or until a
/// node/time limit, returning the incumbent and the best proven bound.
pub fn solve_milp_with(
    mip: &MixedIntegerProgram,
    options: &MilpOptions,
    hooks: &MilpHooks<'_>,
) -> Result<MilpSolution, MilpError> {
    let started = Instant::now();
    let lp = mip.compile()?;
    let mut binaries = mip.binaries.clone();
    binaries.sort_unstable();
    binaries.dedup();

    let infeasible = |nodes, lp_iterations| MilpSolution {
        status: MilpStatus::Infeasible,
        x: Vec::new(),
        objective: f64::INFINITY,
        best_bound: f64::INFINITY,
        root_bound: f64::INFINITY,
        nodes,
        lp_iterations,
    };
    if lp.trivially_infeasible() {
        return Ok(infeasible(0, 0));
    }

    let mut root = Tableau::new(&lp, options.lp_tol);
    let root_outcome = root.primal();
    let root_iterations = root.iterations;
    let root_bound = match root_outcome {
        Outcome::Optimal => root.objective(),
        Outcome::Infeasible => return Ok(infeasible(1, root_iterations)),
        Outcome::Unbounded => return Err(MilpError::Unbounded),
        Outcome::IterationLimit => return Err(LpError::IterationLimit(root_iterations).into()),
    };
    let root_lo: Vec<f64> = binaries.iter().map(|&b| lp.var_lo[b]).collect();
    let root_hi: Vec<f64> = binaries.iter().map(|&b| lp.var_hi[b]).collect();

    let search = Search {
        lp: &lp,
        binaries: &binaries,
        options,
        hooks,
        started,
        pool: Mutex::new(Pool {
            open: vec![Node {
                fixings: Vec::new(),
                bound: root_bound,
            }],
            active: 0,
            popped: 0,
        }),
        incumbent: Mutex::new(Incumbent {
            x: Vec::new(),
            objective: f64::INFINITY,
        }),
        nodes: AtomicUsize::new(0),
        lp_iterations: AtomicUsize::new(root_iterations),
        stop: Mutex::new(None),
        halted: AtomicBool::new(false),
        error: Mutex::new(None),
    };
    for candidate in &hooks.initial {
        search.offer(candidate.clone());
    }

    if options.threads <= 1 {
        search.worker(root, &root_lo, &root_hi);
    } else {
        std::thread::scope(|scope| {
            for _ in 1..options.threads {
                let tableau = root.clone();
                let (search, lo, hi) = (&search, &root_lo, &root_hi);
                scope.spawn(move || search.worker(tableau, lo, hi));
            }
            search.worker(root, &root_lo, &root_hi);
        });
    }

    if let Some(e) = search.error.lock().unwrap().take() {
        return Err(e);
    }
    let nodes = search.nodes.load(Ordering::SeqCst);
    let lp_iterations = search.lp_iterations.load(Ordering::SeqCst);
    let stop = *search.stop.lock().unwrap();
    let pool = search.pool.into_inner().unwrap();
    let incumbent = search.incumbent.into_inner().unwrap();
    let open_bound = pool
        .open
        .iter()
        .map(|n| n.bound)
        .fold(f64::INFINITY, f64::min);
    let status = match stop {
        Some(Stop::Nodes) if !pool.open.is_empty() => MilpStatus::NodeLimit,
        Some(Stop::Time) if !pool.open.is_empty() => MilpStatus::TimeLimit,
        _ if incumbent.x.is_empty() => MilpStatus::Infeasible,
        _ => MilpStatus::Optimal,
    };
    let best_bound = match status {
        MilpStatus::Optimal => incumbent.objective,
        MilpStatus::Infeasible => f64::INFINITY,
        _ => open_bound.min(incumbent.objective).max(root_bound),
    };
    debug!(
        "milp finished: {status:?} after {nodes} nodes, objective {:.6}, bound {best_bound:.6}",
        incumbent.objective
    );
    Ok(MilpSolution {
        status,
        objective: incumbent.objective,
        x: incumbent.x,
        best_bound,
        root_bound,
        nodes,
        lp_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn knapsack_pair() -> MixedIntegerProgram {
        let mut mip = MixedIntegerProgram::default();
        let a = mip.add_binary(-3.0);
        let b = mip.add_binary(-2.0);
        mip.base.add_row(&[(a, 1.0), (b, 1.0)], f64::NEG_INFINITY, 1.0);
        mip
    }

    #[test]
    fn relaxation_already_integral() {
        let mut mip = MixedIntegerProgram::default();
        let x = mip.add_binary(-1.0);
        mip.base.add_row(&[(x, 1.0)], f64::NEG_INFINITY, 2.5);
        let sol = solve_milp(&mip, &MilpOptions::default()).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert_eq!(sol.x[x], 1.0);
        assert!((sol.objective + 1.0).abs() < 1e-9);
    }

    #[test]
    fn picks_heavier_item() {
        let sol = solve_milp(&knapsack_pair(), &MilpOptions::default()).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert!((sol.objective + 3.0).abs() < 1e-9);
        assert_eq!(sol.x, vec![1.0, 0.0]);
    }

    #[test]
    fn contradictory_indicators_are_infeasible() {
        let mut mip = MixedIntegerProgram::default();
        let x = mip.base.add_var(0.0, 0.0, 4.0);
        let b = mip.add_binary(0.0);
        mip.add_indicator(b, true, &[(x, 1.0)], Sense::Ge, 5.0);
        mip.add_indicator(b, false, &[(x, 1.0)], Sense::Ge, 5.0);
        let sol = solve_milp(&mip, &MilpOptions::default()).unwrap();
        assert_eq!(sol.status, MilpStatus::Infeasible);
        assert!(!sol.has_incumbent());
    }

    #[test]
    fn indicator_on_continuous_variable_is_rejected() {
        let mut mip = MixedIntegerProgram::default();
        let x = mip.base.add_var(0.0, 0.0, 4.0);
        mip.add_indicator(x, true, &[(x, 1.0)], Sense::Le, 1.0);
        assert_eq!(
            solve_milp(&mip, &MilpOptions::default()),
            Err(MilpError::MalformedIndicator { index: 0, var: x })
        );
    }

    #[test]
    fn unbounded_indicator_is_rejected() {
        let mut mip = MixedIntegerProgram::default();
        let x = mip.base.add_var(0.0, 0.0, f64::INFINITY);
        let b = mip.add_binary(0.0);
        mip.add_indicator(b, true, &[(x, 1.0)], Sense::Le, 1.0);
        assert_eq!(
            solve_milp(&mip, &MilpOptions::default()),
            Err(MilpError::UnboundedIndicator(0))
        );
    }

    #[test]
    fn indicator_equality_selects_branch() {
        // b=1 ⇒ y = x ; b=0 ⇒ y = 3 ; minimize y - 2b with x ∈ [1, 2]
        let mut mip = MixedIntegerProgram::default();
        let x = mip.base.add_var(0.0, 1.0, 2.0);
        let y = mip.base.add_var(1.0, 0.0, 5.0);
        let b = mip.add_binary(-2.0);
        mip.add_indicator(b, true, &[(y, 1.0), (x, -1.0)], Sense::Eq, 0.0);
        mip.add_indicator(b, false, &[(y, 1.0)], Sense::Eq, 3.0);
        let sol = solve_milp(&mip, &MilpOptions::default()).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert!((sol.objective + 1.0).abs() < 1e-9);
        assert!((sol.x[y] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn node_limit_returns_incumbent_and_bound() {
        let mut mip = MixedIntegerProgram::default();
        let items: Vec<usize> = (0..14).map(|i| mip.add_binary(-(1.0 + (i % 5) as f64))).collect();
        let weights: Vec<(usize, f64)> = items
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, 2.0 + (i * 7 % 5) as f64 + 0.5))
            .collect();
        mip.base.add_row(&weights, f64::NEG_INFINITY, 17.3);
        let options = MilpOptions {
            node_limit: 3,
            ..MilpOptions::default()
        };
        let hooks = MilpHooks {
            initial: vec![vec![0.0; 14]],
            heuristic: None,
        };
        let sol = solve_milp_with(&mip, &options, &hooks).unwrap();
        assert_eq!(sol.status, MilpStatus::NodeLimit);
        assert!(sol.has_incumbent());
        assert!(sol.best_bound <= sol.objective + 1e-9);
    }

    #[test]
    fn infeasible_initial_candidates_are_ignored() {
        let hooks = MilpHooks {
            initial: vec![vec![1.0, 1.0], vec![0.5, 0.0]],
            heuristic: None,
        };
        let sol = solve_milp_with(&knapsack_pair(), &MilpOptions::default(), &hooks).unwrap();
        assert!((sol.objective + 3.0).abs() < 1e-9);
    }

    #[test]
    fn parallel_matches_serial_objective() {
        let mut mip = MixedIntegerProgram::default();
        let items: Vec<usize> = (0..12)
            .map(|i| mip.add_binary(-((i * 37 % 11) as f64 + 1.0)))
            .collect();
        let w1: Vec<(usize, f64)> = items
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, (i * 13 % 7) as f64 + 1.0))
            .collect();
        let w2: Vec<(usize, f64)> = items
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, (i * 5 % 9) as f64 + 1.5))
            .collect();
        mip.base.add_row(&w1, f64::NEG_INFINITY, 19.0);
        mip.base.add_row(&w2, f64::NEG_INFINITY, 23.0);
        let serial = solve_milp(&mip, &MilpOptions::default()).unwrap();
        let parallel = solve_milp(
            &mip,
            &MilpOptions {
                threads: 4,
                ..MilpOptions::default()
            },
        )
        .unwrap();
        assert_eq!(serial.status, MilpStatus::Optimal);
        assert_eq!(parallel.status, MilpStatus::Optimal);
        assert!((serial.objective - parallel.objective).abs() < 1e-6);
        let again = solve_milp(&mip, &MilpOptions::default()).unwrap();
        assert_eq!(serial.x, again.x);
    }
}
