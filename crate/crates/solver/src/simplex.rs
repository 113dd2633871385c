//! Dense bounded-variable simplex tableau shared by the LP and MILP solvers.
//!
//! Every row `r` of the program gets a slack `s_r = a_r·x` carrying the row
//! bounds, so the constraint system is `[A  -I] z = 0` with bounds on every
//! column of `z`. The tableau stores `B⁻¹[A  -I]`; basic values satisfy
//! `z_B[r] = -Σ_{j nonbasic} tab[r][j]·z_j`.

use crate::lp::LinearProgram;

const NONE: usize = usize::MAX;
const PIVOT_TOL: f64 = 1e-9;
const OPT_TOL: f64 = 1e-9;
const DUAL_FEAS_TOL: f64 = 1e-7;
const DROP_TOL: f64 = 1e-13;
const RATIO_TIE: f64 = 1e-12;
const BLAND_AFTER: usize = 30;
const REINVERT_EVERY: usize = 600;
/// Tableau entries beyond this mean the basis is too ill-conditioned for its
/// verdicts to be trusted.
const GROWTH_LIMIT: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

enum Step {
    Optimal,
    Unbounded,
    Moved { degenerate: bool },
}

#[derive(Debug, Clone)]
pub(crate) struct Tableau {
    m: usize,
    n: usize,
    width: usize,
    tab: Vec<f64>,
    dj: Vec<f64>,
    base_cost: Vec<f64>,
    cost: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    value: Vec<f64>,
    basis: Vec<usize>,
    row_of: Vec<usize>,
    rows: Vec<Vec<(usize, f64)>>,
    ftol: f64,
    /// Structural column `j` is stored as `x_j / col_scale[j]`; row `r` is
    /// multiplied by `row_scale[r]`.
    col_scale: Vec<f64>,
    pub iterations: usize,
    since_reinvert: usize,
    /// Largest pivot-row entry produced since the last rebuild.
    growth: f64,
}

fn resting_value(lo: f64, hi: f64) -> f64 {
    if lo.is_finite() {
        lo
    } else if hi.is_finite() {
        hi
    } else {
        0.0
    }
}

/// Geometric-mean equilibration, rounded to powers of two so scaling
/// itself introduces no rounding error.
fn equilibrate(lp: &LinearProgram) -> (Vec<f64>, Vec<f64>) {
    let n = lp.num_vars();
    let m = lp.num_rows();
    let mut rs = vec![1.0; m];
    let mut cs = vec![1.0; n];
    let pow2 = |v: f64| if v.is_finite() && v > 0.0 { v.log2().round().exp2() } else { 1.0 };
    for _ in 0..6 {
        for (r, row) in lp.rows.iter().enumerate() {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for &(j, a) in row {
                let v = (a * cs[j]).abs();
                if v > 0.0 {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            rs[r] = pow2(1.0 / (lo * hi).sqrt());
        }
        let mut col_lo = vec![f64::INFINITY; n];
        let mut col_hi = vec![0.0f64; n];
        for (r, row) in lp.rows.iter().enumerate() {
            for &(j, a) in row {
                let v = (a * rs[r]).abs();
                if v > 0.0 {
                    col_lo[j] = col_lo[j].min(v);
                    col_hi[j] = col_hi[j].max(v);
                }
            }
        }
        for j in 0..n {
            cs[j] = pow2(1.0 / (col_lo[j] * col_hi[j]).sqrt());
        }
    }
    (rs, cs)
}

impl Tableau {
    pub(crate) fn new(lp: &LinearProgram, tol: f64) -> Self {
        let n = lp.num_vars();
        let m = lp.num_rows();
        let width = n + m;
        let (rs, cs) = equilibrate(lp);
        let rows: Vec<Vec<(usize, f64)>> = lp
            .rows
            .iter()
            .enumerate()
            .map(|(r, row)| row.iter().map(|&(j, a)| (j, a * rs[r] * cs[j])).collect())
            .collect();
        let mut tab = vec![0.0; m * width];
        for (r, row) in rows.iter().enumerate() {
            for &(j, a) in row {
                tab[r * width + j] -= a;
            }
            tab[r * width + n + r] = 1.0;
        }
        let mut lo: Vec<f64> = (0..n).map(|j| lp.var_lo[j] / cs[j]).collect();
        lo.extend((0..m).map(|r| lp.row_lo[r] * rs[r]));
        let mut hi: Vec<f64> = (0..n).map(|j| lp.var_hi[j] / cs[j]).collect();
        hi.extend((0..m).map(|r| lp.row_hi[r] * rs[r]));
        let mut value = vec![0.0; width];
        for j in 0..n {
            value[j] = resting_value(lo[j], hi[j]);
        }
        let mut base_cost: Vec<f64> = (0..n).map(|j| lp.cost[j] * cs[j]).collect();
        base_cost.resize(width, 0.0);
        let mut row_of = vec![NONE; width];
        let basis: Vec<usize> = (0..m).map(|r| n + r).collect();
        for r in 0..m {
            row_of[n + r] = r;
        }
        let mut t = Tableau {
            m,
            n,
            width,
            tab,
            dj: vec![0.0; width],
            cost: base_cost.clone(),
            base_cost,
            lo,
            hi,
            value,
            basis,
            row_of,
            rows,
            ftol: tol,
            col_scale: cs,
            iterations: 0,
            since_reinvert: 0,
            growth: 1.0,
        };
        t.recompute_basic_values();
        t.compute_dj();
        t
    }

    fn iteration_cap(&self) -> usize {
        20 * (self.m + self.width) + 1000
    }

    pub(crate) fn structural_values(&self) -> Vec<f64> {
        self.value[..self.n]
            .iter()
            .zip(&self.col_scale)
            .map(|(v, c)| v * c)
            .collect()
    }

    pub(crate) fn objective(&self) -> f64 {
        self.base_cost[..self.n]
            .iter()
            .zip(&self.value[..self.n])
            .map(|(c, v)| c * v)
            .sum()
    }

    fn recompute_basic_values(&mut self) {
        let w = self.width;
        let active: Vec<(usize, f64)> = (0..w)
            .filter(|&j| self.row_of[j] == NONE && self.value[j] != 0.0)
            .map(|j| (j, self.value[j]))
            .collect();
        for r in 0..self.m {
            let row = &self.tab[r * w..(r + 1) * w];
            let s: f64 = active.iter().map(|&(j, v)| row[j] * v).sum();
            self.value[self.basis[r]] = -s;
        }
    }

    fn compute_dj(&mut self) {
        let w = self.width;
        self.dj.copy_from_slice(&self.cost);
        for r in 0..self.m {
            let cb = self.cost[self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.tab[r * w..(r + 1) * w];
            for (d, &a) in self.dj.iter_mut().zip(row) {
                if a != 0.0 {
                    *d -= cb * a;
                }
            }
        }
        for &b in &self.basis {
            self.dj[b] = 0.0;
        }
    }

    fn pivot(&mut self, p: usize, q: usize) {
        let w = self.width;
        let piv = self.tab[p * w + q];
        let inv = 1.0 / piv;
        let mut prow: Vec<(usize, f64)> = Vec::new();
        for j in 0..w {
            let a = self.tab[p * w + j];
            if a != 0.0 {
                let v = a * inv;
                self.tab[p * w + j] = v;
                self.growth = self.growth.max(v.abs());
                prow.push((j, v));
            }
        }
        self.tab[p * w + q] = 1.0;
        for r in 0..self.m {
            if r == p {
                continue;
            }
            let f = self.tab[r * w + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.tab[r * w..(r + 1) * w];
            for &(j, v) in &prow {
                let updated = row[j] - f * v;
                row[j] = if updated.abs() < DROP_TOL { 0.0 } else { updated };
            }
            row[q] = 0.0;
        }
        let f = self.dj[q];
        if f != 0.0 {
            for &(j, v) in &prow {
                self.dj[j] -= f * v;
            }
        }
        self.dj[q] = 0.0;
        let leaving = self.basis[p];
        self.row_of[leaving] = NONE;
        self.basis[p] = q;
        self.row_of[q] = p;
        self.since_reinvert += 1;
    }

    /// Rebuilds the tableau for the current basis from the original rows.
    fn reinvert(&mut self) {
        let w = self.width;
        let (n, m) = (self.n, self.m);
        let target = self.basis.clone();
        let mut in_target = vec![false; w];
        for &b in &target {
            in_target[b] = true;
        }
        self.tab.fill(0.0);
        for r in 0..m {
            for &(j, a) in &self.rows[r] {
                self.tab[r * w + j] -= a;
            }
            self.tab[r * w + n + r] = 1.0;
        }
        self.row_of.fill(NONE);
        for r in 0..m {
            self.basis[r] = n + r;
            self.row_of[n + r] = r;
        }
        let mut locked: Vec<bool> = (0..m).map(|r| in_target[n + r]).collect();
        for &q in target.iter().filter(|&&q| q < n) {
            let mut p = NONE;
            let mut best = 1e-9;
            for (r, &is_locked) in locked.iter().enumerate() {
                if is_locked {
                    continue;
                }
                let a = self.tab[r * w + q].abs();
                if a > best {
                    best = a;
                    p = r;
                }
            }
            if p == NONE {
                // Singular column: the variable drops out of the basis.
                self.value[q] = self.value[q].clamp(self.lo[q], self.hi[q]);
                if !self.value[q].is_finite() {
                    self.value[q] = resting_value(self.lo[q], self.hi[q]);
                }
                continue;
            }
            self.pivot(p, q);
            locked[p] = true;
        }
        self.recompute_basic_values();
        self.compute_dj();
        self.since_reinvert = 0;
        self.growth = self.tab.iter().fold(1.0, |m, a| m.max(a.abs()));
    }

    /// Whether the current basis is too ill-conditioned to trust.
    pub(crate) fn unstable(&self) -> bool {
        self.growth > GROWTH_LIMIT
    }

    fn residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (r, row) in self.rows.iter().enumerate() {
            let act: f64 = row.iter().map(|&(j, a)| a * self.value[j]).sum();
            let s = self.value[self.n + r];
            worst = worst.max((act - s).abs() / s.abs().max(1.0));
        }
        worst
    }

    fn primal_step(&mut self, bland: bool) -> Step {
        let w = self.width;
        let mut q = NONE;
        let mut best = 0.0;
        for j in 0..w {
            if self.row_of[j] != NONE {
                continue;
            }
            let d = self.dj[j];
            let eligible = (d < -OPT_TOL && self.value[j] < self.hi[j])
                || (d > OPT_TOL && self.value[j] > self.lo[j]);
            if !eligible {
                continue;
            }
            if bland {
                q = j;
                break;
            }
            if d.abs() > best {
                best = d.abs();
                q = j;
            }
        }
        if q == NONE {
            return Step::Optimal;
        }
        let dir = if self.dj[q] < 0.0 { 1.0 } else { -1.0 };
        let range = if dir > 0.0 {
            self.hi[q] - self.value[q]
        } else {
            self.value[q] - self.lo[q]
        };
        // Exact limit per row, plus the same limit with the bound relaxed by
        // the feasibility tolerance for the Harris pass.
        let mut limits: Vec<(usize, f64, f64, f64)> = Vec::new();
        for r in 0..self.m {
            let alpha = self.tab[r * w + q];
            if alpha.abs() < PIVOT_TOL {
                continue;
            }
            let delta = -alpha * dir;
            let b = self.basis[r];
            let slack = if delta < 0.0 {
                if self.lo[b] == f64::NEG_INFINITY {
                    continue;
                }
                self.value[b] - self.lo[b]
            } else {
                if self.hi[b] == f64::INFINITY {
                    continue;
                }
                self.hi[b] - self.value[b]
            };
            let d = delta.abs();
            limits.push((r, (slack / d).max(0.0), (slack + self.ftol) / d, alpha.abs()));
        }
        let mut step = range;
        let mut leave = NONE;
        if bland {
            for &(r, limit, _, _) in &limits {
                let better = limit < step - RATIO_TIE
                    || (limit <= step + RATIO_TIE
                        && leave != NONE
                        && self.basis[r] < self.basis[leave]);
                if better {
                    step = limit;
                    leave = r;
                }
            }
        } else {
            let bound = limits.iter().fold(range, |m, l| m.min(l.2));
            if range > bound {
                let mut best_alpha = 0.0;
                for &(r, limit, _, alpha) in &limits {
                    if limit <= bound && alpha > best_alpha {
                        best_alpha = alpha;
                        step = limit;
                        leave = r;
                    }
                }
            }
        }
        if step == f64::INFINITY {
            return Step::Unbounded;
        }
        self.iterations += 1;
        let shift = dir * step;
        if shift != 0.0 {
            self.value[q] += shift;
            for r in 0..self.m {
                let alpha = self.tab[r * w + q];
                if alpha != 0.0 {
                    self.value[self.basis[r]] -= alpha * shift;
                }
            }
        }
        if leave == NONE {
            self.value[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
        } else {
            let b = self.basis[leave];
            let delta = -self.tab[leave * w + q] * dir;
            self.value[b] = if delta < 0.0 { self.lo[b] } else { self.hi[b] };
            self.pivot(leave, q);
        }
        Step::Moved {
            degenerate: step <= RATIO_TIE,
        }
    }

    /// Moves every nonbasic variable back inside its bounds and refreshes basics.
    fn snap_nonbasics(&mut self) {
        for j in 0..self.width {
            if self.row_of[j] == NONE {
                let v = self.value[j];
                if v < self.lo[j] || v > self.hi[j] || !v.is_finite() {
                    self.value[j] = if v.is_finite() {
                        v.clamp(self.lo[j], self.hi[j])
                    } else {
                        resting_value(self.lo[j], self.hi[j])
                    };
                }
            }
        }
        self.recompute_basic_values();
    }

    /// Two-phase bounded primal simplex from the current basis.
    pub(crate) fn primal(&mut self) -> Outcome {
        let start = self.iterations;
        let cap = self.iteration_cap();
        for _attempt in 0..4 {
            match self.phase_one(start, cap) {
                Outcome::Optimal => {}
                other => return other,
            }
            match self.phase_two(start, cap) {
                Outcome::Optimal => {}
                other => return other,
            }
            if self.residual() < 1e-7 {
                return Outcome::Optimal;
            }
            self.reinvert();
        }
        Outcome::Optimal
    }

    fn phase_one(&mut self, start: usize, cap: usize) -> Outcome {
        let w = self.width;
        let ftol = self.ftol;
        let true_lo = self.lo.clone();
        let true_hi = self.hi.clone();
        let mut relaxed = vec![false; w];
        for r in 0..self.m {
            let b = self.basis[r];
            let v = self.value[b];
            if v < true_lo[b] - ftol {
                self.lo[b] = v;
                self.hi[b] = true_lo[b];
                relaxed[b] = true;
            } else if v > true_hi[b] + ftol {
                self.lo[b] = true_hi[b];
                self.hi[b] = v;
                relaxed[b] = true;
            }
        }
        let mut degenerate_run = 0;
        let outcome = loop {
            let mut any = false;
            for j in 0..w {
                if !relaxed[j] {
                    continue;
                }
                let v = self.value[j];
                if v >= true_lo[j] - ftol && v <= true_hi[j] + ftol {
                    self.lo[j] = true_lo[j];
                    self.hi[j] = true_hi[j];
                    relaxed[j] = false;
                    if self.row_of[j] == NONE {
                        self.value[j] = v.clamp(true_lo[j], true_hi[j]);
                    }
                } else {
                    any = true;
                }
            }
            if !any {
                break Outcome::Optimal;
            }
            if self.iterations - start > cap {
                break Outcome::IterationLimit;
            }
            if self.since_reinvert >= REINVERT_EVERY {
                self.reinvert();
            }
            self.cost.fill(0.0);
            for j in 0..w {
                if relaxed[j] {
                    self.cost[j] = if self.value[j] < true_lo[j] { -1.0 } else { 1.0 };
                }
            }
            self.compute_dj();
            match self.primal_step(degenerate_run >= BLAND_AFTER) {
                Step::Optimal | Step::Unbounded => break Outcome::Infeasible,
                Step::Moved { degenerate } => {
                    degenerate_run = if degenerate { degenerate_run + 1 } else { 0 };
                }
            }
        };
        if outcome != Outcome::Optimal {
            self.lo = true_lo;
            self.hi = true_hi;
            self.snap_nonbasics();
        }
        self.cost.copy_from_slice(&self.base_cost);
        self.compute_dj();
        outcome
    }

    fn phase_two(&mut self, start: usize, cap: usize) -> Outcome {
        let mut degenerate_run = 0;
        loop {
            if self.iterations - start > cap {
                return Outcome::IterationLimit;
            }
            if self.since_reinvert >= REINVERT_EVERY {
                self.reinvert();
                if self.max_primal_infeasibility().0 != NONE {
                    // Drift pushed a basic out of bounds; restart from phase one.
                    match self.phase_one(start, cap) {
                        Outcome::Optimal => {}
                        other => return other,
                    }
                }
            }
            match self.primal_step(degenerate_run >= BLAND_AFTER) {
                Step::Optimal => return Outcome::Optimal,
                Step::Unbounded => return Outcome::Unbounded,
                Step::Moved { degenerate } => {
                    degenerate_run = if degenerate { degenerate_run + 1 } else { 0 };
                }
            }
        }
    }

    fn max_primal_infeasibility(&self) -> (usize, f64) {
        let mut p = NONE;
        let mut worst = self.ftol;
        for r in 0..self.m {
            let b = self.basis[r];
            let v = self.value[b];
            let viol = (self.lo[b] - v).max(v - self.hi[b]);
            if viol > worst {
                worst = viol;
                p = r;
            }
        }
        (p, worst)
    }

    /// Restores dual feasibility without leaving the current basis: boxed
    /// columns with the wrong reduced-cost sign jump to their other bound,
    /// the rest get their cost shifted so the reduced cost vanishes.
    /// Returns whether any cost was shifted.
    fn repair_dual(&mut self) -> bool {
        let w = self.width;
        let mut shifted = false;
        for j in 0..w {
            if self.row_of[j] != NONE || self.lo[j] == self.hi[j] {
                continue;
            }
            let d = self.dj[j];
            let v = self.value[j];
            let wrong_lo = d < -DUAL_FEAS_TOL && v != self.hi[j];
            let wrong_hi = d > DUAL_FEAS_TOL && v != self.lo[j];
            if !wrong_lo && !wrong_hi {
                continue;
            }
            let target = if wrong_lo { self.hi[j] } else { self.lo[j] };
            if target.is_finite() {
                let delta = target - v;
                self.value[j] = target;
                for r in 0..self.m {
                    let a = self.tab[r * w + j];
                    if a != 0.0 {
                        self.value[self.basis[r]] -= a * delta;
                    }
                }
            } else {
                self.cost[j] -= d;
                self.dj[j] = 0.0;
                shifted = true;
            }
        }
        shifted
    }

    /// Dual simplex from the current basis. Dual infeasibilities are
    /// repaired first; if that needed cost shifts, a primal pass with the
    /// true costs finishes from the resulting primal feasible point.
    pub(crate) fn dual(&mut self) -> Outcome {
        let mut shifted = self.repair_dual();
        let outcome = self.dual_loop(&mut shifted);
        if shifted {
            self.cost.copy_from_slice(&self.base_cost);
            self.compute_dj();
            if outcome == Outcome::Optimal {
                return self.primal();
            }
        }
        outcome
    }

    fn dual_loop(&mut self, shifted: &mut bool) -> Outcome {
        let start = self.iterations;
        let cap = self.iteration_cap();
        let w = self.width;
        let mut degenerate_run = 0;
        let mut retries = 0;
        loop {
            if self.iterations - start > cap {
                return Outcome::IterationLimit;
            }
            if self.since_reinvert >= REINVERT_EVERY {
                self.reinvert();
                *shifted |= self.repair_dual();
            }
            let bland = degenerate_run >= BLAND_AFTER;
            let p = if bland {
                // Smallest infeasible basic index.
                let mut p = NONE;
                for r in 0..self.m {
                    let b = self.basis[r];
                    let v = self.value[b];
                    if (v < self.lo[b] - self.ftol || v > self.hi[b] + self.ftol)
                        && (p == NONE || b < self.basis[p])
                    {
                        p = r;
                    }
                }
                p
            } else {
                self.max_primal_infeasibility().0
            };
            if p == NONE {
                if self.residual() < 1e-7 {
                    return Outcome::Optimal;
                }
                self.reinvert();
                *shifted |= self.repair_dual();
                if self.max_primal_infeasibility().0 == NONE {
                    return Outcome::Optimal;
                }
                continue;
            }
            let b = self.basis[p];
            let v = self.value[b];
            let target = if v < self.lo[b] { self.lo[b] } else { self.hi[b] };
            let needed = target - v;
            let mut candidates: Vec<(usize, f64, f64)> = Vec::new();
            for j in 0..w {
                if self.row_of[j] != NONE {
                    continue;
                }
                let alpha = self.tab[p * w + j];
                if alpha.abs() < PIVOT_TOL {
                    continue;
                }
                // Moving x_j by δ changes x_B by -alpha·δ.
                let increase_j = (needed > 0.0) == (alpha < 0.0);
                let movable = if increase_j {
                    self.value[j] < self.hi[j]
                } else {
                    self.value[j] > self.lo[j]
                };
                if movable {
                    candidates.push((j, self.dj[j].abs(), alpha.abs()));
                }
            }
            let mut q = NONE;
            let mut best_ratio = f64::INFINITY;
            if bland {
                for &(j, d, a) in &candidates {
                    let ratio = d / a;
                    if ratio < best_ratio - RATIO_TIE {
                        best_ratio = ratio;
                        q = j;
                    }
                }
            } else {
                let bound = candidates
                    .iter()
                    .fold(f64::INFINITY, |m, &(_, d, a)| m.min((d + DUAL_FEAS_TOL) / a));
                let mut best_alpha = 0.0;
                for &(j, d, a) in &candidates {
                    if d / a <= bound && a > best_alpha {
                        best_alpha = a;
                        best_ratio = d / a;
                        q = j;
                    }
                }
            }
            if q == NONE && self.residual() > 1e-7 && retries < 3 {
                // Drift, not a proof: rebuild the tableau and carry on.
                retries += 1;
                self.reinvert();
                *shifted |= self.repair_dual();
                continue;
            }
            if q == NONE {
                return Outcome::Infeasible;
            }
            degenerate_run = if best_ratio <= RATIO_TIE {
                degenerate_run + 1
            } else {
                0
            };
            self.iterations += 1;
            let alpha_q = self.tab[p * w + q];
            let delta = needed / -alpha_q;
            self.value[q] += delta;
            for r in 0..self.m {
                let a = self.tab[r * w + q];
                if a != 0.0 {
                    self.value[self.basis[r]] -= a * delta;
                }
            }
            self.value[b] = target;
            self.pivot(p, q);
        }
    }

    /// Changes the bounds of structural column `j` (in the caller's units),
    /// keeping nonbasic columns on the bound
    /// that preserves dual feasibility.
    pub(crate) fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        debug_assert!(j < self.n);
        let (lo, hi) = (lo / self.col_scale[j], hi / self.col_scale[j]);
        self.lo[j] = lo;
        self.hi[j] = hi;
        if self.row_of[j] != NONE {
            return;
        }
        let d = self.dj[j];
        let target = if lo == hi || (d > OPT_TOL && lo.is_finite()) {
            lo
        } else if d < -OPT_TOL && hi.is_finite() {
            hi
        } else {
            let v = self.value[j].clamp(lo, hi);
            if v.is_finite() {
                v
            } else {
                resting_value(lo, hi)
            }
        };
        let delta = target - self.value[j];
        if delta != 0.0 {
            self.value[j] = target;
            let w = self.width;
            for r in 0..self.m {
                let a = self.tab[r * w + j];
                if a != 0.0 {
                    self.value[self.basis[r]] -= a * delta;
                }
            }
        }
    }
}
