//! Brute-force optima for small programs, shared with other test targets.

use capdrop_solver::{solve_lp, LinearProgram, LpStatus, MixedIntegerProgram, Sense, DEFAULT_TOL};

const INF: f64 = f64::INFINITY;

/// Solves the square system `a·x = b` with partial pivoting.
fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn for_each_subset(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::new(), f);
}

/// Minimum over all basic feasible points of a bounded LP; `None` if infeasible.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lp.var_lo[j]));
        planes.push((e, lp.var_hi[j]));
    }
    for (r, row) in lp.rows.iter().enumerate() {
        let mut a = vec![0.0; n];
        for &(j, v) in row {
            a[j] += v;
        }
        for bound in [lp.row_lo[r], lp.row_hi[r]] {
            if bound.is_finite() {
                planes.push((a.clone(), bound));
            }
        }
    }
    let mut best: Option<f64> = None;
    for_each_subset(planes.len(), n, &mut |idx| {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = gauss(a, b) {
            if lp.max_violation(&x) <= 1e-7 {
                let obj = lp.objective_at(&x);
                best = Some(best.map_or(obj, |v: f64| v.min(obj)));
            }
        }
    });
    best
}

/// Best objective over all binary assignments, each completed by an LP in
/// which active indicators are plain rows and inactive ones are dropped.
pub fn binary_enumeration(mip: &MixedIntegerProgram) -> Option<f64> {
    let k = mip.binaries.len();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << k) {
        let mut lp = mip.base.clone();
        for (bit, &b) in mip.binaries.iter().enumerate() {
            let v = ((mask >> bit) & 1) as f64;
            lp.set_bounds(b, v, v);
        }
        for ind in &mip.indicators {
            let pos = mip.binaries.iter().position(|&b| b == ind.binary).unwrap();
            let on = (mask >> pos) & 1 == 1;
            if on == ind.active_when {
                let (lo, hi) = match ind.sense {
                    Sense::Le => (-INF, ind.rhs),
                    Sense::Ge => (ind.rhs, INF),
                    Sense::Eq => (ind.rhs, ind.rhs),
                };
                lp.add_row(&ind.coeffs, lo, hi);
            }
        }
        let sol = solve_lp(&lp, DEFAULT_TOL).unwrap();
        if sol.status == LpStatus::Optimal {
            best = Some(best.map_or(sol.objective, |v: f64| v.min(sol.objective)));
        }
    }
    best
}
