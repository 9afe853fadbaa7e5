//! Dense linear programming: a two-phase primal simplex with Bland's
//! anti-cycling rule, the occupation-measure program shared by both policy
//! designs, and policy recovery from an optimal occupation measure.
//!
//! The programs here are tiny (at most a few hundred variables), so a dense
//! tableau with deterministic pivoting buys exact vertex solutions and
//! reproducible recovered policies.

use crate::error::{Error, Result};
use crate::markov::{JointPolicy, TransitionKernel};

/// Pivot tolerance.
const EPS: f64 = 1e-9;
/// Phase-1 feasibility tolerance on the artificial objective.
const FEAS_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Maximize `objective . x` subject to `eq` rows (`a . x = b`), `ineq` rows
/// (`a . x <= b`), and `x >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub eq: Vec<(Vec<f64>, f64)>,
    pub ineq: Vec<(Vec<f64>, f64)>,
}

impl LpProblem {
    fn validate(&self) -> Result<()> {
        if self.objective.len() != self.n_vars {
            return Err(Error::InvalidArgument("objective length mismatch".into()));
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.objective) {
            return Err(Error::InvalidArgument("objective must be finite".into()));
        }
        for (row, b) in self.eq.iter().chain(&self.ineq) {
            if row.len() != self.n_vars {
                return Err(Error::InvalidArgument("constraint length mismatch".into()));
            }
            if !finite(row) || !b.is_finite() {
                return Err(Error::InvalidArgument("constraints must be finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal solution (empty unless optimal).
    pub x: Vec<f64>,
    /// Objective value (0 unless optimal).
    pub objective: f64,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    n_cols: usize,
    obj: Vec<f64>,
    obj_value: f64,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let pivot = self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v /= pivot;
        }
        self.rhs[row] /= pivot;
        for r in 0..self.rows.len() {
            if r == row {
                continue;
            }
            let factor = self.rows[r][col];
            if factor == 0.0 {
                continue;
            }
            for c in 0..self.n_cols {
                let delta = factor * self.rows[row][c];
                self.rows[r][c] -= delta;
            }
            self.rows[r][col] = 0.0;
            self.rhs[r] -= factor * self.rhs[row];
            if self.rhs[r].abs() < 1e-14 {
                self.rhs[r] = 0.0;
            }
        }
        let factor = self.obj[col];
        if factor != 0.0 {
            for c in 0..self.n_cols {
                self.obj[c] -= factor * self.rows[row][c];
            }
            self.obj[col] = 0.0;
            self.obj_value -= factor * self.rhs[row];
        }
        self.basis[row] = col;
    }

    /// Bland's rule: enter the lowest-index improving column, leave by the
    /// minimum ratio with the lowest basis index breaking ties. Returns the
    /// status of the current objective.
    fn run(&mut self, banned: &[bool]) -> Result<LpStatus> {
        let max_iters = 50_000 + 200 * (self.rows.len() + self.n_cols);
        for _ in 0..max_iters {
            let mut entering = None;
            for c in 0..self.n_cols {
                if !banned[c] && self.obj[c] > EPS {
                    entering = Some(c);
                    break;
                }
            }
            let Some(col) = entering else {
                return Ok(LpStatus::Optimal);
            };
            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][col];
                if a > EPS {
                    let ratio = self.rhs[r] / a;
                    let better = match leaving {
                        None => true,
                        Some((best_r, best_ratio)) => {
                            ratio < best_ratio - EPS
                                || (ratio < best_ratio + EPS && self.basis[r] < self.basis[best_r])
                        }
                    };
                    if better {
                        leaving = Some((r, ratio));
                    }
                }
            }
            let Some((row, _)) = leaving else {
                return Ok(LpStatus::Unbounded);
            };
            self.pivot(row, col);
        }
        Err(Error::Numeric("simplex iteration cap exceeded".into()))
    }
}

/// Solve a linear program to a vertex optimum. Infeasibility and
/// unboundedness are reported as statuses, never as errors.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution> {
    problem.validate()?;
    let n = problem.n_vars;

    // Assemble rows with nonnegative right-hand sides. A flipped <= row
    // becomes >=, which takes a surplus column and an artificial.
    enum Kind {
        LeSlack,
        GeSurplus,
        Artificial,
    }
    let mut rows: Vec<(Vec<f64>, f64, Kind)> = Vec::new();
    for (a, b) in &problem.eq {
        if *b < 0.0 {
            rows.push((a.iter().map(|v| -v).collect(), -b, Kind::Artificial));
        } else {
            rows.push((a.clone(), *b, Kind::Artificial));
        }
    }
    for (a, b) in &problem.ineq {
        if *b < 0.0 {
            rows.push((a.iter().map(|v| -v).collect(), -b, Kind::GeSurplus));
        } else {
            rows.push((a.clone(), *b, Kind::LeSlack));
        }
    }

    let m = rows.len();
    let n_extra = rows
        .iter()
        .map(|(_, _, k)| match k {
            Kind::LeSlack | Kind::Artificial => 1,
            Kind::GeSurplus => 2,
        })
        .sum::<usize>();
    let n_cols = n + n_extra;
    let mut tab = Tableau {
        rows: vec![vec![0.0; n_cols]; m],
        rhs: vec![0.0; m],
        basis: vec![0; m],
        n_cols,
        obj: vec![0.0; n_cols],
        obj_value: 0.0,
    };
    let mut artificial = vec![false; n_cols];
    let mut next_col = n;
    for (r, (a, b, kind)) in rows.iter().enumerate() {
        tab.rows[r][..n].copy_from_slice(a);
        tab.rhs[r] = *b;
        match kind {
            Kind::LeSlack => {
                tab.rows[r][next_col] = 1.0;
                tab.basis[r] = next_col;
                next_col += 1;
            }
            Kind::GeSurplus => {
                tab.rows[r][next_col] = -1.0;
                next_col += 1;
                tab.rows[r][next_col] = 1.0;
                artificial[next_col] = true;
                tab.basis[r] = next_col;
                next_col += 1;
            }
            Kind::Artificial => {
                tab.rows[r][next_col] = 1.0;
                artificial[next_col] = true;
                tab.basis[r] = next_col;
                next_col += 1;
            }
        }
    }

    // Phase 1: maximize minus the artificial sum, priced out so the basic
    // artificials start with zero reduced cost.
    if artificial.iter().any(|&x| x) {
        for c in 0..n_cols {
            if artificial[c] {
                tab.obj[c] = -1.0;
            }
        }
        for r in 0..m {
            if artificial[tab.basis[r]] {
                for c in 0..n_cols {
                    tab.obj[c] += tab.rows[r][c];
                }
                tab.obj_value += tab.rhs[r];
            }
        }
        let banned = vec![false; n_cols];
        match tab.run(&banned)? {
            LpStatus::Optimal => {}
            LpStatus::Unbounded => {
                return Err(Error::Numeric("phase-1 objective unbounded".into()))
            }
            LpStatus::Infeasible => unreachable!(),
        }
        // `obj_value` tracks the negated running objective, so it equals the
        // artificial sum here; feasibility means it vanished.
        if tab.obj_value > FEAS_EPS {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: Vec::new(),
                objective: 0.0,
            });
        }
        // Drive remaining artificials out of the basis; rows that cannot
        // pivot are redundant combinations of earlier rows and are dropped.
        let mut r = 0;
        while r < tab.rows.len() {
            if artificial[tab.basis[r]] {
                let col = (0..n_cols).find(|&c| !artificial[c] && tab.rows[r][c].abs() > EPS);
                match col {
                    Some(c) => tab.pivot(r, c),
                    None => {
                        tab.rows.remove(r);
                        tab.rhs.remove(r);
                        tab.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }

    // Phase 2: original objective priced against the current basis.
    tab.obj = vec![0.0; n_cols];
    tab.obj[..n].copy_from_slice(&problem.objective);
    tab.obj_value = 0.0;
    for r in 0..tab.rows.len() {
        let b = tab.basis[r];
        let c_b = if b < n { problem.objective[b] } else { 0.0 };
        if c_b != 0.0 {
            for c in 0..n_cols {
                tab.obj[c] -= c_b * tab.rows[r][c];
            }
            tab.obj_value -= c_b * tab.rhs[r];
        }
    }
    let status = tab.run(&artificial)?;
    if status == LpStatus::Unbounded {
        return Ok(LpSolution {
            status,
            x: Vec::new(),
            objective: 0.0,
        });
    }

    let mut x = vec![0.0; n];
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.rhs[r];
        }
    }
    for v in x.iter_mut() {
        if *v < 0.0 && *v > -EPS {
            *v = 0.0;
        }
    }
    // Residual check against the original constraints.
    let scale = |row: &[f64], b: f64| {
        row.iter().fold(b.abs().max(1.0), |acc, v| acc.max(v.abs()))
    };
    for (row, b) in &problem.eq {
        let lhs: f64 = row.iter().zip(&x).map(|(a, v)| a * v).sum();
        if (lhs - b).abs() > 1e-9 * scale(row, *b) {
            return Err(Error::Numeric(format!(
                "equality residual {} exceeds tolerance",
                (lhs - b).abs()
            )));
        }
    }
    for (row, b) in &problem.ineq {
        let lhs: f64 = row.iter().zip(&x).map(|(a, v)| a * v).sum();
        if lhs - b > 1e-9 * scale(row, *b) {
            return Err(Error::Numeric(format!(
                "inequality violated by {}",
                lhs - b
            )));
        }
    }
    let objective = problem
        .objective
        .iter()
        .zip(&x)
        .map(|(c, v)| c * v)
        .sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
    })
}

/// Build the occupation-measure program for an average-reward constrained
/// chain: maximize expected reward subject to the expected cost staying
/// within `budget`, flow balance at every state, unit total mass, and
/// `x(s, a) >= 0`. Variables are state-major: `x[s * n_actions + a]`.
pub fn build_occupation_lp(
    kernel: &TransitionKernel,
    reward: &[f64],
    cost: &[f64],
    budget: f64,
) -> Result<LpProblem> {
    let n_states = kernel.n_states;
    let n_actions = kernel.n_actions;
    let n_vars = n_states * n_actions;
    if reward.len() != n_vars || cost.len() != n_vars {
        return Err(Error::InvalidArgument(
            "reward/cost dimensions do not match the kernel".into(),
        ));
    }
    let mut eq = Vec::with_capacity(n_states + 1);
    for s_next in 0..n_states {
        let mut row = vec![0.0; n_vars];
        for a in 0..n_actions {
            row[s_next * n_actions + a] += 1.0;
        }
        for s in 0..n_states {
            for a in 0..n_actions {
                row[s * n_actions + a] -= kernel.prob(s, a, s_next);
            }
        }
        eq.push((row, 0.0));
    }
    eq.push((vec![1.0; n_vars], 1.0));
    let ineq = vec![(cost.to_vec(), budget)];
    Ok(LpProblem {
        n_vars,
        objective: reward.to_vec(),
        eq,
        ineq,
    })
}

/// Recover the randomized policy from an occupation measure:
/// `mu(a|s) = x(s,a) / sum_a x(s,a)`. States with no occupation get the
/// deterministic idle action, which never consumes constraint budget.
pub fn recover_policy(x: &[f64], n_states: usize, n_actions: usize) -> Result<JointPolicy> {
    if x.len() != n_states * n_actions {
        return Err(Error::InvalidArgument("occupation dimension mismatch".into()));
    }
    if x.iter().any(|&v| v < -1e-9) {
        return Err(Error::InvalidArgument(
            "occupation measure has negative entries".into(),
        ));
    }
    let total: f64 = x.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Numeric(format!(
            "occupation measure sums to {total}, expected 1"
        )));
    }
    let mut rows = vec![0.0; n_states * n_actions];
    for s in 0..n_states {
        let slice = &x[s * n_actions..(s + 1) * n_actions];
        let mass: f64 = slice.iter().sum();
        if mass > 1e-12 {
            for a in 0..n_actions {
                rows[s * n_actions + a] = slice[a].max(0.0) / mass;
            }
            // Exact renormalization after clamping.
            let row_sum: f64 = rows[s * n_actions..(s + 1) * n_actions].iter().sum();
            for a in 0..n_actions {
                rows[s * n_actions + a] /= row_sum;
            }
        } else {
            rows[s * n_actions] = 1.0;
        }
    }
    JointPolicy::from_rows(n_states, n_actions, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(
        n_vars: usize,
        objective: Vec<f64>,
        eq: Vec<(Vec<f64>, f64)>,
        ineq: Vec<(Vec<f64>, f64)>,
    ) -> LpProblem {
        LpProblem {
            n_vars,
            objective,
            eq,
            ineq,
        }
    }

    #[test]
    fn simple_bound() {
        let p = lp(1, vec![1.0], vec![], vec![(vec![1.0], 1.0)]);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-12);
        assert!((s.x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_duplicate_bounds_terminate() {
        let p = lp(
            1,
            vec![1.0],
            vec![],
            vec![(vec![1.0], 1.0), (vec![1.0], 0.5), (vec![1.0], 0.5)],
        );
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 0.5).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        // x = 1 and x <= 0.5 cannot both hold.
        let p = lp(1, vec![1.0], vec![(vec![1.0], 1.0)], vec![(vec![1.0], 0.5)]);
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Infeasible);
        // Maximize x with no upper bound.
        let p = lp(2, vec![1.0, 0.0], vec![], vec![(vec![0.0, 1.0], 1.0)]);
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_system_with_redundant_rows() {
        // x0 + x1 = 1 stated twice plus the sum through a scaled copy.
        let p = lp(
            2,
            vec![2.0, 1.0],
            vec![
                (vec![1.0, 1.0], 1.0),
                (vec![1.0, 1.0], 1.0),
                (vec![2.0, 2.0], 2.0),
            ],
            vec![],
        );
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-9);
        assert!((s.x[0] - 1.0).abs() < 1e-9);
    }

    /// Brute-force oracle: enumerate all vertices (n-subsets of active
    /// constraints among inequalities and nonnegativity bounds), keep the
    /// feasible ones, and return the best objective.
    fn vertex_enumeration_best(p: &LpProblem) -> Option<f64> {
        let n = p.n_vars;
        let mut rows: Vec<(Vec<f64>, f64)> = p.ineq.clone();
        for j in 0..n {
            let mut row = vec![0.0; n];
            row[j] = -1.0;
            rows.push((row, 0.0)); // -x_j <= 0
        }
        let m = rows.len();
        let mut best: Option<f64> = None;
        let mut combo: Vec<usize> = (0..n).collect();
        loop {
            // Solve the n x n active system.
            let mut a = Vec::with_capacity(n * n);
            let mut b = Vec::with_capacity(n);
            for &idx in &combo {
                a.extend_from_slice(&rows[idx].0);
                b.push(rows[idx].1);
            }
            if let Some(x) = solve_small(&mut a, &mut b, n) {
                let feasible = rows.iter().all(|(row, rhs)| {
                    row.iter().zip(&x).map(|(r, v)| r * v).sum::<f64>() <= rhs + 1e-7
                });
                if feasible {
                    let obj: f64 = p.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                    best = Some(best.map_or(obj, |b: f64| b.max(obj)));
                }
            }
            // Next combination.
            let mut i = n;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if combo[i] != i + m - n {
                    combo[i] += 1;
                    for j in i + 1..n {
                        combo[j] = combo[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    fn solve_small(a: &mut Vec<f64>, b: &mut Vec<f64>, n: usize) -> Option<Vec<f64>> {
        for col in 0..n {
            let mut pivot = col;
            let mut bestv = a[col * n + col].abs();
            for row in col + 1..n {
                if a[row * n + col].abs() > bestv {
                    bestv = a[row * n + col].abs();
                    pivot = row;
                }
            }
            if bestv < 1e-10 {
                return None;
            }
            if pivot != col {
                for j in 0..n {
                    a.swap(col * n + j, pivot * n + j);
                }
                b.swap(col, pivot);
            }
            for row in 0..n {
                if row == col {
                    continue;
                }
                let f = a[row * n + col] / a[col * n + col];
                if f != 0.0 {
                    for j in 0..n {
                        a[row * n + j] -= f * a[col * n + j];
                    }
                    b[row] -= f * b[col];
                }
            }
        }
        Some((0..n).map(|i| b[i] / a[i * n + i]).collect())
    }

    #[test]
    fn random_lps_match_vertex_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for case in 0..50 {
            let n = 10;
            let m = 5;
            let mut ineq: Vec<(Vec<f64>, f64)> = (0..m)
                .map(|_| {
                    (
                        (0..n).map(|_| rng.gen::<f64>()).collect(),
                        0.5 + rng.gen::<f64>(),
                    )
                })
                .collect();
            // Box constraints keep the polytope bounded.
            for j in 0..n {
                let mut row = vec![0.0; n];
                row[j] = 1.0;
                ineq.push((row, 2.0));
            }
            let objective: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 0.5).collect();
            let p = lp(n, objective, vec![], ineq);
            let got = solve_lp(&p).unwrap();
            assert_eq!(got.status, LpStatus::Optimal, "case {case}");
            let oracle = vertex_enumeration_best(&p).expect("feasible by construction");
            assert!(
                (got.objective - oracle).abs() < 1e-8,
                "case {case}: simplex {} vs oracle {oracle}",
                got.objective
            );
        }
    }

    #[test]
    fn solver_is_deterministic() {
        let p = lp(
            3,
            vec![1.0, 2.0, 1.5],
            vec![(vec![1.0, 1.0, 1.0], 1.0)],
            vec![(vec![1.0, 2.0, 0.5], 0.9)],
        );
        let a = solve_lp(&p).unwrap();
        let b = solve_lp(&p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn recover_policy_normalizes_and_defaults_to_idle() {
        // Two states, two actions; state 1 has no occupation.
        let x = vec![0.25, 0.75, 0.0, 0.0];
        let policy = recover_policy(&x, 2, 2).unwrap();
        assert!((policy.prob(0, 0) - 0.25).abs() < 1e-15);
        assert!((policy.prob(0, 1) - 0.75).abs() < 1e-15);
        assert_eq!(policy.prob(1, 0), 1.0);
        // Deterministic single-action measure recovers a deterministic row.
        let x = vec![0.0, 1.0, 0.0, 0.0];
        let policy = recover_policy(&x, 2, 2).unwrap();
        assert_eq!(policy.prob(0, 1), 1.0);
        // Mass must sum to one.
        assert!(recover_policy(&[0.1, 0.1, 0.0, 0.0], 2, 2).is_err());
    }
}
