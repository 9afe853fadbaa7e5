//! Centralized access-policy design: action scoring, the closed-form
//! always-known bound, the low-access-regime closed form, and the exact
//! occupation-measure LP optimum.

use crate::channel::SystemTables;
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::lp::{build_occupation_lp, recover_policy, solve_lp, LpProblem, LpStatus};
use crate::markov::{
    build_kernel, evaluate_policy, phi_all_known, JointPolicy, StateSpace, TransitionKernel,
};

/// Which side of the access-budget boundary a scenario falls on: `Low` when
/// the budget is at most what the access-only-when-all-know policy consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Low,
    High,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::Low => "low",
            Regime::High => "high",
        })
    }
}

/// Per-action scores used to pick the single access action of the
/// closed-form policies.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionScores {
    /// `v[a]` for `a >= 1`; index 0 is unused and zero.
    pub v: Vec<f64>,
    /// Argmax action, ties broken toward the lowest index.
    pub best: usize,
}

/// Score every non-idle action at the all-known knowledge state:
/// `v_a = <activity(a), throughputs> * min(budget / extra outage, 1)`.
/// A degenerate zero extra outage counts as an unconstrained ratio before
/// the clamp.
pub fn score_actions(tables: &SystemTables, eps_omega: f64) -> ActionScores {
    let n_actions = tables.cfg.n_actions();
    let all_known = phi_all_known(tables.cfg.n_users);
    let mut v = vec![0.0; n_actions];
    let mut best = 1;
    for a in 1..n_actions {
        let gain = tables.sum_throughput(a, all_known);
        let extra = tables.outages.rho_p[a] - tables.outages.rho_p[0];
        let ratio = if extra > 0.0 {
            (eps_omega / extra).min(1.0)
        } else {
            1.0
        };
        v[a] = gain * ratio;
        if v[a] > v[best] {
            best = a;
        }
    }
    ActionScores { v, best }
}

/// Closed-form bound on the long-run sum throughput when every receiver
/// already knows the primary message, and the state-independent policy that
/// attains it.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperBound {
    /// Selected access action.
    pub action: usize,
    /// Probability placed on that action (remainder is idle).
    pub weight: f64,
    /// Bound value in bits/s/Hz.
    pub value: f64,
}

pub fn upper_bound(tables: &SystemTables, eps_omega: f64) -> UpperBound {
    let scores = score_actions(tables, eps_omega);
    let m = scores.best;
    let all_known = phi_all_known(tables.cfg.n_users);
    let extra = tables.outages.rho_p[m] - tables.outages.rho_p[0];
    let weight = if extra > 0.0 {
        (eps_omega / extra).min(1.0)
    } else {
        1.0
    };
    UpperBound {
        action: m,
        weight,
        value: weight * tables.sum_throughput(m, all_known),
    }
}

/// The single-slot program behind the bound: maximize the per-slot sum
/// throughput over action distributions subject to the extra-outage budget
/// and total probability at most one. Two inequality rows over the non-idle
/// actions.
pub fn always_known_lp(tables: &SystemTables, eps_omega: f64) -> LpProblem {
    let n_actions = tables.cfg.n_actions();
    let all_known = phi_all_known(tables.cfg.n_users);
    let n_vars = n_actions - 1;
    let objective: Vec<f64> = (1..n_actions)
        .map(|a| tables.sum_throughput(a, all_known))
        .collect();
    let cost_row: Vec<f64> = (1..n_actions)
        .map(|a| tables.outages.rho_p[a] - tables.outages.rho_p[0])
        .collect();
    LpProblem {
        n_vars,
        objective,
        eq: vec![],
        ineq: vec![(cost_row, eps_omega), (vec![1.0; n_vars], 1.0)],
    }
}

/// Closed-form low-regime result.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRegime {
    /// Scaled policy: access `action` with probability `scale` in all-known
    /// states, idle elsewhere.
    pub policy: JointPolicy,
    pub action: usize,
    pub scale: f64,
    /// Budget consumed by the unscaled access-when-all-known policy.
    pub omega_init: f64,
    /// Closed-form value `budget * gain / extra outage`.
    pub closed_form_value: f64,
    /// Exact value of the scaled policy via its own induced chain.
    pub value: f64,
    /// Exact constraint consumption of the scaled policy. Scaling changes
    /// the induced chain, so this is re-measured rather than assumed equal
    /// to the budget.
    pub constraint_value: f64,
}

/// Budget consumed by the policy that plays `action` exactly in the
/// all-known states: `(rho_p[m] - rho_p[0]) * sum_t pi(t, all-known)` under
/// that policy's own chain.
pub fn omega_init(
    tables: &SystemTables,
    kernel: &TransitionKernel,
    space: &StateSpace,
    action: usize,
) -> Result<f64> {
    let policy = access_when_all_known(space, tables.cfg.n_actions(), action, 1.0);
    let (reward, cost) = tables.reward_cost(space);
    let eval = evaluate_policy(kernel, &policy, &reward, &cost)?;
    Ok(eval.cost)
}

fn access_when_all_known(
    space: &StateSpace,
    n_actions: usize,
    action: usize,
    scale: f64,
) -> JointPolicy {
    let all_known = phi_all_known(space.n_users);
    let mut policy = JointPolicy::idle(space.len(), n_actions);
    for (s, state) in space.states().iter().enumerate() {
        if state.phi == all_known {
            let mut row = vec![0.0; n_actions];
            row[action] = scale;
            row[0] = 1.0 - scale;
            policy.set_row(s, &row);
        }
    }
    policy
}

/// Closed-form optimal policy for budgets at or below `omega_init`: the
/// access-when-all-known policy scaled by `budget / omega_init`.
pub fn low_regime_policy(
    tables: &SystemTables,
    kernel: &TransitionKernel,
    space: &StateSpace,
    eps_omega: f64,
) -> Result<LowRegime> {
    if eps_omega < 0.0 {
        return Err(Error::InvalidArgument("budget must be >= 0".into()));
    }
    let scores = score_actions(tables, eps_omega);
    let m = scores.best;
    let omega = omega_init(tables, kernel, space, m)?;
    if eps_omega > omega {
        return Err(Error::NotLowRegime {
            eps_omega,
            omega_init: omega,
        });
    }
    let scale = if omega > 0.0 { eps_omega / omega } else { 0.0 };
    let policy = access_when_all_known(space, tables.cfg.n_actions(), m, scale);
    let (reward, cost) = tables.reward_cost(space);
    let eval = evaluate_policy(kernel, &policy, &reward, &cost)?;
    let extra = tables.outages.rho_p[m] - tables.outages.rho_p[0];
    let closed_form_value = if extra > 0.0 {
        eps_omega / extra * tables.sum_throughput(m, phi_all_known(space.n_users))
    } else {
        tables.sum_throughput(m, phi_all_known(space.n_users))
    };
    Ok(LowRegime {
        policy,
        action: m,
        scale,
        omega_init: omega,
        closed_form_value,
        value: eval.value,
        constraint_value: eval.cost,
    })
}

/// Full centralized solution.
#[derive(Debug, Clone)]
pub struct CentralizedSolution {
    pub policy: JointPolicy,
    /// Long-run sum throughput (LP objective, re-verified by policy
    /// evaluation).
    pub su_sum: f64,
    /// Delta-method standard error of `su_sum` from the table Monte Carlo.
    pub su_sum_std_err: f64,
    /// Long-run primary throughput `T_pu_idle - R_p * constraint_value`.
    pub pu_throughput: f64,
    /// Constraint consumption of the returned policy (independent policy
    /// evaluation, not the raw LP row).
    pub constraint_value: f64,
    pub regime: Regime,
    /// Closed-form always-known bound value.
    pub upper_bound: f64,
    /// Budget consumed by the unscaled access-when-all-known policy.
    pub omega_init: f64,
    /// Raw LP objective.
    pub lp_objective: f64,
    /// Normalized budget the solve ran with.
    pub eps_omega: f64,
}

/// Solve the centralized design on prebuilt tables.
pub fn solve_centralized_with_tables(tables: &SystemTables) -> Result<CentralizedSolution> {
    let cfg = &tables.cfg;
    let space = StateSpace::new(cfg.n_users, cfg.arq_deadline)?;
    let kernel = build_kernel(&space, tables)?;
    let (reward, cost) = tables.reward_cost(&space);
    let eps_omega = tables.eps_omega(cfg.eps_pu);

    let problem = build_occupation_lp(&kernel, &reward, &cost, eps_omega)?;
    let solution = solve_lp(&problem)?;
    if solution.status != LpStatus::Optimal {
        // The all-idle policy is always feasible, so this cannot be a
        // modeling artifact.
        return Err(Error::Lp(format!("{:?}", solution.status)));
    }
    let policy = recover_policy(&solution.x, space.len(), cfg.n_actions())?;
    let eval = evaluate_policy(&kernel, &policy, &reward, &cost)?;
    if (eval.value - solution.objective).abs() > 1e-6 * solution.objective.abs().max(1.0) {
        return Err(Error::Numeric(format!(
            "policy evaluation {} does not reproduce the LP objective {}",
            eval.value, solution.objective
        )));
    }

    let bound = upper_bound(tables, eps_omega);
    let omega = omega_init(tables, &kernel, &space, bound.action)?;
    let regime = if eps_omega <= omega {
        Regime::Low
    } else {
        Regime::High
    };
    let su_sum_std_err = tables.value_std_err(&space, &eval.occupation);
    Ok(CentralizedSolution {
        policy,
        su_sum: eval.value,
        su_sum_std_err,
        pu_throughput: tables.t_pu_idle() - tables.r_p * eval.cost,
        constraint_value: eval.cost,
        regime,
        upper_bound: bound.value,
        omega_init: omega,
        lp_objective: solution.objective,
        eps_omega,
    })
}

/// Build tables with the joint rate rule and solve the centralized design.
pub fn solve_centralized(cfg: &ScenarioConfig) -> Result<CentralizedSolution> {
    let tables = SystemTables::build(cfg, crate::channel::RateRule::CentralizedSum)?;
    solve_centralized_with_tables(&tables)
}
