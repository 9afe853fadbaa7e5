//! Decentralized access-policy design: per-user constrained models against
//! fixed peers and the best-response iteration to an equilibrium.
//!
//! Each user shares the full system state but picks its binary access action
//! independently. Holding the other users' randomized policies fixed turns
//! one user's problem into a constrained chain over the same states with two
//! actions, solvable by the same occupation-measure LP; cycling over users
//! can only improve the shared objective, so the iteration climbs to a fixed
//! point. Random restarts guard against poor local equilibria.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{stream, SystemTables};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::lp::{build_occupation_lp, recover_policy, solve_lp, LpStatus};
use crate::markov::{
    build_kernel, evaluate_policy, JointPolicy, PolicyEval, StateSpace, TransitionKernel,
};

/// Randomized binary access policy of one user: `mu_n[s][a_n]`,
/// `a_n in {0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPolicy {
    pub n_states: usize,
    rows: Vec<f64>,
}

impl LocalPolicy {
    /// Access with a constant probability in every state.
    pub fn constant(n_states: usize, access_prob: f64) -> LocalPolicy {
        let mut rows = vec![0.0; n_states * 2];
        for s in 0..n_states {
            rows[s * 2] = 1.0 - access_prob;
            rows[s * 2 + 1] = access_prob;
        }
        LocalPolicy { n_states, rows }
    }

    pub fn from_rows(n_states: usize, rows: Vec<f64>) -> Result<LocalPolicy> {
        if rows.len() != n_states * 2 {
            return Err(Error::InvalidArgument("local policy dimension mismatch".into()));
        }
        for s in 0..n_states {
            let p0 = rows[s * 2];
            let p1 = rows[s * 2 + 1];
            if !(p0 >= 0.0 && p1 >= 0.0) || (p0 + p1 - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "local policy row {s} is not a distribution"
                )));
            }
        }
        Ok(LocalPolicy { n_states, rows })
    }

    #[inline]
    pub fn prob(&self, s: usize, a_n: usize) -> f64 {
        self.rows[s * 2 + a_n]
    }

    pub fn access_prob(&self, s: usize) -> f64 {
        self.rows[s * 2 + 1]
    }

    pub fn max_abs_diff(&self, other: &LocalPolicy) -> f64 {
        self.rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Joint action from per-user binary decisions: `a = sum a_n 2^n`.
pub fn compose_action(decisions: &[u8]) -> usize {
    decisions
        .iter()
        .enumerate()
        .map(|(n, &d)| ((d & 1) as usize) << n)
        .sum()
}

/// Product joint policy `mu(a|s) = prod_n mu_n(a_n|s)`.
pub fn product_policy(policies: &[LocalPolicy], n_states: usize) -> Result<JointPolicy> {
    let n_users = policies.len();
    if n_users == 0 || policies.iter().any(|p| p.n_states != n_states) {
        return Err(Error::InvalidArgument("local policy set mismatch".into()));
    }
    let n_actions = 1usize << n_users;
    let mut rows = vec![0.0; n_states * n_actions];
    for s in 0..n_states {
        for a in 0..n_actions {
            let mut p = 1.0;
            for (n, policy) in policies.iter().enumerate() {
                p *= policy.prob(s, a >> n & 1);
            }
            rows[s * n_actions + a] = p;
        }
        // The product of distributions is a distribution up to rounding;
        // renormalize so downstream row checks stay exact.
        let sum: f64 = rows[s * n_actions..(s + 1) * n_actions].iter().sum();
        for a in 0..n_actions {
            rows[s * n_actions + a] /= sum;
        }
    }
    JointPolicy::from_rows(n_states, n_actions, rows)
}

/// One user's constrained model against fixed peers: a two-action kernel
/// plus marginalized reward and cost, obtained by averaging the joint model
/// over the other users' action distributions in each state.
pub struct BestResponseModel {
    pub kernel: TransitionKernel,
    pub reward: Vec<f64>,
    pub cost: Vec<f64>,
}

pub fn best_response_model(
    user: usize,
    policies: &[LocalPolicy],
    kernel: &TransitionKernel,
    reward: &[f64],
    cost: &[f64],
) -> Result<BestResponseModel> {
    let n_users = policies.len();
    let n_states = kernel.n_states;
    let n_actions = kernel.n_actions;
    if user >= n_users || n_actions != 1 << n_users {
        return Err(Error::InvalidArgument("best response dimensions mismatch".into()));
    }
    let mut p = vec![0.0; n_states * 2 * n_states];
    let mut r = vec![0.0; n_states * 2];
    let mut d = vec![0.0; n_states * 2];
    for s in 0..n_states {
        for a in 0..n_actions {
            let a_m = a >> user & 1;
            let mut weight = 1.0;
            for (n, policy) in policies.iter().enumerate() {
                if n != user {
                    weight *= policy.prob(s, a >> n & 1);
                }
            }
            if weight == 0.0 {
                continue;
            }
            r[s * 2 + a_m] += weight * reward[s * n_actions + a];
            d[s * 2 + a_m] += weight * cost[s * n_actions + a];
            let row = kernel.row(s, a);
            let out = &mut p[(s * 2 + a_m) * n_states..(s * 2 + a_m + 1) * n_states];
            for (dest, &q) in out.iter_mut().zip(row) {
                *dest += weight * q;
            }
        }
    }
    Ok(BestResponseModel {
        kernel: TransitionKernel::from_flat(n_states, 2, p)?,
        reward: r,
        cost: d,
    })
}

/// Optimal local policy for one user against fixed peers, by the
/// occupation-measure LP over its two-action model.
pub fn best_response(
    user: usize,
    policies: &[LocalPolicy],
    kernel: &TransitionKernel,
    reward: &[f64],
    cost: &[f64],
    eps_omega: f64,
) -> Result<LocalPolicy> {
    let model = best_response_model(user, policies, kernel, reward, cost)?;
    let problem = build_occupation_lp(&model.kernel, &model.reward, &model.cost, eps_omega)?;
    let solution = solve_lp(&problem)?;
    if solution.status != LpStatus::Optimal {
        return Err(Error::Lp(format!("{:?}", solution.status)));
    }
    let joint = recover_policy(&solution.x, kernel.n_states, 2)?;
    let rows = (0..kernel.n_states)
        .flat_map(|s| [joint.prob(s, 0), joint.prob(s, 1)])
        .collect();
    LocalPolicy::from_rows(kernel.n_states, rows)
}

/// One restart of the iteration.
#[derive(Debug, Clone)]
pub struct NashRun {
    pub policies: Vec<LocalPolicy>,
    /// Objective after each full sweep.
    pub trace: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
    pub sweeps: usize,
}

/// Result of the equilibrium iteration.
#[derive(Debug, Clone)]
pub struct NashResult {
    pub policies: Vec<LocalPolicy>,
    /// Long-run sum throughput of the returned policies.
    pub su_sum: f64,
    /// Delta-method standard error from the table Monte Carlo.
    pub su_sum_std_err: f64,
    /// Long-run primary throughput.
    pub pu_throughput: f64,
    /// Constraint consumption, independently evaluated through the joint
    /// chain.
    pub constraint_value: f64,
    /// Objective after each full sweep of the best run.
    pub trace: Vec<f64>,
    /// Which restart produced the returned policies.
    pub restart_index: usize,
    /// Whether that restart reached the fixed-point tolerance within the
    /// sweep cap.
    pub converged: bool,
    /// Sweeps used by the best run.
    pub sweeps: usize,
    pub eps_omega: f64,
    /// Every restart, in restart order.
    pub runs: Vec<NashRun>,
}

/// Fixed-point tolerance on the max-norm policy change per sweep.
pub const NASH_TOL: f64 = 1e-6;
/// Sweep cap per restart.
pub const NASH_MAX_SWEEPS: usize = 200;

struct Run {
    policies: Vec<LocalPolicy>,
    trace: Vec<f64>,
    converged: bool,
    sweeps: usize,
    eval: PolicyEval,
}

fn run_once(
    tables: &SystemTables,
    space: &StateSpace,
    kernel: &TransitionKernel,
    reward: &[f64],
    cost: &[f64],
    eps_omega: f64,
    restart: usize,
) -> Result<Run> {
    let n_users = tables.cfg.n_users;
    let n_states = space.len();
    let mut policies: Vec<LocalPolicy> = if restart == 0 {
        vec![LocalPolicy::constant(n_states, 0.5); n_users]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(tables.cfg.rng_seed);
        rng.set_stream(stream::nash_init(restart));
        (0..n_users)
            .map(|_| {
                let rows = (0..n_states)
                    .flat_map(|_| {
                        let p: f64 = rng.gen();
                        [1.0 - p, p]
                    })
                    .collect();
                LocalPolicy::from_rows(n_states, rows)
            })
            .collect::<Result<Vec<_>>>()?
    };

    let mut trace = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < NASH_MAX_SWEEPS {
        let before = policies.clone();
        for m in 0..n_users {
            policies[m] = best_response(m, &policies, kernel, reward, cost, eps_omega)?;
        }
        sweeps += 1;
        let joint = product_policy(&policies, n_states)?;
        let eval = evaluate_policy(kernel, &joint, reward, cost)?;
        trace.push(eval.value);
        let change = policies
            .iter()
            .zip(&before)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max);
        if change <= NASH_TOL {
            converged = true;
            break;
        }
    }
    let joint = product_policy(&policies, n_states)?;
    let eval = evaluate_policy(kernel, &joint, reward, cost)?;
    Ok(Run {
        policies,
        trace,
        converged,
        sweeps,
        eval,
    })
}

/// Best-response iteration over prebuilt (per-user rate rule) tables:
/// restarts from a half-access start and seeded random starts, keeps the
/// best run.
pub fn nash_solve_with_tables(tables: &SystemTables, restarts: usize) -> Result<NashResult> {
    if restarts == 0 {
        return Err(Error::InvalidArgument("restarts must be >= 1".into()));
    }
    let cfg = &tables.cfg;
    let space = StateSpace::new(cfg.n_users, cfg.arq_deadline)?;
    let kernel = build_kernel(&space, tables)?;
    let (reward, cost) = tables.reward_cost(&space);
    let eps_omega = tables.eps_omega(cfg.eps_pu);

    let outcomes: Vec<Result<Run>> = (0..restarts)
        .into_par_iter()
        .map(|restart| run_once(tables, &space, &kernel, &reward, &cost, eps_omega, restart))
        .collect();
    let mut runs = Vec::with_capacity(restarts);
    let mut best: Option<(usize, PolicyEval)> = None;
    for (idx, outcome) in outcomes.into_iter().enumerate() {
        let run = outcome?;
        let better = match &best {
            None => true,
            Some((_, incumbent)) => run.eval.value > incumbent.value,
        };
        if better {
            best = Some((idx, run.eval.clone()));
        }
        runs.push(NashRun {
            policies: run.policies,
            objective: run.eval.value,
            trace: run.trace,
            converged: run.converged,
            sweeps: run.sweeps,
        });
    }
    let (restart_index, eval) = best.expect("at least one restart");
    let su_sum_std_err = tables.value_std_err(&space, &eval.occupation);
    let winner = &runs[restart_index];
    Ok(NashResult {
        su_sum: eval.value,
        su_sum_std_err,
        pu_throughput: tables.t_pu_idle() - tables.r_p * eval.cost,
        constraint_value: eval.cost,
        policies: winner.policies.clone(),
        trace: winner.trace.clone(),
        restart_index,
        converged: winner.converged,
        sweeps: winner.sweeps,
        eps_omega,
        runs,
    })
}

/// Build per-user-rate tables and run the equilibrium iteration.
pub fn nash_solve(cfg: &ScenarioConfig, restarts: usize) -> Result<NashResult> {
    let tables = SystemTables::build(cfg, crate::channel::RateRule::PerUserNoise)?;
    nash_solve_with_tables(&tables, restarts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{Estimate, KnowledgeModel, OutageTables, RateTable};

    #[test]
    fn compose_action_examples() {
        assert_eq!(compose_action(&[0, 0]), 0);
        assert_eq!(compose_action(&[1, 1]), 3);
        assert_eq!(compose_action(&[1, 0, 1]), 5);
    }

    fn mock_tables() -> SystemTables {
        let cfg = ScenarioConfig {
            arq_deadline: 3,
            ..ScenarioConfig::reference_scenario(2)
        };
        let mut rates = RateTable::zeros(2);
        let mut outages = OutageTables::zeros(2);
        outages.rho_p = vec![0.4, 0.55, 0.6, 0.7];
        for a in 1..4usize {
            for phi in 0..4 {
                for n in 0..2 {
                    if a >> n & 1 == 1 {
                        rates.set(n, a, phi, 1.0);
                        // Solo transmissions do better; knowledge helps.
                        let base = if a.count_ones() == 1 { 0.3 } else { 0.45 };
                        let rho = base - if phi >> n & 1 == 1 { 0.1 } else { 0.0 };
                        outages.set_rho_s(n, a, phi, Estimate::exact(rho));
                    }
                }
            }
        }
        for a in 0..4 {
            for phi in 0..4usize {
                for n in 0..2 {
                    if phi >> n & 1 == 0 {
                        outages.set_rho_ps(n, a, phi, Estimate::exact(0.5));
                    }
                }
            }
        }
        SystemTables::from_raw(cfg, 2.0, KnowledgeModel::ForwardCancel, rates, outages).unwrap()
    }

    #[test]
    fn point_mass_peers_restrict_the_kernel() {
        let tables = mock_tables();
        let space = StateSpace::new(2, 3).unwrap();
        let kernel = build_kernel(&space, &tables).unwrap();
        let (reward, cost) = tables.reward_cost(&space);
        // User 1 idle with certainty: user 0's model reads actions {0, 1}.
        let policies = vec![
            LocalPolicy::constant(space.len(), 0.5),
            LocalPolicy::constant(space.len(), 0.0),
        ];
        let model = best_response_model(0, &policies, &kernel, &reward, &cost).unwrap();
        for s in 0..space.len() {
            for a_m in 0..2 {
                for s_next in 0..space.len() {
                    assert!(
                        (model.kernel.prob(s, a_m, s_next) - kernel.prob(s, a_m, s_next)).abs()
                            < 1e-15
                    );
                }
                assert!((model.reward[s * 2 + a_m] - reward[s * 4 + a_m]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn marginalization_matches_enumeration() {
        let tables = mock_tables();
        let space = StateSpace::new(2, 3).unwrap();
        let kernel = build_kernel(&space, &tables).unwrap();
        let (reward, cost) = tables.reward_cost(&space);
        // An arbitrary stochastic peer policy.
        let peer_rows: Vec<f64> = (0..space.len())
            .flat_map(|s| {
                let p = 0.1 + 0.8 * (s as f64 / space.len() as f64);
                [1.0 - p, p]
            })
            .collect();
        let policies = vec![
            LocalPolicy::constant(space.len(), 0.3),
            LocalPolicy::from_rows(space.len(), peer_rows).unwrap(),
        ];
        let model = best_response_model(0, &policies, &kernel, &reward, &cost).unwrap();
        for s in 0..space.len() {
            for a_m in 0..2usize {
                let mut want = 0.0;
                for a_other in 0..2usize {
                    let a = a_m | a_other << 1;
                    want += reward[s * 4 + a] * policies[1].prob(s, a_other);
                }
                assert!(
                    (model.reward[s * 2 + a_m] - want).abs() < 1e-12,
                    "s={s} a_m={a_m}"
                );
            }
        }
        model.kernel.check_stochastic(1e-12).unwrap();
    }

    #[test]
    fn zero_budget_forces_idle_best_response() {
        let tables = mock_tables();
        let space = StateSpace::new(2, 3).unwrap();
        let kernel = build_kernel(&space, &tables).unwrap();
        let (reward, cost) = tables.reward_cost(&space);
        let policies = vec![
            LocalPolicy::constant(space.len(), 0.0),
            LocalPolicy::constant(space.len(), 0.0),
        ];
        let br = best_response(0, &policies, &kernel, &reward, &cost, 0.0).unwrap();
        for s in 0..space.len() {
            assert!(br.access_prob(s) < 1e-12, "state {s} accesses");
        }
    }

    #[test]
    fn iteration_is_monotone_and_feasible() {
        let tables = mock_tables();
        let result = nash_solve_with_tables(&tables, 3).unwrap();
        assert!(result.converged);
        for w in result.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "trace decreased: {:?}", result.trace);
        }
        assert!(result.constraint_value <= result.eps_omega + 1e-9);
        assert!(result.su_sum > 0.0);
        // Fixed point: one more best response moves nothing.
        let space = StateSpace::new(2, 3).unwrap();
        let kernel = build_kernel(&space, &tables).unwrap();
        let (reward, cost) = tables.reward_cost(&space);
        for m in 0..2 {
            let again = best_response(
                m,
                &result.policies,
                &kernel,
                &reward,
                &cost,
                result.eps_omega,
            )
            .unwrap();
            assert!(
                again.max_abs_diff(&result.policies[m]) <= 1e-9,
                "user {m} moved at the fixed point"
            );
        }
    }

    #[test]
    fn some_joint_policies_have_no_product_form() {
        // Probability 0.3 on both-idle and 0.7 on both-access needs
        // nu1 + nu2 = 0.6 with nu1 * nu2 = 0.3; the discriminant is
        // negative, so no pair of independent binary decisions works.
        let disc: f64 = 0.6 * 0.6 - 4.0 * 0.3;
        assert!(disc < 0.0);
        let target = [0.3, 0.0, 0.0, 0.7];
        let mut best_gap = f64::INFINITY;
        let steps = 200;
        for i in 0..=steps {
            for j in 0..=steps {
                let nu1 = i as f64 / steps as f64;
                let nu2 = j as f64 / steps as f64;
                let product = [
                    nu1 * nu2,
                    (1.0 - nu1) * nu2,
                    nu1 * (1.0 - nu2),
                    (1.0 - nu1) * (1.0 - nu2),
                ];
                let gap = product
                    .iter()
                    .zip(&target)
                    .map(|(p, t)| (p - t).abs())
                    .fold(0.0, f64::max);
                best_gap = best_gap.min(gap);
            }
        }
        assert!(
            best_gap > 0.05,
            "a product policy approximated the non-factorizable target (gap {best_gap})"
        );
    }
}
