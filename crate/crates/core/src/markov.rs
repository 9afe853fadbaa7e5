//! State space, transition kernels, policy-induced chains, and stationary
//! distributions.
//!
//! The system state is `(t, phi)`: the primary ARQ slot index `t` in `1..=T`
//! and the knowledge vector `phi` recording which secondary receivers have
//! decoded the current primary message. A fresh primary message always
//! starts at `(1, all-unknown)`, so that is the only state with `t = 1`.

use crate::channel::{OutageTables, SystemTables};
use crate::error::{Error, Result};

/// Knowledge vectors are bitmasks; bit `n` set means `SU_rx(n)` knows the
/// current primary message.
#[inline]
pub fn phi_is_known(phi: usize, n: usize) -> bool {
    phi >> n & 1 == 1
}

/// The all-known knowledge state for `n` users.
#[inline]
pub fn phi_all_known(n_users: usize) -> usize {
    (1 << n_users) - 1
}

/// Render a knowledge mask as a `U`/`K` string, user 0 first.
pub fn phi_string(phi: usize, n_users: usize) -> String {
    (0..n_users)
        .map(|n| if phi_is_known(phi, n) { 'K' } else { 'U' })
        .collect()
}

/// Parse a `U`/`K` string into a knowledge mask.
pub fn parse_phi(s: &str) -> Result<usize> {
    let mut phi = 0usize;
    for (n, c) in s.chars().enumerate() {
        match c {
            'K' => phi |= 1 << n,
            'U' => {}
            other => {
                return Err(Error::InvalidArgument(format!(
                    "bad knowledge symbol `{other}`"
                )))
            }
        }
    }
    Ok(phi)
}

/// Binary activity vector of a joint action, entry `n` for user `n`.
pub fn action_to_bits(a: usize, n_users: usize) -> Result<Vec<u8>> {
    if a >= 1 << n_users {
        return Err(Error::InvalidArgument(format!(
            "action {a} out of range for {n_users} users"
        )));
    }
    Ok((0..n_users).map(|n| (a >> n & 1) as u8).collect())
}

/// One system state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SystemState {
    /// ARQ slot index, 1-based.
    pub t: usize,
    /// Knowledge mask.
    pub phi: usize,
}

/// Enumerated state space with an index map.
///
/// Index 0 is the restart state `(1, all-unknown)`; the remaining states are
/// ordered by `t`, then `phi`, giving `2^N * (T - 1) + 1` states in total.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub n_users: usize,
    pub arq_deadline: usize,
    states: Vec<SystemState>,
}

impl StateSpace {
    pub fn new(n_users: usize, arq_deadline: usize) -> Result<StateSpace> {
        if n_users == 0 || arq_deadline < 2 {
            return Err(Error::InvalidArgument(
                "state space needs N >= 1 and T >= 2".into(),
            ));
        }
        let n_phi = 1usize << n_users;
        let mut states = vec![SystemState { t: 1, phi: 0 }];
        for t in 2..=arq_deadline {
            for phi in 0..n_phi {
                states.push(SystemState { t, phi });
            }
        }
        Ok(StateSpace {
            n_users,
            arq_deadline,
            states,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn states(&self) -> &[SystemState] {
        &self.states
    }

    pub fn state(&self, idx: usize) -> SystemState {
        self.states[idx]
    }

    /// Index of `(t, phi)`; rejects states violating the `t = 1` invariant.
    pub fn index(&self, state: SystemState) -> Result<usize> {
        if state.t == 1 {
            return if state.phi == 0 {
                Ok(0)
            } else {
                Err(Error::InvalidArgument(
                    "only the all-unknown state exists at t = 1".into(),
                ))
            };
        }
        if state.t < 2 || state.t > self.arq_deadline || state.phi >= 1 << self.n_users {
            return Err(Error::InvalidArgument(format!(
                "state ({}, {}) out of range",
                state.t, state.phi
            )));
        }
        Ok(1 + (state.t - 2) * (1 << self.n_users) + state.phi)
    }
}

/// Randomized joint access policy: `mu[s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPolicy {
    pub n_states: usize,
    pub n_actions: usize,
    rows: Vec<f64>,
}

impl JointPolicy {
    /// Deterministic all-idle policy.
    pub fn idle(n_states: usize, n_actions: usize) -> JointPolicy {
        let mut rows = vec![0.0; n_states * n_actions];
        for s in 0..n_states {
            rows[s * n_actions] = 1.0;
        }
        JointPolicy {
            n_states,
            n_actions,
            rows,
        }
    }

    pub fn from_rows(n_states: usize, n_actions: usize, rows: Vec<f64>) -> Result<JointPolicy> {
        if rows.len() != n_states * n_actions {
            return Err(Error::InvalidArgument("policy dimension mismatch".into()));
        }
        let policy = JointPolicy {
            n_states,
            n_actions,
            rows,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        for s in 0..self.n_states {
            let row = self.row(s);
            if row.iter().any(|&p| !(p >= 0.0) || p > 1.0 + 1e-12) {
                return Err(Error::InvalidArgument(format!(
                    "policy row {s} has entries outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "policy row {s} sums to {sum}, not 1"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.rows[s * self.n_actions..(s + 1) * self.n_actions]
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.rows[s * self.n_actions + a]
    }

    pub fn set_row(&mut self, s: usize, probs: &[f64]) {
        self.rows[s * self.n_actions..(s + 1) * self.n_actions].copy_from_slice(probs);
    }

    /// Largest entry-wise difference against another policy.
    pub fn max_abs_diff(&self, other: &JointPolicy) -> f64 {
        self.rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Transition kernel `P[s][a][s']`, row-stochastic in `s'` for every
/// `(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel {
    pub n_states: usize,
    pub n_actions: usize,
    p: Vec<f64>,
}

impl TransitionKernel {
    pub fn from_flat(n_states: usize, n_actions: usize, p: Vec<f64>) -> Result<TransitionKernel> {
        if p.len() != n_states * n_actions * n_states {
            return Err(Error::InvalidArgument("kernel dimension mismatch".into()));
        }
        Ok(TransitionKernel {
            n_states,
            n_actions,
            p,
        })
    }

    #[inline]
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.n_actions + a) * self.n_states;
        &self.p[base..base + self.n_states]
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.p[(s * self.n_actions + a) * self.n_states + s_next]
    }

    /// Verify every `(s, a)` row sums to one.
    pub fn check_stochastic(&self, tol: f64) -> Result<()> {
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let sum: f64 = self.row(s, a).iter().sum();
                if (sum - 1.0).abs() > tol {
                    return Err(Error::Numeric(format!(
                        "kernel row (s={s}, a={a}) sums to {sum}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Primary ARQ transition probability `Q[t -> t_next]` under outage
/// probability `rho_pa`: retransmit on outage until the deadline, restart on
/// success or timeout.
pub fn pu_arq_step(t: usize, t_next: usize, arq_deadline: usize, rho_pa: f64) -> f64 {
    if t == arq_deadline {
        if t_next == 1 {
            1.0
        } else {
            0.0
        }
    } else if t_next == 1 {
        1.0 - rho_pa
    } else if t_next == t + 1 {
        rho_pa
    } else {
        0.0
    }
}

/// Knowledge transition probability `Pr(phi_next | phi, a)`: the product of
/// per-user factors. A receiver that knows the message keeps it; an unknown
/// message is acquired with probability `1 - rho_ps(n, a, phi)`.
pub fn knowledge_step(
    phi: usize,
    phi_next: usize,
    a: usize,
    n_users: usize,
    outages: &OutageTables,
) -> f64 {
    let mut prob = 1.0;
    for n in 0..n_users {
        let factor = match (phi_is_known(phi, n), phi_is_known(phi_next, n)) {
            (true, true) => 1.0,
            (true, false) => 0.0,
            (false, false) => outages.rho_ps(n, a, phi),
            (false, true) => 1.0 - outages.rho_ps(n, a, phi),
        };
        if factor == 0.0 {
            return 0.0;
        }
        prob *= factor;
    }
    prob
}

/// Build the full transition kernel from the outage tables.
///
/// For `t_next >= 2` the ARQ and knowledge factors multiply; all restart
/// mass lands on `(1, all-unknown)` regardless of the current knowledge,
/// because a restart means a new primary message for which old knowledge is
/// void.
pub fn build_kernel(space: &StateSpace, tables: &SystemTables) -> Result<TransitionKernel> {
    let n_states = space.len();
    let n_actions = tables.cfg.n_actions();
    let n_phi = tables.cfg.n_phi();
    let deadline = space.arq_deadline;
    let mut p = vec![0.0; n_states * n_actions * n_states];
    for (s, state) in space.states().iter().enumerate() {
        for a in 0..n_actions {
            let rho_pa = tables.outages.rho_p[a];
            let row = &mut p[(s * n_actions + a) * n_states..(s * n_actions + a + 1) * n_states];
            let restart = pu_arq_step(state.t, 1, deadline, rho_pa);
            row[0] += restart;
            if state.t < deadline {
                let advance = pu_arq_step(state.t, state.t + 1, deadline, rho_pa);
                if advance > 0.0 {
                    for phi_next in 0..n_phi {
                        let k = knowledge_step(state.phi, phi_next, a, space.n_users, &tables.outages);
                        if k > 0.0 {
                            let idx = space.index(SystemState {
                                t: state.t + 1,
                                phi: phi_next,
                            })?;
                            row[idx] += advance * k;
                        }
                    }
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Numeric(format!(
                    "kernel row (s={s}, a={a}) sums to {sum}; tables are inconsistent"
                )));
            }
        }
    }
    TransitionKernel::from_flat(n_states, n_actions, p)
}

/// State-to-state chain of a policy: `M[s][s'] = sum_a mu(a|s) P[s][a][s']`,
/// row-major.
pub fn induced_chain(kernel: &TransitionKernel, policy: &JointPolicy) -> Result<Vec<f64>> {
    if policy.n_states != kernel.n_states || policy.n_actions != kernel.n_actions {
        return Err(Error::InvalidArgument(
            "policy and kernel dimensions do not match".into(),
        ));
    }
    let n = kernel.n_states;
    let mut m = vec![0.0; n * n];
    for s in 0..n {
        for a in 0..kernel.n_actions {
            let w = policy.prob(s, a);
            if w == 0.0 {
                continue;
            }
            let row = kernel.row(s, a);
            for s_next in 0..n {
                m[s * n + s_next] += w * row[s_next];
            }
        }
    }
    Ok(m)
}

/// Stationary distribution of a row-stochastic chain (row-major, `n x n`):
/// solves `pi M = pi`, `sum pi = 1` by a dense linear solve with one balance
/// equation replaced by the normalization row.
pub fn stationary_distribution(m: &[f64], n: usize) -> Result<Vec<f64>> {
    if m.len() != n * n || n == 0 {
        return Err(Error::InvalidArgument("chain dimension mismatch".into()));
    }
    // A = M^T - I with the last row replaced by ones; b = e_n.
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = m[j * n + i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..n {
        a[(n - 1) * n + j] = 1.0;
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let mut pi = solve_dense(&mut a, &mut b, n)?;
    for p in pi.iter_mut() {
        // Clamp solver dust; genuine negativity is caught by the residual.
        if *p < 0.0 && *p > -1e-12 {
            *p = 0.0;
        }
    }
    let sum: f64 = pi.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || pi.iter().any(|&p| p < 0.0) {
        return Err(Error::Numeric(
            "stationary solve produced an invalid distribution (chain may not be unichain)".into(),
        ));
    }
    for p in pi.iter_mut() {
        *p /= sum;
    }
    let residual = stationary_residual(m, n, &pi);
    if residual > 1e-10 {
        return Err(Error::Numeric(format!(
            "stationary residual {residual} exceeds 1e-10"
        )));
    }
    Ok(pi)
}

/// Max-norm residual of `pi M - pi`.
pub fn stationary_residual(m: &[f64], n: usize, pi: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..n {
        let mut v = -pi[j];
        for i in 0..n {
            v += pi[i] * m[i * n + j];
        }
        worst = worst.max(v.abs());
    }
    worst
}

/// Dense Gaussian elimination with partial pivoting; consumes its inputs.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Result<Vec<f64>> {
    for col in 0..n {
        let mut pivot = col;
        let mut best = a[col * n + col].abs();
        for row in col + 1..n {
            let v = a[row * n + col].abs();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best < 1e-13 {
            return Err(Error::Numeric("singular linear system".into()));
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[row * n + j] -= factor * a[col * n + j];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut v = b[col];
        for j in col + 1..n {
            v -= a[col * n + j] * x[j];
        }
        x[col] = v / a[col * n + col];
    }
    Ok(x)
}

/// Long-run performance of a policy under a kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEval {
    /// Expected per-slot reward (sum throughput).
    pub value: f64,
    /// Expected per-slot constraint cost (extra primary outage).
    pub cost: f64,
    /// Stationary state distribution.
    pub pi: Vec<f64>,
    /// Occupation measure `x(s, a) = pi(s) mu(a|s)`, state-major.
    pub occupation: Vec<f64>,
}

/// Evaluate a joint policy: stationary distribution of the induced chain,
/// then expected reward and cost (both state-major `n_states * n_actions`).
pub fn evaluate_policy(
    kernel: &TransitionKernel,
    policy: &JointPolicy,
    reward: &[f64],
    cost: &[f64],
) -> Result<PolicyEval> {
    let chain = induced_chain(kernel, policy)?;
    let pi = stationary_distribution(&chain, kernel.n_states)?;
    let n_actions = kernel.n_actions;
    let mut value = 0.0;
    let mut cost_value = 0.0;
    let mut occupation = vec![0.0; kernel.n_states * n_actions];
    for s in 0..kernel.n_states {
        for a in 0..n_actions {
            let x = pi[s] * policy.prob(s, a);
            occupation[s * n_actions + a] = x;
            value += x * reward[s * n_actions + a];
            cost_value += x * cost[s * n_actions + a];
        }
    }
    Ok(PolicyEval {
        value,
        cost: cost_value,
        pi,
        occupation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{KnowledgeModel, RateTable};
    use crate::config::ScenarioConfig;

    #[test]
    fn action_bits_round_trip() {
        assert_eq!(action_to_bits(0, 2).unwrap(), vec![0, 0]);
        assert_eq!(action_to_bits(3, 2).unwrap(), vec![1, 1]);
        let bits = action_to_bits(5, 3).unwrap();
        assert_eq!(bits, vec![1, 0, 1]);
        let back: usize = bits
            .iter()
            .enumerate()
            .map(|(n, &b)| (b as usize) << n)
            .sum();
        assert_eq!(back, 5);
        assert!(action_to_bits(4, 2).is_err());
    }

    #[test]
    fn state_space_size_formula() {
        for n in 1..=8 {
            for t in [2usize, 3, 5, 16, 64] {
                let space = StateSpace::new(n, t).unwrap();
                assert_eq!(space.len(), (1 << n) * (t - 1) + 1);
                // Round-trip indices.
                for (idx, &s) in space.states().iter().enumerate() {
                    assert_eq!(space.index(s).unwrap(), idx);
                }
            }
        }
        let space = StateSpace::new(2, 5).unwrap();
        assert!(space.index(SystemState { t: 1, phi: 2 }).is_err());
    }

    #[test]
    fn arq_step_matrix_rows() {
        let t_max = 5;
        let rho = 0.3;
        assert_eq!(pu_arq_step(t_max, 1, t_max, rho), 1.0);
        assert_eq!(pu_arq_step(2, 3, t_max, rho), rho);
        assert_eq!(pu_arq_step(2, 1, t_max, rho), 1.0 - rho);
        assert_eq!(pu_arq_step(2, 2, t_max, rho), 0.0);
        assert_eq!(pu_arq_step(2, 5, t_max, rho), 0.0);
    }

    /// Hand-built tables with chosen rho values for kernel tests.
    fn mock_tables(n_users: usize, rho_p: Vec<f64>, rho_ps: f64) -> SystemTables {
        let cfg = ScenarioConfig {
            arq_deadline: 2,
            ..ScenarioConfig::reference_scenario(n_users)
        };
        let rates = RateTable::zeros(n_users);
        let mut outages = crate::channel::OutageTables::zeros(n_users);
        outages.rho_p = rho_p;
        for a in 0..cfg.n_actions() {
            for phi in 0..cfg.n_phi() {
                for n in 0..n_users {
                    if !phi_is_known(phi, n) {
                        outages.set_rho_ps(
                            n,
                            a,
                            phi,
                            crate::channel::Estimate {
                                value: rho_ps,
                                std_err: 0.0,
                            },
                        );
                    }
                }
            }
        }
        SystemTables::from_raw(cfg, 2.0, KnowledgeModel::ForwardCancel, rates, outages).unwrap()
    }

    #[test]
    fn knowledge_step_factors() {
        let tables = mock_tables(2, vec![0.4, 0.5, 0.5, 0.6], 0.3);
        let o = &tables.outages;
        // Known stays known.
        assert_eq!(knowledge_step(3, 3, 0, 2, o), 1.0);
        // Known never reverts.
        assert_eq!(knowledge_step(3, 1, 0, 2, o), 0.0);
        assert_eq!(knowledge_step(1, 0, 0, 2, o), 0.0);
        // Both unknown: four outcomes from two independent decode events.
        let cases = [(0usize, 0.3 * 0.3), (1, 0.7 * 0.3), (2, 0.3 * 0.7), (3, 0.7 * 0.7)];
        let mut total = 0.0;
        for (phi_next, expect) in cases {
            let got = knowledge_step(0, phi_next, 1, 2, o);
            assert!((got - expect).abs() < 1e-15);
            total += got;
        }
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_restart_and_rows() {
        let tables = mock_tables(1, vec![0.4, 0.7], 0.25);
        let space = StateSpace::new(1, 2).unwrap();
        let kernel = build_kernel(&space, &tables).unwrap();
        kernel.check_stochastic(1e-12).unwrap();
        // From the deadline every action restarts.
        let s_deadline = space.index(SystemState { t: 2, phi: 1 }).unwrap();
        for a in 0..2 {
            assert_eq!(kernel.prob(s_deadline, a, 0), 1.0);
        }
        // Hand-composed rows from (1, U) under idle: restart w.p. 0.6,
        // advance and stay unknown w.p. 0.4*0.25, advance and learn w.p.
        // 0.4*0.75.
        let s_u2 = space.index(SystemState { t: 2, phi: 0 }).unwrap();
        let s_k2 = space.index(SystemState { t: 2, phi: 1 }).unwrap();
        assert!((kernel.prob(0, 0, 0) - 0.6).abs() < 1e-15);
        assert!((kernel.prob(0, 0, s_u2) - 0.1).abs() < 1e-15);
        assert!((kernel.prob(0, 0, s_k2) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn kernel_from_all_known_keeps_knowledge_until_restart() {
        let tables = mock_tables(2, vec![0.4, 0.5, 0.5, 0.6], 0.3);
        let cfg = ScenarioConfig {
            arq_deadline: 3,
            ..tables.cfg.clone()
        };
        let tables = SystemTables::from_raw(
            cfg,
            tables.r_p,
            tables.knowledge,
            tables.rates.clone(),
            tables.outages.clone(),
        )
        .unwrap();
        let space = StateSpace::new(2, 3).unwrap();
        let kernel = build_kernel(&space, &tables).unwrap();
        let s_k = space.index(SystemState { t: 2, phi: 3 }).unwrap();
        let s_k3 = space.index(SystemState { t: 3, phi: 3 }).unwrap();
        for a in 0..4 {
            let rho = tables.outages.rho_p[a];
            assert!((kernel.prob(s_k, a, s_k3) - rho).abs() < 1e-15);
            assert!((kernel.prob(s_k, a, 0) - (1.0 - rho)).abs() < 1e-15);
        }
    }

    #[test]
    fn stationary_of_swap_chain_is_uniform() {
        let m = vec![0.0, 1.0, 1.0, 0.0];
        let pi = stationary_distribution(&m, 2).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-12);
        assert!((pi[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stationary_matches_long_run_occupancy() {
        // Four-state chain with a restart column: unichain by construction.
        let m = vec![
            0.2, 0.5, 0.2, 0.1, //
            0.3, 0.1, 0.4, 0.2, //
            0.5, 0.0, 0.25, 0.25, //
            1.0, 0.0, 0.0, 0.0,
        ];
        let pi = stationary_distribution(&m, 4).unwrap();
        assert!(stationary_residual(&m, 4, &pi) <= 1e-10);
        // Empirical occupancy over 1e7 steps.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut counts = [0u64; 4];
        let mut s = 0usize;
        let steps = 10_000_000u64;
        for _ in 0..steps {
            counts[s] += 1;
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut next = 3;
            for j in 0..4 {
                acc += m[s * 4 + j];
                if u < acc {
                    next = j;
                    break;
                }
            }
            s = next;
        }
        for j in 0..4 {
            let freq = counts[j] as f64 / steps as f64;
            assert!(
                (freq - pi[j]).abs() < 1e-3,
                "state {j}: empirical {freq} vs analytic {}",
                pi[j]
            );
        }
    }

    #[test]
    fn induced_chain_selects_kernel_rows() {
        let tables = mock_tables(1, vec![0.4, 0.7], 0.25);
        let space = StateSpace::new(1, 2).unwrap();
        let kernel = build_kernel(&space, &tables).unwrap();
        let idle = JointPolicy::idle(space.len(), 2);
        let m = induced_chain(&kernel, &idle).unwrap();
        for s in 0..space.len() {
            for s_next in 0..space.len() {
                assert_eq!(m[s * space.len() + s_next], kernel.prob(s, 0, s_next));
            }
            let sum: f64 = m[s * space.len()..(s + 1) * space.len()].iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
        let pi = stationary_distribution(&m, space.len()).unwrap();
        assert!(stationary_residual(&m, space.len(), &pi) <= 1e-10);
    }

    #[test]
    fn policy_rows_must_be_distributions() {
        assert!(JointPolicy::from_rows(1, 2, vec![0.6, 0.5]).is_err());
        assert!(JointPolicy::from_rows(1, 2, vec![-0.1, 1.1]).is_err());
        assert!(JointPolicy::from_rows(1, 2, vec![0.25, 0.75]).is_ok());
    }
}
