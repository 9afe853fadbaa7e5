//! Slot-level Monte Carlo simulation of the primary HARQ process with
//! policy-driven secondary access, knowledge evolution, and throughput
//! accounting.
//!
//! Each slot draws fresh link SNRs, samples the access action from the
//! policy at the current `(t, phi)` state, scores the primary and secondary
//! decodes with the same decodability rule the tables use, and advances the
//! state: restart on primary success or deadline, otherwise the next ARQ
//! slot with any newly acquired knowledge.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{decodable, stream, DrawBlock, KnowledgeModel, Message, SystemTables};
use crate::decentralized::LocalPolicy;
use crate::error::{Error, Result};
use crate::markov::{phi_is_known, JointPolicy, StateSpace, SystemState};

/// Policy driving the simulation: one joint distribution per state, or one
/// binary policy per user sampled independently and composed.
pub enum PolicyRef<'a> {
    Joint(&'a JointPolicy),
    Local(&'a [LocalPolicy]),
}

/// Simulation output. All rates are bits/s/Hz averaged per counted slot;
/// half-widths are 95% batch-means confidence intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    /// Slots requested.
    pub slots: u64,
    /// Leading slots discarded before averaging.
    pub warmup: u64,
    /// Slots actually averaged.
    pub counted: u64,
    pub per_su_throughput: Vec<f64>,
    pub su_sum: f64,
    pub su_sum_half_width: f64,
    pub pu_throughput: f64,
    pub pu_half_width: f64,
    /// Mean of the per-slot primary outage indicator minus the idle outage:
    /// the empirical normalized degradation.
    pub constraint_value: f64,
    pub constraint_half_width: f64,
    /// Visit frequencies over the state space.
    pub state_freqs: Vec<f64>,
}

/// Visit frequencies of the report, ordered like [`StateSpace`].
pub fn empirical_state_occupancy(report: &SimReport) -> &[f64] {
    &report.state_freqs
}

/// Slots discarded to damp initial-state bias.
const WARMUP_SLOTS: u64 = 1_000;
/// Batches for the confidence intervals.
const CI_BATCHES: u64 = 100;
/// Channel draws are generated in chunks of this many slots.
const CHUNK: usize = 1 << 16;

struct BatchStats {
    batch_len: u64,
    sums: Vec<f64>,
    current: f64,
    seen: u64,
}

impl BatchStats {
    fn new(counted: u64) -> BatchStats {
        let batches = CI_BATCHES.min(counted.max(1));
        BatchStats {
            batch_len: (counted / batches).max(1),
            sums: Vec::with_capacity(batches as usize),
            current: 0.0,
            seen: 0,
        }
    }

    fn push(&mut self, v: f64) {
        self.current += v;
        self.seen += 1;
        if self.seen == self.batch_len {
            self.sums.push(self.current / self.batch_len as f64);
            self.current = 0.0;
            self.seen = 0;
        }
    }

    /// 95% half-width of the mean from the batch means.
    fn half_width(&self) -> f64 {
        let b = self.sums.len();
        if b < 2 {
            return f64::INFINITY;
        }
        let mean = self.sums.iter().sum::<f64>() / b as f64;
        let var =
            self.sums.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (b as f64 - 1.0);
        1.96 * (var / b as f64).sqrt()
    }
}

/// Run the simulator for `slots` slots. `run_seed` selects the simulation
/// streams on top of the scenario seed; identical inputs produce identical
/// reports.
pub fn simulate(
    policy: PolicyRef<'_>,
    tables: &SystemTables,
    slots: u64,
    run_seed: u64,
) -> Result<SimReport> {
    if slots == 0 {
        return Err(Error::InvalidArgument("slots must be >= 1".into()));
    }
    let cfg = &tables.cfg;
    let n = cfg.n_users;
    let space = StateSpace::new(n, cfg.arq_deadline)?;
    match &policy {
        PolicyRef::Joint(p) => {
            if p.n_states != space.len() || p.n_actions != cfg.n_actions() {
                return Err(Error::InvalidArgument(
                    "joint policy does not match the state space".into(),
                ));
            }
        }
        PolicyRef::Local(ps) => {
            if ps.len() != n || ps.iter().any(|p| p.n_states != space.len()) {
                return Err(Error::InvalidArgument(
                    "local policies do not match the state space".into(),
                ));
            }
        }
    }

    let run = run_seed & ((1 << 56) - 1);
    let mut action_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    action_rng.set_stream(stream::sim_policy(run));
    let uniform = |rng: &mut ChaCha8Rng| (rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0);

    let warmup = if slots > WARMUP_SLOTS { WARMUP_SLOTS } else { 0 };
    let counted = slots - warmup;
    let theta_p = f64::exp2(tables.r_p) - 1.0;
    let rho_p0 = tables.outages.rho_p[0];

    let mut su_acc = vec![0.0f64; n];
    let mut pu_acc = 0.0f64;
    let mut constraint_acc = 0.0f64;
    let mut visits = vec![0u64; space.len()];
    let mut su_stats = BatchStats::new(counted);
    let mut pu_stats = BatchStats::new(counted);
    let mut con_stats = BatchStats::new(counted);

    let mut state = SystemState { t: 1, phi: 0 };
    let mut slot = 0u64;
    while slot < slots {
        let chunk_len = CHUNK.min((slots - slot) as usize);
        let draws = DrawBlock::generate_range(cfg, stream::sim_channel(run), slot, chunk_len);
        for i in 0..chunk_len {
            let s_idx = space.index(state)?;
            let counted_slot = slot >= warmup;
            if counted_slot {
                visits[s_idx] += 1;
            }

            // Sample the joint action.
            let a = match &policy {
                PolicyRef::Joint(p) => {
                    let mut u = uniform(&mut action_rng);
                    let row = p.row(s_idx);
                    let mut chosen = cfg.n_actions() - 1;
                    for (action, &prob) in row.iter().enumerate() {
                        if u < prob {
                            chosen = action;
                            break;
                        }
                        u -= prob;
                    }
                    chosen
                }
                PolicyRef::Local(ps) => {
                    let mut a = 0usize;
                    for (user, p) in ps.iter().enumerate() {
                        if uniform(&mut action_rng) < p.access_prob(s_idx) {
                            a |= 1 << user;
                        }
                    }
                    a
                }
            };

            // Primary decode at the primary receiver.
            let interference: f64 = (0..n)
                .filter(|&m| a >> m & 1 == 1)
                .map(|m| draws.g_sp(i, m))
                .sum();
            let pu_success = draws.g_pp(i) >= theta_p * (1.0 + interference);

            // Secondary decodes and knowledge acquisition.
            let rates = tables.rates.user_rates(a, state.phi);
            let mut flips = 0usize;
            let mut slot_su = 0.0;
            for rx in 0..n {
                let knows = match tables.knowledge {
                    KnowledgeModel::ForwardCancel => phi_is_known(state.phi, rx),
                    KnowledgeModel::Disabled => false,
                    KnowledgeModel::AlreadyKnown => true,
                };
                let mut msgs: Vec<Message> = Vec::with_capacity(n + 1);
                let mut target = usize::MAX;
                for tx in 0..n {
                    if a >> tx & 1 == 1 {
                        if tx == rx {
                            target = msgs.len();
                        }
                        msgs.push(Message {
                            rate: rates[tx],
                            snr: draws.g_ss(i, tx, rx),
                        });
                    }
                }
                if a >> rx & 1 == 1 {
                    let mut own_msgs = msgs.clone();
                    if !knows {
                        own_msgs.push(Message {
                            rate: tables.r_p,
                            snr: draws.g_ps(i, rx),
                        });
                    }
                    if decodable(target, &own_msgs)? && counted_slot {
                        su_acc[rx] += rates[rx];
                        slot_su += rates[rx];
                    }
                }
                // Knowledge evolves for receivers that have not decoded the
                // ongoing message, active or not.
                if !phi_is_known(state.phi, rx) {
                    let acquire = match tables.knowledge {
                        KnowledgeModel::Disabled => false,
                        KnowledgeModel::AlreadyKnown => true,
                        KnowledgeModel::ForwardCancel => {
                            let mut pu_msgs = msgs;
                            pu_msgs.push(Message {
                                rate: tables.r_p,
                                snr: draws.g_ps(i, rx),
                            });
                            decodable(pu_msgs.len() - 1, &pu_msgs)?
                        }
                    };
                    if acquire {
                        flips |= 1 << rx;
                    }
                }
            }

            if counted_slot {
                let pu_slot = if pu_success { tables.r_p } else { 0.0 };
                let con_slot = if pu_success { 0.0 } else { 1.0 } - rho_p0;
                pu_acc += pu_slot;
                constraint_acc += con_slot;
                su_stats.push(slot_su);
                pu_stats.push(pu_slot);
                con_stats.push(con_slot);
            }

            // HARQ advance: success or deadline restarts with a fresh
            // message and void knowledge.
            state = if pu_success || state.t == cfg.arq_deadline {
                SystemState { t: 1, phi: 0 }
            } else {
                SystemState {
                    t: state.t + 1,
                    phi: state.phi | flips,
                }
            };
            slot += 1;
        }
    }

    let per_su: Vec<f64> = su_acc.iter().map(|v| v / counted as f64).collect();
    Ok(SimReport {
        slots,
        warmup,
        counted,
        su_sum: per_su.iter().sum(),
        per_su_throughput: per_su,
        su_sum_half_width: su_stats.half_width(),
        pu_throughput: pu_acc / counted as f64,
        pu_half_width: pu_stats.half_width(),
        constraint_value: constraint_acc / counted as f64,
        constraint_half_width: con_stats.half_width(),
        state_freqs: visits
            .iter()
            .map(|&v| v as f64 / counted as f64)
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{RateRule, SystemTables};
    use crate::config::ScenarioConfig;
    use crate::markov::{build_kernel, induced_chain, stationary_distribution};

    fn quick_tables(n: usize) -> SystemTables {
        let cfg = ScenarioConfig {
            mc_samples: 4_000,
            ..ScenarioConfig::reference_scenario(n)
        };
        SystemTables::build(&cfg, RateRule::CentralizedSum).unwrap()
    }

    #[test]
    fn idle_policy_reproduces_idle_primary_throughput() {
        let tables = quick_tables(1);
        let space = StateSpace::new(1, tables.cfg.arq_deadline).unwrap();
        let idle = JointPolicy::idle(space.len(), 2);
        let report = simulate(PolicyRef::Joint(&idle), &tables, 400_000, 0).unwrap();
        // Reference operating point: T_pu = 1.57 with every secondary idle.
        assert!(
            (report.pu_throughput - 1.57).abs() < 3.0 * report.pu_half_width.max(2e-3),
            "pu throughput {} +/- {}",
            report.pu_throughput,
            report.pu_half_width
        );
        assert_eq!(report.su_sum, 0.0);
        assert!(report.constraint_value.abs() < 5e-3);
    }

    #[test]
    fn reports_are_byte_identical() {
        let tables = quick_tables(2);
        let space = StateSpace::new(2, tables.cfg.arq_deadline).unwrap();
        let policy = JointPolicy::idle(space.len(), 4);
        let a = simulate(PolicyRef::Joint(&policy), &tables, 5_000, 7).unwrap();
        let b = simulate(PolicyRef::Joint(&policy), &tables, 5_000, 7).unwrap();
        assert_eq!(a, b);
        let c = simulate(PolicyRef::Joint(&policy), &tables, 5_000, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn occupancy_matches_stationary_distribution() {
        let cfg = ScenarioConfig {
            mc_samples: 4_000,
            arq_deadline: 2,
            ..ScenarioConfig::reference_scenario(1)
        };
        let tables = SystemTables::build(&cfg, RateRule::CentralizedSum).unwrap();
        let space = StateSpace::new(1, 2).unwrap();
        let idle = JointPolicy::idle(space.len(), 2);
        let report = simulate(PolicyRef::Joint(&idle), &tables, 1_000_000, 3).unwrap();
        let kernel = build_kernel(&space, &tables).unwrap();
        let chain = induced_chain(&kernel, &idle).unwrap();
        let pi = stationary_distribution(&chain, space.len()).unwrap();
        let freqs = empirical_state_occupancy(&report);
        assert!((freqs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for s in 0..space.len() {
            assert!(
                (freqs[s] - pi[s]).abs() < 1e-2,
                "state {s}: empirical {} vs analytic {}",
                freqs[s],
                pi[s]
            );
        }
    }

    #[test]
    fn local_policies_compose_per_user() {
        let tables = quick_tables(2);
        let space = StateSpace::new(2, tables.cfg.arq_deadline).unwrap();
        let locals = vec![
            LocalPolicy::constant(space.len(), 0.0),
            LocalPolicy::constant(space.len(), 0.0),
        ];
        let report = simulate(PolicyRef::Local(&locals), &tables, 50_000, 1).unwrap();
        assert_eq!(report.su_sum, 0.0);
        assert!((report.pu_throughput - tables.t_pu_idle()).abs() < 0.02);
    }

    #[test]
    fn knowledge_never_reverts_within_a_message() {
        // Indirect check: states with t = 1 must always carry phi = 0, and
        // the visit frequencies over a long run must sum to 1 (the state
        // index round-trip would fail on any K -> U transition).
        let tables = quick_tables(2);
        let space = StateSpace::new(2, tables.cfg.arq_deadline).unwrap();
        let mut policy = JointPolicy::idle(space.len(), 4);
        for s in 0..space.len() {
            policy.set_row(s, &[0.4, 0.3, 0.2, 0.1]);
        }
        let report = simulate(PolicyRef::Joint(&policy), &tables, 100_000, 2).unwrap();
        assert!((report.state_freqs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
