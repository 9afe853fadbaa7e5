//! Rate and outage tables indexed by `(user, action, knowledge state)`,
//! and the table-set builders used by the access schemes.

use rayon::prelude::*;

use super::outage::{pu_decode_fail_at, pu_outage, su_outage_at, Estimate};
use super::rates::{optimize_rates_centralized, optimize_rates_decentralized};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::markov::{phi_is_known, StateSpace};

/// Adapted transmission rates `R(n, a, phi)` in bits/s/Hz. Idle users carry
/// rate zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    pub n_users: usize,
    data: Vec<f64>,
}

impl RateTable {
    pub fn zeros(n_users: usize) -> RateTable {
        let cells = (1 << n_users) * (1 << n_users) * n_users;
        RateTable {
            n_users,
            data: vec![0.0; cells],
        }
    }

    #[inline]
    fn idx(&self, n: usize, a: usize, phi: usize) -> usize {
        (a * (1 << self.n_users) + phi) * self.n_users + n
    }

    #[inline]
    pub fn rate(&self, n: usize, a: usize, phi: usize) -> f64 {
        self.data[self.idx(n, a, phi)]
    }

    pub fn set(&mut self, n: usize, a: usize, phi: usize, rate: f64) {
        let i = self.idx(n, a, phi);
        self.data[i] = rate;
    }

    /// All users' rates under `(a, phi)`, indexed by user.
    pub fn user_rates(&self, a: usize, phi: usize) -> &[f64] {
        let base = (a * (1 << self.n_users) + phi) * self.n_users;
        &self.data[base..base + self.n_users]
    }
}

/// Outage probabilities and their Monte Carlo standard errors.
///
/// `rho_p[a]` is exact (closed form); `rho_s` is meaningful only for users
/// active under `a`; `rho_ps` only where the user does not yet know the
/// primary message.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageTables {
    pub n_users: usize,
    pub rho_p: Vec<f64>,
    rho_s: Vec<f64>,
    rho_s_se: Vec<f64>,
    rho_ps: Vec<f64>,
    rho_ps_se: Vec<f64>,
}

impl OutageTables {
    pub fn zeros(n_users: usize) -> OutageTables {
        let cells = (1 << n_users) * (1 << n_users) * n_users;
        OutageTables {
            n_users,
            rho_p: vec![0.0; 1 << n_users],
            rho_s: vec![0.0; cells],
            rho_s_se: vec![0.0; cells],
            rho_ps: vec![0.0; cells],
            rho_ps_se: vec![0.0; cells],
        }
    }

    #[inline]
    fn idx(&self, n: usize, a: usize, phi: usize) -> usize {
        (a * (1 << self.n_users) + phi) * self.n_users + n
    }

    #[inline]
    pub fn rho_s(&self, n: usize, a: usize, phi: usize) -> f64 {
        self.rho_s[self.idx(n, a, phi)]
    }

    #[inline]
    pub fn rho_s_std_err(&self, n: usize, a: usize, phi: usize) -> f64 {
        self.rho_s_se[self.idx(n, a, phi)]
    }

    #[inline]
    pub fn rho_ps(&self, n: usize, a: usize, phi: usize) -> f64 {
        self.rho_ps[self.idx(n, a, phi)]
    }

    #[inline]
    pub fn rho_ps_std_err(&self, n: usize, a: usize, phi: usize) -> f64 {
        self.rho_ps_se[self.idx(n, a, phi)]
    }

    pub fn set_rho_s(&mut self, n: usize, a: usize, phi: usize, est: Estimate) {
        let i = self.idx(n, a, phi);
        self.rho_s[i] = est.value;
        self.rho_s_se[i] = est.std_err;
    }

    pub fn set_rho_ps(&mut self, n: usize, a: usize, phi: usize, est: Estimate) {
        let i = self.idx(n, a, phi);
        self.rho_ps[i] = est.value;
        self.rho_ps_se[i] = est.std_err;
    }
}

/// Expected throughput of user `n` under `(a, phi)`:
/// `R(n,a,phi) * (1 - rho_s(n,a,phi))`, zero when idle.
pub fn expected_throughput(
    n: usize,
    a: usize,
    phi: usize,
    rates: &RateTable,
    outages: &OutageTables,
) -> f64 {
    if a >> n & 1 == 0 {
        return 0.0;
    }
    rates.rate(n, a, phi) * (1.0 - outages.rho_s(n, a, phi))
}

/// How secondary receivers relate to the primary message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnowledgeModel {
    /// Decode-and-cancel: a receiver that decodes the primary message strips
    /// it from later retransmissions.
    ForwardCancel,
    /// No cancelation: the primary signal always interferes.
    Disabled,
    /// Bound model: every receiver is treated as already knowing the
    /// primary message.
    AlreadyKnown,
}

/// Rate-selection rule used when building tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateRule {
    /// Joint search maximizing the sum throughput of the active users.
    CentralizedSum,
    /// Per-user search treating other secondaries as noise.
    PerUserNoise,
}

/// A complete, self-consistent table set for one scenario: resolved primary
/// rate, adapted secondary rates, and all outage probabilities.
#[derive(Debug, Clone)]
pub struct SystemTables {
    pub cfg: ScenarioConfig,
    pub r_p: f64,
    pub knowledge: KnowledgeModel,
    pub rates: RateTable,
    pub outages: OutageTables,
}

impl SystemTables {
    /// Build tables for every knowledge state.
    pub fn build(cfg: &ScenarioConfig, rule: RateRule) -> Result<SystemTables> {
        Self::build_phis(cfg, rule, None)
    }

    /// Build tables restricted to the given knowledge states; the other
    /// slices keep zero rates. Restricted builds back bound computations and
    /// knowledge-degenerate schemes whose chains never leave the built
    /// slices.
    pub fn build_phis(
        cfg: &ScenarioConfig,
        rule: RateRule,
        phis: Option<&[usize]>,
    ) -> Result<SystemTables> {
        cfg.validate()?;
        let r_p = cfg.resolved_pu_rate();
        let n_actions = cfg.n_actions();
        let n_phi = cfg.n_phi();
        let phis: Vec<usize> = match phis {
            Some(list) => list.to_vec(),
            None => (0..n_phi).collect(),
        };
        if phis.iter().any(|&p| p >= n_phi) {
            return Err(Error::InvalidArgument("knowledge state out of range".into()));
        }

        let mut rho_p = Vec::with_capacity(n_actions);
        for a in 0..n_actions {
            rho_p.push(pu_outage(a, cfg, r_p)?);
        }

        // Rate searches, one per (action, knowledge state).
        let mut pairs = Vec::new();
        for a in 1..n_actions {
            for &phi in &phis {
                pairs.push((a, phi));
            }
        }
        let searched: Vec<Result<(usize, usize, Vec<f64>)>> = pairs
            .par_iter()
            .map(|&(a, phi)| {
                let by_user = match rule {
                    RateRule::CentralizedSum => optimize_rates_centralized(a, phi, cfg, r_p)?,
                    RateRule::PerUserNoise => {
                        let mut v = vec![0.0; cfg.n_users];
                        for n in 0..cfg.n_users {
                            if a >> n & 1 == 1 {
                                v[n] = optimize_rates_decentralized(n, a, phi, cfg, r_p)?;
                            }
                        }
                        v
                    }
                };
                Ok((a, phi, by_user))
            })
            .collect();
        let mut rates = RateTable::zeros(cfg.n_users);
        for item in searched {
            let (a, phi, by_user) = item?;
            for n in 0..cfg.n_users {
                rates.set(n, a, phi, by_user[n]);
            }
        }

        // Own-message outages at the selected rates.
        let mut su_entries = Vec::new();
        for a in 1..n_actions {
            for &phi in &phis {
                for n in 0..cfg.n_users {
                    if a >> n & 1 == 1 {
                        su_entries.push((n, a, phi));
                    }
                }
            }
        }
        let su_results: Vec<Result<((usize, usize, usize), Estimate)>> = su_entries
            .par_iter()
            .map(|&(n, a, phi)| {
                let est = su_outage_at(n, a, phi, rates.user_rates(a, phi), r_p, cfg)?;
                Ok(((n, a, phi), est))
            })
            .collect();

        // Primary-decode failures wherever the message is still unknown,
        // for every action (idle included: the knowledge state evolves in
        // every slot).
        let mut ps_entries = Vec::new();
        for a in 0..n_actions {
            for phi in 0..n_phi {
                for n in 0..cfg.n_users {
                    if !phi_is_known(phi, n) {
                        ps_entries.push((n, a, phi));
                    }
                }
            }
        }
        let ps_results: Vec<Result<((usize, usize, usize), Estimate)>> = ps_entries
            .par_iter()
            .map(|&(n, a, phi)| {
                let est = pu_decode_fail_at(n, a, phi, rates.user_rates(a, phi), r_p, cfg)?;
                Ok(((n, a, phi), est))
            })
            .collect();

        let mut outages = OutageTables::zeros(cfg.n_users);
        outages.rho_p = rho_p;
        for item in su_results {
            let ((n, a, phi), est) = item?;
            outages.set_rho_s(n, a, phi, est);
        }
        for item in ps_results {
            let ((n, a, phi), est) = item?;
            outages.set_rho_ps(n, a, phi, est);
        }

        let knowledge = if cfg.fic_enabled {
            KnowledgeModel::ForwardCancel
        } else {
            KnowledgeModel::Disabled
        };
        Ok(SystemTables {
            cfg: cfg.clone(),
            r_p,
            knowledge,
            rates,
            outages,
        })
    }

    /// Bound table set: every receiver already knows the primary message.
    /// The all-known slice is built once and copied across every knowledge
    /// state, and the message is acquired with certainty.
    pub fn build_already_known(cfg: &ScenarioConfig) -> Result<SystemTables> {
        let all_known = cfg.n_phi() - 1;
        let base = Self::build_phis(cfg, RateRule::CentralizedSum, Some(&[all_known]))?;
        let mut tables = base;
        for a in 0..cfg.n_actions() {
            for phi in 0..cfg.n_phi() {
                for n in 0..cfg.n_users {
                    if phi != all_known {
                        tables
                            .rates
                            .set(n, a, phi, tables.rates.rate(n, a, all_known));
                        let est = Estimate {
                            value: tables.outages.rho_s(n, a, all_known),
                            std_err: tables.outages.rho_s_std_err(n, a, all_known),
                        };
                        tables.outages.set_rho_s(n, a, phi, est);
                    }
                    if !phi_is_known(phi, n) {
                        tables.outages.set_rho_ps(n, a, phi, Estimate::exact(0.0));
                    }
                }
            }
        }
        tables.knowledge = KnowledgeModel::AlreadyKnown;
        Ok(tables)
    }

    /// Assemble a table set from externally computed parts. Intended for
    /// tests and for callers that estimate tables elsewhere; performs only
    /// dimension checks.
    pub fn from_raw(
        cfg: ScenarioConfig,
        r_p: f64,
        knowledge: KnowledgeModel,
        rates: RateTable,
        outages: OutageTables,
    ) -> Result<SystemTables> {
        if rates.n_users != cfg.n_users || outages.n_users != cfg.n_users {
            return Err(Error::InvalidArgument(
                "table dimensions do not match the configuration".into(),
            ));
        }
        if outages.rho_p.len() != cfg.n_actions() {
            return Err(Error::InvalidArgument("rho_p length mismatch".into()));
        }
        Ok(SystemTables {
            cfg,
            r_p,
            knowledge,
            rates,
            outages,
        })
    }

    /// Expected throughput of user `n` under `(a, phi)`.
    pub fn throughput(&self, n: usize, a: usize, phi: usize) -> f64 {
        expected_throughput(n, a, phi, &self.rates, &self.outages)
    }

    /// Sum throughput of the active users under `(a, phi)`.
    pub fn sum_throughput(&self, a: usize, phi: usize) -> f64 {
        (0..self.cfg.n_users)
            .map(|n| self.throughput(n, a, phi))
            .sum()
    }

    /// Primary throughput with every secondary idle.
    pub fn t_pu_idle(&self) -> f64 {
        self.r_p * (1.0 - self.outages.rho_p[0])
    }

    /// Normalized degradation budget for a tolerated fraction `eps_pu`.
    pub fn eps_omega(&self, eps_pu: f64) -> f64 {
        (1.0 - self.outages.rho_p[0]) * eps_pu
    }

    /// Per-(state, action) reward (sum throughput) and constraint cost
    /// (extra primary outage) vectors, state-major.
    pub fn reward_cost(&self, space: &StateSpace) -> (Vec<f64>, Vec<f64>) {
        let n_actions = self.cfg.n_actions();
        let mut reward = vec![0.0; space.len() * n_actions];
        let mut cost = vec![0.0; space.len() * n_actions];
        for (s, state) in space.states().iter().enumerate() {
            for a in 0..n_actions {
                reward[s * n_actions + a] = self.sum_throughput(a, state.phi);
                cost[s * n_actions + a] = self.outages.rho_p[a] - self.outages.rho_p[0];
            }
        }
        (reward, cost)
    }

    /// Delta-method standard error of an expected sum throughput under the
    /// occupation measure `x` (state-major), from the per-entry Monte Carlo
    /// errors. Treats `x` as fixed and table entries as independent, which
    /// is the dominant first-order term.
    pub fn value_std_err(&self, space: &StateSpace, x: &[f64]) -> f64 {
        let n_actions = self.cfg.n_actions();
        let n_phi = self.cfg.n_phi();
        // Aggregate occupation per (action, phi) across ARQ states.
        let mut weight = vec![0.0; n_actions * n_phi];
        for (s, state) in space.states().iter().enumerate() {
            for a in 0..n_actions {
                weight[a * n_phi + state.phi] += x[s * n_actions + a];
            }
        }
        let mut var = 0.0;
        for a in 1..n_actions {
            for phi in 0..n_phi {
                let w = weight[a * n_phi + phi];
                if w == 0.0 {
                    continue;
                }
                for n in 0..self.cfg.n_users {
                    if a >> n & 1 == 1 {
                        let se = self.rates.rate(n, a, phi) * self.outages.rho_s_std_err(n, a, phi);
                        var += (w * se) * (w * se);
                    }
                }
            }
        }
        var.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg(n: usize) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::reference_scenario(n);
        cfg.mc_samples = 4_000;
        cfg
    }

    #[test]
    fn build_produces_consistent_tables() {
        let cfg = small_cfg(2);
        let tables = SystemTables::build(&cfg, RateRule::CentralizedSum).unwrap();
        assert_eq!(tables.knowledge, KnowledgeModel::ForwardCancel);
        // Idle action: all rates zero.
        for n in 0..2 {
            for phi in 0..4 {
                assert_eq!(tables.rates.rate(n, 0, phi), 0.0);
                assert_eq!(tables.throughput(n, 0, phi), 0.0);
            }
        }
        // Active rates live inside the grid; outages are probabilities.
        for a in 1..4 {
            assert!(tables.outages.rho_p[a] >= tables.outages.rho_p[0]);
            for phi in 0..4 {
                for n in 0..2 {
                    let r = tables.rates.rate(n, a, phi);
                    if a >> n & 1 == 1 {
                        assert!(r >= cfg.rate_grid.min && r <= cfg.rate_grid.max);
                        let rho = tables.outages.rho_s(n, a, phi);
                        assert!((0.0..=1.0).contains(&rho));
                    } else {
                        assert_eq!(r, 0.0);
                    }
                    if !phi_is_known(phi, n) {
                        let ps = tables.outages.rho_ps(n, a, phi);
                        assert!((0.0..=1.0).contains(&ps));
                    }
                }
            }
        }
    }

    #[test]
    fn superset_actions_never_reduce_primary_outage() {
        let cfg = small_cfg(3);
        let r_p = cfg.resolved_pu_rate();
        for a in 0..cfg.n_actions() {
            let rho_a = pu_outage(a, &cfg, r_p).unwrap();
            for n in 0..3 {
                if a >> n & 1 == 0 {
                    let rho_sup = pu_outage(a | 1 << n, &cfg, r_p).unwrap();
                    assert!(rho_sup >= rho_a);
                }
            }
        }
    }

    #[test]
    fn already_known_copies_the_all_known_slice() {
        let cfg = small_cfg(2);
        let tables = SystemTables::build_already_known(&cfg).unwrap();
        assert_eq!(tables.knowledge, KnowledgeModel::AlreadyKnown);
        for a in 1..4 {
            for phi in 0..4 {
                for n in 0..2 {
                    assert_eq!(tables.rates.rate(n, a, phi), tables.rates.rate(n, a, 3));
                    assert_eq!(tables.outages.rho_s(n, a, phi), tables.outages.rho_s(n, a, 3));
                    if !phi_is_known(phi, n) {
                        assert_eq!(tables.outages.rho_ps(n, a, phi), 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn disabled_cancelation_pins_rho_ps_to_one() {
        let mut cfg = small_cfg(2);
        cfg.fic_enabled = false;
        let tables = SystemTables::build_phis(&cfg, RateRule::CentralizedSum, Some(&[0])).unwrap();
        assert_eq!(tables.knowledge, KnowledgeModel::Disabled);
        for a in 0..4 {
            for phi in 0..4 {
                for n in 0..2 {
                    if !phi_is_known(phi, n) {
                        assert_eq!(tables.outages.rho_ps(n, a, phi), 1.0);
                    }
                }
            }
        }
    }

    #[test]
    fn expected_throughput_is_rate_times_success() {
        let mut rates = RateTable::zeros(1);
        let mut outages = OutageTables::zeros(1);
        rates.set(0, 1, 0, 2.0);
        outages.set_rho_s(
            0,
            1,
            0,
            Estimate {
                value: 0.25,
                std_err: 0.0,
            },
        );
        assert_eq!(expected_throughput(0, 1, 0, &rates, &outages), 1.5);
        assert_eq!(expected_throughput(0, 0, 0, &rates, &outages), 0.0);
    }
}
