//! Access-scheme registry.
//!
//! Every end-to-end policy design (centralized, decentralized, the
//! no-cancelation baseline, the always-known bound, the single-user
//! comparison) sits behind [`AccessScheme`] and is selected by name at
//! runtime. Tables are built once per scheme and channel configuration and
//! can be reused across budget sweeps via [`TableKey`].

use crate::centralized::{
    omega_init, score_actions, solve_centralized_with_tables, upper_bound, Regime,
};
use crate::channel::{RateRule, SystemTables};
use crate::config::ScenarioConfig;
use crate::decentralized::nash_solve_with_tables;
use crate::error::{Error, Result};
use crate::markov::{build_kernel, phi_all_known, JointPolicy, StateSpace};
use crate::policy_io::StoredPolicy;

/// Solution summary shared by every scheme.
#[derive(Debug, Clone)]
pub struct SchemeSolution {
    pub scheme: &'static str,
    /// Users in the solved model (the single-user scheme shrinks this).
    pub n_users: usize,
    pub arq_deadline: usize,
    pub policy: StoredPolicy,
    pub su_sum: f64,
    pub su_sum_std_err: f64,
    pub pu_throughput: f64,
    pub constraint_value: f64,
    pub eps_omega: f64,
    /// Closed-form always-known bound on this scheme's tables.
    pub upper_bound: f64,
    pub regime: Option<Regime>,
    pub omega_init: Option<f64>,
    /// Best-response sweeps (0 for one-shot LP schemes).
    pub iterations: usize,
    pub converged: bool,
}

/// One interchangeable access-policy design.
pub trait AccessScheme: Send + Sync {
    /// Registry name (also the CLI spelling).
    fn name(&self) -> &'static str;

    /// Alternate CLI spellings.
    fn aliases(&self) -> &'static [&'static str] {
        &[]
    }

    /// One-line description.
    fn summary(&self) -> &'static str;

    /// Build this scheme's tables for a scenario.
    fn build_tables(&self, cfg: &ScenarioConfig) -> Result<SystemTables>;

    /// Solve on prebuilt tables. `cfg` may differ from the build
    /// configuration in budget and iteration settings only.
    fn solve(&self, cfg: &ScenarioConfig, tables: &SystemTables) -> Result<SchemeSolution>;

    /// Build tables and solve.
    fn solve_fresh(&self, cfg: &ScenarioConfig) -> Result<SchemeSolution> {
        let tables = self.build_tables(cfg)?;
        self.solve(cfg, &tables)
    }
}

/// Cache key identifying the tables a scheme would build for a scenario:
/// the scheme name plus every field the tables depend on. Budget, deadline,
/// and restart settings are deliberately excluded so sweeps over them can
/// share tables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TableKey {
    scheme: &'static str,
    n_users: usize,
    fic: bool,
    mc_samples: usize,
    rng_seed: u64,
    bits: Vec<u64>,
}

impl TableKey {
    pub fn new(scheme: &'static str, cfg: &ScenarioConfig) -> TableKey {
        let mut bits = vec![
            cfg.resolved_pu_rate().to_bits(),
            cfg.gbar_pp.to_bits(),
            cfg.rate_grid.min.to_bits(),
            cfg.rate_grid.max.to_bits(),
            cfg.rate_grid.step.to_bits(),
        ];
        bits.extend(cfg.gbar_ps.iter().map(|g| g.to_bits()));
        bits.extend(cfg.gbar_sp.iter().map(|g| g.to_bits()));
        for row in &cfg.gbar_ss {
            bits.extend(row.iter().map(|g| g.to_bits()));
        }
        TableKey {
            scheme,
            n_users: cfg.n_users,
            fic: cfg.fic_enabled,
            mc_samples: cfg.mc_samples,
            rng_seed: cfg.rng_seed,
            bits,
        }
    }
}

/// Rebind cached tables to a configuration that differs only in fields the
/// tables do not depend on.
fn retarget(
    scheme: &'static str,
    tables: &SystemTables,
    cfg: &ScenarioConfig,
) -> Result<SystemTables> {
    if TableKey::new(scheme, cfg) != TableKey::new(scheme, &tables.cfg) {
        return Err(Error::InvalidArgument(
            "tables were built for a different channel configuration".into(),
        ));
    }
    let mut out = tables.clone();
    out.cfg = cfg.clone();
    Ok(out)
}

fn centralized_solution(
    scheme: &'static str,
    cfg: &ScenarioConfig,
    tables: &SystemTables,
) -> Result<SchemeSolution> {
    let tables = retarget(scheme, tables, cfg)?;
    let sol = solve_centralized_with_tables(&tables)?;
    Ok(SchemeSolution {
        scheme,
        n_users: cfg.n_users,
        arq_deadline: cfg.arq_deadline,
        policy: StoredPolicy::Joint(sol.policy),
        su_sum: sol.su_sum,
        su_sum_std_err: sol.su_sum_std_err,
        pu_throughput: sol.pu_throughput,
        constraint_value: sol.constraint_value,
        eps_omega: sol.eps_omega,
        upper_bound: sol.upper_bound,
        regime: Some(sol.regime),
        omega_init: Some(sol.omega_init),
        iterations: 0,
        converged: true,
    })
}

/// Centralized design with forward interference cancelation: joint rate
/// rule, full tables, exact occupation-measure LP.
pub struct FicCentralized;

impl AccessScheme for FicCentralized {
    fn name(&self) -> &'static str {
        "fic-centralized"
    }

    fn aliases(&self) -> &'static [&'static str] {
        &["centralized"]
    }

    fn summary(&self) -> &'static str {
        "joint access policy by occupation-measure LP, receivers cancel decoded primary messages"
    }

    fn build_tables(&self, cfg: &ScenarioConfig) -> Result<SystemTables> {
        let mut cfg = cfg.clone();
        cfg.fic_enabled = true;
        SystemTables::build(&cfg, RateRule::CentralizedSum)
    }

    fn solve(&self, cfg: &ScenarioConfig, tables: &SystemTables) -> Result<SchemeSolution> {
        let mut cfg = cfg.clone();
        cfg.fic_enabled = true;
        centralized_solution(self.name(), &cfg, tables)
    }
}

/// Decentralized design: per-user rates (interferers as noise), independent
/// binary decisions, best-response iteration to an equilibrium.
pub struct FicDecentralized;

impl AccessScheme for FicDecentralized {
    fn name(&self) -> &'static str {
        "fic-decentralized"
    }

    fn aliases(&self) -> &'static [&'static str] {
        &["decentralized"]
    }

    fn summary(&self) -> &'static str {
        "independent per-user policies via best-response iteration over per-user CMDPs"
    }

    fn build_tables(&self, cfg: &ScenarioConfig) -> Result<SystemTables> {
        let mut cfg = cfg.clone();
        cfg.fic_enabled = true;
        SystemTables::build(&cfg, RateRule::PerUserNoise)
    }

    fn solve(&self, cfg: &ScenarioConfig, tables: &SystemTables) -> Result<SchemeSolution> {
        let mut cfg = cfg.clone();
        cfg.fic_enabled = true;
        let tables = retarget(self.name(), &tables.clone(), &cfg)?;
        let result = nash_solve_with_tables(&tables, cfg.nash_restarts)?;
        let space = StateSpace::new(cfg.n_users, cfg.arq_deadline)?;
        let kernel = build_kernel(&space, &tables)?;
        let scores = score_actions(&tables, result.eps_omega);
        let omega = omega_init(&tables, &kernel, &space, scores.best)?;
        let bound = upper_bound(&tables, result.eps_omega);
        Ok(SchemeSolution {
            scheme: self.name(),
            n_users: cfg.n_users,
            arq_deadline: cfg.arq_deadline,
            policy: StoredPolicy::Local(result.policies),
            su_sum: result.su_sum,
            su_sum_std_err: result.su_sum_std_err,
            pu_throughput: result.pu_throughput,
            constraint_value: result.constraint_value,
            eps_omega: result.eps_omega,
            upper_bound: bound.value,
            regime: Some(if result.eps_omega <= omega {
                Regime::Low
            } else {
                Regime::High
            }),
            omega_init: Some(omega),
            iterations: result.sweeps,
            converged: result.converged,
        })
    }
}

/// Centralized design without interference cancelation: the primary signal
/// always interferes and the knowledge state never advances.
pub struct NoFic;

impl AccessScheme for NoFic {
    fn name(&self) -> &'static str {
        "no-fic"
    }

    fn summary(&self) -> &'static str {
        "centralized design with primary cancelation disabled"
    }

    fn build_tables(&self, cfg: &ScenarioConfig) -> Result<SystemTables> {
        let mut cfg = cfg.clone();
        cfg.fic_enabled = false;
        // The all-unknown slice is the live model; the all-known slice backs
        // the reported bound. Intermediate knowledge states are unreachable.
        let phis = [0usize, phi_all_known(cfg.n_users)];
        SystemTables::build_phis(&cfg, RateRule::CentralizedSum, Some(&phis))
    }

    fn solve(&self, cfg: &ScenarioConfig, tables: &SystemTables) -> Result<SchemeSolution> {
        let mut cfg = cfg.clone();
        cfg.fic_enabled = false;
        centralized_solution(self.name(), &cfg, tables)
    }
}

/// Bound scheme: every receiver is assumed to already know the primary
/// message; solved with the same LP machinery for cross-checking against
/// the closed form.
pub struct PmKnown;

impl AccessScheme for PmKnown {
    fn name(&self) -> &'static str {
        "pm-known"
    }

    fn summary(&self) -> &'static str {
        "performance bound with the primary message known at every receiver"
    }

    fn build_tables(&self, cfg: &ScenarioConfig) -> Result<SystemTables> {
        SystemTables::build_already_known(cfg)
    }

    fn solve(&self, cfg: &ScenarioConfig, tables: &SystemTables) -> Result<SchemeSolution> {
        centralized_solution(self.name(), cfg, tables)
    }
}

/// Single-user comparison: restrict the scenario to user 0 and run the
/// centralized design.
pub struct OneSu;

impl AccessScheme for OneSu {
    fn name(&self) -> &'static str {
        "one-su"
    }

    fn summary(&self) -> &'static str {
        "centralized design for the network restricted to the first secondary user"
    }

    fn build_tables(&self, cfg: &ScenarioConfig) -> Result<SystemTables> {
        FicCentralized.build_tables(&cfg.restrict_to_user(0)?)
    }

    fn solve(&self, cfg: &ScenarioConfig, tables: &SystemTables) -> Result<SchemeSolution> {
        let sub = cfg.restrict_to_user(0)?;
        let mut cfg1 = sub;
        cfg1.fic_enabled = true;
        let sol = centralized_solution(self.name(), &cfg1, tables)?;
        Ok(SchemeSolution {
            scheme: self.name(),
            ..sol
        })
    }
}

/// Closed-form bound only: the state-independent policy that attains the
/// always-known bound, reported without an LP solve.
pub struct UpperBoundOnly;

impl AccessScheme for UpperBoundOnly {
    fn name(&self) -> &'static str {
        "upper-bound"
    }

    fn summary(&self) -> &'static str {
        "closed-form always-known bound and its state-independent policy"
    }

    fn build_tables(&self, cfg: &ScenarioConfig) -> Result<SystemTables> {
        let mut cfg = cfg.clone();
        cfg.fic_enabled = true;
        let phis = [phi_all_known(cfg.n_users)];
        SystemTables::build_phis(&cfg, RateRule::CentralizedSum, Some(&phis))
    }

    fn solve(&self, cfg: &ScenarioConfig, tables: &SystemTables) -> Result<SchemeSolution> {
        let mut cfg = cfg.clone();
        cfg.fic_enabled = true;
        let tables = retarget(self.name(), tables, &cfg)?;
        let eps_omega = tables.eps_omega(cfg.eps_pu);
        let bound = upper_bound(&tables, eps_omega);
        let space = StateSpace::new(cfg.n_users, cfg.arq_deadline)?;
        let mut policy = JointPolicy::idle(space.len(), cfg.n_actions());
        let mut row = vec![0.0; cfg.n_actions()];
        row[0] = 1.0 - bound.weight;
        row[bound.action] += bound.weight;
        for s in 0..space.len() {
            policy.set_row(s, &row);
        }
        let extra = tables.outages.rho_p[bound.action] - tables.outages.rho_p[0];
        let constraint = bound.weight * extra;
        let all_known = phi_all_known(cfg.n_users);
        let bound_var: f64 = (0..cfg.n_users)
            .filter(|&n| bound.action >> n & 1 == 1)
            .map(|n| {
                let se = tables.rates.rate(n, bound.action, all_known)
                    * tables.outages.rho_s_std_err(n, bound.action, all_known);
                se * se
            })
            .sum();
        Ok(SchemeSolution {
            scheme: self.name(),
            n_users: cfg.n_users,
            arq_deadline: cfg.arq_deadline,
            policy: StoredPolicy::Joint(policy),
            su_sum: bound.value,
            su_sum_std_err: bound.weight * bound_var.sqrt(),
            pu_throughput: tables.t_pu_idle() - tables.r_p * constraint,
            constraint_value: constraint,
            eps_omega,
            upper_bound: bound.value,
            regime: None,
            omega_init: None,
            iterations: 0,
            converged: true,
        })
    }
}

/// All registered schemes.
pub fn registry() -> &'static [&'static dyn AccessScheme] {
    static REGISTRY: [&dyn AccessScheme; 6] = [
        &FicCentralized,
        &FicDecentralized,
        &NoFic,
        &PmKnown,
        &OneSu,
        &UpperBoundOnly,
    ];
    &REGISTRY
}

/// Find a scheme by name or alias.
pub fn lookup(name: &str) -> Option<&'static dyn AccessScheme> {
    registry()
        .iter()
        .copied()
        .find(|s| s.name() == name || s.aliases().contains(&name))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_cfg(n: usize) -> ScenarioConfig {
        ScenarioConfig {
            mc_samples: 3_000,
            ..ScenarioConfig::reference_scenario(n)
        }
    }

    #[test]
    fn registry_resolves_names_and_aliases() {
        for scheme in registry() {
            assert!(lookup(scheme.name()).is_some());
            assert!(!scheme.summary().is_empty());
        }
        assert_eq!(lookup("centralized").unwrap().name(), "fic-centralized");
        assert_eq!(lookup("decentralized").unwrap().name(), "fic-decentralized");
        assert!(lookup("mystery").is_none());
    }

    #[test]
    fn table_keys_track_channel_fields_only() {
        let cfg = quick_cfg(2);
        let mut budget_change = cfg.clone();
        budget_change.eps_pu = 0.4;
        budget_change.nash_restarts = 9;
        budget_change.arq_deadline = 7;
        assert_eq!(
            TableKey::new("fic-centralized", &cfg),
            TableKey::new("fic-centralized", &budget_change)
        );
        let mut channel_change = cfg.clone();
        channel_change.gbar_sp[0] = 3.0;
        assert_ne!(
            TableKey::new("fic-centralized", &cfg),
            TableKey::new("fic-centralized", &channel_change)
        );
        assert_ne!(
            TableKey::new("fic-centralized", &cfg),
            TableKey::new("pm-known", &cfg)
        );
    }

    #[test]
    fn cached_tables_serve_multiple_budgets() {
        let cfg = quick_cfg(1);
        let scheme = lookup("fic-centralized").unwrap();
        let tables = scheme.build_tables(&cfg).unwrap();
        let mut last = -1.0;
        for eps in [0.05, 0.2, 0.5] {
            let mut point = cfg.clone();
            point.eps_pu = eps;
            let sol = scheme.solve(&point, &tables).unwrap();
            assert!(sol.su_sum >= last - 1e-9, "value decreased in the budget");
            assert!(sol.constraint_value <= sol.eps_omega + 1e-9);
            last = sol.su_sum;
        }
    }

    #[test]
    fn upper_bound_scheme_reports_the_closed_form() {
        let cfg = quick_cfg(2);
        let scheme = lookup("upper-bound").unwrap();
        let sol = scheme.solve_fresh(&cfg).unwrap();
        assert!(sol.su_sum > 0.0);
        assert_eq!(sol.su_sum, sol.upper_bound);
        match sol.policy {
            StoredPolicy::Joint(_) => {}
            _ => panic!("bound policy should be joint"),
        }
    }

    #[test]
    fn one_su_shrinks_the_model() {
        let cfg = quick_cfg(2);
        let sol = lookup("one-su").unwrap().solve_fresh(&cfg).unwrap();
        assert_eq!(sol.n_users, 1);
    }
}
