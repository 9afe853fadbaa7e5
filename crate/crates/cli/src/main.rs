//! Command-line driver: solve access policies, emit rate/outage tables,
//! simulate policies, sweep parameters to CSV, and run the validation
//! suite.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use underlay_core::centralized::Regime;
use underlay_core::channel::SystemTables;
use underlay_core::config::{self, auto_pu_rate, ScenarioConfig};
use underlay_core::error::Error;
use underlay_core::markov::phi_string;
use underlay_core::policy_io::{self, PolicyFile, StoredPolicy};
use underlay_core::scheme::{lookup, registry, AccessScheme, SchemeSolution, TableKey};
use underlay_core::simulator::{simulate, PolicyRef};
use underlay_core::validate;

#[derive(Parser)]
#[command(
    name = "underlay",
    about = "Access-policy design for secondary users under a retransmitting primary link",
    version
)]
struct Cli {
    /// Scenario config file (flat key = value format).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the Monte Carlo samples per table entry.
    #[arg(long, global = true)]
    samples: Option<usize>,

    /// Override the rate grid, as min:max:step.
    #[arg(long, global = true)]
    grid: Option<String>,

    /// Override the equilibrium restart count.
    #[arg(long, global = true)]
    restarts: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pick the primary rate maximizing the idle-network primary throughput.
    AutoRate,
    /// List the registered schemes.
    Schemes,
    /// Emit the adapted rate table.
    Rates(ModeOut),
    /// Emit the outage tables with standard errors.
    Tables(ModeOut),
    /// Solve an access policy and write it to a policy file.
    Solve(SolveArgs),
    /// Simulate a stored policy slot by slot.
    Simulate(SimArgs),
    /// Run a parameter sweep to CSV.
    Sweep(SweepArgs),
    /// Run the validation suite (exit 3 on failure).
    Validate(ValidateArgs),
}

#[derive(Args)]
struct ModeOut {
    /// Scheme name (see `schemes`).
    #[arg(long, default_value = "fic-centralized")]
    mode: String,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    /// Scheme name: centralized | decentralized | upper-bound | no-fic |
    /// pm-known | one-su (full names also accepted).
    #[arg(long)]
    mode: String,
    /// Policy file to write.
    #[arg(long, default_value = "policy.txt")]
    out: PathBuf,
}

#[derive(Args)]
struct SimArgs {
    /// Policy file produced by `solve`.
    #[arg(long)]
    policy: PathBuf,
    /// Slots to simulate.
    #[arg(long)]
    slots: u64,
    /// Simulation run seed (on top of the scenario seed).
    #[arg(long, default_value_t = 0)]
    sim_seed: u64,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep spec file.
    #[arg(long)]
    spec: PathBuf,
    /// CSV file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Comma list of criterion ids to run (default: all).
    #[arg(long)]
    only: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Config(_) | Error::InvalidArgument(_) | Error::Io(_) => 1u8,
                _ => 2u8,
            };
            ExitCode::from(code)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig, Error> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this subcommand".into()))?;
    let text = std::fs::read_to_string(path)?;
    let mut cfg = config::parse_config(&text)?;
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    if let Some(samples) = cli.samples {
        cfg.mc_samples = samples;
    }
    if let Some(grid) = &cli.grid {
        cfg.rate_grid = config::parse_grid(grid)?;
    }
    if let Some(restarts) = cli.restarts {
        cfg.nash_restarts = restarts;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn scheme_by_name(name: &str) -> Result<&'static dyn AccessScheme, Error> {
    lookup(name).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "unknown scheme `{name}`; known: {}",
            registry()
                .iter()
                .map(|s| s.name())
                .collect::<Vec<_>>()
                .join(", ")
        ))
    })
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match &cli.command {
        Command::AutoRate => {
            let cfg = load_config(&cli)?;
            let (rate, throughput) = auto_pu_rate(cfg.gbar_pp);
            println!("pu_rate = {rate}");
            println!("t_pu_idle = {throughput}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Schemes => {
            for scheme in registry() {
                println!("{:18} {}", scheme.name(), scheme.summary());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Rates(args) => {
            let cfg = load_config(&cli)?;
            let scheme = scheme_by_name(&args.mode)?;
            let tables = scheme.build_tables(&cfg)?;
            emit(args.out.as_deref(), &render_rates(scheme.name(), &tables))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Tables(args) => {
            let cfg = load_config(&cli)?;
            let scheme = scheme_by_name(&args.mode)?;
            let tables = scheme.build_tables(&cfg)?;
            emit(args.out.as_deref(), &render_outages(scheme.name(), &tables))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Solve(args) => {
            let cfg = load_config(&cli)?;
            let scheme = scheme_by_name(&args.mode)?;
            let sol = scheme.solve_fresh(&cfg)?;
            let file = PolicyFile {
                scheme: sol.scheme.to_string(),
                n_users: sol.n_users,
                arq_deadline: sol.arq_deadline,
                policy: sol.policy.clone(),
            };
            std::fs::write(&args.out, policy_io::render(&file)?)?;
            print!("{}", render_solution(&sol));
            println!("policy_file = {}", args.out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate(args) => {
            let cfg = load_config(&cli)?;
            let text = std::fs::read_to_string(&args.policy)?;
            let file = policy_io::parse(&text)?;
            let scheme = scheme_by_name(&file.scheme)?;
            let mut cfg = cfg;
            if scheme.name() == "one-su" {
                cfg = cfg.restrict_to_user(0)?;
            }
            if file.n_users != cfg.n_users || file.arq_deadline != cfg.arq_deadline {
                return Err(Error::Config(format!(
                    "policy file is for N={}, T={} but the config has N={}, T={}",
                    file.n_users, file.arq_deadline, cfg.n_users, cfg.arq_deadline
                )));
            }
            let tables = scheme.build_tables(&cfg)?;
            let report = match &file.policy {
                StoredPolicy::Joint(p) => {
                    simulate(PolicyRef::Joint(p), &tables, args.slots, args.sim_seed)?
                }
                StoredPolicy::Local(ps) => {
                    simulate(PolicyRef::Local(ps), &tables, args.slots, args.sim_seed)?
                }
            };
            let mut text = String::new();
            text.push_str(&format!("slots = {}\n", report.slots));
            text.push_str(&format!("warmup = {}\n", report.warmup));
            text.push_str(&format!("su_sum = {}\n", report.su_sum));
            text.push_str(&format!("su_sum_ci = {}\n", report.su_sum_half_width));
            let per: Vec<String> = report
                .per_su_throughput
                .iter()
                .map(|v| v.to_string())
                .collect();
            text.push_str(&format!("per_su = {}\n", per.join(", ")));
            text.push_str(&format!("pu_throughput = {}\n", report.pu_throughput));
            text.push_str(&format!("pu_ci = {}\n", report.pu_half_width));
            text.push_str(&format!("constraint_value = {}\n", report.constraint_value));
            text.push_str(&format!("constraint_ci = {}\n", report.constraint_half_width));
            emit(args.out.as_deref(), &text)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep(args) => {
            let cfg = load_config(&cli)?;
            let spec_text = std::fs::read_to_string(&args.spec)?;
            let spec = SweepSpec::parse(&spec_text)?;
            let csv = run_sweep(&cfg, &spec)?;
            std::fs::write(&args.out, csv)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate(args) => {
            let only = match &args.only {
                None => None,
                Some(list) => Some(
                    list.split(',')
                        .map(|s| {
                            s.trim().parse::<usize>().map_err(|_| {
                                Error::InvalidArgument(format!("bad criterion id `{s}`"))
                            })
                        })
                        .collect::<Result<Vec<_>, _>>()?,
                ),
            };
            let reports = validate::run_all(only.as_deref());
            let mut all_passed = true;
            for report in &reports {
                println!("{}", report.summary_line());
                if !report.passed {
                    all_passed = false;
                    for d in &report.details {
                        println!("    {d}");
                    }
                }
            }
            if all_passed {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(3))
            }
        }
    }
}

fn render_solution(sol: &SchemeSolution) -> String {
    let mut text = String::new();
    text.push_str(&format!("scheme = {}\n", sol.scheme));
    text.push_str(&format!("n_users = {}\n", sol.n_users));
    text.push_str(&format!("su_sum = {}\n", sol.su_sum));
    text.push_str(&format!("su_sum_std_err = {}\n", sol.su_sum_std_err));
    text.push_str(&format!("pu_throughput = {}\n", sol.pu_throughput));
    text.push_str(&format!("constraint_value = {}\n", sol.constraint_value));
    text.push_str(&format!("eps_omega = {}\n", sol.eps_omega));
    text.push_str(&format!("upper_bound = {}\n", sol.upper_bound));
    text.push_str(&format!(
        "regime = {}\n",
        sol.regime.map(|r| r.to_string()).unwrap_or_default()
    ));
    if let Some(omega) = sol.omega_init {
        text.push_str(&format!("omega_init = {omega}\n"));
    }
    text.push_str(&format!("iterations = {}\n", sol.iterations));
    text.push_str(&format!("converged = {}\n", sol.converged));
    text
}

fn render_rates(scheme: &str, tables: &SystemTables) -> String {
    let cfg = &tables.cfg;
    let mut out = String::new();
    out.push_str("# adapted rates (bits/s/Hz)\n");
    out.push_str(&format!("# scheme = {scheme}\n"));
    out.push_str(&format!("# pu_rate = {}\n", tables.r_p));
    out.push_str("n a phi rate\n");
    for a in 0..cfg.n_actions() {
        for phi in 0..cfg.n_phi() {
            for n in 0..cfg.n_users {
                out.push_str(&format!(
                    "{n} {a} {} {}\n",
                    phi_string(phi, cfg.n_users),
                    tables.rates.rate(n, a, phi)
                ));
            }
        }
    }
    out
}

fn render_outages(scheme: &str, tables: &SystemTables) -> String {
    let cfg = &tables.cfg;
    let mut out = String::new();
    out.push_str("# outage tables\n");
    out.push_str(&format!("# scheme = {scheme}\n"));
    out.push_str(&format!("# pu_rate = {}\n", tables.r_p));
    out.push_str("kind n a phi value std_err\n");
    for a in 0..cfg.n_actions() {
        out.push_str(&format!("rho_p - {a} - {} 0\n", tables.outages.rho_p[a]));
    }
    for a in 0..cfg.n_actions() {
        for phi in 0..cfg.n_phi() {
            let phi_s = phi_string(phi, cfg.n_users);
            for n in 0..cfg.n_users {
                if a >> n & 1 == 1 {
                    out.push_str(&format!(
                        "rho_s {n} {a} {phi_s} {} {}\n",
                        tables.outages.rho_s(n, a, phi),
                        tables.outages.rho_s_std_err(n, a, phi)
                    ));
                }
                if phi >> n & 1 == 0 {
                    out.push_str(&format!(
                        "rho_ps {n} {a} {phi_s} {} {}\n",
                        tables.outages.rho_ps(n, a, phi),
                        tables.outages.rho_ps_std_err(n, a, phi)
                    ));
                }
            }
        }
    }
    out
}

/// Parsed sweep specification.
struct SweepSpec {
    parameter: String,
    values: Vec<f64>,
    schemes: Vec<String>,
    sim_slots: u64,
}

impl SweepSpec {
    fn parse(text: &str) -> Result<SweepSpec, Error> {
        let pairs = config::parse_key_values(text)?;
        let get = |k: &str| {
            pairs
                .iter()
                .find(|(key, _)| key == k)
                .map(|(_, v)| v.as_str())
        };
        let parameter = get("sweep.parameter")
            .ok_or_else(|| Error::Config("missing sweep.parameter".into()))?
            .to_string();
        let values: Vec<f64> = get("sweep.values")
            .ok_or_else(|| Error::Config("missing sweep.values".into()))?
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad sweep value `{s}`")))
            })
            .collect::<Result<_, _>>()?;
        let schemes: Vec<String> = get("sweep.schemes")
            .ok_or_else(|| Error::Config("missing sweep.schemes".into()))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let sim_slots = match get("sweep.sim_slots") {
            Some(v) => v
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("bad sweep.sim_slots `{v}`")))?,
            None => 0,
        };
        if values.is_empty() || schemes.is_empty() {
            return Err(Error::Config("sweep needs values and schemes".into()));
        }
        for s in &schemes {
            scheme_by_name(s)?;
        }
        Ok(SweepSpec {
            parameter,
            values,
            schemes,
            sim_slots,
        })
    }
}

fn apply_parameter(cfg: &ScenarioConfig, parameter: &str, value: f64) -> Result<ScenarioConfig, Error> {
    let mut cfg = cfg.clone();
    match parameter {
        "eps_pu" => cfg.eps_pu = value,
        "gbar_sp_1" => cfg.gbar_sp[0] = value,
        "gbar_sp_all" => cfg.gbar_sp.iter_mut().for_each(|g| *g = value),
        "gbar_ps_1" => cfg.gbar_ps[0] = value,
        "gbar_ps_all" => cfg.gbar_ps.iter_mut().for_each(|g| *g = value),
        other => {
            return Err(Error::Config(format!(
                "unknown sweep parameter `{other}` (eps_pu, gbar_sp_1, gbar_sp_all, gbar_ps_1, gbar_ps_all)"
            )))
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

const CSV_HEADER: &str = "scheme,param_name,param_value,su_sum_lp,su_sum_sim,su_sum_ci,pu_throughput,constraint_value,upper_bound,regime,iterations,converged";

fn run_sweep(base: &ScenarioConfig, spec: &SweepSpec) -> Result<String, Error> {
    // One tables build per distinct (scheme, channel) key; budget sweeps
    // share a single build.
    let cache: Mutex<HashMap<TableKey, std::sync::Arc<SystemTables>>> =
        Mutex::new(HashMap::new());
    let points: Vec<(usize, &str, usize, f64)> = spec
        .schemes
        .iter()
        .enumerate()
        .flat_map(|(si, scheme)| {
            spec.values
                .iter()
                .enumerate()
                .map(move |(vi, &v)| (si, scheme.as_str(), vi, v))
        })
        .collect();

    let rows: Vec<Result<(usize, usize, String), Error>> = points
        .par_iter()
        .map(|&(si, scheme_name, vi, value)| {
            let scheme = scheme_by_name(scheme_name)?;
            let cfg = apply_parameter(base, &spec.parameter, value)?;
            let key = TableKey::new(scheme.name(), &cfg);
            let tables = {
                let hit = cache.lock().unwrap().get(&key).cloned();
                match hit {
                    Some(t) => t,
                    None => {
                        let built = std::sync::Arc::new(scheme.build_tables(&cfg)?);
                        cache
                            .lock()
                            .unwrap()
                            .entry(key)
                            .or_insert_with(|| built.clone())
                            .clone()
                    }
                }
            };
            let sol = scheme.solve(&cfg, &tables)?;
            let (sim_value, sim_ci) = if spec.sim_slots > 0 {
                // Per-point derived seed, decoupled from the table streams.
                let run_seed = (si as u64 * 1_000 + vi as u64 + 1)
                    .wrapping_mul(0x9E37_79B9_7F4A_7C15);
                let report = match &sol.policy {
                    StoredPolicy::Joint(p) => {
                        simulate(PolicyRef::Joint(p), &tables, spec.sim_slots, run_seed)?
                    }
                    StoredPolicy::Local(ps) => {
                        simulate(PolicyRef::Local(ps), &tables, spec.sim_slots, run_seed)?
                    }
                };
                (report.su_sum.to_string(), report.su_sum_half_width.to_string())
            } else {
                (String::new(), String::new())
            };
            let row = format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                sol.scheme,
                spec.parameter,
                value,
                sol.su_sum,
                sim_value,
                sim_ci,
                sol.pu_throughput,
                sol.constraint_value,
                sol.upper_bound,
                sol.regime.map(|r: Regime| r.to_string()).unwrap_or_default(),
                sol.iterations,
                sol.converged
            );
            Ok((si, vi, row))
        })
        .collect();

    let mut ordered: Vec<(usize, usize, String)> = Vec::with_capacity(rows.len());
    for row in rows {
        ordered.push(row?);
    }
    ordered.sort_by_key(|(si, vi, _)| (*si, *vi));
    let mut csv = String::from(CSV_HEADER);
    csv.push('\n');
    for (_, _, row) in ordered {
        csv.push_str(&row);
        csv.push('\n');
    }
    Ok(csv)
}
