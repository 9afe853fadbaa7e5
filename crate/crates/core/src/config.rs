//! Scenario configuration: channel means, protocol parameters, Monte Carlo
//! settings, and the flat key-value config file format.

use crate::error::{Error, Result};

/// Hard cap on the number of secondary users; joint actions are enumerated
/// as bitmasks so the state and action spaces grow as `2^N`.
pub const MAX_USERS: usize = 8;

/// Rate grid used by the throughput-maximizing rate searches, in bits/s/Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl RateGrid {
    pub const DEFAULT: RateGrid = RateGrid {
        min: 0.05,
        max: 10.0,
        step: 0.05,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.step.is_finite()) {
            return Err(Error::Config("rate grid values must be finite".into()));
        }
        if self.min <= 0.0 {
            return Err(Error::Config("rate grid min must be > 0".into()));
        }
        if self.step <= 0.0 {
            return Err(Error::Config("rate grid step must be > 0".into()));
        }
        if self.max <= self.min {
            return Err(Error::Config("rate grid max must exceed min".into()));
        }
        Ok(())
    }

    /// Number of grid points (min, min+step, ..., up to max inclusive within
    /// floating-point slack).
    pub fn len(&self) -> usize {
        ((self.max - self.min) / self.step + 1.0 + 1e-9).floor() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.min + self.step * idx as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i)).collect()
    }
}

/// Primary-link transmission rate: fixed, or selected by maximizing the
/// idle-network primary throughput.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PuRate {
    Auto,
    Fixed(f64),
}

/// Full description of one network scenario.
///
/// All SNR fields are mean linear SNRs of Rayleigh-faded links; instantaneous
/// SNRs are exponentially distributed with these means.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    /// Number of secondary users N.
    pub n_users: usize,
    /// ARQ deadline T: maximum transmissions per primary message.
    pub arq_deadline: usize,
    /// Primary transmission rate in bits/s/Hz.
    pub pu_rate: PuRate,
    /// Tolerated fractional primary throughput degradation.
    pub eps_pu: f64,
    /// Mean SNR of PU_tx -> PU_rx.
    pub gbar_pp: f64,
    /// Mean SNR of PU_tx -> SU_rx(n), one entry per user.
    pub gbar_ps: Vec<f64>,
    /// Mean SNR of SU_tx(n) -> PU_rx, one entry per user.
    pub gbar_sp: Vec<f64>,
    /// Mean SNR of SU_tx(n) -> SU_rx(m); `gbar_ss[n][m]`, transmitter-major.
    pub gbar_ss: Vec<Vec<f64>>,
    /// Whether secondary receivers cancel a decoded primary message from
    /// later retransmissions.
    pub fic_enabled: bool,
    /// Monte Carlo samples per outage-table entry.
    pub mc_samples: usize,
    /// Base seed for every random stream in the artifact.
    pub rng_seed: u64,
    /// Rate search grid.
    pub rate_grid: RateGrid,
    /// Random restarts for the decentralized best-response iteration.
    pub nash_restarts: usize,
}

impl ScenarioConfig {
    /// Symmetric reference scenario used by the bundled configs and the
    /// validation suite: gbar_pp = 10, own links 5, PU->SU links 5,
    /// SU->PU links 2, cross links 3, T = 5, eps_pu = 0.2.
    pub fn reference_scenario(n_users: usize) -> ScenarioConfig {
        let gbar_ss = (0..n_users)
            .map(|n| {
                (0..n_users)
                    .map(|m| if n == m { 5.0 } else { 3.0 })
                    .collect()
            })
            .collect();
        ScenarioConfig {
            n_users,
            arq_deadline: 5,
            pu_rate: PuRate::Auto,
            eps_pu: 0.2,
            gbar_pp: 10.0,
            gbar_ps: vec![5.0; n_users],
            gbar_sp: vec![2.0; n_users],
            gbar_ss,
            fic_enabled: true,
            mc_samples: 200_000,
            rng_seed: 12345,
            rate_grid: RateGrid::DEFAULT,
            nash_restarts: 5,
        }
    }

    /// Restrict the scenario to a single secondary user, keeping that user's
    /// links. Used by the one-SU comparison scheme.
    pub fn restrict_to_user(&self, n: usize) -> Result<ScenarioConfig> {
        if n >= self.n_users {
            return Err(Error::InvalidArgument(format!(
                "user {n} out of range (N = {})",
                self.n_users
            )));
        }
        let mut cfg = self.clone();
        cfg.n_users = 1;
        cfg.gbar_ps = vec![self.gbar_ps[n]];
        cfg.gbar_sp = vec![self.gbar_sp[n]];
        cfg.gbar_ss = vec![vec![self.gbar_ss[n][n]]];
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_users < 1 || self.n_users > MAX_USERS {
            return Err(Error::Config(format!(
                "n_users must be in 1..={MAX_USERS}, got {}",
                self.n_users
            )));
        }
        if self.arq_deadline < 2 {
            return Err(Error::Config("arq_deadline must be >= 2".into()));
        }
        if let PuRate::Fixed(r) = self.pu_rate {
            if !r.is_finite() || r <= 0.0 {
                return Err(Error::Config("pu rate must be finite and > 0".into()));
            }
        }
        if !(0.0..=1.0).contains(&self.eps_pu) || !self.eps_pu.is_finite() {
            return Err(Error::Config("eps_pu must lie in [0, 1]".into()));
        }
        let n = self.n_users;
        if self.gbar_ps.len() != n || self.gbar_sp.len() != n || self.gbar_ss.len() != n {
            return Err(Error::Config("SNR vector lengths must equal n_users".into()));
        }
        let mut snrs: Vec<f64> = vec![self.gbar_pp];
        snrs.extend_from_slice(&self.gbar_ps);
        snrs.extend_from_slice(&self.gbar_sp);
        for row in &self.gbar_ss {
            if row.len() != n {
                return Err(Error::Config("gbar_ss must be an NxN matrix".into()));
            }
            snrs.extend_from_slice(row);
        }
        if snrs.iter().any(|&g| !g.is_finite() || g <= 0.0) {
            return Err(Error::Config("all mean SNRs must be finite and > 0".into()));
        }
        if self.mc_samples == 0 {
            return Err(Error::Config("mc_samples must be >= 1".into()));
        }
        if self.nash_restarts == 0 {
            return Err(Error::Config("nash_restarts must be >= 1".into()));
        }
        self.rate_grid.validate()
    }

    /// Number of joint actions `2^N`.
    pub fn n_actions(&self) -> usize {
        1 << self.n_users
    }

    /// Number of knowledge states `2^N`.
    pub fn n_phi(&self) -> usize {
        1 << self.n_users
    }

    /// Resolve the primary rate: either the configured value or the
    /// throughput-maximizing choice on a 0.01 grid.
    pub fn resolved_pu_rate(&self) -> f64 {
        match self.pu_rate {
            PuRate::Fixed(r) => r,
            PuRate::Auto => auto_pu_rate(self.gbar_pp).0,
        }
    }
}

/// Grid step used when picking the primary rate automatically.
pub const AUTO_RATE_STEP: f64 = 0.01;

/// Select the primary rate maximizing the idle-network primary throughput
/// `R * (1 - rho_p0(R))` on a 0.01-step grid. Returns `(rate, throughput)`.
///
/// With exponentially distributed SNR the idle outage has the closed form
/// `rho_p0(R) = 1 - exp(-(2^R - 1) / gbar_pp)`, so no sampling is involved.
pub fn auto_pu_rate(gbar_pp: f64) -> (f64, f64) {
    let mut best = (AUTO_RATE_STEP, 0.0);
    let mut idx = 1usize;
    loop {
        let r = AUTO_RATE_STEP * idx as f64;
        let t = r * (-(f64::exp2(r) - 1.0) / gbar_pp).exp();
        if t > best.1 {
            best = (r, t);
        }
        // The objective is unimodal in R; stop once well past the peak.
        if r > 1.0 && t < 0.5 * best.1 || r > 64.0 {
            return best;
        }
        idx += 1;
    }
}

/// Parse the flat `section.key = value` config format.
///
/// Lines are `key = value` with `#` comments; arrays are comma lists. The
/// recognized keys are:
///
/// ```text
/// system.n_users        integer
/// system.arq_deadline   integer
/// system.eps_pu         fraction in [0, 1]
/// system.fic            true | false          (default true)
/// system.nash_restarts  integer               (default 5)
/// pu.rate               auto | bits/s/Hz      (default auto)
/// channel.gbar_pp       mean SNR
/// channel.gbar_ps       scalar or N-entry comma list
/// channel.gbar_sp       scalar or N-entry comma list
/// channel.gbar_ss       N*N row-major comma list (transmitter-major), or
/// channel.gbar_ss_self  + channel.gbar_ss_cross as a shorthand
/// mc.samples            integer               (default 200000)
/// mc.seed               64-bit integer        (default 12345)
/// rates.grid            min:max:step          (default 0.05:10.0:0.05)
/// ```
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let map = parse_key_values(text)?;
    let get = |k: &str| map.iter().find(|(key, _)| key == k).map(|(_, v)| v.as_str());
    let require = |k: &str| {
        get(k).ok_or_else(|| Error::Config(format!("missing required key `{k}`")))
    };

    let n_users = parse_usize(require("system.n_users")?, "system.n_users")?;
    if n_users == 0 || n_users > MAX_USERS {
        return Err(Error::Config(format!(
            "system.n_users must be in 1..={MAX_USERS}"
        )));
    }
    let arq_deadline = parse_usize(require("system.arq_deadline")?, "system.arq_deadline")?;
    let eps_pu = parse_f64(require("system.eps_pu")?, "system.eps_pu")?;
    let fic_enabled = match get("system.fic") {
        Some(v) => parse_bool(v, "system.fic")?,
        None => true,
    };
    let nash_restarts = match get("system.nash_restarts") {
        Some(v) => parse_usize(v, "system.nash_restarts")?,
        None => 5,
    };
    let pu_rate = match get("pu.rate") {
        None => PuRate::Auto,
        Some("auto") => PuRate::Auto,
        Some(v) => PuRate::Fixed(parse_f64(v, "pu.rate")?),
    };
    let gbar_pp = parse_f64(require("channel.gbar_pp")?, "channel.gbar_pp")?;
    let gbar_ps = parse_vec(require("channel.gbar_ps")?, n_users, "channel.gbar_ps")?;
    let gbar_sp = parse_vec(require("channel.gbar_sp")?, n_users, "channel.gbar_sp")?;
    let gbar_ss = if let Some(v) = get("channel.gbar_ss") {
        let flat = parse_list(v, "channel.gbar_ss")?;
        if flat.len() != n_users * n_users {
            return Err(Error::Config(format!(
                "channel.gbar_ss needs {} entries, got {}",
                n_users * n_users,
                flat.len()
            )));
        }
        flat.chunks(n_users).map(|c| c.to_vec()).collect()
    } else {
        let own = parse_f64(require("channel.gbar_ss_self")?, "channel.gbar_ss_self")?;
        let cross = if n_users > 1 {
            parse_f64(require("channel.gbar_ss_cross")?, "channel.gbar_ss_cross")?
        } else {
            own
        };
        (0..n_users)
            .map(|i| {
                (0..n_users)
                    .map(|j| if i == j { own } else { cross })
                    .collect()
            })
            .collect()
    };
    let mc_samples = match get("mc.samples") {
        Some(v) => parse_usize(v, "mc.samples")?,
        None => 200_000,
    };
    let rng_seed = match get("mc.seed") {
        Some(v) => v
            .parse::<u64>()
            .map_err(|_| Error::Config(format!("mc.seed: bad integer `{v}`")))?,
        None => 12345,
    };
    let rate_grid = match get("rates.grid") {
        Some(v) => parse_grid(v)?,
        None => RateGrid::DEFAULT,
    };

    let cfg = ScenarioConfig {
        n_users,
        arq_deadline,
        pu_rate,
        eps_pu,
        gbar_pp,
        gbar_ps,
        gbar_sp,
        gbar_ss,
        fic_enabled,
        mc_samples,
        rng_seed,
        rate_grid,
        nash_restarts,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Parse a `min:max:step` rate grid spec.
pub fn parse_grid(text: &str) -> Result<RateGrid> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "rate grid must be min:max:step, got `{text}`"
        )));
    }
    let grid = RateGrid {
        min: parse_f64(parts[0], "grid min")?,
        max: parse_f64(parts[1], "grid max")?,
        step: parse_f64(parts[2], "grid step")?,
    };
    grid.validate()?;
    Ok(grid)
}

/// Split a key-value file into ordered `(key, value)` pairs.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected `key = value`", lineno + 1))
        })?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

fn parse_f64(v: &str, key: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("{key}: bad number `{v}`")))
}

fn parse_usize(v: &str, key: &str) -> Result<usize> {
    v.trim()
        .parse::<usize>()
        .map_err(|_| Error::Config(format!("{key}: bad integer `{v}`")))
}

fn parse_bool(v: &str, key: &str) -> Result<bool> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::Config(format!("{key}: bad boolean `{other}`"))),
    }
}

fn parse_list(v: &str, key: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse_f64(s, key)).collect()
}

fn parse_vec(v: &str, n: usize, key: &str) -> Result<Vec<f64>> {
    let list = parse_list(v, key)?;
    match list.len() {
        1 => Ok(vec![list[0]; n]),
        len if len == n => Ok(list),
        len => Err(Error::Config(format!(
            "{key}: expected 1 or {n} entries, got {len}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_scenario_is_valid() {
        for n in 1..=3 {
            ScenarioConfig::reference_scenario(n).validate().unwrap();
        }
    }

    #[test]
    fn auto_rate_matches_stationarity_condition() {
        // d/dR [R * exp(-(2^R-1)/g)] = 0  <=>  R * 2^R = g / ln 2.
        let (r, t) = auto_pu_rate(10.0);
        assert!(r > 0.0 && t > 0.0);
        let target = 10.0 / std::f64::consts::LN_2;
        let lhs = r * f64::exp2(r);
        assert!(
            (lhs - target).abs() < 0.15,
            "R*2^R = {lhs}, want about {target}"
        );
    }

    #[test]
    fn parses_round_trip_config() {
        let text = "
# comment
system.n_users = 2
system.arq_deadline = 5
system.eps_pu = 0.2
pu.rate = auto
channel.gbar_pp = 10
channel.gbar_ps = 5
channel.gbar_sp = 2, 2
channel.gbar_ss_self = 5
channel.gbar_ss_cross = 3
mc.samples = 1000
mc.seed = 7
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.n_users, 2);
        assert_eq!(cfg.gbar_ps, vec![5.0, 5.0]);
        assert_eq!(cfg.gbar_ss[0][1], 3.0);
        assert_eq!(cfg.gbar_ss[1][1], 5.0);
        assert_eq!(cfg.rng_seed, 7);
        assert_eq!(cfg.rate_grid, RateGrid::DEFAULT);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = ScenarioConfig::reference_scenario(2);
        cfg.gbar_pp = -1.0;
        assert!(cfg.validate().is_err());

        let mut cfg = ScenarioConfig::reference_scenario(2);
        cfg.arq_deadline = 1;
        assert!(cfg.validate().is_err());

        let mut cfg = ScenarioConfig::reference_scenario(2);
        cfg.rate_grid.step = 0.0;
        assert!(cfg.validate().is_err());

        assert!(parse_config("system.n_users = 2").is_err());
    }

    #[test]
    fn grid_len_counts_inclusive_points() {
        let g = RateGrid::DEFAULT;
        assert_eq!(g.len(), 200);
        assert!((g.value(g.len() - 1) - 10.0).abs() < 1e-9);
    }
}
