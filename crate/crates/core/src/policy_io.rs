//! Text format for policy files.
//!
//! One row per state: state index, ARQ slot, knowledge string (user 0
//! first, `U`/`K`), then the action probabilities — the joint distribution
//! for a joint policy, or per-user `(idle, access)` pairs for local policy
//! sets. Floats are written with enough digits to round-trip exactly.

use std::fmt::Write as _;

use crate::decentralized::LocalPolicy;
use crate::error::{Error, Result};
use crate::markov::{phi_string, JointPolicy, StateSpace};

/// A stored policy of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum StoredPolicy {
    Joint(JointPolicy),
    Local(Vec<LocalPolicy>),
}

/// Header metadata carried by a policy file.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyFile {
    pub scheme: String,
    pub n_users: usize,
    pub arq_deadline: usize,
    pub policy: StoredPolicy,
}

pub fn render(file: &PolicyFile) -> Result<String> {
    let space = StateSpace::new(file.n_users, file.arq_deadline)?;
    let kind = match &file.policy {
        StoredPolicy::Joint(_) => "joint",
        StoredPolicy::Local(_) => "local",
    };
    let mut out = String::new();
    let _ = writeln!(out, "# access policy");
    let _ = writeln!(out, "# scheme = {}", file.scheme);
    let _ = writeln!(out, "# kind = {kind}");
    let _ = writeln!(out, "# n_users = {}", file.n_users);
    let _ = writeln!(out, "# arq_deadline = {}", file.arq_deadline);
    match &file.policy {
        StoredPolicy::Joint(policy) => {
            if policy.n_states != space.len() || policy.n_actions != 1 << file.n_users {
                return Err(Error::InvalidArgument(
                    "policy does not match the header dimensions".into(),
                ));
            }
            for (s, state) in space.states().iter().enumerate() {
                let _ = write!(out, "{s} {} {}", state.t, phi_string(state.phi, file.n_users));
                for a in 0..policy.n_actions {
                    let _ = write!(out, " {}", policy.prob(s, a));
                }
                out.push('\n');
            }
        }
        StoredPolicy::Local(policies) => {
            if policies.len() != file.n_users
                || policies.iter().any(|p| p.n_states != space.len())
            {
                return Err(Error::InvalidArgument(
                    "local policies do not match the header dimensions".into(),
                ));
            }
            for (s, state) in space.states().iter().enumerate() {
                let _ = write!(out, "{s} {} {}", state.t, phi_string(state.phi, file.n_users));
                for p in policies {
                    let _ = write!(out, " {} {}", p.prob(s, 0), p.prob(s, 1));
                }
                out.push('\n');
            }
        }
    }
    Ok(out)
}

pub fn parse(text: &str) -> Result<PolicyFile> {
    let mut scheme = None;
    let mut kind = None;
    let mut n_users = None;
    let mut arq_deadline = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                let (k, v) = (k.trim(), v.trim());
                match k {
                    "scheme" => scheme = Some(v.to_string()),
                    "kind" => kind = Some(v.to_string()),
                    "n_users" => {
                        n_users = Some(v.parse::<usize>().map_err(|_| {
                            Error::Config(format!("line {}: bad n_users", lineno + 1))
                        })?)
                    }
                    "arq_deadline" => {
                        arq_deadline = Some(v.parse::<usize>().map_err(|_| {
                            Error::Config(format!("line {}: bad arq_deadline", lineno + 1))
                        })?)
                    }
                    _ => {}
                }
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 4 {
            return Err(Error::Config(format!(
                "line {}: policy row needs index, t, phi, probabilities",
                lineno + 1
            )));
        }
        let idx: usize = fields[0]
            .parse()
            .map_err(|_| Error::Config(format!("line {}: bad state index", lineno + 1)))?;
        if idx != rows.len() {
            return Err(Error::Config(format!(
                "line {}: states must appear in order (saw {idx}, expected {})",
                lineno + 1,
                rows.len()
            )));
        }
        let probs: Vec<f64> = fields[3..]
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Config(format!("line {}: bad probability", lineno + 1)))
            })
            .collect::<Result<_>>()?;
        rows.push(probs);
    }
    let scheme = scheme.ok_or_else(|| Error::Config("missing scheme header".into()))?;
    let kind = kind.ok_or_else(|| Error::Config("missing kind header".into()))?;
    let n_users = n_users.ok_or_else(|| Error::Config("missing n_users header".into()))?;
    let arq_deadline =
        arq_deadline.ok_or_else(|| Error::Config("missing arq_deadline header".into()))?;
    let space = StateSpace::new(n_users, arq_deadline)?;
    if rows.len() != space.len() {
        return Err(Error::Config(format!(
            "expected {} state rows, found {}",
            space.len(),
            rows.len()
        )));
    }
    let policy = match kind.as_str() {
        "joint" => {
            let n_actions = 1usize << n_users;
            let mut flat = Vec::with_capacity(space.len() * n_actions);
            for (s, row) in rows.iter().enumerate() {
                if row.len() != n_actions {
                    return Err(Error::Config(format!(
                        "state {s}: expected {n_actions} probabilities, found {}",
                        row.len()
                    )));
                }
                flat.extend_from_slice(row);
            }
            StoredPolicy::Joint(JointPolicy::from_rows(space.len(), n_actions, flat)?)
        }
        "local" => {
            let mut per_user = vec![Vec::with_capacity(space.len() * 2); n_users];
            for (s, row) in rows.iter().enumerate() {
                if row.len() != 2 * n_users {
                    return Err(Error::Config(format!(
                        "state {s}: expected {} probabilities, found {}",
                        2 * n_users,
                        row.len()
                    )));
                }
                for u in 0..n_users {
                    per_user[u].push(row[2 * u]);
                    per_user[u].push(row[2 * u + 1]);
                }
            }
            StoredPolicy::Local(
                per_user
                    .into_iter()
                    .map(|rows| LocalPolicy::from_rows(space.len(), rows))
                    .collect::<Result<_>>()?,
            )
        }
        other => return Err(Error::Config(format!("unknown policy kind `{other}`"))),
    };
    Ok(PolicyFile {
        scheme,
        n_users,
        arq_deadline,
        policy,
    })
}
