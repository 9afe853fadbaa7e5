//! Throughput-maximizing rate selection.
//!
//! Rates are optimized per `(action, knowledge state)` pair on a fixed grid
//! with common random numbers, so every search optimizes a deterministic
//! surrogate and reruns reproduce the same tables bit for bit.
//!
//! Single-active-user searches (and the per-user rule that treats other
//! secondaries as noise) reduce each draw to a maximum decodable own-rate,
//! so the whole grid is evaluated against one sorted threshold array. Joint
//! searches over several active users use a coarse-to-fine grid pass with a
//! budgeted sample count, followed by coordinate descent and a golden-section
//! polish. The per-user noise-only optimum is kept as a fallback candidate
//! and the winner is chosen on the final table streams, so the jointly
//! selected rates never score below the self-contained per-user rule.

use rayon::prelude::*;

use super::decode::{cap, decodable_tables, gamma_sums, theta_table};
use super::outage::su_outage_at;
use super::sampling::{exp_matrix, stream};
use crate::config::{RateGrid, ScenarioConfig};
use crate::error::{Error, Result};
use crate::markov::phi_is_known;

/// Samples for the single-rate threshold search, as a multiple of
/// `mc_samples`. The sorted-threshold evaluation is cheap, and the larger
/// block keeps the argmax stable to within one grid step.
const SINGLE_SEARCH_OVERSAMPLE: usize = 5;

/// Sample budget of the coarse joint grid pass.
const JOINT_COARSE_SAMPLES: usize = 20_000;

/// Sample budget of the joint descent and golden-section stages.
const JOINT_REFINE_SAMPLES: usize = 50_000;

/// Grid points per dimension in the coarse joint pass.
fn coarse_per_dim(k: usize) -> usize {
    match k {
        2 => 24,
        _ => 10,
    }
}

/// Golden-section interval tolerance, in bits/s/Hz.
const REFINE_TOL: f64 = 1e-3;

fn active_users(a: usize, n_users: usize) -> Vec<usize> {
    (0..n_users).filter(|&n| a >> n & 1 == 1).collect()
}

/// Golden-section maximization on `[lo, hi]`, returning the best probed
/// point. Tracks the best sample seen so plateaus and small jumps in the
/// Monte Carlo surrogate cannot lose the incumbent.
fn golden_max(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let (mut lo, mut hi) = (lo, hi);
    let mut best = (lo, f(lo));
    for x in [hi, 0.5 * (lo + hi)] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    let mut c = hi - INVPHI * (hi - lo);
    let mut d = lo + INVPHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > REFINE_TOL {
        if fc > best.1 {
            best = (c, fc);
        }
        if fd > best.1 {
            best = (d, fd);
        }
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INVPHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INVPHI * (hi - lo);
            fd = f(d);
        }
    }
    best
}

/// Maximum own-rate decodable in one draw for a receiver whose only unknowns
/// are its own message and (when unknown) the primary message; `extra_noise`
/// carries interfering secondaries treated as noise.
#[inline]
fn max_own_rate(g_own: f64, pu: Option<(f64, f64)>, extra_noise: f64) -> f64 {
    let w = 1.0 + extra_noise;
    match pu {
        None => cap(g_own / w),
        Some((r_p, g_pu)) => {
            let noise_branch = cap(g_own / (w + g_pu));
            if r_p <= cap(g_pu / w) {
                let joint = cap(g_own / w).min(cap((g_own + g_pu) / w) - r_p);
                noise_branch.max(joint)
            } else {
                noise_branch
            }
        }
    }
}

/// Per-draw decodability thresholds for user `n` under `(a, phi)` with other
/// active secondaries treated as noise, sorted ascending.
fn single_rate_thresholds(
    n: usize,
    a: usize,
    phi: usize,
    cfg: &ScenarioConfig,
    r_p: f64,
) -> Vec<f64> {
    let interferers: Vec<usize> = active_users(a, cfg.n_users)
        .into_iter()
        .filter(|&m| m != n)
        .collect();
    let pu_unknown = !phi_is_known(phi, n);
    // Column layout: own link, primary link (when unknown), interferers.
    let mut means = vec![cfg.gbar_ss[n][n]];
    if pu_unknown {
        means.push(cfg.gbar_ps[n]);
    }
    for &m in &interferers {
        means.push(cfg.gbar_ss[m][n]);
    }
    let samples = cfg.mc_samples.saturating_mul(SINGLE_SEARCH_OVERSAMPLE);
    let data = exp_matrix(cfg.rng_seed, stream::search_single(n, a, phi), &means, samples);
    let cols = means.len();
    let mut thresholds: Vec<f64> = (0..samples)
        .map(|i| {
            let row = &data[i * cols..(i + 1) * cols];
            let g_own = row[0];
            let (pu, noise_from) = if pu_unknown {
                (Some((r_p, row[1])), 2)
            } else {
                (None, 1)
            };
            let extra: f64 = row[noise_from..].iter().sum();
            max_own_rate(g_own, pu, extra)
        })
        .collect();
    thresholds.sort_by(|x, y| x.partial_cmp(y).unwrap());
    thresholds
}

/// Throughput of rate `r` against sorted decodability thresholds.
#[inline]
fn threshold_throughput(sorted: &[f64], r: f64) -> f64 {
    let below = sorted.partition_point(|&t| t < r);
    r * (sorted.len() - below) as f64 / sorted.len() as f64
}

fn best_rate_from_thresholds(sorted: &[f64], grid: &RateGrid) -> f64 {
    let mut best = (grid.value(0), threshold_throughput(sorted, grid.value(0)));
    for idx in 1..grid.len() {
        let r = grid.value(idx);
        let t = threshold_throughput(sorted, r);
        if t > best.1 {
            best = (r, t);
        }
    }
    let lo = (best.0 - grid.step).max(grid.min);
    let hi = (best.0 + grid.step).min(grid.max);
    let (refined, refined_t) = golden_max(|r| threshold_throughput(sorted, r), lo, hi);
    if refined_t > best.1 {
        refined
    } else {
        best.0
    }
}

/// Rate for user `n` under `(a, phi)` maximizing its own throughput with the
/// other active secondaries treated purely as noise at its receiver; the
/// primary message is handled according to `phi`. This is the self-contained
/// per-user rule used by the decentralized design.
pub fn optimize_rates_decentralized(
    n: usize,
    a: usize,
    phi: usize,
    cfg: &ScenarioConfig,
    r_p: f64,
) -> Result<f64> {
    cfg.rate_grid.validate()?;
    if n >= cfg.n_users || a >= cfg.n_actions() || phi >= cfg.n_phi() {
        return Err(Error::InvalidArgument(format!(
            "rate search indices out of range: n={n} a={a} phi={phi}"
        )));
    }
    if a >> n & 1 == 0 {
        return Err(Error::InvalidArgument(format!(
            "rate search: user {n} is idle under action {a}"
        )));
    }
    let thresholds = single_rate_thresholds(n, a, phi, cfg, r_p);
    Ok(best_rate_from_thresholds(&thresholds, &cfg.rate_grid))
}

/// Common-random-number evaluator of the sum throughput at one `(a, phi)`.
struct JointEvaluator {
    /// Active users, ascending.
    active: Vec<usize>,
    /// Per receiver: number of unknown messages (active users + unknown PU).
    unknowns: Vec<usize>,
    /// Per receiver: flat `[draw * unknowns + j]` SNR matrix.
    snr: Vec<Vec<f64>>,
    samples: usize,
    r_p: f64,
}

impl JointEvaluator {
    fn new(a: usize, phi: usize, cfg: &ScenarioConfig, r_p: f64, samples: usize) -> JointEvaluator {
        let active = active_users(a, cfg.n_users);
        let mut unknowns = Vec::new();
        let mut snr = Vec::new();
        for (pos, &rx) in active.iter().enumerate() {
            let pu_unknown = !phi_is_known(phi, rx);
            let mut means: Vec<f64> = active.iter().map(|&m| cfg.gbar_ss[m][rx]).collect();
            if pu_unknown {
                means.push(cfg.gbar_ps[rx]);
            }
            unknowns.push(means.len());
            // Links into distinct receivers are independent, so each
            // receiver reads its own stream slot.
            snr.push(exp_matrix(
                cfg.rng_seed,
                stream::search_joint(pos, a, phi),
                &means,
                samples,
            ));
        }
        JointEvaluator {
            active,
            unknowns,
            snr,
            samples,
            r_p,
        }
    }

    /// Sum throughput of the active users at `rates` (indexed by active
    /// position), evaluated on the first `samples` draws.
    fn eval(&self, rates: &[f64], samples: usize) -> f64 {
        let samples = samples.min(self.samples);
        let mut total = 0.0;
        for (pos, _) in self.active.iter().enumerate() {
            let count = self.unknowns[pos];
            let mut msg_rates: Vec<f64> = rates.to_vec();
            if count > self.active.len() {
                msg_rates.push(self.r_p);
            }
            let theta = theta_table(&msg_rates);
            let data = &self.snr[pos];
            let mut gsum = vec![0.0; 1 << count];
            let mut failures = 0usize;
            for i in 0..samples {
                gamma_sums(&data[i * count..(i + 1) * count], &mut gsum);
                if !decodable_tables(&theta, &gsum, count, pos) {
                    failures += 1;
                }
            }
            total += rates[pos] * (1.0 - failures as f64 / samples as f64);
        }
        total
    }
}

/// Evenly spaced grid indices for the coarse pass.
fn coarse_indices(len: usize, per_dim: usize) -> Vec<usize> {
    if len <= per_dim {
        return (0..len).collect();
    }
    let mut idx: Vec<usize> = (0..per_dim)
        .map(|i| (i as f64 * (len - 1) as f64 / (per_dim - 1) as f64).round() as usize)
        .collect();
    idx.dedup();
    idx
}

/// Sum throughput of a full-length rate vector evaluated on the final
/// outage-table streams; used to pick between search candidates so that the
/// tables themselves decide ties.
fn table_sum_throughput(
    rates_by_user: &[f64],
    a: usize,
    phi: usize,
    cfg: &ScenarioConfig,
    r_p: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for n in active_users(a, cfg.n_users) {
        let rho = su_outage_at(n, a, phi, rates_by_user, r_p, cfg)?.value;
        total += rates_by_user[n] * (1.0 - rho);
    }
    Ok(total)
}

/// Jointly selected rates for the active users under `(a, phi)`, maximizing
/// the sum throughput. Returns a full-length vector with zeros for idle
/// users.
pub fn optimize_rates_centralized(
    a: usize,
    phi: usize,
    cfg: &ScenarioConfig,
    r_p: f64,
) -> Result<Vec<f64>> {
    cfg.rate_grid.validate()?;
    if a >= cfg.n_actions() || phi >= cfg.n_phi() {
        return Err(Error::InvalidArgument(format!(
            "rate search indices out of range: a={a} phi={phi}"
        )));
    }
    let mut rates = vec![0.0; cfg.n_users];
    let active = active_users(a, cfg.n_users);
    if active.is_empty() {
        return Ok(rates);
    }
    if active.len() == 1 {
        // Single transmitter: the per-user rule is already exact.
        let n = active[0];
        rates[n] = optimize_rates_decentralized(n, a, phi, cfg, r_p)?;
        return Ok(rates);
    }

    // Self-contained per-user optimum: joint-search fallback candidate.
    let mut noise_only = vec![0.0; cfg.n_users];
    for &n in &active {
        noise_only[n] = optimize_rates_decentralized(n, a, phi, cfg, r_p)?;
    }

    let k = active.len();
    let grid = cfg.rate_grid;
    let coarse_samples = JOINT_COARSE_SAMPLES.min(cfg.mc_samples);
    let refine_samples = JOINT_REFINE_SAMPLES.min(cfg.mc_samples);
    let eval = JointEvaluator::new(a, phi, cfg, r_p, refine_samples.max(coarse_samples));

    // Coarse joint grid.
    let axis = coarse_indices(grid.len(), coarse_per_dim(k));
    let n_points: usize = axis.len().pow(k as u32);
    let coarse_best = (0..n_points)
        .into_par_iter()
        .map(|flat| {
            let mut remaining = flat;
            let mut point = vec![0usize; k];
            for d in 0..k {
                point[d] = axis[remaining % axis.len()];
                remaining /= axis.len();
            }
            let rates: Vec<f64> = point.iter().map(|&i| grid.value(i)).collect();
            (eval.eval(&rates, coarse_samples), flat, point)
        })
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX, Vec::new()),
            |best, cand| {
                if cand.0 > best.0 || (cand.0 == best.0 && cand.1 < best.1) {
                    cand
                } else {
                    best
                }
            },
        );
    let mut current = coarse_best.2;
    let stride = (grid.len() - 1).div_ceil(axis.len().saturating_sub(1).max(1));

    // Coordinate descent on the full grid around the coarse winner.
    let mut current_value = {
        let rates: Vec<f64> = current.iter().map(|&i| grid.value(i)).collect();
        eval.eval(&rates, refine_samples)
    };
    for _pass in 0..2 {
        for d in 0..k {
            let lo = current[d].saturating_sub(stride);
            let hi = (current[d] + stride).min(grid.len() - 1);
            let scan = (lo..=hi)
                .into_par_iter()
                .map(|idx| {
                    let mut point = current.clone();
                    point[d] = idx;
                    let rates: Vec<f64> = point.iter().map(|&i| grid.value(i)).collect();
                    (eval.eval(&rates, refine_samples), idx)
                })
                .reduce(
                    || (f64::NEG_INFINITY, usize::MAX),
                    |best, cand| {
                        if cand.0 > best.0 || (cand.0 == best.0 && cand.1 < best.1) {
                            cand
                        } else {
                            best
                        }
                    },
                );
            if scan.0 > current_value {
                current_value = scan.0;
                current[d] = scan.1;
            }
        }
    }

    // Golden-section polish, one coordinate at a time.
    let mut refined: Vec<f64> = current.iter().map(|&i| grid.value(i)).collect();
    let mut refined_value = current_value;
    for _pass in 0..2 {
        for d in 0..k {
            let lo = (refined[d] - grid.step).max(grid.min);
            let hi = (refined[d] + grid.step).min(grid.max);
            let (x, fx) = golden_max(
                |r| {
                    let mut rates = refined.clone();
                    rates[d] = r;
                    eval.eval(&rates, refine_samples)
                },
                lo,
                hi,
            );
            if fx > refined_value {
                refined_value = fx;
                refined[d] = x;
            }
        }
    }

    let mut joint = vec![0.0; cfg.n_users];
    for (pos, &n) in active.iter().enumerate() {
        joint[n] = refined[pos];
    }

    // Final pick on the table streams.
    let joint_score = table_sum_throughput(&joint, a, phi, cfg, r_p)?;
    let noise_score = table_sum_throughput(&noise_only, a, phi, cfg, r_p)?;
    if noise_score > joint_score {
        Ok(noise_only)
    } else {
        Ok(joint)
    }
}
