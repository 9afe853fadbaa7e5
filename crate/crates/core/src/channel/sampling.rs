//! Deterministic fading draws.
//!
//! Every random quantity in the crate comes from a counter-mode generator
//! addressed by `(seed, stream, position)`, so each table entry, search, and
//! simulation run reads its own stream and any draw can be regenerated in
//! isolation. Instantaneous SNRs are exponential with the configured means
//! (Rayleigh-faded amplitudes), sampled by CDF inversion so every value
//! consumes exactly one generator word.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ScenarioConfig;

/// Stream identifiers. The encoding packs a purpose tag with the table
/// indices; distinct `(purpose, n, a, phi)` tuples never collide.
pub mod stream {
    const fn make(kind: u64, n: usize, a: usize, phi: usize) -> u64 {
        (kind << 56) | ((n as u64) << 48) | ((a as u64) << 24) | phi as u64
    }

    /// Own-message outage estimation for `(n, a, phi)`.
    pub const fn table_su(n: usize, a: usize, phi: usize) -> u64 {
        make(1, n, a, phi)
    }

    /// Primary-decode failure estimation for `(n, a, phi)`.
    pub const fn table_ps(n: usize, a: usize, phi: usize) -> u64 {
        make(2, n, a, phi)
    }

    /// Joint rate-search draws for receiver slot `rx` under `(a, phi)`.
    /// Links into distinct receivers are independent, so each receiver
    /// reads its own stream.
    pub const fn search_joint(rx: usize, a: usize, phi: usize) -> u64 {
        make(3, rx, a, phi)
    }

    /// Single-rate search draws for `(n, a, phi)`.
    pub const fn search_single(n: usize, a: usize, phi: usize) -> u64 {
        make(4, n, a, phi)
    }

    /// Slot-level channel draws for a simulation run.
    pub const fn sim_channel(run: u64) -> u64 {
        (5 << 56) | run
    }

    /// Action sampling for a simulation run.
    pub const fn sim_policy(run: u64) -> u64 {
        (6 << 56) | run
    }

    /// Initial local policies for one restart of the equilibrium iteration.
    pub const fn nash_init(restart: usize) -> u64 {
        (7 << 56) | restart as u64
    }
}

/// One instantaneous SNR per physical link.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrDraw {
    /// PU_tx -> PU_rx.
    pub g_pp: f64,
    /// PU_tx -> SU_rx(n).
    pub g_ps: Vec<f64>,
    /// SU_tx(n) -> PU_rx.
    pub g_sp: Vec<f64>,
    /// SU_tx(n) -> SU_rx(m), transmitter-major: `g_ss[n * N + m]`.
    pub g_ss: Vec<f64>,
}

impl SnrDraw {
    pub fn ss(&self, tx: usize, rx: usize, n_users: usize) -> f64 {
        self.g_ss[tx * n_users + rx]
    }
}

/// Number of link SNRs in one draw.
pub fn n_links(n_users: usize) -> usize {
    1 + 2 * n_users + n_users * n_users
}

fn rng_at(seed: u64, stream: u64, word_pos: u128) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(word_pos);
    rng
}

/// Exponential variate with the given mean from one generator word.
#[inline]
fn exp_draw(rng: &mut ChaCha8Rng, mean: f64) -> f64 {
    // 53-bit uniform in [0, 1); -mean*ln(1-u) inverts the CDF.
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0);
    -mean * (-u).ln_1p()
}

/// Draw all link SNRs for `(stream, sample_index)`.
///
/// Deterministic: the same `(config seed, stream_id, sample_index)` always
/// produces the same draw, independent of any other calls.
pub fn sample_snrs(cfg: &ScenarioConfig, stream_id: u64, sample_index: u64) -> SnrDraw {
    let n = cfg.n_users;
    // Each f64 consumes two 32-bit generator words.
    let words = 2 * n_links(n) as u128;
    let mut rng = rng_at(cfg.rng_seed, stream_id, sample_index as u128 * words);
    let g_pp = exp_draw(&mut rng, cfg.gbar_pp);
    let g_ps = (0..n).map(|i| exp_draw(&mut rng, cfg.gbar_ps[i])).collect();
    let g_sp = (0..n).map(|i| exp_draw(&mut rng, cfg.gbar_sp[i])).collect();
    let mut g_ss = Vec::with_capacity(n * n);
    for tx in 0..n {
        for rx in 0..n {
            g_ss.push(exp_draw(&mut rng, cfg.gbar_ss[tx][rx]));
        }
    }
    SnrDraw { g_pp, g_ps, g_sp, g_ss }
}

/// A block of consecutive full draws from one stream, stored flat
/// (draw-major, link order as in [`SnrDraw`]).
pub struct DrawBlock {
    pub n_users: usize,
    pub samples: usize,
    data: Vec<f64>,
}

impl DrawBlock {
    pub fn generate(cfg: &ScenarioConfig, stream_id: u64, samples: usize) -> DrawBlock {
        Self::generate_range(cfg, stream_id, 0, samples)
    }

    /// Generate `samples` draws starting at `first_sample`; byte-identical
    /// to the corresponding slice of one long block.
    pub fn generate_range(
        cfg: &ScenarioConfig,
        stream_id: u64,
        first_sample: u64,
        samples: usize,
    ) -> DrawBlock {
        let n = cfg.n_users;
        let links = n_links(n);
        let mut rng = rng_at(
            cfg.rng_seed,
            stream_id,
            first_sample as u128 * 2 * links as u128,
        );
        let mut means = Vec::with_capacity(links);
        means.push(cfg.gbar_pp);
        means.extend_from_slice(&cfg.gbar_ps);
        means.extend_from_slice(&cfg.gbar_sp);
        for tx in 0..n {
            means.extend_from_slice(&cfg.gbar_ss[tx]);
        }
        let mut data = Vec::with_capacity(samples * links);
        for _ in 0..samples {
            for &mean in &means {
                data.push(exp_draw(&mut rng, mean));
            }
        }
        DrawBlock {
            n_users: n,
            samples,
            data,
        }
    }

    #[inline]
    fn base(&self, i: usize) -> usize {
        i * n_links(self.n_users)
    }

    #[inline]
    pub fn g_pp(&self, i: usize) -> f64 {
        self.data[self.base(i)]
    }

    #[inline]
    pub fn g_ps(&self, i: usize, n: usize) -> f64 {
        self.data[self.base(i) + 1 + n]
    }

    #[inline]
    pub fn g_sp(&self, i: usize, n: usize) -> f64 {
        self.data[self.base(i) + 1 + self.n_users + n]
    }

    #[inline]
    pub fn g_ss(&self, i: usize, tx: usize, rx: usize) -> f64 {
        self.data[self.base(i) + 1 + 2 * self.n_users + tx * self.n_users + rx]
    }
}

/// Per-draw custom exponential sampler for search streams that only need a
/// few links; layout is `values[draw * means.len() + j]` for the caller's
/// chosen ordering of `means`.
pub fn exp_matrix(seed: u64, stream_id: u64, means: &[f64], samples: usize) -> Vec<f64> {
    let mut rng = rng_at(seed, stream_id, 0);
    let mut data = Vec::with_capacity(samples * means.len());
    for _ in 0..samples {
        for &mean in means {
            data.push(exp_draw(&mut rng, mean));
        }
    }
    data
}
