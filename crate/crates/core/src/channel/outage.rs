//! Outage probabilities: the closed-form primary outage and Monte Carlo
//! estimates of the secondary own-message and primary-decode outages.

use super::decode::{decodable_tables, gamma_sums, theta_table};
use super::sampling::{stream, DrawBlock};
use super::tables::RateTable;
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::markov::phi_is_known;

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Estimate {
        Estimate {
            value,
            std_err: 0.0,
        }
    }
}

/// Outage probability of the primary link under joint action `a`, with the
/// active secondaries treated as background noise at the primary receiver.
///
/// For independent exponential SNRs this has the closed form
/// `1 - exp(-theta/gpp) * prod_n (1 + theta * gsp_n / gpp)^-1`
/// with `theta = 2^R_p - 1`, which is exact for the Rayleigh model.
pub fn pu_outage(a: usize, cfg: &ScenarioConfig, r_p: f64) -> Result<f64> {
    if a >= cfg.n_actions() {
        return Err(Error::InvalidArgument(format!(
            "action {a} out of range (2^N = {})",
            cfg.n_actions()
        )));
    }
    if !r_p.is_finite() || r_p < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "primary rate must be finite and >= 0, got {r_p}"
        )));
    }
    let theta = f64::exp2(r_p) - 1.0;
    let mut success = (-theta / cfg.gbar_pp).exp();
    for n in 0..cfg.n_users {
        if a >> n & 1 == 1 {
            success /= 1.0 + theta * cfg.gbar_sp[n] / cfg.gbar_pp;
        }
    }
    Ok(1.0 - success)
}

/// The links feeding one receiver's unknown-message set.
enum Link {
    PuToSu(usize),
    SuToSu { tx: usize, rx: usize },
}

/// Estimate the probability that the target message is not decodable,
/// sampling the listed links from the given stream.
fn mc_failure(
    cfg: &ScenarioConfig,
    stream_id: u64,
    rates: &[f64],
    links: &[Link],
    target: usize,
) -> Estimate {
    let samples = cfg.mc_samples;
    let count = rates.len();
    let theta = theta_table(rates);
    let block = DrawBlock::generate(cfg, stream_id, samples);
    let mut gsum = vec![0.0; 1 << count];
    let mut snrs = vec![0.0; count];
    let mut failures = 0u64;
    for i in 0..samples {
        for (j, link) in links.iter().enumerate() {
            snrs[j] = match *link {
                Link::PuToSu(n) => block.g_ps(i, n),
                Link::SuToSu { tx, rx } => block.g_ss(i, tx, rx),
            };
        }
        gamma_sums(&snrs, &mut gsum);
        if !decodable_tables(&theta, &gsum, count, target) {
            failures += 1;
        }
    }
    let p = failures as f64 / samples as f64;
    Estimate {
        value: p,
        std_err: (p * (1.0 - p) / samples as f64).sqrt(),
    }
}

/// Unknown-message set at `SU_rx(n)` for the own-message decode: every
/// active secondary's message, plus the primary message when the receiver
/// does not know it. Returns `(rates, links, target_index)`.
fn own_message_set(
    n: usize,
    a: usize,
    phi: usize,
    rates_by_user: &[f64],
    r_p: f64,
    cfg: &ScenarioConfig,
) -> (Vec<f64>, Vec<Link>, usize) {
    let mut rates = Vec::new();
    let mut links = Vec::new();
    let mut target = 0;
    for m in 0..cfg.n_users {
        if a >> m & 1 == 1 {
            if m == n {
                target = rates.len();
            }
            rates.push(rates_by_user[m]);
            links.push(Link::SuToSu { tx: m, rx: n });
        }
    }
    if !phi_is_known(phi, n) {
        rates.push(r_p);
        links.push(Link::PuToSu(n));
    }
    (rates, links, target)
}

pub(crate) fn su_outage_at(
    n: usize,
    a: usize,
    phi: usize,
    rates_by_user: &[f64],
    r_p: f64,
    cfg: &ScenarioConfig,
) -> Result<Estimate> {
    if a >= cfg.n_actions() || phi >= cfg.n_phi() || n >= cfg.n_users {
        return Err(Error::InvalidArgument(format!(
            "su_outage indices out of range: n={n} a={a} phi={phi}"
        )));
    }
    if a >> n & 1 == 0 {
        return Err(Error::InvalidArgument(format!(
            "su_outage: user {n} is idle under action {a}"
        )));
    }
    let (rates, links, target) = own_message_set(n, a, phi, rates_by_user, r_p, cfg);
    Ok(mc_failure(cfg, stream::table_su(n, a, phi), &rates, &links, target))
}

/// Monte Carlo estimate of the own-message outage `rho_s(n, a, phi)`.
///
/// The receiver jointly decodes over the active secondaries (and the primary
/// when unknown); with the primary known its signal is removed before
/// decoding. One fixed stream per `(n, a, phi)` keeps estimates reproducible
/// bit for bit.
pub fn su_outage(
    n: usize,
    a: usize,
    phi: usize,
    rates: &RateTable,
    cfg: &ScenarioConfig,
    r_p: f64,
) -> Result<Estimate> {
    su_outage_at(n, a, phi, rates.user_rates(a, phi), r_p, cfg)
}

pub(crate) fn pu_decode_fail_at(
    n: usize,
    a: usize,
    phi: usize,
    rates_by_user: &[f64],
    r_p: f64,
    cfg: &ScenarioConfig,
) -> Result<Estimate> {
    if a >= cfg.n_actions() || phi >= cfg.n_phi() || n >= cfg.n_users {
        return Err(Error::InvalidArgument(format!(
            "pu_decode_fail indices out of range: n={n} a={a} phi={phi}"
        )));
    }
    if phi_is_known(phi, n) {
        return Err(Error::InvalidArgument(format!(
            "pu_decode_fail: user {n} already knows the primary message (phi={phi})"
        )));
    }
    if !cfg.fic_enabled {
        // Cancelation disabled: the receiver never acquires the message.
        return Ok(Estimate::exact(1.0));
    }
    let mut rates = Vec::new();
    let mut links = Vec::new();
    for m in 0..cfg.n_users {
        if a >> m & 1 == 1 {
            rates.push(rates_by_user[m]);
            links.push(Link::SuToSu { tx: m, rx: n });
        }
    }
    let target = rates.len();
    rates.push(r_p);
    links.push(Link::PuToSu(n));
    Ok(mc_failure(cfg, stream::table_ps(n, a, phi), &rates, &links, target))
}

/// Monte Carlo estimate of the primary-decode failure `rho_ps(n, a, phi)`:
/// the probability that `SU_rx(n)` cannot decode the primary message, with
/// the active secondaries' messages as the other unknowns.
pub fn pu_decode_fail(
    n: usize,
    a: usize,
    phi: usize,
    rates: &RateTable,
    cfg: &ScenarioConfig,
    r_p: f64,
) -> Result<Estimate> {
    pu_decode_fail_at(n, a, phi, rates.user_rates(a, phi), r_p, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sampling::sample_snrs;

    fn cfg() -> ScenarioConfig {
        ScenarioConfig::reference_scenario(2)
    }

    #[test]
    fn idle_pu_outage_matches_reported_operating_point() {
        // At gpp = 10 and the auto-selected rate 2.52 the idle primary
        // throughput is 1.57, so rho_p0 = 1 - 1.57/2.52.
        let rho = pu_outage(0, &cfg(), 2.52).unwrap();
        assert!((rho - (1.0 - 1.57 / 2.52)).abs() < 5e-4, "rho_p0 = {rho}");
    }

    #[test]
    fn zero_rate_never_in_outage() {
        let c = cfg();
        for a in 0..c.n_actions() {
            assert_eq!(pu_outage(a, &c, 0.0).unwrap(), 0.0);
        }
        assert!(pu_outage(4, &cfg(), 1.0).is_err());
    }

    #[test]
    fn closed_form_matches_monte_carlo() {
        let c = cfg();
        let r_p = 2.52;
        for a in [1usize, 3] {
            let analytic = pu_outage(a, &c, r_p).unwrap();
            let m = 1_000_000usize;
            let theta = f64::exp2(r_p) - 1.0;
            let mut failures = 0u64;
            for i in 0..m {
                let d = sample_snrs(&c, 0xBEEF + a as u64, i as u64);
                let interference: f64 = (0..c.n_users)
                    .filter(|&n| a >> n & 1 == 1)
                    .map(|n| d.g_sp[n])
                    .sum();
                if d.g_pp < theta * (1.0 + interference) {
                    failures += 1;
                }
            }
            let mc = failures as f64 / m as f64;
            let se = (mc * (1.0 - mc) / m as f64).sqrt();
            assert!(
                (mc - analytic).abs() < 3.0 * se,
                "a={a}: closed form {analytic} vs MC {mc} +/- {se}"
            );
        }
        // Spot value promised for a single interferer at the reference SNRs.
        let one = pu_outage(1, &cfg(), 2.52).unwrap();
        assert!((one - 0.68).abs() < 5e-3, "rho_p1 = {one}");
    }

    #[test]
    fn su_outage_single_user_closed_form() {
        let c = ScenarioConfig::reference_scenario(1);
        let r_p = c.resolved_pu_rate();
        let mut rates = RateTable::zeros(1);
        let r = 1.7;
        rates.set(0, 1, 1, r);
        // Known primary: outage = P(g_ss < 2^R - 1) = 1 - exp(-theta/gbar).
        let est = su_outage(0, 1, 1, &rates, &c, r_p).unwrap();
        let analytic = 1.0 - (-(f64::exp2(r) - 1.0) / c.gbar_ss[0][0]).exp();
        assert!(
            (est.value - analytic).abs() < 3.0 * est.std_err.max(1e-9),
            "estimate {} vs closed form {analytic}",
            est.value
        );
        // Zero rate is always decodable.
        rates.set(0, 1, 1, 0.0);
        assert_eq!(su_outage(0, 1, 1, &rates, &c, r_p).unwrap().value, 0.0);
        // Idle user rejected.
        assert!(su_outage(0, 0, 1, &rates, &c, r_p).is_err());
    }

    #[test]
    fn pu_decode_fail_single_link_closed_form() {
        let c = cfg();
        let r_p = c.resolved_pu_rate();
        let rates = RateTable::zeros(2);
        let est = pu_decode_fail(0, 0, 0, &rates, &c, r_p).unwrap();
        let analytic = 1.0 - (-(f64::exp2(r_p) - 1.0) / c.gbar_ps[0]).exp();
        assert!(
            (est.value - analytic).abs() < 3.0 * est.std_err,
            "estimate {} vs closed form {analytic}",
            est.value
        );
        // Vanishing primary rate decodes for free.
        assert_eq!(pu_decode_fail(0, 0, 0, &rates, &c, 0.0).unwrap().value, 0.0);
        // Known receivers are handled by the knowledge factor, not here.
        assert!(pu_decode_fail(0, 0, 1, &rates, &c, r_p).is_err());
    }

    #[test]
    fn no_fic_forces_certain_failure() {
        let mut c = cfg();
        c.fic_enabled = false;
        let rates = RateTable::zeros(2);
        let est = pu_decode_fail(1, 3, 0, &rates, &c, 2.52).unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.std_err, 0.0);
    }

    #[test]
    fn estimates_are_reproducible() {
        let c = cfg();
        let mut rates = RateTable::zeros(2);
        rates.set(0, 3, 0, 1.0);
        rates.set(1, 3, 0, 1.5);
        let a = su_outage(0, 3, 0, &rates, &c, 2.52).unwrap();
        let b = su_outage(0, 3, 0, &rates, &c, 2.52).unwrap();
        assert_eq!(a, b);
    }
}
