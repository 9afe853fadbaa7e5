//! Information-theoretic decodability at a single receiver.
//!
//! A receiver sees a set of unknown messages (its own, other active
//! secondaries', possibly the primary's). The target message is decodable
//! when some subset S of the unknowns containing the target is jointly
//! decodable with the rest treated as noise: for every nonempty U within S,
//! `sum of rates in U <= C(sum of SNRs in U / (1 + SNR of the complement))`.
//! For two users this reduces exactly to the familiar two-branch
//! joint-decoding-or-treat-as-noise unions.

use crate::error::{Error, Result};

/// An unknown message at a receiver: its transmission rate and the
/// instantaneous SNR of its link into this receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    pub rate: f64,
    pub snr: f64,
}

/// Shannon capacity of a complex AWGN channel at linear SNR, in bits/s/Hz.
pub fn capacity(snr: f64) -> Result<f64> {
    if !snr.is_finite() || snr < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "capacity: SNR must be finite and >= 0, got {snr}"
        )));
    }
    Ok(cap(snr))
}

#[inline]
pub(crate) fn cap(snr: f64) -> f64 {
    (1.0 + snr).log2()
}

/// Whether `messages[target]` is decodable. Background noise power is
/// normalized to 1.
pub fn decodable(target: usize, messages: &[Message]) -> Result<bool> {
    if target >= messages.len() {
        return Err(Error::InvalidArgument(format!(
            "decodable: target {target} not among {} unknown messages",
            messages.len()
        )));
    }
    for m in messages {
        if !m.rate.is_finite() || m.rate < 0.0 || !m.snr.is_finite() || m.snr < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "decodable: rates and SNRs must be finite and >= 0, got {m:?}"
            )));
        }
    }
    let count = messages.len();
    let full = (1usize << count) - 1;
    let tbit = 1usize << target;
    let mut set = tbit;
    loop {
        // Noise: everything outside the candidate decoding set.
        let noise = 1.0
            + iter_bits(full & !set)
                .map(|i| messages[i].snr)
                .sum::<f64>();
        let mut ok = true;
        let mut sub = set;
        while sub != 0 {
            let rate_sum: f64 = iter_bits(sub).map(|i| messages[i].rate).sum();
            let snr_sum: f64 = iter_bits(sub).map(|i| messages[i].snr).sum();
            if rate_sum > cap(snr_sum / noise) {
                ok = false;
                break;
            }
            sub = (sub - 1) & set;
        }
        if ok {
            return Ok(true);
        }
        // Next subset containing the target.
        set = (set | !full).wrapping_add(1) & full | tbit;
        if set == tbit {
            return Ok(false);
        }
    }
}

fn iter_bits(mask: usize) -> impl Iterator<Item = usize> {
    std::iter::successors((mask != 0).then_some(mask), |&m| {
        let rest = m & (m - 1);
        (rest != 0).then_some(rest)
    })
    .map(|m| m.trailing_zeros() as usize)
}

/// Per-grid-point decode tables: `theta[mask] = 2^(sum of rates in mask) - 1`
/// so the per-draw test is pure multiply-compare.
pub(crate) fn theta_table(rates: &[f64]) -> Vec<f64> {
    let count = rates.len();
    let mut theta = vec![0.0; 1 << count];
    for i in 0..count {
        let bit = 1usize << i;
        for mask in 0..bit {
            // Rebuild the rate sum instead of composing thetas to avoid
            // accumulating rounding differences against the reference path.
            let rsum: f64 = iter_bits(mask | bit).map(|j| rates[j]).sum();
            theta[mask | bit] = f64::exp2(rsum) - 1.0;
        }
    }
    theta
}

/// Subset sums of per-message SNRs, `gsum[mask]`.
#[inline]
pub(crate) fn gamma_sums(snrs: &[f64], out: &mut [f64]) {
    out[0] = 0.0;
    for (i, &g) in snrs.iter().enumerate() {
        let bit = 1usize << i;
        for mask in 0..bit {
            out[mask | bit] = out[mask] + g;
        }
    }
}

/// Fast decodability check against precomputed `theta` and `gsum` tables.
#[inline]
pub(crate) fn decodable_tables(theta: &[f64], gsum: &[f64], count: usize, target: usize) -> bool {
    let full = (1usize << count) - 1;
    let tbit = 1usize << target;
    // Most draws resolve on the target-alone set; test it first.
    if gsum[tbit] >= theta[tbit] * (1.0 + gsum[full ^ tbit]) {
        return true;
    }
    if count == 1 {
        return false;
    }
    let mut set = tbit;
    loop {
        set = (set | !full).wrapping_add(1) & full | tbit;
        if set == tbit {
            return false;
        }
        let noise = 1.0 + gsum[full ^ set];
        let mut ok = true;
        let mut sub = set;
        while sub != 0 {
            if gsum[sub] < theta[sub] * noise {
                ok = false;
                break;
            }
            sub = (sub - 1) & set;
        }
        if ok {
            return true;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn msg(rate: f64, snr: f64) -> Message {
        Message { rate, snr }
    }

    #[test]
    fn single_message_boundary() {
        // R = 1 against C(1) = 1: decodable exactly at the boundary.
        assert!(decodable(0, &[msg(1.0, 1.0)]).unwrap());
        assert!(!decodable(0, &[msg(1.0 + 1e-12, 1.0)]).unwrap());
        assert!(decodable(0, &[msg(0.0, 0.0)]).unwrap());
    }

    #[test]
    fn treat_as_noise_branch() {
        // Target SU at R=1 with own SNR 3; primary interferer at R=2, SNR 1.
        // Joint decoding fails (C(1) = 1 < 2 and 1 + 2 = 3 > C(4)), but the
        // noise branch gives 1 <= C(3/2).
        let msgs = [msg(1.0, 3.0), msg(2.0, 1.0)];
        assert!(!decodable(1, &msgs).unwrap(), "interferer itself fails");
        assert!(decodable(0, &msgs).unwrap(), "target passes via noise branch");
    }

    #[test]
    fn joint_branch_membership() {
        // R_p <= C(g_ps) and R_s <= C(g_ss / (1 + g_ps)) implies both the
        // rule and the explicit joint-decoding set accept.
        let (g_ss, g_ps) = (6.0, 3.0);
        let r_p = cap(g_ps) - 0.1;
        let r_s = cap(g_ss / (1.0 + g_ps)) - 0.1;
        let msgs = [msg(r_s, g_ss), msg(r_p, g_ps)];
        assert!(decodable(0, &msgs).unwrap());
        let in_joint_set = r_s <= cap(g_ss) && r_p <= cap(g_ps) && r_s + r_p <= cap(g_ss + g_ps);
        assert!(in_joint_set);
    }

    #[test]
    fn rejects_missing_target() {
        assert!(decodable(2, &[msg(1.0, 1.0)]).is_err());
        assert!(decodable(0, &[msg(-1.0, 1.0)]).is_err());
        assert!(decodable(0, &[msg(1.0, f64::NAN)]).is_err());
    }

    /// Direct transcription of the published two-message region for a single
    /// active secondary with the primary unknown.
    fn region_su_with_pu(r_s: f64, r_p: f64, g_ss: f64, g_ps: f64) -> bool {
        let joint = r_s <= cap(g_ss) && r_p <= cap(g_ps) && r_s + r_p <= cap(g_ss + g_ps);
        let noise = r_p > cap(g_ps) && r_s <= cap(g_ss / (1.0 + g_ps));
        joint || noise
    }

    /// Published region for two active secondaries at a receiver that knows
    /// the primary message.
    fn region_two_su(r_1: f64, r_2: f64, g_11: f64, g_21: f64) -> bool {
        let joint = r_1 <= cap(g_11) && r_2 <= cap(g_21) && r_1 + r_2 <= cap(g_11 + g_21);
        let noise = r_2 > cap(g_21) && r_1 <= cap(g_11 / (1.0 + g_21));
        joint || noise
    }

    #[test]
    fn agrees_with_published_two_message_regions() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10_000 {
            let r_a = rng.gen::<f64>() * 4.0;
            let r_b = rng.gen::<f64>() * 4.0;
            let g_a = rng.gen::<f64>() * 12.0;
            let g_b = rng.gen::<f64>() * 12.0;
            // The noise branch of each published union drops its rate guard
            // once the guarded points are absorbed by the joint branch, so
            // agreement must be exact.
            let got = decodable(0, &[msg(r_a, g_a), msg(r_b, g_b)]).unwrap();
            assert_eq!(got, region_su_with_pu(r_a, r_b, g_a, g_b));
            assert_eq!(got, region_two_su(r_a, r_b, g_a, g_b));
        }
    }

    #[test]
    fn fast_path_matches_reference() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut gsum = vec![0.0; 16];
        for _ in 0..5_000 {
            let count = rng.gen_range(1..=4);
            let msgs: Vec<Message> = (0..count)
                .map(|_| msg(rng.gen::<f64>() * 3.0, rng.gen::<f64>() * 10.0))
                .collect();
            let rates: Vec<f64> = msgs.iter().map(|m| m.rate).collect();
            let snrs: Vec<f64> = msgs.iter().map(|m| m.snr).collect();
            let theta = theta_table(&rates);
            gamma_sums(&snrs, &mut gsum[..1 << count]);
            for target in 0..count {
                assert_eq!(
                    decodable_tables(&theta, &gsum, count, target),
                    decodable(target, &msgs).unwrap()
                );
            }
        }
    }

    proptest! {
        /// Raising the target SNR can never break decodability, and raising
        /// the target rate can never create it.
        #[test]
        fn monotone_in_target_rate_and_snr(
            r in 0.0f64..4.0,
            g in 0.0f64..10.0,
            r_i in 0.0f64..4.0,
            g_i in 0.0f64..10.0,
            dr in 0.0f64..2.0,
            dg in 0.0f64..5.0,
        ) {
            let base = decodable(0, &[msg(r, g), msg(r_i, g_i)]).unwrap();
            let more_snr = decodable(0, &[msg(r, g + dg), msg(r_i, g_i)]).unwrap();
            let more_rate = decodable(0, &[msg(r + dr, g), msg(r_i, g_i)]).unwrap();
            prop_assert!(!base || more_snr, "SNR increase flipped true -> false");
            prop_assert!(more_rate <= base || dr == 0.0, "rate increase flipped false -> true");
        }
    }
}
