//! Time-domain Monte Carlo transmission chain.
//!
//! Everything the closed-form layer predicts is checked against this module:
//! it literally modulates random QPSK frames for both users, pushes them
//! through their channel impulse responses sample by sample, adds white
//! noise, and demodulates. No interference formula appears anywhere here —
//! that independence is what makes the cross-validation meaningful.
//!
//! The chain is genie-aided: successive interference cancellation subtracts
//! the first-decoded user's *true* post-channel signal, so stage 2 is exactly
//! interference-free. Decision errors and their propagation are out of scope.

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{apply_channel, ChannelRealization};
use crate::error::{Error, Result};
use crate::ini_analysis::SicOrdering;
use crate::numerology::NumerologyPair;
use crate::ofdm_ops::{build_frame_user2, OfdmModem};

/// Minimum trial count accepted by the averaging estimators.
pub const MIN_TRIALS: usize = 100;

// ---------------------------------------------------------------------------
// Data generation
// ---------------------------------------------------------------------------

/// One frame's worth of unit-energy data symbols for both users. User 2's
/// vector is flattened over short symbols: entry `(m-1) * n_active2 + o`
/// rides short symbol `m` (1-based), subcarrier position `o` — the same
/// layout as the interference-matrix columns.
#[derive(Debug, Clone)]
pub struct FrameSymbols {
    /// User 1 data, `n_active1` entries.
    pub d1: Vec<Complex64>,
    /// User 2 data, `q * n_active2` entries.
    pub d2: Vec<Complex64>,
}

/// Draws one QPSK symbol, `(±1 ± j)/√2`.
fn qpsk(rng: &mut impl Rng) -> Complex64 {
    const A: f64 = std::f64::consts::FRAC_1_SQRT_2;
    let re = if rng.random::<bool>() { A } else { -A };
    let im = if rng.random::<bool>() { A } else { -A };
    Complex64::new(re, im)
}

/// Independent uniform QPSK for every subcarrier of both users.
pub fn random_qpsk_frame(pair: &NumerologyPair, rng: &mut impl Rng) -> FrameSymbols {
    let d1 = (0..pair.user1.n_active()).map(|_| qpsk(rng)).collect();
    let d2 = (0..pair.q * pair.user2.n_active()).map(|_| qpsk(rng)).collect();
    FrameSymbols { d1, d2 }
}

// ---------------------------------------------------------------------------
// Frame synthesis
// ---------------------------------------------------------------------------

/// A received superposition frame together with its exact constituents
/// (kept so the genie stage and the tests can subtract them without error).
#[derive(Debug, Clone)]
pub struct ReceivedFrame {
    /// `sig1 + sig2 + noise`.
    pub r: Vec<Complex64>,
    /// User 1's signal after its channel, including the power scaling.
    pub sig1: Vec<Complex64>,
    /// User 2's signal after its channel, including the power scaling.
    pub sig2: Vec<Complex64>,
    /// The additive noise that was drawn.
    pub noise: Vec<Complex64>,
}

fn check_power(p: f64, what: &str) -> Result<()> {
    if !(p.is_finite() && p >= 0.0) {
        return Err(Error::InvalidPower(format!("{what} must be finite and >= 0, got {p}")));
    }
    Ok(())
}

/// Modulates both users, applies their channels, and adds circularly
/// symmetric white noise of per-sample variance `noise_var`:
/// `r = H1 s1 + H2 s2 + w`. The data symbols come from the caller so data
/// and noise randomness can live on independent streams.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_frame(
    syms: &FrameSymbols,
    pair: &NumerologyPair,
    h1: &ChannelRealization,
    h2: &ChannelRealization,
    p1: f64,
    p2: f64,
    noise_var: f64,
    rng: &mut impl Rng,
) -> Result<ReceivedFrame> {
    check_power(p1, "p1")?;
    check_power(p2, "p2")?;
    check_power(noise_var, "noise variance")?;

    let modem1 = OfdmModem::new(&pair.user1);
    let modem2 = OfdmModem::new(&pair.user2);

    let mut s1 = modem1.modulate_symbol(&syms.d1)?;
    let a1 = p1.sqrt();
    for v in &mut s1 {
        *v *= a1;
    }
    let mut s2 = build_frame_user2(&modem2, &syms.d2, pair.q)?;
    let a2 = p2.sqrt();
    for v in &mut s2 {
        *v *= a2;
    }

    let sig1 = apply_channel(h1, &s1);
    let sig2 = apply_channel(h2, &s2);

    let l1 = pair.frame_len();
    let sigma = (noise_var / 2.0).sqrt();
    let noise: Vec<Complex64> = (0..l1)
        .map(|_| {
            let re: f64 = rng.sample(rand_distr::StandardNormal);
            let im: f64 = rng.sample(rand_distr::StandardNormal);
            Complex64::new(sigma * re, sigma * im)
        })
        .collect();

    let r = sig1
        .iter()
        .zip(&sig2)
        .zip(&noise)
        .map(|((a, b), w)| a + b + w)
        .collect();
    Ok(ReceivedFrame { r, sig1, sig2, noise })
}

// ---------------------------------------------------------------------------
// Receiver front ends
// ---------------------------------------------------------------------------

/// User 1's demodulator: strip the long prefix, FFT, gather active bins.
pub fn front_end_user1(r: &[Complex64], pair: &NumerologyPair) -> Result<Vec<Complex64>> {
    OfdmModem::new(&pair.user1).demodulate_symbol(r)
}

/// User 2's demodulator for short symbol `m` (1-based): slice the window,
/// strip the short prefix, FFT, gather active bins.
pub fn front_end_user2(
    r: &[Complex64],
    pair: &NumerologyPair,
    m: usize,
) -> Result<Vec<Complex64>> {
    if m == 0 || m > pair.q {
        return Err(Error::SymbolIndexOutOfRange { m, q: pair.q });
    }
    if r.len() != pair.frame_len() {
        return Err(Error::DimensionMismatch {
            what: "front_end_user2 frame",
            expected: pair.frame_len(),
            got: r.len(),
        });
    }
    let l2 = pair.user2.symbol_len();
    OfdmModem::new(&pair.user2).demodulate_symbol(&r[(m - 1) * l2..m * l2])
}

/// All `q` of user 2's short-symbol observations, flattened like
/// [`FrameSymbols::d2`].
pub fn front_end_user2_frame(r: &[Complex64], pair: &NumerologyPair) -> Result<Vec<Complex64>> {
    if r.len() != pair.frame_len() {
        return Err(Error::DimensionMismatch {
            what: "front_end_user2_frame frame",
            expected: pair.frame_len(),
            got: r.len(),
        });
    }
    let modem2 = OfdmModem::new(&pair.user2);
    let l2 = pair.user2.symbol_len();
    let mut out = Vec::with_capacity(pair.q * pair.user2.n_active());
    for m in 0..pair.q {
        out.extend(modem2.demodulate_symbol(&r[m * l2..(m + 1) * l2])?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Genie-aided SIC
// ---------------------------------------------------------------------------

/// Per-user observations after genie-aided successive cancellation.
#[derive(Debug, Clone)]
pub struct SicResult {
    /// Decoding order that produced the observations.
    pub ordering: SicOrdering,
    /// User 1's bins (`n_active1` entries).
    pub obs1: Vec<Complex64>,
    /// User 2's bins flattened over short symbols (`q * n_active2` entries).
    pub obs2: Vec<Complex64>,
}

/// Runs both demodulation stages on a received frame. The first-decoded
/// user sees the raw superposition; the second sees the frame with the
/// first user's exact post-channel signal removed.
pub fn genie_sic(
    frame: &ReceivedFrame,
    pair: &NumerologyPair,
    ordering: SicOrdering,
) -> Result<SicResult> {
    let cancel = |keep: &[Complex64]| -> Vec<Complex64> {
        frame
            .r
            .iter()
            .zip(keep)
            .map(|(r, s)| r - s)
            .collect()
    };
    let (obs1, obs2) = match ordering {
        SicOrdering::User1First => {
            let obs1 = front_end_user1(&frame.r, pair)?;
            let cleaned = cancel(&frame.sig1);
            let obs2 = front_end_user2_frame(&cleaned, pair)?;
            (obs1, obs2)
        }
        SicOrdering::User2First => {
            let obs2 = front_end_user2_frame(&frame.r, pair)?;
            let cleaned = cancel(&frame.sig2);
            let obs1 = front_end_user1(&cleaned, pair)?;
            (obs1, obs2)
        }
    };
    Ok(SicResult { ordering, obs1, obs2 })
}

// ---------------------------------------------------------------------------
// Empirical interference measurement
// ---------------------------------------------------------------------------

/// Monte Carlo estimate of per-bin interference power.
#[derive(Debug, Clone)]
pub struct InterferenceEstimate {
    /// Mean received power per victim bin. For a user-1 victim this has
    /// `n_active1` entries; for a user-2 victim, `q * n_active2` flattened
    /// like [`FrameSymbols::d2`].
    pub per_bin: Vec<f64>,
    /// Number of frames averaged.
    pub trials: usize,
}

/// Transmits only the *interfering* user over `trials` noise-free frames and
/// averages the victim front end's per-bin power. `ordering` names the
/// victim exactly as the closed-form builders do: `User1First` measures what
/// user 1 collects from user 2 (channel `h_int` = user 2's), `User2First`
/// the reverse. The result estimates `p_int * γ` per bin.
pub fn empirical_interference(
    pair: &NumerologyPair,
    ordering: SicOrdering,
    h_int: &ChannelRealization,
    p_int: f64,
    trials: usize,
    rng: &mut impl Rng,
) -> Result<InterferenceEstimate> {
    if trials < MIN_TRIALS {
        return Err(Error::NotEnoughTrials { got: trials, min: MIN_TRIALS });
    }
    check_power(p_int, "interferer power")?;

    let modem1 = OfdmModem::new(&pair.user1);
    let modem2 = OfdmModem::new(&pair.user2);
    let amp = p_int.sqrt();
    let n_bins = match ordering {
        SicOrdering::User1First => pair.user1.n_active(),
        SicOrdering::User2First => pair.q * pair.user2.n_active(),
    };
    let mut acc = vec![0.0f64; n_bins];

    for _ in 0..trials {
        let obs = match ordering {
            SicOrdering::User1First => {
                // Interferer: user 2.
                let d: Vec<Complex64> = (0..pair.q * pair.user2.n_active())
                    .map(|_| qpsk(rng))
                    .collect();
                let mut s = build_frame_user2(&modem2, &d, pair.q)?;
                for v in &mut s {
                    *v *= amp;
                }
                let y = apply_channel(h_int, &s);
                front_end_user1(&y, pair)?
            }
            SicOrdering::User2First => {
                // Interferer: user 1.
                let d: Vec<Complex64> =
                    (0..pair.user1.n_active()).map(|_| qpsk(rng)).collect();
                let mut s = modem1.modulate_symbol(&d)?;
                for v in &mut s {
                    *v *= amp;
                }
                let y = apply_channel(h_int, &s);
                front_end_user2_frame(&y, pair)?
            }
        };
        for (a, z) in acc.iter_mut().zip(&obs) {
            *a += z.norm_sqr();
        }
    }
    let scale = 1.0 / trials as f64;
    for a in &mut acc {
        *a *= scale;
    }
    Ok(InterferenceEstimate { per_bin: acc, trials })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{cfr, draw_realization, TapProfile};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pair_4_5() -> NumerologyPair {
        NumerologyPair::from_indices(4, 5).unwrap()
    }

    fn two_channels(seed: u64) -> (ChannelRealization, ChannelRealization) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fs = 15.36e6;
        let h1 = draw_realization(&TapProfile::epa(), fs, &mut rng, "epa/u1").unwrap();
        let h2 = draw_realization(&TapProfile::epa(), fs, &mut rng, "epa/u2").unwrap();
        (h1, h2)
    }

    #[test]
    fn received_frame_is_the_sum_of_its_parts() {
        let pair = pair_4_5();
        let (h1, h2) = two_channels(1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let syms = random_qpsk_frame(&pair, &mut rng);
        let f = synthesize_frame(&syms, &pair, &h1, &h2, 0.7, 0.3, 0.1, &mut rng).unwrap();
        assert_eq!(f.r.len(), pair.frame_len());
        let norm: f64 = f.r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let resid: f64 = (0..f.r.len())
            .map(|t| (f.r[t] - f.sig1[t] - f.sig2[t] - f.noise[t]).norm())
            .fold(0.0, f64::max);
        assert!(resid <= 1e-12 * norm.max(1.0), "superposition residual {resid:.3e}");
    }

    #[test]
    fn qpsk_symbols_have_unit_energy_and_balanced_signs() {
        let pair = pair_4_5();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let syms = random_qpsk_frame(&pair, &mut rng);
        assert_eq!(syms.d1.len(), 256);
        assert_eq!(syms.d2.len(), 2 * 128);
        let mut re_pos = 0usize;
        for z in syms.d1.iter().chain(&syms.d2) {
            assert!((z.norm_sqr() - 1.0).abs() < 1e-12);
            if z.re > 0.0 {
                re_pos += 1;
            }
        }
        // 512 fair coin flips: a 10-sigma band is ~±113.
        assert!((143..=369).contains(&re_pos), "sign balance off: {re_pos}/512");
    }

    #[test]
    fn noise_matches_requested_variance() {
        let pair = pair_4_5();
        let (h1, h2) = two_channels(4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let syms = random_qpsk_frame(&pair, &mut rng);
        let n0 = 0.37;
        let mut acc = 0.0;
        let mut n = 0usize;
        for _ in 0..100 {
            let f = synthesize_frame(&syms, &pair, &h1, &h2, 1.0, 1.0, n0, &mut rng).unwrap();
            acc += f.noise.iter().map(|z| z.norm_sqr()).sum::<f64>();
            n += f.noise.len();
        }
        let mean = acc / n as f64;
        // 27 400 complex samples: the sample mean concentrates to ~0.6%.
        assert!(
            (mean - n0).abs() < 0.02 * n0,
            "noise variance estimate {mean:.4} for requested {n0}"
        );
    }

    #[test]
    fn own_channel_is_diagonal_within_the_prefix() {
        // Each user alone, no noise: the front end must return the data
        // scaled by that user's frequency response — for user 2 on every
        // short symbol, because the short prefix also swallows the tail of
        // the previous short symbol.
        let pair = pair_4_5();
        let (h1, h2) = two_channels(6);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let syms = random_qpsk_frame(&pair, &mut rng);

        let f1 = synthesize_frame(&syms, &pair, &h1, &h2, 1.0, 0.0, 0.0, &mut rng).unwrap();
        let obs1 = front_end_user1(&f1.r, &pair).unwrap();
        let psi1 = cfr(&h1, pair.user1.n_fft).unwrap().psi;
        for (i, &bin) in pair.user1.active_set.iter().enumerate() {
            let want = psi1[bin] * syms.d1[i];
            assert!((obs1[i] - want).norm() < 1e-10);
        }

        let f2 = synthesize_frame(&syms, &pair, &h1, &h2, 0.0, 1.0, 0.0, &mut rng).unwrap();
        let obs2 = front_end_user2_frame(&f2.r, &pair).unwrap();
        let psi2 = cfr(&h2, pair.user2.n_fft).unwrap().psi;
        let na2 = pair.user2.n_active();
        for m in 0..pair.q {
            for (o, &bin) in pair.user2.active_set.iter().enumerate() {
                let want = psi2[bin] * syms.d2[m * na2 + o];
                assert!((obs2[m * na2 + o] - want).norm() < 1e-10, "m={} o={o}", m + 1);
            }
        }
    }

    #[test]
    fn genie_cancellation_leaves_single_user_observations() {
        let pair = pair_4_5();
        let (h1, h2) = two_channels(8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let syms = random_qpsk_frame(&pair, &mut rng);
        let f = synthesize_frame(&syms, &pair, &h1, &h2, 0.8, 0.2, 0.05, &mut rng).unwrap();

        // Ordering 1: after cancelling user 1, user 2's bins must equal the
        // demodulation of (its own signal + noise) alone.
        let sic = genie_sic(&f, &pair, SicOrdering::User1First).unwrap();
        let alone: Vec<Complex64> =
            f.sig2.iter().zip(&f.noise).map(|(a, w)| a + w).collect();
        let want = front_end_user2_frame(&alone, &pair).unwrap();
        for (got, want) in sic.obs2.iter().zip(&want) {
            assert!((got - want).norm() < 1e-10);
        }

        // Ordering 2, same idea for user 1.
        let sic = genie_sic(&f, &pair, SicOrdering::User2First).unwrap();
        let alone: Vec<Complex64> =
            f.sig1.iter().zip(&f.noise).map(|(a, w)| a + w).collect();
        let want = front_end_user1(&alone, &pair).unwrap();
        for (got, want) in sic.obs1.iter().zip(&want) {
            assert!((got - want).norm() < 1e-10);
        }
    }

    #[test]
    fn raw_stage_sees_the_superposition() {
        // The first-decoded user's observation must contain the interferer:
        // with noise off, obs1 from the raw frame differs from the
        // interference-free observation by exactly the leaked signal.
        let pair = pair_4_5();
        let (h1, h2) = two_channels(10);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let syms = random_qpsk_frame(&pair, &mut rng);
        let f = synthesize_frame(&syms, &pair, &h1, &h2, 0.5, 0.5, 0.0, &mut rng).unwrap();
        let sic = genie_sic(&f, &pair, SicOrdering::User1First).unwrap();
        let own = front_end_user1(&f.sig1, &pair).unwrap();
        let leak = front_end_user1(&f.sig2, &pair).unwrap();
        let total_leak: f64 = leak.iter().map(|z| z.norm_sqr()).sum();
        assert!(total_leak > 1e-6, "expected nonzero cross-numerology leakage");
        for i in 0..own.len() {
            assert!((sic.obs1[i] - own[i] - leak[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn interference_estimator_enforces_minimum_trials() {
        let pair = pair_4_5();
        let (_, h2) = two_channels(12);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let err = empirical_interference(&pair, SicOrdering::User1First, &h2, 1.0, 99, &mut rng);
        assert!(matches!(err, Err(Error::NotEnoughTrials { got: 99, min: 100 })));
    }

    #[test]
    fn flat_interferer_power_is_conserved_per_bin() {
        // Single-tap unit channel: the leakage per victim bin still varies,
        // but total received power equals total transmitted power, so the
        // per-bin estimates must average to p_int per occupied bin ratio.
        let pair = pair_4_5();
        let h = ChannelRealization::from_taps(vec![Complex64::new(1.0, 0.0)], 61.44e6, "flat")
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let est =
            empirical_interference(&pair, SicOrdering::User1First, &h, 1.0, 200, &mut rng)
                .unwrap();
        assert_eq!(est.per_bin.len(), 256);
        // Unitary modulation on a full grid puts unit expected power on
        // every frame sample; the victim's unitary FFT keeps n_fft1 of them
        // and a full active set gathers every bin, so the expected total is
        // exactly n_fft1. 200 frames x 256 samples concentrates to well
        // under the 2% band.
        let total: f64 = est.per_bin.iter().sum();
        let want = pair.user1.n_fft as f64;
        assert!(
            (total - want).abs() < 0.02 * want,
            "leakage total {total:.2} vs expected {want:.2}"
        );
    }
}
