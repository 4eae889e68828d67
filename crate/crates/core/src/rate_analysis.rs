//! Achievable rates, SIC power allocation, and access-scheme baselines.
//!
//! The rate model treats every subcarrier as a Gaussian channel whose
//! impairments are fully described by the diagonal frequency response and
//! the interference power vectors from [`crate::ini_analysis`]:
//!
//! * first-decoded user, bin `n`:
//!   `SINR = p_own |ψ_n|^2 / (p_other γ_n + n0)`
//! * second-decoded user (genie-aided cancellation): `SINR = p_own |ψ_n|^2 / n0`
//!
//! and `R = (B / n_fft) Σ_n log2(1 + SINR_n)` over the active bins, with the
//! wide-spacing user averaging its `q` short symbols. The orthogonal
//! baselines reuse the same machinery on partitioned active sets with equal
//! power and no cancellation stage.
//!
//! [`LinkState`] caches everything that depends only on the channels, so
//! power-allocation scans and SNR sweeps do not rebuild coupling matrices.
//! When the numerologies coincide the interference vectors are taken
//! directly from the frequency response (`γ_n = |ψ_other,n|^2` on shared
//! bins), which makes the mixed-numerology path with `q = 1` agree with the
//! single-numerology computation to the last bit.

use num_complex::Complex64;

use crate::channel::{cfr, ChannelRealization};
use crate::error::{Error, Result};
use crate::ini_analysis::{ini_ordering1, ini_ordering2_all, mse_vector, SicOrdering};
use crate::numerology::NumerologyPair;

// ---------------------------------------------------------------------------
// Power allocation
// ---------------------------------------------------------------------------

/// Absolute per-subcarrier symbol powers for the two users.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSplit {
    /// User 1's symbol power.
    pub p1: f64,
    /// User 2's symbol power.
    pub p2: f64,
}

impl PowerSplit {
    /// `p1 = alpha * total`, `p2 = (1 - alpha) * total` with `0 < alpha < 1`.
    pub fn from_alpha(alpha: f64, total: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidPower(format!(
                "power fraction must lie strictly inside (0, 1), got {alpha}"
            )));
        }
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::InvalidPower(format!(
                "total power must be finite and positive, got {total}"
            )));
        }
        Ok(Self { p1: alpha * total, p2: (1.0 - alpha) * total })
    }

    /// Even split, used by the orthogonal baselines.
    pub fn equal(total: f64) -> Self {
        Self { p1: total / 2.0, p2: total / 2.0 }
    }

    /// User 1's fraction of the total.
    pub fn alpha(&self) -> f64 {
        self.p1 / (self.p1 + self.p2)
    }

    /// Combined power.
    pub fn total(&self) -> f64 {
        self.p1 + self.p2
    }
}

/// Noise power per complex sample (equivalently per demodulated bin, the
/// front ends being unitary) for a given SNR in dB at unit symbol power.
pub fn noise_psd_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

// ---------------------------------------------------------------------------
// Cached per-channel link state
// ---------------------------------------------------------------------------

/// Everything the rate formulas need that depends only on the channel pair
/// and the numerology pair: frequency responses on the active bins and the
/// interference power vectors for both decoding directions.
#[derive(Debug, Clone)]
pub struct LinkState {
    pair: NumerologyPair,
    /// User 1's channel response on its active bins.
    pub psi1: Vec<Complex64>,
    /// User 2's channel response on its active bins.
    pub psi2: Vec<Complex64>,
    /// Interference power per user-1 bin from unit-power user-2 data.
    pub gamma1: Vec<f64>,
    /// Interference power per user-2 bin from unit-power user-1 data, one
    /// vector per short symbol.
    pub gamma2_per_m: Vec<Vec<f64>>,
}

impl LinkState {
    /// Evaluates the responses and coupling powers for one channel draw.
    ///
    /// Both channels must fit the shorter cyclic prefix: that single bound
    /// is what makes each user's own channel diagonal *and* both coupling
    /// formulas applicable.
    pub fn compute(
        pair: &NumerologyPair,
        h1: &ChannelRealization,
        h2: &ChannelRealization,
    ) -> Result<Self> {
        let min_cp = pair.min_n_cp();
        for h in [h1, h2] {
            if h.order() > min_cp {
                return Err(Error::ChannelExceedsCp {
                    n_ch: h.order(),
                    n_cp: min_cp,
                    fs_hz: h.fs_hz,
                });
            }
        }

        let full1 = cfr(h1, pair.user1.n_fft)?.psi;
        let full2 = cfr(h2, pair.user2.n_fft)?.psi;
        let psi1: Vec<Complex64> = pair.user1.active_set.iter().map(|&b| full1[b]).collect();
        let psi2: Vec<Complex64> = pair.user2.active_set.iter().map(|&b| full2[b]).collect();

        let (gamma1, gamma2_per_m) = if pair.q == 1 {
            // Same grid: a victim bin hears the interferer's response on
            // that bin iff the interferer occupies it. Computing this from
            // the frequency response keeps the q = 1 path bit-identical to
            // the single-numerology formulas.
            let int2 = cfr(h2, pair.user1.n_fft)?.psi;
            let g1 = gamma_same_grid(&pair.user1.active_set, &pair.user2.active_set, &int2);
            let int1 = cfr(h1, pair.user2.n_fft)?.psi;
            let g2 = gamma_same_grid(&pair.user2.active_set, &pair.user1.active_set, &int1);
            (g1, vec![g2])
        } else {
            let g1 = mse_vector(&ini_ordering1(h2, pair)?).0;
            let g2 = ini_ordering2_all(h1, pair)?
                .iter()
                .map(|g| mse_vector(g).0)
                .collect();
            (g1, g2)
        };

        Ok(Self { pair: pair.clone(), psi1, psi2, gamma1, gamma2_per_m })
    }

    /// The numerology pair this state was computed for.
    pub fn pair(&self) -> &NumerologyPair {
        &self.pair
    }
}

/// Shared-grid interference powers: `|ψ_int|^2` where the interferer's
/// occupancy overlaps the victim's, zero elsewhere.
fn gamma_same_grid(
    victim_bins: &[usize],
    interferer_bins: &[usize],
    psi_int: &[Complex64],
) -> Vec<f64> {
    victim_bins
        .iter()
        .map(|&b| {
            if interferer_bins.binary_search(&b).is_ok() {
                psi_int[b].norm_sqr()
            } else {
                0.0
            }
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Rate evaluation
// ---------------------------------------------------------------------------

/// Switches that change the reported numbers without changing the model.
#[derive(Debug, Clone, Copy, Default)]
pub struct RateOptions {
    /// Discount each user's rate by `n_fft / (n_fft + n_cp)` to account for
    /// prefix air time. Off by default: comparisons between schemes sharing
    /// a prefix structure are unaffected either way.
    pub cp_overhead: bool,
}

/// Rates for one channel draw, power split, and decoding arrangement.
#[derive(Debug, Clone, Copy)]
pub struct RateReport {
    /// 1 or 2 for the SIC orderings, 0 for orthogonal access (no SIC).
    pub ordering: u8,
    /// The split the rates were evaluated at.
    pub split: PowerSplit,
    /// Noise power per bin.
    pub noise_psd: f64,
    /// User 1's achievable rate, bit/s.
    pub rate1_bps: f64,
    /// User 2's achievable rate, bit/s.
    pub rate2_bps: f64,
    /// `rate1_bps + rate2_bps`.
    pub sum_rate_bps: f64,
    /// Sum rate over the shared bandwidth, bit/s/Hz.
    pub se_bps_hz: f64,
    /// Arithmetic mean of user 1's per-bin SINRs (diagnostic).
    pub mean_sinr_user1: f64,
    /// Arithmetic mean of user 2's per-bin SINRs over all short symbols.
    pub mean_sinr_user2: f64,
}

/// Per-bin tally: Σ log2(1+SINR), Σ SINR, bin count.
fn tally(psi: &[Complex64], p_own: f64, ini: Option<&[f64]>, p_int: f64, n0: f64) -> (f64, f64, usize) {
    let mut bits = 0.0;
    let mut sinr_sum = 0.0;
    for (i, z) in psi.iter().enumerate() {
        let denom = n0 + ini.map_or(0.0, |g| p_int * g[i]);
        let sinr = p_own * z.norm_sqr() / denom;
        bits += (1.0 + sinr).log2();
        sinr_sum += sinr;
    }
    (bits, sinr_sum, psi.len())
}

fn check_noise(n0: f64) -> Result<()> {
    if !(n0.is_finite() && n0 > 0.0) {
        return Err(Error::InvalidPower(format!(
            "noise power per bin must be finite and positive, got {n0}"
        )));
    }
    Ok(())
}

/// Core evaluator shared by the SIC and orthogonal paths. `ini1`/`ini2`
/// carry each user's interference exposure (`None` = interference-free).
fn evaluate(
    state: &LinkState,
    split: PowerSplit,
    n0: f64,
    ordering: u8,
    user1_sees_ini: bool,
    user2_sees_ini: bool,
    opts: &RateOptions,
) -> RateReport {
    let pair = &state.pair;
    let b = pair.bandwidth_hz();
    let over = |num: &crate::numerology::Numerology| {
        if opts.cp_overhead {
            num.n_fft as f64 / num.symbol_len() as f64
        } else {
            1.0
        }
    };

    let ini1 = user1_sees_ini.then_some(state.gamma1.as_slice());
    let (bits1, sinr1_sum, n1_bins) = tally(&state.psi1, split.p1, ini1, split.p2, n0);
    let rate1 = b / pair.user1.n_fft as f64 * bits1 * over(&pair.user1);

    let mut bits2_total = 0.0;
    let mut sinr2_sum = 0.0;
    let mut n2_bins = 0usize;
    let q_eff = state.gamma2_per_m.len();
    debug_assert!(q_eff >= 1, "link state always carries at least one window");
    for m in 0..q_eff {
        let ini2 = user2_sees_ini.then(|| state.gamma2_per_m[m].as_slice());
        let (bits, s, c) = tally(&state.psi2, split.p2, ini2, split.p1, n0);
        bits2_total += bits;
        sinr2_sum += s;
        n2_bins += c;
    }
    // Short symbols split the frame's air time evenly: average their rates.
    let rate2 =
        b / pair.user2.n_fft as f64 * (bits2_total / q_eff as f64) * over(&pair.user2);

    let sum = rate1 + rate2;
    RateReport {
        ordering,
        split,
        noise_psd: n0,
        rate1_bps: rate1,
        rate2_bps: rate2,
        sum_rate_bps: sum,
        se_bps_hz: sum / b,
        mean_sinr_user1: if n1_bins > 0 { sinr1_sum / n1_bins as f64 } else { 0.0 },
        mean_sinr_user2: if n2_bins > 0 { sinr2_sum / n2_bins as f64 } else { 0.0 },
    }
}

/// Superposed transmission with genie-aided SIC: the first-decoded user
/// absorbs the cross-numerology leakage, the second is interference-free.
pub fn noma_rates(
    state: &LinkState,
    split: PowerSplit,
    noise_psd: f64,
    ordering: SicOrdering,
    opts: &RateOptions,
) -> Result<RateReport> {
    check_noise(noise_psd)?;
    let report = match ordering {
        SicOrdering::User1First => evaluate(state, split, noise_psd, 1, true, false, opts),
        SicOrdering::User2First => evaluate(state, split, noise_psd, 2, false, true, opts),
    };
    Ok(report)
}

/// Orthogonal transmission on the state's (partitioned) active sets: equal
/// split, no cancellation, and — unless `ideal` — both users exposed to
/// whatever residual leakage the partition leaves.
pub fn oma_rates(
    state: &LinkState,
    noise_psd: f64,
    total_power: f64,
    ideal: bool,
    opts: &RateOptions,
) -> Result<RateReport> {
    check_noise(noise_psd)?;
    if !(total_power.is_finite() && total_power > 0.0) {
        return Err(Error::InvalidPower(format!(
            "total power must be finite and positive, got {total_power}"
        )));
    }
    let split = PowerSplit::equal(total_power);
    Ok(evaluate(state, split, noise_psd, 0, !ideal, !ideal, opts))
}

// ---------------------------------------------------------------------------
// Exhaustive power-allocation search
// ---------------------------------------------------------------------------

/// Outcome of a grid scan over user 1's power fraction.
#[derive(Debug, Clone)]
pub struct PowerSearchResult {
    /// Report at the best split found.
    pub best: RateReport,
    /// Grid step the scan used.
    pub grid_step: f64,
    /// Number of candidate splits evaluated.
    pub candidates: usize,
}

/// Scans `alpha = g, 2g, …` up to `1 - g` and keeps the split with the
/// largest sum rate. Ties (and improvements below one part in 1e12, which
/// are indistinguishable from floating-point noise) resolve toward the
/// smallest `alpha`, so flat-channel scans are reproducible.
pub fn exhaustive_power_search(
    state: &LinkState,
    noise_psd: f64,
    ordering: SicOrdering,
    grid_step: f64,
    total_power: f64,
    opts: &RateOptions,
) -> Result<PowerSearchResult> {
    check_noise(noise_psd)?;
    if !(grid_step.is_finite() && grid_step > 0.0 && grid_step <= 0.5) {
        return Err(Error::InvalidPower(format!(
            "power grid step must lie in (0, 0.5], got {grid_step}"
        )));
    }
    let count = ((1.0 - grid_step) / grid_step + 1e-9).floor() as usize;
    let mut best: Option<RateReport> = None;
    for i in 1..=count {
        let split = PowerSplit::from_alpha(i as f64 * grid_step, total_power)?;
        let report = noma_rates(state, split, noise_psd, ordering, opts)?;
        let better = match &best {
            None => true,
            Some(b) => report.sum_rate_bps > b.sum_rate_bps * (1.0 + 1e-12),
        };
        if better {
            best = Some(report);
        }
    }
    Ok(PowerSearchResult {
        best: best.expect("grid always has at least one candidate"),
        grid_step,
        candidates: count,
    })
}

// ---------------------------------------------------------------------------
// Access schemes
// ---------------------------------------------------------------------------

/// The four access arrangements the experiments compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Superposed users on different numerologies, SIC at the receiver.
    MnNoma,
    /// Superposed users sharing one numerology, SIC at the receiver.
    SnNoma,
    /// Band-partitioned users on different numerologies, no SIC.
    MnOma,
    /// Band-partitioned users sharing one numerology, no SIC.
    SnOma,
}

impl Scheme {
    /// Stable lowercase tag used in result tables.
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::MnNoma => "mn-noma",
            Scheme::SnNoma => "sn-noma",
            Scheme::MnOma => "mn-oma",
            Scheme::SnOma => "sn-oma",
        }
    }

    /// All schemes in table order.
    pub fn all() -> [Scheme; 4] {
        [Scheme::MnNoma, Scheme::SnNoma, Scheme::MnOma, Scheme::SnOma]
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How the baseline schemes are derived from the primary configuration.
/// The default is user 1's grid, no guard, leakage modeled.
#[derive(Debug, Clone, Copy, Default)]
pub struct BaselineConfig {
    /// Run the single-numerology baselines on user 2's numerology instead
    /// of user 1's.
    pub sn_on_user2_grid: bool,
    /// Guard band at the partition boundary of the mixed-numerology
    /// orthogonal baseline, counted in user 2's subcarriers (user 1 cedes
    /// `q` times as many of its finer bins, so both sides give up the same
    /// spectral width).
    pub guard_subcarriers: usize,
    /// Pretend the partition is perfectly orthogonal even across
    /// numerologies (zero residual leakage) instead of modeling it.
    pub ideal_oma: bool,
}

/// Both users on one shared numerology, full occupancy: the single-
/// numerology superposition arrangement.
pub fn sn_pair(pair: &NumerologyPair, cfg: &BaselineConfig) -> Result<NumerologyPair> {
    let num = if cfg.sn_on_user2_grid { &pair.user2 } else { &pair.user1 };
    NumerologyPair::new(num.clone(), num.clone())
}

/// Intersection of a sorted occupancy with a contiguous range.
fn clip(set: &[usize], lo: usize, hi: usize) -> Vec<usize> {
    set.iter().copied().filter(|&b| b >= lo && b < hi).collect()
}

/// Splits the band between the users for the mixed-numerology orthogonal
/// baseline: user 1 keeps the lower half-spectrum, user 2 the upper, and
/// each cedes the guard width next to the partition boundary.
pub fn mn_oma_pair(pair: &NumerologyPair, cfg: &BaselineConfig) -> Result<NumerologyPair> {
    let n1 = pair.user1.n_fft;
    let n2 = pair.user2.n_fft;
    let g1 = cfg.guard_subcarriers.saturating_mul(pair.q);
    let g2 = cfg.guard_subcarriers;
    let hi1 = (n1 / 2).saturating_sub(g1);
    let lo2 = (n2 / 2).saturating_add(g2).min(n2);
    let user1 = pair.user1.clone().with_active_set(clip(&pair.user1.active_set, 0, hi1))?;
    let user2 = pair.user2.clone().with_active_set(clip(&pair.user2.active_set, lo2, n2))?;
    NumerologyPair::new(user1, user2)
}

/// Disjoint halves of one shared numerology: exactly orthogonal, so no
/// guard is needed and none is applied.
pub fn sn_oma_pair(pair: &NumerologyPair, cfg: &BaselineConfig) -> Result<NumerologyPair> {
    let num = if cfg.sn_on_user2_grid { &pair.user2 } else { &pair.user1 };
    let n = num.n_fft;
    let user1 = num.clone().with_active_set(clip(&num.active_set, 0, n / 2))?;
    let user2 = num.clone().with_active_set(clip(&num.active_set, n / 2, n))?;
    NumerologyPair::new(user1, user2)
}

/// One-call evaluation of any scheme for one channel draw. The superposed
/// schemes scan the power grid and report the best split; the orthogonal
/// schemes use the even split and carry ordering tag 0.
#[allow(clippy::too_many_arguments)]
pub fn scheme_rates(
    scheme: Scheme,
    pair: &NumerologyPair,
    h1: &ChannelRealization,
    h2: &ChannelRealization,
    noise_psd: f64,
    ordering: SicOrdering,
    grid_step: f64,
    total_power: f64,
    cfg: &BaselineConfig,
    opts: &RateOptions,
) -> Result<RateReport> {
    match scheme {
        Scheme::MnNoma => {
            let state = LinkState::compute(pair, h1, h2)?;
            Ok(exhaustive_power_search(&state, noise_psd, ordering, grid_step, total_power, opts)?.best)
        }
        Scheme::SnNoma => {
            let state = LinkState::compute(&sn_pair(pair, cfg)?, h1, h2)?;
            Ok(exhaustive_power_search(&state, noise_psd, ordering, grid_step, total_power, opts)?.best)
        }
        Scheme::MnOma => {
            let state = LinkState::compute(&mn_oma_pair(pair, cfg)?, h1, h2)?;
            oma_rates(&state, noise_psd, total_power, cfg.ideal_oma, opts)
        }
        Scheme::SnOma => {
            let state = LinkState::compute(&sn_oma_pair(pair, cfg)?, h1, h2)?;
            oma_rates(&state, noise_psd, total_power, false, opts)
        }
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
