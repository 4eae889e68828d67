//! Experiment orchestration: scenario configuration, deterministic seeding,
//! sweep runners, and result files.
//!
//! Every runner is a pure function of its [`Scenario`]: channel draws, data,
//! and noise each live on their own seed stream derived from
//! `(master seed, stream, trial)`, so repeated runs are byte-identical and
//! the *same trial index draws the same channels in every experiment type*.
//! That last property is load-bearing: a spectral-efficiency point computed
//! by the numerology sweep can be reproduced exactly by an SNR sweep
//! configured for that numerology pair.
//!
//! Outputs are plain CSV (one row per trial/point plus a per-point mean
//! file), a static SVG chart per sweep, and a JSON report for the
//! self-validation run.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    check_cp_fit, default_sample_rate, draw_realization, ChannelRealization, TapProfile,
};
use crate::channel::cfr;
use crate::error::{Error, Result};
use crate::ini_analysis::{ini_ordering1, SicOrdering};
use crate::numerology::{NumerologyPair, MAX_CATALOG_INDEX};
use crate::rate_analysis::{
    exhaustive_power_search, mn_oma_pair, noise_psd_from_snr_db, noma_rates, oma_rates, sn_oma_pair,
    sn_pair, BaselineConfig, LinkState, PowerSplit, RateOptions, RateReport, Scheme,
};
use crate::sim_chain::{
    empirical_interference, front_end_user1, front_end_user2_frame, genie_sic, random_qpsk_frame,
    synthesize_frame,
};
use crate::svg::{line_chart, Series};

// ---------------------------------------------------------------------------
// Seed streams
// ---------------------------------------------------------------------------

/// Purpose tags for deriving independent RNGs from one master seed.
pub mod streams {
    /// User 1's channel realization.
    pub const CHANNEL_U1: u64 = 1;
    /// User 2's channel realization.
    pub const CHANNEL_U2: u64 = 2;
    /// Transmitted data symbols.
    pub const DATA: u64 = 3;
    /// Receiver noise.
    pub const NOISE: u64 = 4;
}

fn splitmix_next(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit seed for `(master, stream, trial)`. Changing any input
/// decorrelates the stream; holding them fixed reproduces it exactly.
pub fn sub_seed(master: u64, stream: u64, trial: u64) -> u64 {
    let mut s = master;
    let a = splitmix_next(&mut s);
    let mut t = a ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let b = splitmix_next(&mut t);
    let mut u = b ^ trial.wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    splitmix_next(&mut u)
}

/// ChaCha generator on the given stream.
pub fn stream_rng(master: u64, stream: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(master, stream, trial))
}

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

/// Full experiment configuration. Serialized as JSON; every field has a
/// default, unknown fields are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    /// Catalog index of user 1's numerology (the finer subcarrier spacing,
    /// larger FFT).
    pub numerology_user1: u32,
    /// Catalog index of user 2's numerology.
    pub numerology_user2: u32,
    /// User 1's power-delay profile: EPA, EVA, FLAT, or a file path.
    pub profile_user1: String,
    /// User 2's power-delay profile.
    pub profile_user2: String,
    /// SNR grid for the SNR sweep, in dB (symbol power 1 over noise power).
    pub snr_db_list: Vec<f64>,
    /// Operating SNR for the numerology sweep, the per-subcarrier error
    /// report, and validation, in dB.
    pub sweep_snr_db: f64,
    /// Channel draws averaged per sweep point.
    pub trials: usize,
    /// Master seed; all randomness derives from it.
    pub seed: u64,
    /// Grid step for the power-allocation scan.
    pub power_grid_step: f64,
    /// Guard width at the orthogonal baseline's partition boundary, in
    /// user-2 subcarriers.
    pub guard_subcarriers: usize,
    /// Run single-numerology baselines on user 2's numerology instead of
    /// user 1's.
    pub sn_on_user2_grid: bool,
    /// Treat the mixed-numerology partition as leakage-free.
    pub ideal_oma: bool,
    /// Discount rates by cyclic-prefix air time.
    pub cp_overhead: bool,
    /// Include the shared-numerology superposition baseline.
    pub include_sn_noma: bool,
    /// Include the mixed-numerology orthogonal baseline.
    pub include_mn_oma: bool,
    /// Include the shared-numerology orthogonal baseline.
    pub include_sn_oma: bool,
    /// User-2 catalog indices for the numerology sweep; empty = every
    /// index from `numerology_user1 + 1` through the catalog end.
    pub sweep_user2_indices: Vec<u32>,
    /// Noise-free frames per Monte Carlo estimate in the validation run.
    pub validate_trials: usize,
    /// Directory the result files are written to.
    pub out_dir: PathBuf,
    /// Sample-rate override in Hz; unset = the largest power-of-two
    /// fraction of the bandwidth whose quantized delay spread fits the
    /// shorter cyclic prefix.
    pub fs_hz: Option<f64>,
    /// Base subcarrier spacing the catalog scales from, in Hz.
    pub delta_f_base_hz: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            numerology_user1: 4,
            numerology_user2: 5,
            profile_user1: "EPA".into(),
            profile_user2: "EPA".into(),
            snr_db_list: vec![0.0, 5.0, 10.0, 15.0, 20.0],
            sweep_snr_db: 10.0,
            trials: 200,
            seed: 1,
            power_grid_step: 0.01,
            guard_subcarriers: 0,
            sn_on_user2_grid: false,
            ideal_oma: false,
            cp_overhead: false,
            include_sn_noma: true,
            include_mn_oma: true,
            include_sn_oma: true,
            sweep_user2_indices: Vec::new(),
            validate_trials: 10_000,
            out_dir: PathBuf::from("results"),
            fs_hz: None,
            delta_f_base_hz: 15_000.0,
        }
    }
}

impl Scenario {
    /// Parses a scenario from JSON text.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text)
            .map_err(|e| Error::InvalidScenario(format!("config parse error: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    /// Loads a scenario from a JSON file.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        Self::from_json_str(&fs::read_to_string(path)?)
    }

    /// Checks internal consistency without touching the filesystem.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.snr_db_list.is_empty() {
            return bad("snr_db_list must not be empty".into());
        }
        for &s in &self.snr_db_list {
            if !s.is_finite() {
                return bad(format!("snr_db_list contains non-finite value {s}"));
            }
        }
        if !self.sweep_snr_db.is_finite() {
            return bad(format!("sweep_snr_db is not finite: {}", self.sweep_snr_db));
        }
        if !(self.power_grid_step > 0.0 && self.power_grid_step <= 0.5) {
            return bad(format!(
                "power_grid_step must lie in (0, 0.5], got {}",
                self.power_grid_step
            ));
        }
        if self.validate_trials < crate::sim_chain::MIN_TRIALS {
            return bad(format!(
                "validate_trials must be at least {}, got {}",
                crate::sim_chain::MIN_TRIALS,
                self.validate_trials
            ));
        }
        if !(self.delta_f_base_hz.is_finite() && self.delta_f_base_hz > 0.0) {
            return bad(format!(
                "delta_f_base_hz must be positive, got {}",
                self.delta_f_base_hz
            ));
        }
        if let Some(fs) = self.fs_hz {
            if !(fs.is_finite() && fs > 0.0) {
                return bad(format!("fs_hz must be positive, got {fs}"));
            }
        }
        for &idx in &self.sweep_user2_indices {
            if idx > MAX_CATALOG_INDEX {
                return bad(format!(
                    "sweep_user2_indices entry {idx} exceeds the catalog (max {MAX_CATALOG_INDEX})"
                ));
            }
            if idx < self.numerology_user1 {
                return bad(format!(
                    "sweep_user2_indices entry {idx} is finer than user 1's numerology {}",
                    self.numerology_user1
                ));
            }
        }
        Ok(())
    }

    /// The mixed-numerology pair this scenario studies.
    pub fn pair(&self) -> Result<NumerologyPair> {
        NumerologyPair::from_indices_with_base(
            self.numerology_user1,
            self.numerology_user2,
            self.delta_f_base_hz,
        )
    }

    fn profiles(&self) -> Result<(TapProfile, TapProfile)> {
        Ok((resolve_profile(&self.profile_user1)?, resolve_profile(&self.profile_user2)?))
    }

    fn baseline_config(&self) -> BaselineConfig {
        BaselineConfig {
            sn_on_user2_grid: self.sn_on_user2_grid,
            guard_subcarriers: self.guard_subcarriers,
            ideal_oma: self.ideal_oma,
        }
    }

    fn rate_options(&self) -> RateOptions {
        RateOptions { cp_overhead: self.cp_overhead }
    }

    /// User-2 indices the numerology sweep visits.
    pub fn sweep_indices(&self) -> Vec<u32> {
        if self.sweep_user2_indices.is_empty() {
            (self.numerology_user1 + 1..=MAX_CATALOG_INDEX).collect()
        } else {
            self.sweep_user2_indices.clone()
        }
    }
}

/// Built-in name first, then a tap-table file.
fn resolve_profile(name_or_path: &str) -> Result<TapProfile> {
    match TapProfile::by_name(name_or_path) {
        Ok(p) => Ok(p),
        Err(name_err) => {
            let path = Path::new(name_or_path);
            if path.exists() {
                TapProfile::from_file(path)
            } else {
                Err(name_err)
            }
        }
    }
}

/// Sample rate for a pair under this scenario: the override if given (it
/// must quantize both delay spreads inside the shorter prefix), otherwise
/// the derived default.
fn sample_rate_for(
    scenario: &Scenario,
    pair: &NumerologyPair,
    p1: &TapProfile,
    p2: &TapProfile,
) -> Result<f64> {
    let max_delay = p1.max_delay_s().max(p2.max_delay_s());
    let fs = match scenario.fs_hz {
        Some(fs) => fs,
        None => default_sample_rate(pair.bandwidth_hz(), max_delay, pair.min_n_cp()),
    };
    let worst_order = (max_delay * fs).round() as usize;
    if worst_order > pair.min_n_cp() {
        return Err(Error::InvalidScenario(format!(
            "sample rate {fs} Hz quantizes the delay spread to {worst_order} taps, \
             which exceeds the shorter cyclic prefix ({} samples)",
            pair.min_n_cp()
        )));
    }
    Ok(fs)
}

/// Draws the trial's channel pair on its dedicated seed streams.
fn draw_trial_channels(
    scenario: &Scenario,
    pair: &NumerologyPair,
    p1: &TapProfile,
    p2: &TapProfile,
    fs: f64,
    trial: u64,
) -> Result<(ChannelRealization, ChannelRealization)> {
    let mut rng1 = stream_rng(scenario.seed, streams::CHANNEL_U1, trial);
    let h1 = draw_realization(p1, fs, &mut rng1, format!("{}/u1/t{trial}", p1.name))?;
    let mut rng2 = stream_rng(scenario.seed, streams::CHANNEL_U2, trial);
    let h2 = draw_realization(p2, fs, &mut rng2, format!("{}/u2/t{trial}", p2.name))?;
    check_cp_fit(&h1, pair.min_n_cp())?;
    check_cp_fit(&h2, pair.min_n_cp())?;
    Ok((h1, h2))
}

// ---------------------------------------------------------------------------
// Rows and tables
// ---------------------------------------------------------------------------

/// One spectral-efficiency observation.
#[derive(Debug, Clone, Copy)]
pub struct SeRow {
    /// Channel-draw index.
    pub trial: u64,
    /// Operating SNR in dB.
    pub snr_db: f64,
    /// FFT-length ratio of the scenario's numerology pair.
    pub q: usize,
    /// Access scheme evaluated.
    pub scheme: Scheme,
    /// 1/2 = SIC order, 0 = orthogonal (no SIC).
    pub ordering: u8,
    /// User 1's power fraction (0.5 for the orthogonal schemes).
    pub alpha: f64,
    /// User 1's rate, bit/s.
    pub rate1_bps: f64,
    /// User 2's rate, bit/s.
    pub rate2_bps: f64,
    /// Sum rate over the shared bandwidth, bit/s/Hz.
    pub se_bps_hz: f64,
}

impl SeRow {
    fn from_report(trial: u64, snr_db: f64, q: usize, scheme: Scheme, r: &RateReport) -> Self {
        Self {
            trial,
            snr_db,
            q,
            scheme,
            ordering: r.ordering,
            alpha: r.split.alpha(),
            rate1_bps: r.rate1_bps,
            rate2_bps: r.rate2_bps,
            se_bps_hz: r.se_bps_hz,
        }
    }

    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.trial,
            self.snr_db,
            self.q,
            self.scheme,
            self.ordering,
            self.alpha,
            self.rate1_bps,
            self.rate2_bps,
            self.se_bps_hz
        )
    }
}

const SE_HEADER: &str = "trial,snr_db,q,scheme,ordering,alpha,rate1_bps,rate2_bps,se_bps_hz";
const SE_MEAN_HEADER: &str =
    "snr_db,q,scheme,ordering,trials,mean_alpha,mean_rate1_bps,mean_rate2_bps,mean_se_bps_hz";

/// Per-point mean of the rows, keyed in first-appearance order.
fn mean_rows(rows: &[SeRow]) -> Vec<String> {
    struct Acc {
        key: (u64, usize, Scheme, u8),
        snr_db: f64,
        n: usize,
        alpha: f64,
        r1: f64,
        r2: f64,
        se: f64,
    }
    let mut accs: Vec<Acc> = Vec::new();
    for row in rows {
        let key = (row.snr_db.to_bits(), row.q, row.scheme, row.ordering);
        let acc = match accs.iter_mut().find(|a| a.key == key) {
            Some(a) => a,
            None => {
                accs.push(Acc {
                    key,
                    snr_db: row.snr_db,
                    n: 0,
                    alpha: 0.0,
                    r1: 0.0,
                    r2: 0.0,
                    se: 0.0,
                });
                accs.last_mut().expect("just pushed")
            }
        };
        acc.n += 1;
        acc.alpha += row.alpha;
        acc.r1 += row.rate1_bps;
        acc.r2 += row.rate2_bps;
        acc.se += row.se_bps_hz;
    }
    accs.iter()
        .map(|a| {
            let n = a.n as f64;
            format!(
                "{},{},{},{},{},{},{},{},{}",
                a.snr_db,
                a.key.1,
                a.key.2,
                a.key.3,
                a.n,
                a.alpha / n,
                a.r1 / n,
                a.r2 / n,
                a.se / n
            )
        })
        .collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Per-trial evaluation shared by both sweeps
// ---------------------------------------------------------------------------

/// Evaluates every enabled scheme at every SNR for one channel draw. The
/// coupling matrices are computed once per scheme and reused across SNRs
/// and power splits.
fn se_rows_for_trial(
    scenario: &Scenario,
    pair: &NumerologyPair,
    p1: &TapProfile,
    p2: &TapProfile,
    fs: f64,
    snrs: &[f64],
    trial: u64,
) -> Result<Vec<SeRow>> {
    let (h1, h2) = draw_trial_channels(scenario, pair, p1, p2, fs, trial)?;
    let cfg = scenario.baseline_config();
    let opts = scenario.rate_options();
    let grid = scenario.power_grid_step;

    let mn = LinkState::compute(pair, &h1, &h2)?;
    let sn = if scenario.include_sn_noma {
        Some(LinkState::compute(&sn_pair(pair, &cfg)?, &h1, &h2)?)
    } else {
        None
    };
    let mnoma = if scenario.include_mn_oma {
        Some(LinkState::compute(&mn_oma_pair(pair, &cfg)?, &h1, &h2)?)
    } else {
        None
    };
    let snoma = if scenario.include_sn_oma {
        Some(LinkState::compute(&sn_oma_pair(pair, &cfg)?, &h1, &h2)?)
    } else {
        None
    };

    let mut rows = Vec::new();
    for &snr_db in snrs {
        let n0 = noise_psd_from_snr_db(snr_db);
        for ordering in SicOrdering::both() {
            let best = exhaustive_power_search(&mn, n0, ordering, grid, 1.0, &opts)?.best;
            rows.push(SeRow::from_report(trial, snr_db, pair.q, Scheme::MnNoma, &best));
        }
        if let Some(state) = &sn {
            for ordering in SicOrdering::both() {
                let best = exhaustive_power_search(state, n0, ordering, grid, 1.0, &opts)?.best;
                rows.push(SeRow::from_report(trial, snr_db, pair.q, Scheme::SnNoma, &best));
            }
        }
        if let Some(state) = &mnoma {
            let r = oma_rates(state, n0, 1.0, cfg.ideal_oma, &opts)?;
            rows.push(SeRow::from_report(trial, snr_db, pair.q, Scheme::MnOma, &r));
        }
        if let Some(state) = &snoma {
            let r = oma_rates(state, n0, 1.0, false, &opts)?;
            rows.push(SeRow::from_report(trial, snr_db, pair.q, Scheme::SnOma, &r));
        }
    }
    Ok(rows)
}

fn collect_trials(
    scenario: &Scenario,
    pair: &NumerologyPair,
    p1: &TapProfile,
    p2: &TapProfile,
    fs: f64,
    snrs: &[f64],
) -> Result<Vec<SeRow>> {
    let per_trial: Vec<Vec<SeRow>> = (0..scenario.trials as u64)
        .into_par_iter()
        .map(|t| se_rows_for_trial(scenario, pair, p1, p2, fs, snrs, t))
        .collect::<Result<_>>()?;
    Ok(per_trial.into_iter().flatten().collect())
}

fn se_table(rows: &[SeRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 96 + 128);
    out.push_str(SE_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

fn mean_table(rows: &[SeRow]) -> String {
    let mut out = String::new();
    out.push_str(SE_MEAN_HEADER);
    out.push('\n');
    for line in mean_rows(rows) {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Running (x, sum, count) points for one scheme/ordering chart series.
type SeriesAccumulator = (Scheme, u8, Vec<(f64, f64, usize)>);

/// Mean spectral efficiency per (scheme, ordering) as chart series over the
/// chosen x coordinate.
fn se_series(rows: &[SeRow], x_of: impl Fn(&SeRow) -> f64) -> Vec<Series> {
    let mut series: Vec<SeriesAccumulator> = Vec::new();
    for row in rows {
        let x = x_of(row);
        let entry = match series.iter_mut().find(|(s, o, _)| *s == row.scheme && *o == row.ordering)
        {
            Some(e) => &mut e.2,
            None => {
                series.push((row.scheme, row.ordering, Vec::new()));
                &mut series.last_mut().expect("just pushed").2
            }
        };
        match entry.iter_mut().find(|(px, _, _)| *px == x) {
            Some(p) => {
                p.1 += row.se_bps_hz;
                p.2 += 1;
            }
            None => entry.push((x, row.se_bps_hz, 1)),
        }
    }
    series
        .into_iter()
        .map(|(scheme, ordering, pts)| Series {
            label: if ordering == 0 {
                scheme.as_str().to_string()
            } else {
                format!("{scheme} order {ordering}")
            },
            points: pts.iter().map(|&(x, s, n)| (x, s / n as f64)).collect(),
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Runner: SNR sweep
// ---------------------------------------------------------------------------

/// Result files of one sweep run.
#[derive(Debug, Clone)]
pub struct SweepArtifacts {
    /// Per-trial rows, in file order.
    pub rows: Vec<SeRow>,
    /// Path of the per-trial CSV.
    pub csv_path: PathBuf,
    /// Path of the per-point mean CSV.
    pub mean_csv_path: PathBuf,
    /// Path of the chart.
    pub svg_path: PathBuf,
}

/// Spectral efficiency of every enabled scheme across the scenario's SNR
/// grid, averaged over channel draws. Writes `se_vs_snr.csv`,
/// `se_vs_snr_mean.csv`, and `se_vs_snr.svg` into the output directory.
pub fn run_se_vs_snr(scenario: &Scenario) -> Result<SweepArtifacts> {
    scenario.validate()?;
    let pair = scenario.pair()?;
    let (p1, p2) = scenario.profiles()?;
    let fs = sample_rate_for(scenario, &pair, &p1, &p2)?;
    let rows = collect_trials(scenario, &pair, &p1, &p2, fs, &scenario.snr_db_list)?;

    let csv_path = scenario.out_dir.join("se_vs_snr.csv");
    let mean_csv_path = scenario.out_dir.join("se_vs_snr_mean.csv");
    let svg_path = scenario.out_dir.join("se_vs_snr.svg");
    write_text(&csv_path, &se_table(&rows))?;
    write_text(&mean_csv_path, &mean_table(&rows))?;
    let chart = line_chart(
        "Spectral efficiency vs SNR",
        "SNR (dB)",
        "sum rate / bandwidth (bit/s/Hz)",
        &se_series(&rows, |r| r.snr_db),
    );
    write_text(&svg_path, &chart)?;
    Ok(SweepArtifacts { rows, csv_path, mean_csv_path, svg_path })
}

// ---------------------------------------------------------------------------
// Runner: numerology sweep
// ---------------------------------------------------------------------------

/// Spectral efficiency at the operating SNR as user 2's numerology walks
/// away from user 1's (`q = 2, 4, …`). Each pair derives its own sample
/// rate exactly like a dedicated SNR-sweep run would, so any point here is
/// reproducible by such a run. Writes `se_vs_q.csv`, `se_vs_q_mean.csv`,
/// and `se_vs_q.svg`.
pub fn run_se_vs_q(scenario: &Scenario) -> Result<SweepArtifacts> {
    scenario.validate()?;
    let indices = scenario.sweep_indices();
    if indices.is_empty() {
        return Err(Error::InvalidScenario(
            "numerology sweep has no user-2 indices: user 1 already uses the coarsest entry"
                .into(),
        ));
    }
    let (p1, p2) = scenario.profiles()?;
    let snrs = [scenario.sweep_snr_db];

    let mut rows = Vec::new();
    for &idx2 in &indices {
        let mut point = scenario.clone();
        point.numerology_user2 = idx2;
        let pair = point.pair()?;
        let fs = sample_rate_for(&point, &pair, &p1, &p2)?;
        rows.extend(collect_trials(&point, &pair, &p1, &p2, fs, &snrs)?);
    }

    let csv_path = scenario.out_dir.join("se_vs_q.csv");
    let mean_csv_path = scenario.out_dir.join("se_vs_q_mean.csv");
    let svg_path = scenario.out_dir.join("se_vs_q.svg");
    write_text(&csv_path, &se_table(&rows))?;
    write_text(&mean_csv_path, &mean_table(&rows))?;
    let chart = line_chart(
        "Spectral efficiency vs numerology distance",
        "q = n_fft1 / n_fft2",
        "sum rate / bandwidth (bit/s/Hz)",
        &se_series(&rows, |r| r.q as f64),
    );
    write_text(&svg_path, &chart)?;
    Ok(SweepArtifacts { rows, csv_path, mean_csv_path, svg_path })
}

// ---------------------------------------------------------------------------
// Runner: per-subcarrier interference report
// ---------------------------------------------------------------------------

/// Result files of the per-subcarrier interference report.
#[derive(Debug, Clone)]
pub struct MseArtifacts {
    /// Interference power per user-1 bin when user 1 is decoded first.
    pub gamma1: Vec<f64>,
    /// Interference power per user-2 bin and short symbol when user 2 is
    /// decoded first.
    pub gamma2_per_m: Vec<Vec<f64>>,
    /// Path of the per-bin CSV.
    pub csv_path: PathBuf,
    /// Path of the per-short-symbol CSV.
    pub per_m_csv_path: PathBuf,
    /// Path of the chart.
    pub svg_path: PathBuf,
}

/// Closed-form per-subcarrier interference for the trial-0 channel draw.
/// Writes `mse.csv` (both users, frame-mean for user 2), `mse_ord2_per_m.csv`
/// (user 2 resolved by short symbol), and `mse.svg`.
pub fn run_mse(scenario: &Scenario) -> Result<MseArtifacts> {
    scenario.validate()?;
    let pair = scenario.pair()?;
    let (p1, p2) = scenario.profiles()?;
    let fs = sample_rate_for(scenario, &pair, &p1, &p2)?;
    let (h1, h2) = draw_trial_channels(scenario, &pair, &p1, &p2, fs, 0)?;
    let state = LinkState::compute(&pair, &h1, &h2)?;

    let mut csv = String::from("user,subcarrier,cfr_sq,mse_ord1,mse_ord2_mean\n");
    for (i, &bin) in pair.user1.active_set.iter().enumerate() {
        csv.push_str(&format!(
            "1,{bin},{},{},0\n",
            state.psi1[i].norm_sqr(),
            state.gamma1[i]
        ));
    }
    let q = state.gamma2_per_m.len() as f64;
    for (o, &bin) in pair.user2.active_set.iter().enumerate() {
        let mean: f64 = state.gamma2_per_m.iter().map(|g| g[o]).sum::<f64>() / q;
        csv.push_str(&format!(
            "2,{bin},{},0,{mean}\n",
            state.psi2[o].norm_sqr()
        ));
    }

    let mut per_m = String::from("m,subcarrier,mse\n");
    for (mi, g) in state.gamma2_per_m.iter().enumerate() {
        for (o, &bin) in pair.user2.active_set.iter().enumerate() {
            per_m.push_str(&format!("{},{bin},{}\n", mi + 1, g[o]));
        }
    }

    let db = |v: f64| 10.0 * v.max(1e-16).log10();
    let series = vec![
        Series {
            label: "user 1 decoded first".into(),
            points: pair
                .user1
                .active_set
                .iter()
                .enumerate()
                .map(|(i, &bin)| (bin as f64 / pair.user1.n_fft as f64, db(state.gamma1[i])))
                .collect(),
        },
        Series {
            label: "user 2 decoded first (frame mean)".into(),
            points: pair
                .user2
                .active_set
                .iter()
                .enumerate()
                .map(|(o, &bin)| {
                    let mean: f64 =
                        state.gamma2_per_m.iter().map(|g| g[o]).sum::<f64>() / q;
                    (bin as f64 / pair.user2.n_fft as f64, db(mean))
                })
                .collect(),
        },
    ];
    let chart = line_chart(
        "Cross-numerology interference per subcarrier",
        "normalized frequency (bin / n_fft)",
        "interference power (dB, unit interferer power)",
        &series,
    );

    let csv_path = scenario.out_dir.join("mse.csv");
    let per_m_csv_path = scenario.out_dir.join("mse_ord2_per_m.csv");
    let svg_path = scenario.out_dir.join("mse.svg");
    write_text(&csv_path, &csv)?;
    write_text(&per_m_csv_path, &per_m)?;
    write_text(&svg_path, &chart)?;
    Ok(MseArtifacts {
        gamma1: state.gamma1.clone(),
        gamma2_per_m: state.gamma2_per_m.clone(),
        csv_path,
        per_m_csv_path,
        svg_path,
    })
}

// ---------------------------------------------------------------------------
// Runner: self-validation
// ---------------------------------------------------------------------------

/// One named validation check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    /// Stable check identifier.
    pub name: String,
    /// Whether the measured value met the tolerance.
    pub passed: bool,
    /// The measured statistic (its meaning is check-specific; see `detail`).
    pub measured: f64,
    /// Pass bound the measurement was compared against.
    pub tolerance: f64,
    /// Human-readable description of what was measured.
    pub detail: String,
}

/// Outcome of the validation run.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    /// True iff every check passed.
    pub passed: bool,
    /// All checks, in execution order.
    pub checks: Vec<CheckOutcome>,
    /// Where the JSON report was written.
    #[serde(skip)]
    pub json_path: PathBuf,
}

/// Fraction of bins whose measurement agrees with its prediction within
/// `rel_tol`. Bins predicted at the numerical floor (relative to the
/// vector's peak) are compared absolutely against that floor instead.
fn agreement_fraction(measured: &[f64], predicted: &[f64], rel_tol: f64) -> f64 {
    debug_assert_eq!(measured.len(), predicted.len());
    if measured.is_empty() {
        return 1.0;
    }
    let peak = predicted.iter().cloned().fold(0.0, f64::max);
    let floor = peak * 1e-9;
    let ok = measured
        .iter()
        .zip(predicted)
        .filter(|&(&m, &p)| {
            if p <= floor {
                m <= floor.max(1e-12)
            } else {
                (m - p).abs() <= rel_tol * p
            }
        })
        .count();
    ok as f64 / measured.len() as f64
}

/// Runs the built-in consistency checks on the scenario's trial-0 channel
/// draw and writes `validate.json`. The run passes only if every check
/// passes; the report carries one entry per check.
pub fn run_validate(scenario: &Scenario) -> Result<ValidationReport> {
    scenario.validate()?;
    let pair = scenario.pair()?;
    let (p1, p2) = scenario.profiles()?;
    let fs = sample_rate_for(scenario, &pair, &p1, &p2)?;
    let (h1, h2) = draw_trial_channels(scenario, &pair, &p1, &p2, fs, 0)?;
    let opts = scenario.rate_options();
    let state = LinkState::compute(&pair, &h1, &h2)?;
    let n0 = noise_psd_from_snr_db(scenario.sweep_snr_db);
    let mut checks: Vec<CheckOutcome> = Vec::new();

    // 1. Own-channel diagonalization, measured in the time domain: each
    //    user alone and noise-free must demodulate to cfr * data exactly.
    {
        let mut data_rng = stream_rng(scenario.seed, streams::DATA, 0);
        let mut noise_rng = stream_rng(scenario.seed, streams::NOISE, 0);
        let syms = random_qpsk_frame(&pair, &mut data_rng);
        let mut worst = 0.0f64;

        let f1 = synthesize_frame(&syms, &pair, &h1, &h2, 1.0, 0.0, 0.0, &mut noise_rng)?;
        let obs1 = front_end_user1(&f1.r, &pair)?;
        let psi = &state.psi1;
        for (i, _) in pair.user1.active_set.iter().enumerate() {
            worst = worst.max((obs1[i] - psi[i] * syms.d1[i]).norm());
        }
        let f2 = synthesize_frame(&syms, &pair, &h1, &h2, 0.0, 1.0, 0.0, &mut noise_rng)?;
        let obs2 = front_end_user2_frame(&f2.r, &pair)?;
        let na2 = pair.user2.n_active();
        for m in 0..pair.q {
            for o in 0..na2 {
                let k = m * na2 + o;
                worst = worst.max((obs2[k] - state.psi2[o] * syms.d2[k]).norm());
            }
        }
        checks.push(CheckOutcome {
            name: "diagonalization".into(),
            passed: worst <= 1e-10,
            measured: worst,
            tolerance: 1e-10,
            detail: "max |front-end output - cfr*data| with each user alone, noise off".into(),
        });
    }

    // 2. Equal numerologies collapse the coupling matrix to diag(cfr).
    {
        let eq = NumerologyPair::new(pair.user1.clone(), pair.user1.clone())?;
        let g = ini_ordering1(&h2, &eq)?;
        let psi = cfr(&h2, eq.user1.n_fft)?.psi;
        let mut worst = 0.0f64;
        for (r, &bin_r) in eq.user1.active_set.iter().enumerate() {
            for (c, &bin_c) in eq.user2.active_set.iter().enumerate() {
                let want = if bin_r == bin_c {
                    psi[bin_r]
                } else {
                    num_complex::Complex64::ZERO
                };
                worst = worst.max((g.gamma[(r, c)] - want).norm());
            }
        }
        checks.push(CheckOutcome {
            name: "q1_reduction".into(),
            passed: worst <= 1e-10,
            measured: worst,
            tolerance: 1e-10,
            detail: "max deviation of the shared-grid coupling matrix from diag(cfr)".into(),
        });
    }

    // 3 & 4. Monte Carlo leakage vs the closed form, both directions. The
    //    per-bin tolerance scales as 1/sqrt(trials) from its 3% anchor at
    //    10^4 frames; at least 99% of bins must agree.
    let rel_tol = 0.03 * (10_000.0 / scenario.validate_trials as f64).sqrt();
    {
        let mut rng = stream_rng(scenario.seed, streams::DATA, 1);
        let est = empirical_interference(
            &pair,
            SicOrdering::User1First,
            &h2,
            1.0,
            scenario.validate_trials,
            &mut rng,
        )?;
        let frac = agreement_fraction(&est.per_bin, &state.gamma1, rel_tol);
        checks.push(CheckOutcome {
            name: "oracle_ordering1".into(),
            passed: frac >= 0.99,
            measured: frac,
            tolerance: 0.99,
            detail: format!(
                "fraction of user-1 bins whose measured leakage is within {rel_tol:.4} \
                 (relative) of the coupling-matrix row norms, {} frames",
                scenario.validate_trials
            ),
        });
    }
    {
        let mut rng = stream_rng(scenario.seed, streams::DATA, 2);
        let est = empirical_interference(
            &pair,
            SicOrdering::User2First,
            &h1,
            1.0,
            scenario.validate_trials,
            &mut rng,
        )?;
        let na2 = pair.user2.n_active();
        let mut min_frac = 1.0f64;
        for (m, g) in state.gamma2_per_m.iter().enumerate() {
            let frac = agreement_fraction(&est.per_bin[m * na2..(m + 1) * na2], g, rel_tol);
            min_frac = min_frac.min(frac);
        }
        checks.push(CheckOutcome {
            name: "oracle_ordering2".into(),
            passed: min_frac >= 0.99,
            measured: min_frac,
            tolerance: 0.99,
            detail: format!(
                "worst short symbol's fraction of user-2 bins within {rel_tol:.4} of the \
                 closed form, {} frames",
                scenario.validate_trials
            ),
        });
    }

    // 5. Genie cancellation: the second-decoded user's observation must
    //    equal its single-user observation.
    {
        let mut data_rng = stream_rng(scenario.seed, streams::DATA, 3);
        let mut noise_rng = stream_rng(scenario.seed, streams::NOISE, 3);
        let syms = random_qpsk_frame(&pair, &mut data_rng);
        let split = PowerSplit::from_alpha(0.6, 1.0)?;
        let frame =
            synthesize_frame(&syms, &pair, &h1, &h2, split.p1, split.p2, n0, &mut noise_rng)?;
        let mut worst = 0.0f64;

        let sic = genie_sic(&frame, &pair, SicOrdering::User1First)?;
        let alone: Vec<_> = frame.sig2.iter().zip(&frame.noise).map(|(a, w)| a + w).collect();
        let want = front_end_user2_frame(&alone, &pair)?;
        let scale = want.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1.0);
        for (g, w) in sic.obs2.iter().zip(&want) {
            worst = worst.max((g - w).norm() / scale);
        }

        let sic = genie_sic(&frame, &pair, SicOrdering::User2First)?;
        let alone: Vec<_> = frame.sig1.iter().zip(&frame.noise).map(|(a, w)| a + w).collect();
        let want = front_end_user1(&alone, &pair)?;
        let scale = want.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1.0);
        for (g, w) in sic.obs1.iter().zip(&want) {
            worst = worst.max((g - w).norm() / scale);
        }
        checks.push(CheckOutcome {
            name: "sic_residual".into(),
            passed: worst <= 1e-10,
            measured: worst,
            tolerance: 1e-10,
            detail: "max normalized deviation of the post-cancellation observation from \
                     the interference-free one, both orders"
                .into(),
        });
    }

    // 6. The power scan's winner dominates its own grid.
    {
        let mut worst = f64::NEG_INFINITY;
        for ordering in SicOrdering::both() {
            let best = exhaustive_power_search(
                &state,
                n0,
                ordering,
                scenario.power_grid_step,
                1.0,
                &opts,
            )?
            .best;
            let mut i = 1usize;
            loop {
                let alpha = i as f64 * scenario.power_grid_step;
                if alpha > 1.0 - scenario.power_grid_step + 1e-12 {
                    break;
                }
                let split = PowerSplit::from_alpha(alpha, 1.0)?;
                let r = noma_rates(&state, split, n0, ordering, &opts)?;
                worst = worst.max((r.sum_rate_bps - best.sum_rate_bps) / best.sum_rate_bps);
                i += 1;
            }
        }
        checks.push(CheckOutcome {
            name: "optimizer_consistency".into(),
            passed: worst <= 1e-12,
            measured: worst,
            tolerance: 1e-12,
            detail: "max relative sum-rate excess of any grid point over the scan's winner"
                .into(),
        });
    }

    // 7. Determinism: re-deriving the trial-0 channels and the scan from
    //    the master seed must reproduce identical numbers.
    {
        let (h1b, h2b) = draw_trial_channels(scenario, &pair, &p1, &p2, fs, 0)?;
        let mut diff = 0.0f64;
        for (a, b) in h1.taps.iter().zip(&h1b.taps).chain(h2.taps.iter().zip(&h2b.taps)) {
            diff = diff.max((a - b).norm());
        }
        let state_b = LinkState::compute(&pair, &h1b, &h2b)?;
        let a = exhaustive_power_search(
            &state,
            n0,
            SicOrdering::User1First,
            scenario.power_grid_step,
            1.0,
            &opts,
        )?
        .best;
        let b = exhaustive_power_search(
            &state_b,
            n0,
            SicOrdering::User1First,
            scenario.power_grid_step,
            1.0,
            &opts,
        )?
        .best;
        diff = diff
            .max((a.sum_rate_bps - b.sum_rate_bps).abs())
            .max((a.split.alpha() - b.split.alpha()).abs());
        checks.push(CheckOutcome {
            name: "determinism".into(),
            passed: diff == 0.0,
            measured: diff,
            tolerance: 0.0,
            detail: "max difference between two independent re-derivations from the master \
                     seed (must be exactly zero)"
                .into(),
        });
    }

    let passed = checks.iter().all(|c| c.passed);
    let json_path = scenario.out_dir.join("validate.json");
    let report = ValidationReport { passed, checks, json_path: json_path.clone() };
    let json = serde_json::to_string_pretty(&report)?;
    write_text(&json_path, &json)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
