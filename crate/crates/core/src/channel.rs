//! Tapped-delay-line channels: profiles, random realizations, and the
//! operators derived from them.
//!
//! A [`TapProfile`] lists physical propagation paths as (delay, mean power)
//! pairs; the standard EPA and EVA multipath profiles are built in and custom
//! profiles load from plain text. [`draw_realization`] samples one Rayleigh
//! realization on a given sample grid: each tap lands on the sample index
//! nearest its delay, coincident taps add up, per-tap coefficients are
//! circularly-symmetric complex Gaussians, and the expected total power is
//! normalized to one.
//!
//! From a realization the module derives the lower-triangular Toeplitz
//! convolution matrix ([`toeplitz_matrix`]), the frequency response sampled
//! on an FFT grid ([`cfr`]), and the streaming convolution
//! ([`apply_channel`]). When the impulse response fits inside a cyclic
//! prefix, `F · R_cp · H · A_cp · F^H` is diagonal with the frequency
//! response on its diagonal — the identity the per-subcarrier rate model
//! stands on, and the one [`check_cp_fit`] guards.

use std::f64::consts::TAU;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Profiles
// ---------------------------------------------------------------------------

/// A power-delay profile: propagation paths as (delay, mean power) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct TapProfile {
    /// Profile name, used in labels and reports.
    pub name: String,
    /// Path delays in seconds, not necessarily distinct.
    pub delays_s: Vec<f64>,
    /// Mean path powers in dB (relative; overall scale is normalized away).
    pub powers_db: Vec<f64>,
}

impl TapProfile {
    /// Extended Pedestrian A multipath profile.
    pub fn epa() -> Self {
        Self {
            name: "EPA".into(),
            delays_s: vec![0.0, 30e-9, 70e-9, 90e-9, 110e-9, 190e-9, 410e-9],
            powers_db: vec![0.0, -1.0, -2.0, -3.0, -8.0, -17.2, -20.8],
        }
    }

    /// Extended Vehicular A multipath profile.
    pub fn eva() -> Self {
        Self {
            name: "EVA".into(),
            delays_s: vec![
                0.0, 30e-9, 150e-9, 310e-9, 370e-9, 710e-9, 1090e-9, 1730e-9, 2510e-9,
            ],
            powers_db: vec![0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9],
        }
    }

    /// Single-path profile (0 s, 0 dB): frequency-flat Rayleigh fading.
    pub fn flat() -> Self {
        Self {
            name: "FLAT".into(),
            delays_s: vec![0.0],
            powers_db: vec![0.0],
        }
    }

    /// Resolves a built-in profile by case-insensitive name.
    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_uppercase().as_str() {
            "EPA" => Ok(Self::epa()),
            "EVA" => Ok(Self::eva()),
            "FLAT" => Ok(Self::flat()),
            other => Err(Error::InvalidProfile(format!(
                "unknown profile '{other}'; built-ins are EPA, EVA, FLAT"
            ))),
        }
    }

    /// Loads a profile from a plain-text file: one `delay_seconds power_db`
    /// pair per line, `#` starts a comment. The profile is named after the
    /// file stem.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut delays_s = Vec::new();
        let mut powers_db = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (d, p) = match (fields.next(), fields.next(), fields.next()) {
                (Some(d), Some(p), None) => (d, p),
                _ => {
                    return Err(Error::InvalidProfile(format!(
                        "{}:{}: expected 'delay_seconds power_db', got '{raw}'",
                        path.display(),
                        lineno + 1
                    )))
                }
            };
            let parse = |s: &str, what: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| {
                    Error::InvalidProfile(format!(
                        "{}:{}: cannot parse {what} '{s}'",
                        path.display(),
                        lineno + 1
                    ))
                })
            };
            delays_s.push(parse(d, "delay")?);
            powers_db.push(parse(p, "power")?);
        }
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".into());
        let profile = Self { name, delays_s, powers_db };
        profile.validate()?;
        Ok(profile)
    }

    /// Checks structural soundness: at least one path, matching lengths,
    /// finite non-negative delays, finite powers.
    pub fn validate(&self) -> Result<()> {
        if self.delays_s.is_empty() {
            return Err(Error::InvalidProfile(format!(
                "profile '{}' has no paths",
                self.name
            )));
        }
        if self.delays_s.len() != self.powers_db.len() {
            return Err(Error::InvalidProfile(format!(
                "profile '{}': {} delays vs {} powers",
                self.name,
                self.delays_s.len(),
                self.powers_db.len()
            )));
        }
        for &d in &self.delays_s {
            if !d.is_finite() || d < 0.0 {
                return Err(Error::InvalidProfile(format!(
                    "profile '{}': bad delay {d}",
                    self.name
                )));
            }
        }
        for &p in &self.powers_db {
            if !p.is_finite() {
                return Err(Error::InvalidProfile(format!(
                    "profile '{}': bad power {p} dB",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// Largest path delay in seconds.
    pub fn max_delay_s(&self) -> f64 {
        self.delays_s.iter().copied().fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// Realizations
// ---------------------------------------------------------------------------

/// One sampled impulse response: tap `l` sits at delay `l / fs_hz`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Complex tap coefficients; index 0 is the zero-delay tap, unoccupied
    /// intermediate indices hold zeros.
    pub taps: Vec<Complex64>,
    /// Sample rate the delays were quantized to, in Hz.
    pub fs_hz: f64,
    /// Reproducibility label (profile, seed, user...) carried into reports.
    pub label: String,
}

impl ChannelRealization {
    /// Wraps explicit taps (tests, regression vectors).
    pub fn from_taps(
        taps: Vec<Complex64>,
        fs_hz: f64,
        label: impl Into<String>,
    ) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidProfile("a realization needs at least one tap".into()));
        }
        Ok(Self { taps, fs_hz, label: label.into() })
    }

    /// Channel order: index of the last tap. A one-tap channel has order 0.
    pub fn order(&self) -> usize {
        self.taps.len() - 1
    }
}

/// Draws one Rayleigh realization of `profile` on the sample grid `fs_hz`.
///
/// Each path lands on the sample index nearest `delay * fs`; paths on the
/// same index add their powers. Per-index coefficients are independent
/// circularly-symmetric complex Gaussians whose variances are the summed
/// linear path powers, rescaled so the expected total power is exactly 1.
pub fn draw_realization(
    profile: &TapProfile,
    fs_hz: f64,
    rng: &mut impl Rng,
    label: impl Into<String>,
) -> Result<ChannelRealization> {
    profile.validate()?;
    if !(fs_hz.is_finite() && fs_hz > 0.0) {
        return Err(Error::InvalidProfile(format!("bad sample rate {fs_hz} Hz")));
    }

    let max_index = (profile.max_delay_s() * fs_hz).round() as usize;
    let mut variance = vec![0.0f64; max_index + 1];
    let mut total = 0.0;
    for (&delay, &power_db) in profile.delays_s.iter().zip(&profile.powers_db) {
        let linear = 10f64.powf(power_db / 10.0);
        variance[(delay * fs_hz).round() as usize] += linear;
        total += linear;
    }

    let taps = variance
        .iter()
        .map(|&v| {
            if v == 0.0 {
                Complex64::ZERO
            } else {
                let sigma = (v / total / 2.0).sqrt();
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(sigma * re, sigma * im)
            }
        })
        .collect();

    Ok(ChannelRealization { taps, fs_hz, label: label.into() })
}

// ---------------------------------------------------------------------------
// Derived operators
// ---------------------------------------------------------------------------

/// Dense lower-triangular Toeplitz convolution matrix of one realization.
#[derive(Debug, Clone)]
pub struct ChannelMatrix {
    /// `frame_len x frame_len`, entry `(r, c) = taps[r - c]` inside the band.
    pub hmat: Array2<Complex64>,
}

/// Builds the dense convolution matrix at a given frame length.
pub fn toeplitz_matrix(h: &ChannelRealization, frame_len: usize) -> Result<ChannelMatrix> {
    if h.taps.len() > frame_len {
        return Err(Error::ChannelExceedsFrame {
            taps: h.taps.len(),
            frame: frame_len,
        });
    }
    let mut hmat = Array2::zeros((frame_len, frame_len));
    for r in 0..frame_len {
        for l in 0..h.taps.len().min(r + 1) {
            hmat[(r, r - l)] = h.taps[l];
        }
    }
    Ok(ChannelMatrix { hmat })
}

/// Frequency response sampled on an FFT grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Cfr {
    /// `psi[n] = sum_l taps[l] exp(-j 2π n l / n_fft)` for `n` in `0..n_fft`.
    pub psi: Vec<Complex64>,
}

/// Evaluates the frequency response on an `n_fft`-point grid (plain DFT of
/// the zero-padded taps, no unitary scaling).
pub fn cfr(h: &ChannelRealization, n_fft: usize) -> Result<Cfr> {
    if h.taps.len() > n_fft {
        return Err(Error::ChannelExceedsFrame { taps: h.taps.len(), frame: n_fft });
    }
    let mut psi = vec![Complex64::ZERO; n_fft];
    for (l, &tap) in h.taps.iter().enumerate() {
        if tap == Complex64::ZERO {
            continue;
        }
        let step_angle = -TAU * l as f64 / n_fft as f64;
        let step = Complex64::from_polar(1.0, step_angle);
        let mut rot = Complex64::ONE;
        for (n, slot) in psi.iter_mut().enumerate() {
            if n % 64 == 0 {
                // Periodic exact resync bounds the recurrence drift; the
                // wrapped bin product keeps the phase argument small.
                let wrapped = (n * l) % n_fft;
                rot = Complex64::from_polar(1.0, -TAU * wrapped as f64 / n_fft as f64);
            }
            *slot += tap * rot;
            rot *= step;
        }
    }
    Ok(Cfr { psi })
}

/// Applies the channel as a causal linear convolution truncated to the input
/// length: `out[t] = sum_l taps[l] x[t-l]` — exactly the action of the
/// Toeplitz matrix at `frame_len = x.len()`.
pub fn apply_channel(h: &ChannelRealization, x: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::ZERO; x.len()];
    for (l, &tap) in h.taps.iter().enumerate() {
        if tap == Complex64::ZERO {
            continue;
        }
        for t in l..x.len() {
            out[t] += tap * x[t - l];
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Admissibility
// ---------------------------------------------------------------------------

/// Largest sample rate of the form `bandwidth / 2^k` at which the profile's
/// maximum delay still rounds to a tap index within `min_n_cp` samples —
/// the default rate for a scenario, keeping every channel inside the
/// shortest cyclic prefix present.
pub fn default_sample_rate(bandwidth_hz: f64, max_delay_s: f64, min_n_cp: usize) -> f64 {
    let mut fs = bandwidth_hz;
    loop {
        if (max_delay_s * fs).round() as usize <= min_n_cp {
            return fs;
        }
        fs /= 2.0;
    }
}

/// Errors unless the realization fits inside a prefix of `n_cp` samples.
pub fn check_cp_fit(h: &ChannelRealization, n_cp: usize) -> Result<()> {
    if h.order() > n_cp {
        return Err(Error::ChannelExceedsCp {
            n_ch: h.order(),
            n_cp,
            fs_hz: h.fs_hz,
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn epa_at_7_68_mhz_occupies_four_sample_slots() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = draw_realization(&TapProfile::epa(), 7.68e6, &mut rng, "t").unwrap();
        assert_eq!(h.taps.len(), 4, "max index round(410ns * 7.68MHz) = 3");
        assert_eq!(h.order(), 3);
        assert_eq!(h.taps[2], Complex64::ZERO, "no path rounds to index 2");
        assert_ne!(h.taps[0], Complex64::ZERO);
        assert_ne!(h.taps[1], Complex64::ZERO);
        assert_ne!(h.taps[3], Complex64::ZERO);
    }

    #[test]
    fn realization_power_is_normalized_and_split_as_expected() {
        // EPA at 7.68 MHz groups the paths into indices {0, 1, 3} with
        // normalized variances 0.57653 / 0.42081 / 0.00267.
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws = 4000;
        let mut per_index = [0.0f64; 4];
        let mut total = 0.0;
        for i in 0..draws {
            let h = draw_realization(&TapProfile::epa(), 7.68e6, &mut rng, format!("d{i}"))
                .unwrap();
            for (l, tap) in h.taps.iter().enumerate() {
                per_index[l] += tap.norm_sqr();
            }
            total += h.taps.iter().map(|t| t.norm_sqr()).sum::<f64>();
        }
        let mean_total = total / draws as f64;
        println!("mean total power over {draws} draws: {mean_total:.4}");
        assert!((mean_total - 1.0).abs() < 0.04, "total power normalization");

        let expected = [0.57653, 0.42081, 0.0, 0.00267];
        for (l, &e) in expected.iter().enumerate() {
            let got = per_index[l] / draws as f64;
            println!("tap {l}: mean power {got:.5}, expected {e:.5}");
            if e == 0.0 {
                assert_eq!(got, 0.0);
            } else {
                assert!((got - e).abs() < 0.05 * e.max(0.05), "tap {l}");
            }
        }
    }

    #[test]
    fn coincident_paths_add_their_powers() {
        // Two equal-power paths on the same index behave like one path with
        // double the variance: compare to a single-path profile.
        let double = TapProfile {
            name: "double".into(),
            delays_s: vec![0.0, 1e-12],
            powers_db: vec![0.0, 0.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for i in 0..100 {
            let h = draw_realization(&double, 1e6, &mut rng, format!("d{i}")).unwrap();
            assert_eq!(h.taps.len(), 1, "both paths land on index 0");
        }
        // Normalization makes the merged tap unit power regardless; what must
        // hold is that the variance bookkeeping summed to 2 before scaling,
        // i.e. the draw is identical in law to FLAT. Check the first two
        // moments roughly.
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mean_power: f64 = (0..4000)
            .map(|i| {
                draw_realization(&double, 1e6, &mut rng, format!("p{i}"))
                    .unwrap()
                    .taps[0]
                    .norm_sqr()
            })
            .sum::<f64>()
            / 4000.0;
        println!("merged-tap mean power: {mean_power:.4}");
        assert!((mean_power - 1.0).abs() < 0.05);
    }

    #[test]
    fn flat_profile_gives_constant_magnitude_response() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = draw_realization(&TapProfile::flat(), 15.36e6, &mut rng, "flat").unwrap();
        assert_eq!(h.taps.len(), 1);
        let response = cfr(&h, 64).unwrap();
        let mag0 = response.psi[0].norm();
        for v in &response.psi {
            assert!((v.norm() - mag0).abs() < 1e-12);
        }
    }

    #[test]
    fn cfr_matches_direct_dft_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = draw_realization(&TapProfile::eva(), 15.36e6, &mut rng, "o").unwrap();
        let n = 64;
        let got = cfr(&h, n).unwrap();
        for bin in 0..n {
            let mut want = Complex64::ZERO;
            for (l, &tap) in h.taps.iter().enumerate() {
                want += tap
                    * Complex64::from_polar(1.0, -TAU * bin as f64 * l as f64 / n as f64);
            }
            assert!(
                (got.psi[bin] - want).norm() < 1e-12,
                "bin {bin}: {} vs {}",
                got.psi[bin],
                want
            );
        }
    }

    #[test]
    fn cfr_on_coarser_grid_subsamples_finer_grid() {
        // With n1 = q * n2, the wide-spacing user's bin n sits exactly on the
        // narrow-spacing user's bin q*n.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = draw_realization(&TapProfile::epa(), 15.36e6, &mut rng, "s").unwrap();
        let fine = cfr(&h, 256).unwrap();
        let coarse = cfr(&h, 128).unwrap();
        for n in 0..128 {
            assert!((coarse.psi[n] - fine.psi[2 * n]).norm() < 1e-12, "bin {n}");
        }
    }

    #[test]
    fn toeplitz_matrix_matches_streaming_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = draw_realization(&TapProfile::epa(), 15.36e6, &mut rng, "c").unwrap();
        let len = 24;
        let x: Vec<Complex64> = (0..len)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();

        let hm = toeplitz_matrix(&h, len).unwrap();
        let via_matrix: Vec<Complex64> = (0..len)
            .map(|r| (0..len).map(|c| hm.hmat[(r, c)] * x[c]).sum())
            .collect();
        let via_stream = apply_channel(&h, &x);
        for t in 0..len {
            assert!((via_matrix[t] - via_stream[t]).norm() < 1e-12, "sample {t}");
        }

        // Band structure: zero above the diagonal and below the tap band.
        for r in 0..len {
            for c in 0..len {
                if c > r || r - c > h.order() {
                    assert_eq!(hm.hmat[(r, c)], Complex64::ZERO, "entry ({r},{c})");
                }
            }
        }
    }

    #[test]
    fn convolution_with_unit_tap_is_identity() {
        let h = ChannelRealization::from_taps(vec![Complex64::ONE], 1e6, "id").unwrap();
        let x = vec![Complex64::new(1.0, 2.0), Complex64::new(-3.0, 0.5)];
        assert_eq!(apply_channel(&h, &x), x);
    }

    #[test]
    fn toeplitz_rejects_channel_longer_than_frame() {
        let h = ChannelRealization::from_taps(vec![Complex64::ONE; 5], 1e6, "long").unwrap();
        assert!(matches!(
            toeplitz_matrix(&h, 4),
            Err(Error::ChannelExceedsFrame { taps: 5, frame: 4 })
        ));
    }

    #[test]
    fn default_sample_rate_halves_until_the_prefix_fits() {
        let b = 61.44e6;
        // EPA alone, shortest prefix 9 samples: 25 > 9, 13 > 9, 6 <= 9.
        let fs_epa = default_sample_rate(b, TapProfile::epa().max_delay_s(), 9);
        assert!((fs_epa - 15.36e6).abs() < 1.0, "got {fs_epa}");
        // EVA alone, same prefix: needs two more halvings (10 > 9 at 3.84 MHz).
        let fs_eva = default_sample_rate(b, TapProfile::eva().max_delay_s(), 9);
        assert!((fs_eva - 1.92e6).abs() < 1.0, "got {fs_eva}");
        // Roomy prefix: full bandwidth works.
        let fs_full = default_sample_rate(b, TapProfile::epa().max_delay_s(), 72);
        assert!((fs_full - b).abs() < 1.0, "got {fs_full}");
        // Zero delay: full bandwidth immediately.
        assert_eq!(default_sample_rate(b, 0.0, 0), b);
    }

    #[test]
    fn cp_violation_reports_rate_and_prefix() {
        let h = ChannelRealization::from_taps(vec![Complex64::ONE; 11], 3.84e6, "v").unwrap();
        let err = check_cp_fit(&h, 9).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("3840000"), "message names the rate: {msg}");
        assert!(msg.contains('9'), "message names the prefix: {msg}");
    }

    #[test]
    fn draws_are_reproducible_by_seed() {
        let mut a = ChaCha8Rng::seed_from_u64(123);
        let mut b = ChaCha8Rng::seed_from_u64(123);
        let ha = draw_realization(&TapProfile::eva(), 7.68e6, &mut a, "x").unwrap();
        let hb = draw_realization(&TapProfile::eva(), 7.68e6, &mut b, "x").unwrap();
        assert_eq!(ha.taps, hb.taps);
    }

    #[test]
    fn profile_file_roundtrip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("office.txt");
        std::fs::write(&good, "# delay_s power_db\n0 0\n30e-9 -1.5\n\n90e-9 -3 # tail\n")
            .unwrap();
        let p = TapProfile::from_file(&good).unwrap();
        assert_eq!(p.name, "office");
        assert_eq!(p.delays_s, vec![0.0, 30e-9, 90e-9]);
        assert_eq!(p.powers_db, vec![0.0, -1.5, -3.0]);

        let bad = dir.path().join("bad.txt");
        std::fs::write(&bad, "0 0\n30e-9\n").unwrap();
        let err = TapProfile::from_file(&bad).unwrap_err().to_string();
        assert!(err.contains(":2"), "names the offending line: {err}");

        let nan = dir.path().join("nan.txt");
        std::fs::write(&nan, "0 zero\n").unwrap();
        assert!(TapProfile::from_file(&nan).is_err());

        let empty = dir.path().join("empty.txt");
        std::fs::write(&empty, "# nothing\n").unwrap();
        assert!(TapProfile::from_file(&empty).is_err());
    }

    #[test]
    fn unknown_profile_name_is_rejected() {
        assert!(TapProfile::by_name("ETU").is_err());
        assert!(TapProfile::by_name("epa").is_ok(), "case-insensitive");
    }
}
