//! OFDM numerologies and two-user numerology pairs.
//!
//! A numerology is the triple (FFT size `n_fft`, cyclic-prefix length `n_cp`,
//! subcarrier spacing `delta_f`). The built-in catalog follows the 5G-NR
//! scaling family: index `i` halves the FFT and doubles the spacing of index
//! `i-1`, so every entry occupies the same bandwidth `n_fft * delta_f`, and
//! the prefix keeps the fixed ratio `n_cp = 9 * n_fft / 128`.
//!
//! Two users that share the band form a [`NumerologyPair`]. User 1 is, by
//! convention, the one with the larger FFT (narrower spacing); the ratio
//! `q = n_fft1 / n_fft2` is a power of two and one long user-1 symbol spans
//! exactly `q` short user-2 symbols, cyclic prefixes included.

use crate::error::{Error, Result};

/// Default base subcarrier spacing in Hz (catalog index 0).
pub const DELTA_F_BASE_HZ: f64 = 15_000.0;

/// Catalog rows indexed by numerology index: `(n_fft, n_cp)`.
const CATALOG: [(usize, usize); 6] = [
    (4096, 288),
    (2048, 144),
    (1024, 72),
    (512, 36),
    (256, 18),
    (128, 9),
];

/// Highest index in the built-in catalog.
pub const MAX_CATALOG_INDEX: u32 = (CATALOG.len() - 1) as u32;

// ---------------------------------------------------------------------------
// Numerology
// ---------------------------------------------------------------------------

/// One OFDM numerology: FFT size, cyclic-prefix length, subcarrier spacing,
/// and the set of active subcarriers.
///
/// The active set is a sorted list of DFT bin indices in `0..n_fft`. A full
/// set (every bin active, the default) models a fully loaded carrier; the
/// orthogonal-access baselines restrict it to half the band.
#[derive(Debug, Clone, PartialEq)]
pub struct Numerology {
    /// DFT size of the useful symbol part.
    pub n_fft: usize,
    /// Cyclic-prefix length in samples.
    pub n_cp: usize,
    /// Subcarrier spacing in Hz.
    pub delta_f_hz: f64,
    /// Sorted, strictly increasing active subcarrier (bin) indices.
    pub active_set: Vec<usize>,
}

impl Numerology {
    /// Looks up a catalog numerology with the default 15 kHz base spacing.
    pub fn from_index(index: u32) -> Result<Self> {
        Self::from_index_with_base(index, DELTA_F_BASE_HZ)
    }

    /// Looks up a catalog numerology, scaling spacings from `delta_f_base_hz`
    /// (the spacing of index 0).
    pub fn from_index_with_base(index: u32, delta_f_base_hz: f64) -> Result<Self> {
        if !(delta_f_base_hz.is_finite() && delta_f_base_hz > 0.0) {
            return Err(Error::InvalidNumerology(format!(
                "base spacing must be positive and finite, got {delta_f_base_hz}"
            )));
        }
        let (n_fft, n_cp) = *CATALOG
            .get(index as usize)
            .ok_or(Error::UnknownNumerology(index))?;
        Ok(Self {
            n_fft,
            n_cp,
            delta_f_hz: delta_f_base_hz * f64::from(1u32 << index),
            active_set: (0..n_fft).collect(),
        })
    }

    /// Builds a numerology outside the catalog (toy sizes in tests, custom
    /// grids in experiments). The full active set is assumed; restrict it
    /// with [`Numerology::with_active_set`].
    pub fn custom(n_fft: usize, n_cp: usize, delta_f_hz: f64) -> Result<Self> {
        if n_fft < 2 {
            return Err(Error::InvalidNumerology(format!(
                "n_fft must be at least 2, got {n_fft}"
            )));
        }
        if n_cp > n_fft {
            return Err(Error::InvalidNumerology(format!(
                "cyclic prefix of {n_cp} samples exceeds the symbol of {n_fft} samples"
            )));
        }
        if !(delta_f_hz.is_finite() && delta_f_hz > 0.0) {
            return Err(Error::InvalidNumerology(format!(
                "subcarrier spacing must be positive and finite, got {delta_f_hz}"
            )));
        }
        Ok(Self {
            n_fft,
            n_cp,
            delta_f_hz,
            active_set: (0..n_fft).collect(),
        })
    }

    /// Replaces the active subcarrier set.
    ///
    /// The set must be strictly increasing with every index in `0..n_fft`.
    /// An empty set is allowed: it models a user that occupies no bins (the
    /// degenerate limit of a maximal guard band) and yields zero rate and
    /// zero interference rather than an error.
    pub fn with_active_set(mut self, active_set: Vec<usize>) -> Result<Self> {
        for pair in active_set.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::InvalidActiveSet(format!(
                    "indices must be strictly increasing, got {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        if let Some(&last) = active_set.last() {
            if last >= self.n_fft {
                return Err(Error::InvalidActiveSet(format!(
                    "index {last} out of range for n_fft = {}",
                    self.n_fft
                )));
            }
        }
        self.active_set = active_set;
        Ok(self)
    }

    /// Number of active subcarriers.
    pub fn n_active(&self) -> usize {
        self.active_set.len()
    }

    /// Symbol length in samples including the cyclic prefix.
    pub fn symbol_len(&self) -> usize {
        self.n_fft + self.n_cp
    }

    /// Occupied bandwidth `n_fft * delta_f` in Hz.
    pub fn bandwidth_hz(&self) -> f64 {
        self.n_fft as f64 * self.delta_f_hz
    }
}

// ---------------------------------------------------------------------------
// NumerologyPair
// ---------------------------------------------------------------------------

/// Two numerologies sharing one band. User 1 has the larger FFT (narrower
/// spacing); `q = user1.n_fft / user2.n_fft` is a power of two, possibly 1.
///
/// One user-1 symbol (`n_fft1 + n_cp1` samples) is the processing frame; it
/// covers exactly `q` consecutive user-2 symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct NumerologyPair {
    pub user1: Numerology,
    pub user2: Numerology,
    /// FFT-size ratio `user1.n_fft / user2.n_fft` (= spacing ratio).
    pub q: usize,
}

impl NumerologyPair {
    /// Validates bandwidth and symbol-ratio compatibility and forms the pair.
    pub fn new(user1: Numerology, user2: Numerology) -> Result<Self> {
        let b1 = user1.bandwidth_hz();
        let b2 = user2.bandwidth_hz();
        if (b1 - b2).abs() > 1e-6 * b1.max(b2) {
            return Err(Error::IncompatiblePair(format!(
                "users must occupy the same bandwidth, got {b1} Hz and {b2} Hz"
            )));
        }
        if user1.n_fft < user2.n_fft {
            return Err(Error::IncompatiblePair(format!(
                "user 1 must have the larger FFT (narrower spacing); \
                 got n_fft1 = {} < n_fft2 = {}",
                user1.n_fft, user2.n_fft
            )));
        }
        if !user1.n_fft.is_multiple_of(user2.n_fft) {
            return Err(Error::IncompatiblePair(format!(
                "FFT sizes must divide evenly, got {} / {}",
                user1.n_fft, user2.n_fft
            )));
        }
        let q = user1.n_fft / user2.n_fft;
        if !q.is_power_of_two() {
            return Err(Error::IncompatiblePair(format!(
                "FFT-size ratio must be a power of two, got {q}"
            )));
        }
        if user1.symbol_len() != q * user2.symbol_len() {
            return Err(Error::IncompatiblePair(format!(
                "one user-1 symbol must span exactly q user-2 symbols including \
                 prefixes: {} != {} * {}",
                user1.symbol_len(),
                q,
                user2.symbol_len()
            )));
        }
        Ok(Self { user1, user2, q })
    }

    /// Builds a catalog pair by index with the default base spacing.
    pub fn from_indices(index1: u32, index2: u32) -> Result<Self> {
        Self::new(Numerology::from_index(index1)?, Numerology::from_index(index2)?)
    }

    /// Builds a catalog pair by index with a custom base spacing.
    pub fn from_indices_with_base(index1: u32, index2: u32, base_hz: f64) -> Result<Self> {
        Self::new(
            Numerology::from_index_with_base(index1, base_hz)?,
            Numerology::from_index_with_base(index2, base_hz)?,
        )
    }

    /// Frame length in samples: one user-1 symbol including its prefix.
    pub fn frame_len(&self) -> usize {
        self.user1.symbol_len()
    }

    /// The shared bandwidth in Hz.
    pub fn bandwidth_hz(&self) -> f64 {
        self.user1.bandwidth_hz()
    }

    /// Smaller of the two cyclic prefixes, the binding constraint for
    /// channel admissibility.
    pub fn min_n_cp(&self) -> usize {
        self.user1.n_cp.min(self.user2.n_cp)
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_matches_expected_sizes() {
        let expected = [
            (0u32, 4096, 288, 15_000.0),
            (1, 2048, 144, 30_000.0),
            (2, 1024, 72, 60_000.0),
            (3, 512, 36, 120_000.0),
            (4, 256, 18, 240_000.0),
            (5, 128, 9, 480_000.0),
        ];
        for (idx, n_fft, n_cp, df) in expected {
            let num = Numerology::from_index(idx).unwrap();
            assert_eq!(num.n_fft, n_fft, "n_fft at index {idx}");
            assert_eq!(num.n_cp, n_cp, "n_cp at index {idx}");
            assert!((num.delta_f_hz - df).abs() < 1e-9, "spacing at index {idx}");
            assert_eq!(num.n_active(), n_fft, "default active set is full");
        }
    }

    #[test]
    fn catalog_prefix_ratio_is_nine_over_128() {
        for idx in 0..=MAX_CATALOG_INDEX {
            let num = Numerology::from_index(idx).unwrap();
            assert_eq!(num.n_cp * 128, num.n_fft * 9, "prefix ratio at index {idx}");
        }
    }

    #[test]
    fn catalog_entries_share_one_bandwidth() {
        let b0 = Numerology::from_index(0).unwrap().bandwidth_hz();
        assert!((b0 - 61.44e6).abs() < 1e-3);
        for idx in 1..=MAX_CATALOG_INDEX {
            let b = Numerology::from_index(idx).unwrap().bandwidth_hz();
            assert!((b - b0).abs() < 1e-6 * b0, "bandwidth at index {idx}");
        }
    }

    #[test]
    fn pair_ratio_and_frame_span() {
        let pair = NumerologyPair::from_indices(4, 5).unwrap();
        assert_eq!(pair.q, 2);
        assert_eq!(pair.frame_len(), 274);
        assert_eq!(pair.user2.symbol_len() * pair.q, pair.frame_len());

        let wide = NumerologyPair::from_indices(1, 5).unwrap();
        assert_eq!(wide.q, 16);

        let same = NumerologyPair::from_indices(3, 3).unwrap();
        assert_eq!(same.q, 1);
    }

    #[test]
    fn pair_rejects_swapped_users() {
        let err = NumerologyPair::from_indices(5, 4).unwrap_err();
        assert!(err.to_string().contains("larger FFT"), "got: {err}");
    }

    #[test]
    fn pair_rejects_bandwidth_mismatch() {
        let a = Numerology::custom(64, 4, 1000.0).unwrap();
        let b = Numerology::custom(32, 2, 1000.0).unwrap(); // half the bandwidth
        let err = NumerologyPair::new(a, b).unwrap_err();
        assert!(err.to_string().contains("bandwidth"), "got: {err}");
    }

    #[test]
    fn pair_rejects_prefix_ratio_mismatch() {
        // Same bandwidth and q = 2, but the prefixes do not scale together,
        // so a long symbol does not span exactly two short ones.
        let a = Numerology::custom(64, 8, 1000.0).unwrap();
        let b = Numerology::custom(32, 2, 2000.0).unwrap();
        let err = NumerologyPair::new(a, b).unwrap_err();
        assert!(err.to_string().contains("span"), "got: {err}");
    }

    #[test]
    fn unknown_index_is_rejected() {
        assert!(matches!(
            Numerology::from_index(6),
            Err(Error::UnknownNumerology(6))
        ));
    }

    #[test]
    fn active_set_validation() {
        let num = Numerology::from_index(5).unwrap();
        assert!(num.clone().with_active_set(vec![0, 1, 127]).is_ok());
        assert!(num.clone().with_active_set(vec![]).is_ok(), "empty set allowed");
        assert!(num.clone().with_active_set(vec![0, 0, 1]).is_err(), "duplicate");
        assert!(num.clone().with_active_set(vec![1, 0]).is_err(), "unsorted");
        assert!(num.clone().with_active_set(vec![128]).is_err(), "out of range");
    }

    #[test]
    fn custom_numerology_validation() {
        assert!(Numerology::custom(1, 0, 1000.0).is_err(), "n_fft too small");
        assert!(Numerology::custom(16, 17, 1000.0).is_err(), "prefix too long");
        assert!(Numerology::custom(16, 4, 0.0).is_err(), "zero spacing");
        assert!(Numerology::custom(16, 4, f64::NAN).is_err(), "nan spacing");
    }
}
