//! Closed-form inter-numerology interference (INI) matrices.
//!
//! When the two users' numerologies differ, a subcarrier of one user is no
//! longer orthogonal to the other user's subcarriers, and the stage-1 SIC
//! observation picks up leakage from every active subcarrier of the
//! interfering user. That leakage is linear, so it is fully described by a
//! coupling matrix between the interferer's transmitted symbols and the
//! victim's demodulated bins:
//!
//! * Victim user 1 (decoded first in ordering 1): the interferer's frame is
//!   `q` short symbols, and the coupling is
//!   `Γ = F1 · R_cp1 · H2 · (I_q ⊗ A_cp2 F2^H)`,
//!   one column per (short symbol `m`, interferer subcarrier `o`), flattened
//!   as `(m-1) * n_active2 + o`.
//! * Victim user 2, short symbol `m` (decoded first in ordering 2):
//!   `Γ_m = F2 · R_cp2 · C_m · H1 · A_cp1 F1^H`,
//!   one column per interferer (user 1) subcarrier, where `C_m` slices the
//!   `m`-th short-symbol window out of the frame.
//!
//! For unit-energy uncorrelated data, the per-subcarrier interference power
//! (equivalently the MSE added to that bin) is the row squared norm,
//! `γ = diag(Γ Γ^H)`, scaled by the interferer's transmit power at the rate
//! layer. When the numerologies coincide (`q = 1`) both matrices collapse to
//! `diag(cfr)` of the interferer's channel — mixed- and single-numerology
//! analyses then agree by construction.
//!
//! Builders synthesise each interferer basis column with the closed-form
//! tone generator and an explicit short convolution instead of multiplying
//! dense operators; tests pin both routes together to 1e-10.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::numerology::NumerologyPair;
use crate::ofdm_ops::unit_tone;

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// Successive-interference-cancellation decoding order. The first-decoded
/// user absorbs the cross-numerology leakage; the second is demodulated
/// after the first's contribution has been subtracted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SicOrdering {
    /// User 1 (narrow subcarrier spacing) is decoded first.
    User1First,
    /// User 2 (wide subcarrier spacing) is decoded first.
    User2First,
}

impl SicOrdering {
    /// Numeric tag used in result tables: 1 or 2.
    pub fn index(self) -> u8 {
        match self {
            SicOrdering::User1First => 1,
            SicOrdering::User2First => 2,
        }
    }

    /// Both orders, in tag order.
    pub fn both() -> [SicOrdering; 2] {
        [SicOrdering::User1First, SicOrdering::User2First]
    }
}

/// Dense interference coupling matrix: rows index the victim's active
/// subcarriers, columns the interferer's transmitted symbols.
#[derive(Debug, Clone)]
pub struct IniMatrix {
    /// Victim-bins × interferer-symbols coupling coefficients.
    pub gamma: Array2<Complex64>,
}

/// Per-victim-subcarrier interference power for unit-power interferer data:
/// the row squared norms of an [`IniMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct MseVector(pub Vec<f64>);

impl MseVector {
    /// Borrow the per-subcarrier values.
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Number of victim subcarriers covered.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True when the victim has no active subcarriers.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Row squared norms of the coupling matrix: the interference power each
/// victim subcarrier collects from unit-energy, uncorrelated interferer data.
pub fn mse_vector(g: &IniMatrix) -> MseVector {
    MseVector(
        g.gamma
            .rows()
            .into_iter()
            .map(|row| row.iter().map(|z| z.norm_sqr()).sum())
            .collect(),
    )
}

/// Element-wise mean of per-short-symbol MSE vectors (the aggregate a victim
/// averaging over the frame sees). All vectors must have equal length.
pub fn mean_mse(per_m: &[MseVector]) -> MseVector {
    let Some(first) = per_m.first() else {
        return MseVector(Vec::new());
    };
    let mut acc = vec![0.0; first.len()];
    for v in per_m {
        debug_assert_eq!(v.len(), first.len(), "per-m MSE lengths must match");
        for (a, &x) in acc.iter_mut().zip(&v.0) {
            *a += x;
        }
    }
    let scale = 1.0 / per_m.len() as f64;
    for a in &mut acc {
        *a *= scale;
    }
    MseVector(acc)
}

// ---------------------------------------------------------------------------
// Ordering 1: user 1 is the victim
// ---------------------------------------------------------------------------

/// Coupling from the wide-spacing user's frame onto the narrow-spacing
/// user's bins: `Γ = F1 · R_cp1 · H2 · (I_q ⊗ A_cp2 F2^H)`.
///
/// `h2` is the interferer's channel as seen by the common receiver. The
/// result has `user1.n_active()` rows and `q * user2.n_active()` columns,
/// short symbol `m` (1-based) occupying the column block starting at
/// `(m-1) * user2.n_active()`.
pub fn ini_ordering1(h2: &ChannelRealization, pair: &NumerologyPair) -> Result<IniMatrix> {
    check_channel(h2, pair.user1.n_cp, pair)?;

    let u1 = &pair.user1;
    let u2 = &pair.user2;
    let (l1, l2) = (pair.frame_len(), u2.symbol_len());
    let (n1, n_cp1) = (u1.n_fft, u1.n_cp);
    let scale = 1.0 / (n1 as f64).sqrt();

    let mut planner = FftPlanner::new();
    let fft1 = planner.plan_fft_forward(n1);
    let mut scratch = vec![Complex64::ZERO; fft1.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::ZERO; n1];

    let mut gamma = Array2::zeros((u1.n_active(), pair.q * u2.n_active()));
    for oi in 0..u2.n_active() {
        let tone = unit_tone(u2, oi);
        for m in 1..=pair.q {
            let start = (m - 1) * l2;
            buf.fill(Complex64::ZERO);
            // y = H2 · (short symbol placed at `start`), prefix-stripped:
            // accumulate tap-shifted copies of the tone directly into the
            // FFT buffer, which holds frame samples n_cp1..l1.
            for (l, &tap) in h2.taps.iter().enumerate() {
                if tap == Complex64::ZERO {
                    continue;
                }
                for (t, &s) in tone.iter().enumerate() {
                    let abs = start + t + l;
                    if abs < n_cp1 {
                        continue;
                    }
                    if abs >= l1 {
                        break;
                    }
                    buf[abs - n_cp1] += tap * s;
                }
            }
            fft1.process_with_scratch(&mut buf, &mut scratch);
            let col = (m - 1) * u2.n_active() + oi;
            for (ri, &bin) in u1.active_set.iter().enumerate() {
                gamma[(ri, col)] = buf[bin] * scale;
            }
        }
    }
    Ok(IniMatrix { gamma })
}

// ---------------------------------------------------------------------------
// Ordering 2: user 2 is the victim
// ---------------------------------------------------------------------------

/// Coupling from the narrow-spacing user's frame onto the wide-spacing
/// user's bins in short symbol `m` (1-based):
/// `Γ_m = F2 · R_cp2 · C_m · H1 · A_cp1 F1^H`.
///
/// The result has `user2.n_active()` rows and `user1.n_active()` columns.
pub fn ini_ordering2(
    h1: &ChannelRealization,
    pair: &NumerologyPair,
    m: usize,
) -> Result<IniMatrix> {
    if m == 0 || m > pair.q {
        return Err(Error::SymbolIndexOutOfRange { m, q: pair.q });
    }
    Ok(ini_ordering2_multi(h1, pair, &[m])?.pop().expect("one window requested"))
}

/// All `q` short-symbol coupling matrices of ordering 2 in one pass; the
/// interferer's basis columns are synthesised once and reused across the
/// windows, which is the hot path of the rate pipeline.
pub fn ini_ordering2_all(h1: &ChannelRealization, pair: &NumerologyPair) -> Result<Vec<IniMatrix>> {
    let ms: Vec<usize> = (1..=pair.q).collect();
    ini_ordering2_multi(h1, pair, &ms)
}

fn ini_ordering2_multi(
    h1: &ChannelRealization,
    pair: &NumerologyPair,
    ms: &[usize],
) -> Result<Vec<IniMatrix>> {
    check_channel(h1, pair.user2.n_cp, pair)?;

    let u1 = &pair.user1;
    let u2 = &pair.user2;
    let l2 = u2.symbol_len();
    let (n2, n_cp2) = (u2.n_fft, u2.n_cp);
    let scale = 1.0 / (n2 as f64).sqrt();

    let mut planner = FftPlanner::new();
    let fft2 = planner.plan_fft_forward(n2);
    let mut scratch = vec![Complex64::ZERO; fft2.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::ZERO; n2];

    let mut out: Vec<IniMatrix> = ms
        .iter()
        .map(|_| IniMatrix {
            gamma: Array2::zeros((u2.n_active(), u1.n_active())),
        })
        .collect();

    for oi in 0..u1.n_active() {
        let tone = unit_tone(u1, oi);
        for (mi, &m) in ms.iter().enumerate() {
            // Window samples surviving R_cp2 start at this frame offset;
            // reading `tone[abs - l]` is safe because the admissibility
            // check guarantees l <= n_cp2 <= abs.
            let start = (m - 1) * l2 + n_cp2;
            for (tp, slot) in buf.iter_mut().enumerate() {
                let abs = start + tp;
                let mut acc = Complex64::ZERO;
                for (l, &tap) in h1.taps.iter().enumerate() {
                    if tap != Complex64::ZERO {
                        acc += tap * tone[abs - l];
                    }
                }
                *slot = acc;
            }
            fft2.process_with_scratch(&mut buf, &mut scratch);
            for (ri, &bin) in u2.active_set.iter().enumerate() {
                out[mi].gamma[(ri, oi)] = buf[bin] * scale;
            }
        }
    }
    Ok(out)
}

/// Shared preconditions: the interfering channel must fit the victim's
/// cyclic prefix (the rate model's diagonalization premise) and the frame.
fn check_channel(
    h: &ChannelRealization,
    victim_n_cp: usize,
    pair: &NumerologyPair,
) -> Result<()> {
    if h.order() > victim_n_cp {
        return Err(Error::ChannelExceedsCp {
            n_ch: h.order(),
            n_cp: victim_n_cp,
            fs_hz: h.fs_hz,
        });
    }
    if h.taps.len() > pair.frame_len() {
        return Err(Error::ChannelExceedsFrame {
            taps: h.taps.len(),
            frame: pair.frame_len(),
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
