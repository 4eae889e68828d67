//! OFDM matrix operators: subcarrier mapping, cyclic prefix, (de)modulation.
//!
//! The transmit chain for one symbol is `x = A_cp · F^H · d`, where `F` is the
//! row subset of the unitary DFT matrix selected by the active set and `A_cp`
//! prepends the last `n_cp` samples. The receive chain is `F · R_cp · y`
//! with `R_cp` dropping the prefix.
//!
//! Both representations of these operators are provided and must agree:
//!
//! * [`OfdmOperatorSet`] holds the explicit dense matrices. Interference
//!   analysis and test oracles multiply them out directly.
//! * [`OfdmModem`] applies the same maps through FFTs in `O(N log N)` without
//!   materialising anything; the Monte Carlo chain and the fast interference
//!   builders run on it.
//!
//! ```
//! use mn_noma_core::numerology::Numerology;
//! use mn_noma_core::ofdm_ops::{build_operators, OfdmModem};
//! use num_complex::Complex64;
//!
//! let num = Numerology::from_index(5).unwrap();
//! let modem = OfdmModem::new(&num);
//! let d: Vec<Complex64> = (0..num.n_active())
//!     .map(|i| Complex64::new(1.0, i as f64))
//!     .collect();
//! let x = modem.modulate_symbol(&d).unwrap();
//! assert_eq!(x.len(), num.symbol_len());
//! let dense = build_operators(&num);
//! let x_dense = dense.modulate_symbol(&d).unwrap();
//! let err: f64 = x.iter().zip(&x_dense).map(|(a, b)| (a - b).norm()).sum();
//! assert!(err < 1e-9);
//! ```

use std::f64::consts::TAU;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::numerology::Numerology;

// ---------------------------------------------------------------------------
// Dense operators
// ---------------------------------------------------------------------------

/// Explicit dense forms of the per-symbol operators of one numerology.
#[derive(Debug, Clone)]
pub struct OfdmOperatorSet {
    /// `n_active x n_fft` row subset of the unitary DFT matrix:
    /// `fmat[r, c] = exp(-j 2π active[r] c / N) / sqrt(N)`.
    pub fmat: Array2<Complex64>,
    /// `(n_fft + n_cp) x n_fft` 0/1 matrix that copies the symbol and
    /// prepends its last `n_cp` samples.
    pub cp_add: Array2<f64>,
    /// `n_fft x (n_fft + n_cp)` 0/1 matrix that drops the prefix.
    pub cp_remove: Array2<f64>,
    num: Numerology,
}

/// Builds the dense operator set for `num`.
///
/// Memory grows as `n_fft^2`; intended for analysis and oracles at moderate
/// sizes. The streaming equivalents live on [`OfdmModem`].
pub fn build_operators(num: &Numerology) -> OfdmOperatorSet {
    let n = num.n_fft;
    let l = num.symbol_len();
    let scale = 1.0 / (n as f64).sqrt();

    let fmat = Array2::from_shape_fn((num.n_active(), n), |(r, c)| {
        let angle = -TAU * (num.active_set[r] as f64) * (c as f64) / (n as f64);
        Complex64::from_polar(scale, angle)
    });

    let mut cp_add = Array2::zeros((l, n));
    for r in 0..num.n_cp {
        cp_add[(r, n - num.n_cp + r)] = 1.0;
    }
    for t in 0..n {
        cp_add[(num.n_cp + t, t)] = 1.0;
    }

    let mut cp_remove = Array2::zeros((n, l));
    for t in 0..n {
        cp_remove[(t, num.n_cp + t)] = 1.0;
    }

    OfdmOperatorSet {
        fmat,
        cp_add,
        cp_remove,
        num: num.clone(),
    }
}

impl OfdmOperatorSet {
    /// The numerology these operators were built for.
    pub fn numerology(&self) -> &Numerology {
        &self.num
    }

    /// Dense-path modulation `A_cp · F^H · d`; `d` has one entry per active
    /// subcarrier, the result is one symbol of `n_fft + n_cp` samples.
    pub fn modulate_symbol(&self, d: &[Complex64]) -> Result<Vec<Complex64>> {
        if d.len() != self.num.n_active() {
            return Err(Error::DimensionMismatch {
                what: "modulate_symbol data vector",
                expected: self.num.n_active(),
                got: d.len(),
            });
        }
        let n = self.num.n_fft;
        let l = self.num.symbol_len();
        // F^H d: accumulate columns of F^H = conjugated rows of F.
        let mut useful = vec![Complex64::ZERO; n];
        for (r, &dr) in d.iter().enumerate() {
            for (slot, f) in useful.iter_mut().zip(self.fmat.row(r)) {
                *slot += f.conj() * dr;
            }
        }
        let mut out = vec![Complex64::ZERO; l];
        for (r, slot) in out.iter_mut().enumerate() {
            let mut acc = Complex64::ZERO;
            for (u, w) in useful.iter().zip(self.cp_add.row(r)) {
                if *w != 0.0 {
                    acc += *u;
                }
            }
            *slot = acc;
        }
        Ok(out)
    }

    /// Dense-path demodulation `F · R_cp · y` of one received symbol of
    /// `n_fft + n_cp` samples; returns one entry per active subcarrier.
    pub fn demodulate_symbol(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        let l = self.num.symbol_len();
        if y.len() != l {
            return Err(Error::DimensionMismatch {
                what: "demodulate_symbol sample vector",
                expected: l,
                got: y.len(),
            });
        }
        let useful = &y[self.num.n_cp..];
        let mut out = vec![Complex64::ZERO; self.num.n_active()];
        for (r, slot) in out.iter_mut().enumerate() {
            let mut acc = Complex64::ZERO;
            for (f, u) in self.fmat.row(r).iter().zip(useful) {
                acc += f * u;
            }
            *slot = acc;
        }
        Ok(out)
    }
}

/// Lifts a real 0/1 operator matrix into the complex field so it can enter
/// complex matrix products (used when multiplying the dense chain out).
pub fn real_to_complex(m: &ArrayView2<f64>) -> Array2<Complex64> {
    m.map(|&v| Complex64::new(v, 0.0))
}

/// Dense selection matrix for the `m`-th short symbol inside a frame of `q`
/// short symbols of `l2` samples each: `l2 x (q*l2)` 0/1 matrix with an
/// identity block starting at column `(m-1)*l2`. `m` is 1-based.
pub fn slice_matrix(m: usize, q: usize, l2: usize) -> Result<Array2<f64>> {
    if m == 0 || m > q {
        return Err(Error::SymbolIndexOutOfRange { m, q });
    }
    let mut c = Array2::zeros((l2, q * l2));
    for r in 0..l2 {
        c[(r, (m - 1) * l2 + r)] = 1.0;
    }
    Ok(c)
}

// ---------------------------------------------------------------------------
// Fast operators
// ---------------------------------------------------------------------------

/// FFT-backed implementation of the same per-symbol maps as
/// [`OfdmOperatorSet`], agreeing with the dense path to better than 1e-10.
#[derive(Clone)]
pub struct OfdmModem {
    num: Numerology,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for OfdmModem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OfdmModem").field("num", &self.num).finish()
    }
}

impl OfdmModem {
    /// Plans FFTs for the numerology's size.
    pub fn new(num: &Numerology) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            num: num.clone(),
            fft: planner.plan_fft_forward(num.n_fft),
            ifft: planner.plan_fft_inverse(num.n_fft),
        }
    }

    /// The numerology this modem runs.
    pub fn numerology(&self) -> &Numerology {
        &self.num
    }

    /// `A_cp · F^H · d` via an inverse FFT.
    pub fn modulate_symbol(&self, d: &[Complex64]) -> Result<Vec<Complex64>> {
        if d.len() != self.num.n_active() {
            return Err(Error::DimensionMismatch {
                what: "modulate_symbol data vector",
                expected: self.num.n_active(),
                got: d.len(),
            });
        }
        let n = self.num.n_fft;
        let n_cp = self.num.n_cp;
        let mut buf = vec![Complex64::ZERO; n];
        for (pos, &bin) in self.num.active_set.iter().enumerate() {
            buf[bin] = d[pos];
        }
        self.ifft.process(&mut buf);
        let scale = 1.0 / (n as f64).sqrt();
        let mut out = vec![Complex64::ZERO; n + n_cp];
        for (t, v) in buf.iter().enumerate() {
            out[n_cp + t] = v * scale;
        }
        for t in 0..n_cp {
            out[t] = out[n + t];
        }
        Ok(out)
    }

    /// `F · R_cp · y` via a forward FFT on one symbol of `n_fft + n_cp`
    /// samples.
    pub fn demodulate_symbol(&self, y: &[Complex64]) -> Result<Vec<Complex64>> {
        let l = self.num.symbol_len();
        if y.len() != l {
            return Err(Error::DimensionMismatch {
                what: "demodulate_symbol sample vector",
                expected: l,
                got: y.len(),
            });
        }
        let mut buf = y[self.num.n_cp..].to_vec();
        self.fft.process(&mut buf);
        let scale = 1.0 / (self.num.n_fft as f64).sqrt();
        Ok(self
            .num
            .active_set
            .iter()
            .map(|&bin| buf[bin] * scale)
            .collect())
    }
}

/// Concatenates the `q` short symbols of the wide-spacing user into one frame:
/// `(I_q ⊗ A_cp F^H) d_tilde`. `d_tilde` holds `q * n_active` entries, short
/// symbol `m` occupying the slice `(m-1)*n_active..m*n_active`.
pub fn build_frame_user2(
    modem2: &OfdmModem,
    d_tilde: &[Complex64],
    q: usize,
) -> Result<Vec<Complex64>> {
    let n_act = modem2.numerology().n_active();
    if d_tilde.len() != q * n_act {
        return Err(Error::DimensionMismatch {
            what: "build_frame_user2 data vector",
            expected: q * n_act,
            got: d_tilde.len(),
        });
    }
    let l2 = modem2.numerology().symbol_len();
    let mut frame = Vec::with_capacity(q * l2);
    for m in 0..q {
        frame.extend(modem2.modulate_symbol(&d_tilde[m * n_act..(m + 1) * n_act])?);
    }
    Ok(frame)
}

/// One modulated unit basis vector as a closed-form tone: the symbol
/// `A_cp F^H e_pos` for active-set position `pos` equals
/// `exp(j 2π bin (t - n_cp) / N) / sqrt(N)` for all `t` in `0..N+n_cp`,
/// because the cyclic prefix of an integer-bin tone extends it periodically.
///
/// Interference builders synthesise basis columns with this instead of an
/// inverse FFT per column. A rotation recurrence with periodic resync keeps
/// the drift orders of magnitude below the 1e-10 agreement budget.
pub(crate) fn unit_tone(num: &Numerology, pos: usize) -> Vec<Complex64> {
    let n = num.n_fft;
    let bin = num.active_set[pos];
    let l = num.symbol_len();
    let scale = 1.0 / (n as f64).sqrt();
    let step_angle = TAU * bin as f64 / n as f64;
    let step = Complex64::from_polar(1.0, step_angle);
    let mut out = Vec::with_capacity(l);
    let mut cur = Complex64::ZERO;
    for t in 0..l {
        if t % 64 == 0 {
            // Exact restart; reduce the phase index mod N to keep it small.
            let idx = (t as i64 - num.n_cp as i64).rem_euclid(n as i64) as f64;
            cur = Complex64::from_polar(scale, step_angle * idx);
        } else {
            cur *= step;
        }
        out.push(cur);
    }
    out
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
