//! Link-level simulator for two-user uplink NOMA with mixed OFDM numerologies.
//!
//! Two users transmit simultaneously over one shared band, each on its own
//! OFDM numerology (FFT size / subcarrier spacing / cyclic prefix). Mixing
//! numerologies breaks subcarrier orthogonality between the users, so the
//! receiver sees inter-numerology interference on top of the usual
//! superposition that successive interference cancellation (SIC) resolves.
//!
//! The crate computes that interference in closed form as matrix products of
//! the OFDM operators, turns it into per-subcarrier SINRs and achievable
//! rates for both SIC decoding orders, optimizes the two-user power split,
//! and compares against single-numerology NOMA and orthogonal-access
//! baselines. A time-domain Monte Carlo chain provides an independent check
//! of every closed-form quantity, and the [`experiment`] module packages the
//! whole thing into reproducible, file-emitting experiment runs.
//!
//! Module map:
//!
//! * [`numerology`] — the scaled numerology catalog and two-user pairs.
//! * [`ofdm_ops`] — per-symbol OFDM operators, dense and FFT-backed.
//! * [`channel`] — tapped-delay-line profiles, realizations, responses.
//! * [`ini_analysis`] — closed-form inter-numerology interference matrices.
//! * [`rate_analysis`] — SINRs, rates, power search, baseline schemes.
//! * [`sim_chain`] — time-domain Monte Carlo transmit/receive chain.
//! * [`experiment`] — scenario configs, experiment runners, validation.

pub mod channel;
pub mod error;
pub mod experiment;
pub mod ini_analysis;
pub mod numerology;
pub mod ofdm_ops;
pub mod rate_analysis;
pub mod sim_chain;
mod svg;

pub use error::{Error, Result};
