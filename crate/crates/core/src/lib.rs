//! Rate-adaptive geometric constellation shaping with many-to-one label
//! mappings.
//!
//! The crate covers the full workflow: labeled constellations and their
//! moment statistics ([`constellation`]), a small MLP with Adam
//! ([`neuralnet`]), an effective-SNR fiber channel whose nonlinear noise
//! depends on the fourth moment of the constellation ([`channel`]), the
//! Gaussian bitwise demapper ([`demapper`]), the masked cross-entropy cost
//! and GMI estimator ([`metrics`]), the autoencoder training loop
//! ([`trainer`]), rate planning and ideal-FEC reach ([`rate_adapt`]) and
//! an LDPC-coded BICM chain with dummy-bit scheduling ([`fec`]).

pub mod channel;
pub mod constellation;
pub mod demapper;
pub mod error;
pub mod fec;
pub mod metrics;
pub mod neuralnet;
pub mod rate_adapt;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};

/// Nearest integer of a non-negative dummy-bit count, rounding halves up.
///
/// This is the number of trailing label positions excluded from the
/// training cost.
pub fn round_nd(n_d: f64) -> usize {
    n_d.round() as usize
}

/// Number of data-carrying label positions for a given dummy-bit count.
pub fn data_bits(m: usize, n_d: f64) -> Result<usize> {
    if !n_d.is_finite() || n_d < 0.0 {
        return Err(error::invalid!("n_d must be a finite non-negative number, got {n_d}"));
    }
    let r = round_nd(n_d);
    if r >= m {
        return Err(error::invalid!("n_d = {n_d} rounds to {r}, leaving no data bits for m = {m}"));
    }
    Ok(m - r)
}
