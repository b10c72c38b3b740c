//! LDPC-coded BICM chain.
//!
//! Codes come from alist files ([`alist`]) and are encoded systematically
//! and decoded by sum-product message passing ([`ldpc`]). Coded bits are
//! interleaved, placed into labels around the dummy positions
//! ([`schedule`]), mapped through a constellation LUT and sent over AWGN;
//! the Gaussian demapper feeds the decoder ([`chain`]).

pub mod alist;
pub mod chain;
pub mod ldpc;
pub mod schedule;

pub use alist::{parse_alist, to_alist, SparseH};
pub use chain::{run_chain, run_chain_with, BerReport, ChainOptions, BER_THRESHOLD, MIN_DECISION_BITS};
pub use ldpc::{DecodeOutcome, Decoder, LdpcCode};
pub use schedule::{build_schedule, frame_symbols_for, FrameSchedule, Slot};
