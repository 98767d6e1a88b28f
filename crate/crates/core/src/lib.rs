//! Soft-concatenated polar codes: polar rows, short inner column codes and
//! per-column CRC-aided list decoding, plus density-evolution based code
//! construction and a Monte-Carlo simulation harness.

pub mod channel;
pub mod concat;
pub mod construction;
pub mod crc;
pub mod error;
pub mod inner_codes;
pub mod polar;
pub mod sim;

pub use channel::{ChannelKind, ChannelParam};
pub use concat::{concat_decode, concat_encode, CodeMatrix, ConcatSpec, DecodeStats};
pub use crc::CrcConfig;
pub use error::{Error, Result};
pub use inner_codes::InnerCode;
pub use polar::{polar_encode, sc_decode, scl_decode, PolarSpec};
