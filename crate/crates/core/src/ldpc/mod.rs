//! Regular LDPC codes: construction, systematic encoding, sum-product
//! decoding and coded bit-error-rate measurement driven by a detector's
//! soft output.

mod code;
mod decode;
mod sim;

pub use code::{build_regular_ldpc, LdpcCode};
pub use decode::{decode_bp, decode_bp_with_clamp, DecodeResult, DEFAULT_DECODER_CLAMP};
pub use sim::{coded_ber_run, CodedBerResult, CodedBerRun};
