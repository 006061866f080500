//! Bit-accurate model of a DSP-packed, runtime-switchable mixed-precision MAC.
//!
//! The crate is `no_std` with `alloc`. File formats, configuration and the
//! command-line front end live in the companion `xtramac` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod datatype;
pub mod dsp48;
pub mod error;
pub mod formats;
pub mod gemv;
pub mod oracle;
pub mod packing;
pub mod pipeline;

pub use datatype::MacDatatype;
pub use error::{Error, Result};
pub use formats::{
    DecodedValue, ExactValue, FloatFormat, FloatKind, FormatRegistry, IntFormat, NumFormat,
    RawClass, ValueClass,
};
