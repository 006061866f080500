//! MAC datatype combinations `A x B + C -> P` (C and P always share a format).

use alloc::string::String;
use core::fmt;

use crate::error::{Error, Result};
use crate::formats::{FloatFormat, FloatKind, FormatRegistry, IntFormat, NumFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MacDatatype {
    a: NumFormat,
    b: NumFormat,
    acc: NumFormat,
}

impl MacDatatype {
    /// Validates a combination.
    ///
    /// Multiplicands are INT2..INT8 or any non-FP32 float. INT x INT
    /// accumulates into INT32; anything with a float operand accumulates into
    /// FP16 or BF16.
    pub fn new(a: NumFormat, b: NumFormat, acc: NumFormat) -> Result<MacDatatype> {
        for op in [a, b] {
            match op {
                NumFormat::Int(i) if i.bits() > 8 => {
                    return Err(Error::Config(alloc::format!(
                        "{} is not a multiplicand format (INT2-INT8 only)",
                        i.name()
                    )))
                }
                NumFormat::Float(f) if f.kind() == FloatKind::Fp32 => {
                    return Err(Error::Config(String::from(
                        "fp32 is reserved for the oracle",
                    )))
                }
                _ => {}
            }
        }
        let ok = match acc {
            NumFormat::Int(i) => a.is_int() && b.is_int() && i.bits() == 32,
            NumFormat::Float(f) => {
                !(a.is_int() && b.is_int())
                    && matches!(f.kind(), FloatKind::Fp16 | FloatKind::Bf16)
            }
        };
        if !ok {
            return Err(Error::Config(alloc::format!(
                "cannot accumulate {}x{} into {}",
                a.name(),
                b.name(),
                acc.name()
            )));
        }
        Ok(MacDatatype { a, b, acc })
    }

    /// Parses `<a>x<b>[+<acc>]`, e.g. `int4xbf16`, `fp8xfp8+bf16`.
    pub fn parse(id: &str, registry: &FormatRegistry) -> Result<MacDatatype> {
        let unknown = || Error::UnknownDatatype(String::from(id));
        let lower = id.trim().to_ascii_lowercase();
        let (mul, acc) = match lower.split_once('+') {
            Some((m, c)) => (m, Some(c)),
            None => (lower.as_str(), None),
        };
        let (a, b) = mul.split_once('x').ok_or_else(unknown)?;
        let a = registry.lookup(a).ok_or_else(unknown)?;
        let b = registry.lookup(b).ok_or_else(unknown)?;
        let acc = match acc {
            Some(c) => registry.lookup(c).ok_or_else(unknown)?,
            None => default_accumulator(&a, &b, registry),
        };
        MacDatatype::new(a, b, acc)
    }

    pub fn a(&self) -> NumFormat {
        self.a
    }
    pub fn b(&self) -> NumFormat {
        self.b
    }
    /// Accumulator input format.
    pub fn c(&self) -> NumFormat {
        self.acc
    }
    /// Output format (same as `c`).
    pub fn p(&self) -> NumFormat {
        self.acc
    }

    pub fn is_int_mac(&self) -> bool {
        self.acc.is_int()
    }

    pub fn acc_float(&self) -> Option<FloatFormat> {
        self.acc.as_float().copied()
    }

    pub fn id(&self) -> String {
        let mut id = alloc::format!("{}x{}", self.a.name(), self.b.name());
        let default = default_accumulator(&self.a, &self.b, &FormatRegistry::default());
        if default.name() != self.acc.name() {
            id.push('+');
            id.push_str(&self.acc.name());
        }
        id
    }
}

fn default_accumulator(a: &NumFormat, b: &NumFormat, registry: &FormatRegistry) -> NumFormat {
    if a.is_int() && b.is_int() {
        return NumFormat::Int(IntFormat::INT32);
    }
    let is_fp16 = |f: &NumFormat| matches!(f, NumFormat::Float(f) if f.kind() == FloatKind::Fp16);
    if is_fp16(a) || is_fp16(b) {
        NumFormat::Float(registry.float(FloatKind::Fp16))
    } else {
        NumFormat::Float(registry.float(FloatKind::Bf16))
    }
}

impl fmt::Display for MacDatatype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// Datatypes exercised by the conformance suites and `mac gen --all`.
pub const CATALOG: &[&str] = &[
    "int8xint8",
    "int4xint4",
    "fp4xfp4",
    "fp8xfp8",
    "fp8altxfp8alt",
    "bf16xbf16",
    "fp16xfp16",
    "int2xbf16",
    "int4xbf16",
    "int8xbf16",
    "fp4xbf16",
    "fp8xbf16",
    "int4xfp16",
    "int8xfp16",
    "fp4xfp16",
    "fp8xfp16",
];

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(id: &str) -> Result<MacDatatype> {
        MacDatatype::parse(id, &FormatRegistry::default())
    }

    #[test]
    fn default_accumulators() {
        assert_eq!(parse("int8xint8").unwrap().p().name(), "int32");
        assert_eq!(parse("fp8xfp8").unwrap().p().name(), "bf16");
        assert_eq!(parse("int4xfp16").unwrap().p().name(), "fp16");
        assert_eq!(parse("FP8xFP8").unwrap().id(), "fp8xfp8");
        assert_eq!(parse("fp8xfp8+fp16").unwrap().id(), "fp8xfp8+fp16");
        assert_eq!(parse("e4m3xe4m3+bf16").unwrap().id(), "fp8xfp8");
    }

    #[test]
    fn rejects_bad_combinations() {
        assert!(parse("int8xint8+bf16").is_err());
        assert!(parse("bf16xbf16+int32").is_err());
        assert!(parse("int16xbf16").is_err());
        assert!(parse("fp32xbf16").is_err());
        assert!(parse("bf16xbf16+fp8").is_err());
        assert!(matches!(parse("bogus"), Err(Error::UnknownDatatype(_))));
    }

    #[test]
    fn catalog_parses_and_round_trips() {
        for id in CATALOG {
            assert_eq!(parse(id).unwrap().id(), *id);
        }
    }
}
