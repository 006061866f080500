//! Numeric format descriptors and the bit-level decode/encode rules.
//!
//! Every floating-point format here uses denormals-are-zero on input and
//! flush-to-zero on output. Rounding is always round-to-nearest, ties to even.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Pre-DAZ classification of a raw bit pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RawClass {
    Normal,
    Zero,
    Subnormal,
    Inf,
    NaN,
}

/// Class of a decoded value (subnormals have already been flushed).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueClass {
    Normal,
    Zero,
    Inf,
    NaN,
}

/// The registry's floating-point formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum FloatKind {
    /// E2M1
    Fp4,
    /// E4M3
    Fp8,
    /// E5M2
    Fp8Alt,
    /// E5M10
    Fp16,
    /// E8M7
    Bf16,
    /// E8M23, used only inside the oracle.
    Fp32,
}

impl FloatKind {
    pub const ALL: [FloatKind; 6] = [
        FloatKind::Fp4,
        FloatKind::Fp8,
        FloatKind::Fp8Alt,
        FloatKind::Fp16,
        FloatKind::Bf16,
        FloatKind::Fp32,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FloatKind::Fp4 => "fp4",
            FloatKind::Fp8 => "fp8",
            FloatKind::Fp8Alt => "fp8alt",
            FloatKind::Fp16 => "fp16",
            FloatKind::Bf16 => "bf16",
            FloatKind::Fp32 => "fp32",
        }
    }

    /// `(exp_bits, mant_bits)` of the kind.
    pub fn layout(self) -> (u32, u32) {
        match self {
            FloatKind::Fp4 => (2, 1),
            FloatKind::Fp8 => (4, 3),
            FloatKind::Fp8Alt => (5, 2),
            FloatKind::Fp16 => (5, 10),
            FloatKind::Bf16 => (8, 7),
            FloatKind::Fp32 => (8, 23),
        }
    }

    pub fn from_name(name: &str) -> Option<FloatKind> {
        let lower = name.to_ascii_lowercase();
        let kind = match lower.as_str() {
            "fp4" | "e2m1" => FloatKind::Fp4,
            "fp8" | "e4m3" => FloatKind::Fp8,
            "fp8alt" | "e5m2" => FloatKind::Fp8Alt,
            "fp16" | "e5m10" | "half" => FloatKind::Fp16,
            "bf16" | "e8m7" => FloatKind::Bf16,
            "fp32" | "e8m23" => FloatKind::Fp32,
            _ => return None,
        };
        Some(kind)
    }
}

/// A sign/exponent/mantissa floating-point layout plus its special-value policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FloatFormat {
    kind: FloatKind,
    exp_bits: u32,
    mant_bits: u32,
    bias: i32,
    encodes_infinity: bool,
    all_ones_exp_is_special: bool,
}

impl FloatFormat {
    pub const FP4: FloatFormat = FloatFormat::builtin(FloatKind::Fp4, false);
    pub const FP8: FloatFormat = FloatFormat::builtin(FloatKind::Fp8, false);
    pub const FP8_ALT: FloatFormat = FloatFormat::builtin(FloatKind::Fp8Alt, true);
    pub const FP16: FloatFormat = FloatFormat::builtin(FloatKind::Fp16, true);
    pub const BF16: FloatFormat = FloatFormat::builtin(FloatKind::Bf16, true);
    pub const FP32: FloatFormat = FloatFormat::builtin(FloatKind::Fp32, true);

    const fn builtin(kind: FloatKind, encodes_infinity: bool) -> FloatFormat {
        let (exp_bits, mant_bits) = match kind {
            FloatKind::Fp4 => (2, 1),
            FloatKind::Fp8 => (4, 3),
            FloatKind::Fp8Alt => (5, 2),
            FloatKind::Fp16 => (5, 10),
            FloatKind::Bf16 => (8, 7),
            FloatKind::Fp32 => (8, 23),
        };
        FloatFormat {
            kind,
            exp_bits,
            mant_bits,
            bias: (1 << (exp_bits - 1)) - 1,
            encodes_infinity,
            all_ones_exp_is_special: true,
        }
    }

    /// Builds a registry entry, checking it against the kind's fixed layout.
    ///
    /// `encodes_infinity` requires `all_ones_exp_is_special`: infinity lives in
    /// the all-ones exponent.
    pub fn new(
        kind: FloatKind,
        exp_bits: u32,
        mant_bits: u32,
        encodes_infinity: bool,
        all_ones_exp_is_special: bool,
    ) -> Result<FloatFormat> {
        if kind.layout() != (exp_bits, mant_bits) {
            return Err(Error::Config(alloc::format!(
                "{} must be E{}M{}, got E{}M{}",
                kind.name(),
                kind.layout().0,
                kind.layout().1,
                exp_bits,
                mant_bits
            )));
        }
        if encodes_infinity && !all_ones_exp_is_special {
            return Err(Error::Config(alloc::format!(
                "{}: infinity requires the all-ones exponent to be special",
                kind.name()
            )));
        }
        Ok(FloatFormat {
            kind,
            exp_bits,
            mant_bits,
            bias: (1 << (exp_bits - 1)) - 1,
            encodes_infinity,
            all_ones_exp_is_special,
        })
    }

    pub fn of(kind: FloatKind) -> FloatFormat {
        match kind {
            FloatKind::Fp4 => Self::FP4,
            FloatKind::Fp8 => Self::FP8,
            FloatKind::Fp8Alt => Self::FP8_ALT,
            FloatKind::Fp16 => Self::FP16,
            FloatKind::Bf16 => Self::BF16,
            FloatKind::Fp32 => Self::FP32,
        }
    }

    pub fn kind(&self) -> FloatKind {
        self.kind
    }
    pub fn name(&self) -> &'static str {
        self.kind.name()
    }
    pub fn exp_bits(&self) -> u32 {
        self.exp_bits
    }
    pub fn mant_bits(&self) -> u32 {
        self.mant_bits
    }
    pub fn bias(&self) -> i32 {
        self.bias
    }
    pub fn encodes_infinity(&self) -> bool {
        self.encodes_infinity
    }
    pub fn all_ones_exp_is_special(&self) -> bool {
        self.all_ones_exp_is_special
    }

    pub fn width(&self) -> u32 {
        1 + self.exp_bits + self.mant_bits
    }

    /// Significand width including the implicit leading one.
    pub fn precision(&self) -> u32 {
        self.mant_bits + 1
    }

    fn exp_all_ones(&self) -> u32 {
        (1 << self.exp_bits) - 1
    }

    /// Largest exponent field that still encodes a finite number.
    pub fn max_finite_exp_field(&self) -> u32 {
        if self.all_ones_exp_is_special {
            self.exp_all_ones() - 1
        } else {
            self.exp_all_ones()
        }
    }

    /// Unbiased exponent of the smallest normal.
    pub fn min_exponent(&self) -> i32 {
        1 - self.bias
    }

    /// Unbiased exponent of the largest finite value.
    pub fn max_exponent(&self) -> i32 {
        self.max_finite_exp_field() as i32 - self.bias
    }

    fn sign_bit(&self) -> u32 {
        1 << (self.exp_bits + self.mant_bits)
    }

    fn mant_mask(&self) -> u32 {
        (1 << self.mant_bits) - 1
    }

    fn pack(&self, negative: bool, exp_field: u32, mant_field: u32) -> u32 {
        let sign = if negative { self.sign_bit() } else { 0 };
        sign | (exp_field << self.mant_bits) | (mant_field & self.mant_mask())
    }

    pub fn zero(&self, negative: bool) -> u32 {
        self.pack(negative, 0, 0)
    }

    /// Canonical quiet NaN: sign 0, all-ones exponent, mantissa MSB only.
    pub fn canonical_nan(&self) -> Option<u32> {
        if self.all_ones_exp_is_special {
            Some(self.pack(false, self.exp_all_ones(), 1 << (self.mant_bits - 1)))
        } else {
            None
        }
    }

    pub fn infinity(&self, negative: bool) -> Option<u32> {
        if self.encodes_infinity {
            Some(self.pack(negative, self.exp_all_ones(), 0))
        } else {
            None
        }
    }

    pub fn max_finite(&self, negative: bool) -> u32 {
        self.pack(negative, self.max_finite_exp_field(), self.mant_mask())
    }

    /// Pattern produced when a finite result exceeds the format's range.
    pub fn overflow_pattern(&self, negative: bool) -> u32 {
        match (self.infinity(negative), self.canonical_nan()) {
            (Some(inf), _) => inf,
            (None, Some(nan)) => nan,
            (None, None) => self.max_finite(negative),
        }
    }

    /// NaN result pattern; formats without a NaN encoding saturate instead.
    pub fn nan_pattern(&self) -> u32 {
        self.canonical_nan().unwrap_or_else(|| self.max_finite(false))
    }

    pub fn check_width(&self, bits: u32) -> Result<()> {
        if self.width() < 32 && bits >> self.width() != 0 {
            return Err(Error::Width {
                format: self.name(),
                bits: bits as u64,
                width: self.width(),
            });
        }
        Ok(())
    }

    pub fn classify(&self, bits: u32) -> RawClass {
        let exp = (bits >> self.mant_bits) & self.exp_all_ones();
        let mant = bits & self.mant_mask();
        if exp == 0 {
            if mant == 0 {
                RawClass::Zero
            } else {
                RawClass::Subnormal
            }
        } else if exp == self.exp_all_ones() && self.all_ones_exp_is_special {
            if mant == 0 && self.encodes_infinity {
                RawClass::Inf
            } else {
                RawClass::NaN
            }
        } else {
            RawClass::Normal
        }
    }

    /// Decodes with denormals-are-zero.
    pub fn decode(&self, bits: u32) -> Result<DecodedValue> {
        self.check_width(bits)?;
        let negative = bits & self.sign_bit() != 0;
        let exp = (bits >> self.mant_bits) & self.exp_all_ones();
        let mant = bits & self.mant_mask();
        let class = match self.classify(bits) {
            RawClass::Zero | RawClass::Subnormal => ValueClass::Zero,
            RawClass::Inf => ValueClass::Inf,
            RawClass::NaN => ValueClass::NaN,
            RawClass::Normal => {
                return Ok(DecodedValue {
                    class: ValueClass::Normal,
                    negative,
                    exponent: exp as i32 - self.bias,
                    mantissa: (mant | (1 << self.mant_bits)) as u64,
                })
            }
        };
        Ok(DecodedValue {
            class,
            negative,
            exponent: 0,
            mantissa: 0,
        })
    }

    /// Rounds an exact value into this format (RN-even, FTZ, saturating).
    ///
    /// Rounding happens at unbounded exponent range first; a rounded magnitude
    /// below the smallest normal then flushes to a signed zero and one above
    /// the largest finite value takes [`FloatFormat::overflow_pattern`].
    pub fn encode(&self, value: &ExactValue) -> u32 {
        let (negative, significand, exponent) = match value {
            ExactValue::NaN => return self.nan_pattern(),
            ExactValue::Inf { negative } => {
                return self
                    .infinity(*negative)
                    .unwrap_or_else(|| self.overflow_pattern(*negative))
            }
            ExactValue::Finite {
                negative,
                significand,
                exponent,
            } => (*negative, significand, *exponent),
        };
        if significand.is_zero() {
            return self.zero(negative);
        }
        let precision = self.precision();
        let len = significand.bits() as u32;
        let mut lead_exp = exponent as i64 + len as i64 - 1;
        let mut mant: u64 = if len <= precision {
            let m: BigUint = significand << (precision - len);
            to_u64(&m)
        } else {
            let shift = len - precision;
            let kept: BigUint = significand >> shift;
            let rem: BigUint = significand - (&kept << shift);
            let half: BigUint = BigUint::one() << (shift - 1);
            let kept = to_u64(&kept);
            let up = match rem.cmp(&half) {
                core::cmp::Ordering::Greater => true,
                core::cmp::Ordering::Equal => kept & 1 == 1,
                core::cmp::Ordering::Less => false,
            };
            kept + up as u64
        };
        if mant == 1 << precision {
            mant >>= 1;
            lead_exp += 1;
        }
        if lead_exp < self.min_exponent() as i64 {
            return self.zero(negative);
        }
        if lead_exp > self.max_exponent() as i64 {
            return self.overflow_pattern(negative);
        }
        let exp_field = (lead_exp + self.bias as i64) as u32;
        self.pack(negative, exp_field, mant as u32)
    }

    /// Exact value of a bit pattern after DAZ. Inputs must be width-checked.
    pub fn exact(&self, bits: u32) -> ExactValue {
        let d = self
            .decode(bits & width_mask(self.width()))
            .expect("masked to width");
        d.exact(self.mant_bits)
    }
}

impl fmt::Display for FloatFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (E{}M{})", self.name(), self.exp_bits, self.mant_bits)
    }
}

fn to_u64(v: &BigUint) -> u64 {
    let digits = v.to_u64_digits();
    debug_assert!(digits.len() <= 1);
    digits.first().copied().unwrap_or(0)
}

pub(crate) fn width_mask(width: u32) -> u32 {
    if width >= 32 {
        u32::MAX
    } else {
        (1 << width) - 1
    }
}

/// Two's-complement signed integer format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IntFormat {
    bits: u32,
}

impl IntFormat {
    pub const INT32: IntFormat = IntFormat { bits: 32 };

    pub fn new(bits: u32) -> Result<IntFormat> {
        if !(2..=32).contains(&bits) {
            return Err(Error::Config(alloc::format!(
                "integer width {bits} outside 2..=32"
            )));
        }
        Ok(IntFormat { bits })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn name(&self) -> String {
        alloc::format!("int{}", self.bits)
    }

    pub fn min_value(&self) -> i64 {
        -(1i64 << (self.bits - 1))
    }

    pub fn max_value(&self) -> i64 {
        (1i64 << (self.bits - 1)) - 1
    }

    /// Sign-extends a raw pattern.
    pub fn to_i64(&self, bits: u32) -> i64 {
        let shift = 64 - self.bits;
        (((bits as u64) << shift) as i64) >> shift
    }

    pub fn from_i64(&self, value: i64) -> u32 {
        (value as u64 & width_mask(self.bits) as u64) as u32
    }

    /// Sign-magnitude decode; the most negative value keeps its full magnitude.
    pub fn decode(&self, bits: u32) -> Result<DecodedValue> {
        if self.bits < 32 && bits >> self.bits != 0 {
            return Err(Error::Width {
                format: "int",
                bits: bits as u64,
                width: self.bits,
            });
        }
        let v = self.to_i64(bits);
        Ok(DecodedValue {
            class: if v == 0 {
                ValueClass::Zero
            } else {
                ValueClass::Normal
            },
            negative: v < 0,
            exponent: 0,
            mantissa: v.unsigned_abs(),
        })
    }
}

/// Either kind of operand format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NumFormat {
    Float(FloatFormat),
    Int(IntFormat),
}

impl NumFormat {
    pub fn width(&self) -> u32 {
        match self {
            NumFormat::Float(f) => f.width(),
            NumFormat::Int(i) => i.bits(),
        }
    }

    pub fn is_int(&self) -> bool {
        matches!(self, NumFormat::Int(_))
    }

    pub fn name(&self) -> String {
        match self {
            NumFormat::Float(f) => String::from(f.name()),
            NumFormat::Int(i) => i.name(),
        }
    }

    /// Bits of the magnitude handed to the multiplier: the significand with
    /// its implicit one for floats, the full width for integers (so that the
    /// most negative value's magnitude fits).
    pub fn magnitude_bits(&self) -> u32 {
        match self {
            NumFormat::Float(f) => f.precision(),
            NumFormat::Int(i) => i.bits(),
        }
    }

    pub fn max_magnitude(&self) -> u64 {
        match self {
            NumFormat::Float(f) => (1u64 << f.precision()) - 1,
            NumFormat::Int(i) => 1u64 << (i.bits() - 1),
        }
    }

    /// Binary-point position of the decoded mantissa.
    pub fn frac_bits(&self) -> u32 {
        match self {
            NumFormat::Float(f) => f.mant_bits(),
            NumFormat::Int(_) => 0,
        }
    }

    pub fn decode(&self, bits: u32) -> Result<DecodedValue> {
        match self {
            NumFormat::Float(f) => f.decode(bits),
            NumFormat::Int(i) => i.decode(bits),
        }
    }

    pub fn as_float(&self) -> Option<&FloatFormat> {
        match self {
            NumFormat::Float(f) => Some(f),
            NumFormat::Int(_) => None,
        }
    }
}

/// Decoded `(class, sign, exponent, mantissa)`.
///
/// For a normal float, `mantissa` carries the implicit one and the value is
/// `mantissa * 2^(exponent - mant_bits)`. Integers decode to their magnitude
/// with exponent 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DecodedValue {
    pub class: ValueClass,
    pub negative: bool,
    pub exponent: i32,
    pub mantissa: u64,
}

impl DecodedValue {
    pub fn exact(&self, frac_bits: u32) -> ExactValue {
        match self.class {
            ValueClass::NaN => ExactValue::NaN,
            ValueClass::Inf => ExactValue::Inf {
                negative: self.negative,
            },
            ValueClass::Zero => ExactValue::zero(self.negative),
            ValueClass::Normal => ExactValue::Finite {
                negative: self.negative,
                significand: BigUint::from(self.mantissa),
                exponent: self.exponent - frac_bits as i32,
            },
        }
    }
}

/// An exact dyadic rational `±significand * 2^exponent`, or a special value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExactValue {
    NaN,
    Inf {
        negative: bool,
    },
    Finite {
        negative: bool,
        significand: BigUint,
        exponent: i32,
    },
}

impl ExactValue {
    pub fn zero(negative: bool) -> ExactValue {
        ExactValue::Finite {
            negative,
            significand: BigUint::zero(),
            exponent: 0,
        }
    }

    pub fn finite(negative: bool, significand: u64, exponent: i32) -> ExactValue {
        ExactValue::Finite {
            negative,
            significand: BigUint::from(significand),
            exponent,
        }
    }

    pub fn is_nan(&self) -> bool {
        matches!(self, ExactValue::NaN)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ExactValue::Finite { significand, .. } if significand.is_zero())
    }
}

/// Free-function form of [`NumFormat::decode`].
pub fn decode(bits: u32, fmt: &NumFormat) -> Result<DecodedValue> {
    fmt.decode(bits)
}

/// Free-function form of [`FloatFormat::encode`].
pub fn encode(value: &ExactValue, fmt: &FloatFormat) -> u32 {
    fmt.encode(value)
}

/// Free-function form of [`FloatFormat::classify`]; integers are never special.
pub fn classify(bits: u32, fmt: &NumFormat) -> RawClass {
    match fmt {
        NumFormat::Float(f) => f.classify(bits),
        NumFormat::Int(i) => {
            if i.to_i64(bits) == 0 {
                RawClass::Zero
            } else {
                RawClass::Normal
            }
        }
    }
}

/// The set of float formats in use, possibly with user-adjusted policies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatRegistry {
    floats: Vec<FloatFormat>,
}

impl Default for FormatRegistry {
    fn default() -> Self {
        FormatRegistry {
            floats: FloatKind::ALL.iter().map(|&k| FloatFormat::of(k)).collect(),
        }
    }
}

impl FormatRegistry {
    /// Builds a registry from exactly one entry per [`FloatKind`].
    pub fn new(floats: Vec<FloatFormat>) -> Result<FormatRegistry> {
        for kind in FloatKind::ALL {
            let n = floats.iter().filter(|f| f.kind == kind).count();
            if n != 1 {
                return Err(Error::Config(alloc::format!(
                    "registry needs exactly one {} entry, found {n}",
                    kind.name()
                )));
            }
        }
        let mut floats = floats;
        floats.sort_by_key(|f| f.kind);
        Ok(FormatRegistry { floats })
    }

    pub fn floats(&self) -> &[FloatFormat] {
        &self.floats
    }

    pub fn float(&self, kind: FloatKind) -> FloatFormat {
        *self
            .floats
            .iter()
            .find(|f| f.kind == kind)
            .expect("registry holds every kind")
    }

    /// Resolves `fp8`, `e4m3`, `int4`, `int32`, ...
    pub fn lookup(&self, name: &str) -> Option<NumFormat> {
        if let Some(kind) = FloatKind::from_name(name) {
            return Some(NumFormat::Float(self.float(kind)));
        }
        let lower = name.to_ascii_lowercase();
        let bits: u32 = lower.strip_prefix("int")?.parse().ok()?;
        IntFormat::new(bits).ok().map(NumFormat::Int)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_layouts_and_biases() {
        for kind in FloatKind::ALL {
            let f = FloatFormat::of(kind);
            assert_eq!(f.bias(), (1 << (f.exp_bits() - 1)) - 1);
            let w = f.width();
            if kind == FloatKind::Fp32 {
                assert_eq!(w, 32);
            } else {
                assert!(w == 4 || w == 8 || w == 16, "{kind:?} width {w}");
            }
        }
        assert_eq!(FloatFormat::BF16.bias(), 127);
        assert_eq!(FloatFormat::FP8.bias(), 7);
        assert_eq!(FloatFormat::FP4.bias(), 1);
    }

    #[test]
    fn decode_examples() {
        let one = FloatFormat::BF16.decode(0x3F80).unwrap();
        assert_eq!(
            one,
            DecodedValue {
                class: ValueClass::Normal,
                negative: false,
                exponent: 0,
                mantissa: 0x80
            }
        );
        let sub = FloatFormat::FP8.decode(0x01).unwrap();
        assert_eq!(sub.class, ValueClass::Zero);
        assert!(!sub.negative);
        let neg8 = IntFormat::new(4).unwrap().decode(0b1000).unwrap();
        assert_eq!(
            neg8,
            DecodedValue {
                class: ValueClass::Normal,
                negative: true,
                exponent: 0,
                mantissa: 8
            }
        );
    }

    #[test]
    fn decode_rejects_wide_patterns() {
        assert!(FloatFormat::FP8.decode(0x100).is_err());
        assert!(IntFormat::new(4).unwrap().decode(0x10).is_err());
        assert!(NumFormat::Float(FloatFormat::FP4).decode(0x10).is_err());
    }

    #[test]
    fn classify_examples() {
        assert_eq!(FloatFormat::FP8.classify(0x7F), RawClass::NaN);
        assert_eq!(FloatFormat::FP16.classify(0x7C00), RawClass::Inf);
        assert_eq!(FloatFormat::FP8.classify(0x04), RawClass::Subnormal);
        assert_eq!(FloatFormat::FP8.classify(0x78), RawClass::NaN);
        assert_eq!(FloatFormat::FP8_ALT.classify(0x7C), RawClass::Inf);
        assert_eq!(FloatFormat::FP4.classify(0x6), RawClass::NaN);
    }

    #[test]
    fn classify_matches_field_definition_for_all_e4m3_codes() {
        let f = FloatFormat::FP8;
        for bits in 0u32..256 {
            let exp = (bits >> 3) & 0xF;
            let mant = bits & 7;
            let expected = match (exp, mant) {
                (0, 0) => RawClass::Zero,
                (0, _) => RawClass::Subnormal,
                (15, _) => RawClass::NaN,
                _ => RawClass::Normal,
            };
            assert_eq!(f.classify(bits), expected, "{bits:#04x}");
        }
    }

    #[test]
    fn encode_one_and_overflow() {
        assert_eq!(FloatFormat::BF16.encode(&ExactValue::finite(false, 1, 0)), 0x3F80);
        // (2 - 2^-7) * 2^127 plus one ulp at that binade.
        let max = ExactValue::finite(false, 0xFF + 1, 127 - 7);
        assert_eq!(FloatFormat::BF16.encode(&max), 0x7F80);
        assert_eq!(
            FloatFormat::BF16.encode(&ExactValue::finite(true, 0xFF + 1, 120)),
            0xFF80
        );
        // E4M3 has no infinity: overflow lands on the canonical NaN.
        assert_eq!(FloatFormat::FP8.encode(&ExactValue::finite(false, 1, 9)), 0x7C);
    }

    #[test]
    fn encode_ftz_keeps_sign() {
        let tiny = ExactValue::finite(true, 1, -140);
        assert_eq!(FloatFormat::BF16.encode(&tiny), 0x8000);
        assert_eq!(FloatFormat::BF16.encode(&ExactValue::zero(true)), 0x8000);
    }

    #[test]
    fn encode_tie_goes_to_even() {
        // 1 + 2^-8 lies between 1.0 (even) and 1 + 2^-7 (odd).
        let v = ExactValue::finite(false, (1 << 8) + 1, -8);
        assert_eq!(FloatFormat::BF16.encode(&v), 0x3F80);
        // 1 + 3 * 2^-8 lies between 1 + 2^-7 (odd) and 1 + 2^-6 (even).
        let v = ExactValue::finite(false, (1 << 8) + 3, -8);
        assert_eq!(FloatFormat::BF16.encode(&v), 0x3F82);
    }

    #[test]
    fn nan_canonical_patterns() {
        assert_eq!(FloatFormat::BF16.canonical_nan(), Some(0x7FC0));
        assert_eq!(FloatFormat::FP16.canonical_nan(), Some(0x7E00));
        assert_eq!(FloatFormat::FP8.canonical_nan(), Some(0x7C));
        assert_eq!(FloatFormat::FP4.canonical_nan(), Some(0x7));
        assert_eq!(FloatFormat::BF16.encode(&ExactValue::NaN), 0x7FC0);
    }

    #[test]
    fn ocp_fp4_policy_has_no_specials() {
        let f = FloatFormat::new(FloatKind::Fp4, 2, 1, false, false).unwrap();
        assert_eq!(f.classify(0x7), RawClass::Normal);
        let six = f.decode(0x7).unwrap();
        assert_eq!((six.exponent, six.mantissa), (2, 3));
        assert_eq!(f.encode(&ExactValue::finite(false, 7, 0)), 0x7);
        assert!(FloatFormat::new(FloatKind::Fp4, 2, 1, true, false).is_err());
        assert!(FloatFormat::new(FloatKind::Fp4, 3, 1, false, true).is_err());
    }

    #[test]
    fn registry_lookup() {
        let reg = FormatRegistry::default();
        assert_eq!(reg.lookup("E4M3"), Some(NumFormat::Float(FloatFormat::FP8)));
        assert_eq!(
            reg.lookup("int4"),
            Some(NumFormat::Int(IntFormat::new(4).unwrap()))
        );
        assert_eq!(reg.lookup("int1"), None);
        assert_eq!(reg.lookup("fp5"), None);
        assert!(FormatRegistry::new(alloc::vec![FloatFormat::FP4]).is_err());
    }
}
