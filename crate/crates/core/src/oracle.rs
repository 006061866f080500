//! Golden reference MAC built on exact dyadic arithmetic.
//!
//! Nothing in here shares code with the pipeline datapath: products and sums
//! are formed as arbitrary-precision integers and rounded once per format
//! boundary by [`FloatFormat::encode`].

use core::cmp::Ordering;

use num_bigint::BigUint;
use num_traits::Zero;

use crate::datatype::MacDatatype;
use crate::error::{Error, Result};
use crate::formats::{DecodedValue, ExactValue, FloatFormat, IntFormat, NumFormat, ValueClass};

/// Where the product is rounded relative to the accumulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Accumulation {
    /// Round the product into the output format, then round the sum.
    #[default]
    Unfused,
    /// Round `a*b + c` once.
    Fused,
}

/// `m_a * m_b` with no rounding, plus the sign/exponent bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactProduct {
    pub class: ValueClass,
    pub negative: bool,
    pub mantissa_product: u64,
    /// `e_a + e_b` (integers contribute 0).
    pub exponent: i32,
    /// Binary point of `mantissa_product`.
    pub frac_bits: u32,
    /// Width of the double-width product frame.
    pub frame_bits: u32,
}

impl ExactProduct {
    pub fn exact(&self) -> ExactValue {
        match self.class {
            ValueClass::NaN => ExactValue::NaN,
            ValueClass::Inf => ExactValue::Inf {
                negative: self.negative,
            },
            ValueClass::Zero => ExactValue::zero(self.negative),
            ValueClass::Normal => ExactValue::finite(
                self.negative,
                self.mantissa_product,
                self.exponent - self.frac_bits as i32,
            ),
        }
    }
}

/// Product of two decoded operands.
///
/// `inf * 0` is NaN, NaN propagates, `inf * finite` is a signed infinity and
/// any zero operand gives a zero signed by the XOR rule.
pub fn oracle_mul(a: &DecodedValue, b: &DecodedValue, dt: &MacDatatype) -> ExactProduct {
    let negative = a.negative ^ b.negative;
    let class = match (a.class, b.class) {
        (ValueClass::NaN, _) | (_, ValueClass::NaN) => ValueClass::NaN,
        (ValueClass::Inf, ValueClass::Zero) | (ValueClass::Zero, ValueClass::Inf) => {
            ValueClass::NaN
        }
        (ValueClass::Inf, _) | (_, ValueClass::Inf) => ValueClass::Inf,
        (ValueClass::Zero, _) | (_, ValueClass::Zero) => ValueClass::Zero,
        (ValueClass::Normal, ValueClass::Normal) => ValueClass::Normal,
    };
    let normal = class == ValueClass::Normal;
    ExactProduct {
        class,
        negative: if class == ValueClass::NaN { false } else { negative },
        mantissa_product: if normal { a.mantissa * b.mantissa } else { 0 },
        exponent: if normal { a.exponent + b.exponent } else { 0 },
        frac_bits: dt.a().frac_bits() + dt.b().frac_bits(),
        frame_bits: dt.a().magnitude_bits() + dt.b().magnitude_bits(),
    }
}

/// A product renormalized so its leading one sits at bit `width - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Normalized {
    pub mantissa: u64,
    /// Unbiased exponent of the leading one.
    pub exponent: i32,
    /// Leading-zero count applied.
    pub shift: u32,
}

/// Leading-zero normalization of a product inside a `width`-bit frame.
pub fn oracle_normalize(p: &ExactProduct, width: u32) -> Result<Normalized> {
    if p.class != ValueClass::Normal || p.mantissa_product == 0 {
        return Err(Error::Contract(alloc::string::String::from(
            "zero or special product has no normal form; emit Zero",
        )));
    }
    let len = 64 - p.mantissa_product.leading_zeros();
    if len > width || width > 63 {
        return Err(Error::Contract(alloc::format!(
            "product needs {len} bits, frame is {width}"
        )));
    }
    let shift = width - len;
    Ok(Normalized {
        mantissa: p.mantissa_product << shift,
        exponent: p.exponent - p.frac_bits as i32 + (width as i32 - 1) - shift as i32,
        shift,
    })
}

/// Exact sum of two values.
///
/// `+inf + -inf` is NaN; an exact cancellation is `+0` and two zeros add to
/// `-0` only when both are negative.
pub fn exact_add(x: &ExactValue, y: &ExactValue) -> ExactValue {
    use ExactValue::*;
    match (x, y) {
        (NaN, _) | (_, NaN) => NaN,
        (Inf { negative: nx }, Inf { negative: ny }) => {
            if nx == ny {
                x.clone()
            } else {
                NaN
            }
        }
        (Inf { .. }, _) => x.clone(),
        (_, Inf { .. }) => y.clone(),
        (
            Finite {
                negative: nx,
                significand: sx,
                exponent: ex,
            },
            Finite {
                negative: ny,
                significand: sy,
                exponent: ey,
            },
        ) => {
            if sx.is_zero() && sy.is_zero() {
                return ExactValue::zero(*nx && *ny);
            }
            if sx.is_zero() {
                return y.clone();
            }
            if sy.is_zero() {
                return x.clone();
            }
            let e = (*ex).min(*ey);
            let ax: BigUint = sx << (ex - e) as u32;
            let ay: BigUint = sy << (ey - e) as u32;
            if nx == ny {
                return Finite {
                    negative: *nx,
                    significand: ax + ay,
                    exponent: e,
                };
            }
            match ax.cmp(&ay) {
                Ordering::Equal => ExactValue::zero(false),
                Ordering::Greater => Finite {
                    negative: *nx,
                    significand: ax - ay,
                    exponent: e,
                },
                Ordering::Less => Finite {
                    negative: *ny,
                    significand: ay - ax,
                    exponent: e,
                },
            }
        }
    }
}

/// Reference `a*b + c` on raw patterns with the default unfused rounding.
pub fn oracle_mac(a_bits: u32, b_bits: u32, c_bits: u32, dt: &MacDatatype) -> Result<u32> {
    oracle_mac_with(a_bits, b_bits, c_bits, dt, Accumulation::Unfused)
}

pub fn oracle_mac_with(
    a_bits: u32,
    b_bits: u32,
    c_bits: u32,
    dt: &MacDatatype,
    mode: Accumulation,
) -> Result<u32> {
    let a = dt.a().decode(a_bits)?;
    let b = dt.b().decode(b_bits)?;
    let c = dt.c().decode(c_bits)?;
    let product = oracle_mul(&a, &b, dt);
    match dt.p() {
        NumFormat::Int(acc) => Ok(int_accumulate(&product, &c, &acc)),
        NumFormat::Float(acc) => {
            let rounded = match mode {
                Accumulation::Unfused => round_product(&product, &acc),
                Accumulation::Fused => product.exact(),
            };
            let sum = exact_add(&rounded, &c.exact(acc.mant_bits()));
            Ok(acc.encode(&sum))
        }
    }
}

/// Product rounded into the accumulator format and read back exactly.
pub fn round_product(product: &ExactProduct, acc: &FloatFormat) -> ExactValue {
    acc.exact(acc.encode(&product.exact()))
}

/// Exact product widened into the accumulator, saturating on overflow.
fn int_accumulate(product: &ExactProduct, c: &DecodedValue, acc: &IntFormat) -> u32 {
    let signed = |negative: bool, magnitude: u64| {
        let m = magnitude as i128;
        if negative {
            -m
        } else {
            m
        }
    };
    let sum = signed(product.negative, product.mantissa_product) + signed(c.negative, c.mantissa);
    let sum = sum.clamp(acc.min_value() as i128, acc.max_value() as i128);
    acc.from_i64(sum as i64)
}
