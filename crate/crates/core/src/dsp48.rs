//! The 27x18 unsigned multiplier primitive.

use crate::error::{Error, Result};

pub const A_PORT_BITS: u32 = 27;
pub const B_PORT_BITS: u32 = 18;
pub const PRODUCT_BITS: u32 = A_PORT_BITS + B_PORT_BITS;

/// Unsigned magnitudes on the two multiplier inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct DspPorts {
    a: u32,
    b: u32,
}

impl DspPorts {
    pub fn new(a: u64, b: u64) -> Result<DspPorts> {
        if a >> A_PORT_BITS != 0 || b >> B_PORT_BITS != 0 {
            return Err(Error::Contract(alloc::format!(
                "port overflow: a={a:#x} (27 bits), b={b:#x} (18 bits)"
            )));
        }
        Ok(DspPorts {
            a: a as u32,
            b: b as u32,
        })
    }

    pub fn a(&self) -> u32 {
        self.a
    }

    pub fn b(&self) -> u32 {
        self.b
    }
}

/// Combinational `A * B`; always below `2^45`.
pub fn wide_mul(p: DspPorts) -> u64 {
    p.a as u64 * p.b as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let x = 0x2_ABCD;
        assert_eq!(wide_mul(DspPorts::new(0, x).unwrap()), 0);
        assert_eq!(wide_mul(DspPorts::new(1, x).unwrap()), x);
        assert_eq!(wide_mul(DspPorts::new(1 << 26, 1 << 17).unwrap()), 1 << 43);
    }

    #[test]
    fn port_overflow_is_rejected() {
        assert!(DspPorts::new(1 << 27, 0).is_err());
        assert!(DspPorts::new(0, 1 << 18).is_err());
        let max = DspPorts::new((1 << 27) - 1, (1 << 18) - 1).unwrap();
        assert!(wide_mul(max) < 1 << PRODUCT_BITS);
    }

    proptest! {
        #[test]
        fn matches_bigint(a in 0u64..(1 << 27), b in 0u64..(1 << 18)) {
            let p = wide_mul(DspPorts::new(a, b).unwrap());
            prop_assert_eq!(BigUint::from(p), BigUint::from(a) * BigUint::from(b));
            prop_assert!(p < 1 << PRODUCT_BITS);
        }
    }
}
