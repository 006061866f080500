//! Operand and accumulator samplers shared by vector generation and sweeps.

use rand::Rng;
use xtramac_core::oracle::oracle_mac;
use xtramac_core::{MacDatatype, NumFormat};

fn mask(width: u32) -> u32 {
    ((1u64 << width) - 1) as u32
}

/// Uniform raw pattern of `fmt`.
pub fn operand<R: Rng>(rng: &mut R, fmt: &NumFormat) -> u32 {
    rng.gen::<u32>() & mask(fmt.width())
}

/// Special or boundary patterns of `fmt`.
pub fn edge_value<R: Rng>(rng: &mut R, fmt: &NumFormat) -> u32 {
    let negative = rng.gen::<bool>();
    match fmt {
        NumFormat::Int(i) => {
            let picks = [i.min_value(), i.max_value(), 0, 1, -1];
            i.from_i64(picks[rng.gen_range(0..picks.len())])
        }
        NumFormat::Float(f) => match rng.gen_range(0..5) {
            0 => f.zero(negative),
            1 => f.nan_pattern(),
            2 => f.overflow_pattern(negative),
            3 => f.max_finite(negative),
            // Smallest normal and its subnormal neighbour.
            _ => f.zero(negative) | (1 << f.mant_bits()) >> rng.gen_range(0..2),
        },
    }
}

/// An accumulator value for `a x b`: uniform, an edge value, or one that
/// nearly cancels the rounded product.
pub fn accumulator<R: Rng>(rng: &mut R, dt: &MacDatatype, a: u32, b: u32) -> u32 {
    let acc = dt.c();
    match rng.gen_range(0..10) {
        0..=3 => operand(rng, &acc),
        4 => edge_value(rng, &acc),
        _ => {
            let zero = match acc {
                NumFormat::Int(_) => 0,
                NumFormat::Float(f) => f.zero(false),
            };
            let p = oracle_mac(a, b, zero, dt).expect("sampled operands are in range");
            near_negation(rng, &acc, p)
        }
    }
}

fn near_negation<R: Rng>(rng: &mut R, acc: &NumFormat, p: u32) -> u32 {
    let nudge = rng.gen_range(-3i64..=3);
    match acc {
        NumFormat::Int(i) => i.from_i64((-i.to_i64(p)).saturating_add(nudge).clamp(i.min_value(), i.max_value())),
        NumFormat::Float(f) => {
            let sign = 1u32 << (f.width() - 1);
            let magnitude = (p & (sign - 1)) as i64 + nudge;
            ((magnitude.clamp(0, (sign - 1) as i64) as u32) | (!p & sign)) & mask(f.width())
        }
    }
}
