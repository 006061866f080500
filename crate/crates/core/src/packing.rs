//! Lane layouts on the DSP ports: planning, certification, packing and
//! shift-and-mask recovery of the per-lane products.

use alloc::vec::Vec;

use crate::datatype::MacDatatype;
use crate::dsp48::{DspPorts, A_PORT_BITS, B_PORT_BITS, PRODUCT_BITS};
use crate::error::{Error, Result};

pub const DEFAULT_GUARD: u32 = 1;
/// Widest lane count the planner will search for.
pub const MAX_LANES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LanePattern {
    /// Several operands on A times one shared operand on B.
    Broadcast,
    /// Operands on both ports; every pairwise product is a lane.
    CrossProduct,
}

impl LanePattern {
    pub fn name(self) -> &'static str {
        match self {
            LanePattern::Broadcast => "broadcast",
            LanePattern::CrossProduct => "cross",
        }
    }
}

/// Search limits for [`plan_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlanLimits {
    pub guard: u32,
    /// Lane counts searched are the powers of two up to this value.
    pub max_lanes: usize,
    pub allow_cross: bool,
}

impl Default for PlanLimits {
    fn default() -> Self {
        PlanLimits {
            guard: DEFAULT_GUARD,
            max_lanes: MAX_LANES,
            allow_cross: true,
        }
    }
}

/// A certified lane layout.
///
/// Lanes are numbered by ascending product-field position; `lane_map[k]` is
/// the `(a index, b index)` pair multiplied in lane `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackingPlan {
    datatype: MacDatatype,
    pattern: LanePattern,
    a_offsets: Vec<u32>,
    b_offsets: Vec<u32>,
    lane_map: Vec<(usize, usize)>,
    width_a: u32,
    width_b: u32,
    lane_width: u32,
    guard: u32,
    stride: u32,
}

/// Symmetric-port bound `min(27/S, 18/S)`.
pub fn parallelism_bound(stride: u32) -> u32 {
    let s = stride.max(1);
    (A_PORT_BITS / s).min(B_PORT_BITS / s)
}

/// Cross-product bound `(27/S) * (18/S)`.
pub fn cross_bound(stride: u32) -> u32 {
    let s = stride.max(1);
    (A_PORT_BITS / s) * (B_PORT_BITS / s)
}

/// Most lanes a broadcast layout can place on A: the last operand only needs
/// `width_a` bits, not a full stride.
pub fn broadcast_bound(stride: u32, width_a: u32) -> u32 {
    if width_a > A_PORT_BITS {
        0
    } else {
        (A_PORT_BITS - width_a) / stride.max(1) + 1
    }
}

/// Bits needed for the largest magnitude product of `dt`.
pub fn lane_width(dt: &MacDatatype) -> u32 {
    let p = dt.a().max_magnitude() * dt.b().max_magnitude();
    64 - p.leading_zeros()
}

pub fn plan(dt: &MacDatatype, guard: u32) -> Result<PackingPlan> {
    plan_with(
        dt,
        PlanLimits {
            guard,
            ..PlanLimits::default()
        },
    )
}

/// Exhaustive layout search.
///
/// Cross-product layouts are only considered when the lane count stays within
/// [`cross_bound`], even where a tighter packing would be disjoint.
///
/// Maximizes lanes, then minimizes the sum of all offsets, then prefers
/// broadcast, then the lexicographically smallest `(a_offsets, b_offsets)`.
pub fn plan_with(dt: &MacDatatype, limits: PlanLimits) -> Result<PackingPlan> {
    let width_a = dt.a().magnitude_bits();
    let width_b = dt.b().magnitude_bits();
    let lane_width = lane_width(dt);
    let stride = lane_width + limits.guard;
    let mut lanes = 1;
    while lanes * 2 <= limits.max_lanes {
        lanes *= 2;
    }
    while lanes >= 1 {
        let mut best: Option<(u32, LanePattern, Vec<u32>, Vec<u32>)> = None;
        for (i, j) in shapes(lanes, limits.allow_cross) {
            let (pattern, bound) = if j == 1 {
                (LanePattern::Broadcast, broadcast_bound(stride, width_a))
            } else {
                (LanePattern::CrossProduct, cross_bound(stride))
            };
            if lanes as u32 > bound {
                continue;
            }
            let a_limit = match A_PORT_BITS.checked_sub(width_a) {
                Some(l) => l,
                None => continue,
            };
            let b_limit = match B_PORT_BITS.checked_sub(width_b) {
                Some(l) => l,
                None => continue,
            };
            let b_sets = offset_sets(j, b_limit);
            for a in offset_sets(i, a_limit) {
                for b in &b_sets {
                    if !fields_fit(&a, b, stride) {
                        continue;
                    }
                    let sum = a.iter().sum::<u32>() + b.iter().sum::<u32>();
                    let key = (sum, pattern, a.clone(), b.clone());
                    if best.as_ref().is_none_or(|cur| key < *cur) {
                        best = Some(key);
                    }
                }
            }
        }
        if let Some((_, pattern, a_offsets, b_offsets)) = best {
            let plan = PackingPlan::build(
                *dt, pattern, a_offsets, b_offsets, width_a, width_b, lane_width, limits.guard,
            );
            plan.certify()?;
            return Ok(plan);
        }
        lanes /= 2;
    }
    Err(Error::Infeasible(dt.id()))
}

fn shapes(lanes: usize, allow_cross: bool) -> Vec<(usize, usize)> {
    let mut out = alloc::vec![(lanes, 1)];
    if allow_cross {
        out.extend(
            (2..=lanes)
                .filter(|j| lanes.is_multiple_of(*j))
                .map(|j| (lanes / j, j)),
        );
    }
    out
}

/// Strictly increasing offset lists of length `n` starting at 0, max `limit`.
fn offset_sets(n: usize, limit: u32) -> Vec<Vec<u32>> {
    fn rec(n: usize, next: u32, limit: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for v in next..=limit {
            cur.push(v);
            rec(n, v + 1, limit, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    let mut cur = alloc::vec![0];
    if n >= 1 {
        rec(n, 1, limit, &mut cur, &mut out);
    }
    out
}

fn fields(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut starts: Vec<u32> = a
        .iter()
        .flat_map(|s| b.iter().map(move |t| s + t))
        .collect();
    starts.sort_unstable();
    starts
}

fn fields_fit(a: &[u32], b: &[u32], stride: u32) -> bool {
    let starts = fields(a, b);
    starts.windows(2).all(|w| w[1] >= w[0] + stride)
        && starts.last().is_some_and(|&s| s + stride <= PRODUCT_BITS)
}

impl PackingPlan {
    #[allow(clippy::too_many_arguments)]
    fn build(
        datatype: MacDatatype,
        pattern: LanePattern,
        a_offsets: Vec<u32>,
        b_offsets: Vec<u32>,
        width_a: u32,
        width_b: u32,
        lane_width: u32,
        guard: u32,
    ) -> PackingPlan {
        let mut lane_map: Vec<(usize, usize)> = (0..a_offsets.len())
            .flat_map(|i| (0..b_offsets.len()).map(move |j| (i, j)))
            .collect();
        lane_map.sort_by_key(|&(i, j)| a_offsets[i] + b_offsets[j]);
        PackingPlan {
            datatype,
            pattern,
            a_offsets,
            b_offsets,
            lane_map,
            width_a,
            width_b,
            lane_width,
            guard,
            stride: lane_width + guard,
        }
    }

    pub fn datatype(&self) -> &MacDatatype {
        &self.datatype
    }
    pub fn pattern(&self) -> LanePattern {
        self.pattern
    }
    pub fn a_offsets(&self) -> &[u32] {
        &self.a_offsets
    }
    pub fn b_offsets(&self) -> &[u32] {
        &self.b_offsets
    }
    pub fn lane_map(&self) -> &[(usize, usize)] {
        &self.lane_map
    }
    /// Magnitude bits of one A operand.
    pub fn width_a(&self) -> u32 {
        self.width_a
    }
    pub fn width_b(&self) -> u32 {
        self.width_b
    }
    pub fn lane_width(&self) -> u32 {
        self.lane_width
    }
    pub fn guard(&self) -> u32 {
        self.guard
    }
    pub fn stride(&self) -> u32 {
        self.stride
    }
    pub fn lanes(&self) -> usize {
        self.lane_map.len()
    }

    /// Start bit of lane `k`'s product field.
    pub fn lane_offset(&self, k: usize) -> u32 {
        let (i, j) = self.lane_map[k];
        self.a_offsets[i] + self.b_offsets[j]
    }

    pub fn parallelism_bound(&self) -> u32 {
        parallelism_bound(self.stride)
    }

    /// Bound for this plan's pattern.
    pub fn pattern_bound(&self) -> u32 {
        match self.pattern {
            LanePattern::Broadcast => broadcast_bound(self.stride, self.width_a),
            LanePattern::CrossProduct => cross_bound(self.stride),
        }
    }

    /// Highest bit of the 45-bit product occupied by any lane field.
    pub fn occupied_bits(&self) -> u32 {
        (0..self.lanes())
            .map(|k| self.lane_offset(k) + self.stride)
            .max()
            .unwrap_or(0)
    }

    /// Rechecks every layout invariant.
    pub fn certify(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Contract(alloc::format!("{}: {msg}", self.datatype)));
        if self.stride < self.lane_width + self.guard {
            return fail("stride below lane width plus guard");
        }
        let ascending = |o: &[u32]| o.first() == Some(&0) && o.windows(2).all(|w| w[0] < w[1]);
        if !ascending(&self.a_offsets) || !ascending(&self.b_offsets) {
            return fail("offsets must start at 0 and increase");
        }
        if self.pattern == LanePattern::Broadcast && self.b_offsets.len() != 1 {
            return fail("broadcast shares a single B operand");
        }
        if self.a_offsets.last().unwrap() + self.width_a > A_PORT_BITS {
            return fail("A port overflow");
        }
        if self.b_offsets.last().unwrap() + self.width_b > B_PORT_BITS {
            return fail("B port overflow");
        }
        if !fields_fit(&self.a_offsets, &self.b_offsets, self.stride) {
            return fail("product fields overlap or exceed 45 bits");
        }
        if self.lanes() as u32 > self.pattern_bound() {
            return fail("lane count above the pattern bound");
        }
        Ok(())
    }
}

/// Places operand magnitudes on the ports.
pub fn pack(plan: &PackingPlan, a_lanes: &[u64], b_lanes: &[u64]) -> Result<DspPorts> {
    if a_lanes.len() != plan.a_offsets.len() || b_lanes.len() != plan.b_offsets.len() {
        return Err(Error::Contract(alloc::format!(
            "plan takes {}x{} operands, got {}x{}",
            plan.a_offsets.len(),
            plan.b_offsets.len(),
            a_lanes.len(),
            b_lanes.len()
        )));
    }
    let place = |vals: &[u64], offsets: &[u32], width: u32| -> Result<u64> {
        let mut word = 0u64;
        for (&v, &s) in vals.iter().zip(offsets) {
            if v >> width != 0 {
                return Err(Error::Contract(alloc::format!(
                    "magnitude {v:#x} exceeds {width} bits"
                )));
            }
            word |= v << s;
        }
        Ok(word)
    };
    DspPorts::new(
        place(a_lanes, &plan.a_offsets, plan.width_a)?,
        place(b_lanes, &plan.b_offsets, plan.width_b)?,
    )
}

/// `(p >> offset_k) & (2^S - 1)` for every lane.
pub fn extract(plan: &PackingPlan, p_dsp: u64) -> Vec<u64> {
    let mask = (1u64 << plan.stride) - 1;
    (0..plan.lanes())
        .map(|k| (p_dsp >> plan.lane_offset(k)) & mask)
        .collect()
}
