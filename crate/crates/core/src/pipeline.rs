//! Cycle-accurate model of the four-stage MAC pipeline.
//!
//! Stage 1 unpacks operands and maps them onto the DSP ports, stage 2 runs the
//! multiplier, recovers lanes and rounds each product into the accumulator
//! format, stage 3 adds the accumulator operand, stage 4 resolves special
//! values and assembles the output word. Every stage output sits in a delay
//! line of configurable depth, so latency is the sum of the depths and a new
//! slot is accepted every cycle.
//!
//! Nothing here calls the oracle or the format codec's arithmetic: field
//! extraction, normalization and rounding are reimplemented the way the
//! datapath does them, which is what makes the oracle comparison meaningful.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::datatype::MacDatatype;
use crate::dsp48::{wide_mul, DspPorts};
use crate::error::{Error, Result};
use crate::formats::{FloatFormat, NumFormat};
use crate::packing::{self, PackingPlan, PlanLimits, MAX_LANES};

/// Extra adder bits below the rounding position: guard, round, sticky.
const GRS_BITS: u32 = 3;

/// Whether the model evaluates every hardware path or only the selected one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalMode {
    /// All mapping submodules and both adders run every cycle.
    #[default]
    Faithful,
    /// Only the selected datatype's mapper and adder run.
    Fast,
}

/// Per-datatype precomputed layout.
#[derive(Debug, Clone)]
struct Mapper {
    dt: MacDatatype,
    plan: PackingPlan,
    n_a: usize,
    n_b: usize,
    lane_ops: [(usize, usize); MAX_LANES],
    lanes: usize,
}

impl Mapper {
    fn new(plan: PackingPlan) -> Result<Mapper> {
        let lanes = plan.lanes();
        if lanes > MAX_LANES {
            return Err(Error::Config(alloc::format!(
                "{}: {lanes} lanes exceed the {MAX_LANES}-lane substrate",
                plan.datatype()
            )));
        }
        let mut lane_ops = [(0, 0); MAX_LANES];
        lane_ops[..lanes].copy_from_slice(plan.lane_map());
        Ok(Mapper {
            dt: *plan.datatype(),
            n_a: plan.a_offsets().len(),
            n_b: plan.b_offsets().len(),
            lane_ops,
            lanes,
            plan,
        })
    }
}

/// The synthesis-time datatype set plus pipeline shape.
#[derive(Debug, Clone)]
pub struct MacConfig {
    mappers: Vec<Mapper>,
    max_lanes: usize,
    stage_depths: [usize; 4],
    mode: EvalMode,
}

impl MacConfig {
    /// Plans every datatype with the default guard and lane limits.
    pub fn new(datatypes: &[MacDatatype]) -> Result<MacConfig> {
        let plans = datatypes
            .iter()
            .map(|dt| packing::plan_with(dt, PlanLimits::default()))
            .collect::<Result<Vec<_>>>()?;
        MacConfig::from_plans(plans)
    }

    pub fn from_plans(plans: Vec<PackingPlan>) -> Result<MacConfig> {
        if plans.is_empty() {
            return Err(Error::Config(String::from("at least one datatype is required")));
        }
        let mappers = plans.into_iter().map(Mapper::new).collect::<Result<Vec<_>>>()?;
        let max_lanes = mappers.iter().map(|m| m.lanes).max().unwrap_or(1);
        Ok(MacConfig {
            mappers,
            max_lanes,
            stage_depths: [1; 4],
            mode: EvalMode::default(),
        })
    }

    pub fn with_stage_depths(mut self, depths: [usize; 4]) -> Result<MacConfig> {
        if depths.contains(&0) {
            return Err(Error::Config(String::from("every stage needs depth >= 1")));
        }
        self.stage_depths = depths;
        Ok(self)
    }

    pub fn with_mode(mut self, mode: EvalMode) -> MacConfig {
        self.mode = mode;
        self
    }

    /// Number of supported datatypes (N).
    pub fn datatype_count(&self) -> usize {
        self.mappers.len()
    }

    pub fn datatype(&self, select: usize) -> &MacDatatype {
        &self.mappers[select].dt
    }

    pub fn plan(&self, select: usize) -> &PackingPlan {
        &self.mappers[select].plan
    }

    pub fn select_of(&self, dt: &MacDatatype) -> Option<usize> {
        self.mappers.iter().position(|m| m.dt == *dt)
    }

    /// Widest lane count across the datatype set (P).
    pub fn max_lanes(&self) -> usize {
        self.max_lanes
    }

    pub fn stage_depths(&self) -> [usize; 4] {
        self.stage_depths
    }

    pub fn mode(&self) -> EvalMode {
        self.mode
    }

    pub fn latency(&self) -> usize {
        self.stage_depths.iter().sum()
    }

    fn mapper(&self, select: usize) -> Result<&Mapper> {
        self.mappers.get(select).ok_or_else(|| {
            Error::Contract(alloc::format!(
                "dtype_select {select} out of range (N = {})",
                self.mappers.len()
            ))
        })
    }

    /// Builds a slot from per-operand raw patterns; operand `i` of each port
    /// occupies bits `[i*w, (i+1)*w)` of its word.
    pub fn pack_slot(
        &self,
        select: usize,
        a_vals: &[u32],
        b_vals: &[u32],
        c_lanes: &[u32],
    ) -> Result<IssueSlot> {
        let m = self.mapper(select)?;
        if a_vals.len() != m.n_a || b_vals.len() != m.n_b || c_lanes.len() > self.max_lanes {
            return Err(Error::Contract(alloc::format!(
                "{} takes {} A, {} B and at most {} C values",
                m.dt,
                m.n_a,
                m.n_b,
                self.max_lanes
            )));
        }
        let word = |vals: &[u32], fmt: NumFormat| -> Result<u64> {
            let w = fmt.width();
            let mut word = 0u64;
            for (i, &v) in vals.iter().enumerate() {
                fmt.decode(v)?;
                word |= (v as u64) << (i as u32 * w);
            }
            Ok(word)
        };
        for &c in c_lanes {
            m.dt.c().decode(c)?;
        }
        let mut c = [0u32; MAX_LANES];
        c[..c_lanes.len()].copy_from_slice(c_lanes);
        Ok(IssueSlot {
            dtype_select: select,
            a_word: word(a_vals, m.dt.a())?,
            b_word: word(b_vals, m.dt.b())?,
            c_lanes: c,
        })
    }

    /// Raw `(a, b)` patterns multiplied in `lane` of `slot`.
    pub fn lane_operands(&self, slot: &IssueSlot, lane: usize) -> Result<(u32, u32)> {
        let m = self.mapper(slot.dtype_select)?;
        if lane >= m.lanes {
            return Err(Error::Contract(alloc::format!(
                "{} has {} lanes, asked for lane {lane}",
                m.dt,
                m.lanes
            )));
        }
        let (i, j) = m.lane_ops[lane];
        Ok((
            field(slot.a_word, i, m.dt.a().width()),
            field(slot.b_word, j, m.dt.b().width()),
        ))
    }

    /// Reference lane results for a slot, computed by the oracle.
    pub fn reference_lanes(&self, slot: &IssueSlot) -> Result<Vec<u32>> {
        let m = self.mapper(slot.dtype_select)?;
        (0..m.lanes)
            .map(|k| {
                let (a, b) = self.lane_operands(slot, k)?;
                crate::oracle::oracle_mac(a, b, slot.c_lanes[k], &m.dt)
            })
            .collect()
    }
}

fn field(word: u64, index: usize, width: u32) -> u32 {
    ((word >> (index as u32 * width)) & ((1u64 << width) - 1)) as u32
}

/// One cycle's input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IssueSlot {
    pub dtype_select: usize,
    /// Packed A-side operands, little-endian by operand index.
    pub a_word: u64,
    pub b_word: u64,
    /// Accumulator operand per lane; lanes beyond the plan are ignored.
    pub c_lanes: [u32; MAX_LANES],
}

/// Status of one decoded operand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SpecialFlags {
    pub nan: bool,
    pub inf: bool,
    pub zero: bool,
    pub negative: bool,
}

/// Unbiased exponent and significand (implicit one included) with flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Operand {
    flags: SpecialFlags,
    exponent: i32,
    mantissa: u64,
}

/// Field extraction with DAZ. Integers carry exponent 0.
fn unpack(fmt: &NumFormat, bits: u32) -> Operand {
    match fmt {
        NumFormat::Int(i) => {
            let w = i.bits();
            let v = (((bits as u64) << (64 - w)) as i64) >> (64 - w);
            Operand {
                flags: SpecialFlags {
                    zero: v == 0,
                    negative: v < 0,
                    ..SpecialFlags::default()
                },
                exponent: 0,
                mantissa: v.unsigned_abs(),
            }
        }
        NumFormat::Float(f) => unpack_float(f, bits),
    }
}

fn unpack_float(f: &FloatFormat, bits: u32) -> Operand {
    let mb = f.mant_bits();
    let eb = f.exp_bits();
    let negative = (bits >> (mb + eb)) & 1 == 1;
    let e = (bits >> mb) & ((1 << eb) - 1);
    let m = (bits & ((1 << mb) - 1)) as u64;
    let mut flags = SpecialFlags {
        negative,
        ..SpecialFlags::default()
    };
    if e == 0 {
        flags.zero = true;
    } else if e == (1 << eb) - 1 && f.all_ones_exp_is_special() {
        if m == 0 && f.encodes_infinity() {
            flags.inf = true;
        } else {
            flags.nan = true;
        }
    } else {
        return Operand {
            flags,
            exponent: e as i32 - f.bias(),
            mantissa: m | (1 << mb),
        };
    }
    Operand {
        flags,
        exponent: 0,
        mantissa: 0,
    }
}

/// In-flight bookkeeping that travels with every stage register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Tag {
    serial: u64,
    select: usize,
    issue_cycle: u64,
}

#[derive(Debug, Clone)]
struct Stage1 {
    tag: Tag,
    ports: DspPorts,
    a: [Operand; MAX_LANES],
    b: [Operand; MAX_LANES],
}

/// A product in accumulator form: either a signed integer or a float with
/// `precision(acc)` significand bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Product {
    flags: SpecialFlags,
    exponent: i32,
    mantissa: u64,
    int: i64,
}

#[derive(Debug, Clone)]
struct Stage2 {
    tag: Tag,
    lanes: [Product; MAX_LANES],
}

/// Finite part of an FP sum; specials are resolved in stage 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct FpSum {
    negative: bool,
    zero: bool,
    overflow: bool,
    exponent: i32,
    mantissa: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Accumulated {
    product: SpecialFlags,
    c: SpecialFlags,
    fp: FpSum,
    int: i32,
}

#[derive(Debug, Clone)]
struct Stage3 {
    tag: Tag,
    lanes: [Accumulated; MAX_LANES],
}

/// A completed result leaving stage 4.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MacOutput {
    pub serial: u64,
    pub dtype_select: usize,
    pub issue_cycle: u64,
    /// Cycle on which the result left the pipeline.
    pub cycle: u64,
    pub lanes: usize,
    pub lane_bits: [u32; MAX_LANES],
    pub word: u128,
    /// Lanes whose result is NaN / infinite.
    pub nan_lanes: u8,
    pub inf_lanes: u8,
}

impl MacOutput {
    pub fn lane_values(&self) -> &[u32] {
        &self.lane_bits[..self.lanes]
    }
}

#[derive(Debug, Clone, Copy)]
struct CEntry {
    serial: u64,
    c_lanes: [u32; MAX_LANES],
}

/// One line of the per-cycle trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub cycle: u64,
    /// Whether the register at the end of each stage holds a valid entry.
    pub occupancy: [bool; 4],
    pub issued: Option<String>,
    pub completed: Option<(u64, String)>,
    pub nan_lanes: u8,
    pub inf_lanes: u8,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let occ: String = self
            .occupancy
            .iter()
            .map(|&o| if o { '1' } else { '0' })
            .collect();
        write!(f, "cycle={} occ={} issue=", self.cycle, occ)?;
        match &self.issued {
            Some(id) => write!(f, "{id}")?,
            None => f.write_str("-")?,
        }
        f.write_str(" out=")?;
        match &self.completed {
            Some((serial, id)) => write!(f, "#{serial}:{id}")?,
            None => f.write_str("-")?,
        }
        write!(f, " flags=nan:{},inf:{}", self.nan_lanes, self.inf_lanes)
    }
}

/// A single pipeline instance.
#[derive(Debug, Clone)]
pub struct Pipeline {
    cfg: Arc<MacConfig>,
    line1: VecDeque<Option<Stage1>>,
    line2: VecDeque<Option<Stage2>>,
    line3: VecDeque<Option<Stage3>>,
    line4: VecDeque<Option<MacOutput>>,
    c_line: VecDeque<Option<CEntry>>,
    cycle: u64,
    next_serial: u64,
    trace: Option<Vec<TraceEvent>>,
}

fn delay_line<T>(depth: usize) -> VecDeque<Option<T>> {
    let mut line = VecDeque::with_capacity(depth + 1);
    line.extend((0..depth).map(|_| None));
    line
}

impl Pipeline {
    pub fn new(cfg: impl Into<Arc<MacConfig>>) -> Pipeline {
        let cfg = cfg.into();
        let [d1, d2, d3, d4] = cfg.stage_depths;
        Pipeline {
            line1: delay_line(d1),
            line2: delay_line(d2),
            line3: delay_line(d3),
            line4: delay_line(d4),
            c_line: delay_line(d1 + d2),
            cfg,
            cycle: 0,
            next_serial: 0,
            trace: None,
        }
    }

    pub fn config(&self) -> &MacConfig {
        &self.cfg
    }

    pub fn latency(&self) -> usize {
        self.cfg.latency()
    }

    /// Cycles stepped so far.
    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    /// Starts recording one [`TraceEvent`] per cycle.
    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        self.trace.as_mut().map(core::mem::take).unwrap_or_default()
    }

    /// Advances one cycle. `None` issues a bubble.
    ///
    /// The returned output, if any, belongs to the slot issued exactly
    /// `latency()` cycles earlier.
    pub fn step(&mut self, slot: Option<&IssueSlot>) -> Result<Option<MacOutput>> {
        if let Some(s) = slot {
            self.cfg.mapper(s.dtype_select)?;
        }
        let cycle = self.cycle;
        let cfg = Arc::clone(&self.cfg);

        let done = self.line4.pop_front().flatten().map(|mut out| {
            out.cycle = cycle;
            out
        });
        let s3 = self.line3.pop_front().flatten();
        self.line4.push_back(s3.map(|s| stage4(&cfg, &s)));
        let s2 = self.line2.pop_front().flatten();
        let c = self.c_line.pop_front().flatten();
        let s3_next = match (s2, c) {
            (Some(s2), Some(c)) => {
                debug_assert_eq!(c.serial, s2.tag.serial, "C operand out of step");
                Some(stage3(&cfg, &s2, &c.c_lanes))
            }
            (None, None) => None,
            _ => unreachable!("C delay line out of step with stages 1-2"),
        };
        self.line3.push_back(s3_next);
        let s1 = self.line1.pop_front().flatten();
        self.line2.push_back(s1.map(|s| stage2(&cfg, &s)));

        let entry = slot.map(|s| {
            let tag = Tag {
                serial: self.next_serial,
                select: s.dtype_select,
                issue_cycle: cycle,
            };
            self.next_serial += 1;
            (tag, s)
        });
        self.c_line.push_back(entry.map(|(tag, s)| CEntry {
            serial: tag.serial,
            c_lanes: s.c_lanes,
        }));
        self.line1.push_back(entry.map(|(tag, s)| stage1(&cfg, tag, s)));

        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceEvent {
                cycle,
                occupancy: [
                    self.line1.iter().any(Option::is_some),
                    self.line2.iter().any(Option::is_some),
                    self.line3.iter().any(Option::is_some),
                    self.line4.iter().any(Option::is_some),
                ],
                issued: slot.map(|s| cfg.datatype(s.dtype_select).id()),
                completed: done.map(|o| (o.serial, cfg.datatype(o.dtype_select).id())),
                nan_lanes: done.map_or(0, |o| o.nan_lanes),
                inf_lanes: done.map_or(0, |o| o.inf_lanes),
            });
        }
        self.cycle += 1;
        Ok(done)
    }

    /// Issues bubbles until every in-flight slot has completed.
    pub fn drain(&mut self) -> Vec<MacOutput> {
        let mut out = Vec::new();
        for _ in 0..self.latency() {
            if let Some(o) = self.step(None).expect("bubbles are always valid") {
                out.push(o);
            }
        }
        out
    }

    /// Issues every slot back to back, then drains.
    pub fn run(&mut self, slots: &[IssueSlot]) -> Result<Vec<MacOutput>> {
        let mut out = Vec::with_capacity(slots.len());
        for s in slots {
            if let Some(o) = self.step(Some(s))? {
                out.push(o);
            }
        }
        out.extend(self.drain());
        Ok(out)
    }
}

fn map_operands(m: &Mapper, slot: &IssueSlot) -> Stage1 {
    let mut a = [Operand::default(); MAX_LANES];
    let mut b = [Operand::default(); MAX_LANES];
    let fa = m.dt.a();
    let fb = m.dt.b();
    for (i, op) in a.iter_mut().enumerate().take(m.n_a) {
        *op = unpack(&fa, field(slot.a_word, i, fa.width()));
    }
    for (j, op) in b.iter_mut().enumerate().take(m.n_b) {
        *op = unpack(&fb, field(slot.b_word, j, fb.width()));
    }
    let a_mags: [u64; MAX_LANES] = core::array::from_fn(|i| a[i].mantissa);
    let b_mags: [u64; MAX_LANES] = core::array::from_fn(|j| b[j].mantissa);
    let ports = packing::pack(&m.plan, &a_mags[..m.n_a], &b_mags[..m.n_b])
        .expect("unpacked magnitudes always fit their plan");
    Stage1 {
        tag: Tag {
            serial: 0,
            select: 0,
            issue_cycle: 0,
        },
        ports,
        a,
        b,
    }
}

fn stage1(cfg: &MacConfig, tag: Tag, slot: &IssueSlot) -> Stage1 {
    let mut selected = None;
    for (k, m) in cfg.mappers.iter().enumerate() {
        if k == tag.select {
            selected = Some(map_operands(m, slot));
        } else if cfg.mode == EvalMode::Faithful {
            // Unselected mappers see the same port words; their output is
            // discarded by the datatype multiplexer.
            let _ = core::hint::black_box(map_operands(m, slot));
        }
    }
    let mut s = selected.expect("select validated at issue");
    s.tag = tag;
    s
}

/// Rounds a significand whose leading one is at bit `msb` to `precision`
/// bits (RN-even). Returns the rounded significand and the exponent carry.
fn round_significand(m: u64, msb: u32, precision: u32) -> (u64, i32) {
    if msb < precision {
        return (m << (precision - 1 - msb), 0);
    }
    let shift = msb + 1 - precision;
    let kept = m >> shift;
    let rem = m & ((1u64 << shift) - 1);
    let half = 1u64 << (shift - 1);
    let up = rem > half || (rem == half && kept & 1 == 1);
    let r = kept + up as u64;
    if r >> precision != 0 {
        (r >> 1, 1)
    } else {
        (r, 0)
    }
}

/// Replaces encodings the accumulator format lacks, as its encoder would.
fn settle(acc: &FloatFormat, p: &mut Product) {
    if p.flags.inf && !acc.encodes_infinity() {
        p.flags.inf = false;
        if acc.canonical_nan().is_some() {
            p.flags.nan = true;
        } else {
            saturate(acc, p, p.flags.negative);
        }
    }
    if p.flags.nan && acc.canonical_nan().is_none() {
        p.flags.nan = false;
        saturate(acc, p, false);
    }
}

fn saturate(acc: &FloatFormat, p: &mut Product, negative: bool) {
    p.flags.negative = negative;
    p.flags.zero = false;
    p.exponent = acc.max_exponent();
    p.mantissa = (1u64 << acc.precision()) - 1;
}

fn multiply_lane(m: &Mapper, raw: u64, a: &Operand, b: &Operand) -> Product {
    let negative = a.flags.negative ^ b.flags.negative;
    let acc = match m.dt.p() {
        NumFormat::Int(_) => {
            let mag = raw as i64;
            return Product {
                flags: SpecialFlags {
                    zero: raw == 0,
                    negative,
                    ..SpecialFlags::default()
                },
                int: if negative { -mag } else { mag },
                ..Product::default()
            };
        }
        NumFormat::Float(f) => f,
    };
    let nan = a.flags.nan
        || b.flags.nan
        || (a.flags.inf && b.flags.zero)
        || (a.flags.zero && b.flags.inf);
    let inf = !nan && (a.flags.inf || b.flags.inf);
    let mut p = Product {
        flags: SpecialFlags {
            nan,
            inf,
            zero: !nan && !inf && raw == 0,
            negative,
        },
        ..Product::default()
    };
    if !nan && !inf && raw != 0 {
        // LZC normalization inside the double-width frame.
        let frame = m.dt.a().magnitude_bits() + m.dt.b().magnitude_bits();
        let lzc = (raw << (64 - frame)).leading_zeros();
        let norm = raw << lzc;
        let frac = (m.dt.a().frac_bits() + m.dt.b().frac_bits()) as i32;
        let exponent = a.exponent + b.exponent - frac + (frame as i32 - 1) - lzc as i32;
        let (mantissa, carry) = round_significand(norm, frame - 1, acc.precision());
        let exponent = exponent + carry;
        if exponent < acc.min_exponent() {
            p.flags.zero = true;
        } else if exponent > acc.max_exponent() {
            p.flags.inf = true;
        } else {
            p.exponent = exponent;
            p.mantissa = mantissa;
        }
    }
    settle(&acc, &mut p);
    p
}

fn stage2(cfg: &MacConfig, s: &Stage1) -> Stage2 {
    let m = &cfg.mappers[s.tag.select];
    let raw = packing::extract(&m.plan, wide_mul(s.ports));
    let mut lanes = [Product::default(); MAX_LANES];
    for (k, lane) in lanes.iter_mut().enumerate().take(m.lanes) {
        let (i, j) = m.lane_ops[k];
        *lane = multiply_lane(m, raw[k], &s.a[i], &s.b[j]);
    }
    for lane in lanes.iter_mut().skip(m.lanes) {
        lane.flags.zero = true;
    }
    Stage2 { tag: s.tag, lanes }
}

/// Finite FP addition with guard/round/sticky alignment. Special operands
/// must already be excluded; zero operands are flagged.
fn fp_add(acc: &FloatFormat, x: &Operand, y: &Operand) -> FpSum {
    let p = acc.precision();
    let finite = |o: &Operand| !o.flags.zero && !o.flags.nan && !o.flags.inf;
    match (finite(x), finite(y)) {
        (false, false) => {
            return FpSum {
                negative: x.flags.negative && y.flags.negative,
                zero: true,
                ..FpSum::default()
            }
        }
        (false, true) => return as_sum(y),
        (true, false) => return as_sum(x),
        (true, true) => {}
    }
    let (big, small) = if (x.exponent, x.mantissa) >= (y.exponent, y.mantissa) {
        (x, y)
    } else {
        (y, x)
    };
    let shift = ((big.exponent - small.exponent) as u32).min(p + GRS_BITS);
    let mb = big.mantissa << GRS_BITS;
    let ms = small.mantissa << GRS_BITS;
    let ms = if shift == 0 {
        ms
    } else {
        (ms >> shift) | ((ms & ((1u64 << shift) - 1)) != 0) as u64
    };
    let mut e = big.exponent;
    let top = p + GRS_BITS - 1;
    let sum = if big.flags.negative == small.flags.negative {
        let s = mb + ms;
        if s >> (top + 1) != 0 {
            e += 1;
            (s >> 1) | (s & 1)
        } else {
            s
        }
    } else {
        let d = mb - ms;
        if d == 0 {
            return FpSum {
                zero: true,
                ..FpSum::default()
            };
        }
        let msb = 63 - d.leading_zeros();
        e -= (top - msb) as i32;
        d << (top - msb)
    };
    let (mantissa, carry) = round_significand(sum, top, p);
    e += carry;
    let negative = big.flags.negative;
    if e < acc.min_exponent() {
        FpSum {
            negative,
            zero: true,
            ..FpSum::default()
        }
    } else if e > acc.max_exponent() {
        FpSum {
            negative,
            overflow: true,
            ..FpSum::default()
        }
    } else {
        FpSum {
            negative,
            zero: false,
            overflow: false,
            exponent: e,
            mantissa,
        }
    }
}

fn as_sum(o: &Operand) -> FpSum {
    FpSum {
        negative: o.flags.negative,
        zero: false,
        overflow: false,
        exponent: o.exponent,
        mantissa: o.mantissa,
    }
}

fn int_add(product: i64, c_bits: u32) -> i32 {
    let c = c_bits as i32 as i64;
    (product + c).clamp(i32::MIN as i64, i32::MAX as i64) as i32
}

fn stage3(cfg: &MacConfig, s: &Stage2, c_lanes: &[u32; MAX_LANES]) -> Stage3 {
    let m = &cfg.mappers[s.tag.select];
    let acc_float = m.dt.acc_float();
    let fp_fmt = acc_float.unwrap_or(FloatFormat::BF16);
    let both = cfg.mode == EvalMode::Faithful;
    let mut lanes = [Accumulated::default(); MAX_LANES];
    for k in 0..m.lanes {
        let p = &s.lanes[k];
        let lane = &mut lanes[k];
        lane.product = p.flags;
        if acc_float.is_some() || both {
            let c = if acc_float.is_some() {
                unpack_float(&fp_fmt, c_lanes[k])
            } else {
                Operand::default()
            };
            let x = Operand {
                flags: p.flags,
                exponent: p.exponent,
                mantissa: p.mantissa,
            };
            lane.c = c.flags;
            lane.fp = fp_add(&fp_fmt, &x, &c);
        }
        if acc_float.is_none() || both {
            let c = if acc_float.is_none() { c_lanes[k] } else { 0 };
            lane.int = int_add(if acc_float.is_none() { p.int } else { 0 }, c);
        }
    }
    Stage3 { tag: s.tag, lanes }
}

fn resolve(acc: &FloatFormat, lane: &Accumulated) -> (u32, bool, bool) {
    let p = &lane.product;
    let c = &lane.c;
    let nan = p.nan || c.nan || (p.inf && c.inf && p.negative != c.negative);
    if nan {
        return (acc.nan_pattern(), true, false);
    }
    if p.inf || c.inf {
        let negative = if p.inf { p.negative } else { c.negative };
        return (acc.overflow_pattern(negative), false, true);
    }
    let s = &lane.fp;
    if s.overflow {
        let bits = acc.overflow_pattern(s.negative);
        return (bits, acc.canonical_nan() == Some(bits), acc.infinity(s.negative) == Some(bits));
    }
    let sign = (s.negative as u32) << (acc.width() - 1);
    if s.zero {
        return (sign, false, false);
    }
    let exp_field = (s.exponent + acc.bias()) as u32;
    let mant_field = (s.mantissa & ((1u64 << acc.mant_bits()) - 1)) as u32;
    (sign | (exp_field << acc.mant_bits()) | mant_field, false, false)
}

fn stage4(cfg: &MacConfig, s: &Stage3) -> MacOutput {
    let m = &cfg.mappers[s.tag.select];
    let mut lane_bits = [0u32; MAX_LANES];
    let mut nan_lanes = 0;
    let mut inf_lanes = 0;
    let acc = m.dt.p();
    for (out, lane) in lane_bits.iter_mut().zip(&s.lanes).take(m.lanes) {
        *out = match acc {
            NumFormat::Int(i) => i.from_i64(lane.int as i64),
            NumFormat::Float(f) => {
                let (bits, nan, inf) = resolve(&f, lane);
                nan_lanes += nan as u8;
                inf_lanes += inf as u8;
                bits
            }
        };
    }
    MacOutput {
        serial: s.tag.serial,
        dtype_select: s.tag.select,
        issue_cycle: s.tag.issue_cycle,
        cycle: 0,
        lanes: m.lanes,
        lane_bits,
        word: assemble_output(&lane_bits[..m.lanes], &acc),
        nan_lanes,
        inf_lanes,
    }
}

/// Concatenates lane results, lane 0 in the least significant bits.
pub fn assemble_output(lanes: &[u32], acc: &NumFormat) -> u128 {
    let w = acc.width();
    lanes
        .iter()
        .enumerate()
        .fold(0u128, |word, (k, &v)| word | ((v as u128) << (k as u32 * w)))
}

/// Inverse of [`assemble_output`].
pub fn split_output(word: u128, acc: &NumFormat, lanes: usize) -> Vec<u32> {
    let w = acc.width();
    let mask = (1u128 << w) - 1;
    (0..lanes)
        .map(|k| ((word >> (k as u32 * w)) & mask) as u32)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::FormatRegistry;
    use crate::oracle::oracle_mac;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dt(id: &str) -> MacDatatype {
        MacDatatype::parse(id, &FormatRegistry::default()).unwrap()
    }

    fn single(id: &str) -> MacConfig {
        MacConfig::new(&[dt(id)]).unwrap()
    }

    fn run_one(cfg: MacConfig, slot: IssueSlot) -> MacOutput {
        let mut p = Pipeline::new(cfg);
        let out = p.run(&[slot]).unwrap();
        assert_eq!(out.len(), 1);
        out[0]
    }

    #[test]
    fn assemble_examples() {
        let bf16 = dt("bf16xbf16").p();
        assert_eq!(assemble_output(&[0x3F80, 0x4000], &bf16), 0x4000_3F80);
        assert_eq!(assemble_output(&[0, 0], &bf16), 0);
        let int32 = dt("int8xint8").p();
        assert_eq!(assemble_output(&[0xDEAD_BEEF], &int32), 0xDEAD_BEEF);
        assert_eq!(split_output(0x4000_3F80, &bf16, 2), vec![0x3F80, 0x4000]);
    }

    #[test]
    fn stage1_maps_bf16_ones() {
        let cfg = single("bf16xbf16");
        let slot = cfg.pack_slot(0, &[0x3F80, 0x3F80], &[0x3F80], &[]).unwrap();
        let s = map_operands(&cfg.mappers[0], &slot);
        assert_eq!((s.a[0].mantissa, s.a[0].exponent), (0x80, 0));
        assert_eq!(s.ports.a(), 0x80 | (0x80 << 17));
        assert_eq!(s.ports.b(), 0x80);
        assert!(!s.a[0].flags.negative && !s.b[0].flags.negative);
    }

    #[test]
    fn stage1_int_operand_has_zero_exponent() {
        let cfg = single("int4xbf16");
        let slot = cfg.pack_slot(0, &[0x8, 0x1], &[0x3F80], &[]).unwrap();
        let s = map_operands(&cfg.mappers[0], &slot);
        assert_eq!(s.a[0].mantissa, 8);
        assert!(s.a[0].flags.negative);
        assert_eq!(s.a[0].exponent, 0);
    }

    #[test]
    fn stage1_nan_packs_zero() {
        let cfg = single("bf16xbf16");
        let slot = cfg.pack_slot(0, &[0x7FC1, 0x3F80], &[0x3F80], &[]).unwrap();
        let s = map_operands(&cfg.mappers[0], &slot);
        assert!(s.a[0].flags.nan);
        assert_eq!(s.ports.a() & 0xFF, 0);
    }

    #[test]
    fn round_significand_ties() {
        assert_eq!(round_significand(0b1001, 3, 3), (0b100, 0));
        assert_eq!(round_significand(0b1011, 3, 3), (0b110, 0));
        assert_eq!(round_significand(0b1111, 3, 3), (0b100, 1));
        assert_eq!(round_significand(0b11, 1, 4), (0b1100, 0));
    }

    #[test]
    fn stage2_examples() {
        let cfg = single("bf16xbf16");
        // 1.5 * 1.5 = 2.25
        let slot = cfg.pack_slot(0, &[0x3FC0, 0], &[0x3FC0], &[]).unwrap();
        let s2 = stage2(&cfg, &stage1(&cfg, Tag { serial: 0, select: 0, issue_cycle: 0 }, &slot));
        assert_eq!((s2.lanes[0].exponent, s2.lanes[0].mantissa), (1, 0x90));
        assert!(s2.lanes[1].flags.zero);

        let cfg = single("int8xint8");
        let slot = cfg.pack_slot(0, &[0x7F, 0], &[0x80], &[]).unwrap();
        let s2 = stage2(&cfg, &stage1(&cfg, Tag { serial: 0, select: 0, issue_cycle: 0 }, &slot));
        assert_eq!(s2.lanes[0].int, -16256);
    }

    #[test]
    fn stage3_examples() {
        let cfg = single("int8xint8");
        let slot = cfg.pack_slot(0, &[1, 0], &[5], &[0x7FFF_FFFF, 7]).unwrap();
        assert_eq!(run_one(cfg, slot).lane_values(), &[0x7FFF_FFFF, 7]);

        // 1.0 + 2^-8 * 1.5: alignment by 8 with sticky bits.
        let cfg = single("bf16xbf16");
        let slot = cfg
            .pack_slot(0, &[0x3BC0, 0x3F80], &[0x3F80], &[0x3F80, 0x0000])
            .unwrap();
        let expect = oracle_mac(0x3BC0, 0x3F80, 0x3F80, &dt("bf16xbf16")).unwrap();
        let out = run_one(cfg, slot);
        assert_eq!(out.lane_values(), &[expect, 0x3F80]);
    }

    #[test]
    fn latency_is_sum_of_depths() {
        let cfg = single("bf16xbf16");
        let slot = cfg.pack_slot(0, &[0x3F80, 0x4000], &[0x3F80], &[0, 0]).unwrap();
        let mut p = Pipeline::new(cfg.clone());
        for t in 0..4 {
            assert!(p.step(if t == 0 { Some(&slot) } else { None }).unwrap().is_none());
        }
        let out = p.step(None).unwrap().unwrap();
        assert_eq!((out.issue_cycle, out.cycle), (0, 4));
        assert_eq!(out.word, 0x4000_3F80);

        let deep = cfg.with_stage_depths([2, 1, 3, 1]).unwrap();
        let mut p = Pipeline::new(deep);
        let out = p.run(&[slot]).unwrap();
        assert_eq!(out[0].cycle, 7);
        assert_eq!(out[0].word, 0x4000_3F80);
    }

    #[test]
    fn zero_depth_rejected() {
        assert!(single("bf16xbf16").with_stage_depths([1, 0, 1, 1]).is_err());
    }

    #[test]
    fn bad_select_is_a_contract_error() {
        let cfg = single("bf16xbf16");
        let mut slot = cfg.pack_slot(0, &[0, 0], &[0], &[]).unwrap();
        slot.dtype_select = 3;
        assert!(Pipeline::new(cfg).step(Some(&slot)).is_err());
    }

    #[test]
    fn mixed_stream_matches_oracle_in_both_modes() {
        let ids = ["int4xbf16", "bf16xbf16", "fp8xfp8", "int8xint8", "fp4xfp16"];
        let dts: Vec<_> = ids.iter().map(|id| dt(id)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for mode in [EvalMode::Faithful, EvalMode::Fast] {
            let cfg = MacConfig::new(&dts).unwrap().with_mode(mode);
            let slots: Vec<IssueSlot> = (0..600)
                .map(|_| {
                    let sel = rng.gen_range(0..dts.len());
                    let d = cfg.datatype(sel);
                    let plan = cfg.plan(sel);
                    let mut draw = |f: NumFormat| {
                        let w = f.width();
                        (rng.gen::<u64>() & ((1u64 << w) - 1)) as u32
                    };
                    let a: Vec<u32> = plan.a_offsets().iter().map(|_| draw(d.a())).collect();
                    let b: Vec<u32> = plan.b_offsets().iter().map(|_| draw(d.b())).collect();
                    let c: Vec<u32> = (0..plan.lanes()).map(|_| draw(d.c())).collect();
                    cfg.pack_slot(sel, &a, &b, &c).unwrap()
                })
                .collect();
            let mut p = Pipeline::new(cfg.clone());
            let outs = p.run(&slots).unwrap();
            assert_eq!(outs.len(), slots.len());
            for (n, (slot, out)) in slots.iter().zip(&outs).enumerate() {
                assert_eq!(out.serial, n as u64);
                assert_eq!(out.dtype_select, slot.dtype_select);
                assert_eq!(out.cycle - out.issue_cycle, 4);
                assert_eq!(out.lane_values(), cfg.reference_lanes(slot).unwrap().as_slice());
            }
        }
    }

    #[test]
    fn trace_lines() {
        let cfg = single("bf16xbf16");
        let slot = cfg.pack_slot(0, &[0x7F80, 0], &[0x3F80], &[0, 0]).unwrap();
        let mut p = Pipeline::new(cfg);
        p.enable_trace();
        p.run(&[slot]).unwrap();
        let trace = p.take_trace();
        assert_eq!(trace.len(), 5);
        assert_eq!(
            alloc::format!("{}", trace[0]),
            "cycle=0 occ=1000 issue=bf16xbf16 out=- flags=nan:0,inf:0"
        );
        assert_eq!(
            alloc::format!("{}", trace[4]),
            "cycle=4 occ=0000 issue=- out=#0:bf16xbf16 flags=nan:0,inf:1"
        );
    }
}
