//! Line-oriented test-vector files.
//!
//! ```text
//! #xtramac-vectors v1
//! # comment
//! <datatype-id> <a-hex> <b-hex> <c-hex> <p-hex>
//! ```
//!
//! Hex fields are lowercase and padded to the format width.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;
use xtramac_core::oracle::oracle_mac;
use xtramac_core::pipeline::{MacConfig, Pipeline};
use xtramac_core::{FormatRegistry, MacDatatype, NumFormat};

use crate::sample;

pub const HEADER: &str = "#xtramac-vectors v1";
/// Operand pairs above this count are refused for exhaustive generation.
pub const EXHAUSTIVE_PAIR_LIMIT: u64 = 1 << 16;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Record {
    pub dtype: MacDatatype,
    pub a: u32,
    pub b: u32,
    pub c: u32,
    pub p: u32,
    /// 1-based source line; 0 for generated records.
    pub line: usize,
}

pub fn hex_digits(fmt: &NumFormat) -> usize {
    fmt.width().div_ceil(4) as usize
}

fn hex(v: u32, fmt: &NumFormat) -> String {
    format!("{v:0width$x}", width = hex_digits(fmt))
}

pub fn write(records: &[Record], comments: &[String]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for c in comments {
        let _ = writeln!(out, "# {c}");
    }
    for r in records {
        let d = &r.dtype;
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            d.id(),
            hex(r.a, &d.a()),
            hex(r.b, &d.b()),
            hex(r.c, &d.c()),
            hex(r.p, &d.p())
        );
    }
    out
}

pub fn parse(text: &str, registry: &FormatRegistry) -> Result<Vec<Record>, ParseError> {
    let err = |line: usize, message: String| ParseError { line, message };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, HEADER)) => {}
        Some((n, other)) => return Err(err(n, format!("expected `{HEADER}`, found `{other}`"))),
        // An empty file holds no vectors.
        None => return Ok(Vec::new()),
    }
    let mut cache: HashMap<String, MacDatatype> = HashMap::new();
    let mut records = Vec::new();
    for (n, line) in lines {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [id, a, b, c, p] = fields[..] else {
            return Err(err(n, format!("expected 5 fields, found {}", fields.len())));
        };
        let dtype = match cache.get(id) {
            Some(d) => *d,
            None => {
                let d = MacDatatype::parse(id, registry).map_err(|e| err(n, e.to_string()))?;
                cache.insert(id.to_string(), d);
                d
            }
        };
        let field = |text: &str, fmt: NumFormat, name: &str| -> Result<u32, ParseError> {
            let want = hex_digits(&fmt);
            let lower = text.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
            if text.len() != want || !lower {
                return Err(err(
                    n,
                    format!("{name} `{text}` must be {want} lowercase hex digits for {}", fmt.name()),
                ));
            }
            let v = u32::from_str_radix(text, 16).map_err(|e| err(n, e.to_string()))?;
            fmt.decode(v).map_err(|e| err(n, format!("{name}: {e}")))?;
            Ok(v)
        };
        records.push(Record {
            a: field(a, dtype.a(), "a")?,
            b: field(b, dtype.b(), "b")?,
            c: field(c, dtype.c(), "c")?,
            p: field(p, dtype.p(), "p")?,
            dtype,
            line: n,
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenMode {
    Random { count: u64 },
    /// Every operand pair, each with `c_per_pair` sampled accumulators.
    Exhaustive { c_per_pair: u32 },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GenError {
    #[error(
        "{dtype} has {pairs} operand pairs ({records} records, about {mib} MiB); \
         exhaustive generation is limited to operands of at most 8 bits"
    )]
    TooLarge {
        dtype: String,
        pairs: u64,
        records: u64,
        mib: u64,
    },
}

pub fn generate(dt: &MacDatatype, mode: GenMode, seed: u64) -> Result<Vec<Record>, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let record = |a: u32, b: u32, rng: &mut ChaCha8Rng| {
        let c = sample::accumulator(rng, dt, a, b);
        Record {
            dtype: *dt,
            a,
            b,
            c,
            p: oracle_mac(a, b, c, dt).expect("sampled operands are in range"),
            line: 0,
        }
    };
    match mode {
        GenMode::Random { count } => Ok((0..count)
            .map(|_| {
                let a = sample::operand(&mut rng, &dt.a());
                let b = sample::operand(&mut rng, &dt.b());
                record(a, b, &mut rng)
            })
            .collect()),
        GenMode::Exhaustive { c_per_pair } => {
            let pairs = 1u64 << (dt.a().width() + dt.b().width());
            if dt.a().width() > 8 || dt.b().width() > 8 {
                let records = pairs * c_per_pair as u64;
                let line = (dt.id().len() + 4 + 2 * 4 + 2 * 8) as u64;
                return Err(GenError::TooLarge {
                    dtype: dt.id(),
                    pairs,
                    records,
                    mib: (records * line) >> 20,
                });
            }
            let mut out = Vec::with_capacity((pairs * c_per_pair as u64) as usize);
            for a in 0..1u32 << dt.a().width() {
                for b in 0..1u32 << dt.b().width() {
                    for _ in 0..c_per_pair {
                        out.push(record(a, b, &mut rng));
                    }
                }
            }
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckMode {
    Pipeline,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Mismatch {
    pub line: usize,
    pub dtype: String,
    pub a: String,
    pub b: String,
    pub c: String,
    pub expected: String,
    pub actual: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CheckSummary {
    pub mode: CheckMode,
    pub vectors: usize,
    pub passed: usize,
    pub mismatches: usize,
    /// First mismatches in file order.
    pub diffs: Vec<Mismatch>,
}

pub const MAX_DIFFS: usize = 20;

impl CheckSummary {
    pub fn ok(&self) -> bool {
        self.mismatches == 0
    }
}

fn mismatch(r: &Record, actual: u32) -> Mismatch {
    let d = &r.dtype;
    Mismatch {
        line: r.line,
        dtype: d.id(),
        a: hex(r.a, &d.a()),
        b: hex(r.b, &d.b()),
        c: hex(r.c, &d.c()),
        expected: hex(r.p, &d.p()),
        actual: hex(actual, &d.p()),
    }
}

fn summarize(mode: CheckMode, records: &[Record], actual: &[u32]) -> CheckSummary {
    let bad: Vec<(&Record, u32)> = records
        .iter()
        .zip(actual)
        .filter(|(r, &p)| r.p != p)
        .map(|(r, &p)| (r, p))
        .collect();
    CheckSummary {
        mode,
        vectors: records.len(),
        passed: records.len() - bad.len(),
        mismatches: bad.len(),
        diffs: bad.iter().take(MAX_DIFFS).map(|(r, p)| mismatch(r, *p)).collect(),
    }
}

/// Distinct datatypes in first-appearance order.
pub fn datatypes(records: &[Record]) -> Vec<MacDatatype> {
    let mut out: Vec<MacDatatype> = Vec::new();
    for r in records {
        if !out.contains(&r.dtype) {
            out.push(r.dtype);
        }
    }
    out
}

pub fn check_oracle(records: &[Record]) -> anyhow::Result<CheckSummary> {
    let actual = records
        .iter()
        .map(|r| oracle_mac(r.a, r.b, r.c, &r.dtype))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize(CheckMode::Oracle, records, &actual))
}

/// Streams one record per cycle (lane 0, other lanes zero) through a single
/// pipeline instance, switching datatype as the file does.
pub fn check_pipeline(
    records: &[Record],
    cfg: MacConfig,
    trace: Option<&mut Vec<String>>,
) -> anyhow::Result<CheckSummary> {
    let mut pipe = Pipeline::new(cfg);
    if trace.is_some() {
        pipe.enable_trace();
    }
    let cfg = pipe.config().clone();
    let slots = records
        .iter()
        .map(|r| {
            let sel = cfg
                .select_of(&r.dtype)
                .ok_or_else(|| anyhow::anyhow!("{} is not configured", r.dtype))?;
            let plan = cfg.plan(sel);
            let mut a = vec![0u32; plan.a_offsets().len()];
            let mut b = vec![0u32; plan.b_offsets().len()];
            let (i, j) = plan.lane_map()[0];
            a[i] = r.a;
            b[j] = r.b;
            Ok(cfg.pack_slot(sel, &a, &b, &[r.c])?)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let outputs = pipe.run(&slots)?;
    let mut actual = vec![0u32; records.len()];
    for o in &outputs {
        actual[o.serial as usize] = o.lane_bits[0];
    }
    if let Some(t) = trace {
        t.extend(pipe.take_trace().iter().map(ToString::to_string));
    }
    Ok(summarize(CheckMode::Pipeline, records, &actual))
}
