//! Analytic DSP-utilization, compute-density and adder-cost models.

use alloc::string::String;
use alloc::vec::Vec;

use crate::datatype::MacDatatype;
use crate::dsp48::PRODUCT_BITS;
use crate::error::{Error, Result};
use crate::formats::NumFormat;
use crate::packing;

/// Multiplier-bit decomposition steps a temporal INT8 datapath spends on one
/// floating-point MAC.
pub const TEMPORAL_FP_MICRO_OPS: u32 = 4;
/// INT8 lanes a single DSP carries in the integer-only baselines.
pub const NATIVE_INT8_LANES: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Architecture {
    /// Packed lanes on a shared multiplier.
    XtraMac,
    /// Operands promoted to the widest format of the pair; one lane.
    Upcast,
    /// One datapath per datatype, only one active at a time.
    SpatialReplication,
    /// A single INT8 datapath reused over several cycles.
    TemporalSharing,
}

impl Architecture {
    pub const ALL: [Architecture; 4] = [
        Architecture::XtraMac,
        Architecture::Upcast,
        Architecture::SpatialReplication,
        Architecture::TemporalSharing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::XtraMac => "xtramac",
            Architecture::Upcast => "upcast",
            Architecture::SpatialReplication => "spatial",
            Architecture::TemporalSharing => "temporal",
        }
    }

    pub fn from_name(name: &str) -> Option<Architecture> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(name))
    }
}

/// Bits a multiplicand actually occupies in the multiplier: the full width of
/// an integer, the significand (with implicit one) of a float.
pub fn effective_width(f: &NumFormat) -> u32 {
    match f {
        NumFormat::Int(i) => i.bits(),
        NumFormat::Float(f) => f.precision(),
    }
}

/// `lanes * (w_a + w_b) / (45 * dsp_count)`.
pub fn utilization(lanes: u32, w_a: u32, w_b: u32, dsp_count: u32) -> f64 {
    if dsp_count == 0 {
        return 0.0;
    }
    (lanes * (w_a + w_b)) as f64 / (PRODUCT_BITS * dsp_count) as f64
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct UtilizationReport {
    pub architecture: Architecture,
    pub datatype: String,
    pub w_a: u32,
    pub w_b: u32,
    pub lanes: u32,
    pub dsp_count: u32,
    pub utilization: f64,
}

impl UtilizationReport {
    fn new(arch: Architecture, dt: &MacDatatype, lanes: u32, dsp_count: u32) -> Self {
        let w_a = effective_width(&dt.a());
        let w_b = effective_width(&dt.b());
        UtilizationReport {
            architecture: arch,
            datatype: dt.id(),
            w_a,
            w_b,
            lanes,
            dsp_count,
            utilization: utilization(lanes, w_a, w_b, dsp_count),
        }
    }

    pub fn percent(&self) -> f64 {
        self.utilization * 100.0
    }
}

/// Lanes a fixed single-datatype datapath gets out of one DSP.
fn native_lanes(dt: &MacDatatype) -> u32 {
    let small_int = |f: &NumFormat| matches!(f, NumFormat::Int(i) if i.bits() <= 8);
    if small_int(&dt.a()) && small_int(&dt.b()) {
        NATIVE_INT8_LANES
    } else {
        1
    }
}

/// DSPs one promoted multiply occupies (ceil over both port widths).
fn upcast_dsps(dt: &MacDatatype) -> u32 {
    let w = effective_width(&dt.a()).max(effective_width(&dt.b()));
    let over = |port: u32| w.div_ceil(port).max(1);
    over(crate::dsp48::A_PORT_BITS) * over(crate::dsp48::B_PORT_BITS)
}

/// Utilization of `dt` running alone on `arch`.
///
/// Spatial replication needs the full datatype set; use
/// [`spatial_replication`] for it. Here it is treated as a set of one.
pub fn utilization_report(arch: Architecture, dt: &MacDatatype) -> Result<UtilizationReport> {
    Ok(match arch {
        Architecture::XtraMac => {
            let plan = packing::plan(dt, packing::DEFAULT_GUARD)?;
            UtilizationReport::new(arch, dt, plan.lanes() as u32, 1)
        }
        Architecture::Upcast => UtilizationReport::new(arch, dt, 1, upcast_dsps(dt)),
        Architecture::SpatialReplication => {
            UtilizationReport::new(arch, dt, native_lanes(dt), 1)
        }
        Architecture::TemporalSharing => {
            if dt.is_int_mac() {
                UtilizationReport::new(arch, dt, native_lanes(dt), 1)
            } else {
                UtilizationReport::new(arch, dt, 1, TEMPORAL_FP_MICRO_OPS)
            }
        }
    })
}

/// One report per active datatype; every replica's DSP is in the denominator.
pub fn spatial_replication(set: &[MacDatatype]) -> Vec<UtilizationReport> {
    let dsps = set.len() as u32;
    set.iter()
        .map(|dt| {
            UtilizationReport::new(Architecture::SpatialReplication, dt, native_lanes(dt), dsps)
        })
        .collect()
}

pub fn mean_utilization(reports: &[UtilizationReport]) -> f64 {
    if reports.is_empty() {
        return 0.0;
    }
    reports.iter().map(|r| r.utilization).sum::<f64>() / reports.len() as f64
}

/// Per-lane LUT/FF/DSP usage.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Resources {
    pub lut: f64,
    pub ff: f64,
    pub dsp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Density {
    pub lut: f64,
    pub ff: f64,
    pub dsp: f64,
}

impl Density {
    /// Ratios rounded to one decimal.
    pub fn rounded(&self) -> Density {
        Density {
            lut: round1(self.lut),
            ff: round1(self.ff),
            dsp: round1(self.dsp),
        }
    }
}

pub fn round1(x: f64) -> f64 {
    libm::round(x * 10.0) / 10.0
}

/// `baseline / xtramac` per resource class.
pub fn compute_density(baseline: &Resources, xtramac: &Resources) -> Result<Density> {
    if xtramac.lut <= 0.0 || xtramac.ff <= 0.0 || xtramac.dsp <= 0.0 {
        return Err(Error::Config(String::from(
            "compute density needs non-zero resource counts",
        )));
    }
    Ok(Density {
        lut: baseline.lut / xtramac.lut,
        ff: baseline.ff / xtramac.ff,
        dsp: baseline.dsp / xtramac.dsp,
    })
}

/// Per-lane synthesis results of the vendor floating-point operator and the
/// packed design for the mixed-precision configurations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResourceProfile {
    pub name: &'static str,
    pub baseline: Resources,
    pub xtramac: Resources,
    /// Density column as published, one decimal.
    pub density: [f64; 3],
}

const fn res(lut: f64, ff: f64, dsp: f64) -> Resources {
    Resources { lut, ff, dsp }
}

pub const RESOURCE_PROFILES: &[ResourceProfile] = &[
    ResourceProfile {
        name: "int2-8xbf16",
        baseline: res(331.0, 222.0, 1.0),
        xtramac: res(235.0, 124.0, 0.5),
        density: [1.4, 1.8, 2.0],
    },
    ResourceProfile {
        name: "int2-8xfp16",
        baseline: res(387.0, 262.0, 1.0),
        xtramac: res(270.0, 137.0, 0.5),
        density: [1.4, 1.9, 2.0],
    },
    ResourceProfile {
        name: "fp4xbf16",
        baseline: res(301.0, 226.0, 1.0),
        xtramac: res(196.0, 115.0, 0.5),
        density: [1.5, 2.0, 2.0],
    },
    ResourceProfile {
        name: "fp4xfp16",
        baseline: res(357.0, 266.0, 1.0),
        xtramac: res(251.0, 131.0, 0.5),
        density: [1.4, 2.0, 2.0],
    },
    ResourceProfile {
        name: "fp8xbf16",
        baseline: res(301.0, 226.0, 1.0),
        xtramac: res(219.0, 123.0, 0.5),
        density: [1.4, 1.8, 2.0],
    },
    ResourceProfile {
        name: "fp8xfp16",
        baseline: res(357.0, 266.0, 1.0),
        xtramac: res(253.0, 133.0, 0.5),
        density: [1.4, 2.0, 2.0],
    },
];

pub fn resource_profile(name: &str) -> Option<&'static ResourceProfile> {
    RESOURCE_PROFILES
        .iter()
        .find(|p| p.name.eq_ignore_ascii_case(name))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AdderKind {
    /// `alpha * w`
    Int,
    /// `beta * w * log2(w)`
    FpShifter,
}

impl AdderKind {
    pub fn from_name(name: &str) -> Option<AdderKind> {
        match name.to_ascii_lowercase().as_str() {
            "int" => Some(AdderKind::Int),
            "fp_shifter" | "fp-shifter" | "shifter" => Some(AdderKind::FpShifter),
            _ => None,
        }
    }
}

pub fn adder_cost(kind: AdderKind, width: u32, coefficient: f64) -> Result<f64> {
    if width < 2 || coefficient <= 0.0 || !coefficient.is_finite() {
        return Err(Error::Config(alloc::format!(
            "adder cost needs width >= 2 and a positive coefficient (got {width}, {coefficient})"
        )));
    }
    let w = width as f64;
    Ok(match kind {
        AdderKind::Int => coefficient * w,
        AdderKind::FpShifter => coefficient * w * libm::log2(w),
    })
}
