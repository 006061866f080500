//! Machine-readable report bodies and their text renderings.

use std::fmt::Write as _;

use serde::Serialize;
use xtramac_core::analysis::{Density, ResourceProfile, UtilizationReport};
use xtramac_core::dsp48::{A_PORT_BITS, B_PORT_BITS, PRODUCT_BITS};
use xtramac_core::gemv::{Bound, DecodeReport, PerfReport};
use xtramac_core::packing::PackingPlan;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanReport {
    pub datatype: String,
    pub pattern: String,
    pub lanes: usize,
    pub guard: u32,
    pub lane_width: u32,
    pub stride: u32,
    pub width_a: u32,
    pub width_b: u32,
    pub a_offsets: Vec<u32>,
    pub b_offsets: Vec<u32>,
    pub lane_map: Vec<(usize, usize)>,
    pub lane_offsets: Vec<u32>,
    pub occupied_bits: u32,
    pub pattern_bound: u32,
    pub parallelism_bound: u32,
    pub certified: bool,
}

impl From<&PackingPlan> for PlanReport {
    fn from(p: &PackingPlan) -> Self {
        PlanReport {
            datatype: p.datatype().id(),
            pattern: p.pattern().name().to_string(),
            lanes: p.lanes(),
            guard: p.guard(),
            lane_width: p.lane_width(),
            stride: p.stride(),
            width_a: p.width_a(),
            width_b: p.width_b(),
            a_offsets: p.a_offsets().to_vec(),
            b_offsets: p.b_offsets().to_vec(),
            lane_map: p.lane_map().to_vec(),
            lane_offsets: (0..p.lanes()).map(|k| p.lane_offset(k)).collect(),
            occupied_bits: p.occupied_bits(),
            pattern_bound: p.pattern_bound(),
            parallelism_bound: p.parallelism_bound(),
            certified: p.certify().is_ok(),
        }
    }
}

fn port_row(label: &str, bits: u32, fields: &[(u32, u32, char)]) -> String {
    let mut row: Vec<char> = vec!['.'; bits as usize];
    for &(offset, width, mark) in fields {
        for bit in offset..(offset + width).min(bits) {
            row[bit as usize] = mark;
        }
    }
    let cells: String = row.iter().rev().collect();
    format!("{label:<3}[{bits:>2}] {cells:>45}")
}

fn mark(i: usize) -> char {
    char::from_digit(i as u32, 36).unwrap_or('*')
}

/// Bit-level layout of the A, B and product ports, most significant bit
/// first. Digits name operand (A, B) or lane (P) indices; `.` is unused.
pub fn plan_diagram(p: &PackingPlan) -> String {
    let a: Vec<_> = p.a_offsets().iter().enumerate().map(|(i, &o)| (o, p.width_a(), mark(i))).collect();
    let b: Vec<_> = p.b_offsets().iter().enumerate().map(|(i, &o)| (o, p.width_b(), mark(i))).collect();
    let lanes: Vec<_> = (0..p.lanes()).map(|k| (p.lane_offset(k), p.lane_width(), mark(k))).collect();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} lanes={} stride={} guard={}",
        p.datatype().id(),
        p.pattern().name(),
        p.lanes(),
        p.stride(),
        p.guard()
    );
    let _ = writeln!(out, "{}", port_row("A", A_PORT_BITS, &a));
    let _ = writeln!(out, "{}", port_row("B", B_PORT_BITS, &b));
    let _ = writeln!(out, "{}", port_row("P", PRODUCT_BITS, &lanes));
    out
}

pub fn utilization_table(reports: &[UtilizationReport]) -> String {
    let mut out = format!(
        "{:<10} {:<12} {:>4} {:>4} {:>5} {:>4} {:>7}\n",
        "arch", "datatype", "w_a", "w_b", "lanes", "dsp", "U_DSP"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<10} {:<12} {:>4} {:>4} {:>5} {:>4} {:>6.1}%",
            r.architecture.name(),
            r.datatype,
            r.w_a,
            r.w_b,
            r.lanes,
            r.dsp_count,
            r.percent()
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityRow {
    pub profile: String,
    pub baseline: [f64; 3],
    pub xtramac: [f64; 3],
    pub density: Density,
}

impl From<(&ResourceProfile, Density)> for DensityRow {
    fn from((p, d): (&ResourceProfile, Density)) -> Self {
        DensityRow {
            profile: p.name.to_string(),
            baseline: [p.baseline.lut, p.baseline.ff, p.baseline.dsp],
            xtramac: [p.xtramac.lut, p.xtramac.ff, p.xtramac.dsp],
            density: d.rounded(),
        }
    }
}

pub fn density_table(rows: &[DensityRow]) -> String {
    let mut out = format!(
        "{:<12} {:>15} {:>15} {:>13}\n",
        "profile", "LUT base/ours", "FF base/ours", "DSP base/ours"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<12} {:>5}/{:<5}{:>4.1}x {:>5}/{:<5}{:>4.1}x {:>3}/{:<5}{:>4.1}x",
            r.profile,
            r.baseline[0],
            r.xtramac[0],
            r.density.lut,
            r.baseline[1],
            r.xtramac[1],
            r.density.ff,
            r.baseline[2],
            r.xtramac[2],
            r.density.dsp
        );
    }
    out
}

pub fn bound_name(b: Bound) -> &'static str {
    match b {
        Bound::Memory => "memory",
        Bound::Compute => "compute",
    }
}

pub fn perf_text(label: &str, r: &PerfReport) -> String {
    let mut out = format!(
        "{label}: {:.5} ms ({}-bound)\n  memory {:.5} ms, compute {:.5} ms\n  cycles {}, bytes {:.0}, MACs {}\n",
        r.time_ms(),
        bound_name(r.bound),
        r.memory_time_s * 1e3,
        r.compute_time_s * 1e3,
        r.cycles,
        r.bytes_moved,
        r.macs
    );
    if let Some(e) = r.energy_j {
        let _ = writeln!(out, "  energy {e:.6} J");
    }
    out
}

pub fn decode_text(r: &DecodeReport) -> String {
    let mut out = format!(
        "{} {} batch={} context={} lanes={:.0}\n",
        r.model,
        r.architecture.name(),
        r.batch,
        r.context,
        r.lanes
    );
    if let Some(l) = r.layers.first() {
        let _ = writeln!(
            out,
            "  per layer: projection {:.4} ms ({}), attention {:.4} ms ({})",
            l.projection.time_ms(),
            bound_name(l.projection.bound),
            l.attention.time_ms(),
            bound_name(l.attention.bound)
        );
    }
    let _ = writeln!(
        out,
        "  total: {:.4} ms over {} layers ({}-bound)",
        r.total.time_ms(),
        r.layers.len(),
        bound_name(r.total.bound)
    );
    out
}
