//! Tile-parallel GEMV engine built from cascaded MAC pipelines, plus roofline
//! models for GEMV kernels and transformer decode.

use alloc::collections::VecDeque;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::analysis::{self, Architecture, Resources};
use crate::datatype::MacDatatype;
use crate::error::{Error, Result};
use crate::formats::FormatRegistry;
use crate::oracle::oracle_mac;
use crate::packing::{self, PlanLimits};
use crate::pipeline::{EvalMode, MacConfig, MacOutput, Pipeline};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GemvConfig {
    pub channels: u32,
    /// Bits each channel delivers per cycle.
    pub channel_bits: u32,
    /// Channels streaming weights; each feeds one PE.
    pub active_channels: u32,
    pub freq_hz: f64,
    /// Aggregate peak bandwidth over all channels.
    pub bw_bytes_per_s: f64,
    pub bw_efficiency: f64,
    pub weight_dtype: String,
    pub act_dtype: String,
    /// Lanes per MAC instance (P).
    pub lanes_per_mac: u32,
    #[cfg_attr(feature = "serde", serde(default))]
    pub power_w: Option<f64>,
}

/// False for NaN as well as for non-positive values.
fn positive(x: f64) -> bool {
    x > 0.0
}

impl GemvConfig {
    /// 32-channel HBM card with one channel each reserved for activations and
    /// write-back, INT4 weights against BF16 activations.
    pub fn u55c() -> GemvConfig {
        GemvConfig {
            channels: 32,
            channel_bits: 512,
            active_channels: 30,
            freq_hz: 250e6,
            bw_bytes_per_s: 460e9,
            bw_efficiency: 0.74,
            weight_dtype: String::from("int4"),
            act_dtype: String::from("bf16"),
            lanes_per_mac: 2,
            power_w: Some(85.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.channels == 0 || self.active_channels == 0 || self.active_channels > self.channels
        {
            return bad(alloc::format!(
                "need 0 < active_channels ({}) <= channels ({})",
                self.active_channels,
                self.channels
            ));
        }
        if !(self.bw_efficiency > 0.0 && self.bw_efficiency <= 1.0) {
            return bad(alloc::format!(
                "bw_efficiency must lie in (0, 1], got {}",
                self.bw_efficiency
            ));
        }
        if !positive(self.freq_hz) || !positive(self.bw_bytes_per_s) {
            return bad(String::from("freq_hz and bw_bytes_per_s must be positive"));
        }
        if self.lanes_per_mac == 0 || self.channel_bits == 0 {
            return bad(String::from("lanes_per_mac and channel_bits must be positive"));
        }
        Ok(())
    }

    pub fn datatype(&self, registry: &FormatRegistry) -> Result<MacDatatype> {
        MacDatatype::parse(
            &alloc::format!("{}x{}", self.weight_dtype, self.act_dtype),
            registry,
        )
    }

    fn weight_bits(&self) -> Result<u32> {
        FormatRegistry::default()
            .lookup(&self.weight_dtype)
            .map(|f| f.width())
            .ok_or_else(|| Error::UnknownDatatype(self.weight_dtype.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Bound {
    Memory,
    Compute,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PerfReport {
    pub cycles: u64,
    pub time_s: f64,
    pub memory_time_s: f64,
    pub compute_time_s: f64,
    pub bytes_moved: f64,
    pub macs: u64,
    pub bound: Bound,
    #[cfg_attr(feature = "serde", serde(default))]
    pub energy_j: Option<f64>,
}

impl PerfReport {
    fn roofline(memory_time_s: f64, compute_time_s: f64, bytes: f64, macs: u64, freq: f64) -> Self {
        let time_s = memory_time_s.max(compute_time_s);
        PerfReport {
            cycles: libm::ceil(time_s * freq) as u64,
            time_s,
            memory_time_s,
            compute_time_s,
            bytes_moved: bytes,
            macs,
            bound: if compute_time_s > memory_time_s {
                Bound::Compute
            } else {
                Bound::Memory
            },
            energy_j: None,
        }
    }

    pub fn time_ms(&self) -> f64 {
        self.time_s * 1e3
    }
}

/// MAC instances one channel word feeds: `channel_bits / (weight_bits * P)`.
pub fn macs_per_channel(cfg: &GemvConfig) -> Result<u32> {
    let per_instance = cfg.weight_bits()? * cfg.lanes_per_mac;
    if per_instance == 0 || !cfg.channel_bits.is_multiple_of(per_instance) {
        return Err(Error::Config(alloc::format!(
            "{} channel bits are not a multiple of {} weight bits x {} lanes",
            cfg.channel_bits,
            cfg.weight_dtype,
            cfg.lanes_per_mac
        )));
    }
    Ok(cfg.channel_bits / per_instance)
}

/// Instances the card could host if every channel streamed weights.
pub fn instance_ceiling(cfg: &GemvConfig) -> Result<u32> {
    Ok(cfg.channels * macs_per_channel(cfg)?)
}

pub fn active_instances(cfg: &GemvConfig) -> Result<u32> {
    Ok(cfg.active_channels * macs_per_channel(cfg)?)
}

/// Weight-streaming time against the MAC-array ceiling for an `m x k` matrix.
pub fn roofline_gemv(cfg: &GemvConfig, m: u64, k: u64) -> Result<PerfReport> {
    cfg.validate()?;
    let bytes = (m * k) as f64 * cfg.weight_bits()? as f64 / 8.0;
    let macs = m * k;
    let memory = bytes / (cfg.bw_bytes_per_s * cfg.bw_efficiency);
    let rate = active_instances(cfg)? as f64 * cfg.lanes_per_mac as f64 * cfg.freq_hz;
    let compute = macs as f64 / rate;
    let mut report = PerfReport::roofline(memory, compute, bytes, macs, cfg.freq_hz);
    report.energy_j = cfg.power_w.map(|p| p * report.time_s);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GemvResult {
    /// One accumulator-format pattern per row.
    pub output: Vec<u32>,
    pub report: PerfReport,
}

/// Single-datatype GEMV with the configuration's weight and activation formats.
///
/// `weights` is row-major `m x k`, `activations` has `k` entries.
pub fn simulate_gemv(
    cfg: &GemvConfig,
    m: usize,
    k: usize,
    weights: &[u32],
    activations: &[u32],
) -> Result<GemvResult> {
    let dt = cfg.datatype(&FormatRegistry::default())?;
    let chunks = k.div_ceil(macs_per_channel(cfg)? as usize);
    simulate_gemv_tiled(cfg, &[dt], &vec![0; chunks], m, k, weights, activations)
}

/// GEMV where each chunk of `N_MAC` columns carries its own datatype.
///
/// `tile_select[c]` indexes `tiles` for columns `[c*N, (c+1)*N)`. Every tile
/// datatype must share the activation and accumulator formats and the
/// configuration's lane count.
pub fn simulate_gemv_tiled(
    cfg: &GemvConfig,
    tiles: &[MacDatatype],
    tile_select: &[usize],
    m: usize,
    k: usize,
    weights: &[u32],
    activations: &[u32],
) -> Result<GemvResult> {
    cfg.validate()?;
    let n = macs_per_channel(cfg)? as usize;
    check_dims(n, tiles, tile_select, m, k, weights, activations)?;
    let p = cfg.lanes_per_mac as usize;
    let plans = tiles
        .iter()
        .map(|dt| {
            let limits = PlanLimits {
                allow_cross: false,
                ..PlanLimits::default()
            };
            packing::plan_with(dt, limits)
        })
        .collect::<Result<Vec<_>>>()?;
    for (dt, plan) in tiles.iter().zip(&plans) {
        if plan.lanes() != p || dt.b() != tiles[0].b() || dt.p() != tiles[0].p() {
            return Err(Error::Config(alloc::format!(
                "{dt} ({} lanes) does not match the tile set ({}x lanes, {} activations, {} accumulator)",
                plan.lanes(),
                p,
                tiles[0].b().name(),
                tiles[0].p().name()
            )));
        }
    }
    let mac = Arc::new(MacConfig::from_plans(plans)?.with_mode(EvalMode::Fast));
    let job = Job {
        mac,
        n,
        p,
        m,
        k,
        weights,
        activations,
        tile_select,
        tile_bits: tiles.iter().map(|dt| dt.a().width()).collect(),
        channel_bits: cfg.channel_bits as usize,
    };

    let pes = cfg.active_channels as usize;
    let groups = m.div_ceil(p);
    let mut output = vec![0u32; m];
    let mut cycles = 0u64;
    let mut beats = 0u64;
    let mut stalled = false;
    for pe in 0..pes.min(groups) {
        let row_groups: Vec<usize> = (pe..groups).step_by(pes).collect();
        let run = job.run_pe(&row_groups)?;
        for (g, lanes) in row_groups.iter().zip(run.results) {
            for (lane, bits) in lanes.iter().enumerate() {
                if let Some(slot) = output.get_mut(g * p + lane) {
                    *slot = *bits;
                }
            }
        }
        cycles = cycles.max(run.cycles);
        beats += run.beats;
        stalled |= run.stalled;
    }

    let time_s = cycles as f64 / cfg.freq_hz;
    let bytes = (beats * cfg.channel_bits as u64) as f64 / 8.0;
    let memory_time_s = bytes / (cfg.bw_bytes_per_s * cfg.bw_efficiency);
    let report = PerfReport {
        cycles,
        time_s,
        memory_time_s,
        compute_time_s: time_s,
        bytes_moved: bytes,
        macs: (m * k) as u64,
        bound: if stalled { Bound::Compute } else { Bound::Memory },
        energy_j: cfg.power_w.map(|w| w * time_s),
    };
    Ok(GemvResult { output, report })
}

/// Sequential per-row oracle chain in cascade order: columns ascending,
/// accumulator starting at +0.
pub fn reference_gemv(
    n_mac: usize,
    tiles: &[MacDatatype],
    tile_select: &[usize],
    m: usize,
    k: usize,
    weights: &[u32],
    activations: &[u32],
) -> Result<Vec<u32>> {
    check_dims(n_mac, tiles, tile_select, m, k, weights, activations)?;
    (0..m)
        .map(|r| {
            (0..k).try_fold(0u32, |acc, col| {
                let dt = &tiles[tile_select[col / n_mac]];
                oracle_mac(weights[r * k + col], activations[col], acc, dt)
            })
        })
        .collect()
}

fn check_dims(
    n: usize,
    tiles: &[MacDatatype],
    tile_select: &[usize],
    m: usize,
    k: usize,
    weights: &[u32],
    activations: &[u32],
) -> Result<()> {
    let dim = |what: String| Err(Error::Dimension(what));
    if weights.len() != m * k {
        return dim(alloc::format!("{} weights for a {m}x{k} matrix", weights.len()));
    }
    if activations.len() != k {
        return dim(alloc::format!("{} activations for k = {k}", activations.len()));
    }
    if tile_select.len() != k.div_ceil(n) {
        return dim(alloc::format!(
            "{} tile selects for {} chunks of {n} columns",
            tile_select.len(),
            k.div_ceil(n)
        ));
    }
    if tiles.is_empty() || tile_select.iter().any(|&s| s >= tiles.len()) {
        return Err(Error::Config(String::from("tile select out of range")));
    }
    Ok(())
}

struct Job<'a> {
    mac: Arc<MacConfig>,
    n: usize,
    p: usize,
    m: usize,
    k: usize,
    weights: &'a [u32],
    activations: &'a [u32],
    tile_select: &'a [usize],
    tile_bits: Vec<u32>,
    channel_bits: usize,
}

struct PeRun {
    results: Vec<Vec<u32>>,
    cycles: u64,
    beats: u64,
    stalled: bool,
}

/// One channel word: `P` rows of a row-group against `N` columns of a chunk.
struct Word {
    group: usize,
    chunk: usize,
    issue: u64,
    active: usize,
}

impl Job<'_> {
    fn run_pe(&self, row_groups: &[usize]) -> Result<PeRun> {
        let latency = self.mac.latency() as u64;
        let chunks = self.k.div_ceil(self.n);

        // Schedule: one word per `beats` cycles, chunk-major, and a row-group
        // may not start its next chunk before the previous chunk's sum has
        // left the last active instance and been registered.
        let mut words = Vec::with_capacity(chunks * row_groups.len());
        let mut ready = vec![0u64; row_groups.len()];
        let mut free = 0u64;
        let mut beats = 0u64;
        let mut stalled = false;
        for chunk in 0..chunks {
            let active = self.n.min(self.k - chunk * self.n);
            let bits = self.tile_bits[self.tile_select[chunk]] as usize;
            let word_beats = (self.n * self.p * bits).div_ceil(self.channel_bits) as u64;
            for (gi, _) in row_groups.iter().enumerate() {
                stalled |= ready[gi] > free;
                let issue = free.max(ready[gi]);
                words.push(Word {
                    group: gi,
                    chunk,
                    issue,
                    active,
                });
                ready[gi] = issue + active as u64 * latency + 1;
                free = issue + word_beats;
                beats += word_beats;
            }
        }

        let mut results = vec![vec![0u32; self.p]; row_groups.len()];
        let Some(last) = words.last() else {
            return Ok(PeRun {
                results,
                cycles: 0,
                beats,
                stalled,
            });
        };
        let end = last.issue + last.active as u64 * latency + 1;

        let mut queues: Vec<VecDeque<usize>> = vec![VecDeque::new(); self.n];
        for (w, word) in words.iter().enumerate() {
            for q in queues.iter_mut().take(word.active) {
                q.push_back(w);
            }
        }
        let mut pipes: Vec<Pipeline> = (0..self.n)
            .map(|_| Pipeline::new(Arc::clone(&self.mac)))
            .collect();
        let mut popped: Vec<Option<MacOutput>> = vec![None; self.n];
        let mut a_vals = vec![0u32; self.p];
        for t in 0..end {
            for i in 0..self.n {
                let due = queues[i]
                    .front()
                    .is_some_and(|&w| words[w].issue + i as u64 * latency == t);
                let slot = if due {
                    let w = queues[i].pop_front().unwrap_or_default();
                    let word = &words[w];
                    let c_lanes: Vec<u32> = if i == 0 {
                        results[word.group].clone()
                    } else {
                        let prev = popped[i - 1].as_ref().ok_or_else(|| {
                            Error::Contract(String::from("cascade operand missing"))
                        })?;
                        prev.lane_values().to_vec()
                    };
                    let col = word.chunk * self.n + i;
                    let row0 = row_groups[word.group] * self.p;
                    for (lane, a) in a_vals.iter_mut().enumerate() {
                        let row = row0 + lane;
                        *a = if row < self.m {
                            self.weights[row * self.k + col]
                        } else {
                            0
                        };
                    }
                    let select = self.tile_select[word.chunk];
                    Some(self.mac.pack_slot(
                        select,
                        &a_vals,
                        &[self.activations[col]],
                        &c_lanes,
                    )?)
                } else {
                    None
                };
                popped[i] = pipes[i].step(slot.as_ref())?;
            }
            // Sums leaving the last active instance of a word are registered
            // for the row-group's next chunk.
            for word in words.iter().filter(|w| w.issue + w.active as u64 * latency == t) {
                let out = popped[word.active - 1]
                    .as_ref()
                    .ok_or_else(|| Error::Contract(String::from("cascade output missing")))?;
                results[word.group] = out.lane_values().to_vec();
            }
        }
        Ok(PeRun {
            results,
            cycles: end,
            beats,
            stalled,
        })
    }
}

/// Device budget and memory system for the decode model.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Platform {
    pub name: String,
    pub lut: f64,
    pub dsp: f64,
    pub freq_hz: f64,
    pub bw_bytes_per_s: f64,
    pub bw_efficiency: f64,
}

impl Platform {
    pub fn v80() -> Platform {
        Platform {
            name: String::from("v80"),
            lut: 2.6e6,
            dsp: 10848.0,
            freq_hz: 300e6,
            bw_bytes_per_s: 810e9,
            bw_efficiency: 1.0,
        }
    }

    /// MAC lanes that fit when each lane consumes `per_lane` of the device,
    /// LUT and DSP fractions summed.
    pub fn lanes_fitting(&self, per_lane: &Resources) -> f64 {
        1.0 / (per_lane.lut / self.lut + per_lane.dsp / self.dsp)
    }

    fn bandwidth(&self) -> f64 {
        self.bw_bytes_per_s * self.bw_efficiency
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProjectionDesc {
    pub datatype: String,
    /// Stored bits per weight including any scale overhead.
    pub weight_bits: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MoeDesc {
    pub count: u32,
    pub top_k: u32,
    pub intermediate: u64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AttentionDesc {
    pub datatype: String,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LlmModelDesc {
    pub name: String,
    pub layers: u32,
    pub hidden: u64,
    /// Dense FFN width; unused when `experts` is set.
    pub ffn: u64,
    pub heads: u64,
    pub kv_heads: u64,
    pub head_dim: u64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub experts: Option<MoeDesc>,
    pub attn_proj: ProjectionDesc,
    pub ffn_proj: ProjectionDesc,
    pub attention: AttentionDesc,
    /// Name of the per-lane resource profile both architectures are costed with.
    pub resource_profile: String,
}

impl LlmModelDesc {
    pub fn validate(&self, registry: &FormatRegistry) -> Result<()> {
        for id in [
            &self.attn_proj.datatype,
            &self.ffn_proj.datatype,
            &self.attention.datatype,
        ] {
            MacDatatype::parse(id, registry)?;
        }
        if analysis::resource_profile(&self.resource_profile).is_none() {
            return Err(Error::Config(alloc::format!(
                "unknown resource profile {}",
                self.resource_profile
            )));
        }
        if self.layers == 0 || self.hidden == 0 || self.heads == 0 || self.head_dim == 0 {
            return Err(Error::Config(String::from("model dimensions must be positive")));
        }
        if let Some(e) = &self.experts {
            if e.top_k == 0 || e.top_k > e.count {
                return Err(Error::Config(String::from("need 0 < top_k <= expert count")));
            }
        }
        for bits in [self.attn_proj.weight_bits, self.ffn_proj.weight_bits] {
            if !positive(bits) {
                return Err(Error::Config(String::from("weight_bits must be positive")));
            }
        }
        Ok(())
    }

    /// Q, K, V and O projection weights of one layer.
    pub fn attn_proj_params(&self) -> u64 {
        let q = self.heads * self.head_dim;
        let kv = self.kv_heads * self.head_dim;
        2 * self.hidden * q + 2 * self.hidden * kv
    }

    /// Gate, up and down weights of one dense FFN or one expert.
    pub fn ffn_block_params(&self) -> u64 {
        let width = self.experts.as_ref().map_or(self.ffn, |e| e.intermediate);
        3 * self.hidden * width
    }

    /// FFN MACs per token per layer.
    pub fn ffn_macs_per_token(&self) -> u64 {
        let active = self.experts.as_ref().map_or(1, |e| e.top_k as u64);
        active * self.ffn_block_params()
    }

    /// Expected distinct FFN blocks a batch touches in one layer.
    pub fn ffn_blocks_touched(&self, batch: u32) -> f64 {
        match &self.experts {
            None => 1.0,
            Some(e) => {
                let n = e.count as f64;
                n * (1.0 - libm::pow(1.0 - e.top_k as f64 / n, batch as f64))
            }
        }
    }

    /// Stored bytes of all transformer-layer weights.
    pub fn weight_bytes(&self) -> f64 {
        let blocks = self.experts.as_ref().map_or(1, |e| e.count) as f64;
        let per_layer = self.attn_proj_params() as f64 * self.attn_proj.weight_bits / 8.0
            + blocks * self.ffn_block_params() as f64 * self.ffn_proj.weight_bits / 8.0;
        per_layer * self.layers as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct LayerReport {
    pub layer: u32,
    pub projection: PerfReport,
    pub attention: PerfReport,
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DecodeReport {
    pub model: String,
    pub architecture: Architecture,
    pub batch: u32,
    pub context: u64,
    /// Device-wide MAC lanes at the profile's per-lane cost.
    pub lanes: f64,
    pub layers: Vec<LayerReport>,
    pub total: PerfReport,
}

/// One decode step: every layer streams its weights once for the whole batch
/// (projection phase), then streams each sequence's BF16 KV cache (attention
/// phase). Each phase takes the longer of its memory and compute times.
pub fn decode_latency(
    model: &LlmModelDesc,
    batch: u32,
    context: u64,
    platform: &Platform,
    arch: Architecture,
) -> Result<DecodeReport> {
    model.validate(&FormatRegistry::default())?;
    let profile = analysis::resource_profile(&model.resource_profile).ok_or_else(|| {
        Error::Config(alloc::format!("unknown resource profile {}", model.resource_profile))
    })?;
    let per_lane = match arch {
        Architecture::XtraMac => profile.xtramac,
        Architecture::Upcast => profile.baseline,
        other => {
            return Err(Error::Config(alloc::format!(
                "the decode model costs xtramac or upcast lanes, not {}",
                other.name()
            )))
        }
    };
    let lanes = platform.lanes_fitting(&per_lane);
    let rate = lanes * platform.freq_hz;
    let bw = platform.bandwidth();
    let b = batch as u64;

    let proj_bytes = model.attn_proj_params() as f64 * model.attn_proj.weight_bits / 8.0
        + model.ffn_blocks_touched(batch)
            * model.ffn_block_params() as f64
            * model.ffn_proj.weight_bits
            / 8.0;
    let proj_macs = b * (model.attn_proj_params() + model.ffn_macs_per_token());
    let projection = PerfReport::roofline(
        proj_bytes / bw,
        proj_macs as f64 / rate,
        proj_bytes,
        proj_macs,
        platform.freq_hz,
    );

    let kv_bytes = (b * 2 * context * model.kv_heads * model.head_dim * 2) as f64;
    let attn_macs = b * 2 * context * model.heads * model.head_dim;
    let attention = PerfReport::roofline(
        kv_bytes / bw,
        attn_macs as f64 / rate,
        kv_bytes,
        attn_macs,
        platform.freq_hz,
    );

    let layer_time = projection.time_s + attention.time_s;
    let layers: Vec<LayerReport> = (0..model.layers)
        .map(|layer| LayerReport {
            layer,
            projection: projection.clone(),
            attention: attention.clone(),
            time_s: layer_time,
        })
        .collect();
    let n = model.layers as f64;
    let memory = n * (projection.memory_time_s + attention.memory_time_s);
    let compute = n * (projection.compute_time_s + attention.compute_time_s);
    let time_s = n * layer_time;
    let total = PerfReport {
        cycles: libm::ceil(time_s * platform.freq_hz) as u64,
        time_s,
        memory_time_s: memory,
        compute_time_s: compute,
        bytes_moved: n * (proj_bytes + kv_bytes),
        macs: model.layers as u64 * (proj_macs + attn_macs),
        bound: if compute > memory {
            Bound::Compute
        } else {
            Bound::Memory
        },
        energy_j: None,
    };
    Ok(DecodeReport {
        model: model.name.clone(),
        architecture: arch,
        batch,
        context,
        lanes,
        layers,
        total,
    })
}

/// Upcast-baseline latency over XtraMAC latency.
pub fn decode_speedup(
    model: &LlmModelDesc,
    batch: u32,
    context: u64,
    platform: &Platform,
) -> Result<f64> {
    let base = decode_latency(model, batch, context, platform, Architecture::Upcast)?;
    let ours = decode_latency(model, batch, context, platform, Architecture::XtraMac)?;
    Ok(base.total.time_s / ours.total.time_s)
}
