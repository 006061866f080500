use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use xtramac::config::{self, Loaded};
use xtramac::core::analysis::{self, AdderKind, Architecture};
use xtramac::core::gemv::{self, GemvConfig, LlmModelDesc, Platform};
use xtramac::core::packing::{self, PlanLimits};
use xtramac::core::MacDatatype;
use xtramac::formats_file::FormatsFile;
use xtramac::report::{self, DensityRow, PlanReport};
use xtramac::vectors::{self, CheckMode, GenMode};
use xtramac::{sample, schema, sweep};

#[derive(Parser)]
#[command(name = "xtramac", version, about = "Bit-accurate mixed-precision MAC simulator")]
struct Cli {
    /// Tool configuration (else $XTRAMAC_CONFIG, else ./xtramac.json).
    #[arg(long, value_name = "JSON")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test vectors, pipeline runs and conformance sweeps.
    #[command(subcommand)]
    Mac(MacCmd),
    /// Operand packing plans.
    #[command(subcommand)]
    Pack(PackCmd),
    /// Utilization, compute-density and adder-cost models.
    #[command(subcommand)]
    Util(UtilCmd),
    /// GEMV engine simulation and roofline.
    #[command(subcommand)]
    Gemv(GemvCmd),
    /// Transformer decode latency model.
    #[command(subcommand)]
    Llm(LlmCmd),
}

#[derive(Subcommand)]
enum MacCmd {
    /// Generate oracle-checked vectors.
    Gen(GenArgs),
    /// Check a vector file against the pipeline or the oracle.
    Check(CheckArgs),
    /// Stream a vector file through one pipeline instance, optionally tracing.
    Run(RunArgs),
    /// Pipeline-versus-oracle sweep of one datatype.
    Sweep(SweepArgs),
    /// Print the format registry as formats.json.
    Formats,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    dtype: String,
    /// Random records to emit.
    #[arg(long, conflicts_with = "exhaustive", default_value_t = 0)]
    count: u64,
    /// Every operand pair (operands of at most 8 bits).
    #[arg(long)]
    exhaustive: bool,
    /// Sampled accumulators per pair in exhaustive mode.
    #[arg(long, default_value_t = 1)]
    c_per_pair: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Pipeline,
    Oracle,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    vectors: PathBuf,
    #[arg(long, value_enum, default_value = "pipeline")]
    mode: ModeArg,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    vectors: PathBuf,
    /// Print one line per cycle.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    dtype: String,
    /// Accumulator samples crossed with every operand pair.
    #[arg(long, conflicts_with = "random")]
    c_samples: Option<usize>,
    /// Random triples instead of an exhaustive operand sweep.
    #[arg(long)]
    random: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    shards: Option<usize>,
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum PackCmd {
    /// Plan and certify the lane layout of a datatype.
    Plan {
        #[arg(long)]
        dtype: String,
        #[arg(long, default_value_t = packing::DEFAULT_GUARD)]
        guard: u32,
        /// Restrict the search to broadcast layouts.
        #[arg(long)]
        broadcast_only: bool,
        /// JSON only, without the layout diagram.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ArchArg {
    Xtramac,
    Upcast,
    Spatial,
    Temporal,
}

impl From<ArchArg> for Architecture {
    fn from(a: ArchArg) -> Self {
        match a {
            ArchArg::Xtramac => Architecture::XtraMac,
            ArchArg::Upcast => Architecture::Upcast,
            ArchArg::Spatial => Architecture::SpatialReplication,
            ArchArg::Temporal => Architecture::TemporalSharing,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Int,
    FpShifter,
}

#[derive(Subcommand)]
enum UtilCmd {
    /// DSP bit-utilization; several --dtype values form the spatial set.
    Report {
        #[arg(long, value_enum)]
        arch: ArchArg,
        #[arg(long, required = true)]
        dtype: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Per-lane resource ratios of the vendor operator over the packed MAC.
    Density {
        #[arg(long)]
        json: bool,
    },
    /// Adder cost: alpha*w (int) or beta*w*log2(w) (fp_shifter).
    Cost {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        width: u32,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct GemvShape {
    /// GEMV engine configuration (else the tool config, else the U55c default).
    #[arg(long, value_name = "JSON")]
    config: Option<PathBuf>,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum GemvCmd {
    /// Cycle-level simulation, verified against the sequential oracle chain.
    Sim {
        #[command(flatten)]
        shape: GemvShape,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated datatypes assigned to chunks round-robin.
        #[arg(long, value_delimiter = ',')]
        tiles: Vec<String>,
    },
    /// Analytic memory/compute roofline.
    Roofline {
        #[command(flatten)]
        shape: GemvShape,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DecodeArch {
    Xtramac,
    Upcast,
    Both,
}

#[derive(Subcommand)]
enum LlmCmd {
    /// Decode-step latency of a model descriptor.
    Decode {
        #[arg(long, value_name = "JSON")]
        model: PathBuf,
        #[arg(long, default_value_t = 1)]
        batch: u32,
        #[arg(long, default_value_t = 512)]
        context: u64,
        #[arg(long, value_name = "JSON")]
        platform: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "both")]
        arch: DecodeArch,
        #[arg(long)]
        json: bool,
    },
}

/// Command outcome: `false` means a mismatch or failed assertion.
type Outcome = anyhow::Result<bool>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = config::discover(cli.config.as_deref()).and_then(|cfg| run(cli.command, &cfg));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command, cfg: &Loaded) -> Outcome {
    match cmd {
        Command::Mac(c) => mac(c, cfg),
        Command::Pack(c) => pack(c, cfg),
        Command::Util(c) => util(c, cfg),
        Command::Gemv(c) => gemv_cmd(c, cfg),
        Command::Llm(c) => llm(c, cfg),
    }
}

fn parse_dtype(id: &str, cfg: &Loaded) -> anyhow::Result<MacDatatype> {
    Ok(MacDatatype::parse(id, &cfg.registry)?)
}

fn emit<T: Serialize>(body: &T) {
    println!("{}", schema::to_json(body));
}

fn mac(cmd: MacCmd, cfg: &Loaded) -> Outcome {
    match cmd {
        MacCmd::Gen(g) => {
            let dt = parse_dtype(&g.dtype, cfg)?;
            let mode = if g.exhaustive {
                GenMode::Exhaustive {
                    c_per_pair: g.c_per_pair,
                }
            } else {
                GenMode::Random { count: g.count }
            };
            let records = vectors::generate(&dt, mode, g.seed)?;
            let comment = format!("dtype={} seed={} records={}", dt.id(), g.seed, records.len());
            let text = vectors::write(&records, &[comment]);
            match g.output {
                Some(p) => fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => std::io::stdout().write_all(text.as_bytes())?,
            }
            Ok(true)
        }
        MacCmd::Check(c) => {
            let records = read_vectors(&c.vectors, cfg)?;
            let summary = match c.mode {
                ModeArg::Oracle => vectors::check_oracle(&records)?,
                ModeArg::Pipeline => check_pipeline(&records, cfg, None)?,
            };
            if c.json {
                emit(&summary);
            } else {
                print_check(&summary);
            }
            Ok(summary.ok())
        }
        MacCmd::Run(r) => {
            let records = read_vectors(&r.vectors, cfg)?;
            let mut trace = Vec::new();
            let summary = check_pipeline(&records, cfg, r.trace.then_some(&mut trace))?;
            for line in &trace {
                println!("{line}");
            }
            print_check(&summary);
            Ok(summary.ok())
        }
        MacCmd::Sweep(s) => {
            let dt = parse_dtype(&s.dtype, cfg)?;
            let mac = cfg.mac_config(&[dt])?;
            let shards = s.shards.unwrap_or_else(sweep::default_shards);
            let summary = match s.random {
                Some(n) => sweep::random_sweep(&mac, &dt, n, s.seed, shards)?,
                None => {
                    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
                    let cs: Vec<u32> = (0..s.c_samples.unwrap_or(16))
                        .map(|_| sample::operand(&mut rng, &dt.c()))
                        .collect();
                    sweep::exhaustive_sweep(&mac, &dt, &cs, shards)?
                }
            };
            if s.json {
                emit(&summary);
            } else {
                println!(
                    "{}: {} lanes checked, {} mismatches",
                    dt.id(),
                    summary.lanes_checked,
                    summary.mismatches
                );
                for d in &summary.diffs {
                    println!(
                        "  a={:#x} b={:#x} c={:#x} expected={:#x} actual={:#x}",
                        d.a, d.b, d.c, d.expected, d.actual
                    );
                }
            }
            Ok(summary.mismatches == 0)
        }
        MacCmd::Formats => {
            emit(&FormatsFile::from(&cfg.registry));
            Ok(true)
        }
    }
}

fn read_vectors(path: &Path, cfg: &Loaded) -> anyhow::Result<Vec<vectors::Record>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    vectors::parse(&text, &cfg.registry).with_context(|| format!("parsing {}", path.display()))
}

fn check_pipeline(
    records: &[vectors::Record],
    cfg: &Loaded,
    trace: Option<&mut Vec<String>>,
) -> anyhow::Result<vectors::CheckSummary> {
    if records.is_empty() {
        return vectors::check_oracle(records).map(|mut s| {
            s.mode = CheckMode::Pipeline;
            s
        });
    }
    let mac = cfg.mac_config(&vectors::datatypes(records))?;
    vectors::check_pipeline(records, mac, trace)
}

fn print_check(s: &vectors::CheckSummary) {
    let mode = match s.mode {
        CheckMode::Pipeline => "pipeline",
        CheckMode::Oracle => "oracle",
    };
    println!(
        "{mode}: {} vectors, {} passed, {} mismatches",
        s.vectors, s.passed, s.mismatches
    );
    for d in &s.diffs {
        println!(
            "  line {}: {} a={} b={} c={} expected={} actual={}",
            d.line, d.dtype, d.a, d.b, d.c, d.expected, d.actual
        );
    }
}

fn pack(cmd: PackCmd, cfg: &Loaded) -> Outcome {
    let PackCmd::Plan {
        dtype,
        guard,
        broadcast_only,
        json,
    } = cmd;
    let dt = parse_dtype(&dtype, cfg)?;
    let limits = PlanLimits {
        guard,
        allow_cross: !broadcast_only,
        ..PlanLimits::default()
    };
    let plan = packing::plan_with(&dt, limits)?;
    let body = PlanReport::from(&plan);
    emit(&body);
    if !json {
        print!("{}", report::plan_diagram(&plan));
    }
    Ok(body.certified)
}

fn util(cmd: UtilCmd, cfg: &Loaded) -> Outcome {
    match cmd {
        UtilCmd::Report { arch, dtype, json } => {
            let dts = dtype
                .iter()
                .map(|d| parse_dtype(d, cfg))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let arch = Architecture::from(arch);
            let reports = match arch {
                Architecture::SpatialReplication => analysis::spatial_replication(&dts),
                _ => dts
                    .iter()
                    .map(|d| analysis::utilization_report(arch, d))
                    .collect::<Result<Vec<_>, _>>()?,
            };
            let mean = analysis::mean_utilization(&reports);
            if json {
                #[derive(Serialize)]
                struct Body<'a> {
                    reports: &'a [analysis::UtilizationReport],
                    mean_utilization: f64,
                }
                emit(&Body {
                    reports: &reports,
                    mean_utilization: mean,
                });
            } else {
                print!("{}", report::utilization_table(&reports));
                if reports.len() > 1 {
                    println!("mean U_DSP {:.1}%", mean * 100.0);
                }
            }
            Ok(true)
        }
        UtilCmd::Density { json } => {
            let rows = analysis::RESOURCE_PROFILES
                .iter()
                .map(|p| Ok(DensityRow::from((p, analysis::compute_density(&p.baseline, &p.xtramac)?))))
                .collect::<anyhow::Result<Vec<_>>>()?;
            if json {
                emit(&rows);
            } else {
                print!("{}", report::density_table(&rows));
            }
            Ok(true)
        }
        UtilCmd::Cost {
            kind,
            width,
            alpha,
            beta,
            json,
        } => {
            let (kind, coefficient) = match kind {
                KindArg::Int => (AdderKind::Int, alpha),
                KindArg::FpShifter => (AdderKind::FpShifter, beta),
            };
            let cost = analysis::adder_cost(kind, width, coefficient)?;
            if json {
                #[derive(Serialize)]
                struct Body {
                    kind: &'static str,
                    width: u32,
                    coefficient: f64,
                    cost: f64,
                }
                emit(&Body {
                    kind: if kind == AdderKind::Int { "int" } else { "fp_shifter" },
                    width,
                    coefficient,
                    cost,
                });
            } else {
                println!("{cost}");
            }
            Ok(true)
        }
    }
}

fn gemv_config(path: Option<&Path>, cfg: &Loaded) -> anyhow::Result<GemvConfig> {
    let g = match path {
        Some(p) => schema::read_json(p)?,
        None => cfg.gemv(),
    };
    g.validate()?;
    Ok(g)
}

fn gemv_cmd(cmd: GemvCmd, cfg: &Loaded) -> Outcome {
    match cmd {
        GemvCmd::Roofline { shape } => {
            let g = gemv_config(shape.config.as_deref(), cfg)?;
            let r = gemv::roofline_gemv(&g, shape.m as u64, shape.k as u64)?;
            if shape.json {
                emit(&r);
            } else {
                print!("{}", report::perf_text(&format!("roofline {}x{}", shape.m, shape.k), &r));
            }
            Ok(true)
        }
        GemvCmd::Sim { shape, seed, tiles } => {
            let g = gemv_config(shape.config.as_deref(), cfg)?;
            let n = gemv::macs_per_channel(&g)? as usize;
            let tiles = if tiles.is_empty() {
                vec![g.datatype(&cfg.registry)?]
            } else {
                tiles
                    .iter()
                    .map(|t| parse_dtype(t, cfg))
                    .collect::<anyhow::Result<Vec<_>>>()?
            };
            let (m, k) = (shape.m, shape.k);
            let select: Vec<usize> = (0..k.div_ceil(n)).map(|c| c % tiles.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut weights = vec![0u32; m * k];
            for col in 0..k {
                let fmt = tiles[select[col / n]].a();
                for r in 0..m {
                    weights[r * k + col] = sample::operand(&mut rng, &fmt);
                }
            }
            let acts: Vec<u32> = (0..k).map(|_| sample::operand(&mut rng, &tiles[0].b())).collect();
            let result = gemv::simulate_gemv_tiled(&g, &tiles, &select, m, k, &weights, &acts)?;
            let reference = gemv::reference_gemv(n, &tiles, &select, m, k, &weights, &acts)?;
            let matching = result
                .output
                .iter()
                .zip(&reference)
                .filter(|(x, y)| x == y)
                .count();
            if shape.json {
                #[derive(Serialize)]
                struct Body<'a> {
                    m: usize,
                    k: usize,
                    seed: u64,
                    report: &'a gemv::PerfReport,
                    rows_matching_oracle: usize,
                    output: Vec<String>,
                }
                let width = tiles[0].p().width().div_ceil(4) as usize;
                emit(&Body {
                    m,
                    k,
                    seed,
                    report: &result.report,
                    rows_matching_oracle: matching,
                    output: result.output.iter().map(|v| format!("{v:0width$x}")).collect(),
                });
            } else {
                print!("{}", report::perf_text(&format!("gemv sim {m}x{k}"), &result.report));
                println!("  oracle chain: {matching}/{m} rows bit-exact");
            }
            Ok(matching == m)
        }
    }
}

fn llm(cmd: LlmCmd, cfg: &Loaded) -> Outcome {
    let LlmCmd::Decode {
        model,
        batch,
        context,
        platform,
        arch,
        json,
    } = cmd;
    let desc: LlmModelDesc = schema::read_json(&model)?;
    let plat: Platform = match platform {
        Some(p) => schema::read_json(&p)?,
        None => cfg.platform(),
    };
    if batch == 0 {
        bail!("batch must be at least 1");
    }
    let archs: &[Architecture] = match arch {
        DecodeArch::Xtramac => &[Architecture::XtraMac],
        DecodeArch::Upcast => &[Architecture::Upcast],
        DecodeArch::Both => &[Architecture::Upcast, Architecture::XtraMac],
    };
    let reports = archs
        .iter()
        .map(|&a| gemv::decode_latency(&desc, batch, context, &plat, a))
        .collect::<Result<Vec<_>, _>>()?;
    let speedup = (reports.len() == 2).then(|| reports[0].total.time_s / reports[1].total.time_s);
    if json {
        #[derive(Serialize)]
        struct Body<'a> {
            reports: &'a [gemv::DecodeReport],
            speedup: Option<f64>,
        }
        emit(&Body {
            reports: &reports,
            speedup,
        });
    } else {
        for r in &reports {
            print!("{}", report::decode_text(r));
        }
        if let Some(s) = speedup {
            println!("speedup (upcast / xtramac): {s:.2}x");
        }
    }
    Ok(true)
}
