//! `bwconv`: bit-true layer simulation, golden verification and network
//! evaluation at calibrated operating points.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 verification
//! mismatch.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bwconv_core::accel::{SimOptions, WindowScheme};
use bwconv_core::golden::{conv_layer_golden_with, io, Accumulation};
use bwconv_core::netmodel::{evaluate_network, simulate_layer};
use bwconv_core::power::ActivityModel;
use bwconv_core::{AccelConfig, Calibration, ChannelAffine, FeatureMap, FilterSet, NetworkSpec, OperatingPoint, Padding};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use output::{Format, Manifest, Sink};

#[derive(Parser, Debug)]
#[command(name = "bwconv", version, about = "Binary-weight CNN accelerator model")]
struct Cli {
    /// Accelerator configuration (TOML); defaults follow the operating point's variant.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Calibration table (TOML); defaults to the built-in table.
    #[arg(long, global = true)]
    calibration: Option<PathBuf>,

    /// Chip variant in the calibration table.
    #[arg(long, global = true, default_value = "multi32")]
    variant: String,

    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,

    /// Directory for report files and manifest.json.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run one layer bit-true on the accelerator model.
    Simulate(SimulateArgs),
    /// Evaluate a network at one operating point.
    Network(NetworkArgs),
    /// Evaluate networks across core voltages.
    Sweep(SweepArgs),
    /// List calibrated operating points.
    Points,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Scheme {
    Circular,
    Realign,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    /// n_in,n_out,h,w,k[,same|valid]
    #[arg(long, default_value = "8,8,16,16,3,same")]
    layer: String,
    /// Input tensor fixture; random when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Filter fixture; random when absent.
    #[arg(long)]
    filters: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Compare against the golden model.
    #[arg(long)]
    verify: bool,
    /// Split kernels larger than the hardware modes.
    #[arg(long)]
    split: bool,
    #[arg(long, value_enum, default_value_t = Scheme::Circular)]
    scheme: Scheme,
    /// Saturate the running channel sum after every input channel.
    #[arg(long)]
    strict: bool,
    /// Write a cycle trace to <out>/trace.txt.
    #[arg(long)]
    trace: bool,
    /// Core voltage used to convert cycles to time.
    #[arg(long, default_value_t = 1.2)]
    vdd: f64,
}

#[derive(Args, Debug, Serialize)]
struct NetworkArgs {
    /// Builtin name or fixture path.
    #[arg(value_name = "NETWORK", required_unless_present = "network")]
    name: Option<String>,
    #[arg(long, conflicts_with = "name")]
    network: Option<String>,
    #[arg(long, default_value_t = 1.2)]
    vdd: f64,
    /// Per-layer rows instead of the network summary.
    #[arg(long)]
    per_layer: bool,
    /// Also run every layer bit-true with images divided by this factor.
    #[arg(long, value_name = "FACTOR")]
    bit_true: Option<usize>,
    /// With --bit-true: compare every layer against the golden model.
    #[arg(long, requires = "bit_true")]
    verify: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    /// Networks (builtin names or paths); all builtins when absent.
    #[arg(long, value_delimiter = ',')]
    network: Vec<String>,
    /// Core voltages; all calibrated voltages of the variant when absent.
    #[arg(long, value_delimiter = ',')]
    vdd: Vec<f64>,
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Mismatch(String),
}

impl From<bwconv_core::Error> for Failure {
    fn from(e: bwconv_core::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Invalid(e.to_string())
    }
}

type Outcome<T = ()> = Result<T, Failure>;

struct Ctx {
    calibration: Calibration,
    config: Option<AccelConfig>,
    variant: String,
}

impl Ctx {
    fn point(&self, vdd: f64) -> Outcome<OperatingPoint> {
        Ok(self.calibration.lookup(&self.variant, vdd)?)
    }

    fn accel(&self, pt: &OperatingPoint) -> AccelConfig {
        self.config.clone().unwrap_or_else(|| pt.accel_config())
    }
}

fn parse_layer(s: &str) -> Outcome<(usize, usize, usize, usize, usize, Padding)> {
    let f: Vec<&str> = s.split(',').map(str::trim).collect();
    if f.len() != 5 && f.len() != 6 {
        return Err(Failure::Invalid(format!("--layer {s:?}: expected n_in,n_out,h,w,k[,padding]")));
    }
    let n = |i: usize| {
        f[i].parse::<usize>()
            .map_err(|_| Failure::Invalid(format!("--layer: bad number {:?}", f[i])))
    };
    let padding = match f.get(5) {
        Some(p) => p.parse::<Padding>()?,
        None => Padding::ZeroPad,
    };
    Ok((n(0)?, n(1)?, n(2)?, n(3)?, n(4)?, padding))
}

#[derive(Serialize)]
struct SimSummary {
    layer: String,
    k: usize,
    padding: String,
    passes: u64,
    total_cycles: u64,
    preload_cycles: u64,
    compute_cycles: u64,
    idle_cycles: u64,
    tile_overlap_cycles: u64,
    ops: u64,
    offchip_adds: u64,
    throughput_gops: f64,
    time_us: f64,
    saturations_q7_9: u64,
    saturations_q2_9: u64,
    max_active_banks: usize,
    verified: Option<bool>,
    mismatches: Option<usize>,
}

fn simulate(ctx: &Ctx, a: &SimulateArgs, sink: &mut Sink) -> Outcome {
    let pt = ctx.point(a.vdd)?;
    let cfg = ctx.accel(&pt);
    cfg.validate()?;
    let (n_in, n_out, h, w, k, padding) = parse_layer(&a.layer)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let input = match &a.input {
        Some(p) => io::read_tensor(p)?,
        None => FeatureMap::random(n_in, h, w, &mut rng),
    };
    let filters = match &a.filters {
        Some(p) => io::read_filters(p)?,
        None => FilterSet::random(n_out, input.channels(), k, &mut rng),
    };
    if cfg.mode(filters.kernel_size()).is_err() && !a.split {
        return Err(Failure::Invalid(format!(
            "kernel size {} has no accelerator mode; pass --split",
            filters.kernel_size()
        )));
    }
    let affine: Vec<ChannelAffine> = (0..filters.n_out()).map(|_| ChannelAffine::random(&mut rng)).collect();
    let opts = SimOptions {
        scheme: match a.scheme {
            Scheme::Circular => WindowScheme::CircularShift,
            Scheme::Realign => WindowScheme::Realign,
        },
        accumulation: if a.strict { Accumulation::Strict } else { Accumulation::Readout },
        trace: a.trace,
    };
    let trace_lines = if a.trace {
        if sink.out.is_none() {
            return Err(Failure::Invalid("--trace needs --out".into()));
        }
        if cfg.mode(filters.kernel_size()).is_err() {
            return Err(Failure::Invalid("--trace needs a kernel the hardware supports directly".into()));
        }
        Some(bwconv_core::accel::simulate_layer_block(&cfg, &input, &filters, &affine, padding, &opts)?.trace)
    } else {
        None
    };
    let run = simulate_layer(&cfg, &input, &filters, &affine, padding, &opts)?;
    let (verified, mismatches) = if a.verify {
        let gold = conv_layer_golden_with(&input, &filters, &affine, padding, opts.accumulation)?;
        let bad = run
            .output
            .raw()
            .iter()
            .zip(gold.output.raw())
            .filter(|(x, y)| x != y)
            .count();
        (Some(bad == 0), Some(bad))
    } else {
        (None, None)
    };
    let r = &run.report;
    let summary = SimSummary {
        layer: format!("{}->{} {}x{}", filters.n_in(), filters.n_out(), input.height(), input.width()),
        k: filters.kernel_size(),
        padding: padding.to_string(),
        passes: r.passes,
        total_cycles: r.total_cycles,
        preload_cycles: r.preload_cycles,
        compute_cycles: r.compute_cycles,
        idle_cycles: r.idle_cycles,
        tile_overlap_cycles: r.tile_overlap_cycles,
        ops: r.ops,
        offchip_adds: run.offchip_adds,
        throughput_gops: r.throughput(pt.f) / 1e9,
        time_us: r.total_cycles as f64 / pt.f * 1e6,
        saturations_q7_9: run.saturations.q7_9,
        saturations_q2_9: run.saturations.q2_9,
        max_active_banks: r.max_active_banks,
        verified,
        mismatches,
    };
    sink.emit("simulate", &output::key_values(&summary), &summary)?;
    sink.file("output.fxt", &io::format_tensor(&run.output))?;
    sink.file("banks.txt", &r.histogram_lines())?;
    if let Some(t) = trace_lines {
        sink.file("trace.txt", &(t.join("\n") + "\n"))?;
    }
    match mismatches {
        Some(n) if n > 0 => Err(Failure::Mismatch(format!("{n} output samples differ from the golden model"))),
        _ => Ok(()),
    }
}

fn network(ctx: &Ctx, a: &NetworkArgs, sink: &mut Sink) -> Outcome {
    let name = a.name.as_deref().or(a.network.as_deref()).expect("clap requires one");
    let net = NetworkSpec::resolve(name)?;
    let pt = ctx.point(a.vdd)?;
    let cfg = ctx.accel(&pt);
    cfg.validate()?;
    let rep = evaluate_network(&net, &cfg, &pt, &ActivityModel::default())?;
    if a.per_layer {
        sink.emit("network", &output::layer_rows(&rep), &rep)?;
    } else {
        sink.emit("network", &output::network_rows(std::slice::from_ref(&rep)), &rep)?;
    }
    if let Some(factor) = a.bit_true {
        bit_true_network(&cfg, &net.downscaled(factor), a, sink)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct BitTrueLayer {
    layer: String,
    shape: String,
    cycles: u64,
    mismatches: Option<usize>,
}

fn bit_true_network(cfg: &AccelConfig, net: &NetworkSpec, a: &NetworkArgs, sink: &mut Sink) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut rows = Vec::new();
    let mut bad_total = 0;
    for l in &net.layers {
        let s = l.spec;
        let input = FeatureMap::random(s.n_in, s.h_im, s.w_im, &mut rng);
        let filters = FilterSet::random(s.n_out, s.n_in, s.h_k, &mut rng);
        let affine: Vec<ChannelAffine> = (0..s.n_out).map(|_| ChannelAffine::random(&mut rng)).collect();
        let run = simulate_layer(cfg, &input, &filters, &affine, s.padding, &SimOptions::default())?;
        let mismatches = if a.verify {
            let gold = conv_layer_golden_with(&input, &filters, &affine, s.padding, Accumulation::Readout)?;
            let bad = run.output.raw().iter().zip(gold.output.raw()).filter(|(x, y)| x != y).count();
            bad_total += bad;
            Some(bad)
        } else {
            None
        };
        log::info!("{}: {} cycles", l.name, run.report.total_cycles);
        rows.push(BitTrueLayer {
            layer: l.name.clone(),
            shape: format!("{}->{} {}x{} k{}", s.n_in, s.n_out, s.h_im, s.w_im, s.h_k),
            cycles: run.report.total_cycles,
            mismatches,
        });
    }
    sink.emit("bit_true", &output::records(&rows), &rows)?;
    if bad_total > 0 {
        return Err(Failure::Mismatch(format!("{bad_total} samples differ from the golden model")));
    }
    Ok(())
}

fn sweep(ctx: &Ctx, a: &SweepArgs, sink: &mut Sink) -> Outcome {
    let names: Vec<String> = if a.network.is_empty() {
        NetworkSpec::builtin_names().into_iter().map(String::from).collect()
    } else {
        a.network.clone()
    };
    let volts: Vec<f64> = if a.vdd.is_empty() {
        ctx.calibration.points(&ctx.variant).iter().map(|p| p.v_core).collect()
    } else {
        a.vdd.clone()
    };
    if volts.is_empty() {
        return Err(Failure::Invalid(format!("variant {:?} has no calibrated points", ctx.variant)));
    }
    let nets = names.iter().map(|n| NetworkSpec::resolve(n)).collect::<Result<Vec<_>, _>>()?;
    let mut reports = Vec::new();
    for v in volts {
        let pt = ctx.point(v)?;
        let cfg = ctx.accel(&pt);
        cfg.validate()?;
        for net in &nets {
            reports.push(evaluate_network(net, &cfg, &pt, &ActivityModel::default())?);
        }
    }
    sink.emit("sweep", &output::network_rows(&reports), &reports)?;
    Ok(())
}

#[derive(Serialize)]
struct PointRow {
    variant: String,
    label: String,
    v_core: f64,
    f_mhz: f64,
    p_core_mw: f64,
    peak_gops: f64,
    core_tops_per_w: f64,
    gops_per_mge: Option<f64>,
}

fn points(ctx: &Ctx, sink: &mut Sink) -> Outcome {
    let rows: Vec<PointRow> = ctx
        .calibration
        .all()
        .iter()
        .map(|p| PointRow {
            variant: p.variant.clone(),
            label: p.label.clone(),
            v_core: p.v_core,
            f_mhz: p.f / 1e6,
            p_core_mw: p.p_core_active * 1e3,
            peak_gops: p.peak_throughput() / 1e9,
            core_tops_per_w: p.core_efficiency() / 1e12,
            gops_per_mge: p.area_efficiency().map(|a| a / 1e9),
        })
        .collect();
    sink.emit("points", &output::records(&rows), &rows)?;
    Ok(())
}

fn run(cli: &Cli) -> Outcome {
    let calibration = match &cli.calibration {
        Some(p) => Calibration::load(p)?,
        None => Calibration::builtin(),
    };
    if calibration.points(&cli.variant).is_empty() {
        return Err(Failure::Invalid(format!(
            "unknown variant {:?} (known: {})",
            cli.variant,
            calibration.variants().join(", ")
        )));
    }
    let config = cli.config.as_deref().map(AccelConfig::load).transpose()?;
    let ctx = Ctx {
        calibration,
        config,
        variant: cli.variant.clone(),
    };
    let (command, args) = match &cli.cmd {
        Cmd::Simulate(a) => ("simulate", serde_json::to_value(a)),
        Cmd::Network(a) => ("network", serde_json::to_value(a)),
        Cmd::Sweep(a) => ("sweep", serde_json::to_value(a)),
        Cmd::Points => ("points", Ok(serde_json::Value::Null)),
    };
    let manifest = Manifest::new(
        command,
        &cli.variant,
        cli.config.as_deref().map(Path::to_path_buf),
        cli.calibration.as_deref().map(Path::to_path_buf),
        args.map_err(|e| Failure::Invalid(e.to_string()))?,
    );
    let mut sink = Sink::new(cli.format, cli.out.clone(), manifest)?;
    let result = match &cli.cmd {
        Cmd::Simulate(a) => simulate(&ctx, a, &mut sink),
        Cmd::Network(a) => network(&ctx, a, &mut sink),
        Cmd::Sweep(a) => sweep(&ctx, a, &mut sink),
        Cmd::Points => points(&ctx, &mut sink),
    };
    sink.finish(result.is_ok())?;
    result
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Mismatch(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(2)
        }
    }
}
