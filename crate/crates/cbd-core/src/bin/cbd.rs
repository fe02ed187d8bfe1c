use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use cbd_core::cli::{
    cmd_compress, cmd_eval, cmd_expand, cmd_selftest, parse_bit_range, parse_fraction_list,
    EvalConfig, RunConfig,
};
use cbd_core::compress::{CompressOptions, DecomposeMode};
use cbd_core::quant::SignMode;

/// Bit-plane compression toolkit for convolutional weight tensors.
#[derive(Parser)]
#[command(name = "cbd", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Expand manifest layers into bit-planes and report per-plane sparsity.
    Expand(CommonArgs),
    /// Compress manifest layers into .cbdl containers with reports.
    Compress(CommonArgs),
    /// Sweep bit width and bottleneck, measuring divergence and bitrate.
    Eval(EvalArgs),
    /// Run the built-in verification suites.
    Selftest(SelftestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SignModeArg {
    /// Magnitude planes plus one dense sign plane.
    Plane,
    /// Separate positive and negative expansions.
    Split,
}

#[derive(Clone, Copy, ValueEnum)]
enum GateArg {
    /// Factor a plane only when the pair is smaller.
    On,
    /// Store every plane densely.
    Off,
}

#[derive(Args)]
struct CommonArgs {
    /// Model manifest (JSON).
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    knobs: Knobs,
}

#[derive(Args)]
struct Knobs {
    /// Planes per weight (J).
    #[arg(long = "bits", default_value_t = 7)]
    bits: u32,
    /// Rank-target fraction of min(h, w).
    #[arg(long, default_value_t = 0.3)]
    bottleneck: f64,
    /// How signs are stored.
    #[arg(long, value_enum, default_value_t = SignModeArg::Plane)]
    sign_mode: SignModeArg,
    /// Size gate for plane factorization.
    #[arg(long, value_enum, default_value_t = GateArg::On)]
    gate: GateArg,
}

#[derive(Args)]
struct EvalArgs {
    /// Model manifest; omitted, the built-in seeded stack is used.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    knobs: Knobs,
    /// Seed for the built-in stack and the input batch.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Inclusive bit-width sweep, e.g. 3..9. Defaults to --bits alone.
    #[arg(long = "sweep-j")]
    sweep_j: Option<String>,
    /// Comma-separated bottleneck sweep, e.g. 0.1,0.3,0.5.
    #[arg(long = "sweep-b")]
    sweep_b: Option<String>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Seed for the randomized suites.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for selftest.json; nothing is written when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Knobs {
    fn options(&self) -> CompressOptions {
        CompressOptions {
            j: self.bits,
            bottleneck: self.bottleneck,
            sign_mode: match self.sign_mode {
                SignModeArg::Plane => SignMode::Plane,
                SignModeArg::Split => SignMode::Split,
            },
            mode: match self.gate {
                GateArg::On => DecomposeMode::Gated,
                GateArg::Off => DecomposeMode::Disabled,
            },
        }
    }
}

fn run() -> anyhow::Result<()> {
    match Cli::parse().cmd {
        Cmd::Expand(a) => {
            cmd_expand(&RunConfig { manifest: a.manifest, out: a.out, options: a.knobs.options() })?
        }
        Cmd::Compress(a) => {
            cmd_compress(&RunConfig { manifest: a.manifest, out: a.out, options: a.knobs.options() })?
        }
        Cmd::Eval(a) => {
            let js = match &a.sweep_j {
                Some(s) => parse_bit_range(s)?,
                None => vec![a.knobs.bits],
            };
            let bottlenecks = match &a.sweep_b {
                Some(s) => parse_fraction_list(s)?,
                None => vec![a.knobs.bottleneck],
            };
            cmd_eval(&EvalConfig {
                manifest: a.manifest,
                out: a.out,
                options: a.knobs.options(),
                js,
                bottlenecks,
                seed: a.seed,
            })?
        }
        Cmd::Selftest(a) => {
            let report = cmd_selftest(a.seed, a.out.as_deref())?;
            if !report.ok() {
                let failed: Vec<&str> = report
                    .suites
                    .iter()
                    .filter(|s| !s.ok())
                    .map(|s| s.name.as_str())
                    .collect();
                anyhow::bail!("selftest failed: {}", failed.join(", "));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
