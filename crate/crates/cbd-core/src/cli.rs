//! Command implementations behind the `cbd` binary: expand (sparsity
//! reports), compress (layer containers plus reports), eval (J/bottleneck
//! sweeps on a conv stack), and selftest. All artifacts are written
//! atomically under the output directory; progress goes to stderr.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::compress::{
    compress_layer_with_info, layer_plane_set, layer_report, model_report, write_layer,
    CompressOptions, DecomposeMode, LayerReport,
};
use crate::error::{CbdError, Result};
use crate::quant::plane_sparsity;
use crate::refnet::{evaluate, EvalPoint, FeatureMap, ToyModel};
use crate::selftest::{run_selftest, SelftestReport};
use crate::store::{write_atomic, LayerSpec, ModelManifest, TensorF32};

// ── Shared config ────────────────────────────────────────────────────────

/// Inputs common to the manifest-driven commands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub out: PathBuf,
    pub options: CompressOptions,
}

/// Inputs to the sweep command. Without a manifest the built-in seeded conv
/// stack is evaluated.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub manifest: Option<PathBuf>,
    pub out: PathBuf,
    pub options: CompressOptions,
    pub js: Vec<u32>,
    pub bottlenecks: Vec<f64>,
    pub seed: u64,
}

// ── Flag parsing helpers ─────────────────────────────────────────────────

/// Parses an inclusive bit-width range written `LO..HI`.
pub fn parse_bit_range(s: &str) -> Result<Vec<u32>> {
    let err = || CbdError::InvalidConfig(format!("expected LO..HI bit range, got {s:?}"));
    let (lo, hi) = s.split_once("..").ok_or_else(err)?;
    let lo: u32 = lo.trim().parse().map_err(|_| err())?;
    let hi: u32 = hi.trim().parse().map_err(|_| err())?;
    if lo > hi {
        return Err(err());
    }
    Ok((lo..=hi).collect())
}

/// Parses a comma-separated list of bottleneck fractions.
pub fn parse_fraction_list(s: &str) -> Result<Vec<f64>> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CbdError::InvalidConfig(format!("bad fraction {p:?} in {s:?}")))
        })
        .collect::<Result<_>>()?;
    if vals.is_empty() {
        return Err(CbdError::InvalidConfig("empty fraction list".into()));
    }
    for &v in &vals {
        if !(v > 0.0 && v <= 1.0) {
            return Err(CbdError::InvalidConfig(format!("fraction {v} outside (0, 1]")));
        }
    }
    Ok(vals)
}

// ── Output helpers ───────────────────────────────────────────────────────

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

fn ensure_out_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| CbdError::io(out, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

fn group_label(g: crate::quant::PlaneGroup) -> String {
    format!("{g:?}").to_lowercase()
}

fn opt_field<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

// ── expand ───────────────────────────────────────────────────────────────

/// Expands every manifest layer into bit-planes (no factoring) and writes
/// per-plane occupancy and rank to `sparsity.csv`.
pub fn cmd_expand(cfg: &RunConfig) -> Result<()> {
    let manifest = ModelManifest::load(&cfg.manifest)?;
    let base = cfg.manifest.parent().unwrap_or(Path::new("."));
    let layers = manifest.load_layers(base)?;
    ensure_out_dir(&cfg.out)?;

    let opt = CompressOptions { mode: DecomposeMode::Disabled, ..cfg.options };
    let mut csv = String::from("layer,group,exponent,ones,fraction,rank\n");
    for (spec, tensor) in &layers {
        let (layer, info) = compress_layer_with_info(tensor, spec, &opt)?;
        let set = layer_plane_set(&layer)?;
        let stats = plane_sparsity(&set, true);
        for st in &stats {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                csv_field(&spec.name),
                group_label(st.group),
                opt_field(st.exponent),
                st.ones,
                st.fraction,
                opt_field(st.rank),
            );
        }
        eprintln!(
            "expand {}: {}x{} J={} alpha={} ({} planes)",
            spec.name,
            layer.rows,
            layer.cols,
            layer.j,
            info.alpha,
            stats.len()
        );
    }
    write_text(&cfg.out.join("sparsity.csv"), &csv)?;
    Ok(())
}

// ── compress ─────────────────────────────────────────────────────────────

fn check_stem_collisions(layers: &[(LayerSpec, TensorF32)]) -> Result<()> {
    let mut seen = HashSet::new();
    for (spec, _) in layers {
        if !seen.insert(file_stem(&spec.name)) {
            return Err(CbdError::InvalidConfig(format!(
                "layer names collide as file names: {}",
                spec.name
            )));
        }
    }
    Ok(())
}

fn layers_csv(reports: &[LayerReport]) -> String {
    let mut csv = String::from(
        "layer,rows,cols,j,q,alpha,w_max,payload_bits,overhead_bits,dense_equivalent_bits,\
         fp32_bits,effective_bitrate,effective_bitrate_with_overhead,max_abs_error,mse,\
         achieved_rank,rank_target,alpha_exact\n",
    );
    for r in reports {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            csv_field(&r.name),
            r.rows,
            r.cols,
            r.j,
            r.q,
            r.alpha,
            r.w_max,
            r.bits.payload_bits,
            r.bits.overhead_bits,
            r.bits.dense_equivalent_bits,
            r.bits.fp32_bits,
            r.effective_bitrate,
            r.effective_bitrate_with_overhead,
            opt_field(r.error.map(|e| e.max_abs)),
            opt_field(r.error.map(|e| e.mse)),
            opt_field(r.alpha_search.map(|a| a.achieved_rank)),
            opt_field(r.alpha_search.map(|a| a.c_target)),
            opt_field(r.alpha_search.map(|a| a.exact)),
        );
    }
    csv
}

fn planes_csv(reports: &[LayerReport]) -> String {
    let mut csv =
        String::from("layer,group,exponent,ones,fraction,factored,rank,integer_exact,bits\n");
    for r in reports {
        for p in &r.planes {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{}",
                csv_field(&r.name),
                group_label(p.group),
                opt_field(p.exponent),
                p.ones,
                p.fraction,
                p.factored,
                opt_field(p.rank),
                opt_field(p.integer_exact),
                p.bits,
            );
        }
    }
    csv
}

/// Compresses every manifest layer to `<name>.cbdl` and writes
/// `report.json`, `layers.csv`, and `planes.csv`.
pub fn cmd_compress(cfg: &RunConfig) -> Result<()> {
    let manifest = ModelManifest::load(&cfg.manifest)?;
    let base = cfg.manifest.parent().unwrap_or(Path::new("."));
    let layers = manifest.load_layers(base)?;
    check_stem_collisions(&layers)?;
    ensure_out_dir(&cfg.out)?;

    let mut reports = Vec::with_capacity(layers.len());
    for (spec, tensor) in &layers {
        let (layer, info) = compress_layer_with_info(tensor, spec, &cfg.options)?;
        let path = cfg.out.join(format!("{}.cbdl", file_stem(&spec.name)));
        write_layer(&layer, &path)?;
        let report = layer_report(&layer, Some(tensor), Some(info))?;
        eprintln!(
            "compress {}: {:.3} bits/weight (dense {:.3}), max err {:.3e} -> {}",
            spec.name,
            report.effective_bitrate,
            report.bits.dense_equivalent_bits as f64 / (layer.rows * layer.cols).max(1) as f64,
            report.error.map(|e| e.max_abs).unwrap_or(0.0),
            path.display(),
        );
        reports.push(report);
    }
    write_text(&cfg.out.join("layers.csv"), &layers_csv(&reports))?;
    write_text(&cfg.out.join("planes.csv"), &planes_csv(&reports))?;
    let model = model_report(reports);
    eprintln!(
        "model: {:.3} bits/weight over {} layers",
        model.effective_bitrate,
        model.layers.len()
    );
    write_json(&cfg.out.join("report.json"), &model)?;
    Ok(())
}

// ── eval ─────────────────────────────────────────────────────────────────

#[derive(Serialize)]
struct EvalDocument<'a> {
    seed: u64,
    js: &'a [u32],
    bottlenecks: &'a [f64],
    sign_mode: crate::quant::SignMode,
    mode: DecomposeMode,
    input: (usize, usize, usize),
    points: &'a [EvalPoint],
}

const EVAL_INPUT_SIZE: usize = 16;

fn divergence_csv(points: &[EvalPoint]) -> String {
    let mut csv = String::from("j,bottleneck,max_abs,mse\n");
    for p in points {
        let _ = writeln!(csv, "{},{},{},{}", p.j, p.bottleneck, p.divergence.max_abs, p.divergence.mse);
    }
    csv
}

fn bitrate_csv(points: &[EvalPoint]) -> String {
    let mut csv = String::from("bottleneck,j,effective_bitrate\n");
    for p in points {
        let _ = writeln!(csv, "{},{},{}", p.bottleneck, p.j, p.effective_bitrate);
    }
    csv
}

/// Sweeps (J, bottleneck) over a conv stack, writing `eval.json`,
/// `divergence_vs_j.csv`, and `bitrate_vs_b.csv`. The model comes from the
/// manifest when given (its layers must chain), else from the built-in
/// seeded stack; the input batch is seeded either way.
pub fn cmd_eval(cfg: &EvalConfig) -> Result<()> {
    let layers: Vec<(LayerSpec, TensorF32)> = match &cfg.manifest {
        Some(path) => {
            let manifest = ModelManifest::load(path)?;
            let base = path.parent().unwrap_or(Path::new("."));
            manifest.load_layers(base)?
        }
        None => ToyModel::seeded(cfg.seed).layers,
    };
    let channels = layers
        .first()
        .map(|(s, _)| s.n)
        .ok_or_else(|| CbdError::InvalidConfig("no layers to evaluate".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));
    let x = FeatureMap::from_fn(channels, EVAL_INPUT_SIZE, EVAL_INPUT_SIZE, |_, _, _| {
        rng.random_range(-1.0..1.0)
    });
    ensure_out_dir(&cfg.out)?;

    let points = evaluate(&layers, &x, &cfg.js, &cfg.bottlenecks, &cfg.options)?;
    for p in &points {
        eprintln!(
            "eval J={} b={}: divergence {:.3e}, {:.3} bits/weight",
            p.j, p.bottleneck, p.divergence.max_abs, p.effective_bitrate
        );
    }
    let doc = EvalDocument {
        seed: cfg.seed,
        js: &cfg.js,
        bottlenecks: &cfg.bottlenecks,
        sign_mode: cfg.options.sign_mode,
        mode: cfg.options.mode,
        input: (channels, EVAL_INPUT_SIZE, EVAL_INPUT_SIZE),
        points: &points,
    };
    write_json(&cfg.out.join("eval.json"), &doc)?;
    write_text(&cfg.out.join("divergence_vs_j.csv"), &divergence_csv(&points))?;
    write_text(&cfg.out.join("bitrate_vs_b.csv"), &bitrate_csv(&points))?;
    Ok(())
}

// ── selftest ─────────────────────────────────────────────────────────────

/// Runs the verification suites, printing one line per suite. A report is
/// written to `selftest.json` when an output directory is given.
pub fn cmd_selftest(seed: u64, out: Option<&Path>) -> Result<SelftestReport> {
    let report = run_selftest(seed);
    for suite in &report.suites {
        eprintln!(
            "selftest {}: {} ({} cases, {} ms)",
            suite.name,
            if suite.ok() { "ok" } else { "FAILED" },
            suite.cases,
            suite.millis
        );
        for f in &suite.failures {
            eprintln!("  {f}");
        }
    }
    if let Some(dir) = out {
        ensure_out_dir(dir)?;
        write_json(&dir.join("selftest.json"), &report)?;
    }
    Ok(report)
}

// ── Tests ────────────────────────────────────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bit_range_parsing() {
        assert_eq!(parse_bit_range("3..6").unwrap(), vec![3, 4, 5, 6]);
        assert_eq!(parse_bit_range("7..7").unwrap(), vec![7]);
        assert_eq!(parse_bit_range(" 2 .. 4 ").unwrap(), vec![2, 3, 4]);
        assert!(parse_bit_range("9..3").is_err());
        assert!(parse_bit_range("7").is_err());
        assert!(parse_bit_range("a..b").is_err());
    }

    #[test]
    fn fraction_list_parsing() {
        assert_eq!(parse_fraction_list("0.1,0.5,1.0").unwrap(), vec![0.1, 0.5, 1.0]);
        assert_eq!(parse_fraction_list(" 0.3 ").unwrap(), vec![0.3]);
        assert!(parse_fraction_list("0.0").is_err());
        assert!(parse_fraction_list("1.5").is_err());
        assert!(parse_fraction_list("0.2,,0.3").is_err());
    }

    #[test]
    fn csv_escaping() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn file_stems_are_safe() {
        assert_eq!(file_stem("conv1"), "conv1");
        assert_eq!(file_stem("block/conv 1"), "block_conv_1");
        assert_eq!(file_stem("a.b-c_d"), "a.b-c_d");
    }
}
