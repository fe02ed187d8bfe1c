//! End-to-end checks of the `cbd` binary: exit codes, output files, and
//! rerun determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cbd_core::compress::decompress_layer;
use cbd_core::compress::read_layer;
use cbd_core::store::{save_tensor, LayerSpec, ManifestLayer, ModelManifest, TensorF32};

fn cbd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cbd"))
        .args(args)
        .output()
        .expect("failed to spawn cbd")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_model(dir: &Path) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(91);
    let conv = LayerSpec::conv("conv1", 4, 6, 3, 1, 1);
    let fc = LayerSpec::fc("fc1", 6, 8);
    for (spec, file) in [(&conv, "conv1.cbdt"), (&fc, "fc1.cbdt")] {
        let shape = spec.expected_shape();
        let len: usize = shape.iter().product();
        let t = TensorF32::new(shape, (0..len).map(|_| rng.random_range(-1.0f32..1.0)).collect())
            .unwrap();
        save_tensor(&t, dir.join(file)).unwrap();
    }
    let manifest = ModelManifest {
        layers: vec![
            ManifestLayer { spec: conv, file: "conv1.cbdt".into() },
            ManifestLayer { spec: fc, file: "fc1.cbdt".into() },
        ],
    };
    let path = dir.join("model.json");
    manifest.save(&path).unwrap();
    path
}

fn read_bytes(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

#[test]
fn selftest_exits_zero() {
    let out = cbd(&["selftest", "--seed", "5"]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("ok"));
}

#[test]
fn compress_writes_outputs_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_model(tmp.path());
    let m = manifest.to_str().unwrap();

    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    for out_dir in [&out_a, &out_b] {
        let out = cbd(&["compress", "--manifest", m, "--out", out_dir.to_str().unwrap()]);
        assert!(out.status.success(), "stderr: {}", stderr_of(&out));
    }

    for name in ["conv1.cbdl", "fc1.cbdl", "layers.csv", "planes.csv", "report.json"] {
        let a = read_bytes(&out_a.join(name));
        assert!(!a.is_empty(), "{name} is empty");
        assert_eq!(a, read_bytes(&out_b.join(name)), "{name} differs between reruns");
    }

    // The containers decode and reconstruct to the declared shape.
    let layer = read_layer(out_a.join("conv1.cbdl")).unwrap();
    assert_eq!(layer.spec.name, "conv1");
    let w = decompress_layer(&layer).unwrap();
    assert_eq!(w.shape(), &[4, 3, 3, 6]);

    let report = read_bytes(&out_a.join("report.json"));
    let json: serde_json::Value = serde_json::from_slice(&report).unwrap();
    assert_eq!(json["layers"].as_array().unwrap().len(), 2);
    assert!(json["payload_bits"].as_u64().unwrap() > 0);
}

#[test]
fn expand_writes_per_plane_sparsity() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_model(tmp.path());
    let out_dir = tmp.path().join("planes");
    let out = cbd(&[
        "expand",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let csv = String::from_utf8(read_bytes(&out_dir.join("sparsity.csv"))).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("layer,group,exponent,ones,fraction,rank"));
    // Two layers at the default J = 7 in sign-plane mode: 6 magnitude planes
    // plus one sign plane each.
    assert_eq!(lines.count(), 2 * 7);
    assert!(csv.contains("conv1,magnitude,"));
    assert!(csv.contains("fc1,sign,"));
}

#[test]
fn eval_sweeps_builtin_model() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("eval");
    let out = cbd(&[
        "eval",
        "--out",
        out_dir.to_str().unwrap(),
        "--seed",
        "3",
        "--sweep-j",
        "3..4",
        "--sweep-b",
        "0.5",
    ]);
    assert!(out.status.success(), "stderr: {}", stderr_of(&out));

    let doc: serde_json::Value =
        serde_json::from_slice(&read_bytes(&out_dir.join("eval.json"))).unwrap();
    assert_eq!(doc["seed"].as_u64(), Some(3));
    assert_eq!(doc["points"].as_array().unwrap().len(), 2);

    let div = String::from_utf8(read_bytes(&out_dir.join("divergence_vs_j.csv"))).unwrap();
    assert_eq!(div.lines().next(), Some("j,bottleneck,max_abs,mse"));
    assert_eq!(div.lines().count(), 3);
    let bits = String::from_utf8(read_bytes(&out_dir.join("bitrate_vs_b.csv"))).unwrap();
    assert_eq!(bits.lines().next(), Some("bottleneck,j,effective_bitrate"));
}

#[test]
fn missing_tensor_error_names_the_layer() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = ModelManifest {
        layers: vec![ManifestLayer {
            spec: LayerSpec::fc("orphan", 4, 4),
            file: "nowhere.cbdt".into(),
        }],
    };
    let path = tmp.path().join("model.json");
    manifest.save(&path).unwrap();
    let out = cbd(&[
        "compress",
        "--manifest",
        path.to_str().unwrap(),
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(stderr_of(&out).contains("orphan"), "stderr: {}", stderr_of(&out));
}

#[test]
fn invalid_flags_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = write_model(tmp.path());
    let m = manifest.to_str().unwrap();
    let out_dir = tmp.path().join("out");
    let o = out_dir.to_str().unwrap();

    // Plane count below the supported minimum.
    let out = cbd(&["compress", "--manifest", m, "--out", o, "--bits", "1"]);
    assert!(!out.status.success());

    // Bottleneck outside (0, 1].
    let out = cbd(&["compress", "--manifest", m, "--out", o, "--bottleneck", "0"]);
    assert!(!out.status.success());

    // Backwards sweep range.
    let out = cbd(&["eval", "--out", o, "--sweep-j", "9..3"]);
    assert!(!out.status.success());

    // Unknown subcommand.
    let out = cbd(&["shrink"]);
    assert!(!out.status.success());
}
