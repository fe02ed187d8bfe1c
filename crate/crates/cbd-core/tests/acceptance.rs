//! Acceptance checks, one test per criterion. Each prints a `PASS` line with
//! its elapsed time and fails if it overruns its time budget.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cbd_core::alpha::{rank_prefix_profile, search_alpha};
use cbd_core::compress::{
    bit_breakdown, compress_layer, op_counts, CompressOptions, CompressedLayer, DecomposeMode,
    PlaneRecord, RecordData,
};
use cbd_core::error::CbdError;
use cbd_core::gf2::{verify_lossless, Gf2Matrix};
use cbd_core::quant::{
    code_value, expand, magnitude_code, normalize, plane_sparsity, SignMode,
};
use cbd_core::refnet::{
    conv2d, discrepancy_kernel, forward_composite, forward_compressed, forward_decomposed,
    FeatureMap, ToyModel,
};
use cbd_core::selftest::{
    count_direct_multiplies, count_factored_multiplies, span_rank, threshold_scan_alpha,
};
use cbd_core::store::{LayerSpec, MatrixF32, TensorF32};

fn finish(n: u32, name: &str, started: Instant, budget_s: f64) {
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        elapsed < budget_s,
        "criterion {n} overran its budget: {elapsed:.2}s >= {budget_s}s"
    );
    println!("acceptance {n:02} {name}: PASS ({elapsed:.2}s)");
}

fn every_3x3() -> impl Iterator<Item = Gf2Matrix> {
    (0u32..512).map(|bits| Gf2Matrix::from_fn(3, 3, |r, c| (bits >> (r * 3 + c)) & 1 == 1))
}

fn random_gf2(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Gf2Matrix {
    let density = rng.random_range(0.02..0.98);
    Gf2Matrix::from_fn(rows, cols, |_, _| rng.random_bool(density))
}

#[test]
fn a01_factorization_losslessness() {
    let started = Instant::now();
    let check = |m: &Gf2Matrix| {
        let f = m.decompose();
        let v = verify_lossless(m, &f).unwrap();
        assert!(v.gf2_exact, "recomposition mismatch on {}x{}", m.rows(), m.cols());
        assert_eq!(f.b.mul_gf2(&f.c).unwrap(), *m);
    };
    for m in every_3x3() {
        check(&m);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..1000 {
        let rows = rng.random_range(1..=128);
        let cols = rng.random_range(1..=128);
        check(&random_gf2(&mut rng, rows, cols));
    }
    finish(1, "factorization-losslessness", started, 30.0);
}

#[test]
fn a02_rank_matches_enumeration() {
    let started = Instant::now();
    for m in every_3x3() {
        assert_eq!(m.rank(), span_rank(&m), "3x3 {m}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for i in 0..10_000 {
        let m = random_gf2(&mut rng, 4, 4);
        assert_eq!(m.rank(), span_rank(&m), "4x4 case {i}: {m}");
    }
    finish(2, "rank-vs-enumeration", started, 30.0);
}

#[test]
fn a03_quantization_error_bound() {
    let started = Instant::now();
    let samples = 100_000u32;
    for j in 3u32..=10 {
        for q in 0i32..=3 {
            let alpha = 2f64.powi(q);
            let bound = 2f64.powi(q + 1 - j as i32);
            for g in 0..=samples {
                let mag = alpha * f64::from(g) / f64::from(samples);
                let code = magnitude_code(mag, j, q);
                let err = (code_value(code, j, q) - mag).abs();
                assert!(err <= bound, "J={j} q={q} mag={mag}: err {err} > {bound}");
            }
        }
    }
    finish(3, "quantization-error-bound", started, 10.0);
}

#[test]
fn a04_rank_profile_continuity() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for _ in 0..100 {
        let rows = rng.random_range(1..=32);
        let cols = rng.random_range(1..=32);
        let w = MatrixF32::from_fn(rows, cols, |_, _| rng.random_range(0.0f32..1.0));
        let p = rank_prefix_profile(&w);
        assert_eq!(p[0], 0);
        assert_eq!(p.len(), rows * cols + 1);
        for (i, pair) in p.windows(2).enumerate() {
            assert!(
                pair[1].abs_diff(pair[0]) <= 1,
                "profile jumps by more than 1 at prefix {i}: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }
    finish(4, "rank-profile-continuity", started, 10.0);
}

#[test]
fn a05_alpha_search_matches_exhaustive_scan() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for i in 0..100 {
        let rows = rng.random_range(2..=16);
        let cols = rng.random_range(2..=16);
        // Strictly distinct positive values, shuffled.
        let mut vals: Vec<f32> = Vec::with_capacity(rows * cols);
        let mut v = 1.0f32;
        for _ in 0..rows * cols {
            v *= rng.random_range(0.9..0.999);
            vals.push(v);
        }
        for k in (1..vals.len()).rev() {
            vals.swap(k, rng.random_range(0..=k));
        }
        let w = MatrixF32 { rows, cols, data: vals };
        let c = rng.random_range(1..=rows.min(cols));
        let got = search_alpha(&w, c);
        let want = threshold_scan_alpha(&w, c);
        match (got, want) {
            (Ok(g), Some(w)) => assert_eq!(g, w, "case {i} ({rows}x{cols}, c={c})"),
            (Err(CbdError::DegenerateInput(_)), None) => {}
            (g, w) => panic!("case {i} ({rows}x{cols}, c={c}): {g:?} vs {w:?}"),
        }
    }
    finish(5, "alpha-search-vs-exhaustive", started, 10.0);
}

#[test]
fn a06_multiply_counts_and_break_even() {
    let started = Instant::now();
    let reference = op_counts(64, 64, 3, 32);
    assert_eq!(reference.direct, 36864);
    assert_eq!(reference.factored, 12288);
    assert_eq!(reference.ratio, (3, 1));
    assert_eq!(reference.speedup(), 3.0);
    assert_eq!(reference.break_even_c, (96, 1));
    let even = op_counts(64, 64, 3, 96);
    assert_eq!(even.direct, even.factored);
    assert!(!even.saves_ops());
    assert!(op_counts(64, 64, 3, 95).saves_ops());

    for &(n, m, k) in &[(64usize, 64usize, 3usize), (32, 16, 5), (3, 8, 3), (12, 20, 1), (1, 1, 1)] {
        for c in [1usize, 3, 7, 16, 48, 96, 128] {
            let fast = op_counts(n, m, k, c);
            assert_eq!(fast.direct, count_direct_multiplies(n, m, k), "(n={n},m={m},k={k})");
            assert_eq!(
                fast.factored,
                count_factored_multiplies(n, m, k, c),
                "(n={n},m={m},k={k},c={c})"
            );
        }
    }
    finish(6, "multiply-count-model", started, 5.0);
}

#[test]
fn a07_factored_storage_is_transparent() {
    let started = Instant::now();
    let model = ToyModel::seeded(707);
    let x = ToyModel::seeded_input(708, 16, 16);
    let mut outputs = Vec::new();
    for mode in [DecomposeMode::Gated, DecomposeMode::Unconditional, DecomposeMode::Disabled] {
        let opt = CompressOptions { mode, ..Default::default() };
        let layers: Vec<_> = model
            .layers
            .iter()
            .map(|(s, w)| compress_layer(w, s, &opt).unwrap())
            .collect();
        let outs = forward_compressed(&x, &layers).unwrap();
        outputs.push(outs.last().unwrap().clone());
    }
    assert_eq!(outputs[0].data, outputs[1].data, "gated vs unconditional outputs differ");
    assert_eq!(outputs[1].data, outputs[2].data, "unconditional vs dense outputs differ");
    finish(7, "factored-storage-transparency", started, 30.0);
}

/// Split-mode layer whose planes are hand-built factor pairs on the unit
/// dyadic grid (w_max = α = 1), so both forward paths stay exact in f64.
fn factor_built_layer(
    name: &str,
    n: usize,
    m: usize,
    k: usize,
    j: u32,
    rng: &mut ChaCha8Rng,
    exact_only: bool,
) -> CompressedLayer {
    let spec = LayerSpec::conv(name, n, m, k, 1, 1);
    let (rows, cols) = spec.plane_dims();
    let planes = |rng: &mut ChaCha8Rng, force_exact: bool| -> Vec<PlaneRecord> {
        (0..j - 1)
            .map(|idx| {
                if !force_exact && idx == 0 {
                    // Overlapping rank-2 factors: the integer product has 2s.
                    let b = Gf2Matrix::from_fn(rows, 2, |_, _| true);
                    let c = Gf2Matrix::from_fn(2, cols, |r, cc| (r + cc) % 2 == 0 || cc % 3 == 0);
                    return PlaneRecord::Factored { rank: 2, b, c, integer_exact: false };
                }
                // Rank ≤ 1 products are 0/1-valued, hence integer-exact.
                if rng.random_bool(0.2) {
                    PlaneRecord::Factored {
                        rank: 0,
                        b: Gf2Matrix::zeros(rows, 0),
                        c: Gf2Matrix::zeros(0, cols),
                        integer_exact: true,
                    }
                } else {
                    let b = Gf2Matrix::from_fn(rows, 1, |_, _| rng.random_bool(0.5));
                    let c = Gf2Matrix::from_fn(1, cols, |_, _| rng.random_bool(0.5));
                    PlaneRecord::Factored { rank: 1, b, c, integer_exact: true }
                }
            })
            .collect()
    };
    CompressedLayer {
        spec,
        j,
        q: 0,
        alpha: 1.0,
        w_max: 1.0,
        rows,
        cols,
        data: RecordData::Split {
            pos: planes(rng, true),
            neg: planes(rng, exact_only),
        },
    }
}

fn integer_input(seed: u64, c: usize, h: usize, w: usize) -> FeatureMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FeatureMap::from_fn(c, h, w, |_, _, _| rng.random_range(-3..4) as f32)
}

#[test]
fn a08_two_stage_path_and_divergence_kernel() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(808);

    // Integer-exact two-layer cascade: both paths agree bit for bit.
    let l1 = factor_built_layer("s1", 2, 3, 3, 5, &mut rng, true);
    let l2 = factor_built_layer("s2", 3, 2, 3, 5, &mut rng, true);
    let x = integer_input(809, 2, 10, 10);
    let y1c = forward_composite(&x, &l1).unwrap();
    let y1d = forward_decomposed(&x, &l1).unwrap();
    assert_eq!(y1c.data, y1d.data, "layer 1 paths diverge despite integer-exact planes");
    let y2c = forward_composite(&y1c, &l2).unwrap();
    let y2d = forward_decomposed(&y1d, &l2).unwrap();
    assert_eq!(y2c.data, y2d.data, "layer 2 paths diverge despite integer-exact planes");

    // Swap in a non-exact second layer: the cascade divergence must equal
    // the discrepancy kernel convolved with that layer's input.
    let l2x = factor_built_layer("s2x", 3, 2, 3, 5, &mut rng, false);
    let z_c = forward_composite(&y1c, &l2x).unwrap();
    let z_d = forward_decomposed(&y1d, &l2x).unwrap();
    assert_ne!(z_c.data, z_d.data, "non-exact plane should separate the paths");
    let dk = discrepancy_kernel(&l2x).unwrap();
    let gap = conv2d(&y1c, &dk, l2x.spec.stride, l2x.spec.pad).unwrap();
    let scale = z_c.data.iter().fold(0.0f64, |a, &v| a.max(f64::from(v.abs()))).max(1.0);
    for i in 0..gap.data.len() {
        let want = f64::from(z_d.data[i]) - f64::from(z_c.data[i]);
        let got = f64::from(gap.data[i]);
        assert!(
            (got - want).abs() <= 1e-6 * scale,
            "divergence mismatch at {i}: {got} vs {want} (scale {scale})"
        );
    }
    finish(8, "two-stage-equivalence-and-divergence", started, 30.0);
}

#[test]
fn a09_halfnormal_plane_occupancy_increases() {
    let started = Instant::now();
    use rand_distr::{Distribution, Normal};
    let normal = Normal::new(0.0f64, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let w = MatrixF32::from_fn(100, 100, |_, _| normal.sample(&mut rng).abs() as f32);
    let n = normalize(&w, 1.0).unwrap();
    let b = expand(&n, 7, SignMode::Plane).unwrap();
    let stats = plane_sparsity(&b, false);
    assert_eq!(stats.len(), 7);
    for (i, pair) in stats[..6].windows(2).enumerate() {
        assert!(
            pair[0].fraction < pair[1].fraction,
            "occupancy not strictly increasing from plane {i}: {} vs {}",
            pair[0].fraction,
            pair[1].fraction
        );
    }
    finish(9, "halfnormal-plane-occupancy", started, 5.0);
}

#[test]
fn a10_bitrate_accounting() {
    let started = Instant::now();

    // All-dense, sign-plane storage at J = 7 is exactly 7 payload bits per
    // weight, scalar overhead excluded.
    let spec = LayerSpec::conv("dense", 4, 4, 3, 1, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let len: usize = spec.expected_shape().iter().product();
    let t = TensorF32::new(
        spec.expected_shape(),
        (0..len).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
    )
    .unwrap();
    let opt = CompressOptions { mode: DecomposeMode::Disabled, ..Default::default() };
    let dense = compress_layer(&t, &spec, &opt).unwrap();
    let db = bit_breakdown(&dense);
    let weights = (dense.rows * dense.cols) as u64;
    assert_eq!(db.payload_bits, 7 * weights);
    assert_eq!(db.payload_bits as f64 / weights as f64, 7.0);
    assert_eq!(db.overhead_bits, 64);

    // A layer with a dominant spread-out support factors strictly smaller.
    let spec = LayerSpec::fc("lowrank", 24, 24);
    let mut data: Vec<f32> = (0..576).map(|_| rng.random_range(-0.05f32..0.05)).collect();
    data[30] = 3.0;
    let t = TensorF32::new(vec![24, 24], data).unwrap();
    let opt = CompressOptions { bottleneck: 0.1, ..Default::default() };
    let gated = compress_layer(&t, &spec, &opt).unwrap();
    let dense = compress_layer(
        &t,
        &spec,
        &CompressOptions { mode: DecomposeMode::Disabled, ..opt },
    )
    .unwrap();
    let gb = bit_breakdown(&gated);
    let db = bit_breakdown(&dense);
    assert!(gb.factored_plane_bits > 0, "no plane was factored");
    assert!(
        gb.payload_bits < db.payload_bits,
        "factorization did not reduce payload: {} vs {}",
        gb.payload_bits,
        db.payload_bits
    );
    assert_eq!(gb.dense_equivalent_bits, db.payload_bits);
    finish(10, "bitrate-accounting", started, 5.0);
}
