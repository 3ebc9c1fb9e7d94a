//! Release gate, one test per shipping criterion. Every test prints a
//! single PASS line after its assertions so `--nocapture` reads as a
//! checklist; the informational real-dataset harness is opt-in via
//! `--ignored` plus environment variables and reports instead of failing.

use std::path::Path;
use std::thread;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::tempdir;

use emopipe::data::{
    build_tensors, load_legend, stratified_split, synth_generate, DatasetRecord, LabeledDataset,
    LoadConfig, Representation, SynthConfig, TensorSet, EMOTION_LABELS,
};
use emopipe::eval::{evaluate, metrics_from_predictions, ClassMetrics, MetricsReport};
use emopipe::features::{
    absolute_features, hflip, modified_features, rasterize_sized, MODIFIED_LEN,
};
use emopipe::nn::{
    adam_step, argmax, load_model, load_model_file, save_model, save_model_file, train, AdamState,
    AnyModel, CnnModel, CnnShape, MlpModel, ModelIoError, Network, TrainConfig, TrainHistory,
};
use emopipe::pipeline::{
    controller_run_on, input_run_on, model_run_on, orchestrate_captured, parse_view_line,
    Endpoints, FrameSource, PipelineConfig,
};
use emopipe::wire::{
    decode_frame, encode_frame, ControlToken, Listener, Payload, RequestLink, WireError,
    CONNECT_ATTEMPTS, CONNECT_INTERVAL,
};
use emopipe::features::FeatureKind;
use emopipe::{LandmarkSet, Point, LANDMARK_COUNT};

fn two_labels() -> Vec<String> {
    vec!["happiness".to_string(), "neutral".to_string()]
}

fn random_landmarks(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> LandmarkSet<f64> {
    let points = (0..LANDMARK_COUNT)
        .map(|_| Point::new(rng.random_range(lo..hi), rng.random_range(lo..hi)))
        .collect();
    LandmarkSet::new(points).expect("finite in-range points")
}

#[test]
fn criterion_1_backward_gradients_match_finite_differences() {
    let start = Instant::now();
    let model = MlpModel::<f64>::glorot(&[136, 8, 2], &[0.0], two_labels(), 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let inputs: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..136).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let batch: Vec<(&[f64], usize)> = inputs
        .iter()
        .enumerate()
        .map(|(i, x)| (x.as_slice(), i % 2))
        .collect();

    let analytic = model
        .batch_backward(&batch, &mut ChaCha8Rng::seed_from_u64(0))
        .unwrap()
        .grads;
    let mut probe = model.clone();
    let params = probe.flat_params();
    assert_eq!(analytic.len(), params.len());

    let step = 1e-5;
    let loss_at = |probe: &mut MlpModel<f64>, params: &[f64]| {
        probe.set_flat_params(params).unwrap();
        probe
            .batch_backward(&batch, &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap()
            .mean_loss
    };
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let mut shifted = params.clone();
        shifted[i] = params[i] + step;
        let loss_plus = loss_at(&mut probe, &shifted);
        shifted[i] = params[i] - step;
        let loss_minus = loss_at(&mut probe, &shifted);
        let fd = (loss_plus - loss_minus) / (2.0 * step);
        let denom = analytic[i].abs().max(fd.abs()).max(1e-8);
        let rel = (analytic[i] - fd).abs() / denom;
        worst = worst.max(rel);
        assert!(
            rel < 1e-4,
            "parameter {i}: backward {} vs finite difference {fd}, relative error {rel}",
            analytic[i]
        );
    }
    assert!(
        start.elapsed() < Duration::from_secs(10),
        "took {:?}",
        start.elapsed()
    );
    println!(
        "PASS criterion 1: all {} gradients within 1e-4 of central differences (worst {worst:.2e})",
        params.len()
    );
}

fn desk_scale_history(seed: u64) -> TrainHistory {
    let ds = synth_generate::<f64>(&SynthConfig {
        per_class: 200,
        seed: 42,
        jitter_sigma: 2.0,
    });
    let (train_ds, val_ds) = stratified_split(&ds, 40, seed).unwrap();
    let TensorSet::Vectors(train_rows) = build_tensors(&train_ds, Representation::Modified).unwrap()
    else {
        unreachable!("modified features are vectors");
    };
    let TensorSet::Vectors(val_rows) = build_tensors(&val_ds, Representation::Modified).unwrap()
    else {
        unreachable!("modified features are vectors");
    };
    let mut model =
        MlpModel::<f64>::glorot(&[114, 64, 32, 2], &[0.0, 0.0], two_labels(), seed).unwrap();
    let cfg = TrainConfig::new(300, 32, seed, 1e-3);
    train(&mut model, &train_rows, &val_rows, &cfg).unwrap()
}

#[test]
fn criterion_2_desk_scale_training_reaches_95_percent_validation() {
    let start = Instant::now();
    let history = desk_scale_history(11);
    let first_hit = history
        .epochs
        .iter()
        .position(|e| e.validation_accuracy >= 0.95);
    let best = history
        .epochs
        .iter()
        .map(|e| e.validation_accuracy)
        .fold(0.0f64, f64::max);
    assert!(
        first_hit.is_some(),
        "validation accuracy peaked at {best:.4} within 300 epochs"
    );
    let rerun = desk_scale_history(11);
    assert_eq!(history, rerun, "training must be deterministic per seed");
    assert!(
        start.elapsed() < Duration::from_secs(60),
        "took {:?}",
        start.elapsed()
    );
    println!(
        "PASS criterion 2: {:.2}% validation accuracy by epoch {}, deterministic rerun identical",
        best * 100.0,
        first_hit.unwrap() + 1
    );
}

/// Trains a small but genuinely fitted dense model and writes it to disk.
fn trained_pipeline_model(path: &Path) {
    let ds = synth_generate::<f32>(&SynthConfig {
        per_class: 50,
        seed: 42,
        jitter_sigma: 2.0,
    });
    let (train_ds, val_ds) = stratified_split(&ds, 10, 1).unwrap();
    let TensorSet::Vectors(train_rows) = build_tensors(&train_ds, Representation::Modified).unwrap()
    else {
        unreachable!();
    };
    let TensorSet::Vectors(val_rows) = build_tensors(&val_ds, Representation::Modified).unwrap()
    else {
        unreachable!();
    };
    let mut model = MlpModel::<f32>::glorot(&[114, 16, 2], &[0.0], two_labels(), 1).unwrap();
    let cfg = TrainConfig::new(30, 16, 1, 1e-3);
    train(&mut model, &train_rows, &val_rows, &cfg).unwrap();
    save_model_file(path, &AnyModel::Mlp(model)).unwrap();
}

#[test]
fn criterion_3_pipeline_conserves_frames_and_survives_view_loss() {
    let dir = tempdir().unwrap();
    let model_path = dir.path().join("pipeline.emo");
    trained_pipeline_model(&model_path);

    // Full orchestrated run: 100 synthetic frames through all four workers.
    let start = Instant::now();
    let config = PipelineConfig {
        source: FrameSource::SyntheticStream { seed: 5, count: 100 },
        model_path: model_path.clone(),
        feature_kind: FeatureKind::Modified,
        endpoints: Endpoints::ephemeral(),
    };
    let (report, view) = orchestrate_captured(&config).expect("all workers finish cleanly");
    assert!(
        start.elapsed() < Duration::from_secs(30),
        "took {:?}",
        start.elapsed()
    );
    assert_eq!(report.frames_served, 100);
    assert_eq!(report.frames_classified, 100);
    assert_eq!(report.view_lines, 100);
    let lines: Vec<&str> = view.lines().collect();
    assert_eq!(lines.len(), 100, "exactly one view line per frame");
    let mut previous = None;
    for line in &lines {
        let parsed = parse_view_line(line)
            .unwrap_or_else(|| panic!("malformed view line {line:?}"));
        assert!(
            previous.map_or(true, |p| p < parsed.frame_id),
            "frame ids must strictly increase"
        );
        previous = Some(parsed.frame_id);
    }

    // Same worker chain, but the view vanishes after five frames without
    // saying "done"; every survivor must drain and exit promptly.
    let input_listener = Listener::bind("127.0.0.1:0").unwrap();
    let model_listener = Listener::bind("127.0.0.1:0").unwrap();
    let controller_listener = Listener::bind("127.0.0.1:0").unwrap();
    let input_endpoint = input_listener.local_endpoint();
    let model_endpoint = model_listener.local_endpoint();
    let controller_endpoint = controller_listener.local_endpoint();

    let source = FrameSource::SyntheticStream { seed: 5, count: 1000 };
    let input = thread::spawn(move || input_run_on(input_listener, &source));
    let model = thread::spawn(move || model_run_on(model_listener, &input_endpoint, None));
    let controller = thread::spawn(move || {
        controller_run_on(
            controller_listener,
            &model_endpoint,
            &model_path,
            FeatureKind::Modified,
            None,
        )
    });

    let mut rogue_view =
        RequestLink::connect_with_retry(&controller_endpoint, CONNECT_ATTEMPTS, CONNECT_INTERVAL)
            .unwrap();
    for _ in 0..5 {
        assert!(rogue_view.fetch().unwrap().is_some(), "frame expected");
    }
    drop(rogue_view);

    let killed_at = Instant::now();
    let input_summary = input.join().unwrap().unwrap();
    let model_summary = model.join().unwrap().unwrap();
    let controller_summary = controller.join().unwrap().unwrap();
    let shutdown = killed_at.elapsed();
    assert!(
        shutdown < Duration::from_secs(5),
        "survivors took {shutdown:?} to terminate"
    );
    assert_eq!(controller_summary.frames_classified, 5);
    assert!(input_summary.frames_served < 1000, "source must stop early");
    assert!(model_summary.frames_forwarded < 1000);
    println!(
        "PASS criterion 3: 100 ordered view lines end to end; survivors drained {shutdown:?} after view loss"
    );
}

#[test]
fn criterion_4_serialization_round_trips_and_rejects_corruption() {
    // Dense and convolutional round trips: identical bits out of inference.
    let dir = tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);

    let mlp = MlpModel::<f32>::glorot(&[114, 16, 2], &[0.25], two_labels(), 21).unwrap();
    let mlp_inputs: Vec<Vec<f32>> = (0..10)
        .map(|_| {
            modified_features(&random_landmarks(&mut rng, 40.0, 310.0))
                .values
                .iter()
                .map(|&v| v as f32)
                .collect()
        })
        .collect();
    let mlp_path = dir.path().join("dense.emo");
    save_model_file(&mlp_path, &AnyModel::Mlp(mlp.clone())).unwrap();
    let AnyModel::Mlp(mlp_back) = load_model_file::<f32>(&mlp_path).unwrap() else {
        panic!("dense model came back as another family");
    };
    for x in &mlp_inputs {
        let before = mlp.forward_infer(x).unwrap();
        let after = mlp_back.forward_infer(x).unwrap();
        let before_bits: Vec<u32> = before.iter().map(|p| p.to_bits()).collect();
        let after_bits: Vec<u32> = after.iter().map(|p| p.to_bits()).collect();
        assert_eq!(before_bits, after_bits, "predictions must be bitwise identical");
    }

    let cnn = CnnModel::<f32>::glorot(8, 4, 3, 0.25, two_labels(), 22).unwrap();
    let cnn_path = dir.path().join("conv.emo");
    save_model_file(&cnn_path, &AnyModel::Cnn(cnn.clone())).unwrap();
    let AnyModel::Cnn(cnn_back) = load_model_file::<f32>(&cnn_path).unwrap() else {
        panic!("conv model came back as another family");
    };
    for _ in 0..10 {
        let grid = rasterize_sized(&random_landmarks(&mut rng, 0.0, 350.0), 8);
        let before = cnn.forward_infer(&grid).unwrap();
        let after = cnn_back.forward_infer(&grid).unwrap();
        let before_bits: Vec<u32> = before.iter().map(|p| p.to_bits()).collect();
        let after_bits: Vec<u32> = after.iter().map(|p| p.to_bits()).collect();
        assert_eq!(before_bits, after_bits);
    }

    // 1000 randomized wire payloads survive encode/decode exactly.
    for i in 0..1000u32 {
        let payload = match rng.random_range(0..4) {
            0 => Payload::Control(if rng.random_bool(0.5) {
                ControlToken::Ready
            } else {
                ControlToken::Done
            }),
            1 => Payload::Image {
                frame_id: rng.random(),
                bytes: (0..rng.random_range(0..512)).map(|_| rng.random()).collect(),
            },
            2 => {
                let flat: Vec<f32> = (0..2 * LANDMARK_COUNT)
                    .map(|_| rng.random_range(0.0f32..350.0))
                    .collect();
                Payload::Landmarks {
                    frame_id: rng.random(),
                    points: LandmarkSet::from_flat(&flat).unwrap(),
                }
            }
            _ => Payload::emotion(rng.random(), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)),
        };
        let decoded = decode_frame(&encode_frame(&payload))
            .unwrap_or_else(|e| panic!("payload {i} failed to round-trip: {e}"));
        assert_eq!(decoded, payload, "payload {i} changed in transit");
    }

    // Corrupted magic and truncation fail with their dedicated errors.
    let good = save_model(&AnyModel::Mlp(mlp));
    let mut bad_magic = good.clone();
    bad_magic[0] ^= 0xFF;
    assert!(matches!(
        load_model::<f32>(&bad_magic),
        Err(ModelIoError::BadMagic)
    ));
    assert!(matches!(
        load_model::<f32>(&good[..good.len() - 3]),
        Err(ModelIoError::TruncatedFile)
    ));
    let frame = encode_frame(&Payload::emotion(9, 0.7, 0.3));
    assert!(matches!(
        decode_frame(&frame[..frame.len() - 1]),
        Err(WireError::LengthMismatch { .. })
    ));
    println!(
        "PASS criterion 4: bitwise model round-trips, 1000 exact wire round-trips, corruption rejected"
    );
}

#[test]
fn criterion_5_evaluate_matches_a_brute_force_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for fixture in 0..20u64 {
        let mut vocabulary: Vec<&str> = EMOTION_LABELS.to_vec();
        vocabulary.shuffle(&mut rng);
        let k = rng.random_range(2..=4usize);
        let chosen: Vec<String> = vocabulary[..k].iter().map(|s| s.to_string()).collect();
        let n = rng.random_range(k..=64usize);
        let records: Vec<DatasetRecord<f64>> = (0..n)
            .map(|i| DatasetRecord {
                image_id: format!("fx-{fixture}-{i}"),
                label: chosen[if i < k { i } else { rng.random_range(0..k) }].clone(),
                submitter: "oracle".to_string(),
                landmarks: random_landmarks(&mut rng, 0.0, 350.0),
            })
            .collect();
        let ds = LabeledDataset::new(records);
        let labels = ds.class_labels().to_vec();
        let model =
            MlpModel::<f64>::glorot(&[114, 6, labels.len()], &[0.0], labels.clone(), 1000 + fixture)
                .unwrap();

        let report = evaluate(&AnyModel::Mlp(model.clone()), &ds, Representation::Modified).unwrap();

        // Independent pass: per-record inference folded by hand, in record
        // order, with the same percentage arithmetic.
        let mut tested = vec![0usize; labels.len()];
        let mut prob_sums = vec![0f64; labels.len()];
        let mut correct = vec![0usize; labels.len()];
        let mut total_prob_sum = 0f64;
        for record in ds.records() {
            let class = labels.iter().position(|l| *l == record.label).unwrap();
            let probs = model.forward_infer(&modified_features(&record.landmarks).values).unwrap();
            let best = argmax(&probs);
            tested[class] += 1;
            prob_sums[class] += probs[class];
            total_prob_sum += probs[class];
            if best == class {
                correct[class] += 1;
            }
        }
        let row = |label: &str, tested: usize, prob_sum: f64, correct: usize| ClassMetrics {
            label: label.to_string(),
            images_tested: tested,
            certainty_pct: if tested == 0 { 0.0 } else { 100.0 * prob_sum / tested as f64 },
            accuracy_pct: if tested == 0 { 0.0 } else { 100.0 * correct as f64 / tested as f64 },
        };
        let expected = MetricsReport {
            classes: labels
                .iter()
                .enumerate()
                .map(|(c, label)| row(label, tested[c], prob_sums[c], correct[c]))
                .collect(),
            total: row("total", n, total_prob_sum, correct.iter().sum()),
        };
        assert_eq!(report, expected, "fixture {fixture} diverged from the oracle");
    }

    // Hand-computed fixture: a model pinned to [1, 0] over four records,
    // three of them class 0. Certainty (1+1+1+0)/4 and accuracy 3/4.
    let pinned = vec![
        (vec![1.0, 0.0], 0),
        (vec![1.0, 0.0], 0),
        (vec![1.0, 0.0], 0),
        (vec![1.0, 0.0], 1),
    ];
    let report = metrics_from_predictions(&pinned, &two_labels()).unwrap();
    assert_eq!(report.total.certainty_pct, 75.00);
    assert_eq!(report.total.accuracy_pct, 75.00);
    println!(
        "PASS criterion 5: 20 randomized fixtures match exactly; pinned fixture reads 75.00%/75.00%"
    );
}

#[test]
fn criterion_6_feature_invariants_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(61);

    // Translation moves only the anchor entries of the part-relative
    // vector; offsets, width, and height stay put.
    let anchor_starts = [0usize, 4, 46, 66, 90];
    for _ in 0..100 {
        let base = random_landmarks(&mut rng, 100.0, 250.0);
        let dx = rng.random_range(-80.0..80.0);
        let dy = rng.random_range(-80.0..80.0);
        let before = modified_features(&base);
        let after = modified_features(&base.translate(dx, dy));
        for i in 0..MODIFIED_LEN {
            let anchored = anchor_starts.contains(&i) || anchor_starts.contains(&(i - 1));
            if !anchored {
                let drift = (after.values[i] - before.values[i]).abs();
                assert!(drift <= 1e-9, "entry {i} drifted {drift} under translation");
            }
        }
    }

    // Horizontal flip is an involution on occupancy grids.
    for _ in 0..20 {
        let grid = rasterize_sized(&random_landmarks(&mut rng, 0.0, 350.0), 64);
        assert_eq!(hflip(&hflip(&grid)), grid);
    }
    let native = rasterize_sized(&random_landmarks(&mut rng, 0.0, 350.0), 350);
    assert_eq!(hflip(&hflip(&native)), native);

    // Absolute features of in-frame faces live in the unit interval.
    for _ in 0..50 {
        let fv = absolute_features(&random_landmarks(&mut rng, 0.0, 350.0));
        assert!(fv.values.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(fv.values.len(), 136);
    }

    assert_eq!(
        modified_features(&random_landmarks(&mut rng, 0.0, 350.0)).values.len(),
        114
    );

    // Convolution shape chain: conv = grid - kernel + 1, pooled = conv / 2,
    // flat = filters * pooled^2. The native grid is checked shape-only.
    let small = CnnShape::for_grid(8, 3, 4).unwrap();
    assert_eq!((small.conv, small.pooled, small.flat), (6, 3, 36));
    let medium = CnnShape::for_grid(16, 3, 4).unwrap();
    assert_eq!((medium.conv, medium.pooled, medium.flat), (14, 7, 196));
    let native_shape = CnnShape::for_grid(350, 3, 32).unwrap();
    assert_eq!(
        (native_shape.conv, native_shape.pooled, native_shape.flat),
        (348, 174, 32 * 174 * 174)
    );
    for grid_size in [8usize, 16] {
        let model = CnnModel::<f32>::glorot(grid_size, 4, 3, 0.25, two_labels(), 3).unwrap();
        let grid = rasterize_sized(&random_landmarks(&mut rng, 0.0, 350.0), grid_size);
        let probs = model.forward_infer(&grid).unwrap();
        assert_eq!(probs.len(), 2);
        let mass: f32 = probs.iter().sum();
        assert!((mass - 1.0).abs() < 1e-5, "probabilities sum to {mass}");
    }
    println!(
        "PASS criterion 6: translation invariance, flip involution, ranges, lengths, and shape chains hold"
    );
}

#[test]
fn criterion_7_adam_steps_match_their_closed_forms() {
    let lr = 0.01;
    let beta1 = 0.9;
    let beta2 = 0.999;
    let epsilon = 1e-7;

    // Zero gradients leave parameters untouched.
    let mut params = vec![0.5f64, -0.25, 3.0];
    let frozen = params.clone();
    let mut state = AdamState::new(params.len(), lr, beta1, beta2, epsilon);
    adam_step(&mut params, &[0.0, 0.0, 0.0], &mut state).unwrap();
    assert_eq!(params, frozen, "zero gradient must be a fixed point");

    // First step collapses to -lr * g / (|g| + eps) after bias correction.
    let g1 = [0.3f64, -0.02, 1.5];
    let mut params = vec![1.0f64, -2.0, 0.5];
    let start = params.clone();
    let mut state = AdamState::new(params.len(), lr, beta1, beta2, epsilon);
    adam_step(&mut params, &g1, &mut state).unwrap();
    for i in 0..params.len() {
        let expected = start[i] - lr * g1[i] / (g1[i].abs() + epsilon);
        assert!(
            (params[i] - expected).abs() < 1e-12,
            "first step parameter {i}: {} vs {expected}",
            params[i]
        );
    }

    // Second step against the hand-rolled moment recurrence.
    let g2 = [-0.1f64, 0.5, 0.7];
    let after_first = params.clone();
    adam_step(&mut params, &g2, &mut state).unwrap();
    for i in 0..params.len() {
        let m1 = (1.0 - beta1) * g1[i];
        let v1 = (1.0 - beta2) * g1[i] * g1[i];
        let m2 = beta1 * m1 + (1.0 - beta1) * g2[i];
        let v2 = beta2 * v1 + (1.0 - beta2) * g2[i] * g2[i];
        let m_hat = m2 / (1.0 - beta1.powi(2));
        let v_hat = v2 / (1.0 - beta2.powi(2));
        let expected = after_first[i] - lr * m_hat / (v_hat.sqrt() + epsilon);
        assert!(
            (params[i] - expected).abs() < 1e-12,
            "second step parameter {i}: {} vs {expected}",
            params[i]
        );
    }
    println!("PASS criterion 7: zero-gradient fixed point and both closed-form steps within 1e-12");
}

/// Informational only: scores the full-size architecture against the
/// published reference numbers when a real landmark dataset is supplied
/// via EMOPIPE_REAL_LEGEND and EMOPIPE_REAL_LANDMARKS. Deviations are
/// printed, never failed, because landmark extraction variance lies
/// outside this artifact.
#[test]
#[ignore = "needs a user-supplied landmark dataset and hours of training"]
fn criterion_8_real_dataset_reference_band() {
    let (Ok(legend), Ok(landmarks)) = (
        std::env::var("EMOPIPE_REAL_LEGEND"),
        std::env::var("EMOPIPE_REAL_LANDMARKS"),
    ) else {
        println!("SKIP criterion 8: set EMOPIPE_REAL_LEGEND and EMOPIPE_REAL_LANDMARKS to run");
        return;
    };
    let (ds, drops) = load_legend::<f32>(
        Path::new(&legend),
        Path::new(&landmarks),
        &LoadConfig::default(),
    )
    .unwrap();
    println!(
        "loaded {} records ({} submitter / {} label / {} landmark drops)",
        ds.len(),
        drops.submitter,
        drops.label,
        drops.missing_landmarks
    );
    let (train_ds, val_ds) = stratified_split(&ds, 191, 0).unwrap();
    let TensorSet::Vectors(train_rows) = build_tensors(&train_ds, Representation::Modified).unwrap()
    else {
        unreachable!();
    };
    let TensorSet::Vectors(val_rows) = build_tensors(&val_ds, Representation::Modified).unwrap()
    else {
        unreachable!();
    };
    let mut model = MlpModel::<f32>::glorot(
        &[114, 1024, 512, 256, 2],
        &[0.5, 0.5, 0.5],
        ds.class_labels().to_vec(),
        0,
    )
    .unwrap();
    let cfg = TrainConfig::new(5000, 32, 0, 1e-6);
    train(&mut model, &train_rows, &val_rows, &cfg).unwrap();
    let report = evaluate(&AnyModel::Mlp(model), &val_ds, Representation::Modified).unwrap();
    print!("{}", report.table());
    let accuracy = report.total.accuracy_pct;
    let certainty = report.total.certainty_pct;
    let acc_in_band = (77.20..=87.20).contains(&accuracy);
    let cert_in_band = (69.59..=79.59).contains(&certainty);
    println!(
        "INFO criterion 8: accuracy {accuracy:.2}% (reference 82.20 +/- 5: {}), certainty {certainty:.2}% (reference 74.59 +/- 5: {})",
        if acc_in_band { "within band" } else { "DEVIATION" },
        if cert_in_band { "within band" } else { "DEVIATION" },
    );
}
