//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (visible with `--nocapture`). Heavier criteria serialize on a
//! shared lock so their measured runtimes are not distorted by parallel
//! test execution.
//!
//! Run with: `cargo test --test acceptance -- --nocapture`

use std::path::Path;
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rumorlens::data::{synthesize_corpus, LoadOptions};
use rumorlens::evaluation::{
    compute_metrics, confusion, cross_validate, evaluate_model, stratified_kfold,
};
use rumorlens::experiments::Hyperparams;
use rumorlens::layers::{dropout, DropoutSpec, Mode};
use rumorlens::model::{build_model, ModelConfig, Variant};
use rumorlens::rng::SeededRng;
use rumorlens::tensor::Matrix2D;
use rumorlens::text::EncodedExample;

static HEAVY: Mutex<()> = Mutex::new(());

fn pass(id: &str, detail: &str) {
    println!("ACCEPTANCE {id}: PASS ({detail})");
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rumorlens"))
}

fn tiny_config(variant: Variant, vocab_size: usize, seed: u64) -> ModelConfig {
    let mut cfg = ModelConfig::new(variant, vocab_size, 5);
    cfg.embed_dim = 3;
    cfg.hidden = 4;
    cfg.n_filters = 2;
    cfg.kernel_width = 2;
    cfg.pool = 2;
    cfg.seed = seed;
    cfg
}

fn random_batch(rng: &mut SeededRng, vocab_size: usize, max_len: usize, n: usize) -> Vec<EncodedExample> {
    (0..n)
        .map(|i| EncodedExample {
            indices: (0..max_len).map(|_| rng.next_below(vocab_size)).collect(),
            label: (i % 2) as u8,
            event: String::new(),
        })
        .collect()
}

/// Criterion 1: analytic gradients of the loss match central finite
/// differences for every trainable parameter, all three variants, five
/// seeds, within 1e-4 relative error, in under 30 seconds.
#[test]
fn criterion_1_gradient_check_all_variants() {
    let started = Instant::now();
    let eps = 1e-5;
    let vocab_size = 9;

    for variant in Variant::ALL {
        for seed in 40..45u64 {
            let cfg = tiny_config(variant, vocab_size, seed);
            let mut model = build_model(&cfg).unwrap();
            model.set_mode(Mode::Train);

            // Move to a generic parameter point: zero-initialized biases put
            // relu pre-activations of all-PAD windows exactly on the kink,
            // where central differences measure the half-slope instead of
            // either one-sided derivative.
            let mut jitter = SeededRng::new(seed ^ 0x0FF5E7);
            for i in 0..model.trainable_param_count() {
                *model.param_at(i) += jitter.uniform(-0.1, 0.1);
            }

            let mut data_rng = SeededRng::new(seed ^ 0xDA7A);
            let batch = random_batch(&mut data_rng, vocab_size, cfg.max_len, 4);

            // One fixed generator per instance: every loss evaluation sees
            // the identical dropout mask stream.
            let mask_rng = SeededRng::new(seed ^ 0x1234);
            let (_, analytic) =
                model.loss_and_grads_flat(&batch, &mut mask_rng.clone()).unwrap();

            let n_params = model.trainable_param_count();
            assert_eq!(analytic.len(), n_params);
            let mut worst = 0.0f64;
            for i in 0..n_params {
                let base = *model.param_at(i);
                *model.param_at(i) = base + eps;
                let (loss_plus, _) =
                    model.loss_and_grads_flat(&batch, &mut mask_rng.clone()).unwrap();
                *model.param_at(i) = base - eps;
                let (loss_minus, _) =
                    model.loss_and_grads_flat(&batch, &mut mask_rng.clone()).unwrap();
                *model.param_at(i) = base;

                let numeric = (loss_plus - loss_minus) / (2.0 * eps);
                let denom = numeric.abs().max(analytic[i].abs()).max(1e-6);
                let rel = (numeric - analytic[i]).abs() / denom;
                worst = worst.max(rel);
                assert!(
                    rel <= 1e-4,
                    "{variant:?} seed {seed} param {i}: numeric {numeric} vs analytic {} (rel {rel})",
                    analytic[i]
                );
            }
            assert!(worst <= 1e-4);
        }
    }
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    pass("1 gradient-check", &format!("3 variants x 5 seeds, {elapsed:?}"));
}

/// Criterion 2: every variant reaches 100% training accuracy on a
/// 32-example fully separable corpus within 300 epochs at lr=0.05,
/// batch 8, in under 60 seconds per variant.
#[test]
fn criterion_2_overfit_capacity() {
    let _guard = HEAVY.lock().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("overfit.jsonl");
    let dataset = synthesize_corpus(&corpus, 32, 1.0, 30, 2).unwrap();

    for variant in Variant::ALL {
        let started = Instant::now();
        let mut cfg = ModelConfig::new(variant, dataset.vocab.size(), dataset.max_len);
        cfg.seed = 7;
        let mut model = build_model(&cfg).unwrap();

        let mut epochs_used = 0;
        let mut reached = false;
        while epochs_used < 300 {
            model.fit(&dataset.examples, 10, 8, 0.05, None).unwrap();
            epochs_used += 10;
            let metrics = evaluate_model(&model, &dataset.examples).unwrap();
            if metrics.accuracy.value == 100.0 {
                reached = true;
                break;
            }
        }
        let elapsed = started.elapsed();
        assert!(reached, "{variant:?} failed to reach 100% within 300 epochs");
        assert!(elapsed < Duration::from_secs(60), "{variant:?} took {elapsed:?}");
        println!("  {variant:?}: 100% within {epochs_used} epochs, {elapsed:?}");
    }
    pass("2 overfit", "all variants hit 100% train accuracy");
}

/// Criterion 3: ten-fold stratified CV on the 2000-example signal-0.9
/// corpus reaches mean accuracy >= 95% (lstm) and >= 90% (the other two)
/// with default hyperparameters, in under 10 minutes total.
#[test]
fn criterion_3_desk_scale_protocol() {
    let _guard = HEAVY.lock().unwrap();
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("desk.jsonl");
    let dataset = synthesize_corpus(&corpus, 2000, 0.9, 30, 7).unwrap();
    let hyper = Hyperparams::default();

    let mut details = String::new();
    for (variant, floor) in [
        (Variant::Lstm, 95.0),
        (Variant::LstmDropout, 90.0),
        (Variant::LstmCnn, 90.0),
    ] {
        let config = ModelConfig::new(variant, dataset.vocab.size(), dataset.max_len);
        let cv = cross_validate(&config, &hyper, &dataset, 10, 42).unwrap();
        assert_eq!(cv.per_fold.len(), 10);
        let acc = cv.mean.accuracy.value;
        assert!(
            acc >= floor,
            "{variant:?}: mean accuracy {acc:.2} below the {floor}% floor"
        );
        details.push_str(&format!("{} {:.2}% ", variant.technique(), acc));
    }
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(600), "took {elapsed:?}");
    pass("3 desk-scale CV", &format!("{details}in {elapsed:?}"));
}

/// Criterion 4a: on a corpus of ~5,800 records in the interchange format,
/// `cross-validate --variant all` completes and emits a comparison table
/// with every metric inside [0, 100].
#[test]
fn criterion_4a_full_scale_protocol_completes() {
    let _guard = HEAVY.lock().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("pheme-scale.jsonl");
    synthesize_corpus(&corpus, 5800, 0.9, 30, 24).unwrap();

    let output = binary()
        .args([
            "cross-validate",
            "--data",
            corpus.to_str().unwrap(),
            "--variant",
            "all",
            "--k",
            "10",
            "--epochs",
            "1",
            "--seed",
            "42",
        ])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "exit {:?}, stderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
    let stdout = String::from_utf8(output.stdout).unwrap();
    let mut lines = stdout.lines().skip_while(|l| *l != "Technique  ACC  PRE  REC  F-M");
    assert_eq!(
        lines.next(),
        Some("Technique  ACC  PRE  REC  F-M"),
        "missing comparison table in:\n{stdout}"
    );
    let mut rows = 0;
    for expected in ["LSTM", "LSTMDrop", "LSTM-CNN"] {
        let row = lines.next().unwrap_or_else(|| panic!("missing row {expected}"));
        let fields: Vec<&str> = row.split("  ").collect();
        assert_eq!(fields[0], expected);
        assert_eq!(fields.len(), 5, "row {row:?}");
        for value in &fields[1..] {
            let v: f64 = value.parse().unwrap_or_else(|_| panic!("bad metric {value:?}"));
            assert!((0.0..=100.0).contains(&v), "metric {v} out of range in {row:?}");
        }
        rows += 1;
    }
    assert_eq!(rows, 3);
    pass("4a full-scale protocol", "5800-record corpus, 3-variant table well-formed");
}

/// Criterion 4b: the renderer reproduces the reference result rows byte
/// for byte when fed the stored numbers.
#[test]
fn criterion_4b_reference_rows_byte_exact() {
    use rumorlens::evaluation::{ConfusionMatrix, MetricsReport};
    use rumorlens::experiments::{render_report, ExperimentResult, ReportFormat, RunStatus};

    fn stored(variant: Variant, acc: f64, pre: f64, rec: f64, f1: f64, idx: usize) -> ExperimentResult {
        let mut mean: MetricsReport =
            compute_metrics(&ConfusionMatrix { tp: 1, fp: 1, fn_: 1, tn: 1 }).unwrap();
        mean.accuracy.value = acc;
        mean.precision_pos.value = pre;
        mean.recall_pos.value = rec;
        mean.f1_pos.value = f1;
        ExperimentResult {
            combo_index: idx,
            variant,
            hyperparams: Hyperparams::default(),
            status: RunStatus::Success { per_fold: vec![mean], mean },
            wall_secs: 0.0,
            seed: 42,
            completed_at_unix: 0,
        }
    }

    let results = vec![
        stored(Variant::Lstm, 82.29, 44.35, 40.55, 40.59, 0),
        stored(Variant::LstmDropout, 73.78, 39.67, 29.71, 30.93, 1),
        stored(Variant::LstmCnn, 80.38, 43.94, 39.53, 39.70, 2),
    ];
    let text = render_report(&results, ReportFormat::Text);
    assert_eq!(
        text,
        "Technique  ACC  PRE  REC  F-M\n\
         LSTM  82.29  44.35  40.55  40.59\n\
         LSTMDrop  73.78  39.67  29.71  30.93\n\
         LSTM-CNN  80.38  43.94  39.53  39.70\n"
    );
    pass("4b reference rows", "three stored rows render byte-exactly");
}

/// Criterion 5: metrics agree exactly with an independent brute-force
/// recount over 1,000 random prediction/label vectors, including
/// degenerate one-class cases.
#[test]
fn criterion_5_metrics_oracle_equivalence() {
    let mut rng = SeededRng::new(555);
    for case in 0..1000 {
        let n = 1 + rng.next_below(200);
        let (preds, labels): (Vec<u8>, Vec<u8>) = match case % 5 {
            // degenerate corners first: constant predictions or labels
            0 => (vec![1; n], (0..n).map(|_| rng.next_below(2) as u8).collect()),
            1 => (vec![0; n], (0..n).map(|_| rng.next_below(2) as u8).collect()),
            2 => ((0..n).map(|_| rng.next_below(2) as u8).collect(), vec![1; n]),
            3 => ((0..n).map(|_| rng.next_below(2) as u8).collect(), vec![0; n]),
            _ => (
                (0..n).map(|_| rng.next_below(2) as u8).collect(),
                (0..n).map(|_| rng.next_below(2) as u8).collect(),
            ),
        };

        let report = compute_metrics(&confusion(&preds, &labels).unwrap()).unwrap();

        // Independent recount: scan the pairs directly.
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        let mut tn = 0usize;
        for (&p, &y) in preds.iter().zip(&labels) {
            match (p, y) {
                (1, 1) => tp += 1,
                (1, 0) => fp += 1,
                (0, 1) => fn_ += 1,
                (0, 0) => tn += 1,
                _ => unreachable!(),
            }
        }
        let ratio = |num: usize, den: usize| -> Option<f64> {
            (den > 0).then(|| 100.0 * num as f64 / den as f64)
        };

        assert_eq!(report.accuracy.value, ratio(tp + tn, n).unwrap());
        match ratio(tp, tp + fp) {
            Some(v) => {
                assert!(report.precision_pos.defined);
                assert_eq!(report.precision_pos.value, v);
            }
            None => {
                assert!(!report.precision_pos.defined);
                assert_eq!(report.precision_pos.value, 0.0);
            }
        }
        match ratio(tp, tp + fn_) {
            Some(v) => {
                assert!(report.recall_pos.defined);
                assert_eq!(report.recall_pos.value, v);
            }
            None => assert!(!report.recall_pos.defined),
        }
        if report.precision_pos.defined
            && report.recall_pos.defined
            && report.precision_pos.value + report.recall_pos.value > 0.0
        {
            let expected = 2.0 * report.precision_pos.value * report.recall_pos.value
                / (report.precision_pos.value + report.recall_pos.value);
            assert_eq!(report.f1_pos.value, expected);
        } else {
            assert!(!report.f1_pos.defined);
        }
    }
    pass("5 metrics oracle", "1000 random vectors, exact agreement");
}

/// Criterion 6: over 200 randomized instances, folds are disjoint,
/// exhaustive and stratified within +-1 per class, and identical seeds
/// give identical plans.
#[test]
fn criterion_6_fold_partition_properties() {
    let mut rng = SeededRng::new(66);
    for _ in 0..200 {
        let k = 2 + rng.next_below(9);
        let pos = k + rng.next_below(150);
        let neg = k + rng.next_below(150);
        let mut labels = vec![1u8; pos];
        labels.extend(vec![0u8; neg]);
        rng.shuffle(&mut labels);
        let seed = rng.next_u64();

        let plan = stratified_kfold(&labels, k, seed).unwrap();
        assert_eq!(plan.fold_assignments.len(), labels.len());
        assert!(plan.fold_assignments.iter().all(|&f| f < k));

        // disjoint + exhaustive: every index appears in exactly one fold
        let total: usize = (0..k).map(|f| plan.test_indices(f).len()).sum();
        assert_eq!(total, labels.len());

        for class in [0u8, 1] {
            let class_total = labels.iter().filter(|&&y| y == class).count();
            let ideal_lo = class_total / k;
            let ideal_hi = ideal_lo + usize::from(class_total % k != 0);
            for fold in 0..k {
                let count = plan
                    .test_indices(fold)
                    .iter()
                    .filter(|&&i| labels[i] == class)
                    .count();
                assert!(
                    count >= ideal_lo && count <= ideal_hi,
                    "class {class} fold {fold}: {count} outside [{ideal_lo}, {ideal_hi}]"
                );
            }
        }

        assert_eq!(plan, stratified_kfold(&labels, k, seed).unwrap());
    }
    pass("6 fold partitions", "200 randomized instances hold all invariants");
}

/// Criterion 7: dropout eval mode is a bit-exact identity, rate 0 is the
/// identity, and rate 0.2 preserves the activation mean within 2% over
/// 10,000 entries, all in under 5 seconds.
#[test]
fn criterion_7_dropout_contract() {
    let started = Instant::now();

    let mut rng = SeededRng::new(3);
    let x = Matrix2D::init(100, 100, rumorlens::tensor::InitScheme::UniformScaled, &mut rng);
    let (eval_out, _) = dropout(&x, &DropoutSpec::new(0.2, Mode::Eval), &mut rng);
    assert_eq!(eval_out, x, "eval mode must be bit-exact identity");

    let (zero_out, _) = dropout(&x, &DropoutSpec::new(0.0, Mode::Train), &mut rng);
    assert_eq!(zero_out, x, "rate 0 must be identity");

    let ones = Matrix2D::from_vec(100, 100, vec![1.0; 10_000]).unwrap();
    let mut mask_rng = SeededRng::new(42);
    let (out, _) = dropout(&ones, &DropoutSpec::new(0.2, Mode::Train), &mut mask_rng);
    let mean = out.data().iter().sum::<f64>() / 10_000.0;
    assert!((mean - 1.0).abs() <= 0.02, "mean {mean} drifted more than 2%");

    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(5));
    pass("7 dropout contract", &format!("mean {mean:.4}, {elapsed:?}"));
}

/// Criterion 8: two cross-validate invocations with identical data, config
/// and seed produce byte-identical stdout.
#[test]
fn criterion_8_determinism_across_invocations() {
    let _guard = HEAVY.lock().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("det.jsonl");
    synthesize_corpus(&corpus, 100, 1.0, 20, 5).unwrap();

    let run = || {
        let output = binary()
            .args([
                "cross-validate",
                "--data",
                corpus.to_str().unwrap(),
                "--variant",
                "all",
                "--k",
                "5",
                "--epochs",
                "2",
                "--max-len",
                "20",
                "--seed",
                "42",
            ])
            .output()
            .unwrap();
        assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
        output.stdout
    };
    let first = run();
    let second = run();
    assert_eq!(first, second, "stdout must be byte-identical");
    pass("8 determinism", "two invocations byte-identical");
}

/// Criterion 9: save/load round trip gives bit-identical forward outputs
/// on a fixed batch for 20 random configurations.
#[test]
fn criterion_9_persistence_round_trip() {
    use rumorlens::data::{load_model, save_model};
    use rumorlens::text::Vocabulary;

    let dir = tempfile::tempdir().unwrap();
    let mut rng = SeededRng::new(909);
    for case in 0..20 {
        let vocab_tokens: Vec<Vec<String>> =
            vec![(0..30).map(|i| format!("tok{i}")).collect()];
        let vocab = Vocabulary::build(&vocab_tokens, 1, 32);

        let variant = Variant::ALL[case % 3];
        let kernel_width = 1 + rng.next_below(3);
        let pool = 1 + rng.next_below(2);
        let min_len = kernel_width + pool - 1;
        let cfg = ModelConfig {
            variant,
            vocab_size: vocab.size(),
            max_len: min_len + 1 + rng.next_below(8),
            embed_dim: 2 + rng.next_below(5),
            hidden: 2 + rng.next_below(7),
            dropout_rate: 0.2,
            n_filters: 1 + rng.next_below(4),
            kernel_width,
            pool,
            conv_activation: if rng.chance(0.5) {
                rumorlens::layers::Activation::Relu
            } else {
                rumorlens::layers::Activation::Tanh
            },
            seed: rng.next_u64(),
        };
        let model = build_model(&cfg).unwrap();
        let batch = random_batch(&mut rng, cfg.vocab_size, cfg.max_len, 6);

        let path = dir.path().join(format!("model-{case}.json"));
        save_model(&model, &vocab, &path).unwrap();
        let (restored, _) = load_model(&path).unwrap();

        let before = model.predict(&batch).unwrap();
        let after = restored.predict(&batch).unwrap();
        assert_eq!(before, after, "case {case}: outputs differ after round trip");
    }
    pass("9 persistence", "20 random configs, bit-identical forwards");
}

/// The loader contract behind criterion 4a: the interchange format accepts
/// the documented label aliases and survives load options.
#[test]
fn interchange_format_sanity() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mini.jsonl");
    std::fs::write(
        &path,
        concat!(
            "{\"id\":\"a\",\"text\":\"breaking news story\",\"label\":\"rumour\",\"event\":\"e1\"}\n",
            "{\"id\":\"b\",\"text\":\"official press update\",\"label\":\"non-rumor\",\"event\":\"e2\"}\n",
            "{\"id\":\"c\",\"text\":\"more words here\",\"label\":\"0\",\"event\":\"e1\"}\n",
        ),
    )
    .unwrap();
    let loaded = rumorlens::data::load_jsonl(&path, &LoadOptions::default()).unwrap();
    assert_eq!(loaded.dataset.class_counts, [2, 1]);
    assert_eq!(loaded.dataset.event_counts.len(), 2);
    pass("interchange format", "label aliases accepted");
}

/// Guard for the path layout assumed by the book's CLI chapter.
#[test]
fn binary_exists_and_prints_help() {
    let output = binary().arg("--help").output().unwrap();
    assert!(output.status.success());
    assert!(String::from_utf8_lossy(&output.stdout).contains("cross-validate"));
    let _ = Path::new(env!("CARGO_BIN_EXE_rumorlens"));
}
