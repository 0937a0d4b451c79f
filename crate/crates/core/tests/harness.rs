use std::fs::File;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dct::diffcore::ModelParams;
use dct::domain_model::{sample_dataset, MixtureSpec};
use dct::harness::*;
use dct::losses::ClassifierInput;
use dct::metrics::dispersion_report;
use dct::mining::MiningPolicy;
use dct::Dataset;

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        eval_every: epochs,
        trials: 1,
        ..TrainConfig::default()
    }
}

/// Accuracy of the classifier that knows every cell mean exactly.
fn cell_mean_oracle(spec: &MixtureSpec, ds: &Dataset) -> f64 {
    let hits = ds
        .samples()
        .filter(|s| {
            let dist = |c: usize| -> f64 {
                spec.cell_mean(c, s.domain_id)
                    .iter()
                    .zip(&s.features)
                    .map(|(m, x)| (m - x) * (m - x))
                    .sum()
            };
            let best = (0..spec.num_classes()).min_by(|&a, &b| dist(a).total_cmp(&dist(b))).unwrap();
            best == s.class_id
        })
        .count();
    hits as f64 / ds.len() as f64
}

#[test]
fn ce_baseline_fits_source_domains_beyond_the_cell_mean_oracle() {
    let mut cfg = TrainConfig {
        epochs: 50,
        eval_every: 5,
        held_out_domain: Some(0),
        ..TrainConfig::default()
    };
    cfg.loss.dct_weight = 0.0;
    let run = train_model(&cfg).unwrap();
    let source = run.dataset.filter_domains(|d| d != 0);
    let oracle = cell_mean_oracle(&run.spec, &source);
    let best = run
        .report
        .epochs
        .iter()
        .filter_map(|e| e.eval.as_ref().map(|v| v.source_accuracy))
        .fold(0.0, f64::max);
    println!("ce baseline: best source accuracy {best:.4}, cell-mean oracle {oracle:.4}");
    assert!(best > oracle, "{best} <= {oracle}");
    assert!(best > 0.9);
}

#[test]
fn zero_learning_rate_leaves_parameters_and_losses_fixed() {
    let mut cfg = quick(4);
    cfg.lr = 0.0;
    cfg.held_out_domain = Some(0);
    cfg.loss.use_bn = false;
    cfg.loss.classifier_input = ClassifierInput::BeforeBn;
    cfg.loss.dct_weight = 0.0;
    cfg.loss.policy = MiningPolicy::Standard;
    let run = train_model(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 3));
    let init = ModelParams::init(&cfg.encoder_dims(), cfg.mixture.num_classes, &mut rng).unwrap();
    assert_eq!(run.model.blocks(), init.blocks());
    let first = run.report.epochs[0].total_loss;
    for e in &run.report.epochs {
        assert!((e.total_loss - first).abs() < 1e-12, "{} vs {first}", e.total_loss);
    }
}

#[test]
fn same_seed_gives_bit_identical_reports() {
    let cfg = TrainConfig {
        held_out_domain: Some(1),
        ..quick(6)
    };
    let a = serde_json::to_string(&train(&cfg).unwrap()).unwrap();
    let b = serde_json::to_string(&train(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn epochs_are_recorded_in_order_with_finite_metrics() {
    let cfg = TrainConfig {
        eval_every: 2,
        held_out_domain: Some(2),
        ..quick(5)
    };
    let report = train(&cfg).unwrap();
    assert_eq!(report.epochs.len(), 5);
    for (i, e) in report.epochs.iter().enumerate() {
        assert_eq!(e.epoch, i);
        assert!(e.total_loss.is_finite() && e.ce_loss.is_finite() && e.dct_loss.is_finite());
        assert_eq!(e.eval.is_some(), i == 1 || i == 3 || i == 4);
    }
    assert!(report.held_out_accuracy.unwrap().is_finite());
}

#[test]
fn lodo_on_three_domains_reports_each_held_out_domain() {
    let mut cfg = quick(3);
    cfg.mixture.num_domains = 3;
    cfg.trials = 2;
    let s = leave_one_domain_out(&cfg).unwrap();
    assert_eq!(s.seeds, vec![cfg.seed, cfg.seed + 1]);
    assert_eq!(s.per_domain.len(), 3);
    assert_eq!(s.runs.len(), 6);
    for (d, r) in s.per_domain.iter().enumerate() {
        assert_eq!(r.domain, d);
        assert_eq!(r.accuracies.len(), 2);
    }
    let mean = s.per_domain.iter().map(|r| r.mean_accuracy).sum::<f64>() / 3.0;
    assert_eq!(s.mean_accuracy, mean);
}

#[test]
fn ablation_grid_has_nine_finite_rows_and_ce_matches_direct_training() {
    let base = quick(3);
    let rows = ablation_grid(&base).unwrap();
    assert_eq!(rows.len(), 9);
    assert_eq!(rows.iter().filter(|r| r.group == "components").count(), 4);
    for r in &rows {
        assert!(r.summary.mean_accuracy.is_finite(), "{}", r.name);
        assert!(r.summary.mean_dispersion.domain_silhouette.is_finite());
    }
    let ce = &rows[0];
    assert_eq!(ce.name, "CE");
    let mut direct = ablation_rows(&base)[0].2.clone();
    assert_eq!(direct.loss.dct_weight, 0.0);
    direct.held_out_domain = Some(2);
    assert_eq!(ce.summary.runs[2], train(&direct).unwrap());

    let mut csv = Vec::new();
    write_ablation_csv(&mut csv, &rows).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 10);
}

#[test]
fn sweep_runs_share_seeds_with_the_matching_lodo() {
    let base = quick(3);
    let rows = margin_sweep(&base, &[0.0, base.loss.margin]).unwrap();
    assert_eq!(rows[0].margin, 0.0);
    assert_eq!(rows[1].summary, leave_one_domain_out(&base).unwrap());
}

#[test]
fn exported_embeddings_round_trip_exactly() {
    let cfg = TrainConfig {
        held_out_domain: Some(0),
        ..quick(3)
    };
    let run = train_model(&cfg).unwrap();
    let emb = export_embeddings(&run.model, &cfg.loss, &run.dataset).unwrap();
    assert_eq!(emb.len(), run.dataset.len());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.csv");
    write_embeddings_csv(File::create(&path).unwrap(), &emb).unwrap();
    let back = import_embeddings(File::open(&path).unwrap()).unwrap();
    assert_eq!(back, emb);
    let report = |d: &Dataset| dispersion_report(&d.features, &d.class_labels, &d.domain_labels, 10).unwrap();
    assert_eq!(report(&back), report(&emb));
}

#[test]
fn untrained_encoder_clusters_by_domain_on_high_domain_scale_data() {
    let cfg = TrainConfig::default();
    let spec = cfg.mixture.build(cfg.seed).unwrap();
    let ds = sample_dataset(&spec, 20, 9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let model = ModelParams::init(&cfg.encoder_dims(), spec.num_classes(), &mut rng).unwrap();
    let emb = export_embeddings(&model, &cfg.loss, &ds).unwrap();
    let r = dispersion_report(&emb.features, &emb.class_labels, &emb.domain_labels, 10).unwrap();
    assert!(r.domain_knn_purity > r.class_knn_purity, "{r:?}");
}

#[test]
fn motivate_reports_growing_dominance_with_domain_scale() {
    let report = motivate(&TrainConfig::default()).unwrap();
    assert!(report.dominance.ratio > 1.0);
    let ratios: Vec<f64> = report.domain_scale_sweep.iter().skip(1).map(|p| p.dominance.ratio).collect();
    assert!(ratios.windows(2).all(|w| w[0] < w[1]), "{ratios:?}");
}
