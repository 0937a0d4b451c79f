use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::train::{train, RunReport};
use crate::dataset::format_f64;
use crate::error::Result;
use crate::losses::ClassifierInput;
use crate::metrics::DispersionReport;
use crate::mining::MiningPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainResult {
    pub domain: usize,
    /// One accuracy per trial seed.
    pub accuracies: Vec<f64>,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LodoSummary {
    pub seeds: Vec<u64>,
    pub per_domain: Vec<DomainResult>,
    /// Mean over held-out domains and trial seeds.
    pub mean_accuracy: f64,
    /// Final probe dispersion averaged over every run.
    pub mean_dispersion: DispersionReport,
    pub runs: Vec<RunReport>,
}

/// Holds out each domain in turn, for `cfg.trials` seeds `cfg.seed + t`.
///
/// Runs are independent and execute in parallel; results are ordered by
/// (trial, domain) so the summary is deterministic.
pub fn leave_one_domain_out(cfg: &TrainConfig) -> Result<LodoSummary> {
    let domains = cfg.mixture.num_domains;
    let seeds: Vec<u64> = (0..cfg.trials as u64).map(|t| cfg.seed.wrapping_add(t)).collect();
    let jobs: Vec<TrainConfig> = seeds
        .iter()
        .flat_map(|&seed| {
            (0..domains).map(move |d| TrainConfig {
                seed,
                held_out_domain: Some(d),
                ..cfg.clone()
            })
        })
        .collect();
    let runs: Vec<RunReport> = jobs.par_iter().map(train).collect::<Result<_>>()?;

    let per_domain: Vec<DomainResult> = (0..domains)
        .map(|d| {
            let accuracies: Vec<f64> = runs
                .iter()
                .filter(|r| r.held_out_domain == Some(d))
                .map(|r| r.held_out_accuracy.unwrap_or(f64::NAN))
                .collect();
            let mean_accuracy = accuracies.iter().sum::<f64>() / accuracies.len() as f64;
            DomainResult {
                domain: d,
                accuracies,
                mean_accuracy,
            }
        })
        .collect();
    let mean_accuracy = per_domain.iter().map(|r| r.mean_accuracy).sum::<f64>() / domains as f64;
    let dispersions: Vec<DispersionReport> = runs.iter().map(|r| r.final_dispersion).collect();
    Ok(LodoSummary {
        seeds,
        per_domain,
        mean_accuracy,
        mean_dispersion: DispersionReport::mean(&dispersions).expect("at least one run"),
        runs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub group: String,
    pub name: String,
    pub summary: LodoSummary,
}

/// Named configurations of the ablation grid, derived from `base`.
///
/// Component rows: CE, CE+BN, CE+BN+Triplet, CE+BN+DCT. Normalization rows
/// (all with DCT): classifier after BN, before BN, FN without BN, and the two
/// classifier placements with BN followed by FN.
pub fn ablation_rows(base: &TrainConfig) -> Vec<(&'static str, &'static str, TrainConfig)> {
    let with = |f: &dyn Fn(&mut TrainConfig)| {
        let mut c = base.clone();
        f(&mut c);
        c
    };
    let dct = |c: &mut TrainConfig| {
        c.loss.policy = MiningPolicy::DomainClass;
        c.loss.dct_weight = if base.loss.dct_weight > 0.0 { base.loss.dct_weight } else { 1.0 };
    };
    vec![
        ("components", "CE", with(&|c| {
            c.loss.use_bn = false;
            c.loss.use_fn = false;
            c.loss.classifier_input = ClassifierInput::BeforeBn;
            c.loss.dct_weight = 0.0;
        })),
        ("components", "CE+BN", with(&|c| {
            c.loss.use_bn = true;
            c.loss.use_fn = false;
            c.loss.classifier_input = ClassifierInput::AfterBn;
            c.loss.dct_weight = 0.0;
        })),
        ("components", "CE+BN+Triplet", with(&|c| {
            dct(c);
            c.loss.policy = MiningPolicy::Standard;
            c.loss.use_bn = true;
            c.loss.use_fn = false;
            c.loss.classifier_input = ClassifierInput::AfterBn;
        })),
        ("components", "CE+BN+DCT", with(&|c| {
            dct(c);
            c.loss.use_bn = true;
            c.loss.use_fn = false;
            c.loss.classifier_input = ClassifierInput::AfterBn;
        })),
        ("normalization", "after", with(&|c| {
            dct(c);
            c.loss.use_bn = true;
            c.loss.use_fn = false;
            c.loss.classifier_input = ClassifierInput::AfterBn;
        })),
        ("normalization", "before", with(&|c| {
            dct(c);
            c.loss.use_bn = true;
            c.loss.use_fn = false;
            c.loss.classifier_input = ClassifierInput::BeforeBn;
        })),
        ("normalization", "FN", with(&|c| {
            dct(c);
            c.loss.use_bn = false;
            c.loss.use_fn = true;
            c.loss.classifier_input = ClassifierInput::BeforeBn;
        })),
        ("normalization", "after+FN", with(&|c| {
            dct(c);
            c.loss.use_bn = true;
            c.loss.use_fn = true;
            c.loss.classifier_input = ClassifierInput::AfterBn;
        })),
        ("normalization", "before+FN", with(&|c| {
            dct(c);
            c.loss.use_bn = true;
            c.loss.use_fn = true;
            c.loss.classifier_input = ClassifierInput::BeforeBn;
        })),
    ]
}

pub fn ablation_grid(base: &TrainConfig) -> Result<Vec<AblationRow>> {
    ablation_rows(base)
        .into_iter()
        .map(|(group, name, cfg)| {
            Ok(AblationRow {
                group: group.into(),
                name: name.into(),
                summary: leave_one_domain_out(&cfg)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub margin: f64,
    pub summary: LodoSummary,
}

/// One leave-one-domain-out summary per margin.
pub fn margin_sweep(base: &TrainConfig, margins: &[f64]) -> Result<Vec<SweepRow>> {
    margins
        .iter()
        .map(|&margin| {
            let mut cfg = base.clone();
            cfg.loss.margin = margin;
            Ok(SweepRow {
                margin,
                summary: leave_one_domain_out(&cfg)?,
            })
        })
        .collect()
}

fn summary_header(domains: usize) -> Vec<String> {
    let mut h = vec!["held_out_mean".to_string()];
    h.extend((0..domains).map(|d| format!("held_out_d{d}")));
    h.extend(
        ["class_silhouette", "domain_silhouette", "class_knn_purity", "domain_knn_purity", "k"]
            .iter()
            .map(|s| s.to_string()),
    );
    h
}

fn summary_fields(s: &LodoSummary) -> Vec<String> {
    let mut f = vec![format_f64(s.mean_accuracy)];
    f.extend(s.per_domain.iter().map(|r| format_f64(r.mean_accuracy)));
    let d = &s.mean_dispersion;
    f.extend(
        [d.class_silhouette, d.domain_silhouette, d.class_knn_purity, d.domain_knn_purity]
            .iter()
            .map(|&v| format_f64(v)),
    );
    f.push(d.k.to_string());
    f
}

/// CSV: `group,row,held_out_mean,held_out_d*,<dispersion fields>`.
pub fn write_ablation_csv<W: Write>(writer: W, rows: &[AblationRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let domains = rows.first().map_or(0, |r| r.summary.per_domain.len());
    let mut header = vec!["group".to_string(), "row".to_string()];
    header.extend(summary_header(domains));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.group.clone(), r.name.clone()];
        rec.extend(summary_fields(&r.summary));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// CSV: `margin,held_out_mean,held_out_d*,<dispersion fields>`.
pub fn write_sweep_csv<W: Write>(writer: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let domains = rows.first().map_or(0, |r| r.summary.per_domain.len());
    let mut header = vec!["margin".to_string()];
    header.extend(summary_header(domains));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![format_f64(r.margin)];
        rec.extend(summary_fields(&r.summary));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
