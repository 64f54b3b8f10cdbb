//! Paired multi-seed comparison of two configurations.

use std::fmt::Write;

use super::config::TrainConfig;
use super::stats::{paired_ttest, TTest};
use super::trainer::{evaluate, train};
use crate::data::{Dataset, Split};
use crate::error::Result;
use crate::model::{Hqnn, ModelConfig, ModelParams};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub arm: String,
    pub seed: u64,
    pub val_acc: f64,
    pub val_auc: Option<f64>,
    pub best_epoch: usize,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    /// All runs of arm A in seed order, then arm B.
    pub rows: Vec<RunRow>,
    pub mean_a: f64,
    pub mean_b: f64,
    pub ttest: TTest,
}

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("arm,seed,val_acc,val_auc,best_epoch,epochs\n");
        for r in &self.rows {
            let auc = r.val_auc.map_or("".into(), |a| a.to_string());
            let _ = writeln!(s, "{},{},{},{},{},{}", r.arm, r.seed, r.val_acc, auc, r.best_epoch, r.epochs);
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<12} {:>6} {:>9} {:>9} {:>6}", "arm", "seed", "val_acc", "val_auc", "best");
        for r in &self.rows {
            let auc = r.val_auc.map_or("-".into(), |a| format!("{a:.4}"));
            let _ = writeln!(s, "{:<12} {:>6} {:>9.4} {:>9} {:>6}", r.arm, r.seed, r.val_acc, auc, r.best_epoch);
        }
        let arms = (&self.rows[0].arm, &self.rows[self.rows.len() - 1].arm);
        let t = &self.ttest;
        let _ = writeln!(s, "mean {} = {}", arms.0, self.mean_a);
        let _ = writeln!(s, "mean {} = {}", arms.1, self.mean_b);
        let _ = writeln!(s, "paired t = {}", t.t);
        let _ = writeln!(s, "df = {}", t.df);
        let _ = writeln!(s, "p = {}", t.p);
        let _ = writeln!(s, "degenerate = {}", t.degenerate);
        s
    }
}

/// One training run per seed; `seed` drives the split, initialisation,
/// shuffling, dropout and augmentation.
pub fn run_seed(model: &ModelConfig, train_cfg: &TrainConfig, data: &Dataset, seed: u64) -> Result<(f64, Option<f64>, usize, usize)> {
    let data = data.resplit(seed)?;
    let cfg = TrainConfig { seed, ..train_cfg.clone() };
    let net = Hqnn::new(model.clone())?;
    let params = ModelParams::init(model, seed)?;
    let out = train(&net, params, &data, &cfg)?;
    let m = evaluate(&net, &out.params, &data, Split::Val)?;
    Ok((m.accuracy, m.auc, out.history.best_epoch, out.history.epochs.len()))
}

#[allow(clippy::too_many_arguments)]
pub fn multi_seed_experiment(
    arm_a: (&str, &ModelConfig, &TrainConfig),
    arm_b: (&str, &ModelConfig, &TrainConfig),
    data: &Dataset,
    seeds: &[u64],
) -> Result<ExperimentReport> {
    if seeds.len() < 2 {
        return Err(crate::Error::config(format!("experiment needs at least 2 seeds, got {}", seeds.len())));
    }
    let arms = [arm_a, arm_b];
    let jobs = par::map_indexed(2 * seeds.len(), |k| {
        let (name, model, tc) = arms[k / seeds.len()];
        let seed = seeds[k % seeds.len()];
        run_seed(model, tc, data, seed).map(|(val_acc, val_auc, best_epoch, epochs)| RunRow {
            arm: name.to_string(),
            seed,
            val_acc,
            val_auc,
            best_epoch,
            epochs,
        })
    });
    let rows = jobs.into_iter().collect::<Result<Vec<_>>>()?;
    let (a, b): (Vec<f64>, Vec<f64>) = (
        rows[..seeds.len()].iter().map(|r| r.val_acc).collect(),
        rows[seeds.len()..].iter().map(|r| r.val_acc).collect(),
    );
    let ttest = paired_ttest(&a, &b)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(ExperimentReport { mean_a: mean(&a), mean_b: mean(&b), rows, ttest })
}
