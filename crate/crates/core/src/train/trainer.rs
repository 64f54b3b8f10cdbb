//! The training loop with early stopping, and split-level inference.

use std::fmt::Write;
use std::time::Instant;

use super::adam::{Adam, AdamHyper};
use super::config::TrainConfig;
use super::metrics::MetricsReport;
use crate::data::{batch_iter, Dataset, Split};
use crate::error::{Error, Result};
use crate::model::{Hqnn, ModelParams, OptimizerState};
use crate::rng::{Rng, RngState};
use crate::tensor::{Graph, Mode, Tensor};

/// Patience on strictly improving validation accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: None, best_epoch: 0, stale: 0 }
    }

    /// Records `acc` for `epoch`; returns `(improved, stop)`.
    pub fn observe(&mut self, epoch: usize, acc: f64) -> (bool, bool) {
        let improved = self.best.is_none_or(|b| acc > b);
        if improved {
            self.best = Some(acc);
            self.best_epoch = epoch;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        (improved, self.stale >= self.patience)
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Patience,
    MaxEpochs,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::Patience => "patience",
            StopReason::MaxEpochs => "max_epochs",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// One-based; the learning rate used is `lr_at(epoch − 1)`.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub lr: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunHistory {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

impl RunHistory {
    pub fn best(&self) -> &EpochRecord {
        &self.epochs[self.best_epoch - 1]
    }

    /// `epoch,train_loss,train_acc,val_loss,val_acc,lr`; no timings so the
    /// file is a deterministic function of the run inputs.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,train_acc,val_loss,val_acc,lr\n");
        for e in &self.epochs {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                e.epoch, e.train_loss, e.train_acc, e.val_loss, e.val_acc, e.lr
            );
        }
        s
    }

    pub fn timing_csv(&self) -> String {
        let mut s = String::from("epoch,seconds\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},{:.3}", e.epoch, e.seconds);
        }
        let total: f64 = self.epochs.iter().map(|e| e.seconds).sum();
        let _ = writeln!(s, "total,{total:.3}");
        s
    }
}

pub struct TrainOutcome {
    /// Parameters from the best validation epoch.
    pub params: ModelParams,
    pub history: RunHistory,
    /// Optimizer and generator state after the last epoch.
    pub optimizer: OptimizerState,
    pub rng: RngState,
}

/// Per-sample outputs of an eval-mode pass over one split, in manifest order.
#[derive(Debug, Clone)]
pub struct Predictions {
    pub indices: Vec<usize>,
    pub labels: Vec<usize>,
    pub preds: Vec<usize>,
    /// Softmax probability of the malignant class.
    pub scores: Vec<f64>,
    pub loss: f64,
    pub gated: Vec<Vec<f64>>,
    pub expectations: Vec<Vec<f64>>,
}

impl Predictions {
    pub fn accuracy(&self) -> f64 {
        let hits = self.labels.iter().zip(&self.preds).filter(|(a, b)| a == b).count();
        hits as f64 / self.labels.len() as f64
    }

    pub fn report(&self) -> Result<MetricsReport> {
        MetricsReport::from_predictions(&self.labels, &self.preds, &self.scores, self.loss)
    }
}

fn row_softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = row.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|x| x / z).collect()
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn predict_split(
    model: &Hqnn,
    params: &ModelParams,
    data: &Dataset,
    split: Split,
    batch: usize,
) -> Result<Predictions> {
    let plan = batch_iter(data.manifest(), split, batch, false, &mut Rng::new(0))?;
    let mut p = Predictions {
        indices: Vec::new(),
        labels: Vec::new(),
        preds: Vec::new(),
        scores: Vec::new(),
        loss: 0.0,
        gated: Vec::new(),
        expectations: Vec::new(),
    };
    let mut loss_sum = 0.0;
    for idx in plan {
        let b = data.batch(&idx, None)?;
        let (logits, gated, exps) = model.predict(params, &b.pixels)?;
        let c = logits.shape()[1];
        for (k, row) in logits.data().chunks(c).enumerate() {
            let prob = row_softmax(row);
            loss_sum -= prob[b.labels[k]].max(f64::MIN_POSITIVE).ln();
            p.scores.push(prob[1]);
            p.preds.push(argmax(row));
        }
        let gw = gated.shape()[1];
        p.gated.extend(gated.data().chunks(gw).map(<[f64]>::to_vec));
        let ew = exps.shape()[1];
        p.expectations.extend(exps.data().chunks(ew).map(<[f64]>::to_vec));
        p.indices.extend(b.indices);
        p.labels.extend(b.labels);
    }
    p.loss = loss_sum / p.labels.len() as f64;
    Ok(p)
}

pub fn evaluate(model: &Hqnn, params: &ModelParams, data: &Dataset, split: Split) -> Result<MetricsReport> {
    predict_split(model, params, data, split, 16)?.report()
}

const TRAIN_TAG: u64 = 0x7472_6169; // "trai"

pub fn train(model: &Hqnn, params: ModelParams, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with(model, params, data, cfg, &mut |_| {})
}

/// Trains with `on_epoch` called after each epoch's validation pass.
///
/// A trailing batch of one sample is merged into the previous batch, since
/// train-mode batch statistics need at least two samples.
pub fn train_with(
    model: &Hqnn,
    mut params: ModelParams,
    data: &Dataset,
    cfg: &TrainConfig,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let manifest = data.manifest();
    let n_train = manifest.indices(Split::Train).len();
    if n_train < 2 {
        return Err(Error::data(format!("training needs at least 2 train samples, found {n_train}")));
    }
    if manifest.indices(Split::Val).is_empty() {
        return Err(Error::data("validation split is empty"));
    }
    let mut rng = Rng::substream(cfg.seed, &[TRAIN_TAG]);
    let shapes: Vec<Vec<usize>> = params
        .trainable_indices()
        .iter()
        .map(|&i| params.values()[i].shape().to_vec())
        .collect();
    let shape_refs: Vec<&[usize]> = shapes.iter().map(Vec::as_slice).collect();
    let hyper = AdamHyper { beta1: cfg.beta1, beta2: cfg.beta2, eps: cfg.eps };
    let mut adam = Adam::new(&shape_refs, hyper);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = params.clone();
    let mut epochs = Vec::new();
    let mut stop_reason = StopReason::MaxEpochs;

    for e in 0..cfg.max_epochs {
        let start = Instant::now();
        let epoch = e + 1;
        let lr = cfg.lr_at(e);
        let mut plan = batch_iter(manifest, Split::Train, cfg.batch, true, &mut rng)?;
        if plan.len() > 1 && plan.last().is_some_and(|b| b.len() == 1) {
            let tail = plan.pop().expect("non-empty");
            plan.last_mut().expect("non-empty").extend(tail);
        }
        let (mut loss_sum, mut hits) = (0.0, 0usize);
        for (bi, idx) in plan.iter().enumerate() {
            let key = cfg.augment.then_some((cfg.seed, e as u64));
            let batch = data.batch(idx, key)?;
            let mut g = Graph::new();
            let bound = model.bind(&mut g, &params, true);
            let x = g.constant(batch.pixels);
            let out = model.forward(&mut g, &bound, &params, x, Mode::Train, &mut rng)?;
            let loss = g.cross_entropy(out.logits, &batch.labels)?;
            let lv = g.value(loss).item()?;
            if !lv.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: bi + 1,
                    detail: format!("training loss is {lv}"),
                });
            }
            let logits = g.value(out.logits);
            let c = logits.shape()[1];
            hits += logits
                .data()
                .chunks(c)
                .zip(&batch.labels)
                .filter(|(row, &l)| argmax(row) == l)
                .count();
            loss_sum += lv * idx.len() as f64;
            g.backward(loss)?;
            let grads: Vec<Tensor> = bound.grads(&g, &params);
            out.apply_bn_updates(&mut params)?;
            adam.step(&mut params.trainable_mut(), &grads, lr)?;
        }
        let val = predict_split(model, &params, data, Split::Val, cfg.batch)?;
        let rec = EpochRecord {
            epoch,
            train_loss: loss_sum / n_train as f64,
            train_acc: hits as f64 / n_train as f64,
            val_loss: val.loss,
            val_acc: val.accuracy(),
            lr,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&rec);
        let (improved, stop) = stopper.observe(epoch, rec.val_acc);
        epochs.push(rec);
        if improved {
            best = params.clone();
        }
        if stop {
            stop_reason = StopReason::Patience;
            break;
        }
    }
    Ok(TrainOutcome {
        params: best,
        history: RunHistory { epochs, best_epoch: stopper.best_epoch(), stop_reason },
        optimizer: adam.state,
        rng: rng.state(),
    })
}
