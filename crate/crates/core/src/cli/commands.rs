use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::config::{parse_assignment, RunConfig};
use super::ConfigArgs;
use crate::data::{synth_dataset, Dataset, DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::model::{count_params, Checkpoint, Hqnn, ModelConfig, ModelParams};
use crate::qsim::{circuit_gradient, finite_difference_gradient, Circuit, Connectivity, GradMethod};
use crate::rng::Rng;
use crate::tensor::{finite_difference, relative_error, Graph, Mode, Tensor};
use crate::train::{
    export_features, multi_seed_experiment, predict_split, train_with, MetricsReport, RunHistory,
};

fn emit(out: &mut dyn Write, text: impl AsRef<str>) -> Result<()> {
    writeln!(out, "{}", text.as_ref()).map_err(|e| Error::file("<stdout>", e))
}

fn write_file(path: &Path, text: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::file(path, e))
}

fn path_value(p: &Path) -> String {
    toml::Value::String(p.display().to_string()).to_string()
}

pub fn cmd_synth(dir: &Path, per_class: usize, seed: u64, out: &mut dyn Write) -> Result<()> {
    if per_class < 4 {
        return Err(Error::config(format!("--per-class must be at least 4, got {per_class}")));
    }
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let mut echo = toml::Table::new();
    echo.insert("command".into(), "synth".into());
    echo.insert("out".into(), dir.display().to_string().into());
    echo.insert("per_class".into(), (per_class as i64).into());
    echo.insert("seed".into(), (seed as i64).into());
    write_file(&dir.join("config.resolved"), toml::to_string(&echo).expect("table serialises"))?;
    let s = synth_dataset(dir, per_class, seed)?;
    emit(out, format!("wrote {} images to {}", s.manifest.records.len(), dir.display()))?;
    emit(out, s.manifest.summary())
}

/// The manifest with absolute paths, so it can live in the run directory.
fn portable(manifest: &DatasetManifest, root: &Path) -> Result<DatasetManifest> {
    let base = fs::canonicalize(&manifest.root).map_err(|e| Error::file(&manifest.root, e))?;
    let mut m = manifest.clone();
    for r in &mut m.records {
        r.path = base.join(&r.path);
    }
    m.root = root.to_path_buf();
    Ok(m)
}

fn report_lines(prefix: &str, r: &MetricsReport) -> String {
    r.to_text().lines().map(|l| format!("{prefix}.{l}\n")).collect()
}

fn write_split_outputs(
    dir: &Path,
    model: &Hqnn,
    params: &ModelParams,
    data: &Dataset,
    split: Split,
    report: &MetricsReport,
) -> Result<()> {
    write_file(&dir.join("roc.csv"), report.roc_csv())?;
    export_features(model, params, data, split, &dir.join("features.csv"))?;
    Ok(())
}

pub fn cmd_train(
    args: &ConfigArgs,
    data: Option<PathBuf>,
    test_data: Option<PathBuf>,
    dir: Option<PathBuf>,
    out: &mut dyn Write,
) -> Result<()> {
    let mut extra = Vec::new();
    for (k, v) in [("data", &data), ("test_data", &test_data), ("out", &dir)] {
        if let Some(p) = v {
            extra.push((k.to_string(), path_value(p)));
        }
    }
    let rc = args.resolve(&extra)?;
    let data_root = rc.data.clone().ok_or_else(|| Error::config("no dataset given (--data or `data` key)"))?;
    rc.echo(&rc.out)?;
    let manifest = DatasetManifest::from_directory(&data_root, rc.seed, rc.test_data.as_deref())?;
    portable(&manifest, &rc.out)?.write(&rc.out.join("manifest.tsv"))?;
    emit(out, manifest.summary())?;
    let data = Dataset::load(manifest, rc.model.image_size)?;
    let model = Hqnn::new(rc.model.clone())?;
    let params = ModelParams::init(&rc.model, rc.seed)?;
    let outcome = train_with(&model, params, &data, &rc.train, &mut |e| {
        eprintln!(
            "epoch {:>2}  train loss {:.4} acc {:.4}  val loss {:.4} acc {:.4}  lr {:.3e}  {:.1}s",
            e.epoch, e.train_loss, e.train_acc, e.val_loss, e.val_acc, e.lr, e.seconds
        );
    })?;
    let h: &RunHistory = &outcome.history;
    Checkpoint {
        config: rc.model.clone(),
        params: outcome.params.clone(),
        optimizer: Some(outcome.optimizer.clone()),
        rng: outcome.rng,
        epoch: h.epochs.len() as u64,
    }
    .save(&rc.out.join("checkpoint.bin"))?;
    write_file(&rc.out.join("history.csv"), h.to_csv())?;
    write_file(&rc.out.join("timing.csv"), h.timing_csv())?;

    let val = predict_split(&model, &outcome.params, &data, Split::Val, rc.train.batch)?.report()?;
    let mut metrics = format!(
        "epochs = {}\nbest_epoch = {}\nstop_reason = {}\ntrainable_params = {}\n",
        h.epochs.len(),
        h.best_epoch,
        h.stop_reason,
        count_params(&rc.model)?.total
    );
    metrics.push_str(&report_lines("val", &val));
    let mut shown = (Split::Val, val);
    if !data.manifest().indices(Split::Test).is_empty() {
        let test = predict_split(&model, &outcome.params, &data, Split::Test, rc.train.batch)?.report()?;
        metrics.push_str(&report_lines("test", &test));
        shown = (Split::Test, test);
    }
    write_file(&rc.out.join("metrics.txt"), metrics)?;
    write_split_outputs(&rc.out, &model, &outcome.params, &data, shown.0, &shown.1)?;
    emit(out, format!("best epoch {} of {} ({})", h.best_epoch, h.epochs.len(), h.stop_reason))?;
    emit(out, format!("{} split:", shown.0))?;
    emit(out, shown.1.table())?;
    emit(out, format!("outputs in {}", rc.out.display()))
}

pub fn cmd_eval(
    checkpoint: &Path,
    data: Option<PathBuf>,
    split: &str,
    dir: Option<PathBuf>,
    args: &ConfigArgs,
    out: &mut dyn Write,
) -> Result<()> {
    let split: Split = split.parse()?;
    let ck = Checkpoint::load(checkpoint)?;
    let overrides = args.overrides()?;
    let rc = if args.config.is_some() || !overrides.is_empty() {
        let rc = args.resolve(&[])?;
        ck.check_config(&rc.model)?;
        rc
    } else {
        RunConfig { seed: ck.rng.seed, model: ck.config.clone(), ..RunConfig::default() }
    };
    let ckdir = checkpoint.parent().unwrap_or(Path::new("."));
    let dir = dir.unwrap_or_else(|| ckdir.join(format!("eval_{split}")));
    let echo = RunConfig { out: dir.clone(), data: data.clone(), ..rc.clone() };
    echo.echo(&dir)?;
    let manifest = match &data {
        Some(root) => DatasetManifest::from_directory(root, args.seed.unwrap_or(ck.rng.seed), None)?,
        None => DatasetManifest::read(&ckdir.join("manifest.tsv"))?,
    };
    let data = Dataset::load(manifest, ck.config.image_size)?;
    let model = Hqnn::new(ck.config.clone())?;
    let report = predict_split(&model, &ck.params, &data, split, 16)?.report()?;
    write_file(&dir.join("metrics.txt"), report_lines(&split.to_string(), &report))?;
    write_split_outputs(&dir, &model, &ck.params, &data, split, &report)?;
    emit(out, format!("{split} split, {} samples:", report.n))?;
    emit(out, report.table())
}

fn parse_floats(text: &str, what: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::config(format!("malformed {what}: {s:?}")))
        })
        .collect()
}

pub fn cmd_qsim(
    angles: &str,
    theta_file: Option<&Path>,
    theta_zero: bool,
    connectivity: &str,
    layers: usize,
    out: &mut dyn Write,
) -> Result<()> {
    let angles = parse_floats(angles, "angle list")?;
    if angles.is_empty() {
        return Err(Error::config("empty angle list"));
    }
    let conn: Connectivity = connectivity.parse()?;
    let circuit = Circuit::new(angles.len(), layers, conn)?;
    let theta = match (theta_file, theta_zero) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).map_err(|e| Error::file(p, e))?;
            let t = parse_floats(&text, "theta file")?;
            if t.len() != circuit.theta_len() {
                return Err(Error::config(format!(
                    "theta file holds {} values, circuit needs {}",
                    t.len(),
                    circuit.theta_len()
                )));
            }
            t
        }
        (None, true) => vec![0.0; circuit.theta_len()],
        (None, false) => return Err(Error::config("pass --theta-file or --theta-zero")),
    };
    let gates = circuit.gates(&angles, &theta)?;
    emit(
        out,
        format!(
            "{} gates: {} encoding, {} layers × ({} Rot + {} CNOT), {conn} connectivity",
            gates.len(),
            angles.len(),
            layers,
            angles.len(),
            conn.pairs(angles.len()).len()
        ),
    )?;
    for g in &gates {
        emit(out, g.to_string())?;
    }
    for (i, e) in circuit.expectations(&angles, &theta)?.iter().enumerate() {
        emit(out, format!("<Z{i}> = {e:.10}"))?;
    }
    Ok(())
}

/// Tiny network used by the gradient check.
fn tiny_config() -> ModelConfig {
    ModelConfig {
        image_size: 16,
        conv_channels: vec![4, 8, 8],
        attention_heads: 2,
        embedding_dim: 8,
        head_hidden: 6,
        ..ModelConfig::default()
    }
}

pub fn cmd_gradcheck(seed: u64, eps: f64, out: &mut dyn Write) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::config(format!("--eps must be positive, got {eps}")));
    }
    if eps < 1e-8 {
        let msg = format!(
            "warning: eps {eps:e} is small enough that finite differences are dominated by floating-point cancellation"
        );
        eprintln!("{msg}");
        emit(out, &msg)?;
    }
    let mut rng = Rng::substream(seed, &[0x6772_6164]);
    let (mut ps_adj, mut fd_adj, mut fd_ps) = (0f64, 0f64, 0f64);
    for conn in Connectivity::ALL {
        let c = Circuit::new(4, 2, conn)?;
        for _ in 0..10 {
            let angles: Vec<f64> = (0..4).map(|_| rng.uniform_range(-3.2, 3.2)).collect();
            let theta: Vec<f64> = (0..c.theta_len()).map(|_| rng.uniform_range(0.0, 6.3)).collect();
            let up: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
            let adj = circuit_gradient(&c, &angles, &theta, &up, GradMethod::Adjoint)?;
            let ps = circuit_gradient(&c, &angles, &theta, &up, GradMethod::ParameterShift)?;
            let fd = finite_difference_gradient(&c, &angles, &theta, &up, eps)?;
            let flat = |g: &crate::qsim::CircuitGrad| [g.d_angles.clone(), g.d_theta.clone()].concat();
            ps_adj = ps_adj.max(relative_error(&flat(&ps), &flat(&adj)));
            fd_adj = fd_adj.max(relative_error(&flat(&adj), &flat(&fd)));
            fd_ps = fd_ps.max(relative_error(&flat(&ps), &flat(&fd)));
        }
    }
    emit(out, format!("circuit  parameter-shift vs adjoint      {ps_adj:.3e}"))?;
    emit(out, format!("circuit  adjoint vs finite difference    {fd_adj:.3e}"))?;
    emit(out, format!("circuit  parameter-shift vs finite diff  {fd_ps:.3e}"))?;

    let cfg = tiny_config();
    let model = Hqnn::new(cfg.clone())?;
    let params = ModelParams::init(&cfg, seed)?;
    let x = Tensor::from_fn(&[2, 3, cfg.image_size, cfg.image_size], |_| rng.normal());
    let labels = [0usize, 1];
    let loss_of = |p: &ModelParams| -> Result<f64> {
        let mut g = Graph::new();
        let b = model.bind(&mut g, p, false);
        let xv = g.constant(x.clone());
        let o = model.forward(&mut g, &b, p, xv, Mode::Eval, &mut Rng::new(0))?;
        let l = g.cross_entropy(o.logits, &labels)?;
        g.value(l).item()
    };
    let mut g = Graph::new();
    let b = model.bind(&mut g, &params, true);
    let xv = g.constant(x.clone());
    let o = model.forward(&mut g, &b, &params, xv, Mode::Eval, &mut Rng::new(0))?;
    let l = g.cross_entropy(o.logits, &labels)?;
    g.backward(l)?;
    let grads = b.grads(&g, &params);
    let mut model_err = 0f64;
    for (gi, &pi) in params.trainable_indices().iter().enumerate() {
        let t = &params.values()[pi];
        let coords: Vec<usize> = (0..t.len().min(3)).map(|_| rng.below(t.len())).collect();
        let num = finite_difference(
            |v| {
                let mut q = params.clone();
                *q.value_mut(pi) = v.clone();
                loss_of(&q)
            },
            t,
            &coords,
            eps,
        )?;
        let auto: Vec<f64> = coords.iter().map(|&c| grads[gi].data()[c]).collect();
        model_err = model_err.max(relative_error(&auto, &num));
    }
    emit(out, format!("network  autodiff vs finite difference   {model_err:.3e}"))?;
    let worst = ps_adj.max(fd_adj).max(fd_ps).max(model_err);
    if worst.is_nan() || worst > 1e-3 {
        return Err(Error::Numerical(format!("max relative error {worst:.3e} exceeds 1e-3")));
    }
    emit(out, "all gradient comparisons within 1e-3")
}

fn parse_seeds(spec: &str, base: u64) -> Result<Vec<u64>> {
    let bad = || Error::config(format!("malformed --seeds {spec:?}"));
    if spec.contains(',') {
        spec.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
    } else {
        let n: u64 = spec.trim().parse().map_err(|_| bad())?;
        Ok((0..n).map(|k| base + k).collect())
    }
}

pub fn cmd_experiment(
    config_a: Option<&Path>,
    config_b: Option<&Path>,
    seeds: &str,
    data: Option<PathBuf>,
    dir: Option<PathBuf>,
    set: &[String],
    out: &mut dyn Write,
) -> Result<()> {
    let mut overrides = set.iter().map(|s| parse_assignment(s)).collect::<Result<Vec<_>>>()?;
    for (k, v) in [("data", &data), ("out", &dir)] {
        if let Some(p) = v {
            overrides.push((k.to_string(), path_value(p)));
        }
    }
    let a = RunConfig::resolve(config_a, &overrides)?;
    let b = match config_b {
        Some(p) => RunConfig::resolve(Some(p), &overrides)?,
        None => {
            let mut b = a.clone();
            b.model.quantum_enabled = false;
            b
        }
    };
    let seeds = parse_seeds(seeds, a.seed)?;
    let data_root = a.data.clone().ok_or_else(|| Error::config("no dataset given (--data or `data` key)"))?;
    let mut echo = toml::Table::new();
    echo.insert("seeds".into(), seeds.iter().map(|&s| s as i64).collect::<Vec<_>>().into());
    echo.insert("a".into(), toml::Value::Table(toml::Table::try_from(&a).expect("serialises")));
    echo.insert("b".into(), toml::Value::Table(toml::Table::try_from(&b).expect("serialises")));
    fs::create_dir_all(&a.out).map_err(|e| Error::file(&a.out, e))?;
    write_file(&a.out.join("config.resolved"), toml::to_string(&echo).expect("serialises"))?;

    let manifest = DatasetManifest::from_directory(&data_root, a.seed, a.test_data.as_deref())?;
    let ds = Dataset::load(manifest, a.model.image_size)?;
    let names = if a.model.quantum_enabled != b.model.quantum_enabled {
        let n = |q: bool| if q { "quantum" } else { "classical" };
        (n(a.model.quantum_enabled), n(b.model.quantum_enabled))
    } else {
        ("a", "b")
    };
    let report = multi_seed_experiment(
        (names.0, &a.model, &a.train),
        (names.1, &b.model, &b.train),
        &ds,
        &seeds,
    )?;
    write_file(&a.out.join("experiment.csv"), report.to_csv())?;
    write_file(&a.out.join("comparison.txt"), report.to_text())?;
    emit(out, report.to_text())
}
