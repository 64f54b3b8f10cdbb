//! End-to-end acceptance suite: one test per criterion, each a single
//! pass/fail line in the test output.
//!
//! Every numeric reference here comes from an oracle written in this file
//! (dense unitaries, loop kernels, rank statistics) rather than from the
//! library under test. The dataset check at the end only runs when
//! `HQNN_THERMO_DATA` points at a `<root>/{normal,malignant}/*.png` tree.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, PI, TAU};
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;

use hqnn::data::{stratified_split, synth_dataset, Dataset, DatasetManifest, Split};
use hqnn::model::{Hqnn, ModelConfig, ModelParams};
use hqnn::qsim::{circuit_gradient, finite_difference_gradient, Circuit, CircuitGrad, Connectivity, GradMethod};
use hqnn::rng::Rng;
use hqnn::tensor::{finite_difference, relative_error, BatchNormState, Graph, Mode, Tensor};
use hqnn::train::{lr_at, multi_seed_experiment, paired_ttest, roc_auc, EarlyStopping, MetricsReport, TrainConfig};

type Mat = Vec<Vec<Complex64>>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn identity(d: usize) -> Mat {
    (0..d).map(|r| (0..d).map(|k| c((r == k) as u8 as f64, 0.0)).collect()).collect()
}

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let d = a.len();
    (0..d)
        .map(|r| (0..d).map(|k| (0..d).map(|j| a[r][j] * b[j][k]).sum()).collect())
        .collect()
}

/// Embeds a 2×2 gate on qubit `q` (bit `q` of the basis index).
fn lift(u: [[Complex64; 2]; 2], q: usize, n: usize) -> Mat {
    let d = 1 << n;
    let mut m = vec![vec![c(0.0, 0.0); d]; d];
    for (r, row) in m.iter_mut().enumerate() {
        for (k, cell) in row.iter_mut().enumerate() {
            if r & !(1 << q) == k & !(1 << q) {
                *cell = u[r >> q & 1][k >> q & 1];
            }
        }
    }
    m
}

fn cnot(ctrl: usize, tgt: usize, n: usize) -> Mat {
    let d = 1 << n;
    let mut m = vec![vec![c(0.0, 0.0); d]; d];
    for k in 0..d {
        let r = if k >> ctrl & 1 == 1 { k ^ (1 << tgt) } else { k };
        m[r][k] = c(1.0, 0.0);
    }
    m
}

fn rx(t: f64) -> [[Complex64; 2]; 2] {
    let (co, s) = ((t / 2.0).cos(), (t / 2.0).sin());
    [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
}

fn ry(t: f64) -> [[Complex64; 2]; 2] {
    let (co, s) = ((t / 2.0).cos(), (t / 2.0).sin());
    [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
}

fn rz(t: f64) -> [[Complex64; 2]; 2] {
    let (co, s) = ((t / 2.0).cos(), (t / 2.0).sin());
    [[c(co, -s), c(0.0, 0.0)], [c(0.0, 0.0), c(co, s)]]
}

fn cnot_pairs(conn: Connectivity, n: usize) -> Vec<(usize, usize)> {
    let mut p: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
    match conn {
        Connectivity::Linear => {}
        Connectivity::Ring => p.push((n - 1, 0)),
        Connectivity::AllToAll => p = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect(),
    }
    p
}

/// Full circuit unitary as a product of dense 2^n × 2^n matrices.
fn dense_unitary(n: usize, layers: usize, conn: Connectivity, phi: &[f64], theta: &[f64]) -> Mat {
    let mut u = identity(1 << n);
    let mut push = |g: Mat| u = matmul(&g, &u);
    for (q, &p) in phi.iter().enumerate() {
        push(lift(rx(p), q, n));
    }
    for l in 0..layers {
        for q in 0..n {
            let t = &theta[(l * n + q) * 3..(l * n + q) * 3 + 3];
            push(lift(rz(t[0]), q, n));
            push(lift(ry(t[1]), q, n));
            push(lift(rz(t[2]), q, n));
        }
        for (a, b) in cnot_pairs(conn, n) {
            push(cnot(a, b, n));
        }
    }
    u
}

fn dense_expectations(u: &Mat, n: usize) -> Vec<f64> {
    let psi: Vec<Complex64> = u.iter().map(|row| row[0]).collect();
    (0..n)
        .map(|q| psi.iter().enumerate().map(|(b, a)| if b >> q & 1 == 0 { a.norm_sqr() } else { -a.norm_sqr() }).sum())
        .collect()
}

fn random_instance(rng: &mut Rng, n: usize, layers: usize) -> (Vec<f64>, Vec<f64>) {
    let phi = (0..n).map(|_| rng.uniform_range(-PI, PI)).collect();
    let theta = (0..layers * n * 3).map(|_| rng.uniform_range(0.0, TAU)).collect();
    (phi, theta)
}

#[test]
fn quantum_correctness() {
    let start = Instant::now();
    let mut rng = Rng::new(1001);
    let (mut norm_err, mut oracle_err) = (0f64, 0f64);
    for conn in Connectivity::ALL {
        let circuit = Circuit::new(4, 2, conn).unwrap();
        for _ in 0..100 {
            let (phi, theta) = random_instance(&mut rng, 4, 2);
            let state = circuit.run(&phi, &theta).unwrap();
            norm_err = norm_err.max((state.norm_sqr().sqrt() - 1.0).abs());
            let e = circuit.expectations(&phi, &theta).unwrap();
            assert!(e.iter().all(|v| (-1.0..=1.0).contains(v)), "{e:?}");
            let reference = dense_expectations(&dense_unitary(4, 2, conn, &phi, &theta), 4);
            for (a, b) in e.iter().zip(&reference) {
                assert!(b.is_finite());
                oracle_err = oracle_err.max((a - b).abs());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    println!("norm error {norm_err:.2e}, dense oracle error {oracle_err:.2e}, {secs:.2}s");
    assert!(norm_err <= 1e-10);
    assert!(oracle_err <= 1e-10);
    assert!(secs < 10.0);
}

fn flat(g: &CircuitGrad) -> Vec<f64> {
    g.d_angles.iter().chain(&g.d_theta).copied().collect()
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn gradient_agreement() {
    let start = Instant::now();
    let mut rng = Rng::new(2002);
    let mut worst = 0f64;
    for i in 0..100 {
        let conn = Connectivity::ALL[i % 3];
        let circuit = Circuit::new(4, 2, conn).unwrap();
        let (phi, theta) = random_instance(&mut rng, 4, 2);
        let up: Vec<f64> = (0..4).map(|_| rng.uniform_range(-1.0, 1.0)).collect();
        let ps = flat(&circuit_gradient(&circuit, &phi, &theta, &up, GradMethod::ParameterShift).unwrap());
        let adj = flat(&circuit_gradient(&circuit, &phi, &theta, &up, GradMethod::Adjoint).unwrap());
        let fd = flat(&finite_difference_gradient(&circuit, &phi, &theta, &up, 1e-5).unwrap());
        worst = worst.max(max_abs(&ps, &adj)).max(max_abs(&ps, &fd)).max(max_abs(&adj, &fd));
    }

    // Full network, two samples, deterministic forward.
    let cfg = ModelConfig::default();
    let model = Hqnn::new(cfg.clone()).unwrap();
    let params = ModelParams::init(&cfg, 2002).unwrap();
    let x = Tensor::from_fn(&[2, 3, 64, 64], |_| rng.normal());
    let labels = [0usize, 1];
    let loss_of = |p: &ModelParams| -> hqnn::Result<f64> {
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
    let o = model.forward(&mut g, &b, &params, xv, Mode::Eval, &mut Rng::new(0)).unwrap();
    let l = g.cross_entropy(o.logits, &labels).unwrap();
    g.backward(l).unwrap();
    let grads = b.grads(&g, &params);
    let mut model_err = 0f64;
    for (gi, &pi) in params.trainable_indices().iter().enumerate() {
        let t = &params.values()[pi];
        let mut coords: Vec<usize> = (0..3).map(|_| rng.below(t.len())).collect();
        // Also probe the largest entry of each gradient.
        let top = (0..t.len()).max_by(|&a, &b| grads[gi].data()[a].abs().total_cmp(&grads[gi].data()[b].abs())).unwrap();
        coords.push(top);
        let num = finite_difference(
            |v| {
                let mut q = params.clone();
                *q.value_mut(pi) = v.clone();
                loss_of(&q)
            },
            t,
            &coords,
            1e-5,
        )
        .unwrap();
        let auto: Vec<f64> = coords.iter().map(|&c| grads[gi].data()[c]).collect();
        model_err = model_err.max(relative_error(&auto, &num));
    }
    let secs = start.elapsed().as_secs_f64();
    println!("circuit pairwise max {worst:.2e}, network relative error {model_err:.2e}, {secs:.1}s");
    assert!(worst <= 1e-6);
    assert!(model_err <= 1e-3);
    assert!(secs < 120.0);
}

#[test]
fn analytic_circuit_identities() {
    for phi in [0.0, FRAC_PI_3, FRAC_PI_2, PI] {
        let c = Circuit::new(1, 0, Connectivity::Linear).unwrap();
        let z = c.expectations(&[phi], &[]).unwrap()[0];
        assert!((z - phi.cos()).abs() <= 1e-12, "phi {phi}: {z}");
    }
    for conn in Connectivity::ALL {
        for layers in [1, 2] {
            let circuit = Circuit::new(4, layers, conn).unwrap();
            let theta = vec![0.0; circuit.theta_len()];
            for input in 0..16usize {
                let phi: Vec<f64> = (0..4).map(|q| if input >> q & 1 == 1 { PI } else { 0.0 }).collect();
                let mut bits = input;
                for _ in 0..layers {
                    for (a, b) in cnot_pairs(conn, 4) {
                        if bits >> a & 1 == 1 {
                            bits ^= 1 << b;
                        }
                    }
                }
                let e = circuit.expectations(&phi, &theta).unwrap();
                for (q, v) in e.iter().enumerate() {
                    let expect = if bits >> q & 1 == 1 { -1.0 } else { 1.0 };
                    assert!((v - expect).abs() <= 1e-12, "{conn} L={layers} input {input:04b} qubit {q}: {v}");
                }
            }
        }
    }
}

fn random_tensor(shape: &[usize], rng: &mut Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.uniform_range(-1.0, 1.0))
}

#[test]
fn classical_layer_oracles() {
    let mut rng = Rng::new(4004);
    let mut g = Graph::new();

    // conv2d, padding 1, stride 1.
    let (b, ci, co, h, w) = (2, 3, 4, 8, 8);
    let x = random_tensor(&[b, ci, h, w], &mut rng);
    let k = random_tensor(&[co, ci, 3, 3], &mut rng);
    let bias = random_tensor(&[co], &mut rng);
    let (xv, kv, bv) = (g.constant(x.clone()), g.constant(k.clone()), g.constant(bias.clone()));
    let y = g.conv2d(xv, kv, bv, 1).unwrap();
    let at = |t: &Tensor, i: [usize; 4]| {
        let s = t.shape();
        t.data()[((i[0] * s[1] + i[1]) * s[2] + i[2]) * s[3] + i[3]]
    };
    let mut conv_err = 0f64;
    for n in 0..b {
        for o in 0..co {
            for r in 0..h {
                for col in 0..w {
                    let mut acc = bias.data()[o];
                    for i in 0..ci {
                        for dr in 0..3 {
                            for dc in 0..3 {
                                let (rr, cc) = (r as isize + dr as isize - 1, col as isize + dc as isize - 1);
                                if (0..h as isize).contains(&rr) && (0..w as isize).contains(&cc) {
                                    acc += at(&x, [n, i, rr as usize, cc as usize]) * at(&k, [o, i, dr, dc]);
                                }
                            }
                        }
                    }
                    conv_err = conv_err.max((acc - at(g.value(y), [n, o, r, col])).abs());
                }
            }
        }
    }
    assert!(conv_err <= 1e-10, "conv2d {conv_err}");

    // maxpool 2×2.
    let p = g.maxpool2d(xv, 2).unwrap();
    let mut pool_err = 0f64;
    for n in 0..b {
        for i in 0..ci {
            for r in 0..h / 2 {
                for col in 0..w / 2 {
                    let m = [(0, 0), (0, 1), (1, 0), (1, 1)]
                        .iter()
                        .map(|&(a, d)| at(&x, [n, i, 2 * r + a, 2 * col + d]))
                        .fold(f64::NEG_INFINITY, f64::max);
                    pool_err = pool_err.max((m - at(g.value(p), [n, i, r, col])).abs());
                }
            }
        }
    }
    assert!(pool_err <= 1e-10, "maxpool {pool_err}");

    // matmul.
    let (m, kk, n) = (5, 7, 3);
    let a = random_tensor(&[m, kk], &mut rng);
    let bm = random_tensor(&[kk, n], &mut rng);
    let (av, bmv) = (g.constant(a.clone()), g.constant(bm.clone()));
    let prod = g.matmul(av, bmv).unwrap();
    for r in 0..m {
        for col in 0..n {
            let s: f64 = (0..kk).map(|j| a.data()[r * kk + j] * bm.data()[j * n + col]).sum();
            assert!((s - g.value(prod).data()[r * n + col]).abs() <= 1e-10);
        }
    }

    // Softmax rows.
    let logits = Tensor::from_fn(&[6, 9], |_| rng.uniform_range(-30.0, 30.0));
    let lv = g.constant(logits);
    let sm = g.softmax(lv, 1).unwrap();
    for row in g.value(sm).data().chunks(9) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    // Multi-head self-attention of the network against per-head loops.
    let cfg = ModelConfig {
        image_size: 16,
        conv_channels: vec![4, 8, 8],
        attention_heads: 2,
        embedding_dim: 8,
        head_hidden: 6,
        ..ModelConfig::default()
    };
    let model = Hqnn::new(cfg.clone()).unwrap();
    let params = ModelParams::init(&cfg, 4004).unwrap();
    let (bsz, t, d, heads) = (2, 5, 8, 2);
    let dk = d / heads;
    let tokens = random_tensor(&[bsz, t, d], &mut rng);
    let mut g = Graph::new();
    let bound = model.bind(&mut g, &params, false);
    let tv = g.constant(tokens.clone());
    let (pooled, _) = model.self_attend(&mut g, &bound, tv).unwrap();
    let lin = |name: &str, v: &[f64]| -> Vec<f64> {
        let wt = params.get(&format!("{name}.weight")).unwrap().data();
        let bs = params.get(&format!("{name}.bias")).unwrap().data();
        (0..d).map(|o| bs[o] + (0..d).map(|i| wt[o * d + i] * v[i]).sum::<f64>()).collect()
    };
    let mut attn_err = 0f64;
    for s in 0..bsz {
        let tok = |i: usize| &tokens.data()[(s * t + i) * d..(s * t + i + 1) * d];
        let q: Vec<Vec<f64>> = (0..t).map(|i| lin("attn.q", tok(i))).collect();
        let kx: Vec<Vec<f64>> = (0..t).map(|i| lin("attn.k", tok(i))).collect();
        let v: Vec<Vec<f64>> = (0..t).map(|i| lin("attn.v", tok(i))).collect();
        let mut mean = vec![0.0; d];
        for i in 0..t {
            let mut ctx = vec![0.0; d];
            for h in 0..heads {
                let r = h * dk..(h + 1) * dk;
                let scores: Vec<f64> = (0..t)
                    .map(|j| r.clone().map(|e| q[i][e] * kx[j][e]).sum::<f64>() / (dk as f64).sqrt())
                    .collect();
                let mx = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = scores.iter().map(|s| (s - mx).exp()).sum();
                for (j, sc) in scores.iter().enumerate() {
                    for e in r.clone() {
                        ctx[e] += (sc - mx).exp() / z * v[j][e];
                    }
                }
            }
            for (m, o) in mean.iter_mut().zip(lin("attn.out", &ctx)) {
                *m += o / t as f64;
            }
        }
        for (e, m) in mean.iter().enumerate() {
            attn_err = attn_err.max((m - g.value(pooled).data()[s * d + e]).abs());
        }
    }
    assert!(attn_err <= 1e-10, "attention {attn_err}");

    // Batchnorm train-mode statistics.
    let xb = Tensor::from_fn(&[4, 3, 8, 8], |_| rng.uniform_range(-3.0, 5.0));
    let mut g = Graph::new();
    let xv = g.constant(xb);
    let gamma = g.constant(Tensor::full(&[3], 1.0));
    let beta = g.constant(Tensor::zeros(&[3]));
    let mut state = BatchNormState::new(3);
    let y = g.batchnorm(xv, gamma, beta, &mut state, Mode::Train).unwrap();
    let yv = g.value(y).data();
    for ch in 0..3 {
        let vals: Vec<f64> = (0..4).flat_map(|n| yv[(n * 3 + ch) * 64..(n * 3 + ch + 1) * 64].to_vec()).collect();
        let mu = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / vals.len() as f64;
        assert!(mu.abs() <= 1e-6 && (var - 1.0).abs() <= 1e-4, "channel {ch}: mean {mu} var {var}");
    }
    println!("conv {conv_err:.1e} pool {pool_err:.1e} attention {attn_err:.1e}");
}

#[test]
fn protocol_fidelity() {
    let mut r = 1e-4;
    for e in 0..25 {
        let expected = 1e-4 * 0.9f64.powf(e as f64);
        assert!((lr_at(e) - expected).abs() <= 1e-4 * 1e-14, "epoch {e}");
        assert!((lr_at(e) - r).abs() <= 1e-4 * 1e-14, "epoch {e}");
        r *= 0.9;
    }
    assert_eq!(lr_at(0), 1e-4);

    let labels: Vec<usize> = std::iter::repeat_n(0, 132).chain(std::iter::repeat_n(1, 130)).collect();
    let split = stratified_split(&labels, (80, 20), 42).unwrap();
    let count = |s: Split, class: usize| labels.iter().zip(&split).filter(|&(&l, &x)| l == class && x == s).count();
    assert_eq!((count(Split::Train, 0), count(Split::Train, 1)), (105, 104));
    assert_eq!((count(Split::Val, 0), count(Split::Val, 1)), (27, 26));
    assert_eq!(split.iter().filter(|&&s| s == Split::Train).count(), 209);
    assert_eq!(split.iter().filter(|&&s| s == Split::Val).count(), 53);

    let mut es = EarlyStopping::new(7);
    let script = [0.55, 0.6, 0.6, 0.58, 0.6, 0.59, 0.6, 0.6, 0.6, 0.9];
    let mut stopped_at = None;
    for (i, &acc) in script.iter().enumerate() {
        if es.observe(i + 1, acc).1 {
            stopped_at = Some(i + 1);
            break;
        }
    }
    assert_eq!(stopped_at, Some(9));
    assert_eq!(es.best_epoch(), 2);
}

#[test]
fn learnability_smoke() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let synth = synth_dataset(dir.path(), 50, 42).unwrap();
    let data = Dataset::load(synth.manifest, 64).unwrap();
    let quantum = ModelConfig::default();
    let ablation = ModelConfig { quantum_enabled: false, ..ModelConfig::default() };
    let tc = TrainConfig::default();
    let seeds = [1, 2, 3, 4, 5];
    let report = multi_seed_experiment(("hqnn", &quantum, &tc), ("ablation", &ablation, &tc), &data, &seeds).unwrap();
    print!("{}", report.to_text());
    let passing = report.rows[..5].iter().filter(|r| r.val_acc >= 0.9).count();
    let secs = start.elapsed().as_secs_f64();
    println!("{passing}/5 seeds at >= 90% validation accuracy, {secs:.0}s");
    assert!(report.rows.iter().all(|r| r.epochs <= 25));
    assert!(report.ttest.t.is_finite() && report.ttest.p.is_finite(), "{:?}", report.ttest);
    assert!(passing >= 4);
    assert!(secs < 1800.0);
}

/// Rank-sum form of the AUC: P(score⁺ > score⁻) + ½·P(tie).
fn mann_whitney(scores: &[f64], labels: &[usize]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                wins += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
            }
        }
    }
    wins / pairs
}

#[test]
fn metric_formulas() {
    let m = MetricsReport::from_confusion([[27, 0], [1, 26]], 0.0);
    assert!((m.accuracy - 53.0 / 54.0).abs() <= 1e-12);
    assert!((m.accuracy - 0.98148).abs() <= 1e-5);
    assert!((m.positive().precision - 1.0).abs() <= 1e-5);
    assert!((m.positive().recall - 0.96296).abs() <= 1e-5);

    let mut rng = Rng::new(7007);
    for set in 0..20 {
        let n = 10 + set * 3;
        let labels: Vec<usize> = (0..n).map(|i| if i < 2 { i } else { rng.below(2) }).collect();
        // Coarse scores on even sets so ties are exercised.
        let scores: Vec<f64> = (0..n)
            .map(|_| if set % 2 == 0 { (rng.uniform() * 5.0).floor() / 5.0 } else { rng.uniform() })
            .collect();
        let (_, auc) = roc_auc(&scores, &labels).unwrap();
        let oracle = mann_whitney(&scores, &labels);
        assert!((auc - oracle).abs() <= 1e-12, "set {set}: {auc} vs {oracle}");
    }
}

fn train_once(data: &Path, out: &Path) {
    let args = [
        "hqnn",
        "train",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "42",
    ];
    let mut sink = Vec::new();
    let code = hqnn::cli::run(args, &mut sink);
    assert_eq!(code, 0, "{}", String::from_utf8_lossy(&sink));
}

#[test]
fn determinism() {
    let root = tempfile::tempdir().unwrap();
    let data = root.path().join("data");
    synth_dataset(&data, 12, 42).unwrap();
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    train_once(&data, &a);
    train_once(&data, &b);
    for f in ["history.csv", "metrics.txt", "roc.csv", "features.csv", "checkpoint.bin"] {
        let (x, y) = (std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
        assert!(!x.is_empty(), "{f} is empty");
        assert!(x == y, "{f} differs between identical runs");
    }
}

#[test]
fn user_dataset_check() {
    let Some(root) = std::env::var_os("HQNN_THERMO_DATA") else {
        println!("skipped: HQNN_THERMO_DATA not set");
        return;
    };
    let root = Path::new(&root);
    let out = tempfile::tempdir().unwrap();
    train_once(root, out.path());
    let metrics = std::fs::read_to_string(out.path().join("metrics.txt")).unwrap();
    let epochs: usize = metrics
        .lines()
        .find_map(|l| l.strip_prefix("epochs = "))
        .and_then(|v| v.parse().ok())
        .unwrap();
    assert!((1..=25).contains(&epochs));
    for key in ["val.accuracy", "val.malignant.precision", "val.malignant.recall", "val.malignant.f1", "val.auc"] {
        assert!(metrics.lines().any(|l| l.starts_with(key)), "metrics.txt lacks {key}");
    }
    let roc = std::fs::read_to_string(out.path().join("roc.csv")).unwrap();
    assert!(roc.lines().count() > 2);

    let manifest = DatasetManifest::from_directory(root, 42, None).unwrap();
    let data = Dataset::load(manifest, 64).unwrap();
    let quantum = ModelConfig::default();
    let ablation = ModelConfig { quantum_enabled: false, ..ModelConfig::default() };
    let tc = TrainConfig::default();
    let report = multi_seed_experiment(("hqnn", &quantum, &tc), ("ablation", &ablation, &tc), &data, &[42, 43, 44, 45, 46]).unwrap();
    print!("{}", report.to_text());
    let t = paired_ttest(
        &report.rows[..5].iter().map(|r| r.val_acc).collect::<Vec<_>>(),
        &report.rows[5..].iter().map(|r| r.val_acc).collect::<Vec<_>>(),
    )
    .unwrap();
    assert_eq!(t, report.ttest);
    assert!(report.mean_a > report.mean_b, "quantum {} vs ablation {}", report.mean_a, report.mean_b);
}
