//! Acceptance suite: prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::time::Instant;

use common::*;
use gridcast::cli::{cmd_preprocess, cmd_synth, cmd_train, PreprocessArgs, SynthArgs, TrainArgs};
use gridcast::data::{generate_synthetic, preprocess, Processed, SplitName, SplitSpec, SynthConfig};
use gridcast::evaluation::{compare_models, peak_offpeak_report, predict_split, MetricReport};
use gridcast::forecaster::{forward, Batch, GraphInputs, Model, ModelConfig, Variant};
use gridcast::gradcheck::{self, GradCheckReport};
use gridcast::layers::{
    edge_gat_forward, edge_gat_traced, edge_gcn_forward, gat_forward, gcn_forward, linear_forward,
    lstm_forward, EdgeGatParams, GatParams, GcnParams, LinearParams, LstmParams,
};
use gridcast::tensor::{ParamSet, Tape, Tensor, Var};
use gridcast::training::{
    evaluate_loss, mse_loss, train, train_step, Adam, Decision, EarlyStopping, PlateauScheduler,
    RunConfig, TableWindows,
};
use gridcast::{rng, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FD_STEP: f64 = 1e-5;
const FD_TOLERANCE: f64 = 1e-4;
const MIN_CHECKED: usize = 200;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn no_dropout() -> rand::rngs::mock::StepRng {
    rand::rngs::mock::StepRng::new(0, 0)
}

fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gradient check of `Σ w ⊙ f(θ)` for a fixed random weighting `w`.
fn check_layer<P: ParamSet>(mut p: P, seed: u64, run: impl Fn(&mut Tape, &P) -> Var) -> GradCheckReport {
    let probe = {
        let mut tape = Tape::new();
        let out = run(&mut tape, &p);
        let shape = tape.shape(out).to_vec();
        let mut r = seeded(seed);
        let n: usize = shape.iter().product();
        Tensor::new(shape, (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap()
    };
    let eval = |p: &P, grads: bool| -> (f64, Vec<Tensor>) {
        let mut tape = Tape::new();
        let out = run(&mut tape, p);
        let w = tape.constant(probe.clone());
        let weighted = tape.mul(out, w).unwrap();
        let loss = tape.sum(weighted);
        let value = tape.value(loss).data()[0];
        if !grads {
            return (value, Vec::new());
        }
        tape.backward(loss).unwrap();
        let g = p
            .tensors()
            .iter()
            .map(|(_, t)| tape.param_grad(t).unwrap_or_else(|| Tensor::zeros(t.shape())))
            .collect();
        (value, g)
    };
    let (_, grads) = eval(&p, true);
    gradcheck::check(&mut p, &grads, |p| eval(p, false).0, FD_STEP, FD_TOLERANCE, None)
}

fn check_model(variant: Variant) -> GradCheckReport {
    let graph = GraphInputs::from_graph(&path_graph(3));
    let (t, d) = (2, 3);
    let mut r = seeded(31);
    let x = (0..3 * t * d).map(|_| r.gen_range(-1.0..1.0)).collect();
    let y = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();
    let batch = Batch::new(vec![0, 1, 2], Tensor::new(vec![3, t, d], x).unwrap(), Tensor::vector(y)).unwrap();
    let config = ModelConfig {
        variant,
        seq_len: t,
        gat_out: 4,
        heads: 2,
        lstm_hidden: 4,
        lstm_layers: 2,
        gat_dropout: 0.0,
        lstm_dropout: 0.0,
        d_s: d,
        d_node: graph.d_node(),
        d_e: graph.d_e(),
        leaky_slope: 0.2,
    };
    let mut model = Model::init(config, 7).unwrap();
    let loss = |m: &Model, grads: bool| -> (f64, Vec<Tensor>) {
        let mut tape = Tape::new();
        let y_hat = forward(&mut tape, &graph, &batch, m, false, &mut no_dropout()).unwrap();
        let y = tape.constant(batch.y.clone());
        let l = mse_loss(&mut tape, y_hat, y).unwrap();
        let value = tape.value(l).data()[0];
        if !grads {
            return (value, Vec::new());
        }
        tape.backward(l).unwrap();
        let g = m
            .params
            .tensors()
            .iter()
            .map(|(_, t)| tape.param_grad(t).unwrap_or_else(|| Tensor::zeros(t.shape())))
            .collect();
        (value, g)
    };
    let (_, grads) = loss(&model, true);
    let config = model.config.clone();
    gradcheck::check(
        &mut model.params,
        &grads,
        |p| {
            let m = Model {
                config: config.clone(),
                params: p.clone(),
            };
            loss(&m, false).0
        },
        FD_STEP,
        FD_TOLERANCE,
        None,
    )
}

fn gradient_integrity() -> Verdict {
    let g = path_graph(3);
    let side = GraphInputs::from_graph(&g);
    let (h, attrs, nbr, adj) = (
        side.node_features.clone(),
        side.edge_attrs.clone(),
        side.neighborhoods.clone(),
        side.adjacency.clone(),
    );
    let (d_in, d_e) = (side.d_node(), side.d_e());
    let mut reports = Vec::new();

    reports.push(("edge-gat", check_layer(EdgeGatParams::init(&mut seeded(1), d_in, d_e, 2, 3, 0.2, 0.0), 101, |tape, p| {
        let hv = tape.constant(h.clone());
        let ev = tape.constant(attrs.clone());
        edge_gat_forward(tape, hv, &nbr, ev, p, false, &mut no_dropout()).unwrap()
    })));
    reports.push(("gcn", check_layer(GcnParams::init(&mut seeded(2), d_in, 4), 102, |tape, p| {
        let hv = tape.constant(h.clone());
        let a = tape.constant(adj.clone());
        gcn_forward(tape, hv, a, p).unwrap()
    })));
    reports.push(("edge-gcn", check_layer(GcnParams::init_edge(&mut seeded(3), d_in, d_e, 4), 103, |tape, p| {
        let hv = tape.constant(h.clone());
        let ev = tape.constant(attrs.clone());
        edge_gcn_forward(tape, hv, &nbr, ev, p).unwrap()
    })));
    let mut r = seeded(4);
    let z = Tensor::new(vec![3, 2, 4], (0..24).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap();
    reports.push(("lstm", check_layer(LstmParams::init(&mut seeded(5), 4, 3, 2, 0.0), 104, |tape, p| {
        let zv = tape.constant(z.clone());
        lstm_forward(tape, zv, p, false, &mut no_dropout()).unwrap()
    })));
    let x = Tensor::new(vec![3, 4], (0..12).map(|_| r.gen_range(-1.0..1.0)).collect()).unwrap();
    reports.push(("linear", check_layer(LinearParams::init(&mut seeded(6), 4, 2), 105, |tape, p| {
        let xv = tape.constant(x.clone());
        linear_forward(tape, xv, p).unwrap()
    })));
    for v in Variant::ALL {
        reports.push((v.as_str(), check_model(v)));
    }

    let failed: Vec<String> = reports
        .iter()
        .filter(|(_, r)| !r.passed())
        .map(|(n, r)| format!("{n} ({} of {} entries)", r.failures.len(), r.checked))
        .collect();
    let gat_lstm = reports.iter().find(|(n, _)| *n == "gat-lstm").map_or(0, |(_, r)| r.checked);
    let total: usize = reports.iter().map(|(_, r)| r.checked).sum();
    let worst = reports.iter().map(|(_, r)| r.max_error).fold(0.0, f64::max);
    Verdict::new(
        failed.is_empty() && gat_lstm >= MIN_CHECKED,
        format!(
            "{total} entries over 5 layers and 4 models ({gat_lstm} in gat-lstm), max error {worst:.1e}{}",
            if failed.is_empty() { String::new() } else { format!("; failing: {}", failed.join(", ")) }
        ),
    )
}

fn attention_simplex() -> Verdict {
    let mut worst_sum: f64 = 0.0;
    let mut worst_shift: f64 = 0.0;
    let mut worst_order: f64 = 0.0;
    for k in 0..50u64 {
        let mut r = seeded(1000 + k);
        let n = r.gen_range(1..=10);
        let g = random_dense_graph(&mut r, n, 3, 2);
        let p = EdgeGatParams::init(&mut r, 3, 2, 3, 2, 0.2, 0.0);
        let (nbr, attrs) = g.sparse();
        let run = |idx: &gridcast::graph::NeighborhoodIndex| {
            let mut tape = Tape::new();
            let hv = tape.constant(g.features());
            let ev = tape.constant(attrs.clone());
            let (_, traces) = edge_gat_traced(&mut tape, hv, idx, ev, &p, false, &mut no_dropout()).unwrap();
            traces
                .iter()
                .map(|t| (tape.value(t.scores).data().to_vec(), tape.value(t.alpha).data().to_vec()))
                .collect::<Vec<_>>()
        };
        let heads = run(&nbr);
        for (scores, alpha) in &heads {
            let mut sums = vec![0.0; n];
            for (e, a) in alpha.iter().enumerate() {
                sums[nbr.segment_of[e]] += a;
            }
            for s in sums {
                worst_sum = worst_sum.max((s - 1.0).abs());
            }
            let shift: Vec<f64> = (0..n).map(|_| r.gen_range(-20.0..20.0)).collect();
            let shifted: Vec<f64> =
                scores.iter().enumerate().map(|(e, s)| s + shift[nbr.segment_of[e]]).collect();
            let mut tape = Tape::new();
            let sv = tape.constant(Tensor::vector(shifted));
            let a = tape.segment_softmax(sv, nbr.segment_of.clone(), n).unwrap();
            worst_shift = worst_shift.max(max_abs_diff(tape.value(a).data(), alpha));
        }
        let mut perm: Vec<usize> = (0..nbr.len()).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut r);
        let permuted = run(&nbr.permuted(&perm));
        for ((_, a), (_, b)) in heads.iter().zip(&permuted) {
            for (e, &src) in perm.iter().enumerate() {
                worst_order = worst_order.max((b[e] - a[src]).abs());
            }
        }
    }
    Verdict::new(
        worst_sum <= 1e-9 && worst_shift <= 1e-12 && worst_order <= 1e-12,
        format!(
            "50 graphs: max |row sum - 1| {worst_sum:.1e}, shift change {worst_shift:.1e}, reorder change {worst_order:.1e}"
        ),
    )
}

fn oracle_equivalence() -> Verdict {
    let mut r = seeded(77);
    let (mut gat, mut gcn, mut egcn, mut lstm): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for n in 1..=4 {
        for _ in 0..3 {
            let g = random_dense_graph(&mut r, n, 3, 4);
            let (nbr, attrs) = g.sparse();

            let p = EdgeGatParams::init(&mut r, 3, 4, 2, 3, 0.2, 0.0);
            let mut tape = Tape::new();
            let hv = tape.constant(g.features());
            let ev = tape.constant(attrs.clone());
            let out = edge_gat_forward(&mut tape, hv, &nbr, ev, &p, false, &mut no_dropout()).unwrap();
            gat = gat.max(max_abs_diff(tape.value(out).data(), &flatten(&dense_edge_gat(&g, &p))));

            let p = GcnParams::init(&mut r, 3, 4);
            let a_hat = dense_normalized_adjacency(&g.mask);
            let mut tape = Tape::new();
            let hv = tape.constant(g.features());
            let av = tape.constant(Tensor::from_rows(&a_hat));
            let out = gcn_forward(&mut tape, hv, av, &p).unwrap();
            gcn = gcn.max(max_abs_diff(tape.value(out).data(), &flatten(&dense_gcn(&a_hat, &g.h, &p.w))));

            let p = GcnParams::init_edge(&mut r, 3, 4, 4);
            let mut tape = Tape::new();
            let hv = tape.constant(g.features());
            let ev = tape.constant(attrs);
            let out = edge_gcn_forward(&mut tape, hv, &nbr, ev, &p).unwrap();
            let want = enumerated_edge_gcn(&g, &p.w, p.v.as_ref().unwrap());
            egcn = egcn.max(max_abs_diff(tape.value(out).data(), &flatten(&want)));
        }
        let t = n.min(3);
        let p = LstmParams::init(&mut r, 3, 4, 2, 0.0);
        let x: Vec<Matrix> = (0..n)
            .map(|_| (0..t).map(|_| (0..3).map(|_| r.gen_range(-2.0..2.0)).collect()).collect())
            .collect();
        let flat: Vec<f64> = x.iter().flat_map(|s| s.iter().flatten().copied()).collect();
        let mut tape = Tape::new();
        let zv = tape.constant(Tensor::new(vec![n, t, 3], flat).unwrap());
        let out = lstm_forward(&mut tape, zv, &p, false, &mut no_dropout()).unwrap();
        lstm = lstm.max(max_abs_diff(tape.value(out).data(), &flatten(&lstm_oracle(&x, &p))));
    }
    Verdict::new(
        gat <= 1e-10 && gcn <= 1e-12 && egcn <= 1e-12 && lstm <= 1e-12,
        format!("max deviation: edge-gat {gat:.1e}, gcn {gcn:.1e}, edge-gcn {egcn:.1e}, lstm {lstm:.1e}"),
    )
}

fn strict_generalization() -> Verdict {
    let mut identical = 0;
    let total = 20;
    for k in 0..total {
        let mut r = seeded(500 + k);
        let n = r.gen_range(1..=8);
        let g = random_dense_graph(&mut r, n, 4, 3);
        let mut p = EdgeGatParams::init(&mut seeded(900 + k), 4, 3, 3, 2, 0.2, 0.0);
        for head in &mut p.heads {
            head.u = Tensor::zeros(head.u.shape());
        }
        let (nbr, attrs) = g.sparse();
        let mut tape = Tape::new();
        let hv = tape.constant(g.features());
        let ev = tape.constant(attrs);
        let with_edges = edge_gat_forward(&mut tape, hv, &nbr, ev, &p, false, &mut no_dropout()).unwrap();
        let plain = gat_forward(&mut tape, hv, &nbr, &GatParams::without_edges(&p), false, &mut no_dropout()).unwrap();
        let bits = |v: Var| tape.value(v).data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        if bits(with_edges) == bits(plain) {
            identical += 1;
        }
    }
    Verdict::new(identical == total, format!("{identical}/{total} random graphs bitwise identical"))
}

fn training_mechanics() -> Verdict {
    let mut s = PlateauScheduler::new(1e-4, 5, 0.1);
    let mut lrs = vec![s.observe(1.0)];
    lrs.extend((0..5).map(|_| s.observe(1.0)));
    let scheduler_ok = lrs[..5].iter().all(|&lr| lr == 1e-4) && lrs[5] == 1e-5;
    let improved = s.observe(0.5);
    let stalls: Vec<f64> = (0..5).map(|_| s.observe(0.5)).collect();
    let second_ok = improved == 1e-5 && stalls[..4].iter().all(|&lr| lr == 1e-5) && stalls[4] == 1e-6;

    let mut e = EarlyStopping::new(10);
    let mut fired_at = None;
    let script = std::iter::once(1.0).chain(std::iter::repeat_n(1.0, 12));
    for (epoch, v) in script.enumerate() {
        if e.observe(v) == Decision::Stop {
            fired_at = Some(epoch);
            break;
        }
    }
    let mut reset = EarlyStopping::new(10);
    let mut reset_ok = true;
    for v in [1.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0, 0.9] {
        reset_ok &= reset.observe(v) == Decision::Continue;
    }
    Verdict::new(
        scheduler_ok && second_ok && fired_at == Some(10) && reset_ok,
        format!(
            "lr after 5 stalled epochs {:.0e} then {:.0e}; early stopping fired after {} stalled epochs",
            lrs[5],
            stalls[4],
            fired_at.map_or("no".to_owned(), |k| k.to_string())
        ),
    )
}

fn small_processed(seed: u64) -> Result<Processed> {
    let dir = tempfile::tempdir().map_err(|e| gridcast::Error::Data(e.to_string()))?;
    generate_synthetic(&small_synth(), seed)?.write(dir.path())?;
    preprocess(dir.path(), &small_spec(), Some(seed))
}

fn overfit_sanity() -> Result<Verdict> {
    let processed = small_processed(12)?;
    let graph = GraphInputs::from_graph(&processed.graph);
    let table = processed.split(SplitName::Train);
    let seq_len = 6;
    let batches: Vec<Batch> = table
        .windows(seq_len)
        .into_iter()
        .step_by(17)
        .take(20)
        .map(|w| table.batch(w, seq_len))
        .collect::<Result<_>>()?;
    let config = ModelConfig {
        variant: Variant::GatLstm,
        seq_len,
        gat_out: 8,
        heads: 2,
        lstm_hidden: 16,
        lstm_layers: 1,
        gat_dropout: 0.0,
        lstm_dropout: 0.0,
        d_s: table.width(),
        d_node: graph.d_node(),
        d_e: graph.d_e(),
        leaky_slope: 0.2,
    };
    let mut model = Model::init(config, 3)?;
    let mut adam = Adam::new(&model.params, 3e-3, 0.0);
    let mut dropout = rng::substream(3, rng::Stream::Dropout);
    let mut mse = evaluate_loss(&model, &graph, &batches, 0)?;
    let mut epochs = 0;
    while epochs < 2000 && mse >= 1e-3 {
        epochs += 1;
        for b in &batches {
            train_step(&mut model, &graph, b, &mut adam, &mut dropout)?;
        }
        if epochs % 10 == 0 {
            mse = evaluate_loss(&model, &graph, &batches, epochs)?;
        }
    }
    Ok(Verdict::new(
        mse < 1e-3,
        format!("{} windows, train MSE {mse:.2e} after {epochs} epochs", batches.len()),
    ))
}

fn benchmark_config(variant: Variant, seed: u64) -> RunConfig {
    RunConfig {
        variant,
        seed,
        gat_out: 16,
        heads: 4,
        lstm_hidden: 32,
        lstm_layers: 1,
        learning_rate: 1e-3,
        batches_per_epoch: Some(200),
        val_stride: 24,
        epochs: 30,
        ..RunConfig::default()
    }
}

struct BenchRun {
    variant: Variant,
    seed: u64,
    epochs: usize,
    stopped_early: bool,
    reports: Vec<MetricReport>,
}

fn bench_run(p: &Processed, graph: &GraphInputs, variant: Variant, seed: u64) -> Result<BenchRun> {
    let cfg = benchmark_config(variant, seed);
    let train_table = p.split(SplitName::Train);
    let val_table = p.split(SplitName::Val);
    let model = Model::init(cfg.model_config(train_table.width(), graph.d_node(), graph.d_e()), seed)?;
    let train_set = TableWindows::new(train_table, cfg.seq_len);
    let val_set = TableWindows::new(val_table, cfg.seq_len).strided(cfg.val_stride);
    let outcome = train(model, graph, &train_set, &val_set, &cfg)?;
    let to_mw = |v: &[f64]| -> Result<Vec<f64>> {
        let mut out = v.to_vec();
        p.scaler.inverse(&p.meta.load_column, &mut out)?;
        Ok(out)
    };
    let preds = predict_split(&outcome.best, graph, p.split(SplitName::Test), to_mw)?;
    let slices = peak_offpeak_report(variant.as_str(), &preds)?;
    Ok(BenchRun {
        variant,
        seed,
        epochs: outcome.history.len(),
        stopped_early: outcome.stopped_early,
        reports: slices.reports().into_iter().cloned().collect(),
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn synthetic_benchmark() -> Result<Verdict> {
    let dir = tempfile::tempdir().map_err(|e| gridcast::Error::Data(e.to_string()))?;
    let synth = SynthConfig::default();
    generate_synthetic(&synth, 42)?.write(dir.path())?;
    let processed = preprocess(dir.path(), &SplitSpec::default(), Some(42))?;
    let graph = GraphInputs::from_graph(&processed.graph);

    let mut runs = Vec::new();
    for variant in Variant::ALL {
        runs.push(bench_run(&processed, &graph, variant, 42)?);
    }
    for seed in 43..47 {
        for variant in [Variant::GatLstm, Variant::Lstm] {
            runs.push(bench_run(&processed, &graph, variant, seed)?);
        }
    }
    for r in &runs {
        let o = &r.reports[0];
        println!(
            "      {:<13} seed {} {:>2} epochs{}: MAE {:8.2} MW, RMSE {:8.2} MW, MAPE {:5.2}%",
            r.variant.as_str(),
            r.seed,
            r.epochs,
            if r.stopped_early { " (early stop)" } else { "" },
            o.mae,
            o.rmse,
            o.mape
        );
    }
    let overall = |v: Variant, seed: u64| {
        runs.iter()
            .find(|r| r.variant == v && r.seed == seed)
            .map(|r| r.reports[0].clone())
            .expect("run exists")
    };
    let gat_mape = overall(Variant::GatLstm, 42).mape;
    let slices_ok = runs.iter().all(|r| r.reports.iter().all(|m| m.mae <= m.rmse));
    let seeds: Vec<u64> = (42..47).collect();
    let gat: Vec<f64> = seeds.iter().map(|&s| overall(Variant::GatLstm, s).mae).collect();
    let lstm: Vec<f64> = seeds.iter().map(|&s| overall(Variant::Lstm, s).mae).collect();
    let violations = gat.iter().zip(&lstm).filter(|(g, l)| g > l).count();
    let (gm, lm) = (median(gat), median(lstm));
    let ordering = if gm <= lm {
        "holds".to_owned()
    } else if violations < 3 {
        format!("soft miss reported ({violations}/5 seeds reversed)")
    } else {
        format!("reversed on {violations}/5 seeds")
    };
    let ordering_ok = gm <= lm || violations < 3;
    Ok(Verdict::new(
        gat_mape < 10.0 && slices_ok && ordering_ok,
        format!(
            "gat-lstm test MAPE {gat_mape:.2}%; mae <= rmse on every slice: {slices_ok}; median MAE gat-lstm {gm:.2} vs lstm {lm:.2} MW, ordering {ordering}"
        ),
    ))
}

fn metric_fidelity() -> Verdict {
    let report = |name: &str, mae: f64, rmse: f64, mape: f64| {
        (
            name.to_owned(),
            MetricReport {
                model: name.into(),
                slice: "overall".into(),
                mae,
                rmse,
                mape,
                n: 1,
                mape_excluded: 0,
            },
        )
    };
    let ranked = compare_models(&[
        report("GAT-LSTM", 64.64, 119.06, 4.59),
        report("LSTM", 82.68, 141.55, 5.75),
        report("EdgeGCN-LSTM", 84.63, 148.09, 7.24),
        report("GCN-LSTM", 89.11, 184.12, 5.72),
    ])
    .expect("four models");
    let gain = |name: &str| ranked.iter().find(|r| r.model == name).map_or(f64::NAN, |r| r.mae_improvement);
    let (vs_lstm, vs_edge) = (gain("LSTM"), gain("EdgeGCN-LSTM"));
    Verdict::new(
        ranked[0].model == "GAT-LSTM" && (vs_lstm - 21.82).abs() <= 0.01 && (vs_edge - 23.62).abs() <= 0.01,
        format!("MAE improvement {vs_lstm:.2}% over LSTM, {vs_edge:.2}% over EdgeGCN-LSTM"),
    )
}

fn pipeline_determinism() -> Result<Verdict> {
    let dir = tempfile::tempdir().map_err(|e| gridcast::Error::Data(e.to_string()))?;
    let mut histories = Vec::new();
    for k in 0..2 {
        let root = dir.path().join(format!("run{k}"));
        std::fs::create_dir_all(&root).map_err(|e| gridcast::Error::Data(e.to_string()))?;
        let synth = root.join("synth.toml");
        let splits = root.join("splits.toml");
        let run = root.join("run.toml");
        std::fs::write(&synth, toml::to_string(&small_synth()).expect("serializes"))
            .and_then(|_| std::fs::write(&splits, toml::to_string(&small_spec()).expect("serializes")))
            .and_then(|_| std::fs::write(&run, small_run(Variant::GatLstm).to_toml()))
            .map_err(|e| gridcast::Error::Data(e.to_string()))?;
        cmd_synth(&SynthArgs {
            config: Some(synth),
            seed: 42,
            out: root.join("raw"),
        })?;
        cmd_preprocess(&PreprocessArgs {
            raw: root.join("raw"),
            out: root.join("data"),
            split_spec: Some(splits),
        })?;
        cmd_train(&TrainArgs {
            data: root.join("data"),
            model_config: Some(run),
            out: root.join("model"),
            epochs: None,
            seed: Some(42),
        })?;
        histories.push(
            std::fs::read(root.join("model/history.csv")).map_err(|e| gridcast::Error::Data(e.to_string()))?,
        );
    }
    let lines = String::from_utf8_lossy(&histories[0]).lines().count().saturating_sub(1);
    Ok(Verdict::new(
        histories[0] == histories[1] && lines > 0,
        format!("two runs, {lines} epochs each, history files identical: {}", histories[0] == histories[1]),
    ))
}

fn main() {
    type Check = fn() -> Result<Verdict>;
    let criteria: [(&str, Check); 9] = [
        ("gradient integrity", || Ok(gradient_integrity())),
        ("attention simplex", || Ok(attention_simplex())),
        ("oracle equivalence", || Ok(oracle_equivalence())),
        ("strict generalization", || Ok(strict_generalization())),
        ("training mechanics", || Ok(training_mechanics())),
        ("overfit sanity", overfit_sanity),
        ("synthetic benchmark", synthetic_benchmark),
        ("metric fidelity", || Ok(metric_fidelity())),
        ("pipeline determinism", pipeline_determinism),
    ];
    let mut failures = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let verdict = check().unwrap_or_else(|e| Verdict::new(false, format!("error: {e}")));
        let secs = started.elapsed().as_secs_f64();
        if !verdict.pass {
            failures += 1;
        }
        println!(
            "{} [{}] {name}: {} ({secs:.1}s)",
            if verdict.pass { "PASS" } else { "FAIL" },
            k + 1,
            verdict.detail
        );
    }
    if failures > 0 {
        println!("{failures} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
}
