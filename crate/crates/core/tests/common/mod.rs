#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::rc::Rc;

use gridcast::cli::{cmd_preprocess, cmd_synth, PreprocessArgs, SynthArgs};
use gridcast::data::{parse_timestamp, Interval, SplitSpec, SynthConfig};
use gridcast::forecaster::Variant;
use gridcast::graph::{EdgeRecord, NeighborhoodIndex, NodeRecord, PowerGraph};
use gridcast::layers::{EdgeGatParams, GatParams, LstmParams};
use gridcast::tensor::Tensor;
use gridcast::training::RunConfig;
use rand::Rng;

pub type Matrix = Vec<Vec<f64>>;

pub fn rows(t: &Tensor) -> Matrix {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn flatten(m: &Matrix) -> Vec<f64> {
    m.iter().flatten().copied().collect()
}

/// `v · W` for a row vector `v` and `W [d_in×d_out]`.
pub fn vec_mat(v: &[f64], w: &Tensor) -> Vec<f64> {
    let (d_in, d_out) = (w.shape()[0], w.shape()[1]);
    assert_eq!(v.len(), d_in);
    (0..d_out)
        .map(|k| (0..d_in).map(|r| v[r] * w.data()[r * d_out + k]).sum())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// A graph given densely: `mask[i][j]` marks `j ∈ N(i) ∪ {i}` and
/// `attrs[i][j]` is the attribute vector of the entry `j → i`.
#[derive(Clone, Debug)]
pub struct DenseGraph {
    pub h: Matrix,
    pub mask: Vec<Vec<bool>>,
    pub attrs: Vec<Vec<Vec<f64>>>,
}

impl DenseGraph {
    pub fn n(&self) -> usize {
        self.h.len()
    }

    /// The sparse entry list and per-entry attribute rows, off-diagonal
    /// entries first and self-loops last.
    pub fn sparse(&self) -> (NeighborhoodIndex, Tensor) {
        let n = self.n();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && self.mask[i][j] {
                    entries.push((j, i));
                }
            }
        }
        entries.extend((0..n).map(|i| (i, i)));
        let d_e = self.attrs[0][0].len();
        let mut data = Vec::with_capacity(entries.len() * d_e);
        for &(j, i) in &entries {
            data.extend_from_slice(&self.attrs[i][j]);
        }
        let nbr = NeighborhoodIndex {
            sources: entries.iter().map(|e| e.0).collect::<Vec<_>>().into(),
            segment_of: entries.iter().map(|e| e.1).collect::<Vec<_>>().into(),
            edge_attr_row: (0..entries.len()).collect::<Rc<[usize]>>(),
            node_count: n,
        };
        (nbr, Tensor::new(vec![entries.len(), d_e], data).unwrap())
    }

    pub fn features(&self) -> Tensor {
        Tensor::from_rows(&self.h)
    }
}

/// Random symmetric graph with self-loops on `n` nodes.
pub fn random_dense_graph<R: Rng>(rng: &mut R, n: usize, d_in: usize, d_e: usize) -> DenseGraph {
    let density = rng.gen_range(0.1..0.9);
    let mut mask = vec![vec![false; n]; n];
    for i in 0..n {
        mask[i][i] = true;
        for j in 0..i {
            let linked = rng.gen_bool(density);
            mask[i][j] = linked;
            mask[j][i] = linked;
        }
    }
    let h = (0..n)
        .map(|_| (0..d_in).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect();
    let attrs = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| (0..d_e).map(|_| rng.gen_range(-1.5..1.5)).collect())
                .collect()
        })
        .collect();
    DenseGraph { h, mask, attrs }
}

/// Edge-attribute attention written as masked dense softmax over each row.
pub fn dense_edge_gat(g: &DenseGraph, p: &EdgeGatParams) -> Matrix {
    let n = g.n();
    let mut out = vec![Vec::new(); n];
    for head in &p.heads {
        let d = head.w.shape()[1];
        let a = head.a.data();
        let wh: Matrix = g.h.iter().map(|row| vec_mat(row, &head.w)).collect();
        for i in 0..n {
            let scores: Vec<Option<f64>> = (0..n)
                .map(|j| {
                    g.mask[i][j].then(|| {
                        let ue = vec_mat(&g.attrs[i][j], &head.u);
                        let raw = dot(&a[..d], &wh[i]) + dot(&a[d..2 * d], &wh[j]) + dot(&a[2 * d..], &ue);
                        leaky(raw, p.leaky_slope)
                    })
                })
                .collect();
            out[i].extend(attend(&scores, &wh));
        }
    }
    out
}

/// Node-feature-only attention, dense.
pub fn dense_gat(g: &DenseGraph, p: &GatParams) -> Matrix {
    let n = g.n();
    let mut out = vec![Vec::new(); n];
    for (w, a) in &p.heads {
        let d = w.shape()[1];
        let a = a.data();
        let wh: Matrix = g.h.iter().map(|row| vec_mat(row, w)).collect();
        for i in 0..n {
            let scores: Vec<Option<f64>> = (0..n)
                .map(|j| {
                    g.mask[i][j]
                        .then(|| leaky(dot(&a[..d], &wh[i]) + dot(&a[d..], &wh[j]), p.leaky_slope))
                })
                .collect();
            out[i].extend(attend(&scores, &wh));
        }
    }
    out
}

/// Softmax weights of a masked score row.
pub fn masked_softmax(scores: &[Option<f64>]) -> Vec<f64> {
    let max = scores.iter().flatten().fold(f64::NEG_INFINITY, |m, &s| m.max(s));
    let exps: Vec<f64> = scores.iter().map(|s| s.map_or(0.0, |s| (s - max).exp())).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

fn attend(scores: &[Option<f64>], wh: &Matrix) -> Vec<f64> {
    let alpha = masked_softmax(scores);
    let d = wh[0].len();
    (0..d)
        .map(|k| elu((0..wh.len()).map(|j| alpha[j] * wh[j][k]).sum()))
        .collect()
}

/// `D^{-1/2} M D^{-1/2}` for the self-looped mask `M`.
pub fn dense_normalized_adjacency(mask: &[Vec<bool>]) -> Matrix {
    let n = mask.len();
    let deg: Vec<f64> = mask
        .iter()
        .map(|row| row.iter().filter(|&&m| m).count() as f64)
        .collect();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if mask[i][j] { 1.0 / (deg[i] * deg[j]).sqrt() } else { 0.0 })
                .collect()
        })
        .collect()
}

/// `ReLU(Â (H W))` by explicit triple loops.
pub fn dense_gcn(a_hat: &Matrix, h: &Matrix, w: &Tensor) -> Matrix {
    let hw: Matrix = h.iter().map(|row| vec_mat(row, w)).collect();
    let n = h.len();
    let d = w.shape()[1];
    (0..n)
        .map(|i| {
            (0..d)
                .map(|k| (0..n).map(|j| a_hat[i][j] * hw[j][k]).sum::<f64>().max(0.0))
                .collect()
        })
        .collect()
}

/// `ReLU(mean_j (W h_j + V e_ij))` over each node's self-looped neighbors.
pub fn enumerated_edge_gcn(g: &DenseGraph, w: &Tensor, v: &Tensor) -> Matrix {
    let n = g.n();
    let d = w.shape()[1];
    (0..n)
        .map(|i| {
            let mut acc = vec![0.0; d];
            let mut count = 0.0;
            for j in (0..n).filter(|&j| g.mask[i][j]) {
                let m = vec_mat(&g.h[j], w);
                let e = vec_mat(&g.attrs[i][j], v);
                for k in 0..d {
                    acc[k] += m[k] + e[k];
                }
                count += 1.0;
            }
            acc.iter().map(|s| (s / count).max(0.0)).collect()
        })
        .collect()
}

/// Stacked LSTM evaluated one cell at a time; `x[b][t]` is the input at
/// step `t` of sample `b`. Returns the top layer's final hidden state.
pub fn lstm_oracle(x: &[Matrix], p: &LstmParams) -> Matrix {
    x.iter()
        .map(|seq| {
            let mut inputs = seq.clone();
            for layer in &p.layers {
                let hidden = layer.w_h.shape()[0];
                let mut h = vec![0.0; hidden];
                let mut c = vec![0.0; hidden];
                for step in inputs.iter_mut() {
                    let gx = vec_mat(step, &layer.w_x);
                    let gh = vec_mat(&h, &layer.w_h);
                    let z: Vec<f64> = (0..4 * hidden)
                        .map(|k| gx[k] + gh[k] + layer.b.data()[k])
                        .collect();
                    for k in 0..hidden {
                        let i = sigmoid(z[k]);
                        let f = sigmoid(z[hidden + k]);
                        let g = z[2 * hidden + k].tanh();
                        let o = sigmoid(z[3 * hidden + k]);
                        c[k] = f * c[k] + i * g;
                        h[k] = o * c[k].tanh();
                    }
                    *step = h.clone();
                }
            }
            inputs.last().cloned().unwrap_or_default()
        })
        .collect()
}

pub fn node(name: &str, x: f64) -> NodeRecord {
    NodeRecord {
        name: name.into(),
        pv_potential: 0.5 + 0.3 * x,
        onshore_wind_potential: 1.0 + 0.2 * x,
        offshore_wind_potential: (0.1 * x).max(0.0),
        longitude: -50.0 + 2.0 * x,
        latitude: -12.0 + x,
    }
}

pub fn line(s: &str, t: &str, cap: f64, len: f64, carrier: &str) -> EdgeRecord {
    EdgeRecord {
        source: s.into(),
        target: t.into(),
        capacity_mw: cap,
        efficiency: 0.97 - len / 50_000.0,
        length_km: len,
        carrier: carrier.into(),
    }
}

/// Path `N0 - N1 - … - N{n-1}` with alternating carriers.
pub fn path_graph(n: usize) -> PowerGraph {
    let names: Vec<String> = (0..n).map(|i| format!("N{i}")).collect();
    let nodes = names.iter().enumerate().map(|(i, s)| node(s, i as f64)).collect();
    let edges = (1..n)
        .map(|i| {
            let carrier = if i % 2 == 0 { "DC" } else { "AC" };
            line(&names[i - 1], &names[i], 200.0 * i as f64, 150.0 + 90.0 * i as f64, carrier)
        })
        .collect();
    PowerGraph::new(nodes, edges).unwrap()
}

pub fn ts(s: &str) -> chrono::NaiveDateTime {
    parse_timestamp(s).unwrap()
}

/// Five nodes over four weeks.
pub fn small_synth() -> SynthConfig {
    SynthConfig {
        nodes: 5,
        lines: 6,
        days: 28,
        ..SynthConfig::default()
    }
}

pub fn small_spec() -> SplitSpec {
    SplitSpec {
        train: Interval {
            start: ts("2019-01-01 00:00"),
            end: ts("2019-01-19 00:00"),
        },
        validation: Interval {
            start: ts("2019-01-19 00:00"),
            end: ts("2019-01-24 00:00"),
        },
        test: Interval {
            start: ts("2019-01-24 00:00"),
            end: ts("2019-01-29 00:00"),
        },
    }
}

/// A few-second training configuration for the small scenario.
pub fn small_run(variant: Variant) -> RunConfig {
    RunConfig {
        variant,
        seq_len: 6,
        batch_size: 5,
        gat_out: 4,
        heads: 2,
        lstm_hidden: 6,
        lstm_layers: 2,
        learning_rate: 1e-3,
        epochs: 3,
        batches_per_epoch: Some(12),
        val_stride: 12,
        splits: Some(small_spec()),
        ..RunConfig::default()
    }
}

pub struct Scenario {
    pub root: PathBuf,
    pub raw: PathBuf,
    pub data: PathBuf,
    pub synth_config: PathBuf,
    pub split_spec: PathBuf,
}

/// Writes the small synthetic scenario through the `synth` and
/// `preprocess` commands.
pub fn build_scenario(root: &Path, seed: u64) -> Scenario {
    let s = Scenario {
        root: root.to_path_buf(),
        raw: root.join("raw"),
        data: root.join("data"),
        synth_config: root.join("synth.toml"),
        split_spec: root.join("splits.toml"),
    };
    std::fs::create_dir_all(root).unwrap();
    std::fs::write(&s.synth_config, toml::to_string(&small_synth()).unwrap()).unwrap();
    std::fs::write(&s.split_spec, toml::to_string(&small_spec()).unwrap()).unwrap();
    cmd_synth(&SynthArgs {
        config: Some(s.synth_config.clone()),
        seed,
        out: s.raw.clone(),
    })
    .unwrap();
    cmd_preprocess(&PreprocessArgs {
        raw: s.raw.clone(),
        out: s.data.clone(),
        split_spec: Some(s.split_spec.clone()),
    })
    .unwrap();
    s
}

pub fn write_run_config(path: &Path, cfg: &RunConfig) {
    std::fs::write(path, cfg.to_toml()).unwrap();
}
