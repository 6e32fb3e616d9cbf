mod common;

use common::*;
use gridcast::graph::normalized_adjacency;
use gridcast::layers::{
    edge_gat_forward, edge_gat_traced, edge_gcn_forward, gat_forward, gcn_forward, lstm_forward,
    EdgeGatParams, GatParams, GcnParams, LstmParams,
};
use gridcast::tensor::{Tape, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn no_dropout() -> rand::rngs::mock::StepRng {
    rand::rngs::mock::StepRng::new(0, 0)
}

fn edge_gat_params(rng: &mut ChaCha8Rng, d_in: usize, d_e: usize, heads: usize, d: usize) -> EdgeGatParams {
    let mut p = EdgeGatParams::init(rng, d_in, d_e, heads, d, 0.2, 0.0);
    // widen the scoring vector so attention is far from uniform
    for h in &mut p.heads {
        for v in h.a.data_mut() {
            *v *= 4.0;
        }
    }
    p
}

fn run_edge_gat(g: &DenseGraph, p: &EdgeGatParams) -> Tensor {
    let (nbr, attrs) = g.sparse();
    let mut tape = Tape::new();
    let h = tape.constant(g.features());
    let e = tape.constant(attrs);
    let out = edge_gat_forward(&mut tape, h, &nbr, e, p, false, &mut no_dropout()).unwrap();
    tape.value(out).clone()
}

#[test]
fn edge_gat_matches_dense_softmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 1..=4 {
        for _ in 0..5 {
            let g = random_dense_graph(&mut rng, n, 3, 4);
            let p = edge_gat_params(&mut rng, 3, 4, 3, 2);
            let got = run_edge_gat(&g, &p);
            let want = dense_edge_gat(&g, &p);
            assert_eq!(got.shape(), &[n, 6]);
            assert!(max_abs_diff(got.data(), &flatten(&want)) <= 1e-10);
        }
    }
}

#[test]
fn gat_matches_dense_softmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for n in 1..=4 {
        let g = random_dense_graph(&mut rng, n, 3, 2);
        let p = GatParams::without_edges(&edge_gat_params(&mut rng, 3, 2, 2, 3));
        let (nbr, _) = g.sparse();
        let mut tape = Tape::new();
        let h = tape.constant(g.features());
        let out = gat_forward(&mut tape, h, &nbr, &p, false, &mut no_dropout()).unwrap();
        assert!(max_abs_diff(tape.value(out).data(), &flatten(&dense_gat(&g, &p))) <= 1e-10);
    }
}

#[test]
fn gcn_matches_triple_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for n in 1..=4 {
        let g = random_dense_graph(&mut rng, n, 3, 2);
        let p = GcnParams::init(&mut rng, 3, 5);
        let a_hat = dense_normalized_adjacency(&g.mask);
        let mut tape = Tape::new();
        let h = tape.constant(g.features());
        let a = tape.constant(Tensor::from_rows(&a_hat));
        let out = gcn_forward(&mut tape, h, a, &p).unwrap();
        let want = dense_gcn(&a_hat, &g.h, &p.w);
        assert!(max_abs_diff(tape.value(out).data(), &flatten(&want)) <= 1e-12);
    }
}

#[test]
fn normalized_adjacency_matches_dense_formula() {
    for n in 1..=4 {
        let g = path_graph(n);
        let mut mask = vec![vec![false; n]; n];
        for i in 0..n {
            mask[i][i] = true;
            if i > 0 {
                mask[i][i - 1] = true;
                mask[i - 1][i] = true;
            }
        }
        let want = dense_normalized_adjacency(&mask);
        assert!(max_abs_diff(normalized_adjacency(&g).data(), &flatten(&want)) <= 1e-15);
    }
}

#[test]
fn edge_gcn_matches_neighbor_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for n in 1..=4 {
        let g = random_dense_graph(&mut rng, n, 3, 4);
        let p = GcnParams::init_edge(&mut rng, 3, 4, 5);
        let (nbr, attrs) = g.sparse();
        let mut tape = Tape::new();
        let h = tape.constant(g.features());
        let e = tape.constant(attrs);
        let out = edge_gcn_forward(&mut tape, h, &nbr, e, &p).unwrap();
        let want = enumerated_edge_gcn(&g, &p.w, p.v.as_ref().unwrap());
        assert!(max_abs_diff(tape.value(out).data(), &flatten(&want)) <= 1e-12);
    }
}

#[test]
fn lstm_matches_cell_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for (b, t, d, hidden, layers) in [(1, 1, 2, 3, 1), (3, 2, 4, 2, 2), (2, 3, 3, 4, 3)] {
        let p = LstmParams::init(&mut rng, d, hidden, layers, 0.0);
        let x: Vec<Matrix> = (0..b)
            .map(|_| {
                (0..t)
                    .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
                    .collect()
            })
            .collect();
        let flat: Vec<f64> = x.iter().flat_map(|s| s.iter().flatten().copied()).collect();
        let mut tape = Tape::new();
        let z = tape.constant(Tensor::new(vec![b, t, d], flat).unwrap());
        let out = lstm_forward(&mut tape, z, &p, false, &mut no_dropout()).unwrap();
        let want = lstm_oracle(&x, &p);
        assert_eq!(tape.shape(out), &[b, hidden]);
        assert!(max_abs_diff(tape.value(out).data(), &flatten(&want)) <= 1e-12);
    }
}

#[test]
fn zero_edge_transform_reduces_to_plain_gat_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for n in 1..=6 {
        let g = random_dense_graph(&mut rng, n, 4, 3);
        let mut p = edge_gat_params(&mut rng, 4, 3, 2, 3);
        for h in &mut p.heads {
            h.u = Tensor::zeros(h.u.shape());
        }
        let with_edges = run_edge_gat(&g, &p);
        let (nbr, _) = g.sparse();
        let mut tape = Tape::new();
        let h = tape.constant(g.features());
        let out = gat_forward(&mut tape, h, &nbr, &GatParams::without_edges(&p), false, &mut no_dropout())
            .unwrap();
        let plain = tape.value(out);
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&with_edges), bits(plain));
    }
}

fn attention_rows(g: &DenseGraph, p: &EdgeGatParams) -> Vec<Vec<f64>> {
    let (nbr, attrs) = g.sparse();
    let mut tape = Tape::new();
    let h = tape.constant(g.features());
    let e = tape.constant(attrs);
    let (_, traces) = edge_gat_traced(&mut tape, h, &nbr, e, p, false, &mut no_dropout()).unwrap();
    traces.iter().map(|t| tape.value(t.alpha).data().to_vec()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn attention_rows_sum_to_one(seed in any::<u64>(), n in 1usize..=10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_dense_graph(&mut rng, n, 3, 2);
        let p = edge_gat_params(&mut rng, 3, 2, 3, 2);
        let (nbr, _) = g.sparse();
        for alpha in attention_rows(&g, &p) {
            let mut sums = vec![0.0; n];
            for (k, a) in alpha.iter().enumerate() {
                prop_assert!(*a >= 0.0);
                sums[nbr.segment_of[k]] += a;
            }
            for s in sums {
                prop_assert!((s - 1.0).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn attention_ignores_enumeration_order(seed in any::<u64>(), n in 2usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_dense_graph(&mut rng, n, 3, 2);
        let p = edge_gat_params(&mut rng, 3, 2, 2, 2);
        let (nbr, attrs) = g.sparse();
        let mut perm: Vec<usize> = (0..nbr.len()).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng);
        let shuffled = nbr.permuted(&perm);

        let run = |idx: &gridcast::graph::NeighborhoodIndex| {
            let mut tape = Tape::new();
            let h = tape.constant(g.features());
            let e = tape.constant(attrs.clone());
            let (out, traces) =
                edge_gat_traced(&mut tape, h, idx, e, &p, false, &mut no_dropout()).unwrap();
            let alphas: Vec<Vec<f64>> =
                traces.iter().map(|t| tape.value(t.alpha).data().to_vec()).collect();
            (tape.value(out).data().to_vec(), alphas)
        };
        let (out_a, alpha_a) = run(&nbr);
        let (out_b, alpha_b) = run(&shuffled);
        prop_assert!(max_abs_diff(&out_a, &out_b) <= 1e-12);
        for (a, b) in alpha_a.iter().zip(&alpha_b) {
            for (k, &src) in perm.iter().enumerate() {
                prop_assert!((b[k] - a[src]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn segment_softmax_ignores_per_segment_shift(seed in any::<u64>(), n in 1usize..=10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_dense_graph(&mut rng, n, 1, 1);
        let (nbr, _) = g.sparse();
        let scores: Vec<f64> = (0..nbr.len()).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let shift: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let shifted: Vec<f64> = scores
            .iter()
            .enumerate()
            .map(|(k, s)| s + shift[nbr.segment_of[k]])
            .collect();
        let soft = |s: Vec<f64>| {
            let mut tape = Tape::new();
            let v = tape.constant(Tensor::vector(s));
            let a = tape.segment_softmax(v, nbr.segment_of.clone(), n).unwrap();
            tape.value(a).data().to_vec()
        };
        prop_assert!(max_abs_diff(&soft(scores), &soft(shifted)) <= 1e-12);
    }
}
