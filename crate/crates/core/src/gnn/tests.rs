use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::diffcore::check_gradients;
use crate::molgraph::{add_virtual_node, batch, featurize, generate_random_library, parse_smiles, GeneratorParams};

fn t1(v: f64) -> Tensor {
    Tensor::new(vec![1, 1], vec![v]).unwrap()
}

fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> Tensor {
    Tensor::new(vec![r, c], (0..r * c).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Two nodes, one edge `1 -> 0` of relation 0 and nothing else.
fn single_edge() -> Topology {
    Topology::from_edges(2, &[(1, 0)], &[0], EDGE_RELATIONS, vec![0, 0], 1)
}

fn film_1d(kind: FilmKind) -> f64 {
    let topo = single_edge();
    let mut t = Tape::new();
    let h = t.constant(Tensor::column(vec![1.0, 2.0]));
    let zero = t.constant(t1(0.0));
    let gamma = t.constant(t1(-1.0));
    let alpha = t.constant(t1(3.0));
    let beta = t.constant(t1(0.5));
    let mut p = FilmParams {
        gamma: vec![zero; EDGE_RELATIONS],
        alpha: vec![zero; EDGE_RELATIONS],
        beta: vec![zero; EDGE_RELATIONS],
    };
    p.gamma[0] = gamma;
    p.alpha[0] = alpha;
    p.beta[0] = beta;
    let out = film_layer(&mut t, h, &topo, &p, kind).unwrap();
    t.value(out).get(0, 0)
}

#[test]
fn one_dimensional_hand_cases() {
    // FiLM: relu(-1*1 * 3*2 + 0.5) = 0; FiLMv2: relu(-1)*6 + relu(0.5) = 0.5.
    assert!((film_1d(FilmKind::Film) - 0.0).abs() < 1e-12);
    assert!((film_1d(FilmKind::FilmV2) - 0.5).abs() < 1e-12);
    assert!((film_1d(FilmKind::FilmV2SourceAct) - 0.5).abs() < 1e-12);
    assert!((film_1d(FilmKind::FilmV2Tanh) - ((-1f64).tanh() * 6.0 + 0.5f64.tanh()).tanh()).abs() < 1e-12);
}

fn film_params(t: &mut Tape, w: &[[Tensor; 3]]) -> FilmParams {
    let mut p = FilmParams {
        gamma: Vec::new(),
        alpha: Vec::new(),
        beta: Vec::new(),
    };
    for [g, a, b] in w {
        p.gamma.push(t.constant(g.clone()));
        p.alpha.push(t.constant(a.clone()));
        p.beta.push(t.constant(b.clone()));
    }
    p
}

fn benzene_topology() -> (FeaturizedGraph, Topology) {
    let g = featurize(&add_virtual_node(&parse_smiles("c1ccccc1O").unwrap()).unwrap());
    let topo = Topology::new(&g);
    (g, topo)
}

#[test]
fn tanh_variant_maps_zero_to_zero_and_zero_weights_give_zero() {
    let (g, topo) = benzene_topology();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = 4;
    let n = g.num_nodes();
    let w: Vec<[Tensor; 3]> = (0..EDGE_RELATIONS)
        .map(|_| std::array::from_fn(|_| rand_matrix(&mut rng, d, d, -1.0, 1.0)))
        .collect();
    let mut t = Tape::new();
    let p = film_params(&mut t, &w);
    let h = t.constant(Tensor::zeros(&[n, d]));
    let out = film_layer(&mut t, h, &topo, &p, FilmKind::FilmV2Tanh).unwrap();
    assert!(t.value(out).data().iter().all(|&x| x == 0.0));

    let zeros: Vec<[Tensor; 3]> = (0..EDGE_RELATIONS).map(|_| std::array::from_fn(|_| Tensor::zeros(&[d, d]))).collect();
    let p = film_params(&mut t, &zeros);
    let h = t.constant(rand_matrix(&mut rng, n, d, -1.0, 1.0));
    for kind in [FilmKind::Film, FilmKind::FilmV2] {
        let out = film_layer(&mut t, h, &topo, &p, kind).unwrap();
        assert!(t.value(out).data().iter().all(|&x| x == 0.0));
    }
}

#[test]
fn filmv2_filters_feature_with_negative_rows() {
    let (g, topo) = benzene_topology();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = 5;
    let j = 2;
    let n = g.num_nodes();
    let target = 0;
    let base = rand_matrix(&mut rng, n, d, 0.1, 1.0);
    // Non-negative target state with negative column j of W_γ and W_β forces
    // both pre-activations of feature j to be negative.
    let mut w: Vec<[Tensor; 3]> = (0..EDGE_RELATIONS)
        .map(|_| std::array::from_fn(|_| rand_matrix(&mut rng, d, d, -1.0, 1.0)))
        .collect();
    for rel in &mut w {
        for k in [0, 2] {
            for row in 0..d {
                rel[k].data_mut()[row * d + j] = -rng.random_range(0.1..1.0);
            }
        }
    }
    for _ in 0..100 {
        let mut h = rand_matrix(&mut rng, n, d, -3.0, 3.0);
        h.data_mut()[target * d..(target + 1) * d].copy_from_slice(base.row(target));
        let mut t = Tape::new();
        let p = film_params(&mut t, &w);
        let hv = t.constant(h);
        let out = film_layer(&mut t, hv, &topo, &p, FilmKind::FilmV2).unwrap();
        assert_eq!(t.value(out).get(target, j), 0.0);
    }
}

#[test]
fn film_matches_filmv2_when_everything_is_non_negative() {
    let (g, topo) = benzene_topology();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let d = 6;
    let w: Vec<[Tensor; 3]> = (0..EDGE_RELATIONS)
        .map(|_| std::array::from_fn(|_| rand_matrix(&mut rng, d, d, 0.0, 1.0)))
        .collect();
    let h = rand_matrix(&mut rng, g.num_nodes(), d, 0.0, 1.0);
    let mut t = Tape::new();
    let p = film_params(&mut t, &w);
    let hv = t.constant(h);
    let a = film_layer(&mut t, hv, &topo, &p, FilmKind::Film).unwrap();
    let b = film_layer(&mut t, hv, &topo, &p, FilmKind::FilmV2).unwrap();
    let c = film_layer(&mut t, hv, &topo, &p, FilmKind::FilmV2SourceAct).unwrap();
    for ((x, y), z) in t.value(a).data().iter().zip(t.value(b).data()).zip(t.value(c).data()) {
        assert!((x - y).abs() < 1e-12);
        assert_eq!(y, z);
    }
}

#[test]
fn isolated_node_uses_only_self_loop() {
    let topo = Topology::from_edges(1, &[(0, 0)], &[RELATION_SELF_LOOP], EDGE_RELATIONS, vec![0], 1);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let d = 3;
    let w: Vec<[Tensor; 3]> = (0..EDGE_RELATIONS)
        .map(|_| std::array::from_fn(|_| rand_matrix(&mut rng, d, d, -1.0, 1.0)))
        .collect();
    let h = rand_matrix(&mut rng, 1, d, -1.0, 1.0);
    let mut t = Tape::new();
    let p = film_params(&mut t, &w);
    let hv = t.constant(h.clone());
    let out = film_layer(&mut t, hv, &topo, &p, FilmKind::FilmV2).unwrap();
    let mv = |m: &Tensor, k: usize| (0..d).map(|i| h.data()[i] * m.get(i, k)).sum::<f64>();
    let [g5, a5, b5] = &w[RELATION_SELF_LOOP];
    for k in 0..d {
        let expect = (mv(g5, k).max(0.0) * mv(a5, k) + mv(b5, k).max(0.0)).max(0.0);
        assert!((t.value(out).get(0, k) - expect).abs() < 1e-12);
    }
}

#[test]
fn gin_star_center_sums_neighbors() {
    // Center 0 with leaves 1, 2, 3 over single bonds, plus self loops.
    let mut edges = Vec::new();
    let mut rel = Vec::new();
    for leaf in 1..4 {
        edges.extend([(0, leaf), (leaf, 0)]);
        rel.extend([0, 0]);
    }
    for v in 0..4 {
        edges.push((v, v));
        rel.push(RELATION_SELF_LOOP);
    }
    let topo = Topology::from_edges(4, &edges, &rel, EDGE_RELATIONS, vec![0; 4], 1);
    let mut t = Tape::new();
    let h = t.constant(Tensor::column(vec![10.0, 1.0, 2.0, 3.0]));
    let id = t.constant(t1(1.0));
    let zero_bias = t.constant(Tensor::zeros(&[1]));
    let p = GinParams {
        relation: vec![id; EDGE_RELATIONS],
        eps: t.constant(Tensor::scalar(0.0)),
        w1: id,
        b1: zero_bias,
        w2: id,
        b2: zero_bias,
    };
    let out = gin_layer(&mut t, h, &topo, &p).unwrap();
    assert_eq!(t.value(out).get(0, 0), 16.0);
    assert_eq!(t.value(out).get(2, 0), 12.0);

    let zero = t.constant(t1(0.0));
    let p = GinParams { w1: zero, w2: zero, ..p };
    let out = gin_layer(&mut t, h, &topo, &p).unwrap();
    assert!(t.value(out).data().iter().all(|&x| x == 0.0));
}

#[test]
fn gat_attention_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let d = 3;
    // Node 0 receives from 1, 2 and itself; node 3 receives only from 2.
    let edges = [(0, 0), (1, 0), (2, 0), (2, 3)];
    let rel = [RELATION_SELF_LOOP, 0, 1, 0];
    let topo = Topology::from_edges(4, &edges, &rel, EDGE_RELATIONS, vec![0; 4], 1);
    let h = rand_matrix(&mut rng, 4, d, -1.0, 1.0);
    let mut t = Tape::new();
    let hv = t.constant(h.clone());
    let ws: Vec<Tensor> = (0..EDGE_RELATIONS).map(|_| rand_matrix(&mut rng, d, d, -1.0, 1.0)).collect();
    let source: Vec<Var> = ws.iter().map(|w| t.constant(w.clone())).collect();
    let target: Vec<Var> = (0..EDGE_RELATIONS).map(|_| t.constant(rand_matrix(&mut rng, d, d, -1.0, 1.0))).collect();
    // Zero attention vector makes every score equal.
    let attention = t.constant(Tensor::zeros(&[d, 1]));
    let p = GatParams {
        source,
        target,
        attention,
    };
    let out = gatv2_layer(&mut t, hv, &topo, &p).unwrap();
    let proj = |u: usize, r: usize, k: usize| (0..d).map(|i| h.get(u, i) * ws[r].get(i, k)).sum::<f64>();
    for k in 0..d {
        let uniform = (proj(0, RELATION_SELF_LOOP, k) + proj(1, 0, k) + proj(2, 1, k)) / 3.0;
        assert!((t.value(out).get(0, k) - uniform).abs() < 1e-12);
    }
    let attention = t.constant(rand_matrix(&mut rng, d, 1, -1.0, 1.0));
    let p = GatParams { attention, ..p };
    let out = gatv2_layer(&mut t, hv, &topo, &p).unwrap();
    for k in 0..d {
        assert!((t.value(out).get(3, k) - proj(2, 0, k)).abs() < 1e-12);
    }
}

fn config(arch: Architecture, hidden: usize, layers: usize) -> ModelConfig {
    ModelConfig {
        architecture: arch,
        hidden_dim: hidden,
        num_layers: layers,
        dropout_rate: 0.1,
        ..ModelConfig::default()
    }
}

fn small_molecules(seed: u64, count: usize) -> Vec<FeaturizedGraph> {
    let params = GeneratorParams {
        atom_count_range: (5, 12),
        seed,
        ..GeneratorParams::default()
    };
    generate_random_library(&params, count)
        .unwrap()
        .iter()
        .map(|m| featurize(&add_virtual_node(m).unwrap()))
        .collect()
}

#[test]
fn gradients_match_finite_differences_for_every_architecture() {
    // Five heavy atoms plus the virtual node.
    let g = featurize(&add_virtual_node(&parse_smiles("C1=CC(N)=CO1").unwrap()).unwrap());
    let topo = Topology::new(&g);
    for arch in Architecture::ALL {
        let model = Model::new(config(arch, 3, 2), 7).unwrap();
        let report = check_gradients(
            |t, vars| {
                let out = model.forward(t, vars, &g, &topo, None).map_err(|e| match e {
                    GnnError::Diff(d) => d,
                    other => panic!("{other}"),
                })?;
                let sq = t.mul(out, out)?;
                Ok(t.sum_all(sq))
            },
            &model.params,
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{arch}: {report:?}");
    }
}

fn permute(g: &FeaturizedGraph, perm: &[usize]) -> FeaturizedGraph {
    // perm[old] = new
    let n = g.num_nodes();
    let d = g.node_features.cols();
    let mut feats = vec![0.0; n * d];
    for old in 0..n {
        feats[perm[old] * d..(perm[old] + 1) * d].copy_from_slice(g.node_features.row(old));
    }
    FeaturizedGraph {
        node_features: Tensor::new(vec![n, d], feats).unwrap(),
        edge_index: g.edge_index.iter().map(|&(s, t)| (perm[s], perm[t])).collect(),
        edge_relation: g.edge_relation.clone(),
        graph_segment: g.graph_segment.clone(),
        num_graphs: 1,
    }
}

#[test]
fn model_is_permutation_invariant_and_batch_consistent() {
    let graphs = small_molecules(4, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for arch in Architecture::ALL {
        let model = Model::new(config(arch, 8, 3), 1).unwrap();
        let alone: Vec<f64> = graphs.iter().map(|g| model.predict(g).unwrap()[0]).collect();
        for (g, &score) in graphs.iter().zip(&alone) {
            let mut perm: Vec<usize> = (0..g.num_nodes()).collect();
            perm.shuffle(&mut rng);
            let p = model.predict(&permute(g, &perm)).unwrap()[0];
            assert!((p - score).abs() < 1e-9, "{arch}");
        }
        let refs: Vec<&FeaturizedGraph> = graphs.iter().collect();
        let batched = model.predict(&batch(&refs)).unwrap();
        for (a, b) in batched.iter().zip(&alone) {
            assert!((a - b).abs() < 1e-9, "{arch}");
        }
        let twice = model.predict(&batch(&[&graphs[0], &graphs[0]])).unwrap();
        assert_eq!(twice[0], twice[1]);
    }
}

#[test]
fn evaluation_is_deterministic_and_dropout_is_not() {
    let graphs = small_molecules(2, 3);
    let refs: Vec<&FeaturizedGraph> = graphs.iter().collect();
    let g = batch(&refs);
    let model = Model::new(config(Architecture::FilmV2, 16, 3), 0).unwrap();
    assert_eq!(model.predict(&g).unwrap(), model.predict(&g).unwrap());

    let topo = Topology::new(&g);
    let run = |seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = Tape::new();
        let vars: Vec<Var> = model.params.iter().map(|p| t.constant(p.clone())).collect();
        let out = model.forward(&mut t, &vars, &g, &topo, Some(&mut rng)).unwrap();
        t.value(out).data().to_vec()
    };
    assert_eq!(run(1), run(1));
    assert_ne!(run(1), model.predict(&g).unwrap());
}

#[test]
fn seeded_init_and_named_round_trip() {
    let c = config(Architecture::Gin, 8, 2);
    let a = Model::new(c.clone(), 3).unwrap();
    assert_eq!(a, Model::new(c.clone(), 3).unwrap());
    assert_ne!(a.params, Model::new(c.clone(), 4).unwrap().params);
    assert_eq!(Model::from_named(c.clone(), a.named_params()).unwrap(), a);
    let mut named = a.named_params();
    named.swap(0, 1);
    assert!(Model::from_named(c, named).is_err());
    for (name, shape) in a.names().iter().zip(a.params.iter().map(Tensor::shape)) {
        if name.ends_with("gain") {
            assert_eq!(a.params[a.index[name]].data(), vec![1.0; shape[0]].as_slice());
        }
    }
}

#[test]
fn config_validation_and_names() {
    assert!(ModelConfig::default().validate().is_ok());
    assert!(config(Architecture::Film, 0, 2).validate().is_err());
    assert!(ModelConfig { dropout_rate: 1.0, ..ModelConfig::default() }.validate().is_err());
    for a in Architecture::ALL {
        assert_eq!(a.name().parse::<Architecture>().unwrap(), a);
        let json = serde_json::to_string(&a).unwrap();
        assert_eq!(json, format!("\"{a}\""));
    }
    assert!("GCN".parse::<Architecture>().is_err());
    let empty = FeaturizedGraph {
        node_features: Tensor::zeros(&[0, NODE_FEATURES]),
        edge_index: vec![],
        edge_relation: vec![],
        graph_segment: vec![],
        num_graphs: 0,
    };
    let model = Model::new(ModelConfig::default(), 0).unwrap();
    assert_eq!(model.predict(&empty), Err(GnnError::EmptyBatch));
}
