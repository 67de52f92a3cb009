use super::*;
use crate::gnn::Architecture;
use crate::molgraph::{generate_random_library, parse_smiles, GeneratorParams};

fn quiet(weights: [f64; 5]) -> Oracle {
    Oracle::new(OracleParams {
        weights,
        noise_base: Some(0.0),
        noise_slope: 0.0,
        median_raw: Some(0.0),
        nan_fraction: 0.0,
        seed: 0,
    })
    .unwrap()
}

#[test]
fn benzene_hand_score() {
    let benzene = parse_smiles("c1ccccc1").unwrap();
    let o = quiet([1.0, 1.0, 0.0, 0.0, 0.0]);
    assert_eq!(o.dock(&benzene), -7.0);
    assert_eq!(o.noise_free(&benzene), -7.0);
    // Pyridine under the default weights: 6 aromatic, 1 ring, 1 hetero,
    // mean degree 2, 6 heavy atoms.
    let pyridine = parse_smiles("c1ccncc1").unwrap();
    let d = Oracle::new(OracleParams::default()).unwrap();
    assert!((d.noise_free(&pyridine) + (6.0 + 2.0 + 1.5 + 1.0 + 0.6)).abs() < 1e-12);
}

#[test]
fn noisy_oracle_is_keyed_by_structure() {
    let o = Oracle::new(OracleParams::default()).unwrap();
    let a = parse_smiles("OCc1ccccc1N").unwrap();
    let b = parse_smiles("Nc1ccccc1CO").unwrap();
    assert_eq!(o.dock(&a).to_bits(), o.dock(&a).to_bits());
    assert_eq!(o.dock(&a).to_bits(), o.dock(&b).to_bits());
    assert_eq!(o.noise_free(&a), o.noise_free(&b));
    let reseeded = Oracle::new(OracleParams {
        seed: 1,
        ..OracleParams::default()
    })
    .unwrap();
    assert_ne!(o.dock(&a), reseeded.dock(&a));

    let all_nan = Oracle::new(OracleParams {
        nan_fraction: 1.0,
        ..OracleParams::default()
    })
    .unwrap();
    assert!(all_nan.dock(&a).is_nan());
    assert!(!all_nan.noise_free(&a).is_nan());
}

#[test]
fn calibration_fills_unset_parameters() {
    let o = Oracle::new(OracleParams::default()).unwrap();
    let r = o.resolved_params();
    assert!(r.noise_base.unwrap() > 0.0);
    assert!(r.median_raw.unwrap() < 0.0);
    assert_eq!(Oracle::new(r.clone()).unwrap().resolved_params(), r);
    assert!(Oracle::new(OracleParams {
        nan_fraction: 1.5,
        ..OracleParams::default()
    })
    .is_err());
}

#[test]
fn nan_rate_and_noise_shape() {
    let lib = generate_random_library(
        &GeneratorParams {
            seed: 12,
            ..GeneratorParams::default()
        },
        5000,
    )
    .unwrap();
    let o = Oracle::new(OracleParams::default()).unwrap();
    let scores: Vec<f64> = lib.iter().map(|g| o.dock(g)).collect();
    let nan = scores.iter().filter(|v| v.is_nan()).count();
    // Binomial(5000, 0.01): mean 50, sd about 7.
    assert!((22..=78).contains(&nan), "{nan}");
    // Residuals above the median raw score are noisier than below it.
    let med = o.resolved_params().median_raw.unwrap();
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    for (g, s) in lib.iter().zip(&scores).filter(|(_, s)| !s.is_nan()) {
        let raw = o.noise_free(g);
        let r = (s - raw).powi(2);
        if raw > med + 2.0 {
            hi.push(r);
        } else if raw < med {
            lo.push(r);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&hi) > mean(&lo));
}

#[test]
fn speedup_formula() {
    assert!((compute_speedup(1728.0, 9.167, 0.1).unwrap() - 9.496).abs() < 1e-3);
    assert_eq!(compute_speedup(5.0, 0.0, 1.0).unwrap(), 1.0);
    assert_eq!(compute_speedup(5.0, 0.0, 0.5).unwrap(), 2.0);
    assert!(compute_speedup(0.0, 1.0, 0.5).is_err());
    assert!(compute_speedup(1.0, -1.0, 0.5).is_err());
    assert!(compute_speedup(1.0, 1.0, 0.0).is_err());
}

fn tiny_run(sigma: f64, rho: f64, seed: u64) -> Result<(Vec<MolecularGraph>, ScreeningResult), ScreeningError> {
    let lib = generate_random_library(
        &GeneratorParams {
            atom_count_range: (6, 14),
            seed: 3,
            ..GeneratorParams::default()
        },
        1000,
    )
    .unwrap();
    let cfg = PipelineConfig {
        rho,
        sigma,
        zeta_list: vec![0.01, 0.1],
        grid_points: 10,
        seed,
        ..PipelineConfig::default()
    };
    let model = ModelConfig {
        architecture: Architecture::FilmV2,
        hidden_dim: 8,
        num_layers: 2,
        ..ModelConfig::default()
    };
    let train = TrainConfig {
        max_epochs: 3,
        batch_size: 32,
        ..TrainConfig::default()
    };
    let oracle = Oracle::new(OracleParams::default()).unwrap();
    let r = run_dsd(&lib, &cfg, &model, &train, &oracle)?;
    Ok((lib, r))
}

#[test]
fn pipeline_contract() {
    let (lib, a) = tiny_run(0.1, 0.2, 5).unwrap();
    let (_, b) = tiny_run(0.1, 0.2, 5).unwrap();
    assert_eq!(a.report, b.report);
    assert_eq!(a.predictions, b.predictions);
    assert_eq!(a.selected, b.selected);

    assert_eq!(a.report.sampled, 200);
    assert_eq!(a.report.train_size + a.report.val_size + a.report.test_size + a.report.dropped_nan, 200);
    assert_eq!(a.selected.len(), 100);
    assert_eq!(a.selected, top_fraction(&a.predictions, 0.1).unwrap());
    assert_eq!(a.redocked.len(), 100);
    assert_eq!(a.ground_truth.len(), lib.len());
    let redock_nan = a.redocked.iter().filter(|v| v.is_nan()).count();
    assert_eq!(redock_nan, a.report.selected_nan);
    // Re-docking uses the same keyed oracle as sampling.
    let o = Oracle::new(OracleParams::default()).unwrap();
    for (&i, &d) in a.selected.iter().zip(&a.redocked) {
        assert_eq!(o.dock(&lib[i]).to_bits(), d.to_bits());
    }

    let dir = tempfile::tempdir().unwrap();
    let smiles: Vec<String> = lib.iter().map(|g| crate::molgraph::write_smiles(g).unwrap()).collect();
    write_artifacts(&a, &smiles, dir.path()).unwrap();
    let pred = fs::read_to_string(dir.path().join("predictions.csv")).unwrap();
    assert!(pred.starts_with("index,smiles,pred_score\n"));
    assert_eq!(pred.lines().count(), 1001);
    let sel = fs::read_to_string(dir.path().join("selection.csv")).unwrap();
    assert!(sel.starts_with("index,smiles,pred_score,dock_score\n"));
    assert_eq!(sel.lines().count(), 101);
    for f in ["report.json", "timing.json", "res_surface.csv", "history.csv", "model.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert!(write_artifacts(&a, &smiles[1..], dir.path()).is_err());
}

#[test]
fn full_selection_recalls_everything() {
    let (_, r) = tiny_run(1.0, 0.2, 1).unwrap();
    assert_eq!(r.selected.len(), 1000);
    for &(_, recall) in &r.report.recall_at_sigma {
        assert_eq!(recall, 1.0);
    }
}

#[test]
fn too_little_data_is_rejected() {
    assert!(matches!(tiny_run(0.1, 0.05, 0), Err(ScreeningError::InsufficientData(_))));
    let lib = generate_random_library(&GeneratorParams::default(), 10).unwrap();
    let o = quiet([1.0; 5]);
    let err = run_dsd(
        &lib,
        &PipelineConfig::default(),
        &ModelConfig::default(),
        &TrainConfig::default(),
        &o,
    );
    assert!(matches!(err, Err(ScreeningError::BadInput(_))));
}

#[test]
fn ground_truth_sets_survive_monotone_transforms() {
    let lib = generate_random_library(&GeneratorParams::default(), 400).unwrap();
    let o = Oracle::new(OracleParams::default()).unwrap();
    let truth: Vec<f64> = lib.iter().map(|g| o.noise_free(g)).collect();
    let warped: Vec<f64> = truth.iter().map(|v| (0.5 * v).exp() * 3.0 - 1.0).collect();
    for z in [0.01, 0.05, 0.3] {
        let mut a = top_fraction(&truth, z).unwrap();
        let mut b = top_fraction(&warped, z).unwrap();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
    }
}

#[test]
fn split_and_subsample_helpers() {
    let [tr, va, te] = split_indices(103, 4);
    assert_eq!((tr.len(), va.len(), te.len()), (82, 10, 11));
    let mut all: Vec<usize> = tr.iter().chain(&va).chain(&te).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..103).collect::<Vec<_>>());
    assert_eq!(split_indices(103, 4), [tr, va, te]);
    assert_eq!(subsample(5, 1.0, 9).unwrap(), vec![0, 1, 2, 3, 4]);
    let s = subsample(100, 0.25, 9).unwrap();
    assert_eq!(s.len(), 25);
    assert_eq!(s.iter().collect::<std::collections::HashSet<_>>().len(), 25);
    assert!(s.iter().all(|&i| i < 100));
}
