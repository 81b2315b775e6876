//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//!
//! The full-dataset check runs only when `MOFML_FULL_DATA` names the CSV export.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use mofml_core::artifacts::{
    load_bundle, predict, save_bundle, BundleMetadata, FeatureSchema, FeatureValue, ModelBundle,
    ModelParams, SCHEMA_VERSION,
};
use mofml_core::evaluate::{compare_models, CompareOptions, ModelConfig};
use mofml_core::forest::{forest_fit, ForestConfig};
use mofml_core::ingest::{
    clean, parse_mof_name, CleaningRules, ColumnMap, FeatureKind, NameFeatures, RawTable,
};
use mofml_core::linear::{
    default_lambda_grid, lambda_max, lasso_fit, lasso_path, linear_fit, LassoModel, LassoOptions,
    LinearModel,
};
use mofml_core::neuralnet::{nn_backward, nn_forward, nn_init, LayerSpec, Network};
use mofml_core::numeric::{sym_eigen_default, Matrix, RandomStream};
use mofml_core::pipeline::{load_table, PipelineConfig};
use mofml_core::preprocess::{fit_scaler, pca_fit, PcaTarget, Scaler};
use mofml_core::synth::{friedman1, mof_csv, MOF_HEADERS};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_matrix(n: usize, d: usize, s: &mut RandomStream) -> Matrix {
    Matrix::from_vec(n, d, (0..n * d).map(|_| s.next_normal()).collect()).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn ols_planted_recovery() -> Outcome {
    let start = Instant::now();
    let mut s = RandomStream::new(2024);
    let x = random_matrix(50, 3, &mut s);
    let (w, b) = ([1.75, -0.5, 3.0], -2.25);
    let y: Vec<f64> = x.rows().map(|r| dot(r, &w) + b).collect();
    let m = linear_fit(&x, &y).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let err = m
        .weights
        .iter()
        .zip(w)
        .map(|(a, t)| (a - t).abs())
        .fold((m.intercept - b).abs(), f64::max);
    check(
        err < 1e-8 && elapsed < Duration::from_secs(1),
        format!("max |error| {err:.2e}, {elapsed:.2?}"),
    )
}

fn lasso_support_recovery() -> Outcome {
    let mut s = RandomStream::new(77);
    let raw = random_matrix(200, 10, &mut s);
    let x = fit_scaler(&raw)
        .and_then(|sc| sc.apply(&raw))
        .map_err(|e| e.to_string())?;
    let y: Vec<f64> = x
        .rows()
        .map(|r| 3.0 * r[0] - 2.0 * r[1] + 1.5 * r[2] + 0.5 * s.next_normal())
        .collect();
    let grid = default_lambda_grid(&x, &y, 40, 1e-3);
    let opts = LassoOptions {
        record_objective: true,
        ..Default::default()
    };
    let path = lasso_path(&x, &y, &grid, &opts).map_err(|e| e.to_string())?;
    let exact = path.iter().filter(|m| m.support() == [0, 1, 2]).count();

    let top = lambda_max(&x, &y);
    let zero_at_max = [top, 2.0 * top]
        .iter()
        .map(|&l| lasso_fit(&x, &y, l, &opts).map(|m| m.weights.iter().all(|w| *w == 0.0)))
        .collect::<Result<Vec<bool>, _>>()
        .map_err(|e| e.to_string())?;
    let worst_increase = path
        .iter()
        .flat_map(|m| {
            m.objective_trace
                .windows(2)
                .map(|p| (p[1] - p[0]) / p[0].abs())
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let monotone = worst_increase <= 4.0 * f64::EPSILON;
    check(
        exact > 0 && zero_at_max.iter().all(|z| *z) && monotone,
        format!("{exact}/{} grid points select exactly {{0,1,2}}, zero at lambda_max: {zero_at_max:?}, objective nonincreasing within 4 ulp (worst relative step {worst_increase:.1e})", grid.len()),
    )
}

fn pca_correctness() -> Outcome {
    let mut s = RandomStream::new(9);
    let full = random_matrix(120, 5, &mut s);
    let p = pca_fit(&full, PcaTarget::Components(5)).map_err(|e| e.to_string())?;
    let ratio_sum: f64 = p.full_explained_ratio.iter().sum();

    let direction = [0.3, -1.2, 0.7, 2.0];
    let rows: Vec<Vec<f64>> = (0..60)
        .map(|_| {
            let t = s.next_normal();
            direction
                .iter()
                .enumerate()
                .map(|(j, v)| t * v + j as f64)
                .collect()
        })
        .collect();
    let rank1 = pca_fit(&Matrix::from_rows(&rows), PcaTarget::VarianceThreshold(0.9))
        .map_err(|e| e.to_string())?;

    let mut worst: f64 = 0.0;
    for trial in 0..20 {
        let mut a = Matrix::zeros(6, 6);
        for i in 0..6 {
            for j in 0..=i {
                let v = s.next_normal() * (1.0 + trial as f64);
                a.set(i, j, v);
                a.set(j, i, v);
            }
        }
        let e = sym_eigen_default(&a).map_err(|e| e.to_string())?;
        for i in 0..6 {
            for j in 0..6 {
                let mut acc = 0.0;
                for k in 0..6 {
                    acc += e.vectors.get(i, k) * e.values[k] * e.vectors.get(j, k);
                }
                worst = worst.max((acc - a.get(i, j)).abs());
            }
        }
    }
    check(
        (ratio_sum - 1.0).abs() < 1e-9 && rank1.n_components() == 1 && worst < 1e-8,
        format!(
            "ratio sum - 1 = {:.1e}, rank-1 k = {}, worst reconstruction error {worst:.1e}",
            ratio_sum - 1.0,
            rank1.n_components()
        ),
    )
}

fn mse_loss(net: &Network, x: &Matrix, y: &[f64]) -> f64 {
    let (p, _) = nn_forward(net, x).unwrap();
    p.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for seed in [11u64, 12, 13] {
        let mut s = RandomStream::new(seed);
        let net = nn_init(4, &[LayerSpec::relu(2), LayerSpec::linear(1)], &mut s)
            .map_err(|e| e.to_string())?;
        let x = random_matrix(16, 4, &mut s);
        let y: Vec<f64> = (0..16).map(|_| s.next_normal()).collect();
        let (_, cache) = nn_forward(&net, &x).map_err(|e| e.to_string())?;
        let analytic = nn_backward(&net, &cache, &y)
            .map_err(|e| e.to_string())?
            .flatten();
        let base = net.parameters();
        for k in 0..base.len() {
            let mut probe = net.clone();
            let mut p = base.clone();
            p[k] = base[k] + h;
            probe.set_parameters(&p).unwrap();
            let up = mse_loss(&probe, &x, &y);
            p[k] = base[k] - h;
            probe.set_parameters(&p).unwrap();
            let numeric = (up - mse_loss(&probe, &x, &y)) / (2.0 * h);
            let scale = numeric.abs().max(analytic[k].abs()).max(1e-7);
            worst = worst.max((numeric - analytic[k]).abs() / scale);
        }
    }
    let elapsed = start.elapsed();
    check(
        worst < 1e-4 && elapsed < Duration::from_secs(5),
        format!("worst relative error {worst:.1e}, {elapsed:.2?}"),
    )
}

fn model_ordering() -> Outcome {
    let start = Instant::now();
    let mut wins = 0;
    let mut notes = Vec::new();
    for seed in 0..10u64 {
        let table = friedman1(2000, 1.0, 1000 + seed);
        let run = compare_models(
            &table,
            &ModelConfig::all_defaults(),
            &CompareOptions {
                seed,
                ..Default::default()
            },
        )
        .map_err(|e| e.to_string())?;
        let mse = |name: &str| {
            run.report
                .row(name)
                .and_then(|r| r.test)
                .map(|m| m.mse)
                .unwrap_or(f64::INFINITY)
        };
        let (linear, forest, nn) = (mse("linear"), mse("forest"), mse("neural_net"));
        if nn < linear && forest < linear {
            wins += 1;
        } else {
            notes.push(format!(
                "seed {seed}: linear {linear:.3} forest {forest:.3} nn {nn:.3}"
            ));
        }
    }
    let elapsed = start.elapsed();
    check(
        wins >= 9 && elapsed < Duration::from_secs(120),
        format!(
            "{wins}/10 seeds with nn and forest below linear, {elapsed:.1?} {}",
            notes.join("; ")
        ),
    )
}

fn end_to_end_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    common::write_mof_project(tmp.path(), 400, 5);
    for out in ["first", "second"] {
        let status = Command::new(env!("CARGO_BIN_EXE_mofml"))
            .args([
                "train",
                "--config",
                "config.toml",
                "--out",
                out,
                "--seed",
                "17",
            ])
            .current_dir(tmp.path())
            .env("RUST_LOG", "error")
            .output()
            .map_err(|e| e.to_string())?
            .status;
        if !status.success() {
            return Err(format!("mofml train exited with {status}"));
        }
    }
    let mut compared = 0;
    let mut entries: Vec<_> = std::fs::read_dir(tmp.path().join("first"))
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".mofml.json") || n == "comparison.csv")
        .collect();
    entries.sort();
    for name in &entries {
        let a = std::fs::read(tmp.path().join("first").join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(tmp.path().join("second").join(name)).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("{name} differs between runs"));
        }
        compared += 1;
    }
    check(
        compared == 6,
        format!("{compared} files byte-identical: {}", entries.join(" ")),
    )
}

fn name_round_trip() -> Outcome {
    let mut s = RandomStream::new(31337);
    let letters: Vec<char> = ('a'..='z').collect();
    for _ in 0..10_000 {
        let net_len = 1 + s.next_below(5);
        let name = NameFeatures {
            metal_units: s.next_below(1000) as u32,
            linker1_count: s.next_below(1000) as u32,
            linker2_count: s.next_below(1000) as u32,
            net_code: (0..net_len).map(|_| letters[s.next_below(26)]).collect(),
            space_group: s.next_below(100_000) as u32,
        };
        let text = name.to_string();
        let parsed = parse_mof_name(&text).map_err(|e| e.to_string())?;
        if parsed.to_string() != text || parsed != name {
            return Err(format!("{text} re-formats as {parsed}"));
        }
    }
    let example = parse_mof_name("str_m5_o16_o16_sra_sym.77").map_err(|e| e.to_string())?;
    let expected = (5, 16, 16, "sra", 77);
    let got = (
        example.metal_units,
        example.linker1_count,
        example.linker2_count,
        example.net_code.as_str(),
        example.space_group,
    );
    check(
        got == expected,
        format!("10000 generated names round-trip, example parses to {got:?}"),
    )
}

fn defect_fixture() -> String {
    let mut rows = vec![MOF_HEADERS.join(",")];
    let good = [
        "str_m1_o2_o3_pcu_sym.10",
        "0.5",
        "0.8",
        "6.1",
        "4.2",
        "1500",
        "900",
        "3000",
        "1e-5",
        "-20",
        "H",
        "2.5",
        "30",
    ];
    rows.push(good.join(","));
    let defects: [(usize, &str); 8] = [
        (11, ""),
        (1, "NaN"),
        (5, "-3"),
        (1, "1.4"),
        (0, "not_a_mof"),
        (9, "NA"),
        (7, "abc"),
        (10, ""),
    ];
    for (col, value) in defects {
        let mut row: Vec<&str> = good.to_vec();
        row[col] = value;
        rows.push(row.join(","));
    }
    rows.join("\n") + "\n"
}

fn cleaning_conservation() -> Outcome {
    let mut fixtures: Vec<(String, String)> = vec![("defects".into(), defect_fixture())];
    for (i, (n, dirty)) in [(20, 0.0), (200, 0.1), (500, 0.3), (300, 0.9)]
        .into_iter()
        .enumerate()
    {
        fixtures.push((format!("synthetic{i}"), mof_csv(n, dirty, 40 + i as u64)));
    }
    let map = ColumnMap::materials_cloud_default();
    let rules = CleaningRules::default();
    let mut summary = Vec::new();
    for (label, text) in &fixtures {
        let raw = RawTable::from_reader(text.as_bytes()).map_err(|e| format!("{label}: {e}"))?;
        let table = clean(&raw, &map, &rules).map_err(|e| format!("{label}: {e}"))?;
        if table.n_rows() + table.drop_reasons.total() != raw.n_rows()
            || table.input_rows != raw.n_rows()
        {
            return Err(format!(
                "{label}: {} kept + {} dropped != {} input",
                table.n_rows(),
                table.drop_reasons.total(),
                raw.n_rows()
            ));
        }
        let again = clean(&raw.select_rows(&table.kept_rows), &map, &rules)
            .map_err(|e| format!("{label}: {e}"))?;
        if again.x != table.x
            || again.y != table.y
            || again.codebooks != table.codebooks
            || again.dropped_row_count != 0
        {
            return Err(format!(
                "{label}: cleaning the cleaned rows changed the table"
            ));
        }
        summary.push(format!(
            "{label} {}+{}={}",
            table.n_rows(),
            table.drop_reasons.total(),
            raw.n_rows()
        ));
    }
    check(true, summary.join(", "))
}

fn random_bundle(kind: usize, seed: u64) -> ModelBundle {
    let mut s = RandomStream::new(seed);
    let d = 1 + s.next_below(5);
    let names: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
    let scaler = Scaler {
        means: (0..d).map(|_| s.next_normal()).collect(),
        stds: (0..d).map(|_| 0.1 + 3.0 * s.next_uniform()).collect(),
        constant_features: Vec::new(),
    };
    let mut target_scaler = None;
    let params = match kind {
        0 => ModelParams::Linear(LinearModel {
            weights: (0..d).map(|_| s.next_normal() * 100.0).collect(),
            intercept: s.next_normal() / 3.0,
            trained_on: names.clone(),
        }),
        1 => ModelParams::Lasso(
            LassoModel {
                weights: (0..d)
                    .map(|_| {
                        if s.next_uniform() < 0.4 {
                            0.0
                        } else {
                            s.next_normal()
                        }
                    })
                    .collect(),
                intercept: s.next_normal(),
                lambda: s.next_uniform(),
                n_iterations: 1,
                converged: true,
                trained_on: names.clone(),
                selected: Vec::new(),
                objective_trace: Vec::new(),
            }
            .with_feature_names(names.clone()),
        ),
        2 => {
            let x = random_matrix(40, d, &mut s);
            let y: Vec<f64> = x
                .rows()
                .map(|r| r.iter().map(|v| v.cos()).sum::<f64>())
                .collect();
            let config = ForestConfig {
                n_trees: 4,
                max_depth: 5,
                min_samples_leaf: 2,
                seed,
                ..Default::default()
            };
            ModelParams::Forest(
                forest_fit(&x, &y, &config)
                    .unwrap()
                    .with_feature_names(names.clone()),
            )
        }
        _ => {
            target_scaler = Some(Scaler {
                means: vec![s.next_normal()],
                stds: vec![0.5 + s.next_uniform()],
                constant_features: Vec::new(),
            });
            let mut net = nn_init(d, &LayerSpec::stack(&[6, 3]), &mut s).unwrap();
            let p: Vec<f64> = net
                .parameters()
                .iter()
                .map(|v| v + 0.1 * s.next_normal())
                .collect();
            net.set_parameters(&p).unwrap();
            ModelParams::NeuralNet(net)
        }
    };
    ModelBundle {
        schema_version: SCHEMA_VERSION,
        kind: params.kind(),
        model_name: params.kind().as_str().into(),
        features: names
            .iter()
            .map(|n| FeatureSchema {
                name: n.clone(),
                kind: FeatureKind::Numeric,
                min: -3.0,
                max: 3.0,
            })
            .collect(),
        codebooks: Vec::new(),
        name_column: None,
        scaler,
        target_scaler,
        pca: None,
        params,
        metadata: BundleMetadata {
            seed,
            created_at: None,
            dataset_fingerprint: "sha256:00".into(),
            feature_names: names.clone(),
            target_name: "y".into(),
            hyperparameters: String::new(),
            train_metrics: None,
            test_metrics: None,
            config: serde_json::Value::Null,
        },
    }
}

fn serialization_round_trip() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut checked = 0;
    for kind in 0..4 {
        for i in 0..100u64 {
            let bundle = random_bundle(kind, 7919 * i + kind as u64);
            let path = tmp.path().join("model.mofml.json");
            save_bundle(&bundle, &path).map_err(|e| e.to_string())?;
            let loaded = load_bundle(&path).map_err(|e| e.to_string())?;
            let mut s = RandomStream::new(i);
            for _ in 0..20 {
                let x: Vec<f64> = (0..bundle.n_features())
                    .map(|_| 2.0 * s.next_normal())
                    .collect();
                let inputs: BTreeMap<String, FeatureValue> = x
                    .iter()
                    .enumerate()
                    .map(|(j, v)| (format!("f{j}"), FeatureValue::Number(*v)))
                    .collect();
                let a = predict(&bundle, &inputs).map_err(|e| e.to_string())?.value;
                let b = predict(&loaded, &inputs).map_err(|e| e.to_string())?.value;
                let raw_a = bundle
                    .params
                    .regressor()
                    .predict_row(&x)
                    .map_err(|e| e.to_string())?;
                let raw_b = loaded
                    .params
                    .regressor()
                    .predict_row(&x)
                    .map_err(|e| e.to_string())?;
                if a.to_bits() != b.to_bits() || raw_a.to_bits() != raw_b.to_bits() {
                    return Err(format!("{} model {i}: {a} != {b}", bundle.kind.as_str()));
                }
            }
            checked += 1;
        }
    }
    check(
        checked == 400,
        format!("{checked} models (100 per kind) predict bit-identically after reload"),
    )
}

/// Reference set of top-ranked descriptors for the full dataset.
const REFERENCE_TOP: [&str; 6] = [
    "void_fraction",
    "linker1_count",
    "linker2_count",
    "void_volume [cm^3/g]",
    "metal_units",
    "surface_area [m^2/g]",
];

fn full_dataset(path: &Path) -> Outcome {
    let config = PipelineConfig::new(path);
    let table = load_table(&config).map_err(|e| e.to_string())?;
    let selectivity = table
        .analysis_names
        .iter()
        .position(|n| n == "CO2/N2_selectivity")
        .ok_or("no selectivity column")?;
    let sel = table.analysis.column(selectivity);
    let r = pearson(&table.y, &sel);
    let forest_config = ForestConfig {
        n_trees: 30,
        seed: 1,
        ..Default::default()
    };
    let forest = forest_fit(&table.x, &table.y, &forest_config)
        .map_err(|e| e.to_string())?
        .with_feature_names(table.feature_names.clone());
    let top: Vec<String> = forest
        .importance_table()
        .into_iter()
        .take(6)
        .map(|row| row.feature)
        .collect();
    let overlap = top
        .iter()
        .filter(|f| REFERENCE_TOP.contains(&f.as_str()))
        .count();
    check(
        r > 0.0 && overlap >= 3,
        format!(
            "{} of {} rows kept (reference count 319290), r(uptake, selectivity) = {r:.3}, top-6 forest features {top:?} overlap {overlap}",
            table.n_rows(),
            table.input_rows
        ),
    )
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut cross, mut sa, mut sb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        cross += (x - ma) * (y - mb);
        sa += (x - ma).powi(2);
        sb += (y - mb).powi(2);
    }
    cross / (sa * sb).sqrt()
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("ols planted-solution recovery", ols_planted_recovery),
        ("lasso support recovery", lasso_support_recovery),
        ("pca correctness", pca_correctness),
        ("nn gradient check", gradient_check),
        ("model ordering on nonlinear benchmark", model_ordering),
        ("end-to-end determinism", end_to_end_determinism),
        ("mof name round-trip", name_round_trip),
        (
            "cleaning conservation and idempotence",
            cleaning_conservation,
        ),
        ("bundle serialization round-trip", serialization_round_trip),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    match std::env::var_os("MOFML_FULL_DATA") {
        Some(path) => match full_dataset(Path::new(&path)) {
            Ok(detail) => println!("PASS  full dataset (soft): {detail}"),
            Err(detail) => println!("FAIL  full dataset (soft, not counted): {detail}"),
        },
        None => println!("SKIP  full dataset (soft): set MOFML_FULL_DATA to the CSV export to run"),
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
