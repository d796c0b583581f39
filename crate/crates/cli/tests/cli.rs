use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn igl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_igl"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

const SMALL: &str = "n_samples = 300\ntrain_size = 200\nseed = 42\n";

/// Generates a small dataset into `<tmp>/data`.
fn small_dataset(tmp: &TempDir) -> std::path::PathBuf {
    let cfg = tmp.path().join("gen.toml");
    fs::write(&cfg, SMALL).unwrap();
    let data = tmp.path().join("data");
    let out = igl(&[
        "generate",
        "--config",
        p(&cfg),
        "--out",
        p(&data),
        "--mask-rho",
        "0.5",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    data
}

fn csv_shape(path: &Path) -> (usize, usize) {
    let text = fs::read_to_string(path).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    (rows.len(), rows[0].split(',').count())
}

#[test]
fn generate_writes_every_file_reproducibly() {
    let tmp = TempDir::new().unwrap();
    let data = small_dataset(&tmp);
    for f in [
        "train_clean.csv",
        "train_noisy.csv",
        "test.csv",
        "norm_stats.csv",
        "labels.csv",
        "topology.toml",
        "test_mask.csv",
        "manifest.json",
    ] {
        assert!(data.join(f).exists(), "{f} missing");
    }
    assert_eq!(csv_shape(&data.join("train_noisy.csv")), (37, 200));
    assert_eq!(csv_shape(&data.join("test.csv")), (37, 100));

    let again = tmp.path().join("again");
    let out = igl(&[
        "generate",
        "--config",
        p(&tmp.path().join("gen.toml")),
        "--out",
        p(&again),
        "--mask-rho",
        "0.5",
    ]);
    assert_eq!(code(&out), 0);
    for f in [
        "train_noisy.csv",
        "test.csv",
        "test_mask.csv",
        "norm_stats.csv",
    ] {
        assert_eq!(
            fs::read(data.join(f)).unwrap(),
            fs::read(again.join(f)).unwrap(),
            "{f} differs"
        );
    }
}

#[test]
fn missing_config_fails_without_writing_anything() {
    let tmp = TempDir::new().unwrap();
    let out_dir = tmp.path().join("out");
    let out = igl(&[
        "generate",
        "--config",
        p(&tmp.path().join("nope.toml")),
        "--out",
        p(&out_dir),
    ]);
    assert_eq!(code(&out), 1);
    assert!(!out_dir.exists());
}

#[test]
fn igl_without_prior_weight_matches_adj_smooth() {
    let tmp = TempDir::new().unwrap();
    let data = small_dataset(&tmp);
    let params = tmp.path().join("params.toml");
    fs::write(&params, "[igl]\nupsilon = 0.0\n").unwrap();
    let topo = data.join("topology.toml");
    let train = data.join("train_noisy.csv");
    let a = tmp.path().join("igl.csv");
    let b = tmp.path().join("adj.csv");
    let out = igl(&[
        "learn",
        "--method",
        "igl",
        "--data",
        p(&train),
        "--topology",
        p(&topo),
        "--params",
        p(&params),
        "--out",
        p(&a),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = igl(&[
        "learn",
        "--method",
        "adj-smooth",
        "--data",
        p(&train),
        "--topology",
        p(&topo),
        "--params",
        p(&params),
        "--out",
        p(&b),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("adj.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["summary"]["converged"], true);
    assert_eq!(manifest["subcommand"], "learn");
}

#[test]
fn igl_requires_a_topology() {
    let tmp = TempDir::new().unwrap();
    let data = small_dataset(&tmp);
    let out = igl(&[
        "learn",
        "--method",
        "igl",
        "--data",
        p(&data.join("train_noisy.csv")),
        "--out",
        p(&tmp.path().join("g.csv")),
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--topology"));
}

#[test]
fn physics_graph_is_block_diagonal() {
    let tmp = TempDir::new().unwrap();
    let data = small_dataset(&tmp);
    let g = tmp.path().join("physics.csv");
    let out = igl(&[
        "learn",
        "--method",
        "physics",
        "--topology",
        p(&data.join("topology.toml")),
        "--out",
        p(&g),
    ]);
    assert_eq!(code(&out), 0);
    let w = igl_core::io::read_adjacency(&g).unwrap();
    assert_eq!(w.n(), 37);
    for i in 0..17 {
        for j in 17..37 {
            assert_eq!(w.weights()[(i, j)], 0.0);
        }
    }
    assert!(w.weights().max() == 1.0);
}

#[test]
fn learn_denoise_impute_evaluate_chain() {
    let tmp = TempDir::new().unwrap();
    let data = small_dataset(&tmp);
    let g = tmp.path().join("g.csv");
    let trace = tmp.path().join("trace.csv");
    let out = igl(&[
        "learn",
        "--method",
        "igl",
        "--data",
        p(&data.join("train_noisy.csv")),
        "--topology",
        p(&data.join("topology.toml")),
        "--out",
        p(&g),
        "--trace",
        p(&trace),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(&trace)
        .unwrap()
        .starts_with("iteration,objective"));

    let imputed = tmp.path().join("imputed.csv");
    let out = igl(&[
        "impute",
        "--graph",
        p(&g),
        "--data",
        p(&data.join("test.csv")),
        "--mask",
        p(&data.join("test_mask.csv")),
        "--out",
        p(&imputed),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(csv_shape(&imputed), (37, 100));

    let denoised = tmp.path().join("denoised.csv");
    let out = igl(&[
        "denoise",
        "--graph",
        p(&g),
        "--data",
        p(&data.join("test.csv")),
        "--mu",
        "0.5",
        "--out",
        p(&denoised),
    ]);
    assert_eq!(code(&out), 0);

    let scores = tmp.path().join("scores.json");
    let out = igl(&[
        "evaluate",
        "--estimate",
        p(&imputed),
        "--reference",
        p(&data.join("test.csv")),
        "--dataset",
        p(&data),
        "--mask",
        p(&data.join("test_mask.csv")),
        "--missing-only",
        "--out",
        p(&scores),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let s: serde_json::Value = serde_json::from_slice(&fs::read(&scores).unwrap()).unwrap();
    let (rmse, mae) = (s["rmse"].as_f64().unwrap(), s["mae"].as_f64().unwrap());
    assert!(rmse >= mae && mae > 0.0);
}

#[test]
fn full_mask_and_empty_graph_return_the_input() {
    let tmp = TempDir::new().unwrap();
    let data = tmp.path().join("x.csv");
    fs::write(&data, "1.5,2.0,-1.0\n0.5,0.25,3.0\n").unwrap();
    let mask = tmp.path().join("m.csv");
    fs::write(&mask, "1,1,1\n1,1,1\n").unwrap();
    let graph = tmp.path().join("g.csv");
    fs::write(&graph, "0,1\n0,0.5\n0.5,0\n").unwrap();
    let empty = tmp.path().join("empty.csv");
    fs::write(&empty, "0,1\n0,0\n0,0\n").unwrap();

    let read = |path: &Path| igl_core::io::read_signals(path).unwrap().values;
    let expected = read(&data);

    let out_path = tmp.path().join("imputed.csv");
    let out = igl(&[
        "impute",
        "--graph",
        p(&graph),
        "--data",
        p(&data),
        "--mask",
        p(&mask),
        "--out",
        p(&out_path),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(&out_path), expected);

    let out_path = tmp.path().join("denoised.csv");
    let out = igl(&[
        "denoise",
        "--graph",
        p(&empty),
        "--data",
        p(&data),
        "--out",
        p(&out_path),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(read(&out_path), expected);
}

#[test]
fn bad_inputs_map_to_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let graph = tmp.path().join("g.csv");
    fs::write(&graph, "0,1\n0,0.5\n0.5,0\n").unwrap();
    let wide = tmp.path().join("wide.csv");
    fs::write(&wide, "1,2\n3,4\n5,6\n").unwrap();
    let nan = tmp.path().join("nan.csv");
    fs::write(&nan, "1,2\nNaN,4\n").unwrap();
    let out_path = tmp.path().join("o.csv");

    let out = igl(&[
        "denoise",
        "--graph",
        p(&graph),
        "--data",
        p(&wide),
        "--out",
        p(&out_path),
    ]);
    assert_eq!(code(&out), 1);
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("2x2") && msg.contains("3x2"), "{msg}");

    let out = igl(&[
        "denoise",
        "--graph",
        p(&graph),
        "--data",
        p(&nan),
        "--out",
        p(&out_path),
    ]);
    assert_eq!(code(&out), 2);

    let out = igl(&[
        "denoise",
        "--graph",
        p(&graph),
        "--data",
        p(&wide),
        "--mu",
        "0",
        "--out",
        p(&out_path),
    ]);
    assert_eq!(code(&out), 1);

    let out = igl(&["learn", "--method", "bogus", "--out", p(&out_path)]);
    assert_eq!(code(&out), 1);
    assert!(!out_path.exists());
}

#[test]
fn every_subcommand_has_help() {
    for sub in [
        "generate", "learn", "denoise", "impute", "evaluate", "compare",
    ] {
        let out = igl(&[sub, "--help"]);
        assert_eq!(code(&out), 0, "{sub}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"));
    }
    let out = igl(&["--help"]);
    assert_eq!(code(&out), 0);
}

#[test]
fn single_method_comparison_has_one_column_and_no_best_marker() {
    let tmp = TempDir::new().unwrap();
    let data = small_dataset(&tmp);
    let spec = tmp.path().join("exp.toml");
    fs::write(
        &spec,
        format!(
            "methods = [\"adj-smooth\"]\nrhos = [0.5]\ncv_folds = 2\n\n[cv_grid]\nalpha = [1.0]\nbeta = [0.4]\nupsilon = [0.4]\nmu = [1.0]\n\n[data]\ndir = \"{}\"\n",
            p(&data)
        ),
    )
    .unwrap();
    let results = tmp.path().join("results");
    let out = igl(&["compare", "--experiment", p(&spec), "--out", p(&results)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(results.join("results.txt")).unwrap();
    assert!(text.contains("Adj-Smooth"));
    assert!(!text.contains("IGL") && !text.contains('*'));
    let json: serde_json::Value =
        serde_json::from_slice(&fs::read(results.join("results.json")).unwrap()).unwrap();
    assert_eq!(json["records"].as_array().unwrap().len(), 2);
}
