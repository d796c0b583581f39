use std::path::{Path, PathBuf};
use std::time::SystemTime;

use igl_core::dataset::{
    denormalize, generate as generate_dataset, make_mask, Dataset, GenerationConfig,
};
use igl_core::eval::{
    mae_selected, rmse_selected, run_experiment, scaled_distances, ExperimentSpec, Method,
};
use igl_core::graph::{laplacian, vector_to_adjacency, NodeLabel, SensorGraph, SignalMatrix};
use igl_core::io;
use igl_core::learn::{solve_adj_smooth, solve_igl, solve_lap_smooth, SolverTrace};
use igl_core::physics::{build_prior_graph, NetworkTopology};
use igl_core::reconstruct::{denoise as denoise_signals, impute_with_report};
use serde_json::json;

use crate::failure::{as_config, Failure, Outcome};
use crate::manifest::{digest_file, manifest_beside, timestamp, InputDigest, RunManifest, Staged};
use crate::params::ParamsFile;
use crate::{CompareArgs, DenoiseArgs, EvaluateArgs, GenerateArgs, ImputeArgs, LearnArgs};

fn manifest(
    subcommand: &'static str,
    config: serde_json::Value,
    inputs: Vec<InputDigest>,
) -> RunManifest {
    RunManifest {
        tool: "igl",
        version: env!("CARGO_PKG_VERSION"),
        subcommand,
        config,
        inputs,
        outputs: Vec::new(),
        seed: None,
        started_at: timestamp(SystemTime::now()),
        finished_at: String::new(),
        summary: serde_json::Value::Null,
    }
}

fn digests(paths: &[Option<&Path>]) -> Outcome<Vec<InputDigest>> {
    paths.iter().flatten().map(|p| digest_file(p)).collect()
}

fn load_topology(path: &Path) -> Outcome<NetworkTopology> {
    NetworkTopology::load(path).map_err(as_config)
}

fn shape(x: &SignalMatrix) -> String {
    format!("{}x{}", x.n_nodes(), x.n_snapshots())
}

fn check_graph_rows(g: &SensorGraph, x: &SignalMatrix, what: &str) -> Outcome<()> {
    if g.n() != x.n_nodes() {
        return Err(Failure::usage(format!(
            "graph is {n}x{n} but {what} is {}",
            shape(x),
            n = g.n()
        )));
    }
    Ok(())
}

pub fn generate(args: &GenerateArgs) -> Outcome<()> {
    let mut cfg = match &args.config {
        Some(p) => GenerationConfig::load(p).map_err(as_config)?,
        None => GenerationConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let mut m = manifest(
        "generate",
        serde_json::to_value(cfg.to_file(None)).expect("config serializes"),
        digests(&[args.config.as_deref()])?,
    );
    m.seed = Some(cfg.seed);
    let ds = generate_dataset(&cfg)?;

    let mut staged = Staged::new();
    for (name, text) in io::dataset_files(&ds) {
        staged.add(args.out.join(name), text);
    }
    let topo = toml::to_string(&cfg.topology).map_err(|e| Failure::usage(e.to_string()))?;
    staged.add(args.out.join("topology.toml"), topo);
    if let Some(rho) = args.mask_rho {
        let (rows, cols) = ds.test.values.shape();
        let mask = make_mask(rows, cols, rho, cfg.seed).map_err(as_config)?;
        staged.add(args.out.join("test_mask.csv"), io::mask_to_csv(&mask));
    }
    m.outputs = staged.paths();
    m.summary = json!({
        "nodes": ds.n_nodes(),
        "train_snapshots": ds.train_clean.n_snapshots(),
        "test_snapshots": ds.test.n_snapshots(),
    });
    staged.commit(&args.out.join("manifest.json"), m)?;
    println!(
        "wrote {} nodes, {} train / {} test snapshots to {}",
        ds.n_nodes(),
        ds.train_clean.n_snapshots(),
        ds.test.n_snapshots(),
        args.out.display()
    );
    Ok(())
}

pub fn learn(args: &LearnArgs) -> Outcome<()> {
    let params = ParamsFile::load(args.params.as_deref())?;
    let method = args.method;
    let topo = args.topology.as_deref().map(load_topology).transpose()?;
    if matches!(method, Method::Physics | Method::Igl) && topo.is_none() {
        return Err(Failure::usage(format!(
            "--method {method} requires --topology"
        )));
    }
    if !(0.0..1.0).contains(&params.prior_threshold) {
        return Err(Failure::usage(format!(
            "prior_threshold must lie in [0, 1), got {}",
            params.prior_threshold
        )));
    }
    let prior = topo
        .as_ref()
        .map(|t| build_prior_graph(t, params.prior_threshold))
        .transpose()
        .map_err(as_config)?;

    let mut m = manifest(
        "learn",
        json!({ "method": method, "params": params }),
        digests(&[
            args.data.as_deref(),
            args.topology.as_deref(),
            args.params.as_deref(),
        ])?,
    );

    let mut trace: Option<SolverTrace> = None;
    let graph = if method == Method::Physics {
        prior.expect("checked above").graph
    } else {
        let data = args
            .data
            .as_deref()
            .ok_or_else(|| Failure::usage(format!("--method {method} requires --data")))?;
        let x = io::read_signals(data)?;
        let labels = match &topo {
            Some(t) if t.n_nodes() != x.n_nodes() => {
                return Err(Failure::usage(format!(
                    "topology has {} nodes but data is {}",
                    t.n_nodes(),
                    shape(&x)
                )))
            }
            Some(t) => t.labels(),
            None => NodeLabel::anonymous(x.n_nodes()),
        };
        let z = scaled_distances(&x, params.distance_scaling)?;
        let w = match method {
            Method::LapSmooth => {
                let r = solve_lap_smooth(&z, &params.lap_smooth)?;
                m.summary = json!({ "converged": r.converged, "iterations": r.iterations, "objective": r.objective });
                if params.igl.normalize_output {
                    r.w.normalized_thresholded(params.igl.output_threshold)
                } else {
                    r.w
                }
            }
            Method::AdjSmooth => {
                let (w, t) = solve_adj_smooth(&z, &params.igl)?;
                trace = Some(t);
                w
            }
            Method::Igl => {
                let knowledge = prior.as_ref().expect("checked above").knowledge();
                let (w, t) = solve_igl(&z, Some(&knowledge), &params.igl)?;
                trace = Some(t);
                w
            }
            Method::Physics => unreachable!(),
        };
        vector_to_adjacency(&w).with_labels(labels)?
    };

    if let Some(t) = &trace {
        m.summary = json!({
            "converged": t.converged,
            "iterations": t.iterations,
            "gamma": t.gamma,
            "final_rel_change_w": t.final_rel_change_w,
            "final_rel_change_d": t.final_rel_change_d,
            "final_objective": t.objective_history.last(),
        });
        if !t.converged {
            log::warn!(
                "solver stopped at k_max = {} before reaching eps0",
                params.igl.k_max
            );
        }
    }

    let mut staged = Staged::new();
    staged.add(&args.out, io::adjacency_to_csv(&graph));
    if let Some(path) = &args.trace {
        match &trace {
            Some(t) => staged.add(path, io::trace_to_csv(t)),
            None => log::warn!("--trace is only produced by igl and adj-smooth; ignoring"),
        }
    }
    m.outputs = staged.paths();
    staged.commit(&manifest_beside(&args.out), m)?;
    Ok(())
}

pub fn denoise(args: &DenoiseArgs) -> Outcome<()> {
    let params = ParamsFile::load(args.params.as_deref())?;
    let mu = args.mu.unwrap_or(params.reconstruct.mu);
    if mu.is_nan() || mu <= 0.0 {
        return Err(Failure::usage(format!("mu must be > 0, got {mu}")));
    }
    let g = io::read_adjacency(&args.graph)?;
    let x = io::read_signals(&args.data)?;
    check_graph_rows(&g, &x, "data")?;
    let mut m = manifest(
        "denoise",
        json!({ "mu": mu }),
        digests(&[Some(&args.graph), Some(&args.data), args.params.as_deref()])?,
    );
    let out = denoise_signals(&x, &laplacian(&g), mu)?;
    let mut staged = Staged::new();
    staged.add(&args.out, io::signals_to_csv(&out, None));
    m.outputs = staged.paths();
    staged.commit(&manifest_beside(&args.out), m)
}

pub fn impute(args: &ImputeArgs) -> Outcome<()> {
    let params = ParamsFile::load(args.params.as_deref())?;
    params.reconstruct.validate().map_err(as_config)?;
    let g = io::read_adjacency(&args.graph)?;
    let x = io::read_signals(&args.data)?;
    let mask = io::read_mask(&args.mask)?;
    check_graph_rows(&g, &x, "data")?;
    if mask.shape() != x.values.shape() {
        return Err(Failure::usage(format!(
            "mask is {}x{} but data is {}",
            mask.shape().0,
            mask.shape().1,
            shape(&x)
        )));
    }
    let mut m = manifest(
        "impute",
        json!({ "reconstruct": params.reconstruct }),
        digests(&[
            Some(&args.graph),
            Some(&args.data),
            Some(&args.mask),
            args.params.as_deref(),
        ])?,
    );
    let (out, report) = impute_with_report(&x, &mask, &laplacian(&g), &params.reconstruct, false)?;
    m.summary = json!({
        "max_iterations": report.iterations,
        "unconverged_snapshots": report.unconverged_columns,
        "fallback_entries": report.fallback_entries,
        "xi": report.xi,
        "observed_fraction": mask.density(),
    });
    let mut staged = Staged::new();
    staged.add(&args.out, io::signals_to_csv(&out, None));
    m.outputs = staged.paths();
    staged.commit(&manifest_beside(&args.out), m)
}

pub fn evaluate(args: &EvaluateArgs) -> Outcome<()> {
    let est = io::read_signals(&args.estimate)?;
    let reference = io::read_signals(&args.reference)?;
    if est.values.shape() != reference.values.shape() {
        return Err(Failure::usage(format!(
            "estimate is {} but reference is {}",
            shape(&est),
            shape(&reference)
        )));
    }
    let mask = args.mask.as_deref().map(io::read_mask).transpose()?;
    if let Some(mk) = &mask {
        if mk.shape() != est.values.shape() {
            return Err(Failure::usage(format!(
                "mask is {}x{} but signals are {}",
                mk.shape().0,
                mk.shape().1,
                shape(&est)
            )));
        }
    }
    let (a, b, units) = match &args.dataset {
        Some(dir) => {
            let stats = io::read_norm_stats(dir.join("norm_stats.csv"))?;
            let labels = io::read_labels(dir.join("labels.csv"))?;
            (
                denormalize(&est, &labels, &stats)?.values,
                denormalize(&reference, &labels, &stats)?.values,
                "physical",
            )
        }
        None => (est.values, reference.values, "as given"),
    };
    let select = match (&mask, args.missing_only) {
        (Some(mk), true) => Some(mk.matrix().map(|o| !o)),
        _ => None,
    };
    let rmse = rmse_selected(&a, &b, select.as_ref())?;
    let mae = mae_selected(&a, &b, select.as_ref())?;
    let entries = select
        .as_ref()
        .map_or(a.len(), |s| s.iter().filter(|&&v| v).count());

    let mut m = manifest(
        "evaluate",
        json!({ "missing_only": args.missing_only, "units": units }),
        digests(&[
            Some(&args.estimate),
            Some(&args.reference),
            args.mask.as_deref(),
        ])?,
    );
    let result = json!({ "rmse": rmse, "mae": mae, "entries": entries, "units": units });
    m.summary = result.clone();
    let mut staged = Staged::new();
    staged.add(
        &args.out,
        serde_json::to_string_pretty(&result).expect("json") + "\n",
    );
    m.outputs = staged.paths();
    staged.commit(&manifest_beside(&args.out), m)?;
    println!("rmse {rmse:.6}  mae {mae:.6}  ({entries} entries, {units} units)");
    Ok(())
}

fn compare_data(spec: &ExperimentSpec) -> Outcome<(Dataset, NetworkTopology, Option<PathBuf>)> {
    let (ds, gen_topo, input) = if let Some(dir) = &spec.data.dir {
        (io::read_dataset_dir(dir)?, None, None)
    } else {
        let cfg = match &spec.data.generate {
            Some(p) => GenerationConfig::load(p).map_err(as_config)?,
            None => GenerationConfig::default(),
        };
        let ds = generate_dataset(&cfg)?;
        (ds, Some(cfg.topology), spec.data.generate.clone())
    };
    let topo = match (&spec.topology, gen_topo) {
        (Some(p), _) => load_topology(p)?,
        (None, Some(t)) => t,
        (None, None) => NetworkTopology::default_network(),
    };
    Ok((ds, topo, input))
}

pub fn compare(args: &CompareArgs) -> Outcome<()> {
    let mut spec = match &args.experiment {
        Some(p) => ExperimentSpec::load(p).map_err(as_config)?,
        None => ExperimentSpec::default(),
    };
    if let Some(out) = &args.out {
        spec.output_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let (ds, topo, gen_input) = compare_data(&spec)?;
    let prior = build_prior_graph(&topo, spec.solver.prior_threshold).map_err(as_config)?;
    let mut m = manifest(
        "compare",
        serde_json::to_value(&spec).expect("spec serializes"),
        digests(&[
            args.experiment.as_deref(),
            gen_input.as_deref(),
            spec.topology.as_deref(),
        ])?,
    );
    m.seed = Some(spec.seed);

    let report = run_experiment(&spec, &ds, &prior)?;
    let table = report.table.render();
    let mut text = table.clone();
    text.push_str("\nSelected hyperparameters (cross-validated denoising RMSE):\n");
    for s in &report.selections {
        match (&s.hyper, s.cv_rmse, &s.error) {
            (Some(h), Some(r), _) => text.push_str(&format!(
                "  {:<11} {h}  (cv rmse {r:.4})\n",
                s.method.title()
            )),
            (_, _, Some(e)) => text.push_str(&format!("  {:<11} failed: {e}\n", s.method.title())),
            _ => {}
        }
    }

    let out = &spec.output_dir;
    let mut staged = Staged::new();
    staged.add(out.join("results.txt"), text.clone());
    let json = json!({ "records": report.table.records, "selections": report.selections });
    staged.add(
        out.join("results.json"),
        serde_json::to_string_pretty(&json).expect("json") + "\n",
    );
    if let Some(h) = &report.heatmap {
        let g = SensorGraph::new(h.clone(), prior.graph.labels().to_vec())?;
        staged.add(out.join("heatmap.csv"), io::adjacency_to_csv(&g));
    }
    for (method, g) in &report.graphs {
        if let Some(g) = g {
            staged.add(
                out.join(format!("graph_{method}.csv")),
                io::adjacency_to_csv(g),
            );
        }
    }
    m.outputs = staged.paths();
    m.summary = json!({
        "failed_cells": report.table.records.iter().filter(|r| r.error.is_some()).count(),
    });
    staged.commit(&out.join("manifest.json"), m)?;
    print!("{text}");
    Ok(())
}
