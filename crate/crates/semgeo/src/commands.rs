//! The report commands. Each returns a JSON document and one or more CSV
//! tables; nothing here touches the filesystem except through the config's
//! input sources.

use rayon::prelude::*;
use semgeo_core::curvature::{curvature_samples, tangent_basis, CurvatureParams};
use semgeo_core::fisher::{fisher_matrix, numerical_rank, restricted_metric};
use semgeo_core::gap::{linear_grid, log_grid, summarize_gap};
use semgeo_core::intrinsic_dim::{describe_params, layer_profile, rounded_dimension, two_nn, ProfileSettings};
use semgeo_core::knn::build_neighbor_table;
use semgeo_core::linalg::symmetric_eigen;
use semgeo_core::margin::margin_samples;
use semgeo_core::spectral::{knn_graph, spectral_embedding, DENSE_LIMIT};
use semgeo_core::stats::{percentile_profile, PercentileProfile};
use semgeo_core::synthetic::{
    distortion_lower_bound, greedy_expand, lloyd_quantize, planar_gap_experiment, sphere_interp_error, sphere_pair,
    SyntheticManifold,
};
use semgeo_core::{Estimator, PointCloud};
use serde_json::{json, Map, Value};

use crate::config::{Config, EstimatorName};
use crate::error::{Error, Result};
use crate::table::{Cell, Table};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::Subcommand)]
pub enum Command {
    /// Intrinsic dimension per layer
    Dim,
    /// Local PCA curvature and tangent rotation per point
    Curvature,
    /// Voronoi margins and the expressibility-gap curve
    Gap,
    /// Fisher metric spectra at sampled points
    Fisher,
    /// Laplacian eigenmap coordinates
    Spectral,
    /// Checks on synthetic manifolds with known answers
    Validate,
    /// Every command above, in order
    All,
}

impl Command {
    pub const EACH: [Command; 6] =
        [Command::Dim, Command::Curvature, Command::Gap, Command::Fisher, Command::Spectral, Command::Validate];

    pub fn name(self) -> &'static str {
        match self {
            Command::Dim => "dim",
            Command::Curvature => "curvature",
            Command::Gap => "gap",
            Command::Fisher => "fisher",
            Command::Spectral => "spectral",
            Command::Validate => "validate",
            Command::All => "all",
        }
    }
}

/// Output of one command: `<name>.json` plus CSV tables keyed by file stem.
#[derive(Debug, Clone)]
pub struct Report {
    pub name: &'static str,
    pub json: Value,
    pub tables: Vec<(String, Table)>,
}

/// Runs `command`; `all` yields one report per command and a summary.
pub fn run(command: Command, cfg: &Config) -> Result<Vec<Report>> {
    if command == Command::All {
        let mut out = Vec::new();
        for c in Command::EACH {
            out.push(run_one(c, cfg)?);
        }
        let mut summary = envelope("all", cfg);
        summary.insert("commands".into(), json!(Command::EACH.map(Command::name)));
        summary.insert("results".into(), Value::Object(out.iter().map(|r| (r.name.to_owned(), r.json.clone())).collect()));
        out.push(Report { name: "all", json: Value::Object(summary), tables: Vec::new() });
        return Ok(out);
    }
    Ok(vec![run_one(command, cfg)?])
}

fn run_one(command: Command, cfg: &Config) -> Result<Report> {
    match command {
        Command::Dim => dim(cfg),
        Command::Curvature => curvature(cfg),
        Command::Gap => gap(cfg),
        Command::Fisher => fisher(cfg),
        Command::Spectral => spectral(cfg),
        Command::Validate => validate(cfg),
        Command::All => unreachable!("expanded by run"),
    }
}

fn envelope(name: &str, cfg: &Config) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema".into(), json!(SCHEMA));
    m.insert("command".into(), json!(name));
    m.insert("seed".into(), json!(cfg.run.seed));
    m
}

fn step<T>(context: &'static str, r: semgeo_core::Result<T>) -> Result<T> {
    r.map_err(|source| Error::Step { context, source })
}

fn percentiles_json(p: &PercentileProfile) -> Value {
    json!({ "p05": p.p05, "p25": p.p25, "p50": p.p50, "p75": p.p75, "p95": p.p95 })
}

fn summary_json(values: &[f64]) -> Result<Value> {
    let p = step("summary", percentile_profile(values))?;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut v = percentiles_json(&p);
    v["mean"] = json!(mean);
    Ok(v)
}

fn dim(cfg: &Config) -> Result<Report> {
    let c = &cfg.dim;
    let clouds = c
        .layers
        .iter()
        .enumerate()
        .map(|(slot, src)| {
            let layer = src.layer.unwrap_or(slot);
            src.load(cfg.run.seed, slot as u64)
                .map(|cloud| cloud.with_layer(layer))
                .map_err(|e| Error::Layer { layer, source: Box::new(e) })
        })
        .collect::<Result<Vec<PointCloud>>>()?;

    let mut table = Table::new(&["layer", "estimator", "value", "n_used", "params"]);
    let mut profiles = Vec::new();
    for name in &c.estimators {
        let estimator = match name {
            EstimatorName::TwoNn => Estimator::TwoNn,
            EstimatorName::Mle => Estimator::Mle,
        };
        let settings = ProfileSettings {
            estimator,
            discard_fraction: c.discard_fraction,
            k1: c.k1,
            k2: c.k2,
            normalization: c.normalization.into(),
        };
        let profile = step("dimension profile", layer_profile(&clouds, &settings))?;
        let mut layers = Vec::new();
        for entry in &profile.layers {
            match &entry.estimate {
                Ok(e) => {
                    let params = describe_params(&e.params);
                    table.push(vec![
                        entry.layer_index.into(),
                        estimator.as_str().into(),
                        e.value.into(),
                        e.n_used.into(),
                        params.clone().into(),
                    ]);
                    layers.push(json!({
                        "layer": entry.layer_index,
                        "embedding_layer": entry.is_embedding_layer,
                        "value": e.value,
                        "n_used": e.n_used,
                        "params": params,
                    }));
                }
                Err(err) => {
                    table.push(vec![entry.layer_index.into(), estimator.as_str().into(), Cell::Empty, Cell::Empty, Cell::Empty]);
                    layers.push(json!({
                        "layer": entry.layer_index,
                        "embedding_layer": entry.is_embedding_layer,
                        "value": null,
                        "error": err.to_string(),
                    }));
                }
            }
        }
        profiles.push(json!({
            "estimator": estimator.as_str(),
            "peak_layer": profile.peak_layer,
            "peak_value": profile.peak_value,
            "utilization": profile.utilization,
            "final_value": profile.final_value,
            "layers": layers,
        }));
    }

    let mut m = envelope("dim", cfg);
    m.insert("ambient_d".into(), json!(clouds[0].d()));
    m.insert(
        "sources".into(),
        json!(c
            .layers
            .iter()
            .zip(&clouds)
            .map(|(s, cl)| json!({ "layer": cl.layer_index(), "source": s.describe(), "n": cl.n() }))
            .collect::<Vec<_>>()),
    );
    m.insert("profiles".into(), json!(profiles));
    Ok(Report { name: "dim", json: Value::Object(m), tables: vec![("dim".into(), table)] })
}

/// Tangent dimension from config, or TWO-NN rounded to an integer.
fn tangent_dim(cloud: &PointCloud, configured: Option<usize>, discard: f64) -> Result<(usize, &'static str)> {
    if let Some(k) = configured {
        return Ok((k, "config"));
    }
    let table = step("intrinsic dimension", build_neighbor_table(cloud, 2))?;
    let est = step("intrinsic dimension", two_nn(&table, discard))?;
    Ok((rounded_dimension(&est), "two_nn"))
}

fn curvature(cfg: &Config) -> Result<Report> {
    let c = &cfg.curvature;
    let cloud = c.cloud.load(cfg.run.seed, 0)?;
    let (k, k_source) = tangent_dim(&cloud, c.intrinsic_k, cfg.dim.discard_fraction)?;
    let mut params = CurvatureParams::for_dimension(k);
    if let Some(s) = c.neighborhood_size {
        params.neighborhood_size = s;
    }
    params.tangent_neighbors = c.tangent_neighbors;
    let table = step("neighbor table", build_neighbor_table(&cloud, params.neighborhood_size.min(cloud.n() - 1)))?;
    let samples = step("curvature", curvature_samples(&cloud, &table, &params))?;

    let pca: Vec<f64> = samples.iter().map(|s| s.pca_curvature).collect();
    let ii: Vec<f64> = samples.iter().map(|s| s.ii_norm).collect();
    let mut out = Table::new(&["point_index", "pca_curvature", "ii_norm", "layer"]);
    for s in &samples {
        out.push(vec![s.point_index.into(), s.pca_curvature.into(), s.ii_norm.into(), cloud.layer_index().into()]);
    }
    let mut m = envelope("curvature", cfg);
    m.insert("source".into(), json!(c.cloud.describe()));
    m.insert("layer".into(), json!(cloud.layer_index()));
    m.insert("n".into(), json!(cloud.n()));
    m.insert("ambient_d".into(), json!(cloud.d()));
    m.insert("intrinsic_k".into(), json!(k));
    m.insert("intrinsic_k_source".into(), json!(k_source));
    m.insert("neighborhood_size".into(), json!(params.neighborhood_size));
    m.insert("tangent_neighbors".into(), json!(params.tangent_neighbors));
    m.insert("pca_curvature".into(), summary_json(&pca)?);
    m.insert("ii_norm".into(), summary_json(&ii)?);
    Ok(Report { name: "curvature", json: Value::Object(m), tables: vec![("curvature".into(), out)] })
}

fn gap(cfg: &Config) -> Result<Report> {
    let c = &cfg.gap;
    let cloud = c.cloud.load(cfg.run.seed, 0)?;
    let head = c.head.load(cfg.run.seed)?;
    let samples = step("margins", margin_samples(&head, &cloud))?;
    let grid = step("epsilon grid", log_grid(c.grid_min, c.grid_max, c.grid_points))?;
    let s = step("gap summary", summarize_gap(&samples, &grid, c.fit_min, c.fit_max))?;

    let mut points = Table::new(&["point_index", "margin", "entropy", "top", "runner_up"]);
    for (i, x) in samples.iter().enumerate() {
        points.push(vec![i.into(), x.margin.into(), x.entropy.into(), x.top_token.into(), x.runner_up_token.into()]);
    }
    let mut curve = Table::new(&["epsilon", "eta"]);
    for (e, eta) in s.curve.epsilons.iter().zip(&s.curve.etas) {
        curve.push(vec![(*e).into(), (*eta).into()]);
    }
    let mut m = envelope("gap", cfg);
    m.insert("source".into(), json!(c.cloud.describe()));
    m.insert("n".into(), json!(samples.len()));
    m.insert("vocab".into(), json!(head.vocab_size()));
    m.insert("slope".into(), json!(s.fit.beta));
    m.insert("intercept".into(), json!(s.fit.alpha));
    m.insert("r2".into(), json!(s.fit.r_squared));
    m.insert("fit_min".into(), json!(s.fit.eps_min));
    m.insert("fit_max".into(), json!(s.fit.eps_max));
    m.insert("fit_points".into(), json!(s.fit.points));
    m.insert("spearman".into(), json!(s.spearman));
    m.insert("spearman_abs".into(), json!(s.spearman.abs()));
    m.insert("median_margin".into(), json!(s.percentiles.p50));
    m.insert("frac_below_half".into(), json!(s.frac_below_half));
    m.insert("percentiles".into(), percentiles_json(&s.percentiles));
    m.insert(
        "curve".into(),
        json!(s.curve.epsilons.iter().zip(&s.curve.etas).map(|(e, h)| json!({ "epsilon": e, "eta": h })).collect::<Vec<_>>()),
    );
    Ok(Report { name: "gap", json: Value::Object(m), tables: vec![("gap".into(), points), ("gap_curve".into(), curve)] })
}

struct FisherRow {
    index: usize,
    trace: f64,
    max_eigenvalue: f64,
    rank: usize,
    restricted: Option<(f64, f64)>,
    restricted_error: Option<String>,
}

fn fisher(cfg: &Config) -> Result<Report> {
    let c = &cfg.fisher;
    let cloud = c.cloud.load(cfg.run.seed, 0)?;
    let head = c.head.load(cfg.run.seed)?;
    if head.d() != cloud.d() {
        return Err(Error::Step {
            context: "fisher",
            source: semgeo_core::Error::DimensionMismatch { expected: head.d(), found: cloud.d() },
        });
    }
    let count = c.points.clamp(1, cloud.n());
    let indices: Vec<usize> = (0..count).map(|j| j * cloud.n() / count).collect();

    let tangent = if c.restricted {
        let (k, source) = tangent_dim(&cloud, c.intrinsic_k, cfg.dim.discard_fraction)?;
        let params = CurvatureParams::for_dimension(k);
        let table = step("neighbor table", build_neighbor_table(&cloud, params.neighborhood_size.min(cloud.n() - 1)))?;
        Some((params, table, source))
    } else {
        None
    };

    let rows = indices
        .par_iter()
        .map(|&i| -> Result<FisherRow> {
            let g = step("fisher metric", fisher_matrix(&head, cloud.point(i), c.top_k))?;
            let eig = g.eigenvalues();
            let mut row = FisherRow {
                index: i,
                trace: eig.iter().sum(),
                max_eigenvalue: eig[0],
                rank: numerical_rank(&eig, c.rank_tolerance),
                restricted: None,
                restricted_error: None,
            };
            if let Some((params, table, _)) = &tangent {
                let r = tangent_basis(&cloud, table, i, params)
                    .and_then(|basis| restricted_metric(&g, &basis))
                    .and_then(|rm| symmetric_eigen(&rm));
                match r {
                    Ok(e) => row.restricted = Some((*e.values.last().unwrap(), e.values[0])),
                    Err(e) => row.restricted_error = Some(e.to_string()),
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = Table::new(&["point_index", "trace", "max_eigenvalue", "rank", "restricted_min", "restricted_max"]);
    let mut per_point = Vec::new();
    for r in &rows {
        out.push(vec![
            r.index.into(),
            r.trace.into(),
            r.max_eigenvalue.into(),
            r.rank.into(),
            r.restricted.map(|x| x.0).into(),
            r.restricted.map(|x| x.1).into(),
        ]);
        let mut p = json!({ "index": r.index, "trace": r.trace, "max_eigenvalue": r.max_eigenvalue, "rank": r.rank });
        if let Some((lo, hi)) = r.restricted {
            p["restricted_min"] = json!(lo);
            p["restricted_max"] = json!(hi);
        }
        if let Some(e) = &r.restricted_error {
            p["restricted_error"] = json!(e);
        }
        per_point.push(p);
    }
    let traces: Vec<f64> = rows.iter().map(|r| r.trace).collect();
    let ranks: Vec<usize> = rows.iter().map(|r| r.rank).collect();
    let vocab = c.top_k.map_or(head.vocab_size(), |k| k.min(head.vocab_size()));

    let mut m = envelope("fisher", cfg);
    m.insert("source".into(), json!(c.cloud.describe()));
    m.insert("ambient_d".into(), json!(cloud.d()));
    m.insert("vocab".into(), json!(head.vocab_size()));
    m.insert("top_k".into(), json!(c.top_k));
    m.insert("rank_bound".into(), json!(cloud.d().min(vocab - 1)));
    m.insert("rank_min".into(), json!(ranks.iter().min()));
    m.insert("rank_max".into(), json!(ranks.iter().max()));
    m.insert("trace".into(), summary_json(&traces)?);
    if let Some((params, _, source)) = &tangent {
        m.insert("intrinsic_k".into(), json!(params.intrinsic_k));
        m.insert("intrinsic_k_source".into(), json!(source));
    }
    m.insert("points".into(), json!(per_point));
    Ok(Report { name: "fisher", json: Value::Object(m), tables: vec![("fisher".into(), out)] })
}

fn spectral(cfg: &Config) -> Result<Report> {
    let c = &cfg.spectral;
    let cloud = c.cloud.load(cfg.run.seed, 0)?;
    let table = step("neighbor table", build_neighbor_table(&cloud, c.k))?;
    let graph = knn_graph(&table);
    let emb = step("spectral embedding", spectral_embedding(&graph, c.dims, c.normalized))?;
    let margins = match &c.head {
        Some(h) => Some(step("margins", margin_samples(&h.load(cfg.run.seed)?, &cloud))?),
        None => None,
    };

    let mut header = vec!["point_index".to_owned()];
    header.extend((1..=c.dims).map(|j| format!("coord_{j}")));
    header.extend(["margin".to_owned(), "entropy".to_owned()]);
    let mut out = Table::new(&header);
    for i in 0..cloud.n() {
        let mut row: Vec<Cell> = vec![i.into()];
        row.extend(emb.coords.row(i).iter().map(|&x| Cell::from(x)));
        let s = margins.as_ref().map(|m| m[i]);
        row.push(s.map(|s| s.margin).into());
        row.push(s.map(|s| s.entropy).into());
        out.push(row);
    }
    let mut m = envelope("spectral", cfg);
    m.insert("source".into(), json!(c.cloud.describe()));
    m.insert("n".into(), json!(cloud.n()));
    m.insert("k".into(), json!(c.k));
    m.insert("dims".into(), json!(c.dims));
    m.insert("normalized".into(), json!(c.normalized));
    m.insert("solver".into(), json!(if cloud.n() <= DENSE_LIMIT { "dense" } else { "lanczos" }));
    m.insert("eigenvalues".into(), json!(emb.eigenvalues));
    m.insert("has_margins".into(), json!(margins.is_some()));
    Ok(Report { name: "spectral", json: Value::Object(m), tables: vec![("spectral".into(), out)] })
}

fn unit_square(n: usize, seed: u64) -> Result<PointCloud> {
    let base = step("unit square", SyntheticManifold::cube(2, 2, seed).and_then(|m| m.sample_base(n, seed)))?;
    step("unit square", PointCloud::from_matrix(base))
}

fn validate(cfg: &Config) -> Result<Report> {
    let v = &cfg.validate;
    let seed = cfg.run.seed;
    let mut all_passed = true;

    let q = &v.quantization;
    let mut q_rows = Vec::new();
    let mut q_table = Table::new(&["M", "seed", "distortion", "bound", "bound_satisfied", "within_upper"]);
    for r in 0..q.replicates as u64 {
        let s = seed.wrapping_add(r);
        let square = unit_square(q.samples, s)?;
        for &size in &q.codebook_sizes {
            let run = step("lloyd", lloyd_quantize(&square, size, q.max_iterations, s))?;
            let bound = step("distortion bound", distortion_lower_bound(2, 1.0, size, 1.0))?;
            let d = run.codebook.distortion;
            let (satisfied, upper) = (d >= bound, d <= q.upper_factor * bound);
            all_passed &= satisfied && upper;
            q_table.push(vec![size.into(), s.into(), d.into(), bound.into(), satisfied.into(), upper.into()]);
            q_rows.push(json!({
                "M": size,
                "seed": s,
                "D": d,
                "bound": bound,
                "ratio": d / bound,
                "bound_satisfied": satisfied,
                "within_upper": upper,
                "iterations": run.history.len() - 1,
                "converged": run.converged,
            }));
        }
    }

    let p = &v.planar;
    let grid = step("planar grid", linear_grid(p.fit_min, p.fit_max, p.grid_points))?;
    let exp = step("planar experiment", planar_gap_experiment(p.boundary_length, p.lambda, &grid, p.samples, seed))?;
    let fit = step("planar fit", exp.measured_fit(p.fit_min, p.fit_max))?;
    let within = (fit.slope / exp.predicted_slope - 1.0).abs() <= p.tolerance;
    all_passed &= within;
    let mut p_table = Table::new(&["epsilon", "eta_measured", "eta_predicted"]);
    for ((e, eta), pred) in exp.curve.epsilons.iter().zip(&exp.curve.etas).zip(&exp.predicted) {
        p_table.push(vec![(*e).into(), (*eta).into(), (*pred).into()]);
    }

    let g = &v.geodesic;
    let lambdas = step("geodesic grid", linear_grid(0.0, 1.0, g.grid_points))?;
    let mut angle = g.angle;
    let mut g_rows = Vec::new();
    let mut g_table = Table::new(&["angle", "error", "log2_ratio"]);
    let mut prev: Option<f64> = None;
    for _ in 0..=g.halvings {
        let (a, b) = sphere_pair(angle);
        let err = step("geodesic error", sphere_interp_error(&a, &b, &lambdas))?;
        let log2_ratio = prev.map(|p| (p / err).log2());
        if let Some(r) = log2_ratio {
            all_passed &= (1.9..=2.1).contains(&r);
        }
        g_table.push(vec![angle.into(), err.into(), log2_ratio.into()]);
        g_rows.push(json!({ "angle": angle, "error": err, "log2_ratio": log2_ratio }));
        prev = Some(err);
        angle /= 2.0;
    }

    let gr = &v.greedy;
    let square = unit_square(gr.samples, seed)?;
    let mut cb = step("lloyd", lloyd_quantize(&square, 1, q.max_iterations, seed))?.codebook;
    let mut history = vec![cb.distortion];
    let mut stopped = None;
    for i in 0..gr.steps as u64 {
        match greedy_expand(&cb, &square, gr.candidates, seed.wrapping_add(100 + i)) {
            Ok(st) => {
                cb = st.codebook;
                history.push(cb.distortion);
            }
            Err(semgeo_core::Error::NoImprovingCandidate) => {
                stopped = Some(i);
                break;
            }
            Err(e) => return Err(Error::Step { context: "greedy expansion", source: e }),
        }
    }
    let nonincreasing = history.windows(2).all(|w| w[1] <= w[0]);
    all_passed &= nonincreasing;
    let mut gr_table = Table::new(&["step", "codewords", "distortion"]);
    for (i, d) in history.iter().enumerate() {
        gr_table.push(vec![i.into(), (i + 1).into(), (*d).into()]);
    }

    let mut m = envelope("validate", cfg);
    m.insert("quantization".into(), json!({ "upper_factor": q.upper_factor, "samples": q.samples, "rows": q_rows }));
    m.insert(
        "planar".into(),
        json!({
            "boundary_length": p.boundary_length,
            "lambda": p.lambda,
            "samples": p.samples,
            "slope_measured": fit.slope,
            "slope_predicted": exp.predicted_slope,
            "r2": fit.r_squared,
            "tolerance": p.tolerance,
            "within_tol": within,
        }),
    );
    m.insert("geodesic".into(), json!({ "rows": g_rows }));
    m.insert(
        "greedy".into(),
        json!({ "distortions": history, "nonincreasing": nonincreasing, "stopped_at_step": stopped }),
    );
    m.insert("all_passed".into(), json!(all_passed));
    Ok(Report {
        name: "validate",
        json: Value::Object(m),
        tables: vec![
            ("validate".into(), q_table),
            ("validate_planar".into(), p_table),
            ("validate_geodesic".into(), g_table),
            ("validate_greedy".into(), gr_table),
        ],
    })
}
