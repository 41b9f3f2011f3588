//! Acceptance suite: every headline criterion at its stated tolerance, one
//! PASS/FAIL line each. Exits nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use semgeo_core::curvature::{local_pca_curvature, second_fundamental_norm, CurvatureParams};
use semgeo_core::fisher::{fisher_matrix, kl_quadratic_residual, softmax};
use semgeo_core::gap::{default_epsilon_grid, fit_loglog, gap_curve, linear_grid, DEFAULT_FIT_MAX, DEFAULT_FIT_MIN};
use semgeo_core::intrinsic_dim::{layer_profile, mle_dimension, two_nn, ProfileSettings};
use semgeo_core::knn::build_neighbor_table;
use semgeo_core::linalg::squared_distance;
use semgeo_core::margin::{logits, margin_samples, voronoi_assign};
use semgeo_core::synthetic::{
    distortion_lower_bound, greedy_expand, lloyd_quantize, planar_gap_experiment, sphere_interp_error, sphere_pair,
    SyntheticManifold, DEFAULT_LLOYD_ITERATIONS,
};
use semgeo_core::{Estimator, Matrix, PointCloud, UnembeddingHead};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut r = rng(seed);
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| r.sample(StandardNormal)).collect()).unwrap()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn cube_cloud(k: usize, n: usize, seed: u64) -> PointCloud {
    SyntheticManifold::cube(k, 20, seed).unwrap().sample(n, seed).unwrap()
}

fn unit_square(n: usize, seed: u64) -> PointCloud {
    let base = SyntheticManifold::cube(2, 2, seed).unwrap().sample_base(n, seed).unwrap();
    PointCloud::from_matrix(base).unwrap()
}

fn estimator_consistency() -> Check {
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    for k in [1usize, 2, 5] {
        for seed in [0u64, 1, 2] {
            for est in [Estimator::TwoNn, Estimator::Mle] {
                let start = Instant::now();
                let c = cube_cloud(k, 2000, seed);
                let value = match est {
                    Estimator::TwoNn => two_nn(&build_neighbor_table(&c, 2).unwrap(), 0.01).unwrap().value,
                    Estimator::Mle => mle_dimension(&build_neighbor_table(&c, 20).unwrap(), 10, 20).unwrap().value,
                };
                let elapsed = start.elapsed();
                slowest = slowest.max(elapsed);
                let rel = (value - k as f64).abs() / k as f64;
                worst = worst.max(rel);
                ensure(rel <= 0.15, format!("{} k={k} seed={seed}: {value:.4}", est.as_str()))?;
                ensure(elapsed < Duration::from_secs(10), format!("{} k={k} seed={seed} took {elapsed:?}", est.as_str()))?;
            }
        }
    }
    Ok(format!("max relative error {worst:.4}, slowest run {:.3}s", slowest.as_secs_f64()))
}

fn hourglass() -> Check {
    let layers: Vec<PointCloud> =
        [(2usize, 1usize), (5, 2), (2, 3)].iter().map(|&(k, l)| cube_cloud(k, 2000, 40 + l as u64).with_layer(l)).collect();
    let mut out = Vec::new();
    for est in [Estimator::TwoNn, Estimator::Mle] {
        let p = layer_profile(&layers, &ProfileSettings::default().with_estimator(est)).map_err(|e| e.to_string())?;
        ensure(p.peak_layer == 2, format!("{} peak at layer {}", est.as_str(), p.peak_layer))?;
        ensure((4.3..=5.7).contains(&p.peak_value), format!("{} peak value {}", est.as_str(), p.peak_value))?;
        out.push(format!("{} peak {:.3}", est.as_str(), p.peak_value));
    }
    Ok(out.join(", "))
}

fn curvature_pair(c: &PointCloud) -> (Vec<f64>, Vec<f64>) {
    let params = CurvatureParams::for_dimension(2);
    let t = build_neighbor_table(c, params.neighborhood_size).unwrap();
    (local_pca_curvature(c, &t, &params).unwrap(), second_fundamental_norm(c, &t, &params).unwrap())
}

fn curvature_sanity() -> Check {
    // A 2-plane through an offset, spanned by two random orthonormal directions in 10-dim.
    let coeffs = gaussian(500, 2, 3);
    let frame = gaussian(2, 10, 4);
    let mut dirs: Vec<Vec<f64>> = (0..2).map(|i| frame.row(i).to_vec()).collect();
    assert!(semgeo_core::linalg::gram_schmidt(&mut dirs));
    let mut m = Matrix::zeros(500, 10);
    for i in 0..500 {
        for j in 0..10 {
            m[(i, j)] = coeffs[(i, 0)] * dirs[0][j] + coeffs[(i, 1)] * dirs[1][j] + 0.25;
        }
    }
    let (pca, ii) = curvature_pair(&PointCloud::from_matrix(m).unwrap());
    let pca_max = pca.iter().cloned().fold(0.0, f64::max);
    let ii_max = ii.iter().cloned().fold(0.0, f64::max);
    ensure(pca_max <= 1e-10, format!("plane pca max {pca_max:e}"))?;
    ensure(ii_max <= 1e-8, format!("plane ii max {ii_max:e}"))?;

    let sphere = |r: f64| SyntheticManifold::sphere(2, r, 3, 12).unwrap().sample(4000, 12).unwrap();
    let ratio = mean(&curvature_pair(&sphere(1.0)).1) / mean(&curvature_pair(&sphere(2.0)).1);
    ensure((1.5..=2.5).contains(&ratio), format!("sphere ii ratio {ratio}"))?;
    Ok(format!("plane pca {pca_max:.1e} ii {ii_max:.1e}, sphere ii ratio {ratio:.4}"))
}

/// `Σ_t p_t W_ta W_tb − Σ_t Σ_s p_t p_s W_ta W_sb`, term by term.
fn double_sum(head: &UnembeddingHead, h: &[f64]) -> Matrix {
    let p = softmax(&logits(head, h).unwrap()).unwrap();
    let w = head.weights();
    let (n, d) = (head.vocab_size(), head.d());
    let mut g = Matrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let mut v = 0.0;
            for t in 0..n {
                v += p[t] * w[(t, a)] * w[(t, b)];
                for s in 0..n {
                    v -= p[t] * p[s] * w[(t, a)] * w[(s, b)];
                }
            }
            g[(a, b)] = v;
        }
    }
    g
}

fn fisher_correctness() -> Check {
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let bias = (seed % 2 == 0).then(|| gaussian(1, 5, 1000 + seed).into_vec());
        let head = UnembeddingHead::new(gaussian(5, 3, seed), bias).unwrap();
        let h = gaussian(1, 3, 500 + seed).into_vec();
        let g = fisher_matrix(&head, &h, None).unwrap();
        let diff = g.g.as_slice().iter().zip(double_sum(&head, &h).as_slice()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(diff);
    }
    ensure(worst <= 1e-10, format!("double-sum max diff {worst:e}"))?;

    let (w1, w2) = ([1.0, 2.0, -1.0], [0.5, -1.0, 3.0]);
    let head = UnembeddingHead::new(Matrix::from_rows(&[w1, w2]).unwrap(), None).unwrap();
    let g = fisher_matrix(&head, &[0.0; 3], None).unwrap();
    let mut binary: f64 = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            binary = binary.max((g.g[(a, b)] - 0.25 * (w1[a] - w2[a]) * (w1[b] - w2[b])).abs());
        }
    }
    ensure(binary <= 1e-12, format!("binary closed form diff {binary:e}"))?;

    let mut ratios = Vec::new();
    for seed in 0..10u64 {
        let head = UnembeddingHead::new(gaussian(7, 4, 60 + seed), Some(gaussian(1, 7, 90 + seed).into_vec())).unwrap();
        let h = gaussian(1, 4, 70 + seed).into_vec();
        let dir = gaussian(1, 4, 80 + seed).into_vec();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        let delta: Vec<f64> = dir.iter().map(|x| x / norm * 1e-3).collect();
        let r = kl_quadratic_residual(&head, &h, &delta).map_err(|e| e.to_string())?.ratio;
        ensure((0.98..=1.02).contains(&r), format!("KL ratio {r} at seed {seed}"))?;
        ratios.push(r);
    }
    let spread = ratios.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
    Ok(format!("oracle diff {worst:.1e}, binary diff {binary:.1e}, max |KL ratio - 1| {spread:.1e}"))
}

fn quantization_bound() -> Check {
    let start = Instant::now();
    let mut ratios = Vec::new();
    for seed in [0u64, 1, 2] {
        let sq = unit_square(100_000, seed);
        for m in [16usize, 64, 256] {
            let d = lloyd_quantize(&sq, m, DEFAULT_LLOYD_ITERATIONS, seed).map_err(|e| e.to_string())?.codebook.distortion;
            let bound = distortion_lower_bound(2, 1.0, m, 1.0).unwrap();
            ensure(d >= bound && d <= 1.8 * bound, format!("M={m} seed={seed}: D={d:e} bound={bound:e}"))?;
            ratios.push(d / bound);
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(format!("D/bound in [{lo:.4}, {hi:.4}], {:.1}s", elapsed.as_secs_f64()))
}

fn linear_gap_law() -> Check {
    let grid = linear_grid(0.01, 0.2, 20).unwrap();
    let exp = planar_gap_experiment(1.0, 2.0, &grid, 100_000, 0).map_err(|e| e.to_string())?;
    let fit = exp.measured_fit(0.01, 0.2).map_err(|e| e.to_string())?;
    ensure(exp.predicted_slope == 1.0, format!("oracle slope {}", exp.predicted_slope))?;
    ensure((fit.slope - 1.0).abs() <= 0.1, format!("slope {}", fit.slope))?;
    ensure(fit.r_squared > 0.99, format!("r2 {}", fit.r_squared))?;

    let mut r = rng(14);
    let margins: Vec<f64> = (0..100_000).map(|_| r.random::<f64>()).collect();
    let curve = gap_curve(&margins, &default_epsilon_grid()).unwrap();
    let beta = fit_loglog(&curve, DEFAULT_FIT_MIN, DEFAULT_FIT_MAX).map_err(|e| e.to_string())?.fit.unwrap().beta;
    ensure((0.95..=1.05).contains(&beta), format!("uniform fixture beta {beta}"))?;
    Ok(format!("slope {:.4} r2 {:.5}, uniform beta {beta:.4}", fit.slope, fit.r_squared))
}

fn geodesic_order() -> Check {
    let grid = linear_grid(0.0, 1.0, 101).unwrap();
    let mut theta = 0.4;
    let mut logs = Vec::new();
    for _ in 0..5 {
        let (a, b) = sphere_pair(theta);
        let (c, d) = sphere_pair(theta / 2.0);
        let ratio = sphere_interp_error(&a, &b, &grid).unwrap() / sphere_interp_error(&c, &d, &grid).unwrap();
        ensure((1.9..=2.1).contains(&ratio.log2()), format!("theta {theta}: log2 ratio {}", ratio.log2()))?;
        logs.push(ratio.log2());
        theta /= 2.0;
    }
    Ok(format!("log2 ratios {}", logs.iter().map(|l| format!("{l:.4}")).collect::<Vec<_>>().join(" ")))
}

fn voronoi_identity() -> Check {
    let (n_tokens, d) = (40usize, 8usize);
    let mut w = gaussian(n_tokens, d, 7);
    for t in 0..n_tokens {
        let norm = w.row(t).iter().map(|x| x * x).sum::<f64>().sqrt();
        w.row_mut(t).iter_mut().for_each(|x| *x /= norm);
    }
    let head = UnembeddingHead::new(w, None).unwrap();
    let points = PointCloud::from_matrix(gaussian(500, d, 8)).unwrap();
    let assigned = voronoi_assign(&head, &points).unwrap();
    let samples = margin_samples(&head, &points).unwrap();
    for i in 0..500 {
        let h = points.point(i);
        let mut nearest = 0;
        for s in 1..n_tokens {
            if squared_distance(h, head.weights().row(s)) < squared_distance(h, head.weights().row(nearest)) {
                nearest = s;
            }
        }
        ensure(assigned[i] == nearest, format!("point {i}: argmax {} nearest {nearest}", assigned[i]))?;
        let z = logits(&head, h).unwrap();
        let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let winners: Vec<usize> = (0..n_tokens).filter(|&t| z[t] == max).collect();
        ensure(winners.first() == Some(&assigned[i]), format!("point {i} not covered by its cell"))?;
        ensure(samples[i].margin <= 0.0 || winners.len() == 1, format!("point {i} interior to two cells"))?;
    }
    Ok("500/500 points agree, covered, interiors disjoint".into())
}

fn greedy_monotone() -> Check {
    let sq = unit_square(20_000, 3);
    let mut cb = lloyd_quantize(&sq, 1, DEFAULT_LLOYD_ITERATIONS, 3).unwrap().codebook;
    let mut history = vec![cb.distortion];
    for step in 0..20u64 {
        cb = greedy_expand(&cb, &sq, 256, 100 + step).map_err(|e| format!("step {step}: {e}"))?.codebook;
        history.push(cb.distortion);
    }
    ensure(history.windows(2).all(|w| w[1] <= w[0]), format!("{history:?}"))?;
    Ok(format!("D {:.5} -> {:.5} over 20 steps", history[0], history[20]))
}

fn run_cli(dir: &Path, command: &str) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_semgeo"))
        .current_dir(dir)
        .args([command, "--seed", "3", "--workers", "2", "--out", "out"])
        .args(["--set", "validate.quantization.samples=20000", "--set", "validate.planar.samples=20000"])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), format!("{command}: {}", String::from_utf8_lossy(&out.stderr)))
}

fn json_without_timestamp(path: &Path) -> Result<String, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut v: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    if let Some(m) = v.as_object_mut() {
        m.remove("timestamp");
    }
    Ok(v.to_string())
}

fn cli_determinism() -> Check {
    let mut compared = 0;
    for command in ["dim", "curvature", "gap", "fisher", "spectral", "validate", "all"] {
        let a = tempfile::tempdir().map_err(|e| e.to_string())?;
        let b = tempfile::tempdir().map_err(|e| e.to_string())?;
        run_cli(a.path(), command)?;
        run_cli(b.path(), command)?;
        let mut names: Vec<String> = std::fs::read_dir(a.path().join("out"))
            .map_err(|e| e.to_string())?
            .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
            .filter(|n| n.ends_with(".json"))
            .collect();
        names.sort();
        ensure(names.iter().any(|n| n == &format!("{command}.json")), format!("{command}: no {command}.json"))?;
        for name in &names {
            let (pa, pb) = (a.path().join("out").join(name), b.path().join("out").join(name));
            if name == "manifest.json" {
                ensure(json_without_timestamp(&pa)? == json_without_timestamp(&pb)?, format!("{command}: manifest differs"))?;
            } else {
                let (x, y) = (std::fs::read(&pa).map_err(|e| e.to_string())?, std::fs::read(&pb).map_err(|e| e.to_string())?);
                ensure(x == y, format!("{command}: {name} differs"))?;
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} JSON files identical across reruns"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("estimator consistency", estimator_consistency),
        ("hourglass recovery", hourglass),
        ("curvature sanity", curvature_sanity),
        ("fisher correctness", fisher_correctness),
        ("quantization bound", quantization_bound),
        ("linear gap law", linear_gap_law),
        ("geodesic order", geodesic_order),
        ("voronoi identity", voronoi_identity),
        ("greedy expansion", greedy_monotone),
        ("cli determinism", cli_determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {name}: {detail} ({secs:.1}s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} ({secs:.1}s)");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
