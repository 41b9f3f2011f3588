use std::path::Path;

use semgeo::config::{CloudSource, Config, EstimatorName, OutputFormat, SyntheticKind};
use semgeo::Error;

#[test]
fn sections_and_relative_paths() {
    let text = r#"
[run]
seed = 11
format = "csv"

[dim]
estimators = ["mle"]
k1 = 8
[[dim.layers]]
layer = 0
path = "layers/l0.lsm"
[[dim.layers]]
layer = 1
path = "/abs/l1.lsm"

[gap]
head = { path = "head.lsmh" }
cloud = { synthetic = { kind = "torus", k = 2, d = 6, n = 300, scale = 0.5 } }
"#;
    let c = Config::from_toml(text, &[], Some(Path::new("/cfg/dir"))).unwrap();
    assert_eq!(c.run.seed, 11);
    assert_eq!(c.run.format, OutputFormat::Csv);
    assert_eq!(c.dim.estimators, vec![EstimatorName::Mle]);
    assert_eq!(c.dim.k1, 8);
    assert_eq!(c.dim.k2, 20);
    assert_eq!(c.dim.layers[0], CloudSource::file("/cfg/dir/layers/l0.lsm", Some(0)));
    assert_eq!(c.dim.layers[1].path.as_deref(), Some(Path::new("/abs/l1.lsm")));
    assert_eq!(c.gap.head.path.as_deref(), Some(Path::new("/cfg/dir/head.lsmh")));
    let s = c.gap.cloud.synthetic.as_ref().unwrap();
    assert_eq!((s.kind, s.k, s.d, s.n, s.scale), (SyntheticKind::Torus, 2, 6, 300, 0.5));
}

#[test]
fn overrides_reach_nested_sections() {
    let c = Config::from_toml(
        "",
        &["validate.quantization.codebook_sizes=[4, 8]".into(), "gap.fit_max = 0.2".into(), "spectral.normalized=false".into()],
        None,
    )
    .unwrap();
    assert_eq!(c.validate.quantization.codebook_sizes, vec![4, 8]);
    assert_eq!(c.gap.fit_max, 0.2);
    assert!(!c.spectral.normalized);
}

#[test]
fn malformed_configs_are_usage_errors() {
    let cases: &[(&str, &[&str])] = &[
        ("[gap]\nfit_max = \"wide\"\n", &[]),
        ("[run]\nworkers = 0\n", &[]),
        ("[curvature.cloud]\npath = \"a\"\nsynthetic = { kind = \"cube\", k = 1, d = 2, n = 10 }\n", &[]),
        ("[curvature.cloud]\n", &[]),
        ("[dim]\nlayers = []\n", &[]),
        ("not toml at all = = =", &[]),
        ("", &["run.seed"]),
        ("", &["run.seed.x=1"]),
        ("", &["gap.fit_max=wide"]),
    ];
    for (text, overrides) in cases {
        let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        match Config::from_toml(text, &o, None) {
            Err(e @ Error::Config(_)) => assert!(e.is_usage()),
            other => panic!("{text:?} {o:?}: {other:?}"),
        }
    }
}

#[test]
fn synthetic_sources_are_seeded() {
    let c = Config::default();
    let a = c.curvature.cloud.load(5, 0).unwrap();
    let b = c.curvature.cloud.load(5, 0).unwrap();
    let other = c.curvature.cloud.load(6, 0).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.points(), other.points());
    let head = c.gap.head.load(5).unwrap();
    assert_eq!(head.vocab_size(), 64);
    for t in 0..64 {
        let n: f64 = head.weights().row(t).iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((n - 4.0).abs() < 1e-12);
    }
}

#[test]
fn config_round_trips_through_toml() {
    let c = Config::default();
    let text = toml::to_string(&c).unwrap();
    assert_eq!(Config::from_toml(&text, &[], None).unwrap(), c);
}

#[test]
fn override_switches_source_kind() {
    let c = Config::from_toml("", &["gap.cloud.path=data/h.lsm".into(), "spectral.cloud.synthetic.n=50".into()], Some(Path::new("/r")))
        .unwrap();
    assert_eq!(c.gap.cloud, CloudSource::file("/r/data/h.lsm", None));
    let s = c.spectral.cloud.synthetic.as_ref().unwrap();
    assert_eq!((s.kind, s.n), (SyntheticKind::SwissRoll, 50));
}

#[test]
fn readme_example_parses() {
    let readme = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md")).unwrap();
    let start = readme.find("```toml\n").unwrap() + 8;
    let end = start + readme[start..].find("```").unwrap();
    let c = Config::from_toml(&readme[start..end], &[], Some(Path::new("/data"))).unwrap();
    assert_eq!(c.dim.layers.len(), 2);
    assert_eq!(c.dim.layers[1].layer, Some(6));
    assert!(c.spectral.head.is_some());
}
