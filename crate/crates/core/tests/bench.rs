use causal_dc::bench::{run_bench, write_outputs, ExperimentKind, ExperimentSpec, Variant, RESULTS_HEADER};
use causal_dc::datagen::{gaussian_network_json, generate_dag, GenConfig};

#[test]
fn smallest_ablation_grid_has_two_rows() {
    let spec = ExperimentSpec::from_json(r#"{"experiment":"ablation","p":[20],"n":1000,"seed":1}"#).unwrap();
    let out = run_bench(&spec).unwrap();
    assert_eq!(out.rows.len(), 2);
    let variants: Vec<&str> = out.rows.iter().map(|r| r.variant.as_str()).collect();
    assert!(variants.contains(&"pipeline") && variants.contains(&"no-partition"));
    assert_eq!(out.aggregates.len(), 2);
    assert!(out.rows.iter().all(|r| r.config_hash == spec.config_hash()));
}

#[test]
fn loaded_network_grid() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = GenConfig::new(16, 10, 3);
    cfg.edge_prob = causal_dc::datagen::edge_prob_for(16, 24.0);
    let (sem, truth) = generate_dag(&cfg).unwrap();
    let net = dir.path().join("net.json");
    std::fs::write(&net, gaussian_network_json(&sem).unwrap()).unwrap();

    let mut spec = ExperimentSpec::new(ExperimentKind::Benchmark);
    spec.networks = vec![net];
    spec.n = 800;
    spec.graphs = 3;
    spec.runs = 2;
    let out = run_bench(&spec).unwrap();
    for variant in [Variant::Pipeline, Variant::PcStable] {
        let rows: Vec<_> = out.rows.iter().filter(|r| r.variant == variant.tag()).collect();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| r.p == 16 && r.score.tp + r.score.fn_ == truth.edge_count()));
    }
    let seeds: std::collections::BTreeSet<u64> = out.rows.iter().map(|r| r.seed).collect();
    assert_eq!(seeds.len(), 6);

    write_outputs(&out, dir.path().join("res")).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("res/results.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), RESULTS_HEADER);
    assert_eq!(csv.lines().count(), 13);
    assert!(!dir.path().join("res/errors.csv").exists());
}

#[test]
fn failing_cells_do_not_poison_the_grid() {
    // k >= n makes the scaffold estimator fail while pc-stable still runs
    let spec = ExperimentSpec::from_json(
        r#"{"experiment":"benchmark","p":[6],"n":10,"knn":20,"runs":2,"variants":["pc-stable","pipeline"]}"#,
    )
    .unwrap();
    let out = run_bench(&spec).unwrap();
    assert_eq!(out.errors.len(), 2);
    assert!(out.errors[0].message.contains("scaffold"), "{}", out.errors[0].message);

    let spec = ExperimentSpec::from_json(r#"{"experiment":"benchmark","p":[6],"n":10,"knn":20,"variants":["pc-stable"]}"#).unwrap();
    let out = run_bench(&spec).unwrap();
    assert!(out.errors.is_empty());
    assert_eq!(out.rows.len(), 1);
}

#[test]
fn invalid_specs() {
    assert!(ExperimentSpec::from_json(r#"{"experiment":"sweep","p":[10]}"#).is_err());
    let spec = ExperimentSpec::from_json(r#"{"experiment":"benchmark","p":[10],"runs":0}"#).unwrap();
    assert!(run_bench(&spec).is_err());
    let spec = ExperimentSpec::from_json(r#"{"experiment":"benchmark","networks":["/no/such/file.json"]}"#).unwrap();
    assert!(run_bench(&spec).is_err());
}
