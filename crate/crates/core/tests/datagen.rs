mod common;

use causal_dc::datagen::{
    default_edge_prob, gaussian_network_json, generate_dag, parse_gaussian_network, sample_sem, topological_order,
    GenConfig, NoiseFamily,
};
use causal_dc::{load_dataset, save_dataset};
use common::*;

fn corr(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

#[test]
fn edge_count_matches_bernoulli_expectation() {
    let p = 20;
    let q = default_edge_prob(p);
    let expected = (p * (p - 1) / 2) as f64 * q;
    assert!((expected - 15.0).abs() < 1e-9);
    let counts: Vec<f64> = (0..1000)
        .map(|s| generate_dag(&GenConfig::new(p, 10, s)).unwrap().1.edge_count() as f64)
        .collect();
    let mean = counts.iter().sum::<f64>() / 1000.0;
    let se = ((p * (p - 1) / 2) as f64 * q * (1.0 - q) / 1000.0).sqrt();
    assert!((mean - expected).abs() <= 0.5, "mean {mean}");
    assert!((mean - expected).abs() <= 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn generated_graphs_are_acyclic_and_consistent() {
    let mut r = rng(11);
    use rand::Rng;
    for s in 0..300 {
        let p = r.random_range(2..40);
        let mut cfg = GenConfig::new(p, 10, s);
        cfg.edge_prob = r.random_range(0.01..=1.0);
        let (sem, truth) = generate_dag(&cfg).unwrap();
        assert!(topological_order(sem.weights()).is_ok());
        for i in 0..p {
            for j in 0..p {
                let nonzero = sem.weights()[i][j] != 0.0 || sem.weights()[j][i] != 0.0;
                assert_eq!(i != j && nonzero, i != j && truth.has_edge(i, j));
                let w = sem.weights()[i][j];
                assert!(w == 0.0 || (0.5..=0.9).contains(&w));
            }
        }
    }
}

#[test]
fn saturated_and_repeatable() {
    let mut cfg = GenConfig::new(4, 10, 2);
    cfg.edge_prob = 1.0;
    let (sem, truth) = generate_dag(&cfg).unwrap();
    assert_eq!(truth.edge_count(), 6);
    assert_eq!(sem.arc_count(), 6);
    assert!(topological_order(sem.weights()).is_ok());
    let again = generate_dag(&cfg).unwrap();
    assert_eq!(again.0, sem);
    assert_eq!(again.1, truth);
}

#[test]
fn chain_correlation_closed_form() {
    let d = sample_sem(&chain_sem(2, 0.7), 50_000, 5).unwrap();
    let r = corr(d.column(0), d.column(1));
    let expect = 0.7 / 1.49f64.sqrt();
    assert!((expect - 0.5735).abs() < 1e-4);
    assert!((r - expect).abs() <= 0.02, "r = {r}");
}

#[test]
fn empty_graph_columns_are_centred() {
    let sem = sem_from_arcs(5, &[]);
    let n = 5000;
    for family in NoiseFamily::ALL {
        let d = sample_sem(&sem.with_noise(family), n, 9).unwrap();
        for j in 0..5 {
            let mean = d.column(j).iter().sum::<f64>() / n as f64;
            let var = d.column(j).iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            assert!(mean.abs() <= 4.0 * (var / n as f64).sqrt(), "{family:?} column {j}: {mean}");
        }
    }
}

#[test]
fn sampling_is_deterministic() {
    let (sem, _) = generate_dag(&GenConfig::new(12, 100, 3)).unwrap();
    assert_eq!(sample_sem(&sem, 300, 4).unwrap(), sample_sem(&sem, 300, 4).unwrap());
    assert_ne!(sample_sem(&sem, 300, 4).unwrap(), sample_sem(&sem, 300, 5).unwrap());
}

#[test]
fn benchmark_shaped_dataset_round_trips() {
    let mut cfg = GenConfig::new(44, 5000, 17);
    cfg.edge_prob = causal_dc::datagen::edge_prob_for(44, 66.0);
    let (sem, _) = generate_dag(&cfg).unwrap();
    let net = parse_gaussian_network(&gaussian_network_json(&sem).unwrap()).unwrap();
    assert_eq!((net.node_count(), net.arc_count()), (44, sem.arc_count()));
    let d = sample_sem(&net, 5000, 18).unwrap();
    assert_eq!((d.n(), d.p()), (5000, 44));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    save_dataset(&d, &path).unwrap();
    let back = load_dataset(&path).unwrap();
    assert_eq!(back.names(), d.names());
    for j in 0..44 {
        let same = back.column(j).iter().zip(d.column(j)).all(|(a, b)| a.to_bits() == b.to_bits());
        assert!(same, "column {j} changed in the round trip");
    }
}

#[test]
fn network_documents() {
    let sem = parse_gaussian_network(
        r#"{"nodes":[{"name":"a","noise_sd":1},{"name":"b","noise_sd":0.5,"parents":[{"name":"a","coef":0.5}]}]}"#,
    )
    .unwrap();
    assert_eq!(sem.arc_count(), 1);
    assert_eq!(sem.weights()[0][1], 0.5);
    let cyclic = r#"{"nodes":[{"name":"a","noise_sd":1,"parents":[{"name":"b","coef":1}]},
                              {"name":"b","noise_sd":1,"parents":[{"name":"a","coef":1}]}]}"#;
    assert!(matches!(parse_gaussian_network(cyclic), Err(causal_dc::Error::Cycle(_))));
    let unknown = r#"{"nodes":[{"name":"a","noise_sd":1,"parents":[{"name":"z","coef":1}]}]}"#;
    assert!(parse_gaussian_network(unknown).is_err());
    assert!(parse_gaussian_network("{").is_err());
}
