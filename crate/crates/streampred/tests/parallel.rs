use streampred::parallel::{compare, evaluate_scenes, reduce};
use streampred_core::harness::{self, PipelineConfig, PipelineKind};
use streampred_core::scenario::{generate_synthetic, ScenarioConfig, Scene};

fn scenes(n: u64) -> Vec<Scene> {
    (0..n).map(|s| generate_synthetic(&ScenarioConfig::default(), 40 + s).unwrap()).collect()
}

fn configs() -> Vec<PipelineConfig> {
    vec![
        PipelineConfig { d_h: 32, d_k: 16, n_query: 12, ..PipelineConfig::default() },
        PipelineConfig { pipeline: PipelineKind::Traditional, detection_noise: 0.1, ..PipelineConfig::default() },
        PipelineConfig { k: 0, ..PipelineConfig::default() },
    ]
}

#[test]
fn parallel_run_is_bit_identical_to_sequential() {
    let sc = scenes(6);
    for cfg in &configs()[..2] {
        let par = reduce(&evaluate_scenes(&sc, cfg).unwrap(), cfg).unwrap();
        let seq = harness::run_config(&sc, cfg).unwrap();
        assert_eq!(par, seq);
    }
}

#[test]
fn parallel_compare_matches_core_compare() {
    let sc = scenes(3);
    let cfgs = configs();
    let par = compare(&sc, &cfgs).unwrap();
    let seq = harness::compare(&sc, &cfgs).unwrap();
    assert_eq!(par.rows.len(), 3);
    assert_eq!(par.rows[..2], seq.rows[..2]);
    assert!(par.rows[2].error.is_some() && seq.rows[2].error.is_some());
    assert!(compare(&[], &cfgs).is_err());
}
