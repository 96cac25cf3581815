use std::path::Path;

use contactnet::gmm::SelectOptions;
use contactnet::network::{Method, PopulationSpec, DEFAULT_PROPORTIONS};
use contactnet::pipeline::{run_pipeline, CacheConfig, DatasetConfig, DatasetSource, PipelineConfig, Profile, RunManifest, RunRequest, SelfFitConfig, Stage};

fn small_config() -> PipelineConfig {
    let mut c = PipelineConfig::from_json(r#"{"seed": 11, "datasets": []}"#).unwrap();
    c.datasets = vec![DatasetConfig { name: "toy".into(), source: DatasetSource::Preset { profile: "lockdown".into(), respondents: 300 } }];
    c.methods = vec![Method::GMM, Method::SBM];
    c.population = PopulationSpec { n: 1500, age_proportions: DEFAULT_PROPORTIONS };
    c.selection = SelectOptions { splits: 2, max_components: 2, ..Default::default() };
    c.fidelity.realizations = 2;
    c.fidelity.self_fit = Some(SelfFitConfig { sample_size: None, realizations: 1, refit: true });
    c.epidemic.replicates = 6;
    c.epidemic.r0_targets = vec![1.2];
    c.epidemic.duration_variants = vec![true, false];
    c.epidemic.calibration.replicates = 8;
    c.epidemic.summary.bootstrap = 10;
    c.sweep.taus = vec![0.0, 2.0];
    c.sweep.r0_targets = vec![50.0];
    c.sweep.replicates = Some(4);
    c.epidemic.calibration.max_tau = 64.0;
    c
}

fn run(config: &PipelineConfig, dir: &Path, target: Stage) -> RunManifest {
    run_pipeline(config, &RunRequest { dir: dir.to_path_buf(), target, profile: None }).unwrap()
}

fn csv_hashes(m: &RunManifest) -> Vec<(String, String)> {
    m.files.iter().filter(|f| f.path.ends_with(".csv") || f.path.ends_with(".edges")).map(|f| (f.path.clone(), f.sha256.clone())).collect()
}

#[test]
fn end_to_end_is_deterministic_and_complete() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config();
    let a = run(&config, &tmp.path().join("a"), Stage::All);
    let b = run(&config, &tmp.path().join("b"), Stage::All);
    assert!(a.complete);
    assert_eq!(csv_hashes(&a), csv_hashes(&b));
    for path in [
        "config.json",
        "data/toy.egos.csv",
        "models/toy-gmm.json",
        "networks/toy-sbm.edges",
        "tables/fidelity.csv",
        "tables/fidelity_summary.csv",
        "tables/epidemic.csv",
        "tables/runs.csv",
        "tables/contributions.csv",
        "tables/sweep.csv",
        "tables/ingest.csv",
        "tables/networks.csv",
    ] {
        assert!(a.file(path).is_some(), "{path} not indexed");
    }
    let stages: Vec<Stage> = a.stages.iter().map(|s| s.stage).collect();
    assert_eq!(stages, [Stage::Ingest, Stage::Fit, Stage::Generate, Stage::Fidelity, Stage::Simulate, Stage::Sweep]);
    let on_disk = RunManifest::read(&tmp.path().join("a")).unwrap();
    assert_eq!(on_disk.files, a.files);

    let sweep = std::fs::read_to_string(tmp.path().join("a/tables/sweep.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(sweep.as_bytes());
    let header = rdr.headers().unwrap().clone();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    for row in rdr.records() {
        let row = row.unwrap();
        if &row[col("mode")] == "tau" && &row[col("tau")] == "0" {
            assert_eq!(&row[col("final_size")], "0");
        }
        if &row[col("mode")] == "r0" {
            assert_eq!(&row[col("reachable")], "false", "R0 = 50 cannot be reached");
        }
    }
}

#[test]
fn cached_artifacts_reproduce_later_stages() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config();
    let full = run(&config, &tmp.path().join("full"), Stage::All);

    let mut from_networks = config.clone();
    from_networks.cache = CacheConfig { models_dir: None, networks_dir: Some(tmp.path().join("full/networks")) };
    let sim = run(&from_networks, &tmp.path().join("sim"), Stage::Simulate);
    assert!(sim.stages.iter().all(|s| s.stage == Stage::Simulate || s.stage == Stage::Generate));
    assert!(sim.file("models/toy-gmm.json").is_none(), "fit must be skipped");
    for t in ["tables/epidemic.csv", "tables/runs.csv", "tables/contributions.csv"] {
        assert_eq!(full.file(t).unwrap().sha256, sim.file(t).unwrap().sha256, "{t}");
    }

    let mut from_models = config.clone();
    from_models.cache = CacheConfig { models_dir: Some(tmp.path().join("full/models")), networks_dir: None };
    let gen = run(&from_models, &tmp.path().join("gen"), Stage::Generate);
    for m in ["gmm", "sbm"] {
        let p = format!("networks/toy-{m}.edges");
        assert_eq!(full.file(&p).unwrap().sha256, gen.file(&p).unwrap().sha256, "{p}");
    }
}

#[test]
fn failures_report_stage_and_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let mut bad = small_config();
    bad.methods.clear();
    let err = run_pipeline(&bad, &RunRequest { dir: tmp.path().join("bad"), target: Stage::All, profile: None }).unwrap_err();
    assert_eq!(err.stage, Stage::Config);
    assert_eq!(err.exit_code(), 2);
    assert!(!err.manifest.complete);

    let data = tmp.path().join("broken");
    std::fs::create_dir_all(&data).unwrap();
    std::fs::write(data.join("p.csv"), "part_id,part_age\np1,30\n").unwrap();
    std::fs::write(data.join("c.csv"), "part_id,cnt_age_exact\np1,31\n").unwrap();
    let mut missing_column = small_config();
    missing_column.datasets[0].source = DatasetSource::Files { participants: data.join("p.csv"), contacts: data.join("c.csv"), ingest: Default::default() };
    let dir = tmp.path().join("run");
    let err = run_pipeline(&missing_column, &RunRequest { dir: dir.clone(), target: Stage::Fit, profile: None }).unwrap_err();
    assert_eq!(err.stage, Stage::Ingest);
    assert_eq!(err.exit_code(), 3);
    let partial = RunManifest::read(&dir).unwrap();
    assert_eq!(partial.failed_stage, Some(Stage::Ingest));
    assert!(partial.file("config.json").is_some());
}

#[test]
fn profile_substitutions_are_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = small_config();
    config.population.n = 100_000;
    let m = run_pipeline(&config, &RunRequest { dir: tmp.path().to_path_buf(), target: Stage::Ingest, profile: Some(Profile::Desk) }).unwrap();
    let fields: Vec<&str> = m.substitutions.iter().map(|s| s.field.as_str()).collect();
    assert!(fields.contains(&"population.n") && fields.contains(&"selection.splits"));
    assert_eq!(m.config_hash, config.with_profile(Profile::Desk).0.hash());
}
