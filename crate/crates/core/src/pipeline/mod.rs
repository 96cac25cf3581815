//! Config-driven orchestration of the whole analysis.
//!
//! A [`PipelineConfig`] names survey datasets, generator methods, a
//! population and the epidemic settings. [`run_pipeline`] executes the
//! requested [`Stage`] inside a run directory, pulling in earlier stages
//! (or cached models and networks) as needed, and writes
//!
//! - `config.json`: the resolved config
//! - `data/<dataset>.egos.csv`: ego vectors after ingest
//! - `models/<dataset>-<method>.json`: fitted generator parameters
//! - `networks/<dataset>-<method>.{edges,ages}`
//! - `tables/*.csv`: ingest, network, fidelity, epidemic and sweep tables
//! - `manifest.json`: config hash, profile substitutions, stage timings and
//!   a checksum index of every other file
//!
//! Every random stream is derived from the master seed and the labels of
//! the dataset, method and stage it serves, so artifacts are identical
//! across repeated runs and whether or not a cached intermediate was used.

pub mod config;
pub mod manifest;
pub mod tables;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::epidemic::{calibrate_tau, run_replicates, summarize, EpidemicParams, EpidemicSummary, EpidemicTrace, RunOptions};
use crate::error::{Error, Result};
use crate::fidelity::{evaluate_fidelity, self_fit_baseline, FidelityReport, SelfFitOptions};
use crate::ingest::{ego_vectors, read_survey, IngestOptions, IngestReport};
use crate::network::{edges_path, fit_method, generate, read_network, write_network, ContactNetwork, FittedMethod, GenerationReport, Method, PopulationSpec};
use crate::rng;
use crate::synthetic::write_survey;
use crate::types::{cell_parts, AgeGroup, DurationCategory, EgoVector, AGE_GROUPS, CELLS};

pub use config::{CacheConfig, DatasetConfig, DatasetSource, EpidemicConfig, FidelityConfig, PipelineConfig, Profile, SelfFitConfig, Substitution, SweepConfig};
pub use manifest::{FileEntry, RunManifest, StageTiming};
use tables::{num, opt, Table};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Config,
    Ingest,
    Fit,
    Generate,
    Fidelity,
    Simulate,
    Sweep,
    All,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Fit => "fit",
            Stage::Generate => "generate",
            Stage::Fidelity => "fidelity",
            Stage::Simulate => "simulate",
            Stage::Sweep => "sweep",
            Stage::All => "all",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Where and what to run.
#[derive(Clone, Debug)]
pub struct RunRequest {
    pub dir: PathBuf,
    pub target: Stage,
    pub profile: Option<Profile>,
}

/// A failed run: the stage that failed and the manifest written so far.
#[derive(Debug, thiserror::Error)]
#[error("stage `{stage}` failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Error,
    pub manifest: Box<RunManifest>,
}

impl PipelineError {
    /// 2 for config errors, 3 for unreadable or malformed inputs, 4 for
    /// any other stage failure.
    pub fn exit_code(&self) -> i32 {
        match (&self.source, self.stage) {
            (Error::Config(_), _) | (_, Stage::Config) => 2,
            (Error::MalformedRow { .. } | Error::MissingColumn { .. } | Error::Csv(_), _) => 3,
            (Error::Io { .. } | Error::InvalidInput(_), Stage::Ingest) => 3,
            _ => 4,
        }
    }
}

pub fn network_stem(dir: &Path, dataset: &str, method: Method) -> PathBuf {
    dir.join(format!("{dataset}-{}", method.name()))
}

pub fn model_path(dir: &Path, dataset: &str, method: Method) -> PathBuf {
    dir.join(format!("{dataset}-{}.json", method.name()))
}

type Key = (String, Method);

struct Runner<'a> {
    config: &'a PipelineConfig,
    dir: PathBuf,
    vectors: BTreeMap<String, Vec<EgoVector>>,
    ingest_reports: BTreeMap<String, IngestReport>,
    fitted: BTreeMap<Key, FittedMethod>,
    networks: BTreeMap<Key, ContactNetwork>,
    network_rows: Table,
    timings: BTreeMap<Stage, f64>,
    /// Seconds spent in nested stages, one slot per open stage.
    nested: Vec<f64>,
    failed: Option<Stage>,
}

impl<'a> Runner<'a> {
    fn new(config: &'a PipelineConfig, dir: PathBuf) -> Self {
        Runner {
            config,
            dir,
            vectors: BTreeMap::new(),
            ingest_reports: BTreeMap::new(),
            fitted: BTreeMap::new(),
            networks: BTreeMap::new(),
            network_rows: Table::new(&["dataset", "method", "source", "nodes", "edges", "mean_degree", "stubs_sampled", "stubs_rebalanced", "stubs_unwired"]),
            timings: BTreeMap::new(),
            nested: Vec::new(),
            failed: None,
        }
    }

    fn spec(&self) -> &PopulationSpec {
        &self.config.population
    }

    fn seed(&self, labels: &[&str]) -> u64 {
        let path: Vec<u64> = labels.iter().map(|l| rng::label(l)).collect();
        rng::derive_seed(self.config.seed, &path)
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    /// Run `f` as `stage`, charging its own time (excluding nested stages)
    /// and remembering the innermost stage that failed.
    fn timed<T>(&mut self, stage: Stage, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        self.nested.push(0.0);
        let out = f(self);
        let inner = self.nested.pop().unwrap_or(0.0);
        let total = start.elapsed().as_secs_f64();
        *self.timings.entry(stage).or_default() += total - inner;
        if let Some(parent) = self.nested.last_mut() {
            *parent += total;
        }
        if out.is_err() && self.failed.is_none() {
            self.failed = Some(stage);
        }
        out
    }

    fn dataset(&self, name: &str) -> &'a DatasetConfig {
        self.config.datasets.iter().find(|d| d.name == name).expect("dataset names come from the config")
    }

    fn ensure_vectors(&mut self, ds: &str) -> Result<()> {
        if self.vectors.contains_key(ds) {
            return Ok(());
        }
        self.timed(Stage::Ingest, |r| {
            let d = r.dataset(ds);
            let (participants, contacts, options) = match &d.source {
                DatasetSource::Files { participants, contacts, ingest } => (participants.clone(), contacts.clone(), ingest.clone()),
                source => {
                    let profile = source.survey_profile().ok_or_else(|| Error::Config(format!("dataset `{ds}`: unknown preset")))?;
                    let (p, c) = write_survey(&profile, &r.path(&format!("data/{ds}")), r.seed(&[ds, "survey"]))?;
                    (p, c, IngestOptions::default())
                }
            };
            let (records, mut report) = read_survey(&participants, &contacts, &options)?;
            if records.is_empty() {
                return Err(Error::InvalidInput(format!("dataset `{ds}` has no usable participants")));
            }
            let (vectors, _) = ego_vectors(&records, &mut rng::stream(r.seed(&[ds, "ingest"]), &[]), &mut report);
            write_ego_vectors(&vectors, &r.path(&format!("data/{ds}.egos.csv")))?;
            r.vectors.insert(ds.to_string(), vectors);
            r.ingest_reports.insert(ds.to_string(), report);
            Ok(())
        })
    }

    fn ensure_fitted(&mut self, ds: &str, m: Method) -> Result<()> {
        let key = (ds.to_string(), m);
        if self.fitted.contains_key(&key) {
            return Ok(());
        }
        if let Some(dir) = &self.config.cache.models_dir {
            let path = model_path(dir, ds, m);
            if path.is_file() {
                let fitted = self.timed(Stage::Fit, |_| {
                    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                    Ok(serde_json::from_str::<FittedMethod>(&text)?)
                })?;
                self.fitted.insert(key, fitted);
                return Ok(());
            }
        }
        self.ensure_vectors(ds)?;
        self.timed(Stage::Fit, |r| {
            let fitted = fit_method(m, &r.vectors[ds], r.spec(), r.seed(&[ds, m.name(), "fit"]), &r.config.selection)?;
            let path = model_path(&r.path("models"), ds, m);
            create_parent(&path)?;
            std::fs::write(&path, serde_json::to_string_pretty(&fitted)? + "\n").map_err(|e| Error::io(&path, e))?;
            r.fitted.insert(key, fitted);
            Ok(())
        })
    }

    fn ensure_network(&mut self, ds: &str, m: Method) -> Result<()> {
        let key = (ds.to_string(), m);
        if self.networks.contains_key(&key) {
            return Ok(());
        }
        if let Some(dir) = &self.config.cache.networks_dir {
            let stem = network_stem(dir, ds, m);
            if edges_path(&stem).is_file() {
                let net = self.timed(Stage::Generate, |_| read_network(&stem))?;
                if net.node_count() != self.spec().n {
                    self.failed.get_or_insert(Stage::Generate);
                    return Err(Error::InvalidInput(format!("cached network {} has {} nodes, population is {}", stem.display(), net.node_count(), self.spec().n)));
                }
                self.record_network(ds, m, "cached", &net, None);
                self.networks.insert(key, net);
                return Ok(());
            }
        }
        self.ensure_fitted(ds, m)?;
        self.timed(Stage::Generate, |r| {
            let (net, report) = generate(&r.fitted[&key], r.spec(), r.seed(&[ds, m.name(), "generate"]))?;
            let stem = network_stem(&r.path("networks"), ds, m);
            create_parent(&stem)?;
            write_network(&net, &stem)?;
            r.record_network(ds, m, "generated", &net, Some(&report));
            r.networks.insert(key, net);
            Ok(())
        })
    }

    fn record_network(&mut self, ds: &str, m: Method, source: &str, net: &ContactNetwork, report: Option<&GenerationReport>) {
        let (sampled, rebalanced, unwired) = match report {
            Some(GenerationReport::Gmm(g)) => (g.rebalance.stubs_before.to_string(), g.rebalance.stubs_after.to_string(), g.wiring.leftover.to_string()),
            _ => Default::default(),
        };
        self.network_rows.push(vec![
            ds.into(),
            m.name().into(),
            source.into(),
            net.node_count().to_string(),
            net.edge_count().to_string(),
            num(net.mean_degree()),
            sampled,
            rebalanced,
            unwired,
        ]);
    }

    fn pairs(&self) -> Vec<(String, Method)> {
        let mut out = Vec::new();
        for d in &self.config.datasets {
            for &m in &self.config.methods {
                out.push((d.name.clone(), m));
            }
        }
        out
    }

    fn run_ingest(&mut self) -> Result<()> {
        for d in &self.config.datasets {
            self.ensure_vectors(&d.name)?;
        }
        Ok(())
    }

    fn run_fit(&mut self) -> Result<()> {
        for (ds, m) in self.pairs() {
            self.ensure_fitted(&ds, m)?;
        }
        Ok(())
    }

    fn run_generate(&mut self) -> Result<()> {
        for (ds, m) in self.pairs() {
            self.ensure_network(&ds, m)?;
        }
        Ok(())
    }

    fn run_fidelity(&mut self) -> Result<()> {
        let mut detail = Table::new(&["dataset", "method", "kind", "matching", "realization", "emd"]);
        let mut header: Vec<String> = ["dataset", "method", "kind", "matching", "realizations", "emd_mean", "emd_lo", "emd_hi"].map(String::from).to_vec();
        header.extend(AgeGroup::ALL.iter().map(|a| format!("emd_{}", a.label())));
        let mut summary = Table::with_header(header);
        for (ds, m) in self.pairs() {
            self.ensure_fitted(&ds, m)?;
            self.ensure_vectors(&ds)?;
            let reports = self.timed(Stage::Fidelity, |r| {
                let fitted = &r.fitted[&(ds.clone(), m)];
                let data = &r.vectors[&ds];
                let mut out = vec![("data", evaluate_fidelity(m, fitted, r.spec(), data, r.config.fidelity.realizations, r.seed(&[&ds, m.name(), "fidelity"]))?)];
                if let Some(sf) = &r.config.fidelity.self_fit {
                    let opts = SelfFitOptions { sample_size: sf.sample_size.unwrap_or(data.len()), realizations: sf.realizations, refit: sf.refit };
                    out.push(("self-fit", self_fit_baseline(m, fitted, r.spec(), &opts, &r.config.selection, r.seed(&[&ds, m.name(), "self-fit"]))?));
                }
                Ok(out)
            })?;
            for (kind, rep) in &reports {
                push_fidelity(&mut detail, &mut summary, &ds, m, kind, rep);
            }
        }
        self.timed(Stage::Fidelity, |r| {
            detail.write(&r.path("tables/fidelity.csv"))?;
            summary.write(&r.path("tables/fidelity_summary.csv"))
        })
    }

    fn epidemic_params(&self, durations: bool) -> EpidemicParams {
        EpidemicParams { use_duration_weights: durations, ..self.config.epidemic.params.clone() }
    }

    fn run_simulate(&mut self) -> Result<()> {
        let mut epi = Table::new(&EPIDEMIC_HEADER);
        let mut runs = Table::new(&[
            "dataset", "method", "duration_weights", "r0_target", "tau", "replicate", "index_case", "g1", "g2", "g3", "infections", "attack_rate", "end_time",
        ]);
        let mut contrib = Table::new(&["dataset", "method", "duration_weights", "r0_target", "kind", "category", "share"]);
        let mut events = Table::new(&["dataset", "method", "duration_weights", "r0_target", "replicate", "time", "node", "transition", "infector"]);
        let config = self.config;
        let e = &config.epidemic;
        let targets: Vec<Option<f64>> = if e.r0_targets.is_empty() { vec![None] } else { e.r0_targets.iter().map(|&t| Some(t)).collect() };
        for (ds, m) in self.pairs() {
            self.ensure_network(&ds, m)?;
            for &dw in &e.duration_variants {
                for &target in &targets {
                    let (point, traces) = self.timed(Stage::Simulate, |r| {
                        let net = &r.networks[&(ds.clone(), m)];
                        let labels = [ds.as_str(), m.name(), variant(dw), "simulate"];
                        r.point(net, dw, target, r.config.epidemic.replicates, &labels, r.config.epidemic.record_events)
                    })?;
                    let prefix = vec![ds.clone(), m.name().to_string(), dw.to_string(), opt(target)];
                    epi.push(epidemic_row(&prefix, &point));
                    for (k, t) in traces.iter().enumerate() {
                        runs.push(run_row(&prefix, point.summary.tau, k, t));
                        for ev in &t.events {
                            let infector = ev.infector.map(|i| i.to_string()).unwrap_or_default();
                            events.push([prefix.clone(), vec![k.to_string(), num(ev.time), ev.node.to_string(), ev.transition.label().into(), infector]].concat());
                        }
                    }
                    if let Some(shares) = point.summary.duration_share {
                        for (d, s) in DurationCategory::ALL.iter().zip(shares) {
                            contrib.push([prefix.clone(), vec!["duration".into(), d.label().into(), num(s)]].concat());
                        }
                    }
                    if let Some(shares) = point.summary.age_share {
                        for (a, s) in AgeGroup::ALL.iter().zip(shares) {
                            contrib.push([prefix.clone(), vec!["age".into(), a.label().into(), num(s)]].concat());
                        }
                    }
                }
            }
        }
        self.timed(Stage::Simulate, |r| {
            epi.write(&r.path("tables/epidemic.csv"))?;
            runs.write(&r.path("tables/runs.csv"))?;
            contrib.write(&r.path("tables/contributions.csv"))?;
            if r.config.epidemic.record_events {
                events.write(&r.path("tables/events.csv"))?;
            }
            Ok(())
        })
    }

    /// Calibrate (when a target is given), run replicates and summarize.
    fn point(&self, net: &ContactNetwork, durations: bool, target: Option<f64>, replicates: usize, labels: &[&str], events: bool) -> Result<(Point, Vec<EpidemicTrace>)> {
        let e = &self.config.epidemic;
        let mut params = self.epidemic_params(durations);
        let tag = target.map_or_else(|| format!("tau={}", params.tau), |t| format!("r0={t}"));
        let mut path: Vec<&str> = labels.to_vec();
        path.push(&tag);
        let (reachable, evaluations) = match target {
            Some(t) => {
                let cal = calibrate_tau(net, &params, t, &e.calibration, self.seed(&[&path[..], &["calibrate"]].concat()))?;
                params.tau = cal.tau;
                (Some(cal.reachable), cal.evaluations)
            }
            None => (None, 0),
        };
        let options = RunOptions { record_events: events, ..Default::default() };
        let traces = run_replicates(net, &params, &options, replicates, self.seed(&[&path[..], &["runs"]].concat()))?;
        let summary = summarize(&traces, net, &params, &e.summary, self.seed(&[&path[..], &["summary"]].concat()));
        Ok((Point { summary, reachable, evaluations }, traces))
    }

    fn run_sweep(&mut self) -> Result<()> {
        let mut header: Vec<&str> = vec!["mode"];
        header.extend(EPIDEMIC_HEADER);
        let mut table = Table::new(&header);
        let config = self.config;
        let sw = &config.sweep;
        let replicates = sw.replicates.unwrap_or(self.config.epidemic.replicates);
        let mut grid: Vec<(&str, Option<f64>, Option<f64>)> = sw.taus.iter().map(|&t| ("tau", None, Some(t))).collect();
        grid.extend(sw.r0_targets.iter().map(|&t| ("r0", Some(t), None)));
        for (ds, m) in self.pairs() {
            self.ensure_network(&ds, m)?;
            for &dw in &config.epidemic.duration_variants {
                let rows = self.timed(Stage::Sweep, |r| {
                    let net = &r.networks[&(ds.clone(), m)];
                    let mut rows = Vec::new();
                    for &(mode, target, tau) in &grid {
                        let labels = [ds.as_str(), m.name(), variant(dw), "sweep"];
                        let point = match tau {
                            Some(tau) => r.point_at_tau(net, dw, tau, replicates, &labels)?,
                            None => r.point(net, dw, target, replicates, &labels, false)?.0,
                        };
                        let prefix = vec![mode.to_string(), ds.clone(), m.name().to_string(), dw.to_string(), opt(target)];
                        rows.push(epidemic_row(&prefix, &point));
                    }
                    Ok(rows)
                })?;
                for row in rows {
                    table.push(row);
                }
            }
        }
        self.timed(Stage::Sweep, |r| table.write(&r.path("tables/sweep.csv")))
    }

    fn point_at_tau(&self, net: &ContactNetwork, durations: bool, tau: f64, replicates: usize, labels: &[&str]) -> Result<Point> {
        let e = &self.config.epidemic;
        let params = EpidemicParams { tau, ..self.epidemic_params(durations) };
        let tag = format!("tau={tau}");
        let path: Vec<&str> = labels.iter().copied().chain([tag.as_str()]).collect();
        let traces = run_replicates(net, &params, &RunOptions::default(), replicates, self.seed(&[&path[..], &["runs"]].concat()))?;
        let summary = summarize(&traces, net, &params, &e.summary, self.seed(&[&path[..], &["summary"]].concat()));
        Ok(Point { summary, reachable: None, evaluations: 0 })
    }

    fn write_ingest_table(&self) -> Result<()> {
        if self.ingest_reports.is_empty() {
            return Ok(());
        }
        let mut t = Table::new(&[
            "dataset",
            "participants",
            "participants_missing_age",
            "contacts_read",
            "contacts_retained",
            "contacts_bad_duration",
            "durations_imputed",
            "ages_unambiguous",
            "ages_from_prior",
            "ages_missing",
            "mean_contacts",
        ]);
        for (ds, r) in &self.ingest_reports {
            let v = &self.vectors[ds];
            let mean = v.iter().map(|e| e.total() as f64).sum::<f64>() / v.len() as f64;
            t.push(vec![
                ds.clone(),
                v.len().to_string(),
                r.participants_missing_age.to_string(),
                r.contacts_read.to_string(),
                r.contacts_retained.to_string(),
                r.contacts_bad_duration.to_string(),
                r.durations_imputed.to_string(),
                r.ages_unambiguous.to_string(),
                r.ages_from_prior.to_string(),
                r.ages_missing.to_string(),
                num(mean),
            ]);
        }
        t.write(&self.path("tables/ingest.csv"))
    }

    fn run(&mut self, target: Stage) -> Result<()> {
        let c = self.config;
        let stages: Vec<Stage> = match target {
            Stage::All => {
                let mut s = vec![Stage::Ingest, Stage::Fit, Stage::Generate];
                if c.fidelity.realizations > 0 {
                    s.push(Stage::Fidelity);
                }
                s.push(Stage::Simulate);
                if !c.sweep.is_empty() {
                    s.push(Stage::Sweep);
                }
                s
            }
            Stage::Config => vec![],
            s => vec![s],
        };
        for s in stages {
            match s {
                Stage::Ingest => self.run_ingest()?,
                Stage::Fit => self.run_fit()?,
                Stage::Generate => self.run_generate()?,
                Stage::Fidelity => self.run_fidelity()?,
                Stage::Simulate => self.run_simulate()?,
                Stage::Sweep => {
                    if c.sweep.is_empty() {
                        self.failed = Some(Stage::Sweep);
                        return Err(Error::Config("sweep needs taus or r0_targets".into()));
                    }
                    self.run_sweep()?
                }
                Stage::Config | Stage::All => {}
            }
        }
        self.write_ingest_table()?;
        if !self.network_rows.is_empty() {
            self.network_rows.write(&self.path("tables/networks.csv"))?;
        }
        Ok(())
    }
}

fn variant(durations: bool) -> &'static str {
    if durations {
        "weighted"
    } else {
        "unweighted"
    }
}

struct Point {
    summary: EpidemicSummary,
    reachable: Option<bool>,
    evaluations: usize,
}

const EPIDEMIC_HEADER: [&str; 18] = [
    "dataset",
    "method",
    "duration_weights",
    "r0_target",
    "tau",
    "reachable",
    "calibration_evaluations",
    "replicates",
    "r0",
    "max_r0",
    "final_size",
    "outbreaks",
    "extinctions",
    "k",
    "k_lo",
    "k_hi",
    "k_infinite",
    "secondary_mean",
];

fn epidemic_row(prefix: &[String], p: &Point) -> Vec<String> {
    let s = &p.summary;
    let d = s.dispersion.as_ref();
    let mut row = prefix.to_vec();
    row.extend([
        num(s.tau),
        p.reachable.map(|b| b.to_string()).unwrap_or_default(),
        p.evaluations.to_string(),
        s.replicates.to_string(),
        opt(s.r0),
        opt(s.max_r0),
        num(s.final_size.value),
        s.final_size.included.to_string(),
        s.final_size.excluded.to_string(),
        opt(d.map(|d| d.k)),
        opt(d.map(|d| d.interval.0)),
        opt(d.map(|d| d.interval.1)),
        d.map(|d| d.k_infinite.to_string()).unwrap_or_default(),
        opt(d.map(|d| d.mean)),
    ]);
    row
}

fn run_row(prefix: &[String], tau: f64, k: usize, t: &EpidemicTrace) -> Vec<String> {
    let mut row = prefix.to_vec();
    row.extend([
        num(tau),
        k.to_string(),
        t.infections.first().map(|i| i.node.to_string()).unwrap_or_default(),
        t.generation_size(1).to_string(),
        t.generation_size(2).to_string(),
        t.generation_size(3).to_string(),
        t.infections.len().to_string(),
        num(t.recovered() as f64 / t.n as f64),
        num(t.end_time),
    ]);
    row
}

fn push_fidelity(detail: &mut Table, summary: &mut Table, ds: &str, m: Method, kind: &str, rep: &FidelityReport) {
    let matching = serde_json::to_value(rep.matching).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    for (k, v) in rep.realizations.iter().enumerate() {
        detail.push(vec![ds.into(), m.name().into(), kind.into(), matching.clone(), k.to_string(), num(*v)]);
    }
    let mut row = vec![ds.into(), m.name().into(), kind.into(), matching, rep.realizations.len().to_string(), num(rep.mean), num(rep.interval.0), num(rep.interval.1)];
    row.extend(rep.per_age_mean.iter().map(|x| opt(*x)));
    summary.push(row);
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) => std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        None => Ok(()),
    }
}

/// One row per ego: owner age group, then the 45 cell counts.
pub fn write_ego_vectors(vectors: &[EgoVector], path: &Path) -> Result<()> {
    let mut header = vec!["owner_age".to_string()];
    header.extend((0..CELLS).map(|c| {
        let (a, d) = cell_parts(c);
        format!("{}|{}", a.label(), d.label())
    }));
    let mut t = Table::with_header(header);
    for v in vectors {
        let mut row = vec![v.owner_age.label().to_string()];
        row.extend(v.counts.iter().map(|c| c.to_string()));
        t.push(row);
    }
    create_parent(path)?;
    t.write(path)
}

fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([("contactnet".to_string(), env!("CARGO_PKG_VERSION").to_string()), ("age_groups".to_string(), AGE_GROUPS.to_string())])
}

/// Run `request.target` (and whatever it depends on) in `request.dir`.
/// The manifest is written on success and on failure.
pub fn run_pipeline(config: &PipelineConfig, request: &RunRequest) -> std::result::Result<RunManifest, PipelineError> {
    let (config, substitutions) = match request.profile {
        Some(p) => config.with_profile(p),
        None => (config.clone(), Vec::new()),
    };
    let mut manifest = RunManifest {
        config_hash: config.hash(),
        seed: config.seed,
        target: request.target,
        profile: request.profile,
        substitutions,
        versions: versions(),
        stages: Vec::new(),
        complete: false,
        failed_stage: None,
        error: None,
        files: Vec::new(),
    };
    let dir = request.dir.clone();
    let fail = |stage: Stage, source: Error, mut manifest: RunManifest| {
        manifest.failed_stage = Some(stage);
        manifest.error = Some(source.to_string());
        if dir.is_dir() {
            if let Ok(files) = manifest::index_files(&dir) {
                manifest.files = files;
            }
            let _ = manifest.write(&dir);
        }
        PipelineError { stage, source, manifest: Box::new(manifest) }
    };
    if let Err(e) = std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e)) {
        return Err(fail(Stage::Config, e, manifest));
    }
    if let Err(e) = config.validate() {
        return Err(fail(Stage::Config, e, manifest));
    }
    let config_path = dir.join("config.json");
    let written = serde_json::to_string_pretty(&config).map_err(Error::from).and_then(|t| std::fs::write(&config_path, t + "\n").map_err(|e| Error::io(&config_path, e)));
    if let Err(e) = written {
        return Err(fail(Stage::Config, e, manifest));
    }

    let mut runner = Runner::new(&config, dir.clone());
    let result = match config.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| runner.run(request.target)),
            Err(e) => Err(Error::Config(format!("thread pool: {e}"))),
        },
        None => runner.run(request.target),
    };
    manifest.stages = runner.timings.iter().map(|(&stage, &seconds)| StageTiming { stage, seconds }).collect();
    if let Err(e) = result {
        let stage = runner.failed.unwrap_or(request.target);
        return Err(fail(stage, e, manifest));
    }
    manifest.complete = true;
    match manifest::index_files(&dir).and_then(|files| {
        manifest.files = files;
        manifest.write(&dir)
    }) {
        Ok(()) => Ok(manifest),
        Err(e) => Err(fail(request.target, e, manifest)),
    }
}
