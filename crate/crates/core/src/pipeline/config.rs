use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::epidemic::{CalibrationOptions, EpidemicParams, SummaryOptions};
use crate::error::{Error, Result};
use crate::gmm::SelectOptions;
use crate::ingest::IngestOptions;
use crate::network::{Method, PopulationSpec, DEFAULT_PROPORTIONS};
use crate::synthetic::SurveyProfile;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub datasets: Vec<DatasetConfig>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_population")]
    pub population: PopulationSpec,
    #[serde(default)]
    pub selection: SelectOptions,
    #[serde(default)]
    pub fidelity: FidelityConfig,
    #[serde(default)]
    pub epidemic: EpidemicConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub cache: CacheConfig,
    /// Worker threads; all available cores when absent.
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_methods() -> Vec<Method> {
    vec![Method::GMM, Method::SBM]
}

fn default_population() -> PopulationSpec {
    PopulationSpec { n: 100_000, age_proportions: DEFAULT_PROPORTIONS }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    /// Used in file names and table rows.
    pub name: String,
    pub source: DatasetSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Files {
        participants: PathBuf,
        contacts: PathBuf,
        #[serde(default)]
        ingest: IngestOptions,
    },
    /// A generated survey, written into the run directory before ingest.
    Synthetic(SurveyProfile),
    /// A built-in synthetic profile by name.
    Preset { profile: String, respondents: usize },
}

impl DatasetSource {
    /// The survey profile of a generated dataset.
    pub fn survey_profile(&self) -> Option<SurveyProfile> {
        match self {
            DatasetSource::Files { .. } => None,
            DatasetSource::Synthetic(p) => Some(p.clone()),
            DatasetSource::Preset { profile, respondents } => SurveyProfile::by_name(profile, *respondents),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FidelityConfig {
    pub realizations: usize,
    pub self_fit: Option<SelfFitConfig>,
}

impl Default for FidelityConfig {
    fn default() -> Self {
        FidelityConfig { realizations: 100, self_fit: Some(SelfFitConfig::default()) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelfFitConfig {
    /// Synthetic survey size; the dataset's respondent count when absent.
    pub sample_size: Option<usize>,
    pub realizations: usize,
    pub refit: bool,
}

impl Default for SelfFitConfig {
    fn default() -> Self {
        SelfFitConfig { sample_size: None, realizations: 20, refit: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpidemicConfig {
    pub params: EpidemicParams,
    /// Run each network with and/or without duration weights.
    pub duration_variants: Vec<bool>,
    pub replicates: usize,
    /// Calibrate `tau` to each target; when empty, `params.tau` is used.
    pub r0_targets: Vec<f64>,
    pub calibration: CalibrationOptions,
    pub summary: SummaryOptions,
    /// Write the full event log of every simulate-stage run.
    pub record_events: bool,
}

impl Default for EpidemicConfig {
    fn default() -> Self {
        EpidemicConfig {
            params: EpidemicParams::default(),
            duration_variants: vec![true],
            replicates: 100,
            r0_targets: vec![1.5],
            calibration: CalibrationOptions::default(),
            summary: SummaryOptions::default(),
            record_events: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub taus: Vec<f64>,
    pub r0_targets: Vec<f64>,
    /// Replicates per grid point; `epidemic.replicates` when absent.
    pub replicates: Option<usize>,
}

impl SweepConfig {
    pub fn is_empty(&self) -> bool {
        self.taus.is_empty() && self.r0_targets.is_empty()
    }
}

/// Directories of artifacts from an earlier run. A model or network found
/// there replaces the corresponding fit or generate step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheConfig {
    pub models_dir: Option<PathBuf>,
    pub networks_dir: Option<PathBuf>,
}

/// Named overrides for smaller runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    Full,
    Desk,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Profile::Full),
            "desk" => Ok(Profile::Desk),
            _ => Err(Error::Config(format!("unknown profile `{s}` (expected full or desk)"))),
        }
    }
}

/// One field changed by a profile.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Substitution {
    pub field: String,
    pub from: Value,
    pub to: Value,
}

pub const DESK_POPULATION: usize = 10_000;
pub const DESK_REPLICATES: usize = 12;
pub const DESK_SPLITS: usize = 20;

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Parse a config file; relative paths resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for d in &mut self.datasets {
            if let DatasetSource::Files { participants, contacts, .. } = &mut d.source {
                fix(participants);
                fix(contacts);
            }
        }
        if let Some(p) = &mut self.cache.models_dir {
            fix(p);
        }
        if let Some(p) = &mut self.cache.networks_dir {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.datasets.is_empty() {
            return bad("no datasets".into());
        }
        let mut names = BTreeSet::new();
        for d in &self.datasets {
            if !valid_name(&d.name) {
                return bad(format!("dataset name `{}` must be nonempty ASCII letters, digits, `-` or `_`", d.name));
            }
            if !names.insert(&d.name) {
                return bad(format!("duplicate dataset `{}`", d.name));
            }
            match &d.source {
                DatasetSource::Files { participants, contacts, .. } => {
                    for p in [participants, contacts] {
                        if !p.is_file() {
                            return bad(format!("dataset `{}`: file {} does not exist", d.name, p.display()));
                        }
                    }
                }
                source => match source.survey_profile() {
                    Some(p) if p.respondents > 0 && !p.types.is_empty() => {}
                    Some(_) => return bad(format!("dataset `{}`: synthetic profile needs respondents and contact types", d.name)),
                    None => return bad(format!("dataset `{}`: unknown preset", d.name)),
                },
            }
        }
        if self.methods.is_empty() {
            return bad("no methods".into());
        }
        if self.methods.iter().collect::<BTreeSet<_>>().len() != self.methods.len() {
            return bad("duplicate method".into());
        }
        self.population.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.selection.splits == 0 || self.selection.max_components == 0 || !(self.selection.train_frac > 0.0 && self.selection.train_frac < 1.0) {
            return bad("selection needs splits >= 1, max_components >= 1 and 0 < train_frac < 1".into());
        }
        self.epidemic.params.validate().map_err(|e| Error::Config(e.to_string()))?;
        let e = &self.epidemic;
        if e.duration_variants.is_empty() || e.replicates == 0 {
            return bad("epidemic needs at least one duration variant and one replicate".into());
        }
        let c = &e.calibration;
        let positive = |x: f64| x > 0.0;
        if c.replicates == 0 || !positive(c.tolerance) || !positive(c.initial_tau) || c.max_tau.is_nan() || c.max_tau < c.initial_tau {
            return bad("calibration needs replicates >= 1, tolerance > 0 and 0 < initial_tau <= max_tau".into());
        }
        if !(0.0..=1.0).contains(&e.summary.extinction_threshold) {
            return bad("extinction_threshold must lie in [0, 1]".into());
        }
        let targets = e.r0_targets.iter().chain(&self.sweep.r0_targets);
        if targets.into_iter().any(|&t| !(t.is_finite() && t > 0.0)) {
            return bad("R0 targets must be positive".into());
        }
        if self.sweep.taus.iter().any(|&t| !(t.is_finite() && t >= 0.0)) {
            return bad("sweep taus must be nonnegative".into());
        }
        if self.sweep.replicates == Some(0) || self.threads == Some(0) {
            return bad("replicates and threads must be positive".into());
        }
        for dir in [&self.cache.models_dir, &self.cache.networks_dir].into_iter().flatten() {
            if !dir.is_dir() {
                return bad(format!("cache directory {} does not exist", dir.display()));
            }
        }
        Ok(())
    }

    /// Apply a profile, returning the changed config and what changed.
    pub fn with_profile(&self, profile: Profile) -> (PipelineConfig, Vec<Substitution>) {
        let mut c = self.clone();
        let mut subs = Vec::new();
        if profile == Profile::Desk {
            let mut set = |field: &str, slot: &mut usize, to: usize| {
                if *slot != to {
                    subs.push(Substitution { field: field.into(), from: Value::from(*slot), to: Value::from(to) });
                    *slot = to;
                }
            };
            set("population.n", &mut c.population.n, DESK_POPULATION);
            set("epidemic.replicates", &mut c.epidemic.replicates, DESK_REPLICATES);
            set("selection.splits", &mut c.selection.splits, DESK_SPLITS);
            if let Some(r) = c.sweep.replicates {
                let mut r2 = r;
                set("sweep.replicates", &mut r2, DESK_REPLICATES);
                c.sweep.replicates = Some(r2);
            }
        }
        (c, subs)
    }

    /// SHA-256 of the canonical JSON form (object keys sorted).
    pub fn hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical_json(&value).as_bytes()))
    }
}

/// Compact JSON with object keys in sorted order at every level.
pub fn canonical_json(value: &Value) -> String {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            let body: Vec<String> = keys.iter().map(|k| format!("{}:{}", Value::from(k.as_str()), canonical_json(&map[*k]))).collect();
            format!("{{{}}}", body.join(","))
        }
        Value::Array(items) => format!("[{}]", items.iter().map(canonical_json).collect::<Vec<_>>().join(",")),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"seed": 7, "datasets": [{"name": "s", "source": {"synthetic": {
        "name": "s", "respondents": 10, "respondent_ages": [1,1,1,1,1,1,1,1,1],
        "age_activity": [1,1,1,1,1,1,1,1,1],
        "types": [{"weight": 1, "mean_contacts": 2, "shape": 1, "duration_probs": [1,1,1,1,1], "assortativity": 0.5}],
        "exact_share": 1, "interval_share": 0, "missing_duration_share": 0, "max_contacts": 10, "generational": 0}}}]}"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = PipelineConfig::from_json(MINIMAL).unwrap();
        c.validate().unwrap();
        assert_eq!(c.methods, default_methods());
        assert_eq!(c.population.n, 100_000);
        assert_eq!(c.epidemic.r0_targets, vec![1.5]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replacen("\"seed\": 7", "\"seed\": 7, \"sede\": 1", 1);
        assert!(matches!(PipelineConfig::from_json(&text), Err(Error::Config(_))));
        let text = MINIMAL.replacen("\"seed\": 7", "\"seed\": 7, \"epidemic\": {\"replicate\": 3}", 1);
        assert!(PipelineConfig::from_json(&text).is_err());
    }

    #[test]
    fn hash_ignores_key_order() {
        let a: Value = serde_json::from_str(r#"{"b": 1, "a": {"y": [1, 2], "x": null}}"#).unwrap();
        let b: Value = serde_json::from_str(r#"{"a": {"x": null, "y": [1, 2]}, "b": 1}"#).unwrap();
        assert_eq!(canonical_json(&a), canonical_json(&b));
        assert_eq!(canonical_json(&a), r#"{"a":{"x":null,"y":[1,2]},"b":1}"#);
        let c = PipelineConfig::from_json(MINIMAL).unwrap();
        let reordered = MINIMAL.replacen("\"seed\": 7, ", "", 1).replacen("]}", "], \"seed\": 7}", 1);
        let d = PipelineConfig::from_json(&reordered).unwrap();
        assert_eq!(c.hash(), d.hash());
    }

    #[test]
    fn desk_profile_records_substitutions() {
        let c = PipelineConfig::from_json(MINIMAL).unwrap();
        let (d, subs) = c.with_profile(Profile::Desk);
        assert_eq!(d.population.n, 10_000);
        assert_eq!(d.epidemic.replicates, 12);
        assert_eq!(d.selection.splits, 20);
        let fields: Vec<&str> = subs.iter().map(|s| s.field.as_str()).collect();
        assert_eq!(fields, ["population.n", "epidemic.replicates", "selection.splits"]);
        assert_ne!(c.hash(), d.hash());
        assert!(c.with_profile(Profile::Full).1.is_empty());
    }

    #[test]
    fn validation_catches_missing_files() {
        let mut c = PipelineConfig::from_json(MINIMAL).unwrap();
        c.datasets[0].source = DatasetSource::Files { participants: "/nonexistent/p.csv".into(), contacts: "/nonexistent/c.csv".into(), ingest: Default::default() };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
}
