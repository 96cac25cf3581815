use serde::{Deserialize, Serialize};

use super::graph::ContactNetwork;
use super::population::PopulationSpec;
use super::sbm::{build_contact_matrix, generate_sbm, ContactMatrix};
use super::{generate_gmm_network, GmmNetworkReport};
use crate::error::Result;
use crate::gmm::{fit_groups, FittedModels, SelectOptions};
use crate::rng;
use crate::types::EgoVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Gmm,
    Sbm,
}

/// A network generator: mixture or block model, with or without
/// respondent-age structure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Method {
    pub kind: GeneratorKind,
    #[serde(default = "yes")]
    pub age_structured: bool,
}

fn yes() -> bool {
    true
}

impl Method {
    pub const GMM: Method = Method { kind: GeneratorKind::Gmm, age_structured: true };
    pub const GMM_NO_AGE: Method = Method { kind: GeneratorKind::Gmm, age_structured: false };
    pub const SBM: Method = Method { kind: GeneratorKind::Sbm, age_structured: true };
    pub const SBM_NO_AGE: Method = Method { kind: GeneratorKind::Sbm, age_structured: false };

    pub fn name(&self) -> &'static str {
        match (self.kind, self.age_structured) {
            (GeneratorKind::Gmm, true) => "gmm",
            (GeneratorKind::Gmm, false) => "gmm-no-age",
            (GeneratorKind::Sbm, true) => "sbm",
            (GeneratorKind::Sbm, false) => "sbm-no-age",
        }
    }
}

/// Fitted parameters of a [`Method`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
#[allow(clippy::large_enum_variant)]
pub enum FittedMethod {
    Gmm(FittedModels),
    Sbm(ContactMatrix),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[allow(clippy::large_enum_variant)]
pub enum GenerationReport {
    Gmm(GmmNetworkReport),
    Sbm,
}

pub fn fit_method(method: Method, vectors: &[EgoVector], spec: &PopulationSpec, seed: u64, select: &SelectOptions) -> Result<FittedMethod> {
    Ok(match method.kind {
        GeneratorKind::Gmm => FittedMethod::Gmm(fit_groups(vectors, method.age_structured, seed, select)?),
        GeneratorKind::Sbm if method.age_structured => FittedMethod::Sbm(build_contact_matrix(vectors)),
        GeneratorKind::Sbm => FittedMethod::Sbm(ContactMatrix::age_free(vectors, &spec.age_proportions)),
    })
}

pub fn generate(fitted: &FittedMethod, spec: &PopulationSpec, seed: u64) -> Result<(ContactNetwork, GenerationReport)> {
    match fitted {
        FittedMethod::Gmm(models) => {
            let (g, r) = generate_gmm_network(models, spec, seed)?;
            Ok((g, GenerationReport::Gmm(r)))
        }
        FittedMethod::Sbm(cm) => Ok((generate_sbm(cm, spec, &mut rng::stream(seed, &[3]))?, GenerationReport::Sbm)),
    }
}
