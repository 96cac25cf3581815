//! Deterministic synthetic contact surveys.
//!
//! Generates participant and contact tables in the same layout that
//! [`ingest`](crate::ingest) reads, with heterogeneous respondents (a few
//! latent contact "types" with overdispersed contact counts), age-assortative
//! and cross-generational mixing, interval-censored and missing contact ages,
//! and occasionally missing durations. Used for examples and tests where no
//! real survey is at hand.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::DEFAULT_PROPORTIONS;
use crate::rng;
use crate::types::{AgeGroup, AGE_GROUPS, DURATIONS};

/// A class of respondents with similar contact behaviour.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactType {
    pub weight: f64,
    pub mean_contacts: f64,
    /// Gamma shape of the respondent-level contact rate.
    pub shape: f64,
    pub duration_probs: [f64; DURATIONS],
    /// Probability that a contact is in the respondent's own age group.
    pub assortativity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveyProfile {
    pub name: String,
    pub respondents: usize,
    pub respondent_ages: [f64; AGE_GROUPS],
    /// Contact-rate multiplier by respondent age.
    pub age_activity: [f64; AGE_GROUPS],
    pub types: Vec<ContactType>,
    /// Share of contacts with an exact age; of the rest, `interval_share`
    /// get an estimated range and the remainder no age.
    pub exact_share: f64,
    pub interval_share: f64,
    pub missing_duration_share: f64,
    /// Reported contacts per respondent are truncated here.
    pub max_contacts: u32,
    /// Probability that a contact is a child/parent-generation contact.
    pub generational: f64,
}

const ACTIVITY: [f64; AGE_GROUPS] = [1.2, 1.4, 1.3, 1.1, 1.1, 1.0, 0.9, 0.7, 0.5];

fn household() -> [f64; DURATIONS] {
    [0.04, 0.06, 0.1, 0.25, 0.55]
}

fn mixed() -> [f64; DURATIONS] {
    [0.2, 0.25, 0.25, 0.2, 0.1]
}

fn brief() -> [f64; DURATIONS] {
    [0.45, 0.3, 0.15, 0.07, 0.03]
}

impl SurveyProfile {
    fn base(name: &str, respondents: usize, types: Vec<ContactType>) -> Self {
        SurveyProfile {
            name: name.into(),
            respondents,
            respondent_ages: DEFAULT_PROPORTIONS,
            age_activity: ACTIVITY,
            types,
            exact_share: 0.15,
            interval_share: 0.8,
            missing_duration_share: 0.01,
            max_contacts: 200,
            generational: 0.15,
        }
    }

    /// Relaxed restrictions: heavy-tailed brief contacts.
    pub fn reopen(respondents: usize) -> Self {
        Self::base(
            "reopen",
            respondents,
            vec![
                ContactType { weight: 0.4, mean_contacts: 2.5, shape: 2.0, duration_probs: household(), assortativity: 0.35 },
                ContactType { weight: 0.45, mean_contacts: 6.0, shape: 1.0, duration_probs: mixed(), assortativity: 0.45 },
                ContactType { weight: 0.15, mean_contacts: 22.0, shape: 0.7, duration_probs: brief(), assortativity: 0.5 },
            ],
        )
    }

    /// Strict restrictions: few contacts, mostly long household ones.
    pub fn lockdown(respondents: usize) -> Self {
        Self::base(
            "lockdown",
            respondents,
            vec![
                ContactType { weight: 0.6, mean_contacts: 1.6, shape: 2.5, duration_probs: household(), assortativity: 0.3 },
                ContactType { weight: 0.34, mean_contacts: 3.2, shape: 1.2, duration_probs: mixed(), assortativity: 0.4 },
                ContactType { weight: 0.06, mean_contacts: 10.0, shape: 0.8, duration_probs: brief(), assortativity: 0.45 },
            ],
        )
    }

    /// Between the two: partly lifted restrictions.
    pub fn partial(respondents: usize) -> Self {
        Self::base(
            "partial",
            respondents,
            vec![
                ContactType { weight: 0.5, mean_contacts: 2.0, shape: 2.0, duration_probs: household(), assortativity: 0.3 },
                ContactType { weight: 0.4, mean_contacts: 4.5, shape: 1.1, duration_probs: mixed(), assortativity: 0.45 },
                ContactType { weight: 0.1, mean_contacts: 14.0, shape: 0.75, duration_probs: brief(), assortativity: 0.5 },
            ],
        )
    }

    /// Pre-pandemic diary survey: exact ages, many contacts, capped reports.
    pub fn prepandemic(respondents: usize) -> Self {
        let mut p = Self::base(
            "prepandemic",
            respondents,
            vec![
                ContactType { weight: 0.35, mean_contacts: 6.0, shape: 2.5, duration_probs: household(), assortativity: 0.4 },
                ContactType { weight: 0.45, mean_contacts: 13.0, shape: 1.5, duration_probs: mixed(), assortativity: 0.5 },
                ContactType { weight: 0.2, mean_contacts: 24.0, shape: 1.0, duration_probs: brief(), assortativity: 0.5 },
            ],
        );
        p.exact_share = 1.0;
        p.interval_share = 0.0;
        p.max_contacts = 50;
        p
    }

    pub fn by_name(name: &str, respondents: usize) -> Option<Self> {
        Some(match name {
            "reopen" => Self::reopen(respondents),
            "lockdown" => Self::lockdown(respondents),
            "partial" => Self::partial(respondents),
            "prepandemic" => Self::prepandemic(respondents),
            _ => return None,
        })
    }
}

fn pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

fn year_in<R: Rng + ?Sized>(g: AgeGroup, rng: &mut R) -> u32 {
    let hi = if g.index() == AGE_GROUPS - 1 { 90 } else { g.upper() };
    rng.random_range(g.lower()..=hi)
}

/// Groups one generation apart (children and parents).
fn generational_partner(a: usize) -> &'static [usize] {
    match a {
        0..=2 => &[4, 5],
        3 => &[6, 7],
        4 | 5 => &[0, 1, 2],
        6 | 7 => &[3, 8],
        _ => &[6, 7],
    }
}

struct Row {
    participant: usize,
    exact: Option<u32>,
    range: Option<(u32, u32)>,
    duration: Option<usize>,
}

fn generate_rows(profile: &SurveyProfile, seed: u64) -> Result<(Vec<u32>, Vec<Row>)> {
    let mut r = rng::stream(seed, &[rng::label(&profile.name)]);
    let type_w: Vec<f64> = profile.types.iter().map(|t| t.weight).collect();
    let mut ages = Vec::with_capacity(profile.respondents);
    let mut rows = Vec::new();
    for p in 0..profile.respondents {
        let a = pick(&profile.respondent_ages, &mut r);
        ages.push(year_in(AgeGroup::ALL[a], &mut r));
        let ty = &profile.types[pick(&type_w, &mut r)];
        let mean = ty.mean_contacts * profile.age_activity[a];
        let gamma = Gamma::new(ty.shape, mean / ty.shape).map_err(|e| Error::InvalidInput(format!("contact type: {e}")))?;
        let rate: f64 = gamma.sample(&mut r);
        let count = if rate > 0.0 { Poisson::new(rate).map(|d| d.sample(&mut r) as u32).unwrap_or(0) } else { 0 };
        for _ in 0..count.min(profile.max_contacts) {
            let u: f64 = r.random();
            let b = if u < ty.assortativity {
                a
            } else if u < ty.assortativity + profile.generational {
                let choices = generational_partner(a);
                choices[r.random_range(0..choices.len())]
            } else {
                pick(&DEFAULT_PROPORTIONS, &mut r)
            };
            let year = year_in(AgeGroup::ALL[b], &mut r);
            let v: f64 = r.random();
            let (exact, range) = if v < profile.exact_share {
                (Some(year), None)
            } else if v < profile.exact_share + (1.0 - profile.exact_share) * profile.interval_share {
                let lo = year.saturating_sub(r.random_range(0..5));
                (None, Some((lo, lo + r.random_range(4..15))))
            } else {
                (None, None)
            };
            let duration = (r.random::<f64>() >= profile.missing_duration_share).then(|| pick(&ty.duration_probs, &mut r));
            rows.push(Row { participant: p, exact, range, duration });
        }
    }
    Ok((ages, rows))
}

fn opt(v: Option<u32>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Write `<dir>/<name>_participants.csv` and `<dir>/<name>_contacts.csv`.
pub fn write_survey(profile: &SurveyProfile, dir: &Path, seed: u64) -> Result<(PathBuf, PathBuf)> {
    let (ages, rows) = generate_rows(profile, seed)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let pp = dir.join(format!("{}_participants.csv", profile.name));
    let cp = dir.join(format!("{}_contacts.csv", profile.name));
    let write = |path: &Path, body: &str| -> Result<()> {
        let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(body.as_bytes()).map_err(|e| Error::io(path, e))
    };
    let mut body = String::from("part_id,part_age\n");
    for (p, age) in ages.iter().enumerate() {
        body.push_str(&format!("p{p},{age}\n"));
    }
    write(&pp, &body)?;
    let mut body = String::from("part_id,cnt_age_exact,cnt_age_est_min,cnt_age_est_max,duration_multi\n");
    for row in &rows {
        let (lo, hi) = row.range.map_or((None, None), |(l, h)| (Some(l), Some(h)));
        let dur = row.duration.map_or_else(|| "NA".to_string(), |d| (d + 1).to_string());
        body.push_str(&format!("p{},{},{},{},{}\n", row.participant, opt(row.exact), opt(lo), opt(hi), dur));
    }
    write(&cp, &body)?;
    Ok((pp, cp))
}
