//! Survey ingest: participant and contact tables to ego vectors.
//!
//! Tables follow the socialcontactdata.org layout (one participant table,
//! one contact table keyed by participant id). Contact ages may be exact,
//! an estimated interval, or missing; intervals that straddle several age
//! groups, and missing ages, are resolved against a mixing prior built from
//! the unambiguous contacts first.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{cell, AgeGroup, DurationCategory, EgoVector, AGE_GROUPS, DURATIONS};

/// Oldest age used to close an interval with a missing upper bound.
pub const MAX_AGE: u32 = 120;

/// Column names for the two survey tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub participant_id: String,
    pub participant_age: String,
    pub contact_participant_id: String,
    pub contact_age_exact: String,
    pub contact_age_min: String,
    pub contact_age_max: String,
    pub duration: String,
    /// Code used in the duration column for each category, shortest first.
    pub duration_codes: [i64; DURATIONS],
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            participant_id: "part_id".into(),
            participant_age: "part_age".into(),
            contact_participant_id: "part_id".into(),
            contact_age_exact: "cnt_age_exact".into(),
            contact_age_min: "cnt_age_est_min".into(),
            contact_age_max: "cnt_age_est_max".into(),
            duration: "duration_multi".into(),
            duration_codes: [1, 2, 3, 4, 5],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestOptions {
    pub columns: ColumnMap,
    pub delimiter: char,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { columns: ColumnMap::default(), delimiter: ',' }
    }
}

/// One reported contact before age resolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawContact {
    /// Inclusive age interval in years, `None` when not reported.
    pub age: Option<(u32, u32)>,
    pub duration: DurationCategory,
}

impl RawContact {
    pub fn exact(age: u32, duration: DurationCategory) -> Self {
        RawContact { age: Some((age, age)), duration }
    }

    /// Age groups intersecting the reported interval; all groups when the
    /// age is missing.
    pub fn admissible(&self) -> Vec<AgeGroup> {
        match self.age {
            None => AgeGroup::ALL.to_vec(),
            Some((lo, hi)) => AgeGroup::ALL
                .iter()
                .copied()
                .filter(|g| g.lower() <= hi && g.upper() >= lo)
                .collect(),
        }
    }

    /// The single age group this contact falls in, if unambiguous.
    pub fn unambiguous(&self) -> Option<AgeGroup> {
        let (lo, hi) = self.age?;
        let g = AgeGroup::from_years(lo);
        (AgeGroup::from_years(hi) == g).then_some(g)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EgoRecord {
    pub participant_id: String,
    pub participant_age: AgeGroup,
    pub contacts: Vec<RawContact>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub participants_read: usize,
    pub participants_missing_age: usize,
    pub contacts_read: usize,
    pub contacts_unmatched: usize,
    pub contacts_of_rejected_participants: usize,
    pub contacts_bad_duration: usize,
    pub durations_imputed: usize,
    pub contacts_retained: usize,
    pub ages_unambiguous: usize,
    pub ages_from_prior: usize,
    pub ages_missing: usize,
    pub ages_uniform_fallback: usize,
    /// Prior rows with no unambiguous contacts, replaced by the pooled row.
    pub prior_rows_pooled: Vec<AgeGroup>,
}

fn is_missing(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan") || t.eq_ignore_ascii_case("null")
}

fn parse_years(s: &str) -> Option<u32> {
    let v: f64 = s.trim().parse().ok()?;
    (v.is_finite() && v >= 0.0).then(|| v.floor() as u32)
}

/// Participant age: a number of years, or a `lo-hi` range inside one group.
fn parse_participant_age(s: &str) -> Option<AgeGroup> {
    if is_missing(s) {
        return None;
    }
    if let Some(y) = parse_years(s) {
        return Some(AgeGroup::from_years(y));
    }
    let (lo, hi) = s.trim().split_once('-')?;
    let (lo, hi) = (parse_years(lo)?, parse_years(hi)?);
    let g = AgeGroup::from_years(lo);
    (lo <= hi && AgeGroup::from_years(hi) == g).then_some(g)
}

struct Columns {
    index: HashMap<String, usize>,
    table: &'static str,
}

impl Columns {
    fn new(headers: &csv::StringRecord, table: &'static str) -> Self {
        let index = headers.iter().enumerate().map(|(i, h)| (h.trim().to_string(), i)).collect();
        Columns { index, table }
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.index.get(name).copied().ok_or_else(|| Error::MissingColumn {
            table: self.table,
            column: name.to_string(),
        })
    }

    fn optional(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }
}

fn reader<R: Read>(source: R, delimiter: char) -> Result<csv::Reader<R>> {
    if !delimiter.is_ascii() {
        return Err(Error::InvalidInput(format!("delimiter {delimiter:?} is not ASCII")));
    }
    Ok(csv::ReaderBuilder::new()
        .delimiter(delimiter as u8)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(source))
}

/// Parse the participant and contact tables into one record per participant
/// with a known age.
///
/// Participants with a missing (or multi-group) age are rejected and their
/// contacts dropped; contacts referencing unknown participants are dropped.
/// Both are counted in the report. Unparseable values are hard errors.
pub fn parse_survey<P: Read, C: Read>(
    participants: P,
    contacts: C,
    options: &IngestOptions,
) -> Result<(Vec<EgoRecord>, IngestReport)> {
    let cols = &options.columns;
    let mut report = IngestReport::default();

    let mut rdr = reader(participants, options.delimiter)?;
    let pcols = Columns::new(rdr.headers()?, "participants");
    let id_col = pcols.require(&cols.participant_id)?;
    let age_col = pcols.require(&cols.participant_age)?;

    let mut records: Vec<EgoRecord> = Vec::new();
    let mut by_id: HashMap<String, Option<usize>> = HashMap::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        report.participants_read += 1;
        let id = rec.get(id_col).unwrap_or("").to_string();
        if is_missing(&id) {
            return Err(Error::MalformedRow { table: "participants", row, message: "missing participant id".into() });
        }
        if by_id.contains_key(&id) {
            return Err(Error::MalformedRow { table: "participants", row, message: format!("duplicate participant id `{id}`") });
        }
        let raw_age = rec.get(age_col).unwrap_or("");
        match parse_participant_age(raw_age) {
            Some(age) => {
                by_id.insert(id.clone(), Some(records.len()));
                records.push(EgoRecord { participant_id: id, participant_age: age, contacts: Vec::new() });
            }
            None if is_missing(raw_age) || raw_age.contains('-') => {
                report.participants_missing_age += 1;
                by_id.insert(id, None);
            }
            None => {
                return Err(Error::MalformedRow {
                    table: "participants",
                    row,
                    message: format!("unparseable participant age `{raw_age}`"),
                })
            }
        }
    }

    let mut rdr = reader(contacts, options.delimiter)?;
    let ccols = Columns::new(rdr.headers()?, "contacts");
    let cid_col = ccols.require(&cols.contact_participant_id)?;
    let exact_col = ccols.optional(&cols.contact_age_exact);
    let min_col = ccols.optional(&cols.contact_age_min);
    let max_col = ccols.optional(&cols.contact_age_max);
    if exact_col.is_none() && min_col.is_none() && max_col.is_none() {
        return Err(Error::MissingColumn { table: "contacts", column: cols.contact_age_exact.clone() });
    }
    let dur_col = ccols.require(&cols.duration)?;

    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        report.contacts_read += 1;
        let field = |c: Option<usize>| c.and_then(|c| rec.get(c)).filter(|s| !is_missing(s));
        let years = |c: Option<usize>, what: &str| -> Result<Option<u32>> {
            match field(c) {
                None => Ok(None),
                Some(s) => parse_years(s).map(Some).ok_or_else(|| Error::MalformedRow {
                    table: "contacts",
                    row,
                    message: format!("unparseable {what} `{s}`"),
                }),
            }
        };

        let exact = years(exact_col, "exact age")?;
        let lo = years(min_col, "minimum age")?;
        let hi = years(max_col, "maximum age")?;
        let age = match (exact, lo, hi) {
            (Some(x), _, _) => Some((x, x)),
            (None, None, None) => None,
            (None, lo, hi) => {
                let (lo, hi) = (lo.unwrap_or(0), hi.unwrap_or(MAX_AGE));
                if lo > hi {
                    return Err(Error::MalformedRow {
                        table: "contacts",
                        row,
                        message: format!("age interval [{lo}, {hi}] is reversed"),
                    });
                }
                Some((lo, hi))
            }
        };

        let duration = match field(Some(dur_col)) {
            None => {
                report.durations_imputed += 1;
                DurationCategory::SHORTEST
            }
            Some(s) => {
                let code: Option<i64> = s.parse::<f64>().ok().filter(|v| v.fract() == 0.0).map(|v| v as i64);
                match code.and_then(|c| cols.duration_codes.iter().position(|&k| k == c)) {
                    Some(i) => DurationCategory::new(i).expect("position within DURATIONS"),
                    None => {
                        report.contacts_bad_duration += 1;
                        continue;
                    }
                }
            }
        };

        let pid = rec.get(cid_col).unwrap_or("");
        match by_id.get(pid) {
            None => report.contacts_unmatched += 1,
            Some(None) => report.contacts_of_rejected_participants += 1,
            Some(Some(idx)) => {
                records[*idx].contacts.push(RawContact { age, duration });
                report.contacts_retained += 1;
            }
        }
    }

    Ok((records, report))
}

/// [`parse_survey`] over two files.
pub fn read_survey(participants: &Path, contacts: &Path, options: &IngestOptions) -> Result<(Vec<EgoRecord>, IngestReport)> {
    let p = std::fs::File::open(participants).map_err(|e| Error::io(participants, e))?;
    let c = std::fs::File::open(contacts).map_err(|e| Error::io(contacts, e))?;
    parse_survey(std::io::BufReader::new(p), std::io::BufReader::new(c), options)
}

/// Row `a` is the distribution of contact ages reported by participants in
/// age group `a`, estimated from unambiguous contacts only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingPrior {
    pub rows: [[f64; AGE_GROUPS]; AGE_GROUPS],
    /// Rows that had no data and were replaced with the pooled distribution.
    pub pooled_rows: Vec<AgeGroup>,
}

impl MixingPrior {
    pub fn uniform() -> Self {
        MixingPrior { rows: [[1.0 / AGE_GROUPS as f64; AGE_GROUPS]; AGE_GROUPS], pooled_rows: Vec::new() }
    }

    pub fn from_records(records: &[EgoRecord]) -> Self {
        let mut counts = [[0u64; AGE_GROUPS]; AGE_GROUPS];
        for r in records {
            for c in &r.contacts {
                if let Some(g) = c.unambiguous() {
                    counts[r.participant_age.index()][g.index()] += 1;
                }
            }
        }
        let mut pooled = [0u64; AGE_GROUPS];
        for row in &counts {
            for (p, &v) in pooled.iter_mut().zip(row) {
                *p += v;
            }
        }
        let normalise = |row: &[u64; AGE_GROUPS]| -> Option<[f64; AGE_GROUPS]> {
            let total: u64 = row.iter().sum();
            (total > 0).then(|| std::array::from_fn(|b| row[b] as f64 / total as f64))
        };
        let pooled_row = normalise(&pooled).unwrap_or([1.0 / AGE_GROUPS as f64; AGE_GROUPS]);
        let mut rows = [[0.0; AGE_GROUPS]; AGE_GROUPS];
        let mut pooled_rows = Vec::new();
        for a in AgeGroup::ALL {
            rows[a.index()] = match normalise(&counts[a.index()]) {
                Some(r) => r,
                None => {
                    pooled_rows.push(a);
                    pooled_row
                }
            };
        }
        MixingPrior { rows, pooled_rows }
    }

    pub fn row(&self, a: AgeGroup) -> &[f64; AGE_GROUPS] {
        &self.rows[a.index()]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResolutionKind {
    /// Interval inside a single age group.
    Unambiguous,
    /// Drawn from the prior restricted to the intersecting groups.
    Prior,
    /// Age missing; drawn from the full prior row.
    Missing,
    /// Prior had no mass on the admissible groups; drawn uniformly.
    UniformFallback,
}

/// Assign a contact to an age group.
///
/// Intervals inside one group map there directly. Otherwise the group is drawn
/// with probability proportional to the participant's prior row restricted to
/// the groups the interval intersects.
pub fn resolve_contact_age<R: Rng + ?Sized>(
    contact: &RawContact,
    prior: &MixingPrior,
    participant_age: AgeGroup,
    rng: &mut R,
) -> (AgeGroup, ResolutionKind) {
    if let Some(g) = contact.unambiguous() {
        return (g, ResolutionKind::Unambiguous);
    }
    let admissible = contact.admissible();
    let row = prior.row(participant_age);
    let total: f64 = admissible.iter().map(|g| row[g.index()]).sum();
    if total <= 0.0 {
        let g = admissible[rng.random_range(0..admissible.len())];
        return (g, ResolutionKind::UniformFallback);
    }
    let kind = if contact.age.is_none() { ResolutionKind::Missing } else { ResolutionKind::Prior };
    let mut u = rng.random::<f64>() * total;
    for &g in &admissible {
        let w = row[g.index()];
        if u < w {
            return (g, kind);
        }
        u -= w;
    }
    // Rounding left `u` past the last positive weight.
    let g = *admissible.iter().rev().find(|g| row[g.index()] > 0.0).expect("total > 0");
    (g, kind)
}

/// Resolve every contact and accumulate the 45-cell count vectors.
pub fn build_ego_vectors<R: Rng + ?Sized>(
    records: &[EgoRecord],
    prior: &MixingPrior,
    rng: &mut R,
    report: &mut IngestReport,
) -> Vec<EgoVector> {
    records
        .iter()
        .map(|r| {
            let mut v = EgoVector::zeros(r.participant_age);
            for c in &r.contacts {
                let (age, kind) = resolve_contact_age(c, prior, r.participant_age, rng);
                match kind {
                    ResolutionKind::Unambiguous => report.ages_unambiguous += 1,
                    ResolutionKind::Prior => report.ages_from_prior += 1,
                    ResolutionKind::Missing => report.ages_missing += 1,
                    ResolutionKind::UniformFallback => report.ages_uniform_fallback += 1,
                }
                v.counts[cell(age, c.duration)] += 1;
            }
            v
        })
        .collect()
}

/// Two-pass ingest: prior from the unambiguous contacts, then resolution.
pub fn ego_vectors<R: Rng + ?Sized>(records: &[EgoRecord], rng: &mut R, report: &mut IngestReport) -> (Vec<EgoVector>, MixingPrior) {
    let prior = MixingPrior::from_records(records);
    report.prior_rows_pooled = prior.pooled_rows.clone();
    let vectors = build_ego_vectors(records, &prior, rng, report);
    (vectors, prior)
}
