//! Age and duration categories shared by every stage of the pipeline.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Number of age groups.
pub const AGE_GROUPS: usize = 9;
/// Number of contact-duration categories.
pub const DURATIONS: usize = 5;
/// Dimension of an ego vector: one cell per (contact age, duration) pair.
pub const CELLS: usize = AGE_GROUPS * DURATIONS;

/// Lower bound (inclusive, years) of each age group.
pub const AGE_LOWER: [u32; AGE_GROUPS] = [0, 5, 12, 18, 30, 40, 50, 60, 70];
/// Upper bound (inclusive, years) of each age group. The last group is open.
pub const AGE_UPPER: [u32; AGE_GROUPS] = [4, 11, 17, 29, 39, 49, 59, 69, u32::MAX];

/// Representative duration of each category in minutes (interval midpoints,
/// with the open 4+ hour category capped at 12 hours).
pub const DURATION_MINUTES: [f64; DURATIONS] = [2.5, 10.0, 37.5, 150.0, 480.0];

/// Representative durations in half-minute units. Integer force-of-infection
/// bookkeeping in the simulator relies on these being exact.
pub const DURATION_HALF_MINUTES: [u64; DURATIONS] = [5, 20, 75, 300, 960];

/// One of the nine age brackets 0-4, 5-11, 12-17, 18-29, 30-39, 40-49, 50-59,
/// 60-69, 70+.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(into = "u8")]
pub struct AgeGroup(u8);

/// Accepts the index as a number, or as a string when used as a map key.
impl<'de> Deserialize<'de> for AgeGroup {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct Visitor;
        impl serde::de::Visitor<'_> for Visitor {
            type Value = AgeGroup;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                write!(f, "an age group index below {AGE_GROUPS}")
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<AgeGroup, E> {
                usize::try_from(v).ok().and_then(AgeGroup::new).ok_or_else(|| E::custom(format!("age group index {v} out of range")))
            }

            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<AgeGroup, E> {
                u64::try_from(v).map_err(|_| E::custom(format!("age group index {v} out of range"))).and_then(|v| self.visit_u64(v))
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<AgeGroup, E> {
                v.parse::<u64>().map_err(|_| E::custom(format!("bad age group `{v}`"))).and_then(|v| self.visit_u64(v))
            }
        }
        d.deserialize_any(Visitor)
    }
}

impl AgeGroup {
    pub const ALL: [AgeGroup; AGE_GROUPS] = [
        AgeGroup(0),
        AgeGroup(1),
        AgeGroup(2),
        AgeGroup(3),
        AgeGroup(4),
        AgeGroup(5),
        AgeGroup(6),
        AgeGroup(7),
        AgeGroup(8),
    ];

    pub fn new(index: usize) -> Option<Self> {
        (index < AGE_GROUPS).then_some(AgeGroup(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Bracket containing an age in whole years.
    pub fn from_years(age: u32) -> Self {
        let idx = AGE_LOWER.iter().rposition(|&lo| age >= lo).unwrap_or(0);
        AgeGroup(idx as u8)
    }

    pub fn lower(self) -> u32 {
        AGE_LOWER[self.index()]
    }

    pub fn upper(self) -> u32 {
        AGE_UPPER[self.index()]
    }

    pub fn label(self) -> &'static str {
        ["0-4", "5-11", "12-17", "18-29", "30-39", "40-49", "50-59", "60-69", "70+"][self.index()]
    }
}

impl TryFrom<u8> for AgeGroup {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        AgeGroup::new(v as usize).ok_or_else(|| format!("age group index {v} out of range"))
    }
}

impl From<AgeGroup> for u8 {
    fn from(a: AgeGroup) -> u8 {
        a.0
    }
}

impl fmt::Display for AgeGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One of the five duration categories 0-5min, 5-15min, 15-60min, 1-4hr, 4+hr.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct DurationCategory(u8);

impl DurationCategory {
    pub const ALL: [DurationCategory; DURATIONS] = [
        DurationCategory(0),
        DurationCategory(1),
        DurationCategory(2),
        DurationCategory(3),
        DurationCategory(4),
    ];
    /// Category assigned to contacts with no recorded duration.
    pub const SHORTEST: DurationCategory = DurationCategory(0);
    pub const LONGEST: DurationCategory = DurationCategory(4);

    pub fn new(index: usize) -> Option<Self> {
        (index < DURATIONS).then_some(DurationCategory(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn minutes(self) -> f64 {
        DURATION_MINUTES[self.index()]
    }

    /// Edge weight `f(tau) / max f`.
    pub fn weight(self) -> f64 {
        DURATION_MINUTES[self.index()] / DURATION_MINUTES[DURATIONS - 1]
    }

    pub fn half_minutes(self) -> u64 {
        DURATION_HALF_MINUTES[self.index()]
    }

    pub fn label(self) -> &'static str {
        ["0-5min", "5-15min", "15-60min", "1-4hr", "4+hr"][self.index()]
    }
}

impl TryFrom<u8> for DurationCategory {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        DurationCategory::new(v as usize).ok_or_else(|| format!("duration index {v} out of range"))
    }
}

impl From<DurationCategory> for u8 {
    fn from(d: DurationCategory) -> u8 {
        d.0
    }
}

impl fmt::Display for DurationCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Flat index of an (age, duration) cell.
#[inline]
pub fn cell(age: AgeGroup, duration: DurationCategory) -> usize {
    age.index() * DURATIONS + duration.index()
}

/// Inverse of [`cell`].
#[inline]
pub fn cell_parts(cell: usize) -> (AgeGroup, DurationCategory) {
    (AgeGroup((cell / DURATIONS) as u8), DurationCategory((cell % DURATIONS) as u8))
}

/// A respondent's contact counts by (contact age, duration).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EgoVector {
    pub owner_age: AgeGroup,
    pub counts: Vec<u32>,
}

impl EgoVector {
    pub fn zeros(owner_age: AgeGroup) -> Self {
        EgoVector { owner_age, counts: vec![0; CELLS] }
    }

    pub fn get(&self, age: AgeGroup, duration: DurationCategory) -> u32 {
        self.counts[cell(age, duration)]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Contacts per contact-age group, summed over durations.
    pub fn by_age(&self) -> [u64; AGE_GROUPS] {
        let mut out = [0u64; AGE_GROUPS];
        for (c, &v) in self.counts.iter().enumerate() {
            out[c / DURATIONS] += v as u64;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn age_groups_round_trip_as_values_and_keys() {
        let map: std::collections::BTreeMap<AgeGroup, u8> = AgeGroup::ALL.iter().map(|a| (*a, a.0)).collect();
        let text = serde_json::to_string(&map).unwrap();
        assert_eq!(serde_json::from_str::<std::collections::BTreeMap<AgeGroup, u8>>(&text).unwrap(), map);
        assert_eq!(serde_json::from_str::<AgeGroup>("3").unwrap(), AgeGroup(3));
        assert!(serde_json::from_str::<AgeGroup>("9").is_err());
        assert!(serde_json::from_str::<AgeGroup>("-1").is_err());
    }

    #[test]
    fn brackets() {
        assert_eq!(AgeGroup::from_years(0).index(), 0);
        assert_eq!(AgeGroup::from_years(4).index(), 0);
        assert_eq!(AgeGroup::from_years(5).index(), 1);
        assert_eq!(AgeGroup::from_years(17).index(), 2);
        assert_eq!(AgeGroup::from_years(35).index(), 4);
        assert_eq!(AgeGroup::from_years(69).index(), 7);
        assert_eq!(AgeGroup::from_years(104).index(), 8);
        for a in AgeGroup::ALL {
            assert_eq!(AgeGroup::from_years(a.lower()), a);
        }
    }

    #[test]
    fn weights() {
        let w: Vec<f64> = DurationCategory::ALL.iter().map(|d| d.weight()).collect();
        assert_eq!(w[4], 1.0);
        assert_eq!(w[3], 0.3125);
        assert_eq!(w[2], 0.078125);
        assert!((w[0] - 2.5 / 480.0).abs() < 1e-15);
        for d in DurationCategory::ALL {
            assert_eq!(d.half_minutes() as f64, d.minutes() * 2.0);
        }
    }

    #[test]
    fn cell_roundtrip() {
        for c in 0..CELLS {
            let (a, d) = cell_parts(c);
            assert_eq!(cell(a, d), c);
        }
    }
}
