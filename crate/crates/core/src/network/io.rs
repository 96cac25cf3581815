//! Plain-text network files.
//!
//! A network with stem `s` is stored as `s.edges` (one `i j duration weight`
//! line per edge) and `s.ages` (one age-group index per node, in node order).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::graph::{ContactNetwork, Edge};
use crate::error::{Error, Result};
use crate::types::{AgeGroup, DurationCategory};

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn edges_path(stem: &Path) -> PathBuf {
    with_ext(stem, "edges")
}

pub fn ages_path(stem: &Path) -> PathBuf {
    with_ext(stem, "ages")
}

pub fn write_network(network: &ContactNetwork, stem: &Path) -> Result<()> {
    let path = edges_path(stem);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    for e in network.edges() {
        writeln!(w, "{} {} {} {}", e.i, e.j, e.duration.index(), e.weight).map_err(|e| Error::io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = ages_path(stem);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    for a in network.ages() {
        writeln!(w, "{}", a.index()).map_err(|e| Error::io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

fn malformed(table: &'static str, row: usize, message: impl Into<String>) -> Error {
    Error::MalformedRow { table, row, message: message.into() }
}

pub fn read_network(stem: &Path) -> Result<ContactNetwork> {
    let path = ages_path(stem);
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut ages = Vec::new();
    for (row, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let a = line.trim().parse::<usize>().ok().and_then(AgeGroup::new).ok_or_else(|| malformed("ages", row + 1, "bad age group"))?;
        ages.push(a);
    }
    let path = edges_path(stem);
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut edges = Vec::new();
    for (row, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&path, e))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.is_empty() {
            continue;
        }
        if f.len() != 4 {
            return Err(malformed("edges", row + 1, "expected `i j duration weight`"));
        }
        let bad = |what: &str| malformed("edges", row + 1, format!("bad {what}"));
        let i = f[0].parse::<u32>().map_err(|_| bad("node"))?;
        let j = f[1].parse::<u32>().map_err(|_| bad("node"))?;
        let duration = f[2].parse::<usize>().ok().and_then(DurationCategory::new).ok_or_else(|| bad("duration"))?;
        let weight = f[3].parse::<f64>().map_err(|_| bad("weight"))?;
        edges.push(Edge { i, j, duration, weight });
    }
    ContactNetwork::new(ages, edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("net");
        let ages = vec![AgeGroup::ALL[0], AgeGroup::ALL[8], AgeGroup::ALL[3]];
        let g = ContactNetwork::new(ages, vec![Edge::new(0, 1, DurationCategory::ALL[1]), Edge::new(2, 1, DurationCategory::LONGEST)]).unwrap();
        write_network(&g, &stem).unwrap();
        assert_eq!(read_network(&stem).unwrap(), g);
        let text = std::fs::read_to_string(edges_path(&stem)).unwrap();
        assert_eq!(text, "0 1 1 0.020833333333333332\n2 1 4 1\n");
    }
}
