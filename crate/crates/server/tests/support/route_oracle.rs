//! Reference resolver: try every registered prefix, keep the longest one
//! that matches on a segment boundary.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;

pub fn oracle_resolve<'a>(table: &'a BTreeMap<String, String>, path: &str) -> Option<&'a str> {
    let mut best: Option<(&str, &str)> = None;
    for (prefix, upstream) in table {
        let matches = path == prefix || (path.starts_with(prefix.as_str()) && path.as_bytes()[prefix.len()] == b'/');
        if matches && best.is_none_or(|(p, _)| prefix.len() > p.len()) {
            best = Some((prefix, upstream));
        }
    }
    best.map(|(_, u)| u)
}

const SEGMENTS: &[&str] = &["notebook", "report", "c1", "c12", "c2", "a", "ab", "v1", "v10", "x.y", "lab"];

pub fn random_prefix<R: Rng>(rng: &mut R) -> String {
    let depth = rng.random_range(1..=3);
    (0..depth).map(|_| format!("/{}", SEGMENTS.choose(rng).unwrap())).collect()
}

/// Paths that often share prefixes with the table, including near misses.
pub fn random_path<R: Rng>(rng: &mut R) -> String {
    let depth = rng.random_range(0..=5);
    let mut p: String = (0..depth).map(|_| format!("/{}", SEGMENTS.choose(rng).unwrap())).collect();
    match rng.random_range(0..6) {
        0 => p.push('/'),
        1 => p.push_str("x"),
        2 if p.is_empty() => p.push('/'),
        _ => {}
    }
    if p.is_empty() {
        p.push('/');
    }
    p
}
