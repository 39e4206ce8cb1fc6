//! Gold alignment files with sure and possible link tiers.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{AlignError, Result};

pub type Link = (u32, u32);

/// Reference alignment for one sentence. Indices are 1-based; `sure` is
/// always a subset of `possible`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldAlignment {
    pub sure: std::collections::BTreeSet<Link>,
    pub possible: std::collections::BTreeSet<Link>,
}

impl GoldAlignment {
    pub fn add_sure(&mut self, j: u32, i: u32) {
        self.sure.insert((j, i));
        self.possible.insert((j, i));
    }

    pub fn add_possible(&mut self, j: u32, i: u32) {
        self.possible.insert((j, i));
    }

    /// Source positions covered by a sure link.
    pub fn sure_covers_src(&self, j: u32) -> bool {
        self.sure.iter().any(|&(sj, _)| sj == j)
    }

    /// Source positions covered by any (sure or possible) link.
    pub fn possible_covers_src(&self, j: u32) -> bool {
        self.possible.iter().any(|&(sj, _)| sj == j)
    }

    pub fn possible_covers_tgt(&self, i: u32) -> bool {
        self.possible.iter().any(|&(_, si)| si == i)
    }

    /// Target positions linked to source `j` in the possible tier, ascending.
    pub fn possible_targets_of(&self, j: u32) -> Vec<u32> {
        self.possible
            .iter()
            .filter(|&&(sj, _)| sj == j)
            .map(|&(_, i)| i)
            .collect()
    }
}

/// Gold alignments keyed by 1-based sentence id.
pub type GoldMap = BTreeMap<usize, GoldAlignment>;

/// Parse `snt_id j i flag` lines with flag `S` or `P` and 1-based positions.
/// S links enter both tiers, P links the possible tier only, so an all-S file
/// yields `possible == sure`.
pub fn load_gold(path: &Path) -> Result<GoldMap> {
    let file = File::open(path).map_err(|e| AlignError::io(path, e))?;
    let mut map = GoldMap::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| AlignError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(AlignError::parse(
                path,
                lineno + 1,
                format!("expected `snt_id j i flag`, got {:?}", line),
            ));
        }
        let snt: usize = parts[0]
            .parse()
            .map_err(|_| AlignError::parse(path, lineno + 1, "bad sentence id"))?;
        let j: u32 = parts[1]
            .parse()
            .map_err(|_| AlignError::parse(path, lineno + 1, "bad source index"))?;
        let i: u32 = parts[2]
            .parse()
            .map_err(|_| AlignError::parse(path, lineno + 1, "bad target index"))?;
        if snt == 0 || j == 0 || i == 0 {
            return Err(AlignError::parse(
                path,
                lineno + 1,
                "sentence ids and positions are 1-based",
            ));
        }
        let entry = map.entry(snt).or_default();
        match parts[3] {
            "S" => entry.add_sure(j, i),
            "P" => entry.add_possible(j, i),
            other => {
                return Err(AlignError::parse(
                    path,
                    lineno + 1,
                    format!("flag must be S or P, got {other:?}"),
                ))
            }
        }
    }
    Ok(map)
}

/// Serialize in the same 4-column format `load_gold` reads. Links present in
/// both tiers are written once with flag S.
pub fn write_gold(map: &GoldMap, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| AlignError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (snt, gold) in map {
        for &(j, i) in &gold.sure {
            writeln!(w, "{snt} {j} {i} S").map_err(|e| AlignError::io(path, e))?;
        }
        for &(j, i) in &gold.possible {
            if !gold.sure.contains(&(j, i)) {
                writeln!(w, "{snt} {j} {i} P").map_err(|e| AlignError::io(path, e))?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gold_file(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(f, "{line}").unwrap();
        }
        f.flush().unwrap();
        f
    }

    #[test]
    fn sure_links_enter_both_tiers() {
        let f = gold_file(&["1 1 1 S", "1 2 1 P"]);
        let map = load_gold(f.path()).unwrap();
        let g = &map[&1];
        assert_eq!(g.sure.iter().copied().collect::<Vec<_>>(), vec![(1, 1)]);
        assert_eq!(
            g.possible.iter().copied().collect::<Vec<_>>(),
            vec![(1, 1), (2, 1)]
        );
    }

    #[test]
    fn all_sure_file_has_equal_tiers() {
        let f = gold_file(&["1 1 2 S", "2 3 1 S"]);
        let map = load_gold(f.path()).unwrap();
        for g in map.values() {
            assert_eq!(g.sure, g.possible);
        }
    }

    #[test]
    fn empty_file_gives_empty_map() {
        let f = gold_file(&[]);
        assert!(load_gold(f.path()).unwrap().is_empty());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let f = gold_file(&["1 1 1 S", "1 2 Q"]);
        let err = load_gold(f.path()).unwrap_err();
        assert!(err.to_string().contains(":2:"), "got {err}");
    }

    #[test]
    fn zero_index_is_fatal() {
        let f = gold_file(&["1 0 1 S"]);
        assert!(load_gold(f.path()).is_err());
    }

    #[test]
    fn write_then_load_is_identity() {
        let f = gold_file(&["1 1 1 S", "1 2 1 P", "3 2 2 S", "3 1 4 P"]);
        let map = load_gold(f.path()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("gold.txt");
        write_gold(&map, &out).unwrap();
        let reloaded = load_gold(&out).unwrap();
        assert_eq!(map, reloaded);
    }
}
