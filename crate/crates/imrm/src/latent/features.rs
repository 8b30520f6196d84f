//! Binary vertex-by-feature assignment matrix with a dynamic number of
//! columns, stored sparsely in both directions (rows and columns).

use std::collections::BTreeMap;

/// N x K binary matrix. Rows are per-vertex sorted feature lists and
/// columns are per-feature sorted member lists; the two views are kept
/// in lock step. Columns may be empty transiently (during Gibbs flips
/// and structural moves); drivers prune them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMatrix {
    n: usize,
    rows: Vec<Vec<u32>>,
    members: Vec<Vec<u32>>,
}

impl FeatureMatrix {
    pub fn empty(n: usize) -> FeatureMatrix {
        FeatureMatrix {
            n,
            rows: vec![Vec::new(); n],
            members: Vec::new(),
        }
    }

    /// Build from per-vertex feature lists (used by tests and generators).
    pub fn from_rows(n: usize, k: usize, rows: &[Vec<u32>]) -> FeatureMatrix {
        assert_eq!(rows.len(), n);
        let mut z = FeatureMatrix::empty(n);
        for _ in 0..k {
            z.push_column();
        }
        for (i, row) in rows.iter().enumerate() {
            for &f in row {
                z.set(i, f as usize);
            }
        }
        z
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.members.len()
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.rows[i]
    }

    pub fn members(&self, k: usize) -> &[u32] {
        &self.members[k]
    }

    pub fn m(&self, k: usize) -> usize {
        self.members[k].len()
    }

    pub fn total_ones(&self) -> usize {
        self.members.iter().map(|m| m.len()).sum()
    }

    pub fn has(&self, i: usize, k: usize) -> bool {
        self.rows[i].binary_search(&(k as u32)).is_ok()
    }

    /// Set z_ik = 1. Panics if already set.
    pub fn set(&mut self, i: usize, k: usize) {
        let pos = self.rows[i].binary_search(&(k as u32)).unwrap_err();
        self.rows[i].insert(pos, k as u32);
        let pos = self.members[k].binary_search(&(i as u32)).unwrap_err();
        self.members[k].insert(pos, i as u32);
    }

    /// Set z_ik = 0. Panics if not set.
    pub fn unset(&mut self, i: usize, k: usize) {
        let pos = self.rows[i].binary_search(&(k as u32)).unwrap();
        self.rows[i].remove(pos);
        let pos = self.members[k].binary_search(&(i as u32)).unwrap();
        self.members[k].remove(pos);
    }

    /// Append an empty column, returning its index.
    pub fn push_column(&mut self) -> usize {
        self.members.push(Vec::new());
        self.members.len() - 1
    }

    /// Remove column k, which must be empty; higher columns shift down.
    pub fn remove_column(&mut self, k: usize) {
        assert!(self.members[k].is_empty(), "removed column must be empty");
        self.members.remove(k);
        let k = k as u32;
        for row in &mut self.rows {
            for f in row.iter_mut() {
                if *f > k {
                    *f -= 1;
                }
            }
        }
    }

    /// Insert an empty column at index k (inverse of `remove_column`).
    pub fn insert_empty_column(&mut self, k: usize) {
        self.members.insert(k, Vec::new());
        let k = k as u32;
        for row in &mut self.rows {
            for f in row.iter_mut() {
                if *f >= k {
                    *f += 1;
                }
            }
        }
    }

    /// Sizes of the groups of identical columns (the K_h counts).
    pub fn column_group_sizes(&self) -> Vec<usize> {
        let mut groups: BTreeMap<&[u32], usize> = BTreeMap::new();
        for m in &self.members {
            *groups.entry(m.as_slice()).or_insert(0) += 1;
        }
        groups.into_values().collect()
    }

    /// Number of columns other than `k` whose member set equals `pattern`.
    pub fn count_matching_excluding(&self, k: usize, pattern: &[u32]) -> usize {
        self.members
            .iter()
            .enumerate()
            .filter(|&(c, m)| c != k && m.as_slice() == pattern)
            .count()
    }

    /// Partition of vertices by distinct rows, labels in first-appearance
    /// order. Vertices with identical feature sets share a class.
    pub fn row_partition(&self) -> Vec<usize> {
        let mut seen: BTreeMap<&[u32], usize> = BTreeMap::new();
        let mut out = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let next = seen.len();
            let id = *seen.entry(self.rows[i].as_slice()).or_insert(next);
            out.push(id);
        }
        out
    }
}
