//! Row-compressed boolean matrices over entity indices.
//!
//! Used for relation adjacency and for evaluating closed-path rule bodies as
//! binarized products of adjacency matrices. All entries are implicitly 1;
//! each row stores its set column indices in strictly increasing order.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseBoolMatrix {
    n_rows: usize,
    n_cols: usize,
    rows: Vec<Vec<u32>>,
}

impl SparseBoolMatrix {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            rows: vec![Vec::new(); n_rows],
        }
    }

    /// Builds from (row, col) pairs; duplicates collapse to a single entry.
    pub fn from_entries(n_rows: usize, n_cols: usize, entries: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut m = Self::new(n_rows, n_cols);
        for (r, c) in entries {
            debug_assert!((r as usize) < n_rows && (c as usize) < n_cols);
            m.rows[r as usize].push(c);
        }
        for row in &mut m.rows {
            row.sort_unstable();
            row.dedup();
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i].binary_search(&(j as u32)).is_ok()
    }

    /// Number of set entries.
    pub fn entry_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.iter().all(Vec::is_empty)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::new(self.n_cols, self.n_rows);
        for (i, row) in self.rows.iter().enumerate() {
            for &j in row {
                t.rows[j as usize].push(i as u32);
            }
        }
        // column order of the source guarantees sorted rows in the transpose
        t
    }

    /// Binarized matrix product: entry (i, j) is set iff some k has
    /// self(i, k) and other(k, j). Multiplicities are never tracked.
    pub fn multiply_binarized(&self, other: &Self) -> Self {
        assert_eq!(self.n_cols, other.n_rows, "dimension mismatch");
        let mut out = Self::new(self.n_rows, other.n_cols);
        let mut scratch: Vec<u32> = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            scratch.clear();
            for &k in row {
                scratch.extend_from_slice(&other.rows[k as usize]);
            }
            scratch.sort_unstable();
            scratch.dedup();
            out.rows[i] = scratch.clone();
        }
        out
    }

    /// Count of positions set in both matrices (entrywise AND, then sum).
    pub fn and_count(&self, other: &Self) -> usize {
        assert_eq!(self.n_rows, other.n_rows);
        assert_eq!(self.n_cols, other.n_cols);
        let mut count = 0;
        for (a, b) in self.rows.iter().zip(&other.rows) {
            let (mut i, mut j) = (0, 0);
            while i < a.len() && j < b.len() {
                match a[i].cmp(&b[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        count += 1;
                        i += 1;
                        j += 1;
                    }
                }
            }
        }
        count
    }
}
