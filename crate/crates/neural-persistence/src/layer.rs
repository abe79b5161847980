//! Bipartite layer graphs and whole-network snapshots.
//!
//! A layer is the weighted bipartite graph between two adjacent strata of
//! a feedforward network: `out_count` output units, `in_count` input units,
//! and one weighted edge per stored matrix entry. Dense layers store the
//! full `out_count x in_count` matrix row-major; sparse layers (used for
//! unrolled convolutions) store explicit `(row, col, weight)` entries and
//! treat absent entries as non-edges.

use crate::error::{Error, Result};

/// One edge of a layer graph: output unit `row`, input unit `col`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseEntry {
    pub row: u32,
    pub col: u32,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    /// Row-major `out_count x in_count` matrix; every entry is an edge.
    Dense(Vec<f64>),
    /// Explicit edges with unique (row, col) pairs.
    Sparse(Vec<SparseEntry>),
}

/// One network layer as a weighted bipartite graph.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedBipartiteLayer {
    in_count: usize,
    out_count: usize,
    storage: Storage,
}

impl WeightedBipartiteLayer {
    /// Dense layer from a row-major weight matrix (row = output unit, column = input unit).
    pub fn dense(out_count: usize, in_count: usize, row_major: Vec<f64>) -> Result<Self> {
        if out_count == 0 || in_count == 0 {
            return Err(Error::invalid("layer dimensions must be at least 1x1"));
        }
        if row_major.len() != out_count * in_count {
            return Err(Error::invalid(format!(
                "expected {} weights for a {}x{} layer, found {}",
                out_count * in_count,
                out_count,
                in_count,
                row_major.len()
            )));
        }
        if let Some(w) = row_major.iter().find(|w| !w.is_finite()) {
            return Err(Error::invalid(format!("non-finite weight {w}")));
        }
        Ok(Self {
            in_count,
            out_count,
            storage: Storage::Dense(row_major),
        })
    }

    /// Convenience constructor from nested rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("layer needs at least one row"));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged weight matrix"));
        }
        Self::dense(rows.len(), cols, rows.concat())
    }

    /// Sparse layer; absent (row, col) pairs are non-edges.
    pub fn sparse(out_count: usize, in_count: usize, mut entries: Vec<SparseEntry>) -> Result<Self> {
        if out_count == 0 || in_count == 0 {
            return Err(Error::invalid("layer dimensions must be at least 1x1"));
        }
        for e in &entries {
            if e.row as usize >= out_count || e.col as usize >= in_count {
                return Err(Error::invalid(format!(
                    "sparse entry ({}, {}) outside a {}x{} layer",
                    e.row, e.col, out_count, in_count
                )));
            }
            if !e.weight.is_finite() {
                return Err(Error::invalid(format!("non-finite weight {}", e.weight)));
            }
        }
        entries.sort_by_key(|e| (e.row, e.col));
        if entries.windows(2).any(|w| (w[0].row, w[0].col) == (w[1].row, w[1].col)) {
            return Err(Error::invalid("duplicate (row, col) pair in sparse layer"));
        }
        Ok(Self {
            in_count,
            out_count,
            storage: Storage::Sparse(entries),
        })
    }

    pub fn in_count(&self) -> usize {
        self.in_count
    }

    pub fn out_count(&self) -> usize {
        self.out_count
    }

    /// Total number of vertices (input units plus output units).
    pub fn vertex_count(&self) -> usize {
        self.in_count + self.out_count
    }

    pub fn edge_count(&self) -> usize {
        match &self.storage {
            Storage::Dense(w) => w.len(),
            Storage::Sparse(e) => e.len(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse(_))
    }

    /// Iterate edges as (output unit, input unit, raw weight).
    /// Dense layers yield row-major order; sparse layers yield (row, col) order.
    pub fn edges(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        let dense = match &self.storage {
            Storage::Dense(w) => Some(w),
            Storage::Sparse(_) => None,
        };
        let sparse = match &self.storage {
            Storage::Sparse(e) => Some(e),
            Storage::Dense(_) => None,
        };
        let cols = self.in_count;
        dense
            .into_iter()
            .flat_map(move |w| {
                w.iter()
                    .enumerate()
                    .map(move |(i, &weight)| ((i / cols) as u32, (i % cols) as u32, weight))
            })
            .chain(
                sparse
                    .into_iter()
                    .flat_map(|e| e.iter().map(|e| (e.row, e.col, e.weight))),
            )
    }

    /// Largest absolute weight in the layer.
    pub fn max_abs_weight(&self) -> f64 {
        self.edges().map(|(_, _, w)| w.abs()).fold(0.0, f64::max)
    }

    /// Row-major dense weights, if this layer is dense.
    pub fn dense_weights(&self) -> Option<&[f64]> {
        match &self.storage {
            Storage::Dense(w) => Some(w),
            Storage::Sparse(_) => None,
        }
    }

    /// Sparse entries, if this layer is sparse.
    pub fn sparse_entries(&self) -> Option<&[SparseEntry]> {
        match &self.storage {
            Storage::Sparse(e) => Some(e),
            Storage::Dense(_) => None,
        }
    }

    /// Same layer with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let storage = match &self.storage {
            Storage::Dense(w) => Storage::Dense(w.iter().map(|w| w * factor).collect()),
            Storage::Sparse(e) => Storage::Sparse(
                e.iter()
                    .map(|e| SparseEntry {
                        weight: e.weight * factor,
                        ..*e
                    })
                    .collect(),
            ),
        };
        Self {
            in_count: self.in_count,
            out_count: self.out_count,
            storage,
        }
    }
}

/// An ordered sequence of layers captured at one training step.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSnapshot {
    step: u64,
    layers: Vec<WeightedBipartiteLayer>,
}

impl NetworkSnapshot {
    pub fn new(step: u64, layers: Vec<WeightedBipartiteLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("snapshot needs at least one layer"));
        }
        Ok(Self { step, layers })
    }

    /// Quarter-epoch index at which the snapshot was taken (step 4 = epoch 1.0).
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn layers(&self) -> &[WeightedBipartiteLayer] {
        &self.layers
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    /// Largest absolute weight over the whole network.
    pub fn global_max_abs_weight(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.max_abs_weight())
            .fold(0.0, f64::max)
    }

    /// Check that consecutive layers chain: layer k's input count equals
    /// layer k-1's output count. Arbitrary layer collections skip this.
    pub fn is_strict_network(&self) -> bool {
        self.layers
            .windows(2)
            .all(|w| w[1].in_count() == w[0].out_count())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_rejects_bad_shapes() {
        assert!(WeightedBipartiteLayer::dense(0, 2, vec![]).is_err());
        assert!(WeightedBipartiteLayer::dense(2, 2, vec![1.0; 3]).is_err());
        assert!(WeightedBipartiteLayer::dense(1, 2, vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn sparse_rejects_duplicates_and_bad_indices() {
        let dup = vec![
            SparseEntry { row: 0, col: 0, weight: 1.0 },
            SparseEntry { row: 0, col: 0, weight: 2.0 },
        ];
        assert!(WeightedBipartiteLayer::sparse(2, 2, dup).is_err());
        let oob = vec![SparseEntry { row: 2, col: 0, weight: 1.0 }];
        assert!(WeightedBipartiteLayer::sparse(2, 2, oob).is_err());
    }

    #[test]
    fn dense_edges_are_row_major() {
        let layer = WeightedBipartiteLayer::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let edges: Vec<_> = layer.edges().collect();
        assert_eq!(
            edges,
            vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 3.0), (1, 1, 4.0)]
        );
        assert_eq!(layer.vertex_count(), 4);
        assert_eq!(layer.max_abs_weight(), 4.0);
    }

    #[test]
    fn snapshot_global_max_spans_layers() {
        let a = WeightedBipartiteLayer::from_rows(&[vec![1.0, -0.5]]).unwrap();
        let b = WeightedBipartiteLayer::from_rows(&[vec![-3.0], vec![2.0]]).unwrap();
        let snap = NetworkSnapshot::new(0, vec![a, b]).unwrap();
        assert_eq!(snap.global_max_abs_weight(), 3.0);
        assert!(snap.is_strict_network());
    }
}
