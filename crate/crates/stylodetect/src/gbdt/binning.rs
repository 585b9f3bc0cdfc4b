//! Histogram binning for split finding.
//!
//! Per feature, the distinct observed nonzero values are partitioned into
//! near-equal groups whose maxima become ascending bin upper bounds; 0.0
//! always gets its own dedicated bin (index 0, the sparse default). A
//! value maps to the first bin whose upper bound is ≥ the value; values
//! above the last bound clamp into the last bin.

use crate::vectorize::FeatureMatrix;

/// Ascending, deduplicated bin upper bounds for one feature. The first
/// bound is always 0.0.
#[derive(Debug, Clone, PartialEq)]
pub struct BinMap {
    bounds: Vec<f64>,
}

impl BinMap {
    /// Build from raw bounds (used by model loading). Requires ascending
    /// order starting at 0.0.
    pub fn from_bounds(bounds: Vec<f64>) -> BinMap {
        debug_assert!(!bounds.is_empty() && bounds[0] == 0.0);
        debug_assert!(bounds.windows(2).all(|w| w[0] < w[1]));
        BinMap { bounds }
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    /// Number of bins for this feature.
    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        false // there is always the zero bin
    }

    /// Bin id of a value: index of the first upper bound ≥ the value,
    /// clamped into the last bin.
    pub fn bin_of(&self, value: f64) -> u8 {
        let idx = self.bounds.partition_point(|&b| b < value);
        idx.min(self.bounds.len() - 1) as u8
    }
}

/// Quantile-partition each feature's distinct observed values into at most
/// `max_bins` bins (including the dedicated zero bin).
pub fn build_bins(matrix: &FeatureMatrix, max_bins: usize) -> Vec<BinMap> {
    assert!(max_bins >= 2, "need at least the zero bin and one value bin");
    let n_features = matrix.dimension();
    let mut per_feature: Vec<Vec<f64>> = vec![Vec::new(); n_features];
    for row in matrix.rows() {
        for &(f, v) in row.vector.entries() {
            per_feature[f].push(v);
        }
    }
    per_feature
        .into_iter()
        .map(|mut values| {
            values.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            values.dedup();
            let mut bounds = Vec::with_capacity(values.len().min(max_bins - 1) + 1);
            bounds.push(0.0);
            let m = values.len();
            let groups = max_bins - 1;
            if m <= groups {
                bounds.extend(values);
            } else {
                // Even partition: group j covers values[(j-1)m/B .. jm/B)
                // so group sizes differ by at most one.
                for j in 1..=groups {
                    let end = j * m / groups;
                    let start = (j - 1) * m / groups;
                    if end > start {
                        bounds.push(values[end - 1]);
                    }
                }
            }
            BinMap::from_bounds(bounds)
        })
        .collect()
}

/// Row-major CSR view of the matrix with values replaced by bin ids.
/// Zero cells are implicit (bin 0).
#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    n_rows: usize,
    n_features: usize,
    row_ptr: Vec<u32>,
    col_idx: Vec<u32>,
    bin_ids: Vec<u8>,
    bins_per_feature: Vec<u32>,
}

impl BinnedMatrix {
    pub fn from_matrix(matrix: &FeatureMatrix, bins: &[BinMap]) -> BinnedMatrix {
        assert_eq!(matrix.dimension(), bins.len());
        let n_rows = matrix.len();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::new();
        let mut bin_ids = Vec::new();
        row_ptr.push(0u32);
        for row in matrix.rows() {
            for &(f, v) in row.vector.entries() {
                let b = bins[f].bin_of(v);
                // A nonzero value never lands in the zero bin, but a value
                // may round into it only if it is ≤ 0, which vector
                // invariants exclude.
                col_idx.push(f as u32);
                bin_ids.push(b);
            }
            row_ptr.push(col_idx.len() as u32);
        }
        BinnedMatrix {
            n_rows,
            n_features: bins.len(),
            row_ptr,
            col_idx,
            bin_ids,
            bins_per_feature: bins.iter().map(|b| b.len() as u32).collect(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn bins_per_feature(&self) -> &[u32] {
        &self.bins_per_feature
    }

    /// Nonzero (feature, bin) pairs of one row, feature-sorted.
    pub fn row(&self, r: usize) -> (&[u32], &[u8]) {
        let lo = self.row_ptr[r] as usize;
        let hi = self.row_ptr[r + 1] as usize;
        (&self.col_idx[lo..hi], &self.bin_ids[lo..hi])
    }

    /// Bin id of one cell (0 when the cell is zero).
    pub fn bin_of(&self, r: usize, feature: u32) -> u8 {
        let (cols, bins) = self.row(r);
        match cols.binary_search(&feature) {
            Ok(pos) => bins[pos],
            Err(_) => 0,
        }
    }
}
