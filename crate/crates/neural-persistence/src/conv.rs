//! Neural persistence of convolutional filters.
//!
//! A stride-1 convolution of a `p x q` filter over a (zero-padded) input map
//! is a bipartite graph: one output unit per output position, connected to
//! its `p * q` receptive-field inputs with the filter's values. The exact
//! path unrolls that sparse matrix and reuses the dense machinery; the
//! approximate path exploits the fact that every output unit shares the
//! same weight multiset and fills the diagram in closed form from the
//! sorted filter values alone.

use crate::diagram::EssentialPolicy;
use crate::error::{Error, Result};
use crate::filtration::compute_diagram;
use crate::layer::{SparseEntry, WeightedBipartiteLayer};

/// A single convolution filter (row-major `rows x cols` kernel).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvFilter {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
}

impl ConvFilter {
    pub fn new(rows: usize, cols: usize, weights: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("filter dimensions must be at least 1x1"));
        }
        if weights.len() != rows * cols {
            return Err(Error::invalid(format!(
                "expected {} filter values, found {}",
                rows * cols,
                weights.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::invalid(format!("non-finite filter value {w}")));
        }
        Ok(Self { rows, cols, weights })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("filter needs at least one row"));
        }
        let cols = rows[0].len();
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged filter matrix"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn at(&self, r: usize, c: usize) -> f64 {
        self.weights[r * self.cols + c]
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).fold(0.0, f64::max)
    }
}

/// Input-map geometry for a stride-1 convolution with symmetric zero padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub input_height: usize,
    pub input_width: usize,
    pub padding: usize,
}

impl ConvGeometry {
    pub fn new(input_height: usize, input_width: usize, padding: usize) -> Result<Self> {
        if input_height == 0 || input_width == 0 {
            return Err(Error::invalid("input map must be at least 1x1"));
        }
        Ok(Self {
            input_height,
            input_width,
            padding,
        })
    }

    pub fn padded_height(&self) -> usize {
        self.input_height + 2 * self.padding
    }

    pub fn padded_width(&self) -> usize {
        self.input_width + 2 * self.padding
    }

    /// Output map size for the given filter; errors when the filter does
    /// not fit into the padded input.
    pub fn output_dims(&self, filter: &ConvFilter) -> Result<(usize, usize)> {
        let ph = self.padded_height();
        let pw = self.padded_width();
        if filter.rows() > ph || filter.cols() > pw {
            return Err(Error::invalid(format!(
                "{}x{} filter does not fit a padded {}x{} input",
                filter.rows(),
                filter.cols(),
                ph,
                pw
            )));
        }
        Ok((ph - filter.rows() + 1, pw - filter.cols() + 1))
    }

    /// Input neuron count; padded dummy inputs are included.
    pub fn input_count(&self) -> usize {
        self.padded_height() * self.padded_width()
    }

    pub fn output_count(&self, filter: &ConvFilter) -> Result<usize> {
        let (h, w) = self.output_dims(filter)?;
        Ok(h * w)
    }
}

/// Unroll the filter into the sparse bipartite layer of its convolution:
/// one row per output position carrying the `p * q` filter values at the
/// receptive-field offsets.
pub fn unroll_filter(filter: &ConvFilter, geo: &ConvGeometry) -> Result<WeightedBipartiteLayer> {
    let (h_out, w_out) = geo.output_dims(filter)?;
    let padded_w = geo.padded_width();
    let mut entries = Vec::with_capacity(h_out * w_out * filter.rows() * filter.cols());
    for r in 0..h_out {
        for c in 0..w_out {
            let row = (r * w_out + c) as u32;
            for dr in 0..filter.rows() {
                for dc in 0..filter.cols() {
                    let col = ((r + dr) * padded_w + (c + dc)) as u32;
                    entries.push(SparseEntry {
                        row,
                        col,
                        weight: filter.at(dr, dc),
                    });
                }
            }
        }
    }
    WeightedBipartiteLayer::sparse(h_out * w_out, geo.input_count(), entries)
}

/// Exact neural persistence of the unrolled convolution. Weights are
/// transformed by the filter's own largest absolute value, and every
/// surviving component contributes a (1, 0) point, so the diagram always
/// has `input_count + output_count` points.
pub fn conv_np_exact(filter: &ConvFilter, geo: &ConvGeometry, p: f64) -> Result<f64> {
    let global_max = filter.max_abs_weight();
    if global_max == 0.0 {
        return Err(Error::DegenerateNetwork);
    }
    let layer = unroll_filter(filter, geo)?;
    let diagram = compute_diagram(&layer, global_max, EssentialPolicy::DeathZero)?;
    Ok(crate::measures::neural_persistence(&diagram, p)?.value)
}

/// Closed-form approximate diagram of a convolution: the death list of
/// length `input_count + output_count`, containing one 0 for the surviving
/// component, one death per distinct corner value, and the sorted filter
/// values repeated (output_count per value, one less for corners) until the
/// list is full.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvDiagramApprox {
    deaths: Vec<f64>,
}

impl ConvDiagramApprox {
    pub fn compute(filter: &ConvFilter, geo: &ConvGeometry) -> Result<Self> {
        let h_max = filter.max_abs_weight();
        if h_max == 0.0 {
            return Err(Error::DegenerateNetwork);
        }
        let m = geo.input_count();
        let n = geo.output_count(filter)?;
        let tuple_budget = m + n;

        let mut sorted: Vec<f64> = filter.weights().iter().map(|w| w.abs() / h_max).collect();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());

        // Distinct corner values of the transformed filter, first-seen order.
        let (p_rows, q_cols) = (filter.rows(), filter.cols());
        let mut corners: Vec<f64> = Vec::with_capacity(4);
        for (r, c) in [(0, 0), (0, q_cols - 1), (p_rows - 1, 0), (p_rows - 1, q_cols - 1)] {
            let v = filter.at(r, c).abs() / h_max;
            if !corners.iter().any(|&x| x.to_bits() == v.to_bits()) {
                corners.push(v);
            }
        }

        let mut deaths = Vec::with_capacity(tuple_budget);
        deaths.push(0.0);
        deaths.extend_from_slice(&corners);

        let is_corner =
            |w: f64| corners.iter().any(|&c| c.to_bits() == w.to_bits());

        let mut i = 0;
        while deaths.len() < tuple_budget {
            if i >= sorted.len() {
                // Weight list exhausted: fill the remainder with the
                // smallest value so the budget is always met.
                let last = *sorted.last().expect("filter has at least one weight");
                deaths.resize(tuple_budget, last);
                break;
            }
            let w = sorted[i];
            let merges = n - usize::from(is_corner(w));
            if deaths.len() + merges <= tuple_budget {
                deaths.extend(std::iter::repeat_n(w, merges));
                i += 1;
            } else {
                let remaining = tuple_budget - deaths.len();
                deaths.extend(std::iter::repeat_n(w, remaining));
                break;
            }
        }
        debug_assert_eq!(deaths.len(), tuple_budget);
        Ok(Self { deaths })
    }

    pub fn deaths(&self) -> &[f64] {
        &self.deaths
    }

    pub fn len(&self) -> usize {
        self.deaths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.deaths.is_empty()
    }

    /// p-norm of the death list against birth 1.
    pub fn p_norm(&self, p: f64) -> Result<f64> {
        if !p.is_finite() || p < 1.0 {
            return Err(Error::invalid(format!("norm exponent p must be >= 1, got {p}")));
        }
        let sum: f64 = self.deaths.iter().map(|d| crate::measures::pow_p(1.0 - d, p)).sum();
        Ok(crate::measures::root_p(sum, p))
    }
}

/// Approximate neural persistence of a convolution, avoiding the unroll.
pub fn conv_np_approx(filter: &ConvFilter, geo: &ConvGeometry, p: f64) -> Result<f64> {
    ConvDiagramApprox::compute(filter, geo)?.p_norm(p)
}

/// Which computation path to use for per-layer aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvMethod {
    Exact,
    Approx,
}

/// Mean of the per-filter normalized values over a filter bank. Each filter
/// value is divided by `(input_count + output_count - 1)^(1/p)`, mirroring
/// the full-range dense-layer normalization.
pub fn layer_mean_conv_np(
    filters: &[ConvFilter],
    geo: &ConvGeometry,
    p: f64,
    method: ConvMethod,
) -> Result<f64> {
    if filters.is_empty() {
        return Err(Error::invalid("filter bank is empty"));
    }
    let mut sum = 0.0;
    for filter in filters {
        let tuple_budget = geo.input_count() + geo.output_count(filter)?;
        let value = match method {
            ConvMethod::Exact => conv_np_exact(filter, geo, p)?,
            ConvMethod::Approx => conv_np_approx(filter, geo, p)?,
        };
        sum += value / crate::measures::root_p(tuple_budget as f64 - 1.0, p);
    }
    Ok(sum / filters.len() as f64)
}
