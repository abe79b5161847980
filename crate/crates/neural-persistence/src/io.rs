//! Versioned file formats: JSON weight snapshots and CSV metric traces.
//!
//! Snapshots (`np-snapshot-v1`) hold the step index and an ordered list of
//! layers, either dense (`rows`, `cols`, row-major `values`) or sparse
//! (`rows`, `cols`, `entries` of `[row, col, weight]` triplets). Floats are
//! written in shortest round-trip form, so `load(save(x)) == x` bit-exactly
//! for finite doubles. Traces are `step,metric_name,value` CSV rows with a
//! mandatory header and a fixed metric vocabulary. All writes go through a
//! temp file plus rename.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::earlystop::{Direction, MetricTrace};
use crate::error::{Error, Result};
use crate::layer::{NetworkSnapshot, SparseEntry, WeightedBipartiteLayer};

pub const SNAPSHOT_FORMAT_TAG: &str = "np-snapshot-v1";

/// The metric names a trace file may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MetricName {
    NpMeanNormalized,
    ValLoss,
    TestAccuracy,
    TrainLoss,
    WeightPnorm,
}

impl MetricName {
    pub const ALL: [MetricName; 5] = [
        MetricName::NpMeanNormalized,
        MetricName::ValLoss,
        MetricName::TestAccuracy,
        MetricName::TrainLoss,
        MetricName::WeightPnorm,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MetricName::NpMeanNormalized => "np_mean_normalized",
            MetricName::ValLoss => "val_loss",
            MetricName::TestAccuracy => "test_accuracy",
            MetricName::TrainLoss => "train_loss",
            MetricName::WeightPnorm => "weight_pnorm",
        }
    }

    /// The direction in which the metric improves.
    pub fn direction(&self) -> Direction {
        match self {
            MetricName::NpMeanNormalized | MetricName::TestAccuracy | MetricName::WeightPnorm => {
                Direction::Maximize
            }
            MetricName::ValLoss | MetricName::TrainLoss => Direction::Minimize,
        }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricName::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown metric name {s:?}")))
    }
}

#[derive(Serialize, Deserialize)]
struct SnapshotRepr {
    format: String,
    step: u64,
    layers: Vec<LayerRepr>,
}

#[derive(Serialize, Deserialize)]
struct LayerRepr {
    rows: usize,
    cols: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    entries: Option<Vec<(u32, u32, f64)>>,
}

/// Write a whole file atomically: temp file in the same directory, fsync,
/// rename over the destination.
pub fn write_text_atomic(path: impl AsRef<Path>, contents: &str) -> Result<()> {
    write_atomic(path.as_ref(), contents.as_bytes())
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp = path.with_extension("tmp-write");
    {
        let mut file = std::fs::File::create(&tmp)?;
        file.write_all(contents)?;
        file.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    if let Some(dir) = dir {
        // Renames are only durable once the directory entry is flushed.
        if let Ok(d) = std::fs::File::open(dir) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}

/// Serialize a snapshot to JSON on disk (atomic write).
pub fn save_snapshot(snapshot: &NetworkSnapshot, path: impl AsRef<Path>) -> Result<()> {
    let repr = SnapshotRepr {
        format: SNAPSHOT_FORMAT_TAG.to_string(),
        step: snapshot.step(),
        layers: snapshot
            .layers()
            .iter()
            .map(|layer| LayerRepr {
                rows: layer.out_count(),
                cols: layer.in_count(),
                values: layer.dense_weights().map(<[f64]>::to_vec),
                entries: layer
                    .sparse_entries()
                    .map(|e| e.iter().map(|e| (e.row, e.col, e.weight)).collect()),
            })
            .collect(),
    };
    let json = serde_json::to_string(&repr).expect("snapshot serialization cannot fail");
    write_atomic(path.as_ref(), json.as_bytes())
}

/// Load a snapshot, validating the format tag, dimensions, and finiteness.
pub fn load_snapshot(path: impl AsRef<Path>) -> Result<NetworkSnapshot> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let contents = std::fs::read_to_string(path)?;
    let repr: SnapshotRepr = serde_json::from_str(&contents).map_err(|e| {
        Error::parse(
            &display,
            format!("invalid JSON at line {}, column {}: {e}", e.line(), e.column()),
        )
    })?;
    if repr.format != SNAPSHOT_FORMAT_TAG {
        return Err(Error::parse(
            &display,
            format!("format tag {:?} is not {SNAPSHOT_FORMAT_TAG:?}", repr.format),
        ));
    }
    let mut layers = Vec::with_capacity(repr.layers.len());
    for (idx, layer) in repr.layers.into_iter().enumerate() {
        let built = match (layer.values, layer.entries) {
            (Some(values), None) => {
                if values.len() != layer.rows * layer.cols {
                    return Err(Error::parse(
                        &display,
                        format!(
                            "layer {idx}: expected {} values for a {}x{} matrix, found {}",
                            layer.rows * layer.cols,
                            layer.rows,
                            layer.cols,
                            values.len()
                        ),
                    ));
                }
                if let Some(w) = values.iter().find(|w| !w.is_finite()) {
                    return Err(Error::parse(&display, format!("layer {idx}: non-finite value {w}")));
                }
                WeightedBipartiteLayer::dense(layer.rows, layer.cols, values)
            }
            (None, Some(entries)) => {
                if let Some((_, _, w)) = entries.iter().find(|(_, _, w)| !w.is_finite()) {
                    return Err(Error::parse(&display, format!("layer {idx}: non-finite value {w}")));
                }
                WeightedBipartiteLayer::sparse(
                    layer.rows,
                    layer.cols,
                    entries
                        .into_iter()
                        .map(|(row, col, weight)| SparseEntry { row, col, weight })
                        .collect(),
                )
            }
            _ => {
                return Err(Error::parse(
                    &display,
                    format!("layer {idx}: need exactly one of \"values\" or \"entries\""),
                ))
            }
        };
        layers.push(built.map_err(|e| Error::parse(&display, format!("layer {idx}: {e}")))?);
    }
    NetworkSnapshot::new(repr.step, layers).map_err(|e| Error::parse(&display, e.to_string()))
}

/// `load_snapshot` plus the requirement that consecutive layers chain
/// (layer k's input count equals layer k-1's output count).
pub fn load_snapshot_strict(path: impl AsRef<Path>) -> Result<NetworkSnapshot> {
    let snapshot = load_snapshot(&path)?;
    if !snapshot.is_strict_network() {
        return Err(Error::parse(
            path.as_ref().display().to_string(),
            "layer dimensions do not chain into a network",
        ));
    }
    Ok(snapshot)
}

/// Write named metric series as a `step,metric_name,value` CSV file.
pub fn save_traces(
    path: impl AsRef<Path>,
    metrics: &[(MetricName, &[(u64, f64)])],
) -> Result<()> {
    let mut out = String::from("step,metric_name,value\n");
    for (name, samples) in metrics {
        for (step, value) in *samples {
            if !value.is_finite() {
                return Err(Error::invalid(format!("non-finite {name} value at step {step}")));
            }
            out.push_str(&format!("{step},{name},{value}\n"));
        }
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

/// Parse a trace file into per-metric series, validating the header, the
/// vocabulary, and that steps are non-decreasing per metric.
pub fn load_traces(path: impl AsRef<Path>) -> Result<BTreeMap<MetricName, Vec<(u64, f64)>>> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let contents = std::fs::read_to_string(path)?;
    let mut lines = contents.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "step,metric_name,value" => {}
        Some((_, header)) => {
            return Err(Error::parse(&display, format!("line 1: unexpected header {header:?}")))
        }
        None => return Err(Error::parse(&display, "empty file")),
    }
    let mut metrics: BTreeMap<MetricName, Vec<(u64, f64)>> = BTreeMap::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = i + 1;
        let mut fields = line.split(',');
        let (step, name, value) = match (fields.next(), fields.next(), fields.next(), fields.next())
        {
            (Some(s), Some(n), Some(v), None) => (s, n, v),
            _ => {
                return Err(Error::parse(
                    &display,
                    format!("line {lineno}: expected step,metric_name,value"),
                ))
            }
        };
        let step: u64 = step
            .trim()
            .parse()
            .map_err(|_| Error::parse(&display, format!("line {lineno}: bad step {step:?}")))?;
        let name = MetricName::from_str(name.trim())
            .map_err(|_| Error::parse(&display, format!("line {lineno}: unknown metric {name:?}")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::parse(&display, format!("line {lineno}: bad value {value:?}")))?;
        if !value.is_finite() {
            return Err(Error::parse(&display, format!("line {lineno}: non-finite value")));
        }
        let series = metrics.entry(name).or_default();
        if let Some(&(last, _)) = series.last() {
            if step < last {
                return Err(Error::parse(
                    &display,
                    format!("line {lineno}: step {step} goes backwards for {name}"),
                ));
            }
        }
        series.push((step, value));
    }
    Ok(metrics)
}

/// Extract one metric from a trace file as a `MetricTrace` with the
/// metric's natural improvement direction.
pub fn load_metric_trace(path: impl AsRef<Path>, name: MetricName) -> Result<MetricTrace> {
    let display = path.as_ref().display().to_string();
    let mut metrics = load_traces(&path)?;
    let samples = metrics
        .remove(&name)
        .ok_or_else(|| Error::parse(&display, format!("metric {name} not found")))?;
    MetricTrace::new(samples, name.direction())
        .map_err(|e| Error::parse(&display, format!("metric {name}: {e}")))
}

/// Import adapter for delimiter-separated dense matrices (one row per
/// line). Empty lines are skipped.
pub fn import_delimited_matrix(
    path: impl AsRef<Path>,
    delimiter: char,
) -> Result<WeightedBipartiteLayer> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let contents = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in contents.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(delimiter)
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| {
                    Error::parse(&display, format!("line {}: bad number {f:?}", i + 1))
                })
            })
            .collect::<Result<_>>()?;
        rows.push(row);
    }
    WeightedBipartiteLayer::from_rows(&rows).map_err(|e| Error::parse(&display, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snapshot() -> NetworkSnapshot {
        let dense =
            WeightedBipartiteLayer::from_rows(&[vec![1.0, 0.5], vec![0.5, 0.5]]).unwrap();
        let sparse = WeightedBipartiteLayer::sparse(
            2,
            3,
            vec![
                SparseEntry { row: 0, col: 2, weight: -0.25 },
                SparseEntry { row: 1, col: 0, weight: 1e-300 },
            ],
        )
        .unwrap();
        NetworkSnapshot::new(7, vec![dense, sparse]).unwrap()
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.json");
        let original = snapshot();
        save_snapshot(&original, &path).unwrap();
        let loaded = load_snapshot(&path).unwrap();
        assert_eq!(loaded.step(), original.step());
        for (a, b) in loaded.layers().iter().zip(original.layers()) {
            let av: Vec<u64> = a.edges().map(|(_, _, w)| w.to_bits()).collect();
            let bv: Vec<u64> = b.edges().map(|(_, _, w)| w.to_bits()).collect();
            assert_eq!(av, bv);
        }
    }

    #[test]
    fn minimal_dense_snapshot_parses() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("min.json");
        std::fs::write(
            &path,
            r#"{"format":"np-snapshot-v1","step":0,"layers":[{"rows":2,"cols":2,"values":[1,2,3,4]}]}"#,
        )
        .unwrap();
        let snap = load_snapshot(&path).unwrap();
        assert_eq!(snap.layer_count(), 1);
        assert_eq!(snap.layers()[0].edge_count(), 4);
    }

    #[test]
    fn tampered_value_count_reports_layer() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(
            &path,
            r#"{"format":"np-snapshot-v1","step":0,"layers":[{"rows":2,"cols":2,"values":[1,2,3]}]}"#,
        )
        .unwrap();
        let err = load_snapshot(&path).unwrap_err().to_string();
        assert!(err.contains("layer 0"), "{err}");
        assert!(err.contains("expected 4"), "{err}");
    }

    #[test]
    fn malformed_json_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("broken.json");
        std::fs::write(&path, "{\n  \"format\": \"np-snapshot-v1\",\n  oops\n}").unwrap();
        let err = load_snapshot(&path).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn wrong_format_tag_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tag.json");
        std::fs::write(
            &path,
            r#"{"format":"np-snapshot-v0","step":0,"layers":[{"rows":1,"cols":1,"values":[1]}]}"#,
        )
        .unwrap();
        assert!(load_snapshot(&path).is_err());
    }

    #[test]
    fn strict_loading_enforces_chained_dims() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("chain.json");
        let a = WeightedBipartiteLayer::dense(3, 2, vec![0.1; 6]).unwrap();
        let b = WeightedBipartiteLayer::dense(2, 4, vec![0.1; 8]).unwrap();
        save_snapshot(&NetworkSnapshot::new(0, vec![a, b]).unwrap(), &path).unwrap();
        assert!(load_snapshot(&path).is_ok());
        assert!(load_snapshot_strict(&path).is_err());
    }

    #[test]
    fn sparse_snapshot_round_trips_the_unrolled_example() {
        let filter = crate::conv::ConvFilter::from_rows(&[vec![4.0, 3.0], vec![2.0, 1.0]]).unwrap();
        let geo = crate::conv::ConvGeometry::new(3, 3, 0).unwrap();
        let layer = crate::conv::unroll_filter(&filter, &geo).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("conv.json");
        save_snapshot(&NetworkSnapshot::new(0, vec![layer.clone()]).unwrap(), &path).unwrap();
        let loaded = load_snapshot(&path).unwrap();
        assert_eq!(loaded.layers()[0], layer);
        assert_eq!(loaded.layers()[0].edge_count(), 16);
    }

    #[test]
    fn traces_round_trip_and_validate() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let np = [(0u64, 0.1), (1, 0.2), (2, 0.25)];
        let loss = [(0u64, 1.5), (1, 1.2), (2, 1.1)];
        save_traces(
            &path,
            &[(MetricName::NpMeanNormalized, &np), (MetricName::ValLoss, &loss)],
        )
        .unwrap();
        let metrics = load_traces(&path).unwrap();
        assert_eq!(metrics[&MetricName::NpMeanNormalized], np.to_vec());
        assert_eq!(metrics[&MetricName::ValLoss], loss.to_vec());
        let trace = load_metric_trace(&path, MetricName::ValLoss).unwrap();
        assert_eq!(trace.direction(), Direction::Minimize);
        assert_eq!(trace.last_step(), 2);
    }

    #[test]
    fn trace_parser_rejects_bad_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "step,metric_name,value\n0,not_a_metric,1.0\n").unwrap();
        assert!(load_traces(&path).unwrap_err().to_string().contains("line 2"));
        std::fs::write(&path, "step,metric_name,value\n2,val_loss,1.0\n1,val_loss,0.9\n").unwrap();
        assert!(load_traces(&path).unwrap_err().to_string().contains("backwards"));
        std::fs::write(&path, "nope\n").unwrap();
        assert!(load_traces(&path).is_err());
    }

    #[test]
    fn matrix_import_reads_csv_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("matrix.csv");
        std::fs::write(&path, "1.0,0.5\n0.5,0.5\n").unwrap();
        let layer = import_delimited_matrix(&path, ',').unwrap();
        assert_eq!((layer.out_count(), layer.in_count()), (2, 2));
        std::fs::write(&path, "1.0,x\n").unwrap();
        assert!(import_delimited_matrix(&path, ',').is_err());
    }
}
