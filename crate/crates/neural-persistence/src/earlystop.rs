//! Patience-based early stopping and the burn-in x patience grid simulator.
//!
//! A monitored scalar is sampled on a quarter-epoch step grid (step 4 =
//! epoch 1.0). The patience criterion keeps the best observed value and
//! stops after `patience` epochs worth of evaluations without improvement;
//! a burn-in delays the start of monitoring. The grid simulator replays two
//! criteria (one maximized, one minimized) over every (burn-in, patience)
//! combination and compares stop steps and the test accuracy at the stop.

use serde::Serialize;

use crate::error::{Error, Result};

/// Whether larger or smaller monitored values are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Maximize,
    Minimize,
}

/// Time series of one monitored scalar on a quarter-epoch step grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTrace {
    samples: Vec<(u64, f64)>,
    direction: Direction,
}

impl MetricTrace {
    pub fn new(samples: Vec<(u64, f64)>, direction: Direction) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("trace must contain at least one sample"));
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::invalid("trace steps must be strictly increasing"));
        }
        if samples.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid("trace values must be finite"));
        }
        Ok(Self { samples, direction })
    }

    pub fn samples(&self) -> &[(u64, f64)] {
        &self.samples
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn last_step(&self) -> u64 {
        self.samples.last().expect("trace is non-empty").0
    }

    pub fn steps(&self) -> impl Iterator<Item = u64> + '_ {
        self.samples.iter().map(|(s, _)| *s)
    }

    /// Value at the nearest recorded step at or before `step`. Falls back
    /// to the first sample when `step` precedes the trace.
    pub fn value_at_or_before(&self, step: u64) -> f64 {
        match self.samples.binary_search_by_key(&step, |(s, _)| *s) {
            Ok(i) => self.samples[i].1,
            Err(0) => self.samples[0].1,
            Err(i) => self.samples[i - 1].1,
        }
    }
}

/// Patience criterion parameters, denominated in epochs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatienceConfig {
    /// Epochs without improvement before stopping (g >= 1).
    pub patience_epochs: u32,
    /// Epochs before monitoring starts.
    pub burn_in_epochs: u32,
    /// Minimum improvement that resets the counter.
    pub min_delta: f64,
}

impl PatienceConfig {
    pub fn new(patience_epochs: u32, burn_in_epochs: u32, min_delta: f64) -> Result<Self> {
        if patience_epochs == 0 {
            return Err(Error::invalid("patience must be at least 1 epoch"));
        }
        if !min_delta.is_finite() || min_delta < 0.0 {
            return Err(Error::invalid("min delta must be non-negative and finite"));
        }
        Ok(Self {
            patience_epochs,
            burn_in_epochs,
            min_delta,
        })
    }
}

/// Outcome of running the patience criterion over a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopDecision {
    /// First step at which the non-improvement counter reached the
    /// threshold, along with the best value observed up to that point.
    Triggered { step: u64, best: f64 },
    /// The criterion never fired; carries the trace's final step and the
    /// best monitored value, if any sample was monitored at all.
    NotTriggered { final_step: u64, best: Option<f64> },
}

impl StopDecision {
    pub fn stop_step(&self) -> u64 {
        match self {
            StopDecision::Triggered { step, .. } => *step,
            StopDecision::NotTriggered { final_step, .. } => *final_step,
        }
    }

    pub fn triggered(&self) -> bool {
        matches!(self, StopDecision::Triggered { .. })
    }

    pub fn best(&self) -> Option<f64> {
        match self {
            StopDecision::Triggered { best, .. } => Some(*best),
            StopDecision::NotTriggered { best, .. } => *best,
        }
    }
}

/// Run the patience criterion. Monitoring starts at the first sample with
/// step >= burn_in * steps_per_epoch; a patience of g epochs means
/// `g * steps_per_epoch` consecutive non-improving evaluations. Equal
/// values do not count as improvement.
pub fn patience_stop(
    trace: &MetricTrace,
    config: &PatienceConfig,
    steps_per_epoch: u32,
) -> StopDecision {
    assert!(steps_per_epoch >= 1, "steps_per_epoch must be at least 1");
    let threshold = config.patience_epochs as u64 * steps_per_epoch as u64;
    let burn_in_step = config.burn_in_epochs as u64 * steps_per_epoch as u64;
    let sign = match trace.direction() {
        Direction::Maximize => 1.0,
        Direction::Minimize => -1.0,
    };
    let mut best = f64::NEG_INFINITY;
    let mut counter: u64 = 0;
    for &(step, value) in trace.samples() {
        if step < burn_in_step {
            continue;
        }
        let v = sign * value;
        if v > best + config.min_delta {
            best = v;
            counter = 0;
        } else {
            counter += 1;
            if counter >= threshold {
                return StopDecision::Triggered {
                    step,
                    best: sign * best,
                };
            }
        }
    }
    StopDecision::NotTriggered {
        final_step: trace.last_step(),
        best: (best > f64::NEG_INFINITY).then_some(sign * best),
    }
}

/// One criterion's result in a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellOutcome {
    pub stop_step: u64,
    pub accuracy: f64,
    pub triggered: bool,
}

/// Comparison of the two criteria at one (burn-in, patience) combination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridCell {
    pub burn_in: u32,
    pub patience: u32,
    pub monitored: CellOutcome,
    pub baseline: CellOutcome,
    /// Monitored stop minus baseline stop, in epochs.
    pub delta_epochs: f64,
    /// Monitored accuracy minus baseline accuracy at the respective stops.
    pub delta_accuracy: f64,
}

/// The full burn-in x patience comparison grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StopGrid {
    pub total_epochs: u32,
    pub steps_per_epoch: u32,
    /// Cells in (burn-in ascending, patience ascending) order.
    pub cells: Vec<GridCell>,
}

/// Simulate both stopping criteria over the whole grid: burn-in in
/// 0..total_epochs, patience in 1..=total_epochs, with min delta 0. The
/// monitored trace is maximized, the baseline trace minimized, and the
/// accuracy at each stop is read from `accuracy_trace` (never-triggered
/// cells take the final step and final accuracy).
pub fn simulate_grid(
    monitored: &MetricTrace,
    baseline: &MetricTrace,
    accuracy_trace: &MetricTrace,
    total_epochs: u32,
    steps_per_epoch: u32,
) -> Result<StopGrid> {
    if total_epochs == 0 {
        return Err(Error::invalid("grid needs at least one epoch"));
    }
    if steps_per_epoch == 0 {
        return Err(Error::invalid("steps_per_epoch must be at least 1"));
    }
    let axis: Vec<u64> = monitored.steps().collect();
    if baseline.steps().collect::<Vec<_>>() != axis
        || accuracy_trace.steps().collect::<Vec<_>>() != axis
    {
        return Err(Error::invalid("traces do not share the same step axis"));
    }
    let mut cells = Vec::with_capacity(total_epochs as usize * total_epochs as usize);
    for burn_in in 0..total_epochs {
        for patience in 1..=total_epochs {
            let config = PatienceConfig::new(patience, burn_in, 0.0)?;
            let m = patience_stop(monitored, &config, steps_per_epoch);
            let b = patience_stop(baseline, &config, steps_per_epoch);
            let m_out = CellOutcome {
                stop_step: m.stop_step(),
                accuracy: accuracy_trace.value_at_or_before(m.stop_step()),
                triggered: m.triggered(),
            };
            let b_out = CellOutcome {
                stop_step: b.stop_step(),
                accuracy: accuracy_trace.value_at_or_before(b.stop_step()),
                triggered: b.triggered(),
            };
            cells.push(GridCell {
                burn_in,
                patience,
                delta_epochs: (m_out.stop_step as f64 - b_out.stop_step as f64)
                    / steps_per_epoch as f64,
                delta_accuracy: m_out.accuracy - b_out.accuracy,
                monitored: m_out,
                baseline: b_out,
            });
        }
    }
    Ok(StopGrid {
        total_epochs,
        steps_per_epoch,
        cells,
    })
}

/// Counts of cells per scatterplot quadrant; cells on an axis go to
/// `boundary`. Q2 holds cells that stop earlier with higher accuracy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct QuadrantCounts {
    pub q1_later_higher: usize,
    pub q2_earlier_higher: usize,
    pub q3_earlier_lower: usize,
    pub q4_later_lower: usize,
    pub boundary: usize,
}

impl QuadrantCounts {
    fn add(&mut self, delta_epochs: f64, delta_accuracy: f64) {
        match (
            delta_epochs.partial_cmp(&0.0).unwrap(),
            delta_accuracy.partial_cmp(&0.0).unwrap(),
        ) {
            (std::cmp::Ordering::Greater, std::cmp::Ordering::Greater) => self.q1_later_higher += 1,
            (std::cmp::Ordering::Less, std::cmp::Ordering::Greater) => self.q2_earlier_higher += 1,
            (std::cmp::Ordering::Less, std::cmp::Ordering::Less) => self.q3_earlier_lower += 1,
            (std::cmp::Ordering::Greater, std::cmp::Ordering::Less) => self.q4_later_lower += 1,
            _ => self.boundary += 1,
        }
    }
}

/// Aggregate view of a grid: barycentre, quadrant counts over all cells and
/// over the common-configuration subset (burn-in and patience at most half
/// the training length), and per-criterion trigger totals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSummary {
    pub cells: usize,
    pub barycentre_epochs: f64,
    pub barycentre_accuracy: f64,
    pub quadrants: QuadrantCounts,
    pub common_cells: usize,
    pub common_quadrants: QuadrantCounts,
    pub monitored_triggers: usize,
    pub baseline_triggers: usize,
}

/// Summarize a single-run grid.
pub fn summarize(grid: &StopGrid) -> GridSummary {
    let half = grid.total_epochs / 2;
    let mut summary = GridSummary {
        cells: grid.cells.len(),
        barycentre_epochs: 0.0,
        barycentre_accuracy: 0.0,
        quadrants: QuadrantCounts::default(),
        common_cells: 0,
        common_quadrants: QuadrantCounts::default(),
        monitored_triggers: 0,
        baseline_triggers: 0,
    };
    for cell in &grid.cells {
        summary.barycentre_epochs += cell.delta_epochs;
        summary.barycentre_accuracy += cell.delta_accuracy;
        summary.quadrants.add(cell.delta_epochs, cell.delta_accuracy);
        if cell.burn_in <= half && cell.patience <= half {
            summary.common_cells += 1;
            summary
                .common_quadrants
                .add(cell.delta_epochs, cell.delta_accuracy);
        }
        summary.monitored_triggers += usize::from(cell.monitored.triggered);
        summary.baseline_triggers += usize::from(cell.baseline.triggered);
    }
    if !grid.cells.is_empty() {
        summary.barycentre_epochs /= grid.cells.len() as f64;
        summary.barycentre_accuracy /= grid.cells.len() as f64;
    }
    summary
}

/// One grid cell aggregated over several runs: per-criterion medians of
/// stop epoch and accuracy, deltas of those medians, and trigger counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MedianCell {
    pub burn_in: u32,
    pub patience: u32,
    pub monitored_stop_epochs: f64,
    pub baseline_stop_epochs: f64,
    pub monitored_accuracy: f64,
    pub baseline_accuracy: f64,
    pub delta_epochs: f64,
    pub delta_accuracy: f64,
    pub monitored_triggers: usize,
    pub baseline_triggers: usize,
}

/// Multi-run aggregation of identically shaped grids: medians are taken
/// across runs before differencing.
#[derive(Debug, Clone, PartialEq)]
pub struct MedianGrid {
    pub runs: usize,
    pub total_epochs: u32,
    pub steps_per_epoch: u32,
    pub cells: Vec<MedianCell>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

impl MedianGrid {
    pub fn from_runs(grids: &[StopGrid]) -> Result<Self> {
        let first = grids
            .first()
            .ok_or_else(|| Error::invalid("need at least one run"))?;
        if grids.iter().any(|g| {
            g.total_epochs != first.total_epochs
                || g.steps_per_epoch != first.steps_per_epoch
                || g.cells.len() != first.cells.len()
        }) {
            return Err(Error::invalid("runs have mismatched grid shapes"));
        }
        let spe = first.steps_per_epoch as f64;
        let mut cells = Vec::with_capacity(first.cells.len());
        for i in 0..first.cells.len() {
            let mut m_epochs: Vec<f64> = grids
                .iter()
                .map(|g| g.cells[i].monitored.stop_step as f64 / spe)
                .collect();
            let mut b_epochs: Vec<f64> = grids
                .iter()
                .map(|g| g.cells[i].baseline.stop_step as f64 / spe)
                .collect();
            let mut m_acc: Vec<f64> = grids.iter().map(|g| g.cells[i].monitored.accuracy).collect();
            let mut b_acc: Vec<f64> = grids.iter().map(|g| g.cells[i].baseline.accuracy).collect();
            let monitored_stop_epochs = median(&mut m_epochs);
            let baseline_stop_epochs = median(&mut b_epochs);
            let monitored_accuracy = median(&mut m_acc);
            let baseline_accuracy = median(&mut b_acc);
            cells.push(MedianCell {
                burn_in: first.cells[i].burn_in,
                patience: first.cells[i].patience,
                monitored_stop_epochs,
                baseline_stop_epochs,
                monitored_accuracy,
                baseline_accuracy,
                delta_epochs: monitored_stop_epochs - baseline_stop_epochs,
                delta_accuracy: monitored_accuracy - baseline_accuracy,
                monitored_triggers: grids
                    .iter()
                    .filter(|g| g.cells[i].monitored.triggered)
                    .count(),
                baseline_triggers: grids
                    .iter()
                    .filter(|g| g.cells[i].baseline.triggered)
                    .count(),
            });
        }
        Ok(Self {
            runs: grids.len(),
            total_epochs: first.total_epochs,
            steps_per_epoch: first.steps_per_epoch,
            cells,
        })
    }

    pub fn summarize(&self) -> GridSummary {
        let half = self.total_epochs / 2;
        let mut summary = GridSummary {
            cells: self.cells.len(),
            barycentre_epochs: 0.0,
            barycentre_accuracy: 0.0,
            quadrants: QuadrantCounts::default(),
            common_cells: 0,
            common_quadrants: QuadrantCounts::default(),
            monitored_triggers: 0,
            baseline_triggers: 0,
        };
        for cell in &self.cells {
            summary.barycentre_epochs += cell.delta_epochs;
            summary.barycentre_accuracy += cell.delta_accuracy;
            summary.quadrants.add(cell.delta_epochs, cell.delta_accuracy);
            if cell.burn_in <= half && cell.patience <= half {
                summary.common_cells += 1;
                summary
                    .common_quadrants
                    .add(cell.delta_epochs, cell.delta_accuracy);
            }
            summary.monitored_triggers += cell.monitored_triggers;
            summary.baseline_triggers += cell.baseline_triggers;
        }
        if !self.cells.is_empty() {
            summary.barycentre_epochs /= self.cells.len() as f64;
            summary.barycentre_accuracy /= self.cells.len() as f64;
        }
        summary
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(values: &[f64], direction: Direction) -> MetricTrace {
        let samples = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (i as u64, v))
            .collect();
        MetricTrace::new(samples, direction).unwrap()
    }

    #[test]
    fn trace_rejects_bad_inputs() {
        assert!(MetricTrace::new(vec![], Direction::Maximize).is_err());
        assert!(MetricTrace::new(vec![(1, 0.0), (1, 1.0)], Direction::Maximize).is_err());
        assert!(MetricTrace::new(vec![(0, f64::NAN)], Direction::Maximize).is_err());
    }

    #[test]
    fn plateau_triggers_after_patience_evaluations() {
        let t = trace(&[0.1, 0.2, 0.2, 0.2], Direction::Maximize);
        let config = PatienceConfig::new(2, 0, 0.0).unwrap();
        let decision = patience_stop(&t, &config, 1);
        assert_eq!(
            decision,
            StopDecision::Triggered { step: 3, best: 0.2 }
        );
    }

    #[test]
    fn strictly_increasing_trace_never_triggers() {
        let t = trace(&[0.1, 0.2, 0.3, 0.4, 0.5], Direction::Maximize);
        let config = PatienceConfig::new(1, 0, 0.0).unwrap();
        let decision = patience_stop(&t, &config, 1);
        assert_eq!(
            decision,
            StopDecision::NotTriggered { final_step: 4, best: Some(0.5) }
        );
    }

    #[test]
    fn constant_trace_stops_at_second_monitored_sample() {
        for c in [-3.0, 0.0, 7.5] {
            let t = trace(&[c; 5], Direction::Maximize);
            let config = PatienceConfig::new(1, 0, 0.0).unwrap();
            let decision = patience_stop(&t, &config, 1);
            assert_eq!(decision, StopDecision::Triggered { step: 1, best: c });
        }
    }

    #[test]
    fn burn_in_skips_early_samples() {
        // Constant trace, burn-in 2 epochs at 1 step/epoch: monitoring
        // starts at step 2, the counter fires one sample later.
        let t = trace(&[1.0; 6], Direction::Maximize);
        let config = PatienceConfig::new(1, 2, 0.0).unwrap();
        let decision = patience_stop(&t, &config, 1);
        assert_eq!(decision, StopDecision::Triggered { step: 3, best: 1.0 });
    }

    #[test]
    fn empty_after_burn_in_is_not_triggered() {
        let t = trace(&[1.0, 2.0], Direction::Maximize);
        let config = PatienceConfig::new(1, 5, 0.0).unwrap();
        let decision = patience_stop(&t, &config, 1);
        assert_eq!(
            decision,
            StopDecision::NotTriggered { final_step: 1, best: None }
        );
    }

    #[test]
    fn minimize_mirrors_maximize() {
        let values = [3.0, 2.0, 2.0, 2.5, 2.0, 2.0];
        let min_t = trace(&values, Direction::Minimize);
        let negated: Vec<f64> = values.iter().map(|v| -v).collect();
        let max_t = trace(&negated, Direction::Maximize);
        let config = PatienceConfig::new(2, 0, 0.0).unwrap();
        let a = patience_stop(&min_t, &config, 1);
        let b = patience_stop(&max_t, &config, 1);
        assert_eq!(a.stop_step(), b.stop_step());
        assert_eq!(a.triggered(), b.triggered());
        assert_eq!(a.best().map(|v| -v), b.best());
    }

    #[test]
    fn quarter_epoch_patience_counts_evaluations() {
        // 4 steps/epoch, patience 1 epoch: needs 4 non-improving samples.
        let t = trace(&[1.0, 1.0, 1.0, 1.0, 1.0, 1.0], Direction::Maximize);
        let config = PatienceConfig::new(1, 0, 0.0).unwrap();
        let decision = patience_stop(&t, &config, 4);
        assert_eq!(decision, StopDecision::Triggered { step: 4, best: 1.0 });
    }

    #[test]
    fn min_delta_requires_strict_margin() {
        let t = trace(&[1.0, 1.05, 1.2, 1.25], Direction::Maximize);
        let config = PatienceConfig::new(2, 0, 0.1).unwrap();
        // 1.05 and 1.25 are within the margin, 1.2 is not.
        let decision = patience_stop(&t, &config, 1);
        assert_eq!(decision, StopDecision::NotTriggered { final_step: 3, best: Some(1.2) });
    }

    fn mirrored_inputs(n_steps: u64) -> (MetricTrace, MetricTrace, MetricTrace) {
        let values: Vec<(u64, f64)> = (0..=n_steps)
            .map(|s| (s, ((s as f64) * 0.7).sin()))
            .collect();
        let monitored = MetricTrace::new(values.clone(), Direction::Maximize).unwrap();
        let baseline = MetricTrace::new(
            values.iter().map(|&(s, v)| (s, -v)).collect(),
            Direction::Minimize,
        )
        .unwrap();
        let accuracy = MetricTrace::new(
            (0..=n_steps).map(|s| (s, 0.5 + 0.4 * ((s as f64) * 0.3).cos())).collect(),
            Direction::Maximize,
        )
        .unwrap();
        (monitored, baseline, accuracy)
    }

    #[test]
    fn mirrored_traces_give_zero_grid() {
        let (monitored, baseline, accuracy) = mirrored_inputs(16);
        let grid = simulate_grid(&monitored, &baseline, &accuracy, 4, 4).unwrap();
        assert_eq!(grid.cells.len(), 16);
        for cell in &grid.cells {
            assert_eq!(cell.delta_epochs, 0.0);
            assert_eq!(cell.delta_accuracy, 0.0);
            assert_eq!(cell.monitored.stop_step, cell.baseline.stop_step);
        }
        let summary = summarize(&grid);
        assert_eq!(summary.barycentre_epochs, 0.0);
        assert_eq!(summary.barycentre_accuracy, 0.0);
        assert_eq!(summary.quadrants.boundary, 16);
    }

    #[test]
    fn grid_rejects_mismatched_axes() {
        let (monitored, _, accuracy) = mirrored_inputs(16);
        let short = MetricTrace::new(vec![(0, 1.0), (1, 2.0)], Direction::Minimize).unwrap();
        assert!(simulate_grid(&monitored, &short, &accuracy, 4, 4).is_err());
    }

    #[test]
    fn summary_barycentre_matches_hand_arithmetic() {
        // One cell at (-1, +0.5), three at (0, 0).
        let outcome = |step| CellOutcome { stop_step: step, accuracy: 0.0, triggered: true };
        let mut cells = vec![
            GridCell {
                burn_in: 0,
                patience: 1,
                monitored: outcome(4),
                baseline: outcome(8),
                delta_epochs: -1.0,
                delta_accuracy: 0.5,
            },
        ];
        for patience in 2..=4 {
            cells.push(GridCell {
                burn_in: 0,
                patience,
                monitored: outcome(8),
                baseline: outcome(8),
                delta_epochs: 0.0,
                delta_accuracy: 0.0,
            });
        }
        let grid = StopGrid { total_epochs: 2, steps_per_epoch: 4, cells };
        let summary = summarize(&grid);
        assert_eq!(summary.cells, 4);
        assert!((summary.barycentre_epochs - (-0.25)).abs() < 1e-15);
        assert!((summary.barycentre_accuracy - 0.125).abs() < 1e-15);
        assert_eq!(summary.quadrants.q2_earlier_higher, 1);
        assert_eq!(summary.quadrants.boundary, 3);
    }

    #[test]
    fn median_aggregation_differs_medians() {
        let (monitored, baseline, accuracy) = mirrored_inputs(16);
        let base_grid = simulate_grid(&monitored, &baseline, &accuracy, 4, 4).unwrap();
        // Three runs: two identical, one with every monitored stop shifted
        // a quarter-epoch later. The median must follow the majority.
        let mut shifted = base_grid.clone();
        for cell in &mut shifted.cells {
            cell.monitored.stop_step += 1;
            cell.delta_epochs += 0.25;
        }
        let runs = vec![base_grid.clone(), base_grid.clone(), shifted];
        let agg = MedianGrid::from_runs(&runs).unwrap();
        assert_eq!(agg.runs, 3);
        for (cell, base) in agg.cells.iter().zip(&base_grid.cells) {
            assert_eq!(
                cell.monitored_stop_epochs,
                base.monitored.stop_step as f64 / 4.0
            );
            assert_eq!(cell.delta_epochs, 0.0);
            assert_eq!(cell.monitored_triggers, 3 * usize::from(base.monitored.triggered));
        }
        let summary = agg.summarize();
        assert_eq!(summary.barycentre_epochs, 0.0);
    }
}
