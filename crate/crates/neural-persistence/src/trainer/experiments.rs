//! Reproductions of the qualitative weight-regime experiments at desk scale.

use crate::diagram::EssentialPolicy;
use crate::error::{Error, Result};
use crate::filtration::compute_diagram;
use crate::layer::WeightedBipartiteLayer;
use crate::measures::{empirical_bounds_for_layer, neural_persistence};

use super::{init_weights, train_with_init, InitScheme, MlpSpec, SyntheticDataset, TrainConfig};

/// The four weight regimes compared against each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeLabel {
    Trained,
    Diverging,
    RandomGaussian,
    RandomUniform,
}

impl RegimeLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeLabel::Trained => "trained",
            RegimeLabel::Diverging => "diverging",
            RegimeLabel::RandomGaussian => "random_gaussian",
            RegimeLabel::RandomUniform => "random_uniform",
        }
    }
}

/// Per-run neural persistence of one regime, with the order-statistic
/// lower bound computed from each run's own weights.
#[derive(Debug, Clone)]
pub struct RegimeSample {
    pub label: RegimeLabel,
    pub np: Vec<f64>,
    pub lower_bound: Vec<f64>,
}

fn layer_np_and_lower(layer: &WeightedBipartiteLayer) -> Result<(f64, f64)> {
    let global_max = layer.max_abs_weight();
    let diagram = compute_diagram(layer, global_max, EssentialPolicy::Skip)?;
    let np = neural_persistence(&diagram, 2.0)?.value;
    let bounds = empirical_bounds_for_layer(layer, global_max, 2.0)?;
    Ok((np, bounds.lower))
}

/// Train single-layer perceptrons on synthetic blobs and compare their
/// neural persistence against diverging runs and random Gaussian / uniform
/// matrices of the same shape. Deterministic given the seed.
pub fn regime_experiment(runs: usize, seed: u64) -> Result<Vec<RegimeSample>> {
    if runs == 0 {
        return Err(Error::invalid("need at least one run"));
    }
    let dim = 32;
    let classes = 4;
    let dataset = SyntheticDataset::blobs(600, dim, classes, seed)?;
    let spec = MlpSpec::new(vec![dim, classes])?;

    let mut samples = [
        RegimeSample { label: RegimeLabel::Trained, np: Vec::new(), lower_bound: Vec::new() },
        RegimeSample { label: RegimeLabel::Diverging, np: Vec::new(), lower_bound: Vec::new() },
        RegimeSample { label: RegimeLabel::RandomGaussian, np: Vec::new(), lower_bound: Vec::new() },
        RegimeSample { label: RegimeLabel::RandomUniform, np: Vec::new(), lower_bound: Vec::new() },
    ];

    for run in 0..runs as u64 {
        let run_seed = seed.wrapping_add(1 + run);

        let trained = train_with_init(
            &spec,
            &dataset,
            &TrainConfig::sgd(0.5, 5, run_seed),
            InitScheme::Xavier,
        )?;
        let layer = &trained.snapshots.last().expect("at least step 0").layers()[0];
        let (np, lower) = layer_np_and_lower(layer)?;
        samples[0].np.push(np);
        samples[0].lower_bound.push(lower);

        let diverging = train_with_init(
            &spec,
            &dataset,
            &TrainConfig::sgd(50.0, 5, run_seed),
            InitScheme::Xavier,
        )?;
        let layer = &diverging.snapshots.last().expect("at least step 0").layers()[0];
        let (np, lower) = layer_np_and_lower(layer)?;
        samples[1].np.push(np);
        samples[1].lower_bound.push(lower);

        for (slot, scheme) in [
            (2, InitScheme::Gaussian { std: 1.0 }),
            (3, InitScheme::Uniform { low: -1.0, high: 1.0 }),
        ] {
            let snapshot = init_weights(&spec, scheme, run_seed)?;
            let (np, lower) = layer_np_and_lower(&snapshot.layers()[0])?;
            samples[slot].np.push(np);
            samples[slot].lower_bound.push(lower);
        }
    }
    Ok(samples.to_vec())
}

/// Dispersion of the mean normalized neural persistence across depths:
/// networks of `depth` hidden layers of `base_width` units, trained for a
/// fixed small budget, measured over `runs` seeds.
#[derive(Debug, Clone)]
pub struct DepthStats {
    pub depth: usize,
    pub values: Vec<f64>,
    pub mean: f64,
    /// Interquartile range of the per-run values.
    pub iqr: f64,
}

pub fn depth_variability(
    base_width: usize,
    depths: &[usize],
    runs: usize,
    seed: u64,
) -> Result<Vec<DepthStats>> {
    if depths.is_empty() || depths.contains(&0) {
        return Err(Error::invalid("depths must be positive"));
    }
    if runs == 0 {
        return Err(Error::invalid("need at least one run"));
    }
    let dim = 16;
    let classes = 3;
    let dataset = SyntheticDataset::blobs(450, dim, classes, seed)?;
    let mut stats = Vec::with_capacity(depths.len());
    for &depth in depths {
        let hidden = vec![base_width; depth];
        let spec = MlpSpec::with_hidden(dim, &hidden, classes)?;
        let mut values = Vec::with_capacity(runs);
        for run in 0..runs as u64 {
            let out = train_with_init(
                &spec,
                &dataset,
                &TrainConfig::sgd(0.5, 3, seed.wrapping_add(1 + run)),
                InitScheme::Xavier,
            )?;
            values.push(*out.traces.np_mean_normalized.last().expect("non-empty"));
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
        stats.push(DepthStats { depth, values, mean, iqr });
    }
    Ok(stats)
}

/// Linear-interpolation quantile of an ascending-sorted slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    assert!((0.0..=1.0).contains(&q));
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&[5.0], 0.5), 5.0);
    }

    #[test]
    fn regime_runs_are_deterministic_and_bounded_below() {
        let a = regime_experiment(3, 17).unwrap();
        let b = regime_experiment(3, 17).unwrap();
        for (sa, sb) in a.iter().zip(&b) {
            assert_eq!(sa.np, sb.np);
        }
        for sample in &a {
            assert_eq!(sample.np.len(), 3);
            for (np, lower) in sample.np.iter().zip(&sample.lower_bound) {
                assert!(np + 1e-12 >= *lower, "{:?}: np {np} < lower {lower}", sample.label);
            }
        }
    }

    #[test]
    fn single_run_depth_stats_have_zero_dispersion() {
        let stats = depth_variability(8, &[1, 2], 1, 5).unwrap();
        for s in &stats {
            assert_eq!(s.values.len(), 1);
            assert_eq!(s.iqr, 0.0);
        }
    }

    #[test]
    fn depth_stats_are_deterministic() {
        let a = depth_variability(8, &[1], 3, 5).unwrap();
        let b = depth_variability(8, &[1], 3, 5).unwrap();
        assert_eq!(a[0].values, b[0].values);
    }

    #[test]
    fn deeper_nets_show_more_dispersion_at_fixed_budget() {
        let stats = depth_variability(20, &[1, 3], 20, 5).unwrap();
        assert_eq!(stats[0].depth, 1);
        assert_eq!(stats[1].depth, 3);
        assert!(
            stats[1].iqr > stats[0].iqr,
            "depth-3 iqr {} vs depth-1 iqr {}",
            stats[1].iqr,
            stats[0].iqr
        );
    }
}
