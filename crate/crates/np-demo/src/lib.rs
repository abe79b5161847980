//! Browser bindings: small JSON-in/JSON-out wrappers around the library so
//! a static page can explore persistence diagrams, weight regimes, and the
//! early-stopping grid interactively. Every function returns a JSON string;
//! failures come back as `{"error": "..."}`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use neural_persistence::earlystop::{simulate_grid, summarize, GridCell, GridSummary};
use neural_persistence::trainer::experiments::regime_experiment;
use neural_persistence::trainer::{
    init_weights, train_with_init, InitScheme, MlpSpec, SyntheticDataset, TrainConfig,
};
use neural_persistence::{
    compute_diagram, empirical_bounds, neural_persistence, normalized_neural_persistence,
    theoretical_upper_bound, transform_weights, EssentialPolicy, Result,
};

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("demo payloads serialize")
}

fn or_error(result: Result<String>) -> String {
    match result {
        Ok(json) => json,
        Err(err) => format!("{{\"error\":{}}}", serde_json::Value::String(err.to_string())),
    }
}

#[derive(Serialize)]
struct LayerAnalysis {
    rows: usize,
    cols: usize,
    global_max: f64,
    weights: Vec<f64>,
    deaths: Vec<f64>,
    essential_count: usize,
    np: f64,
    normalized_np: f64,
    theoretical_upper: f64,
    empirical_lower: f64,
    empirical_upper: f64,
}

fn scheme_from_name(name: &str) -> Result<InitScheme> {
    Ok(match name {
        "gaussian" => InitScheme::Gaussian { std: 1.0 },
        "uniform" => InitScheme::Uniform { low: -1.0, high: 1.0 },
        "beta" => InitScheme::Beta { alpha: 0.005, beta: 0.5 },
        "xavier" => InitScheme::Xavier,
        other => {
            return Err(neural_persistence::Error::InvalidArgument(format!(
                "unknown distribution {other:?}"
            )))
        }
    })
}

/// Random layer of the requested shape and weight distribution, with its
/// persistence diagram, norms, and bounds.
#[wasm_bindgen]
pub fn layer_analysis(rows: u32, cols: u32, distribution: &str, seed: u32, p: f64) -> String {
    or_error((|| {
        let scheme = scheme_from_name(distribution)?;
        let spec = MlpSpec::new(vec![cols as usize, rows as usize])?;
        let snapshot = init_weights(&spec, scheme, u64::from(seed))?;
        let layer = &snapshot.layers()[0];
        let global_max = layer.max_abs_weight();
        let diagram = compute_diagram(layer, global_max, EssentialPolicy::Skip)?;
        let mut sorted = transform_weights(layer, global_max)?;
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let bounds = empirical_bounds(&sorted, diagram.finite_points().len(), p)?;
        Ok(to_json(&LayerAnalysis {
            rows: layer.out_count(),
            cols: layer.in_count(),
            global_max,
            weights: layer.dense_weights().expect("generated dense").to_vec(),
            deaths: diagram.deaths().collect(),
            essential_count: diagram.essential_count(),
            np: neural_persistence(&diagram, p)?.value,
            normalized_np: normalized_neural_persistence(layer, global_max, p, EssentialPolicy::Skip)?,
            theoretical_upper: theoretical_upper_bound(layer, global_max, p)?,
            empirical_lower: bounds.lower,
            empirical_upper: bounds.upper,
        }))
    })())
}

#[derive(Serialize)]
struct RegimeOut {
    label: &'static str,
    np: Vec<f64>,
    lower_bound: Vec<f64>,
}

#[derive(Serialize)]
struct RegimesOut {
    runs: usize,
    regimes: Vec<RegimeOut>,
}

/// Neural persistence of trained, diverging, random Gaussian, and random
/// uniform perceptrons on synthetic blobs (one training run per sample).
#[wasm_bindgen]
pub fn regime_distributions(runs: u32, seed: u32) -> String {
    or_error((|| {
        let samples = regime_experiment(runs as usize, u64::from(seed))?;
        Ok(to_json(&RegimesOut {
            runs: runs as usize,
            regimes: samples
                .iter()
                .map(|s| RegimeOut {
                    label: s.label.as_str(),
                    np: s.np.clone(),
                    lower_bound: s.lower_bound.clone(),
                })
                .collect(),
        }))
    })())
}

#[derive(Serialize)]
struct GridOut {
    epochs: u32,
    steps_per_epoch: u32,
    cells: Vec<GridCell>,
}

#[derive(Serialize)]
struct TrainSimulateOut {
    steps: Vec<u64>,
    np: Vec<f64>,
    val_loss: Vec<f64>,
    test_accuracy: Vec<f64>,
    diverged: bool,
    final_test_accuracy: f64,
    grid: GridOut,
    summary: GridSummary,
}

/// Train a small MLP on blobs, then replay the patience criterion for both
/// the persistence trace (maximized) and the validation loss (minimized)
/// over the whole burn-in x patience grid.
#[wasm_bindgen]
pub fn train_and_simulate(hidden: u32, eta: f64, epochs: u32, seed: u32) -> String {
    or_error((|| {
        let dataset = SyntheticDataset::blobs(600, 16, 3, u64::from(seed))?;
        let hidden_sizes: Vec<usize> = if hidden == 0 { vec![] } else { vec![hidden as usize] };
        let spec = MlpSpec::with_hidden(16, &hidden_sizes, 3)?;
        let config = TrainConfig {
            learning_rate: eta,
            epochs,
            batch_size: 32,
            seed: u64::from(seed),
            snapshot_interval: 1,
            optimizer: neural_persistence::trainer::Optimizer::Sgd,
        };
        let output = train_with_init(&spec, &dataset, &config, InitScheme::Xavier)?;
        let traces = &output.traces;
        let grid = simulate_grid(
            &traces.np_trace(),
            &traces.val_loss_trace(),
            &traces.test_accuracy_trace(),
            epochs,
            4,
        )?;
        let summary = summarize(&grid);
        Ok(to_json(&TrainSimulateOut {
            steps: traces.steps.clone(),
            np: traces.np_mean_normalized.clone(),
            val_loss: traces.val_loss.clone(),
            test_accuracy: traces.test_accuracy.clone(),
            diverged: output.diverged,
            final_test_accuracy: *traces.test_accuracy.last().expect("non-empty"),
            grid: GridOut {
                epochs,
                steps_per_epoch: 4,
                cells: grid.cells,
            },
            summary,
        }))
    })())
}
