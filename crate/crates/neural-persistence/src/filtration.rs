//! Descending-weight filtration of a bipartite layer and its
//! zero-dimensional persistent homology.
//!
//! Weights are first mapped to [0, 1] by `|w| / global_max`, where
//! `global_max` is the largest absolute weight of the whole network (or of
//! the layer itself when a layer is analyzed standalone). Edges then enter
//! the filtration in non-ascending transformed weight; all vertices exist
//! from the start with weight 1. Every edge that joins two distinct
//! components emits a diagram point (1, w'); cycle edges emit nothing.

use crate::diagram::{EssentialPolicy, PersistenceDiagram, PersistencePoint};
use crate::error::{Error, Result};
use crate::layer::WeightedBipartiteLayer;
use crate::union_find::UnionFind;

/// An edge of the filtration, carrying its transformed weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiltrationEdge {
    pub out_idx: u32,
    pub in_idx: u32,
    pub weight: f64,
}

/// Map every stored weight to `|w| / global_max`, in edge-storage order
/// (row-major for dense layers).
pub fn transform_weights(layer: &WeightedBipartiteLayer, global_max: f64) -> Result<Vec<f64>> {
    if global_max == 0.0 {
        return Err(Error::DegenerateNetwork);
    }
    if !global_max.is_finite() || global_max < 0.0 {
        return Err(Error::invalid(format!(
            "global max must be a positive finite number, got {global_max}"
        )));
    }
    let mut out = Vec::with_capacity(layer.edge_count());
    for (_, _, w) in layer.edges() {
        let t = w.abs() / global_max;
        if t > 1.0 {
            return Err(Error::invalid(format!(
                "weight {w} exceeds the given global max {global_max}"
            )));
        }
        out.push(t);
    }
    Ok(out)
}

/// Edges sorted by transformed weight in non-ascending order; ties broken
/// by (output index, input index) ascending. `transformed` must align with
/// `layer.edges()` order.
pub fn build_filtration(
    layer: &WeightedBipartiteLayer,
    transformed: &[f64],
) -> Vec<FiltrationEdge> {
    debug_assert_eq!(transformed.len(), layer.edge_count());
    let mut edges: Vec<FiltrationEdge> = layer
        .edges()
        .zip(transformed)
        .map(|((out_idx, in_idx, _), &weight)| FiltrationEdge {
            out_idx,
            in_idx,
            weight,
        })
        .collect();
    edges.sort_by(|a, b| {
        b.weight
            .partial_cmp(&a.weight)
            .expect("transformed weights are finite")
            .then(a.out_idx.cmp(&b.out_idx))
            .then(a.in_idx.cmp(&b.in_idx))
    });
    edges
}

/// Zero-dimensional persistence diagram of the layer under the
/// descending-weight filtration. Vertex indices: inputs first, then outputs.
pub fn compute_diagram(
    layer: &WeightedBipartiteLayer,
    global_max: f64,
    policy: EssentialPolicy,
) -> Result<PersistenceDiagram> {
    let transformed = transform_weights(layer, global_max)?;
    let filtration = build_filtration(layer, &transformed);
    let n = layer.vertex_count();
    let mut uf = UnionFind::new(n);
    let mut points = Vec::new();
    let offset = layer.in_count() as u32;
    for edge in &filtration {
        if uf.union(edge.in_idx, offset + edge.out_idx) {
            points.push(PersistencePoint::new(edge.weight));
        }
    }
    let essential_count = uf.component_count();
    debug_assert_eq!(points.len(), n - essential_count);
    Ok(PersistenceDiagram::new(points, essential_count, policy))
}

/// Independent verification oracle: the transformed weights of a maximum
/// spanning forest, computed by repeated max-edge selection (Prim-style
/// component growth). No sorting, no union-find, and its own transform, so
/// it shares no code path with `compute_diagram`. Returns the multiset of
/// death values sorted in non-ascending order.
pub fn mst_oracle(layer: &WeightedBipartiteLayer, global_max: f64) -> Result<Vec<f64>> {
    if global_max == 0.0 {
        return Err(Error::DegenerateNetwork);
    }
    if !global_max.is_finite() || global_max < 0.0 {
        return Err(Error::invalid(format!(
            "global max must be a positive finite number, got {global_max}"
        )));
    }
    let n = layer.vertex_count();
    let offset = layer.in_count();
    let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (out_idx, in_idx, w) in layer.edges() {
        let t = w.abs() / global_max;
        if t > 1.0 {
            return Err(Error::invalid(format!(
                "weight {w} exceeds the given global max {global_max}"
            )));
        }
        let a = in_idx as usize;
        let b = offset + out_idx as usize;
        adjacency[a].push((b, t));
        adjacency[b].push((a, t));
    }

    let mut in_tree = vec![false; n];
    let mut selected = Vec::new();
    for seed in 0..n {
        if in_tree[seed] {
            continue;
        }
        in_tree[seed] = true;
        // Grow this component greedily: best known edge into each vertex.
        let mut best: Vec<Option<f64>> = vec![None; n];
        for &(v, w) in &adjacency[seed] {
            best[v] = Some(best[v].map_or(w, |b: f64| b.max(w)));
        }
        loop {
            let mut pick: Option<(usize, f64)> = None;
            for v in 0..n {
                if in_tree[v] {
                    continue;
                }
                if let Some(w) = best[v] {
                    if pick.is_none_or(|(_, pw)| w > pw) {
                        pick = Some((v, w));
                    }
                }
            }
            let Some((v, w)) = pick else { break };
            in_tree[v] = true;
            selected.push(w);
            for &(u, uw) in &adjacency[v] {
                if !in_tree[u] {
                    best[u] = Some(best[u].map_or(uw, |b: f64| b.max(uw)));
                }
            }
        }
    }
    selected.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(selected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer::SparseEntry;

    fn k22() -> WeightedBipartiteLayer {
        WeightedBipartiteLayer::from_rows(&[vec![1.0, 0.5], vec![0.5, 0.5]]).unwrap()
    }

    #[test]
    fn transform_divides_by_global_max() {
        let layer = WeightedBipartiteLayer::from_rows(&[vec![2.0, -1.0]]).unwrap();
        assert_eq!(transform_weights(&layer, 2.0).unwrap(), vec![1.0, 0.5]);
    }

    #[test]
    fn transform_of_constant_matrix_is_all_ones() {
        let layer = WeightedBipartiteLayer::from_rows(&[vec![0.7, 0.7], vec![0.7, 0.7]]).unwrap();
        assert_eq!(transform_weights(&layer, 0.7).unwrap(), vec![1.0; 4]);
    }

    #[test]
    fn transform_rejects_zero_and_undersized_max() {
        let layer = k22();
        assert!(matches!(
            transform_weights(&layer, 0.0),
            Err(Error::DegenerateNetwork)
        ));
        assert!(matches!(
            transform_weights(&layer, 0.25),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn transform_is_scale_invariant_under_exact_scaling() {
        let layer = k22();
        let base = transform_weights(&layer, 1.0).unwrap();
        // Power-of-two factors scale without rounding, so the quotients are
        // bitwise identical.
        for c in [0.25, 2.0, 1024.0] {
            let scaled = layer.scaled(c);
            assert_eq!(transform_weights(&scaled, c).unwrap(), base);
        }
    }

    #[test]
    fn filtration_sorts_descending_with_row_major_tie_break() {
        let layer = k22();
        let transformed = transform_weights(&layer, 1.0).unwrap();
        let edges = build_filtration(&layer, &transformed);
        let order: Vec<_> = edges.iter().map(|e| (e.out_idx, e.in_idx, e.weight)).collect();
        assert_eq!(
            order,
            vec![(0, 0, 1.0), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 0.5)]
        );
    }

    #[test]
    fn filtration_of_equal_weights_is_row_major() {
        let layer = WeightedBipartiteLayer::from_rows(&[vec![3.0, 3.0], vec![3.0, 3.0]]).unwrap();
        let transformed = transform_weights(&layer, 3.0).unwrap();
        let edges = build_filtration(&layer, &transformed);
        let order: Vec<_> = edges.iter().map(|e| (e.out_idx, e.in_idx)).collect();
        assert_eq!(order, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
    }

    #[test]
    fn filtration_keeps_already_sorted_input() {
        let layer = WeightedBipartiteLayer::from_rows(&[vec![0.9, 0.8], vec![0.7, 0.6]]).unwrap();
        let transformed = transform_weights(&layer, 1.0).unwrap();
        let edges = build_filtration(&layer, &transformed);
        let order: Vec<_> = edges.iter().map(|e| (e.out_idx, e.in_idx)).collect();
        assert_eq!(order, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
    }

    #[test]
    fn diagram_of_k22_example() {
        let diagram = compute_diagram(&k22(), 1.0, EssentialPolicy::Skip).unwrap();
        let deaths: Vec<_> = diagram.deaths().collect();
        assert_eq!(deaths, vec![1.0, 0.5, 0.5]);
        assert_eq!(diagram.essential_count(), 1);
        assert_eq!(diagram.finite_points().len(), 3);
        assert!(diagram.finite_points().iter().all(|p| p.birth == 1.0));
    }

    #[test]
    fn diagram_of_constant_layer_has_unit_deaths() {
        let layer = WeightedBipartiteLayer::dense(3, 4, vec![0.2; 12]).unwrap();
        let diagram = compute_diagram(&layer, 0.2, EssentialPolicy::Skip).unwrap();
        assert!(diagram.deaths().all(|d| d == 1.0));
        assert_eq!(diagram.finite_points().len(), 6);
        assert_eq!(diagram.essential_count(), 1);
    }

    #[test]
    fn disconnected_sparse_layer_has_two_essentials() {
        // Two edge groups that never touch: {i0,o0} and {i1,o1}.
        let layer = WeightedBipartiteLayer::sparse(
            2,
            2,
            vec![
                SparseEntry { row: 0, col: 0, weight: 0.9 },
                SparseEntry { row: 1, col: 1, weight: 0.4 },
            ],
        )
        .unwrap();
        let diagram = compute_diagram(&layer, 0.9, EssentialPolicy::Skip).unwrap();
        assert_eq!(diagram.essential_count(), 2);
        assert_eq!(diagram.finite_points().len(), 2);
    }

    #[test]
    fn oracle_matches_k22_by_enumeration() {
        // All 4 spanning trees of K_{2,2} drop one edge; the best drops a 0.5.
        let deaths = mst_oracle(&k22(), 1.0).unwrap();
        assert_eq!(deaths, vec![1.0, 0.5, 0.5]);
    }

    #[test]
    fn oracle_single_edge_layer() {
        let layer = WeightedBipartiteLayer::from_rows(&[vec![-0.3]]).unwrap();
        assert_eq!(mst_oracle(&layer, 0.6).unwrap(), vec![0.5]);
    }

    #[test]
    fn oracle_constant_k33_selects_five_edges() {
        let layer = WeightedBipartiteLayer::dense(3, 3, vec![2.0; 9]).unwrap();
        assert_eq!(mst_oracle(&layer, 2.0).unwrap(), vec![1.0; 5]);
    }

    #[test]
    fn repeated_computation_is_identical() {
        let layer = WeightedBipartiteLayer::from_rows(&[
            vec![0.3, -0.3, 0.9],
            vec![0.9, 0.3, -0.1],
        ])
        .unwrap();
        let a = compute_diagram(&layer, 0.9, EssentialPolicy::Skip).unwrap();
        let b = compute_diagram(&layer, 0.9, EssentialPolicy::Skip).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn diagram_deaths_match_oracle_on_awkward_ties() {
        let layer = WeightedBipartiteLayer::from_rows(&[
            vec![0.5, 0.5, 0.1],
            vec![0.5, 0.2, 0.2],
            vec![0.1, 0.2, 0.5],
        ])
        .unwrap();
        let diagram = compute_diagram(&layer, 0.5, EssentialPolicy::Skip).unwrap();
        let mut deaths: Vec<_> = diagram.deaths().collect();
        deaths.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_eq!(deaths, mst_oracle(&layer, 0.5).unwrap());
    }
}
