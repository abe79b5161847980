//! Zero-dimensional persistence diagrams of the descending-weight filtration.

use serde::{Deserialize, Serialize};

/// How connected components that survive the whole filtration are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EssentialPolicy {
    /// Surviving components contribute nothing (default for dense layers).
    Skip,
    /// Each surviving component contributes one (1, 0) point when iterating
    /// or summing (used by the convolution paths).
    DeathZero,
}

/// A finite diagram point. Births are always 1; the death is the transformed
/// weight of the edge that merged two components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistencePoint {
    pub birth: f64,
    pub death: f64,
}

impl PersistencePoint {
    pub fn new(death: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&death));
        Self { birth: 1.0, death }
    }

    /// Lifespan |death - birth| of the feature.
    pub fn persistence(&self) -> f64 {
        (self.birth - self.death).abs()
    }
}

/// Multiset of merge points plus the count of surviving components.
#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceDiagram {
    points: Vec<PersistencePoint>,
    essential_count: usize,
    policy: EssentialPolicy,
}

impl PersistenceDiagram {
    pub(crate) fn new(
        points: Vec<PersistencePoint>,
        essential_count: usize,
        policy: EssentialPolicy,
    ) -> Self {
        Self {
            points,
            essential_count,
            policy,
        }
    }

    /// Finite merge points, in filtration order (deaths non-ascending).
    pub fn finite_points(&self) -> &[PersistencePoint] {
        &self.points
    }

    /// Components that survive the entire filtration.
    pub fn essential_count(&self) -> usize {
        self.essential_count
    }

    pub fn policy(&self) -> EssentialPolicy {
        self.policy
    }

    /// Same diagram under a different essential-component policy.
    pub fn with_policy(mut self, policy: EssentialPolicy) -> Self {
        self.policy = policy;
        self
    }

    /// Deaths of every point the policy exposes: finite merges first, then
    /// one zero per surviving component under `DeathZero`.
    pub fn deaths(&self) -> impl Iterator<Item = f64> + '_ {
        let essential = match self.policy {
            EssentialPolicy::Skip => 0,
            EssentialPolicy::DeathZero => self.essential_count,
        };
        self.points
            .iter()
            .map(|p| p.death)
            .chain(std::iter::repeat_n(0.0, essential))
    }

    /// Number of points the policy exposes.
    pub fn point_count(&self) -> usize {
        match self.policy {
            EssentialPolicy::Skip => self.points.len(),
            EssentialPolicy::DeathZero => self.points.len() + self.essential_count,
        }
    }
}
