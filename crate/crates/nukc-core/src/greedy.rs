//! Weighted greedy clustering.
//!
//! Repeatedly picks the point of the whole space whose radius-r ball captures
//! the most remaining weight of the working set, then removes everything
//! within the expanded radius gamma*r as that pick's cluster. The pick is
//! called a mega-point; clusters partition the working set, the captured
//! ball weights are nonincreasing in pick order, and distinct mega-points
//! are more than (gamma-1)*r apart. For gamma >= 3 the first k cluster
//! weights dominate the weight covered by any k balls of radius r.
//!
//! Ties in the argmax break to the smallest point id so that runs are
//! deterministic and replayable.

use crate::error::Error;
use crate::model::{MetricSpace, Point, Weights};
use crate::Result;

/// Result of a greedy clustering run: mega-points in pick order with their
/// clusters and weights, plus the parameters for replay.
#[derive(Debug, Clone)]
pub struct GreedyOutput {
    /// Mega-points in the order they were picked.
    pub order: Vec<Point>,
    /// clusters[i] is the cluster of order[i]; together they partition Y.
    pub clusters: Vec<Vec<Point>>,
    /// weights[i] is the total input weight of clusters[i].
    pub weights: Vec<u64>,
    /// captured[i] is the weight inside the radius-r ball at pick time, the
    /// quantity the argmax maximizes. It is nonincreasing along the pick
    /// order; the expanded cluster weights need not be.
    pub captured: Vec<u64>,
    /// For each point of the space: index into `order` of the cluster owning
    /// it, or None if the point was not in Y.
    pub owner: Vec<Option<usize>>,
    pub radius: f64,
    pub gamma: f64,
}

impl GreedyOutput {
    /// Weight captured when a point would carry its cluster's weight.
    pub fn migrated_weights(&self, n: usize) -> Weights {
        let mut w = Weights::zero(n);
        for (i, &p) in self.order.iter().enumerate() {
            w.0[p] += self.weights[i];
        }
        w
    }
}

/// Run the clustering over working set `y` inside `space`.
///
/// Candidates for each pick range over the whole space, not just the working
/// set; candidates whose ball captures zero weight stay eligible as long as
/// the ball meets the working set.
pub fn greedy_clustering(
    space: &MetricSpace,
    y: &[Point],
    radius: f64,
    gamma: f64,
    omega: &Weights,
) -> Result<GreedyOutput> {
    if !(radius >= 0.0) {
        return Err(Error::input(format!("radius {radius} must be nonnegative")));
    }
    if !(gamma >= 1.0) {
        return Err(Error::input(format!("gamma {gamma} must be at least 1")));
    }
    if omega.len() != space.n() {
        return Err(Error::input("weight vector length must match the point count"));
    }
    let mut in_y = vec![false; space.n()];
    for &p in y {
        if !space.contains(p) {
            return Err(Error::input(format!("working-set point {p} is not in the space")));
        }
        in_y[p] = true;
    }
    for p in space.points() {
        if !in_y[p] && omega.get(p) > 0 {
            return Err(Error::input(format!(
                "weight assigned to point {p} outside the working set"
            )));
        }
    }

    let n = space.n();
    let mut active = in_y;
    let mut remaining = y.len();
    let mut order = Vec::new();
    let mut clusters = Vec::new();
    let mut weights = Vec::new();
    let mut captured = Vec::new();
    let mut owner = vec![None; n];

    while remaining > 0 {
        let mut best: Option<(u64, Point)> = None;
        for q in space.points() {
            let mut touches = false;
            let mut w = 0u64;
            for v in space.points() {
                if active[v] && space.d(q, v) <= radius {
                    touches = true;
                    w += omega.get(v);
                }
            }
            if !touches {
                continue;
            }
            match best {
                Some((bw, _)) if bw >= w => {}
                _ => best = Some((w, q)),
            }
        }
        let (cap, p) = best.expect("nonempty working set always admits a candidate");
        let idx = order.len();
        let mut cluster = Vec::new();
        for v in space.points() {
            if active[v] && space.d(p, v) <= gamma * radius {
                active[v] = false;
                owner[v] = Some(idx);
                cluster.push(v);
            }
        }
        remaining -= cluster.len();
        weights.push(omega.sum_over(cluster.iter().copied()));
        captured.push(cap);
        clusters.push(cluster);
        order.push(p);
    }

    Ok(GreedyOutput {
        order,
        clusters,
        weights,
        captured,
        owner,
        radius,
        gamma,
    })
}

/// Total weight of the first min(k, |M|) clusters in pick order.
pub fn first_k_weight(output: &GreedyOutput, k: usize) -> u64 {
    output.weights.iter().take(k).sum()
}
