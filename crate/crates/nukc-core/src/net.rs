//! Reduction between (t+1)-NUkC and unweighted Robust t-NUkC.
//!
//! A 2r-net of the space stands in for the whole point set: covering all but
//! k_{t+1} net points with slightly enlarged balls is equivalent (up to a
//! constant) to covering everything with the original radii, because the
//! dropped net points can each absorb one bottom-level ball. The radii grow
//! by 2*r_{t+1}: the proof moves every center to its nearest net point, which
//! is at distance at most 2*r_{t+1}.
//!
//! Lifting a beta-approximate robust solution back yields per-level realized
//! radius beta*r'_i + 2r_{t+1} <= (3*beta + 2) * r_i.

use crate::error::Error;
use crate::model::{
    MetricSpace, NukcInstance, Point, RobustInstance, Solution, SolutionLevel, Weights,
};
use crate::Result;
use std::sync::Arc;

/// A net with its assignment map and enough context to lift solutions back.
#[derive(Debug, Clone)]
pub struct NetContext {
    /// Net point ids in the original space, in selection (id) order.
    pub net: Vec<Point>,
    /// For every original point: index into `net` of its assigned net point.
    pub assign: Vec<usize>,
    /// The net scale, 2 * r_{t+1}.
    pub net_radius: f64,
    /// Bottom-level budget of the original instance (k_{t+1}).
    pub bottom_budget: usize,
    /// Original radii including r_{t+1}.
    pub original_radii: Vec<f64>,
}

/// Greedy maximal net: scan points in id order, keep a point iff it is
/// strictly farther than `radius` from every kept point. Each point is then
/// assigned to its nearest net point, smallest id winning ties.
pub fn build_net(space: &MetricSpace, radius: f64) -> Result<(Vec<Point>, Vec<usize>)> {
    if !(radius >= 0.0) {
        return Err(Error::input(format!("net radius {radius} must be nonnegative")));
    }
    let mut net: Vec<Point> = Vec::new();
    for p in space.points() {
        if net.iter().all(|&q| space.d(p, q) > radius) {
            net.push(p);
        }
    }
    let assign: Vec<usize> = space
        .points()
        .map(|p| {
            let mut best = 0usize;
            for (i, &q) in net.iter().enumerate() {
                if space.d(p, q) < space.d(p, net[best]) {
                    best = i;
                }
            }
            best
        })
        .collect();
    Ok((net, assign))
}

/// Reduce a (t+1)-level NUkC instance to an unweighted Robust t-NUkC instance
/// on the subspace induced by a 2r_{t+1}-net.
pub fn reduce_to_robust(instance: &NukcInstance) -> Result<(RobustInstance, NetContext)> {
    let t_plus_1 = instance.radii.len();
    if t_plus_1 < 2 {
        return Err(Error::input("reduction needs at least two radius levels"));
    }
    let r_bottom = instance.radii[t_plus_1 - 1];
    let (net, assign) = build_net(&instance.space, 2.0 * r_bottom)?;
    let sub = Arc::new(instance.space.restrict(&net)?);
    let k_bottom = instance.budgets[t_plus_1 - 1];
    let target = (net.len() as u64).saturating_sub(k_bottom as u64);
    let radii: Vec<f64> = instance.radii[..t_plus_1 - 1]
        .iter()
        .map(|r| r + 2.0 * r_bottom)
        .collect();
    let robust = RobustInstance {
        space: sub,
        radii,
        budgets: instance.budgets[..t_plus_1 - 1].to_vec(),
        weights: Weights::unit(net.len()),
        target,
        restriction: None,
    };
    Ok((
        robust,
        NetContext {
            net,
            assign,
            net_radius: 2.0 * r_bottom,
            bottom_budget: k_bottom,
            original_radii: instance.radii.clone(),
        },
    ))
}

/// Lift a robust solution (on the net subspace) back to the original
/// instance: every ball expands by 2*r_{t+1} and each uncovered net point
/// receives its own ball of radius 2*r_{t+1} at the bottom level.
pub fn lift_robust_solution(
    ctx: &NetContext,
    robust: &RobustInstance,
    solution: &Solution,
) -> Result<Solution> {
    if solution.levels.len() != robust.radii.len() {
        return Err(Error::input("solution level count does not match the robust instance"));
    }
    let sub_space = &robust.space;
    let covered_sub = solution.coverage_mask(sub_space)?;
    let covered_count = covered_sub.iter().filter(|&&c| c).count() as u64;
    if covered_count < robust.target {
        return Err(Error::contract(format!(
            "robust solution covers {covered_count} net points, needs {}",
            robust.target
        )));
    }
    let uncovered: Vec<Point> = (0..sub_space.n())
        .filter(|&i| !covered_sub[i])
        .map(|i| ctx.net[i])
        .collect();
    if uncovered.len() > ctx.bottom_budget {
        return Err(Error::contract(format!(
            "{} uncovered net points exceed the bottom budget {}",
            uncovered.len(),
            ctx.bottom_budget
        )));
    }
    let mut levels: Vec<SolutionLevel> = solution
        .levels
        .iter()
        .map(|lvl| SolutionLevel {
            realized_radius: if lvl.centers.is_empty() {
                0.0
            } else {
                lvl.realized_radius + ctx.net_radius
            },
            centers: lvl.centers.iter().map(|&c| ctx.net[c]).collect(),
        })
        .collect();
    levels.push(SolutionLevel {
        realized_radius: if uncovered.is_empty() { 0.0 } else { ctx.net_radius },
        centers: uncovered,
    });
    Ok(Solution { levels })
}
