//! Reduction from Robust t-NUkC to O(n) instances of Colorful (t-1)-NUkC.
//!
//! Phase 1 migrates all weight onto greedy mega-points (greedy at the bottom
//! radius, expansion 3), after which the bottom level may as well have radius
//! 0. Phase 2 splits the weight-sorted point order at every prefix length l:
//! the prefix becomes unit-weight red points (cover all but k_t of them), the
//! suffix keeps its migrated weight as blue. If the input is feasible, at
//! least one split yields a feasible colorful instance, and any colorful
//! solution lifts back by adding radius-0 balls at uncovered red points.

use crate::error::Error;
use crate::greedy::{greedy_clustering, GreedyOutput};
use crate::model::{
    ColorfulInstance, Point, RobustInstance, Solution, SolutionLevel, Weights,
};
use crate::Result;

/// Output of Phase 1: the greedy run, the migrated weights, and the instance
/// it answers.
#[derive(Debug, Clone)]
pub struct Phase1Context {
    pub greedy: GreedyOutput,
    pub lambda: Weights,
    /// Bottom radius of the input instance (the greedy scale).
    pub r_bottom: f64,
    /// The reduced instance (radii r_i + 3 r_t, bottom 0, weights lambda).
    pub reduced: RobustInstance,
}

/// Migrate weight onto mega-points and zero out the bottom radius.
pub fn phase1(instance: &RobustInstance) -> Result<(RobustInstance, Phase1Context)> {
    let t = instance.radii.len();
    if t < 2 {
        return Err(Error::input("phase 1 needs at least two radius levels"));
    }
    let r_t = instance.radii[t - 1];
    let all: Vec<Point> = instance.space.points().collect();
    let greedy = greedy_clustering(&instance.space, &all, r_t, 3.0, &instance.weights)?;
    let lambda = greedy.migrated_weights(instance.space.n());
    debug_assert_eq!(lambda.total(), instance.weights.total());

    let mut radii: Vec<f64> = instance.radii[..t - 1].iter().map(|r| r + 3.0 * r_t).collect();
    radii.push(0.0);
    let reduced = RobustInstance {
        space: instance.space.clone(),
        radii,
        budgets: instance.budgets.clone(),
        weights: lambda.clone(),
        target: instance.target,
        restriction: instance.restriction.clone(),
    };
    Ok((
        reduced.clone(),
        Phase1Context {
            greedy,
            lambda,
            r_bottom: r_t,
            reduced,
        },
    ))
}

/// Lift a solution of the Phase-1 instance back: expand every ball by 3 r_t.
pub fn phase1_lift(ctx: &Phase1Context, solution: &Solution) -> Result<Solution> {
    let covered = solution.coverage_mask(&ctx.reduced.space)?;
    let lambda_covered = ctx.lambda.sum_covered(&covered);
    if lambda_covered < ctx.reduced.target {
        return Err(Error::contract(format!(
            "phase-1 lift needs migrated coverage {} but the solution reaches {lambda_covered}",
            ctx.reduced.target
        )));
    }
    Ok(solution.expand(3.0 * ctx.r_bottom))
}

/// One split of the Phase-2 family.
#[derive(Debug, Clone)]
pub struct SplitContext {
    pub ell: usize,
    /// All points ordered by nonincreasing migrated weight, ids breaking ties.
    pub sigma: Vec<Point>,
    pub red_set: Vec<Point>,
    pub omega_red: Weights,
    pub omega_blue: Weights,
    pub target_red: u64,
    pub target_blue: u64,
    /// Bottom-level budget of the Phase-1 instance (k_t).
    pub k_bottom: usize,
}

/// Split a bottom-radius-0 robust instance into |X|+1 colorful instances,
/// one per prefix length of the weight ordering.
pub fn phase2_split(
    instance: &RobustInstance,
) -> Result<Vec<(ColorfulInstance, SplitContext)>> {
    let t = instance.radii.len();
    if t < 2 {
        return Err(Error::input("phase 2 needs at least two radius levels"));
    }
    if instance.radii[t - 1] != 0.0 {
        return Err(Error::input("phase 2 requires bottom radius 0"));
    }
    let n = instance.space.n();
    let mut sigma: Vec<Point> = instance.space.points().collect();
    sigma.sort_by(|&a, &b| {
        instance
            .weights
            .get(b)
            .cmp(&instance.weights.get(a))
            .then(a.cmp(&b))
    });
    let k_bottom = instance.budgets[t - 1];

    let mut out = Vec::with_capacity(n + 1);
    for ell in 0..=n {
        let red_set: Vec<Point> = sigma[..ell].to_vec();
        let mut omega_red = Weights::zero(n);
        let mut omega_blue = Weights::zero(n);
        let mut lambda_red = 0u64;
        for &p in &red_set {
            omega_red.0[p] = 1;
            lambda_red += instance.weights.get(p);
        }
        for &p in &sigma[ell..] {
            omega_blue.0[p] = instance.weights.get(p);
        }
        let target_red = (ell as u64).saturating_sub(k_bottom as u64);
        let target_blue = instance.target.saturating_sub(lambda_red);
        let colorful = ColorfulInstance {
            space: instance.space.clone(),
            radii: instance.radii[..t - 1].to_vec(),
            budgets: instance.budgets[..t - 1].to_vec(),
            red: omega_red.clone(),
            blue: omega_blue.clone(),
            target_red,
            target_blue,
            restriction: instance.restriction.clone(),
        };
        out.push((
            colorful,
            SplitContext {
                ell,
                sigma: sigma.clone(),
                red_set,
                omega_red,
                omega_blue,
                target_red,
                target_blue,
                k_bottom,
            },
        ));
    }
    Ok(out)
}

/// Lift a colorful solution back to the Phase-1 robust instance by adding a
/// radius-0 ball at every red point the solution missed.
pub fn phase2_lift(
    ctx: &SplitContext,
    reduced: &RobustInstance,
    solution: &Solution,
) -> Result<Solution> {
    let covered = solution.coverage_mask(&reduced.space)?;
    let red_covered = ctx.omega_red.sum_covered(&covered);
    let blue_covered = ctx.omega_blue.sum_covered(&covered);
    if red_covered < ctx.target_red || blue_covered < ctx.target_blue {
        return Err(Error::contract(format!(
            "colorful solution covers (red {red_covered}, blue {blue_covered}) short of \
             targets ({}, {})",
            ctx.target_red, ctx.target_blue
        )));
    }
    let uncovered_red: Vec<Point> = ctx
        .red_set
        .iter()
        .copied()
        .filter(|&p| !covered[p])
        .collect();
    if uncovered_red.len() > ctx.k_bottom {
        return Err(Error::contract(format!(
            "{} uncovered red points exceed the bottom budget {}",
            uncovered_red.len(),
            ctx.k_bottom
        )));
    }
    let mut levels: Vec<SolutionLevel> = solution.levels.clone();
    levels.push(SolutionLevel {
        realized_radius: 0.0,
        centers: uncovered_red,
    });
    Ok(Solution { levels })
}
