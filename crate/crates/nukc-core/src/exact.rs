//! Brute-force exact solvers and planted-instance generators.
//!
//! `brute_solve` enumerates every center tuple within the level budgets and
//! evaluates coverage at dilated radii; it refuses (with an explicit error)
//! rather than answer when the tuple count exceeds its budget. The planted
//! generators build instances together with a witness that verifies at
//! dilation 1, deterministically per seed.

use crate::error::Error;
use crate::model::{
    verify_solution, ColorfulInstance, Instance, MetricSpace, NukcInstance, Point, RobustInstance,
    Solution, SolutionLevel, Weights,
};
use crate::Result;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::sync::Arc;

const MAX_BRUTE_POINTS: usize = 128;

/// Default cap on the number of enumerated center tuples.
pub const DEFAULT_BRUTE_BUDGET: u64 = 10_000_000;

/// Result of an exhaustive solve.
#[derive(Debug, Clone)]
pub struct BruteOutcome {
    pub feasible: bool,
    /// Tuple maximizing (feasibility, covered weight), lexicographically
    /// smallest among the maximizers. None only when enumeration is empty.
    pub witness: Option<Solution>,
    pub best_coverage: u64,
}

#[derive(Clone)]
struct LevelSearch {
    candidates: Vec<Point>,
    size: usize,
    masks: Vec<u128>,
}

fn binom(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Combination with the given rank in lexicographic order over index sets.
fn unrank_combination(n: usize, k: usize, mut rank: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0usize;
    let mut remaining = k;
    while remaining > 0 {
        let with_next = binom((n - next - 1) as u64, (remaining - 1) as u64);
        if rank < with_next {
            out.push(next);
            remaining -= 1;
            next += 1;
        } else {
            rank -= with_next;
            next += 1;
        }
    }
    out
}

struct Objective<'a> {
    kind: ObjectiveKind<'a>,
}

enum ObjectiveKind<'a> {
    CoverAll { n: usize },
    Robust { weights: &'a Weights, target: u64 },
    Colorful {
        red: &'a Weights,
        blue: &'a Weights,
        target_red: u64,
        target_blue: u64,
    },
}

impl Objective<'_> {
    /// (meets all coverage targets, covered weight used for tie-breaking)
    fn evaluate(&self, mask: u128) -> (bool, u64) {
        match &self.kind {
            ObjectiveKind::CoverAll { n } => {
                let covered = mask.count_ones() as u64;
                (covered == *n as u64, covered)
            }
            ObjectiveKind::Robust { weights, target } => {
                let w = sum_mask(weights, mask);
                (w >= *target, w)
            }
            ObjectiveKind::Colorful {
                red,
                blue,
                target_red,
                target_blue,
            } => {
                let r = sum_mask(red, mask);
                let b = sum_mask(blue, mask);
                (r >= *target_red && b >= *target_blue, r + b)
            }
        }
    }
}

fn sum_mask(w: &Weights, mut mask: u128) -> u64 {
    let mut acc = 0u64;
    while mask != 0 {
        let p = mask.trailing_zeros() as usize;
        acc += w.get(p);
        mask &= mask - 1;
    }
    acc
}

type Best = (bool, u64, Vec<Vec<Point>>);

fn better(a: &Best, b: &Best) -> bool {
    // true if a strictly improves on b
    (a.0, a.1) > (b.0, b.1) || ((a.0, a.1) == (b.0, b.1) && a.2 < b.2)
}

fn search_inner(
    levels: &[LevelSearch],
    depth: usize,
    mask: u128,
    chosen: &mut Vec<Vec<Point>>,
    objective: &Objective,
    best: &mut Option<Best>,
) {
    if depth == levels.len() {
        let (meets, value) = objective.evaluate(mask);
        let cand = (meets, value, chosen.clone());
        if best.as_ref().map_or(true, |b| better(&cand, b)) {
            *best = Some(cand);
        }
        return;
    }
    let lvl = &levels[depth];
    let m = lvl.candidates.len();
    let k = lvl.size;
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let mut new_mask = mask;
        let picked: Vec<Point> = idx.iter().map(|&i| lvl.candidates[i]).collect();
        for &i in &idx {
            new_mask |= lvl.masks[i];
        }
        chosen.push(picked);
        search_inner(levels, depth + 1, new_mask, chosen, objective, best);
        chosen.pop();
        // next lexicographic combination
        if k == 0 {
            break;
        }
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + m - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Exhaustively decide feasibility of `instance` at the given dilation and
/// return a maximizing witness. Enumeration order is deterministic: centers
/// in id order, levels outer to inner; the parallel fan-out over the
/// outermost level merges with an order-independent total order.
pub fn brute_solve(instance: &Instance, dilation: f64, budget: u64) -> Result<BruteOutcome> {
    let space = instance.space();
    let n = space.n();
    if n > MAX_BRUTE_POINTS {
        return Err(Error::BudgetExceeded(format!(
            "brute solver handles at most {MAX_BRUTE_POINTS} points, got {n}"
        )));
    }
    if !(dilation >= 0.0) {
        return Err(Error::input("dilation must be nonnegative"));
    }
    let radii = instance.radii();
    let budgets = instance.budgets();

    let mut levels = Vec::with_capacity(radii.len());
    let mut tuples = 1u64;
    for (i, (&r, &k)) in radii.iter().zip(budgets).enumerate() {
        let candidates: Vec<Point> = match instance.restriction() {
            Some(res) if res.level == i => res.set.clone(),
            _ => (0..n).collect(),
        };
        let size = k.min(candidates.len());
        tuples = tuples.saturating_mul(binom(candidates.len() as u64, size as u64));
        let rad = dilation * r;
        let masks: Vec<u128> = candidates
            .iter()
            .map(|&c| {
                let mut m = 0u128;
                for q in space.points() {
                    if space.d(c, q) <= rad {
                        m |= 1 << q;
                    }
                }
                m
            })
            .collect();
        levels.push(LevelSearch {
            candidates,
            size,
            masks,
        });
    }
    if tuples > budget {
        return Err(Error::BudgetExceeded(format!(
            "{tuples} center tuples exceed the budget of {budget}"
        )));
    }

    let objective = match instance {
        Instance::Nukc(_) => Objective {
            kind: ObjectiveKind::CoverAll { n },
        },
        Instance::Robust(inst) => Objective {
            kind: ObjectiveKind::Robust {
                weights: &inst.weights,
                target: inst.target,
            },
        },
        Instance::Colorful(inst) => Objective {
            kind: ObjectiveKind::Colorful {
                red: &inst.red,
                blue: &inst.blue,
                target_red: inst.target_red,
                target_blue: inst.target_blue,
            },
        },
    };

    // Vacuous targets are feasible with the empty tuple.
    let trivially_feasible = match instance {
        Instance::Nukc(_) => n == 0,
        Instance::Robust(inst) => inst.target == 0,
        Instance::Colorful(inst) => inst.target_red == 0 && inst.target_blue == 0,
    };
    if trivially_feasible {
        return Ok(BruteOutcome {
            feasible: true,
            witness: Some(Solution::empty(radii)),
            best_coverage: 0,
        });
    }

    let outer = &levels[0];
    let outer_count = binom(outer.candidates.len() as u64, outer.size as u64);
    let rest = &levels[1..];

    let best = (0..outer_count)
        .into_par_iter()
        .map(|rank| {
            let idx = unrank_combination(outer.candidates.len(), outer.size, rank);
            let mut mask = 0u128;
            let picked: Vec<Point> = idx.iter().map(|&i| outer.candidates[i]).collect();
            for &i in &idx {
                mask |= outer.masks[i];
            }
            let mut prefix = vec![picked];
            let mut best: Option<Best> = None;
            search_inner(rest, 0, mask, &mut prefix, &objective, &mut best);
            best
        })
        .reduce(
            || None,
            |a, b| match (a, b) {
                (None, x) => x,
                (x, None) => x,
                (Some(a), Some(b)) => Some(if better(&a, &b) { a } else { b }),
            },
        );

    let Some((meets, value, tuple)) = best else {
        return Ok(BruteOutcome {
            feasible: false,
            witness: None,
            best_coverage: 0,
        });
    };
    let mut witness = Solution {
        levels: radii
            .iter()
            .zip(&tuple)
            .map(|(&r, centers)| SolutionLevel {
                realized_radius: if centers.is_empty() { 0.0 } else { dilation * r },
                centers: centers.clone(),
            })
            .collect(),
    };
    witness.canonicalize();
    Ok(BruteOutcome {
        feasible: meets,
        witness: Some(witness),
        best_coverage: value,
    })
}

// ---------------------------------------------------------------------------
// Planted instances
// ---------------------------------------------------------------------------

/// Which variant a planted instance should take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantVariant {
    Nukc,
    Robust,
    Colorful,
}

#[derive(Debug, Clone)]
pub struct PlantParams {
    pub seed: u64,
    pub variant: PlantVariant,
    pub n: usize,
    pub t: usize,
    /// Radius ratio between adjacent levels (>= 1).
    pub ratio: f64,
    /// Number of outliers for robust variants.
    pub outliers: usize,
    /// Per-level ball budgets; planted balls never exceed these.
    pub budgets: Vec<usize>,
    /// Scatter every cluster within half the bottom radius instead of half
    /// its own level's radius; keeps every cluster diameter at most r_t.
    pub tight: bool,
}

impl PlantParams {
    pub fn new(seed: u64, variant: PlantVariant, n: usize, t: usize) -> Self {
        PlantParams {
            seed,
            variant,
            n,
            t,
            ratio: 3.0,
            outliers: 0,
            budgets: vec![2; t],
            tight: false,
        }
    }

    pub fn with_ratio(mut self, ratio: f64) -> Self {
        self.ratio = ratio;
        self
    }

    pub fn with_outliers(mut self, outliers: usize) -> Self {
        self.outliers = outliers;
        self
    }

    pub fn with_budgets(mut self, budgets: Vec<usize>) -> Self {
        self.budgets = budgets;
        self
    }

    pub fn with_tight_clusters(mut self) -> Self {
        self.tight = true;
        self
    }
}

/// An instance bundled with the feasible solution it was built around.
#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub instance: Instance,
    pub witness: Solution,
}

/// Build an instance by scattering points inside planted balls on an integer
/// line, plus far-away outliers for robust variants. The witness passes
/// verification at dilation 1 by construction (asserted before returning).
pub fn plant_instance(params: &PlantParams) -> Result<PlantedInstance> {
    if params.t == 0 || params.budgets.len() != params.t {
        return Err(Error::input("plant: budgets must match the level count"));
    }
    if params.n < params.t + params.outliers {
        return Err(Error::input("plant: need at least one point per level plus outliers"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    // Integer radius ladder, bottom up.
    let mut radii = vec![0.0; params.t];
    let bottom = rng.gen_range(0..=2) as f64;
    radii[params.t - 1] = bottom;
    for i in (0..params.t - 1).rev() {
        let below = radii[i + 1].max(1.0);
        radii[i] = (below * params.ratio).ceil();
    }

    // One planted ball per level at least, up to the budget.
    let ball_counts: Vec<usize> = params
        .budgets
        .iter()
        .map(|&k| rng.gen_range(1..=k.max(1)))
        .collect();
    let total_balls: usize = ball_counts.iter().sum();

    // Anchors far apart: gap > 14 * r_1 keeps cluster structure unambiguous.
    let gap = (radii[0].max(1.0) * 14.0).ceil() + 1.0;
    let mut coords: Vec<f64> = Vec::with_capacity(params.n);
    let mut witness_centers: Vec<Vec<Point>> = vec![Vec::new(); params.t];
    let mut anchor = 0.0;
    for (lvl, &cnt) in ball_counts.iter().enumerate() {
        for _ in 0..cnt {
            witness_centers[lvl].push(coords.len());
            coords.push(anchor);
            anchor += gap;
        }
    }
    // Scatter the remaining interior points into planted balls.
    let interior = params.n - params.outliers - total_balls;
    for _ in 0..interior {
        let lvl = rng.gen_range(0..params.t);
        let ball = rng.gen_range(0..ball_counts[lvl]);
        let center = coords[witness_centers[lvl][ball]];
        let scatter_radius = if params.tight { radii[params.t - 1] } else { radii[lvl] };
        let span = (scatter_radius / 2.0).floor() as i64;
        let off = if span == 0 { 0 } else { rng.gen_range(-span..=span) };
        coords.push(center + off as f64);
    }
    // Outliers live beyond everything, pairwise far apart.
    let mut far = anchor + gap * 2.0;
    for _ in 0..params.outliers {
        coords.push(far);
        far += gap * 2.0;
    }

    let space = Arc::new(MetricSpace::line(&coords));
    let witness = Solution {
        levels: radii
            .iter()
            .zip(&witness_centers)
            .map(|(&r, centers)| SolutionLevel {
                realized_radius: r,
                centers: centers.clone(),
            })
            .collect(),
    };

    let covered = witness.coverage_mask(&space)?;
    let instance = match params.variant {
        PlantVariant::Nukc => {
            if params.outliers > 0 {
                return Err(Error::input("plant: outliers require a robust or colorful variant"));
            }
            Instance::Nukc(NukcInstance {
                space,
                radii,
                budgets: params.budgets.clone(),
                restriction: None,
            })
        }
        PlantVariant::Robust => {
            let weights = Weights::unit(space.n());
            let target = weights.sum_covered(&covered);
            Instance::Robust(RobustInstance {
                space,
                radii,
                budgets: params.budgets.clone(),
                weights,
                target,
                restriction: None,
            })
        }
        PlantVariant::Colorful => {
            let n = space.n();
            let red = Weights((0..n).map(|_| rng.gen_range(0..=3)).collect());
            let blue = Weights((0..n).map(|_| rng.gen_range(0..=3)).collect());
            let target_red = red.sum_covered(&covered);
            let target_blue = blue.sum_covered(&covered);
            Instance::Colorful(ColorfulInstance {
                space,
                radii,
                budgets: params.budgets.clone(),
                red,
                blue,
                target_red,
                target_blue,
                restriction: None,
            })
        }
    };

    let report = verify_solution(&instance, &witness)?;
    debug_assert!(report.pass, "planted witness must verify at dilation 1");
    if !report.pass {
        return Err(Error::claim("planted witness failed verification"));
    }
    Ok(PlantedInstance { instance, witness })
}

/// NUkC instance that is infeasible even at the given dilation: pairwise
/// distances exceed twice the dilated top radius while the total ball budget
/// stays below the point count.
pub fn gen_infeasible_nukc(seed: u64, n: usize, t: usize, dilation_margin: f64) -> Result<NukcInstance> {
    if n < 2 || t == 0 || t >= n {
        return Err(Error::input("infeasible generator needs 1 <= t < n"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut radii = vec![0.0; t];
    radii[t - 1] = rng.gen_range(1..=2) as f64;
    for i in (0..t - 1).rev() {
        radii[i] = radii[i + 1] * 30.0;
    }
    // Budgets sum to fewer than n balls.
    let mut budgets = vec![1usize; t];
    let spare = n - 1 - t.min(n - 1);
    budgets[0] += rng.gen_range(0..=spare.min(1));
    let gap = (radii[0] * dilation_margin * 2.0).ceil() + 1.0;
    let coords: Vec<f64> = (0..n).map(|i| i as f64 * gap).collect();
    Ok(NukcInstance {
        space: Arc::new(MetricSpace::line(&coords)),
        radii,
        budgets,
        restriction: None,
    })
}

/// Uniform random instance on a short integer line; used as fuzz input where
/// no planted structure is wanted.
pub fn random_instance(rng: &mut ChaCha8Rng, variant: PlantVariant, n: usize, t: usize) -> Instance {
    let span = rng.gen_range(8..40);
    let coords: Vec<f64> = (0..n).map(|_| rng.gen_range(0..span) as f64).collect();
    let space = Arc::new(MetricSpace::line(&coords));
    let mut radii: Vec<f64> = (0..t).map(|_| rng.gen_range(0..10) as f64).collect();
    radii.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let budgets: Vec<usize> = (0..t).map(|_| rng.gen_range(1..=2)).collect();
    match variant {
        PlantVariant::Nukc => Instance::Nukc(NukcInstance {
            space,
            radii,
            budgets,
            restriction: None,
        }),
        PlantVariant::Robust => {
            let weights = Weights((0..n).map(|_| rng.gen_range(0..=3)).collect());
            let target = if weights.total() == 0 {
                0
            } else {
                rng.gen_range(0..=weights.total())
            };
            Instance::Robust(RobustInstance {
                space,
                radii,
                budgets,
                weights,
                target,
                restriction: None,
            })
        }
        PlantVariant::Colorful => {
            let red = Weights((0..n).map(|_| rng.gen_range(0..=3)).collect());
            let blue = Weights((0..n).map(|_| rng.gen_range(0..=3)).collect());
            let target_red = if red.total() == 0 { 0 } else { rng.gen_range(0..=red.total()) };
            let target_blue = if blue.total() == 0 { 0 } else { rng.gen_range(0..=blue.total()) };
            Instance::Colorful(ColorfulInstance {
                space,
                radii,
                budgets,
                red,
                blue,
                target_red,
                target_blue,
                restriction: None,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::verify_solution;

    #[test]
    fn two_far_points_need_dilation_two() {
        let inst = Instance::Nukc(NukcInstance {
            space: Arc::new(MetricSpace::line(&[0.0, 10.0])),
            radii: vec![5.0],
            budgets: vec![1],
            restriction: None,
        });
        let at1 = brute_solve(&inst, 1.0, DEFAULT_BRUTE_BUDGET).unwrap();
        assert!(!at1.feasible);
        let at2 = brute_solve(&inst, 2.0, DEFAULT_BRUTE_BUDGET).unwrap();
        assert!(at2.feasible);
    }

    #[test]
    fn zero_target_feasible_with_empty_tuple() {
        let inst = Instance::Robust(RobustInstance {
            space: Arc::new(MetricSpace::line(&[0.0, 1.0])),
            radii: vec![1.0],
            budgets: vec![1],
            weights: Weights::unit(2),
            target: 0,
            restriction: None,
        });
        let out = brute_solve(&inst, 1.0, DEFAULT_BRUTE_BUDGET).unwrap();
        assert!(out.feasible);
        assert!(out.witness.unwrap().levels[0].centers.is_empty());
    }

    #[test]
    fn unreachable_red_target_is_infeasible() {
        let inst = Instance::Colorful(ColorfulInstance {
            space: Arc::new(MetricSpace::line(&[0.0, 1.0])),
            radii: vec![1.0],
            budgets: vec![1],
            red: Weights(vec![1, 0]),
            blue: Weights(vec![0, 1]),
            target_red: 5,
            target_blue: 0,
            restriction: None,
        });
        for dil in [1.0, 10.0] {
            assert!(!brute_solve(&inst, dil, DEFAULT_BRUTE_BUDGET).unwrap().feasible);
        }
    }

    #[test]
    fn budget_refusal_is_explicit() {
        let coords: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let inst = Instance::Nukc(NukcInstance {
            space: Arc::new(MetricSpace::line(&coords)),
            radii: vec![1.0, 1.0, 1.0],
            budgets: vec![6, 6, 6],
            restriction: None,
        });
        assert!(matches!(
            brute_solve(&inst, 1.0, 1000),
            Err(Error::BudgetExceeded(_))
        ));
    }

    #[test]
    fn planted_instances_verify_and_are_deterministic() {
        for variant in [PlantVariant::Nukc, PlantVariant::Robust, PlantVariant::Colorful] {
            let params = PlantParams::new(42, variant, 10, 2);
            let a = plant_instance(&params).unwrap();
            let b = plant_instance(&params).unwrap();
            assert_eq!(a.witness, b.witness, "same seed must replant identically");
            assert!(verify_solution(&a.instance, &a.witness).unwrap().pass);
        }
    }

    #[test]
    fn planted_robust_outliers_reduce_target() {
        let params = PlantParams::new(3, PlantVariant::Robust, 9, 2).with_outliers(2);
        let planted = plant_instance(&params).unwrap();
        match &planted.instance {
            Instance::Robust(r) => assert_eq!(r.target, 7),
            _ => panic!("variant mismatch"),
        }
    }

    #[test]
    fn planted_instances_are_brute_feasible_at_dilation_one() {
        for seed in 0..5 {
            let params = PlantParams::new(seed, PlantVariant::Robust, 8, 2);
            let planted = plant_instance(&params).unwrap();
            let out = brute_solve(&planted.instance, 1.0, DEFAULT_BRUTE_BUDGET).unwrap();
            assert!(out.feasible, "planted seed {seed} not brute-feasible");
        }
    }

    #[test]
    fn relabeling_preserves_feasibility_and_witness_quality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let inst = random_instance(&mut rng, PlantVariant::Robust, 6, 2);
            let Instance::Robust(r) = &inst else { unreachable!() };
            // relabel by reversing ids
            let n = r.space.n();
            let perm: Vec<usize> = (0..n).rev().collect();
            let mut d = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    d[i][j] = r.space.d(perm[i], perm[j]);
                }
            }
            let relabeled = Instance::Robust(RobustInstance {
                space: Arc::new(MetricSpace::from_matrix(&d).unwrap()),
                radii: r.radii.clone(),
                budgets: r.budgets.clone(),
                weights: Weights(perm.iter().map(|&p| r.weights.get(p)).collect()),
                target: r.target,
                restriction: None,
            });
            let a = brute_solve(&inst, 1.0, DEFAULT_BRUTE_BUDGET).unwrap();
            let b = brute_solve(&relabeled, 1.0, DEFAULT_BRUTE_BUDGET).unwrap();
            assert_eq!(a.feasible, b.feasible);
            assert_eq!(a.best_coverage, b.best_coverage);
        }
    }

    #[test]
    fn infeasible_generator_is_brute_infeasible() {
        for seed in 0..5 {
            let inst = gen_infeasible_nukc(seed, 6, 2, 30.0).unwrap();
            let out = brute_solve(&Instance::Nukc(inst), 1.0, DEFAULT_BRUTE_BUDGET).unwrap();
            assert!(!out.feasible);
        }
    }
}
