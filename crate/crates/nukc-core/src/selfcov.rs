//! Reduction of Colorful 2-NUkC to Colorful 2-NUkC with bottom radius 0.
//!
//! Phase 1 migrates blue weight onto mega-points of a greedy run at radius
//! r_2 (expansion 3) and sets the new radii to (r_1 + 6 r_2, 5 r_2). Phase 2
//! migrates red weight onto mega-points of a second greedy run at the new
//! bottom radius r'_2, pulls blue weight along the first-intersecting-cluster
//! map phi (which moves weight at most 4 r'_2), and zeroes the bottom radius;
//! the top radius becomes r'_1 + 4 r'_2 = r_1 + 26 r_2.
//!
//! The mapping procedure pairs mega-points with the balls that map to them so
//! that all but the last pair have equal sizes; it carries the counting
//! argument behind the feasibility direction and is exercised directly by
//! property tests.

use crate::error::Error;
use crate::greedy::{greedy_clustering, GreedyOutput};
use crate::model::{ColorfulInstance, Point, Solution, Weights};
use crate::Result;

/// A ball handed to the mapping procedure.
#[derive(Debug, Clone, Copy)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

/// Pairs (N_l, D_l) built by the mapping procedure. Points are ids in the
/// underlying space; balls are indices into the input ball list.
#[derive(Debug, Clone)]
pub struct MappingPairs {
    pub pairs: Vec<(Vec<Point>, Vec<usize>)>,
}

/// Pair mega-points with the balls mapping to them.
///
/// `m_hat` lists the mega-points in their greedy order and `clusters` is
/// parallel to it. Every ball maps to the first mega-point whose cluster it
/// intersects; a ball meeting no cluster is an input error. Pairs absorb
/// consecutive mega-points until the pending counter reaches zero, so all but
/// the last pair satisfy |N_l| = |D_l|.
pub fn mapping_procedure(
    space: &crate::model::MetricSpace,
    m_hat: &[Point],
    clusters: &[Vec<Point>],
    balls: &[Ball],
) -> Result<MappingPairs> {
    if m_hat.len() != clusters.len() {
        return Err(Error::input("mapping: clusters must parallel the mega-point order"));
    }
    let m = m_hat.len();
    let mut preimage: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (b, ball) in balls.iter().enumerate() {
        let target = (0..m).find(|&i| {
            clusters[i]
                .iter()
                .any(|&y| space.d(ball.center, y) <= ball.radius)
        });
        match target {
            Some(i) => preimage[i].push(b),
            None => {
                return Err(Error::input(format!(
                    "ball {b} (center {}, radius {}) meets no cluster",
                    ball.center, ball.radius
                )))
            }
        }
    }

    let mut consumed = vec![false; m];
    let mut pairs = Vec::new();
    loop {
        let Some(start) = (0..m).find(|&i| !consumed[i] && !preimage[i].is_empty()) else {
            break;
        };
        let mut n_pts = vec![m_hat[start]];
        let mut d_balls = preimage[start].clone();
        consumed[start] = true;
        let mut pending = preimage[start].len() as i64 - 1;
        let mut i = start;
        while pending > 0 && i + 1 < m {
            i += 1;
            pending += preimage[i].len() as i64 - 1;
            n_pts.push(m_hat[i]);
            d_balls.extend(preimage[i].iter().copied());
            consumed[i] = true;
        }
        pairs.push((n_pts, d_balls));
    }
    Ok(MappingPairs { pairs })
}

/// Output of the blue phase: the greedy run over blue weight and the reduced
/// instance with radii (r_1 + 6 r_2, 5 r_2).
#[derive(Debug, Clone)]
pub struct BluePhaseContext {
    pub greedy: GreedyOutput,
    pub lambda_blue: Weights,
    /// r_2 of the input instance.
    pub r_bottom: f64,
    pub reduced: ColorfulInstance,
}

/// Migrate blue weight onto mega-points.
pub fn phase1_blue(instance: &ColorfulInstance) -> Result<(ColorfulInstance, BluePhaseContext)> {
    if instance.radii.len() != 2 {
        return Err(Error::input("self-coverage phase 1 expects exactly two levels"));
    }
    let r2 = instance.radii[1];
    let all: Vec<Point> = instance.space.points().collect();
    let greedy = greedy_clustering(&instance.space, &all, r2, 3.0, &instance.blue)?;
    let lambda_blue = greedy.migrated_weights(instance.space.n());
    debug_assert_eq!(lambda_blue.total(), instance.blue.total());
    let reduced = ColorfulInstance {
        space: instance.space.clone(),
        radii: vec![instance.radii[0] + 6.0 * r2, 5.0 * r2],
        budgets: instance.budgets.clone(),
        red: instance.red.clone(),
        blue: lambda_blue.clone(),
        target_red: instance.target_red,
        target_blue: instance.target_blue,
        restriction: instance.restriction.clone(),
    };
    Ok((
        reduced.clone(),
        BluePhaseContext {
            greedy,
            lambda_blue,
            r_bottom: r2,
            reduced,
        },
    ))
}

/// Output of the red phase: the greedy run over red weight, the
/// first-intersecting-cluster map phi, and the reduced instance with radii
/// (r'_1 + 4 r'_2, 0).
#[derive(Debug, Clone)]
pub struct RedPhaseContext {
    pub greedy: GreedyOutput,
    /// For every point: the mega-point (by greedy index) its blue weight
    /// migrates to.
    pub phi: Vec<usize>,
    pub chi_red: Weights,
    pub chi_blue: Weights,
    /// r'_2 of the intermediate instance.
    pub r_bottom: f64,
    pub reduced: ColorfulInstance,
}

/// Migrate red weight within clusters and pull blue weight along phi.
pub fn phase2_red(
    intermediate: &ColorfulInstance,
) -> Result<(ColorfulInstance, RedPhaseContext)> {
    if intermediate.radii.len() != 2 {
        return Err(Error::input("self-coverage phase 2 expects exactly two levels"));
    }
    let r2p = intermediate.radii[1];
    let n = intermediate.space.n();
    let all: Vec<Point> = intermediate.space.points().collect();
    let greedy = greedy_clustering(&intermediate.space, &all, r2p, 3.0, &intermediate.red)?;

    let mut chi_red = Weights::zero(n);
    for (i, &p) in greedy.order.iter().enumerate() {
        chi_red.0[p] += greedy.weights[i];
    }

    // phi(p): first mega-point whose cluster meets B(p, r'_2). It exists
    // because p's own cluster qualifies, and lies within 4 r'_2 of p.
    let mut phi = vec![usize::MAX; n];
    let mut chi_blue = Weights::zero(n);
    for p in intermediate.space.points() {
        let target = (0..greedy.order.len()).find(|&i| {
            greedy.clusters[i]
                .iter()
                .any(|&y| intermediate.space.d(p, y) <= r2p)
        });
        let Some(i) = target else {
            return Err(Error::claim(format!("point {p} has no phi target; clusters must partition the space")));
        };
        let q = greedy.order[i];
        let moved = intermediate.space.d(p, q);
        if moved > 4.0 * r2p {
            return Err(Error::claim(format!(
                "phi moved point {p} by {moved}, beyond 4 r'_2 = {}",
                4.0 * r2p
            )));
        }
        phi[p] = i;
        chi_blue.0[q] += intermediate.blue.get(p);
    }
    debug_assert_eq!(chi_red.total(), intermediate.red.total());
    debug_assert_eq!(chi_blue.total(), intermediate.blue.total());

    let reduced = ColorfulInstance {
        space: intermediate.space.clone(),
        radii: vec![intermediate.radii[0] + 4.0 * r2p, 0.0],
        budgets: intermediate.budgets.clone(),
        red: chi_red.clone(),
        blue: chi_blue.clone(),
        target_red: intermediate.target_red,
        target_blue: intermediate.target_blue,
        restriction: intermediate.restriction.clone(),
    };
    Ok((
        reduced.clone(),
        RedPhaseContext {
            greedy,
            phi,
            chi_red,
            chi_blue,
            r_bottom: r2p,
            reduced,
        },
    ))
}

/// Lift a solution of the final instance back to the original colorful
/// instance: undo the phi migration (+4 r'_2), then the blue migration
/// (+3 r_2).
pub fn lift_self_coverage(
    blue: &BluePhaseContext,
    red: &RedPhaseContext,
    solution: &Solution,
) -> Result<Solution> {
    let covered = solution.coverage_mask(&red.reduced.space)?;
    let red_covered = red.chi_red.sum_covered(&covered);
    let blue_covered = red.chi_blue.sum_covered(&covered);
    if red_covered < red.reduced.target_red || blue_covered < red.reduced.target_blue {
        return Err(Error::contract(format!(
            "final solution covers (red {red_covered}, blue {blue_covered}) short of targets ({}, {})",
            red.reduced.target_red, red.reduced.target_blue
        )));
    }
    let intermediate = solution.expand(4.0 * red.r_bottom);
    Ok(intermediate.expand(3.0 * blue.r_bottom))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{brute_solve, random_instance, PlantVariant, DEFAULT_BRUTE_BUDGET};
    use crate::model::{verify_solution, Instance, MetricSpace};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn colorful(
        xs: &[f64],
        radii: [f64; 2],
        budgets: [usize; 2],
        red: Vec<u64>,
        blue: Vec<u64>,
        mr: u64,
        mb: u64,
    ) -> ColorfulInstance {
        ColorfulInstance {
            space: Arc::new(MetricSpace::line(xs)),
            radii: radii.to_vec(),
            budgets: budgets.to_vec(),
            red: Weights(red),
            blue: Weights(blue),
            target_red: mr,
            target_blue: mb,
            restriction: None,
        }
    }

    #[test]
    fn mapping_single_ball_single_pair() {
        let s = MetricSpace::line(&[0.0, 10.0]);
        let pairs = mapping_procedure(
            &s,
            &[0, 1],
            &[vec![0], vec![1]],
            &[Ball { center: 0, radius: 1.0 }],
        )
        .unwrap();
        assert_eq!(pairs.pairs.len(), 1);
        assert_eq!(pairs.pairs[0], (vec![0], vec![0]));
    }

    #[test]
    fn mapping_two_balls_absorb_next_megapoint() {
        let s = MetricSpace::line(&[0.0, 1.0, 10.0]);
        // both balls meet cluster of mega-point 0 first
        let pairs = mapping_procedure(
            &s,
            &[0, 2],
            &[vec![0, 1], vec![2]],
            &[
                Ball { center: 0, radius: 0.0 },
                Ball { center: 1, radius: 0.0 },
            ],
        )
        .unwrap();
        assert_eq!(pairs.pairs.len(), 1);
        assert_eq!(pairs.pairs[0].0, vec![0, 2]);
        assert_eq!(pairs.pairs[0].1, vec![0, 1]);
    }

    #[test]
    fn mapping_last_pair_may_be_unbalanced() {
        let s = MetricSpace::line(&[0.0, 1.0, 2.0, 30.0]);
        let pairs = mapping_procedure(
            &s,
            &[0, 3],
            &[vec![0, 1, 2], vec![3]],
            &[
                Ball { center: 0, radius: 0.0 },
                Ball { center: 1, radius: 0.0 },
                Ball { center: 2, radius: 0.0 },
            ],
        )
        .unwrap();
        assert_eq!(pairs.pairs.len(), 1);
        assert_eq!(pairs.pairs[0].0.len(), 2);
        assert_eq!(pairs.pairs[0].1.len(), 3);
    }

    #[test]
    fn mapping_rejects_stray_balls() {
        let s = MetricSpace::line(&[0.0, 100.0]);
        let out = mapping_procedure(
            &s,
            &[0],
            &[vec![0]],
            &[Ball { center: 1, radius: 1.0 }],
        );
        assert!(out.is_err());
    }

    #[test]
    fn blue_phase_radii_and_migration() {
        let inst = colorful(
            &[0.0, 1.0, 100.0],
            [10.0, 1.0],
            [1, 1],
            vec![0, 0, 0],
            vec![1, 1, 1],
            0,
            2,
        );
        let (reduced, ctx) = phase1_blue(&inst).unwrap();
        assert_eq!(reduced.radii, vec![16.0, 5.0]);
        assert_eq!(ctx.greedy.order, vec![0, 2]);
        assert_eq!(ctx.lambda_blue.0, vec![2, 0, 1]);
    }

    #[test]
    fn blue_phase_zero_radius_is_identity_up_to_colocation() {
        let inst = colorful(
            &[0.0, 1.0, 2.0],
            [4.0, 0.0],
            [1, 1],
            vec![1, 1, 1],
            vec![2, 0, 1],
            1,
            1,
        );
        let (reduced, _) = phase1_blue(&inst).unwrap();
        assert_eq!(reduced.radii, vec![4.0, 0.0]);
        assert_eq!(reduced.blue.0, vec![2, 0, 1]);
    }

    #[test]
    fn blue_vacuous_when_blue_weight_absent() {
        let inst = colorful(
            &[0.0, 5.0],
            [2.0, 1.0],
            [1, 1],
            vec![1, 1],
            vec![0, 0],
            1,
            0,
        );
        let (reduced, ctx) = phase1_blue(&inst).unwrap();
        assert_eq!(ctx.lambda_blue.total(), 0);
        assert_eq!(reduced.target_blue, 0);
    }

    #[test]
    fn red_phase_radius_formula() {
        let inst = colorful(
            &[0.0, 1.0, 100.0],
            [100.0, 1.0],
            [1, 1],
            vec![1, 1, 1],
            vec![1, 1, 1],
            1,
            1,
        );
        let (intermediate, _) = phase1_blue(&inst).unwrap();
        let (fin, ctx) = phase2_red(&intermediate).unwrap();
        assert_eq!(fin.radii, vec![126.0, 0.0]);
        assert_eq!(ctx.chi_red.total(), 3);
        assert_eq!(ctx.chi_blue.total(), 3);
    }

    #[test]
    fn red_phase_single_point_concentrates() {
        let inst = colorful(&[5.0], [3.0, 1.0], [1, 1], vec![2], vec![3], 2, 3);
        let (intermediate, _) = phase1_blue(&inst).unwrap();
        let (fin, ctx) = phase2_red(&intermediate).unwrap();
        assert_eq!(ctx.phi, vec![0]);
        assert_eq!(fin.red.0, vec![2]);
        assert_eq!(fin.blue.0, vec![3]);
    }

    #[test]
    fn lift_with_zero_bottom_radius_is_identity() {
        let inst = colorful(
            &[0.0, 2.0, 9.0],
            [4.0, 0.0],
            [1, 1],
            vec![1, 0, 1],
            vec![0, 2, 0],
            1,
            2,
        );
        let (intermediate, bctx) = phase1_blue(&inst).unwrap();
        let (fin, rctx) = phase2_red(&intermediate).unwrap();
        let out = brute_solve(&Instance::Colorful(fin.clone()), 1.0, DEFAULT_BRUTE_BUDGET).unwrap();
        assert!(out.feasible);
        let lifted = lift_self_coverage(&bctx, &rctx, &out.witness.unwrap()).unwrap();
        let report = verify_solution(&Instance::Colorful(inst), &lifted).unwrap();
        assert!(report.pass);
        assert_eq!(report.max_dilation, 1.0);
    }

    #[test]
    fn empty_solution_lifts_on_vacuous_targets() {
        let inst = colorful(&[0.0, 50.0], [4.0, 1.0], [1, 1], vec![1, 1], vec![1, 1], 0, 0);
        let (intermediate, bctx) = phase1_blue(&inst).unwrap();
        let (fin, rctx) = phase2_red(&intermediate).unwrap();
        let empty = Solution::empty(&fin.radii);
        let lifted = lift_self_coverage(&bctx, &rctx, &empty).unwrap();
        let report = verify_solution(&Instance::Colorful(inst), &lifted).unwrap();
        assert!(report.pass);
    }

    #[test]
    fn end_to_end_feasibility_and_composed_lift_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let mut checked = 0;
        while checked < 40 {
            let inst = match random_instance(&mut rng, PlantVariant::Colorful, 7, 2) {
                Instance::Colorful(c) => c,
                _ => unreachable!(),
            };
            if !brute_solve(&Instance::Colorful(inst.clone()), 1.0, DEFAULT_BRUTE_BUDGET)
                .unwrap()
                .feasible
            {
                continue;
            }
            checked += 1;
            let (intermediate, bctx) = phase1_blue(&inst).unwrap();
            let (fin, rctx) = phase2_red(&intermediate).unwrap();
            let r1 = inst.radii[0];
            let r2 = inst.radii[1];
            assert_eq!(fin.radii[0], r1 + 26.0 * r2, "top radius must be r1 + 26 r2");
            assert_eq!(fin.radii[1], 0.0);
            let out = brute_solve(&Instance::Colorful(fin.clone()), 1.0, DEFAULT_BRUTE_BUDGET).unwrap();
            assert!(out.feasible, "feasibility must carry to the final instance");
            let witness = out.witness.unwrap();
            let lifted = lift_self_coverage(&bctx, &rctx, &witness).unwrap();
            let report = verify_solution(&Instance::Colorful(inst.clone()), &lifted).unwrap();
            assert!(report.pass, "lifted solution must verify on the input");
            // Composed additive slack from the two lifts: level 1 gets
            // (r1 + 26 r2) + 20 r2 + 3 r2 = r1 + 49 r2, level 2 gets 23 r2.
            assert!(report.levels[0].realized_radius <= r1 + 49.0 * r2 + 1e-9);
            assert!(report.levels[1].realized_radius <= 23.0 * r2 + 1e-9);
        }
    }

    #[test]
    fn mapping_invariants_and_containment_fuzzed() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..200 {
            let n = rng.gen_range(2..=10);
            let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0..30) as f64).collect();
            let s = MetricSpace::line(&xs);
            let r = rng.gen_range(0..4) as f64;
            let w = Weights((0..n).map(|_| rng.gen_range(0..3)).collect());
            let all: Vec<Point> = (0..n).collect();
            let g = greedy_clustering(&s, &all, r, 3.0, &w).unwrap();
            let balls: Vec<Ball> = (0..rng.gen_range(1..=4))
                .map(|_| Ball {
                    center: rng.gen_range(0..n),
                    radius: r,
                })
                .collect();
            let pairs = mapping_procedure(&s, &g.order, &g.clusters, &balls).unwrap();

            // pairwise disjoint, contiguous, nonempty; D partitions the balls
            let mut seen_pts: Vec<Point> = Vec::new();
            let mut seen_balls = vec![false; balls.len()];
            for (idx, (n_pts, d_balls)) in pairs.pairs.iter().enumerate() {
                assert!(!n_pts.is_empty() && !d_balls.is_empty());
                let positions: Vec<usize> = n_pts
                    .iter()
                    .map(|p| g.order.iter().position(|q| q == p).unwrap())
                    .collect();
                for w in positions.windows(2) {
                    assert_eq!(w[1], w[0] + 1, "N_l must be contiguous in the order");
                }
                for p in n_pts {
                    assert!(!seen_pts.contains(p), "N_l sets must be disjoint");
                    seen_pts.push(*p);
                }
                for &b in d_balls {
                    assert!(!seen_balls[b], "D_l sets must partition the balls");
                    seen_balls[b] = true;
                }
                if idx + 1 < pairs.pairs.len() {
                    assert_eq!(n_pts.len(), d_balls.len(), "non-final pairs must balance");
                } else {
                    assert!(n_pts.len() <= d_balls.len());
                }
                // containment: each ball fits inside B(q, 5r) for some q in N_l
                for &b in d_balls {
                    let members: Vec<Point> = (0..n)
                        .filter(|&x| s.d(balls[b].center, x) <= balls[b].radius)
                        .collect();
                    let contained = n_pts.iter().any(|&q| {
                        members.iter().all(|&x| s.d(q, x) <= 5.0 * r)
                    });
                    assert!(contained, "ball {b} escapes every 5r-ball of its pair");
                }
            }
            assert!(seen_balls.iter().all(|&b| b), "every ball must be paired");
        }
    }

    #[test]
    fn feasibility_direction_preserves_level1_centers() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let mut checked = 0;
        while checked < 10 {
            let inst = match random_instance(&mut rng, PlantVariant::Colorful, 6, 2) {
                Instance::Colorful(c) => c,
                _ => unreachable!(),
            };
            let base = brute_solve(&Instance::Colorful(inst.clone()), 1.0, DEFAULT_BRUTE_BUDGET).unwrap();
            if !base.feasible {
                continue;
            }
            checked += 1;
            let original = base.witness.unwrap();
            let (intermediate, _) = phase1_blue(&inst).unwrap();
            let (fin, _) = phase2_red(&intermediate).unwrap();
            // restrict the level-1 center search to the original witness's
            // level-1 centers; some choice must stay feasible
            let candidates = &original.levels[0].centers;
            let k1 = fin.budgets[0];
            let k2 = fin.budgets[1];
            let n = fin.space.n();
            let all: Vec<Point> = (0..n).collect();
            let mut found = false;
            'outer: for pick in subsets_upto(candidates, k1) {
                for zeros in subsets_upto(&all, k2) {
                    let sol = Solution {
                        levels: vec![
                            crate::model::SolutionLevel {
                                realized_radius: fin.radii[0],
                                centers: pick.clone(),
                            },
                            crate::model::SolutionLevel {
                                realized_radius: 0.0,
                                centers: zeros,
                            },
                        ],
                    };
                    if verify_solution(&Instance::Colorful(fin.clone()), &sol)
                        .map(|r| r.pass)
                        .unwrap_or(false)
                    {
                        found = true;
                        break 'outer;
                    }
                }
            }
            assert!(found, "final instance admits no center-preserving witness");
        }
    }

    fn subsets_upto(items: &[Point], k: usize) -> Vec<Vec<Point>> {
        let mut out = vec![Vec::new()];
        for &it in items {
            let mut extra = Vec::new();
            for s in &out {
                if s.len() < k {
                    let mut t = s.clone();
                    t.push(it);
                    extra.push(t);
                }
            }
            out.extend(extra);
        }
        out
    }
}
