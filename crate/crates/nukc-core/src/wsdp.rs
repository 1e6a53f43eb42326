//! Exact solver for well-separated Colorful 2-NUkC with bottom radius 0.
//!
//! The candidate set Y for the top-level balls is pairwise more than 2 r_1
//! apart, so the balls B(y, r_1) are disjoint and partition the space into
//! per-candidate blocks plus a remainder. The outer dynamic program walks the
//! blocks deciding, per block, to skip it, to cover it whole with one r_1
//! ball (not available for the remainder), or to spend some radius-0 balls
//! inside it; the inner knapsack maximizes blue weight for every (ball count,
//! red weight) pair. Radius-0 balls cover whole co-location classes, so the
//! inner program runs on classes rather than raw points; this keeps the
//! decision exact on spaces with duplicate points.
//!
//! State space is O(z * k_1 * k_2 * m_r * m_b) and the witness is rebuilt by
//! walking the table back, trying choices in a fixed order.

use crate::error::Error;
use crate::model::{ColorfulInstance, Point, Solution, SolutionLevel, Weights};
use crate::Result;

const MAX_TABLE_CELLS: u64 = 200_000_000;

/// Max-blue knapsack over items with (red, blue) weights.
///
/// `table[c][r]` is the largest blue total over subsets of at most `c` items
/// whose red total, capped at `red_cap`, is at least `r`; `None` marks
/// unreachable cells.
fn knapsack_max_blue(items: &[(u64, u64)], k: usize, red_cap: usize) -> Vec<Vec<Option<u64>>> {
    let mut exact: Vec<Vec<Option<u64>>> = vec![vec![None; red_cap + 1]; k + 1];
    exact[0][0] = Some(0);
    for &(red, blue) in items {
        for c in (0..k).rev() {
            for r in 0..=red_cap {
                if let Some(b) = exact[c][r] {
                    let nr = (r + red.min(red_cap as u64) as usize).min(red_cap);
                    let cand = b + blue;
                    let cell = &mut exact[c + 1][nr];
                    if cell.map_or(true, |old| cand > old) {
                        *cell = Some(cand);
                    }
                }
            }
        }
    }
    // close downward: at most c items, red at least r
    let mut best: Vec<Vec<Option<u64>>> = vec![vec![None; red_cap + 1]; k + 1];
    for c in 0..=k {
        for r in (0..=red_cap).rev() {
            let mut cand = exact[c][r];
            if c > 0 {
                cand = max_opt(cand, best[c - 1][r]);
            }
            if r + 1 <= red_cap {
                cand = max_opt(cand, best[c][r + 1]);
            }
            best[c][r] = cand;
        }
    }
    best
}

fn max_opt(a: Option<u64>, b: Option<u64>) -> Option<u64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.max(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Recover a subset of at most `k` items with red >= `red_need` and blue >=
/// `blue_need`, if one exists. Depth-first over items in order, keeping the
/// first witness found.
fn knapsack_witness(
    items: &[(u64, u64)],
    k: usize,
    red_need: u64,
    blue_need: u64,
) -> Option<Vec<usize>> {
    fn rec(
        items: &[(u64, u64)],
        idx: usize,
        left: usize,
        red: u64,
        blue: u64,
        red_need: u64,
        blue_need: u64,
        chosen: &mut Vec<usize>,
    ) -> bool {
        if red >= red_need && blue >= blue_need {
            return true;
        }
        if idx == items.len() || left == 0 {
            return false;
        }
        // take
        chosen.push(idx);
        if rec(
            items,
            idx + 1,
            left - 1,
            red + items[idx].0,
            blue + items[idx].1,
            red_need,
            blue_need,
            chosen,
        ) {
            return true;
        }
        chosen.pop();
        // skip
        rec(items, idx + 1, left, red, blue, red_need, blue_need, chosen)
    }
    let mut chosen = Vec::new();
    rec(items, 0, k, 0, 0, red_need, blue_need, &mut chosen).then_some(chosen)
}

/// Decide whether `block` contains a subset of at most `k` points with red
/// weight at least `n_r` and blue weight at least `n_b`; returns the witness
/// subset when it does. Weights are counted per chosen point.
pub fn inner_feasible(
    block: &[Point],
    k: usize,
    n_r: u64,
    n_b: u64,
    red: &Weights,
    blue: &Weights,
) -> (bool, Vec<Point>) {
    let items: Vec<(u64, u64)> = block.iter().map(|&p| (red.get(p), blue.get(p))).collect();
    match knapsack_witness(&items, k, n_r, n_b) {
        Some(ids) => (true, ids.into_iter().map(|i| block[i]).collect()),
        None => (false, Vec::new()),
    }
}

struct Block {
    /// Candidate index in Y for real blocks; None for the remainder.
    candidate: Option<Point>,
    /// Co-location classes: (representative, members, red sum, blue sum).
    classes: Vec<(Point, Vec<Point>, u64, u64)>,
    red_total: u64,
    blue_total: u64,
}

fn build_blocks(instance: &ColorfulInstance, y: &[Point], r1: f64) -> Result<Vec<Block>> {
    let space = &instance.space;
    let n = space.n();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for (i, &c) in y.iter().enumerate() {
        for p in space.points() {
            if space.d(c, p) <= r1 {
                if let Some(prev) = owner[p] {
                    return Err(Error::input(format!(
                        "candidate balls {prev} and {i} overlap at point {p}; separation violated"
                    )));
                }
                owner[p] = Some(i);
            }
        }
    }
    let mut blocks: Vec<Block> = Vec::with_capacity(y.len() + 1);
    for (i, &c) in y.iter().enumerate() {
        let pts: Vec<Point> = space.points().filter(|&p| owner[p] == Some(i)).collect();
        blocks.push(make_block(instance, Some(c), pts));
    }
    let rest: Vec<Point> = space.points().filter(|&p| owner[p].is_none()).collect();
    blocks.push(make_block(instance, None, rest));
    Ok(blocks)
}

fn make_block(instance: &ColorfulInstance, candidate: Option<Point>, pts: Vec<Point>) -> Block {
    let space = &instance.space;
    let mut classes: Vec<(Point, Vec<Point>, u64, u64)> = Vec::new();
    for &p in &pts {
        match classes.iter_mut().find(|(rep, ..)| space.d(*rep, p) == 0.0) {
            Some((_, members, r, b)) => {
                members.push(p);
                *r += instance.red.get(p);
                *b += instance.blue.get(p);
            }
            None => classes.push((p, vec![p], instance.red.get(p), instance.blue.get(p))),
        }
    }
    let red_total = classes.iter().map(|c| c.2).sum();
    let blue_total = classes.iter().map(|c| c.3).sum();
    Block {
        candidate,
        classes,
        red_total,
        blue_total,
    }
}

/// Exact feasibility (with witness) for a well-separated colorful instance
/// with bottom radius 0. Top-level centers are restricted to the instance's
/// candidate set, whose separation must be at least twice the top radius.
pub fn solve_ws(instance: &ColorfulInstance) -> Result<Option<Solution>> {
    if instance.radii.len() != 2 {
        return Err(Error::input("well-separated solver expects exactly two levels"));
    }
    if instance.radii[1] != 0.0 {
        return Err(Error::input("well-separated solver requires bottom radius 0"));
    }
    let Some(restriction) = &instance.restriction else {
        return Err(Error::input("well-separated solver requires a candidate-center restriction"));
    };
    let r1 = instance.radii[0];
    if restriction.separation < 2.0 * r1 {
        return Err(Error::input(format!(
            "restriction separation {} is below 2 * r_1 = {}",
            restriction.separation,
            2.0 * r1
        )));
    }
    let y = &restriction.set;
    let k1 = instance.budgets[0].min(y.len());
    let k2 = instance.budgets[1];
    let mr = instance.target_red as usize;
    let mb = instance.target_blue as usize;

    let blocks = build_blocks(instance, y, r1)?;
    let z = y.len();

    let cells = (z as u64 + 2)
        * (k1 as u64 + 1)
        * (k2 as u64 + 1)
        * (mr as u64 + 1)
        * (mb as u64 + 1);
    if cells > MAX_TABLE_CELLS {
        return Err(Error::BudgetExceeded(format!(
            "well-separated DP would need {cells} cells"
        )));
    }

    // Per-block inner tables, capped at the global targets.
    let inner: Vec<Vec<Vec<Option<u64>>>> = blocks
        .iter()
        .map(|b| {
            let items: Vec<(u64, u64)> = b.classes.iter().map(|c| (c.2, c.3)).collect();
            let k_eff = k2.min(items.len());
            knapsack_max_blue(&items, k_eff, mr)
        })
        .collect();

    // layer[k1'][k2'][nr][nb], flattened
    let dim = (k1 + 1) * (k2 + 1) * (mr + 1) * (mb + 1);
    let at = |a: usize, b: usize, r: usize, bl: usize| {
        ((a * (k2 + 1) + b) * (mr + 1) + r) * (mb + 1) + bl
    };
    let mut layers: Vec<Vec<bool>> = Vec::with_capacity(blocks.len() + 1);
    let mut base = vec![false; dim];
    for a in 0..=k1 {
        for b in 0..=k2 {
            base[at(a, b, 0, 0)] = true;
        }
    }
    layers.push(base);

    for (bi, block) in blocks.iter().enumerate() {
        let prev = &layers[bi];
        let mut cur = prev.clone(); // skip case
        let class_count = block.classes.len();
        for a in 0..=k1 {
            for b in 0..=k2 {
                for r in 0..=mr {
                    for bl in 0..=mb {
                        if cur[at(a, b, r, bl)] {
                            continue;
                        }
                        // whole block with one r_1 ball (real blocks only)
                        if block.candidate.is_some() && a >= 1 {
                            let rr = r.saturating_sub(block.red_total as usize);
                            let bb = bl.saturating_sub(block.blue_total as usize);
                            if prev[at(a - 1, b, rr, bb)] {
                                cur[at(a, b, r, bl)] = true;
                                continue;
                            }
                        }
                        // zero balls inside the block
                        let t_max = b.min(class_count);
                        'outer: for t in 1..=t_max {
                            for rpick in 0..=r {
                                let Some(bgain) = inner[bi][t][rpick] else { continue };
                                let rr = r - rpick;
                                let bb = bl.saturating_sub(bgain as usize);
                                if prev[at(a, b - t, rr, bb)] {
                                    cur[at(a, b, r, bl)] = true;
                                    break 'outer;
                                }
                            }
                        }
                    }
                }
            }
        }
        layers.push(cur);
    }

    if !layers[blocks.len()][at(k1, k2, mr, mb)] {
        return Ok(None);
    }

    // Walk back, re-testing choices in the same order they were filled.
    let mut centers1: Vec<Point> = Vec::new();
    let mut centers2: Vec<Point> = Vec::new();
    let (mut a, mut b, mut r, mut bl) = (k1, k2, mr, mb);
    for bi in (0..blocks.len()).rev() {
        let prev = &layers[bi];
        let block = &blocks[bi];
        if prev[at(a, b, r, bl)] {
            continue; // skip
        }
        if block.candidate.is_some() && a >= 1 {
            let rr = r.saturating_sub(block.red_total as usize);
            let bb = bl.saturating_sub(block.blue_total as usize);
            if prev[at(a - 1, b, rr, bb)] {
                centers1.push(block.candidate.expect("real block"));
                a -= 1;
                r = rr;
                bl = bb;
                continue;
            }
        }
        let class_count = block.classes.len();
        let mut placed = false;
        'outer: for t in 1..=b.min(class_count) {
            for rpick in 0..=r {
                let Some(bgain) = inner[bi][t][rpick] else { continue };
                let rr = r - rpick;
                let bb = bl.saturating_sub(bgain as usize);
                if prev[at(a, b - t, rr, bb)] {
                    let items: Vec<(u64, u64)> =
                        block.classes.iter().map(|c| (c.2, c.3)).collect();
                    let picked = knapsack_witness(&items, t, rpick as u64, bgain)
                        .expect("table asserted this cell reachable");
                    for ci in picked {
                        centers2.push(block.classes[ci].0);
                    }
                    b -= t;
                    r = rr;
                    bl = bb;
                    placed = true;
                    break 'outer;
                }
            }
        }
        if !placed {
            return Err(Error::claim("well-separated DP backtrack lost its path"));
        }
    }

    let mut solution = Solution {
        levels: vec![
            SolutionLevel {
                realized_radius: if centers1.is_empty() { 0.0 } else { r1 },
                centers: centers1,
            },
            SolutionLevel {
                realized_radius: 0.0,
                centers: centers2,
            },
        ],
    };
    solution.canonicalize();
    Ok(Some(solution))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{brute_solve, DEFAULT_BRUTE_BUDGET};
    use crate::model::{verify_solution, CenterRestriction, Instance, MetricSpace};
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[test]
    fn inner_feasible_needs_one_point_with_both_colors() {
        // one all-red point and one all-blue point cannot meet both targets alone
        let red = Weights(vec![1, 0]);
        let blue = Weights(vec![0, 2]);
        let (ok, _) = inner_feasible(&[0, 1], 1, 1, 2, &red, &blue);
        assert!(!ok);
        let (ok, w) = inner_feasible(&[0, 1], 2, 1, 2, &red, &blue);
        assert!(ok);
        assert_eq!(w.len(), 2);
    }

    #[test]
    fn inner_feasible_trivial_targets() {
        let red = Weights(vec![1, 1]);
        let blue = Weights(vec![1, 1]);
        let (ok, w) = inner_feasible(&[0, 1], 1, 0, 0, &red, &blue);
        assert!(ok);
        assert!(w.is_empty());
        let (ok, w) = inner_feasible(&[0, 1], 2, 2, 2, &red, &blue);
        assert!(ok);
        assert_eq!(w, vec![0, 1]);
    }

    fn ws_instance(
        xs: &[f64],
        r1: f64,
        y: Vec<Point>,
        budgets: [usize; 2],
        red: Vec<u64>,
        blue: Vec<u64>,
        mr: u64,
        mb: u64,
    ) -> ColorfulInstance {
        let space = Arc::new(MetricSpace::line(xs));
        let restriction = CenterRestriction::new(&space, y, 2.0 * r1).unwrap();
        ColorfulInstance {
            space,
            radii: vec![r1, 0.0],
            budgets: budgets.to_vec(),
            red: Weights(red),
            blue: Weights(blue),
            target_red: mr,
            target_blue: mb,
            restriction: Some(restriction),
        }
    }

    #[test]
    fn one_ball_covers_both_colors() {
        let inst = ws_instance(&[0.0, 1.0], 1.0, vec![0], [1, 0], vec![1, 0], vec![0, 1], 1, 1);
        let sol = solve_ws(&inst).unwrap().expect("feasible");
        let report = verify_solution(&Instance::Colorful(inst), &sol).unwrap();
        assert!(report.pass);
        assert_eq!(report.max_dilation, 1.0);
    }

    #[test]
    fn vacuous_targets_yield_empty_solution() {
        let inst = ws_instance(&[0.0, 9.0], 1.0, vec![0], [1, 1], vec![1, 1], vec![1, 1], 0, 0);
        let sol = solve_ws(&inst).unwrap().expect("feasible");
        assert!(sol.levels.iter().all(|l| l.centers.is_empty()));
    }

    #[test]
    fn no_budget_no_coverage_is_infeasible() {
        let inst = ws_instance(&[0.0, 9.0], 1.0, vec![0], [0, 0], vec![1, 1], vec![0, 0], 1, 0);
        assert!(solve_ws(&inst).unwrap().is_none());
    }

    #[test]
    fn separation_violation_is_an_input_error() {
        let space = Arc::new(MetricSpace::line(&[0.0, 3.0, 50.0]));
        // separation recorded as 3 but 2*r1 = 4: reject
        let restriction = CenterRestriction::new(&space, vec![0, 1], 2.9).unwrap();
        let inst = ColorfulInstance {
            space,
            radii: vec![2.0, 0.0],
            budgets: vec![1, 1],
            red: Weights(vec![1, 1, 1]),
            blue: Weights(vec![1, 1, 1]),
            target_red: 1,
            target_blue: 1,
            restriction: Some(restriction),
        };
        assert!(solve_ws(&inst).is_err());
    }

    #[test]
    fn matches_brute_force_on_random_ws_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let mut done = 0;
        while done < 150 {
            let n = rng.gen_range(2..=9);
            let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0..60) as f64).collect();
            let space = Arc::new(MetricSpace::line(&xs));
            let r1 = rng.gen_range(0..5) as f64;
            // sample a well-separated candidate set greedily
            let mut y: Vec<Point> = Vec::new();
            for p in 0..n {
                if y.len() < 3 && y.iter().all(|&q| space.d(p, q) > 2.0 * r1) && rng.gen_bool(0.7) {
                    y.push(p);
                }
            }
            if y.is_empty() {
                continue;
            }
            done += 1;
            let red = Weights((0..n).map(|_| rng.gen_range(0..3)).collect());
            let blue = Weights((0..n).map(|_| rng.gen_range(0..3)).collect());
            let mr = rng.gen_range(0..=red.total());
            let mb = rng.gen_range(0..=blue.total());
            let restriction = CenterRestriction::new(&space, y, 2.0 * r1).unwrap();
            let inst = ColorfulInstance {
                space,
                radii: vec![r1, 0.0],
                budgets: vec![rng.gen_range(0..=2), rng.gen_range(0..=2)],
                red,
                blue,
                target_red: mr,
                target_blue: mb,
                restriction: Some(restriction),
            };
            let dp = solve_ws(&inst).unwrap();
            let brute = brute_solve(&Instance::Colorful(inst.clone()), 1.0, DEFAULT_BRUTE_BUDGET).unwrap();
            assert_eq!(
                dp.is_some(),
                brute.feasible,
                "DP and brute force disagree on feasibility"
            );
            if let Some(sol) = dp {
                let report = verify_solution(&Instance::Colorful(inst), &sol).unwrap();
                assert!(report.pass, "DP witness must verify");
                assert!(report.max_dilation <= 1.0, "witness must be undilated");
            }
        }
    }
}
