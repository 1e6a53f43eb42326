//! Round-or-cut reduction from Robust t-NUkC to well-separated instances.
//!
//! The loop maintains an ellipsoid over candidate coverage vectors
//! (dimension t*n). Each iteration queries the separation oracle at the
//! box-clamped center. The oracle either:
//!
//! - emits a hyperplane separating the query from the integer hull of
//!   coverages (total coverage below the target, a per-point cap, a per-level
//!   budget over the tree roots, or the case-2 fallback), or
//! - rounds a sparse-LP vertex into a dilated solution (case 1), or
//! - emits residual well-separated instances, one per small center subset Q;
//!   if the caller's solver finds any of them feasible the lifted solution
//!   answers the original instance, and if all fail the fallback cut is
//!   valid for every integral solution.
//!
//! Every cut is strictly violated at its query point and satisfied by the
//! coverage vector of every feasible center tuple; the latter is what the
//! acceptance suite checks by exhaustive enumeration.

use crate::error::Error;
use crate::lp::{
    simplex_vertex_solve, Constraint, LinearProgram, Relation, SimplexOutcome,
};
use crate::model::{
    verify_solution, CenterRestriction, Instance, MetricSpace, Point, RobustInstance, Solution,
    SolutionLevel, Weights,
};
use crate::Result;
use std::collections::HashMap;

/// Per-level fractional coverage, indexed as values[level * n + point].
#[derive(Debug, Clone)]
pub struct CoverageVector {
    pub t: usize,
    pub n: usize,
    pub values: Vec<f64>,
}

impl CoverageVector {
    pub fn zeros(t: usize, n: usize) -> Self {
        CoverageVector {
            t,
            n,
            values: vec![0.0; t * n],
        }
    }

    #[inline]
    pub fn get(&self, level: usize, p: Point) -> f64 {
        self.values[level * self.n + p]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Sum over levels at one point.
    pub fn point_sum(&self, p: Point) -> f64 {
        (0..self.t).map(|i| self.get(i, p)).sum()
    }
}

/// Coverage vector of an integral solution: each covered point charges the
/// smallest level index that covers it at the prescribed radii.
pub fn integral_coverage(instance: &RobustInstance, centers: &[Vec<Point>]) -> CoverageVector {
    let n = instance.space.n();
    let t = instance.radii.len();
    let mut cov = CoverageVector::zeros(t, n);
    for p in instance.space.points() {
        for (i, level_centers) in centers.iter().enumerate() {
            if level_centers
                .iter()
                .any(|&c| instance.space.d(c, p) <= instance.radii[i])
            {
                cov.values[i * n + p] = 1.0;
                break;
            }
        }
    }
    cov
}

/// All coverage vectors of feasible tuples (subsets of size up to each
/// budget, coverage at least the target), deduplicated. Exponential; meant
/// for desk-scale validity checks only.
pub fn enumerate_feasible_coverages(
    instance: &RobustInstance,
    max_tuples: u64,
) -> Result<Vec<CoverageVector>> {
    let n = instance.space.n();
    let t = instance.radii.len();
    let mut total: u64 = 1;
    for &k in &instance.budgets {
        let per: u64 = (0..=k.min(n) as u64)
            .map(|s| super_binom(n as u64, s))
            .sum();
        total = total.saturating_mul(per);
    }
    if total > max_tuples {
        return Err(Error::BudgetExceeded(format!(
            "{total} tuples exceed the enumeration budget {max_tuples}"
        )));
    }
    let mut out: Vec<CoverageVector> = Vec::new();
    let mut seen: std::collections::HashSet<Vec<u64>> = std::collections::HashSet::new();
    let mut centers: Vec<Vec<Point>> = vec![Vec::new(); t];
    enumerate_levels(instance, 0, &mut centers, &mut |centers| {
        let sol = Solution {
            levels: instance
                .radii
                .iter()
                .zip(centers.iter())
                .map(|(&r, c)| SolutionLevel {
                    realized_radius: if c.is_empty() { 0.0 } else { r },
                    centers: c.clone(),
                })
                .collect(),
        };
        let covered = sol.coverage_mask(&instance.space).expect("valid centers");
        if instance.weights.sum_covered(&covered) >= instance.target {
            let cov = integral_coverage(instance, centers);
            let key: Vec<u64> = cov.values.iter().map(|v| v.to_bits()).collect();
            if seen.insert(key) {
                out.push(cov);
            }
        }
    });
    Ok(out)
}

fn super_binom(n: u64, k: u64) -> u64 {
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

fn enumerate_levels(
    instance: &RobustInstance,
    level: usize,
    centers: &mut Vec<Vec<Point>>,
    visit: &mut impl FnMut(&Vec<Vec<Point>>),
) {
    if level == instance.radii.len() {
        visit(centers);
        return;
    }
    let n = instance.space.n();
    let k = instance.budgets[level].min(n);
    let mut subset: Vec<Point> = Vec::new();
    fn rec(
        n: usize,
        k: usize,
        start: usize,
        subset: &mut Vec<Point>,
        f: &mut impl FnMut(&[Point]),
    ) {
        f(subset);
        if subset.len() == k {
            return;
        }
        for p in start..n {
            subset.push(p);
            rec(n, k, p + 1, subset, f);
            subset.pop();
        }
    }
    let mut go = |s: &[Point]| {
        centers[level] = s.to_vec();
        enumerate_levels(instance, level + 1, centers, visit);
    };
    rec(n, k, 0, &mut subset, &mut go);
    centers[level] = Vec::new();
}

// ---------------------------------------------------------------------------
// HS / CGK constructions
// ---------------------------------------------------------------------------

/// Greedy partition by descending priority: repeatedly take the uncovered
/// point with the largest `cov` value (smallest id on ties) and claim
/// everything within `r` of it. Returns the picked points and, per point,
/// the index of its owner in the pick order.
pub fn hs(space: &MetricSpace, r: f64, cov: &[f64]) -> (Vec<Point>, Vec<usize>) {
    let n = space.n();
    let mut picked: Vec<Point> = Vec::new();
    let mut owner = vec![usize::MAX; n];
    let mut uncovered = vec![true; n];
    let mut left = n;
    while left > 0 {
        let mut best: Option<Point> = None;
        for v in 0..n {
            if !uncovered[v] {
                continue;
            }
            match best {
                None => best = Some(v),
                Some(b) if cov[v] > cov[b] => best = Some(v),
                _ => {}
            }
        }
        let u = best.expect("uncovered set nonempty");
        let idx = picked.len();
        for v in 0..n {
            if uncovered[v] && space.d(u, v) <= r {
                uncovered[v] = false;
                owner[v] = idx;
                left -= 1;
            }
        }
        picked.push(u);
    }
    (picked, owner)
}

/// Height-t forest built from per-level HS runs: levels[0] are roots (the
/// widest radius), each node of a lower level has the HS owner above it as
/// parent, and leaf weights aggregate the instance weights of the points
/// claimed at the bottom level.
#[derive(Debug, Clone)]
pub struct Firefighter {
    /// Node point-ids per level, top to bottom.
    pub levels: Vec<Vec<Point>>,
    /// owners[i][p] = index into levels[i] of the HS owner of point p.
    pub owners: Vec<Vec<usize>>,
    /// Weight of the bottom-level block of each leaf node.
    pub leaf_weights: Vec<u64>,
    pub alphas: Vec<f64>,
}

impl Firefighter {
    /// Index (into the level above) of the parent of node `idx` at `level`.
    pub fn parent(&self, level: usize, idx: usize) -> usize {
        let p = self.levels[level][idx];
        self.owners[level - 1][p]
    }

    /// Ancestor chain of a node, as (level, index) pairs, nearest first.
    pub fn ancestors(&self, level: usize, idx: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(level);
        let mut l = level;
        let mut i = idx;
        while l > 0 {
            i = self.parent(l, i);
            l -= 1;
            out.push((l, i));
        }
        out
    }
}

/// Default dilation factors for the tree construction: 6 at the top level,
/// 2 below.
pub fn default_alphas(t: usize) -> Vec<f64> {
    (0..t).map(|i| if i == 0 { 6.0 } else { 2.0 }).collect()
}

/// Build the forest: one HS run per level at radius alphas[i] * r_i, with
/// priority equal to the coverage summed over levels up to i.
pub fn cgk_build(
    instance: &RobustInstance,
    alphas: &[f64],
    cov: &CoverageVector,
) -> Result<Firefighter> {
    let t = instance.radii.len();
    if alphas.len() != t {
        return Err(Error::input("alphas must match the level count"));
    }
    let n = instance.space.n();
    let mut levels = vec![Vec::new(); t];
    let mut owners = vec![Vec::new(); t];
    for i in (0..t).rev() {
        let priority: Vec<f64> = (0..n)
            .map(|v| (0..=i).map(|j| cov.get(j, v)).sum())
            .collect();
        let (picked, owner) = hs(&instance.space, alphas[i] * instance.radii[i], &priority);
        levels[i] = picked;
        owners[i] = owner;
    }
    let leaf_weights: Vec<u64> = levels[t - 1]
        .iter()
        .enumerate()
        .map(|(idx, _)| {
            (0..n)
                .filter(|&p| owners[t - 1][p] == idx)
                .map(|p| instance.weights.get(p))
                .sum()
        })
        .collect();
    Ok(Firefighter {
        levels,
        owners,
        leaf_weights,
        alphas: alphas.to_vec(),
    })
}

/// Node potentials derived from a coverage vector: roots carry their own
/// level-1 coverage, lower nodes are capped so that the chain up to the root
/// never exceeds 1 (which can push individual values negative).
pub fn y_assignment(ff: &Firefighter, cov: &CoverageVector) -> Vec<Vec<f64>> {
    let t = ff.levels.len();
    let mut y: Vec<Vec<f64>> = Vec::with_capacity(t);
    for (i, nodes) in ff.levels.iter().enumerate() {
        let level_y: Vec<f64> = nodes
            .iter()
            .enumerate()
            .map(|(idx, &v)| {
                if i == 0 {
                    cov.get(0, v)
                } else {
                    let anc_sum: f64 = ff
                        .ancestors(i, idx)
                        .iter()
                        .map(|&(l, j)| cov.get(l, ff.levels[l][j]))
                        .sum();
                    cov.get(i, v).min(1.0 - anc_sum)
                }
            })
            .collect();
        y.push(level_y);
    }
    y
}

// ---------------------------------------------------------------------------
// Oracle outcomes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum CutKind {
    Box,
    CoverageLower,
    PointCap,
    LevelBudget,
    CaseTwo,
}

/// A halfspace a*x <= b in coverage space, strictly violated at the query it
/// was emitted for.
#[derive(Debug, Clone)]
pub struct Cut {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
    pub kind: CutKind,
}

impl Cut {
    pub fn violated_at(&self, x: &[f64]) -> bool {
        let lhs: f64 = self.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
        lhs > self.rhs
    }
}

/// A residual well-separated instance plus what was carved out to build it.
#[derive(Debug, Clone)]
pub struct Residual {
    pub instance: RobustInstance,
    pub q: Vec<Point>,
    pub removed: Vec<Point>,
    /// Top radius of the parent robust instance (the Q balls' radius).
    pub r_top: f64,
}

impl Residual {
    /// Combine a solution of the residual instance with the Q balls.
    pub fn lift(&self, ws_solution: &Solution) -> Result<Solution> {
        if ws_solution.levels.len() != self.instance.radii.len() {
            return Err(Error::contract("residual lift: level count mismatch"));
        }
        let mut levels = ws_solution.levels.clone();
        levels[0].centers.extend(self.q.iter().copied());
        if !self.q.is_empty() {
            levels[0].realized_radius = levels[0].realized_radius.max(self.r_top);
        }
        let mut sol = Solution { levels };
        sol.canonicalize();
        Ok(sol)
    }
}

#[derive(Debug, Clone)]
pub enum OracleOutcome {
    Rounded(Solution),
    Residuals {
        list: Vec<Residual>,
        /// Valid for the integer hull exactly when every residual is
        /// infeasible.
        fallback: Cut,
    },
    Cut(Cut),
}

#[derive(Debug, Clone)]
pub struct RocConfig {
    /// Ellipsoid scale threshold: conclude infeasible when the mean log
    /// semi-axis falls below ln(eps).
    pub eps: f64,
    /// Iteration cap; None derives 4 D^2 (ln D + ln(1/eps)).
    pub iteration_cap: Option<usize>,
    /// Restrict case-2 subsets to points farther than r_1 from the roots.
    pub case2_prune: bool,
    /// Record every emitted cut with its query point (for validity tests).
    pub collect_cuts: bool,
}

impl Default for RocConfig {
    fn default() -> Self {
        RocConfig {
            eps: 1e-6,
            iteration_cap: None,
            case2_prune: false,
            collect_cuts: false,
        }
    }
}

/// Slack on the oracle's pass/fail checks. The query region that passes all
/// checks exactly can have zero volume (tight instances force equality), so
/// the ellipsoid center would never land in it; fattening the checks by a
/// constant keeps the region full-dimensional. Cuts keep their exact
/// integer right-hand sides, so validity for integral solutions is
/// unaffected, and case-1 rounding absorbs the slack because coverage
/// targets are integers.
pub const ORACLE_SLACK: f64 = 1e-4;

fn unit_weights_required(instance: &RobustInstance) -> Result<()> {
    if instance.weights.0.iter().any(|&w| w != 1) {
        return Err(Error::input(
            "round-or-cut operates on unit-weight robust instances",
        ));
    }
    Ok(())
}

/// One oracle invocation at a query coverage vector.
pub fn separation_oracle(
    instance: &RobustInstance,
    cov: &CoverageVector,
    cfg: &RocConfig,
) -> Result<OracleOutcome> {
    unit_weights_required(instance)?;
    let n = instance.space.n();
    let t = instance.radii.len();
    if cov.n != n || cov.t != t {
        return Err(Error::input("coverage vector shape mismatch"));
    }
    let m = instance.target;

    // (1) total coverage must reach the target
    if cov.total() < m as f64 - ORACLE_SLACK {
        let coeffs = vec![-1.0; t * n];
        return Ok(OracleOutcome::Cut(Cut {
            coeffs,
            rhs: -(m as f64),
            kind: CutKind::CoverageLower,
        }));
    }

    // (2) per-point level sums stay at most 1 for every integral coverage
    let mut worst: Option<(f64, Point)> = None;
    for p in 0..n {
        let s = cov.point_sum(p);
        if s > 1.0 + ORACLE_SLACK {
            let better = match worst {
                None => true,
                Some((ws, _)) => s > ws,
            };
            if better {
                worst = Some((s, p));
            }
        }
    }
    if let Some((_, p)) = worst {
        let mut coeffs = vec![0.0; t * n];
        for i in 0..t {
            coeffs[i * n + p] = 1.0;
        }
        return Ok(OracleOutcome::Cut(Cut {
            coeffs,
            rhs: 1.0,
            kind: CutKind::PointCap,
        }));
    }

    // (3) tree construction and per-level root budgets
    let alphas = default_alphas(t);
    let ff = cgk_build(instance, &alphas, cov)?;
    for i in 0..t {
        let s: f64 = ff.levels[i].iter().map(|&v| cov.get(i, v)).sum();
        if s > instance.budgets[i] as f64 + ORACLE_SLACK {
            let mut coeffs = vec![0.0; t * n];
            for &v in &ff.levels[i] {
                coeffs[i * n + v] = 1.0;
            }
            return Ok(OracleOutcome::Cut(Cut {
                coeffs,
                rhs: instance.budgets[i] as f64,
                kind: CutKind::LevelBudget,
            }));
        }
    }

    // (4) branch on the root mass
    let y_l1: f64 = ff.levels[0].iter().map(|&v| cov.get(0, v)).sum();
    let threshold = instance.budgets[0] as f64 - t as f64;
    if y_l1 <= threshold {
        let solution = round_case1(instance, &ff)?;
        return Ok(OracleOutcome::Rounded(solution));
    }

    // (5) residual well-separated instances over small center subsets
    let list = build_residuals(instance, &ff, cfg)?;
    let mut coeffs = vec![0.0; t * n];
    for &v in &ff.levels[0] {
        coeffs[v] = 1.0;
    }
    Ok(OracleOutcome::Residuals {
        list,
        fallback: Cut {
            coeffs,
            rhs: threshold,
            kind: CutKind::CaseTwo,
        },
    })
}

/// Case 1: solve the sparse tree LP, check it is almost integral, round up,
/// and verify the resulting dilated solution. Any failed guarantee is an
/// internal claim violation, never a silent wrong answer.
fn round_case1(instance: &RobustInstance, ff: &Firefighter) -> Result<Solution> {
    let t = instance.radii.len();
    // variable layout: nodes level by level
    let mut offsets = Vec::with_capacity(t);
    let mut var_count = 0usize;
    for nodes in &ff.levels {
        offsets.push(var_count);
        var_count += nodes.len();
    }
    let var = |lvl: usize, idx: usize| offsets[lvl] + idx;

    let mut objective = vec![0.0; var_count];
    let leaf_level = t - 1;
    for (li, _) in ff.levels[leaf_level].iter().enumerate() {
        let w = ff.leaf_weights[li] as f64;
        objective[var(leaf_level, li)] += w;
        for (l, i) in ff.ancestors(leaf_level, li) {
            objective[var(l, i)] += w;
        }
    }

    let mut constraints = Vec::new();
    for (lvl, nodes) in ff.levels.iter().enumerate() {
        let mut coeffs = vec![0.0; var_count];
        for i in 0..nodes.len() {
            coeffs[var(lvl, i)] = 1.0;
        }
        let rhs = if lvl == 0 {
            instance.budgets[0] as f64 - t as f64
        } else {
            instance.budgets[lvl] as f64
        };
        constraints.push(Constraint {
            coeffs,
            relation: Relation::Le,
            rhs,
        });
    }
    for (li, _) in ff.levels[leaf_level].iter().enumerate() {
        let mut coeffs = vec![0.0; var_count];
        coeffs[var(leaf_level, li)] = 1.0;
        for (l, i) in ff.ancestors(leaf_level, li) {
            coeffs[var(l, i)] += 1.0;
        }
        constraints.push(Constraint {
            coeffs,
            relation: Relation::Le,
            rhs: 1.0,
        });
    }
    for v in 0..var_count {
        let mut coeffs = vec![0.0; var_count];
        coeffs[v] = 1.0;
        constraints.push(Constraint {
            coeffs,
            relation: Relation::Le,
            rhs: 1.0,
        });
    }

    let lp = LinearProgram {
        maximize: objective,
        constraints,
    };
    let vertex = match simplex_vertex_solve(&lp)? {
        SimplexOutcome::Optimal(v) => v,
        other => {
            return Err(Error::claim(format!(
                "sparse LP expected an optimum, got {other:?}"
            )))
        }
    };
    if vertex.objective < instance.target as f64 - 1e-6 {
        return Err(Error::claim(format!(
            "sparse LP optimum {} below the coverage target {}",
            vertex.objective, instance.target
        )));
    }
    let frac = vertex
        .x
        .iter()
        .filter(|&&x| x > 1e-7 && x < 1.0 - 1e-7)
        .count();
    if frac > t {
        return Err(Error::claim(format!(
            "sparse LP vertex has {frac} fractional variables, allowed {t}"
        )));
    }

    let mut levels = Vec::with_capacity(t);
    for (lvl, nodes) in ff.levels.iter().enumerate() {
        let centers: Vec<Point> = nodes
            .iter()
            .enumerate()
            .filter(|(i, _)| vertex.x[var(lvl, *i)] > 1e-7)
            .map(|(_, &p)| p)
            .collect();
        levels.push(SolutionLevel {
            realized_radius: if centers.is_empty() {
                0.0
            } else {
                ff.alphas[lvl] * instance.radii[lvl]
            },
            centers,
        });
    }
    let mut solution = Solution { levels };
    solution.canonicalize();
    let report = verify_solution(&Instance::Robust(instance.clone()), &solution)?;
    if !report.pass {
        return Err(Error::claim(
            "case-1 rounding failed verification at the tree dilations",
        ));
    }
    Ok(solution)
}

fn build_residuals(
    instance: &RobustInstance,
    ff: &Firefighter,
    cfg: &RocConfig,
) -> Result<Vec<Residual>> {
    let n = instance.space.n();
    let t = instance.radii.len();
    let r1 = instance.radii[0];
    let roots = &ff.levels[0];
    let candidates: Vec<Point> = if cfg.case2_prune {
        (0..n)
            .filter(|&p| instance.space.dist_to_set(p, roots) > r1)
            .collect()
    } else {
        (0..n).collect()
    };
    let max_q = (t - 1).min(instance.budgets[0]);
    let mut subsets: Vec<Vec<Point>> = vec![Vec::new()];
    for size in 1..=max_q {
        let mut stack: Vec<Vec<Point>> = Vec::new();
        fn rec(cands: &[Point], start: usize, size: usize, cur: &mut Vec<Point>, out: &mut Vec<Vec<Point>>) {
            if cur.len() == size {
                out.push(cur.clone());
                return;
            }
            for i in start..cands.len() {
                cur.push(cands[i]);
                rec(cands, i + 1, size, cur, out);
                cur.pop();
            }
        }
        rec(&candidates, 0, size, &mut Vec::new(), &mut stack);
        subsets.extend(stack);
    }

    let mut out = Vec::with_capacity(subsets.len());
    for q in subsets {
        let mut removed_mask = vec![false; n];
        for &c in &q {
            for p in 0..n {
                if instance.space.d(c, p) <= r1 {
                    removed_mask[p] = true;
                }
            }
        }
        let removed: Vec<Point> = (0..n).filter(|&p| removed_mask[p]).collect();
        let mut weights = Weights::unit(n);
        for &p in &removed {
            weights.0[p] = 0;
        }
        let target = instance.target.saturating_sub(removed.len() as u64);
        let y_res: Vec<Point> = roots.iter().copied().filter(|p| !q.contains(p)).collect();
        let restriction = if y_res.is_empty() {
            None
        } else {
            Some(CenterRestriction::new(
                &instance.space,
                y_res,
                ff.alphas[0] * r1,
            )?)
        };
        let mut radii = instance.radii.clone();
        radii[0] = 2.0 * r1;
        let mut budgets = instance.budgets.clone();
        budgets[0] -= q.len();
        out.push(Residual {
            instance: RobustInstance {
                space: instance.space.clone(),
                radii,
                budgets,
                weights,
                target,
                restriction,
            },
            q,
            removed,
            r_top: r1,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Ellipsoid loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SolveRoute {
    TrivialEmpty,
    Rounded,
    Residual,
}

#[derive(Debug, Clone)]
pub struct EmittedCut {
    pub query: Vec<f64>,
    pub cut: Cut,
}

/// One line of the oracle trace.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub query_hash: String,
    pub outcome: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cut_kind: Option<CutKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cut_coeffs: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cut_rhs: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct RocStats {
    pub iterations: usize,
    pub oracle_calls: usize,
    pub residual_batches: usize,
    pub ws_solves: usize,
    pub cache_hits: usize,
    pub cap: usize,
    pub hit_cap: bool,
    pub cuts: Vec<EmittedCut>,
    pub trace: Vec<TraceRecord>,
}

#[derive(Debug, Clone)]
pub enum RocOutcome {
    Solved { solution: Solution, route: SolveRoute },
    Infeasible,
}

fn fnv_hash(values: &[f64]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for v in values {
        for b in v.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    format!("{h:016x}")
}

/// Iteration cap: 4 D^2 (ln D + ln(1/eps)).
pub fn default_iteration_cap(dim: usize, eps: f64) -> usize {
    let d = dim as f64;
    (4.0 * d * d * (d.ln() + (1.0 / eps).ln())).ceil() as usize
}

/// Run the round-or-cut loop. The callback decides (and approximately
/// solves) well-separated residual instances; its answers are trusted for
/// infeasibility and verified for feasibility.
pub fn ellipsoid_loop(
    instance: &RobustInstance,
    ws_solver: &dyn Fn(&RobustInstance) -> Result<Option<Solution>>,
    cfg: &RocConfig,
) -> Result<(RocOutcome, RocStats)> {
    unit_weights_required(instance)?;
    let n = instance.space.n();
    let t = instance.radii.len();
    let mut stats = RocStats::default();

    if instance.target == 0 {
        let solution = Solution::empty(&instance.radii);
        return Ok((
            RocOutcome::Solved {
                solution,
                route: SolveRoute::TrivialEmpty,
            },
            stats,
        ));
    }
    if instance.target > instance.weights.total() {
        return Ok((RocOutcome::Infeasible, stats));
    }

    let dim = t * n;
    let cap = cfg.iteration_cap.unwrap_or_else(|| default_iteration_cap(dim, cfg.eps));
    stats.cap = cap;
    let mut ellipsoid = crate::lp::EllipsoidState::initial_box(dim)?;
    let scale_floor = cfg.eps.ln();

    let mut ws_cache: HashMap<(Vec<Point>, Vec<Point>), Option<Solution>> = HashMap::new();

    for iter in 0..cap {
        stats.iterations = iter + 1;

        // box clamp; a clamped coordinate yields the box cut first
        let mut query = ellipsoid.center.clone();
        let mut box_cut: Option<Cut> = None;
        let mut worst: f64 = 0.0;
        for (j, v) in ellipsoid.center.iter().enumerate() {
            let violation = if *v < 0.0 {
                -*v
            } else if *v > 1.0 {
                *v - 1.0
            } else {
                0.0
            };
            query[j] = v.clamp(0.0, 1.0);
            if violation > worst {
                worst = violation;
                let mut coeffs = vec![0.0; dim];
                let (c, rhs) = if *v < 0.0 { (-1.0, 0.0) } else { (1.0, 1.0) };
                coeffs[j] = c;
                box_cut = Some(Cut {
                    coeffs,
                    rhs,
                    kind: CutKind::Box,
                });
            }
        }

        let cut = if let Some(cut) = box_cut {
            cut
        } else {
            let cov = CoverageVector {
                t,
                n,
                values: query.clone(),
            };
            stats.oracle_calls += 1;
            match separation_oracle(instance, &cov, cfg)? {
                OracleOutcome::Rounded(solution) => {
                    push_trace(&mut stats, cfg, iter, &query, "rounded", None);
                    return Ok((
                        RocOutcome::Solved {
                            solution,
                            route: SolveRoute::Rounded,
                        },
                        stats,
                    ));
                }
                OracleOutcome::Residuals { list, fallback } => {
                    stats.residual_batches += 1;
                    let mut found: Option<(usize, Solution)> = None;
                    for (ri, residual) in list.iter().enumerate() {
                        let key = (
                            residual
                                .instance
                                .restriction
                                .as_ref()
                                .map(|r| r.set.clone())
                                .unwrap_or_default(),
                            residual.q.clone(),
                        );
                        let answer = match ws_cache.get(&key) {
                            Some(hit) => {
                                stats.cache_hits += 1;
                                hit.clone()
                            }
                            None => {
                                stats.ws_solves += 1;
                                let solved = ws_solver(&residual.instance)?;
                                ws_cache.insert(key, solved.clone());
                                solved
                            }
                        };
                        if let Some(sol) = answer {
                            found = Some((ri, sol));
                            break;
                        }
                    }
                    if let Some((ri, ws_sol)) = found {
                        let lifted = list[ri].lift(&ws_sol)?;
                        let report =
                            verify_solution(&Instance::Robust(instance.clone()), &lifted)?;
                        if !report.pass {
                            return Err(Error::claim(
                                "lifted residual solution failed verification",
                            ));
                        }
                        push_trace(&mut stats, cfg, iter, &query, "residual", None);
                        return Ok((
                            RocOutcome::Solved {
                                solution: lifted,
                                route: SolveRoute::Residual,
                            },
                            stats,
                        ));
                    }
                    fallback
                }
                OracleOutcome::Cut(cut) => cut,
            }
        };

        if !cut.violated_at(&ellipsoid.center) {
            return Err(Error::claim(format!(
                "emitted {:?} cut is not violated at the ellipsoid center",
                cut.kind
            )));
        }
        // box cuts separate the raw center; oracle cuts only fire when no
        // clamping happened, so the center is the query either way
        push_trace(&mut stats, cfg, iter, &ellipsoid.center, "cut", Some(&cut));
        if cfg.collect_cuts {
            stats.cuts.push(EmittedCut {
                query: ellipsoid.center.clone(),
                cut: cut.clone(),
            });
        }
        let norm: f64 = cut.coeffs.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::claim("cut with a zero normal emitted"));
        }
        let a: Vec<f64> = cut.coeffs.iter().map(|v| v / norm).collect();
        let b = cut.rhs / norm;
        let violation: f64 =
            a.iter().zip(&ellipsoid.center).map(|(x, y)| x * y).sum::<f64>() - b;
        // the whole ellipsoid violates the cut: nothing left to search
        if violation > ellipsoid.support_width(&a) {
            return Ok((RocOutcome::Infeasible, stats));
        }
        ellipsoid = ellipsoid.step(&a, b)?;
        if ellipsoid.log_scale() < scale_floor {
            return Ok((RocOutcome::Infeasible, stats));
        }
    }
    stats.hit_cap = true;
    Ok((RocOutcome::Infeasible, stats))
}

fn push_trace(
    stats: &mut RocStats,
    cfg: &RocConfig,
    iteration: usize,
    query: &[f64],
    outcome: &'static str,
    cut: Option<&Cut>,
) {
    if !cfg.collect_cuts {
        return;
    }
    stats.trace.push(TraceRecord {
        iteration,
        query_hash: fnv_hash(query),
        outcome,
        cut_kind: cut.map(|c| c.kind),
        cut_coeffs: cut.map(|c| c.coeffs.clone()),
        cut_rhs: cut.map(|c| c.rhs),
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{brute_solve, plant_instance, PlantParams, PlantVariant, DEFAULT_BRUTE_BUDGET};
    use crate::model::MetricSpace;
    use std::sync::Arc;

    fn unit_robust(xs: &[f64], radii: Vec<f64>, budgets: Vec<usize>, m: u64) -> RobustInstance {
        let space = Arc::new(MetricSpace::line(xs));
        let weights = Weights::unit(space.n());
        RobustInstance {
            space,
            radii,
            budgets,
            weights,
            target: m,
            restriction: None,
        }
    }

    #[test]
    fn hs_orders_by_priority() {
        let s = MetricSpace::line(&[0.0, 10.0, 20.0]);
        let (picked, owner) = hs(&s, 3.0, &[0.5, 0.9, 0.2]);
        assert_eq!(picked, vec![1, 0, 2]);
        assert_eq!(owner, vec![1, 0, 2]);
    }

    #[test]
    fn hs_ties_break_to_smallest_id() {
        let s = MetricSpace::line(&[0.0, 5.0, 10.0]);
        let (picked, _) = hs(&s, 1.0, &[0.0, 0.0, 0.0]);
        assert_eq!(picked, vec![0, 1, 2]);
    }

    #[test]
    fn hs_diameter_radius_single_pick() {
        let s = MetricSpace::line(&[0.0, 1.0, 2.0]);
        let (picked, owner) = hs(&s, 100.0, &[0.1, 0.9, 0.5]);
        assert_eq!(picked, vec![1]);
        assert_eq!(owner, vec![0, 0, 0]);
    }

    #[test]
    fn cgk_single_level_forest() {
        let inst = unit_robust(&[0.0, 1.0, 30.0], vec![2.0], vec![1], 2);
        let cov = CoverageVector::zeros(1, 3);
        let ff = cgk_build(&inst, &default_alphas(1), &cov).unwrap();
        assert_eq!(ff.levels.len(), 1);
        assert_eq!(ff.levels[0], vec![0, 2]);
        assert_eq!(ff.leaf_weights, vec![2, 1]);
    }

    #[test]
    fn cgk_two_separated_clusters_make_two_trees() {
        let inst = unit_robust(&[0.0, 1.0, 1000.0, 1001.0], vec![10.0, 1.0], vec![1, 1], 4);
        let cov = CoverageVector::zeros(2, 4);
        let ff = cgk_build(&inst, &default_alphas(2), &cov).unwrap();
        assert_eq!(ff.levels[0], vec![0, 2]);
        // every bottom node's root stays within its own cluster
        for (idx, &p) in ff.levels[1].iter().enumerate() {
            let root = ff.levels[0][ff.parent(1, idx)];
            assert!((inst.space.d(p, root) < 500.0), "tree crossed clusters");
        }
    }

    #[test]
    fn oracle_cuts_on_missing_total_coverage() {
        let inst = unit_robust(&[0.0, 10.0], vec![1.0], vec![1], 1);
        let cov = CoverageVector::zeros(1, 2);
        match separation_oracle(&inst, &cov, &RocConfig::default()).unwrap() {
            OracleOutcome::Cut(cut) => {
                assert_eq!(cut.kind, CutKind::CoverageLower);
                assert!(cut.violated_at(&cov.values));
            }
            other => panic!("expected a coverage cut, got {other:?}"),
        }
    }

    #[test]
    fn oracle_cuts_on_root_budget_overflow() {
        let inst = unit_robust(&[0.0, 100.0, 200.0], vec![1.0], vec![1], 1);
        let cov = CoverageVector {
            t: 1,
            n: 3,
            values: vec![1.0, 1.0, 1.0],
        };
        match separation_oracle(&inst, &cov, &RocConfig::default()).unwrap() {
            OracleOutcome::Cut(cut) => {
                assert_eq!(cut.kind, CutKind::LevelBudget);
                assert!(cut.violated_at(&cov.values));
            }
            other => panic!("expected a budget cut, got {other:?}"),
        }
    }

    #[test]
    fn oracle_point_cap_cut_fires() {
        let inst = unit_robust(&[0.0, 50.0], vec![5.0, 1.0], vec![1, 1], 1);
        let mut cov = CoverageVector::zeros(2, 2);
        cov.values[0] = 0.9; // level 0, point 0
        cov.values[2] = 0.9; // level 1, point 0
        match separation_oracle(&inst, &cov, &RocConfig::default()).unwrap() {
            OracleOutcome::Cut(cut) => {
                assert_eq!(cut.kind, CutKind::PointCap);
                assert!(cut.violated_at(&cov.values));
            }
            other => panic!("expected a cap cut, got {other:?}"),
        }
    }

    #[test]
    fn residuals_from_feasible_instance_contain_a_feasible_one() {
        let planted = plant_instance(&PlantParams::new(
            9,
            PlantVariant::Robust,
            6,
            2,
        ))
        .unwrap();
        let Instance::Robust(inst) = &planted.instance else { unreachable!() };
        // query = integral coverage of the planted witness
        let centers: Vec<Vec<Point>> = planted
            .witness
            .levels
            .iter()
            .map(|l| l.centers.clone())
            .collect();
        let cov = integral_coverage(inst, &centers);
        match separation_oracle(inst, &cov, &RocConfig::default()).unwrap() {
            OracleOutcome::Residuals { list, .. } => {
                let ok = list.iter().any(|res| {
                    brute_solve(&Instance::Robust(res.instance.clone()), 1.0, DEFAULT_BRUTE_BUDGET)
                        .map(|o| o.feasible)
                        .unwrap_or(false)
                });
                assert!(ok, "some residual must be feasible for a feasible instance");
            }
            OracleOutcome::Rounded(sol) => {
                let rep = verify_solution(&planted.instance, &sol).unwrap();
                assert!(rep.pass);
            }
            OracleOutcome::Cut(cut) => {
                panic!("planted coverage should not be cut: {:?}", cut.kind)
            }
        }
    }

    #[test]
    fn loop_returns_empty_solution_for_zero_target() {
        let inst = unit_robust(&[0.0, 10.0], vec![1.0], vec![1], 0);
        let solver = |_: &RobustInstance| -> crate::Result<Option<Solution>> { Ok(None) };
        let (outcome, stats) = ellipsoid_loop(&inst, &solver, &RocConfig::default()).unwrap();
        match outcome {
            RocOutcome::Solved { route, .. } => assert_eq!(route, SolveRoute::TrivialEmpty),
            _ => panic!("zero target must be trivially solved"),
        }
        assert_eq!(stats.iterations, 0);
    }

    #[test]
    fn loop_recognizes_a_brute_infeasible_five_point_instance() {
        // five points far apart, two balls: cannot cover all five
        let gap = 1_000_000.0;
        let xs: Vec<f64> = (0..5).map(|i| i as f64 * gap).collect();
        let inst = unit_robust(&xs, vec![60.0, 2.0], vec![1, 1], 5);
        assert!(!brute_solve(&Instance::Robust(inst.clone()), 1.0, DEFAULT_BRUTE_BUDGET)
            .unwrap()
            .feasible);
        let (outcome, stats) =
            ellipsoid_loop(&inst, &crate::pipeline::ws_solve_chain, &RocConfig::default())
                .unwrap();
        assert!(matches!(outcome, RocOutcome::Infeasible));
        assert!(stats.iterations <= stats.cap);
    }

    #[test]
    fn loop_solves_a_planted_feasible_instance() {
        let planted = plant_instance(
            &PlantParams::new(21, PlantVariant::Robust, 8, 2)
                .with_ratio(30.0)
                .with_budgets(vec![2, 2]),
        )
        .unwrap();
        let Instance::Robust(inst) = &planted.instance else { unreachable!() };
        let (outcome, _) =
            ellipsoid_loop(inst, &crate::pipeline::ws_solve_chain, &RocConfig::default())
                .unwrap();
        match outcome {
            RocOutcome::Solved { solution, .. } => {
                let rep = verify_solution(&planted.instance, &solution).unwrap();
                assert!(rep.pass, "returned solution must verify");
            }
            RocOutcome::Infeasible => panic!("planted instance must be solved"),
        }
    }
}
