//! Metric spaces, problem instances, solutions, and verification.
//!
//! All distances are `f64`. Combinatorial comparisons use exact `<=`: the
//! intended inputs are integer distance matrices, so every derived radius
//! (finite sums of inputs) stays exactly representable and no tolerance
//! ledger is needed in the reductions. Weights are nonnegative integers and
//! zero weights are legal; the reductions create them freely.

use crate::error::Error;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Point identifier: an index into the space, `0..n`.
pub type Point = usize;

/// Norm tag for coordinate-based metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    #[serde(rename = "l1")]
    L1,
    #[serde(rename = "l2")]
    L2,
}

/// A finite metric space given by a dense symmetric distance matrix.
///
/// Construction validates symmetry, zero diagonal, finiteness and
/// nonnegativity. The triangle inequality is only checked on demand
/// (it costs O(n^3)).
#[derive(Debug, Clone)]
pub struct MetricSpace {
    n: usize,
    dist: Vec<f64>,
}

impl MetricSpace {
    pub fn from_matrix(d: &[Vec<f64>]) -> Result<Self> {
        let n = d.len();
        if n == 0 {
            return Err(Error::input("metric space must contain at least one point"));
        }
        let mut dist = vec![0.0; n * n];
        for (i, row) in d.iter().enumerate() {
            if row.len() != n {
                return Err(Error::input(format!(
                    "distance matrix row {i} has length {}, expected {n}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::input(format!("d({i},{j}) = {v} is not a finite nonnegative value")));
                }
                dist[i * n + j] = v;
            }
        }
        for i in 0..n {
            if dist[i * n + i] != 0.0 {
                return Err(Error::input(format!("d({i},{i}) must be 0")));
            }
            for j in 0..i {
                if dist[i * n + j] != dist[j * n + i] {
                    return Err(Error::input(format!("distance matrix is asymmetric at ({i},{j})")));
                }
            }
        }
        Ok(MetricSpace { n, dist })
    }

    pub fn from_points(coords: &[Vec<f64>], norm: Norm) -> Result<Self> {
        let n = coords.len();
        if n == 0 {
            return Err(Error::input("metric space must contain at least one point"));
        }
        let dim = coords[0].len();
        for (i, c) in coords.iter().enumerate() {
            if c.len() != dim {
                return Err(Error::input(format!("coordinate row {i} has mixed dimension")));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::input(format!("coordinate row {i} contains a non-finite value")));
            }
        }
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                let d = match norm {
                    Norm::L1 => coords[i]
                        .iter()
                        .zip(&coords[j])
                        .map(|(a, b)| (a - b).abs())
                        .sum(),
                    Norm::L2 => coords[i]
                        .iter()
                        .zip(&coords[j])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt(),
                };
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Ok(MetricSpace { n, dist })
    }

    /// Convenience constructor for 1-dimensional integer-friendly test spaces.
    pub fn line(xs: &[f64]) -> Self {
        let coords: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        MetricSpace::from_points(&coords, Norm::L1).expect("line coordinates are finite")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn d(&self, p: Point, q: Point) -> f64 {
        self.dist[p * self.n + q]
    }

    pub fn points(&self) -> impl Iterator<Item = Point> {
        0..self.n
    }

    pub fn contains(&self, p: Point) -> bool {
        p < self.n
    }

    /// Distance from `p` to the closest point of `set`; infinite for an empty set.
    pub fn dist_to_set(&self, p: Point, set: &[Point]) -> f64 {
        set.iter()
            .map(|&q| self.d(p, q))
            .fold(f64::INFINITY, f64::min)
    }

    /// First triangle-inequality violation, if any.
    pub fn triangle_violation(&self) -> Option<(Point, Point, Point)> {
        for p in 0..self.n {
            for q in 0..self.n {
                for r in 0..self.n {
                    if self.d(p, q) > self.d(p, r) + self.d(r, q) {
                        return Some((p, q, r));
                    }
                }
            }
        }
        None
    }

    /// The subspace induced by `subset` (ids are reindexed to `0..subset.len()`).
    pub fn restrict(&self, subset: &[Point]) -> Result<MetricSpace> {
        if subset.is_empty() {
            return Err(Error::input("cannot restrict to an empty point set"));
        }
        let m = subset.len();
        let mut dist = vec![0.0; m * m];
        for (a, &p) in subset.iter().enumerate() {
            if !self.contains(p) {
                return Err(Error::input(format!("unknown point id {p}")));
            }
            for (b, &q) in subset.iter().enumerate() {
                dist[a * m + b] = self.d(p, q);
            }
        }
        Ok(MetricSpace { n: m, dist })
    }

    pub fn matrix(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| self.dist[i * self.n..(i + 1) * self.n].to_vec())
            .collect()
    }
}

/// Closed ball membership: exactly the points at distance `<= radius`.
pub fn ball_members(space: &MetricSpace, center: Point, radius: f64) -> Result<Vec<Point>> {
    if !space.contains(center) {
        return Err(Error::input(format!("unknown point id {center}")));
    }
    if !(radius >= 0.0) {
        return Err(Error::input(format!("ball radius {radius} must be nonnegative")));
    }
    Ok(space
        .points()
        .filter(|&q| space.d(center, q) <= radius)
        .collect())
}

/// Integer point weights over a space; zero weights are allowed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Weights(pub Vec<u64>);

impl Weights {
    pub fn unit(n: usize) -> Self {
        Weights(vec![1; n])
    }

    pub fn zero(n: usize) -> Self {
        Weights(vec![0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, p: Point) -> u64 {
        self.0[p]
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn sum_over<I: IntoIterator<Item = Point>>(&self, pts: I) -> u64 {
        pts.into_iter().map(|p| self.0[p]).sum()
    }

    /// Support restricted to a mask of covered points.
    pub fn sum_covered(&self, covered: &[bool]) -> u64 {
        self.0
            .iter()
            .zip(covered)
            .filter_map(|(&w, &c)| c.then_some(w))
            .sum()
    }
}

/// Candidate-center restriction for the top radius level.
///
/// All pairs in `set` are strictly farther apart than `separation`; this is
/// verified at construction time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CenterRestriction {
    pub set: Vec<Point>,
    pub level: usize,
    pub separation: f64,
}

impl CenterRestriction {
    pub fn new(space: &MetricSpace, set: Vec<Point>, separation: f64) -> Result<Self> {
        for &p in &set {
            if !space.contains(p) {
                return Err(Error::input(format!("restriction point {p} is not in the space")));
            }
        }
        for (a, &u) in set.iter().enumerate() {
            for &v in &set[a + 1..] {
                if u == v {
                    return Err(Error::input(format!("restriction set repeats point {u}")));
                }
                if space.d(u, v) <= separation {
                    return Err(Error::input(format!(
                        "restriction points {u},{v} at distance {} violate separation {separation}",
                        space.d(u, v)
                    )));
                }
            }
        }
        Ok(CenterRestriction {
            set,
            level: 0,
            separation,
        })
    }
}

/// Plain t-NUkC: cover the whole space.
#[derive(Debug, Clone)]
pub struct NukcInstance {
    pub space: Arc<MetricSpace>,
    pub radii: Vec<f64>,
    pub budgets: Vec<usize>,
    pub restriction: Option<CenterRestriction>,
}

/// Robust t-NUkC: cover weight at least `target`.
#[derive(Debug, Clone)]
pub struct RobustInstance {
    pub space: Arc<MetricSpace>,
    pub radii: Vec<f64>,
    pub budgets: Vec<usize>,
    pub weights: Weights,
    pub target: u64,
    pub restriction: Option<CenterRestriction>,
}

/// Colorful t-NUkC: separate red and blue coverage targets.
#[derive(Debug, Clone)]
pub struct ColorfulInstance {
    pub space: Arc<MetricSpace>,
    pub radii: Vec<f64>,
    pub budgets: Vec<usize>,
    pub red: Weights,
    pub blue: Weights,
    pub target_red: u64,
    pub target_blue: u64,
    pub restriction: Option<CenterRestriction>,
}

/// Any of the three instance variants.
#[derive(Debug, Clone)]
pub enum Instance {
    Nukc(NukcInstance),
    Robust(RobustInstance),
    Colorful(ColorfulInstance),
}

impl Instance {
    pub fn space(&self) -> &Arc<MetricSpace> {
        match self {
            Instance::Nukc(i) => &i.space,
            Instance::Robust(i) => &i.space,
            Instance::Colorful(i) => &i.space,
        }
    }

    pub fn radii(&self) -> &[f64] {
        match self {
            Instance::Nukc(i) => &i.radii,
            Instance::Robust(i) => &i.radii,
            Instance::Colorful(i) => &i.radii,
        }
    }

    pub fn budgets(&self) -> &[usize] {
        match self {
            Instance::Nukc(i) => &i.budgets,
            Instance::Robust(i) => &i.budgets,
            Instance::Colorful(i) => &i.budgets,
        }
    }

    pub fn restriction(&self) -> Option<&CenterRestriction> {
        match self {
            Instance::Nukc(i) => i.restriction.as_ref(),
            Instance::Robust(i) => i.restriction.as_ref(),
            Instance::Colorful(i) => i.restriction.as_ref(),
        }
    }

    pub fn levels(&self) -> usize {
        self.radii().len()
    }
}

/// One radius level of a solution: the realized radius actually used and the
/// centers opened at that level. Fewer centers than the budget is legal, and
/// so is an empty level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionLevel {
    pub realized_radius: f64,
    pub centers: Vec<Point>,
}

/// A per-level list of balls answering some instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub levels: Vec<SolutionLevel>,
}

impl Solution {
    pub fn empty(radii: &[f64]) -> Self {
        Solution {
            levels: radii
                .iter()
                .map(|_| SolutionLevel {
                    realized_radius: 0.0,
                    centers: Vec::new(),
                })
                .collect(),
        }
    }

    /// Sort and deduplicate every center list; canonical form for output.
    pub fn canonicalize(&mut self) {
        for lvl in &mut self.levels {
            lvl.centers.sort_unstable();
            lvl.centers.dedup();
        }
    }

    /// Expand the realized radius of every level by an additive amount.
    /// Levels without centers stay at radius 0.
    pub fn expand(&self, extra: f64) -> Solution {
        Solution {
            levels: self
                .levels
                .iter()
                .map(|l| SolutionLevel {
                    realized_radius: if l.centers.is_empty() {
                        0.0
                    } else {
                        l.realized_radius + extra
                    },
                    centers: l.centers.clone(),
                })
                .collect(),
        }
    }

    /// Mark of which points of the space are covered by this solution.
    pub fn coverage_mask(&self, space: &MetricSpace) -> Result<Vec<bool>> {
        let mut covered = vec![false; space.n()];
        for lvl in &self.levels {
            for &c in &lvl.centers {
                if !space.contains(c) {
                    return Err(Error::input(format!("solution center {c} is not in the space")));
                }
                for q in space.points() {
                    if space.d(c, q) <= lvl.realized_radius {
                        covered[q] = true;
                    }
                }
            }
        }
        Ok(covered)
    }
}

/// Per-level dilation: realized radius over prescribed radius, with the
/// radius-0 convention (0 when both are 0, infinite when only the
/// prescription is 0).
pub fn dilation(realized: f64, prescribed: f64) -> f64 {
    if prescribed == 0.0 {
        if realized == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        realized / prescribed
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelReport {
    pub prescribed_radius: f64,
    pub realized_radius: f64,
    pub dilation: f64,
    pub centers_used: usize,
    pub budget: usize,
    pub budget_ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum CoverageReport {
    Total { covered: u64, required: u64 },
    Colorful {
        red_covered: u64,
        red_required: u64,
        blue_covered: u64,
        blue_required: u64,
    },
}

/// Outcome of checking a solution against an instance; `pass` holds exactly
/// when every budget, radius and coverage constraint is satisfied.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub levels: Vec<LevelReport>,
    pub max_dilation: f64,
    pub coverage: CoverageReport,
    pub budgets_ok: bool,
    pub coverage_ok: bool,
    pub restriction_ok: bool,
    pub pass: bool,
}

/// Check a solution against any instance variant. Pure: inputs are not
/// mutated, the report carries everything the caller needs.
pub fn verify_solution(instance: &Instance, solution: &Solution) -> Result<VerificationReport> {
    let radii = instance.radii();
    let budgets = instance.budgets();
    if solution.levels.len() != radii.len() {
        return Err(Error::input(format!(
            "solution has {} levels, instance has {}",
            solution.levels.len(),
            radii.len()
        )));
    }
    let space = instance.space();
    let mut levels = Vec::with_capacity(radii.len());
    let mut budgets_ok = true;
    let mut max_dilation: f64 = 0.0;
    for (i, lvl) in solution.levels.iter().enumerate() {
        let used = lvl.centers.len();
        let ok = used <= budgets[i];
        budgets_ok &= ok;
        let dil = dilation(lvl.realized_radius, radii[i]);
        max_dilation = max_dilation.max(dil);
        levels.push(LevelReport {
            prescribed_radius: radii[i],
            realized_radius: lvl.realized_radius,
            dilation: dil,
            centers_used: used,
            budget: budgets[i],
            budget_ok: ok,
        });
    }

    let restriction_ok = match instance.restriction() {
        None => true,
        Some(r) => solution.levels[r.level]
            .centers
            .iter()
            .all(|c| r.set.contains(c)),
    };

    let covered = solution.coverage_mask(space)?;
    let (coverage, coverage_ok) = match instance {
        Instance::Nukc(_) => {
            let count = covered.iter().filter(|&&c| c).count() as u64;
            let required = space.n() as u64;
            (
                CoverageReport::Total {
                    covered: count,
                    required,
                },
                count == required,
            )
        }
        Instance::Robust(inst) => {
            let w = inst.weights.sum_covered(&covered);
            (
                CoverageReport::Total {
                    covered: w,
                    required: inst.target,
                },
                w >= inst.target,
            )
        }
        Instance::Colorful(inst) => {
            let r = inst.red.sum_covered(&covered);
            let b = inst.blue.sum_covered(&covered);
            (
                CoverageReport::Colorful {
                    red_covered: r,
                    red_required: inst.target_red,
                    blue_covered: b,
                    blue_required: inst.target_blue,
                },
                r >= inst.target_red && b >= inst.target_blue,
            )
        }
    };

    let pass = budgets_ok && coverage_ok && restriction_ok;
    Ok(VerificationReport {
        levels,
        max_dilation,
        coverage,
        budgets_ok,
        coverage_ok,
        restriction_ok,
        pass,
    })
}

/// Which original levels were folded into each merged level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadiusMergeMap {
    pub groups: Vec<Vec<usize>>,
    pub original_radii: Vec<f64>,
    pub original_budgets: Vec<usize>,
}

impl RadiusMergeMap {
    /// Re-expand a solution of the merged instance into one for the original
    /// level structure. Balls of a merged level are dealt to the group's
    /// original levels in order, filling each budget before moving on; every
    /// ball keeps its realized radius, so an original level j is charged
    /// dilation realized/r_j.
    pub fn expand_solution(&self, merged: &Solution) -> Result<Solution> {
        if merged.levels.len() != self.groups.len() {
            return Err(Error::contract(format!(
                "merged solution has {} levels, merge map has {} groups",
                merged.levels.len(),
                self.groups.len()
            )));
        }
        let mut levels: Vec<SolutionLevel> = self
            .original_radii
            .iter()
            .map(|_| SolutionLevel {
                realized_radius: 0.0,
                centers: Vec::new(),
            })
            .collect();
        for (g, lvl) in merged.levels.iter().enumerate() {
            let mut remaining: &[Point] = &lvl.centers;
            for &orig in &self.groups[g] {
                if remaining.is_empty() {
                    break;
                }
                let take = remaining.len().min(self.original_budgets[orig]);
                levels[orig].centers.extend_from_slice(&remaining[..take]);
                levels[orig].realized_radius = lvl.realized_radius;
                remaining = &remaining[take..];
            }
            if !remaining.is_empty() {
                return Err(Error::contract(format!(
                    "merged level {g} holds more balls than the group budget"
                )));
            }
        }
        Ok(Solution { levels })
    }
}

/// Merge adjacent radius classes closer than a factor `beta` apart.
///
/// Whenever r_i < beta * r_{i+1} the two levels collapse into one with the
/// larger radius and the summed budget, cascading until every adjacent ratio
/// is at least beta (levels with radius 0 never trigger a merge). Restriction
/// metadata is dropped: callers merge before imposing center restrictions.
pub fn merge_close_radii(
    radii: &[f64],
    budgets: &[usize],
    beta: f64,
) -> Result<(Vec<f64>, Vec<usize>, RadiusMergeMap)> {
    if beta <= 1.0 {
        return Err(Error::input(format!("beta must exceed 1, got {beta}")));
    }
    if radii.len() != budgets.len() || radii.is_empty() {
        return Err(Error::input("radii and budgets must be nonempty and of equal length"));
    }
    let mut stack: Vec<(f64, usize, Vec<usize>)> = Vec::with_capacity(radii.len());
    for (j, (&r, &k)) in radii.iter().zip(budgets).enumerate() {
        stack.push((r, k, vec![j]));
        while stack.len() >= 2 {
            let last = stack.len() - 1;
            if stack[last - 1].0 < beta * stack[last].0 {
                let (_, k_low, group_low) = stack.pop().expect("len >= 2");
                let top = stack.last_mut().expect("len >= 1");
                top.1 += k_low;
                top.2.extend(group_low);
            } else {
                break;
            }
        }
    }
    let merged_radii: Vec<f64> = stack.iter().map(|s| s.0).collect();
    let merged_budgets: Vec<usize> = stack.iter().map(|s| s.1).collect();
    let groups: Vec<Vec<usize>> = stack.into_iter().map(|s| s.2).collect();
    Ok((
        merged_radii,
        merged_budgets,
        RadiusMergeMap {
            groups,
            original_radii: radii.to_vec(),
            original_budgets: budgets.to_vec(),
        },
    ))
}

/// A structural defect found by [`validate_instance`]. Violations are data,
/// not errors: callers decide what to do with them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    RadiiNotNonincreasing,
    RadiusNegative(usize),
    LevelCountMismatch,
    TargetExceedsTotalWeight { target: u64, total: u64 },
    RedTargetExceedsTotal { target: u64, total: u64 },
    BlueTargetExceedsTotal { target: u64, total: u64 },
    WeightLengthMismatch,
    TriangleViolation(Point, Point, Point),
    RestrictionSeparationViolated(Point, Point),
}

/// Report structural problems with an instance. The O(n^3) triangle check
/// only runs when `check_triangle` is set.
pub fn validate_instance(instance: &Instance, check_triangle: bool) -> Vec<Violation> {
    let mut out = Vec::new();
    let radii = instance.radii();
    let budgets = instance.budgets();
    if radii.len() != budgets.len() || radii.is_empty() {
        out.push(Violation::LevelCountMismatch);
    }
    if radii.windows(2).any(|w| w[0] < w[1]) {
        out.push(Violation::RadiiNotNonincreasing);
    }
    for (i, &r) in radii.iter().enumerate() {
        if r < 0.0 || !r.is_finite() {
            out.push(Violation::RadiusNegative(i));
        }
    }
    let n = instance.space().n();
    match instance {
        Instance::Nukc(_) => {}
        Instance::Robust(inst) => {
            if inst.weights.len() != n {
                out.push(Violation::WeightLengthMismatch);
            } else if inst.target > inst.weights.total() {
                out.push(Violation::TargetExceedsTotalWeight {
                    target: inst.target,
                    total: inst.weights.total(),
                });
            }
        }
        Instance::Colorful(inst) => {
            if inst.red.len() != n || inst.blue.len() != n {
                out.push(Violation::WeightLengthMismatch);
            } else {
                if inst.target_red > inst.red.total() {
                    out.push(Violation::RedTargetExceedsTotal {
                        target: inst.target_red,
                        total: inst.red.total(),
                    });
                }
                if inst.target_blue > inst.blue.total() {
                    out.push(Violation::BlueTargetExceedsTotal {
                        target: inst.target_blue,
                        total: inst.blue.total(),
                    });
                }
            }
        }
    }
    if let Some(r) = instance.restriction() {
        for (a, &u) in r.set.iter().enumerate() {
            for &v in &r.set[a + 1..] {
                if instance.space().d(u, v) <= r.separation {
                    out.push(Violation::RestrictionSeparationViolated(u, v));
                }
            }
        }
    }
    if check_triangle {
        if let Some((p, q, r)) = instance.space().triangle_violation() {
            out.push(Violation::TriangleViolation(p, q, r));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum MetricJson {
    #[serde(rename = "matrix")]
    Matrix { d: Vec<Vec<f64>> },
    #[serde(rename = "points")]
    Points { coords: Vec<Vec<f64>>, norm: Norm },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightsJson {
    Single { w: Vec<u64> },
    Colored { red: Vec<u64>, blue: Vec<u64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetsJson {
    Single { m: u64 },
    Colored { mr: u64, mb: u64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestrictionJson {
    pub set: Vec<Point>,
    pub separation: f64,
}

/// On-disk instance format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceJson {
    pub kind: String,
    pub metric: MetricJson,
    pub radii: Vec<f64>,
    pub budgets: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightsJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub targets: Option<TargetsJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_restriction: Option<RestrictionJson>,
}

impl Instance {
    pub fn to_json(&self) -> InstanceJson {
        let metric = MetricJson::Matrix {
            d: self.space().matrix(),
        };
        let restriction = self.restriction().map(|r| RestrictionJson {
            set: r.set.clone(),
            separation: r.separation,
        });
        match self {
            Instance::Nukc(i) => InstanceJson {
                kind: "nukc".into(),
                metric,
                radii: i.radii.clone(),
                budgets: i.budgets.clone(),
                weights: None,
                targets: None,
                center_restriction: restriction,
            },
            Instance::Robust(i) => InstanceJson {
                kind: "robust".into(),
                metric,
                radii: i.radii.clone(),
                budgets: i.budgets.clone(),
                weights: Some(WeightsJson::Single {
                    w: i.weights.0.clone(),
                }),
                targets: Some(TargetsJson::Single { m: i.target }),
                center_restriction: restriction,
            },
            Instance::Colorful(i) => InstanceJson {
                kind: "colorful".into(),
                metric,
                radii: i.radii.clone(),
                budgets: i.budgets.clone(),
                weights: Some(WeightsJson::Colored {
                    red: i.red.0.clone(),
                    blue: i.blue.0.clone(),
                }),
                targets: Some(TargetsJson::Colored {
                    mr: i.target_red,
                    mb: i.target_blue,
                }),
                center_restriction: restriction,
            },
        }
    }

    pub fn from_json(json: &InstanceJson) -> Result<Instance> {
        let space = Arc::new(match &json.metric {
            MetricJson::Matrix { d } => MetricSpace::from_matrix(d)?,
            MetricJson::Points { coords, norm } => MetricSpace::from_points(coords, *norm)?,
        });
        if json.radii.len() != json.budgets.len() || json.radii.is_empty() {
            return Err(Error::input("radii and budgets must be nonempty and of equal length"));
        }
        if json.radii.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::input("radii must be nonincreasing"));
        }
        let restriction = match &json.center_restriction {
            None => None,
            Some(r) => Some(CenterRestriction::new(&space, r.set.clone(), r.separation)?),
        };
        let check_len = |w: &[u64]| -> Result<()> {
            if w.len() != space.n() {
                Err(Error::input("weight vector length must match the point count"))
            } else {
                Ok(())
            }
        };
        match json.kind.as_str() {
            "nukc" => Ok(Instance::Nukc(NukcInstance {
                space,
                radii: json.radii.clone(),
                budgets: json.budgets.clone(),
                restriction,
            })),
            "robust" => {
                let w = match &json.weights {
                    Some(WeightsJson::Single { w }) => Weights(w.clone()),
                    None => Weights::unit(space.n()),
                    _ => return Err(Error::input("robust instance expects weights {\"w\": [...]}")),
                };
                check_len(&w.0)?;
                let m = match &json.targets {
                    Some(TargetsJson::Single { m }) => *m,
                    _ => return Err(Error::input("robust instance expects targets {\"m\": int}")),
                };
                Ok(Instance::Robust(RobustInstance {
                    space,
                    radii: json.radii.clone(),
                    budgets: json.budgets.clone(),
                    weights: w,
                    target: m,
                    restriction,
                }))
            }
            "colorful" => {
                let (red, blue) = match &json.weights {
                    Some(WeightsJson::Colored { red, blue }) => {
                        (Weights(red.clone()), Weights(blue.clone()))
                    }
                    _ => {
                        return Err(Error::input(
                            "colorful instance expects weights {\"red\": [...], \"blue\": [...]}",
                        ))
                    }
                };
                check_len(&red.0)?;
                check_len(&blue.0)?;
                let (mr, mb) = match &json.targets {
                    Some(TargetsJson::Colored { mr, mb }) => (*mr, *mb),
                    _ => return Err(Error::input("colorful instance expects targets {\"mr\",\"mb\"}")),
                };
                Ok(Instance::Colorful(ColorfulInstance {
                    space,
                    radii: json.radii.clone(),
                    budgets: json.budgets.clone(),
                    red,
                    blue,
                    target_red: mr,
                    target_blue: mb,
                    restriction,
                }))
            }
            other => Err(Error::input(format!("unknown instance kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionLevelJson {
    pub radius_index: usize,
    pub realized_radius: f64,
    pub centers: Vec<Point>,
}

/// On-disk solution format; the report is attached when available.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionJson {
    pub levels: Vec<SolutionLevelJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<VerificationReport>,
}

impl Solution {
    pub fn to_json(&self, report: Option<VerificationReport>) -> SolutionJson {
        SolutionJson {
            levels: self
                .levels
                .iter()
                .enumerate()
                .map(|(i, l)| SolutionLevelJson {
                    radius_index: i,
                    realized_radius: l.realized_radius,
                    centers: l.centers.clone(),
                })
                .collect(),
            report,
        }
    }

    pub fn from_json(json: &SolutionJson, levels: usize) -> Result<Solution> {
        let mut sol = Solution::empty(&vec![0.0; levels]);
        for l in &json.levels {
            if l.radius_index >= levels {
                return Err(Error::input(format!(
                    "solution refers to level {} but the instance has {levels}",
                    l.radius_index
                )));
            }
            sol.levels[l.radius_index] = SolutionLevel {
                realized_radius: l.realized_radius,
                centers: l.centers.clone(),
            };
        }
        Ok(sol)
    }
}
