//! End-to-end 4-NUkC solver with dilation accounting.
//!
//! The chain: merge radius classes closer than beta apart; reduce the merged
//! T-level instance to an unweighted Robust (T-1)-NUkC instance on a net;
//! run round-or-cut over its coverage polytope; answer each residual
//! well-separated instance by reducing Robust -> Colorful -> self-coverage
//! and solving the final instance exactly with the well-separated DP; lift
//! everything back and re-expand merged levels.
//!
//! # Dilation bounds
//!
//! With merged radii R_0 >= ... >= R_{T-1}, bottom radius rb = R_{T-1} and
//! robust radii P_i = R_i + 2 rb, the realized radii are bounded per route:
//!
//! - greedy (T = 1): 2 R_0.
//! - rounded (case 1): alpha_i P_i + 2 rb per level, alpha = (6, 2, 2),
//!   plus 2 rb at the bottom level.
//! - residual chain, t = T-1 robust levels:
//!   - t = 1: 2 P_0 + 2 rb, bottom 2 rb.
//!   - t = 2: (2 P_0 + 6 P_1, 3 P_1) + 2 rb each, bottom 2 rb.
//!   - t = 3: (2 P_0 + 49 P_1 + 153 P_2, 23 P_1 + 72 P_2, 3 P_2) + 2 rb
//!     each, bottom 2 rb. The coefficients compose the colorful reduction
//!     (+3 rho_3 per level), the self-coverage radii (c_1 + 26 c_2) and its
//!     two lift expansions (+20 c_2, +3 c_2).
//!
//! A merged level's bound is charged to each original level it absorbed, so
//! merging costs at most a factor beta on top. The worst route coefficient
//! is 23 + 72/beta + 192/beta^2 at the second level; with the default
//! beta = 30 every beta-separated input solves within dilation 25.62, and
//! arbitrary inputs within beta times that. The default beta is the
//! smallest integer with 26/beta + 81/beta^2 + 214/beta^3 <= 1, which is
//! what the well-separated DP's separation requirement needs after the
//! radius expansions.

use crate::colorful::{phase1, phase1_lift, phase2_lift, phase2_split};
use crate::error::Error;
use crate::model::{
    merge_close_radii, verify_solution, ColorfulInstance, Instance, NukcInstance,
    RobustInstance, Solution, SolutionLevel, VerificationReport, Weights,
};
use crate::net::{lift_robust_solution, reduce_to_robust};
use crate::roc::{ellipsoid_loop, RocConfig, RocOutcome, RocStats, SolveRoute};
use crate::selfcov::{lift_self_coverage, phase1_blue, phase2_red};
use crate::wsdp::solve_ws;
use crate::Result;
use rayon::prelude::*;
use serde::Serialize;
use std::time::Instant;

/// Default radius-merge threshold; see the module docs for the derivation.
pub const DEFAULT_BETA: f64 = 30.0;

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub beta: f64,
    /// Ellipsoid scale threshold for concluding infeasibility.
    pub eps: f64,
    pub iteration_cap: Option<usize>,
    pub brute_budget: u64,
    /// Seed recorded for generator runs; the solver itself is deterministic.
    pub seed: u64,
    pub case2_prune: bool,
    pub collect_cuts: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            beta: DEFAULT_BETA,
            eps: 1e-6,
            iteration_cap: None,
            brute_budget: crate::exact::DEFAULT_BRUTE_BUDGET,
            seed: 0,
            case2_prune: false,
            collect_cuts: false,
        }
    }
}

impl PipelineConfig {
    pub fn roc(&self) -> RocConfig {
        RocConfig {
            eps: self.eps,
            iteration_cap: self.iteration_cap,
            case2_prune: self.case2_prune,
            collect_cuts: self.collect_cuts,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub stage: String,
    pub effect: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelLedger {
    pub prescribed: f64,
    pub bound: f64,
    pub realized: f64,
    pub dilation_bound: f64,
    pub dilation_realized: f64,
}

/// Radius bookkeeping for one solve: which transformations were applied and
/// the per-level bound they compose to, against the realized radii.
#[derive(Debug, Clone, Serialize)]
pub struct DilationLedger {
    pub stages: Vec<StageRecord>,
    pub levels: Vec<LevelLedger>,
    pub route: String,
    /// Max over levels of bound/prescribed; the artifact's answer to the
    /// approximation constant on this instance.
    pub composed_constant: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PipelineStats {
    pub merge_ms: f64,
    pub reduce_ms: f64,
    pub solve_ms: f64,
    pub lift_ms: f64,
    pub verify_ms: f64,
    pub iterations: usize,
    pub oracle_calls: usize,
    pub ws_solves: usize,
    pub cache_hits: usize,
    pub iteration_cap: usize,
    pub hit_cap: bool,
    pub route: String,
}

#[derive(Debug, Clone)]
pub enum PipelineOutcome {
    Solved {
        solution: Solution,
        report: VerificationReport,
        ledger: DilationLedger,
        stats: PipelineStats,
        roc_stats: Option<RocStats>,
    },
    Infeasible {
        stats: PipelineStats,
        roc_stats: Option<RocStats>,
    },
}

fn ms(from: Instant) -> f64 {
    from.elapsed().as_secs_f64() * 1e3
}

/// Separation needed by the residual chain: the recorded candidate
/// separation (3 * top radius) must dominate twice the top radius of the
/// final well-separated colorful instance.
fn chain_separation_ok(robust_radii: &[f64]) -> bool {
    let t = robust_radii.len();
    let rho0 = 2.0 * robust_radii[0];
    match t {
        1 => true,
        2 => 3.0 * rho0 >= 2.0 * (rho0 + 3.0 * robust_radii[1]),
        3 => {
            let c1 = rho0 + 3.0 * robust_radii[2];
            let c2 = robust_radii[1] + 3.0 * robust_radii[2];
            3.0 * rho0 >= 2.0 * (c1 + 26.0 * c2)
        }
        _ => false,
    }
}

/// Solve a well-separated robust residual instance exactly-or-not through
/// the colorful and self-coverage reductions; None means infeasible.
pub fn ws_solve_chain(ws: &RobustInstance) -> Result<Option<Solution>> {
    let t = ws.radii.len();
    if ws.target == 0 {
        return Ok(Some(Solution::empty(&ws.radii)));
    }
    if ws.target > ws.weights.total() {
        return Ok(None);
    }
    let Some(restriction) = &ws.restriction else {
        return Err(Error::input("well-separated chain requires a center restriction"));
    };
    match t {
        1 => {
            let colorful = ColorfulInstance {
                space: ws.space.clone(),
                radii: vec![ws.radii[0], 0.0],
                budgets: vec![ws.budgets[0], 0],
                red: ws.weights.clone(),
                blue: Weights::zero(ws.space.n()),
                target_red: ws.target,
                target_blue: 0,
                restriction: Some(restriction.clone()),
            };
            if restriction.separation < 2.0 * colorful.radii[0] {
                return Err(Error::Config(format!(
                    "separation {} cannot support top radius {}",
                    restriction.separation, colorful.radii[0]
                )));
            }
            let Some(sol) = solve_ws(&colorful)? else { return Ok(None) };
            Ok(Some(Solution {
                levels: vec![sol.levels[0].clone()],
            }))
        }
        2 => {
            let (reduced, p1) = phase1(ws)?;
            let splits = phase2_split(&reduced)?;
            let found = splits
                .par_iter()
                .find_map_first(|(colorful, sctx)| {
                    let run = || -> Result<Option<Solution>> {
                        let wrapped = ColorfulInstance {
                            space: colorful.space.clone(),
                            radii: vec![colorful.radii[0], 0.0],
                            budgets: vec![colorful.budgets[0], 0],
                            red: colorful.red.clone(),
                            blue: colorful.blue.clone(),
                            target_red: colorful.target_red,
                            target_blue: colorful.target_blue,
                            restriction: colorful.restriction.clone(),
                        };
                        if restriction.separation < 2.0 * wrapped.radii[0] {
                            return Err(Error::Config(format!(
                                "separation {} cannot support top radius {}",
                                restriction.separation, wrapped.radii[0]
                            )));
                        }
                        let Some(sol) = solve_ws(&wrapped)? else { return Ok(None) };
                        let narrowed = Solution {
                            levels: vec![sol.levels[0].clone()],
                        };
                        let to_reduced = phase2_lift(sctx, &reduced, &narrowed)?;
                        Ok(Some(phase1_lift(&p1, &to_reduced)?))
                    };
                    match run() {
                        Ok(Some(sol)) => Some(Ok(sol)),
                        Ok(None) => None,
                        Err(e) => Some(Err(e)),
                    }
                })
                .transpose()?;
            Ok(found)
        }
        3 => {
            let (reduced, p1) = phase1(ws)?;
            let splits = phase2_split(&reduced)?;
            let found = splits
                .par_iter()
                .find_map_first(|(colorful, sctx)| {
                    let run = || -> Result<Option<Solution>> {
                        let (intermediate, bctx) = phase1_blue(colorful)?;
                        let (fin, rctx) = phase2_red(&intermediate)?;
                        if restriction.separation < 2.0 * fin.radii[0] {
                            return Err(Error::Config(format!(
                                "separation {} cannot support top radius {}",
                                restriction.separation, fin.radii[0]
                            )));
                        }
                        let Some(sol) = solve_ws(&fin)? else { return Ok(None) };
                        let to_colorful = lift_self_coverage(&bctx, &rctx, &sol)?;
                        let to_reduced = phase2_lift(sctx, &reduced, &to_colorful)?;
                        Ok(Some(phase1_lift(&p1, &to_reduced)?))
                    };
                    match run() {
                        Ok(Some(sol)) => Some(Ok(sol)),
                        Ok(None) => None,
                        Err(e) => Some(Err(e)),
                    }
                })
                .transpose()?;
            Ok(found)
        }
        other => Err(Error::input(format!(
            "well-separated chain supports 1..=3 levels, got {other}"
        ))),
    }
}

/// Greedy cover for a single-level instance: if the instance is feasible at
/// dilation 1, picking each uncovered point (smallest id first) with a
/// doubled ball uses no more balls than the budget.
fn solve_single_level(instance: &NukcInstance) -> Option<Solution> {
    let r = instance.radii[0];
    let n = instance.space.n();
    let mut covered = vec![false; n];
    let mut centers = Vec::new();
    for p in 0..n {
        if covered[p] {
            continue;
        }
        if centers.len() == instance.budgets[0] {
            return None;
        }
        centers.push(p);
        for q in 0..n {
            if instance.space.d(p, q) <= 2.0 * r {
                covered[q] = true;
            }
        }
    }
    Some(Solution {
        levels: vec![SolutionLevel {
            realized_radius: if centers.is_empty() { 0.0 } else { 2.0 * r },
            centers,
        }],
    })
}

fn merged_route_bounds(merged_radii: &[f64], route: SolveRoute) -> Vec<f64> {
    let t_merged = merged_radii.len();
    if t_merged == 1 {
        return vec![2.0 * merged_radii[0]];
    }
    let rb = merged_radii[t_merged - 1];
    let p: Vec<f64> = merged_radii[..t_merged - 1]
        .iter()
        .map(|r| r + 2.0 * rb)
        .collect();
    let robust_bounds: Vec<f64> = match route {
        SolveRoute::TrivialEmpty => vec![0.0; p.len()],
        SolveRoute::Rounded => p
            .iter()
            .enumerate()
            .map(|(i, &pi)| if i == 0 { 6.0 * pi } else { 2.0 * pi })
            .collect(),
        SolveRoute::Residual => match p.len() {
            1 => vec![2.0 * p[0]],
            2 => vec![2.0 * p[0] + 6.0 * p[1], 3.0 * p[1]],
            3 => vec![
                2.0 * p[0] + 49.0 * p[1] + 153.0 * p[2],
                23.0 * p[1] + 72.0 * p[2],
                3.0 * p[2],
            ],
            _ => unreachable!("chain supports at most three robust levels"),
        },
    };
    let mut bounds: Vec<f64> = robust_bounds
        .iter()
        .map(|b| if *b == 0.0 { 0.0 } else { b + 2.0 * rb })
        .collect();
    bounds.push(2.0 * rb);
    bounds
}

fn route_name(route: SolveRoute) -> &'static str {
    match route {
        SolveRoute::TrivialEmpty => "trivial-empty",
        SolveRoute::Rounded => "lp-rounding",
        SolveRoute::Residual => "well-separated-chain",
    }
}

/// Solve a NUkC instance with up to four radius classes.
pub fn solve_4nukc(instance: &NukcInstance, cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    let t = instance.radii.len();
    if t == 0 || t > 4 {
        return Err(Error::input(format!("pipeline supports 1..=4 radius levels, got {t}")));
    }
    if instance.radii.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::input("radii must be nonincreasing"));
    }
    let mut stats = PipelineStats::default();
    let mut stages: Vec<StageRecord> = Vec::new();

    let t0 = Instant::now();
    let (merged_radii, merged_budgets, merge_map) =
        merge_close_radii(&instance.radii, &instance.budgets, cfg.beta)?;
    stats.merge_ms = ms(t0);
    stages.push(StageRecord {
        stage: "merge".into(),
        effect: format!(
            "beta {} folded {} levels into {}",
            cfg.beta,
            instance.radii.len(),
            merged_radii.len()
        ),
    });
    let merged = NukcInstance {
        space: instance.space.clone(),
        radii: merged_radii.clone(),
        budgets: merged_budgets,
        restriction: None,
    };

    let (merged_solution, route, roc_stats): (Option<Solution>, SolveRoute, Option<RocStats>) =
        if merged.radii.len() == 1 {
            let t1 = Instant::now();
            let sol = solve_single_level(&merged);
            stats.solve_ms = ms(t1);
            stages.push(StageRecord {
                stage: "greedy-cover".into(),
                effect: "single level solved by doubling".into(),
            });
            (sol, SolveRoute::Residual, None)
        } else {
            let t1 = Instant::now();
            let (robust, net_ctx) = reduce_to_robust(&merged)?;
            stats.reduce_ms = ms(t1);
            stages.push(StageRecord {
                stage: "net-reduction".into(),
                effect: format!(
                    "net of {} points, robust target {}, radii +{}",
                    net_ctx.net.len(),
                    robust.target,
                    net_ctx.net_radius
                ),
            });
            if !chain_separation_ok(&robust.radii) {
                return Err(Error::Config(format!(
                    "radii {:?} break the separation chain; raise beta above {}",
                    robust.radii, cfg.beta
                )));
            }
            let t2 = Instant::now();
            let (outcome, roc_stats) = ellipsoid_loop(&robust, &ws_solve_chain, &cfg.roc())?;
            stats.solve_ms = ms(t2);
            stats.iterations = roc_stats.iterations;
            stats.oracle_calls = roc_stats.oracle_calls;
            stats.ws_solves = roc_stats.ws_solves;
            stats.cache_hits = roc_stats.cache_hits;
            stats.iteration_cap = roc_stats.cap;
            stats.hit_cap = roc_stats.hit_cap;
            match outcome {
                RocOutcome::Infeasible => (None, SolveRoute::Residual, Some(roc_stats)),
                RocOutcome::Solved { solution, route } => {
                    let t3 = Instant::now();
                    let lifted = lift_robust_solution(&net_ctx, &robust, &solution)?;
                    stats.lift_ms = ms(t3);
                    stages.push(StageRecord {
                        stage: "net-lift".into(),
                        effect: format!("balls +{}, bottom level restored", net_ctx.net_radius),
                    });
                    (Some(lifted), route, Some(roc_stats))
                }
            }
        };

    let Some(merged_solution) = merged_solution else {
        stats.route = "infeasible".into();
        return Ok(PipelineOutcome::Infeasible { stats, roc_stats });
    };
    stats.route = route_name(route).into();

    let expanded = merge_map.expand_solution(&merged_solution)?;
    stages.push(StageRecord {
        stage: "merge-expand".into(),
        effect: "merged-level balls dealt back to original levels".into(),
    });

    let t4 = Instant::now();
    let report = verify_solution(&Instance::Nukc(instance.clone()), &expanded)?;
    stats.verify_ms = ms(t4);
    if !report.pass {
        return Err(Error::claim("pipeline produced a solution that fails verification"));
    }

    // per-level bounds: merged-route bounds charged to each original level
    let merged_bounds = merged_route_bounds(&merged_radii, route);
    let mut levels = Vec::with_capacity(t);
    for (g, group) in merge_map.groups.iter().enumerate() {
        for &orig in group {
            let prescribed = instance.radii[orig];
            let bound = merged_bounds[g];
            let realized = expanded.levels[orig].realized_radius;
            levels.push(LevelLedger {
                prescribed,
                bound,
                realized,
                dilation_bound: crate::model::dilation(bound, prescribed),
                dilation_realized: crate::model::dilation(realized, prescribed),
            });
        }
    }
    levels.sort_by(|a, b| b.prescribed.partial_cmp(&a.prescribed).unwrap());
    for lvl in &levels {
        if lvl.realized > lvl.bound + 1e-9 {
            return Err(Error::claim(format!(
                "realized radius {} exceeds the ledger bound {}",
                lvl.realized, lvl.bound
            )));
        }
    }
    let composed_constant = levels
        .iter()
        .map(|l| l.dilation_bound)
        .filter(|d| d.is_finite())
        .fold(0.0f64, f64::max);
    let ledger = DilationLedger {
        stages,
        levels,
        route: stats.route.clone(),
        composed_constant,
    };

    Ok(PipelineOutcome::Solved {
        solution: expanded,
        report,
        ledger,
        stats,
        roc_stats,
    })
}

/// Solve a unit-weight robust instance by round-or-cut with the residual
/// chain as the well-separated solver.
pub fn solve_robust(
    instance: &RobustInstance,
    cfg: &PipelineConfig,
) -> Result<(Option<(Solution, VerificationReport)>, RocStats)> {
    let (outcome, stats) = ellipsoid_loop(instance, &ws_solve_chain, &cfg.roc())?;
    match outcome {
        RocOutcome::Infeasible => Ok((None, stats)),
        RocOutcome::Solved { solution, .. } => {
            let report = verify_solution(&Instance::Robust(instance.clone()), &solution)?;
            if !report.pass {
                return Err(Error::claim("robust solution failed verification"));
            }
            Ok((Some((solution, report)), stats))
        }
    }
}

/// Solve a 2-level colorful instance with a candidate-center restriction by
/// the self-coverage reduction plus the exact DP; the result is dilated but
/// verified against the input targets.
pub fn solve_colorful_restricted(
    instance: &ColorfulInstance,
) -> Result<Option<(Solution, VerificationReport)>> {
    let Some(restriction) = &instance.restriction else {
        return Err(Error::input(
            "colorful solving requires a candidate-center restriction",
        ));
    };
    let (intermediate, bctx) = phase1_blue(instance)?;
    let (fin, rctx) = phase2_red(&intermediate)?;
    if restriction.separation < 2.0 * fin.radii[0] {
        return Err(Error::Config(format!(
            "separation {} cannot support the reduced top radius {}",
            restriction.separation, fin.radii[0]
        )));
    }
    let Some(sol) = solve_ws(&fin)? else { return Ok(None) };
    let lifted = lift_self_coverage(&bctx, &rctx, &sol)?;
    let report = verify_solution(&Instance::Colorful(instance.clone()), &lifted)?;
    if !report.pass {
        return Err(Error::claim("lifted colorful solution failed verification"));
    }
    Ok(Some((lifted, report)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{
        brute_solve, gen_infeasible_nukc, plant_instance, PlantParams, PlantVariant,
        DEFAULT_BRUTE_BUDGET,
    };
    use crate::model::MetricSpace;
    use std::sync::Arc;

    fn planted_4nukc(seed: u64, n: usize) -> NukcInstance {
        let params = PlantParams::new(seed, PlantVariant::Nukc, n, 4)
            .with_ratio(DEFAULT_BETA)
            .with_budgets(vec![2, 2, 2, 2]);
        match plant_instance(&params).unwrap().instance {
            Instance::Nukc(i) => i,
            _ => unreachable!(),
        }
    }

    #[test]
    fn planted_instances_solve_within_bounds() {
        for seed in 0..4 {
            let inst = planted_4nukc(seed, 14);
            let outcome = solve_4nukc(&inst, &PipelineConfig::default()).unwrap();
            match outcome {
                PipelineOutcome::Solved { report, ledger, .. } => {
                    assert!(report.pass);
                    for lvl in &ledger.levels {
                        assert!(lvl.realized <= lvl.bound + 1e-9);
                    }
                }
                PipelineOutcome::Infeasible { .. } => {
                    panic!("planted instance {seed} must be solvable")
                }
            }
        }
    }

    #[test]
    fn zero_lower_radii_degenerate_chain_still_solves() {
        let inst = NukcInstance {
            space: Arc::new(MetricSpace::line(&[0.0, 1.0, 2.0, 50.0, 51.0, 100.0])),
            radii: vec![2.0, 0.0, 0.0, 0.0],
            budgets: vec![1, 1, 1, 1],
            restriction: None,
        };
        assert!(brute_solve(&Instance::Nukc(inst.clone()), 1.0, DEFAULT_BRUTE_BUDGET)
            .unwrap()
            .feasible);
        match solve_4nukc(&inst, &PipelineConfig::default()).unwrap() {
            PipelineOutcome::Solved { report, .. } => assert!(report.pass),
            PipelineOutcome::Infeasible { .. } => panic!("degenerate instance must solve"),
        }
    }

    #[test]
    fn brute_infeasible_instances_are_reported_infeasible() {
        for seed in 0..2 {
            let inst = gen_infeasible_nukc(seed, 5, 2, 800.0).unwrap();
            // pad to 4 levels with zeros
            let mut radii = inst.radii.clone();
            let mut budgets = inst.budgets.clone();
            while radii.len() < 4 {
                radii.push(0.0);
                budgets.push(0);
            }
            let inst4 = NukcInstance {
                space: inst.space.clone(),
                radii,
                budgets,
                restriction: None,
            };
            match solve_4nukc(&inst4, &PipelineConfig::default()).unwrap() {
                PipelineOutcome::Infeasible { stats, .. } => {
                    assert!(stats.iterations <= stats.iteration_cap.max(1));
                }
                PipelineOutcome::Solved { .. } => {
                    panic!("infeasible instance {seed} must not produce a solution")
                }
            }
        }
    }

    #[test]
    fn merged_levels_charge_their_original_radii() {
        // radii within beta of each other collapse; budgets pool
        let inst = NukcInstance {
            space: Arc::new(MetricSpace::line(&[0.0, 3.0, 80.0, 83.0])),
            radii: vec![4.0, 3.0, 2.0, 1.0],
            budgets: vec![1, 1, 1, 1],
            restriction: None,
        };
        match solve_4nukc(&inst, &PipelineConfig::default()).unwrap() {
            PipelineOutcome::Solved { ledger, report, .. } => {
                assert!(report.pass);
                assert_eq!(ledger.levels.len(), 4);
            }
            PipelineOutcome::Infeasible { .. } => panic!("instance is coverable"),
        }
    }
}
