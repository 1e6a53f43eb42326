//! Small dense LP machinery: a two-phase simplex returning vertex (basic
//! feasible) solutions under Bland's rule, and central-cut ellipsoid
//! geometry. Both are sized for desk-scale instances; reduced costs are
//! recomputed from the tableau every iteration, trading speed for
//! bookkeeping that cannot drift.

use crate::error::Error;
use crate::Result;

/// Feasibility tolerance for constraint satisfaction checks.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Pivots smaller than this are treated as zero.
pub const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// maximize c*x subject to the constraints and x >= 0.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub maximize: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

#[derive(Debug, Clone)]
pub struct VertexSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub enum SimplexOutcome {
    Optimal(VertexSolution),
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<f64>>, // m x (total + 1), last column rhs
    basis: Vec<usize>,
    total: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v /= piv;
        }
        for i in 0..self.rows.len() {
            if i == row {
                continue;
            }
            let factor = self.rows[i][col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..=self.total {
                let delta = factor * self.rows[row][j];
                self.rows[i][j] -= delta;
            }
        }
        self.basis[row] = col;
    }

    /// Primal simplex under Bland's rule: entering column is the smallest
    /// eligible index, leaving row breaks ratio ties by smallest basis index.
    fn run(&mut self, cost: &[f64], allowed: impl Fn(usize) -> bool) -> Result<bool> {
        for _round in 0..100_000 {
            let mut entering = None;
            for j in 0..self.total {
                if !allowed(j) || self.basis.contains(&j) {
                    continue;
                }
                let mut rc = cost[j];
                for (i, row) in self.rows.iter().enumerate() {
                    rc -= cost[self.basis[i]] * row[j];
                }
                if rc > PIVOT_TOL {
                    entering = Some(j);
                    break;
                }
            }
            let Some(col) = entering else {
                return Ok(true);
            };
            let mut leaving: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                if row[col] > PIVOT_TOL {
                    let ratio = row[self.total] / row[col];
                    let replace = match leaving {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - PIVOT_TOL
                                || (ratio <= lr + PIVOT_TOL && self.basis[i] < self.basis[li])
                        }
                    };
                    if replace {
                        leaving = Some((i, ratio));
                    }
                }
            }
            let Some((row, _)) = leaving else {
                return Ok(false); // unbounded in the entering direction
            };
            self.pivot(row, col);
        }
        Err(Error::Numerical("simplex failed to terminate".into()))
    }
}

/// Solve the LP to optimality, returning a vertex of the feasible region.
pub fn simplex_vertex_solve(lp: &LinearProgram) -> Result<SimplexOutcome> {
    let n = lp.maximize.len();
    for (i, c) in lp.constraints.iter().enumerate() {
        if c.coeffs.len() != n {
            return Err(Error::input(format!("constraint {i} has wrong arity")));
        }
        if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::input(format!("constraint {i} has non-finite data")));
        }
    }
    let m = lp.constraints.len();

    // Count auxiliary columns: slack for Le/Ge, artificial for Ge/Eq
    // (after normalizing every rhs to be nonnegative).
    let mut norm: Vec<(Vec<f64>, Relation, f64)> = Vec::with_capacity(m);
    for c in &lp.constraints {
        if c.rhs < 0.0 {
            let rel = match c.relation {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
            norm.push((c.coeffs.iter().map(|v| -v).collect(), rel, -c.rhs));
        } else {
            norm.push((c.coeffs.clone(), c.relation, c.rhs));
        }
    }
    let slack_count = norm
        .iter()
        .filter(|(_, r, _)| matches!(r, Relation::Le | Relation::Ge))
        .count();
    let artificial_count = norm
        .iter()
        .filter(|(_, r, _)| matches!(r, Relation::Ge | Relation::Eq))
        .count();
    let total = n + slack_count + artificial_count;
    let art_start = n + slack_count;

    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut slack_idx = n;
    let mut art_idx = art_start;
    for (coeffs, rel, rhs) in &norm {
        let mut row = vec![0.0; total + 1];
        row[..n].copy_from_slice(coeffs);
        row[total] = *rhs;
        match rel {
            Relation::Le => {
                row[slack_idx] = 1.0;
                basis.push(slack_idx);
                slack_idx += 1;
            }
            Relation::Ge => {
                row[slack_idx] = -1.0;
                slack_idx += 1;
                row[art_idx] = 1.0;
                basis.push(art_idx);
                art_idx += 1;
            }
            Relation::Eq => {
                row[art_idx] = 1.0;
                basis.push(art_idx);
                art_idx += 1;
            }
        }
        rows.push(row);
    }
    let mut tab = Tableau { rows, basis, total };

    if artificial_count > 0 {
        let mut phase1 = vec![0.0; total];
        for j in art_start..total {
            phase1[j] = -1.0;
        }
        let optimal = tab.run(&phase1, |_| true)?;
        if !optimal {
            return Err(Error::Numerical("phase-1 objective unbounded".into()));
        }
        let infeasibility: f64 = tab
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &b)| b >= art_start)
            .map(|(i, _)| tab.rows[i][total])
            .sum();
        if infeasibility > FEASIBILITY_TOL {
            return Ok(SimplexOutcome::Infeasible);
        }
        // Drive artificials out of the basis; rows that cannot pivot are
        // redundant and get dropped.
        let mut i = 0;
        while i < tab.basis.len() {
            if tab.basis[i] >= art_start {
                let col = (0..art_start).find(|&j| tab.rows[i][j].abs() > PIVOT_TOL);
                match col {
                    Some(j) => tab.pivot(i, j),
                    None => {
                        tab.rows.remove(i);
                        tab.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    let mut cost = vec![0.0; total];
    cost[..n].copy_from_slice(&lp.maximize);
    let optimal = tab.run(&cost, |j| j < art_start)?;
    if !optimal {
        return Ok(SimplexOutcome::Unbounded);
    }

    let mut x = vec![0.0; n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.rows[i][tab.total];
        }
    }
    let objective = lp
        .maximize
        .iter()
        .zip(&x)
        .map(|(c, v)| c * v)
        .sum();
    Ok(SimplexOutcome::Optimal(VertexSolution { x, objective }))
}

/// Rank of the tight-constraint system at `x`; equals the dimension exactly
/// when `x` is a vertex of the feasible region.
pub fn tight_constraint_rank(lp: &LinearProgram, x: &[f64], tol: f64) -> usize {
    let n = x.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for c in &lp.constraints {
        let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
        let tight = match c.relation {
            Relation::Le => (lhs - c.rhs).abs() <= tol,
            Relation::Ge => (lhs - c.rhs).abs() <= tol,
            Relation::Eq => true,
        };
        if tight {
            rows.push(c.coeffs.clone());
        }
    }
    for (j, &v) in x.iter().enumerate() {
        if v.abs() <= tol {
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            rows.push(row);
        }
    }
    matrix_rank(&mut rows, n)
}

fn matrix_rank(rows: &mut [Vec<f64>], n: usize) -> usize {
    let mut rank = 0;
    let m = rows.len();
    for col in 0..n {
        let mut piv = None;
        let mut best = 1e-9;
        for r in rank..m {
            if rows[r][col].abs() > best {
                best = rows[r][col].abs();
                piv = Some(r);
            }
        }
        let Some(p) = piv else { continue };
        rows.swap(rank, p);
        for r in 0..m {
            if r != rank && rows[r][col].abs() > 0.0 {
                let f = rows[r][col] / rows[rank][col];
                for j in 0..n {
                    let delta = f * rows[rank][j];
                    rows[r][j] -= delta;
                }
            }
        }
        rank += 1;
        if rank == m {
            break;
        }
    }
    rank
}

// ---------------------------------------------------------------------------
// Ellipsoid geometry
// ---------------------------------------------------------------------------

/// An ellipsoid { x : (x-c)^T A^{-1} (x-c) <= 1 } with A symmetric positive
/// definite, tracked with its log-determinant for volume accounting.
#[derive(Debug, Clone)]
pub struct EllipsoidState {
    pub center: Vec<f64>,
    /// Row-major D x D shape matrix A.
    pub shape: Vec<f64>,
    pub log_det: f64,
    pub dim: usize,
    pub iterations: usize,
}

impl EllipsoidState {
    /// Ball of radius sqrt(D) centered in the unit box; contains [0,1]^D.
    pub fn initial_box(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("ellipsoid dimension must be positive"));
        }
        let d = dim as f64;
        let mut shape = vec![0.0; dim * dim];
        for i in 0..dim {
            shape[i * dim + i] = d; // radius^2 = D
        }
        Ok(EllipsoidState {
            center: vec![0.5; dim],
            shape,
            log_det: d * d.ln(),
            dim,
            iterations: 0,
        })
    }

    /// Mean log semi-axis: (1/D) * ln(prod of semi-axes). Drops by roughly
    /// 1/(2 D (D+1)) per central cut.
    pub fn log_scale(&self) -> f64 {
        0.5 * self.log_det / self.dim as f64
    }

    fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|i| (0..d).map(|j| self.shape[i * d + j] * v[j]).sum())
            .collect()
    }

    /// Half-width of the ellipsoid along direction `a`: max of a*(x-c) over
    /// the ellipsoid. A cut deeper than this leaves nothing to keep.
    pub fn support_width(&self, a: &[f64]) -> f64 {
        let ag = self.mat_vec(a);
        let gag: f64 = a.iter().zip(&ag).map(|(x, y)| x * y).sum();
        gag.max(0.0).sqrt()
    }

    /// Central-cut update for a violated halfspace a*x <= b (a*center > b):
    /// the new ellipsoid contains the old one intersected with the
    /// halfspace, and the volume shrinks by a factor below 1.
    pub fn step(&self, a: &[f64], b: f64) -> Result<EllipsoidState> {
        let d = self.dim;
        if a.len() != d {
            return Err(Error::input("cut dimension mismatch"));
        }
        let violation: f64 = a.iter().zip(&self.center).map(|(x, y)| x * y).sum::<f64>() - b;
        if violation < 0.0 {
            return Err(Error::input(format!(
                "cut must not hold strictly at the center (violation {violation})"
            )));
        }
        let ag = self.mat_vec(a);
        let gag: f64 = a.iter().zip(&ag).map(|(x, y)| x * y).sum();
        if !(gag > 0.0) || !gag.is_finite() {
            return Err(Error::Numerical(format!(
                "shape matrix lost positive definiteness (g^T A g = {gag})"
            )));
        }
        let denom = gag.sqrt();
        let df = d as f64;
        let mut center = self.center.clone();
        for i in 0..d {
            center[i] -= ag[i] / (denom * (df + 1.0));
        }
        let (shape, log_det) = if d == 1 {
            (vec![self.shape[0] / 4.0], self.log_det + (0.25f64).ln())
        } else {
            let scale = df * df / (df * df - 1.0);
            let coef = 2.0 / (df + 1.0) / gag;
            let mut shape = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    shape[i * d + j] = scale * (self.shape[i * d + j] - coef * ag[i] * ag[j]);
                }
            }
            // symmetrize against drift
            for i in 0..d {
                for j in 0..i {
                    let avg = 0.5 * (shape[i * d + j] + shape[j * d + i]);
                    shape[i * d + j] = avg;
                    shape[j * d + i] = avg;
                }
                if !(shape[i * d + i] > 0.0) {
                    return Err(Error::Numerical(
                        "shape matrix lost positive definiteness on the diagonal".into(),
                    ));
                }
            }
            let log_det =
                self.log_det + df * scale.ln() + ((df - 1.0) / (df + 1.0)).ln();
            (shape, log_det)
        };
        Ok(EllipsoidState {
            center,
            shape,
            log_det,
            dim: d,
            iterations: self.iterations + 1,
        })
    }

    /// Cholesky factor of the shape matrix; None if not positive definite.
    pub fn cholesky(&self) -> Option<Vec<f64>> {
        let d = self.dim;
        let mut l = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let mut sum = self.shape[i * d + j];
                for k in 0..j {
                    sum -= l[i * d + k] * l[j * d + k];
                }
                if i == j {
                    if sum <= 0.0 {
                        return None;
                    }
                    l[i * d + i] = sum.sqrt();
                } else {
                    l[i * d + j] = sum / l[j * d + j];
                }
            }
        }
        Some(l)
    }

    /// Membership test via a dense solve of A y = (x - c).
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        let d = self.dim;
        let l = self
            .cholesky()
            .ok_or_else(|| Error::Numerical("shape matrix not positive definite".into()))?;
        // solve L z = x - c, then value = |z|^2 after L^T back-substitution
        let mut rhs: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        for i in 0..d {
            for k in 0..i {
                rhs[i] -= l[i * d + k] * rhs[k];
            }
            rhs[i] /= l[i * d + i];
        }
        let mut y = rhs.clone();
        for i in (0..d).rev() {
            for k in i + 1..d {
                y[i] -= l[k * d + i] * y[k];
            }
            y[i] /= l[i * d + i];
        }
        let value: f64 = x
            .iter()
            .zip(&self.center)
            .zip(&y)
            .map(|((a, b), z)| (a - b) * z)
            .sum();
        Ok(value <= 1.0 + 1e-9)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn le(coeffs: Vec<f64>, rhs: f64) -> Constraint {
        Constraint {
            coeffs,
            relation: Relation::Le,
            rhs,
        }
    }

    #[test]
    fn single_variable_box() {
        let lp = LinearProgram {
            maximize: vec![1.0],
            constraints: vec![le(vec![1.0], 1.0)],
        };
        match simplex_vertex_solve(&lp).unwrap() {
            SimplexOutcome::Optimal(v) => {
                assert!((v.x[0] - 1.0).abs() < 1e-9);
                assert!((v.objective - 1.0).abs() < 1e-9);
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_objective_lands_on_a_vertex() {
        let lp = LinearProgram {
            maximize: vec![1.0, 1.0],
            constraints: vec![le(vec![1.0, 1.0], 1.0)],
        };
        match simplex_vertex_solve(&lp).unwrap() {
            SimplexOutcome::Optimal(v) => {
                assert!((v.objective - 1.0).abs() < 1e-9);
                let nonzero = v.x.iter().filter(|&&x| x > 1e-9).count();
                assert_eq!(nonzero, 1, "optimum must sit on a vertex: {:?}", v.x);
                assert_eq!(tight_constraint_rank(&lp, &v.x, 1e-7), 2);
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let lp = LinearProgram {
            maximize: vec![1.0],
            constraints: vec![
                Constraint {
                    coeffs: vec![1.0],
                    relation: Relation::Ge,
                    rhs: 2.0,
                },
                le(vec![1.0], 1.0),
            ],
        };
        assert!(matches!(
            simplex_vertex_solve(&lp).unwrap(),
            SimplexOutcome::Infeasible
        ));
    }

    #[test]
    fn open_direction_is_unbounded() {
        let lp = LinearProgram {
            maximize: vec![1.0, 0.0],
            constraints: vec![le(vec![0.0, 1.0], 1.0)],
        };
        assert!(matches!(
            simplex_vertex_solve(&lp).unwrap(),
            SimplexOutcome::Unbounded
        ));
    }

    #[test]
    fn equality_rows_are_honored() {
        let lp = LinearProgram {
            maximize: vec![0.0, 1.0],
            constraints: vec![
                Constraint {
                    coeffs: vec![1.0, 1.0],
                    relation: Relation::Eq,
                    rhs: 2.0,
                },
                le(vec![0.0, 1.0], 1.5),
            ],
        };
        match simplex_vertex_solve(&lp).unwrap() {
            SimplexOutcome::Optimal(v) => {
                assert!((v.x[0] + v.x[1] - 2.0).abs() < 1e-7);
                assert!((v.x[1] - 1.5).abs() < 1e-7);
            }
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn vertex_solutions_every_time_on_random_lps() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let mut solved = 0;
        while solved < 50 {
            let n = rng.gen_range(1..=4);
            let m = rng.gen_range(1..=5);
            let lp = LinearProgram {
                maximize: (0..n).map(|_| rng.gen_range(-3..=3) as f64).collect(),
                constraints: (0..m)
                    .map(|_| Constraint {
                        coeffs: (0..n).map(|_| rng.gen_range(-2..=3) as f64).collect(),
                        relation: Relation::Le,
                        rhs: rng.gen_range(0..=4) as f64,
                    })
                    .chain(std::iter::once(le(vec![1.0; n], 10.0)))
                    .collect(),
            };
            match simplex_vertex_solve(&lp).unwrap() {
                SimplexOutcome::Optimal(v) => {
                    solved += 1;
                    for c in &lp.constraints {
                        let lhs: f64 = c.coeffs.iter().zip(&v.x).map(|(a, x)| a * x).sum();
                        assert!(lhs <= c.rhs + FEASIBILITY_TOL, "constraint violated");
                    }
                    assert_eq!(
                        tight_constraint_rank(&lp, &v.x, 1e-6),
                        n,
                        "returned point must be a vertex: {:?}",
                        v.x
                    );
                }
                SimplexOutcome::Unbounded => {}
                SimplexOutcome::Infeasible => panic!("x=0 is always feasible here"),
            }
        }
    }

    #[test]
    fn one_dimensional_cut_halves_the_interval() {
        // interval [-1, 1]: center 0, shape 1
        let e = EllipsoidState {
            center: vec![0.0],
            shape: vec![1.0],
            log_det: 0.0,
            dim: 1,
            iterations: 0,
        };
        let cut = e.step(&[1.0], 0.0).unwrap(); // keep x <= 0
        assert!((cut.center[0] + 0.5).abs() < 1e-12);
        assert!((cut.shape[0] - 0.25).abs() < 1e-12);
        // contains [-1, 0]
        for x in [-1.0, -0.5, 0.0] {
            assert!(cut.contains(&[x]).unwrap(), "lost point {x}");
        }
    }

    #[test]
    fn repeated_cuts_shrink_volume_monotonically() {
        let mut e = EllipsoidState::initial_box(3).unwrap();
        let mut prev = e.log_det;
        for _ in 0..10 {
            let a = vec![1.0, 0.0, 0.0];
            let b = e.center[0] - 1e-6;
            e = e.step(&a, b).unwrap();
            assert!(e.log_det < prev, "volume must strictly decrease");
            prev = e.log_det;
        }
    }

    #[test]
    fn containment_of_the_kept_halfspace_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let dim = 4;
        let e = EllipsoidState::initial_box(dim).unwrap();
        let a: Vec<f64> = vec![1.0, -2.0, 0.5, 0.0];
        let b = a.iter().zip(&e.center).map(|(x, y)| x * y).sum::<f64>() - 0.3;
        let cut = e.step(&a, b).unwrap();
        let l = e.cholesky().unwrap();
        let mut kept = 0;
        for _ in 0..1000 {
            // sample inside the original ellipsoid
            let u: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                continue;
            }
            let r: f64 = rng.gen_range(0.0f64..1.0).powf(1.0 / dim as f64);
            let unit: Vec<f64> = u.iter().map(|v| v / norm * r).collect();
            let x: Vec<f64> = (0..dim)
                .map(|i| {
                    e.center[i]
                        + (0..dim).map(|j| l[i * dim + j] * unit[j]).sum::<f64>()
                })
                .collect();
            let val: f64 = a.iter().zip(&x).map(|(p, q)| p * q).sum();
            if val <= b {
                kept += 1;
                assert!(
                    cut.contains(&x).unwrap(),
                    "point satisfying the cut fell outside the new ellipsoid"
                );
            }
        }
        assert!(kept > 50, "sampler should hit the kept halfspace");
    }

    #[test]
    fn volume_drop_matches_log_det_accounting() {
        for dim in [2usize, 5, 9] {
            let e = EllipsoidState::initial_box(dim).unwrap();
            let mut cur = e.clone();
            let n_steps = 25;
            for _ in 0..n_steps {
                let a: Vec<f64> = (0..dim).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect();
                let b = cur.center[0] - 1e-9;
                cur = cur.step(&a, b).unwrap();
            }
            let log_vol_drop = 0.5 * (cur.log_det - e.log_det);
            let bound = -(n_steps as f64) / (2.0 * (dim as f64 + 1.0));
            assert!(
                log_vol_drop <= bound + 1e-9,
                "dim {dim}: drop {log_vol_drop} misses bound {bound}"
            );
        }
    }
}
