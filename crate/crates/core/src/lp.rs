//! Dense two-phase primal simplex for equality-form LPs
//!
//! ```text
//! min c'x  s.t.  A x = b,  x_j ≥ l_j  (l_j may be -∞)
//! ```
//!
//! Bland's rule is used in both phases. Artificial columns are implicit: an
//! artificial that leaves the basis never re-enters, so only structural
//! columns are stored in the tableau.

use nalgebra::{DMatrix, DVector};

/// Equality-form LP with per-variable lower bounds.
#[derive(Debug, Clone, Default)]
pub struct LpInstance {
    pub objective: Vec<f64>,
    /// Sparse rows of `A`: `(column, value)`.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub rhs: Vec<f64>,
    /// `f64::NEG_INFINITY` marks a free variable.
    pub lower: Vec<f64>,
}

impl LpInstance {
    pub fn new(num_vars: usize) -> Self {
        LpInstance {
            objective: vec![0.0; num_vars],
            rows: Vec::new(),
            rhs: Vec::new(),
            lower: vec![0.0; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_row(&mut self, row: Vec<(usize, f64)>, rhs: f64) {
        self.rows.push(row);
        self.rhs.push(rhs);
    }

    fn check(&self) -> Result<(), String> {
        let n = self.num_vars();
        if self.lower.len() != n {
            return Err("lower bounds length differs from objective".into());
        }
        if self.rhs.len() != self.rows.len() {
            return Err("rhs length differs from row count".into());
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err("non-finite objective coefficient".into());
        }
        if self.rows.iter().flatten().any(|&(j, v)| j >= n || !v.is_finite()) {
            return Err("row entry out of range or non-finite".into());
        }
        Ok(())
    }

    /// `‖Ax - b‖_∞`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, &b)| (row.iter().map(|&(j, v)| v * x[j]).sum::<f64>() - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    fn rhs_norm(&self) -> f64 {
        self.rhs.iter().map(|b| b * b).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Numerical,
}

#[derive(Debug, Clone)]
pub struct LpResult {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row multipliers for `Optimal` results.
    pub duals: Option<Vec<f64>>,
    pub pivots: usize,
}

/// Outcome of a weak-duality spot check.
#[derive(Debug, Clone, Copy)]
pub struct DualityCheck {
    /// Largest violation of `d_j ≥ 0` (bounded) or `d_j = 0` (free).
    pub dual_infeasibility: f64,
    /// Largest `|(x_j - l_j) d_j|` over bounded variables.
    pub complementarity: f64,
    /// `c'x - (b'y + Σ l_j d_j)`.
    pub gap: f64,
}

/// Checks `y` as a dual certificate for `x` directly on the original data.
pub fn duality_check(inst: &LpInstance, x: &[f64], y: &[f64]) -> DualityCheck {
    let n = inst.num_vars();
    let mut d = inst.objective.clone();
    for (row, &yi) in inst.rows.iter().zip(y) {
        for &(j, v) in row {
            d[j] -= v * yi;
        }
    }
    let mut dual_inf: f64 = 0.0;
    let mut comp: f64 = 0.0;
    let mut dual_obj: f64 = inst.rhs.iter().zip(y).map(|(b, y)| b * y).sum();
    for j in 0..n {
        let l = inst.lower[j];
        if l.is_finite() {
            dual_inf = dual_inf.max(-d[j]);
            comp = comp.max(((x[j] - l) * d[j]).abs());
            dual_obj += l * d[j];
        } else {
            dual_inf = dual_inf.max(d[j].abs());
        }
    }
    DualityCheck {
        dual_infeasibility: dual_inf.max(0.0),
        complementarity: comp,
        gap: inst.objective_value(x) - dual_obj,
    }
}

const COST_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
/// Pivots smaller than this are rejected outright.
const TINY_PIVOT: f64 = 1e-11;
/// Primal slack allowed by the Harris ratio test.
const RATIO_SLACK: f64 = 1e-9;
/// Reduced costs above `-NOISE_TOL` on columns without a pivot are zeroed.
const NOISE_TOL: f64 = 1e-7;

/// Column `j` of the transformed problem maps to `sign * x_orig[var]` offset by `lower`.
#[derive(Clone, Copy)]
struct ColMap {
    var: usize,
    sign: f64,
}

struct Tableau {
    m: usize,
    /// Structural columns, plus rhs in the last slot.
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
    active: Vec<bool>,
}

impl Tableau {
    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width - 1)
    }

    fn pivot(&mut self, p: usize, q: usize, reduced: &mut [f64]) {
        let w = self.width;
        let piv = self.at(p, q);
        {
            let prow = &mut self.data[p * w..(p + 1) * w];
            let inv = 1.0 / piv;
            for v in prow.iter_mut() {
                *v *= inv;
            }
            prow[q] = 1.0;
        }
        let prow: Vec<f64> = self.row(p).to_vec();
        let nz: Vec<usize> = (0..w).filter(|&j| prow[j] != 0.0).collect();
        for i in 0..self.m {
            if i == p || !self.active[i] {
                continue;
            }
            let f = self.data[i * w + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.data[i * w..(i + 1) * w];
            for &j in &nz {
                row[j] -= f * prow[j];
            }
            row[q] = 0.0;
        }
        let f = reduced[q];
        if f != 0.0 {
            for &j in &nz {
                reduced[j] -= f * prow[j];
            }
            reduced[q] = 0.0;
        }
        self.basis[p] = q;
    }

    /// Bland's lowest-index entering column; leaving row by a two-pass
    /// Harris ratio test (largest pivot among near-minimal ratios, lowest
    /// basic index on ties).
    fn choose(&self, reduced: &[f64], ncols: usize) -> Choice {
        let Some(q) = (0..ncols).find(|&j| reduced[j] < -COST_TOL) else {
            return Choice::Optimal;
        };
        let mut theta = f64::INFINITY;
        let mut saw_tiny = false;
        for i in 0..self.m {
            if !self.active[i] {
                continue;
            }
            let a = self.at(i, q);
            if a > PIVOT_TOL {
                theta = theta.min((self.rhs(i).max(0.0) + RATIO_SLACK) / a);
            } else if a > TINY_PIVOT {
                saw_tiny = true;
            }
        }
        if theta.is_infinite() {
            return if saw_tiny { Choice::Numerical } else { Choice::Unbounded };
        }
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.m {
            if !self.active[i] {
                continue;
            }
            let a = self.at(i, q);
            if a > PIVOT_TOL && self.rhs(i).max(0.0) / a <= theta {
                let better = match best {
                    None => true,
                    Some((bi, ba)) => a > ba * (1.0 + 1e-12) || (a >= ba * (1.0 - 1e-12) && self.basis[i] < self.basis[bi]),
                };
                if better {
                    best = Some((i, a));
                }
            }
        }
        let (p, _) = best.expect("the row attaining theta qualifies");
        Choice::Pivot(p, q)
    }
}

enum Choice {
    Optimal,
    Pivot(usize, usize),
    Unbounded,
    Numerical,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    Stalled,
}

/// `c_j - Σ_i c_{B_i} T[i, j]` from the current tableau.
fn fresh_reduced(t: &Tableau, cost: &dyn Fn(usize) -> f64) -> Vec<f64> {
    let mut reduced = vec![0.0; t.width];
    for j in 0..t.width - 1 {
        reduced[j] = cost(j);
    }
    for i in 0..t.m {
        if !t.active[i] {
            continue;
        }
        let cb = cost(t.basis[i]);
        if cb != 0.0 {
            for (r, v) in reduced.iter_mut().zip(t.row(i)) {
                *r -= cb * v;
            }
        }
    }
    reduced
}

/// Pivots until optimal. A column that looks unbounded triggers one
/// recomputation of the reduced costs before the verdict is accepted.
fn run_phase(
    t: &mut Tableau,
    ncols: usize,
    cost: &dyn Fn(usize) -> f64,
    pivots: &mut usize,
    max_pivots: usize,
) -> PhaseEnd {
    let mut reduced = fresh_reduced(t, cost);
    let mut refreshed = false;
    loop {
        if *pivots > max_pivots {
            return PhaseEnd::Stalled;
        }
        match t.choose(&reduced, ncols) {
            Choice::Optimal => return PhaseEnd::Optimal,
            Choice::Pivot(p, q) => {
                t.pivot(p, q, &mut reduced);
                *pivots += 1;
                refreshed = false;
            }
            Choice::Unbounded | Choice::Numerical if !refreshed => {
                reduced = fresh_reduced(t, cost);
                refreshed = true;
            }
            choice => {
                // A column without a pivot whose reduced cost is within
                // cancellation noise cannot improve the objective.
                let q = (0..ncols)
                    .find(|&j| reduced[j] < -COST_TOL)
                    .expect("a non-optimal choice has an entering column");
                if reduced[q] > -NOISE_TOL {
                    reduced[q] = 0.0;
                    continue;
                }
                return match choice {
                    Choice::Unbounded => PhaseEnd::Unbounded,
                    _ => PhaseEnd::Stalled,
                };
            }
        }
    }
}

/// Solves the LP by the two-phase simplex method with Bland's rule.
pub fn solve_lp(inst: &LpInstance) -> LpResult {
    let fail = |status| LpResult {
        status,
        x: vec![0.0; inst.num_vars()],
        objective: f64::NAN,
        duals: None,
        pivots: 0,
    };
    if let Err(msg) = inst.check() {
        log::warn!("rejecting LP: {msg}");
        return fail(LpStatus::Numerical);
    }
    let n = inst.num_vars();

    // Shift bounded variables to x' ≥ 0, split free ones.
    let mut cols: Vec<ColMap> = Vec::with_capacity(n);
    let mut first_col = vec![0usize; n];
    for j in 0..n {
        first_col[j] = cols.len();
        cols.push(ColMap { var: j, sign: 1.0 });
        if !inst.lower[j].is_finite() {
            cols.push(ColMap { var: j, sign: -1.0 });
        }
    }
    let ncols = cols.len();
    let shift: Vec<f64> = inst
        .lower
        .iter()
        .map(|&l| if l.is_finite() { l } else { 0.0 })
        .collect();
    let cost: Vec<f64> = cols.iter().map(|c| c.sign * inst.objective[c.var]).collect();

    // Rows with nonzero structure; an empty row must have zero rhs.
    let mut kept: Vec<usize> = Vec::new();
    for (i, row) in inst.rows.iter().enumerate() {
        let b = inst.rhs[i] - row.iter().map(|&(j, v)| v * shift[j]).sum::<f64>();
        if row.iter().all(|&(_, v)| v == 0.0) {
            if b.abs() > 1e-9 * (1.0 + inst.rhs_norm()) {
                return fail(LpStatus::Infeasible);
            }
        } else {
            kept.push(i);
        }
    }
    let m = kept.len();
    let width = ncols + 1;
    let mut t = Tableau {
        m,
        width,
        data: vec![0.0; m * width],
        basis: (0..m).map(|i| ncols + i).collect(),
        active: vec![true; m],
    };
    for (ti, &i) in kept.iter().enumerate() {
        let row = &inst.rows[i];
        let b = inst.rhs[i] - row.iter().map(|&(j, v)| v * shift[j]).sum::<f64>();
        let sgn = if b < 0.0 { -1.0 } else { 1.0 };
        let base = ti * width;
        for &(j, v) in row {
            let c0 = first_col[j];
            t.data[base + c0] += sgn * v;
            if !inst.lower[j].is_finite() {
                t.data[base + c0 + 1] -= sgn * v;
            }
        }
        t.data[base + ncols] = sgn * b;
    }

    let max_pivots = 50 * (m + ncols) + 1000;
    let mut pivots = 0usize;

    // Phase 1: minimize the sum of artificials.
    let phase1_cost = |j: usize| if j >= ncols { 1.0 } else { 0.0 };
    match run_phase(&mut t, ncols, &phase1_cost, &mut pivots, max_pivots) {
        PhaseEnd::Optimal => {}
        // Phase 1 is bounded below by zero.
        PhaseEnd::Unbounded | PhaseEnd::Stalled => {
            return LpResult {
                pivots,
                ..fail(LpStatus::Numerical)
            }
        }
    }
    let infeas: f64 = (0..m).filter(|&i| t.basis[i] >= ncols).map(|i| t.rhs(i)).sum();
    let bnorm = kept.iter().map(|&i| inst.rhs[i].abs()).fold(0.0, f64::max);
    if infeas > 1e-8 * (1.0 + bnorm) {
        return LpResult {
            pivots,
            ..fail(LpStatus::Infeasible)
        };
    }
    // Drive remaining artificials out or retire redundant rows.
    for i in 0..m {
        if t.basis[i] < ncols {
            continue;
        }
        let q = (0..ncols)
            .filter(|&j| t.at(i, j).abs() > PIVOT_TOL)
            .max_by(|&a, &b| t.at(i, a).abs().total_cmp(&t.at(i, b).abs()));
        match q {
            Some(q) => {
                let mut dummy = vec![0.0; width];
                t.pivot(i, q, &mut dummy);
                pivots += 1;
            }
            None => t.active[i] = false,
        }
    }

    // Phase 2.
    let phase2_cost = |j: usize| if j >= ncols { 0.0 } else { cost[j] };
    match run_phase(&mut t, ncols, &phase2_cost, &mut pivots, max_pivots) {
        PhaseEnd::Optimal => {}
        PhaseEnd::Unbounded => {
            return LpResult {
                pivots,
                ..fail(LpStatus::Unbounded)
            }
        }
        PhaseEnd::Stalled => {
            return LpResult {
                pivots,
                ..fail(LpStatus::Numerical)
            }
        }
    }

    let mut xt = vec![0.0; ncols];
    for i in 0..m {
        if t.active[i] {
            xt[t.basis[i]] = t.rhs(i).max(0.0);
        }
    }
    let mut x = shift.clone();
    for (j, c) in cols.iter().enumerate() {
        x[c.var] += c.sign * xt[j];
    }
    let objective = inst.objective_value(&x);
    if inst.residual(&x) > 1e-8 * (1.0 + inst.rhs_norm()) {
        return LpResult {
            status: LpStatus::Numerical,
            x,
            objective,
            duals: None,
            pivots,
        };
    }
    let basic: Vec<usize> = (0..m).filter(|&i| t.active[i]).map(|i| t.basis[i]).collect();
    let duals = row_multipliers(inst, &cols, &first_col, &cost, &basic);
    LpResult {
        status: LpStatus::Optimal,
        x,
        objective,
        duals,
        pivots,
    }
}

/// Minimum-norm `y` with `A_B' y = c_B` over the basic transformed columns.
fn row_multipliers(
    inst: &LpInstance,
    cols: &[ColMap],
    first_col: &[usize],
    cost: &[f64],
    basic: &[usize],
) -> Option<Vec<f64>> {
    let nb = basic.len();
    if nb == 0 {
        return Some(vec![0.0; inst.num_rows()]);
    }
    let mut pos = vec![usize::MAX; cols.len()];
    for (k, &j) in basic.iter().enumerate() {
        pos[j] = k;
    }
    // Rows of A_B, sparse.
    let rows_b: Vec<Vec<(usize, f64)>> = inst
        .rows
        .iter()
        .map(|row| {
            let mut out = Vec::new();
            for &(j, v) in row {
                let c0 = first_col[j];
                if pos[c0] != usize::MAX {
                    out.push((pos[c0], v));
                }
                if !inst.lower[j].is_finite() && pos[c0 + 1] != usize::MAX {
                    out.push((pos[c0 + 1], -v));
                }
            }
            out
        })
        .collect();
    let mut gram = DMatrix::<f64>::zeros(nb, nb);
    for r in &rows_b {
        for &(a, va) in r {
            for &(b, vb) in r {
                gram[(a, b)] += va * vb;
            }
        }
    }
    let cb = DVector::from_iterator(nb, basic.iter().map(|&j| cost[j]));
    let z = gram.lu().solve(&cb)?;
    Some(
        rows_b
            .iter()
            .map(|r| r.iter().map(|&(k, v)| v * z[k]).sum())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rows_only() {
        let mut lp = LpInstance::new(2);
        lp.objective = vec![1.0, 2.0];
        lp.add_row(vec![(0, 0.0)], 0.0);
        let r = solve_lp(&lp);
        assert_eq!(r.status, LpStatus::Optimal);
        assert_eq!(r.objective, 0.0);
        assert_eq!(r.duals.unwrap(), vec![0.0]);
    }

    #[test]
    fn fixed_variable() {
        // min x s.t. x = 3, x ≥ 1
        let mut lp = LpInstance::new(1);
        lp.objective = vec![1.0];
        lp.lower = vec![1.0];
        lp.add_row(vec![(0, 1.0)], 3.0);
        let r = solve_lp(&lp);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.x[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded() {
        // min -x s.t. x ≥ 0
        let mut lp = LpInstance::new(1);
        lp.objective = vec![-1.0];
        assert_eq!(solve_lp(&lp).status, LpStatus::Unbounded);
    }

    #[test]
    fn infeasible() {
        // x + y = -1, x, y ≥ 0
        let mut lp = LpInstance::new(2);
        lp.add_row(vec![(0, 1.0), (1, 1.0)], -1.0);
        assert_eq!(solve_lp(&lp).status, LpStatus::Infeasible);
        let mut lp = LpInstance::new(1);
        lp.add_row(vec![], 2.0);
        assert_eq!(solve_lp(&lp).status, LpStatus::Infeasible);
    }

    #[test]
    fn free_variables_and_redundant_rows() {
        // min x0 + 2 x1, x0 - x1 = 1 (twice), x1 ≥ -2, x0 free
        let mut lp = LpInstance::new(2);
        lp.objective = vec![1.0, 2.0];
        lp.lower = vec![f64::NEG_INFINITY, -2.0];
        lp.add_row(vec![(0, 1.0), (1, -1.0)], 1.0);
        lp.add_row(vec![(0, 2.0), (1, -2.0)], 2.0);
        let r = solve_lp(&lp);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.x[1] + 2.0).abs() < 1e-12);
        assert!((r.x[0] + 1.0).abs() < 1e-12);
        assert!((r.objective + 5.0).abs() < 1e-12);
        let chk = duality_check(&lp, &r.x, r.duals.as_ref().unwrap());
        assert!(chk.dual_infeasibility < 1e-9);
        assert!(chk.complementarity < 1e-9);
        assert!(chk.gap.abs() < 1e-9);
    }

    #[test]
    fn degenerate_textbook() {
        // Beale's cycling example in equality form with slacks.
        let mut lp = LpInstance::new(7);
        lp.objective = vec![-0.75, 150.0, -0.02, 6.0, 0.0, 0.0, 0.0];
        lp.add_row(vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0), (4, 1.0)], 0.0);
        lp.add_row(vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0), (5, 1.0)], 0.0);
        lp.add_row(vec![(2, 1.0), (6, 1.0)], 1.0);
        let r = solve_lp(&lp);
        assert_eq!(r.status, LpStatus::Optimal);
        assert!((r.objective + 0.05).abs() < 1e-9);
        let chk = duality_check(&lp, &r.x, r.duals.as_ref().unwrap());
        assert!(chk.dual_infeasibility < 1e-7 && chk.complementarity < 1e-7);
    }
}
