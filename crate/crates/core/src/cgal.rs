//! Conditional-gradient augmented Lagrangian for constant-trace SDPs
//!
//! ```text
//! min ⟨C, X⟩  s.t.  A(X) = b,  X ⪰ 0,  tr X = a
//! ```
//!
//! Rows are normalized to unit Frobenius norm and then by the operator norm
//! of `A`, `C` by its Frobenius norm, and `X` by `a`. Each iteration moves
//! towards `vv*` for the smallest eigenvector of the block-diagonal gradient.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::eig::min_eigpair;
use crate::error::{Error, Result};
use crate::standard_form::{Entry, StandardSdp};

#[derive(Debug, Clone, Copy)]
pub struct CgalConfig {
    pub eps: f64,
    pub max_iters: usize,
    pub beta0: f64,
    /// Dual updates that would push `‖y‖` above this are skipped.
    pub dual_cap: f64,
    /// Window for the objective-change test.
    pub window: usize,
    pub seed: u64,
    /// Keep the residual of every iteration.
    pub record_history: bool,
    /// Check trace and smallest eigenvalue of `X` every this many iterations (0 = never).
    pub monitor_every: usize,
    /// Also require `τ - dual_bound ≤ eps·(1+|τ|)` before stopping.
    pub require_gap: bool,
}

impl Default for CgalConfig {
    fn default() -> Self {
        CgalConfig {
            eps: 1e-4,
            max_iters: 200_000,
            beta0: 1.0,
            dual_cap: 1e9,
            window: 50,
            seed: 0,
            record_history: false,
            monitor_every: 0,
            require_gap: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CgalStatus {
    Converged,
    IterationLimit,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub status: CgalStatus,
    /// `⟨C, X⟩` plus offset for the returned `X`.
    pub objective: f64,
    /// `‖Ā(X) - b̄‖ / (1 + ‖b̄‖)` with unit-norm rows.
    pub residual: f64,
    /// Best Lagrangian lower bound `a λ_min(C + A*w) - ⟨w, b⟩` seen.
    pub dual_bound: f64,
    pub iterations: usize,
    pub time_secs: f64,
    pub residual_history: Vec<f64>,
    /// Largest `|tr X - a| / a` observed by the monitor.
    pub trace_drift: f64,
    /// Smallest eigenvalue of `X` divided by `a` observed by the monitor.
    pub min_eig: f64,
}

/// Constraint rows grouped by block: `(row, r, c, value)`.
struct BlockOps {
    per_block: Vec<Vec<(usize, usize, usize, f64)>>,
}

impl BlockOps {
    fn new(nblocks: usize, rows: &[Vec<Entry>], scale: &[f64]) -> Self {
        let mut per_block = vec![Vec::new(); nblocks];
        for (i, row) in rows.iter().enumerate() {
            for &(b, r, c, v) in row {
                per_block[b].push((i, r, c, v * scale[i]));
            }
        }
        BlockOps { per_block }
    }

    fn apply(&self, x: &[DMatrix<f64>], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (b, ents) in self.per_block.iter().enumerate() {
            for &(i, r, c, v) in ents {
                out[i] += v * x[b][(r, c)];
            }
        }
    }

    /// `A(vv*)` for a vector living in block `b`.
    fn apply_rank_one(&self, b: usize, v: &DVector<f64>, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for &(i, r, c, val) in &self.per_block[b] {
            out[i] += val * v[r] * v[c];
        }
    }

    /// `acc += A*(w)`, symmetric.
    fn adjoint_add(&self, w: &[f64], acc: &mut [DMatrix<f64>]) {
        for (b, ents) in self.per_block.iter().enumerate() {
            let m = &mut acc[b];
            for &(i, r, c, v) in ents {
                let s = w[i] * v;
                if r == c {
                    m[(r, r)] += s;
                } else {
                    m[(r, c)] += 0.5 * s;
                    m[(c, r)] += 0.5 * s;
                }
            }
        }
    }
}

/// Frobenius norm of a functional as a symmetric matrix.
fn functional_norm(entries: &[Entry]) -> f64 {
    let mut acc = std::collections::HashMap::new();
    for &(b, r, c, v) in entries {
        *acc.entry((b, r, c)).or_insert(0.0) += v;
    }
    acc.iter()
        .map(|(&(_, r, c), &v): (&(usize, usize, usize), &f64)| if r == c { v * v } else { 0.5 * v * v })
        .sum::<f64>()
        .sqrt()
}

fn zeros(sizes: &[usize]) -> Vec<DMatrix<f64>> {
    sizes.iter().map(|&s| DMatrix::zeros(s, s)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖A‖_op` by power iteration on `A A*`.
fn operator_norm(ops: &BlockOps, sizes: &[usize], m: usize) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let mut z = vec![1.0 / (m as f64).sqrt(); m];
    let mut lam = 0.0;
    let mut az = vec![0.0; m];
    for _ in 0..100 {
        let mut blocks = zeros(sizes);
        ops.adjoint_add(&z, &mut blocks);
        ops.apply(&blocks, &mut az);
        let n = norm(&az);
        if n == 0.0 {
            return 1.0;
        }
        let converged = (n - lam).abs() <= 1e-6 * n;
        lam = n;
        z.iter_mut().zip(&az).for_each(|(zi, a)| *zi = a / n);
        if converged {
            break;
        }
    }
    // Power iteration approaches from below; a small margin keeps ‖Ã‖ ≤ 1.
    1.01 * lam.sqrt()
}

/// Solves the SDP; returns the blocks of `X` (original scaling) and a report.
pub fn solve(sdp: &StandardSdp, cfg: &CgalConfig) -> Result<(Vec<DMatrix<f64>>, SolveReport)> {
    if cfg.eps.is_nan() || cfg.eps <= 0.0 || cfg.beta0.is_nan() || cfg.beta0 <= 0.0 {
        return Err(Error::InvalidInput("CGAL needs eps > 0 and beta0 > 0".into()));
    }
    if sdp.trace.is_nan() || sdp.trace <= 0.0 {
        return Err(Error::InvalidInput("constant trace must be positive".into()));
    }
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sizes = &sdp.block_sizes;
    let nb = sizes.len();
    let m = sdp.constraints.len();
    let a = sdp.trace;

    // Unit-norm rows, then the operator norm.
    let rows: Vec<Vec<Entry>> = sdp.constraints.iter().map(|c| c.entries.clone()).collect();
    let row_norms: Vec<f64> = rows.iter().map(|r| functional_norm(r)).collect();
    let unit: Vec<f64> = row_norms.iter().map(|&n| if n > 0.0 { 1.0 / n } else { 0.0 }).collect();
    let b_unit: Vec<f64> = sdp.constraints.iter().zip(&unit).map(|(c, u)| c.rhs * u).collect();
    let ops_unit = BlockOps::new(nb, &rows, &unit);
    let sigma = operator_norm(&ops_unit, sizes, m);
    let scale: Vec<f64> = unit.iter().map(|u| u / sigma).collect();
    let ops = BlockOps::new(nb, &rows, &scale);
    let b: Vec<f64> = b_unit.iter().map(|v| v / (sigma * a)).collect();
    let b_unit_norm = norm(&b_unit);

    let c_norm = functional_norm(&sdp.objective);
    let c_scale = if c_norm > 0.0 { 1.0 / c_norm } else { 0.0 };
    let c_ops = BlockOps::new(nb, std::slice::from_ref(&sdp.objective), &[c_scale]);
    let mut c_blocks = zeros(sizes);
    c_ops.adjoint_add(&[1.0], &mut c_blocks);
    // Objective in original units from the scaled one.
    let to_tau = |scaled: f64| scaled * c_norm * a + sdp.objective_offset;
    let to_resid = |r: &[f64]| sigma * a * norm(r) / (1.0 + b_unit_norm);

    let total: usize = sizes.iter().sum();
    let mut x: Vec<DMatrix<f64>> = sizes
        .iter()
        .map(|&s| DMatrix::identity(s, s) / total as f64)
        .collect();
    let mut ax = vec![0.0; m];
    ops.apply(&x, &mut ax);
    let mut cx = {
        let mut v = [0.0];
        c_ops.apply(&x, &mut v);
        v[0]
    };
    let mut y = vec![0.0; m];
    let mut last_vec: Vec<Option<DVector<f64>>> = vec![None; nb];
    let mut history = Vec::new();
    let mut objs: std::collections::VecDeque<f64> = std::collections::VecDeque::new();
    let mut dual_bound = f64::NEG_INFINITY;
    let mut trace_drift: f64 = 0.0;
    let mut min_eig: f64 = f64::INFINITY;
    let mut status = CgalStatus::IterationLimit;
    let mut iterations = 0;
    let mut ah = vec![0.0; m];
    let mut w = vec![0.0; m];
    let mut grad = zeros(sizes);

    for t in 1..=cfg.max_iters {
        iterations = t;
        let beta = cfg.beta0 * ((t + 1) as f64).sqrt();
        let eta = 2.0 / (t + 1) as f64;
        for i in 0..m {
            w[i] = y[i] + beta * (ax[i] - b[i]);
        }
        for (g, c) in grad.iter_mut().zip(&c_blocks) {
            g.copy_from(c);
        }
        ops.adjoint_add(&w, &mut grad);
        if grad.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFiniteGradient(t));
        }
        let tol = (1.0 / ((t + 1) as f64).powi(2)).max(1e-10);
        let mut best: Option<(f64, usize, DVector<f64>)> = None;
        for bi in 0..nb {
            let (lam, v) = min_eigpair(&grad[bi], tol, last_vec[bi].as_ref(), &mut rng)?;
            if best.as_ref().is_none_or(|bb| lam < bb.0) {
                best = Some((lam, bi, v.clone()));
            }
            last_vec[bi] = Some(v);
        }
        let (lam, bi, v) = best.expect("at least one block");
        let wb: f64 = w.iter().zip(&b).map(|(w, b)| w * b).sum();
        dual_bound = dual_bound.max(to_tau(lam - wb));

        // X ← (1-η) X + η vv*.
        for xb in x.iter_mut() {
            *xb *= 1.0 - eta;
        }
        x[bi].ger(eta, &v, &v, 1.0);
        ops.apply_rank_one(bi, &v, &mut ah);
        for i in 0..m {
            ax[i] = (1.0 - eta) * ax[i] + eta * ah[i];
        }
        let mut ch = [0.0];
        c_ops.apply_rank_one(bi, &v, &mut ch);
        cx = (1.0 - eta) * cx + eta * ch[0];

        let r: Vec<f64> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
        let rn2: f64 = r.iter().map(|v| v * v).sum();
        if rn2 > 0.0 {
            let gamma = cfg.beta0.min(4.0 * beta * eta * eta / rn2);
            let cand: Vec<f64> = y.iter().zip(&r).map(|(yi, ri)| yi + gamma * ri).collect();
            if norm(&cand) <= cfg.dual_cap {
                y = cand;
            }
        }

        let resid = to_resid(&r);
        let tau = to_tau(cx);
        if cfg.record_history {
            history.push(resid);
        }
        if cfg.monitor_every > 0 && (t % cfg.monitor_every == 0 || t == 1) {
            let tr: f64 = x.iter().map(|m| m.trace()).sum();
            trace_drift = trace_drift.max((tr - 1.0).abs());
            for xb in &x {
                let (l, _) = crate::eig::min_eigpair_dense(xb);
                min_eig = min_eig.min(l);
            }
        }
        objs.push_back(tau);
        if objs.len() > cfg.window + 1 {
            objs.pop_front();
        }
        if resid <= cfg.eps && objs.len() == cfg.window + 1 {
            let change = (objs.back().unwrap() - objs.front().unwrap()).abs();
            let gap_ok = !cfg.require_gap || tau - dual_bound <= cfg.eps * (1.0 + tau.abs());
            if change <= cfg.eps * (1.0 + tau.abs()) && gap_ok {
                status = CgalStatus::Converged;
                break;
            }
        }
    }
    if cfg.monitor_every > 0 {
        let tr: f64 = x.iter().map(|m| m.trace()).sum();
        trace_drift = trace_drift.max((tr - 1.0).abs());
        for xb in &x {
            min_eig = min_eig.min(crate::eig::min_eigpair_dense(xb).0);
        }
    }
    let r: Vec<f64> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
    let report = SolveReport {
        status,
        objective: to_tau(cx),
        residual: to_resid(&r),
        dual_bound,
        iterations,
        time_secs: start.elapsed().as_secs_f64(),
        residual_history: history,
        trace_drift,
        min_eig: if min_eig.is_finite() { min_eig } else { f64::NAN },
    };
    for xb in x.iter_mut() {
        *xb *= a;
    }
    Ok((x, report))
}
