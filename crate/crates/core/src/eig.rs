//! Smallest eigenpair of a symmetric operator.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};

/// Operators up to this size are solved densely.
pub const DENSE_LIMIT: usize = 64;

/// Smallest eigenpair of a dense symmetric matrix.
pub fn min_eigpair_dense(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let n = m.nrows();
    if n == 1 {
        return (m[(0, 0)], DVector::from_element(1, 1.0));
    }
    let e = SymmetricEigen::new(m.clone());
    let i = e.eigenvalues.imin();
    (e.eigenvalues[i], e.eigenvectors.column(i).into_owned())
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Largest basis before a thick restart.
    pub max_basis: usize,
    /// Ritz vectors kept across a restart.
    pub keep: usize,
    pub max_restarts: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            max_basis: 60,
            keep: 8,
            max_restarts: 200,
        }
    }
}

fn orthogonalize(v: &mut DVector<f64>, basis: &[DVector<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let d = b.dot(v);
            v.axpy(-d, b, 1.0);
        }
    }
}

/// Lanczos with full reorthogonalization and thick restarts. Stops when the
/// Ritz residual is at most `tol·(1+|θ|)`; on failure the tolerance is
/// relaxed tenfold twice before giving up.
pub fn lanczos_min(
    op: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    n: usize,
    tol: f64,
    start: Option<&DVector<f64>>,
    rng: &mut impl Rng,
    opts: &LanczosOptions,
) -> Result<(f64, DVector<f64>)> {
    let random_unit = |rng: &mut dyn rand::RngCore| {
        let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let nv = v.norm();
        v / nv
    };
    let mut v0 = match start {
        Some(s) if s.len() == n && s.norm() > 0.0 => s / s.norm(),
        _ => random_unit(rng),
    };
    if n <= 2 {
        let m = DMatrix::from_columns(&(0..n).map(|j| op(&DVector::from_fn(n, |i, _| (i == j) as u8 as f64))).collect::<Vec<_>>());
        let sym = (&m + m.transpose()) * 0.5;
        return Ok(min_eigpair_dense(&sym));
    }
    let max_basis = opts.max_basis.min(n).max(2);
    let keep = opts.keep.min(max_basis - 1).max(1);
    let mut tol = tol;
    let mut best: Option<(f64, DVector<f64>, f64)> = None;
    for attempt in 0..3 {
        let mut vs: Vec<DVector<f64>> = vec![v0.clone()];
        let mut ws: Vec<DVector<f64>> = Vec::new();
        for _ in 0..opts.max_restarts {
            while ws.len() < vs.len() {
                ws.push(op(&vs[ws.len()]));
                if vs.len() < max_basis {
                    let mut r = ws.last().unwrap().clone();
                    orthogonalize(&mut r, &vs);
                    let nr = r.norm();
                    if nr > 1e-10 * ws.last().unwrap().norm().max(1e-300) {
                        vs.push(r / nr);
                    } else if vs.len() < n {
                        // Invariant subspace: continue from a fresh direction.
                        let mut r = random_unit(rng);
                        orthogonalize(&mut r, &vs);
                        let nr = r.norm();
                        if nr > 1e-8 {
                            vs.push(r / nr);
                        }
                    }
                }
            }
            let k = vs.len();
            let vmat = DMatrix::from_columns(&vs);
            let wmat = DMatrix::from_columns(&ws);
            let t = vmat.transpose() * &wmat;
            let t = (&t + t.transpose()) * 0.5;
            let e = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
            let i0 = order[0];
            let theta = e.eigenvalues[i0];
            let s = e.eigenvectors.column(i0);
            let x = &vmat * s;
            let ax = &wmat * s;
            let resid = (&ax - &x * theta).norm();
            let nx = x.norm();
            if best.as_ref().is_none_or(|b| resid < b.2) {
                best = Some((theta, &x / nx, resid));
            }
            if resid <= tol * (1.0 + theta.abs()) || k == n {
                return Ok((theta, x / nx));
            }
            // Thick restart from the lowest Ritz vectors plus the residual.
            let kept: Vec<usize> = order.iter().take(keep).copied().collect();
            let mut new_vs: Vec<DVector<f64>> = Vec::with_capacity(max_basis);
            let mut new_ws: Vec<DVector<f64>> = Vec::with_capacity(max_basis);
            for &j in &kept {
                let c = e.eigenvectors.column(j);
                new_vs.push(&vmat * c);
                new_ws.push(&wmat * c);
            }
            let mut r = &ax - &x * theta;
            orthogonalize(&mut r, &new_vs);
            let nr = r.norm();
            if nr > 1e-14 {
                new_vs.push(r / nr);
            }
            vs = new_vs;
            ws = new_ws;
        }
        log::debug!("eigensolver restart budget exhausted (attempt {attempt}), relaxing tolerance");
        tol *= 10.0;
        if let Some((theta, x, resid)) = &best {
            if *resid <= tol * (1.0 + theta.abs()) {
                return Ok((*theta, x.clone()));
            }
            v0 = x.clone();
        }
    }
    let resid = best.map_or(f64::NAN, |b| b.2);
    Err(Error::EigenNonConvergence(format!(
        "size {n}, residual {resid:.3e} after restarts"
    )))
}

/// Dense for small sizes, Lanczos otherwise; the operator is a dense matrix.
pub fn min_eigpair(
    m: &DMatrix<f64>,
    tol: f64,
    start: Option<&DVector<f64>>,
    rng: &mut impl Rng,
) -> Result<(f64, DVector<f64>)> {
    if m.nrows() <= DENSE_LIMIT {
        return Ok(min_eigpair_dense(m));
    }
    let op = |v: &DVector<f64>| m * v;
    lanczos_min(&op, m.nrows(), tol, start, rng, &LanczosOptions::default())
}
