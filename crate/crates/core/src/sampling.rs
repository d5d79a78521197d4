//! Feasible points and matrix tuples: commutative points projected onto the
//! equalities, diagonal tuples in random bases, and signature tuples.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::free_algebra::{evaluate, NcPolynomial};
use crate::relaxation::{constraint_violation, Problem};

/// Gradient of the commutative evaluation.
pub fn commutative_gradient(p: &NcPolynomial, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    for (w, &c) in p.terms() {
        let ls = w.letters();
        for i in 0..ls.len() {
            let rest: f64 = ls
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &l)| x[l as usize])
                .product();
            g[ls[i] as usize] += c * rest;
        }
    }
    g
}

/// Gauss–Newton on `h(x) = 0` from `x0` (minimum-norm steps).
pub fn project_commutative(p: &Problem, x0: &[f64], max_iters: usize) -> Option<Vec<f64>> {
    let mut x = x0.to_vec();
    let l = p.equalities.len();
    if l == 0 {
        return Some(x);
    }
    for _ in 0..max_iters {
        let h: Vec<f64> = p.equalities.iter().map(|h| h.eval_commutative(&x)).collect();
        let hn = h.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if hn <= 1e-13 {
            return Some(x);
        }
        let mut jac = DMatrix::zeros(l, x.len());
        for (i, hp) in p.equalities.iter().enumerate() {
            for (j, v) in commutative_gradient(hp, &x).into_iter().enumerate() {
                jac[(i, j)] = v;
            }
        }
        let jjt = &jac * jac.transpose();
        let step = jjt.lu().solve(&DVector::from_vec(h))?;
        let dx = jac.transpose() * step;
        for (xi, d) in x.iter_mut().zip(dx.iter()) {
            *xi -= d;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return None;
        }
    }
    None
}

/// Commutative points satisfying all constraints, found by perturbing
/// `anchor`, projecting, and keeping points with every `g_i ≥ 0`.
pub fn feasible_points(
    p: &Problem,
    anchor: &[f64],
    count: usize,
    rng: &mut impl Rng,
) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut spread = 0.5;
    let mut attempts = 0;
    while out.len() < count && attempts < 200 * count.max(1) {
        attempts += 1;
        let x0: Vec<f64> = anchor
            .iter()
            .map(|a| a + spread * rng.sample::<f64, _>(StandardNormal))
            .collect();
        match project_commutative(p, &x0, 50) {
            Some(x) if p.inequalities.iter().all(|g| g.eval_commutative(&x) >= 0.0) => out.push(x),
            _ => spread *= 0.9,
        }
        if spread < 1e-3 {
            spread = 0.5;
        }
    }
    if out.is_empty() {
        out.push(anchor.to_vec());
    }
    out
}

/// Haar-like orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn random_orthogonal(order: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(order, order, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// `A_j = Q diag(x^(1)_j, …, x^(s)_j) Qᵀ` for the given points.
pub fn diagonal_tuple(points: &[Vec<f64>], rng: &mut impl Rng) -> Vec<DMatrix<f64>> {
    let s = points.len();
    let n = points[0].len();
    let q = random_orthogonal(s, rng);
    (0..n)
        .map(|j| {
            let d = DMatrix::from_diagonal(&DVector::from_iterator(s, points.iter().map(|x| x[j])));
            &q * d * q.transpose()
        })
        .collect()
}

/// Independent `A_j = Q_j diag(±1) Q_jᵀ`, so every `A_j² = I`.
pub fn signature_tuple(n: usize, order: usize, rng: &mut impl Rng) -> Vec<DMatrix<f64>> {
    (0..n)
        .map(|_| {
            let q = random_orthogonal(order, rng);
            let d = DVector::from_fn(order, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 });
            &q * DMatrix::from_diagonal(&d) * q.transpose()
        })
        .collect()
}

pub fn random_unit_vector(order: usize, rng: &mut impl Rng) -> DVector<f64> {
    let v = DVector::from_fn(order, |_, _| rng.sample::<f64, _>(StandardNormal));
    let nv = v.norm();
    v / nv
}

/// Upper bounds from feasible tuples: smallest eigenvalue and normalized
/// trace of `f(A)`, minimized over `tuples` random tuples of order ≤ `max_order`.
#[derive(Debug, Clone, Copy)]
pub struct UpperBounds {
    pub eigenvalue: f64,
    pub trace: f64,
    /// Largest constraint violation among the tuples used.
    pub violation: f64,
}

pub fn sampled_upper_bounds(
    p: &Problem,
    anchor: &[f64],
    tuples: usize,
    max_order: usize,
    rng: &mut impl Rng,
) -> Result<UpperBounds> {
    let pool = feasible_points(p, anchor, 4 * max_order, rng);
    let mut eig = f64::INFINITY;
    let mut tr = f64::INFINITY;
    let mut violation: f64 = 0.0;
    for _ in 0..tuples {
        let s = rng.random_range(1..=max_order.min(pool.len()).max(1));
        let chosen: Vec<Vec<f64>> = (0..s).map(|_| pool[rng.random_range(0..pool.len())].clone()).collect();
        let mats = diagonal_tuple(&chosen, rng);
        let v = constraint_violation(p, &mats);
        if v > 1e-9 {
            continue;
        }
        violation = violation.max(v);
        let fm = evaluate(&p.objective, &mats)?;
        eig = eig.min(fm.symmetric_eigenvalues().min());
        tr = tr.min(fm.trace() / s as f64);
    }
    Ok(UpperBounds {
        eigenvalue: eig,
        trace: tr,
        violation,
    })
}
