//! Constant-trace certificates: closed forms for ball, polydisc and
//! polydisc-equality constraint sets, and LP-optimal certificates.
//!
//! A certificate for one group holds `a`, diagonal weights `G_b` for each
//! psd block of the group, and symmetric multipliers `H_e` for each equality
//! block, such that
//!
//! ```text
//! a = Σ_b Σ_u G_b[u] u* g_b u + Σ_e Σ_{u,v} H_e[u,v] u* h_e v
//! ```
//!
//! holds modulo the symmetry mode. The block scaling is `P_b = sqrt(G_b)`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::free_algebra::{basis_over, Letter, NcPolynomial, SymmetryMode, Word, DEFAULT_INDEX_LIMIT};
use crate::lp::{solve_lp, LpInstance, LpStatus};
use crate::relaxation::{packed_index, upper_pairs, BlockKind, Group, Problem, Relaxation};

const PATTERN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    ClosedFormBall,
    ClosedFormPolydisc,
    ClosedFormPolydiscEquality,
    LpOptimal,
}

/// Certificate for the blocks of one group (the whole problem when dense).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCertificate {
    pub trace: f64,
    /// Diagonal of `G_b`, one vector per psd block of the group in relaxation order.
    pub weights: Vec<Vec<f64>>,
    /// Packed upper triangle of `H_e`, one per equality block of the group.
    pub multipliers: Vec<Vec<f64>>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtpCertificate {
    pub order: usize,
    pub mode: SymmetryMode,
    pub groups: Vec<GroupCertificate>,
}

impl CtpCertificate {
    /// Total trace of the direct sum.
    pub fn trace(&self) -> f64 {
        self.groups.iter().map(|g| g.trace).sum()
    }

    /// Largest per-group trace.
    pub fn max_trace(&self) -> f64 {
        self.groups.iter().map(|g| g.trace).fold(0.0, f64::max)
    }

    /// `sqrt(G_b)` for every psd block, in relaxation block order.
    pub fn scalings(&self, relax: &Relaxation) -> Result<Vec<Vec<f64>>> {
        self.check_shape(relax)?;
        let mut next = vec![0usize; self.groups.len()];
        Ok(relax
            .blocks
            .iter()
            .map(|b| {
                let w = &self.groups[b.group].weights[next[b.group]];
                next[b.group] += 1;
                w.iter().map(|x| x.sqrt()).collect()
            })
            .collect())
    }

    pub fn provenances(&self) -> Vec<Provenance> {
        self.groups.iter().map(|g| g.provenance).collect()
    }

    pub fn check_shape(&self, relax: &Relaxation) -> Result<()> {
        let mismatch = |m: String| Err(Error::CertificateMismatch(m));
        if self.order != relax.order {
            return mismatch(format!("order {} vs relaxation order {}", self.order, relax.order));
        }
        if self.mode != relax.mode {
            return mismatch("symmetry mode differs".into());
        }
        if self.groups.len() != relax.groups.len() {
            return mismatch(format!(
                "{} groups vs {} in relaxation",
                self.groups.len(),
                relax.groups.len()
            ));
        }
        for (gi, gc) in self.groups.iter().enumerate() {
            let sizes: Vec<usize> = relax.blocks_of_group(gi).map(|(_, b)| b.size()).collect();
            let got: Vec<usize> = gc.weights.iter().map(Vec::len).collect();
            if sizes != got {
                return mismatch(format!("group {gi}: block sizes {got:?} vs {sizes:?}"));
            }
            let eq: Vec<usize> = relax
                .equalities
                .iter()
                .filter(|e| e.group == gi)
                .map(|e| e.entries.len())
                .collect();
            let got: Vec<usize> = gc.multipliers.iter().map(Vec::len).collect();
            if eq != got {
                return mismatch(format!("group {gi}: equality shapes {got:?} vs {eq:?}"));
            }
            if gc.trace.is_nan() || gc.trace <= 0.0 {
                return mismatch(format!("group {gi}: trace {} not positive", gc.trace));
            }
            if gc.weights.iter().flatten().any(|&w| w.is_nan() || w <= 0.0) {
                return mismatch(format!("group {gi}: non-positive weight"));
            }
        }
        Ok(())
    }
}

/// `d_u` per word `u` of degree ≤ k−1.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionCoeffs {
    pub coeffs: BTreeMap<Word, f64>,
}

impl DecompositionCoeffs {
    pub fn get(&self, u: &Word) -> Option<f64> {
        self.coeffs.get(u).copied()
    }
}

/// Weight of `u` in the ball decomposition at order `k`.
pub fn ball_weight(k: usize, degree: usize) -> f64 {
    (k - degree) as f64
}

/// Coefficients with `Σ_{w∈W_k} w*w = (1+k) - Σ_u d_u u*(1 - Σ X_j²) u`.
pub fn ball_coeffs(n: usize, k: usize) -> Result<DecompositionCoeffs> {
    if k == 0 {
        return Err(Error::InvalidInput("ball coefficients need k ≥ 1".into()));
    }
    let letters: Vec<Letter> = (0..n as Letter).collect();
    let basis = basis_over(&letters, k - 1, DEFAULT_INDEX_LIMIT)?;
    Ok(DecompositionCoeffs {
        coeffs: basis
            .words()
            .iter()
            .map(|u| (u.clone(), ball_weight(k, u.degree())))
            .collect(),
    })
}

/// `1 - Σ_{l∈letters} X_l²` over `n` letters.
pub fn ball_polynomial(n: usize, letters: &[Letter]) -> NcPolynomial {
    let mut g = NcPolynomial::constant(n, 1.0);
    for &l in letters {
        g.add_term(Word::from_letters(&[l, l]), -1.0);
    }
    g
}

/// `radius - X_l²`.
pub fn disc_polynomial(n: usize, letter: Letter, radius: f64) -> NcPolynomial {
    let mut g = NcPolynomial::constant(n, radius);
    g.add_term(Word::from_letters(&[letter, letter]), -1.0);
    g
}

fn same_poly(a: &NcPolynomial, b: &NcPolynomial) -> bool {
    a.sub_poly(b).max_abs_coeff() <= PATTERN_TOL
}

/// Radius `r` if `g = r - X_l²` for some letter `l`.
fn as_disc(g: &NcPolynomial) -> Option<(Letter, f64)> {
    if g.num_terms() != 2 {
        return None;
    }
    let r = g.coeff(&Word::one());
    let (w, &c) = g.terms().find(|(w, _)| !w.is_one())?;
    let ls = w.letters();
    if ls.len() == 2 && ls[0] == ls[1] && (c + 1.0).abs() <= PATTERN_TOL && r > 0.0 {
        Some((ls[0], r))
    } else {
        None
    }
}

/// Letter `l` if `h = ±(X_l² - 1)`.
fn as_unit_square(h: &NcPolynomial) -> Option<Letter> {
    let c = h.coeff(&Word::one());
    if (c.abs() - 1.0).abs() > PATTERN_TOL {
        return None;
    }
    let (l, _) = as_disc(&h.scale(c))?;
    Some(l)
}

fn group_shapes(relax: &Relaxation, gi: usize) -> (Vec<usize>, Vec<usize>) {
    let sizes = relax.blocks_of_group(gi).map(|(_, b)| b.size()).collect();
    let eq = relax
        .equalities
        .iter()
        .filter(|e| e.group == gi)
        .map(|e| e.entries.len())
        .collect();
    (sizes, eq)
}

/// Closed-form certificate for one group, if its constraints match a known pattern.
pub fn closed_form_group(p: &Problem, relax: &Relaxation, gi: usize) -> Option<GroupCertificate> {
    let group = &relax.groups[gi];
    let k = relax.order;
    let (_, eq_shapes) = group_shapes(relax, gi);
    let zero_h: Vec<Vec<f64>> = eq_shapes.iter().map(|&l| vec![0.0; l]).collect();
    let mut letters = group.letters.clone();
    letters.sort_unstable();

    // Ball on exactly the group's letters.
    if group.inequalities.len() == 1
        && same_poly(&p.inequalities[group.inequalities[0]], &ball_polynomial(p.n, &letters))
    {
        let weights = relax
            .blocks_of_group(gi)
            .map(|(_, b)| match b.kind {
                BlockKind::Moment => vec![1.0; b.size()],
                BlockKind::Localizing { .. } => {
                    b.basis.iter().map(|u| ball_weight(k, u.degree())).collect()
                }
            })
            .collect();
        return Some(GroupCertificate {
            trace: 1.0 + k as f64,
            weights,
            multipliers: zero_h,
            provenance: Provenance::ClosedFormBall,
        });
    }

    // One disc per letter with radii summing to one.
    if !group.inequalities.is_empty() && group.inequalities.len() == letters.len() {
        let discs: Option<Vec<(Letter, f64)>> =
            group.inequalities.iter().map(|&i| as_disc(&p.inequalities[i])).collect();
        if let Some(discs) = discs {
            let mut ls: Vec<Letter> = discs.iter().map(|d| d.0).collect();
            ls.sort_unstable();
            let total: f64 = discs.iter().map(|d| d.1).sum();
            if ls == letters && (total - 1.0).abs() <= 1e-12 {
                let weights = relax
                    .blocks_of_group(gi)
                    .map(|(_, b)| match b.kind {
                        BlockKind::Moment => vec![1.0; b.size()],
                        BlockKind::Localizing { .. } => {
                            b.basis.iter().map(|u| ball_weight(k, u.degree())).collect()
                        }
                    })
                    .collect();
                return Some(GroupCertificate {
                    trace: 1.0 + k as f64,
                    weights,
                    multipliers: zero_h,
                    provenance: Provenance::ClosedFormPolydisc,
                });
            }
        }
    }

    // No inequalities and X_l² = 1 for every letter.
    if group.inequalities.is_empty() {
        let mut found: BTreeMap<Letter, (usize, f64)> = BTreeMap::new();
        for (slot, e) in relax.equalities.iter().filter(|e| e.group == gi).enumerate() {
            let h = &p.equalities[e.constraint];
            if let Some(l) = as_unit_square(h) {
                // Sign so that `sign * h = X_l² - 1`.
                let sign = -h.coeff(&Word::one());
                found.entry(l).or_insert((slot, sign));
            }
        }
        if letters.iter().all(|l| found.contains_key(l)) {
            let n_letters = letters.len();
            let count = |d: isize| -> f64 {
                if d < 0 {
                    0.0
                } else {
                    (0..=d as u32).map(|t| (n_letters as f64).powi(t as i32)).sum()
                }
            };
            let mut multipliers = zero_h;
            let eq_blocks: Vec<_> = relax.equalities.iter().filter(|e| e.group == gi).collect();
            for &(slot, sign) in found.values() {
                let e = eq_blocks[slot];
                let s = e.basis.len();
                for (r, u) in e.basis.iter().enumerate() {
                    let d = k as isize - 1 - u.degree() as isize;
                    multipliers[slot][packed_index(s, r, r)] = -sign * count(d);
                }
            }
            let weights: Vec<Vec<f64>> =
                relax.blocks_of_group(gi).map(|(_, b)| vec![1.0; b.size()]).collect();
            let trace = weights[0].len() as f64;
            return Some(GroupCertificate {
                trace,
                weights,
                multipliers,
                provenance: Provenance::ClosedFormPolydiscEquality,
            });
        }
    }
    None
}

/// Closed-form certificate for every group, or `PatternNotRecognized`.
pub fn closed_form(p: &Problem, relax: &Relaxation) -> Result<CtpCertificate> {
    let groups = (0..relax.groups.len())
        .map(|gi| closed_form_group(p, relax, gi).ok_or(Error::PatternNotRecognized))
        .collect::<Result<Vec<_>>>()?;
    Ok(CtpCertificate {
        order: relax.order,
        mode: relax.mode,
        groups,
    })
}

/// Variable layout of a group LP.
#[derive(Debug, Clone)]
pub struct CtpLp {
    pub lp: LpInstance,
    pub group: usize,
    /// First variable of each psd block's weights (ξ is variable 0).
    pub weight_offsets: Vec<usize>,
    pub multiplier_offsets: Vec<usize>,
    pub block_sizes: Vec<usize>,
    pub multiplier_lens: Vec<usize>,
}

/// LP: minimize ξ subject to the coefficient-matching identity for group `gi`,
/// with `G_b ≥ 1` diagonal and `H_e` free.
pub fn build_ctp_lp_group(relax: &Relaxation, gi: usize) -> CtpLp {
    let mut nvars = 1usize;
    let mut weight_offsets = Vec::new();
    let mut block_sizes = Vec::new();
    for (_, b) in relax.blocks_of_group(gi) {
        weight_offsets.push(nvars);
        block_sizes.push(b.size());
        nvars += b.size();
    }
    let mut multiplier_offsets = Vec::new();
    let mut multiplier_lens = Vec::new();
    for e in relax.equalities.iter().filter(|e| e.group == gi) {
        multiplier_offsets.push(nvars);
        multiplier_lens.push(e.entries.len());
        nvars += e.entries.len();
    }

    // Row per moment key: Σ contributions - [key = 1] ξ = 0.
    let mut rows: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
    rows.entry(relax.one_key()).or_default().push((0, -1.0));
    for (slot, (_, b)) in relax.blocks_of_group(gi).enumerate() {
        for r in 0..b.size() {
            for &(key, c) in b.entry(r, r).terms() {
                rows.entry(key).or_default().push((weight_offsets[slot] + r, c));
            }
        }
    }
    for (slot, e) in relax.equalities.iter().filter(|e| e.group == gi).enumerate() {
        let s = e.basis.len();
        for ((r, c), form) in upper_pairs(s).zip(&e.entries) {
            let mult = if r == c { 1.0 } else { 2.0 };
            let var = multiplier_offsets[slot] + packed_index(s, r, c);
            for &(key, v) in form.terms() {
                rows.entry(key).or_default().push((var, mult * v));
            }
        }
    }

    let mut lp = LpInstance::new(nvars);
    lp.objective[0] = 1.0;
    lp.lower[0] = f64::NEG_INFINITY;
    for (&off, &s) in weight_offsets.iter().zip(&block_sizes) {
        for j in off..off + s {
            lp.lower[j] = 1.0;
        }
    }
    for (&off, &l) in multiplier_offsets.iter().zip(&multiplier_lens) {
        for j in off..off + l {
            lp.lower[j] = f64::NEG_INFINITY;
        }
    }
    for (_, mut row) in rows {
        row.sort_unstable_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
        for (j, v) in row {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += v,
                _ => merged.push((j, v)),
            }
        }
        merged.retain(|e| e.1 != 0.0);
        lp.add_row(merged, 0.0);
    }
    CtpLp {
        lp,
        group: gi,
        weight_offsets,
        multiplier_offsets,
        block_sizes,
        multiplier_lens,
    }
}

/// Dense LP over all letters and constraints.
pub fn build_ctp_lp(relax: &Relaxation) -> Result<CtpLp> {
    if relax.is_sparse() {
        return Err(Error::InvalidInput(
            "relaxation has several cliques; use the per-clique LP".into(),
        ));
    }
    Ok(build_ctp_lp_group(relax, 0))
}

/// LP for clique `j` of a sparse relaxation.
pub fn build_ctp_lp_cs(relax: &Relaxation, j: usize) -> Result<CtpLp> {
    if j >= relax.groups.len() {
        return Err(Error::InvalidInput(format!("clique {} out of range", j + 1)));
    }
    Ok(build_ctp_lp_group(relax, j))
}

impl CtpLp {
    fn certificate(&self, x: &[f64]) -> GroupCertificate {
        GroupCertificate {
            trace: x[0],
            weights: self
                .weight_offsets
                .iter()
                .zip(&self.block_sizes)
                .map(|(&o, &s)| x[o..o + s].to_vec())
                .collect(),
            multipliers: self
                .multiplier_offsets
                .iter()
                .zip(&self.multiplier_lens)
                .map(|(&o, &l)| x[o..o + l].to_vec())
                .collect(),
            provenance: Provenance::LpOptimal,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CertifyOptions {
    /// Try the LP first.
    pub prefer_lp: bool,
    /// Largest `rows × variables` attempted with the dense simplex.
    pub lp_budget: usize,
    /// Accepted symbolic residual.
    pub tolerance: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            prefer_lp: true,
            lp_budget: 2_000_000,
            tolerance: 1e-8,
        }
    }
}

/// Certificate per group: LP optimum when within budget and verified,
/// otherwise the closed form.
pub fn certify(p: &Problem, relax: &Relaxation, opts: &CertifyOptions) -> Result<CtpCertificate> {
    let mut groups = Vec::with_capacity(relax.groups.len());
    for gi in 0..relax.groups.len() {
        let mut lp_note = String::from("LP not attempted");
        if opts.prefer_lp {
            let lp = build_ctp_lp_group(relax, gi);
            let size = lp.lp.num_rows() * lp.lp.num_vars();
            if size <= opts.lp_budget {
                let res = solve_lp(&lp.lp);
                match res.status {
                    LpStatus::Optimal => {
                        let gc = lp.certificate(&res.x);
                        if gc.trace > 0.0
                            && group_residual(p, relax, gi, &gc) <= opts.tolerance
                        {
                            groups.push(gc);
                            continue;
                        }
                        lp_note = "LP optimum failed verification".into();
                    }
                    s => lp_note = format!("LP status {s:?}"),
                }
            } else {
                lp_note = format!("LP size {size} exceeds budget");
            }
        }
        match closed_form_group(p, relax, gi) {
            Some(gc) => groups.push(gc),
            None => {
                return Err(Error::NotCertified(format!(
                    "group {}: {lp_note}; no closed form applies",
                    gi + 1
                )))
            }
        }
    }
    let cert = CtpCertificate {
        order: relax.order,
        mode: relax.mode,
        groups,
    };
    cert.check_shape(relax)?;
    Ok(cert)
}

/// `a - Σ G u* g u - Σ H u* h v` for one group, expanded from the problem data.
pub fn residual_polynomial(
    p: &Problem,
    relax: &Relaxation,
    gi: usize,
    gc: &GroupCertificate,
) -> NcPolynomial {
    let mut res = NcPolynomial::constant(p.n, gc.trace);
    let one = NcPolynomial::constant(p.n, 1.0);
    for ((_, b), w) in relax.blocks_of_group(gi).zip(&gc.weights) {
        let g = match b.kind {
            BlockKind::Moment => &one,
            BlockKind::Localizing { constraint } => &p.inequalities[constraint],
        };
        for (u, &gw) in b.basis.iter().zip(w) {
            for (t, &c) in g.terms() {
                res.add_term(Word::sandwich(u, t, u), -gw * c);
            }
        }
    }
    let eqs = relax.equalities.iter().filter(|e| e.group == gi);
    for (e, h_mult) in eqs.zip(&gc.multipliers) {
        let h = &p.equalities[e.constraint];
        let s = e.basis.len();
        for (r, c) in upper_pairs(s) {
            let m = h_mult[packed_index(s, r, c)];
            if m == 0.0 {
                continue;
            }
            for (t, &coef) in h.terms() {
                res.add_term(Word::sandwich(&e.basis[r], t, &e.basis[c]), -m * coef);
                if r != c {
                    res.add_term(Word::sandwich(&e.basis[c], t, &e.basis[r]), -m * coef);
                }
            }
        }
    }
    res
}

fn group_residual(p: &Problem, relax: &Relaxation, gi: usize, gc: &GroupCertificate) -> f64 {
    residual_polynomial(p, relax, gi, gc)
        .canonical_classes(relax.mode)
        .values()
        .fold(0.0, |m, c| m.max(c.abs()))
}

/// Both checks of a certificate.
#[derive(Debug, Clone, Copy)]
pub struct VerifyReport {
    /// Largest coefficient of the residual polynomial, modulo symmetry.
    pub symbolic: f64,
    /// Largest `|tr(P D(y) P) - a|` over sampled `y`; `None` if sampling was skipped.
    pub sampled: Option<f64>,
}

impl VerifyReport {
    pub fn residual(&self) -> f64 {
        self.symbolic.max(self.sampled.unwrap_or(0.0))
    }
}

/// Sampled check is skipped above this many equality rows.
const SAMPLE_ROW_LIMIT: usize = 20_000;

/// Symbolic residual plus 5 sampled points of the affine set
/// `{y : equality entries vanish, y_1 = 1}`.
pub fn verify(
    cert: &CtpCertificate,
    p: &Problem,
    relax: &Relaxation,
    rng: &mut impl Rng,
) -> Result<VerifyReport> {
    cert.check_shape(relax)?;
    let symbolic = (0..relax.groups.len())
        .map(|gi| group_residual(p, relax, gi, &cert.groups[gi]))
        .fold(0.0, f64::max);
    let rows = relax.equality_forms().count();
    let sampled = if rows <= SAMPLE_ROW_LIMIT {
        let mut worst: Option<f64> = None;
        for _ in 0..5 {
            if let Some(y) = sample_affine_moments(relax, rng) {
                let dev = trace_deviation(cert, relax, &y);
                worst = Some(worst.map_or(dev, |w: f64| w.max(dev)));
            }
        }
        worst
    } else {
        None
    };
    Ok(VerifyReport { symbolic, sampled })
}

/// Largest per-group `|Σ_b Σ_r G_b[r] D_b(y)[r,r] - a·y_1|`.
pub fn trace_deviation(cert: &CtpCertificate, relax: &Relaxation, y: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for (gi, gc) in cert.groups.iter().enumerate() {
        let mut tr = 0.0;
        for ((_, b), w) in relax.blocks_of_group(gi).zip(&gc.weights) {
            for (r, &gw) in w.iter().enumerate() {
                tr += gw * b.entry(r, r).eval(y);
            }
        }
        worst = worst.max((tr - gc.trace * y[relax.one_key()]).abs());
    }
    worst
}

/// Random `y` projected onto `{y : E y = 0, y_1 = 1}` by conjugate gradients
/// on the normal equations. `None` if the projection does not converge.
pub fn sample_affine_moments(relax: &Relaxation, rng: &mut impl Rng) -> Option<Vec<f64>> {
    let nk = relax.keys.len();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![vec![(relax.one_key(), 1.0)]];
    let mut rhs = vec![1.0];
    for f in relax.equality_forms() {
        if !f.is_empty() {
            rows.push(f.terms().to_vec());
            rhs.push(0.0);
        }
    }
    let y0: Vec<f64> = (0..nk).map(|_| rng.random_range(-1.0..1.0)).collect();
    let apply = |v: &[f64]| -> Vec<f64> { rows.iter().map(|r| r.iter().map(|&(k, c)| c * v[k]).sum()).collect() };
    let apply_t = |l: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; nk];
        for (r, &li) in rows.iter().zip(l) {
            for &(k, c) in r {
                out[k] += c * li;
            }
        }
        out
    };
    // Solve E Eᵀ λ = E y0 - rhs, then y = y0 - Eᵀ λ.
    let b: Vec<f64> = apply(&y0).iter().zip(&rhs).map(|(a, b)| a - b).collect();
    let m = rows.len();
    let mut lam = vec![0.0; m];
    let mut r = b.clone();
    let mut d = r.clone();
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    let b_norm = rr.sqrt().max(1.0);
    for _ in 0..(4 * m + 100) {
        if rr.sqrt() <= 1e-14 * b_norm {
            break;
        }
        let q = apply(&apply_t(&d));
        let dq: f64 = d.iter().zip(&q).map(|(a, b)| a * b).sum();
        if dq <= 0.0 {
            break;
        }
        let alpha = rr / dq;
        for i in 0..m {
            lam[i] += alpha * d[i];
            r[i] -= alpha * q[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..m {
            d[i] = r[i] + beta * d[i];
        }
    }
    let corr = apply_t(&lam);
    let y: Vec<f64> = y0.iter().zip(&corr).map(|(a, c)| a - c).collect();
    let viol = apply(&y)
        .iter()
        .zip(&rhs)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    (viol <= 1e-10).then_some(y)
}

/// Letters of a group, 1-based, as `{1,2,3}`.
pub fn describe_group(g: &Group) -> String {
    let ls: Vec<String> = g.letters.iter().map(|l| (l + 1).to_string()).collect();
    format!("{{{}}}", ls.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relaxation::build;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_words(n: usize, d: usize) -> Vec<Word> {
        let letters: Vec<Letter> = (0..n as Letter).collect();
        basis_over(&letters, d, DEFAULT_INDEX_LIMIT).unwrap().words().to_vec()
    }

    /// `Σ_{w∈W_k} w*w + Σ_u d_u u*(1 - ΣX²)u - (1+k)` in exact integers.
    fn ball_identity(n: usize, k: usize, d: impl Fn(&Word) -> i64) -> NcPolynomial<i64> {
        let mut poly = NcPolynomial::<i64>::constant(n, -(1 + k as i64));
        for w in all_words(n, k) {
            poly.add_term(Word::sandwich(&w, &Word::one(), &w), 1);
        }
        for u in all_words(n, k - 1) {
            let du = d(&u);
            poly.add_term(Word::sandwich(&u, &Word::one(), &u), du);
            for j in 0..n as Letter {
                poly.add_term(Word::sandwich(&u, &Word::from_letters(&[j, j]), &u), -du);
            }
        }
        poly
    }

    /// Sum of the degree-`r` identities: `d_u = #{r ≤ k : deg u < r}` with unit
    /// per-degree coefficients.
    fn brute_force_d(k: usize, u: &Word) -> i64 {
        (1..=k).filter(|&r| u.degree() < r).count() as i64
    }

    #[test]
    fn single_degree_identity() {
        for n in 1..=3 {
            for r in 1..=3usize {
                // Σ_{|w|=r} w*w - 1 - Σ_{|u|<r} u*(ΣX² - 1)u
                let mut poly = NcPolynomial::<i64>::constant(n, -1);
                for w in all_words(n, r).into_iter().filter(|w| w.degree() == r) {
                    poly.add_term(Word::sandwich(&w, &Word::one(), &w), 1);
                }
                for u in all_words(n, r - 1) {
                    poly.add_term(Word::sandwich(&u, &Word::one(), &u), 1);
                    for j in 0..n as Letter {
                        poly.add_term(Word::sandwich(&u, &Word::from_letters(&[j, j]), &u), -1);
                    }
                }
                assert!(poly.is_zero(), "n={n} r={r}");
            }
        }
    }

    #[test]
    fn ball_decomposition_identity() {
        for n in 1..=3 {
            for k in 1..=3 {
                let coeffs = ball_coeffs(n, k).unwrap();
                for (u, &d) in &coeffs.coeffs {
                    assert_eq!(d as i64, brute_force_d(k, u));
                }
                let poly = ball_identity(n, k, |u| coeffs.get(u).unwrap() as i64);
                assert!(poly.is_zero(), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn ball_coeff_examples() {
        let c = ball_coeffs(2, 1).unwrap();
        assert_eq!(c.get(&Word::one()), Some(1.0));
        for n in 1..=3 {
            let c = ball_coeffs(n, 2).unwrap();
            assert_eq!(c.get(&Word::one()), Some(2.0));
            assert_eq!(c.get(&Word::letter(0)), Some(1.0));
        }
        let c = ball_coeffs(1, 3).unwrap();
        let x = Word::letter(0);
        assert_eq!(c.get(&Word::one()), Some(3.0));
        assert_eq!(c.get(&x), Some(2.0));
        assert_eq!(c.get(&x.concat(&x)), Some(1.0));
    }

    #[test]
    fn triangular_coefficients_fail_identity() {
        let poly = ball_identity(1, 2, |u| {
            let t = 2 - u.degree() as i64;
            t * (t + 1) / 2
        });
        assert!(!poly.is_zero());
    }

    fn ball_problem(n: usize) -> Problem {
        let letters: Vec<Letter> = (0..n as Letter).collect();
        let mut f = NcPolynomial::zero(n);
        f.add_term(Word::from_letters(&[0]), 1.0);
        Problem::new(n, f, vec![ball_polynomial(n, &letters)], vec![]).unwrap()
    }

    #[test]
    fn ball_closed_form_verifies() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (n, k) in [(2, 1), (2, 2), (3, 2)] {
            let p = ball_problem(n);
            let r = build(&p, k, SymmetryMode::StarOnly).unwrap();
            let c = closed_form(&p, &r).unwrap();
            assert_eq!(c.trace(), 1.0 + k as f64);
            assert_eq!(c.groups[0].provenance, Provenance::ClosedFormBall);
            let rep = verify(&c, &p, &r, &mut rng).unwrap();
            assert_eq!(rep.symbolic, 0.0);
            assert!(rep.sampled.unwrap() < 1e-9);
        }
    }

    #[test]
    fn corrupted_certificate_detected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = ball_problem(2);
        let r = build(&p, 2, SymmetryMode::StarOnly).unwrap();
        let mut c = closed_form(&p, &r).unwrap();
        let s = c.groups[0].weights[1][0].sqrt() * 1.01;
        c.groups[0].weights[1][0] = s * s;
        assert!(verify(&c, &p, &r, &mut rng).unwrap().residual() > 1e-3);
    }

    #[test]
    fn ball_lp_matches_closed_form_bound() {
        for (n, k) in [(2, 1), (2, 2)] {
            let p = ball_problem(n);
            let r = build(&p, k, SymmetryMode::StarOnly).unwrap();
            let lp = build_ctp_lp(&r).unwrap();
            let res = solve_lp(&lp.lp);
            assert_eq!(res.status, LpStatus::Optimal);
            assert!(res.objective <= 1.0 + k as f64 + 1e-9);
        }
    }

    #[test]
    fn trivial_inequality_is_not_certifiable() {
        // The class of X² collects G_0[X] + G_1[X] ≥ 2 and can never vanish.
        let f = NcPolynomial::monomial(1, Word::letter(0), 1.0);
        let p = Problem::new(1, f, vec![NcPolynomial::constant(1, 1.0)], vec![]).unwrap();
        let r = build(&p, 1, SymmetryMode::StarOnly).unwrap();
        let res = solve_lp(&build_ctp_lp(&r).unwrap().lp);
        assert_eq!(res.status, LpStatus::Infeasible);
        let e = certify(&p, &r, &CertifyOptions::default()).unwrap_err();
        assert!(e.to_string().contains("CTP not certified"));
    }

    #[test]
    fn polydisc_equality_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 2;
        let f = NcPolynomial::from_terms(n, [(Word::from_letters(&[0, 1]), 1.0), (Word::from_letters(&[1, 0]), 1.0)]);
        let hs: Vec<NcPolynomial> = (0..n as Letter).map(|l| disc_polynomial(n, l, 1.0).scale(-1.0)).collect();
        let p = Problem::new(n, f, vec![], hs).unwrap();
        for k in 1..=3 {
            let r = build(&p, k, SymmetryMode::StarOnly).unwrap();
            let c = closed_form(&p, &r).unwrap();
            assert_eq!(c.trace(), crate::free_algebra::word_count(n, k).unwrap() as f64);
            let rep = verify(&c, &p, &r, &mut rng).unwrap();
            assert!(rep.symbolic < 1e-12, "{rep:?}");
            assert!(rep.sampled.unwrap() <= 1e-10);
        }
    }

    #[test]
    fn unrecognized_pattern() {
        let n = 2;
        let f = NcPolynomial::monomial(n, Word::letter(0), 1.0);
        let g = disc_polynomial(n, 0, 2.0);
        let p = Problem::new(n, f, vec![g], vec![]).unwrap();
        let r = build(&p, 1, SymmetryMode::StarOnly).unwrap();
        assert!(matches!(closed_form(&p, &r), Err(Error::PatternNotRecognized)));
    }
}
