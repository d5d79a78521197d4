//! Seeded random quadratic instances: dense ball / polydisc and chains of
//! overlapping cliques, each with equality constraints anchored at a sampled
//! feasible point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::ctp::{ball_polynomial, disc_polynomial};
use crate::error::{Error, Result};
use crate::free_algebra::{basis_over, Letter, NcPolynomial, Word, DEFAULT_INDEX_LIMIT};
use crate::relaxation::Problem;

pub const GENERATOR_VERSION: &str = "chacha8-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenKind {
    Ball,
    Polydisc,
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenSpec {
    pub n: usize,
    /// Number of equalities; `None` uses `⌈n/4⌉` (ball) or `⌈n/7⌉` (otherwise).
    pub l: Option<usize>,
    pub kind: GenKind,
    /// Clique step for `Sparse`.
    pub u: Option<usize>,
    pub seed: u64,
}

impl GenSpec {
    pub fn equality_count(&self) -> usize {
        self.l.unwrap_or(match self.kind {
            GenKind::Ball => self.n.div_ceil(4),
            GenKind::Polydisc | GenKind::Sparse => self.n.div_ceil(7),
        })
    }
}

/// A generated problem with the point its equalities vanish at.
#[derive(Debug, Clone)]
pub struct Generated {
    pub problem: Problem,
    pub anchor: Vec<f64>,
    pub spec: GenSpec,
}

fn all_letters(n: usize) -> Vec<Letter> {
    (0..n as Letter).collect()
}

/// `Σ_i a_i²≤ 1`: Gaussian direction scaled by `U^{1/n}`.
pub fn sample_ball(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            let radius = rng.random::<f64>().powf(1.0 / n as f64);
            return g.into_iter().map(|v| v / norm * radius).collect();
        }
    }
}

/// Independent uniforms on `(-1/√n, 1/√n)`.
pub fn sample_polydisc(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let r = 1.0 / (n as f64).sqrt();
    (0..n).map(|_| rng.random_range(-r..r)).collect()
}

/// `½ Σ_{w ∈ W₂(letters), w ≠ 1} c_w (w + w*)` with uniform `c_w`, plus constant.
fn random_quadratic(n: usize, letters: &[Letter], with_constant: bool, rng: &mut impl Rng) -> NcPolynomial {
    let words = basis_over(letters, 2, DEFAULT_INDEX_LIMIT).expect("degree-2 basis fits");
    let mut p = NcPolynomial::zero(n);
    for w in words.words() {
        let c: f64 = rng.random_range(-1.0..1.0);
        if w.is_one() && !with_constant {
            continue;
        }
        p.add_term(w.clone(), 0.5 * c);
        p.add_term(w.star(), 0.5 * c);
    }
    p
}

/// Random quadratic equality on `letters` vanishing at `anchor`.
fn anchored_equality(n: usize, letters: &[Letter], anchor: &[f64], rng: &mut impl Rng) -> NcPolynomial {
    let mut h = random_quadratic(n, letters, false, rng);
    let value = h.eval_commutative(anchor);
    h.add_term(Word::one(), -value);
    h
}

pub fn gen_dense(spec: &GenSpec) -> Result<Generated> {
    let n = spec.n;
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let letters = all_letters(n);
    let objective = random_quadratic(n, &letters, true, &mut rng);
    let (inequalities, anchor) = match spec.kind {
        GenKind::Ball => (vec![ball_polynomial(n, &letters)], sample_ball(n, &mut rng)),
        GenKind::Polydisc => (
            letters.iter().map(|&l| disc_polynomial(n, l, 1.0 / n as f64)).collect(),
            sample_polydisc(n, &mut rng),
        ),
        GenKind::Sparse => {
            return Err(Error::InvalidInput("dense generator takes ball or polydisc".into()))
        }
    };
    let equalities = (0..spec.equality_count())
        .map(|_| anchored_equality(n, &letters, &anchor, &mut rng))
        .collect();
    Ok(Generated {
        problem: Problem::new(n, objective, inequalities, equalities)?,
        anchor,
        spec: *spec,
    })
}

/// `p = ⌊n/u⌋` cliques: `{1..u}`, `{u(j-1)..uj}`, the last running to `n` (1-based).
pub fn chain_cliques(n: usize, u: usize) -> Result<Vec<Vec<Letter>>> {
    if u < 2 || n < u {
        return Err(Error::InvalidInput(format!("need 2 ≤ u ≤ n, got u={u}, n={n}")));
    }
    let p = n / u;
    Ok((1..=p)
        .map(|j| {
            let lo = if j == 1 { 1 } else { u * (j - 1) };
            let hi = if j == p { n } else { u * j };
            (lo..=hi).map(|i| (i - 1) as Letter).collect()
        })
        .collect())
}

/// Equality counts per clique: `⌊l/p⌋` each, the remainder on the last.
pub fn equality_split(l: usize, p: usize) -> Vec<usize> {
    let r = l / p;
    let mut out = vec![r; p];
    out[p - 1] = l - r * (p - 1);
    out
}

pub fn gen_sparse(spec: &GenSpec) -> Result<Generated> {
    let n = spec.n;
    let u = spec
        .u
        .ok_or_else(|| Error::InvalidInput("sparse instances need u".into()))?;
    let cliques = chain_cliques(n, u)?;
    if n / u + 1 != cliques.len() {
        log::info!(
            "{} cliques; the ⌊n/u⌋+1 rule would give {}, the last clique absorbs the remainder",
            cliques.len(),
            n / u + 1
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut objective = NcPolynomial::zero(n);
    for c in &cliques {
        objective = objective.add_poly(&random_quadratic(n, c, true, &mut rng));
    }
    let inequalities = cliques.iter().map(|c| ball_polynomial(n, c)).collect();
    let anchor = sample_ball(n, &mut rng);
    let mut equalities = Vec::new();
    for (c, count) in cliques.iter().zip(equality_split(spec.equality_count(), cliques.len())) {
        for _ in 0..count {
            equalities.push(anchored_equality(n, c, &anchor, &mut rng));
        }
    }
    let problem = Problem::new(n, objective, inequalities, equalities)?.with_cliques(cliques)?;
    Ok(Generated {
        problem,
        anchor,
        spec: *spec,
    })
}

pub fn generate(spec: &GenSpec) -> Result<Generated> {
    match spec.kind {
        GenKind::Sparse => gen_sparse(spec),
        _ => gen_dense(spec),
    }
}
