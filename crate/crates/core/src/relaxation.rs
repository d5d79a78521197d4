//! Moment relaxations of order `k`: moment and localizing blocks over a
//! global moment vector `y`, equality entries, and the Riesz objective.
//!
//! Moment indices are symmetry classes of words (see [`SymmetryMode`]); two
//! words in the same class share one [`MomentKey`], so the identifications
//! `y_w = y_{w*}` and, in trace mode, `y_u = y_v` for cyclically equivalent
//! words are realized by construction rather than by extra constraints.

use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use smallvec::SmallVec;

use crate::error::{ConstraintKind, Error, Result};
use crate::free_algebra::{
    basis_over, canonicalize, Letter, NcPolynomial, SymmetryMode, Word, DEFAULT_INDEX_LIMIT,
};

/// Symmetry tolerance for input polynomials.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub n: usize,
    pub objective: NcPolynomial,
    pub inequalities: Vec<NcPolynomial>,
    pub equalities: Vec<NcPolynomial>,
    /// Letter cliques for correlative sparsity (0-based letters, sorted).
    pub cliques: Option<Vec<Vec<Letter>>>,
}

impl Problem {
    pub fn new(
        n: usize,
        objective: NcPolynomial,
        inequalities: Vec<NcPolynomial>,
        equalities: Vec<NcPolynomial>,
    ) -> Result<Self> {
        let p = Problem {
            n,
            objective,
            inequalities,
            equalities,
            cliques: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_cliques(mut self, cliques: Vec<Vec<Letter>>) -> Result<Self> {
        let mut cliques = cliques;
        for c in &mut cliques {
            c.sort_unstable();
            c.dedup();
        }
        self.cliques = Some(cliques);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("letter count must be at least 1".into()));
        }
        let all = std::iter::once(&self.objective)
            .chain(&self.inequalities)
            .chain(&self.equalities);
        for (i, p) in all.enumerate() {
            if p.n() != self.n {
                return Err(Error::DimensionMismatch(format!(
                    "polynomial {i} has {} letters, problem has {}",
                    p.n(),
                    self.n
                )));
            }
            if !p.is_symmetric_tol(SYMMETRY_TOL) {
                return Err(Error::InvalidInput(format!("polynomial {i} is not symmetric")));
            }
        }
        if let Some(cliques) = &self.cliques {
            for c in cliques {
                if c.is_empty() || c.iter().any(|&l| l as usize >= self.n) {
                    return Err(Error::InvalidInput(format!("invalid clique {c:?}")));
                }
            }
            for (w, _) in self.objective.terms() {
                let vars = w.variables();
                if !cliques.iter().any(|c| vars.iter().all(|l| c.binary_search(l).is_ok())) {
                    return Err(Error::InvalidInput(format!(
                        "objective monomial {w} is not contained in any clique"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn constraint(&self, kind: ConstraintKind, i: usize) -> &NcPolynomial {
        match kind {
            ConstraintKind::Inequality => &self.inequalities[i],
            ConstraintKind::Equality => &self.equalities[i],
        }
    }
}

/// `k_min = max{⌈f⌉, ⌈g_i⌉, ⌈h_j⌉}`.
pub fn minimal_order(p: &Problem) -> usize {
    std::iter::once(&p.objective)
        .chain(&p.inequalities)
        .chain(&p.equalities)
        .map(NcPolynomial::half_degree)
        .max()
        .unwrap_or(0)
}

/// Dense index of a moment class in `y`.
pub type MomentKey = usize;

/// Canonical word ↔ dense key, assigned in first-encounter order.
#[derive(Debug, Clone)]
pub struct KeyTable {
    mode: SymmetryMode,
    index: HashMap<Word, MomentKey>,
    words: Vec<Word>,
}

impl KeyTable {
    pub fn new(mode: SymmetryMode) -> Self {
        KeyTable {
            mode,
            index: HashMap::new(),
            words: Vec::new(),
        }
    }

    pub fn mode(&self) -> SymmetryMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Canonical word of each key.
    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn intern(&mut self, w: &Word) -> MomentKey {
        let c = canonicalize(w, self.mode);
        if let Some(&k) = self.index.get(&c) {
            return k;
        }
        let k = self.words.len();
        self.index.insert(c.clone(), k);
        self.words.push(c);
        k
    }

    pub fn get(&self, w: &Word) -> Option<MomentKey> {
        self.index.get(&canonicalize(w, self.mode)).copied()
    }

    fn swap(&mut self, a: MomentKey, b: MomentKey) {
        if a == b {
            return;
        }
        self.words.swap(a, b);
        self.index.insert(self.words[a].clone(), a);
        self.index.insert(self.words[b].clone(), b);
    }
}

/// Sparse linear functional of `y`: sorted by key, no duplicates, no zeros.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearForm(SmallVec<[(MomentKey, f64); 2]>);

impl LinearForm {
    pub fn single(key: MomentKey, coeff: f64) -> Self {
        let mut v = SmallVec::new();
        if coeff != 0.0 {
            v.push((key, coeff));
        }
        LinearForm(v)
    }

    pub fn from_pairs<I: IntoIterator<Item = (MomentKey, f64)>>(pairs: I) -> Self {
        let mut v: SmallVec<[(MomentKey, f64); 2]> = pairs.into_iter().collect();
        v.sort_unstable_by_key(|p| p.0);
        let mut out: SmallVec<[(MomentKey, f64); 2]> = SmallVec::with_capacity(v.len());
        for (k, c) in v {
            match out.last_mut() {
                Some(last) if last.0 == k => last.1 += c,
                _ => out.push((k, c)),
            }
        }
        out.retain(|p| p.1 != 0.0);
        LinearForm(out)
    }

    pub fn terms(&self) -> &[(MomentKey, f64)] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.0.iter().map(|&(k, c)| c * y[k]).sum()
    }

    /// The key if this form is exactly `1·y_key`.
    pub fn as_single_key(&self) -> Option<MomentKey> {
        match self.0.as_slice() {
            [(k, c)] if *c == 1.0 => Some(*k),
            _ => None,
        }
    }
}

/// `L_y(p)` with coefficients merged per key. Every word must have degree ≤ `bound`.
pub fn riesz(p: &NcPolynomial, keys: &mut KeyTable, bound: usize) -> Result<LinearForm> {
    let mut pairs = Vec::with_capacity(p.num_terms());
    for (w, &c) in p.terms() {
        if w.degree() > bound {
            return Err(Error::DegreeTooHigh {
                word: w.to_string(),
                degree: w.degree(),
                bound,
            });
        }
        pairs.push((keys.intern(w), c));
    }
    Ok(LinearForm::from_pairs(pairs))
}

/// Packed upper-triangular index of `(r, c)`, `r ≤ c`, in an `s × s` matrix.
#[inline]
pub fn packed_index(s: usize, r: usize, c: usize) -> usize {
    debug_assert!(r <= c && c < s);
    r * s - r * (r + 1) / 2 + c
}

/// Inverse of [`packed_index`] enumeration order: all `(r, c)` with `r ≤ c`.
pub fn upper_pairs(s: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..s).flat_map(move |r| (r..s).map(move |c| (r, c)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Moment,
    /// Localizing block of inequality `constraint` (index into `Problem::inequalities`).
    Localizing { constraint: usize },
}

/// A symmetric block indexed by `basis × basis`, stored upper triangle row-major.
#[derive(Debug, Clone)]
pub struct PsdBlock {
    pub group: usize,
    pub kind: BlockKind,
    pub basis: Vec<Word>,
    pub entries: Vec<LinearForm>,
}

impl PsdBlock {
    pub fn size(&self) -> usize {
        self.basis.len()
    }

    pub fn entry(&self, r: usize, c: usize) -> &LinearForm {
        let (r, c) = if r <= c { (r, c) } else { (c, r) };
        &self.entries[packed_index(self.size(), r, c)]
    }

    pub fn eval(&self, y: &[f64]) -> DMatrix<f64> {
        let s = self.size();
        let mut m = DMatrix::zeros(s, s);
        for ((r, c), form) in upper_pairs(s).zip(&self.entries) {
            let v = form.eval(y);
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
        m
    }
}

/// Entries of `M_{k_h}(h y)` that must vanish.
#[derive(Debug, Clone)]
pub struct EqualityBlock {
    pub group: usize,
    pub constraint: usize,
    pub basis: Vec<Word>,
    pub entries: Vec<LinearForm>,
}

/// Letters and constraints handled together: the whole problem when dense,
/// one clique when sparse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub letters: Vec<Letter>,
    pub inequalities: Vec<usize>,
    pub equalities: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Relaxation {
    pub n: usize,
    pub order: usize,
    pub mode: SymmetryMode,
    pub groups: Vec<Group>,
    pub blocks: Vec<PsdBlock>,
    pub equalities: Vec<EqualityBlock>,
    pub keys: KeyTable,
    pub objective: LinearForm,
}

impl Relaxation {
    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn max_block_size(&self) -> usize {
        self.blocks.iter().map(PsdBlock::size).max().unwrap_or(0)
    }

    pub fn is_sparse(&self) -> bool {
        self.groups.len() > 1
    }

    /// Key of the empty word (always 0).
    pub fn one_key(&self) -> MomentKey {
        0
    }

    pub fn blocks_of_group(&self, g: usize) -> impl Iterator<Item = (usize, &PsdBlock)> {
        self.blocks.iter().enumerate().filter(move |(_, b)| b.group == g)
    }

    pub fn equality_forms(&self) -> impl Iterator<Item = &LinearForm> {
        self.equalities.iter().flat_map(|e| e.entries.iter())
    }

    /// Largest `|form(y)|` over all equality entries.
    pub fn equality_violation(&self, y: &[f64]) -> f64 {
        self.equality_forms()
            .map(|f| f.eval(y).abs())
            .fold(0.0, f64::max)
    }

    /// Moment values from a feasible point: `y_key = v* w(A) v` in eigenvalue
    /// mode, `tr(w(A))/N` in trace mode, for the canonical word `w` of each key.
    pub fn moment_vector_from_evaluation(
        &self,
        problem: &Problem,
        mats: &[DMatrix<f64>],
        state: Option<&DVector<f64>>,
    ) -> Result<Vec<f64>> {
        let y = moment_vector(&self.keys, mats, state)?;
        warn_if_infeasible(problem, mats);
        Ok(y)
    }
}

/// Moment values of every key from a matrix tuple (see
/// [`Relaxation::moment_vector_from_evaluation`]).
pub fn moment_vector(
    keys: &KeyTable,
    mats: &[DMatrix<f64>],
    state: Option<&DVector<f64>>,
) -> Result<Vec<f64>> {
    let order = mats.first().map_or(1, |m| m.nrows());
    for m in mats {
        if m.nrows() != order || m.ncols() != order {
            return Err(Error::DimensionMismatch("matrices of unequal order".into()));
        }
    }
    let max_letter = keys
        .words()
        .iter()
        .filter_map(Word::max_letter)
        .max()
        .map_or(0, |l| l as usize + 1);
    if max_letter > mats.len() {
        return Err(Error::DimensionMismatch(format!(
            "keys use {max_letter} letters, got {} matrices",
            mats.len()
        )));
    }
    match (keys.mode(), state) {
        (SymmetryMode::StarOnly, Some(v)) => {
            if v.len() != order {
                return Err(Error::DimensionMismatch("state vector length".into()));
            }
            // x_u = u(A) v, memoized by suffix recursion.
            let mut cache: HashMap<Word, DVector<f64>> = HashMap::new();
            fn apply(
                w: &[Letter],
                mats: &[DMatrix<f64>],
                v: &DVector<f64>,
                cache: &mut HashMap<Word, DVector<f64>>,
            ) -> DVector<f64> {
                if w.is_empty() {
                    return v.clone();
                }
                let key = Word::from_letters(w);
                if let Some(x) = cache.get(&key) {
                    return x.clone();
                }
                let tail = apply(&w[1..], mats, v, cache);
                let x = &mats[w[0] as usize] * tail;
                cache.insert(key, x.clone());
                x
            }
            Ok(keys
                .words()
                .iter()
                .map(|c| {
                    let l = c.letters();
                    let h = l.len() / 2;
                    let left = Word::from_letters(&l[..h]).star();
                    let a = apply(left.letters(), mats, v, &mut cache);
                    let b = apply(&l[h..], mats, v, &mut cache);
                    a.dot(&b)
                })
                .collect())
        }
        (SymmetryMode::StarOnly, None) => Err(Error::InvalidInput(
            "eigenvalue-mode moments need a state vector".into(),
        )),
        (SymmetryMode::StarCyclic, _) => {
            let mut cache: HashMap<Word, DMatrix<f64>> = HashMap::new();
            fn apply(
                w: &[Letter],
                mats: &[DMatrix<f64>],
                order: usize,
                cache: &mut HashMap<Word, DMatrix<f64>>,
            ) -> DMatrix<f64> {
                if w.is_empty() {
                    return DMatrix::identity(order, order);
                }
                let key = Word::from_letters(w);
                if let Some(x) = cache.get(&key) {
                    return x.clone();
                }
                let tail = apply(&w[1..], mats, order, cache);
                let x = &mats[w[0] as usize] * tail;
                cache.insert(key, x.clone());
                x
            }
            Ok(keys
                .words()
                .iter()
                .map(|c| {
                    let l = c.letters();
                    let h = l.len() / 2;
                    let left = Word::from_letters(&l[..h]).star();
                    let a = apply(left.letters(), mats, order, &mut cache);
                    let b = apply(&l[h..], mats, order, &mut cache);
                    a.dot(&b) / order as f64
                })
                .collect())
        }
    }
}

/// Logs a warning when `mats` violates the problem's constraints beyond 1e-8.
pub fn warn_if_infeasible(problem: &Problem, mats: &[DMatrix<f64>]) {
    let v = constraint_violation(problem, mats);
    if v > 1e-8 {
        log::warn!("evaluation point violates constraints by {v:.3e}");
    }
}

/// Max of `-λ_min(g(A))` over inequalities and `‖h(A)‖_max` over equalities.
pub fn constraint_violation(problem: &Problem, mats: &[DMatrix<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for g in &problem.inequalities {
        if let Ok(m) = crate::free_algebra::evaluate(g, mats) {
            let lo = m.symmetric_eigenvalues().min();
            worst = worst.max(-lo);
        }
    }
    for h in &problem.equalities {
        if let Ok(m) = crate::free_algebra::evaluate(h, mats) {
            worst = worst.max(m.amax());
        }
    }
    worst
}

/// Dense relaxation of order `k` (delegates to the sparse build when the
/// problem carries cliques).
pub fn build(p: &Problem, k: usize, mode: SymmetryMode) -> Result<Relaxation> {
    if let Some(cliques) = &p.cliques {
        let dec = crate::sparsity::partition_constraints(p, cliques)?;
        return crate::sparsity::build_sparse(p, k, mode, &dec);
    }
    let group = Group {
        letters: (0..p.n as Letter).collect(),
        inequalities: (0..p.inequalities.len()).collect(),
        equalities: (0..p.equalities.len()).collect(),
    };
    build_groups(p, k, mode, vec![group])
}

/// Assembles blocks group by group: moment block, then localizing blocks;
/// equality entries last. Keys are global across groups.
pub(crate) fn build_groups(
    p: &Problem,
    k: usize,
    mode: SymmetryMode,
    groups: Vec<Group>,
) -> Result<Relaxation> {
    let kmin = minimal_order(p);
    if k < kmin {
        return Err(Error::OrderTooSmall {
            order: k,
            min: kmin,
        });
    }
    let mut keys = KeyTable::new(mode);
    keys.intern(&Word::one());
    let mut blocks = Vec::new();
    let mut equalities = Vec::new();

    for (gi, group) in groups.iter().enumerate() {
        let moment_basis = basis_over(&group.letters, k, DEFAULT_INDEX_LIMIT)?;
        let words = moment_basis.words();
        let s = words.len();
        let mut entries = Vec::with_capacity(s * (s + 1) / 2);
        for (r, c) in upper_pairs(s) {
            let w = Word::sandwich(&words[r], &Word::one(), &words[c]);
            entries.push(LinearForm::single(keys.intern(&w), 1.0));
        }
        blocks.push(PsdBlock {
            group: gi,
            kind: BlockKind::Moment,
            basis: words.to_vec(),
            entries,
        });

        for &ci in &group.inequalities {
            let g = &p.inequalities[ci];
            let kg = k - g.half_degree();
            let basis = basis_over(&group.letters, kg, DEFAULT_INDEX_LIMIT)?;
            let entries = localizing_entries(g, basis.words(), &mut keys);
            blocks.push(PsdBlock {
                group: gi,
                kind: BlockKind::Localizing { constraint: ci },
                basis: basis.words().to_vec(),
                entries,
            });
        }
    }
    for (gi, group) in groups.iter().enumerate() {
        for &ci in &group.equalities {
            let h = &p.equalities[ci];
            let kh = k - h.half_degree();
            let basis = basis_over(&group.letters, kh, DEFAULT_INDEX_LIMIT)?;
            let entries = localizing_entries(h, basis.words(), &mut keys);
            equalities.push(EqualityBlock {
                group: gi,
                constraint: ci,
                basis: basis.words().to_vec(),
                entries,
            });
        }
    }

    let one = keys.get(&Word::one()).expect("word 1 interned first");
    keys.swap(0, one);
    let objective = riesz(&p.objective, &mut keys, 2 * k)?;

    Ok(Relaxation {
        n: p.n,
        order: k,
        mode,
        groups,
        blocks,
        equalities,
        keys,
        objective,
    })
}

fn localizing_entries(g: &NcPolynomial, words: &[Word], keys: &mut KeyTable) -> Vec<LinearForm> {
    let s = words.len();
    let mut entries = Vec::with_capacity(s * (s + 1) / 2);
    let mut pairs = Vec::with_capacity(g.num_terms());
    for (r, c) in upper_pairs(s) {
        pairs.clear();
        for (w, &coef) in g.terms() {
            pairs.push((keys.intern(&Word::sandwich(&words[r], w, &words[c])), coef));
        }
        entries.push(LinearForm::from_pairs(pairs.iter().copied()));
    }
    entries
}

/// Letters used by a polynomial.
pub fn support(p: &NcPolynomial) -> BTreeSet<Letter> {
    p.variables()
}
