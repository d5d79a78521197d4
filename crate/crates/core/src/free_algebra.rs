//! Words over noncommuting letters and sparse polynomials in the free algebra.
//!
//! Letters are stored 0-based (`X1` is letter `0`); the 1-based form only
//! appears at the text and JSON boundary. Words compare in graded
//! lexicographic order: shorter words first, then letterwise.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_traits::{One, Zero};
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub type Letter = u16;

/// Largest word basis `enumerate_basis` will materialize.
pub const DEFAULT_INDEX_LIMIT: usize = 1 << 24;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Word(SmallVec<[Letter; 8]>);

impl Word {
    pub fn one() -> Self {
        Word(SmallVec::new())
    }

    pub fn letter(i: Letter) -> Self {
        let mut v = SmallVec::new();
        v.push(i);
        Word(v)
    }

    pub fn from_letters(letters: &[Letter]) -> Self {
        Word(SmallVec::from_slice(letters))
    }

    /// Builds a word from 1-based letter indices, as written in instance files.
    pub fn from_one_based(letters: &[usize]) -> Result<Self> {
        letters
            .iter()
            .map(|&l| {
                if l == 0 || l > Letter::MAX as usize + 1 {
                    Err(Error::InvalidInput(format!("letter index {l} out of range")))
                } else {
                    Ok((l - 1) as Letter)
                }
            })
            .collect::<Result<SmallVec<_>>>()
            .map(Word)
    }

    pub fn to_one_based(&self) -> Vec<usize> {
        self.0.iter().map(|&l| l as usize + 1).collect()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    /// The involution: letters reversed.
    pub fn star(&self) -> Word {
        Word(self.0.iter().rev().copied().collect())
    }

    pub fn is_self_adjoint(&self) -> bool {
        let l = &self.0;
        (0..l.len() / 2).all(|i| l[i] == l[l.len() - 1 - i])
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// `self* · middle · right`, the shape of every moment and localizing entry.
    pub fn sandwich(left: &Word, middle: &Word, right: &Word) -> Word {
        let mut v: SmallVec<[Letter; 8]> =
            SmallVec::with_capacity(left.degree() + middle.degree() + right.degree());
        v.extend(left.0.iter().rev().copied());
        v.extend_from_slice(&middle.0);
        v.extend_from_slice(&right.0);
        Word(v)
    }

    pub fn max_letter(&self) -> Option<Letter> {
        self.0.iter().copied().max()
    }

    pub fn variables(&self) -> BTreeSet<Letter> {
        self.0.iter().copied().collect()
    }

    pub fn canonicalize(&self, mode: SymmetryMode) -> Word {
        canonicalize(self, mode)
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.as_slice().cmp(other.0.as_slice()))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for l in &self.0 {
            write!(f, "X{}", l + 1)?;
        }
        Ok(())
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Which symmetries identify two moment indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum SymmetryMode {
    /// `w ~ w*` (eigenvalue hierarchy).
    StarOnly,
    /// `w ~ w*` and cyclic rotations (trace hierarchy).
    StarCyclic,
}

/// Graded-lex minimal representative of the symmetry class of `w`.
pub fn canonicalize(w: &Word, mode: SymmetryMode) -> Word {
    match mode {
        SymmetryMode::StarOnly => {
            let s = w.star();
            if s < *w {
                s
            } else {
                w.clone()
            }
        }
        SymmetryMode::StarCyclic => {
            let len = w.degree();
            if len <= 1 {
                return w.clone();
            }
            let fwd = w.letters();
            let rev: SmallVec<[Letter; 8]> = fwd.iter().rev().copied().collect();
            let mut best: SmallVec<[Letter; 8]> = SmallVec::from_slice(fwd);
            let mut cand: SmallVec<[Letter; 8]> = SmallVec::with_capacity(len);
            for src in [fwd, rev.as_slice()] {
                for shift in 0..len {
                    cand.clear();
                    cand.extend_from_slice(&src[shift..]);
                    cand.extend_from_slice(&src[..shift]);
                    if cand.as_slice() < best.as_slice() {
                        best.clone_from(&cand);
                    }
                }
            }
            Word(best)
        }
    }
}

pub fn involution(w: &Word) -> Word {
    w.star()
}

/// `s(d, n) = 1 + n + ... + n^d`, or `None` on overflow.
pub fn word_count(n: usize, d: usize) -> Option<usize> {
    let mut total: usize = 0;
    let mut pow: usize = 1;
    for i in 0..=d {
        total = total.checked_add(pow)?;
        if i < d {
            pow = pow.checked_mul(n)?;
        }
    }
    Some(total)
}

/// All words of degree at most `d` over a letter set, in graded-lex order.
#[derive(Debug, Clone)]
pub struct WordBasis {
    letters: Vec<Letter>,
    degree: usize,
    words: Vec<Word>,
    index: HashMap<Word, usize>,
}

impl WordBasis {
    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn position(&self, w: &Word) -> Option<usize> {
        self.index.get(w).copied()
    }
}

/// Words of degree ≤ `d` over `n` letters.
pub fn enumerate_basis(n: usize, d: usize) -> Result<WordBasis> {
    if n == 0 {
        return Err(Error::InvalidInput("letter count must be at least 1".into()));
    }
    if n > Letter::MAX as usize + 1 {
        return Err(Error::Capacity {
            n,
            d,
            limit: DEFAULT_INDEX_LIMIT,
        });
    }
    let letters: Vec<Letter> = (0..n as Letter).collect();
    basis_over(&letters, d, DEFAULT_INDEX_LIMIT)
}

/// Words of degree ≤ `d` using only `letters` (which must be sorted and distinct).
pub fn basis_over(letters: &[Letter], d: usize, limit: usize) -> Result<WordBasis> {
    let n = letters.len();
    let size = word_count(n, d).filter(|&s| s <= limit).ok_or(Error::Capacity {
        n,
        d,
        limit,
    })?;
    debug_assert!(letters.windows(2).all(|p| p[0] < p[1]));
    let mut words = Vec::with_capacity(size);
    words.push(Word::one());
    let mut layer_start = 0;
    for _ in 0..d {
        let layer_end = words.len();
        for i in layer_start..layer_end {
            for &l in letters {
                let mut w = words[i].0.clone();
                w.push(l);
                words.push(Word(w));
            }
        }
        layer_start = layer_end;
    }
    let index = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i))
        .collect();
    Ok(WordBasis {
        letters: letters.to_vec(),
        degree: d,
        words,
        index,
    })
}

/// Coefficient ring for polynomials: `f64` for numerics, `i64` for exact identity checks.
pub trait Coefficient:
    Copy
    + PartialEq
    + fmt::Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
}

impl<T> Coefficient for T where
    T: Copy
        + PartialEq
        + fmt::Debug
        + Zero
        + One
        + Add<Output = T>
        + Sub<Output = T>
        + Mul<Output = T>
        + Neg<Output = T>
{
}

/// Sparse polynomial in `n` noncommuting letters. Zero coefficients are never stored.
#[derive(Clone, PartialEq)]
pub struct NcPolynomial<C = f64> {
    n: usize,
    terms: BTreeMap<Word, C>,
}

impl<C: Coefficient> NcPolynomial<C> {
    pub fn zero(n: usize) -> Self {
        NcPolynomial {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: C) -> Self {
        Self::monomial(n, Word::one(), c)
    }

    pub fn monomial(n: usize, w: Word, c: C) -> Self {
        let mut p = Self::zero(n);
        p.add_term(w, c);
        p
    }

    /// The letter `X_{i+1}` (0-based `i`).
    pub fn var(n: usize, i: Letter) -> Self {
        Self::monomial(n, Word::letter(i), C::one())
    }

    pub fn from_terms<I: IntoIterator<Item = (Word, C)>>(n: usize, terms: I) -> Self {
        let mut p = Self::zero(n);
        for (w, c) in terms {
            p.add_term(w, c);
        }
        p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn add_term(&mut self, w: Word, c: C) {
        debug_assert!(w.max_letter().is_none_or(|l| (l as usize) < self.n));
        if c == C::zero() {
            return;
        }
        match self.terms.entry(w) {
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let v = *e.get() + c;
                if v == C::zero() {
                    e.remove();
                } else {
                    *e.get_mut() = v;
                }
            }
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
        }
    }

    pub fn coeff(&self, w: &Word) -> C {
        self.terms.get(w).copied().unwrap_or_else(C::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &C)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Degree of the longest word; 0 for the zero polynomial.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(Word::degree).max().unwrap_or(0)
    }

    /// `⌈deg/2⌉`.
    pub fn half_degree(&self) -> usize {
        self.degree().div_ceil(2)
    }

    pub fn star(&self) -> Self {
        Self::from_terms(self.n, self.terms.iter().map(|(w, &c)| (w.star(), c)))
    }

    pub fn scale(&self, s: C) -> Self {
        Self::from_terms(self.n, self.terms.iter().map(|(w, &c)| (w.clone(), c * s)))
    }

    pub fn is_symmetric(&self) -> bool {
        self.terms
            .iter()
            .all(|(w, &c)| self.terms.get(&w.star()).copied() == Some(c))
    }

    pub fn variables(&self) -> BTreeSet<Letter> {
        self.terms.keys().flat_map(|w| w.letters().iter().copied()).collect()
    }

    /// Sums coefficients within each symmetry class, keyed by canonical word.
    pub fn canonical_classes(&self, mode: SymmetryMode) -> BTreeMap<Word, C> {
        let mut out: BTreeMap<Word, C> = BTreeMap::new();
        for (w, &c) in &self.terms {
            let e = out.entry(canonicalize(w, mode)).or_insert_with(C::zero);
            *e = *e + c;
        }
        out.retain(|_, c| *c != C::zero());
        out
    }

    /// Sparse product; words concatenate.
    pub fn mul_poly(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "letter counts differ");
        let mut out = Self::zero(self.n);
        for (u, &a) in &self.terms {
            for (v, &b) in &other.terms {
                out.add_term(u.concat(v), a * b);
            }
        }
        out
    }

    pub fn add_poly(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "letter counts differ");
        let mut out = self.clone();
        for (w, &c) in &other.terms {
            out.add_term(w.clone(), c);
        }
        out
    }

    pub fn sub_poly(&self, other: &Self) -> Self {
        self.add_poly(&other.scale(-C::one()))
    }

    /// `Σ_w c_w · left* w right`.
    pub fn sandwich(&self, left: &Word, right: &Word) -> Self {
        Self::from_terms(
            self.n,
            self.terms
                .iter()
                .map(|(w, &c)| (Word::sandwich(left, w, right), c)),
        )
    }
}

impl NcPolynomial<f64> {
    /// `(p + p*)/2`.
    pub fn symmetrize(&self) -> Self {
        self.add_poly(&self.star()).scale(0.5)
    }

    pub fn is_symmetric_tol(&self, tol: f64) -> bool {
        self.terms
            .iter()
            .all(|(w, &c)| (self.coeff(&w.star()) - c).abs() <= tol)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Commutative evaluation at a real point (each letter replaced by a scalar).
    pub fn eval_commutative(&self, point: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(w, &c)| c * w.letters().iter().map(|&l| point[l as usize]).product::<f64>())
            .sum()
    }
}

impl<C: Coefficient> fmt::Debug for NcPolynomial<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for (w, c) in &self.terms {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "{c:?}·{w}")?;
        }
        Ok(())
    }
}

impl<C: Coefficient> Add for &NcPolynomial<C> {
    type Output = NcPolynomial<C>;
    fn add(self, rhs: Self) -> NcPolynomial<C> {
        self.add_poly(rhs)
    }
}

impl<C: Coefficient> Sub for &NcPolynomial<C> {
    type Output = NcPolynomial<C>;
    fn sub(self, rhs: Self) -> NcPolynomial<C> {
        self.sub_poly(rhs)
    }
}

impl<C: Coefficient> Mul for &NcPolynomial<C> {
    type Output = NcPolynomial<C>;
    fn mul(self, rhs: Self) -> NcPolynomial<C> {
        self.mul_poly(rhs)
    }
}

impl<C: Coefficient> Neg for &NcPolynomial<C> {
    type Output = NcPolynomial<C>;
    fn neg(self) -> NcPolynomial<C> {
        self.scale(-C::one())
    }
}

/// Matrix of the word `w` evaluated at `mats` (identity for the empty word).
pub fn evaluate_word(w: &Word, mats: &[DMatrix<f64>], order: usize) -> DMatrix<f64> {
    let mut acc = DMatrix::<f64>::identity(order, order);
    for &l in w.letters() {
        acc = &acc * &mats[l as usize];
    }
    acc
}

fn check_tuple(n: usize, mats: &[DMatrix<f64>]) -> Result<usize> {
    if mats.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "expected {n} matrices, got {}",
            mats.len()
        )));
    }
    let order = mats.first().map_or(1, |m| m.nrows());
    for (i, m) in mats.iter().enumerate() {
        if m.nrows() != order || m.ncols() != order {
            return Err(Error::DimensionMismatch(format!(
                "matrix {} is {}x{}, expected {order}x{order}",
                i + 1,
                m.nrows(),
                m.ncols()
            )));
        }
    }
    Ok(order)
}

/// Evaluates `p` on a tuple of symmetric matrices; the result is symmetrized.
pub fn evaluate(p: &NcPolynomial<f64>, mats: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let order = check_tuple(p.n(), mats)?;
    let mut out = DMatrix::<f64>::zeros(order, order);
    for (w, &c) in p.terms() {
        out += evaluate_word(w, mats, order) * c;
    }
    Ok((&out + out.transpose()) * 0.5)
}

/// Evaluation without the final symmetrization, for non-symmetric polynomials.
pub fn evaluate_raw(p: &NcPolynomial<f64>, mats: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let order = check_tuple(p.n(), mats)?;
    let mut out = DMatrix::<f64>::zeros(order, order);
    for (w, &c) in p.terms() {
        out += evaluate_word(w, mats, order) * c;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(ls: &[usize]) -> Word {
        Word::from_one_based(ls).unwrap()
    }

    #[test]
    fn basis_sizes_and_order() {
        assert_eq!(enumerate_basis(10, 2).unwrap().len(), 111);
        let b = enumerate_basis(1, 3).unwrap();
        assert_eq!(b.words(), &[w(&[]), w(&[1]), w(&[1, 1]), w(&[1, 1, 1])]);
        let b = enumerate_basis(2, 2).unwrap();
        let expect = vec![
            w(&[]),
            w(&[1]),
            w(&[2]),
            w(&[1, 1]),
            w(&[1, 2]),
            w(&[2, 1]),
            w(&[2, 2]),
        ];
        assert_eq!(b.words(), expect.as_slice());
        assert_eq!(b.position(&w(&[2, 1])), Some(5));
    }

    #[test]
    fn capacity_error() {
        let letters: Vec<Letter> = (0..100).collect();
        assert!(matches!(
            basis_over(&letters, 6, DEFAULT_INDEX_LIMIT),
            Err(Error::Capacity { .. })
        ));
        assert!(enumerate_basis(0, 2).is_err());
    }

    #[test]
    fn involution_examples() {
        assert_eq!(involution(&w(&[1, 2, 3])), w(&[3, 2, 1]));
        assert_eq!(involution(&w(&[])), w(&[]));
        assert_eq!(involution(&w(&[1, 1])), w(&[1, 1]));
    }

    #[test]
    fn canonicalize_examples() {
        assert_eq!(canonicalize(&w(&[2, 1]), SymmetryMode::StarOnly), w(&[1, 2]));
        assert_eq!(
            canonicalize(&w(&[1, 2, 1, 1]), SymmetryMode::StarCyclic),
            w(&[1, 1, 1, 2])
        );
        assert_eq!(canonicalize(&w(&[1, 2]), SymmetryMode::StarCyclic), w(&[1, 2]));
        assert_eq!(canonicalize(&w(&[2, 1]), SymmetryMode::StarCyclic), w(&[1, 2]));
    }

    #[test]
    fn arithmetic_examples() {
        let x1 = NcPolynomial::<f64>::var(2, 0);
        let x2 = NcPolynomial::<f64>::var(2, 1);
        let p = &x1 * &x2;
        assert_eq!(p.coeff(&w(&[1, 2])), 1.0);
        assert_eq!(p.coeff(&w(&[2, 1])), 0.0);

        let q = NcPolynomial::monomial(2, w(&[1, 2]), 2.0).star();
        assert_eq!(q.coeff(&w(&[2, 1])), 2.0);
        assert_eq!(q.num_terms(), 1);

        let s = &x1 + &x2;
        let sq = &s * &s;
        assert_eq!(sq.num_terms(), 4);
        for word in [w(&[1, 1]), w(&[1, 2]), w(&[2, 1]), w(&[2, 2])] {
            assert_eq!(sq.coeff(&word), 1.0);
        }

        let z = &x1 - &x1;
        assert!(z.is_zero());
    }

    #[test]
    fn degree_and_half_degree() {
        let p = NcPolynomial::from_terms(2, [(w(&[1, 2, 1]), 1.0), (w(&[]), 3.0)]);
        assert_eq!(p.degree(), 3);
        assert_eq!(p.half_degree(), 2);
        assert_eq!(NcPolynomial::<f64>::constant(2, 4.0).half_degree(), 0);
    }

    #[test]
    fn evaluate_examples() {
        let one = NcPolynomial::<f64>::constant(2, 1.0);
        let a = vec![DMatrix::from_element(3, 3, 0.3), DMatrix::identity(3, 3)];
        assert_eq!(evaluate(&one, &a).unwrap(), DMatrix::identity(3, 3));

        // s with s^2 = I, A1 = s/√2, A2 = -s/√2: X1X2 + X2X1 = -I.
        let s = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mats = vec![&s * r, &s * (-r)];
        let f = NcPolynomial::from_terms(2, [(w(&[1, 2]), 1.0), (w(&[2, 1]), 1.0)]);
        let v = evaluate(&f, &mats).unwrap();
        assert!((v + DMatrix::identity(2, 2)).amax() < 1e-12);

        let n = 4;
        let ball = NcPolynomial::from_terms(n, (0..n as Letter).map(|i| (Word::from_letters(&[i, i]), 1.0)));
        let pt: Vec<DMatrix<f64>> = (0..n)
            .map(|_| DMatrix::from_element(1, 1, 1.0 / (n as f64).sqrt()))
            .collect();
        assert!((evaluate(&ball, &pt).unwrap()[(0, 0)] - 1.0).abs() < 1e-12);

        let bad = vec![DMatrix::identity(2, 2), DMatrix::identity(3, 3)];
        assert!(matches!(evaluate(&f, &bad), Err(Error::DimensionMismatch(_))));
    }
}
