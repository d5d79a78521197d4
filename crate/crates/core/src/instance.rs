//! Instance files: JSON with 1-based letter indices.
//!
//! ```json
//! {"n": 2,
//!  "objective": [{"word": [1, 2], "coeff": 1.0}, {"word": [2, 1], "coeff": 1.0}],
//!  "ineq": [...], "eq": [...],
//!  "cliques": [[1, 2]],
//!  "meta": {"seed": 7, "kind": "ball", "generator_version": "chacha8-v1"}}
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::free_algebra::{Letter, NcPolynomial, Word};
use crate::generator::{Generated, GENERATOR_VERSION};
use crate::relaxation::{Problem, SYMMETRY_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub word: Vec<usize>,
    pub coeff: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<usize>,
    /// Commutative point at which the equalities vanish.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    pub objective: Vec<Term>,
    #[serde(default)]
    pub ineq: Vec<Vec<Term>>,
    #[serde(default)]
    pub eq: Vec<Vec<Term>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cliques: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub meta: InstanceMeta,
}

fn terms_of(p: &NcPolynomial) -> Vec<Term> {
    p.terms()
        .map(|(w, &c)| Term {
            word: w.to_one_based(),
            coeff: c,
        })
        .collect()
}

fn poly_of(n: usize, terms: &[Term], what: &str) -> Result<NcPolynomial> {
    let mut p = NcPolynomial::zero(n);
    for t in terms {
        if let Some(&bad) = t.word.iter().find(|&&l| l == 0 || l > n) {
            return Err(Error::InvalidInput(format!(
                "{what}: letter {bad} outside 1..={n}"
            )));
        }
        if !t.coeff.is_finite() {
            return Err(Error::InvalidInput(format!("{what}: non-finite coefficient")));
        }
        p.add_term(Word::from_one_based(&t.word)?, t.coeff);
    }
    if !p.is_symmetric_tol(SYMMETRY_TOL) {
        log::warn!("{what} is not symmetric; replacing it by (p + p*)/2");
        p = p.symmetrize();
    }
    Ok(p)
}

impl InstanceFile {
    pub fn from_problem(p: &Problem, meta: InstanceMeta) -> Self {
        InstanceFile {
            n: p.n,
            objective: terms_of(&p.objective),
            ineq: p.inequalities.iter().map(terms_of).collect(),
            eq: p.equalities.iter().map(terms_of).collect(),
            cliques: p.cliques.as_ref().map(|cs| {
                cs.iter()
                    .map(|c| c.iter().map(|&l| l as usize + 1).collect())
                    .collect()
            }),
            meta,
        }
    }

    pub fn from_generated(g: &Generated) -> Self {
        let kind = serde_json::to_value(g.spec.kind)
            .ok()
            .and_then(|v| v.as_str().map(String::from));
        let meta = InstanceMeta {
            seed: Some(g.spec.seed),
            kind,
            generator_version: Some(GENERATOR_VERSION.to_string()),
            l: Some(g.spec.equality_count()),
            u: g.spec.u,
            anchor: Some(g.anchor.clone()),
        };
        Self::from_problem(&g.problem, meta)
    }

    pub fn to_problem(&self) -> Result<Problem> {
        let n = self.n;
        let objective = poly_of(n, &self.objective, "objective")?;
        let ineq = self
            .ineq
            .iter()
            .enumerate()
            .map(|(i, t)| poly_of(n, t, &format!("inequality {}", i + 1)))
            .collect::<Result<Vec<_>>>()?;
        let eq = self
            .eq
            .iter()
            .enumerate()
            .map(|(i, t)| poly_of(n, t, &format!("equality {}", i + 1)))
            .collect::<Result<Vec<_>>>()?;
        let p = Problem::new(n, objective, ineq, eq)?;
        match &self.cliques {
            None => Ok(p),
            Some(cs) => {
                let cliques = cs
                    .iter()
                    .map(|c| {
                        c.iter()
                            .map(|&l| {
                                if l == 0 || l > n {
                                    Err(Error::InvalidInput(format!("clique letter {l} outside 1..={n}")))
                                } else {
                                    Ok((l - 1) as Letter)
                                }
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                p.with_cliques(cliques)
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut s = self.to_json()?;
        s.push('\n');
        std::fs::write(path, s)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{generate, GenKind, GenSpec};

    #[test]
    fn generated_round_trip() {
        for (kind, u) in [(GenKind::Ball, None), (GenKind::Polydisc, None), (GenKind::Sparse, Some(3))] {
            let g = generate(&GenSpec { n: 7, l: Some(2), kind, u, seed: 11 }).unwrap();
            let file = InstanceFile::from_generated(&g);
            let text = file.to_json().unwrap();
            let back = InstanceFile::from_json(&text).unwrap();
            assert_eq!(back, file);
            assert_eq!(back.to_problem().unwrap(), g.problem);
            assert_eq!(back.to_json().unwrap(), text);
        }
    }

    #[test]
    fn asymmetric_input_is_symmetrized() {
        let file = InstanceFile::from_json(
            r#"{"n": 2, "objective": [{"word": [1, 2], "coeff": 2.0}]}"#,
        )
        .unwrap();
        let p = file.to_problem().unwrap();
        assert_eq!(p.objective.coeff(&Word::from_letters(&[0, 1])), 1.0);
        assert_eq!(p.objective.coeff(&Word::from_letters(&[1, 0])), 1.0);
    }

    #[test]
    fn letter_out_of_range() {
        let file = InstanceFile::from_json(r#"{"n": 2, "objective": [{"word": [3], "coeff": 1.0}]}"#).unwrap();
        assert!(matches!(file.to_problem(), Err(Error::InvalidInput(_))));
    }
}
