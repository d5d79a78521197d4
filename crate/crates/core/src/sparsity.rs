//! Correlative sparsity: the csp graph, a chordal extension with its maximal
//! cliques, assignment of constraints to cliques, and the per-clique relaxation.

use std::collections::BTreeSet;

use crate::error::{ConstraintKind, Error, Result};
use crate::free_algebra::{Letter, NcPolynomial, SymmetryMode};
use crate::relaxation::{build_groups, Group, Problem, Relaxation};

/// Undirected graph on the letters `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CspGraph {
    pub adj: Vec<BTreeSet<Letter>>,
}

impl CspGraph {
    pub fn new(n: usize) -> Self {
        CspGraph {
            adj: vec![BTreeSet::new(); n],
        }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn add_edge(&mut self, a: Letter, b: Letter) {
        if a != b {
            self.adj[a as usize].insert(b);
            self.adj[b as usize].insert(a);
        }
    }

    pub fn has_edge(&self, a: Letter, b: Letter) -> bool {
        self.adj[a as usize].contains(&b)
    }

    pub fn edges(&self) -> Vec<(Letter, Letter)> {
        let mut out = Vec::new();
        for (a, nb) in self.adj.iter().enumerate() {
            for &b in nb.range((a as Letter + 1)..) {
                out.push((a as Letter, b));
            }
        }
        out
    }

    fn add_clique(&mut self, vars: &BTreeSet<Letter>) {
        let v: Vec<Letter> = vars.iter().copied().collect();
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                self.add_edge(v[i], v[j]);
            }
        }
    }
}

/// Edge `{i, j}` iff the letters share a monomial of `f`, or both occur in one constraint.
pub fn csp_graph(p: &Problem) -> CspGraph {
    let mut g = CspGraph::new(p.n);
    for (w, _) in p.objective.terms() {
        g.add_clique(&w.variables());
    }
    for c in p.inequalities.iter().chain(&p.equalities) {
        g.add_clique(&c.variables());
    }
    g
}

/// Maximal cliques of a chordal extension built by greedy minimum-degree
/// elimination (ties broken by lowest letter). Cliques come back sorted.
pub fn chordal_cliques(graph: &CspGraph) -> Vec<Vec<Letter>> {
    let n = graph.n();
    let mut adj = graph.adj.clone();
    let mut alive = vec![true; n];
    let mut cliques: Vec<Vec<Letter>> = Vec::new();
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| alive[v])
            .min_by_key(|&v| (adj[v].len(), v))
            .expect("a vertex remains");
        let nbrs: Vec<Letter> = adj[v].iter().copied().collect();
        let mut clique: Vec<Letter> = nbrs.clone();
        clique.push(v as Letter);
        clique.sort_unstable();
        cliques.push(clique);
        for i in 0..nbrs.len() {
            for j in i + 1..nbrs.len() {
                let (a, b) = (nbrs[i] as usize, nbrs[j] as usize);
                adj[a].insert(nbrs[j]);
                adj[b].insert(nbrs[i]);
            }
        }
        for &u in &nbrs {
            adj[u as usize].remove(&(v as Letter));
        }
        adj[v].clear();
        alive[v] = false;
    }
    // Drop cliques contained in another one.
    cliques.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    let mut maximal: Vec<Vec<Letter>> = Vec::new();
    for c in cliques {
        let contained = maximal
            .iter()
            .any(|m| c.iter().all(|x| m.binary_search(x).is_ok()));
        if !contained {
            maximal.push(c);
        }
    }
    maximal.sort();
    maximal
}

/// Cliques together with the constraint partition `(J_j, W_j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliqueDecomposition {
    pub cliques: Vec<Vec<Letter>>,
    pub inequalities: Vec<Vec<usize>>,
    pub equalities: Vec<Vec<usize>>,
}

impl CliqueDecomposition {
    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    pub fn max_clique_size(&self) -> usize {
        self.cliques.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn groups(&self) -> Vec<Group> {
        (0..self.len())
            .map(|j| Group {
                letters: self.cliques[j].clone(),
                inequalities: self.inequalities[j].clone(),
                equalities: self.equalities[j].clone(),
            })
            .collect()
    }
}

fn home_clique(cliques: &[Vec<Letter>], poly: &NcPolynomial) -> Option<usize> {
    let vars = poly.variables();
    cliques
        .iter()
        .position(|c| vars.iter().all(|v| c.binary_search(v).is_ok()))
}

/// Assigns each constraint to the lowest-index clique containing its letters.
pub fn partition_constraints(p: &Problem, cliques: &[Vec<Letter>]) -> Result<CliqueDecomposition> {
    let mut cliques: Vec<Vec<Letter>> = cliques.to_vec();
    for c in &mut cliques {
        c.sort_unstable();
        c.dedup();
    }
    let mut ineq = vec![Vec::new(); cliques.len()];
    let mut eq = vec![Vec::new(); cliques.len()];
    for (i, g) in p.inequalities.iter().enumerate() {
        let j = home_clique(&cliques, g).ok_or(Error::ConstraintOutsideCliques {
            kind: ConstraintKind::Inequality,
            index: i + 1,
        })?;
        ineq[j].push(i);
    }
    for (i, h) in p.equalities.iter().enumerate() {
        let j = home_clique(&cliques, h).ok_or(Error::ConstraintOutsideCliques {
            kind: ConstraintKind::Equality,
            index: i + 1,
        })?;
        eq[j].push(i);
    }
    Ok(CliqueDecomposition {
        cliques,
        inequalities: ineq,
        equalities: eq,
    })
}

/// Cliques detected from the csp graph, with constraints partitioned.
pub fn detect(p: &Problem) -> Result<CliqueDecomposition> {
    let cliques = chordal_cliques(&csp_graph(p));
    partition_constraints(p, &cliques)
}

/// Per-clique relaxation: one moment block per clique plus its localizing
/// blocks. Keys are shared across cliques.
pub fn build_sparse(
    p: &Problem,
    k: usize,
    mode: SymmetryMode,
    dec: &CliqueDecomposition,
) -> Result<Relaxation> {
    for (w, _) in p.objective.terms() {
        let vars = w.variables();
        if !dec
            .cliques
            .iter()
            .any(|c| vars.iter().all(|v| c.binary_search(v).is_ok()))
        {
            return Err(Error::InvalidInput(format!(
                "objective monomial {w} is not contained in any clique"
            )));
        }
    }
    build_groups(p, k, mode, dec.groups())
}
