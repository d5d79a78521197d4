//! Standard primal SDP with constant trace: `X = P D(y) P`, rows `A(X) = b`,
//! objective `⟨C, X⟩ = L_y(f)`.
//!
//! A functional is a list of `(block, row, col, value)` with `row ≤ col`; it
//! evaluates to `Σ value · X_block[row, col]` on symmetric `X`.

use std::fmt::Write as _;
use std::io::BufRead;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::ctp::CtpCertificate;
use crate::error::{Error, Result};
use crate::relaxation::{upper_pairs, BlockKind, MomentKey, Relaxation};

/// `(block, row, col, value)`, `row ≤ col`.
pub type Entry = (usize, usize, usize, f64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RowFamily {
    /// `y_1` representative pinned.
    Pin,
    /// Duplicate moment entry tied to its representative.
    Structure,
    /// Localizing entry through representatives.
    Localizing,
    /// Equality entry through representatives.
    Equality,
    /// Per-clique trace (sparse only, not counted in ζ).
    CliqueTrace,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub family: RowFamily,
    pub entries: Vec<Entry>,
    pub rhs: f64,
}

impl Constraint {
    pub fn eval(&self, x: &[DMatrix<f64>]) -> f64 {
        eval_functional(&self.entries, x)
    }
}

pub fn eval_functional(entries: &[Entry], x: &[DMatrix<f64>]) -> f64 {
    entries.iter().map(|&(b, r, c, v)| v * x[b][(r, c)]).sum()
}

#[derive(Debug, Clone)]
pub struct StandardSdp {
    pub block_sizes: Vec<usize>,
    pub objective: Vec<Entry>,
    pub constraints: Vec<Constraint>,
    /// Trace of the direct sum.
    pub trace: f64,
    pub max_trace: f64,
    /// Diagonal of `P` per block.
    pub scalings: Vec<Vec<f64>>,
    pub objective_offset: f64,
    /// Representative `(block, row, col)` of each moment key.
    pub representatives: Vec<(usize, usize, usize)>,
    /// Group of each block.
    pub block_groups: Vec<usize>,
}

impl StandardSdp {
    pub fn num_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn max_block_size(&self) -> usize {
        self.block_sizes.iter().copied().max().unwrap_or(0)
    }

    /// ζ: rows excluding the per-clique trace rows.
    pub fn zeta(&self) -> usize {
        self.constraints
            .iter()
            .filter(|c| c.family != RowFamily::CliqueTrace)
            .count()
    }

    pub fn rhs(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.rhs).collect()
    }

    pub fn objective_value(&self, x: &[DMatrix<f64>]) -> f64 {
        eval_functional(&self.objective, x) + self.objective_offset
    }

    /// `A(X) - b` per row.
    pub fn residuals(&self, x: &[DMatrix<f64>]) -> Vec<f64> {
        self.constraints.iter().map(|c| c.eval(x) - c.rhs).collect()
    }

    pub fn stats(&self) -> SdpStats {
        SdpStats {
            omega: self.num_blocks(),
            smax: self.max_block_size(),
            zeta: self.zeta(),
            amax: self.max_trace,
        }
    }

    /// `X = P D(y) P` block by block.
    pub fn lift(&self, relax: &Relaxation, y: &[f64]) -> Vec<DMatrix<f64>> {
        relax
            .blocks
            .iter()
            .zip(&self.scalings)
            .map(|(b, p)| {
                let mut m = b.eval(y);
                for r in 0..m.nrows() {
                    for c in 0..m.ncols() {
                        m[(r, c)] *= p[r] * p[c];
                    }
                }
                m
            })
            .collect()
    }

    fn rep_scale(&self, key: MomentKey) -> f64 {
        let (b, r, c) = self.representatives[key];
        self.scalings[b][r] * self.scalings[b][c]
    }
}

/// `y_key = X[rep] / (P_r P_c)`.
pub fn recover_moments(x: &[DMatrix<f64>], sdp: &StandardSdp) -> Vec<f64> {
    sdp.representatives
        .iter()
        .enumerate()
        .map(|(key, &(b, r, c))| x[b][(r, c)] / sdp.rep_scale(key))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SdpStats {
    pub omega: usize,
    pub smax: usize,
    pub zeta: usize,
    pub amax: f64,
}

/// First moment-block entry realizing each key.
fn representatives(relax: &Relaxation) -> Result<Vec<(usize, usize, usize)>> {
    let mut reps: Vec<Option<(usize, usize, usize)>> = vec![None; relax.keys.len()];
    for (bi, b) in relax.blocks.iter().enumerate() {
        if b.kind != BlockKind::Moment {
            continue;
        }
        for ((r, c), form) in upper_pairs(b.size()).zip(&b.entries) {
            let key = form
                .as_single_key()
                .expect("moment entries are single keys");
            reps[key].get_or_insert((bi, r, c));
        }
    }
    reps.into_iter()
        .enumerate()
        .map(|(key, r)| {
            r.ok_or_else(|| {
                Error::InvalidInput(format!(
                    "moment key {} is not realized in any moment block",
                    relax.keys.words()[key]
                ))
            })
        })
        .collect()
}

/// Builds the standard SDP from a relaxation and a matching certificate.
pub fn assemble(relax: &Relaxation, cert: &CtpCertificate) -> Result<StandardSdp> {
    let scalings = cert.scalings(relax)?;
    let reps = representatives(relax)?;
    let scale = |key: MomentKey| {
        let (b, r, c) = reps[key];
        scalings[b][r] * scalings[b][c]
    };
    let through_reps = |form: &crate::relaxation::LinearForm, sign: f64, out: &mut Vec<Entry>| {
        for &(key, v) in form.terms() {
            let (b, r, c) = reps[key];
            out.push((b, r, c, sign * v / scale(key)));
        }
    };

    let mut constraints = Vec::new();
    let one = relax.one_key();
    let (b1, r1, c1) = reps[one];
    constraints.push(Constraint {
        family: RowFamily::Pin,
        entries: vec![(b1, r1, c1, 1.0)],
        rhs: scale(one),
    });
    for (bi, b) in relax.blocks.iter().enumerate() {
        if b.kind != BlockKind::Moment {
            continue;
        }
        let p = &scalings[bi];
        for ((r, c), form) in upper_pairs(b.size()).zip(&b.entries) {
            let key = form.as_single_key().expect("moment entries are single keys");
            if reps[key] == (bi, r, c) {
                continue;
            }
            let (rb, rr, rc) = reps[key];
            constraints.push(Constraint {
                family: RowFamily::Structure,
                entries: vec![(bi, r, c, 1.0 / (p[r] * p[c])), (rb, rr, rc, -1.0 / scale(key))],
                rhs: 0.0,
            });
        }
    }
    for (bi, b) in relax.blocks.iter().enumerate() {
        if b.kind == BlockKind::Moment {
            continue;
        }
        let p = &scalings[bi];
        for ((r, c), form) in upper_pairs(b.size()).zip(&b.entries) {
            let mut entries = vec![(bi, r, c, 1.0 / (p[r] * p[c]))];
            through_reps(form, -1.0, &mut entries);
            constraints.push(Constraint {
                family: RowFamily::Localizing,
                entries,
                rhs: 0.0,
            });
        }
    }
    for form in relax.equality_forms() {
        let mut entries = Vec::new();
        through_reps(form, 1.0, &mut entries);
        constraints.push(Constraint {
            family: RowFamily::Equality,
            entries,
            rhs: 0.0,
        });
    }
    let block_groups: Vec<usize> = relax.blocks.iter().map(|b| b.group).collect();
    if relax.groups.len() > 1 {
        for (gi, gc) in cert.groups.iter().enumerate().skip(1) {
            let mut entries = Vec::new();
            for (bi, b) in relax.blocks_of_group(gi) {
                entries.extend((0..b.size()).map(|r| (bi, r, r, 1.0)));
            }
            constraints.push(Constraint {
                family: RowFamily::CliqueTrace,
                entries,
                rhs: gc.trace,
            });
        }
    }

    let mut objective = Vec::new();
    through_reps(&relax.objective, 1.0, &mut objective);

    Ok(StandardSdp {
        block_sizes: relax.blocks.iter().map(|b| b.size()).collect(),
        objective,
        constraints,
        trace: cert.trace(),
        max_trace: cert.max_trace(),
        scalings,
        objective_offset: 0.0,
        representatives: reps,
        block_groups,
    })
}

/// `(ω, s^max, ζ, a^max)` straight from the relaxation.
pub fn count_stats(relax: &Relaxation, cert: &CtpCertificate) -> SdpStats {
    let mut moment_entries = 0usize;
    let mut seen = vec![false; relax.keys.len()];
    let mut distinct = 0usize;
    let mut localizing_entries = 0usize;
    for b in &relax.blocks {
        match b.kind {
            BlockKind::Moment => {
                moment_entries += b.entries.len();
                for form in &b.entries {
                    let key = form.as_single_key().expect("moment entries are single keys");
                    if !seen[key] {
                        seen[key] = true;
                        distinct += 1;
                    }
                }
            }
            BlockKind::Localizing { .. } => localizing_entries += b.entries.len(),
        }
    }
    let equality_entries: usize = relax.equalities.iter().map(|e| e.entries.len()).sum();
    SdpStats {
        omega: relax.num_blocks(),
        smax: relax.max_block_size(),
        zeta: moment_entries - distinct + localizing_entries + equality_entries + 1,
        amax: cert.max_trace(),
    }
}

/// Text export: a header, then `constraint block row col value` per nonzero
/// (1-based block/row/col, constraint 0 = objective), values at 17 significant digits.
pub fn to_text(sdp: &StandardSdp) -> String {
    let mut s = String::new();
    let sizes: Vec<String> = sdp.block_sizes.iter().map(|b| b.to_string()).collect();
    writeln!(s, "omega {}", sdp.num_blocks()).unwrap();
    writeln!(s, "blocks {}", sizes.join(" ")).unwrap();
    writeln!(s, "zeta {}", sdp.zeta()).unwrap();
    writeln!(s, "rows {}", sdp.constraints.len()).unwrap();
    writeln!(s, "trace {:.16e}", sdp.trace).unwrap();
    let rhs: Vec<String> = sdp.constraints.iter().map(|c| format!("{:.16e}", c.rhs)).collect();
    writeln!(s, "rhs {}", rhs.join(" ")).unwrap();
    for &(b, r, c, v) in &sdp.objective {
        writeln!(s, "0 {} {} {} {:.16e}", b + 1, r + 1, c + 1, v).unwrap();
    }
    for (i, con) in sdp.constraints.iter().enumerate() {
        for &(b, r, c, v) in &con.entries {
            writeln!(s, "{} {} {} {} {:.16e}", i + 1, b + 1, r + 1, c + 1, v).unwrap();
        }
    }
    s
}

/// Data read back from [`to_text`].
#[derive(Debug, Clone, PartialEq)]
pub struct TextSdp {
    pub block_sizes: Vec<usize>,
    pub zeta: usize,
    pub trace: f64,
    pub rhs: Vec<f64>,
    pub objective: Vec<Entry>,
    pub rows: Vec<Vec<Entry>>,
}

pub fn from_text(reader: impl BufRead) -> Result<TextSdp> {
    let bad = |m: &str| Error::InvalidInput(format!("SDP text: {m}"));
    let mut out = TextSdp {
        block_sizes: Vec::new(),
        zeta: 0,
        trace: 0.0,
        rhs: Vec::new(),
        objective: Vec::new(),
        rows: Vec::new(),
    };
    let num = |t: &str| t.parse::<f64>().map_err(|_| bad("bad number"));
    let int = |t: &str| t.parse::<usize>().map_err(|_| bad("bad integer"));
    for line in reader.lines() {
        let line = line?;
        let mut it = line.split_whitespace();
        let Some(head) = it.next() else { continue };
        let rest: Vec<&str> = it.collect();
        match head {
            "omega" => {}
            "blocks" => out.block_sizes = rest.iter().map(|t| int(t)).collect::<Result<_>>()?,
            "zeta" => out.zeta = int(rest.first().ok_or_else(|| bad("zeta"))?)?,
            "rows" => out.rows = vec![Vec::new(); int(rest.first().ok_or_else(|| bad("rows"))?)?],
            "trace" => out.trace = num(rest.first().ok_or_else(|| bad("trace"))?)?,
            "rhs" => out.rhs = rest.iter().map(|t| num(t)).collect::<Result<_>>()?,
            _ => {
                if rest.len() != 4 {
                    return Err(bad("entry needs five fields"));
                }
                let i = int(head)?;
                let e = (int(rest[0])? - 1, int(rest[1])? - 1, int(rest[2])? - 1, num(rest[3])?);
                if i == 0 {
                    out.objective.push(e);
                } else {
                    out.rows.get_mut(i - 1).ok_or_else(|| bad("row out of range"))?.push(e);
                }
            }
        }
    }
    Ok(out)
}
