//! End-to-end runs shared by the command-line tool and the C interface:
//! build, certify, assemble, solve, and report rows.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::cgal::{self, CgalConfig, CgalStatus, SolveReport};
use crate::ctp::{self, CertifyOptions, CtpCertificate, Provenance};
use crate::error::{Error, Result};
use crate::free_algebra::SymmetryMode;
use crate::generator::{generate, GenKind, GenSpec};
use crate::relaxation::{self, Problem, Relaxation};
use crate::sparsity;
use crate::standard_form::{self, SdpStats, StandardSdp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Eig,
    Trace,
}

impl Mode {
    pub fn symmetry(self) -> SymmetryMode {
        match self {
            Mode::Eig => SymmetryMode::StarOnly,
            Mode::Trace => SymmetryMode::StarCyclic,
        }
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eig" => Ok(Mode::Eig),
            "trace" => Ok(Mode::Trace),
            _ => Err(Error::InvalidInput(format!("mode must be eig or trace, got {s}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Eig => "eig",
            Mode::Trace => "trace",
        })
    }
}

/// How to treat clique information.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sparsity {
    /// Use the instance's cliques if it has any.
    #[default]
    AsGiven,
    /// Use the instance's cliques, or detect them from the csp graph.
    Detect,
    /// Ignore cliques.
    Dense,
}

pub fn apply_sparsity(p: &Problem, s: Sparsity) -> Result<Problem> {
    match s {
        Sparsity::AsGiven => Ok(p.clone()),
        Sparsity::Dense => {
            let mut q = p.clone();
            q.cliques = None;
            Ok(q)
        }
        Sparsity::Detect if p.cliques.is_some() => Ok(p.clone()),
        Sparsity::Detect => {
            let d = sparsity::detect(p)?;
            p.clone().with_cliques(d.cliques)
        }
    }
}

pub const REPORT_COLUMNS: [&str; 12] = [
    "n", "l", "k", "omega", "smax", "zeta", "amax", "val", "time", "resid", "mode", "sparse",
];

/// One report line. `val` and `resid` are empty for count-only runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub n: usize,
    pub l: usize,
    pub k: usize,
    pub omega: usize,
    pub smax: usize,
    pub zeta: usize,
    pub amax: f64,
    pub val: Option<f64>,
    pub time: f64,
    pub resid: Option<f64>,
    pub mode: Mode,
    pub sparse: bool,
}

pub fn write_csv<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Relaxation plus certificate.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub problem: Problem,
    pub relax: Relaxation,
    pub cert: CtpCertificate,
    pub k: usize,
    pub mode: Mode,
}

impl Prepared {
    pub fn stats(&self) -> SdpStats {
        standard_form::count_stats(&self.relax, &self.cert)
    }

    pub fn row(&self, val: Option<f64>, resid: Option<f64>, time: f64) -> ReportRow {
        let s = self.stats();
        ReportRow {
            n: self.problem.n,
            l: self.problem.equalities.len(),
            k: self.k,
            omega: s.omega,
            smax: s.smax,
            zeta: s.zeta,
            amax: s.amax,
            val,
            time,
            resid,
            mode: self.mode,
            sparse: self.relax.is_sparse(),
        }
    }

    pub fn assemble(&self) -> Result<StandardSdp> {
        standard_form::assemble(&self.relax, &self.cert)
    }
}

pub fn prepare(p: &Problem, k: usize, mode: Mode, opts: &CertifyOptions) -> Result<Prepared> {
    let relax = relaxation::build(p, k, mode.symmetry())?;
    let cert = ctp::certify(p, &relax, opts)?;
    Ok(Prepared {
        problem: p.clone(),
        relax,
        cert,
        k,
        mode,
    })
}

/// Certificate summary as printed by the `ctp` command.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateSummary {
    pub order: usize,
    pub mode: Mode,
    pub trace: f64,
    pub max_trace: f64,
    pub groups: Vec<GroupSummary>,
    /// Symbolic residual of the certificate identity.
    pub residual: f64,
    /// Sampled trace deviation on the affine moment set, when computed.
    pub sampled_residual: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupSummary {
    /// 1-based letters.
    pub letters: Vec<usize>,
    pub provenance: Provenance,
    pub trace: f64,
    /// Diagonal scaling `P` per psd block.
    pub scalings: Vec<Vec<f64>>,
}

pub fn summarize_certificate(prep: &Prepared, seed: u64) -> Result<CertificateSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let report = ctp::verify(&prep.cert, &prep.problem, &prep.relax, &mut rng)?;
    let groups = prep
        .cert
        .groups
        .iter()
        .zip(&prep.relax.groups)
        .map(|(gc, g)| GroupSummary {
            letters: g.letters.iter().map(|&l| l as usize + 1).collect(),
            provenance: gc.provenance,
            trace: gc.trace,
            scalings: gc
                .weights
                .iter()
                .map(|w| w.iter().map(|v| v.sqrt()).collect())
                .collect(),
        })
        .collect();
    Ok(CertificateSummary {
        order: prep.k,
        mode: prep.mode,
        trace: prep.cert.trace(),
        max_trace: prep.cert.max_trace(),
        groups,
        residual: report.symbolic,
        sampled_residual: report.sampled,
    })
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub row: ReportRow,
    pub report: SolveReport,
    pub x: Vec<DMatrix<f64>>,
    pub sdp: StandardSdp,
}

impl SolveOutcome {
    pub fn converged(&self) -> bool {
        self.report.status == CgalStatus::Converged
    }
}

/// Build, certify, assemble and solve. `time` in the row covers all stages.
pub fn solve(
    p: &Problem,
    k: usize,
    mode: Mode,
    cfg: &CgalConfig,
    opts: &CertifyOptions,
) -> Result<SolveOutcome> {
    let start = Instant::now();
    let prep = prepare(p, k, mode, opts)?;
    let sdp = prep.assemble()?;
    let (x, report) = cgal::solve(&sdp, cfg)?;
    let row = prep.row(
        Some(report.objective),
        Some(report.residual),
        start.elapsed().as_secs_f64(),
    );
    Ok(SolveOutcome { row, report, x, sdp })
}

/// A benchmark configuration with its reference structure counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub spec: GenSpec,
    pub k: usize,
    pub expected_smax: usize,
    pub expected_zeta: usize,
}

/// Configurations of benchmark table 1 (ball), 2 (polydisc) or 3 (sparse chains).
pub fn bench_configs(table: u8, seed: u64) -> Result<Vec<BenchConfig>> {
    let dense = |kind, n, k, smax, zeta| BenchConfig {
        spec: GenSpec { n, l: None, kind, u: None, seed },
        k,
        expected_smax: smax,
        expected_zeta: zeta,
    };
    let sparse = |u, k, smax, zeta| BenchConfig {
        spec: GenSpec { n: 1000, l: Some(143), kind: GenKind::Sparse, u: Some(u), seed },
        k,
        expected_smax: smax,
        expected_zeta: zeta,
    };
    use GenKind::{Ball, Polydisc};
    Ok(match table {
        1 => vec![
            dense(Ball, 10, 1, 11, 5),
            dense(Ball, 10, 2, 111, 815),
            dense(Ball, 20, 1, 21, 7),
            dense(Ball, 20, 2, 421, 5587),
            dense(Ball, 30, 1, 31, 10),
            dense(Ball, 30, 2, 931, 18415),
        ],
        2 => vec![
            dense(Polydisc, 10, 1, 11, 13),
            dense(Polydisc, 10, 2, 111, 1343),
            dense(Polydisc, 20, 1, 21, 24),
            dense(Polydisc, 20, 2, 421, 9514),
            dense(Polydisc, 30, 1, 31, 36),
            dense(Polydisc, 30, 2, 931, 31311),
        ],
        3 => vec![
            sparse(10, 1, 12, 541),
            sparse(10, 2, 133, 91850),
            sparse(15, 1, 27, 405),
            sparse(15, 2, 703, 185592),
            sparse(20, 1, 22, 341),
            sparse(20, 2, 463, 290908),
        ],
        t => return Err(Error::InvalidInput(format!("no benchmark table {t}; use 1, 2 or 3"))),
    })
}

#[derive(Debug, Clone)]
pub struct BenchResult {
    pub config: BenchConfig,
    pub row: ReportRow,
    pub structure_matches: bool,
    pub converged: Option<bool>,
}

/// Runs one configuration: counts always, solves when `cfg` is given.
pub fn run_bench(config: &BenchConfig, cfg: Option<&CgalConfig>, opts: &CertifyOptions) -> Result<BenchResult> {
    let g = generate(&config.spec)?;
    let start = Instant::now();
    let (row, converged) = match cfg {
        Some(cfg) => {
            let out = solve(&g.problem, config.k, Mode::Eig, cfg, opts)?;
            let c = out.converged();
            (out.row, Some(c))
        }
        None => {
            let prep = prepare(&g.problem, config.k, Mode::Eig, opts)?;
            (prep.row(None, None, start.elapsed().as_secs_f64()), None)
        }
    };
    let structure_matches = row.smax == config.expected_smax && row.zeta == config.expected_zeta;
    Ok(BenchResult {
        config: *config,
        row,
        structure_matches,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctp::ball_polynomial;
    use crate::free_algebra::{NcPolynomial, Word};

    #[test]
    fn csv_header_and_empty_fields() {
        let p = Problem::new(
            2,
            NcPolynomial::from_terms(2, [(Word::letter(0), 1.0), (Word::letter(1), 1.0)]),
            vec![ball_polynomial(2, &[0, 1])],
            vec![],
        )
        .unwrap();
        let prep = prepare(&p, 1, Mode::Eig, &CertifyOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_csv(&[prep.row(None, None, 0.5)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), REPORT_COLUMNS.join(","));
        assert_eq!(lines.next().unwrap(), "2,0,1,2,3,2,2.0,,0.5,,eig,false");
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("trace".parse::<Mode>().unwrap(), Mode::Trace);
        assert!("both".parse::<Mode>().is_err());
    }
}
