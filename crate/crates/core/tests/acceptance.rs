//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ncpop_ctp::cgal::{self, CgalConfig};
use ncpop_ctp::ctp::{self, ball_coeffs, ball_polynomial, disc_polynomial, CertifyOptions};
use ncpop_ctp::eig::{min_eigpair, min_eigpair_dense};
use ncpop_ctp::free_algebra::{basis_over, word_count, Letter, NcPolynomial, Word, DEFAULT_INDEX_LIMIT};
use ncpop_ctp::generator::{gen_dense, gen_sparse, GenKind, GenSpec};
use ncpop_ctp::lp::{duality_check, solve_lp, LpStatus};
use ncpop_ctp::pipeline::{self, Mode, Prepared};
use ncpop_ctp::relaxation::{self, moment_vector, BlockKind, Problem};
use ncpop_ctp::sampling::{random_unit_vector, sampled_upper_bounds, signature_tuple};
use ncpop_ctp::SymmetryMode;

const EXACT: f64 = 1e-10;
const CERT_TOL: f64 = 1e-8;
const MONITOR_TOL: f64 = 1e-9;
const EIG_REL_TOL: f64 = 1e-6;
const SOLVE_EPS: f64 = 1e-4;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration, what: &str) -> std::result::Result<(), String> {
    let t = start.elapsed();
    check(t < limit, || format!("{what} took {t:.1?}, limit {limit:?}"))
}

fn count(spec: GenSpec, k: usize) -> std::result::Result<Prepared, String> {
    let g = match spec.kind {
        GenKind::Sparse => gen_sparse(&spec),
        _ => gen_dense(&spec),
    }
    .map_err(|e| e.to_string())?;
    pipeline::prepare(&g.problem, k, Mode::Eig, &CertifyOptions::default()).map_err(|e| e.to_string())
}

fn dense(kind: GenKind, n: usize, l: usize) -> GenSpec {
    GenSpec { n, l: Some(l), kind, u: None, seed: 1 }
}

fn ball_table_structure() -> Outcome {
    let quick = [(10, 3, 1, 11, 5), (10, 3, 2, 111, 815), (20, 5, 1, 21, 7), (30, 8, 1, 31, 10)];
    let slow = [(20, 5, 2, 421, 5587), (30, 8, 2, 931, 18415)];
    for (rows, limit) in [(&quick[..], 10), (&slow[..], 60)] {
        for &(n, l, k, smax, zeta) in rows {
            let start = Instant::now();
            let s = count(dense(GenKind::Ball, n, l), k)?.stats();
            within(start, Duration::from_secs(limit), &format!("n={n} k={k}"))?;
            check(s.smax == smax && s.zeta == zeta, || {
                format!("n={n} k={k}: smax {} zeta {}, expected {smax} {zeta}", s.smax, s.zeta)
            })?;
            check((s.amax - (1 + k) as f64).abs() <= EXACT, || format!("n={n} k={k}: amax {}", s.amax))?;
        }
    }
    Ok("smax 11/111/21/31/421/931, zeta 5/815/7/10/5587/18415, amax = 1+k".into())
}

fn polydisc_table_structure() -> Outcome {
    for (n, l, k, zeta) in [(10, 2, 1, 13), (10, 2, 2, 1343), (20, 3, 1, 24), (30, 5, 1, 36)] {
        let s = count(dense(GenKind::Polydisc, n, l), k)?.stats();
        check(s.omega == n + 1 && s.zeta == zeta, || {
            format!("n={n} k={k}: omega {} zeta {}, expected {} {zeta}", s.omega, s.zeta, n + 1)
        })?;
    }
    Ok("omega = n+1, zeta 13/1343/24/36 (n=30 with l=5)".into())
}

fn sparse_table_structure() -> Outcome {
    let spec = GenSpec { n: 1000, l: Some(143), kind: GenKind::Sparse, u: Some(10), seed: 1 };
    let start = Instant::now();
    let s1 = count(spec, 1)?.stats();
    check((s1.omega, s1.smax, s1.zeta) == (200, 12, 541), || {
        format!("k=1: omega {} smax {} zeta {}", s1.omega, s1.smax, s1.zeta)
    })?;
    let s2 = count(spec, 2)?.stats();
    within(start, Duration::from_secs(60), "sparse counts")?;
    check(s2.smax == 133, || format!("k=2: smax {}", s2.smax))?;
    Ok(format!("k=1 (200, 12, 541), k=2 smax 133 zeta {}, {:.1?}", s2.zeta, start.elapsed()))
}

fn words(n: usize, d: usize) -> Vec<Word> {
    let letters: Vec<Letter> = (0..n as Letter).collect();
    basis_over(&letters, d, DEFAULT_INDEX_LIMIT).unwrap().words().to_vec()
}

/// `Σ_u c_u u*(Σ_j X_j² - 1)u` over `u ∈ W_d` in integers.
fn ball_terms(n: usize, d: usize, c: impl Fn(&Word) -> i64) -> NcPolynomial<i64> {
    let mut p = NcPolynomial::<i64>::zero(n);
    for u in words(n, d) {
        let cu = c(&u);
        p.add_term(Word::sandwich(&u, &Word::one(), &u), -cu);
        for j in 0..n as Letter {
            p.add_term(Word::sandwich(&u, &Word::from_letters(&[j, j]), &u), cu);
        }
    }
    p
}

fn symbolic_identities() -> Outcome {
    let start = Instant::now();
    let mut checked = 0;
    for n in 1..=3 {
        for k in 1..=3usize {
            // Σ_{|w|=k} w*w = 1 + Σ_{u∈W_{k-1}} u*(ΣX² - 1)u
            let mut single = NcPolynomial::<i64>::constant(n, 1);
            single = &single + &ball_terms(n, k - 1, |_| 1);
            for w in words(n, k).into_iter().filter(|w| w.degree() == k) {
                single.add_term(Word::sandwich(&w, &Word::one(), &w), -1);
            }
            check(single.is_zero(), || format!("single-degree identity n={n} k={k}"))?;

            // Σ_{w∈W_k} w*w = 1 + k + Σ_u d_u u*(ΣX² - 1)u
            let coeffs = ball_coeffs(n, k).map_err(|e| e.to_string())?;
            let mut full = NcPolynomial::<i64>::constant(n, 1 + k as i64);
            full = &full + &ball_terms(n, k - 1, |u| {
                let d = coeffs.get(u).unwrap();
                assert_eq!(d.fract(), 0.0);
                d as i64
            });
            for w in words(n, k) {
                full.add_term(Word::sandwich(&w, &Word::one(), &w), -1);
            }
            check(full.is_zero(), || format!("cumulative identity n={n} k={k}"))?;
            checked += 2;
        }
    }
    within(start, Duration::from_secs(5), "identities")?;
    Ok(format!("{checked} integer expansions vanish, {:.1?}", start.elapsed()))
}

fn polydisc_equality_trace() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut samples = 0;
    for n in 1..=3 {
        let letters: Vec<Letter> = (0..n as Letter).collect();
        let eq: Vec<NcPolynomial> = letters
            .iter()
            .map(|&l| NcPolynomial::from_terms(n, [(Word::from_letters(&[l, l]), 1.0), (Word::one(), -1.0)]))
            .collect();
        let f = NcPolynomial::from_terms(n, letters.iter().map(|&l| (Word::letter(l), 1.0)));
        let p = Problem::new(n, f, vec![], eq).map_err(|e| e.to_string())?;
        for k in 1..=2 {
            let sk = word_count(n, k).unwrap() as f64;
            for mode in [SymmetryMode::StarOnly, SymmetryMode::StarCyclic] {
                let relax = relaxation::build(&p, k, mode).map_err(|e| e.to_string())?;
                let cert = ctp::closed_form(&p, &relax).map_err(|e| e.to_string())?;
                check((cert.trace() - sk).abs() <= EXACT, || format!("certificate trace {} != {sk}", cert.trace()))?;
                let moment = relax.blocks.iter().find(|b| b.kind == BlockKind::Moment).unwrap();
                for _ in 0..100 {
                    let order = rng.random_range(1..=4);
                    let mats = signature_tuple(n, order, &mut rng);
                    let state = random_unit_vector(order, &mut rng);
                    let state = (mode == SymmetryMode::StarOnly).then_some(&state);
                    let y = moment_vector(&relax.keys, &mats, state).map_err(|e| e.to_string())?;
                    worst = worst.max((moment.eval(&y).trace() - sk).abs());
                    samples += 1;
                }
            }
        }
    }
    check(worst <= EXACT, || format!("max |tr M_k(y) - s(k)| = {worst:.3e}"))?;
    Ok(format!("{samples} moment vectors, max deviation {worst:.1e}"))
}

fn sum_on_ball(n: usize) -> Problem {
    let letters: Vec<Letter> = (0..n as Letter).collect();
    let f = NcPolynomial::from_terms(n, letters.iter().map(|&l| (Word::letter(l), 1.0)));
    Problem::new(n, f, vec![ball_polynomial(n, &letters)], vec![]).unwrap()
}

fn solve_value(p: &Problem, k: usize, mode: Mode, cfg: &CgalConfig) -> std::result::Result<f64, String> {
    pipeline::solve(p, k, mode, cfg, &CertifyOptions::default())
        .map(|o| o.report.objective)
        .map_err(|e| e.to_string())
}

fn linear_objective_on_ball() -> Outcome {
    let cfg = CgalConfig { eps: SOLVE_EPS, ..CgalConfig::default() };
    let mut vals = Vec::new();
    for n in [2usize, 5, 10] {
        let start = Instant::now();
        let tau = solve_value(&sum_on_ball(n), 1, Mode::Eig, &cfg)?;
        within(start, Duration::from_secs(30), &format!("n={n}"))?;
        let target = -(n as f64).sqrt();
        check((tau - target).abs() <= 5e-3 * (n as f64).sqrt(), || format!("n={n}: τ = {tau}, expected {target}"))?;
        vals.push(format!("n={n} τ={tau:.5}"));
    }
    Ok(vals.join(", "))
}

fn product_on_ball() -> Outcome {
    let f = NcPolynomial::from_terms(2, [(Word::from_letters(&[0, 1]), 1.0), (Word::from_letters(&[1, 0]), 1.0)]);
    let p = Problem::new(2, f, vec![ball_polynomial(2, &[0, 1])], vec![]).unwrap();
    let cfg = CgalConfig { eps: SOLVE_EPS, ..CgalConfig::default() };
    let start = Instant::now();
    let eig = solve_value(&p, 1, Mode::Eig, &cfg)?;
    let tr = solve_value(&p, 1, Mode::Trace, &cfg)?;
    within(start, Duration::from_secs(30), "both solves")?;
    for (name, v) in [("eigenvalue", eig), ("trace", tr)] {
        check((-1.01..=-0.99).contains(&v), || format!("{name} value {v} outside [-1.01, -0.99]"))?;
    }
    Ok(format!("eigenvalue {eig:.5}, trace {tr:.5}"))
}

fn certificate_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_cert: f64 = 0.0;
    let mut worst_drift: f64 = 0.0;
    let mut worst_eig: f64 = f64::INFINITY;
    for i in 0..50usize {
        let n = 3 + i % 8;
        let kind = [GenKind::Ball, GenKind::Polydisc, GenKind::Sparse][i % 3];
        let spec = GenSpec {
            n,
            l: Some(i % 3),
            kind,
            u: (kind == GenKind::Sparse).then_some((2 + i % 3).min(n)),
            seed: 100 + i as u64,
        };
        let g = if kind == GenKind::Sparse { gen_sparse(&spec) } else { gen_dense(&spec) }.map_err(|e| e.to_string())?;
        let k = if n <= 6 { 1 + (i / 3) % 2 } else { 1 };
        let mode = if (i / 2) % 2 == 0 { Mode::Eig } else { Mode::Trace };
        let prep = pipeline::prepare(&g.problem, k, mode, &CertifyOptions::default()).map_err(|e| format!("instance {i}: {e}"))?;
        let rep = ctp::verify(&prep.cert, &prep.problem, &prep.relax, &mut rng).map_err(|e| e.to_string())?;
        worst_cert = worst_cert.max(rep.residual());

        let sdp = prep.assemble().map_err(|e| e.to_string())?;
        let cfg = CgalConfig { max_iters: 300, monitor_every: 1, ..CgalConfig::default() };
        let (_, report) = cgal::solve(&sdp, &cfg).map_err(|e| e.to_string())?;
        worst_drift = worst_drift.max(report.trace_drift);
        worst_eig = worst_eig.min(report.min_eig);
    }
    check(worst_cert <= CERT_TOL, || format!("certificate residual {worst_cert:.3e}"))?;
    check(worst_drift <= MONITOR_TOL, || format!("relative trace drift {worst_drift:.3e}"))?;
    check(worst_eig >= -MONITOR_TOL, || format!("relative min eigenvalue {worst_eig:.3e}"))?;
    Ok(format!(
        "50 instances: residual {worst_cert:.1e}, trace drift {worst_drift:.1e}, min eig {worst_eig:.1e}"
    ))
}

fn hierarchy_and_sandwich() -> Outcome {
    let start = Instant::now();
    let cfg = CgalConfig { eps: SOLVE_EPS, ..CgalConfig::default() };
    let mut worst_order: f64 = f64::NEG_INFINITY;
    let mut worst_upper: f64 = f64::NEG_INFINITY;
    for i in 0..20u64 {
        let n = 2 + (i as usize % 5);
        let g = gen_dense(&GenSpec { n, l: Some(i as usize % 2), kind: GenKind::Ball, u: None, seed: 200 + i })
            .map_err(|e| e.to_string())?;
        let t1 = solve_value(&g.problem, 1, Mode::Eig, &cfg)?;
        let t2 = solve_value(&g.problem, 2, Mode::Eig, &cfg)?;
        let mut rng = ChaCha8Rng::seed_from_u64(i);
        let ub = sampled_upper_bounds(&g.problem, &g.anchor, 100, 6, &mut rng).map_err(|e| e.to_string())?;
        let slack = 2.0 * SOLVE_EPS * (1.0 + t2.abs());
        check(t1 <= t2 + slack, || format!("instance {i}: τ1 {t1} > τ2 {t2} + {slack:.1e}"))?;
        for t in [t1, t2] {
            check(t <= ub.eigenvalue + 2.0 * SOLVE_EPS, || format!("instance {i}: τ {t} above sampled bound {}", ub.eigenvalue))?;
        }
        worst_order = worst_order.max(t1 - t2);
        worst_upper = worst_upper.max(t2 - ub.eigenvalue);
    }
    within(start, Duration::from_secs(600), "20 instances")?;
    Ok(format!(
        "max τ1-τ2 {worst_order:.1e}, max τ2-upper {worst_upper:.3}, {:.1?}",
        start.elapsed()
    ))
}

fn sparse_below_dense() -> Outcome {
    let cfg = CgalConfig { eps: SOLVE_EPS, ..CgalConfig::default() };
    let shapes = [(9, 3), (8, 4), (6, 3), (7, 3), (9, 4)];
    let mut worst: f64 = f64::NEG_INFINITY;
    for i in 0..10u64 {
        let (n, u) = shapes[i as usize % shapes.len()];
        let g = gen_sparse(&GenSpec { n, l: Some(1 + i as usize % 2), kind: GenKind::Sparse, u: Some(u), seed: 300 + i })
            .map_err(|e| e.to_string())?;
        let cliques = g.problem.cliques.as_ref().unwrap().len();
        check((2..=3).contains(&cliques), || format!("instance {i}: {cliques} cliques"))?;
        let mut whole = g.problem.clone();
        whole.cliques = None;
        let cs = solve_value(&g.problem, 1, Mode::Eig, &cfg)?;
        let dn = solve_value(&whole, 1, Mode::Eig, &cfg)?;
        check(cs <= dn + 2.0 * SOLVE_EPS * (1.0 + dn.abs()), || format!("instance {i}: sparse {cs} > dense {dn}"))?;
        worst = worst.max(cs - dn);
    }
    Ok(format!("10 instances, max τ_cs - τ {worst:.1e}"))
}

fn oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_eig: f64 = 0.0;
    for size in [20usize, 65, 150, 300, 500] {
        let g = DMatrix::from_fn(size, size, |_, _| rng.random_range(-1.0..1.0));
        let m = (&g + g.transpose()) * 0.5;
        let (dense, _) = min_eigpair_dense(&m);
        let (lam, v) = min_eigpair(&m, 1e-10, None, &mut rng).map_err(|e| e.to_string())?;
        let rel = (lam - dense).abs() / dense.abs().max(1.0);
        let resid = (&m * &v - &v * lam).norm() / v.norm();
        check(rel <= EIG_REL_TOL, || format!("size {size}: {lam} vs dense {dense}"))?;
        check(resid <= 1e-6 * m.norm(), || format!("size {size}: eigenvector residual {resid:.2e}"))?;
        worst_eig = worst_eig.max(rel);
    }

    let mut lp_checked = 0;
    let ball3 = sum_on_ball(3);
    let discs = {
        let n = 3;
        let f = NcPolynomial::from_terms(n, [(Word::from_letters(&[0, 1]), 1.0), (Word::from_letters(&[1, 0]), 1.0)]);
        let g = (0..n as Letter).map(|l| disc_polynomial(n, l, 1.0 / n as f64)).collect();
        Problem::new(n, f, g, vec![]).unwrap()
    };
    for (p, k) in [(&ball3, 1), (&ball3, 2), (&discs, 1), (&discs, 2)] {
        let relax = relaxation::build(p, k, SymmetryMode::StarOnly).map_err(|e| e.to_string())?;
        let lp = ctp::build_ctp_lp(&relax).map_err(|e| e.to_string())?;
        let res = solve_lp(&lp.lp);
        check(res.status == LpStatus::Optimal, || format!("CTP LP k={k}: {:?}", res.status))?;
        let d = duality_check(&lp.lp, &res.x, res.duals.as_ref().unwrap());
        check(
            d.dual_infeasibility <= CERT_TOL && d.complementarity <= CERT_TOL && d.gap.abs() <= CERT_TOL,
            || format!("duality check k={k}: {d:?}"),
        )?;
        lp_checked += 1;
    }

    let mut coeffs_checked = 0;
    for n in 1..=3 {
        for k in 1..=4usize {
            let c = ball_coeffs(n, k).map_err(|e| e.to_string())?;
            for u in words(n, k - 1) {
                let oracle = (1..=k).filter(|&r| u.degree() < r).count() as f64;
                check(c.get(&u) == Some(oracle), || format!("d_u for {u} (n={n}, k={k})"))?;
                coeffs_checked += 1;
            }
        }
    }
    Ok(format!(
        "eigen rel err {worst_eig:.1e} (sizes ≤ 500), {lp_checked} LP duality checks, {coeffs_checked} ball coefficients"
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("ball table structure", ball_table_structure),
        ("polydisc table structure", polydisc_table_structure),
        ("sparse table structure", sparse_table_structure),
        ("symbolic ball identities", symbolic_identities),
        ("polydisc equality constant trace", polydisc_equality_trace),
        ("linear objective on the ball", linear_objective_on_ball),
        ("product objective on the ball", product_on_ball),
        ("certificate soundness", certificate_soundness),
        ("hierarchy and sampled upper bounds", hierarchy_and_sandwich),
        ("sparse below dense", sparse_below_dense),
        ("eigen, LP and coefficient oracles", oracles),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{:.1?}]", i + 1, start.elapsed()),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{:.1?}]", i + 1, start.elapsed());
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
