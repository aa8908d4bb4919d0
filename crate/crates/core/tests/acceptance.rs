//! Acceptance criteria 1–13, one PASS/FAIL line each.
//!
//! Criteria backed by the verification suite read the report array of one
//! `verify --suite all --seed 7 --serial` run; the same run is repeated for
//! the determinism criterion.

use std::process::{Command, Output};
use std::time::{Duration, Instant};

use opspace::interp::{self, CoupleLevel};
use opspace::linalg::{complex_gaussian, CMatrix, HermitianPD, C64};
use opspace::spaces::{EmbeddedNorm, MatrixNormKind, NormOracle, SolverParams, SpaceStructure};
use opspace::verify::{self, CheckReport};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_opspace"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn opspace")
}

fn reports_of(out: &Output) -> Vec<CheckReport> {
    serde_json::from_slice(&out.stdout).unwrap_or_default()
}

fn select<'a>(reports: &'a [CheckReport], check: &str) -> Vec<&'a CheckReport> {
    reports.iter().filter(|r| r.check == check).collect()
}

fn runtime(reports: &[&CheckReport]) -> Duration {
    Duration::from_millis(reports.iter().map(|r| r.runtime_ms).sum())
}

fn all_pass(reports: &[&CheckReport], expected: usize, limit: Option<Duration>) -> Outcome {
    let t = runtime(reports);
    let worst = reports.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    let ok = reports.len() == expected && reports.iter().all(|r| r.pass) && limit.is_none_or(|l| t < l);
    outcome(ok, format!("{} reports, min margin {:.3e}, {:.1}s", reports.len(), worst, t.as_secs_f64()))
}

fn c1() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut worst = f64::INFINITY;
    for (n, k) in [(3, 2), (4, 3)] {
        let r = verify::check_haagerup_cs(n, k, 500, 11).unwrap();
        ok &= r.pass;
        worst = worst.min(r.margin);
    }
    let t = start.elapsed();
    outcome(ok && t < Duration::from_secs(30), format!("min margin {worst:.3e}, {:.1}s", t.as_secs_f64()))
}

fn c2() -> Outcome {
    let start = Instant::now();
    let structures = [
        SpaceStructure::Row(3),
        SpaceStructure::Column(3),
        SpaceStructure::Oh(3),
        SpaceStructure::intersection(SpaceStructure::Row(3), SpaceStructure::Column(3)).unwrap(),
    ];
    let reports: Vec<CheckReport> = structures.iter().map(|s| verify::check_ruan_axioms(s, 200, 12).unwrap()).collect();
    let t = start.elapsed();
    let ok = reports.iter().all(|r| r.pass && r.tolerance <= 1e-8) && t < Duration::from_secs(30);
    let worst = reports.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    outcome(ok, format!("min margin {worst:.3e}, {:.1}s", t.as_secs_f64()))
}

fn c3() -> Outcome {
    let r = verify::check_opposite_invariance(3, 3, 200, 13).unwrap();
    outcome(r.pass && r.tolerance <= 1e-9, format!("margin {:.3e}", r.margin))
}

fn euclid(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn c4() -> Outcome {
    let start = Instant::now();
    let solver = SolverParams { degree: 8, grid: 64, ..SolverParams::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut width: f64 = 0.0;
    let mut contained = true;
    for i in 0..20 {
        let n = 2 + i % 3;
        let x: Vec<C64> = (0..n).map(|_| complex_gaussian(&mut rng)).collect();
        let b = interp::interp_norm_bounds(&CoupleLevel::linf_l1(n), 0.5, &x, &solver).unwrap();
        let e = euclid(&x);
        contained &= b.lower <= e * (1.0 + 1e-9) && e <= b.upper * (1.0 + 1e-9);
        width = width.max(b.relative_width());
    }
    // equal couple: the interpolated norm is the endpoint norm
    let n = EmbeddedNorm::row(3, 2, 2, MatrixNormKind::Operator);
    let d = EmbeddedNorm::row(3, 2, 2, MatrixNormKind::Trace);
    let eq = CoupleLevel::equal(std::sync::Arc::new(n.clone()), Some(std::sync::Arc::new(d)));
    let mut eq_err: f64 = 0.0;
    for _ in 0..3 {
        let x: Vec<C64> = (0..12).map(|_| complex_gaussian(&mut rng)).collect();
        let b = interp::interp_norm_bounds(&eq, 0.5, &x, &solver).unwrap();
        let v = n.norm(&x);
        eq_err = eq_err.max((b.upper - v).abs() / v).max((b.lower - v).abs() / v);
    }
    let t = start.elapsed();
    let ok = contained && width <= 0.06 && eq_err <= 0.01 && t < Duration::from_secs(120);
    outcome(
        ok,
        format!("contained={contained}, max width {:.2}%, equal-couple error {:.2}%, {:.1}s", 100.0 * width, 100.0 * eq_err, t.as_secs_f64()),
    )
}

fn random_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = CMatrix::random_gaussian(n, n, rng).into_dmatrix();
    CMatrix::from_dmatrix(g.qr().q()).unwrap()
}

fn c5() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    // commuting Grams: Q diag(a) Q*, Q diag(b) Q* interpolate to Q diag(a^{1-θ} b^θ) Q*
    let mut commuting_err: f64 = 0.0;
    for dim in 1..=3 {
        let q = random_unitary(dim, &mut rng);
        let a: Vec<f64> = (0..dim).map(|i| 0.5 + i as f64).collect();
        let b: Vec<f64> = (0..dim).map(|i| 3.0 / (1.0 + i as f64)).collect();
        let g0 = HermitianPD::from_diagonal(&a).unwrap().congruence(&opspace::linalg::adjoint(&q)).unwrap();
        let g1 = HermitianPD::from_diagonal(&b).unwrap().congruence(&opspace::linalg::adjoint(&q)).unwrap();
        for theta in [0.25, 0.5, 0.8] {
            let gm = interp::hilbertian_interp(&g0, &g1, theta).unwrap();
            let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x.powf(1.0 - theta) * y.powf(theta)).collect();
            let expected = HermitianPD::from_diagonal(&d).unwrap().congruence(&opspace::linalg::adjoint(&q)).unwrap();
            commuting_err = commuting_err.max(gm.matrix().sub(expected.matrix()).unwrap().frobenius_norm());
        }
    }
    let solver = SolverParams::default().with_seed(15);
    let mut inside = 0;
    for i in 0..20 {
        let dim = 1 + i % 3;
        let g0 = HermitianPD::random(dim, &mut rng);
        let g1 = HermitianPD::random(dim, &mut rng);
        let gm = interp::hilbertian_interp(&g0, &g1, 0.5).unwrap();
        let x: Vec<C64> = (0..dim).map(|_| complex_gaussian(&mut rng)).collect();
        let b = interp::interp_norm_bounds(&CoupleLevel::hilbertian(&g0, &g1).unwrap(), 0.5, &x, &solver).unwrap();
        if b.contains(gm.norm_of(&x), 0.03) {
            inside += 1;
        }
    }
    let t = start.elapsed();
    let ok = commuting_err <= 1e-8 && inside == 20 && t < Duration::from_secs(120);
    outcome(ok, format!("commuting error {commuting_err:.2e}, {inside}/20 inside, {:.1}s", t.as_secs_f64()))
}

fn c6(reports: &[CheckReport]) -> Outcome {
    let r = select(reports, "theorem3");
    let mut cases: Vec<(u64, u64)> = r
        .iter()
        .map(|r| (r.params["n"].as_u64().unwrap_or(0), r.params["k"].as_u64().unwrap_or(0)))
        .collect();
    cases.sort();
    let samples_ok = r.iter().all(|r| r.params["samples"].as_u64() == Some(10));
    let base = all_pass(&r, 4, Some(Duration::from_secs(600)));
    outcome(base.pass && samples_ok && cases == [(2, 1), (2, 2), (3, 1), (3, 2)], base.detail)
}

fn c7(reports: &[CheckReport]) -> Outcome {
    let r = select(reports, "corollary4");
    let width = r.first().and_then(|r| r.params["max_relative_width"].as_f64()).unwrap_or(f64::NAN);
    let base = all_pass(&r, 1, Some(Duration::from_secs(300)));
    let dims = r.first().is_some_and(|r| r.params["n"] == 2 && r.params["m"] == 2 && r.params["k"] == 1);
    outcome(base.pass && dims && width <= 0.07, format!("{}, max width {:.2}%", base.detail, 100.0 * width))
}

fn c8(reports: &[CheckReport]) -> Outcome {
    let r = select(reports, "oh-h");
    let samples = r.first().and_then(|r| r.params["samples"].as_u64());
    let base = all_pass(&r, 1, Some(Duration::from_secs(120)));
    outcome(base.pass && samples == Some(50), base.detail)
}

fn c9() -> Outcome {
    let r = verify::check_cb_oh(3, 3, 20, 19).unwrap();
    outcome(r.pass && r.tolerance <= 1e-6, format!("margin {:.3e}, {}ms", r.margin, r.runtime_ms))
}

fn c10(reports: &[CheckReport]) -> Outcome {
    let r = select(reports, "oh-fact");
    let mut dims: Vec<u64> = r.iter().filter_map(|r| r.params["n"].as_u64()).collect();
    dims.sort();
    let base = all_pass(&r, 2, None);
    outcome(base.pass && dims == [2, 3] && r.iter().all(|r| r.params["samples"] == 30), base.detail)
}

fn c11(reports: &[CheckReport]) -> Outcome {
    let r = select(reports, "duality");
    let base = all_pass(&r, 3, None);
    outcome(base.pass && r.iter().all(|r| r.tolerance <= 0.015), base.detail)
}

fn c12(reports: &[CheckReport]) -> Outcome {
    let r = select(reports, "corollary7");
    let Some(rep) = r.first() else { return outcome(false, "no report") };
    let gaps: Vec<f64> = rep.params["gaps"].as_array().map(|a| a.iter().filter_map(Value::as_f64).collect()).unwrap_or_default();
    let max_gap = gaps.iter().cloned().fold(0.0, f64::max);
    // gaps[0] is the identity calibration; the rest are the random samples
    let ok = rep.stretch && gaps.len() == 6 && max_gap <= 0.15 && rep.pass;
    outcome(ok, format!("gaps {:?}, max {:.2}% (strict threshold 15%)", gaps.iter().map(|g| format!("{:.3}", g)).collect::<Vec<_>>(), 100.0 * max_gap))
}

fn strip_runtime(out: &Output) -> Option<Value> {
    let mut v: Value = serde_json::from_slice(&out.stdout).ok()?;
    for r in v.as_array_mut()? {
        r.as_object_mut()?.remove("runtime_ms");
    }
    Some(v)
}

fn c13(first: &Output, second: &Output) -> Outcome {
    let (a, b) = (strip_runtime(first), strip_runtime(second));
    let same = a.is_some() && a == b;
    let reports = reports_of(first);
    let expected_code = if reports.iter().any(|r| r.fails(false)) { 1 } else { 0 };
    let suite_codes = first.status.code() == Some(expected_code) && second.status.code() == Some(expected_code);

    let ruan = run(&["verify", "--suite", "ruan", "--seed", "7"]);
    let ruan_ok = ruan.status.code() == Some(0) && reports_of(&ruan).len() == 4;
    let capped = run(&["verify", "--suite", "theorem3", "--n", "5", "--k", "4"]);
    let cap_ok = capped.status.code() == Some(2) && !capped.stderr.is_empty();

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "1 2 2\n1 2\n3 x\n").unwrap();
    let parse = bin().args(["norm", "--space", "oh", "--input"]).arg(&bad).output().unwrap();
    let parse_ok = parse.status.code() == Some(2) && String::from_utf8_lossy(&parse.stderr).contains("line 3");
    let good = dir.path().join("v.txt");
    std::fs::write(&good, "2 1 1\n3\n4\n").unwrap();
    let norm = bin().args(["norm", "--space", "oh", "--n", "2", "--level", "1x1", "--input"]).arg(&good).output().unwrap();
    let value = serde_json::from_slice::<Value>(&norm.stdout).ok().and_then(|v| v["value"].as_f64());
    let norm_ok = norm.status.code() == Some(0) && value.is_some_and(|v| (v - 5.0).abs() < 1e-12);

    let ok = same && suite_codes && ruan_ok && cap_ok && parse_ok && norm_ok;
    outcome(
        ok,
        format!(
            "identical={same}, suite exit {:?}/{:?} (expected {expected_code}), ruan={ruan_ok}, caps={cap_ok}, parse={parse_ok}, norm={norm_ok}",
            first.status.code(),
            second.status.code()
        ),
    )
}

fn main() {
    let suite = ["verify", "--suite", "all", "--seed", "7", "--serial"];
    let first = run(&suite);
    let second = run(&suite);
    let reports = reports_of(&first);

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("Haagerup Cauchy-Schwarz", Box::new(c1)),
        ("Ruan axioms M1/M2", Box::new(c2)),
        ("OH opposite/conjugation invariance", Box::new(c3)),
        ("interpolation engine oracle", Box::new(c4)),
        ("Hilbertian fast path", Box::new(c5)),
        ("(R,C)_1/2 against OH", Box::new(|| c6(&reports))),
        ("row/column couple tensored with M_m", Box::new(|| c7(&reports))),
        ("OH Haagerup tensor identity", Box::new(|| c8(&reports))),
        ("cb norm equals norm on OH", Box::new(c9)),
        ("oh factorization on OH", Box::new(|| c10(&reports))),
        ("level-1 duality", Box::new(|| c11(&reports))),
        ("Phi interpolation stretch", Box::new(|| c12(&reports))),
        ("CLI determinism and exit codes", Box::new(|| c13(&first, &second))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("{} criterion {:2} {}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, name, o.detail);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
