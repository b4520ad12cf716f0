//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use multinorm::amplify::{max_norm, min_norm, AmplifiedElement};
use multinorm::search::SearchConfig;
use multinorm::suites::{run_suite, Suite, SuiteOptions, SuiteReport};
use multinorm::{Exponent, FiniteNormedSpace};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 20261015;

type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn suite(s: Suite, trials: Option<usize>) -> SuiteReport {
    let opts = SuiteOptions { trials, ..SuiteOptions::new(SEED) };
    run_suite(s, &opts).expect("suite runs")
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut out = f();
    let took = start.elapsed();
    if let Some(limit) = limit {
        if took > limit {
            out.pass = false;
        }
        out.detail = format!("{}; {:.2}s (limit {}s)", out.detail, took.as_secs_f64(), limit.as_secs());
    } else {
        out.detail = format!("{}; {:.2}s", out.detail, took.as_secs_f64());
    }
    out
}

fn from_report(r: &SuiteReport) -> Outcome {
    Outcome {
        pass: r.passed,
        detail: format!("{} checks, {} failures, max gap {:.3e}", r.checks, r.failures, r.max_gap),
    }
}

fn hilbert_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let p = Exponent::TWO;
    let space = FiniteNormedSpace::lq(p, 4);
    let cfg = SearchConfig::with_seed(SEED);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m = DMatrix::from_fn(4, 4, |_, _| rng.gen_range(-1.0..1.0));
        let svd = m.clone().svd(false, false);
        let spectral = svd.singular_values.max();
        let nuclear = svd.singular_values.sum();
        let u = AmplifiedElement::from_matrix(p, &[0, 1, 2, 3], &m);
        let lo = min_norm(&u, &space, &cfg.opnorm);
        let hi = max_norm(&u, &space, &cfg);
        for (b, want) in [(lo, spectral), (hi, nuclear)] {
            worst = worst.max((b.lower - want).abs().max((b.upper - want).abs()) / want);
        }
    }
    Outcome { pass: worst <= 1e-6, detail: format!("100 instances, max relative deviation {worst:.3e}") }
}

fn pconvexity() -> Outcome {
    let min = suite(Suite::Pconvex, Some(300));
    let counter = suite(Suite::PconvexCounterexample, Some(1));
    let found = counter.witnesses.iter().map(|w| w.values["sum_lower"] - w.values["bound"]).fold(f64::NAN, f64::max);
    Outcome {
        pass: min.passed && counter.passed && found >= 0.58,
        detail: format!(
            "min: {} violations in {} pairs; max l1 counterexample gap {found:.4}",
            min.failures, min.checks
        ),
    }
}

fn determinism() -> Outcome {
    let runs = [(Suite::DiamondMetric, 50), (Suite::Triangle, 10), (Suite::LqSqueeze, 6), (Suite::MaxLeftAgreement, 4)];
    let mut same = true;
    for (s, n) in runs {
        let a = serde_json::to_string(&suite(s, Some(n))).unwrap();
        let b = serde_json::to_string(&suite(s, Some(n))).unwrap();
        same &= a == b;
    }
    Outcome { pass: same, detail: format!("{} suites re-run with seed {SEED}", runs.len()) }
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let criteria: Vec<Criterion> = vec![
        (
            "1 diamond metric",
            Box::new(|| timed(Some(secs(1)), || from_report(&suite(Suite::DiamondMetric, Some(500))))),
        ),
        (
            "2 contractive module",
            Box::new(|| timed(Some(secs(30)), || from_report(&suite(Suite::ContractiveModule, Some(200))))),
        ),
        ("3 functional norms", Box::new(|| timed(None, || from_report(&suite(Suite::FunctionalNorm, Some(50)))))),
        ("4 hilbert oracles", Box::new(|| timed(Some(secs(60)), hilbert_oracles))),
        (
            "5 max-left identification",
            Box::new(|| timed(None, || from_report(&suite(Suite::MaxLeftAgreement, Some(50))))),
        ),
        ("6 p-convexity", Box::new(|| timed(None, pconvexity))),
        ("7 triangle merge", Box::new(|| timed(None, || from_report(&suite(Suite::Triangle, Some(100)))))),
        (
            "8 Lq identification squeeze",
            Box::new(|| timed(Some(secs(300)), || from_report(&suite(Suite::LqSqueeze, Some(30))))),
        ),
        ("9 kronecker", Box::new(|| timed(None, || from_report(&suite(Suite::Kron, Some(100)))))),
        ("10 determinism", Box::new(|| timed(None, determinism))),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let out = run();
        if !out.pass {
            failed += 1;
        }
        println!("{} criterion {name}: {}", if out.pass { "PASS" } else { "FAIL" }, out.detail);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
