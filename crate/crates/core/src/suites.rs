//! Property suites shared by the command-line `verify` command and the
//! acceptance tests. Every trial draws from its own generator seeded by
//! `(seed, trial)`, so reports do not depend on scheduling.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplify::{lbounded_norm_bilinear, lbounded_norm_linear, AmplifiedElement, BilinearMap, QuantizedSpace};
use crate::diamond::diamond_base;
use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::gtensor::{canonical_representation, general_norm, maxleft_exact, TensorFactors};
use crate::lp::opnorm::{nuclear_norm, spectral_norm};
use crate::lp::{LpOperator, LpVector};
use crate::normed::FiniteNormedSpace;
use crate::pctensor::{
    canonical_prepresentation, kron_norm_check, lq_product_norm, merge_sum, pconvex_norm_lower, pconvex_norm_upper,
    pconvexity_check, pconvexity_sides, random_orthogonal_pair, StepForm,
};
use crate::search::SearchConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    DiamondMetric,
    ContractiveModule,
    FunctionalNorm,
    #[serde(rename = "thm47")]
    MaxLeftAgreement,
    Pconvex,
    PconvexCounterexample,
    #[serde(rename = "thm64")]
    LqSqueeze,
    Triangle,
    Kron,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::DiamondMetric,
        Suite::ContractiveModule,
        Suite::FunctionalNorm,
        Suite::MaxLeftAgreement,
        Suite::Pconvex,
        Suite::PconvexCounterexample,
        Suite::LqSqueeze,
        Suite::Triangle,
        Suite::Kron,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::DiamondMetric => "diamond-metric",
            Suite::ContractiveModule => "contractive-module",
            Suite::FunctionalNorm => "functional-norm",
            Suite::MaxLeftAgreement => "thm47",
            Suite::Pconvex => "pconvex",
            Suite::PconvexCounterexample => "pconvex-counterexample",
            Suite::LqSqueeze => "thm64",
            Suite::Triangle => "triangle",
            Suite::Kron => "kron",
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            Suite::DiamondMetric => 500,
            Suite::ContractiveModule => 200,
            Suite::FunctionalNorm => 50,
            Suite::MaxLeftAgreement => 50,
            Suite::Pconvex => 300,
            Suite::PconvexCounterexample => 20,
            Suite::LqSqueeze => 30,
            Suite::Triangle => 100,
            Suite::Kron => 100,
        }
    }

    /// Base exponents cycled through when none is fixed.
    fn exponents(self) -> Vec<f64> {
        match self {
            Suite::DiamondMetric | Suite::ContractiveModule => vec![1.0, 1.5, 2.0, 3.0, f64::INFINITY],
            Suite::FunctionalNorm => vec![2.0],
            Suite::MaxLeftAgreement => vec![2.0, 3.0],
            Suite::Pconvex | Suite::LqSqueeze | Suite::Triangle => vec![1.5, 2.0, 3.0],
            Suite::PconvexCounterexample => vec![2.0],
            Suite::Kron => vec![1.0, 2.0, f64::INFINITY],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown suite '{s}'")))
    }
}

#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub trials: Option<usize>,
    pub seed: u64,
    /// Fixes the base exponent instead of cycling through the suite's list.
    pub p: Option<Exponent>,
    pub search: SearchConfig,
}

impl SuiteOptions {
    pub fn new(seed: u64) -> Self {
        SuiteOptions { trials: None, seed, p: None, search: SearchConfig::with_seed(seed) }
    }
}

/// A single failed or noteworthy check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub trial: usize,
    pub p: f64,
    pub note: String,
    pub values: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub trials: usize,
    pub checks: usize,
    pub failures: usize,
    /// Largest defect against the suite's inequality, in the suite's own units.
    pub max_gap: f64,
    pub passed: bool,
    pub witnesses: Vec<Witness>,
}

const WITNESS_CAP: usize = 10;

struct Check {
    ok: bool,
    gap: f64,
    note: &'static str,
    values: Vec<(&'static str, f64)>,
}

impl Check {
    fn new(ok: bool, gap: f64, note: &'static str, values: Vec<(&'static str, f64)>) -> Self {
        Check { ok, gap, note, values }
    }
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64 + 1);
    rng
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn gauss_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| gauss(rng)).collect()
}

fn pick_exponent(rng: &mut ChaCha8Rng, choices: &[f64]) -> Exponent {
    Exponent::new(*choices.choose(rng).expect("nonempty")).expect("valid exponent")
}

fn random_sparse(rng: &mut ChaCha8Rng, p: Exponent) -> LpVector {
    let n = rng.gen_range(1..=4);
    LpVector::counting(p, (0..n).map(|_| (rng.gen_range(0..10), gauss(rng))))
}

/// Element on between one and `max_atoms` distinct atoms among `0..6`.
fn random_element(rng: &mut ChaCha8Rng, p: Exponent, dim: usize, max_atoms: usize) -> AmplifiedElement {
    let atoms = rng.gen_range(1..=max_atoms);
    let mut pool: Vec<u64> = (0..6).collect();
    pool.shuffle(rng);
    AmplifiedElement::new(p, dim, pool[..atoms].iter().map(|&i| (i, gauss_vec(rng, dim))).collect::<Vec<_>>())
        .expect("finite")
}

fn random_lq(rng: &mut ChaCha8Rng, dim: usize) -> FiniteNormedSpace {
    FiniteNormedSpace::lq(pick_exponent(rng, &[1.0, 1.5, 2.0, 3.0, f64::INFINITY]), dim)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

pub fn run_suite(suite: Suite, opts: &SuiteOptions) -> Result<SuiteReport> {
    let trials = opts.trials.unwrap_or(suite.default_trials());
    let exps: Vec<f64> = opts.p.map(|p| vec![p.value()]).unwrap_or_else(|| suite.exponents());
    let outcomes: Vec<(f64, Vec<Check>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let p = Exponent::new(exps[t % exps.len()])?;
            let mut rng = trial_rng(opts.seed, t);
            let cfg = opts.search.fork(t as u64);
            Ok((p.value(), run_trial(suite, p, &mut rng, &cfg)?))
        })
        .collect::<Result<_>>()?;

    let mut report = SuiteReport {
        suite,
        seed: opts.seed,
        trials,
        checks: 0,
        failures: 0,
        max_gap: 0.0,
        passed: true,
        witnesses: vec![],
    };
    for (t, (p, checks)) in outcomes.into_iter().enumerate() {
        for c in checks {
            report.checks += 1;
            report.max_gap = report.max_gap.max(c.gap);
            let noteworthy = if suite == Suite::PconvexCounterexample { c.ok } else { !c.ok };
            if !c.ok {
                report.failures += 1;
            }
            if noteworthy && report.witnesses.len() < WITNESS_CAP {
                report.witnesses.push(Witness {
                    trial: t,
                    p,
                    note: c.note.to_string(),
                    values: c.values.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
                });
            }
        }
    }
    report.passed =
        if suite == Suite::PconvexCounterexample { report.checks > report.failures } else { report.failures == 0 };
    Ok(report)
}

fn run_trial(suite: Suite, p: Exponent, rng: &mut ChaCha8Rng, cfg: &SearchConfig) -> Result<Vec<Check>> {
    match suite {
        Suite::DiamondMetric => diamond_metric(p, rng),
        Suite::ContractiveModule => contractive_module(p, rng, cfg),
        Suite::FunctionalNorm => functional_norm(p, rng, cfg),
        Suite::MaxLeftAgreement => max_left_agreement(p, rng, cfg),
        Suite::Pconvex => pconvex(p, rng, cfg),
        Suite::PconvexCounterexample => pconvex_counterexample(p, rng, cfg),
        Suite::LqSqueeze => lq_squeeze(p, rng, cfg),
        Suite::Triangle => triangle(p, rng, cfg),
        Suite::Kron => kron(p, rng, cfg),
    }
}

fn diamond_metric(p: Exponent, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let (xi, eta) = (random_sparse(rng, p), random_sparse(rng, p));
    let lhs = diamond_base(&xi, &eta)?.norm();
    let rhs = xi.norm() * eta.norm();
    let gap = rel(lhs, rhs);
    Ok(vec![Check::new(gap <= 1e-12, gap, "diamond norm", vec![("diamond", lhs), ("product", rhs)])])
}

fn random_operator(rng: &mut ChaCha8Rng, p: Exponent, dom: &[u64]) -> LpOperator {
    let rows = rng.gen_range(1..=3u64);
    let cols: Vec<u64> = dom.iter().copied().chain([6]).collect();
    let cols = &cols;
    LpOperator::from_triplets(
        p,
        (0..rows).flat_map(|i| cols.iter().map(move |&j| (i, j))).map(|(i, j)| (i, j, gauss(rng))).collect::<Vec<_>>(),
    )
}

fn contractive_module(p: Exponent, rng: &mut ChaCha8Rng, cfg: &SearchConfig) -> Result<Vec<Check>> {
    let dim = rng.gen_range(2..=3);
    let space = random_lq(rng, dim);
    let u = random_element(rng, p, dim, 3);
    let a = random_operator(rng, p, &u.window());
    let au = u.module_action(&a)?;
    let a_norm = a.norm_bracket(&cfg.opnorm).upper;
    let mut checks = Vec::new();
    for (quant, note) in [
        (QuantizedSpace::min(space.clone()), "min module bound"),
        (QuantizedSpace::max(space.clone()), "max module bound"),
    ] {
        let lhs = quant.norm(&au, cfg).lower;
        let rhs = a_norm * quant.norm(&u, cfg).upper;
        let gap = lhs - rhs;
        checks.push(Check::new(gap <= 1e-9, gap, note, vec![("lhs", lhs), ("rhs", rhs)]));
    }
    Ok(checks)
}

fn functional_norm(p: Exponent, rng: &mut ChaCha8Rng, cfg: &SearchConfig) -> Result<Vec<Check>> {
    let q = pick_exponent(rng, &[1.0, 2.0, 4.0]);
    let scalar = QuantizedSpace::min(FiniteNormedSpace::lq(p, 1));
    let f = gauss_vec(rng, 3);
    let dual = q.conjugate().norm(&f);
    let mut checks = Vec::new();
    for (space, note) in [
        (QuantizedSpace::min(FiniteNormedSpace::lq(q, 3)), "min functional"),
        (QuantizedSpace::max(FiniteNormedSpace::lq(q, 3)), "max functional"),
    ] {
        let b = lbounded_norm_linear(&DMatrix::from_row_slice(1, 3, &f), &space, &scalar, cfg)?.bracket();
        let gap = rel(b.lower, dual).max(rel(b.upper, dual));
        checks.push(Check::new(gap <= 1e-9, gap, note, vec![("lower", b.lower), ("upper", b.upper), ("dual", dual)]));
    }
    let r = pick_exponent(rng, &[1.0, 2.0, 4.0]);
    let g = gauss_vec(rng, 3);
    let e = QuantizedSpace::min(FiniteNormedSpace::lq(q, 3));
    let fsp = QuantizedSpace::max(FiniteNormedSpace::lq(r, 3));
    let want = dual * r.conjugate().norm(&g);
    let b = lbounded_norm_bilinear(&BilinearMap::product_functional(&f, &g), &e, &fsp, &scalar, cfg)?.bracket();
    let gap = rel(b.lower, want).max(rel(b.upper, want));
    checks.push(Check::new(
        gap <= 1e-9,
        gap,
        "product functional",
        vec![("lower", b.lower), ("upper", b.upper), ("product", want)],
    ));
    Ok(checks)
}

fn max_left_agreement(p: Exponent, rng: &mut ChaCha8Rng, cfg: &SearchConfig) -> Result<Vec<Check>> {
    let left = if rng.gen_bool(0.5) { Exponent::ONE } else { Exponent::TWO };
    let q = pick_exponent(rng, &[1.5, 2.0, 3.0]);
    let factors = TensorFactors::new(
        QuantizedSpace::max(FiniteNormedSpace::lq(left, 2)),
        QuantizedSpace::min(FiniteNormedSpace::lq(q, 2)),
    );
    let u = random_element(rng, p, 4, 2);
    let g = general_norm(&u, &factors, cfg)?.bracket;
    let m = maxleft_exact(&u, &factors, cfg)?;
    let gap = (g.lower - m.upper).max(m.lower - g.upper) / g.upper.max(1.0);
    let mut checks = vec![Check::new(
        gap <= 1e-9,
        gap,
        "interval overlap",
        vec![
            ("general_lower", g.lower),
            ("general_upper", g.upper),
            ("maxleft_lower", m.lower),
            ("maxleft_upper", m.upper),
        ],
    )];

    // Hilbert factors at p = 2 on a base-elementary U = ξ ⊗ W.
    let two = Exponent::TWO;
    let hilbert = TensorFactors::new(
        QuantizedSpace::max(FiniteNormedSpace::lq(two, 2)),
        QuantizedSpace::max(FiniteNormedSpace::lq(two, 2)),
    );
    let xi = LpVector::counting(two, [(rng.gen_range(0..4), gauss(rng)), (rng.gen_range(4..8), gauss(rng))]);
    let w = gauss_vec(rng, 4);
    let want = xi.norm() * nuclear_norm(&DMatrix::from_row_slice(2, 2, &w));
    let h = AmplifiedElement::elementary(&xi, &w);
    let g = general_norm(&h, &hilbert, cfg)?.bracket;
    let m = maxleft_exact(&h, &hilbert, cfg)?;
    let gap = [g.lower, g.upper, m.lower, m.upper].iter().map(|v| rel(*v, want)).fold(0.0, f64::max);
    checks.push(Check::new(
        gap <= 1e-6,
        gap,
        "hilbert nuclear norm",
        vec![
            ("general_lower", g.lower),
            ("general_upper", g.upper),
            ("maxleft_lower", m.lower),
            ("maxleft_upper", m.upper),
            ("nuclear", want),
        ],
    ));
    Ok(checks)
}

fn pconvex(p: Exponent, rng: &mut ChaCha8Rng, cfg: &SearchConfig) -> Result<Vec<Check>> {
    let dim = rng.gen_range(2..=3);
    let space = QuantizedSpace::min(random_lq(rng, dim));
    let (u, v) = random_orthogonal_pair(rng, p, dim);
    let (lhs, rhs) = pconvexity_sides(&space, p, &u, &v, cfg);
    let gap = lhs - rhs;
    Ok(vec![Check::new(gap <= 1e-9 * rhs.max(1.0), gap, "min p-convexity", vec![("sum_lower", lhs), ("bound", rhs)])])
}

fn pconvex_counterexample(p: Exponent, _rng: &mut ChaCha8Rng, cfg: &SearchConfig) -> Result<Vec<Check>> {
    let space = QuantizedSpace::max(FiniteNormedSpace::lq(Exponent::ONE, 2));
    let report = pconvexity_check(&space, p, 4, cfg);
    Ok(vec![
        match report.violations.iter().max_by(|a, b| (a.sum_lower - a.bound).total_cmp(&(b.sum_lower - b.bound))) {
            Some(w) => Check::new(
                true,
                w.sum_lower - w.bound,
                "violation found",
                vec![("sum_lower", w.sum_lower), ("bound", w.bound)],
            ),
            None => Check::new(false, report.largest_excess, "no violation found", vec![]),
        },
    ])
}

/// Random step form with nonnegative coefficients away from `p = 2`, where the
/// operator-norm certificate is tight only for sign-equivalent matrices.
pub fn random_step_form(rng: &mut ChaCha8Rng, p: Exponent) -> Result<StepForm> {
    let blocks = |rng: &mut ChaCha8Rng| {
        let count = rng.gen_range(1..=4);
        let mut next = 0;
        let blocks: Vec<Vec<usize>> = (0..count)
            .map(|_| {
                let size = rng.gen_range(1..=2);
                let b = (next..next + size).collect();
                next += size;
                b
            })
            .collect();
        // One spare atom outside every block.
        let weights = (0..next + 1).map(|_| rng.gen_range(0.5..2.0)).collect::<Vec<f64>>();
        (weights, blocks)
    };
    let (lw, lb) = blocks(rng);
    let (rw, rb) = blocks(rng);
    let n = lb.len() * rb.len();
    let atoms = rng.gen_range(1..=3);
    let signed = p.is_two();
    let coeffs = AmplifiedElement::new(
        p,
        n,
        (0..atoms as u64)
            .map(|i| (i, (0..n).map(|_| if signed { gauss(rng) } else { gauss(rng).abs() }).collect()))
            .collect::<Vec<_>>(),
    )?;
    StepForm::new(p.conjugate(), lw, rw, lb, rb, coeffs)
}

fn lq_squeeze(p: Exponent, rng: &mut ChaCha8Rng, cfg: &SearchConfig) -> Result<Vec<Check>> {
    let step = random_step_form(rng, p)?;
    let u = step.to_element();
    let factors = step.factors()?;
    let oracle = lq_product_norm(&u, &factors, cfg)?;
    let budget = SearchConfig { restarts: 0, ..*cfg };
    let (upper, _) = pconvex_norm_upper(&u, &factors, &budget)?;
    let lower = pconvex_norm_lower(&u, &factors, cfg)?;
    let up_gap = (upper - oracle.lower) / oracle.lower;
    let low_gap = oracle.lower - lower;
    let values =
        vec![("upper", upper), ("lower", lower), ("oracle_lower", oracle.lower), ("oracle_upper", oracle.upper)];
    Ok(vec![
        Check::new(up_gap <= 1e-6, up_gap, "upper squeeze", values.clone()),
        Check::new(low_gap <= 1e-9, low_gap, "lower squeeze", values),
    ])
}

fn triangle(p: Exponent, rng: &mut ChaCha8Rng, cfg: &SearchConfig) -> Result<Vec<Check>> {
    let quant = |rng: &mut ChaCha8Rng, s: FiniteNormedSpace| {
        if rng.gen_bool(0.5) {
            QuantizedSpace::min(s)
        } else {
            QuantizedSpace::max(s)
        }
    };
    let (le, re) = (random_lq(rng, 2), random_lq(rng, 2));
    let factors = TensorFactors::new(quant(rng, le), quant(rng, re));
    let u = random_element(rng, p, 4, 2);
    let v = random_element(rng, p, 4, 2);
    let ru = canonical_prepresentation(&canonical_representation(&u, &factors)?, &factors, p, cfg)?;
    let rv = canonical_prepresentation(&canonical_representation(&v, &factors)?, &factors, p, cfg)?;
    let merged = merge_sum(&ru, &rv, cfg)?;
    let residual = merged.residual(&u.add(&v)?)?;
    let bound = ru.cost() + rv.cost();
    let gap = merged.cost() - bound;
    Ok(vec![
        Check::new(gap <= 1e-9 * bound.max(1.0), gap, "merged cost", vec![("merged", merged.cost()), ("bound", bound)]),
        Check::new(
            residual <= 1e-10 && merged.isometries_disjoint(),
            residual,
            "merged value",
            vec![("residual", residual)],
        ),
    ])
}

fn kron(p: Exponent, rng: &mut ChaCha8Rng, cfg: &SearchConfig) -> Result<Vec<Check>> {
    let op = |rng: &mut ChaCha8Rng| {
        let (r, c) = (rng.gen_range(1..=3u64), rng.gen_range(1..=3u64));
        LpOperator::from_triplets(
            p,
            (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).map(|(i, j)| (i, j, gauss(rng))).collect::<Vec<_>>(),
        )
    };
    let (a, b) = (op(rng), op(rng));
    let report = kron_norm_check(&a, &b, cfg)?;
    let gap = report.kron.lower - report.bound;
    let mut checks =
        vec![Check::new(report.holds, gap, "kron bound", vec![("kron", report.kron.upper), ("bound", report.bound)])];
    if p.is_two() {
        let want = spectral_norm(a.matrix()) * spectral_norm(b.matrix());
        let gap = rel(report.kron.lower, want).max(rel(report.kron.upper, want));
        checks.push(Check::new(
            gap <= 1e-9,
            gap,
            "kron equality",
            vec![("kron", report.kron.upper), ("product", want)],
        ));
    }
    Ok(checks)
}
