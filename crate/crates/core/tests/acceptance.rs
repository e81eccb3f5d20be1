//! Acceptance criteria, one line per criterion.
//!
//! `cargo test -p sabayes --test acceptance` runs everything. Criterion
//! numbers given as arguments restrict the run (`-- 1 5 8`). The process
//! exits nonzero on a failing criterion only when `SABAYES_ACCEPTANCE_STRICT`
//! is set; otherwise failures are reported and the run succeeds.
//!
//! `SABAYES_SWIRL_CSV` points at the swirl per-gene summary file that the
//! dataset-conditional criterion needs; without it that criterion is skipped.

use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use sabayes::microarray::{
    bh_rejection_bound, count_discoveries, fit_variance_prior, gene_posterior, ingest, moderated_t, moderated_t_rule,
    DiscoveryRule, EbayesFit, EffectPrior, GeneRecord, GeneRiskTable, DEFAULT_LAPLACE_RATE,
};
use sabayes::model::{ConditionalPrior, Direction, EffectKind, Interval, Likelihood, Loss, Prior, Region, SelectionRule};
use sabayes::multiplicity::bh_procedure;
use sabayes::numerics::RngStream;
use sabayes::posterior::{
    compound_selection_posterior, freq_selective_ci, sa_posterior, unadjusted_posterior, CompoundSetup, Summary,
};
use sabayes::risk::{
    calibrate_rule, constant_discovery_pfdr, posterior_risk, sabayes_risk, sabayes_risk_per_y, two_group, upper_region,
    RuleFamily,
};
use sabayes::sim::{generate, replicate, sample_truncated, GenerativeSpec, IntervalMetrics, Replication, RulePolicy};

const SWIRL_ENV: &str = "SABAYES_SWIRL_CSV";
const STRICT_ENV: &str = "SABAYES_ACCEPTANCE_STRICT";

/// Absolute tolerance on posterior means, modes and interval endpoints.
const SUMMARY_TOL: f64 = 0.02;
/// Absolute tolerance on risk values.
const RISK_TOL: f64 = 0.005;

type Outcome = Result<Checks, sabayes::Error>;

enum Status {
    Pass,
    Fail,
    Skip(String),
}

/// Sub-checks of one criterion.
#[derive(Default)]
struct Checks {
    lines: Vec<(bool, String)>,
}

impl Checks {
    fn push(&mut self, ok: bool, line: String) {
        self.lines.push((ok, line));
    }

    fn near(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        let ok = (got - want).abs() <= tol;
        self.push(ok, format!("{what}: {got:.4} (want {want} ± {tol})"));
    }

    fn at_most(&mut self, what: &str, got: f64, bound: f64) {
        self.push(got <= bound, format!("{what}: {got:.4} (want ≤ {bound})"));
    }

    fn summary(&mut self, what: &str, s: &Summary, want: (f64, f64, f64, f64), tol: f64) {
        let (mean, mode, lo, hi) = want;
        self.near(&format!("{what} mean"), s.mean, mean, tol);
        self.near(&format!("{what} mode"), s.mode, mode, tol);
        self.near(&format!("{what} ci lo"), s.ci_lo, lo, tol);
        self.near(&format!("{what} ci hi"), s.ci_hi, hi, tol);
    }

    fn runtime(&mut self, took: Duration, limit: Duration) {
        self.push(took < limit, format!("runtime {:.1} s (limit {} s)", took.as_secs_f64(), limit.as_secs()));
    }

    fn truth(&mut self, what: &str, ok: bool) {
        self.push(ok, what.to_string());
    }

    fn passed(&self) -> bool {
        self.lines.iter().all(|(ok, _)| *ok)
    }
}

fn lik() -> Likelihood {
    Likelihood::standard()
}

fn mixed(gamma2: f64) -> EffectKind {
    EffectKind::Mixed {
        hyperprior: Prior::normal(0.0, 1.0 - gamma2).unwrap(),
        conditional: ConditionalPrior::NormalLocation { var: gamma2 },
    }
}

fn positive_selection_triple() -> Outcome {
    let start = Instant::now();
    let prior = Prior::normal(0.0, 1.0)?;
    let rule = SelectionRule::OneSided { a: 0.0 };
    let mut c = Checks::default();
    for (name, kind, want) in
        [("random", EffectKind::Random, 0.5), ("fixed", EffectKind::Fixed, 0.10), ("mixed γ²=0.5", mixed(0.5), 0.33)]
    {
        let m = sa_posterior(&kind, &prior, &lik(), &rule, 1.0)?.mean();
        c.near(&format!("{name} mean"), m, want, SUMMARY_TOL);
    }
    c.runtime(start.elapsed(), Duration::from_secs(1));
    Ok(c)
}

fn two_compound_selection() -> Outcome {
    let start = Instant::now();
    let mut c = Checks::default();
    let mixed_kind = mixed(0.5);
    let cases = [
        ("random γ²=1", 1.0, EffectKind::Random, 0.4),
        ("mixed γ²=0.5", 0.5, mixed_kind, 0.384),
        ("fixed γ²=1", 1.0, EffectKind::Fixed, 0.164),
        ("fixed γ²=0.5", 0.5, EffectKind::Fixed, 0.257),
    ];
    for (name, g2, kind, want) in cases {
        let r = compound_selection_posterior(&CompoundSetup::new(g2, (0.0, 2.0), 4.0), &kind)?;
        c.near(&format!("{name} E[mu2]"), r.mu2.mean, want, SUMMARY_TOL);
    }
    c.runtime(start.elapsed(), Duration::from_secs(30));
    Ok(c)
}

fn truncated_summaries() -> Outcome {
    let rule = SelectionRule::TwoSided { a: 3.111 };
    let mixture = Prior::example_mixture();
    let mut c = Checks::default();
    let flat = |y: f64| sa_posterior(&EffectKind::Fixed, &Prior::Flat, &lik(), &rule, y)?.summarize(0.95);
    let random = |y: f64| sa_posterior(&EffectKind::Random, &mixture, &lik(), &rule, y)?.summarize(0.95);
    c.summary("y=3.40 random", &random(3.40)?, (1.68, 2.40, -0.11, 4.20), SUMMARY_TOL);
    c.summary("y=3.40 flat", &flat(3.40)?, (1.88, 0.74, -0.04, 4.64), SUMMARY_TOL);
    c.summary("y=5.59 flat", &flat(5.59)?, (5.48, 5.57, 3.26, 7.52), SUMMARY_TOL);
    c.summary("y=5.59 random", &random(5.59)?, (4.59, 4.59, 2.62, 6.55), SUMMARY_TOL);
    for (y, lo, hi) in [(3.40, 1.44, 5.36), (5.59, 3.63, 7.55)] {
        let s = unadjusted_posterior(&Prior::Flat, &lik(), y)?.summarize(0.95)?;
        c.near(&format!("y={y} unadjusted ci lo"), s.ci_lo, lo, SUMMARY_TOL);
        c.near(&format!("y={y} unadjusted ci hi"), s.ci_hi, hi, SUMMARY_TOL);
    }
    Ok(c)
}

fn one_sided_heavy_tail() -> Outcome {
    let one = SelectionRule::OneSided { a: 3.111 };
    let mut c = Checks::default();
    let post = sa_posterior(&EffectKind::Fixed, &Prior::Flat, &lik(), &one, 3.40)?;
    let s = post.summarize(0.95)?;
    c.near("mode", s.mode, 0.19, SUMMARY_TOL);
    c.near("mean", s.mean, -2.87, SUMMARY_TOL);
    c.near("ci lo", s.ci_lo, -15.41, 0.05);
    c.near("ci hi", s.ci_hi, 3.91, 0.05);
    let ratio = post.density_at(-5.87) / post.density_at(3.40);
    c.near("density ratio at -5.87 vs 3.40", ratio, 1.0, 0.01);
    for (name, rule, lo, hi) in
        [("two-sided", SelectionRule::TwoSided { a: 3.111 }, -0.37, 5.03), ("one-sided", one.clone(), -9.44, 5.03)]
    {
        let ci = freq_selective_ci(&lik(), &rule, 3.40, 0.05)?;
        match ci.bounds() {
            Some((l, h)) => {
                c.near(&format!("{name} selective ci lo"), l, lo, 0.05);
                c.near(&format!("{name} selective ci hi"), h, hi, 0.05);
            }
            None => c.truth(&format!("{name} selective ci is a single interval ({} found)", ci.intervals.len()), false),
        }
    }
    Ok(c)
}

fn risk_values() -> Outcome {
    let prior = Prior::example_mixture();
    let loss = Loss::Directional;
    let mut c = Checks::default();
    let r = sabayes_risk(&prior, &lik(), &SelectionRule::TwoSided { a: 3.111 }, &loss)?;
    c.near("risk of |y| > 3.111", r.risk, 0.070, RISK_TOL);
    let cal = calibrate_rule(&RuleFamily::TwoSided, &prior, &lik(), &loss, 0.10)?;
    match cal.parameter {
        Some(a) => c.near("cutoff calibrated to 0.10", a, 2.915, 0.01),
        None => c.truth("calibration found a cutoff", false),
    }
    c.near("posterior risk at 3.111", posterior_risk(&prior, &lik(), &loss, 3.111)?, 0.176, RISK_TOL);
    c.near("posterior risk at 3.472", posterior_risk(&prior, &lik(), &loss, 3.472)?, 0.10, RISK_TOL);
    Ok(c)
}

fn ci99(mean: f64, se: Option<f64>) -> (f64, f64) {
    let h = 2.5758293035489 * se.unwrap_or(0.0);
    (mean - h, mean + h)
}

fn overlap(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.1 && b.0 <= a.1
}

fn replication_bands() -> Outcome {
    let start = Instant::now();
    let m = 100_000;
    let policy = RulePolicy::Fixed { rule: SelectionRule::TwoSided { a: 3.111 } };
    let rng = RngStream::new(2024, 1);
    let mut c = Checks::default();
    let mut runs: Vec<(&str, Replication)> = Vec::new();
    for (name, spec) in [("exchangeable", GenerativeSpec::polygenic(m)), ("blocks", GenerativeSpec::polygenic_blocks(m))] {
        let rep = replicate(&spec, &policy, 50, None, &rng)?;
        let s = &rep.stats;
        c.near(&format!("{name} mean R"), s.mean_R, 919.9, 10.0);
        c.near(&format!("{name} mean V"), s.mean_V, 64.4, 3.0);
        c.near(&format!("{name} mean FDP"), s.mean_FDP, 0.070, 0.005);
        runs.push((name, rep));
    }
    let (a, b) = (&runs[0].1.stats, &runs[1].1.stats);
    for (what, x, y) in [
        ("R", ci99(a.mean_R, a.se_R), ci99(b.mean_R, b.se_R)),
        ("V", ci99(a.mean_V, a.se_V), ci99(b.mean_V, b.se_V)),
        ("FDP", ci99(a.mean_FDP, a.se_FDP), ci99(b.mean_FDP, b.se_FDP)),
    ] {
        c.truth(&format!("99% intervals of mean {what} overlap: [{:.4}, {:.4}] vs [{:.4}, {:.4}]", x.0, x.1, y.0, y.1), overlap(x, y));
    }
    c.runtime(start.elapsed(), Duration::from_secs(300));
    Ok(c)
}

fn coverage_bands() -> Outcome {
    let spec = GenerativeSpec::polygenic(100_000);
    let metrics = IntervalMetrics::default();
    let rep = replicate(&spec, &RulePolicy::Bh { q: 0.2 }, 50, Some(&metrics), &RngStream::new(2024, 0))?;
    let mut c = Checks::default();
    let get = |name: &str| rep.stats.metrics.iter().find(|m| m.name == name).map(|m| m.mean);
    let band = |c: &mut Checks, name: &str, check: &dyn Fn(&mut Checks, f64)| match get(name) {
        Some(v) => check(c, v),
        None => c.truth(&format!("{name} recorded"), false),
    };
    band(&mut c, "fcp_unadjusted", &|c, v| c.near("unadjusted FCP", v, 0.346, 0.03));
    band(&mut c, "fcp_fcr_adjusted", &|c, v| c.at_most("FCR-adjusted FCP", v, 0.06));
    band(&mut c, "fcp_sabayes_flat", &|c, v| c.near("flat fixed credible FCP", v, 0.040, 0.015));
    band(&mut c, "fcp_sabayes_random", &|c, v| c.near("random credible FCP", v, 0.05, 0.01));
    Ok(c)
}

fn microarray_set() -> Outcome {
    let start = Instant::now();
    let fit = EbayesFit::new(4.02, 0.052, 8.5)?;
    let gene = GeneRecord::new("6239", -0.435, 0.0173);
    let mut c = Checks::default();
    c.near("moderated t", moderated_t(&gene, &fit).t, -4.51, 0.01);

    let strict = moderated_t_rule(&fit, 4.479, Direction::TwoSided);
    let loose = moderated_t_rule(&fit, 2.64, Direction::TwoSided);
    let laplace = EffectPrior::Laplace { rate: fit.laplace_rate };
    // (mode, mean, ci lo, ci hi, Pr(mu > 0))
    let rows: [(&str, Option<&SelectionRule>, &EffectPrior, [f64; 5]); 4] = [
        ("flat", None, &EffectPrior::Flat, [-0.435, -0.435, -0.61, -0.21, 0.0014]),
        ("laplace", None, &laplace, [-0.36, -0.31, -0.54, -0.01, 0.020]),
        ("flat |t| > 4.479", Some(&strict), &EffectPrior::Flat, [-0.278, -0.257, -0.54, 0.02, 0.038]),
        ("flat |t| > 2.64", Some(&loose), &EffectPrior::Flat, [-0.419, -0.367, -0.63, -0.02, 0.017]),
    ];
    for (name, rule, prior, want) in rows {
        let s = gene_posterior(&gene, &fit, rule, prior)?.summarize(0.95)?;
        let got = [s.mode, s.mean, s.ci_lo, s.ci_hi, s.tail_prob_pos];
        for (field, (g, w)) in ["mode", "mean", "ci lo", "ci hi", "P(mu > 0)"].iter().zip(got.iter().zip(want)) {
            c.near(&format!("{name} {field}"), *g, w, SUMMARY_TOL);
        }
    }

    let table = GeneRiskTable::build(&fit, gene.n, gene.df)?;
    c.near("risk of |t| > 4.479", table.risk(&strict)?.risk, 0.024, 0.003);
    c.near("moderated-t cutoff at 0.05", table.calibrate_moderated_t(0.05)?.parameter, 2.64, 0.02);
    c.near("posterior-risk cutoff at 0.05", table.calibrate_loss_threshold(0.05)?.parameter, 0.088, 0.004);
    c.near("raw 3-df t BH bound", bh_rejection_bound(8448, 0.1, 3.0)?, 57.10, 0.05);
    c.runtime(start.elapsed(), Duration::from_secs(120));
    Ok(c)
}

fn swirl_counts(path: PathBuf) -> Outcome {
    let data = ingest(&path)?;
    let (nu0, s0sq) = fit_variance_prior(&data.records, None)?;
    let fit = EbayesFit::new(nu0, s0sq, DEFAULT_LAPLACE_RATE)?;
    let mut c = Checks::default();
    c.truth(&format!("{} records, fitted nu0 = {nu0:.3}, s0² = {s0sq:.4}", data.records.len()), true);
    let rho = |s: f64| DiscoveryRule::Rule { rule: SelectionRule::LossThreshold { loss: Loss::Directional, s } };
    let cases = [
        ("BH q=0.1 on moderated t", DiscoveryRule::BhModerated { q: 0.1 }, 245.0),
        ("|t| > 2.64", DiscoveryRule::Rule { rule: moderated_t_rule(&fit, 2.64, Direction::TwoSided) }, 1124.0),
        ("posterior risk < 0.05", rho(0.05), 559.0),
        ("posterior risk < 0.088", rho(0.088), 1271.0),
    ];
    for (name, rule, want) in cases {
        let n = count_discoveries(&data.records, &rule, &fit)?.count as f64;
        c.near(name, n, want, 0.01 * want);
    }
    let raw = count_discoveries(&data.records, &DiscoveryRule::BhOrdinary { q: 0.1 }, &fit)?.count;
    c.push(raw == 0, format!("BH q=0.1 on raw 3-df t: {raw} (want 0)"));
    Ok(c)
}

fn runner(cases: u32) -> TestRunner {
    let cfg = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(cfg, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn fail(e: sabayes::Error) -> TestCaseError {
    TestCaseError::fail(e.to_string())
}

fn proper_prior() -> impl Strategy<Value = Prior> {
    prop_oneof![
        (-1.0..1.0f64, 0.3..3.0f64).prop_map(|(m, v)| Prior::normal(m, v).unwrap()),
        (0.5..5.0f64).prop_map(|r| Prior::laplace(r).unwrap()),
        Just(Prior::example_mixture()),
    ]
}

/// A rule and an observation it selects.
fn selected_observation() -> impl Strategy<Value = (SelectionRule, f64)> {
    prop_oneof![
        (0.5..3.0f64, 0.05..3.0f64, any::<bool>())
            .prop_map(|(a, d, neg)| (SelectionRule::TwoSided { a }, if neg { -(a + d) } else { a + d })),
        (-1.0..2.5f64, 0.05..3.0f64).prop_map(|(a, d)| (SelectionRule::OneSided { a }, a + d)),
    ]
}

/// Discoveries by scanning every candidate count from the top.
fn bh_oracle(p: &[f64], q: f64) -> Vec<usize> {
    let m = p.len();
    let mut sorted = p.to_vec();
    sorted.sort_by(f64::total_cmp);
    for k in (1..=m).rev() {
        if sorted[k - 1] <= q * k as f64 / m as f64 {
            let cut = sorted[k - 1];
            return (0..m).filter(|&i| p[i] <= cut).collect();
        }
    }
    Vec::new()
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().expect("thread pool").install(f)
}

fn property_suites() -> Outcome {
    let mut c = Checks::default();
    let record = |c: &mut Checks, name: &str, r: Result<(), String>| match r {
        Ok(()) => c.truth(name, true),
        Err(e) => c.truth(&format!("{name}: {e}"), false),
    };

    let r = runner(48).run(&(proper_prior(), selected_observation(), any::<bool>()), |(prior, (rule, y), fixed)| {
        let kind = if fixed { EffectKind::Fixed } else { EffectKind::Random };
        let mass = sa_posterior(&kind, &prior, &lik(), &rule, y).map_err(fail)?.total_mass();
        prop_assert!((mass - 1.0).abs() <= 1e-6, "mass {mass}");
        if let SelectionRule::TwoSided { .. } = rule {
            let flat = sa_posterior(&EffectKind::Fixed, &Prior::Flat, &lik(), &rule, y).map_err(fail)?.total_mass();
            prop_assert!((flat - 1.0).abs() <= 1e-6, "flat mass {flat}");
        }
        Ok(())
    });
    record(&mut c, "posterior normalization within 1e-6", r.map_err(|e| e.to_string()));

    let r = runner(48).run(&(proper_prior(), selected_observation()), |(prior, (rule, y))| {
        let adj = sa_posterior(&EffectKind::Random, &prior, &lik(), &rule, y).map_err(fail)?;
        let raw = unadjusted_posterior(&prior, &lik(), y).map_err(fail)?;
        for x in [-3.0, -1.0, 0.0, 0.5, 1.5, 3.0, 5.0] {
            prop_assert!((adj.cdf(x) - raw.cdf(x)).abs() <= 1e-10, "cdf at {x}");
        }
        Ok(())
    });
    record(&mut c, "random effects cancel the selection", r.map_err(|e| e.to_string()));

    let strat = (-1.0..1.0f64, 0.3..2.0f64, -1.0..1.5f64, 0.05..2.5f64, 0.2..2.0f64);
    let r = runner(32).run(&strat, |(mu, var, a, d, w)| {
        let rule = SelectionRule::OneSided { a };
        let y = a + d;
        let hyper = Prior::normal(mu, var).unwrap();
        let mean = |kind: &EffectKind, prior: &Prior| sa_posterior(kind, prior, &lik(), &rule, y).map(|p| p.mean());
        let sharp = EffectKind::Mixed { hyperprior: hyper.clone(), conditional: ConditionalPrior::NormalLocation { var: 0.0 } };
        let (m1, m2) = (mean(&sharp, &hyper).map_err(fail)?, mean(&EffectKind::Fixed, &hyper).map_err(fail)?);
        prop_assert!((m1 - m2).abs() <= 1e-6, "zero conditional variance: {m1} vs fixed {m2}");
        let point = EffectKind::Mixed {
            hyperprior: Prior::PointMass { at: mu },
            conditional: ConditionalPrior::NormalLocation { var: w },
        };
        let random_prior = Prior::normal(mu, w).unwrap();
        let (m3, m4) = (mean(&point, &Prior::Flat).map_err(fail)?, mean(&EffectKind::Random, &random_prior).map_err(fail)?);
        prop_assert!((m3 - m4).abs() <= 1e-6, "point-mass hyperprior: {m3} vs random {m4}");
        Ok(())
    });
    record(&mut c, "mixed effects reduce to fixed and random", r.map_err(|e| e.to_string()));

    let pval = prop_oneof![0.0..1.0f64, prop::sample::select(vec![0.0, 0.001, 0.01, 0.02, 0.05, 0.5, 1.0])];
    let r = runner(256).run(&(prop::collection::vec(pval, 1..=12), 0.01..0.5f64), |(p, q)| {
        let got = bh_procedure(&p, q).map_err(fail)?;
        let want = bh_oracle(&p, q);
        prop_assert_eq!(got.r, want.len());
        prop_assert_eq!(got.rejected, want);
        Ok(())
    });
    record(&mut c, "BH matches brute force for m ≤ 12", r.map_err(|e| e.to_string()));

    let rule = prop_oneof![
        (1.0..4.0f64).prop_map(|a| SelectionRule::TwoSided { a }),
        (0.5..3.0f64).prop_map(|a| SelectionRule::OneSided { a }),
    ];
    let r = runner(12).run(&(proper_prior(), rule), |(prior, rule)| {
        let a = sabayes_risk(&prior, &lik(), &rule, &Loss::Directional).map_err(fail)?.risk;
        let b = sabayes_risk_per_y(&prior, &lik(), &rule, &Loss::Directional).map_err(fail)?;
        prop_assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
        Ok(())
    });
    record(&mut c, "ratio and per-observation risk forms agree within 1e-8", r.map_err(|e| e.to_string()));

    let r = runner(12).run(&(proper_prior(), 1.0..4.0f64), |(prior, a)| {
        let rule = SelectionRule::OneSided { a };
        let positive = Region::new(vec![Interval::new(0.0, f64::INFINITY)]);
        let p = constant_discovery_pfdr(&prior, &lik(), &rule, &positive).map_err(fail)?;
        let r = sabayes_risk(&prior, &lik(), &rule, &Loss::Membership { region: positive }).map_err(fail)?.risk;
        prop_assert!((p - r).abs() <= 1e-8, "{p} vs {r}");
        Ok(())
    });
    record(&mut c, "pFDR of a constant-claim rule equals its risk within 1e-8", r.map_err(|e| e.to_string()));

    let r = runner(32).run(&(0.5..0.99f64, 1.0..4.0f64, 0.5..3.0f64), |(pi0, alt, cut)| {
        let f0 = Prior::normal(0.0, 1.0).unwrap();
        let f1 = Prior::normal(alt, 1.0).unwrap();
        let rep = two_group(pi0, &f0, &f1, &upper_region(cut)).map_err(fail)?;
        let avg = rep.average_local_fdr().map_err(fail)?;
        prop_assert!((rep.pfdr - avg).abs() <= 1e-8, "{} vs {avg}", rep.pfdr);
        Ok(())
    });
    record(&mut c, "two-group pFDR equals the averaged local fdr within 1e-8", r.map_err(|e| e.to_string()));

    let r = worker_invariance();
    record(&mut c, "seeded outputs do not depend on worker count", r);
    Ok(c)
}

fn worker_invariance() -> Result<(), String> {
    let e = |e: sabayes::Error| e.to_string();
    let spec = GenerativeSpec::polygenic(40_000);
    let rng = RngStream::new(77, 3);
    let one = in_pool(1, || generate(&spec, &rng)).map_err(e)?;
    let many = in_pool(4, || generate(&spec, &rng)).map_err(e)?;
    if one != many {
        return Err("generate differs".into());
    }

    let small = GenerativeSpec::polygenic(5_000);
    let metrics = IntervalMetrics { posterior_nodes: 401, ..IntervalMetrics::default() };
    let run = || replicate(&small, &RulePolicy::Bh { q: 0.2 }, 4, Some(&metrics), &rng);
    let one = in_pool(1, run).map_err(e)?;
    let many = in_pool(4, run).map_err(e)?;
    if one.rows != many.rows || one.stats != many.stats {
        return Err("replicate differs".into());
    }

    let rule = SelectionRule::TwoSided { a: 3.111 };
    let draw = || sample_truncated(&GenerativeSpec::polygenic(1), &rule, 0, 200, &mut rng.substream(9));
    let one = in_pool(1, draw).map_err(e)?;
    let many = in_pool(4, draw).map_err(e)?;
    if one.pairs != many.pairs || one.attempts != many.attempts {
        return Err("sample_truncated differs".into());
    }
    Ok(())
}

type Criterion = (u32, &'static str, fn() -> Option<Outcome>);

fn criteria() -> Vec<Criterion> {
    vec![
        (1, "positive-selection posterior means", || Some(positive_selection_triple())),
        (2, "two-compound selection", || Some(two_compound_selection())),
        (3, "truncated-likelihood summaries", || Some(truncated_summaries())),
        (4, "one-sided heavy tail and selective intervals", || Some(one_sided_heavy_tail())),
        (5, "risk values and calibration", || Some(risk_values())),
        (6, "replicated discovery counts", || Some(replication_bands())),
        (7, "false coverage bands", || Some(coverage_bands())),
        (8, "microarray gene set", || Some(microarray_set())),
        (9, "microarray discovery counts", || std::env::var_os(SWIRL_ENV).map(|p| swirl_counts(PathBuf::from(p)))),
        (10, "property suites", || Some(property_suites())),
    ]
}

fn evaluate(f: fn() -> Option<Outcome>) -> (Status, Vec<(bool, String)>) {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(None) => (Status::Skip(format!("{SWIRL_ENV} not set")), Vec::new()),
        Ok(Some(Ok(c))) => (if c.passed() { Status::Pass } else { Status::Fail }, c.lines),
        Ok(Some(Err(e))) => (Status::Fail, vec![(false, format!("error: {e}"))]),
        Err(p) => {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            (Status::Fail, vec![(false, format!("panic: {}", msg.unwrap_or_default()))])
        }
    }
}

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    let mut report = String::new();
    for (n, name, f) in criteria() {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let (status, lines) = evaluate(f);
        let secs = start.elapsed().as_secs_f64();
        let tag = match &status {
            Status::Pass => "PASS".to_string(),
            Status::Fail => {
                failed += 1;
                "FAIL".to_string()
            }
            Status::Skip(why) => format!("SKIP ({why})"),
        };
        let _ = writeln!(report, "{tag} criterion {n:>2}: {name} [{secs:.1} s]");
        for (ok, line) in lines {
            let _ = writeln!(report, "      {} {line}", if ok { "ok  " } else { "MISS" });
        }
        print!("{report}");
        report.clear();
    }
    println!("acceptance: {failed} failing criteria");
    if failed > 0 && std::env::var_os(STRICT_ENV).is_some() {
        std::process::exit(1);
    }
}
