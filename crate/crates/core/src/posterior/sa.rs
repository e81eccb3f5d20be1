use serde::Serialize;

use super::grid::PosteriorGrid;
use crate::error::{Error, Result, Tail};
use crate::model::expect::prior_grid;
use crate::model::{ConditionalPrior, EffectKind, Likelihood, Prior, Region, SelectionRule};
use crate::numerics::quadrature::{Grid, Scheme};
use crate::numerics::special::log_add_exp;

/// Numerical settings for grid posteriors.
#[derive(Debug, Clone, Serialize)]
pub struct PosteriorOptions {
    /// Node count of the posterior grid.
    pub nodes: usize,
    /// Initial half-width of the support around the data, in noise sds.
    pub initial_halfwidth: f64,
    /// The support is widened until the log density at both ends is this far
    /// below its maximum.
    pub tail_log_drop: f64,
    /// Widening stops with an improper-posterior error past this half-width
    /// (noise sds).
    pub max_halfwidth: f64,
    /// Relative change of the normalization on a doubled support that
    /// signals a non-integrable posterior.
    pub improper_tolerance: f64,
    /// Simpson intervals per segment of the hyperprior grid (mixed effects).
    pub hyper_segment_intervals: usize,
}

impl Default for PosteriorOptions {
    fn default() -> Self {
        PosteriorOptions {
            nodes: 4001,
            initial_halfwidth: 12.0,
            tail_log_drop: 46.0,
            max_halfwidth: 5000.0,
            improper_tolerance: 1e-3,
            hyper_segment_intervals: 1000,
        }
    }
}

/// The effective prior-side factor of the selection-adjusted posterior.
enum Target<'a> {
    /// `π(θ)`
    Random(&'a Prior),
    /// `π(θ) / Pr(S | θ)`
    Fixed(&'a Prior),
    /// `Σ_j c_j π₁(θ | λ_j)` with `c_j = w_j π₂(λ_j) / Pr(S | λ_j)`.
    Mixed { conditional: &'a ConditionalPrior, log_coef: Vec<(f64, f64)> },
}

struct Setup<'a> {
    target: Target<'a>,
    sigma: f64,
    y: f64,
    region: Region,
    /// Atoms of the adjusted prior with log weights (before the likelihood).
    atoms: Vec<(f64, f64)>,
    cusps: Vec<f64>,
}

impl Setup<'_> {
    fn log_prior_factor(&self, theta: f64) -> f64 {
        match &self.target {
            Target::Random(p) => p.log_density(theta),
            Target::Fixed(p) => p.log_density(theta) - self.region.normal_log_prob(theta, self.sigma),
            Target::Mixed { conditional, log_coef } => {
                let mut acc = f64::NEG_INFINITY;
                for &(lambda, lc) in log_coef {
                    let lp = match conditional {
                        ConditionalPrior::NormalLocation { var } => {
                            let sd = var.sqrt();
                            crate::numerics::special::normal_log_pdf((theta - lambda) / sd) - sd.ln()
                        }
                        ConditionalPrior::LaplaceRate => (0.5 * lambda).ln() - lambda * theta.abs(),
                    };
                    acc = log_add_exp(acc, lc + lp);
                }
                acc
            }
        }
    }

    fn log_lik(&self, theta: f64) -> f64 {
        let z = (self.y - theta) / self.sigma;
        -0.5 * z * z - crate::numerics::special::LN_SQRT_2PI - self.sigma.ln()
    }

    fn log_target(&self, theta: f64) -> f64 {
        self.log_prior_factor(theta) + self.log_lik(theta)
    }
}

fn build_setup<'a>(
    kind: &'a EffectKind,
    prior: &'a Prior,
    lik: &Likelihood,
    rule: &SelectionRule,
    y: f64,
    opts: &PosteriorOptions,
) -> Result<Setup<'a>> {
    kind.validate()?;
    lik.validate()?;
    let sigma = lik.sigma()?;
    let region = rule.region(lik)?;
    if !y.is_finite() {
        return Err(Error::Domain(format!("observation must be finite, got {y}")));
    }
    if !region.contains(y) {
        return Err(Error::Precondition(format!("observation {y} is not selected by rule {rule}")));
    }
    let log_ps = |t: f64| region.normal_log_prob(t, sigma);
    let (target, atoms, cusps) = match kind {
        EffectKind::Random if !prior.is_flat() => {
            prior.validate()?;
            let atoms = prior.atoms().into_iter().map(|(x, m)| (x, m.ln())).collect();
            (Target::Random(prior), atoms, prior.cusps())
        }
        // A flat prior is treated as a fixed effect whatever the stated kind.
        EffectKind::Random | EffectKind::Fixed => {
            prior.validate()?;
            let atoms = prior.atoms().into_iter().map(|(x, m)| (x, m.ln() - log_ps(x))).collect();
            (Target::Fixed(prior), atoms, prior.cusps())
        }
        EffectKind::Mixed { hyperprior, conditional } => {
            if conditional.is_degenerate() {
                // θ = λ: the hyperprior acts as a fixed-effect prior
                let atoms = hyperprior.atoms().into_iter().map(|(x, m)| (x, m.ln() - log_ps(x))).collect();
                (Target::Fixed(hyperprior), atoms, hyperprior.cusps())
            } else {
                let mut log_coef = Vec::new();
                let sel = |lambda: f64| -> Result<f64> {
                    crate::model::selection_probability_given_hyper(rule, lik, conditional, lambda)
                };
                for (lambda, m) in hyperprior.atoms() {
                    log_coef.push((lambda, m.ln() - sel(lambda)?.ln()));
                }
                if hyperprior.continuous_mass() > 0.0 {
                    let g = prior_grid(hyperprior, &[], opts.hyper_segment_intervals)?;
                    for (&lambda, &w) in g.nodes().iter().zip(g.weights()) {
                        let d = hyperprior.density(lambda);
                        if d > 0.0 && w > 0.0 {
                            log_coef.push((lambda, (w * d).ln() - sel(lambda)?.ln()));
                        }
                    }
                }
                if log_coef.iter().any(|c| !c.1.is_finite()) {
                    return Err(Error::Numeric("selection probability given the hyperparameter vanished".into()));
                }
                let cusps = if matches!(conditional, ConditionalPrior::LaplaceRate) { vec![0.0] } else { vec![] };
                (Target::Mixed { conditional, log_coef }, Vec::new(), cusps)
            }
        }
    };
    Ok(Setup { target, sigma, y, region, atoms, cusps })
}

fn make_grid(lo: f64, hi: f64, setup: &Setup<'_>, n: usize) -> Result<Grid> {
    let mut extra: Vec<f64> = vec![0.0, setup.y];
    extra.extend(setup.cusps.iter().copied());
    extra.extend(setup.atoms.iter().map(|a| a.0));
    Grid::with_breaks(lo, hi, &extra, n, Scheme::Simpson)
}

fn evaluate(grid: &Grid, setup: &Setup<'_>) -> Vec<f64> {
    grid.nodes().iter().map(|&t| setup.log_target(t)).collect()
}

/// Selection-adjusted posterior for a scalar observation `y` selected by
/// `rule`.
///
/// Random effects use `π(θ)f(y|θ)`; fixed effects divide by `Pr(S|θ)`; mixed
/// effects use `f(y|θ)∫π₂(λ)π₁(θ|λ)/Pr(S|λ)dλ` and ignore `prior`. A flat
/// prior is always treated as fixed.
pub fn sa_posterior(
    kind: &EffectKind,
    prior: &Prior,
    lik: &Likelihood,
    rule: &SelectionRule,
    y: f64,
) -> Result<PosteriorGrid> {
    sa_posterior_with(kind, prior, lik, rule, y, &PosteriorOptions::default())
}

pub fn sa_posterior_with(
    kind: &EffectKind,
    prior: &Prior,
    lik: &Likelihood,
    rule: &SelectionRule,
    y: f64,
    opts: &PosteriorOptions,
) -> Result<PosteriorGrid> {
    let setup = build_setup(kind, prior, lik, rule, y, opts)?;
    let sigma = setup.sigma;
    let mut anchors = vec![y];
    anchors.extend(setup.cusps.iter().copied());
    anchors.extend(setup.atoms.iter().map(|a| a.0));
    let a_lo = anchors.iter().cloned().fold(f64::INFINITY, f64::min);
    let a_hi = anchors.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut lo = a_lo - opts.initial_halfwidth * sigma;
    let mut hi = a_hi + opts.initial_halfwidth * sigma;
    let limit_lo = y - opts.max_halfwidth * sigma;
    let limit_hi = y + opts.max_halfwidth * sigma;

    let (grid, logs) = loop {
        let grid = make_grid(lo, hi, &setup, opts.nodes)?;
        let logs = evaluate(&grid, &setup);
        let atom_max = setup
            .atoms
            .iter()
            .map(|a| a.1 + setup.log_lik(a.0))
            .fold(f64::NEG_INFINITY, f64::max);
        let top = logs.iter().cloned().fold(atom_max, f64::max);
        if !top.is_finite() {
            return Err(Error::Numeric(format!("posterior log density has no finite maximum (max = {top})")));
        }
        let widen_lo = logs[0] > top - opts.tail_log_drop;
        let widen_hi = logs[logs.len() - 1] > top - opts.tail_log_drop;
        if !widen_lo && !widen_hi {
            break (grid, logs);
        }
        let width = hi - lo;
        if widen_lo {
            if lo <= limit_lo {
                return Err(Error::ImproperPosterior {
                    tail: Tail::Lower,
                    detail: format!("density still within e^-{} of its maximum at {lo}", opts.tail_log_drop),
                });
            }
            lo = (lo - width).max(limit_lo);
        }
        if widen_hi {
            if hi >= limit_hi {
                return Err(Error::ImproperPosterior {
                    tail: Tail::Upper,
                    detail: format!("density still within e^-{} of its maximum at {hi}", opts.tail_log_drop),
                });
            }
            hi = (hi + width).min(limit_hi);
        }
    };

    let atom_logs: Vec<(f64, f64)> = setup.atoms.iter().map(|&(x, la)| (x, la + setup.log_lik(x))).collect();
    let top = logs
        .iter()
        .cloned()
        .chain(atom_logs.iter().map(|a| a.1))
        .fold(f64::NEG_INFINITY, f64::max);
    let values: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let atom_vals: Vec<(f64, f64)> = atom_logs.iter().map(|&(x, l)| (x, (l - top).exp())).collect();

    // Integrability guard: the mass added by doubling the support must be
    // negligible.
    let base = grid.integrate_values(&values);
    let width = hi - lo;
    let n_side = opts.nodes / 2 + 1;
    let side_mass = |a: f64, b: f64| -> Result<f64> {
        let g = Grid::simpson(a, b, n_side)?;
        Ok(g.integrate_values(&evaluate(&g, &setup).iter().map(|l| (l - top).exp()).collect::<Vec<_>>()))
    };
    let extra_lo = side_mass(lo - 0.5 * width, lo)?;
    let extra_hi = side_mass(hi, hi + 0.5 * width)?;
    let atoms_total: f64 = atom_vals.iter().map(|a| a.1).sum();
    let z = base + atoms_total;
    if extra_lo + extra_hi > opts.improper_tolerance * z || !(extra_lo + extra_hi).is_finite() {
        return Err(Error::ImproperPosterior {
            tail: if extra_lo >= extra_hi { Tail::Lower } else { Tail::Upper },
            detail: format!(
                "normalization grows by {:.3e} (relative) when the support [{lo}, {hi}] is doubled",
                (extra_lo + extra_hi) / z
            ),
        });
    }

    PosteriorGrid::from_unnormalized(grid, values, atom_vals, top, setup.cusps.clone())
}

/// Unadjusted posterior `π(θ | y) ∝ π(θ) f(y | θ)`.
pub fn unadjusted_posterior(prior: &Prior, lik: &Likelihood, y: f64) -> Result<PosteriorGrid> {
    sa_posterior(&EffectKind::Random, prior, lik, &SelectionRule::All, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;
    use crate::numerics::special::normal_quantile;

    fn lik() -> Likelihood {
        Likelihood::standard()
    }

    fn mixed(gamma2: f64) -> EffectKind {
        EffectKind::Mixed {
            hyperprior: Prior::normal(0.0, 1.0 - gamma2).unwrap(),
            conditional: ConditionalPrior::NormalLocation { var: gamma2 },
        }
    }

    fn mean(kind: &EffectKind, prior: &Prior, rule: &SelectionRule, y: f64) -> f64 {
        sa_posterior(kind, prior, &lik(), rule, y).unwrap().mean()
    }

    #[test]
    fn positive_selection_triple() {
        let prior = Prior::normal(0.0, 1.0).unwrap();
        let rule = SelectionRule::OneSided { a: 0.0 };
        let r = mean(&EffectKind::Random, &prior, &rule, 1.0);
        let f = mean(&EffectKind::Fixed, &prior, &rule, 1.0);
        let m = mean(&mixed(0.5), &prior, &rule, 1.0);
        assert!((r - 0.5).abs() < 1e-6, "{r}");
        assert!((f - 0.0903).abs() < 1e-3, "{f}");
        assert!((m - 0.330).abs() < 1e-3, "{m}");
    }

    #[test]
    fn random_effects_ignore_selection() {
        let prior = Prior::example_mixture();
        let a = sa_posterior(&EffectKind::Random, &prior, &lik(), &SelectionRule::TwoSided { a: 3.111 }, 3.4).unwrap();
        let b = unadjusted_posterior(&prior, &lik(), 3.4).unwrap();
        for x in [-1.0, 0.0, 0.5, 2.0, 3.4, 5.0] {
            assert!((a.cdf(x) - b.cdf(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn normalization_is_one() {
        let rule = SelectionRule::TwoSided { a: 3.111 };
        for prior in [Prior::Flat, Prior::example_mixture(), Prior::normal(1.0, 2.0).unwrap()] {
            let p = sa_posterior(&EffectKind::Fixed, &prior, &lik(), &rule, 3.4).unwrap();
            assert!((p.total_mass() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn fixed_density_is_prior_times_truncated_likelihood() {
        let prior = Prior::normal(0.0, 1.0).unwrap();
        let rule = SelectionRule::OneSided { a: 0.0 };
        let p = sa_posterior(&EffectKind::Fixed, &prior, &lik(), &rule, 1.0).unwrap();
        let region = rule.region(&lik()).unwrap();
        let unnorm = |t: f64| prior.density(t) * crate::numerics::normal_pdf(1.0 - t) / region.normal_prob(t, 1.0);
        let ratio = p.density_at(0.3) / p.density_at(-0.7);
        assert!((ratio - unnorm(0.3) / unnorm(-0.7)).abs() < 1e-4 * ratio);
    }

    #[test]
    fn degenerate_conditional_reduces_to_fixed() {
        let hyper = Prior::normal(0.0, 1.0).unwrap();
        let kind = EffectKind::Mixed { hyperprior: hyper.clone(), conditional: ConditionalPrior::NormalLocation { var: 0.0 } };
        let rule = SelectionRule::OneSided { a: 0.0 };
        let a = mean(&kind, &hyper, &rule, 1.0);
        let b = mean(&EffectKind::Fixed, &hyper, &rule, 1.0);
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn point_mass_hyperprior_reduces_to_random() {
        let kind = EffectKind::Mixed {
            hyperprior: Prior::PointMass { at: 0.3 },
            conditional: ConditionalPrior::NormalLocation { var: 1.0 },
        };
        let rule = SelectionRule::OneSided { a: 0.0 };
        let a = mean(&kind, &Prior::Flat, &rule, 1.0);
        let b = mean(&EffectKind::Random, &Prior::normal(0.3, 1.0).unwrap(), &rule, 1.0);
        assert!((a - b).abs() < 1e-6, "{a} {b}");
    }

    #[test]
    fn one_sided_fixed_adjustment_decreases_stochastically() {
        let prior = Prior::normal(0.0, 1.0).unwrap();
        let rule = SelectionRule::OneSided { a: 0.5 };
        let fixed = sa_posterior(&EffectKind::Fixed, &prior, &lik(), &rule, 1.0).unwrap();
        let plain = unadjusted_posterior(&prior, &lik(), 1.0).unwrap();
        for i in 0..41 {
            let x = -4.0 + 0.2 * i as f64;
            assert!(fixed.cdf(x) >= plain.cdf(x) - 1e-9, "at {x}");
        }
    }

    #[test]
    fn truncation_summaries() {
        let rule = SelectionRule::TwoSided { a: 3.111 };
        let flat = sa_posterior(&EffectKind::Fixed, &Prior::Flat, &lik(), &rule, 3.4).unwrap().summarize(0.95).unwrap();
        assert!((flat.mean - 1.882).abs() < 2e-3 && (flat.mode - 0.738).abs() < 2e-3, "{flat:?}");
        assert!((flat.ci_lo + 0.039).abs() < 2e-3 && (flat.ci_hi - 4.642).abs() < 2e-3, "{flat:?}");
        let mix = sa_posterior(&EffectKind::Random, &Prior::example_mixture(), &lik(), &rule, 3.4)
            .unwrap()
            .summarize(0.95)
            .unwrap();
        assert!((mix.mean - 1.684).abs() < 2e-3 && (mix.mode - 2.40).abs() < 5e-3, "{mix:?}");
        assert!(mix.spikes.contains(&0.0));
    }

    #[test]
    fn one_sided_flat_posterior_has_heavy_left_tail() {
        let p = sa_posterior(&EffectKind::Fixed, &Prior::Flat, &lik(), &SelectionRule::OneSided { a: 3.111 }, 3.4).unwrap();
        let s = p.summarize(0.95).unwrap();
        assert!((s.mean + 2.888).abs() < 5e-3, "{s:?}");
        assert!((s.mode - 0.193).abs() < 5e-3, "{s:?}");
        let ratio = p.density_at(-5.87) / p.density_at(3.4);
        assert!((ratio - 1.0).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn flat_prior_at_threshold_is_improper() {
        let r = sa_posterior(&EffectKind::Fixed, &Prior::Flat, &lik(), &SelectionRule::OneSided { a: 3.111 }, 3.111);
        assert!(matches!(r, Err(Error::ImproperPosterior { tail: Tail::Lower, .. })), "{r:?}");
    }

    #[test]
    fn unselected_observation_is_rejected() {
        let r = sa_posterior(&EffectKind::Fixed, &Prior::Flat, &lik(), &SelectionRule::TwoSided { a: 3.111 }, 1.0);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn fixed_mean_matches_rejection_sampling() {
        // θ ~ N(0,1) held fixed, y redrawn until y ≥ 0; keep pairs with y near 1.
        let prior = Prior::normal(0.0, 1.0).unwrap();
        let rule = SelectionRule::OneSided { a: 0.0 };
        let target = mean(&EffectKind::Fixed, &prior, &rule, 1.0);
        let mut rng = RngStream::new(2024, 0);
        let h = 0.05;
        let (mut sw, mut sw2, mut swt, mut swt2) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..400_000 {
            let theta = normal_quantile(rng.uniform_open()).unwrap();
            let p0 = crate::numerics::normal_cdf(-theta);
            let u = p0 + (1.0 - p0) * rng.uniform_open();
            let y = theta + normal_quantile(u.min(1.0 - 1e-16)).unwrap();
            let z = (y - 1.0) / h;
            let w = (-0.5 * z * z).exp();
            sw += w;
            sw2 += w * w;
            swt += w * theta;
            swt2 += w * theta * theta;
        }
        let m = swt / sw;
        let var = swt2 / sw - m * m;
        let ess = sw * sw / sw2;
        let se = (var / ess).sqrt();
        assert!((m - target).abs() < 3.0 * se + 0.005, "{m} vs {target} (se {se})");
    }
}
