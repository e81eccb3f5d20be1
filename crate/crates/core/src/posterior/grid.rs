use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::quadrature::{cumulative, Grid};

/// A normalized posterior on a one-dimensional grid, possibly with atoms.
#[derive(Debug, Clone, Serialize)]
pub struct PosteriorGrid {
    #[serde(skip)]
    grid: Grid,
    #[serde(skip)]
    density: Vec<f64>,
    atoms: Vec<(f64, f64)>,
    log_normalization: f64,
    /// Locations where the density has a kink (prior cusps).
    cusps: Vec<f64>,
    #[serde(skip)]
    cdf: Vec<f64>,
}

/// Point and interval summaries of a posterior.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    /// Highest smooth local maximum of the continuous density.
    pub mode: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub level: f64,
    /// Mass on θ > 0.
    pub tail_prob_pos: f64,
    /// Mass on θ < 0.
    pub tail_prob_neg: f64,
    /// Local maxima sitting on a cusp of the density, reported apart from the mode.
    pub spikes: Vec<f64>,
    pub atoms: Vec<(f64, f64)>,
}

impl PosteriorGrid {
    /// Build from unnormalized node values (linear scale, already divided by
    /// `exp(log_scale)`) and unnormalized atom weights on the same scale.
    pub fn from_unnormalized(
        grid: Grid,
        values: Vec<f64>,
        atoms: Vec<(f64, f64)>,
        log_scale: f64,
        cusps: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Domain("density length does not match grid".into()));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::NonFinite { at: grid.nodes()[i], value: *v });
        }
        let cont = grid.integrate_values(&values);
        let atom_total: f64 = atoms.iter().map(|a| a.1).sum();
        let z = cont + atom_total;
        if !(z > 0.0 && z.is_finite()) {
            return Err(Error::Numeric(format!("posterior normalization is {z}")));
        }
        let density: Vec<f64> = values.iter().map(|v| v / z).collect();
        let mut atoms: Vec<(f64, f64)> = atoms.into_iter().map(|(x, m)| (x, m / z)).filter(|a| a.1 > 0.0).collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut cdf = cumulative(&grid, &density);
        // fold atoms into the running mass (right-continuous at their nodes)
        for &(x, m) in &atoms {
            let i = grid.nearest(x);
            for c in &mut cdf[i..] {
                *c += m;
            }
        }
        Ok(PosteriorGrid {
            grid,
            density,
            atoms,
            log_normalization: log_scale + z.ln(),
            cusps,
            cdf,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn nodes(&self) -> &[f64] {
        self.grid.nodes()
    }

    /// Normalized continuous density at the nodes.
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn log_normalization(&self) -> f64 {
        self.log_normalization
    }

    /// Pre-normalization integral. May overflow or underflow for extreme
    /// data; prefer [`PosteriorGrid::log_normalization`].
    pub fn normalization(&self) -> f64 {
        self.log_normalization.exp()
    }

    /// Total mass, continuous part plus atoms. One up to rounding.
    pub fn total_mass(&self) -> f64 {
        self.grid.integrate_values(&self.density) + self.atoms.iter().map(|a| a.1).sum::<f64>()
    }

    /// Posterior density at `x` by linear interpolation between nodes.
    pub fn density_at(&self, x: f64) -> f64 {
        let nodes = self.grid.nodes();
        if x < nodes[0] || x > nodes[nodes.len() - 1] {
            return 0.0;
        }
        let i = nodes.partition_point(|&n| n < x);
        if i == 0 {
            return self.density[0];
        }
        let (x0, x1) = (nodes[i - 1], nodes[i]);
        let t = (x - x0) / (x1 - x0);
        self.density[i - 1] * (1.0 - t) + self.density[i] * t
    }

    pub fn mean(&self) -> f64 {
        let vals: Vec<f64> = self.grid.nodes().iter().zip(&self.density).map(|(x, d)| x * d).collect();
        self.grid.integrate_values(&vals) + self.atoms.iter().map(|(x, m)| x * m).sum::<f64>()
    }

    /// Expectation of `f` under the posterior.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let vals: Vec<f64> = self.grid.nodes().iter().zip(&self.density).map(|(&x, d)| f(x) * d).collect();
        self.grid.integrate_values(&vals) + self.atoms.iter().map(|&(x, m)| f(x) * m).sum::<f64>()
    }

    fn atom_mass_at(&self, x: f64) -> f64 {
        self.atoms.iter().filter(|a| a.0 == x).map(|a| a.1).sum()
    }

    /// Within-interval fraction of mass up to local coordinate `t ∈ [0, 1]`,
    /// treating the density as linear between the two nodes.
    fn partial(d0: f64, d1: f64, t: f64) -> f64 {
        let avg = 0.5 * (d0 + d1);
        if avg <= 0.0 {
            return t;
        }
        (d0 * t + 0.5 * (d1 - d0) * t * t) / avg
    }

    /// `Pr(θ ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let nodes = self.grid.nodes();
        let n = nodes.len();
        if x < nodes[0] {
            return self.atoms.iter().filter(|a| a.0 <= x).map(|a| a.1).sum();
        }
        if x >= nodes[n - 1] {
            return self.cdf[n - 1] + self.atoms.iter().filter(|a| a.0 > nodes[n - 1] && a.0 <= x).map(|a| a.1).sum::<f64>();
        }
        let i = nodes.partition_point(|&v| v <= x);
        // nodes[i-1] <= x < nodes[i]
        let (x0, x1) = (nodes[i - 1], nodes[i]);
        let jump = self.atom_mass_at(x1);
        let mass = self.cdf[i] - jump - self.cdf[i - 1];
        let t = (x - x0) / (x1 - x0);
        self.cdf[i - 1] + mass * Self::partial(self.density[i - 1], self.density[i], t)
    }

    /// Smallest `x` with `Pr(θ ≤ x) ≥ p`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {p}")));
        }
        let nodes = self.grid.nodes();
        let i = self.cdf.partition_point(|&c| c < p);
        if i == 0 {
            return Ok(nodes[0]);
        }
        if i >= nodes.len() {
            return Ok(nodes[nodes.len() - 1]);
        }
        let jump = self.atom_mass_at(nodes[i]);
        let before_jump = self.cdf[i] - jump;
        if p >= before_jump {
            return Ok(nodes[i]);
        }
        let mass = before_jump - self.cdf[i - 1];
        if mass <= 0.0 {
            return Ok(nodes[i]);
        }
        let target = (p - self.cdf[i - 1]) / mass;
        let (d0, d1) = (self.density[i - 1], self.density[i]);
        let avg = 0.5 * (d0 + d1);
        // solve d0·t + (d1 − d0)·t²/2 = target·avg for t ∈ [0, 1]
        let a = 0.5 * (d1 - d0);
        let b = d0;
        let c = -target * avg;
        let t = if a.abs() < 1e-14 * b.abs().max(1e-300) {
            if b > 0.0 {
                -c / b
            } else {
                target
            }
        } else {
            let disc = (b * b - 4.0 * a * c).max(0.0);
            // numerically stable root in [0, 1]
            2.0 * (-c) / (b + disc.sqrt())
        };
        let t = t.clamp(0.0, 1.0);
        Ok(nodes[i - 1] + t * (nodes[i] - nodes[i - 1]))
    }

    /// Local maxima of the continuous density as `(location, density, on_cusp)`.
    pub fn local_maxima(&self) -> Vec<(f64, f64, bool)> {
        let x = self.grid.nodes();
        let d = &self.density;
        let n = x.len();
        let scale = d.iter().cloned().fold(0.0, f64::max);
        let mut out = Vec::new();
        if scale <= 0.0 {
            return out;
        }
        let is_cusp = |v: f64| self.cusps.iter().any(|&c| (c - v).abs() <= 1e-12 * (1.0 + c.abs()));
        for i in 0..n {
            let left_ok = i == 0 || d[i] > d[i - 1] || (d[i] == d[i - 1] && i > 1 && d[i - 1] > d[i - 2]);
            let right_ok = i + 1 == n || d[i] >= d[i + 1];
            if !(left_ok && right_ok) || d[i] < 1e-12 * scale {
                continue;
            }
            if i == 0 || i + 1 == n {
                // boundary maxima only count when nothing decays past them
                out.push((x[i], d[i], false));
                continue;
            }
            if is_cusp(x[i]) {
                out.push((x[i], d[i], true));
                continue;
            }
            // three-point parabola through (x[i-1], x[i], x[i+1])
            let (x0, x1, x2) = (x[i - 1], x[i], x[i + 1]);
            let (y0, y1, y2) = (d[i - 1], d[i], d[i + 1]);
            let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
            let a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
            let b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
            let v = if a < 0.0 { (-b / (2.0 * a)).clamp(x0, x2) } else { x1 };
            out.push((v, d[i], false));
        }
        out
    }

    pub fn summarize(&self, level: f64) -> Result<Summary> {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::Domain(format!("credible level must lie in (0, 1), got {level}")));
        }
        let alpha = 1.0 - level;
        let ci_lo = self.quantile(0.5 * alpha)?;
        let ci_hi = self.quantile(1.0 - 0.5 * alpha)?;
        let maxima = self.local_maxima();
        let smooth = maxima
            .iter()
            .filter(|m| !m.2)
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|m| m.0);
        let global = maxima.iter().max_by(|a, b| a.1.total_cmp(&b.1)).map(|m| m.0);
        let mode = smooth.or(global).unwrap_or_else(|| self.mean());
        let spikes = maxima.iter().filter(|m| m.2).map(|m| m.0).collect();
        let at0 = self.atom_mass_at(0.0);
        let le0 = self.cdf(0.0);
        Ok(Summary {
            mean: self.mean(),
            mode,
            ci_lo,
            ci_hi,
            level,
            tail_prob_pos: (1.0 - le0).clamp(0.0, 1.0),
            tail_prob_neg: (le0 - at0).clamp(0.0, 1.0),
            spikes,
            atoms: self.atoms.clone(),
        })
    }
}

/// Free-function form of [`PosteriorGrid::summarize`].
pub fn summarize(post: &PosteriorGrid, level: f64) -> Result<Summary> {
    post.summarize(level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quadrature::Scheme;
    use crate::numerics::special::{normal_cdf, normal_pdf, normal_quantile};

    fn normal_grid(mean: f64, var: f64) -> PosteriorGrid {
        let sd = var.sqrt();
        let g = Grid::with_breaks(mean - 12.0 * sd, mean + 12.0 * sd, &[0.0, mean], 4001, Scheme::Simpson).unwrap();
        let v = g.nodes().iter().map(|&x| normal_pdf((x - mean) / sd)).collect();
        PosteriorGrid::from_unnormalized(g, v, vec![], 0.0, vec![]).unwrap()
    }

    #[test]
    fn normal_summary() {
        let p = normal_grid(0.5, 0.5);
        let s = p.summarize(0.95).unwrap();
        let half = normal_quantile(0.975).unwrap() * 0.5f64.sqrt();
        assert!((s.mean - 0.5).abs() < 1e-10);
        assert!((s.mode - 0.5).abs() < 1e-6);
        assert!((s.ci_lo - (0.5 - half)).abs() < 1e-5, "{}", s.ci_lo);
        assert!((s.ci_hi - (0.5 + half)).abs() < 1e-5, "{}", s.ci_hi);
        assert!((p.cdf(s.ci_hi) - p.cdf(s.ci_lo) - 0.95).abs() < 1e-6);
        assert!((s.tail_prob_neg - normal_cdf(-0.5 / 0.5f64.sqrt())).abs() < 1e-8);
        assert!((p.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn atoms_enter_cdf_and_quantiles() {
        let g = Grid::with_breaks(-10.0, 10.0, &[0.0], 4001, Scheme::Simpson).unwrap();
        let v = g.nodes().iter().map(|&x| normal_pdf(x - 2.0)).collect();
        let p = PosteriorGrid::from_unnormalized(g, v, vec![(0.0, 1.0)], 0.0, vec![]).unwrap();
        // half the mass sits on the atom
        assert!((p.atoms()[0].1 - 0.5).abs() < 1e-12);
        let below = 0.5 * normal_cdf(-2.0);
        assert!((p.cdf(0.0) - (below + 0.5)).abs() < 1e-9);
        assert_eq!(p.quantile(0.3).unwrap(), 0.0);
        let s = p.summarize(0.95).unwrap();
        assert!((s.tail_prob_neg - below).abs() < 1e-9);
        assert!((s.mean - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bad_level() {
        let p = normal_grid(0.0, 1.0);
        assert!(p.summarize(1.0).is_err());
        assert!(p.summarize(0.0).is_err());
    }

    #[test]
    fn cusp_maximum_is_a_spike() {
        let g = Grid::with_breaks(-6.0, 10.0, &[0.0], 8001, Scheme::Simpson).unwrap();
        let v = g
            .nodes()
            .iter()
            .map(|&x: &f64| (4.5 * (-10.0 * x.abs()).exp() + 0.05 * (-x.abs()).exp()) * normal_pdf(3.4 - x))
            .collect();
        let p = PosteriorGrid::from_unnormalized(g, v, vec![], 0.0, vec![0.0]).unwrap();
        let s = p.summarize(0.95).unwrap();
        assert_eq!(s.spikes, vec![0.0]);
        assert!((s.mode - 2.4).abs() < 1e-3, "{}", s.mode);
    }
}
