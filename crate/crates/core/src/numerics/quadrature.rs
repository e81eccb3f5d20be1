use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Trapezoid,
    /// Composite Simpson on every segment between breakpoints.
    Simpson,
}

/// Quadrature nodes and weights on `[lo, hi]`.
///
/// Grids can be assembled from segments joined at breakpoints, so that
/// kinks of an integrand (the cusp of a Laplace prior, the edge of a loss
/// region) fall on nodes and each segment integrates a smooth piece.
#[derive(Debug, Clone, Serialize)]
pub struct Grid {
    lo: f64,
    hi: f64,
    scheme: Scheme,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Grid {
    /// Uniform trapezoid grid with `n ≥ 2` nodes.
    pub fn trapezoid(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::segmented(&[lo, hi], n, Scheme::Trapezoid)
    }

    /// Uniform composite Simpson grid; `n` is rounded up to odd.
    pub fn simpson(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::segmented(&[lo, hi], n, Scheme::Simpson)
    }

    /// Grid over `[breaks[0], breaks[last]]` with roughly `n` nodes in total,
    /// every interior break being a node. Each segment gets at least two
    /// intervals (an even count under Simpson).
    pub fn segmented(breaks: &[f64], n: usize, scheme: Scheme) -> Result<Self> {
        if breaks.len() < 2 {
            return Err(Error::Domain("grid needs at least two breakpoints".into()));
        }
        if breaks.iter().any(|b| !b.is_finite()) {
            return Err(Error::Domain("grid breakpoints must be finite".into()));
        }
        if breaks.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain(format!(
                "grid breakpoints must be strictly increasing: {breaks:?}"
            )));
        }
        if n < 2 {
            return Err(Error::Domain("grid needs at least two nodes".into()));
        }
        let lo = breaks[0];
        let hi = *breaks.last().unwrap();
        let span = hi - lo;
        let intervals_total = (n - 1).max(1) as f64;
        let mut nodes = vec![lo];
        let mut weights = vec![0.0];
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mut k = ((b - a) / span * intervals_total).round().max(2.0) as usize;
            if scheme == Scheme::Simpson && k % 2 == 1 {
                k += 1;
            }
            let h = (b - a) / k as f64;
            let start = weights.len() - 1;
            for j in 1..=k {
                nodes.push(if j == k { b } else { a + h * j as f64 });
                weights.push(0.0);
            }
            match scheme {
                Scheme::Trapezoid => {
                    for j in 0..k {
                        weights[start + j] += 0.5 * h;
                        weights[start + j + 1] += 0.5 * h;
                    }
                }
                Scheme::Simpson => {
                    for j in (0..k).step_by(2) {
                        weights[start + j] += h / 3.0;
                        weights[start + j + 1] += 4.0 * h / 3.0;
                        weights[start + j + 2] += h / 3.0;
                    }
                }
            }
        }
        Ok(Grid {
            lo,
            hi,
            scheme,
            nodes,
            weights,
        })
    }

    /// Grid with the same number of intervals, `per_segment`, between each
    /// pair of consecutive breakpoints. Short segments around sharp features
    /// therefore get proportionally finer spacing.
    pub fn uniform_per_segment(breaks: &[f64], per_segment: usize, scheme: Scheme) -> Result<Self> {
        if breaks.len() < 2 {
            return Err(Error::Domain("grid needs at least two breakpoints".into()));
        }
        let span = breaks[breaks.len() - 1] - breaks[0];
        let mut out: Option<Grid> = None;
        for w in breaks.windows(2) {
            let seg = Self::segmented(w, per_segment.max(2) + 1, scheme)?;
            out = Some(match out {
                None => seg,
                Some(mut g) => {
                    let join = g.weights.len() - 1;
                    g.weights[join] += seg.weights[0];
                    g.nodes.extend_from_slice(&seg.nodes[1..]);
                    g.weights.extend_from_slice(&seg.weights[1..]);
                    g.hi = seg.hi;
                    g
                }
            });
        }
        let g = out.unwrap();
        debug_assert!((g.hi - g.lo - span).abs() <= 1e-12 * span.abs().max(1.0));
        Ok(g)
    }

    /// Like [`Grid::segmented`] over `[lo, hi]`, inserting every point of
    /// `extra` that lies strictly inside as a breakpoint.
    pub fn with_breaks(lo: f64, hi: f64, extra: &[f64], n: usize, scheme: Scheme) -> Result<Self> {
        let mut breaks = vec![lo, hi];
        let min_gap = (hi - lo) * 1e-9;
        for &b in extra {
            if b > lo + min_gap && b < hi - min_gap {
                breaks.push(b);
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|a, b| (*a - *b).abs() <= min_gap);
        Self::segmented(&breaks, n, scheme)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weighted sum of precomputed node values.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.nodes.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// Index of the node closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        match self.nodes.binary_search_by(|n| n.total_cmp(&x)) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= self.nodes.len() => self.nodes.len() - 1,
            Err(i) => {
                if x - self.nodes[i - 1] < self.nodes[i] - x {
                    i - 1
                } else {
                    i
                }
            }
        }
    }

    /// Single-segment grid over the same range and scheme with twice the
    /// node count.
    pub fn refined(&self) -> Result<Self> {
        Self::segmented(&[self.lo, self.hi], 2 * self.nodes.len() - 1, self.scheme)
    }
}

/// Integrate `f` over `grid`, failing on the first non-finite node value.
pub fn integrate<F: Fn(f64) -> f64>(f: F, grid: &Grid) -> Result<f64> {
    let mut acc = 0.0;
    for (&x, &w) in grid.nodes.iter().zip(&grid.weights) {
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::NonFinite { at: x, value: v });
        }
        acc += w * v;
    }
    Ok(acc)
}

/// Result of integrating on a grid and on its doubled refinement.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RichardsonCheck {
    pub coarse: f64,
    pub fine: f64,
    /// `|fine − coarse| / max(|fine|, tiny)`.
    pub relative_change: f64,
    /// Extrapolated value assuming the scheme's leading error order.
    pub extrapolated: f64,
}

pub fn richardson_check<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize, scheme: Scheme) -> Result<RichardsonCheck> {
    let coarse_grid = Grid::segmented(&[lo, hi], n, scheme)?;
    let fine_grid = Grid::segmented(&[lo, hi], 2 * n - 1, scheme)?;
    let coarse = integrate(&f, &coarse_grid)?;
    let fine = integrate(&f, &fine_grid)?;
    let order = match scheme {
        Scheme::Trapezoid => 4.0,
        Scheme::Simpson => 16.0,
    };
    Ok(RichardsonCheck {
        coarse,
        fine,
        relative_change: (fine - coarse).abs() / fine.abs().max(f64::MIN_POSITIVE),
        extrapolated: fine + (fine - coarse) / (order - 1.0),
    })
}

/// Running integral of node values on `grid`, `out[0] = 0`, consistent with
/// the grid's own weights: the last entry equals `integrate_values`.
///
/// Simpson grids have an even number of intervals per segment, so panels
/// start at even indices; the midpoint of each panel uses the
/// `h/12·(5f₀ + 8f₁ − f₂)` partial rule.
pub fn cumulative(grid: &Grid, values: &[f64]) -> Vec<f64> {
    match grid.scheme {
        Scheme::Trapezoid => cumulative_trapezoid(&grid.nodes, values),
        Scheme::Simpson => {
            let x = &grid.nodes;
            let mut out = vec![0.0; x.len()];
            let mut j = 0;
            while j + 2 < x.len() {
                let h = 0.5 * (x[j + 2] - x[j]);
                let (f0, f1, f2) = (values[j], values[j + 1], values[j + 2]);
                out[j + 1] = out[j] + h / 12.0 * (5.0 * f0 + 8.0 * f1 - f2);
                out[j + 2] = out[j] + h / 3.0 * (f0 + 4.0 * f1 + f2);
                j += 2;
            }
            out
        }
    }
}

/// Cumulative trapezoid integral of node values; `out[0] = 0`.
pub fn cumulative_trapezoid(nodes: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(nodes.len());
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..nodes.len() {
        acc += 0.5 * (nodes[i] - nodes[i - 1]) * (values[i] + values[i - 1]);
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::special::normal_pdf;
    use proptest::prelude::*;

    #[test]
    fn weights_sum_to_span() {
        for scheme in [Scheme::Trapezoid, Scheme::Simpson] {
            let g = Grid::with_breaks(-3.0, 7.5, &[0.0, 2.0], 1001, scheme).unwrap();
            let s: f64 = g.weights().iter().sum();
            assert!((s - 10.5).abs() <= 1e-12 * 10.5);
            assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
            assert_eq!(g.nodes()[0], -3.0);
            assert_eq!(*g.nodes().last().unwrap(), 7.5);
            assert!(g.nodes().contains(&0.0));
        }
    }

    #[test]
    fn per_segment_grid_joins_cleanly() {
        let g = Grid::uniform_per_segment(&[-4.0, -0.5, 0.0, 0.5, 4.0], 400, Scheme::Simpson).unwrap();
        assert_eq!(g.len(), 1601);
        let s: f64 = g.weights().iter().sum();
        assert!((s - 8.0).abs() < 1e-12);
        let v = integrate(|x| (-10.0 * x.abs()).exp(), &g).unwrap();
        assert!((v - 0.2 * (1.0 - (-40.0f64).exp())).abs() < 1e-9, "{v}");
    }

    #[test]
    fn cumulative_matches_total_and_cdf() {
        let g = Grid::with_breaks(-9.0, 9.0, &[0.0, 1.3], 3001, Scheme::Simpson).unwrap();
        let v: Vec<f64> = g.nodes().iter().map(|&x| normal_pdf(x)).collect();
        let c = cumulative(&g, &v);
        assert!((c[c.len() - 1] - g.integrate_values(&v)).abs() < 1e-13);
        for (i, &x) in g.nodes().iter().enumerate().step_by(37) {
            let exact = crate::numerics::special::normal_cdf(x) - crate::numerics::special::normal_cdf(-9.0);
            assert!((c[i] - exact).abs() < 1e-9, "{x}: {} vs {exact}", c[i]);
        }
    }

    #[test]
    fn standard_normal_mass() {
        let g = Grid::trapezoid(-10.0, 10.0, 4001).unwrap();
        let v = integrate(normal_pdf, &g).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_integrand() {
        let g = Grid::trapezoid(0.0, 2.0, 11).unwrap();
        assert!((integrate(|_| 1.0, &g).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn non_finite_reports_location() {
        let g = Grid::trapezoid(-1.0, 1.0, 5).unwrap();
        match integrate(|x| if x == 0.0 { f64::NAN } else { 1.0 }, &g) {
            Err(Error::NonFinite { at, .. }) => assert_eq!(at, 0.0),
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn doubling_is_stable_for_smooth_integrands() {
        let chk = richardson_check(|x: f64| (-x * x).exp() * (1.0 + x.sin()), -8.0, 8.0, 4001, Scheme::Trapezoid).unwrap();
        assert!(chk.relative_change <= 1e-8, "{chk:?}");
    }

    #[test]
    fn bad_grids_rejected() {
        assert!(Grid::trapezoid(1.0, 1.0, 10).is_err());
        assert!(Grid::trapezoid(0.0, 1.0, 1).is_err());
        assert!(Grid::segmented(&[0.0, f64::INFINITY], 10, Scheme::Simpson).is_err());
    }

    proptest! {
        #[test]
        fn integration_is_linear(a in -5.0f64..5.0, b in -5.0f64..5.0, shift in -2.0f64..2.0) {
            let g = Grid::simpson(-6.0, 6.0, 801).unwrap();
            let f = |x: f64| normal_pdf(x - shift);
            let h = |x: f64| (x * 0.3).cos();
            let lhs = integrate(|x| a * f(x) + b * h(x), &g).unwrap();
            let rhs = a * integrate(f, &g).unwrap() + b * integrate(h, &g).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (lhs.abs().max(1.0)));
        }
    }
}
