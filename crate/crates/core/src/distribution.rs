//! Single-bidder value priors and virtual values with a constant burn.
//!
//! A prior is either continuous (closed-form pdf/cdf on a bounded support,
//! possibly piecewise with declared breakpoints) or discrete (finitely many
//! point masses). The virtual value with burn `beta` is
//! `phi_beta(v) = v - (1 - F(v)) / f(v) - beta`; for discrete priors the
//! point-mass analogue `v_i - (v_{i+1} - v_i) * s_{i+1} / w_i` is used.

use crate::error::{Error, Result};
use crate::numeric::{bisect, integrate_split, linspace, QUAD_TOL};

/// Default number of grid points for scans over the support.
pub const DEFAULT_GRID_POINTS: usize = 10_000;
/// Bisection tolerance used when refining virtual-value roots.
pub const ROOT_TOL: f64 = 1e-9;
/// Slack absorbed when testing monotonicity of the virtual value.
pub const REGULARITY_SLACK: f64 = 1e-9;

/// One piece of a piecewise-constant density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityPiece {
    pub lo: f64,
    pub hi: f64,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ContinuousFamily {
    Uniform,
    /// `F(v) = (a/2) v - (b/3) v^2 + (c/4) v^3`, so that `phi_0 f = c v^3 - b v^2 + a v - 1`.
    CubicPoly {
        a: f64,
        b: f64,
        c: f64,
    },
    /// Equal-revenue density `1/(z+1)^2` on `[0, T]` followed by a flat top on `(T, T+eps]`.
    TruncEqualRevenue {
        t: f64,
        eps: f64,
    },
    /// Exponential with the given rate, renormalised to `[0, hi]`.
    TruncExponential {
        rate: f64,
    },
    /// Piecewise-constant density; gaps between pieces carry zero density.
    Piecewise {
        pieces: Vec<DensityPiece>,
    },
}

/// A continuous prior on a bounded support `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousDistribution {
    lo: f64,
    hi: f64,
    family: ContinuousFamily,
    breakpoints: Vec<f64>,
}

/// A labelled sub-interval of the support with a single analytic form.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    pub form: String,
}

impl ContinuousDistribution {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo) {
            return Err(Error::InvalidDistribution(format!(
                "uniform support [{lo}, {hi}] must satisfy 0 <= lo < hi < inf"
            )));
        }
        Self::from_family(lo, hi, ContinuousFamily::Uniform, Vec::new())
    }

    pub fn truncated_exponential(rate: f64, hi: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite() && hi > 0.0 && hi.is_finite()) {
            return Err(Error::InvalidDistribution(format!(
                "truncated exponential needs rate > 0 and hi > 0, got rate={rate}, hi={hi}"
            )));
        }
        Self::from_family(0.0, hi, ContinuousFamily::TruncExponential { rate }, Vec::new())
    }

    /// Piecewise-constant density. Pieces must be sorted, non-overlapping and
    /// integrate to one.
    pub fn piecewise(pieces: Vec<DensityPiece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidDistribution("piecewise density has no pieces".into()));
        }
        for p in &pieces {
            if !(p.lo.is_finite() && p.hi.is_finite() && p.lo >= 0.0 && p.hi > p.lo && p.density >= 0.0) {
                return Err(Error::InvalidDistribution(format!(
                    "bad piece [{}, {}] with density {}",
                    p.lo, p.hi, p.density
                )));
            }
        }
        for w in pieces.windows(2) {
            if w[1].lo < w[0].hi {
                return Err(Error::InvalidDistribution(format!(
                    "pieces overlap or are unsorted at {}",
                    w[1].lo
                )));
            }
        }
        let lo = pieces[0].lo;
        let hi = pieces[pieces.len() - 1].hi;
        let mut breaks = Vec::new();
        for p in &pieces {
            for x in [p.lo, p.hi] {
                if x > lo && x < hi && breaks.last() != Some(&x) {
                    breaks.push(x);
                }
            }
        }
        Self::from_family(lo, hi, ContinuousFamily::Piecewise { pieces }, breaks)
    }

    /// Builds and validates a distribution. Used by the constructors here and
    /// in `constructions`.
    pub(crate) fn from_family(lo: f64, hi: f64, family: ContinuousFamily, breakpoints: Vec<f64>) -> Result<Self> {
        let d = ContinuousDistribution {
            lo,
            hi,
            family,
            breakpoints,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn family(&self) -> &ContinuousFamily {
        &self.family
    }

    /// Interior points where the density is discontinuous.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> Vec<Piece> {
        let piece = |lo: f64, hi: f64, form: &str| Piece {
            lo,
            hi,
            form: form.to_string(),
        };
        match &self.family {
            ContinuousFamily::Uniform => vec![piece(self.lo, self.hi, "constant")],
            ContinuousFamily::CubicPoly { .. } => vec![piece(self.lo, self.hi, "cubic cdf")],
            ContinuousFamily::TruncExponential { .. } => vec![piece(self.lo, self.hi, "exponential")],
            ContinuousFamily::TruncEqualRevenue { t, eps } => {
                vec![piece(0.0, *t, "1/(z+1)^2"), piece(*t, t + eps, "constant")]
            }
            ContinuousFamily::Piecewise { pieces } => pieces.iter().map(|p| piece(p.lo, p.hi, "constant")).collect(),
        }
    }

    pub fn pdf(&self, v: f64) -> f64 {
        if v < self.lo || v > self.hi {
            return 0.0;
        }
        match &self.family {
            ContinuousFamily::Uniform => 1.0 / (self.hi - self.lo),
            ContinuousFamily::CubicPoly { a, b, c } => a / 2.0 - 2.0 * b / 3.0 * v + 3.0 * c / 4.0 * v * v,
            ContinuousFamily::TruncEqualRevenue { t, eps } => {
                if v <= *t {
                    1.0 / ((v + 1.0) * (v + 1.0))
                } else {
                    1.0 / (eps * (t + 1.0))
                }
            }
            ContinuousFamily::TruncExponential { rate } => rate * (-rate * v).exp() / (1.0 - (-rate * self.hi).exp()),
            ContinuousFamily::Piecewise { pieces } => pieces
                .iter()
                .find(|p| v >= p.lo && v <= p.hi)
                .map_or(0.0, |p| p.density),
        }
    }

    pub fn cdf(&self, v: f64) -> f64 {
        if v <= self.lo {
            return 0.0;
        }
        if v >= self.hi {
            return 1.0;
        }
        match &self.family {
            ContinuousFamily::Uniform => (v - self.lo) / (self.hi - self.lo),
            ContinuousFamily::CubicPoly { a, b, c } => a / 2.0 * v - b / 3.0 * v * v + c / 4.0 * v * v * v,
            ContinuousFamily::TruncEqualRevenue { t, eps } => {
                if v <= *t {
                    1.0 - 1.0 / (v + 1.0)
                } else {
                    t / (t + 1.0) + (v - t) / (eps * (t + 1.0))
                }
            }
            ContinuousFamily::TruncExponential { rate } => (1.0 - (-rate * v).exp()) / (1.0 - (-rate * self.hi).exp()),
            ContinuousFamily::Piecewise { pieces } => {
                pieces.iter().map(|p| p.density * (v.min(p.hi) - p.lo).max(0.0)).sum()
            }
        }
    }

    /// `P(v >= rho)`. The cdf is continuous, so this is `1 - F(rho)`.
    pub fn prob_at_least(&self, rho: f64) -> f64 {
        (1.0 - self.cdf(rho)).clamp(0.0, 1.0)
    }

    /// Integral of `g(v) f(v)` over `[a, b]` intersected with the support.
    pub fn integrate_against_pdf<G: Fn(f64) -> f64>(&self, g: G, a: f64, b: f64) -> f64 {
        let a = a.max(self.lo);
        let b = b.min(self.hi);
        if b <= a {
            return 0.0;
        }
        integrate_split(&|v| g(v) * self.pdf(v), a, b, &self.breakpoints, QUAD_TOL)
    }

    /// Virtual value with constant burn.
    pub fn virtual_value(&self, beta: f64, v: f64) -> Result<f64> {
        if v < self.lo || v > self.hi {
            return Err(Error::InvalidParams(format!(
                "v = {v} lies outside the support [{}, {}]",
                self.lo, self.hi
            )));
        }
        let f = self.pdf(v);
        if f <= 0.0 {
            return Err(Error::ZeroDensity { at: v });
        }
        Ok(v - (1.0 - self.cdf(v)) / f - beta)
    }

    /// `phi_beta(v) f(v) = v f(v) - (1 - F(v)) - beta f(v)`, defined
    /// everywhere on the support including zero-density points.
    pub fn adjusted_virtual_value(&self, beta: f64, v: f64) -> f64 {
        let f = self.pdf(v);
        (v - beta) * f - (1.0 - self.cdf(v))
    }

    pub fn virtual_value_curve(&self, beta: f64) -> VirtualValueCurve<'_> {
        VirtualValueCurve {
            dist: self,
            burn: beta,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }

    /// True iff `phi_0` is non-decreasing on a scan of the support.
    pub fn is_regular(&self) -> Result<bool> {
        self.virtual_value_curve(0.0).is_monotone()
    }

    /// Scan points on the support, segmented at breakpoints. Points that
    /// coincide with a breakpoint are nudged inside their segment so that
    /// one-sided values are seen on both sides of a jump.
    pub(crate) fn scan_segments(&self, n: usize) -> Vec<Vec<f64>> {
        let mut edges = vec![self.lo];
        edges.extend(self.breakpoints.iter().copied());
        edges.push(self.hi);
        let width = self.hi - self.lo;
        let mut segments = Vec::with_capacity(edges.len() - 1);
        for (k, w) in edges.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let share = (((b - a) / width) * n as f64).ceil().max(2.0) as usize;
            let mut pts = linspace(a, b, share);
            let nudge = (b - a) * 1e-12;
            if k > 0 {
                pts[0] = a + nudge;
            }
            if k + 2 < edges.len() {
                let last = pts.len() - 1;
                pts[last] = b - nudge;
            }
            segments.push(pts);
        }
        segments
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.hi > self.lo && self.lo >= 0.0) {
            return Err(Error::InvalidDistribution(format!(
                "support [{}, {}] must be bounded with 0 <= lo < hi",
                self.lo, self.hi
            )));
        }
        // Evaluate the formula at the endpoints, not the clamped cdf.
        let raw_lo = self.raw_cdf(self.lo);
        let raw_hi = self.raw_cdf(self.hi);
        if raw_lo.abs() > 1e-7 || (raw_hi - 1.0).abs() > 1e-7 {
            return Err(Error::InvalidDistribution(format!(
                "cdf must run from 0 to 1 on the support, got F(lo)={raw_lo}, F(hi)={raw_hi}"
            )));
        }
        let grid = linspace(self.lo, self.hi, DEFAULT_GRID_POINTS);
        let mut prev = f64::NEG_INFINITY;
        for &x in &grid {
            let f = self.pdf(x);
            if !(f >= 0.0) || !f.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "pdf({x}) = {f} is negative or not finite"
                )));
            }
            let c = self.raw_cdf(x);
            if c < prev - 1e-12 {
                return Err(Error::InvalidDistribution(format!("cdf decreases near v = {x}")));
            }
            prev = c;
        }
        let mass = integrate_split(&|v| self.pdf(v), self.lo, self.hi, &self.breakpoints, 1e-10);
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidDistribution(format!(
                "density integrates to {mass}, not 1"
            )));
        }
        Ok(())
    }

    fn raw_cdf(&self, v: f64) -> f64 {
        match &self.family {
            ContinuousFamily::CubicPoly { a, b, c } => a / 2.0 * v - b / 3.0 * v * v + c / 4.0 * v * v * v,
            _ => {
                if v <= self.lo {
                    0.0
                } else if v >= self.hi {
                    match &self.family {
                        ContinuousFamily::Piecewise { pieces } => {
                            pieces.iter().map(|p| p.density * (p.hi - p.lo)).sum()
                        }
                        _ => 1.0,
                    }
                } else {
                    self.cdf(v)
                }
            }
        }
    }
}

/// `phi_beta` for a continuous prior, with its root set and monotonicity.
#[derive(Debug, Clone, Copy)]
pub struct VirtualValueCurve<'a> {
    dist: &'a ContinuousDistribution,
    burn: f64,
    grid_points: usize,
}

impl<'a> VirtualValueCurve<'a> {
    pub fn with_grid_points(mut self, n: usize) -> Self {
        self.grid_points = n.max(2);
        self
    }

    pub fn burn(&self) -> f64 {
        self.burn
    }

    pub fn evaluate(&self, v: f64) -> Result<f64> {
        self.dist.virtual_value(self.burn, v)
    }

    /// `phi_0`, the burn-free curve this one is a vertical shift of.
    pub fn base(&self, v: f64) -> Result<f64> {
        self.dist.virtual_value(0.0, v)
    }

    /// Sign-change roots, sorted ascending. Zero-density points and declared
    /// breakpoints split the scan; a jump across a breakpoint is not a root.
    pub fn roots(&self) -> Vec<f64> {
        let mut roots: Vec<f64> = Vec::new();
        let phi = |v: f64| self.dist.virtual_value(self.burn, v).ok();
        for seg in self.dist.scan_segments(self.grid_points) {
            let mut prev: Option<(f64, f64)> = None;
            for &x in &seg {
                let Some(y) = phi(x) else {
                    prev = None;
                    continue;
                };
                if y == 0.0 {
                    push_root(&mut roots, x);
                } else if let Some((px, py)) = prev {
                    if py != 0.0 && (py < 0.0) != (y < 0.0) {
                        let r = bisect(&|v| phi(v).unwrap_or(f64::NAN), px, x, ROOT_TOL);
                        push_root(&mut roots, r);
                    }
                }
                prev = Some((x, y));
            }
        }
        roots.sort_by(f64::total_cmp);
        roots
    }

    /// Non-decreasing on the scan grid, with `REGULARITY_SLACK`. Points of
    /// zero density are skipped.
    pub fn is_monotone(&self) -> Result<bool> {
        let mut prev = f64::NEG_INFINITY;
        for seg in self.dist.scan_segments(self.grid_points) {
            for x in seg {
                let y = match self.evaluate(x) {
                    Ok(y) => y,
                    Err(Error::ZeroDensity { .. }) => continue,
                    Err(e) => return Err(e),
                };
                if y < prev - REGULARITY_SLACK {
                    return Ok(false);
                }
                prev = y;
            }
        }
        Ok(true)
    }
}

fn push_root(roots: &mut Vec<f64>, r: f64) {
    if !roots.iter().any(|&x| (x - r).abs() < 1e-7) {
        roots.push(r);
    }
}

/// Finitely many point masses with strictly increasing values.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    values: Vec<f64>,
    weights: Vec<f64>,
    tails: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidDistribution("discrete distribution has no points".into()));
        }
        let mut values = Vec::with_capacity(points.len());
        let mut weights = Vec::with_capacity(points.len());
        for &(v, w) in &points {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidDistribution(format!("value {v} must be finite and >= 0")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidDistribution(format!("weight {w} must be positive")));
            }
            if let Some(&last) = values.last() {
                if v <= last {
                    return Err(Error::InvalidDistribution(format!(
                        "values must be strictly increasing ({last} then {v})"
                    )));
                }
            }
            values.push(v);
            weights.push(w);
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}, not 1")));
        }
        let mut tails = vec![0.0; weights.len()];
        let mut acc = 0.0;
        for i in (0..weights.len()).rev() {
            acc += weights[i];
            tails[i] = acc;
        }
        Ok(DiscreteDistribution { values, weights, tails })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `s_i = sum_{i' >= i} w_{i'}`.
    pub fn tail_sums(&self) -> &[f64] {
        &self.tails
    }

    pub fn support(&self) -> (f64, f64) {
        (self.values[0], self.values[self.values.len() - 1])
    }

    /// Index of the first atom with value `>= rho`.
    fn first_at_least(&self, rho: f64) -> usize {
        self.values.partition_point(|&v| v < rho)
    }

    /// `P(v >= rho)`, including an atom sitting exactly at `rho`.
    pub fn prob_at_least(&self, rho: f64) -> f64 {
        let i = self.first_at_least(rho);
        self.tails.get(i).copied().unwrap_or(0.0)
    }

    /// Discrete virtual value of atom `i` (0-based).
    pub fn virtual_value(&self, i: usize) -> Result<f64> {
        let n = self.values.len();
        if i >= n {
            return Err(Error::InvalidParams(format!("atom index {i} out of range (n = {n})")));
        }
        if i + 1 == n {
            return Ok(self.values[i]);
        }
        Ok(self.values[i] - (self.values[i + 1] - self.values[i]) * self.tails[i + 1] / self.weights[i])
    }

    /// Discrete regularity: virtual values non-decreasing in the atom index.
    pub fn is_regular(&self) -> bool {
        let phis: Vec<f64> = (0..self.len()).map(|i| self.virtual_value(i).unwrap()).collect();
        phis.windows(2).all(|w| w[1] >= w[0] - REGULARITY_SLACK)
    }
}

/// Either kind of prior.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Continuous(ContinuousDistribution),
    Discrete(DiscreteDistribution),
}

impl From<ContinuousDistribution> for Distribution {
    fn from(d: ContinuousDistribution) -> Self {
        Distribution::Continuous(d)
    }
}

impl From<DiscreteDistribution> for Distribution {
    fn from(d: DiscreteDistribution) -> Self {
        Distribution::Discrete(d)
    }
}

impl Distribution {
    pub fn support(&self) -> (f64, f64) {
        match self {
            Distribution::Continuous(d) => d.support(),
            Distribution::Discrete(d) => d.support(),
        }
    }

    pub fn prob_at_least(&self, rho: f64) -> f64 {
        match self {
            Distribution::Continuous(d) => d.prob_at_least(rho),
            Distribution::Discrete(d) => d.prob_at_least(rho),
        }
    }

    /// `E[v * 1[v >= rho]]`.
    pub fn partial_mean(&self, rho: f64) -> f64 {
        match self {
            Distribution::Continuous(d) => {
                let (_, hi) = d.support();
                d.integrate_against_pdf(|v| v, rho, hi)
            }
            Distribution::Discrete(d) => {
                let i = d.first_at_least(rho);
                d.values[i..].iter().zip(&d.weights[i..]).map(|(v, w)| v * w).sum()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.partial_mean(f64::NEG_INFINITY)
    }

    /// `(P(a <= v < b), E[v * 1[a <= v < b]])`.
    pub fn cell_moments(&self, a: f64, b: f64) -> (f64, f64) {
        match self {
            Distribution::Continuous(d) => {
                let mass = (d.cdf(b) - d.cdf(a)).max(0.0);
                let mean = d.integrate_against_pdf(|v| v, a, b);
                (mass, mean)
            }
            Distribution::Discrete(d) => {
                let i = d.first_at_least(a);
                let j = d.first_at_least(b);
                let mass = d.weights[i..j].iter().sum();
                let mean = d.values[i..j].iter().zip(&d.weights[i..j]).map(|(v, w)| v * w).sum();
                (mass, mean)
            }
        }
    }

    /// Regularity in the sense appropriate to the kind of prior.
    pub fn is_regular(&self) -> Result<bool> {
        match self {
            Distribution::Continuous(d) => d.is_regular(),
            Distribution::Discrete(d) => Ok(d.is_regular()),
        }
    }

    /// Points where revenue or the density changes form: atoms for discrete
    /// priors, support ends and breakpoints for continuous ones.
    pub fn special_points(&self) -> Vec<f64> {
        match self {
            Distribution::Continuous(d) => {
                let (lo, hi) = d.support();
                let mut pts = vec![lo];
                pts.extend_from_slice(d.breakpoints());
                pts.push(hi);
                pts
            }
            Distribution::Discrete(d) => d.values().to_vec(),
        }
    }
}
