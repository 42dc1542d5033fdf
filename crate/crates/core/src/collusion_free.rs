//! Posted prices (with burn) that admit no profitable IC+IR collusion, and
//! the welfare/revenue approximation constant over those prices.

use rayon::prelude::*;
use serde::Serialize;

use crate::distribution::{Distribution, DEFAULT_GRID_POINTS};
use crate::error::{Error, Result};
use crate::numeric::{bisect_predicate, golden_max, linspace};
use crate::pricing::{margin_revenue, myerson_price};

/// Slack on the exclusion integral: indifferent prices stay collusion-free.
pub const EXCLUSION_SLACK: f64 = 1e-9;
/// Endpoint accuracy of the refined intervals.
pub const ENDPOINT_TOL: f64 = 1e-6;
/// Price-grid size for `worst_case_c`.
pub const APPROX_GRID_POINTS: usize = 1_000;

/// Sorted, disjoint closed intervals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceSet {
    intervals: Vec<(f64, f64)>,
}

impl PriceSet {
    pub fn new(mut intervals: Vec<(f64, f64)>) -> Result<Self> {
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (i, &(lo, hi)) in intervals.iter().enumerate() {
            if !(lo <= hi) {
                return Err(Error::InvalidParams(format!("interval [{lo}, {hi}] is reversed")));
            }
            if i > 0 && intervals[i - 1].1 >= lo {
                return Err(Error::InvalidParams(format!("intervals overlap near {lo}")));
            }
        }
        Ok(PriceSet { intervals })
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn contains(&self, rho: f64) -> bool {
        self.contains_within(rho, 0.0)
    }

    pub fn contains_within(&self, rho: f64, tol: f64) -> bool {
        self.intervals
            .iter()
            .any(|&(lo, hi)| rho >= lo - tol && rho <= hi + tol)
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }
}

/// A root `v'` below an excluded price `v*` with a positive integral of
/// `phi_beta f` over `[v', v*]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExclusionWitness {
    pub price: f64,
    pub root: f64,
    pub integral: f64,
}

impl ExclusionWitness {
    /// Recomputes the integral from the revenue curve.
    pub fn recheck(&self, dist: &Distribution, beta: f64) -> bool {
        let gain = margin_revenue(dist, self.root, beta) - margin_revenue(dist, self.price, beta);
        (gain - self.integral).abs() < 1e-9 && gain > EXCLUSION_SLACK
    }
}

fn check_beta(dist: &Distribution, beta: f64) -> Result<()> {
    let (_, hi) = dist.support();
    if !(0.0..=hi).contains(&beta) {
        return Err(Error::InvalidParams(format!("burn {beta} outside [0, {hi}]")));
    }
    Ok(())
}

/// Roots of `phi_beta` for a continuous prior. For a discrete prior the
/// candidate lower prices are the atoms themselves.
fn lower_candidates(dist: &Distribution, beta: f64) -> Vec<f64> {
    match dist {
        Distribution::Continuous(d) => d.virtual_value_curve(beta).roots(),
        Distribution::Discrete(d) => d.values().to_vec(),
    }
}

/// The first witness (lowest root) excluding `price`, if any.
pub fn exclusion_witness(dist: &Distribution, beta: f64, price: f64) -> Result<Option<ExclusionWitness>> {
    check_beta(dist, beta)?;
    Ok(witness_among(dist, beta, price, &lower_candidates(dist, beta)))
}

fn witness_among(dist: &Distribution, beta: f64, price: f64, roots: &[f64]) -> Option<ExclusionWitness> {
    let at = margin_revenue(dist, price, beta);
    roots.iter().filter(|&&r| r < price).find_map(|&r| {
        let integral = margin_revenue(dist, r, beta) - at;
        (integral > EXCLUSION_SLACK).then_some(ExclusionWitness {
            price,
            root: r,
            integral,
        })
    })
}

pub fn collusion_free_prices(dist: &Distribution, beta: f64) -> Result<PriceSet> {
    check_beta(dist, beta)?;
    let mu = myerson_price(dist, beta)?;
    match dist {
        Distribution::Discrete(_) => discrete_set(dist, beta, mu),
        Distribution::Continuous(_) => {
            if dist.is_regular()? {
                return PriceSet::new(vec![(beta, mu)]);
            }
            continuous_set(dist, beta, mu)
        }
    }
}

fn continuous_set(dist: &Distribution, beta: f64, mu: f64) -> Result<PriceSet> {
    if mu <= beta {
        return PriceSet::new(vec![(beta, beta)]);
    }
    let roots = lower_candidates(dist, beta);
    let excluded = |v: f64| witness_among(dist, beta, v, &roots).is_some();
    let grid = linspace(beta, mu, DEFAULT_GRID_POINTS);
    let flags: Vec<bool> = grid.par_iter().map(|&v| excluded(v)).collect();
    let mut intervals = Vec::new();
    let mut start: Option<f64> = if flags[0] { None } else { Some(beta) };
    for k in 1..grid.len() {
        match (flags[k - 1], flags[k]) {
            (false, true) => {
                let (end, _) = bisect_predicate(&excluded, grid[k - 1], grid[k], ENDPOINT_TOL);
                intervals.push((start.take().unwrap_or(grid[k - 1]), end));
            }
            (true, false) => {
                let (_, first) = bisect_predicate(&|v| !excluded(v), grid[k - 1], grid[k], ENDPOINT_TOL);
                start = Some(first);
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        intervals.push((s, mu));
    }
    PriceSet::new(intervals)
}

/// Cell by cell between consecutive atoms: a price in `(v_{i-1}, v_i]`
/// sells with probability `s_i` and is kept iff no lower atom earns more.
fn discrete_set(dist: &Distribution, beta: f64, mu: f64) -> Result<PriceSet> {
    let Distribution::Discrete(d) = dist else {
        unreachable!()
    };
    let values = d.values();
    let tails = d.tail_sums();
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    let mut best_below = 0.0f64;
    let mut cell_lo = f64::NEG_INFINITY;
    for (i, &v) in values.iter().enumerate() {
        // Smallest rho in the cell with s_i (rho - beta) >= best_below.
        let threshold = beta + best_below / tails[i];
        let lo = threshold
            .max(beta)
            .max(if cell_lo.is_finite() { cell_lo } else { beta });
        let hi = v.min(mu);
        let open_at_lo = cell_lo.is_finite() && lo <= cell_lo;
        if lo <= hi && !(open_at_lo && lo == hi) {
            let lo = if open_at_lo { next_up(cell_lo) } else { lo };
            push_merged(&mut intervals, lo, hi);
        }
        best_below = best_below.max(tails[i] * (v - beta));
        cell_lo = v;
    }
    PriceSet::new(intervals)
}

fn next_up(x: f64) -> f64 {
    if x == 0.0 {
        f64::from_bits(1)
    } else if x > 0.0 {
        f64::from_bits(x.to_bits() + 1)
    } else {
        f64::from_bits(x.to_bits() - 1)
    }
}

fn push_merged(intervals: &mut Vec<(f64, f64)>, lo: f64, hi: f64) {
    if let Some(last) = intervals.last_mut() {
        if lo <= next_up(last.1) {
            last.1 = last.1.max(hi);
            return;
        }
    }
    intervals.push((lo, hi));
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApproxReport {
    pub price: f64,
    pub c_rho: f64,
    pub revenue_ratio: f64,
    pub welfare_ratio: f64,
}

/// `C_rho` at burn zero.
pub fn welfare_revenue_approx(dist: &Distribution, rho: f64) -> Result<ApproxReport> {
    let mu0 = myerson_price(dist, 0.0)?;
    approx_with_optimum(dist, rho, mu0, margin_revenue(dist, mu0, 0.0), dist.mean())
}

fn approx_with_optimum(
    dist: &Distribution,
    rho: f64,
    mu0: f64,
    opt_rev: f64,
    opt_welfare: f64,
) -> Result<ApproxReport> {
    if !(rho >= 0.0 && rho <= mu0 + 1e-9) {
        return Err(Error::InvalidParams(format!("price {rho} outside [0, mu(0) = {mu0}]")));
    }
    if opt_rev <= 0.0 && opt_welfare <= 0.0 {
        return Err(Error::ZeroOptimal);
    }
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    let revenue_ratio = ratio(margin_revenue(dist, rho, 0.0), opt_rev);
    let welfare_ratio = ratio(dist.partial_mean(rho), opt_welfare);
    let best = revenue_ratio.max(welfare_ratio);
    let c_rho = if best > 0.0 { 1.0 / best } else { f64::INFINITY };
    Ok(ApproxReport {
        price: rho,
        c_rho,
        revenue_ratio,
        welfare_ratio,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorstCase {
    /// `C_F`, the largest `C_rho` over collusion-free prices.
    pub c: f64,
    /// The maximizing report (lowest price on ties).
    pub at: ApproxReport,
    /// Whether the prior is regular in the continuous or the discrete sense.
    pub regular: bool,
    pub discrete: bool,
}

/// `C_F` over the collusion-free prices at burn zero: a price grid on
/// `[0, mu(0)]` plus atoms, breakpoints and the set's interval endpoints.
pub fn worst_case_c(dist: &Distribution) -> Result<WorstCase> {
    let mu0 = myerson_price(dist, 0.0)?;
    let opt_rev = margin_revenue(dist, mu0, 0.0);
    let opt_welfare = dist.mean();
    let set = collusion_free_prices(dist, 0.0)?;
    let mut prices = linspace(0.0, mu0, APPROX_GRID_POINTS);
    prices.extend(dist.special_points());
    for &(lo, hi) in set.intervals() {
        prices.push(lo);
        prices.push(hi);
    }
    prices.retain(|&p| p >= 0.0 && p <= mu0 && set.contains(p));
    prices.sort_by(f64::total_cmp);
    prices.dedup();
    let reports = prices
        .par_iter()
        .map(|&p| approx_with_optimum(dist, p, mu0, opt_rev, opt_welfare))
        .collect::<Result<Vec<_>>>()?;
    let (k, mut at) = reports
        .into_iter()
        .enumerate()
        .reduce(|best, r| if r.1.c_rho > best.1.c_rho { r } else { best })
        .ok_or_else(|| Error::InvalidDistribution("no collusion-free price".into()))?;
    // The maximum usually sits at a kink between grid points; refine inside
    // the neighboring cells when they are collusion-free throughout.
    let a = prices[k.saturating_sub(1)];
    let b = prices[(k + 1).min(prices.len() - 1)];
    if b > a && set.intervals().iter().any(|&(lo, hi)| lo <= a && b <= hi) {
        let c_at =
            |p: f64| approx_with_optimum(dist, p, mu0, opt_rev, opt_welfare).map_or(f64::NEG_INFINITY, |r| r.c_rho);
        let (x, fx) = golden_max(&c_at, a, b, 1e-10);
        if fx > at.c_rho {
            at = approx_with_optimum(dist, x, mu0, opt_rev, opt_welfare)?;
        }
    }
    Ok(WorstCase {
        c: at.c_rho,
        at,
        regular: dist.is_regular()?,
        discrete: matches!(dist, Distribution::Discrete(_)),
    })
}
