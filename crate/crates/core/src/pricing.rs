//! Posted-price revenue with a constant burn, the burn-aware Myerson price
//! `mu(beta)`, and the derived curves (revenue, bidder utility, realized
//! burn, welfare) as functions of the burn.

use std::io::Write;

use rayon::prelude::*;

use crate::distribution::{ContinuousDistribution, Distribution, DEFAULT_GRID_POINTS};
use crate::error::{Error, Result};
use crate::numeric::{golden_max, linspace, QUAD_TOL};

/// Width of the golden-section refinement.
pub const PRICE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricePoint {
    pub beta: f64,
    pub price: f64,
    pub revenue: f64,
    pub bidder_utility: f64,
    pub realized_burn: f64,
    pub welfare: f64,
}

/// Miner revenue `P(v >= rho) (rho - beta)` of a posted price with burn.
pub fn revenue(dist: &Distribution, rho: f64, beta: f64) -> Result<f64> {
    if beta > rho {
        return Err(Error::BurnExceedsPrice { burn: beta, price: rho });
    }
    if beta < 0.0 {
        return Err(Error::InvalidParams(format!("burn must be non-negative, got {beta}")));
    }
    Ok(margin_revenue(dist, rho, beta))
}

/// Revenue without the burn-balance guard; negative when `rho < beta`.
pub(crate) fn margin_revenue(dist: &Distribution, rho: f64, beta: f64) -> f64 {
    dist.prob_at_least(rho) * (rho - beta)
}

/// Revenue-maximizing posted price under burn `beta`, lowest price on ties.
pub fn myerson_price(dist: &Distribution, beta: f64) -> Result<f64> {
    let (_, hi) = dist.support();
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "burn must be finite and non-negative, got {beta}"
        )));
    }
    if beta >= hi {
        return Ok(beta);
    }
    match dist {
        Distribution::Discrete(d) => {
            let mut best: (f64, f64) = (beta, 0.0);
            for &v in d.values().iter().filter(|&&v| v >= beta) {
                let r = margin_revenue(dist, v, beta);
                if r > best.1 + 1e-12 * best.1.abs().max(1.0) {
                    best = (v, r);
                }
            }
            Ok(best.0)
        }
        Distribution::Continuous(_) => Ok(continuous_argmax(dist, beta, hi)),
    }
}

fn continuous_argmax(dist: &Distribution, beta: f64, hi: f64) -> f64 {
    let rev = |rho: f64| margin_revenue(dist, rho, beta);
    let grid = linspace(beta, hi, DEFAULT_GRID_POINTS);
    let values: Vec<f64> = grid.iter().map(|&x| rev(x)).collect();
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Every grid-level local maximum close to the top is a candidate plateau.
    let mut best: Option<(f64, f64)> = None;
    for k in 0..grid.len() {
        let left = if k == 0 { f64::NEG_INFINITY } else { values[k - 1] };
        let right = if k + 1 == grid.len() {
            f64::NEG_INFINITY
        } else {
            values[k + 1]
        };
        if values[k] < left || values[k] < right || values[k] < top - 1e-9 {
            continue;
        }
        let a = grid[k.saturating_sub(1)];
        let b = grid[(k + 1).min(grid.len() - 1)];
        let (x, fx) = golden_max(&rev, a, b, PRICE_TOL);
        let (x, fx) = if values[k] >= fx { (grid[k], values[k]) } else { (x, fx) };
        best = match best {
            Some((bx, bf)) if bf >= fx - 1e-12 && bx <= x => Some((bx, bf)),
            Some((bx, bf)) if bf > fx + 1e-12 => Some((bx, bf)),
            _ => Some((x, fx)),
        };
    }
    best.map_or(beta, |(x, _)| x)
}

/// Revenue, bidder utility, realized burn and welfare at price `rho`.
pub fn price_point(dist: &Distribution, rho: f64, beta: f64) -> Result<PricePoint> {
    let revenue = revenue(dist, rho, beta)?;
    let sold = dist.prob_at_least(rho);
    let (bidder_utility, welfare) = match dist {
        Distribution::Continuous(d) => {
            let (_, hi) = d.support();
            (
                d.integrate_against_pdf(|v| v - rho, rho, hi),
                d.integrate_against_pdf(|v| v, rho, hi),
            )
        }
        Distribution::Discrete(d) => {
            let mut util = 0.0;
            let mut welfare = 0.0;
            for (&v, &w) in d.values().iter().zip(d.weights()) {
                if v >= rho {
                    util += (v - rho) * w;
                    welfare += v * w;
                }
            }
            (util, welfare)
        }
    };
    Ok(PricePoint {
        beta,
        price: rho,
        revenue,
        bidder_utility,
        realized_burn: sold * beta,
        welfare,
    })
}

/// For each burn, the Myerson price and the quantities it yields.
pub fn price_curves(dist: &Distribution, betas: &[f64]) -> Result<Vec<PricePoint>> {
    let (_, hi) = dist.support();
    betas
        .par_iter()
        .map(|&beta| {
            if !(0.0..=hi).contains(&beta) {
                return Err(Error::InvalidParams(format!("burn {beta} outside [0, {hi}]")));
            }
            let rho = myerson_price(dist, beta)?;
            price_point(dist, rho, beta)
        })
        .collect()
}

/// Both sides of the burn Myerson identity at price `rho`: the revenue, and
/// the integral of `phi_beta f` over the sale region.
pub fn myerson_identity_check(dist: &Distribution, rho: f64, beta: f64) -> Result<(f64, f64)> {
    let lhs = revenue(dist, rho, beta)?;
    let rhs = match dist {
        Distribution::Continuous(d) => identity_integral(d, rho, beta)?,
        Distribution::Discrete(d) => {
            let mut acc = 0.0;
            for (i, (&v, &w)) in d.values().iter().zip(d.weights()).enumerate() {
                if v >= rho {
                    acc += (d.virtual_value(i)? - beta) * w;
                }
            }
            // Below-atom prices sell at the next atom's tail; the identity
            // sums virtual values from that atom and adds the price gap.
            let first = d.values().iter().position(|&v| v >= rho);
            match first {
                Some(i) => acc - (d.values()[i] - rho) * d.tail_sums()[i],
                None => acc,
            }
        }
    };
    Ok((lhs, rhs))
}

fn identity_integral(d: &ContinuousDistribution, rho: f64, beta: f64) -> Result<f64> {
    let (lo, hi) = d.support();
    let start = rho.max(lo);
    // Points below the support sell with probability one at margin rho - beta.
    let below = if rho < lo { (lo - rho) * 1.0 } else { 0.0 };
    let body = crate::numeric::integrate_split(
        &|v| d.adjusted_virtual_value(beta, v),
        start,
        hi,
        d.breakpoints(),
        QUAD_TOL,
    );
    Ok(body - below)
}

/// Writes curves as CSV with nine significant digits.
pub fn write_curves_csv<W: Write>(points: &[PricePoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "beta,price,revenue,bidder_utility,realized_burn,welfare")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            sig9(p.beta),
            sig9(p.price),
            sig9(p.revenue),
            sig9(p.bidder_utility),
            sig9(p.realized_burn),
            sig9(p.welfare)
        )?;
    }
    Ok(())
}

/// `%.9g`-style formatting.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.8e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{:.*}", decimals, x);
        trim_zeros(&fixed)
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}
