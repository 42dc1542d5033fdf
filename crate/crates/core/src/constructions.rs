//! Distribution families with prescribed virtual-value shapes.
//!
//! * a cubic family whose adjusted virtual value `phi_0(v) f(v)` is the
//!   polynomial `c v^3 - b v^2 + a v - 1` (non-regular for suitable constants),
//! * the truncated equal-revenue family, regular with a logarithmic
//!   welfare gap at its monopoly price,
//! * the discrete family whose worst collusion-free welfare/revenue
//!   approximation grows like `sqrt(n)`,
//! * a smearing operator turning point masses into short uniform intervals.

use crate::distribution::{ContinuousDistribution, ContinuousFamily, DensityPiece, DiscreteDistribution};
use crate::error::{Error, Result};
use crate::numeric::{bisect, linspace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicSpec {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl CubicSpec {
    /// `27/8 a c >= b^2`, the condition for a non-negative density.
    pub fn density_condition_holds(&self) -> bool {
        27.0 / 8.0 * self.a * self.c >= self.b * self.b
    }

    /// `P(v) = c v^3 - b v^2 + a v - 1`.
    pub fn adjusted_virtual_value(&self, v: f64) -> f64 {
        ((self.c * v - self.b) * v + self.a) * v - 1.0
    }

    fn cdf(&self, v: f64) -> f64 {
        ((self.c / 4.0 * v - self.b / 3.0) * v + self.a / 2.0) * v
    }
}

/// Outcome of the cubic builder, with the numeric density check reported
/// next to the algebraic one.
#[derive(Debug, Clone)]
pub struct CubicBuild {
    pub dist: ContinuousDistribution,
    pub upper: f64,
    pub algebraic_condition: bool,
    pub numeric_density_ok: bool,
}

pub fn build_cubic(spec: CubicSpec) -> Result<CubicBuild> {
    let CubicSpec { a, b, c } = spec;
    if !(a > 0.0 && b > 0.0 && c > 0.0) || ![a, b, c].iter().all(|x| x.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "cubic coefficients must be positive and finite, got a={a}, b={b}, c={c}"
        )));
    }
    if !spec.density_condition_holds() {
        return Err(Error::NonnegativityViolated {
            lhs: 27.0 / 8.0 * a * c,
            rhs: b * b,
        });
    }
    let upper = unit_root(&|v| spec.cdf(v)).ok_or(Error::NoUnitRoot)?;
    let dist = ContinuousDistribution::from_family(0.0, upper, ContinuousFamily::CubicPoly { a, b, c }, Vec::new())?;
    let numeric_density_ok = linspace(0.0, upper, 1000).into_iter().all(|v| dist.pdf(v) >= 0.0);
    Ok(CubicBuild {
        dist,
        upper,
        algebraic_condition: true,
        numeric_density_ok,
    })
}

/// Smallest positive `v` with `F(v) = 1`, bracketed by a doubling scan.
fn unit_root(cdf: &dyn Fn(f64) -> f64) -> Option<f64> {
    let mut hi = 1e-3;
    let mut lo = 0.0;
    while hi < 1e6 {
        let pts = linspace(lo, hi, 1000);
        for w in pts.windows(2) {
            if cdf(w[1]) >= 1.0 {
                return Some(bisect(&|v| cdf(v) - 1.0, w[0], w[1], 1e-12));
            }
        }
        lo = hi;
        hi *= 2.0;
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncEqualRevenueSpec {
    pub t: f64,
    pub eps: f64,
}

pub fn build_trunc_equal_revenue(spec: TruncEqualRevenueSpec) -> Result<ContinuousDistribution> {
    let TruncEqualRevenueSpec { t, eps } = spec;
    if !(t.is_finite() && eps.is_finite() && t > 0.0 && eps > 0.0) {
        return Err(Error::InvalidParams(format!(
            "need T > 0 and eps > 0, got T={t}, eps={eps}"
        )));
    }
    if eps > t {
        return Err(Error::InvalidParams(format!(
            "eps = {eps} exceeds T = {t}; the monopoly price would move off T"
        )));
    }
    if eps > 1.0 {
        return Err(Error::InvalidParams(format!("eps = {eps} > 1 breaks regularity")));
    }
    ContinuousDistribution::from_family(0.0, t + eps, ContinuousFamily::TruncEqualRevenue { t, eps }, vec![t])
}

/// The lower-bound family with `n >= 5` atoms: `v_i = 2^(i-1)`, `w_i = 2^-i`
/// for `i < n`, and `v_n = sqrt(n) 2^(n-2)` with `w_n = 2^-(n-1)`.
#[derive(Debug, Clone)]
pub struct SqrtLogFamily {
    pub dist: DiscreteDistribution,
    /// Largest support point `M = sqrt(n) 2^(n-2)`.
    pub max_value: f64,
}

pub fn build_sqrtlog_family(n: usize) -> Result<SqrtLogFamily> {
    if n < 5 {
        return Err(Error::InvalidParams(format!(
            "the sqrt-log family needs n >= 5, got {n}"
        )));
    }
    if n > 1000 {
        return Err(Error::InvalidParams(format!("n = {n} overflows the atom values")));
    }
    let mut points: Vec<(f64, f64)> = (1..n)
        .map(|i| (2f64.powi(i as i32 - 1), 0.5f64.powi(i as i32)))
        .collect();
    let max_value = (n as f64).sqrt() * 2f64.powi(n as i32 - 2);
    points.push((max_value, 0.5f64.powi(n as i32 - 1)));
    Ok(SqrtLogFamily {
        dist: DiscreteDistribution::new(points)?,
        max_value,
    })
}

/// Replaces each atom `(v_i, w_i)` by mass `w_i` spread uniformly over
/// `[v_i, v_i + eps]`.
pub fn epsilon_smear(dist: &DiscreteDistribution, eps: f64) -> Result<ContinuousDistribution> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParams(format!("smear width must be positive, got {eps}")));
    }
    let values = dist.values();
    let min_gap = values.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if eps >= 0.5 * min_gap {
        return Err(Error::OverlapError {
            eps,
            half_gap: 0.5 * min_gap,
        });
    }
    let pieces = values
        .iter()
        .zip(dist.weights())
        .map(|(&v, &w)| DensityPiece {
            lo: v,
            hi: v + eps,
            density: w / eps,
        })
        .collect();
    ContinuousDistribution::piecewise(pieces)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_cubic() -> CubicSpec {
        CubicSpec {
            a: 5.62,
            b: 10.0,
            c: 5.62,
        }
    }

    #[test]
    fn cubic_support_end() {
        let built = build_cubic(paper_cubic()).unwrap();
        assert!((built.upper - 1.20018).abs() < 1e-5);
        assert!(built.numeric_density_ok);
    }

    #[test]
    fn cubic_density_condition_arithmetic() {
        let s = paper_cubic();
        assert!((27.0 / 8.0 * s.a * s.c - 106.59735).abs() < 1e-9);
        assert!(s.density_condition_holds());
    }

    #[test]
    fn cubic_rejects_negative_density() {
        let err = build_cubic(CubicSpec {
            a: 1.0,
            b: 10.0,
            c: 1.0,
        })
        .unwrap_err();
        assert!(matches!(err, Error::NonnegativityViolated { .. }));
        assert!(build_cubic(CubicSpec {
            a: 2.0,
            b: 0.0,
            c: 1e-12
        })
        .is_err());
    }

    #[test]
    fn cubic_adjusted_virtual_value_is_the_polynomial() {
        let spec = paper_cubic();
        let d = build_cubic(spec).unwrap().dist;
        for v in linspace(0.0, d.support().1, 1000) {
            let lhs = d.adjusted_virtual_value(0.0, v);
            assert!((lhs - spec.adjusted_virtual_value(v)).abs() < 1e-9, "v={v}");
        }
    }

    #[test]
    fn trunc_equal_revenue_cdf_points() {
        let d = build_trunc_equal_revenue(TruncEqualRevenueSpec { t: 2.0, eps: 0.5 }).unwrap();
        assert!((d.cdf(2.0) - 2.0 / 3.0).abs() < 1e-12);
        assert!((d.cdf(2.25) - (2.0 / 3.0 + 2.0 / 3.0 * 0.25)).abs() < 1e-12);
        assert_eq!(d.cdf(2.5), 1.0);
        assert!(d.is_regular().unwrap());
    }

    #[test]
    fn trunc_equal_revenue_virtual_value_pieces() {
        let (t, eps) = (2.0, 0.5);
        let d = build_trunc_equal_revenue(TruncEqualRevenueSpec { t, eps }).unwrap();
        for v in linspace(0.0, t + eps, 1000) {
            if (v - t).abs() < 1e-12 {
                continue;
            }
            let expect = if v <= t { -1.0 } else { 2.0 * v - (t + eps) };
            assert!((d.virtual_value(0.0, v).unwrap() - expect).abs() < 1e-9, "v={v}");
        }
    }

    #[test]
    fn trunc_equal_revenue_param_guards() {
        assert!(build_trunc_equal_revenue(TruncEqualRevenueSpec { t: 0.5, eps: 0.75 }).is_err());
        assert!(build_trunc_equal_revenue(TruncEqualRevenueSpec { t: 3.0, eps: 1.5 }).is_err());
        assert!(build_trunc_equal_revenue(TruncEqualRevenueSpec { t: -1.0, eps: 0.5 }).is_err());
    }

    #[test]
    fn sqrtlog_n5_atoms() {
        let fam = build_sqrtlog_family(5).unwrap();
        let s5 = 5f64.sqrt();
        assert_eq!(fam.dist.values()[..4], [1.0, 2.0, 4.0, 8.0]);
        assert!((fam.dist.values()[4] - 8.0 * s5).abs() < 1e-13);
        assert_eq!(fam.dist.weights(), &[0.5, 0.25, 0.125, 0.0625, 0.0625]);
        assert!((fam.max_value - 8.0 * s5).abs() < 1e-13);
        assert!(build_sqrtlog_family(4).is_err());
    }

    #[test]
    fn smear_two_point() {
        let d = DiscreteDistribution::new(vec![(1.0, 0.5), (2.0, 0.5)]).unwrap();
        let s = epsilon_smear(&d, 0.1).unwrap();
        assert!((s.pdf(1.05) - 5.0).abs() < 1e-12);
        assert!((s.pdf(2.05) - 5.0).abs() < 1e-12);
        assert_eq!(s.pdf(1.5), 0.0);
        assert!(matches!(epsilon_smear(&d, 0.6), Err(Error::OverlapError { .. })));
    }

    #[test]
    fn smear_sqrtlog_total_mass() {
        let fam = build_sqrtlog_family(5).unwrap();
        let s = epsilon_smear(&fam.dist, 0.01).unwrap();
        assert_eq!(s.pieces().len(), 5);
        if let ContinuousFamily::Piecewise { pieces } = s.family() {
            let sum: f64 = pieces.iter().map(|p| p.density * (p.hi - p.lo)).sum();
            assert!((sum - 1.0).abs() < 1e-12);
        } else {
            panic!("smear must be piecewise");
        }
    }
}
