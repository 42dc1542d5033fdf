//! JSON spec-file loaders for priors, mechanisms and collusions, plus the
//! small text formats used on the command line (`lo:hi:steps` and level
//! lists).

use serde::Deserialize;
use serde_json::Value;

use crate::collusion::{builtin_collusion, BuiltinCollusion, Collusion};
use crate::constructions::{
    build_cubic, build_sqrtlog_family, build_trunc_equal_revenue, epsilon_smear, CubicSpec, TruncEqualRevenueSpec,
};
use crate::distribution::{ContinuousDistribution, DensityPiece, DiscreteDistribution, Distribution};
use crate::error::{Error, Result};
use crate::mechanism::{builtin_mechanism, BidGrid, BuiltinMechanism, GridMechanism, Outcome};

/// Largest `n` accepted for the sqrt-log family; beyond this the top atom
/// leaves the range where `f64` sums stay meaningful.
pub const MAX_SQRTLOG_N: usize = 60;
/// Cap on `steps` in grid specs so malformed input cannot exhaust memory.
pub const MAX_GRID_STEPS: usize = 1_000_000;
/// Cap on the number of levels of a default bid grid.
pub const MAX_BID_STEPS: usize = 4096;
pub const DEFAULT_N_MAX: usize = 3;
pub const DEFAULT_GRID_STEPS: usize = 10;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSpec {
    Uniform {
        #[serde(default)]
        lo: f64,
        #[serde(default = "one")]
        hi: f64,
    },
    CubicPoly {
        a: f64,
        b: f64,
        c: f64,
    },
    TruncEqualRevenue {
        #[serde(rename = "T", alias = "t")]
        t: f64,
        eps: f64,
    },
    TruncExponential {
        rate: f64,
        hi: f64,
    },
    Discrete {
        points: Vec<(f64, f64)>,
    },
    /// Pieces as `[lo, hi, density]`.
    Piecewise {
        pieces: Vec<(f64, f64, f64)>,
    },
    Sqrtlog {
        n: usize,
    },
    Smear {
        inner: Box<DistSpec>,
        eps: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl DistSpec {
    pub fn build(&self) -> Result<Distribution> {
        Ok(match self {
            DistSpec::Uniform { lo, hi } => ContinuousDistribution::uniform(*lo, *hi)?.into(),
            DistSpec::CubicPoly { a, b, c } => build_cubic(CubicSpec { a: *a, b: *b, c: *c })?.dist.into(),
            DistSpec::TruncEqualRevenue { t, eps } => {
                build_trunc_equal_revenue(TruncEqualRevenueSpec { t: *t, eps: *eps })?.into()
            }
            DistSpec::TruncExponential { rate, hi } => {
                ContinuousDistribution::truncated_exponential(*rate, *hi)?.into()
            }
            DistSpec::Discrete { points } => DiscreteDistribution::new(points.clone())?.into(),
            DistSpec::Piecewise { pieces } => ContinuousDistribution::piecewise(
                pieces
                    .iter()
                    .map(|&(lo, hi, density)| DensityPiece { lo, hi, density })
                    .collect(),
            )?
            .into(),
            DistSpec::Sqrtlog { n } => {
                if *n > MAX_SQRTLOG_N {
                    return Err(Error::InvalidParams(format!("sqrtlog n = {n} exceeds {MAX_SQRTLOG_N}")));
                }
                build_sqrtlog_family(*n)?.dist.into()
            }
            DistSpec::Smear { inner, eps } => match inner.build()? {
                Distribution::Discrete(d) => epsilon_smear(&d, *eps)?.into(),
                Distribution::Continuous(_) => {
                    return Err(Error::Spec("smear needs a discrete inner distribution".into()))
                }
            },
        })
    }
}

pub fn load_distribution(text: &str) -> Result<Distribution> {
    let spec: DistSpec = serde_json::from_str(text)?;
    spec.build()
}

/// Rebuilds `{"name": .., "params": ..}` for the adjacently tagged built-in
/// enums, dropping empty params so unit variants parse.
fn builtin_value(obj: &serde_json::Map<String, Value>) -> Result<Value> {
    let name = obj
        .get("name")
        .ok_or_else(|| Error::Spec("builtin needs a \"name\"".into()))?;
    let mut out = serde_json::Map::new();
    out.insert("name".into(), name.clone());
    match obj.get("params") {
        None | Some(Value::Null) => {}
        Some(Value::Object(m)) if m.is_empty() => {}
        Some(p) => {
            out.insert("params".into(), p.clone());
        }
    }
    Ok(Value::Object(out))
}

fn object(text: &str) -> Result<serde_json::Map<String, Value>> {
    match serde_json::from_str::<Value>(text)? {
        Value::Object(m) => Ok(m),
        _ => Err(Error::Spec("expected a JSON object".into())),
    }
}

fn kind(obj: &serde_json::Map<String, Value>) -> Result<&str> {
    obj.get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Spec("missing string field \"kind\"".into()))
}

fn reject_unknown(obj: &serde_json::Map<String, Value>, allowed: &[&str]) -> Result<()> {
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::Spec(format!("unknown field \"{k}\""))),
        None => Ok(()),
    }
}

fn field<T: for<'de> Deserialize<'de>>(obj: &serde_json::Map<String, Value>, key: &str) -> Result<Option<T>> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => T::deserialize(v)
            .map(Some)
            .map_err(|e| Error::Spec(format!("field \"{key}\": {e}"))),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MechEntry {
    bids: Vec<f64>,
    winner: Option<usize>,
    #[serde(default)]
    pay: Vec<f64>,
    #[serde(default)]
    burn: Vec<f64>,
}

fn pad(mut v: Vec<f64>, n: usize, what: &str) -> Result<Vec<f64>> {
    if v.len() > n {
        return Err(Error::Spec(format!("{what} has {} entries for {n} slots", v.len())));
    }
    v.resize(n, 0.0);
    Ok(v)
}

fn n_max_field(obj: &serde_json::Map<String, Value>) -> Result<usize> {
    let n = field::<usize>(obj, "n_max")?.unwrap_or(DEFAULT_N_MAX);
    if n == 0 {
        return Err(Error::Spec("n_max must be at least 1".into()));
    }
    Ok(n)
}

/// Loads a mechanism file. Built-ins take an optional `grid` (explicit
/// levels) or `grid_max`/`grid_steps` (uniform levels, default 1 and 10),
/// and `n_max` (default 3). Tables list entries by bid values; profiles not
/// listed allocate nothing.
pub fn load_mechanism(text: &str) -> Result<GridMechanism> {
    let obj = object(text)?;
    match kind(&obj)? {
        "builtin" => {
            reject_unknown(
                &obj,
                &["kind", "name", "params", "grid", "grid_max", "grid_steps", "n_max"],
            )?;
            let builtin: BuiltinMechanism = serde_json::from_value(builtin_value(&obj)?)?;
            let grid = match field::<Vec<f64>>(&obj, "grid")? {
                Some(levels) => {
                    if obj.contains_key("grid_max") || obj.contains_key("grid_steps") {
                        return Err(Error::Spec(
                            "give either \"grid\" or \"grid_max\"/\"grid_steps\"".into(),
                        ));
                    }
                    BidGrid::new(levels)?
                }
                None => {
                    let max = field::<f64>(&obj, "grid_max")?.unwrap_or(1.0);
                    let steps = field::<usize>(&obj, "grid_steps")?.unwrap_or(DEFAULT_GRID_STEPS);
                    if steps > MAX_BID_STEPS {
                        return Err(Error::Spec(format!("grid_steps {steps} exceeds {MAX_BID_STEPS}")));
                    }
                    BidGrid::uniform(max, steps)?
                }
            };
            builtin_mechanism(builtin, grid, n_max_field(&obj)?)
        }
        "table" => {
            reject_unknown(&obj, &["kind", "name", "grid", "n_max", "entries"])?;
            let grid = BidGrid::new(field(&obj, "grid")?.ok_or_else(|| Error::Spec("table needs \"grid\"".into()))?)?;
            let n = n_max_field(&obj)?;
            let name = field::<String>(&obj, "name")?.unwrap_or_else(|| "table".into());
            let entries: Vec<MechEntry> = field(&obj, "entries")?.unwrap_or_default();
            let count = crate::mechanism::profile_count(grid.len(), n)?;
            let mut table = vec![Outcome::nobody(n); count];
            let mut seen = vec![false; count];
            for e in entries {
                let bids = pad(e.bids, n, "bids")?;
                let levels = bids.iter().map(|&b| grid.require(b)).collect::<Result<Vec<_>>>()?;
                let idx = crate::mechanism::encode(&levels, grid.len());
                if std::mem::replace(&mut seen[idx], true) {
                    return Err(Error::Spec(format!("duplicate entry for bids {bids:?}")));
                }
                if e.winner.is_some_and(|w| w >= n) {
                    return Err(Error::Spec(format!("winner slot out of range at bids {bids:?}")));
                }
                table[idx] = Outcome {
                    winner: e.winner,
                    pay: pad(e.pay, n, "pay")?,
                    burn: pad(e.burn, n, "burn")?,
                };
            }
            GridMechanism::from_table(name, grid, n, table)
        }
        other => Err(Error::Spec(format!("unknown mechanism kind \"{other}\""))),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CollusionEntry {
    bids: Vec<f64>,
    rewritten: Vec<f64>,
    #[serde(default)]
    transfers: Vec<f64>,
}

/// Loads a collusion against `mech`'s grid and slot count. Table transfers
/// list the bidder slots followed by the miner; a short list is padded with
/// zero bidder transfers before its last (miner) entry. Profiles not listed
/// are left unchanged.
pub fn load_collusion(text: &str, mech: &GridMechanism) -> Result<Collusion> {
    let obj = object(text)?;
    let grid = mech.grid();
    let n = mech.n_max();
    match kind(&obj)? {
        "builtin" => {
            reject_unknown(&obj, &["kind", "name", "params"])?;
            let builtin: BuiltinCollusion = serde_json::from_value(builtin_value(&obj)?)?;
            builtin_collusion(&builtin, grid, n)
        }
        "table" => {
            reject_unknown(&obj, &["kind", "name", "members", "entries"])?;
            let members: Vec<usize> =
                field(&obj, "members")?.ok_or_else(|| Error::Spec("table needs \"members\"".into()))?;
            let name = field::<String>(&obj, "name")?.unwrap_or_else(|| "table".into());
            let entries: Vec<CollusionEntry> = field(&obj, "entries")?.unwrap_or_default();
            let count = crate::mechanism::profile_count(grid.len(), n)?;
            let mut rewrite: Vec<Vec<usize>> = (0..count).map(|i| mech.levels_of(i)).collect();
            let mut transfers = vec![vec![0.0; n + 1]; count];
            let mut seen = vec![false; count];
            for e in entries {
                let bids = pad(e.bids, n, "bids")?;
                let levels = bids.iter().map(|&b| grid.require(b)).collect::<Result<Vec<_>>>()?;
                let idx = mech.index(&levels);
                if std::mem::replace(&mut seen[idx], true) {
                    return Err(Error::Spec(format!("duplicate entry for bids {bids:?}")));
                }
                let out = pad(e.rewritten, n, "rewritten")?;
                rewrite[idx] = out.iter().map(|&b| grid.require(b)).collect::<Result<Vec<_>>>()?;
                let mut t = e.transfers;
                if !t.is_empty() {
                    if t.len() > n + 1 {
                        return Err(Error::Spec(format!("transfers has {} entries for {n} slots", t.len())));
                    }
                    let miner = t.pop().unwrap_or(0.0);
                    t.resize(n, 0.0);
                    t.push(miner);
                    transfers[idx] = t;
                }
            }
            Collusion::from_tables(name, grid.len(), n, members, rewrite, transfers)
        }
        other => Err(Error::Spec(format!("unknown collusion kind \"{other}\""))),
    }
}

fn number(s: &str) -> Result<f64> {
    let s = s.trim();
    let x = match s.split_once('/') {
        Some((p, q)) => {
            let (p, q): (f64, f64) = (
                p.trim()
                    .parse()
                    .map_err(|_| Error::Spec(format!("bad number \"{s}\"")))?,
                q.trim()
                    .parse()
                    .map_err(|_| Error::Spec(format!("bad number \"{s}\"")))?,
            );
            p / q
        }
        None => s.parse().map_err(|_| Error::Spec(format!("bad number \"{s}\"")))?,
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::Spec(format!("\"{s}\" is not a finite number")))
    }
}

/// Parses `lo:hi:steps` into `steps + 1` evenly spaced values, both ends
/// included exactly.
pub fn parse_grid_spec(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, steps] = parts[..] else {
        return Err(Error::Spec(format!("grid spec \"{s}\" is not lo:hi:steps")));
    };
    let (lo, hi) = (number(lo)?, number(hi)?);
    let steps: usize = steps
        .trim()
        .parse()
        .map_err(|_| Error::Spec(format!("bad step count in \"{s}\"")))?;
    if steps == 0 || steps > MAX_GRID_STEPS {
        return Err(Error::Spec(format!("steps must be in 1..={MAX_GRID_STEPS}")));
    }
    if lo > hi {
        return Err(Error::Spec(format!("grid spec \"{s}\" has lo > hi")));
    }
    Ok((0..=steps)
        .map(|k| {
            if k == steps {
                hi
            } else {
                lo + (hi - lo) * k as f64 / steps as f64
            }
        })
        .collect())
}

/// Parses a comma-separated level list such as `0,1/4,1/2,1,2`.
pub fn parse_levels(s: &str) -> Result<Vec<f64>> {
    if s.trim().is_empty() {
        return Err(Error::Spec("empty level list".into()));
    }
    s.split(',').map(number).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_spec_hits_both_ends() {
        let g = parse_grid_spec("0:0.3:3").unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g[3], 0.3);
        assert!(parse_grid_spec("1:0:3").is_err());
        assert!(parse_grid_spec("0:1").is_err());
        assert!(parse_grid_spec("0:1:0").is_err());
    }

    #[test]
    fn levels_accept_fractions() {
        assert_eq!(parse_levels("0, 1/4,1/2,1,2").unwrap(), vec![0.0, 0.25, 0.5, 1.0, 2.0]);
        assert!(parse_levels("0,1/0").is_err());
        assert!(parse_levels("").is_err());
    }

    #[test]
    fn unit_builtins_parse_with_or_without_params() {
        for text in [
            r#"{"kind":"builtin","name":"third_price"}"#,
            r#"{"kind":"builtin","name":"third_price","params":{}}"#,
        ] {
            let m = load_mechanism(text).unwrap();
            assert_eq!(m.n_max(), DEFAULT_N_MAX);
            assert_eq!(m.grid().len(), 11);
        }
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(load_distribution(r#"{"kind":"uniform","hi":1,"typo":2}"#).is_err());
        assert!(load_mechanism(r#"{"kind":"builtin","name":"first_price","n":2}"#).is_err());
    }

    #[test]
    fn sqrtlog_is_capped() {
        assert!(load_distribution(r#"{"kind":"sqrtlog","n":100000000}"#).is_err());
        assert!(load_distribution(r#"{"kind":"sqrtlog","n":5}"#).is_ok());
    }
}
