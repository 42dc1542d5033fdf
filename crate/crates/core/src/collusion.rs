//! Side contracts between the miner and bidders: a bid rewrite `c` plus
//! budget-balanced transfers `t`, checked for incentive compatibility and
//! individual rationality against a grid mechanism, and searched for in
//! the single-bidder case.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audits::miner_strategies;
use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::mechanism::{miner_take, profile_count, BidGrid, GridMechanism, Outcome, Profile};
use crate::numeric::QUAD_TOL;
use crate::pricing::sig9;
use crate::report::{AuditReport, Property, Witness, GAIN_TOL};

/// Largest tolerated `|sum t|` on any profile.
pub const BUDGET_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Collusion {
    name: String,
    grid_len: usize,
    n_max: usize,
    members: Vec<usize>,
    rewrite: Vec<Vec<usize>>,
    /// `n_max + 1` entries per profile, the last one the miner's.
    transfers: Vec<Vec<f64>>,
}

impl Collusion {
    /// Tabulates `rule`, which maps slot levels to (rewritten levels,
    /// transfers).
    pub fn from_rule(
        name: impl Into<String>,
        grid: &BidGrid,
        n_max: usize,
        members: Vec<usize>,
        rule: impl Fn(&[usize]) -> (Vec<usize>, Vec<f64>),
    ) -> Result<Self> {
        let count = profile_count(grid.len(), n_max)?;
        let mut rewrite = Vec::with_capacity(count);
        let mut transfers = Vec::with_capacity(count);
        let mut levels = vec![0; n_max];
        for idx in 0..count {
            crate::mechanism::decode_into(idx, grid.len(), &mut levels);
            let (r, t) = rule(&levels);
            rewrite.push(r);
            transfers.push(t);
        }
        Self::from_tables(name, grid.len(), n_max, members, rewrite, transfers)
    }

    pub fn from_tables(
        name: impl Into<String>,
        grid_len: usize,
        n_max: usize,
        mut members: Vec<usize>,
        rewrite: Vec<Vec<usize>>,
        transfers: Vec<Vec<f64>>,
    ) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if members.is_empty() || members.iter().any(|&i| i >= n_max) {
            return Err(Error::InvalidParams(format!(
                "members {members:?} must be non-empty slots below {n_max}"
            )));
        }
        let count = profile_count(grid_len, n_max)?;
        if rewrite.len() != count || transfers.len() != count {
            return Err(Error::InvalidParams(format!("collusion tables need {count} rows")));
        }
        let mut levels = vec![0; n_max];
        for idx in 0..count {
            crate::mechanism::decode_into(idx, grid_len, &mut levels);
            let (r, t) = (&rewrite[idx], &transfers[idx]);
            if r.len() != n_max || r.iter().any(|&l| l >= grid_len) {
                return Err(Error::InvalidParams(format!("bad rewrite at profile {levels:?}")));
            }
            if t.len() != n_max + 1 || t.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "need {} finite transfers at {levels:?}",
                    n_max + 1
                )));
            }
            for slot in (0..n_max).filter(|s| !members.contains(s)) {
                if r[slot] != levels[slot] {
                    return Err(Error::InvalidParams(format!(
                        "rewrite moves non-member slot {slot} at {levels:?}"
                    )));
                }
                if t[slot] != 0.0 {
                    return Err(Error::InvalidParams(format!(
                        "non-member slot {slot} receives a transfer at {levels:?}"
                    )));
                }
            }
            let sum: f64 = t.iter().sum();
            if sum.abs() > BUDGET_TOL {
                return Err(Error::InvalidParams(format!("transfers sum to {sum} at {levels:?}")));
            }
        }
        Ok(Collusion {
            name: name.into(),
            grid_len,
            n_max,
            members,
            rewrite,
            transfers,
        })
    }

    pub fn identity(grid: &BidGrid, n_max: usize, members: Vec<usize>) -> Result<Self> {
        Self::from_rule("identity", grid, n_max, members, |b| (b.to_vec(), vec![0.0; n_max + 1]))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    fn index(&self, levels: &[usize]) -> usize {
        crate::mechanism::encode(levels, self.grid_len)
    }

    pub fn rewrite(&self, levels: &[usize]) -> &[usize] {
        &self.rewrite[self.index(levels)]
    }

    pub fn transfers(&self, levels: &[usize]) -> &[f64] {
        &self.transfers[self.index(levels)]
    }

    pub fn is_member(&self, slot: usize) -> bool {
        self.members.contains(&slot)
    }

    /// Identity rewrite and zero transfers everywhere.
    pub fn is_trivial(&self) -> bool {
        (0..self.rewrite.len()).all(|idx| {
            let mut levels = vec![0; self.n_max];
            crate::mechanism::decode_into(idx, self.grid_len, &mut levels);
            self.rewrite[idx] == levels && self.transfers[idx].iter().all(|&t| t == 0.0)
        })
    }

    /// Largest `|sum t|` over profiles.
    pub fn budget_imbalance(&self) -> f64 {
        self.transfers
            .iter()
            .map(|t| t.iter().sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    fn check_against(&self, m: &GridMechanism) -> Result<()> {
        if m.grid().len() != self.grid_len || m.n_max() != self.n_max {
            return Err(Error::InvalidParams(format!(
                "collusion built for {} levels and {} slots, mechanism has {} and {}",
                self.grid_len,
                self.n_max,
                m.grid().len(),
                m.n_max()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case")]
pub enum BuiltinCollusion {
    /// Bid 5 is rewritten to 10 with transfers (6, -6).
    #[serde(rename = "example_I", alias = "example_i")]
    ExampleI,
    /// The first `k` slots collude against a posted price `reserve` with
    /// burn `burn`: only the highest colluder keeps its bid and pays the
    /// miner the excess of the second colluder bid over the reserve.
    #[serde(rename = "example_II", alias = "example_ii")]
    ExampleII {
        reserve: f64,
        burn: f64,
        k: usize,
    },
    /// Bids of at least 5 are rewritten to 10 with transfers (5, -5).
    #[serde(rename = "example_III", alias = "example_iii")]
    ExampleIII,
    /// Bids of at least `target` are rewritten to `price`; the bidder is
    /// refunded `price - target`.
    LowerPrice {
        price: f64,
        target: f64,
    },
    /// Bid `high` is rewritten to `low`, no transfers.
    BurnDrop {
        high: f64,
        low: f64,
    },
    /// Bids of at least `burn` are rewritten to `price` with refund
    /// `price - burn`.
    PriceToBurn {
        price: f64,
        burn: f64,
    },
    Identity,
}

impl BuiltinCollusion {
    pub fn label(&self) -> String {
        match self {
            BuiltinCollusion::ExampleI => "example_I".into(),
            BuiltinCollusion::ExampleII { reserve, burn, k } => format!("example_II({reserve}, {burn}, {k})"),
            BuiltinCollusion::ExampleIII => "example_III".into(),
            BuiltinCollusion::LowerPrice { price, target } => format!("lower_price({price}, {target})"),
            BuiltinCollusion::BurnDrop { high, low } => format!("burn_drop({high}, {low})"),
            BuiltinCollusion::PriceToBurn { price, burn } => format!("price_to_burn({price}, {burn})"),
            BuiltinCollusion::Identity => "identity".into(),
        }
    }
}

pub fn builtin_collusion(kind: &BuiltinCollusion, grid: &BidGrid, n_max: usize) -> Result<Collusion> {
    let name = kind.label();
    let n = n_max;
    let single = |from: &dyn Fn(f64) -> bool, to: usize, refund: f64| {
        Collusion::from_rule(name.clone(), grid, n, vec![0], |b| {
            let mut r = b.to_vec();
            let mut t = vec![0.0; n + 1];
            if b[0] > 0 && from(grid.value(b[0])) {
                r[0] = to;
                t[0] = refund;
                t[n] = -refund;
            }
            (r, t)
        })
    };
    match *kind {
        BuiltinCollusion::ExampleI => {
            let five = grid.require(5.0)?;
            let ten = grid.require(10.0)?;
            single(&|v| v == grid.value(five), ten, 6.0)
        }
        BuiltinCollusion::ExampleIII => {
            let ten = grid.require(10.0)?;
            single(&|v| v >= 5.0, ten, 5.0)
        }
        BuiltinCollusion::LowerPrice { price, target } | BuiltinCollusion::PriceToBurn { price, burn: target } => {
            let to = grid.require(price)?;
            grid.require(target)?;
            if target > price {
                return Err(Error::InvalidParams(format!("target {target} above price {price}")));
            }
            single(&|v| v >= target, to, price - target)
        }
        BuiltinCollusion::BurnDrop { high, low } => {
            let h = grid.require(high)?;
            let l = grid.require(low)?;
            single(&|v| v == grid.value(h), l, 0.0)
        }
        BuiltinCollusion::ExampleII { reserve, burn, k } => {
            if !(0.0..=reserve).contains(&burn) {
                return Err(Error::InvalidParams(format!(
                    "need 0 <= burn <= reserve, got {burn}, {reserve}"
                )));
            }
            if k == 0 || k > n_max {
                return Err(Error::InvalidParams(format!("k = {k} colluders with n_max = {n_max}")));
            }
            Collusion::from_rule(name, grid, n, (0..k).collect(), |b| {
                let mut r = b.to_vec();
                let mut t = vec![0.0; n + 1];
                let mut order: Vec<usize> = (0..k).filter(|&i| b[i] > 0).collect();
                order.sort_by(|&x, &y| b[y].cmp(&b[x]).then(x.cmp(&y)));
                if let Some(&top) = order.first() {
                    if grid.value(b[top]) >= reserve {
                        let second = order.get(1).map_or(0.0, |&s| grid.value(b[s]));
                        for &other in &order[1..] {
                            r[other] = 0;
                        }
                        t[top] = (reserve - second).min(0.0);
                        t[n] = (second - reserve).max(0.0);
                    }
                }
                (r, t)
            })
        }
        BuiltinCollusion::Identity => Collusion::identity(grid, n_max, vec![0]),
    }
}

fn bidder_side(o: &Outcome, i: usize, value: f64) -> f64 {
    let x = if o.allocated(i) { 1.0 } else { 0.0 };
    value * x - o.pay[i]
}

/// Miner utility under the collusion when it presents `prof`: the outcome
/// of the rewritten profile, its own transfer, and the transfers paid to
/// member slots it filled itself.
fn miner_side(m: &GridMechanism, col: &Collusion, prof: &Profile) -> f64 {
    let rewritten = col.rewrite(&prof.levels);
    let t = col.transfers(&prof.levels);
    let mut total = miner_take(m.outcome(rewritten), &prof.fake) + t[m.n_max()];
    for slot in prof.fake_slots() {
        total += t[slot];
    }
    total
}

fn collusive_bidder(m: &GridMechanism, col: &Collusion, levels: &[usize], i: usize, value: f64) -> f64 {
    bidder_side(m.outcome(col.rewrite(levels)), i, value) + col.transfers(levels)[i]
}

fn make_witness(
    m: &GridMechanism,
    levels: &[usize],
    dev: &Profile,
    coalition: Vec<usize>,
    description: String,
    honest: f64,
    deviant: f64,
) -> Witness {
    Witness {
        profile: m.values(levels),
        deviant_profile: m.values(&dev.levels),
        fake_slots: dev.fake_slots(),
        coalition,
        description,
        honest_value: honest,
        deviant_value: deviant,
    }
}

fn bidder_ic_at(m: &GridMechanism, col: &Collusion, levels: &[usize]) -> Option<Witness> {
    for &i in col.members() {
        if levels[i] == 0 {
            continue;
        }
        let v = m.grid().value(levels[i]);
        let honest = collusive_bidder(m, col, levels, i, v);
        for d in 0..m.grid().len() {
            if d == levels[i] {
                continue;
            }
            let mut dev = levels.to_vec();
            dev[i] = d;
            let u = collusive_bidder(m, col, &dev, i, v);
            if u > honest + GAIN_TOL {
                let desc = format!("member {i} with value {v} bids {}", m.grid().value(d));
                return Some(make_witness(m, levels, &Profile::honest(dev), vec![i], desc, honest, u));
            }
        }
    }
    None
}

fn miner_ic_at(m: &GridMechanism, col: &Collusion, levels: &[usize], budget: usize) -> Option<Witness> {
    let honest = miner_side(m, col, &Profile::honest(levels.to_vec()));
    for s in miner_strategies(levels, m.grid().len(), budget).into_iter().skip(1) {
        let dev = s.apply(levels);
        let u = miner_side(m, col, &dev);
        if u > honest + GAIN_TOL {
            return Some(make_witness(
                m,
                levels,
                &dev,
                Vec::new(),
                s.describe(m.grid()),
                honest,
                u,
            ));
        }
    }
    None
}

/// IC of a collusion, enforced on every profile unless the collusion is
/// trivial: members never gain by misreporting into it, and the miner never
/// gains by omitting or injecting bids before it is applied. Bidder
/// deviations are searched over all profiles before miner deviations.
pub fn check_collusion_ic(m: &GridMechanism, col: &Collusion, fake_budget: usize) -> Result<AuditReport> {
    col.check_against(m)?;
    if col.is_trivial() {
        return Ok(AuditReport::pass(Property::CollusionIc));
    }
    let n = m.profile_count();
    let found = (0..n)
        .into_par_iter()
        .find_map_first(|idx| bidder_ic_at(m, col, &m.levels_of(idx)))
        .or_else(|| {
            (0..n)
                .into_par_iter()
                .find_map_first(|idx| miner_ic_at(m, col, &m.levels_of(idx), fake_budget))
        });
    Ok(AuditReport::from_witness(Property::CollusionIc, found))
}

/// IC restricted to one honest bid vector.
pub fn check_collusion_ic_at(
    m: &GridMechanism,
    col: &Collusion,
    bids: &[f64],
    fake_budget: usize,
) -> Result<AuditReport> {
    col.check_against(m)?;
    let levels = m.levels_for_bids(bids)?;
    if col.is_trivial() {
        return Ok(AuditReport::pass(Property::CollusionIc));
    }
    let found = bidder_ic_at(m, col, &levels).or_else(|| miner_ic_at(m, col, &levels, fake_budget));
    Ok(AuditReport::from_witness(Property::CollusionIc, found))
}

/// Ex-post IR for members: `u_i(c(b); b_i) + t_i(b) >= 0`.
pub fn check_collusion_ex_post_ir(m: &GridMechanism, col: &Collusion) -> Result<AuditReport> {
    col.check_against(m)?;
    let found = (0..m.profile_count()).into_par_iter().find_map_first(|idx| {
        let levels = m.levels_of(idx);
        col.members().iter().filter(|&&i| levels[i] > 0).find_map(|&i| {
            let v = m.grid().value(levels[i]);
            let u = collusive_bidder(m, col, &levels, i, v);
            (u < -GAIN_TOL).then(|| {
                let desc = format!("member {i} ends with {u}");
                make_witness(m, &levels, &Profile::honest(levels.clone()), vec![i], desc, 0.0, u)
            })
        })
    });
    Ok(AuditReport::from_witness(Property::CollusionExPostIr, found))
}

/// Per-level probability and partial mean of the prior, for bids snapped
/// down to the grid: level `k` collects values in `[l_k, l_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorCells {
    pub mass: Vec<f64>,
    pub mean: Vec<f64>,
}

impl PriorCells {
    pub fn new(prior: &Distribution, grid: &BidGrid) -> Self {
        let levels = grid.levels();
        let (lo, hi) = prior.support();
        let mut mass = Vec::with_capacity(levels.len());
        let mut mean = Vec::with_capacity(levels.len());
        for k in 0..levels.len() {
            let a = if k == 0 { lo.min(0.0) - 1.0 } else { levels[k] };
            let b = if k + 1 < levels.len() {
                levels[k + 1]
            } else {
                hi.max(levels[k]) + 1.0
            };
            let (p, e) = match prior {
                Distribution::Continuous(_) => {
                    let (a, b) = (a.max(lo), b.min(hi));
                    if a >= b {
                        (0.0, 0.0)
                    } else {
                        prior.cell_moments(a, b)
                    }
                }
                Distribution::Discrete(_) => prior.cell_moments(a, b),
            };
            mass.push(p);
            mean.push(e);
        }
        PriorCells { mass, mean }
    }
}

/// Ex-ante expected utilities, honest and under the collusion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Expectations {
    /// `(slot, honest, collusive)` per member.
    pub members: Vec<(usize, f64, f64)>,
    pub miner: (f64, f64),
}

impl Expectations {
    /// Gain of members plus miner.
    pub fn welfare_gain(&self) -> f64 {
        let members: f64 = self.members.iter().map(|&(_, h, c)| c - h).sum();
        members + self.miner.1 - self.miner.0
    }
}

/// Expectations with every slot an iid bidder drawn from the prior.
pub fn expectations(m: &GridMechanism, col: &Collusion, cells: &PriorCells) -> Result<Expectations> {
    col.check_against(m)?;
    let n = m.n_max();
    let mut members: Vec<(usize, f64, f64)> = col.members().iter().map(|&i| (i, 0.0, 0.0)).collect();
    let mut miner = (0.0, 0.0);
    for idx in 0..m.profile_count() {
        let levels = m.levels_of(idx);
        let prob: f64 = levels.iter().map(|&k| cells.mass[k]).product();
        let honest = m.outcome(&levels);
        let rewritten = m.outcome(col.rewrite(&levels));
        let t = col.transfers(&levels);
        if prob > 0.0 {
            let fake = vec![false; n];
            miner.0 += prob * miner_take(honest, &fake);
            miner.1 += prob * (miner_take(rewritten, &fake) + t[n]);
        }
        for entry in members.iter_mut() {
            let i = entry.0;
            let others: f64 = (0..n).filter(|&j| j != i).map(|j| cells.mass[levels[j]]).product();
            if others == 0.0 {
                continue;
            }
            let (p, e) = (cells.mass[levels[i]], cells.mean[levels[i]]);
            let linear = |o: &Outcome| if o.allocated(i) { e } else { 0.0 } - p * o.pay[i];
            entry.1 += others * linear(honest);
            entry.2 += others * (linear(rewritten) + p * t[i]);
        }
    }
    Ok(Expectations { members, miner })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrReport {
    pub audit: AuditReport,
    pub expectations: Expectations,
}

/// Ex-ante IR of every member and of the miner.
pub fn check_collusion_ir(m: &GridMechanism, col: &Collusion, prior: &Distribution) -> Result<IrReport> {
    let cells = PriorCells::new(prior, m.grid());
    let ex = expectations(m, col, &cells)?;
    let mut failure = None;
    for &(i, h, c) in &ex.members {
        if c < h - QUAD_TOL {
            failure = Some((
                vec![i],
                format!("member {i} expects {c} under the collusion, {h} without"),
                h,
                c,
            ));
            break;
        }
    }
    if failure.is_none() && ex.miner.1 < ex.miner.0 - QUAD_TOL {
        let (h, c) = ex.miner;
        failure = Some((
            Vec::new(),
            format!("miner expects {c} under the collusion, {h} without"),
            h,
            c,
        ));
    }
    let audit = match failure {
        Some((coalition, description, honest, collusive)) => AuditReport::fail(
            Property::CollusionIr,
            Witness {
                profile: Vec::new(),
                deviant_profile: Vec::new(),
                fake_slots: Vec::new(),
                coalition,
                description,
                honest_value: collusive,
                deviant_value: honest,
            },
        ),
        None => AuditReport::pass(Property::CollusionIr),
    };
    Ok(IrReport {
        audit,
        expectations: ex,
    })
}

/// The single-bidder mechanism `(a o c, p o c - t_1, burn o c)`.
pub fn compose(m: &GridMechanism, col: &Collusion) -> Result<GridMechanism> {
    if m.n_max() != 1 || col.members() != [0] {
        return Err(Error::CompositionUndefined { n_max: m.n_max() });
    }
    col.check_against(m)?;
    let table = (0..m.profile_count())
        .map(|idx| {
            let levels = m.levels_of(idx);
            let mut o = m.outcome(col.rewrite(&levels)).clone();
            o.pay[0] -= col.transfers(&levels)[0];
            o
        })
        .collect();
    GridMechanism::from_table(format!("{} o {}", m.name(), col.name()), m.grid().clone(), 1, table)
}

/// A profitable IC+IR collusion found by [`search_ic_ir_collusion`].
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub collusion: Collusion,
    /// Lowest rewritten bid.
    pub threshold: f64,
    /// What a rewritten bidder pays net of the refund.
    pub effective_price: f64,
    pub miner_gain: f64,
}

/// Strict expected miner gain needed to call a collusion profitable.
pub const PROFIT_TOL: f64 = 1e-9;

fn check_single_slot(m: &GridMechanism, k: usize) -> Result<()> {
    if m.n_max() != 1 || k != 1 {
        return Err(Error::Unsupported(format!(
            "collusion search covers one bidder and one colluder, got n_max = {} and k = {k}",
            m.n_max()
        )));
    }
    Ok(())
}

fn threshold_collusion(m: &GridMechanism, theta: usize, to: usize, refund: f64) -> Result<Collusion> {
    let name = format!(
        "threshold({} -> {}, refund {})",
        sig9(m.grid().value(theta)),
        sig9(m.grid().value(to)),
        sig9(refund)
    );
    Collusion::from_rule(name, m.grid(), 1, vec![0], |b| {
        if b[0] >= theta {
            (vec![to], vec![refund, -refund])
        } else {
            (b.to_vec(), vec![0.0, 0.0])
        }
    })
}

/// Searches threshold collusions `b >= theta -> w` against a single-bidder
/// mechanism, where `w` is the lowest allocating level, with a refund that
/// leaves the bidder paying a grid level. Among the IC, ex-post IR and
/// ex-ante IR candidates with strictly positive miner gain, returns the one
/// with the largest gain (lowest threshold on ties).
pub fn search_ic_ir_collusion(m: &GridMechanism, prior: &Distribution, k: usize) -> Result<Option<SearchResult>> {
    check_single_slot(m, k)?;
    let basic = crate::mechanism::check_basic_properties(m);
    if !basic.burn_balance.passed {
        return Err(Error::InvalidParams("mechanism burns more than it charges".into()));
    }
    let Some(w) = (1..m.grid().len()).find(|&l| m.outcome(&[l]).allocated(0)) else {
        return Ok(None);
    };
    let price = m.outcome(&[w]).pay[0];
    let cells = PriorCells::new(prior, m.grid());
    let levels = m.grid().levels();
    let take: Vec<f64> = (0..levels.len())
        .map(|b| miner_take(m.outcome(&[b]), &[false]))
        .collect();
    let target = m.outcome(&[w]);
    let x_w = if target.allocated(0) { 1.0 } else { 0.0 };
    let honest_miner: f64 = (0..levels.len()).map(|b| cells.mass[b] * take[b]).sum();
    let honest_bidder: f64 = (0..levels.len())
        .map(|b| {
            let o = m.outcome(&[b]);
            (if o.allocated(0) { cells.mean[b] } else { 0.0 }) - cells.mass[b] * o.pay[0]
        })
        .sum();
    // Closed forms for the threshold rule; only survivors are tabulated.
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for theta in 1..w {
        for (l, &level) in levels.iter().enumerate().filter(|&(_, &v)| v <= price) {
            let refund = price - level;
            let ex_post_ok = (theta..levels.len()).all(|b| x_w * levels[b] - target.pay[0] + refund >= -GAIN_TOL);
            if !ex_post_ok {
                continue;
            }
            let mut miner = 0.0;
            let mut bidder = 0.0;
            for b in 0..levels.len() {
                if b >= theta {
                    miner += cells.mass[b] * (take[w] - refund);
                    bidder += x_w * cells.mean[b] - cells.mass[b] * (target.pay[0] - refund);
                } else {
                    let o = m.outcome(&[b]);
                    miner += cells.mass[b] * take[b];
                    bidder += (if o.allocated(0) { cells.mean[b] } else { 0.0 }) - cells.mass[b] * o.pay[0];
                }
            }
            let gain = miner - honest_miner;
            if gain > PROFIT_TOL && bidder >= honest_bidder - QUAD_TOL {
                candidates.push((gain, theta, l));
            }
        }
    }
    candidates.sort_by(|a, b| {
        if (a.0 - b.0).abs() <= GAIN_TOL {
            (a.1, a.2).cmp(&(b.1, b.2))
        } else {
            b.0.total_cmp(&a.0)
        }
    });
    for (gain, theta, l) in candidates {
        let col = threshold_collusion(m, theta, w, price - levels[l])?;
        let ex = expectations(m, &col, &cells)?;
        debug_assert!((ex.miner.1 - ex.miner.0 - gain).abs() < 1e-9);
        if check_collusion_ic(m, &col, 0)?.passed {
            return Ok(Some(SearchResult {
                collusion: col,
                threshold: levels[theta],
                effective_price: levels[l],
                miner_gain: gain,
            }));
        }
    }
    Ok(None)
}

/// Largest grid for [`search_unrestricted`].
pub const MAX_UNRESTRICTED_LEVELS: usize = 6;

/// Every rewrite map of the positive levels (level 0 stays absent), every
/// set of positive levels receiving a constant transfer, and every transfer
/// drawn from the level differences. Returns the largest strict miner gain
/// among IC+IR collusions.
pub fn search_unrestricted(m: &GridMechanism, prior: &Distribution) -> Result<Option<(Collusion, f64)>> {
    check_single_slot(m, 1)?;
    let l = m.grid().len();
    if l > MAX_UNRESTRICTED_LEVELS {
        return Err(Error::Unsupported(format!(
            "unrestricted search needs at most {MAX_UNRESTRICTED_LEVELS} levels"
        )));
    }
    let cells = PriorCells::new(prior, m.grid());
    let levels = m.grid().levels();
    let mut refunds: Vec<f64> = levels
        .iter()
        .flat_map(|&a| levels.iter().map(move |&b| a - b))
        .collect();
    refunds.sort_by(f64::total_cmp);
    refunds.dedup();
    let maps = l.pow(l as u32 - 1);
    let masks = 1usize << (l - 1);
    let best = (0..maps * masks)
        .into_par_iter()
        .flat_map_iter(|code| {
            let (map, mask) = (code / masks, code % masks);
            let mut target = vec![0usize; l - 1];
            crate::mechanism::decode_into(map, l, &mut target);
            let identity = target.iter().enumerate().all(|(k, &t)| t == k + 1);
            let cells = &cells;
            let refunds = &refunds;
            refunds.iter().filter_map(move |&tau| {
                if (tau == 0.0 && mask != 0) || (identity && (tau == 0.0 || mask == 0)) {
                    return None;
                }
                let paid = |b: usize| b > 0 && mask >> (b - 1) & 1 == 1;
                let col = Collusion::from_rule("unrestricted", m.grid(), 1, vec![0], |b| {
                    let to = if b[0] > 0 { target[b[0] - 1] } else { 0 };
                    let t = if paid(b[0]) { tau } else { 0.0 };
                    (vec![to], vec![t, -t])
                })
                .ok()?;
                if !check_collusion_ex_post_ir(m, &col).ok()?.passed {
                    return None;
                }
                let ex = expectations(m, &col, cells).ok()?;
                let gain = ex.miner.1 - ex.miner.0;
                if gain <= PROFIT_TOL || ex.members.iter().any(|&(_, h, c)| c < h - QUAD_TOL) {
                    return None;
                }
                check_collusion_ic(m, &col, 0).ok()?.passed.then_some((col, gain))
            })
        })
        .reduce_with(|a, b| if b.1 > a.1 + GAIN_TOL { b } else { a });
    Ok(best)
}
