//! Deterministic single-item mechanisms tabulated over a finite bid grid.
//!
//! A profile has exactly `n_max` slots; bid level 0 means the slot is empty.
//! Tables are indexed by the mixed-radix number of the slot levels, slot 0
//! being the most significant digit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{AuditReport, Property, Witness, GAIN_TOL};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BidGrid {
    levels: Vec<f64>,
}

impl BidGrid {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::InvalidGrid("need 0 and at least one positive level".into()));
        }
        if levels[0] != 0.0 {
            return Err(Error::InvalidGrid(format!("first level must be 0, got {}", levels[0])));
        }
        if levels.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("levels must be finite".into()));
        }
        if let Some(w) = levels.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(format!(
                "levels not strictly increasing at {} -> {}",
                w[0], w[1]
            )));
        }
        Ok(BidGrid { levels })
    }

    /// `steps + 1` equally spaced levels on `[0, max]`.
    pub fn uniform(max: f64, steps: usize) -> Result<Self> {
        if !(max > 0.0) || steps == 0 {
            return Err(Error::InvalidGrid(format!(
                "need max > 0 and steps > 0, got {max}, {steps}"
            )));
        }
        Self::new((0..=steps).map(|k| max * k as f64 / steps as f64).collect())
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, level: usize) -> f64 {
        self.levels[level]
    }

    /// Level index of `v`, allowing a relative error of 1e-12.
    pub fn index_of(&self, v: f64) -> Option<usize> {
        self.levels
            .iter()
            .position(|&l| (l - v).abs() <= 1e-12 * l.abs().max(1.0))
    }

    pub fn require(&self, v: f64) -> Result<usize> {
        self.index_of(v)
            .ok_or_else(|| Error::InvalidParams(format!("{v} is not a grid level")))
    }

    /// Highest level not above `v` (0 for `v` below the first positive level).
    pub fn snap_down(&self, v: f64) -> usize {
        self.levels
            .iter()
            .rposition(|&l| l <= v + 1e-12 * l.abs().max(1.0))
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub winner: Option<usize>,
    pub pay: Vec<f64>,
    pub burn: Vec<f64>,
}

impl Outcome {
    pub fn nobody(n: usize) -> Self {
        Outcome {
            winner: None,
            pay: vec![0.0; n],
            burn: vec![0.0; n],
        }
    }

    pub fn single(n: usize, winner: usize, pay: f64, burn: f64) -> Self {
        let mut o = Self::nobody(n);
        o.winner = Some(winner);
        o.pay[winner] = pay;
        o.burn[winner] = burn;
        o
    }

    pub fn allocated(&self, i: usize) -> bool {
        self.winner == Some(i)
    }
}

/// Bids as level indices plus the slots the miner filled itself.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Profile {
    pub levels: Vec<usize>,
    pub fake: Vec<bool>,
}

impl Profile {
    pub fn honest(levels: Vec<usize>) -> Self {
        let fake = vec![false; levels.len()];
        Profile { levels, fake }
    }

    pub fn fake_slots(&self) -> Vec<usize> {
        (0..self.fake.len()).filter(|&i| self.fake[i]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMechanism {
    name: String,
    grid: BidGrid,
    n_max: usize,
    table: Vec<Outcome>,
}

/// Upper bound on table size.
pub const MAX_PROFILES: usize = 1 << 22;

pub(crate) fn profile_count(grid_len: usize, n_max: usize) -> Result<usize> {
    let mut count: usize = 1;
    for _ in 0..n_max {
        count = count
            .checked_mul(grid_len)
            .filter(|&c| c <= MAX_PROFILES)
            .ok_or_else(|| Error::InvalidParams(format!("{grid_len}^{n_max} profiles is too many")))?;
    }
    Ok(count)
}

impl GridMechanism {
    /// Tabulates `rule`, which receives the bid values of every slot.
    pub fn from_rule(
        name: impl Into<String>,
        grid: BidGrid,
        n_max: usize,
        rule: impl Fn(&[f64]) -> Outcome,
    ) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::InvalidParams("n_max must be at least 1".into()));
        }
        let count = profile_count(grid.len(), n_max)?;
        let mut table = Vec::with_capacity(count);
        let mut levels = vec![0usize; n_max];
        for idx in 0..count {
            decode_into(idx, grid.len(), &mut levels);
            let bids: Vec<f64> = levels.iter().map(|&l| grid.value(l)).collect();
            table.push(rule(&bids));
        }
        Self::from_table(name, grid, n_max, table)
    }

    pub fn from_table(name: impl Into<String>, grid: BidGrid, n_max: usize, table: Vec<Outcome>) -> Result<Self> {
        let count = profile_count(grid.len(), n_max)?;
        if table.len() != count {
            return Err(Error::InvalidParams(format!(
                "table has {} rows, expected {count}",
                table.len()
            )));
        }
        for o in &table {
            if o.pay.len() != n_max || o.burn.len() != n_max {
                return Err(Error::InvalidParams(
                    "payment and burn vectors must have n_max entries".into(),
                ));
            }
            if o.winner.is_some_and(|w| w >= n_max) {
                return Err(Error::InvalidParams("winner index out of range".into()));
            }
            if o.pay.iter().chain(&o.burn).any(|x| !x.is_finite()) {
                return Err(Error::InvalidParams("payments and burns must be finite".into()));
            }
        }
        Ok(GridMechanism {
            name: name.into(),
            grid,
            n_max,
            table,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn grid(&self) -> &BidGrid {
        &self.grid
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn table(&self) -> &[Outcome] {
        &self.table
    }

    pub fn profile_count(&self) -> usize {
        self.table.len()
    }

    pub fn index(&self, levels: &[usize]) -> usize {
        encode(levels, self.grid.len())
    }

    pub fn levels_of(&self, idx: usize) -> Vec<usize> {
        let mut levels = vec![0; self.n_max];
        decode_into(idx, self.grid.len(), &mut levels);
        levels
    }

    pub fn outcome(&self, levels: &[usize]) -> &Outcome {
        &self.table[self.index(levels)]
    }

    /// Outcome for bid values; shorter vectors are padded with empty slots.
    pub fn outcome_for_bids(&self, bids: &[f64]) -> Result<&Outcome> {
        Ok(self.outcome(&self.levels_for_bids(bids)?))
    }

    pub fn levels_for_bids(&self, bids: &[f64]) -> Result<Vec<usize>> {
        if bids.len() > self.n_max {
            return Err(Error::InvalidParams(format!(
                "{} bids exceed n_max = {}",
                bids.len(),
                self.n_max
            )));
        }
        let mut levels = vec![0; self.n_max];
        for (slot, &b) in bids.iter().enumerate() {
            levels[slot] = self.grid.require(b)?;
        }
        Ok(levels)
    }

    pub fn values(&self, levels: &[usize]) -> Vec<f64> {
        levels.iter().map(|&l| self.grid.value(l)).collect()
    }

    pub fn set_outcome(&mut self, idx: usize, outcome: Outcome) {
        assert_eq!(outcome.pay.len(), self.n_max);
        self.table[idx] = outcome;
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

pub(crate) fn encode(levels: &[usize], base: usize) -> usize {
    levels.iter().fold(0, |acc, &l| acc * base + l)
}

pub(crate) fn decode_into(mut idx: usize, base: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = idx % base;
        idx /= base;
    }
}

/// `v_i x_i - p_i`.
pub fn bidder_utility(m: &GridMechanism, prof: &Profile, i: usize, value: f64) -> f64 {
    let o = m.outcome(&prof.levels);
    let x = if o.allocated(i) { 1.0 } else { 0.0 };
    value * x - o.pay[i]
}

/// Net payments of real bidders minus the burns of the miner's own bids.
pub fn miner_utility(m: &GridMechanism, prof: &Profile) -> f64 {
    miner_take(m.outcome(&prof.levels), &prof.fake)
}

pub(crate) fn miner_take(o: &Outcome, fake: &[bool]) -> f64 {
    let mut total = 0.0;
    for (i, &is_fake) in fake.iter().enumerate() {
        if is_fake {
            total -= o.burn[i];
        } else {
            total += o.pay[i] - o.burn[i];
        }
    }
    total
}

/// Miner utility plus the utilities of the coalition's real bidders.
pub fn joint_utility(m: &GridMechanism, prof: &Profile, valuations: &[f64], coalition: &[usize]) -> f64 {
    let o = m.outcome(&prof.levels);
    joint_from_outcome(o, &prof.fake, valuations, coalition)
}

pub(crate) fn joint_from_outcome(o: &Outcome, fake: &[bool], valuations: &[f64], coalition: &[usize]) -> f64 {
    let mut total = miner_take(o, fake);
    for &i in coalition {
        let x = if o.allocated(i) { 1.0 } else { 0.0 };
        total += valuations[i] * x - o.pay[i];
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case")]
pub enum BuiltinMechanism {
    PostedPrice {
        price: f64,
        burn: f64,
    },
    PostedBurn {
        burn: f64,
    },
    ThirdPrice,
    SecondPrice,
    FirstPrice,
    /// Highest bid wins if it meets the reserve and pays the larger of the
    /// reserve and the second bid; `burn` is burnt.
    SecondPriceReserve {
        reserve: f64,
        burn: f64,
    },
}

impl BuiltinMechanism {
    pub fn label(&self) -> String {
        match self {
            BuiltinMechanism::PostedPrice { price, burn } => format!("posted_price({price}, {burn})"),
            BuiltinMechanism::PostedBurn { burn } => format!("posted_burn({burn})"),
            BuiltinMechanism::ThirdPrice => "third_price".into(),
            BuiltinMechanism::SecondPrice => "second_price".into(),
            BuiltinMechanism::FirstPrice => "first_price".into(),
            BuiltinMechanism::SecondPriceReserve { reserve, burn } => {
                format!("second_price_reserve({reserve}, {burn})")
            }
        }
    }
}

/// Highest nonzero bid, lowest index on ties.
fn highest(bids: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &b) in bids.iter().enumerate() {
        if b > 0.0 && best.is_none_or(|j| b > bids[j]) {
            best = Some(i);
        }
    }
    best
}

/// `k`-th highest bid (1-based), 0 if fewer than `k` bidders.
fn kth_highest(bids: &[f64], k: usize) -> f64 {
    let mut sorted: Vec<f64> = bids.iter().copied().filter(|&b| b > 0.0).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted.get(k - 1).copied().unwrap_or(0.0)
}

pub fn builtin_mechanism(kind: BuiltinMechanism, grid: BidGrid, n_max: usize) -> Result<GridMechanism> {
    let name = kind.label();
    match kind {
        BuiltinMechanism::PostedPrice { price, burn }
        | BuiltinMechanism::SecondPriceReserve { reserve: price, burn } => {
            if !(burn >= 0.0 && price.is_finite() && burn.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "need finite price and burn >= 0, got {price}, {burn}"
                )));
            }
            if burn > price {
                return Err(Error::InvalidParams(format!("burn {burn} exceeds price {price}")));
            }
        }
        BuiltinMechanism::PostedBurn { burn } if !(burn >= 0.0 && burn.is_finite()) => {
            return Err(Error::InvalidParams(format!(
                "burn must be finite and >= 0, got {burn}"
            )));
        }
        _ => {}
    }
    let n = n_max;
    GridMechanism::from_rule(name, grid, n_max, move |bids| match kind {
        BuiltinMechanism::PostedPrice { price, burn } => posted(bids, n, price, burn),
        BuiltinMechanism::PostedBurn { burn } => posted(bids, n, burn, burn),
        BuiltinMechanism::ThirdPrice => ranked(bids, n, 3),
        BuiltinMechanism::SecondPrice => ranked(bids, n, 2),
        BuiltinMechanism::FirstPrice => ranked(bids, n, 1),
        BuiltinMechanism::SecondPriceReserve { reserve, burn } => match highest(bids) {
            Some(w) if bids[w] >= reserve => Outcome::single(n, w, kth_highest(bids, 2).max(reserve), burn),
            _ => Outcome::nobody(n),
        },
    })
}

fn posted(bids: &[f64], n: usize, price: f64, burn: f64) -> Outcome {
    match bids.iter().position(|&b| b > 0.0 && b >= price) {
        Some(w) => Outcome::single(n, w, price, burn),
        None => Outcome::nobody(n),
    }
}

fn ranked(bids: &[f64], n: usize, k: usize) -> Outcome {
    match highest(bids) {
        Some(w) => Outcome::single(n, w, kth_highest(bids, k), 0.0),
        None => Outcome::nobody(n),
    }
}

/// Per-property verdicts of the basic auction properties.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasicReport {
    pub allocation: AuditReport,
    pub individual_rationality: AuditReport,
    pub burn_balance: AuditReport,
    pub anonymity: AuditReport,
}

impl BasicReport {
    pub fn passed(&self) -> bool {
        self.reports().iter().all(|r| r.passed)
    }

    pub fn reports(&self) -> [&AuditReport; 4] {
        [
            &self.allocation,
            &self.individual_rationality,
            &self.burn_balance,
            &self.anonymity,
        ]
    }
}

fn simple_witness(m: &GridMechanism, levels: &[usize], description: String, honest: f64, deviant: f64) -> Witness {
    let bids = m.values(levels);
    Witness {
        profile: bids.clone(),
        deviant_profile: bids,
        fake_slots: Vec::new(),
        coalition: Vec::new(),
        description,
        honest_value: honest,
        deviant_value: deviant,
    }
}

/// Exhaustive check of allocation validity, EPIR, burn balance and
/// anonymity (the last on profiles without tied nonzero bids).
pub fn check_basic_properties(m: &GridMechanism) -> BasicReport {
    let mut allocation = None;
    let mut ir = None;
    let mut bb = None;
    let mut anon = None;
    for idx in 0..m.profile_count() {
        let levels = m.levels_of(idx);
        let bids = m.values(&levels);
        let o = &m.table()[idx];
        if allocation.is_none() {
            if let Some(w) = o.winner.filter(|&w| levels[w] == 0) {
                allocation = Some(simple_witness(
                    m,
                    &levels,
                    format!("empty slot {w} is allocated"),
                    0.0,
                    1.0,
                ));
            }
        }
        if ir.is_none() {
            for i in 0..m.n_max() {
                let cap = if o.allocated(i) { bids[i] } else { 0.0 };
                if o.pay[i] > cap + GAIN_TOL {
                    let what = if o.allocated(i) {
                        "winner pays above its bid"
                    } else {
                        "unallocated bidder pays"
                    };
                    ir = Some(simple_witness(m, &levels, format!("slot {i}: {what}"), cap, o.pay[i]));
                    break;
                }
            }
        }
        if bb.is_none() {
            for i in 0..m.n_max() {
                if o.burn[i] < -GAIN_TOL || o.burn[i] > o.pay[i] + GAIN_TOL {
                    bb = Some(simple_witness(
                        m,
                        &levels,
                        format!("slot {i}: burn {} outside [0, pay {}]", o.burn[i], o.pay[i]),
                        o.pay[i],
                        o.burn[i],
                    ));
                    break;
                }
            }
        }
        if anon.is_none() && tie_free(&levels) {
            anon = anonymity_violation(m, &levels);
        }
    }
    BasicReport {
        allocation: AuditReport::from_witness(Property::Allocation, allocation),
        individual_rationality: AuditReport::from_witness(Property::IndividualRationality, ir),
        burn_balance: AuditReport::from_witness(Property::BurnBalance, bb),
        anonymity: AuditReport::from_witness(Property::Anonymity, anon),
    }
}

fn tie_free(levels: &[usize]) -> bool {
    let nonzero: Vec<usize> = levels.iter().copied().filter(|&l| l > 0).collect();
    let mut sorted = nonzero.clone();
    sorted.sort_unstable();
    sorted.dedup();
    sorted.len() == nonzero.len()
}

/// Transpositions generate all permutations, so checking each slot swap on
/// every tie-free profile covers permutation equivariance.
fn anonymity_violation(m: &GridMechanism, levels: &[usize]) -> Option<Witness> {
    let o = m.outcome(levels);
    for i in 0..m.n_max() {
        for j in i + 1..m.n_max() {
            if levels[i] == levels[j] {
                continue;
            }
            let mut swapped = levels.to_vec();
            swapped.swap(i, j);
            let s = m.outcome(&swapped);
            let swap = |k: usize| {
                if k == i {
                    j
                } else if k == j {
                    i
                } else {
                    k
                }
            };
            let same_winner = o.winner.map(swap) == s.winner;
            let same_money = (0..m.n_max()).all(|k| {
                (o.pay[k] - s.pay[swap(k)]).abs() <= GAIN_TOL && (o.burn[k] - s.burn[swap(k)]).abs() <= GAIN_TOL
            });
            if !(same_winner && same_money) {
                let mut w = simple_witness(
                    m,
                    levels,
                    format!("swapping slots {i} and {j} changes the outcome"),
                    0.0,
                    1.0,
                );
                w.deviant_profile = m.values(&swapped);
                return Some(w);
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quarter_grid() -> BidGrid {
        BidGrid::new(vec![0.0, 0.25, 0.5, 1.0, 2.0]).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(BidGrid::new(vec![0.0]).is_err());
        assert!(BidGrid::new(vec![0.1, 1.0]).is_err());
        assert!(BidGrid::new(vec![0.0, 1.0, 1.0]).is_err());
        let g = BidGrid::uniform(1.0, 10).unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g.index_of(0.3), Some(3));
        assert_eq!(g.snap_down(0.349), 3);
        assert_eq!(g.snap_down(0.05), 0);
    }

    #[test]
    fn table_indexing_roundtrip() {
        let m = builtin_mechanism(BuiltinMechanism::ThirdPrice, quarter_grid(), 3).unwrap();
        assert_eq!(m.profile_count(), 125);
        for idx in 0..m.profile_count() {
            assert_eq!(m.index(&m.levels_of(idx)), idx);
        }
    }

    #[test]
    fn third_price_utilities() {
        let m = builtin_mechanism(BuiltinMechanism::ThirdPrice, quarter_grid(), 3).unwrap();
        let honest = Profile::honest(m.levels_for_bids(&[1.0, 0.5, 0.25]).unwrap());
        let vals = [1.0, 0.5, 0.25];
        assert_eq!(bidder_utility(&m, &honest, 0, 1.0), 0.75);
        assert_eq!(miner_utility(&m, &honest), 0.25);
        assert_eq!(joint_utility(&m, &honest, &vals, &[1]), 0.25);
        let dev = Profile::honest(m.levels_for_bids(&[1.0, 2.0, 0.25]).unwrap());
        assert_eq!(joint_utility(&m, &dev, &vals, &[1]), 0.5);
        // The whole coalition gets the winner's valuation.
        assert_eq!(joint_utility(&m, &honest, &vals, &[0, 1, 2]), 1.0);
    }

    #[test]
    fn third_price_with_two_bids_is_free() {
        let m = builtin_mechanism(BuiltinMechanism::ThirdPrice, quarter_grid(), 3).unwrap();
        let o = m.outcome_for_bids(&[1.0, 0.5]).unwrap();
        assert_eq!(o.winner, Some(0));
        assert_eq!(o.pay[0], 0.0);
        assert!(check_basic_properties(&m).passed());
    }

    #[test]
    fn posted_price_and_burn_examples() {
        let g = BidGrid::new((0..=20).map(f64::from).collect()).unwrap();
        let m = builtin_mechanism(BuiltinMechanism::PostedPrice { price: 10.0, burn: 0.0 }, g.clone(), 1).unwrap();
        let o = m.outcome_for_bids(&[10.0]).unwrap();
        assert_eq!((o.winner, o.pay[0], o.burn[0]), (Some(0), 10.0, 0.0));
        let four = Profile::honest(m.levels_for_bids(&[4.0]).unwrap());
        assert_eq!(bidder_utility(&m, &four, 0, 4.0), 0.0);
        let ten = Profile::honest(m.levels_for_bids(&[10.0]).unwrap());
        assert_eq!(bidder_utility(&m, &ten, 0, 20.0), 10.0);
        assert!(check_basic_properties(&m).passed());

        let pb = builtin_mechanism(BuiltinMechanism::PostedBurn { burn: 3.0 }, g, 1).unwrap();
        let five = Profile::honest(pb.levels_for_bids(&[5.0]).unwrap());
        let o = pb.outcome(&five.levels);
        assert_eq!((o.pay[0], o.burn[0]), (3.0, 3.0));
        assert_eq!(miner_utility(&pb, &five), 0.0);
    }

    #[test]
    fn burn_above_price_rejected() {
        let r = builtin_mechanism(
            BuiltinMechanism::PostedPrice { price: 0.5, burn: 0.6 },
            quarter_grid(),
            1,
        );
        assert!(matches!(r, Err(Error::InvalidParams(_))));
    }

    #[test]
    fn overpaying_mutant_fails_ir() {
        let m = builtin_mechanism(BuiltinMechanism::FirstPrice, quarter_grid(), 2).unwrap();
        let mut mutant = m.clone();
        for idx in 0..m.profile_count() {
            let mut o = m.table()[idx].clone();
            if let Some(w) = o.winner {
                o.pay[w] += 1.0;
            }
            mutant.set_outcome(idx, o);
        }
        let r = check_basic_properties(&mutant);
        assert!(!r.individual_rationality.passed);
        assert!(r.burn_balance.passed);
    }

    #[test]
    fn index_tie_break_breaks_anonymity_only_for_posted_price() {
        let g = quarter_grid();
        let pp = builtin_mechanism(BuiltinMechanism::PostedPrice { price: 0.5, burn: 0.0 }, g.clone(), 2).unwrap();
        assert!(!check_basic_properties(&pp).anonymity.passed);
        let sp = builtin_mechanism(BuiltinMechanism::SecondPrice, g, 3).unwrap();
        assert!(check_basic_properties(&sp).anonymity.passed);
    }

    #[test]
    fn empty_profile_pays_nothing() {
        let m = builtin_mechanism(BuiltinMechanism::ThirdPrice, quarter_grid(), 3).unwrap();
        assert_eq!(miner_utility(&m, &Profile::honest(vec![0, 0, 0])), 0.0);
    }
}
