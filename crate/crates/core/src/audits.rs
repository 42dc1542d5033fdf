//! Exhaustive DSIC, MMIC, OCA-proofness and c-SCP audits over grid
//! mechanisms, and the enumeration of small DSIC mechanisms that survive
//! the miner audits.
//!
//! Search order is fixed so the first witness is deterministic: profiles by
//! table index, then coalitions by size and members, then miner strategies
//! (honest first), then bid deviations in ascending level order.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanism::{decode_into, joint_from_outcome, miner_take, BidGrid, GridMechanism, Outcome, Profile};
use crate::report::{AuditReport, Property, Witness, GAIN_TOL};

pub const DEFAULT_FAKE_BUDGET: usize = 2;

/// Omit some real bids and fill empty slots with miner bids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinerStrategy {
    /// Per slot; only meaningful for slots holding a real bid.
    pub keep: Vec<bool>,
    /// `(slot, level)` of each injected bid.
    pub fakes: Vec<(usize, usize)>,
}

impl MinerStrategy {
    pub fn honest(n: usize) -> Self {
        MinerStrategy {
            keep: vec![true; n],
            fakes: Vec::new(),
        }
    }

    pub fn is_honest(&self) -> bool {
        self.fakes.is_empty() && self.keep.iter().all(|&k| k)
    }

    /// The profile the mechanism sees when the real bids are `levels`.
    pub fn apply(&self, levels: &[usize]) -> Profile {
        let mut out = Profile::honest(levels.to_vec());
        for (slot, &keep) in self.keep.iter().enumerate() {
            if !keep {
                out.levels[slot] = 0;
            }
        }
        for &(slot, level) in &self.fakes {
            out.levels[slot] = level;
            out.fake[slot] = true;
        }
        out
    }

    pub fn describe(&self, grid: &BidGrid) -> String {
        if self.is_honest() {
            return "honest miner".into();
        }
        let mut parts = Vec::new();
        let omitted: Vec<usize> = (0..self.keep.len()).filter(|&i| !self.keep[i]).collect();
        if !omitted.is_empty() {
            parts.push(format!("omits slots {omitted:?}"));
        }
        for &(slot, level) in &self.fakes {
            parts.push(format!("fake bid {} in slot {slot}", grid.value(level)));
        }
        format!("miner {}", parts.join(", "))
    }
}

/// All strategies for real bids `levels`, honest first: keep masks from
/// "keep all" downwards, and for each mask the fake fillings of the empty
/// slots in ascending mixed-radix order with at most `budget` fakes.
pub fn miner_strategies(levels: &[usize], grid_len: usize, budget: usize) -> Vec<MinerStrategy> {
    let n = levels.len();
    let present: Vec<usize> = (0..n).filter(|&i| levels[i] > 0).collect();
    let empty: Vec<usize> = (0..n).filter(|&i| levels[i] == 0).collect();
    let fillings = fake_fillings(&empty, grid_len, budget);
    let mut out = Vec::new();
    for mask in (0..1usize << present.len()).rev() {
        let mut keep = vec![true; n];
        for (bit, &slot) in present.iter().enumerate() {
            keep[slot] = mask >> bit & 1 == 1;
        }
        for fakes in &fillings {
            out.push(MinerStrategy {
                keep: keep.clone(),
                fakes: fakes.clone(),
            });
        }
    }
    out
}

fn fake_fillings(empty: &[usize], grid_len: usize, budget: usize) -> Vec<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    let mut digits = vec![0usize; empty.len()];
    let total = grid_len.pow(empty.len() as u32);
    for idx in 0..total {
        decode_into(idx, grid_len, &mut digits);
        let fakes: Vec<(usize, usize)> = empty
            .iter()
            .zip(&digits)
            .filter(|(_, &d)| d > 0)
            .map(|(&s, &d)| (s, d))
            .collect();
        if fakes.len() <= budget {
            out.push(fakes);
        }
    }
    out
}

fn witness(
    m: &GridMechanism,
    honest: &[usize],
    deviant: &Profile,
    coalition: Vec<usize>,
    description: String,
    honest_value: f64,
    deviant_value: f64,
) -> Witness {
    Witness {
        profile: m.values(honest),
        deviant_profile: m.values(&deviant.levels),
        fake_slots: deviant.fake_slots(),
        coalition,
        description,
        honest_value,
        deviant_value,
    }
}

fn utility(o: &Outcome, i: usize, value: f64) -> f64 {
    let x = if o.allocated(i) { 1.0 } else { 0.0 };
    value * x - o.pay[i]
}

/// Weak DSIC: no bidder with a grid value gains by bidding another level.
pub fn audit_dsic(m: &GridMechanism) -> AuditReport {
    let found = (0..m.profile_count())
        .into_par_iter()
        .find_map_first(|idx| dsic_at_index(m, idx));
    AuditReport::from_witness(Property::Dsic, found)
}

fn dsic_at_index(m: &GridMechanism, idx: usize) -> Option<Witness> {
    let levels = m.levels_of(idx);
    let truth = &m.table()[idx];
    for i in 0..m.n_max() {
        if levels[i] == 0 {
            continue;
        }
        let v = m.grid().value(levels[i]);
        let honest = utility(truth, i, v);
        for d in 0..m.grid().len() {
            if d == levels[i] {
                continue;
            }
            let mut dev = levels.clone();
            dev[i] = d;
            let u = utility(m.outcome(&dev), i, v);
            if u > honest + GAIN_TOL {
                let desc = format!("bidder {i} with value {v} bids {}", m.grid().value(d));
                return Some(witness(m, &levels, &Profile::honest(dev), vec![i], desc, honest, u));
            }
        }
    }
    None
}

/// Grid characterization of DSIC for mechanisms whose losers pay nothing
/// and whose payments are non-negative: allocation monotone in the own
/// bid, and one payment for all winning bids lying between the highest
/// losing and the lowest winning level.
pub fn dsic_by_characterization(m: &GridMechanism) -> bool {
    let l = m.grid().len();
    (0..m.profile_count()).into_par_iter().all(|idx| {
        let levels = m.levels_of(idx);
        (0..m.n_max()).filter(|&i| levels[i] == 0).all(|i| {
            let mut highest_losing = 0.0;
            let mut lowest_winning: Option<f64> = None;
            let mut winner_pay: Option<f64> = None;
            for d in 0..l {
                let mut b = levels.clone();
                b[i] = d;
                let o = m.outcome(&b);
                let value = m.grid().value(d);
                if o.allocated(i) {
                    if d == 0 {
                        return false;
                    }
                    lowest_winning.get_or_insert(value);
                    match winner_pay {
                        Some(p) if (p - o.pay[i]).abs() > GAIN_TOL => return false,
                        _ => winner_pay = Some(o.pay[i]),
                    }
                } else {
                    if lowest_winning.is_some() || o.pay[i].abs() > GAIN_TOL {
                        return false;
                    }
                    highest_losing = value;
                }
            }
            match (winner_pay, lowest_winning) {
                (Some(p), Some(w)) => p >= highest_losing - GAIN_TOL && p <= w + GAIN_TOL,
                _ => true,
            }
        })
    })
}

/// The miner never gains by omitting real bids or adding its own.
pub fn audit_mmic(m: &GridMechanism, fake_budget: usize) -> AuditReport {
    let found = (0..m.profile_count())
        .into_par_iter()
        .find_map_first(|idx| mmic_at_levels(m, &m.levels_of(idx), fake_budget));
    AuditReport::from_witness(Property::Mmic, found)
}

/// MMIC restricted to one real bid vector.
pub fn audit_mmic_at(m: &GridMechanism, bids: &[f64], fake_budget: usize) -> Result<AuditReport> {
    let levels = m.levels_for_bids(bids)?;
    Ok(AuditReport::from_witness(
        Property::Mmic,
        mmic_at_levels(m, &levels, fake_budget),
    ))
}

fn mmic_at_levels(m: &GridMechanism, levels: &[usize], budget: usize) -> Option<Witness> {
    let honest_prof = Profile::honest(levels.to_vec());
    let honest = miner_take(m.outcome(levels), &honest_prof.fake);
    for s in miner_strategies(levels, m.grid().len(), budget).into_iter().skip(1) {
        let dev = s.apply(levels);
        let u = miner_take(m.outcome(&dev.levels), &dev.fake);
        if u > honest + GAIN_TOL {
            return Some(witness(m, levels, &dev, Vec::new(), s.describe(m.grid()), honest, u));
        }
    }
    None
}

/// OCA-proofness: for every valuation vector, truthful play already
/// maximizes the joint utility of the miner and all real bidders.
pub fn audit_oca(m: &GridMechanism, fake_budget: usize) -> AuditReport {
    let found = (0..m.profile_count())
        .into_par_iter()
        .find_map_first(|idx| oca_at_levels(m, &m.levels_of(idx), fake_budget));
    AuditReport::from_witness(Property::Oca, found)
}

pub fn audit_oca_at(m: &GridMechanism, valuations: &[f64], fake_budget: usize) -> Result<AuditReport> {
    let levels = m.levels_for_bids(valuations)?;
    Ok(AuditReport::from_witness(
        Property::Oca,
        oca_at_levels(m, &levels, fake_budget),
    ))
}

fn oca_at_levels(m: &GridMechanism, levels: &[usize], budget: usize) -> Option<Witness> {
    let n = m.n_max();
    let l = m.grid().len();
    let vals = m.values(levels);
    let present: Vec<usize> = (0..n).filter(|&i| levels[i] > 0).collect();
    let empty: Vec<usize> = (0..n).filter(|&i| levels[i] == 0).collect();
    let truth = m.outcome(levels);
    let winners: Vec<usize> = truth.winner.into_iter().collect();
    let intended = joint_from_outcome(truth, &vec![false; n], &vals, &winners);
    let fillings = fake_fillings(&empty, l, budget);
    let mut best: Option<(f64, Profile)> = None;
    let mut digits = vec![0usize; present.len()];
    for bid_idx in 0..l.pow(present.len() as u32) {
        decode_into(bid_idx, l, &mut digits);
        for fakes in &fillings {
            let mut prof = Profile::honest(levels.to_vec());
            for (&slot, &d) in present.iter().zip(&digits) {
                prof.levels[slot] = d;
            }
            for &(slot, d) in fakes {
                prof.levels[slot] = d;
                prof.fake[slot] = true;
            }
            let joint = joint_from_outcome(m.outcome(&prof.levels), &prof.fake, &vals, &present);
            if best.as_ref().is_none_or(|(b, _)| joint > *b) {
                best = Some((joint, prof));
            }
        }
    }
    let (max, prof) = best?;
    (max > intended + GAIN_TOL).then(|| {
        witness(
            m,
            levels,
            &prof,
            present.clone(),
            "joint deviation of the miner and all bidders".into(),
            intended,
            max,
        )
    })
}

/// c-SCP: no coalition of the miner and at most `c` bidders gains.
pub fn audit_scp(m: &GridMechanism, c: usize, fake_budget: usize) -> AuditReport {
    let found = (0..m.profile_count())
        .into_par_iter()
        .find_map_first(|idx| scp_at_levels(m, c, &m.levels_of(idx), fake_budget));
    AuditReport::from_witness(Property::Scp(c), found)
}

pub fn audit_scp_at(m: &GridMechanism, c: usize, valuations: &[f64], fake_budget: usize) -> Result<AuditReport> {
    let levels = m.levels_for_bids(valuations)?;
    Ok(AuditReport::from_witness(
        Property::Scp(c),
        scp_at_levels(m, c, &levels, fake_budget),
    ))
}

/// Subsets of `items` with 1..=c elements, by size then lexicographically.
pub(crate) fn coalitions(items: &[usize], c: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for size in 1..=c.min(items.len()) {
        let mut pick: Vec<usize> = (0..size).collect();
        loop {
            out.push(pick.iter().map(|&k| items[k]).collect());
            let Some(pos) = (0..size).rev().find(|&p| pick[p] < items.len() - size + p) else {
                break;
            };
            pick[pos] += 1;
            for q in pos + 1..size {
                pick[q] = pick[q - 1] + 1;
            }
        }
    }
    out
}

fn scp_at_levels(m: &GridMechanism, c: usize, levels: &[usize], budget: usize) -> Option<Witness> {
    let n = m.n_max();
    let l = m.grid().len();
    let vals = m.values(levels);
    let present: Vec<usize> = (0..n).filter(|&i| levels[i] > 0).collect();
    let truth = m.outcome(levels);
    let strategies = miner_strategies(levels, l, budget);
    for coalition in coalitions(&present, c) {
        let honest = joint_from_outcome(truth, &vec![false; n], &vals, &coalition);
        let mut digits = vec![0usize; coalition.len()];
        for s in &strategies {
            for bid_idx in 0..l.pow(coalition.len() as u32) {
                decode_into(bid_idx, l, &mut digits);
                let mut bids = levels.to_vec();
                for (&slot, &d) in coalition.iter().zip(&digits) {
                    bids[slot] = d;
                }
                let prof = s.apply(&bids);
                let joint = joint_from_outcome(m.outcome(&prof.levels), &prof.fake, &vals, &coalition);
                if joint > honest + GAIN_TOL {
                    let moved: Vec<String> = coalition
                        .iter()
                        .filter(|&&i| bids[i] != levels[i])
                        .map(|&i| format!("bidder {i} bids {}", m.grid().value(bids[i])))
                        .collect();
                    let mut desc = s.describe(m.grid());
                    if !moved.is_empty() {
                        desc = format!("{}; {desc}", moved.join(", "));
                    }
                    return Some(witness(m, levels, &prof, coalition, desc, honest, joint));
                }
            }
        }
    }
    None
}

/// Result of [`enumerate_zero_revenue`].
#[derive(Debug, Clone, Serialize)]
pub struct EnumerationSummary {
    /// Mechanisms enumerated (monotone allocations, critical payments,
    /// every burn choice).
    pub total: usize,
    pub dsic: usize,
    pub survivors: usize,
    /// Largest honest miner utility over survivors and profiles.
    pub max_revenue: f64,
    /// Survivors whose winner, for each set of present slots, is one fixed
    /// slot or nobody.
    pub fixed_winner: usize,
    /// Mechanisms on which `audit_dsic` and the characterization disagree.
    pub characterization_mismatches: usize,
    #[serde(skip)]
    pub survivor_tables: Vec<GridMechanism>,
}

pub const MAX_ENUM_LEVELS: usize = 4;
pub const MAX_ENUM_BIDDERS: usize = 2;

/// Enumerates every monotone allocation table on `grid` with `n` slots,
/// payments at the critical grid bid (the highest losing level) and burns
/// in `{0, pay}`, and keeps those passing DSIC, MMIC and OCA.
pub fn enumerate_zero_revenue(grid: &BidGrid, n: usize) -> Result<EnumerationSummary> {
    if n == 0 || n > MAX_ENUM_BIDDERS || grid.len() > MAX_ENUM_LEVELS {
        return Err(Error::Unsupported(format!(
            "enumeration needs 1 <= n <= {MAX_ENUM_BIDDERS} and at most {MAX_ENUM_LEVELS} levels"
        )));
    }
    let l = grid.len();
    let count = l.pow(n as u32);
    let profiles: Vec<Vec<usize>> = (0..count)
        .map(|idx| {
            let mut v = vec![0; n];
            decode_into(idx, l, &mut v);
            v
        })
        .collect();
    let choices: Vec<Vec<Option<usize>>> = profiles
        .iter()
        .map(|p| {
            std::iter::once(None)
                .chain((0..n).filter(|&i| p[i] > 0).map(Some))
                .collect()
        })
        .collect();
    let radix: Vec<usize> = choices.iter().map(Vec::len).collect();
    let allocations: usize = radix.iter().product();
    let budget = DEFAULT_FAKE_BUDGET.min(n - 1);

    let per_alloc: Vec<(usize, usize, Vec<GridMechanism>, usize)> = (0..allocations)
        .into_par_iter()
        .filter_map(|code| {
            let mut rest = code;
            let winners: Vec<Option<usize>> = radix
                .iter()
                .zip(&choices)
                .map(|(&r, ch)| {
                    let w = ch[rest % r];
                    rest /= r;
                    w
                })
                .collect();
            if !monotone(&winners, &profiles, l) {
                return None;
            }
            Some(enumerate_burns(grid, n, &profiles, &winners, budget))
        })
        .collect();

    let mut summary = EnumerationSummary {
        total: 0,
        dsic: 0,
        survivors: 0,
        max_revenue: 0.0,
        fixed_winner: 0,
        characterization_mismatches: 0,
        survivor_tables: Vec::new(),
    };
    for (total, dsic, survivors, mismatches) in per_alloc {
        summary.total += total;
        summary.dsic += dsic;
        summary.characterization_mismatches += mismatches;
        for m in survivors {
            let rev = (0..m.profile_count())
                .map(|idx| miner_take(&m.table()[idx], &vec![false; n]))
                .fold(f64::NEG_INFINITY, f64::max);
            summary.max_revenue = if summary.survivors == 0 {
                rev
            } else {
                summary.max_revenue.max(rev)
            };
            if has_fixed_winner(&m) {
                summary.fixed_winner += 1;
            }
            summary.survivors += 1;
            summary.survivor_tables.push(m);
        }
    }
    Ok(summary)
}

fn monotone(winners: &[Option<usize>], profiles: &[Vec<usize>], l: usize) -> bool {
    profiles.iter().enumerate().all(|(idx, p)| {
        (0..p.len()).all(|i| {
            if p[i] + 1 >= l || winners[idx] != Some(i) {
                return true;
            }
            let mut up = p.clone();
            up[i] += 1;
            winners[crate::mechanism::encode(&up, l)] == Some(i)
        })
    })
}

fn enumerate_burns(
    grid: &BidGrid,
    n: usize,
    profiles: &[Vec<usize>],
    winners: &[Option<usize>],
    budget: usize,
) -> (usize, usize, Vec<GridMechanism>, usize) {
    let l = grid.len();
    let pays: Vec<f64> = profiles
        .iter()
        .zip(winners)
        .map(|(p, w)| match *w {
            Some(i) => {
                let mut b = p.clone();
                let mut critical = 0.0;
                for d in (0..p[i]).rev() {
                    b[i] = d;
                    if winners[crate::mechanism::encode(&b, l)] != Some(i) {
                        critical = grid.value(d);
                        break;
                    }
                }
                critical
            }
            None => 0.0,
        })
        .collect();
    let paid: Vec<usize> = (0..profiles.len()).filter(|&k| pays[k] > 0.0).collect();
    let mut total = 0;
    let mut dsic = 0;
    let mut mismatches = 0;
    let mut survivors = Vec::new();
    for mask in 0..1usize << paid.len() {
        let table: Vec<Outcome> = (0..profiles.len())
            .map(|k| match winners[k] {
                Some(i) => {
                    let burnt = paid
                        .iter()
                        .position(|&q| q == k)
                        .is_some_and(|bit| mask >> bit & 1 == 1);
                    Outcome::single(n, i, pays[k], if burnt { pays[k] } else { 0.0 })
                }
                None => Outcome::nobody(n),
            })
            .collect();
        let m = GridMechanism::from_table("enumerated", grid.clone(), n, table).expect("well-formed table");
        total += 1;
        let dsic_ok = audit_dsic(&m).passed;
        if dsic_ok != dsic_by_characterization(&m) {
            mismatches += 1;
        }
        if !dsic_ok {
            continue;
        }
        dsic += 1;
        if audit_mmic(&m, budget).passed && audit_oca(&m, budget).passed {
            survivors.push(m);
        }
    }
    (total, dsic, survivors, mismatches)
}

fn has_fixed_winner(m: &GridMechanism) -> bool {
    let n = m.n_max();
    let mut seen: Vec<Option<usize>> = vec![None; 1 << n];
    for idx in 0..m.profile_count() {
        let levels = m.levels_of(idx);
        let pattern = (0..n).filter(|&i| levels[i] > 0).fold(0, |acc, i| acc | 1 << i);
        if let Some(w) = m.table()[idx].winner {
            match seen[pattern] {
                Some(prev) if prev != w => return false,
                _ => seen[pattern] = Some(w),
            }
        }
    }
    true
}

/// Single-slot table allocating iff the bid reaches a threshold, with every
/// payment burnt.
pub fn is_posted_burn_table(m: &GridMechanism) -> bool {
    if m.n_max() != 1 {
        return false;
    }
    let mut allocating = false;
    for o in m.table() {
        if o.allocated(0) {
            allocating = true;
        } else if allocating || o.pay[0] != 0.0 {
            return false;
        }
        if o.burn[0] != o.pay[0] {
            return false;
        }
    }
    let pays: Vec<f64> = m.table().iter().filter(|o| o.allocated(0)).map(|o| o.pay[0]).collect();
    pays.windows(2).all(|w| w[0] == w[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::{builtin_mechanism, BuiltinMechanism};

    fn quarter_grid() -> BidGrid {
        BidGrid::new(vec![0.0, 0.25, 0.5, 1.0, 2.0]).unwrap()
    }

    #[test]
    fn strategies_start_honest_and_respect_budget() {
        let s = miner_strategies(&[2, 0, 1], 5, 2);
        assert!(s[0].is_honest());
        // 4 keep masks times 5 fillings of the single empty slot.
        assert_eq!(s.len(), 20);
        // No fakes, or one fake of level 1 or 2 in one of three slots.
        let s = miner_strategies(&[0, 0, 0], 3, 1);
        assert_eq!(s.len(), 7);
        assert!(s.iter().all(|x| x.fakes.len() <= 1));
    }

    #[test]
    fn coalition_order() {
        let c = coalitions(&[0, 1, 2], 2);
        assert_eq!(c, vec![vec![0], vec![1], vec![2], vec![0, 1], vec![0, 2], vec![1, 2]]);
    }

    #[test]
    fn dsic_verdicts() {
        let g = BidGrid::uniform(1.0, 10).unwrap();
        let pp = builtin_mechanism(BuiltinMechanism::PostedPrice { price: 0.5, burn: 0.0 }, g.clone(), 2).unwrap();
        assert!(audit_dsic(&pp).passed);
        let sp = builtin_mechanism(BuiltinMechanism::SecondPrice, g.clone(), 2).unwrap();
        assert!(audit_dsic(&sp).passed);
        let fp = builtin_mechanism(BuiltinMechanism::FirstPrice, g, 2).unwrap();
        let r = audit_dsic(&fp);
        assert!(!r.passed);
        let w = r.witness.unwrap();
        assert!(w.gap() > GAIN_TOL);
    }

    #[test]
    fn characterization_agrees_on_builtins() {
        let g = quarter_grid();
        for kind in [
            BuiltinMechanism::PostedPrice { price: 0.5, burn: 0.25 },
            BuiltinMechanism::SecondPrice,
            BuiltinMechanism::FirstPrice,
            BuiltinMechanism::ThirdPrice,
        ] {
            let m = builtin_mechanism(kind, g.clone(), 2).unwrap();
            assert_eq!(audit_dsic(&m).passed, dsic_by_characterization(&m), "{}", m.name());
        }
    }

    #[test]
    fn first_price_to_miner_is_mmic() {
        let m = builtin_mechanism(BuiltinMechanism::FirstPrice, quarter_grid(), 3).unwrap();
        assert!(audit_mmic(&m, 2).passed);
    }

    #[test]
    fn second_price_reserve_fake_bid() {
        let g = BidGrid::new(vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        let m = builtin_mechanism(
            BuiltinMechanism::SecondPriceReserve {
                reserve: 2.0,
                burn: 0.0,
            },
            g,
            3,
        )
        .unwrap();
        let r = audit_mmic_at(&m, &[4.0, 0.0, 1.0], 2).unwrap();
        let w = r.witness.unwrap();
        assert_eq!(w.deviant_profile, vec![4.0, 3.0, 1.0]);
        assert_eq!(w.fake_slots, vec![1]);
        assert_eq!((w.honest_value, w.deviant_value), (2.0, 3.0));
        assert!(!audit_mmic(&m, 2).passed);
    }

    #[test]
    fn third_price_oca_but_not_scp() {
        let m = builtin_mechanism(BuiltinMechanism::ThirdPrice, quarter_grid(), 3).unwrap();
        assert!(audit_oca(&m, 2).passed);
        let r = audit_scp_at(&m, 1, &[1.0, 0.5, 0.25], 2).unwrap();
        let w = r.witness.unwrap();
        assert_eq!(w.coalition, vec![1]);
        assert_eq!(w.deviant_profile, vec![1.0, 2.0, 0.25]);
        assert_eq!((w.honest_value, w.deviant_value), (0.25, 0.5));
    }

    #[test]
    fn posted_price_cashback_breaks_oca() {
        let g = BidGrid::new((0..=20).map(f64::from).collect()).unwrap();
        let m = builtin_mechanism(BuiltinMechanism::PostedPrice { price: 10.0, burn: 0.0 }, g.clone(), 1).unwrap();
        let w = audit_oca_at(&m, &[5.0], 0).unwrap().witness.unwrap();
        assert_eq!((w.honest_value, w.deviant_value), (0.0, 5.0));
        let pb = builtin_mechanism(BuiltinMechanism::PostedBurn { burn: 8.0 }, g, 1).unwrap();
        assert!(audit_oca(&pb, 0).passed);
        assert!(audit_scp(&pb, 1, 0).passed);
    }

    #[test]
    fn one_bidder_survivors_are_posted_burns() {
        let g = BidGrid::new(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let s = enumerate_zero_revenue(&g, 1).unwrap();
        assert_eq!(s.survivors, 4);
        assert_eq!(s.max_revenue, 0.0);
        assert!(s.survivor_tables.iter().all(is_posted_burn_table));
        assert_eq!(s.dsic, s.total);
        assert_eq!(s.characterization_mismatches, 0);
    }

    #[test]
    fn enumeration_bounds() {
        let g = BidGrid::new(vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(enumerate_zero_revenue(&g, 1).is_err());
    }
}
