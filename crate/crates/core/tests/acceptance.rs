//! Acceptance criteria 1-8. Each test writes one PASS/FAIL line to the raw
//! stderr handle (which the test harness does not capture) before asserting.

use std::io::Write;
use std::time::{Duration, Instant};

use num_rational::Ratio;

use tfm_lab_core::audits::{
    audit_dsic, audit_mmic, audit_oca, audit_scp, audit_scp_at, enumerate_zero_revenue, is_posted_burn_table,
    DEFAULT_FAKE_BUDGET,
};
use tfm_lab_core::collusion::{
    builtin_collusion, check_collusion_ic, check_collusion_ic_at, compose, search_ic_ir_collusion, BuiltinCollusion,
    Collusion,
};
use tfm_lab_core::collusion_free::{collusion_free_prices, worst_case_c};
use tfm_lab_core::constructions::{
    build_cubic, build_sqrtlog_family, build_trunc_equal_revenue, epsilon_smear, CubicSpec, TruncEqualRevenueSpec,
};
use tfm_lab_core::distribution::{ContinuousDistribution, DensityPiece, Distribution};
use tfm_lab_core::mechanism::{
    builtin_mechanism, miner_utility, BidGrid, BuiltinMechanism, GridMechanism, Outcome, Profile,
};
use tfm_lab_core::pricing::{myerson_identity_check, myerson_price, price_point};

fn report(criterion: u32, ok: bool, elapsed: Duration, limit: Duration, detail: &str) {
    let verdict = if ok && elapsed < limit { "PASS" } else { "FAIL" };
    let line = format!(
        "criterion {criterion}: {verdict} ({detail}; {:.3}s of {}s)\n",
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "criterion {criterion} failed: {detail}");
    assert!(elapsed < limit, "criterion {criterion} too slow: {elapsed:?}");
}

fn uniform() -> Distribution {
    ContinuousDistribution::uniform(0.0, 1.0).unwrap().into()
}

fn cubic() -> Distribution {
    build_cubic(CubicSpec {
        a: 5.62,
        b: 10.0,
        c: 5.62,
    })
    .unwrap()
    .dist
    .into()
}

fn posted(price: f64, burn: f64, grid: &BidGrid) -> GridMechanism {
    builtin_mechanism(BuiltinMechanism::PostedPrice { price, burn }, grid.clone(), 1).unwrap()
}

fn integers(max: i32) -> BidGrid {
    BidGrid::new((0..=max).map(f64::from).collect()).unwrap()
}

#[test]
fn criterion_1_uniform_closed_forms() {
    let t = Instant::now();
    let d = uniform();
    let mut worst: f64 = 0.0;
    for beta in [0.0, 0.25, 0.5, 0.75] {
        let rho = myerson_price(&d, beta).unwrap();
        let p = price_point(&d, rho, beta).unwrap();
        let expected = [
            (rho, (1.0 + beta) / 2.0),
            (p.revenue, (1.0 - beta).powi(2) / 4.0),
            (p.bidder_utility, (1.0 - beta).powi(2) / 8.0),
            (p.realized_burn, beta * (1.0 - beta) / 2.0),
        ];
        for (got, want) in expected {
            worst = worst.max((got - want).abs());
        }
    }
    report(
        1,
        worst < 1e-6,
        t.elapsed(),
        Duration::from_secs(1),
        &format!("max error {worst:.2e}"),
    );
}

#[test]
fn criterion_2_cubic_non_regular() {
    let t = Instant::now();
    let d = cubic();
    let Distribution::Continuous(c) = &d else {
        unreachable!()
    };
    let mu = myerson_price(&d, 0.0).unwrap();
    let roots = c.virtual_value_curve(0.0).roots();
    let set = collusion_free_prices(&d, 0.0).unwrap();
    let iv = set.intervals();
    let want_roots = [0.380043, 0.553638, 0.845679];
    let mut ok = (mu - 0.845679).abs() < 1e-3 && roots.len() == 3 && iv.len() == 2;
    if ok {
        ok &= roots.iter().zip(want_roots).all(|(r, w)| (r - w).abs() < 1e-3);
        let want = [(0.0, 0.380043), (0.664978, 0.845679)];
        ok &= iv
            .iter()
            .zip(want)
            .all(|(&(lo, hi), (wl, wh))| (lo - wl).abs() < 2e-3 && (hi - wh).abs() < 2e-3);
    }
    report(
        2,
        ok,
        t.elapsed(),
        Duration::from_secs(5),
        &format!("price {mu:.6}, roots {roots:.6?}, set {iv:.6?}"),
    );
}

#[test]
fn criterion_3_third_price_counterexample() {
    let t = Instant::now();
    let g = BidGrid::new(vec![0.0, 0.25, 0.5, 1.0, 2.0]).unwrap();
    let m = builtin_mechanism(BuiltinMechanism::ThirdPrice, g, 3).unwrap();
    let oca = audit_oca(&m, DEFAULT_FAKE_BUDGET);
    let scp = audit_scp_at(&m, 1, &[1.0, 0.5, 0.25], DEFAULT_FAKE_BUDGET).unwrap();
    let w = scp.witness.clone();
    let ok = oca.passed
        && !scp.passed
        && !audit_scp(&m, 1, DEFAULT_FAKE_BUDGET).passed
        && w.as_ref()
            .is_some_and(|w| w.honest_value == 0.25 && w.deviant_value == 0.5 && w.deviant_profile.contains(&2.0));
    let detail = match &w {
        Some(w) => format!(
            "OCA {}, 1-SCP witness {:?} -> {:?}: {} vs {}",
            oca.passed, w.profile, w.deviant_profile, w.deviant_value, w.honest_value
        ),
        None => format!("OCA {}, 1-SCP passed", oca.passed),
    };
    report(3, ok, t.elapsed(), Duration::from_secs(1), &detail);
}

#[test]
fn criterion_4_examples_ic_verdicts() {
    let t = Instant::now();
    let g = integers(20);
    let m = posted(10.0, 0.0, &g);
    let ex1 = builtin_collusion(&BuiltinCollusion::ExampleI, &g, 1).unwrap();
    let w1 = check_collusion_ic_at(&m, &ex1, &[20.0], 0).unwrap().witness;
    let ex1_ok = !check_collusion_ic(&m, &ex1, DEFAULT_FAKE_BUDGET).unwrap().passed
        && w1
            .as_ref()
            .is_some_and(|w| (w.honest_value, w.deviant_value) == (10.0, 16.0));

    // Posted price P = 2 with two colluders; the fake bid (P + b_1) / 2 = 3.
    let g4 = integers(4);
    let m2 = builtin_mechanism(BuiltinMechanism::PostedPrice { price: 2.0, burn: 0.0 }, g4.clone(), 3).unwrap();
    let ex2 = builtin_collusion(
        &BuiltinCollusion::ExampleII {
            reserve: 2.0,
            burn: 0.0,
            k: 2,
        },
        &g4,
        3,
    )
    .unwrap();
    let w2 = check_collusion_ic_at(&m2, &ex2, &[4.0, 0.0, 1.0], DEFAULT_FAKE_BUDGET)
        .unwrap()
        .witness;
    let ex2_ok = w2.as_ref().is_some_and(|w| {
        w.fake_slots.len() == 1 && w.deviant_profile[w.fake_slots[0]] == (2.0 + 4.0) / 2.0 && w.gap() > 0.0
    });

    let ex3 = builtin_collusion(&BuiltinCollusion::ExampleIII, &g, 1).unwrap();
    let ex3_ok = check_collusion_ic(&m, &ex3, DEFAULT_FAKE_BUDGET).unwrap().passed;
    report(
        4,
        ex1_ok && ex2_ok && ex3_ok,
        t.elapsed(),
        Duration::from_secs(2),
        &format!(
            "I {:?}, II fake {:?}, III IC {ex3_ok}",
            w1.map(|w| (w.deviant_value, w.honest_value)),
            w2.map(|w| w.deviant_profile)
        ),
    );
}

fn honest_revenue(m: &GridMechanism) -> f64 {
    (0..m.profile_count())
        .map(|i| miner_utility(m, &Profile::honest(m.levels_of(i))).abs())
        .fold(0.0, f64::max)
}

/// Allocation threshold level of a single-slot table, `None` if it never
/// allocates.
fn threshold(m: &GridMechanism) -> Option<usize> {
    (1..m.grid().len()).find(|&l| m.outcome(&[l]).allocated(0))
}

#[test]
fn criterion_5_zero_revenue_enumeration() {
    let t = Instant::now();
    let one = enumerate_zero_revenue(&integers(3), 1).unwrap();
    let two = enumerate_zero_revenue(&integers(2), 2).unwrap();
    let mut ok = one.survivors > 0 && two.survivors > 0;
    for s in [&one, &two] {
        ok &= s.max_revenue == 0.0 && s.survivor_tables.len() == s.survivors;
        for m in &s.survivor_tables {
            ok &= honest_revenue(m) == 0.0;
            ok &= audit_dsic(m).passed && audit_mmic(m, DEFAULT_FAKE_BUDGET).passed;
            ok &= audit_oca(m, DEFAULT_FAKE_BUDGET).passed;
        }
    }
    // One posted-burn table per allocation threshold, plus never allocating.
    ok &= one.survivor_tables.iter().all(is_posted_burn_table);
    let mut thresholds: Vec<Option<usize>> = one.survivor_tables.iter().map(threshold).collect();
    thresholds.sort();
    ok &= thresholds == vec![None, Some(1), Some(2), Some(3)];
    report(
        5,
        ok,
        t.elapsed(),
        Duration::from_secs(60),
        &format!(
            "n=1: {} survivors of {}; n=2: {} survivors of {}; max revenue {} / {}",
            one.survivors, one.total, two.survivors, two.total, one.max_revenue, two.max_revenue
        ),
    );
}

#[test]
fn criterion_6_regular_characterization() {
    let t = Instant::now();
    let grid = BidGrid::uniform(1.0, 100).unwrap();
    let step = 0.01;
    let prior = uniform();
    let mut mismatches = Vec::new();
    let mut checked = 0;
    for beta in [0.0, 0.2] {
        let mu = myerson_price(&prior, beta).unwrap();
        for j in 0..20 {
            let raw = beta + (1.0 - beta) * j as f64 / 19.0;
            let price = grid.value(grid.snap_down(raw + 1e-9));
            if price < beta {
                continue;
            }
            let m = posted(price, beta, &grid);
            let found = search_ic_ir_collusion(&m, &prior, 1).unwrap().is_some();
            checked += 1;
            let within_one_level = (price - mu).abs() <= step + 1e-9;
            if found != (price > mu) && !within_one_level {
                mismatches.push((beta, price, found));
            }
        }
    }
    report(
        6,
        mismatches.is_empty() && checked == 40,
        t.elapsed(),
        Duration::from_secs(30),
        &format!("{checked} prices, mismatches {mismatches:?}"),
    );
}

fn families() -> Vec<(&'static str, Distribution)> {
    let sqrtlog = build_sqrtlog_family(5).unwrap().dist;
    vec![
        ("uniform", uniform()),
        ("cubic_poly", cubic()),
        (
            "trunc_equal_revenue",
            build_trunc_equal_revenue(TruncEqualRevenueSpec { t: 2.0, eps: 0.5 })
                .unwrap()
                .into(),
        ),
        (
            "trunc_exponential",
            ContinuousDistribution::truncated_exponential(1.0, 3.0).unwrap().into(),
        ),
        (
            "piecewise",
            ContinuousDistribution::piecewise(vec![
                DensityPiece {
                    lo: 0.0,
                    hi: 1.0,
                    density: 0.5,
                },
                DensityPiece {
                    lo: 2.0,
                    hi: 3.0,
                    density: 0.5,
                },
            ])
            .unwrap()
            .into(),
        ),
        ("smear", epsilon_smear(&sqrtlog, 0.01).unwrap().into()),
        ("sqrtlog", sqrtlog.into()),
    ]
}

/// Largest `|lhs - rhs|` of the burn Myerson identity on a 20 x 20 grid
/// of prices across the support and burns in `[0, price]`.
fn identity_error(d: &Distribution) -> f64 {
    let (lo, hi) = d.support();
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let rho = lo + (hi - lo) * i as f64 / 19.0;
        for j in 0..20 {
            let beta = if j == 19 { rho } else { rho * j as f64 / 19.0 };
            let (lhs, rhs) = myerson_identity_check(d, rho, beta).unwrap();
            worst = worst.max((lhs - rhs).abs());
        }
    }
    worst
}

fn monotone_prices(d: &Distribution) -> bool {
    let (_, hi) = d.support();
    let prices: Vec<f64> = (0..50)
        .map(|j| myerson_price(d, hi * j as f64 / 49.0).unwrap())
        .collect();
    prices.windows(2).all(|w| w[1] >= w[0] - 1e-7)
}

/// Exact discrete identity `sum_{i >= k} phi_i w_i = v_k s_k` in rationals,
/// for `n` a perfect square so that `v_n = sqrt(n) 2^(n-2)` is an integer.
fn rational_sqrtlog_identity(n: u32) -> bool {
    let root = (n as f64).sqrt() as i128;
    assert_eq!(root * root, n as i128);
    let q = |a: i128, b: i128| Ratio::new(a, b);
    let mut v: Vec<Ratio<i128>> = (1..n).map(|i| q(1 << (i - 1), 1)).collect();
    v.push(q(root << (n - 2), 1));
    let mut w: Vec<Ratio<i128>> = (1..n).map(|i| q(1, 1 << i)).collect();
    w.push(q(1, 1 << (n - 1)));
    let len = v.len();
    let mut s = vec![q(0, 1); len + 1];
    for i in (0..len).rev() {
        s[i] = s[i + 1] + w[i];
    }
    if s[0] != q(1, 1) {
        return false;
    }
    let phi = |i: usize| {
        if i + 1 == len {
            v[i]
        } else {
            v[i] - (v[i + 1] - v[i]) * s[i + 1] / w[i]
        }
    };
    (0..len).all(|k| (k..len).map(|i| phi(i) * w[i]).sum::<Ratio<i128>>() == v[k] * s[k])
}

fn sqrtlog_float_matches_rational(n: usize) -> bool {
    let fam = build_sqrtlog_family(n).unwrap();
    let d = &fam.dist;
    let scale = fam.max_value;
    d.values().iter().all(|&v| {
        let (lhs, rhs) = myerson_identity_check(&d.clone().into(), v, 0.0).unwrap();
        (lhs - rhs).abs() <= 1e-12 * scale
    })
}

/// Posted-price mechanisms paired with built-in and searched collusions.
fn composition_cases() -> Vec<(GridMechanism, Collusion)> {
    let mut cases = Vec::new();
    let g20 = integers(20);
    let m10 = posted(10.0, 0.0, &g20);
    for kind in [
        BuiltinCollusion::ExampleI,
        BuiltinCollusion::ExampleIII,
        BuiltinCollusion::Identity,
        BuiltinCollusion::LowerPrice {
            price: 10.0,
            target: 6.0,
        },
        BuiltinCollusion::PriceToBurn { price: 10.0, burn: 0.0 },
        BuiltinCollusion::BurnDrop { high: 20.0, low: 10.0 },
    ] {
        cases.push((m10.clone(), builtin_collusion(&kind, &g20, 1).unwrap()));
    }
    let g = BidGrid::uniform(1.0, 10).unwrap();
    for (price, burn, kind) in [
        (
            0.8,
            0.0,
            BuiltinCollusion::LowerPrice {
                price: 0.8,
                target: 0.5,
            },
        ),
        (0.9, 0.3, BuiltinCollusion::PriceToBurn { price: 0.9, burn: 0.3 }),
        (
            0.9,
            0.3,
            BuiltinCollusion::LowerPrice {
                price: 0.9,
                target: 0.7,
            },
        ),
    ] {
        cases.push((posted(price, burn, &g), builtin_collusion(&kind, &g, 1).unwrap()));
    }
    let prior = uniform();
    for (price, burn) in [(0.7, 0.0), (0.9, 0.0), (0.8, 0.2), (1.0, 0.5)] {
        let m = posted(price, burn, &g);
        if let Some(found) = search_ic_ir_collusion(&m, &prior, 1).unwrap() {
            cases.push((m, found.collusion));
        }
    }
    cases
}

/// Deterministic single-entry mutants of small built-in mechanisms, each
/// keeping payments non-negative and burns within payments.
fn mutants(count: usize) -> Vec<GridMechanism> {
    let g = integers(3);
    let bases = [
        BuiltinMechanism::SecondPrice,
        BuiltinMechanism::FirstPrice,
        BuiltinMechanism::ThirdPrice,
        BuiltinMechanism::PostedPrice { price: 2.0, burn: 1.0 },
        BuiltinMechanism::PostedBurn { burn: 1.0 },
        BuiltinMechanism::SecondPriceReserve {
            reserve: 2.0,
            burn: 0.0,
        },
    ];
    let mut out = Vec::new();
    let levels = g.levels().to_vec();
    'outer: for round in 0.. {
        for (b, kind) in bases.iter().enumerate() {
            let base = builtin_mechanism(*kind, g.clone(), 2).unwrap();
            let idx = (round * 7 + b * 3) % base.profile_count();
            let old = base.table()[idx].clone();
            let pay = levels[(round + b) % levels.len()];
            let burn = if (round / 4) % 2 == 0 { 0.0 } else { pay };
            let winner = match (round + idx) % 3 {
                0 => None,
                k => Some(k - 1),
            };
            let new = match winner {
                None => Outcome::nobody(2),
                Some(w) => Outcome::single(2, w, pay, burn),
            };
            if new == old {
                continue;
            }
            let mut m = base.clone();
            m.set_outcome(idx, new);
            out.push(m.with_name(format!("{} mutant {round}", kind.label())));
            if out.len() == count {
                break 'outer;
            }
        }
    }
    out
}

#[test]
fn criterion_7_property_suites() {
    let t = Instant::now();
    let mut failures = Vec::new();

    for (name, d) in families() {
        let err = identity_error(&d);
        if err >= 1e-6 {
            failures.push(format!("identity {name} {err:.2e}"));
        }
        if !monotone_prices(&d) {
            failures.push(format!("monotone {name}"));
        }
    }

    for n in [9, 16, 25] {
        if !rational_sqrtlog_identity(n) {
            failures.push(format!("rational identity n={n}"));
        }
    }
    for n in [5, 9, 16, 25] {
        if !sqrtlog_float_matches_rational(n) {
            failures.push(format!("float identity n={n}"));
        }
    }

    let mut ic_collusions = 0;
    for (m, col) in composition_cases() {
        if check_collusion_ic(&m, &col, DEFAULT_FAKE_BUDGET).unwrap().passed {
            ic_collusions += 1;
            if !audit_dsic(&compose(&m, &col).unwrap()).passed {
                failures.push(format!("composition {} / {}", m.name(), col.name()));
            }
        }
    }

    let ms = mutants(200);
    let mut scp_proof = 0;
    for m in &ms {
        let scp = (1..=m.n_max()).all(|c| audit_scp(m, c, DEFAULT_FAKE_BUDGET).passed);
        if scp {
            scp_proof += 1;
            if !audit_oca(m, DEFAULT_FAKE_BUDGET).passed {
                failures.push(format!("SCP without OCA: {}", m.name()));
            }
        }
    }
    let ok = failures.is_empty() && ic_collusions >= 5 && ms.len() == 200 && scp_proof > 0;
    report(
        7,
        ok,
        t.elapsed(),
        Duration::from_secs(120),
        &format!(
            "{} families, {ic_collusions} IC collusions composed, {} mutants ({scp_proof} SCP-proof), failures {failures:?}",
            families().len(),
            ms.len()
        ),
    );
}

#[test]
fn criterion_8_sqrtlog_lower_bound() {
    let t = Instant::now();
    let ns = [5usize, 9, 16, 25];
    let mut xs = Vec::new();
    let mut cs = Vec::new();
    let mut ratios = Vec::new();
    for n in ns {
        let d: Distribution = build_sqrtlog_family(n).unwrap().dist.into();
        let c = worst_case_c(&d).unwrap().c;
        let root = (n as f64).sqrt();
        xs.push(root);
        cs.push(c);
        ratios.push(c / (root / 2.0));
    }
    let mx = xs.iter().sum::<f64>() / xs.len() as f64;
    let my = cs.iter().sum::<f64>() / cs.len() as f64;
    let slope = xs.iter().zip(&cs).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let ok = slope > 0.0 && ratios.iter().all(|r| (0.4..=1.1).contains(r));
    report(
        8,
        ok,
        t.elapsed(),
        Duration::from_secs(10),
        &format!("C_F {cs:.4?}, ratio to sqrt(n)/2 {ratios:.4?}, slope {slope:.4}"),
    );
}
