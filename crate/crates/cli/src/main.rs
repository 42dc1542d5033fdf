use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use tfm_lab_core::audits::{
    audit_dsic, audit_mmic, audit_mmic_at, audit_oca, audit_oca_at, audit_scp, audit_scp_at, enumerate_zero_revenue,
    DEFAULT_FAKE_BUDGET,
};
use tfm_lab_core::collusion::{
    check_collusion_ex_post_ir, check_collusion_ic, check_collusion_ir, search_ic_ir_collusion,
};
use tfm_lab_core::collusion_free::{collusion_free_prices, worst_case_c};
use tfm_lab_core::constructions::{build_cubic, CubicSpec};
use tfm_lab_core::distribution::Distribution;
use tfm_lab_core::files::{load_collusion, load_distribution, load_mechanism, parse_grid_spec, parse_levels, DistSpec};
use tfm_lab_core::mechanism::{check_basic_properties, BidGrid, GridMechanism};
use tfm_lab_core::pricing::{myerson_price, price_curves, price_point, sig9, write_curves_csv};
use tfm_lab_core::report::AuditReport;

#[derive(Parser)]
#[command(
    name = "tfm-lab",
    version,
    about = "Posted prices with burn, collusion-free prices and mechanism audits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Myerson price for a burn, with revenue, welfare and bidder utility.
    Price {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
    },
    /// Price curves over a burn grid as CSV.
    Curves {
        #[arg(long)]
        dist: PathBuf,
        /// `lo:hi:steps`
        #[arg(long, default_value = "0:1:100")]
        beta_grid: String,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Collusion-free posted prices, one `lo..hi` interval per line.
    CollusionFree {
        #[arg(long)]
        dist: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
    },
    /// Welfare-revenue approximation factor over collusion-free prices.
    Approx {
        #[arg(long)]
        dist: PathBuf,
    },
    /// Audit a mechanism for one incentive property.
    Check {
        #[arg(long)]
        mech: PathBuf,
        #[arg(long, value_enum)]
        prop: Prop,
        /// Coalition size for `scp`.
        #[arg(long, default_value_t = 1)]
        c: usize,
        /// Restrict `mmic`, `oca` or `scp` to one profile, e.g. `1,1/2,1/4`
        /// (bids for `mmic`, valuations otherwise).
        #[arg(long)]
        at: Option<String>,
        #[command(flatten)]
        common: AuditArgs,
    },
    /// Check or search side contracts against a mechanism.
    Collude {
        #[command(subcommand)]
        action: Collude,
    },
    /// Enumerate small DSIC mechanisms and audit MMIC and OCA.
    Enumerate {
        /// Comma-separated bid levels starting at 0.
        #[arg(long, default_value = "0,1,2")]
        levels: String,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Build a constructed prior and print its summary.
    Build {
        #[command(subcommand)]
        family: Family,
        /// Also write the spec file for the built prior.
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long, default_value_t = DEFAULT_FAKE_BUDGET)]
    fake_budget: usize,
    /// Write a JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Prop {
    Basic,
    Dsic,
    Mmic,
    Oca,
    Scp,
}

#[derive(Subcommand)]
enum Collude {
    /// IC, ex-post IR and (with a prior) ex-ante IR of a collusion.
    Check {
        #[arg(long)]
        mech: PathBuf,
        #[arg(long)]
        collusion: PathBuf,
        #[arg(long)]
        prior: Option<PathBuf>,
        #[command(flatten)]
        common: AuditArgs,
    },
    /// Search for a profitable IC and IR collusion; exits 1 if one exists.
    Search {
        #[arg(long)]
        mech: PathBuf,
        #[arg(long)]
        prior: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum Family {
    Cubic {
        #[arg(long)]
        a: f64,
        #[arg(long)]
        b: f64,
        #[arg(long)]
        c: f64,
    },
    TruncEqualRevenue {
        #[arg(long)]
        t: f64,
        #[arg(long)]
        eps: f64,
    },
    Sqrtlog {
        #[arg(long)]
        n: usize,
    },
    /// Smear each atom of a discrete prior file over `[v, v + eps]`.
    Smear {
        #[arg(long)]
        inner: PathBuf,
        #[arg(long)]
        eps: f64,
    },
}

/// Input problems exit with 2, failed properties with 1.
enum Failure {
    Input(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.into())
    }
}

type Outcome = Result<bool, Failure>;

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn dist(path: &Path) -> anyhow::Result<Distribution> {
    load_distribution(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn mech(path: &Path) -> anyhow::Result<GridMechanism> {
    load_mechanism(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn write_report(path: Option<&Path>, value: &Value) -> anyhow::Result<()> {
    if let Some(p) = path {
        let text = serde_json::to_string_pretty(value)?;
        fs::write(p, text + "\n").with_context(|| format!("cannot write {}", p.display()))?;
    }
    Ok(())
}

fn audit_json(r: &AuditReport) -> Value {
    json!({
        "property": r.property,
        "verdict": if r.passed { "pass" } else { "fail" },
        "witness": r.witness,
        "gap": r.witness.as_ref().map(|w| w.gap()),
    })
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(s) = std::env::var("TFM_LAB_THREADS") {
        let n: usize = s
            .trim()
            .parse()
            .with_context(|| format!("TFM_LAB_THREADS={s} is not a count"))?;
        if n == 0 {
            bail!("TFM_LAB_THREADS must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    init_threads()?;
    let mut out = io::stdout().lock();
    match cli.command {
        Command::Price { dist: path, beta } => {
            let d = dist(&path)?;
            let price = myerson_price(&d, beta)?;
            let p = price_point(&d, price, beta)?;
            writeln!(out, "price: {}", sig9(p.price))?;
            writeln!(out, "revenue: {}", sig9(p.revenue))?;
            writeln!(out, "welfare: {}", sig9(p.welfare))?;
            writeln!(out, "bidder_utility: {}", sig9(p.bidder_utility))?;
            writeln!(out, "realized_burn: {}", sig9(p.realized_burn))?;
        }
        Command::Curves {
            dist: path,
            beta_grid,
            out: target,
        } => {
            let d = dist(&path)?;
            let points = price_curves(&d, &parse_grid_spec(&beta_grid)?)?;
            let mut buf = Vec::new();
            write_curves_csv(&points, &mut buf)?;
            match target {
                Some(p) => fs::write(&p, buf).with_context(|| format!("cannot write {}", p.display()))?,
                None => out.write_all(&buf)?,
            }
        }
        Command::CollusionFree { dist: path, beta } => {
            let set = collusion_free_prices(&dist(&path)?, beta)?;
            for &(lo, hi) in set.intervals() {
                writeln!(out, "{}..{}", sig9(lo), sig9(hi))?;
            }
        }
        Command::Approx { dist: path } => {
            let w = worst_case_c(&dist(&path)?)?;
            writeln!(out, "C_F: {}", sig9(w.c))?;
            writeln!(out, "price: {}", sig9(w.at.price))?;
            writeln!(out, "revenue_ratio: {}", sig9(w.at.revenue_ratio))?;
            writeln!(out, "welfare_ratio: {}", sig9(w.at.welfare_ratio))?;
            writeln!(out, "regular: {}", w.regular)?;
        }
        Command::Check {
            mech: path,
            prop,
            c,
            at,
            common,
        } => {
            let m = mech(&path)?;
            let budget = common.fake_budget;
            let at = at.as_deref().map(parse_levels).transpose()?;
            if matches!(prop, Prop::Scp) && (c == 0 || c > m.n_max()) {
                return Err(anyhow::anyhow!("--c must be in 1..={}", m.n_max()).into());
            }
            let report = match (prop, &at) {
                (Prop::Basic, None) => None,
                (Prop::Dsic, None) => Some(audit_dsic(&m)),
                (Prop::Mmic, None) => Some(audit_mmic(&m, budget)),
                (Prop::Oca, None) => Some(audit_oca(&m, budget)),
                (Prop::Scp, None) => Some(audit_scp(&m, c, budget)),
                (Prop::Mmic, Some(v)) => Some(audit_mmic_at(&m, v, budget)?),
                (Prop::Oca, Some(v)) => Some(audit_oca_at(&m, v, budget)?),
                (Prop::Scp, Some(v)) => Some(audit_scp_at(&m, c, v, budget)?),
                (Prop::Basic | Prop::Dsic, Some(_)) => {
                    return Err(anyhow::anyhow!("--at applies to mmic, oca and scp only").into())
                }
            };
            let reports = match report {
                Some(r) => vec![r],
                None => check_basic_properties(&m).reports().into_iter().cloned().collect(),
            };
            return finish(&mut out, m.name(), &reports, common.report.as_deref(), json!({}));
        }
        Command::Collude {
            action:
                Collude::Check {
                    mech: mpath,
                    collusion,
                    prior,
                    common,
                },
        } => {
            let m = mech(&mpath)?;
            let col = load_collusion(&read(&collusion)?, &m).with_context(|| format!("in {}", collusion.display()))?;
            let mut reports = vec![
                check_collusion_ic(&m, &col, common.fake_budget)?,
                check_collusion_ex_post_ir(&m, &col)?,
            ];
            let mut extra = json!({});
            if let Some(p) = prior {
                let ir = check_collusion_ir(&m, &col, &dist(&p)?)?;
                let ex = &ir.expectations;
                extra = json!({
                    "expectations": {
                        "members": ex.members.iter().map(|&(s, h, c)| json!({"slot": s, "honest": h, "collusive": c})).collect::<Vec<_>>(),
                        "miner": {"honest": ex.miner.0, "collusive": ex.miner.1},
                        "welfare_gain": ex.welfare_gain(),
                    }
                });
                reports.push(ir.audit);
            }
            let label = format!("{} against {}", col.name(), m.name());
            return finish(&mut out, &label, &reports, common.report.as_deref(), extra);
        }
        Command::Collude {
            action:
                Collude::Search {
                    mech: mpath,
                    prior,
                    k,
                    report,
                },
        } => {
            let m = mech(&mpath)?;
            let found = search_ic_ir_collusion(&m, &dist(&prior)?, k)?;
            let value = match &found {
                Some(r) => {
                    writeln!(out, "collusion: {}", r.collusion.name())?;
                    writeln!(out, "threshold: {}", sig9(r.threshold))?;
                    writeln!(out, "effective_price: {}", sig9(r.effective_price))?;
                    writeln!(out, "miner_gain: {}", sig9(r.miner_gain))?;
                    json!({"found": true, "collusion": r.collusion.name(), "threshold": r.threshold,
                           "effective_price": r.effective_price, "miner_gain": r.miner_gain})
                }
                None => {
                    writeln!(out, "no profitable IC+IR collusion")?;
                    json!({"found": false})
                }
            };
            write_report(report.as_deref(), &value)?;
            return Ok(found.is_none());
        }
        Command::Enumerate { levels, n, report } => {
            let grid = BidGrid::new(parse_levels(&levels)?)?;
            let s = enumerate_zero_revenue(&grid, n)?;
            writeln!(out, "mechanisms: {}, dsic: {}", s.total, s.dsic)?;
            writeln!(out, "fixed winner: {}", s.fixed_winner)?;
            writeln!(out, "survivors: {}, max revenue: {}", s.survivors, sig9(s.max_revenue))?;
            write_report(report.as_deref(), &serde_json::to_value(&s)?)?;
        }
        Command::Build { family, out: target } => {
            let spec = match family {
                Family::Cubic { a, b, c } => {
                    let built = build_cubic(CubicSpec { a, b, c })?;
                    writeln!(out, "27/8*a*c >= b^2: {}", built.algebraic_condition)?;
                    writeln!(out, "density nonnegative on grid: {}", built.numeric_density_ok)?;
                    DistSpec::CubicPoly { a, b, c }
                }
                Family::TruncEqualRevenue { t, eps } => DistSpec::TruncEqualRevenue { t, eps },
                Family::Sqrtlog { n } => DistSpec::Sqrtlog { n },
                Family::Smear { inner, eps } => {
                    let text = read(&inner)?;
                    let inner: DistSpec =
                        serde_json::from_str(&text).with_context(|| format!("in {}", inner.display()))?;
                    DistSpec::Smear {
                        inner: Box::new(inner),
                        eps,
                    }
                }
            };
            let d = spec.build()?;
            describe(&mut out, &d)?;
            if let Some(p) = target {
                let text = serde_json::to_string_pretty(&spec_json(&spec))?;
                fs::write(&p, text + "\n").with_context(|| format!("cannot write {}", p.display()))?;
            }
        }
    }
    Ok(true)
}

fn describe(out: &mut impl Write, d: &Distribution) -> anyhow::Result<()> {
    let (lo, hi) = d.support();
    writeln!(out, "support: {}..{}", sig9(lo), sig9(hi))?;
    writeln!(out, "mean: {}", sig9(d.mean()))?;
    writeln!(out, "regular: {}", d.is_regular()?)?;
    if let Distribution::Discrete(dd) = d {
        for (v, w) in dd.values().iter().zip(dd.weights()) {
            writeln!(out, "atom: {} {}", sig9(*v), sig9(*w))?;
        }
    }
    let price = myerson_price(d, 0.0)?;
    writeln!(out, "monopoly price: {}", sig9(price))?;
    writeln!(out, "monopoly revenue: {}", sig9(price_point(d, price, 0.0)?.revenue))?;
    Ok(())
}

fn spec_json(spec: &DistSpec) -> Value {
    match spec {
        DistSpec::CubicPoly { a, b, c } => json!({"kind": "cubic_poly", "a": a, "b": b, "c": c}),
        DistSpec::TruncEqualRevenue { t, eps } => {
            json!({"kind": "trunc_equal_revenue", "T": t, "eps": eps})
        }
        DistSpec::Sqrtlog { n } => json!({"kind": "sqrtlog", "n": n}),
        DistSpec::Smear { inner, eps } => {
            json!({"kind": "smear", "inner": spec_json(inner), "eps": eps})
        }
        DistSpec::Uniform { lo, hi } => json!({"kind": "uniform", "lo": lo, "hi": hi}),
        DistSpec::TruncExponential { rate, hi } => {
            json!({"kind": "trunc_exponential", "rate": rate, "hi": hi})
        }
        DistSpec::Discrete { points } => json!({"kind": "discrete", "points": points}),
        DistSpec::Piecewise { pieces } => json!({"kind": "piecewise", "pieces": pieces}),
    }
}

fn finish(out: &mut impl Write, label: &str, reports: &[AuditReport], report: Option<&Path>, extra: Value) -> Outcome {
    writeln!(out, "{label}")?;
    for r in reports {
        writeln!(out, "{r}")?;
    }
    let passed = reports.iter().all(|r| r.passed);
    let mut value = json!({
        "subject": label,
        "verdict": if passed { "pass" } else { "fail" },
        "audits": reports.iter().map(audit_json).collect::<Vec<_>>(),
    });
    if let (Value::Object(v), Value::Object(e)) = (&mut value, extra) {
        v.extend(e);
    }
    write_report(report, &value)?;
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
