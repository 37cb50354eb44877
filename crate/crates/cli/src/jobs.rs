//! Resolved commands and their outputs.
//!
//! A [`Job`] carries every input a command needs, so it can be stored in a
//! manifest and run again to the same bytes.

use std::fmt::Write as _;

use anyhow::Result;
use overreact::numeric::Boundary;
use overreact::welfare::{breakdown, wl_tax_at};
use overreact::{
    equilibrium, externality_balance, linspace, optimal_tax, policy_report, presets, price_stats, run_suite,
    simulate_market, sweep, threshold_delta_star, threshold_theta_private, threshold_theta_public, wl_general, Axis,
    Bias, Error, MarketParams, Regime, SimConfig, SolverSettings, SuiteConfig, TaxSpec,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Fig1a,
    Fig1b,
    Fig3,
}

impl Figure {
    pub fn as_str(self) -> &'static str {
        match self {
            Figure::Fig1a => "fig1a",
            Figure::Fig1b => "fig1b",
            Figure::Fig3 => "fig3",
        }
    }

    pub fn default_points(self) -> usize {
        match self {
            Figure::Fig1a | Figure::Fig1b => 200,
            Figure::Fig3 => 191,
        }
    }

    pub fn cases(self) -> Vec<MarketParams> {
        match self {
            Figure::Fig1a => vec![presets::fig1a()],
            Figure::Fig1b => vec![presets::fig1b()],
            Figure::Fig3 => vec![presets::fig1a(), presets::fig1b()],
        }
    }

    pub fn range(self) -> (f64, f64) {
        match self {
            Figure::Fig1a => (-0.2, 0.6),
            Figure::Fig1b => (-0.3, 0.3),
            Figure::Fig3 => (-0.9, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Job {
    Solve { model: Model },
    Sweep { model: Model, axis: Axis, from: f64, to: f64, points: usize },
    Threshold { model: Model },
    Optimize { model: Model },
    /// `cases` holds the preset economies: one for fig1a/fig1b, two for fig3.
    Figure {
        figure: Figure,
        points: usize,
        cases: Vec<MarketParams>,
        settings: SolverSettings,
    },
    Verify { suite: SuiteConfig },
    Simulate { model: Model, sim: SimConfig },
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::Solve { .. } => "solve",
            Job::Sweep { .. } => "sweep",
            Job::Threshold { .. } => "threshold",
            Job::Optimize { .. } => "optimize",
            Job::Figure { figure, .. } => figure.as_str(),
            Job::Verify { .. } => "verify",
            Job::Simulate { .. } => "simulate",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Job::Verify { suite } => Some(suite.seed),
            Job::Simulate { sim, .. } => Some(sim.seed),
            _ => None,
        }
    }

    pub fn notes(&self) -> Vec<String> {
        match self {
            Job::Figure { .. } => vec!["figure presets fix mu_s = 0".to_string()],
            _ => Vec::new(),
        }
    }
}

pub struct OutFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

pub struct JobOutput {
    pub files: Vec<OutFile>,
    /// Human-readable rendering for stdout.
    pub text: String,
    pub json: Value,
    /// False when a verification failed.
    pub ok: bool,
}

fn json_file(name: &str, v: &Value) -> OutFile {
    let mut bytes = serde_json::to_vec_pretty(v).expect("serializable");
    bytes.push(b'\n');
    OutFile {
        name: name.to_string(),
        bytes,
    }
}

fn table(rows: &[(&str, String)]) -> String {
    let w = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    rows.iter().fold(String::new(), |mut s, (k, v)| {
        let _ = writeln!(s, "{k:<w$}  {v}");
        s
    })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| v.to_string())
}

pub fn run(job: &Job) -> Result<JobOutput> {
    match job {
        Job::Solve { model } => solve(model),
        Job::Sweep { model, axis, from, to, points } => run_sweep(model, *axis, *from, *to, *points),
        Job::Threshold { model } => threshold(model),
        Job::Optimize { model } => optimize(model),
        Job::Figure { figure, points, cases, settings } => figure_job(*figure, *points, cases, settings),
        Job::Verify { suite } => verify(suite),
        Job::Simulate { model, sim } => simulate(model, sim),
    }
}

/// Inputs echoed by every analytic command, in the form `--from-json` reads.
fn model_json(m: &Model) -> Value {
    json!({
        "params": m.params,
        "theta": m.theta,
        "tax": m.tax,
        "settings": m.settings,
    })
}

/// Reads the inputs echoed by `solve --json`.
pub fn model_from_json(v: &Value) -> Result<Model> {
    Ok(Model {
        params: serde_json::from_value(v["params"].clone())?,
        theta: serde_json::from_value(v["theta"].clone())?,
        tax: serde_json::from_value(v["tax"].clone())?,
        settings: match v.get("settings") {
            Some(s) => serde_json::from_value(s.clone())?,
            None => SolverSettings::default(),
        },
    })
}

fn solve(m: &Model) -> Result<JobOutput> {
    let bias = Bias::new(m.theta);
    let eq = equilibrium(&m.params, &bias, &m.tax, &m.settings)?;
    let stats = price_stats(&eq);
    let wl = wl_tax_at(&m.params, &eq);
    // the Bayesian/diagnostic split only exists without a tax
    let split = (m.tax.delta == 0.0).then(|| breakdown(&m.params, &eq));
    let mut v = model_json(m);
    v["equilibrium"] = serde_json::to_value(eq)?;
    v["price"] = serde_json::to_value(stats)?;
    v["welfare"] = json!({
        "wl_total": wl,
        "wl_bayes": split.map(|w| w.wl_bayes),
        "wl_diag": split.map(|w| w.wl_diag),
    });
    let rows = [
        ("a", eq.a.to_string()),
        ("alpha", eq.alpha.to_string()),
        ("eta", eq.eta.to_string()),
        ("eta_p", eq.eta_p.to_string()),
        ("tau", eq.tau.to_string()),
        ("kappa", eq.kappa.to_string()),
        ("A", eq.price_a.to_string()),
        ("B", eq.price_b.to_string()),
        ("C", eq.price_c.to_string()),
        ("var_p", stats.var_p.to_string()),
        ("wl_total", wl.to_string()),
        ("wl_bayes", fmt_opt(split.map(|w| w.wl_bayes))),
        ("wl_diag", fmt_opt(split.map(|w| w.wl_diag))),
    ];
    Ok(JobOutput {
        files: vec![json_file("solve.json", &v)],
        text: table(&rows),
        json: v,
        ok: true,
    })
}

fn run_sweep(m: &Model, axis: Axis, from: f64, to: f64, points: usize) -> Result<JobOutput> {
    let grid = linspace(from, to, points);
    let t = sweep(&m.params, axis, &grid, &Bias::new(m.theta), &m.tax, &m.settings)?;
    let mut csv = Vec::new();
    t.write_csv(&mut csv, &[])?;
    let mut v = model_json(m);
    v["axis"] = serde_json::to_value(axis)?;
    v["rows"] = serde_json::to_value(&t.rows)?;
    Ok(JobOutput {
        text: String::from_utf8(csv.clone())?,
        files: vec![OutFile {
            name: "sweep.csv".to_string(),
            bytes: csv,
        }],
        json: v,
        ok: true,
    })
}

fn star(m: &Model, regime: Regime) -> Result<Option<f64>> {
    match threshold_delta_star(&m.params, &Bias::new(m.theta), regime, &m.settings) {
        Ok(d) => Ok(Some(d)),
        Err(Error::Infeasible { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn threshold(m: &Model) -> Result<JobOutput> {
    let bench = externality_balance(&m.params, &m.settings)?;
    let t1 = threshold_theta_private(&m.params, &m.settings)?;
    let t2 = threshold_theta_public(&m.params, &m.settings)?;
    let (both, informed) = (star(m, Regime::BothSides)?, star(m, Regime::InformedOnly)?);
    let mut v = model_json(m);
    v["benchmark"] = serde_json::to_value(&bench)?;
    v["theta_prime"] = json!(t1);
    v["theta_dprime"] = json!(t2);
    v["delta_star_both"] = json!(both);
    v["delta_star_informed"] = json!(informed);
    let rows = [
        ("a_star", bench.a_star.to_string()),
        ("a_team", bench.a_team.to_string()),
        ("balance", serde_json::to_value(bench.balance)?.as_str().unwrap_or("").to_string()),
        ("theta_prime", t1.to_string()),
        ("theta_dprime", t2.to_string()),
        ("delta_star_both", fmt_opt(both)),
        ("delta_star_informed", fmt_opt(informed)),
    ];
    Ok(JobOutput {
        files: vec![json_file("threshold.json", &v)],
        text: table(&rows),
        json: v,
        ok: true,
    })
}

fn boundary_str(b: Option<Boundary>) -> &'static str {
    match b {
        None => "interior",
        Some(Boundary::Lower) => "lower",
        Some(Boundary::Upper) => "upper",
    }
}

fn optimize(m: &Model) -> Result<JobOutput> {
    let rep = policy_report(&m.params, &Bias::new(m.theta), &m.settings)?;
    let mut v = model_json(m);
    v["policy"] = serde_json::to_value(&rep)?;
    let rows = [
        ("theta_opt", rep.theta_opt.theta_opt.to_string()),
        ("theta_opt_flag", boundary_str(rep.theta_opt.boundary).to_string()),
        ("wl_at_theta_opt", rep.theta_opt.wl.to_string()),
        ("delta_opt_both", rep.tax_opt_both.delta_opt.to_string()),
        ("delta_opt_both_flag", boundary_str(rep.tax_opt_both.boundary).to_string()),
        ("delta_opt_informed", rep.tax_opt_informed.delta_opt.to_string()),
        ("delta_opt_informed_flag", boundary_str(rep.tax_opt_informed.boundary).to_string()),
    ];
    Ok(JobOutput {
        files: vec![json_file("optimize.json", &v)],
        text: table(&rows),
        json: v,
        ok: true,
    })
}

pub const FIG3_COLUMNS: [&str; 5] = ["theta", "delta_opt_case1", "delta_opt_case2", "flag_case1", "flag_case2"];

fn figure_job(fig: Figure, points: usize, cases: &[MarketParams], settings: &SolverSettings) -> Result<JobOutput> {
    let want = fig.cases().len();
    if cases.len() != want {
        anyhow::bail!("{} needs {want} parameter set(s), got {}", fig.as_str(), cases.len());
    }
    let (lo, hi) = fig.range();
    let grid = linspace(lo, hi, points);
    let csv = match fig {
        Figure::Fig1a | Figure::Fig1b => {
            let p = cases[0];
            let none = TaxSpec::none();
            let t = sweep(&p, Axis::Theta, &grid, &Bias::bayesian(), &none, settings)?;
            let market = breakdown(&p, &equilibrium(&p, &Bias::bayesian(), &none, settings)?).wl_total;
            let at = overreact::team_loading(&p, settings)?;
            let team = wl_general(&p, at, 1.0 / p.gamma - at);
            let mut out = Vec::new();
            t.write_csv(&mut out, &[("wl_market", vec![market; points]), ("wl_team", vec![team; points])])?;
            out
        }
        Figure::Fig3 => fig3_csv(&grid, cases, settings)?,
    };
    let name = format!("{}.csv", fig.as_str());
    let rows = csv.iter().filter(|&&b| b == b'\n').count().saturating_sub(1);
    Ok(JobOutput {
        text: format!("{name}: {rows} rows\n"),
        json: json!({ "figure": fig, "file": name, "rows": rows }),
        files: vec![OutFile { name, bytes: csv }],
        ok: true,
    })
}

fn fig3_csv(grid: &[f64], cases: &[MarketParams], settings: &SolverSettings) -> Result<Vec<u8>> {
    let opt = |p: &MarketParams, t: f64| optimal_tax(p, &Bias::new(t), Regime::BothSides, settings);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(FIG3_COLUMNS)?;
    for &t in grid {
        let (c1, c2) = (opt(&cases[0], t)?, opt(&cases[1], t)?);
        w.write_record([
            t.to_string(),
            c1.delta_opt.to_string(),
            c2.delta_opt.to_string(),
            boundary_str(c1.boundary).to_string(),
            boundary_str(c2.boundary).to_string(),
        ])?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

fn verify(suite: &SuiteConfig) -> Result<JobOutput> {
    let mut text = String::new();
    let rep = run_suite(suite, |_| {});
    for run in &rep.runs {
        let _ = writeln!(text, "simulation seed {}", run.sim_seed);
        for c in &run.checks {
            let verdict = if c.pass { "ok" } else { "FAIL" };
            if c.se > 0.0 || c.se.is_nan() {
                let _ = writeln!(
                    text,
                    "  draw {:>2} {:<15} analytic {:<12.6e} estimate {:<12.6e} |z| {:.2} (limit {}) {verdict}",
                    c.draw, c.name, c.analytic, c.estimate, c.z, suite.z_max
                );
            } else {
                let _ = writeln!(
                    text,
                    "  draw {:>2} {:<15} max gap {:.2e} (limit {:e}) {verdict}",
                    c.draw, c.name, c.estimate, suite.exact_tol
                );
            }
        }
        let _ = writeln!(text, "  marginal {} hard {} -> {}", run.marginal, run.hard, if run.passed { "pass" } else { "fail" });
    }
    let _ = writeln!(text, "{}", if rep.passed { "PASS" } else { "FAIL" });
    let v = serde_json::to_value(&rep)?;
    Ok(JobOutput {
        files: vec![json_file("verify.json", &v)],
        text,
        json: v,
        ok: rep.passed,
    })
}

fn simulate(m: &Model, sim: &SimConfig) -> Result<JobOutput> {
    let bias = Bias::new(m.theta);
    let eq = equilibrium(&m.params, &bias, &m.tax, &m.settings)?;
    let r = simulate_market(&m.params, &bias, &m.tax, &eq, sim)?;
    let mut csv = Vec::new();
    r.write_csv(&mut csv)?;
    let v = r.summary_json();
    let s = &r.summary;
    let est = |e: &overreact::Estimate| format!("{} (se {})", e.value, e.se);
    let rows = [
        ("welfare_loss", est(&s.welfare_loss)),
        ("var_p", est(&s.var_p)),
        ("kappa", est(&s.kappa)),
        ("A", est(&s.price.a)),
        ("B", est(&s.price.b)),
        ("C", est(&s.price.c)),
        ("max_budget_gap", s.max_budget_gap.to_string()),
        ("max_clearing_gap", s.max_clearing_gap.to_string()),
    ];
    Ok(JobOutput {
        files: vec![
            OutFile {
                name: "simulate.csv".to_string(),
                bytes: csv,
            },
            json_file("simulate_summary.json", &v),
        ],
        text: table(&rows),
        json: v,
        ok: true,
    })
}
