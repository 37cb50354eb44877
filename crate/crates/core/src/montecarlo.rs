//! Finite-agent simulation of the market, used as an oracle for the
//! closed forms.
//!
//! Each replication draws `V`, `S` and `n_agents` signal errors, clears the
//! market exactly with the analytic per-agent demand, and records realized
//! welfare. Replication `r` draws from ChaCha8 stream `r` (or stream `r/2`
//! with negated draws for antithetic pairs), so results do not depend on
//! thread count or scheduling.

use std::io::Write;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmark::first_best_demand;
use crate::equilibrium::Equilibrium;
use crate::error::{Error, Result};
use crate::model::{validate, Bias, MarketParams, Regime, TaxSpec, ValidationReport, Violation};

pub const MIN_AGENTS: usize = 100;
pub const MIN_REPS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_agents: usize,
    pub n_reps: usize,
    pub seed: u64,
    /// Pair replication `2k` with the sign-flipped draws of `2k+1`.
    pub antithetic: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_agents: 10_000,
            n_reps: 100_000,
            seed: 42,
            antithetic: false,
        }
    }
}

impl SimConfig {
    pub fn check(&self) -> Result<()> {
        let mut r = ValidationReport::default();
        if self.n_agents < MIN_AGENTS {
            r.push(Violation::Setting("n_agents must be at least 100"));
        }
        if self.n_reps < MIN_REPS {
            r.push(Violation::Setting("n_reps must be at least 1000"));
        }
        if self.antithetic && self.n_reps % 2 != 0 {
            r.push(Violation::Setting("antithetic runs need an even n_reps"));
        }
        r.into_result()
    }
}

/// One replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub v: f64,
    pub s: f64,
    pub p: f64,
    pub d_bar: f64,
    /// Realized total surplus of the market allocation.
    pub welfare: f64,
    /// Realized total surplus of the first-best allocation.
    pub welfare_fb: f64,
    /// Loss in quantity form, dispersion with the `1/(n-1)` correction.
    pub loss: f64,
    /// Dispersion term `mean (D_i - D_bar)^2` (with `1/n`).
    pub dispersion: f64,
    /// Tax collected, summed agent by agent plus the supplier's share.
    pub tax_revenue: f64,
    /// Lump-sum rebate implied by budget balance.
    pub rebate: f64,
    /// Surplus net of taxes paid and the rebate received.
    pub welfare_net: f64,
    /// Supply-side quantity at the clearing price minus aggregate demand.
    pub clearing_gap: f64,
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    /// `|value - target|` in standard errors.
    pub fn z(&self, target: f64) -> f64 {
        let d = (self.value - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.se
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceRegression {
    pub a: Estimate,
    pub b: Estimate,
    /// Minus the coefficient on `S`.
    pub c: Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub welfare_loss: Estimate,
    /// Mean of `W^o - W` (equals the loss with `1/n` dispersion).
    pub welfare_gap: Estimate,
    pub var_p: Estimate,
    pub kappa: Estimate,
    pub price: PriceRegression,
    pub max_budget_gap: f64,
    pub max_clearing_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub params: MarketParams,
    pub theta: f64,
    pub tax: TaxSpec,
    pub equilibrium: Equilibrium,
    pub records: Vec<SimRecord>,
    pub summary: SimSummary,
}

struct Draw<'a> {
    v: f64,
    s: f64,
    eps: &'a [f64],
    sign: f64,
}

struct Market<'a> {
    params: &'a MarketParams,
    tax: &'a TaxSpec,
    eq: &'a Equilibrium,
    signal: f64,
    price_coef: f64,
    intercept: f64,
    /// `1 - b * price_coef`, the clearing coefficient on `p`.
    clear: f64,
}

impl Market<'_> {
    fn replicate(&self, d: &Draw<'_>, demand: &mut Vec<f64>) -> SimRecord {
        let p_ = self.params;
        let n = d.eps.len() as f64;
        let v = d.sign * d.v;
        let s = d.sign * d.s;
        let b = self.eq.slope;

        let eps_bar = d.sign * d.eps.iter().sum::<f64>() / n;
        let s_bar = v + eps_bar;
        let p = (-p_.mu_s - s + b * (self.signal * s_bar + self.intercept)) / self.clear;

        demand.clear();
        demand.extend(
            d.eps
                .iter()
                .map(|&e| self.signal * (v + d.sign * e) + self.price_coef * p + self.intercept),
        );
        let d_bar = demand.iter().sum::<f64>() / n;

        let (gamma, beta, delta) = (p_.gamma, p_.beta, self.tax.delta);
        let mut ss = 0.0;
        let mut trader_surplus = 0.0;
        let mut trader_tax = 0.0;
        for &di in demand.iter() {
            let dev = di - d_bar;
            ss += dev * dev;
            trader_surplus += v * di - 0.5 * gamma * di * di;
            trader_tax += 0.5 * delta * di * di;
        }
        trader_surplus /= n;
        trader_tax /= n;
        let dispersion = ss / n;

        let welfare = (p_.mu_s + s - 0.5 * beta * d_bar) * d_bar + trader_surplus;
        let d_o = first_best_demand(p_, v, s);
        let welfare_fb = (p_.mu_s + s - 0.5 * beta * d_o) * d_o + v * d_o - 0.5 * gamma * d_o * d_o;
        let loss = 0.5 * (beta + gamma) * (d_bar - d_o).powi(2) + 0.5 * gamma * ss / (n - 1.0);

        let supplier_tax = match self.tax.regime {
            Regime::BothSides => 0.5 * delta * d_bar * d_bar,
            Regime::InformedOnly => 0.0,
        };
        let tax_revenue = trader_tax + supplier_tax;
        let mean_sq = dispersion + d_bar * d_bar;
        let rebate = match self.tax.regime {
            Regime::BothSides => 0.5 * delta * (mean_sq + d_bar * d_bar),
            Regime::InformedOnly => 0.5 * delta * mean_sq,
        };
        let welfare_net = welfare - tax_revenue + rebate;

        SimRecord {
            v,
            s,
            p,
            d_bar,
            welfare,
            welfare_fb,
            loss,
            dispersion,
            tax_revenue,
            rebate,
            welfare_net,
            clearing_gap: (p + p_.mu_s + s) / b - d_bar,
        }
    }
}

/// Simulates `config.n_reps` independent markets under the equilibrium
/// strategies in `eqm`.
///
/// `eqm` is normally the solved equilibrium for `(params, bias, tax)`, but
/// any loadings may be passed to simulate off-equilibrium schedules.
pub fn simulate_market(
    params: &MarketParams,
    bias: &Bias,
    tax: &TaxSpec,
    eqm: &Equilibrium,
    config: &SimConfig,
) -> Result<SimResult> {
    validate(params, bias, tax).into_result()?;
    config.check()?;
    let schedule = eqm.schedule()?;
    let clear = 1.0 - eqm.slope * schedule.price;
    if clear == 0.0 || !clear.is_finite() {
        return Err(Error::DegenerateClearing);
    }
    let market = Market {
        params,
        tax,
        eq: eqm,
        signal: schedule.signal,
        price_coef: schedule.price,
        intercept: schedule.intercept,
        clear,
    };
    let sd_v = params.tau0.powf(-0.5);
    let sd_s = params.tau_s.powf(-0.5);
    let sd_e = params.tau_eps.powf(-0.5);
    let n = config.n_agents;
    let per_stream = if config.antithetic { 2 } else { 1 };
    let streams = config.n_reps / per_stream;

    let records: Vec<SimRecord> = (0..streams as u64)
        .into_par_iter()
        .map_init(
            || (vec![0.0; n], Vec::with_capacity(n)),
            |(eps, demand), k| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(k);
                let v = sd_v * rng.sample::<f64, _>(StandardNormal);
                let s = sd_s * rng.sample::<f64, _>(StandardNormal);
                for e in eps.iter_mut() {
                    *e = sd_e * rng.sample::<f64, _>(StandardNormal);
                }
                let mut out = [None, None];
                for (j, sign) in [1.0, -1.0].into_iter().take(per_stream).enumerate() {
                    let draw = Draw { v, s, eps, sign };
                    out[j] = Some(market.replicate(&draw, demand));
                }
                out
            },
        )
        .flat_map_iter(|pair| pair.into_iter().flatten())
        .collect();

    let mut result = SimResult {
        config: *config,
        params: *params,
        theta: bias.theta,
        tax: *tax,
        equilibrium: *eqm,
        records,
        summary: SimSummary {
            welfare_loss: Estimate { value: f64::NAN, se: f64::NAN },
            welfare_gap: Estimate { value: f64::NAN, se: f64::NAN },
            var_p: Estimate { value: f64::NAN, se: f64::NAN },
            kappa: Estimate { value: f64::NAN, se: f64::NAN },
            price: PriceRegression {
                a: Estimate { value: f64::NAN, se: f64::NAN },
                b: Estimate { value: f64::NAN, se: f64::NAN },
                c: Estimate { value: f64::NAN, se: f64::NAN },
            },
            max_budget_gap: f64::NAN,
            max_clearing_gap: f64::NAN,
        },
    };
    result.summary = summarize(&result);
    Ok(result)
}

/// Recomputes every summary statistic from the records.
pub fn summarize(result: &SimResult) -> SimSummary {
    let recs = &result.records;
    let max_abs = |f: fn(&SimRecord) -> f64| recs.iter().map(f).fold(0.0f64, |m, x| m.max(x.abs()));
    SimSummary {
        welfare_loss: mc_welfare_loss(result),
        welfare_gap: cluster_mean(result, |r| r.welfare_fb - r.welfare),
        var_p: mc_price_variance(result),
        kappa: mc_posterior_check(result, &result.equilibrium),
        price: mc_price_regression(result),
        max_budget_gap: max_abs(|r| r.tax_revenue - r.rebate),
        max_clearing_gap: max_abs(|r| r.clearing_gap),
    }
}

/// Replications that share draws (antithetic pairs) form one cluster.
fn clusters(result: &SimResult) -> std::slice::Chunks<'_, SimRecord> {
    let size = if result.config.antithetic { 2 } else { 1 };
    result.records.chunks(size)
}

fn cluster_mean(result: &SimResult, f: impl Fn(&SimRecord) -> f64) -> Estimate {
    let means: Vec<f64> = clusters(result)
        .map(|c| c.iter().map(&f).sum::<f64>() / c.len() as f64)
        .collect();
    let k = means.len() as f64;
    let mean = means.iter().sum::<f64>() / k;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Estimate {
        value: mean,
        se: (var / k).sqrt(),
    }
}

/// Mean welfare loss across replications.
pub fn mc_welfare_loss(result: &SimResult) -> Estimate {
    cluster_mean(result, |r| r.loss)
}

/// Sample variance of the price. The standard error is that of the mean of
/// squared deviations, `sqrt((m4 - m2^2) / N)` for independent replications.
pub fn mc_price_variance(result: &SimResult) -> Estimate {
    let n = result.records.len() as f64;
    let mean = result.records.iter().map(|r| r.p).sum::<f64>() / n;
    let e = cluster_mean(result, |r| (r.p - mean).powi(2));
    let scale = n / (n - 1.0);
    Estimate {
        value: e.value * scale,
        se: e.se * scale,
    }
}

/// Slope of `V` on `(p - A) / B` through the origin, with a cluster-robust
/// standard error.
pub fn mc_posterior_check(result: &SimResult, eqm: &Equilibrium) -> Estimate {
    let z = |r: &SimRecord| (r.p - eqm.price_a) / eqm.price_b;
    let (mut szv, mut szz) = (0.0, 0.0);
    for r in &result.records {
        szv += z(r) * r.v;
        szz += z(r) * z(r);
    }
    let k = szv / szz;
    let meat: f64 = clusters(result)
        .map(|c| c.iter().map(|r| z(r) * (r.v - k * z(r))).sum::<f64>().powi(2))
        .sum();
    Estimate {
        value: k,
        se: meat.sqrt() / szz,
    }
}

/// OLS of `p` on `(1, V, S)` with cluster-robust standard errors.
pub fn mc_price_regression(result: &SimResult) -> PriceRegression {
    let x = |r: &SimRecord| Vector3::new(1.0, r.v, r.s);
    let mut xtx = Matrix3::zeros();
    let mut xty = Vector3::zeros();
    for r in &result.records {
        let xi = x(r);
        xtx += xi * xi.transpose();
        xty += xi * r.p;
    }
    let nan = Estimate { value: f64::NAN, se: f64::NAN };
    let Some(inv) = xtx.try_inverse() else {
        return PriceRegression { a: nan, b: nan, c: nan };
    };
    let coef = inv * xty;
    let mut meat = Matrix3::zeros();
    for c in clusters(result) {
        let g: Vector3<f64> = c.iter().map(|r| x(r) * (r.p - x(r).dot(&coef))).sum();
        meat += g * g.transpose();
    }
    let cov = inv * meat * inv;
    let est = |i: usize, sign: f64| Estimate {
        value: sign * coef[i],
        se: cov[(i, i)].max(0.0).sqrt(),
    };
    PriceRegression {
        a: est(0, 1.0),
        b: est(1, 1.0),
        c: est(2, -1.0),
    }
}

pub const RECORD_COLUMNS: [&str; 13] = [
    "rep",
    "v",
    "s",
    "p",
    "d_bar",
    "welfare",
    "welfare_fb",
    "loss",
    "dispersion",
    "tax_revenue",
    "rebate",
    "welfare_net",
    "clearing_gap",
];

impl SimResult {
    /// One row per replication.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(RECORD_COLUMNS)?;
        for (i, r) in self.records.iter().enumerate() {
            let vals = [
                r.v,
                r.s,
                r.p,
                r.d_bar,
                r.welfare,
                r.welfare_fb,
                r.loss,
                r.dispersion,
                r.tax_revenue,
                r.rebate,
                r.welfare_net,
                r.clearing_gap,
            ];
            let mut rec = vec![i.to_string()];
            rec.extend(vals.iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        w.flush()
    }

    /// Config echo, equilibrium and summary, without the records.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "config": self.config,
            "params": self.params,
            "theta": self.theta,
            "tax": self.tax,
            "equilibrium": self.equilibrium,
            "summary": self.summary,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::equilibrium;
    use crate::model::{presets, SolverSettings};

    fn small(seed: u64, antithetic: bool) -> SimConfig {
        SimConfig {
            n_agents: 200,
            n_reps: 2000,
            seed,
            antithetic,
        }
    }

    fn run(tax: TaxSpec, cfg: &SimConfig) -> SimResult {
        let p = presets::fig1b();
        let b = Bias::new(0.3);
        let eq = equilibrium(&p, &b, &tax, &SolverSettings::default()).unwrap();
        simulate_market(&p, &b, &tax, &eq, cfg).unwrap()
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let a = run(TaxSpec::none(), &small(7, false));
        let b = run(TaxSpec::none(), &small(7, false));
        let c = run(TaxSpec::none(), &small(8, false));
        assert_eq!(a, b);
        assert_ne!(a.records[0], c.records[0]);
    }

    #[test]
    fn antithetic_pairs_mirror() {
        let r = run(TaxSpec::none(), &small(3, true));
        for pair in r.records.chunks(2) {
            assert_eq!(pair[0].v, -pair[1].v);
            assert_eq!(pair[0].s, -pair[1].s);
            assert!((pair[0].p + pair[1].p).abs() < 1e-12);
        }
    }

    #[test]
    fn welfare_gap_is_loss_with_population_dispersion() {
        let r = run(TaxSpec::none(), &small(1, false));
        let p = presets::fig1b();
        for rec in &r.records {
            let d_o = first_best_demand(&p, rec.v, rec.s);
            let pop = 0.5 * (p.beta + p.gamma) * (rec.d_bar - d_o).powi(2) + 0.5 * p.gamma * rec.dispersion;
            let gap = rec.welfare_fb - rec.welfare;
            assert!((gap - pop).abs() < 1e-10 * (1.0 + gap.abs()));
        }
    }

    #[test]
    fn market_clears_and_budget_balances() {
        for regime in Regime::ALL {
            let r = run(TaxSpec::new(0.1, regime), &small(2, false));
            assert!(r.summary.max_clearing_gap < 1e-10);
            assert!(r.summary.max_budget_gap < 1e-12);
            for rec in &r.records {
                assert!((rec.welfare_net - rec.welfare).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn summary_recomputes() {
        let r = run(TaxSpec::none(), &small(5, true));
        assert_eq!(summarize(&r), r.summary);
    }

    #[test]
    fn config_limits() {
        let mut c = small(0, false);
        c.n_agents = 99;
        assert!(c.check().is_err());
        c = small(0, true);
        c.n_reps = 2001;
        assert!(c.check().is_err());
    }

    #[test]
    fn csv_has_one_row_per_rep() {
        let r = run(TaxSpec::none(), &small(9, false));
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2001);
    }
}
