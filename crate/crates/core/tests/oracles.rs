use overreact::benchmark::{team_loading, BenchmarkReport};
use overreact::welfare::{breakdown, wl_tax_at};
use overreact::{
    balanced_beta, equilibrium, externality_balance, presets, raw_signal_pricing, simulate_market, welfare_loss,
    wl_general, Balance, Bias, Equilibrium, MarketParams, Regime, SimConfig, SolverSettings, TaxSpec,
};
use proptest::prelude::*;

fn s() -> SolverSettings {
    SolverSettings::default()
}

fn eq(p: &MarketParams, theta: f64, tax: &TaxSpec) -> Equilibrium {
    equilibrium(p, &Bias::new(theta), tax, &s()).unwrap()
}

/// Welfare loss of the linear strategies in `e`, by exact second moments.
///
/// Writes `Dbar - D^o` as `c0 + cV V + cS S` using only the price function
/// `p = A + B V - C S` and the demand first-order condition, then takes
/// expectations. Dispersion of individual demands is `alpha^2 / tau_eps`.
fn second_moment_wl(p: &MarketParams, e: &Equilibrium, g: f64) -> f64 {
    let (a_, b_, c_) = (e.price_a, e.price_b, e.price_c);
    let tau_z = (b_ / c_).powi(2) * p.tau_s;
    let k = tau_z / (p.tau0 + tau_z);
    let tau = p.tau0 + tau_z;
    let th1 = e.theta + 1.0;
    // D = (E^theta - p)/g with E^theta = th1 (tau_eps s + tau E(V|p)) / (tau_eps + tau),
    // E(V|p) = k (p - A)/B; average over s gives s = V
    let w_s = th1 * p.tau_eps / ((p.tau_eps + tau) * g);
    let w_e = th1 * tau / ((p.tau_eps + tau) * g);
    // E(V|p) = k V - k C/B S
    let (ev_v, ev_s) = (k, -k * c_ / b_);
    let d_const = -a_ / g;
    let d_v = w_s + w_e * ev_v - b_ / g;
    let d_s = w_e * ev_s + c_ / g;
    let bg = p.beta + p.gamma;
    let c0 = d_const - p.mu_s / bg;
    let cv = d_v - 1.0 / bg;
    let cs = d_s - 1.0 / bg;
    let msq = c0 * c0 + cv * cv / p.tau0 + cs * cs / p.tau_s;
    0.5 * bg * msq + 0.5 * p.gamma * w_s * w_s / p.tau_eps
}

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

prop_compose! {
    fn params()(
        gamma in log_uniform(0.1, 10.0),
        beta in log_uniform(0.1, 10.0),
        tau0 in log_uniform(0.1, 10.0),
        tau_eps in log_uniform(0.1, 10.0),
        tau_s in log_uniform(0.1, 10.0),
        mu_s in -1.0..1.0f64,
    ) -> MarketParams {
        MarketParams::new(gamma, beta, tau0, tau_eps, tau_s, mu_s)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn welfare_matches_second_moments(
        p in params(), theta in -0.9..5.0f64, both in any::<bool>(), u in 0.0..1.0f64
    ) {
        let regime = if both { Regime::BothSides } else { Regime::InformedOnly };
        let lb = TaxSpec::lower_bound(regime, &p);
        let tax = TaxSpec::new(0.5 * lb + u * (1.0 - 0.5 * lb), regime);
        let e = eq(&p, theta, &tax);
        let want = second_moment_wl(&p, &e, tax.cost(&p));
        let got = wl_tax_at(&p, &e);
        prop_assert!((got - want).abs() < 1e-9 * want, "{got} vs {want}");
        if tax.delta == 0.0 || theta == 0.0 {
            return Ok(());
        }
        let e0 = eq(&p, theta, &TaxSpec::none());
        let untaxed = breakdown(&p, &e0).wl_total;
        prop_assert!((untaxed - second_moment_wl(&p, &e0, p.gamma)).abs() < 1e-9 * untaxed);
    }

    #[test]
    fn team_loading_is_the_welfare_argmin(p in params()) {
        let at = team_loading(&p, &s()).unwrap();
        let n = 100_000;
        let hi = 10.0 / p.gamma;
        let step = hi / n as f64;
        let (mut best, mut arg) = (f64::INFINITY, 0.0);
        for i in 1..=n {
            let a = i as f64 * step;
            let w = wl_general(&p, a, 1.0 / p.gamma - a);
            if w < best {
                best = w;
                arg = a;
            }
        }
        prop_assert!((arg - at).abs() <= 2.0 * step, "grid {arg} vs {at}");
    }
}

#[test]
fn spec_loading_examples() {
    // beta must be positive; at 1e-12 the price carries no information
    let p = MarketParams::new(2.0, 1e-12, 1.0, 1.0, 1.0, 0.0);
    assert!((eq(&p, 0.0, &TaxSpec::none()).a - 0.25).abs() < 1e-15);

    let unit = MarketParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 0.0);
    let e = eq(&unit, 0.0, &TaxSpec::none());
    assert!((e.a.powi(3) + 2.0 * e.a - 1.0).abs() < 1e-14);
    assert!((e.a - 0.4534).abs() < 1e-4);
    assert_eq!(e.price_a, 0.0);
    let (_, b_raw, c_raw) = raw_signal_pricing(&e);
    assert!((b_raw - 0.5).abs() < 1e-15);
    assert!((c_raw - 1.0 / (2.0 * e.a)).abs() < 1e-14);
    let w = e.a + (1.0 - e.a) * e.kappa;
    assert!((e.price_b - w / 2.0).abs() < 1e-15);
    assert!((e.price_c - w / (2.0 * e.a)).abs() < 1e-14);
}

#[test]
fn unit_welfare_from_the_cubic_root() {
    let unit = MarketParams::new(1.0, 1.0, 1.0, 1.0, 1.0, 0.0);
    let a = eq(&unit, 0.0, &TaxSpec::none()).a;
    let tau = 1.0 + a * a;
    let hand = 0.5 * (1.0 - a).powi(2) / (2.0 * tau) + a * a / 2.0;
    let w = welfare_loss(&unit, &Bias::bayesian(), &s()).unwrap();
    assert!((w.wl_total - hand).abs() < 1e-14);
    assert_eq!(w.wl_diag, 0.0);
}

#[test]
fn general_loss_special_points() {
    let p = presets::fig1b();
    // gamma alpha = 1 and eta = 0 leaves only dispersion
    let alpha = 1.0 / p.gamma;
    let w = wl_general(&p, alpha, 0.0);
    assert!((w - p.gamma * alpha * alpha / (2.0 * p.tau_eps)).abs() < 1e-15);
    // at the team strategies the loss is the team loss, below the market loss
    let at = team_loading(&p, &s()).unwrap();
    let team = wl_general(&p, at, 1.0 / p.gamma - at);
    let market = welfare_loss(&p, &Bias::bayesian(), &s()).unwrap().wl_total;
    assert!(team < market);
}

#[test]
fn balanced_market_is_second_best() {
    let base = presets::balanced_base();
    let beta = balanced_beta(&base, 0.1, 0.5, &s()).unwrap();
    let p = base.with_beta(beta);
    let rep: BenchmarkReport = externality_balance(&p, &s()).unwrap();
    assert_eq!(rep.balance, Balance::Balanced);
    let market = welfare_loss(&p, &Bias::bayesian(), &s()).unwrap().wl_total;
    let team = wl_general(&p, rep.a_team, 1.0 / p.gamma - rep.a_team);
    assert!((market - team).abs() < 1e-12 * team);
}

#[test]
fn figure_presets_match_verified_values() {
    let a = externality_balance(&presets::fig1a(), &s()).unwrap();
    assert!((a.a_star - 0.12165476403455795).abs() < 1e-12);
    assert!((a.a_team - 0.14595293455636082).abs() < 1e-10);
    let b = externality_balance(&presets::fig1b(), &s()).unwrap();
    assert!((b.a_star - 0.265325577541956).abs() < 1e-12);
    assert!((b.a_team - 0.24100340736228876).abs() < 1e-10);
}

fn cfg(n_agents: usize, n_reps: usize, seed: u64) -> SimConfig {
    SimConfig {
        n_agents,
        n_reps,
        seed,
        antithetic: false,
    }
}

#[test]
fn precise_signals_collapse_dispersion() {
    let p = MarketParams::new(3.0, 2.0, 1.0, 1e9, 1.0, 0.0);
    let b = Bias::bayesian();
    let e = eq(&p, 0.0, &TaxSpec::none());
    let r = simulate_market(&p, &b, &TaxSpec::none(), &e, &cfg(500, 1000, 3)).unwrap();
    for rec in &r.records {
        assert!(rec.dispersion < 1e-8);
    }
}

#[test]
fn fig1b_simulation_matches_welfare_loss() {
    let p = presets::fig1b();
    let b = Bias::bayesian();
    let e = eq(&p, 0.0, &TaxSpec::none());
    let r = simulate_market(&p, &b, &TaxSpec::none(), &e, &cfg(2000, 20_000, 11)).unwrap();
    let wl = breakdown(&p, &e).wl_total;
    assert!(r.summary.welfare_loss.z(wl) < 3.0);
    let pr = &r.summary.price;
    assert!(pr.a.z(e.price_a) < 3.0 && pr.b.z(e.price_b) < 3.0 && pr.c.z(e.price_c) < 3.0);
}

#[test]
fn taxed_simulations_match_in_both_regimes() {
    let p = presets::fig1b();
    let b = Bias::bayesian();
    for regime in [Regime::BothSides, Regime::InformedOnly] {
        let tax = TaxSpec::new(0.1, regime);
        let e = eq(&p, 0.0, &tax);
        let r = simulate_market(&p, &b, &tax, &e, &cfg(2000, 20_000, 5)).unwrap();
        assert!(r.summary.welfare_loss.z(wl_tax_at(&p, &e)) < 3.0, "{regime:?}");
        assert!(r.summary.max_budget_gap < 1e-12);
        for rec in &r.records {
            assert_eq!(rec.welfare_net, rec.welfare - rec.tax_revenue + rec.rebate);
            assert!((rec.welfare_net - rec.welfare).abs() < 1e-12);
        }
    }
}

#[test]
fn posterior_slope_rises_with_overreaction() {
    let p = presets::fig1b();
    let run = |theta: f64| {
        let b = Bias::new(theta);
        let e = eq(&p, theta, &TaxSpec::none());
        let r = simulate_market(&p, &b, &TaxSpec::none(), &e, &cfg(1000, 10_000, 9)).unwrap();
        assert!(r.summary.kappa.z(e.kappa) < 3.0);
        r.summary.kappa.value
    };
    assert!(run(1.0) > run(0.0));
}

#[test]
fn precise_supply_noise_limit() {
    let p = MarketParams::new(3.0, 2.0, 1.0, 5.0, 1e6, 0.0);
    let b = Bias::new(0.5);
    let e = eq(&p, 0.5, &TaxSpec::none());
    let r = simulate_market(&p, &b, &TaxSpec::none(), &e, &cfg(1000, 5000, 2)).unwrap();
    assert!(e.kappa < 1.0);
    assert!(r.summary.kappa.z(e.kappa) < 3.0);
}

#[test]
fn doubling_replications_halves_variance() {
    let p = presets::fig1b();
    let b = Bias::bayesian();
    let e = eq(&p, 0.0, &TaxSpec::none());
    let se = |n| {
        simulate_market(&p, &b, &TaxSpec::none(), &e, &cfg(200, n, 4))
            .unwrap()
            .summary
            .welfare_loss
            .se
    };
    let ratio = (se(4000) / se(8000)).powi(2);
    assert!((ratio - 2.0).abs() < 0.3, "{ratio}");
}
