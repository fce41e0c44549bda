mod common;

use hopcap::simulator::{self, PowerPolicy, SimConfig};
use hopcap::{waterfill, FadingModel, MacProfile};

fn profile() -> MacProfile {
    MacProfile {
        p_i: 0.3,
        p_c: 0.2,
        p_s: 0.5,
        t_i: 2e-5,
        t_c: 2e-4,
        t_o: 1e-4,
        e_i: 1e-6,
        e_c: 5e-5,
        e_o: 2e-5,
        t: 1e-3,
        w: 1e6,
    }
}

fn config(model: FadingModel, horizon: u64, seed: u64) -> SimConfig {
    let lambda = waterfill::solve(&model, 0.5).unwrap().lambda;
    SimConfig {
        profile: profile(),
        model,
        policy: PowerPolicy::Waterfill { lambda },
        d: 1.0,
        eta: 3.0,
        horizon,
        seed,
        relinquish_overhead: None,
    }
}

#[test]
fn interval_narrows_as_root_horizon() {
    let model = FadingModel::exponential(1.0, 1.0).unwrap();
    let short = simulator::run(&config(model.clone(), 40_000, 11)).unwrap();
    let long = simulator::run(&config(model, 160_000, 11)).unwrap();
    let ratio = short.theta_hat.half_width() / long.theta_hat.half_width();
    assert!((1.7..2.3).contains(&ratio), "half-width ratio {ratio}");
}

#[test]
fn estimates_cover_the_target() {
    let cfg = config(common::bimodal(0.01), 10_000, 0);
    let target = simulator::analytic_targets(&cfg).unwrap();
    let hits = (0..100)
        .filter(|&seed| {
            let r = simulator::run(&SimConfig {
                seed,
                ..cfg.clone()
            })
            .unwrap();
            r.theta_hat.z_score(target.theta).abs() <= 2.0
        })
        .count();
    assert!(hits >= 90, "{hits} of 100 runs within 2 standard errors");
}

#[test]
fn relinquishing_bad_channels_matches_targets() {
    let mut cfg = config(common::bimodal(0.3), 200_000, 5);
    cfg.relinquish_overhead = Some(1e-4);
    let target = simulator::analytic_targets(&cfg).unwrap();
    let r = simulator::run(&cfg).unwrap();
    assert!(r.periods.silent > 0);
    assert!(r.theta_hat.z_score(target.theta).abs() < 4.0);
    assert!(r.power_hat.z_score(target.power).abs() < 4.0);
}

#[test]
fn replications_pool_deterministically() {
    let cfg = config(FadingModel::exponential(2.0, 1.0).unwrap(), 20_000, 3);
    let a = simulator::run_replicated(&cfg, 4).unwrap();
    let b = simulator::run_replicated(&cfg, 4).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    assert_eq!(
        a.periods.idle + a.periods.collision + a.periods.success + a.periods.silent,
        80_000
    );
}
