//! Monte Carlo saturation-MAC simulator and the fixed-transmission-time versus
//! fixed-packet comparison.
//!
//! Each contention period is drawn i.i.d. as idle, collision or success. A
//! success draws a fading gain `h`, transmits for `T` seconds at power `P(h)`
//! and carries `W T log2(1 + P(h) c h / d^eta)` bits. When `P(h) = 0` the
//! reserved channel stays empty for `T` seconds, or for a shorter relinquish
//! overhead if one is configured.
//!
//! Throughput and power are ratio estimators (total bits or joules over total
//! time). Standard errors use the delta method on per-period pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fading::{FadingKind, FadingModel};
use crate::macmodel::MacProfile;
use crate::quad::{integrate_pieces, QuadOptions};
use crate::special::e1_scaled;
use crate::waterfill::{self, WaterfillSolution};

/// Power control applied on successful periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PowerPolicy {
    /// `P(h) = d^eta (1/lambda - 1/(c h))^+`.
    Waterfill { lambda: f64 },
    /// Same power in every state (W).
    Constant { power: f64 },
}

impl PowerPolicy {
    pub fn from_solution(sol: &WaterfillSolution) -> Self {
        PowerPolicy::Waterfill { lambda: sol.lambda }
    }

    fn power(&self, h: f64, c: f64, d_eta: f64) -> f64 {
        match *self {
            PowerPolicy::Waterfill { lambda } => {
                let x = c * h;
                if x > lambda {
                    d_eta * (1.0 / lambda - 1.0 / x)
                } else {
                    0.0
                }
            }
            PowerPolicy::Constant { power } => power,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub profile: MacProfile,
    pub model: FadingModel,
    pub policy: PowerPolicy,
    /// Hop distance (m).
    pub d: f64,
    pub eta: f64,
    /// Number of contention periods.
    pub horizon: u64,
    pub seed: u64,
    /// Channel holding time after a zero-power draw; `None` keeps it for `T`.
    pub relinquish_overhead: Option<f64>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        if !(self.d > 0.0 && self.d.is_finite()) {
            return Err(Error::param(
                "d",
                format!("must be positive, got {}", self.d),
            ));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::param(
                "eta",
                format!("must be positive, got {}", self.eta),
            ));
        }
        if self.horizon < 2 {
            return Err(Error::param("horizon", "need at least 2 periods"));
        }
        if self.horizon < 10_000 {
            log::warn!(
                "horizon {} is below 1e4; confidence intervals may be unreliable",
                self.horizon
            );
        }
        match self.policy {
            PowerPolicy::Waterfill { lambda } if !(lambda > 0.0) => {
                return Err(Error::param(
                    "policy.lambda",
                    format!("must be positive, got {lambda}"),
                ))
            }
            PowerPolicy::Constant { power } if !(power >= 0.0 && power.is_finite()) => {
                return Err(Error::param(
                    "policy.power",
                    format!("must be non-negative, got {power}"),
                ))
            }
            _ => {}
        }
        if let Some(tau) = self.relinquish_overhead {
            if !(0.0..=self.profile.t).contains(&tau) {
                return Err(Error::param(
                    "relinquish_overhead",
                    format!("must lie in [0, T = {}], got {tau}", self.profile.t),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeriodKind {
    Idle,
    Collision,
    Success,
    /// Success in a state that receives no power.
    Silent,
}

impl PeriodKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PeriodKind::Idle => "idle",
            PeriodKind::Collision => "collision",
            PeriodKind::Success => "success",
            PeriodKind::Silent => "silent",
        }
    }
}

/// One simulated contention period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub kind: PeriodKind,
    pub duration_s: f64,
    pub energy_j: f64,
    pub bits: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodCounts {
    pub idle: u64,
    pub collision: u64,
    pub success: u64,
    pub silent: u64,
}

/// Ratio estimate with its delta-method standard error and 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Estimate {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }

    /// Distance from `target` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.std_err == 0.0 {
            if self.value == target {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.value - target).abs() / self.std_err
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    /// Aggregate bit rate (bits/s).
    pub theta_hat: Estimate,
    /// Network average power (W).
    pub power_hat: Estimate,
    pub periods: PeriodCounts,
    pub elapsed_s: f64,
    pub bits: f64,
    pub energy_j: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Accumulator {
    n: u64,
    t: f64,
    b: f64,
    e: f64,
    tt: f64,
    bb: f64,
    ee: f64,
    bt: f64,
    et: f64,
    counts: PeriodCounts,
}

impl Accumulator {
    fn push(&mut self, r: &PeriodRecord) {
        self.n += 1;
        self.t += r.duration_s;
        self.b += r.bits;
        self.e += r.energy_j;
        self.tt += r.duration_s * r.duration_s;
        self.bb += r.bits * r.bits;
        self.ee += r.energy_j * r.energy_j;
        self.bt += r.bits * r.duration_s;
        self.et += r.energy_j * r.duration_s;
        match r.kind {
            PeriodKind::Idle => self.counts.idle += 1,
            PeriodKind::Collision => self.counts.collision += 1,
            PeriodKind::Success => self.counts.success += 1,
            PeriodKind::Silent => self.counts.silent += 1,
        }
    }

    fn merge(mut self, o: &Accumulator) -> Self {
        self.n += o.n;
        self.t += o.t;
        self.b += o.b;
        self.e += o.e;
        self.tt += o.tt;
        self.bb += o.bb;
        self.ee += o.ee;
        self.bt += o.bt;
        self.et += o.et;
        self.counts.idle += o.counts.idle;
        self.counts.collision += o.counts.collision;
        self.counts.success += o.counts.success;
        self.counts.silent += o.counts.silent;
        self
    }

    fn ratio(&self, num: f64, num_sq: f64, cross: f64) -> Estimate {
        let n = self.n as f64;
        let r = num / self.t;
        // sum (y - r t)^2, expanded
        let ss = (num_sq - 2.0 * r * cross + r * r * self.tt).max(0.0);
        let mean_t = self.t / n;
        let se = (ss / (n * (n - 1.0))).sqrt() / mean_t;
        Estimate {
            value: r,
            std_err: se,
            ci_low: r - 1.96 * se,
            ci_high: r + 1.96 * se,
        }
    }

    fn report(&self) -> SimReport {
        SimReport {
            theta_hat: self.ratio(self.b, self.bb, self.bt),
            power_hat: self.ratio(self.e, self.ee, self.et),
            periods: self.counts,
            elapsed_s: self.t,
            bits: self.b,
            energy_j: self.e,
        }
    }
}

fn simulate<F: FnMut(&PeriodRecord)>(
    config: &SimConfig,
    mut rng: ChaCha8Rng,
    mut trace: F,
) -> Accumulator {
    let prof = &config.profile;
    let c = config.model.alpha_over_sigma2();
    let d_eta = config.d.powf(config.eta);
    let gain_scale = c / d_eta;
    let idle_cut = prof.p_i;
    let coll_cut = prof.p_i + prof.p_c;
    let mut acc = Accumulator::default();
    for _ in 0..config.horizon {
        let u: f64 = rng.random();
        let rec = if u < idle_cut {
            PeriodRecord {
                kind: PeriodKind::Idle,
                duration_s: prof.t_i,
                energy_j: prof.e_i,
                bits: 0.0,
            }
        } else if u < coll_cut {
            PeriodRecord {
                kind: PeriodKind::Collision,
                duration_s: prof.t_c,
                energy_j: prof.e_c,
                bits: 0.0,
            }
        } else {
            let h = config.model.sample_h(&mut rng);
            let p = config.policy.power(h, c, d_eta);
            if p > 0.0 {
                PeriodRecord {
                    kind: PeriodKind::Success,
                    duration_s: prof.t_o + prof.t,
                    energy_j: prof.e_o + prof.t * p,
                    bits: prof.w * prof.t * (p * h * gain_scale).ln_1p() / std::f64::consts::LN_2,
                }
            } else {
                PeriodRecord {
                    kind: PeriodKind::Silent,
                    duration_s: prof.t_o + config.relinquish_overhead.unwrap_or(prof.t),
                    energy_j: prof.e_o,
                    bits: 0.0,
                }
            }
        };
        trace(&rec);
        acc.push(&rec);
    }
    acc
}

/// Runs one replication seeded with `config.seed`.
pub fn run(config: &SimConfig) -> Result<SimReport> {
    run_with_trace(config, |_| {})
}

/// Like [`run`], calling `trace` on every period in order.
pub fn run_with_trace<F: FnMut(&PeriodRecord)>(config: &SimConfig, trace: F) -> Result<SimReport> {
    config.validate()?;
    let rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ok(simulate(config, rng, trace).report())
}

/// Runs `replications` independent streams of `horizon` periods each in
/// parallel and pools them. Stream `r` is ChaCha8 seeded with `seed` on
/// stream `r`, so the result does not depend on thread scheduling.
pub fn run_replicated(config: &SimConfig, replications: u64) -> Result<SimReport> {
    config.validate()?;
    if replications == 0 {
        return Err(Error::param(
            "replications",
            "need at least one replication",
        ));
    }
    let parts: Vec<Accumulator> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(r);
            simulate(config, rng, |_| {})
        })
        .collect();
    let total = parts.iter().fold(Accumulator::default(), |a, p| a.merge(p));
    Ok(total.report())
}

/// Analytic renewal-reward values the simulator estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticTargets {
    /// Bits/s.
    pub theta: f64,
    /// W.
    pub power: f64,
    /// `E[ln(1 + P(h) c h / d^eta)]`, nats per unit bandwidth.
    pub mean_rate_nats: f64,
    /// `E[P(h)]` over successful periods.
    pub mean_tx_power: f64,
}

/// `E[ln(1 + g H)]` for constant received-SNR scale `g`.
fn constant_power_rate(model: &FadingModel, g: f64) -> Result<f64> {
    if g == 0.0 {
        return Ok(0.0);
    }
    match model.kind() {
        FadingKind::Exponential { rate } => Ok(e1_scaled(rate / g)),
        FadingKind::DiscreteFinite(s) => Ok(s
            .gains()
            .iter()
            .zip(s.probs())
            .map(|(&h, &a)| a * (g * h).ln_1p())
            .sum()),
        FadingKind::TabulatedDensity(t) => {
            let f = |h: f64| model.pdf_h(h).unwrap_or(0.0) * (g * h).ln_1p();
            Ok(integrate_pieces(f, t.grid(), QuadOptions::tight())?.value)
        }
    }
}

/// Renewal-reward targets for `config`, accounting for the relinquish overhead
/// when one is set.
pub fn analytic_targets(config: &SimConfig) -> Result<AnalyticTargets> {
    config.validate()?;
    let model = &config.model;
    let c = model.alpha_over_sigma2();
    let d_eta = config.d.powf(config.eta);
    let (rate, mean_p, silent_prob) = match config.policy {
        PowerPolicy::Waterfill { lambda } => (
            waterfill::rate_at_multiplier(model, lambda),
            d_eta * waterfill::power_at_multiplier(model, lambda),
            1.0 - model.survival_h(lambda / c),
        ),
        PowerPolicy::Constant { power } => (
            constant_power_rate(model, power * c / d_eta)?,
            power,
            if power > 0.0 { 0.0 } else { 1.0 },
        ),
    };
    let prof = &config.profile;
    let mut denom = prof.mean_period();
    if let Some(tau) = config.relinquish_overhead {
        denom -= prof.p_s * silent_prob * (prof.t - tau);
    }
    let scale = prof.mean_period() / denom;
    Ok(AnalyticTargets {
        theta: prof.throughput(rate) * scale,
        power: prof.network_power(mean_p) * scale,
        mean_rate_nats: rate,
        mean_tx_power: mean_p,
    })
}

fn bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

/// Two-sample comparison of the fixed-packet (FP) and fixed-transmission-time
/// (FTT) schemes at gains `h1 >= h2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FttComparison {
    /// Bits carried by FP (two packets of `L` bits).
    pub l_p: f64,
    /// Bits carried by FTT in the same time with the same energy.
    pub l_t: f64,
    pub energy_j: f64,
    pub total_time_s: f64,
    /// Optimal FTT powers in the two states.
    pub q1: f64,
    pub q2: f64,
}

fn check_gains(h1: f64, h2: f64, p1: f64, p2: f64) -> Result<()> {
    for (name, v) in [("h1", h1), ("h2", h2), ("p1", p1), ("p2", p2)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::param(name, format!("must be positive, got {v}")));
        }
    }
    if h1 < h2 {
        return Err(Error::param(
            "h1",
            format!("need h1 >= h2, got {h1} < {h2}"),
        ));
    }
    Ok(())
}

/// FP sends `L` bits in each state (time `L / (W log2(1 + h P))`); FTT uses
/// the same total time split evenly and the same energy, water-filled.
pub fn compare_ftt_fp(
    h1: f64,
    h2: f64,
    p1: f64,
    p2: f64,
    l_bits: f64,
    w: f64,
) -> Result<FttComparison> {
    check_gains(h1, h2, p1, p2)?;
    if !(l_bits > 0.0 && w > 0.0) {
        return Err(Error::param(
            "l_bits",
            "packet size and bandwidth must be positive",
        ));
    }
    if h1 * p1 < h2 * p2 {
        return Err(Error::OrderingViolation {
            lhs: h1 * p1,
            rhs: h2 * p2,
        });
    }
    let t1 = l_bits / (w * bits((h1 * p1).ln_1p()));
    let t2 = l_bits / (w * bits((h2 * p2).ln_1p()));
    let t_p = t1 + t2;
    let e_p = p1 * t1 + p2 * t2;
    let t = 0.5 * t_p;
    let budget = e_p / t;
    let level = 0.5 * (budget + 1.0 / h1 + 1.0 / h2);
    let (q1, q2) = if level > 1.0 / h2 {
        (level - 1.0 / h1, level - 1.0 / h2)
    } else {
        (budget, 0.0)
    };
    let l_t = t * w * bits((h1 * q1).ln_1p() + (h2 * q2).ln_1p());
    Ok(FttComparison {
        l_p: 2.0 * l_bits,
        l_t,
        energy_j: e_p,
        total_time_s: t_p,
        q1,
        q2,
    })
}

/// The power exchange used to show that `h1 P1 >= h2 P2` is optimal for FP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwapResult {
    pub p1_swapped: f64,
    pub p2_swapped: f64,
    pub time_original: f64,
    pub time_swapped: f64,
    pub energy_original: f64,
    pub energy_swapped: f64,
}

/// For `h1 > h2` and `h1 P1 < h2 P2`, sets `P1' = h2 P2 / h1`,
/// `P2' = h1 P1 / h2`: the two packet durations trade places, so total time
/// is unchanged, while energy strictly drops.
pub fn packet_power_swap(
    h1: f64,
    h2: f64,
    p1: f64,
    p2: f64,
    l_bits: f64,
    w: f64,
) -> Result<SwapResult> {
    check_gains(h1, h2, p1, p2)?;
    if !(h1 * p1 < h2 * p2) {
        return Err(Error::param("p1", "swap applies only when h1 P1 < h2 P2"));
    }
    let dur = |h: f64, p: f64| l_bits / (w * bits((h * p).ln_1p()));
    let p1s = h2 * p2 / h1;
    let p2s = h1 * p1 / h2;
    let (t1, t2) = (dur(h1, p1), dur(h2, p2));
    let (t1s, t2s) = (dur(h1, p1s), dur(h2, p2s));
    Ok(SwapResult {
        p1_swapped: p1s,
        p2_swapped: p2s,
        time_original: t1 + t2,
        time_swapped: t1s + t2s,
        energy_original: p1 * t1 + p2 * t2,
        energy_swapped: p1s * t1s + p2s * t2s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ideal() -> MacProfile {
        MacProfile {
            p_i: 0.0,
            p_c: 0.0,
            p_s: 1.0,
            t_i: 0.0,
            t_c: 0.0,
            t_o: 0.0,
            e_i: 0.0,
            e_c: 0.0,
            e_o: 0.0,
            t: 1.0,
            w: 1.0,
        }
    }

    fn contended() -> MacProfile {
        MacProfile {
            p_i: 0.5,
            p_c: 0.1,
            p_s: 0.4,
            t_i: 1e-5,
            t_c: 1e-4,
            t_o: 1e-4,
            e_i: 2e-6,
            e_c: 3e-5,
            e_o: 4e-5,
            t: 1e-3,
            w: 1e6,
        }
    }

    fn config(
        profile: MacProfile,
        model: FadingModel,
        policy: PowerPolicy,
        horizon: u64,
    ) -> SimConfig {
        SimConfig {
            profile,
            model,
            policy,
            d: 1.0,
            eta: 3.0,
            horizon,
            seed: 42,
            relinquish_overhead: None,
        }
    }

    #[test]
    fn degenerate_run_is_exact() {
        let m = FadingModel::discrete(&[(1.0, 1.0)], 1.0).unwrap();
        let cfg = config(ideal(), m, PowerPolicy::Constant { power: 1.0 }, 1000);
        let r = run(&cfg).unwrap();
        assert!((r.theta_hat.value - 1.0).abs() < 1e-12);
        assert!(r.theta_hat.std_err < 1e-9);
        assert!((r.power_hat.value - 1.0).abs() < 1e-12);
        let a = analytic_targets(&cfg).unwrap();
        assert!((a.theta - 1.0).abs() < 1e-15);
    }

    #[test]
    fn same_seed_same_report() {
        let m = FadingModel::exponential(1.0, 1.0).unwrap();
        let cfg = config(
            contended(),
            m,
            PowerPolicy::Waterfill { lambda: 0.4 },
            20_000,
        );
        let a = serde_json::to_string(&run(&cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&run(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
        let mut other = cfg.clone();
        other.seed = 43;
        assert_ne!(a, serde_json::to_string(&run(&other).unwrap()).unwrap());
    }

    #[test]
    fn estimates_cover_targets() {
        let m = FadingModel::discrete(&[(100.0, 0.01), (0.5, 0.99)], 1.0).unwrap();
        let sol = waterfill::solve(&m, 0.05).unwrap();
        let cfg = config(contended(), m, PowerPolicy::from_solution(&sol), 200_000);
        let r = run(&cfg).unwrap();
        let a = analytic_targets(&cfg).unwrap();
        assert!(r.theta_hat.z_score(a.theta) < 4.0);
        assert!(r.power_hat.z_score(a.power) < 4.0);
        assert!((a.mean_rate_nats - sol.gamma).abs() < 1e-15);
        assert!((a.mean_tx_power - 0.05).abs() < 1e-12);
    }

    #[test]
    fn relinquish_shortens_silent_periods() {
        let m = FadingModel::exponential(1.0, 1.0).unwrap();
        let mut cfg = config(
            contended(),
            m,
            PowerPolicy::Waterfill { lambda: 1.5 },
            200_000,
        );
        cfg.relinquish_overhead = Some(2e-4);
        let r = run(&cfg).unwrap();
        let a = analytic_targets(&cfg).unwrap();
        assert!(r.periods.silent > 0);
        assert!(r.theta_hat.z_score(a.theta) < 4.0);
        assert!(r.power_hat.z_score(a.power) < 4.0);
        cfg.relinquish_overhead = None;
        assert!(analytic_targets(&cfg).unwrap().theta < a.theta);
    }

    #[test]
    fn replicated_pooling_is_deterministic() {
        let m = FadingModel::exponential(2.0, 1.0).unwrap();
        let cfg = config(contended(), m, PowerPolicy::Constant { power: 0.3 }, 20_000);
        let a = run_replicated(&cfg, 8).unwrap();
        let b = run_replicated(&cfg, 8).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.periods.idle + a.periods.collision + a.periods.success + a.periods.silent,
            160_000
        );
        let t = analytic_targets(&cfg).unwrap();
        assert!(a.theta_hat.z_score(t.theta) < 4.0);
    }

    #[test]
    fn constant_power_rate_closed_forms() {
        // E[ln(1 + g H)], H ~ Exp(1), g = 1: e * E1(1)
        let m = FadingModel::exponential(1.0, 1.0).unwrap();
        let v = constant_power_rate(&m, 1.0).unwrap();
        assert!((v - 1f64.exp() * 0.219_383_934_395_520_3).abs() < 1e-14);
        let samples: Vec<(f64, f64)> = (0..4001)
            .map(|i| {
                let h = 20.0 * i as f64 / 4000.0;
                (h, (-h).exp())
            })
            .collect();
        let t = FadingModel::tabulated_normalized(&samples, 1.0).unwrap();
        assert!((constant_power_rate(&t, 1.0).unwrap() - v).abs() < 1e-5);
    }

    #[test]
    fn ftt_symmetric_case_is_equal() {
        let c = compare_ftt_fp(1.3, 1.3, 0.7, 0.7, 1000.0, 1e6).unwrap();
        assert!((c.l_t - c.l_p).abs() < 1e-12 * c.l_p);
    }

    #[test]
    fn ftt_beats_fp() {
        let c = compare_ftt_fp(2.0, 0.5, 1.0, 1.0, 1000.0, 1e6).unwrap();
        assert!(c.l_t > c.l_p);
        assert!((c.q1 + c.q2) * 0.5 * c.total_time_s - c.energy_j < 1e-12 * c.energy_j);
    }

    #[test]
    fn ftt_rejects_misordered_powers() {
        assert!(matches!(
            compare_ftt_fp(2.0, 0.5, 0.1, 1.0, 1000.0, 1e6),
            Err(Error::OrderingViolation { .. })
        ));
    }

    #[test]
    fn swap_keeps_time_and_saves_energy() {
        let s = packet_power_swap(2.0, 0.5, 0.1, 1.0, 1000.0, 1e6).unwrap();
        assert!((s.time_swapped - s.time_original).abs() < 1e-12 * s.time_original);
        assert!(s.energy_swapped < s.energy_original);
    }
}
