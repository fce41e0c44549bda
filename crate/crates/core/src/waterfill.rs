//! Water-filling power allocation for a fixed normalized power level.
//!
//! For `pi = P't / d^eta` the optimal per-state normalized power is
//! `xi(x) = (1/lambda - 1/x)^+`, where the multiplier `lambda` makes the
//! average power constraint tight:
//!
//! ```text
//! pi(lambda)    = E[(1/lambda - 1/X)^+]
//! Gamma(lambda) = E[ln(X / lambda)^+]      (nats per unit bandwidth)
//! ```
//!
//! `pi(lambda)` is continuous and strictly decreasing on the support, so the
//! multiplier is found by bracketing plus Brent iteration. Rates are kept in
//! nats; conversion to bits happens at presentation time.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fading::{FadingKind, FadingModel};
use crate::roots::brent;
use crate::special::{e1, e1_scaled};

const LAMBDA_MIN: f64 = 1e-30;
const LAMBDA_MAX: f64 = 1e30;

/// Water-filling optimum for one normalized power level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaterfillSolution {
    pub pi: f64,
    /// Lagrange multiplier; `+inf` for the degenerate `pi = 0` solution.
    pub lambda: f64,
    /// Optimal mean rate `Gamma(pi)` in nats per unit bandwidth.
    pub gamma: f64,
}

impl WaterfillSolution {
    /// Normalized power `xi(x)` assigned to received SNR state `x`.
    pub fn allocation(&self, x: f64) -> f64 {
        if x <= self.lambda {
            0.0
        } else {
            1.0 / self.lambda - 1.0 / x
        }
    }

    /// Water level `1 / lambda`.
    pub fn water_level(&self) -> f64 {
        1.0 / self.lambda
    }

    /// Smallest received SNR state that is allocated power.
    pub fn cutoff_x(&self) -> f64 {
        self.lambda
    }
}

/// Average normalized power `E[(1/lambda - 1/X)^+]` spent at multiplier `lambda`.
pub fn power_at_multiplier(model: &FadingModel, lambda: f64) -> f64 {
    if lambda.is_infinite() {
        return 0.0;
    }
    let c = model.alpha_over_sigma2();
    match model.kind() {
        FadingKind::DiscreteFinite(states) => states
            .gains()
            .iter()
            .zip(states.probs())
            .map(|(&h, &a)| {
                let x = c * h;
                if x > lambda {
                    a * (x - lambda) / (lambda * x)
                } else {
                    0.0
                }
            })
            .sum(),
        FadingKind::Exponential { rate } => {
            let nu = rate / c;
            let z = nu * lambda;
            if z <= 1.0 {
                (-z).exp() / lambda - nu * e1(z)
            } else {
                nu * (-z).exp() * (1.0 / z - e1_scaled(z))
            }
        }
        FadingKind::TabulatedDensity(t) => {
            let m = t.upper_moments(lambda / c);
            // E[1/X; X > lambda] = E[1/H; H > lambda/c] / c
            (m.mass / lambda - m.inv / c).max(0.0)
        }
    }
}

/// Mean rate `E[ln(X / lambda)^+]` (nats) at multiplier `lambda`.
pub fn rate_at_multiplier(model: &FadingModel, lambda: f64) -> f64 {
    if lambda.is_infinite() {
        return 0.0;
    }
    let c = model.alpha_over_sigma2();
    match model.kind() {
        FadingKind::DiscreteFinite(states) => states
            .gains()
            .iter()
            .zip(states.probs())
            .map(|(&h, &a)| {
                let x = c * h;
                if x > lambda {
                    a * ((x - lambda) / lambda).ln_1p()
                } else {
                    0.0
                }
            })
            .sum(),
        FadingKind::Exponential { rate } => e1(rate / c * lambda),
        FadingKind::TabulatedDensity(t) => {
            let m = t.upper_moments(lambda / c);
            // E[ln X; X > lambda] = ln(c) P + E[ln H; H > lambda / c]
            (m.log + (c / lambda).ln() * m.mass).max(0.0)
        }
    }
}

fn bracket_failure(pi: f64) -> Error {
    Error::BracketFailure { pi }
}

/// Multiplier `lambda(pi)` for `pi > 0`.
fn solve_multiplier(model: &FadingModel, pi: f64) -> Result<f64> {
    let excess = |l: f64| power_at_multiplier(model, l) - pi;
    let upper = LAMBDA_MAX.min(model.x_support_max());
    let mean_x = model.mean_x();
    let guess = if mean_x.is_finite() && mean_x > 0.0 {
        1.0 / (pi + 1.0 / mean_x)
    } else {
        1.0 / pi
    };
    let guess = guess.clamp(LAMBDA_MIN, upper);

    let mut lo = guess;
    while excess(lo) <= 0.0 {
        if lo <= LAMBDA_MIN {
            return Err(bracket_failure(pi));
        }
        lo = (lo / 10.0).max(LAMBDA_MIN);
    }
    let mut hi = guess;
    while excess(hi) >= 0.0 {
        if hi >= upper {
            return Err(bracket_failure(pi));
        }
        hi = (hi * 10.0).min(upper);
    }
    while hi / lo > 2.0 {
        let mid = (lo * hi).sqrt();
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    brent(excess, lo, hi, 0.0, 4.0 * f64::EPSILON, 200)
}

/// Solves the water-filling problem at normalized power `pi > 0`.
pub fn solve(model: &FadingModel, pi: f64) -> Result<WaterfillSolution> {
    if !(pi > 0.0) || !pi.is_finite() {
        return Err(Error::NonPositivePi(pi));
    }
    let lambda = solve_multiplier(model, pi)?;
    if let Some(states) = model.discrete_x_states() {
        if let Some(sol) = refine_discrete(&states, pi, lambda) {
            return Ok(sol);
        }
    }
    Ok(WaterfillSolution {
        pi,
        lambda,
        gamma: rate_at_multiplier(model, lambda),
    })
}

/// With the active set `S = {x > lambda}` fixed, `lambda = P / (pi + A)` where
/// `P = sum_S a` and `A = sum_S a / x`. The rate is summed as
/// `a ln1p((x (pi + A) - P) / P)` with the numerator expanded term by term,
/// which keeps full relative accuracy when `x pi` is tiny.
fn refine_discrete(states: &[(f64, f64)], pi: f64, lambda: f64) -> Option<WaterfillSolution> {
    let active: Vec<(f64, f64)> = states
        .iter()
        .copied()
        .filter(|&(x, _)| x > lambda)
        .collect();
    if active.is_empty() {
        return None;
    }
    let p: f64 = active.iter().map(|&(_, a)| a).sum();
    let inv: f64 = active.iter().map(|&(x, a)| a / x).sum();
    let refined = p / (pi + inv);
    let consistent = states.iter().all(|&(x, _)| (x > lambda) == (x > refined));
    if !consistent {
        return None;
    }
    let gamma = active
        .iter()
        .map(|&(x, a)| {
            let excess = x * pi
                + active
                    .iter()
                    .map(|&(xj, aj)| aj * (x - xj) / xj)
                    .sum::<f64>();
            a * (excess / p).ln_1p()
        })
        .sum();
    Some(WaterfillSolution {
        pi,
        lambda: refined,
        gamma,
    })
}

/// Like [`solve`] but maps `pi = 0` to the limit point (`lambda = inf`,
/// `Gamma = 0`), which sweeps towards `d -> inf` need.
pub(crate) fn solve_allow_zero(model: &FadingModel, pi: f64) -> Result<WaterfillSolution> {
    if pi == 0.0 {
        return Ok(WaterfillSolution {
            pi,
            lambda: f64::INFINITY,
            gamma: 0.0,
        });
    }
    solve(model, pi)
}

/// `dGamma/dpi`, which equals the multiplier by the envelope theorem.
pub fn gamma_derivative(model: &FadingModel, pi: f64) -> Result<f64> {
    Ok(solve(model, pi)?.lambda)
}

/// Physical transmit power for gain `h` at hop distance `d`:
/// `P(h) = d^eta * (1/lambda - 1/(c h))^+`.
pub fn power_allocation_physical(
    sol: &WaterfillSolution,
    d: f64,
    eta: f64,
    h: f64,
    alpha_over_sigma2: f64,
) -> f64 {
    d.powf(eta) * sol.allocation(alpha_over_sigma2 * h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_state() -> FadingModel {
        FadingModel::discrete(&[(1.0, 1.0)], 1.0).unwrap()
    }

    fn bimodal() -> FadingModel {
        FadingModel::discrete(&[(100.0, 0.01), (0.5, 0.99)], 1.0).unwrap()
    }

    fn unit_exponential() -> FadingModel {
        FadingModel::exponential(1.0, 1.0).unwrap()
    }

    /// Independent oracle: trapezoid rule on [lambda, 60] with 1e6 points and
    /// bisection on lambda.
    fn trapezoid_oracle(pi: f64) -> (f64, f64) {
        let n = 1_000_000;
        let power = |l: f64| {
            let step = (60.0 - l) / n as f64;
            let mut acc = 0.0;
            for i in 0..=n {
                let x = l + step * i as f64;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                acc += w * (1.0 / l - 1.0 / x) * (-x).exp();
            }
            acc * step
        };
        let (mut lo, mut hi) = (1e-6, 50.0);
        while (hi - lo) / lo > 1e-12 {
            let mid = 0.5 * (lo + hi);
            if power(mid) > pi {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let l = 0.5 * (lo + hi);
        let step = (60.0 - l) / n as f64;
        let mut gamma = 0.0;
        for i in 0..=n {
            let x = l + step * i as f64;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            gamma += w * (x / l).ln() * (-x).exp();
        }
        (l, gamma * step)
    }

    #[test]
    fn single_state_closed_form() {
        let sol = solve(&single_state(), 1.0).unwrap();
        assert!((sol.lambda - 0.5).abs() < 1e-15);
        assert!((sol.gamma - 2f64.ln()).abs() < 1e-15);
        assert!((gamma_derivative(&single_state(), 1.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exponential_matches_trapezoid_oracle() {
        // trapezoid_oracle(1.0) gives (0.393773844748618, 0.712928856209); the
        // frozen values below come from a 30-digit root of e^-l/l - E1(l) = 1
        let sol = solve(&unit_exponential(), 1.0).unwrap();
        let (l_ref, g_ref) = (0.393_773_845_045_118_36_f64, 0.712_928_856_209_078_1_f64);
        assert!((sol.lambda - l_ref).abs() / l_ref < 1e-12, "{}", sol.lambda);
        assert!((sol.gamma - g_ref).abs() / g_ref < 1e-12, "{}", sol.gamma);
        assert!((sol.lambda - 0.393_773_844_748_618).abs() / l_ref < 1e-9);
        assert!((sol.gamma - 0.712_928_856_209).abs() / g_ref < 1e-9);
    }

    #[test]
    #[ignore = "slow oracle; run to regenerate frozen values"]
    fn regenerate_trapezoid_oracle() {
        let (l, g) = trapezoid_oracle(1.0);
        println!("lambda = {l:.15}, gamma = {g:.12}");
    }

    #[test]
    fn continuity_across_discrete_breakpoint() {
        let m = bimodal();
        let pi1 = 0.0199;
        let lo = solve(&m, pi1 * (1.0 - 1e-6)).unwrap();
        let hi = solve(&m, pi1 * (1.0 + 1e-6)).unwrap();
        assert!((lo.lambda - hi.lambda).abs() / lo.lambda < 1e-4);
    }

    #[test]
    fn envelope_derivative_matches_finite_difference() {
        let h = 1e-5;
        for (m, pi) in [(unit_exponential(), 1.0), (bimodal(), 0.01)] {
            let fd =
                (solve(&m, pi + h).unwrap().gamma - solve(&m, pi - h).unwrap().gamma) / (2.0 * h);
            let lam = gamma_derivative(&m, pi).unwrap();
            assert!((fd - lam).abs() / lam < 1e-5, "fd {fd} vs lambda {lam}");
        }
    }

    #[test]
    fn physical_allocation() {
        let sol = WaterfillSolution {
            pi: 1.0,
            lambda: 0.5,
            gamma: 0.0,
        };
        assert_eq!(power_allocation_physical(&sol, 1.0, 3.0, 0.5, 1.0), 0.0);
        assert!((power_allocation_physical(&sol, 1.0, 3.0, 1.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((power_allocation_physical(&sol, 2.0, 3.0, 1.0, 1.0) - 8.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_positive_pi() {
        assert_eq!(solve(&bimodal(), 0.0), Err(Error::NonPositivePi(0.0)));
        assert!(solve(&bimodal(), -1.0).is_err());
        let zero = solve_allow_zero(&bimodal(), 0.0).unwrap();
        assert!(zero.lambda.is_infinite() && zero.gamma == 0.0);
    }

    #[test]
    fn constraint_binds_and_kkt_holds() {
        let models = [
            unit_exponential(),
            bimodal(),
            FadingModel::exponential(0.3, 4.0).unwrap(),
        ];
        for m in &models {
            for &pi in &[1e-3, 0.05, 1.0, 30.0, 1e3] {
                let sol = solve(m, pi).unwrap();
                let used = power_at_multiplier(m, sol.lambda);
                assert!((used - pi).abs() / pi < 1e-7);
                for k in 1..100 {
                    let x = sol.lambda * (1.0 + 0.05 * k as f64);
                    let xi = sol.allocation(x);
                    assert!(xi > 0.0);
                    assert!((x / (1.0 + x * xi) - sol.lambda).abs() <= 1e-12 * sol.lambda);
                }
                assert_eq!(sol.allocation(sol.lambda), 0.0);
                assert_eq!(sol.allocation(0.5 * sol.lambda), 0.0);
            }
        }
    }
}
