//! Closed-form water-filling for finite discrete fading.
//!
//! States are ordered `x_1 > x_2 > ... > x_n`. With `p_k = a_1 + ... + a_k`
//! and `alpha_k = a_1/x_1 + ... + a_k/x_k`, the top `k` states are active on
//! `Pi_{k-1} < Pi <= Pi_k`, where
//!
//! ```text
//! lambda(Pi) = p_k / (alpha_k + Pi)
//! Pi_k       = p_k / x_{k+1} - alpha_k
//! Gamma(Pi)  = p_k ln((alpha_k + Pi) gamma_k)
//! ```
//!
//! and the constants `gamma_k` are fixed by continuity at the breakpoints.
//! Everything is kept in log space: `b_k = ln(alpha_k gamma_k)` lets
//! `Gamma = p_k (b_k + ln(1 + Pi/alpha_k))` be evaluated without cancellation.

use serde::{Deserialize, Serialize};

use crate::error::{Boundary, Error, Result};
use crate::fading::FadingModel;
use crate::hopopt::{select_maximizer, StationaryPoint, StationarySet};
use crate::roots::brent;

/// Precomputed constants of the piecewise closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteWaterfillTable {
    x: Vec<f64>,
    p: Vec<f64>,
    alpha_k: Vec<f64>,
    pi_breaks: Vec<f64>,
    ln_gamma: Vec<f64>,
    b: Vec<f64>,
}

impl DiscreteWaterfillTable {
    /// Builds the table from a discrete model (received-SNR states `x = c h`).
    pub fn build(model: &FadingModel) -> Result<Self> {
        let states = model.discrete_x_states().ok_or(Error::NotDiscrete)?;
        let n = states.len();
        let x: Vec<f64> = states.iter().map(|s| s.0).collect();
        let mut p = Vec::with_capacity(n);
        let mut alpha_k = Vec::with_capacity(n);
        let (mut ps, mut als) = (0.0, 0.0);
        for &(xi, ai) in &states {
            ps += ai;
            als += ai / xi;
            p.push(ps);
            alpha_k.push(als);
        }
        let pi_breaks: Vec<f64> = (0..n.saturating_sub(1))
            .map(|k| p[k] / x[k + 1] - alpha_k[k])
            .collect();

        let mut ln_gamma = Vec::with_capacity(n);
        ln_gamma.push(-alpha_k[0].ln());
        for k in 1..n {
            let brk = pi_breaks[k - 1];
            let prev = (alpha_k[k - 1] + brk).ln() + ln_gamma[k - 1];
            ln_gamma.push(p[k - 1] / p[k] * prev - (alpha_k[k] + brk).ln());
        }
        let mut b: Vec<f64> = alpha_k
            .iter()
            .zip(&ln_gamma)
            .map(|(a, g)| a.ln() + g)
            .collect();
        b[0] = 0.0;

        Ok(Self {
            x,
            p,
            alpha_k,
            pi_breaks,
            ln_gamma,
            b,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Cumulative probabilities `p_k`.
    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn alpha_k(&self) -> &[f64] {
        &self.alpha_k
    }

    /// Breakpoints `Pi_1 < ... < Pi_{n-1}`.
    pub fn pi_breaks(&self) -> &[f64] {
        &self.pi_breaks
    }

    /// Integration constants `gamma_k` (may overflow for extreme models; see
    /// [`Self::ln_gamma_consts`]).
    pub fn gamma_consts(&self) -> Vec<f64> {
        self.ln_gamma.iter().map(|g| g.exp()).collect()
    }

    pub fn ln_gamma_consts(&self) -> &[f64] {
        &self.ln_gamma
    }

    /// `b_k = ln(alpha_k gamma_k)`; `b_1 = 0`.
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Zero-based segment index `k - 1` containing `pi` (`Pi_{k-1} < pi <= Pi_k`).
    pub fn segment(&self, pi: f64) -> usize {
        self.pi_breaks.partition_point(|&brk| brk < pi)
    }

    pub fn lambda(&self, pi: f64) -> f64 {
        let k = self.segment(pi);
        self.p[k] / (self.alpha_k[k] + pi)
    }

    /// `Gamma(Pi)` in nats.
    pub fn gamma_pi(&self, pi: f64) -> f64 {
        if pi <= 0.0 {
            return 0.0;
        }
        let k = self.segment(pi);
        self.p[k] * (self.b[k] + (pi / self.alpha_k[k]).ln_1p())
    }

    /// Hop-distance breakpoints `d_k = (P't / Pi_k)^(1/eta)`, decreasing in `k`.
    pub fn hop_breaks(&self, eta: f64, pt_prime: f64) -> Vec<f64> {
        self.pi_breaks
            .iter()
            .map(|brk| (pt_prime / brk).powf(1.0 / eta))
            .collect()
    }

    /// Zero-based segment for hop distance `d` (`d_k <= d < d_{k-1}`).
    fn segment_for_d(&self, d: f64, eta: f64, pt_prime: f64) -> usize {
        self.hop_breaks(eta, pt_prime)
            .iter()
            .take_while(|&&dk| dk > d)
            .count()
    }

    /// `Gamma(d)` for `Pi = P't / d^eta`, with the segment picked by the `d_k`.
    pub fn gamma_closed_form(&self, d: f64, eta: f64, pt_prime: f64) -> f64 {
        let k = self.segment_for_d(d, eta, pt_prime);
        let pi = pt_prime / d.powf(eta);
        self.p[k] * (self.b[k] + (pi / self.alpha_k[k]).ln_1p())
    }

    /// `dGamma/dd = -(eta p_k P't) / (d (alpha_k d^eta + P't))`.
    pub fn derivative(&self, d: f64, eta: f64, pt_prime: f64) -> f64 {
        let k = self.segment_for_d(d, eta, pt_prime);
        -eta * self.p[k] * pt_prime / (d * (self.alpha_k[k] * d.powf(eta) + pt_prime))
    }

    /// Roots of the stationary equation `ln y - eta y = b_k - eta` per segment.
    pub fn stationary_points(&self, eta: f64, pt_prime: f64) -> Result<StationarySet> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::param("eta", format!("must be positive, got {eta}")));
        }
        if !(pt_prime > 0.0 && pt_prime.is_finite()) {
            return Err(Error::param(
                "pt_prime",
                format!("must be positive, got {pt_prime}"),
            ));
        }
        let n = self.len();
        let mut points = Vec::new();
        for k in 0..n {
            let alpha = self.alpha_k[k];
            // t = ln y; segment k covers t in [t_lo, t_hi)
            let t_hi = if k == 0 {
                0.0
            } else {
                -(self.pi_breaks[k - 1] / alpha).ln_1p()
            };
            let t_lo = if k + 1 == n {
                f64::NEG_INFINITY
            } else {
                -(self.pi_breaks[k] / alpha).ln_1p()
            };
            for t in segment_roots(self.b[k] - eta, eta, t_lo, t_hi)? {
                let y = t.exp();
                let pi = alpha * (-t).exp_m1();
                let d = (pt_prime / pi).powf(1.0 / eta);
                let gamma = self.p[k] * (self.b[k] - t);
                points.push(StationaryPoint {
                    d,
                    pi,
                    lambda: self.p[k] * y / alpha,
                    gamma,
                    psi: d * gamma,
                    segment: Some(k + 1),
                });
            }
        }
        debug_assert!(
            points.len() < 2 * n,
            "{} stationary points for {n} states",
            points.len()
        );
        points.sort_by(|a, b| a.d.total_cmp(&b.d));

        let d_scale: Vec<f64> = self
            .hop_breaks(eta, pt_prime)
            .into_iter()
            .chain(points.iter().map(|p| p.d))
            .collect();
        let d_max = d_scale.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
        let d_min = d_scale.iter().cloned().fold(f64::MAX, f64::min).min(d_max);
        let psi_at = |d: f64| d * self.gamma_closed_form(d, eta, pt_prime);
        let psi_zero = psi_at(1e-6 * d_min);
        let psi_inf = psi_at(1e6 * d_max);
        if points.is_empty() {
            let side = if psi_inf > psi_zero {
                Boundary::Infinity
            } else {
                Boundary::Zero
            };
            return Err(Error::NoStationaryPoint(side));
        }
        let maximizer = select_maximizer(&points, psi_zero, psi_inf);
        Ok(StationarySet {
            points,
            maximizer,
            unique: n == 1,
        })
    }
}

/// Roots of `F(t) = t - eta e^t - c` on `[t_lo, t_hi)`; `F` peaks at `t = -ln eta`.
fn segment_roots(c: f64, eta: f64, t_lo: f64, t_hi: f64) -> Result<Vec<f64>> {
    let f = |t: f64| t - eta * t.exp() - c;
    let t_peak = -eta.ln();
    let mut roots = Vec::with_capacity(2);

    // rising branch [t_lo, min(t_peak, t_hi)]
    let a_hi = t_peak.min(t_hi);
    if t_lo <= a_hi {
        // F < c' - 1 at t = c - 1 for any eta > 0, so it bounds the open end
        let a_lo = if t_lo.is_finite() {
            t_lo
        } else {
            (c - 1.0).min(a_hi)
        };
        if let Some(t) = branch_root(&f, a_lo, a_hi)? {
            if t < t_hi {
                roots.push(t);
            }
        }
    }
    // falling branch [max(t_peak, t_lo), t_hi]
    let b_lo = t_peak.max(t_lo);
    if b_lo < t_hi {
        if let Some(t) = branch_root(&f, b_lo, t_hi)? {
            let dup = roots.last().is_some_and(|&r| r == t);
            if t < t_hi && !dup {
                roots.push(t);
            }
        }
    }
    Ok(roots)
}

fn branch_root<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<Option<f64>> {
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(Some(a));
    }
    if fb == 0.0 {
        return Ok(Some(b));
    }
    if fa.signum() == fb.signum() {
        return Ok(None);
    }
    brent(f, a, b, 1e-15, 4.0 * f64::EPSILON, 200).map(Some)
}
