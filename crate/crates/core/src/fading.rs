//! Fading-gain distributions and the change of variables used by the
//! optimizer.
//!
//! A model describes the marginal power gain `H` together with the composite
//! constant `c = alpha / sigma^2`. Everything downstream works with the
//! received-SNR variable `X = c H` (density `f`) or its reciprocal `Z = 1 / X`
//! (density `g(z) = f(1/z) / z^2`).

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite set of fading states, sorted by strictly decreasing gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteStates {
    gains: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteStates {
    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }
}

/// Piecewise-linear density on a grid; zero outside `[h_0, h_n]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedDensity {
    h: Vec<f64>,
    a: Vec<f64>,
    /// trapezoid mass of each grid segment
    seg_mass: Vec<f64>,
    /// `cdf[j]` = mass below `h[j]`
    cdf: Vec<f64>,
    /// `tail[j]` = mass above `h[j]`, summed from the top for accuracy
    tail: Vec<f64>,
    /// `tail_inv[j]` = integral of `a(h) / h` above `h[j]`
    tail_inv: Vec<f64>,
    /// `tail_log[j]` = integral of `a(h) ln h` above `h[j]`
    tail_log: Vec<f64>,
}

/// Mass, inverse moment and log moment of a linear density piece on `[u, v]`
/// with value `au` at `u` and `av` at `v`.
fn linear_piece_moments(u: f64, v: f64, au: f64, av: f64) -> (f64, f64, f64) {
    let w = v - u;
    let slope = (av - au) / w;
    let mass = 0.5 * (au + av) * w;
    // density = intercept + slope * t
    let intercept = au - slope * u;
    let inv = if u > 0.0 {
        slope * w + intercept * (w / u).ln_1p()
    } else if intercept == 0.0 {
        slope * w
    } else {
        f64::INFINITY
    };
    let xlogx = |t: f64| if t > 0.0 { t * t.ln() } else { 0.0 };
    let x2logx = |t: f64| if t > 0.0 { t * t * t.ln() } else { 0.0 };
    let log = intercept * (xlogx(v) - xlogx(u) - w)
        + slope * (0.5 * (x2logx(v) - x2logx(u)) - 0.25 * (v * v - u * u));
    (mass, inv, log)
}

/// Moments of a distribution restricted to an upper tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct TailMoments {
    pub mass: f64,
    pub inv: f64,
    pub log: f64,
}

impl TabulatedDensity {
    fn new(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidModel(
                "tabulated density needs at least two grid points".into(),
            ));
        }
        let (h, a): (Vec<f64>, Vec<f64>) = samples.iter().copied().unzip();
        for (i, (&hi, &ai)) in h.iter().zip(&a).enumerate() {
            if !hi.is_finite() || hi < 0.0 {
                return Err(Error::InvalidModel(format!(
                    "grid point {i}: gain {hi} must be finite and non-negative"
                )));
            }
            if !ai.is_finite() || ai < 0.0 {
                return Err(Error::InvalidModel(format!(
                    "grid point {i}: density {ai} must be finite and non-negative"
                )));
            }
            if i > 0 && hi <= h[i - 1] {
                return Err(Error::InvalidModel(format!(
                    "grid point {i}: gains must be strictly increasing ({} then {hi})",
                    h[i - 1]
                )));
            }
        }
        let seg_mass: Vec<f64> = (0..h.len() - 1)
            .map(|j| 0.5 * (a[j] + a[j + 1]) * (h[j + 1] - h[j]))
            .collect();
        let mut cdf = vec![0.0; h.len()];
        for j in 0..seg_mass.len() {
            cdf[j + 1] = cdf[j] + seg_mass[j];
        }
        let mut tail = vec![0.0; h.len()];
        let mut tail_inv = vec![0.0; h.len()];
        let mut tail_log = vec![0.0; h.len()];
        for j in (0..seg_mass.len()).rev() {
            let (_, inv, log) = linear_piece_moments(h[j], h[j + 1], a[j], a[j + 1]);
            tail[j] = tail[j + 1] + seg_mass[j];
            tail_inv[j] = tail_inv[j + 1] + inv;
            tail_log[j] = tail_log[j + 1] + log;
        }
        Ok(Self {
            h,
            a,
            seg_mass,
            cdf,
            tail,
            tail_inv,
            tail_log,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.h
    }

    pub fn values(&self) -> &[f64] {
        &self.a
    }

    pub fn total_mass(&self) -> f64 {
        self.cdf[self.cdf.len() - 1]
    }

    /// Index `j` of the segment `[h_j, h_{j+1})` containing `h`, if any.
    fn segment(&self, h: f64) -> Option<usize> {
        let n = self.h.len();
        if !(h >= self.h[0] && h <= self.h[n - 1]) {
            return None;
        }
        let j = self.h.partition_point(|&g| g <= h);
        Some(j.saturating_sub(1).min(n - 2))
    }

    fn density(&self, h: f64) -> f64 {
        match self.segment(h) {
            None => 0.0,
            Some(j) => {
                let t = (h - self.h[j]) / (self.h[j + 1] - self.h[j]);
                self.a[j] + t * (self.a[j + 1] - self.a[j])
            }
        }
    }

    /// Mass of segment `j` above `h` (with `h` inside the segment).
    fn partial_upper(&self, j: usize, h: f64) -> f64 {
        let (h0, h1) = (self.h[j], self.h[j + 1]);
        let (a0, a1) = (self.a[j], self.a[j + 1]);
        let ah = a0 + (h - h0) / (h1 - h0) * (a1 - a0);
        0.5 * (ah + a1) * (h1 - h)
    }

    /// Moments of the density restricted to `(h, inf)`.
    pub(crate) fn upper_moments(&self, h: f64) -> TailMoments {
        let n = self.h.len();
        if h < self.h[0] {
            return TailMoments {
                mass: self.tail[0],
                inv: self.tail_inv[0],
                log: self.tail_log[0],
            };
        }
        if h >= self.h[n - 1] {
            return TailMoments {
                mass: 0.0,
                inv: 0.0,
                log: 0.0,
            };
        }
        let j = self.segment(h).expect("inside grid");
        let (m, inv, log) = linear_piece_moments(h, self.h[j + 1], self.density(h), self.a[j + 1]);
        TailMoments {
            mass: m + self.tail[j + 1],
            inv: inv + self.tail_inv[j + 1],
            log: log + self.tail_log[j + 1],
        }
    }

    fn survival(&self, h: f64) -> f64 {
        let n = self.h.len();
        if h < self.h[0] {
            return self.tail[0];
        }
        if h >= self.h[n - 1] {
            return 0.0;
        }
        let j = self.segment(h).expect("inside grid");
        self.partial_upper(j, h) + self.tail[j + 1]
    }

    fn quantile(&self, p: f64) -> f64 {
        let target = p.clamp(0.0, 1.0) * self.total_mass();
        let n = self.h.len();
        let j = self
            .cdf
            .partition_point(|&c| c <= target)
            .saturating_sub(1)
            .min(n - 2);
        let m = (target - self.cdf[j]).max(0.0);
        let width = self.h[j + 1] - self.h[j];
        let a0 = self.a[j];
        let slope = (self.a[j + 1] - a0) / width;
        // solve a0 t + slope t^2 / 2 = m in the stable form
        let disc = (a0 * a0 + 2.0 * slope * m).max(0.0);
        let denom = a0 + disc.sqrt();
        let t = if denom > 0.0 { 2.0 * m / denom } else { 0.0 };
        (self.h[j] + t.clamp(0.0, width)).min(self.h[j + 1])
    }

    fn mean(&self) -> f64 {
        let mut total = 0.0;
        for j in 0..self.h.len() - 1 {
            let (u, v) = (self.h[j], self.h[j + 1]);
            let (au, av) = (self.a[j], self.a[j + 1]);
            // exact integral of h * (linear density) over [u, v]
            total += (v - u) * (au * (2.0 * u + v) + av * (u + 2.0 * v)) / 6.0;
        }
        total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FadingKind {
    /// `a(h) = rate * exp(-rate * h)`: Rayleigh amplitude, exponential power.
    Exponential {
        rate: f64,
    },
    DiscreteFinite(DiscreteStates),
    TabulatedDensity(TabulatedDensity),
}

/// A fading distribution together with the gain-to-noise constant `alpha / sigma^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadingModel {
    kind: FadingKind,
    alpha_over_sigma2: f64,
}

fn check_scale(c: f64) -> Result<()> {
    if c.is_finite() && c > 0.0 {
        Ok(())
    } else {
        Err(Error::param(
            "alpha_over_sigma2",
            format!("must be finite and positive, got {c}"),
        ))
    }
}

impl FadingModel {
    pub fn exponential(rate: f64, alpha_over_sigma2: f64) -> Result<Self> {
        check_scale(alpha_over_sigma2)?;
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidModel(format!(
                "exponential rate must be positive, got {rate}"
            )));
        }
        Ok(Self {
            kind: FadingKind::Exponential { rate },
            alpha_over_sigma2,
        })
    }

    /// Builds a finite discrete model from `(gain, probability)` pairs. Pairs
    /// may arrive in any order; equal gains are rejected.
    pub fn discrete(states: &[(f64, f64)], alpha_over_sigma2: f64) -> Result<Self> {
        check_scale(alpha_over_sigma2)?;
        if states.is_empty() {
            return Err(Error::InvalidModel(
                "discrete model needs at least one state".into(),
            ));
        }
        let mut sorted = states.to_vec();
        for &(h, a) in &sorted {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::InvalidModel(format!("gain {h} must be positive")));
            }
            if !(a.is_finite() && a > 0.0 && a <= 1.0) {
                return Err(Error::InvalidModel(format!(
                    "probability {a} must lie in (0, 1]"
                )));
            }
        }
        sorted.sort_by(|l, r| r.0.total_cmp(&l.0));
        if let Some(w) = sorted.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidModel(format!("duplicate gain {}", w[0].0)));
        }
        let total: f64 = sorted.iter().map(|s| s.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!(
                "probabilities sum to {total}, expected 1 within 1e-12"
            )));
        }
        let (gains, probs) = sorted.into_iter().unzip();
        Ok(Self {
            kind: FadingKind::DiscreteFinite(DiscreteStates { gains, probs }),
            alpha_over_sigma2,
        })
    }

    /// Builds a tabulated model; the samples must already integrate to one
    /// (trapezoid rule, within 1e-6).
    pub fn tabulated(samples: &[(f64, f64)], alpha_over_sigma2: f64) -> Result<Self> {
        check_scale(alpha_over_sigma2)?;
        let table = TabulatedDensity::new(samples)?;
        let mass = table.total_mass();
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidModel(format!(
                "tabulated density integrates to {mass}, expected 1 within 1e-6"
            )));
        }
        Ok(Self {
            kind: FadingKind::TabulatedDensity(table),
            alpha_over_sigma2,
        })
    }

    /// Like [`FadingModel::tabulated`] but rescales the samples to unit mass first.
    pub fn tabulated_normalized(samples: &[(f64, f64)], alpha_over_sigma2: f64) -> Result<Self> {
        let table = TabulatedDensity::new(samples)?;
        let mass = table.total_mass();
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::InvalidModel(format!(
                "tabulated density has mass {mass}; cannot normalize"
            )));
        }
        let scaled: Vec<(f64, f64)> = samples.iter().map(|&(h, a)| (h, a / mass)).collect();
        Self::tabulated(&scaled, alpha_over_sigma2)
    }

    pub fn kind(&self) -> &FadingKind {
        &self.kind
    }

    pub fn alpha_over_sigma2(&self) -> f64 {
        self.alpha_over_sigma2
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self.kind, FadingKind::DiscreteFinite(_))
    }

    pub fn discrete_states(&self) -> Option<&DiscreteStates> {
        match &self.kind {
            FadingKind::DiscreteFinite(s) => Some(s),
            _ => None,
        }
    }

    /// `(x_i, a_i)` with `x_i = c h_i`, descending in `x`.
    pub fn discrete_x_states(&self) -> Option<Vec<(f64, f64)>> {
        self.discrete_states().map(|s| {
            s.gains
                .iter()
                .zip(&s.probs)
                .map(|(&h, &a)| (self.alpha_over_sigma2 * h, a))
                .collect()
        })
    }

    /// Density `a(h)` of the fading gain.
    pub fn pdf_h(&self, h: f64) -> Result<f64> {
        match &self.kind {
            FadingKind::Exponential { rate } => Ok(if h < 0.0 {
                0.0
            } else {
                rate * (-rate * h).exp()
            }),
            FadingKind::DiscreteFinite(_) => Err(Error::DiscreteKind),
            FadingKind::TabulatedDensity(t) => Ok(t.density(h)),
        }
    }

    /// Density of `X = c H`: `f(x) = a(x / c) / c`.
    pub fn pdf_x(&self, x: f64) -> Result<f64> {
        let c = self.alpha_over_sigma2;
        Ok(self.pdf_h(x / c)? / c)
    }

    /// `ln f(x)`, exact in the exponential case so that far tails stay finite.
    pub fn ln_pdf_x(&self, x: f64) -> Result<f64> {
        let c = self.alpha_over_sigma2;
        match &self.kind {
            FadingKind::Exponential { rate } => {
                if x < 0.0 {
                    Ok(f64::NEG_INFINITY)
                } else {
                    Ok(rate.ln() - rate * x / c - c.ln())
                }
            }
            _ => Ok(self.pdf_x(x)?.ln()),
        }
    }

    /// Density of `Z = 1 / X`: `g(z) = f(1/z) / z^2`.
    pub fn pdf_z(&self, z: f64) -> Result<f64> {
        if z <= 0.0 {
            return Ok(0.0);
        }
        let f = self.pdf_x(1.0 / z)?;
        Ok(if f == 0.0 { 0.0 } else { f / (z * z) })
    }

    /// `E[H]`; `+inf` when the tail integral does not converge.
    pub fn mean_h(&self) -> f64 {
        let m = match &self.kind {
            FadingKind::Exponential { rate } => 1.0 / rate,
            FadingKind::DiscreteFinite(s) => s.gains.iter().zip(&s.probs).map(|(h, a)| h * a).sum(),
            FadingKind::TabulatedDensity(t) => t.mean(),
        };
        if m.is_finite() {
            m
        } else {
            f64::INFINITY
        }
    }

    pub fn mean_x(&self) -> f64 {
        self.alpha_over_sigma2 * self.mean_h()
    }

    /// `P(H > h)`.
    pub fn survival_h(&self, h: f64) -> f64 {
        match &self.kind {
            FadingKind::Exponential { rate } => {
                if h <= 0.0 {
                    1.0
                } else {
                    (-rate * h).exp()
                }
            }
            FadingKind::DiscreteFinite(s) => s
                .gains
                .iter()
                .zip(&s.probs)
                .filter(|(&g, _)| g > h)
                .map(|(_, a)| a)
                .sum(),
            FadingKind::TabulatedDensity(t) => t.survival(h),
        }
    }

    /// Smallest `h` with `P(H <= h) >= p`.
    pub fn quantile_h(&self, p: f64) -> f64 {
        match &self.kind {
            FadingKind::Exponential { rate } => -(-p.clamp(0.0, 1.0)).ln_1p() / rate,
            FadingKind::DiscreteFinite(s) => {
                let mut acc = 0.0;
                for (&g, &a) in s.gains.iter().zip(&s.probs).rev() {
                    acc += a;
                    if acc >= p {
                        return g;
                    }
                }
                s.gains[0]
            }
            FadingKind::TabulatedDensity(t) => t.quantile(p),
        }
    }

    /// Largest value `X` can take (`inf` for unbounded support).
    pub fn x_support_max(&self) -> f64 {
        let c = self.alpha_over_sigma2;
        match &self.kind {
            FadingKind::Exponential { .. } => f64::INFINITY,
            FadingKind::DiscreteFinite(s) => c * s.gains[0],
            FadingKind::TabulatedDensity(t) => c * t.h[t.h.len() - 1],
        }
    }

    /// Grid points of the density in the `X` domain (tabulated models only).
    pub fn x_breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            FadingKind::TabulatedDensity(t) => {
                t.h.iter().map(|h| h * self.alpha_over_sigma2).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Checks whether `h^2 P(H > h)` stays bounded, i.e. is non-increasing on a
    /// 50-point log grid beyond the 99th percentile.
    pub fn tail_decay_check(&self) -> bool {
        match &self.kind {
            FadingKind::Exponential { .. } | FadingKind::DiscreteFinite(_) => true,
            FadingKind::TabulatedDensity(t) => {
                let start = t.quantile(0.99).max(t.h[0]);
                let end = t.h[t.h.len() - 1];
                if !(start > 0.0) || start >= end {
                    return true;
                }
                let n = 50;
                let ratio = (end / start).ln();
                let scaled: Vec<f64> = (0..n)
                    .map(|i| {
                        let h = start * (ratio * i as f64 / (n - 1) as f64).exp();
                        h * h * t.survival(h)
                    })
                    .collect();
                scaled.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12))
            }
        }
    }

    /// Draws a fading gain `h`.
    pub fn sample_h<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            FadingKind::Exponential { rate } => {
                Exp::new(*rate).expect("validated rate").sample(rng)
            }
            FadingKind::DiscreteFinite(s) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (&g, &a) in s.gains.iter().zip(&s.probs) {
                    acc += a;
                    if u < acc {
                        return g;
                    }
                }
                s.gains[s.gains.len() - 1]
            }
            FadingKind::TabulatedDensity(t) => {
                let u: f64 = rng.random();
                t.quantile(u)
            }
        }
    }
}
