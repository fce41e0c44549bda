//! Hop-distance optimization of the transport-capacity core
//! `psi(d) = d * Gamma(P't / d^eta)`.
//!
//! Differentiating gives `psi'(d) = Gamma(pi) - eta pi lambda(pi)` with
//! `pi = P't / d^eta`, so stationary points are roots of that expression in
//! `pi`. The roots do not depend on `P't`; scaling the power only rescales
//! the hop distance by `x^(1/eta)`. Continuous models are scanned on a log
//! grid in `pi`; discrete models use the closed form in [`crate::discrete`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discrete::DiscreteWaterfillTable;
use crate::error::{Boundary, Error, Result};
use crate::fading::FadingModel;
use crate::quad::{integrate_pieces, QuadOptions};
use crate::roots::brent;
use crate::waterfill;

/// One hop-distance optimization instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopProblem {
    pub model: FadingModel,
    /// Path loss exponent.
    pub eta: f64,
    /// Transmit power averaged over transmission periods only (W).
    pub pt_prime: f64,
    /// Far-field reference distance (m).
    pub d0: f64,
}

impl HopProblem {
    pub fn new(model: FadingModel, eta: f64, pt_prime: f64, d0: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::param("eta", format!("must be positive, got {eta}")));
        }
        if eta < 2.0 {
            log::warn!("eta = {eta} < 2: the d -> infinity limit is not guaranteed");
        }
        if !(pt_prime > 0.0 && pt_prime.is_finite()) {
            return Err(Error::param(
                "pt_prime",
                format!("must be positive, got {pt_prime}"),
            ));
        }
        if !(d0 >= 0.0 && d0.is_finite()) {
            return Err(Error::param(
                "d0",
                format!("must be non-negative, got {d0}"),
            ));
        }
        Ok(Self {
            model,
            eta,
            pt_prime,
            d0,
        })
    }

    pub fn pi_at(&self, d: f64) -> f64 {
        self.pt_prime / d.powf(self.eta)
    }

    pub fn d_at(&self, pi: f64) -> f64 {
        (self.pt_prime / pi).powf(1.0 / self.eta)
    }

    fn with_power(&self, pt_prime: f64) -> Self {
        Self {
            pt_prime,
            ..self.clone()
        }
    }
}

/// A root of `Gamma(pi) - eta pi lambda(pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryPoint {
    pub d: f64,
    pub pi: f64,
    pub lambda: f64,
    /// `Gamma(pi)` in nats.
    pub gamma: f64,
    /// `d * Gamma(pi)`.
    pub psi: f64,
    /// One-based closed-form segment for discrete models.
    pub segment: Option<usize>,
}

/// Location of the global maximum of `psi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Maximizer {
    Point(usize),
    Boundary(Boundary),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarySet {
    /// Sorted by ascending `d`.
    pub points: Vec<StationaryPoint>,
    pub maximizer: Maximizer,
    /// Whether a sufficient condition certified at most one stationary point.
    pub unique: bool,
}

impl StationarySet {
    pub fn best(&self) -> Option<&StationaryPoint> {
        match self.maximizer {
            Maximizer::Point(i) => self.points.get(i),
            Maximizer::Boundary(_) => None,
        }
    }
}

pub(crate) fn select_maximizer(
    points: &[StationaryPoint],
    psi_zero: f64,
    psi_inf: f64,
) -> Maximizer {
    let (best, best_psi) = points
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, p)| {
            if p.psi > acc.1 {
                (i, p.psi)
            } else {
                acc
            }
        });
    if psi_inf > best_psi && psi_inf >= psi_zero {
        Maximizer::Boundary(Boundary::Infinity)
    } else if psi_zero > best_psi {
        Maximizer::Boundary(Boundary::Zero)
    } else {
        Maximizer::Point(best)
    }
}

/// Log-grid scan over `pi` used to bracket stationary points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub pi_min: f64,
    pub pi_max: f64,
    pub points: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            pi_min: 1e-8,
            pi_max: 1e8,
            points: 2000,
        }
    }
}

impl ScanConfig {
    fn validate(&self) -> Result<()> {
        if !(self.pi_min > 0.0 && self.pi_max > self.pi_min && self.pi_max.is_finite()) {
            return Err(Error::param(
                "scan",
                format!(
                    "need 0 < pi_min < pi_max, got [{}, {}]",
                    self.pi_min, self.pi_max
                ),
            ));
        }
        if self.points < 2 {
            return Err(Error::param("scan.points", "need at least 2 grid points"));
        }
        Ok(())
    }

    fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        let (lo, hi) = (self.pi_min.ln(), self.pi_max.ln());
        let n = self.points;
        (0..n).map(move |i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
    }
}

fn psi_unchecked(problem: &HopProblem, d: f64) -> Result<f64> {
    let pi = problem.pi_at(d);
    Ok(d * waterfill::solve_allow_zero(&problem.model, pi)?.gamma)
}

/// `d * Gamma(P't / d^eta)` in nats per unit bandwidth times meters.
pub fn psi(problem: &HopProblem, d: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::param("d", format!("must be positive, got {d}")));
    }
    if d <= problem.d0 {
        log::warn!(
            "d = {d} is inside the near field (d0 = {}); path loss is overestimated",
            problem.d0
        );
    }
    psi_unchecked(problem, d)
}

/// Stationary residual `Gamma(pi) - eta pi lambda(pi)`, i.e. `d psi / d d`.
pub fn stationary_residual(model: &FadingModel, eta: f64, pi: f64) -> Result<f64> {
    let sol = waterfill::solve(model, pi)?;
    Ok(sol.gamma - eta * pi * sol.lambda)
}

/// All stationary points of `psi`, with the global maximizer identified.
pub fn stationary_points(problem: &HopProblem, scan: &ScanConfig) -> Result<StationarySet> {
    if problem.model.is_discrete() {
        let table = DiscreteWaterfillTable::build(&problem.model)?;
        return table.stationary_points(problem.eta, problem.pt_prime);
    }
    scan.validate()?;
    let model = &problem.model;
    let eta = problem.eta;
    let residual = |ln_pi: f64| stationary_residual(model, eta, ln_pi.exp());

    let grid: Vec<f64> = scan.grid().map(f64::ln).collect();
    let values = grid
        .iter()
        .map(|&t| residual(t))
        .collect::<Result<Vec<f64>>>()?;
    let mut points = Vec::new();
    for i in 0..grid.len() - 1 {
        let (ra, rb) = (values[i], values[i + 1]);
        let root = if ra == 0.0 {
            Some(grid[i])
        } else if ra.signum() != rb.signum() && rb != 0.0 {
            let mut err = None;
            let t = brent(
                |t| {
                    residual(t).unwrap_or_else(|e| {
                        err = Some(e);
                        f64::NAN
                    })
                },
                grid[i],
                grid[i + 1],
                1e-14,
                4.0 * f64::EPSILON,
                200,
            );
            if let Some(e) = err {
                return Err(e);
            }
            Some(t?)
        } else {
            None
        };
        if let Some(t) = root {
            let pi = t.exp();
            let sol = waterfill::solve(model, pi)?;
            let d = problem.d_at(pi);
            points.push(StationaryPoint {
                d,
                pi,
                lambda: sol.lambda,
                gamma: sol.gamma,
                psi: d * sol.gamma,
                segment: None,
            });
        }
    }
    points.sort_by(|a, b| a.d.total_cmp(&b.d));

    let psi_zero = psi_unchecked(problem, problem.d_at(scan.pi_max))?;
    let psi_inf = psi_unchecked(problem, problem.d_at(scan.pi_min))?;
    if points.is_empty() {
        let side = if psi_inf > psi_zero {
            Boundary::Infinity
        } else {
            Boundary::Zero
        };
        return Err(Error::NoStationaryPoint(side));
    }
    let maximizer = select_maximizer(&points, psi_zero, psi_inf);
    let unique = check_monotonicity_condition(model).unwrap_or(false);
    Ok(StationarySet {
        points,
        maximizer,
        unique,
    })
}

/// Optimal hop distance together with the full stationary set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub d_opt: f64,
    pub pi_opt: f64,
    pub lambda_opt: f64,
    pub gamma_opt: f64,
    pub psi_opt: f64,
    pub unique: bool,
    /// Whether the optimum lies in the far field (`d_opt > d0`).
    pub far_field: bool,
    pub stationary: StationarySet,
}

pub fn optimize(problem: &HopProblem, scan: &ScanConfig) -> Result<Optimum> {
    let set = stationary_points(problem, scan)?;
    let best = match set.maximizer {
        Maximizer::Point(i) => set.points[i],
        Maximizer::Boundary(b) => return Err(Error::NoStationaryPoint(b)),
    };
    if best.d <= problem.d0 {
        log::warn!(
            "optimal hop distance {} is not beyond d0 = {}",
            best.d,
            problem.d0
        );
    }
    Ok(Optimum {
        d_opt: best.d,
        pi_opt: best.pi,
        lambda_opt: best.lambda,
        gamma_opt: best.gamma,
        psi_opt: best.psi,
        unique: set.unique,
        far_field: best.d > problem.d0,
        stationary: set,
    })
}

/// `R(lambda) = int_0^1 (ln y - eta (y - 1)) lambda^2 / y^2 f(lambda / y) dy`,
/// which equals `-lambda (Gamma - eta pi lambda)` at `pi = pi(lambda)`.
pub fn rechar_integral(model: &FadingModel, eta: f64, lambda: f64) -> Result<f64> {
    if model.is_discrete() {
        return Err(Error::NotContinuous);
    }
    let integrand = |y: f64| {
        if y <= 0.0 {
            return 0.0;
        }
        let x = lambda / y;
        let lf = model.ln_pdf_x(x).unwrap_or(f64::NEG_INFINITY);
        if lf == f64::NEG_INFINITY {
            return 0.0;
        }
        (y.ln() - eta * (y - 1.0)) * (2.0 * x.ln() + lf).exp()
    };
    let x_max = model.x_support_max();
    let y_min = if x_max.is_finite() {
        (lambda / x_max).min(1.0)
    } else {
        0.0
    };
    let mut pts = vec![0.0, y_min];
    pts.extend(
        model
            .x_breakpoints()
            .into_iter()
            .filter(|&x| x > lambda)
            .map(|x| lambda / x),
    );
    pts.push(1.0);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let opts = QuadOptions {
        // the integrand changes sign, so tolerance is set against lambda
        // rather than the (near-zero) value of the integral
        abs_tol: 1e-12 * lambda,
        rel_tol: 1e-10,
        max_intervals: 20_000,
    };
    Ok(integrate_pieces(integrand, &pts, opts)?.value)
}

/// Solves the y-domain recharacterization `R(lambda) = 0` directly for the
/// optimal multiplier. Scans `lambda` over a 200-point log grid and refines
/// the first sign change.
pub fn solve_rechar(problem: &HopProblem) -> Result<f64> {
    let model = &problem.model;
    if model.is_discrete() {
        return Err(Error::NotContinuous);
    }
    let mean = model.mean_x();
    let scale = if mean.is_finite() && mean > 0.0 {
        mean
    } else {
        model.alpha_over_sigma2() * model.quantile_h(0.5)
    };
    let lo = (1e-6 * scale).ln();
    let hi = (1e3 * scale).min(model.x_support_max() * (1.0 - 1e-9)).ln();
    let n = 200;
    let grid: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    let r = |t: f64| rechar_integral(model, problem.eta, t.exp());
    let mut prev = r(grid[0])?;
    for w in grid.windows(2) {
        let next = r(w[1])?;
        if prev != 0.0 && next != 0.0 && prev.signum() != next.signum() {
            let mut err = None;
            let t = brent(
                |t| {
                    r(t).unwrap_or_else(|e| {
                        err = Some(e);
                        f64::NAN
                    })
                },
                w[0],
                w[1],
                1e-14,
                4.0 * f64::EPSILON,
                200,
            );
            if let Some(e) = err {
                return Err(e);
            }
            return Ok(t?.exp());
        }
        prev = next;
    }
    Err(Error::NoBracket)
}

/// Numerically certifies the uniqueness condition: for `lambda_1 > lambda_2`,
/// `f(lambda_2 / y) / f(lambda_1 / y)` strictly decreasing in `y`. Checked on
/// 20 seeded pairs and a 200-point grid in `(0, 1]`. `false` means "not
/// certified", not "violated".
pub fn check_monotonicity_condition(model: &FadingModel) -> Result<bool> {
    if model.is_discrete() {
        return Err(Error::DiscreteKind);
    }
    let c = model.alpha_over_sigma2();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d6f_6e6f);
    for _ in 0..20 {
        let u1: f64 = rng.random_range(0.01..0.99);
        let u2: f64 = rng.random_range(0.01..0.99);
        let (a, b) = (c * model.quantile_h(u1), c * model.quantile_h(u2));
        if a == b {
            continue;
        }
        let (l1, l2) = (a.max(b), a.min(b));
        let mut prev: Option<f64> = None;
        for j in 1..=200 {
            let y = j as f64 / 200.0;
            let num = model.ln_pdf_x(l2 / y)?;
            let den = model.ln_pdf_x(l1 / y)?;
            if num == f64::NEG_INFINITY && den == f64::NEG_INFINITY {
                continue;
            }
            let log_ratio = num - den;
            if let Some(p) = prev {
                if !(log_ratio < p) {
                    return Ok(false);
                }
            }
            prev = Some(log_ratio);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    /// `d_opt(x P't) / d_opt(P't)`; expected `x^(1/eta)`.
    pub d_ratio: f64,
    /// `psi_opt(x P't) / psi_opt(P't)`; expected `x^(1/eta)`.
    pub psi_ratio: f64,
    /// `|Gamma_opt(x P't) - Gamma_opt(P't)|`; expected 0.
    pub gamma_delta: f64,
    pub pi_ratio: f64,
}

/// Re-solves at `x * P't` and compares optima.
pub fn scaling_check(problem: &HopProblem, x: f64, scan: &ScanConfig) -> Result<ScalingCheck> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::param(
            "x",
            format!("scale factor must be positive, got {x}"),
        ));
    }
    let base = optimize(problem, scan)?;
    let scaled = optimize(&problem.with_power(x * problem.pt_prime), scan)?;
    Ok(ScalingCheck {
        d_ratio: scaled.d_opt / base.d_opt,
        psi_ratio: scaled.psi_opt / base.psi_opt,
        gamma_delta: (scaled.gamma_opt - base.gamma_opt).abs(),
        pi_ratio: scaled.pi_opt / base.pi_opt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLimits {
    pub at_zero: bool,
    /// `None` when the tail or path-loss hypothesis is not met.
    pub at_infinity: Option<bool>,
}

/// Evaluates `psi` at `d_opt * 10^(-k)` and `d_opt * 10^k`, `k = 1..6`, and
/// checks monotone decay below `1e-3 * psi_opt` at both ends.
pub fn boundary_limits(problem: &HopProblem, scan: &ScanConfig) -> Result<BoundaryLimits> {
    if !problem.model.mean_h().is_finite() {
        return Err(Error::HypothesisNotMet(
            "fading gain has infinite mean".into(),
        ));
    }
    let opt = optimize(problem, scan)?;
    let check = |sign: f64| -> Result<bool> {
        let mut prev = opt.psi_opt;
        for k in 1..=6 {
            let v = psi_unchecked(problem, opt.d_opt * 10f64.powf(sign * k as f64))?;
            if v > prev {
                return Ok(false);
            }
            prev = v;
        }
        Ok(prev < 1e-3 * opt.psi_opt)
    };
    let at_zero = check(-1.0)?;
    let at_infinity = if problem.eta >= 2.0 && problem.model.tail_decay_check() {
        Some(check(1.0)?)
    } else {
        None
    };
    Ok(BoundaryLimits {
        at_zero,
        at_infinity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roots::bisect;

    fn exp_problem(eta: f64) -> HopProblem {
        HopProblem::new(FadingModel::exponential(1.0, 1.0).unwrap(), eta, 1.0, 0.0).unwrap()
    }

    fn bimodal_problem(a1: f64) -> HopProblem {
        let m = FadingModel::discrete(&[(100.0, a1), (0.5, 1.0 - a1)], 1.0).unwrap();
        HopProblem::new(m, 3.0, 1.0, 0.0).unwrap()
    }

    #[test]
    fn psi_single_state() {
        let m = FadingModel::discrete(&[(1.0, 1.0)], 1.0).unwrap();
        let p = HopProblem::new(m, 3.0, 1.0, 0.0).unwrap();
        assert!((psi(&p, 1.0).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn single_state_root_matches_scalar_oracle() {
        let oracle = bisect(
            |p: f64| (1.0 + p).ln() - 3.0 * p / (1.0 + p),
            0.5,
            100.0,
            1e-13,
            500,
        )
        .unwrap();
        let m = FadingModel::discrete(&[(1.0, 1.0)], 1.0).unwrap();
        let p = HopProblem::new(m, 3.0, 1.0, 0.0).unwrap();
        let set = stationary_points(&p, &ScanConfig::default()).unwrap();
        assert_eq!(set.points.len(), 1);
        assert!((set.points[0].pi - oracle).abs() / oracle < 1e-8);
    }

    #[test]
    fn exponential_has_unique_point() {
        for eta in [2.0, 3.0, 4.0] {
            let set = stationary_points(&exp_problem(eta), &ScanConfig::default()).unwrap();
            assert_eq!(set.points.len(), 1, "eta = {eta}");
            assert!(set.unique);
            assert_eq!(set.maximizer, Maximizer::Point(0));
            let p = set.points[0];
            assert!((p.gamma - eta * p.pi * p.lambda).abs() < 1e-8 * p.gamma);
        }
    }

    #[test]
    fn psi_vanishes_at_both_ends() {
        let p = exp_problem(2.0);
        let mut vals = Vec::new();
        for i in 0..400 {
            let d = 0.05 * 1000f64.powf(i as f64 / 399.0);
            let v = psi(&p, d).unwrap();
            assert!(v > 0.0);
            vals.push(v);
        }
        let max = vals.iter().cloned().fold(0.0, f64::max);
        assert!(vals[0] < 0.5 * max && vals[399] < 0.5 * max);
    }

    #[test]
    fn bimodal_points_are_local_extrema() {
        let p = bimodal_problem(0.01);
        let set = stationary_points(&p, &ScanConfig::default()).unwrap();
        assert_eq!(set.points.len(), 3);
        for sp in &set.points {
            let h = 1e-6 * sp.d;
            let slope = (psi(&p, sp.d + h).unwrap() - psi(&p, sp.d - h).unwrap()) / (2.0 * h);
            assert!(
                slope.abs() < 1e-4 * sp.psi / sp.d,
                "slope {slope} at d = {}",
                sp.d
            );
        }
    }

    #[test]
    fn derivative_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in [exp_problem(2.0), exp_problem(3.5), bimodal_problem(0.01)] {
            for _ in 0..50 {
                let d: f64 = 10f64.powf(rng.random_range(-1.0..1.5));
                let h = 1e-6 * d;
                let fd = (psi(&p, d + h).unwrap() - psi(&p, d - h).unwrap()) / (2.0 * h);
                let pi = p.pi_at(d);
                let r = stationary_residual(&p.model, p.eta, pi).unwrap();
                let scale = waterfill::solve(&p.model, pi).unwrap().gamma;
                assert!(
                    (fd - r).abs() < 1e-4 * scale.max(r.abs()),
                    "d={d}: {fd} vs {r}"
                );
            }
        }
    }

    #[test]
    fn rechar_matches_stationary_root() {
        for eta in [2.0, 3.0] {
            let p = exp_problem(eta);
            let lam = solve_rechar(&p).unwrap();
            let opt = optimize(&p, &ScanConfig::default()).unwrap();
            assert!((lam - opt.lambda_opt).abs() / opt.lambda_opt < 1e-6);
        }
    }

    #[test]
    fn rechar_integral_identity() {
        let m = FadingModel::exponential(0.7, 2.0).unwrap();
        for pi in [0.05, 0.5, 5.0] {
            let sol = waterfill::solve(&m, pi).unwrap();
            let r = rechar_integral(&m, 2.5, sol.lambda).unwrap();
            let s = sol.gamma - 2.5 * pi * sol.lambda;
            assert!((r + sol.lambda * s).abs() < 1e-9 * sol.lambda * sol.gamma);
        }
    }

    #[test]
    fn monotonicity_condition() {
        assert!(
            check_monotonicity_condition(&FadingModel::exponential(2.0, 3.0).unwrap()).unwrap()
        );
        let bimodal = bimodal_problem(0.01).model;
        assert_eq!(
            check_monotonicity_condition(&bimodal),
            Err(Error::DiscreteKind)
        );
    }

    #[test]
    fn scaling() {
        let scan = ScanConfig::default();
        let s = scaling_check(&exp_problem(2.0), 4.0, &scan).unwrap();
        assert!((s.d_ratio - 2.0).abs() < 1e-6 && (s.psi_ratio - 2.0).abs() < 1e-6);
        assert!(s.gamma_delta < 1e-8);
        let s = scaling_check(&exp_problem(2.0), 1.0, &scan).unwrap();
        assert_eq!((s.d_ratio, s.psi_ratio, s.gamma_delta), (1.0, 1.0, 0.0));
        let s = scaling_check(&bimodal_problem(0.01), 8.0, &scan).unwrap();
        assert!((s.d_ratio - 2.0).abs() < 1e-6);
    }

    #[test]
    fn limits() {
        let scan = ScanConfig::default();
        let l = boundary_limits(&exp_problem(2.0), &scan).unwrap();
        assert_eq!((l.at_zero, l.at_infinity), (true, Some(true)));
        let l = boundary_limits(&bimodal_problem(0.01), &scan).unwrap();
        assert_eq!((l.at_zero, l.at_infinity), (true, Some(true)));
    }

    #[test]
    fn heavy_tail_skips_infinity_check() {
        let samples: Vec<(f64, f64)> = (0..20_000)
            .map(|i| {
                let h = 10f64.powf(6.0 * i as f64 / 19_999.0);
                (h, 1.5 * h.powf(-2.5))
            })
            .collect();
        let m = FadingModel::tabulated_normalized(&samples, 1.0).unwrap();
        assert!(!m.tail_decay_check());
        let p = HopProblem::new(m, 2.0, 1.0, 0.0).unwrap();
        let l = boundary_limits(&p, &ScanConfig::default()).unwrap();
        assert_eq!(l.at_infinity, None);
    }
}
