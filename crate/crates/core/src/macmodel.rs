//! Saturation random-access accounting.
//!
//! Contention periods are idle slots, collisions or successes with
//! probabilities `p_i`, `p_c`, `p_s`. By renewal-reward, with
//! `D = p_i T_i + p_c T_c + p_s (T_o + T)`:
//!
//! ```text
//! Theta_T = p_s * W T Gamma / ln 2 / D                     (bits/s)
//! Power   = (p_i E_i + p_c E_c + p_s (E_o + T P_tx)) / D    (W)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Contention probabilities, per-period overheads, transmission time and
/// bandwidth. Times in seconds, energies in joules, bandwidth in hertz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MacProfile {
    pub p_i: f64,
    pub p_c: f64,
    pub p_s: f64,
    pub t_i: f64,
    pub t_c: f64,
    pub t_o: f64,
    pub e_i: f64,
    pub e_c: f64,
    pub e_o: f64,
    /// Fixed transmission time of a successful period.
    pub t: f64,
    pub w: f64,
}

impl MacProfile {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_i", self.p_i), ("p_c", self.p_c), ("p_s", self.p_s)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param(
                    name,
                    format!("probability out of [0, 1]: {p}"),
                ));
            }
        }
        let sum = self.p_i + self.p_c + self.p_s;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::param(
                "p_s",
                format!("p_i + p_c + p_s = {sum}, expected 1"),
            ));
        }
        if !(self.p_s > 0.0) {
            return Err(Error::param("p_s", "success probability must be positive"));
        }
        for (name, v) in [
            ("t_i", self.t_i),
            ("t_c", self.t_c),
            ("t_o", self.t_o),
            ("e_i", self.e_i),
            ("e_c", self.e_c),
            ("e_o", self.e_o),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(
                    name,
                    format!("must be finite and non-negative, got {v}"),
                ));
            }
        }
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::param(
                "t",
                format!("transmission time must be positive, got {}", self.t),
            ));
        }
        if !(self.w > 0.0 && self.w.is_finite()) {
            return Err(Error::param(
                "w",
                format!("bandwidth must be positive, got {}", self.w),
            ));
        }
        Ok(())
    }

    /// Mean contention-period length `p_i T_i + p_c T_c + p_s (T_o + T)`.
    pub fn mean_period(&self) -> f64 {
        self.p_i * self.t_i + self.p_c * self.t_c + self.p_s * (self.t_o + self.t)
    }

    /// Overhead power `(p_i E_i + p_c E_c + p_s E_o) / D`.
    pub fn overhead_power(&self) -> f64 {
        (self.p_i * self.e_i + self.p_c * self.e_c + self.p_s * self.e_o) / self.mean_period()
    }

    /// Aggregate bit rate for mean per-transmission rate `Gamma` (nats per unit
    /// bandwidth).
    pub fn throughput(&self, mean_rate_nats: f64) -> f64 {
        let bits_per_success = self.w * self.t * mean_rate_nats / std::f64::consts::LN_2;
        self.p_s * bits_per_success / self.mean_period()
    }

    /// Network average power for mean transmit power `E[P(h)]`.
    pub fn network_power(&self, mean_tx_power: f64) -> f64 {
        let energy = self.p_i * self.e_i
            + self.p_c * self.e_c
            + self.p_s * (self.e_o + self.t * mean_tx_power);
        energy / self.mean_period()
    }

    /// Transmit power averaged over transmission periods only, for network
    /// power budget `p_bar`.
    pub fn pt_prime(&self, p_bar: f64) -> Result<f64> {
        let overhead = self.overhead_power();
        if !(p_bar > overhead) {
            return Err(Error::BudgetExhausted { p_bar, overhead });
        }
        Ok(self.mean_period() / (self.p_s * self.t) * (p_bar - overhead))
    }
}

/// Single-cell aggregate rate `C(K)` (nats) and its power-free bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReuseBound {
    pub k: u64,
    pub c_k: f64,
    pub power_free_bound: f64,
}

/// `C(K) = K ln(1 + P / (N + (K-1) P / (2A)^(eta/2)))` and the bound
/// `K ln(1 + (2A)^(eta/2) / (K-1))` that holds for every `P`.
pub fn spatial_reuse_bound(k: u64, p: f64, n: f64, area: f64, eta: f64) -> Result<ReuseBound> {
    if k < 2 {
        return Err(Error::param(
            "k",
            format!("need at least 2 simultaneous links, got {k}"),
        ));
    }
    for (name, v) in [("p", p), ("n", n), ("area", area), ("eta", eta)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::param(name, format!("must be positive, got {v}")));
        }
    }
    let kf = k as f64;
    let g = (2.0 * area).powf(eta / 2.0);
    let sinr = p / (n + (kf - 1.0) * p / g);
    Ok(ReuseBound {
        k,
        c_k: kf * sinr.ln_1p(),
        power_free_bound: kf * (g / (kf - 1.0)).ln_1p(),
    })
}

/// Illustrative hop reach with `K` cells sharing area `A`: `sqrt(2A / K)`.
pub fn reuse_radius(k: u64, area: f64) -> f64 {
    (2.0 * area / k as f64).sqrt()
}

/// Maximizes `bound(K) * r(K)` over `K = 2..=k_max`; returns `(K*, value)`.
pub fn best_reuse(area: f64, eta: f64, k_max: u64) -> Result<(u64, f64)> {
    let mut best = (0, f64::NEG_INFINITY);
    for k in 2..=k_max.max(2) {
        let b = spatial_reuse_bound(k, 1.0, 1.0, area, eta)?;
        let v = b.power_free_bound * reuse_radius(k, area);
        if v > best.1 {
            best = (k, v);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

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

    #[test]
    fn throughput_cases() {
        assert!((ideal().throughput(LN_2) - 1.0).abs() < 1e-15);
        assert_eq!(contended().throughput(0.0), 0.0);
        // D = 5e-6 + 1e-5 + 4.4e-4 = 4.55e-4; 0.4 * 1e6 * 1e-3 / 4.55e-4
        let expected = 0.4 * 1e3 / 4.55e-4;
        assert!((contended().throughput(LN_2) - expected).abs() / expected < 1e-13);
    }

    #[test]
    fn power_cases() {
        assert!((ideal().network_power(0.7) - 0.7).abs() < 1e-15);
        let m = contended();
        assert!((m.network_power(0.0) - m.overhead_power()).abs() < 1e-18);
        // (1e-6 + 3e-6 + 0.4 * (4e-5 + 1e-3 * 0.2)) / 4.55e-4
        let expected = (1e-6 + 3e-6 + 0.4 * 2.4e-4) / 4.55e-4;
        assert!((m.network_power(0.2) - expected).abs() / expected < 1e-13);
    }

    #[test]
    fn pt_prime_round_trip() {
        assert!((ideal().pt_prime(0.3).unwrap() - 0.3).abs() < 1e-16);
        let m = contended();
        for p_bar in [0.1, 0.5, 3.0] {
            // P't is the mean power over transmissions, i.e. E[P(h)] itself
            let back = m.network_power(m.pt_prime(p_bar).unwrap());
            assert!((back - p_bar).abs() < 1e-12 * p_bar, "{back} vs {p_bar}");
        }
        let po = m.overhead_power();
        assert!(matches!(m.pt_prime(po), Err(Error::BudgetExhausted { .. })));
    }

    #[test]
    fn validation() {
        let mut m = contended();
        m.p_s = 0.5;
        assert!(m.validate().is_err());
        let mut m = contended();
        m.t = 0.0;
        assert!(m.validate().is_err());
        assert!(contended().validate().is_ok());
    }

    #[test]
    fn reuse_bound_holds_and_is_the_limit() {
        let b = spatial_reuse_bound(2, 0.1, 1e-10, 450.0, 3.0).unwrap();
        assert!(b.c_k.is_finite() && b.c_k <= b.power_free_bound);
        for k in [2, 10, 1000] {
            let lim = spatial_reuse_bound(k, 1e12, 1e-10, 450.0, 3.0).unwrap();
            assert!((lim.c_k - lim.power_free_bound).abs() < 1e-9 * lim.power_free_bound);
        }
        assert!(spatial_reuse_bound(1, 1.0, 1.0, 1.0, 3.0).is_err());
    }

    #[test]
    fn reuse_optimum_is_finite() {
        let (k, v) = best_reuse(450.0, 3.0, 100_000).unwrap();
        assert!((2..100_000).contains(&k));
        let tail = spatial_reuse_bound(100_000, 1.0, 1.0, 450.0, 3.0)
            .unwrap()
            .power_free_bound
            * reuse_radius(100_000, 450.0);
        assert!(tail < v);
    }
}
