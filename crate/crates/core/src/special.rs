//! Exponential integral E1 and its scaled form.

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `e^z * E1(z)` for `z > 0`.
pub fn e1_scaled(z: f64) -> f64 {
    assert!(z > 0.0, "E1 requires z > 0, got {z}");
    if z <= 1.0 {
        return z.exp() * e1_series(z);
    }
    // modified Lentz evaluation of the continued fraction
    let tiny = 1e-300;
    let mut b = z + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Exponential integral `E1(z) = ∫_z^∞ e^{-t}/t dt`.
pub fn e1(z: f64) -> f64 {
    if z <= 1.0 {
        e1_series(z)
    } else {
        (-z).exp() * e1_scaled(z)
    }
}

fn e1_series(z: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        term *= -z / k as f64;
        let add = term / k as f64;
        sum += add;
        if add.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    -EULER_GAMMA - z.ln() - sum
}
