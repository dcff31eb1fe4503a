/// Default boundary clamp for Bernoulli means.
pub const CLAMP_EPS: f64 = 1e-6;
/// Default Gaussian variance: the largest variance of a `[0, 1]`-valued variable.
pub const DEFAULT_VARIANCE: f64 = 0.25;

/// Bernoulli relative entropy `kl(x, y)` with both means clamped to `[eps, 1 - eps]`.
#[inline]
pub fn bernoulli_kl(x: f64, y: f64, eps: f64) -> f64 {
    let x = x.clamp(eps, 1.0 - eps);
    let y = y.clamp(eps, 1.0 - eps);
    let v = x * (x / y).ln() + (1.0 - x) * ((1.0 - x) / (1.0 - y)).ln();
    v.max(0.0)
}

/// Gaussian mean-shift divergence `(x - y)^2 / (2 sigma^2)`.
#[inline]
pub fn gaussian_kl(x: f64, y: f64, variance: f64) -> f64 {
    let d = x - y;
    d * d / (2.0 * variance)
}

/// Anytime-valid GLR threshold
/// `6 ln(1 + ln n) + 5/2 ln(4 n^{3/2} / delta) + 11`.
pub fn threshold_anytime(n: usize, delta: f64) -> f64 {
    let n = n.max(1) as f64;
    6.0 * (1.0 + n.ln()).ln() + 2.5 * (4.0 * n.powf(1.5) / delta).ln() + 11.0
}

/// Experimental threshold `ln(n^{3/2} / delta)`.
pub fn threshold_experimental(n: usize, delta: f64) -> f64 {
    let n = n.max(1) as f64;
    1.5 * n.ln() - delta.ln()
}
