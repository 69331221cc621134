//! Standard normal distribution and the Expected-Improvement acquisition.

use std::f64::consts::{PI, SQRT_2};

/// Complementary error function, Chebyshev fit with fractional error below
/// 1.2e-7 everywhere.
pub fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let poly = -z * z - 1.265_512_23
        + t * (1.000_023_68
            + t * (0.374_091_96
                + t * (0.096_784_18
                    + t * (-0.186_288_06
                        + t * (0.278_868_07
                            + t * (-1.135_203_98
                                + t * (1.488_515_87 + t * (-0.822_152_23 + t * 0.170_872_77))))))));
    let r = t * poly.exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// E[max(f_best − f, 0)] for f ~ N(μ, σ²), minimization convention.
pub fn expected_improvement(mu: f64, sigma: f64, f_best: f64) -> f64 {
    let gain = f_best - mu;
    if !(sigma > 0.0) {
        return gain.max(0.0);
    }
    let z = gain / sigma;
    (gain * normal_cdf(z) + sigma * normal_pdf(z)).max(0.0)
}

/// EI weighted by the probability that a second output stays below `cap`.
pub fn constrained_ei(mu: f64, sigma: f64, f_best: f64, c_mu: f64, c_sigma: f64, cap: f64) -> f64 {
    let feasible = if c_sigma > 0.0 {
        normal_cdf((cap - c_mu) / c_sigma)
    } else if c_mu <= cap {
        1.0
    } else {
        0.0
    };
    expected_improvement(mu, sigma, f_best) * feasible
}
