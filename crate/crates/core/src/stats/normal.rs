//! Standard normal distribution function.

/// Largest absolute error of [`normal_cdf`].
pub const NORMAL_CDF_MAX_ABS_ERROR: f64 = 7.5e-8;

const P: f64 = 0.231_641_9;
const B: [f64; 5] = [0.319_381_530, -0.356_563_782, 1.781_477_937, -1.821_255_978, 1.330_274_429];
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal CDF by the Zelen and Severo polynomial
/// (Abramowitz and Stegun 26.2.17), absolute error below
/// [`NORMAL_CDF_MAX_ABS_ERROR`]. Both tails come from the same
/// polynomial, so `normal_cdf(-x) + normal_cdf(x)` is one up to rounding.
pub fn normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let z = x.abs();
    if z == f64::INFINITY {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    let t = 1.0 / (1.0 + P * z);
    let poly = t * (B[0] + t * (B[1] + t * (B[2] + t * (B[3] + t * B[4]))));
    let upper = normal_pdf(z) * poly;
    if x >= 0.0 {
        1.0 - upper
    } else {
        upper
    }
}
