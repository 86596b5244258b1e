//! Scalar statistics helpers shared across modules.

/// Numerically stable logistic function.
pub fn expit(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n - 1 denominator); 0 for fewer than two points.
pub fn sample_var(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n as f64 - 1.0)
}

/// Inverse standard normal CDF (Acklam's rational approximation, absolute
/// error below 1.2e-9 on (0, 1)). Panics outside the open unit interval.
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile level must be in (0, 1)");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Two-sided normal critical value for confidence level 1 - alpha.
pub fn normal_critical(alpha: f64) -> f64 {
    normal_quantile(1.0 - alpha / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn expit_symmetry_and_range() {
        assert_abs_diff_eq!(expit(0.0), 0.5, epsilon = 1e-15);
        for z in [-700.0, -30.0, -1.0, 0.3, 40.0, 700.0] {
            let p = expit(z);
            assert!(p.is_finite() && (0.0..=1.0).contains(&p));
            assert_abs_diff_eq!(p + expit(-z), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn quantile_matches_reference_points() {
        // Reference values from standard normal tables.
        assert_abs_diff_eq!(normal_quantile(0.5), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(normal_quantile(0.975), 1.959963985, epsilon = 1e-7);
        assert_abs_diff_eq!(normal_quantile(0.025), -1.959963985, epsilon = 1e-7);
        assert_abs_diff_eq!(normal_quantile(0.84134474), 0.9999998, epsilon = 1e-5);
        assert_abs_diff_eq!(normal_quantile(0.999), 3.090232306, epsilon = 1e-7);
    }

    #[test]
    fn quantile_inverts_cdf_via_symmetry() {
        for p in [0.001, 0.01, 0.2, 0.5, 0.77, 0.99, 0.9999] {
            let z = normal_quantile(p);
            let z2 = normal_quantile(1.0 - p);
            assert_abs_diff_eq!(z, -z2, epsilon = 1e-8);
        }
    }

    #[test]
    fn variance_matches_two_pass_oracle() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        // Oracle by hand: mean 3.75, squared deviations 7.5625+3.0625+0.0625+18.0625 = 28.75.
        assert_abs_diff_eq!(sample_var(&xs), 28.75 / 3.0, epsilon = 1e-12);
    }
}
