//! Shapiro-Wilk normality test, Royston's AS R94 (1995) algorithm for
//! sample sizes 3 through 5000.
//!
//! The W statistic is the squared correlation between the ordered sample
//! and the expected normal order statistic coefficients; the p-value comes
//! from Royston's normalizing transformation of `ln(1 - W)`.

use crate::error::{Error, Result};

const MIN_N: usize = 3;
const MAX_N: usize = 5000;

/// Computes the Shapiro-Wilk statistic `W` and its p-value.
///
/// The sample does not need to be sorted. Returns
/// [`Error::SampleSizeOutOfRange`] outside `3 <= n <= 5000` and
/// [`Error::ZeroVarianceSample`] when every value is identical.
pub fn shapiro_wilk(sample: &[f64]) -> Result<(f64, f64)> {
    let n = sample.len();
    if !(MIN_N..=MAX_N).contains(&n) {
        return Err(Error::SampleSizeOutOfRange {
            n,
            min: MIN_N,
            max: MAX_N,
        });
    }
    for &v in sample {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "sample value",
            });
        }
    }

    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("values checked finite"));

    let range = sorted[n - 1] - sorted[0];
    if range == 0.0 {
        return Err(Error::ZeroVarianceSample);
    }

    let nn2 = n / 2;
    // Coefficients use 1-based indexing to match the published algorithm;
    // a[0] is unused.
    let mut a = vec![0.0; nn2 + 1];
    if n == 3 {
        a[1] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        fill_coefficients(&mut a, n);
    }

    // Means of the scaled sample and of the signed coefficient sequence.
    let mut sx = 0.0;
    let mut sa = 0.0;
    for i in 0..n {
        sx += sorted[i] / range;
        sa += signed_coefficient(&a, i, n);
    }
    sa /= n as f64;
    sx /= n as f64;

    let mut ssa = 0.0;
    let mut ssx = 0.0;
    let mut sax = 0.0;
    for i in 0..n {
        let asa = signed_coefficient(&a, i, n) - sa;
        let xsx = sorted[i] / range - sx;
        ssa += asa * asa;
        ssx += xsx * xsx;
        sax += asa * xsx;
    }

    // W = 1 - w1, with w1 built from a difference of products to keep
    // precision when W is near 1.
    let ssassx = (ssa * ssx).sqrt();
    let w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    let w = (1.0 - w1).clamp(0.0, 1.0);

    Ok((w, p_value(w, n)))
}

/// The coefficient attached to order statistic `i` (0-based): `-a[k]` in
/// the lower half, `+a[k]` in the upper half, `0` at an odd-length middle.
fn signed_coefficient(a: &[f64], i: usize, n: usize) -> f64 {
    let j = n - 1 - i;
    if i == j {
        return 0.0;
    }
    let idx = i.min(j) + 1;
    if i > j {
        a[idx]
    } else {
        -a[idx]
    }
}

/// Royston (1995) polynomial-corrected normal order statistic
/// coefficients, written into `a[1..=n/2]`.
fn fill_coefficients(a: &mut [f64], n: usize) {
    let nn2 = n / 2;
    let an = n as f64;
    let an25 = an + 0.25;
    let mut summ2 = 0.0;
    for (i, slot) in a.iter_mut().enumerate().take(nn2 + 1).skip(1) {
        *slot = normal_quantile((i as f64 - 0.375) / an25);
        summ2 += *slot * *slot;
    }
    summ2 *= 2.0;
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / an.sqrt();

    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];

    let a1 = poly(&C1, rsn) - a[1] / ssumm2;
    let (i1, fac) = if n > 5 {
        let a2 = -a[2] / ssumm2 + poly(&C2, rsn);
        let fac = ((summ2 - 2.0 * a[1] * a[1] - 2.0 * a[2] * a[2])
            / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
            .sqrt();
        a[2] = a2;
        (3, fac)
    } else {
        let fac = ((summ2 - 2.0 * a[1] * a[1]) / (1.0 - 2.0 * a1 * a1)).sqrt();
        (2, fac)
    };
    a[1] = a1;
    for v in a.iter_mut().take(nn2 + 1).skip(i1) {
        *v /= -fac;
    }
}

/// Horner evaluation with `cc[0]` the constant term.
fn poly(cc: &[f64], x: f64) -> f64 {
    let nord = cc.len();
    let mut ret = cc[0];
    if nord > 1 {
        let mut p = x * cc[nord - 1];
        for j in (1..nord - 1).rev() {
            p = (p + cc[j]) * x;
        }
        ret += p;
    }
    ret
}

/// P-value of `W` under the null, via Royston's transformation; the `n = 3`
/// case has an exact arcsine form.
fn p_value(w: f64, n: usize) -> f64 {
    if w >= 1.0 {
        return 1.0;
    }
    if w <= 0.0 {
        return 0.0;
    }
    if n == 3 {
        let pi6 = 6.0 / std::f64::consts::PI;
        let stqr = std::f64::consts::FRAC_PI_3;
        return (pi6 * (w.sqrt().asin() - stqr)).clamp(0.0, 1.0);
    }

    let an = n as f64;
    let y = (1.0 - w).ln();

    const G: [f64; 2] = [-2.273, 0.459];
    const C3: [f64; 4] = [0.544, -0.39978, 0.025054, -0.0006714];
    const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
    const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
    const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];

    let (y_std, m, s) = if n <= 11 {
        let gamma = poly(&G, an);
        if y >= gamma {
            return 1e-99;
        }
        (-((gamma - y).ln()), poly(&C3, an), poly(&C4, an).exp())
    } else {
        let xx = an.ln();
        (y, poly(&C5, xx), poly(&C6, xx).exp())
    };
    1.0 - normal_cdf((y_std - m) / s)
}

/// Standard normal quantile, Acklam's rational approximation.
#[allow(clippy::excessive_precision)]
fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if (p - 0.5).abs() < 1e-15 {
        return 0.0;
    }

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

    if p > P_LOW && p < 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        let num = (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q;
        let den = ((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0;
        return num / den;
    }
    let (q, sign) = if p < P_LOW {
        ((-2.0 * p.ln()).sqrt(), 1.0)
    } else {
        ((-2.0 * (1.0 - p).ln()).sqrt(), -1.0)
    };
    let num = ((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5];
    let den = (((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0;
    sign * num / den
}

/// Standard normal CDF via the Abramowitz-Stegun 7.1.26 erf approximation.
fn normal_cdf(x: f64) -> f64 {
    const A1: f64 = 0.254829592;
    const A2: f64 = -0.284496736;
    const A3: f64 = 1.421413741;
    const A4: f64 = -1.453152027;
    const A5: f64 = 1.061405429;
    const P: f64 = 0.3275911;

    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x_abs = (x * std::f64::consts::FRAC_1_SQRT_2).abs();
    let t = 1.0 / (1.0 + P * x_abs);
    let poly = ((((A5 * t + A4) * t + A3) * t + A2) * t + A1) * t;
    let erf = sign * (1.0 - poly * (-x_abs * x_abs).exp());
    0.5 * (1.0 + erf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rel(a: f64, b: f64) -> f64 {
        (a / b - 1.0).abs()
    }

    #[test]
    fn matches_reference_values_n12() {
        let x = [
            0.139, 0.157, 0.175, 0.256, 0.344, 0.413, 0.503, 0.577, 0.614, 0.655, 0.954, 1.392,
        ];
        let (w, p) = shapiro_wilk(&x).unwrap();
        assert_abs_diff_eq!(w, 0.881157749976, epsilon = 2e-5);
        assert!(rel(p, 9.069262854725e-2) < 1e-3, "p = {p}");
    }

    #[test]
    fn matches_reference_values_n20() {
        let x: Vec<f64> = (1..=20).map(f64::from).collect();
        let (w, p) = shapiro_wilk(&x).unwrap();
        assert_abs_diff_eq!(w, 0.960375183243, epsilon = 2e-5);
        assert!(rel(p, 0.5513717457917) < 1e-3, "p = {p}");
    }

    #[test]
    fn matches_reference_values_n8() {
        let x = [38.7, 41.5, 43.8, 44.5, 45.5, 46.0, 47.7, 58.0];
        let (w, p) = shapiro_wilk(&x).unwrap();
        assert_abs_diff_eq!(w, 0.872973200755, epsilon = 2e-5);
        assert!(rel(p, 0.1611316444028) < 1e-3, "p = {p}");
    }

    #[test]
    fn matches_reference_values_n7() {
        let x = [6.0, 1.0, -4.0, 8.0, -2.0, 5.0, 0.0];
        let (w, p) = shapiro_wilk(&x).unwrap();
        assert_abs_diff_eq!(w, 0.953475858537, epsilon = 2e-5);
        assert!(rel(p, 0.7611937806750) < 1e-3, "p = {p}");
    }

    #[test]
    fn matches_reference_values_n3() {
        let (w, p) = shapiro_wilk(&[1.0, 2.0, 10.0]).unwrap();
        assert_abs_diff_eq!(w, 0.832191780822, epsilon = 1e-9);
        assert!(rel(p, 0.1939175214815) < 1e-6, "p = {p}");
    }

    #[test]
    fn input_order_is_irrelevant() {
        let sorted = [1.0, 2.0, 3.5, 5.0, 8.0, 13.0, 21.5];
        let shuffled = [8.0, 1.0, 21.5, 3.5, 13.0, 2.0, 5.0];
        assert_eq!(shapiro_wilk(&sorted).unwrap(), shapiro_wilk(&shuffled).unwrap());
    }

    #[test]
    fn affine_invariance() {
        let x = [0.3, -1.2, 0.8, 2.1, -0.4, 0.0, 1.5, -2.2, 0.9, 0.1];
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v + 100.0).collect();
        let (wx, px) = shapiro_wilk(&x).unwrap();
        let (wy, py) = shapiro_wilk(&y).unwrap();
        assert_abs_diff_eq!(wx, wy, epsilon = 1e-12);
        assert_abs_diff_eq!(px, py, epsilon = 1e-12);
    }

    #[test]
    fn outputs_stay_in_unit_interval() {
        let near_normal: Vec<f64> = (0..100)
            .map(|i| normal_quantile((i as f64 + 0.5) / 100.0))
            .collect();
        let (w, p) = shapiro_wilk(&near_normal).unwrap();
        assert!(w > 0.99 && w <= 1.0);
        assert!(p > 0.9 && p <= 1.0);

        // Heavily right-skewed; decisively rejected even though W stays
        // moderate for a smooth monotone sample.
        let skewed: Vec<f64> = (0..100).map(|i| ((i + 1) as f64).powi(4)).collect();
        let (w2, p2) = shapiro_wilk(&skewed).unwrap();
        assert!(w2 > 0.0 && w2 < 0.9, "W = {w2}");
        assert!(p2 >= 0.0 && p2 < 1e-6, "p = {p2}");
    }

    #[test]
    fn rejects_bad_samples() {
        assert!(matches!(
            shapiro_wilk(&[1.0, 2.0]),
            Err(Error::SampleSizeOutOfRange { n: 2, .. })
        ));
        let big = vec![0.0; 5001];
        assert!(matches!(
            shapiro_wilk(&big),
            Err(Error::SampleSizeOutOfRange { n: 5001, .. })
        ));
        assert!(matches!(
            shapiro_wilk(&[4.2, 4.2, 4.2, 4.2]),
            Err(Error::ZeroVarianceSample)
        ));
        assert!(matches!(
            shapiro_wilk(&[1.0, f64::NAN, 2.0]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn quantile_spot_values() {
        assert_eq!(normal_quantile(0.5), 0.0);
        assert!((normal_quantile(0.975) - 1.959963984540054).abs() < 1e-6);
        assert!((normal_quantile(0.01) + 2.3263478740408408).abs() < 1e-6);
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-9);
        assert!((normal_cdf(1.96) - 0.975).abs() < 1e-4);
    }
}
