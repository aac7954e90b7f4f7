/// Digamma function for `x > 0`.
///
/// Shifts the argument up to at least 6 with `psi(x) = psi(x + 1) - 1/x`, then
/// evaluates the asymptotic series.
pub fn digamma(x: f64) -> f64 {
    debug_assert!(x > 0.0, "digamma argument must be positive, got {x}");
    let mut x = x;
    let mut acc = 0.0;
    while x < 6.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // Bernoulli terms B_2n / (2n x^2n) for n = 1..7, Horner form in 1/x^2.
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2
                        * (1.0 / 252.0
                            - inv2
                                * (1.0 / 240.0
                                    - inv2 * (1.0 / 132.0 - inv2 * (691.0 / 32760.0 - inv2 / 12.0))))));
    acc + x.ln() - 0.5 * inv - series
}

pub(crate) fn normalize(v: &mut [f64]) -> f64 {
    let sum: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= sum);
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

    #[test]
    fn digamma_at_one() {
        assert_abs_diff_eq!(digamma(1.0), -EULER_GAMMA, epsilon = 1e-12);
        assert_abs_diff_eq!(digamma(1.0), -0.5772156649, epsilon = 1e-9);
    }

    #[test]
    fn digamma_at_half() {
        let expected = -EULER_GAMMA - 2.0 * std::f64::consts::LN_2;
        assert_abs_diff_eq!(digamma(0.5), expected, epsilon = 1e-12);
    }

    #[test]
    fn digamma_recurrence() {
        for &x in &[0.01, 0.3, 1.7, 5.5, 6.0, 12.25, 300.0] {
            assert_abs_diff_eq!(digamma(x + 1.0) - digamma(x), 1.0 / x, epsilon = 1e-11);
        }
    }

    #[test]
    fn digamma_integers_are_harmonic() {
        let mut harmonic = 0.0;
        for n in 1..30 {
            let expected = harmonic - EULER_GAMMA;
            assert_abs_diff_eq!(digamma(n as f64), expected, epsilon = 1e-12);
            harmonic += 1.0 / n as f64;
        }
    }

    #[test]
    fn digamma_large_argument_is_log() {
        let x = 1e6;
        assert_abs_diff_eq!(digamma(x), x.ln() - 0.5 / x, epsilon = 1e-12);
    }
}
