//! Arctangent surrogate for the spike function's derivative.

use super::real::Real;

/// Surrogate derivative used in place of the Heaviside derivative during
/// backprop: `g(v) = (alpha/2) / (1 + (pi*alpha*v/2)^2)`, evaluated at
/// `v = membrane - threshold`.
pub fn surrogate_grad<S: Real>(v: S, alpha: S) -> S {
    let two = S::of(2.0);
    let z = S::of(std::f64::consts::PI) * alpha * v / two;
    (alpha / two) / (S::one() + z * z)
}

/// Smooth spike used by gradient checks: the antiderivative of
/// [`surrogate_grad`], shifted to (0, 1) with value 1/2 at threshold.
pub fn surrogate_spike<S: Real>(v: S, alpha: S) -> S {
    let z = S::of(std::f64::consts::PI) * alpha * v / S::of(2.0);
    S::of(std::f64::consts::FRAC_1_PI) * z.atan() + S::of(0.5)
}

pub const DEFAULT_ALPHA: f64 = 2.0;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_at_zero_is_half_alpha() {
        assert_eq!(surrogate_grad(0.0f64, 2.0), 1.0);
        assert_eq!(surrogate_grad(0.0f64, 4.0), 2.0);
    }

    #[test]
    fn even_symmetry() {
        for i in 0..200 {
            let v = (i as f64 - 100.0) * 0.07;
            assert_eq!(surrogate_grad(v, 2.0), surrogate_grad(-v, 2.0));
        }
    }

    #[test]
    fn grad_is_derivative_of_smooth_spike() {
        // central finite differences of the antiderivative
        let alpha = 2.0f64;
        let h = 1e-6;
        for i in 0..100 {
            let v = (i as f64 - 50.0) * 0.1;
            let fd = (surrogate_spike(v + h, alpha) - surrogate_spike(v - h, alpha)) / (2.0 * h);
            let g = surrogate_grad(v, alpha);
            assert!(
                (fd - g).abs() < 1e-6 * g.max(1.0),
                "v={v}: fd {fd} vs g {g}"
            );
        }
    }
}
