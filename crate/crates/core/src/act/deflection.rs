use super::ActError;
use crate::epa::StateVector9;
use crate::Scalar;

/// Per-slot weights of the deflection norm, ordered like [`StateVector9`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeflectionWeights<T>([T; 9]);

impl<T: Scalar> DeflectionWeights<T> {
    pub fn new(w: [T; 9]) -> Result<Self, ActError> {
        if let Some(i) = w.iter().position(|&x| !(x > T::zero()) || !x.is_finite()) {
            return Err(ActError::Weights(format!(
                "weight {i} must be finite and strictly positive, got {}",
                w[i]
            )));
        }
        Ok(Self(w))
    }

    pub fn ones() -> Self {
        Self([T::one(); 9])
    }

    pub fn as_array(&self) -> &[T; 9] {
        &self.0
    }

    pub fn scaled(&self, s: T) -> Result<Self, ActError> {
        Self::new(self.0.map(|w| w * s))
    }
}

impl<T: Scalar> Default for DeflectionWeights<T> {
    fn default() -> Self {
        Self::ones()
    }
}

/// Weighted squared distance `sum_i w_i (f_i - tau_i)^2`.
pub fn deflection<T: Scalar>(
    fundamentals: &StateVector9<T>,
    transients: &StateVector9<T>,
    w: &DeflectionWeights<T>,
) -> T {
    deflection_terms(fundamentals, transients, w)
        .into_iter()
        .sum()
}

/// Per-slot contributions to [`deflection`].
pub fn deflection_terms<T: Scalar>(
    fundamentals: &StateVector9<T>,
    transients: &StateVector9<T>,
    w: &DeflectionWeights<T>,
) -> [T; 9] {
    let mut out = [T::zero(); 9];
    for i in 0..9 {
        let d = fundamentals[i] - transients[i];
        out[i] = w.0[i] * d * d;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::epa::Role;
    use proptest::prelude::*;

    fn sv(v: [f64; 9]) -> StateVector9<f64> {
        StateVector9::new(v, Role::Fundamental)
    }

    #[test]
    fn zero_when_equal() {
        let f = sv([1.0, 2.0, 3.0, -1.0, 0.0, 0.5, 4.0, -4.0, 0.1]);
        assert_eq!(deflection(&f, &f, &DeflectionWeights::ones()), 0.0);
    }

    #[test]
    fn unit_offset() {
        let f = sv([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let t = sv([0.0; 9]);
        assert_eq!(deflection(&f, &t, &DeflectionWeights::ones()), 1.0);
    }

    #[test]
    fn rejects_non_positive_weights() {
        let mut w = [1.0f64; 9];
        w[4] = 0.0;
        assert!(DeflectionWeights::new(w).is_err());
        w[4] = -1.0;
        assert!(DeflectionWeights::new(w).is_err());
        w[4] = f64::NAN;
        assert!(DeflectionWeights::new(w).is_err());
    }

    proptest! {
        #[test]
        fn non_negative_and_separable(
            f in prop::array::uniform9(-4.3f64..4.3),
            t in prop::array::uniform9(-4.3f64..4.3),
            w in prop::array::uniform9(0.01f64..5.0),
        ) {
            let w = DeflectionWeights::new(w).unwrap();
            let d = deflection(&sv(f), &sv(t), &w);
            prop_assert!(d >= 0.0);
            let mut single = 0.0;
            for i in 0..9 {
                single += w.as_array()[i] * (f[i] - t[i]).powi(2);
            }
            prop_assert!((d - single).abs() <= 1e-12 * (1.0 + d.abs()));
            if f != t {
                prop_assert!(d > 0.0);
            }
        }
    }
}
