//! Flow exponents and the constants derived from them.

use crate::error::{Error, Result};

/// Exponents of `u_t = det(D^2 u)^alpha / (1 + |grad u|^2)^(alpha beta)` in
/// dimension `n`.
///
/// The separation constant is normalised to `lambda = 1/(1 - n alpha)`, which
/// is also the exponent of the self-similar time factor `(1 + t)^lambda`.
/// `gamma = 1/(n alpha - 1) = -lambda` is the rescaling exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams {
    n: u32,
    alpha: f64,
    beta: f64,
    lambda: f64,
    gamma: f64,
}

impl FlowParams {
    pub fn new(n: u32, alpha: f64, beta: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidDimension { n });
        }
        if !alpha.is_finite() || f64::from(n) * alpha <= 1.0 {
            return Err(Error::InvalidExponent {
                name: "alpha",
                value: alpha,
            });
        }
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::InvalidExponent {
                name: "beta",
                value: beta,
            });
        }
        let n_alpha = f64::from(n) * alpha;
        Ok(Self {
            n,
            alpha,
            beta,
            lambda: 1.0 / (1.0 - n_alpha),
            gamma: 1.0 / (n_alpha - 1.0),
        })
    }

    /// Parameters with `beta` set so the normal speed is `K^alpha`.
    pub fn geometric(n: u32, alpha: f64) -> Result<Self> {
        let base = Self::new(n, alpha, 0.0)?;
        base.with_beta(base.geometric_beta())
    }

    pub fn with_beta(self, beta: f64) -> Result<Self> {
        Self::new(self.n, self.alpha, beta)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `n * alpha`.
    pub fn n_alpha(&self) -> f64 {
        f64::from(self.n) * self.alpha
    }

    /// `1 - n alpha`, the exponent applied to `phi(0)` in the time factor.
    pub fn one_minus_n_alpha(&self) -> f64 {
        1.0 - self.n_alpha()
    }

    /// `|1 - n alpha| = n alpha - 1`.
    pub fn gap(&self) -> f64 {
        self.n_alpha() - 1.0
    }

    /// `(n + 2 - 1/alpha) / 2`.
    pub fn geometric_beta(&self) -> f64 {
        (f64::from(self.n) + 2.0 - 1.0 / self.alpha) / 2.0
    }

    /// True when `alpha >= 2/n`, i.e. `gamma <= 1`.
    pub fn alpha_at_least_two_over_n(&self) -> bool {
        self.n_alpha() >= 2.0
    }

    /// True when `alpha <= 2/n`, i.e. `gamma >= 1`.
    pub fn alpha_at_most_two_over_n(&self) -> bool {
        self.n_alpha() <= 2.0
    }

    pub(crate) fn require_planar(&self) -> Result<()> {
        if self.n == 2 {
            Ok(())
        } else {
            Err(Error::UnsupportedDimension { n: self.n })
        }
    }
}

pub fn make_params(n: u32, alpha: f64, beta: f64) -> Result<FlowParams> {
    FlowParams::new(n, alpha, beta)
}

pub fn geometric_beta(params: &FlowParams) -> f64 {
    params.geometric_beta()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn derived_constants() {
        let p = make_params(2, 1.0, 0.0).unwrap();
        assert_eq!(p.lambda(), -1.0);
        assert_eq!(p.gamma(), 1.0);

        let p = make_params(2, 0.75, 0.0).unwrap();
        assert_eq!(p.lambda(), -2.0);
        assert_eq!(p.gamma(), 2.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            make_params(2, 0.5, 0.0),
            Err(Error::InvalidExponent { name: "alpha", .. })
        ));
        assert!(matches!(
            make_params(2, 0.4, 0.0),
            Err(Error::InvalidExponent { name: "alpha", .. })
        ));
        assert!(matches!(
            make_params(2, 1.0, -0.1),
            Err(Error::InvalidExponent { name: "beta", .. })
        ));
        assert!(matches!(
            make_params(1, 3.0, 0.0),
            Err(Error::InvalidDimension { n: 1 })
        ));
        assert!(make_params(2, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn geometric_beta_values() {
        assert_eq!(geometric_beta(&make_params(2, 1.0, 0.0).unwrap()), 1.5);
        let b = geometric_beta(&make_params(2, 0.75, 0.0).unwrap());
        assert!((b - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(geometric_beta(&make_params(3, 1.0, 0.0).unwrap()), 2.0);
        let g = FlowParams::geometric(2, 1.0).unwrap();
        assert_eq!(g.beta(), 1.5);
    }

    #[test]
    fn overlap_at_two_over_n() {
        let p = make_params(2, 1.0, 0.0).unwrap();
        assert!(p.alpha_at_least_two_over_n() && p.alpha_at_most_two_over_n());
    }

    proptest! {
        #[test]
        fn lambda_normalisation(a in 0.0f64..1.0, n in 2u32..5) {
            let lo = 1.0 / f64::from(n);
            let alpha = lo + (10.0 - lo) * a;
            prop_assume!(f64::from(n) * alpha > 1.0);
            let p = make_params(n, alpha, 0.0).unwrap();
            prop_assert!(p.lambda() < 0.0 && p.gamma() > 0.0);
            prop_assert!((p.lambda() * (p.n_alpha() - 1.0) + 1.0).abs() <= 1e-14);
            prop_assert_eq!(p.gamma(), -p.lambda());
        }
    }
}
