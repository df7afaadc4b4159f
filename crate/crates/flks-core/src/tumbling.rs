//! Tumbling-rate model: the mean rate Lambda_0(y) with its positivity
//! bounds and the order-one perturbation Lambda_1(y).
//!
//! The built-in family is Lambda_0(y) = lambda0_bar * (1 - chi * tanh(y))
//! with Lambda_1(y) = -tanh(y). The perturbation slot is replaceable by a
//! custom bounded evaluator; custom evaluators declare their own sup bound
//! and are spot-checked against it on construction.

use std::sync::Arc;

use crate::error::{Error, Result};

/// Replaceable evaluator for the perturbation Lambda_1.
#[derive(Clone)]
pub enum Lambda1 {
    /// The paper's choice Lambda_1(y) = -tanh(y).
    MinusTanh,
    /// User-supplied bounded continuous evaluator with declared sup |Lambda_1|.
    Custom {
        eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        sup: f64,
    },
}

impl std::fmt::Debug for Lambda1 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Lambda1::MinusTanh => write!(f, "MinusTanh"),
            Lambda1::Custom { sup, .. } => write!(f, "Custom {{ sup: {sup} }}"),
        }
    }
}

/// Tumbling rates Lambda_0, Lambda_1 with bounds 0 < lambda_1 <= Lambda_0 <= lambda_2.
#[derive(Debug, Clone)]
pub struct TumblingModel {
    lambda0_bar: f64,
    chi: f64,
    lambda1: Lambda1,
}

impl TumblingModel {
    /// Model with the built-in tanh perturbation.
    ///
    /// Rejects lambda0_bar <= 0 and chi outside [0, 1); chi = 1 would make
    /// the lower bound lambda_1 vanish.
    pub fn new(lambda0_bar: f64, chi: f64) -> Result<Self> {
        Self::with_lambda1(lambda0_bar, chi, Lambda1::MinusTanh)
    }

    /// Model with a custom perturbation evaluator.
    pub fn with_lambda1(lambda0_bar: f64, chi: f64, lambda1: Lambda1) -> Result<Self> {
        if !(lambda0_bar > 0.0) || !lambda0_bar.is_finite() {
            return Err(Error::InvalidParameter {
                name: "lambda0_bar",
                reason: format!("must be positive and finite, got {lambda0_bar}"),
            });
        }
        if !(0.0..1.0).contains(&chi) {
            return Err(Error::InvalidParameter {
                name: "chi",
                reason: format!("must lie in [0, 1), got {chi}"),
            });
        }
        if let Lambda1::Custom { eval, sup } = &lambda1 {
            if !(*sup >= 0.0) || !sup.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "lambda1_sup",
                    reason: format!("declared sup must be a nonnegative finite value, got {sup}"),
                });
            }
            // Trust but verify: sample the declared bound.
            for k in -400..=400 {
                let y = k as f64 * 0.05;
                let val = eval(y);
                if !val.is_finite() || val.abs() > *sup + 1e-12 {
                    return Err(Error::InvalidParameter {
                        name: "lambda1",
                        reason: format!(
                            "custom evaluator violates declared bound at y = {y}: |{val}| > {sup}"
                        ),
                    });
                }
            }
        }
        Ok(Self {
            lambda0_bar,
            chi,
            lambda1,
        })
    }

    pub fn lambda0_bar(&self) -> f64 {
        self.lambda0_bar
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    /// Lambda_0(y) = lambda0_bar * (1 - chi * tanh(y)).
    pub fn lambda0(&self, y: f64) -> f64 {
        self.lambda0_bar * (1.0 - self.chi * y.tanh())
    }

    /// Lambda_1(y); -tanh(y) unless a custom evaluator was installed.
    pub fn lambda1(&self, y: f64) -> f64 {
        match &self.lambda1 {
            Lambda1::MinusTanh => -y.tanh(),
            Lambda1::Custom { eval, .. } => eval(y),
        }
    }

    /// sup over y of |Lambda_1(y)|.
    pub fn lambda1_sup(&self) -> f64 {
        match &self.lambda1 {
            Lambda1::MinusTanh => 1.0,
            Lambda1::Custom { sup, .. } => *sup,
        }
    }

    /// (lambda_1, lambda_2) = (lambda0_bar*(1-chi), lambda0_bar*(1+chi)).
    ///
    /// lambda_1 > 1 puts the equilibrium in the bounded regime; lambda_2 < 1
    /// in the diagonal blow-up regime.
    pub fn bounds(&self) -> (f64, f64) {
        (
            self.lambda0_bar * (1.0 - self.chi),
            self.lambda0_bar * (1.0 + self.chi),
        )
    }

    /// d/dy Lambda_0 at y = 0, used by the moderate-response drift formula.
    pub fn lambda0_prime_at_zero(&self) -> f64 {
        -self.lambda0_bar * self.chi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lambda0_examples() {
        let m = TumblingModel::new(1.0, 0.5).unwrap();
        assert_eq!(m.lambda0(0.0), 1.0);
        let c = TumblingModel::new(2.0, 0.0).unwrap();
        assert_eq!(c.lambda0(-3.7), 2.0);
        assert_eq!(c.lambda0(12.0), 2.0);
        // tanh saturation: Lambda_0 -> lambda0_bar * (1 - chi).
        assert!((m.lambda0(20.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lambda1_examples() {
        let m = TumblingModel::new(1.0, 0.0).unwrap();
        assert_eq!(m.lambda1(0.0), 0.0);
        assert!((m.lambda1(20.0) + 1.0).abs() < 1e-15);
        for y in [0.3, 1.7, 4.0] {
            assert_eq!(m.lambda1(-y), -m.lambda1(y));
        }
    }

    #[test]
    fn bounds_examples() {
        let blow_up = TumblingModel::new(0.5, 0.0).unwrap();
        assert_eq!(blow_up.bounds(), (0.5, 0.5));
        let bounded = TumblingModel::new(2.0, 0.0).unwrap();
        assert_eq!(bounded.bounds(), (2.0, 2.0));
        let mixed = TumblingModel::new(1.0, 0.5).unwrap();
        assert_eq!(mixed.bounds(), (0.5, 1.5));
    }

    #[test]
    fn construction_rejects_out_of_range() {
        assert!(TumblingModel::new(0.0, 0.0).is_err());
        assert!(TumblingModel::new(-1.0, 0.0).is_err());
        assert!(TumblingModel::new(1.0, 1.0).is_err());
        assert!(TumblingModel::new(1.0, 1.2).is_err());
        assert!(TumblingModel::new(1.0, -0.1).is_err());
    }

    #[test]
    fn custom_lambda1_bound_is_checked() {
        let ok = TumblingModel::with_lambda1(
            1.0,
            0.0,
            Lambda1::Custom {
                eval: Arc::new(|y: f64| 0.5 * y.sin()),
                sup: 0.5,
            },
        );
        assert!(ok.is_ok());
        let bad = TumblingModel::with_lambda1(
            1.0,
            0.0,
            Lambda1::Custom {
                eval: Arc::new(|y: f64| y.sin()),
                sup: 0.5,
            },
        );
        assert!(bad.is_err());
    }

    proptest! {
        #[test]
        fn lambda0_within_bounds(
            lambda0_bar in 0.01f64..10.0,
            chi in 0.0f64..0.999,
            y in -50.0f64..50.0,
        ) {
            let m = TumblingModel::new(lambda0_bar, chi).unwrap();
            let (lo, hi) = m.bounds();
            let val = m.lambda0(y);
            prop_assert!(val >= lo - 1e-12 * lo.abs());
            prop_assert!(val <= hi + 1e-12 * hi.abs());
        }

        #[test]
        fn lambda0_even_composition(y in -20.0f64..20.0, chi in 0.0f64..0.9) {
            // lambda0(y; chi) = lambda0(-y; -chi) for the tanh family: evaluate
            // the mirrored expression directly since -chi is outside [0, 1).
            let m = TumblingModel::new(1.3, chi).unwrap();
            let mirrored = 1.3 * (1.0 - (-chi) * (-y as f64).tanh());
            prop_assert!((m.lambda0(y) - mirrored).abs() <= 1e-12);
        }
    }
}
