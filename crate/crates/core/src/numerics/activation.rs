use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::Matrix;

/// Elementwise nonlinearity applied after a dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Sigmoid,
    Relu,
    LeakyRelu { alpha: f64 },
}

impl Activation {
    /// Leaky ReLU with slope 0.1 on the negative side.
    pub const LEAKY: Activation = Activation::LeakyRelu { alpha: 0.1 };

    pub fn eval<T: Float>(self, z: T) -> T {
        match self {
            Activation::Linear => z,
            Activation::Sigmoid => sigmoid(z),
            Activation::Relu => z.max(T::zero()),
            Activation::LeakyRelu { alpha } => {
                if z > T::zero() {
                    z
                } else {
                    z * cast(alpha)
                }
            }
        }
    }

    /// Derivative with respect to the pre-activation `z`. The kink of the
    /// rectifiers takes the left-hand slope.
    pub fn derivative<T: Float>(self, z: T) -> T {
        match self {
            Activation::Linear => T::one(),
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (T::one() - s)
            }
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::LeakyRelu { alpha } => {
                if z > T::zero() {
                    T::one()
                } else {
                    cast(alpha)
                }
            }
        }
    }

    pub fn is_valid(self) -> bool {
        match self {
            Activation::LeakyRelu { alpha } => alpha > 0.0 && alpha.is_finite(),
            _ => true,
        }
    }

    /// Parses `linear`, `sigmoid`, `relu`, `leaky_relu` (α = 0.1) or
    /// `leaky_relu:<alpha>`.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear" => Some(Activation::Linear),
            "sigmoid" => Some(Activation::Sigmoid),
            "relu" => Some(Activation::Relu),
            "leaky_relu" | "leaky-relu" => Some(Activation::LEAKY),
            other => {
                let alpha = other
                    .strip_prefix("leaky_relu:")
                    .or_else(|| other.strip_prefix("leaky-relu:"))?
                    .parse::<f64>()
                    .ok()?;
                let act = Activation::LeakyRelu { alpha };
                act.is_valid().then_some(act)
            }
        }
    }
}

fn cast<T: Float>(v: f64) -> T {
    T::from(v).expect("activation constant representable")
}

fn sigmoid<T: Float>(z: T) -> T {
    // split on sign so exp never overflows
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

pub fn apply_activation<T: Float>(g: Activation, z: &Matrix<T>) -> Matrix<T> {
    z.map(|v| g.eval(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(values: &[f64]) -> Matrix<f64> {
        Matrix::new(1, values.len(), values.to_vec()).unwrap()
    }

    #[test]
    fn sigmoid_at_zero() {
        assert_eq!(Activation::Sigmoid.eval(0.0f64), 0.5);
    }

    #[test]
    fn linear_is_identity() {
        let out = apply_activation(Activation::Linear, &row(&[-3.0, 7.0]));
        assert_eq!(out.as_slice(), &[-3.0, 7.0]);
    }

    #[test]
    fn leaky() {
        let out = apply_activation(Activation::LeakyRelu { alpha: 0.1 }, &row(&[-10.0, 10.0]));
        assert_eq!(out.as_slice(), &[-1.0, 10.0]);
    }

    #[test]
    fn sigmoid_extremes_stay_finite() {
        let s: f64 = Activation::Sigmoid.eval(-800.0);
        assert!(s.is_finite() && s >= 0.0);
        assert_eq!(Activation::Sigmoid.eval(800.0f64), 1.0);
    }

    #[test]
    fn parse_names() {
        assert_eq!(Activation::parse("sigmoid"), Some(Activation::Sigmoid));
        assert_eq!(Activation::parse("leaky_relu:0.2"), Some(Activation::LeakyRelu { alpha: 0.2 }));
        assert_eq!(Activation::parse("leaky_relu:-1"), None);
        assert_eq!(Activation::parse("tanh"), None);
    }

    #[test]
    fn derivatives_match_differences() {
        for g in [Activation::Linear, Activation::Sigmoid, Activation::Relu, Activation::LEAKY] {
            for z in [-2.3, -0.4, 0.7, 3.1] {
                let h = 1e-6;
                let fd = (g.eval(z + h) - g.eval(z - h)) / (2.0 * h);
                assert!((fd - g.derivative(z)).abs() < 1e-8, "{g:?} at {z}");
            }
        }
    }

    proptest! {
        #[test]
        fn shape_preserved(rows in 0usize..5, cols in 1usize..5, z in -50.0f64..50.0) {
            let m = Matrix::new(rows, cols, vec![z; rows * cols]).unwrap();
            for g in [Activation::Linear, Activation::Sigmoid, Activation::Relu, Activation::LEAKY] {
                let out = apply_activation(g, &m);
                prop_assert_eq!(out.shape(), m.shape());
            }
            let s = Activation::Sigmoid.eval(z);
            // beyond |z| ≈ 36.7 the result rounds to 1 in double precision
            prop_assert!((0.0..=1.0).contains(&s));
            if z.abs() < 30.0 {
                prop_assert!(s > 0.0 && s < 1.0);
            }
        }
    }
}
