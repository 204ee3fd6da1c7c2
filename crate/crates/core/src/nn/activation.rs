use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Elementwise non-linearity applied after a layer's affine map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
}

/// The discriminator leak used throughout.
pub const DEFAULT_LEAK: f64 = 0.2;

impl Activation {
    pub fn validate(self) -> Result<()> {
        match self {
            Activation::LeakyRelu(leak) if !(leak > 0.0 && leak < 1.0) => Err(Error::Config(
                format!("leaky_relu leak must lie in (0, 1), got {leak}"),
            )),
            _ => Ok(()),
        }
    }

    /// Rectifiers get He-scaled initial weights, everything else Xavier-scaled.
    pub fn is_rectifier(self) -> bool {
        matches!(self, Activation::Relu | Activation::LeakyRelu(_))
    }

    /// `true` when the derivative is continuous everywhere.
    pub fn is_smooth(self) -> bool {
        matches!(
            self,
            Activation::Identity | Activation::Tanh | Activation::Sigmoid
        )
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu(leak) => {
                if x > 0.0 {
                    x
                } else {
                    leak * x
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative with respect to the pre-activation.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(leak) => {
                if x > 0.0 {
                    1.0
                } else {
                    leak
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Sigmoid => {
                let s = sigmoid(x);
                s * (1.0 - s)
            }
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Elementwise derivative of `kind` at each pre-activation.
pub fn apply_activation_grad(kind: Activation, pre_activation: &Matrix) -> Matrix {
    pre_activation.map(|x| kind.derivative(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn derivative_values() {
        assert_eq!(Activation::Sigmoid.derivative(0.0), 0.25);
        assert_eq!(Activation::LeakyRelu(DEFAULT_LEAK).derivative(-3.0), 0.2);
        assert!(close(
            Activation::Tanh.derivative(1.0),
            0.419_974_341_614_026_1,
            1e-12
        ));
        assert_eq!(Activation::Relu.derivative(-1.0), 0.0);
    }

    #[test]
    fn relu_forward() {
        let pre = Matrix::row_vector(&[-1.0, 2.0]);
        assert_eq!(
            pre.map(|x| Activation::Relu.apply(x)).as_slice(),
            &[0.0, 2.0]
        );
    }

    #[test]
    fn derivatives_match_central_differences() {
        let kinds = [
            Activation::Identity,
            Activation::Tanh,
            Activation::Sigmoid,
            Activation::Relu,
            Activation::LeakyRelu(0.2),
        ];
        let h = 1e-6;
        for kind in kinds {
            for &x in &[-2.3, -0.4, 0.7, 1.9] {
                let fd = (kind.apply(x + h) - kind.apply(x - h)) / (2.0 * h);
                assert!(close(fd, kind.derivative(x), 1e-8), "{kind:?} at {x}");
            }
        }
    }

    #[test]
    fn leak_bounds() {
        assert!(Activation::LeakyRelu(0.0).validate().is_err());
        assert!(Activation::LeakyRelu(1.0).validate().is_err());
        assert!(Activation::LeakyRelu(0.2).validate().is_ok());
    }

    #[test]
    fn sigmoid_extremes_stay_finite() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
    }
}
