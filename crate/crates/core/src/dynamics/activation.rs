use std::fmt;

/// Default sharpness of the smooth ReLU family.
pub const DEFAULT_SHARPNESS: f64 = 10.0;

/// Componentwise C¹ activation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Tanh,
    /// `(1/s) log(1 + e^{s x})`
    SmoothRelu { sharpness: f64 },
    /// `alpha x + (1/s) log(1 + e^{s x})`
    SmoothLeakyRelu { alpha: f64, sharpness: f64 },
}

impl Activation {
    pub fn smooth_relu() -> Self {
        Activation::SmoothRelu {
            sharpness: DEFAULT_SHARPNESS,
        }
    }

    pub fn smooth_leaky_relu(alpha: f64) -> Self {
        Activation::SmoothLeakyRelu {
            alpha,
            sharpness: DEFAULT_SHARPNESS,
        }
    }

    /// Returns a message when a parameter is out of range.
    pub fn check(&self) -> Result<(), String> {
        match *self {
            Activation::Tanh => Ok(()),
            Activation::SmoothRelu { sharpness } => check_sharpness(sharpness),
            Activation::SmoothLeakyRelu { alpha, sharpness } => {
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(format!("leaky slope alpha must lie in [0, 1], got {alpha}"));
                }
                check_sharpness(sharpness)
            }
        }
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            Activation::Tanh => z.tanh(),
            Activation::SmoothRelu { sharpness } => softplus(z, sharpness),
            Activation::SmoothLeakyRelu { alpha, sharpness } => alpha * z + softplus(z, sharpness),
        }
    }

    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::SmoothRelu { sharpness } => logistic(sharpness * z),
            Activation::SmoothLeakyRelu { alpha, sharpness } => alpha + logistic(sharpness * z),
        }
    }

    /// `(σ(z), σ'(z))` in one pass.
    #[inline]
    pub fn eval_with_derivative(&self, z: f64) -> (f64, f64) {
        match *self {
            Activation::Tanh => {
                let t = z.tanh();
                (t, 1.0 - t * t)
            }
            _ => (self.eval(z), self.derivative(z)),
        }
    }

    /// Global Lipschitz constant of σ.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            Activation::Tanh | Activation::SmoothRelu { .. } => 1.0,
            Activation::SmoothLeakyRelu { alpha, .. } => 1.0 + alpha,
        }
    }

    /// |σ(0)|
    pub fn value_at_zero(&self) -> f64 {
        self.eval(0.0).abs()
    }

    pub fn name(&self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::SmoothRelu { .. } => "smooth_relu",
            Activation::SmoothLeakyRelu { .. } => "smooth_leaky_relu",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Activation::Tanh => write!(f, "tanh"),
            Activation::SmoothRelu { sharpness } => write!(f, "smooth_relu(s={sharpness})"),
            Activation::SmoothLeakyRelu { alpha, sharpness } => {
                write!(f, "smooth_leaky_relu(alpha={alpha}, s={sharpness})")
            }
        }
    }
}

fn check_sharpness(s: f64) -> Result<(), String> {
    if s.is_finite() && s > 0.0 {
        Ok(())
    } else {
        Err(format!("sharpness must be positive and finite, got {s}"))
    }
}

/// `(1/s) log(1 + e^{s z})` without overflow.
#[inline]
fn softplus(z: f64, s: f64) -> f64 {
    let sz = s * z;
    (sz.max(0.0) + (-sz.abs()).exp().ln_1p()) / s
}

#[inline]
fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}
