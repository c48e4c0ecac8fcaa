//! Named real functions used as rule ingredients (Wei's `f`, ABCD's `F`,
//! the DAWD weighting functions).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// A shareable `f64 -> f64` function carrying a printable name.
#[derive(Clone)]
pub struct RealFn {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl RealFn {
    pub fn new(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), f: Arc::new(f) }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// `(1 − u) / 2` on `[−1, 1]`.
    pub fn linear_decreasing() -> Self {
        Self::new("linear", |u| (1.0 - u) / 2.0)
    }

    /// `(1 + u) / 2` on `[−1, 1]`.
    pub fn linear_increasing() -> Self {
        Self::new("linear_increasing", |u| (1.0 + u) / 2.0)
    }

    /// `(1 − u³) / 2` on `[−1, 1]`.
    pub fn cubic_decreasing() -> Self {
        Self::new("cubic", |u| (1.0 - u * u * u) / 2.0)
    }

    /// `1 / (1 + exp(scale·x))` on the real line.
    pub fn logistic(scale: f64) -> Self {
        let name = if scale == 1.0 { "logistic".to_string() } else { format!("logistic:{scale}") };
        Self::new(name, move |x| 1.0 / (1.0 + (scale * x).exp()))
    }

    /// `1 / (x^a + 1)` for `x ≥ 1`, extended by `1/2` on `(−1, 1)` and by
    /// `F(x) = 1 − F(−x)` for `x ≤ −1`.
    pub fn power(a: f64) -> Self {
        Self::new(format!("power:{a}"), move |x| power_family(x, a))
    }

    /// Parses `linear`, `linear_increasing`, `cubic`, `logistic[:scale]` or `power:a`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (head, arg) = match spec.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (spec, None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            let a = a.ok_or_else(|| Error::InvalidRule(format!("function `{spec}` needs a parameter")))?;
            a.parse::<f64>()
                .map_err(|_| Error::InvalidRule(format!("bad parameter in function `{spec}`")))
        };
        match head {
            "linear" => Ok(Self::linear_decreasing()),
            "linear_increasing" => Ok(Self::linear_increasing()),
            "cubic" => Ok(Self::cubic_decreasing()),
            "logistic" => Ok(Self::logistic(if arg.is_some() { num(arg)? } else { 1.0 })),
            "power" => Ok(Self::power(num(arg)?)),
            _ => Err(Error::InvalidRule(format!("unknown function `{spec}`"))),
        }
    }
}

impl fmt::Debug for RealFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RealFn({})", self.name)
    }
}

pub(crate) fn power_family(x: f64, a: f64) -> f64 {
    if x >= 1.0 {
        1.0 / (x.powf(a) + 1.0)
    } else if x <= -1.0 {
        1.0 - 1.0 / ((-x).powf(a) + 1.0)
    } else {
        0.5
    }
}

/// Grid checks for a function meant to be decreasing and symmetric,
/// `g(−x) = 1 − g(x)`, on `[−range, range]`.
pub(crate) fn check_symmetric_decreasing(g: &RealFn, range: f64, strict: bool) -> Result<()> {
    const POINTS: usize = 201;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..POINTS {
        let x = -range + 2.0 * range * i as f64 / (POINTS - 1) as f64;
        let y = g.eval(x);
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::InvalidRule(format!("{} maps {x} to {y}, outside [0, 1]", g.name())));
        }
        if (g.eval(-x) - (1.0 - y)).abs() > 1e-9 {
            return Err(Error::InvalidRule(format!("{} is not symmetric at {x}", g.name())));
        }
        if let Some((px, py)) = prev {
            let bad = if strict { y >= py } else { y > py + 1e-12 };
            if bad {
                return Err(Error::InvalidRule(format!(
                    "{} is not decreasing between {px} and {x}",
                    g.name()
                )));
            }
        }
        prev = Some((x, y));
    }
    Ok(())
}
