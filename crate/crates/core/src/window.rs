//! Generating windows for Wilson bases.
//!
//! A window is a real, even function supported in `[-m, m]`. It is stored as a
//! closed-form evaluator together with the constants needed by the sampling
//! bounds: the half width `m`, `‖g‖∞` and `‖g'‖∞`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

type Eval<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Named windows selectable from configuration files and the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    /// `√2·cos(πx)` on `[-1/2, 1/2]`.
    #[default]
    Cosine,
}

impl WindowKind {
    pub fn build<T: Scalar>(self) -> Window<T> {
        match self {
            WindowKind::Cosine => Window::cosine(),
        }
    }
}

/// Compactly supported, even, real window.
#[derive(Clone)]
pub struct Window<T> {
    name: String,
    half_width: T,
    sup_norm: T,
    deriv_sup_norm: T,
    eval: Eval<T>,
    deriv: Eval<T>,
}

impl<T: Scalar> fmt::Debug for Window<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Window")
            .field("name", &self.name)
            .field("half_width", &self.half_width)
            .field("sup_norm", &self.sup_norm)
            .field("deriv_sup_norm", &self.deriv_sup_norm)
            .finish()
    }
}

impl<T: Scalar> Window<T> {
    /// Builds a user window. `eval` and `deriv` are called only inside
    /// `[-half_width, half_width]`; outside the window reads as zero.
    pub fn new<F, G>(
        name: impl Into<String>,
        half_width: T,
        sup_norm: T,
        deriv_sup_norm: T,
        eval: F,
        deriv: G,
    ) -> Result<Self>
    where
        F: Fn(T) -> T + Send + Sync + 'static,
        G: Fn(T) -> T + Send + Sync + 'static,
    {
        if !(half_width > T::zero()) || !half_width.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "window half width must be positive, got {half_width}"
            )));
        }
        if sup_norm < T::zero() || deriv_sup_norm < T::zero() {
            return Err(Error::InvalidParameter("window norms must be non-negative".into()));
        }
        Ok(Self {
            name: name.into(),
            half_width,
            sup_norm,
            deriv_sup_norm,
            eval: Arc::new(eval),
            deriv: Arc::new(deriv),
        })
    }

    /// `g(x) = √2·cos(πx)·χ[-1/2, 1/2](x)`.
    pub fn cosine() -> Self {
        let sqrt2 = T::SQRT_2();
        let pi = T::PI();
        Self {
            name: "cosine".into(),
            half_width: T::lit(0.5),
            sup_norm: sqrt2,
            deriv_sup_norm: sqrt2 * pi,
            eval: Arc::new(move |x: T| sqrt2 * (pi * x).cos()),
            // One-sided interior derivative at ±1/2.
            deriv: Arc::new(move |x: T| -sqrt2 * pi * (pi * x).sin()),
        }
    }

    /// The identically zero function, posing as a window of half width 1/2.
    pub fn zero() -> Self {
        Self {
            name: "zero".into(),
            half_width: T::lit(0.5),
            sup_norm: T::zero(),
            deriv_sup_norm: T::zero(),
            eval: Arc::new(|_| T::zero()),
            deriv: Arc::new(|_| T::zero()),
        }
    }

    /// `c·g`, with the stored norms scaled accordingly.
    pub fn scaled(&self, c: T) -> Self {
        let eval = Arc::clone(&self.eval);
        let deriv = Arc::clone(&self.deriv);
        Self {
            name: format!("{}*{}", c, self.name),
            half_width: self.half_width,
            sup_norm: self.sup_norm * c.abs(),
            deriv_sup_norm: self.deriv_sup_norm * c.abs(),
            eval: Arc::new(move |x| c * eval(x)),
            deriv: Arc::new(move |x| c * deriv(x)),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Half width `m` of the support `[-m, m]`.
    #[inline]
    pub fn half_width(&self) -> T {
        self.half_width
    }

    #[inline]
    pub fn sup_norm(&self) -> T {
        self.sup_norm
    }

    #[inline]
    pub fn deriv_sup_norm(&self) -> T {
        self.deriv_sup_norm
    }

    #[inline]
    pub fn eval(&self, x: T) -> T {
        if x.abs() > self.half_width {
            T::zero()
        } else {
            (self.eval)(x)
        }
    }

    #[inline]
    pub fn eval_deriv(&self, x: T) -> T {
        if x.abs() > self.half_width {
            T::zero()
        } else {
            (self.deriv)(x)
        }
    }

    /// `D = 4m·max{2π‖g‖∞, ‖g'‖∞}`.
    pub fn sufficiency_constant(&self) -> T {
        let four = T::lit(4.0);
        let two_pi = T::lit(2.0) * T::PI();
        four * self.half_width * (two_pi * self.sup_norm).max(self.deriv_sup_norm)
    }

    /// Largest deviation from the Wilson orthonormality identity
    /// `Σ_n g(x - k - n/2)·g(x - n/2) = 2δ_{k0}` over `x` on a grid of one
    /// period `[0, 1/2)` and `|k| ≤ k_range`.
    pub fn orthonormality_defect(&self, k_range: usize, grid_step: T) -> Result<T> {
        let half = T::lit(0.5);
        if !(grid_step > T::zero()) || grid_step > half {
            return Err(Error::BadGridStep(grid_step.to_f64_lossy()));
        }
        let steps = half / grid_step;
        let n_steps = steps.round();
        if (steps - n_steps).abs() > T::lit(1e-6) * steps.max(T::one()) {
            return Err(Error::BadGridStep(grid_step.to_f64_lossy()));
        }
        let needed = (T::lit(2.0) * self.half_width).ceil().to_usize().unwrap_or(usize::MAX);
        if k_range < needed {
            return Err(Error::KRangeTooSmall { given: k_range, needed });
        }
        let n_steps = n_steps.to_usize().unwrap_or(0);
        let two = T::lit(2.0);
        let m = self.half_width;
        let k_range = k_range as i64;
        let mut worst = T::zero();
        for i in 0..n_steps {
            let x = grid_step * T::from_int(i as i64);
            // n with |x - n/2| ≤ m; translates outside contribute zero.
            let n_lo = (two * (x - m)).floor().to_i64().unwrap_or(0);
            let n_hi = (two * (x + m)).ceil().to_i64().unwrap_or(0);
            for k in -k_range..=k_range {
                let kt = T::from_int(k);
                let mut sum = T::zero();
                for n in n_lo..=n_hi {
                    let shift = T::from_int(n) * half;
                    sum = sum + self.eval(x - kt - shift) * self.eval(x - shift);
                }
                let target = if k == 0 { two } else { T::zero() };
                worst = worst.max((sum - target).abs());
            }
        }
        Ok(worst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cosine_values() {
        let g = Window::<f64>::cosine();
        assert_abs_diff_eq!(g.eval(0.0), std::f64::consts::SQRT_2, epsilon = 1e-15);
        assert_eq!(g.eval(0.75), 0.0);
        assert_abs_diff_eq!(g.eval(0.25), 1.0, epsilon = 1e-15);
        assert_eq!(g.half_width(), 0.5);
        assert_abs_diff_eq!(g.deriv_sup_norm(), std::f64::consts::SQRT_2 * std::f64::consts::PI);
    }

    #[test]
    fn one_sided_derivative_at_support_edges() {
        let g = Window::<f64>::cosine();
        let s = std::f64::consts::SQRT_2 * std::f64::consts::PI;
        assert_abs_diff_eq!(g.eval_deriv(0.5), -s, epsilon = 1e-14);
        assert_abs_diff_eq!(g.eval_deriv(-0.5), s, epsilon = 1e-14);
        assert_eq!(g.eval_deriv(0.6), 0.0);
    }

    #[test]
    fn evenness_and_norm_bounds_on_grid() {
        let g = Window::<f64>::cosine();
        for i in 0..=2000 {
            let x = -1.0 + i as f64 * 1e-3;
            assert_eq!(g.eval(x), g.eval(-x));
            assert!(g.eval(x).abs() <= g.sup_norm() + 1e-15);
            assert!(g.eval_deriv(x).abs() <= g.deriv_sup_norm() + 1e-12);
        }
    }

    #[test]
    fn cosine_window_is_orthonormal_generator() {
        let g = Window::<f64>::cosine();
        let defect = g.orthonormality_defect(2, 1e-3).unwrap();
        assert!(defect <= 1e-12, "defect {defect}");
    }

    #[test]
    fn scaled_window_defect() {
        let g = Window::<f64>::cosine().scaled(2.0);
        let defect = g.orthonormality_defect(2, 1e-3).unwrap();
        assert_abs_diff_eq!(defect, 6.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_window_defect() {
        let g = Window::<f64>::zero();
        assert_eq!(g.orthonormality_defect(1, 0.01).unwrap(), 2.0);
    }

    #[test]
    fn defect_rejects_bad_arguments() {
        let g = Window::<f64>::cosine();
        assert!(matches!(
            g.orthonormality_defect(0, 1e-3),
            Err(Error::KRangeTooSmall { given: 0, needed: 1 })
        ));
        assert!(matches!(g.orthonormality_defect(2, 0.3), Err(Error::BadGridStep(_))));
        assert!(matches!(g.orthonormality_defect(2, -0.1), Err(Error::BadGridStep(_))));
    }

    #[test]
    fn sufficiency_constant_values() {
        let g = Window::<f64>::cosine();
        let d = g.sufficiency_constant();
        let pi = std::f64::consts::PI;
        assert_abs_diff_eq!(d, 4.0 * 2f64.sqrt() * pi, epsilon = 1e-12);
        assert!((d / pi - 5.66).abs() < 0.005);

        let w = Window::<f64>::new("flat", 0.5, 1.0 / (2.0 * pi), 1.0, |_| 0.0, |_| 0.0).unwrap();
        assert_abs_diff_eq!(w.sufficiency_constant(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn sufficiency_constant_is_monotone() {
        let base = |m: f64, s: f64, d: f64| {
            Window::<f64>::new("t", m, s, d, |_| 0.0, |_| 0.0).unwrap().sufficiency_constant()
        };
        let d0 = base(0.5, 1.0, 1.0);
        assert!(base(0.6, 1.0, 1.0) >= d0);
        assert!(base(0.5, 1.1, 1.0) >= d0);
        assert!(base(0.5, 1.0, 9.0) >= d0);
    }

    #[test]
    fn works_in_single_precision() {
        let g = Window::<f32>::cosine();
        assert!(g.orthonormality_defect(2, 1e-2).unwrap() < 1e-5);
    }
}
