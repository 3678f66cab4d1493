//! Composite trapezoid rule.

use crate::scalar::Scalar;

/// Number of panels of width at most `step` covering a length `len`.
pub fn panel_count<T: Scalar>(len: T, step: T) -> usize {
    let raw = len / step;
    // 1 - 1e-9 absorbs representation error when `step` divides `len`.
    let n = (raw * T::lit(1.0 - 1e-9)).ceil().to_usize().unwrap_or(1);
    n.max(1)
}

/// Composite trapezoid rule of `f` on `[a, b]` with `n` equal panels.
pub fn trapezoid<T: Scalar>(f: impl Fn(T) -> T, a: T, b: T, n: usize) -> T {
    let h = (b - a) / T::from_int(n as i64);
    let interior: T = (1..n).map(|i| f(a + h * T::from_int(i as i64))).sum();
    h * (interior + (f(a) + f(b)) * T::lit(0.5))
}

/// Trapezoid rule on `[a, b]` with panel width at most `step`.
pub fn trapezoid_step<T: Scalar>(f: impl Fn(T) -> T, a: T, b: T, step: T) -> T {
    trapezoid(f, a, b, panel_count(b - a, step))
}
