//! Reproducing kernel of `PW_b²(g, ℝ)` and the density functionals used in
//! the necessary sampling conditions.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::wilson::{modulation, BandwidthSeq};
use crate::window::Window;

/// Evaluates `k(x, y) = Σ_n Σ_{l ≤ b(n)} ψ_{n,l}(x)·ψ_{n,l}(y)`.
#[derive(Debug, Clone)]
pub struct KernelEvaluator<T: Scalar> {
    pub window: Window<T>,
    pub bandwidths: BandwidthSeq,
}

impl<T: Scalar> KernelEvaluator<T> {
    pub fn new(window: Window<T>, bandwidths: BandwidthSeq) -> Self {
        Self { window, bandwidths }
    }

    pub fn kernel(&self, x: T, y: T) -> T {
        let g = &self.window;
        let m = g.half_width();
        let two = T::lit(2.0);
        let half = T::lit(0.5);
        let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
        let mut sum = T::zero();

        let p_lo = (lo - m).floor().to_i64().unwrap_or(0);
        let p_hi = (hi + m).ceil().to_i64().unwrap_or(-1);
        for p in p_lo..=p_hi {
            let c = T::from_int(p);
            sum = sum + g.eval(x - c) * g.eval(y - c);
        }

        let n_lo = (two * (lo - m)).floor().to_i64().unwrap_or(0);
        let n_hi = (two * (hi + m)).ceil().to_i64().unwrap_or(-1);
        for n in n_lo..=n_hi {
            let c = T::from_int(n) * half;
            let gx = g.eval(x - c);
            let gy = g.eval(y - c);
            if gx == T::zero() || gy == T::zero() {
                continue;
            }
            let gg = gx * gy;
            for l in 1..=self.bandwidths.get(n) {
                sum = sum + modulation(n, l, x) * modulation(n, l, y) * gg;
            }
        }
        sum
    }

    /// Minimum of `k(x, x)` over `x ∈ [0, 1)` sampled with `grid_step`.
    pub fn diag_min(&self, grid_step: T) -> Result<T> {
        if !(grid_step > T::zero()) {
            return Err(Error::BadGridStep(grid_step.to_f64_lossy()));
        }
        let n = (T::one() / grid_step).ceil().to_usize().unwrap_or(0);
        Ok((0..n)
            .map(|i| {
                let x = grid_step * T::from_int(i as i64);
                self.kernel(x, x)
            })
            .fold(T::infinity(), T::min))
    }
}

pub fn kernel<T: Scalar>(ke: &KernelEvaluator<T>, x: T, y: T) -> T {
    ke.kernel(x, y)
}

pub fn kernel_diag_min<T: Scalar>(ke: &KernelEvaluator<T>, grid_step: T) -> Result<T> {
    ke.diag_min(grid_step)
}

/// Lower bound `⌈β - α - 2m⌉ + Σ_{n/2 ∈ [α+m, β-m]} b(n)` on the number of
/// samples any sampling set must place in `(α, β)`.
pub fn necessary_count<T: Scalar>(interval: (T, T), b: &BandwidthSeq, m: T) -> Result<u64> {
    let (alpha, beta) = interval;
    let two = T::lit(2.0);
    if !(beta > alpha) || beta - alpha < two * m {
        return Err(Error::IntervalTooShort(alpha.to_f64_lossy(), beta.to_f64_lossy(), (two * m).to_f64_lossy()));
    }
    let translates = (beta - alpha - two * m).ceil().to_u64().unwrap_or(0);
    let lo = alpha + m;
    let hi = beta - m;
    let eps = T::epsilon() * T::lit(16.0) * lo.abs().max(hi.abs()).max(T::one());
    let n_lo = (two * (lo - eps)).ceil().to_i64().unwrap_or(0);
    let n_hi = (two * (hi + eps)).floor().to_i64().unwrap_or(-1);
    let modulated: u64 = (n_lo..=n_hi).map(|n| b.get(n) as u64).sum();
    Ok(translates + modulated)
}

/// Windowed bandwidth average `(1/2r)·Σ_{n/2 ∈ [x-r, x+r]} b(n)`.
pub fn average_bandwidth<T: Scalar>(b: &BandwidthSeq, x: T, r: T) -> Result<T> {
    if !(r > T::zero()) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    let two = T::lit(2.0);
    let n_lo = (two * (x - r)).ceil().to_i64().unwrap_or(0);
    let n_hi = (two * (x + r)).floor().to_i64().unwrap_or(-1);
    let total: u64 = (n_lo..=n_hi).map(|n| b.get(n) as u64).sum();
    Ok(T::lit(total as f64) / (two * r))
}

/// Finite-radius estimate of the lower Beurling density,
/// `inf_x #(Λ ∩ [x-r, x+r]) / 2r`, over centres whose window fits inside the
/// hull of `points` (or the hull midpoint when no window fits).
pub fn beurling_lower_density<T: Scalar>(points: &[T], r: T) -> Result<T> {
    if points.is_empty() {
        return Err(Error::InvalidParameter("empty point set".into()));
    }
    if !(r > T::zero()) {
        return Err(Error::InvalidParameter(format!("radius must be positive, got {r}")));
    }
    if points.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("points must be sorted".into()));
    }
    let first = points[0];
    let last = points[points.len() - 1];
    let count = |c: T| {
        let a = points.partition_point(|&p| p < c - r);
        let b = points.partition_point(|&p| p <= c + r);
        b - a
    };
    let lo = first + r;
    let hi = last - r;
    if lo > hi {
        let c = (first + last) * T::lit(0.5);
        return Ok(T::lit(count(c) as f64) / (T::lit(2.0) * r));
    }
    // The count is piecewise constant in the centre with breakpoints p ± r;
    // probing every piece's midpoint finds the infimum.
    let mut breaks: Vec<T> = points
        .iter()
        .flat_map(|&p| [p - r, p + r])
        .filter(|&c| c > lo && c < hi)
        .collect();
    breaks.push(lo);
    breaks.push(hi);
    breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite points"));
    breaks.dedup();
    let mut best = usize::MAX;
    for w in breaks.windows(2) {
        best = best.min(count((w[0] + w[1]) * T::lit(0.5)));
    }
    best = best.min(count(lo)).min(count(hi));
    Ok(T::lit(best as f64) / (T::lit(2.0) * r))
}
