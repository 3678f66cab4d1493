//! Sampling matrix assembly, least-squares reconstruction, quadrature
//! projection and the adaptive-weights (Neumann series) reconstruction.

use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, LeastSquares, SolveInfo};
use crate::quadrature::panel_count;
use crate::sampling::{CellWeights, SamplingSet};
use crate::scalar::Scalar;
use crate::wilson::{modulation, BasisSet, WilsonIndex};
use crate::window::Window;

/// Coefficient vector aligned with the columns of a [`BasisSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients<T> {
    values: Vec<T>,
}

impl<T: Scalar> Coefficients<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn zeros(len: usize) -> Self {
        Self { values: vec![T::zero(); len] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_inner(self) -> Vec<T> {
        self.values
    }

    pub fn norm(&self) -> T {
        self.values.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// `‖self - other‖ / ‖other‖`.
    pub fn relative_error(&self, other: &Self) -> T {
        let num: T = self.values.iter().zip(&other.values).map(|(&a, &b)| (a - b) * (a - b)).sum();
        num.sqrt() / other.norm()
    }

    fn check(&self, basis: &BasisSet) -> Result<()> {
        if self.len() != basis.len() {
            return Err(Error::DimensionMismatch { expected: basis.len(), got: self.len() });
        }
        Ok(())
    }

    /// Writes `i,n,l,value` rows (`i` is the zero-based column).
    pub fn write_csv<W: Write>(&self, basis: &BasisSet, mut out: W) -> Result<()> {
        self.check(basis)?;
        writeln!(out, "i,n,l,value")?;
        for (i, (idx, v)) in basis.indices().iter().zip(&self.values).enumerate() {
            writeln!(out, "{i},{},{},{v:?}", idx.n, idx.l)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(basis: &BasisSet, input: R) -> Result<Self> {
        let mut values = vec![T::zero(); basis.len()];
        let mut seen = vec![false; basis.len()];
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with('i')) {
                continue;
            }
            let bad = || Error::Config(format!("coefficient CSV line {}: '{line}'", lineno + 1));
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 4 {
                return Err(bad());
            }
            let i: usize = cols[0].parse().map_err(|_| bad())?;
            let n: i64 = cols[1].parse().map_err(|_| bad())?;
            let l: u32 = cols[2].parse().map_err(|_| bad())?;
            let v: f64 = cols[3].parse().map_err(|_| bad())?;
            if basis.get(i) != Some(WilsonIndex::new(n, l)) {
                return Err(Error::Config(format!("row {i} is ({n},{l}), which does not match the basis")));
            }
            values[i] = T::lit(v);
            seen[i] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Config(format!("coefficient for column {missing} missing")));
        }
        Ok(Self { values })
    }
}

/// Sample positions with their values.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledData<T> {
    points: Vec<T>,
    values: Vec<T>,
}

impl<T: Scalar> SampledData<T> {
    pub fn new(points: Vec<T>, values: Vec<T>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), got: values.len() });
        }
        if points.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { points, values })
    }

    /// Samples `f` on every point of `s`, in group order.
    pub fn sample(s: &SamplingSet<T>, f: impl Fn(T) -> T) -> Result<Self> {
        let points = s.points();
        let values = points.iter().map(|&x| f(x)).collect();
        Self::new(points, values)
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same points with `values + noise`.
    pub fn perturbed(&self, noise: &[T]) -> Result<Self> {
        if noise.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: noise.len() });
        }
        Self::new(self.points.clone(), self.values.iter().zip(noise).map(|(&a, &b)| a + b).collect())
    }
}

/// `U[j][i] = ψ_i(x_j)`.
pub fn design_matrix<T: Scalar>(points: &[T], basis: &BasisSet, w: &Window<T>) -> DenseMatrix<T> {
    let mut u = DenseMatrix::zeros(points.len(), basis.len());
    for (j, &x) in points.iter().enumerate() {
        let row = u.row_mut(j);
        basis.for_each_active(x, w, |col, v| row[col] = v);
    }
    u
}

/// `Σ_i c_i·ψ_i(x)`, visiting only elements supported at `x`.
pub fn synthesize_at<T: Scalar>(c: &[T], basis: &BasisSet, w: &Window<T>, x: T) -> T {
    let mut acc = T::zero();
    basis.for_each_active(x, w, |col, v| acc = acc + c[col] * v);
    acc
}

/// The function `x ↦ Σ_i c_i·ψ_i(x)`.
pub fn synthesize<'a, T: Scalar>(c: &'a Coefficients<T>, basis: &'a BasisSet, w: &'a Window<T>) -> impl Fn(T) -> T + 'a {
    move |x| synthesize_at(&c.values, basis, w, x)
}

/// Least-squares solution with the solver diagnostics.
#[derive(Debug, Clone)]
pub struct LsqResult<T> {
    pub coefficients: Coefficients<T>,
    pub info: SolveInfo,
}

/// Factors the sampling matrix once so that several sample vectors on the
/// same points can be reconstructed.
pub struct LsqReconstructor<T> {
    ls: LeastSquares<T>,
}

impl<T: Scalar> LsqReconstructor<T> {
    pub fn new(points: &[T], basis: &BasisSet, w: &Window<T>, tol: Option<T>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParameter("no samples".into()));
        }
        let u = design_matrix(points, basis, w);
        Ok(Self { ls: LeastSquares::factor(&u, tol)? })
    }

    pub fn info(&self) -> &SolveInfo {
        self.ls.info()
    }

    pub fn solve(&self, values: &[T]) -> Result<Coefficients<T>> {
        self.ls.solve(values).map(Coefficients::new)
    }
}

/// `c = U†y`.
pub fn reconstruct_lsq<T: Scalar>(d: &SampledData<T>, basis: &BasisSet, w: &Window<T>) -> Result<LsqResult<T>> {
    let r = LsqReconstructor::new(&d.points, basis, w, None)?;
    let coefficients = r.solve(&d.values)?;
    Ok(LsqResult { coefficients, info: r.info().clone() })
}

/// `⟨f, ψ_i⟩` by the trapezoid rule over each element's support, with
/// panels of width at most `step`.
pub fn project_quadrature<T: Scalar>(f: impl Fn(T) -> T, basis: &BasisSet, w: &Window<T>, step: T) -> Result<Coefficients<T>> {
    if !(step > T::zero()) {
        return Err(Error::InvalidParameter(format!("quadrature step must be positive, got {step}")));
    }
    let m = w.half_width();
    let panels = panel_count(T::lit(2.0) * m, step);
    let h = T::lit(2.0) * m / T::from_int(panels as i64);
    let weight = |t: usize| if t == 0 || t == panels { h * T::lit(0.5) } else { h };
    let mut c = vec![T::zero(); basis.len()];
    for &(p, col) in basis.translate_slots() {
        let start = T::from_int(p) - m;
        c[col] = (0..=panels)
            .map(|t| {
                let x = start + h * T::from_int(t as i64);
                weight(t) * f(x) * w.eval(x - T::from_int(p))
            })
            .sum();
    }
    let mut fg = vec![T::zero(); panels + 1];
    let mut xs = vec![T::zero(); panels + 1];
    for &(n, first, b) in basis.modulated_slots() {
        let centre = T::from_int(n) * T::lit(0.5);
        let start = centre - m;
        for t in 0..=panels {
            let x = start + h * T::from_int(t as i64);
            xs[t] = x;
            fg[t] = weight(t) * f(x) * w.eval(x - centre);
        }
        for l in 1..=b {
            c[first + l as usize - 1] = xs.iter().zip(&fg).map(|(&x, &v)| v * modulation(n, l, x)).sum();
        }
    }
    Ok(Coefficients::new(c))
}

/// Outcome of the adaptive-weights iteration.
#[derive(Debug, Clone, Serialize)]
pub struct AdaptiveResult<T> {
    #[serde(skip)]
    pub coefficients: Coefficients<T>,
    pub iterations: usize,
    /// `‖r_m‖` of every Neumann term, starting with `‖A f‖`.
    pub residual_history: Vec<f64>,
}

/// Sparse cell integrals `W[j] = {(i, ∫_{cell_j} ψ_i)}`.
fn cell_integrals<T: Scalar>(weights: &CellWeights<T>, basis: &BasisSet, w: &Window<T>, step: T) -> Vec<Vec<(usize, T)>> {
    let mut scratch = vec![T::zero(); basis.len()];
    let mut touched: Vec<usize> = Vec::new();
    weights
        .cells
        .iter()
        .map(|&(lo, hi)| {
            let panels = panel_count(hi - lo, step);
            let h = (hi - lo) / T::from_int(panels as i64);
            for t in 0..=panels {
                let x = lo + h * T::from_int(t as i64);
                let wt = if t == 0 || t == panels { h * T::lit(0.5) } else { h };
                basis.for_each_active(x, w, |col, v| {
                    if scratch[col] == T::zero() {
                        touched.push(col);
                    }
                    scratch[col] = scratch[col] + wt * v;
                });
            }
            let row = touched.iter().map(|&col| (col, scratch[col])).collect();
            for &col in &touched {
                scratch[col] = T::zero();
            }
            touched.clear();
            row
        })
        .collect()
}

/// Reconstruction by the Neumann series `f = Σ_m (I - A)^m A f` for the
/// operator `A f = P(Σ_j f(x_j)·χ_j)` built from the midpoint cells.
///
/// `A` acts on coefficient vectors as `W·U`, where `W[i][j]` is the
/// trapezoid integral of `ψ_i` over cell `j` with panels of width at most
/// `quad_step`. Stops after `iterations` terms, or earlier once the newest
/// term is below rounding level. Three consecutive increases of the
/// residual abort with [`Error::Diverged`].
pub fn adaptive_weights_reconstruct<T: Scalar>(
    d: &SampledData<T>,
    weights: &CellWeights<T>,
    basis: &BasisSet,
    w: &Window<T>,
    iterations: usize,
    quad_step: T,
) -> Result<AdaptiveResult<T>> {
    if weights.len() != d.len() {
        return Err(Error::DimensionMismatch { expected: d.len(), got: weights.len() });
    }
    if !(quad_step > T::zero()) {
        return Err(Error::InvalidParameter(format!("quadrature step must be positive, got {quad_step}")));
    }
    let wmat = cell_integrals(weights, basis, w, quad_step);
    let apply_w = |y: &[T]| {
        let mut out = vec![T::zero(); basis.len()];
        for (row, &yj) in wmat.iter().zip(y) {
            for &(col, v) in row {
                out[col] = out[col] + v * yj;
            }
        }
        out
    };
    let norm = |v: &[T]| v.iter().map(|&x| x * x).sum::<T>().sqrt();

    let mut r = apply_w(&d.values);
    let mut sum = r.clone();
    let mut history = vec![norm(&r).to_f64_lossy()];
    let mut rising = 0;
    let mut done = 1;
    while done < iterations.max(1) {
        let last = *history.last().expect("non-empty");
        if last == 0.0 || last <= T::epsilon().to_f64_lossy() * norm(&sum).to_f64_lossy() {
            break;
        }
        let samples: Vec<T> = d.points.iter().map(|&x| synthesize_at(&r, basis, w, x)).collect();
        let ar = apply_w(&samples);
        for (ri, ai) in r.iter_mut().zip(&ar) {
            *ri = *ri - *ai;
        }
        for (si, ri) in sum.iter_mut().zip(&r) {
            *si = *si + *ri;
        }
        let now = norm(&r).to_f64_lossy();
        history.push(now);
        done += 1;
        if !now.is_finite() {
            return Err(Error::Diverged { iterations: done, residual: now });
        }
        rising = if now > last { rising + 1 } else { 0 };
        if rising >= 3 {
            return Err(Error::Diverged { iterations: done, residual: now });
        }
    }
    Ok(AdaptiveResult { coefficients: Coefficients::new(sum), iterations: done, residual_history: history })
}
