//! Wilson basis elements, bandwidth sequences and the finite bases spanning
//! local variable-bandwidth spaces.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::window::{Window, WindowKind};

/// Index `(n, l)` of a Wilson element.
///
/// For `l = 0` the element is the integer translate `g(x - n)`. For `l ≥ 1`
/// it is a modulated copy of `g` centred at the half-integer `n/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WilsonIndex {
    pub n: i64,
    pub l: u32,
}

impl WilsonIndex {
    pub const fn new(n: i64, l: u32) -> Self {
        Self { n, l }
    }

    /// Centre of the element's support.
    pub fn position<T: Scalar>(&self) -> T {
        if self.l == 0 {
            T::from_int(self.n)
        } else {
            T::from_int(self.n) * T::lit(0.5)
        }
    }
}

impl fmt::Display for WilsonIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.n, self.l)
    }
}

/// Modulation factor of `ψ_{n,l}` for `l ≥ 1`: `√2·cos(2πlx)` when `l + n`
/// is even and `√2·sin(2πlx)` when it is odd.
#[inline]
pub(crate) fn modulation<T: Scalar>(n: i64, l: u32, x: T) -> T {
    let phase = T::lit(2.0) * T::PI() * T::from_int(l as i64) * x;
    if (n + l as i64).rem_euclid(2) == 0 {
        T::SQRT_2() * phase.cos()
    } else {
        T::SQRT_2() * phase.sin()
    }
}

/// Evaluates `ψ_{n,l}(x)` for the Wilson basis generated by `w`.
pub fn eval_psi<T: Scalar>(idx: WilsonIndex, x: T, w: &Window<T>) -> T {
    if idx.l == 0 {
        return w.eval(x - T::from_int(idx.n));
    }
    let g = w.eval(x - idx.position::<T>());
    if g == T::zero() {
        return T::zero();
    }
    modulation(idx.n, idx.l, x) * g
}

/// Finitely supported bandwidth sequence `n ↦ b(n)`; reads 0 outside its
/// declared range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandwidthSeq {
    offset: i64,
    values: Vec<u32>,
}

impl BandwidthSeq {
    /// `values[i]` is `b(offset + i)`.
    pub fn new(offset: i64, values: Vec<u32>) -> Self {
        Self { offset, values }
    }

    /// The same value `c` on `n_lo..=n_hi`.
    pub fn constant(n_lo: i64, n_hi: i64, c: u32) -> Self {
        let len = (n_hi - n_lo + 1).max(0) as usize;
        Self::new(n_lo, vec![c; len])
    }

    pub fn zero() -> Self {
        Self::new(0, Vec::new())
    }

    #[inline]
    pub fn get(&self, n: i64) -> u32 {
        let i = n - self.offset;
        if i < 0 {
            return 0;
        }
        self.values.get(i as usize).copied().unwrap_or(0)
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    /// Declared support `offset..offset + len`.
    pub fn support(&self) -> std::ops::Range<i64> {
        self.offset..self.offset + self.values.len() as i64
    }

    /// `B = max_n b(n)`.
    pub fn bound(&self) -> u32 {
        self.values.iter().copied().max().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.values.iter().map(|&v| v as u64).sum()
    }
}

/// Which Wilson elements a local space keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SpaceMode {
    /// Elements whose support lies inside the interval.
    #[default]
    Interior,
    /// Elements whose support meets the open interval.
    Overlapping,
}

/// A local variable-bandwidth space on `[alpha, beta]`.
#[derive(Debug, Clone)]
pub struct SpaceSpec<T: Scalar> {
    pub window: Window<T>,
    pub bandwidths: BandwidthSeq,
    pub interval: (T, T),
    pub mode: SpaceMode,
}

/// JSON form of [`SpaceSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceDoc {
    pub interval: [f64; 2],
    #[serde(default)]
    pub mode: SpaceMode,
    #[serde(default)]
    pub window: WindowKind,
    pub bandwidths: BandwidthSeq,
}

impl SpaceDoc {
    pub fn to_spec<T: Scalar>(&self) -> SpaceSpec<T> {
        SpaceSpec {
            window: self.window.build(),
            bandwidths: self.bandwidths.clone(),
            interval: (T::lit(self.interval[0]), T::lit(self.interval[1])),
            mode: self.mode,
        }
    }
}

impl<T: Scalar> SpaceSpec<T> {
    pub fn new(window: Window<T>, bandwidths: BandwidthSeq, interval: (T, T), mode: SpaceMode) -> Self {
        Self { window, bandwidths, interval, mode }
    }

    pub fn with_mode(&self, mode: SpaceMode) -> Self {
        Self { mode, ..self.clone() }
    }

    pub fn enumerate(&self) -> Result<BasisSet> {
        enumerate_basis(self)
    }

    pub fn dim(&self) -> Result<usize> {
        Ok(self.enumerate()?.len())
    }
}

/// Ordered list of Wilson indices with position lookups.
///
/// Columns follow the enumeration
/// `i = Σ_{r<n} b(r) + #{r ≤ n : (r,0) kept} + l`: for every `n` in
/// increasing order, `(n, 0)` (if kept) precedes `(n, 1), …, (n, b(n))`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSet {
    indices: Vec<WilsonIndex>,
    /// `(p, column)` for kept translates, sorted by `p`.
    translates: Vec<(i64, usize)>,
    /// `(n, first column of l = 1, b(n))`, sorted by `n`.
    modulated: Vec<(i64, usize, u32)>,
}

impl BasisSet {
    fn build(translates: &BTreeSet<i64>, modulated: &[(i64, u32)]) -> Self {
        let mut keys: BTreeSet<i64> = translates.clone();
        keys.extend(modulated.iter().map(|&(n, _)| n));
        let mut indices = Vec::new();
        let mut t_cols = Vec::new();
        let mut m_cols = Vec::new();
        for n in keys {
            if translates.contains(&n) {
                t_cols.push((n, indices.len()));
                indices.push(WilsonIndex::new(n, 0));
            }
            if let Ok(pos) = modulated.binary_search_by_key(&n, |&(k, _)| k) {
                let b = modulated[pos].1;
                m_cols.push((n, indices.len(), b));
                indices.extend((1..=b).map(|l| WilsonIndex::new(n, l)));
            }
        }
        Self { indices, translates: t_cols, modulated: m_cols }
    }

    /// Basis over an explicit list of indices, kept in the given order.
    pub fn from_indices(indices: Vec<WilsonIndex>) -> Result<Self> {
        let mut translates = Vec::new();
        let mut modulated: Vec<(i64, usize, u32)> = Vec::new();
        for (col, idx) in indices.iter().enumerate() {
            if idx.l == 0 {
                translates.push((idx.n, col));
                continue;
            }
            match modulated.last_mut() {
                Some((n, first, b)) if *n == idx.n && *first + *b as usize == col && *b + 1 == idx.l => {
                    *b += 1;
                }
                _ if idx.l == 1 => modulated.push((idx.n, col, 1)),
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "modulated indices must run l = 1, 2, … contiguously; found {idx} at column {col}"
                    )))
                }
            }
        }
        translates.sort_unstable();
        modulated.sort_unstable();
        if translates.windows(2).any(|w| w[0].0 == w[1].0) || modulated.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter("duplicate Wilson index".into()));
        }
        Ok(Self { indices, translates, modulated })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[WilsonIndex] {
        &self.indices
    }

    pub fn get(&self, i: usize) -> Option<WilsonIndex> {
        self.indices.get(i).copied()
    }

    /// Column of `(n, l)`, if kept.
    pub fn index_of(&self, idx: WilsonIndex) -> Option<usize> {
        if idx.l == 0 {
            let pos = self.translates.binary_search_by_key(&idx.n, |&(p, _)| p).ok()?;
            return Some(self.translates[pos].1);
        }
        let pos = self.modulated.binary_search_by_key(&idx.n, |&(n, _, _)| n).ok()?;
        let (_, first, b) = self.modulated[pos];
        (idx.l <= b).then(|| first + idx.l as usize - 1)
    }

    /// Half-integer slots `n` with at least one modulated element, with the
    /// column of `(n, 1)` and the count `b(n)`.
    pub fn modulated_slots(&self) -> &[(i64, usize, u32)] {
        &self.modulated
    }

    pub fn translate_slots(&self) -> &[(i64, usize)] {
        &self.translates
    }

    /// Calls `f(column, ψ(x))` for every element whose support contains `x`.
    pub fn for_each_active<T: Scalar>(&self, x: T, w: &Window<T>, mut f: impl FnMut(usize, T)) {
        let m = w.half_width();
        let two = T::lit(2.0);
        let p_lo = (x - m).ceil().to_i64().unwrap_or(i64::MIN);
        let p_hi = (x + m).floor().to_i64().unwrap_or(i64::MAX);
        let start = self.translates.partition_point(|&(p, _)| p < p_lo);
        for &(p, col) in &self.translates[start..] {
            if p > p_hi {
                break;
            }
            let v = w.eval(x - T::from_int(p));
            if v != T::zero() {
                f(col, v);
            }
        }
        let n_lo = (two * (x - m)).ceil().to_i64().unwrap_or(i64::MIN);
        let n_hi = (two * (x + m)).floor().to_i64().unwrap_or(i64::MAX);
        let start = self.modulated.partition_point(|&(n, _, _)| n < n_lo);
        for &(n, first, b) in &self.modulated[start..] {
            if n > n_hi {
                break;
            }
            let g = w.eval(x - T::from_int(n) * T::lit(0.5));
            if g == T::zero() {
                continue;
            }
            for l in 1..=b {
                f(first + l as usize - 1, modulation(n, l, x) * g);
            }
        }
    }
}

fn slack<T: Scalar>(a: T, b: T) -> T {
    T::epsilon() * T::lit(16.0) * a.abs().max(b.abs()).max(T::one())
}

/// Enumerates the Wilson elements spanning the local space described by
/// `spec`, ordered by the linear index.
pub fn enumerate_basis<T: Scalar>(spec: &SpaceSpec<T>) -> Result<BasisSet> {
    let (alpha, beta) = spec.interval;
    let m = spec.window.half_width();
    if !(beta > alpha) {
        return Err(Error::EmptyInterval(alpha.to_f64_lossy(), beta.to_f64_lossy()));
    }
    let half = T::lit(0.5);
    let b = &spec.bandwidths;
    let mut translates = BTreeSet::new();
    let mut modulated = Vec::new();
    match spec.mode {
        SpaceMode::Interior => {
            if beta - alpha < T::lit(2.0) * m {
                return Err(Error::IntervalTooShort(
                    alpha.to_f64_lossy(),
                    beta.to_f64_lossy(),
                    (T::lit(2.0) * m).to_f64_lossy(),
                ));
            }
            let lo = alpha + m;
            let hi = beta - m;
            let eps = slack(lo, hi);
            let p_lo = (lo - eps).ceil().to_i64().unwrap_or(0);
            let p_hi = (hi + eps).floor().to_i64().unwrap_or(-1);
            translates.extend(p_lo..=p_hi);
            let n_lo = (T::lit(2.0) * (lo - eps)).ceil().to_i64().unwrap_or(0);
            let n_hi = (T::lit(2.0) * (hi + eps)).floor().to_i64().unwrap_or(-1);
            for n in n_lo..=n_hi {
                let bn = b.get(n);
                if bn > 0 {
                    modulated.push((n, bn));
                }
            }
        }
        SpaceMode::Overlapping => {
            // Supports [c - m, c + m] meeting (alpha, beta).
            let p_lo = (alpha - m).floor().to_i64().unwrap_or(0);
            let p_hi = (beta + m).ceil().to_i64().unwrap_or(-1);
            for p in p_lo..=p_hi {
                let c = T::from_int(p);
                if c - m < beta && c + m > alpha {
                    translates.insert(p);
                }
            }
            let n_lo = (T::lit(2.0) * (alpha - m)).floor().to_i64().unwrap_or(0);
            let n_hi = (T::lit(2.0) * (beta + m)).ceil().to_i64().unwrap_or(-1);
            for n in n_lo..=n_hi {
                let c = T::from_int(n) * half;
                let bn = b.get(n);
                if bn > 0 && c - m < beta && c + m > alpha {
                    modulated.push((n, bn));
                }
            }
        }
    }
    Ok(BasisSet::build(&translates, &modulated))
}

/// Dimension of the local space.
pub fn dim<T: Scalar>(spec: &SpaceSpec<T>) -> Result<usize> {
    enumerate_basis(spec).map(|b| b.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_abs_diff_eq;

    fn cosine() -> Window<f64> {
        Window::cosine()
    }

    #[test]
    fn psi_point_values() {
        let g = cosine();
        let s2 = std::f64::consts::SQRT_2;
        assert_abs_diff_eq!(eval_psi(WilsonIndex::new(0, 0), 0.0, &g), s2, epsilon = 1e-15);
        // (1,1): l + n even, cosine modulation centred at 1/2.
        assert_abs_diff_eq!(eval_psi(WilsonIndex::new(1, 1), 0.5, &g), -2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(eval_psi(WilsonIndex::new(1, 1), 0.25, &g), 0.0, epsilon = 1e-14);
        // (0,1): l + n odd, sine modulation centred at 0.
        assert_abs_diff_eq!(eval_psi(WilsonIndex::new(0, 1), 0.25, &g), s2, epsilon = 1e-14);
        for idx in [WilsonIndex::new(3, 0), WilsonIndex::new(3, 7), WilsonIndex::new(-2, 4)] {
            let x = idx.position::<f64>() + 0.5 + 0.1;
            assert_eq!(eval_psi(idx, x, &g), 0.0);
        }
    }

    #[test]
    fn paper_interior_dimension() {
        let spec = presets::paper_sparse_space::<f64>();
        assert_eq!(dim(&spec).unwrap(), 2993);
    }

    #[test]
    fn paper_overlapping_dimensions() {
        assert_eq!(dim(&presets::paper_extended_space::<f64>()).unwrap(), 3101);
        assert_eq!(dim(&presets::paper_chirp_space::<f64>()).unwrap(), 2893);
    }

    #[test]
    fn empty_and_degenerate_intervals() {
        let mut spec = SpaceSpec::new(cosine(), BandwidthSeq::zero(), (0.0, 1.0), SpaceMode::Interior);
        assert_eq!(dim(&spec).unwrap(), 0);
        spec.interval = (0.0, 0.5);
        assert!(matches!(dim(&spec), Err(Error::IntervalTooShort(..))));
        spec.interval = (1.0, 1.0);
        assert!(matches!(dim(&spec), Err(Error::EmptyInterval(..))));
        spec.mode = SpaceMode::Overlapping;
        assert!(matches!(dim(&spec), Err(Error::EmptyInterval(..))));
    }

    #[test]
    fn interior_endpoint_is_inclusive() {
        // [alpha + m, beta - m] = [1, 2]: translates 1 and 2, half-slots n = 2..4.
        let spec = SpaceSpec::new(cosine(), BandwidthSeq::constant(-5, 10, 1), (0.5, 2.5), SpaceMode::Interior);
        let basis = spec.enumerate().unwrap();
        assert_eq!(basis.translate_slots().iter().map(|t| t.0).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(basis.modulated_slots().iter().map(|t| t.0).collect::<Vec<_>>(), vec![2, 3, 4]);
    }

    #[test]
    fn linear_index_matches_closed_form() {
        let spec = presets::paper_sparse_space::<f64>();
        let basis = spec.enumerate().unwrap();
        let b = &spec.bandwidths;
        let kept_t: Vec<i64> = basis.translate_slots().iter().map(|t| t.0).collect();
        let kept_m: Vec<i64> = basis.modulated_slots().iter().map(|t| t.0).collect();
        for (col, idx) in basis.indices().iter().enumerate() {
            let before: u64 = kept_m.iter().filter(|&&r| r < idx.n).map(|&r| b.get(r) as u64).sum();
            let translates = kept_t.iter().filter(|&&r| r <= idx.n).count() as u64;
            let i = before + translates + idx.l as u64;
            assert_eq!(i as usize, col + 1, "index {idx}");
            assert_eq!(basis.index_of(*idx), Some(col));
            assert_eq!(basis.get(col), Some(*idx));
        }
        assert_eq!(basis.index_of(WilsonIndex::new(1, 103)), None);
        assert_eq!(basis.index_of(WilsonIndex::new(6, 0)), None);
    }

    #[test]
    fn interior_elements_vanish_outside_interval() {
        let spec = presets::small_sparse_space::<f64>();
        let basis = spec.enumerate().unwrap();
        for x in [-0.3, -0.0001, 3.0001, 3.4] {
            let mut hits = 0;
            basis.for_each_active(x, &spec.window, |_, v| {
                if v != 0.0 {
                    hits += 1
                }
            });
            assert_eq!(hits, 0, "x = {x}");
        }
    }

    #[test]
    fn active_lookup_agrees_with_direct_evaluation() {
        let spec = presets::small_sparse_space::<f64>().with_mode(SpaceMode::Overlapping);
        let basis = spec.enumerate().unwrap();
        for i in 0..200 {
            let x = -0.6 + 4.2 * i as f64 / 199.0;
            let mut row = vec![0.0; basis.len()];
            basis.for_each_active(x, &spec.window, |c, v| row[c] = v);
            for (c, idx) in basis.indices().iter().enumerate() {
                assert_eq!(row[c], eval_psi(*idx, x, &spec.window), "{idx} at {x}");
            }
        }
    }

    #[test]
    fn from_indices_round_trip() {
        let basis = presets::small_sparse_space::<f64>().enumerate().unwrap();
        let again = BasisSet::from_indices(basis.indices().to_vec()).unwrap();
        assert_eq!(again, basis);
        let bad = vec![WilsonIndex::new(0, 2)];
        assert!(BasisSet::from_indices(bad).is_err());
    }

    #[test]
    fn space_doc_json() {
        let doc: SpaceDoc = serde_json::from_str(
            r#"{"interval":[0,6],"mode":"interior","window":"cosine",
                "bandwidths":{"offset":1,"values":[102,35,499,444,341,111,197,241,492,95,431]}}"#,
        )
        .unwrap();
        assert_eq!(doc.to_spec::<f64>().dim().unwrap(), 2993);
        let back: SpaceDoc = serde_json::from_str(&serde_json::to_string(&doc).unwrap()).unwrap();
        assert_eq!(back, doc);
    }
}
