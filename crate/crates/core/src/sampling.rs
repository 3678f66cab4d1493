//! Sampling sets grouped by half-integer intervals, the maximal-gap
//! sufficiency check, and the adaptive (Voronoi-cell) weights.

use std::io::{BufRead, Write};
use std::ops::RangeInclusive;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::wilson::{BandwidthSeq, SpaceSpec};

/// Points grouped by the half-integer interval `[k/2, (k+1)/2]` they fall in.
///
/// A group may end exactly at `(k+1)/2`; equispaced constructions whose step
/// divides `1/2` place their last node there.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingSet<T> {
    groups: Vec<(i64, Vec<T>)>,
}

impl<T: Scalar> SamplingSet<T> {
    /// Validates and stores the groups; empty groups are dropped.
    pub fn new(mut groups: Vec<(i64, Vec<T>)>) -> Result<Self> {
        groups.retain(|(_, pts)| !pts.is_empty());
        groups.sort_by_key(|(k, _)| *k);
        if groups.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter("duplicate sampling group".into()));
        }
        let half = T::lit(0.5);
        for (k, pts) in &groups {
            let lo = T::from_int(*k) * half;
            let hi = lo + half;
            let sorted = pts.windows(2).all(|w| w[0] < w[1]);
            let inside = pts.iter().all(|&x| x.is_finite() && x >= lo && x <= hi);
            if !sorted || !inside {
                return Err(Error::MalformedGroup(*k));
            }
        }
        Ok(Self { groups })
    }

    /// Groups arbitrary points by `k = ⌊2x⌋`.
    pub fn from_points(points: &[T]) -> Result<Self> {
        let mut sorted: Vec<T> = points.to_vec();
        if sorted.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        let mut groups: Vec<(i64, Vec<T>)> = Vec::new();
        for x in sorted {
            let k = (x * T::lit(2.0)).floor().to_i64().unwrap_or(0);
            match groups.last_mut() {
                Some((kk, pts)) if *kk == k => pts.push(x),
                _ => groups.push((k, vec![x])),
            }
        }
        Self::new(groups)
    }

    pub fn groups(&self) -> &[(i64, Vec<T>)] {
        &self.groups
    }

    pub fn group(&self, k: i64) -> Option<&[T]> {
        self.groups
            .binary_search_by_key(&k, |(kk, _)| *kk)
            .ok()
            .map(|i| self.groups[i].1.as_slice())
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(|(_, p)| p.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// All points in group order.
    pub fn points(&self) -> Vec<T> {
        self.groups.iter().flat_map(|(_, p)| p.iter().copied()).collect()
    }

    /// Largest gap between consecutive points of group `k`.
    pub fn in_group_gap(&self, k: i64) -> Option<T> {
        let pts = self.group(k)?;
        Some(pts.windows(2).map(|w| w[1] - w[0]).fold(T::zero(), T::max))
    }

    /// Writes `k,j,x` rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,j,x")?;
        for (k, pts) in &self.groups {
            for (j, x) in pts.iter().enumerate() {
                writeln!(out, "{k},{j},{x:?}")?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut groups: Vec<(i64, Vec<T>)> = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with('k')) {
                continue;
            }
            let bad = || Error::Config(format!("sampling CSV line {}: '{line}'", lineno + 1));
            let mut cols = line.split(',');
            let k: i64 = cols.next().and_then(|c| c.trim().parse().ok()).ok_or_else(bad)?;
            let _j: usize = cols.next().and_then(|c| c.trim().parse().ok()).ok_or_else(bad)?;
            let x: f64 = cols.next().and_then(|c| c.trim().parse().ok()).ok_or_else(bad)?;
            match groups.last_mut() {
                Some((kk, pts)) if *kk == k => pts.push(T::lit(x)),
                _ => groups.push((k, vec![T::lit(x)])),
            }
        }
        Self::new(groups)
    }
}

/// `M = {k : [k/2, (k+1)/2) meets [α - margin, β + margin)}`.
pub fn coverage<T: Scalar>(interval: (T, T), margin: T) -> RangeInclusive<i64> {
    let two = T::lit(2.0);
    let a = interval.0 - margin;
    let b = interval.1 + margin;
    let lo = (two * a - T::one()).floor().to_i64().unwrap_or(0) + 1;
    let hi = (two * b).ceil().to_i64().unwrap_or(0) - 1;
    lo..=hi
}

/// Active local bandwidth `μ_{k/2} = max_{n ∈ (k-2m, k+2m+1) ∩ ℤ} (b(n) + 1)`.
pub fn mu_active<T: Scalar>(k: i64, b: &BandwidthSeq, m: T) -> u32 {
    let two_m = T::lit(2.0) * m;
    let kt = T::from_int(k);
    let lo = (kt - two_m).floor().to_i64().unwrap_or(k) + 1;
    let hi = (kt + two_m + T::one()).ceil().to_i64().unwrap_or(k) - 1;
    (lo..=hi).map(|n| b.get(n) + 1).max().unwrap_or(1)
}

/// Gap bound `π / (μ_{k/2}·D)` for group `k`.
pub fn gap_bound<T: Scalar>(spec: &SpaceSpec<T>, k: i64) -> T {
    let mu = mu_active(k, &spec.bandwidths, spec.window.half_width());
    T::PI() / (T::from_int(mu as i64) * spec.window.sufficiency_constant())
}

/// Equispaced points at the maximal admissible gap:
/// `x = k/2 + δ_{k/2}·j`, `j = 0, …, ⌊1/(2δ_{k/2})⌋`, `δ_{k/2} = π/(μ_{k/2}·D)`.
pub fn gen_gap_set<T: Scalar>(spec: &SpaceSpec<T>, coverage: RangeInclusive<i64>) -> Result<SamplingSet<T>> {
    let half = T::lit(0.5);
    let groups = coverage
        .map(|k| {
            let delta = gap_bound(spec, k);
            let last = (T::one() / (T::lit(2.0) * delta)).floor().to_i64().unwrap_or(0);
            let start = T::from_int(k) * half;
            (k, (0..=last).map(|j| start + delta * T::from_int(j)).collect())
        })
        .collect();
    SamplingSet::new(groups)
}

/// `x = k/2 + j/(2ρμ_{k/2})`, `j = 0, …, ⌊ρμ_{k/2}⌋`.
pub fn gen_rho_set<T: Scalar>(
    spec: &SpaceSpec<T>,
    coverage: RangeInclusive<i64>,
    rho: T,
) -> Result<SamplingSet<T>> {
    if !(rho > T::zero()) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!("rho must be positive, got {rho}")));
    }
    let half = T::lit(0.5);
    let m = spec.window.half_width();
    let groups = coverage
        .map(|k| {
            let rm = rho * T::from_int(mu_active(k, &spec.bandwidths, m) as i64);
            let last = rm.floor().to_i64().unwrap_or(0);
            let start = T::from_int(k) * half;
            (k, (0..=last).map(|j| start + half * T::from_int(j) / rm).collect())
        })
        .collect();
    SamplingSet::new(groups)
}

/// Per-group outcome of the maximal-gap test.
#[derive(Debug, Clone, Serialize)]
pub struct GroupCheck {
    pub k: i64,
    pub mu: u32,
    pub bound: f64,
    /// Largest gap on the closed half interval: consecutive in-group gaps
    /// plus the step to the next sample (or to `(k+1)/2` at the end).
    pub delta: f64,
    pub lead_offset: f64,
    pub trail_offset: f64,
    pub points: usize,
    /// `delta ≤ bound`, up to rounding in the subtraction of sample positions.
    pub gap_ok: bool,
    /// `delta < bound`.
    pub strict: bool,
    /// `lead_offset ≤ delta/2`.
    pub lead_ok: bool,
    /// Both offsets at most `delta/2`, read per half interval.
    pub literal_offsets_ok: bool,
    pub pass: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SufficiencyReport {
    pub constant_d: f64,
    pub groups: Vec<GroupCheck>,
}

impl SufficiencyReport {
    pub fn all_pass(&self) -> bool {
        self.groups.iter().all(|g| g.pass)
    }

    pub fn all_strict(&self) -> bool {
        self.groups.iter().all(|g| g.pass && g.strict)
    }

    pub fn failures(&self) -> impl Iterator<Item = &GroupCheck> {
        self.groups.iter().filter(|g| !g.pass)
    }

    /// `γ = (D/π)·max_k δ_{k/2}·μ_{k/2}`, the contraction bound of the
    /// adaptive-weights operator.
    pub fn gamma(&self) -> f64 {
        self.groups
            .iter()
            .map(|g| self.constant_d / std::f64::consts::PI * g.delta * g.mu as f64)
            .fold(0.0, f64::max)
    }
}

/// Checks `δ_{k/2} ≤ π/(μ_{k/2}·D)` on every group of `coverage`.
pub fn verify_sufficiency<T: Scalar>(
    s: &SamplingSet<T>,
    spec: &SpaceSpec<T>,
    coverage: RangeInclusive<i64>,
) -> SufficiencyReport {
    let half = T::lit(0.5);
    let d = spec.window.sufficiency_constant();
    let m = spec.window.half_width();
    let groups = coverage
        .map(|k| {
            let mu = mu_active(k, &spec.bandwidths, m);
            let bound = T::PI() / (T::from_int(mu as i64) * d);
            let lo = T::from_int(k) * half;
            let hi = lo + half;
            let Some(pts) = s.group(k) else {
                return GroupCheck {
                    k,
                    mu,
                    bound: bound.to_f64_lossy(),
                    delta: 0.5,
                    lead_offset: 0.5,
                    trail_offset: 0.5,
                    points: 0,
                    gap_ok: false,
                    strict: false,
                    lead_ok: false,
                    literal_offsets_ok: false,
                    pass: false,
                    note: Some("empty group: the whole half interval is a gap".into()),
                };
            };
            let first = pts[0];
            let last = pts[pts.len() - 1];
            let next = s.group(k + 1).map(|p| p[0]).unwrap_or(hi);
            let closing = if last >= hi { T::zero() } else { next - last };
            let delta = pts.windows(2).map(|w| w[1] - w[0]).fold(closing, T::max);
            let lead = first - lo;
            let trail = hi - last;
            let gap_ok = delta <= bound + T::lit(64.0) * T::epsilon() * (bound + hi.abs());
            let lead_ok = lead <= delta * half;
            GroupCheck {
                k,
                mu,
                bound: bound.to_f64_lossy(),
                delta: delta.to_f64_lossy(),
                lead_offset: lead.to_f64_lossy(),
                trail_offset: trail.to_f64_lossy(),
                points: pts.len(),
                gap_ok,
                strict: delta < bound,
                lead_ok,
                literal_offsets_ok: lead_ok && trail <= delta * half,
                pass: gap_ok && lead_ok,
                note: None,
            }
        })
        .collect();
    SufficiencyReport { constant_d: d.to_f64_lossy(), groups }
}

/// Midpoint-cell decomposition of a sampling set and the cell lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct CellWeights<T> {
    /// One weight per point, in [`SamplingSet::points`] order.
    pub weights: Vec<T>,
    /// Cell `[lo, hi)` of each point.
    pub cells: Vec<(T, T)>,
}

impl<T: Scalar> CellWeights<T> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Cells `[y_{j-1}, y_j)` with `y_0 = k/2`, interior `y_j` the midpoints
/// between consecutive samples and the last edge `(k+1)/2`.
pub fn adaptive_weights<T: Scalar>(s: &SamplingSet<T>) -> CellWeights<T> {
    let half = T::lit(0.5);
    let mut weights = Vec::with_capacity(s.len());
    let mut cells = Vec::with_capacity(s.len());
    for (k, pts) in s.groups() {
        let lo = T::from_int(*k) * half;
        let hi = lo + half;
        let mut left = lo;
        for (j, &x) in pts.iter().enumerate() {
            let right = match pts.get(j + 1) {
                Some(&next) => (x + next) * half,
                None => hi,
            };
            weights.push(right - left);
            cells.push((left, right));
            left = right;
        }
    }
    CellWeights { weights, cells }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use approx::assert_abs_diff_eq;

    #[test]
    fn mu_values() {
        let b = presets::sparse_bandwidths();
        assert_eq!(mu_active(2, &b, 0.5), 500);
        assert_eq!(mu_active(0, &b, 0.5), 103);
        assert_eq!(mu_active(11, &b, 0.5), 432);
        assert_eq!(mu_active(7, &BandwidthSeq::zero(), 0.5), 1);
        // Example: μ_0 = max{b(0), b(1)} + 1.
        let b = BandwidthSeq::new(0, vec![4, 9]);
        assert_eq!(mu_active(0, &b, 0.5), 10);
        // Wider windows see more slots.
        assert_eq!(mu_active(0, &BandwidthSeq::new(-1, vec![20, 0, 0, 0]), 1.0), 21);
    }

    #[test]
    fn coverage_sets() {
        assert_eq!(coverage((0.0, 6.0), 0.0), 0..=11);
        assert_eq!(coverage((0.0, 6.0), 0.5), -1..=12);
        assert_eq!(coverage((0.25, 1.0), 0.0), 0..=1);
    }

    #[test]
    fn paper_gap_set_count() {
        let spec = presets::paper_sparse_space::<f64>();
        let s = gen_gap_set(&spec, coverage(spec.interval, 0.0)).unwrap();
        assert_eq!(s.len(), 12121);
        // Counting oracle: Σ_k (⌊2√2·μ_k⌋ + 1).
        let oracle: usize = (0..=11)
            .map(|k| (2.0 * 2f64.sqrt() * mu_active(k, &spec.bandwidths, 0.5) as f64).floor() as usize + 1)
            .sum();
        assert_eq!(s.len(), oracle);
        let q = s.len() as f64 / spec.dim().unwrap() as f64;
        assert!((q - 4.05).abs() < 0.01);
    }

    #[test]
    fn zero_band_group_has_three_points() {
        let spec = SpaceSpec::new(
            crate::window::Window::<f64>::cosine(),
            BandwidthSeq::zero(),
            (0.0, 0.5),
            crate::wilson::SpaceMode::Overlapping,
        );
        let s = gen_gap_set(&spec, 0..=0).unwrap();
        assert_eq!(s.len(), 3);
        assert_abs_diff_eq!(s.in_group_gap(0).unwrap(), 1.0 / (4.0 * 2f64.sqrt()), epsilon = 1e-15);
    }

    #[test]
    fn paper_rho_set_counts() {
        let spec = presets::paper_sparse_space::<f64>();
        let cov = coverage(spec.interval, 0.0);
        assert_eq!(gen_rho_set(&spec, cov.clone(), 1.0).unwrap().len(), 4295);
        assert_eq!(gen_rho_set(&spec, cov.clone(), 0.7).unwrap().len(), 3007);
        assert!(gen_rho_set(&spec, cov, 0.0).is_err());
    }

    #[test]
    fn integer_rho_mu_reaches_group_end() {
        let spec = presets::small_sparse_space::<f64>();
        let s = gen_rho_set(&spec, 0..=0, 1.0).unwrap();
        let mu = mu_active(0, &spec.bandwidths, 0.5) as usize;
        let g = s.group(0).unwrap();
        assert_eq!(g.len(), mu + 1);
        assert_eq!(*g.last().unwrap(), 0.5);
    }

    #[test]
    fn gap_and_dense_rho_sets_pass() {
        let spec = presets::paper_sparse_space::<f64>();
        let cov = coverage(spec.interval, 0.0);
        let s = gen_gap_set(&spec, cov.clone()).unwrap();
        let r = verify_sufficiency(&s, &spec, cov.clone());
        assert!(r.all_pass(), "{:?}", r.failures().next());
        let s = gen_rho_set(&spec, cov.clone(), 6.0).unwrap();
        assert!(verify_sufficiency(&s, &spec, cov.clone()).all_strict());
        let s = gen_rho_set(&spec, cov.clone(), 1.0).unwrap();
        assert!(!verify_sufficiency(&s, &spec, cov).all_pass());
    }

    #[test]
    fn sparse_sets_fail() {
        let spec = presets::paper_sparse_space::<f64>();
        let pts: Vec<f64> = (0..12).map(|k| k as f64 * 0.5).collect();
        let s = SamplingSet::from_points(&pts).unwrap();
        let r = verify_sufficiency(&s, &spec, 0..=11);
        assert!(r.groups.iter().all(|g| !g.pass));
        let s = SamplingSet::from_points(&pts[..6]).unwrap();
        let r = verify_sufficiency(&s, &spec, 0..=11);
        assert!(r.groups[8].note.is_some());
    }

    #[test]
    fn weight_examples() {
        let s = SamplingSet::new(vec![(4, vec![2.0])]).unwrap();
        assert_eq!(adaptive_weights(&s).weights, vec![0.5]);

        let s = SamplingSet::new(vec![(4, vec![2.0, 2.25])]).unwrap();
        let w = adaptive_weights(&s).weights;
        assert_abs_diff_eq!(w[0], 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(w[1], 0.375, epsilon = 1e-15);

        let delta = 0.07;
        let pts: Vec<f64> = (0..=7).map(|j| 1.0 + delta * j as f64).collect();
        let s = SamplingSet::new(vec![(2, pts.clone())]).unwrap();
        let w = adaptive_weights(&s).weights;
        assert_abs_diff_eq!(w[0], delta / 2.0, epsilon = 1e-15);
        for wj in &w[1..7] {
            assert_abs_diff_eq!(*wj, delta, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(w[7], 1.5 - (pts[6] + pts[7]) / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn malformed_groups_rejected() {
        assert!(SamplingSet::new(vec![(0, vec![0.1, 0.1])]).is_err());
        assert!(SamplingSet::new(vec![(0, vec![0.3, 0.2])]).is_err());
        assert!(SamplingSet::new(vec![(0, vec![0.6])]).is_err());
        assert!(SamplingSet::<f64>::from_points(&[0.2, 0.2]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let spec = presets::small_sparse_space::<f64>();
        let s = gen_gap_set(&spec, coverage(spec.interval, 0.0)).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let back = SamplingSet::<f64>::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, s);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn weights_tile_each_group(raw in proptest::collection::vec(0.0f64..0.5, 1..40), k in -20i64..20) {
                let mut pts: Vec<f64> = raw.iter().map(|e| k as f64 * 0.5 + e).collect();
                pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                pts.dedup();
                let s = SamplingSet::new(vec![(k, pts)]).unwrap();
                let w = adaptive_weights(&s);
                let total: f64 = w.weights.iter().sum();
                prop_assert!((total - 0.5).abs() <= 1e-15 * (1.0 + k.abs() as f64));
                prop_assert!(w.weights.iter().all(|&x| x >= 0.0));
            }

            #[test]
            fn rho_count_is_monotone(r1 in 0.1f64..4.0, dr in 0.0f64..2.0) {
                let spec = presets::small_sparse_space::<f64>();
                let cov = coverage(spec.interval, 0.0);
                let a = gen_rho_set(&spec, cov.clone(), r1).unwrap().len();
                let b = gen_rho_set(&spec, cov, r1 + dr).unwrap().len();
                prop_assert!(b >= a);
            }

            #[test]
            fn mu_reads_two_neighbours(vals in proptest::collection::vec(0u32..600, 4..12), k in 0i64..3) {
                let b = BandwidthSeq::new(0, vals.clone());
                prop_assert_eq!(mu_active(k, &b, 0.5), b.get(k).max(b.get(k + 1)) + 1);
            }
        }
    }
}
