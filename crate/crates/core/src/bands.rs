//! Band functions: numbering of the Bloch eigenvalues around the boundary gap,
//! band tables over a quasimomentum grid, spectral gaps, and the structural
//! checks on band ranges.
//!
//! Index convention: eigenvalues at or above the right end of `D(N,t)` get
//! `1, 2, ...` in ascending order, those below get `-1, -2, ...` in
//! descending order. Free block `k` therefore maps to the indices returned by
//! [`band_group`].

use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

use crate::coeffs::{compute_m_norm, OperatorSpec};
use crate::error::{Error, Result};
use crate::galerkin::{self, FiberSpectrum};
use crate::localization::{
    build_localization_plan, compute_threshold, gap_count_bound, overlap_intervals, whole_line_criterion, Interval,
    LocalizationPlan, SmallNormIntervals,
};

/// Band indices attached to free block `k`: `(k-N)m+1 ..= (k-N)m+m` for
/// `k >= N`, and `-(jm+1) ..= -(j+1)m` with `j = N-1-k` otherwise.
pub fn band_group(k: i64, threshold: usize, m: usize) -> Vec<i64> {
    let n = threshold as i64;
    let m = m as i64;
    if k >= n {
        ((k - n) * m + 1..=(k - n) * m + m).collect()
    } else {
        let j = n - 1 - k;
        (1..=m).map(|i| -(j * m + i)).collect()
    }
}

/// Eigenvalues of one fiber labelled by band index.
#[derive(Debug, Clone, Serialize)]
pub struct NumberedSpectrum {
    pub t: f64,
    pub values: BTreeMap<i64, f64>,
    /// Norm of the Fourier block of the attached free block, for satellite indices.
    pub weights: BTreeMap<i64, f64>,
}

/// Relative slack used only for zero-radius (point) satellites.
const POINT_SLACK: f64 = 1e-9;

fn member(interval: &Interval, x: f64) -> bool {
    if interval.lo == interval.hi {
        interval.contains_with_slack(x, POINT_SLACK * x.abs().max(1.0))
    } else {
        interval.contains(x)
    }
}

/// Numbers `positive` eigenvalues above and `negative` below the boundary gap,
/// then checks that every `B(k,t)` and `A(N,t)` holds the expected indices.
pub fn number_eigenvalues(
    spectrum: &FiberSpectrum,
    plan: &LocalizationPlan,
    positive: usize,
    negative: usize,
) -> Result<NumberedSpectrum> {
    if (spectrum.t - plan.t).abs() > 0.0 {
        return Err(Error::Precondition(format!(
            "spectrum at t={} does not match plan at t={}",
            spectrum.t, plan.t
        )));
    }
    let t = plan.t;
    let m = plan.m;
    let n_thr = plan.threshold;
    let split = plan.boundary_gap.hi;
    let eig = &spectrum.eigenvalues;
    let first_pos = eig.partition_point(|&l| l < split);
    if first_pos + positive > eig.len() || negative > first_pos {
        return Err(Error::TrustedWindow {
            t,
            limit: spectrum.trusted_limit,
            what: format!("{negative} eigenvalues below and {positive} above {split:.6e}"),
        });
    }
    let mut values = BTreeMap::new();
    let mut positions = BTreeMap::new();
    for s in 1..=positive {
        positions.insert(s as i64, first_pos + s - 1);
    }
    for s in 1..=negative {
        positions.insert(-(s as i64), first_pos - s);
    }
    for (&s, &i) in &positions {
        if !spectrum.is_reliable(i) {
            return Err(Error::TrustedWindow {
                t,
                limit: spectrum.trusted_limit,
                what: format!("band {s} (eigenvalue {:.6e})", eig[i]),
            });
        }
        values.insert(s, eig[i]);
    }

    let reliable: Vec<f64> = spectrum.reliable_eigenvalues();
    let check = |name: String, iv: &Interval, indices: &[i64]| -> Result<()> {
        let found = reliable.iter().filter(|&&l| member(iv, l)).count();
        if found != indices.len() {
            return Err(Error::Miscount {
                t,
                interval: format!("{name} = {iv}"),
                expected: indices.len(),
                found,
            });
        }
        for s in indices {
            if let Some(&l) = values.get(s) {
                if !member(iv, l) {
                    return Err(Error::Miscount {
                        t,
                        interval: format!("{name} = {iv} (band {s} at {l:.12e})"),
                        expected: indices.len(),
                        found: indices
                            .iter()
                            .filter(|s| values.get(s).is_some_and(|&x| member(iv, x)))
                            .count(),
                    });
                }
            }
        }
        Ok(())
    };
    let central: Vec<i64> = (1..=((2 * n_thr - 1) * m) as i64).map(|s| -s).collect();
    check("A(N,t)".to_string(), &plan.center_band, &central)?;
    let mut weights = BTreeMap::new();
    for (&k, b) in &plan.satellites {
        let group = band_group(k, n_thr, m);
        check(format!("B({k},t)"), b, &group)?;
        for s in group {
            if let Some(&i) = positions.get(&s) {
                weights.insert(s, spectrum.block_weight(i, k)?);
            }
        }
    }
    Ok(NumberedSpectrum { t, values, weights })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandOptions {
    pub k_max: i64,
    /// Number of positive band indices; the negative side adds the `(2N-1)m`
    /// central indices on top of this.
    pub s_max: usize,
    pub truncation: usize,
    pub guard: usize,
    pub hermitian_tol: f64,
    /// Add the limit `t -> -1+` (computed at `t = -1`) to the band ranges.
    pub include_left_limit: bool,
}

impl BandOptions {
    /// `k_max = N + 4`, `s_max = (k_max - N + 1) m`, default truncation.
    pub fn defaults(spec: &OperatorSpec) -> Self {
        let threshold = compute_threshold(compute_m_norm(spec).m_value);
        let k_max = threshold as i64 + 4;
        Self::with_k_max(spec, k_max, None)
    }

    pub fn with_k_max(spec: &OperatorSpec, k_max: i64, truncation: Option<usize>) -> Self {
        let threshold = compute_threshold(compute_m_norm(spec).m_value);
        let k_max = k_max.max(threshold as i64);
        let guard = galerkin::DEFAULT_GUARD;
        Self {
            k_max,
            s_max: (k_max as usize - threshold + 1) * spec.dim(),
            truncation: galerkin::default_truncation(spec, threshold, k_max as usize, guard, truncation),
            guard,
            hermitian_tol: galerkin::DEFAULT_HERMITIAN_TOL,
            include_left_limit: true,
        }
    }
}

/// `count` points on `(lo, hi]`: `lo + (hi - lo) j / count`, `j = 1..=count`.
pub fn uniform_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|j| lo + (hi - lo) * j as f64 / count as f64).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct BandTable {
    pub n: usize,
    pub m: usize,
    pub m_norm: f64,
    pub threshold: usize,
    pub options: BandOptions,
    pub t_grid: Vec<f64>,
    /// Band values at `t = -1` numbered with the `t = -1` plan (the left limit).
    pub left_limit: Option<BTreeMap<i64, f64>>,
    /// Band index -> values along `t_grid`.
    pub bands: BTreeMap<i64, Vec<f64>>,
    /// Satellite band index -> own-block weight along `t_grid`.
    pub weights: BTreeMap<i64, Vec<f64>>,
    /// Closed `[min, max]` over the grid and the left limit.
    pub band_ranges: BTreeMap<i64, Interval>,
    /// Largest change between consecutive samples (left limit first, if present).
    pub max_jumps: BTreeMap<i64, f64>,
}

impl BandTable {
    pub fn indices(&self) -> Vec<i64> {
        self.bands.keys().copied().collect()
    }

    pub fn range(&self, s: i64) -> Option<&Interval> {
        self.band_ranges.get(&s)
    }

    /// Closure of the union of the ranges of `indices`, if they overlap into one interval.
    pub fn union_hull(&self, indices: &[i64]) -> Option<Interval> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in indices {
            let r = self.band_ranges.get(s)?;
            lo = lo.min(r.lo);
            hi = hi.max(r.hi);
        }
        Some(Interval::closed(lo, hi))
    }
}

fn solve_point(spec: &OperatorSpec, m_norm: f64, t: f64, options: &BandOptions) -> Result<(NumberedSpectrum, usize)> {
    let plan = build_localization_plan(spec, m_norm, t, options.k_max)?;
    let spectrum = galerkin::fiber_spectrum(spec, t, 1.0, options.truncation, options.guard, options.hermitian_tol)?;
    let negative = options.s_max + (2 * plan.threshold - 1) * plan.m;
    let numbered = number_eigenvalues(&spectrum, &plan, options.s_max, negative)?;
    Ok((numbered, negative))
}

/// Solves every grid point (in parallel), numbers the eigenvalues and collects
/// band values, ranges and adjacent-point jumps.
pub fn build_band_table(spec: &OperatorSpec, t_grid: &[f64], options: &BandOptions) -> Result<BandTable> {
    if t_grid.is_empty() {
        return Err(Error::Validation("empty quasimomentum grid".into()));
    }
    for w in t_grid.windows(2) {
        if !(w[0] < w[1]) {
            return Err(Error::Validation(
                "quasimomentum grid must be strictly ascending".into(),
            ));
        }
    }
    if let Some(&t) = t_grid.iter().find(|&&t| !(t > -1.0 && t <= 1.0)) {
        return Err(Error::Validation(format!("grid point t={t} outside (-1, 1]")));
    }
    let m_norm = compute_m_norm(spec).m_value;
    let threshold = compute_threshold(m_norm);
    let points: Vec<(NumberedSpectrum, usize)> = t_grid
        .par_iter()
        .map(|&t| solve_point(spec, m_norm, t, options))
        .collect::<Result<_>>()?;
    let left_limit = if options.include_left_limit {
        Some(solve_point(spec, m_norm, -1.0, options)?.0.values)
    } else {
        None
    };

    let mut bands: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    let mut weights: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for (p, _) in &points {
        for (&s, &v) in &p.values {
            bands.entry(s).or_default().push(v);
        }
        for (&s, &w) in &p.weights {
            weights.entry(s).or_default().push(w);
        }
    }
    weights.retain(|_, v| v.len() == t_grid.len());

    let mut band_ranges = BTreeMap::new();
    let mut max_jumps = BTreeMap::new();
    for (&s, vals) in &bands {
        let mut series: Vec<f64> = Vec::with_capacity(vals.len() + 1);
        if let Some(l) = left_limit.as_ref().and_then(|l| l.get(&s)) {
            series.push(*l);
        }
        series.extend_from_slice(vals);
        let lo = series.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        band_ranges.insert(s, Interval::closed(lo, hi));
        let jump = series.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        max_jumps.insert(s, jump);
    }

    Ok(BandTable {
        n: spec.order(),
        m: spec.dim(),
        m_norm,
        threshold,
        options: *options,
        t_grid: t_grid.to_vec(),
        left_limit,
        bands,
        weights,
        band_ranges,
        max_jumps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub window: Interval,
    pub gaps: Vec<Interval>,
    pub bound: usize,
    pub within_bound: bool,
    pub whole_line: bool,
    /// The half-lines beyond the window are covered analytically, not computed.
    pub exterior: String,
}

/// `[-(2 pi N)^n, (2 pi N)^n]`.
pub fn gap_window(n: usize, threshold: usize) -> Interval {
    let r = (2.0 * std::f64::consts::PI * threshold as f64).powi(n as i32);
    Interval::closed(-r, r)
}

/// Relative width below which a separation between band ranges is treated as touching.
pub const GAP_FLOOR: f64 = 1e-9;

/// Open intervals inside the window between consecutive closed band ranges.
pub fn detect_gaps(table: &BandTable) -> GapReport {
    let window = gap_window(table.n, table.threshold);
    let mut ranges: Vec<Interval> = table.band_ranges.values().copied().collect();
    ranges.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut gaps = Vec::new();
    let mut reach = f64::NEG_INFINITY;
    for r in &ranges {
        if reach.is_finite() && r.lo > reach {
            let floor = GAP_FLOOR * reach.abs().max(r.lo.abs()).max(1.0);
            let gap = Interval::open(reach, r.lo);
            let inside = gap.hi > window.lo && gap.lo < window.hi;
            if r.lo - reach > floor && inside {
                gaps.push(gap);
            }
        }
        reach = reach.max(r.hi);
    }
    report(table, window, gaps)
}

fn report(table: &BandTable, window: Interval, gaps: Vec<Interval>) -> GapReport {
    let bound = gap_count_bound(table.m, table.threshold);
    GapReport {
        window,
        within_bound: gaps.len() <= bound,
        whole_line: gaps.is_empty(),
        gaps,
        bound,
        exterior: format!(
            "(-inf, {:.6e}] and [{:.6e}, inf) lie in the spectrum by the band-overlap argument",
            window.lo, window.hi
        ),
    }
}

/// Gaps present at both resolutions, with endpoints from the finer table.
pub fn detect_gaps_two_resolutions(coarse: &BandTable, fine: &BandTable) -> GapReport {
    let c = detect_gaps(coarse);
    let f = detect_gaps(fine);
    let gaps = f
        .gaps
        .into_iter()
        .filter(|g| c.gaps.iter().any(|h| !g.disjoint_from(h, 0.0)))
        .collect();
    report(fine, f.window, gaps)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapCheck {
    pub k: i64,
    pub positive: Interval,
    pub negative: Interval,
    pub positive_bands: Vec<i64>,
    pub negative_bands: Vec<i64>,
    pub positive_contained: bool,
    pub negative_contained: bool,
    /// Set when an interval is empty and the containment is vacuous.
    pub note: Option<String>,
}

impl OverlapCheck {
    pub fn passed(&self) -> bool {
        self.positive_contained && self.negative_contained
    }
}

/// Whether the overlap intervals of free block `k` (and `-k`) lie inside every
/// band range attached to that block.
pub fn check_overlap(table: &BandTable, k: i64) -> Result<OverlapCheck> {
    let pair = overlap_intervals(table.threshold, table.n, table.m_norm, k)?;
    let positive_bands = band_group(k, table.threshold, table.m);
    let negative_bands = band_group(-k, table.threshold, table.m);
    let inside = |iv: &Interval, empty: bool, bands: &[i64]| -> Result<bool> {
        if empty {
            return Ok(true);
        }
        bands.iter().try_fold(true, |acc, s| {
            let r = table
                .range(*s)
                .ok_or_else(|| Error::Precondition(format!("band {s} not present in table (k={k})")))?;
            Ok(acc && iv.subset_of(r, true))
        })
    };
    let positive_contained = inside(&pair.positive, pair.positive_empty, &positive_bands)?;
    let negative_contained = inside(&pair.negative, pair.negative_empty, &negative_bands)?;
    let note = (pair.positive_empty || pair.negative_empty).then(|| "empty interval, vacuously contained".to_string());
    Ok(OverlapCheck {
        k,
        positive: pair.positive,
        negative: pair.negative,
        positive_bands,
        negative_bands,
        positive_contained,
        negative_contained,
        note,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmallNormStructure {
    /// `(block k, interval, bands, contained)` for `k = 1, 0, -1`.
    pub containment: Vec<(i64, Interval, Vec<i64>, bool)>,
    /// `(k, k - 1, hulls intersect)` for consecutive blocks from 2 down to -1.
    pub adjacency: Vec<(i64, i64, bool)>,
    pub passed: bool,
}

/// Under the small-norm condition: the three fixed intervals around
/// `pi^n`, `0`, `-pi^n` lie in every band of the matching block, and the hulls
/// of consecutive blocks `2, 1, 0, -1, -2` intersect.
pub fn check_small_m_structure(table: &BandTable) -> Result<SmallNormStructure> {
    if !whole_line_criterion(table.m_norm, table.n) {
        return Err(Error::Precondition(format!(
            "small-norm condition fails: M={} exceeds {}",
            table.m_norm,
            crate::localization::small_norm_limit(table.n)
        )));
    }
    let n = table.n as i32;
    let pn = std::f64::consts::PI.powi(n);
    let r3 = 0.3 * 3f64.powi(n - 2) * pn;
    let targets = [
        (1, Interval::open(pn + 0.3 * pn, 3f64.powi(n) * pn - r3)),
        (0, Interval::open(-pn + pn / 5.0, pn - pn / 5.0)),
        (-1, Interval::open(-(3f64.powi(n) * pn) + r3, -pn - 0.3 * pn)),
    ];
    let mut containment = Vec::new();
    for (k, iv) in targets {
        let bands = band_group(k, table.threshold, table.m);
        let mut ok = true;
        for s in &bands {
            let r = table
                .range(*s)
                .ok_or_else(|| Error::Precondition(format!("band {s} missing from table")))?;
            ok &= iv.subset_of(r, true);
        }
        containment.push((k, iv, bands, ok));
    }
    let mut adjacency = Vec::new();
    for k in [2i64, 1, 0, -1] {
        let a = table.union_hull(&band_group(k, table.threshold, table.m));
        let b = table.union_hull(&band_group(k - 1, table.threshold, table.m));
        let (a, b) = match (a, b) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::Precondition(format!(
                    "bands of blocks {k} and {} missing from table",
                    k - 1
                )))
            }
        };
        adjacency.push((k, k - 1, !a.disjoint_from(&b, 0.0)));
    }
    let passed = containment.iter().all(|c| c.3) && adjacency.iter().all(|a| a.2);
    Ok(SmallNormStructure {
        containment,
        adjacency,
        passed,
    })
}

/// Per-band ratio of the maximum adjacent jump on `coarse` to that on `fine`.
pub fn continuity_ratios(coarse: &BandTable, fine: &BandTable, max_index: i64) -> BTreeMap<i64, (f64, f64, f64)> {
    coarse
        .max_jumps
        .iter()
        .filter(|(s, _)| s.abs() <= max_index)
        .filter_map(|(s, &jc)| {
            let jf = *fine.max_jumps.get(s)?;
            Some((*s, (jc, jf, if jf > 0.0 { jc / jf } else { f64::INFINITY })))
        })
        .collect()
}

/// The small-norm intervals at `t` (re-exported for reporting).
pub fn small_norm_intervals(t: f64, n: usize) -> SmallNormIntervals {
    SmallNormIntervals::at(t, n)
}
