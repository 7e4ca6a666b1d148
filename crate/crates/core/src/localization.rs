//! Explicit localization intervals for the Bloch eigenvalues of the fiber
//! operators `L_t`.
//!
//! For `|k| >= N` the perturbed eigenvalues near `(2 pi k + pi t)^n` stay inside
//! `B(k,t)`, the `delta_k(t)`-neighbourhood of the free eigenvalue; the central
//! interval `A(N,t)` holds the remaining `(2N-1)m` eigenvalues. Everything here
//! is closed-form arithmetic on `n`, `m`, `t` and the coefficient norm `M`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;

use crate::coeffs::OperatorSpec;
use crate::error::{Error, Result};

/// Real interval with explicit endpoint closedness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub closed_lo: bool,
    pub closed_hi: bool,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, closed_lo: bool, closed_hi: bool) -> Self {
        debug_assert!(lo <= hi || lo.is_nan() || hi.is_nan(), "interval [{lo}, {hi}]");
        Self {
            lo,
            hi,
            closed_lo,
            closed_hi,
        }
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, false, false)
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, true, true)
    }

    /// `[lo, hi)`
    pub fn half_open(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, true, false)
    }

    pub fn point(x: f64) -> Self {
        Self::closed(x, x)
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.closed_lo && self.closed_hi))
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo).max(0.0)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.closed_lo { x >= self.lo } else { x > self.lo };
        let below = if self.closed_hi { x <= self.hi } else { x < self.hi };
        above && below
    }

    /// Membership after widening by `slack` on both sides.
    pub fn contains_with_slack(&self, x: f64, slack: f64) -> bool {
        if slack <= 0.0 {
            return self.contains(x);
        }
        x >= self.lo - slack && x <= self.hi + slack
    }

    /// `true` if the two sets share no point, or are separated by more than
    /// `slack` when `slack > 0`.
    pub fn disjoint_from(&self, other: &Interval, slack: f64) -> bool {
        if self.is_empty() || other.is_empty() {
            return true;
        }
        // Largest left end and smallest right end, with their closedness.
        let (lo, lo_closed) = match self.lo.total_cmp(&other.lo) {
            std::cmp::Ordering::Greater => (self.lo, self.closed_lo),
            std::cmp::Ordering::Less => (other.lo, other.closed_lo),
            std::cmp::Ordering::Equal => (self.lo, self.closed_lo && other.closed_lo),
        };
        let (hi, hi_closed) = match self.hi.total_cmp(&other.hi) {
            std::cmp::Ordering::Less => (self.hi, self.closed_hi),
            std::cmp::Ordering::Greater => (other.hi, other.closed_hi),
            std::cmp::Ordering::Equal => (self.hi, self.closed_hi && other.closed_hi),
        };
        if slack > 0.0 {
            return lo - hi > slack;
        }
        lo > hi || (lo == hi && !(lo_closed && hi_closed))
    }

    /// `self ⊆ other`, treating `other` as closed when `close_other` is set.
    pub fn subset_of(&self, other: &Interval, close_other: bool) -> bool {
        if self.is_empty() {
            return true;
        }
        let lo_ok = if self.closed_lo && !(other.closed_lo || close_other) {
            self.lo > other.lo
        } else {
            self.lo >= other.lo
        };
        let hi_ok = if self.closed_hi && !(other.closed_hi || close_other) {
            self.hi < other.hi
        } else {
            self.hi <= other.hi
        };
        lo_ok && hi_ok
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{:.6e}, {:.6e}{}",
            if self.closed_lo { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.closed_hi { ']' } else { ')' }
        )
    }
}

/// `(2 pi k + pi t)^n`, the eigenvalue of the free fiber operator on `E_{k,t}`.
pub fn free_eigenvalue(k: i64, t: f64, n: usize) -> f64 {
    (2.0 * PI * k as f64 + PI * t).powi(n as i32)
}

/// Smallest integer `N` with `N >= M / pi^2 + 1`.
///
/// Values within a few ulps of an integer are treated as that integer so
/// that, e.g., `M = pi^2` gives `N = 2` despite rounding in `pi^2 / pi^2`.
pub fn compute_threshold(m_norm: f64) -> usize {
    assert!(m_norm >= 0.0 && m_norm.is_finite(), "M must be finite and nonnegative");
    let x = m_norm / (PI * PI) + 1.0;
    let r = x.round();
    if (x - r).abs() <= 8.0 * f64::EPSILON * x {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// `delta_k(t) = (3/2) pi^{n-2} M |2k + t|^{n-2}`.
pub fn delta(k: i64, t: f64, n: usize, m_norm: f64) -> f64 {
    1.5 * PI.powi(n as i32 - 2) * m_norm * (2.0 * k as f64 + t).abs().powi(n as i32 - 2)
}

/// Small-norm condition `M <= pi^2 2^{-n + 1/2}` under which the spectrum is the whole line.
pub fn whole_line_criterion(m_norm: f64, n: usize) -> bool {
    m_norm <= small_norm_limit(n)
}

pub fn small_norm_limit(n: usize) -> f64 {
    PI * PI * 2f64.powf(-(n as f64) + 0.5)
}

/// Upper bound `m(2N-1) - 1` on the number of spectral gaps.
pub fn gap_count_bound(m: usize, threshold: usize) -> usize {
    assert!(threshold >= 1, "threshold must be >= 1");
    m * (2 * threshold - 1) - 1
}

/// Common subintervals of the `m` bands attached to `B(k,·)` and `B(-k,·)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlapPair {
    pub k: i64,
    pub positive: Interval,
    pub negative: Interval,
    /// The bound is vacuous at this `k`: the radii exceed half the span.
    pub positive_empty: bool,
    pub negative_empty: bool,
}

/// The intervals
/// `((2 pi k - pi)^n + delta_k(-1), (2 pi k + pi)^n - delta_k(1))` and the mirror
/// `((-2 pi k - pi)^n + delta_{-k}(-1), (-2 pi k + pi)^n - delta_{-k}(1))`.
pub fn overlap_intervals(threshold: usize, n: usize, m_norm: f64, k: i64) -> Result<OverlapPair> {
    if k < threshold as i64 {
        return Err(Error::Precondition(format!(
            "overlap interval needs k >= N={threshold}, got k={k}"
        )));
    }
    let build = |kk: i64| {
        let lo = (2.0 * PI * kk as f64 - PI).powi(n as i32) + delta(kk, -1.0, n, m_norm);
        let hi = (2.0 * PI * kk as f64 + PI).powi(n as i32) - delta(kk, 1.0, n, m_norm);
        if lo < hi {
            (Interval::open(lo, hi), false)
        } else {
            (Interval::open(lo, lo), true)
        }
    };
    let (positive, positive_empty) = build(k);
    let (negative, negative_empty) = build(-k);
    Ok(OverlapPair {
        k,
        positive,
        negative,
        positive_empty,
        negative_empty,
    })
}

/// The three small-norm intervals around `(pi t - 2 pi)^n`, `(pi t)^n`, `(pi t + 2 pi)^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmallNormIntervals {
    pub minus: Interval,
    pub center: Interval,
    pub plus: Interval,
}

impl SmallNormIntervals {
    pub fn at(t: f64, n: usize) -> Self {
        let pn = PI.powi(n as i32);
        let c0 = (PI * t).powi(n as i32);
        let cp = (2.0 * PI + PI * t).powi(n as i32);
        let cm = (PI * t - 2.0 * PI).powi(n as i32);
        let rp = 0.3 * (2.0 + t).abs().powi(n as i32 - 2) * pn;
        let rm = 0.3 * (t - 2.0).abs().powi(n as i32 - 2) * pn;
        Self {
            minus: Interval::open(cm - rm, cm + rm),
            center: Interval::open(c0 - pn / 5.0, c0 + pn / 5.0),
            plus: Interval::open(cp - rp, cp + rp),
        }
    }
}

/// All interval families for one quasimomentum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizationPlan {
    pub t: f64,
    pub n: usize,
    pub m: usize,
    pub m_norm: f64,
    pub threshold: usize,
    pub k_max: i64,
    /// `A(N,t) = [(-2 pi N + pi + pi t)^n, (2 pi N - pi + pi t)^n)`.
    pub center_band: Interval,
    /// `B(k,t)` for `N <= |k| <= k_max`. Zero-radius neighbourhoods are stored
    /// as closed points.
    pub satellites: BTreeMap<i64, Interval>,
    /// Gap between `B(k,t)` and `B(k+1,t)`, keyed by `k`, for pairs of satellites
    /// on the same side.
    pub gaps_between: BTreeMap<i64, Interval>,
    /// `D(N,t)`, between `A(N,t)` and `B(N,t)`.
    pub boundary_gap: Interval,
    /// Between `B(-N,t)` and `A(N,t)`.
    pub left_boundary_gap: Interval,
    pub small_norm: Option<SmallNormIntervals>,
}

impl LocalizationPlan {
    pub fn satellite(&self, k: i64) -> Option<&Interval> {
        self.satellites.get(&k)
    }

    /// `I(k,t) = [(2 pi k + pi t - pi)^n, (2 pi k + pi t + pi)^n)`.
    pub fn window(&self, k: i64) -> Interval {
        let c = 2.0 * PI * k as f64 + PI * self.t;
        Interval::half_open((c - PI).powi(self.n as i32), (c + PI).powi(self.n as i32))
    }

    pub fn delta(&self, k: i64) -> f64 {
        delta(k, self.t, self.n, self.m_norm)
    }

    /// Every stored interval with a printable name, in ascending order of
    /// left endpoint (small-norm intervals excluded).
    pub fn named_intervals(&self) -> Vec<(String, Interval)> {
        let mut out = vec![
            ("A(N,t)".to_string(), self.center_band),
            ("D(N,t)".to_string(), self.boundary_gap),
            ("D(-N,t)".to_string(), self.left_boundary_gap),
        ];
        for (k, b) in &self.satellites {
            out.push((format!("B({k},t)"), *b));
        }
        for (k, s) in &self.gaps_between {
            out.push((format!("S({k},t)"), *s));
        }
        out.sort_by(|a, b| a.1.lo.total_cmp(&b.1.lo));
        out
    }

    /// The small-norm family together with `B(k,t)` for `|k| >= 2`.
    pub fn small_norm_family(&self) -> Option<Vec<(String, Interval)>> {
        let c = self.small_norm?;
        let mut out = vec![
            ("C(-1,t)".to_string(), c.minus),
            ("C(t)".to_string(), c.center),
            ("C(1,t)".to_string(), c.plus),
        ];
        for (k, b) in &self.satellites {
            if k.abs() >= 2 {
                out.push((format!("B({k},t)"), *b));
            }
        }
        Some(out)
    }

    /// The first intersecting pair among the main family and, when present,
    /// the small-norm family.
    pub fn overlapping_pair(&self, slack: f64) -> Option<(String, String)> {
        let family: Vec<_> = self
            .named_intervals()
            .into_iter()
            .filter(|(_, iv)| !iv.is_empty())
            .collect();
        Self::first_overlap(&family, slack).or_else(|| {
            self.small_norm_family()
                .and_then(|family| Self::first_overlap(&family, slack))
        })
    }

    /// The first overlapping pair in `family`, if any.
    pub fn first_overlap(family: &[(String, Interval)], slack: f64) -> Option<(String, String)> {
        for (i, (na, a)) in family.iter().enumerate() {
            for (nb, b) in &family[i + 1..] {
                if !a.disjoint_from(b, slack) {
                    return Some((na.clone(), nb.clone()));
                }
            }
        }
        None
    }
}

/// Builds `A(N,t)`, `B(k,t)` for `N <= |k| <= k_max`, the gaps between them and,
/// when the small-norm condition holds, the refined intervals around `k = -1, 0, 1`.
///
/// Fails with [`Error::Overlap`] if any two intervals of a family intersect
/// (compared with `slack`, zero by default).
pub fn build_localization_plan(spec: &OperatorSpec, m_norm: f64, t: f64, k_max: i64) -> Result<LocalizationPlan> {
    build_localization_plan_with_slack(spec, m_norm, t, k_max, 0.0)
}

pub fn build_localization_plan_with_slack(
    spec: &OperatorSpec,
    m_norm: f64,
    t: f64,
    k_max: i64,
    slack: f64,
) -> Result<LocalizationPlan> {
    let plan = plan_intervals(spec, m_norm, t, k_max)?;
    if let Some((first, second)) = plan.overlapping_pair(slack) {
        return Err(Error::Overlap { first, second, t });
    }
    Ok(plan)
}

/// Builds every interval of the plan without checking disjointness.
pub fn plan_intervals(spec: &OperatorSpec, m_norm: f64, t: f64, k_max: i64) -> Result<LocalizationPlan> {
    if !(t > -1.0 - 1e-15 && t <= 1.0) {
        return Err(Error::Precondition(format!("quasimomentum t={t} outside [-1, 1]")));
    }
    if !(m_norm >= 0.0 && m_norm.is_finite()) {
        return Err(Error::Precondition(format!("coefficient norm M={m_norm} must be >= 0")));
    }
    let n = spec.order();
    let threshold = compute_threshold(m_norm);
    if k_max < threshold as i64 {
        return Err(Error::Precondition(format!(
            "k_max={k_max} must be at least N={threshold}"
        )));
    }
    let nn = threshold as f64;
    let pow = |x: f64| x.powi(n as i32);
    let center_band = Interval::half_open(pow(-2.0 * PI * nn + PI + PI * t), pow(2.0 * PI * nn - PI + PI * t));

    let satellite = |k: i64| {
        let c = free_eigenvalue(k, t, n);
        let d = delta(k, t, n, m_norm);
        if d > 0.0 {
            Interval::open(c - d, c + d)
        } else {
            Interval::point(c)
        }
    };
    let mut satellites = BTreeMap::new();
    for k in threshold as i64..=k_max {
        satellites.insert(k, satellite(k));
        satellites.insert(-k, satellite(-k));
    }

    let gap = |left: &Interval, right: &Interval| {
        Interval::new(left.hi, right.lo.max(left.hi), !left.closed_hi, !right.closed_lo)
    };
    let mut gaps_between = BTreeMap::new();
    for k in threshold as i64..k_max {
        gaps_between.insert(k, gap(&satellites[&k], &satellites[&(k + 1)]));
        gaps_between.insert(-k - 1, gap(&satellites[&(-k - 1)], &satellites[&(-k)]));
    }
    let b_right = satellites[&(threshold as i64)];
    let b_left = satellites[&(-(threshold as i64))];
    // D(N,t) is half-open on the right even though B(N,t) is open.
    let mut boundary_gap = gap(&center_band, &b_right);
    boundary_gap.closed_hi = false;
    let left_boundary_gap = gap(&b_left, &center_band);

    let small_norm = whole_line_criterion(m_norm, n).then(|| SmallNormIntervals::at(t, n));

    Ok(LocalizationPlan {
        t,
        n,
        m: spec.dim(),
        m_norm,
        threshold,
        k_max,
        center_band,
        satellites,
        gaps_between,
        boundary_gap,
        left_boundary_gap,
        small_norm,
    })
}
