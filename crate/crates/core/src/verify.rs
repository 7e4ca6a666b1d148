//! The predicate suite run by `floquet verify`.
//!
//! Each predicate produces one [`PredicateRecord`]. Contradictions found by
//! the computation (miscounts, overlapping intervals, failed containments)
//! are recorded as failures; numerical breakdowns (eigensolver, integrator,
//! trusted window) abort the run with an error.

use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;

use crate::bands::{
    build_band_table, check_overlap, check_small_m_structure, detect_gaps_two_resolutions, number_eigenvalues,
    BandOptions, BandTable, GapReport,
};
use crate::coeffs::{check_formal_self_adjointness, compute_m_norm, OperatorSpec};
use crate::error::{Error, ErrorKind, Result};
use crate::galerkin::{self, FiberSpectrum};
use crate::localization::{plan_intervals, whole_line_criterion, Interval, LocalizationPlan};
use crate::monodromy::{DeterminantEvaluator, MonodromyOptions};

#[derive(Debug, Clone, Serialize)]
pub struct PredicateRecord {
    pub name: String,
    pub claim: String,
    pub passed: bool,
    pub witness: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerificationSummary {
    pub order: usize,
    pub dim: usize,
    pub m_norm: f64,
    pub threshold: usize,
    pub truncation: usize,
    pub k_max: i64,
    pub t_grid: Vec<f64>,
    pub predicates: Vec<PredicateRecord>,
    pub all_passed: bool,
}

impl VerificationSummary {
    pub fn predicate(&self, name: &str) -> Option<&PredicateRecord> {
        self.predicates.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub t_grid: Vec<f64>,
    pub bands: BandOptions,
    pub monodromy: MonodromyOptions,
    /// Contour half-height as a fraction of the interval width.
    pub contour_height: f64,
    pub contour_samples: usize,
    /// Weight that each satellite eigenvector must put on its own Fourier block.
    pub weight_threshold: f64,
    /// Relative eigenvalue shift allowed when the truncation grows by `stability_increment`.
    pub eig_stability: f64,
    pub stability_increment: usize,
}

impl VerifyOptions {
    pub fn defaults(spec: &OperatorSpec, t_grid: Vec<f64>) -> Self {
        Self {
            t_grid,
            bands: BandOptions::defaults(spec),
            monodromy: MonodromyOptions::default(),
            contour_height: 0.25,
            contour_samples: 128,
            weight_threshold: 2.0 / 3.0,
            eig_stability: 1e-8,
            stability_increment: 8,
        }
    }
}

pub const PREDICATES: [(&str, &str); 11] = [
    ("hermitian_fiber", "fiber matrices are Hermitian on the grid"),
    (
        "localization_disjoint",
        "A(N,t), B(k,t), S(k,t), D(N,t) (and the small-norm intervals) are pairwise disjoint",
    ),
    (
        "localization_coverage",
        "every eigenvalue between B(-k_max,t) and B(k_max,t) lies in A(N,t) or some B(k,t)",
    ),
    (
        "localization_counts",
        "B(k,t) holds m eigenvalues and A(N,t) holds (2N-1)m",
    ),
    (
        "eigenvector_weight",
        "eigenvectors numbered into B(k,t) put more than the weight threshold on block k",
    ),
    (
        "small_norm_localization",
        "under the small-norm condition C(-1,t), C(t), C(1,t) hold m eigenvalues each",
    ),
    (
        "band_overlap",
        "the overlap intervals lie inside every band attached to blocks k and -k",
    ),
    ("gap_count_bound", "the number of gaps is at most m(2N-1)-1"),
    (
        "whole_line_spectrum",
        "under the small-norm condition the bands leave no gap",
    ),
    (
        "determinant_counts",
        "winding counts of the characteristic determinant equal Galerkin counts",
    ),
    (
        "truncation_stability",
        "trusted eigenvalues move less than the stability tolerance when the truncation grows",
    ),
];

fn claim(name: &str) -> String {
    PREDICATES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, c)| c.to_string())
        .unwrap_or_default()
}

fn record(name: &str, passed: bool, witness: Value) -> PredicateRecord {
    PredicateRecord {
        name: name.to_string(),
        claim: claim(name),
        passed,
        witness,
    }
}

/// Falsifications become `Ok(Err(witness))`; other errors propagate.
fn falsifiable<T>(r: Result<T>) -> Result<std::result::Result<T, Value>> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(e) if e.kind() == ErrorKind::Falsified => Ok(Err(json!({ "error": e.to_string() }))),
        Err(e) => Err(e),
    }
}

fn count_in(values: &[f64], iv: &Interval) -> usize {
    let point = iv.lo == iv.hi;
    values
        .iter()
        .filter(|&&l| {
            if point {
                iv.contains_with_slack(l, 1e-9 * l.abs().max(1.0))
            } else {
                iv.contains(l)
            }
        })
        .count()
}

/// Adds the midpoint of each grid cell (the cell left of the first point
/// starts at -1).
pub fn refine_grid(grid: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * grid.len());
    let mut prev = -1.0;
    for &t in grid {
        if t > prev {
            out.push(0.5 * (prev + t));
        }
        out.push(t);
        prev = t;
    }
    out.dedup();
    out.retain(|&t| t > -1.0);
    out
}

struct PointData {
    t: f64,
    plan: LocalizationPlan,
    spectrum: FiberSpectrum,
}

pub fn run_verification(spec: &OperatorSpec, options: &VerifyOptions) -> Result<VerificationSummary> {
    let norm = compute_m_norm(spec);
    let m_norm = norm.m_value;
    let bands = &options.bands;
    let threshold = crate::localization::compute_threshold(m_norm);
    let m = spec.dim();
    let grid = &options.t_grid;
    let mut records: Vec<PredicateRecord> = Vec::new();

    let sa = check_formal_self_adjointness(spec, grid, bands.truncation, bands.hermitian_tol)?;
    records.push(record(
        "hermitian_fiber",
        sa.hermitian,
        json!({ "max_deviation": sa.max_deviation, "worst_t": sa.worst_t, "tolerance": bands.hermitian_tol }),
    ));

    let summary = |records: Vec<PredicateRecord>| VerificationSummary {
        order: spec.order(),
        dim: m,
        m_norm,
        threshold,
        truncation: bands.truncation,
        k_max: bands.k_max,
        t_grid: grid.clone(),
        all_passed: records.iter().all(|r| r.passed),
        predicates: records,
    };

    if !sa.hermitian {
        for (name, _) in PREDICATES.iter().skip(1) {
            records.push(record(
                name,
                false,
                json!({ "not_evaluated": "fiber matrices are not Hermitian" }),
            ));
        }
        return Ok(summary(records));
    }

    let points: Vec<PointData> = grid
        .iter()
        .map(|&t| {
            let plan = plan_intervals(spec, m_norm, t, bands.k_max)?;
            let spectrum = galerkin::fiber_spectrum(spec, t, 1.0, bands.truncation, bands.guard, bands.hermitian_tol)?;
            Ok(PointData { t, plan, spectrum })
        })
        .collect::<Result<_>>()?;

    // Disjointness.
    let overlaps: Vec<Value> = points
        .iter()
        .filter_map(|p| {
            p.plan
                .overlapping_pair(0.0)
                .map(|(a, b)| json!({ "t": p.t, "first": a, "second": b }))
        })
        .collect();
    records.push(record(
        "localization_disjoint",
        overlaps.is_empty(),
        json!({ "overlaps": overlaps }),
    ));

    // Coverage and counts.
    let mut uncovered = Vec::new();
    let mut miscounts = Vec::new();
    let mut small_norm_miscounts = Vec::new();
    let mut min_weight = f64::INFINITY;
    let mut weight_failures = Vec::new();
    for p in &points {
        let lo_b = p.plan.satellites[&(-bands.k_max)];
        let hi_b = p.plan.satellites[&bands.k_max];
        if lo_b.lo.abs().max(hi_b.hi.abs()) > p.spectrum.trusted_limit {
            return Err(Error::TrustedWindow {
                t: p.t,
                limit: p.spectrum.trusted_limit,
                what: format!("B(+-{},t)", bands.k_max),
            });
        }
        let eig = p.spectrum.reliable_eigenvalues();
        for &l in eig.iter().filter(|&&l| l >= lo_b.lo && l <= hi_b.hi) {
            let covered =
                count_in(&[l], &p.plan.center_band) > 0 || p.plan.satellites.values().any(|b| count_in(&[l], b) > 0);
            if !covered {
                uncovered.push(json!({ "t": p.t, "lambda": l }));
            }
        }
        let expected_a = (2 * threshold - 1) * m;
        let found_a = count_in(&eig, &p.plan.center_band);
        if found_a != expected_a {
            miscounts.push(json!({ "t": p.t, "interval": "A(N,t)", "expected": expected_a, "found": found_a }));
        }
        for (k, b) in &p.plan.satellites {
            let found = count_in(&eig, b);
            if found != m {
                miscounts.push(json!({ "t": p.t, "interval": format!("B({k},t)"), "expected": m, "found": found }));
            }
        }
        if let Some(c) = p.plan.small_norm {
            for (name, iv) in [("C(-1,t)", c.minus), ("C(t)", c.center), ("C(1,t)", c.plus)] {
                let found = count_in(&eig, &iv);
                if found != m {
                    small_norm_miscounts.push(json!({ "t": p.t, "interval": name, "expected": m, "found": found }));
                }
            }
        }
        let negative = bands.s_max + (2 * threshold - 1) * m;
        match falsifiable(number_eigenvalues(&p.spectrum, &p.plan, bands.s_max, negative))? {
            Ok(num) => {
                for (s, w) in num.weights {
                    min_weight = min_weight.min(w);
                    if w <= options.weight_threshold {
                        weight_failures.push(json!({ "t": p.t, "band": s, "weight": w }));
                    }
                }
            }
            Err(w) => weight_failures.push(json!({ "t": p.t, "numbering": w })),
        }
    }
    records.push(record(
        "localization_coverage",
        uncovered.is_empty(),
        json!({ "uncovered": uncovered }),
    ));
    records.push(record(
        "localization_counts",
        miscounts.is_empty(),
        json!({ "miscounts": miscounts }),
    ));
    records.push(record(
        "eigenvector_weight",
        weight_failures.is_empty(),
        json!({ "min_weight": min_weight, "threshold": options.weight_threshold, "failures": weight_failures }),
    ));
    let small = whole_line_criterion(m_norm, spec.order());
    records.push(record(
        "small_norm_localization",
        small_norm_miscounts.is_empty(),
        json!({ "applicable": small, "miscounts": small_norm_miscounts }),
    ));

    // Band-table predicates.
    let tables = falsifiable(build_band_table(spec, grid, bands).and_then(|coarse| {
        let fine = build_band_table(spec, &refine_grid(grid), bands)?;
        Ok((coarse, fine))
    }))?;
    match tables {
        Ok((coarse, fine)) => band_predicates(&mut records, &coarse, &fine, small)?,
        Err(w) => {
            for name in ["band_overlap", "gap_count_bound", "whole_line_spectrum"] {
                records.push(record(name, false, json!({ "band_table": w.clone() })));
            }
        }
    }

    records.push(determinant_counts(spec, &points, options)?);

    let mut worst = (0.0f64, f64::NAN);
    for &t in grid {
        let shift = galerkin::truncation_shift(
            spec,
            t,
            bands.truncation,
            options.stability_increment,
            bands.guard,
            bands.hermitian_tol,
        )?;
        if shift >= worst.0 {
            worst = (shift, t);
        }
    }
    records.push(record(
        "truncation_stability",
        worst.0 < options.eig_stability,
        json!({ "max_shift": worst.0, "worst_t": worst.1, "tolerance": options.eig_stability,
                "truncation": bands.truncation, "increment": options.stability_increment }),
    ));
    Ok(summary(records))
}

fn band_predicates(
    records: &mut Vec<PredicateRecord>,
    coarse: &BandTable,
    fine: &BandTable,
    small: bool,
) -> Result<()> {
    let mut overlap = Vec::new();
    let mut ok = true;
    for k in coarse.threshold as i64..=coarse.options.k_max {
        let c = check_overlap(coarse, k)?;
        ok &= c.passed();
        overlap.push(serde_json::to_value(&c).unwrap_or(Value::Null));
    }
    records.push(record("band_overlap", ok, json!({ "checks": overlap })));

    let gaps: GapReport = detect_gaps_two_resolutions(coarse, fine);
    records.push(record(
        "gap_count_bound",
        gaps.within_bound,
        serde_json::to_value(&gaps).unwrap_or(Value::Null),
    ));

    if small {
        let structure = check_small_m_structure(coarse)?;
        let passed = structure.passed && gaps.whole_line;
        records.push(record(
            "whole_line_spectrum",
            passed,
            json!({ "applicable": true, "structure": structure, "gaps": gaps.gaps }),
        ));
    } else {
        records.push(record("whole_line_spectrum", true, json!({ "applicable": false })));
    }
    Ok(())
}

fn determinant_counts(spec: &OperatorSpec, points: &[PointData], options: &VerifyOptions) -> Result<PredicateRecord> {
    let evaluator = DeterminantEvaluator::new(spec, options.monodromy);
    let window = evaluator.window();
    let mut checked = 0usize;
    let mut mismatches = Vec::new();
    for p in points {
        let eig = p.spectrum.reliable_eigenvalues();
        let mut intervals: Vec<(String, Interval)> = vec![("A(N,t)".into(), p.plan.center_band)];
        for (k, b) in &p.plan.satellites {
            let b = if b.width() == 0.0 {
                Interval::open(b.lo - 1.0, b.hi + 1.0)
            } else {
                *b
            };
            intervals.push((format!("B({k},t)"), b));
        }
        for (name, iv) in intervals {
            let height = options.contour_height * iv.width();
            let reach = iv.lo.abs().max(iv.hi.abs()).hypot(height);
            if reach > window {
                continue;
            }
            let galerkin_count = count_in(&eig, &Interval::open(iv.lo, iv.hi));
            let wound = evaluator.count_roots(p.t, iv.lo, iv.hi, height, options.contour_samples);
            match wound {
                Ok(c) => {
                    checked += 1;
                    if c.count != galerkin_count as i64 {
                        mismatches.push(
                            json!({ "t": p.t, "interval": name, "galerkin": galerkin_count, "winding": c.count }),
                        );
                    }
                }
                Err(Error::EndpointOnRoot { lambda }) => {
                    mismatches.push(json!({ "t": p.t, "interval": name, "endpoint_on_root": lambda }));
                }
                Err(e) => return Err(e),
            }
        }
    }
    let mut witness = BTreeMap::new();
    witness.insert("window", json!(window));
    witness.insert("checked", json!(checked));
    witness.insert("mismatches", json!(mismatches));
    Ok(record(
        "determinant_counts",
        mismatches.is_empty(),
        serde_json::to_value(witness).unwrap_or(Value::Null),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bands::uniform_grid;
    use crate::desk;
    use std::f64::consts::PI;

    #[test]
    fn refine_grid_doubles_uniform() {
        let g = uniform_grid(-1.0, 1.0, 4);
        let r = refine_grid(&g);
        let want = uniform_grid(-1.0, 1.0, 8);
        assert_eq!(r.len(), want.len());
        for (a, b) in r.iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn free_operator_passes_everything() {
        let spec = OperatorSpec::free(3, 2).unwrap();
        let s = run_verification(&spec, &VerifyOptions::defaults(&spec, uniform_grid(-1.0, 1.0, 6))).unwrap();
        for p in &s.predicates {
            assert!(p.passed, "{}: {}", p.name, p.witness);
        }
        assert_eq!(s.predicates.len(), PREDICATES.len());
    }

    #[test]
    fn non_hermitian_spec_fails() {
        let spec = desk::cosine_identity_p2();
        let s = run_verification(&spec, &VerifyOptions::defaults(&spec, uniform_grid(-1.0, 1.0, 4))).unwrap();
        assert!(!s.all_passed);
        assert!(!s.predicate("hermitian_fiber").unwrap().passed);
        assert_eq!(s.predicates.len(), PREDICATES.len());
    }

    #[test]
    fn desk_example_passes() {
        let spec = desk::cosine_example(PI * PI);
        let s = run_verification(&spec, &VerifyOptions::defaults(&spec, uniform_grid(-1.0, 1.0, 4))).unwrap();
        for p in &s.predicates {
            assert!(p.passed, "{}: {}", p.name, p.witness);
        }
    }
}
