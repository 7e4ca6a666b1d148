//! Periodic matrix coefficients of the differential expression
//!
//! ```text
//! (-i)^n y^(n) + sum_{v=2..n} P_v(x) y^(n-v)
//! ```
//!
//! Every `P_v` is a 1-periodic `m x m` matrix function stored as a finite
//! Fourier series `P_v(x) = sum_c terms[c] e^{i 2 pi c x}`. Keeping the
//! coefficients in Fourier form makes both the coefficient norm `M` and the
//! Galerkin assembly exact up to rounding.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galerkin;

/// Finite Fourier series of a 1-periodic `m x m` matrix function.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierMatrixSeries {
    dim: usize,
    terms: BTreeMap<i64, DMatrix<Complex64>>,
}

impl FourierMatrixSeries {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: BTreeMap::new(),
        }
    }

    /// Adds (or replaces) the coefficient of `e^{i 2 pi c x}`.
    pub fn with_term(mut self, c: i64, matrix: DMatrix<Complex64>) -> Result<Self> {
        if matrix.nrows() != self.dim || matrix.ncols() != self.dim {
            return Err(Error::Validation(format!(
                "harmonic {c}: expected a {d}x{d} matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                d = self.dim
            )));
        }
        if matrix.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            self.terms.remove(&c);
        } else {
            self.terms.insert(c, matrix);
        }
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &DMatrix<Complex64>)> {
        self.terms.iter().map(|(c, a)| (*c, a))
    }

    pub fn term(&self, c: i64) -> Option<&DMatrix<Complex64>> {
        self.terms.get(&c)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest `|c|` with a nonzero term (0 for the zero series).
    pub fn support_radius(&self) -> usize {
        self.terms.keys().map(|c| c.unsigned_abs() as usize).max().unwrap_or(0)
    }

    /// Value of the matrix function at `x`.
    pub fn evaluate(&self, x: f64) -> DMatrix<Complex64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for (c, a) in &self.terms {
            let phase = Complex64::from_polar(1.0, 2.0 * PI * (*c as f64) * x);
            out += a * phase;
        }
        out
    }

    /// Parseval Gram matrix `sum_c terms[c]^H terms[c] = int_0^1 P(x)^H P(x) dx`.
    pub fn gram(&self) -> DMatrix<Complex64> {
        let mut g = DMatrix::zeros(self.dim, self.dim);
        for a in self.terms.values() {
            g += a.adjoint() * a;
        }
        g
    }

    /// `alpha * P(x)`.
    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = Self::zero(self.dim);
        if alpha != 0.0 {
            for (c, a) in &self.terms {
                out.terms.insert(*c, a * Complex64::new(alpha, 0.0));
            }
        }
        out
    }

    /// `P(x + shift)`.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut out = Self::zero(self.dim);
        for (c, a) in &self.terms {
            let phase = Complex64::from_polar(1.0, 2.0 * PI * (*c as f64) * shift);
            out.terms.insert(*c, a * phase);
        }
        out
    }
}

/// Order `n`, matrix size `m` and the coefficients `P_2 ..= P_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    order: usize,
    dim: usize,
    coefficients: BTreeMap<usize, FourierMatrixSeries>,
}

impl OperatorSpec {
    /// The free operator `(-i)^n y^(n)` acting on `C^m`-valued functions.
    ///
    /// `n` must be odd and greater than one, `m` even and at least two.
    pub fn free(order: usize, dim: usize) -> Result<Self> {
        if order <= 1 || order.is_multiple_of(2) {
            return Err(Error::Validation(format!(
                "order n={order} must be an odd integer greater than 1"
            )));
        }
        if dim < 2 || dim % 2 == 1 {
            return Err(Error::Validation(format!(
                "matrix dimension m={dim} must be an even integer >= 2"
            )));
        }
        Ok(Self {
            order,
            dim,
            coefficients: BTreeMap::new(),
        })
    }

    /// Sets `P_v`. A zero series removes the coefficient.
    pub fn with_coefficient(mut self, v: usize, series: FourierMatrixSeries) -> Result<Self> {
        if v < 2 || v > self.order {
            return Err(Error::Validation(format!(
                "coefficient index v={v} outside 2..={}",
                self.order
            )));
        }
        if series.dim() != self.dim {
            return Err(Error::Validation(format!(
                "coefficient P_{v} has dimension {}, operator has m={}",
                series.dim(),
                self.dim
            )));
        }
        if series.is_zero() {
            self.coefficients.remove(&v);
        } else {
            self.coefficients.insert(v, series);
        }
        Ok(self)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coefficient(&self, v: usize) -> Option<&FourierMatrixSeries> {
        self.coefficients.get(&v)
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (usize, &FourierMatrixSeries)> {
        self.coefficients.iter().map(|(v, s)| (*v, s))
    }

    pub fn is_free(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn support_radius(&self) -> usize {
        self.coefficients
            .values()
            .map(FourierMatrixSeries::support_radius)
            .max()
            .unwrap_or(0)
    }

    /// Replaces every `P_v` by `alpha * P_v`.
    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = Self {
            order: self.order,
            dim: self.dim,
            coefficients: BTreeMap::new(),
        };
        for (v, s) in &self.coefficients {
            let scaled = s.scaled(alpha);
            if !scaled.is_zero() {
                out.coefficients.insert(*v, scaled);
            }
        }
        out
    }

    /// Replaces every `P_v(x)` by `P_v(x + shift)`.
    pub fn shifted(&self, shift: f64) -> Self {
        Self {
            order: self.order,
            dim: self.dim,
            coefficients: self.coefficients.iter().map(|(v, s)| (*v, s.shifted(shift))).collect(),
        }
    }

    /// Serializes to the configuration document format.
    pub fn to_document(&self) -> SpecDocument {
        let mut coefficients = Vec::new();
        for (v, series) in &self.coefficients {
            let mut entries = Vec::new();
            for i in 0..self.dim {
                for j in 0..self.dim {
                    let harmonics: Vec<HarmonicDoc> = series
                        .terms()
                        .map(|(c, a)| (c, a[(i, j)]))
                        .filter(|(_, z)| z.norm() != 0.0)
                        .map(|(c, z)| HarmonicDoc { c, re: z.re, im: z.im })
                        .collect();
                    if !harmonics.is_empty() {
                        entries.push(EntryDoc {
                            i: i + 1,
                            j: j + 1,
                            harmonics,
                        });
                    }
                }
            }
            coefficients.push(CoefficientDoc { v: *v, entries });
        }
        SpecDocument {
            n: self.order as i64,
            m: self.dim as i64,
            coefficients,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_document()).expect("spec document serializes")
    }
}

/// Top-level configuration document for an operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    pub n: i64,
    pub m: i64,
    #[serde(default)]
    pub coefficients: Vec<CoefficientDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientDoc {
    pub v: usize,
    #[serde(default)]
    pub entries: Vec<EntryDoc>,
}

/// One matrix entry (1-based row `i`, column `j`) of a coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryDoc {
    pub i: usize,
    pub j: usize,
    #[serde(default)]
    pub harmonics: Vec<HarmonicDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmonicDoc {
    pub c: i64,
    #[serde(default)]
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl SpecDocument {
    pub fn into_spec(self) -> Result<OperatorSpec> {
        if self.n <= 0 || self.m <= 0 {
            return Err(Error::Validation(format!(
                "n={} and m={} must be positive",
                self.n, self.m
            )));
        }
        let mut spec = OperatorSpec::free(self.n as usize, self.m as usize)?;
        let m = spec.dim;
        let mut seen_v = std::collections::BTreeSet::new();
        for coef in self.coefficients {
            if !seen_v.insert(coef.v) {
                return Err(Error::Validation(format!("coefficient v={} listed twice", coef.v)));
            }
            if coef.v < 2 || coef.v > spec.order {
                return Err(Error::Validation(format!(
                    "coefficient index v={} outside 2..={}",
                    coef.v, spec.order
                )));
            }
            let mut terms: BTreeMap<i64, DMatrix<Complex64>> = BTreeMap::new();
            let mut seen = std::collections::BTreeSet::new();
            for entry in coef.entries {
                if entry.i == 0 || entry.i > m || entry.j == 0 || entry.j > m {
                    return Err(Error::Validation(format!(
                        "P_{}: entry ({}, {}) outside 1..={m}",
                        coef.v, entry.i, entry.j
                    )));
                }
                for h in entry.harmonics {
                    if !h.re.is_finite() || !h.im.is_finite() {
                        return Err(Error::Validation(format!(
                            "P_{}: entry ({}, {}) harmonic {} is not finite",
                            coef.v, entry.i, entry.j, h.c
                        )));
                    }
                    if !seen.insert((entry.i, entry.j, h.c)) {
                        return Err(Error::Validation(format!(
                            "P_{}: entry ({}, {}) harmonic {} given twice",
                            coef.v, entry.i, entry.j, h.c
                        )));
                    }
                    let a = terms.entry(h.c).or_insert_with(|| DMatrix::zeros(m, m));
                    a[(entry.i - 1, entry.j - 1)] = Complex64::new(h.re, h.im);
                }
            }
            let mut series = FourierMatrixSeries::zero(m);
            for (c, a) in terms {
                series = series.with_term(c, a)?;
            }
            spec = spec.with_coefficient(coef.v, series)?;
        }
        Ok(spec)
    }
}

/// Parses and validates an operator document (TOML).
pub fn load_operator_spec(document: &str) -> Result<OperatorSpec> {
    let doc: SpecDocument = toml::from_str(document).map_err(|e| Error::Parse(e.to_string()))?;
    doc.into_spec()
}

pub fn load_operator_spec_file(path: impl AsRef<Path>) -> Result<OperatorSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_operator_spec(&text)
}

/// The coefficient norm `M` together with its entrywise upper bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientNorm {
    pub m_value: f64,
    pub entrywise_bound: f64,
    /// `sup_{|u|=1} ||P_v u||` keyed by `v`.
    pub per_v: BTreeMap<usize, f64>,
}

fn largest_hermitian_eigenvalue(h: DMatrix<Complex64>) -> f64 {
    let h = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
    SymmetricEigen::new(h).eigenvalues.iter().copied().fold(0.0, f64::max)
}

/// `M = sum_v sup_{|u|=1} (int_0^1 |P_v(x) u|^2 dx)^{1/2}` via the Parseval Gram matrix.
pub fn compute_m_norm(spec: &OperatorSpec) -> CoefficientNorm {
    let mut per_v = BTreeMap::new();
    let mut entrywise_bound = 0.0;
    for (v, series) in spec.coefficients() {
        let top = largest_hermitian_eigenvalue(series.gram());
        per_v.insert(v, top.max(0.0).sqrt());
        for i in 0..spec.dim {
            for j in 0..spec.dim {
                let sq: f64 = series.terms().map(|(_, a)| a[(i, j)].norm_sqr()).sum();
                entrywise_bound += sq.sqrt();
            }
        }
    }
    CoefficientNorm {
        m_value: per_v.values().fold(0.0, |acc, x| acc + x),
        entrywise_bound,
        per_v,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfAdjointnessReport {
    pub hermitian: bool,
    /// Largest `||A - A^H||_F / ||A||_F` over the sampled fibers.
    pub max_deviation: f64,
    pub worst_t: Option<f64>,
}

/// Checks that the Galerkin fiber matrices are Hermitian at the sampled quasimomenta.
///
/// A `false` verdict is a report, not an error; only bad arguments fail.
pub fn check_formal_self_adjointness(
    spec: &OperatorSpec,
    t_samples: &[f64],
    truncation: usize,
    tolerance: f64,
) -> Result<SelfAdjointnessReport> {
    let mut max_deviation = 0.0_f64;
    let mut worst_t = None;
    for &t in t_samples {
        let fiber = galerkin::assemble_raw(spec, t, 1.0, truncation)?;
        if fiber.hermitian_deviation() > max_deviation || worst_t.is_none() {
            max_deviation = max_deviation.max(fiber.hermitian_deviation());
            worst_t = Some(t);
        }
    }
    Ok(SelfAdjointnessReport {
        hermitian: max_deviation <= tolerance,
        max_deviation,
        worst_t,
    })
}
