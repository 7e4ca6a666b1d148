//! Fourier–Galerkin realization of the fiber operators.
//!
//! In the Bloch basis `u e^{i(2 pi p + pi t)x}`, `|p| <= K`, the operator
//! `L_{t,eps} = L_t(0) + eps (L_t - L_t(0))` becomes the block matrix
//!
//! ```text
//! block(p, q) = delta_pq (2 pi p + pi t)^n I + eps sum_v (i(2 pi q + pi t))^{n-v} Phat_v[p - q]
//! ```
//!
//! with `Phat_v[c]` the Fourier coefficients of `P_v`. Rows and columns are
//! ordered block-major: index `(p + K) * m + component`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::coeffs::OperatorSpec;
use crate::error::{Error, Result};

pub const DEFAULT_GUARD: usize = 4;
pub const DEFAULT_HERMITIAN_TOL: f64 = 1e-10;

/// `(2 pi p + pi t)`, the frequency of the `p`-th Bloch exponential.
pub fn frequency(p: i64, t: f64) -> f64 {
    2.0 * PI * p as f64 + PI * t
}

#[derive(Debug, Clone)]
pub struct FiberMatrix {
    t: f64,
    epsilon: f64,
    truncation: usize,
    dim: usize,
    order: usize,
    data: DMatrix<Complex64>,
    hermitian_deviation: f64,
}

impl FiberMatrix {
    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    /// `||A - A^H||_F / ||A||_F` (zero for the zero matrix).
    pub fn hermitian_deviation(&self) -> f64 {
        self.hermitian_deviation
    }

    /// The `m x m` block coupling Fourier indices `p` (row) and `q` (column).
    pub fn block(&self, p: i64, q: i64) -> DMatrix<Complex64> {
        let k = self.truncation as i64;
        assert!(p.abs() <= k && q.abs() <= k, "block ({p}, {q}) outside truncation {k}");
        let r = (p + k) as usize * self.dim;
        let c = (q + k) as usize * self.dim;
        self.data.view((r, c), (self.dim, self.dim)).into_owned()
    }

    /// Trusted spectral window `|lambda| <= (2 pi (K - guard))^n`.
    pub fn trusted_limit(&self, guard: usize) -> f64 {
        trusted_limit(self.truncation, guard, self.order)
    }
}

pub fn trusted_limit(truncation: usize, guard: usize, order: usize) -> f64 {
    if truncation <= guard {
        0.0
    } else {
        (2.0 * PI * (truncation - guard) as f64).powi(order as i32)
    }
}

/// Assembles the truncated fiber matrix without gating on Hermitian symmetry.
pub fn assemble_raw(spec: &OperatorSpec, t: f64, epsilon: f64, truncation: usize) -> Result<FiberMatrix> {
    if !(-1.0..=1.0).contains(&t) {
        return Err(Error::Precondition(format!("quasimomentum t={t} outside [-1, 1]")));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Precondition(format!(
            "homotopy parameter {epsilon} outside [0, 1]"
        )));
    }
    if truncation < spec.support_radius() {
        return Err(Error::Precondition(format!(
            "truncation K={truncation} below coefficient support radius {}",
            spec.support_radius()
        )));
    }
    let m = spec.dim();
    let n = spec.order();
    let kk = truncation as i64;
    let size = m * (2 * truncation + 1);
    let mut data = DMatrix::<Complex64>::zeros(size, size);

    for p in -kk..=kk {
        let diag = frequency(p, t).powi(n as i32);
        let r0 = (p + kk) as usize * m;
        for a in 0..m {
            data[(r0 + a, r0 + a)] += Complex64::new(diag, 0.0);
        }
    }
    if epsilon != 0.0 {
        for (v, series) in spec.coefficients() {
            for (c, term) in series.terms() {
                for q in -kk..=kk {
                    let p = q + c;
                    if p.abs() > kk {
                        continue;
                    }
                    let symbol = Complex64::new(0.0, frequency(q, t)).powi((n - v) as i32) * epsilon;
                    let r0 = (p + kk) as usize * m;
                    let c0 = (q + kk) as usize * m;
                    for a in 0..m {
                        for b in 0..m {
                            data[(r0 + a, c0 + b)] += symbol * term[(a, b)];
                        }
                    }
                }
            }
        }
    }

    let norm = data.norm();
    let hermitian_deviation = if norm == 0.0 {
        0.0
    } else {
        (&data - data.adjoint()).norm() / norm
    };
    Ok(FiberMatrix {
        t,
        epsilon,
        truncation,
        dim: m,
        order: n,
        data,
        hermitian_deviation,
    })
}

/// Assembles the fiber matrix and rejects it if it is not Hermitian within `tolerance`.
pub fn assemble_fiber_matrix(
    spec: &OperatorSpec,
    t: f64,
    epsilon: f64,
    truncation: usize,
    tolerance: f64,
) -> Result<FiberMatrix> {
    let fiber = assemble_raw(spec, t, epsilon, truncation)?;
    if fiber.hermitian_deviation > tolerance {
        return Err(Error::NonHermitian {
            t,
            deviation: fiber.hermitian_deviation,
            tolerance,
        });
    }
    Ok(fiber)
}

/// Bloch eigenvalues of one fiber, with the Fourier-block norms of each eigenvector.
#[derive(Debug, Clone, Serialize)]
pub struct FiberSpectrum {
    pub t: f64,
    pub epsilon: f64,
    pub truncation: usize,
    pub dim: usize,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `block_weights[i][p + K]` is the norm of block `p` of eigenvector `i`.
    pub block_weights: Vec<Vec<f64>>,
    pub trusted_limit: f64,
}

impl FiberSpectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn is_reliable(&self, index: usize) -> bool {
        self.eigenvalues
            .get(index)
            .is_some_and(|l| l.abs() <= self.trusted_limit)
    }

    /// Indices of eigenvalues inside the trusted window, ascending.
    pub fn reliable_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.is_reliable(i))
    }

    pub fn reliable_eigenvalues(&self) -> Vec<f64> {
        self.reliable_indices().map(|i| self.eigenvalues[i]).collect()
    }

    /// Norm of the Fourier block `p` of eigenvector `eigen_index`.
    pub fn block_weight(&self, eigen_index: usize, p: i64) -> Result<f64> {
        let k = self.truncation as i64;
        let row = self.block_weights.get(eigen_index).ok_or_else(|| {
            Error::Precondition(format!("eigen index {eigen_index} out of range (0..{})", self.len()))
        })?;
        if p.abs() > k {
            return Err(Error::Precondition(format!("Fourier index {p} outside truncation {k}")));
        }
        Ok(row[(p + k) as usize])
    }

    /// Squared projection of the eigenvectors in `indices` onto `E_{p,t}`, summed.
    pub fn cluster_projection(&self, indices: &[usize], p: i64) -> Result<f64> {
        indices.iter().map(|&i| self.block_weight(i, p).map(|w| w * w)).sum()
    }
}

/// Full Hermitian eigendecomposition of a fiber matrix.
pub fn solve_fiber(matrix: &FiberMatrix, guard: usize) -> Result<FiberSpectrum> {
    let size = matrix.data.nrows();
    let h = (&matrix.data + matrix.data.adjoint()) * Complex64::new(0.5, 0.0);
    let eig =
        SymmetricEigen::try_new(h, f64::EPSILON, 200 * size.max(1)).ok_or(Error::EigenSolver { t: matrix.t, size })?;
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let m = matrix.dim;
    let blocks = 2 * matrix.truncation + 1;
    let mut eigenvalues = Vec::with_capacity(size);
    let mut block_weights = Vec::with_capacity(size);
    for &j in &order {
        eigenvalues.push(eig.eigenvalues[j]);
        let col = eig.eigenvectors.column(j);
        let total = col.norm();
        let weights = (0..blocks)
            .map(|b| {
                let s: f64 = (0..m).map(|a| col[b * m + a].norm_sqr()).sum();
                s.sqrt() / total
            })
            .collect();
        block_weights.push(weights);
    }
    Ok(FiberSpectrum {
        t: matrix.t,
        epsilon: matrix.epsilon,
        truncation: matrix.truncation,
        dim: m,
        eigenvalues,
        block_weights,
        trusted_limit: matrix.trusted_limit(guard),
    })
}

/// Assemble (with the Hermitian gate) and solve in one step.
pub fn fiber_spectrum(
    spec: &OperatorSpec,
    t: f64,
    epsilon: f64,
    truncation: usize,
    guard: usize,
    hermitian_tol: f64,
) -> Result<FiberSpectrum> {
    let matrix = assemble_fiber_matrix(spec, t, epsilon, truncation, hermitian_tol)?;
    solve_fiber(&matrix, guard)
}

/// Largest relative shift `|lambda_K - lambda_{K+extra}| / max(|lambda|, 1)` over
/// the trusted eigenvalues at truncation `K`, each matched to the nearest
/// eigenvalue at `K + extra`.
pub fn truncation_shift(
    spec: &OperatorSpec,
    t: f64,
    truncation: usize,
    extra: usize,
    guard: usize,
    hermitian_tol: f64,
) -> Result<f64> {
    let base = fiber_spectrum(spec, t, 1.0, truncation, guard, hermitian_tol)?;
    let wide = fiber_spectrum(spec, t, 1.0, truncation + extra, guard, hermitian_tol)?;
    let mut worst = 0.0f64;
    for l in base.reliable_eigenvalues() {
        let i = wide.eigenvalues.partition_point(|&x| x < l);
        let near = [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .filter_map(|j| wide.eigenvalues.get(j))
            .map(|x| (x - l).abs())
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(near / l.abs().max(1.0));
    }
    Ok(worst)
}

/// `max(2N + 8, support + 8, k_max + guard + 2, requested)`.
pub fn default_truncation(
    spec: &OperatorSpec,
    threshold: usize,
    k_max: usize,
    guard: usize,
    requested: Option<usize>,
) -> usize {
    let base = (2 * threshold + 8)
        .max(spec.support_radius() + 8)
        .max(k_max + guard + 2);
    requested.map_or(base, |r| r.max(base))
}
