//! Characteristic determinant of the quasiperiodic problem via the fundamental
//! matrix of the first-order system.
//!
//! The order-`n` equation is rewritten for the stacked state
//! `(Y, Y', ..., Y^{(n-1)})` with `Y^{(n)} = i^n (lambda Y - sum_v P_v Y^{(n-v)})`
//! and integrated over `[0, 1]` from the identity. With `Phi` the resulting
//! `nm x nm` matrix, `Delta(lambda, t) = det(Phi - e^{i pi t} I)`; its zeros in
//! `lambda` are the Bloch eigenvalues at `t`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

use crate::coeffs::OperatorSpec;
use crate::error::{Error, Result};
use crate::ode::{dop853, IntegrationStats, OdeFailure, Tolerances};

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonodromyOptions {
    pub tolerances: Tolerances,
    /// Window `|lambda| <= (window_multiple * pi)^n`.
    pub window_multiple: f64,
    /// Maximum number of bisections of one contour segment.
    pub refinement_limit: usize,
    /// Relative floor on `|Delta|` at the real endpoints of a counting contour.
    pub floor: f64,
    pub scan_samples: usize,
}

impl Default for MonodromyOptions {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            window_multiple: 6.0,
            refinement_limit: 20,
            floor: 1e-12,
            scan_samples: 64,
        }
    }
}

impl MonodromyOptions {
    pub fn window(&self, order: usize) -> f64 {
        (self.window_multiple * PI).powi(order as i32)
    }
}

fn lambda_label(lambda: C) -> String {
    format!("{:.12e}{:+.12e}i", lambda.re, lambda.im)
}

/// Harmonics of one coefficient: `(2 pi c, row-major m x m term)`.
type Harmonics = Vec<(f64, Vec<C>)>;

/// Coefficients flattened for fast pointwise evaluation.
#[derive(Debug, Clone)]
struct CoefficientTable {
    order: usize,
    dim: usize,
    rows: Vec<(usize, Harmonics)>,
}

impl CoefficientTable {
    fn new(spec: &OperatorSpec) -> Self {
        let m = spec.dim();
        let rows = spec
            .coefficients()
            .filter(|(_, s)| !s.is_zero())
            .map(|(v, s)| {
                let terms = s
                    .terms()
                    .map(|(c, mat)| {
                        let flat = (0..m * m).map(|idx| mat[(idx / m, idx % m)]).collect();
                        (2.0 * PI * c as f64, flat)
                    })
                    .collect();
                (v, terms)
            })
            .collect();
        Self {
            order: spec.order(),
            dim: m,
            rows,
        }
    }

    /// `out[v_slot]` receives `P_v(x)` row-major.
    fn evaluate(&self, x: f64, out: &mut [Vec<C>]) {
        for ((_, terms), dst) in self.rows.iter().zip(out.iter_mut()) {
            dst.iter_mut().for_each(|z| *z = C::new(0.0, 0.0));
            for (freq, flat) in terms {
                let phase = C::from_polar(1.0, freq * x);
                for (d, s) in dst.iter_mut().zip(flat) {
                    *d += s * phase;
                }
            }
        }
    }
}

/// Values at `x = 1` of the canonical fundamental solutions.
#[derive(Debug, Clone)]
pub struct FundamentalSolutions {
    pub lambda: C,
    pub order: usize,
    pub dim: usize,
    /// Block `(v, k)` (rows `v m..`, columns `k m..`) is `Y_{k+1}^{(v)}(1)`.
    pub monodromy: DMatrix<C>,
    pub stats: IntegrationStats,
}

impl FundamentalSolutions {
    /// `Y_k^{(derivative)}(1)` for `k = 1..=n`, `derivative = 0..n`.
    pub fn solution(&self, k: usize, derivative: usize) -> DMatrix<C> {
        assert!((1..=self.order).contains(&k) && derivative < self.order);
        let m = self.dim;
        self.monodromy.view((derivative * m, (k - 1) * m), (m, m)).into_owned()
    }

    /// `det(Phi(1) - e^{i pi t} I)`.
    pub fn determinant(&self, t: f64) -> C {
        let mu = C::from_polar(1.0, PI * t);
        determinant_at_multiplier(&self.monodromy, mu)
    }
}

fn determinant_at_multiplier(phi: &DMatrix<C>, mu: C) -> C {
    let mut a = phi.clone();
    for i in 0..a.nrows() {
        a[(i, i)] -= mu;
    }
    a.lu().determinant()
}

/// Reusable integrator for one operator.
#[derive(Debug, Clone)]
pub struct DeterminantEvaluator {
    table: CoefficientTable,
    options: MonodromyOptions,
}

impl DeterminantEvaluator {
    pub fn new(spec: &OperatorSpec, options: MonodromyOptions) -> Self {
        Self {
            table: CoefficientTable::new(spec),
            options,
        }
    }

    pub fn options(&self) -> &MonodromyOptions {
        &self.options
    }

    pub fn window(&self) -> f64 {
        self.options.window(self.table.order)
    }

    pub fn check_window(&self, lambda: C) -> Result<()> {
        let w = self.window();
        if lambda.norm() > w || !lambda.norm().is_finite() {
            return Err(Error::OutOfWindow {
                lambda: lambda_label(lambda),
                window: w,
            });
        }
        Ok(())
    }

    pub fn fundamental(&self, lambda: C) -> Result<FundamentalSolutions> {
        self.check_window(lambda)?;
        let n = self.table.order;
        let m = self.table.dim;
        let nm = n * m;
        let mut y0 = vec![C::new(0.0, 0.0); nm * nm];
        for i in 0..nm {
            y0[i * nm + i] = C::new(1.0, 0.0);
        }
        let i_pow_n = C::new(0.0, 1.0).powi(n as i32);
        let mut pv: Vec<Vec<C>> = vec![vec![C::new(0.0, 0.0); m * m]; self.table.rows.len()];
        let table = &self.table;
        // State is column-major nm x nm; column `col` starts at `col * nm`.
        let rhs = |x: f64, y: &[C], dy: &mut [C]| {
            table.evaluate(x, &mut pv);
            for col in 0..nm {
                let base = col * nm;
                dy[base..base + (n - 1) * m].copy_from_slice(&y[base + m..base + n * m]);
                for a in 0..m {
                    let mut acc = y[base + a] * lambda;
                    for ((v, _), p) in table.rows.iter().zip(&pv) {
                        let block = base + (n - v) * m;
                        for b in 0..m {
                            acc -= p[a * m + b] * y[block + b];
                        }
                    }
                    dy[base + (n - 1) * m + a] = acc * i_pow_n;
                }
            }
        };
        let (y1, stats) = dop853(rhs, 0.0, 1.0, &y0, &self.options.tolerances).map_err(|e| match e {
            OdeFailure::StepSizeUnderflow { x } => Error::StepSizeUnderflow {
                lambda: lambda_label(lambda),
                x,
            },
            OdeFailure::TooManySteps { steps } => Error::TooManySteps {
                lambda: lambda_label(lambda),
                steps,
            },
        })?;
        Ok(FundamentalSolutions {
            lambda,
            order: n,
            dim: m,
            monodromy: DMatrix::from_column_slice(nm, nm, &y1),
            stats,
        })
    }

    pub fn determinant(&self, lambda: C, t: f64) -> Result<C> {
        Ok(self.fundamental(lambda)?.determinant(t))
    }

    fn determinants(&self, points: &[C], t: f64) -> Result<Vec<C>> {
        points.par_iter().map(|&z| self.determinant(z, t)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharacteristicValue {
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub t: f64,
    pub re: f64,
    pub im: f64,
}

impl CharacteristicValue {
    pub fn value(&self) -> C {
        C::new(self.re, self.im)
    }
}

pub fn integrate_fundamental(
    spec: &OperatorSpec,
    lambda: C,
    options: &MonodromyOptions,
) -> Result<FundamentalSolutions> {
    DeterminantEvaluator::new(spec, *options).fundamental(lambda)
}

pub fn characteristic_determinant(
    spec: &OperatorSpec,
    lambda: C,
    t: f64,
    options: &MonodromyOptions,
) -> Result<CharacteristicValue> {
    let d = DeterminantEvaluator::new(spec, *options).determinant(lambda, t)?;
    Ok(CharacteristicValue {
        lambda_re: lambda.re,
        lambda_im: lambda.im,
        t,
        re: d.re,
        im: d.im,
    })
}

/// The `n` roots of `omega^n = lambda`.
pub fn nth_roots(lambda: C, n: usize) -> Vec<C> {
    let r = lambda.norm().powf(1.0 / n as f64);
    let theta = lambda.arg();
    (0..n)
        .map(|j| C::from_polar(r, (theta + 2.0 * PI * j as f64) / n as f64))
        .collect()
}

/// Closed form for the free operator: `prod_j (e^{i omega_j} - e^{i pi t})^m`.
pub fn free_determinant(order: usize, dim: usize, lambda: C, t: f64) -> C {
    let mu = C::from_polar(1.0, PI * t);
    nth_roots(lambda, order)
        .into_iter()
        .map(|w| (C::new(0.0, 1.0) * w).exp() - mu)
        .fold(C::new(1.0, 0.0), |acc, f| acc * f.powi(dim as i32))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootCount {
    pub count: i64,
    pub evaluations: usize,
    /// Smallest `|Delta|` on the contour relative to the largest.
    pub min_ratio: f64,
}

fn phase_step(a: C, b: C) -> f64 {
    (b / a).arg()
}

/// Number of zeros of `Delta(., t)` inside the rectangle
/// `[lo, hi] x [-height, height]`, by accumulated phase.
pub fn count_roots_in_interval(
    spec: &OperatorSpec,
    t: f64,
    lo: f64,
    hi: f64,
    height: f64,
    samples: usize,
    options: &MonodromyOptions,
) -> Result<RootCount> {
    DeterminantEvaluator::new(spec, *options).count_roots(t, lo, hi, height, samples)
}

impl DeterminantEvaluator {
    pub fn count_roots(&self, t: f64, lo: f64, hi: f64, height: f64, samples: usize) -> Result<RootCount> {
        if !(lo < hi) || !(height > 0.0) {
            return Err(Error::Precondition(format!(
                "contour needs lo < hi and height > 0 (got [{lo}, {hi}], height {height})"
            )));
        }
        let corners = [
            C::new(lo, -height),
            C::new(hi, -height),
            C::new(hi, height),
            C::new(lo, height),
        ];
        for &z in &corners {
            self.check_window(z)?;
        }
        let width = hi - lo;
        let perimeter = 2.0 * (width + 2.0 * height);
        let samples = samples.max(32);
        let mut points = Vec::with_capacity(samples + 8);
        for e in 0..4 {
            let (a, b) = (corners[e], corners[(e + 1) % 4]);
            let len = (b - a).norm();
            let count = ((samples as f64 * len / perimeter).ceil() as usize).max(8);
            for j in 0..count {
                points.push(a + (b - a) * (j as f64 / count as f64));
            }
        }
        let values = self.determinants(&points, t)?;
        let mut evaluations = values.len();
        let max_abs = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut min_abs = values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
        if !(max_abs > 0.0) || !max_abs.is_finite() {
            return Err(Error::EndpointOnRoot {
                lambda: lambda_label(points[0]),
            });
        }
        for &x in &[lo, hi] {
            let d = self.determinant(C::new(x, 0.0), t)?;
            evaluations += 1;
            if d.norm() < self.options.floor * max_abs {
                return Err(Error::EndpointOnRoot {
                    lambda: lambda_label(C::new(x, 0.0)),
                });
            }
        }

        let mut total = 0.0;
        for i in 0..points.len() {
            let j = (i + 1) % points.len();
            total += self.refine_segment(
                t,
                (points[i], values[i]),
                (points[j], values[j]),
                0,
                &mut evaluations,
                &mut min_abs,
            )?;
        }
        Ok(RootCount {
            count: (total / (2.0 * PI)).round() as i64,
            evaluations,
            min_ratio: min_abs / max_abs,
        })
    }

    fn refine_segment(
        &self,
        t: f64,
        a: (C, C),
        b: (C, C),
        depth: usize,
        evaluations: &mut usize,
        min_abs: &mut f64,
    ) -> Result<f64> {
        let step = phase_step(a.1, b.1);
        if step.abs() <= PI / 2.0 {
            return Ok(step);
        }
        if depth >= self.options.refinement_limit {
            return Err(Error::EndpointOnRoot {
                lambda: lambda_label((a.0 + b.0) * 0.5),
            });
        }
        let mid = (a.0 + b.0) * 0.5;
        let dm = self.determinant(mid, t)?;
        *evaluations += 1;
        *min_abs = min_abs.min(dm.norm());
        if dm.norm() == 0.0 {
            return Err(Error::EndpointOnRoot {
                lambda: lambda_label(mid),
            });
        }
        Ok(self.refine_segment(t, a, (mid, dm), depth + 1, evaluations, min_abs)?
            + self.refine_segment(t, (mid, dm), b, depth + 1, evaluations, min_abs)?)
    }

    /// Zeros of `Delta(., t)` in the open disk `|lambda - center| < radius`,
    /// from the contour moments of `log Delta` on its boundary.
    pub fn roots_in_disk(&self, t: f64, center: C, radius: f64) -> Result<Vec<C>> {
        if !(radius > 0.0) {
            return Err(Error::Precondition(format!("disk radius {radius} must be positive")));
        }
        self.check_window(center + C::new(center.re.signum() * radius, 0.0))?;
        self.check_window(center + C::new(0.0, radius))?;
        let mut samples = 128usize;
        let (thetas, values) = loop {
            let thetas: Vec<f64> = (0..samples).map(|k| 2.0 * PI * k as f64 / samples as f64).collect();
            let points: Vec<C> = thetas.iter().map(|&th| center + C::from_polar(radius, th)).collect();
            let values = self.determinants(&points, t)?;
            let smooth = (0..samples).all(|k| phase_step(values[k], values[(k + 1) % samples]).abs() < PI / 4.0);
            if smooth && values.iter().all(|v| v.norm() > 0.0) {
                break (thetas, values);
            }
            if samples >= 8192 {
                return Err(Error::EndpointOnRoot {
                    lambda: lambda_label(center + C::new(radius, 0.0)),
                });
            }
            samples *= 2;
        };

        // Continuous branch of log Delta along the circle.
        let mut logs = Vec::with_capacity(samples);
        let mut phase = values[0].arg();
        logs.push(C::new(values[0].norm().ln(), phase));
        for k in 1..samples {
            phase += phase_step(values[k - 1], values[k]);
            logs.push(C::new(values[k].norm().ln(), phase));
        }
        let total = phase + phase_step(values[samples - 1], values[0]) - values[0].arg();
        let count = (total / (2.0 * PI)).round() as i64;
        if count <= 0 {
            return Ok(Vec::new());
        }
        let count = count as usize;

        // g(theta) = log Delta - i N theta is periodic; its e^{-ij theta}
        // coefficient is -p_j / j with p_j the power sums of the normalized roots.
        let power_sums: Vec<C> = (1..=count)
            .map(|j| {
                let coeff = thetas
                    .iter()
                    .zip(&logs)
                    .map(|(&th, g)| (g - C::new(0.0, count as f64 * th)) * C::from_polar(1.0, j as f64 * th))
                    .sum::<C>()
                    / samples as f64;
                -coeff * j as f64
            })
            .collect();
        let roots = roots_from_power_sums(&power_sums);
        Ok(roots.into_iter().map(|w| center + w * radius).collect())
    }

    /// `(lambda, Delta)` on a uniform grid of `[lo, hi]`.
    pub fn scan(&self, t: f64, lo: f64, hi: f64, samples: usize) -> Result<Vec<(f64, C)>> {
        let samples = samples.max(2);
        let xs: Vec<f64> = (0..samples)
            .map(|j| lo + (hi - lo) * j as f64 / (samples - 1) as f64)
            .collect();
        let pts: Vec<C> = xs.iter().map(|&x| C::new(x, 0.0)).collect();
        let vals = self.determinants(&pts, t)?;
        Ok(xs.into_iter().zip(vals).collect())
    }
}

/// Monic polynomial roots from power sums via Newton's identities.
fn roots_from_power_sums(p: &[C]) -> Vec<C> {
    let n = p.len();
    // e[k]: elementary symmetric polynomials.
    let mut e = vec![C::new(1.0, 0.0); n + 1];
    for k in 1..=n {
        let mut acc = C::new(0.0, 0.0);
        for i in 1..=k {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            acc += e[k - i] * p[i - 1] * sign;
        }
        e[k] = acc / k as f64;
    }
    // z^n - e1 z^{n-1} + e2 z^{n-2} - ...
    let coeffs: Vec<C> = (0..=n).map(|k| if k % 2 == 0 { e[k] } else { -e[k] }).collect();
    polynomial_roots(&coeffs)
}

/// Roots of the monic polynomial `sum_k coeffs[k] z^{n-k}` (Durand–Kerner).
fn polynomial_roots(coeffs: &[C]) -> Vec<C> {
    let n = coeffs.len() - 1;
    let eval = |z: C| coeffs.iter().fold(C::new(0.0, 0.0), |acc, &c| acc * z + c);
    let seed = C::new(0.4, 0.9);
    let mut z: Vec<C> = (0..n).map(|k| seed.powi(k as i32)).collect();
    for _ in 0..2000 {
        let mut change = 0.0f64;
        for i in 0..n {
            let mut denom = C::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= z[i] - z[j];
                }
            }
            if denom.norm() == 0.0 {
                denom = C::new(1e-14, 0.0);
            }
            let delta = eval(z[i]) / denom;
            z[i] -= delta;
            change = change.max(delta.norm());
        }
        if change < 1e-15 {
            break;
        }
    }
    z.sort_by(|a, b| a.re.total_cmp(&b.re));
    z
}

/// Groups sorted real seeds into clusters and locates the determinant zeros
/// near each cluster. The disk radius is 0.4 times the distance to the
/// nearest neighbouring cluster.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocatedCluster {
    pub seeds: Vec<f64>,
    pub center: f64,
    pub radius: f64,
    pub roots: Vec<f64>,
    pub max_imag: f64,
}

/// Groups sorted seeds whose gap is at most `merge_tol` relative to their size.
pub fn cluster_seeds(seeds: &[f64], merge_tol: f64) -> Vec<Vec<f64>> {
    let mut sorted = seeds.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for s in sorted {
        match clusters.last_mut() {
            Some(last) if (s - last[last.len() - 1]).abs() <= merge_tol * s.abs().max(1.0) => last.push(s),
            _ => clusters.push(vec![s]),
        }
    }
    clusters
}

impl DeterminantEvaluator {
    pub fn locate_clusters(&self, t: f64, seeds: &[f64], merge_tol: f64) -> Result<Vec<LocatedCluster>> {
        let clusters = cluster_seeds(seeds, merge_tol);
        let centers: Vec<f64> = clusters
            .iter()
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        let mut out = Vec::with_capacity(clusters.len());
        for (i, cl) in clusters.iter().enumerate() {
            let spread = cl[cl.len() - 1] - cl[0];
            let left = if i > 0 {
                centers[i] - centers[i - 1]
            } else {
                f64::INFINITY
            };
            let right = if i + 1 < centers.len() {
                centers[i + 1] - centers[i]
            } else {
                f64::INFINITY
            };
            let mut radius = 0.4 * left.min(right);
            if !radius.is_finite() {
                radius = (0.1 * centers[i].abs()).max(1.0);
            }
            radius = radius.max(2.0 * spread);
            let roots = self.roots_in_disk(t, C::new(centers[i], 0.0), radius)?;
            let max_imag = roots.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
            out.push(LocatedCluster {
                seeds: cl.clone(),
                center: centers[i],
                radius,
                roots: roots.iter().map(|z| z.re).collect(),
                max_imag,
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::desk;
    use crate::galerkin::{fiber_spectrum, DEFAULT_GUARD, DEFAULT_HERMITIAN_TOL};
    use crate::localization::free_eigenvalue;
    use proptest::prelude::*;

    fn tight() -> MonodromyOptions {
        MonodromyOptions {
            tolerances: Tolerances {
                atol: 1e-13,
                rtol: 1e-13,
                max_steps: 200_000,
            },
            ..Default::default()
        }
    }

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn initial_conditions_are_identity_for_zero_length() {
        // At lambda = 0 the free solutions are polynomials: Y_k = x^{k-1}/(k-1)! I.
        let spec = OperatorSpec::free(3, 2).unwrap();
        let f = integrate_fundamental(&spec, c(0.0, 0.0), &tight()).unwrap();
        let id = DMatrix::<C>::identity(2, 2);
        let expect = |k: usize, d: usize| -> f64 {
            // d-th derivative of x^{k-1}/(k-1)! at 1.
            if d > k - 1 {
                0.0
            } else {
                let p = k - 1 - d;
                1.0 / (1..=p).map(|x| x as f64).product::<f64>()
            }
        };
        for k in 1..=3 {
            for d in 0..3 {
                let diff = f.solution(k, d) - &id * c(expect(k, d), 0.0);
                assert!(diff.norm() < 1e-12, "k={k} d={d}");
            }
        }
    }

    #[test]
    fn free_solutions_match_exponentials() {
        // Phi = V diag(e^{i w_j}) V^{-1} with V the Vandermonde matrix of i w_j,
        // acting componentwise on C^2.
        let spec = OperatorSpec::free(3, 2).unwrap();
        let lambda = c(250.0, 30.0);
        let f = integrate_fundamental(&spec, lambda, &tight()).unwrap();
        let w = nth_roots(lambda, 3);
        let iw: Vec<C> = w.iter().map(|z| c(0.0, 1.0) * z).collect();
        let v = DMatrix::from_fn(3, 3, |r, col| iw[col].powi(r as i32));
        let vinv = v.clone().try_inverse().unwrap();
        let e = DMatrix::from_fn(3, 3, |r, col| if r == col { iw[r].exp() } else { c(0.0, 0.0) });
        let scalar = &v * e * vinv;
        let phi = DMatrix::from_fn(6, 6, |r, col| {
            if r % 2 == col % 2 {
                scalar[(r / 2, col / 2)]
            } else {
                c(0.0, 0.0)
            }
        });
        assert!(
            (&phi - &f.monodromy).norm() < 1e-9 * phi.norm(),
            "{}",
            (&phi - &f.monodromy).norm()
        );
    }

    #[test]
    fn free_determinant_matches_closed_form() {
        let spec = OperatorSpec::free(3, 2).unwrap();
        let ev = DeterminantEvaluator::new(&spec, tight());
        for &(lr, li, t) in &[
            (100.0, 0.0, 0.3),
            (-2000.0, 50.0, -0.7),
            (5000.0, -10.0, 1.0),
            (3.0, 1.0, 0.0),
        ] {
            let lambda = c(lr, li);
            let got = ev.determinant(lambda, t).unwrap();
            let want = free_determinant(3, 2, lambda, t);
            assert!(
                (got - want).norm() < 1e-6 * want.norm(),
                "{lambda} {t}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn free_determinant_vanishes_at_free_eigenvalues() {
        let spec = OperatorSpec::free(3, 2).unwrap();
        let ev = DeterminantEvaluator::new(&spec, tight());
        for &(k, t) in &[(0i64, 0.4), (1, -0.2), (-2, 0.9)] {
            let lambda = free_eigenvalue(k, t, 3);
            let d = ev.determinant(c(lambda, 0.0), t).unwrap();
            let scale = free_determinant(3, 2, c(lambda + 1.0, 0.0), t).norm();
            assert!(d.norm() < 1e-8 * scale, "{d}");
        }
    }

    #[test]
    fn rk4_richardson_agrees_with_adaptive() {
        use crate::ode::rk4_richardson;
        let spec = desk::cosine_identity_p2();
        let tol = 1e-10;
        let opts = MonodromyOptions {
            tolerances: Tolerances {
                atol: tol,
                rtol: tol,
                max_steps: 100_000,
            },
            ..Default::default()
        };
        let lambda = c(PI.powi(3), 0.0);
        let adaptive = integrate_fundamental(&spec, lambda, &opts).unwrap();
        let table = CoefficientTable::new(&spec);
        let nm = 6;
        let mut y0 = vec![c(0.0, 0.0); nm * nm];
        for i in 0..nm {
            y0[i * nm + i] = c(1.0, 0.0);
        }
        let mut pv = vec![vec![c(0.0, 0.0); 4]; table.rows.len()];
        let i3 = c(0.0, 1.0).powi(3);
        let rhs = |x: f64, y: &[C], dy: &mut [C]| {
            table.evaluate(x, &mut pv);
            for col in 0..nm {
                let b = col * nm;
                dy[b..b + 4].copy_from_slice(&y[b + 2..b + 6]);
                for a in 0..2 {
                    let mut acc = y[b + a] * lambda;
                    for ((v, _), p) in table.rows.iter().zip(&pv) {
                        for bb in 0..2 {
                            acc -= p[a * 2 + bb] * y[b + (3 - v) * 2 + bb];
                        }
                    }
                    dy[b + 4 + a] = acc * i3;
                }
            }
        };
        let (ref_vals, _) = rk4_richardson(rhs, 0.0, 1.0, &y0, 400);
        let reference = DMatrix::from_column_slice(nm, nm, &ref_vals);
        let diff = (&reference - &adaptive.monodromy).camax();
        let scale = reference.camax().max(1.0);
        assert!(diff <= 10.0 * tol * scale, "diff {diff}");
    }

    #[test]
    fn determinant_is_polynomial_in_multiplier() {
        let spec = desk::cosine_example(PI * PI);
        let f = integrate_fundamental(&spec, c(700.0, 0.0), &tight()).unwrap();
        let nm = 6;
        let ts: Vec<f64> = (0..=nm).map(|j| -0.9 + 1.7 * j as f64 / nm as f64).collect();
        let mus: Vec<C> = ts.iter().map(|t| C::from_polar(1.0, PI * t)).collect();
        let vand = DMatrix::from_fn(nm + 1, nm + 1, |r, col| mus[r].powi(col as i32));
        let rhs = nalgebra::DVector::from_iterator(nm + 1, ts.iter().map(|&t| f.determinant(t)));
        let coef = vand.lu().solve(&rhs).unwrap();
        for &t in &[0.123, -0.55, 0.97] {
            let mu = C::from_polar(1.0, PI * t);
            let fit: C = (0..=nm).map(|k| coef[k] * mu.powi(k as i32)).sum();
            let d = f.determinant(t);
            assert!((fit - d).norm() < 1e-6 * d.norm().max(1e-300), "{fit} vs {d}");
        }
    }

    #[test]
    fn counts_free_multiplicity() {
        let spec = OperatorSpec::free(3, 2).unwrap();
        let ev = DeterminantEvaluator::new(&spec, tight());
        let t = 0.3;
        let c1 = free_eigenvalue(1, t, 3);
        let r = ev.count_roots(t, c1 - 1.0, c1 + 1.0, 0.5, 64).unwrap();
        assert_eq!(r.count, 2);
        let gap = 0.5 * (free_eigenvalue(0, t, 3) + c1);
        let r = ev.count_roots(t, gap - 5.0, gap + 5.0, 2.0, 64).unwrap();
        assert_eq!(r.count, 0);
    }

    #[test]
    fn counts_match_galerkin_on_desk_example() {
        let spec = desk::cosine_example(PI * PI);
        let ev = DeterminantEvaluator::new(&spec, tight());
        let t = 0.35;
        let s = fiber_spectrum(&spec, t, 1.0, 16, DEFAULT_GUARD, DEFAULT_HERMITIAN_TOL).unwrap();
        // A(2,t) holds 6 eigenvalues.
        let lo = (-4.0 * PI + PI + PI * t).powi(3);
        let hi = (4.0 * PI - PI + PI * t).powi(3);
        let expected = s.eigenvalues.iter().filter(|&&l| l >= lo && l < hi).count();
        assert_eq!(expected, 6);
        let r = ev.count_roots(t, lo, hi, 0.25 * (hi - lo), 128).unwrap();
        assert_eq!(r.count, 6);
    }

    #[test]
    fn disk_moments_recover_eigenvalues() {
        let spec = desk::cosine_example(1.0);
        let ev = DeterminantEvaluator::new(&spec, tight());
        let t = -0.4;
        let s = fiber_spectrum(&spec, t, 1.0, 16, DEFAULT_GUARD, DEFAULT_HERMITIAN_TOL).unwrap();
        let seeds: Vec<f64> = s.eigenvalues.iter().copied().filter(|l| l.abs() < 1000.0).collect();
        let clusters = ev.locate_clusters(t, &seeds, 1e-9).unwrap();
        let found: Vec<f64> = clusters.iter().flat_map(|c| c.roots.clone()).collect();
        assert_eq!(found.len(), seeds.len());
        for (a, b) in found.iter().zip(&seeds) {
            assert!((a - b).abs() < 1e-6 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn out_of_window_is_rejected() {
        let spec = OperatorSpec::free(3, 2).unwrap();
        let r = characteristic_determinant(&spec, c(1e6, 0.0), 0.0, &MonodromyOptions::default());
        assert!(matches!(r, Err(Error::OutOfWindow { .. })));
    }

    #[test]
    fn power_sum_roots() {
        let roots = [c(0.1, 0.0), c(-0.3, 0.2), c(0.5, -0.1)];
        let p: Vec<C> = (1..=3).map(|j| roots.iter().map(|r| r.powi(j)).sum()).collect();
        let got = roots_from_power_sums(&p);
        let mut want = roots.to_vec();
        want.sort_by(|a, b| a.re.total_cmp(&b.re));
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn free_closed_form_random(lr in -6000.0f64..6000.0, li in -50.0f64..50.0, t in -0.99f64..1.0) {
            let spec = OperatorSpec::free(3, 2).unwrap();
            let got = characteristic_determinant(&spec, c(lr, li), t, &tight()).unwrap().value();
            let want = free_determinant(3, 2, c(lr, li), t);
            prop_assert!((got - want).norm() <= 1e-6 * want.norm().max(1e-12));
        }
    }
}
