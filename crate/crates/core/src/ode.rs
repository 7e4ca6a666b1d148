//! Explicit integrators for complex linear systems `y' = f(x, y)`.
//!
//! [`dop853`] is the Dormand–Prince 8(5,3) pair with the step-size control of
//! Hairer's DOP853. [`rk4_richardson`] is a fixed-step classical Runge–Kutta
//! with one step-halving extrapolation, kept as an independent cross-check.

// The tableau keeps its published digits.
#![allow(clippy::excessive_precision)]

use num_complex::Complex64;

type C = Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            atol: 1e-10,
            rtol: 1e-10,
            max_steps: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Scaled error estimate of the last accepted step (<= 1).
    pub last_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OdeFailure {
    StepSizeUnderflow { x: f64 },
    TooManySteps { steps: usize },
}

// Dormand–Prince 8(5,3) coefficients, as published.
const C2: f64 = 0.526001519587677318785587544488E-01;
const C3: f64 = 0.789002279381515978178381316732E-01;
const C4: f64 = 0.118350341907227396726757197510E+00;
const C5: f64 = 0.281649658092772603273242802490E+00;
const C6: f64 = 0.333333333333333333333333333333E+00;
const C7: f64 = 0.25E+00;
const C8: f64 = 0.307692307692307692307692307692E+00;
const C9: f64 = 0.651282051282051282051282051282E+00;
const C10: f64 = 0.6E+00;
const C11: f64 = 0.857142857142857142857142857142E+00;

const A21: f64 = 5.26001519587677318785587544488E-2;
const A31: f64 = 1.97250569845378994544595329183E-2;
const A32: f64 = 5.91751709536136983633785987549E-2;
const A41: f64 = 2.95875854768068491816892993775E-2;
const A43: f64 = 8.87627564304205475450678981324E-2;
const A51: f64 = 2.41365134159266685502369798665E-1;
const A53: f64 = -8.84549479328286085344864962717E-1;
const A54: f64 = 9.24834003261792003115737966543E-1;
const A61: f64 = 3.7037037037037037037037037037E-2;
const A64: f64 = 1.70828608729473871279604482173E-1;
const A65: f64 = 1.25467687566822425016691814123E-1;
const A71: f64 = 3.7109375E-2;
const A74: f64 = 1.70252211019544039314978060272E-1;
const A75: f64 = 6.02165389804559606850219397283E-2;
const A76: f64 = -1.7578125E-2;
const A81: f64 = 3.70920001185047927108779319836E-2;
const A84: f64 = 1.70383925712239993810214054705E-1;
const A85: f64 = 1.07262030446373284651809199168E-1;
const A86: f64 = -1.53194377486244017527936158236E-2;
const A87: f64 = 8.27378916381402288758473766002E-3;
const A91: f64 = 6.24110958716075717114429577812E-1;
const A94: f64 = -3.36089262944694129406857109825E0;
const A95: f64 = -8.68219346841726006818189891453E-1;
const A96: f64 = 2.75920996994467083049415600797E1;
const A97: f64 = 2.01540675504778934086186788979E1;
const A98: f64 = -4.34898841810699588477366255144E1;
const A101: f64 = 4.77662536438264365890433908527E-1;
const A104: f64 = -2.48811461997166764192642586468E0;
const A105: f64 = -5.90290826836842996371446475743E-1;
const A106: f64 = 2.12300514481811942347288949897E1;
const A107: f64 = 1.52792336328824235832596922938E1;
const A108: f64 = -3.32882109689848629194453265587E1;
const A109: f64 = -2.03312017085086261358222928593E-2;
const A111: f64 = -9.3714243008598732571704021658E-1;
const A114: f64 = 5.18637242884406370830023853209E0;
const A115: f64 = 1.09143734899672957818500254654E0;
const A116: f64 = -8.14978701074692612513997267357E0;
const A117: f64 = -1.85200656599969598641566180701E1;
const A118: f64 = 2.27394870993505042818970056734E1;
const A119: f64 = 2.49360555267965238987089396762E0;
const A1110: f64 = -3.0467644718982195003823669022E0;
const A121: f64 = 2.27331014751653820792359768449E0;
const A124: f64 = -1.05344954667372501984066689879E1;
const A125: f64 = -2.00087205822486249909675718444E0;
const A126: f64 = -1.79589318631187989172765950534E1;
const A127: f64 = 2.79488845294199600508499808837E1;
const A128: f64 = -2.85899827713502369474065508674E0;
const A129: f64 = -8.87285693353062954433549289258E0;
const A1210: f64 = 1.23605671757943030647266201528E1;
const A1211: f64 = 6.43392746015763530355970484046E-1;

const B1: f64 = 5.42937341165687622380535766363E-2;
const B6: f64 = 4.45031289275240888144113950566E0;
const B7: f64 = 1.89151789931450038304281599044E0;
const B8: f64 = -5.8012039600105847814672114227E0;
const B9: f64 = 3.1116436695781989440891606237E-1;
const B10: f64 = -1.52160949662516078556178806805E-1;
const B11: f64 = 2.01365400804030348374776537501E-1;
const B12: f64 = 4.47106157277725905176885569043E-2;

const BHH1: f64 = 0.244094488188976377952755905512E+00;
const BHH2: f64 = 0.733846688281611857341361741547E+00;
const BHH3: f64 = 0.220588235294117647058823529412E-01;

const ER1: f64 = 0.1312004499419488073250102996E-01;
const ER6: f64 = -0.1225156446376204440720569753E+01;
const ER7: f64 = -0.4957589496572501915214079952E+00;
const ER8: f64 = 0.1664377182454986536961530415E+01;
const ER9: f64 = -0.3503288487499736816886487290E+00;
const ER10: f64 = 0.3341791187130174790297318841E+00;
const ER11: f64 = 0.8192320648511571246570742613E-01;
const ER12: f64 = -0.2235530786388629525884427845E-01;

/// Stage `s` (1-based, `s >= 2`) is evaluated at `x + c h` from `y + h sum a_j k_j`.
const STAGES: [(f64, &[(usize, f64)]); 11] = [
    (C2, &[(1, A21)]),
    (C3, &[(1, A31), (2, A32)]),
    (C4, &[(1, A41), (3, A43)]),
    (C5, &[(1, A51), (3, A53), (4, A54)]),
    (C6, &[(1, A61), (4, A64), (5, A65)]),
    (C7, &[(1, A71), (4, A74), (5, A75), (6, A76)]),
    (C8, &[(1, A81), (4, A84), (5, A85), (6, A86), (7, A87)]),
    (C9, &[(1, A91), (4, A94), (5, A95), (6, A96), (7, A97), (8, A98)]),
    (
        C10,
        &[
            (1, A101),
            (4, A104),
            (5, A105),
            (6, A106),
            (7, A107),
            (8, A108),
            (9, A109),
        ],
    ),
    (
        C11,
        &[
            (1, A111),
            (4, A114),
            (5, A115),
            (6, A116),
            (7, A117),
            (8, A118),
            (9, A119),
            (10, A1110),
        ],
    ),
    (
        1.0,
        &[
            (1, A121),
            (4, A124),
            (5, A125),
            (6, A126),
            (7, A127),
            (8, A128),
            (9, A129),
            (10, A1210),
            (11, A1211),
        ],
    ),
];

const WEIGHTS: [(usize, f64); 8] = [
    (1, B1),
    (6, B6),
    (7, B7),
    (8, B8),
    (9, B9),
    (10, B10),
    (11, B11),
    (12, B12),
];
const ERR5: [(usize, f64); 8] = [
    (1, ER1),
    (6, ER6),
    (7, ER7),
    (8, ER8),
    (9, ER9),
    (10, ER10),
    (11, ER11),
    (12, ER12),
];

const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 1.0 / 3.0;
const FAC_MAX: f64 = 6.0;
const EXPO: f64 = 1.0 / 8.0;

fn scale(tol: &Tolerances, a: C, b: C) -> f64 {
    tol.atol + tol.rtol * a.norm().max(b.norm())
}

fn initial_step<F>(f: &mut F, x0: f64, span: f64, y0: &[C], f0: &[C], tol: &Tolerances) -> f64
where
    F: FnMut(f64, &[C], &mut [C]),
{
    let n = y0.len() as f64;
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (y, k) in y0.iter().zip(f0) {
        let sk = scale(tol, *y, *y);
        d0 += (y.norm() / sk).powi(2);
        d1 += (k.norm() / sk).powi(2);
    }
    let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
    let mut h = if d0 <= 1e-10 || d1 <= 1e-10 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h = h.min(span.abs());
    let probe = h * span.signum();
    let y1: Vec<C> = y0.iter().zip(f0).map(|(y, k)| y + k * probe).collect();
    let mut f1 = vec![C::new(0.0, 0.0); y0.len()];
    f(x0 + probe, &y1, &mut f1);
    let mut d2 = 0.0;
    for ((a, b), y) in f1.iter().zip(f0).zip(y0) {
        d2 += ((a - b).norm() / scale(tol, *y, *y)).powi(2);
    }
    let d2 = (d2 / n).sqrt() / h;
    let dmax = d1.max(d2);
    let h1 = if dmax <= 1e-15 {
        (1e-6f64).max(h * 1e-3)
    } else {
        (0.01 / dmax).powf(EXPO)
    };
    (100.0 * h).min(h1).min(span.abs())
}

/// Integrates `y' = f(x, y)` from `x0` to `x1` with the 8(5,3) pair.
pub fn dop853<F>(
    mut f: F,
    x0: f64,
    x1: f64,
    y0: &[C],
    tol: &Tolerances,
) -> Result<(Vec<C>, IntegrationStats), OdeFailure>
where
    F: FnMut(f64, &[C], &mut [C]),
{
    let dim = y0.len();
    let span = x1 - x0;
    let dir = span.signum();
    let mut stats = IntegrationStats::default();
    let mut y = y0.to_vec();
    if span == 0.0 {
        return Ok((y, stats));
    }
    let zero = C::new(0.0, 0.0);
    // k[0] unused so that k[s] is stage s.
    let mut k = vec![vec![zero; dim]; 13];
    f(x0, &y, &mut k[1]);
    stats.evaluations += 1;
    let mut h = dir * initial_step(&mut f, x0, span, &y, &k[1], tol);
    stats.evaluations += 1;

    let mut x = x0;
    let mut stage_y = vec![zero; dim];
    let mut y_new = vec![zero; dim];
    let mut slope = vec![zero; dim];
    let mut last_rejected = false;
    let h_floor = 16.0 * f64::EPSILON * span.abs().max(x0.abs());

    loop {
        if stats.accepted + stats.rejected >= tol.max_steps {
            return Err(OdeFailure::TooManySteps {
                steps: stats.accepted + stats.rejected,
            });
        }
        if h.abs() < h_floor {
            return Err(OdeFailure::StepSizeUnderflow { x });
        }
        let last = (x + h - x1) * dir >= 0.0;
        if last {
            h = x1 - x;
        }

        for (s, (c, row)) in STAGES.iter().enumerate() {
            for i in 0..dim {
                let mut acc = zero;
                for &(j, a) in row.iter() {
                    acc += k[j][i] * a;
                }
                stage_y[i] = y[i] + acc * h;
            }
            f(x + c * h, &stage_y, &mut k[s + 2]);
        }
        stats.evaluations += 11;

        let mut err = 0.0;
        let mut err2 = 0.0;
        for i in 0..dim {
            let mut acc = zero;
            for &(j, b) in &WEIGHTS {
                acc += k[j][i] * b;
            }
            slope[i] = acc;
            y_new[i] = y[i] + acc * h;
            let sk = scale(tol, y[i], y_new[i]);
            let e3 = acc - k[1][i] * BHH1 - k[9][i] * BHH2 - k[12][i] * BHH3;
            err2 += (e3.norm() / sk).powi(2);
            let mut e5 = zero;
            for &(j, e) in &ERR5 {
                e5 += k[j][i] * e;
            }
            err += (e5.norm() / sk).powi(2);
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let err = h.abs() * err * (1.0 / (deno * dim as f64)).sqrt();

        let fac11 = err.powf(EXPO);
        let fac = (1.0 / FAC_MAX).max((1.0 / FAC_MIN).min(fac11 / SAFE));
        let mut h_new = h / fac;

        if err <= 1.0 && err.is_finite() {
            stats.accepted += 1;
            stats.last_error = err;
            x += h;
            std::mem::swap(&mut y, &mut y_new);
            if last {
                return Ok((y, stats));
            }
            f(x, &y, &mut k[1]);
            stats.evaluations += 1;
            if last_rejected {
                h_new = dir * h_new.abs().min(h.abs());
            }
            last_rejected = false;
        } else {
            h_new = if err.is_finite() {
                h / (1.0 / FAC_MIN).min(fac11 / SAFE)
            } else {
                h * 0.1
            };
            last_rejected = true;
            stats.rejected += 1;
        }
        h = h_new;
    }
}

fn rk4_pass<F>(f: &mut F, x0: f64, x1: f64, y0: &[C], steps: usize) -> Vec<C>
where
    F: FnMut(f64, &[C], &mut [C]),
{
    let dim = y0.len();
    let zero = C::new(0.0, 0.0);
    let h = (x1 - x0) / steps as f64;
    let mut y = y0.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![zero; dim], vec![zero; dim], vec![zero; dim], vec![zero; dim]);
    let mut tmp = vec![zero; dim];
    for s in 0..steps {
        let x = x0 + h * s as f64;
        f(x, &y, &mut k1);
        for i in 0..dim {
            tmp[i] = y[i] + k1[i] * (0.5 * h);
        }
        f(x + 0.5 * h, &tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = y[i] + k2[i] * (0.5 * h);
        }
        f(x + 0.5 * h, &tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = y[i] + k3[i] * h;
        }
        f(x + h, &tmp, &mut k4);
        for i in 0..dim {
            y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
        }
    }
    y
}

/// Classical RK4 with `steps` and `2 * steps` steps, combined as
/// `(16 y_{h/2} - y_h) / 15`. Returns the extrapolated value and the max-norm
/// difference between the two passes.
pub fn rk4_richardson<F>(mut f: F, x0: f64, x1: f64, y0: &[C], steps: usize) -> (Vec<C>, f64)
where
    F: FnMut(f64, &[C], &mut [C]),
{
    assert!(steps > 0, "need at least one step");
    let coarse = rk4_pass(&mut f, x0, x1, y0, steps);
    let fine = rk4_pass(&mut f, x0, x1, y0, 2 * steps);
    let mut diff = 0.0f64;
    let out = coarse
        .iter()
        .zip(&fine)
        .map(|(c, fi)| {
            diff = diff.max((fi - c).norm());
            (fi * 16.0 - c) / 15.0
        })
        .collect();
    (out, diff)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    #[test]
    fn exponential_growth_and_oscillation() {
        let rate = c(0.3, 7.0);
        let tol = Tolerances {
            atol: 1e-13,
            rtol: 1e-13,
            ..Default::default()
        };
        let (y, stats) = dop853(|_, y, dy| dy[0] = rate * y[0], 0.0, 1.0, &[c(1.0, 0.0)], &tol).unwrap();
        assert!((y[0] - rate.exp()).norm() < 1e-11, "{}", (y[0] - rate.exp()).norm());
        assert!(stats.accepted > 0);
    }

    #[test]
    fn harmonic_oscillator_as_system() {
        let tol = Tolerances {
            atol: 1e-12,
            rtol: 1e-12,
            ..Default::default()
        };
        let w = 20.0;
        let (y, _) = dop853(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0] * (w * w);
            },
            0.0,
            1.0,
            &[c(1.0, 0.0), c(0.0, 0.0)],
            &tol,
        )
        .unwrap();
        assert!((y[0].re - w.cos()).abs() < 1e-9);
        assert!((y[1].re + w * w.sin()).abs() < 1e-8);
    }

    #[test]
    fn nonautonomous_and_backward() {
        // y' = 2x y, y(0) = 1 => y = exp(x^2).
        let tol = Tolerances {
            atol: 1e-12,
            rtol: 1e-12,
            ..Default::default()
        };
        let (y, _) = dop853(|x, y, dy| dy[0] = y[0] * (2.0 * x), 0.0, 1.5, &[c(1.0, 0.0)], &tol).unwrap();
        assert!((y[0].re - 1.5f64.powi(2).exp()).abs() < 1e-10 * 10.0);
        let (back, _) = dop853(|x, y, dy| dy[0] = y[0] * (2.0 * x), 1.5, 0.0, &y, &tol).unwrap();
        assert!((back[0].re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn step_limit_is_reported() {
        let tol = Tolerances {
            atol: 1e-14,
            rtol: 1e-14,
            max_steps: 3,
        };
        let r = dop853(|_, y, dy| dy[0] = y[0] * c(0.0, 200.0), 0.0, 1.0, &[c(1.0, 0.0)], &tol);
        assert!(matches!(r, Err(OdeFailure::TooManySteps { .. })));
    }

    #[test]
    fn richardson_matches_exact() {
        let rate = c(-0.5, 3.0);
        let (y, diff) = rk4_richardson(|_, y, dy| dy[0] = rate * y[0], 0.0, 1.0, &[c(1.0, 0.0)], 200);
        assert!((y[0] - rate.exp()).norm() < 1e-11);
        assert!(diff < 1e-8);
    }

    #[test]
    fn dop853_agrees_with_richardson() {
        let f = |x: f64, y: &[C], dy: &mut [C]| {
            dy[0] = y[1];
            dy[1] = -y[0] * c(1.0 + (2.0 * std::f64::consts::PI * x).cos(), 0.5);
        };
        let y0 = [c(1.0, 0.0), c(0.0, 1.0)];
        let tol = Tolerances {
            atol: 1e-12,
            rtol: 1e-12,
            ..Default::default()
        };
        let (a, _) = dop853(f, 0.0, 1.0, &y0, &tol).unwrap();
        let (b, _) = rk4_richardson(f, 0.0, 1.0, &y0, 400);
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).norm() < 1e-10);
        }
    }
}
