//! Run configuration: TOML file, command-line overrides, and the resolved
//! ("effective") values that every command works from.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use floquet_core::bands::{uniform_grid, BandOptions};
use floquet_core::galerkin::{default_truncation, DEFAULT_GUARD};
use floquet_core::monodromy::MonodromyOptions;
use floquet_core::{
    compute_m_norm, compute_threshold, load_operator_spec_file, Error, OperatorSpec, Result, Tolerances,
};

pub const DEFAULT_GRID_COUNT: usize = 16;
pub const DEFAULT_OUTPUT_DIR: &str = "floquet-out";

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum GridSpec {
    Uniform { count: usize, lo: f64, hi: f64 },
    Points(Vec<f64>),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceFile {
    pub hermitian: Option<f64>,
    pub ode_abs: Option<f64>,
    pub ode_rel: Option<f64>,
    pub eig_stability: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeterminantFile {
    pub lambda_lo: Option<f64>,
    pub lambda_hi: Option<f64>,
    pub samples: Option<usize>,
    pub t: Option<Vec<f64>>,
}

/// The TOML document accepted by `--config`.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub spec_path: Option<PathBuf>,
    pub truncation: Option<usize>,
    pub k_max: Option<i64>,
    pub s_max: Option<usize>,
    pub t_grid: Option<GridSpec>,
    pub tolerances: Option<ToleranceFile>,
    pub monodromy_window: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub determinant: Option<DeterminantFile>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg: ConfigFile =
            toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {}", path.display(), e.message())))?;
        // Relative paths in the file are relative to the file's directory.
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.spec_path, &mut cfg.output_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Field-wise override: values present in `other` win.
    pub fn merged(self, other: ConfigFile) -> ConfigFile {
        let tol_a = self.tolerances.unwrap_or_default();
        let tol_b = other.tolerances.unwrap_or_default();
        let det_a = self.determinant.unwrap_or_default();
        let det_b = other.determinant.unwrap_or_default();
        ConfigFile {
            spec_path: other.spec_path.or(self.spec_path),
            truncation: other.truncation.or(self.truncation),
            k_max: other.k_max.or(self.k_max),
            s_max: other.s_max.or(self.s_max),
            t_grid: other.t_grid.or(self.t_grid),
            tolerances: Some(ToleranceFile {
                hermitian: tol_b.hermitian.or(tol_a.hermitian),
                ode_abs: tol_b.ode_abs.or(tol_a.ode_abs),
                ode_rel: tol_b.ode_rel.or(tol_a.ode_rel),
                eig_stability: tol_b.eig_stability.or(tol_a.eig_stability),
            }),
            monodromy_window: other.monodromy_window.or(self.monodromy_window),
            output_dir: other.output_dir.or(self.output_dir),
            determinant: Some(DeterminantFile {
                lambda_lo: det_b.lambda_lo.or(det_a.lambda_lo),
                lambda_hi: det_b.lambda_hi.or(det_a.lambda_hi),
                samples: det_b.samples.or(det_a.samples),
                t: det_b.t.or(det_a.t),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedTolerances {
    pub hermitian: f64,
    pub ode_abs: f64,
    pub ode_rel: f64,
    pub eig_stability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedDeterminant {
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub samples: usize,
    pub t: Vec<f64>,
}

/// Every value a command needs, after defaults and validation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveConfig {
    pub spec_path: PathBuf,
    pub order: usize,
    pub dim: usize,
    pub m_norm: f64,
    pub threshold: usize,
    pub truncation: usize,
    pub k_max: i64,
    pub s_max: usize,
    pub t_grid: Vec<f64>,
    pub tolerances: ResolvedTolerances,
    pub monodromy_window: f64,
    pub output_dir: PathBuf,
    pub determinant: ResolvedDeterminant,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Validation(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl EffectiveConfig {
    pub fn resolve(cfg: ConfigFile) -> Result<(Self, OperatorSpec)> {
        let spec_path = cfg
            .spec_path
            .clone()
            .ok_or_else(|| Error::Validation("no operator spec given (use --spec or spec_path)".into()))?;
        let spec = load_operator_spec_file(&spec_path)?;
        let m_norm = compute_m_norm(&spec).m_value;
        let threshold = compute_threshold(m_norm);

        let k_max = cfg.k_max.unwrap_or(threshold as i64 + 4);
        if k_max < threshold as i64 {
            return Err(Error::Validation(format!(
                "k_max={k_max} must be at least N={threshold}"
            )));
        }
        let s_max = cfg.s_max.unwrap_or((k_max as usize - threshold + 1) * spec.dim());
        if s_max == 0 {
            return Err(Error::Validation("s_max must be at least 1".into()));
        }
        let truncation = match cfg.truncation {
            Some(k) if k < spec.support_radius() => {
                return Err(Error::Validation(format!(
                    "truncation {k} below coefficient support radius {}",
                    spec.support_radius()
                )))
            }
            Some(k) => k,
            None => default_truncation(&spec, threshold, k_max as usize, DEFAULT_GUARD, None),
        };

        let t_grid = match cfg.t_grid.clone() {
            None => uniform_grid(-1.0, 1.0, DEFAULT_GRID_COUNT),
            Some(GridSpec::Uniform { count, lo, hi }) => {
                if count == 0 || !(lo < hi) || lo < -1.0 || hi > 1.0 {
                    return Err(Error::Validation(format!(
                        "uniform grid needs count >= 1 and -1 <= lo < hi <= 1 (got count={count}, lo={lo}, hi={hi})"
                    )));
                }
                uniform_grid(lo, hi, count)
            }
            Some(GridSpec::Points(points)) => {
                let mut p = points;
                p.sort_by(f64::total_cmp);
                p.dedup();
                p
            }
        };
        if t_grid.is_empty() {
            return Err(Error::Validation("quasimomentum grid is empty".into()));
        }
        if let Some(t) = t_grid.iter().find(|&&t| !(t > -1.0 && t <= 1.0)) {
            return Err(Error::Validation(format!("grid point t={t} outside (-1, 1]")));
        }

        let tol = cfg.tolerances.clone().unwrap_or_default();
        let tolerances = ResolvedTolerances {
            hermitian: positive("tolerances.hermitian", tol.hermitian.unwrap_or(1e-10))?,
            ode_abs: positive("tolerances.ode_abs", tol.ode_abs.unwrap_or(1e-10))?,
            ode_rel: positive("tolerances.ode_rel", tol.ode_rel.unwrap_or(1e-10))?,
            eig_stability: positive("tolerances.eig_stability", tol.eig_stability.unwrap_or(1e-8))?,
        };
        let monodromy_window = positive("monodromy_window", cfg.monodromy_window.unwrap_or(6.0))?;

        let det = cfg.determinant.clone().unwrap_or_default();
        let n = spec.order() as i32;
        let default_reach = (2.0 * std::f64::consts::PI * threshold as f64)
            .powi(n)
            .min((monodromy_window * std::f64::consts::PI).powi(n));
        let determinant = ResolvedDeterminant {
            lambda_lo: det.lambda_lo.unwrap_or(-default_reach),
            lambda_hi: det.lambda_hi.unwrap_or(default_reach),
            samples: det.samples.unwrap_or(64).max(2),
            t: det.t.unwrap_or_else(|| vec![0.5]),
        };
        if !(determinant.lambda_lo < determinant.lambda_hi) {
            return Err(Error::Validation(
                "determinant.lambda_lo must be below lambda_hi".into(),
            ));
        }
        if let Some(t) = determinant.t.iter().find(|&&t| !(-1.0..=1.0).contains(&t)) {
            return Err(Error::Validation(format!("determinant t={t} outside [-1, 1]")));
        }

        let effective = EffectiveConfig {
            spec_path,
            order: spec.order(),
            dim: spec.dim(),
            m_norm,
            threshold,
            truncation,
            k_max,
            s_max,
            t_grid,
            tolerances,
            monodromy_window,
            output_dir: cfg.output_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
            determinant,
        };
        Ok((effective, spec))
    }

    pub fn band_options(&self) -> BandOptions {
        BandOptions {
            k_max: self.k_max,
            s_max: self.s_max,
            truncation: self.truncation,
            guard: DEFAULT_GUARD,
            hermitian_tol: self.tolerances.hermitian,
            include_left_limit: true,
        }
    }

    pub fn monodromy_options(&self) -> MonodromyOptions {
        MonodromyOptions {
            tolerances: Tolerances {
                atol: self.tolerances.ode_abs,
                rtol: self.tolerances.ode_rel,
                ..Tolerances::default()
            },
            window_multiple: self.monodromy_window,
            ..MonodromyOptions::default()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("effective config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_grid_forms() {
        let a: ConfigFile = toml::from_str("t_grid = { count = 8, lo = -1.0, hi = 1.0 }").unwrap();
        assert_eq!(
            a.t_grid,
            Some(GridSpec::Uniform {
                count: 8,
                lo: -1.0,
                hi: 1.0
            })
        );
        let b: ConfigFile = toml::from_str("t_grid = [0.5, -0.25]").unwrap();
        assert_eq!(b.t_grid, Some(GridSpec::Points(vec![0.5, -0.25])));
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(toml::from_str::<ConfigFile>("trunc = 3").is_err());
        assert!(toml::from_str::<ConfigFile>("[tolerances]\nhermetian = 1e-3").is_err());
    }

    #[test]
    fn overrides_win() {
        let file: ConfigFile = toml::from_str("truncation = 10\nk_max = 5\n[tolerances]\node_abs = 1e-9").unwrap();
        let flags = ConfigFile {
            truncation: Some(20),
            tolerances: Some(ToleranceFile {
                ode_rel: Some(1e-12),
                ..Default::default()
            }),
            ..Default::default()
        };
        let m = file.merged(flags);
        assert_eq!(m.truncation, Some(20));
        assert_eq!(m.k_max, Some(5));
        let tol = m.tolerances.unwrap();
        assert_eq!(tol.ode_abs, Some(1e-9));
        assert_eq!(tol.ode_rel, Some(1e-12));
    }
}
