//! The surrogate step shared by LABO and raw-parameter BO: fit (or
//! recondition) a GP on the data so far and propose the next batch.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gp::{self, FitConfig, FitReport, GpModel, Hyper, ProposeConfig};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoConfig {
    /// Uniform points evaluated before the first surrogate fit.
    pub n_init: usize,
    /// Hyperparameters are re-optimised once this many evaluations have
    /// arrived since the last optimisation; in between the GP is only
    /// reconditioned on the new data.
    pub refit_interval: usize,
    pub fit: FitConfig,
    pub acquisition: ProposeConfig,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            n_init: 2,
            refit_interval: 2,
            fit: FitConfig::default(),
            acquisition: ProposeConfig::default(),
        }
    }
}

/// What persists between surrogate steps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SurrogateState {
    pub hyper: Option<Hyper>,
    /// Data size at the last hyperparameter optimisation.
    pub fitted_at: usize,
    pub last_fit: Option<FitReport>,
}

pub struct Suggestion {
    pub points: Vec<Vec<f64>>,
    pub note: Option<String>,
}

fn uniform_points<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| rng.random::<f64>().clamp(gp::acquisition::BOUNDARY_MARGIN, 1.0 - gp::acquisition::BOUNDARY_MARGIN))
                .collect()
        })
        .collect()
}

/// Uniform initial-design points `start..start + n`; LABO and raw BO draw
/// the same designs for the same seed.
pub fn initial_points(seed: u64, start: usize, n: usize, dim: usize) -> Vec<Vec<f64>> {
    uniform_points(n, dim, &mut rng::stream(seed, "init-design", start as u64))
}

pub fn needs_initial_design(n_data: usize, cfg: &BoConfig) -> bool {
    n_data < cfg.n_init.max(2)
}

/// `n` points in `(0,1)^dim` for iteration `iteration`. Surrogate failures
/// fall back to uniform points and say so in the note.
pub fn suggest(
    inputs: &[Vec<f64>],
    targets: &[f64],
    dim: usize,
    n: usize,
    state: &mut SurrogateState,
    cfg: &BoConfig,
    seed: u64,
    iteration: usize,
) -> Suggestion {
    let mut acq_rng = rng::stream(seed, "acquisition", iteration as u64);
    if needs_initial_design(inputs.len(), cfg) {
        return Suggestion {
            points: initial_points(seed, inputs.len(), n, dim),
            note: None,
        };
    }
    let due = state.hyper.is_none() || inputs.len() >= state.fitted_at + cfg.refit_interval.max(1);
    let model: Result<GpModel, gp::GpError> = if due {
        let mut fit_rng = rng::stream(seed, "gp-fit", iteration as u64);
        gp::fit(inputs.to_vec(), targets.to_vec(), &cfg.fit, state.hyper, &mut fit_rng).map(|(m, report)| {
            state.hyper = Some(report.hyper);
            state.fitted_at = inputs.len();
            state.last_fit = Some(report);
            m
        })
    } else {
        let h = state.hyper.expect("checked above");
        GpModel::new(inputs.to_vec(), targets.to_vec(), h).and_then(|mut m| m.condition().map(|_| m))
    };
    let proposal = model.and_then(|m| {
        let cfg = ProposeConfig {
            n_candidates: n,
            ..cfg.acquisition.clone()
        };
        gp::propose(&m, &cfg, &mut acq_rng)
    });
    match proposal {
        Ok(mut points) if points.len() == n => {
            points.truncate(n);
            Suggestion { points, note: None }
        }
        Ok(points) => {
            let mut pts = points;
            let missing = n - pts.len();
            pts.extend(uniform_points(missing, dim, &mut acq_rng));
            Suggestion {
                points: pts,
                note: Some(format!("{missing} candidate(s) filled uniformly")),
            }
        }
        Err(e) => Suggestion {
            points: uniform_points(n, dim, &mut acq_rng),
            note: Some(format!("surrogate failed ({e}); uniform fallback")),
        },
    }
}
