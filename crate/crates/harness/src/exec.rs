use labo_core::grasp::score::TaskMap;
use labo_core::grasp::{EpisodeResult, GeometryError};
use rayon::prelude::*;

/// Episodes of one design in parallel. The output is what the sequential
/// map would return: everything up to and including the first failure.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayonMap;

impl TaskMap for RayonMap {
    fn map(
        &self,
        n: usize,
        job: &(dyn Fn(usize) -> Result<EpisodeResult, GeometryError> + Sync),
    ) -> Vec<Result<EpisodeResult, GeometryError>> {
        let mut out: Vec<_> = (0..n).into_par_iter().map(job).collect();
        if let Some(k) = out.iter().position(Result::is_err) {
            out.truncate(k + 1);
        }
        out
    }
}
