//! Rayon-backed execution. Results never depend on the thread count: work is
//! split per sample and combined in input order.

use deeplift_core::autodiff::ParamGrads;
use deeplift_core::train::{sample_gradient, GradientExecutor, LossHead, Sample};
use deeplift_core::Graph;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Computes per-sample gradients in parallel and sums them in batch order, so
/// the result equals [`deeplift_core::train::Sequential`] bit for bit.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayonExecutor;

impl GradientExecutor for RayonExecutor {
    fn batch_gradient(
        &self,
        graph: &Graph,
        head: LossHead,
        batch: &[&Sample],
        out: &mut ParamGrads,
    ) -> deeplift_core::Result<f64> {
        let parts = batch
            .par_iter()
            .map(|s| {
                let mut g = ParamGrads::zeros_like(graph);
                sample_gradient(graph, head, s, &mut g).map(|loss| (loss, g))
            })
            .collect::<deeplift_core::Result<Vec<_>>>()?;
        let mut loss = 0.0;
        for (l, g) in &parts {
            loss += l;
            out.add_assign(g);
        }
        Ok(loss)
    }
}

/// Order-preserving parallel map.
pub fn map_ordered<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> Result<R> + Sync + Send) -> Result<Vec<R>> {
    items.par_iter().map(f).collect()
}

/// Runs `f` on a pool of `threads` workers; 0 means one per core.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> Result<R> + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {threads} threads: {e}")))?;
    pool.install(f)
}
