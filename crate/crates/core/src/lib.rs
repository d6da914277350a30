//! Turning-point detection for multi-modal conversations: dataset model,
//! preprocessing, scene description, LLM reasoning and evaluation.

pub mod describer;
pub mod evaluator;
pub mod gateway;
pub mod mtp_data;
pub mod preprocess;
pub mod reasoner;

/// Maps over `items`, in parallel when the `parallel` feature is on.
/// Output order always follows input order.
pub(crate) fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
