pub mod backend;
pub mod datasets;
pub mod metrics;
mod par;
pub mod pipeline;
pub mod prompt;
pub mod rerank;

pub use par::par_map;
