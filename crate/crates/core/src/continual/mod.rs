//! Experience-replay adaptation on rendered pseudo-labels and the iterated
//! predict → fuse → render → adapt loop.

mod adapt;
mod batch;
mod buffer;
mod iterate;
mod report;

pub use adapt::adapt;
pub use batch::{AdaptConfig, BatchPlan, BatchSampler};
pub use buffer::{build_buffer, ReplayBuffer};
pub use iterate::{
    frame_metrics, fuse_frames, iterate, map_confidence, predict_frames, pseudo_samples, sample_metrics,
    render_pseudo_set, IterateContext, IterateOutcome, IterationRecord, SceneSplit,
};
pub use report::{average_rows, AdaptReport, Metrics, ReportRow};
