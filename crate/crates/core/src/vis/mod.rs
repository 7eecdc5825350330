//! Consumers of the cached representation: a sort-last ray-marching volume
//! renderer with macro-cell skipping, and RK4 pathline tracing over
//! temporal windows.

mod camera;
mod image;
mod macrocell;
mod pathline;
mod render;
mod tf;

pub use camera::{Camera, CameraConfig};
pub use image::Image;
pub use macrocell::{
    build_macrocells, MacroCellGrid, DEFAULT_MACROCELL_PAD, DEFAULT_MACROCELL_PROBES,
    DEFAULT_MACROCELL_RESOLUTION,
};
pub use pathline::{
    rk4_step, trace_pathlines, write_pathlines_csv, write_trace_summary, GridSequence, PathVertex,
    Pathline, SequenceCursor, Termination, TraceReport, TraceSummary, VolumeSequence,
};
pub use render::{
    composite_fragments, grid_sample_normalized, ray_march, render_dnr, render_grid,
    render_rank_fragments, Fragment, RenderParams,
};
pub use tf::{TfPoint, TransferFunction, TransferFunctionConfig};
