//! Core data model and pure algorithms for runtime-feedback-driven logging.
//!
//! This crate is `no_std` (it needs `alloc`). It owns everything that does not
//! touch a process, a file or the network:
//!
//! - [`model`]: logging statements, plans, source units and instrumented units.
//! - [`render`]: the surface syntax used to turn a statement into one source line
//!   and to parse that line back.
//! - [`instrument`]: inserting and stripping plans while keeping the original
//!   program text byte-exact.
//! - [`edit`]: add/remove/modify edits applied to a plan during refinement.
//! - [`verdict`]: the sufficiency rubric and critic verdicts.
//! - [`metrics`]: detection and repair statistics.
//! - [`lineage`]: tracking logging statements across a commit history.
//! - [`patch`]: line-hunk patches used by the evaluation harness.
//!
//! The `relog` crate layers process execution, model providers, the closed loop
//! and the command line on top of this one.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod digest;
pub mod edit;
pub mod instrument;
pub mod lineage;
pub mod metrics;
pub mod model;
pub mod patch;
pub mod render;
pub mod verdict;

pub use edit::{apply_edits, EditAction, EditError, EditOutcome, PlanEdit};
pub use instrument::{
    apply_plan, normalize_plan, strip_plan, verify_logic_preserved, Divergence,
    InstrumentError, PreservationReport,
};
pub use metrics::{MetricsError, MetricsReport, Tally};
pub use patch::{Hunk, Patch, PatchError};
pub use model::{
    InstrumentedUnit, LoggingPlan, LoggingStatement, ModelError, Position, Severity, SourceUnit,
};
pub use render::RenderProfile;
pub use verdict::{CriticVerdict, FeedbackAction, FeedbackItem, Rubric, SufficiencyRule};
