//! RTL optimizer: whole-program analyses feeding type specialization,
//! instruction combining and inlining.

pub mod avail;
pub mod cfg;
pub mod combine;
pub mod defuse;
pub mod infer;
pub mod inline;
pub mod pipeline;
pub mod specialize;

pub use avail::{compute_availability, Availability};
pub use cfg::{build_cfg, Callee, Cfg};
pub use combine::{combine, Pattern, Rewrite};
pub use defuse::{build_def_use, DefUseGraph};
pub use infer::{infer_types, TypeElem, TypeInfo};
pub use inline::{inline_calls, InlineOutcome, DEFAULT_INLINE_LIMIT};
pub use pipeline::{analyze, run_pipeline, FuncReport, OptFlags, OptReport, OPT_REPORT_HEADER};
pub use specialize::specialize;
