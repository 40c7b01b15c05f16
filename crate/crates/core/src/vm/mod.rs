//! Execution engines. Both keep globals and every active frame in one
//! value vector: globals first, frames stacked after them. A slot `s >= 0`
//! is `base + s`, a slot `s < 0` is global `!s`.

mod counters;
mod memo;
pub mod ops;
mod profile;
mod recorder;
mod rtl;
mod stack;
mod value;

use std::fmt;
use std::time::Duration;

pub use counters::ExecCounters;
pub use memo::{KeyPart, MemoCache, MemoKey, MemoStats};
pub use profile::{ProfileData, ALL_PROGRAM, PROFILE_HEADER};
pub use recorder::TypeRecord;
pub use rtl::run_rtl;
pub use stack::run_stack;
pub use value::{render_float, Tag, Value};

use crate::bytecode::BcProgram;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_COMPILE: i32 = 65;
pub const EXIT_RUNTIME: i32 = 70;
pub const DEFAULT_MAX_DEPTH: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub count: bool,
    pub profile: bool,
    /// Consult the memo cache for functions hinted `!pure`.
    pub memoize: bool,
    /// Record operand tags (RTL engine only).
    pub record_types: bool,
    pub max_depth: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            count: false,
            profile: false,
            memoize: false,
            record_types: false,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuntimeError {
    pub message: String,
    pub func: String,
    pub pc: usize,
}

impl fmt::Display for RuntimeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "runtime error in {} at pc {}: {}",
            self.func, self.pc, self.message
        )
    }
}

impl std::error::Error for RuntimeError {}

#[derive(Debug, Clone, Default)]
pub struct ExitReport {
    pub exit_code: i32,
    pub error: Option<RuntimeError>,
    pub counters: Option<ExecCounters>,
    pub profile: Option<ProfileData>,
    pub types: Option<TypeRecord>,
    pub memo: MemoStats,
    /// Wall-clock time of the run itself.
    pub elapsed: Duration,
}

impl ExitReport {
    pub fn is_ok(&self) -> bool {
        self.exit_code == EXIT_OK
    }
}

fn unit_names<I>(p: &BcProgram<I>) -> Vec<String> {
    p.units.iter().map(|u| u.name.clone()).collect()
}

fn argv_value(argv: &[String]) -> Value {
    Value::array(argv.iter().map(|a| Value::str(a)).collect())
}

/// Builds the report shared by both engines.
fn finish(
    result: Result<(), RuntimeError>,
    elapsed: Duration,
    counters: Option<ExecCounters>,
    profile: Option<ProfileData>,
    types: Option<TypeRecord>,
    memo: MemoStats,
) -> ExitReport {
    let (exit_code, error) = match result {
        Ok(()) => (EXIT_OK, None),
        Err(e) => (EXIT_RUNTIME, Some(e)),
    };
    ExitReport {
        exit_code,
        error,
        counters,
        profile,
        types,
        memo,
        elapsed,
    }
}
