//! Source to execution: compile for either engine, run, and time the
//! five-row configuration ladder.

use std::io::{self, Write};
use std::time::Duration;

use crate::bytecode::{parse_text, RtlProgram, StackProgram};
use crate::codegen::{gen_rtl, gen_stack};
use crate::frontend::check_source;
use crate::optimizer::{run_pipeline, OptFlags, OptReport};
use crate::vm::{
    run_rtl, run_stack, ExitReport, RunOptions, EXIT_COMPILE, EXIT_RUNTIME, EXIT_USAGE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VmKind {
    Stack,
    #[default]
    Rtl,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DriverError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Compile(String),
    /// The optimizer produced bytecode that fails validation.
    #[error("internal error: {0}")]
    Internal(String),
}

impl DriverError {
    pub fn exit_code(&self) -> i32 {
        match self {
            DriverError::Usage(_) => EXIT_USAGE,
            DriverError::Compile(_) => EXIT_COMPILE,
            DriverError::Internal(_) => EXIT_RUNTIME,
        }
    }
}

/// Prefixes `file:` to a `line:col: ...` diagnostic.
fn located(file: &str, message: impl std::fmt::Display) -> String {
    if file.is_empty() {
        message.to_string()
    } else {
        format!("{file}:{message}")
    }
}

#[derive(Debug, Clone)]
pub struct CompiledRtl {
    pub program: RtlProgram,
    pub report: OptReport,
    pub warnings: Vec<String>,
}

/// Frontend, RTL codegen and the optimizer passes selected by `flags`.
/// `file` only labels diagnostics.
pub fn compile_rtl(source: &str, file: &str, flags: OptFlags) -> Result<CompiledRtl, DriverError> {
    let checked = check_source(source).map_err(|e| DriverError::Compile(located(file, e)))?;
    let program = gen_rtl(&checked.resolved).map_err(|e| DriverError::Compile(located(file, e)))?;
    let (program, report) = run_pipeline(program, flags).map_err(|v| {
        DriverError::Internal(
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join("; "),
        )
    })?;
    let mut warnings: Vec<String> = checked.warnings.iter().map(|w| located(file, w)).collect();
    warnings.extend(
        report
            .warnings
            .iter()
            .map(|w| located(file, format!(" warning: {w}"))),
    );
    Ok(CompiledRtl {
        program,
        report,
        warnings,
    })
}

pub fn compile_stack(source: &str, file: &str) -> Result<(StackProgram, Vec<String>), DriverError> {
    let checked = check_source(source).map_err(|e| DriverError::Compile(located(file, e)))?;
    let program =
        gen_stack(&checked.resolved).map_err(|e| DriverError::Compile(located(file, e)))?;
    Ok((
        program,
        checked.warnings.iter().map(|w| located(file, w)).collect(),
    ))
}

/// Reads `.dlb` text back into an RTL program.
pub fn load_bytecode(text: &str, file: &str) -> Result<RtlProgram, DriverError> {
    parse_text(text).map_err(|e| DriverError::Compile(located(file, format!(" {e}"))))
}

/// One executable form of a program.
#[derive(Debug, Clone)]
pub enum Program {
    Stack(StackProgram),
    Rtl(RtlProgram),
}

impl Program {
    pub fn run(&self, argv: &[String], options: &RunOptions, out: &mut dyn Write) -> ExitReport {
        match self {
            Program::Stack(p) => run_stack(p, argv, options, out),
            Program::Rtl(p) => run_rtl(p, argv, options, out),
        }
    }
}

/// Compiles for `vm`; the optimizer flags only apply to the RTL engine.
pub fn compile(
    source: &str,
    file: &str,
    vm: VmKind,
    flags: OptFlags,
) -> Result<Program, DriverError> {
    Ok(match vm {
        VmKind::Stack => Program::Stack(compile_stack(source, file)?.0),
        VmKind::Rtl => Program::Rtl(compile_rtl(source, file, flags)?.program),
    })
}

/// Compiles and runs, collecting stdout. Returns the output and report.
pub fn run_source(
    source: &str,
    argv: &[String],
    vm: VmKind,
    flags: OptFlags,
    options: &RunOptions,
) -> Result<(String, ExitReport), DriverError> {
    let program = compile(source, "", vm, flags)?;
    let mut out = Vec::new();
    let report = program.run(argv, options, &mut out);
    Ok((String::from_utf8_lossy(&out).into_owned(), report))
}

/// A rung of the ladder: engine, passes and memoization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchConfig {
    pub name: &'static str,
    pub vm: VmKind,
    pub flags: OptFlags,
    pub memoize: bool,
}

pub const LADDER: [BenchConfig; 5] = [
    BenchConfig {
        name: "stack",
        vm: VmKind::Stack,
        flags: OptFlags::NONE,
        memoize: false,
    },
    BenchConfig {
        name: "rtl",
        vm: VmKind::Rtl,
        flags: OptFlags::NONE,
        memoize: false,
    },
    BenchConfig {
        name: "rtl+combine",
        vm: VmKind::Rtl,
        flags: OptFlags {
            combine: true,
            ..OptFlags::NONE
        },
        memoize: false,
    },
    BenchConfig {
        name: "rtl+combine+specialize+inline",
        vm: VmKind::Rtl,
        flags: OptFlags::ALL,
        memoize: false,
    },
    BenchConfig {
        name: "rtl+all+memoize",
        vm: VmKind::Rtl,
        flags: OptFlags::ALL,
        memoize: true,
    },
];

pub const BENCH_HEADER: &str = "config\tmin-seconds\tdispatches\tdispatches-per-second";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub config: &'static str,
    /// Fastest of the timed runs.
    pub min: Duration,
    pub dispatches: u64,
    /// Set when the row's program failed to compile or run.
    pub failure: Option<String>,
}

impl BenchRow {
    pub fn dispatches_per_second(&self) -> f64 {
        self.dispatches as f64 / self.min.as_secs_f64().max(1e-9)
    }
}

/// Runs one rung: a counting run for the dispatch total, then `repeat`
/// timed runs without counters.
pub fn bench_config(source: &str, argv: &[String], cfg: &BenchConfig, repeat: usize) -> BenchRow {
    bench_configs(source, argv, std::slice::from_ref(cfg), repeat).remove(0)
}

/// Times several rungs. Each gets a counting run; the timed runs then go
/// round-robin over the rungs, `repeat` rounds, so a burst of host noise
/// lands on every rung instead of all runs of one. Runs never overlap.
pub fn bench_configs(
    source: &str,
    argv: &[String],
    cfgs: &[BenchConfig],
    repeat: usize,
) -> Vec<BenchRow> {
    let mut rows: Vec<BenchRow> = cfgs
        .iter()
        .map(|c| BenchRow {
            config: c.name,
            min: Duration::MAX,
            dispatches: 0,
            failure: None,
        })
        .collect();
    let mut programs = Vec::with_capacity(cfgs.len());
    for (cfg, row) in cfgs.iter().zip(rows.iter_mut()) {
        let program = match compile(source, "", cfg.vm, cfg.flags) {
            Ok(p) => p,
            Err(e) => {
                row.failure = Some(e.to_string());
                programs.push(None);
                continue;
            }
        };
        let counting = RunOptions {
            count: true,
            memoize: cfg.memoize,
            ..RunOptions::default()
        };
        let r = program.run(argv, &counting, &mut io::sink());
        match r.error {
            Some(e) => {
                row.failure = Some(e.to_string());
                programs.push(None);
            }
            None => {
                row.dispatches = r.counters.map_or(0, |c| c.dispatched);
                programs.push(Some(program));
            }
        }
    }
    for _ in 0..repeat.max(1) {
        for ((cfg, row), program) in cfgs.iter().zip(rows.iter_mut()).zip(&programs) {
            let Some(program) = program.as_ref().filter(|_| row.failure.is_none()) else {
                continue;
            };
            let timed = RunOptions {
                memoize: cfg.memoize,
                ..RunOptions::default()
            };
            let r = program.run(argv, &timed, &mut io::sink());
            match r.error {
                Some(e) => row.failure = Some(e.to_string()),
                None => row.min = row.min.min(r.elapsed),
            }
        }
    }
    for row in &mut rows {
        if row.failure.is_some() {
            row.min = Duration::ZERO;
        }
    }
    rows
}

/// The whole ladder, rows in fixed order.
pub fn bench(source: &str, argv: &[String], repeat: usize) -> Vec<BenchRow> {
    bench_configs(source, argv, &LADDER, repeat)
}

pub fn bench_tsv(rows: &[BenchRow]) -> String {
    let mut out = String::from(BENCH_HEADER);
    out.push('\n');
    for r in rows {
        if r.failure.is_some() {
            out.push_str(&format!("{}\tFAILED\tFAILED\tFAILED\n", r.config));
        } else {
            out.push_str(&format!(
                "{}\t{:.6}\t{}\t{:.0}\n",
                r.config,
                r.min.as_secs_f64(),
                r.dispatches,
                r.dispatches_per_second()
            ));
        }
    }
    out
}
