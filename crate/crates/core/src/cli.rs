//! Command-line front end: `run`, `dump` and `bench`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bytecode::dump_text;
use crate::driver::{
    bench, bench_tsv, compile_rtl, compile_stack, load_bytecode, DriverError, Program, VmKind,
};
use crate::optimizer::{OptFlags, DEFAULT_INLINE_LIMIT};
use crate::vm::{RunOptions, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};

pub const INLINE_LIMIT_ENV: &str = "DINOLITE_INLINE_LIMIT";

#[derive(Debug, Parser)]
#[command(
    name = "dinolite",
    version,
    about = "Bytecode interpreter for the Dinolite language"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compile and run a `.dl` source file or a `.dlb` bytecode file.
    Run(RunArgs),
    /// Write the RTL bytecode of a source file as `.dlb` text.
    Dump(DumpArgs),
    /// Time the configuration ladder and print it as TSV.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VmArg {
    Stack,
    Rtl,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "rtl")]
    vm: VmArg,
    /// Passes are on by default; these only matter to reject them for the
    /// stack engine.
    #[arg(long)]
    combine: bool,
    #[arg(long)]
    specialize: bool,
    #[arg(long)]
    inline: bool,
    #[arg(long)]
    no_combine: bool,
    #[arg(long)]
    no_specialize: bool,
    #[arg(long)]
    no_inline: bool,
    #[arg(long)]
    no_memoize: bool,
    /// Print dynamic counters as TSV to stderr.
    #[arg(long)]
    count: bool,
    /// Print the profile to stderr.
    #[arg(short = 'p')]
    profile: bool,
    /// Also write the executed RTL bytecode to PATH.
    #[arg(long, value_name = "PATH")]
    dump_bc: Option<PathBuf>,
    /// Print per-function optimizer counts as TSV to stderr.
    #[arg(long)]
    opt_report: bool,
    #[arg(long, value_name = "N")]
    inline_limit: Option<usize>,
    file: PathBuf,
    /// Arguments visible to the program as `argv`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    args: Vec<String>,
}

#[derive(Debug, Args)]
struct DumpArgs {
    #[arg(long)]
    combine: bool,
    #[arg(long)]
    specialize: bool,
    #[arg(long)]
    inline: bool,
    /// Shorthand for all three passes.
    #[arg(long)]
    all: bool,
    #[arg(long, value_name = "N")]
    inline_limit: Option<usize>,
    /// Output path; stdout when absent.
    #[arg(short, long, value_name = "PATH")]
    output: Option<PathBuf>,
    file: PathBuf,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 3)]
    repeat: usize,
    file: PathBuf,
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    args: Vec<String>,
}

/// Resolves the inline limit: flag, then environment, then default.
fn inline_limit(flag: Option<usize>) -> Result<usize, DriverError> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var(INLINE_LIMIT_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| DriverError::Usage(format!("{INLINE_LIMIT_ENV}: not a count: {v:?}"))),
        Err(_) => Ok(DEFAULT_INLINE_LIMIT),
    }
}

fn read(path: &Path) -> Result<String, DriverError> {
    std::fs::read_to_string(path)
        .map_err(|e| DriverError::Usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), DriverError> {
    std::fs::write(path, text).map_err(|e| DriverError::Usage(format!("{}: {e}", path.display())))
}

fn is_bytecode(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "dlb")
}

fn cmd_run(a: &RunArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, DriverError> {
    let file = a.file.display().to_string();
    let text = read(&a.file)?;
    let vm = match a.vm {
        VmArg::Stack => VmKind::Stack,
        VmArg::Rtl => VmKind::Rtl,
    };
    if vm == VmKind::Stack {
        let mut rtl_only = Vec::new();
        for (set, name) in [
            (a.combine, "--combine"),
            (a.specialize, "--specialize"),
            (a.inline, "--inline"),
            (a.opt_report, "--opt-report"),
            (a.dump_bc.is_some(), "--dump-bc"),
            (a.inline_limit.is_some(), "--inline-limit"),
        ] {
            if set {
                rtl_only.push(name);
            }
        }
        if !rtl_only.is_empty() {
            return Err(DriverError::Usage(format!(
                "{} only apply to --vm=rtl",
                rtl_only.join(", ")
            )));
        }
        if is_bytecode(&a.file) {
            return Err(DriverError::Usage(
                "bytecode files run on --vm=rtl only".into(),
            ));
        }
    }
    for (on, off, name) in [
        (a.combine, a.no_combine, "combine"),
        (a.specialize, a.no_specialize, "specialize"),
        (a.inline, a.no_inline, "inline"),
    ] {
        if on && off {
            return Err(DriverError::Usage(format!(
                "--{name} conflicts with --no-{name}"
            )));
        }
    }
    let flags = OptFlags {
        combine: !a.no_combine,
        specialize: !a.no_specialize,
        inline: !a.no_inline,
        inline_limit: inline_limit(a.inline_limit)?,
    };

    let program = if is_bytecode(&a.file) {
        Program::Rtl(load_bytecode(&text, &file)?)
    } else if vm == VmKind::Stack {
        let (p, warnings) = compile_stack(&text, &file)?;
        for w in warnings {
            let _ = writeln!(err, "{w}");
        }
        Program::Stack(p)
    } else {
        let c = compile_rtl(&text, &file, flags)?;
        for w in &c.warnings {
            let _ = writeln!(err, "{w}");
        }
        if a.opt_report {
            let _ = write!(err, "{}", c.report.to_tsv());
        }
        Program::Rtl(c.program)
    };
    if let (Some(path), Program::Rtl(p)) = (&a.dump_bc, &program) {
        write_file(path, &dump_text(p))?;
    }

    let options = RunOptions {
        count: a.count,
        profile: a.profile,
        memoize: !a.no_memoize,
        ..RunOptions::default()
    };
    let report = program.run(&a.args, &options, out);
    let _ = out.flush();
    if let Some(e) = &report.error {
        let _ = writeln!(err, "{file}: {e}");
    }
    if let Some(c) = &report.counters {
        let _ = write!(err, "{}", c.to_tsv());
    }
    if let Some(p) = &report.profile {
        let _ = write!(err, "{}", p.report());
    }
    Ok(report.exit_code)
}

fn cmd_dump(a: &DumpArgs, out: &mut dyn Write) -> Result<i32, DriverError> {
    let file = a.file.display().to_string();
    let text = read(&a.file)?;
    let flags = OptFlags {
        combine: a.combine || a.all,
        specialize: a.specialize || a.all,
        inline: a.inline || a.all,
        inline_limit: inline_limit(a.inline_limit)?,
    };
    let dump = dump_text(&compile_rtl(&text, &file, flags)?.program);
    match &a.output {
        Some(path) => write_file(path, &dump)?,
        None => {
            let _ = out.write_all(dump.as_bytes());
        }
    }
    Ok(EXIT_OK)
}

fn cmd_bench(a: &BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, DriverError> {
    let text = read(&a.file)?;
    let rows = bench(&text, &a.args, a.repeat);
    let _ = write!(out, "{}", bench_tsv(&rows));
    let mut code = EXIT_OK;
    for r in &rows {
        if let Some(f) = &r.failure {
            let _ = writeln!(err, "{}: {f}", r.config);
            code = EXIT_RUNTIME;
        }
    }
    Ok(code)
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a, out, err),
        Command::Dump(a) => cmd_dump(a, out),
        Command::Bench(a) => cmd_bench(a, out, err),
    };
    let _ = out.flush();
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "dinolite: {e}");
            e.exit_code()
        }
    }
}
