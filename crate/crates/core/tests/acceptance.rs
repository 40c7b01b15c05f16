//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero when any
//! criterion fails.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::time::{Duration, Instant};

use common::{args, corpus, fib, fib_calls, oracle, outcome, sieve_count, CORPUS};
use dinolite::bytecode::{dump_text, parse_text, RtlProgram};
use dinolite::collections::table::{probe_sequence, AssocTable};
use dinolite::driver::{bench_configs, compile_rtl, BenchRow, VmKind, LADDER};
use dinolite::optimizer::{analyze, OptFlags};
use dinolite::vm::{run_rtl, run_stack, RunOptions, Value};
use rand::{rngs::StdRng, Rng, SeedableRng};

// Criterion 1: wall-clock ratios on nested-loops, min of three runs.
const LADDER_ARG: &str = "18";
const LADDER_REPEAT: usize = 3;
const MIN_STACK_OVER_RTL: f64 = 1.8;
const MIN_RTL_OVER_COMBINE: f64 = 1.15;
const MIN_COMBINE_OVER_SPECIALIZE: f64 = 1.2;
const LADDER_BUDGET: Duration = Duration::from_secs(60);

// Criterion 2: dispatch counts.
const MIN_STACK_OVER_RTL_DISPATCH: f64 = 2.5;

// Criterion 6: memoized fib.
const FIB_N: u32 = 30;
const MAX_MEMO_ENTRIES: u64 = 31;
const MIN_PLAIN_ENTRIES: u64 = 1_000_000;
const MIN_MEMO_SPEEDUP: f64 = 10.0;
const MEMO_BUDGET: Duration = Duration::from_secs(10);

// Criterion 7: table model.
const TABLE_OPS: usize = 100_000;
const MAX_LOAD: f64 = 0.70;

// Criterion 9.
const SIEVE_EXPECTED: &str = "1899\n";

// Criterion 10: profiler self-time slack.
const PROFILE_SLACK: f64 = 0.05;

type Check = Result<String, String>;

/// Stack, rtl, rtl+combine, rtl+combine+specialize(+inline).
fn ladder() -> Result<(Vec<BenchRow>, Duration), String> {
    let t0 = Instant::now();
    let rows = bench_configs(
        &corpus("loop"),
        &args(&[LADDER_ARG]),
        &LADDER[..4],
        LADDER_REPEAT,
    );
    if let Some(r) = rows.iter().find(|r| r.failure.is_some()) {
        return Err(format!(
            "{}: {}",
            r.config,
            r.failure.as_deref().unwrap_or_default()
        ));
    }
    Ok((rows, t0.elapsed()))
}

fn c1_times(ladder: &Result<(Vec<BenchRow>, Duration), String>) -> Check {
    let (rows, took) = ladder.as_ref().map_err(Clone::clone)?;
    let s: Vec<f64> = rows.iter().map(|r| r.min.as_secs_f64()).collect();
    let (a, b, c) = (s[0] / s[1], s[1] / s[2], s[2] / s[3]);
    let msg = format!(
        "stack/rtl={a:.2} (>= {MIN_STACK_OVER_RTL}), rtl/combine={b:.2} (>= {MIN_RTL_OVER_COMBINE}), \
         combine/specialize={c:.2} (>= {MIN_COMBINE_OVER_SPECIALIZE}), took {:.1}s (< {}s)",
        took.as_secs_f64(),
        LADDER_BUDGET.as_secs()
    );
    let ok = a >= MIN_STACK_OVER_RTL
        && b >= MIN_RTL_OVER_COMBINE
        && c >= MIN_COMBINE_OVER_SPECIALIZE
        && *took < LADDER_BUDGET;
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn c2_dispatch(ladder: &Result<(Vec<BenchRow>, Duration), String>) -> Check {
    let (rows, _) = ladder.as_ref().map_err(Clone::clone)?;
    let d: Vec<u64> = rows.iter().map(|r| r.dispatches).collect();
    let ratio = d[0] as f64 / d[1] as f64;
    let msg = format!(
        "stack={} rtl={} combine={} stack/rtl={ratio:.2}",
        d[0], d[1], d[2]
    );
    if d[0] > d[1] && d[1] > d[2] && ratio >= MIN_STACK_OVER_RTL_DISPATCH {
        Ok(msg)
    } else {
        Err(msg)
    }
}

const GOLDEN_COMBINE: &str = "\
.func name=main id=0 arity=0 nslots=3 hints=
  0 ldi op1=-3 imm=1000
  1 ldi op1=-2 imm=0
  2 bflt op1=-2 op2=-3 res=1 pc=4
  3 btltinc op1=-2 op2=-3 imm=1 res=1 pc=3
  4 ld op1=2 op2=-2
  5 builtin op1=1 op2=1 op3=2 n=1
  6 ret op1=0
.end
";

/// The function section of a dump, without the global directives.
fn funcs_of(dump: &str) -> String {
    dump.lines()
        .skip_while(|l| !l.starts_with(".func"))
        .map(|l| format!("{l}\n"))
        .collect()
}

fn c3_golden() -> Check {
    let src = corpus("empty_loop");
    let combine = funcs_of(&dump_text(
        &compile_rtl(
            &src,
            "",
            OptFlags {
                combine: true,
                ..OptFlags::NONE
            },
        )
        .map_err(|e| e.to_string())?
        .program,
    ));
    if combine != GOLDEN_COMBINE {
        return Err(format!("combine dump differs:\n{combine}"));
    }
    let all = funcs_of(&dump_text(
        &compile_rtl(&src, "", OptFlags::ALL)
            .map_err(|e| e.to_string())?
            .program,
    ));
    let expected = GOLDEN_COMBINE
        .replace(" bflt ", " ibflt ")
        .replace(" btltinc ", " ibtltinc ");
    if all != expected {
        return Err(format!("specialized dump differs:\n{all}"));
    }
    Ok("loop body is the single self-branching btltinc / ibtltinc".into())
}

fn c4_equivalence() -> Check {
    let mut runs = 0;
    for (name, argv) in CORPUS {
        let argv = args(argv);
        let expected = (oracle(name, &argv), 0);
        let stack = outcome(&corpus(name), &argv, VmKind::Stack, OptFlags::NONE, false);
        if stack != expected {
            return Err(format!("{name} on stack: {stack:?}, expected {expected:?}"));
        }
        runs += 1;
        for flags in OptFlags::subsets() {
            let got = outcome(&corpus(name), &argv, VmKind::Rtl, flags, true);
            if got != expected {
                return Err(format!("{name} on rtl [{}]: {got:?}", flags.label()));
            }
            runs += 1;
        }
    }
    if CORPUS.len() < 7 {
        return Err(format!("only {} corpus programs", CORPUS.len()));
    }
    Ok(format!("{} programs, {runs} runs identical", CORPUS.len()))
}

fn c5_soundness() -> Check {
    let mut observed = 0;
    for (name, argv) in CORPUS {
        for flags in [
            OptFlags::NONE,
            OptFlags {
                inline: true,
                ..OptFlags::NONE
            },
        ] {
            let p = compile_rtl(&corpus(name), name, flags)
                .map_err(|e| e.to_string())?
                .program;
            observed += sound(&p, &args(argv)).map_err(|e| format!("{name}: {e}"))?;
        }
    }
    let p = compile_rtl(&corpus("loop"), "loop", OptFlags::ALL)
        .map_err(|e| e.to_string())?
        .program;
    let r = run_rtl(
        &p,
        &args(&["6"]),
        &RunOptions {
            count: true,
            ..RunOptions::default()
        },
        &mut std::io::sink(),
    );
    let c = r.counters.ok_or("no counters")?;
    let msg = format!(
        "{observed} recorded tags admitted; nested-loops typed ops specialized {}/{}",
        c.specialized_typed,
        c.specialized_typed + c.generic_typed
    );
    if c.generic_typed == 0 && c.specialized_typed > 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn sound(p: &RtlProgram, argv: &[String]) -> Result<usize, String> {
    let (_, types) = analyze(p);
    let r = run_rtl(
        p,
        argv,
        &RunOptions {
            record_types: true,
            ..RunOptions::default()
        },
        &mut std::io::sink(),
    );
    let rec = r.types.ok_or("no type record")?;
    let mut n = 0;
    for (f, u) in p.units.iter().enumerate() {
        for (pc, ins) in u.code.iter().enumerate() {
            for pos in 0..ins.uses().len() {
                for tag in rec.observed(f, pc, pos) {
                    n += 1;
                    if !types.use_type(f, pc, pos).admits(tag) {
                        return Err(format!(
                            "{}@{pc} use {pos}: {} not admitted",
                            u.name,
                            tag.name()
                        ));
                    }
                }
            }
        }
    }
    Ok(n)
}

fn c6_memo() -> Check {
    let t0 = Instant::now();
    let hinted = corpus("fib");
    if !hinted.contains("!pure") {
        return Err("fib.dl lost its hint".into());
    }
    let plain = hinted.replace("!pure", "");
    let argv = args(&[&FIB_N.to_string()]);
    let expected = format!("{}\n", fib(FIB_N));
    let fib_entries = |src: &str| -> Result<(u64, f64), String> {
        let p = compile_rtl(src, "", OptFlags::ALL)
            .map_err(|e| e.to_string())?
            .program;
        let id = p
            .units
            .iter()
            .position(|u| u.name == "fib")
            .ok_or("no fib")?;
        let mut out = Vec::new();
        let r = run_rtl(
            &p,
            &argv,
            &RunOptions {
                count: true,
                memoize: true,
                ..RunOptions::default()
            },
            &mut out,
        );
        if String::from_utf8_lossy(&out) != expected {
            return Err("wrong fib value".into());
        }
        let mut best = f64::MAX;
        for _ in 0..3 {
            let timed = RunOptions {
                memoize: true,
                ..RunOptions::default()
            };
            best = best.min(
                run_rtl(&p, &argv, &timed, &mut std::io::sink())
                    .elapsed
                    .as_secs_f64(),
            );
        }
        Ok((r.counters.ok_or("no counters")?.entries[id], best))
    };
    let (memo_entries, memo_t) = fib_entries(&hinted)?;
    let (plain_entries, plain_t) = fib_entries(&plain)?;
    let speedup = plain_t / memo_t.max(1e-9);
    let took = t0.elapsed();
    let msg = format!(
        "entries {memo_entries} (<= {MAX_MEMO_ENTRIES}) vs {plain_entries} (> {MIN_PLAIN_ENTRIES}, oracle {}), \
         speedup {speedup:.0}x (>= {MIN_MEMO_SPEEDUP}), took {:.1}s",
        fib_calls(FIB_N),
        took.as_secs_f64()
    );
    let ok = memo_entries <= MAX_MEMO_ENTRIES
        && plain_entries > MIN_PLAIN_ENTRIES
        && plain_entries == fib_calls(FIB_N)
        && speedup >= MIN_MEMO_SPEEDUP
        && took < MEMO_BUDGET;
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Reference key: integral floats are the same key as the integer.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum ModelKey {
    Int(i64),
    Float(u64),
    Str(String),
}

fn random_key(rng: &mut StdRng) -> (Value, ModelKey) {
    let k = rng.gen_range(-2000i64..2000);
    match rng.gen_range(0..4) {
        0 => (Value::Int(k), ModelKey::Int(k)),
        1 => (Value::Float(k as f64), ModelKey::Int(k)),
        2 => {
            let f = k as f64 + 0.25;
            (Value::Float(f), ModelKey::Float(f.to_bits()))
        }
        _ => (
            Value::str(&format!("key{k}")),
            ModelKey::Str(format!("key{k}")),
        ),
    }
}

fn c7_table() -> Check {
    let mut rng = StdRng::seed_from_u64(0x7ab1e);
    let mut t = AssocTable::new();
    let mut model: HashMap<ModelKey, i64> = HashMap::new();
    let mut max_load: f64 = 0.0;
    for step in 0..TABLE_OPS {
        let (key, mk) = random_key(&mut rng);
        match rng.gen_range(0..10) {
            0..=4 => {
                let v: i64 = rng.gen();
                t.insert(key, Value::Int(v)).map_err(|e| e.to_string())?;
                model.insert(mk, v);
            }
            5..=7 => {
                let got = t.remove(&key).map_err(|e| e.to_string())?.is_some();
                if got != model.remove(&mk).is_some() {
                    return Err(format!("step {step}: delete disagrees"));
                }
            }
            _ => {
                let got = match t.get(&key).map_err(|e| e.to_string())? {
                    Some(Value::Int(v)) => Some(*v),
                    None => None,
                    Some(other) => return Err(format!("step {step}: stored {other:?}")),
                };
                if got != model.get(&mk).copied() {
                    return Err(format!("step {step}: get disagrees"));
                }
            }
        }
        if t.len() != model.len() {
            return Err(format!("step {step}: len {} vs {}", t.len(), model.len()));
        }
        max_load = max_load.max(t.load());
    }
    if max_load > MAX_LOAD {
        return Err(format!("load reached {max_load:.3}"));
    }
    for h in 0..65536u64 {
        let seq: BTreeSet<usize> = probe_sequence(h.wrapping_mul(0x2545_f491_4f6c_dd1d), 16)
            .take(16)
            .collect();
        if seq.len() != 16 {
            return Err(format!("probe sequence for hash {h} misses slots"));
        }
    }
    Ok(format!("{TABLE_OPS} ops match the model, max load {max_load:.3} (<= {MAX_LOAD}), capacity-16 probes cover all slots"))
}

fn c8_roundtrip() -> Check {
    let mut n = 0;
    for (name, argv) in CORPUS {
        let argv = args(argv);
        for flags in [OptFlags::NONE, OptFlags::ALL] {
            let p = compile_rtl(&corpus(name), name, flags)
                .map_err(|e| e.to_string())?
                .program;
            let text = dump_text(&p);
            let q = parse_text(&text).map_err(|e| format!("{name}: {e}"))?;
            if dump_text(&q) != text {
                return Err(format!(
                    "{name} [{}]: dump is not a fixed point",
                    flags.label()
                ));
            }
            let mut out = Vec::new();
            let r = run_rtl(&q, &argv, &RunOptions::default(), &mut out);
            let got = (String::from_utf8_lossy(&out).into_owned(), r.exit_code);
            if got != outcome(&corpus(name), &argv, VmKind::Rtl, flags, true) {
                return Err(format!("{name} [{}]: dump runs differently", flags.label()));
            }
            n += 1;
        }
    }
    Ok(format!(
        "{n} dumps are fixed points and run like their source"
    ))
}

fn c9_sieve() -> Check {
    let oracle = format!("{}\n", sieve_count(8191));
    if oracle != SIEVE_EXPECTED {
        return Err(format!("host sieve gives {oracle:?}"));
    }
    for vm in [VmKind::Stack, VmKind::Rtl] {
        let got = outcome(&corpus("sieve"), &[], vm, OptFlags::ALL, true);
        if got != (oracle.clone(), 0) {
            return Err(format!("{vm:?}: {got:?}"));
        }
    }
    Ok("1899 on both engines, matching the host sieve".into())
}

fn c10_profile() -> Check {
    let src = corpus("fib");
    let plain = src.replace("!pure", "");
    let argv = args(&["24"]);
    let opts = RunOptions {
        profile: true,
        memoize: false,
        ..RunOptions::default()
    };
    let mut worst: f64 = 0.0;
    for vm in [VmKind::Stack, VmKind::Rtl] {
        let report = match vm {
            VmKind::Stack => {
                let (p, _) =
                    dinolite::driver::compile_stack(&plain, "").map_err(|e| e.to_string())?;
                run_stack(&p, &argv, &opts, &mut std::io::sink())
            }
            VmKind::Rtl => {
                let p = compile_rtl(&plain, "", OptFlags::ALL)
                    .map_err(|e| e.to_string())?
                    .program;
                run_rtl(&p, &argv, &opts, &mut std::io::sink())
            }
        };
        let prof = report.profile.ok_or("no profile")?;
        let text = prof.report();
        let lines: Vec<&str> = text.lines().collect();
        if lines.first() != Some(&"** Calls *** Time **** Name") {
            return Err(format!("{vm:?}: header {:?}", lines.first()));
        }
        if !lines
            .last()
            .is_some_and(|l| l.trim_end().ends_with("All Program"))
        {
            return Err(format!("{vm:?}: last row {:?}", lines.last()));
        }
        let self_sum: f64 = prof.self_secs.iter().sum();
        if self_sum > prof.total_secs * (1.0 + PROFILE_SLACK) {
            return Err(format!(
                "{vm:?}: self {self_sum:.4}s > total {:.4}s",
                prof.total_secs
            ));
        }
        worst = worst.max(self_sum / prof.total_secs.max(1e-9));
    }
    Ok(format!(
        "header and All Program row present, self/total <= {worst:.3} (<= {})",
        1.0 + PROFILE_SLACK
    ))
}

fn main() {
    let ladder = ladder();
    let results: Vec<(&str, Check)> = vec![
        ("1 ladder timing", c1_times(&ladder)),
        ("2 dispatch counts", c2_dispatch(&ladder)),
        ("3 combining golden", c3_golden()),
        ("4 semantics preservation", c4_equivalence()),
        ("5 type soundness", c5_soundness()),
        ("6 pure-call memoization", c6_memo()),
        ("7 table model", c7_table()),
        ("8 bytecode round-trip", c8_roundtrip()),
        ("9 sieve", c9_sieve()),
        ("10 profiler format", c10_profile()),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(m) => println!("PASS {name}: {m}"),
            Err(m) => {
                failed += 1;
                println!("FAIL {name}: {m}");
            }
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
