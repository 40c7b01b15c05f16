//! Dynamic counter and profile properties of whole programs.

mod common;

use common::{args, corpus};
use dinolite::driver::{compile, run_source, VmKind};
use dinolite::optimizer::OptFlags;
use dinolite::vm::RunOptions;

fn dispatched(src: &str, argv: &[&str], vm: VmKind, flags: OptFlags) -> (String, u64) {
    let opts = RunOptions {
        count: true,
        memoize: false,
        ..RunOptions::default()
    };
    let (out, r) = run_source(src, &args(argv), vm, flags, &opts).unwrap();
    assert!(r.is_ok(), "{:?}", r.error);
    (out, r.counters.unwrap().dispatched)
}

#[test]
fn nested_loops_stack_runs_many_more_instructions() {
    let src = corpus("loop");
    let (out_s, stack) = dispatched(&src, &["10"], VmKind::Stack, OptFlags::NONE);
    let (out_r, rtl) = dispatched(&src, &["10"], VmKind::Rtl, OptFlags::NONE);
    assert_eq!(out_s, "1000000\n");
    assert_eq!(out_r, out_s);
    assert!(stack as f64 >= 2.5 * rtl as f64, "stack {stack} rtl {rtl}");
}

#[test]
fn inlining_hot_callee_cuts_dispatches() {
    let src = corpus("meteor");
    for base in [
        OptFlags::NONE,
        OptFlags {
            combine: true,
            specialize: true,
            ..OptFlags::NONE
        },
    ] {
        let (a, without) = dispatched(&src, &["50"], VmKind::Rtl, base);
        let (b, with) = dispatched(
            &src,
            &["50"],
            VmKind::Rtl,
            OptFlags {
                inline: true,
                ..base
            },
        );
        assert_eq!(a, b);
        let cut = 1.0 - with as f64 / without as f64;
        assert!(cut > 0.30, "[{}] {without} -> {with}", base.label());
    }
}

#[test]
fn profile_orders_hottest_first() {
    let src = "fun cold(x) { return x + 1; }\n\
               fun hot(n) { var i, s = 0; for (i = 0; i < n; i++) s = s + i % 7; return s; }\n\
               var k, t = 0;\n\
               for (k = 0; k < 20; k++) t = t + hot(20000) + cold(k);\n\
               putln(t);";
    for vm in [VmKind::Stack, VmKind::Rtl] {
        let opts = RunOptions {
            profile: true,
            ..RunOptions::default()
        };
        let (_, r) = run_source(src, &[], vm, OptFlags::NONE, &opts).unwrap();
        let report = r.profile.unwrap().report();
        let lines: Vec<&str> = report.lines().collect();
        assert_eq!(lines[0], "** Calls *** Time **** Name");
        let row = |k: usize| lines[k].split_whitespace().collect::<Vec<_>>();
        assert_eq!((row(1)[0], row(1)[3]), ("20", "hot"), "{report}");
        assert_eq!((row(2)[0], row(2)[3]), ("20", "cold"), "{report}");
        assert!(lines[3].trim_end().ends_with("All Program"), "{report}");
    }
}

#[test]
fn inlined_function_profiles_with_zero_calls() {
    let src = corpus("meteor");
    let opts = RunOptions {
        profile: true,
        ..RunOptions::default()
    };
    let (_, r) = run_source(&src, &args(&["5"]), VmKind::Rtl, OptFlags::ALL, &opts).unwrap();
    let p = r.profile.unwrap();
    let cell = p.names.iter().position(|n| n == "cell").unwrap();
    assert_eq!(p.calls[cell], 0);
    let report = p.report();
    assert!(
        report
            .lines()
            .any(|l| l.split_whitespace().collect::<Vec<_>>() == ["0", "0.00", "--", "cell"]),
        "{report}"
    );
}

#[test]
fn empty_loop_dispatch_rate_smoke() {
    let src = "var i, n = 20000000;\nfor (i = 0; i < n; i++);\nputln(i);";
    let flags = OptFlags {
        combine: true,
        ..OptFlags::NONE
    };
    let program = compile(src, "", VmKind::Rtl, flags).unwrap();
    let (_, counted) = dispatched(src, &[], VmKind::Rtl, flags);
    let best = (0..3)
        .map(|_| {
            program
                .run(&[], &RunOptions::default(), &mut std::io::sink())
                .elapsed
                .as_secs_f64()
        })
        .fold(f64::MAX, f64::min);
    let rate = counted as f64 / best;
    assert!(rate >= 50e6, "{rate:.3e} dispatches/s");
}
