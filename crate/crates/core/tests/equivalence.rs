//! Corpus outputs against host oracles, and identical behavior across both
//! engines and every optimizer configuration.

mod common;

use common::{args, corpus, oracle, outcome, program, CORPUS};
use dinolite::driver::VmKind;
use dinolite::optimizer::OptFlags;
use proptest::prelude::*;

#[test]
fn corpus_matches_host_oracles() {
    for (name, argv) in CORPUS {
        let argv = args(argv);
        let (out, code) = outcome(&corpus(name), &argv, VmKind::Rtl, OptFlags::ALL, true);
        assert_eq!(code, 0, "{name}");
        assert_eq!(out, oracle(name, &argv), "{name}");
    }
}

#[test]
fn corpus_defaults_match_oracles() {
    for name in ["sieve", "fib", "empty_loop"] {
        let (out, _) = outcome(&corpus(name), &[], VmKind::Rtl, OptFlags::ALL, true);
        assert_eq!(out, oracle(name, &[]), "{name}");
    }
    let ten = args(&["10"]);
    let (out, _) = outcome(&corpus("loop"), &ten, VmKind::Rtl, OptFlags::ALL, true);
    assert_eq!(out, "1000000\n");
}

/// Every corpus program: stack engine plus the RTL engine under all eight
/// pass subsets, with and without memoization.
#[test]
fn corpus_same_everywhere() {
    for (name, argv) in CORPUS {
        let src = corpus(name);
        let argv = args(argv);
        let reference = outcome(&src, &argv, VmKind::Stack, OptFlags::NONE, false);
        assert_eq!(reference.1, 0, "{name}");
        for memoize in [false, true] {
            assert_eq!(
                outcome(&src, &argv, VmKind::Stack, OptFlags::NONE, memoize),
                reference,
                "{name} stack"
            );
            for flags in OptFlags::subsets() {
                let got = outcome(&src, &argv, VmKind::Rtl, flags, memoize);
                assert_eq!(
                    got,
                    reference,
                    "{name} rtl {} memoize={memoize}",
                    flags.label()
                );
            }
        }
    }
}

fn check_program(src: &str) -> Result<(), TestCaseError> {
    let reference = outcome(src, &[], VmKind::Stack, OptFlags::NONE, false);
    for flags in OptFlags::subsets() {
        for memoize in [false, true] {
            let got = outcome(src, &[], VmKind::Rtl, flags, memoize);
            prop_assert_eq!(
                &got,
                &reference,
                "rtl {} memoize={}\n{}",
                flags.label(),
                memoize,
                src
            );
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn random_programs_same_everywhere(src in program()) {
        check_program(&src)?;
    }
}

#[test]
fn runtime_errors_agree() {
    let src = "var a = 3, i;\nfor (i = 0; i < 5; i++) { putln(10 / (a - i)); }\n";
    let reference = outcome(src, &[], VmKind::Stack, OptFlags::NONE, false);
    assert_eq!(reference, ("3\n5\n10\n".to_string(), 70));
    check_program(src).unwrap();
}
