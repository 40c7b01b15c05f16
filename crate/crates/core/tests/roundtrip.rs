//! Text forms read back: `.dlb` dumps and pretty-printed source.

mod common;

use common::{args, corpus, outcome, CORPUS};
use dinolite::bytecode::{dump_text, parse_text, RtlProgram};
use dinolite::driver::{compile_rtl, Program, VmKind};
use dinolite::frontend::pretty::print_program;
use dinolite::frontend::{parse_program, tokenize};
use dinolite::optimizer::OptFlags;
use dinolite::vm::RunOptions;
use proptest::prelude::*;

fn run(p: &RtlProgram, argv: &[String]) -> (String, i32) {
    let mut out = Vec::new();
    let r = Program::Rtl(p.clone()).run(argv, &RunOptions::default(), &mut out);
    (String::from_utf8(out).unwrap(), r.exit_code)
}

/// Dump, parse, dump again: the texts agree, the parsed program equals the
/// original and runs the same.
fn check_bytecode(src: &str, argv: &[String], flags: OptFlags) -> Result<(), String> {
    let p = compile_rtl(src, "", flags)
        .map_err(|e| e.to_string())?
        .program;
    let text = dump_text(&p);
    let q = parse_text(&text).map_err(|e| format!("{e}\n{text}"))?;
    if dump_text(&q) != text {
        return Err(format!("dump is not a fixed point\n{text}"));
    }
    if q != p {
        return Err("parsed program differs".into());
    }
    let expected = outcome(src, argv, VmKind::Rtl, flags, true);
    if run(&q, argv) != expected {
        return Err("parsed program runs differently".into());
    }
    Ok(())
}

#[test]
fn corpus_bytecode_roundtrip() {
    for (name, argv) in CORPUS {
        for flags in OptFlags::subsets() {
            check_bytecode(&corpus(name), &args(argv), flags)
                .unwrap_or_else(|e| panic!("{name} [{}]: {e}", flags.label()));
        }
    }
}

#[test]
fn edited_dump_is_read_back() {
    let p = compile_rtl("putln(6 * 7);", "", OptFlags::NONE)
        .unwrap()
        .program;
    let text = dump_text(&p);
    let edited = text.replace("ldi op1=4 imm=7", "ldi op1=4 imm=8");
    assert_ne!(text, edited, "{text}");
    let q = parse_text(&edited).unwrap();
    assert_eq!(run(&q, &[]).0, "48\n");
}

fn pretty(src: &str) -> String {
    print_program(&parse_program(&tokenize(src).unwrap()).unwrap())
}

#[test]
fn corpus_pretty_print_roundtrip() {
    for (name, argv) in CORPUS {
        let src = corpus(name);
        let once = pretty(&src);
        assert_eq!(pretty(&once), once, "{name}");
        assert_eq!(
            outcome(&once, &args(argv), VmKind::Rtl, OptFlags::ALL, true),
            outcome(&src, &args(argv), VmKind::Rtl, OptFlags::ALL, true)
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_bytecode_roundtrip(src in common::program(), all in any::<bool>()) {
        let flags = if all { OptFlags::ALL } else { OptFlags::NONE };
        if let Err(e) = check_bytecode(&src, &[], flags) {
            prop_assert!(false, "{e}\n{src}");
        }
    }

    #[test]
    fn random_pretty_roundtrip(src in common::program()) {
        let once = pretty(&src);
        prop_assert_eq!(pretty(&once), once.clone());
        prop_assert_eq!(
            outcome(&once, &[], VmKind::Stack, OptFlags::NONE, false),
            outcome(&src, &[], VmKind::Stack, OptFlags::NONE, false)
        );
    }
}
