//! Dump bytecode as text, edit it, read it back and run it.

use dinolite::bytecode::{dump_text, parse_text};
use dinolite::driver::{compile_rtl, Program};
use dinolite::optimizer::OptFlags;
use dinolite::vm::RunOptions;

fn main() {
    let p = compile_rtl("var k = 6;\nputln(k * 7);", "", OptFlags::ALL)
        .expect("compiles")
        .program;
    let text = dump_text(&p);
    print!("{text}");
    assert_eq!(dump_text(&parse_text(&text).expect("parses")), text);

    let edited = text.replace("imm=6", "imm=9");
    let q = parse_text(&edited).expect("parses");
    let mut out = Vec::new();
    Program::Rtl(q).run(&[], &RunOptions::default(), &mut out);
    print!("edited program prints {}", String::from_utf8_lossy(&out));
}
