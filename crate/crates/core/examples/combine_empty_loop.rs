//! The empty loop before and after combining, with the rewrites applied.

use dinolite::bytecode::dump_text;
use dinolite::driver::compile_rtl;
use dinolite::optimizer::OptFlags;

const SRC: &str = "var i, n = 1000;\nfor (i = 0; i < n; i++);\n";

fn main() {
    let plain = compile_rtl(SRC, "", OptFlags::NONE).expect("compiles");
    println!("{}", dump_text(&plain.program));
    let combined = compile_rtl(
        SRC,
        "",
        OptFlags {
            combine: true,
            ..OptFlags::NONE
        },
    )
    .expect("compiles");
    for rw in &combined.report.rewrites {
        println!(
            "{:?} at {}: {} => {}",
            rw.pattern,
            rw.pc,
            rw.before.join("; "),
            rw.after
        );
    }
    println!("\n{}", dump_text(&combined.program));
    let all = compile_rtl(SRC, "", OptFlags::ALL).expect("compiles");
    println!("{}", dump_text(&all.program));
}
