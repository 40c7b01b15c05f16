//! Inferred operand types next to each instruction, and what specialization
//! makes of them.

use dinolite::bytecode::dump_text;
use dinolite::driver::compile_rtl;
use dinolite::optimizer::{analyze, OptFlags};

const SRC: &str = r#"
var i, s = 0, f = 0.5, x;
for (i = 0; i < 10; i++) { s = s + i * 2; f = f * 1.5; }
if (s > 50) x = 1;
putln(s, " ", f, " ", x);
"#;

fn main() {
    let p = compile_rtl(SRC, "", OptFlags::NONE)
        .expect("compiles")
        .program;
    let (_, types) = analyze(&p);
    println!("solver iterations: {}", types.iterations);
    for (f, unit) in p.units.iter().enumerate() {
        println!("{}:", unit.name);
        for (pc, ins) in unit.code.iter().enumerate() {
            let uses: Vec<String> = (0..ins.uses().len())
                .map(|k| types.use_type(f, pc, k).to_string())
                .collect();
            println!("  {pc:>3} {ins:<40} [{}]", uses.join(", "));
        }
    }
    let specialized = compile_rtl(
        SRC,
        "",
        OptFlags {
            specialize: true,
            ..OptFlags::NONE
        },
    )
    .expect("compiles");
    println!("\n{}", dump_text(&specialized.program));
    print!("{}", specialized.report.to_tsv());
}
