//! Compile a small program and run it on both engines.

use dinolite::driver::{run_source, VmKind};
use dinolite::optimizer::OptFlags;
use dinolite::vm::RunOptions;

const SRC: &str = r#"
fun even;
fun odd(n) { return n == 0 ? 0 : even(n - 1); }
fun even(n) { return n == 0 ? 1 : odd(n - 1); }
var words = ["alpha", "beta", "gamma"], i;
for (i = 0; i < len(words); i++)
  putln(i, " ", words[i], " ", even(len(words[i])) ? "even" : "odd");
"#;

fn main() {
    for vm in [VmKind::Stack, VmKind::Rtl] {
        let (out, report) =
            run_source(SRC, &[], vm, OptFlags::ALL, &RunOptions::default()).expect("compiles");
        println!("--- {vm:?} (exit {})", report.exit_code);
        print!("{out}");
    }
}
