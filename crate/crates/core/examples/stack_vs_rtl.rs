//! Instructions dispatched by the stack and register engines on the same
//! nested loop.

use dinolite::driver::{run_source, VmKind};
use dinolite::optimizer::OptFlags;
use dinolite::vm::RunOptions;

const SRC: &str = include_str!("../corpus/loop.dl");

fn main() {
    let argv = vec!["8".to_string()];
    let opts = RunOptions {
        count: true,
        ..RunOptions::default()
    };
    let mut counts = Vec::new();
    for vm in [VmKind::Stack, VmKind::Rtl] {
        let (out, r) = run_source(SRC, &argv, vm, OptFlags::NONE, &opts).expect("compiles");
        let n = r.counters.expect("counting").dispatched;
        println!(
            "{vm:?}: prints {} after {n} dispatches in {:?}",
            out.trim(),
            r.elapsed
        );
        counts.push(n);
    }
    println!(
        "stack/rtl dispatch ratio: {:.2}",
        counts[0] as f64 / counts[1] as f64
    );
}
