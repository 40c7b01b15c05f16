//! A `!pure` function run with and without the result cache.

use dinolite::driver::{run_source, VmKind};
use dinolite::optimizer::OptFlags;
use dinolite::vm::RunOptions;

const SRC: &str = include_str!("../corpus/fib.dl");

fn main() {
    let argv = vec!["27".to_string()];
    for memoize in [false, true] {
        let opts = RunOptions {
            count: true,
            memoize,
            ..RunOptions::default()
        };
        let (out, r) = run_source(SRC, &argv, VmKind::Rtl, OptFlags::ALL, &opts).expect("compiles");
        let entries = r.counters.expect("counting").entries[1];
        println!(
            "memoize={memoize}: fib = {} with {entries} frames entered, {} hits, {:?}",
            out.trim(),
            r.memo.hits,
            r.elapsed
        );
    }
}
