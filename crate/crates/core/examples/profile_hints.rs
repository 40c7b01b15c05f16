//! The profile of a program with a hot helper, before and after `!inline`
//! removes its calls.

use dinolite::driver::{run_source, VmKind};
use dinolite::optimizer::OptFlags;
use dinolite::vm::RunOptions;

const SRC: &str = include_str!("../corpus/meteor.dl");

fn main() {
    let argv = vec!["2000".to_string()];
    let opts = RunOptions {
        profile: true,
        count: true,
        ..RunOptions::default()
    };
    for flags in [
        OptFlags {
            inline: false,
            ..OptFlags::ALL
        },
        OptFlags::ALL,
    ] {
        let (out, r) = run_source(SRC, &argv, VmKind::Rtl, flags, &opts).expect("compiles");
        println!(
            "[{}] prints {} in {} dispatches",
            flags.label(),
            out.trim(),
            r.counters.expect("counting").dispatched
        );
        print!("{}", r.profile.expect("profiling").report());
    }
}
