//! The configuration ladder on the nested-loops benchmark, as TSV.
//! Usage: cargo run --release --example bench_ladder [N]

use dinolite::driver::{bench, bench_tsv};

const SRC: &str = include_str!("../corpus/loop.dl");

fn main() {
    let n = std::env::args().nth(1).unwrap_or_else(|| "12".into());
    print!("{}", bench_tsv(&bench(SRC, &[n], 3)));
}
