//! Shared helpers for the integration tests: corpus access, host-side
//! oracles for every corpus program, and a generator of random terminating
//! programs.

#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use dinolite::driver::{compile, VmKind};
use dinolite::optimizer::OptFlags;
use dinolite::vm::RunOptions;
use proptest::prelude::*;

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

pub fn corpus(name: &str) -> String {
    let path = corpus_dir().join(format!("{name}.dl"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Every corpus program with a small argument list that keeps each run
/// short enough to repeat across all configurations.
pub const CORPUS: &[(&str, &[&str])] = &[
    ("loop", &["6"]),
    ("sieve", &[]),
    ("fib", &["18"]),
    ("fact", &["500"]),
    ("hash", &["600"]),
    ("sort", &["500"]),
    ("method", &["300"]),
    ("empty_loop", &[]),
    ("meteor", &["20"]),
    ("stat", &["300"]),
];

pub fn args(a: &[&str]) -> Vec<String> {
    a.iter().map(|s| s.to_string()).collect()
}

/// Stdout and exit code of one run.
pub fn outcome(
    src: &str,
    argv: &[String],
    vm: VmKind,
    flags: OptFlags,
    memoize: bool,
) -> (String, i32) {
    let program = compile(src, "", vm, flags).unwrap_or_else(|e| panic!("{e}\n{src}"));
    let mut out = Vec::new();
    let r = program.run(
        argv,
        &RunOptions {
            memoize,
            ..RunOptions::default()
        },
        &mut out,
    );
    (String::from_utf8(out).unwrap(), r.exit_code)
}

fn arg_or(argv: &[String], default: i64) -> i64 {
    argv.first().map_or(default, |a| a.parse().unwrap())
}

/// Expected stdout of a corpus program, computed on the host.
pub fn oracle(name: &str, argv: &[String]) -> String {
    match name {
        "loop" => {
            let n = arg_or(argv, 1).max(1);
            format!("{}\n", n.pow(6))
        }
        "sieve" => format!("{}\n", sieve_count(8191)),
        "fib" => format!("{}\n", fib(arg_or(argv, 25) as u32)),
        "fact" => {
            let n = arg_or(argv, 10000);
            let s = (0..n).fold(0i64, |s, i| s.wrapping_add(fact(i % 21)));
            format!("{}\n{}\n", fact(10), s)
        }
        "hash" => hash_oracle(arg_or(argv, 20000)),
        "sort" => sort_oracle(arg_or(argv, 20000) as usize),
        "method" => format!("{}\n", arg_or(argv, 100000)),
        "empty_loop" => "1000\n".into(),
        "meteor" => {
            let per: i64 = (0..10).flat_map(|y| (0..5).map(move |x| y * 5 + x)).sum();
            format!("{}\n", arg_or(argv, 200) * per)
        }
        "stat" => stat_oracle(arg_or(argv, 5000)),
        other => panic!("no oracle for {other}"),
    }
}

/// The odd-only sieve: index `i` stands for `2i + 3`.
pub fn sieve_count(size: usize) -> usize {
    let mut flags = vec![true; size];
    let mut count = 0;
    for i in 0..size {
        if flags[i] {
            let prime = 2 * i + 3;
            let mut k = i + prime;
            while k < size {
                flags[k] = false;
                k += prime;
            }
            count += 1;
        }
    }
    count
}

pub fn fib(n: u32) -> u64 {
    let (mut a, mut b) = (0u64, 1u64);
    for _ in 0..n {
        (a, b) = (b, a + b);
    }
    a
}

/// Calls made by the naive doubly recursive definition.
pub fn fib_calls(n: u32) -> u64 {
    // calls(n) = 1 + calls(n-1) + calls(n-2), calls(0) = calls(1) = 1
    let (mut a, mut b) = (1u64, 1u64);
    for _ in 1..n {
        (a, b) = (b, 1 + a + b);
    }
    if n == 0 {
        1
    } else {
        b
    }
}

pub fn fact(n: i64) -> i64 {
    (1..=n.max(1)).fold(1i64, |p, k| p.wrapping_mul(k))
}

fn hash_oracle(n: i64) -> String {
    #[derive(PartialEq, Eq, Hash)]
    enum K {
        I(i64),
        S(String),
    }
    let mut t: HashMap<K, i64> = HashMap::new();
    for i in 0..n {
        t.insert(K::I(i), i * 2);
        t.insert(K::S(format!("k{i}")), i);
    }
    for i in (0..n).step_by(3) {
        t.remove(&K::I(i));
    }
    let mut sum = 0i64;
    for i in 0..n {
        if i % 3 != 0 {
            sum += t[&K::I(i)];
        }
    }
    for i in (0..n).step_by(2) {
        t.insert(K::S(format!("k{i}")), -1);
    }
    for i in 0..n {
        sum += t[&K::S(format!("k{i}"))];
    }
    format!("{} {}\n", t.len(), sum)
}

fn sort_oracle(n: usize) -> String {
    let mut seed = 42i64;
    let mut a: Vec<i64> = (0..n)
        .map(|_| {
            seed = seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (seed / 8589934592) % 1000000
        })
        .collect();
    a.sort();
    let check = (0..n)
        .step_by(97)
        .fold(0i64, |c, i| (c * 31 + a[i]) % 1000000007);
    format!("1 {} {} {}\n", a[0], a[n - 1], check)
}

fn stat_oracle(n: i64) -> String {
    let xs: Vec<f64> = (0..n).map(|i| (i % 97) as f64 * 0.5 + 1.0).collect();
    let mut mean = 0.0;
    for x in &xs {
        mean += x;
    }
    mean /= n as f64;
    let (mut m2, mut m3) = (0.0, 0.0);
    for x in &xs {
        let d = x - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    format!(
        "{:?}\n{:?}\n{:?}\n{:?} int {}\n",
        mean,
        m2 / n as f64,
        m3 / n as f64,
        (n / 2) as f64 + 0.25,
        7 / 2
    )
}

// Random programs. Every loop has a constant bound and a counter of its
// own nesting depth that no inner statement assigns, so each program
// terminates. Runtime errors such as a division by zero may occur; they
// must then occur in every configuration.

const VARS: [&str; 4] = ["a", "b", "c", "d"];

fn leaf() -> impl Strategy<Value = String> {
    prop_oneof![
        (-20i64..40).prop_map(|i| i.to_string()),
        (-8i32..16).prop_map(|i| format!("{:.1}", i as f64 / 2.0)),
        prop::sample::select(VARS.to_vec()).prop_map(str::to_string),
        Just("i1".to_string()),
    ]
}

fn divisor() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => (1i64..9).prop_map(|i| i.to_string()),
        1 => Just("2.5".to_string()),
        1 => prop::sample::select(VARS.to_vec()).prop_map(str::to_string),
    ]
}

fn expr() -> impl Strategy<Value = String> {
    leaf().prop_recursive(3, 24, 2, |inner| {
        prop_oneof![
            (
                inner.clone(),
                prop::sample::select(vec!["+", "-", "*"]),
                inner.clone()
            )
                .prop_map(|(l, op, r)| format!("({l} {op} {r})")),
            // Mostly nonzero divisors so few programs stop at the first division.
            (
                inner.clone(),
                prop::sample::select(vec!["/", "%"]),
                divisor()
            )
                .prop_map(|(l, op, r)| format!("({l} {op} {r})")),
            (
                inner.clone(),
                prop::sample::select(vec!["<", "<=", ">", ">=", "==", "!="]),
                inner.clone()
            )
                .prop_map(|(l, op, r)| format!("({l} {op} {r})")),
            (inner.clone(), inner.clone(), inner.clone())
                .prop_map(|(c, t, e)| format!("({c} ? {t} : {e})")),
            inner.clone().prop_map(|e| format!("(- {e})")),
            (inner.clone(), inner.clone()).prop_map(|(x, y)| format!("sq({x}, {y})")),
            (inner.clone(), inner).prop_map(|(x, y)| format!("mix({x}, {y})")),
        ]
    })
}

fn stmt(depth: u32) -> BoxedStrategy<String> {
    let var = prop::sample::select(VARS.to_vec());
    let simple = prop_oneof![
        (var.clone(), expr()).prop_map(|(v, e)| format!("{v} = {e};")),
        (var.clone(), -3i64..5).prop_map(|(v, k)| format!("{v} += {k};")),
        var.clone().prop_map(|v| format!("{v}++;")),
        expr().prop_map(|e| format!("putln({e});")),
        (0usize..8, expr()).prop_map(|(k, e)| format!("arr[{k}] = {e};")),
        (var, 0usize..8).prop_map(|(v, k)| format!("{v} = arr[{k}];")),
    ];
    if depth == 0 {
        return simple.boxed();
    }
    prop_oneof![
        3 => simple,
        1 => (expr(), stmt(depth - 1), stmt(depth - 1))
            .prop_map(|(c, t, e)| format!("if ({c}) {{ {t} }} else {{ {e} }}")),
        1 => (1i64..6, prop::collection::vec(stmt(depth - 1), 1..3))
            .prop_map(move |(n, body)| format!("for (i{depth} = 0; i{depth} < {n}; i{depth}++) {{ {} }}", body.join(" "))),
    ]
    .boxed()
}

/// Source text of a random program with two helper functions, one of
/// them optionally hinted.
pub fn program() -> impl Strategy<Value = String> {
    (
        prop::collection::vec(
            prop_oneof![
                (-20i64..40).prop_map(|i| i.to_string()),
                Just("1.5".to_string())
            ],
            4,
        ),
        prop::sample::select(vec!["", "!inline\n", "!pure\n"]),
        prop::sample::select(vec!["", "!inline\n"]),
        prop::collection::vec(stmt(2), 1..8),
        prop::collection::vec(stmt(1), 0..4),
    )
        .prop_map(|(init, h1, h2, top, inner)| {
            // Helpers read only their parameters, so `!pure` is honest.
            format!(
                "var a = {}, b = {}, c = {}, d = {}, i1 = 0, i2 = 0, arr = [8 : 0];\n\
                 {h1}fun sq(x, y) {{ var t = x * x; if (t > y) return t - y; return y; }}\n\
                 {h2}fun mix(x, y) {{ return x + y * 2; }}\n\
                 fun body() {{ var j; for (j = 0; j < 2; j++) {{ {} }} }}\n\
                 {}\nbody();\nputln(a, \" \", b, \" \", c, \" \", d, \" \", arr);\n",
                init[0],
                init[1],
                init[2],
                init[3],
                inner.join(" "),
                top.join("\n"),
            )
        })
}
