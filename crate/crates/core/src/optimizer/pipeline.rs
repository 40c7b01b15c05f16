//! Fixed-order optimizer driver: inline, analyses, specialize, combine,
//! validate.

use std::fmt::Write;

use super::avail::compute_availability;
use super::cfg::{build_cfg, Cfg};
use super::combine::{combine, Rewrite};
use super::defuse::build_def_use;
use super::infer::{infer_types, TypeInfo};
use super::inline::{inline_calls, DEFAULT_INLINE_LIMIT};
use super::specialize::specialize;
use crate::bytecode::{validate_rtl, RtlProgram, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OptFlags {
    pub inline: bool,
    pub specialize: bool,
    pub combine: bool,
    pub inline_limit: usize,
}

impl OptFlags {
    pub const NONE: OptFlags = OptFlags {
        inline: false,
        specialize: false,
        combine: false,
        inline_limit: DEFAULT_INLINE_LIMIT,
    };
    pub const ALL: OptFlags = OptFlags {
        inline: true,
        specialize: true,
        combine: true,
        inline_limit: DEFAULT_INLINE_LIMIT,
    };

    /// All eight on/off combinations of the three passes.
    pub fn subsets() -> impl Iterator<Item = OptFlags> {
        (0..8u8).map(|m| OptFlags {
            inline: m & 1 != 0,
            specialize: m & 2 != 0,
            combine: m & 4 != 0,
            inline_limit: DEFAULT_INLINE_LIMIT,
        })
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.inline {
            parts.push("inline");
        }
        if self.specialize {
            parts.push("specialize");
        }
        if self.combine {
            parts.push("combine");
        }
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }
}

impl Default for OptFlags {
    fn default() -> Self {
        OptFlags::ALL
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FuncReport {
    pub name: String,
    pub before: usize,
    pub after: usize,
    pub specialized: usize,
    pub combined: usize,
    pub inlined: usize,
}

#[derive(Debug, Clone, Default)]
pub struct OptReport {
    pub funcs: Vec<FuncReport>,
    pub warnings: Vec<String>,
    pub rewrites: Vec<Rewrite>,
    /// Worklist iterations of the type solver, when it ran.
    pub infer_iterations: usize,
}

pub const OPT_REPORT_HEADER: &str = "function\tbefore\tafter\tspecialized\tcombined\tinlined";

impl OptReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(OPT_REPORT_HEADER);
        out.push('\n');
        for f in &self.funcs {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                f.name, f.before, f.after, f.specialized, f.combined, f.inlined
            );
        }
        out
    }
}

/// Control flow, def-use and inferred types for `p` as it stands.
pub fn analyze(p: &RtlProgram) -> (Cfg, TypeInfo) {
    let cfg = build_cfg(p);
    let avail = compute_availability(p, &cfg);
    let graph = build_def_use(p, &cfg, &avail);
    let types = infer_types(p, &cfg, &graph);
    (cfg, types)
}

/// Runs the enabled passes in their fixed order. A program that fails
/// validation afterwards is rejected.
pub fn run_pipeline(
    mut p: RtlProgram,
    flags: OptFlags,
) -> Result<(RtlProgram, OptReport), Vec<Violation>> {
    let mut report = OptReport {
        funcs: p
            .units
            .iter()
            .map(|u| FuncReport {
                name: u.name.clone(),
                before: u.code.len(),
                ..FuncReport::default()
            })
            .collect(),
        ..OptReport::default()
    };
    if flags.inline {
        let outcome = inline_calls(&mut p, flags.inline_limit);
        for (r, n) in report.funcs.iter_mut().zip(outcome.sites) {
            r.inlined = n;
        }
        report.warnings = outcome.warnings;
    }
    if flags.specialize {
        let (_, types) = analyze(&p);
        report.infer_iterations = types.iterations;
        for (r, n) in report.funcs.iter_mut().zip(specialize(&mut p, &types)) {
            r.specialized = n;
        }
    }
    if flags.combine {
        report.rewrites = combine(&mut p);
        for rw in &report.rewrites {
            report.funcs[rw.func].combined += 1;
        }
    }
    for (r, u) in report.funcs.iter_mut().zip(&p.units) {
        r.after = u.code.len();
    }
    validate_rtl(&p)?;
    Ok((p, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bytecode::Opcode;
    use crate::codegen::gen_rtl;
    use crate::frontend::check_source;

    const EMPTY_LOOP: &str = "var i, n = 1000;\nfor (i = 0; i < n; i++);\n";

    fn rtl(src: &str) -> RtlProgram {
        gen_rtl(&check_source(src).unwrap().resolved).unwrap()
    }

    fn has(p: &RtlProgram, op: Opcode) -> bool {
        p.units.iter().any(|u| u.code.iter().any(|i| i.op == op))
    }

    #[test]
    fn no_flags_is_identity() {
        let p = rtl("fun f(x) { return x + 1; }\nvar i;\nfor (i = 0; i < 3; i++) putln(f(i));");
        let (q, r) = run_pipeline(p.clone(), OptFlags::NONE).unwrap();
        assert_eq!(p, q);
        assert!(r
            .funcs
            .iter()
            .all(|f| f.before == f.after && f.combined == 0));
    }

    #[test]
    fn combine_only_makes_generic_btltinc() {
        let (q, _) = run_pipeline(
            rtl(EMPTY_LOOP),
            OptFlags {
                combine: true,
                ..OptFlags::NONE
            },
        )
        .unwrap();
        assert!(has(&q, Opcode::BtLtInc));
        assert!(q
            .units
            .iter()
            .all(|u| u.code.iter().all(|i| !i.op.is_specialized())));
    }

    #[test]
    fn combine_and_specialize_make_ibtltinc() {
        let flags = OptFlags {
            combine: true,
            specialize: true,
            ..OptFlags::NONE
        };
        let (q, r) = run_pipeline(rtl(EMPTY_LOOP), flags).unwrap();
        assert!(has(&q, Opcode::IBtLtInc));
        assert!(r.funcs[0].specialized > 0);
    }

    #[test]
    fn report_tsv_shape() {
        let src = "!inline\nfun sq(x) { return x * x; }\nputln(sq(3));";
        let (_, r) = run_pipeline(rtl(src), OptFlags::ALL).unwrap();
        let tsv = r.to_tsv();
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines[0], OPT_REPORT_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines.iter().all(|l| l.split('\t').count() == 6));
        assert!(lines[1].starts_with("main\t") && lines[1].ends_with("\t1"));
    }

    #[test]
    fn subsets_are_distinct() {
        let labels: std::collections::BTreeSet<String> =
            OptFlags::subsets().map(|f| f.label()).collect();
        assert_eq!(labels.len(), 8);
    }
}
