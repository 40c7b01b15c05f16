//! Peephole combining of adjacent instructions into superinstructions,
//! iterated to a fixed point.

use super::cfg::{build_func_cfg, FuncCfg};
use crate::bytecode::{Opcode, RtlInstr, RtlProgram, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pattern {
    /// `jmp L` to a `cmp d,a,b; bf d,X` test with X right after the jump
    /// becomes a copy of the test with the branch inverted: `btcmp a,b,d,L+2`.
    /// This turns a top-tested loop into a bottom-tested one. A test that
    /// is already fused (`bfcmp a,b,d,X`) is copied the same way.
    Rotate,
    /// `cmp d,a,b; bt d,L` becomes `btcmp a,b,d,L` (`bf` gives `bfcmp`).
    FuseBranch,
    /// `addi a,a,k; btlt a,b,d,L` becomes `btltinc a,b,k,d,L`.
    FuseIncrement,
}

impl Pattern {
    pub fn name(self) -> &'static str {
        match self {
            Pattern::Rotate => "rotate",
            Pattern::FuseBranch => "fuse-branch",
            Pattern::FuseIncrement => "fuse-increment",
        }
    }
}

/// One applied rewrite, for reports and tests.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rewrite {
    pub pattern: Pattern,
    pub func: usize,
    pub pc: usize,
    pub before: Vec<String>,
    pub after: String,
}

/// The replacement for the instruction at `pc` (and, unless the pattern is
/// `Rotate`, the one after it).
fn match_at(code: &[RtlInstr], cfg: &FuncCfg, pc: usize, pattern: Pattern) -> Option<RtlInstr> {
    use Opcode::*;
    let ins = &code[pc];
    match pattern {
        Pattern::Rotate => {
            if ins.op != Jmp || ins.pc as usize == pc {
                return None;
            }
            let l = ins.pc as usize;
            let test = code.get(l)?;
            // Already fused test: `bfcmp a,b,d,X`.
            if let Some((rel, v)) = test.op.as_branch_false() {
                return (test.pc as usize == pc + 1).then(|| {
                    RtlInstr::fused(
                        Opcode::branch_true(rel, v),
                        test.op1,
                        test.op2,
                        test.res,
                        l as u32 + 1,
                    )
                });
            }
            if let Some((rel, v)) = test.op.as_branch_true() {
                return (test.pc as usize == pc + 1).then(|| {
                    RtlInstr::fused(
                        Opcode::branch_false(rel, v),
                        test.op1,
                        test.op2,
                        test.res,
                        l as u32 + 1,
                    )
                });
            }
            let (rel, v) = test.op.as_cmp()?;
            let br = code.get(l + 1)?;
            let op = match br.op {
                Bf => Opcode::branch_true(rel, v),
                Bt => Opcode::branch_false(rel, v),
                _ => return None,
            };
            if br.op1 != test.op1 || br.pc as usize != pc + 1 {
                return None;
            }
            Some(RtlInstr::fused(
                op,
                test.op2,
                test.op3,
                test.op1,
                l as u32 + 2,
            ))
        }
        Pattern::FuseBranch => {
            let (rel, v) = ins.op.as_cmp()?;
            let next = code.get(pc + 1)?;
            let op = match next.op {
                Bt => Opcode::branch_true(rel, v),
                Bf => Opcode::branch_false(rel, v),
                _ => return None,
            };
            if next.op1 != ins.op1 || cfg.is_leader(pc + 1) {
                return None;
            }
            Some(RtlInstr::fused(op, ins.op2, ins.op3, ins.op1, next.pc))
        }
        Pattern::FuseIncrement => {
            let next = code.get(pc + 1)?;
            let fused = match (ins.op, next.op) {
                (Addi, BtLt) => BtLtInc,
                (IAddi, IBtLt) => IBtLtInc,
                _ => return None,
            };
            if ins.op1 != ins.op2 || next.op1 != ins.op1 || cfg.is_leader(pc + 1) {
                return None;
            }
            debug_assert_eq!(
                next.op.variant(),
                Some(if fused == BtLtInc {
                    Variant::Generic
                } else {
                    Variant::Int
                })
            );
            Some(RtlInstr::btltinc(
                fused, ins.op1, next.op2, ins.imm, next.res, next.pc,
            ))
        }
    }
}

/// Removes instruction `k`, which no branch targets.
pub(crate) fn delete(code: &mut Vec<RtlInstr>, k: usize) {
    code.remove(k);
    for ins in code.iter_mut() {
        if ins.target().is_some_and(|t| t as usize > k) {
            ins.pc -= 1;
        }
    }
}

/// Rotation runs first so loop tests are copied before they are fused in
/// place; after any rewrite the scan starts over.
pub fn combine_code(code: &mut Vec<RtlInstr>, func: usize, trace: &mut Vec<Rewrite>) {
    const ORDER: [Pattern; 3] = [Pattern::Rotate, Pattern::FuseBranch, Pattern::FuseIncrement];
    'restart: loop {
        let cfg = build_func_cfg(code);
        for pattern in ORDER {
            for pc in 0..code.len() {
                let Some(new) = match_at(code, &cfg, pc, pattern) else {
                    continue;
                };
                let width = if pattern == Pattern::Rotate { 1 } else { 2 };
                trace.push(Rewrite {
                    pattern,
                    func,
                    pc,
                    before: code[pc..pc + width].iter().map(|i| i.to_string()).collect(),
                    after: new.to_string(),
                });
                code[pc] = new;
                if width == 2 {
                    delete(code, pc + 1);
                }
                continue 'restart;
            }
        }
        return;
    }
}

/// Applies all patterns in every function until none matches.
pub fn combine(p: &mut RtlProgram) -> Vec<Rewrite> {
    let mut trace = Vec::new();
    for (f, u) in p.units.iter_mut().enumerate() {
        combine_code(&mut u.code, f, &mut trace);
    }
    trace
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegen::gen_rtl;
    use crate::frontend::check_source;

    fn rtl(src: &str) -> RtlProgram {
        gen_rtl(&check_source(src).unwrap().resolved).unwrap()
    }

    fn ops(code: &[RtlInstr]) -> Vec<&'static str> {
        code.iter().map(|i| i.op.name()).collect()
    }

    #[test]
    fn empty_loop_chain() {
        let mut p = rtl("var i, n = 1000; for (i = 0; i < n; i++);");
        let trace = combine(&mut p);
        let patterns: Vec<Pattern> = trace.iter().map(|r| r.pattern).collect();
        assert_eq!(
            patterns,
            vec![Pattern::Rotate, Pattern::FuseBranch, Pattern::FuseIncrement]
        );
        assert_eq!(trace[2].before[0].split(' ').next(), Some("addi"));
        assert_eq!(trace[2].before[1].split(' ').next(), Some("btlt"));
        let code = &p.units[0].code;
        assert_eq!(ops(code), vec!["ldi", "ldi", "bflt", "btltinc", "ret"]);
        // The loop is the btltinc branching to itself.
        assert_eq!(code[3].pc, 3);
        assert_eq!(code[3].imm, 1);
        assert_eq!(code[2].pc, 4);
    }

    #[test]
    fn straight_line_is_fixed_point() {
        let mut p = rtl("var a = 1, b = 2; putln(a + b * 3);");
        let before = p.clone();
        assert!(combine(&mut p).is_empty());
        assert_eq!(p, before);
    }

    #[test]
    fn never_grows() {
        let mut p = rtl(crate::frontend::parser::tests::SIEVE);
        let n = p.static_len();
        combine(&mut p);
        assert!(p.static_len() <= n);
        crate::bytecode::validate_rtl(&p).unwrap();
    }

    #[test]
    fn idempotent() {
        let mut p = rtl(crate::frontend::parser::tests::SIEVE);
        combine(&mut p);
        let once = p.clone();
        assert!(combine(&mut p).is_empty());
        assert_eq!(p, once);
    }
}
