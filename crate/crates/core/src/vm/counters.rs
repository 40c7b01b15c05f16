use std::fmt::Write;

use crate::bytecode::Opcode;

/// Dynamic execution counts for one run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExecCounters {
    /// Total instructions dispatched; always the sum of `per_opcode`.
    pub dispatched: u64,
    /// Indexed by opcode code.
    pub per_opcode: Vec<u64>,
    /// Executed typed instructions still in their generic form.
    pub generic_typed: u64,
    /// Executed typed instructions in an int or float variant.
    pub specialized_typed: u64,
    /// Frame entries per function id (memoization hits create no frame).
    pub entries: Vec<u64>,
}

impl ExecCounters {
    pub(crate) fn from_raw(per_op: &[u64], entries: Vec<u64>) -> Self {
        let per_opcode: Vec<u64> = Opcode::ALL
            .iter()
            .map(|op| per_op[op.code() as usize])
            .collect();
        let mut c = ExecCounters {
            dispatched: per_opcode.iter().sum(),
            per_opcode,
            entries,
            ..Default::default()
        };
        for (&op, &n) in Opcode::ALL.iter().zip(&c.per_opcode) {
            if op.is_specialized() {
                c.specialized_typed += n;
            } else if op.is_typed() {
                c.generic_typed += n;
            }
        }
        c
    }

    pub fn count(&self, op: Opcode) -> u64 {
        self.per_opcode
            .get(op.code() as usize)
            .copied()
            .unwrap_or(0)
    }

    /// Share of executed typed instructions that ran specialized; 1.0 when
    /// no typed instruction ran.
    pub fn specialized_fraction(&self) -> f64 {
        let total = self.generic_typed + self.specialized_typed;
        if total == 0 {
            1.0
        } else {
            self.specialized_typed as f64 / total as f64
        }
    }

    /// `counter<TAB>value` lines: the totals first, then every executed opcode.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("counter\tvalue\n");
        let _ = writeln!(s, "dispatched\t{}", self.dispatched);
        let _ = writeln!(s, "typed_generic\t{}", self.generic_typed);
        let _ = writeln!(s, "typed_specialized\t{}", self.specialized_typed);
        for (&op, &n) in Opcode::ALL.iter().zip(&self.per_opcode) {
            if n > 0 {
                let _ = writeln!(s, "op.{}\t{n}", op.name());
            }
        }
        s
    }
}
