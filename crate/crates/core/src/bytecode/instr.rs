use std::fmt;

use super::opcode::{Fields, Opcode};
use crate::frontend::ast::{FuncId, Hint};

/// Signed slot reference: `>= 0` addresses the current frame, `< 0` the
/// global slot `-s - 1`.
pub type Slot = i32;

pub fn global_slot(index: u32) -> Slot {
    -(index as i32) - 1
}

pub fn global_index(slot: Slot) -> Option<u32> {
    (slot < 0).then(|| (-(slot + 1)) as u32)
}

macro_rules! builtins {
    ($( $variant:ident = $name:literal, $arity:expr; )*) => {
        /// Functions implemented by the VM and reached through the `builtin` opcode.
        #[repr(u8)]
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum Builtin { $($variant,)* }

        impl Builtin {
            pub const ALL: &'static [Builtin] = &[$(Builtin::$variant,)*];

            pub fn name(self) -> &'static str {
                match self { $(Builtin::$variant => $name,)* }
            }

            /// Required argument count; `None` means variadic.
            pub fn arity(self) -> Option<u32> {
                match self { $(Builtin::$variant => $arity,)* }
            }
        }
    };
}

builtins! {
    Put = "put", None;
    Putln = "putln", None;
    Int = "int", Some(1);
    Float = "float", Some(1);
    Str = "str", Some(1);
    Len = "len", Some(1);
    Type = "type", Some(1);
    Del = "del", Some(2);
    Push = "push", Some(2);
}

impl Builtin {
    pub fn from_name(name: &str) -> Option<Builtin> {
        Builtin::ALL.iter().copied().find(|b| b.name() == name)
    }

    pub fn from_id(id: i32) -> Option<Builtin> {
        usize::try_from(id)
            .ok()
            .and_then(|i| Builtin::ALL.get(i).copied())
    }

    pub fn id(self) -> i32 {
        self as i32
    }
}

/// One register-transfer instruction. Which fields are meaningful is given
/// by `op.fields()`; unused fields are zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RtlInstr {
    pub op: Opcode,
    pub op1: i32,
    pub op2: i32,
    pub op3: i32,
    /// Integer immediate, or f64 bits for `ldf`.
    pub imm: i64,
    pub cidx: u32,
    pub res: Slot,
    pub pc: u32,
    pub n: u32,
}

impl RtlInstr {
    pub fn new(op: Opcode) -> Self {
        RtlInstr {
            op,
            op1: 0,
            op2: 0,
            op3: 0,
            imm: 0,
            cidx: 0,
            res: 0,
            pc: 0,
            n: 0,
        }
    }

    pub fn ld(d: Slot, s: Slot) -> Self {
        RtlInstr {
            op1: d,
            op2: s,
            ..Self::new(Opcode::Ld)
        }
    }

    pub fn ldi(d: Slot, v: i64) -> Self {
        RtlInstr {
            op1: d,
            imm: v,
            ..Self::new(Opcode::Ldi)
        }
    }

    pub fn ldf(d: Slot, v: f64) -> Self {
        RtlInstr {
            op1: d,
            imm: v.to_bits() as i64,
            ..Self::new(Opcode::Ldf)
        }
    }

    pub fn lds(d: Slot, cidx: u32) -> Self {
        RtlInstr {
            op1: d,
            cidx,
            ..Self::new(Opcode::Lds)
        }
    }

    pub fn ldnil(d: Slot) -> Self {
        RtlInstr {
            op1: d,
            ..Self::new(Opcode::Ldnil)
        }
    }

    pub fn ldfun(d: Slot, f: FuncId) -> Self {
        RtlInstr {
            op1: d,
            imm: f.0 as i64,
            ..Self::new(Opcode::Ldfun)
        }
    }

    /// Three-slot form: arithmetic, compare, `aget`, `aset`, `mkfill`.
    pub fn dab(op: Opcode, d: Slot, a: Slot, b: Slot) -> Self {
        RtlInstr {
            op1: d,
            op2: a,
            op3: b,
            ..Self::new(op)
        }
    }

    pub fn ds(op: Opcode, d: Slot, a: Slot) -> Self {
        RtlInstr {
            op1: d,
            op2: a,
            ..Self::new(op)
        }
    }

    pub fn addi(d: Slot, a: Slot, imm: i64) -> Self {
        RtlInstr {
            op1: d,
            op2: a,
            imm,
            ..Self::new(Opcode::Addi)
        }
    }

    pub fn jmp(pc: u32) -> Self {
        RtlInstr {
            pc,
            ..Self::new(Opcode::Jmp)
        }
    }

    /// `bt`/`bf` on a truth value.
    pub fn branch(op: Opcode, a: Slot, pc: u32) -> Self {
        RtlInstr {
            op1: a,
            pc,
            ..Self::new(op)
        }
    }

    pub fn fused(op: Opcode, a: Slot, b: Slot, res: Slot, pc: u32) -> Self {
        RtlInstr {
            op1: a,
            op2: b,
            res,
            pc,
            ..Self::new(op)
        }
    }

    pub fn btltinc(op: Opcode, a: Slot, b: Slot, imm: i64, res: Slot, pc: u32) -> Self {
        RtlInstr {
            op1: a,
            op2: b,
            imm,
            res,
            pc,
            ..Self::new(op)
        }
    }

    pub fn dn(op: Opcode, d: Slot, n: u32) -> Self {
        RtlInstr {
            op1: d,
            n,
            ..Self::new(op)
        }
    }

    pub fn call(d: Slot, f: Slot, argbase: Slot, arity: u32) -> Self {
        RtlInstr {
            op1: d,
            op2: f,
            op3: argbase,
            n: arity,
            ..Self::new(Opcode::Call)
        }
    }

    pub fn builtin(d: Slot, b: Builtin, argbase: Slot, arity: u32) -> Self {
        RtlInstr {
            op1: d,
            op2: b.id(),
            op3: argbase,
            n: arity,
            ..Self::new(Opcode::Builtin)
        }
    }

    pub fn ret(s: Slot) -> Self {
        RtlInstr {
            op1: s,
            ..Self::new(Opcode::Ret)
        }
    }

    pub fn imm_f64(&self) -> f64 {
        f64::from_bits(self.imm as u64)
    }

    /// Calls `f(position, slot)` for every slot the instruction reads, in a
    /// fixed order. Positions index operand uses for type facts.
    pub fn for_each_use(&self, mut f: impl FnMut(usize, Slot)) {
        use Opcode::*;
        let window = |f: &mut dyn FnMut(usize, Slot), first: usize, base: Slot, count: u32| {
            for k in 0..count {
                f(first + k as usize, base + k as Slot);
            }
        };
        match self.op {
            Ld | Neg | Not | ALen | Addi | IAddi => f(0, self.op2),
            Ldi | Ldf | Lds | Ldnil | Ldfun | Jmp => {}
            Bt | Bf | Ret => f(0, self.op1),
            MkArr => window(&mut f, 0, self.op1 + 1, self.n),
            MkTab => window(&mut f, 0, self.op1 + 1, 2 * self.n),
            ASet => {
                f(0, self.op1);
                f(1, self.op2);
                f(2, self.op3);
            }
            Call => {
                f(0, self.op2);
                window(&mut f, 1, self.op3, self.n);
            }
            Builtin => window(&mut f, 0, self.op3, self.n),
            op if op.is_fused_branch() => {
                f(0, self.op1);
                f(1, self.op2);
            }
            // Remaining three-slot forms read op2 and op3.
            op if op.fields() == Fields::OP1.with(Fields::OP2).with(Fields::OP3) => {
                f(0, self.op2);
                f(1, self.op3);
            }
            op => unreachable!("stack opcode {op} in RTL instruction"),
        }
    }

    pub fn uses(&self) -> Vec<Slot> {
        let mut v = Vec::new();
        self.for_each_use(|_, s| v.push(s));
        v
    }

    /// Slots written by the instruction (at most two: `btltinc` writes both
    /// its counter and its result slot).
    pub fn defs(&self) -> [Option<Slot>; 2] {
        use Opcode::*;
        match self.op {
            Jmp | Bt | Bf | Ret | ASet => [None, None],
            BtLtInc | IBtLtInc => [Some(self.op1), Some(self.res)],
            op if op.is_fused_branch() => [Some(self.res), None],
            _ => [Some(self.op1), None],
        }
    }

    pub fn target(&self) -> Option<u32> {
        self.op.fields().has(Fields::PC).then_some(self.pc)
    }
}

impl fmt::Display for RtlInstr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.op.name())?;
        super::text::write_fields(f, self)
    }
}

/// One stack-machine instruction: an opcode and at most one operand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StackInstr {
    pub op: Opcode,
    pub operand: i32,
}

impl StackInstr {
    pub fn new(op: Opcode, operand: i32) -> Self {
        StackInstr { op, operand }
    }

    pub fn bare(op: Opcode) -> Self {
        StackInstr { op, operand: 0 }
    }

    /// Builtin operands pack the builtin id and the argument count.
    pub fn builtin(b: Builtin, arity: u32) -> Self {
        StackInstr {
            op: Opcode::SBuiltin,
            operand: b.id() | ((arity as i32) << 8),
        }
    }

    pub fn unpack_builtin(operand: i32) -> (i32, u32) {
        (operand & 0xff, (operand >> 8) as u32)
    }

    /// (pops, pushes). Calls pop the callee plus its arguments.
    pub fn stack_effect(&self) -> (u32, u32) {
        use Opcode::*;
        match self.op {
            PushConst | PushNil | PushSlot | PushFun => (0, 1),
            StoreSlot | Pop | BrFalse | BrTrue | SRet => (1, 0),
            SAdd | SSub | SMul | SDiv | SMod | SLt | SLe | SGt | SGe | SEq | SNe | SAGet
            | SMkFill => (2, 1),
            SNeg | SNot => (1, 1),
            Jump => (0, 0),
            SMkArr => (self.operand as u32, 1),
            SMkTab => (2 * self.operand as u32, 1),
            SASet => (3, 0),
            SCall => (self.operand as u32 + 1, 1),
            SBuiltin => (Self::unpack_builtin(self.operand).1, 1),
            op => unreachable!("RTL opcode {op} in stack instruction"),
        }
    }
}

impl fmt::Display for StackInstr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.op.fields().has(Fields::OPERAND) {
            write!(f, "{} {}", self.op, self.operand)
        } else {
            write!(f, "{}", self.op)
        }
    }
}

/// Constant-pool entry.
#[derive(Debug, Clone)]
pub enum Const {
    Int(i64),
    Float(f64),
    Str(String),
}

impl PartialEq for Const {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Const::Int(a), Const::Int(b)) => a == b,
            (Const::Float(a), Const::Float(b)) => a.to_bits() == b.to_bits(),
            (Const::Str(a), Const::Str(b)) => a == b,
            _ => false,
        }
    }
}

/// Bytecode for one function.
#[derive(Debug, Clone, PartialEq)]
pub struct BcUnit<I> {
    pub id: FuncId,
    pub name: String,
    pub arity: u32,
    /// Parameters, named locals and temporaries.
    pub nslots: u32,
    pub hints: Vec<Hint>,
    pub code: Vec<I>,
    /// Named locals (parameters first) for debugging and profiling.
    pub vdecls: Vec<(String, Slot)>,
    pub consts: Vec<Const>,
}

impl<I> BcUnit<I> {
    pub fn has_hint(&self, h: Hint) -> bool {
        self.hints.contains(&h)
    }
}

/// A whole program: unit 0 is the entry function `main`.
#[derive(Debug, Clone, PartialEq)]
pub struct BcProgram<I> {
    pub units: Vec<BcUnit<I>>,
    /// Global names; index 0 is `argv`.
    pub globals: Vec<String>,
}

pub type RtlProgram = BcProgram<RtlInstr>;
pub type StackProgram = BcProgram<StackInstr>;
pub type RtlUnit = BcUnit<RtlInstr>;
pub type StackUnit = BcUnit<StackInstr>;

impl<I> BcProgram<I> {
    pub fn unit(&self, id: FuncId) -> &BcUnit<I> {
        &self.units[id.index()]
    }

    pub fn entry(&self) -> &BcUnit<I> {
        &self.units[0]
    }

    pub fn static_len(&self) -> usize {
        self.units.iter().map(|u| u.code.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn global_encoding() {
        assert_eq!(global_slot(0), -1);
        assert_eq!(global_index(-1), Some(0));
        assert_eq!(global_index(global_slot(41)), Some(41));
        assert_eq!(global_index(3), None);
    }

    #[test]
    fn uses_and_defs() {
        let i = RtlInstr::btltinc(Opcode::BtLtInc, 3, 4, 1, 5, 0);
        assert_eq!(i.uses(), vec![3, 4]);
        assert_eq!(i.defs(), [Some(3), Some(5)]);
        let c = RtlInstr::call(0, -2, 4, 3);
        assert_eq!(c.uses(), vec![-2, 4, 5, 6]);
        let m = RtlInstr::dn(Opcode::MkTab, 2, 2);
        assert_eq!(m.uses(), vec![3, 4, 5, 6]);
        assert_eq!(RtlInstr::dab(Opcode::ASet, 1, 2, 3).defs(), [None, None]);
        assert_eq!(RtlInstr::dab(Opcode::ASet, 1, 2, 3).uses(), vec![1, 2, 3]);
    }

    #[test]
    fn stack_effects() {
        assert_eq!(StackInstr::new(Opcode::SCall, 2).stack_effect(), (3, 1));
        assert_eq!(
            StackInstr::builtin(Builtin::Putln, 3).stack_effect(),
            (3, 1)
        );
        assert_eq!(
            StackInstr::unpack_builtin(StackInstr::builtin(Builtin::Push, 2).operand),
            (8, 2)
        );
    }
}
