/// Which instruction set an opcode belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    Rtl,
    Stack,
}

/// Operand fields an RTL opcode carries, in dump order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fields(u16);

impl Fields {
    pub const OP1: Fields = Fields(1);
    pub const OP2: Fields = Fields(2);
    pub const OP3: Fields = Fields(4);
    pub const IMM: Fields = Fields(8);
    pub const CIDX: Fields = Fields(16);
    pub const RES: Fields = Fields(32);
    pub const PC: Fields = Fields(64);
    pub const N: Fields = Fields(128);
    /// `imm` holds f64 bits rather than an integer.
    pub const FLOAT: Fields = Fields(256);
    /// Stack form: the single `operand` is meaningful.
    pub const OPERAND: Fields = Fields(512);
    pub const NONE: Fields = Fields(0);

    pub const fn with(self, other: Fields) -> Fields {
        Fields(self.0 | other.0)
    }

    pub const fn has(self, other: Fields) -> bool {
        self.0 & other.0 == other.0
    }
}

const D: Fields = Fields::OP1;
const DS: Fields = D.with(Fields::OP2);
const DAB: Fields = DS.with(Fields::OP3);
const DI: Fields = D.with(Fields::IMM);
const DF: Fields = DI.with(Fields::FLOAT);
const DC: Fields = D.with(Fields::CIDX);
const DAI: Fields = DS.with(Fields::IMM);
const PC: Fields = Fields::PC;
const AP: Fields = D.with(Fields::PC);
const ABRP: Fields = DS.with(Fields::RES).with(Fields::PC);
const ABIRP: Fields = ABRP.with(Fields::IMM);
const DN: Fields = D.with(Fields::N);
const CALL: Fields = DAB.with(Fields::N);
const X: Fields = Fields::OPERAND;
const NO: Fields = Fields::NONE;

macro_rules! opcodes {
    ($( $variant:ident = $name:literal, $form:ident, $fields:expr; )*) => {
        /// Every opcode of both instruction sets. Discriminants are dense from 0.
        #[repr(u8)]
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum Opcode {
            $($variant,)*
        }

        impl Opcode {
            pub const ALL: &'static [Opcode] = &[$(Opcode::$variant,)*];

            pub fn name(self) -> &'static str {
                match self {
                    $(Opcode::$variant => $name,)*
                }
            }

            pub fn form(self) -> Form {
                match self {
                    $(Opcode::$variant => Form::$form,)*
                }
            }

            pub fn fields(self) -> Fields {
                match self {
                    $(Opcode::$variant => $fields,)*
                }
            }
        }
    };
}

opcodes! {
    Ld = "ld", Rtl, DS;
    Ldi = "ldi", Rtl, DI;
    Ldf = "ldf", Rtl, DF;
    Lds = "lds", Rtl, DC;
    Ldnil = "ldnil", Rtl, D;
    Ldfun = "ldfun", Rtl, DI;

    Add = "add", Rtl, DAB;
    Sub = "sub", Rtl, DAB;
    Mul = "mul", Rtl, DAB;
    Div = "div", Rtl, DAB;
    Mod = "mod", Rtl, DAB;
    IAdd = "iadd", Rtl, DAB;
    ISub = "isub", Rtl, DAB;
    IMul = "imul", Rtl, DAB;
    IDiv = "idiv", Rtl, DAB;
    IMod = "imod", Rtl, DAB;
    FAdd = "fadd", Rtl, DAB;
    FSub = "fsub", Rtl, DAB;
    FMul = "fmul", Rtl, DAB;
    FDiv = "fdiv", Rtl, DAB;
    Addi = "addi", Rtl, DAI;
    IAddi = "iaddi", Rtl, DAI;
    Neg = "neg", Rtl, DS;
    Not = "not", Rtl, DS;

    Lt = "lt", Rtl, DAB;
    Le = "le", Rtl, DAB;
    Gt = "gt", Rtl, DAB;
    Ge = "ge", Rtl, DAB;
    Eq = "eq", Rtl, DAB;
    Ne = "ne", Rtl, DAB;
    ILt = "ilt", Rtl, DAB;
    ILe = "ile", Rtl, DAB;
    IGt = "igt", Rtl, DAB;
    IGe = "ige", Rtl, DAB;
    IEq = "ieq", Rtl, DAB;
    INe = "ine", Rtl, DAB;
    FLt = "flt", Rtl, DAB;
    FLe = "fle", Rtl, DAB;
    FGt = "fgt", Rtl, DAB;
    FGe = "fge", Rtl, DAB;
    FEq = "feq", Rtl, DAB;
    FNe = "fne", Rtl, DAB;

    Jmp = "jmp", Rtl, PC;
    Bt = "bt", Rtl, AP;
    Bf = "bf", Rtl, AP;

    BtLt = "btlt", Rtl, ABRP;
    BtLe = "btle", Rtl, ABRP;
    BtGt = "btgt", Rtl, ABRP;
    BtGe = "btge", Rtl, ABRP;
    BtEq = "bteq", Rtl, ABRP;
    BtNe = "btne", Rtl, ABRP;
    IBtLt = "ibtlt", Rtl, ABRP;
    IBtLe = "ibtle", Rtl, ABRP;
    IBtGt = "ibtgt", Rtl, ABRP;
    IBtGe = "ibtge", Rtl, ABRP;
    IBtEq = "ibteq", Rtl, ABRP;
    IBtNe = "ibtne", Rtl, ABRP;
    FBtLt = "fbtlt", Rtl, ABRP;
    FBtLe = "fbtle", Rtl, ABRP;
    FBtGt = "fbtgt", Rtl, ABRP;
    FBtGe = "fbtge", Rtl, ABRP;
    FBtEq = "fbteq", Rtl, ABRP;
    FBtNe = "fbtne", Rtl, ABRP;

    BfLt = "bflt", Rtl, ABRP;
    BfLe = "bfle", Rtl, ABRP;
    BfGt = "bfgt", Rtl, ABRP;
    BfGe = "bfge", Rtl, ABRP;
    BfEq = "bfeq", Rtl, ABRP;
    BfNe = "bfne", Rtl, ABRP;
    IBfLt = "ibflt", Rtl, ABRP;
    IBfLe = "ibfle", Rtl, ABRP;
    IBfGt = "ibfgt", Rtl, ABRP;
    IBfGe = "ibfge", Rtl, ABRP;
    IBfEq = "ibfeq", Rtl, ABRP;
    IBfNe = "ibfne", Rtl, ABRP;
    FBfLt = "fbflt", Rtl, ABRP;
    FBfLe = "fbfle", Rtl, ABRP;
    FBfGt = "fbfgt", Rtl, ABRP;
    FBfGe = "fbfge", Rtl, ABRP;
    FBfEq = "fbfeq", Rtl, ABRP;
    FBfNe = "fbfne", Rtl, ABRP;

    BtLtInc = "btltinc", Rtl, ABIRP;
    IBtLtInc = "ibtltinc", Rtl, ABIRP;

    MkArr = "mkarr", Rtl, DN;
    MkFill = "mkfill", Rtl, DAB;
    MkTab = "mktab", Rtl, DN;
    AGet = "aget", Rtl, DAB;
    ASet = "aset", Rtl, DAB;
    ALen = "alen", Rtl, DS;
    Call = "call", Rtl, CALL;
    Ret = "ret", Rtl, D;
    Builtin = "builtin", Rtl, CALL;

    PushConst = "pushconst", Stack, X;
    PushNil = "pushnil", Stack, NO;
    PushSlot = "pushslot", Stack, X;
    StoreSlot = "storeslot", Stack, X;
    Pop = "pop", Stack, NO;
    PushFun = "pushfun", Stack, X;
    SAdd = "sadd", Stack, NO;
    SSub = "ssub", Stack, NO;
    SMul = "smul", Stack, NO;
    SDiv = "sdiv", Stack, NO;
    SMod = "smod", Stack, NO;
    SNeg = "sneg", Stack, NO;
    SNot = "snot", Stack, NO;
    SLt = "slt", Stack, NO;
    SLe = "sle", Stack, NO;
    SGt = "sgt", Stack, NO;
    SGe = "sge", Stack, NO;
    SEq = "seq", Stack, NO;
    SNe = "sne", Stack, NO;
    Jump = "jump", Stack, X;
    BrFalse = "brfalse", Stack, X;
    BrTrue = "brtrue", Stack, X;
    SMkArr = "smkarr", Stack, X;
    SMkFill = "smkfill", Stack, NO;
    SMkTab = "smktab", Stack, X;
    SAGet = "saget", Stack, NO;
    SASet = "saset", Stack, NO;
    SCall = "scall", Stack, X;
    SRet = "sret", Stack, NO;
    SBuiltin = "sbuiltin", Stack, X;
}

/// Comparison relation shared by the compare, fused-branch and stack opcodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl Cmp {
    pub const ALL: [Cmp; 6] = [Cmp::Lt, Cmp::Le, Cmp::Gt, Cmp::Ge, Cmp::Eq, Cmp::Ne];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arith {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

/// Operand-type variant of a typed opcode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Generic,
    Int,
    Float,
}

use Opcode::*;

const CMP_TABLE: [[Opcode; 6]; 3] = [
    [Lt, Le, Gt, Ge, Eq, Ne],
    [ILt, ILe, IGt, IGe, IEq, INe],
    [FLt, FLe, FGt, FGe, FEq, FNe],
];
const BT_TABLE: [[Opcode; 6]; 3] = [
    [BtLt, BtLe, BtGt, BtGe, BtEq, BtNe],
    [IBtLt, IBtLe, IBtGt, IBtGe, IBtEq, IBtNe],
    [FBtLt, FBtLe, FBtGt, FBtGe, FBtEq, FBtNe],
];
const BF_TABLE: [[Opcode; 6]; 3] = [
    [BfLt, BfLe, BfGt, BfGe, BfEq, BfNe],
    [IBfLt, IBfLe, IBfGt, IBfGe, IBfEq, IBfNe],
    [FBfLt, FBfLe, FBfGt, FBfGe, FBfEq, FBfNe],
];

fn variant_row(v: Variant) -> usize {
    match v {
        Variant::Generic => 0,
        Variant::Int => 1,
        Variant::Float => 2,
    }
}

fn find(table: &[[Opcode; 6]; 3], op: Opcode) -> Option<(Cmp, Variant)> {
    const VARIANTS: [Variant; 3] = [Variant::Generic, Variant::Int, Variant::Float];
    table.iter().enumerate().find_map(|(row, ops)| {
        ops.iter()
            .position(|&o| o == op)
            .map(|col| (Cmp::ALL[col], VARIANTS[row]))
    })
}

impl Opcode {
    pub fn by_name(name: &str) -> Option<Opcode> {
        Opcode::ALL.iter().copied().find(|o| o.name() == name)
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn cmp(rel: Cmp, v: Variant) -> Opcode {
        CMP_TABLE[variant_row(v)][rel as usize]
    }

    pub fn branch_true(rel: Cmp, v: Variant) -> Opcode {
        BT_TABLE[variant_row(v)][rel as usize]
    }

    pub fn branch_false(rel: Cmp, v: Variant) -> Opcode {
        BF_TABLE[variant_row(v)][rel as usize]
    }

    /// `lt d,a,b` style compare.
    pub fn as_cmp(self) -> Option<(Cmp, Variant)> {
        find(&CMP_TABLE, self)
    }

    /// Fused compare-and-branch-if-true.
    pub fn as_branch_true(self) -> Option<(Cmp, Variant)> {
        find(&BT_TABLE, self)
    }

    /// Fused compare-and-branch-if-false.
    pub fn as_branch_false(self) -> Option<(Cmp, Variant)> {
        find(&BF_TABLE, self)
    }

    pub fn arith(kind: Arith, v: Variant) -> Option<Opcode> {
        Some(match (kind, v) {
            (Arith::Add, Variant::Generic) => Add,
            (Arith::Sub, Variant::Generic) => Sub,
            (Arith::Mul, Variant::Generic) => Mul,
            (Arith::Div, Variant::Generic) => Div,
            (Arith::Mod, Variant::Generic) => Mod,
            (Arith::Add, Variant::Int) => IAdd,
            (Arith::Sub, Variant::Int) => ISub,
            (Arith::Mul, Variant::Int) => IMul,
            (Arith::Div, Variant::Int) => IDiv,
            (Arith::Mod, Variant::Int) => IMod,
            (Arith::Add, Variant::Float) => FAdd,
            (Arith::Sub, Variant::Float) => FSub,
            (Arith::Mul, Variant::Float) => FMul,
            (Arith::Div, Variant::Float) => FDiv,
            (Arith::Mod, Variant::Float) => return None,
        })
    }

    pub fn as_arith(self) -> Option<(Arith, Variant)> {
        Some(match self {
            Add => (Arith::Add, Variant::Generic),
            Sub => (Arith::Sub, Variant::Generic),
            Mul => (Arith::Mul, Variant::Generic),
            Div => (Arith::Div, Variant::Generic),
            Mod => (Arith::Mod, Variant::Generic),
            IAdd => (Arith::Add, Variant::Int),
            ISub => (Arith::Sub, Variant::Int),
            IMul => (Arith::Mul, Variant::Int),
            IDiv => (Arith::Div, Variant::Int),
            IMod => (Arith::Mod, Variant::Int),
            FAdd => (Arith::Add, Variant::Float),
            FSub => (Arith::Sub, Variant::Float),
            FMul => (Arith::Mul, Variant::Float),
            FDiv => (Arith::Div, Variant::Float),
            _ => return None,
        })
    }

    /// Operand-type variant for opcodes that come in typed families.
    pub fn variant(self) -> Option<Variant> {
        match self {
            Addi | BtLtInc => Some(Variant::Generic),
            IAddi | IBtLtInc => Some(Variant::Int),
            _ => self
                .as_arith()
                .map(|(_, v)| v)
                .or_else(|| self.as_cmp().map(|(_, v)| v))
                .or_else(|| self.as_branch_true().map(|(_, v)| v))
                .or_else(|| self.as_branch_false().map(|(_, v)| v)),
        }
    }

    /// Arithmetic, comparison and fused-branch opcodes: the ones type
    /// specialization may rewrite and the counters classify.
    pub fn is_typed(self) -> bool {
        self.variant().is_some()
    }

    pub fn is_specialized(self) -> bool {
        matches!(self.variant(), Some(Variant::Int | Variant::Float))
    }

    pub fn has_target(self) -> bool {
        self.fields().has(Fields::PC) || matches!(self, Jump | BrFalse | BrTrue)
    }

    /// Control never falls through to the next instruction.
    pub fn is_terminator(self) -> bool {
        matches!(self, Jmp | Ret | Jump | SRet)
    }

    pub fn is_fused_branch(self) -> bool {
        self.as_branch_true().is_some()
            || self.as_branch_false().is_some()
            || matches!(self, BtLtInc | IBtLtInc)
    }
}

impl std::fmt::Display for Opcode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
