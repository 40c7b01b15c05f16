//! Instruction sets for both virtual machines, their text form and
//! structural validation.

pub mod instr;
pub mod opcode;
pub mod text;
pub mod validate;

pub use instr::{
    global_index, global_slot, BcProgram, BcUnit, Builtin, Const, RtlInstr, RtlProgram, RtlUnit,
    Slot, StackInstr, StackProgram, StackUnit,
};
pub use opcode::{Arith, Cmp, Fields, Form, Opcode, Variant};
pub use text::{dump_text, parse_text, BcParseError};
pub use validate::{validate_rtl, validate_stack, Violation};
