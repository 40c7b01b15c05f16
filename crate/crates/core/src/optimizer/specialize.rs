use super::infer::{TypeElem, TypeInfo};
use crate::bytecode::{Opcode, RtlProgram, Variant};
use crate::vm::Tag;

/// The variant both operands allow, if any: int when both are int, float
/// when both are float. Mixed int and float operands stay generic because
/// the specialized handlers do no tag tests at all.
fn operand_variant(a: TypeElem, b: TypeElem) -> Option<Variant> {
    match (a, b) {
        (TypeElem::Tag(Tag::Int), TypeElem::Tag(Tag::Int)) => Some(Variant::Int),
        (TypeElem::Tag(Tag::Float), TypeElem::Tag(Tag::Float)) => Some(Variant::Float),
        _ => None,
    }
}

/// The specialized opcode for a generic typed instruction with the given
/// operand types; `None` leaves it generic.
pub fn specialized_op(op: Opcode, a: TypeElem, b: TypeElem) -> Option<Opcode> {
    use Opcode::*;
    match op {
        Addi => (a == TypeElem::Tag(Tag::Int)).then_some(IAddi),
        BtLtInc => (operand_variant(a, b) == Some(Variant::Int)).then_some(IBtLtInc),
        _ => {
            let v = operand_variant(a, b)?;
            if let Some((kind, Variant::Generic)) = op.as_arith() {
                Opcode::arith(kind, v)
            } else if let Some((rel, Variant::Generic)) = op.as_cmp() {
                Some(Opcode::cmp(rel, v))
            } else if let Some((rel, Variant::Generic)) = op.as_branch_true() {
                Some(Opcode::branch_true(rel, v))
            } else if let Some((rel, Variant::Generic)) = op.as_branch_false() {
                Some(Opcode::branch_false(rel, v))
            } else {
                None
            }
        }
    }
}

/// Rewrites generic typed instructions whose operand types are known.
/// Returns the number of rewrites per function.
pub fn specialize(p: &mut RtlProgram, types: &TypeInfo) -> Vec<usize> {
    let mut counts = vec![0; p.units.len()];
    for (f, u) in p.units.iter_mut().enumerate() {
        for (pc, ins) in u.code.iter_mut().enumerate() {
            if ins.op.variant() != Some(Variant::Generic) {
                continue;
            }
            let ut = &types.use_types[f][pc];
            let a = ut[0];
            let b = ut.get(1).copied().unwrap_or(TypeElem::Tag(Tag::Int));
            if let Some(op) = specialized_op(ins.op, a, b) {
                ins.op = op;
                counts[f] += 1;
            }
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    const INT: TypeElem = TypeElem::Tag(Tag::Int);
    const FLOAT: TypeElem = TypeElem::Tag(Tag::Float);

    #[test]
    fn table() {
        assert_eq!(specialized_op(Opcode::Add, INT, INT), Some(Opcode::IAdd));
        assert_eq!(
            specialized_op(Opcode::Add, FLOAT, FLOAT),
            Some(Opcode::FAdd)
        );
        assert_eq!(specialized_op(Opcode::Add, INT, FLOAT), None);
        assert_eq!(specialized_op(Opcode::Add, TypeElem::Top, INT), None);
        assert_eq!(specialized_op(Opcode::Mod, FLOAT, FLOAT), None);
        assert_eq!(specialized_op(Opcode::Mod, INT, INT), Some(Opcode::IMod));
        assert_eq!(specialized_op(Opcode::Lt, INT, INT), Some(Opcode::ILt));
        assert_eq!(
            specialized_op(Opcode::BfNe, FLOAT, FLOAT),
            Some(Opcode::FBfNe)
        );
        assert_eq!(specialized_op(Opcode::Addi, INT, INT), Some(Opcode::IAddi));
        assert_eq!(
            specialized_op(Opcode::BtLtInc, INT, INT),
            Some(Opcode::IBtLtInc)
        );
        assert_eq!(specialized_op(Opcode::IAdd, INT, INT), None);
    }
}
