use super::value::Tag;
use crate::bytecode::RtlProgram;

/// Tags observed at every operand use of every executed RTL instruction,
/// as bit sets (`Tag::bit`), indexed `[function][pc][use position]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeRecord {
    pub tags: Vec<Vec<Vec<u8>>>,
}

impl TypeRecord {
    pub fn for_program(p: &RtlProgram) -> Self {
        let tags = p
            .units
            .iter()
            .map(|u| u.code.iter().map(|i| vec![0u8; i.uses().len()]).collect())
            .collect();
        TypeRecord { tags }
    }

    pub fn observed(&self, func: usize, pc: usize, pos: usize) -> Vec<Tag> {
        let bits = self.tags[func][pc][pos];
        Tag::ALL
            .into_iter()
            .filter(|t| bits & t.bit() != 0)
            .collect()
    }
}
