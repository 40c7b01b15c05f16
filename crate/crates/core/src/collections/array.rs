use super::CollectionError;
use crate::vm::Value;

/// Heterogeneous growable array.
#[derive(Debug, Clone, Default)]
pub struct DynArray {
    elems: Vec<Value>,
    mutable: bool,
}

impl DynArray {
    pub fn new() -> Self {
        DynArray {
            elems: Vec::new(),
            mutable: true,
        }
    }

    pub fn from_vec(elems: Vec<Value>) -> Self {
        DynArray {
            elems,
            mutable: true,
        }
    }

    pub fn filled(n: usize, v: Value) -> Self {
        DynArray {
            elems: vec![v; n],
            mutable: true,
        }
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn is_mutable(&self) -> bool {
        self.mutable
    }

    /// Makes the array immutable (needed before it can be a table key).
    pub fn freeze(&mut self) {
        self.mutable = false;
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Value> {
        self.elems.iter()
    }

    fn index(&self, i: i64) -> Result<usize, CollectionError> {
        if i < 0 || i as u64 >= self.elems.len() as u64 {
            Err(CollectionError::IndexRange {
                index: i,
                len: self.elems.len(),
            })
        } else {
            Ok(i as usize)
        }
    }

    pub fn get(&self, i: i64) -> Result<&Value, CollectionError> {
        Ok(&self.elems[self.index(i)?])
    }

    pub fn set(&mut self, i: i64, v: Value) -> Result<(), CollectionError> {
        if !self.mutable {
            return Err(CollectionError::Immutable("array"));
        }
        let i = self.index(i)?;
        self.elems[i] = v;
        Ok(())
    }

    pub fn push(&mut self, v: Value) -> Result<(), CollectionError> {
        if !self.mutable {
            return Err(CollectionError::Immutable("array"));
        }
        self.elems.push(v);
        Ok(())
    }

    /// Removes element `i`, shifting the tail down.
    pub fn remove(&mut self, i: i64) -> Result<Value, CollectionError> {
        if !self.mutable {
            return Err(CollectionError::Immutable("array"));
        }
        let i = self.index(i)?;
        Ok(self.elems.remove(i))
    }
}
