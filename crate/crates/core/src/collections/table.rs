use super::hash::{hash2, hash_value};
use super::CollectionError;
use crate::vm::Value;

pub const MIN_CAPACITY: usize = 8;
/// Maximum of (live + deleted) / capacity after any mutation, as a fraction.
pub const MAX_LOAD_NUM: usize = 7;
pub const MAX_LOAD_DEN: usize = 10;

#[derive(Debug, Clone)]
enum Entry {
    Empty,
    Deleted,
    Full { hash: u64, key: Value, val: Value },
}

/// Open-addressing table over one flat entry array. Collisions are resolved
/// by double hashing; removal leaves a tombstone that the next rehash purges.
#[derive(Debug, Clone)]
pub struct AssocTable {
    entries: Vec<Entry>,
    live: usize,
    deleted: usize,
    mutable: bool,
}

impl Default for AssocTable {
    fn default() -> Self {
        Self::new()
    }
}

/// Slot indices visited when looking up a key with primary hash `hash` in a
/// table of `capacity` (a power of two) slots.
pub fn probe_sequence(hash: u64, capacity: usize) -> impl Iterator<Item = usize> {
    debug_assert!(capacity.is_power_of_two());
    let mask = capacity as u64 - 1;
    let step = (hash2(hash) | 1) & mask;
    // capacity 1 has mask 0; the step is then 0 and the only slot is 0.
    let start = hash & mask;
    (0..capacity as u64).map(move |k| (start.wrapping_add(k.wrapping_mul(step)) & mask) as usize)
}

enum Probe {
    Found(usize),
    Vacant(usize),
}

impl AssocTable {
    pub fn new() -> Self {
        Self::with_capacity(MIN_CAPACITY)
    }

    fn with_capacity(cap: usize) -> Self {
        AssocTable {
            entries: vec![Entry::Empty; cap],
            live: 0,
            deleted: 0,
            mutable: true,
        }
    }

    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    pub fn capacity(&self) -> usize {
        self.entries.len()
    }

    pub fn tombstones(&self) -> usize {
        self.deleted
    }

    /// (live + deleted) / capacity.
    pub fn load(&self) -> f64 {
        (self.live + self.deleted) as f64 / self.capacity() as f64
    }

    pub fn is_mutable(&self) -> bool {
        self.mutable
    }

    /// Makes the table immutable (needed before it can be a key itself).
    pub fn freeze(&mut self) {
        self.mutable = false;
    }

    fn probe(&self, key: &Value, hash: u64) -> Result<(Probe, usize), CollectionError> {
        let mut first_deleted = None;
        let mut n = 0;
        for i in probe_sequence(hash, self.capacity()) {
            n += 1;
            match &self.entries[i] {
                Entry::Empty => return Ok((Probe::Vacant(first_deleted.unwrap_or(i)), n)),
                Entry::Deleted => {
                    first_deleted.get_or_insert(i);
                }
                Entry::Full {
                    hash: h, key: k, ..
                } => {
                    if *h == hash && k.deep_eq(key)? {
                        return Ok((Probe::Found(i), n));
                    }
                }
            }
        }
        // The load bound keeps an empty slot, so a full cycle ends here only
        // when every non-full slot is a tombstone.
        let slot = first_deleted.expect("table has no free slot");
        Ok((Probe::Vacant(slot), n))
    }

    pub fn get(&self, key: &Value) -> Result<Option<&Value>, CollectionError> {
        let hash = hash_value(key)?;
        Ok(match self.probe(key, hash)?.0 {
            Probe::Found(i) => match &self.entries[i] {
                Entry::Full { val, .. } => Some(val),
                _ => unreachable!(),
            },
            Probe::Vacant(_) => None,
        })
    }

    pub fn contains_key(&self, key: &Value) -> Result<bool, CollectionError> {
        Ok(self.get(key)?.is_some())
    }

    /// Number of slots examined by a lookup of `key`.
    pub fn probe_len(&self, key: &Value) -> Result<usize, CollectionError> {
        let hash = hash_value(key)?;
        Ok(self.probe(key, hash)?.1)
    }

    pub fn insert(&mut self, key: Value, val: Value) -> Result<(), CollectionError> {
        if !self.mutable {
            return Err(CollectionError::Immutable("table"));
        }
        let hash = hash_value(&key)?;
        match self.probe(&key, hash)?.0 {
            Probe::Found(i) => {
                if let Entry::Full { val: v, .. } = &mut self.entries[i] {
                    *v = val;
                }
            }
            Probe::Vacant(i) => {
                if matches!(self.entries[i], Entry::Deleted) {
                    self.deleted -= 1;
                }
                self.entries[i] = Entry::Full { hash, key, val };
                self.live += 1;
                if (self.live + self.deleted) * MAX_LOAD_DEN > self.capacity() * MAX_LOAD_NUM {
                    self.rehash();
                }
            }
        }
        Ok(())
    }

    /// Removing a missing key is a no-op.
    pub fn remove(&mut self, key: &Value) -> Result<Option<Value>, CollectionError> {
        if !self.mutable {
            return Err(CollectionError::Immutable("table"));
        }
        let hash = hash_value(key)?;
        match self.probe(key, hash)?.0 {
            Probe::Found(i) => {
                let old = std::mem::replace(&mut self.entries[i], Entry::Deleted);
                self.live -= 1;
                self.deleted += 1;
                match old {
                    Entry::Full { val, .. } => Ok(Some(val)),
                    _ => unreachable!(),
                }
            }
            Probe::Vacant(_) => Ok(None),
        }
    }

    /// Rebuilds into the smallest power-of-two capacity (at least
    /// `MIN_CAPACITY`) that is at most half full, dropping tombstones.
    fn rehash(&mut self) {
        let mut cap = MIN_CAPACITY;
        while self.live * 2 > cap {
            cap *= 2;
        }
        let old = std::mem::replace(&mut self.entries, vec![Entry::Empty; cap]);
        self.deleted = 0;
        for e in old {
            if let Entry::Full { hash, key, val } = e {
                let slot = probe_sequence(hash, cap)
                    .find(|&i| matches!(self.entries[i], Entry::Empty))
                    .expect("fresh table has room");
                self.entries[slot] = Entry::Full { hash, key, val };
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Value, &Value)> {
        self.entries.iter().filter_map(|e| match e {
            Entry::Full { key, val, .. } => Some((key, val)),
            _ => None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{rngs::StdRng, Rng, SeedableRng};
    use std::collections::{BTreeSet, HashMap};

    #[test]
    fn full_cycle_probing_capacity_16() {
        for h in 0..4096u64 {
            let seq: BTreeSet<usize> = probe_sequence(h.wrapping_mul(0x9e37_79b9), 16).collect();
            assert_eq!(seq.len(), 16, "hash {h}");
        }
    }

    #[test]
    fn same_key_twice_keeps_len_one() {
        let mut t = AssocTable::new();
        t.insert(Value::Int(1), Value::Int(10)).unwrap();
        t.insert(Value::Float(1.0), Value::Int(11)).unwrap();
        assert_eq!(t.len(), 1);
        assert!(matches!(
            t.get(&Value::Int(1)).unwrap(),
            Some(Value::Int(11))
        ));
    }

    #[test]
    fn delete_then_get_is_missing() {
        let mut t = AssocTable::new();
        t.insert(Value::str("k"), Value::Nil).unwrap();
        assert!(t.remove(&Value::str("k")).unwrap().is_some());
        assert!(t.get(&Value::str("k")).unwrap().is_none());
        assert!(t.remove(&Value::str("k")).unwrap().is_none());
    }

    #[test]
    fn no_eager_shrink() {
        let mut t = AssocTable::new();
        for i in 0..1000 {
            t.insert(Value::Int(i), Value::Int(i)).unwrap();
        }
        let cap = t.capacity();
        for i in 0..1000 {
            t.remove(&Value::Int(i)).unwrap();
        }
        assert_eq!(t.capacity(), cap);
        assert!(t.is_empty());
        t.insert(Value::Int(0), Value::Int(0)).unwrap();
        assert_eq!(
            t.capacity(),
            cap,
            "a single insert does not cross the load bound"
        );
    }

    #[test]
    fn frozen_and_unhashable() {
        let mut t = AssocTable::new();
        assert_eq!(
            t.insert(Value::array(vec![]), Value::Nil),
            Err(CollectionError::Unhashable("arr"))
        );
        t.freeze();
        assert_eq!(
            t.insert(Value::Int(1), Value::Nil),
            Err(CollectionError::Immutable("table"))
        );
    }

    #[test]
    fn mean_probe_length_at_half_load() {
        let mut t = AssocTable::new();
        let mut rng = StdRng::seed_from_u64(7);
        let mut keys = Vec::new();
        // Fill to exactly half of a 2^14 table.
        while t.capacity() < 1 << 14 || t.len() < (1 << 13) {
            let k = Value::Int(rng.gen());
            t.insert(k.clone(), Value::Nil).unwrap();
            keys.push(k);
        }
        assert_eq!(t.capacity(), 1 << 14);
        assert_eq!(t.len(), 1 << 13);
        let total: usize = keys.iter().map(|k| t.probe_len(k).unwrap()).sum();
        let mean = total as f64 / keys.len() as f64;
        assert!(mean < 1.6, "mean probes {mean}");
    }

    #[derive(Debug, Clone)]
    enum Op {
        Put(i64, i64),
        Del(i64),
        Get(i64),
    }

    fn key_of(k: i64) -> Value {
        // Mixed key types: ints, integral floats aliasing ints, strings.
        match k.rem_euclid(3) {
            0 => Value::Int(k),
            1 => Value::Float(k as f64),
            _ => Value::str(&format!("s{}", k / 3)),
        }
    }

    fn model_key(k: i64) -> String {
        match k.rem_euclid(3) {
            0 | 1 => format!("n{k}"),
            _ => format!("s{}", k / 3),
        }
    }

    fn run_model(ops: &[Op]) {
        let mut t = AssocTable::new();
        let mut m: HashMap<String, i64> = HashMap::new();
        for op in ops {
            match *op {
                Op::Put(k, v) => {
                    t.insert(key_of(k), Value::Int(v)).unwrap();
                    m.insert(model_key(k), v);
                }
                Op::Del(k) => {
                    let got = t
                        .remove(&key_of(k))
                        .unwrap()
                        .map(|v| matches!(v, Value::Int(_)));
                    assert_eq!(got.is_some(), m.remove(&model_key(k)).is_some());
                }
                Op::Get(k) => {
                    let got = match t.get(&key_of(k)).unwrap() {
                        Some(Value::Int(v)) => Some(*v),
                        None => None,
                        other => panic!("unexpected {other:?}"),
                    };
                    assert_eq!(got, m.get(&model_key(k)).copied());
                }
            }
            assert_eq!(t.len(), m.len());
            assert!(t.load() <= 0.70, "load {} after {op:?}", t.load());
        }
        assert_eq!(t.iter().count(), m.len());
    }

    #[test]
    fn hundred_thousand_random_ops_match_model() {
        let mut rng = StdRng::seed_from_u64(2024);
        let ops: Vec<Op> = (0..100_000)
            .map(|_| {
                let k = rng.gen_range(-3000..3000);
                match rng.gen_range(0..10) {
                    0..=4 => Op::Put(k, rng.gen()),
                    5..=7 => Op::Del(k),
                    _ => Op::Get(k),
                }
            })
            .collect();
        run_model(&ops);
    }

    proptest! {
        #[test]
        fn model_equivalence(ops in prop::collection::vec(
            prop_oneof![
                (-50i64..50, any::<i64>()).prop_map(|(k, v)| Op::Put(k, v)),
                (-50i64..50).prop_map(Op::Del),
                (-50i64..50).prop_map(Op::Get),
            ],
            0..400,
        )) {
            run_model(&ops);
        }
    }
}
