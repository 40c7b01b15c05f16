use std::collections::HashMap;
use std::rc::Rc;

use super::value::Value;

/// One argument of a memoized call. Floats are keyed by bit pattern, so
/// `1` and `1.0` are distinct keys.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum KeyPart {
    Nil,
    Int(i64),
    Float(u64),
    Str(Rc<str>),
}

pub type MemoKey = Box<[KeyPart]>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MemoStats {
    pub hits: u64,
    pub misses: u64,
    /// Calls that skipped the cache because an argument was an aggregate
    /// or a function.
    pub bypassed: u64,
}

/// Results of `!pure` functions keyed by argument tuple. Unbounded for the
/// length of a run.
#[derive(Debug, Default)]
pub struct MemoCache {
    tables: Vec<HashMap<MemoKey, Value>>,
    pub stats: MemoStats,
}

impl MemoCache {
    pub fn new(nfuncs: usize) -> Self {
        MemoCache {
            tables: vec![HashMap::new(); nfuncs],
            stats: MemoStats::default(),
        }
    }

    /// `None` when some argument cannot be part of a key.
    pub fn key(args: &[Value]) -> Option<MemoKey> {
        args.iter()
            .map(|a| match a {
                Value::Nil => Some(KeyPart::Nil),
                Value::Int(i) => Some(KeyPart::Int(*i)),
                Value::Float(f) => Some(KeyPart::Float(f.to_bits())),
                Value::Str(s) => Some(KeyPart::Str(s.clone())),
                _ => None,
            })
            .collect()
    }

    /// Looks up a call; counts a hit or a miss, or a bypass when the
    /// arguments are not keyable. On a miss the key is returned for `store`.
    pub fn lookup(&mut self, func: usize, args: &[Value]) -> Result<Value, Option<MemoKey>> {
        let Some(key) = Self::key(args) else {
            self.stats.bypassed += 1;
            return Err(None);
        };
        match self.tables[func].get(&key) {
            Some(v) => {
                self.stats.hits += 1;
                Ok(v.clone())
            }
            None => {
                self.stats.misses += 1;
                Err(Some(key))
            }
        }
    }

    /// Aggregate results are not cached: sharing them between calls would
    /// make later mutation visible through the cache.
    pub fn store(&mut self, func: usize, key: MemoKey, result: &Value) {
        if result.is_scalar_or_str() || matches!(result, Value::Fun(_)) {
            self.tables[func].insert(key, result.clone());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn miss_then_hit() {
        let mut m = MemoCache::new(2);
        let args = [Value::Int(2), Value::Int(3)];
        let key = m.lookup(1, &args).unwrap_err().unwrap();
        m.store(1, key, &Value::Int(5));
        assert!(matches!(m.lookup(1, &args), Ok(Value::Int(5))));
        assert_eq!(
            m.stats,
            MemoStats {
                hits: 1,
                misses: 1,
                bypassed: 0
            }
        );
    }

    #[test]
    fn aggregate_argument_bypasses() {
        let mut m = MemoCache::new(1);
        assert!(matches!(
            m.lookup(0, &[Value::array(vec![Value::Int(1)])]),
            Err(None)
        ));
        assert_eq!(
            m.stats,
            MemoStats {
                hits: 0,
                misses: 0,
                bypassed: 1
            }
        );
    }

    #[test]
    fn aggregate_result_not_stored() {
        let mut m = MemoCache::new(1);
        let key = m.lookup(0, &[Value::Int(1)]).unwrap_err().unwrap();
        m.store(0, key, &Value::array(vec![]));
        assert!(m.lookup(0, &[Value::Int(1)]).is_err());
    }
}
