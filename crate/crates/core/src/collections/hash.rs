//! Key hashing for [`super::AssocTable`]. These constants are the single
//! source of truth; `docs/language.md` repeats them.

use super::CollectionError;
use crate::vm::Value;

/// MurmurHash3 64-bit finalizer multipliers.
pub const FMIX_C1: u64 = 0xff51_afd7_ed55_8ccd;
pub const FMIX_C2: u64 = 0xc4ce_b9fe_1a85_ec53;
/// MurmurHash64A multiplier and shift, used for string bytes.
pub const MURMUR64A_M: u64 = 0xc6a4_a793_5bd1_e995;
pub const MURMUR64A_R: u32 = 47;
pub const STR_SEED: u64 = 0x5d1e_c0de_0000_0001;
/// Salts mixed into the payload so different tags with equal payload bits
/// land apart. Ints and integral floats share `TAG_NUM` because `1 == 1.0`.
pub const TAG_NIL: u64 = 0x6e69_6c00_0000_0000;
pub const TAG_NUM: u64 = 0x0000_0000_0000_0000;
pub const TAG_FLOAT: u64 = 0x666c_6f61_7400_0000;
pub const TAG_ARR: u64 = 0x6172_7200_0000_0000;
pub const TAG_TAB: u64 = 0x7461_6200_0000_0000;
/// Salt for the secondary hash.
pub const HASH2_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
pub fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(FMIX_C1);
    k ^= k >> 33;
    k = k.wrapping_mul(FMIX_C2);
    k ^= k >> 33;
    k
}

/// MurmurHash64A over `bytes`.
pub fn murmur64a(bytes: &[u8], seed: u64) -> u64 {
    let m = MURMUR64A_M;
    let r = MURMUR64A_R;
    let mut h = seed ^ (bytes.len() as u64).wrapping_mul(m);
    let mut chunks = bytes.chunks_exact(8);
    for c in &mut chunks {
        let mut k = u64::from_le_bytes(c.try_into().expect("8 bytes"));
        k = k.wrapping_mul(m);
        k ^= k >> r;
        k = k.wrapping_mul(m);
        h ^= k;
        h = h.wrapping_mul(m);
    }
    let tail = chunks.remainder();
    if !tail.is_empty() {
        let mut buf = [0u8; 8];
        buf[..tail.len()].copy_from_slice(tail);
        h ^= u64::from_le_bytes(buf);
        h = h.wrapping_mul(m);
    }
    h ^= h >> r;
    h = h.wrapping_mul(m);
    h ^= h >> r;
    h
}

/// Float that equals some int hashes as that int.
fn integral(f: f64) -> Option<i64> {
    (f.fract() == 0.0 && (-9.223372036854775808e18..9.223372036854775808e18).contains(&f))
        .then_some(f as i64)
}

/// Primary hash. Equal values hash equal; mutable aggregates and functions
/// are rejected.
pub fn hash_value(v: &Value) -> Result<u64, CollectionError> {
    Ok(match v {
        Value::Nil => fmix64(TAG_NIL),
        Value::Int(i) => fmix64(*i as u64 ^ TAG_NUM),
        Value::Float(f) => match integral(*f) {
            Some(i) => fmix64(i as u64 ^ TAG_NUM),
            None => fmix64(f.to_bits() ^ TAG_FLOAT),
        },
        Value::Str(s) => murmur64a(s.as_bytes(), STR_SEED),
        Value::Arr(a) => {
            let a = a.borrow();
            if a.is_mutable() {
                return Err(CollectionError::Unhashable("arr"));
            }
            let mut h = fmix64(TAG_ARR ^ a.len() as u64);
            for e in a.iter() {
                h = fmix64(h ^ hash_value(e)?).wrapping_mul(MURMUR64A_M);
            }
            fmix64(h)
        }
        Value::Tab(t) => {
            let t = t.borrow();
            if t.is_mutable() {
                return Err(CollectionError::Unhashable("tab"));
            }
            // Order-independent: equal tables may differ in slot layout.
            let mut sum = TAG_TAB ^ t.len() as u64;
            for (k, e) in t.iter() {
                sum = sum.wrapping_add(fmix64(hash_value(k)? ^ hash_value(e)?.rotate_left(17)));
            }
            fmix64(sum)
        }
        Value::Fun(_) => return Err(CollectionError::Unhashable("fun")),
    })
}

/// Secondary hash for the probe step, derived from the primary hash by one
/// more finalizer round instead of a second pass over the key.
#[inline]
pub fn hash2(h: u64) -> u64 {
    fmix64(h ^ HASH2_SALT)
}
