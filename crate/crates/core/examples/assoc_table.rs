//! The open-addressing table directly: mixed keys, deletion and growth.

use dinolite::collections::hash::hash_value;
use dinolite::collections::table::probe_sequence;
use dinolite::collections::AssocTable;
use dinolite::vm::Value;

fn main() {
    let mut t = AssocTable::new();
    t.insert(Value::Int(1), Value::str("one")).unwrap();
    t.insert(Value::Float(1.0), Value::str("uno")).unwrap();
    t.insert(Value::str("k"), Value::Float(2.5)).unwrap();
    println!(
        "len {} (1 and 1.0 are one key), t[1] = {:?}",
        t.len(),
        t.get(&Value::Int(1)).unwrap()
    );

    let h = hash_value(&Value::str("k")).unwrap();
    let probes: Vec<usize> = probe_sequence(h, 16).take(16).collect();
    println!("probe order for \"k\" at capacity 16: {probes:?}");

    for i in 0..1000 {
        t.insert(Value::Int(i), Value::Int(i * i)).unwrap();
    }
    println!(
        "after 1000 inserts: len {} capacity {} load {:.2}",
        t.len(),
        t.capacity(),
        t.load()
    );
    for i in (0..1000).step_by(2) {
        t.remove(&Value::Int(i)).unwrap();
    }
    println!(
        "after deleting evens: len {} capacity {} tombstones {}",
        t.len(),
        t.capacity(),
        t.tombstones()
    );
    println!(
        "hash(\"\") = {:#018x}",
        hash_value(&Value::str("")).unwrap()
    );
}
