//! Tag-dispatching operations shared by both engines. The engines call these
//! for generic opcodes; specialized RTL opcodes bypass them.

use std::cell::RefCell;
use std::io::Write;
use std::rc::Rc;

use super::value::Value;
use crate::bytecode::{Arith, Builtin, Cmp};
use crate::collections::{AssocTable, CollectionError, DynArray};

/// A guest-visible runtime failure, before the engine attaches the location.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fault(pub String);

impl From<CollectionError> for Fault {
    fn from(e: CollectionError) -> Self {
        Fault(e.to_string())
    }
}

pub type OpResult<T> = Result<T, Fault>;

#[cold]
fn type_error(what: &str, a: &Value, b: &Value) -> Fault {
    Fault(format!(
        "cannot {what} {} and {}",
        a.type_name(),
        b.type_name()
    ))
}

#[cold]
pub fn div_by_zero() -> Fault {
    Fault("division by zero".into())
}

#[inline(never)]
pub fn add(a: &Value, b: &Value) -> OpResult<Value> {
    use Value::*;
    Ok(match (a, b) {
        (Int(x), Int(y)) => Int(x.wrapping_add(*y)),
        (Float(x), Float(y)) => Float(x + y),
        (Int(x), Float(y)) => Float(*x as f64 + y),
        (Float(x), Int(y)) => Float(x + *y as f64),
        (Str(x), Str(y)) => {
            let mut s = String::with_capacity(x.len() + y.len());
            s.push_str(x);
            s.push_str(y);
            Value::Str(Rc::from(s))
        }
        _ => return Err(type_error("add", a, b)),
    })
}

#[inline(never)]
pub fn sub(a: &Value, b: &Value) -> OpResult<Value> {
    use Value::*;
    Ok(match (a, b) {
        (Int(x), Int(y)) => Int(x.wrapping_sub(*y)),
        (Float(x), Float(y)) => Float(x - y),
        (Int(x), Float(y)) => Float(*x as f64 - y),
        (Float(x), Int(y)) => Float(x - *y as f64),
        _ => return Err(type_error("subtract", a, b)),
    })
}

#[inline(never)]
pub fn mul(a: &Value, b: &Value) -> OpResult<Value> {
    use Value::*;
    Ok(match (a, b) {
        (Int(x), Int(y)) => Int(x.wrapping_mul(*y)),
        (Float(x), Float(y)) => Float(x * y),
        (Int(x), Float(y)) => Float(*x as f64 * y),
        (Float(x), Int(y)) => Float(x * *y as f64),
        _ => return Err(type_error("multiply", a, b)),
    })
}

/// Int division truncates toward zero; `i64::MIN / -1` wraps.
#[inline]
pub fn int_div(x: i64, y: i64) -> OpResult<i64> {
    if y == 0 {
        return Err(div_by_zero());
    }
    Ok(x.wrapping_div(y))
}

#[inline]
pub fn int_rem(x: i64, y: i64) -> OpResult<i64> {
    if y == 0 {
        return Err(div_by_zero());
    }
    Ok(x.wrapping_rem(y))
}

#[inline(never)]
pub fn div(a: &Value, b: &Value) -> OpResult<Value> {
    use Value::*;
    Ok(match (a, b) {
        (Int(x), Int(y)) => Int(int_div(*x, *y)?),
        (Float(x), Float(y)) => Float(x / y),
        (Int(x), Float(y)) => Float(*x as f64 / y),
        (Float(x), Int(y)) => Float(x / *y as f64),
        _ => return Err(type_error("divide", a, b)),
    })
}

#[inline(never)]
pub fn rem(a: &Value, b: &Value) -> OpResult<Value> {
    use Value::*;
    Ok(match (a, b) {
        (Int(x), Int(y)) => Int(int_rem(*x, *y)?),
        (Float(x), Float(y)) => Float(x % y),
        (Int(x), Float(y)) => Float(*x as f64 % y),
        (Float(x), Int(y)) => Float(x % *y as f64),
        _ => return Err(type_error("take the remainder of", a, b)),
    })
}

pub fn arith(kind: Arith, a: &Value, b: &Value) -> OpResult<Value> {
    match kind {
        Arith::Add => add(a, b),
        Arith::Sub => sub(a, b),
        Arith::Mul => mul(a, b),
        Arith::Div => div(a, b),
        Arith::Mod => rem(a, b),
    }
}

#[inline(never)]
pub fn neg(a: &Value) -> OpResult<Value> {
    match a {
        Value::Int(x) => Ok(Value::Int(x.wrapping_neg())),
        Value::Float(x) => Ok(Value::Float(-x)),
        _ => Err(Fault(format!("cannot negate {}", a.type_name()))),
    }
}

pub fn not(a: &Value) -> Value {
    Value::Int(!a.truthy() as i64)
}

#[inline]
pub fn cmp_ord<T: PartialOrd>(rel: Cmp, x: T, y: T) -> bool {
    match rel {
        Cmp::Lt => x < y,
        Cmp::Le => x <= y,
        Cmp::Gt => x > y,
        Cmp::Ge => x >= y,
        Cmp::Eq => x == y,
        Cmp::Ne => x != y,
    }
}

/// Generic comparison. Ordering needs two numbers or two strings; equality
/// is structural and defined for every pair of values.
#[inline(never)]
pub fn compare(rel: Cmp, a: &Value, b: &Value) -> OpResult<bool> {
    use Value::*;
    if matches!(rel, Cmp::Eq | Cmp::Ne) {
        let eq = a.deep_eq(b)?;
        return Ok(eq == (rel == Cmp::Eq));
    }
    Ok(match (a, b) {
        (Int(x), Int(y)) => cmp_ord(rel, x, y),
        (Float(x), Float(y)) => cmp_ord(rel, x, y),
        (Int(x), Float(y)) => cmp_ord(rel, *x as f64, *y),
        (Float(x), Int(y)) => cmp_ord(rel, *x, *y as f64),
        (Str(x), Str(y)) => cmp_ord(rel, x.as_bytes(), y.as_bytes()),
        _ => return Err(type_error("compare", a, b)),
    })
}

fn index_of(i: &Value) -> OpResult<i64> {
    match i {
        Value::Int(i) => Ok(*i),
        other => Err(Fault(format!(
            "index must be int, not {}",
            other.type_name()
        ))),
    }
}

pub fn index_get(base: &Value, idx: &Value) -> OpResult<Value> {
    match base {
        Value::Arr(a) => Ok(a.borrow().get(index_of(idx)?)?.clone()),
        Value::Tab(t) => match t.borrow().get(idx)? {
            Some(v) => Ok(v.clone()),
            None => Err(Fault(format!("key {} not found in table", idx.render(&[])))),
        },
        Value::Str(s) => {
            let i = index_of(idx)?;
            let c = usize::try_from(i).ok().and_then(|i| s.chars().nth(i));
            match c {
                Some(c) => Ok(Value::str(c.encode_utf8(&mut [0; 4]))),
                None => Err(CollectionError::IndexRange {
                    index: i,
                    len: s.chars().count(),
                }
                .into()),
            }
        }
        other => Err(Fault(format!("cannot index {}", other.type_name()))),
    }
}

pub fn index_set(base: &Value, idx: &Value, v: Value) -> OpResult<()> {
    match base {
        Value::Arr(a) => Ok(a.borrow_mut().set(index_of(idx)?, v)?),
        Value::Tab(t) => Ok(t.borrow_mut().insert(idx.clone(), v)?),
        other => Err(Fault(format!("cannot assign into {}", other.type_name()))),
    }
}

pub fn make_array(elems: &[Value]) -> Value {
    Value::array(elems.to_vec())
}

pub fn make_fill(n: &Value, v: &Value) -> OpResult<Value> {
    match n {
        Value::Int(n) if *n >= 0 => Ok(Value::Arr(Rc::new(RefCell::new(DynArray::filled(
            *n as usize,
            v.clone(),
        ))))),
        Value::Int(n) => Err(Fault(format!("negative array size {n}"))),
        other => Err(Fault(format!(
            "array size must be int, not {}",
            other.type_name()
        ))),
    }
}

/// `kv` alternates keys and values.
pub fn make_table(kv: &[Value]) -> OpResult<Value> {
    let mut t = AssocTable::new();
    for pair in kv.chunks_exact(2) {
        t.insert(pair[0].clone(), pair[1].clone())?;
    }
    Ok(Value::table(t))
}

pub fn length(v: &Value) -> OpResult<i64> {
    Ok(match v {
        Value::Str(s) => s.chars().count() as i64,
        Value::Arr(a) => a.borrow().len() as i64,
        Value::Tab(t) => t.borrow().len() as i64,
        other => return Err(Fault(format!("{} has no length", other.type_name()))),
    })
}

fn to_int(v: &Value) -> OpResult<i64> {
    match v {
        Value::Int(i) => Ok(*i),
        Value::Float(f) if f.is_finite() && *f > -9.3e18 && *f < 9.3e18 => Ok(*f as i64),
        Value::Str(s) => s
            .trim()
            .parse()
            .map_err(|_| Fault(format!("cannot convert \"{s}\" to int"))),
        other => Err(Fault(format!(
            "cannot convert {} to int",
            other.render(&[])
        ))),
    }
}

fn to_float(v: &Value) -> OpResult<f64> {
    match v {
        Value::Int(i) => Ok(*i as f64),
        Value::Float(f) => Ok(*f),
        Value::Str(s) => s
            .trim()
            .parse()
            .map_err(|_| Fault(format!("cannot convert \"{s}\" to float"))),
        other => Err(Fault(format!(
            "cannot convert {} to float",
            other.type_name()
        ))),
    }
}

/// Runs a builtin. Output goes to `out`; write failures are ignored so a
/// closed pipe does not change the program's result.
pub fn builtin(
    b: Builtin,
    args: &[Value],
    out: &mut dyn Write,
    names: &[String],
) -> OpResult<Value> {
    if let Some(n) = b.arity() {
        if n as usize != args.len() {
            return Err(Fault(format!(
                "{} expects {n} argument(s), got {}",
                b.name(),
                args.len()
            )));
        }
    }
    Ok(match b {
        Builtin::Put | Builtin::Putln => {
            let mut s = String::new();
            for a in args {
                s.push_str(&a.render(names));
            }
            if b == Builtin::Putln {
                s.push('\n');
            }
            let _ = out.write_all(s.as_bytes());
            Value::Nil
        }
        Builtin::Int => Value::Int(to_int(&args[0])?),
        Builtin::Float => Value::Float(to_float(&args[0])?),
        Builtin::Str => Value::str(&args[0].render(names)),
        Builtin::Len => Value::Int(length(&args[0])?),
        Builtin::Type => Value::str(args[0].type_name()),
        Builtin::Del => {
            match &args[0] {
                Value::Tab(t) => {
                    t.borrow_mut().remove(&args[1])?;
                }
                Value::Arr(a) => {
                    a.borrow_mut().remove(index_of(&args[1])?)?;
                }
                other => return Err(Fault(format!("cannot delete from {}", other.type_name()))),
            }
            Value::Nil
        }
        Builtin::Push => match &args[0] {
            Value::Arr(a) => {
                a.borrow_mut().push(args[1].clone())?;
                Value::Nil
            }
            other => return Err(Fault(format!("cannot push onto {}", other.type_name()))),
        },
    })
}
