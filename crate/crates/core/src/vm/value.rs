use std::cell::RefCell;
use std::fmt::Write;
use std::rc::Rc;

use crate::collections::{AssocTable, CollectionError, DynArray};
use crate::frontend::ast::FuncId;

/// A guest value. Scalars are stored inline; strings and aggregates are
/// shared by reference count. Reference cycles through aggregates are not
/// collected.
#[derive(Debug, Clone, Default)]
pub enum Value {
    #[default]
    Nil,
    Int(i64),
    Float(f64),
    Str(Rc<str>),
    Arr(Rc<RefCell<DynArray>>),
    Tab(Rc<RefCell<AssocTable>>),
    Fun(FuncId),
}

/// Tag of a value, as reported by `type()` and recorded by the type recorder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tag {
    Nil,
    Int,
    Float,
    Str,
    Arr,
    Tab,
    Fun,
}

impl Tag {
    pub const ALL: [Tag; 7] = [
        Tag::Nil,
        Tag::Int,
        Tag::Float,
        Tag::Str,
        Tag::Arr,
        Tag::Tab,
        Tag::Fun,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Tag::Nil => "nil",
            Tag::Int => "int",
            Tag::Float => "float",
            Tag::Str => "str",
            Tag::Arr => "arr",
            Tag::Tab => "tab",
            Tag::Fun => "fun",
        }
    }

    pub fn bit(self) -> u8 {
        1 << self as u8
    }
}

impl Value {
    pub fn str(s: &str) -> Value {
        Value::Str(Rc::from(s))
    }

    pub fn array(elems: Vec<Value>) -> Value {
        Value::Arr(Rc::new(RefCell::new(DynArray::from_vec(elems))))
    }

    pub fn table(t: AssocTable) -> Value {
        Value::Tab(Rc::new(RefCell::new(t)))
    }

    pub fn tag(&self) -> Tag {
        match self {
            Value::Nil => Tag::Nil,
            Value::Int(_) => Tag::Int,
            Value::Float(_) => Tag::Float,
            Value::Str(_) => Tag::Str,
            Value::Arr(_) => Tag::Arr,
            Value::Tab(_) => Tag::Tab,
            Value::Fun(_) => Tag::Fun,
        }
    }

    pub fn type_name(&self) -> &'static str {
        self.tag().name()
    }

    /// `nil`, `0` and `0.0` are false; everything else is true.
    #[inline]
    pub fn truthy(&self) -> bool {
        match self {
            Value::Nil => false,
            Value::Int(i) => *i != 0,
            Value::Float(f) => *f != 0.0,
            _ => true,
        }
    }

    /// Mutable aggregates and functions may not be table keys.
    pub fn is_hashable(&self) -> bool {
        match self {
            Value::Arr(a) => !a.borrow().is_mutable(),
            Value::Tab(t) => !t.borrow().is_mutable(),
            Value::Fun(_) => false,
            _ => true,
        }
    }

    /// Whether the value may be used as a memoization key component.
    pub fn is_scalar_or_str(&self) -> bool {
        matches!(
            self,
            Value::Nil | Value::Int(_) | Value::Float(_) | Value::Str(_)
        )
    }

    /// Structural equality. `1 == 1.0`; aggregates compare element-wise.
    /// A reference cycle reached during the comparison is an error.
    pub fn deep_eq(&self, other: &Value) -> Result<bool, CollectionError> {
        let mut path = Vec::new();
        eq_rec(self, other, &mut path)
    }

    /// Renders for `put`/`str`. Strings nested in aggregates are quoted;
    /// table entries are sorted by their rendered key.
    pub fn render(&self, fun_names: &[String]) -> String {
        let mut out = String::new();
        let mut path = Vec::new();
        render_rec(self, &mut out, false, fun_names, &mut path);
        out
    }
}

fn agg_ptr(v: &Value) -> Option<usize> {
    match v {
        Value::Arr(a) => Some(Rc::as_ptr(a) as *const u8 as usize),
        Value::Tab(t) => Some(Rc::as_ptr(t) as *const u8 as usize),
        _ => None,
    }
}

fn eq_rec(a: &Value, b: &Value, path: &mut Vec<(usize, usize)>) -> Result<bool, CollectionError> {
    use Value::*;
    Ok(match (a, b) {
        (Nil, Nil) => true,
        (Int(x), Int(y)) => x == y,
        (Float(x), Float(y)) => x == y,
        (Int(x), Float(y)) | (Float(y), Int(x)) => (*x as f64) == *y && float_is_int(*y, *x),
        (Str(x), Str(y)) => x == y,
        (Fun(x), Fun(y)) => x == y,
        (Arr(x), Arr(y)) => {
            if Rc::ptr_eq(x, y) {
                return Ok(true);
            }
            let key = (agg_ptr(a).unwrap(), agg_ptr(b).unwrap());
            if path.contains(&key) {
                return Err(CollectionError::Cycle);
            }
            let (x, y) = (x.borrow(), y.borrow());
            if x.len() != y.len() {
                return Ok(false);
            }
            path.push(key);
            let mut same = true;
            for (p, q) in x.iter().zip(y.iter()) {
                if !eq_rec(p, q, path)? {
                    same = false;
                    break;
                }
            }
            path.pop();
            same
        }
        (Tab(x), Tab(y)) => {
            if Rc::ptr_eq(x, y) {
                return Ok(true);
            }
            let key = (agg_ptr(a).unwrap(), agg_ptr(b).unwrap());
            if path.contains(&key) {
                return Err(CollectionError::Cycle);
            }
            let (x, y) = (x.borrow(), y.borrow());
            if x.len() != y.len() {
                return Ok(false);
            }
            path.push(key);
            let mut same = true;
            for (k, v) in x.iter() {
                match y.get(k)? {
                    Some(w) if eq_rec(v, w, path)? => {}
                    _ => {
                        same = false;
                        break;
                    }
                }
            }
            path.pop();
            same
        }
        _ => false,
    })
}

/// Exact int/float equality: the float must be integral and convert back
/// to the same int (guards against rounding of large ints).
fn float_is_int(f: f64, i: i64) -> bool {
    f.fract() == 0.0
        && f >= -9.223372036854775808e18
        && f < 9.223372036854775808e18
        && f as i64 == i
}

fn quote(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            '\0' => out.push_str("\\0"),
            c => out.push(c),
        }
    }
    out.push('"');
}

/// Shortest representation that reads back to the same float.
pub fn render_float(f: f64, out: &mut String) {
    let _ = write!(out, "{f:?}");
}

fn render_rec(v: &Value, out: &mut String, nested: bool, names: &[String], path: &mut Vec<usize>) {
    match v {
        Value::Nil => out.push_str("nil"),
        Value::Int(i) => {
            let _ = write!(out, "{i}");
        }
        Value::Float(f) => render_float(*f, out),
        Value::Str(s) if nested => quote(s, out),
        Value::Str(s) => out.push_str(s),
        Value::Fun(id) => {
            let _ = match names.get(id.index()) {
                Some(n) => write!(out, "<fun {n}>"),
                None => write!(out, "<fun #{}>", id.0),
            };
        }
        Value::Arr(a) => {
            let p = agg_ptr(v).unwrap();
            if path.contains(&p) {
                out.push_str("[...]");
                return;
            }
            path.push(p);
            out.push('[');
            for (k, e) in a.borrow().iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                render_rec(e, out, true, names, path);
            }
            out.push(']');
            path.pop();
        }
        Value::Tab(t) => {
            let p = agg_ptr(v).unwrap();
            if path.contains(&p) {
                out.push_str("tab [...]");
                return;
            }
            path.push(p);
            let mut entries: Vec<(String, String)> = t
                .borrow()
                .iter()
                .map(|(k, e)| {
                    let (mut ks, mut es) = (String::new(), String::new());
                    render_rec(k, &mut ks, true, names, path);
                    render_rec(e, &mut es, true, names, path);
                    (ks, es)
                })
                .collect();
            entries.sort();
            out.push_str("tab [");
            for (k, (ks, es)) in entries.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{ks} : {es}");
            }
            out.push(']');
            path.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truthiness() {
        assert!(!Value::Nil.truthy());
        assert!(!Value::Int(0).truthy());
        assert!(!Value::Float(0.0).truthy());
        assert!(Value::Int(-1).truthy());
        assert!(Value::str("").truthy());
        assert!(Value::array(vec![]).truthy());
    }

    #[test]
    fn int_float_equality() {
        assert!(Value::Int(1).deep_eq(&Value::Float(1.0)).unwrap());
        assert!(!Value::Int(1).deep_eq(&Value::Float(1.5)).unwrap());
        assert!(!Value::Int(i64::MAX)
            .deep_eq(&Value::Float(9.223372036854775807e18))
            .unwrap());
        assert!(!Value::Float(f64::NAN)
            .deep_eq(&Value::Float(f64::NAN))
            .unwrap());
    }

    #[test]
    fn aggregate_equality_and_cycles() {
        let a = Value::array(vec![Value::Int(1), Value::str("x")]);
        let b = Value::array(vec![Value::Float(1.0), Value::str("x")]);
        assert!(a.deep_eq(&b).unwrap());
        let c1 = Value::array(vec![]);
        let c2 = Value::array(vec![]);
        if let (Value::Arr(x), Value::Arr(y)) = (&c1, &c2) {
            x.borrow_mut().push(c1.clone()).unwrap();
            y.borrow_mut().push(c2.clone()).unwrap();
        }
        assert_eq!(c1.deep_eq(&c2), Err(CollectionError::Cycle));
        assert!(c1.deep_eq(&c1).unwrap());
        assert_eq!(c1.render(&[]), "[[...]]");
    }

    #[test]
    fn rendering() {
        let names = vec!["main".to_string(), "f".to_string()];
        assert_eq!(Value::Float(0.1).render(&names), "0.1");
        assert_eq!(Value::Float(2.0).render(&names), "2.0");
        assert_eq!(Value::Float(1e100).render(&names), "1e100");
        assert_eq!(Value::Fun(FuncId(1)).render(&names), "<fun f>");
        let a = Value::array(vec![Value::str("a\"b"), Value::Nil, Value::Int(-3)]);
        assert_eq!(a.render(&names), r#"["a\"b", nil, -3]"#);
        let mut t = AssocTable::new();
        t.insert(Value::str("b"), Value::Int(2)).unwrap();
        t.insert(Value::str("a"), Value::Int(1)).unwrap();
        assert_eq!(Value::table(t).render(&names), r#"tab ["a" : 1, "b" : 2]"#);
    }
}
