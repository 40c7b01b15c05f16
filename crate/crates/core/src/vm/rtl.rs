use std::io::Write;
use std::time::Instant;

use super::memo::{MemoCache, MemoKey};
use super::ops::{self, Fault};
use super::profile::Profiler;
use super::recorder::TypeRecord;
use super::value::Value;
use super::{argv_value, finish, unit_names, ExecCounters, ExitReport, RunOptions, RuntimeError};
use crate::bytecode::{validate_rtl, Cmp, Const, RtlInstr, RtlProgram, Slot};
use crate::frontend::ast::{FuncId, Hint};

struct Frame {
    func: usize,
    ret_pc: usize,
    bp: usize,
    dest: Slot,
    memo: Option<MemoKey>,
}

/// Runs `program` on the register-transfer engine. An invalid program is
/// reported as a runtime error before anything executes.
pub fn run_rtl(
    program: &RtlProgram,
    argv: &[String],
    options: &RunOptions,
    out: &mut dyn Write,
) -> ExitReport {
    if let Err(v) = validate_rtl(program) {
        let e = RuntimeError {
            message: format!("invalid bytecode: {}", v[0].message),
            func: String::new(),
            pc: 0,
        };
        return finish(
            Err(e),
            Default::default(),
            None,
            None,
            None,
            Default::default(),
        );
    }
    match (options.count, options.profile, options.record_types) {
        (false, false, false) => run::<false, false, false>(program, argv, options, out),
        (true, false, false) => run::<true, false, false>(program, argv, options, out),
        (false, true, false) => run::<false, true, false>(program, argv, options, out),
        (true, true, false) => run::<true, true, false>(program, argv, options, out),
        (false, false, true) => run::<false, false, true>(program, argv, options, out),
        (true, false, true) => run::<true, false, true>(program, argv, options, out),
        (false, true, true) => run::<false, true, true>(program, argv, options, out),
        (true, true, true) => run::<true, true, true>(program, argv, options, out),
    }
}

struct State {
    stack: Vec<Value>,
    frames: Vec<Frame>,
    consts: Vec<Vec<Value>>,
    names: Vec<String>,
    memo: MemoCache,
    pure: Vec<bool>,
    per_op: Vec<u64>,
    entries: Vec<u64>,
    profiler: Option<Profiler>,
    record: Option<TypeRecord>,
}

fn run<const C: bool, const P: bool, const R: bool>(
    program: &RtlProgram,
    argv: &[String],
    options: &RunOptions,
    out: &mut dyn Write,
) -> ExitReport {
    let names = unit_names(program);
    let mut st = State {
        stack: Vec::with_capacity(1024),
        frames: Vec::new(),
        consts: program
            .units
            .iter()
            .map(|u| u.consts.iter().map(const_value).collect())
            .collect(),
        memo: MemoCache::new(program.units.len()),
        pure: program
            .units
            .iter()
            .map(|u| options.memoize && u.has_hint(Hint::Pure))
            .collect(),
        per_op: vec![0; 256],
        entries: vec![0; program.units.len()],
        profiler: P.then(|| Profiler::new(names.clone())),
        record: R.then(|| TypeRecord::for_program(program)),
        names,
    };
    let start = Instant::now();
    let result = exec::<C, P, R>(program, &mut st, argv, options.max_depth, out);
    let elapsed = start.elapsed();
    let _ = out.flush();
    let counters = C.then(|| ExecCounters::from_raw(&st.per_op, std::mem::take(&mut st.entries)));
    let profile = st.profiler.take().map(Profiler::finish);
    finish(
        result,
        elapsed,
        counters,
        profile,
        st.record.take(),
        st.memo.stats,
    )
}

pub(super) fn const_value(c: &Const) -> Value {
    match c {
        Const::Int(i) => Value::Int(*i),
        Const::Float(f) => Value::Float(*f),
        Const::Str(s) => Value::str(s),
    }
}

fn exec<const C: bool, const P: bool, const R: bool>(
    program: &RtlProgram,
    st: &mut State,
    argv: &[String],
    max_depth: usize,
    out: &mut dyn Write,
) -> Result<(), RuntimeError> {
    use crate::bytecode::Opcode::*;

    let units = &program.units;
    let State {
        stack,
        frames,
        consts,
        names,
        memo,
        pure,
        per_op,
        entries,
        profiler,
        record,
    } = st;
    let nglobals = program.globals.len();
    stack.resize(nglobals, Value::Nil);
    stack[0] = argv_value(argv);
    let mut cur: usize = 0;
    let mut code: &[RtlInstr] = &units[0].code;
    let mut pc: usize = 0;
    let mut bp: usize = nglobals;
    stack.resize(bp + units[0].nslots as usize, Value::Nil);
    if C {
        entries[0] += 1;
    }
    if let Some(p) = profiler.as_mut() {
        p.enter(0);
    }

    macro_rules! fail {
        ($msg:expr) => {
            return Err(RuntimeError {
                message: $msg,
                func: units[cur].name.clone(),
                pc,
            })
        };
    }
    macro_rules! tri {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(Fault(msg)) => fail!(msg),
            }
        };
    }
    macro_rules! at {
        ($s:expr) => {{
            let s: Slot = $s;
            if s >= 0 {
                bp + s as usize
            } else {
                !s as usize
            }
        }};
    }
    // Validation bounds every slot by the frame size and every global by
    // the global count, and the frame is allocated before entry.
    macro_rules! get {
        ($s:expr) => {{
            let i = at!($s);
            debug_assert!(i < stack.len());
            unsafe { stack.get_unchecked(i) }
        }};
    }
    macro_rules! put {
        ($s:expr, $v:expr) => {{
            let v: Value = $v;
            let i = at!($s);
            debug_assert!(i < stack.len());
            unsafe {
                *stack.get_unchecked_mut(i) = v;
            }
        }};
    }
    // Int results overwrite an int slot's payload without touching the tag.
    // Generic arithmetic stores a whole value since its result type depends
    // on the operands; comparisons and int-specialized ops use this.
    macro_rules! put_int {
        ($s:expr, $v:expr) => {{
            let v: i64 = $v;
            let i = at!($s);
            debug_assert!(i < stack.len());
            let slot = unsafe { stack.get_unchecked_mut(i) };
            if let Value::Int(x) = slot {
                *x = v;
            } else {
                *slot = Value::Int(v);
            }
        }};
    }
    // A specialized opcode met an operand of the wrong tag: inference was
    // unsound. Debug builds stop here; release builds report it.
    macro_rules! unsound {
        ($ins:expr) => {{
            debug_assert!(
                false,
                "operand tag does not match {} at {}:{}",
                $ins.op, units[cur].name, pc
            );
            fail!(format!(
                "internal error: operand tag does not match {}",
                $ins.op
            ))
        }};
    }
    macro_rules! ints {
        ($ins:expr, $a:expr, $b:expr) => {
            match (get!($a), get!($b)) {
                (Value::Int(x), Value::Int(y)) => (*x, *y),
                _ => unsound!($ins),
            }
        };
    }
    macro_rules! int1 {
        ($ins:expr, $a:expr) => {
            match get!($a) {
                Value::Int(x) => *x,
                _ => unsound!($ins),
            }
        };
    }
    macro_rules! flts {
        ($ins:expr, $a:expr, $b:expr) => {
            match (get!($a), get!($b)) {
                (Value::Float(x), Value::Float(y)) => (*x, *y),
                _ => unsound!($ins),
            }
        };
    }
    macro_rules! jump_if {
        ($cond:expr, $ins:expr) => {
            if $cond {
                pc = $ins.pc as usize;
            } else {
                pc += 1;
            }
        };
    }
    macro_rules! generic_cmp {
        ($ins:expr, $rel:expr) => {{
            let r = match (get!($ins.op2), get!($ins.op3)) {
                (Value::Int(x), Value::Int(y)) => ops::cmp_ord($rel, x, y),
                (a, b) => tri!(ops::compare($rel, a, b)),
            };
            put_int!($ins.op1, r as i64);
            pc += 1;
        }};
    }
    macro_rules! int_cmp {
        ($ins:expr, $op:tt) => {{
            let (x, y) = ints!($ins, $ins.op2, $ins.op3);
            put_int!($ins.op1, (x $op y) as i64);
            pc += 1;
        }};
    }
    macro_rules! flt_cmp {
        ($ins:expr, $op:tt) => {{
            let (x, y) = flts!($ins, $ins.op2, $ins.op3);
            put_int!($ins.op1, (x $op y) as i64);
            pc += 1;
        }};
    }
    // Fused compare-and-branch: `res` always receives the comparison.
    macro_rules! generic_br {
        ($ins:expr, $rel:expr, $when:expr) => {{
            let r = match (get!($ins.op1), get!($ins.op2)) {
                (Value::Int(x), Value::Int(y)) => ops::cmp_ord($rel, x, y),
                (a, b) => tri!(ops::compare($rel, a, b)),
            };
            put_int!($ins.res, r as i64);
            jump_if!(r == $when, $ins);
        }};
    }
    macro_rules! int_br {
        ($ins:expr, $op:tt, $when:expr) => {{
            let (x, y) = ints!($ins, $ins.op1, $ins.op2);
            let r = x $op y;
            put_int!($ins.res, r as i64);
            jump_if!(r == $when, $ins);
        }};
    }
    macro_rules! flt_br {
        ($ins:expr, $op:tt, $when:expr) => {{
            let (x, y) = flts!($ins, $ins.op1, $ins.op2);
            let r = x $op y;
            put_int!($ins.res, r as i64);
            jump_if!(r == $when, $ins);
        }};
    }
    macro_rules! generic_arith {
        ($ins:expr, $f:path) => {{
            let v = tri!($f(get!($ins.op2), get!($ins.op3)));
            put!($ins.op1, v);
            pc += 1;
        }};
        // Generic arithmetic still tests both tags, but the int case is
        // handled here instead of in the out-of-line helper.
        ($ins:expr, $f:path, |$x:ident, $y:ident| $e:expr) => {{
            let v = match (get!($ins.op2), get!($ins.op3)) {
                (Value::Int($x), Value::Int($y)) => Value::Int($e),
                (a, b) => tri!($f(a, b)),
            };
            put!($ins.op1, v);
            pc += 1;
        }};
    }
    macro_rules! int_arith {
        ($ins:expr, |$x:ident, $y:ident| $e:expr) => {{
            let ($x, $y) = ints!($ins, $ins.op2, $ins.op3);
            let r: i64 = $e;
            put_int!($ins.op1, r);
            pc += 1;
        }};
    }
    macro_rules! flt_arith {
        ($ins:expr, $op:tt) => {{
            let (x, y) = flts!($ins, $ins.op2, $ins.op3);
            put!($ins.op1, Value::Float(x $op y));
            pc += 1;
        }};
    }

    loop {
        debug_assert!(pc < code.len());
        let ins = unsafe { code.get_unchecked(pc) };
        if C {
            per_op[ins.op as usize] += 1;
        }
        if R {
            if let Some(rec) = record.as_mut() {
                let tags = &mut rec.tags[cur][pc];
                let st: &Vec<Value> = stack;
                ins.for_each_use(|k, s| {
                    let i = if s >= 0 { bp + s as usize } else { !s as usize };
                    tags[k] |= st[i].tag().bit();
                });
            }
        }
        match ins.op {
            Ld => {
                let v = get!(ins.op2).clone();
                put!(ins.op1, v);
                pc += 1;
            }
            Ldi => {
                put_int!(ins.op1, ins.imm);
                pc += 1;
            }
            Ldf => {
                put!(ins.op1, Value::Float(ins.imm_f64()));
                pc += 1;
            }
            Lds => {
                let v = consts[cur][ins.cidx as usize].clone();
                put!(ins.op1, v);
                pc += 1;
            }
            Ldnil => {
                put!(ins.op1, Value::Nil);
                pc += 1;
            }
            Ldfun => {
                put!(ins.op1, Value::Fun(FuncId(ins.imm as u32)));
                pc += 1;
            }

            Add => generic_arith!(ins, ops::add, |x, y| x.wrapping_add(*y)),
            Sub => generic_arith!(ins, ops::sub, |x, y| x.wrapping_sub(*y)),
            Mul => generic_arith!(ins, ops::mul, |x, y| x.wrapping_mul(*y)),
            Div => generic_arith!(ins, ops::div),
            Mod => generic_arith!(ins, ops::rem),
            IAdd => int_arith!(ins, |x, y| x.wrapping_add(y)),
            ISub => int_arith!(ins, |x, y| x.wrapping_sub(y)),
            IMul => int_arith!(ins, |x, y| x.wrapping_mul(y)),
            IDiv => int_arith!(ins, |x, y| tri!(ops::int_div(x, y))),
            IMod => int_arith!(ins, |x, y| tri!(ops::int_rem(x, y))),
            FAdd => flt_arith!(ins, +),
            FSub => flt_arith!(ins, -),
            FMul => flt_arith!(ins, *),
            FDiv => flt_arith!(ins, /),
            Addi => {
                let v = match get!(ins.op2) {
                    Value::Int(x) => Value::Int(x.wrapping_add(ins.imm)),
                    a => tri!(ops::add(a, &Value::Int(ins.imm))),
                };
                put!(ins.op1, v);
                pc += 1;
            }
            IAddi => {
                let x = int1!(ins, ins.op2);
                put_int!(ins.op1, x.wrapping_add(ins.imm));
                pc += 1;
            }
            Neg => {
                let v = tri!(ops::neg(get!(ins.op2)));
                put!(ins.op1, v);
                pc += 1;
            }
            Not => {
                let v = ops::not(get!(ins.op2));
                put!(ins.op1, v);
                pc += 1;
            }

            Lt => generic_cmp!(ins, Cmp::Lt),
            Le => generic_cmp!(ins, Cmp::Le),
            Gt => generic_cmp!(ins, Cmp::Gt),
            Ge => generic_cmp!(ins, Cmp::Ge),
            Eq => generic_cmp!(ins, Cmp::Eq),
            Ne => generic_cmp!(ins, Cmp::Ne),
            ILt => int_cmp!(ins, <),
            ILe => int_cmp!(ins, <=),
            IGt => int_cmp!(ins, >),
            IGe => int_cmp!(ins, >=),
            IEq => int_cmp!(ins, ==),
            INe => int_cmp!(ins, !=),
            FLt => flt_cmp!(ins, <),
            FLe => flt_cmp!(ins, <=),
            FGt => flt_cmp!(ins, >),
            FGe => flt_cmp!(ins, >=),
            FEq => flt_cmp!(ins, ==),
            FNe => flt_cmp!(ins, !=),

            Jmp => pc = ins.pc as usize,
            Bt => jump_if!(get!(ins.op1).truthy(), ins),
            Bf => jump_if!(!get!(ins.op1).truthy(), ins),

            BtLt => generic_br!(ins, Cmp::Lt, true),
            BtLe => generic_br!(ins, Cmp::Le, true),
            BtGt => generic_br!(ins, Cmp::Gt, true),
            BtGe => generic_br!(ins, Cmp::Ge, true),
            BtEq => generic_br!(ins, Cmp::Eq, true),
            BtNe => generic_br!(ins, Cmp::Ne, true),
            IBtLt => int_br!(ins, <, true),
            IBtLe => int_br!(ins, <=, true),
            IBtGt => int_br!(ins, >, true),
            IBtGe => int_br!(ins, >=, true),
            IBtEq => int_br!(ins, ==, true),
            IBtNe => int_br!(ins, !=, true),
            FBtLt => flt_br!(ins, <, true),
            FBtLe => flt_br!(ins, <=, true),
            FBtGt => flt_br!(ins, >, true),
            FBtGe => flt_br!(ins, >=, true),
            FBtEq => flt_br!(ins, ==, true),
            FBtNe => flt_br!(ins, !=, true),
            BfLt => generic_br!(ins, Cmp::Lt, false),
            BfLe => generic_br!(ins, Cmp::Le, false),
            BfGt => generic_br!(ins, Cmp::Gt, false),
            BfGe => generic_br!(ins, Cmp::Ge, false),
            BfEq => generic_br!(ins, Cmp::Eq, false),
            BfNe => generic_br!(ins, Cmp::Ne, false),
            IBfLt => int_br!(ins, <, false),
            IBfLe => int_br!(ins, <=, false),
            IBfGt => int_br!(ins, >, false),
            IBfGe => int_br!(ins, >=, false),
            IBfEq => int_br!(ins, ==, false),
            IBfNe => int_br!(ins, !=, false),
            FBfLt => flt_br!(ins, <, false),
            FBfLe => flt_br!(ins, <=, false),
            FBfGt => flt_br!(ins, >, false),
            FBfGe => flt_br!(ins, >=, false),
            FBfEq => flt_br!(ins, ==, false),
            FBfNe => flt_br!(ins, !=, false),

            BtLtInc => {
                let v = match get!(ins.op1) {
                    Value::Int(x) => Value::Int(x.wrapping_add(ins.imm)),
                    a => tri!(ops::add(a, &Value::Int(ins.imm))),
                };
                put!(ins.op1, v);
                let r = match (get!(ins.op1), get!(ins.op2)) {
                    (Value::Int(x), Value::Int(y)) => x < y,
                    (a, b) => tri!(ops::compare(Cmp::Lt, a, b)),
                };
                put_int!(ins.res, r as i64);
                jump_if!(r, ins);
            }
            IBtLtInc => {
                let x = int1!(ins, ins.op1).wrapping_add(ins.imm);
                put_int!(ins.op1, x);
                let y = int1!(ins, ins.op2);
                put_int!(ins.res, (x < y) as i64);
                jump_if!(x < y, ins);
            }

            MkArr => {
                let base = bp + ins.op1 as usize + 1;
                let v = ops::make_array(&stack[base..base + ins.n as usize]);
                put!(ins.op1, v);
                pc += 1;
            }
            MkTab => {
                let base = bp + ins.op1 as usize + 1;
                let v = tri!(ops::make_table(&stack[base..base + 2 * ins.n as usize]));
                put!(ins.op1, v);
                pc += 1;
            }
            MkFill => generic_arith!(ins, ops::make_fill),
            AGet => generic_arith!(ins, ops::index_get),
            ASet => {
                let v = get!(ins.op3).clone();
                tri!(ops::index_set(get!(ins.op1), get!(ins.op2), v));
                pc += 1;
            }
            ALen => {
                let n = tri!(ops::length(get!(ins.op2)));
                put_int!(ins.op1, n);
                pc += 1;
            }
            Builtin => {
                let b = crate::bytecode::Builtin::from_id(ins.op2).expect("validated builtin id");
                let base = bp + ins.op3 as usize;
                let v = tri!(ops::builtin(
                    b,
                    &stack[base..base + ins.n as usize],
                    out,
                    names
                ));
                put!(ins.op1, v);
                pc += 1;
            }

            Call => {
                let f = match get!(ins.op2) {
                    Value::Fun(f) => f.index(),
                    other => fail!(format!("cannot call {}", other.type_name())),
                };
                let unit = &units[f];
                let n = ins.n as usize;
                if unit.arity as usize != n {
                    fail!(format!(
                        "{} expects {} argument(s), got {n}",
                        unit.name, unit.arity
                    ));
                }
                let argbase = bp + ins.op3 as usize;
                let mut key = None;
                if pure[f] {
                    match memo.lookup(f, &stack[argbase..argbase + n]) {
                        Ok(v) => {
                            put!(ins.op1, v);
                            pc += 1;
                            continue;
                        }
                        Err(k) => key = k,
                    }
                }
                if frames.len() >= max_depth {
                    fail!("stack overflow".to_string());
                }
                frames.push(Frame {
                    func: cur,
                    ret_pc: pc + 1,
                    bp,
                    dest: ins.op1,
                    memo: key,
                });
                let new_bp = stack.len();
                stack.resize(new_bp + unit.nslots as usize, Value::Nil);
                for k in 0..n {
                    let v = stack[argbase + k].clone();
                    stack[new_bp + k] = v;
                }
                bp = new_bp;
                cur = f;
                code = &unit.code;
                pc = 0;
                if C {
                    entries[f] += 1;
                }
                if let Some(p) = profiler.as_mut() {
                    p.enter(f);
                }
            }
            Ret => {
                let v = get!(ins.op1).clone();
                stack.truncate(bp);
                if let Some(p) = profiler.as_mut() {
                    p.leave();
                }
                let Some(fr) = frames.pop() else {
                    return Ok(());
                };
                if let Some(k) = fr.memo {
                    memo.store(cur, k, &v);
                }
                cur = fr.func;
                bp = fr.bp;
                pc = fr.ret_pc;
                code = &units[cur].code;
                put!(fr.dest, v);
            }

            op => unreachable!("stack opcode {op} in validated RTL code"),
        }
    }
}
