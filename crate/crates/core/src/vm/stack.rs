use std::io::Write;
use std::time::Instant;

use super::memo::{MemoCache, MemoKey};
use super::ops::{self, Fault};
use super::profile::Profiler;
use super::rtl::const_value;
use super::value::Value;
use super::{argv_value, finish, unit_names, ExecCounters, ExitReport, RunOptions, RuntimeError};
use crate::bytecode::{validate_stack, Cmp, StackInstr, StackProgram};
use crate::frontend::ast::{FuncId, Hint};

/// A frame's slots start at `bp`; the callee value sits just below them
/// and is dropped together with the frame.
struct Frame {
    func: usize,
    ret_pc: usize,
    bp: usize,
    memo: Option<MemoKey>,
}

/// Runs `program` on the stack engine. Type recording is not available
/// here; `options.record_types` is ignored.
pub fn run_stack(
    program: &StackProgram,
    argv: &[String],
    options: &RunOptions,
    out: &mut dyn Write,
) -> ExitReport {
    if let Err(v) = validate_stack(program) {
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
    match (options.count, options.profile) {
        (false, false) => run::<false, false>(program, argv, options, out),
        (true, false) => run::<true, false>(program, argv, options, out),
        (false, true) => run::<false, true>(program, argv, options, out),
        (true, true) => run::<true, true>(program, argv, options, out),
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
}

fn run<const C: bool, const P: bool>(
    program: &StackProgram,
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
        names,
    };
    let start = Instant::now();
    let result = exec::<C>(program, &mut st, argv, options.max_depth, out);
    let elapsed = start.elapsed();
    let _ = out.flush();
    let counters = C.then(|| ExecCounters::from_raw(&st.per_op, std::mem::take(&mut st.entries)));
    let profile = st.profiler.take().map(Profiler::finish);
    finish(result, elapsed, counters, profile, None, st.memo.stats)
}

fn exec<const C: bool>(
    program: &StackProgram,
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
    } = st;
    let nglobals = program.globals.len();
    stack.resize(nglobals, Value::Nil);
    stack[0] = argv_value(argv);
    let mut cur: usize = 0;
    let mut code: &[StackInstr] = &units[0].code;
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
            let s: i32 = $s;
            if s >= 0 {
                bp + s as usize
            } else {
                !s as usize
            }
        }};
    }
    // Validation proves slot bounds and operand-stack depths, so the
    // accesses below never leave the live part of the vector.
    macro_rules! slot {
        ($s:expr) => {{
            let i = at!($s);
            debug_assert!(i < stack.len());
            unsafe { stack.get_unchecked(i) }
        }};
    }
    macro_rules! top {
        ($k:expr) => {{
            let n = stack.len();
            debug_assert!(n >= $k);
            unsafe { stack.get_unchecked(n - $k) }
        }};
    }
    macro_rules! pop {
        () => {{
            debug_assert!(!stack.is_empty());
            unsafe { stack.pop().unwrap_unchecked() }
        }};
    }
    macro_rules! binop {
        ($v:expr) => {{
            let v: Value = $v;
            stack.pop();
            let n = stack.len();
            unsafe {
                *stack.get_unchecked_mut(n - 1) = v;
            }
            pc += 1;
        }};
    }
    macro_rules! arith {
        ($f:path) => {
            binop!(tri!($f(top!(2), top!(1))))
        };
    }
    macro_rules! cmp {
        ($rel:expr) => {
            binop!(Value::Int(tri!(ops::compare($rel, top!(2), top!(1))) as i64))
        };
    }

    loop {
        debug_assert!(pc < code.len());
        let ins = unsafe { code.get_unchecked(pc) };
        if C {
            per_op[ins.op as usize] += 1;
        }
        match ins.op {
            PushConst => {
                stack.push(consts[cur][ins.operand as usize].clone());
                pc += 1;
            }
            PushNil => {
                stack.push(Value::Nil);
                pc += 1;
            }
            PushFun => {
                stack.push(Value::Fun(FuncId(ins.operand as u32)));
                pc += 1;
            }
            PushSlot => {
                let v = slot!(ins.operand).clone();
                stack.push(v);
                pc += 1;
            }
            StoreSlot => {
                let v = pop!();
                let i = at!(ins.operand);
                debug_assert!(i < stack.len());
                unsafe {
                    *stack.get_unchecked_mut(i) = v;
                }
                pc += 1;
            }
            Pop => {
                pop!();
                pc += 1;
            }
            SAdd => arith!(ops::add),
            SSub => arith!(ops::sub),
            SMul => arith!(ops::mul),
            SDiv => arith!(ops::div),
            SMod => arith!(ops::rem),
            SLt => cmp!(Cmp::Lt),
            SLe => cmp!(Cmp::Le),
            SGt => cmp!(Cmp::Gt),
            SGe => cmp!(Cmp::Ge),
            SEq => cmp!(Cmp::Eq),
            SNe => cmp!(Cmp::Ne),
            SNeg => {
                let v = tri!(ops::neg(top!(1)));
                let n = stack.len();
                stack[n - 1] = v;
                pc += 1;
            }
            SNot => {
                let v = ops::not(top!(1));
                let n = stack.len();
                stack[n - 1] = v;
                pc += 1;
            }
            Jump => pc = ins.operand as usize,
            BrFalse => {
                if pop!().truthy() {
                    pc += 1;
                } else {
                    pc = ins.operand as usize;
                }
            }
            BrTrue => {
                if pop!().truthy() {
                    pc = ins.operand as usize;
                } else {
                    pc += 1;
                }
            }
            SMkArr => {
                let base = stack.len() - ins.operand as usize;
                let v = ops::make_array(&stack[base..]);
                stack.truncate(base);
                stack.push(v);
                pc += 1;
            }
            SMkTab => {
                let base = stack.len() - 2 * ins.operand as usize;
                let v = tri!(ops::make_table(&stack[base..]));
                stack.truncate(base);
                stack.push(v);
                pc += 1;
            }
            SMkFill => arith!(ops::make_fill),
            SAGet => arith!(ops::index_get),
            SASet => {
                let v = pop!();
                tri!(ops::index_set(top!(2), top!(1), v));
                stack.pop();
                stack.pop();
                pc += 1;
            }
            SBuiltin => {
                let (id, n) = StackInstr::unpack_builtin(ins.operand);
                let b = crate::bytecode::Builtin::from_id(id).expect("validated builtin id");
                let base = stack.len() - n as usize;
                let v = tri!(ops::builtin(b, &stack[base..], out, names));
                stack.truncate(base);
                stack.push(v);
                pc += 1;
            }
            SCall => {
                let n = ins.operand as usize;
                let argbase = stack.len() - n;
                let f = match &stack[argbase - 1] {
                    Value::Fun(f) => f.index(),
                    other => fail!(format!("cannot call {}", other.type_name())),
                };
                let unit = &units[f];
                if unit.arity as usize != n {
                    fail!(format!(
                        "{} expects {} argument(s), got {n}",
                        unit.name, unit.arity
                    ));
                }
                let mut key = None;
                if pure[f] {
                    match memo.lookup(f, &stack[argbase..]) {
                        Ok(v) => {
                            stack.truncate(argbase - 1);
                            stack.push(v);
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
                    memo: key,
                });
                stack.resize(argbase + unit.nslots as usize, Value::Nil);
                bp = argbase;
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
            SRet => {
                let v = pop!();
                if let Some(p) = profiler.as_mut() {
                    p.leave();
                }
                let Some(fr) = frames.pop() else {
                    stack.truncate(bp);
                    return Ok(());
                };
                stack.truncate(bp - 1);
                if let Some(k) = fr.memo {
                    memo.store(cur, k, &v);
                }
                stack.push(v);
                cur = fr.func;
                bp = fr.bp;
                pc = fr.ret_pc;
                code = &units[cur].code;
            }
            op => unreachable!("RTL opcode {op} in validated stack code"),
        }
    }
}
