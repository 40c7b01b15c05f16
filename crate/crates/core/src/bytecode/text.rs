//! Human-readable RTL bytecode (`.dlb`).
//!
//! ```text
//! .globals n=<count>
//! .gdecl name=<ident> slot=<int>
//! .func name=<ident> id=<int> arity=<int> nslots=<int> hints=<comma-list-or-empty>
//! .vdecl name=<ident> slot=<int>
//! .const idx=<int> str="<escaped>"
//! <idx> <opname> [op1=] [op2=] [op3=] [imm=] [cidx=] [res=] [pc=] [n=]
//! .end
//! ```
//!
//! Float immediates are written with 17 significant digits so the text is an
//! exact image of the in-memory program.

use std::fmt::{self, Write};

use super::instr::{BcProgram, BcUnit, Const, RtlInstr, RtlProgram};
use super::opcode::{Fields, Form, Opcode};
use super::validate::validate_rtl;
use crate::frontend::ast::{FuncId, Hint};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct BcParseError {
    pub line: usize,
    pub message: String,
}

pub(crate) fn write_fields(out: &mut impl Write, i: &RtlInstr) -> fmt::Result {
    let fields = i.op.fields();
    if fields.has(Fields::OP1) {
        write!(out, " op1={}", i.op1)?;
    }
    if fields.has(Fields::OP2) {
        write!(out, " op2={}", i.op2)?;
    }
    if fields.has(Fields::OP3) {
        write!(out, " op3={}", i.op3)?;
    }
    if fields.has(Fields::IMM) {
        if fields.has(Fields::FLOAT) {
            write!(out, " imm={:.16e}", i.imm_f64())?;
        } else {
            write!(out, " imm={}", i.imm)?;
        }
    }
    if fields.has(Fields::CIDX) {
        write!(out, " cidx={}", i.cidx)?;
    }
    if fields.has(Fields::RES) {
        write!(out, " res={}", i.res)?;
    }
    if fields.has(Fields::PC) {
        write!(out, " pc={}", i.pc)?;
    }
    if fields.has(Fields::N) {
        write!(out, " n={}", i.n)?;
    }
    Ok(())
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if c.is_control() => {
                let _ = write!(out, "\\u{{{:x}}}", c as u32);
            }
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Option<String> {
    let mut out = String::new();
    let mut it = s.chars();
    while let Some(c) = it.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match it.next()? {
            '"' => out.push('"'),
            '\\' => out.push('\\'),
            'n' => out.push('\n'),
            't' => out.push('\t'),
            'r' => out.push('\r'),
            'u' => {
                if it.next()? != '{' {
                    return None;
                }
                let hex: String = it.by_ref().take_while(|&c| c != '}').collect();
                out.push(char::from_u32(u32::from_str_radix(&hex, 16).ok()?)?);
            }
            _ => return None,
        }
    }
    Some(out)
}

fn hint_list(hints: &[Hint]) -> String {
    let mut names: Vec<&str> = hints.iter().map(|h| h.name()).collect();
    names.sort_unstable();
    names.join(",")
}

/// Serializes a program. The output is deterministic and `parse_text`
/// reads it back to an equal program.
pub fn dump_text(program: &RtlProgram) -> String {
    let mut out = String::new();
    let _ = writeln!(out, ".globals n={}", program.globals.len());
    for (slot, name) in program.globals.iter().enumerate() {
        let _ = writeln!(out, ".gdecl name={name} slot={slot}");
    }
    for u in &program.units {
        let _ = writeln!(
            out,
            ".func name={} id={} arity={} nslots={} hints={}",
            u.name,
            u.id.0,
            u.arity,
            u.nslots,
            hint_list(&u.hints)
        );
        for (name, slot) in &u.vdecls {
            let _ = writeln!(out, ".vdecl name={name} slot={slot}");
        }
        for (idx, c) in u.consts.iter().enumerate() {
            if let Const::Str(s) = c {
                let _ = writeln!(out, ".const idx={idx} str=\"{}\"", escape(s));
            }
        }
        for (idx, i) in u.code.iter().enumerate() {
            let _ = write!(out, "  {idx} {}", i.op.name());
            let _ = write_fields(&mut out, i);
            out.push('\n');
        }
        out.push_str(".end\n");
    }
    out
}

struct Line<'a> {
    no: usize,
    words: Vec<&'a str>,
}

impl Line<'_> {
    fn err(&self, message: impl Into<String>) -> BcParseError {
        BcParseError {
            line: self.no,
            message: message.into(),
        }
    }

    /// Parses `key=value` words after `skip` leading words, rejecting
    /// unknown and duplicate keys.
    fn fields(&self, skip: usize, allowed: &[&str]) -> Result<Vec<(&str, &str)>, BcParseError> {
        let mut out: Vec<(&str, &str)> = Vec::new();
        for w in &self.words[skip..] {
            let Some((k, v)) = w.split_once('=') else {
                return Err(self.err(format!("expected key=value, found `{w}`")));
            };
            if !allowed.contains(&k) {
                return Err(self.err(format!("unexpected field `{k}`")));
            }
            if out.iter().any(|(seen, _)| *seen == k) {
                return Err(self.err(format!("duplicate field `{k}`")));
            }
            out.push((k, v));
        }
        Ok(out)
    }

    fn get<'f>(&self, fields: &[(&str, &'f str)], key: &str) -> Result<&'f str, BcParseError> {
        fields
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| self.err(format!("missing field `{key}`")))
    }

    fn num<T: std::str::FromStr>(
        &self,
        fields: &[(&str, &str)],
        key: &str,
    ) -> Result<T, BcParseError> {
        let v = self.get(fields, key)?;
        v.parse()
            .map_err(|_| self.err(format!("bad value `{v}` for `{key}`")))
    }
}

/// Splits on whitespace but keeps a quoted `str="..."` value in one word.
fn split_words(line: &str) -> Option<Vec<&str>> {
    let mut out = Vec::new();
    let mut rest = line.trim_start();
    while !rest.is_empty() {
        let end = if let Some(q) = rest
            .find("=\"")
            .filter(|&q| !rest[..q].contains(char::is_whitespace))
        {
            let bytes = rest.as_bytes();
            let mut j = q + 2;
            loop {
                match bytes.get(j)? {
                    b'\\' => j += 2,
                    b'"' => break j + 1,
                    _ => j += 1,
                }
            }
        } else {
            rest.find(char::is_whitespace).unwrap_or(rest.len())
        };
        out.push(&rest[..end]);
        rest = rest[end..].trim_start();
    }
    Some(out)
}

fn parse_instr(line: &Line<'_>, expected_idx: usize) -> Result<RtlInstr, BcParseError> {
    let idx: usize = line.words[0]
        .parse()
        .map_err(|_| line.err("bad instruction index"))?;
    if idx != expected_idx {
        return Err(line.err(format!(
            "instruction index {idx} out of sequence (expected {expected_idx})"
        )));
    }
    let name = line
        .words
        .get(1)
        .ok_or_else(|| line.err("missing opcode"))?;
    let op = Opcode::by_name(name)
        .filter(|o| o.form() == Form::Rtl)
        .ok_or_else(|| line.err(format!("unknown opcode `{name}`")))?;
    let schema = op.fields();
    let mut allowed = vec!["next"];
    for (flag, key) in [
        (Fields::OP1, "op1"),
        (Fields::OP2, "op2"),
        (Fields::OP3, "op3"),
        (Fields::IMM, "imm"),
        (Fields::CIDX, "cidx"),
        (Fields::RES, "res"),
        (Fields::PC, "pc"),
        (Fields::N, "n"),
    ] {
        if schema.has(flag) {
            allowed.push(key);
        }
    }
    let fields = line.fields(2, &allowed)?;
    let mut i = RtlInstr::new(op);
    if schema.has(Fields::OP1) {
        i.op1 = line.num(&fields, "op1")?;
    }
    if schema.has(Fields::OP2) {
        i.op2 = line.num(&fields, "op2")?;
    }
    if schema.has(Fields::OP3) {
        i.op3 = line.num(&fields, "op3")?;
    }
    if schema.has(Fields::IMM) {
        i.imm = if schema.has(Fields::FLOAT) {
            line.num::<f64>(&fields, "imm")?.to_bits() as i64
        } else {
            line.num(&fields, "imm")?
        };
    }
    if schema.has(Fields::CIDX) {
        i.cidx = line.num(&fields, "cidx")?;
    }
    if schema.has(Fields::RES) {
        i.res = line.num(&fields, "res")?;
    }
    if schema.has(Fields::PC) {
        i.pc = line.num(&fields, "pc")?;
    }
    if schema.has(Fields::N) {
        i.n = line.num(&fields, "n")?;
    }
    Ok(i)
}

/// Reads the text form back. Structural invariants are re-validated; a
/// violation is reported at the line of the offending instruction.
pub fn parse_text(text: &str) -> Result<RtlProgram, BcParseError> {
    let mut globals: Vec<String> = Vec::new();
    let mut declared_globals: Option<usize> = None;
    let mut units: Vec<BcUnit<RtlInstr>> = Vec::new();
    let mut current: Option<BcUnit<RtlInstr>> = None;
    // (unit, instr) -> source line, for validation messages
    let mut lines_of: Vec<Vec<usize>> = Vec::new();
    let mut unit_lines: Vec<usize> = Vec::new();
    let mut last_line = 0;

    for (no, raw) in text.lines().enumerate() {
        let no = no + 1;
        last_line = no;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let words = split_words(content).ok_or_else(|| BcParseError {
            line: no,
            message: "unterminated string".into(),
        })?;
        let line = Line { no, words };
        match line.words[0] {
            ".globals" => {
                if declared_globals.is_some() || current.is_some() || !units.is_empty() {
                    return Err(line.err("`.globals` must appear once, first"));
                }
                let f = line.fields(1, &["n"])?;
                declared_globals = Some(line.num(&f, "n")?);
            }
            ".gdecl" => {
                if current.is_some() {
                    return Err(line.err("`.gdecl` inside a function"));
                }
                let f = line.fields(1, &["name", "slot"])?;
                let slot: usize = line.num(&f, "slot")?;
                if slot != globals.len() {
                    return Err(line.err(format!("global slot {slot} out of sequence")));
                }
                globals.push(line.get(&f, "name")?.to_string());
            }
            ".func" => {
                if current.is_some() {
                    return Err(line.err("`.func` before `.end` of the previous function"));
                }
                let f = line.fields(1, &["name", "id", "arity", "nslots", "hints"])?;
                let hints_text = line.get(&f, "hints")?;
                let mut hints = Vec::new();
                for h in hints_text.split(',').filter(|s| !s.is_empty()) {
                    let h = Hint::from_name(h)
                        .ok_or_else(|| line.err(format!("unknown hint `{h}`")))?;
                    if hints.contains(&h) {
                        return Err(line.err(format!("duplicate hint `{}`", h.name())));
                    }
                    hints.push(h);
                }
                hints.sort();
                current = Some(BcUnit {
                    id: FuncId(line.num(&f, "id")?),
                    name: line.get(&f, "name")?.to_string(),
                    arity: line.num(&f, "arity")?,
                    nslots: line.num(&f, "nslots")?,
                    hints,
                    code: Vec::new(),
                    vdecls: Vec::new(),
                    consts: Vec::new(),
                });
                lines_of.push(Vec::new());
                unit_lines.push(no);
            }
            ".vdecl" => {
                let u = current
                    .as_mut()
                    .ok_or_else(|| line.err("`.vdecl` outside a function"))?;
                let f = line.fields(1, &["name", "slot"])?;
                u.vdecls
                    .push((line.get(&f, "name")?.to_string(), line.num(&f, "slot")?));
            }
            ".const" => {
                let u = current
                    .as_mut()
                    .ok_or_else(|| line.err("`.const` outside a function"))?;
                let f = line.fields(1, &["idx", "str"])?;
                let idx: usize = line.num(&f, "idx")?;
                if idx != u.consts.len() {
                    return Err(line.err(format!("constant index {idx} out of sequence")));
                }
                let quoted = line.get(&f, "str")?;
                let inner = quoted
                    .strip_prefix('"')
                    .and_then(|s| s.strip_suffix('"'))
                    .ok_or_else(|| line.err("string constant must be quoted"))?;
                let s = unescape(inner).ok_or_else(|| line.err("bad escape in string constant"))?;
                u.consts.push(Const::Str(s));
            }
            ".end" => {
                let u = current
                    .take()
                    .ok_or_else(|| line.err("`.end` without `.func`"))?;
                units.push(u);
            }
            w if w.starts_with(|c: char| c.is_ascii_digit()) => {
                let u = current
                    .as_mut()
                    .ok_or_else(|| line.err("instruction outside a function"))?;
                let i = parse_instr(&line, u.code.len())?;
                u.code.push(i);
                lines_of.last_mut().expect("unit").push(no);
            }
            w => return Err(line.err(format!("unknown directive `{w}`"))),
        }
    }
    if current.is_some() {
        return Err(BcParseError {
            line: last_line,
            message: "missing `.end`".into(),
        });
    }
    match declared_globals {
        None => {
            return Err(BcParseError {
                line: 1,
                message: "missing `.globals`".into(),
            })
        }
        Some(n) if n != globals.len() => {
            return Err(BcParseError {
                line: 1,
                message: format!("`.globals n={n}` but {} `.gdecl` lines", globals.len()),
            })
        }
        _ => {}
    }
    let program = BcProgram { units, globals };
    if let Err(violations) = validate_rtl(&program) {
        let v = &violations[0];
        let line = match (v.instr, program.units.iter().position(|u| u.id.0 == v.func)) {
            (Some(i), Some(u)) => lines_of[u].get(i).copied().unwrap_or(unit_lines[u]),
            (None, Some(u)) => unit_lines[u],
            _ => 1,
        };
        return Err(BcParseError {
            line,
            message: v.message.clone(),
        });
    }
    Ok(program)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bytecode::instr::global_slot;

    fn tiny() -> RtlProgram {
        BcProgram {
            globals: vec!["argv".into(), "x".into()],
            units: vec![BcUnit {
                id: FuncId(0),
                name: "main".into(),
                arity: 0,
                nslots: 3,
                hints: vec![],
                code: vec![
                    RtlInstr::ldf(0, 0.1),
                    RtlInstr::lds(1, 0),
                    RtlInstr::ld(global_slot(1), 0),
                    RtlInstr::ret(2),
                ],
                vdecls: vec![("y".into(), 0)],
                consts: vec![Const::Str("a \"q\"\n\u{1}".into())],
            }],
        }
    }

    #[test]
    fn fixed_point_and_equality() {
        let p = tiny();
        let text = dump_text(&p);
        let back = parse_text(&text).unwrap();
        assert_eq!(back, p);
        assert_eq!(dump_text(&back), text);
        assert!(
            text.contains("  0 ldf op1=0 imm=1.0000000000000001e-1\n"),
            "{text}"
        );
    }

    #[test]
    fn unknown_opcode() {
        let mut text = dump_text(&tiny());
        text = text.replace("  3 ret op1=2", "  3 frobnicate op1=0");
        let e = parse_text(&text).unwrap_err();
        assert!(e.message.contains("unknown opcode"), "{e}");
        assert_eq!(e.line, 10);
    }

    #[test]
    fn pc_out_of_range() {
        let text = dump_text(&tiny()).replace("  3 ret op1=2", "  3 jmp pc=9");
        let e = parse_text(&text).unwrap_err();
        assert!(e.message.contains("pc"), "{e}");
        assert_eq!(e.line, 10);
    }

    #[test]
    fn missing_and_unexpected_fields() {
        let t = dump_text(&tiny());
        assert!(parse_text(&t.replace(" op2=0\n", "\n"))
            .unwrap_err()
            .message
            .contains("missing field"));
        assert!(parse_text(&t.replace("ret op1=2", "ret op1=2 pc=1"))
            .unwrap_err()
            .message
            .contains("unexpected field"));
        // `next=` is informational and ignored.
        assert_eq!(
            parse_text(&t.replace("ret op1=2", "ret next=4 op1=2")).unwrap(),
            tiny()
        );
    }

    #[test]
    fn slot_out_of_range() {
        let t = dump_text(&tiny()).replace("ret op1=2", "ret op1=3");
        assert!(parse_text(&t).unwrap_err().message.contains("slot"));
    }

    #[test]
    fn split_keeps_quoted_strings() {
        assert_eq!(
            split_words(r#".const idx=0 str="a b \" c""#).unwrap(),
            vec![".const", "idx=0", r#"str="a b \" c""#]
        );
    }
}
