use std::fmt;

use super::{CompileError, Pos};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    IntLit,
    FloatLit,
    StrLit,
    Keyword,
    Operator,
    Punct,
    Eof,
}

/// A lexical token. For string literals `text` holds the decoded contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: u32,
    pub col: u32,
}

impl Token {
    pub fn pos(&self) -> Pos {
        Pos::new(self.line, self.col)
    }

    pub fn is(&self, kind: TokenKind, text: &str) -> bool {
        self.kind == kind && self.text == text
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TokenKind::Eof => write!(f, "end of input"),
            TokenKind::StrLit => write!(f, "string literal"),
            _ => write!(f, "`{}`", self.text),
        }
    }
}

pub const KEYWORDS: &[&str] = &[
    "var", "val", "fun", "if", "else", "for", "while", "break", "continue", "return", "nil", "tab",
];

// Longest match first.
const OPERATORS: &[&str] = &[
    "++", "--", "+=", "-=", "*=", "/=", "%=", "==", "!=", "<=", ">=", "&&", "||", "+", "-", "*",
    "/", "%", "<", ">", "=", "!", "?", ":",
];

const PUNCT: &[char] = &['(', ')', '[', ']', '{', '}', ',', ';'];

struct Lexer<'a> {
    src: &'a str,
    chars: Vec<(usize, char)>,
    i: usize,
    line: u32,
    col: u32,
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.i).map(|&(_, c)| c)
    }

    fn peek_at(&self, k: usize) -> Option<char> {
        self.chars.get(self.i + k).map(|&(_, c)| c)
    }

    fn offset(&self) -> usize {
        self.chars.get(self.i).map_or(self.src.len(), |&(o, _)| o)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.i += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn error(&self, line: u32, col: u32, msg: impl Into<String>) -> CompileError {
        CompileError::Lex {
            pos: Pos::new(line, col),
            message: msg.into(),
        }
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') if self.peek_at(1) == Some('/') => {
                    while let Some(c) = self.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => return,
            }
        }
    }

    fn number(&mut self, line: u32, col: u32) -> Result<Token, CompileError> {
        let start = self.offset();
        let mut is_float = false;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.bump();
        }
        if self.peek() == Some('.') && matches!(self.peek_at(1), Some(c) if c.is_ascii_digit()) {
            is_float = true;
            self.bump();
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.bump();
            }
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let sign = matches!(self.peek_at(1), Some('+' | '-'));
            let digit_at = if sign { 2 } else { 1 };
            if matches!(self.peek_at(digit_at), Some(c) if c.is_ascii_digit()) {
                is_float = true;
                for _ in 0..digit_at {
                    self.bump();
                }
                while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                    self.bump();
                }
            }
        }
        let text = &self.src[start..self.offset()];
        if is_float {
            match text.parse::<f64>() {
                Ok(v) if v.is_finite() => {}
                _ => {
                    return Err(self.error(
                        line,
                        col,
                        format!("float literal `{text}` out of range"),
                    ))
                }
            }
        } else if text.parse::<i64>().is_err() {
            return Err(self.error(line, col, format!("integer literal `{text}` out of range")));
        }
        let kind = if is_float {
            TokenKind::FloatLit
        } else {
            TokenKind::IntLit
        };
        Ok(Token {
            kind,
            text: text.to_string(),
            line,
            col,
        })
    }

    fn string(&mut self, line: u32, col: u32) -> Result<Token, CompileError> {
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => {
                    return Err(self.error(line, col, "unterminated string literal"))
                }
                Some('"') => break,
                Some('\\') => {
                    let (l, c) = (self.line, self.col);
                    let e = match self.bump() {
                        Some('n') => '\n',
                        Some('t') => '\t',
                        Some('r') => '\r',
                        Some('0') => '\0',
                        Some('\\') => '\\',
                        Some('"') => '"',
                        None => return Err(self.error(line, col, "unterminated string literal")),
                        Some(other) => {
                            return Err(self.error(l, c, format!("unknown escape `\\{other}`")))
                        }
                    };
                    out.push(e);
                }
                Some(c) => out.push(c),
            }
        }
        Ok(Token {
            kind: TokenKind::StrLit,
            text: out,
            line,
            col,
        })
    }
}

/// Splits source text into tokens. The returned list always ends with a
/// single `Eof` token.
pub fn tokenize(source: &str) -> Result<Vec<Token>, CompileError> {
    let mut lx = Lexer {
        src: source,
        chars: source.char_indices().collect(),
        i: 0,
        line: 1,
        col: 1,
    };
    let mut out = Vec::new();
    loop {
        lx.skip_trivia();
        let (line, col) = (lx.line, lx.col);
        let Some(c) = lx.peek() else {
            out.push(Token {
                kind: TokenKind::Eof,
                text: String::new(),
                line,
                col,
            });
            return Ok(out);
        };
        if c.is_ascii_digit() {
            out.push(lx.number(line, col)?);
        } else if c == '"' {
            out.push(lx.string(line, col)?);
        } else if c.is_alphabetic() || c == '_' {
            let start = lx.offset();
            while matches!(lx.peek(), Some(c) if c.is_alphanumeric() || c == '_') {
                lx.bump();
            }
            let text = &source[start..lx.offset()];
            let kind = if KEYWORDS.contains(&text) {
                TokenKind::Keyword
            } else {
                TokenKind::Ident
            };
            out.push(Token {
                kind,
                text: text.to_string(),
                line,
                col,
            });
        } else if PUNCT.contains(&c) {
            lx.bump();
            out.push(Token {
                kind: TokenKind::Punct,
                text: c.to_string(),
                line,
                col,
            });
        } else {
            let rest = &source[lx.offset()..];
            let Some(op) = OPERATORS.iter().find(|op| rest.starts_with(**op)) else {
                return Err(lx.error(line, col, format!("illegal character `{c}`")));
            };
            for _ in 0..op.chars().count() {
                lx.bump();
            }
            out.push(Token {
                kind: TokenKind::Operator,
                text: op.to_string(),
                line,
                col,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<(TokenKind, String)> {
        tokenize(src)
            .unwrap()
            .into_iter()
            .map(|t| (t.kind, t.text))
            .collect()
    }

    #[test]
    fn val_declaration() {
        use TokenKind::*;
        assert_eq!(
            kinds("val x = 8191;"),
            vec![
                (Keyword, "val".into()),
                (Ident, "x".into()),
                (Operator, "=".into()),
                (IntLit, "8191".into()),
                (Punct, ";".into()),
                (Eof, "".into()),
            ]
        );
    }

    #[test]
    fn empty_input_is_just_eof() {
        let toks = tokenize("").unwrap();
        assert_eq!(toks.len(), 1);
        assert_eq!(toks[0].kind, TokenKind::Eof);
    }

    #[test]
    fn float_literal_matches_host_parser() {
        let toks = tokenize("1.5e3").unwrap();
        assert_eq!(toks[0].kind, TokenKind::FloatLit);
        assert_eq!(
            toks[0].text.parse::<f64>().unwrap(),
            "1500".parse::<f64>().unwrap()
        );
        assert_eq!(toks.len(), 2);
    }

    #[test]
    fn comments_are_skipped_and_positions_tracked() {
        let toks = tokenize("// hi\n  x += 1; // tail\ny").unwrap();
        assert_eq!(toks[0].text, "x");
        assert_eq!((toks[0].line, toks[0].col), (2, 3));
        assert_eq!(toks[1].text, "+=");
        assert_eq!(toks[4].text, "y");
        assert_eq!(toks[4].line, 3);
    }

    #[test]
    fn unterminated_string_reports_position() {
        match tokenize("x = \"abc") {
            Err(CompileError::Lex { pos, .. }) => assert_eq!(pos, Pos::new(1, 5)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn illegal_character() {
        let err = tokenize("a @ b").unwrap_err();
        assert!(err.to_string().contains("illegal character"));
    }

    #[test]
    fn int_overflow_is_lex_error() {
        assert!(tokenize("9223372036854775807").is_ok());
        assert!(tokenize("9223372036854775808").is_err());
    }

    #[test]
    fn string_escapes() {
        let toks = tokenize(r#""a\n\"b\\""#).unwrap();
        assert_eq!(toks[0].text, "a\n\"b\\");
    }

    #[test]
    fn dot_without_digit_is_not_float() {
        assert!(tokenize("1.").is_err());
        let toks = tokenize("1e").unwrap();
        assert_eq!(
            (toks[0].kind, toks[1].kind),
            (TokenKind::IntLit, TokenKind::Ident)
        );
    }
}
