//! Lossless lexer. Every byte of the input ends up either in a token's
//! `text` or in the whitespace trivia recorded on the token that follows
//! it, so `detokenize` reproduces the source exactly.

use super::{FrontendError, Result};

/// Reserved statement and declaration keywords. Words that only matter
/// in one spot (`KIND`, `NONE`, the intent names) stay ordinary
/// identifiers so they remain usable as variable names.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kw {
    Subroutine,
    End,
    Do,
    EndDo,
    If,
    Then,
    Else,
    EndIf,
    Call,
    Return,
    Integer,
    Real,
    Dimension,
    Intent,
    Parameter,
    Implicit,
}

impl Kw {
    fn from_ident(s: &str) -> Option<Kw> {
        let lower = s.to_ascii_lowercase();
        Some(match lower.as_str() {
            "subroutine" => Kw::Subroutine,
            "end" => Kw::End,
            "do" => Kw::Do,
            "enddo" => Kw::EndDo,
            "if" => Kw::If,
            "then" => Kw::Then,
            "else" => Kw::Else,
            "endif" => Kw::EndIf,
            "call" => Kw::Call,
            "return" => Kw::Return,
            "integer" => Kw::Integer,
            "real" => Kw::Real,
            "dimension" => Kw::Dimension,
            "intent" => Kw::Intent,
            "parameter" => Kw::Parameter,
            "implicit" => Kw::Implicit,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OpTok {
    Plus,
    Minus,
    Star,
    Slash,
    Pow,
    Assign,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PunctTok {
    LParen,
    RParen,
    Comma,
    Colon,
    DoubleColon,
    Amp,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Keyword(Kw),
    Ident,
    Int,
    Real,
    Op(OpTok),
    Punct(PunctTok),
    Comment,
    Eol,
}

/// One lexed token. `leading` holds the whitespace that separated it
/// from the previous token; `text` is the verbatim source slice with the
/// original casing.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub leading: String,
    pub line: u32,
    pub column: u32,
}

/// Reassemble the exact input from a token sequence.
pub fn detokenize(tokens: &[Token]) -> String {
    let mut out = String::new();
    for t in tokens {
        out.push_str(&t.leading);
        out.push_str(&t.text);
    }
    out
}

struct Scanner<'a> {
    src: &'a [u8],
    pos: usize,
    line: u32,
    col: u32,
}

impl<'a> Scanner<'a> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<u8> {
        self.src.get(self.pos + off).copied()
    }

    fn bump(&mut self) -> u8 {
        let b = self.src[self.pos];
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        b
    }
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_ident_cont(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Lex a full source file into tokens, comments and end-of-line markers
/// included.
pub fn tokenize(source: &str) -> Result<Vec<Token>> {
    let mut sc = Scanner {
        src: source.as_bytes(),
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut tokens = Vec::new();
    let mut leading = String::new();

    while let Some(b) = sc.peek() {
        if b == b' ' || b == b'\t' || b == b'\r' {
            leading.push(sc.bump() as char);
            continue;
        }
        let (line, column) = (sc.line, sc.col);
        let start = sc.pos;
        let kind = match b {
            b'\n' => {
                sc.bump();
                TokenKind::Eol
            }
            b'!' => {
                while let Some(c) = sc.peek() {
                    if c == b'\n' {
                        break;
                    }
                    sc.bump();
                }
                TokenKind::Comment
            }
            b'(' => {
                sc.bump();
                TokenKind::Punct(PunctTok::LParen)
            }
            b')' => {
                sc.bump();
                TokenKind::Punct(PunctTok::RParen)
            }
            b',' => {
                sc.bump();
                TokenKind::Punct(PunctTok::Comma)
            }
            b'&' => {
                sc.bump();
                TokenKind::Punct(PunctTok::Amp)
            }
            b':' => {
                sc.bump();
                if sc.peek() == Some(b':') {
                    sc.bump();
                    TokenKind::Punct(PunctTok::DoubleColon)
                } else {
                    TokenKind::Punct(PunctTok::Colon)
                }
            }
            b'+' => {
                sc.bump();
                TokenKind::Op(OpTok::Plus)
            }
            b'-' => {
                sc.bump();
                TokenKind::Op(OpTok::Minus)
            }
            b'*' => {
                sc.bump();
                if sc.peek() == Some(b'*') {
                    sc.bump();
                    TokenKind::Op(OpTok::Pow)
                } else {
                    TokenKind::Op(OpTok::Star)
                }
            }
            b'/' => {
                sc.bump();
                if sc.peek() == Some(b'=') {
                    sc.bump();
                    TokenKind::Op(OpTok::Ne)
                } else {
                    TokenKind::Op(OpTok::Slash)
                }
            }
            b'=' => {
                sc.bump();
                if sc.peek() == Some(b'=') {
                    sc.bump();
                    TokenKind::Op(OpTok::Eq)
                } else {
                    TokenKind::Op(OpTok::Assign)
                }
            }
            b'<' => {
                sc.bump();
                if sc.peek() == Some(b'=') {
                    sc.bump();
                    TokenKind::Op(OpTok::Le)
                } else {
                    TokenKind::Op(OpTok::Lt)
                }
            }
            b'>' => {
                sc.bump();
                if sc.peek() == Some(b'=') {
                    sc.bump();
                    TokenKind::Op(OpTok::Ge)
                } else {
                    TokenKind::Op(OpTok::Gt)
                }
            }
            b'.' => {
                // Dotted logical operator or a real literal like `.5`.
                if sc.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
                    lex_number(&mut sc)
                } else {
                    lex_dotted_op(&mut sc, line, column)?
                }
            }
            b if b.is_ascii_digit() => lex_number(&mut sc),
            b if is_ident_start(b) => {
                sc.bump();
                while sc.peek().is_some_and(is_ident_cont) {
                    sc.bump();
                }
                let text = &source[start..sc.pos];
                match Kw::from_ident(text) {
                    Some(kw) => TokenKind::Keyword(kw),
                    None => TokenKind::Ident,
                }
            }
            other => {
                return Err(FrontendError::Lex {
                    line,
                    column,
                    message: format!("unrecognized character '{}'", other as char),
                });
            }
        };
        tokens.push(Token {
            kind,
            text: source[start..sc.pos].to_string(),
            leading: std::mem::take(&mut leading),
            line,
            column,
        });
    }
    // Trailing whitespace with no token after it: pin it to a final EOL
    // token if there is one, else synthesize nothing and accept the loss
    // only for whitespace-only files.
    if !leading.is_empty() {
        if let Some(last) = tokens.last_mut() {
            last.text.push_str(&leading);
        } else {
            tokens.push(Token {
                kind: TokenKind::Eol,
                text: leading,
                leading: String::new(),
                line: 1,
                column: 1,
            });
        }
    }
    Ok(tokens)
}

fn lex_dotted_op(sc: &mut Scanner, line: u32, column: u32) -> Result<TokenKind> {
    let start = sc.pos;
    sc.bump(); // leading '.'
    while sc.peek().is_some_and(|c| c.is_ascii_alphabetic()) {
        sc.bump();
    }
    if sc.peek() == Some(b'.') {
        sc.bump();
        let word = std::str::from_utf8(&sc.src[start + 1..sc.pos - 1])
            .unwrap()
            .to_ascii_lowercase();
        return match word.as_str() {
            "and" => Ok(TokenKind::Op(OpTok::And)),
            "or" => Ok(TokenKind::Op(OpTok::Or)),
            "not" => Ok(TokenKind::Op(OpTok::Not)),
            other => Err(FrontendError::Lex {
                line,
                column,
                message: format!("unknown dotted operator '.{other}.'"),
            }),
        };
    }
    Err(FrontendError::Lex {
        line,
        column,
        message: "stray '.'".to_string(),
    })
}

/// Integer or real literal. A literal is real if it contains a decimal
/// point or an exponent letter (`e` or `d`, any case).
fn lex_number(sc: &mut Scanner) -> TokenKind {
    let mut is_real = false;
    while sc.peek().is_some_and(|c| c.is_ascii_digit()) {
        sc.bump();
    }
    if sc.peek() == Some(b'.') {
        // Don't swallow the dot of a following `.AND.` style operator.
        let next = sc.peek_at(1);
        if !next.is_some_and(|c| c.is_ascii_alphabetic()) {
            is_real = true;
            sc.bump();
            while sc.peek().is_some_and(|c| c.is_ascii_digit()) {
                sc.bump();
            }
        }
    }
    if sc
        .peek()
        .is_some_and(|c| matches!(c, b'e' | b'E' | b'd' | b'D'))
    {
        let mut off = 1;
        if sc.peek_at(off).is_some_and(|c| c == b'+' || c == b'-') {
            off += 1;
        }
        if sc.peek_at(off).is_some_and(|c| c.is_ascii_digit()) {
            is_real = true;
            sc.bump();
            if sc.peek().is_some_and(|c| c == b'+' || c == b'-') {
                sc.bump();
            }
            while sc.peek().is_some_and(|c| c.is_ascii_digit()) {
                sc.bump();
            }
        }
    }
    if is_real {
        TokenKind::Real
    } else {
        TokenKind::Int
    }
}
