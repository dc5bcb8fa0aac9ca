//! Recursive-descent parser for propositions.
//!
//! ```text
//! prop  := or ("->" prop)?
//! or    := and ("|" and)*
//! and   := not ("&" not)*
//! not   := "!" not | atom
//! atom  := "(" prop ")" | "true" | "false" | quant | cmp
//! quant := ("forall"|"exists") IDENT "in" term ".." term "." prop
//! cmp   := term ("="|"!="|"<"|"<="|">"|">=") term
//! term  := factor (("+"|"-") factor)*
//! factor:= prim ("*" prim)*
//! prim  := NAT | IDENT | "reg(" term ")" | "mem(" term ")" | "pc" | "tick" | "(" term ")"
//! ```
//!
//! A leading `(` is first tried as a parenthesized proposition and, failing
//! that, as the start of a comparison.

use super::ast::{Prop, RelOp, Term};

const MAX_NESTING: usize = 256;

const KEYWORDS: [&str; 9] = [
    "true", "false", "forall", "exists", "in", "reg", "mem", "pc", "tick",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("syntax error at byte {position}: {message}")]
pub struct SyntaxError {
    pub position: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Nat(u64),
    Ident(String),
    LParen,
    RParen,
    Dot,
    DotDot,
    Plus,
    Minus,
    Star,
    Bang,
    Amp,
    Pipe,
    Arrow,
    Rel(RelOp),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Nat(n) => format!("number {n}"),
            Tok::Ident(s) => format!("{s:?}"),
            Tok::End => "end of input".to_string(),
            other => format!("{other:?}"),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, SyntaxError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |position: usize, message: String| SyntaxError { position, message };
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let two = bytes.get(i..i + 2);
        let tok = match c {
            b'0'..=b'9' => {
                let hex = two == Some(b"0x".as_slice()) || two == Some(b"0X".as_slice());
                let (digits_start, radix) = if hex { (i + 2, 16) } else { (i, 10) };
                let mut j = digits_start;
                while j < bytes.len() && (bytes[j] as char).is_digit(radix) {
                    j += 1;
                }
                let value = u64::from_str_radix(&text[digits_start..j], radix)
                    .map_err(|_| err(start, format!("bad number {:?}", &text[start..j])))?;
                i = j;
                Tok::Nat(value)
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                let word = text[i..j].to_string();
                i = j;
                Tok::Ident(word)
            }
            _ => {
                let (tok, len) = match (c, two) {
                    (_, Some(b"->")) => (Tok::Arrow, 2),
                    (_, Some(b"..")) => (Tok::DotDot, 2),
                    (_, Some(b"!=")) => (Tok::Rel(RelOp::Ne), 2),
                    (_, Some(b"<=")) => (Tok::Rel(RelOp::Le), 2),
                    (_, Some(b">=")) => (Tok::Rel(RelOp::Ge), 2),
                    (b'(', _) => (Tok::LParen, 1),
                    (b')', _) => (Tok::RParen, 1),
                    (b'.', _) => (Tok::Dot, 1),
                    (b'+', _) => (Tok::Plus, 1),
                    (b'-', _) => (Tok::Minus, 1),
                    (b'*', _) => (Tok::Star, 1),
                    (b'!', _) => (Tok::Bang, 1),
                    (b'&', _) => (Tok::Amp, 1),
                    (b'|', _) => (Tok::Pipe, 1),
                    (b'=', _) => (Tok::Rel(RelOp::Eq), 1),
                    (b'<', _) => (Tok::Rel(RelOp::Lt), 1),
                    (b'>', _) => (Tok::Rel(RelOp::Gt), 1),
                    _ => {
                        let ch = text[i..].chars().next().unwrap_or('?');
                        return Err(err(i, format!("unexpected character {ch:?}")));
                    }
                };
                i += len;
                tok
            }
        };
        out.push((tok, start));
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    depth: usize,
}

type PResult<T> = Result<T, SyntaxError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(SyntaxError {
            position: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.fail(format!("expected {what}, found {}", self.peek().describe()))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(w) if w == kw)
    }

    fn enter(&mut self) -> PResult<()> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return self.fail("nesting too deep");
        }
        Ok(())
    }

    fn prop(&mut self) -> PResult<Prop> {
        self.enter()?;
        let lhs = self.or()?;
        let p = if *self.peek() == Tok::Arrow {
            self.bump();
            Prop::implies(lhs, self.prop()?)
        } else {
            lhs
        };
        self.depth -= 1;
        Ok(p)
    }

    fn or(&mut self) -> PResult<Prop> {
        let mut p = self.and()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            p = Prop::or(p, self.and()?);
        }
        Ok(p)
    }

    fn and(&mut self) -> PResult<Prop> {
        let mut p = self.not()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            p = Prop::and(p, self.not()?);
        }
        Ok(p)
    }

    fn not(&mut self) -> PResult<Prop> {
        if *self.peek() == Tok::Bang {
            self.bump();
            self.enter()?;
            let inner = self.not()?;
            self.depth -= 1;
            return Ok(Prop::not(inner));
        }
        self.atom()
    }

    fn atom(&mut self) -> PResult<Prop> {
        if *self.peek() == Tok::LParen {
            let save = (self.pos, self.depth);
            self.bump();
            let grouped = self.prop().and_then(|p| {
                self.expect(Tok::RParen, "')'")?;
                Ok(p)
            });
            match grouped {
                Ok(p) if !self.continues_term() => return Ok(p),
                Ok(_) => {
                    (self.pos, self.depth) = save;
                    return self.cmp();
                }
                Err(first) => {
                    (self.pos, self.depth) = save;
                    return self.cmp().map_err(|second| {
                        if second.position >= first.position {
                            second
                        } else {
                            first
                        }
                    });
                }
            }
        }
        if self.is_keyword("true") {
            self.bump();
            return Ok(Prop::True);
        }
        if self.is_keyword("false") {
            self.bump();
            return Ok(Prop::False);
        }
        if self.is_keyword("forall") || self.is_keyword("exists") {
            return self.quant();
        }
        self.cmp()
    }

    /// After a parenthesized group, does the input continue as a term?
    fn continues_term(&self) -> bool {
        matches!(
            self.peek(),
            Tok::Rel(_) | Tok::Plus | Tok::Minus | Tok::Star
        )
    }

    fn quant(&mut self) -> PResult<Prop> {
        let universal = self.is_keyword("forall");
        self.bump();
        let var = match self.peek().clone() {
            Tok::Ident(name) if !KEYWORDS.contains(&name.as_str()) => {
                self.bump();
                name
            }
            other => {
                return self.fail(format!(
                    "expected variable name, found {}",
                    other.describe()
                ))
            }
        };
        if !self.is_keyword("in") {
            return self.fail("quantifier needs a range: expected 'in'");
        }
        self.bump();
        let lo = self.term()?;
        self.expect(Tok::DotDot, "'..'")?;
        let hi = self.term()?;
        self.expect(Tok::Dot, "'.'")?;
        let body = self.prop()?;
        Ok(if universal {
            Prop::forall(&var, lo, hi, body)
        } else {
            Prop::exists(&var, lo, hi, body)
        })
    }

    fn cmp(&mut self) -> PResult<Prop> {
        let lhs = self.term()?;
        let op = match self.peek() {
            Tok::Rel(op) => *op,
            other => return self.fail(format!("expected comparison, found {}", other.describe())),
        };
        self.bump();
        let rhs = self.term()?;
        Ok(Prop::cmp(lhs, op, rhs))
    }

    fn term(&mut self) -> PResult<Term> {
        let mut t = self.factor()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    t = Term::Add(Box::new(t), Box::new(self.factor()?));
                }
                Tok::Minus => {
                    self.bump();
                    t = Term::Sub(Box::new(t), Box::new(self.factor()?));
                }
                _ => return Ok(t),
            }
        }
    }

    fn factor(&mut self) -> PResult<Term> {
        let mut t = self.prim()?;
        while *self.peek() == Tok::Star {
            self.bump();
            t = Term::Mul(Box::new(t), Box::new(self.prim()?));
        }
        Ok(t)
    }

    fn prim(&mut self) -> PResult<Term> {
        self.enter()?;
        let t = match self.peek().clone() {
            Tok::Nat(n) => {
                self.bump();
                Term::Lit(n)
            }
            Tok::LParen => {
                self.bump();
                let t = self.term()?;
                self.expect(Tok::RParen, "')'")?;
                t
            }
            Tok::Ident(word) => match word.as_str() {
                "pc" => {
                    self.bump();
                    Term::Pc
                }
                "tick" => {
                    self.bump();
                    Term::Tick
                }
                "reg" | "mem" => {
                    self.bump();
                    self.expect(Tok::LParen, "'('")?;
                    let inner = self.term()?;
                    self.expect(Tok::RParen, "')'")?;
                    if word == "reg" {
                        Term::Reg(Box::new(inner))
                    } else {
                        Term::Mem(Box::new(inner))
                    }
                }
                w if KEYWORDS.contains(&w) => {
                    return self.fail(format!("keyword {w:?} cannot be used as a term"))
                }
                _ => {
                    self.bump();
                    Term::Var(word)
                }
            },
            other => return self.fail(format!("expected a term, found {}", other.describe())),
        };
        self.depth -= 1;
        Ok(t)
    }
}

pub fn parse_prop(text: &str) -> Result<Prop, SyntaxError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        depth: 0,
    };
    let prop = p.prop()?;
    if *p.peek() != Tok::End {
        return p.fail(format!(
            "unexpected {} after proposition",
            p.peek().describe()
        ));
    }
    Ok(prop)
}

/// Whether `name` can be used as a variable.
pub fn is_variable_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !KEYWORDS.contains(&name)
}
