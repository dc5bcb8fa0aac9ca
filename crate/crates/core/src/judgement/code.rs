//! Canonical numeric coding of propositions.
//!
//! A proposition is serialized in prefix order, one tag byte per node,
//! literals as minimal LEB128 varints, names as a varint length followed by
//! UTF-8 bytes. The code is that byte string read as a big-endian natural
//! number. No tag is zero, so the leading byte is never zero and the byte
//! string is recovered exactly from the number.

use std::fmt;

use num_bigint::BigUint;

use super::ast::{Prop, Quantified, RelOp, Term};

const P_TRUE: u8 = 0x01;
const P_FALSE: u8 = 0x02;
const P_CMP: u8 = 0x03;
const P_NOT: u8 = 0x04;
const P_AND: u8 = 0x05;
const P_OR: u8 = 0x06;
const P_IMPLIES: u8 = 0x07;
const P_FORALL: u8 = 0x08;
const P_EXISTS: u8 = 0x09;

const T_LIT: u8 = 0x10;
const T_VAR: u8 = 0x11;
const T_REG: u8 = 0x12;
const T_MEM: u8 = 0x13;
const T_PC: u8 = 0x14;
const T_TICK: u8 = 0x15;
const T_ADD: u8 = 0x16;
const T_SUB: u8 = 0x17;
const T_MUL: u8 = 0x18;

const MAX_DECODE_DEPTH: usize = 1024;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PropCode(pub BigUint);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed proposition code: {0}")]
pub struct MalformedCode(pub String);

impl PropCode {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.to_bytes_be()
    }

    pub fn from_bytes(bytes: &[u8]) -> PropCode {
        PropCode(BigUint::from_bytes_be(bytes))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(text: &str) -> Result<PropCode, MalformedCode> {
        hex::decode(text)
            .map(|b| PropCode::from_bytes(&b))
            .map_err(|e| MalformedCode(format!("bad hex: {e}")))
    }
}

impl fmt::Display for PropCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn relop_byte(op: RelOp) -> u8 {
    match op {
        RelOp::Eq => 1,
        RelOp::Ne => 2,
        RelOp::Lt => 3,
        RelOp::Le => 4,
        RelOp::Gt => 5,
        RelOp::Ge => 6,
    }
}

fn put_varint(out: &mut Vec<u8>, mut n: u64) {
    loop {
        let byte = (n & 0x7f) as u8;
        n >>= 7;
        if n == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

fn put_name(out: &mut Vec<u8>, name: &str) {
    put_varint(out, name.len() as u64);
    out.extend_from_slice(name.as_bytes());
}

fn put_term(out: &mut Vec<u8>, t: &Term) {
    match t {
        Term::Lit(n) => {
            out.push(T_LIT);
            put_varint(out, *n);
        }
        Term::Var(v) => {
            out.push(T_VAR);
            put_name(out, v);
        }
        Term::Reg(i) => {
            out.push(T_REG);
            put_term(out, i);
        }
        Term::Mem(a) => {
            out.push(T_MEM);
            put_term(out, a);
        }
        Term::Pc => out.push(T_PC),
        Term::Tick => out.push(T_TICK),
        Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) => {
            out.push(match t {
                Term::Add(..) => T_ADD,
                Term::Sub(..) => T_SUB,
                _ => T_MUL,
            });
            put_term(out, a);
            put_term(out, b);
        }
    }
}

fn put_prop(out: &mut Vec<u8>, p: &Prop) {
    match p {
        Prop::True => out.push(P_TRUE),
        Prop::False => out.push(P_FALSE),
        Prop::Cmp(a, op, b) => {
            out.push(P_CMP);
            out.push(relop_byte(*op));
            put_term(out, a);
            put_term(out, b);
        }
        Prop::Not(q) => {
            out.push(P_NOT);
            put_prop(out, q);
        }
        Prop::And(a, b) | Prop::Or(a, b) | Prop::Implies(a, b) => {
            out.push(match p {
                Prop::And(..) => P_AND,
                Prop::Or(..) => P_OR,
                _ => P_IMPLIES,
            });
            put_prop(out, a);
            put_prop(out, b);
        }
        Prop::Forall(q) | Prop::Exists(q) => {
            out.push(if matches!(p, Prop::Forall(_)) {
                P_FORALL
            } else {
                P_EXISTS
            });
            put_name(out, &q.var);
            put_term(out, &q.lo);
            put_term(out, &q.hi);
            put_prop(out, &q.body);
        }
    }
}

/// The canonical byte serialization underlying the code.
pub fn canonical_bytes(prop: &Prop) -> Vec<u8> {
    let mut out = Vec::new();
    put_prop(&mut out, prop);
    out
}

pub fn encode(prop: &Prop) -> PropCode {
    PropCode::from_bytes(&canonical_bytes(prop))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    depth: usize,
}

type DResult<T> = Result<T, MalformedCode>;

impl Reader<'_> {
    fn malformed<T>(&self, what: &str) -> DResult<T> {
        Err(MalformedCode(format!("{what} at byte {}", self.pos)))
    }

    fn byte(&mut self) -> DResult<u8> {
        match self.bytes.get(self.pos) {
            Some(&b) => {
                self.pos += 1;
                Ok(b)
            }
            None => self.malformed("truncated"),
        }
    }

    fn varint(&mut self) -> DResult<u64> {
        let mut value: u64 = 0;
        let mut shift = 0u32;
        loop {
            let b = self.byte()?;
            let chunk = (b & 0x7f) as u64;
            if shift == 63 && chunk > 1 || shift > 63 {
                return self.malformed("varint overflow");
            }
            value |= chunk << shift;
            if b & 0x80 == 0 {
                if b == 0 && shift > 0 {
                    return self.malformed("non-minimal varint");
                }
                return Ok(value);
            }
            shift += 7;
        }
    }

    fn name(&mut self) -> DResult<String> {
        let len = self.varint()? as usize;
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return self.malformed("truncated name");
        };
        let s = std::str::from_utf8(&self.bytes[self.pos..end])
            .map_err(|_| MalformedCode(format!("name is not UTF-8 at byte {}", self.pos)))?
            .to_string();
        if !super::parse::is_variable_name(&s) {
            return self.malformed("invalid variable name");
        }
        self.pos = end;
        Ok(s)
    }

    fn enter(&mut self) -> DResult<()> {
        self.depth += 1;
        if self.depth > MAX_DECODE_DEPTH {
            return self.malformed("nesting too deep");
        }
        Ok(())
    }

    fn term(&mut self) -> DResult<Term> {
        self.enter()?;
        let tag = self.byte()?;
        let t = match tag {
            T_LIT => Term::Lit(self.varint()?),
            T_VAR => Term::Var(self.name()?),
            T_REG => Term::Reg(Box::new(self.term()?)),
            T_MEM => Term::Mem(Box::new(self.term()?)),
            T_PC => Term::Pc,
            T_TICK => Term::Tick,
            T_ADD | T_SUB | T_MUL => {
                let a = Box::new(self.term()?);
                let b = Box::new(self.term()?);
                match tag {
                    T_ADD => Term::Add(a, b),
                    T_SUB => Term::Sub(a, b),
                    _ => Term::Mul(a, b),
                }
            }
            _ => return self.malformed(&format!("unknown term tag {tag:#04x}")),
        };
        self.depth -= 1;
        Ok(t)
    }

    fn prop(&mut self) -> DResult<Prop> {
        self.enter()?;
        let tag = self.byte()?;
        let p = match tag {
            P_TRUE => Prop::True,
            P_FALSE => Prop::False,
            P_CMP => {
                let op = match self.byte()? {
                    1 => RelOp::Eq,
                    2 => RelOp::Ne,
                    3 => RelOp::Lt,
                    4 => RelOp::Le,
                    5 => RelOp::Gt,
                    6 => RelOp::Ge,
                    _ => return self.malformed("unknown relation"),
                };
                let a = self.term()?;
                let b = self.term()?;
                Prop::Cmp(a, op, b)
            }
            P_NOT => Prop::not(self.prop()?),
            P_AND | P_OR | P_IMPLIES => {
                let a = self.prop()?;
                let b = self.prop()?;
                match tag {
                    P_AND => Prop::and(a, b),
                    P_OR => Prop::or(a, b),
                    _ => Prop::implies(a, b),
                }
            }
            P_FORALL | P_EXISTS => {
                let q = Quantified {
                    var: self.name()?,
                    lo: self.term()?,
                    hi: self.term()?,
                    body: Box::new(self.prop()?),
                };
                if tag == P_FORALL {
                    Prop::Forall(q)
                } else {
                    Prop::Exists(q)
                }
            }
            _ => return self.malformed(&format!("unknown proposition tag {tag:#04x}")),
        };
        self.depth -= 1;
        Ok(p)
    }
}

pub fn decode(code: &PropCode) -> Result<Prop, MalformedCode> {
    let bytes = code.to_bytes();
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
        depth: 0,
    };
    let p = r.prop()?;
    if r.pos != bytes.len() {
        return r.malformed("trailing bytes");
    }
    Ok(p)
}
