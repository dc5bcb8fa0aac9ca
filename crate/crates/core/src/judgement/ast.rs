use std::collections::BTreeSet;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Lit(u64),
    Var(String),
    /// Register, index reduced mod 8.
    Reg(Box<Term>),
    /// Memory word, address reduced mod 256.
    Mem(Box<Term>),
    Pc,
    Tick,
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    Mul(Box<Term>, Box<Term>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RelOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl RelOp {
    pub const ALL: [RelOp; 6] = [
        RelOp::Eq,
        RelOp::Ne,
        RelOp::Lt,
        RelOp::Le,
        RelOp::Gt,
        RelOp::Ge,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            RelOp::Eq => "=",
            RelOp::Ne => "!=",
            RelOp::Lt => "<",
            RelOp::Le => "<=",
            RelOp::Gt => ">",
            RelOp::Ge => ">=",
        }
    }

    pub fn holds(self, a: u64, b: u64) -> bool {
        match self {
            RelOp::Eq => a == b,
            RelOp::Ne => a != b,
            RelOp::Lt => a < b,
            RelOp::Le => a <= b,
            RelOp::Gt => a > b,
            RelOp::Ge => a >= b,
        }
    }
}

/// A proposition. Quantifiers are always bounded by an explicit inclusive
/// range and bind their variable in the body only.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Prop {
    True,
    False,
    Cmp(Term, RelOp, Term),
    Not(Box<Prop>),
    And(Box<Prop>, Box<Prop>),
    Or(Box<Prop>, Box<Prop>),
    Implies(Box<Prop>, Box<Prop>),
    Forall(Quantified),
    Exists(Quantified),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Quantified {
    pub var: String,
    pub lo: Term,
    pub hi: Term,
    pub body: Box<Prop>,
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn reg(index: u64) -> Term {
        Term::Reg(Box::new(Term::Lit(index)))
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Lit(_) | Term::Pc | Term::Tick => {}
            Term::Reg(t) | Term::Mem(t) => t.collect_vars(out),
            Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Term::Lit(_) | Term::Var(_) | Term::Pc | Term::Tick => 1,
            Term::Reg(t) | Term::Mem(t) => 1 + t.depth(),
            Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) => 1 + a.depth().max(b.depth()),
        }
    }
}

impl Prop {
    pub fn cmp(a: Term, op: RelOp, b: Term) -> Prop {
        Prop::Cmp(a, op, b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(p: Prop) -> Prop {
        Prop::Not(Box::new(p))
    }

    pub fn and(a: Prop, b: Prop) -> Prop {
        Prop::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Prop, b: Prop) -> Prop {
        Prop::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Prop, b: Prop) -> Prop {
        Prop::Implies(Box::new(a), Box::new(b))
    }

    pub fn forall(var: &str, lo: Term, hi: Term, body: Prop) -> Prop {
        Prop::Forall(Quantified {
            var: var.to_string(),
            lo,
            hi,
            body: Box::new(body),
        })
    }

    pub fn exists(var: &str, lo: Term, hi: Term, body: Prop) -> Prop {
        Prop::Exists(Quantified {
            var: var.to_string(),
            lo,
            hi,
            body: Box::new(body),
        })
    }

    /// Variables occurring free, in name order.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut out);
        out
    }

    fn collect_free(&self, out: &mut BTreeSet<String>) {
        match self {
            Prop::True | Prop::False => {}
            Prop::Cmp(a, _, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Prop::Not(p) => p.collect_free(out),
            Prop::And(a, b) | Prop::Or(a, b) | Prop::Implies(a, b) => {
                a.collect_free(out);
                b.collect_free(out);
            }
            Prop::Forall(q) | Prop::Exists(q) => {
                q.lo.collect_vars(out);
                q.hi.collect_vars(out);
                let mut inner = BTreeSet::new();
                q.body.collect_free(&mut inner);
                inner.remove(&q.var);
                out.extend(inner);
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }

    /// Nesting depth counting both proposition and term nodes.
    pub fn depth(&self) -> usize {
        match self {
            Prop::True | Prop::False => 1,
            Prop::Cmp(a, _, b) => 1 + a.depth().max(b.depth()),
            Prop::Not(p) => 1 + p.depth(),
            Prop::And(a, b) | Prop::Or(a, b) | Prop::Implies(a, b) => 1 + a.depth().max(b.depth()),
            Prop::Forall(q) | Prop::Exists(q) => {
                1 + q.lo.depth().max(q.hi.depth()).max(q.body.depth())
            }
        }
    }
}

// Printing inserts only the parentheses the grammar needs, so the output
// parses back to the same tree.

fn fmt_term(t: &Term, ctx: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let (prec, open) = match t {
        Term::Add(..) | Term::Sub(..) => (1, ctx > 1),
        Term::Mul(..) => (2, ctx > 2),
        _ => (3, false),
    };
    if open {
        f.write_str("(")?;
    }
    match t {
        Term::Lit(n) => write!(f, "{n}")?,
        Term::Var(v) => f.write_str(v)?,
        Term::Pc => f.write_str("pc")?,
        Term::Tick => f.write_str("tick")?,
        Term::Reg(i) => {
            f.write_str("reg(")?;
            fmt_term(i, 0, f)?;
            f.write_str(")")?;
        }
        Term::Mem(a) => {
            f.write_str("mem(")?;
            fmt_term(a, 0, f)?;
            f.write_str(")")?;
        }
        Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) => {
            let op = match t {
                Term::Add(..) => " + ",
                Term::Sub(..) => " - ",
                _ => " * ",
            };
            fmt_term(a, prec, f)?;
            f.write_str(op)?;
            fmt_term(b, prec + 1, f)?;
        }
    }
    if open {
        f.write_str(")")?;
    }
    Ok(())
}

fn fmt_prop(p: &Prop, ctx: u8, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let open = match p {
        Prop::Implies(..) => ctx > 1,
        Prop::Or(..) => ctx > 2,
        Prop::And(..) => ctx > 3,
        Prop::Forall(_) | Prop::Exists(_) => ctx > 0,
        _ => false,
    };
    if open {
        f.write_str("(")?;
    }
    match p {
        Prop::True => f.write_str("true")?,
        Prop::False => f.write_str("false")?,
        Prop::Cmp(a, op, b) => {
            fmt_term(a, 0, f)?;
            write!(f, " {} ", op.symbol())?;
            fmt_term(b, 0, f)?;
        }
        Prop::Not(q) => {
            f.write_str("!")?;
            fmt_prop(q, 4, f)?;
        }
        Prop::And(a, b) => {
            fmt_prop(a, 3, f)?;
            f.write_str(" & ")?;
            fmt_prop(b, 4, f)?;
        }
        Prop::Or(a, b) => {
            fmt_prop(a, 2, f)?;
            f.write_str(" | ")?;
            fmt_prop(b, 3, f)?;
        }
        Prop::Implies(a, b) => {
            fmt_prop(a, 2, f)?;
            f.write_str(" -> ")?;
            fmt_prop(b, 1, f)?;
        }
        Prop::Forall(q) | Prop::Exists(q) => {
            let kw = if matches!(p, Prop::Forall(_)) {
                "forall"
            } else {
                "exists"
            };
            write!(f, "{kw} {} in ", q.var)?;
            fmt_term(&q.lo, 0, f)?;
            f.write_str("..")?;
            fmt_term(&q.hi, 0, f)?;
            f.write_str(" . ")?;
            fmt_prop(&q.body, 0, f)?;
        }
    }
    if open {
        f.write_str(")")?;
    }
    Ok(())
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_term(self, 0, f)
    }
}

impl fmt::Display for Prop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_prop(self, 0, f)
    }
}
