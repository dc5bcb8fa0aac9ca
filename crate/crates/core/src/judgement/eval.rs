use std::fmt;

use super::ast::{Prop, Quantified, Term};
use crate::vm::{VmState, MEM_WORDS, NUM_REGS};

/// Largest number of values a single quantifier may range over.
pub const MAX_QUANTIFIER_RANGE: u64 = 65536;

/// A two-valued verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Yes,
    No,
}

impl Verdict {
    pub fn as_bool(self) -> bool {
        self == Verdict::Yes
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Yes => "yes",
            Verdict::No => "no",
        }
    }
}

impl From<bool> for Verdict {
    fn from(b: bool) -> Verdict {
        if b {
            Verdict::Yes
        } else {
            Verdict::No
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("free variable {0:?}")]
    FreeVariable(String),
    #[error(
        "quantifier over {var:?} ranges over {lo}..{hi}, more than {MAX_QUANTIFIER_RANGE} values"
    )]
    QuantifierRangeTooLarge { var: String, lo: u64, hi: u64 },
}

/// Replaces free occurrences of `var` by the literal `value`.
pub fn subst(prop: &Prop, var: &str, value: u64) -> Prop {
    match prop {
        Prop::True => Prop::True,
        Prop::False => Prop::False,
        Prop::Cmp(a, op, b) => Prop::Cmp(subst_term(a, var, value), *op, subst_term(b, var, value)),
        Prop::Not(p) => Prop::not(subst(p, var, value)),
        Prop::And(a, b) => Prop::and(subst(a, var, value), subst(b, var, value)),
        Prop::Or(a, b) => Prop::or(subst(a, var, value), subst(b, var, value)),
        Prop::Implies(a, b) => Prop::implies(subst(a, var, value), subst(b, var, value)),
        Prop::Forall(q) => Prop::Forall(subst_quantified(q, var, value)),
        Prop::Exists(q) => Prop::Exists(subst_quantified(q, var, value)),
    }
}

fn subst_quantified(q: &Quantified, var: &str, value: u64) -> Quantified {
    Quantified {
        var: q.var.clone(),
        lo: subst_term(&q.lo, var, value),
        hi: subst_term(&q.hi, var, value),
        body: if q.var == var {
            q.body.clone()
        } else {
            Box::new(subst(&q.body, var, value))
        },
    }
}

pub fn subst_term(t: &Term, var: &str, value: u64) -> Term {
    match t {
        Term::Var(v) if v == var => Term::Lit(value),
        Term::Lit(_) | Term::Var(_) | Term::Pc | Term::Tick => t.clone(),
        Term::Reg(i) => Term::Reg(Box::new(subst_term(i, var, value))),
        Term::Mem(a) => Term::Mem(Box::new(subst_term(a, var, value))),
        Term::Add(a, b) => Term::Add(
            Box::new(subst_term(a, var, value)),
            Box::new(subst_term(b, var, value)),
        ),
        Term::Sub(a, b) => Term::Sub(
            Box::new(subst_term(a, var, value)),
            Box::new(subst_term(b, var, value)),
        ),
        Term::Mul(a, b) => Term::Mul(
            Box::new(subst_term(a, var, value)),
            Box::new(subst_term(b, var, value)),
        ),
    }
}

/// Variable bindings, innermost last.
pub type Env = Vec<(String, u64)>;

fn lookup(env: &[(String, u64)], name: &str) -> Option<u64> {
    env.iter().rev().find(|(n, _)| n == name).map(|&(_, v)| v)
}

pub fn eval_term(t: &Term, state: &VmState, env: &[(String, u64)]) -> Result<u64, EvalError> {
    Ok(match t {
        Term::Lit(n) => *n,
        Term::Var(v) => lookup(env, v).ok_or_else(|| EvalError::FreeVariable(v.clone()))?,
        Term::Reg(i) => state.regs[(eval_term(i, state, env)? % NUM_REGS as u64) as usize],
        Term::Mem(a) => state.mem[(eval_term(a, state, env)? % MEM_WORDS as u64) as usize],
        Term::Pc => state.pc as u64,
        Term::Tick => state.tick,
        Term::Add(a, b) => eval_term(a, state, env)?.wrapping_add(eval_term(b, state, env)?),
        Term::Sub(a, b) => eval_term(a, state, env)?.wrapping_sub(eval_term(b, state, env)?),
        Term::Mul(a, b) => eval_term(a, state, env)?.wrapping_mul(eval_term(b, state, env)?),
    })
}

fn eval_in(prop: &Prop, state: &VmState, env: &mut Env) -> Result<bool, EvalError> {
    Ok(match prop {
        Prop::True => true,
        Prop::False => false,
        Prop::Cmp(a, op, b) => op.holds(eval_term(a, state, env)?, eval_term(b, state, env)?),
        Prop::Not(p) => !eval_in(p, state, env)?,
        Prop::And(a, b) => eval_in(a, state, env)? && eval_in(b, state, env)?,
        Prop::Or(a, b) => eval_in(a, state, env)? || eval_in(b, state, env)?,
        Prop::Implies(a, b) => !eval_in(a, state, env)? || eval_in(b, state, env)?,
        Prop::Forall(q) => eval_quantifier(q, true, state, env)?,
        Prop::Exists(q) => eval_quantifier(q, false, state, env)?,
    })
}

fn eval_quantifier(
    q: &Quantified,
    universal: bool,
    state: &VmState,
    env: &mut Env,
) -> Result<bool, EvalError> {
    let lo = eval_term(&q.lo, state, env)?;
    let hi = eval_term(&q.hi, state, env)?;
    if lo > hi {
        return Ok(universal);
    }
    if hi - lo >= MAX_QUANTIFIER_RANGE {
        return Err(EvalError::QuantifierRangeTooLarge {
            var: q.var.clone(),
            lo,
            hi,
        });
    }
    for value in lo..=hi {
        env.push((q.var.clone(), value));
        let holds = eval_in(&q.body, state, env);
        env.pop();
        if holds? != universal {
            return Ok(!universal);
        }
    }
    Ok(universal)
}

/// Evaluates `prop` with free variables bound by `env`.
///
/// Free variables are rejected before evaluation starts. Connectives
/// short-circuit, so a quantifier whose range is too large is only reported
/// when evaluation reaches it.
pub fn evaluate_with(
    prop: &Prop,
    state: &VmState,
    env: &[(String, u64)],
) -> Result<Verdict, EvalError> {
    if let Some(v) = prop
        .free_vars()
        .into_iter()
        .find(|v| lookup(env, v).is_none())
    {
        return Err(EvalError::FreeVariable(v));
    }
    let mut env = env.to_vec();
    eval_in(prop, state, &mut env).map(Verdict::from)
}

/// Evaluates a closed proposition against a machine state.
pub fn evaluate(prop: &Prop, state: &VmState) -> Result<Verdict, EvalError> {
    evaluate_with(prop, state, &[])
}
