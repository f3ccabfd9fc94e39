//! Lazily evaluated scalar expressions over the free symbols.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::symbols::{EvalPoint, Symbol};
use crate::tensor::TensorOp;

#[derive(Clone)]
pub struct DynScalar(Arc<Node>);

enum Node {
    Const(Rational),
    Sym(Symbol),
    /// Sum of the current λ values.
    Sigma,
    Add(Vec<DynScalar>),
    Mul(Vec<DynScalar>),
    Neg(DynScalar),
    Div(DynScalar, DynScalar),
    Pow(DynScalar, u32),
    Subst(DynScalar, Substitution),
    /// Entry (row, col) of an operator evaluated at the current point.
    Entry(TensorOp, usize, usize),
}

/// Simultaneous replacement of symbols; replacement values are evaluated at the outer point.
#[derive(Clone, Default)]
pub struct Substitution(Arc<Vec<(Symbol, DynScalar)>>);

impl Substitution {
    pub fn new(pairs: Vec<(Symbol, DynScalar)>) -> Self {
        Substitution(Arc::new(pairs))
    }

    /// λ_j → λ_j + m·γ.
    pub fn shift_lambda(j: usize, m: i64) -> Self {
        Substitution::new(vec![(
            Symbol::Lambda(j),
            DynScalar::lambda(j) + DynScalar::int(m) * DynScalar::gamma(),
        )])
    }

    /// u_k → u_k + m·γ.
    pub fn shift_spec(k: usize, m: i64) -> Self {
        Substitution::new(vec![(
            Symbol::Spec(k),
            DynScalar::spec(k) + DynScalar::int(m) * DynScalar::gamma(),
        )])
    }

    /// Simultaneous renaming of spectral symbols.
    pub fn rename_spec(pairs: &[(usize, usize)]) -> Self {
        Substitution::new(
            pairs
                .iter()
                .filter(|(a, b)| a != b)
                .map(|&(a, b)| (Symbol::Spec(a), DynScalar::spec(b)))
                .collect(),
        )
    }

    pub fn single(s: Symbol, v: DynScalar) -> Self {
        Substitution::new(vec![(s, v)])
    }

    pub fn pairs(&self) -> &[(Symbol, DynScalar)] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn apply(&self, p: &EvalPoint) -> Result<EvalPoint> {
        let mut q = p.clone();
        for (s, v) in self.0.iter() {
            q.set(*s, v.eval(p)?)?;
        }
        Ok(q)
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(s, v)| format!("{s} := {v}")).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

impl DynScalar {
    fn node(n: Node) -> Self {
        DynScalar(Arc::new(n))
    }

    pub fn constant(v: Rational) -> Self {
        DynScalar::node(Node::Const(v))
    }

    pub fn int(v: i64) -> Self {
        DynScalar::constant(Rational::from_int(v))
    }

    pub fn zero() -> Self {
        DynScalar::int(0)
    }

    pub fn one() -> Self {
        DynScalar::int(1)
    }

    pub fn sym(s: Symbol) -> Self {
        DynScalar::node(Node::Sym(s))
    }

    pub fn lambda(i: usize) -> Self {
        DynScalar::sym(Symbol::Lambda(i))
    }

    pub fn gamma() -> Self {
        DynScalar::sym(Symbol::Gamma)
    }

    pub fn spec(k: usize) -> Self {
        DynScalar::sym(Symbol::Spec(k))
    }

    pub fn f() -> Self {
        DynScalar::sym(Symbol::F)
    }

    pub fn sigma() -> Self {
        DynScalar::node(Node::Sigma)
    }

    /// λ_i − λ_j, with the convention λ_ii = 0.
    pub fn lambda_diff(i: usize, j: usize) -> Self {
        if i == j {
            DynScalar::zero()
        } else {
            DynScalar::lambda(i) - DynScalar::lambda(j)
        }
    }

    pub fn entry(op: TensorOp, row: usize, col: usize) -> Self {
        DynScalar::node(Node::Entry(op, row, col))
    }

    pub fn as_const(&self) -> Option<&Rational> {
        match &*self.0 {
            Node::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_zero_const(&self) -> bool {
        self.as_const().is_some_and(|v| v.is_zero())
    }

    fn is_one_const(&self) -> bool {
        self.as_const().is_some_and(|v| v.is_one())
    }

    pub fn pow(&self, e: u32) -> Self {
        match e {
            0 => DynScalar::one(),
            1 => self.clone(),
            _ if self.is_zero_const() => DynScalar::zero(),
            _ => DynScalar::node(Node::Pow(self.clone(), e)),
        }
    }

    pub fn recip(&self) -> Self {
        DynScalar::one() / self.clone()
    }

    pub fn subst(&self, s: &Substitution) -> Self {
        if s.is_empty() || self.as_const().is_some() {
            return self.clone();
        }
        DynScalar::node(Node::Subst(self.clone(), s.clone()))
    }

    pub fn sum(items: impl IntoIterator<Item = DynScalar>) -> Self {
        let mut terms = Vec::new();
        let mut c = Rational::zero();
        for t in items {
            match &*t.0 {
                Node::Const(v) => c += v,
                Node::Add(inner) => terms.extend(inner.iter().cloned()),
                _ => terms.push(t),
            }
        }
        if !c.is_zero() {
            terms.push(DynScalar::constant(c));
        }
        match terms.len() {
            0 => DynScalar::zero(),
            1 => terms.pop().unwrap(),
            _ => DynScalar::node(Node::Add(terms)),
        }
    }

    pub fn product(items: impl IntoIterator<Item = DynScalar>) -> Self {
        let mut factors = Vec::new();
        let mut c = Rational::one();
        for t in items {
            match &*t.0 {
                Node::Const(v) => {
                    if v.is_zero() {
                        return DynScalar::zero();
                    }
                    c *= v;
                }
                Node::Mul(inner) => factors.extend(inner.iter().cloned()),
                _ => factors.push(t),
            }
        }
        if !c.is_one() {
            factors.insert(0, DynScalar::constant(c));
        }
        match factors.len() {
            0 => DynScalar::one(),
            1 => factors.pop().unwrap(),
            _ => DynScalar::node(Node::Mul(factors)),
        }
    }

    pub fn eval(&self, p: &EvalPoint) -> Result<Rational> {
        match &*self.0 {
            Node::Const(v) => Ok(v.clone()),
            Node::Sym(s) => p.get(*s),
            Node::Sigma => Ok(p.sigma()),
            Node::Add(ts) => {
                let mut acc = Rational::zero();
                for t in ts {
                    acc += t.eval(p)?;
                }
                Ok(acc)
            }
            Node::Mul(ts) => {
                let mut acc = Rational::one();
                for t in ts {
                    let v = t.eval(p)?;
                    if v.is_zero() {
                        // Remaining factors must still be finite.
                        for rest in ts {
                            rest.eval(p)?;
                        }
                        return Ok(Rational::zero());
                    }
                    acc *= v;
                }
                Ok(acc)
            }
            Node::Neg(a) => Ok(-a.eval(p)?),
            Node::Div(a, b) => {
                let d = b.eval(p)?;
                if d.is_zero() {
                    return Err(Error::DivisionByZero(b.to_string()));
                }
                a.eval(p)?.checked_div(&d)
            }
            Node::Pow(a, e) => a.eval(p)?.pow(*e as i32),
            Node::Subst(a, s) => a.eval(&s.apply(p)?),
            Node::Entry(op, r, c) => Ok(op.eval(p)?.get(*r, *c)),
        }
    }

    /// Every divisor in the tree, with enclosing substitutions applied.
    pub fn denominators(&self, out: &mut Vec<DynScalar>) {
        self.collect_denoms(&mut |d| out.push(d), &[]);
    }

    pub(crate) fn collect_denoms(&self, out: &mut dyn FnMut(DynScalar), ctx: &[Substitution]) {
        match &*self.0 {
            Node::Const(_) | Node::Sym(_) | Node::Sigma => {}
            Node::Add(ts) | Node::Mul(ts) => ts.iter().for_each(|t| t.collect_denoms(out, ctx)),
            Node::Neg(a) | Node::Pow(a, _) => a.collect_denoms(out, ctx),
            Node::Div(a, b) => {
                out(wrap(b, ctx));
                a.collect_denoms(out, ctx);
                b.collect_denoms(out, ctx);
            }
            Node::Subst(a, s) => {
                for (_, v) in s.pairs() {
                    v.collect_denoms(out, ctx);
                }
                let mut inner = vec![s.clone()];
                inner.extend(ctx.iter().cloned());
                a.collect_denoms(out, &inner);
            }
            Node::Entry(op, _, _) => op.collect_denoms(out, ctx),
        }
    }
}

/// Apply substitutions innermost first.
pub(crate) fn wrap(e: &DynScalar, ctx: &[Substitution]) -> DynScalar {
    ctx.iter().fold(e.clone(), |acc, s| acc.subst(s))
}

impl Add for DynScalar {
    type Output = DynScalar;
    fn add(self, o: DynScalar) -> DynScalar {
        DynScalar::sum([self, o])
    }
}

impl Add for &DynScalar {
    type Output = DynScalar;
    fn add(self, o: &DynScalar) -> DynScalar {
        DynScalar::sum([self.clone(), o.clone()])
    }
}

impl Neg for DynScalar {
    type Output = DynScalar;
    fn neg(self) -> DynScalar {
        match &*self.0 {
            Node::Const(v) => DynScalar::constant(-v),
            Node::Neg(a) => a.clone(),
            _ => DynScalar::node(Node::Neg(self)),
        }
    }
}

impl Neg for &DynScalar {
    type Output = DynScalar;
    fn neg(self) -> DynScalar {
        -self.clone()
    }
}

impl Sub for DynScalar {
    type Output = DynScalar;
    fn sub(self, o: DynScalar) -> DynScalar {
        DynScalar::sum([self, -o])
    }
}

impl Sub for &DynScalar {
    type Output = DynScalar;
    fn sub(self, o: &DynScalar) -> DynScalar {
        DynScalar::sum([self.clone(), -o.clone()])
    }
}

impl Mul for DynScalar {
    type Output = DynScalar;
    fn mul(self, o: DynScalar) -> DynScalar {
        DynScalar::product([self, o])
    }
}

impl Mul for &DynScalar {
    type Output = DynScalar;
    fn mul(self, o: &DynScalar) -> DynScalar {
        DynScalar::product([self.clone(), o.clone()])
    }
}

impl Div for DynScalar {
    type Output = DynScalar;
    fn div(self, o: DynScalar) -> DynScalar {
        if o.is_one_const() || self.is_zero_const() {
            return self;
        }
        if let (Some(a), Some(b)) = (self.as_const(), o.as_const()) {
            if let Ok(v) = a.checked_div(b) {
                return DynScalar::constant(v);
            }
        }
        DynScalar::node(Node::Div(self, o))
    }
}

impl Div for &DynScalar {
    type Output = DynScalar;
    fn div(self, o: &DynScalar) -> DynScalar {
        self.clone() / o.clone()
    }
}

macro_rules! mixed_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr<&DynScalar> for DynScalar {
            type Output = DynScalar;
            fn $m(self, o: &DynScalar) -> DynScalar {
                $tr::$m(self, o.clone())
            }
        }
        impl $tr<DynScalar> for &DynScalar {
            type Output = DynScalar;
            fn $m(self, o: DynScalar) -> DynScalar {
                $tr::$m(self.clone(), o)
            }
        }
    )*};
}

mixed_ops!(Add add, Sub sub, Mul mul, Div div);

impl From<i64> for DynScalar {
    fn from(v: i64) -> Self {
        DynScalar::int(v)
    }
}

impl From<Rational> for DynScalar {
    fn from(v: Rational) -> Self {
        DynScalar::constant(v)
    }
}

impl fmt::Display for DynScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Const(v) => {
                if v.denom().is_one_int() && !v.numer().is_negative_int() {
                    write!(f, "{v}")
                } else {
                    write!(f, "({v})")
                }
            }
            Node::Sym(s) => write!(f, "{s}"),
            Node::Sigma => f.write_str("sigma"),
            Node::Add(ts) => {
                f.write_str("(")?;
                for (i, t) in ts.iter().enumerate() {
                    match (&*t.0, i) {
                        (Node::Neg(a), 0) => write!(f, "-{a}")?,
                        (Node::Neg(a), _) => write!(f, " - {a}")?,
                        (_, 0) => write!(f, "{t}")?,
                        _ => write!(f, " + {t}")?,
                    }
                }
                f.write_str(")")
            }
            Node::Mul(ts) => {
                let parts: Vec<String> = ts.iter().map(|t| t.to_string()).collect();
                write!(f, "({})", parts.join(" * "))
            }
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Div(a, b) => write!(f, "({a} / {b})"),
            Node::Pow(a, e) => write!(f, "({a} ^ {e})"),
            Node::Subst(a, s) => write!(f, "{a}{s}"),
            Node::Entry(_, r, c) => write!(f, "entry({r}, {c})"),
        }
    }
}

impl fmt::Debug for DynScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

trait IntProbe {
    fn is_one_int(&self) -> bool;
    fn is_negative_int(&self) -> bool;
}

impl IntProbe for num::BigInt {
    fn is_one_int(&self) -> bool {
        num::One::is_one(self)
    }
    fn is_negative_int(&self) -> bool {
        num::Signed::is_negative(self)
    }
}

/// Structural dedup by rendering; keeps first occurrence order.
pub fn dedup(exprs: Vec<DynScalar>) -> Vec<DynScalar> {
    let mut seen = BTreeMap::new();
    for e in exprs {
        if e.as_const().is_some() {
            continue;
        }
        seen.entry(e.to_string()).or_insert(e);
    }
    seen.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::{Sampler, SymbolTable};
    use proptest::prelude::*;

    type S = DynScalar;

    fn pt() -> EvalPoint {
        Sampler::new(5).sample_point(&SymbolTable::new(3).unwrap()).unwrap()
    }

    #[test]
    fn constant_folding() {
        assert!((S::zero() * S::lambda(1)).is_zero_const());
        assert_eq!((S::int(2) + S::int(3)).to_string(), "5");
        assert_eq!((S::lambda(1) - S::lambda(2)).to_string(), "(lambda1 - lambda2)");
        assert_eq!((S::one() / S::int(2)).to_string(), "(1/2)");
        assert_eq!(S::lambda_diff(2, 2).to_string(), "0");
    }

    #[test]
    fn sigma_follows_substitution() {
        let p = pt();
        let e = S::sigma().subst(&Substitution::shift_lambda(2, 1));
        assert_eq!(e.eval(&p).unwrap(), &p.sigma() + &p.gamma);
    }

    #[test]
    fn division_by_zero_is_reported() {
        let p = EvalPoint::simple(2).with(Symbol::Lambda(2), Rational::from_int(2)).unwrap();
        let e = S::one() / S::lambda_diff(1, 2);
        assert!(matches!(e.eval(&p), Err(Error::DivisionByZero(_))));
    }

    #[test]
    fn substitution_is_simultaneous() {
        let p = pt();
        let swap = Substitution::rename_spec(&[(1, 2), (2, 1)]);
        let e = (S::spec(1) - S::spec(2)).subst(&swap);
        assert_eq!(e.eval(&p).unwrap(), &p.spec[1] - &p.spec[0]);
    }

    #[test]
    fn denominators_carry_substitutions() {
        let e = (S::one() / S::lambda(1)).subst(&Substitution::shift_lambda(1, 1));
        let mut d = Vec::new();
        e.denominators(&mut d);
        assert_eq!(d.len(), 1);
        let p = pt();
        assert_eq!(d[0].eval(&p).unwrap(), &p.lambda[0] + &p.gamma);
    }

    proptest! {
        #[test]
        fn lambda_shifts_commute(i in 1usize..4, j in 1usize..4, seed in 0u64..1000) {
            prop_assume!(i != j);
            let p = Sampler::new(seed).sample_point(&SymbolTable::new(3).unwrap()).unwrap();
            let e = S::lambda(1) * S::lambda(2) / (S::lambda(3) + S::sigma());
            let a = e.subst(&Substitution::shift_lambda(i, 1)).subst(&Substitution::shift_lambda(j, 1));
            let b = e.subst(&Substitution::shift_lambda(j, 1)).subst(&Substitution::shift_lambda(i, 1));
            prop_assert_eq!(a.eval(&p).ok(), b.eval(&p).ok());
        }
    }
}
