//! Difference operators Σ c_v(λ)·e^{γ v·∂λ} and matrices with such entries.

use std::collections::BTreeMap;
use std::fmt;

use crate::check::{evaluate_on_samples, scalar_failure, with_guards, ResidualReport};
use crate::error::{Error, Result};
use crate::expr::{DynScalar as S, Substitution};
use crate::symbols::{Sampler, Symbol, SymbolTable};
use crate::tensor::{multi_index, TensorOp};
use crate::verify::lambda_free;

/// Terms keyed by shift vector v, meaning c(λ)·f(λ + γv).
#[derive(Clone)]
pub struct DiffOperator {
    n: usize,
    terms: BTreeMap<Vec<i64>, S>,
}

impl fmt::Debug for DiffOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (v, c) in &self.terms {
            m.entry(v, &c.to_string());
        }
        m.finish()
    }
}

fn shift_subst(v: &[i64]) -> Substitution {
    Substitution::new(
        v.iter()
            .enumerate()
            .filter(|(_, &k)| k != 0)
            .map(|(i, &k)| (Symbol::Lambda(i + 1), S::lambda(i + 1) + S::int(k) * S::gamma()))
            .collect(),
    )
}

impl DiffOperator {
    pub fn zero(n: usize) -> Self {
        DiffOperator { n, terms: BTreeMap::new() }
    }

    pub fn scalar(n: usize, c: S) -> Self {
        DiffOperator::zero(n).with_term(vec![0; n], c)
    }

    pub fn identity(n: usize) -> Self {
        DiffOperator::scalar(n, S::one())
    }

    /// S_i: λ_i → λ_i + γ
    pub fn shift(n: usize, i: usize) -> Self {
        let mut v = vec![0; n];
        v[i - 1] = 1;
        DiffOperator::zero(n).with_term(v, S::one())
    }

    pub fn with_term(mut self, v: Vec<i64>, c: S) -> Self {
        self.add_term(v, c);
        self
    }

    fn add_term(&mut self, v: Vec<i64>, c: S) {
        assert_eq!(v.len(), self.n, "shift vector length");
        if c.is_zero_const() {
            return;
        }
        let merged = match self.terms.remove(&v) {
            Some(old) => old + c,
            None => c,
        };
        if !merged.is_zero_const() {
            self.terms.insert(v, merged);
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &BTreeMap<Vec<i64>, S> {
        &self.terms
    }

    pub fn add(&self, o: &DiffOperator) -> DiffOperator {
        let mut out = self.clone();
        for (v, c) in &o.terms {
            out.add_term(v.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> DiffOperator {
        DiffOperator { n: self.n, terms: self.terms.iter().map(|(v, c)| (v.clone(), -c.clone())).collect() }
    }

    pub fn sub(&self, o: &DiffOperator) -> DiffOperator {
        self.add(&o.neg())
    }

    /// Left multiplication by a function of λ.
    pub fn scale(&self, s: &S) -> DiffOperator {
        let mut out = DiffOperator::zero(self.n);
        for (v, c) in &self.terms {
            out.add_term(v.clone(), s * c);
        }
        out
    }

    /// (c₁, v₁)·(c₂, v₂) = (c₁·c₂[λ → λ + γv₁], v₁ + v₂)
    pub fn compose(&self, o: &DiffOperator) -> DiffOperator {
        let mut out = DiffOperator::zero(self.n);
        for (v1, c1) in &self.terms {
            let s = shift_subst(v1);
            for (v2, c2) in &o.terms {
                let v: Vec<i64> = v1.iter().zip(v2).map(|(a, b)| a + b).collect();
                out.add_term(v, c1 * &c2.subst(&s));
            }
        }
        out
    }

    pub fn commutator(&self, o: &DiffOperator) -> DiffOperator {
        self.compose(o).sub(&o.compose(self))
    }

    /// A copy with a substitution applied to every coefficient.
    pub fn subst(&self, s: &Substitution) -> DiffOperator {
        DiffOperator { n: self.n, terms: self.terms.iter().map(|(v, c)| (v.clone(), c.subst(s))).collect() }
    }
}

/// Every merged coefficient vanishes at the sampled points.
pub fn diff_is_zero(d: &DiffOperator, identity: &str, sampler: &mut Sampler, count: usize) -> Result<ResidualReport> {
    let table = SymbolTable::new(d.n)?;
    let mut report = ResidualReport::new(identity, "", d.n, sampler.seed(), count);
    if d.terms.is_empty() {
        return Ok(report);
    }
    let mut guards = Vec::new();
    for c in d.terms.values() {
        c.denominators(&mut guards);
    }
    let terms: Vec<(&Vec<i64>, &S)> = d.terms.iter().collect();
    let values = with_guards(sampler, guards, |s| {
        evaluate_on_samples(s, &table, count, |p| terms.iter().map(|(_, c)| c.eval(p)).collect::<Result<Vec<_>>>())
    })?;
    let zero = crate::rational::Rational::zero();
    for (p, vals) in values {
        for ((v, _), x) in terms.iter().zip(vals) {
            if !x.is_zero() {
                report.fail(scalar_failure(&p, serde_json::json!(v), &x, &zero));
            }
        }
    }
    Ok(report)
}

/// Tr_V τ⁰ = Σ_i (b⁻¹Q⁰b)_ii·S_i with Q⁰ bound to spectral parameter `spec`.
pub fn transfer_trace(b: &TensorOp, q0: &TensorOp, spec: usize) -> Result<DiffOperator> {
    if b.arity() != 1 || q0.arity() != 1 || b.n() != q0.n() {
        return Err(Error::Shape("transfer trace needs two n×n matrices".into()));
    }
    if !lambda_free(q0, &mut Sampler::new(0), 4)? {
        return Err(Error::Precondition("Q⁰ depends on λ".into()));
    }
    let n = b.n();
    let q = q0.subst(&Substitution::rename_spec(&[(1, spec)]));
    let m = TensorOp::product(&[b.inverse(), q, b.clone()])?;
    let mut out = DiffOperator::zero(n);
    for i in 1..=n {
        let mut v = vec![0; n];
        v[i - 1] = 1;
        out.add_term(v, S::entry(m.clone(), i - 1, i - 1));
    }
    Ok(out)
}

/// Operator on V^{⊗N} with difference-operator entries.
#[derive(Clone, Debug)]
pub struct OpMatrix {
    arity: usize,
    n: usize,
    entries: BTreeMap<(usize, usize), DiffOperator>,
}

impl OpMatrix {
    fn dim(&self) -> usize {
        self.n.pow(self.arity as u32)
    }

    /// A ℂ-number matrix; entries are read lazily from the operator.
    pub fn from_tensor(op: &TensorOp) -> OpMatrix {
        let (n, arity) = (op.n(), op.arity());
        let dim = op.dim();
        let mut entries = BTreeMap::new();
        let sparse = op.materialize().ok();
        for r in 0..dim {
            for c in 0..dim {
                let coeff = match &sparse {
                    Some(m) => match m.get(&(r, c)) {
                        Some(e) => e.clone(),
                        None => continue,
                    },
                    None => S::entry(op.clone(), r, c),
                };
                entries.insert((r, c), DiffOperator::scalar(n, coeff));
            }
        }
        OpMatrix { arity, n, entries }
    }

    /// e^{∂_k} = Σ_i e_ii (in slot k) · S_i
    pub fn e_partial(slot: usize, arity: usize, n: usize) -> OpMatrix {
        let dim = n.pow(arity as u32);
        let entries = (0..dim)
            .map(|r| {
                let i = multi_index(r, n, arity)[slot - 1];
                ((r, r), DiffOperator::shift(n, i))
            })
            .collect();
        OpMatrix { arity, n, entries }
    }

    pub fn mul(&self, o: &OpMatrix) -> Result<OpMatrix> {
        if self.arity != o.arity || self.n != o.n {
            return Err(Error::Shape("operator matrices differ in shape".into()));
        }
        let mut by_row: BTreeMap<usize, Vec<(usize, &DiffOperator)>> = BTreeMap::new();
        for (&(r, c), d) in &o.entries {
            by_row.entry(r).or_default().push((c, d));
        }
        let mut entries: BTreeMap<(usize, usize), DiffOperator> = BTreeMap::new();
        for (&(r, k), a) in &self.entries {
            if let Some(row) = by_row.get(&k) {
                for &(c, b) in row {
                    let prod = a.compose(b);
                    let slot = entries.entry((r, c)).or_insert_with(|| DiffOperator::zero(self.n));
                    *slot = slot.add(&prod);
                }
            }
        }
        entries.retain(|_, d| !d.terms.is_empty());
        Ok(OpMatrix { arity: self.arity, n: self.n, entries })
    }

    pub fn product(ms: &[OpMatrix]) -> Result<OpMatrix> {
        let (first, rest) = ms.split_first().ok_or_else(|| Error::Shape("empty product".into()))?;
        rest.iter().try_fold(first.clone(), |acc, m| acc.mul(m))
    }

    pub fn trace(&self) -> DiffOperator {
        (0..self.dim()).fold(DiffOperator::zero(self.n), |acc, i| match self.entries.get(&(i, i)) {
            Some(d) => acc.add(d),
            None => acc,
        })
    }
}

/// Tr₁₂(M₁e^{∂₁}N₂O₂e^{∂₂}) − Tr₁₂(N₂(h₁)M₁e^{∂₁}O₂e^{∂₂})
pub fn trace_trick_a(m: &TensorOp, nn: &TensorOp, o: &TensorOp, shift_n: bool) -> Result<DiffOperator> {
    let n = m.n();
    let m1 = OpMatrix::from_tensor(&m.embed(&[1], 2)?);
    let n2 = nn.embed(&[2], 2)?;
    let o2 = OpMatrix::from_tensor(&o.embed(&[2], 2)?);
    let (e1, e2) = (OpMatrix::e_partial(1, 2, n), OpMatrix::e_partial(2, 2, n));
    let lhs = OpMatrix::product(&[m1.clone(), e1.clone(), OpMatrix::from_tensor(&n2), o2.clone(), e2.clone()])?;
    let n2s = if shift_n { n2.shift_h(1)? } else { n2 };
    let rhs = OpMatrix::product(&[OpMatrix::from_tensor(&n2s), m1, e1, o2, e2])?;
    Ok(lhs.trace().sub(&rhs.trace()))
}

/// Tr₁₂(D O D⁻¹ e^{∂₁+∂₂}) − Tr₁₂(O e^{∂₁+∂₂})
pub fn trace_trick_b(d: &TensorOp, o: &TensorOp) -> Result<DiffOperator> {
    let n = d.n();
    let e = OpMatrix::e_partial(1, 2, n).mul(&OpMatrix::e_partial(2, 2, n))?;
    let conj = TensorOp::product(&[d.clone(), o.clone(), d.inverse()])?;
    let lhs = OpMatrix::from_tensor(&conj).mul(&e)?;
    let rhs = OpMatrix::from_tensor(o).mul(&e)?;
    Ok(lhs.trace().sub(&rhs.trace()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_rule() {
        let a = DiffOperator::shift(2, 1);
        let b = DiffOperator::scalar(2, S::lambda(1));
        let ab = a.compose(&b);
        let (v, c) = ab.terms().iter().next().unwrap();
        assert_eq!(v, &vec![1, 0]);
        let want = S::lambda(1) + S::gamma();
        let table = SymbolTable::new(2).unwrap();
        for p in Sampler::new(1).points(&table, 5).unwrap() {
            assert_eq!(c.eval(&p).unwrap(), want.eval(&p).unwrap());
        }
    }

    #[test]
    fn self_commutator_vanishes() {
        let d = DiffOperator::shift(2, 1).scale(&S::lambda(2)).add(&DiffOperator::shift(2, 2));
        let r = diff_is_zero(&d.commutator(&d), "c", &mut Sampler::new(1), 3).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn weighted_shifts_do_not_commute() {
        let a = DiffOperator::shift(2, 1).scale(&S::lambda(1)).add(&DiffOperator::shift(2, 2).scale(&S::lambda(2)));
        let b = DiffOperator::shift(2, 1).add(&DiffOperator::shift(2, 2));
        let r = diff_is_zero(&a.commutator(&b), "c", &mut Sampler::new(1), 3).unwrap();
        assert!(!r.pass);
    }

    #[test]
    fn trivial_transfer_trace() {
        let id = TensorOp::identity(1, 3);
        let t = transfer_trace(&id, &id, 1).unwrap();
        let want = (1..=3).fold(DiffOperator::zero(3), |acc, i| acc.add(&DiffOperator::shift(3, i)));
        assert!(diff_is_zero(&t.sub(&want), "t", &mut Sampler::new(2), 3).unwrap().pass);
        let dyn_q = TensorOp::diagonal(3, false, S::lambda);
        assert!(transfer_trace(&id, &dyn_q, 1).is_err());
    }
}
