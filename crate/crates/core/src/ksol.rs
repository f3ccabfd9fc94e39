//! K-matrix solutions: constant families, spectral extensions and their transformations.

use std::fmt;
use std::str::FromStr;

use crate::check::{evaluate_on_samples, scalar_failure, with_guards, ResidualReport};
use crate::error::{Error, Result};
use crate::expr::{DynScalar as S, Substitution};
use crate::symbols::{Sampler, Symbol, SymbolTable};
use crate::tensor::TensorOp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum KTag {
    Ia,
    IIa,
    Ib,
    IIb,
}

impl KTag {
    pub const ALL: [KTag; 4] = [KTag::Ia, KTag::IIa, KTag::Ib, KTag::IIb];

    pub fn as_str(&self) -> &'static str {
        match self {
            KTag::Ia => "Ia",
            KTag::IIa => "IIa",
            KTag::Ib => "Ib",
            KTag::IIb => "IIb",
        }
    }

    pub fn has_spectral_extension(&self) -> bool {
        matches!(self, KTag::Ib | KTag::IIb)
    }
}

impl fmt::Display for KTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Ia" => Ok(KTag::Ia),
            "IIa" => Ok(KTag::IIa),
            "Ib" => Ok(KTag::Ib),
            "IIb" => Ok(KTag::IIb),
            _ => Err(Error::Parse(format!("unknown K family {s:?}"))),
        }
    }
}

/// Λ_i = σ − λ_i
pub fn cap_lambda(i: usize) -> S {
    S::sigma() - S::lambda(i)
}

/// Λ_ij = σ − λ_i − λ_j
pub fn cap_lambda2(i: usize, j: usize) -> S {
    S::sigma() - S::lambda(i) - S::lambda(j)
}

/// Π_{a≠j} γ/λ_ja
fn gamma_prefactor(n: usize, j: usize) -> S {
    S::product((1..=n).filter(|&a| a != j).map(|a| S::gamma() / S::lambda_diff(j, a)))
}

/// Π_{a≠j} (1 + f/λ_ja)
fn iib_prefactor(n: usize, j: usize, f: &S) -> S {
    S::product((1..=n).filter(|&a| a != j).map(|a| S::one() + f / &S::lambda_diff(j, a)))
}

/// f/(f − λ_ij)·Π_{a≠j}(1 + f/λ_ja) with the factor a = i cancelled against the pole.
fn iib_entry(n: usize, i: usize, j: usize, f: &S) -> S {
    if i == j {
        return iib_prefactor(n, j, f);
    }
    let rest = S::product((1..=n).filter(|&a| a != j && a != i).map(|a| S::one() + f / &S::lambda_diff(j, a)));
    f / &S::lambda_diff(j, i) * rest
}

pub fn k_constant(tag: KTag, n: usize, f: &S) -> TensorOp {
    TensorOp::matrix(n, false, |i, j| match tag {
        KTag::Ia => (f + &S::lambda(i)) / (f + &S::lambda(j)) * gamma_prefactor(n, j),
        KTag::IIa => (f - &cap_lambda2(i, j)) * gamma_prefactor(n, j),
        KTag::Ib => (f + &cap_lambda(j)) / (f + &cap_lambda(i)) * gamma_prefactor(n, j),
        KTag::IIb => iib_entry(n, i, j, f),
    })
}

/// First-order spectral extensions k⁽⁰⁾ + (γ/u)·k⁽¹⁾ of Ib and IIb.
pub fn k_spectral(tag: KTag, n: usize, f: &S) -> Result<TensorOp> {
    let u = S::spec(1);
    match tag {
        KTag::Ib => Ok(TensorOp::matrix(n, true, |i, j| {
            (f + &cap_lambda(j)) * ((f + &cap_lambda(i)).recip() - u.recip()) * gamma_prefactor(n, j)
        })),
        KTag::IIb => Ok(TensorOp::matrix(n, true, |i, j| {
            iib_entry(n, i, j, f) - f / &u * iib_prefactor(n, j, f)
        })),
        _ => Err(Error::Precondition(format!("{tag} has no spectral extension"))),
    }
}

/// k⁽¹⁾ of the spectral extension, normalized as K = k⁽⁰⁾ + (γ/u)·k⁽¹⁾.
pub fn k_first_order(tag: KTag, n: usize, f: &S) -> Result<TensorOp> {
    match tag {
        KTag::Ib => Ok(TensorOp::matrix(n, false, |_, j| {
            -(f + &cap_lambda(j)) * gamma_prefactor(n, j) / S::gamma()
        })),
        KTag::IIb => Ok(TensorOp::matrix(n, false, |_, j| -(f * &iib_prefactor(n, j, f)) / S::gamma())),
        _ => Err(Error::Precondition(format!("{tag} has no spectral extension"))),
    }
}

/// The naive extension (1 + γ/u)·K of a constant solution; not a solution for IIa.
pub fn k_naive(tag: KTag, n: usize, f: &S) -> TensorOp {
    k_constant(tag, n, f).scale(S::one() + S::gamma() / S::spec(1)).with_spectral(&[1])
}

/// (1 + f′/u)·1
pub fn k_diag_spectral(n: usize, fp: &S) -> TensorOp {
    TensorOp::diagonal(n, true, |_| S::one() + fp / &S::spec(1))
}

/// [[1 − f/λ₁₂, f/λ₁₂], [−f/λ₁₂, 1 + f/λ₁₂]]
pub fn khat_n2(f: &S) -> TensorOp {
    let r = f / &S::lambda_diff(1, 2);
    TensorOp::matrix(2, false, |i, j| match (i, j) {
        (1, 1) => S::one() - r.clone(),
        (1, 2) => r.clone(),
        (2, 1) => -r.clone(),
        _ => S::one() + r.clone(),
    })
}

/// Diagonal entries of a materializable diagonal matrix.
fn diagonal_entries(m: &TensorOp) -> Result<Vec<S>> {
    if m.arity() != 1 {
        return Err(Error::Shape("expected a single-slot matrix".into()));
    }
    let entries = m.materialize()?;
    if entries.keys().any(|(r, c)| r != c) {
        return Err(Error::Precondition("matrix is not diagonal".into()));
    }
    Ok((0..m.n()).map(|i| entries.get(&(i, i)).cloned().unwrap_or_else(S::zero)).collect())
}

/// N_ii(λ) N_jj(λ+γh_i) = N_jj(λ) N_ii(λ+γh_j) for all i ≠ j.
pub fn flatness_check(nm: &TensorOp, sampler: &mut Sampler, count: usize) -> Result<ResidualReport> {
    let diag = diagonal_entries(nm)?;
    let n = nm.n();
    let mut pairs = Vec::new();
    for i in 1..=n {
        for j in (1..=n).filter(|&j| j != i) {
            let lhs = &diag[i - 1] * &diag[j - 1].subst(&Substitution::shift_lambda(i, 1));
            let rhs = &diag[j - 1] * &diag[i - 1].subst(&Substitution::shift_lambda(j, 1));
            pairs.push(((i, j), lhs, rhs));
        }
    }
    let mut guards = Vec::new();
    for (_, l, r) in &pairs {
        l.denominators(&mut guards);
        r.denominators(&mut guards);
    }
    let table = SymbolTable::new(n)?;
    let mut report = ResidualReport::new("flatness", "", n, sampler.seed(), count);
    let values = with_guards(sampler, guards, |s| {
        evaluate_on_samples(s, &table, count, |p| {
            pairs.iter().map(|(ij, l, r)| Ok((*ij, l.eval(p)?, r.eval(p)?))).collect::<Result<Vec<_>>>()
        })
    })?;
    for (p, vals) in values {
        for ((i, j), l, r) in vals {
            if l != r {
                report.fail(scalar_failure(&p, serde_json::json!([i, j]), &l, &r));
            }
        }
    }
    Ok(report)
}

/// K·N for a flat diagonal N; non-flat N is rejected.
pub fn apply_flat_diag(k: &TensorOp, nm: &TensorOp, sampler: &mut Sampler) -> Result<TensorOp> {
    let r = flatness_check(nm, sampler, 10)?;
    if !r.pass {
        return Err(Error::Precondition("diagonal matrix is not flat".into()));
    }
    k.mul(nm)
}

/// K with the listed (1-based) columns set to zero.
pub fn zero_columns(k: &TensorOp, cols: &[usize]) -> Result<TensorOp> {
    let n = k.n();
    if cols.is_empty() || cols.len() >= n || cols.iter().any(|&c| c == 0 || c > n) {
        return Err(Error::OutOfRange(format!("columns {cols:?} must be a nonempty proper subset")));
    }
    let nm = TensorOp::diagonal(n, false, |i| S::int(!cols.contains(&i) as i64));
    k.mul(&nm)
}

/// K · Π_{l=1..order} (u/(u − u₀))^l
pub fn shift_poles(k: &TensorOp, order: u32, u0: &S) -> TensorOp {
    let u = S::spec(1);
    let ratio = &u / &(&u - u0);
    let factor = S::product((1..=order).map(|l| ratio.pow(l)));
    k.scale(factor).with_spectral(&[1])
}

/// Ranks of K observed at `count` sampled points.
pub fn rank_profile(k: &TensorOp, sampler: &mut Sampler, count: usize) -> Result<std::collections::BTreeSet<usize>> {
    let table = SymbolTable::new(k.n())?;
    let values = with_guards(sampler, k.denominators(), |s| evaluate_on_samples(s, &table, count, |p| Ok(k.eval(p)?.rank())))?;
    Ok(values.into_iter().map(|(_, r)| r).collect())
}

/// A seeded random K(u; λ) with entries affine in λ and in 1/u; generically not a solution.
pub fn random_k(n: usize, seed: u64) -> Result<TensorOp> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut c = || -> Result<S> { Ok(S::constant(crate::rational::Rational::new(rng.gen_range(-9..=9), rng.gen_range(1..=5))?)) };
    let mut entries = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        let mut terms = vec![c()?, c()? * S::gamma() / S::spec(1)];
        for a in 1..=n {
            terms.push(c()? * S::lambda(a));
        }
        entries.push(S::sum(terms));
    }
    Ok(TensorOp::matrix(n, true, |i, j| entries[(i - 1) * n + (j - 1)].clone()))
}

/// The default free constant symbol f.
pub fn f_sym() -> S {
    S::sym(Symbol::F)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::Rational;
    use crate::symbols::EvalPoint;

    fn pt() -> EvalPoint {
        let mut p = EvalPoint::simple(2);
        p.lambda = vec![Rational::from_int(3), Rational::from_int(1)];
        p.f = Rational::from_int(2);
        p.spec[0] = Rational::from_int(5);
        p
    }

    #[test]
    fn iib_n2_example() {
        let k = k_constant(KTag::IIb, 2, &f_sym()).eval(&pt()).unwrap();
        let want: Vec<Vec<Rational>> =
            vec![vec![2.into(), (-1).into()], vec![1.into(), 0.into()]];
        assert_eq!(k.to_dense(), want);
    }

    #[test]
    fn ib_spectral_example() {
        let mut p = pt();
        p.f = Rational::one();
        let k = k_spectral(KTag::Ib, 2, &f_sym()).unwrap().eval(&p).unwrap();
        assert_eq!(k.get(0, 0), Rational::new(3, 10).unwrap());
    }

    #[test]
    fn flatness_examples() {
        let mut s = Sampler::new(2);
        let id = TensorOp::diagonal(2, false, |_| S::one());
        assert!(flatness_check(&TensorOp::diagonal(3, false, |_| S::one()), &mut s, 5).unwrap().pass);
        assert!(flatness_check(&TensorOp::diagonal(3, false, S::lambda), &mut s, 5).unwrap().pass);
        let bad = TensorOp::diagonal(2, false, |_| S::lambda(1));
        assert!(!flatness_check(&bad, &mut s, 5).unwrap().pass);
        assert!(apply_flat_diag(&id, &bad.clone(), &mut s).is_err());
    }

    #[test]
    fn zero_columns_rejects_full_set() {
        let k = k_constant(KTag::IIb, 2, &f_sym());
        assert!(zero_columns(&k, &[1, 2]).is_err());
        assert!(zero_columns(&k, &[]).is_err());
        let z = zero_columns(&k, &[2]).unwrap().eval(&pt()).unwrap();
        assert!(z.get(0, 1).is_zero() && z.get(1, 1).is_zero());
    }

    #[test]
    fn pole_shift_with_zero_u0_is_identity() {
        let k = k_diag_spectral(2, &S::sym(Symbol::FPrime));
        let shifted = shift_poles(&k, 1, &S::zero());
        let mut p = pt();
        p.fprime = Rational::new(7, 3).unwrap();
        assert_eq!(k.eval(&p).unwrap(), shifted.eval(&p).unwrap());
    }

    #[test]
    fn khat_is_inverse_of_iib() {
        let k = k_constant(KTag::IIb, 2, &f_sym());
        let prod = k.mul(&khat_n2(&f_sym())).unwrap().eval(&pt()).unwrap();
        assert_eq!(prod, crate::matrix::RatMatrix::identity(2));
    }
}
