//! Exact limits along rays u_k = t·u_k⁰, t → ∞, by rational reconstruction in s = 1/t.

use std::collections::BTreeSet;

use crate::check::{evaluate_on_samples, with_guards, Failure, ResidualReport};
use crate::error::{Error, Result};
use crate::linalg::nullspace;
use crate::matrix::RatMatrix;
use crate::rational::Rational;
use crate::symbols::{EvalPoint, Sampler, SymbolTable};
use crate::tensor::{guards_of, multi_index, TensorOp};

const DEGREES: [usize; 11] = [0, 1, 2, 3, 4, 6, 8, 12, 16, 24, 32];
const CHECKS: usize = 3;

/// P(s)/Q(s) with coefficients in ascending powers of s.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalFn {
    pub num: Vec<Rational>,
    pub den: Vec<Rational>,
}

fn horner(c: &[Rational], s: &Rational) -> Rational {
    c.iter().rev().fold(Rational::zero(), |acc, a| &acc * s + a)
}

fn low_order(c: &[Rational]) -> Option<usize> {
    c.iter().position(|a| !a.is_zero())
}

impl RationalFn {
    pub fn eval(&self, s: &Rational) -> Result<Rational> {
        horner(&self.num, s).checked_div(&horner(&self.den, s))
    }

    /// Laurent expansion at s = 0: (lowest exponent, coefficients from there on).
    pub fn laurent(&self, terms: usize) -> Result<(i64, Vec<Rational>)> {
        let dl = low_order(&self.den).ok_or(Error::Singular)?;
        let Some(nl) = low_order(&self.num) else {
            return Ok((0, vec![Rational::zero(); terms]));
        };
        let p = &self.num[nl..];
        let q = &self.den[dl..];
        let mut out = Vec::with_capacity(terms);
        for k in 0..terms {
            let mut acc = p.get(k).cloned().unwrap_or_else(Rational::zero);
            for (j, c) in out.iter().enumerate() {
                if let Some(qk) = q.get(k - j) {
                    acc -= qk * c;
                }
            }
            out.push(acc.checked_div(&q[0])?);
        }
        Ok((nl as i64 - dl as i64, out))
    }

    /// Value at s = 0; a pole there is an error.
    pub fn at_zero(&self) -> Result<Rational> {
        let (e, c) = self.laurent(1)?;
        match e {
            e if e > 0 => Ok(Rational::zero()),
            0 => Ok(c[0].clone()),
            _ if c[0].is_zero() => Ok(Rational::zero()),
            _ => Err(Error::DivisionByZero("limit diverges".into())),
        }
    }
}

/// Samples of a function of s, drawn lazily at s = 1/t for growing integer t.
pub struct Ray<T> {
    f: Box<dyn Fn(&Rational) -> Result<T> + Sync>,
    pts: Vec<(Rational, T)>,
    next_t: i64,
}

impl<T: Clone> Ray<T> {
    pub fn new(f: impl Fn(&Rational) -> Result<T> + Sync + 'static) -> Self {
        Ray { f: Box::new(f), pts: Vec::new(), next_t: 1009 }
    }

    fn ensure(&mut self, count: usize) -> Result<()> {
        let mut misses = 0;
        while self.pts.len() < count {
            let s = Rational::new(1, self.next_t)?;
            self.next_t += 17;
            match (self.f)(&s) {
                Ok(v) => self.pts.push((s, v)),
                Err(Error::DivisionByZero(_) | Error::Singular) => {
                    misses += 1;
                    if misses > 200 {
                        return Err(Error::GuardExhausted { guard: "ray sampling".into(), attempts: misses });
                    }
                }
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    /// Reconstruct the component picked by `get` as a rational function of s.
    pub fn reconstruct(&mut self, get: impl Fn(&T) -> Rational) -> Result<RationalFn> {
        for &d in &DEGREES {
            let m = 2 * d + 2;
            self.ensure(m + CHECKS)?;
            let rows: Vec<Vec<Rational>> = self.pts[..m]
                .iter()
                .map(|(s, v)| {
                    let y = get(v);
                    let mut row = Vec::with_capacity(2 * d + 2);
                    let mut pow = Rational::one();
                    let mut pows = Vec::with_capacity(d + 1);
                    for _ in 0..=d {
                        pows.push(pow.clone());
                        pow = &pow * s;
                    }
                    row.extend(pows.iter().cloned());
                    row.extend(pows.iter().map(|q| -(&y * q)));
                    row
                })
                .collect();
            let ns = nullspace(&rows, 2 * d + 2);
            let Some(v) = ns.first() else { continue };
            let cand = RationalFn { num: v[..=d].to_vec(), den: v[d + 1..].to_vec() };
            if cand.den.iter().all(Rational::is_zero) {
                continue;
            }
            let ok = self.pts[m..m + CHECKS].iter().all(|(s, val)| matches!(cand.eval(s), Ok(x) if x == get(val)));
            if ok {
                return Ok(cand);
            }
        }
        Err(Error::Precondition("degree bound exceeded in rational reconstruction".into()))
    }
}

/// Ray through `p` with the listed (1-based) spectral slots scaled by t = 1/s.
pub fn op_ray(op: &TensorOp, p: &EvalPoint, slots: &[usize]) -> Ray<RatMatrix> {
    let op = op.clone();
    let p = p.clone();
    let slots = slots.to_vec();
    Ray::new(move |s| {
        let mut q = p.clone();
        for &k in &slots {
            q.spec[k - 1] = p.spec[k - 1].checked_div(s)?;
        }
        op.eval(&q)
    })
}

/// Entrywise limit of `op` along the ray through `p`.
pub fn matrix_limit(op: &TensorOp, p: &EvalPoint, slots: &[usize]) -> Result<RatMatrix> {
    let mut ray = op_ray(op, p, slots);
    ray.ensure(2 * 8 + 2 + CHECKS)?;
    let support: BTreeSet<(usize, usize)> =
        ray.pts.iter().flat_map(|(_, m)| m.entries().map(|(r, c, _)| (r, c)).collect::<Vec<_>>()).collect();
    let mut items = Vec::new();
    for (r, c) in support {
        let f = ray.reconstruct(|m| m.get(r, c))?;
        items.push((r, c, f.at_zero()?));
    }
    Ok(RatMatrix::from_triplets(op.dim(), items))
}

/// The limit of `op` as the listed spectral parameters grow equals `target`.
pub fn spectral_limit_check(
    identity: &str,
    op: &TensorOp,
    target: &TensorOp,
    slots: &[usize],
    sampler: &mut Sampler,
    count: usize,
) -> Result<ResidualReport> {
    if op.dim() != target.dim() {
        return Err(Error::Shape("limit and target differ in shape".into()));
    }
    let (n, arity) = (op.n(), op.arity());
    let table = SymbolTable::new(n)?;
    let mut report = ResidualReport::new(identity, "", n, sampler.seed(), count);
    let values = with_guards(sampler, guards_of(&[op, target]), |s| {
        evaluate_on_samples(s, &table, count, |p| Ok((matrix_limit(op, p, slots)?, target.eval(p)?)))
    })?;
    for (p, (l, t)) in values {
        if l != t {
            let diff = l.sub(&t)?;
            for (r, c, _) in diff.entries().take(crate::check::MAX_WITNESSES) {
                report.fail(Failure {
                    point: p.clone(),
                    index: serde_json::json!([multi_index(r, n, arity), multi_index(c, n, arity)]),
                    lhs: l.get(r, c).to_string(),
                    rhs: t.get(r, c).to_string(),
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::DynScalar as S;

    fn q(p: i64, d: i64) -> Rational {
        Rational::new(p, d).unwrap()
    }

    #[test]
    fn limit_of_simple_ratio() {
        // (3t² + 1)/(t² − 5t) → 3
        let mut ray = Ray::new(|s: &Rational| {
            let t = s.recip()?;
            (&(&t * &t) * &q(3, 1) + q(1, 1)).checked_div(&(&(&t * &t) - &(&t * &q(5, 1))))
        });
        let f = ray.reconstruct(|v: &Rational| v.clone()).unwrap();
        assert_eq!(f.at_zero().unwrap(), q(3, 1));
        let (e, c) = f.laurent(3).unwrap();
        assert_eq!(e, 0);
        assert_eq!(c, vec![q(3, 1), q(15, 1), q(76, 1)]);
    }

    #[test]
    fn divergent_limit_is_an_error() {
        let mut ray = Ray::new(|s: &Rational| s.recip());
        let f = ray.reconstruct(|v: &Rational| v.clone()).unwrap();
        assert!(f.at_zero().is_err());
        assert_eq!(f.laurent(1).unwrap().0, -1);
    }

    #[test]
    fn operator_limit() {
        let op = TensorOp::matrix(2, true, |i, j| {
            S::lambda(i) + S::gamma() * S::spec(1) / (S::spec(1) + S::int(j as i64)) + S::int(1) / S::spec(1)
        });
        let target = TensorOp::matrix(2, false, |i, _| S::lambda(i) + S::gamma());
        let r = spectral_limit_check("lim", &op, &target, &[1], &mut Sampler::new(3), 3).unwrap();
        assert!(r.pass);
        let r = spectral_limit_check("lim", &op, &TensorOp::matrix(2, false, |i, _| S::lambda(i)), &[1], &mut Sampler::new(3), 2)
            .unwrap();
        assert!(!r.pass);
    }
}
