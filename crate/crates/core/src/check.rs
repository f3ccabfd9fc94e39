//! Sampled exact identity checks and their reports.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{dedup, DynScalar};
use crate::matrix::RatMatrix;
use crate::rational::Rational;
use crate::symbols::{EvalPoint, Sampler, SymbolTable};
use crate::tensor::{guards_of, multi_index, TensorOp};

/// Failures kept per report; the pass flag still covers every entry.
pub const MAX_WITNESSES: usize = 5;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub point: EvalPoint,
    pub index: serde_json::Value,
    pub lhs: String,
    pub rhs: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub identity: String,
    pub family: String,
    pub n: usize,
    pub seed: u64,
    pub samples: usize,
    pub pass: bool,
    pub failures: Vec<Failure>,
}

impl ResidualReport {
    pub fn new(identity: &str, family: &str, n: usize, seed: u64, samples: usize) -> Self {
        ResidualReport {
            identity: identity.to_string(),
            family: family.to_string(),
            n,
            seed,
            samples,
            pass: true,
            failures: Vec::new(),
        }
    }

    pub fn fail(&mut self, f: Failure) {
        self.pass = false;
        if self.failures.len() < MAX_WITNESSES {
            self.failures.push(f);
        }
    }

    /// A report whose outcome is decided without entry witnesses.
    pub fn verdict(identity: &str, family: &str, n: usize, seed: u64, samples: usize, pass: bool) -> Self {
        let mut r = ResidualReport::new(identity, family, n, seed, samples);
        r.pass = pass;
        r
    }

    pub fn first_witness(&self) -> Option<String> {
        self.failures.first().map(|f| {
            format!(
                "{}: index {} lhs {} rhs {} at {}",
                self.identity,
                f.index,
                f.lhs,
                f.rhs,
                serde_json::to_string(&f.point).unwrap_or_default()
            )
        })
    }
}

/// Sample context shared by a family of checks.
#[derive(Clone, Debug)]
pub struct Ctx {
    pub seed: u64,
    pub samples: usize,
}

impl Ctx {
    pub fn new(seed: u64, samples: usize) -> Self {
        Ctx { seed, samples }
    }

    pub fn sampler(&self) -> Sampler {
        Sampler::new(self.seed)
    }
}

fn recoverable(e: &Error) -> bool {
    matches!(e, Error::DivisionByZero(_) | Error::Singular)
}

/// Draw `count` points at which `f` evaluates without hitting a pole, evaluating in parallel.
pub fn evaluate_on_samples<T: Send>(
    sampler: &mut Sampler,
    table: &SymbolTable,
    count: usize,
    f: impl Fn(&EvalPoint) -> Result<T> + Sync,
) -> Result<Vec<(EvalPoint, T)>> {
    let mut done: Vec<Option<(EvalPoint, T)>> = (0..count).map(|_| None).collect();
    let mut rounds = 0;
    loop {
        let todo: Vec<usize> = (0..count).filter(|&i| done[i].is_none()).collect();
        if todo.is_empty() {
            break;
        }
        rounds += 1;
        if rounds > 50 {
            return Err(Error::GuardExhausted {
                guard: "evaluation kept hitting a pole or singular matrix".into(),
                attempts: rounds,
            });
        }
        let pts: Vec<(usize, EvalPoint)> =
            todo.iter().map(|&i| sampler.sample_point(table).map(|p| (i, p))).collect::<Result<_>>()?;
        let results: Vec<(usize, EvalPoint, Result<T>)> =
            pts.into_par_iter().map(|(i, p)| {
                let r = f(&p);
                (i, p, r)
            }).collect();
        for (i, p, r) in results {
            match r {
                Ok(v) => done[i] = Some((p, v)),
                Err(e) if recoverable(&e) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(done.into_iter().map(|d| d.expect("filled")).collect())
}

/// Run `f` with the sampler's guards temporarily extended.
pub fn with_guards<T>(sampler: &mut Sampler, guards: Vec<DynScalar>, f: impl FnOnce(&mut Sampler) -> T) -> T {
    let saved: Vec<DynScalar> = sampler.guards().to_vec();
    let mut all = saved.clone();
    all.extend(guards);
    *sampler = sampler.clone().with_guards(dedup(all));
    let out = f(sampler);
    *sampler = sampler.clone().with_guards(saved);
    out
}

fn record_diff(report: &mut ResidualReport, p: &EvalPoint, l: &RatMatrix, r: &RatMatrix, n: usize, arity: usize) {
    let diff = match l.sub(r) {
        Ok(d) => d,
        Err(_) => {
            report.pass = false;
            return;
        }
    };
    for (row, col, _) in diff.entries() {
        report.fail(Failure {
            point: p.clone(),
            index: serde_json::json!([multi_index(row, n, arity), multi_index(col, n, arity)]),
            lhs: l.get(row, col).to_string(),
            rhs: r.get(row, col).to_string(),
        });
        if report.failures.len() >= MAX_WITNESSES {
            break;
        }
    }
}

/// Exact entrywise comparison of two operators at sampled points.
pub fn equal_on_samples(
    identity: &str,
    family: &str,
    lhs: &TensorOp,
    rhs: &TensorOp,
    sampler: &mut Sampler,
    count: usize,
) -> Result<ResidualReport> {
    if lhs.arity() != rhs.arity() || lhs.n() != rhs.n() {
        return Err(Error::Shape(format!("{identity}: sides differ in shape")));
    }
    let (n, arity) = (lhs.n(), lhs.arity());
    let table = SymbolTable::new(n)?;
    let mut report = ResidualReport::new(identity, family, n, sampler.seed(), count);
    let values = with_guards(sampler, guards_of(&[lhs, rhs]), |s| {
        evaluate_on_samples(s, &table, count, |p| Ok((lhs.eval(p)?, rhs.eval(p)?)))
    })?;
    for (p, (l, r)) in values {
        if l != r {
            record_diff(&mut report, &p, &l, &r, n, arity);
        }
    }
    Ok(report)
}

/// Check that an operator vanishes at sampled points.
pub fn zero_on_samples(
    identity: &str,
    family: &str,
    op: &TensorOp,
    sampler: &mut Sampler,
    count: usize,
) -> Result<ResidualReport> {
    let zero = TensorOp::custom(op.arity(), op.n(), vec![false; op.arity()], {
        let dim = op.dim();
        move |_| Ok(RatMatrix::zero(dim))
    });
    equal_on_samples(identity, family, op, &zero, sampler, count)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightKind {
    Space1,
    Space2,
    Total,
}

/// [h_i⊗1, op] = 0, [1⊗h_i, op] = 0 or [h_i⊗1 + 1⊗h_i, op] = 0 for all i.
pub fn zero_weight_check(op: &TensorOp, kind: WeightKind, sampler: &mut Sampler, count: usize) -> Result<ResidualReport> {
    if op.arity() != 2 {
        return Err(Error::Shape("zero-weight check needs arity 2".into()));
    }
    let n = op.n();
    let name = match kind {
        WeightKind::Space1 => "zero-weight-space1",
        WeightKind::Space2 => "zero-weight-space2",
        WeightKind::Total => "zero-weight-total",
    };
    let mut report = ResidualReport::new(name, "", n, sampler.seed(), count);
    for i in 1..=n {
        let h = TensorOp::diagonal(n, false, |k| DynScalar::int((k == i) as i64));
        let h1 = h.embed(&[1], 2)?;
        let h2 = h.embed(&[2], 2)?;
        let w = match kind {
            WeightKind::Space1 => h1,
            WeightKind::Space2 => h2,
            WeightKind::Total => h1.add(&h2)?,
        };
        let r = equal_on_samples(name, "", &w.mul(op)?, &op.mul(&w)?, sampler, count)?;
        merge_into(&mut report, r);
    }
    Ok(report)
}

pub fn merge_into(acc: &mut ResidualReport, r: ResidualReport) {
    if !r.pass {
        acc.pass = false;
    }
    for f in r.failures {
        if acc.failures.len() < MAX_WITNESSES {
            acc.failures.push(f);
        }
    }
}

/// Exact value equality helper used by scalar checks.
pub fn scalar_failure(p: &EvalPoint, index: serde_json::Value, l: &Rational, r: &Rational) -> Failure {
    Failure { point: p.clone(), index, lhs: l.to_string(), rhs: r.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Substitution;
    use crate::symbols::Symbol;

    #[test]
    fn identity_equals_itself() {
        let id = TensorOp::identity(2, 2);
        let r = equal_on_samples("id", "", &id, &id, &mut Sampler::new(1), 5).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn perturbed_operator_is_caught() {
        let d = TensorOp::diagonal(2, false, |i| DynScalar::gamma() / DynScalar::lambda_diff(i, 3 - i));
        let pert = d.subst(&Substitution::single(Symbol::Gamma, DynScalar::int(2) * DynScalar::gamma()));
        let r = equal_on_samples("pert", "", &d, &pert, &mut Sampler::new(1), 3).unwrap();
        assert!(!r.pass);
        assert!(!r.failures.is_empty());
        assert_ne!(r.failures[0].lhs, r.failures[0].rhs);
    }

    #[test]
    fn reports_are_deterministic() {
        let d = TensorOp::diagonal(3, false, |i| DynScalar::lambda(i));
        let e = TensorOp::diagonal(3, false, |i| DynScalar::lambda(i) + DynScalar::gamma());
        let a = equal_on_samples("x", "", &d, &e, &mut Sampler::new(4), 4).unwrap();
        let b = equal_on_samples("x", "", &d, &e, &mut Sampler::new(4), 4).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
