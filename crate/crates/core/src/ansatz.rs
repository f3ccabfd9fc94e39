//! Order-by-order extension of constant K solutions: exact constraint assembly and solving.
//!
//! K(u) = k⁽⁰⁾ + (γ/u)k⁽¹⁾ + (γ/u)²k⁽²⁾ + … inserted into the reflection equation splits into
//! relations linear and quadratic in k⁽¹⁾. Two unknown models are offered:
//! pointwise values of k⁽ˡ⁾ at λ and at every λ + γe_m (no ansatz at all), and a polynomial
//! ansatz κ_ij = γ·k⁽¹⁾_ij·Π_{a≠j}λ_ja homogeneous of degree d in (λ, f, γ).

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, RwLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::check::{evaluate_on_samples, with_guards};
use crate::error::{Error, Result};
use crate::expr::DynScalar as S;
use crate::ksol::{f_sym, k_constant, k_first_order, k_spectral, KTag};
use crate::limit::Ray;
use crate::linalg::{rank, solve_affine, Affine};
use crate::matrix::RatMatrix;
use crate::rational::Rational;
use crate::structure::{a_inf, acf_spectral, aux_tensors, b_inf, d_inf};
use crate::symbols::{EvalPoint, Sampler, Symbol, SymbolTable};
use crate::tensor::TensorOp;
use crate::verify::sdre_identity;

/// The relations obtained at first order, split by their degree in k⁽¹⁾.
pub struct Relations {
    pub linear: Vec<(&'static str, TensorOp)>,
    pub quadratic: Vec<(&'static str, TensorOp)>,
}

/// Structure tensors entering the relations.
#[derive(Clone)]
struct Blocks {
    ai: TensorOp,
    bi: TensorOp,
    ci: TensorOp,
    di: TensorOp,
    b: TensorOp,
    c: TensorOp,
    d: TensorOp,
    at: Option<EvalPoint>,
}

impl Blocks {
    fn symbolic(n: usize) -> Result<Self> {
        let (d, b, c) = aux_tensors(n)?;
        let bi = b_inf(n);
        Ok(Blocks { ai: a_inf(n), ci: bi.swap()?, bi, di: d_inf(n), b, c, d, at: None })
    }

    /// Values at `p` baked in; only valid for evaluation at `p`.
    fn frozen(n: usize, p: &EvalPoint) -> Result<Self> {
        let s = Blocks::symbolic(n)?;
        let fz = |op: &TensorOp| -> Result<TensorOp> { Ok(frozen(op, op.eval(p)?)) };
        Ok(Blocks { ai: fz(&s.ai)?, bi: fz(&s.bi)?, ci: fz(&s.ci)?, di: fz(&s.di)?, b: fz(&s.b)?, c: fz(&s.c)?, d: fz(&s.d)?, at: Some(p.clone()) })
    }

    /// Product of factors, collapsed to its value when a point is fixed.
    fn fold(&self, ops: &[&TensorOp]) -> Result<Option<TensorOp>> {
        if ops.is_empty() {
            return Ok(None);
        }
        let prod = TensorOp::product(&ops.iter().map(|o| (*o).clone()).collect::<Vec<_>>())?;
        Ok(Some(match &self.at {
            Some(p) => frozen(&prod, prod.eval(p)?),
            None => prod,
        }))
    }

    /// left · var · right with the fixed parts folded.
    fn term(&self, left: &[&TensorOp], var: &TensorOp, right: &[&TensorOp]) -> Result<TensorOp> {
        let mut f: Vec<TensorOp> = self.fold(left)?.into_iter().collect();
        f.push(var.clone());
        f.extend(self.fold(right)?);
        TensorOp::product(&f)
    }
}

fn frozen(op: &TensorOp, m: RatMatrix) -> TensorOp {
    TensorOp::custom(op.arity(), op.n(), vec![false; op.arity()], move |_| Ok(m.clone()))
}

/// k⁽⁰⁾ tabulated at λ and λ + γe_m around `p`.
fn tabulate(k: &TensorOp, p: &EvalPoint) -> Result<TensorOp> {
    let mut tabs = vec![k.eval(p)?];
    for m in 1..=p.n() {
        tabs.push(k.eval(&p.shift_lambda(m, 1))?);
    }
    Ok(pointwise_leaf(p, tabs, false))
}

/// All eight relations for given k⁽⁰⁾ and k⁽¹⁾ (constant n×n matrices).
pub fn relations(k0: &TensorOp, k1: &TensorOp) -> Result<Relations> {
    relations_with(&Blocks::symbolic(k0.n())?, k0, k1)
}

fn relations_with(bl: &Blocks, k0: &TensorOp, k1: &TensorOp) -> Result<Relations> {
    let Blocks { ai, bi, ci, di, b, c, d, .. } = bl.clone();
    let km = k1.sub(k0)?;
    let one = |k: &TensorOp| k.embed(&[1], 2);
    let two = |k: &TensorOp| k.embed(&[2], 2);
    let (k0_1, k0_2, k1_1, k1_2, km_1) = (one(k0)?, two(k0)?, one(k1)?, two(k1)?, one(&km)?);
    let (k0_2h, k1_2h, k0_1h, k1_1h, km_1h) =
        (k0_2.shift_h(1)?, k1_2.shift_h(1)?, k0_1.shift_h(2)?, k1_1.shift_h(2)?, km_1.shift_h(2)?);
    let bib = bi.sub(&b)?;
    let aic = ai.sub(&c)?;
    let cic = ci.sub(&c)?;
    let p = |ops: &[&TensorOp]| TensorOp::product(&ops.iter().map(|o| (*o).clone()).collect::<Vec<_>>());

    let linear = vec![
        ("linear-1", bl.term(&[&b, &k0_1, &bib], &k1_2h, &[])?),
        ("linear-2", bl.term(&[&aic], &k1_1, &[&bi, &k0_2h])?.sub(&bl.term(&[&k0_2, &cic], &k1_1h, &[&di])?)?),
        ("linear-3", bl.term(&[&c], &km_1, &[&bi, &k0_2h])?.sub(&bl.term(&[&k0_2, &c], &km_1h, &[&di])?)?),
        (
            "linear-4",
            bl.term(&[&ai, &k0_1, &bi], &k1_2h, &[])?
                .sub(&bl.term(&[], &k1_2, &[&ci, &k0_1h, &di])?)?
                .add(&bl.fold(&[&b, &k0_1, &bib, &k0_2h])?.expect("nonempty"))?,
        ),
    ];
    let quadratic = vec![
        ("quadratic-1", p(&[&b, &k1_1, &bib, &k1_2h])?),
        (
            "quadratic-2",
            p(&[&aic, &k1_1, &bi, &k1_2h])?
                .sub(&p(&[&k1_2, &cic, &k1_1h, &di])?)?
                .add(&p(&[&k0_2, &cic, &k1_1h, &d])?)?
                .add(&p(&[&b.sub(&d)?, &k1_1, &bib, &k0_2h])?)?,
        ),
        ("quadratic-3", p(&[&c, &km_1, &bib, &k1_2h])?.sub(&p(&[&k1_2, &c, &km_1h, &di.sub(&d)?])?)?),
        ("order-zero", p(&[&ai, &k0_1, &bi, &k0_2h])?.sub(&p(&[&k0_2, &ci, &k0_1h, &di])?)?),
    ];
    Ok(Relations { linear, quadratic })
}

/// Matrix values attached to λ and to each λ + γe_m around a base point.
pub fn pointwise_leaf(base: &EvalPoint, values: Vec<RatMatrix>, spectral: bool) -> TensorOp {
    let lambda = base.lambda.clone();
    let n = base.n();
    let values = Arc::new(values);
    TensorOp::custom(1, n, vec![spectral], move |p| Ok(values[table_index(&lambda, p)?].clone()))
}

/// 0 at the base λ, m at λ + γe_m.
fn table_index(lambda: &[Rational], p: &EvalPoint) -> Result<usize> {
    let moved: Vec<usize> = (0..lambda.len()).filter(|&a| p.lambda[a] != lambda[a]).collect();
    match moved.as_slice() {
        [] => Ok(0),
        [m] if &p.lambda[*m] - &lambda[*m] == p.gamma => Ok(m + 1),
        _ => Err(Error::Precondition("pointwise unknowns are known only at λ and λ + γe_m".into())),
    }
}

fn unit_tables(n: usize, v: &[Rational]) -> Vec<RatMatrix> {
    (0..=n)
        .map(|t| {
            RatMatrix::from_triplets(
                n,
                (0..n * n).filter_map(|k| {
                    let x = v.get(t * n * n + k)?;
                    (!x.is_zero()).then(|| (k / n, k % n, x.clone()))
                }),
            )
        })
        .collect()
}

fn flatten(ms: &[RatMatrix]) -> Vec<Rational> {
    ms.iter().flat_map(|m| m.to_dense().into_iter().flatten()).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Unique,
    Family,
    Infeasible,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Unique => "unique",
            Status::Family => "family",
            Status::Infeasible => "infeasible",
        }
    }
}

/// Outcome of one exact affine solve A·x = b.
#[derive(Clone, Debug)]
pub struct LinearOutcome {
    pub unknowns: usize,
    pub rank: usize,
    pub augmented_rank: usize,
    pub status: Status,
    pub particular: Option<Vec<Rational>>,
    pub nullspace: Vec<Vec<Rational>>,
}

fn outcome(a: &[Vec<Rational>], b: &[Rational], unknowns: usize) -> LinearOutcome {
    match solve_affine(a, b, unknowns) {
        Affine::Inconsistent { rank, augmented_rank } => LinearOutcome {
            unknowns,
            rank,
            augmented_rank,
            status: Status::Infeasible,
            particular: None,
            nullspace: vec![],
        },
        Affine::Solutions { rank, particular, nullspace } => LinearOutcome {
            unknowns,
            rank,
            augmented_rank: rank,
            status: if nullspace.is_empty() { Status::Unique } else { Status::Family },
            particular: Some(particular),
            nullspace,
        },
    }
}

/// Assemble columns of an affine map v ↦ r(v) from unit inputs, in parallel.
fn affine_columns(unknowns: usize, eval: impl Fn(&[Rational]) -> Result<Vec<Rational>> + Sync) -> Result<(Vec<Vec<Rational>>, Vec<Rational>)> {
    let zero = vec![Rational::zero(); unknowns];
    let r0 = eval(&zero)?;
    let cols: Vec<Vec<Rational>> = (0..unknowns)
        .into_par_iter()
        .map(|m| {
            let mut v = zero.clone();
            v[m] = Rational::one();
            let r = eval(&v)?;
            Ok(r.iter().zip(&r0).map(|(x, y)| x - y).collect())
        })
        .collect::<Result<_>>()?;
    let rows = (0..r0.len()).map(|i| cols.iter().map(|c| c[i].clone()).collect()).collect();
    Ok((rows, r0.into_iter().map(|x| -x).collect()))
}

/// Pointwise first-order solve at one point.
#[derive(Clone, Debug)]
pub struct PointSolve {
    pub point: EvalPoint,
    pub linear: LinearOutcome,
    /// k⁽¹⁾ at the base point, when its entries are determined.
    pub k1: Option<RatMatrix>,
    /// Values at λ and λ + γe_m, when the whole solve is unique.
    pub tables: Option<Vec<RatMatrix>>,
}

/// Solve the linear block for k⁽¹⁾ at λ and λ + γe_m, without any ansatz.
/// The linear block at `p` as A·x = b over the pointwise unknowns.
pub fn pointwise_system(k0: &TensorOp, p: &EvalPoint) -> Result<(Vec<Vec<Rational>>, Vec<Rational>)> {
    let n = k0.n();
    let bl = Blocks::frozen(n, p)?;
    let k0 = tabulate(k0, p)?;
    let cell: Arc<RwLock<Vec<RatMatrix>>> = Arc::new(RwLock::new(unit_tables(n, &[])));
    let leaf = {
        let cell = cell.clone();
        let lambda = p.lambda.clone();
        TensorOp::custom(1, n, vec![false], move |q| {
            let idx = table_index(&lambda, q)?;
            Ok(cell.read().expect("unpoisoned")[idx].clone())
        })
    };
    let ops: Vec<TensorOp> = relations_with(&bl, &k0, &leaf)?.linear.into_iter().map(|(_, o)| o).collect();
    let unknowns = n * n * (n + 1);
    let eval = |v: &[Rational]| -> Result<Vec<Rational>> {
        *cell.write().expect("unpoisoned") = unit_tables(n, v);
        Ok(flatten(&ops.iter().map(|o| o.eval(p)).collect::<Result<Vec<_>>>()?))
    };
    let zero = vec![Rational::zero(); unknowns];
    let r0 = eval(&zero)?;
    let mut cols = Vec::with_capacity(unknowns);
    for m in 0..unknowns {
        let mut v = zero.clone();
        v[m] = Rational::one();
        let r = eval(&v)?;
        cols.push(r.iter().zip(&r0).map(|(x, y)| x - y).collect::<Vec<_>>());
    }
    let rows = (0..r0.len()).map(|i| cols.iter().map(|c| c[i].clone()).collect()).collect();
    Ok((rows, r0.into_iter().map(|x| -x).collect()))
}

pub fn solve_pointwise(k0: &TensorOp, p: &EvalPoint) -> Result<PointSolve> {
    let n = k0.n();
    let unknowns = n * n * (n + 1);
    let (a, b) = pointwise_system(k0, p)?;
    let lin = outcome(&a, &b, unknowns);
    let determined = |x: &[Rational], range: std::ops::Range<usize>| lin.nullspace.iter().all(|v| v[range.clone()].iter().all(Rational::is_zero)) && x.len() >= range.end;
    let (k1, tables) = match &lin.particular {
        Some(x) => {
            let tabs = unit_tables(n, x);
            let k1 = determined(x, 0..n * n).then(|| tabs[0].clone());
            let tables = (lin.status == Status::Unique).then_some(tabs);
            (k1, tables)
        }
        None => (None, None),
    };
    Ok(PointSolve { point: p.clone(), linear: lin, k1, tables })
}

/// Quadratic relations and the order-zero equation at a pointwise solution.
pub fn quadratic_residual_zero(k0: &TensorOp, solve: &PointSolve) -> Result<bool> {
    let Some(tables) = &solve.tables else {
        return Err(Error::Precondition("quadratic check needs a unique pointwise solution".into()));
    };
    let leaf = pointwise_leaf(&solve.point, tables.clone(), false);
    let rel = relations(k0, &leaf)?;
    for (_, op) in &rel.quadratic {
        if !op.eval(&solve.point)?.is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Exponent vectors of total degree d in `vars` variables.
pub fn monomials(vars: usize, d: usize) -> Vec<Vec<u32>> {
    fn rec(vars: usize, d: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if prefix.len() == vars - 1 {
            prefix.push(d as u32);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=d).rev() {
            prefix.push(k as u32);
            rec(vars, d - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(vars, d, &mut Vec::new(), &mut out);
    out
}

/// Variables λ₁..λ_n, f, γ.
fn ansatz_var(n: usize, k: usize) -> S {
    if k < n {
        S::lambda(k + 1)
    } else if k == n {
        f_sym()
    } else {
        S::gamma()
    }
}

fn monomial_expr(n: usize, e: &[u32]) -> S {
    S::product(e.iter().enumerate().filter(|(_, &x)| x > 0).map(|(k, &x)| ansatz_var(n, k).pow(x)))
}

fn monomial_value(p: &EvalPoint, e: &[u32]) -> Result<Rational> {
    let n = p.n();
    let mut acc = Rational::one();
    for (k, &x) in e.iter().enumerate() {
        let v = if k < n { p.lambda[k].clone() } else if k == n { p.f.clone() } else { p.gamma.clone() };
        acc = &acc * &v.pow(x as i32)?;
    }
    Ok(acc)
}

/// 1/(γ·Π_{a≠j}λ_ja)
fn ansatz_prefactor(n: usize, j: usize) -> S {
    (S::gamma() * S::product((1..=n).filter(|&a| a != j).map(|a| S::lambda_diff(j, a)))).recip()
}

/// κ_ij polynomials indexed by (i, j) (1-based) giving k⁽¹⁾ = κ/(γ·Πλ_ja).
#[derive(Clone, Debug)]
pub struct PolynomialAnsatz {
    pub n: usize,
    pub degree: usize,
    pub kappa: BTreeMap<(usize, usize), S>,
}

impl PolynomialAnsatz {
    pub fn k1(&self) -> TensorOp {
        let n = self.n;
        TensorOp::matrix(n, false, |i, j| match self.kappa.get(&(i, j)) {
            Some(k) => k * &ansatz_prefactor(n, j),
            None => S::zero(),
        })
    }

    fn from_coeffs(n: usize, degree: usize, coeffs: &[Rational]) -> Self {
        let monos = monomials(n + 2, degree);
        let mut kappa = BTreeMap::new();
        for i in 1..=n {
            for j in 1..=n {
                let base = ((i - 1) * n + (j - 1)) * monos.len();
                let terms: Vec<S> = monos
                    .iter()
                    .enumerate()
                    .filter(|(m, _)| !coeffs[base + m].is_zero())
                    .map(|(m, e)| S::constant(coeffs[base + m].clone()) * monomial_expr(n, e))
                    .collect();
                if !terms.is_empty() {
                    kappa.insert((i, j), S::sum(terms));
                }
            }
        }
        PolynomialAnsatz { n, degree, kappa }
    }
}

/// Fit κ from pointwise k⁽¹⁾ values; None when no polynomial of this degree fits.
pub fn fit_polynomial(n: usize, degree: usize, data: &[(EvalPoint, RatMatrix)]) -> Result<Option<PolynomialAnsatz>> {
    let monos = monomials(n + 2, degree);
    let mut coeffs = Vec::with_capacity(n * n * monos.len());
    for i in 0..n {
        for j in 0..n {
            let mut rows = Vec::with_capacity(data.len());
            let mut rhs = Vec::with_capacity(data.len());
            for (p, k1) in data {
                rows.push(monos.iter().map(|e| monomial_value(p, e)).collect::<Result<Vec<_>>>()?);
                let vand: Rational = (0..n).filter(|&a| a != j).map(|a| &p.lambda[j] - &p.lambda[a]).product();
                rhs.push(&(&k1.get(i, j) * &p.gamma) * &vand);
            }
            match solve_affine(&rows, &rhs, monos.len()) {
                Affine::Solutions { particular, nullspace, .. } if nullspace.is_empty() => coeffs.extend(particular),
                Affine::Solutions { .. } => {
                    return Err(Error::Precondition("too few points to determine the polynomial fit".into()))
                }
                Affine::Inconsistent { .. } => return Ok(None),
            }
        }
    }
    Ok(Some(PolynomialAnsatz::from_coeffs(n, degree, &coeffs)))
}

/// Joint solve of the linear block over all polynomial coefficients.
#[derive(Clone, Debug)]
pub struct PolynomialSolve {
    pub linear: LinearOutcome,
    pub points: Vec<EvalPoint>,
    pub ansatz: Option<PolynomialAnsatz>,
}

const MAX_DOUBLINGS: usize = 4;

pub fn solve_polynomial(k0: &TensorOp, degree: usize, sampler: &mut Sampler) -> Result<PolynomialSolve> {
    let n = k0.n();
    let monos = monomials(n + 2, degree);
    let unknowns = n * n * monos.len();
    let mut guards = k0.denominators();
    guards.push(S::sym(Symbol::F));
    let table = SymbolTable::new(n)?;
    let rows_per_point = 4 * n.pow(4);
    let mut count = unknowns.div_ceil(rows_per_point) + 2;
    let mut a: Vec<Vec<Rational>> = Vec::new();
    let mut b: Vec<Rational> = Vec::new();
    let mut points = Vec::new();
    let mut last_rank = None;
    for _ in 0..=MAX_DOUBLINGS {
        let block = with_guards(sampler, guards.clone(), |s| {
            evaluate_on_samples(s, &table, count, |p| {
                let (pa, pb) = pointwise_system(k0, p)?;
                let basis = basis_values(n, &monos, p)?;
                let rows: Vec<Vec<Rational>> = pa
                    .iter()
                    .map(|row| {
                        basis
                            .iter()
                            .map(|col| col.iter().map(|(k, v)| &row[*k] * v).sum())
                            .collect()
                    })
                    .collect();
                Ok((rows, pb))
            })
        })?;
        for (p, (rows, rhs)) in block {
            a.extend(rows);
            b.extend(rhs);
            points.push(p);
        }
        let mut aug = a.clone();
        for (row, x) in aug.iter_mut().zip(&b) {
            row.push(x.clone());
        }
        let r = (rank(&a), rank(&aug));
        if last_rank == Some(r) {
            let lin = outcome(&a, &b, unknowns);
            let ansatz = match (&lin.status, &lin.particular) {
                (Status::Unique, Some(x)) => Some(PolynomialAnsatz::from_coeffs(n, degree, x)),
                _ => None,
            };
            return Ok(PolynomialSolve { linear: lin, points, ansatz });
        }
        last_rank = Some(r);
        count = points.len();
    }
    Err(Error::Precondition("rank did not stabilize; raise the degree bound or sample count".into()))
}

/// Pointwise values of each polynomial basis element, as sparse vectors over the pointwise unknowns.
fn basis_values(n: usize, monos: &[Vec<u32>], p: &EvalPoint) -> Result<Vec<Vec<(usize, Rational)>>> {
    let shifted: Vec<EvalPoint> =
        std::iter::once(p.clone()).chain((1..=n).map(|m| p.shift_lambda(m, 1))).collect();
    let mut out = Vec::with_capacity(n * n * monos.len());
    for i in 0..n {
        for j in 0..n {
            for e in monos {
                let mut col = Vec::with_capacity(n + 1);
                for (t, q) in shifted.iter().enumerate() {
                    let vand: Rational = (0..n).filter(|&a| a != j).map(|a| &q.lambda[j] - &q.lambda[a]).product();
                    let v = monomial_value(q, e)?.checked_div(&(&vand * &q.gamma))?;
                    if !v.is_zero() {
                        col.push((t * n * n + i * n + j, v));
                    }
                }
                out.push(col);
            }
        }
    }
    Ok(out)
}

/// Linear block for k⁽²⁾ from the large-u and large-v expansions of the full residual.
pub fn solve_order2(base: &TensorOp, p: &EvalPoint) -> Result<LinearOutcome> {
    let n = base.n();
    let fam = acf_spectral(n)?;
    let unknowns = n * n * (n + 1);
    let weight = (S::gamma() / S::spec(1)).pow(2);
    let base = base.with_spectral(&[1]);
    let (a, b) = affine_columns(unknowns, |v| {
        let leaf = pointwise_leaf(p, unit_tables(n, v), true);
        let k = base.add(&leaf.scale(weight.clone()))?.with_spectral(&[1]);
        let id = sdre_identity(&fam, &k)?;
        let residual = id.lhs.sub(&id.rhs)?;
        let mut out = Vec::new();
        for slot in [2usize, 1] {
            out.extend(asymptotic_coefficients(&residual, p, slot)?);
        }
        Ok(out)
    })?;
    Ok(outcome(&a, &b, unknowns))
}

const LOWEST: i64 = -4;

/// Coefficients of t^{−e}, e ≤ 1, of every entry as the spectral parameter of `slot` grows.
fn asymptotic_coefficients(op: &TensorOp, p: &EvalPoint, slot: usize) -> Result<Vec<Rational>> {
    let dim = op.dim();
    let op2 = op.clone();
    let p2 = p.clone();
    let mut ray = Ray::new(move |s: &Rational| {
        let mut q = p2.clone();
        q.spec[slot - 1] = s.recip()?;
        op2.eval(&q)
    });
    let probe: Vec<RatMatrix> = (0..5).map(|k| {
        let mut q = p.clone();
        q.spec[slot - 1] = Rational::from_int(1009 + 17 * k);
        op.eval(&q)
    }).filter_map(|r| r.ok()).collect();
    let support: BTreeSet<(usize, usize)> = probe.iter().flat_map(|m| m.entries().map(|(r, c, _)| (r, c)).collect::<Vec<_>>()).collect();
    let width = (2 - LOWEST) as usize;
    let mut out = vec![Rational::zero(); dim * dim * width];
    for (r, c) in support {
        let f = ray.reconstruct(|m: &RatMatrix| m.get(r, c))?;
        let (e, coeffs) = f.laurent(width)?;
        if e < LOWEST {
            return Err(Error::Precondition("residual grows faster than expected".into()));
        }
        for (k, x) in coeffs.into_iter().enumerate() {
            let exp = e + k as i64;
            if exp <= 1 {
                out[(r * dim + c) * width + (exp - LOWEST) as usize] = x;
            }
        }
    }
    Ok(out)
}

/// One solution entry of a certificate: κ_ij as an expression.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolutionEntry {
    pub row: usize,
    pub col: usize,
    pub kappa: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub base: String,
    pub n: usize,
    pub order: u32,
    pub model: String,
    pub degree: Option<usize>,
    pub unknowns: usize,
    pub rank: usize,
    pub augmented_rank: usize,
    pub nullity: usize,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution: Option<Vec<SolutionEntry>>,
    pub matches_closed_form: Option<bool>,
    pub quadratic_pass: Option<bool>,
    pub sdre_pass: Option<bool>,
    pub checked_points: Vec<EvalPoint>,
    pub scope: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    Pointwise,
    Polynomial,
}

impl std::str::FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pointwise" => Ok(Model::Pointwise),
            "polynomial" => Ok(Model::Polynomial),
            _ => Err(Error::Parse(format!("unknown ansatz model {s:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExtensionRequest {
    pub base: KTag,
    pub n: usize,
    pub order: u32,
    pub degree: Option<usize>,
    pub model: Model,
    pub samples: usize,
}

fn solution_entries(a: &PolynomialAnsatz) -> Vec<SolutionEntry> {
    a.kappa.iter().map(|(&(row, col), k)| SolutionEntry { row, col, kappa: k.to_string() }).collect()
}

fn matches_closed_form(tag: KTag, n: usize, k1: &TensorOp, sampler: &mut Sampler, count: usize) -> Result<Option<bool>> {
    if !tag.has_spectral_extension() {
        return Ok(None);
    }
    let want = k_first_order(tag, n, &f_sym())?;
    let id = crate::verify::Identity::new("closed-form", tag.as_str(), k1.clone(), want);
    Ok(Some(id.check(sampler, count)?.pass))
}

fn sdre_of(tag: KTag, n: usize, k1: &TensorOp, sampler: &mut Sampler, count: usize) -> Result<bool> {
    let k = k_constant(tag, n, &f_sym()).add(&k1.scale(S::gamma() / S::spec(1)))?.with_spectral(&[1]);
    Ok(sdre_identity(&acf_spectral(n)?, &k)?.check(sampler, count)?.pass)
}

/// Sampling domain for the linear solves. Every verdict is exact at the point where it is
/// computed, so small values only cost a coarser search for degenerate points.
pub const SOLVE_BOUNDS: ((i64, i64), (i64, i64)) = ((-99, 99), (1, 9));

/// A certificate together with the fitted k⁽¹⁾, when one was found.
#[derive(Clone, Debug)]
pub struct Extension {
    pub certificate: Certificate,
    pub k1: Option<TensorOp>,
}

/// Run an extension analysis and produce its certificate.
pub fn solve_extension(req: &ExtensionRequest, sampler: &mut Sampler) -> Result<Certificate> {
    Ok(analyze_extension(req, sampler)?.certificate)
}

pub fn analyze_extension(req: &ExtensionRequest, sampler: &mut Sampler) -> Result<Extension> {
    if req.n < 2 || req.samples == 0 {
        return Err(Error::OutOfRange("need n ≥ 2 and at least one sample".into()));
    }
    let saved = sampler.bounds();
    *sampler = sampler.clone().with_bounds(SOLVE_BOUNDS.0, SOLVE_BOUNDS.1);
    let out = dispatch(req, sampler);
    *sampler = sampler.clone().with_bounds(saved.0, saved.1);
    out
}

fn dispatch(req: &ExtensionRequest, sampler: &mut Sampler) -> Result<Extension> {
    match req.order {
        1 => match req.model {
            Model::Pointwise => pointwise_certificate(req, sampler),
            Model::Polynomial => polynomial_certificate(req, sampler),
        },
        2 => Ok(Extension { certificate: order2_certificate(req, sampler)?, k1: None }),
        o => Err(Error::OutOfRange(format!("order {o} is not supported"))),
    }
}

/// λ_ij + cγ for the shifts the relations reach.
fn shifted_guards(n: usize) -> Vec<S> {
    let mut out = Vec::new();
    for i in 1..=n {
        for j in (i + 1)..=n {
            for c in [-2, -1, 1, 2] {
                out.push(S::lambda_diff(i, j) + S::int(c) * S::gamma());
            }
        }
    }
    out
}

fn sample_points(k: &TensorOp, sampler: &mut Sampler, count: usize) -> Result<Vec<EvalPoint>> {
    let table = SymbolTable::new(k.n())?;
    let mut guards = k.denominators();
    guards.push(S::sym(Symbol::F));
    guards.extend(shifted_guards(k.n()));
    with_guards(sampler, guards, |s| s.points(&table, count))
}

fn pointwise_certificate(req: &ExtensionRequest, sampler: &mut Sampler) -> Result<Extension> {
    let n = req.n;
    let k0 = k_constant(req.base, n, &f_sym());
    let degree = req.degree.unwrap_or(n);
    let fit_points = monomials(n + 2, degree).len() + 3;
    let pts = sample_points(&k0, sampler, req.samples.max(fit_points))?;
    let mut solves: Vec<PointSolve> = Vec::with_capacity(pts.len());
    for p in &pts {
        let s = solve_pointwise(&k0, p)?;
        let stop = s.linear.status == Status::Infeasible;
        solves.push(s);
        if stop {
            break;
        }
    }
    let first = &solves[0].linear;
    let mut cert = Certificate {
        base: req.base.as_str().into(),
        n,
        order: 1,
        model: "pointwise".into(),
        degree: Some(degree),
        unknowns: first.unknowns,
        rank: first.rank,
        augmented_rank: first.augmented_rank,
        nullity: first.unknowns - first.rank,
        status: first.status,
        solution: None,
        matches_closed_form: None,
        quadratic_pass: None,
        sdre_pass: None,
        checked_points: pts[..req.samples.min(solves.len())].to_vec(),
        scope: "values of k⁽¹⁾ at λ and λ+γe_m treated as free unknowns; no ansatz restriction".into(),
    };
    if let Some(bad) = solves.iter().find(|s| s.linear.status == Status::Infeasible) {
        cert.status = Status::Infeasible;
        cert.rank = bad.linear.rank;
        cert.augmented_rank = bad.linear.augmented_rank;
        cert.nullity = bad.linear.unknowns - bad.linear.rank;
        cert.checked_points = vec![bad.point.clone()];
        return Ok(Extension { certificate: cert, k1: None });
    }
    if solves.iter().any(|s| s.linear.status == Status::Family) {
        cert.status = Status::Family;
        if solves.iter().any(|s| s.k1.is_none()) {
            return Ok(Extension { certificate: cert, k1: None });
        }
    }
    let mut quad = true;
    for s in solves.iter().filter(|s| s.tables.is_some()) {
        quad &= quadratic_residual_zero(&k0, s)?;
    }
    cert.quadratic_pass = Some(quad);
    let data: Vec<(EvalPoint, RatMatrix)> =
        solves.iter().filter_map(|s| s.k1.clone().map(|k| (s.point.clone(), k))).collect();
    let mut fitted = None;
    if let Some(fit) = fit_polynomial(n, degree, &data)? {
        let k1 = fit.k1();
        cert.solution = Some(solution_entries(&fit));
        cert.matches_closed_form = matches_closed_form(req.base, n, &k1, sampler, req.samples)?;
        cert.sdre_pass = Some(sdre_of(req.base, n, &k1, sampler, req.samples.min(5))?);
        fitted = Some(k1);
    } else {
        cert.scope.push_str(&format!("; no polynomial κ of degree {degree} fits the pointwise values"));
    }
    Ok(Extension { certificate: cert, k1: fitted })
}

fn polynomial_certificate(req: &ExtensionRequest, sampler: &mut Sampler) -> Result<Extension> {
    let n = req.n;
    let degree = req.degree.unwrap_or(n);
    let k0 = k_constant(req.base, n, &f_sym());
    let sol = solve_polynomial(&k0, degree, sampler)?;
    let lin = &sol.linear;
    let mut cert = Certificate {
        base: req.base.as_str().into(),
        n,
        order: 1,
        model: "polynomial".into(),
        degree: Some(degree),
        unknowns: lin.unknowns,
        rank: lin.rank,
        augmented_rank: lin.augmented_rank,
        nullity: lin.unknowns - lin.rank,
        status: lin.status,
        solution: None,
        matches_closed_form: None,
        quadratic_pass: None,
        sdre_pass: None,
        checked_points: sol.points.clone(),
        scope: format!(
            "κ_ij = γ·k⁽¹⁾_ij·Π_(a≠j)λ_ja homogeneous of degree {degree} in (λ, f, γ); claims hold within this family only"
        ),
    };
    let mut fitted = None;
    if let Some(a) = &sol.ansatz {
        let k1 = a.k1();
        cert.solution = Some(solution_entries(a));
        cert.matches_closed_form = matches_closed_form(req.base, n, &k1, sampler, req.samples)?;
        let quad = relations(&k0, &k1)?
            .quadratic
            .iter()
            .map(|(name, op)| {
                crate::check::zero_on_samples(name, "", op, sampler, req.samples.min(5)).map(|r| r.pass)
            })
            .collect::<Result<Vec<bool>>>()?;
        cert.quadratic_pass = Some(quad.iter().all(|&b| b));
        cert.sdre_pass = Some(sdre_of(req.base, n, &k1, sampler, req.samples.min(5))?);
        fitted = Some(k1);
    }
    Ok(Extension { certificate: cert, k1: fitted })
}

fn order2_certificate(req: &ExtensionRequest, sampler: &mut Sampler) -> Result<Certificate> {
    let n = req.n;
    let base = if req.base.has_spectral_extension() {
        k_spectral(req.base, n, &f_sym())?
    } else {
        k_constant(req.base, n, &f_sym())
    };
    let fam = acf_spectral(n)?;
    let mut guard_ops = fam.a.denominators();
    guard_ops.extend(base.denominators());
    guard_ops.push(S::sym(Symbol::F));
    guard_ops.extend(shifted_guards(n));
    let table = SymbolTable::new(n)?;
    let pts = with_guards(sampler, guard_ops, |s| s.points(&table, req.samples))?;
    let outs: Vec<LinearOutcome> = pts.par_iter().map(|p| solve_order2(&base, p)).collect::<Result<_>>()?;
    let worst = outs.iter().min_by_key(|o| o.rank).cloned().unwrap_or_else(|| outs[0].clone());
    let zero_only = outs.iter().all(|o| {
        o.status == Status::Unique && o.particular.as_ref().is_some_and(|x| x.iter().all(Rational::is_zero))
    });
    let infeasible = outs.iter().any(|o| o.status == Status::Infeasible);
    Ok(Certificate {
        base: req.base.as_str().into(),
        n,
        order: 2,
        model: "pointwise".into(),
        degree: None,
        unknowns: worst.unknowns,
        rank: worst.rank,
        augmented_rank: worst.augmented_rank,
        nullity: worst.unknowns - worst.rank,
        status: if infeasible { Status::Infeasible } else { worst.status },
        solution: zero_only.then(|| {
            vec![SolutionEntry { row: 0, col: 0, kappa: "k⁽²⁾ = 0".into() }]
        }),
        matches_closed_form: None,
        quadratic_pass: None,
        sdre_pass: None,
        checked_points: pts,
        scope: "values of k⁽²⁾ at λ and λ+γe_m free; constraints are the residual coefficients of u⁰, u⁻¹, v⁰, v⁻¹ and any growing terms".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_counts() {
        assert_eq!(monomials(4, 2).len(), 10);
        assert_eq!(monomials(5, 3).len(), 35);
        assert!(monomials(3, 2).iter().all(|e| e.iter().sum::<u32>() == 2));
    }

    #[test]
    fn closed_form_satisfies_linear_block() {
        let n = 2;
        let k0 = k_constant(KTag::IIb, n, &f_sym());
        let k1 = k_first_order(KTag::IIb, n, &f_sym()).unwrap();
        let rel = relations(&k0, &k1).unwrap();
        let mut s = Sampler::new(3);
        for (name, op) in rel.linear.iter().chain(rel.quadratic.iter()) {
            assert!(crate::check::zero_on_samples(name, "", op, &mut s, 3).unwrap().pass, "{name}");
        }
        let bad = relations(&k0, &k0).unwrap();
        let all = bad.linear.iter().all(|(name, op)| crate::check::zero_on_samples(name, "", op, &mut s, 3).unwrap().pass);
        assert!(!all);
    }
}
