//! Lazy operators on tensor powers of ℂⁿ with dynamical and spectral shifts.
//!
//! Slot 1 is the most significant digit of a flat index. Operators built in
//! their own slot coordinates use spectral symbol `u_k` for slot k; embedding
//! renames those symbols to the target slots.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{DynScalar, Substitution};
use crate::matrix::RatMatrix;
use crate::symbols::{EvalPoint, Symbol, MAX_ARITY};

/// Conjugation by g shifts a slot's spectral parameter by this multiple of γ.
pub const G_SHIFT_SIGN: i64 = -1;

type Evaluator = dyn Fn(&EvalPoint) -> Result<RatMatrix> + Send + Sync;

#[derive(Clone)]
pub struct TensorOp(Arc<OpNode>);

struct OpNode {
    arity: usize,
    n: usize,
    spectral: Vec<bool>,
    kind: Kind,
}

enum Kind {
    Leaf(BTreeMap<(usize, usize), DynScalar>),
    Identity,
    Product(Vec<TensorOp>),
    Sum(Vec<TensorOp>),
    Scale(DynScalar, TensorOp),
    Embed(TensorOp, Vec<usize>),
    Subst(TensorOp, Substitution),
    Shift(TensorOp, usize),
    Inverse(TensorOp),
    Transpose(TensorOp),
    Custom(Arc<Evaluator>),
}

/// 1-based digits of a flat index, slot 1 first.
pub fn multi_index(mut idx: usize, n: usize, arity: usize) -> Vec<usize> {
    let mut d = vec![0; arity];
    for k in (0..arity).rev() {
        d[k] = idx % n + 1;
        idx /= n;
    }
    d
}

/// Inverse of [`multi_index`].
pub fn flat_index(digits: &[usize], n: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * n + (d - 1))
}

/// Accumulates Σ coeff · e_{i₁j₁}⊗…⊗e_{i_N j_N} with 1-based indices.
pub struct Builder {
    arity: usize,
    n: usize,
    spectral: Vec<bool>,
    terms: BTreeMap<(usize, usize), Vec<DynScalar>>,
}

impl Builder {
    pub fn new(arity: usize, n: usize) -> Self {
        Builder { arity, n, spectral: vec![false; arity], terms: BTreeMap::new() }
    }

    pub fn spectral(mut self, slots: &[usize]) -> Self {
        for &s in slots {
            self.spectral[s - 1] = true;
        }
        self
    }

    /// Add coeff at unit positions `units[k] = (i, j)` for slot k.
    pub fn add(&mut self, units: &[(usize, usize)], coeff: DynScalar) {
        assert_eq!(units.len(), self.arity, "one unit matrix per slot");
        if coeff.is_zero_const() {
            return;
        }
        let r: Vec<usize> = units.iter().map(|u| u.0).collect();
        let c: Vec<usize> = units.iter().map(|u| u.1).collect();
        let key = (flat_index(&r, self.n), flat_index(&c, self.n));
        self.terms.entry(key).or_default().push(coeff);
    }

    pub fn build(self) -> TensorOp {
        let entries = self
            .terms
            .into_iter()
            .map(|(k, v)| (k, DynScalar::sum(v)))
            .filter(|(_, v)| !v.is_zero_const())
            .collect();
        TensorOp::node(self.arity, self.n, self.spectral, Kind::Leaf(entries))
    }
}

impl TensorOp {
    fn node(arity: usize, n: usize, spectral: Vec<bool>, kind: Kind) -> Self {
        TensorOp(Arc::new(OpNode { arity, n, spectral, kind }))
    }

    /// Single-slot matrix with entries `f(i, j)`, 1-based.
    pub fn matrix(n: usize, spectral: bool, f: impl Fn(usize, usize) -> DynScalar) -> Self {
        let mut b = Builder::new(1, n);
        if spectral {
            b = b.spectral(&[1]);
        }
        for i in 1..=n {
            for j in 1..=n {
                b.add(&[(i, j)], f(i, j));
            }
        }
        b.build()
    }

    pub fn diagonal(n: usize, spectral: bool, f: impl Fn(usize) -> DynScalar) -> Self {
        TensorOp::matrix(n, spectral, |i, j| if i == j { f(i) } else { DynScalar::zero() })
    }

    pub fn identity(arity: usize, n: usize) -> Self {
        TensorOp::node(arity, n, vec![false; arity], Kind::Identity)
    }

    /// Operator evaluated by an arbitrary exact function of the point.
    pub fn custom(
        arity: usize,
        n: usize,
        spectral: Vec<bool>,
        f: impl Fn(&EvalPoint) -> Result<RatMatrix> + Send + Sync + 'static,
    ) -> Self {
        TensorOp::node(arity, n, spectral, Kind::Custom(Arc::new(f)))
    }

    pub fn arity(&self) -> usize {
        self.0.arity
    }

    pub fn n(&self) -> usize {
        self.0.n
    }

    pub fn dim(&self) -> usize {
        self.0.n.pow(self.0.arity as u32)
    }

    pub fn spectral_slots(&self) -> Vec<usize> {
        (1..=self.0.arity).filter(|&k| self.0.spectral[k - 1]).collect()
    }

    /// Mark slots as carrying a spectral parameter.
    pub fn with_spectral(&self, slots: &[usize]) -> TensorOp {
        let mut spectral = self.0.spectral.clone();
        for &s in slots {
            spectral[s - 1] = true;
        }
        self.wrap_same(spectral, Kind::Subst(self.clone(), Substitution::default()))
    }

    fn wrap_same(&self, spectral: Vec<bool>, kind: Kind) -> TensorOp {
        TensorOp::node(self.0.arity, self.0.n, spectral, kind)
    }

    fn compatible(ops: &[TensorOp]) -> Result<(usize, usize, Vec<bool>)> {
        let first = ops.first().ok_or_else(|| Error::Shape("empty operator list".into()))?;
        let (arity, n) = (first.arity(), first.n());
        let mut spectral = vec![false; arity];
        for o in ops {
            if o.arity() != arity || o.n() != n {
                return Err(Error::Shape(format!(
                    "arity/dimension {}/{} vs {}/{}",
                    o.arity(),
                    o.n(),
                    arity,
                    n
                )));
            }
            for (s, f) in spectral.iter_mut().zip(&o.0.spectral) {
                *s |= *f;
            }
        }
        Ok((arity, n, spectral))
    }

    /// Ordered product ops[0]·ops[1]·….
    pub fn product(ops: &[TensorOp]) -> Result<TensorOp> {
        let (arity, n, spectral) = TensorOp::compatible(ops)?;
        if ops.len() == 1 {
            return Ok(ops[0].clone());
        }
        Ok(TensorOp::node(arity, n, spectral, Kind::Product(ops.to_vec())))
    }

    pub fn mul(&self, o: &TensorOp) -> Result<TensorOp> {
        TensorOp::product(&[self.clone(), o.clone()])
    }

    pub fn sum(ops: &[TensorOp]) -> Result<TensorOp> {
        let (arity, n, spectral) = TensorOp::compatible(ops)?;
        Ok(TensorOp::node(arity, n, spectral, Kind::Sum(ops.to_vec())))
    }

    pub fn add(&self, o: &TensorOp) -> Result<TensorOp> {
        TensorOp::sum(&[self.clone(), o.clone()])
    }

    pub fn sub(&self, o: &TensorOp) -> Result<TensorOp> {
        TensorOp::sum(&[self.clone(), o.scale(DynScalar::int(-1))])
    }

    pub fn scale(&self, s: DynScalar) -> TensorOp {
        self.wrap_same(self.0.spectral.clone(), Kind::Scale(s, self.clone()))
    }

    /// Place this operator on the given 1-based slots of an `arity`-fold product.
    pub fn embed(&self, slots: &[usize], arity: usize) -> Result<TensorOp> {
        if slots.len() != self.arity() || arity > MAX_ARITY || arity < self.arity() {
            return Err(Error::Slot(format!("{slots:?} into arity {arity}")));
        }
        let mut seen = vec![false; arity];
        for &s in slots {
            if s == 0 || s > arity || seen[s - 1] {
                return Err(Error::Slot(format!("{slots:?} into arity {arity}")));
            }
            seen[s - 1] = true;
        }
        let mut spectral = vec![false; arity];
        for (i, &s) in slots.iter().enumerate() {
            spectral[s - 1] = self.0.spectral[i];
        }
        let map = slots.iter().map(|s| s - 1).collect();
        Ok(TensorOp::node(arity, self.n(), spectral, Kind::Embed(self.clone(), map)))
    }

    /// Exchange the two slots of a pair operator, carrying spectral arguments along.
    pub fn swap(&self) -> Result<TensorOp> {
        if self.arity() != 2 {
            return Err(Error::Shape("swap needs arity 2".into()));
        }
        self.embed(&[2, 1], 2)
    }

    /// Dynamical shift λ → λ + γh in the given 1-based slot.
    pub fn shift_h(&self, slot: usize) -> Result<TensorOp> {
        if slot == 0 || slot > self.arity() {
            return Err(Error::Slot(format!("shift in slot {slot} of arity {}", self.arity())));
        }
        Ok(self.wrap_same(self.0.spectral.clone(), Kind::Shift(self.clone(), slot - 1)))
    }

    /// u_k → u_k + m·γ for each listed slot.
    pub fn spectral_shift(&self, slots: &[usize], m: i64) -> Result<TensorOp> {
        let mut pairs = Vec::new();
        for &k in slots {
            if k == 0 || k > self.arity() || !self.0.spectral[k - 1] {
                return Err(Error::NoSpectralSymbol(k));
            }
            pairs.push((Symbol::Spec(k), DynScalar::spec(k) + DynScalar::int(m) * DynScalar::gamma()));
        }
        Ok(self.subst(&Substitution::new(pairs)))
    }

    /// Conjugation by g in each listed slot.
    pub fn conj_g(&self, slots: &[usize]) -> Result<TensorOp> {
        self.spectral_shift(slots, G_SHIFT_SIGN)
    }

    pub fn subst(&self, s: &Substitution) -> TensorOp {
        if s.is_empty() {
            return self.clone();
        }
        self.wrap_same(self.0.spectral.clone(), Kind::Subst(self.clone(), s.clone()))
    }

    pub fn inverse(&self) -> TensorOp {
        self.wrap_same(self.0.spectral.clone(), Kind::Inverse(self.clone()))
    }

    pub fn transpose(&self) -> TensorOp {
        self.wrap_same(self.0.spectral.clone(), Kind::Transpose(self.clone()))
    }

    pub fn eval(&self, p: &EvalPoint) -> Result<RatMatrix> {
        let n = self.n();
        match &self.0.kind {
            Kind::Leaf(entries) => {
                let mut items = Vec::with_capacity(entries.len());
                for (&(r, c), e) in entries {
                    let v = e.eval(p)?;
                    if !v.is_zero() {
                        items.push((r, c, v));
                    }
                }
                Ok(RatMatrix::from_triplets(self.dim(), items))
            }
            Kind::Identity => Ok(RatMatrix::identity(self.dim())),
            Kind::Product(ops) => {
                let mut acc = ops[0].eval(p)?;
                for o in &ops[1..] {
                    acc = acc.mul(&o.eval(p)?)?;
                }
                Ok(acc)
            }
            Kind::Sum(ops) => {
                let mut acc = RatMatrix::zero(self.dim());
                for o in ops {
                    acc = acc.add(&o.eval(p)?)?;
                }
                Ok(acc)
            }
            Kind::Scale(s, o) => {
                let v = s.eval(p)?;
                Ok(o.eval(p)?.scale(&v))
            }
            Kind::Embed(inner, map) => {
                let mut q = p.clone();
                for (i, &s) in map.iter().enumerate() {
                    q.spec[i] = p.spec[s].clone();
                }
                let m = inner.eval(&q)?;
                let (offsets, spectators) = embed_offsets(n, inner.arity(), map, self.arity());
                let mut items = Vec::with_capacity(m.nnz() * spectators.len());
                for (r, c, v) in m.entries() {
                    for s in &spectators {
                        items.push((offsets[r] + s, offsets[c] + s, v.clone()));
                    }
                }
                Ok(RatMatrix::from_triplets(self.dim(), items))
            }
            Kind::Subst(o, s) => o.eval(&s.apply(p)?),
            Kind::Shift(o, m) => {
                let stride = n.pow((self.arity() - 1 - m) as u32);
                let mut items = Vec::new();
                for j in 0..n {
                    let mj = o.eval(&p.shift_lambda(j + 1, 1))?;
                    for (r, c, v) in mj.entries() {
                        let (dr, dc) = ((r / stride) % n, (c / stride) % n);
                        if dr != dc {
                            return Err(Error::NonDiagonalShift(m + 1));
                        }
                        if dr == j {
                            items.push((r, c, v.clone()));
                        }
                    }
                }
                Ok(RatMatrix::from_triplets(self.dim(), items))
            }
            Kind::Inverse(o) => o.eval(p)?.inverse(),
            Kind::Transpose(o) => Ok(o.eval(p)?.transpose()),
            Kind::Custom(f) => f(p),
        }
    }

    /// Symbolic entries; fails for inverses and custom evaluators.
    pub fn materialize(&self) -> Result<BTreeMap<(usize, usize), DynScalar>> {
        let n = self.n();
        Ok(match &self.0.kind {
            Kind::Leaf(e) => e.clone(),
            Kind::Identity => (0..self.dim()).map(|i| ((i, i), DynScalar::one())).collect(),
            Kind::Product(ops) => {
                let mut acc = ops[0].materialize()?;
                for o in &ops[1..] {
                    let b = o.materialize()?;
                    let mut by_row: BTreeMap<usize, Vec<(usize, DynScalar)>> = BTreeMap::new();
                    for ((r, c), v) in b {
                        by_row.entry(r).or_default().push((c, v));
                    }
                    let mut out: BTreeMap<(usize, usize), Vec<DynScalar>> = BTreeMap::new();
                    for ((r, k), a) in &acc {
                        for (c, v) in by_row.get(k).into_iter().flatten() {
                            out.entry((*r, *c)).or_default().push(a * v);
                        }
                    }
                    acc = collapse(out);
                }
                acc
            }
            Kind::Sum(ops) => {
                let mut out: BTreeMap<(usize, usize), Vec<DynScalar>> = BTreeMap::new();
                for o in ops {
                    for (k, v) in o.materialize()? {
                        out.entry(k).or_default().push(v);
                    }
                }
                collapse(out)
            }
            Kind::Scale(s, o) => {
                o.materialize()?.into_iter().map(|(k, v)| (k, s * &v)).filter(|(_, v)| !v.is_zero_const()).collect()
            }
            Kind::Embed(inner, map) => {
                let rename = embed_rename(map);
                let (offsets, spectators) = embed_offsets(n, inner.arity(), map, self.arity());
                let mut out = BTreeMap::new();
                for ((r, c), v) in inner.materialize()? {
                    let v = v.subst(&rename);
                    for s in &spectators {
                        out.insert((offsets[r] + s, offsets[c] + s), v.clone());
                    }
                }
                out
            }
            Kind::Subst(o, s) => o.materialize()?.into_iter().map(|(k, v)| (k, v.subst(s))).collect(),
            Kind::Shift(o, m) => {
                let stride = n.pow((self.arity() - 1 - m) as u32);
                let mut out = BTreeMap::new();
                for ((r, c), v) in o.materialize()? {
                    let (dr, dc) = ((r / stride) % n, (c / stride) % n);
                    if dr != dc {
                        return Err(Error::NonDiagonalShift(m + 1));
                    }
                    out.insert((r, c), v.subst(&Substitution::shift_lambda(dr + 1, 1)));
                }
                out
            }
            Kind::Transpose(o) => o.materialize()?.into_iter().map(|((r, c), v)| ((c, r), v)).collect(),
            Kind::Inverse(_) => return Err(Error::NotMaterializable("inverse".into())),
            Kind::Custom(_) => return Err(Error::NotMaterializable("custom evaluator".into())),
        })
    }

    /// Every divisor occurring in the operator, with shifts and renames applied.
    pub fn denominators(&self) -> Vec<DynScalar> {
        let mut out = Vec::new();
        self.collect_denoms(&mut |d| out.push(d), &[]);
        crate::expr::dedup(out)
    }

    pub(crate) fn collect_denoms(&self, out: &mut dyn FnMut(DynScalar), ctx: &[Substitution]) {
        let push = |s: Substitution, ctx: &[Substitution]| {
            let mut v = vec![s];
            v.extend(ctx.iter().cloned());
            v
        };
        match &self.0.kind {
            Kind::Leaf(e) => e.values().for_each(|v| v.collect_denoms(out, ctx)),
            Kind::Identity | Kind::Custom(_) => {}
            Kind::Product(ops) | Kind::Sum(ops) => ops.iter().for_each(|o| o.collect_denoms(out, ctx)),
            Kind::Scale(s, o) => {
                s.collect_denoms(out, ctx);
                o.collect_denoms(out, ctx);
            }
            Kind::Embed(o, map) => o.collect_denoms(out, &push(embed_rename(map), ctx)),
            Kind::Subst(o, s) => {
                for (_, v) in s.pairs() {
                    v.collect_denoms(out, ctx);
                }
                o.collect_denoms(out, &push(s.clone(), ctx));
            }
            Kind::Shift(o, _) => {
                for j in 1..=self.n() {
                    o.collect_denoms(out, &push(Substitution::shift_lambda(j, 1), ctx));
                }
            }
            Kind::Inverse(o) | Kind::Transpose(o) => o.collect_denoms(out, ctx),
        }
    }

    /// Symbolic entry expression (materializes the operator).
    pub fn entry_expr(&self, row: &[usize], col: &[usize]) -> Result<DynScalar> {
        let m = self.materialize()?;
        let key = (flat_index(row, self.n()), flat_index(col, self.n()));
        Ok(m.get(&key).cloned().unwrap_or_else(DynScalar::zero))
    }

    pub fn dump(&self) -> Result<MatrixDump> {
        let entries = self
            .materialize()?
            .into_iter()
            .map(|((r, c), v)| {
                (multi_index(r, self.n(), self.arity()), multi_index(c, self.n(), self.arity()), v.to_string())
            })
            .collect();
        let spectral = self
            .spectral_slots()
            .into_iter()
            .map(|k| (k.to_string(), Symbol::Spec(k).name()))
            .collect();
        Ok(MatrixDump { arity: self.arity(), n: self.n(), spectral, entries })
    }
}

fn collapse(m: BTreeMap<(usize, usize), Vec<DynScalar>>) -> BTreeMap<(usize, usize), DynScalar> {
    m.into_iter().map(|(k, v)| (k, DynScalar::sum(v))).filter(|(_, v)| !v.is_zero_const()).collect()
}

fn embed_rename(map: &[usize]) -> Substitution {
    let pairs: Vec<(usize, usize)> = map.iter().enumerate().map(|(i, &s)| (i + 1, s + 1)).collect();
    Substitution::rename_spec(&pairs)
}

/// Outer offsets of inner flat indices, and offsets of every spectator assignment.
fn embed_offsets(n: usize, inner_arity: usize, map: &[usize], arity: usize) -> (Vec<usize>, Vec<usize>) {
    let stride = |s: usize| n.pow((arity - 1 - s) as u32);
    let offsets = (0..n.pow(inner_arity as u32))
        .map(|idx| {
            multi_index(idx, n, inner_arity)
                .iter()
                .zip(map)
                .map(|(d, &s)| (d - 1) * stride(s))
                .sum()
        })
        .collect();
    let free: Vec<usize> = (0..arity).filter(|s| !map.contains(s)).collect();
    let spectators = (0..n.pow(free.len() as u32))
        .map(|idx| {
            multi_index(idx, n, free.len())
                .iter()
                .zip(&free)
                .map(|(d, &s)| (d - 1) * stride(s))
                .sum()
        })
        .collect();
    (offsets, spectators)
}

impl fmt::Debug for TensorOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TensorOp(arity {}, n {})", self.arity(), self.n())
    }
}

/// Serialized symbolic operator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixDump {
    pub arity: usize,
    pub n: usize,
    pub spectral: BTreeMap<String, String>,
    pub entries: Vec<(Vec<usize>, Vec<usize>, String)>,
}

/// Denominators of several operators, deduplicated.
pub fn guards_of(ops: &[&TensorOp]) -> Vec<DynScalar> {
    crate::expr::dedup(ops.iter().flat_map(|o| o.denominators()).collect())
}

#[allow(dead_code)]
fn _assert_send_sync() {
    fn is<T: Send + Sync>() {}
    is::<TensorOp>();
    is::<DynScalar>();
}
