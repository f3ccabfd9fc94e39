//! Free symbols, evaluation points and the seeded point sampler.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::expr::DynScalar;
use crate::rational::Rational;

/// Number of spectral symbols carried by every point (one per tensor slot).
pub const MAX_ARITY: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    /// Dynamical variable, 1-based.
    Lambda(usize),
    Gamma,
    /// Spectral parameter of tensor slot k, 1-based.
    Spec(usize),
    F,
    F0,
    FPrime,
}

impl Symbol {
    pub fn name(&self) -> String {
        match self {
            Symbol::Lambda(i) => format!("lambda{i}"),
            Symbol::Gamma => "gamma".into(),
            Symbol::Spec(k) => format!("u{k}"),
            Symbol::F => "f".into(),
            Symbol::F0 => "f0".into(),
            Symbol::FPrime => "fp".into(),
        }
    }

    pub fn parse(s: &str) -> Result<Symbol> {
        let bad = || Error::Parse(format!("unknown symbol {s:?}"));
        Ok(match s {
            "gamma" => Symbol::Gamma,
            "f" => Symbol::F,
            "f0" => Symbol::F0,
            "fp" => Symbol::FPrime,
            _ => {
                if let Some(i) = s.strip_prefix("lambda") {
                    Symbol::Lambda(i.parse().map_err(|_| bad())?)
                } else if let Some(k) = s.strip_prefix('u') {
                    Symbol::Spec(k.parse().map_err(|_| bad())?)
                } else {
                    return Err(bad());
                }
            }
        })
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// The symbol inventory for a given space dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SymbolTable {
    pub n: usize,
}

impl SymbolTable {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::OutOfRange(format!("dimension {n} < 2")));
        }
        Ok(SymbolTable { n })
    }

    pub fn symbols(&self) -> Vec<Symbol> {
        let mut v: Vec<Symbol> = (1..=self.n).map(Symbol::Lambda).collect();
        v.push(Symbol::Gamma);
        v.extend((1..=MAX_ARITY).map(Symbol::Spec));
        v.extend([Symbol::F, Symbol::F0, Symbol::FPrime]);
        v
    }
}

/// One exact value per registered symbol.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct EvalPoint {
    pub lambda: Vec<Rational>,
    pub gamma: Rational,
    pub spec: [Rational; MAX_ARITY],
    pub f: Rational,
    pub f0: Rational,
    pub fprime: Rational,
}

impl EvalPoint {
    /// All symbols zero except γ = 1; λ = (n, n−1, …, 1).
    pub fn simple(n: usize) -> Self {
        EvalPoint {
            lambda: (0..n).map(|i| Rational::from_int((n - i) as i64)).collect(),
            gamma: Rational::one(),
            spec: [Rational::zero(), Rational::zero(), Rational::zero()],
            f: Rational::zero(),
            f0: Rational::zero(),
            fprime: Rational::zero(),
        }
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn get(&self, s: Symbol) -> Result<Rational> {
        Ok(match s {
            Symbol::Lambda(i) => self
                .lambda
                .get(i.wrapping_sub(1))
                .cloned()
                .ok_or_else(|| Error::OutOfRange(format!("{s} at n = {}", self.n())))?,
            Symbol::Gamma => self.gamma.clone(),
            Symbol::Spec(k) => self
                .spec
                .get(k.wrapping_sub(1))
                .cloned()
                .ok_or_else(|| Error::OutOfRange(s.name()))?,
            Symbol::F => self.f.clone(),
            Symbol::F0 => self.f0.clone(),
            Symbol::FPrime => self.fprime.clone(),
        })
    }

    pub fn set(&mut self, s: Symbol, v: Rational) -> Result<()> {
        let slot = match s {
            Symbol::Lambda(i) => {
                let n = self.n();
                self.lambda
                    .get_mut(i.wrapping_sub(1))
                    .ok_or_else(|| Error::OutOfRange(format!("{s} at n = {n}")))?
            }
            Symbol::Gamma => &mut self.gamma,
            Symbol::Spec(k) => self
                .spec
                .get_mut(k.wrapping_sub(1))
                .ok_or_else(|| Error::OutOfRange(s.name()))?,
            Symbol::F => &mut self.f,
            Symbol::F0 => &mut self.f0,
            Symbol::FPrime => &mut self.fprime,
        };
        *slot = v;
        Ok(())
    }

    pub fn with(&self, s: Symbol, v: Rational) -> Result<Self> {
        let mut p = self.clone();
        p.set(s, v)?;
        Ok(p)
    }

    pub fn sigma(&self) -> Rational {
        self.lambda.iter().cloned().sum()
    }

    /// The point with λ_j advanced by m·γ.
    pub fn shift_lambda(&self, j: usize, m: i64) -> Self {
        let mut p = self.clone();
        p.lambda[j - 1] = &p.lambda[j - 1] + &(&Rational::from_int(m) * &p.gamma);
        p
    }

    pub fn entries(&self) -> Vec<(Symbol, Rational)> {
        SymbolTable { n: self.n() }
            .symbols()
            .into_iter()
            .map(|s| (s, self.get(s).expect("registered symbol")))
            .collect()
    }
}

impl Serialize for EvalPoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let entries = self.entries();
        let mut m = s.serialize_map(Some(entries.len()))?;
        for (k, v) in entries {
            m.serialize_entry(&k.name(), &v)?;
        }
        m.end()
    }
}

impl<'de> Deserialize<'de> for EvalPoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw: BTreeMap<String, Rational> = BTreeMap::deserialize(d)?;
        let n = (1..).take_while(|i| raw.contains_key(&format!("lambda{i}"))).count();
        let mut p = EvalPoint::simple(n.max(1));
        p.lambda.truncate(n);
        for (k, v) in raw {
            let sym = Symbol::parse(&k).map_err(serde::de::Error::custom)?;
            p.set(sym, v).map_err(serde::de::Error::custom)?;
        }
        Ok(p)
    }
}

/// Deterministic generator of guarded random evaluation points.
#[derive(Clone, Debug)]
pub struct Sampler {
    seed: u64,
    rng: ChaCha8Rng,
    guards: Vec<DynScalar>,
    numer: (i64, i64),
    denom: (i64, i64),
    overrides: BTreeMap<Symbol, ((i64, i64), (i64, i64))>,
    max_attempts: usize,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            guards: Vec::new(),
            numer: (-999, 999),
            denom: (1, 49),
            overrides: BTreeMap::new(),
            max_attempts: 1000,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_guards(mut self, guards: Vec<DynScalar>) -> Self {
        self.guards = guards;
        self
    }

    pub fn add_guards(&mut self, guards: impl IntoIterator<Item = DynScalar>) {
        self.guards.extend(guards);
    }

    pub fn guards(&self) -> &[DynScalar] {
        &self.guards
    }

    pub fn with_bounds(mut self, numer: (i64, i64), denom: (i64, i64)) -> Self {
        self.numer = numer;
        self.denom = denom;
        self
    }

    /// Restrict one symbol to its own numerator/denominator ranges.
    pub fn with_symbol_bounds(mut self, s: Symbol, numer: (i64, i64), denom: (i64, i64)) -> Self {
        self.overrides.insert(s, (numer, denom));
        self
    }

    pub fn bounds(&self) -> ((i64, i64), (i64, i64)) {
        (self.numer, self.denom)
    }

    pub fn with_max_attempts(mut self, attempts: usize) -> Self {
        self.max_attempts = attempts;
        self
    }

    fn draw(&mut self, s: Symbol) -> Result<Rational> {
        let (nr, dr) = self.overrides.get(&s).copied().unwrap_or((self.numer, self.denom));
        if nr.0 > nr.1 || dr.0 > dr.1 || dr.0 < 1 {
            return Err(Error::OutOfRange(format!("empty sampling bounds for {s}")));
        }
        let p = self.rng.gen_range(nr.0..=nr.1);
        let q = self.rng.gen_range(dr.0..=dr.1);
        Rational::new(p, q)
    }

    /// Draw the next point satisfying every guard.
    pub fn sample_point(&mut self, table: &SymbolTable) -> Result<EvalPoint> {
        let mut last = String::new();
        for _ in 0..self.max_attempts {
            let mut p = EvalPoint::simple(table.n);
            for s in table.symbols() {
                let v = self.draw(s)?;
                p.set(s, v)?;
            }
            match self.violation(&p) {
                None => return Ok(p),
                Some(g) => last = g,
            }
        }
        Err(Error::GuardExhausted { guard: last, attempts: self.max_attempts })
    }

    /// λ values only are redrawn; other symbols keep their values from `base`.
    pub fn resample_lambda(&mut self, base: &EvalPoint) -> Result<EvalPoint> {
        let mut last = String::new();
        for _ in 0..self.max_attempts {
            let mut p = base.clone();
            for i in 1..=base.n() {
                let v = self.draw(Symbol::Lambda(i))?;
                p.set(Symbol::Lambda(i), v)?;
            }
            match self.violation(&p) {
                None => return Ok(p),
                Some(g) => last = g,
            }
        }
        Err(Error::GuardExhausted { guard: last, attempts: self.max_attempts })
    }

    fn violation(&self, p: &EvalPoint) -> Option<String> {
        if p.gamma.is_zero() {
            return Some("gamma".into());
        }
        for i in 0..p.n() {
            for j in i + 1..p.n() {
                if p.lambda[i] == p.lambda[j] {
                    return Some(format!("(lambda{} - lambda{})", i + 1, j + 1));
                }
            }
        }
        for g in &self.guards {
            match g.eval(p) {
                Ok(v) if !v.is_zero() => {}
                _ => return Some(g.to_string()),
            }
        }
        None
    }

    pub fn points(&mut self, table: &SymbolTable, count: usize) -> Result<Vec<EvalPoint>> {
        (0..count).map(|_| self.sample_point(table)).collect()
    }
}

/// e_k of the given expressions; e_0 = 1.
pub fn elementary_symmetric(values: &[DynScalar], k: usize) -> Result<DynScalar> {
    if k > values.len() {
        return Err(Error::OutOfRange(format!("e_{k} of {} values", values.len())));
    }
    // e[j] holds e_j of the prefix processed so far.
    let mut e: Vec<DynScalar> = vec![DynScalar::one()];
    e.extend((0..k).map(|_| DynScalar::zero()));
    for x in values {
        for j in (1..=k).rev() {
            e[j] = &e[j] + &(&e[j - 1] * x);
        }
    }
    Ok(e.swap_remove(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::DynScalar as S;
    use proptest::prelude::*;

    #[test]
    fn sampler_is_deterministic() {
        let t = SymbolTable::new(3).unwrap();
        let a = Sampler::new(7).points(&t, 5).unwrap();
        let b = Sampler::new(7).points(&t, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = Sampler::new(8).points(&t, 5).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn guards_are_enforced() {
        let t = SymbolTable::new(2).unwrap();
        let g = S::lambda(1) - S::lambda(2);
        let mut s = Sampler::new(1).with_guards(vec![g]).with_bounds((-2, 2), (1, 1));
        for _ in 0..50 {
            let p = s.sample_point(&t).unwrap();
            assert_ne!(p.lambda[0], p.lambda[1]);
            assert!(!p.gamma.is_zero());
        }
    }

    #[test]
    fn unsatisfiable_guard_reports_itself() {
        let t = SymbolTable::new(2).unwrap();
        let g = S::lambda(1) - S::lambda(2) - S::gamma();
        let mut s = Sampler::new(3)
            .with_guards(vec![g.clone()])
            .with_symbol_bounds(Symbol::Lambda(1), (3, 3), (1, 1))
            .with_symbol_bounds(Symbol::Lambda(2), (1, 1), (1, 1))
            .with_symbol_bounds(Symbol::Gamma, (2, 2), (1, 1));
        match s.sample_point(&t) {
            Err(Error::GuardExhausted { guard, attempts }) => {
                assert_eq!(attempts, 1000);
                assert_eq!(guard, g.to_string());
            }
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn point_json_round_trip() {
        let t = SymbolTable::new(3).unwrap();
        let p = Sampler::new(11).sample_point(&t).unwrap();
        let js = serde_json::to_string(&p).unwrap();
        assert!(js.starts_with("{\"lambda1\":"));
        let back: EvalPoint = serde_json::from_str(&js).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn elementary_symmetric_examples() {
        let p = EvalPoint::simple(3).with(Symbol::Lambda(1), Rational::from_int(5)).unwrap();
        let l: Vec<S> = (1..=3).map(S::lambda).collect();
        let (a, b, c) = (Rational::from_int(5), Rational::from_int(2), Rational::from_int(1));
        assert_eq!(elementary_symmetric(&l, 0).unwrap().eval(&p).unwrap(), Rational::one());
        assert_eq!(elementary_symmetric(&l, 1).unwrap().eval(&p).unwrap(), &(&a + &b) + &c);
        assert_eq!(
            elementary_symmetric(&l, 2).unwrap().eval(&p).unwrap(),
            &(&(&a * &b) + &(&a * &c)) + &(&b * &c)
        );
        assert_eq!(elementary_symmetric(&l[1..], 2).unwrap().eval(&p).unwrap(), &b * &c);
        assert!(elementary_symmetric(&l, 4).is_err());
    }

    proptest! {
        #[test]
        fn newton_recurrence(xs in proptest::collection::vec(-50i64..50, 1..6), k in 1usize..6) {
            let m = xs.len();
            prop_assume!(k <= m);
            let vals: Vec<S> = xs.iter().map(|&x| S::int(x)).collect();
            let p = EvalPoint::simple(2);
            let lhs = elementary_symmetric(&vals, k).unwrap().eval(&p).unwrap();
            let head = if k <= m - 1 {
                elementary_symmetric(&vals[..m - 1], k).unwrap().eval(&p).unwrap()
            } else {
                Rational::zero()
            };
            let tail = elementary_symmetric(&vals[..m - 1], k - 1).unwrap().eval(&p).unwrap();
            prop_assert_eq!(lhs, &head + &(&Rational::from_int(xs[m - 1]) * &tail));
        }
    }
}
