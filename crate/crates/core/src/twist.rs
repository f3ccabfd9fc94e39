//! Twists b, R-matrices and Q-matrices: the cocycle parametrization of the structure matrices.

use std::fmt;
use std::str::FromStr;

use crate::check::{merge_into, ResidualReport};
use crate::error::{Error, Result};
use crate::expr::{DynScalar as S, Substitution};
use crate::ksol::KTag;
use crate::structure::{GMode, StructureFamily};
use crate::symbols::{elementary_symmetric, Sampler, Symbol};
use crate::tensor::{Builder, TensorOp};
use crate::verify::{d_from_cocycle, lambda_independence, Identity};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwistName {
    Constant,
    Spectral,
    Hat,
}

impl TwistName {
    pub fn as_str(&self) -> &'static str {
        match self {
            TwistName::Constant => "constant",
            TwistName::Spectral => "spectral",
            TwistName::Hat => "hat",
        }
    }
}

impl fmt::Display for TwistName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TwistName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(TwistName::Constant),
            "spectral" => Ok(TwistName::Spectral),
            "hat" => Ok(TwistName::Hat),
            _ => Err(Error::Parse(format!("unknown twist {s:?}"))),
        }
    }
}

/// A twist b with its R-matrix; q defaults to bᵍ.
#[derive(Clone, Debug)]
pub struct TwistData {
    pub name: TwistName,
    pub n: usize,
    pub b: TensorOp,
    pub r: TensorOp,
    pub g: GMode,
    pub q: Option<TensorOp>,
}

impl TwistData {
    pub fn constant(n: usize) -> Result<Self> {
        check_n(n)?;
        Ok(TwistData { name: TwistName::Constant, n, b: b_constant(n), r: r_constant(n), g: GMode::Identity, q: None })
    }

    pub fn spectral(n: usize, f0: &S) -> Result<Self> {
        check_n(n)?;
        Ok(TwistData {
            name: TwistName::Spectral,
            n,
            b: b_spectral(n, f0),
            r: r_spectral(n, f0),
            g: GMode::SpectralShift,
            q: None,
        })
    }

    pub fn hat(n: usize) -> Result<Self> {
        check_n(n)?;
        Ok(TwistData { name: TwistName::Hat, n, b: bhat(n)?, r: rhat(n), g: GMode::Identity, q: None })
    }

    pub fn by_name(name: TwistName, n: usize) -> Result<Self> {
        match name {
            TwistName::Constant => Self::constant(n),
            TwistName::Spectral => Self::spectral(n, &S::sym(Symbol::F0)),
            TwistName::Hat => Self::hat(n),
        }
    }

    /// bᵍ
    pub fn bg(&self) -> Result<TensorOp> {
        match self.g {
            GMode::SpectralShift if !self.b.spectral_slots().is_empty() => self.b.conj_g(&[1]),
            _ => Ok(self.b.clone()),
        }
    }

    pub fn q(&self) -> Result<TensorOp> {
        match &self.q {
            Some(q) => Ok(q.clone()),
            None => self.bg(),
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::OutOfRange(format!("n = {n} must be at least 2")));
    }
    Ok(())
}

/// Π_{a≠j} λ_ja
fn vandermonde_col(n: usize, j: usize) -> S {
    S::product((1..=n).filter(|&a| a != j).map(|a| S::lambda_diff(j, a)))
}

/// b∞_ij = λ_j^(i−1)/Π_{a≠j}λ_ja
pub fn b_constant(n: usize) -> TensorOp {
    TensorOp::matrix(n, false, |i, j| S::lambda(j).pow(i as u32 - 1) / vandermonde_col(n, j))
}

/// b∞ with its last row times (σ − λ_j + u + γ)/(σ + u + f₀).
pub fn b_spectral(n: usize, f0: &S) -> TensorOp {
    let u = S::spec(1);
    TensorOp::matrix(n, true, |i, j| {
        let base = S::lambda(j).pow(i as u32 - 1) / vandermonde_col(n, j);
        if i < n {
            base
        } else {
            base * (S::sigma() - S::lambda(j) + u.clone() + S::gamma()) / (S::sigma() + u.clone() + f0.clone())
        }
    })
}

/// b̂_ij = e_{n−i}(λ without λ_j)/Π_{k≠j}λ_jk
pub fn bhat(n: usize) -> Result<TensorOp> {
    let mut b = Builder::new(1, n);
    for j in 1..=n {
        let others: Vec<S> = (1..=n).filter(|&a| a != j).map(S::lambda).collect();
        for i in 1..=n {
            b.add(&[(i, j)], elementary_symmetric(&others, n - i)? / vandermonde_col(n, j));
        }
    }
    Ok(b.build())
}

fn e4(b: &mut Builder, (i, j, k, m): (usize, usize, usize, usize), c: S) {
    b.add(&[(i, j), (k, m)], c);
}

/// Σ_{i≤n} Σ_{k<i} Σ_{j≤i−k} (e_{i,i−k}⊗e_{j,j+k−1} − e_{j,j+k−1}⊗e_{i,i−k}), scaled by γ
fn cremmer_gervais(b: &mut Builder, top: usize) {
    for i in 1..=top {
        for k in 1..i {
            for j in 1..=i - k {
                e4(b, (i, i - k, j, j + k - 1), S::gamma());
                e4(b, (j, j + k - 1, i, i - k), -S::gamma());
            }
        }
    }
}

/// R∞
pub fn r_constant(n: usize) -> TensorOp {
    let mut b = Builder::new(2, n);
    for i in 1..=n {
        for j in 1..=n {
            e4(&mut b, (i, i, j, j), S::one());
        }
    }
    cremmer_gervais(&mut b, n);
    b.build()
}

/// R̂∞ = (R∞)ᵀ
pub fn rhat_inf(n: usize) -> TensorOp {
    let mut b = Builder::new(2, n);
    for i in 1..=n {
        for j in 1..=n {
            e4(&mut b, (i, i, j, j), S::one());
        }
    }
    for i in 1..=n {
        for k in 1..i {
            for j in 1..=i - k {
                e4(&mut b, (i - k, i, j + k - 1, j), S::gamma());
                e4(&mut b, (j + k - 1, j, i - k, i), -S::gamma());
            }
        }
    }
    b.build()
}

/// The dynamical spectral R-matrix paired with `b_spectral(n, f₀)`.
pub fn r_spectral(n: usize, f0: &S) -> TensorOp {
    let (u, v, g, s) = (S::spec(1), S::spec(2), S::gamma(), S::sigma());
    let su = &s + &u + f0.clone();
    let sv = &s + &v + f0.clone();
    let su_g = &su - &g;
    let sv_g = &sv - &g;
    let x = &g / &(&u - &v);
    let c = S::one() + x.clone();
    let mut b = Builder::new(2, n).spectral(&[1, 2]);
    for i in 1..n {
        e4(&mut b, (i, i, i, i), c.clone());
        e4(&mut b, (i, i, n, n), &sv / &sv_g);
        e4(&mut b, (n, n, i, i), &su_g / &su);
        e4(&mut b, (i, n, n, i), &x * &su_g / sv_g.clone());
        e4(&mut b, (n, i, i, n), &x * &sv / su.clone());
        for j in (1..n).filter(|&j| j != i) {
            e4(&mut b, (i, i, j, j), S::one());
            e4(&mut b, (i, j, j, i), x.clone());
        }
    }
    e4(&mut b, (n, n, n, n), &c * &sv * su_g.clone() / (&su * &sv_g));
    for k in 1..n {
        for j in 1..=n - k {
            e4(&mut b, (n, n - k, j, j + k - 1), &g * &(&s + &u + g.clone()) / su.clone());
            e4(&mut b, (j, j + k - 1, n, n - k), -(&g * &(&s + &v)) / sv_g.clone());
        }
    }
    cremmer_gervais(&mut b, n - 1);
    for i in 1..n {
        for k in 1..n - i {
            e4(&mut b, (n, n - i, k, k + i), -(&g / &su));
            e4(&mut b, (k, k + i, n, n - i), &g / &sv_g);
        }
    }
    b.build()
}

/// The λ-free R⁰ obtained from `r_spectral(n, γ)` by u → u − σ, v → v − σ.
pub fn r0_spectral(n: usize) -> TensorOp {
    let (u, v, g) = (S::spec(1), S::spec(2), S::gamma());
    let x = &g / &(&u - &v);
    let c = S::one() + x.clone();
    let ug = &u + &g;
    let vg = &v + &g;
    let mut b = Builder::new(2, n).spectral(&[1, 2]);
    for i in 1..n {
        e4(&mut b, (i, i, i, i), c.clone());
        e4(&mut b, (i, i, n, n), &vg / &v);
        e4(&mut b, (n, n, i, i), &u / &ug);
        e4(&mut b, (i, n, n, i), &x * &u / v.clone());
        e4(&mut b, (n, i, i, n), &x * &vg / ug.clone());
        for j in (1..n).filter(|&j| j != i) {
            e4(&mut b, (i, i, j, j), S::one());
            e4(&mut b, (i, j, j, i), x.clone());
        }
    }
    e4(&mut b, (n, n, n, n), &c * &u * vg.clone() / (&v * &ug));
    cremmer_gervais(&mut b, n);
    for i in 1..n {
        for k in 1..n - i {
            e4(&mut b, (n, n - i, k, k + i), -(&g / &ug));
            e4(&mut b, (k, k + i, n, n - i), &g / &v);
        }
    }
    b.build()
}

/// R̂(u − v)
pub fn rhat(n: usize) -> TensorOp {
    let g = S::gamma();
    let x = &g / &(S::spec(1) - S::spec(2));
    let mut b = Builder::new(2, n).spectral(&[1, 2]);
    for i in 1..=n {
        e4(&mut b, (i, i, i, i), S::one() + x.clone());
        for j in (1..=n).filter(|&j| j != i) {
            e4(&mut b, (i, i, j, j), S::one());
            e4(&mut b, (i, j, j, i), x.clone());
        }
        for k in 1..i {
            for j in 1..=i - k {
                e4(&mut b, (i - k, i, j + k - 1, j), g.clone());
                e4(&mut b, (j + k - 1, j, i - k, i), -g.clone());
            }
        }
    }
    b.build()
}

fn binomial(n: u64, k: u64) -> i64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1)) as i64
}

/// Q∞ for IIb (unitriangular binomial) and IIa ((f·e_n1 + e_{n−1,1} + e_{n,2})γ^{n−1}).
pub fn q_constant(tag: KTag, n: usize, f: &S) -> Result<TensorOp> {
    check_n(n)?;
    match tag {
        KTag::IIb => Ok(TensorOp::matrix(n, false, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Equal => S::one(),
            std::cmp::Ordering::Greater => S::int(binomial(i as u64 - 1, (i - j) as u64)) * f.pow((i - j) as u32),
            std::cmp::Ordering::Less => S::zero(),
        })),
        KTag::IIa => {
            let mut b = Builder::new(1, n);
            let scale = S::gamma().pow(n as u32 - 1);
            b.add(&[(n, 1)], f * &scale);
            b.add(&[(n - 1, 1)], scale.clone());
            b.add(&[(n, 2)], scale);
            Ok(b.build())
        }
        _ => Err(Error::Precondition(format!("{tag} has no λ-free Q"))),
    }
}

/// The triangular spectral Q of the IIb extension.
pub fn q_spectral_iib(n: usize, f: &S, f0: &S) -> Result<TensorOp> {
    check_n(n)?;
    let u = S::spec(1);
    let lambdas: Vec<S> = (1..=n).map(S::lambda).collect();
    let mut b = Builder::new(1, n).spectral(&[1]);
    for i in 1..n {
        b.add(&[(i, i)], S::one());
        for j in 1..i {
            b.add(&[(i, j)], S::int(binomial(i as u64 - 1, (i - j) as u64)) * f.pow((i - j) as u32));
        }
    }
    b.add(&[(n, n)], S::one() - S::int(n as i64) * f / u.clone());
    let den = &u * &(&u + &S::sigma() - S::gamma() + f0.clone());
    for j in 1..n {
        let sign = if (n - j + 1) % 2 == 0 { 1 } else { -1 };
        let m = S::int(binomial(n as u64 - 1, (n - j) as u64)) * f.pow((n - j) as u32) * &u * (&u + &S::sigma())
            - S::int(binomial(n as u64, (n - j + 1) as u64)) * f.pow((n - j + 1) as u32) * u.clone()
            + S::int(sign * n as i64) * f * &elementary_symmetric(&lambdas, n - j + 1)?;
        b.add(&[(n, j)], m / den.clone());
    }
    Ok(b.build())
}

/// B₁₂ = b₂⁻¹b₂ᵍ(h₁), A₁₂ = b₁⁻¹(b₂ᵍ)⁻¹R₁₂b₁ᵍb₂, D₁₂ = (b₁ᵍ)⁻¹(h₂)(b₂ᵍ)⁻¹R₁₂b₁ᵍb₂ᵍ(h₁).
pub fn param_identities(data: &TwistData, family: &StructureFamily) -> Result<Vec<Identity>> {
    if data.n != family.n {
        return Err(Error::Shape("twist and family dimensions differ".into()));
    }
    let name = format!("{}/{}", data.name, family.name);
    let bg = data.bg()?;
    let b2 = data.b.embed(&[2], 2)?;
    let (b1g, b2g) = (bg.embed(&[1], 2)?, bg.embed(&[2], 2)?);
    let binv = data.b.inverse();
    let bginv = bg.inverse();
    let bb = binv.embed(&[2], 2)?.mul(&b2g.shift_h(1)?)?;
    let aa = TensorOp::product(&[binv.embed(&[1], 2)?, bginv.embed(&[2], 2)?, data.r.clone(), b1g, b2])?;
    let dd = d_from_cocycle(&data.r, &data.b, data.g)?;
    Ok(vec![
        Identity::new("param-B", &name, family.b.clone(), bb),
        Identity::new("param-A", &name, family.a.clone(), aa),
        Identity::new("param-D", &name, family.d.clone(), dd),
    ])
}

/// X(u;λ) = X(u − γ; λ + γe_j) for every j, in every flagged spectral slot.
pub fn quasi_nondynamical_identities(op: &TensorOp, label: &str) -> Result<Vec<Identity>> {
    let slots = op.spectral_slots();
    (1..=op.n())
        .map(|j| {
            let mut shifted = op.subst(&Substitution::shift_lambda(j, 1));
            if !slots.is_empty() {
                shifted = shifted.spectral_shift(&slots, -1)?;
            }
            Ok(Identity::new(&format!("quasi-nondynamical-{j}"), label, op.clone(), shifted))
        })
        .collect()
}

pub fn quasi_nondynamical_check(op: &TensorOp, label: &str, sampler: &mut Sampler, count: usize) -> Result<ResidualReport> {
    let mut acc = ResidualReport::new("quasi-nondynamical", label, op.n(), sampler.seed(), count);
    for id in quasi_nondynamical_identities(op, label)? {
        merge_into(&mut acc, id.check(sampler, count)?);
    }
    Ok(acc)
}

/// R⁰(u, v) = R(u − σ, v − σ; λ)
pub fn de_dynamize(r: &TensorOp) -> TensorOp {
    let pairs: Vec<(Symbol, S)> = r
        .spectral_slots()
        .into_iter()
        .map(|k| (Symbol::Spec(k), S::spec(k) - S::sigma()))
        .collect();
    r.subst(&Substitution::new(pairs))
}

/// De-dynamize and confirm the result no longer depends on λ.
pub fn de_dynamize_checked(r: &TensorOp, sampler: &mut Sampler, count: usize) -> Result<(TensorOp, ResidualReport)> {
    let r0 = de_dynamize(r);
    let rep = lambda_independence(&r0, "de-dynamize", "", sampler, count)?;
    Ok((r0, rep))
}

/// Q = bᵍ·K·q⁻¹
pub fn build_q(k: &TensorOp, data: &TwistData) -> Result<TensorOp> {
    TensorOp::product(&[data.bg()?, k.clone(), data.q()?.inverse()])
}

/// R₁₂Q₁q₁Q₂(h₁)q₁⁻¹ = Q₂q₂Q₁(h₂)q₂⁻¹R₁₂
pub fn rq_identity(qm: &TensorOp, data: &TwistData) -> Result<Identity> {
    let q = data.q()?;
    let (q1, q2) = (q.embed(&[1], 2)?, q.embed(&[2], 2)?);
    let (q1i, q2i) = (q.inverse().embed(&[1], 2)?, q.inverse().embed(&[2], 2)?);
    let (m1, m2) = (qm.embed(&[1], 2)?, qm.embed(&[2], 2)?);
    Ok(Identity::new(
        "rq",
        data.name.as_str(),
        TensorOp::product(&[data.r.clone(), m1.clone(), q1, m2.shift_h(1)?, q1i])?,
        TensorOp::product(&[m2, q2, m1.shift_h(2)?, q2i, data.r.clone()])?,
    ))
}

/// R⁰₁₂Q⁰₁Q⁰₂(v + γ) = Q⁰₂Q⁰₁(u + γ)R⁰₁₂
pub fn rq0_identity(q0: &TensorOp, r0: &TensorOp, label: &str) -> Result<Identity> {
    let (m1, m2) = (q0.embed(&[1], 2)?, q0.embed(&[2], 2)?);
    let spectral = !q0.spectral_slots().is_empty();
    let (m1s, m2s) = if spectral {
        (m1.spectral_shift(&[1], 1)?, m2.spectral_shift(&[2], 1)?)
    } else {
        (m1.clone(), m2.clone())
    };
    Ok(Identity::new(
        "rq0",
        label,
        TensorOp::product(&[r0.clone(), m1, m2s])?,
        TensorOp::product(&[m2, m1s, r0.clone()])?,
    ))
}

/// b∞·K·b̂⁻¹
pub fn mixed_q(k: &TensorOp) -> Result<TensorOp> {
    let n = k.n();
    TensorOp::product(&[b_constant(n), k.clone(), bhat(n)?.inverse()])
}

/// Q(λ) = Q(λ + γe_i − γe_j) for all i ≠ j: dependence on λ through σ only.
pub fn sigma_only_identities(op: &TensorOp, label: &str) -> Vec<Identity> {
    let n = op.n();
    let mut out = Vec::new();
    for i in 1..=n {
        for j in (1..=n).filter(|&j| j != i) {
            let s = Substitution::new(vec![
                (Symbol::Lambda(i), S::lambda(i) + S::gamma()),
                (Symbol::Lambda(j), S::lambda(j) - S::gamma()),
            ]);
            out.push(Identity::new(&format!("sigma-only-{i}{j}"), label, op.clone(), op.subst(&s)));
        }
    }
    out
}

pub fn sigma_only_check(op: &TensorOp, label: &str, sampler: &mut Sampler, count: usize) -> Result<ResidualReport> {
    let mut acc = ResidualReport::new("sigma-only", label, op.n(), sampler.seed(), count);
    for id in sigma_only_identities(op, label) {
        merge_into(&mut acc, id.check(sampler, count)?);
    }
    Ok(acc)
}

/// R∞₁₂Q₁b̂₁Q₂(h₁)b̂₁⁻¹ = Q₂b̂₂Q₁(h₂)b̂₂⁻¹R̂∞₁₂
pub fn mixed_exchange_identity(k: &TensorOp) -> Result<Identity> {
    let n = k.n();
    let qm = mixed_q(k)?;
    let bh = bhat(n)?;
    let (m1, m2) = (qm.embed(&[1], 2)?, qm.embed(&[2], 2)?);
    let (h1, h2) = (bh.embed(&[1], 2)?, bh.embed(&[2], 2)?);
    let (h1i, h2i) = (bh.inverse().embed(&[1], 2)?, bh.inverse().embed(&[2], 2)?);
    Ok(Identity::new(
        "mixed-exchange",
        "mixed",
        TensorOp::product(&[r_constant(n), m1.clone(), h1, m2.shift_h(1)?, h1i])?,
        TensorOp::product(&[m2, h2, m1.shift_h(2)?, h2i, rhat_inf(n)])?,
    ))
}

/// (b̂K⁻¹b∞⁻¹)₂(h₁)·K₁⁻¹ = K̂₁·(b̂K̂b∞⁻¹)₂(h₁)
pub fn k_relation_identity(k: &TensorOp, khat: &TensorOp) -> Result<Identity> {
    let n = k.n();
    let bh = bhat(n)?;
    let binv = b_constant(n).inverse();
    let left = TensorOp::product(&[bh.clone(), k.inverse(), binv.clone()])?;
    let right = TensorOp::product(&[bh, khat.clone(), binv])?;
    Ok(Identity::new(
        "k-relation",
        "mixed",
        left.embed(&[2], 2)?.shift_h(1)?.mul(&k.inverse().embed(&[1], 2)?)?,
        khat.embed(&[1], 2)?.mul(&right.embed(&[2], 2)?.shift_h(1)?)?,
    ))
}

/// K̂ = K⁻¹ for the IIb solution at n = 2, confirmed against the hat-family equation.
pub fn solve_khat_n2(f: &S, sampler: &mut Sampler, count: usize) -> Result<TensorOp> {
    use crate::ksol::{k_constant, khat_n2};
    let k = k_constant(KTag::IIb, 2, f);
    let khat = khat_n2(f);
    let inverse = Identity::new("khat-inverse", "hat", k.mul(&khat)?, TensorOp::identity(1, 2));
    if !inverse.check(sampler, count)?.pass {
        return Err(Error::Precondition("closed form is not the inverse of K".into()));
    }
    let fam = crate::structure::hat_family(2)?;
    if !crate::verify::sdre_identity(&fam, &khat)?.check(sampler, count)?.pass {
        return Err(Error::Precondition("K⁻¹ does not solve the hat-family equation".into()));
    }
    Ok(khat)
}
