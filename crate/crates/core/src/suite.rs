//! Named verification suites shared by the command line and the acceptance harness.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ansatz::{analyze_extension, ExtensionRequest, Model, Status};
use crate::check::{merge_into, ResidualReport};
use crate::diffop::{diff_is_zero, trace_trick_a, trace_trick_b, transfer_trace, DiffOperator};
use crate::error::{Error, Result};
use crate::expr::{DynScalar as S, Substitution};
use crate::ksol::{
    f_sym, k_constant, k_diag_spectral, k_first_order, k_naive, k_spectral, khat_n2, random_k, rank_profile,
    shift_poles, zero_columns, KTag,
};
use crate::limit::spectral_limit_check;
use crate::matrix::RatMatrix;
use crate::rational::Rational;
use crate::structure::{acf_constant, acf_spectral, d_inf, hat_family, FamilyName, GMode, StructureFamily};
use crate::symbols::{Sampler, Symbol};
use crate::tensor::TensorOp;
use crate::twist::*;
use crate::verify::{
    consistency_identities, gnf_identity, prop31_check, sdre_equivalence_identity, sdre_identity,
    sdre_simplified_identity, shifted_ybe_identity, simplification_identities, vanishing_control, ybe_identity,
    Identity,
};

/// Points used for rank profiles regardless of the sample count.
pub const RANK_POINTS: usize = 50;
/// Random non-solutions fed to the rearrangement check.
pub const RANDOM_K: u64 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Suite {
    Consistency,
    Gnf,
    Sdre,
    SdreSimplified,
    Rank,
    Simplification,
    Param,
    Ybe,
    ShiftedYbe,
    QuasiNondyn,
    Prop31,
    Rq,
    Rq0,
    Limits,
    Extension,
    Closure,
    TraceCommute,
}

impl Suite {
    pub const ALL: [Suite; 17] = [
        Suite::Consistency,
        Suite::Gnf,
        Suite::Sdre,
        Suite::SdreSimplified,
        Suite::Rank,
        Suite::Simplification,
        Suite::Param,
        Suite::Ybe,
        Suite::ShiftedYbe,
        Suite::QuasiNondyn,
        Suite::Prop31,
        Suite::Rq,
        Suite::Rq0,
        Suite::Limits,
        Suite::Extension,
        Suite::Closure,
        Suite::TraceCommute,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Suite::Consistency => "consistency",
            Suite::Gnf => "gnf",
            Suite::Sdre => "sdre",
            Suite::SdreSimplified => "sdre-simplified",
            Suite::Rank => "rank",
            Suite::Simplification => "simplification",
            Suite::Param => "param",
            Suite::Ybe => "ybe",
            Suite::ShiftedYbe => "shifted-ybe",
            Suite::QuasiNondyn => "quasi-nondyn",
            Suite::Prop31 => "prop31",
            Suite::Rq => "rq",
            Suite::Rq0 => "rq0",
            Suite::Limits => "limits",
            Suite::Extension => "extension",
            Suite::Closure => "closure",
            Suite::TraceCommute => "trace-commute",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown suite {s:?}")))
    }
}

/// One or all suites.
pub fn parse_selection(s: &str) -> Result<Vec<Suite>> {
    if s == "all" {
        Ok(Suite::ALL.to_vec())
    } else {
        Ok(vec![s.parse()?])
    }
}

/// A K to bind into the reflection equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KSpec {
    /// Constant for the constant family, the spectral extension otherwise.
    Tag(KTag),
    Naive(KTag),
    ZeroColumn(KTag),
    FlatDiagonal(KTag),
    Poles(KTag),
    Diagonal,
    Hat,
}

impl fmt::Display for KSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KSpec::Tag(t) => write!(f, "{t}"),
            KSpec::Naive(t) => write!(f, "{t}-naive"),
            KSpec::ZeroColumn(t) => write!(f, "{t}-zero-column"),
            KSpec::FlatDiagonal(t) => write!(f, "{t}-flat-diagonal"),
            KSpec::Poles(t) => write!(f, "{t}-poles"),
            KSpec::Diagonal => f.write_str("diagonal"),
            KSpec::Hat => f.write_str("khat"),
        }
    }
}

impl FromStr for KSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diagonal" => return Ok(KSpec::Diagonal),
            "khat" => return Ok(KSpec::Hat),
            _ => {}
        }
        let (tag, rest) = s.split_once('-').unwrap_or((s, ""));
        let tag: KTag = tag.parse()?;
        match rest {
            "" => Ok(KSpec::Tag(tag)),
            "naive" => Ok(KSpec::Naive(tag)),
            "zero-column" => Ok(KSpec::ZeroColumn(tag)),
            "flat-diagonal" => Ok(KSpec::FlatDiagonal(tag)),
            "poles" => Ok(KSpec::Poles(tag)),
            _ => Err(Error::Parse(format!("unknown K variant {s:?}"))),
        }
    }
}

/// diag(λ₁ + 1, …, λ_n + n): each entry depends on its own λ only, hence flat.
pub fn flat_diagonal(n: usize) -> TensorOp {
    TensorOp::diagonal(n, false, |i| S::lambda(i) + S::int(i as i64))
}

impl KSpec {
    pub fn build(&self, family: FamilyName, n: usize) -> Result<TensorOp> {
        let f = f_sym();
        let spectral = family == FamilyName::AcfSpectral;
        match *self {
            KSpec::Tag(t) if spectral => k_spectral(t, n, &f),
            KSpec::Tag(t) => Ok(k_constant(t, n, &f)),
            KSpec::Naive(t) => Ok(k_naive(t, n, &f)),
            KSpec::ZeroColumn(t) => zero_columns(&KSpec::Tag(t).build(family, n)?, &[1]),
            KSpec::FlatDiagonal(t) => KSpec::Tag(t).build(family, n)?.mul(&flat_diagonal(n)),
            KSpec::Poles(t) => Ok(shift_poles(&k_spectral(t, n, &f)?, 1, &S::sym(Symbol::F0))),
            KSpec::Diagonal => Ok(k_diag_spectral(n, &S::sym(Symbol::FPrime))),
            KSpec::Hat if n == 2 => Ok(khat_n2(&f)),
            KSpec::Hat => Err(Error::OutOfRange("the hat-family K is only known at n = 2".into())),
        }
    }

    /// Whether this K can be bound to the family.
    pub fn applies(&self, family: FamilyName) -> bool {
        match (self, family) {
            (KSpec::Tag(_) | KSpec::ZeroColumn(_) | KSpec::FlatDiagonal(_), FamilyName::AcfConstant) => true,
            (KSpec::Tag(t) | KSpec::ZeroColumn(t) | KSpec::FlatDiagonal(t), FamilyName::AcfSpectral) => {
                t.has_spectral_extension()
            }
            (KSpec::Naive(_) | KSpec::Poles(_) | KSpec::Diagonal, FamilyName::AcfSpectral) => true,
            (KSpec::Hat, FamilyName::Hat) => true,
            _ => false,
        }
    }

    /// The solutions checked when no K is named.
    pub fn defaults(family: FamilyName, n: usize) -> Vec<KSpec> {
        match family {
            FamilyName::AcfConstant => {
                let mut v: Vec<KSpec> = KTag::ALL.iter().map(|&t| KSpec::Tag(t)).collect();
                v.extend([KTag::IIa, KTag::IIb].map(KSpec::ZeroColumn));
                v.extend(KTag::ALL.map(KSpec::FlatDiagonal));
                v
            }
            FamilyName::AcfSpectral => {
                let mut v = vec![KSpec::Tag(KTag::Ib), KSpec::Tag(KTag::IIb), KSpec::Diagonal];
                if n == 2 {
                    v.extend([KSpec::Poles(KTag::Ib), KSpec::Poles(KTag::IIb)]);
                }
                v
            }
            FamilyName::Hat if n == 2 => vec![KSpec::Hat],
            FamilyName::Hat => vec![],
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuiteOptions {
    pub n: usize,
    pub seed: u64,
    pub samples: usize,
    pub family: Option<FamilyName>,
    pub k: Option<KSpec>,
    pub twist: Option<TwistName>,
    pub tag: Option<KTag>,
    /// Replace every identity by its γ → 2γ perturbation and drop negative controls.
    pub perturb: bool,
}

impl SuiteOptions {
    pub fn new(n: usize, seed: u64, samples: usize) -> Self {
        SuiteOptions { n, seed, samples, family: None, k: None, twist: None, tag: None, perturb: false }
    }

    pub fn perturbed(mut self) -> Self {
        self.perturb = true;
        self
    }

    fn families(&self) -> Vec<FamilyName> {
        match self.family {
            Some(f) => vec![f],
            None => vec![FamilyName::AcfConstant, FamilyName::AcfSpectral, FamilyName::Hat],
        }
    }
}

/// All reports of one suite run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub n: usize,
    pub seed: u64,
    pub samples: usize,
    pub perturbed: bool,
    pub pass: bool,
    pub reports: Vec<ResidualReport>,
}

impl SuiteReport {
    pub fn first_witness(&self) -> Option<String> {
        self.reports.iter().filter(|r| !r.pass).find_map(|r| r.first_witness().or_else(|| Some(r.identity.clone())))
    }

    pub fn failed(&self) -> usize {
        self.reports.iter().filter(|r| !r.pass).count()
    }
}

struct Runner<'a> {
    o: &'a SuiteOptions,
    out: Vec<ResidualReport>,
}

impl<'a> Runner<'a> {
    fn sampler(&self) -> Sampler {
        Sampler::new(self.o.seed)
    }

    fn relabel(mut r: ResidualReport, name: &str, family: &str) -> ResidualReport {
        r.identity = name.to_string();
        if !family.is_empty() {
            r.family = family.to_string();
        }
        r
    }

    /// An identity claimed to hold.
    fn holds(&mut self, id: Identity, name: &str) -> Result<()> {
        let (id, name) = if self.o.perturb { (id.perturbed(), format!("{name}-perturbed")) } else { (id, name.into()) };
        let r = id.check(&mut self.sampler(), self.o.samples)?;
        self.out.push(Self::relabel(r, &name, &id.family));
        Ok(())
    }

    fn all_hold(&mut self, ids: Vec<Identity>, name: &str) -> Result<()> {
        let family = ids.first().map(|i| i.family.clone()).unwrap_or_default();
        let shown = if self.o.perturb { format!("{name}-perturbed") } else { name.to_string() };
        let mut acc = ResidualReport::new(&shown, &family, self.o.n, self.o.seed, self.o.samples);
        for id in ids {
            let id = if self.o.perturb { id.perturbed() } else { id };
            merge_into(&mut acc, id.check(&mut self.sampler(), self.o.samples)?);
        }
        self.out.push(acc);
        Ok(())
    }

    /// A negative control: passes when the identity fails.
    fn fails(&mut self, id: Identity, name: &str) -> Result<()> {
        if self.o.perturb {
            return Ok(());
        }
        let r = id.check(&mut self.sampler(), self.o.samples)?;
        self.verdict(name, &id.family, !r.pass);
        Ok(())
    }

    fn fails_report(&mut self, r: ResidualReport, name: &str) {
        if !self.o.perturb {
            let family = r.family.clone();
            self.verdict(name, &family, !r.pass);
        }
    }

    fn verdict(&mut self, name: &str, family: &str, pass: bool) {
        self.out.push(ResidualReport::verdict(name, family, self.o.n, self.o.seed, self.o.samples, pass));
    }

    fn report(&mut self, r: ResidualReport, name: &str, family: &str) {
        self.out.push(Self::relabel(r, name, family));
    }

    fn diff_zero(&mut self, op: &DiffOperator, perturbed: &DiffOperator, name: &str) -> Result<()> {
        let (op, name) = if self.o.perturb { (perturbed, format!("{name}-perturbed")) } else { (op, name.into()) };
        let r = diff_is_zero(op, &name, &mut self.sampler(), self.o.samples)?;
        self.out.push(r);
        Ok(())
    }
}

fn family(name: FamilyName, n: usize) -> Result<StructureFamily> {
    match name {
        FamilyName::AcfConstant => acf_constant(n),
        FamilyName::AcfSpectral => acf_spectral(n),
        FamilyName::Hat => hat_family(n),
    }
}

fn gamma2() -> Substitution {
    Substitution::single(Symbol::Gamma, S::int(2) * S::gamma())
}

fn f0() -> S {
    S::sym(Symbol::F0)
}

/// Run one suite.
pub fn run(suite: Suite, o: &SuiteOptions) -> Result<SuiteReport> {
    if o.n < 2 {
        return Err(Error::OutOfRange(format!("n = {} must be at least 2", o.n)));
    }
    if o.samples == 0 {
        return Err(Error::OutOfRange("at least one sample is needed".into()));
    }
    let mut r = Runner { o, out: Vec::new() };
    match suite {
        Suite::Consistency => consistency(&mut r)?,
        Suite::Gnf => gnf(&mut r)?,
        Suite::Sdre => sdre(&mut r, false)?,
        Suite::SdreSimplified => sdre(&mut r, true)?,
        Suite::Rank => rank(&mut r)?,
        Suite::Simplification => simplification(&mut r)?,
        Suite::Param => param(&mut r)?,
        Suite::Ybe => ybe(&mut r)?,
        Suite::ShiftedYbe => shifted_ybe(&mut r)?,
        Suite::QuasiNondyn => quasi_nondyn(&mut r)?,
        Suite::Prop31 => prop31(&mut r)?,
        Suite::Rq => rq(&mut r)?,
        Suite::Rq0 => rq0(&mut r)?,
        Suite::Limits => limits(&mut r)?,
        Suite::Extension => extension(&mut r)?,
        Suite::Closure => closure(&mut r)?,
        Suite::TraceCommute => trace_commute(&mut r)?,
    }
    let pass = r.out.iter().all(|x| x.pass);
    Ok(SuiteReport {
        suite: suite.as_str().into(),
        n: o.n,
        seed: o.seed,
        samples: o.samples,
        perturbed: o.perturb,
        pass,
        reports: r.out,
    })
}

fn consistency(r: &mut Runner) -> Result<()> {
    for name in r.o.families() {
        let fam = family(name, r.o.n)?;
        for id in consistency_identities(&fam)?.into_iter().filter(|i| i.id != "gnf") {
            let label = id.id.clone();
            r.holds(id, &label)?;
        }
    }
    Ok(())
}

fn gnf(r: &mut Runner) -> Result<()> {
    for name in r.o.families() {
        let fam = family(name, r.o.n)?;
        r.holds(gnf_identity(&fam.d, name.as_str())?, "gnf")?;
    }
    Ok(())
}

fn sdre(r: &mut Runner, simplified: bool) -> Result<()> {
    let n = r.o.n;
    for name in r.o.families() {
        if simplified && name != FamilyName::AcfSpectral {
            continue;
        }
        let fam = family(name, n)?;
        let ks = match r.o.k {
            Some(k) if r.o.family.is_some() || k.applies(name) => vec![k],
            Some(_) => continue,
            None => KSpec::defaults(name, n),
        };
        for spec in ks {
            let k = spec.build(name, n)?;
            let (id, label) = if simplified {
                (sdre_simplified_identity(&fam, &k)?, format!("sdre-simplified[{spec}]"))
            } else {
                (sdre_identity(&fam, &k)?, format!("sdre[{spec}]"))
            };
            r.holds(id, &label)?;
        }
        if r.o.k.is_none() && name == FamilyName::AcfSpectral && !simplified {
            let naive = KSpec::Naive(KTag::IIa);
            r.fails(sdre_identity(&fam, &naive.build(name, n)?)?, &format!("sdre[{naive}]-fails"))?;
        }
    }
    Ok(())
}

fn expected_rank(tag: KTag, n: usize) -> usize {
    match tag {
        KTag::Ia | KTag::Ib => 1,
        KTag::IIa => 2,
        KTag::IIb => n,
    }
}

/// K + γe₁₁ breaks the rank claims of every family.
fn rank_perturbation(k: &TensorOp) -> Result<TensorOp> {
    let e11 = TensorOp::matrix(k.n(), false, |i, j| if i == 1 && j == 1 { S::gamma() } else { S::zero() });
    k.add(&e11)
}

fn rank(r: &mut Runner) -> Result<()> {
    let n = r.o.n;
    let f = f_sym();
    for tag in KTag::ALL {
        let mut k = k_constant(tag, n, &f);
        let mut label = format!("rank[{tag}]");
        if r.o.perturb {
            k = rank_perturbation(&k)?;
            label.push_str("-perturbed");
        }
        let got = rank_profile(&k, &mut r.sampler(), RANK_POINTS.max(r.o.samples))?;
        let want = expected_rank(tag, n);
        r.verdict(&label, "", got.len() == 1 && got.contains(&want));
    }
    if n == 2 {
        r.holds(Identity::new("collapse", "", k_constant(KTag::Ia, 2, &f), k_constant(KTag::Ib, 2, &f)), "Ia=Ib")?;
        let scaled = k_constant(KTag::IIb, 2, &f).scale(S::gamma());
        r.holds(Identity::new("collapse", "", k_constant(KTag::IIa, 2, &f), scaled), "IIa=γ·IIb")?;
    } else {
        r.fails(Identity::new("collapse", "", k_constant(KTag::Ia, n, &f), k_constant(KTag::Ib, n, &f)), "Ia≠Ib")?;
    }
    Ok(())
}

/// Every k⁽ˡ⁾ coefficient of the implemented solutions.
pub fn coefficients(n: usize) -> Result<Vec<(String, TensorOp)>> {
    let f = f_sym();
    let mut out: Vec<(String, TensorOp)> = KTag::ALL.iter().map(|t| (format!("k0-{t}"), k_constant(*t, n, &f))).collect();
    for t in [KTag::Ib, KTag::IIb] {
        out.push((format!("k1-{t}"), k_first_order(t, n, &f)?));
    }
    for t in [KTag::IIa, KTag::IIb] {
        out.push((format!("k0-{t}-zero-column"), zero_columns(&k_constant(t, n, &f), &[1])?));
    }
    for t in KTag::ALL {
        out.push((format!("k0-{t}-flat-diagonal"), k_constant(t, n, &f).mul(&flat_diagonal(n))?));
    }
    out.push(("k1-diagonal".into(), TensorOp::identity(1, n).scale(S::sym(Symbol::FPrime) / S::gamma())));
    Ok(out)
}

fn simplification(r: &mut Runner) -> Result<()> {
    let n = r.o.n;
    for (label, k) in coefficients(n)? {
        for id in simplification_identities(&k, &label)? {
            let name = format!("{}[{label}]", id.id);
            r.holds(id, &name)?;
        }
    }
    let generic = TensorOp::matrix(n, false, |i, j| S::lambda(i) * S::lambda(j) + S::int((i * j) as i64));
    r.fails(vanishing_control(&generic, "generic")?, "vanishing-control-fails")?;
    let fam = acf_spectral(n)?;
    for seed in 0..RANDOM_K {
        let k = random_k(n, r.o.seed.wrapping_mul(1000).wrapping_add(seed))?;
        r.holds(sdre_equivalence_identity(&fam, &k)?, &format!("rearrangement[random-{seed}]"))?;
    }
    Ok(())
}

fn param(r: &mut Runner) -> Result<()> {
    let n = r.o.n;
    let twists = match r.o.twist {
        Some(t) => vec![t],
        None => vec![TwistName::Constant, TwistName::Spectral, TwistName::Hat],
    };
    for t in twists {
        let (data, fam) = match t {
            TwistName::Constant => (TwistData::constant(n)?, acf_constant(n)?),
            TwistName::Spectral => (TwistData::spectral(n, &f0())?, acf_spectral(n)?),
            TwistName::Hat => (TwistData::hat(n)?, hat_family(n)?),
        };
        for id in param_identities(&data, &fam)? {
            let name = format!("{}[{t}]", id.id);
            r.holds(id, &name)?;
        }
    }
    Ok(())
}

fn ybe(r: &mut Runner) -> Result<()> {
    let n = r.o.n;
    r.holds(ybe_identity(&r_constant(n), "R-inf")?, "ybe[R-inf]")?;
    r.holds(ybe_identity(&rhat(n), "R-hat")?, "ybe[R-hat]")?;
    r.fails(ybe_identity(&r0_spectral(n), "R0")?, "ybe[R0]-fails")?;
    Ok(())
}

fn shifted_ybe(r: &mut Runner) -> Result<()> {
    let mut s = r.sampler();
    let id = shifted_ybe_identity(&r0_spectral(r.o.n), "R0", &mut s)?;
    r.holds(id, "shifted-ybe[R0]")
}

fn quasi_nondyn(r: &mut Runner) -> Result<()> {
    let n = r.o.n;
    let ids = quasi_nondynamical_identities(&r_spectral(n, &f0()), "R")?;
    r.all_hold(ids, "quasi-nondynamical[R]")?;
    let r0 = de_dynamize(&r_spectral(n, &S::gamma()));
    let indep = crate::verify::lambda_independence(&r0, "lambda-independence", "R0", &mut r.sampler(), r.o.samples)?;
    if !r.o.perturb {
        r.report(indep, "de-dynamize-lambda-free", "R0");
    }
    r.holds(Identity::new("de-dynamize", "R0", r0, r0_spectral(n)), "de-dynamize[R0]")?;
    let data = TwistData::constant(n)?;
    for tag in [KTag::Ia, KTag::Ib] {
        let q = build_q(&k_constant(tag, n, &f_sym()), &data)?;
        let rep = quasi_nondynamical_check(&q, &format!("Q-{tag}"), &mut r.sampler(), r.o.samples)?;
        r.fails_report(rep, &format!("quasi-nondynamical[Q-{tag}]-fails"));
    }
    Ok(())
}

fn prop31(r: &mut Runner) -> Result<()> {
    let n = r.o.n;
    let datasets = [("constant", r_constant(n), b_constant(n)), ("hat", rhat(n), bhat(n)?)];
    for (label, rm, q) in datasets {
        let (rm, name) = if r.o.perturb { (rm.subst(&gamma2()), format!("prop31[{label}]-perturbed")) } else { (rm, format!("prop31[{label}]")) };
        let rep = prop31_check(&rm, &q, GMode::Identity, label, &mut r.sampler(), r.o.samples)?;
        let mut acc = ResidualReport::new(&name, label, n, r.o.seed, r.o.samples);
        for x in rep.reports.clone() {
            merge_into(&mut acc, x);
        }
        acc.pass = rep.zero_weight && rep.gnf == Some(true);
        r.out.push(acc);
    }
    Ok(())
}

fn rq(r: &mut Runner) -> Result<()> {
    let n = r.o.n;
    let f = f_sym();
    let data = TwistData::constant(n)?;
    let tags = match r.o.tag {
        Some(t) => vec![t],
        None => vec![KTag::IIa, KTag::IIb],
    };
    for tag in &tags {
        let q = build_q(&k_constant(*tag, n, &f), &data)?;
        r.holds(Identity::new("q-product", "constant", q.clone(), q_constant(*tag, n, &f)?), &format!("q-product[{tag}]"))?;
        r.holds(rq_identity(&q, &data)?, &format!("rq[Q-inf-{tag}]"))?;
    }
    if n <= 3 && tags.contains(&KTag::IIb) {
        let sdata = TwistData::spectral(n, &f0())?;
        let closed = q_spectral_iib(n, &f, &f0())?;
        let product = build_q(&k_spectral(KTag::IIb, n, &f)?, &sdata)?;
        r.holds(Identity::new("q-product", "spectral", product, closed.clone()), "q-product[spectral-IIb]")?;
        r.holds(rq_identity(&closed, &sdata)?, "rq[Q-spectral-IIb]")?;
    }
    Ok(())
}

fn rq0(r: &mut Runner) -> Result<()> {
    let n = r.o.n;
    let tags = match r.o.tag {
        Some(t) => vec![t],
        None => vec![KTag::IIa, KTag::IIb],
    };
    for tag in tags {
        let q = q_constant(tag, n, &f_sym())?;
        r.holds(rq0_identity(&q, &r_constant(n), "R-inf")?, &format!("rq0[Q-inf-{tag}]"))?;
    }
    Ok(())
}

fn limit(r: &mut Runner, name: &str, op: &TensorOp, target: &TensorOp, slots: &[usize]) -> Result<()> {
    let (op, name) = if r.o.perturb { (op.subst(&gamma2()), format!("{name}-perturbed")) } else { (op.clone(), name.into()) };
    let rep = spectral_limit_check(&name, &op, target, slots, &mut r.sampler(), r.o.samples)?;
    r.out.push(rep);
    Ok(())
}

fn limits(r: &mut Runner) -> Result<()> {
    let n = r.o.n;
    limit(r, "limit[b]", &b_spectral(n, &f0()), &b_constant(n), &[1])?;
    limit(r, "limit[R]", &r_spectral(n, &f0()), &r_constant(n), &[1, 2])?;
    limit(r, "limit[R-hat]", &rhat(n), &rhat_inf(n), &[1, 2])?;
    limit(r, "limit[Q-IIb]", &q_spectral_iib(n, &f_sym(), &f0())?, &q_constant(KTag::IIb, n, &f_sym())?, &[1])?;
    r.holds(Identity::new("transpose", "", rhat_inf(n), r_constant(n).transpose()), "R-hat-inf=transpose(R-inf)")?;
    Ok(())
}

fn extension(r: &mut Runner) -> Result<()> {
    let n = r.o.n;
    let tags = match r.o.tag {
        Some(t) => vec![t],
        None => KTag::ALL.to_vec(),
    };
    for tag in tags {
        let req = ExtensionRequest { base: tag, n, order: 1, degree: None, model: Model::Pointwise, samples: r.o.samples };
        let ext = analyze_extension(&req, &mut r.sampler())?;
        let c = &ext.certificate;
        if tag.has_spectral_extension() {
            r.verdict(&format!("extension[{tag}]-unique"), tag.as_str(), c.status == Status::Unique && c.quadratic_pass == Some(true));
            match &ext.k1 {
                Some(k1) => {
                    let id = Identity::new("closed-form", tag.as_str(), k1.clone(), k_first_order(tag, n, &f_sym())?);
                    r.holds(id, &format!("extension[{tag}]-closed-form"))?;
                }
                None => r.verdict(&format!("extension[{tag}]-closed-form"), tag.as_str(), false),
            }
        } else if n >= 3 {
            r.verdict(&format!("extension[{tag}]-infeasible"), tag.as_str(), c.status == Status::Infeasible);
        }
    }
    if n == 2 && r.o.tag.is_none_or(|t| t == KTag::IIb) {
        let req = ExtensionRequest { base: KTag::IIb, n, order: 2, degree: None, model: Model::Pointwise, samples: r.o.samples.min(4) };
        let c = analyze_extension(&req, &mut r.sampler())?.certificate;
        r.verdict("extension[IIb]-order-two-zero", "IIb", c.status == Status::Unique && c.solution.is_some());
    }
    Ok(())
}

fn closure(r: &mut Runner) -> Result<()> {
    let n = r.o.n;
    let f = f_sym();
    let k = k_constant(KTag::IIb, n, &f);
    r.holds(mixed_exchange_identity(&k)?, "mixed-exchange")?;
    if n == 2 {
        let q = mixed_q(&k)?;
        let want = TensorOp::matrix(2, false, |i, j| match (i, j) {
            (1, 1) => S::zero(),
            (1, 2) => S::one(),
            (2, 1) => S::int(-1),
            _ => f_sym() + S::sigma(),
        });
        r.holds(Identity::new("mixed-q", "mixed", q.clone(), want), "mixed-q")?;
        r.all_hold(sigma_only_identities(&q, "mixed"), "sigma-only[mixed-q]")?;
        let khat = khat_n2(&f);
        r.holds(Identity::new("khat-inverse", "hat", k.mul(&khat)?, TensorOp::identity(1, 2)), "khat-inverse")?;
        r.holds(sdre_identity(&hat_family(2)?, &khat)?, "sdre[khat]")?;
        r.holds(k_relation_identity(&k, &khat)?, "k-relation")?;
    } else {
        let q = mixed_q(&k)?;
        let rep = crate::twist::sigma_only_check(&q, "mixed", &mut r.sampler(), r.o.samples)?;
        r.fails_report(rep, "sigma-only[mixed-q]-fails");
    }
    Ok(())
}

/// A seeded matrix with entries rational in λ, for the trace tricks.
fn dyn_matrix(n: usize, seed: i64) -> TensorOp {
    TensorOp::matrix(n, false, move |i, j| {
        let a = (seed + 3 * i as i64 + 5 * j as i64) % 7 + 1;
        (S::lambda(i) * S::int(a) + S::lambda(j) + S::int(seed)) / (S::lambda(1) + S::int(a + 11))
    })
}

/// A λ-linear operator on two spaces used as the conjugated operator of trick (b).
fn linear_operator(n: usize, seed: i64) -> TensorOp {
    let dim = n * n;
    TensorOp::custom(2, n, vec![false, false], move |p| {
        let l = &p.lambda;
        let rows: Vec<Vec<Rational>> = (0..dim)
            .map(|r| {
                (0..dim)
                    .map(|c| {
                        &l[0] * &Rational::from_int((r * dim + c) as i64 + seed) - &l[1] * &Rational::from_int(c as i64)
                    })
                    .collect()
            })
            .collect();
        Ok(RatMatrix::from_dense(&rows))
    })
}

fn trace_commute(r: &mut Runner) -> Result<()> {
    let n = r.o.n;
    let tag = r.o.tag.unwrap_or(KTag::IIb);
    let b = b_constant(n);
    let q = q_constant(tag, n, &f_sym())?;
    let tu = transfer_trace(&b, &q, 1)?;
    let tv = transfer_trace(&b, &q, 2)?;
    // Q∞ carries no γ, so the perturbation doubles f in one trace instead.
    let f2 = Substitution::single(Symbol::F, S::int(2) * f_sym());
    let tv_bad = transfer_trace(&b, &q.subst(&f2), 2)?;
    r.diff_zero(&tu.commutator(&tv), &tu.commutator(&tv_bad), &format!("trace-commute[{tag}]"))?;
    if !r.o.perturb {
        let qp = q_constant(tag, n, &S::sym(Symbol::FPrime))?;
        let tw = transfer_trace(&b, &qp, 2)?;
        let rep = diff_is_zero(&tu.commutator(&tw), "trace-commute-distinct-f", &mut r.sampler(), r.o.samples)?;
        r.fails_report(rep, &format!("trace-commute[{tag}]-distinct-f-fails"));
    }
    if n == 2 {
        let s = r.o.seed as i64;
        let (m, nn, o) = (dyn_matrix(2, s + 1), dyn_matrix(2, s + 2), dyn_matrix(2, s + 3));
        r.diff_zero(&trace_trick_a(&m, &nn, &o, true)?, &trace_trick_a(&m, &nn, &o, false)?, "trace-trick-a")?;
        let op = linear_operator(2, s);
        let not_zero_weight = dyn_matrix(2, s + 4).embed(&[1], 2)?;
        r.diff_zero(&trace_trick_b(&d_inf(2), &op)?, &trace_trick_b(&not_zero_weight, &op)?, "trace-trick-b")?;
    }
    Ok(())
}

/// Run a selection of suites in order.
pub fn run_all(suites: &[Suite], o: &SuiteOptions) -> Result<Vec<SuiteReport>> {
    suites.iter().map(|s| run(*s, o)).collect()
}
