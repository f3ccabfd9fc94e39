//! Identity suites: the reflection equation, its consistency system and Yang–Baxter equations.

use serde::{Deserialize, Serialize};

use crate::check::{equal_on_samples, zero_weight_check, Ctx, ResidualReport, WeightKind};
use crate::error::{Error, Result};
use crate::expr::{DynScalar as S, Substitution};
use crate::structure::{aux_tensors, d_inf, FamilyName, GMode, StructureFamily};
use crate::symbols::{Sampler, Symbol, SymbolTable};
use crate::tensor::TensorOp;

/// Two operators claimed equal.
#[derive(Clone, Debug)]
pub struct Identity {
    pub id: String,
    pub family: String,
    pub lhs: TensorOp,
    pub rhs: TensorOp,
}

impl Identity {
    pub fn new(id: &str, family: &str, lhs: TensorOp, rhs: TensorOp) -> Self {
        Identity { id: id.to_string(), family: family.to_string(), lhs, rhs }
    }

    pub fn check(&self, sampler: &mut Sampler, count: usize) -> Result<ResidualReport> {
        equal_on_samples(&self.id, &self.family, &self.lhs, &self.rhs, sampler, count)
    }

    pub fn check_ctx(&self, ctx: &Ctx) -> Result<ResidualReport> {
        self.check(&mut ctx.sampler(), ctx.samples)
    }

    /// γ → 2γ on the left-hand side only.
    pub fn perturbed(&self) -> Identity {
        let s = Substitution::single(Symbol::Gamma, S::int(2) * S::gamma());
        Identity {
            id: format!("{}-perturbed", self.id),
            family: self.family.clone(),
            lhs: self.lhs.subst(&s),
            rhs: self.rhs.clone(),
        }
    }
}

fn check_binding(family: &StructureFamily, k: &TensorOp) -> Result<()> {
    if k.arity() != 1 || k.n() != family.n {
        return Err(Error::Shape("K must be an n×n matrix of the family's dimension".into()));
    }
    let spectral = !k.spectral_slots().is_empty();
    match (family.name, spectral) {
        (FamilyName::AcfConstant, true) => {
            Err(Error::Precondition("spectral K bound to the constant family".into()))
        }
        (FamilyName::AcfSpectral, false) => {
            Err(Error::Precondition("constant K bound to the spectral family".into()))
        }
        _ => Ok(()),
    }
}

/// K₁(u), K₂(v), K₂(v; h₁), K₁(u; h₂).
fn k_copies(k: &TensorOp) -> Result<[TensorOp; 4]> {
    let k1 = k.embed(&[1], 2)?;
    let k2 = k.embed(&[2], 2)?;
    let k2h1 = k2.shift_h(1)?;
    let k1h2 = k1.shift_h(2)?;
    Ok([k1, k2, k2h1, k1h2])
}

/// A₁₂K₁B₁₂K₂(h₁) = K₂C₁₂K₁(h₂)D₁₂
pub fn sdre_identity(family: &StructureFamily, k: &TensorOp) -> Result<Identity> {
    check_binding(family, k)?;
    let [k1, k2, k2h1, k1h2] = k_copies(k)?;
    let lhs = TensorOp::product(&[family.a.clone(), k1, family.b.clone(), k2h1])?;
    let rhs = TensorOp::product(&[k2, family.c.clone(), k1h2, family.d.clone()])?;
    Ok(Identity::new("sdre", family.name.as_str(), lhs, rhs))
}

/// For a λ-dependent constant coefficient k: c₁₂k₁b₁₂k₂(h₁) = k₂c₁₂k₁(h₂)d₁₂ and
/// (A∞ − b)₁₂k₁b₁₂k₂(h₁) = 0.
pub fn simplification_identities(k: &TensorOp, label: &str) -> Result<Vec<Identity>> {
    if k.arity() != 1 || !k.spectral_slots().is_empty() {
        return Err(Error::Precondition("expected a u-independent matrix".into()));
    }
    let n = k.n();
    let (d, b, c) = aux_tensors(n)?;
    let [k1, k2, k2h1, k1h2] = k_copies(k)?;
    let lhs = TensorOp::product(&[c.clone(), k1.clone(), b.clone(), k2h1.clone()])?;
    let rhs = TensorOp::product(&[k2, c, k1h2, d])?;
    let ab = crate::structure::a_inf(n).sub(&b)?;
    let lhs2 = TensorOp::product(&[ab, k1, b, k2h1])?;
    let zero = TensorOp::custom(2, n, vec![false, false], {
        let dim = lhs2.dim();
        move |_| Ok(crate::matrix::RatMatrix::zero(dim))
    });
    Ok(vec![
        Identity::new("c-exchange", label, lhs, rhs),
        Identity::new("a-minus-b-vanishes", label, lhs2, zero),
    ])
}

/// The vanishing identity with b replaced by d in the first factor; a non-vacuity control.
/// Both A∞ and b act as the identity on the range of k₁b₁₂ for every γ, so a γ rescaling
/// cannot break the original.
pub fn vanishing_control(k: &TensorOp, label: &str) -> Result<Identity> {
    let mut ids = simplification_identities(k, label)?;
    let n = k.n();
    let (d, b, _) = aux_tensors(n)?;
    let [k1, _, k2h1, _] = k_copies(k)?;
    let lhs = TensorOp::product(&[crate::structure::a_inf(n).sub(&d)?, k1, b, k2h1])?;
    let id = ids.remove(1);
    Ok(Identity::new("a-minus-b-vanishes-control", label, lhs, id.rhs))
}

pub fn sdre_residual(family: &StructureFamily, k: &TensorOp, sampler: &mut Sampler, count: usize) -> Result<ResidualReport> {
    sdre_identity(family, k)?.check(sampler, count)
}

/// γ/(u − v)
fn x_uv() -> S {
    S::gamma() / (S::spec(1) - S::spec(2))
}

/// Both sides of the rearranged form; the family must be the spectral one.
fn simplified_sides(family: &StructureFamily, k: &TensorOp) -> Result<(TensorOp, TensorOp)> {
    if family.name != FamilyName::AcfSpectral {
        return Err(Error::Precondition("the simplified form needs the spectral family".into()));
    }
    check_binding(family, k)?;
    let n = family.n;
    let (d, _, _) = aux_tensors(n)?;
    let xd = d.scale(x_uv());
    let [k1, k2, k2h1, k1h2] = k_copies(k)?;
    let lhs = TensorOp::product(&[family.a.sub(&xd)?, k1, family.b.clone(), k2h1])?;
    let kck = TensorOp::product(&[k2, family.c.clone(), k1h2])?;
    let swapped = kck.subst(&Substitution::rename_spec(&[(1, 2), (2, 1)]));
    let rhs = kck.sub(&swapped)?.mul(&xd)?.add(&kck.mul(&d_inf(n))?)?;
    Ok((lhs, rhs))
}

pub fn sdre_simplified_identity(family: &StructureFamily, k: &TensorOp) -> Result<Identity> {
    let (lhs, rhs) = simplified_sides(family, k)?;
    Ok(Identity::new("sdre-simplified", family.name.as_str(), lhs, rhs))
}

/// The two residuals (lhs − rhs) of the original and rearranged forms coincide for any K.
pub fn sdre_equivalence_identity(family: &StructureFamily, k: &TensorOp) -> Result<Identity> {
    let full = sdre_identity(family, k)?;
    let (l, r) = simplified_sides(family, k)?;
    Ok(Identity::new(
        "sdre-equivalence",
        family.name.as_str(),
        full.lhs.sub(&full.rhs)?,
        l.sub(&r)?,
    ))
}

fn pair(op: &TensorOp, k: usize, l: usize) -> Result<TensorOp> {
    op.embed(&[k, l], 3)
}

/// The four consistency equations; the last is the GNF equation for D.
pub fn consistency_identities(f: &StructureFamily) -> Result<Vec<Identity>> {
    let name = f.name.as_str();
    let (a12, a13, a23) = (pair(&f.a, 1, 2)?, pair(&f.a, 1, 3)?, pair(&f.a, 2, 3)?);
    let (b13, b23) = (pair(&f.b, 1, 3)?, pair(&f.b, 2, 3)?);
    let (c13, c23) = (pair(&f.c, 1, 3)?, pair(&f.c, 2, 3)?);
    let (d12, d13, d23) = (pair(&f.d, 1, 2)?, pair(&f.d, 1, 3)?, pair(&f.d, 2, 3)?);
    let g = |op: &TensorOp, s: &[usize]| f.g_conj(op, s);

    let a = Identity::new(
        "consistency-4a",
        name,
        TensorOp::product(&[a12.clone(), g(&a13, &[1, 3])?, a23.clone()])?,
        TensorOp::product(&[g(&a23, &[2, 3])?, a13, g(&a12, &[1, 2])?])?,
    );
    let b = Identity::new(
        "consistency-4b",
        name,
        TensorOp::product(&[a12.clone(), g(&c13, &[1])?, c23.clone()])?,
        TensorOp::product(&[g(&c23, &[2])?, c13, g(&a12.shift_h(3)?, &[1, 2])?])?,
    );
    let c = Identity::new(
        "consistency-4c",
        name,
        TensorOp::product(&[d12.clone(), b13.clone(), g(&b23.shift_h(1)?, &[3])?])?,
        TensorOp::product(&[b23, g(&b13.shift_h(2)?, &[3])?, d12.clone()])?,
    );
    Ok(vec![a, b, c, gnf_identity_of(&d12, &d13, &d23, name)?])
}

fn gnf_identity_of(d12: &TensorOp, d13: &TensorOp, d23: &TensorOp, name: &str) -> Result<Identity> {
    Ok(Identity::new(
        "gnf",
        name,
        TensorOp::product(&[d12.shift_h(3)?, d13.clone(), d23.shift_h(1)?])?,
        TensorOp::product(&[d23.clone(), d13.shift_h(2)?, d12.clone()])?,
    ))
}

/// D₁₂(h₃)D₁₃D₂₃(h₁) = D₂₃D₁₃(h₂)D₁₂
pub fn gnf_identity(d: &TensorOp, family: &str) -> Result<Identity> {
    gnf_identity_of(&pair(d, 1, 2)?, &pair(d, 1, 3)?, &pair(d, 2, 3)?, family)
}

pub fn consistency_residuals(f: &StructureFamily, sampler: &mut Sampler, count: usize) -> Result<Vec<ResidualReport>> {
    consistency_identities(f)?.iter().map(|i| i.check(sampler, count)).collect()
}

/// R₁₂R₁₃R₂₃ = R₂₃R₁₃R₁₂
pub fn ybe_identity(r: &TensorOp, family: &str) -> Result<Identity> {
    let (r12, r13, r23) = (pair(r, 1, 2)?, pair(r, 1, 3)?, pair(r, 2, 3)?);
    Ok(Identity::new(
        "ybe",
        family,
        TensorOp::product(&[r12.clone(), r13.clone(), r23.clone()])?,
        TensorOp::product(&[r23, r13, r12])?,
    ))
}

/// R₁₂R₁₃^{g₁g₃}R₂₃ = R₂₃^{g₂g₃}R₁₃R₁₂^{g₁g₂}; R must not depend on λ.
pub fn shifted_ybe_identity(r: &TensorOp, family: &str, sampler: &mut Sampler) -> Result<Identity> {
    if !lambda_free(r, sampler, 5)? {
        return Err(Error::Precondition("shifted Yang–Baxter check needs a λ-free R".into()));
    }
    let (r12, r13, r23) = (pair(r, 1, 2)?, pair(r, 1, 3)?, pair(r, 2, 3)?);
    Ok(Identity::new(
        "shifted-ybe",
        family,
        TensorOp::product(&[r12.clone(), r13.conj_g(&[1, 3])?, r23.clone()])?,
        TensorOp::product(&[r23.conj_g(&[2, 3])?, r13, r12.conj_g(&[1, 2])?])?,
    ))
}

/// Whether the operator is unchanged when only the λ values are redrawn.
pub fn lambda_free(op: &TensorOp, sampler: &mut Sampler, count: usize) -> Result<bool> {
    Ok(lambda_independence(op, "lambda-independence", "", sampler, count)?.pass)
}

pub fn lambda_independence(
    op: &TensorOp,
    identity: &str,
    family: &str,
    sampler: &mut Sampler,
    count: usize,
) -> Result<ResidualReport> {
    let n = op.n();
    let table = SymbolTable::new(n)?;
    let guards = op.denominators();
    let mut report = ResidualReport::new(identity, family, n, sampler.seed(), count);
    crate::check::with_guards(sampler, guards, |s| -> Result<()> {
        let mut done = 0;
        let mut attempts = 0;
        while done < count {
            attempts += 1;
            if attempts > 50 * count.max(1) {
                return Err(Error::GuardExhausted { guard: "λ-independence sampling".into(), attempts });
            }
            let p = s.sample_point(&table)?;
            let q = s.resample_lambda(&p)?;
            let (a, b) = match (op.eval(&p), op.eval(&q)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(Error::DivisionByZero(_) | Error::Singular), _)
                | (_, Err(Error::DivisionByZero(_) | Error::Singular)) => continue,
                (Err(e), _) | (_, Err(e)) => return Err(e),
            };
            done += 1;
            if a != b {
                let diff = a.sub(&b)?;
                let first = diff.entries().next().map(|(r, c, _)| (r, c));
                if let Some((r, c)) = first {
                    report.fail(crate::check::scalar_failure(
                        &q,
                        serde_json::json!([r, c]),
                        &a.get(r, c),
                        &b.get(r, c),
                    ));
                }
            }
        }
        Ok(())
    })?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Prop31Report {
    pub zero_weight: bool,
    /// Only asserted when the zero-weight hypothesis holds.
    pub gnf: Option<bool>,
    pub reports: Vec<ResidualReport>,
}

impl Prop31Report {
    /// The proposition holds: zero weight implies GNF.
    pub fn holds(&self) -> bool {
        !self.zero_weight || self.gnf == Some(true)
    }
}

/// D₁₂ = (q₁ᵍ(h₂))⁻¹(q₂ᵍ)⁻¹ R₁₂ q₁ᵍ q₂ᵍ(h₁), with R⁰ dressed back by the σ-shift when g shifts.
pub fn d_from_cocycle(r: &TensorOp, q: &TensorOp, g: GMode) -> Result<TensorOp> {
    let qg = match g {
        GMode::Identity => q.clone(),
        GMode::SpectralShift => q.conj_g(&[1])?,
    };
    let q1 = qg.embed(&[1], 2)?;
    let q2 = qg.embed(&[2], 2)?;
    let q1inv = qg.inverse().embed(&[1], 2)?;
    let q2inv = qg.inverse().embed(&[2], 2)?;
    TensorOp::product(&[q1inv.shift_h(2)?, q2inv, r.clone(), q1, q2.shift_h(1)?])
}

/// Build D from (R, q); when D has total zero weight, GNF must hold.
pub fn prop31_check(r: &TensorOp, q: &TensorOp, g: GMode, label: &str, sampler: &mut Sampler, count: usize) -> Result<Prop31Report> {
    let d = d_from_cocycle(r, q, g)?;
    let mut zw = zero_weight_check(&d, WeightKind::Total, sampler, count)?;
    zw.family = label.to_string();
    let mut reports = vec![zw.clone()];
    let gnf = if zw.pass {
        let rep = gnf_identity(&d, label)?.check(sampler, count)?;
        let ok = rep.pass;
        reports.push(rep);
        Some(ok)
    } else {
        None
    };
    Ok(Prop31Report { zero_weight: zw.pass, gnf, reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ksol::{f_sym, k_constant, KTag};
    use crate::structure::{acf_constant, acf_spectral};

    #[test]
    fn binding_mismatch_is_rejected() {
        let f = acf_spectral(2).unwrap();
        let k = k_constant(KTag::IIb, 2, &f_sym());
        assert!(sdre_identity(&f, &k).is_err());
        let c = acf_constant(2).unwrap();
        assert!(sdre_simplified_identity(&c, &k).is_err());
    }

    #[test]
    fn constant_iib_n2() {
        let f = acf_constant(2).unwrap();
        let k = k_constant(KTag::IIb, 2, &f_sym());
        assert!(sdre_residual(&f, &k, &mut Sampler::new(1), 3).unwrap().pass);
    }
}
