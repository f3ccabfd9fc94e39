//! Structure matrices A, B, C, D of the reflection algebra.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::expr::DynScalar as S;
use crate::tensor::{Builder, TensorOp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FamilyName {
    AcfConstant,
    AcfSpectral,
    Hat,
}

impl FamilyName {
    pub fn as_str(&self) -> &'static str {
        match self {
            FamilyName::AcfConstant => "acf-constant",
            FamilyName::AcfSpectral => "acf-spectral",
            FamilyName::Hat => "hat",
        }
    }
}

impl fmt::Display for FamilyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FamilyName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "acf-constant" => Ok(FamilyName::AcfConstant),
            "acf-spectral" => Ok(FamilyName::AcfSpectral),
            "hat" => Ok(FamilyName::Hat),
            _ => Err(Error::Parse(format!("unknown family {s:?}"))),
        }
    }
}

/// How the automorphism g acts on an auxiliary space.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GMode {
    Identity,
    SpectralShift,
}

#[derive(Clone, Debug)]
pub struct StructureFamily {
    pub name: FamilyName,
    pub n: usize,
    pub a: TensorOp,
    pub b: TensorOp,
    pub c: TensorOp,
    pub d: TensorOp,
    pub g: GMode,
}

impl StructureFamily {
    pub fn new(name: FamilyName, n: usize) -> Result<Self> {
        match name {
            FamilyName::AcfConstant => acf_constant(n),
            FamilyName::AcfSpectral => acf_spectral(n),
            FamilyName::Hat => hat_family(n),
        }
    }

    /// `op` conjugated by g in the given slots (a no-op for g = identity).
    pub fn g_conj(&self, op: &TensorOp, slots: &[usize]) -> Result<TensorOp> {
        match self.g {
            GMode::Identity => Ok(op.clone()),
            GMode::SpectralShift => op.conj_g(slots),
        }
    }

    pub fn get(&self, name: &str) -> Result<&TensorOp> {
        match name {
            "A" => Ok(&self.a),
            "B" => Ok(&self.b),
            "C" => Ok(&self.c),
            "D" => Ok(&self.d),
            _ => Err(Error::Parse(format!("unknown structure matrix {name:?}"))),
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::OutOfRange(format!("dimension {n} < 2")));
    }
    Ok(())
}

/// γ/λ_ij
pub fn x(i: usize, j: usize) -> S {
    S::gamma() / S::lambda_diff(i, j)
}

/// γ/(λ_ij − γ)
pub fn y(i: usize, j: usize) -> S {
    S::gamma() / (S::lambda_diff(i, j) - S::gamma())
}

/// d₁₂ = Σ e_ij⊗e_ji, b₁₂ = Σ e_ii⊗e_ji and c₁₂ = b₂₁.
pub fn aux_tensors(n: usize) -> Result<(TensorOp, TensorOp, TensorOp)> {
    check_n(n)?;
    let mut d = Builder::new(2, n);
    let mut b = Builder::new(2, n);
    for i in 1..=n {
        for j in 1..=n {
            d.add(&[(i, j), (j, i)], S::one());
            b.add(&[(i, i), (j, i)], S::one());
        }
    }
    let b = b.build();
    let c = b.swap()?;
    Ok((d.build(), b, c))
}

fn add_identity(bd: &mut Builder, n: usize) {
    for i in 1..=n {
        for j in 1..=n {
            bd.add(&[(i, i), (j, j)], S::one());
        }
    }
}

pub fn a_inf(n: usize) -> TensorOp {
    let mut bd = Builder::new(2, n);
    add_identity(&mut bd, n);
    for i in 1..=n {
        for j in 1..=n {
            if i == j {
                continue;
            }
            // x_ij (e_ii − e_ij) ⊗ (e_jj − e_ji)
            let xij = x(i, j);
            bd.add(&[(i, i), (j, j)], xij.clone());
            bd.add(&[(i, i), (j, i)], -&xij);
            bd.add(&[(i, j), (j, j)], -&xij);
            bd.add(&[(i, j), (j, i)], xij);
        }
    }
    bd.build()
}

pub fn b_inf(n: usize) -> TensorOp {
    let mut bd = Builder::new(2, n);
    add_identity(&mut bd, n);
    for i in 1..=n {
        for j in 1..=n {
            if i == j {
                continue;
            }
            // y_ij e_jj ⊗ (e_ii − e_ij)
            bd.add(&[(j, j), (i, i)], y(i, j));
            bd.add(&[(j, j), (i, j)], -y(i, j));
        }
    }
    bd.build()
}

pub fn d_inf(n: usize) -> TensorOp {
    let mut bd = Builder::new(2, n);
    add_identity(&mut bd, n);
    for i in 1..=n {
        for j in 1..=n {
            if i == j {
                continue;
            }
            bd.add(&[(i, j), (j, i)], x(i, j));
            bd.add(&[(i, i), (j, j)], -x(i, j));
        }
    }
    bd.build()
}

pub fn acf_constant(n: usize) -> Result<StructureFamily> {
    check_n(n)?;
    let b = b_inf(n);
    Ok(StructureFamily {
        name: FamilyName::AcfConstant,
        n,
        a: a_inf(n),
        c: b.swap()?,
        b,
        d: d_inf(n),
        g: GMode::Identity,
    })
}

/// γ/(u − v) · d₁₂ + D∞.
pub fn d_spectral(n: usize) -> Result<TensorOp> {
    let (d, _, _) = aux_tensors(n)?;
    let s = S::spec(1) - S::spec(2);
    Ok(d_inf(n).add(&d.scale(S::gamma() / s))?.with_spectral(&[1, 2]))
}

pub fn acf_spectral(n: usize) -> Result<StructureFamily> {
    check_n(n)?;
    let (d, b, c) = aux_tensors(n)?;
    let (u, v, g) = (S::spec(1), S::spec(2), S::gamma());
    let a = TensorOp::sum(&[
        a_inf(n),
        d.scale(&g / &(&u - &v)),
        b.scale(&g / &v),
        c.scale(-(&g / &(&u + &g))),
    ])?
    .with_spectral(&[1, 2]);
    let bs = b_inf(n).sub(&b.scale(&g / &(&v + &g)))?.with_spectral(&[2]);
    Ok(StructureFamily {
        name: FamilyName::AcfSpectral,
        n,
        a,
        c: bs.swap()?,
        b: bs,
        d: d_spectral(n)?,
        g: GMode::SpectralShift,
    })
}

/// Placement of γ in the product coefficient of Â.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AhatReading {
    /// γ · Π_{k≠i,j} λ_ik / Π_{l≠j} λ_jl
    SingleGamma,
    /// Π_{k≠i,j} γλ_ik / Π_{l≠j} λ_jl
    GammaPerFactor,
}

fn prod(items: impl IntoIterator<Item = S>) -> S {
    S::product(items)
}

/// B̂₁₂ = Σ_i e_ii ⊗ p_i.
pub fn b_hat(n: usize) -> TensorOp {
    let g = S::gamma();
    let mut bd = Builder::new(2, n);
    for i in 1..=n {
        let lead = prod((1..=n).filter(|&k| k != i).map(|k| S::lambda_diff(i, k) / (S::lambda_diff(i, k) + g.clone())));
        bd.add(&[(i, i), (i, i)], lead);
        for j in (1..=n).filter(|&j| j != i) {
            bd.add(&[(i, i), (j, j)], S::one());
            let ratio = prod(
                (1..=n).filter(|&k| k != i && k != j).map(|k| S::lambda_diff(i, k) / S::lambda_diff(j, k)),
            );
            bd.add(&[(i, i), (i, j)], -(&g * &ratio) / (S::lambda_diff(j, i) - g.clone()));
        }
    }
    bd.build()
}

pub fn a_hat(n: usize, reading: AhatReading) -> Result<TensorOp> {
    check_n(n)?;
    let g = S::gamma();
    let xs = &g / &(S::spec(1) - S::spec(2));
    let mut bd = Builder::new(2, n).spectral(&[1, 2]);
    for i in 1..=n {
        bd.add(&[(i, i), (i, i)], S::one() + xs.clone());
        for j in (1..=n).filter(|&j| j != i) {
            bd.add(&[(i, i), (j, j)], S::one() - x(i, j));
            bd.add(&[(i, j), (j, i)], xs.clone() + x(i, j));
            let others = (1..=n).filter(|&k| k != i && k != j);
            let num = match reading {
                AhatReading::SingleGamma => &g * &prod(others.map(|k| S::lambda_diff(i, k))),
                AhatReading::GammaPerFactor => prod(others.map(|k| &g * &S::lambda_diff(i, k))),
            };
            let p = num / prod((1..=n).filter(|&l| l != j).map(|l| S::lambda_diff(j, l)));
            bd.add(&[(i, i), (i, j)], p.clone());
            bd.add(&[(i, j), (i, i)], -p);
        }
    }
    Ok(bd.build())
}

pub fn hat_family(n: usize) -> Result<StructureFamily> {
    hat_family_with(n, AhatReading::SingleGamma)
}

pub fn hat_family_with(n: usize, reading: AhatReading) -> Result<StructureFamily> {
    check_n(n)?;
    let b = b_hat(n);
    Ok(StructureFamily {
        name: FamilyName::Hat,
        n,
        a: a_hat(n, reading)?,
        c: b.swap()?,
        b,
        d: d_spectral(n)?,
        g: GMode::Identity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::Rational;
    use crate::symbols::{EvalPoint, Symbol};
    use crate::tensor::flat_index;

    fn pt31() -> EvalPoint {
        let mut p = EvalPoint::simple(2);
        p.lambda = vec![Rational::from_int(3), Rational::from_int(1)];
        p.spec[0] = Rational::from_int(5);
        p.spec[1] = Rational::from_int(2);
        p
    }

    fn at(op: &TensorOp, p: &EvalPoint, r: &[usize], c: &[usize]) -> Rational {
        op.eval(p).unwrap().get(flat_index(r, op.n()), flat_index(c, op.n()))
    }

    fn q(a: i64, b: i64) -> Rational {
        Rational::new(a, b).unwrap()
    }

    #[test]
    fn constant_family_entries() {
        let f = acf_constant(2).unwrap();
        let p = pt31();
        assert_eq!(at(&f.a, &p, &[1, 2], &[1, 2]), q(3, 2));
        assert_eq!(at(&f.b, &p, &[2, 1], &[2, 1]), q(2, 1));
        for i in 1..=2 {
            assert_eq!(at(&f.d, &p, &[i, i], &[i, i]), Rational::one());
        }
    }

    #[test]
    fn spectral_d_entry() {
        let f = acf_spectral(2).unwrap();
        assert_eq!(at(&f.d, &pt31(), &[1, 2], &[2, 1]), q(5, 6));
    }

    #[test]
    fn aux_tensor_structure() {
        let (d, b, c) = aux_tensors(2).unwrap();
        let p = pt31();
        let bm = b.eval(&p).unwrap();
        assert_eq!(bm.nnz(), 4);
        for (i, j) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
            assert_eq!(at(&b, &p, &[i, j], &[i, i]), Rational::one());
        }
        assert_eq!(at(&d, &p, &[2, 1], &[1, 2]), Rational::one());
        let dd = d.mul(&d).unwrap().eval(&p).unwrap();
        assert_eq!(dd, crate::matrix::RatMatrix::identity(4));
        let swapped = d.mul(&b).unwrap().mul(&d).unwrap();
        assert_eq!(c.eval(&p).unwrap(), swapped.eval(&p).unwrap());
    }

    #[test]
    fn hat_leading_entry() {
        let b = b_hat(2);
        assert_eq!(at(&b, &pt31(), &[1, 1], &[1, 1]), q(2, 3));
    }

    #[test]
    fn spectral_c_depends_on_first_slot() {
        let f = acf_spectral(2).unwrap();
        assert_eq!(f.c.spectral_slots(), vec![1]);
        assert_eq!(f.b.spectral_slots(), vec![2]);
        let p = pt31();
        let moved = p.with(Symbol::Spec(2), q(7, 3)).unwrap();
        assert_eq!(f.c.eval(&p).unwrap(), f.c.eval(&moved).unwrap());
    }
}
