//! Exact Gaussian elimination over the rationals.

use crate::rational::Rational;

/// Reduced row echelon form in place; returns pivot columns.
///
/// Rows are absorbed one at a time into a reduced basis, so dependent rows cost a single
/// reduction pass and never take part in later eliminations.
pub fn rref(m: &mut Vec<Vec<Rational>>) -> Vec<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let mut basis: Vec<(usize, Vec<Rational>)> = Vec::new();
    for mut row in m.drain(..) {
        for (c, b) in &basis {
            if row[*c].is_zero() {
                continue;
            }
            let factor = row[*c].clone();
            for (k, x) in b.iter().enumerate().skip(*c) {
                if !x.is_zero() {
                    row[k] -= x * &factor;
                }
            }
        }
        let Some(c) = row.iter().position(|x| !x.is_zero()) else { continue };
        let inv = row[c].recip().expect("pivot is nonzero");
        for x in row.iter_mut().skip(c) {
            if !x.is_zero() {
                *x = &*x * &inv;
            }
        }
        for (_, b) in basis.iter_mut() {
            if b[c].is_zero() {
                continue;
            }
            let factor = b[c].clone();
            for (k, x) in row.iter().enumerate().skip(c) {
                if !x.is_zero() {
                    b[k] -= x * &factor;
                }
            }
        }
        basis.push((c, row));
        if basis.len() == cols {
            break;
        }
    }
    basis.sort_by_key(|(c, _)| *c);
    let pivots = basis.iter().map(|(c, _)| *c).collect();
    m.extend(basis.into_iter().map(|(_, r)| r));
    m.resize(rows, vec![Rational::zero(); cols]);
    pivots
}

pub fn rank(m: &[Vec<Rational>]) -> usize {
    rref(&mut m.to_vec()).len()
}

/// Solution set of A·x = b.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Affine {
    Inconsistent { rank: usize, augmented_rank: usize },
    Solutions { rank: usize, particular: Vec<Rational>, nullspace: Vec<Vec<Rational>> },
}

impl Affine {
    pub fn rank(&self) -> usize {
        match self {
            Affine::Inconsistent { rank, .. } | Affine::Solutions { rank, .. } => *rank,
        }
    }
}

pub fn solve_affine(a: &[Vec<Rational>], b: &[Rational], unknowns: usize) -> Affine {
    let mut aug: Vec<Vec<Rational>> = a
        .iter()
        .zip(b)
        .map(|(row, v)| {
            let mut r = row.clone();
            r.push(v.clone());
            r
        })
        .collect();
    let pivots = rref(&mut aug);
    let rank = pivots.iter().filter(|&&c| c < unknowns).count();
    if pivots.contains(&unknowns) {
        return Affine::Inconsistent { rank, augmented_rank: rank + 1 };
    }
    let mut particular = vec![Rational::zero(); unknowns];
    for (row, &c) in pivots.iter().enumerate() {
        particular[c] = aug[row][unknowns].clone();
    }
    let free: Vec<usize> = (0..unknowns).filter(|c| !pivots.contains(c)).collect();
    let nullspace = free
        .iter()
        .map(|&fc| {
            let mut v = vec![Rational::zero(); unknowns];
            v[fc] = Rational::one();
            for (row, &c) in pivots.iter().enumerate() {
                v[c] = -&aug[row][fc];
            }
            v
        })
        .collect();
    Affine::Solutions { rank, particular, nullspace }
}

pub fn nullspace(a: &[Vec<Rational>], unknowns: usize) -> Vec<Vec<Rational>> {
    let zero = vec![Rational::zero(); a.len()];
    match solve_affine(a, &zero, unknowns) {
        Affine::Solutions { nullspace, .. } => nullspace,
        Affine::Inconsistent { .. } => unreachable!("homogeneous systems are consistent"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[i64]]) -> Vec<Vec<Rational>> {
        rows.iter().map(|r| r.iter().map(|&v| Rational::from_int(v)).collect()).collect()
    }

    #[test]
    fn inconsistent_system() {
        let a = m(&[&[1, 1], &[2, 2]]);
        let b = vec![Rational::one(), Rational::zero()];
        assert!(matches!(solve_affine(&a, &b, 2), Affine::Inconsistent { rank: 1, .. }));
    }

    #[test]
    fn nullspace_of_rank_one() {
        let a = m(&[&[1, 2, 3]]);
        let ns = nullspace(&a, 3);
        assert_eq!(ns.len(), 2);
        for v in ns {
            let dot: Rational = a[0].iter().zip(&v).map(|(x, y)| x * y).sum();
            assert!(dot.is_zero());
        }
    }

    proptest! {
        #[test]
        fn solutions_satisfy_system(vals in proptest::collection::vec(-4i64..5, 12),
                                    rhs in proptest::collection::vec(-4i64..5, 3)) {
            let a: Vec<Vec<Rational>> = vals.chunks(4)
                .map(|r| r.iter().map(|&v| Rational::from_int(v)).collect()).collect();
            let b: Vec<Rational> = rhs.iter().map(|&v| Rational::from_int(v)).collect();
            if let Affine::Solutions { particular, nullspace, rank } = solve_affine(&a, &b, 4) {
                prop_assert_eq!(nullspace.len(), 4 - rank);
                for (row, v) in a.iter().zip(&b) {
                    let dot: Rational = row.iter().zip(&particular).map(|(x, y)| x * y).sum();
                    prop_assert_eq!(&dot, v);
                    for ns in &nullspace {
                        let z: Rational = row.iter().zip(ns).map(|(x, y)| x * y).sum();
                        prop_assert!(z.is_zero());
                    }
                }
            }
        }
    }
}
