//! Sparse exact matrices, the evaluated form of tensor operators.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::rational::Rational;

/// Square matrix with rows stored as sorted (column, value) lists; zeros are never stored.
#[derive(Clone, PartialEq, Eq)]
pub struct RatMatrix {
    dim: usize,
    rows: Vec<Vec<(usize, Rational)>>,
}

impl RatMatrix {
    pub fn zero(dim: usize) -> Self {
        RatMatrix { dim, rows: vec![Vec::new(); dim] }
    }

    pub fn identity(dim: usize) -> Self {
        RatMatrix { dim, rows: (0..dim).map(|i| vec![(i, Rational::one())]).collect() }
    }

    pub fn from_triplets(dim: usize, items: impl IntoIterator<Item = (usize, usize, Rational)>) -> Self {
        let mut rows: Vec<BTreeMap<usize, Rational>> = vec![BTreeMap::new(); dim];
        for (r, c, v) in items {
            *rows[r].entry(c).or_default() += v;
        }
        RatMatrix {
            dim,
            rows: rows
                .into_iter()
                .map(|m| m.into_iter().filter(|(_, v)| !v.is_zero()).collect())
                .collect(),
        }
    }

    pub fn from_dense(rows: &[Vec<Rational>]) -> Self {
        let dim = rows.len();
        RatMatrix {
            dim,
            rows: rows
                .iter()
                .map(|r| r.iter().cloned().enumerate().filter(|(_, v)| !v.is_zero()).collect())
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, r: usize) -> &[(usize, Rational)] {
        &self.rows[r]
    }

    pub fn get(&self, r: usize, c: usize) -> Rational {
        match self.rows[r].binary_search_by_key(&c, |(k, _)| *k) {
            Ok(i) => self.rows[r][i].1.clone(),
            Err(_) => Rational::zero(),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &Rational)> {
        self.rows.iter().enumerate().flat_map(|(r, row)| row.iter().map(move |(c, v)| (r, *c, v)))
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.rows.iter().all(Vec::is_empty)
    }

    pub fn to_dense(&self) -> Vec<Vec<Rational>> {
        let mut d = vec![vec![Rational::zero(); self.dim]; self.dim];
        for (r, c, v) in self.entries() {
            d[r][c] = v.clone();
        }
        d
    }

    fn check(&self, o: &RatMatrix) -> Result<()> {
        if self.dim != o.dim {
            return Err(Error::Shape(format!("{} vs {}", self.dim, o.dim)));
        }
        Ok(())
    }

    pub fn mul(&self, o: &RatMatrix) -> Result<RatMatrix> {
        self.check(o)?;
        let mut out = RatMatrix::zero(self.dim);
        let mut acc: Vec<Rational> = vec![Rational::zero(); self.dim];
        let mut hit = vec![false; self.dim];
        let mut cols = Vec::new();
        for (r, row) in self.rows.iter().enumerate() {
            for (k, a) in row {
                for (c, b) in &o.rows[*k] {
                    if !hit[*c] {
                        hit[*c] = true;
                        cols.push(*c);
                    }
                    acc[*c] += a * b;
                }
            }
            cols.sort_unstable();
            for &c in &cols {
                hit[c] = false;
                let v = std::mem::take(&mut acc[c]);
                if !v.is_zero() {
                    out.rows[r].push((c, v));
                }
            }
            cols.clear();
        }
        Ok(out)
    }

    fn combine(&self, o: &RatMatrix, sign: bool) -> Result<RatMatrix> {
        self.check(o)?;
        let mut out = RatMatrix::zero(self.dim);
        for r in 0..self.dim {
            let (a, b) = (&self.rows[r], &o.rows[r]);
            let (mut i, mut j) = (0, 0);
            let row = &mut out.rows[r];
            while i < a.len() || j < b.len() {
                let ca = a.get(i).map(|x| x.0).unwrap_or(usize::MAX);
                let cb = b.get(j).map(|x| x.0).unwrap_or(usize::MAX);
                if ca < cb {
                    row.push(a[i].clone());
                    i += 1;
                } else if cb < ca {
                    let v = if sign { b[j].1.clone() } else { -&b[j].1 };
                    row.push((cb, v));
                    j += 1;
                } else {
                    let v = if sign { &a[i].1 + &b[j].1 } else { &a[i].1 - &b[j].1 };
                    if !v.is_zero() {
                        row.push((ca, v));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, o: &RatMatrix) -> Result<RatMatrix> {
        self.combine(o, true)
    }

    pub fn sub(&self, o: &RatMatrix) -> Result<RatMatrix> {
        self.combine(o, false)
    }

    pub fn scale(&self, s: &Rational) -> RatMatrix {
        if s.is_zero() {
            return RatMatrix::zero(self.dim);
        }
        RatMatrix {
            dim: self.dim,
            rows: self.rows.iter().map(|r| r.iter().map(|(c, v)| (*c, v * s)).collect()).collect(),
        }
    }

    pub fn transpose(&self) -> RatMatrix {
        let mut out = RatMatrix::zero(self.dim);
        for (r, c, v) in self.entries() {
            out.rows[c].push((r, v.clone()));
        }
        out
    }

    pub fn inverse(&self) -> Result<RatMatrix> {
        let n = self.dim;
        let mut a = self.to_dense();
        let mut inv = RatMatrix::identity(n).to_dense();
        for col in 0..n {
            let piv = (col..n).find(|&r| !a[r][col].is_zero()).ok_or(Error::Singular)?;
            a.swap(col, piv);
            inv.swap(col, piv);
            let p = a[col][col].recip()?;
            for k in 0..n {
                a[col][k] = &a[col][k] * &p;
                inv[col][k] = &inv[col][k] * &p;
            }
            for r in 0..n {
                if r == col || a[r][col].is_zero() {
                    continue;
                }
                let factor = a[r][col].clone();
                for k in 0..n {
                    let (x, y) = (&a[col][k] * &factor, &inv[col][k] * &factor);
                    a[r][k] -= x;
                    inv[r][k] -= y;
                }
            }
        }
        Ok(RatMatrix::from_dense(&inv))
    }

    pub fn rank(&self) -> usize {
        crate::linalg::rank(&self.to_dense())
    }

    pub fn trace(&self) -> Rational {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }
}

impl fmt::Debug for RatMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.to_dense() {
            let parts: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(f, "[{}]", parts.join(", "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense(dim: usize, vals: &[i64]) -> RatMatrix {
        let rows: Vec<Vec<Rational>> = (0..dim)
            .map(|r| (0..dim).map(|c| Rational::from_int(vals[r * dim + c])).collect())
            .collect();
        RatMatrix::from_dense(&rows)
    }

    fn brute_mul(a: &RatMatrix, b: &RatMatrix) -> RatMatrix {
        let (x, y) = (a.to_dense(), b.to_dense());
        let n = a.dim();
        let rows: Vec<Vec<Rational>> = (0..n)
            .map(|r| (0..n).map(|c| (0..n).map(|k| &x[r][k] * &y[k][c]).sum()).collect())
            .collect();
        RatMatrix::from_dense(&rows)
    }

    #[test]
    fn inverse_of_singular_fails() {
        assert_eq!(dense(2, &[1, 2, 2, 4]).inverse(), Err(Error::Singular));
    }

    proptest! {
        #[test]
        fn sparse_product_matches_dense(a in proptest::collection::vec(-3i64..4, 16),
                                        b in proptest::collection::vec(-3i64..4, 16)) {
            let (a, b) = (dense(4, &a), dense(4, &b));
            prop_assert_eq!(a.mul(&b).unwrap(), brute_mul(&a, &b));
            prop_assert_eq!(a.add(&b).unwrap().sub(&b).unwrap(), a.clone());
            prop_assert_eq!(a.transpose().transpose(), a.clone());
        }

        #[test]
        fn inverse_round_trip(a in proptest::collection::vec(-5i64..6, 9)) {
            let m = dense(3, &a);
            if let Ok(inv) = m.inverse() {
                prop_assert_eq!(m.mul(&inv).unwrap(), RatMatrix::identity(3));
            } else {
                prop_assert!(m.rank() < 3);
            }
        }
    }
}
