use proptest::prelude::*;
use sdre::{DynScalar as S, EvalPoint, Rational, RatMatrix, Symbol, TensorOp};

fn r(v: i64) -> Rational {
    Rational::from_int(v)
}

fn kron(a: &[Vec<Rational>], b: &[Vec<Rational>]) -> Vec<Vec<Rational>> {
    let (p, q) = (a.len(), b.len());
    let mut out = vec![vec![Rational::zero(); p * q]; p * q];
    for i in 0..p {
        for j in 0..p {
            for k in 0..q {
                for l in 0..q {
                    out[i * q + k][j * q + l] = &a[i][j] * &b[k][l];
                }
            }
        }
    }
    out
}

fn eye(d: usize) -> Vec<Vec<Rational>> {
    (0..d).map(|i| (0..d).map(|j| r((i == j) as i64)).collect()).collect()
}

fn constant_matrix(n: usize, vals: &[i64]) -> (TensorOp, Vec<Vec<Rational>>) {
    let dense: Vec<Vec<Rational>> = (0..n).map(|i| (0..n).map(|j| r(vals[i * n + j])).collect()).collect();
    let op = TensorOp::matrix(n, false, |i, j| S::int(vals[(i - 1) * n + (j - 1)]));
    (op, dense)
}

fn pt(n: usize) -> EvalPoint {
    let mut p = EvalPoint::simple(n);
    for i in 1..=n {
        p.set(Symbol::Lambda(i), Rational::new(7 * i as i64 + 1, 3).unwrap()).unwrap();
    }
    p.set(Symbol::Gamma, Rational::new(2, 5).unwrap()).unwrap();
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]
    #[test]
    fn embed_matches_kronecker(vals in proptest::collection::vec(-9i64..10, 9)) {
        let n = 3;
        let (m, dense) = constant_matrix(n, &vals);
        let p = pt(n);
        prop_assert_eq!(m.embed(&[1], 2).unwrap().eval(&p).unwrap().to_dense(), kron(&dense, &eye(n)));
        prop_assert_eq!(m.embed(&[2], 2).unwrap().eval(&p).unwrap().to_dense(), kron(&eye(n), &dense));
        prop_assert_eq!(
            m.embed(&[2], 3).unwrap().eval(&p).unwrap().to_dense(),
            kron(&kron(&eye(n), &dense), &eye(n))
        );
    }

    #[test]
    fn pair_embedding_and_swap(vals in proptest::collection::vec(-9i64..10, 4), wals in proptest::collection::vec(-9i64..10, 4)) {
        let n = 2;
        let (a, da) = constant_matrix(n, &vals);
        let (b, db) = constant_matrix(n, &wals);
        let ab = a.embed(&[1], 2).unwrap().mul(&b.embed(&[2], 2).unwrap()).unwrap();
        let p = pt(n);
        prop_assert_eq!(ab.eval(&p).unwrap().to_dense(), kron(&da, &db));
        prop_assert_eq!(ab.swap().unwrap().eval(&p).unwrap().to_dense(), kron(&db, &da));
        // a₁b₃ inside three slots equals a ⊗ 1 ⊗ b
        let a13 = ab.embed(&[1, 3], 3).unwrap().eval(&p).unwrap().to_dense();
        prop_assert_eq!(a13, kron(&kron(&da, &eye(n)), &db));
    }

    #[test]
    fn inverse_and_transpose(vals in proptest::collection::vec(-9i64..10, 4)) {
        let (m, _) = constant_matrix(2, &vals);
        let p = pt(2);
        let v = m.eval(&p).unwrap();
        prop_assert_eq!(m.transpose().eval(&p).unwrap(), v.transpose());
        if v.rank() == 2 {
            prop_assert_eq!(m.mul(&m.inverse()).unwrap().eval(&p).unwrap(), RatMatrix::identity(2));
        } else {
            prop_assert!(m.inverse().eval(&p).is_err());
        }
    }
}

#[test]
fn shift_h_evaluates_by_slot_index() {
    // (1 ⊗ diag(λ₁, λ₂))(h₁): the block with slot-1 index j sees λ + γe_j.
    let n = 2;
    let m = TensorOp::diagonal(n, false, S::lambda).embed(&[2], 2).unwrap().shift_h(1).unwrap();
    let p = pt(n);
    let v = m.eval(&p).unwrap();
    let (l1, l2, g) = (p.lambda[0].clone(), p.lambda[1].clone(), p.gamma.clone());
    let want = [&l1 + &g, l2.clone(), l1.clone(), &l2 + &g];
    for (k, w) in want.iter().enumerate() {
        assert_eq!(&v.get(k, k), w);
    }
    assert_eq!(v.nnz(), 4);
    let shifted_slot2 = TensorOp::diagonal(n, false, S::lambda).embed(&[1], 2).unwrap().shift_h(2).unwrap().eval(&p).unwrap();
    let want2 = [&l1 + &g, l1.clone(), l2.clone(), &l2 + &g];
    for (k, w) in want2.iter().enumerate() {
        assert_eq!(&shifted_slot2.get(k, k), w);
    }
}

#[test]
fn embedding_renames_spectral_symbols() {
    let m = TensorOp::diagonal(2, true, |i| S::spec(1) + S::int(i as i64));
    let e = m.embed(&[2], 2).unwrap();
    assert_eq!(e.spectral_slots(), vec![2]);
    let mut p = pt(2);
    p.set(Symbol::Spec(1), r(100)).unwrap();
    p.set(Symbol::Spec(2), r(7)).unwrap();
    assert_eq!(e.eval(&p).unwrap().get(0, 0), r(8));
    assert_eq!(e.eval(&p).unwrap().get(1, 1), r(9));
    assert_eq!(e.swap().unwrap().eval(&p).unwrap().get(0, 0), r(101));
}

#[test]
fn dump_lists_nonzero_entries() {
    let (m, _) = constant_matrix(2, &[1, 0, 0, -3]);
    let d = m.embed(&[1], 2).unwrap().dump().unwrap();
    assert_eq!((d.arity, d.n), (2, 2));
    assert_eq!(d.entries.len(), 4);
    assert!(d.entries.contains(&(vec![2, 1], vec![2, 1], "(-3)".to_string())));
    let js = serde_json::to_string(&d).unwrap();
    let back: sdre::tensor::MatrixDump = serde_json::from_str(&js).unwrap();
    assert_eq!(back, d);
}

#[test]
fn shape_errors() {
    let (m, _) = constant_matrix(2, &[1, 2, 3, 4]);
    assert!(m.shift_h(2).is_err());
    assert!(m.swap().is_err());
    assert!(m.embed(&[3], 2).is_err());
    let (k, _) = constant_matrix(3, &[1; 9]);
    assert!(m.mul(&k).is_err());
}
