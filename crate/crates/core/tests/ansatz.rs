use sdre::ansatz::{solve_extension, solve_pointwise, ExtensionRequest, Model, Status};
use sdre::ksol::{f_sym, k_constant, k_first_order, zero_columns};
use sdre::{KTag, Sampler, SymbolTable};

fn point(n: usize, seed: u64) -> sdre::EvalPoint {
    let mut s = Sampler::new(seed).with_guards(vec![sdre::DynScalar::f()]);
    s.sample_point(&SymbolTable::new(n).unwrap()).unwrap()
}

#[test]
fn pointwise_ranks() {
    for (n, tag, want) in [
        (2, KTag::Ia, (12, 12, 12)),
        (2, KTag::IIa, (12, 12, 12)),
        (2, KTag::Ib, (12, 12, 12)),
        (2, KTag::IIb, (12, 12, 12)),
        (3, KTag::Ia, (36, 36, 37)),
        (3, KTag::IIa, (36, 36, 37)),
        (3, KTag::Ib, (36, 36, 36)),
        (3, KTag::IIb, (36, 36, 36)),
    ] {
        let k0 = k_constant(tag, n, &f_sym());
        let p = point(n, 5);
        let s = solve_pointwise(&k0, &p).unwrap();
        let got = (s.linear.unknowns, s.linear.rank, s.linear.augmented_rank);
        assert_eq!(got, want, "{tag} n={n}");
        if tag.has_spectral_extension() {
            let want = k_first_order(tag, n, &f_sym()).unwrap().eval(&p).unwrap();
            assert_eq!(s.k1.clone().unwrap(), want, "{tag} n={n}");
            assert!(sdre::ansatz::quadratic_residual_zero(&k0, &s).unwrap());
        }
    }
}

#[test]
fn zero_column_base() {
    for (n, rank) in [(2, 8), (3, 27)] {
        let k0 = zero_columns(&k_constant(KTag::IIb, n, &f_sym()), &[1]).unwrap();
        let p = point(n, 8);
        let s = solve_pointwise(&k0, &p).unwrap();
        assert_eq!(s.linear.rank, rank);
        assert_eq!(s.linear.augmented_rank, rank);
        let k1 = s.k1.expect("base values determined");
        assert!((0..n).all(|i| k1.get(i, 0).is_zero()));
    }
}

fn req(base: KTag, n: usize, order: u32, model: Model, degree: Option<usize>) -> ExtensionRequest {
    ExtensionRequest { base, n, order, degree, model, samples: 4 }
}

#[test]
fn pointwise_certificates() {
    for n in [2, 3] {
        for tag in [KTag::Ib, KTag::IIb] {
            let c = solve_extension(&req(tag, n, 1, Model::Pointwise, None), &mut Sampler::new(1)).unwrap();
            assert_eq!(c.status, Status::Unique, "{tag} n={n}");
            assert_eq!(c.matches_closed_form, Some(true));
            assert_eq!(c.quadratic_pass, Some(true));
            assert_eq!(c.sdre_pass, Some(true));
            assert!(c.solution.is_some());
        }
    }
    for tag in [KTag::Ia, KTag::IIa] {
        let c = solve_extension(&req(tag, 3, 1, Model::Pointwise, None), &mut Sampler::new(2)).unwrap();
        assert_eq!(c.status, Status::Infeasible);
        assert_eq!((c.rank, c.augmented_rank), (36, 37));
    }
}

#[test]
fn polynomial_model_n2() {
    for tag in [KTag::Ia, KTag::Ib, KTag::IIb] {
        let c = solve_extension(&req(tag, 2, 1, Model::Polynomial, Some(2)), &mut Sampler::new(3)).unwrap();
        assert_eq!((c.unknowns, c.rank, c.status), (40, 40, Status::Unique), "{tag}");
        assert_eq!(c.sdre_pass, Some(true));
        let json = serde_json::to_string(&c).unwrap();
        let back: sdre::ansatz::Certificate = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }
    let c = solve_extension(&req(KTag::IIa, 2, 1, Model::Polynomial, Some(2)), &mut Sampler::new(3)).unwrap();
    assert_eq!((c.rank, c.augmented_rank, c.status), (40, 41, Status::Infeasible));
}

#[test]
fn order_two_is_trivial() {
    let c = solve_extension(&req(KTag::IIb, 2, 2, Model::Pointwise, None), &mut Sampler::new(1)).unwrap();
    assert_eq!((c.unknowns, c.rank, c.status), (12, 12, Status::Unique));
    assert!(c.solution.is_some());
}
