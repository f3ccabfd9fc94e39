use sdre::ksol::{f_sym, k_constant, k_diag_spectral, k_naive, k_spectral, shift_poles, zero_columns, KTag};
use sdre::structure::{acf_constant, acf_spectral, hat_family};
use sdre::verify::{consistency_residuals, sdre_equivalence_identity, sdre_identity, sdre_simplified_identity};
use sdre::{DynScalar, Sampler, Symbol, TensorOp};

#[test]
fn constant_families_solve_the_constant_equation() {
    for n in 2..=3 {
        let fam = acf_constant(n).unwrap();
        for tag in KTag::ALL {
            let k = k_constant(tag, n, &f_sym());
            let r = sdre_identity(&fam, &k).unwrap().check(&mut Sampler::new(1), 3).unwrap();
            assert!(r.pass, "{tag} n={n}: {:?}", r.first_witness());
            assert!(!sdre_identity(&fam, &k).unwrap().perturbed().check(&mut Sampler::new(1), 3).unwrap().pass);
        }
    }
}

#[test]
fn spectral_extensions() {
    for n in 2..=3 {
        let fam = acf_spectral(n).unwrap();
        let mut ks: Vec<(String, TensorOp)> = vec![
            ("Ib".into(), k_spectral(KTag::Ib, n, &f_sym()).unwrap()),
            ("IIb".into(), k_spectral(KTag::IIb, n, &f_sym()).unwrap()),
            ("diag".into(), k_diag_spectral(n, &DynScalar::sym(Symbol::FPrime))),
        ];
        if n == 2 {
            ks.push(("IIb poles".into(), shift_poles(&ks[1].1, 1, &DynScalar::sym(Symbol::F0))));
        }
        for (name, k) in ks {
            let r = sdre_identity(&fam, &k).unwrap().check(&mut Sampler::new(2), 3).unwrap();
            assert!(r.pass, "{name} n={n}: {:?}", r.first_witness());
            let s = sdre_simplified_identity(&fam, &k).unwrap().check(&mut Sampler::new(2), 3).unwrap();
            assert!(s.pass, "{name} simplified n={n}");
        }
        let naive = k_naive(KTag::IIa, n, &f_sym());
        assert!(!sdre_identity(&fam, &naive).unwrap().check(&mut Sampler::new(2), 3).unwrap().pass);
    }
}

#[test]
fn rearranged_form_matches_for_arbitrary_k() {
    let fam = acf_spectral(2).unwrap();
    let k = TensorOp::matrix(2, true, |i, j| {
        DynScalar::lambda(i) * DynScalar::int(j as i64) + DynScalar::spec(1) * DynScalar::int((i + 2 * j) as i64)
            - DynScalar::gamma()
    });
    let r = sdre_equivalence_identity(&fam, &k).unwrap().check(&mut Sampler::new(3), 3).unwrap();
    assert!(r.pass, "{:?}", r.first_witness());
    assert!(!sdre_identity(&fam, &k).unwrap().check(&mut Sampler::new(3), 3).unwrap().pass);
}

#[test]
fn zero_column_variant() {
    let fam = acf_constant(3).unwrap();
    let k = zero_columns(&k_constant(KTag::IIb, 3, &f_sym()), &[3]).unwrap();
    assert!(sdre_identity(&fam, &k).unwrap().check(&mut Sampler::new(4), 3).unwrap().pass);
}

#[test]
fn consistency_of_all_families() {
    for n in 2..=3 {
        for fam in [acf_constant(n).unwrap(), acf_spectral(n).unwrap(), hat_family(n).unwrap()] {
            for r in consistency_residuals(&fam, &mut Sampler::new(5), 2).unwrap() {
                assert!(r.pass, "{} {} n={n}: {:?}", r.identity, r.family, r.first_witness());
            }
        }
    }
}

#[test]
fn ahat_reading_is_pinned_by_consistency() {
    use sdre::structure::{a_hat, hat_family_with, AhatReading};
    // With an empty product at n = 2 only one γ placement survives the consistency system.
    let fam = hat_family_with(2, AhatReading::GammaPerFactor).unwrap();
    let rs = consistency_residuals(&fam, &mut Sampler::new(6), 2).unwrap();
    assert!(rs.iter().any(|r| !r.pass));
    let same = sdre::Identity::new(
        "ahat",
        "",
        a_hat(3, AhatReading::GammaPerFactor).unwrap(),
        a_hat(3, AhatReading::SingleGamma).unwrap(),
    );
    assert!(same.check(&mut Sampler::new(6), 2).unwrap().pass);
}
