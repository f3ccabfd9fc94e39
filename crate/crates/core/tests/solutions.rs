use std::collections::BTreeSet;

use sdre::ksol::{f_sym, k_constant, k_first_order, random_k, rank_profile, zero_columns, KTag};
use sdre::structure::acf_spectral;
use sdre::verify::{sdre_equivalence_identity, sdre_identity, simplification_identities, vanishing_control, Identity};
use sdre::{DynScalar as S, Sampler, TensorOp};

#[test]
fn rank_profiles() {
    for n in 2..=4 {
        for (tag, want) in [(KTag::Ia, 1), (KTag::Ib, 1), (KTag::IIa, 2), (KTag::IIb, n)] {
            let got = rank_profile(&k_constant(tag, n, &f_sym()), &mut Sampler::new(11), 50).unwrap();
            assert_eq!(got, BTreeSet::from([want]), "{tag} n={n}");
        }
    }
}

#[test]
fn n2_collapses() {
    let f = f_sym();
    let same = Identity::new("Ia=Ib", "", k_constant(KTag::Ia, 2, &f), k_constant(KTag::Ib, 2, &f));
    assert!(same.check(&mut Sampler::new(2), 10).unwrap().pass);
    let scaled = Identity::new("IIa=γIIb", "", k_constant(KTag::IIa, 2, &f), k_constant(KTag::IIb, 2, &f).scale(S::gamma()));
    assert!(scaled.check(&mut Sampler::new(2), 10).unwrap().pass);
    let n3 = Identity::new("Ia=Ib", "", k_constant(KTag::Ia, 3, &f), k_constant(KTag::Ib, 3, &f));
    assert!(!n3.check(&mut Sampler::new(2), 3).unwrap().pass);
}

fn coefficients(n: usize) -> Vec<(String, TensorOp)> {
    let f = f_sym();
    let mut out: Vec<(String, TensorOp)> =
        KTag::ALL.iter().map(|t| (format!("k0-{t}"), k_constant(*t, n, &f))).collect();
    for t in [KTag::Ib, KTag::IIb] {
        out.push((format!("k1-{t}"), k_first_order(t, n, &f).unwrap()));
    }
    out.push(("k0-IIb-zero-column".into(), zero_columns(&k_constant(KTag::IIb, n, &f), &[1]).unwrap()));
    out
}

#[test]
fn simplification_identities_hold() {
    for n in 2..=3 {
        let (mut perturbed_failures, mut control_failures) = (0, 0);
        for (label, k) in coefficients(n) {
            let ids = simplification_identities(&k, &label).unwrap();
            for id in &ids {
                let r = id.check(&mut Sampler::new(4), 4).unwrap();
                assert!(r.pass, "{} {label} n={n}: {:?}", id.id, r.first_witness());
            }
            perturbed_failures += !ids[0].perturbed().check(&mut Sampler::new(4), 4).unwrap().pass as usize;
            control_failures += !vanishing_control(&k, &label).unwrap().check(&mut Sampler::new(4), 4).unwrap().pass as usize;
        }
        assert!(perturbed_failures > 0 && control_failures > 0);
    }
}

#[test]
fn simplification_holds_for_any_matrix() {
    let k = TensorOp::matrix(3, false, |i, j| S::lambda(i) * S::lambda(j) + S::int((i * j) as i64));
    for id in simplification_identities(&k, "generic").unwrap() {
        assert!(id.check(&mut Sampler::new(1), 3).unwrap().pass, "{}", id.id);
    }
    assert!(!vanishing_control(&k, "generic").unwrap().check(&mut Sampler::new(1), 3).unwrap().pass);
}

#[test]
fn rearrangement_for_random_non_solutions() {
    for n in 2..=3 {
        let fam = acf_spectral(n).unwrap();
        for seed in 0..10u64 {
            let k = random_k(n, seed).unwrap();
            assert!(sdre_equivalence_identity(&fam, &k).unwrap().check(&mut Sampler::new(seed), 2).unwrap().pass);
            assert!(!sdre_identity(&fam, &k).unwrap().check(&mut Sampler::new(seed), 2).unwrap().pass);
        }
    }
    assert_eq!(random_k(2, 1).unwrap().spectral_slots(), vec![1]);
}
