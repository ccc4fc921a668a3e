//! Engines agreeing with each other and with the dense oracle on shared
//! instances, including shadow-backed (data-acquisition) routes.

use subspace_sim::circuit::{build_hva, build_matchgate, build_shallow_hea, build_u1_equivariant, tfim_terms};
use subspace_sim::expectation::{BasisState, ExpectationSource};
use subspace_sim::gsim::GsimInstance;
use subspace_sim::hamming::sector_loss;
use subspace_sim::lightcone::{backward_cone, reduced_loss_from_shadows};
use subspace_sim::matchgate::module_loss_from_source;
use subspace_sim::propagation::{backpropagate, loss_from_expectations, TruncationPolicy};
use subspace_sim::seed::derive_seed;
use subspace_sim::shadows::{acquire, ShadowEstimator};
use subspace_sim::statevector::loss;
use subspace_sim::{Circuit, ParamDistribution, PauliSum};

fn draw(c: &Circuit, path: &str) -> Vec<f64> {
    ParamDistribution::uniform_angle().sample(c.n_params, derive_seed(17, path)).unwrap()
}

#[test]
fn four_engines_agree_on_a_matchgate_circuit() {
    let bits = [true, false, true, false, false];
    let c = build_matchgate(5, 3).unwrap();
    let obs = PauliSum::from_pairs(5, &[(1.0, "ZIIII"), (0.5, "IXXII"), (-0.3, "IIYYI")]).unwrap();
    let src = BasisState::new(&bits);
    let g = GsimInstance::prepare(&c, &obs, &src).unwrap();
    for i in 0..10 {
        let p = draw(&c, &format!("mg/{i}"));
        let want = loss(&Circuit::basis_state(&bits), &c, &p, &obs).unwrap();
        let m = module_loss_from_source(&c, &p, &obs, &src).unwrap().value;
        let prop = backpropagate(&obs, &c, &p, &mut TruncationPolicy::unlimited()).unwrap();
        let pp = loss_from_expectations(&prop, &src).unwrap().value;
        for got in [g.loss(&p).unwrap(), m, pp] {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }
}

#[test]
fn hamming_sector_matches_oracle_at_k3() {
    let bits = [true, false, true, true, false, false, false];
    let c = build_u1_equivariant(7, 3).unwrap();
    let obs =
        PauliSum::from_pairs(7, &[(1.0, "ZIIIIII"), (0.4, "IIXXIII"), (0.4, "IIYYIII"), (0.2, "ZIIIIIZ")]).unwrap();
    for i in 0..10 {
        let p = draw(&c, &format!("u1/{i}"));
        let want = loss(&Circuit::basis_state(&bits), &c, &p, &obs).unwrap();
        assert!((sector_loss(&bits, &c, &p, &obs).unwrap() - want).abs() < 1e-10);
    }
}

#[test]
fn lightcone_from_shadows_tracks_the_oracle() {
    let n = 6;
    let hea = build_shallow_hea(n, 1, None).unwrap();
    let prep = hea.bind(&vec![0.4; hea.n_params]).unwrap();
    let ds = acquire(&prep, 40_000, 3).unwrap();
    let est = ShadowEstimator::new(&ds);
    let c = build_shallow_hea(n, 1, Some(1)).unwrap();
    let obs = PauliSum::from_pairs(n, &[(1.0, "IIZIII")]).unwrap();
    let cone = backward_cone(&c, &[2]).unwrap();
    let mut misses = 0;
    for i in 0..8 {
        let p = draw(&c, &format!("lc/{i}"));
        let want = loss(&prep, &c, &p, &obs).unwrap();
        let got = reduced_loss_from_shadows(&cone, &est, &obs, &p).unwrap();
        assert!(got.stderr > 0.0);
        if (got.value - want).abs() > 5.0 * got.stderr {
            misses += 1;
        }
    }
    assert!(misses <= 1, "{misses} of 8 draws outside 5 stderr");
}

#[test]
fn gsim_from_shadows_tracks_the_oracle() {
    let n = 4;
    let mut prep = Circuit::new(n);
    for q in 0..n {
        prep.push_word_param(format!("{}X{}", "I".repeat(q), "I".repeat(n - 1 - q)).parse().unwrap(), 0);
    }
    let prep = prep.bind(&[0.3, 0.5, 0.7, 0.9]).unwrap();
    let ds = acquire(&prep, 60_000, 8).unwrap();
    let est = ShadowEstimator::new(&ds);
    let c = build_hva(&tfim_terms(n), 2).unwrap();
    let obs = tfim_terms(n)[1].clone();
    let g = GsimInstance::prepare(&c, &obs, &est).unwrap();
    for i in 0..5 {
        let p = draw(&c, &format!("gs/{i}"));
        let want = loss(&prep, &c, &p, &obs).unwrap();
        let (got, se) = (g.loss(&p).unwrap(), g.loss_stderr(&p).unwrap());
        assert!((got - want).abs() <= 6.0 * se + 1e-9, "{got} vs {want} (stderr {se})");
    }
    assert_eq!(est.n(), n);
}
