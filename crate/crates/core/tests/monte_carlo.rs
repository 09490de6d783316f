use infogen::bounds::{BoundId, BoundQuery};
use infogen::golden;
use infogen::verify::{coverage_monte_carlo, CoverageOptions, Verifier};

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let setup = golden::extended_gibbs(3, 0.5).setup(None).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| coverage_monte_carlo(&setup, BoundId::SingleDrawMInf, 0.1, 50_000, 11).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(7));
}

#[test]
fn sampled_and_exact_coverage_agree_on_a_larger_model() {
    let setup = golden::extended_gibbs(4, 2.0).setup(None).unwrap();
    let model = setup.build_model().unwrap();
    let v = Verifier::new(&setup, &model).unwrap();
    for (id, scale) in [
        (BoundId::SingleDrawLeakage, 0.3),
        (BoundId::SingleDrawMInf, 0.2),
        (BoundId::PacBayesMoment, 0.15),
    ] {
        let q = BoundQuery::new(id, v.params().delta(0.1).m(2.0));
        let options = CoverageOptions { epsilon_scale: scale, detail: false };
        let exact = v.coverage(&q, options).unwrap();
        let est = coverage_monte_carlo(&setup, id, exact.epsilon.unwrap(), 100_000, 3).unwrap();
        assert!(
            exact.violation_mass > 0.0 && exact.violation_mass < 1.0,
            "{id}: trivial mass {}",
            exact.violation_mass
        );
        assert!(est.agrees_with(exact.violation_mass, 4.0), "{id}: {est:?} vs {}", exact.violation_mass);
    }
}

#[test]
fn sampling_works_beyond_the_atom_budget() {
    let setup = golden::extended_gibbs(30, 2.0).setup(None).unwrap();
    assert!(setup.build_model().is_err());
    let est = coverage_monte_carlo(&setup, BoundId::SingleDrawLeakage, 0.05, 20_000, 9).unwrap();
    assert!(est.estimate < 0.5);
}
