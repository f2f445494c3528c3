use crbm_core::bounds::{divergence_upper, universal_m_table};
use crbm_core::compiler::{compile_universal, divergence_witness, CompileOptions};
use crbm_core::crbm::CrbmParams;
use crbm_core::distributions::{
    conditional_of_joint, random_conditional, tv_row_distance, ConditionalTable, Dist,
};
use crbm_core::ltn::{check_deter_fixed_point, embed_ltn_in_crbm, ThresholdNet};
use crbm_core::mrf::{
    compile_conditional_mrf, conditional_budget, conditional_tv, MrfModel, SimplicialComplex,
};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn compiled_units_fit_the_tabulated_budget() {
    for (k, n) in [(1, 1), (1, 2), (2, 2), (3, 1), (3, 2), (4, 1)] {
        let best = universal_m_table(k, n).best.unwrap().m;
        for seed in 0..3 {
            let target = random_conditional(k, n, 100 + seed).unwrap();
            let (params, _) = compile_universal(&target, &CompileOptions::with_eps(0.02)).unwrap();
            assert!(BigUint::from(params.m) <= best, "k={k} n={n}");
        }
    }
}

#[test]
fn params_survive_json_and_rbm_view() {
    let target = random_conditional(2, 2, 9).unwrap();
    let (params, _) = compile_universal(&target, &CompileOptions::with_eps(0.01)).unwrap();
    let text = serde_json::to_string(&params).unwrap();
    let back: CrbmParams = serde_json::from_str(&text).unwrap();
    assert_eq!(back, params);

    // conditionals of the joint RBM equal the CRBM's, whatever the input biases
    let joint = params.as_rbm().eval_joint_rbm().unwrap();
    let via_joint = conditional_of_joint(&joint, 2).unwrap();
    assert!(tv_row_distance(&via_joint, &params.eval_conditional().unwrap()).unwrap() < 1e-12);
}

#[test]
fn witness_respects_the_divergence_bound() {
    let opts = CompileOptions::with_eps(1e-3);
    for (k, n, m) in [(1, 2, 1), (2, 2, 2), (2, 3, 2), (3, 2, 4), (2, 2, 0)] {
        let bound = divergence_upper(k, n, m).value;
        for seed in 0..5 {
            let target = random_conditional(k, n, 40 + seed).unwrap();
            let (params, rep) = divergence_witness(&target, m, &opts).unwrap();
            assert!(params.m <= m);
            assert!(
                rep.divergence <= bound.max(rep.bound) + 0.05,
                "({k},{n},{m}) {rep:?}"
            );
        }
    }
}

#[test]
fn deterministic_targets_via_threshold_nets() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let net = ThresholdNet::random(3, 3, 2, &mut rng);
    let f = net.truth_table().unwrap();
    let e = embed_ltn_in_crbm(&net, 1e-3).unwrap();
    let target = ConditionalTable::deterministic(3, 2, &f).unwrap();
    assert!(tv_row_distance(&target, &e.params.eval_conditional().unwrap()).unwrap() <= 1e-3);
    assert!(check_deter_fixed_point(&e.params, &f)
        .unwrap()
        .is_satisfied());
}

#[test]
fn conditional_mrf_counts_match() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (total, k, gens) in [
        (4usize, 2usize, vec![0b1111usize]),
        (4, 1, vec![0b0111, 0b1100]),
        (3, 2, vec![0b111]),
    ] {
        let complex = SimplicialComplex::from_generators(total, &gens).unwrap();
        let values: Vec<(usize, f64)> = complex
            .faces()
            .iter()
            .map(|&f| (f, rng.random_range(-1.5..1.5)))
            .collect();
        let model = MrfModel::new(complex.clone(), &values).unwrap();
        let params = compile_conditional_mrf(&model, k).unwrap();
        assert_eq!(params.m, conditional_budget(&complex, k).unwrap());
        assert!(conditional_tv(&model, k, &params).unwrap() <= 1e-6);
    }
}

#[test]
fn uniform_rows_need_no_distance() {
    let u = ConditionalTable::new(
        1,
        2,
        vec![Dist::uniform(2).unwrap(), Dist::uniform(2).unwrap()],
    )
    .unwrap();
    let (_, rep) = divergence_witness(&u, 0, &CompileOptions::with_eps(1e-3)).unwrap();
    assert!(rep.divergence.abs() < 1e-12);
}
