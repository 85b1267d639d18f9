mod common;

use debias_core::fairness::{
    compute_rates, evaluate, generate_synthetic, individual_bias, joint_bias, penalized_objective,
    surrogate_rates, train_constrained, train_unconstrained, ClassifierParams, ConstraintConfig,
    ConstraintMode, GroupKey, Hyperparams, LabeledDataset, SyntheticSpec,
};
use debias_core::{ExactRateTable, Rational};
use proptest::prelude::*;
use rand::Rng;

use common::*;

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n, d)
}

/// Ten rows, six groups over three identities, with predictions.
///
/// | row | y | pred | groups            |
/// |-----|---|------|-------------------|
/// | 0   | 1 | 1    | female, black     |
/// | 1   | 1 | 0    | female, white     |
/// | 2   | 1 | 1    | male, black, chr. |
/// | 3   | 1 | 0    | male, muslim      |
/// | 4   | 1 | 1    | white, christian  |
/// | 5   | 0 | 1    | female, muslim    |
/// | 6   | 0 | 0    | male, black       |
/// | 7   | 0 | 0    | female, christian |
/// | 8   | 0 | 1    | white, muslim     |
/// | 9   | 0 | 0    | none              |
fn hand_table() -> (LabeledDataset, Vec<bool>) {
    let keys = [
        ("gender", "female"),
        ("gender", "male"),
        ("race", "black"),
        ("race", "white"),
        ("religion", "christian"),
        ("religion", "muslim"),
    ];
    let rows: [(bool, bool, &[usize]); 10] = [
        (true, true, &[0, 2]),
        (true, false, &[0, 3]),
        (true, true, &[1, 2, 4]),
        (true, false, &[1, 5]),
        (true, true, &[3, 4]),
        (false, true, &[0, 5]),
        (false, false, &[1, 2]),
        (false, false, &[0, 4]),
        (false, true, &[3, 5]),
        (false, false, &[]),
    ];
    let mut memberships = Vec::new();
    for (_, _, gs) in &rows {
        for g in 0..keys.len() {
            memberships.push(gs.contains(&g));
        }
    }
    let ds = LabeledDataset::new(
        (0..10).map(|i| format!("r{i}")).collect(),
        rows.iter().map(|r| r.0).collect(),
        keys.iter().map(|(i, g)| GroupKey::new(*i, *g)).collect(),
        memberships,
        vec![0.0; 10],
        1,
    )
    .unwrap();
    (ds, rows.iter().map(|r| r.1).collect())
}

#[test]
fn hand_derived_equality_differences_exact() {
    let (ds, preds) = hand_table();
    let table: ExactRateTable = compute_rates(&preds, &ds).unwrap();
    assert_eq!(table.fnr, Some(q(2, 5)));
    assert_eq!(table.fpr, Some(q(2, 5)));
    let race = &table.identities[1];
    assert_eq!((race.fnr, race.fpr), (Some(q(1, 4)), Some(q(1, 2))));

    // Individual: |2/5 - r| over FNRs {1/2, 1/2, 0, 1/2, 0, 1} and FPRs {1/2, 0, 0, 1, 0, 1}.
    let ind = individual_bias(&table);
    assert_eq!(ind.fned, q(17, 10));
    assert_eq!(ind.fped, q(5, 2));
    assert_eq!(ind.total, q(21, 5));

    // Joint references: gender (1/2, 1/3), race (1/4, 1/2), religion (1/3, 2/3).
    let joint = joint_bias(&table);
    assert_eq!(joint.fned, q(3, 2));
    assert_eq!(joint.fped, q(5, 2));
    assert_eq!(joint.total, q(4, 1));
    let per: Vec<Rational> = joint.per_identity.iter().map(|p| p.total).collect();
    assert_eq!(per, vec![q(1, 2), q(3, 2), q(2, 1)]);
    assert_ne!(ind.total, joint.total);

    let approx = joint_bias(&compute_rates::<f64>(&preds, &ds).unwrap());
    assert!((approx.total - 4.0).abs() < 1e-12);
}

#[test]
fn perfect_predictions_and_undefined_rates() {
    let (ds, _) = hand_table();
    let table: ExactRateTable = compute_rates(&ds.labels, &ds).unwrap();
    assert_eq!(individual_bias(&table).total, q(0, 1));
    assert_eq!(joint_bias(&table).total, q(0, 1));
    assert!(compute_rates::<f64>(&[true], &ds).is_err());
}

fn gender_spec(bias: f64, size: usize) -> SyntheticSpec {
    SyntheticSpec::from_json(&format!(
        r#"{{"identities": [{{"name": "gender", "groups": ["male", "female"]}}],
            "group_rates": {{"gender:male": {{"share": 0.5, "toxicity": 0.35}},
                             "gender:female": {{"share": 0.5, "toxicity": 0.25}}}},
            "base_toxicity": 0.3, "feature_dim": 6, "bias_strength": {bias}, "size": {size}}}"#
    ))
    .unwrap()
}

#[test]
fn null_model_has_vanishing_fned() {
    let data = generate_synthetic(&gender_spec(0.0, 50_000), 17).unwrap();
    let out = train_unconstrained(&data, &Hyperparams::default()).unwrap();
    let report = evaluate(&out.params, &data).unwrap();
    assert!(report.individual.fned <= 0.05, "FNED {}", report.individual.fned);
}

#[test]
fn generator_matches_table_one_marginals() {
    let spec = SyntheticSpec::from_json(
        r#"{"identities": [{"name": "gender", "groups": ["male", "female"]}],
            "group_rates": {"gender:male": {"share": 0.110, "toxicity": 0.150},
                            "gender:female": {"share": 0.132, "toxicity": 0.137}},
            "base_toxicity": 0.114, "feature_dim": 4, "bias_strength": 1.0, "size": 20000}"#,
    )
    .unwrap();
    let data = generate_synthetic(&spec, 3).unwrap();
    for (g, share, tox) in [(0, 0.110, 0.150), (1, 0.132, 0.137)] {
        let rows: Vec<usize> = (0..data.len()).filter(|&r| data.is_member(r, g)).collect();
        let pos = rows.iter().filter(|&&r| data.labels[r]).count();
        assert!((rows.len() as f64 / data.len() as f64 - share).abs() <= 0.02);
        assert!((pos as f64 / rows.len() as f64 - tox).abs() <= 0.02);
    }
    let again = generate_synthetic(&spec, 3).unwrap();
    assert_eq!(data, again);
    assert_ne!(data, generate_synthetic(&spec, 4).unwrap());
}

#[test]
fn generator_rejects_undeclared_group() {
    let bad = SyntheticSpec::from_json(
        r#"{"identities": [{"name": "gender", "groups": ["male"]}],
            "group_rates": {"gender:male": {"share": 0.5, "toxicity": 0.3},
                            "race:black": {"share": 0.2, "toxicity": 0.3}},
            "base_toxicity": 0.3, "feature_dim": 4, "bias_strength": 1.0, "size": 10}"#,
    )
    .unwrap();
    assert!(generate_synthetic(&bad, 1).is_err());
}

fn small_run() -> LabeledDataset {
    generate_synthetic(&gender_spec(2.0, 3000), 5).unwrap()
}

#[test]
fn vacuous_constraints_reduce_to_logistic_regression() {
    let data = small_run();
    let hyper = Hyperparams { epochs: 8, ..Default::default() };
    let base = train_unconstrained(&data, &hyper).unwrap();
    let config = ConstraintConfig {
        tau_fnr: f64::INFINITY,
        tau_fpr: f64::INFINITY,
        ..Default::default()
    };
    let vacuous = train_constrained(&data, &config, &hyper).unwrap();
    let (a, b) = (base.trace.last().unwrap().loss, vacuous.trace.last().unwrap().loss);
    assert!((a - b).abs() <= 1e-6);
    assert_eq!(base.params, vacuous.params);
    assert!(!vacuous.unsatisfiable);
}

#[test]
fn training_is_deterministic() {
    let data = small_run();
    let hyper = Hyperparams { epochs: 6, ..Default::default() };
    let a = train_constrained(&data, &ConstraintConfig::default(), &hyper).unwrap();
    let b = train_constrained(&data, &ConstraintConfig::default(), &hyper).unwrap();
    assert_eq!(a, b);
    assert_eq!(evaluate(&a.params, &data).unwrap(), evaluate(&b.params, &data).unwrap());
    let mut x = Vec::new();
    a.write_trace_csv(&mut x).unwrap();
    let text = String::from_utf8(x).unwrap();
    assert!(text.starts_with("epoch,loss,f1,accuracy,fned_j,fped_j,total_bias\n"));
    assert_eq!(text.lines().count(), a.trace.len() + 1);
}

#[test]
fn zero_tolerance_on_noisy_data_is_flagged() {
    let data = small_run();
    let config = ConstraintConfig {
        tau_fnr: 0.0,
        tau_fpr: 0.0,
        ..Default::default()
    };
    let out = train_constrained(&data, &config, &Hyperparams { epochs: 10, ..Default::default() }).unwrap();
    assert!(out.unsatisfiable);
    let best = out.trace.iter().map(|t| t.surrogate_excess).fold(f64::INFINITY, f64::min);
    assert_eq!(out.trace[out.returned_epoch - 1].surrogate_excess, best);
}

#[test]
fn constraint_errors() {
    let data = small_run();
    let negative = ConstraintConfig { tau_fnr: -0.5, ..Default::default() };
    assert!(train_constrained(&data, &negative, &Hyperparams::default()).is_err());
    let unknown = ConstraintConfig { identities: Some(words(&["race"])), ..Default::default() };
    assert!(train_constrained(&data, &unknown, &Hyperparams::default()).is_err());
    let (hand, _) = hand_table();
    let sub = hand.subset(&[0, 1, 2, 3, 4, 9]);
    assert!(train_constrained(&sub, &ConstraintConfig::default(), &Hyperparams::default()).is_err());
}

fn random_params(r: &mut rand_chacha::ChaCha8Rng, d: usize) -> ClassifierParams {
    ClassifierParams {
        weights: gaussian(r, d),
        bias: r.random_range(-1.0..1.0),
        threshold: 0.5,
    }
}

#[test]
fn surrogate_rates_approach_hard_rates() {
    let data = generate_synthetic(&gender_spec(1.0, 1000), 9).unwrap();
    let mut r = rng(10);
    for _ in 0..5 {
        let params = random_params(&mut r, data.dim());
        let sur = surrogate_rates(&params, &data, 200.0);
        let hard = evaluate(&params, &data).unwrap().rates;
        assert!((sur.fnr - hard.fnr.unwrap()).abs() <= 0.01);
        assert!((sur.fpr - hard.fpr.unwrap()).abs() <= 0.01);
        for ((_, fnr, fpr), g) in sur.groups.iter().zip(hard.groups()) {
            assert!((fnr - g.fnr.unwrap()).abs() <= 0.01);
            assert!((fpr - g.fpr.unwrap()).abs() <= 0.01);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn penalty_is_monotone_in_multipliers(seed in any::<u64>()) {
        let data = small_run();
        let mut r = rng(seed);
        let params = random_params(&mut r, data.dim());
        let hyper = Hyperparams::default();
        for mode in [ConstraintMode::Uniform, ConstraintMode::Joint] {
            let config = ConstraintConfig { mode, tau_fnr: 0.0, tau_fpr: 0.0, identities: None };
            let lo: Vec<f64> = (0..4).map(|_| r.random_range(0.0..5.0)).collect();
            let hi: Vec<f64> = lo.iter().map(|l| l + r.random_range(0.0..5.0)).collect();
            let a = penalized_objective(&params, &data, &config, &lo, &hyper).unwrap();
            let b = penalized_objective(&params, &data, &config, &hi, &hyper).unwrap();
            prop_assert!(b >= a);
        }
    }

    #[test]
    fn equality_differences_nonnegative_and_zero_iff_equal(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = 40;
        let labels: Vec<bool> = (0..n).map(|_| r.random_bool(0.5)).collect();
        let keys = vec![GroupKey::new("a", "x"), GroupKey::new("a", "y"), GroupKey::new("b", "z")];
        let memberships: Vec<bool> = (0..n * 3).map(|_| r.random_bool(0.4)).collect();
        let ds = LabeledDataset::new((0..n).map(|i| i.to_string()).collect(), labels, keys, memberships, vec![0.0; n], 1).unwrap();
        let preds: Vec<bool> = (0..n).map(|_| r.random_bool(0.5)).collect();
        let table: ExactRateTable = compute_rates(&preds, &ds).unwrap();
        for (diff, uses_identity) in [(individual_bias(&table), false), (joint_bias(&table), true)] {
            prop_assert!(diff.fned >= q(0, 1) && diff.fped >= q(0, 1));
            let all_equal = table.identities.iter().all(|id| {
                let (rf, rp) = if uses_identity { (id.fnr, id.fpr) } else { (table.fnr, table.fpr) };
                id.groups.iter().all(|g| (g.fnr.is_none() || rf.is_none() || g.fnr == rf) && (g.fpr.is_none() || rp.is_none() || g.fpr == rp))
            });
            prop_assert_eq!(diff.total == q(0, 1), all_equal);
        }
    }
}
