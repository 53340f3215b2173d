use pax_core::protocol::{Endpoint, Federation, Message, PartyState, Payload, SCHEMA_VERSION};
use pax_core::{run_training, Dataset, Ensemble, Error, LossKind, TrainingConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid_data(n: usize, seed: u64, loss: LossKind) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..3).map(|_| rng.random_range(0..20) as f64 / 4.0).collect();
        let s = row[0] - row[1] + 0.5 * row[2] - 1.0 + rng.random_range(-1.0..1.0);
        labels.push(match loss {
            LossKind::BinaryLogistic => (s > 0.0) as u8 as f64,
            LossKind::SquaredError => s,
        });
        rows.push(row);
    }
    Dataset::new(rows, labels, vec!["a".into(), "b".into(), "c".into()]).unwrap()
}

fn config(rounds: usize, loss: LossKind) -> TrainingConfig {
    TrainingConfig {
        max_rounds: rounds,
        loss,
        ..TrainingConfig::default()
    }
}

#[test]
fn zero_rounds_keeps_the_null_model() {
    let out = run_training(
        &config(0, LossKind::BinaryLogistic),
        vec![grid_data(60, 1, LossKind::BinaryLogistic)],
    )
    .unwrap();
    assert!(out.model.is_empty());
    assert!(out.telemetry.is_empty());
    assert!((out.initial_loss - 2f64.ln()).abs() < 1e-12);
    assert_eq!(out.model.predict(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
}

#[test]
fn all_negative_labels_push_scores_down() {
    let ds = grid_data(50, 2, LossKind::BinaryLogistic);
    let rows: Vec<Vec<f64>> = ds.rows().map(<[f64]>::to_vec).collect();
    let zeros = Dataset::new(rows.clone(), vec![0.0; rows.len()], ds.feature_names().to_vec()).unwrap();
    let out = run_training(&config(5, LossKind::BinaryLogistic), vec![zeros]).unwrap();
    for r in &rows {
        assert!(out.model.predict(r).unwrap() < 0.0);
    }
}

#[test]
fn copies_across_parties_match_the_pooled_first_tree() {
    let ds = grid_data(80, 3, LossKind::BinaryLogistic);
    let rows: Vec<Vec<f64>> = ds.rows().map(<[f64]>::to_vec).collect();
    let pooled_rows: Vec<Vec<f64>> = rows.iter().chain(&rows).chain(&rows).cloned().collect();
    let pooled_labels: Vec<f64> = ds
        .labels()
        .iter()
        .chain(ds.labels())
        .chain(ds.labels())
        .copied()
        .collect();
    let pooled = Dataset::new(pooled_rows, pooled_labels, ds.feature_names().to_vec()).unwrap();

    let cfg = config(1, LossKind::BinaryLogistic);
    let fed = run_training(&cfg, vec![ds.clone(), ds.clone(), ds]).unwrap();
    let central = run_training(&cfg, vec![pooled]).unwrap();
    assert_eq!(fed.model.trees, central.model.trees);
    let (a, b) = (fed.telemetry[0].train_loss, central.telemetry[0].train_loss);
    assert!((a - b).abs() <= 1e-12 * b, "{a} vs {b}");
}

#[test]
fn identical_runs_are_identical() {
    let parts = || {
        vec![
            grid_data(70, 4, LossKind::BinaryLogistic),
            grid_data(30, 5, LossKind::BinaryLogistic),
        ]
    };
    let cfg = config(8, LossKind::BinaryLogistic);
    let a = run_training(&cfg, parts()).unwrap();
    let b = run_training(&cfg, parts()).unwrap();
    assert_eq!(a.model.to_json().unwrap(), b.model.to_json().unwrap());
    assert_eq!(a.messages, b.messages);
    assert_eq!(a.bytes, b.bytes);
}

#[test]
fn separable_data_is_learned() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let make = |rng: &mut ChaCha8Rng, n: usize| {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let labels = rows.iter().map(|r| (r[0] + 0.3 * r[1] > 0.1) as u8 as f64).collect();
        Dataset::new(rows, labels, vec!["u".into(), "v".into()]).unwrap()
    };
    let parties = vec![make(&mut rng, 200), make(&mut rng, 120), make(&mut rng, 40)];
    let out = run_training(&config(20, LossKind::BinaryLogistic), parties.clone()).unwrap();
    let (mut hit, mut total) = (0, 0);
    for p in &parties {
        for (x, &y) in p.rows().zip(p.labels()) {
            hit += ((out.model.predict(x).unwrap() > 0.0) as u8 as f64 == y) as usize;
            total += 1;
        }
    }
    assert!(hit as f64 / total as f64 >= 0.95, "{hit}/{total}");
}

#[test]
fn squared_loss_never_increases() {
    let parties = vec![
        grid_data(90, 7, LossKind::SquaredError),
        grid_data(45, 8, LossKind::SquaredError),
    ];
    let out = run_training(&config(15, LossKind::SquaredError), parties).unwrap();
    let mut prev = out.initial_loss;
    for (i, t) in out.telemetry.iter().enumerate() {
        assert_eq!(t.t, i + 1);
        assert!(t.train_loss <= prev + 1e-12, "round {}: {} > {prev}", t.t, t.train_loss);
        prev = t.train_loss;
    }
    assert_eq!(out.model.len(), 15);
    assert!(prev < out.initial_loss);
}

#[test]
fn epsilons_follow_party_sizes() {
    let parties = vec![
        grid_data(300, 9, LossKind::BinaryLogistic),
        grid_data(100, 10, LossKind::BinaryLogistic),
    ];
    let out = run_training(&config(1, LossKind::BinaryLogistic), parties).unwrap();
    assert_eq!(out.sizes, vec![300, 100]);
    let eps = 1.0 / 255.0;
    assert!((out.epsilons[0] - eps * 0.75).abs() < 1e-15);
    assert!((out.epsilons[1] - eps * 0.25).abs() < 1e-15);
}

#[test]
fn federation_enforces_its_phases() {
    let mut fed = Federation::new(
        config(1, LossKind::BinaryLogistic),
        vec![grid_data(20, 11, LossKind::BinaryLogistic)],
    )
    .unwrap();
    assert!(matches!(fed.run_round(), Err(Error::Protocol(_))));
    fed.setup().unwrap();
    assert!(matches!(fed.setup(), Err(Error::Protocol(_))));
    fed.run_round().unwrap();
    assert!(matches!(fed.run_round(), Err(Error::Protocol(_))));
    assert_eq!(fed.terminate().unwrap().len(), 1);
    assert!(fed.parties()[0].final_model().is_some());
}

#[test]
fn bad_rosters_are_rejected() {
    let cfg = config(1, LossKind::BinaryLogistic);
    assert!(matches!(Federation::new(cfg.clone(), vec![]), Err(Error::Config(_))));
    let narrow = Dataset::new(vec![vec![1.0]], vec![0.0], vec!["a".into()]).unwrap();
    assert!(matches!(
        Federation::new(cfg.clone(), vec![grid_data(5, 12, LossKind::BinaryLogistic), narrow]),
        Err(Error::Config(_))
    ));
    let regression = grid_data(10, 13, LossKind::SquaredError);
    assert!(matches!(Federation::new(cfg, vec![regression]), Err(Error::Config(_))));
}

fn to_party(round: usize, payload: Payload) -> Message {
    Message::new(round, Endpoint::Aggregator, Endpoint::Party(0), payload)
}

#[test]
fn party_rejects_out_of_order_messages() {
    let mut party = PartyState::new(0, grid_data(10, 14, LossKind::BinaryLogistic), true);
    let null = Ensemble::null(LossKind::BinaryLogistic, 0.3, 3);
    assert!(party
        .handle(to_party(0, Payload::ModelBroadcast { model: null.clone() }))
        .is_err());
    let misaddressed = Message::new(0, Endpoint::Aggregator, Endpoint::Party(1), Payload::DataCountQuery);
    assert!(party.handle(misaddressed).is_err());
    assert!(party.handle(to_party(0, Payload::DataCountReply { count: 3 })).is_err());

    let reply = party.handle(to_party(0, Payload::DataCountQuery)).unwrap().unwrap();
    assert_eq!(reply.payload, Payload::DataCountReply { count: 10 });
    assert!(party
        .handle(to_party(0, Payload::EpsilonAssign { epsilon: 0.1 }))
        .unwrap()
        .is_none());
    assert!(party
        .handle(to_party(0, Payload::EpsilonAssign { epsilon: 0.1 }))
        .is_err());

    let first = party
        .handle(to_party(0, Payload::ModelBroadcast { model: null.clone() }))
        .unwrap()
        .unwrap();
    let second = party
        .handle(to_party(1, Payload::ModelBroadcast { model: null }))
        .unwrap()
        .unwrap();
    match (first.payload, second.payload) {
        (Payload::GradientReply(a), Payload::GradientReply(b)) => {
            assert!(a.histogram.is_some());
            assert!(b.histogram.is_none());
            assert_eq!(a.buckets, b.buckets);
        }
        other => panic!("unexpected replies {other:?}"),
    }
    assert_eq!(second.round, 1);
}

#[test]
fn wire_messages_round_trip_and_check_the_schema() {
    let msg = to_party(4, Payload::EpsilonAssign { epsilon: 0.25 });
    let json = msg.to_json().unwrap();
    assert!(json.contains("\"type\":\"epsilon_assign\""));
    assert!(json.contains(&format!("\"schema_version\":{SCHEMA_VERSION}")));
    assert_eq!(Message::from_json(&json).unwrap(), msg);
    let future = json.replace(&format!("\"schema_version\":{SCHEMA_VERSION}"), "\"schema_version\":99");
    assert!(matches!(Message::from_json(&future), Err(Error::Protocol(_))));
}
