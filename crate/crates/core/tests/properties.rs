use boostfhe::bcc::{blind_shuffle, FrequencyProfile, ValueClass};
use boostfhe::clustering::{cluster_nodes, ClusterConfig, Validator};
use boostfhe::comparison::{encrypt_pe, greater_than};
use boostfhe::encoding::{
    compress_query, decompress_query, pack_plaintexts, re_encode, CwParams, QueryFeatures, QueryLayout,
};
use boostfhe::fhe::{generate_keys, Evaluator, FheParams, SecretKey};
use boostfhe::forest::{cluster_paths, plan_packing, quantize, ForestModel, ModelKind};
use boostfhe::synth::{random_forest, random_row, ForestShape};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn keys(slots: usize) -> (SecretKey, Evaluator) {
    let params = FheParams::with_slot_count(slots).unwrap();
    let (sk, ek) = generate_keys(&params, &mut ChaCha20Rng::seed_from_u64(1));
    (sk, Evaluator::new(ek))
}

fn forest(seed: u64, classes: usize, kind: ModelKind) -> ForestModel {
    let shape = ForestShape {
        trees: 6,
        max_depth: 4,
        features: 3,
        classes,
        kind,
        ..Default::default()
    };
    random_forest(&shape, &mut ChaCha20Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn greater_than_matches_integers(alpha in 0u64..256, beta in 0u64..256) {
        let (sk, ev) = keys(64);
        let cw = CwParams::default_for_bits(8);
        let pe = encrypt_pe(alpha, 8, cw, &sk).unwrap();
        let bit = greater_than(&ev, &pe, &re_encode(beta, 8, cw).unwrap()).unwrap();
        let got = sk.params().decode(&sk.decrypt(&bit.ciphertext).unwrap())[bit.slot_index];
        prop_assert_eq!(got, u64::from(alpha > beta));
    }

    #[test]
    fn decompression_inverts_compression(
        values in proptest::collection::vec(0u64..256, 1..6),
        repetition in 1usize..6,
    ) {
        let (sk, ev) = keys(1024);
        let names: Vec<String> = (0..values.len()).map(|i| format!("f{i}")).collect();
        let layout = QueryLayout::build(1024, 8, CwParams::default_for_bits(8), repetition, &names).unwrap();
        let features: QueryFeatures = names.iter().cloned().zip(values.iter().copied()).collect();
        let planes = pack_plaintexts(&features, &layout).unwrap();
        let compressed = compress_query(&planes, &layout, &sk).unwrap();
        prop_assert_eq!(compressed.ciphertexts.len(), planes.len().div_ceil(repetition));
        let restored = decompress_query(&compressed, &ev).unwrap();
        for (c, p) in restored.iter().zip(&planes) {
            prop_assert_eq!(&sk.params().decode(&sk.decrypt(c).unwrap()), p);
        }
    }

    #[test]
    fn shuffle_is_a_recorded_permutation(log_n in 1u32..7, seed in any::<u64>()) {
        let n = 1usize << log_n;
        let (sk, ev) = keys(256);
        let params = sk.params().clone();
        let profile = FrequencyProfile::new(
            vec![ValueClass::Zero, ValueClass::UniformNonzero],
            vec![n / 2, n / 2],
            256,
        )
        .unwrap();
        // body values 1..=n replicated across each row
        let input: Vec<u64> = (0..256).map(|i| (i % n) as u64 + 1).collect();
        let c = sk.encrypt(&params.encode(&input).unwrap()).unwrap();
        let (out, record) = blind_shuffle(&ev, &c, n, &profile, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap();
        let slots = params.decode(&sk.decrypt(&out).unwrap());
        for i in 0..n {
            prop_assert_eq!(slots[record.position_of(i).unwrap()], i as u64 + 1);
        }
        prop_assert!(record.rounds.iter().all(|r| r.is_disjoint(n)));
        prop_assert!(record.rotations <= 2 * log_n as usize);
    }

    #[test]
    fn clustering_never_lowers_accuracy(seed in any::<u64>(), intensity in 0.0f64..0.5) {
        let model = forest(seed, 2, ModelKind::Xgboost);
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0x5eed);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| random_row(&model, &mut rng)).collect();
        // labels from the model itself with a few flipped
        let labels: Vec<usize> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| model.predict(r) ^ usize::from(i % 7 == 0))
            .collect();
        let validator = Validator::new(rows.clone(), labels.clone()).unwrap();
        let cfg = ClusterConfig { intensity, tolerance: 0.0, bitwidth: 8 };
        let (clustered, report) = cluster_nodes(&model, &cfg, &validator).unwrap();
        prop_assert!(clustered.accuracy(&rows, &labels) >= model.accuracy(&rows, &labels));
        prop_assert!(report.plan_size_after <= report.plan_size_before);
        prop_assert_eq!(clustered.node_count(), model.node_count());
    }

    #[test]
    fn model_json_round_trips(seed in any::<u64>(), classes in 2usize..5, ada in any::<bool>()) {
        let kind = if ada { ModelKind::Adaboost } else { ModelKind::Xgboost };
        let model = forest(seed, classes, kind);
        let back = ForestModel::from_json(&model.to_json()).unwrap();
        prop_assert_eq!(&back, &model);
    }

    #[test]
    fn packing_has_one_true_slot_per_group(seed in any::<u64>(), cap in 16usize..64) {
        let q = quantize(&forest(seed, 3, ModelKind::Xgboost), 8).unwrap();
        let table = cluster_paths(&q);
        // depth-4 trees have at most 16 paths, so any cap from 16 fits
        let pack = plan_packing(&q, &table, cap).unwrap();
        prop_assert!(plan_packing(&q, &table, 0).is_err());
        prop_assert_eq!(pack.chunk_zeros.iter().sum::<usize>(), pack.groups.len());
        prop_assert!(pack.chunk_used.iter().all(|&u| u <= 2 * cap));
        let members: usize = pack.slots.iter().map(|s| s.members.len()).sum();
        prop_assert_eq!(members, table.len());
    }
}
