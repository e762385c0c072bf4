//! Acceptance suite. Runs every criterion in sequence, prints one
//! `PASS`/`FAIL` line each and exits non-zero if any failed.

use std::io::Write;
use std::net::TcpListener;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use boostfhe::bcc::{blind_shuffle, prepare_challenge, FrequencyProfile, ValueClass};
use boostfhe::clustering::{cluster_nodes, ClusterConfig, Validator};
use boostfhe::comparison::{batch_compare, encrypt_label, encrypt_pe, greater_than, is_equal};
use boostfhe::encoding::{
    compress_query, cw_encode, decompress_query, pack_plaintexts, pack_query, re_encode, CwParams, QueryFeatures,
    QueryLayout,
};
use boostfhe::fhe::{generate_keys, CipherHandle, Evaluator, FheParams, SecretKey};
use boostfhe::forest::{quantize_threshold, quantize_value, Child, ForestModel, ModelKind, ScoreMode};
use boostfhe::protocol::messages::encode_ciphers;
use boostfhe::protocol::{
    serve_in_process, Client, Connection, Deployment, Frame, InferenceResult, MessageType, QueryId, Server,
    ServerConfig, ServerModel, TcpTransport,
};
use boostfhe::synth::{
    random_forest, random_row, synthetic_dataset, train_boosted, BoostParams, DatasetShape, ForestShape,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! check {
    ($cond:expr, $($msg:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($msg)+));
        }
    };
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn keys(slots: usize, seed: u64) -> (SecretKey, Evaluator) {
    let params = FheParams::with_slot_count(slots).unwrap();
    let (sk, ek) = generate_keys(&params, &mut ChaCha20Rng::seed_from_u64(seed));
    (sk, Evaluator::new(ek))
}

fn slots_of(sk: &SecretKey, c: &CipherHandle) -> Vec<u64> {
    sk.params().decode(&sk.decrypt(c).unwrap())
}

/// Fixed-point scores computed directly from the float model: quantized
/// comparisons along each tree, leaf contributions rounded at scale 4096.
fn oracle_scores(model: &ForestModel, bits: u32, row: &[f64]) -> Vec<i64> {
    let signed = model.score_mode() == ScoreMode::Signed;
    let mut scores = vec![0i64; if signed { 1 } else { model.num_classes }];
    for tree in &model.trees {
        let mut at = if tree.nodes.is_empty() {
            Child::Leaf(0)
        } else {
            Child::Node(0)
        };
        let leaf = loop {
            match at {
                Child::Leaf(l) => break l,
                Child::Node(n) => {
                    let node = &tree.nodes[n];
                    let f = model.features.iter().position(|s| s.name == node.feature).unwrap();
                    let spec = &model.features[f];
                    let x = quantize_value(row[f], spec, bits);
                    let theta = quantize_threshold(node.threshold, spec, bits).unwrap();
                    at = if x > theta { node.right } else { node.left };
                }
            }
        };
        let l = &tree.leaves[leaf];
        let weight = tree.weight.unwrap_or(1.0);
        let value = match model.model_kind {
            ModelKind::Xgboost => l.score * weight,
            ModelKind::Adaboost => l.score.signum() * weight,
        };
        let slot = if signed {
            0
        } else {
            l.class_id.or(tree.class_id).unwrap_or(0)
        };
        scores[slot] += (value * 4096.0).round() as i64;
    }
    scores
}

fn oracle_class(scores: &[i64]) -> usize {
    if scores.len() == 1 {
        return usize::from(scores[0] > 0);
    }
    (0..scores.len()).fold(0, |best, i| if scores[i] > scores[best] { i } else { best })
}

fn server_config(bits: u32, seed: u64) -> ServerConfig {
    ServerConfig {
        bitwidth: bits,
        min_profile_len: 0,
        seed: Some(seed),
    }
}

fn run_queries(server: Arc<Server>, params: &FheParams, seed: u64, rows: &[Vec<f64>]) -> Vec<InferenceResult> {
    let (mut conn, handle) = serve_in_process(server);
    let mut client = Client::new(params, seed);
    client.setup(&mut conn).unwrap();
    let out = rows.iter().map(|r| client.infer_row(&mut conn, r).unwrap()).collect();
    drop(conn);
    handle.join().unwrap().unwrap();
    out
}

fn comparison_exhaustive() -> Outcome {
    let start = Instant::now();
    let (sk, ev) = keys(256, 1);
    let mut checked = 0;
    let cw4 = CwParams::default_for_bits(4);
    for alpha in 0..16u64 {
        let pe = encrypt_pe(alpha, 4, cw4, &sk).map_err(e)?;
        for beta in 0..16u64 {
            let re = re_encode(beta, 4, cw4).map_err(e)?;
            let bit = greater_than(&ev, &pe, &re).map_err(e)?;
            let got = slots_of(&sk, &bit.ciphertext)[bit.slot_index];
            check!(got == u64::from(alpha > beta), "4-bit {alpha} > {beta} gave {got}");
            checked += 1;
        }
    }
    let cw16 = CwParams::default_for_bits(16);
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    for i in 0..1000 {
        let alpha = rng.gen_range(0..1u64 << 16);
        // every tenth pair sits on or next to the boundary
        let beta = match i % 10 {
            0 => alpha,
            1 => alpha.saturating_sub(1),
            _ => rng.gen_range(0..1u64 << 16),
        };
        let pe = encrypt_pe(alpha, 16, cw16, &sk).map_err(e)?;
        let re = re_encode(beta, 16, cw16).map_err(e)?;
        let bit = greater_than(&ev, &pe, &re).map_err(e)?;
        let got = slots_of(&sk, &bit.ciphertext)[bit.slot_index];
        check!(got == u64::from(alpha > beta), "16-bit {alpha} > {beta} gave {got}");
        checked += 1;
    }
    let elapsed = start.elapsed();
    check!(elapsed < Duration::from_secs(10), "took {elapsed:.2?}, limit 10 s");
    Ok(format!("{checked}/{checked} pairs correct in {elapsed:.2?}"))
}

fn depth_invariance() -> Outcome {
    let (sk, shared) = keys(8, 3);
    let mut seen = Vec::new();
    for bits in [8u32, 16, 32] {
        for h in [2usize, 3, 4] {
            // the ledger's depth is a high-water mark, so each case gets its own
            let ev = Evaluator::new(shared.keys().clone());
            let cw = CwParams::for_alphabet(1u128 << bits, h).map_err(e)?;
            let top = (1u64 << bits) - 1;
            let x = cw_encode(top - 5, cw).map_err(e)?;
            let other = cw_encode(7, cw).map_err(e)?;
            let enc = encrypt_label(&x, &sk).map_err(e)?;
            let expected = (h as f64).log2().ceil() as u32 + 2;
            for (label, want) in [(&x, 1u64), (&other, 0)] {
                let before = ev.ledger().snapshot();
                let eq = is_equal(&ev, &enc, label).map_err(e)?;
                let used = ev.ledger().snapshot() - before;
                check!(
                    eq.depth() == expected && used.max_depth == u64::from(expected),
                    "bits {bits} h {h}: depth {} (ledger {}), expected {expected}",
                    eq.depth(),
                    used.max_depth
                );
                check!(
                    slots_of(&sk, &eq).iter().all(|&v| v == want),
                    "bits {bits} h {h}: wrong equality"
                );
            }
            seen.push(format!("{bits}b/h{h}/len{}={expected}", cw.length));
        }
    }
    Ok(seen.join(" "))
}

fn end_to_end() -> Outcome {
    let params = FheParams::default();
    let (mut total, mut matched, mut collisions, mut float_agree) = (0, 0, 0, 0);
    for i in 0..10u64 {
        let mut rng = ChaCha20Rng::seed_from_u64(100 + i);
        let shape = ForestShape {
            trees: rng.gen_range(5..=20),
            max_depth: rng.gen_range(2..=5),
            features: rng.gen_range(3..=6),
            classes: 2 + (i as usize % 3),
            kind: ModelKind::Xgboost,
            ..Default::default()
        };
        let model = random_forest(&shape, &mut rng);
        let rows: Vec<Vec<f64>> = (0..100).map(|_| random_row(&model, &mut rng)).collect();
        let server = Arc::new(Server::new(model.clone(), server_config(8, i)).map_err(e)?);
        let results = run_queries(server.clone(), &params, 200 + i, &rows);
        check!(server.ledger().snapshot().decryptions == 0, "server decrypted");
        for (row, res) in rows.iter().zip(&results) {
            let want = oracle_scores(&model, 8, row);
            total += 1;
            collisions += usize::from(res.collision_suspected);
            float_agree += usize::from(model.predict(row) == res.class);
            if res.class == oracle_class(&want) && res.scores == want {
                matched += 1;
            } else {
                check!(
                    res.collision_suspected,
                    "forest {i}: class {} scores {:?} vs oracle {:?} without a collision flag",
                    res.class,
                    res.scores,
                    want
                );
            }
        }
    }
    check!(matched * 100 >= total * 99, "{matched}/{total} matched");
    Ok(format!(
        "{matched}/{total} match the quantized oracle, {collisions} collisions flagged, \
         {float_agree}/{total} also agree with the float model, t = {}",
        params.plaintext_modulus()
    ))
}

fn sumpath_structure() -> Outcome {
    let (sk, ev) = keys(8192, 4);
    let params = sk.params().clone();
    let (mut queries, mut extra_zeros, mut mults) = (0, 0, 0);
    for i in 0..5u64 {
        let mut rng = ChaCha20Rng::seed_from_u64(300 + i);
        let shape = ForestShape {
            trees: 8 + 3 * i as usize,
            max_depth: 4,
            features: 4,
            classes: 2 + (i as usize % 2),
            ..Default::default()
        };
        let model = random_forest(&shape, &mut rng);
        let sm = Arc::new(ServerModel::new(model.clone(), 8).map_err(e)?);
        let dep = Deployment::new(sm.clone(), &params, 0).map_err(e)?;
        check!(
            dep.pack.groups.len() == model.trees.len(),
            "forest {i}: {} groups for {} trees",
            dep.pack.groups.len(),
            model.trees.len()
        );
        for _ in 0..20 {
            let row = random_row(&model, &mut rng);
            let features = sm.forest.query_features(&sm.forest.quantize_row(&row).map_err(e)?);
            let planes = pack_plaintexts(&features, &dep.layout).map_err(e)?;
            let query = compress_query(&planes, &dep.layout, &sk).map_err(e)?;
            let (expanded, cmp) = dep.compare(&ev, &query.ciphertexts).map_err(e)?;
            let before = ev.ledger().snapshot();
            let pack = dep.sum_paths(&ev, &cmp, &expanded[0], &mut rng).map_err(e)?;
            let used = ev.ledger().snapshot() - before;
            mults += used.cipher_mults;
            check!(
                used.cipher_mults == 0,
                "sum_path spent {} cipher-cipher mults",
                used.cipher_mults
            );
            let zeros: usize = pack
                .chunks
                .iter()
                .enumerate()
                .map(|(c, ct)| {
                    slots_of(&sk, ct)[..dep.pack.chunk_used[c]]
                        .iter()
                        .filter(|&&v| v == 0)
                        .count()
                })
                .sum();
            check!(
                zeros >= model.trees.len(),
                "{zeros} zero slots for {} trees",
                model.trees.len()
            );
            if zeros > model.trees.len() {
                eprintln!("sumpath: collision, {zeros} zeros for {} trees", model.trees.len());
            }
            extra_zeros += zeros - model.trees.len();
            queries += 1;
        }
    }
    Ok(format!(
        "{queries} queries: zero count == tree count ({extra_zeros} extra from collisions), {mults} cipher-cipher mults"
    ))
}

fn bcc_frequency_invariance() -> Outcome {
    let params = FheParams::with_slot_count(4096).map_err(e)?;
    let mut transcripts = Vec::new();
    let mut profiles = Vec::new();
    for (i, (trees, depth, classes)) in [(6usize, 3usize, 2usize), (10, 4, 3)].into_iter().enumerate() {
        let mut rng = ChaCha20Rng::seed_from_u64(400 + i as u64);
        let model = random_forest(
            &ForestShape {
                trees,
                max_depth: depth,
                features: 3 + i,
                classes,
                ..Default::default()
            },
            &mut rng,
        );
        let config = ServerConfig {
            min_profile_len: 1024,
            ..server_config(8, i as u64)
        };
        let server = Arc::new(Server::new(model.clone(), config).map_err(e)?);
        let rows: Vec<Vec<f64>> = (0..50).map(|_| random_row(&model, &mut rng)).collect();
        let (mut conn, handle) = serve_in_process(server);
        let mut client = Client::new(&params, 500 + i as u64);
        profiles.push(client.setup(&mut conn).map_err(e)?.profile.clone());
        for row in &rows {
            let res = client.infer_row(&mut conn, row).map_err(e)?;
            let mut counts: Vec<(usize, usize)> = res.conversions.iter().map(|s| (s.zeros, s.nonzeros)).collect();
            counts.sort_unstable();
            transcripts.push(counts);
        }
        drop(conn);
        handle.join().unwrap().map_err(e)?;
    }
    check!(profiles[0] == profiles[1], "servers published different profiles");
    let first = &transcripts[0];
    let differing = transcripts.iter().filter(|t| *t != first).count();
    check!(
        differing == 0,
        "{differing} of {} transcripts differ from {first:?}",
        transcripts.len()
    );
    Ok(format!(
        "{} transcripts, every one {first:?} (zeros, nonzeros) with n = {}",
        transcripts.len(),
        profiles[0].n
    ))
}

fn shuffle_uniformity() -> Outcome {
    const N_BODY: usize = 8;
    const TRIALS: usize = 100_000;
    let (sk, ev) = keys(16, 5);
    let params = sk.params().clone();
    let profile =
        FrequencyProfile::new(vec![ValueClass::Zero, ValueClass::UniformNonzero], vec![4, 4], 16).map_err(e)?;
    let mut input = vec![0u64; 16];
    for (i, v) in input.iter_mut().take(N_BODY).enumerate() {
        *v = i as u64 + 1;
    }
    let c = sk.encrypt(&params.encode(&input).map_err(e)?).map_err(e)?;
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let mut table = [[0u64; N_BODY]; N_BODY];
    let mut rounds = 0;
    for _ in 0..TRIALS {
        let (out, record) = blind_shuffle(&ev, &c, N_BODY, &profile, &mut rng).map_err(e)?;
        for round in &record.rounds {
            check!(round.is_disjoint(N_BODY), "round {round:?} writes a slot twice");
            rounds += 1;
        }
        let slots = slots_of(&sk, &out);
        let mut placed = [false; N_BODY];
        for (pos, &v) in slots[..N_BODY].iter().enumerate() {
            check!((1..=N_BODY as u64).contains(&v), "slot {pos} holds {v}");
            let element = v as usize - 1;
            check!(!placed[element], "element {element} appears twice");
            placed[element] = true;
            check!(
                record.position_of(element) == Some(pos),
                "record disagrees with ciphertext"
            );
            table[element][pos] += 1;
        }
    }
    let expected = TRIALS as f64 / N_BODY as f64;
    let stat: f64 = table
        .iter()
        .flatten()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum();
    let dof = ((N_BODY - 1) * (N_BODY - 1)) as f64;
    let p = 1.0 - ChiSquared::new(dof).map_err(e)?.cdf(stat);
    check!(p > 0.01, "chi-square {stat:.2} on {dof} dof, p = {p:.4}");
    Ok(format!(
        "chi-square {stat:.2} on {dof} dof, p = {p:.3}; {rounds} rounds all disjoint"
    ))
}

fn shuffle_cost() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut seen = Vec::new();
    for slots in [4096usize, 8192] {
        let (sk, ev) = keys(slots, 8);
        let params = sk.params().clone();
        for n in [2usize, 8, 64, 512, slots / 2] {
            let profile = FrequencyProfile::balanced(n / 2, n / 2, slots).map_err(e)?;
            check!(profile.n == n, "profile length {} for {n}", profile.n);
            let zeros = n / 2;
            let randoms = (n / 2).saturating_sub(1);
            let mut input = vec![0u64; slots];
            for v in input.iter_mut().skip(zeros).take(randoms) {
                *v = rng.gen_range(1..params.plaintext_modulus());
            }
            let c = sk.encrypt(&params.encode(&input).map_err(e)?).map_err(e)?;
            let before = ev.ledger().snapshot();
            let tr = prepare_challenge(&ev, &c, zeros + randoms, &[zeros, randoms], &profile, &mut rng).map_err(e)?;
            let spent = (ev.ledger().snapshot() - before).rotations();
            let log_n = n.trailing_zeros() as u64;
            let bound = 2 * log_n + (slots / n).trailing_zeros() as u64 + 4;
            check!(spent <= bound, "N {slots} n {n}: {spent} rotations, bound {bound}");
            let body_zeros = slots_of(&sk, &tr.shuffled)[..n].iter().filter(|&&v| v == 0).count();
            check!(body_zeros == n / 2, "N {slots} n {n}: {body_zeros} zeros after shuffle");
            seen.push(format!("{slots}/{n}:{spent}<={bound}"));
        }
    }
    Ok(seen.join(" "))
}

fn compression() -> Outcome {
    let (sk, ev) = keys(4096, 9);
    let names: Vec<String> = (0..5).map(|i| format!("f{i}")).collect();
    let cw = CwParams::default_for_bits(8);
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    let mut bytes = [(0usize, 0usize); 3];
    for q in 0..1000 {
        let r = 2 + q % 3;
        let layout = QueryLayout::build(4096, 8, cw, r, &names).map_err(e)?;
        let features: QueryFeatures = names.iter().map(|n| (n.clone(), rng.gen_range(0..256))).collect();
        let planes = pack_plaintexts(&features, &layout).map_err(e)?;
        let compressed = compress_query(&planes, &layout, &sk).map_err(e)?;
        let restored = decompress_query(&compressed, &ev).map_err(e)?;
        check!(
            restored.len() == planes.len(),
            "query {q}: {} planes restored",
            restored.len()
        );
        for (j, (c, p)) in restored.iter().zip(&planes).enumerate() {
            check!(
                &slots_of(&sk, c) == p,
                "query {q}, R {r}: plane {j} differs after round trip"
            );
        }
        let full = pack_query(&features, &layout, &sk).map_err(e)?;
        let wire = |cs: &[CipherHandle]| Frame::new(MessageType::Query, QueryId([0; 8]), encode_ciphers(cs)).wire_len();
        bytes[r - 2].0 += wire(&compressed.ciphertexts);
        bytes[r - 2].1 += wire(&full);
    }
    let mut seen = Vec::new();
    for (i, (small, large)) in bytes.iter().enumerate() {
        let r = i + 2;
        let ratio = *small as f64 / *large as f64;
        let bound = 1.0 / r as f64 + 0.05;
        check!(ratio <= bound, "R {r}: ratio {ratio:.4} above {bound:.4}");
        seen.push(format!("R={r}: {ratio:.4}<={bound:.4}"));
    }
    Ok(format!("1000 round trips exact; {}", seen.join(" ")))
}

fn comparison_rotations(model: &ForestModel, sk: &SecretKey, ev: &Evaluator) -> Result<(usize, usize, u64), String> {
    let sm = ServerModel::new(model.clone(), CLUSTER_BITS).map_err(e)?;
    let names = sm.forest.feature_names();
    let layout = QueryLayout::build(
        sk.params().slot_count(),
        CLUSTER_BITS,
        CwParams::default_for_bits(CLUSTER_BITS),
        sm.plan.max_repetition(),
        &names,
    )
    .map_err(e)?;
    let features: QueryFeatures = names.iter().map(|n| (n.clone(), 100)).collect();
    let query = pack_query(&features, &layout, sk).map_err(e)?;
    let before = ev.ledger().snapshot();
    batch_compare(ev, &query, &layout, &sm.plan).map_err(e)?;
    Ok((
        sm.plan.len(),
        sm.plan.max_repetition(),
        (ev.ledger().snapshot() - before).rotations(),
    ))
}

const CLUSTER_BITS: u32 = 8;

fn clustering() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let data = synthetic_dataset(
        &DatasetShape {
            rows: 1600,
            features: 4,
            classes: 2,
            noise: 0.1,
        },
        &mut rng,
    );
    let (train, validation) = data.split(0.75);
    let model = train_boosted(&train, &BoostParams::default(), &mut rng);
    check!(model.trees.len() == 100, "trained {} trees", model.trees.len());
    let validator = Validator::from_dataset(&validation, &model).map_err(e)?;
    let cfg = ClusterConfig {
        intensity: 0.2,
        tolerance: 0.0,
        bitwidth: CLUSTER_BITS,
    };
    let (clustered, report) = cluster_nodes(&model, &cfg, &validator).map_err(e)?;

    let rows = validation.aligned_rows(&model).map_err(e)?;
    let before = model.accuracy(&rows, &validation.labels);
    let after = clustered.accuracy(&rows, &validation.labels);
    check!(after >= before, "accuracy fell from {before:.4} to {after:.4}");
    check!(
        report.distinct_nodes_before < report.node_count,
        "no duplicate thresholds to merge ({} distinct of {})",
        report.distinct_nodes_before,
        report.node_count
    );
    check!(
        report.plan_size_after < report.plan_size_before,
        "plan size {} -> {}",
        report.plan_size_before,
        report.plan_size_after
    );

    let (sk, ev) = keys(8192, 12);
    let mut doubled = model.clone();
    doubled.trees.extend(model.trees.iter().cloned());
    let (plan0, reps0, rot0) = comparison_rotations(&model, &sk, &ev)?;
    let (plan1, reps1, rot1) = comparison_rotations(&clustered, &sk, &ev)?;
    let (plan2, _, rot2) = comparison_rotations(&doubled, &sk, &ev)?;
    let fold = 2 * u64::from(CLUSTER_BITS + 1);
    check!(
        plan2 == plan0 && rot2 == rot0,
        "doubling the nodes changed rotations {rot0} -> {rot2}"
    );
    check!(
        rot1 < rot0,
        "clustered plan {plan1} spent {rot1} rotations, original {plan0} spent {rot0}"
    );
    for (plan, rot) in [(plan0, rot0), (plan1, rot1)] {
        check!(rot <= plan as u64 + 1 + fold, "{rot} rotations for a plan of {plan}");
    }
    check!(
        (plan0, plan1) == (report.plan_size_before, report.plan_size_after),
        "report plan sizes disagree with the deployed plans"
    );
    Ok(format!(
        "accuracy {before:.4} -> {after:.4}; plan {plan0} -> {plan1} ({} nodes, R {reps0} -> {reps1}); \
         comparison rotations {rot0} -> {rot1}, {rot2} with nodes doubled",
        model.node_count()
    ))
}

fn protocol() -> Outcome {
    let params = FheParams::with_slot_count(4096).map_err(e)?;
    let mut queries = 0;
    for (i, kind, classes) in [(0u64, ModelKind::Xgboost, 3usize), (1, ModelKind::Adaboost, 2)] {
        let mut rng = ChaCha20Rng::seed_from_u64(600 + i);
        let model = random_forest(
            &ForestShape {
                trees: 8,
                max_depth: 4,
                features: 4,
                classes,
                kind,
                ..Default::default()
            },
            &mut rng,
        );
        let rows: Vec<Vec<f64>> = (0..10).map(|_| random_row(&model, &mut rng)).collect();
        let server = Arc::new(Server::new(model.clone(), server_config(8, i)).map_err(e)?);

        let listener = TcpListener::bind("127.0.0.1:0").map_err(e)?;
        let addr = listener.local_addr().map_err(e)?.to_string();
        let tcp_server = server.clone();
        let accept = std::thread::spawn(move || tcp_server.serve_tcp(listener, Some(1)));
        let mut tcp = Connection::new(TcpTransport::connect(&addr).map_err(e)?);
        let mut client = Client::new(&params, 700 + i);
        client.setup(&mut tcp).map_err(e)?;
        let over_tcp: Vec<InferenceResult> = rows
            .iter()
            .map(|r| client.infer_row(&mut tcp, r))
            .collect::<Result<_, _>>()
            .map_err(e)?;
        drop(tcp);
        accept.join().unwrap().map_err(e)?;

        let local = run_queries(server.clone(), &params, 700 + i, &rows);
        for (a, b) in over_tcp.iter().zip(&local) {
            check!(
                a.class == b.class && a.scores == b.scores,
                "transports disagree: {:?} vs {:?}",
                a.scores,
                b.scores
            );
            for res in [a, b] {
                check!(res.exchanges() == 3, "{} exchanges", res.exchanges());
                let kinds: Vec<MessageType> = res.transcript.iter().map(|t| t.kind).collect();
                check!(
                    kinds
                        == [
                            MessageType::Query,
                            MessageType::BccChallenge,
                            MessageType::BccResponse,
                            MessageType::Result
                        ],
                    "transcript {kinds:?}"
                );
            }
            queries += 1;
        }
        let decryptions = server.ledger().snapshot().decryptions;
        check!(decryptions == 0, "server performed {decryptions} decryptions");
    }
    Ok(format!(
        "{queries} queries over TCP and in-process agree; 3 exchanges each; 0 server decryptions"
    ))
}

fn adaboost() -> Outcome {
    let params = FheParams::with_slot_count(4096).map_err(e)?;
    let mut checked = 0;
    for i in 0..5u64 {
        let mut rng = ChaCha20Rng::seed_from_u64(800 + i);
        let model = random_forest(
            &ForestShape {
                trees: 5 + 3 * i as usize,
                max_depth: 4,
                features: 3,
                kind: ModelKind::Adaboost,
                ..Default::default()
            },
            &mut rng,
        );
        check!(
            model.trees.iter().all(|t| t.weight.is_some()),
            "forest {i} lacks tree weights"
        );
        let rows: Vec<Vec<f64>> = (0..20).map(|_| random_row(&model, &mut rng)).collect();
        let server = Arc::new(Server::new(model.clone(), server_config(8, i)).map_err(e)?);
        for (row, res) in rows.iter().zip(run_queries(server, &params, 900 + i, &rows)) {
            let want = oracle_scores(&model, 8, row);
            check!(
                res.scores == want,
                "forest {i}: score {:?}, expected {want:?}",
                res.scores
            );
            check!(res.class == oracle_class(&want), "forest {i}: class {}", res.class);
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} queries on 5 weighted forests match the signed weight sum exactly"
    ))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("comparison_exhaustive", comparison_exhaustive),
        ("depth_invariance", depth_invariance),
        ("end_to_end_oracle", end_to_end),
        ("sumpath_structure", sumpath_structure),
        ("bcc_frequency_invariance", bcc_frequency_invariance),
        ("shuffle_uniformity", shuffle_uniformity),
        ("shuffle_cost", shuffle_cost),
        ("compression", compression),
        ("clustering", clustering),
        ("protocol", protocol),
        ("adaboost", adaboost),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut out = std::io::stdout().lock();
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let took = start.elapsed();
        let (tag, detail) = match &result {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        writeln!(out, "{tag} {name} [{took:.1?}] {detail}").unwrap();
        out.flush().unwrap();
    }
    if failed > 0 {
        writeln!(out, "{failed} criteria failed").unwrap();
        std::process::exit(1);
    }
}
