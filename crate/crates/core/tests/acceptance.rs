//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! `cargo test -p kdpos --test acceptance` runs all of them; pass criterion
//! numbers as arguments (`-- 2 7`) to run a subset.

mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use common::{random_corpus, random_text, Fixture};
use kdpos::algebra::{pairing_count, G1Element, Scalar};
use kdpos::erasure::{decode, encode, packed_len, Rate};
use kdpos::harness::{
    default_max_rounds, extract, extract_file, Adversary, ExtractError, ExtractFileOptions,
};
use kdpos::harness::{Strategy, StrategyConfig};
use kdpos::keyword_index::{verify_row, FileId, IndexRow, Keyword};
use kdpos::roles::{AuditMode, AuditReport, Outcome};
use kdpos::scheme::{
    aggregate, make_token, prove, prove_file, sample_challenge, setup, tag_file, verify,
    verify_read, ChallengeSet, FileChallenge, FileRecord, ProofPair, StorageProof, SECURITY_BITS,
};
use kdpos::transport::Loopback;
use kdpos::wire::{ErrorCode, Message, TokenRequest};
use num_bigint::BigUint;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const GROUP_ORDER_HEX: &str = "73eda753299d7d483339d80809a1d80553bda402fffe5bfeffffffff00000001";

/// Spot-check tolerance on the empirical failure rate.
const DETECTION_TOLERANCE: f64 = 0.05;
/// Batched proof material may be at most twice the ideal 64 bytes.
const MAX_BATCHED_PROOF_BYTES: usize = 128;
/// Fraction of extraction runs that must succeed.
const EXTRACTION_SUCCESS: f64 = 0.95;

type Verdict = Result<String, String>;

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn describe(rep: &AuditReport) -> String {
    format!(
        "{} {:?} batch={} outcome={:?} check={:?} reason={:?}",
        rep.audit, rep.mode, rep.batch, rep.outcome, rep.failed_check, rep.reason
    )
}

fn order() -> BigUint {
    BigUint::parse_bytes(GROUP_ORDER_HEX.as_bytes(), 16).unwrap()
}

fn big(s: &Scalar) -> BigUint {
    BigUint::from_bytes_be(&s.to_bytes())
}

fn acc1_end_to_end() -> Verdict {
    let mut r = rng(101);
    let (mut audits, mut files_total) = (0usize, 0usize);
    for c in 0..50 {
        let count = r.gen_range(1..=20);
        let files = random_corpus(&mut r, count, 64 * 1024, c == 0);
        files_total += files.len();
        let fx = Fixture::new(&mut r, files, Rate::HALF);
        let server = Loopback::new(fx.server());
        let auditor = fx.auditor(128);
        let mut check = |rep: AuditReport| -> Result<(), String> {
            audits += 1;
            ensure(rep.passed(), || format!("corpus {c}: {}", describe(&rep)))
        };
        for mode in [AuditMode::Interactive, AuditMode::Beacon] {
            for batch in [false, true] {
                let rep = auditor
                    .audit_by_fids(&server, &fx.fids, mode, batch, None, &mut r)
                    .map_err(|e| e.to_string())?;
                check(rep)?;
            }
        }
        let index = fx.keyword_index();
        if index.is_empty() {
            continue;
        }
        let widest = index.iter().max_by_key(|(_, s)| s.len()).unwrap().0.clone();
        let any = index
            .keys()
            .nth(r.gen_range(0..index.len()))
            .unwrap()
            .clone();
        for (w, batch) in [
            (&widest, false),
            (&widest, true),
            (&any, false),
            (&any, true),
        ] {
            let rep = auditor
                .audit_by_keyword(&server, &fx.keyword(w), None, batch, &mut r)
                .map_err(|e| e.to_string())?;
            check(rep)?;
        }
    }
    Ok(format!(
        "50 corpora, {files_total} files, {audits} honest audits at l=128 all passed"
    ))
}

fn acc2_detection() -> Verdict {
    let mut r = rng(202);
    // A file of exactly 1000 segments makes every delta a whole count.
    let len = (1..)
        .find(|&len| Rate::HALF.codeword_len(packed_len(len)) == 1000)
        .unwrap();
    let files = vec![("victim.txt".to_string(), random_text(&mut r, len))];
    let fx = Fixture::new(&mut r, files, Rate::HALF);
    let fid = fx.fids[0];
    let mut lines = Vec::new();
    let mut worst: f64 = 0.0;
    for (delta, l) in [(0.01, 16), (0.05, 16), (0.10, 16), (0.01, 128)] {
        let config = StrategyConfig::new(
            Strategy::DeleteFraction {
                delta,
                target: Some(fid),
            },
            r.gen(),
        );
        let adv = Loopback::new(Adversary::new(fx.store.clone(), fx.beacon(), config));
        let auditor = fx.auditor(l);
        let trials = 1000;
        let mut failures = 0;
        for t in 0..trials {
            let mode = if t % 2 == 0 {
                AuditMode::Interactive
            } else {
                AuditMode::Beacon
            };
            let rep = auditor
                .audit_by_fids(&adv, &[fid], mode, false, None, &mut r)
                .map_err(|e| e.to_string())?;
            if !rep.passed() {
                ensure(
                    rep.failed_check.as_deref() == Some("per-file-equation"),
                    || describe(&rep),
                )?;
                failures += 1;
            }
        }
        let rate = failures as f64 / trials as f64;
        let expected = 1.0 - (1.0 - delta).powi(l as i32);
        let gap = (rate - expected).abs();
        worst = worst.max(gap);
        lines.push(format!("d={delta} l={l}: {rate:.3} vs {expected:.3}"));
    }
    let summary = format!(
        "{} (max gap {worst:.3}, tolerance {DETECTION_TOLERANCE})",
        lines.join("; ")
    );
    if worst <= DETECTION_TOLERANCE {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn acc3_keyword_exactness() -> Verdict {
    let mut r = rng(303);
    let mut audited = 0;
    let mut rows: Vec<(Keyword, IndexRow)> = Vec::new();
    let mut fx_keys = Vec::new();
    for c in 0..100 {
        let count = r.gen_range(1..=20);
        let files = random_corpus(&mut r, count, 4096, false);
        let fx = Fixture::new(&mut r, files, Rate::HALF);
        let index = fx.keyword_index();
        ensure(fx.store.table.len() == index.len(), || {
            format!(
                "corpus {c}: table has {} rows, oracle {}",
                fx.store.table.len(),
                index.len()
            )
        })?;
        for (w, want) in &index {
            let kw = fx.keyword(w);
            let row = fx
                .store
                .table
                .lookup(&kw)
                .map_err(|e| format!("corpus {c}: {e}"))?;
            let got: BTreeSet<FileId> = row.fids.iter().copied().collect();
            ensure(&got == want && got.len() == row.fids.len(), || {
                format!("corpus {c}: row '{w}' differs")
            })?;
            if rows.len() < 2000 && r.gen_ratio(1, 4) {
                rows.push((kw, row.clone()));
                fx_keys.push(fx.client.keys.pk.psk);
            }
        }
        let server = Loopback::new(fx.server());
        let auditor = fx.auditor(2);
        let mut words: Vec<&String> = index.keys().collect();
        words.shuffle(&mut r);
        for w in words.into_iter().take(5) {
            let rep = auditor
                .audit_by_keyword(&server, &fx.keyword(w), None, r.gen(), &mut r)
                .map_err(|e| e.to_string())?;
            ensure(rep.passed(), || format!("corpus {c}: {}", describe(&rep)))?;
            let got: BTreeSet<String> = rep.challenged_fids.iter().cloned().collect();
            let want: BTreeSet<String> = index[w].iter().map(|f| f.to_string()).collect();
            ensure(got == want, || {
                format!("corpus {c}: audited set for '{w}' differs")
            })?;
            audited += 1;
        }
    }
    ensure(!rows.is_empty(), || "no rows collected".into())?;
    let mut mutations = [0usize; 3];
    for trial in 0..10_000 {
        let i = r.gen_range(0..rows.len());
        let (kw, row) = &rows[i];
        let psk = &fx_keys[i];
        ensure(verify_row(psk, kw, row), || {
            format!("original row '{}' rejected", kw.as_str())
        })?;
        let mut m = row.clone();
        let mut kind = trial % 3;
        if kind == 2 && m.fids.len() < 2 {
            kind = 0;
        }
        match kind {
            0 => {
                let pos = r.gen_range(0..=m.fids.len());
                m.fids.insert(pos, FileId::random(&mut r));
            }
            1 => {
                m.fids.remove(r.gen_range(0..m.fids.len()));
            }
            _ => {
                let a = r.gen_range(0..m.fids.len());
                let mut b = r.gen_range(0..m.fids.len() - 1);
                if b >= a {
                    b += 1;
                }
                m.fids.swap(a, b);
            }
        }
        mutations[kind] += 1;
        ensure(!verify_row(psk, kw, &m), || {
            format!("mutated row '{}' accepted", kw.as_str())
        })?;
    }
    Ok(format!(
        "100 corpora, every row equals the oracle, {audited} keyword audits exact; \
         10000 row mutations (add {}, remove {}, reorder {}) all rejected",
        mutations[0], mutations[1], mutations[2]
    ))
}

fn acc4_batch_size() -> Verdict {
    let mut r = rng(404);
    let files: Vec<_> = (0..50)
        .map(|i| (format!("f{i}"), random_text(&mut r, 200)))
        .collect();
    let fx = Fixture::new(&mut r, files, Rate::HALF);
    let server = Loopback::new(fx.server());
    let auditor = fx.auditor(16);
    let mut sizes = Vec::new();
    for count in [1usize, 5, 50] {
        let rep = auditor
            .audit_by_fids(
                &server,
                &fx.fids[..count],
                AuditMode::Interactive,
                true,
                None,
                &mut r,
            )
            .map_err(|e| e.to_string())?;
        ensure(rep.passed(), || describe(&rep))?;
        ensure(rep.pairings == 2, || {
            format!("{count} files: {} pairings", rep.pairings)
        })?;
        sizes.push((rep.proof_bytes, rep.response_bytes));
    }
    // Direct count around the batched check.
    let q = sample_challenge(&fx.client.metadata().select(&fx.fids).unwrap(), 4, &mut r).unwrap();
    let pair = aggregate(&prove(&q, &fx.store.records).unwrap()).unwrap();
    let before = pairing_count();
    let ok = kdpos::scheme::verify_batched(&q, &pair, &fx.client.keys.pk).unwrap();
    let used = pairing_count() - before;
    ensure(ok && used == 2, || {
        format!("verify_batched used {used} pairings")
    })?;
    ensure(sizes.iter().all(|s| *s == sizes[0]), || {
        format!("sizes vary: {sizes:?}")
    })?;
    ensure(sizes[0].0 <= MAX_BATCHED_PROOF_BYTES, || {
        format!("{} bytes", sizes[0].0)
    })?;
    Ok(format!(
        "proof {} bytes (limit {MAX_BATCHED_PROOF_BYTES}), response {} bytes at 1/5/50 files, 2 pairings",
        sizes[0].0, sizes[0].1
    ))
}

fn acc5_batch_algebra() -> Verdict {
    let mut r = rng(505);
    let keys = setup(SECURITY_BITS, &mut r).unwrap();
    let p = order();
    for trial in 0..100 {
        let records: Vec<FileRecord> = (0..r.gen_range(1..=6))
            .map(|_| {
                let segs = (0..r.gen_range(1..=8))
                    .map(|_| Scalar::random(&mut r))
                    .collect();
                tag_file(FileId::random(&mut r), segs, &keys).unwrap()
            })
            .collect();
        let meta: Vec<(FileId, u64)> = records.iter().map(|x| (x.fid, x.segment_count())).collect();
        let q = sample_challenge(&meta, r.gen_range(1..=5), &mut r).unwrap();
        let proof = prove(&q, records.as_slice()).unwrap();
        let StorageProof::PerFile(pairs) = &proof else {
            unreachable!()
        };
        let agg = aggregate(&proof).unwrap();

        // Recompute each component from the records with plain group
        // additions and bignum arithmetic.
        let mut sigma = G1Element::identity();
        let mut mu = BigUint::default();
        for (fc, rec) in q.files.iter().zip(&records) {
            let mut s_i = G1Element::identity();
            let mut m_i = BigUint::default();
            for (j, nu) in &fc.pairs {
                let (m, t) = rec.get(*j).unwrap();
                s_i += t * *nu;
                m_i = (m_i + big(nu) * big(&m)) % &p;
            }
            let (_, pair) = pairs.iter().find(|(f, _)| *f == fc.fid).unwrap();
            ensure(pair.sigma == s_i && big(&pair.mu) == m_i, || {
                format!("trial {trial}: per-file pair")
            })?;
            sigma += s_i;
            mu = (mu + m_i) % &p;
        }
        ensure(agg.sigma == sigma, || format!("trial {trial}: sigma"))?;
        ensure(big(&agg.mu) == mu, || format!("trial {trial}: mu"))?;
        ensure(
            verify(&q, &StorageProof::Batched(agg), &keys.pk).unwrap(),
            || format!("trial {trial}: aggregate rejected"),
        )?;
    }
    Ok("100 aggregates match componentwise recomputation and verify".into())
}

fn acc6_scheduling() -> Verdict {
    let mut r = rng(606);
    let files = vec![
        ("a".to_string(), b"ledger alpha beta".to_vec()),
        ("b".to_string(), b"ledger gamma".to_vec()),
        ("c".to_string(), random_text(&mut r, 3000)),
    ];
    let fx = Fixture::new(&mut r, files, Rate::HALF);
    let beacon = fx.beacon();
    let epoch = fx.chain.epoch_secs();
    let server = Loopback::new(fx.server());
    let auditor = fx.auditor(32);
    let fp = fx.client.keys.pk.fingerprint();
    let mut audited = 0;
    for i in 0..100 {
        let t = beacon
            .current_time()
            .unwrap()
            .plus(r.gen_range(1..=3 * epoch));
        let kw = fx.keyword(if i % 2 == 0 { "ledger" } else { "alpha" });
        let token = make_token(kw.clone(), t, &mut r);
        let req = Message::KeywordToken(TokenRequest {
            pk_fingerprint: fp,
            batch: r.gen(),
            l: 32,
            token: token.clone(),
        });
        ensure(beacon.get_randomness(t).unwrap().is_none(), || {
            format!("token {i}: output before t")
        })?;
        match fx.store.resolve(&req, &*beacon) {
            Err(e) if e.code == ErrorCode::RandomnessPending => {}
            other => return Err(format!("token {i}: server resolved early: {other:?}")),
        }
        let rep = auditor
            .audit_by_keyword(&server, &kw, Some(t), false, &mut r)
            .map_err(|e| e.to_string())?;
        ensure(rep.outcome == Outcome::Deferred, || {
            format!("token {i}: {}", describe(&rep))
        })?;

        fx.chain.set_time(t.plus(epoch + 1));
        let out = beacon
            .get_randomness(t)
            .unwrap()
            .ok_or_else(|| format!("token {i}: still pending"))?;
        let prover = fx
            .store
            .resolve(&req, &*beacon)
            .map_err(|e| format!("token {i}: {e}"))?;
        let files = fx
            .client
            .metadata()
            .select(&prover.row.as_ref().unwrap().fids)
            .unwrap();
        let verifier = token.challenge(&out.str_t, &files, 32).unwrap();
        ensure(prover.challenge == verifier, || {
            format!("token {i}: derivations differ")
        })?;
        ensure(prover.challenge.digest() == verifier.digest(), || {
            format!("token {i}: digests differ")
        })?;
        if i % 10 == 0 {
            let rep = auditor
                .audit_by_keyword(&server, &kw, Some(t), i % 20 == 0, &mut r)
                .map_err(|e| e.to_string())?;
            ensure(rep.passed(), || format!("token {i}: {}", describe(&rep)))?;
            audited += 1;
        }
    }
    Ok(format!(
        "100 future tokens deferred, then identical derivations after the clock moved; {audited} audits passed"
    ))
}

fn acc7_extraction() -> Verdict {
    let mut r = rng(707);
    let files = vec![("big".to_string(), random_text(&mut r, 2000))];
    let fx = Fixture::new(&mut r, files.clone(), Rate::HALF);
    let fid = fx.fids[0];
    let n = fx.client.metadata().segments(&fid).unwrap();
    let truth = fx.store.records[&fid].segments.clone();
    let pk = &fx.client.keys.pk;
    let k = 32;
    let runs = 200;
    let mut parts = Vec::new();
    for strategy in [Strategy::Honest, Strategy::AnswerWithProbability { q: 0.5 }] {
        let adv = Loopback::new(Adversary::new(
            fx.store.clone(),
            fx.beacon(),
            StrategyConfig::new(strategy.clone(), r.gen()),
        ));
        let (mut ok, mut rounds) = (0usize, 0usize);
        for _ in 0..runs {
            let mut j: Vec<u64> = rand::seq::index::sample(&mut r, n as usize, k)
                .into_iter()
                .map(|x| x as u64 + 1)
                .collect();
            j.sort_unstable();
            if let Ok(ex) = extract(&adv, pk, fid, n, &j, default_max_rounds(k), &mut r) {
                rounds += ex.rounds;
                if ex
                    .segments
                    .iter()
                    .zip(&j)
                    .all(|(s, x)| *s == truth[*x as usize - 1])
                {
                    ok += 1;
                }
            }
        }
        let frac = ok as f64 / runs as f64;
        parts.push(format!(
            "{}: {ok}/{runs} (mean {:.1} rounds)",
            strategy.name(),
            rounds as f64 / ok.max(1) as f64
        ));
        ensure(frac >= EXTRACTION_SUCCESS, || parts.join("; "))?;
    }

    // Whole-file recovery at and around the erasure bound.
    let need = Rate::HALF.message_len(n as usize).unwrap() as u64;
    for survive in [n, need + 3, need, need - 1] {
        let delta = (n - survive) as f64 / n as f64;
        let adv = Adversary::new(
            fx.store.clone(),
            fx.beacon(),
            StrategyConfig::new(
                Strategy::DeleteFraction {
                    delta,
                    target: Some(fid),
                },
                r.gen(),
            ),
        );
        let alive: Vec<u64> = (1..=n)
            .filter(|j| !adv.corrupted_indices(&fid).contains(j))
            .collect();
        ensure(alive.len() as u64 == survive, || {
            format!("{} survivors, wanted {survive}", alive.len())
        })?;
        let adv = Loopback::new(adv);
        let opts = ExtractFileOptions {
            survivors: Some(alive),
            ..Default::default()
        };
        let res = extract_file(&adv, pk, fid, n, Rate::HALF, &opts, &mut r);
        if survive >= need {
            let got = res.map_err(|e| format!("{survive}/{n} survivors: {e}"))?;
            ensure(got.bytes == files[0].1, || {
                format!("{survive}/{n} survivors: wrong bytes")
            })?;
        } else {
            ensure(matches!(res, Err(ExtractError::Unrecoverable(_))), || {
                format!("{survive}/{n} survivors: expected failure")
            })?;
        }
    }
    // No hint about which segments survive.
    let adv = Loopback::new(Adversary::new(
        fx.store.clone(),
        fx.beacon(),
        StrategyConfig::new(
            Strategy::DeleteFraction {
                delta: 0.05,
                target: None,
            },
            r.gen(),
        ),
    ));
    let got = extract_file(
        &adv,
        pk,
        fid,
        n,
        Rate::HALF,
        &ExtractFileOptions::default(),
        &mut r,
    )
    .map_err(|e| format!("unhinted: {e}"))?;
    ensure(got.bytes == files[0].1, || "unhinted: wrong bytes".into())?;
    parts.push(format!(
        "file of {n} segments recovered with {need}+ survivors, refused with {}",
        need - 1
    ));
    Ok(parts.join("; "))
}

fn acc8_forgeries() -> Verdict {
    let mut r = rng(808);
    let keys = setup(SECURITY_BITS, &mut r).unwrap();
    let pk = &keys.pk;
    let records: Vec<FileRecord> = (0..4)
        .map(|_| {
            let segs = (0..16).map(|_| Scalar::random(&mut r)).collect();
            tag_file(FileId::random(&mut r), segs, &keys).unwrap()
        })
        .collect();
    let nonzero = |r: &mut ChaCha20Rng| loop {
        let s = Scalar::random(r);
        if !s.is_zero() {
            break s;
        }
    };
    let other_index = |r: &mut ChaCha20Rng, j: u64| {
        let x = r.gen_range(1..16);
        if x >= j {
            x + 1
        } else {
            x
        }
    };
    let mut counts = [0usize; 4];
    let total = 100_000;
    for trial in 0..total {
        let kind = trial % 4;
        let a = r.gen_range(0..records.len());
        let rec = &records[a];
        let q = ChallengeSet {
            files: vec![FileChallenge {
                fid: rec.fid,
                pairs: (0..r.gen_range(1..=2))
                    .map(|_| (r.gen_range(1..=16), Scalar::random(&mut r)))
                    .collect(),
            }],
        };
        let honest = prove_file(&q.files[0], rec).unwrap();
        let batched = (trial / 4) % 2 == 1;
        let wrap = |pair: ProofPair| {
            if batched {
                StorageProof::Batched(pair)
            } else {
                StorageProof::PerFile(vec![(rec.fid, pair)])
            }
        };
        let accepted = match kind {
            0 => verify(
                &q,
                &wrap(ProofPair {
                    sigma: G1Element::random(&mut r),
                    ..honest
                }),
                pk,
            )
            .unwrap(),
            1 => verify(
                &q,
                &wrap(ProofPair {
                    mu: honest.mu + nonzero(&mut r),
                    ..honest
                }),
                pk,
            )
            .unwrap(),
            2 => {
                let b = &records[(a + r.gen_range(1..records.len())) % records.len()];
                if batched {
                    let j = r.gen_range(1..=16);
                    let (m, t) = b.get(j).unwrap();
                    verify_read(&rec.fid, j, &m, &t, pk)
                } else {
                    let swapped = FileChallenge {
                        fid: b.fid,
                        pairs: q.files[0].pairs.clone(),
                    };
                    verify(&q, &wrap(prove_file(&swapped, b).unwrap()), pk).unwrap()
                }
            }
            _ => {
                let j = r.gen_range(1..=16);
                let j2 = other_index(&mut r, j);
                if batched {
                    let (m, _) = rec.get(j).unwrap();
                    let (m2, t2) = rec.get(j2).unwrap();
                    if r.gen() {
                        verify_read(&rec.fid, j, &m, &t2, pk)
                    } else {
                        verify_read(&rec.fid, j, &m2, &t2, pk)
                    }
                } else {
                    let shifted = FileChallenge {
                        fid: rec.fid,
                        pairs: q.files[0]
                            .pairs
                            .iter()
                            .map(|(j, nu)| (other_index(&mut r, *j), *nu))
                            .collect(),
                    };
                    verify(&q, &wrap(prove_file(&shifted, rec).unwrap()), pk).unwrap()
                }
            }
        };
        counts[kind] += 1;
        ensure(!accepted, || {
            format!("trial {trial} (category {kind}) accepted")
        })?;
    }
    Ok(format!(
        "{total} forgeries rejected: random sigma {}, perturbed mu {}, cross-file {}, wrong index {}",
        counts[0], counts[1], counts[2], counts[3]
    ))
}

fn acc9_mds() -> Verdict {
    let mut r = rng(909);
    let msg: Vec<Scalar> = (0..4).map(|_| Scalar::random(&mut r)).collect();
    let code = encode(&msg, Rate::HALF).unwrap();
    ensure(code.len() == 8, || {
        format!("codeword length {}", code.len())
    })?;
    let (mut ok, mut refused) = (0, 0);
    for mask in 0u32..256 {
        let frags: Vec<(usize, Scalar)> = (0..8)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| (i, code[i]))
            .collect();
        match frags.len() {
            4 => {
                ensure(decode(&frags, 4).as_deref() == Ok(&msg[..]), || {
                    format!("subset {mask:08b}")
                })?;
                ok += 1;
            }
            3 => {
                ensure(decode(&frags, 4).is_err(), || {
                    format!("subset {mask:08b} decoded from 3")
                })?;
                refused += 1;
            }
            _ => {}
        }
    }
    ensure(ok == 70, || format!("{ok} subsets"))?;
    Ok(format!(
        "all {ok} 4-of-8 subsets decode; all {refused} 3-subsets refused"
    ))
}

type Criterion = (u32, &'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "end-to-end correctness", acc1_end_to_end),
        (2, "spot-check detection", acc2_detection),
        (3, "keyword exactness", acc3_keyword_exactness),
        (4, "batched proof size and cost", acc4_batch_size),
        (5, "batch algebra", acc5_batch_algebra),
        (6, "non-interactive scheduling", acc6_scheduling),
        (7, "extraction and retrievability", acc7_extraction),
        (8, "forgery battery", acc8_forgeries),
        (9, "erasure code MDS", acc9_mds),
    ];
    let wanted: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let verdict = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS {id} {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id} {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
