mod common;

use std::collections::BTreeSet;

use kdpos::algebra::{G1Element, Scalar, WideHash};
use kdpos::encoding::{FieldReader, FieldWriter};
use kdpos::erasure::{decode, encode, pack_bytes, unpack_bytes, Rate};
use kdpos::harness::ExtractionMatrix;
use kdpos::keyword_index::{extract_keywords, FileId};
use kdpos::scheme::{
    aggregate, derive_challenge, prove, sample_challenge, setup, tag_file, verify, ChallengeSet,
    FileChallenge, Metadata, StorageProof, SECURITY_BITS,
};
use kdpos::wire::{
    decode_message, encode_message, ChallengeForm, ErrorCode, FidChallenge, Message,
};
use num_bigint::BigUint;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const GROUP_ORDER_HEX: &str = "73eda753299d7d483339d80809a1d80553bda402fffe5bfeffffffff00000001";

fn order() -> BigUint {
    BigUint::parse_bytes(GROUP_ORDER_HEX.as_bytes(), 16).unwrap()
}

fn to_big(s: &Scalar) -> BigUint {
    BigUint::from_bytes_be(&s.to_bytes())
}

fn scalar() -> impl Strategy<Value = Scalar> {
    any::<[u8; 32]>().prop_map(|b| Scalar::from_be_bytes_mod_order(&b))
}

fn fid() -> impl Strategy<Value = FileId> {
    scalar().prop_map(FileId)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mod_order_reduction_matches_bignum(bytes in proptest::collection::vec(any::<u8>(), 0..80)) {
        let want = BigUint::from_bytes_be(&bytes) % order();
        prop_assert_eq!(to_big(&Scalar::from_be_bytes_mod_order(&bytes)), want);
    }

    #[test]
    fn wide_hash_reductions_match_bignum(msg in proptest::collection::vec(any::<u8>(), 0..40), n in 1u64..=u64::MAX) {
        let h = WideHash::of(&msg);
        let big = BigUint::from_bytes_be(h.as_bytes());
        prop_assert!(h.as_bytes()[0] < 0x80);
        prop_assert_eq!(BigUint::from(h.reduce(n)), &big % n);
        prop_assert_eq!(to_big(&h.to_scalar()), big % order());
    }

    #[test]
    fn erasure_is_systematic_and_any_k_positions_decode(
        msg in proptest::collection::vec(scalar(), 1..24),
        num in 1u32..4,
        extra in 0u32..4,
        seed in any::<u64>(),
    ) {
        let rate = Rate::new(num, num + extra).unwrap();
        let code = encode(&msg, rate).unwrap();
        prop_assert_eq!(code.len(), rate.codeword_len(msg.len()));
        prop_assert_eq!(&code[..msg.len()], &msg[..]);
        prop_assert_eq!(rate.message_len(code.len()), Some(msg.len()));
        let mut positions: Vec<usize> = (0..code.len()).collect();
        positions.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
        let frags: Vec<(usize, Scalar)> = positions[..msg.len()].iter().map(|&i| (i, code[i])).collect();
        prop_assert_eq!(decode(&frags, msg.len()).unwrap(), msg.clone());
        if msg.len() > 1 {
            prop_assert!(decode(&frags[1..], msg.len()).is_err());
        }
    }

    #[test]
    fn erasure_is_linear(
        pair in (1usize..16).prop_flat_map(|n| (
            proptest::collection::vec(scalar(), n),
            proptest::collection::vec(scalar(), n),
        )),
        c in scalar(),
    ) {
        let (a, b) = pair;
        let mixed: Vec<Scalar> = a.iter().zip(&b).map(|(x, y)| *x + c * *y).collect();
        let ea = encode(&a, Rate::HALF).unwrap();
        let eb = encode(&b, Rate::HALF).unwrap();
        let want: Vec<Scalar> = ea.iter().zip(&eb).map(|(x, y)| *x + c * *y).collect();
        prop_assert_eq!(encode(&mixed, Rate::HALF).unwrap(), want);
    }

    #[test]
    fn packing_roundtrips(data in proptest::collection::vec(any::<u8>(), 0..400)) {
        prop_assert_eq!(unpack_bytes(&pack_bytes(&data)).unwrap(), data);
    }

    #[test]
    fn keywords_match_char_walk(text in "[a-zA-Z0-9 ,.é\u{00dc}ß\n-]{0,80}") {
        let got: BTreeSet<String> =
            extract_keywords(text.as_bytes()).keywords.iter().map(|k| k.as_str().to_string()).collect();
        prop_assert_eq!(got, common::brute_force_keywords(text.as_bytes()));
    }

    #[test]
    fn derived_challenges_are_deterministic_and_in_range(
        str_t in any::<[u8; 32]>(),
        s0 in any::<[u8; 16]>(),
        s1 in any::<[u8; 16]>(),
        files in proptest::collection::vec((fid(), 1u64..1000), 1..4),
        l in 1usize..20,
    ) {
        let q = derive_challenge(&str_t, &files, &s0, &s1, l).unwrap();
        prop_assert_eq!(&q, &derive_challenge(&str_t, &files, &s0, &s1, l).unwrap());
        for (fc, (f, n)) in q.files.iter().zip(&files) {
            prop_assert_eq!(fc.fid, *f);
            prop_assert_eq!(fc.pairs.len(), l);
            prop_assert!(fc.pairs.iter().all(|(j, _)| (1..=*n).contains(j)));
        }
        let mut other = s1;
        other[0] ^= 1;
        let q2 = derive_challenge(&str_t, &files, &s0, &other, l).unwrap();
        prop_assert_ne!(q.digest(), q2.digest());
    }

    #[test]
    fn metadata_roundtrips(entries in proptest::collection::vec((fid(), 1u64..u64::MAX), 0..10)) {
        let mut m = Metadata::new();
        for (f, n) in &entries {
            m.insert(*f, *n);
        }
        let mut w = FieldWriter::new("meta");
        m.encode_into(&mut w);
        let bytes = w.finish();
        let mut r = FieldReader::with_label(&bytes, "meta").unwrap();
        prop_assert_eq!(Metadata::decode_from(&mut r).unwrap(), m);
        r.finish().unwrap();
    }

    #[test]
    fn messages_roundtrip_and_reject_truncation(
        code in 1u16..=10,
        detail in ".{0,40}",
        files in proptest::collection::vec((fid(), proptest::collection::vec((1u64..99, scalar()), 1..5)), 1..4),
        fp in any::<[u8; 32]>(),
        batch in any::<bool>(),
        cut_frac in 0.0f64..1.0,
    ) {
        let q = ChallengeSet {
            files: files.into_iter().map(|(fid, pairs)| FileChallenge { fid, pairs }).collect(),
        };
        let msgs = [
            Message::error(ErrorCode::from_u16(code).unwrap(), detail.clone()),
            Message::Ack(detail),
            Message::FidChallenge(FidChallenge { pk_fingerprint: fp, batch, form: ChallengeForm::Explicit(q) }),
        ];
        for msg in msgs {
            let bytes = encode_message(&msg);
            prop_assert_eq!(decode_message(&bytes).unwrap(), msg);
            let cut = ((bytes.len() as f64) * cut_frac) as usize;
            prop_assert!(decode_message(&bytes[..cut]).is_err());
        }
    }

    #[test]
    fn extraction_matrix_rank_discipline(
        k in 1usize..8,
        rows in 1usize..14,
        seed in any::<u64>(),
    ) {
        let mut r = ChaCha20Rng::seed_from_u64(seed);
        let secret: Vec<Scalar> = (0..k).map(|_| Scalar::random(&mut r)).collect();
        let dot = |c: &[Scalar]| c.iter().zip(&secret).map(|(a, b)| *a * *b).sum::<Scalar>();
        let mut m = ExtractionMatrix::new(k);
        let mut accepted: Vec<Vec<Scalar>> = Vec::new();
        for i in 0..rows {
            // Every third row is a combination of rows already taken.
            let coeffs: Vec<Scalar> = if i % 3 == 2 && !accepted.is_empty() {
                let a = Scalar::random(&mut r);
                let b = Scalar::random(&mut r);
                let x = &accepted[0];
                let y = accepted.last().unwrap();
                x.iter().zip(y).map(|(p, q)| a * *p + b * *q).collect()
            } else {
                (0..k).map(|_| Scalar::random(&mut r)).collect()
            };
            let before = m.rank();
            let added = m.add_row(&coeffs, dot(&coeffs));
            prop_assert_eq!(m.rank(), before + added as usize);
            if i % 3 == 2 && !accepted.is_empty() {
                prop_assert!(!added);
            }
            if added {
                accepted.push(coeffs);
            }
            prop_assert!(m.rank() <= k.min(i + 1));
        }
        prop_assert_eq!(m.is_complete(), m.rank() == k);
        match m.solve() {
            Some(x) => prop_assert_eq!(x, secret),
            None => prop_assert!(!m.is_complete()),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn batching_agrees_with_per_file_and_sums_components(
        seed in any::<u64>(),
        counts in proptest::collection::vec(1usize..5, 1..4),
        l in 1usize..4,
        tamper in any::<bool>(),
    ) {
        let mut r = ChaCha20Rng::seed_from_u64(seed);
        let keys = setup(SECURITY_BITS, &mut r).unwrap();
        let mut records: Vec<_> = counts
            .iter()
            .map(|&n| {
                let segs = (0..n).map(|_| Scalar::random(&mut r)).collect();
                tag_file(FileId::random(&mut r), segs, &keys).unwrap()
            })
            .collect();
        let meta: Vec<(FileId, u64)> = records.iter().map(|x| (x.fid, x.segment_count())).collect();
        let q = sample_challenge(&meta, l, &mut r).unwrap();
        if tamper {
            let (f, pairs) = (&mut records[0], &q.files[0].pairs);
            let j = pairs[0].0 as usize - 1;
            f.segments[j] += Scalar::ONE;
        }
        let per_file = prove(&q, records.as_slice()).unwrap();
        let StorageProof::PerFile(pairs) = &per_file else { unreachable!() };
        let agg = aggregate(&per_file).unwrap();
        prop_assert_eq!(agg.mu, pairs.iter().map(|(_, p)| p.mu).sum::<Scalar>());
        prop_assert_eq!(agg.sigma, pairs.iter().fold(G1Element::identity(), |acc, (_, p)| acc + p.sigma));
        let separate = verify(&q, &per_file, &keys.pk).unwrap();
        let batched = verify(&q, &StorageProof::Batched(agg), &keys.pk).unwrap();
        prop_assert_eq!(separate, !tamper);
        prop_assert_eq!(batched, !tamper);
    }
}
