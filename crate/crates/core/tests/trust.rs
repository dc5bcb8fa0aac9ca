use hmac::{Hmac, KeyInit, Mac};
use proptest::prelude::*;
use sha2::Sha256;

use warden::trust::{
    hmac_sha256, tag_message, update_trust, verify_launch, verify_message, GoldenManifest, MacKey,
    Pcr, ReportKind, SecurityReport, SeverityTable, TrustClass, TrustLedger,
};
use warden::Digest;

fn oracle(key: &[u8], msg: &[u8]) -> [u8; 32] {
    let mut mac = <Hmac<Sha256> as KeyInit>::new_from_slice(key).unwrap();
    mac.update(msg);
    mac.finalize().into_bytes().into()
}

#[test]
fn rfc4231_case_2() {
    let tag = hmac_sha256(b"Jefe", b"what do ya want for nothing?");
    assert_eq!(
        tag.to_hex(),
        "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843"
    );
}

#[test]
fn rfc4231_case_6_long_key() {
    let tag = hmac_sha256(
        &[0xaa; 131],
        b"Test Using Larger Than Block-Size Key - Hash Key First",
    );
    assert_eq!(
        tag.to_hex(),
        "60e431591ee0b67f0d8a26aacbf5b77f8e0bc6213728c5140546040f0ee37f54"
    );
}

proptest! {
    #[test]
    fn matches_reference_hmac(key in prop::collection::vec(any::<u8>(), 0..200), msg in prop::collection::vec(any::<u8>(), 0..300)) {
        prop_assert_eq!(hmac_sha256(&key, &msg).0, oracle(&key, &msg));
    }

    #[test]
    fn wrong_key_rejected(a in any::<[u8; 32]>(), b in any::<[u8; 32]>(), msg in prop::collection::vec(any::<u8>(), 0..64)) {
        prop_assume!(a != b);
        let tag = tag_message(&MacKey::new(a), &msg);
        prop_assert!(!verify_message(&MacKey::new(b), &msg, &tag));
    }

    #[test]
    fn score_is_floored_sum(kinds in prop::collection::vec(prop::sample::select(&ReportKind::ALL[..]), 0..12)) {
        let table = SeverityTable::default();
        let ledger = kinds.iter().fold(TrustLedger::new(), |l, k| {
            update_trust(l, &SecurityReport::new(*k, 0, "p", "", &table))
        });
        let total: i64 = kinds.iter().map(|k| k.default_severity() as i64).sum();
        prop_assert_eq!(ledger.score("p") as i64, (100 - total).max(0));
        prop_assert_eq!(ledger.score("q"), 100);
    }

    #[test]
    fn pcr_extend_is_sequential_hash(items in prop::collection::vec(prop::collection::vec(any::<u8>(), 0..40), 0..6)) {
        let mut expected = [0u8; 32];
        let mut pcr = Pcr::genesis();
        for item in &items {
            let m = Digest::of(item);
            pcr = pcr.extend(&m);
            expected = Digest::of_parts([expected.as_slice(), m.as_bytes()]).0;
        }
        prop_assert_eq!(pcr.value().0, expected);
    }

    #[test]
    fn any_byte_flip_fails_attestation(bytes in prop::collection::vec(any::<u8>(), 1..64), at in any::<prop::sample::Index>(), bit in 0u8..8) {
        let arts = vec![("a".to_string(), b"config".to_vec()), ("b".to_string(), bytes)];
        let m = GoldenManifest::from_artifacts(arts.iter().map(|(n, b)| (n.as_str(), b.as_slice())));
        prop_assert!(verify_launch(Some(&m), &arts).unwrap().is_ok());
        let mut bad = arts.clone();
        let i = at.index(bad[1].1.len());
        bad[1].1[i] ^= 1 << bit;
        prop_assert_eq!(verify_launch(Some(&m), &bad).unwrap().mismatched_artifacts(), vec![1]);
    }
}

#[test]
fn trust_classes_from_examples() {
    let table = SeverityTable::default();
    let one = |k| {
        update_trust(
            TrustLedger::new(),
            &SecurityReport::new(k, 0, "p", "", &table),
        )
    };
    assert_eq!(
        one(ReportKind::MemoryStructureViolation).class("p"),
        TrustClass::Suspect
    );
    assert_eq!(
        one(ReportKind::AttestationMismatch).class("p"),
        TrustClass::Untrusted
    );
    assert_eq!(
        one(ReportKind::SuspectedLoop).class("p"),
        TrustClass::Trusted
    );
}
