//! HMAC-SHA256 checked against a construction built directly on SHA-256.

use sha2::{Digest, Sha256};
use tagger_core::rng::SeededRng;
use tagger_webhook::{sign, verify_signature};

/// RFC 2104 HMAC over SHA-256 (block size 64).
fn reference_hmac(key: &[u8], message: &[u8]) -> [u8; 32] {
    let mut block = [0u8; 64];
    if key.len() > 64 {
        block[..32].copy_from_slice(&Sha256::digest(key));
    } else {
        block[..key.len()].copy_from_slice(key);
    }
    let ipad: Vec<u8> = block.iter().map(|b| b ^ 0x36).collect();
    let opad: Vec<u8> = block.iter().map(|b| b ^ 0x5c).collect();
    let inner = Sha256::new().chain_update(&ipad).chain_update(message).finalize();
    Sha256::new().chain_update(&opad).chain_update(inner).finalize().into()
}

fn reference_header(key: &[u8], message: &[u8]) -> String {
    let hex: String = reference_hmac(key, message).iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256={hex}")
}

#[test]
fn rfc4231_case_two() {
    let expected = "5bdcc146bf60754e6a042426089575c75a003f089d2739839dec58b964ec3843";
    assert_eq!(reference_header(b"Jefe", b"what do ya want for nothing?"), format!("sha256={expected}"));
    assert!(verify_signature(b"what do ya want for nothing?", &format!("sha256={expected}"), b"Jefe"));
}

#[test]
fn agrees_with_reference_on_random_inputs() {
    let mut rng = SeededRng::new(2024);
    for _ in 0..200 {
        let key: Vec<u8> = (0..rng.below(150)).map(|_| rng.below(256) as u8).collect();
        let body: Vec<u8> = (0..rng.below(2000)).map(|_| rng.below(256) as u8).collect();
        let header = reference_header(&key, &body);
        assert_eq!(sign(&body, &key), header);
        assert!(verify_signature(&body, &header, &key));
        let mut tampered = body.clone();
        tampered.push(0);
        assert!(!verify_signature(&tampered, &header, &key));
    }
}

#[test]
fn scheme_and_empty_header() {
    let header = reference_header(b"k", b"body");
    assert!(!verify_signature(b"body", &header.replacen("sha256=", "sha1=", 1), b"k"));
    assert!(!verify_signature(b"body", "", b"k"));
    assert!(!verify_signature(b"body", "sha256=", b"k"));
}
