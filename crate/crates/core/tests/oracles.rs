//! Cross-checks against independent implementations (RustCrypto `aes-gcm`,
//! `poly1305`, `ghash`) and property tests for primitive invariants.

use aes_gcm::aead::{AeadInPlace, KeyInit};
use aes_gcm::{Aes128Gcm, Aes256Gcm};
use graphene::primitives::{
    gcm_keystream, gcm_mac_keys, ghash_tag, keystream, poly_tag, prf_block, Block128, PolyKey,
};
use proptest::prelude::*;

fn reference_poly(key32: &[u8; 32], msg: &[u8]) -> [u8; 16] {
    use poly1305::universal_hash::KeyInit as _;
    let p = poly1305::Poly1305::new(key32.into());
    p.compute_unpadded(msg).into()
}

fn reference_gcm_tag(key: &[u8], nonce: &[u8; 12], ct_source_pt: &[u8]) -> (Vec<u8>, [u8; 16]) {
    let mut buf = ct_source_pt.to_vec();
    let tag = match key.len() {
        16 => Aes128Gcm::new_from_slice(key)
            .unwrap()
            .encrypt_in_place_detached(nonce.into(), b"", &mut buf)
            .unwrap(),
        _ => Aes256Gcm::new_from_slice(key)
            .unwrap()
            .encrypt_in_place_detached(nonce.into(), b"", &mut buf)
            .unwrap(),
    };
    (buf, tag.into())
}

#[test]
fn poly1305_rfc_vector_through_both() {
    let key: [u8; 32] =
        hex::decode("85d6be7857556d337f4452fe42d506a80103808afb0db2fd4abff6af4149f51b")
            .unwrap()
            .try_into()
            .unwrap();
    let msg = b"Cryptographic Forum Research Group";
    let ours = poly_tag(&PolyKey::from_bytes(&key), msg);
    assert_eq!(ours.0, reference_poly(&key, msg));
    assert_eq!(hex::encode(ours.0), "a8061dc1305136c6c22b8baf0c0127a9");
}

proptest! {
    #[test]
    fn poly_matches_reference(key in any::<[u8; 32]>(), msg in proptest::collection::vec(any::<u8>(), 0..300)) {
        let ours = poly_tag(&PolyKey::from_bytes(&key), &msg);
        prop_assert_eq!(ours.0, reference_poly(&key, &msg));
    }

    #[test]
    fn poly_s_is_additive_offset(r in any::<[u8; 16]>(), s in any::<[u8; 16]>(), msg in proptest::collection::vec(any::<u8>(), 0..100)) {
        let with_s = u128::from_le_bytes(poly_tag(&PolyKey::new(&r, &s), &msg).0);
        let without = u128::from_le_bytes(poly_tag(&PolyKey::new(&r, &[0; 16]), &msg).0);
        prop_assert_eq!(with_s, without.wrapping_add(u128::from_le_bytes(s)));
    }

    #[test]
    fn ghash_matches_reference(h in any::<[u8; 16]>(), msg in proptest::collection::vec(any::<u8>(), 0..200)) {
        use ghash::universal_hash::{KeyInit as _, UniversalHash};
        let mut g = ghash::GHash::new(&h.into());
        g.update_padded(&msg);
        let mut len = [0u8; 16];
        len[8..].copy_from_slice(&((msg.len() as u64) * 8).to_be_bytes());
        g.update(&[len.into()]);
        let expect: [u8; 16] = g.finalize().into();
        prop_assert_eq!(ghash_tag(&Block128(h), &Block128::ZERO, &msg).0, expect);
    }

    #[test]
    fn ghash_pad_linearity(h in any::<[u8; 16]>(), p1 in any::<[u8; 16]>(), p2 in any::<[u8; 16]>(), msg in proptest::collection::vec(any::<u8>(), 0..64)) {
        let a = ghash_tag(&Block128(h), &Block128(p1), &msg);
        let b = ghash_tag(&Block128(h), &Block128(p2), &msg);
        prop_assert_eq!(a.xor(&b), Block128(p1).xor(&Block128(p2)));
    }

    #[test]
    fn gcm_matches_reference(key in any::<[u8; 16]>(), j in any::<u64>(), pt in proptest::collection::vec(any::<u8>(), 0..100)) {
        let nonce = graphene::primitives::gcm_nonce(j);
        let (ct_ref, tag_ref) = reference_gcm_tag(&key, &nonce, &pt);
        let ks = gcm_keystream(&key, &nonce, pt.len()).unwrap();
        let ct: Vec<u8> = pt.iter().zip(&ks).map(|(a, b)| a ^ b).collect();
        prop_assert_eq!(&ct, &ct_ref);
        let (h, pad) = gcm_mac_keys(&key, &nonce).unwrap();
        prop_assert_eq!(ghash_tag(&h, &pad, &ct).0, tag_ref);
    }

    #[test]
    fn keystream_prefix(key in any::<[u8; 16]>(), a in 0usize..200, b in 0usize..200) {
        let (a, b) = (a.min(b), a.max(b));
        let long = keystream(&key, b);
        prop_assert_eq!(&keystream(&key, a)[..], &long[..a]);
    }

    #[test]
    fn primitives_are_deterministic(key in any::<[u8; 16]>(), idx in any::<u64>()) {
        prop_assert_eq!(prf_block(&key, idx).unwrap(), prf_block(&key, idx).unwrap());
    }
}

#[test]
fn gcm_256_matches_reference() {
    let key = [0x42u8; 32];
    let nonce = graphene::primitives::gcm_nonce(99);
    let pt = b"aes-256 chains are supported too";
    let (ct_ref, tag_ref) = reference_gcm_tag(&key, &nonce, pt);
    let ks = gcm_keystream(&key, &nonce, pt.len()).unwrap();
    let ct: Vec<u8> = pt.iter().zip(&ks).map(|(a, b)| a ^ b).collect();
    assert_eq!(ct, ct_ref);
    let (h, pad) = gcm_mac_keys(&key, &nonce).unwrap();
    assert_eq!(ghash_tag(&h, &pad, &ct).0, tag_ref);
}
