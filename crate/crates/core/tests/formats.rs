//! Binary formats: truncation fuzzing, stable re-encoding and magic checks.

use aesgrad_core::aesthetics::build_aesthetic_embedding;
use aesgrad_core::clip::{EncoderConfig, MiniClipWeights};
use aesgrad_core::format::{
    decode_aesc, decode_aese, decode_weights, encode_aesc, encode_aese, encode_weights, load_aesthetic, load_scorer,
    load_weights, save_aesthetic, save_scorer, save_weights, sniff, FileKind,
};
use aesgrad_core::scorer::ScorerWeights;
use aesgrad_core::tensor::Tensor;
use aesgrad_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample_files() -> Vec<(&'static str, Vec<u8>)> {
    let v = Tensor::from_vec((0..64).map(|i| (i as f32 * 0.37).sin()).collect());
    let e = build_aesthetic_embedding(std::slice::from_ref(&v), "fuzz", "2024-01-01T00:00:00Z").unwrap();
    let s = ScorerWeights::new(v, 5.0, "fuzz").unwrap();
    let w = MiniClipWeights::<f32>::init(EncoderConfig::tiny(16, 1), 3).unwrap();
    vec![
        ("AESE", encode_aese(&e).unwrap()),
        ("AESC", encode_aesc(&s).unwrap()),
        ("MCLP", encode_weights(&w).unwrap()),
    ]
}

fn decode(kind: &str, bytes: &[u8]) -> aesgrad_core::Result<()> {
    match kind {
        "AESE" => decode_aese(bytes, true).map(drop),
        "AESC" => decode_aesc(bytes, None).map(drop),
        _ => decode_weights(bytes).map(drop),
    }
}

#[test]
fn random_truncations_are_format_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (kind, bytes) in sample_files() {
        decode(kind, &bytes).unwrap();
        for _ in 0..100 {
            let cut = rng.gen_range(0..bytes.len());
            match decode(kind, &bytes[..cut]) {
                Err(Error::Format(msg)) => assert!(!msg.is_empty()),
                other => panic!("{kind} cut at {cut}: {other:?}"),
            }
        }
        // every short prefix of the header too
        for cut in 0..16.min(bytes.len()) {
            assert!(
                matches!(decode(kind, &bytes[..cut]), Err(Error::Format(_))),
                "{kind} at {cut}"
            );
        }
    }
}

#[test]
fn trailing_bytes_are_rejected() {
    for (kind, mut bytes) in sample_files() {
        bytes.push(0);
        assert!(matches!(decode(kind, &bytes), Err(Error::Format(_))), "{kind}");
    }
}

#[test]
fn save_load_save_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let files = sample_files();
    let e = decode_aese(&files[0].1, true).unwrap();
    let s = decode_aesc(&files[1].1, None).unwrap();
    let w = decode_weights(&files[2].1).unwrap();

    let p = dir.path().join("a.aese");
    save_aesthetic(&p, &e).unwrap();
    let first = std::fs::read(&p).unwrap();
    save_aesthetic(&p, &load_aesthetic(&p, true).unwrap()).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), first);
    assert_eq!(first, files[0].1);

    let p = dir.path().join("s.aesc");
    save_scorer(&p, &s).unwrap();
    let first = std::fs::read(&p).unwrap();
    save_scorer(&p, &load_scorer(&p, Some(64)).unwrap()).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), first);

    let p = dir.path().join("w.mclp");
    save_weights(&p, &w).unwrap();
    let first = std::fs::read(&p).unwrap();
    let back = load_weights(&p).unwrap();
    assert!(back.bit_eq(&w));
    save_weights(&p, &back).unwrap();
    assert_eq!(std::fs::read(&p).unwrap(), first);
}

#[test]
fn magic_is_checked_and_sniffed() {
    let files = sample_files();
    let kinds = [FileKind::Aesthetic, FileKind::Scorer, FileKind::Weights];
    for ((_, bytes), kind) in files.iter().zip(kinds) {
        assert_eq!(sniff(bytes).unwrap(), kind);
    }
    let mut wrong = files[0].1.clone();
    wrong[..4].copy_from_slice(b"XXXX");
    assert!(matches!(sniff(&wrong), Err(Error::UnknownMagic(_))));
    assert!(matches!(decode_aese(&wrong, true), Err(Error::Format(_))));
    // a scorer file is not an aesthetic file
    assert!(decode_aese(&files[1].1, true).is_err());
    assert!(matches!(sniff(b"AE"), Err(Error::Format(_))));
}

#[test]
fn unsupported_version_and_dtype_are_rejected() {
    let (_, bytes) = &sample_files()[0];
    let mut v = bytes.clone();
    v[4] = 2;
    assert!(matches!(decode_aese(&v, true), Err(Error::Format(_))));
    let mut d = bytes.clone();
    d[10] = 1;
    assert!(matches!(decode_aese(&d, true), Err(Error::Format(_))));
}

#[test]
fn scorer_dimension_mismatch_names_both_sides() {
    let (_, bytes) = &sample_files()[1];
    match decode_aesc(bytes, Some(32)) {
        Err(err @ Error::Dimension { .. }) => {
            let msg = err.to_string();
            assert!(msg.contains("64") && msg.contains("32"), "{msg}");
        }
        other => panic!("{other:?}"),
    }
}
