use handface_core::gesture::GestureClass;
use handface_core::protocol::{
    crc16_ccitt_false, decode_frame, encode_frame, synchronize_stream, FrameDecoder, SampleFrame, FRAME_LEN,
};
use handface_core::session::{read_session, write_session, Provenance, SessionRecord, SCHEMA_VERSION};
use handface_core::stream::LabelInterval;
use proptest::prelude::*;

/// Bit-at-a-time CRC-16 (poly 0x1021, init 0xFFFF, no reflection, no xor-out).
fn crc_bitwise(bytes: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &b in bytes {
        crc ^= u16::from(b) << 8;
        for _ in 0..8 {
            crc = if crc & 0x8000 != 0 { (crc << 1) ^ 0x1021 } else { crc << 1 };
        }
    }
    crc
}

fn frame() -> impl Strategy<Value = SampleFrame> {
    (any::<u32>(), any::<u32>(), any::<u32>(), any::<u32>()).prop_map(|(counter, timestamp_ms, m, p)| SampleFrame {
        counter,
        timestamp_ms,
        magnitude: f32::from_bits(m),
        phase: f32::from_bits(p),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn frame_round_trip_is_bit_exact(f in frame()) {
        let bytes = encode_frame(&f);
        prop_assert!(decode_frame(&bytes).unwrap().bit_eq(&f));
    }

    #[test]
    fn table_crc_matches_bitwise(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
        prop_assert_eq!(crc16_ccitt_false(&bytes), crc_bitwise(&bytes));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn decoder_recovers_every_intact_frame(
        frames in proptest::collection::vec(frame(), 1..20),
        corrupt in proptest::collection::vec(any::<bool>(), 20),
        garbage in proptest::collection::vec(any::<u8>(), 0..30),
        chunk in 1usize..40,
    ) {
        let mut bytes = garbage.clone();
        let mut expected = Vec::new();
        for (i, f) in frames.iter().enumerate() {
            let mut b = encode_frame(f);
            if corrupt[i] {
                b[12] ^= 0x40;
            } else {
                expected.push(*f);
            }
            bytes.extend_from_slice(&b);
        }
        let mut dec = FrameDecoder::new();
        let mut got = Vec::new();
        for piece in bytes.chunks(chunk) {
            got.extend(dec.push(piece));
        }
        // A garbage prefix can in principle contain a valid-looking frame; only
        // accept exact recovery of the intact frames as a suffix in order.
        prop_assert!(got.len() >= expected.len());
        let tail = &got[got.len() - expected.len()..];
        for (a, b) in tail.iter().zip(&expected) {
            prop_assert!(a.bit_eq(b));
        }
    }

    #[test]
    fn session_round_trip(
        mags in proptest::collection::vec(-1e6f32..1e6, 0..50),
        subject in 0u32..100,
        label_span in (0u32..5000, 0u32..5000),
    ) {
        let frames: Vec<SampleFrame> = mags
            .iter()
            .enumerate()
            .map(|(i, &m)| SampleFrame { counter: i as u32, timestamp_ms: 50 * i as u32, magnitude: m, phase: -m / 1000.0 })
            .collect();
        let (a, b) = label_span;
        let rec = SessionRecord {
            schema_version: SCHEMA_VERSION,
            subject_id: subject,
            session_id: 2,
            sample_rate: 20.0,
            frames,
            labels: vec![LabelInterval { class: GestureClass::Interested, start_ms: a.min(b), end_ms: a.max(b) }],
            provenance: Provenance::Replayed,
            metadata: serde_json::json!({"k": [1.5, 2.25]}),
        };
        let mut bytes = Vec::new();
        write_session(&rec, &mut bytes).unwrap();
        let back = read_session(bytes.as_slice(), std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(back, rec);
    }

    #[test]
    fn synchronized_output_lies_on_exact_grid(
        deltas in proptest::collection::vec(1u32..180, 1..80),
        start in 0u32..10_000,
    ) {
        let mut t = start;
        let mut frames = vec![SampleFrame { counter: 5, timestamp_ms: t, magnitude: 0.0, phase: 0.0 }];
        for (i, d) in deltas.iter().enumerate() {
            t += d;
            frames.push(SampleFrame { counter: 6 + i as u32, timestamp_ms: t, magnitude: i as f32, phase: 0.0 });
        }
        let sync = synchronize_stream(&frames, 20.0).unwrap();
        prop_assert_eq!(sync.frames.len() as u32, (t - start) / 50 + 1);
        for (k, f) in sync.frames.iter().enumerate() {
            prop_assert_eq!(f.timestamp_ms, start + 50 * k as u32);
            prop_assert_eq!(f.counter, 5 + k as u32);
        }
        for g in &sync.gaps {
            prop_assert!(g.before_ms - g.after_ms >= 100);
        }
    }
}

#[test]
fn crc_check_value() {
    assert_eq!(crc_bitwise(b"123456789"), 0x29B1);
    assert_eq!(crc16_ccitt_false(b"123456789"), crc_bitwise(b"123456789"));
}

#[test]
fn frame_is_twenty_bytes() {
    assert_eq!(FRAME_LEN, 20);
    let f = SampleFrame { counter: 1, timestamp_ms: 2, magnitude: 3.0, phase: 4.0 };
    assert_eq!(encode_frame(&f).len(), 20);
}
