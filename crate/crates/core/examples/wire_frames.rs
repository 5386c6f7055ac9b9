//! Encodes a head-pose envelope, decodes it back, then shows that a single
//! flipped bit is caught by the checksum.

use taskguide::geometry::Pose;
use taskguide::wire::{decode_envelope, encode_envelope, PosePayload, SensorEnvelope, StreamId, WireError};

fn main() {
    let head = Pose::from_yaw_pitch([0.1, 1.6, -0.3].into(), 0.4, -0.1);
    let payload = PosePayload { matrix: head.to_wire() }.encode();
    let env = SensorEnvelope::new(StreamId(5), 1_500_000_000, payload);

    let mut frame = encode_envelope(&env);
    println!("frame: {} bytes for a {} byte payload", frame.len(), env.payload.len());

    let (back, used) = decode_envelope(&frame).expect("fresh frame decodes");
    assert_eq!((back, used), (env.clone(), frame.len()));
    let pose = PosePayload::decode(&env.payload).unwrap();
    println!(
        "decoded stream {} at t={} ns, translation row {:?}",
        env.stream_id.0,
        env.originating_time,
        &pose.matrix[3..12]
    );

    frame[30] ^= 0x04;
    match decode_envelope(&frame) {
        Err(WireError::CrcMismatch { expected, actual }) => {
            println!("corrupted frame rejected: {expected:#010x} != {actual:#010x}")
        }
        other => panic!("corruption slipped through: {other:?}"),
    }
}
