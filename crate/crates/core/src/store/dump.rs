use crate::wire::{decode_payload, SensorEnvelope, StreamKind, TypedPayload};

fn fmt3(v: &[f32]) -> String {
    format!("[{:.3}, {:.3}, {:.3}]", v[0], v[1], v[2])
}

/// Translation column of a row-major 4×4 matrix.
fn translation(m: &[f32; 16]) -> String {
    fmt3(&[m[3], m[7], m[11]])
}

/// One-line description of a decoded payload.
pub fn describe_payload(kind: StreamKind, payload: &[u8]) -> String {
    match decode_payload(kind, payload) {
        Err(e) => format!("<undecodable: {e}>"),
        Ok(TypedPayload::Camera(f)) => format!(
            "{}x{} {:?} fx={:.1} fy={:.1} cx={:.1} cy={:.1} position={}",
            f.width,
            f.height,
            f.encoding,
            f.intrinsics.fx,
            f.intrinsics.fy,
            f.intrinsics.cx,
            f.intrinsics.cy,
            translation(&f.extrinsics)
        ),
        Ok(TypedPayload::Gaze(g)) => format!("origin={} direction={}", fmt3(&g.position), fmt3(&g.direction)),
        Ok(TypedPayload::Pose(p)) => format!("position={}", translation(&p.matrix)),
        Ok(TypedPayload::Hands(h)) => {
            let hand = |x: &Option<Vec<crate::wire::PosePayload>>| {
                x.as_ref().map_or("absent".to_string(), |j| format!("wrist={}", translation(&j[0].matrix)))
            };
            format!("left {} right {}", hand(&h.left), hand(&h.right))
        }
        Ok(TypedPayload::Audio(a)) => {
            let rms = (a.samples.iter().map(|s| (*s as f64).powi(2)).sum::<f64>() / a.samples.len() as f64).sqrt();
            format!("{} samples rms={rms:.4}", a.samples.len())
        }
        Ok(TypedPayload::Text(t)) => format!("{:?}", t.text),
        Ok(TypedPayload::InterfaceState(_) | TypedPayload::InterfaceCommand(_) | TypedPayload::Json(_)) => {
            String::from_utf8_lossy(payload).into_owned()
        }
    }
}

/// `time<TAB>stream<TAB>bytes<TAB>description`.
pub fn format_envelope(kind: StreamKind, env: &SensorEnvelope) -> String {
    format!(
        "{}\t{}\t{}\t{}",
        env.originating_time,
        env.stream_id.0,
        env.payload.len(),
        describe_payload(kind, &env.payload)
    )
}
