//! Records two streams into a session store, closes it, and reads them back
//! in merged time order.

use taskguide::store::{StoreReader, StoreWriter};
use taskguide::wire::{SensorEnvelope, StreamDescriptor, StreamId, StreamKind, StreamManifest, TextInputPayload};

fn descriptor(id: u16, name: &str) -> StreamDescriptor {
    StreamDescriptor { stream_id: StreamId(id), name: name.into(), kind: StreamKind::TextInput, nominal_rate_hz: 0.0 }
}

fn main() {
    let root = tempfile::tempdir().unwrap();
    let manifest = StreamManifest {
        session_id: uuid::Uuid::new_v4(),
        epoch_utc: 1_700_000_000_000_000,
        streams: vec![descriptor(1, "speech.text"), descriptor(2, "ui.text")],
    };
    let mut writer = StoreWriter::create(root.path(), manifest).unwrap();
    let lines = [(2, 100, "help me make coffee"), (2, 500, "done"), (1, 100, "help"), (1, 300, "is the water hot")];
    // Each stream must be time-ordered; the streams need not be in step.
    for (id, ms, text) in lines {
        let payload = TextInputPayload { text: text.into() }.encode();
        writer.append(&SensorEnvelope::new(StreamId(id), ms * 1_000_000, payload)).unwrap();
    }
    let dir = writer.dir().to_path_buf();
    let catalog = writer.close().unwrap();
    for s in &catalog.streams {
        println!("stream {}: {} envelopes, {} bytes", s.stream_id.0, s.count, s.bytes);
    }

    let reader = StoreReader::open(&dir).unwrap();
    for env in reader.read_merged(None, None).unwrap() {
        let env = env.unwrap();
        let text = TextInputPayload::decode(&env.payload).unwrap().text;
        println!("{:>4} ms  stream {}  {text}", env.originating_time / 1_000_000, env.stream_id.0);
    }
}
