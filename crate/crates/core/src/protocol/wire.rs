//! Line oriented wire form of the protocol.
//!
//! Every delivered message becomes exactly one JSON object on one line,
//! with fixed key order: `seq`, `sent_at`, `from`, `to`, `kind`, `payload`.
//! Payload keys follow the payload struct declaration order. Two runs of
//! the same configuration therefore produce byte identical traces.

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize};

use super::{
    AcceptPayload, CounterPayload, CounterReplyPayload, Envelope, EvaluatePayload,
    EvaluateReplyPayload, HelpPayload, Message, MsgKind, OrderPayload, PlanReplyPayload,
    PlanRequestPayload, ReassignPayload, SnapshotPayload, SnapshotRequestPayload,
};
use crate::domain::Day;

struct PayloadRef<'a>(&'a Message);

impl Serialize for PayloadRef<'_> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Message::CUs(p) | Message::CDs(p) => p.serialize(s),
            Message::NUs(p) | Message::NDs(p) => p.serialize(s),
            Message::RnUs(p) | Message::RnDs(p) => p.serialize(s),
            Message::AUs(p) | Message::ADs(p) => p.serialize(s),
            Message::DPaN(p) | Message::DPaM(p) => p.serialize(s),
            Message::DPaA(p) => p.serialize(s),
            Message::RPaUs(p) => p.serialize(s),
            Message::RPaDs(p) => p.serialize(s),
            Message::DTna(p) => p.serialize(s),
            Message::RTna(p) => p.serialize(s),
            Message::CTna(p) => p.serialize(s),
            Message::Help(p) => p.serialize(s),
        }
    }
}

impl Serialize for Envelope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Envelope", 6)?;
        st.serialize_field("seq", &self.seq)?;
        st.serialize_field("sent_at", &self.sent_at)?;
        st.serialize_field("from", &self.from.to_string())?;
        st.serialize_field("to", &self.to.to_string())?;
        st.serialize_field("kind", self.msg.kind().as_str())?;
        st.serialize_field("payload", &PayloadRef(&self.msg))?;
        st.end()
    }
}

/// Renders one envelope as its canonical trace line, without a newline.
pub fn encode_line(env: &Envelope) -> String {
    // Infallible: no maps with non-string keys, no floats.
    serde_json::to_string(env).expect("envelope serialization cannot fail")
}

/// A problem found while reading a trace. Line numbers are one based.
#[derive(Debug, thiserror::Error)]
pub enum DecodeError {
    #[error("line {line}: not a JSON envelope: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: unknown message kind {kind:?}")]
    UnknownKind { line: usize, kind: String },
    #[error("line {line}: malformed {kind} payload: {source}")]
    Malformed {
        line: usize,
        kind: MsgKind,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: bad envelope: {reason}")]
    BadEnvelope { line: usize, reason: String },
    #[error("line {line}: sequence number {seq} does not increase over {prev}")]
    NonMonotoneSeq { line: usize, prev: u64, seq: u64 },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WireIn {
    seq: u64,
    sent_at: Day,
    from: String,
    to: String,
    kind: String,
    payload: serde_json::Value,
}

/// Parses one trace line. `line_no` only feeds error reporting.
pub fn decode_line(text: &str, line_no: usize) -> Result<Envelope, DecodeError> {
    let raw: WireIn =
        serde_json::from_str(text).map_err(|source| DecodeError::Json { line: line_no, source })?;
    let kind = MsgKind::from_str(&raw.kind)
        .ok_or_else(|| DecodeError::UnknownKind { line: line_no, kind: raw.kind.clone() })?;

    fn payload<T: serde::de::DeserializeOwned>(
        value: serde_json::Value,
        kind: MsgKind,
        line: usize,
    ) -> Result<T, DecodeError> {
        serde_json::from_value(value).map_err(|source| DecodeError::Malformed { line, kind, source })
    }

    let msg = match kind {
        MsgKind::CUs => Message::CUs(payload::<OrderPayload>(raw.payload, kind, line_no)?),
        MsgKind::CDs => Message::CDs(payload::<OrderPayload>(raw.payload, kind, line_no)?),
        MsgKind::NUs => Message::NUs(payload::<CounterPayload>(raw.payload, kind, line_no)?),
        MsgKind::NDs => Message::NDs(payload::<CounterPayload>(raw.payload, kind, line_no)?),
        MsgKind::RnUs => Message::RnUs(payload::<CounterReplyPayload>(raw.payload, kind, line_no)?),
        MsgKind::RnDs => Message::RnDs(payload::<CounterReplyPayload>(raw.payload, kind, line_no)?),
        MsgKind::AUs => Message::AUs(payload::<AcceptPayload>(raw.payload, kind, line_no)?),
        MsgKind::ADs => Message::ADs(payload::<AcceptPayload>(raw.payload, kind, line_no)?),
        MsgKind::DPaN => Message::DPaN(payload::<PlanRequestPayload>(raw.payload, kind, line_no)?),
        MsgKind::DPaM => Message::DPaM(payload::<PlanRequestPayload>(raw.payload, kind, line_no)?),
        MsgKind::DPaA => Message::DPaA(payload::<EvaluatePayload>(raw.payload, kind, line_no)?),
        MsgKind::RPaUs => Message::RPaUs(payload::<PlanReplyPayload>(raw.payload, kind, line_no)?),
        MsgKind::RPaDs => {
            Message::RPaDs(payload::<EvaluateReplyPayload>(raw.payload, kind, line_no)?)
        }
        MsgKind::DTna => {
            Message::DTna(payload::<SnapshotRequestPayload>(raw.payload, kind, line_no)?)
        }
        MsgKind::RTna => Message::RTna(payload::<SnapshotPayload>(raw.payload, kind, line_no)?),
        MsgKind::CTna => Message::CTna(payload::<ReassignPayload>(raw.payload, kind, line_no)?),
        MsgKind::Help => Message::Help(payload::<HelpPayload>(raw.payload, kind, line_no)?),
    };

    let from = raw
        .from
        .parse()
        .map_err(|reason| DecodeError::BadEnvelope { line: line_no, reason })?;
    let to =
        raw.to.parse().map_err(|reason| DecodeError::BadEnvelope { line: line_no, reason })?;

    Ok(Envelope { seq: raw.seq, sent_at: raw.sent_at, from, to, msg })
}

/// Parses a whole trace, skipping blank lines and requiring strictly
/// increasing sequence numbers.
pub fn read_trace(text: &str) -> Result<Vec<Envelope>, DecodeError> {
    let mut out = Vec::new();
    let mut prev: Option<u64> = None;
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let env = decode_line(line, idx + 1)?;
        if let Some(p) = prev {
            if env.seq <= p {
                return Err(DecodeError::NonMonotoneSeq { line: idx + 1, prev: p, seq: env.seq });
            }
        }
        prev = Some(env.seq);
        out.push(env);
    }
    Ok(out)
}
