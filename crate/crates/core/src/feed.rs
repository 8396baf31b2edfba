//! LOBF codec: a compact ITCH-style binary market-data format.
//!
//! A LOBF file is a sequence of frames. Each frame is an 18-byte header
//! followed by length-prefixed messages:
//!
//! ```text
//! frame   = magic "LOBF" (4) | session_id (4) | sequence_number (8) | message_count (2) | message*
//! message = length (1) | kind (1) | body
//! ```
//!
//! The length byte counts the kind byte plus the body. All integers are
//! big-endian. Bodies:
//!
//! | kind | code | body                                                    |
//! |------|------|---------------------------------------------------------|
//! | Add  | `A`  | ts(8) id(8) side(1) price(4) qty(4)                     |
//! | Cancel | `X` | ts(8) id(8) qty(4)                                     |
//! | Delete | `D` | ts(8) id(8)                                            |
//! | Execute | `E` | ts(8) id(8) qty(4)                                    |
//! | Replace | `U` | ts(8) old_id(8) new_id(8) price(4) qty(4)             |

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"LOBF";
pub const FRAME_HEADER_LEN: usize = 18;
pub const MAX_MESSAGES_PER_FRAME: usize = u16::MAX as usize;

pub const KIND_ADD: u8 = b'A';
pub const KIND_CANCEL: u8 = b'X';
pub const KIND_DELETE: u8 = b'D';
pub const KIND_EXECUTE: u8 = b'E';
pub const KIND_REPLACE: u8 = b'U';

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeedError {
    #[error("truncated frame: need {needed} bytes, have {available}")]
    TruncatedFrame { needed: usize, available: usize },
    #[error("bad frame magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unknown message kind 0x{0:02x}")]
    UnknownMessageKind(u8),
    #[error("length prefix {declared} does not match kind 0x{kind:02x} (expected {expected})")]
    LengthMismatch {
        kind: u8,
        declared: u8,
        expected: u8,
    },
    #[error("zero quantity on order {order_id}")]
    ZeroQuantity { order_id: u64 },
    #[error("zero price on order {order_id}")]
    ZeroPrice { order_id: u64 },
    #[error("invalid side byte {0}")]
    InvalidSide(u8),
    #[error("frame declares {declared} messages but payload ends after {parsed}")]
    MessageCountMismatch { declared: u16, parsed: u16 },
    #[error("frame holds {0} messages, more than fits in a u16 count")]
    FrameTooLarge(usize),
    #[error("sequence gap in session {session_id}: expected {expected}, found {found}")]
    SequenceGap {
        session_id: u32,
        expected: u64,
        found: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Buy, Side::Sell];

    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Buy => "buy",
            Side::Sell => "sell",
        }
    }

    fn to_byte(self) -> u8 {
        match self {
            Side::Buy => 0,
            Side::Sell => 1,
        }
    }

    fn from_byte(b: u8) -> Result<Self, FeedError> {
        match b {
            0 => Ok(Side::Buy),
            1 => Ok(Side::Sell),
            other => Err(FeedError::InvalidSide(other)),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "buy" => Ok(Side::Buy),
            "sell" => Ok(Side::Sell),
            other => Err(format!("unknown side {other:?}")),
        }
    }
}

/// One decoded feed event. Prices are integer units (price x 100).
///
/// `Cancel` and `Execute` carry the reduced / executed amount, not the
/// residual. `Replace` inherits the side of the order it replaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarketMessage {
    Add {
        timestamp_ns: u64,
        order_id: u64,
        side: Side,
        price: u32,
        quantity: u32,
    },
    Cancel {
        timestamp_ns: u64,
        order_id: u64,
        quantity: u32,
    },
    Delete {
        timestamp_ns: u64,
        order_id: u64,
    },
    Execute {
        timestamp_ns: u64,
        order_id: u64,
        quantity: u32,
    },
    Replace {
        timestamp_ns: u64,
        order_id: u64,
        new_order_id: u64,
        price: u32,
        quantity: u32,
    },
}

impl MarketMessage {
    pub fn timestamp_ns(&self) -> u64 {
        match *self {
            MarketMessage::Add { timestamp_ns, .. }
            | MarketMessage::Cancel { timestamp_ns, .. }
            | MarketMessage::Delete { timestamp_ns, .. }
            | MarketMessage::Execute { timestamp_ns, .. }
            | MarketMessage::Replace { timestamp_ns, .. } => timestamp_ns,
        }
    }

    pub fn order_id(&self) -> u64 {
        match *self {
            MarketMessage::Add { order_id, .. }
            | MarketMessage::Cancel { order_id, .. }
            | MarketMessage::Delete { order_id, .. }
            | MarketMessage::Execute { order_id, .. }
            | MarketMessage::Replace { order_id, .. } => order_id,
        }
    }

    pub fn kind_code(&self) -> u8 {
        match self {
            MarketMessage::Add { .. } => KIND_ADD,
            MarketMessage::Cancel { .. } => KIND_CANCEL,
            MarketMessage::Delete { .. } => KIND_DELETE,
            MarketMessage::Execute { .. } => KIND_EXECUTE,
            MarketMessage::Replace { .. } => KIND_REPLACE,
        }
    }

    /// Checks the per-kind field invariants (positive quantity and price).
    pub fn validate(&self) -> Result<(), FeedError> {
        let order_id = self.order_id();
        match *self {
            MarketMessage::Add {
                price, quantity, ..
            }
            | MarketMessage::Replace {
                price, quantity, ..
            } => {
                if quantity == 0 {
                    return Err(FeedError::ZeroQuantity { order_id });
                }
                if price == 0 {
                    return Err(FeedError::ZeroPrice { order_id });
                }
            }
            MarketMessage::Cancel { quantity, .. } | MarketMessage::Execute { quantity, .. } => {
                if quantity == 0 {
                    return Err(FeedError::ZeroQuantity { order_id });
                }
            }
            MarketMessage::Delete { .. } => {}
        }
        Ok(())
    }
}

/// Value of the length byte (kind + body) for each message kind.
pub fn message_length(kind: u8) -> Option<u8> {
    match kind {
        KIND_ADD => Some(26),
        KIND_CANCEL => Some(21),
        KIND_DELETE => Some(17),
        KIND_EXECUTE => Some(21),
        KIND_REPLACE => Some(33),
        _ => None,
    }
}

/// Appends the wire form of `msg` (length byte included) to `out`.
pub fn encode_message_into(msg: &MarketMessage, out: &mut Vec<u8>) {
    let kind = msg.kind_code();
    out.push(message_length(kind).expect("every variant has a layout"));
    out.push(kind);
    match *msg {
        MarketMessage::Add {
            timestamp_ns,
            order_id,
            side,
            price,
            quantity,
        } => {
            out.extend_from_slice(&timestamp_ns.to_be_bytes());
            out.extend_from_slice(&order_id.to_be_bytes());
            out.push(side.to_byte());
            out.extend_from_slice(&price.to_be_bytes());
            out.extend_from_slice(&quantity.to_be_bytes());
        }
        MarketMessage::Cancel {
            timestamp_ns,
            order_id,
            quantity,
        }
        | MarketMessage::Execute {
            timestamp_ns,
            order_id,
            quantity,
        } => {
            out.extend_from_slice(&timestamp_ns.to_be_bytes());
            out.extend_from_slice(&order_id.to_be_bytes());
            out.extend_from_slice(&quantity.to_be_bytes());
        }
        MarketMessage::Delete {
            timestamp_ns,
            order_id,
        } => {
            out.extend_from_slice(&timestamp_ns.to_be_bytes());
            out.extend_from_slice(&order_id.to_be_bytes());
        }
        MarketMessage::Replace {
            timestamp_ns,
            order_id,
            new_order_id,
            price,
            quantity,
        } => {
            out.extend_from_slice(&timestamp_ns.to_be_bytes());
            out.extend_from_slice(&order_id.to_be_bytes());
            out.extend_from_slice(&new_order_id.to_be_bytes());
            out.extend_from_slice(&price.to_be_bytes());
            out.extend_from_slice(&quantity.to_be_bytes());
        }
    }
}

pub fn encode_message(msg: &MarketMessage) -> Vec<u8> {
    let mut out = Vec::with_capacity(34);
    encode_message_into(msg, &mut out);
    out
}

/// Big-endian reader over a slice whose length was already checked.
struct Fields<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Fields<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take<const N: usize>(&mut self) -> [u8; N] {
        let mut out = [0u8; N];
        out.copy_from_slice(&self.buf[self.pos..self.pos + N]);
        self.pos += N;
        out
    }

    fn u8(&mut self) -> u8 {
        self.take::<1>()[0]
    }

    fn u32(&mut self) -> u32 {
        u32::from_be_bytes(self.take())
    }

    fn u64(&mut self) -> u64 {
        u64::from_be_bytes(self.take())
    }
}

/// Decodes one message starting at its length byte.
///
/// Returns the message and the number of bytes consumed (`1 + length`).
pub fn decode_message(buf: &[u8]) -> Result<(MarketMessage, usize), FeedError> {
    let Some(&declared) = buf.first() else {
        return Err(FeedError::TruncatedFrame {
            needed: 1,
            available: 0,
        });
    };
    let total = 1 + declared as usize;
    if buf.len() < total {
        return Err(FeedError::TruncatedFrame {
            needed: total,
            available: buf.len(),
        });
    }
    if declared == 0 {
        return Err(FeedError::LengthMismatch {
            kind: 0,
            declared,
            expected: 1,
        });
    }
    let kind = buf[1];
    let expected = message_length(kind).ok_or(FeedError::UnknownMessageKind(kind))?;
    if declared != expected {
        return Err(FeedError::LengthMismatch {
            kind,
            declared,
            expected,
        });
    }

    let mut f = Fields::new(&buf[2..total]);
    let msg = match kind {
        KIND_ADD => {
            let timestamp_ns = f.u64();
            let order_id = f.u64();
            let side = Side::from_byte(f.u8())?;
            MarketMessage::Add {
                timestamp_ns,
                order_id,
                side,
                price: f.u32(),
                quantity: f.u32(),
            }
        }
        KIND_CANCEL => MarketMessage::Cancel {
            timestamp_ns: f.u64(),
            order_id: f.u64(),
            quantity: f.u32(),
        },
        KIND_DELETE => MarketMessage::Delete {
            timestamp_ns: f.u64(),
            order_id: f.u64(),
        },
        KIND_EXECUTE => MarketMessage::Execute {
            timestamp_ns: f.u64(),
            order_id: f.u64(),
            quantity: f.u32(),
        },
        KIND_REPLACE => MarketMessage::Replace {
            timestamp_ns: f.u64(),
            order_id: f.u64(),
            new_order_id: f.u64(),
            price: f.u32(),
            quantity: f.u32(),
        },
        other => return Err(FeedError::UnknownMessageKind(other)),
    };
    msg.validate()?;
    Ok((msg, total))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LobfFrame {
    pub session_id: u32,
    /// Index of the first message of this frame within its session.
    pub sequence_number: u64,
    pub messages: Vec<MarketMessage>,
}

impl LobfFrame {
    pub fn message_count(&self) -> usize {
        self.messages.len()
    }

    /// Sequence number the next frame of the same session must carry.
    pub fn next_sequence(&self) -> u64 {
        self.sequence_number + self.messages.len() as u64
    }
}

pub fn encode_frame_into(frame: &LobfFrame, out: &mut Vec<u8>) -> Result<(), FeedError> {
    let count = frame.messages.len();
    if count > MAX_MESSAGES_PER_FRAME {
        return Err(FeedError::FrameTooLarge(count));
    }
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&frame.session_id.to_be_bytes());
    out.extend_from_slice(&frame.sequence_number.to_be_bytes());
    out.extend_from_slice(&(count as u16).to_be_bytes());
    for msg in &frame.messages {
        encode_message_into(msg, out);
    }
    Ok(())
}

pub fn encode_frame(frame: &LobfFrame) -> Result<Vec<u8>, FeedError> {
    let mut out = Vec::with_capacity(FRAME_HEADER_LEN + 34 * frame.messages.len());
    encode_frame_into(frame, &mut out)?;
    Ok(out)
}

/// Decodes the frame at the start of `buf`, returning it with the number of
/// bytes it occupies. Never reads past the declared messages.
pub fn decode_frame(buf: &[u8]) -> Result<(LobfFrame, usize), FeedError> {
    if buf.len() < FRAME_HEADER_LEN {
        return Err(FeedError::TruncatedFrame {
            needed: FRAME_HEADER_LEN,
            available: buf.len(),
        });
    }
    let mut header = Fields::new(&buf[..FRAME_HEADER_LEN]);
    let magic: [u8; 4] = header.take();
    if magic != MAGIC {
        return Err(FeedError::BadMagic(magic));
    }
    let session_id = header.u32();
    let sequence_number = header.u64();
    let count = u16::from_be_bytes(header.take());

    let mut pos = FRAME_HEADER_LEN;
    let mut messages = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let (msg, used) = decode_message(&buf[pos..])?;
        messages.push(msg);
        pos += used;
    }
    Ok((
        LobfFrame {
            session_id,
            sequence_number,
            messages,
        },
        pos,
    ))
}

/// Iterator over the frames of a LOBF byte stream.
pub struct FrameReader<'a> {
    buf: &'a [u8],
    pos: usize,
    failed: bool,
}

impl<'a> FrameReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self {
            buf,
            pos: 0,
            failed: false,
        }
    }
}

impl Iterator for FrameReader<'_> {
    type Item = Result<LobfFrame, FeedError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.pos >= self.buf.len() {
            return None;
        }
        match decode_frame(&self.buf[self.pos..]) {
            Ok((frame, used)) => {
                self.pos += used;
                Some(Ok(frame))
            }
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

/// Decodes a whole stream and checks that sequence numbers are contiguous
/// within each session.
pub fn decode_stream(buf: &[u8]) -> Result<Vec<LobfFrame>, FeedError> {
    let mut next_seq: HashMap<u32, u64> = HashMap::new();
    let mut frames = Vec::new();
    for frame in FrameReader::new(buf) {
        let frame = frame?;
        if let Some(&expected) = next_seq.get(&frame.session_id) {
            if frame.sequence_number != expected {
                return Err(FeedError::SequenceGap {
                    session_id: frame.session_id,
                    expected,
                    found: frame.sequence_number,
                });
            }
        }
        next_seq.insert(frame.session_id, frame.next_sequence());
        frames.push(frame);
    }
    Ok(frames)
}

/// Splits one session's messages into frames of at most `max_per_frame`
/// messages with contiguous sequence numbers starting at `first_sequence`.
pub fn frame_session(
    session_id: u32,
    first_sequence: u64,
    messages: &[MarketMessage],
    max_per_frame: usize,
) -> Vec<LobfFrame> {
    let max_per_frame = max_per_frame.clamp(1, MAX_MESSAGES_PER_FRAME);
    let mut seq = first_sequence;
    messages
        .chunks(max_per_frame)
        .map(|chunk| {
            let frame = LobfFrame {
                session_id,
                sequence_number: seq,
                messages: chunk.to_vec(),
            };
            seq += chunk.len() as u64;
            frame
        })
        .collect()
}

pub fn encode_stream(frames: &[LobfFrame]) -> Result<Vec<u8>, FeedError> {
    let mut out = Vec::new();
    for frame in frames {
        encode_frame_into(frame, &mut out)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn add(ts: u64, id: u64, side: Side, price: u32, qty: u32) -> MarketMessage {
        MarketMessage::Add {
            timestamp_ns: ts,
            order_id: id,
            side,
            price,
            quantity: qty,
        }
    }

    #[test]
    fn add_layout_is_bit_exact() {
        let bytes = encode_message(&add(1000, 7, Side::Buy, 1214, 100));
        let mut expected = vec![26u8, b'A'];
        expected.extend_from_slice(&1000u64.to_be_bytes());
        expected.extend_from_slice(&7u64.to_be_bytes());
        expected.push(0);
        expected.extend_from_slice(&1214u32.to_be_bytes());
        expected.extend_from_slice(&100u32.to_be_bytes());
        assert_eq!(bytes, expected);

        let (msg, used) = decode_message(&expected).unwrap();
        assert_eq!(used, 27);
        assert_eq!(msg, add(1000, 7, Side::Buy, 1214, 100));
    }

    #[test]
    fn sell_add_encodes_side_byte_one() {
        let bytes = encode_message(&add(0, 1, Side::Sell, 1217, 50));
        assert_eq!(bytes.len(), 27);
        assert_eq!(bytes[18], 1);
    }

    #[test]
    fn replace_carries_both_ids() {
        let msg = MarketMessage::Replace {
            timestamp_ns: 5,
            order_id: 11,
            new_order_id: 12,
            price: 1215,
            quantity: 30,
        };
        let bytes = encode_message(&msg);
        assert_eq!(bytes.len(), 34);
        assert_eq!(&bytes[10..18], &11u64.to_be_bytes());
        assert_eq!(&bytes[18..26], &12u64.to_be_bytes());
        assert_eq!(decode_message(&bytes).unwrap().0, msg);
    }

    #[test]
    fn zero_quantity_add_is_rejected() {
        let mut bytes = encode_message(&add(1, 2, Side::Buy, 100, 1));
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&0u32.to_be_bytes());
        assert_eq!(
            decode_message(&bytes),
            Err(FeedError::ZeroQuantity { order_id: 2 })
        );
    }

    #[test]
    fn unknown_kind_is_rejected() {
        let mut bytes = encode_message(&add(1, 2, Side::Buy, 100, 1));
        bytes[1] = 0xFF;
        assert_eq!(
            decode_message(&bytes),
            Err(FeedError::UnknownMessageKind(0xFF))
        );
    }

    #[test]
    fn wrong_length_prefix_is_rejected() {
        let mut bytes = encode_message(&MarketMessage::Delete {
            timestamp_ns: 1,
            order_id: 2,
        });
        bytes[0] = 16;
        assert!(matches!(
            decode_message(&bytes),
            Err(FeedError::LengthMismatch { kind: b'D', .. })
        ));
    }

    #[test]
    fn empty_frame_round_trips() {
        let frame = LobfFrame {
            session_id: 1,
            sequence_number: 0,
            messages: vec![],
        };
        let bytes = encode_frame(&frame).unwrap();
        assert_eq!(bytes.len(), FRAME_HEADER_LEN);
        let (decoded, used) = decode_frame(&bytes).unwrap();
        assert_eq!(used, FRAME_HEADER_LEN);
        assert_eq!(decoded, frame);
    }

    #[test]
    fn short_input_is_truncated() {
        assert!(matches!(
            decode_frame(&[0u8; 13]),
            Err(FeedError::TruncatedFrame { .. })
        ));
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut bytes = encode_frame(&LobfFrame {
            session_id: 1,
            sequence_number: 0,
            messages: vec![],
        })
        .unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode_frame(&bytes), Err(FeedError::BadMagic(_))));
    }

    #[test]
    fn declared_count_beyond_payload_is_truncated() {
        let frame = LobfFrame {
            session_id: 3,
            sequence_number: 0,
            messages: vec![add(1, 1, Side::Buy, 10, 1), add(2, 2, Side::Buy, 10, 1)],
        };
        let bytes = encode_frame(&frame).unwrap();
        let cut = &bytes[..bytes.len() - 1];
        assert!(matches!(
            decode_frame(cut),
            Err(FeedError::TruncatedFrame { .. })
        ));
    }

    #[test]
    fn stream_detects_sequence_gap() {
        let msgs: Vec<_> = (0..5).map(|i| add(i, i, Side::Buy, 10, 1)).collect();
        let mut frames = frame_session(9, 0, &msgs, 2);
        assert_eq!(frames.len(), 3);
        let ok = encode_stream(&frames).unwrap();
        assert_eq!(decode_stream(&ok).unwrap(), frames);

        frames[2].sequence_number += 1;
        let bad = encode_stream(&frames).unwrap();
        assert_eq!(
            decode_stream(&bad),
            Err(FeedError::SequenceGap {
                session_id: 9,
                expected: 4,
                found: 5
            })
        );
    }

    fn arb_side() -> impl Strategy<Value = Side> {
        prop_oneof![Just(Side::Buy), Just(Side::Sell)]
    }

    pub(crate) fn arb_message() -> impl Strategy<Value = MarketMessage> {
        prop_oneof![
            (
                any::<u64>(),
                any::<u64>(),
                arb_side(),
                1..=u32::MAX,
                1..=u32::MAX
            )
                .prop_map(|(ts, id, side, price, qty)| MarketMessage::Add {
                    timestamp_ns: ts,
                    order_id: id,
                    side,
                    price,
                    quantity: qty
                }),
            (any::<u64>(), any::<u64>(), 1..=u32::MAX).prop_map(|(ts, id, qty)| {
                MarketMessage::Cancel {
                    timestamp_ns: ts,
                    order_id: id,
                    quantity: qty,
                }
            }),
            (any::<u64>(), any::<u64>()).prop_map(|(ts, id)| MarketMessage::Delete {
                timestamp_ns: ts,
                order_id: id
            }),
            (any::<u64>(), any::<u64>(), 1..=u32::MAX).prop_map(|(ts, id, qty)| {
                MarketMessage::Execute {
                    timestamp_ns: ts,
                    order_id: id,
                    quantity: qty,
                }
            }),
            (
                any::<u64>(),
                any::<u64>(),
                any::<u64>(),
                1..=u32::MAX,
                1..=u32::MAX
            )
                .prop_map(|(ts, id, new_id, price, qty)| MarketMessage::Replace {
                    timestamp_ns: ts,
                    order_id: id,
                    new_order_id: new_id,
                    price,
                    quantity: qty
                }),
        ]
    }

    proptest! {
        #[test]
        fn message_round_trip(msg in arb_message()) {
            let bytes = encode_message(&msg);
            let (decoded, used) = decode_message(&bytes).unwrap();
            prop_assert_eq!(used, bytes.len());
            prop_assert_eq!(decoded, msg);
        }

        #[test]
        fn frame_round_trip_is_byte_exact(
            session in any::<u32>(),
            seq in any::<u64>(),
            msgs in proptest::collection::vec(arb_message(), 0..40),
        ) {
            let frame = LobfFrame { session_id: session, sequence_number: seq, messages: msgs };
            let bytes = encode_frame(&frame).unwrap();
            let payload: usize = frame.messages.iter().map(|m| 1 + message_length(m.kind_code()).unwrap() as usize).sum();
            prop_assert_eq!(bytes.len(), FRAME_HEADER_LEN + payload);
            let (decoded, used) = decode_frame(&bytes).unwrap();
            prop_assert_eq!(used, bytes.len());
            prop_assert_eq!(encode_frame(&decoded).unwrap(), bytes);
        }

        #[test]
        fn random_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
            if let Ok((_, used)) = decode_frame(&bytes) {
                prop_assert!(used <= bytes.len());
            }
            let _ = decode_message(&bytes);
        }
    }
}
