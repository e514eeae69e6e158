use serde::{Deserialize, Serialize};

use super::{PacketError, Sid};

/// IPv6 Segment Routing Header (routing type 4).
///
/// ```text
///  0                   1                   2                   3
///  0 1 2 3 4 5 6 7 8 9 0 1 2 3 4 5 6 7 8 9 0 1 2 3 4 5 6 7 8 9 0 1
/// +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
/// | Next Header   |  Hdr Ext Len  | Routing Type  | Segments Left |
/// +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
/// |  Last Entry   |     Flags     |              Tag              |
/// +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
/// |            Segment List[0] (128 bits IPv6 address)            |
/// +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
///                              ...
/// |            Segment List[n] (128 bits IPv6 address)            |
/// +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
/// ```
///
/// The segment list is stored in reverse path order: `segments[0]` is the
/// final segment and `segments[segments_left]` is the active one. TLVs are
/// not supported, so `hdr_ext_len` and `last_entry` are fully determined by
/// the segment count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentRoutingHeader {
    pub next_header: u8,
    pub segments_left: u8,
    pub flags: u8,
    pub tag: u16,
    pub segments: Vec<Sid>,
}

impl SegmentRoutingHeader {
    pub const ROUTING_TYPE: u8 = 4;
    pub const FIXED_LEN: usize = 8;
    /// `hdr_ext_len` is a byte holding 2 units per segment.
    pub const MAX_SEGMENTS: usize = 127;

    /// Builds an SRH from a segment list in wire (reverse path) order.
    pub fn new(segments: Vec<Sid>, segments_left: u8) -> Result<Self, PacketError> {
        let srh = Self {
            next_header: super::PROTO_NO_NEXT,
            segments_left,
            flags: 0,
            tag: 0,
            segments,
        };
        srh.validate()?;
        Ok(srh)
    }

    /// Builds an SRH for a path given in traversal order, with the first
    /// path segment active.
    pub fn from_path(path: &[Sid]) -> Result<Self, PacketError> {
        let segments: Vec<Sid> = path.iter().rev().copied().collect();
        let sl = segments.len().saturating_sub(1);
        Self::new(segments, u8::try_from(sl).unwrap_or(u8::MAX))
    }

    pub fn validate(&self) -> Result<(), PacketError> {
        let n = self.segments.len();
        if n == 0 {
            return Err(PacketError::Overflow("SRH needs at least one segment".into()));
        }
        if n > Self::MAX_SEGMENTS {
            return Err(PacketError::Overflow(format!(
                "{n} segments exceed the {} an SRH can encode",
                Self::MAX_SEGMENTS
            )));
        }
        if usize::from(self.segments_left) >= n {
            return Err(PacketError::Overflow(format!(
                "segments left {} beyond last entry {}",
                self.segments_left,
                n - 1
            )));
        }
        Ok(())
    }

    pub fn hdr_ext_len(&self) -> u8 {
        (2 * self.segments.len()) as u8
    }

    pub fn last_entry(&self) -> u8 {
        (self.segments.len() - 1) as u8
    }

    pub fn encoded_len(&self) -> usize {
        Self::FIXED_LEN + 16 * self.segments.len()
    }

    pub fn active_segment(&self) -> Sid {
        self.segments[usize::from(self.segments_left)]
    }

    pub(crate) fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&[
            self.next_header,
            self.hdr_ext_len(),
            Self::ROUTING_TYPE,
            self.segments_left,
            self.last_entry(),
            self.flags,
        ]);
        out.extend_from_slice(&self.tag.to_be_bytes());
        for s in &self.segments {
            out.extend_from_slice(&s.octets());
        }
    }

    /// Parses an SRH at the start of `buf`; `offset` is only used in error
    /// reports.
    pub(crate) fn read(buf: &[u8], offset: usize) -> Result<Self, PacketError> {
        if buf.len() < Self::FIXED_LEN {
            return Err(PacketError::malformed(offset, "truncated SRH"));
        }
        let hdr_ext_len = buf[1];
        if buf[2] != Self::ROUTING_TYPE {
            return Err(PacketError::malformed(
                offset + 2,
                format!("routing type {} is not a segment routing header", buf[2]),
            ));
        }
        if hdr_ext_len == 0 || !hdr_ext_len.is_multiple_of(2) {
            return Err(PacketError::malformed(
                offset + 1,
                format!("hdr ext len {hdr_ext_len} is not a positive multiple of 2"),
            ));
        }
        let n = usize::from(hdr_ext_len) / 2;
        let total = Self::FIXED_LEN + 16 * n;
        if buf.len() < total {
            return Err(PacketError::malformed(
                offset,
                format!("SRH claims {total} B, only {} B available", buf.len()),
            ));
        }
        let last_entry = buf[4];
        if usize::from(last_entry) + 1 != n {
            return Err(PacketError::malformed(
                offset + 4,
                format!("last entry {last_entry} inconsistent with {n} segments (TLVs unsupported)"),
            ));
        }
        let segments_left = buf[3];
        if segments_left > last_entry {
            return Err(PacketError::malformed(
                offset + 3,
                format!("segments left {segments_left} exceeds last entry {last_entry}"),
            ));
        }
        let segments = buf[Self::FIXED_LEN..total]
            .chunks_exact(16)
            .map(|c| Sid::from(<[u8; 16]>::try_from(c).expect("16-byte chunk")))
            .collect();
        Ok(Self {
            next_header: buf[0],
            segments_left,
            flags: buf[5],
            tag: u16::from_be_bytes([buf[6], buf[7]]),
            segments,
        })
    }
}
