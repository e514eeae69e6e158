//! Layered test packets: Ethernet, IPv6, Segment Routing Header, IPv4 and
//! opaque payload, with a byte-exact codec and the SRv6 behavior
//! transforms.

mod behavior;
mod build;
mod codec;
mod plan;
mod srh;

use std::fmt;
use std::net::{Ipv4Addr, Ipv6Addr};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::InnerKind;

pub use behavior::{
    apply_behavior, verify_transform, ApplyError, BehaviorConfig, DropReason, ForwardAction, MAIN_TABLE,
};
pub use build::{build_test_packet, build_test_packet_at, check_requirement};
pub use codec::{decode, encode};
pub use plan::AddressPlan;
pub use srh::SegmentRoutingHeader;

pub const ETHERNET_HEADER_LEN: usize = 14;
pub const IPV6_HEADER_LEN: usize = 40;
pub const IPV4_HEADER_LEN: usize = 20;
pub const UDP_HEADER_LEN: usize = 8;

pub const ETHERTYPE_IPV4: u16 = 0x0800;
pub const ETHERTYPE_IPV6: u16 = 0x86dd;
/// IEEE local experimental ethertype, used when an Ethernet header is
/// followed by opaque bytes.
pub const ETHERTYPE_EXPERIMENTAL: u16 = 0x88b5;

pub const PROTO_IPV4: u8 = 4;
pub const PROTO_UDP: u8 = 17;
pub const PROTO_IPV6: u8 = 41;
pub const PROTO_ROUTING: u8 = 43;
pub const PROTO_NO_NEXT: u8 = 59;
pub const PROTO_ETHERNET: u8 = 143;

pub const DEFAULT_HOP_LIMIT: u8 = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PacketError {
    #[error("malformed packet at offset {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("illegal layer stack: {0}")]
    IllegalNesting(String),
    #[error("field overflow: {0}")]
    Overflow(String),
    #[error("traffic requirement violated: {0}")]
    RequirementViolation(String),
    #[error("inner packet of {size} B cannot hold the {needed} B of headers for {kind:?}")]
    InnerTooSmall {
        kind: InnerKind,
        size: usize,
        needed: usize,
    },
}

impl PacketError {
    pub(crate) fn malformed(offset: usize, reason: impl Into<String>) -> Self {
        PacketError::Malformed {
            offset,
            reason: reason.into(),
        }
    }
}

/// 128-bit segment identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Sid(Ipv6Addr);

impl Sid {
    pub const fn new(addr: Ipv6Addr) -> Self {
        Sid(addr)
    }

    pub fn addr(self) -> Ipv6Addr {
        self.0
    }

    pub fn octets(self) -> [u8; 16] {
        self.0.octets()
    }
}

impl From<Ipv6Addr> for Sid {
    fn from(a: Ipv6Addr) -> Self {
        Sid(a)
    }
}

impl From<[u8; 16]> for Sid {
    fn from(b: [u8; 16]) -> Self {
        Sid(Ipv6Addr::from(b))
    }
}

impl From<Sid> for String {
    fn from(s: Sid) -> Self {
        s.to_string()
    }
}

impl TryFrom<String> for Sid {
    type Error = std::net::AddrParseError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl FromStr for Sid {
    type Err = std::net::AddrParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Sid(s.parse()?))
    }
}

impl fmt::Display for Sid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MacAddr(pub [u8; 6]);

impl fmt::Display for MacAddr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[0], b[1], b[2], b[3], b[4], b[5]
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EthernetHeader {
    pub dst: MacAddr,
    pub src: MacAddr,
    pub ethertype: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ipv6Header {
    pub traffic_class: u8,
    /// 20-bit flow label.
    pub flow_label: u32,
    pub payload_length: u16,
    pub next_header: u8,
    pub hop_limit: u8,
    pub src: Ipv6Addr,
    pub dst: Ipv6Addr,
}

impl Ipv6Header {
    pub fn new(src: Ipv6Addr, dst: Ipv6Addr) -> Self {
        Self {
            traffic_class: 0,
            flow_label: 0,
            payload_length: 0,
            next_header: PROTO_NO_NEXT,
            hop_limit: DEFAULT_HOP_LIMIT,
            src,
            dst,
        }
    }
}

/// Option-less IPv4 header. The checksum is not stored; it is computed on
/// encode and verified on decode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ipv4Header {
    pub dscp_ecn: u8,
    pub total_length: u16,
    pub identification: u16,
    /// Flags (3 bits) and fragment offset (13 bits).
    pub flags_fragment: u16,
    pub ttl: u8,
    pub protocol: u8,
    pub src: Ipv4Addr,
    pub dst: Ipv4Addr,
}

impl Ipv4Header {
    pub fn new(src: Ipv4Addr, dst: Ipv4Addr, protocol: u8) -> Self {
        Self {
            dscp_ecn: 0,
            total_length: IPV4_HEADER_LEN as u16,
            identification: 0,
            // don't fragment
            flags_fragment: 0x4000,
            ttl: DEFAULT_HOP_LIMIT,
            protocol,
            src,
            dst,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Ethernet(EthernetHeader),
    Ipv6(Ipv6Header),
    Srh(SegmentRoutingHeader),
    Ipv4(Ipv4Header),
    Payload(Vec<u8>),
}

impl Layer {
    pub fn len(&self) -> usize {
        match self {
            Layer::Ethernet(_) => ETHERNET_HEADER_LEN,
            Layer::Ipv6(_) => IPV6_HEADER_LEN,
            Layer::Srh(srh) => srh.encoded_len(),
            Layer::Ipv4(_) => IPV4_HEADER_LEN,
            Layer::Payload(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Layer::Ethernet(_) => "ethernet",
            Layer::Ipv6(_) => "ipv6",
            Layer::Srh(_) => "srh",
            Layer::Ipv4(_) => "ipv4",
            Layer::Payload(_) => "payload",
        }
    }
}

/// A complete Ethernet frame described as a stack of layers, outermost
/// first.
///
/// Construction derives every length and next-protocol field from the
/// stack, so a template always encodes to a self-consistent frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketTemplate {
    layers: Vec<Layer>,
}

impl PacketTemplate {
    pub fn new(mut layers: Vec<Layer>) -> Result<Self, PacketError> {
        if matches!(layers.last(), Some(Layer::Payload(p)) if p.is_empty()) {
            layers.pop();
        }
        check_nesting(&layers)?;
        seal(&mut layers)?;
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<Layer> {
        self.layers
    }

    /// Frame size in bytes: every layer including the Ethernet header,
    /// excluding CRC.
    pub fn frame_size(&self) -> usize {
        self.layers.iter().map(Layer::len).sum()
    }

    pub fn ip_packet_size(&self) -> usize {
        self.frame_size() - ETHERNET_HEADER_LEN
    }

    pub fn ethernet(&self) -> &EthernetHeader {
        match &self.layers[0] {
            Layer::Ethernet(e) => e,
            _ => unreachable!("nesting check guarantees an outer Ethernet header"),
        }
    }

    /// Outer IPv6 header, if the frame carries IPv6 directly.
    pub fn outer_ipv6(&self) -> Option<&Ipv6Header> {
        match self.layers.get(1) {
            Some(Layer::Ipv6(h)) => Some(h),
            _ => None,
        }
    }

    /// SRH immediately following the outer IPv6 header.
    pub fn srh(&self) -> Option<&SegmentRoutingHeader> {
        match (self.layers.get(1), self.layers.get(2)) {
            (Some(Layer::Ipv6(_)), Some(Layer::Srh(s))) => Some(s),
            _ => None,
        }
    }

    /// Index of the first layer after the outer IPv6 header and its SRH.
    pub(crate) fn after_outer_ipv6(&self) -> usize {
        if self.srh().is_some() {
            3
        } else {
            2
        }
    }

    /// The packet is SRv6-encapsulated: the outer IPv6 header carries
    /// another packet or frame.
    pub fn is_encapsulated(&self) -> bool {
        self.outer_ipv6().is_some()
            && matches!(
                self.layers.get(self.after_outer_ipv6()),
                Some(Layer::Ipv6(_) | Layer::Ipv4(_) | Layer::Ethernet(_))
            )
    }

    /// Kind of the encapsulated packet, when encapsulated.
    pub fn inner_kind(&self) -> Option<InnerKind> {
        if !self.is_encapsulated() {
            return None;
        }
        match self.layers.get(self.after_outer_ipv6()) {
            Some(Layer::Ipv6(_)) => Some(InnerKind::Ipv6),
            Some(Layer::Ipv4(_)) => Some(InnerKind::Ipv4),
            Some(Layer::Ethernet(_)) => Some(InnerKind::Ethernet),
            _ => None,
        }
    }

    /// Hex dump, 16 bytes per line with offsets.
    pub fn hex_dump(&self) -> String {
        let bytes = encode(self);
        let mut out = String::with_capacity(bytes.len() * 3 + bytes.len() / 16 * 8);
        for (i, chunk) in bytes.chunks(16).enumerate() {
            out.push_str(&format!("{:04x}:", i * 16));
            for b in chunk {
                out.push_str(&format!(" {b:02x}"));
            }
            out.push('\n');
        }
        out
    }
}

fn check_nesting(layers: &[Layer]) -> Result<(), PacketError> {
    match layers.first() {
        Some(Layer::Ethernet(_)) => {}
        Some(other) => {
            return Err(PacketError::IllegalNesting(format!(
                "outermost layer must be ethernet, found {}",
                other.kind()
            )))
        }
        None => return Err(PacketError::IllegalNesting("empty layer stack".into())),
    }
    for pair in layers.windows(2) {
        let ok = match (&pair[0], &pair[1]) {
            (Layer::Payload(_), _) => false,
            (_, Layer::Payload(_)) => true,
            (Layer::Ethernet(_), next) => matches!(next, Layer::Ipv6(_) | Layer::Ipv4(_)),
            (Layer::Ipv6(_), _) => true,
            (Layer::Srh(_), next) => !matches!(next, Layer::Srh(_)),
            (Layer::Ipv4(_), _) => false,
        };
        if !ok {
            return Err(PacketError::IllegalNesting(format!(
                "{} cannot follow {}",
                pair[1].kind(),
                pair[0].kind()
            )));
        }
    }
    Ok(())
}

fn next_protocol(next: Option<&Layer>, current: u8) -> u8 {
    match next {
        Some(Layer::Ipv6(_)) => PROTO_IPV6,
        Some(Layer::Ipv4(_)) => PROTO_IPV4,
        Some(Layer::Srh(_)) => PROTO_ROUTING,
        Some(Layer::Ethernet(_)) => PROTO_ETHERNET,
        // opaque bytes must not claim a protocol the decoder would parse
        Some(Layer::Payload(_)) | None => match current {
            PROTO_IPV6 | PROTO_IPV4 | PROTO_ROUTING | PROTO_ETHERNET => PROTO_NO_NEXT,
            other => other,
        },
    }
}

fn seal(layers: &mut [Layer]) -> Result<(), PacketError> {
    let mut trailing = 0usize;
    for i in (0..layers.len()).rev() {
        let (head, tail) = layers.split_at_mut(i + 1);
        let next = tail.first();
        match &mut head[i] {
            Layer::Ethernet(e) => {
                e.ethertype = match next {
                    Some(Layer::Ipv6(_)) => ETHERTYPE_IPV6,
                    Some(Layer::Ipv4(_)) => ETHERTYPE_IPV4,
                    _ => match e.ethertype {
                        ETHERTYPE_IPV6 | ETHERTYPE_IPV4 => ETHERTYPE_EXPERIMENTAL,
                        other => other,
                    },
                };
            }
            Layer::Ipv6(h) => {
                h.next_header = next_protocol(next, h.next_header);
                h.payload_length = u16::try_from(trailing)
                    .map_err(|_| PacketError::Overflow(format!("IPv6 payload of {trailing} B exceeds 65535")))?;
                h.flow_label &= 0x000f_ffff;
            }
            Layer::Srh(s) => {
                s.next_header = next_protocol(next, s.next_header);
                s.validate()?;
            }
            Layer::Ipv4(h) => {
                h.total_length = u16::try_from(trailing + IPV4_HEADER_LEN)
                    .map_err(|_| PacketError::Overflow(format!("IPv4 packet of {trailing} B exceeds 65535")))?;
            }
            Layer::Payload(_) => {}
        }
        trailing += head[i].len();
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use proptest::prelude::*;

    pub fn sid_strategy() -> impl Strategy<Value = Sid> {
        any::<[u8; 16]>().prop_map(Sid::from)
    }

    pub fn mac_strategy() -> impl Strategy<Value = MacAddr> {
        any::<[u8; 6]>().prop_map(MacAddr)
    }

    pub fn ipv6_strategy() -> impl Strategy<Value = Ipv6Header> {
        (
            any::<u8>(),
            0u32..(1 << 20),
            any::<u8>(),
            any::<u8>(),
            any::<[u8; 16]>(),
            any::<[u8; 16]>(),
        )
            .prop_map(|(tc, fl, nh, hl, s, d)| Ipv6Header {
                traffic_class: tc,
                flow_label: fl,
                payload_length: 0,
                next_header: nh,
                hop_limit: hl,
                src: s.into(),
                dst: d.into(),
            })
    }

    pub fn ipv4_strategy() -> impl Strategy<Value = Ipv4Header> {
        (
            any::<u8>(),
            any::<u16>(),
            any::<u16>(),
            any::<u8>(),
            any::<u8>(),
            any::<[u8; 4]>(),
            any::<[u8; 4]>(),
        )
            .prop_map(|(tos, id, ff, ttl, proto, s, d)| Ipv4Header {
                dscp_ecn: tos,
                total_length: 0,
                identification: id,
                flags_fragment: ff,
                ttl,
                protocol: proto,
                src: s.into(),
                dst: d.into(),
            })
    }

    pub fn srh_strategy() -> impl Strategy<Value = SegmentRoutingHeader> {
        (
            prop::collection::vec(sid_strategy(), 1..8),
            any::<u8>(),
            any::<u16>(),
            any::<u8>(),
        )
            .prop_flat_map(|(segs, flags, tag, nh)| {
                let n = segs.len();
                (0..n as u8).prop_map(move |sl| SegmentRoutingHeader {
                    next_header: nh,
                    segments_left: sl,
                    flags,
                    tag,
                    segments: segs.clone(),
                })
            })
    }

    /// Random legal layer stacks: Ethernet, then any mix of IP layers and
    /// SRHs respecting the nesting rules, optionally ending in payload.
    pub fn template_strategy() -> impl Strategy<Value = PacketTemplate> {
        let eth = || {
            (mac_strategy(), mac_strategy(), any::<u16>()).prop_map(|(d, s, t)| EthernetHeader {
                dst: d,
                src: s,
                ethertype: t,
            })
        };
        let ip6 = prop_oneof![
            ipv6_strategy().prop_map(|h| vec![Layer::Ipv6(h)]),
            (ipv6_strategy(), srh_strategy()).prop_map(|(h, s)| vec![Layer::Ipv6(h), Layer::Srh(s)]),
        ];
        let tail = prop_oneof![
            Just(vec![]),
            ipv4_strategy().prop_map(|h| vec![Layer::Ipv4(h)]),
            ipv6_strategy().prop_map(|h| vec![Layer::Ipv6(h)]),
        ];
        (
            eth(),
            prop::collection::vec(ip6, 0..3),
            prop::option::of(eth()),
            tail,
            prop::collection::vec(any::<u8>(), 0..64),
        )
            .prop_map(|(e, ip6s, inner_eth, tail, payload)| {
                let mut layers = vec![Layer::Ethernet(e)];
                let has_ip6 = !ip6s.is_empty();
                for group in ip6s {
                    layers.extend(group);
                }
                if let (true, Some(ie)) = (has_ip6, inner_eth) {
                    layers.push(Layer::Ethernet(ie));
                }
                layers.extend(tail);
                layers.push(Layer::Payload(payload));
                PacketTemplate::new(layers).expect("strategy builds legal stacks")
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eth() -> Layer {
        Layer::Ethernet(EthernetHeader {
            dst: MacAddr([2, 0, 0, 0, 0, 2]),
            src: MacAddr([2, 0, 0, 0, 0, 1]),
            ethertype: 0,
        })
    }

    fn ip6() -> Layer {
        Layer::Ipv6(Ipv6Header::new(Ipv6Addr::LOCALHOST, Ipv6Addr::LOCALHOST))
    }

    #[test]
    fn nesting_rules() {
        assert!(PacketTemplate::new(vec![ip6()]).is_err());
        assert!(PacketTemplate::new(vec![]).is_err());
        let srh = Layer::Srh(SegmentRoutingHeader::new(vec![Sid::from([1; 16])], 0).unwrap());
        assert!(PacketTemplate::new(vec![eth(), srh.clone()]).is_err());
        assert!(PacketTemplate::new(vec![eth(), ip6(), srh.clone(), srh.clone()]).is_err());
        assert!(PacketTemplate::new(vec![eth(), Layer::Payload(vec![1]), ip6()]).is_err());
        assert!(PacketTemplate::new(vec![eth(), eth()]).is_err());
        let p = PacketTemplate::new(vec![eth(), ip6(), srh, ip6(), Layer::Payload(vec![0; 24])]).unwrap();
        assert_eq!(p.frame_size(), 14 + 40 + 24 + 40 + 24);
        assert_eq!(p.inner_kind(), Some(InnerKind::Ipv6));
    }

    #[test]
    fn seal_derives_lengths_and_protocols() {
        let p = PacketTemplate::new(vec![eth(), ip6(), ip6(), Layer::Payload(vec![0; 10])]).unwrap();
        let Layer::Ethernet(e) = &p.layers()[0] else { panic!() };
        assert_eq!(e.ethertype, ETHERTYPE_IPV6);
        let Layer::Ipv6(outer) = &p.layers()[1] else { panic!() };
        assert_eq!(outer.next_header, PROTO_IPV6);
        assert_eq!(outer.payload_length, 50);
        let Layer::Ipv6(inner) = &p.layers()[2] else { panic!() };
        assert_eq!(inner.payload_length, 10);
        assert_eq!(inner.next_header, PROTO_NO_NEXT);
    }

    #[test]
    fn empty_trailing_payload_is_dropped() {
        let p = PacketTemplate::new(vec![eth(), ip6(), Layer::Payload(vec![])]).unwrap();
        assert_eq!(p.layers().len(), 2);
    }

    #[test]
    fn sid_text_form() {
        let s: Sid = "fcf0:0:1::1".parse().unwrap();
        assert_eq!(s.to_string(), "fcf0:0:1::1");
        assert_eq!(serde_json::to_string(&s).unwrap(), "\"fcf0:0:1::1\"");
    }
}
