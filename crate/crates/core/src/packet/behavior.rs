//! Forwarding semantics of the implemented SRv6 behaviors, applied to
//! templates, plus an independent byte-level checker for the results.

use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::*;
use crate::catalog::BehaviorId;

/// Linux main routing table id.
pub const MAIN_TABLE: u32 = 254;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ApplyError {
    #[error("no forwarding semantics implemented for {0}")]
    NoSemantics(BehaviorId),
    #[error("cannot advance: {0}")]
    CannotAdvance(String),
    #[error("type mismatch: expected {expected}, found {found}")]
    TypeMismatch { expected: String, found: String },
    #[error("decapsulation requires segments left = 0, found {0}")]
    SegmentsLeftNonZero(u8),
    #[error("headend policy has no segments")]
    EmptyPolicy,
    #[error(transparent)]
    Packet(#[from] PacketError),
}

fn mismatch(expected: impl Into<String>, found: impl Into<String>) -> ApplyError {
    ApplyError::TypeMismatch {
        expected: expected.into(),
        found: found.into(),
    }
}

/// Parameters a behavior instance is configured with on the SUT.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorConfig {
    /// Headend policy segments, in path order.
    pub segments: Vec<Sid>,
    /// Source address of outer IPv6 headers added by encapsulation.
    pub tunnel_source: Ipv6Addr,
    /// Lookup table for End.T and End.DT*.
    pub table: u32,
    pub nexthop6: Ipv6Addr,
    pub nexthop4: Ipv4Addr,
    /// Output interface for cross-connect behaviors.
    pub interface: String,
}

impl BehaviorConfig {
    pub fn from_plan(plan: &AddressPlan, policy_len: usize, interface: impl Into<String>) -> Self {
        Self {
            segments: plan.headend_policy(policy_len),
            tunnel_source: plan.tunnel_source,
            table: plan.table,
            nexthop6: plan.nexthop6,
            nexthop4: plan.nexthop4,
            interface: interface.into(),
        }
    }
}

impl Default for BehaviorConfig {
    fn default() -> Self {
        Self::from_plan(&AddressPlan::default(), 1, "eth2")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    HopLimitExceeded,
}

/// What the forwarder does with the transformed packet.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "action")]
pub enum ForwardAction {
    FibLookup { table: u32, destination: IpAddr },
    Xconnect { interface: String, nexthop: Option<IpAddr> },
    Drop { reason: DropReason },
}

impl ForwardAction {
    pub fn is_drop(&self) -> bool {
        matches!(self, ForwardAction::Drop { .. })
    }
}

const HOP_DROP: ForwardAction = ForwardAction::Drop {
    reason: DropReason::HopLimitExceeded,
};

/// Applies `id` to `p`. Returns the packet as it leaves the SUT and the
/// forwarding decision. Packets whose hop limit would reach zero come back
/// unchanged with a drop action.
pub fn apply_behavior(
    id: BehaviorId,
    p: &PacketTemplate,
    cfg: &BehaviorConfig,
) -> Result<(PacketTemplate, ForwardAction), ApplyError> {
    use BehaviorId::*;
    match id {
        End | EndT | EndX => advance(id, p, cfg),
        EndDT6 | EndDT4 | EndDX6 | EndDX4 | EndDX2 => decapsulate(id, p, cfg),
        HInsert => insert(p, cfg),
        HEncaps => encapsulate(p, cfg, false),
        HEncapsL2 => encapsulate(p, cfg, true),
        PlainIpv6 | PlainIpv4 => plain(id, p),
        other => Err(ApplyError::NoSemantics(other)),
    }
}

fn advance(
    id: BehaviorId,
    p: &PacketTemplate,
    cfg: &BehaviorConfig,
) -> Result<(PacketTemplate, ForwardAction), ApplyError> {
    let mut layers = p.layers().to_vec();
    let (Some(Layer::Ipv6(outer)), Some(Layer::Srh(srh))) = (layers.get(1), layers.get(2)) else {
        return Err(ApplyError::CannotAdvance("packet carries no SRH".into()));
    };
    if srh.segments_left == 0 {
        return Err(ApplyError::CannotAdvance("segments left is 0".into()));
    }
    if outer.hop_limit <= 1 {
        return Ok((p.clone(), HOP_DROP));
    }
    let sl = srh.segments_left - 1;
    let next = srh.segments[usize::from(sl)];
    if let Layer::Srh(s) = &mut layers[2] {
        s.segments_left = sl;
    }
    if let Layer::Ipv6(h) = &mut layers[1] {
        h.dst = next.addr();
        h.hop_limit -= 1;
    }
    let action = match id {
        BehaviorId::EndT => ForwardAction::FibLookup {
            table: cfg.table,
            destination: next.addr().into(),
        },
        BehaviorId::EndX => ForwardAction::Xconnect {
            interface: cfg.interface.clone(),
            nexthop: Some(cfg.nexthop6.into()),
        },
        _ => ForwardAction::FibLookup {
            table: MAIN_TABLE,
            destination: next.addr().into(),
        },
    };
    Ok((PacketTemplate::new(layers)?, action))
}

fn decapsulate(
    id: BehaviorId,
    p: &PacketTemplate,
    cfg: &BehaviorConfig,
) -> Result<(PacketTemplate, ForwardAction), ApplyError> {
    let expected = match id {
        BehaviorId::EndDT6 | BehaviorId::EndDX6 => InnerKind::Ipv6,
        BehaviorId::EndDT4 | BehaviorId::EndDX4 => InnerKind::Ipv4,
        _ => InnerKind::Ethernet,
    };
    match p.inner_kind() {
        Some(k) if k == expected => {}
        Some(k) => return Err(mismatch(format!("inner {expected:?}"), format!("inner {k:?}"))),
        None => {
            return Err(mismatch(
                format!("SRv6-encapsulated {expected:?}"),
                "unencapsulated packet",
            ))
        }
    }
    if let Some(srh) = p.srh() {
        if srh.segments_left != 0 {
            return Err(ApplyError::SegmentsLeftNonZero(srh.segments_left));
        }
    }
    let outer = p.outer_ipv6().expect("encapsulated packets have an outer IPv6 header");
    if outer.hop_limit <= 1 {
        return Ok((p.clone(), HOP_DROP));
    }
    let inner = &p.layers()[p.after_outer_ipv6()..];
    let layers: Vec<Layer> = if expected == InnerKind::Ethernet {
        inner.to_vec()
    } else {
        std::iter::once(p.layers()[0].clone())
            .chain(inner.iter().cloned())
            .collect()
    };
    let action = match (id, &inner[0]) {
        (BehaviorId::EndDT6, Layer::Ipv6(h)) => ForwardAction::FibLookup {
            table: cfg.table,
            destination: h.dst.into(),
        },
        (BehaviorId::EndDT4, Layer::Ipv4(h)) => ForwardAction::FibLookup {
            table: cfg.table,
            destination: h.dst.into(),
        },
        (BehaviorId::EndDX6, _) => ForwardAction::Xconnect {
            interface: cfg.interface.clone(),
            nexthop: Some(cfg.nexthop6.into()),
        },
        (BehaviorId::EndDX4, _) => ForwardAction::Xconnect {
            interface: cfg.interface.clone(),
            nexthop: Some(cfg.nexthop4.into()),
        },
        _ => ForwardAction::Xconnect {
            interface: cfg.interface.clone(),
            nexthop: None,
        },
    };
    Ok((PacketTemplate::new(layers)?, action))
}

fn insert(p: &PacketTemplate, cfg: &BehaviorConfig) -> Result<(PacketTemplate, ForwardAction), ApplyError> {
    let Some(ip) = p.outer_ipv6() else {
        return Err(mismatch("IPv6 packet", "non-IPv6 packet"));
    };
    if p.srh().is_some() {
        return Err(mismatch("IPv6 packet without SRH", "packet with SRH"));
    }
    let first = *cfg.segments.first().ok_or(ApplyError::EmptyPolicy)?;
    if ip.hop_limit <= 1 {
        return Ok((p.clone(), HOP_DROP));
    }
    let mut segments = vec![Sid::new(ip.dst)];
    segments.extend(cfg.segments.iter().rev());
    let sl = u8::try_from(cfg.segments.len()).map_err(|_| PacketError::Overflow("policy too long".into()))?;
    let mut srh = SegmentRoutingHeader::new(segments, sl)?;
    srh.next_header = ip.next_header;

    let mut header = *ip;
    header.dst = first.addr();
    header.hop_limit -= 1;
    let mut layers = vec![p.layers()[0].clone(), Layer::Ipv6(header), Layer::Srh(srh)];
    layers.extend(p.layers()[2..].iter().cloned());
    let action = ForwardAction::FibLookup {
        table: MAIN_TABLE,
        destination: first.addr().into(),
    };
    Ok((PacketTemplate::new(layers)?, action))
}

fn encapsulate(
    p: &PacketTemplate,
    cfg: &BehaviorConfig,
    l2: bool,
) -> Result<(PacketTemplate, ForwardAction), ApplyError> {
    let first = *cfg.segments.first().ok_or(ApplyError::EmptyPolicy)?;
    let inner: &[Layer] = if l2 {
        p.layers()
    } else {
        match p.layers().get(1) {
            Some(Layer::Ipv6(_) | Layer::Ipv4(_)) => &p.layers()[1..],
            _ => return Err(mismatch("IP packet", "non-IP frame")),
        }
    };
    let mut layers = vec![
        p.layers()[0].clone(),
        Layer::Ipv6(Ipv6Header::new(cfg.tunnel_source, first.addr())),
    ];
    if cfg.segments.len() > 1 {
        layers.push(Layer::Srh(SegmentRoutingHeader::from_path(&cfg.segments)?));
    }
    layers.extend(inner.iter().cloned());
    let action = ForwardAction::FibLookup {
        table: MAIN_TABLE,
        destination: first.addr().into(),
    };
    Ok((PacketTemplate::new(layers)?, action))
}

fn plain(id: BehaviorId, p: &PacketTemplate) -> Result<(PacketTemplate, ForwardAction), ApplyError> {
    let mut layers = p.layers().to_vec();
    let destination: IpAddr = match (id, &mut layers[1]) {
        (BehaviorId::PlainIpv6, Layer::Ipv6(h)) => {
            if h.hop_limit <= 1 {
                return Ok((p.clone(), HOP_DROP));
            }
            h.hop_limit -= 1;
            h.dst.into()
        }
        (BehaviorId::PlainIpv4, Layer::Ipv4(h)) => {
            if h.ttl <= 1 {
                return Ok((p.clone(), HOP_DROP));
            }
            h.ttl -= 1;
            h.dst.into()
        }
        (_, other) => return Err(mismatch(id.name(), other.kind())),
    };
    Ok((
        PacketTemplate::new(layers)?,
        ForwardAction::FibLookup {
            table: MAIN_TABLE,
            destination,
        },
    ))
}

/// Offset of the first byte after the outer IPv6 header and its SRH, read
/// straight from the wire bytes.
fn wire_inner_offset(b: &[u8]) -> usize {
    let base = ETHERNET_HEADER_LEN + IPV6_HEADER_LEN;
    if b[ETHERNET_HEADER_LEN + 6] == PROTO_ROUTING {
        base + 8 + 8 * usize::from(b[base + 1])
    } else {
        base
    }
}

/// Checks the wire bytes of a transform's result against what the
/// behavior must have done to the input, without going through the
/// template layer model. Returns one message per violated property.
pub fn verify_transform(
    id: BehaviorId,
    input: &PacketTemplate,
    output: &PacketTemplate,
    action: &ForwardAction,
) -> Vec<String> {
    let a = encode(input);
    let b = encode(output);
    let mut v = Vec::new();
    let mut check = |ok: bool, what: &str| {
        if !ok {
            v.push(format!("{id}: {what}"));
        }
    };
    if action.is_drop() {
        check(a == b, "dropped packet was modified");
        return v;
    }
    const IP: usize = ETHERNET_HEADER_LEN;
    const SRH: usize = IP + IPV6_HEADER_LEN;
    use BehaviorId::*;
    match id {
        End | EndT | EndX => {
            check(a.len() == b.len(), "length changed");
            if a.len() != b.len() || a.len() < SRH + 8 {
                return v;
            }
            check(b[IP + 7] + 1 == a[IP + 7], "hop limit not decremented");
            check(b[SRH + 3] + 1 == a[SRH + 3], "segments left not decremented");
            let sl = usize::from(b[SRH + 3]);
            let seg = SRH + 8 + 16 * sl;
            check(
                b[IP + 24..IP + 40] == b[seg..seg + 16],
                "destination is not the new active segment",
            );
            let same = |r: std::ops::Range<usize>| a[r.clone()] == b[r];
            check(same(0..IP + 7) && same(IP + 8..IP + 24), "outer header bytes changed");
            check(
                same(SRH..SRH + 3) && same(SRH + 4..a.len()),
                "SRH segments or payload changed",
            );
        }
        EndDT6 | EndDT4 | EndDX6 | EndDX4 => {
            let off = wire_inner_offset(&a);
            check(b.len() >= IP && b[..12] == a[..12], "Ethernet addresses changed");
            check(
                b.len() >= IP && b[IP..] == a[off..],
                "inner packet not exposed byte for byte",
            );
        }
        EndDX2 => {
            check(
                b[..] == a[wire_inner_offset(&a)..],
                "inner frame not exposed byte for byte",
            );
        }
        HEncaps => {
            check(b[..12] == a[..12], "Ethernet addresses changed");
            check(
                b[wire_inner_offset(&b)..] == a[IP..],
                "inner packet not carried byte for byte",
            );
        }
        HEncapsL2 => {
            check(
                b[wire_inner_offset(&b)..] == a[..],
                "inner frame not carried byte for byte",
            );
        }
        HInsert => {
            check(b[IP + 6] == PROTO_ROUTING, "no routing header after IPv6");
            check(b.len() > SRH + 24, "no room for an SRH");
            if b.len() <= SRH + 24 {
                return v;
            }
            check(b[SRH] == a[IP + 6], "SRH does not carry the original next header");
            check(
                b[SRH + 8..SRH + 24] == a[IP + 24..IP + 40],
                "original destination is not the last segment",
            );
            check(b[wire_inner_offset(&b)..] == a[SRH..], "payload changed");
            check(b[IP + 7] + 1 == a[IP + 7], "hop limit not decremented");
        }
        PlainIpv6 => {
            check(a.len() == b.len(), "length changed");
            check(b[IP + 7] + 1 == a[IP + 7], "hop limit not decremented");
            check(
                a[..IP + 7] == b[..IP + 7] && a[IP + 8..] == b[IP + 8..],
                "bytes other than hop limit changed",
            );
        }
        PlainIpv4 => {
            check(a.len() == b.len(), "length changed");
            check(b[IP + 8] + 1 == a[IP + 8], "TTL not decremented");
            check(
                codec::internet_checksum(&b[IP..IP + IPV4_HEADER_LEN]) == 0,
                "header checksum invalid",
            );
            check(
                a[..IP + 8] == b[..IP + 8] && a[IP + 12..] == b[IP + 12..],
                "bytes other than TTL/checksum changed",
            );
        }
        other => check(false, &format!("no semantics for {other}")),
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::traffic_requirement;
    use crate::packet::testutil::sid_strategy;
    use proptest::prelude::*;

    fn sid(s: &str) -> Sid {
        s.parse().unwrap()
    }

    fn endpoint_packet(id: BehaviorId) -> PacketTemplate {
        let req = traffic_requirement(id).unwrap();
        build_test_packet(&req, &AddressPlan::default().endpoint_path(id, 2)).unwrap()
    }

    fn headend_packet(id: BehaviorId) -> PacketTemplate {
        build_test_packet(&traffic_requirement(id).unwrap(), &[]).unwrap()
    }

    #[test]
    fn end_moves_to_next_segment() {
        let p = endpoint_packet(BehaviorId::End);
        let before = p.srh().unwrap().clone();
        let (out, action) = apply_behavior(BehaviorId::End, &p, &BehaviorConfig::default()).unwrap();
        let srh = out.srh().unwrap();
        assert_eq!(srh.segments_left, 0);
        assert_eq!(srh.segments, before.segments);
        assert_eq!(out.outer_ipv6().unwrap().dst, before.segments[0].addr());
        assert_eq!(out.outer_ipv6().unwrap().hop_limit, 63);
        assert_eq!(
            action,
            ForwardAction::FibLookup {
                table: MAIN_TABLE,
                destination: before.segments[0].addr().into()
            }
        );
        assert!(verify_transform(BehaviorId::End, &p, &out, &action).is_empty());

        // the packet now has segments left 0 and cannot be advanced again
        assert!(matches!(
            apply_behavior(BehaviorId::End, &out, &BehaviorConfig::default()),
            Err(ApplyError::CannotAdvance(_))
        ));
    }

    #[test]
    fn end_variants_pick_lookup_or_adjacency() {
        let cfg = BehaviorConfig::default();
        let p = endpoint_packet(BehaviorId::EndT);
        let (_, a) = apply_behavior(BehaviorId::EndT, &p, &cfg).unwrap();
        assert!(matches!(a, ForwardAction::FibLookup { table, .. } if table == cfg.table));
        let (_, a) = apply_behavior(BehaviorId::EndX, &p, &cfg).unwrap();
        assert_eq!(
            a,
            ForwardAction::Xconnect {
                interface: cfg.interface.clone(),
                nexthop: Some(cfg.nexthop6.into())
            }
        );
    }

    #[test]
    fn decap_behaviors_expose_inner() {
        let cfg = BehaviorConfig::default();
        for id in [
            BehaviorId::EndDT6,
            BehaviorId::EndDT4,
            BehaviorId::EndDX6,
            BehaviorId::EndDX4,
            BehaviorId::EndDX2,
        ] {
            let p = endpoint_packet(id);
            let (out, action) = apply_behavior(id, &p, &cfg).unwrap();
            assert!(!out.is_encapsulated(), "{id}");
            assert_eq!(out.frame_size(), if id == BehaviorId::EndDX2 { 64 } else { 78 }, "{id}");
            assert!(verify_transform(id, &p, &out, &action).is_empty(), "{id}");
        }
        // wrong inner kind
        let p6 = endpoint_packet(BehaviorId::EndDT6);
        assert!(matches!(
            apply_behavior(BehaviorId::EndDT4, &p6, &cfg),
            Err(ApplyError::TypeMismatch { .. })
        ));
        assert!(matches!(
            apply_behavior(BehaviorId::EndDX2, &p6, &cfg),
            Err(ApplyError::TypeMismatch { .. })
        ));
        let bare = headend_packet(BehaviorId::HEncaps);
        assert!(matches!(
            apply_behavior(BehaviorId::EndDT6, &bare, &cfg),
            Err(ApplyError::TypeMismatch { .. })
        ));
        // still segments to go
        let p = endpoint_packet(BehaviorId::End);
        assert!(matches!(
            apply_behavior(BehaviorId::EndDT6, &p, &cfg),
            Err(ApplyError::SegmentsLeftNonZero(1))
        ));
    }

    #[test]
    fn single_segment_encaps_adds_only_ipv6() {
        let p = headend_packet(BehaviorId::HEncaps);
        let cfg = BehaviorConfig::default();
        let (out, action) = apply_behavior(BehaviorId::HEncaps, &p, &cfg).unwrap();
        assert_eq!(out.frame_size(), p.frame_size() + 40);
        assert!(out.srh().is_none());
        assert_eq!(out.outer_ipv6().unwrap().dst, cfg.segments[0].addr());
        assert!(verify_transform(BehaviorId::HEncaps, &p, &out, &action).is_empty());

        let (back, _) = apply_behavior(BehaviorId::EndDT6, &out, &cfg).unwrap();
        assert_eq!(encode(&back), encode(&p));
    }

    #[test]
    fn l2_encaps_round_trip() {
        let p = headend_packet(BehaviorId::HEncapsL2);
        let cfg = BehaviorConfig::default();
        let (out, _) = apply_behavior(BehaviorId::HEncapsL2, &p, &cfg).unwrap();
        assert_eq!(out.frame_size(), 64 + 14 + 40);
        assert_eq!(out.inner_kind(), Some(InnerKind::Ethernet));
        let (back, _) = apply_behavior(BehaviorId::EndDX2, &out, &cfg).unwrap();
        assert_eq!(encode(&back), encode(&p));
    }

    #[test]
    fn insert_keeps_original_destination_last() {
        let p = headend_packet(BehaviorId::HInsert);
        let orig_dst = p.outer_ipv6().unwrap().dst;
        let cfg = BehaviorConfig {
            segments: vec![sid("fcf0:0:2::1"), sid("fcf0:0:2::2")],
            ..BehaviorConfig::default()
        };
        let (out, action) = apply_behavior(BehaviorId::HInsert, &p, &cfg).unwrap();
        let srh = out.srh().unwrap();
        assert_eq!(
            srh.segments,
            vec![Sid::new(orig_dst), sid("fcf0:0:2::2"), sid("fcf0:0:2::1")]
        );
        assert_eq!(srh.segments_left, 2);
        assert_eq!(srh.next_header, PROTO_UDP);
        assert_eq!(out.outer_ipv6().unwrap().dst, sid("fcf0:0:2::1").addr());
        assert_eq!(out.frame_size(), p.frame_size() + 8 + 16 * 3);
        assert!(verify_transform(BehaviorId::HInsert, &p, &out, &action).is_empty());
        assert!(apply_behavior(BehaviorId::HInsert, &out, &cfg).is_err());
    }

    #[test]
    fn hop_limit_expiry_drops() {
        let p = endpoint_packet(BehaviorId::End);
        let mut layers = p.layers().to_vec();
        if let Layer::Ipv6(h) = &mut layers[1] {
            h.hop_limit = 1;
        }
        let p = PacketTemplate::new(layers).unwrap();
        let (out, action) = apply_behavior(BehaviorId::End, &p, &BehaviorConfig::default()).unwrap();
        assert!(action.is_drop());
        assert_eq!(out, p);
    }

    #[test]
    fn plain_forwarding() {
        for id in [BehaviorId::PlainIpv6, BehaviorId::PlainIpv4] {
            let p = headend_packet(id);
            let (out, action) = apply_behavior(id, &p, &BehaviorConfig::default()).unwrap();
            assert!(verify_transform(id, &p, &out, &action).is_empty(), "{id}");
        }
    }

    #[test]
    fn unimplemented_behaviors_refuse() {
        let p = endpoint_packet(BehaviorId::End);
        assert_eq!(
            apply_behavior(BehaviorId::EndAD, &p, &BehaviorConfig::default()),
            Err(ApplyError::NoSemantics(BehaviorId::EndAD))
        );
    }

    #[test]
    fn checker_flags_tampering() {
        let p = endpoint_packet(BehaviorId::EndDT6);
        let (out, action) = apply_behavior(BehaviorId::EndDT6, &p, &BehaviorConfig::default()).unwrap();
        let mut layers = out.into_layers();
        if let Some(Layer::Payload(b)) = layers.last_mut() {
            b[0] ^= 0xff;
        }
        let bad = PacketTemplate::new(layers).unwrap();
        assert!(!verify_transform(BehaviorId::EndDT6, &p, &bad, &action).is_empty());
    }

    proptest! {
        #[test]
        fn encaps_size_law(path in prop::collection::vec(sid_strategy(), 2..10)) {
            let p = headend_packet(BehaviorId::HEncaps);
            let cfg = BehaviorConfig { segments: path.clone(), ..BehaviorConfig::default() };
            let (out, _) = apply_behavior(BehaviorId::HEncaps, &p, &cfg).unwrap();
            prop_assert_eq!(out.frame_size(), p.frame_size() + 40 + 8 + 16 * path.len());
            let (ins, _) = apply_behavior(BehaviorId::HInsert, &p, &cfg).unwrap();
            prop_assert_eq!(ins.frame_size(), p.frame_size() + 8 + 16 * (path.len() + 1));
        }

        #[test]
        fn encap_transit_decap_restores_inner(
            path in prop::collection::vec(sid_strategy(), 1..8),
            kind in prop_oneof![Just(InnerKind::Ipv6), Just(InnerKind::Ipv4), Just(InnerKind::Ethernet)],
            size in 64usize..600,
        ) {
            let (head, tail) = match kind {
                InnerKind::Ipv6 => (BehaviorId::HEncaps, BehaviorId::EndDT6),
                InnerKind::Ipv4 => (BehaviorId::HEncaps, BehaviorId::EndDT4),
                InnerKind::Ethernet => (BehaviorId::HEncapsL2, BehaviorId::EndDX2),
            };
            let req = traffic_requirement(head).unwrap().with_inner_kind(kind).with_inner_size(size);
            let original = build_test_packet(&req, &[]).unwrap();
            let cfg = BehaviorConfig { segments: path.clone(), ..BehaviorConfig::default() };

            let (mut p, action) = apply_behavior(head, &original, &cfg).unwrap();
            prop_assert!(verify_transform(head, &original, &p, &action).is_empty());
            for _ in 1..path.len() {
                let (next, action) = apply_behavior(BehaviorId::End, &p, &cfg).unwrap();
                prop_assert!(verify_transform(BehaviorId::End, &p, &next, &action).is_empty());
                p = next;
            }
            let (out, action) = apply_behavior(tail, &p, &cfg).unwrap();
            prop_assert!(verify_transform(tail, &p, &out, &action).is_empty());
            let want = encode(&original);
            let got = encode(&out);
            if kind == InnerKind::Ethernet {
                prop_assert_eq!(got, want);
            } else {
                prop_assert_eq!(&got[14..], &want[14..]);
            }
        }
    }
}
