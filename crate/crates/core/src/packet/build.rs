use super::codec::{fold, sum_words};
use super::*;
use crate::catalog::TrafficRequirement;

fn violation(msg: impl Into<String>) -> PacketError {
    PacketError::RequirementViolation(msg.into())
}

fn udp_datagram(len: usize, pseudo_sum: u32, src_port: u16, dst_port: u16) -> Vec<u8> {
    let mut d = Vec::with_capacity(len);
    d.extend_from_slice(&src_port.to_be_bytes());
    d.extend_from_slice(&dst_port.to_be_bytes());
    d.extend_from_slice(&(len as u16).to_be_bytes());
    d.extend_from_slice(&[0, 0]);
    d.extend((0..len - UDP_HEADER_LEN).map(|i| i as u8));
    let mut csum = !fold(sum_words(&d, pseudo_sum));
    if csum == 0 {
        csum = 0xffff;
    }
    d[6..8].copy_from_slice(&csum.to_be_bytes());
    d
}

fn ipv6_udp(plan: &AddressPlan, size: usize) -> Vec<Layer> {
    let udp_len = size - IPV6_HEADER_LEN;
    let mut pseudo = Vec::with_capacity(40);
    pseudo.extend_from_slice(&plan.tg_src6.octets());
    pseudo.extend_from_slice(&plan.inner_dst6.octets());
    pseudo.extend_from_slice(&(udp_len as u32).to_be_bytes());
    pseudo.extend_from_slice(&[0, 0, 0, PROTO_UDP]);
    let mut h = Ipv6Header::new(plan.tg_src6, plan.inner_dst6);
    h.next_header = PROTO_UDP;
    vec![
        Layer::Ipv6(h),
        Layer::Payload(udp_datagram(
            udp_len,
            sum_words(&pseudo, 0),
            plan.udp_src_port,
            plan.udp_dst_port,
        )),
    ]
}

fn ipv4_udp(plan: &AddressPlan, size: usize) -> Vec<Layer> {
    let udp_len = size - IPV4_HEADER_LEN;
    let mut pseudo = Vec::with_capacity(12);
    pseudo.extend_from_slice(&plan.tg_src4.octets());
    pseudo.extend_from_slice(&plan.inner_dst4.octets());
    pseudo.extend_from_slice(&[0, PROTO_UDP]);
    pseudo.extend_from_slice(&(udp_len as u16).to_be_bytes());
    vec![
        Layer::Ipv4(Ipv4Header::new(plan.tg_src4, plan.inner_dst4, PROTO_UDP)),
        Layer::Payload(udp_datagram(
            udp_len,
            sum_words(&pseudo, 0),
            plan.udp_src_port,
            plan.udp_dst_port,
        )),
    ]
}

fn ethernet(plan: &AddressPlan) -> Layer {
    Layer::Ethernet(EthernetHeader {
        dst: plan.sut_rx_mac,
        src: plan.tg_tx_mac,
        ethertype: 0,
    })
}

/// Layers of the inner packet (or, for Ethernet, the whole inner frame).
fn inner_layers(req: &TrafficRequirement, plan: &AddressPlan) -> Result<Vec<Layer>, PacketError> {
    let size = req.inner_packet_size;
    let needed = match req.inner_kind {
        InnerKind::Ipv6 => IPV6_HEADER_LEN + UDP_HEADER_LEN,
        InnerKind::Ipv4 => IPV4_HEADER_LEN + UDP_HEADER_LEN,
        InnerKind::Ethernet => ETHERNET_HEADER_LEN + IPV6_HEADER_LEN + UDP_HEADER_LEN,
    };
    if size < needed || size > usize::from(u16::MAX) {
        return Err(PacketError::InnerTooSmall {
            kind: req.inner_kind,
            size,
            needed,
        });
    }
    Ok(match req.inner_kind {
        InnerKind::Ipv6 => ipv6_udp(plan, size),
        InnerKind::Ipv4 => ipv4_udp(plan, size),
        InnerKind::Ethernet => {
            let mut l = vec![ethernet(plan)];
            l.extend(ipv6_udp(plan, size - ETHERNET_HEADER_LEN));
            l
        }
    })
}

/// Builds the packet to replay for a behavior with the default address
/// plan. `sid_plan` is in path order; by default the first segment is
/// active for segment-advancing behaviors and the last one for the rest.
pub fn build_test_packet(req: &TrafficRequirement, sid_plan: &[Sid]) -> Result<PacketTemplate, PacketError> {
    let sl = if req.active_sid_must_not_be_last {
        sid_plan.len().saturating_sub(1)
    } else {
        0
    };
    build_test_packet_at(req, sid_plan, sl, &AddressPlan::default())
}

/// Like [`build_test_packet`] with an explicit segments-left value and
/// address plan.
pub fn build_test_packet_at(
    req: &TrafficRequirement,
    sid_plan: &[Sid],
    segments_left: usize,
    plan: &AddressPlan,
) -> Result<PacketTemplate, PacketError> {
    let inner = inner_layers(req, plan)?;
    if !req.needs_srv6_encap {
        let layers = match req.inner_kind {
            InnerKind::Ethernet => inner,
            _ => std::iter::once(ethernet(plan)).chain(inner).collect(),
        };
        return PacketTemplate::new(layers);
    }

    let n = sid_plan.len();
    if n == 0 || n < req.min_sids {
        return Err(violation(format!(
            "{n} SIDs supplied, at least {} required",
            req.min_sids.max(1)
        )));
    }
    if segments_left >= n {
        return Err(violation(format!(
            "segments left {segments_left} out of range for {n} SIDs"
        )));
    }
    if req.active_sid_must_not_be_last && segments_left == 0 {
        return Err(violation("active SID must not be the last SID"));
    }
    let segments: Vec<Sid> = sid_plan.iter().rev().copied().collect();
    let active = segments[segments_left];

    let mut layers = vec![
        ethernet(plan),
        Layer::Ipv6(Ipv6Header::new(plan.tg_src6, active.addr())),
    ];
    if n > 1 || req.active_sid_must_not_be_last {
        let sl = u8::try_from(segments_left).map_err(|_| violation("too many SIDs"))?;
        layers.push(Layer::Srh(SegmentRoutingHeader::new(segments, sl)?));
    }
    layers.extend(inner);
    PacketTemplate::new(layers)
}

/// Checks that a template has the shape a behavior's traffic requirement
/// asks for.
pub fn check_requirement(req: &TrafficRequirement, p: &PacketTemplate) -> Result<(), PacketError> {
    if !req.needs_srv6_encap {
        if p.is_encapsulated() || p.srh().is_some() {
            return Err(violation("headend traffic must not be SRv6-encapsulated"));
        }
        let ok = matches!(
            (req.inner_kind, p.layers().get(1)),
            (InnerKind::Ipv6, Some(Layer::Ipv6(_)))
                | (InnerKind::Ipv4, Some(Layer::Ipv4(_)))
                | (InnerKind::Ethernet, Some(Layer::Ipv6(_) | Layer::Ipv4(_)))
        );
        if !ok {
            return Err(violation(format!("expected a bare {:?} packet", req.inner_kind)));
        }
        return Ok(());
    }

    let outer = p
        .outer_ipv6()
        .ok_or_else(|| violation("expected an outer IPv6 header"))?;
    match p.inner_kind() {
        Some(k) if k == req.inner_kind => {}
        Some(k) => {
            return Err(violation(format!(
                "inner packet is {k:?}, expected {:?}",
                req.inner_kind
            )))
        }
        None => return Err(violation("packet is not SRv6-encapsulated")),
    }
    let (sids, sl, active) = match p.srh() {
        Some(s) => (s.segments.len(), usize::from(s.segments_left), s.active_segment()),
        None => (1, 0, Sid::new(outer.dst)),
    };
    if sids < req.min_sids {
        return Err(violation(format!(
            "{sids} SIDs present, at least {} required",
            req.min_sids
        )));
    }
    if req.active_sid_must_not_be_last && sl == 0 {
        return Err(violation("active SID must not be the last SID"));
    }
    if active.addr() != outer.dst {
        return Err(violation(format!(
            "destination {} is not the active SID {active}",
            outer.dst
        )));
    }
    Ok(())
}
