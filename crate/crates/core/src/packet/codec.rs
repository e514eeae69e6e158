use std::net::{Ipv4Addr, Ipv6Addr};

use super::*;

/// Serializes a template to wire bytes (no FCS).
pub fn encode(p: &PacketTemplate) -> Vec<u8> {
    let mut out = Vec::with_capacity(p.frame_size());
    for layer in p.layers() {
        match layer {
            Layer::Ethernet(e) => {
                out.extend_from_slice(&e.dst.0);
                out.extend_from_slice(&e.src.0);
                out.extend_from_slice(&e.ethertype.to_be_bytes());
            }
            Layer::Ipv6(h) => {
                let word = (6u32 << 28) | (u32::from(h.traffic_class) << 20) | (h.flow_label & 0x000f_ffff);
                out.extend_from_slice(&word.to_be_bytes());
                out.extend_from_slice(&h.payload_length.to_be_bytes());
                out.push(h.next_header);
                out.push(h.hop_limit);
                out.extend_from_slice(&h.src.octets());
                out.extend_from_slice(&h.dst.octets());
            }
            Layer::Srh(s) => s.write(&mut out),
            Layer::Ipv4(h) => {
                let start = out.len();
                out.push(0x45);
                out.push(h.dscp_ecn);
                out.extend_from_slice(&h.total_length.to_be_bytes());
                out.extend_from_slice(&h.identification.to_be_bytes());
                out.extend_from_slice(&h.flags_fragment.to_be_bytes());
                out.push(h.ttl);
                out.push(h.protocol);
                out.extend_from_slice(&[0, 0]);
                out.extend_from_slice(&h.src.octets());
                out.extend_from_slice(&h.dst.octets());
                let csum = internet_checksum(&out[start..start + IPV4_HEADER_LEN]);
                out[start + 10..start + 12].copy_from_slice(&csum.to_be_bytes());
            }
            Layer::Payload(b) => out.extend_from_slice(b),
        }
    }
    out
}

/// Ones' complement sum over 16-bit words, complemented.
pub(crate) fn internet_checksum(bytes: &[u8]) -> u16 {
    !fold(sum_words(bytes, 0))
}

pub(crate) fn sum_words(bytes: &[u8], mut acc: u32) -> u32 {
    let mut chunks = bytes.chunks_exact(2);
    for c in &mut chunks {
        acc += u32::from(u16::from_be_bytes([c[0], c[1]]));
    }
    if let [last] = chunks.remainder() {
        acc += u32::from(*last) << 8;
    }
    acc
}

pub(crate) fn fold(mut acc: u32) -> u16 {
    while acc > 0xffff {
        acc = (acc & 0xffff) + (acc >> 16);
    }
    acc as u16
}

enum Next {
    Ethernet,
    Ipv6,
    Ipv4,
    Srh,
    Payload,
}

fn after_ip(proto: u8) -> Next {
    match proto {
        PROTO_IPV6 => Next::Ipv6,
        PROTO_IPV4 => Next::Ipv4,
        PROTO_ROUTING => Next::Srh,
        PROTO_ETHERNET => Next::Ethernet,
        _ => Next::Payload,
    }
}

fn need(buf: &[u8], at: usize, len: usize, what: &str) -> Result<(), PacketError> {
    if buf.len() < at + len {
        return Err(PacketError::malformed(
            at,
            format!(
                "truncated {what}: need {len} B, {} B left",
                buf.len().saturating_sub(at)
            ),
        ));
    }
    Ok(())
}

/// Parses wire bytes back into a template. Length fields must match the
/// buffer exactly; trailing bytes after an IP packet are rejected.
pub fn decode(buf: &[u8]) -> Result<PacketTemplate, PacketError> {
    let mut layers = Vec::new();
    let mut at = 0usize;
    let mut next = Next::Ethernet;
    // end of the innermost IP packet seen so far
    let mut limit = buf.len();
    loop {
        if at == limit {
            break;
        }
        match next {
            Next::Ethernet => {
                need(buf, at, ETHERNET_HEADER_LEN, "ethernet header")?;
                let b = &buf[at..];
                let ethertype = u16::from_be_bytes([b[12], b[13]]);
                layers.push(Layer::Ethernet(EthernetHeader {
                    dst: MacAddr(b[0..6].try_into().expect("6 bytes")),
                    src: MacAddr(b[6..12].try_into().expect("6 bytes")),
                    ethertype,
                }));
                at += ETHERNET_HEADER_LEN;
                next = match ethertype {
                    ETHERTYPE_IPV6 => Next::Ipv6,
                    ETHERTYPE_IPV4 => Next::Ipv4,
                    _ => Next::Payload,
                };
            }
            Next::Ipv6 => {
                need(buf, at, IPV6_HEADER_LEN, "IPv6 header")?;
                let b = &buf[at..];
                let word = u32::from_be_bytes([b[0], b[1], b[2], b[3]]);
                if word >> 28 != 6 {
                    return Err(PacketError::malformed(
                        at,
                        format!("IP version {} in IPv6 header", word >> 28),
                    ));
                }
                let payload_length = u16::from_be_bytes([b[4], b[5]]);
                let end = at + IPV6_HEADER_LEN + usize::from(payload_length);
                if end != limit {
                    return Err(PacketError::malformed(
                        at + 4,
                        format!(
                            "IPv6 payload length {payload_length} does not match {} B of payload",
                            limit - at - IPV6_HEADER_LEN
                        ),
                    ));
                }
                let h = Ipv6Header {
                    traffic_class: ((word >> 20) & 0xff) as u8,
                    flow_label: word & 0x000f_ffff,
                    payload_length,
                    next_header: b[6],
                    hop_limit: b[7],
                    src: Ipv6Addr::from(<[u8; 16]>::try_from(&b[8..24]).expect("16 bytes")),
                    dst: Ipv6Addr::from(<[u8; 16]>::try_from(&b[24..40]).expect("16 bytes")),
                };
                next = after_ip(h.next_header);
                layers.push(Layer::Ipv6(h));
                at += IPV6_HEADER_LEN;
                limit = end;
            }
            Next::Srh => {
                let srh = SegmentRoutingHeader::read(&buf[at..limit], at)?;
                next = match after_ip(srh.next_header) {
                    Next::Srh => return Err(PacketError::malformed(at, "nested routing headers are not supported")),
                    n => n,
                };
                at += srh.encoded_len();
                layers.push(Layer::Srh(srh));
            }
            Next::Ipv4 => {
                need(buf, at, IPV4_HEADER_LEN, "IPv4 header")?;
                let b = &buf[at..];
                if b[0] != 0x45 {
                    return Err(PacketError::malformed(
                        at,
                        format!("unsupported IPv4 version/IHL byte {:#04x}", b[0]),
                    ));
                }
                if internet_checksum(&b[..IPV4_HEADER_LEN]) != 0 {
                    return Err(PacketError::malformed(at + 10, "IPv4 header checksum mismatch"));
                }
                let total_length = u16::from_be_bytes([b[2], b[3]]);
                if at + usize::from(total_length) != limit {
                    return Err(PacketError::malformed(
                        at + 2,
                        format!(
                            "IPv4 total length {total_length} does not match {} B available",
                            limit - at
                        ),
                    ));
                }
                layers.push(Layer::Ipv4(Ipv4Header {
                    dscp_ecn: b[1],
                    total_length,
                    identification: u16::from_be_bytes([b[4], b[5]]),
                    flags_fragment: u16::from_be_bytes([b[6], b[7]]),
                    ttl: b[8],
                    protocol: b[9],
                    src: Ipv4Addr::new(b[12], b[13], b[14], b[15]),
                    dst: Ipv4Addr::new(b[16], b[17], b[18], b[19]),
                }));
                at += IPV4_HEADER_LEN;
                next = Next::Payload;
            }
            Next::Payload => {
                layers.push(Layer::Payload(buf[at..limit].to_vec()));
                at = limit;
            }
        }
    }
    if at != buf.len() {
        return Err(PacketError::malformed(
            at,
            format!("{} trailing bytes after IP packet", buf.len() - at),
        ));
    }
    let template = PacketTemplate::new(layers.clone())?;
    if template.layers() != layers.as_slice() {
        return Err(PacketError::malformed(0, "header fields inconsistent with layer stack"));
    }
    Ok(template)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packet::testutil::template_strategy;
    use proptest::prelude::*;

    #[test]
    fn checksum_reference_vector() {
        // classic example header from RFC 1071 style walkthroughs
        let hdr = [
            0x45, 0x00, 0x00, 0x73, 0x00, 0x00, 0x40, 0x00, 0x40, 0x11, 0x00, 0x00, 0xc0, 0xa8, 0x00, 0x01, 0xc0, 0xa8,
            0x00, 0xc7,
        ];
        assert_eq!(internet_checksum(&hdr), 0xb861);
    }

    #[test]
    fn truncated_and_inconsistent_input() {
        assert!(decode(&[0u8; 10]).is_err());
        let p = PacketTemplate::new(vec![
            Layer::Ethernet(EthernetHeader {
                dst: MacAddr([0; 6]),
                src: MacAddr([1; 6]),
                ethertype: 0,
            }),
            Layer::Ipv6(Ipv6Header::new(Ipv6Addr::LOCALHOST, Ipv6Addr::LOCALHOST)),
            Layer::Srh(SegmentRoutingHeader::new(vec![Sid::from([7; 16]); 2], 1).unwrap()),
            Layer::Payload(vec![9; 8]),
        ])
        .unwrap();
        let bytes = encode(&p);
        assert_eq!(decode(&bytes).unwrap(), p);
        // chop the last segment: payload length and hdr ext len now lie
        assert!(decode(&bytes[..bytes.len() - 20]).is_err());
        let mut bad = bytes.clone();
        bad[14 + 40 + 1] = 8; // SRH hdr_ext_len claims 4 segments
        assert!(matches!(decode(&bad), Err(PacketError::Malformed { .. })));
        let mut bad = bytes.clone();
        bad.push(0);
        assert!(decode(&bad).is_err());
    }

    #[test]
    fn ipv4_checksum_checked() {
        let p = PacketTemplate::new(vec![
            Layer::Ethernet(EthernetHeader {
                dst: MacAddr([0; 6]),
                src: MacAddr([1; 6]),
                ethertype: 0,
            }),
            Layer::Ipv4(Ipv4Header::new(
                Ipv4Addr::new(10, 0, 0, 1),
                Ipv4Addr::new(10, 0, 0, 2),
                17,
            )),
            Layer::Payload(vec![1, 2, 3]),
        ])
        .unwrap();
        let mut bytes = encode(&p);
        assert_eq!(internet_checksum(&bytes[14..34]), 0);
        assert_eq!(decode(&bytes).unwrap(), p);
        bytes[14 + 8] ^= 1;
        assert!(decode(&bytes).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn codec_round_trip(p in template_strategy()) {
            let bytes = encode(&p);
            prop_assert_eq!(bytes.len(), p.frame_size());
            prop_assert_eq!(decode(&bytes).unwrap(), p);
        }
    }
}
