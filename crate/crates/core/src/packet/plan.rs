use std::net::{Ipv4Addr, Ipv6Addr};

use serde::{Deserialize, Serialize};

use super::{MacAddr, Sid};
use crate::catalog::BehaviorId;

/// Fixed addressing used to build test packets and render configuration
/// recipes.
///
/// The traffic generator owns `fc00:1::/64` and `10.0.1.0/24` on its
/// sending port and `fc00:2::/64` and `10.0.2.0/24` behind its receiving
/// port. SIDs live in `fcf0::/16`:
///
/// | address          | role                                              |
/// |------------------|---------------------------------------------------|
/// | `fcf0:0:1::1`    | local SID instantiated on the SUT                 |
/// | `fcf0:0:2::1..`  | segments after the SUT, routed to the generator  |
/// | `fcf0:0:3::1..`  | segments already traversed (decap test packets)   |
/// | `fcf0:0:ff::1`   | binding SID of headend policies                   |
///
/// SRH flags and tag are always zero.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AddressPlan {
    pub tg_tx_mac: MacAddr,
    pub sut_rx_mac: MacAddr,
    pub tg_src6: Ipv6Addr,
    pub inner_dst6: Ipv6Addr,
    pub tg_src4: Ipv4Addr,
    pub inner_dst4: Ipv4Addr,
    pub sut_sid: Sid,
    pub tunnel_source: Ipv6Addr,
    pub nexthop6: Ipv6Addr,
    pub nexthop4: Ipv4Addr,
    pub binding_sid: Sid,
    pub table: u32,
    pub udp_src_port: u16,
    pub udp_dst_port: u16,
}

impl Default for AddressPlan {
    fn default() -> Self {
        Self {
            tg_tx_mac: MacAddr([0x02, 0, 0, 0, 0, 0x01]),
            sut_rx_mac: MacAddr([0x02, 0, 0, 0, 0, 0x02]),
            tg_src6: "fc00:1::1".parse().expect("literal"),
            inner_dst6: "fc00:2::1".parse().expect("literal"),
            tg_src4: Ipv4Addr::new(10, 0, 1, 1),
            inner_dst4: Ipv4Addr::new(10, 0, 2, 1),
            sut_sid: "fcf0:0:1::1".parse().expect("literal"),
            tunnel_source: "fc00:1::100".parse().expect("literal"),
            nexthop6: "fc00:2::2".parse().expect("literal"),
            nexthop4: Ipv4Addr::new(10, 0, 2, 2),
            binding_sid: "fcf0:0:ff::1".parse().expect("literal"),
            table: 100,
            udp_src_port: 50_000,
            udp_dst_port: 50_001,
        }
    }
}

fn indexed(prefix: u16, i: usize) -> Sid {
    Sid::new(Ipv6Addr::new(0xfcf0, 0, prefix, 0, 0, 0, 0, (i + 1) as u16))
}

impl AddressPlan {
    /// `i`-th segment after the SUT (0-based), routed back to the
    /// generator.
    pub fn downstream_sid(&self, i: usize) -> Sid {
        indexed(2, i)
    }

    pub fn upstream_sid(&self, i: usize) -> Sid {
        indexed(3, i)
    }

    /// SID list, in path order, carried by endpoint test packets with `n`
    /// segments. Segment-advancing behaviors get the SUT SID first;
    /// decapsulating behaviors get it last, so it is active with
    /// segments left = 0.
    pub fn endpoint_path(&self, behavior: BehaviorId, n: usize) -> Vec<Sid> {
        let n = n.max(1);
        if behavior.is_end_family() {
            std::iter::once(self.sut_sid)
                .chain((0..n - 1).map(|i| self.downstream_sid(i)))
                .collect()
        } else {
            (0..n - 1)
                .map(|i| self.upstream_sid(i))
                .chain(std::iter::once(self.sut_sid))
                .collect()
        }
    }

    /// Policy segments installed on a headend, in path order.
    pub fn headend_policy(&self, n: usize) -> Vec<Sid> {
        (0..n.max(1)).map(|i| self.downstream_sid(i)).collect()
    }
}
