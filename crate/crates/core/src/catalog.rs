//! Registry of SRv6 behaviors: category, Linux/VPP support, whether the
//! behavior is part of the default measurement set, and the test traffic it
//! needs.

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CatalogError {
    #[error("unknown behavior `{0}`")]
    UnknownBehavior(String),
    #[error("behavior {0} has no traffic profile (no semantics or recipe are implemented for it)")]
    NoTrafficProfile(BehaviorId),
}

macro_rules! behaviors {
    ($($variant:ident => $name:literal),+ $(,)?) => {
        /// Identifier of an SRv6 behavior, plus the plain IPv4/IPv6
        /// forwarding pseudo-behaviors.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum BehaviorId {
            $(#[serde(rename = $name)] $variant,)+
        }

        impl BehaviorId {
            pub const ALL: &'static [BehaviorId] = &[$(BehaviorId::$variant),+];

            /// Canonical name, e.g. `End.DT6`.
            pub fn name(self) -> &'static str {
                match self {
                    $(BehaviorId::$variant => $name,)+
                }
            }
        }

        impl FromStr for BehaviorId {
            type Err = CatalogError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok(BehaviorId::$variant),)+
                    other => Err(CatalogError::UnknownBehavior(other.to_string())),
                }
            }
        }
    };
}

behaviors! {
    HInsert => "H.Insert",
    HInsertRed => "H.Insert.Red",
    HEncaps => "H.Encaps",
    HEncapsRed => "H.Encaps.Red",
    HEncapsL2 => "H.Encaps.L2",
    HEncapsL2Red => "H.Encaps.L2.Red",
    End => "End",
    EndT => "End.T",
    EndX => "End.X",
    EndDT4 => "End.DT4",
    EndDT6 => "End.DT6",
    EndDT46 => "End.DT46",
    EndDX2 => "End.DX2",
    EndDX4 => "End.DX4",
    EndDX6 => "End.DX6",
    EndDX2V => "End.DX2V",
    EndDT2U => "End.DT2U",
    EndDT2M => "End.DT2M",
    EndB6Insert => "End.B6.Insert",
    EndB6InsertRed => "End.B6.Insert.Red",
    EndB6Encaps => "End.B6.Encaps",
    EndB6EncapsRed => "End.B6.Encaps.Red",
    EndBM => "End.BM",
    EndAS => "End.AS",
    EndAD => "End.AD",
    EndAM => "End.AM",
    TMTmap => "T.M.Tmap",
    EndMGTP4E => "End.M.GTP4.E",
    EndMGTP4D => "End.M.GTP4.D",
    EndGTP6DDi => "End.GTP6.D.Di",
    EndMGTP6E => "End.M.GTP6.E",
    EndMGTP6D => "End.M.GTP6.D",
    PlainIpv4 => "IPv4",
    PlainIpv6 => "IPv6",
}

impl fmt::Display for BehaviorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl BehaviorId {
    /// Endpoint behaviors that advance the segment list without
    /// decapsulating.
    pub fn is_end_family(self) -> bool {
        matches!(self, BehaviorId::End | BehaviorId::EndT | BehaviorId::EndX)
    }

    pub fn is_decap(self) -> bool {
        matches!(
            self,
            BehaviorId::EndDT4 | BehaviorId::EndDT6 | BehaviorId::EndDX2 | BehaviorId::EndDX4 | BehaviorId::EndDX6
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Category {
    Headend,
    EndpointNoDecap,
    EndpointDecap,
    BindingSid,
    Proxy,
    Mobile,
    PlainIp,
}

impl Category {
    pub fn is_endpoint(self) -> bool {
        matches!(self, Category::EndpointNoDecap | Category::EndpointDecap)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Category::Headend => "headend",
            Category::EndpointNoDecap => "endpoint-no-decap",
            Category::EndpointDecap => "endpoint-decap",
            Category::BindingSid => "binding-sid",
            Category::Proxy => "proxy",
            Category::Mobile => "mobile",
            Category::PlainIp => "plain-ip",
        };
        f.write_str(s)
    }
}

/// Kind of packet carried inside the SRv6 encapsulation (or offered bare
/// to a headend).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerKind {
    Ipv6,
    Ipv4,
    Ethernet,
}

/// Shape of the test traffic a behavior must be fed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficRequirement {
    pub inner_kind: InnerKind,
    /// Offered packets already carry an outer IPv6 header (and SRH).
    pub needs_srv6_encap: bool,
    pub min_sids: usize,
    /// The active SID may not be the final segment (segments left > 0).
    pub active_sid_must_not_be_last: bool,
    /// Size of the inner packet in bytes; for Ethernet inner traffic this
    /// is the whole inner frame including its header.
    pub inner_packet_size: usize,
    pub srh_sid_count: usize,
}

pub const DEFAULT_INNER_SIZE: usize = 64;
pub const DEFAULT_SRH_SIDS: usize = 2;

impl TrafficRequirement {
    const fn headend(inner_kind: InnerKind) -> Self {
        Self {
            inner_kind,
            needs_srv6_encap: false,
            min_sids: 0,
            active_sid_must_not_be_last: false,
            inner_packet_size: DEFAULT_INNER_SIZE,
            srh_sid_count: DEFAULT_SRH_SIDS,
        }
    }

    const fn endpoint(inner_kind: InnerKind, advances: bool) -> Self {
        Self {
            inner_kind,
            needs_srv6_encap: true,
            min_sids: if advances { 2 } else { 1 },
            active_sid_must_not_be_last: advances,
            inner_packet_size: DEFAULT_INNER_SIZE,
            srh_sid_count: DEFAULT_SRH_SIDS,
        }
    }

    pub fn with_inner_kind(mut self, kind: InnerKind) -> Self {
        self.inner_kind = kind;
        self
    }

    pub fn with_inner_size(mut self, size: usize) -> Self {
        self.inner_packet_size = size;
        self
    }

    pub fn with_sid_count(mut self, n: usize) -> Self {
        self.srh_sid_count = n;
        self
    }
}

/// One row of the registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorSpec {
    pub id: BehaviorId,
    pub category: Category,
    pub linux_supported: bool,
    pub vpp_supported: bool,
    /// Part of the default measurement set.
    pub measured: bool,
    /// `None` for behaviors whose test traffic is not defined.
    pub traffic: Option<TrafficRequirement>,
    /// Key into the recipe store; empty when no recipe exists.
    pub recipe_key: String,
    pub semantics_implemented: bool,
}

impl BehaviorSpec {
    /// Behavior can be run end to end: packet semantics, traffic profile
    /// and configuration recipes all exist.
    pub fn runnable(&self) -> bool {
        self.semantics_implemented && self.traffic.is_some() && !self.recipe_key.is_empty()
    }
}

fn row(
    id: BehaviorId,
    category: Category,
    linux: bool,
    vpp: bool,
    measured: bool,
    traffic: Option<TrafficRequirement>,
) -> BehaviorSpec {
    let semantics_implemented = traffic.is_some();
    let recipe_key = if semantics_implemented {
        id.name().to_ascii_lowercase().replace('.', "_")
    } else {
        String::new()
    };
    BehaviorSpec {
        id,
        category,
        linux_supported: linux,
        vpp_supported: vpp,
        measured,
        traffic,
        recipe_key,
        semantics_implemented,
    }
}

static CATALOG: LazyLock<Vec<BehaviorSpec>> = LazyLock::new(|| {
    use BehaviorId::*;
    use Category::*;
    use InnerKind::*;

    let head = |k| Some(TrafficRequirement::headend(k));
    let advance = |k| Some(TrafficRequirement::endpoint(k, true));
    let decap = |k| Some(TrafficRequirement::endpoint(k, false));

    vec![
        row(HInsert, Headend, true, true, true, head(Ipv6)),
        row(HInsertRed, Headend, false, false, false, None),
        row(HEncaps, Headend, true, true, true, head(Ipv6)),
        row(HEncapsRed, Headend, false, true, false, None),
        row(HEncapsL2, Headend, true, true, true, head(Ethernet)),
        row(HEncapsL2Red, Headend, false, true, false, None),
        row(End, EndpointNoDecap, true, true, true, advance(Ipv6)),
        row(EndT, EndpointNoDecap, true, true, true, advance(Ipv6)),
        row(EndX, EndpointNoDecap, true, true, true, advance(Ipv6)),
        // Missing from the mainline kernel at the time of the measurements.
        row(EndDT4, EndpointDecap, false, true, true, decap(Ipv4)),
        row(EndDT6, EndpointDecap, true, true, true, decap(Ipv6)),
        row(EndDT46, EndpointDecap, false, false, false, None),
        row(EndDX2, EndpointDecap, true, true, true, decap(Ethernet)),
        row(EndDX4, EndpointDecap, true, true, true, decap(Ipv4)),
        row(EndDX6, EndpointDecap, true, true, true, decap(Ipv6)),
        row(EndDX2V, EndpointDecap, false, false, false, None),
        row(EndDT2U, EndpointDecap, false, false, false, None),
        row(EndDT2M, EndpointDecap, false, false, false, None),
        row(EndB6Insert, BindingSid, true, true, false, None),
        row(EndB6InsertRed, BindingSid, false, false, false, None),
        row(EndB6Encaps, BindingSid, true, true, false, None),
        row(EndB6EncapsRed, BindingSid, false, true, false, None),
        row(EndBM, BindingSid, false, false, false, None),
        row(EndAS, Proxy, false, true, false, None),
        row(EndAD, Proxy, false, true, false, None),
        row(EndAM, Proxy, false, true, false, None),
        row(TMTmap, Mobile, false, true, false, None),
        row(EndMGTP4E, Mobile, false, true, false, None),
        row(EndMGTP4D, Mobile, false, true, false, None),
        row(EndGTP6DDi, Mobile, false, true, false, None),
        row(EndMGTP6E, Mobile, false, true, false, None),
        row(EndMGTP6D, Mobile, false, true, false, None),
        row(PlainIpv4, PlainIp, true, true, true, head(Ipv4)),
        row(PlainIpv6, PlainIp, true, true, true, head(Ipv6)),
    ]
});

/// The full registry, in table order.
pub fn catalog() -> &'static [BehaviorSpec] {
    &CATALOG
}

pub fn lookup(id: BehaviorId) -> &'static BehaviorSpec {
    // every BehaviorId has exactly one row
    CATALOG
        .iter()
        .find(|s| s.id == id)
        .expect("catalog covers every BehaviorId")
}

pub fn lookup_name(name: &str) -> Result<&'static BehaviorSpec, CatalogError> {
    Ok(lookup(name.parse()?))
}

/// Behaviors measured by default, in table order.
pub fn measured() -> impl Iterator<Item = &'static BehaviorSpec> {
    CATALOG.iter().filter(|s| s.measured)
}

/// Fixed-width text table of the whole catalog, one behavior per line.
pub fn render_table() -> String {
    let yn = |b: bool| if b { "yes" } else { "no" };
    let mut out = format!(
        "{:<16} {:<18} {:<6} {:<6} {:<9} {}\n",
        "behavior", "category", "linux", "vpp", "measured", "traffic"
    );
    for s in catalog() {
        let traffic = match s.traffic {
            Some(t) if t.needs_srv6_encap => format!(
                "srv6({}) {} sids={}",
                format!("{:?}", t.inner_kind).to_lowercase(),
                t.inner_packet_size,
                t.srh_sid_count
            ),
            Some(t) => format!(
                "bare {} {}",
                format!("{:?}", t.inner_kind).to_lowercase(),
                t.inner_packet_size
            ),
            None => "-".to_string(),
        };
        out.push_str(&format!(
            "{:<16} {:<18} {:<6} {:<6} {:<9} {}\n",
            s.id.name(),
            s.category.to_string(),
            yn(s.linux_supported),
            yn(s.vpp_supported),
            yn(s.measured),
            traffic
        ));
    }
    out
}

pub fn traffic_requirement(id: BehaviorId) -> Result<TrafficRequirement, CatalogError> {
    lookup(id).traffic.ok_or(CatalogError::NoTrafficProfile(id))
}
