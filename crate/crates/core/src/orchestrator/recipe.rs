//! Per-forwarder configuration recipes. Command text is data, kept in
//! `recipes/<forwarder>.yaml`; this module loads it and fills in
//! `{placeholder}`s from the address plan.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{ForwarderKind, Interfaces};
use crate::catalog::BehaviorId;
use crate::packet::{AddressPlan, BehaviorConfig};

const LINUX: &str = include_str!("../../recipes/linux.yaml");
const VPP: &str = include_str!("../../recipes/vpp.yaml");
const SIM: &str = include_str!("../../recipes/sim.yaml");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecipeError {
    #[error("recipe book for {forwarder}: {message}")]
    Load { forwarder: ForwarderKind, message: String },
    #[error("no {forwarder} recipe for {behavior} (key `{key}`)")]
    Missing {
        behavior: BehaviorId,
        forwarder: ForwarderKind,
        key: String,
    },
    #[error("recipe `{key}` uses unknown placeholder {{{name}}}")]
    UnknownPlaceholder { key: String, name: String },
    #[error("recipe `{key}` has an unterminated placeholder in `{step}`")]
    Unterminated { key: String, step: String },
}

/// Setup and teardown command templates for one behavior.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipeTemplate {
    pub setup: Vec<String>,
    pub teardown: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipeBook {
    pub forwarder: ForwarderKind,
    pub recipes: BTreeMap<String, RecipeTemplate>,
}

impl RecipeBook {
    pub fn parse(forwarder: ForwarderKind, text: &str) -> Result<Self, RecipeError> {
        let load = |message: String| RecipeError::Load { forwarder, message };
        let book: RecipeBook = serde_yaml::from_str(text).map_err(|e| load(e.to_string()))?;
        if book.forwarder != forwarder {
            return Err(load(format!("file declares forwarder {}", book.forwarder)));
        }
        for (key, r) in &book.recipes {
            if r.setup.is_empty() || r.teardown.is_empty() {
                return Err(load(format!("recipe `{key}` needs both setup and teardown steps")));
            }
        }
        Ok(book)
    }

    pub fn builtin(forwarder: ForwarderKind) -> Self {
        let text = match forwarder {
            ForwarderKind::Linux => LINUX,
            ForwarderKind::Vpp => VPP,
            ForwarderKind::Sim => SIM,
        };
        Self::parse(forwarder, text).expect("built-in recipe books are valid")
    }

    /// Loads `<dir>/<forwarder>.yaml`.
    pub fn load_dir(forwarder: ForwarderKind, dir: &Path) -> Result<Self, RecipeError> {
        let path = dir.join(format!("{forwarder}.yaml"));
        let text = std::fs::read_to_string(&path).map_err(|e| RecipeError::Load {
            forwarder,
            message: format!("{}: {e}", path.display()),
        })?;
        Self::parse(forwarder, &text)
    }

    pub fn get(&self, key: &str) -> Option<&RecipeTemplate> {
        self.recipes.get(key)
    }
}

/// Rendered commands for one behavior on one forwarder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigRecipe {
    pub behavior: BehaviorId,
    pub forwarder_kind: ForwarderKind,
    pub steps: Vec<String>,
    pub teardown: Vec<String>,
}

/// Placeholder values for a behavior.
pub fn recipe_vars(
    behavior: BehaviorId,
    plan: &AddressPlan,
    cfg: &BehaviorConfig,
    ifaces: &Interfaces,
) -> BTreeMap<&'static str, String> {
    let segs: Vec<String> = cfg.segments.iter().map(ToString::to_string).collect();
    let vpp_next: Vec<String> = segs.iter().map(|s| format!("next {s}")).collect();
    BTreeMap::from([
        ("behavior", behavior.to_string()),
        ("sut_sid", plan.sut_sid.to_string()),
        ("next_sid", plan.downstream_sid(0).to_string()),
        ("downstream_prefix", "fcf0:0:2::/48".to_string()),
        ("inner_prefix6", format!("{}/64", prefix64(plan.inner_dst6))),
        ("inner_prefix4", format!("{}/24", prefix24(plan.inner_dst4))),
        ("nexthop6", cfg.nexthop6.to_string()),
        ("nexthop4", cfg.nexthop4.to_string()),
        ("table", cfg.table.to_string()),
        ("tunnel_source", cfg.tunnel_source.to_string()),
        ("binding_sid", plan.binding_sid.to_string()),
        ("segs", segs.join(",")),
        ("vpp_next", vpp_next.join(" ")),
        ("sut_in", ifaces.sut_in.clone()),
        ("sut_out", ifaces.sut_out.clone()),
    ])
}

fn prefix64(a: std::net::Ipv6Addr) -> std::net::Ipv6Addr {
    let s = a.segments();
    std::net::Ipv6Addr::new(s[0], s[1], s[2], s[3], 0, 0, 0, 0)
}

fn prefix24(a: std::net::Ipv4Addr) -> std::net::Ipv4Addr {
    let o = a.octets();
    std::net::Ipv4Addr::new(o[0], o[1], o[2], 0)
}

/// Replaces every `{name}` in `step`. Unknown names are errors.
pub fn render_step(key: &str, step: &str, vars: &BTreeMap<&'static str, String>) -> Result<String, RecipeError> {
    let mut out = String::with_capacity(step.len());
    let mut rest = step;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after.find('}').ok_or_else(|| RecipeError::Unterminated {
            key: key.into(),
            step: step.into(),
        })?;
        let name = &after[..close];
        let value = vars.get(name).ok_or_else(|| RecipeError::UnknownPlaceholder {
            key: key.into(),
            name: name.into(),
        })?;
        out.push_str(value);
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

pub fn render(
    book: &RecipeBook,
    behavior: BehaviorId,
    key: &str,
    vars: &BTreeMap<&'static str, String>,
) -> Result<ConfigRecipe, RecipeError> {
    let t = book.get(key).ok_or_else(|| RecipeError::Missing {
        behavior,
        forwarder: book.forwarder,
        key: key.into(),
    })?;
    let all = |steps: &[String]| {
        steps
            .iter()
            .map(|s| render_step(key, s, vars))
            .collect::<Result<Vec<_>, _>>()
    };
    Ok(ConfigRecipe {
        behavior,
        forwarder_kind: book.forwarder,
        steps: all(&t.setup)?,
        teardown: all(&t.teardown)?,
    })
}
