//! Network graph: directed capacitated links, tunnels, and candidate paths.
//!
//! A [`Topology`] is immutable after construction and safe to share read-only
//! across environment instances. The Abilene fixture used throughout the
//! experiments is built by [`build_abilene`].

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A directed link with capacity in Mbps and propagation delay in ms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: String,
    pub src: String,
    pub dst: String,
    #[serde(rename = "capacity_mbps")]
    pub capacity: f64,
    #[serde(rename = "prop_delay_ms")]
    pub prop_delay: f64,
}

/// One candidate path of a tunnel, stored as resolved link indices.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDef {
    pub links: Vec<usize>,
}

/// An origin-destination traffic aggregate with its candidate paths.
#[derive(Debug, Clone, PartialEq)]
pub struct Tunnel {
    pub id: String,
    pub src: String,
    pub dst: String,
    pub paths: Vec<PathDef>,
}

/// Validated network topology.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<String>,
    links: Vec<Link>,
    tunnels: Vec<Tunnel>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TunnelDoc {
    id: String,
    src: String,
    dst: String,
    /// Paths as ordered arrays of link ids.
    paths: Vec<Vec<String>>,
}

/// On-disk topology document (JSON).
#[derive(Debug, Serialize, Deserialize)]
struct TopologyDoc {
    nodes: Vec<String>,
    links: Vec<Link>,
    tunnels: Vec<TunnelDoc>,
}

impl Topology {
    /// Builds and validates a topology from its parts.
    pub fn new(nodes: Vec<String>, links: Vec<Link>, tunnels: Vec<Tunnel>) -> Result<Self> {
        let topo = Self {
            nodes,
            links,
            tunnels,
        };
        topo.validate()?;
        Ok(topo)
    }

    fn validate(&self) -> Result<()> {
        let node_set: HashSet<&str> = self.nodes.iter().map(String::as_str).collect();
        if node_set.len() != self.nodes.len() {
            return Err(Error::Topology("duplicate node ids".into()));
        }
        let mut link_ids = HashSet::new();
        for link in &self.links {
            if !link_ids.insert(link.id.as_str()) {
                return Err(Error::Topology(format!("duplicate link id `{}`", link.id)));
            }
            if !(link.capacity > 0.0) {
                return Err(Error::Topology(format!(
                    "link `{}` has non-positive capacity {}",
                    link.id, link.capacity
                )));
            }
            if !(link.prop_delay >= 0.0) {
                return Err(Error::Topology(format!(
                    "link `{}` has negative propagation delay {}",
                    link.id, link.prop_delay
                )));
            }
            for node in [&link.src, &link.dst] {
                if !node_set.contains(node.as_str()) {
                    return Err(Error::Topology(format!(
                        "link `{}` references unknown node `{}`",
                        link.id, node
                    )));
                }
            }
        }
        for tunnel in &self.tunnels {
            if tunnel.paths.is_empty() {
                return Err(Error::Topology(format!(
                    "tunnel `{}` has no candidate paths",
                    tunnel.id
                )));
            }
            for (p, path) in tunnel.paths.iter().enumerate() {
                if path.links.is_empty() {
                    return Err(Error::Topology(format!(
                        "tunnel `{}` path {} is empty",
                        tunnel.id, p
                    )));
                }
                let mut seen = HashSet::new();
                for &idx in &path.links {
                    if idx >= self.links.len() {
                        return Err(Error::Topology(format!(
                            "tunnel `{}` path {} references link index {} out of range",
                            tunnel.id, p, idx
                        )));
                    }
                    if !seen.insert(idx) {
                        return Err(Error::Topology(format!(
                            "tunnel `{}` path {} repeats link `{}`",
                            tunnel.id, p, self.links[idx].id
                        )));
                    }
                }
                let first = &self.links[path.links[0]];
                if first.src != tunnel.src {
                    return Err(Error::Topology(format!(
                        "tunnel `{}` path {} starts at `{}`, expected `{}`",
                        tunnel.id, p, first.src, tunnel.src
                    )));
                }
                for pair in path.links.windows(2) {
                    let (a, b) = (&self.links[pair[0]], &self.links[pair[1]]);
                    if a.dst != b.src {
                        return Err(Error::Topology(format!(
                            "tunnel `{}` path {} is disconnected between `{}` and `{}`",
                            tunnel.id, p, a.id, b.id
                        )));
                    }
                }
                let last = &self.links[*path.links.last().unwrap()];
                if last.dst != tunnel.dst {
                    return Err(Error::Topology(format!(
                        "tunnel `{}` path {} ends at `{}`, expected `{}`",
                        tunnel.id, p, last.dst, tunnel.dst
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn tunnels(&self) -> &[Tunnel] {
        &self.tunnels
    }

    pub fn num_tunnels(&self) -> usize {
        self.tunnels.len()
    }

    /// Total action dimension: sum of path counts over all tunnels.
    pub fn total_paths(&self) -> usize {
        self.tunnels.iter().map(|t| t.paths.len()).sum()
    }

    pub fn tunnel_index(&self, id: &str) -> Result<usize> {
        self.tunnels
            .iter()
            .position(|t| t.id == id)
            .ok_or_else(|| Error::UnknownTunnel(id.to_string()))
    }

    /// Resolved links of path `p` of tunnel `k`, in path order.
    pub fn path_links(&self, tunnel: usize, path: usize) -> Result<Vec<&Link>> {
        let t = self
            .tunnels
            .get(tunnel)
            .ok_or_else(|| Error::UnknownTunnel(format!("#{tunnel}")))?;
        let p = t.paths.get(path).ok_or_else(|| Error::UnknownPath {
            tunnel: t.id.clone(),
            path,
        })?;
        Ok(p.links.iter().map(|&i| &self.links[i]).collect())
    }

    /// Total propagation delay of a path, summed in path order.
    pub fn path_prop_delay(&self, tunnel: usize, path: usize) -> Result<f64> {
        Ok(self
            .path_links(tunnel, path)?
            .iter()
            .fold(0.0, |acc, l| acc + l.prop_delay))
    }

    /// Bottleneck (minimum) capacity along a path.
    pub fn path_bottleneck_capacity(&self, tunnel: usize, path: usize) -> Result<f64> {
        Ok(self
            .path_links(tunnel, path)?
            .iter()
            .map(|l| l.capacity)
            .fold(f64::INFINITY, f64::min))
    }

    /// Largest over tunnels of the per-tunnel maximum path propagation delay.
    /// Used as the delay normalization constant in the reward.
    pub fn max_path_prop_delay(&self) -> f64 {
        let mut best = 0.0_f64;
        for (k, t) in self.tunnels.iter().enumerate() {
            for p in 0..t.paths.len() {
                best = best.max(self.path_prop_delay(k, p).unwrap());
            }
        }
        best
    }

    /// Parses and validates a JSON topology document.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TopologyDoc = serde_json::from_str(text)?;
        let link_index: HashMap<&str, usize> = doc
            .links
            .iter()
            .enumerate()
            .map(|(i, l)| (l.id.as_str(), i))
            .collect();
        let mut tunnels = Vec::with_capacity(doc.tunnels.len());
        for t in &doc.tunnels {
            let mut paths = Vec::with_capacity(t.paths.len());
            for path in &t.paths {
                let mut links = Vec::with_capacity(path.len());
                for id in path {
                    let idx = link_index.get(id.as_str()).ok_or_else(|| {
                        Error::Topology(format!(
                            "tunnel `{}` references unknown link `{}`",
                            t.id, id
                        ))
                    })?;
                    links.push(*idx);
                }
                paths.push(PathDef { links });
            }
            tunnels.push(Tunnel {
                id: t.id.clone(),
                src: t.src.clone(),
                dst: t.dst.clone(),
                paths,
            });
        }
        Self::new(doc.nodes, doc.links, tunnels)
    }

    /// Serializes to the JSON document schema.
    pub fn to_json(&self) -> Result<String> {
        let doc = TopologyDoc {
            nodes: self.nodes.clone(),
            links: self.links.clone(),
            tunnels: self
                .tunnels
                .iter()
                .map(|t| TunnelDoc {
                    id: t.id.clone(),
                    src: t.src.clone(),
                    dst: t.dst.clone(),
                    paths: t
                        .paths
                        .iter()
                        .map(|p| p.links.iter().map(|&i| self.links[i].id.clone()).collect())
                        .collect(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// Loads a topology from a JSON document file.
pub fn load_topology(path: &std::path::Path) -> Result<Topology> {
    let text = std::fs::read_to_string(path)?;
    Topology::from_json(&text)
}

/// Capacity profile for the Abilene fixture: green (slow) links get `c_hi`,
/// red (fast) links get `c_lo`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbileneProfile {
    pub c_hi: f64,
    pub c_lo: f64,
}

impl Default for AbileneProfile {
    fn default() -> Self {
        Self {
            c_hi: 20.0,
            c_lo: 10.0,
        }
    }
}

// Per-link propagation delays (ms) chosen so that every per-path sum, taken in
// path order, reproduces the published per-path totals bit-exactly while
// shared links carry a single consistent value. Values stay within an ulp or
// two of `path_delay / link_count`.
const RED_CORE_MS: f64 = 0.4266666666666667; // 5-6, 6-9 directions and 4-5, 5-4
const RED_9_10_MS: f64 = 0.36999999999999983; // 9-10, 10-9
const RED_EDGE_MS: f64 = 0.22333333333333336; // 1-3, 3-1, 3-10, 10-3
const GREEN_CORE_MS: f64 = 1.3966666666666667; // 7-8, 8-7, 4-7, 7-4, 8-9, 9-8
const GREEN_8_11_MS: f64 = 2.258333333333333; // 8-11, 11-8
const GREEN_11_10_MS: f64 = 2.2583333333333337; // 11-10, 10-11
const GREEN_EDGE_MS: f64 = 1.781666666666667; // 1-2, 2-1, 2-11, 11-2, 7-5, 5-7

/// Node sequences of the 12 Abilene paths, in published order. Path index 0 of
/// each tunnel is the green (high-capacity, slow) path, index 1 the red
/// (low-capacity, fast) path.
const ABILENE_PATHS: [(&str, &[&str]); 12] = [
    ("1-5", &["1", "2", "11", "8", "7", "5"]),
    ("1-5", &["1", "3", "10", "9", "6", "5"]),
    ("5-1", &["5", "7", "8", "11", "2", "1"]),
    ("5-1", &["5", "6", "9", "10", "3", "1"]),
    ("4-9", &["4", "7", "8", "9"]),
    ("4-9", &["4", "5", "6", "9"]),
    ("9-4", &["9", "8", "7", "4"]),
    ("9-4", &["9", "6", "5", "4"]),
    ("4-10", &["4", "7", "8", "11", "10"]),
    ("4-10", &["4", "5", "6", "9", "10"]),
    ("10-4", &["10", "11", "8", "7", "4"]),
    ("10-4", &["10", "9", "6", "5", "4"]),
];

fn abilene_link_delay(src: &str, dst: &str) -> f64 {
    let pair = |a: &str, b: &str| (src == a && dst == b) || (src == b && dst == a);
    if pair("5", "6") || pair("6", "9") || pair("4", "5") {
        RED_CORE_MS
    } else if pair("9", "10") {
        RED_9_10_MS
    } else if pair("1", "3") || pair("3", "10") {
        RED_EDGE_MS
    } else if pair("7", "8") || pair("4", "7") || pair("8", "9") {
        GREEN_CORE_MS
    } else if pair("8", "11") {
        GREEN_8_11_MS
    } else if pair("11", "10") {
        GREEN_11_10_MS
    } else {
        GREEN_EDGE_MS
    }
}

/// Builds the 11-node Abilene fixture: 6 tunnels, each with a green
/// (high-capacity, slow) and a red (low-capacity, fast) path. Links are
/// directed; the reverse tunnel of a pair uses distinct links.
pub fn build_abilene(profile: AbileneProfile) -> Topology {
    let nodes: Vec<String> = (1..=11).map(|n| n.to_string()).collect();

    let mut links: Vec<Link> = Vec::new();
    let mut link_index: HashMap<(String, String), usize> = HashMap::new();
    let mut tunnels: Vec<Tunnel> = Vec::new();

    for (path_idx, (tunnel_id, node_seq)) in ABILENE_PATHS.iter().enumerate() {
        let is_red = path_idx % 2 == 1;
        let mut path_links = Vec::with_capacity(node_seq.len() - 1);
        for pair in node_seq.windows(2) {
            let key = (pair[0].to_string(), pair[1].to_string());
            let idx = *link_index.entry(key.clone()).or_insert_with(|| {
                links.push(Link {
                    id: format!("{}->{}", pair[0], pair[1]),
                    src: pair[0].to_string(),
                    dst: pair[1].to_string(),
                    capacity: if is_red { profile.c_lo } else { profile.c_hi },
                    prop_delay: abilene_link_delay(pair[0], pair[1]),
                });
                links.len() - 1
            });
            path_links.push(idx);
        }
        match tunnels.last_mut() {
            Some(t) if t.id == *tunnel_id => t.paths.push(PathDef { links: path_links }),
            _ => {
                let (src, dst) = tunnel_id.split_once('-').unwrap();
                tunnels.push(Tunnel {
                    id: tunnel_id.to_string(),
                    src: src.to_string(),
                    dst: dst.to_string(),
                    paths: vec![PathDef { links: path_links }],
                });
            }
        }
    }

    Topology::new(nodes, links, tunnels).expect("abilene fixture is valid by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Published per-path propagation delay totals, in path order.
    const ABILENE_PATH_DELAYS: [f64; 12] = [
        9.0, 1.67, 9.0, 1.67, 4.19, 1.28, 4.19, 1.28, 7.31, 1.65, 7.31, 1.65,
    ];

    fn minimal_topology() -> Topology {
        Topology::new(
            vec!["a".into(), "b".into()],
            vec![Link {
                id: "a->b".into(),
                src: "a".into(),
                dst: "b".into(),
                capacity: 10.0,
                prop_delay: 1.0,
            }],
            vec![Tunnel {
                id: "t".into(),
                src: "a".into(),
                dst: "b".into(),
                paths: vec![PathDef { links: vec![0] }],
            }],
        )
        .unwrap()
    }

    #[test]
    fn abilene_shape() {
        let topo = build_abilene(AbileneProfile::default());
        assert_eq!(topo.nodes().len(), 11);
        assert_eq!(topo.num_tunnels(), 6);
        assert_eq!(topo.total_paths(), 12);
        let ids: Vec<&str> = topo.tunnels().iter().map(|t| t.id.as_str()).collect();
        assert_eq!(ids, ["1-5", "5-1", "4-9", "9-4", "4-10", "10-4"]);
        for t in topo.tunnels() {
            assert_eq!(t.paths.len(), 2);
        }
    }

    #[test]
    fn abilene_path_delays_bit_exact() {
        let topo = build_abilene(AbileneProfile::default());
        let mut flat = 0;
        for (k, t) in topo.tunnels().iter().enumerate() {
            for p in 0..t.paths.len() {
                let sum = topo.path_prop_delay(k, p).unwrap();
                assert_eq!(
                    sum.to_bits(),
                    ABILENE_PATH_DELAYS[flat].to_bits(),
                    "path {flat} ({}/{p}) sums to {sum}, want {}",
                    t.id,
                    ABILENE_PATH_DELAYS[flat]
                );
                flat += 1;
            }
        }
    }

    #[test]
    fn abilene_capacities_by_color() {
        let topo = build_abilene(AbileneProfile { c_hi: 40.0, c_lo: 7.0 });
        for k in 0..topo.num_tunnels() {
            for l in topo.path_links(k, 0).unwrap() {
                assert_eq!(l.capacity, 40.0, "green link {} capacity", l.id);
            }
            for l in topo.path_links(k, 1).unwrap() {
                assert_eq!(l.capacity, 7.0, "red link {} capacity", l.id);
            }
        }
    }

    #[test]
    fn abilene_reverse_tunnels_use_distinct_links() {
        let topo = build_abilene(AbileneProfile::default());
        let fwd = topo.tunnel_index("4-9").unwrap();
        let rev = topo.tunnel_index("9-4").unwrap();
        for p in 0..2 {
            let a: std::collections::HashSet<&str> = topo
                .path_links(fwd, p)
                .unwrap()
                .iter()
                .map(|l| l.id.as_str())
                .collect();
            let b: std::collections::HashSet<&str> = topo
                .path_links(rev, p)
                .unwrap()
                .iter()
                .map(|l| l.id.as_str())
                .collect();
            assert!(a.is_disjoint(&b));
        }
    }

    #[test]
    fn path_links_resolves_in_order() {
        let topo = build_abilene(AbileneProfile::default());
        let k = topo.tunnel_index("4-9").unwrap();
        let links = topo.path_links(k, 1).unwrap();
        assert_eq!(links.len(), 3);
        let hops: Vec<(&str, &str)> = links.iter().map(|l| (l.src.as_str(), l.dst.as_str())).collect();
        assert_eq!(hops, [("4", "5"), ("5", "6"), ("6", "9")]);
    }

    #[test]
    fn path_links_minimal_and_unknown_index() {
        let topo = minimal_topology();
        let links = topo.path_links(0, 0).unwrap();
        assert_eq!(links.len(), 1);
        assert_eq!(links[0].id, "a->b");
        assert!(matches!(
            topo.path_links(0, 7),
            Err(Error::UnknownPath { path: 7, .. })
        ));
    }

    #[test]
    fn load_rejects_unknown_link_reference() {
        let doc = r#"{
            "nodes": ["a", "b"],
            "links": [{"id": "L1", "src": "a", "dst": "b", "capacity_mbps": 5.0, "prop_delay_ms": 0.1}],
            "tunnels": [{"id": "t", "src": "a", "dst": "b", "paths": [["L99"]]}]
        }"#;
        let err = Topology::from_json(doc).unwrap_err();
        assert!(err.to_string().contains("L99"), "error should name the link: {err}");
    }

    #[test]
    fn load_rejects_disconnected_path() {
        let doc = r#"{
            "nodes": ["a", "b", "c"],
            "links": [
                {"id": "L1", "src": "a", "dst": "b", "capacity_mbps": 5.0, "prop_delay_ms": 0.1},
                {"id": "L2", "src": "c", "dst": "b", "capacity_mbps": 5.0, "prop_delay_ms": 0.1}
            ],
            "tunnels": [{"id": "t", "src": "a", "dst": "b", "paths": [["L1", "L2"]]}]
        }"#;
        let err = Topology::from_json(doc).unwrap_err();
        assert!(err.to_string().contains("disconnected"), "{err}");
    }

    #[test]
    fn json_round_trip_is_identical() {
        let topo = build_abilene(AbileneProfile::default());
        let text = topo.to_json().unwrap();
        let reloaded = Topology::from_json(&text).unwrap();
        assert_eq!(topo, reloaded);
    }

    #[test]
    fn minimal_single_link_topology_valid() {
        let topo = minimal_topology();
        assert_eq!(topo.num_tunnels(), 1);
        assert_eq!(topo.total_paths(), 1);
    }
}
