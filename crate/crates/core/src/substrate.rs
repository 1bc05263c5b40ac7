//! Physical topology: servers with CPU/RAM capacity joined by links with
//! bandwidth and latency.
//!
//! Capacities are tracked in integer units internally (cores, MiB, kbit/s)
//! so that any balanced sequence of reservations and releases restores the
//! network bit-for-bit.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// RAM provisioned per CPU core, for both servers and VNFs.
pub const RAM_GB_PER_CORE: f64 = 4.0;

const MIB_PER_GB: f64 = 1024.0;
const KBPS_PER_MBPS: f64 = 1000.0;

const NETRAIL: &str = include_str!("../data/netrail.topo");
const BTEUROPE: &str = include_str!("../data/bteurope.topo");

fn gb_to_mib(gb: f64) -> u64 {
    (gb * MIB_PER_GB).round() as u64
}

fn mbps_to_kbps(mbps: f64) -> u64 {
    (mbps * KBPS_PER_MBPS).round() as u64
}

/// Nodal resource request of one VNF.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Demand {
    pub cpu: u32,
    pub ram_gb: f64,
}

impl Demand {
    /// Demand with RAM following the fixed per-core ratio.
    pub fn from_cpu(cpu: u32) -> Self {
        Demand {
            cpu,
            ram_gb: RAM_GB_PER_CORE * cpu as f64,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.cpu == 0 && self.ram_gb == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeResources {
    cpu: u32,
    ram_mib: u64,
    init_cpu: u32,
    init_ram_mib: u64,
}

impl NodeResources {
    pub fn with_cpu(cores: u32) -> Self {
        let ram = gb_to_mib(RAM_GB_PER_CORE * cores as f64);
        NodeResources {
            cpu: cores,
            ram_mib: ram,
            init_cpu: cores,
            init_ram_mib: ram,
        }
    }

    pub fn cpu(&self) -> u32 {
        self.cpu
    }

    pub fn initial_cpu(&self) -> u32 {
        self.init_cpu
    }

    pub fn ram_gb(&self) -> f64 {
        self.ram_mib as f64 / MIB_PER_GB
    }

    pub fn initial_ram_gb(&self) -> f64 {
        self.init_ram_mib as f64 / MIB_PER_GB
    }

    /// Available over initialized CPU, in `[0, 1]`.
    pub fn cpu_ratio(&self) -> f64 {
        if self.init_cpu == 0 {
            0.0
        } else {
            self.cpu as f64 / self.init_cpu as f64
        }
    }

    pub fn fits(&self, demand: &Demand) -> bool {
        demand.cpu <= self.cpu && gb_to_mib(demand.ram_gb) <= self.ram_mib
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkResources {
    bandwidth_kbps: u64,
    init_bandwidth_kbps: u64,
    latency_ms: f64,
}

impl LinkResources {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth_kbps as f64 / KBPS_PER_MBPS
    }

    pub fn initial_bandwidth(&self) -> f64 {
        self.init_bandwidth_kbps as f64 / KBPS_PER_MBPS
    }

    pub fn latency(&self) -> f64 {
        self.latency_ms
    }
}

/// Undirected physical link. Bandwidth is shared by both directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub a: usize,
    pub b: usize,
    pub resources: LinkResources,
}

impl Link {
    fn other(&self, node: usize) -> usize {
        if node == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// A routed virtual link. Empty when both endpoints are colocated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub nodes: Vec<usize>,
    pub links: Vec<usize>,
    pub latency: f64,
    pub bandwidth: f64,
}

impl Path {
    pub fn colocated(node: usize) -> Self {
        Path {
            nodes: vec![node],
            links: Vec::new(),
            latency: 0.0,
            bandwidth: 0.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubstrateNetwork {
    name: String,
    nodes: Vec<NodeResources>,
    links: Vec<Link>,
    adjacency: Vec<Vec<usize>>,
}

impl SubstrateNetwork {
    /// Builds a network from `(cpu)` per node and `(a, b, bandwidth Mbps,
    /// latency ms)` per link, validating connectivity.
    pub fn new(
        name: impl Into<String>,
        node_cpus: &[u32],
        links: &[(usize, usize, f64, f64)],
    ) -> Result<Self> {
        let name = name.into();
        if node_cpus.len() < 2 || links.is_empty() {
            return Err(Error::Topology(format!(
                "{name}: need at least two nodes and one link (got {} nodes, {} links)",
                node_cpus.len(),
                links.len()
            )));
        }
        let nodes: Vec<_> = node_cpus
            .iter()
            .map(|&c| NodeResources::with_cpu(c))
            .collect();
        let mut adjacency = vec![Vec::new(); nodes.len()];
        let mut out = Vec::with_capacity(links.len());
        for (idx, &(a, b, bw, lat)) in links.iter().enumerate() {
            if a >= nodes.len() || b >= nodes.len() {
                return Err(Error::Topology(format!(
                    "link {idx} references unknown node"
                )));
            }
            if a == b {
                return Err(Error::Topology(format!("link {idx} is a self-loop")));
            }
            if !(bw >= 0.0 && lat >= 0.0) || !bw.is_finite() || !lat.is_finite() {
                return Err(Error::Topology(format!(
                    "link {idx} has negative or non-finite capacity"
                )));
            }
            let kbps = mbps_to_kbps(bw);
            adjacency[a].push(idx);
            adjacency[b].push(idx);
            out.push(Link {
                a,
                b,
                resources: LinkResources {
                    bandwidth_kbps: kbps,
                    init_bandwidth_kbps: kbps,
                    latency_ms: lat,
                },
            });
        }
        let net = SubstrateNetwork {
            name,
            nodes,
            links: out,
            adjacency,
        };
        if !net.is_connected() {
            return Err(Error::Topology(format!(
                "{}: graph is disconnected",
                net.name
            )));
        }
        Ok(net)
    }

    /// Parses the line-oriented topology format:
    ///
    /// ```text
    /// # comment
    /// node <id> cpu=<int>
    /// link <id> <src> <dst> bw=<float> lat=<float>
    /// ```
    pub fn parse(name: &str, text: &str) -> Result<Self> {
        let mut node_ids: Vec<String> = Vec::new();
        let mut cpus = Vec::new();
        let mut raw_links = Vec::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| Error::Topology(format!("{name}:{}: {msg}: `{raw}`", lineno + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields[0] {
                "node" => {
                    if fields.len() != 3 {
                        return Err(err("expected `node <id> cpu=<int>`"));
                    }
                    let cpu = key_value(fields[2], "cpu").ok_or_else(|| err("missing cpu="))?;
                    let cpu: i64 = cpu.parse().map_err(|_| err("cpu is not an integer"))?;
                    if cpu < 0 {
                        return Err(err("negative capacity"));
                    }
                    if node_ids.iter().any(|id| id == fields[1]) {
                        return Err(err("duplicate node id"));
                    }
                    node_ids.push(fields[1].to_string());
                    cpus.push(cpu as u32);
                }
                "link" => {
                    if fields.len() != 6 {
                        return Err(err(
                            "expected `link <id> <src> <dst> bw=<float> lat=<float>`",
                        ));
                    }
                    let lookup = |id: &str| node_ids.iter().position(|n| n == id);
                    let a = lookup(fields[2]).ok_or_else(|| err("unknown source node"))?;
                    let b = lookup(fields[3]).ok_or_else(|| err("unknown destination node"))?;
                    let bw: f64 = key_value(fields[4], "bw")
                        .ok_or_else(|| err("missing bw="))?
                        .parse()
                        .map_err(|_| err("bw is not a number"))?;
                    let lat: f64 = key_value(fields[5], "lat")
                        .ok_or_else(|| err("missing lat="))?
                        .parse()
                        .map_err(|_| err("lat is not a number"))?;
                    if bw < 0.0 || lat < 0.0 {
                        return Err(err("negative capacity"));
                    }
                    raw_links.push((a, b, bw, lat));
                }
                _ => return Err(err("unknown directive")),
            }
        }
        Self::new(name, &cpus, &raw_links)
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("topology");
        Self::parse(name, &text)
    }

    /// Shipped topologies, by case-insensitive name.
    pub fn builtin(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "netrail" => Self::parse("netrail", NETRAIL),
            "bteurope" => Self::parse("bteurope", BTEUROPE),
            other => Err(Error::Topology(format!(
                "no built-in topology named `{other}`"
            ))),
        }
    }

    /// Resolves a built-in name first, then a file path.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match Self::builtin(name_or_path) {
            Ok(net) => Ok(net),
            Err(_) => Self::load(name_or_path),
        }
    }

    /// Resets every node to `cores` CPU (and the matching RAM), fully available.
    pub fn with_uniform_cpu(mut self, cores: u32) -> Self {
        for node in &mut self.nodes {
            *node = NodeResources::with_cpu(cores);
        }
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn node(&self, id: usize) -> &NodeResources {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[NodeResources] {
        &self.nodes
    }

    pub fn link(&self, id: usize) -> &Link {
        &self.links[id]
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn max_node_cpu(&self) -> u32 {
        self.nodes.iter().map(|n| n.init_cpu).max().unwrap_or(0)
    }

    pub fn is_connected(&self) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(n) = stack.pop() {
            for &l in &self.adjacency[n] {
                let m = self.links[l].other(n);
                if !seen[m] {
                    seen[m] = true;
                    stack.push(m);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// True when every available amount equals its initialized capacity.
    pub fn is_pristine(&self) -> bool {
        self.nodes
            .iter()
            .all(|n| n.cpu == n.init_cpu && n.ram_mib == n.init_ram_mib)
            && self
                .links
                .iter()
                .all(|l| l.resources.bandwidth_kbps == l.resources.init_bandwidth_kbps)
    }

    fn check_node(&self, node: usize) -> Result<()> {
        if node >= self.nodes.len() {
            return Err(Error::InvalidArgument(format!(
                "node {node} out of range (network has {})",
                self.nodes.len()
            )));
        }
        Ok(())
    }

    /// Reserves `demand` on `node` across all dimensions or not at all.
    /// Returns `Ok(false)` when any dimension lacks capacity.
    pub fn reserve_node(&mut self, node: usize, demand: &Demand) -> Result<bool> {
        self.check_node(node)?;
        if demand.ram_gb < 0.0 || !demand.ram_gb.is_finite() {
            return Err(Error::InvalidArgument(
                "ram demand must be finite and >= 0".into(),
            ));
        }
        let res = &mut self.nodes[node];
        if !res.fits(demand) {
            return Ok(false);
        }
        res.cpu -= demand.cpu;
        res.ram_mib -= gb_to_mib(demand.ram_gb);
        Ok(true)
    }

    pub fn release_node(&mut self, node: usize, demand: &Demand) -> Result<()> {
        self.check_node(node)?;
        let res = &mut self.nodes[node];
        let ram = gb_to_mib(demand.ram_gb);
        if res.cpu + demand.cpu > res.init_cpu || res.ram_mib + ram > res.init_ram_mib {
            return Err(Error::Resource(format!(
                "release on node {node} would exceed initialized capacity"
            )));
        }
        res.cpu += demand.cpu;
        res.ram_mib += ram;
        Ok(())
    }

    /// Lowest-latency path from `src` to `dst` over links with at least
    /// `bandwidth` available, without reserving anything.
    pub fn find_path(&self, src: usize, dst: usize, bandwidth: f64) -> Result<Option<Path>> {
        self.check_node(src)?;
        self.check_node(dst)?;
        if src == dst {
            return Ok(Some(Path::colocated(src)));
        }
        let need = mbps_to_kbps(bandwidth);
        let n = self.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut via: Vec<Option<usize>> = vec![None; n];
        let mut heap = BinaryHeap::new();
        dist[src] = 0.0;
        heap.push(Frontier {
            cost: 0.0,
            node: src,
        });

        while let Some(Frontier { cost, node }) = heap.pop() {
            if node == dst {
                break;
            }
            if cost > dist[node] {
                continue;
            }
            for &l in &self.adjacency[node] {
                let link = &self.links[l];
                if link.resources.bandwidth_kbps < need {
                    continue;
                }
                let next = link.other(node);
                let c = cost + link.resources.latency_ms;
                if c < dist[next] {
                    dist[next] = c;
                    via[next] = Some(l);
                    heap.push(Frontier {
                        cost: c,
                        node: next,
                    });
                }
            }
        }

        if !dist[dst].is_finite() {
            return Ok(None);
        }
        let mut links = Vec::new();
        let mut nodes = vec![dst];
        let mut cur = dst;
        while let Some(l) = via[cur] {
            links.push(l);
            cur = self.links[l].other(cur);
            nodes.push(cur);
        }
        links.reverse();
        nodes.reverse();
        Ok(Some(Path {
            nodes,
            links,
            latency: dist[dst],
            bandwidth,
        }))
    }

    /// Routes and reserves a virtual link. `Ok(None)` when no path meets
    /// both the bandwidth and the latency budget; the network is then
    /// untouched.
    pub fn reserve_path(
        &mut self,
        src: usize,
        dst: usize,
        bandwidth: f64,
        latency_budget: f64,
    ) -> Result<Option<Path>> {
        if bandwidth < 0.0 || !bandwidth.is_finite() {
            return Err(Error::InvalidArgument(
                "bandwidth must be finite and >= 0".into(),
            ));
        }
        let Some(path) = self.find_path(src, dst, bandwidth)? else {
            return Ok(None);
        };
        if path.latency > latency_budget {
            return Ok(None);
        }
        let need = mbps_to_kbps(bandwidth);
        for &l in &path.links {
            self.links[l].resources.bandwidth_kbps -= need;
        }
        Ok(Some(path))
    }

    pub fn release_path(&mut self, path: &Path) -> Result<()> {
        let give = mbps_to_kbps(path.bandwidth);
        for &l in &path.links {
            let r = &self.links[l].resources;
            if r.bandwidth_kbps + give > r.init_bandwidth_kbps {
                return Err(Error::Resource(format!(
                    "release on link {l} would exceed initialized bandwidth"
                )));
            }
        }
        for &l in &path.links {
            self.links[l].resources.bandwidth_kbps += give;
        }
        Ok(())
    }
}

fn key_value<'a>(field: &'a str, key: &str) -> Option<&'a str> {
    field.strip_prefix(key)?.strip_prefix('=')
}

#[derive(Debug, PartialEq)]
struct Frontier {
    cost: f64,
    node: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line3(mid_bw: f64) -> SubstrateNetwork {
        SubstrateNetwork::new(
            "line",
            &[4, 4, 4],
            &[(0, 1, 10.0, 1.0), (1, 2, mid_bw, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn builtin_counts() {
        let nr = SubstrateNetwork::builtin("netrail").unwrap();
        assert_eq!((nr.node_count(), nr.link_count()), (7, 10));
        let bt = SubstrateNetwork::builtin("BtEurope").unwrap();
        assert_eq!((bt.node_count(), bt.link_count()), (24, 37));
        assert!(nr.is_pristine() && bt.is_pristine());
    }

    #[test]
    fn ram_follows_cpu() {
        let n = NodeResources::with_cpu(12);
        assert_eq!(n.ram_gb(), 48.0);
        assert_eq!(Demand::from_cpu(3).ram_gb, 12.0);
    }

    #[test]
    fn single_node_is_rejected() {
        let err = SubstrateNetwork::parse("t", "node 0 cpu=4\n").unwrap_err();
        assert!(matches!(err, Error::Topology(_)));
    }

    #[test]
    fn parse_errors() {
        assert!(SubstrateNetwork::parse("t", "node 0 cpu=-1\nnode 1 cpu=2\n").is_err());
        assert!(SubstrateNetwork::parse(
            "t",
            "node 0 cpu=1\nnode 1 cpu=2\nlink 0 0 1 bw=-3 lat=1\n"
        )
        .is_err());
        assert!(SubstrateNetwork::parse("t", "node 0 cpu=x\n").is_err());
        assert!(SubstrateNetwork::parse("t", "router 0\n").is_err());
        let disconnected = "node 0 cpu=1\nnode 1 cpu=1\nnode 2 cpu=1\nlink 0 0 1 bw=1 lat=1\n";
        assert!(SubstrateNetwork::parse("t", disconnected).is_err());
    }

    #[test]
    fn parse_with_comments() {
        let text =
            "# two nodes\nnode a cpu=4 # first\nnode b cpu=8\n\nlink 0 a b bw=100.5 lat=2.25\n";
        let net = SubstrateNetwork::parse("t", text).unwrap();
        assert_eq!(net.node(1).cpu(), 8);
        assert_eq!(net.link(0).resources.bandwidth(), 100.5);
        assert_eq!(net.link(0).resources.latency(), 2.25);
    }

    #[test]
    fn reserve_node_boundaries() {
        let mut net = line3(10.0);
        let before = net.clone();
        assert!(net.reserve_node(0, &Demand::default()).unwrap());
        assert_eq!(net, before);

        assert!(!net.reserve_node(0, &Demand::from_cpu(5)).unwrap());
        assert_eq!(net, before);

        assert!(net.reserve_node(0, &Demand::from_cpu(4)).unwrap());
        assert_eq!(net.node(0).cpu(), 0);
        assert_eq!(net.node(0).ram_gb(), 0.0);

        // RAM alone can block.
        let mut net = line3(10.0);
        let d = Demand {
            cpu: 1,
            ram_gb: 17.0,
        };
        assert!(!net.reserve_node(1, &d).unwrap());
        assert_eq!(net, before);
        assert!(net.reserve_node(9, &Demand::default()).is_err());
    }

    #[test]
    fn release_guards() {
        let mut net = line3(10.0);
        let before = net.clone();
        net.release_node(0, &Demand::default()).unwrap();
        assert_eq!(net, before);
        assert!(net.release_node(0, &Demand::from_cpu(1)).is_err());
        assert_eq!(net, before);

        let d = Demand::from_cpu(3);
        assert!(net.reserve_node(2, &d).unwrap());
        net.release_node(2, &d).unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn path_colocated_and_boundary() {
        let mut net = line3(10.0);
        let p = net.reserve_path(1, 1, 5.0, 0.0).unwrap().unwrap();
        assert!(p.is_empty());
        assert_eq!(p.latency, 0.0);
        assert!(net.is_pristine());

        let p = net.reserve_path(0, 1, 10.0, 100.0).unwrap().unwrap();
        assert_eq!(p.links, vec![0]);
        assert_eq!(net.link(0).resources.bandwidth(), 0.0);
        net.release_path(&p).unwrap();
        assert!(net.is_pristine());
    }

    #[test]
    fn saturated_middle_link_blocks_path() {
        let mut net = line3(2.0);
        let before = net.clone();
        assert!(net.reserve_path(0, 2, 5.0, 100.0).unwrap().is_none());
        assert_eq!(net, before);
        // latency budget also binds
        let mut net = line3(10.0);
        assert!(net.reserve_path(0, 2, 5.0, 1.5).unwrap().is_none());
        assert!(net.reserve_path(0, 2, 5.0, 2.0).unwrap().is_some());
    }

    #[test]
    fn dijkstra_prefers_low_latency_detour() {
        // 0-1 direct is slow; 0-2-1 is faster.
        let net = SubstrateNetwork::new(
            "tri",
            &[1, 1, 1],
            &[(0, 1, 10.0, 9.0), (0, 2, 10.0, 2.0), (2, 1, 10.0, 3.0)],
        )
        .unwrap();
        let p = net.find_path(0, 1, 1.0).unwrap().unwrap();
        assert_eq!(p.nodes, vec![0, 2, 1]);
        assert_eq!(p.latency, 5.0);
        assert_eq!(p.links, vec![1, 2]);

        let net = SubstrateNetwork::new(
            "tri",
            &[1, 1, 1],
            &[(0, 1, 10.0, 9.0), (0, 2, 0.5, 2.0), (2, 1, 10.0, 3.0)],
        )
        .unwrap();
        let p = net.find_path(0, 1, 1.0).unwrap().unwrap();
        assert_eq!(p.links, vec![0]);
    }

    #[derive(Debug, Clone)]
    enum Op {
        Node(usize, u32),
        Path(usize, usize, u32),
    }

    fn op() -> impl Strategy<Value = Op> {
        prop_oneof![
            (0usize..7, 0u32..6).prop_map(|(n, c)| Op::Node(n, c)),
            (0usize..7, 0usize..7, 1u32..600).prop_map(|(a, b, bw)| Op::Path(a, b, bw)),
        ]
    }

    proptest! {
        #[test]
        fn reserve_release_conserves(ops in prop::collection::vec(op(), 1..40)) {
            let mut net = SubstrateNetwork::builtin("netrail").unwrap();
            let original = net.clone();
            let mut nodes = Vec::new();
            let mut paths = Vec::new();
            for op in ops {
                match op {
                    Op::Node(n, c) => {
                        let d = Demand::from_cpu(c);
                        let snapshot = net.clone();
                        if net.reserve_node(n, &d).unwrap() {
                            nodes.push((n, d));
                        } else {
                            prop_assert_eq!(&net, &snapshot);
                        }
                    }
                    Op::Path(a, b, bw) => {
                        let snapshot = net.clone();
                        match net.reserve_path(a, b, bw as f64 * 1.7, 12.0).unwrap() {
                            Some(p) => paths.push(p),
                            None => prop_assert_eq!(&net, &snapshot),
                        }
                    }
                }
                for n in net.nodes() {
                    prop_assert!(n.cpu_ratio() >= 0.0 && n.cpu_ratio() <= 1.0);
                }
            }
            while let Some(p) = paths.pop() {
                net.release_path(&p).unwrap();
            }
            for (n, d) in nodes.into_iter().rev() {
                net.release_node(n, &d).unwrap();
            }
            prop_assert_eq!(net, original);
        }
    }
}
