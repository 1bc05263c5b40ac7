//! Synthetic online service requests.
//!
//! Each request is a service function chain whose forwarding graph is an
//! Erdős–Rényi graph over its VNFs (with a chain backbone), plus QoS
//! tolerances, reliability, a threshold waiting time and a hidden
//! ground-truth priority.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{seeded, SimRng};
use crate::substrate::Demand;

/// Closed interval used for uniform draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    fn sample(&self, rng: &mut SimRng) -> f64 {
        if self.hi > self.lo {
            rng.random_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }

    /// Position of `x` in the range, 0 at `lo` and 1 at `hi`.
    pub fn normalize(&self, x: f64) -> f64 {
        if self.hi > self.lo {
            (x - self.lo) / (self.hi - self.lo)
        } else {
            0.0
        }
    }

    fn valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkloadConfig {
    pub vnf_min: usize,
    pub vnf_max: usize,
    /// Largest per-VNF CPU demand (4 in the 12-4 scenario, 8 in 12-8).
    pub vnf_cpu_max: u32,
    pub edge_probability: f64,
    /// Add the `i -> i+1` chain before random edges.
    pub chain_backbone: bool,
    pub delay_tol_ms: Range,
    pub jitter_tol_ms: Range,
    pub ploss_tol: Range,
    pub reliability: Range,
    pub threshold_wait: Range,
    pub short_threshold_wait: Range,
    /// Fraction of requests whose waiting threshold is drawn from
    /// `short_threshold_wait`.
    pub short_wait_fraction: f64,
    pub vlink_bandwidth_mbps: Range,
    pub vlink_latency_ms: Range,
    /// Standard deviation of the Gaussian noise on the true priority.
    pub priority_noise: f64,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            vnf_min: 2,
            vnf_max: 6,
            vnf_cpu_max: 4,
            edge_probability: 0.4,
            chain_backbone: true,
            delay_tol_ms: Range::new(5.0, 100.0),
            jitter_tol_ms: Range::new(1.0, 20.0),
            ploss_tol: Range::new(0.001, 0.05),
            reliability: Range::new(0.5, 1.0),
            threshold_wait: Range::new(2.0, 30.0),
            short_threshold_wait: Range::new(2.0, 6.0),
            short_wait_fraction: 0.3,
            vlink_bandwidth_mbps: Range::new(20.0, 100.0),
            vlink_latency_ms: Range::new(10.0, 40.0),
            priority_noise: 0.02,
        }
    }
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("workload: {m}")));
        if self.vnf_min < 1 || self.vnf_min > self.vnf_max {
            return bad("need 1 <= vnf_min <= vnf_max");
        }
        if self.vnf_cpu_max < 1 {
            return bad("vnf_cpu_max must be >= 1");
        }
        if !(0.0..=1.0).contains(&self.edge_probability) {
            return bad("edge_probability must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.short_wait_fraction) {
            return bad("short_wait_fraction must be in [0, 1]");
        }
        for (name, r) in [
            ("delay_tol_ms", self.delay_tol_ms),
            ("jitter_tol_ms", self.jitter_tol_ms),
            ("ploss_tol", self.ploss_tol),
        ] {
            if !r.valid() || r.lo <= 0.0 {
                return bad(&format!("{name} must be a positive range"));
            }
        }
        if !self.reliability.valid() || self.reliability.lo < 0.0 || self.reliability.hi > 1.0 {
            return bad("reliability must lie in [0, 1]");
        }
        for (name, r) in [
            ("threshold_wait", self.threshold_wait),
            ("short_threshold_wait", self.short_threshold_wait),
            ("vlink_latency_ms", self.vlink_latency_ms),
        ] {
            if !r.valid() || r.lo < 0.0 {
                return bad(&format!("{name} must be a non-negative range"));
            }
        }
        if !self.vlink_bandwidth_mbps.valid() || self.vlink_bandwidth_mbps.lo <= 0.0 {
            return bad("vlink_bandwidth_mbps must be positive");
        }
        if !(self.priority_noise >= 0.0) {
            return bad("priority_noise must be >= 0");
        }
        Ok(())
    }
}

/// Tolerated QoS degradation; these are the regression inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Qos {
    pub delay_tol_ms: f64,
    pub jitter_tol_ms: f64,
    pub ploss_tol: f64,
}

impl Qos {
    pub fn features(&self) -> [f64; 3] {
        [self.delay_tol_ms, self.jitter_tol_ms, self.ploss_tol]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vnf {
    pub cpu_cores: u32,
    pub ram_gb: f64,
}

impl Vnf {
    pub fn with_cpu(cpu: u32) -> Self {
        let d = Demand::from_cpu(cpu);
        Vnf {
            cpu_cores: d.cpu,
            ram_gb: d.ram_gb,
        }
    }

    pub fn demand(&self) -> Demand {
        Demand {
            cpu: self.cpu_cores,
            ram_gb: self.ram_gb,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VirtualLink {
    pub src: usize,
    pub dst: usize,
    pub bandwidth_mbps: f64,
    pub latency_budget_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceRequest {
    /// Arrival index within its batch.
    pub id: usize,
    pub vnfs: Vec<Vnf>,
    pub vlinks: Vec<VirtualLink>,
    pub qos: Qos,
    pub reliability: f64,
    pub threshold_wait: f64,
    /// Ground truth; schedulers never read it.
    pub true_priority: f64,
    /// Set by the prioritization model.
    #[serde(default)]
    pub assigned_priority: Option<f64>,
}

impl ServiceRequest {
    pub fn priority(&self) -> f64 {
        self.assigned_priority.unwrap_or(0.0)
    }

    pub fn total_cpu(&self) -> u32 {
        self.vnfs.iter().map(|v| v.cpu_cores).sum()
    }

    /// Virtual links joining `vnf` to VNFs with a smaller index.
    pub fn links_to_earlier(&self, vnf: usize) -> impl Iterator<Item = &VirtualLink> {
        self.vlinks
            .iter()
            .filter(move |l| (l.src == vnf && l.dst < vnf) || (l.dst == vnf && l.src < vnf))
    }

    /// Weak connectivity of the forwarding graph.
    pub fn is_connected(&self) -> bool {
        let edges: Vec<_> = self.vlinks.iter().map(|l| (l.src, l.dst)).collect();
        components(self.vnfs.len(), &edges).iter().all(|&c| c == 0)
    }
}

/// Hidden affine map from QoS tolerances to priority. Tighter tolerances
/// map to higher priority.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorityOracle {
    pub weights: [f64; 3],
    pub bias: f64,
    pub ranges: [Range; 3],
}

impl PriorityOracle {
    pub const WEIGHTS: [f64; 3] = [0.75, 0.15, 0.10];

    pub fn for_config(cfg: &WorkloadConfig) -> Self {
        PriorityOracle {
            weights: Self::WEIGHTS,
            bias: 0.0,
            ranges: [cfg.delay_tol_ms, cfg.jitter_tol_ms, cfg.ploss_tol],
        }
    }

    /// Noise-free priority before clamping.
    pub fn affine(&self, qos: &Qos) -> Result<f64> {
        let x = qos.features();
        if x.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::InvalidArgument(
                "QoS tolerances must be positive".into(),
            ));
        }
        Ok(self.bias
            + x.iter()
                .zip(&self.ranges)
                .zip(&self.weights)
                .map(|((&t, r), &w)| w * (1.0 - r.normalize(t)))
                .sum::<f64>())
    }

    /// `clamp(affine + noise, 0, 1)`.
    pub fn priority(&self, qos: &Qos, noise: f64) -> Result<f64> {
        Ok((self.affine(qos)? + noise).clamp(0.0, 1.0))
    }
}

/// Generates `count` requests. Deterministic in `(seed, cfg)`.
pub fn generate_batch(seed: u64, count: usize, cfg: &WorkloadConfig) -> Vec<ServiceRequest> {
    let mut rng = seeded(seed);
    let oracle = PriorityOracle::for_config(cfg);
    let noise = Normal::new(0.0, cfg.priority_noise.max(0.0)).expect("finite noise sd");
    (0..count)
        .map(|id| generate_one(id, cfg, &oracle, &noise, &mut rng))
        .collect()
}

fn generate_one(
    id: usize,
    cfg: &WorkloadConfig,
    oracle: &PriorityOracle,
    noise: &Normal<f64>,
    rng: &mut SimRng,
) -> ServiceRequest {
    let n = rng.random_range(cfg.vnf_min..=cfg.vnf_max);
    let vnfs: Vec<Vnf> = (0..n)
        .map(|_| Vnf::with_cpu(rng.random_range(1..=cfg.vnf_cpu_max)))
        .collect();

    let edges = erdos_renyi_edges(n, cfg.edge_probability, cfg.chain_backbone, rng);
    let vlinks = edges
        .into_iter()
        .map(|(src, dst)| VirtualLink {
            src,
            dst,
            bandwidth_mbps: cfg.vlink_bandwidth_mbps.sample(rng),
            latency_budget_ms: cfg.vlink_latency_ms.sample(rng),
        })
        .collect();

    let qos = Qos {
        delay_tol_ms: cfg.delay_tol_ms.sample(rng),
        jitter_tol_ms: cfg.jitter_tol_ms.sample(rng),
        ploss_tol: cfg.ploss_tol.sample(rng),
    };
    let reliability = cfg.reliability.sample(rng);
    let threshold_wait = if rng.random_bool(cfg.short_wait_fraction) {
        cfg.short_threshold_wait.sample(rng)
    } else {
        cfg.threshold_wait.sample(rng)
    };
    let eps = if cfg.priority_noise > 0.0 {
        noise.sample(rng)
    } else {
        0.0
    };
    let true_priority = oracle
        .priority(&qos, eps)
        .expect("validated tolerance ranges are positive");

    ServiceRequest {
        id,
        vnfs,
        vlinks,
        qos,
        reliability,
        threshold_wait,
        true_priority,
        assigned_priority: None,
    }
}

/// Directed edges `i -> j` (`i < j`) of a G(n, p) graph, optionally seeded
/// with the chain `0 -> 1 -> ... -> n-1`, then repaired to be weakly
/// connected.
pub fn erdos_renyi_edges(
    n: usize,
    p: f64,
    backbone: bool,
    rng: &mut SimRng,
) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    if backbone {
        edges.extend((1..n).map(|j| (j - 1, j)));
    }
    for i in 0..n {
        for j in i + 1..n {
            if backbone && j == i + 1 {
                continue;
            }
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    repair_connectivity(n, &mut edges);
    edges.sort_unstable();
    edges
}

/// Joins components by linking the smallest node of each component to the
/// smallest node of the next.
pub fn repair_connectivity(n: usize, edges: &mut Vec<(usize, usize)>) {
    let comp = components(n, edges);
    let mut heads: Vec<usize> = Vec::new();
    for (node, &c) in comp.iter().enumerate() {
        if c == heads.len() {
            heads.push(node);
        }
    }
    for w in heads.windows(2) {
        edges.push((w[0], w[1]));
    }
}

/// Component label per node; labels are numbered in order of first node.
fn components(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut out = vec![0; n];
    for x in 0..n {
        let r = find(&mut parent, x);
        if label[r] == usize::MAX {
            label[r] = next;
            next += 1;
        }
        out[x] = label[r];
    }
    out
}

/// Writes one JSON object per line.
pub fn write_batch(path: impl AsRef<Path>, batch: &[ServiceRequest]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for req in batch {
        serde_json::to_writer(&mut w, req)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_batch(path: impl AsRef<Path>) -> Result<Vec<ServiceRequest>> {
    let r = BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn qos(d: f64, j: f64, p: f64) -> Qos {
        Qos {
            delay_tol_ms: d,
            jitter_tol_ms: j,
            ploss_tol: p,
        }
    }

    #[test]
    fn batch_is_reproducible() {
        let cfg = WorkloadConfig::default();
        let a = generate_batch(11, 100, &cfg);
        let b = generate_batch(11, 100, &cfg);
        assert_eq!(a.len(), 100);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        for r in &a {
            assert!((2..=6).contains(&r.vnfs.len()));
            assert!(r.is_connected());
            assert!(r.vnfs.iter().all(|v| v.cpu_cores >= 1 && v.cpu_cores <= 4));
            assert!(r.vnfs.iter().all(|v| v.ram_gb == 4.0 * v.cpu_cores as f64));
            assert!(r
                .vlinks
                .iter()
                .all(|l| l.src < l.dst && l.bandwidth_mbps > 0.0));
            assert!((0.0..=1.0).contains(&r.reliability));
            assert!((0.0..=1.0).contains(&r.true_priority));
            assert!(r.assigned_priority.is_none());
        }
    }

    #[test]
    fn minimal_chain() {
        let cfg = WorkloadConfig {
            vnf_min: 2,
            vnf_max: 2,
            ..Default::default()
        };
        let b = generate_batch(3, 1, &cfg);
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].vnfs.len(), 2);
        assert_eq!(b[0].vlinks.len(), 1);
        assert_eq!((b[0].vlinks[0].src, b[0].vlinks[0].dst), (0, 1));
    }

    #[test]
    fn seeds_differ() {
        let cfg = WorkloadConfig::default();
        let key = |b: &[ServiceRequest]| {
            let mut v: Vec<u64> = b.iter().map(|r| r.threshold_wait.to_bits()).collect();
            v.sort_unstable();
            v
        };
        let a = generate_batch(1, 1000, &cfg);
        let b = generate_batch(2, 1000, &cfg);
        assert_ne!(key(&a), key(&b));
        // Means of reliability agree statistically but the draws differ.
        let mean =
            |b: &[ServiceRequest]| b.iter().map(|r| r.reliability).sum::<f64>() / b.len() as f64;
        assert!((mean(&a) - mean(&b)).abs() < 0.03);
    }

    #[test]
    fn short_deadline_mass() {
        let cfg = WorkloadConfig::default();
        let b = generate_batch(5, 10_000, &cfg);
        let short = b.iter().filter(|r| r.threshold_wait <= 6.0).count() as f64 / 1e4;
        // 0.3 + 0.7 * 4/28
        assert!((short - 0.4).abs() < 0.02, "short fraction {short}");
    }

    #[test]
    fn oracle_boundaries() {
        let cfg = WorkloadConfig::default();
        let o = PriorityOracle::for_config(&cfg);
        let loose = qos(100.0, 20.0, 0.05);
        let tight = qos(5.0, 1.0, 0.001);
        assert!(o.priority(&loose, 0.0).unwrap().abs() < 1e-12);
        assert!((o.priority(&tight, 0.0).unwrap() - 1.0).abs() < 1e-12);

        // Hand evaluation: n = (40-5)/95, (8-1)/19, (0.02-0.001)/0.049.
        let mid = qos(40.0, 8.0, 0.02);
        let expected =
            0.75 * (1.0 - 35.0 / 95.0) + 0.15 * (1.0 - 7.0 / 19.0) + 0.10 * (1.0 - 0.019 / 0.049);
        assert!((o.priority(&mid, 0.0).unwrap() - expected).abs() < 1e-12);

        assert!(o.priority(&qos(0.0, 1.0, 0.01), 0.0).is_err());
        assert!(o.priority(&qos(10.0, -1.0, 0.01), 0.0).is_err());
    }

    #[test]
    fn priority_bands_are_populated() {
        let cfg = WorkloadConfig::default();
        let b = generate_batch(9, 10_000, &cfg);
        let low = b.iter().filter(|r| r.true_priority <= 0.2).count();
        let high = b.iter().filter(|r| r.true_priority > 0.8).count();
        assert!(low > 500, "low band {low}");
        assert!(high > 500, "high band {high}");
    }

    #[test]
    fn repair_joins_components() {
        let mut edges = vec![(0, 1), (3, 4)];
        repair_connectivity(6, &mut edges);
        assert_eq!(components(6, &edges), vec![0; 6]);
    }

    #[test]
    fn export_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("batch.jsonl");
        let b = generate_batch(4, 7, &WorkloadConfig::default());
        write_batch(&path, &b).unwrap();
        assert_eq!(read_batch(&path).unwrap(), b);
    }

    proptest! {
        #[test]
        fn oracle_monotone(
            d in 5.0f64..100.0, j in 1.0f64..20.0, p in 0.001f64..0.05,
            dd in 0.0f64..50.0, dj in 0.0f64..10.0, dp in 0.0f64..0.02,
        ) {
            let o = PriorityOracle::for_config(&WorkloadConfig::default());
            let base = o.priority(&qos(d, j, p), 0.0).unwrap();
            prop_assert!(o.priority(&qos(d + dd, j, p), 0.0).unwrap() <= base);
            prop_assert!(o.priority(&qos(d, j + dj, p), 0.0).unwrap() <= base);
            prop_assert!(o.priority(&qos(d, j, p + dp), 0.0).unwrap() <= base);
        }

        #[test]
        fn er_graphs_connected(n in 1usize..12, p in 0.0f64..1.0, backbone: bool, seed: u64) {
            let mut rng = seeded(seed);
            let edges = erdos_renyi_edges(n, p, backbone, &mut rng);
            prop_assert!(components(n, &edges).iter().all(|&c| c == 0));
            prop_assert!(edges.iter().all(|&(a, b)| a < b && b < n));
        }
    }
}
