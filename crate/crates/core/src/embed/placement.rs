use serde::{Deserialize, Serialize};

use super::ddql::{DdqlAgent, EmbedTransition};
use super::reward::{local_reward, placement_factor, EmbedParams, RewardTerms};
use crate::error::{Error, Result};
use crate::substrate::{Demand, Path, SubstrateNetwork};
use crate::workload::ServiceRequest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutedLink {
    /// Index into the service's virtual links.
    pub vlink: usize,
    pub path: Path,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementOutcome {
    pub service_id: usize,
    pub success: bool,
    /// Host of each VNF; empty on failure.
    pub assignments: Vec<usize>,
    pub routes: Vec<RoutedLink>,
    /// Attempts spent on each VNF that was tried.
    pub attempts: Vec<usize>,
    /// Total node choices; this is the deployment duration.
    pub steps: usize,
    pub total_reward: f64,
}

impl PlacementOutcome {
    /// Returns every reservation of a successful placement to the network.
    pub fn release(&self, network: &mut SubstrateNetwork, service: &ServiceRequest) -> Result<()> {
        for r in &self.routes {
            network.release_path(&r.path)?;
        }
        for (v, &node) in self.assignments.iter().enumerate() {
            network.release_node(node, &service.vnfs[v].demand())?;
        }
        Ok(())
    }
}

/// State vector: normalized demand, priority, reliability, per-node free
/// CPU ratio and a one-hot of the previous VNF's host.
pub fn embed_state(
    network: &SubstrateNetwork,
    demand: &Demand,
    service: &ServiceRequest,
    prev_node: Option<usize>,
) -> Vec<f64> {
    let h = network.node_count();
    let max_cpu = network.max_node_cpu().max(1) as f64;
    let max_ram = network
        .nodes()
        .iter()
        .map(|n| n.initial_ram_gb())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut s = Vec::with_capacity(4 + 2 * h);
    s.push(demand.cpu as f64 / max_cpu);
    s.push(demand.ram_gb / max_ram);
    s.push(service.priority());
    s.push(service.reliability);
    s.extend(network.nodes().iter().map(|n| n.cpu_ratio()));
    s.extend((0..h).map(|i| if prev_node == Some(i) { 1.0 } else { 0.0 }));
    s
}

pub fn state_size(nodes: usize) -> usize {
    4 + 2 * nodes
}

/// Nodes that fit `demand` and have not been tried yet.
pub fn feasible_mask(network: &SubstrateNetwork, demand: &Demand, tried: &[bool]) -> Vec<bool> {
    network
        .nodes()
        .iter()
        .zip(tried)
        .map(|(n, &t)| !t && n.fits(demand))
        .collect()
}

fn rollback(
    network: &mut SubstrateNetwork,
    service: &ServiceRequest,
    placed: &[usize],
    routes: &[RoutedLink],
) -> Result<()> {
    for r in routes {
        network.release_path(&r.path)?;
    }
    for (v, &node) in placed.iter().enumerate() {
        network.release_node(node, &service.vnfs[v].demand())?;
    }
    Ok(())
}

/// Reserves `node` for VNF `v` and routes its links to earlier VNFs.
/// On routing failure everything reserved here is released again.
fn try_host(
    network: &mut SubstrateNetwork,
    service: &ServiceRequest,
    placed: &[usize],
    v: usize,
    node: usize,
) -> Result<Option<Vec<RoutedLink>>> {
    let demand = service.vnfs[v].demand();
    if !network.reserve_node(node, &demand)? {
        return Err(Error::InvalidState(format!(
            "masked node {node} could not host vnf {v}"
        )));
    }
    let mut routes: Vec<RoutedLink> = Vec::new();
    for (li, vl) in service.vlinks.iter().enumerate() {
        let (src, dst) = match (vl.src == v, vl.dst == v) {
            (true, false) if vl.dst < v => (node, placed[vl.dst]),
            (false, true) if vl.src < v => (placed[vl.src], node),
            _ => continue,
        };
        match network.reserve_path(src, dst, vl.bandwidth_mbps, vl.latency_budget_ms)? {
            Some(path) => routes.push(RoutedLink { vlink: li, path }),
            None => {
                for r in &routes {
                    network.release_path(&r.path)?;
                }
                network.release_node(node, &demand)?;
                return Ok(None);
            }
        }
    }
    Ok(Some(routes))
}

/// Places every VNF of `service` or none of them. With `learn` set, each
/// node choice becomes a stored transition and may trigger a training step.
pub fn embed_service(
    agent: &mut DdqlAgent,
    network: &mut SubstrateNetwork,
    service: &ServiceRequest,
    params: &EmbedParams,
    learn: bool,
) -> Result<PlacementOutcome> {
    let h = network.node_count();
    if agent.actions() != h || agent.state_size() != state_size(h) {
        return Err(Error::Dimension {
            expected: state_size(h),
            got: agent.state_size(),
        });
    }
    let max_attempts = params.max_attempts.unwrap_or(h).max(1);
    let mut placed: Vec<usize> = Vec::with_capacity(service.vnfs.len());
    let mut routes: Vec<RoutedLink> = Vec::new();
    let mut attempts = Vec::with_capacity(service.vnfs.len());
    let mut steps = 0;
    let mut total_reward = 0.0;

    for v in 0..service.vnfs.len() {
        let demand = service.vnfs[v].demand();
        let prev = placed.last().copied();
        let mut tried = vec![false; h];
        let mut hosted = false;
        let mut used = 0;

        while used < max_attempts {
            let state = embed_state(network, &demand, service, prev);
            let mask = feasible_mask(network, &demand, &tried);
            let Some(node) = agent.select_action(&state, &mask)? else {
                break;
            };
            used += 1;
            steps += 1;
            tried[node] = true;
            let availability = network.node(node).cpu_ratio();
            let last_vnf = v + 1 == service.vnfs.len();

            let (reward, next_state, next_mask, done) =
                match try_host(network, service, &placed, v, node)? {
                    Some(new_routes) => {
                        placed.push(node);
                        routes.extend(new_routes);
                        hosted = true;
                        let terms = RewardTerms {
                            availability,
                            priority: service.priority(),
                            reliability: service.reliability,
                            placement: placement_factor(used, max_attempts)?,
                        };
                        let r = local_reward(true, &terms, params);
                        if last_vnf {
                            (r, state.clone(), vec![false; h], true)
                        } else {
                            let nd = service.vnfs[v + 1].demand();
                            let ns = embed_state(network, &nd, service, Some(node));
                            let nm = feasible_mask(network, &nd, &vec![false; h]);
                            (r, ns, nm, false)
                        }
                    }
                    None => {
                        let nm = feasible_mask(network, &demand, &tried);
                        let done = used >= max_attempts || !nm.iter().any(|&m| m);
                        let ns = embed_state(network, &demand, service, prev);
                        (params.penalty, ns, nm, done)
                    }
                };
            total_reward += reward;
            if learn {
                agent.remember(EmbedTransition {
                    state,
                    action: node,
                    reward,
                    next_state,
                    next_mask,
                    done,
                })?;
            }
            if hosted {
                break;
            }
        }
        attempts.push(used);
        if !hosted {
            rollback(network, service, &placed, &routes)?;
            return Ok(PlacementOutcome {
                service_id: service.id,
                success: false,
                assignments: Vec::new(),
                routes: Vec::new(),
                attempts,
                steps,
                total_reward,
            });
        }
    }

    Ok(PlacementOutcome {
        service_id: service.id,
        success: true,
        assignments: placed,
        routes,
        attempts,
        steps,
        total_reward,
    })
}
