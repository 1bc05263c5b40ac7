//! Non-learning queue disciplines. Each returns indices into the input in
//! service order; the input order is the arrival order.

use crate::dypr::PriorityLabel;
use crate::workload::ServiceRequest;

pub fn fifo_order(services: &[ServiceRequest]) -> Vec<usize> {
    (0..services.len()).collect()
}

/// Highest priority first, compared by macro then micro class; ties keep
/// arrival order.
pub fn priority_order(services: &[ServiceRequest]) -> Vec<usize> {
    let labels: Vec<PriorityLabel> = services
        .iter()
        .map(|s| PriorityLabel::from_value(s.priority()))
        .collect();
    let mut order: Vec<usize> = (0..services.len()).collect();
    order.sort_by(|&a, &b| {
        (labels[b].macro_class, labels[b].micro_class)
            .cmp(&(labels[a].macro_class, labels[a].micro_class))
    });
    order
}

/// Weighted round-robin over macro classes: each round visits classes from
/// 9 down to 0 and serves up to `class + 1` services from each, FIFO within
/// a class.
pub fn wfq_order(services: &[ServiceRequest]) -> Vec<usize> {
    let mut queues: Vec<std::collections::VecDeque<usize>> = vec![Default::default(); 10];
    for (i, s) in services.iter().enumerate() {
        let class = PriorityLabel::from_value(s.priority()).macro_class as usize;
        queues[class].push_back(i);
    }
    let mut order = Vec::with_capacity(services.len());
    while order.len() < services.len() {
        for class in (0..10).rev() {
            for _ in 0..=class {
                match queues[class].pop_front() {
                    Some(i) => order.push(i),
                    None => break,
                }
            }
        }
    }
    order
}
