//! Waiting-time bookkeeping for a sequentially deployed queue and the
//! admission gate that rejects services whose wait exceeded their
//! threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Elapsed waits for a queue of `n` services deployed front to back.
///
/// Entry `(i, j)` is the sum of the first `min(i + 1, j)` deployment
/// durations (zero in column 0), so the diagonal holds each service's total
/// wait.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaitMatrix {
    size: usize,
    durations: Vec<f64>,
    /// `prefix[k]` is the sum of the first `k` durations.
    prefix: Vec<f64>,
}

impl WaitMatrix {
    pub fn new(size: usize) -> Self {
        WaitMatrix {
            size,
            durations: Vec::with_capacity(size),
            prefix: vec![0.0],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    pub fn recorded(&self) -> usize {
        self.durations.len()
    }

    /// Records how long the service at `position` held the deployer.
    /// Positions must arrive in queue order.
    pub fn record_deployment(&mut self, position: usize, duration: f64) -> Result<()> {
        if position != self.durations.len() || position >= self.size {
            return Err(Error::InvalidState(format!(
                "deployment recorded out of order: expected position {}, got {position}",
                self.durations.len()
            )));
        }
        if !(duration >= 0.0) || !duration.is_finite() {
            return Err(Error::InvalidArgument(
                "duration must be finite and >= 0".into(),
            ));
        }
        self.durations.push(duration);
        let last = *self.prefix.last().expect("prefix starts non-empty");
        self.prefix.push(last + duration);
        Ok(())
    }

    /// Total wait of the service at `position`; every service ahead of it
    /// must already be recorded.
    pub fn total_wait(&self, position: usize) -> Result<f64> {
        if position > self.durations.len() || position >= self.size {
            return Err(Error::InvalidState(format!(
                "wait of position {position} is not determined yet"
            )));
        }
        Ok(self.prefix[position])
    }

    /// Entry `(row, col)`. Durations not yet recorded count as zero.
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        if col == 0 {
            return 0.0;
        }
        let k = (row + 1).min(col).min(self.durations.len());
        self.prefix[k]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.size)
            .map(|i| (0..self.size).map(|j| self.entry(i, j)).collect())
            .collect()
    }
}

/// 1 when the accumulated wait is within the threshold (inclusive).
pub fn admit(total_wait: f64, threshold_wait: f64) -> u8 {
    u8::from(total_wait <= threshold_wait)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_four_service_queue() {
        let x = [3.0, 5.0, 7.0];
        let mut m = WaitMatrix::new(4);
        for (k, &d) in x.iter().enumerate() {
            m.record_deployment(k, d).unwrap();
        }
        let rows = m.to_rows();
        let expect = vec![
            vec![0.0, 3.0, 3.0, 3.0],
            vec![0.0, 3.0, 8.0, 8.0],
            vec![0.0, 3.0, 8.0, 15.0],
            vec![0.0, 3.0, 8.0, 15.0],
        ];
        assert_eq!(rows, expect);
        assert_eq!(m.total_wait(0).unwrap(), 0.0);
        assert_eq!(m.total_wait(1).unwrap(), 3.0);
        assert_eq!(m.total_wait(3).unwrap(), 15.0);
    }

    #[test]
    fn zero_durations() {
        let mut m = WaitMatrix::new(3);
        for k in 0..3 {
            m.record_deployment(k, 0.0).unwrap();
        }
        assert!(m.to_rows().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn out_of_order_is_rejected() {
        let mut m = WaitMatrix::new(3);
        assert!(m.record_deployment(1, 1.0).is_err());
        m.record_deployment(0, 1.0).unwrap();
        assert!(m.record_deployment(0, 1.0).is_err());
        assert!(m.total_wait(2).is_err());
        assert!(m.record_deployment(1, -1.0).is_err());
    }

    #[test]
    fn admission_boundary() {
        assert_eq!(admit(8.0, 10.0), 1);
        assert_eq!(admit(8.0, 8.0), 1);
        assert_eq!(admit(8.001, 8.0), 0);
    }

    proptest! {
        #[test]
        fn diagonal_is_sum_ahead(xs in prop::collection::vec(0.0f64..20.0, 1..30)) {
            let n = xs.len();
            let mut m = WaitMatrix::new(n);
            for (k, &d) in xs.iter().enumerate() {
                m.record_deployment(k, d).unwrap();
            }
            let rows = m.to_rows();
            for i in 0..n {
                let ahead: f64 = xs[..i].iter().sum();
                prop_assert!((rows[i][i] - ahead).abs() < 1e-9);
                prop_assert!(rows[i].windows(2).all(|w| w[0] <= w[1]));
            }
        }

        #[test]
        fn rejection_is_monotone(xs in prop::collection::vec(0.0f64..10.0, 1..30), t in 0.0f64..60.0) {
            let mut m = WaitMatrix::new(xs.len());
            let mut rejected = false;
            for (k, &d) in xs.iter().enumerate() {
                let ok = admit(m.total_wait(k).unwrap(), t) == 1;
                prop_assert!(!(rejected && ok));
                rejected |= !ok;
                m.record_deployment(k, d).unwrap();
            }
        }
    }
}
