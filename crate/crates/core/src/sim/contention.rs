//! Per-node processor-sharing contention.
//!
//! Each resident container adds its demand to the node total. When the total
//! for a resource exceeds capacity, every resident's share of that resource
//! is scaled by `capacity / total`. A job progresses at the rate of its most
//! throttled resource. Capacity is 1.0 for every resource.

use serde::Serialize;

use crate::workload::ResourceProfile;

/// Capacity resources, in vector order. I/O wait is derived, not shared.
pub const CAPACITY_RESOURCES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContentionSnapshot {
    pub node_id: usize,
    /// Summed demand per capacity resource.
    pub demand: [f64; CAPACITY_RESOURCES],
    /// Granted share per capacity resource, `min(demand, 1)`.
    pub granted: [f64; CAPACITY_RESOURCES],
    /// `max(1, max_r demand_r)`.
    pub slowdown: f64,
    /// Summed excess demand over capacity on disk and network.
    pub io_overload: f64,
}

impl ContentionSnapshot {
    pub fn compute<'a>(node_id: usize, residents: impl IntoIterator<Item = (&'a ResourceProfile, u32)>) -> Self {
        let mut demand = [0.0; CAPACITY_RESOURCES];
        for (profile, containers) in residents {
            let d = profile.to_array();
            for r in 0..CAPACITY_RESOURCES {
                demand[r] += d[r] * containers as f64;
            }
        }
        let granted = demand.map(|d| d.min(1.0));
        let slowdown = demand.iter().copied().fold(1.0, f64::max);
        let io_overload = (demand[2] - 1.0).max(0.0) + (demand[3] - 1.0).max(0.0);
        Self {
            node_id,
            demand,
            granted,
            slowdown,
            io_overload,
        }
    }

    /// Fraction of demand actually served on resource `r`.
    pub fn share_factor(&self, r: usize) -> f64 {
        if self.demand[r] > 1.0 {
            1.0 / self.demand[r]
        } else {
            1.0
        }
    }

    /// Progress rate of a resident with the given per-container demand.
    /// Resources the job does not use cannot throttle it.
    pub fn job_rate(&self, demand: &ResourceProfile) -> f64 {
        let d = demand.to_array();
        (0..CAPACITY_RESOURCES)
            .filter(|&r| d[r] > 0.0)
            .map(|r| self.share_factor(r))
            .fold(1.0, f64::min)
    }

    /// Interference proxy in [0, 1).
    pub fn iowait(&self) -> f64 {
        self.io_overload / (1.0 + self.io_overload)
    }

    /// Node-level usage profile for this instant.
    pub fn usage(&self) -> ResourceProfile {
        let g = self.granted;
        ResourceProfile::from_array_unchecked([g[0], g[1], g[2], g[3], self.iowait()])
    }

    /// What one container with `demand` observes on this node: its granted
    /// share per capacity resource, plus its intrinsic I/O wait raised by the
    /// node's interference.
    pub fn observed_by(&self, demand: &ResourceProfile) -> ResourceProfile {
        let d = demand.to_array();
        let mut out = [0.0; 5];
        for r in 0..CAPACITY_RESOURCES {
            out[r] = d[r] * self.share_factor(r);
        }
        let interference = self.iowait();
        out[4] = d[4] + (1.0 - d[4]) * interference;
        ResourceProfile::from_array_unchecked(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(cpu: f64, disk: f64) -> ResourceProfile {
        ResourceProfile::new(cpu, 0.0, disk, 0.0, 0.0).unwrap()
    }

    #[test]
    fn idle_node() {
        let s = ContentionSnapshot::compute(0, std::iter::empty());
        assert_eq!(s.slowdown, 1.0);
        assert_eq!(s.usage(), ResourceProfile::ZERO);
    }

    #[test]
    fn cpu_oversubscription() {
        let a = p(0.75, 0.0);
        let s = ContentionSnapshot::compute(0, [(&a, 1), (&a, 1)]);
        assert_eq!(s.demand[0], 1.5);
        assert_eq!(s.slowdown, 1.5);
        assert_eq!(s.granted[0], 1.0);
        assert!((s.job_rate(&a) - 1.0 / 1.5).abs() < 1e-15);
        assert_eq!(s.iowait(), 0.0);
    }

    #[test]
    fn disk_overload_maps_to_iowait() {
        let a = p(0.0, 0.7);
        let b = p(0.0, 0.6);
        let s = ContentionSnapshot::compute(3, [(&a, 1), (&b, 1)]);
        assert_eq!(s.granted[2], 1.0);
        assert!((s.io_overload - 0.3).abs() < 1e-12);
        assert!((s.iowait() - 0.3 / 1.3).abs() < 1e-12);
    }

    #[test]
    fn untouched_resource_does_not_throttle() {
        let cpu = p(0.9, 0.0);
        let disk = p(0.0, 0.9);
        let s = ContentionSnapshot::compute(0, [(&cpu, 1), (&disk, 1), (&disk, 1)]);
        assert_eq!(s.job_rate(&cpu), 1.0);
        assert!((s.job_rate(&disk) - 1.0 / 1.8).abs() < 1e-15);
    }

    #[test]
    fn container_count_scales_demand() {
        let a = p(0.3, 0.0);
        let s = ContentionSnapshot::compute(0, [(&a, 4)]);
        assert!((s.demand[0] - 1.2).abs() < 1e-12);
    }
}
