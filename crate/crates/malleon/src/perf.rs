//! Synthetic performance and power model.
//!
//! Stands in for runtime measurement of the MPI-time-to-compute-time (MTCT)
//! ratio and per-node power draw. A job's progress law is derived from the
//! MTCT curve: at `n` nodes the job delivers `n / (1 + mtct(n))` node-seconds
//! of effective work per second, and completes when the accumulated work
//! reaches `work_total`.

use crate::job::JobId;
use serde::{Deserialize, Serialize};

/// Which MTCT curve shape to use.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MtctModel {
    /// `mtct(n) = base + slope * (n - 1)`.
    #[default]
    Linear,
    /// `mtct(n) = base + slope * sqrt(n - 1)`; flattens at scale, mimicking
    /// applications whose communication cost grows sublinearly.
    Sqrt,
}

/// Per-job parameters of the synthetic model.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerfModelSpec {
    pub mtct_base: f64,
    pub mtct_slope: f64,
    pub power_nominal_per_node: f64,
    /// Relative jitter applied to mtct and power; 0 disables.
    #[serde(default)]
    pub noise_amplitude: f64,
    #[serde(default)]
    pub model: MtctModel,
}

impl Default for PerfModelSpec {
    fn default() -> Self {
        PerfModelSpec {
            mtct_base: 0.1,
            mtct_slope: 0.005,
            power_nominal_per_node: 200.0,
            noise_amplitude: 0.0,
            model: MtctModel::Linear,
        }
    }
}

/// One sample as reported to a scheduling strategy.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PerfSample {
    pub job: JobId,
    pub mtct: f64,
    pub power_per_node: f64,
    pub sample_time_ms: i64,
}

/// Deterministic evaluator; all outputs are pure functions of
/// `(spec, job, n, seed)`.
#[derive(Clone, Copy, Debug)]
pub struct PerfModel {
    seed: u64,
}

impl PerfModel {
    pub fn new(seed: u64) -> Self {
        PerfModel { seed }
    }

    /// Uniform in [-1, 1], keyed on (seed, job, n, salt).
    fn jitter(&self, job: JobId, n: u32, salt: u64) -> f64 {
        let mut x = self
            .seed
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add((job.0 as u64) << 32 | n as u64)
            .wrapping_add(salt.wrapping_mul(0xbf58_476d_1ce4_e5b9));
        // splitmix64 finalizer
        x ^= x >> 30;
        x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
        x ^= x >> 27;
        x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
        x ^= x >> 31;
        (x as f64 / u64::MAX as f64) * 2.0 - 1.0
    }

    /// MTCT ratio of `job` when run on `n` nodes.
    pub fn mtct(&self, spec: &PerfModelSpec, job: JobId, n: u32) -> f64 {
        let scale = match spec.model {
            MtctModel::Linear => (n - 1) as f64,
            MtctModel::Sqrt => ((n - 1) as f64).sqrt(),
        };
        let mut m = spec.mtct_base + spec.mtct_slope * scale;
        if spec.noise_amplitude > 0.0 {
            m *= 1.0 + spec.noise_amplitude * self.jitter(job, n, 1);
        }
        m.max(0.0)
    }

    /// Node-seconds of effective work delivered per second at `n` nodes.
    pub fn effective_rate(&self, spec: &PerfModelSpec, job: JobId, n: u32) -> f64 {
        n as f64 / (1.0 + self.mtct(spec, job, n))
    }

    /// Total effective work implied by the static execution time at the
    /// launch size, so that running at `nodes` nodes takes exactly
    /// `static_exec_secs`.
    pub fn work_total(
        &self,
        spec: &PerfModelSpec,
        job: JobId,
        nodes: u32,
        static_exec_secs: f64,
    ) -> f64 {
        static_exec_secs * self.effective_rate(spec, job, nodes)
    }

    /// Total power draw of `job` on `n` nodes, clamped to the user-declared
    /// per-node bounds.
    pub fn power_draw(
        &self,
        spec: &PerfModelSpec,
        job: JobId,
        n: u32,
        pmin_per_node: f64,
        pmax_per_node: f64,
    ) -> f64 {
        let mut p = spec.power_nominal_per_node;
        if spec.noise_amplitude > 0.0 {
            p *= 1.0 + spec.noise_amplitude * self.jitter(job, n, 2);
        }
        let total = p * n as f64;
        total.clamp(pmin_per_node * n as f64, pmax_per_node * n as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(base: f64, slope: f64) -> PerfModelSpec {
        PerfModelSpec {
            mtct_base: base,
            mtct_slope: slope,
            ..PerfModelSpec::default()
        }
    }

    #[test]
    fn linear_mtct_formula() {
        let m = PerfModel::new(0);
        assert_eq!(m.mtct(&spec(0.1, 0.05), JobId(1), 1), 0.1);
        let v = m.mtct(&spec(0.1, 0.05), JobId(1), 5);
        assert!((v - 0.3).abs() < 1e-12);
    }

    #[test]
    fn mtct_is_monotone_in_n() {
        let m = PerfModel::new(7);
        for base in [0.0, 0.1, 0.4] {
            for slope in [0.0, 0.01, 0.1] {
                let s = spec(base, slope);
                let mut prev = f64::NEG_INFINITY;
                for n in 1..=32 {
                    let v = m.mtct(&s, JobId(3), n);
                    assert!(v >= prev, "mtct not monotone at n={n}");
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn effective_rate_base_cases() {
        let m = PerfModel::new(0);
        // mtct = 0 -> rate = n
        assert_eq!(m.effective_rate(&spec(0.0, 0.0), JobId(0), 4), 4.0);
        // mtct = 1 -> half the time in MPI
        assert_eq!(m.effective_rate(&spec(1.0, 0.0), JobId(0), 4), 2.0);
    }

    #[test]
    fn runtime_at_launch_size_equals_static_time() {
        // Algebraic identity: work_total / rate(n0) == static_exec_time.
        let m = PerfModel::new(9);
        for (n0, t) in [(1u32, 267.0), (2, 322.0), (16, 534.0), (32, 100.0)] {
            let s = spec(0.15, 0.004);
            let w = m.work_total(&s, JobId(5), n0, t);
            let runtime = w / m.effective_rate(&s, JobId(5), n0);
            assert!((runtime - t).abs() < 1e-9);
        }
    }

    #[test]
    fn power_draw_is_nominal_times_nodes() {
        let m = PerfModel::new(0);
        let heat = PerfModelSpec {
            power_nominal_per_node: 250.0,
            ..PerfModelSpec::default()
        };
        assert_eq!(m.power_draw(&heat, JobId(0), 4, 0.0, 1000.0), 1000.0);
        let pi = PerfModelSpec {
            power_nominal_per_node: 170.0,
            ..PerfModelSpec::default()
        };
        assert_eq!(m.power_draw(&pi, JobId(0), 1, 0.0, 1000.0), 170.0);
        // clamped to declared bounds
        assert_eq!(m.power_draw(&heat, JobId(0), 2, 100.0, 200.0), 400.0);
    }

    #[test]
    fn zero_noise_is_deterministic() {
        let m = PerfModel::new(42);
        let s = spec(0.2, 0.01);
        assert_eq!(m.mtct(&s, JobId(1), 8), m.mtct(&s, JobId(1), 8));
        let noisy = PerfModelSpec {
            noise_amplitude: 0.05,
            ..s
        };
        // noise is seeded, not random
        assert_eq!(m.mtct(&noisy, JobId(1), 8), m.mtct(&noisy, JobId(1), 8));
        assert_ne!(
            PerfModel::new(1).mtct(&noisy, JobId(1), 8),
            PerfModel::new(2).mtct(&noisy, JobId(1), 8)
        );
    }
}
