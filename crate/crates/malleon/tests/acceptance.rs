//! End-to-end acceptance suite. Each test prints one pass line; a failing
//! assertion marks the corresponding criterion as not met.

use malleon::adapt::{latency, AdaptOp};
use malleon::engine::{run, SimConfig};
use malleon::job::{expand_target, shrink_target, valid_node_set, JobId, JobSpec, NodeConstraint};
use malleon::metrics::{compute, MetricsReport};
use malleon::perf::{MtctModel, PerfModelSpec};
use malleon::power_lp::{check_solution, enumerate_oracle, solve, LpInstance, LpJob, LpWaiting};
use malleon::time::SimTime;
use malleon::trace::audit;
use malleon::workload::{esp_workload, power_workload, PowerWorkloadParams, SubmitEntry, Workload};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::time::Instant;

/// Runs one strategy over a workload, audits the trace, returns metrics.
fn run_audited(strategy: &str, workload: &Workload) -> MetricsReport {
    let config = SimConfig::new(strategy, workload.system_nodes);
    let trace = run(&config, workload).expect("simulation runs");
    audit(&trace).expect("trace audit passes");
    compute(&trace).expect("metrics compute")
}

#[test]
fn criterion_01_esp_workload_fidelity() {
    let start = Instant::now();
    let wl = esp_workload(32, 1.0, 1).unwrap();
    assert_eq!(wl.jobs.len(), 230);

    // (nodes at 32, exec seconds, constraint, count) per job type A..M, Z
    let expected: [(u32, i64, NodeConstraint, usize); 14] = [
        (1, 267, NodeConstraint::None, 75),
        (2, 322, NodeConstraint::Pof2, 9),
        (16, 534, NodeConstraint::None, 3),
        (8, 616, NodeConstraint::Even, 3),
        (16, 315, NodeConstraint::None, 3),
        (2, 1846, NodeConstraint::Pof2, 9),
        (4, 1334, NodeConstraint::Even, 6),
        (5, 1067, NodeConstraint::Odd, 6),
        (1, 1432, NodeConstraint::None, 24),
        (2, 725, NodeConstraint::Pof2, 24),
        (3, 487, NodeConstraint::None, 15),
        (4, 366, NodeConstraint::Even, 36),
        (8, 187, NodeConstraint::None, 15),
        (32, 100, NodeConstraint::None, 2),
    ];
    for &(nodes, exec, constraint, count) in &expected {
        let got = wl
            .jobs
            .iter()
            .filter(|j| {
                j.nodes == nodes
                    && j.static_exec_time == SimTime::from_secs(exec)
                    && j.constraint == constraint
            })
            .count();
        assert_eq!(got, count, "type with {nodes} nodes / {exec}s");
    }
    // 30 s inter-arrival, starting at zero
    for (i, entry) in wl.submit_schedule.iter().enumerate() {
        assert_eq!(entry.time, SimTime::from_secs(30 * i as i64));
    }
    assert!(start.elapsed().as_secs() < 1);
    println!("ACCEPTANCE 1 PASS: ESP workload matches the benchmark table (230 jobs)");
}

#[test]
fn criterion_02_esp_directional_result() {
    let start = Instant::now();
    let wl = esp_workload(32, 1.0, 6).unwrap();
    let bf = run_audited("backfill", &wl);
    let fp = run_audited("fpsma", &wl);
    let pa = run_audited("perf-aware", &wl);

    assert!(
        pa.makespan_s < fp.makespan_s && fp.makespan_s < bf.makespan_s,
        "makespan ordering: perf {} fpsma {} backfill {}",
        pa.makespan_s,
        fp.makespan_s,
        bf.makespan_s
    );
    let improvement = (bf.makespan_s - pa.makespan_s) / bf.makespan_s;
    assert!(
        improvement >= 0.10,
        "makespan improvement over backfill: {improvement:.3}"
    );
    assert!(pa.avg_response_s < fp.avg_response_s && fp.avg_response_s < bf.avg_response_s);
    assert!(pa.avg_waiting_s < fp.avg_waiting_s && fp.avg_waiting_s < bf.avg_waiting_s);
    assert!(start.elapsed().as_secs() < 60);
    println!(
        "ACCEPTANCE 2 PASS: 100% malleable ESP — perf-aware beats fpsma beats backfill, \
         {:.1}% makespan improvement",
        improvement * 100.0
    );
}

#[test]
fn criterion_03_crossover_at_low_malleability() {
    for seed in [1, 2, 3] {
        let wl = esp_workload(32, 0.1, seed).unwrap();
        let bf = run_audited("backfill", &wl);
        let fp = run_audited("fpsma", &wl);
        let pa = run_audited("perf-aware", &wl);
        assert!(
            bf.makespan_s <= fp.makespan_s && bf.makespan_s <= pa.makespan_s,
            "seed {seed}: backfill {} fpsma {} perf {}",
            bf.makespan_s,
            fp.makespan_s,
            pa.makespan_s
        );
    }
    println!("ACCEPTANCE 3 PASS: backfill wins at 10% malleable jobs for 3 seeds");
}

#[test]
fn criterion_04_power_corridor_scenarios() {
    let start = Instant::now();
    let wl = power_workload(1, &PowerWorkloadParams::default());
    let s1 = run_audited("backfill", &wl);
    let s2 = run_audited("power-aware-running-only", &wl);
    let s3 = run_audited("power-aware", &wl);

    assert!(s1.complete && s2.complete && s3.complete);
    assert!(
        s3.corridor_violations <= s2.corridor_violations
            && s2.corridor_violations <= s1.corridor_violations,
        "violations: s3={} s2={} s1={}",
        s3.corridor_violations,
        s2.corridor_violations,
        s1.corridor_violations
    );
    assert_eq!(s3.corridor_violations, 0, "LP with waiting jobs");
    assert!(s1.corridor_violations >= 3, "backfill without redistribution");
    assert!(start.elapsed().as_secs() < 30);
    println!(
        "ACCEPTANCE 4 PASS: corridor violations {}/{}/{} (LP+waiting / LP running-only / backfill)",
        s3.corridor_violations, s2.corridor_violations, s1.corridor_violations
    );
}

fn random_lp_instance(rng: &mut StdRng) -> LpInstance {
    let total_nodes = rng.gen_range(2..=16);
    let constraints = [
        NodeConstraint::None,
        NodeConstraint::Pof2,
        NodeConstraint::Even,
        NodeConstraint::Odd,
        NodeConstraint::Ncube,
    ];
    let mut running = Vec::new();
    for i in 0..rng.gen_range(0..=4) {
        let c = constraints[rng.gen_range(0..constraints.len())];
        let max = rng.gen_range(1..=total_nodes);
        let min = rng.gen_range(1..=max);
        let sizes = valid_node_set(c, min, max);
        if sizes.is_empty() {
            continue;
        }
        let pmin = rng.gen_range(40.0..220.0);
        running.push(LpJob {
            id: JobId(i),
            sizes,
            pmin_per_node: pmin,
            pmax_per_node: pmin + rng.gen_range(0.0..120.0),
        });
    }
    let waiting = if rng.gen_bool(0.5) {
        let p = rng.gen_range(40.0..260.0);
        vec![LpWaiting {
            id: JobId(77),
            nodes: rng.gen_range(1..=4),
            pmin_per_node: p,
            pmax_per_node: p + rng.gen_range(0.0..60.0),
        }]
    } else {
        vec![]
    };
    let lower = rng.gen_range(0.0..2200.0);
    LpInstance {
        running,
        waiting,
        total_nodes,
        p_idle: rng.gen_range(0.0..110.0),
        lower,
        upper: lower + rng.gen_range(1.0..3200.0),
    }
}

#[test]
fn criterion_05_lp_solver_vs_oracle() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0xACCE55);
    for i in 0..500 {
        let inst = random_lp_instance(&mut rng);
        let got = solve(&inst);
        let want = enumerate_oracle(&inst);
        assert_eq!(got.is_some(), want.is_some(), "feasibility, instance {i}");
        if let (Some(a), Some(b)) = (&got, &want) {
            assert_eq!(a.objective, b.objective, "objective, instance {i}");
            assert!(check_solution(&inst, a), "constraint check, instance {i}");
        }
    }
    assert!(start.elapsed().as_secs() < 30);
    println!("ACCEPTANCE 5 PASS: solver matches full-enumeration oracle on 500 instances");
}

#[test]
fn criterion_06_constraint_arithmetic() {
    // worked example: 8 nodes, even constraint, 6 more needed
    let set = valid_node_set(NodeConstraint::Even, 1, 32);
    assert_eq!(shrink_target(8, 6, &set), Some(2));

    let constraints = [
        NodeConstraint::None,
        NodeConstraint::Pof2,
        NodeConstraint::Even,
        NodeConstraint::Odd,
        NodeConstraint::Ncube,
    ];
    let mut runner = proptest::test_runner::TestRunner::new(proptest::test_runner::Config {
        cases: 10_000,
        ..proptest::test_runner::Config::default()
    });
    runner
        .run(
            &(0..5usize, 1u32..=64, 1u32..=64, 1u32..=64, 0u32..=64),
            |(ci, a, b, needed, idle)| {
                let (min, max) = (a.min(b), a.max(b));
                let set = valid_node_set(constraints[ci], min, max);
                if set.is_empty() {
                    // e.g. ncube with no cube in [min, max]
                    return Ok(());
                }
                let current = set[needed as usize % set.len()];
                if let Some(t) = shrink_target(current, needed, &set) {
                    prop_assert!(set.contains(&t));
                    prop_assert!(t <= current.saturating_sub(needed));
                    // largest such value
                    prop_assert!(set
                        .iter()
                        .all(|&v| v <= t || v > current.saturating_sub(needed)));
                }
                if let Some(t) = expand_target(current, idle, &set) {
                    prop_assert!(set.contains(&t));
                    prop_assert!(t > current && t - current <= idle);
                    prop_assert!(set.iter().all(|&v| v <= t || v - current > idle));
                }
                Ok(())
            },
        )
        .unwrap();
    println!("ACCEPTANCE 6 PASS: shrink/expand targets verified on the worked example and 10,000 random cases");
}

#[test]
fn criterion_07_protocol_invariants() {
    // audit the same traces the behavioral criteria rely on
    let esp = esp_workload(32, 1.0, 6).unwrap();
    let esp_low = esp_workload(32, 0.1, 1).unwrap();
    let power = power_workload(1, &PowerWorkloadParams::default());
    let mut audited = 0;
    for (wl, strategies) in [
        (&esp, &["backfill", "fpsma", "perf-aware"][..]),
        (&esp_low, &["fpsma", "perf-aware"][..]),
        (
            &power,
            &["backfill", "power-aware", "power-aware-running-only"][..],
        ),
    ] {
        for s in strategies {
            let config = SimConfig::new(s, wl.system_nodes);
            let trace = run(&config, wl).expect("simulation runs");
            audit(&trace).unwrap_or_else(|e| panic!("audit failed for {s}: {e}"));
            audited += 1;
        }
    }
    println!("ACCEPTANCE 7 PASS: {audited} traces audited with zero protocol violations");
}

/// Rigid job with an exact integer rate (zero MTCT), so every hand-computed
/// duration is exact in floating point.
fn metric_job(id: u32, nodes: u32, exec_secs: i64) -> JobSpec {
    JobSpec {
        id: JobId(id),
        nodes,
        min_nodes: None,
        max_nodes: None,
        constraint: NodeConstraint::None,
        pmin_per_node: 200.0,
        pmax_per_node: 200.0,
        submit_time: SimTime::ZERO,
        static_exec_time: SimTime::from_secs(exec_secs),
        perf: PerfModelSpec {
            mtct_base: 0.0,
            mtct_slope: 0.0,
            power_nominal_per_node: 200.0,
            noise_amplitude: 0.0,
            model: MtctModel::Linear,
        },
    }
}

fn metric_workload(jobs: Vec<JobSpec>) -> Workload {
    let submit_schedule = jobs
        .iter()
        .map(|j| SubmitEntry {
            job: j.id,
            time: j.submit_time,
        })
        .collect();
    Workload {
        system_nodes: 8,
        jobs,
        submit_schedule,
        corridor_schedule: Vec::new(),
    }
}

#[test]
fn criterion_08_metric_formulas() {
    // one job: 4 of 8 nodes for 100 s
    let r1 = run_audited("backfill", &metric_workload(vec![metric_job(0, 4, 100)]));
    assert_eq!(r1.makespan_s, 100.0);
    assert_eq!(r1.avg_utilization, 0.5);
    assert_eq!(r1.avg_waiting_s, 0.0);
    assert_eq!(r1.avg_response_s, 100.0);

    // two jobs: the second waits for the first to finish
    let r2 = run_audited(
        "backfill",
        &metric_workload(vec![metric_job(0, 6, 100), metric_job(1, 4, 50)]),
    );
    assert_eq!(r2.makespan_s, 150.0);
    assert_eq!(r2.avg_waiting_s, 50.0);
    assert_eq!(r2.avg_response_s, 125.0);
    assert_eq!(r2.avg_utilization, 800.0 / 1200.0);

    // three jobs: the third backfills into the head job's shadow
    let r3 = run_audited(
        "backfill",
        &metric_workload(vec![
            metric_job(0, 6, 100),
            metric_job(1, 4, 200),
            metric_job(2, 2, 50),
        ]),
    );
    assert_eq!(r3.makespan_s, 300.0);
    assert_eq!(r3.avg_waiting_s, 100.0 / 3.0);
    assert_eq!(r3.avg_response_s, 450.0 / 3.0);
    assert_eq!(r3.avg_utilization, 1500.0 / 2400.0);

    // the two independent utilization routes agreed to 1e-9 inside compute()
    println!("ACCEPTANCE 8 PASS: hand-computed 1/2/3-job metrics match exactly");
}

#[test]
fn criterion_09_determinism() {
    let esp = esp_workload(32, 1.0, 6).unwrap();
    let power = power_workload(1, &PowerWorkloadParams::default());
    for (wl, strategy) in [(&esp, "perf-aware"), (&power, "power-aware")] {
        let config = SimConfig::new(strategy, wl.system_nodes);
        let a = run(&config, wl).unwrap().to_jsonl();
        let b = run(&config, wl).unwrap().to_jsonl();
        assert_eq!(a, b, "{strategy}: traces differ between identical runs");
    }
    println!("ACCEPTANCE 9 PASS: identical runs produce byte-identical traces");
}

#[test]
fn criterion_10_adaptation_latency_endpoints() {
    assert_eq!(latency(AdaptOp::Expand, 32), SimTime::from_millis(3100));
    assert_eq!(latency(AdaptOp::Shrink, 32), SimTime::from_millis(1800));
    println!("ACCEPTANCE 10 PASS: latency endpoints 3.1 s (expand) and 1.8 s (shrink)");
}
