//! End-to-end jobs through the engine, including crash injection through an
//! out-of-process simulator.

use std::path::Path;

use smc_core::engine::*;
use smc_core::error::AnalysisError;
use smc_core::rng::SeedPlan;
use smc_core::sim::SimError;

/// Noisy counter ("x" = steps + U(0,1) drawn per step) that exits abruptly
/// when reset with `argv[1]` as seed.
const FAULTY_SIM: &str = r#"
import random, sys
crash_seed = sys.argv[1]
steps, noise = 0, 0.0
for line in sys.stdin:
    parts = line.split()
    if parts[0] == "RESET":
        if parts[1] == crash_seed:
            sys.exit(3)
        random.seed(int(parts[1]))
        steps, noise = 0, 0.0
        out = "OK"
    elif parts[0] == "NEXT":
        steps += 1
        noise = random.random()
        out = "OK"
    elif parts[0] == "EVAL":
        out = repr(steps + noise) if parts[1] == "x" else "ERR unknown observable"
    else:
        break
    sys.stdout.write(out + "\n")
    sys.stdout.flush()
"#;

fn python() -> Option<&'static str> {
    ["python3", "python"].into_iter().find(|p| std::process::Command::new(p).arg("-V").output().is_ok())
}

fn faulty_config(dir: &Path, crash_index: u64, parallelism: usize) -> Option<EngineConfig> {
    let py = python()?;
    let script = dir.join("faulty_sim.py");
    std::fs::write(&script, FAULTY_SIM).unwrap();
    let seed = SeedPlan::new(0).derive_seed(crash_index);
    let model = ModelChoice::new(format!("cmd:{py} {} {seed}", script.display()));
    let mut c = EngineConfig::new(
        Some(model),
        AnalysisRequest::Transient { observables: vec!["x".into()], times: vec![1, 2, 3] },
    );
    // Unreachable precision: only the budget or the crash ends the run.
    c.delta = 1e-9;
    c.max_sims = Some(200);
    c.parallelism = parallelism;
    Some(c)
}

#[test]
fn crashed_worker_fails_the_job_with_its_seed_and_keeps_partial_rows() {
    let dir = tempfile::tempdir().unwrap();
    let Some(c) = faulty_config(dir.path(), 57, 3) else {
        eprintln!("SKIP: no python interpreter");
        return;
    };
    let failure = run_job(&c).unwrap_err();
    let expected_seed = SeedPlan::new(0).derive_seed(57);
    match &failure.error {
        EngineError::Analysis(AnalysisError::Aborted { partial, source }) => {
            assert_eq!(partial.total_sims, 40);
            match source {
                SimError::ReplicationFailed { seed, .. } => assert_eq!(*seed, expected_seed),
                other => panic!("{other:?}"),
            }
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(failure.error.exit_code(), 1);
    let out = dir.path().join("out");
    let written = emit_partial(&failure, &out).unwrap();
    assert!(written.iter().all(|p| p.extension().unwrap() == "partial"));
    assert!(!out.join(TRANSIENT_CSV).exists());
    let rows = std::fs::read_to_string(out.join(format!("{TRANSIENT_CSV}.partial"))).unwrap();
    let lines: Vec<_> = rows.lines().collect();
    assert_eq!(lines.len(), 4);
    for (line, t) in lines[1..].iter().zip(1..) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!((f[0], f[1]), ("x", t.to_string().as_str()));
        let mean: f64 = f[2].parse().unwrap();
        assert!(mean > t as f64 - 1.0 && mean < t as f64 + 1.0, "{line}");
        assert_eq!((f[4], f[5]), ("40", "false"));
    }
    let manifest = std::fs::read_to_string(out.join(format!("{MANIFEST_JSON}.partial"))).unwrap();
    assert!(manifest.contains(&expected_seed.to_string()), "{manifest}");
    assert!(manifest.contains("\"completed\": false"));
}

#[test]
fn external_simulator_matches_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    // The crash seed is never reached: max_sims stops at 60.
    let Some(mut c) = faulty_config(dir.path(), 1_000_000, 1) else {
        eprintln!("SKIP: no python interpreter");
        return;
    };
    c.max_sims = Some(60);
    let one = run_job(&c).unwrap();
    c.parallelism = 4;
    let four = run_job(&c).unwrap();
    assert_eq!(one.outputs.render(), four.outputs.render());
    assert_eq!(four.manifest.total_replications, 60);
    assert_eq!(four.manifest.replications_per_worker.iter().sum::<u64>(), 60);
}
