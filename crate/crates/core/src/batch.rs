//! Batch execution of independent simulation runs.
//!
//! Each run is a pure function of its job description, so a batch can be
//! executed in any order, or in parallel, without changing a single output
//! byte. With the `parallel` feature (on by default) [`run_batch`] fans the
//! jobs out across a rayon thread pool; [`run_batch_sequential`] always runs
//! them one by one on the calling thread. Both return results in job order.

use crate::metrics::MetricsReport;
use crate::scenario::Scenario;
use crate::sim::{run, Architecture, SimError};

/// One simulation run: scenario, architecture, seed, and length.
#[derive(Debug, Clone)]
pub struct RunJob {
    pub scenario: Scenario,
    pub arch: Architecture,
    pub seed: u64,
    pub ticks: u64,
}

impl RunJob {
    fn execute(&self) -> Result<MetricsReport, SimError> {
        run(&self.scenario, self.arch, self.seed, self.ticks)
    }
}

/// Runs every job on the calling thread, in order.
pub fn run_batch_sequential(jobs: &[RunJob]) -> Vec<Result<MetricsReport, SimError>> {
    jobs.iter().map(RunJob::execute).collect()
}

/// Runs the jobs across the rayon thread pool. Results are returned in job
/// order and are identical to the sequential ones.
#[cfg(feature = "parallel")]
pub fn run_batch(jobs: &[RunJob]) -> Vec<Result<MetricsReport, SimError>> {
    use rayon::prelude::*;
    jobs.par_iter().map(RunJob::execute).collect()
}

/// Sequential fallback used when the `parallel` feature is disabled.
#[cfg(not(feature = "parallel"))]
pub fn run_batch(jobs: &[RunJob]) -> Vec<Result<MetricsReport, SimError>> {
    run_batch_sequential(jobs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    fn jobs() -> Vec<RunJob> {
        let text = r#"{
            "arena": {"width": 80, "height": 80},
            "players": [
                {"id": "p1", "position": {"x": 0, "y": 0}, "radio_range": 30, "speed": 2.0,
                 "devices": [{"id": "d", "compute": 8, "battery": 2000,
                              "interfaces": [{"class": "short_range", "bandwidth": 10}]}]},
                {"id": "p2", "position": {"x": 15, "y": 5}, "radio_range": 30, "speed": 1.0,
                 "devices": [{"id": "d", "compute": 8, "battery": 2000,
                              "interfaces": [{"class": "short_range", "bandwidth": 10}]}]},
                {"id": "p3", "position": {"x": 5, "y": 18}, "radio_range": 30,
                 "devices": [{"id": "d", "compute": 8, "battery": 2000,
                              "interfaces": [{"class": "short_range", "bandwidth": 10}]}]}
            ],
            "services": [{"id": "world", "kind": "game_state_management"}],
            "bots": [{"id": "orc", "event_rate": 0.5}]
        }"#;
        let scenario = parse_scenario(text).unwrap();
        let mut jobs = Vec::new();
        for seed in 0..6 {
            for arch in [Architecture::PureP2P, Architecture::HybridDistributed] {
                jobs.push(RunJob {
                    scenario: scenario.clone(),
                    arch,
                    seed,
                    ticks: 40,
                });
            }
        }
        jobs
    }

    #[test]
    fn parallel_and_sequential_agree_byte_for_byte() {
        let jobs = jobs();
        let par = run_batch(&jobs);
        let seq = run_batch_sequential(&jobs);
        assert_eq!(par.len(), seq.len());
        for (a, b) in par.iter().zip(&seq) {
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    assert_eq!(a.to_json(), b.to_json());
                    assert_eq!(a.to_csv(), b.to_csv());
                }
                (Err(a), Err(b)) => assert_eq!(a.to_string(), b.to_string()),
                _ => panic!("parallel and sequential runs disagree on success"),
            }
        }
    }

    #[test]
    fn failures_surface_per_job() {
        let mut jobs = jobs();
        // Direct client-server needs a server; these scenarios have none.
        jobs[0].arch = Architecture::ClientServerDirect;
        let results = run_batch(&jobs);
        assert!(matches!(results[0], Err(SimError::MissingServer(_))));
        assert!(results[1].is_ok());
    }
}
