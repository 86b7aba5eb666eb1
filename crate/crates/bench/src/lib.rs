//! Shared fixtures for the pipeline benchmarks.

use vrleak_core::model::Dataset;
use vrleak_core::synth::{generate_population, GeneratorConfig};

/// The population the benchmarks operate on: 10 subjects, two 30 s sessions.
pub fn bench_population() -> Dataset {
    generate_population(&GeneratorConfig {
        n_subjects: 10,
        sessions_per_subject: 2,
        session_duration_s: 30.0,
        identity_strength: 1.0,
        master_seed: 77,
    })
    .expect("valid benchmark config")
}
