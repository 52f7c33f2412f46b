//! Experiment harness: data generation, metrics, sweeps, CSV output.
