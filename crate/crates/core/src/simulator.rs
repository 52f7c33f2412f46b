//! Deterministic cycle-driven engine.
