//! Acceptance checks live in `tests/acceptance.rs`; this package exists so that
//! they run after every other test target in the workspace.
