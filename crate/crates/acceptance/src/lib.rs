//! Acceptance suite for `cbf-trigger`, kept in its own package so that cargo
//! runs it after the library's own suites. The checks live in
//! `tests/acceptance.rs`; run them with
//! `cargo test -p cbf-trigger-acceptance`.
