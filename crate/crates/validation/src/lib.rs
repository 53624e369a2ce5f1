//! Holds the `acceptance` test target, which checks the solvers against
//! independent oracles and prints one PASS or FAIL line per check.
//!
//! Run it with `cargo test -p cogmac-validation --test acceptance`.
