//! Helpers for the end-to-end checks, mainly a seeded random ruleset
//! generator used to exercise the parser round trip at scale.

pub mod genrules;
