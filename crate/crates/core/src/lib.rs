//! Local interest profiling with differential privacy and entropy monitoring,
//! tf-idf service matching, multi-server information-theoretic PIR, and
//! served-ad classification.

pub mod classifier;
pub mod dp;
pub mod entropy;
pub mod format;
pub mod ids;
pub mod matcher;
pub mod pir;
pub mod profile;
