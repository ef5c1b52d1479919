//! Finite-product sets and IP-set oracles.

mod predicate;
mod quotient;
mod search;
mod window;

pub use predicate::{QuotientForm, SetPredicate};
pub use quotient::{is_ip_quotient, quotient_ip_class, QuotientOptions};
pub use search::{
    dip_witness_bounded, fp_set, iip_witness_bounded, ip_witness_bounded, partition_check, Bounds, IpWitness,
    OracleVerdict, PartitionReport, SearchOptions,
};
pub use window::{avoiding_coloring, hindman_window, verify_window_certificate, WindowOutcome};
