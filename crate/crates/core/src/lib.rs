//! Exact analysis of contextuality in finite systems of random variables.

pub mod catalog;
pub mod consistify;
pub mod coupling;
pub mod error;
pub mod hvm;
pub mod lp;
pub mod oracle;
pub mod pmf;
pub mod rational;
pub mod system;

pub use coupling::{
    cbd_analyze, find_reduced_coupling, max_equal_prob, multimaximal_coupling, CbdVerdict, Coupling,
    MultimaximalResult, ReducedCoupling,
};
pub use consistify::{consistify, verify_consistified, ConsistifiedSystem, ConsistifyOutcome};
pub use error::{Error, Result};
pub use hvm::{
    build_bell, build_consistified_hvms, build_gen, sample, to_cim_no_fc, to_fc_no_cim, verify_witness, HvmWitness,
    ModelClass, VerificationReport,
};
pub use oracle::{cross_validate, exhaustive_pair_max, fine_oracle, CrossReport};
pub use pmf::{Outcome, Pmf, PmfError};
pub use rational::Rational;
pub use system::{check_connectedness, Bunch, ConsistencyReport, ContentId, ContextId, System, SystemBuilder};
