//! Software model of a constrained programmable forwarding device hosting
//! two intrusion-detection pipelines:
//!
//! * an entropy-based DDoS detector that runs entirely in the data plane
//!   ([`entropy`], [`detector`]), and
//! * a windowed flow-statistics collector ([`flow`]) that reports changed
//!   flow descriptors to a control-plane classifier ([`control`]).
//!
//! [`traffic`] produces labeled synthetic traces and reads CSV traces;
//! [`harness`] wires everything into reproducible experiments.

pub mod control;
pub mod dataplane;
pub mod detector;
pub mod entropy;
pub mod flow;
pub mod harness;
pub mod par;
pub mod traffic;

pub use par::Execution;
