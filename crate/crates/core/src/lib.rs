//! Energy-efficient joint flow control and power allocation for a two-tier
//! small-cell network with mmWave backhaul, plus the virtual-connection
//! queueing model and the experiment sweeps built on both.

pub mod config;
pub mod ee;
pub mod experiments;
pub mod flow;
pub mod lp;
pub mod par;
pub mod queueing;
pub mod radio;
pub mod topology;
