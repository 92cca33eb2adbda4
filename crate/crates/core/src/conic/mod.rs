//! Conic solvers: the interior-point core, the complex SDP front end, the SOCP
//! feasibility oracle and Gaussian randomization.

pub mod dense;
pub mod ipm;
pub mod sdp;
pub mod socp;
pub mod randomize;
