//! Workbench for air-written digit gestures: synthesizes pen trajectories,
//! replays them on a simulated 6-axis arm, models the wrist-worn IMU, runs
//! the preprocessing chain and a warm-started MLP training protocol, and
//! reports confusion matrices for human-like test data.

pub mod eval;
pub mod imu;
pub mod math;
pub mod pipeline;
pub mod mlp;
pub mod robot;
pub mod signal;
pub mod synth;
