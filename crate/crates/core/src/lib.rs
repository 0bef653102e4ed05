//! Simulation and control of a dual-swing-leg robot propelled by tilted
//! anti-bias wheels.
//!
//! The crate is layered bottom-up:
//!
//! * [`dynamics`]: force balance, wheel deflection law and acceleration.
//! * [`gait`]: the swing-phase state machine.
//! * [`sim`]: fixed-step integration, traces and the scenario library.
//! * [`control`]: fuzzy-scheduled PID speed loop, motor lag and rudder steering.
//! * [`sysid`]: least-squares fit of the quadratic speed model.
//!
//! ```
//! use swingsim::{run, steady_velocity, Scenario};
//!
//! let scenario = Scenario { duration_s: 8.0, ..Scenario::default() };
//! let trace = run(&scenario).unwrap();
//! let v = steady_velocity(&trace, &scenario.gait).unwrap();
//! assert!(v > 0.3 && v < 0.6);
//! ```

// Range checks are written as `!(x > lo)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod dynamics;
pub mod error;
pub mod gait;
pub mod params;
pub mod sim;
pub mod sysid;

pub use control::ControllerConfig;
pub use error::{DynamicsError, FitError, ParamError, SimError};
pub use gait::{GaitConfig, LegPhase, PausePlacement, Phase};
pub use params::{RobotParams, TerrainParams, WheelMode};
pub use sim::{run, steady_velocity, Scenario, SimState, Trace};
pub use sysid::{evaluate, fit_speed_model, SpeedModel, SpeedSample};
