//! Maximal safe sets for partially controlled one-dimensional maps.
//!
//! A trajectory `x_{n+1} = f(x_n) + ξ_n + u_n` is disturbed by `|ξ_n| ≤ β`
//! and corrected by `|u_n| ≤ U`, with `U < β`. The crate computes the
//! largest set `S` inside a target interval `Q` from which the controller
//! can always stay in `S`, simulates controlled and uncontrolled runs, and
//! studies how `S` bifurcates as `U` and `β` vary.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision.

pub mod bifurcation;
pub mod control_sim;
pub mod interval_set;
pub mod map_model;
pub mod safeset;
pub mod scalar;

pub use bifurcation::{
    check_b1, check_b2, scan_line, sweep, u_min, umin_slope_check, BifurcationEvent,
    BifurcationKind, BoundarySystem, CellStatus, SweepCell, SweepOptions,
};
pub use control_sim::{
    adversarial_escape, control_law, simulate_controlled, simulate_perturbed,
    simulate_uncontrolled, DisturbanceStrategy, EscapeCertificate, EscapeOptions, SimError,
    TrajectoryRecord,
};
pub use interval_set::{Interval, IntervalSet, SetError};
pub use map_model::{MapDefinition, MapError, PiecewiseLinearMap, ASYMMETRIC_TENT};
pub use safeset::{
    maximal_safe_set, sculpt_step, verify_maximality, verify_safe, ControlParams, Regime,
    SafeSetError, SafeSetResult, SolverOptions,
};
pub use scalar::Scalar;

pub type Interval64 = Interval<f64>;
pub type Interval32 = Interval<f32>;
pub type IntervalSet64 = IntervalSet<f64>;
pub type IntervalSet32 = IntervalSet<f32>;
pub type PiecewiseLinearMap64 = PiecewiseLinearMap<f64>;
pub type PiecewiseLinearMap32 = PiecewiseLinearMap<f32>;
pub type ControlParams64 = ControlParams<f64>;
pub type ControlParams32 = ControlParams<f32>;
pub type SafeSetResult64 = SafeSetResult<f64>;
pub type SafeSetResult32 = SafeSetResult<f32>;
pub type TrajectoryRecord64 = TrajectoryRecord<f64>;
pub type TrajectoryRecord32 = TrajectoryRecord<f32>;
pub type SweepCell64 = SweepCell<f64>;
pub type BoundarySystem64 = BoundarySystem<f64>;
