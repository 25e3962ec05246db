//! Energy-aware scheduling for batch production machines under time-of-use
//! electricity tariffs.
//!
//! A machine that processes parts in batches is modelled as a timed
//! automaton whose states count finished parts; milestones become deadline
//! constraints on the running clock. Electricity prices are piecewise
//! constant over the day, so when a batch runs matters as much as whether it
//! runs. This crate computes schedules that finish an order on time for the
//! least energy cost, two ways:
//!
//! - [`decision::open_loop_optimal`] searches every feasible schedule ahead
//!   of time and returns the cheapest — exact, but blind to anything that
//!   changes mid-run.
//! - [`decision::llp_run`] drives the machine closed-loop with a limited
//!   lookahead: at every decision point it prices all schedule fragments up
//!   to a configurable window ahead and executes the first event of the
//!   best one. It reacts to runtime disturbances — price changes, order
//!   changes — the moment they take effect.
//!
//! [`simulate`] wraps both behind a common run format with hourly timelines
//! and benchmark comparisons, and [`store`] persists run logs and tariffs
//! as append-only JSONL.
//!
//! Everything is generic over the floating-point scalar via [`Scalar`]
//! (`f64` or `f32`); the `*F64` aliases at the crate root pin the default
//! precision used by the command-line tool.
//!
//! ```
//! use dtsched_core::decision::LookaheadConfig;
//! use dtsched_core::simulate::run_llp;
//! use dtsched_core::{MachineSpecF64, OrderSpecF64, PriceScheduleF64};
//!
//! let machine: MachineSpecF64 = serde_json::from_str(
//!     r#"{
//!         "capacity": 2,
//!         "processing_time_h": 1.0,
//!         "setup_time_h": 0.2,
//!         "power_map_mw": [0.5, 0.8, 1.0],
//!         "inventory_capacity": 3,
//!         "allocated_inventory": 1
//!     }"#,
//! )?;
//! let order: OrderSpecF64 = serde_json::from_str(
//!     r#"{
//!         "start_time_h": 8.0,
//!         "total_demand": 7,
//!         "milestones": [
//!             {"quantity": 2, "deadline_h": 1.0},
//!             {"quantity": 7, "deadline_h": 5.0}
//!         ]
//!     }"#,
//! )?;
//! let prices: PriceScheduleF64 = serde_json::from_str(
//!     r#"{
//!         "segments": [
//!             {"start_h": 8.0, "end_h": 10.0, "price_per_mwh": 100.0},
//!             {"start_h": 10.0, "end_h": 11.0, "price_per_mwh": 78.0},
//!             {"start_h": 11.0, "end_h": 13.0, "price_per_mwh": 70.0}
//!         ]
//!     }"#,
//! )?;
//!
//! let log = run_llp(machine, order, prices, &LookaheadConfig::default(), vec![])?;
//! assert!(log.outcome.is_completed());
//! assert_eq!(log.schedule().to_string(), "[2,2,1,2]");
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod decision;
pub mod planning;
pub mod pta;
pub mod runlog;
pub mod scalar;
pub mod simulate;
pub mod store;
pub mod tariff;

pub use scalar::Scalar;

/// Machine description at the default `f64` precision.
pub type MachineSpecF64 = pta::MachineSpec<f64>;
/// Order description at the default `f64` precision.
pub type OrderSpecF64 = pta::OrderSpec<f64>;
/// Automaton model at the default `f64` precision.
pub type PtaModelF64 = pta::PtaModel<f64>;
/// Tariff at the default `f64` precision.
pub type PriceScheduleF64 = tariff::PriceSchedule<f64>;
/// Disturbance at the default `f64` precision.
pub type DisturbanceF64 = planning::Disturbance<f64>;
/// Runtime controller state at the default `f64` precision.
pub type RuntimeContextF64 = planning::RuntimeContext<f64>;
/// Run record at the default `f64` precision.
pub type RunLogF64 = runlog::RunLog<f64>;
/// Comparison report at the default `f64` precision.
pub type ComparisonReportF64 = simulate::ComparisonReport<f64>;
