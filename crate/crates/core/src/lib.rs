//! Indoor location-aware smart environment toolkit.
//!
//! The crate combines four subsystems that together re-create a
//! desk-scale smart-office deployment:
//!
//! * a sensor-fusion localization engine ([`motion`] pedestrian dead
//!   reckoning + [`ranging`] WiFi distance estimates + [`floorplan`]
//!   constraints fused by the [`tracker`] particle filter),
//! * a WiFi-fingerprint room recognizer ([`fingerprint`]),
//! * a gateway service managing a simulated wireless sensor/actuator
//!   network ([`gateway`]),
//! * an automation engine that drives appliances from tracked location
//!   ([`automation`]).
//!
//! The [`simulator`] synthesizes walks, IMU/RSS traces, fingerprint
//! surveys and environmental dynamics over a floor plan, and the
//! [`harness`] reproduces the checkpoint-walk evaluation protocol
//! end to end.

pub mod automation;
pub mod fingerprint;
pub mod floorplan;
pub mod gateway;
pub mod harness;
pub mod motion;
pub mod ranging;
pub mod simulator;
pub mod tracker;

pub use floorplan::{FloorPlan, Point2D};
