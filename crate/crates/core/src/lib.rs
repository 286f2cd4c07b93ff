//! Restricted solid-on-solid (RSOS) surface growth on a Poisson lattice.
//!
//! The crate simulates continuous-time RSOS, k-RSOS and ballistic deposition
//! surfaces driven by the space-time Poisson clock rings of a finite box, and
//! provides independent routes to the same heights: the forward dynamics,
//! a minimal-path dynamic program, brute-force path enumeration, pyramid
//! searches and the time-reversed dual process. The [`stats`] and
//! [`experiment`] modules turn those routes into reproducible Monte Carlo
//! checks.

pub mod dual;
pub mod error;
pub mod experiment;
pub mod lattice;
pub mod minpath;
pub mod pyramid;
pub mod rng;
pub mod stats;
pub mod surface;

mod fmt;

pub use error::{Error, Result};
pub use lattice::{Boundary, Event, EventSet, LatticeBox, Site, SpaceTimePoint};
pub use surface::{
    AcceptedLog, AcceptedUpdate, Evolution, HeightField, InitialCondition, Model, Surface,
};
