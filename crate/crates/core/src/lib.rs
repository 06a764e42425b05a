//! Lane-change games on a two-lane cellular automaton.
//!
//! Vehicles that want to change lanes negotiate with the lag vehicle in the
//! target lane. Tradable vehicles (TVs) can pay each other to give way;
//! everyone else bargains without money. The crate provides the game
//! solvers, the automaton, a ledger of every game, and the parameter sweeps
//! built on top of them.

pub mod game;
pub mod metrics;
pub mod sim;
pub mod experiments;
pub mod io;
