//! Graphs of finite groups, Bass–Serre trees, Cayley–Abels graphs and the
//! fineness and small-cancellation machinery built on them.

pub mod bass_serre;
pub mod cayley_abels;
pub mod cli;
pub mod complexes;
pub mod coset_enumeration;
pub mod fineness;
pub mod finite_groups;
pub mod graph;
pub mod graph_of_groups;
pub mod small_cancellation;
