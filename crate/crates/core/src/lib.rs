//! Branch-and-cut MILP solver whose branching rules can score candidates by
//! the Gomory mixed-integer cuts of their tableau rows.

pub mod bench;
pub mod bnb;
pub mod branching;
pub mod cutgen;
pub mod io;
pub mod model;
pub mod simplex;
