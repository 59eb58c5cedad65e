pub mod cnf;
pub mod features;
pub mod harness;
pub mod lmp;
pub mod logspace;
pub mod monitor;
pub mod pbar;
pub mod portfolio;
pub mod regress;
pub mod rng;
pub mod solver;
pub mod treetrace;
pub mod wbe;
