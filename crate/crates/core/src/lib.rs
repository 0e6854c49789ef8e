pub mod ablation;
pub mod bench;
pub mod corpus;
pub mod gnn;
pub mod graph;
pub mod ir;
pub mod objective;
pub mod prompt;
pub mod rng;
pub mod store;
pub mod train;
