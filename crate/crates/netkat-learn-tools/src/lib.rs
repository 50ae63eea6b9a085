pub mod topo;
pub mod bench;
