pub mod alias;
pub mod bench;
pub mod dataflow;
pub mod driver;
pub mod interfaces;
pub mod ir;
pub mod pipeline;
pub mod reuse;
pub mod runtime;
