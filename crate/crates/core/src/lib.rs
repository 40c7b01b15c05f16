pub mod bytecode;
pub mod cli;
pub mod codegen;
pub mod collections;
pub mod driver;
pub mod frontend;
pub mod optimizer;
pub mod vm;
