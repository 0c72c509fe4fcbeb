pub mod detect;
pub mod eval;
pub mod generate;
pub mod sweep;
pub mod train;
