pub mod array;
pub mod figure;
pub mod inference;
pub mod simulation;
pub mod testing;
