pub mod frontend;
pub mod sw;
pub mod analysis;
pub mod eval;
pub mod refactor;
pub mod pipeline;
pub mod sim;
