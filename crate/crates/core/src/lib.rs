pub mod reactor;
pub mod actuation;
pub mod director;
pub mod simworld;
pub mod skills;
pub mod llm;
pub mod harness;
