pub mod frame;
pub mod script;
pub mod config;
pub mod context;
pub mod completion;
pub mod preview;
pub mod session;
