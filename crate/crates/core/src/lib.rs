pub mod data;
pub mod error;
pub mod model;
pub mod ms;
pub mod optim;
pub mod special;
pub mod ss;
pub mod stats;
pub mod estimation;
pub mod gof;
pub mod sim;
pub mod cli;
