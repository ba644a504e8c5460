pub mod camera;
pub mod dictionary;
pub mod error;
pub mod io;
pub mod lifter;
pub mod limits;
pub mod metrics;
pub mod noise;
pub mod pipeline;
pub mod skeleton;
pub mod temporal;
