pub mod batch;
pub mod calibrate;
pub mod detect;
pub mod scenarios;
pub mod simulate;
