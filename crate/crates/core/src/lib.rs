pub mod analysis;
pub mod fpm;
pub mod game;
pub mod geometry;
pub mod harness;
pub mod linalg;
