pub mod eval;
pub mod fuse;
pub mod simulate;
pub mod sweep;

pub use eval::{eval, render_table};
pub use fuse::fuse;
pub use simulate::simulate;
pub use sweep::{sweep, GridAxis};
