mod attention;
mod conv;
mod elementwise;
pub(crate) mod linalg;
mod norm;
pub(crate) mod reduce;
mod seq;
mod shape;

pub use elementwise::softplus_scalar;
pub use norm::{BatchNormState, BatchStats, Mode, DEFAULT_EPS};
