pub mod abc;
pub mod error;
pub mod gibbs;
pub mod io;
pub mod kernels;
pub mod partition;
pub mod pitman_yor;
pub mod scenarios;
pub mod summaries;
pub mod transport;

pub use error::{Error, Result};
