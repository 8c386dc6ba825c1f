//! File formats, experiment drivers and oracle checks around
//! [`fairbayes_core`].

pub mod error;
pub mod experiment;
pub mod io;
pub mod model_file;
pub mod oracle;

pub use error::{Error, Result};
