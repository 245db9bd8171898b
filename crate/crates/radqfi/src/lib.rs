pub mod channel;
pub mod contraction;
pub mod degenerate;
pub mod error;
pub mod haar;
pub mod hks;
pub mod lindblad;
pub mod linalg;
pub mod model_io;
pub mod models;
pub mod oracle;
pub mod qfi;
pub mod spectral;
