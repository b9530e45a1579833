//! File formats, dataset manifests and the `resprate` command line built
//! on [`resp_core`].
//!
//! | file            | module          |
//! |-----------------|-----------------|
//! | signals         | [`signal_io`]   |
//! | `windows.bin`   | [`windows_io`]  |
//! | checkpoints     | [`checkpoint`]  |
//! | manifests       | [`manifest`]    |
//! | pred/ref tables, metrics, reports | [`tables`] |

mod binary;
pub mod bench;
pub mod checkpoint;
pub mod cli;
mod error;
pub mod manifest;
pub mod pipeline;
pub mod signal_io;
pub mod synth_io;
pub mod tables;
pub mod windows_io;

pub use error::{Error, Result};
