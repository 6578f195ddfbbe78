pub mod apt;
pub mod confidence;
pub mod confusion;
pub mod cossim;
pub mod report;
pub mod snp;
pub mod synth;

use std::path::PathBuf;

/// Settings shared by every subcommand.
pub struct Ctx {
    pub out: PathBuf,
}
