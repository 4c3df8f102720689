//! TOML configuration for training runs.
//!
//! ```toml
//! [train]
//! seed = 7
//! epochs = 40
//! learning_rate = 0.01
//!
//! [model]
//! filters = 20
//! ```
//!
//! Missing keys take their defaults; unknown keys are rejected.

use std::path::Path;

use deeplift_core::genomics::CnnSpec;
use deeplift_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainFile {
    pub train: TrainConfig,
    pub model: CnnSpec,
}

impl TrainFile {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let file: TrainFile = toml::from_str(text).map_err(|e| Error::InvalidConfig {
            path: origin.to_path_buf(),
            message: e.message().to_string()
                + &e.span()
                    .map(|s| format!(" (at byte {})", s.start))
                    .unwrap_or_default(),
        })?;
        file.train.validate().map_err(|e| Error::InvalidConfig {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_to_string(path)?, path)
    }
}
