use std::path::Path;

use serde::{Deserialize, Serialize};

use super::RunConfig;
use crate::error::{Error, Result};
use crate::federated::Federation;
use crate::nn::ParamStore;

const FORMAT: &str = "fathom-checkpoint-1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskCheckpoint {
    pub task_id: String,
    pub params: ParamStore,
}

/// Trained parameters of every party plus the config that produced them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: RunConfig,
    pub tasks: Vec<TaskCheckpoint>,
    pub shared: ParamStore,
}

impl Checkpoint {
    pub fn capture(config: &RunConfig, fed: &Federation) -> Self {
        Checkpoint {
            format: FORMAT.to_string(),
            config: config.clone(),
            tasks: fed
                .nodes()
                .iter()
                .map(|n| TaskCheckpoint {
                    task_id: n.task_id().to_string(),
                    params: n.model().params.clone(),
                })
                .collect(),
            shared: fed.shared_params(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.format != FORMAT {
            return Err(Error::Data(format!(
                "{}: unsupported checkpoint format `{}`",
                path.display(),
                ck.format
            )));
        }
        Ok(ck)
    }

    /// Loads the stored parameters into `fed`, matching tasks by id.
    pub fn restore(&self, fed: &mut Federation) -> Result<()> {
        let ids: Vec<String> = fed.nodes().iter().map(|n| n.task_id().to_string()).collect();
        let stored: Vec<&str> = self.tasks.iter().map(|t| t.task_id.as_str()).collect();
        if ids != stored {
            return Err(Error::Data(format!(
                "checkpoint tasks {stored:?} do not match dataset tasks {ids:?}"
            )));
        }
        let params: Vec<ParamStore> = self.tasks.iter().map(|t| t.params.clone()).collect();
        fed.load_params(&params, &self.shared)
    }
}
