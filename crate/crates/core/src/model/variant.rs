use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Model family: the full hierarchical attention model, its two ablations,
/// and the comparison baselines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Fathom,
    /// No sensor-specific attention: raw inputs feed the first LSTM.
    FathomSa,
    /// No central time attention: first LSTM output feeds the second LSTM.
    FathomCa,
    /// One independent LSTM per task.
    SLstm,
    /// One LSTM shared by all tasks, task-specific heads.
    MLstm,
    /// Logistic (classification) or linear (regression) layer on the
    /// flattened window.
    Lr,
    /// Two shared 16-unit layers on the flattened window, task-specific
    /// output layers.
    Mlp1616,
}

/// Which parameters the coordinator owns and what crosses the wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    /// Nothing shared; every node trains alone.
    Local,
    /// Coordinator owns the time-attention scorer; hidden states go up,
    /// attention weights come down.
    CentralAttention,
    /// Coordinator owns a shared trunk; parameters go down, gradients go up.
    SharedTrunk,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Fathom,
        Variant::FathomSa,
        Variant::FathomCa,
        Variant::SLstm,
        Variant::MLstm,
        Variant::Lr,
        Variant::Mlp1616,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Fathom => "fathom",
            Variant::FathomSa => "fathom_sa",
            Variant::FathomCa => "fathom_ca",
            Variant::SLstm => "s_lstm",
            Variant::MLstm => "m_lstm",
            Variant::Lr => "lr",
            Variant::Mlp1616 => "mlp_16_16",
        }
    }

    pub fn has_sensor_attention(self) -> bool {
        matches!(self, Variant::Fathom | Variant::FathomCa)
    }

    pub fn has_time_attention(self) -> bool {
        matches!(self, Variant::Fathom | Variant::FathomSa)
    }

    pub fn topology(self) -> Topology {
        match self {
            Variant::Fathom | Variant::FathomSa => Topology::CentralAttention,
            Variant::MLstm | Variant::Mlp1616 => Topology::SharedTrunk,
            Variant::FathomCa | Variant::SLstm | Variant::Lr => Topology::Local,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Contract(format!("unknown model variant `{s}`")))
    }
}
