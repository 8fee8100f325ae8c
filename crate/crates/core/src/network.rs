//! Untrained agent network: static and intent encoders feeding the recurrent
//! output head. Weights come from a seed; there is no training here.

use serde::{Deserialize, Serialize};

use crate::attention::{
    encode_traced, policy_head_forward, AttentionDump, EncoderConfig, EncoderParams, HeadOutput, HeadParams,
    RecurrentState,
};
use crate::error::{Error, Result};
use crate::intent::INTENT_FEATURE_DIM;
use crate::local_obs::CHANNELS;
use crate::obs::ObservationBundle;
use crate::static_features::STATIC_FEATURE_DIM;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentNetwork {
    pub fov: usize,
    pub static_encoder: EncoderParams,
    pub intent_encoder: EncoderParams,
    pub head: HeadParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkOutput {
    pub head: HeadOutput,
    pub static_attention: AttentionDump,
    pub intent_attention: AttentionDump,
}

impl AgentNetwork {
    /// Both encoders copy `template` except for their input width.
    pub fn new(template: &EncoderConfig, fov: usize, seed: u64) -> Result<Self> {
        let static_config = EncoderConfig { input_dim: STATIC_FEATURE_DIM, ..template.clone() };
        let intent_config = EncoderConfig { input_dim: INTENT_FEATURE_DIM, ..template.clone() };
        let d = template.d;
        let head_in = 2 * d + CHANNELS * fov * fov + 3;
        Ok(Self {
            fov,
            static_encoder: EncoderParams::new(static_config, seed)?,
            intent_encoder: EncoderParams::new(intent_config, seed.wrapping_add(1))?,
            head: HeadParams::new(head_in, d, seed.wrapping_add(2))?,
        })
    }

    pub fn desk(fov: usize, seed: u64) -> Result<Self> {
        Self::new(&EncoderConfig::desk(0), fov, seed)
    }

    pub fn forward(&self, obs: &ObservationBundle, state: &RecurrentState) -> Result<NetworkOutput> {
        if obs.local.fov != self.fov {
            return Err(Error::Shape(format!("observation view {} but network expects {}", obs.local.fov, self.fov)));
        }
        let s = encode_traced(&obs.static_graph.feature_rows(), obs.static_graph.ego_index, &self.static_encoder)?;
        let i = encode_traced(&obs.intent_graph.feature_rows(), obs.ego_id, &self.intent_encoder)?;
        let local = obs.local.flatten();
        let channels = &local[..local.len() - 3];
        let head =
            policy_head_forward(&s.ego_feature(), &i.ego_feature(), channels, &obs.local.goal_vec, &self.head, state)?;
        Ok(NetworkOutput { head, static_attention: s.dump(), intent_attention: i.dump() })
    }
}
