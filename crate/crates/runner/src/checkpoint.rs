//! Self-describing JSON checkpoints of single networks.
//!
//! Layer shapes, activation tags, parameters and Adam moments are stored
//! as-is; floats are written in shortest round-trip form, so a load
//! reproduces the saved network bit for bit.

use std::path::Path;

use cesslgan_core::nn::{Architecture, DiscriminatorNet, GeneratorNet, NetworkParams};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Result, RunError};

pub const FORMAT: &str = "cesslgan-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Generator,
    Discriminator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub role: Role,
    /// Seed of the repetition that produced the network.
    pub seed: u64,
    pub architecture: Architecture,
    pub params: NetworkParams,
}

impl Checkpoint {
    pub fn generator(g: &GeneratorNet, arch: &Architecture, seed: u64) -> Self {
        Self::new(Role::Generator, g.params.clone(), arch, seed)
    }

    pub fn discriminator(d: &DiscriminatorNet, arch: &Architecture, seed: u64) -> Self {
        Self::new(Role::Discriminator, d.params.clone(), arch, seed)
    }

    fn new(role: Role, params: NetworkParams, arch: &Architecture, seed: u64) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            role,
            seed,
            architecture: *arch,
            params,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("checkpoint serialises");
        std::fs::write(path, text + "\n").map_err(io_err(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let fail = |message: String| RunError::Checkpoint {
            path: path.to_owned(),
            message,
        };
        let c: Checkpoint = serde_json::from_str(&text).map_err(|e| fail(e.to_string()))?;
        if c.format != FORMAT || c.version != VERSION {
            return Err(fail(format!("unsupported format {} v{}", c.format, c.version)));
        }
        c.check_shapes().map_err(fail)?;
        Ok(c)
    }

    fn expected_shapes(&self) -> Vec<(usize, usize)> {
        let a = &self.architecture;
        match self.role {
            Role::Generator => vec![(a.latent_dim, a.hidden), (a.hidden, a.data_dim)],
            Role::Discriminator => vec![(a.data_dim, a.hidden), (a.hidden, 1), (a.hidden, a.classes)],
        }
    }

    fn check_shapes(&self) -> Result<(), String> {
        let want = self.expected_shapes();
        let layers = &self.params.layers;
        if layers.len() != want.len() {
            return Err(format!("expected {} layers, found {}", want.len(), layers.len()));
        }
        for (i, (l, &(r, c))) in layers.iter().zip(&want).enumerate() {
            let ok = l.weights.shape() == (r, c)
                && l.m_weights.shape() == (r, c)
                && l.v_weights.shape() == (r, c)
                && [l.bias.len(), l.m_bias.len(), l.v_bias.len()] == [c; 3];
            if !ok {
                return Err(format!("layer {i} does not match the architecture"));
            }
        }
        Ok(())
    }

    pub fn into_generator(self) -> Result<GeneratorNet, Self> {
        match self.role {
            Role::Generator => Ok(GeneratorNet { params: self.params }),
            Role::Discriminator => Err(self),
        }
    }

    pub fn into_discriminator(self) -> Result<DiscriminatorNet, Self> {
        match self.role {
            Role::Discriminator => Ok(DiscriminatorNet { params: self.params }),
            Role::Generator => Err(self),
        }
    }
}
