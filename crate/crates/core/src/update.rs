use crate::error::{Error, Result};
use crate::he::Ciphertext;
use crate::smc::SealedBundle;

/// The form a client's update takes as it moves through the privacy pipeline.
#[derive(Clone, Debug)]
pub enum Payload {
    Plain(Vec<f64>),
    Encrypted(Vec<Ciphertext>),
    Shared(Vec<SealedBundle>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateState {
    Plain,
    Encrypted,
    Shared,
}

#[derive(Clone, Debug)]
pub struct Update {
    pub client_id: usize,
    pub payload: Payload,
    /// Set by the global DP stage; noise is added once after aggregation.
    pub global_noise_pending: bool,
}

impl Update {
    pub fn plain(client_id: usize, values: Vec<f64>) -> Self {
        Self {
            client_id,
            payload: Payload::Plain(values),
            global_noise_pending: false,
        }
    }

    pub fn state(&self) -> UpdateState {
        match self.payload {
            Payload::Plain(_) => UpdateState::Plain,
            Payload::Encrypted(_) => UpdateState::Encrypted,
            Payload::Shared(_) => UpdateState::Shared,
        }
    }

    pub fn as_plain(&self) -> Result<&[f64]> {
        match &self.payload {
            Payload::Plain(v) => Ok(v),
            _ => Err(Error::PipelineOrder(format!(
                "client {} update is {:?}, expected plain",
                self.client_id,
                self.state()
            ))),
        }
    }

    pub fn as_plain_mut(&mut self) -> Result<&mut Vec<f64>> {
        let (id, state) = (self.client_id, self.state());
        match &mut self.payload {
            Payload::Plain(v) => Ok(v),
            _ => Err(Error::PipelineOrder(format!("client {id} update is {state:?}, expected plain"))),
        }
    }
}
