//! Semantic switches and resource limits shared by every enumeration engine.

use crate::error::{Error, Result};

/// Environment variable read by [`Config::from_env`].
pub const MAX_STATES_ENV: &str = "STRANDLAB_MAX_STATES";

/// How a single send may satisfy receives.
///
/// `Consuming` is the strong reading of MP2: receives are matched injectively
/// to earlier-or-same-round sends, and a bundle's send node feeds at most one
/// receive node. `Broadcast` is the literal reading: a receive only needs some
/// matching send to exist, and a send node may feed any number of receives.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Delivery {
    #[default]
    Consuming,
    Broadcast,
}

/// Which bijections `f` the one-step bundle relation may use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Bijection {
    /// Any same-agent, prefix-respecting bijection.
    #[default]
    Search,
    /// `f` is the identity; the step relation degenerates to subgraph inclusion.
    Identity,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Config {
    pub delivery: Delivery,
    pub bijection: Bijection,
    /// Upper bound on states materialized by a single enumeration.
    pub max_states: Option<usize>,
}

impl Config {
    /// Default semantics with the state limit taken from `STRANDLAB_MAX_STATES`.
    pub fn from_env() -> Result<Self> {
        let max_states = match std::env::var(MAX_STATES_ENV) {
            Ok(raw) => Some(raw.trim().parse::<usize>().map_err(|_| Error::Parse {
                what: MAX_STATES_ENV,
                text: raw.clone(),
            })?),
            Err(_) => None,
        };
        Ok(Self {
            max_states,
            ..Self::default()
        })
    }

    pub fn with_delivery(mut self, delivery: Delivery) -> Self {
        self.delivery = delivery;
        self
    }

    pub fn with_bijection(mut self, bijection: Bijection) -> Self {
        self.bijection = bijection;
        self
    }

    pub fn with_max_states(mut self, limit: usize) -> Self {
        self.max_states = Some(limit);
        self
    }

    pub(crate) fn budget(&self) -> Budget {
        Budget {
            limit: self.max_states,
            used: 0,
        }
    }
}

/// Running count of materialized states for one enumeration.
#[derive(Debug)]
pub(crate) struct Budget {
    limit: Option<usize>,
    used: usize,
}

impl Budget {
    pub(crate) fn charge(&mut self, n: usize) -> Result<()> {
        self.used += n;
        match self.limit {
            Some(limit) if self.used > limit => Err(Error::StateLimit { limit }),
            _ => Ok(()),
        }
    }
}
