use std::collections::BTreeMap;
use std::sync::Arc;

use paramscope_core::remote::RemoteClient;
use paramscope_core::{DistributionProvider, ProviderMode};

pub const TOY_PROVIDER_ID: &str = "toy";
pub const REMOTE_PROVIDER_ID: &str = "remote";

#[derive(Clone)]
pub enum Provider {
    /// Sampling runs in-process over the provider's distributions.
    Local(Arc<dyn DistributionProvider>),
    /// Hyperparameters are forwarded; the remote model samples.
    Remote(RemoteClient),
}

impl Provider {
    pub fn mode(&self) -> ProviderMode {
        match self {
            Provider::Local(_) => ProviderMode::DistributionCapable,
            Provider::Remote(_) => ProviderMode::CompletionOnly,
        }
    }
}

impl std::fmt::Debug for Provider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Provider::Local(_) => f.write_str("Local(..)"),
            Provider::Remote(c) => f.debug_tuple("Remote").field(c.config()).finish(),
        }
    }
}

/// Providers by id, with one designated default.
#[derive(Debug, Clone)]
pub struct ProviderRegistry {
    default_id: String,
    providers: BTreeMap<String, Provider>,
}

impl ProviderRegistry {
    pub fn new(default_id: impl Into<String>, default: Provider) -> Self {
        let default_id = default_id.into();
        let mut providers = BTreeMap::new();
        providers.insert(default_id.clone(), default);
        Self {
            default_id,
            providers,
        }
    }

    pub fn with(mut self, id: impl Into<String>, provider: Provider) -> Self {
        self.providers.insert(id.into(), provider);
        self
    }

    pub fn default_id(&self) -> &str {
        &self.default_id
    }

    /// Looks up `id`, or the default provider when `id` is `None`.
    pub fn resolve<'a>(&'a self, id: Option<&'a str>) -> Option<(&'a str, &'a Provider)> {
        let id = id.unwrap_or(&self.default_id);
        self.providers.get_key_value(id).map(|(k, v)| (k.as_str(), v))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.providers.keys().map(String::as_str)
    }
}
