use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::{ProviderKey, Secret};
use crate::error::{Error, Result};

/// `CYBERLENS_KEY_<ID>=<provider>:<secret>` adds key `<id>` (lowercased).
pub const CREDENTIAL_ENV_PREFIX: &str = "CYBERLENS_KEY_";

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CredentialFile {
    #[serde(default)]
    keys: BTreeMap<String, KeyEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KeyEntry {
    provider: String,
    secret: String,
}

/// Reads keys from an optional TOML file (`[keys.<id>] provider, secret`)
/// and then from `vars`. An environment entry replaces a file entry with the
/// same id. Keys come back ordered by id.
pub fn load_credentials(
    file: Option<&Path>,
    vars: impl IntoIterator<Item = (String, String)>,
) -> Result<Vec<ProviderKey>> {
    let mut keys: BTreeMap<String, ProviderKey> = BTreeMap::new();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        // the toml error message can quote the offending line, secret included
        let parsed: CredentialFile = toml::from_str(&text)
            .map_err(|_| Error::parse(path, "credentials file is not valid"))?;
        for (id, entry) in parsed.keys {
            keys.insert(
                id.clone(),
                ProviderKey::new(id, entry.provider, Secret::new(entry.secret)),
            );
        }
    }
    for (name, value) in vars {
        let Some(id) = name.strip_prefix(CREDENTIAL_ENV_PREFIX) else {
            continue;
        };
        let id = id.to_lowercase();
        let Some((provider, secret)) = value.split_once(':') else {
            return Err(Error::Config(format!(
                "{name} must have the form <provider>:<secret>"
            )));
        };
        if id.is_empty() || provider.is_empty() {
            return Err(Error::Config(format!("{name} has an empty key id or provider")));
        }
        keys.insert(id.clone(), ProviderKey::new(id, provider, Secret::new(secret)));
    }
    Ok(keys.into_values().collect())
}
