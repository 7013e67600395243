//! Scenarios shipped with the crate.

use crate::config::GenesisConfig;
use crate::error::{Error, Result};
use crate::scenario::Scenario;

macro_rules! bundle {
    ($($name:literal),* $(,)?) => {
        const BUNDLES: &[(&str, &str, &str)] = &[$((
            $name,
            include_str!(concat!("../scenarios/", $name, "/genesis.toml")),
            include_str!(concat!("../scenarios/", $name, "/scenario.toml")),
        )),*];
    };
}

bundle!(
    "rebel1-replay",
    "burn-tax-activation",
    "distribution-4080",
    "power-cap-probe",
    "mainnet-gates",
);

pub fn names() -> impl Iterator<Item = &'static str> {
    BUNDLES.iter().map(|b| b.0)
}

/// Raw genesis and scenario TOML for a bundled scenario.
pub fn sources(name: &str) -> Result<(&'static str, &'static str)> {
    BUNDLES
        .iter()
        .find(|b| b.0 == name)
        .map(|b| (b.1, b.2))
        .ok_or_else(|| Error::Parse(format!("no bundled scenario `{name}`")))
}

pub fn load(name: &str) -> Result<(GenesisConfig, Scenario)> {
    let (g, s) = sources(name)?;
    Ok((GenesisConfig::from_toml(g)?, Scenario::from_toml(s)?))
}
