//! Genesis configuration, read from TOML.
//!
//! ```toml
//! [chain]
//! chain_id = "rebel-1"
//! genesis_height = 7561000
//! genesis_time = 1656028800
//!
//! [[accounts]]
//! address = "alice"
//! coins = "1000000000uluna"
//!
//! [staking]
//! gates = "testnet"            # or "mainnet", or a table of heights
//!
//! [[staking.validators]]
//! operator = "val0"
//! tokens = "9600000000"
//! version = "v21"
//! ```
//!
//! `[module_accounts]`, `[treasury]`, `[distribution]`, `[governance]` and
//! `[fees]` are optional and default to the module defaults.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use crate::ante::GasConfig;
use crate::coins::Coins;
use crate::distribution::{Distribution, DistributionParams};
use crate::error::{Error, Result};
use crate::fraction::Fraction;
use crate::governance::{GovParams, Governance, TransferParams};
use crate::ledger::{Ledger, MODULE_NAMES};
use crate::staking::{HeightGates, SoftwareVersion, Staking, StakingParams, ValidatorStatus};
use crate::state::ChainState;
use crate::treasury::{Treasury, TreasuryParams};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenesisConfig {
    #[serde(default)]
    pub chain: ChainSection,
    #[serde(default)]
    pub accounts: Vec<AccountEntry>,
    #[serde(default)]
    pub module_accounts: BTreeMap<String, Coins>,
    #[serde(default)]
    pub staking: StakingSection,
    #[serde(default)]
    pub treasury: TreasuryParams,
    #[serde(default)]
    pub distribution: DistributionParams,
    #[serde(default)]
    pub governance: GovParams,
    #[serde(default)]
    pub fees: GasConfig,
    #[serde(default)]
    pub transfer: TransferParams,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    pub chain_id: String,
    pub genesis_height: u64,
    pub genesis_time: u64,
}

impl Default for ChainSection {
    fn default() -> Self {
        ChainSection {
            chain_id: "localnet".into(),
            genesis_height: 0,
            genesis_time: 0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccountEntry {
    pub address: String,
    pub coins: Coins,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum GatesConfig {
    Preset(String),
    Heights(HeightGates),
}

impl Default for GatesConfig {
    fn default() -> Self {
        GatesConfig::Preset("mainnet".into())
    }
}

impl GatesConfig {
    pub fn resolve(&self) -> Result<HeightGates> {
        match self {
            GatesConfig::Preset(p) if p == "mainnet" => Ok(HeightGates::mainnet()),
            GatesConfig::Preset(p) if p == "testnet" => Ok(HeightGates::testnet()),
            GatesConfig::Preset(p) => Err(Error::Parse(format!("unknown gate preset `{p}`"))),
            GatesConfig::Heights(h) => Ok(*h),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StakingSection {
    pub gates: GatesConfig,
    pub params: StakingParams,
    pub validators: Vec<ValidatorEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidatorEntry {
    pub operator: String,
    #[serde(with = "crate::coins::amount_serde")]
    pub tokens: u128,
    #[serde(default = "default_version")]
    pub version: SoftwareVersion,
    #[serde(default = "default_status")]
    pub status: ValidatorStatus,
}

fn default_version() -> SoftwareVersion {
    SoftwareVersion::V20
}

fn default_status() -> ValidatorStatus {
    ValidatorStatus::Active
}

impl GenesisConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("genesis: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Builds and seals the genesis state.
    pub fn build(&self) -> Result<ChainState> {
        let mut ledger = Ledger::default();
        for a in &self.accounts {
            ledger.genesis_account(&a.address, &a.coins)?;
        }
        for (m, coins) in &self.module_accounts {
            if !MODULE_NAMES.contains(&m.as_str()) {
                return Err(Error::UnknownModule(m.clone()));
            }
            ledger.genesis_module(m, coins)?;
        }
        let mut staking = Staking::new(self.staking.params.clone(), self.staking.gates.resolve()?)?;
        for v in &self.staking.validators {
            staking.genesis_validator(&mut ledger, &v.operator, v.tokens, v.version, v.status)?;
        }
        ledger.seal();
        let state = ChainState {
            chain_id: self.chain.chain_id.clone(),
            height: self.chain.genesis_height,
            genesis_height: self.chain.genesis_height,
            genesis_time: self.chain.genesis_time,
            ledger,
            staking,
            treasury: Treasury::new(self.treasury.clone())?,
            distribution: Distribution::new(self.distribution)?,
            governance: Governance::new(self.governance.clone())?,
            transfer: self.transfer,
            gas: self.fees.clone(),
            last_proposer: None,
            last_precommit: Fraction::ONE,
        };
        state.check_invariants()?;
        Ok(state)
    }
}
