//! Validators, delegations, height-gated staking messages and the
//! protect-window voting-power cap.
//!
//! Which gates apply depends on the software version a validator runs:
//! `v20` keeps the emergency gate closed for good, `v21` re-opens delegation
//! at `delegate_power_revert_height`, validator creation at
//! `staking_power_revert_height`, and caps voting power until
//! `protect_power_height`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::blocks;
use crate::coins::{Coin, Coins, MICRO, ULUNA};
use crate::error::{Error, Result};
use crate::fraction::{Fraction, PowerShare};
use crate::ledger::{Address, Ledger, BONDED_POOL, NOT_BONDED_POOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeightGates {
    pub staking_power_upgrade_height: u64,
    pub delegate_power_revert_height: u64,
    pub staking_power_revert_height: u64,
    pub protect_power_height: u64,
}

impl Default for HeightGates {
    fn default() -> Self {
        HeightGates::mainnet()
    }
}

impl HeightGates {
    pub const MAINNET_STAKING_POWER_UPGRADE: u64 = 7_603_700;
    pub const MAINNET_DELEGATE_POWER_REVERT: u64 = 8_208_649;
    pub const MAINNET_STAKING_POWER_REVERT: u64 = 8_905_758;
    pub const TESTNET_DELEGATE_POWER_REVERT: u64 = 7_684_490;

    /// Length of the capped window after delegation re-opens (60 days).
    pub fn protect_window_blocks() -> u64 {
        blocks::projected_blocks(60)
    }

    pub fn mainnet() -> Self {
        HeightGates {
            staking_power_upgrade_height: Self::MAINNET_STAKING_POWER_UPGRADE,
            delegate_power_revert_height: Self::MAINNET_DELEGATE_POWER_REVERT,
            staking_power_revert_height: Self::MAINNET_STAKING_POWER_REVERT,
            protect_power_height: Self::MAINNET_DELEGATE_POWER_REVERT + Self::protect_window_blocks(),
        }
    }

    /// Testnet gates: delegation re-opens at 7684490 and validator creation
    /// two projected days later.
    pub fn testnet() -> Self {
        let revert = Self::TESTNET_DELEGATE_POWER_REVERT;
        HeightGates {
            staking_power_upgrade_height: Self::MAINNET_STAKING_POWER_UPGRADE,
            delegate_power_revert_height: revert,
            staking_power_revert_height: revert + blocks::projected_blocks(2),
            protect_power_height: revert + Self::protect_window_blocks(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.staking_power_upgrade_height < self.delegate_power_revert_height
            && self.delegate_power_revert_height <= self.protect_power_height
            && self.delegate_power_revert_height < self.staking_power_revert_height;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("inconsistent height gates {self:?}")))
        }
    }

    /// Emergency gate as originally deployed: closed for every later height.
    pub fn permanently_gated(&self, height: u64) -> bool {
        height > self.staking_power_upgrade_height
    }

    pub fn delegate_gated(&self, height: u64) -> bool {
        height > self.staking_power_upgrade_height && height < self.delegate_power_revert_height
    }

    pub fn create_validator_gated(&self, height: u64) -> bool {
        height > self.staking_power_upgrade_height && height < self.staking_power_revert_height
    }

    pub fn in_protect_window(&self, height: u64) -> bool {
        height >= self.delegate_power_revert_height && height < self.protect_power_height
    }
}

/// Node software release; determines which staking gates are enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SoftwareVersion {
    V20,
    V21,
}

impl SoftwareVersion {
    pub fn delegate_allowed(self, gates: &HeightGates, height: u64) -> bool {
        match self {
            SoftwareVersion::V20 => !gates.permanently_gated(height),
            SoftwareVersion::V21 => !gates.delegate_gated(height),
        }
    }

    pub fn create_validator_allowed(self, gates: &HeightGates, height: u64) -> bool {
        match self {
            SoftwareVersion::V20 => !gates.permanently_gated(height),
            SoftwareVersion::V21 => !gates.create_validator_gated(height),
        }
    }

    pub fn enforces_power_cap(self) -> bool {
        matches!(self, SoftwareVersion::V21)
    }
}

impl fmt::Display for SoftwareVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SoftwareVersion::V20 => "v20",
            SoftwareVersion::V21 => "v21",
        })
    }
}

impl FromStr for SoftwareVersion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "v20" | "v0.5.20" => Ok(SoftwareVersion::V20),
            "v21" | "v0.5.21" | "v0.5.21-testnet" => Ok(SoftwareVersion::V21),
            other => Err(Error::Parse(format!("unknown software version `{other}`"))),
        }
    }
}

/// How the protect-window cap compares power shares.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapArithmetic {
    /// Exact rational comparison.
    #[default]
    Exact,
    /// Single-precision comparison, for replay fidelity with deployed nodes.
    Float32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StakingParams {
    #[serde(with = "crate::coins::amount_serde")]
    pub power_reduction: u128,
    pub unbonding_period_blocks: u64,
    pub max_delegation_power_fraction: Fraction,
    pub cap_arithmetic: CapArithmetic,
    pub bond_denom: String,
}

impl Default for StakingParams {
    fn default() -> Self {
        StakingParams {
            power_reduction: MICRO,
            unbonding_period_blocks: blocks::blocks_for_days(21),
            max_delegation_power_fraction: Fraction::new(1, 4),
            cap_arithmetic: CapArithmetic::Exact,
            bond_denom: ULUNA.to_string(),
        }
    }
}

impl StakingParams {
    pub fn validate(&self) -> Result<()> {
        if self.power_reduction == 0 {
            return Err(Error::InvalidParams("power_reduction must be at least 1".into()));
        }
        let f = self.max_delegation_power_fraction;
        if f.is_zero() || !f.is_at_most_one() {
            return Err(Error::InvalidParams(format!(
                "max_delegation_power_fraction {f} outside (0, 1]"
            )));
        }
        Ok(())
    }
}

pub fn tokens_to_consensus_power(amount: u128, params: &StakingParams) -> u128 {
    amount / params.power_reduction
}

/// Protect-window cap: `true` when the delegation may proceed.
///
/// With `d = delta_tokens / power_reduction`, fails iff
/// `(validator_power + d) / (total_power + d) > max_delegation_power_fraction`.
pub fn check_power_cap(
    validator_power: u128,
    total_power: u128,
    delta_tokens: u128,
    params: &StakingParams,
) -> bool {
    let d = tokens_to_consensus_power(delta_tokens, params);
    let new_power = validator_power.saturating_add(d);
    let new_total = total_power.saturating_add(d);
    let cap = params.max_delegation_power_fraction;
    let exceeds = match params.cap_arithmetic {
        CapArithmetic::Exact => <Fraction as PowerShare>::exceeds(new_power, new_total, cap),
        CapArithmetic::Float32 => <f32 as PowerShare>::exceeds(new_power, new_total, cap),
    };
    !exceeds
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidatorStatus {
    Active,
    Inactive,
    Jailed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Validator {
    pub operator: Address,
    pub tokens: u128,
    pub status: ValidatorStatus,
    pub version: SoftwareVersion,
}

impl Validator {
    pub fn is_active(&self) -> bool {
        self.status == ValidatorStatus::Active
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnbondingEntry {
    pub delegator: Address,
    pub validator: Address,
    pub amount: u128,
    pub creation_height: u64,
    pub completion_height: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Staking {
    pub params: StakingParams,
    pub gates: HeightGates,
    validators: BTreeMap<Address, Validator>,
    /// validator -> delegator -> shares (one share per micro-unit)
    delegations: BTreeMap<Address, BTreeMap<Address, u128>>,
    unbonding: Vec<UnbondingEntry>,
}

impl Staking {
    pub fn new(params: StakingParams, gates: HeightGates) -> Result<Self> {
        params.validate()?;
        gates.validate()?;
        Ok(Staking {
            params,
            gates,
            ..Default::default()
        })
    }

    /// Registers a genesis validator bonded by a self-delegation of `tokens`
    /// that is credited straight into the bonded pool.
    pub fn genesis_validator(
        &mut self,
        ledger: &mut Ledger,
        operator: &str,
        tokens: u128,
        version: SoftwareVersion,
        status: ValidatorStatus,
    ) -> Result<()> {
        if self.validators.contains_key(operator) {
            return Err(Error::DuplicateValidator(operator.to_string()));
        }
        ledger.genesis_module(BONDED_POOL, &Coins::single(tokens, &self.params.bond_denom))?;
        let status = match status {
            ValidatorStatus::Active if tokens == 0 => ValidatorStatus::Inactive,
            s => s,
        };
        self.validators.insert(
            operator.to_string(),
            Validator {
                operator: operator.to_string(),
                tokens,
                status,
                version,
            },
        );
        if tokens > 0 {
            self.delegations
                .entry(operator.to_string())
                .or_default()
                .insert(operator.to_string(), tokens);
        }
        Ok(())
    }

    pub fn validator(&self, operator: &str) -> Option<&Validator> {
        self.validators.get(operator)
    }

    pub fn validators(&self) -> impl Iterator<Item = &Validator> {
        self.validators.values()
    }

    pub fn delegation(&self, delegator: &str, validator: &str) -> u128 {
        self.delegations
            .get(validator)
            .and_then(|d| d.get(delegator))
            .copied()
            .unwrap_or(0)
    }

    /// Delegations to `validator`, ordered by delegator address.
    pub fn delegations_to(&self, validator: &str) -> impl Iterator<Item = (&Address, u128)> {
        self.delegations
            .get(validator)
            .into_iter()
            .flat_map(|m| m.iter().map(|(a, s)| (a, *s)))
    }

    /// Total stake `delegator` has bonded across all validators.
    pub fn bonded_by(&self, delegator: &str) -> u128 {
        self.delegations
            .values()
            .filter_map(|m| m.get(delegator))
            .sum()
    }

    pub fn unbonding_entries(&self) -> &[UnbondingEntry] {
        &self.unbonding
    }

    pub fn validator_power(&self, operator: &str) -> u128 {
        self.validators
            .get(operator)
            .filter(|v| v.is_active())
            .map(|v| tokens_to_consensus_power(v.tokens, &self.params))
            .unwrap_or(0)
    }

    /// Consensus power of each active validator, ordered by operator address.
    pub fn active_powers(&self) -> Vec<(&Address, u128)> {
        self.validators
            .values()
            .filter(|v| v.is_active())
            .map(|v| (&v.operator, tokens_to_consensus_power(v.tokens, &self.params)))
            .collect()
    }

    pub fn total_voting_power(&self) -> u128 {
        self.active_powers().iter().map(|(_, p)| p).sum()
    }

    pub fn total_bonded_tokens(&self) -> u128 {
        self.validators.values().map(|v| v.tokens).sum()
    }

    pub fn create_validator(
        &mut self,
        operator: &str,
        version: SoftwareVersion,
        height: u64,
        rules: SoftwareVersion,
    ) -> Result<()> {
        if !rules.create_validator_allowed(&self.gates, height) {
            return Err(Error::MsgNotSupported {
                msg: "CreateValidator",
                height,
            });
        }
        if self.validators.contains_key(operator) {
            return Err(Error::DuplicateValidator(operator.to_string()));
        }
        self.validators.insert(
            operator.to_string(),
            Validator {
                operator: operator.to_string(),
                tokens: 0,
                status: ValidatorStatus::Inactive,
                version,
            },
        );
        Ok(())
    }

    pub fn delegate(
        &mut self,
        ledger: &mut Ledger,
        delegator: &str,
        validator: &str,
        amount: &Coin,
        height: u64,
        rules: SoftwareVersion,
    ) -> Result<()> {
        if !rules.delegate_allowed(&self.gates, height) {
            return Err(Error::MsgNotSupported {
                msg: "Delegate",
                height,
            });
        }
        self.check_bond_denom(amount)?;
        if amount.amount == 0 {
            return Err(Error::InvalidTx("zero delegation".into()));
        }
        let v = self
            .validators
            .get(validator)
            .ok_or_else(|| Error::UnknownValidator(validator.to_string()))?;
        if v.status == ValidatorStatus::Jailed {
            return Err(Error::ValidatorJailed(validator.to_string()));
        }
        // height 0 is genesis: the cap would block the very first bond
        if rules.enforces_power_cap() && height > 0 && self.gates.in_protect_window(height) {
            let v_power = self.validator_power(validator);
            let total = self.total_voting_power();
            if !check_power_cap(v_power, total, amount.amount, &self.params) {
                let d = tokens_to_consensus_power(amount.amount, &self.params);
                return Err(Error::PowerCapExceeded {
                    new_power: v_power + d,
                    new_total: total + d,
                });
            }
        }
        let coins = Coins::from(amount.clone());
        ledger.send_account_to_module(delegator, BONDED_POOL, &coins)?;
        let v = self.validators.get_mut(validator).expect("checked above");
        v.tokens += amount.amount;
        v.status = ValidatorStatus::Active;
        *self
            .delegations
            .entry(validator.to_string())
            .or_default()
            .entry(delegator.to_string())
            .or_insert(0) += amount.amount;
        Ok(())
    }

    pub fn undelegate(
        &mut self,
        ledger: &mut Ledger,
        delegator: &str,
        validator: &str,
        amount: &Coin,
        height: u64,
    ) -> Result<UnbondingEntry> {
        self.check_bond_denom(amount)?;
        let shares = self
            .delegations
            .get(validator)
            .and_then(|m| m.get(delegator))
            .copied()
            .ok_or_else(|| Error::UnknownDelegation {
                delegator: delegator.to_string(),
                validator: validator.to_string(),
            })?;
        if amount.amount > shares {
            return Err(Error::InsufficientShares {
                requested: amount.amount,
                available: shares,
            });
        }
        if amount.amount == 0 {
            return Err(Error::InvalidTx("zero undelegation".into()));
        }
        ledger.send_module_to_module(BONDED_POOL, NOT_BONDED_POOL, &amount.clone().into())?;

        let per_validator = self.delegations.get_mut(validator).expect("delegation exists");
        let left = shares - amount.amount;
        if left == 0 {
            per_validator.remove(delegator);
            if per_validator.is_empty() {
                self.delegations.remove(validator);
            }
        } else {
            per_validator.insert(delegator.to_string(), left);
        }
        let v = self.validators.get_mut(validator).expect("delegation implies validator");
        v.tokens -= amount.amount;
        if v.tokens == 0 && v.status == ValidatorStatus::Active {
            v.status = ValidatorStatus::Inactive;
        }

        let entry = UnbondingEntry {
            delegator: delegator.to_string(),
            validator: validator.to_string(),
            amount: amount.amount,
            creation_height: height,
            completion_height: height + self.params.unbonding_period_blocks,
        };
        self.unbonding.push(entry.clone());
        Ok(entry)
    }

    /// Pays out every unbonding entry due at or before `height`.
    pub fn mature_unbondings(&mut self, ledger: &mut Ledger, height: u64) -> Result<Vec<UnbondingEntry>> {
        if !self.unbonding.iter().any(|e| e.completion_height <= height) {
            return Ok(Vec::new());
        }
        let (due, pending): (Vec<_>, Vec<_>) = std::mem::take(&mut self.unbonding)
            .into_iter()
            .partition(|e| e.completion_height <= height);
        self.unbonding = pending;
        for e in &due {
            let coins = Coins::single(e.amount, &self.params.bond_denom);
            ledger.send_module_to_account(NOT_BONDED_POOL, &e.delegator, &coins)?;
        }
        Ok(due)
    }

    pub fn set_version(&mut self, operator: &str, version: SoftwareVersion) -> Result<bool> {
        let v = self
            .validators
            .get_mut(operator)
            .ok_or_else(|| Error::UnknownValidator(operator.to_string()))?;
        let changed = v.version != version;
        v.version = version;
        Ok(changed)
    }

    pub fn jail(&mut self, operator: &str) -> Result<()> {
        let v = self
            .validators
            .get_mut(operator)
            .ok_or_else(|| Error::UnknownValidator(operator.to_string()))?;
        v.status = ValidatorStatus::Jailed;
        Ok(())
    }

    fn check_bond_denom(&self, amount: &Coin) -> Result<()> {
        if amount.denom != self.params.bond_denom {
            return Err(Error::WrongDenom {
                expected: self.params.bond_denom.clone(),
                got: amount.denom.clone(),
            });
        }
        Ok(())
    }

    /// Share identity and pool backing.
    pub fn check_invariants(&self, ledger: &Ledger) -> std::result::Result<(), String> {
        for v in self.validators.values() {
            let shares: u128 = self.delegations_to(&v.operator).map(|(_, s)| s).sum();
            if shares != v.tokens {
                return Err(format!(
                    "validator {}: shares {shares} != tokens {}",
                    v.operator, v.tokens
                ));
            }
        }
        let denom = &self.params.bond_denom;
        let bonded = ledger
            .module_balance(BONDED_POOL)
            .map(|c| c.amount_of(denom))
            .unwrap_or(0);
        if bonded != self.total_bonded_tokens() {
            return Err(format!(
                "bonded pool {bonded} != bonded tokens {}",
                self.total_bonded_tokens()
            ));
        }
        let unbonding: u128 = self.unbonding.iter().map(|e| e.amount).sum();
        let not_bonded = ledger
            .module_balance(NOT_BONDED_POOL)
            .map(|c| c.amount_of(denom))
            .unwrap_or(0);
        if not_bonded != unbonding {
            return Err(format!("not-bonded pool {not_bonded} != unbonding {unbonding}"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::Ledger;
    use proptest::prelude::*;

    const V21: SoftwareVersion = SoftwareVersion::V21;
    const V20: SoftwareVersion = SoftwareVersion::V20;

    fn luna(n: u128) -> Coin {
        Coin::new(n, ULUNA)
    }

    fn setup(gates: HeightGates, powers: &[u128]) -> (Staking, Ledger) {
        let mut ledger = Ledger::default();
        let mut staking = Staking::new(StakingParams::default(), gates).unwrap();
        for (i, p) in powers.iter().enumerate() {
            staking
                .genesis_validator(
                    &mut ledger,
                    &format!("val{i}"),
                    p * MICRO,
                    V21,
                    ValidatorStatus::Active,
                )
                .unwrap();
        }
        ledger
            .genesis_account("alice", &Coins::single(1_000_000 * MICRO, ULUNA))
            .unwrap();
        ledger.seal();
        (staking, ledger)
    }

    #[test]
    fn gate_defaults_are_consistent() {
        HeightGates::mainnet().validate().unwrap();
        HeightGates::testnet().validate().unwrap();
        assert_eq!(HeightGates::mainnet().protect_power_height, 8_208_649 + 740_534);
        let bad = HeightGates {
            delegate_power_revert_height: 9_000_000,
            ..HeightGates::mainnet()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn create_validator_mainnet_gates() {
        let (mut s, _) = setup(HeightGates::mainnet(), &[10]);
        assert!(matches!(
            s.create_validator("new", V21, 8_000_000, V21),
            Err(Error::MsgNotSupported { .. })
        ));
        s.create_validator("new", V21, 8_905_759, V21).unwrap();
        // strict inequality: the upgrade height itself is still open
        s.create_validator("early", V21, 7_603_700, V21).unwrap();
        assert_eq!(
            s.create_validator("new", V21, 8_905_760, V21),
            Err(Error::DuplicateValidator("new".into()))
        );
        assert_eq!(s.validator("new").unwrap().tokens, 0);
    }

    #[test]
    fn delegate_testnet_revert() {
        let (mut s, mut l) = setup(HeightGates::testnet(), &[10_000; 6]);
        assert!(matches!(
            s.delegate(&mut l, "alice", "val0", &luna(MICRO), 7_684_489, V21),
            Err(Error::MsgNotSupported { .. })
        ));
        s.delegate(&mut l, "alice", "val0", &luna(MICRO), 7_684_490, V21).unwrap();
        assert_eq!(s.delegation("alice", "val0"), MICRO);
        // v20 never re-opens
        assert!(matches!(
            s.delegate(&mut l, "alice", "val1", &luna(MICRO), 7_684_490, V20),
            Err(Error::MsgNotSupported { .. })
        ));
    }

    #[test]
    fn power_cap_examples() {
        let p = StakingParams::default();
        // 30/110 > 1/4
        assert!(!check_power_cap(20, 100, 10 * MICRO, &p));
        // 25/105 <= 1/4
        assert!(check_power_cap(20, 100, 5 * MICRO, &p));
        // empty set: 1/1 > 1/4, no division by zero
        assert!(!check_power_cap(0, 0, MICRO, &p));
        assert!(check_power_cap(20, 100, 0, &p));
        // sub-power delegation rounds to zero power
        assert!(check_power_cap(25, 100, MICRO - 1, &p));
    }

    #[test]
    fn delegate_rejected_by_cap_in_window() {
        // val0 holds 20 of 100 power
        let (mut s, mut l) = setup(HeightGates::testnet(), &[20, 20, 20, 20, 20]);
        let h = HeightGates::TESTNET_DELEGATE_POWER_REVERT + 1;
        let before = (s.clone(), l.clone());
        let err = s.delegate(&mut l, "alice", "val0", &luna(10 * MICRO), h, V21).unwrap_err();
        assert_eq!(err, Error::PowerCapExceeded { new_power: 30, new_total: 110 });
        assert_eq!((s.clone(), l.clone()), before);
        s.delegate(&mut l, "alice", "val0", &luna(5 * MICRO), h, V21).unwrap();
        // after the window the cap is gone
        let after = s.gates.protect_power_height;
        s.delegate(&mut l, "alice", "val0", &luna(500 * MICRO), after, V21).unwrap();
    }

    #[test]
    fn delegate_errors() {
        let (mut s, mut l) = setup(HeightGates::mainnet(), &[10]);
        let h = 9_500_000;
        assert_eq!(
            s.delegate(&mut l, "alice", "ghost", &luna(1), h, V21),
            Err(Error::UnknownValidator("ghost".into()))
        );
        assert!(matches!(
            s.delegate(&mut l, "pauper", "val0", &luna(1), h, V21),
            Err(Error::InsufficientFunds { .. })
        ));
        assert!(matches!(
            s.delegate(&mut l, "alice", "val0", &Coin::new(1, "uusd"), h, V21),
            Err(Error::WrongDenom { .. })
        ));
        s.jail("val0").unwrap();
        assert!(matches!(
            s.delegate(&mut l, "alice", "val0", &luna(1), h, V21),
            Err(Error::ValidatorJailed(_))
        ));
    }

    #[test]
    fn undelegate_schedules_and_matures() {
        let (mut s, mut l) = setup(HeightGates::mainnet(), &[10, 10]);
        let h = 9_000_000;
        s.delegate(&mut l, "alice", "val0", &luna(1_000), h, V21).unwrap();
        let entry = s.undelegate(&mut l, "alice", "val0", &luna(1_000), h + 5).unwrap();
        assert_eq!(entry.completion_height, h + 5 + 259_200);
        assert!(s.mature_unbondings(&mut l, h + 5 + 259_199).unwrap().is_empty());
        let before = l.balance("alice").amount_of(ULUNA);
        let done = s.mature_unbondings(&mut l, h + 5 + 259_200).unwrap();
        assert_eq!(done.len(), 1);
        assert_eq!(l.balance("alice").amount_of(ULUNA), before + 1_000);
        s.check_invariants(&l).unwrap();
        l.check_invariants().unwrap();
    }

    #[test]
    fn undelegate_full_stake_deactivates() {
        let (mut s, mut l) = setup(HeightGates::mainnet(), &[10, 10]);
        s.undelegate(&mut l, "val0", "val0", &luna(10 * MICRO), 9_000_000).unwrap();
        let v = s.validator("val0").unwrap();
        assert_eq!(v.tokens, 0);
        assert_eq!(v.status, ValidatorStatus::Inactive);
        assert_eq!(s.total_voting_power(), 10);
    }

    #[test]
    fn undelegate_errors() {
        let (mut s, mut l) = setup(HeightGates::mainnet(), &[10]);
        assert_eq!(
            s.undelegate(&mut l, "val0", "val0", &luna(10 * MICRO + 1), 9_000_000),
            Err(Error::InsufficientShares { requested: 10 * MICRO + 1, available: 10 * MICRO })
        );
        assert!(matches!(
            s.undelegate(&mut l, "alice", "val0", &luna(1), 9_000_000),
            Err(Error::UnknownDelegation { .. })
        ));
    }

    #[test]
    fn consensus_power() {
        let p = StakingParams::default();
        assert_eq!(tokens_to_consensus_power(10_000_000_000, &p), 10_000);
        assert_eq!(tokens_to_consensus_power(MICRO - 1, &p), 0);
        assert_eq!(tokens_to_consensus_power(0, &p), 0);
    }

    #[test]
    fn total_power_cases() {
        let (mut s, _) = setup(HeightGates::mainnet(), &[10_000; 6]);
        assert_eq!(s.total_voting_power(), 60_000);
        s.jail("val3").unwrap();
        assert_eq!(s.total_voting_power(), 50_000);
        let (empty, _) = setup(HeightGates::mainnet(), &[]);
        assert_eq!(empty.total_voting_power(), 0);
    }

    #[test]
    fn gate_sweep_matches_predicates() {
        let g = HeightGates::mainnet();
        for anchor in [
            g.staking_power_upgrade_height,
            g.delegate_power_revert_height,
            g.staking_power_revert_height,
        ] {
            for h in anchor - 3..=anchor + 3 {
                let del = h > g.staking_power_upgrade_height && h < g.delegate_power_revert_height;
                let cv = h > g.staking_power_upgrade_height && h < g.staking_power_revert_height;
                assert_eq!(!V21.delegate_allowed(&g, h), del, "delegate at {h}");
                assert_eq!(!V21.create_validator_allowed(&g, h), cv, "create at {h}");
            }
        }
    }

    proptest! {
        #[test]
        fn delegate_undelegate_conserves_stake(
            amounts in proptest::collection::vec(1u128..5_000_000, 1..8),
            undo in proptest::collection::vec(any::<bool>(), 8),
        ) {
            let (mut s, mut l) = setup(HeightGates::mainnet(), &[50, 50, 50, 50]);
            let h = 9_000_000;
            let total = |l: &Ledger| {
                l.balance("alice").amount_of(ULUNA)
                    + l.module_balance(BONDED_POOL).unwrap().amount_of(ULUNA)
                    + l.module_balance(NOT_BONDED_POOL).unwrap().amount_of(ULUNA)
            };
            let start = total(&l);
            for (i, a) in amounts.iter().enumerate() {
                let val = format!("val{}", i % 4);
                s.delegate(&mut l, "alice", &val, &luna(*a), h, V21).unwrap();
                if undo[i] {
                    s.undelegate(&mut l, "alice", &val, &luna(*a), h).unwrap();
                }
                prop_assert_eq!(total(&l), start);
                prop_assert!(s.check_invariants(&l).is_ok());
            }
            s.mature_unbondings(&mut l, h + s.params.unbonding_period_blocks).unwrap();
            prop_assert_eq!(total(&l), start);
            prop_assert!(l.check_invariants().is_ok());
        }
    }
}
