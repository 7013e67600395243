//! Per-block fee allocation, validator reward accrual and community pool
//! spends.
//!
//! Per denom, with fees `F`:
//! proposer gets `floor((base + bonus * precommit) * F)`, the community pool
//! gets `floor(community_tax * F)`, and the remainder is split across active
//! validators by consensus power (floored). Rounding dust goes to the
//! community pool.
//!
//! Validator rewards are held by the distribution module and split to
//! delegators by share at accrual time. Splitting dust stays with the
//! validator's accrual and is never paid out.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coins::Coins;
use crate::error::{Error, Result};
use crate::fraction::Fraction;
use crate::ledger::{Address, Ledger, BURN_MODULE, COMMUNITY_POOL, DISTRIBUTION};
use crate::staking::Staking;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DistributionParams {
    pub community_tax: Fraction,
    pub base_proposer_reward: Fraction,
    pub bonus_proposer_reward: Fraction,
}

impl Default for DistributionParams {
    fn default() -> Self {
        DistributionParams {
            community_tax: Fraction::new(2, 100),
            base_proposer_reward: Fraction::new(1, 100),
            bonus_proposer_reward: Fraction::new(4, 100),
        }
    }
}

impl DistributionParams {
    pub fn new(community_tax: Fraction, base: Fraction, bonus: Fraction) -> Self {
        DistributionParams {
            community_tax,
            base_proposer_reward: base,
            bonus_proposer_reward: bonus,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sum = self
            .community_tax
            .checked_add(&self.base_proposer_reward)
            .and_then(|s| s.checked_add(&self.bonus_proposer_reward));
        match sum {
            Some(s) if s.is_at_most_one() => Ok(()),
            _ => Err(Error::InvalidParams(format!(
                "distribution shares {}, {}, {} sum above 1",
                self.community_tax, self.base_proposer_reward, self.bonus_proposer_reward
            ))),
        }
    }
}

/// Where a community pool spend goes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SpendTarget {
    Burn,
    Account(Address),
}

impl FromStr for SpendTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "" => Err(Error::Parse("empty spend recipient".into())),
            "burn" => Ok(SpendTarget::Burn),
            a => Ok(SpendTarget::Account(a.to_string())),
        }
    }
}

impl TryFrom<String> for SpendTarget {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SpendTarget> for String {
    fn from(t: SpendTarget) -> String {
        t.to_string()
    }
}

impl fmt::Display for SpendTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpendTarget::Burn => f.write_str("burn"),
            SpendTarget::Account(a) => f.write_str(a),
        }
    }
}

/// Breakdown of one allocation. The four parts always sum to the input.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Allocation {
    pub proposer: Coins,
    pub community: Coins,
    pub validators: Coins,
    pub dust: Coins,
}

impl Allocation {
    pub fn total(&self) -> Result<Coins> {
        let mut t = self.proposer.checked_add(&self.community)?;
        t.add(&self.validators)?;
        t.add(&self.dust)?;
        Ok(t)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Distribution {
    pub params: DistributionParams,
    /// Everything credited to each validator, including unsplittable dust.
    validator_accrued: BTreeMap<Address, Coins>,
    /// validator -> delegator -> withdrawable rewards
    delegator_rewards: BTreeMap<Address, BTreeMap<Address, Coins>>,
}

impl Distribution {
    pub fn new(params: DistributionParams) -> Result<Self> {
        params.validate()?;
        Ok(Distribution {
            params,
            ..Default::default()
        })
    }

    pub fn validator_accrued(&self, validator: &str) -> Coins {
        self.validator_accrued.get(validator).cloned().unwrap_or_default()
    }

    pub fn pending_rewards(&self, delegator: &str, validator: &str) -> Coins {
        self.delegator_rewards
            .get(validator)
            .and_then(|m| m.get(delegator))
            .cloned()
            .unwrap_or_default()
    }

    /// Splits `fees` held by module `source` between the proposer, the
    /// community pool and the active validators.
    pub fn allocate(
        &mut self,
        ledger: &mut Ledger,
        staking: &Staking,
        source: &str,
        fees: &Coins,
        proposer: Option<&str>,
        precommit_fraction: Fraction,
    ) -> Result<Allocation> {
        if fees.is_zero() {
            return Ok(Allocation::default());
        }
        if let Some(p) = proposer {
            if staking.validator_power(p) == 0 {
                return Err(Error::UnknownProposer(p.to_string()));
            }
        }
        if let Some((denom, needed, available)) = ledger.module_balance(source)?.shortfall(fees) {
            return Err(Error::InsufficientFunds {
                holder: source.to_string(),
                denom,
                needed,
                available,
            });
        }
        if !precommit_fraction.is_at_most_one() {
            return Err(Error::InvalidParams(format!(
                "precommit fraction {precommit_fraction} above 1"
            )));
        }
        let proposer_rate = match proposer {
            Some(_) => self
                .params
                .bonus_proposer_reward
                .checked_mul(&precommit_fraction)
                .and_then(|b| b.checked_add(&self.params.base_proposer_reward))
                .ok_or_else(|| Error::InvalidParams("proposer reward overflow".into()))?,
            None => Fraction::ZERO,
        };
        let powers = staking.active_powers();
        let total_power: u128 = powers.iter().map(|(_, p)| p).sum();

        let mut out = Allocation::default();
        let mut per_validator: BTreeMap<&str, Coins> = BTreeMap::new();
        for (denom, fee) in fees.iter() {
            let prop = proposer_rate.mul_floor(fee);
            let comm = self.params.community_tax.mul_floor(fee);
            let rest = fee - prop - comm;
            let mut handed = 0u128;
            if total_power > 0 {
                for (v, p) in &powers {
                    let share = Fraction::new(*p, total_power).mul_floor(rest);
                    if share > 0 {
                        per_validator.entry(v.as_str()).or_default().add_amount(denom, share)?;
                        handed += share;
                    }
                }
            }
            out.proposer.add_amount(denom, prop)?;
            out.community.add_amount(denom, comm)?;
            out.validators.add_amount(denom, handed)?;
            out.dust.add_amount(denom, rest - handed)?;
        }

        let to_pool = out.community.checked_add(&out.dust)?;
        let to_rewards = out.proposer.checked_add(&out.validators)?;
        ledger.send_module_to_module(source, COMMUNITY_POOL, &to_pool)?;
        ledger.send_module_to_module(source, DISTRIBUTION, &to_rewards)?;
        if let Some(p) = proposer {
            self.credit(staking, p, &out.proposer)?;
        }
        for (v, coins) in per_validator {
            self.credit(staking, v, &coins)?;
        }
        Ok(out)
    }

    fn credit(&mut self, staking: &Staking, validator: &str, coins: &Coins) -> Result<()> {
        if coins.is_zero() {
            return Ok(());
        }
        self.validator_accrued
            .entry(validator.to_string())
            .or_default()
            .add(coins)?;
        let tokens = staking.validator(validator).map(|v| v.tokens).unwrap_or(0);
        if tokens == 0 {
            return Ok(());
        }
        let rewards = self.delegator_rewards.entry(validator.to_string()).or_default();
        for (delegator, shares) in staking.delegations_to(validator) {
            let frac = Fraction::new(shares, tokens);
            let part = coins.map_amounts(|_, a| frac.mul_floor(a));
            if !part.is_zero() {
                rewards.entry(delegator.clone()).or_default().add(&part)?;
            }
        }
        Ok(())
    }

    /// Pays `delegator`'s accrued rewards from `validator` to its account.
    pub fn withdraw_rewards(
        &mut self,
        ledger: &mut Ledger,
        staking: &Staking,
        delegator: &str,
        validator: &str,
    ) -> Result<Coins> {
        let has_entry = self
            .delegator_rewards
            .get(validator)
            .is_some_and(|m| m.contains_key(delegator));
        if !has_entry && staking.delegation(delegator, validator) == 0 {
            return Err(Error::UnknownDelegation {
                delegator: delegator.to_string(),
                validator: validator.to_string(),
            });
        }
        let Some(rewards) = self
            .delegator_rewards
            .get_mut(validator)
            .and_then(|m| m.remove(delegator))
        else {
            return Ok(Coins::new());
        };
        ledger.send_module_to_account(DISTRIBUTION, delegator, &rewards)?;
        let acc = self
            .validator_accrued
            .get_mut(validator)
            .expect("rewards imply accrual");
        acc.sub(&rewards, DISTRIBUTION)?;
        Ok(rewards)
    }

    /// Sends coins out of the community pool, or burns them.
    pub fn community_pool_spend(
        &self,
        ledger: &mut Ledger,
        target: &SpendTarget,
        amount: &Coins,
    ) -> Result<()> {
        match target {
            SpendTarget::Account(a) => ledger.send_module_to_account(COMMUNITY_POOL, a, amount),
            SpendTarget::Burn => {
                ledger.send_module_to_module(COMMUNITY_POOL, BURN_MODULE, amount)?;
                ledger.burn(BURN_MODULE, amount)
            }
        }
    }

    /// The distribution module holds exactly the validator accruals, and no
    /// validator owes its delegators more than it accrued.
    pub fn check_invariants(&self, ledger: &Ledger) -> std::result::Result<(), String> {
        let mut total = Coins::new();
        for (v, acc) in &self.validator_accrued {
            total.add(acc).map_err(|e| e.to_string())?;
            let mut owed = Coins::new();
            for r in self.delegator_rewards.get(v).into_iter().flat_map(|m| m.values()) {
                owed.add(r).map_err(|e| e.to_string())?;
            }
            if !acc.covers(&owed) {
                return Err(format!("validator {v}: owes {owed} but accrued {acc}"));
            }
        }
        let held = ledger.module_balance(DISTRIBUTION).map_err(|e| e.to_string())?;
        if *held != total {
            return Err(format!("distribution module holds {held} but accruals sum to {total}"));
        }
        Ok(())
    }
}
