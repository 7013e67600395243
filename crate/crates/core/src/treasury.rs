//! Tax rate and reward weight under policy constraints, the per-epoch burn
//! counter, and the epoch-boundary seigniorage step.
//!
//! At each epoch boundary the treasury mints exactly what was burned during
//! the epoch, burns `floor(reward_weight * minted)` of it again and hands the
//! rest to the distribution module. Policy updates passed by governance are
//! queued and only take effect at the next boundary.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ante::{TaxParams, DEFAULT_TAX_CAP};
use crate::coins::{Coin, Coins, USDR};
use crate::distribution::{Allocation, Distribution};
use crate::error::{Error, Result};
use crate::fraction::Fraction;
use crate::ledger::{Ledger, BURN_MODULE, TREASURY};
use crate::staking::Staking;

/// Default epoch length in blocks, about one week.
pub const DEFAULT_EPOCH_LENGTH: u64 = 86_400;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyConstraints {
    pub rate_min: Fraction,
    pub rate_max: Fraction,
    pub cap: Coin,
    pub change_rate_max: Fraction,
}

impl PolicyConstraints {
    /// No effective constraint: any rate in `[0, 1]`, any step.
    pub fn unconstrained() -> Self {
        PolicyConstraints {
            rate_min: Fraction::ZERO,
            rate_max: Fraction::ONE,
            cap: Coin::new(DEFAULT_TAX_CAP, USDR),
            change_rate_max: Fraction::ONE,
        }
    }

    /// A degenerate interval pinning the rate to `rate`.
    pub fn fixed(rate: Fraction) -> Self {
        PolicyConstraints {
            rate_min: rate,
            rate_max: rate,
            change_rate_max: Fraction::ZERO,
            ..Self::unconstrained()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rate_min > self.rate_max || !self.rate_max.is_at_most_one() {
            return Err(Error::InvalidParams(format!(
                "policy needs 0 <= rate_min <= rate_max <= 1, got [{}, {}]",
                self.rate_min, self.rate_max
            )));
        }
        Ok(())
    }

    /// Moves from `prev` toward `requested`: clamp into the interval, limit
    /// the step to `change_rate_max`, then clamp into the interval again.
    /// When the interval excludes `prev`, the interval wins over the step
    /// limit.
    pub fn clamp(&self, prev: Fraction, requested: Fraction) -> Fraction {
        let target = requested.clamp_to(self.rate_min, self.rate_max);
        let lo = prev.checked_sub(&self.change_rate_max).unwrap_or(Fraction::ZERO);
        let hi = prev.checked_add(&self.change_rate_max).unwrap_or(Fraction::ONE);
        target.clamp_to(lo, hi).clamp_to(self.rate_min, self.rate_max)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreasuryParams {
    pub tax_policy: PolicyConstraints,
    pub reward_policy: PolicyConstraints,
    pub tax_rate: Fraction,
    pub reward_weight: Fraction,
    pub epoch_length_blocks: u64,
    /// Per-denom caps in micro-units; the policy cap is quoted in a
    /// reference denom with no exchange rate available.
    #[serde(with = "crate::coins::amount_map_serde")]
    pub tax_caps: BTreeMap<String, u128>,
    #[serde(with = "crate::coins::amount_serde")]
    pub default_cap: u128,
    pub exempt_denoms: BTreeSet<String>,
    pub tax_power_upgrade_height: u64,
}

impl Default for TreasuryParams {
    fn default() -> Self {
        TreasuryParams {
            tax_policy: PolicyConstraints::unconstrained(),
            reward_policy: PolicyConstraints::unconstrained(),
            tax_rate: Fraction::ZERO,
            reward_weight: Fraction::new(5, 100),
            epoch_length_blocks: DEFAULT_EPOCH_LENGTH,
            tax_caps: BTreeMap::new(),
            default_cap: DEFAULT_TAX_CAP,
            exempt_denoms: ["stake".to_string()].into(),
            tax_power_upgrade_height: 0,
        }
    }
}

impl TreasuryParams {
    pub fn validate(&self) -> Result<()> {
        self.tax_policy.validate()?;
        self.reward_policy.validate()?;
        if self.epoch_length_blocks == 0 {
            return Err(Error::InvalidParams("epoch_length_blocks must be positive".into()));
        }
        for (name, v, p) in [
            ("tax_rate", self.tax_rate, &self.tax_policy),
            ("reward_weight", self.reward_weight, &self.reward_policy),
        ] {
            if v < p.rate_min || v > p.rate_max {
                return Err(Error::InvalidParams(format!(
                    "{name} {v} outside policy [{}, {}]",
                    p.rate_min, p.rate_max
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Tax,
    Reward,
}

/// What one epoch boundary did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpochOutcome {
    pub height: u64,
    pub minted: Coins,
    pub burned: Coins,
    pub distributed: Allocation,
    pub tax_rate: Fraction,
    pub reward_weight: Fraction,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Treasury {
    params: TreasuryParams,
    epoch_burned: Coins,
    pending: BTreeMap<PolicyKind, PolicyConstraints>,
}

impl Treasury {
    pub fn new(params: TreasuryParams) -> Result<Self> {
        params.validate()?;
        Ok(Treasury {
            params,
            ..Default::default()
        })
    }

    pub fn params(&self) -> &TreasuryParams {
        &self.params
    }

    pub fn get_tax_rate(&self) -> Fraction {
        self.params.tax_rate
    }

    pub fn get_reward_weight(&self) -> Fraction {
        self.params.reward_weight
    }

    pub fn get_tax_cap(&self, denom: &str) -> u128 {
        self.params
            .tax_caps
            .get(denom)
            .copied()
            .unwrap_or(self.params.default_cap)
    }

    pub fn epoch_burned(&self) -> &Coins {
        &self.epoch_burned
    }

    pub fn pending_policy(&self, kind: PolicyKind) -> Option<&PolicyConstraints> {
        self.pending.get(&kind)
    }

    /// The parameters the ante pipeline taxes with.
    pub fn tax_params(&self) -> TaxParams {
        TaxParams {
            tax_rate: self.params.tax_rate,
            tax_caps: self.params.tax_caps.clone(),
            default_cap: self.params.default_cap,
            exempt_denoms: self.params.exempt_denoms.clone(),
            tax_power_upgrade_height: self.params.tax_power_upgrade_height,
        }
    }

    pub fn record_epoch_burn(&mut self, coins: &Coins) -> Result<()> {
        self.epoch_burned.add(coins)
    }

    /// Queues a policy; it replaces any earlier queued policy of that kind.
    pub fn queue_policy(&mut self, kind: PolicyKind, policy: PolicyConstraints) -> Result<()> {
        policy.validate()?;
        self.pending.insert(kind, policy);
        Ok(())
    }

    pub fn is_epoch_boundary(&self, height: u64) -> bool {
        height > 0 && height.is_multiple_of(self.params.epoch_length_blocks)
    }

    pub fn epoch_transition(
        &mut self,
        ledger: &mut Ledger,
        distribution: &mut Distribution,
        staking: &Staking,
        height: u64,
    ) -> Result<EpochOutcome> {
        if let Some(p) = self.pending.remove(&PolicyKind::Tax) {
            self.params.tax_policy = p;
        }
        if let Some(p) = self.pending.remove(&PolicyKind::Reward) {
            self.params.reward_policy = p;
        }
        let rate = self.params.tax_rate;
        self.params.tax_rate = self.params.tax_policy.clamp(rate, rate);
        let weight = self.params.reward_weight;
        self.params.reward_weight = self.params.reward_policy.clamp(weight, weight);

        let minted = std::mem::take(&mut self.epoch_burned);
        ledger.mint(TREASURY, &minted)?;
        let w = self.params.reward_weight;
        let burned = minted.map_amounts(|_, a| w.mul_floor(a));
        ledger.send_module_to_module(TREASURY, BURN_MODULE, &burned)?;
        ledger.burn(BURN_MODULE, &burned)?;
        let rest = minted.saturating_sub(&burned);
        let distributed = distribution.allocate(ledger, staking, TREASURY, &rest, None, Fraction::ONE)?;
        Ok(EpochOutcome {
            height,
            minted,
            burned,
            distributed,
            tax_rate: self.params.tax_rate,
            reward_weight: self.params.reward_weight,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coins::{MICRO, ULUNA};
    use crate::distribution::DistributionParams;
    use crate::staking::{HeightGates, SoftwareVersion, StakingParams, ValidatorStatus};
    use proptest::prelude::*;

    fn f(s: &str) -> Fraction {
        s.parse().unwrap()
    }

    fn world() -> (Ledger, Staking, Distribution) {
        let mut l = Ledger::default();
        let mut s = Staking::new(StakingParams::default(), HeightGates::default()).unwrap();
        for i in 0..3 {
            s.genesis_validator(&mut l, &format!("val{i}"), MICRO * (i + 1), SoftwareVersion::V21, ValidatorStatus::Active)
                .unwrap();
        }
        l.seal();
        let d = Distribution::new(DistributionParams::default()).unwrap();
        (l, s, d)
    }

    fn treasury_with_weight(w: Fraction) -> Treasury {
        Treasury::new(TreasuryParams {
            reward_policy: PolicyConstraints::fixed(w),
            reward_weight: w,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn rate_defaults_and_clamping() {
        let t = Treasury::default();
        assert_eq!(t.get_tax_rate(), Fraction::ZERO);
        assert_eq!(t.get_tax_cap(ULUNA), DEFAULT_TAX_CAP);
        let pinned = PolicyConstraints::fixed(f("0.012"));
        assert_eq!(pinned.clamp(f("0.012"), f("0.05")), f("0.012"));
        // interval wins over a zero step limit
        assert_eq!(pinned.clamp(Fraction::ZERO, Fraction::ZERO), f("0.012"));
        let stepped = PolicyConstraints {
            change_rate_max: f("0.001"),
            ..PolicyConstraints::unconstrained()
        };
        assert_eq!(stepped.clamp(f("0.01"), f("0.05")), f("0.011"));
        assert_eq!(stepped.clamp(f("0.0005"), Fraction::ZERO), Fraction::ZERO);
    }

    #[test]
    fn explicit_caps() {
        let mut p = TreasuryParams::default();
        p.tax_caps.insert("uusd".into(), 50_000_000);
        let t = Treasury::new(p).unwrap();
        assert_eq!(t.get_tax_cap("uusd"), 50_000_000);
        assert_eq!(t.get_tax_cap("ukrw"), DEFAULT_TAX_CAP);
    }

    #[test]
    fn burn_counter_accumulates_and_resets() {
        let (mut l, s, mut d) = world();
        let mut t = treasury_with_weight(Fraction::ONE);
        assert!(t.epoch_burned().is_zero());
        t.record_epoch_burn(&Coins::single(12_000, ULUNA)).unwrap();
        t.record_epoch_burn(&Coins::single(3_600, ULUNA)).unwrap();
        assert_eq!(t.epoch_burned().amount_of(ULUNA), 15_600);
        t.epoch_transition(&mut l, &mut d, &s, 86_400).unwrap();
        assert!(t.epoch_burned().is_zero());
    }

    #[test]
    fn seigniorage_examples() {
        for (w, burn, dist, supply_delta) in [
            ("1.0", 15_600u128, 0u128, 0i128),
            ("0.0", 0, 15_600, 15_600),
            ("0.4", 6_240, 9_360, 9_360),
        ] {
            let (mut l, s, mut d) = world();
            let mut t = treasury_with_weight(f(w));
            t.record_epoch_burn(&Coins::single(15_600, ULUNA)).unwrap();
            let before = l.total_supply(ULUNA) as i128;
            let out = t.epoch_transition(&mut l, &mut d, &s, 86_400).unwrap();
            assert_eq!(out.minted.amount_of(ULUNA), 15_600);
            assert_eq!(out.burned.amount_of(ULUNA), burn);
            assert_eq!(out.distributed.total().unwrap().amount_of(ULUNA), dist);
            assert_eq!(l.total_supply(ULUNA) as i128 - before, supply_delta);
            l.check_invariants().unwrap();
            d.check_invariants(&l).unwrap();
        }
    }

    #[test]
    fn queued_policy_applies_at_boundary() {
        let (mut l, s, mut d) = world();
        let mut t = Treasury::default();
        t.queue_policy(PolicyKind::Tax, PolicyConstraints::fixed(f("0.012"))).unwrap();
        assert_eq!(t.get_tax_rate(), Fraction::ZERO);
        assert!(t.pending_policy(PolicyKind::Tax).is_some());
        let out = t.epoch_transition(&mut l, &mut d, &s, 86_400).unwrap();
        assert_eq!(out.tax_rate, f("0.012"));
        assert_eq!(t.tax_params().tax_rate, f("0.012"));
        assert!(t.pending_policy(PolicyKind::Tax).is_none());
    }

    #[test]
    fn rejects_bad_policies() {
        let bad = PolicyConstraints {
            rate_min: f("0.5"),
            rate_max: f("0.1"),
            ..PolicyConstraints::unconstrained()
        };
        assert!(Treasury::default().queue_policy(PolicyKind::Tax, bad).is_err());
        let p = TreasuryParams {
            epoch_length_blocks: 0,
            ..Default::default()
        };
        assert!(Treasury::new(p).is_err());
    }

    #[test]
    fn boundaries() {
        let t = Treasury::default();
        assert!(!t.is_epoch_boundary(0));
        assert!(t.is_epoch_boundary(86_400));
        assert!(!t.is_epoch_boundary(86_401));
    }

    proptest! {
        #[test]
        fn seigniorage_partition(
            burns in proptest::collection::vec(0u128..1_000_000_000_000, 0..6),
            w_idx in 0usize..3,
        ) {
            let w = [Fraction::ZERO, f("0.4"), Fraction::ONE][w_idx];
            let (mut l, s, mut d) = world();
            let mut t = treasury_with_weight(w);
            let mut sum = 0u128;
            for b in &burns {
                t.record_epoch_burn(&Coins::single(*b, ULUNA)).unwrap();
                sum += b;
            }
            let before = l.total_supply(ULUNA);
            let out = t.epoch_transition(&mut l, &mut d, &s, 86_400).unwrap();
            prop_assert_eq!(out.minted.amount_of(ULUNA), sum);
            let parts = out.burned.amount_of(ULUNA) + out.distributed.total().unwrap().amount_of(ULUNA);
            prop_assert_eq!(parts, sum);
            if w == Fraction::ONE {
                prop_assert_eq!(l.total_supply(ULUNA), before);
            }
            prop_assert!(l.check_invariants().is_ok());
        }

        #[test]
        fn step_bounded_under_fixed_policy(
            prev in 0u128..=1000,
            req in 0u128..=1000,
            step in 0u128..=1000,
            lo in 0u128..=1000,
            width in 0u128..=1000,
        ) {
            let hi = (lo + width).min(1000);
            let p = PolicyConstraints {
                rate_min: Fraction::new(lo, 1000),
                rate_max: Fraction::new(hi, 1000),
                cap: Coin::new(0, USDR),
                change_rate_max: Fraction::new(step, 1000),
            };
            let prev = Fraction::new(prev, 1000).clamp_to(p.rate_min, p.rate_max);
            let next = p.clamp(prev, Fraction::new(req, 1000));
            prop_assert!(next >= p.rate_min && next <= p.rate_max);
            prop_assert!(next.abs_diff(&prev) <= p.change_rate_max);
        }
    }
}
