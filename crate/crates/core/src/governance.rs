//! Proposals, stake-weighted votes, tallying and application of passed
//! parameter changes.
//!
//! A passed proposal is applied in the block it is tallied in. Distribution,
//! staking and transfer changes land at the start of the next block; treasury
//! policies are handed to the treasury queue and wait for the next epoch
//! boundary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::coins::Coins;
use crate::distribution::{Distribution, SpendTarget};
use crate::error::{Error, Result};
use crate::fraction::Fraction;
use crate::ledger::{Address, Ledger};
use crate::staking::Staking;
use crate::treasury::{PolicyConstraints, PolicyKind, Treasury};

/// Parameter subspaces a proposal may touch.
pub const SUBSPACES: [&str; 4] = ["treasury", "distribution", "transfer", "staking"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VoteOption {
    Yes,
    No,
    NoWithVeto,
    Abstain,
}

/// One raw `(subspace, key, value)` entry as written in a proposal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamChange {
    pub subspace: String,
    pub key: String,
    pub value: serde_json::Value,
}

impl ParamChange {
    pub fn new(subspace: &str, key: &str, value: serde_json::Value) -> Self {
        ParamChange {
            subspace: subspace.to_string(),
            key: key.to_string(),
            value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProposalContent {
    Text {
        #[serde(default)]
        title: String,
    },
    ParamChange {
        #[serde(default)]
        title: String,
        changes: Vec<ParamChange>,
    },
    CommunityPoolSpend {
        #[serde(default)]
        title: String,
        recipient: SpendTarget,
        amount: Coins,
    },
}

/// IBC transfer switches. Stored only; nothing reads them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransferParams {
    pub send_enabled: bool,
    pub receive_enabled: bool,
}

/// A validated parameter update.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamUpdate {
    TaxPolicy(PolicyConstraints),
    RewardPolicy(PolicyConstraints),
    CommunityTax(Fraction),
    BaseProposerReward(Fraction),
    BonusProposerReward(Fraction),
    SendEnabled(bool),
    ReceiveEnabled(bool),
    UnbondingPeriodBlocks(u64),
    MaxDelegationPowerFraction(Fraction),
}

fn malformed(c: &ParamChange, why: impl std::fmt::Display) -> Error {
    Error::MalformedProposal(format!("{}/{}: {why}", c.subspace, c.key))
}

fn value_text(v: &serde_json::Value) -> Option<String> {
    match v {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Number(n) => Some(n.to_string()),
        serde_json::Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

impl ParamUpdate {
    pub fn parse(c: &ParamChange) -> Result<Self> {
        let subspace = c.subspace.to_ascii_lowercase();
        if !SUBSPACES.contains(&subspace.as_str()) {
            return Err(malformed(c, "unknown subspace"));
        }
        let fraction = || -> Result<Fraction> {
            let s = value_text(&c.value).ok_or_else(|| malformed(c, "expected a decimal"))?;
            let f: Fraction = s.parse().map_err(|e| malformed(c, e))?;
            if !f.is_at_most_one() {
                return Err(malformed(c, "value above 1"));
            }
            Ok(f)
        };
        let flag = || -> Result<bool> {
            match value_text(&c.value).as_deref() {
                Some("true") => Ok(true),
                Some("false") => Ok(false),
                _ => Err(malformed(c, "expected true or false")),
            }
        };
        let policy = || -> Result<PolicyConstraints> {
            let p: PolicyConstraints = match &c.value {
                serde_json::Value::String(s) => serde_json::from_str(s),
                v => serde_json::from_value(v.clone()),
            }
            .map_err(|e| malformed(c, e))?;
            p.validate().map_err(|e| malformed(c, e))?;
            Ok(p)
        };
        let key = c.key.to_ascii_lowercase();
        let update = match (subspace.as_str(), key.as_str()) {
            ("treasury", "taxpolicy") => ParamUpdate::TaxPolicy(policy()?),
            ("treasury", "rewardpolicy") => ParamUpdate::RewardPolicy(policy()?),
            ("distribution", "communitytax") => ParamUpdate::CommunityTax(fraction()?),
            ("distribution", "baseproposerreward") => ParamUpdate::BaseProposerReward(fraction()?),
            ("distribution", "bonusproposerreward") => ParamUpdate::BonusProposerReward(fraction()?),
            ("transfer", "sendenabled") => ParamUpdate::SendEnabled(flag()?),
            ("transfer", "receiveenabled") => ParamUpdate::ReceiveEnabled(flag()?),
            ("staking", "unbondingperiodblocks") => {
                let n = value_text(&c.value)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| malformed(c, "expected a block count"))?;
                ParamUpdate::UnbondingPeriodBlocks(n)
            }
            ("staking", "maxdelegationpowerfraction") => {
                let f = fraction()?;
                if f.is_zero() {
                    return Err(malformed(c, "cap must be positive"));
                }
                ParamUpdate::MaxDelegationPowerFraction(f)
            }
            _ => return Err(malformed(c, "unknown key")),
        };
        Ok(update)
    }

    pub fn is_treasury(&self) -> bool {
        matches!(self, ParamUpdate::TaxPolicy(_) | ParamUpdate::RewardPolicy(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProposalKind {
    Text,
    ParamChange(Vec<ParamUpdate>),
    CommunityPoolSpend { target: SpendTarget, amount: Coins },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposalStatus {
    Voting,
    Passed,
    Rejected,
    Applied,
    Failed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyResult {
    pub yes: u128,
    pub no: u128,
    pub no_with_veto: u128,
    pub abstain: u128,
    pub bonded: u128,
}

impl TallyResult {
    pub fn total(&self) -> u128 {
        self.yes + self.no + self.no_with_veto + self.abstain
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GovParams {
    pub quorum: Fraction,
    pub threshold: Fraction,
    pub veto_threshold: Fraction,
    pub voting_period_blocks: u64,
}

impl Default for GovParams {
    fn default() -> Self {
        GovParams {
            quorum: Fraction::new(40, 100),
            threshold: Fraction::new(50, 100),
            veto_threshold: Fraction::new(334, 1000),
            voting_period_blocks: 12_343,
        }
    }
}

impl GovParams {
    pub fn validate(&self) -> Result<()> {
        for (n, f) in [
            ("quorum", self.quorum),
            ("threshold", self.threshold),
            ("veto_threshold", self.veto_threshold),
        ] {
            if !f.is_at_most_one() {
                return Err(Error::InvalidParams(format!("{n} {f} above 1")));
            }
        }
        Ok(())
    }
}

/// Passes iff turnout reaches quorum, yes beats the threshold among
/// non-abstaining votes (strictly), and vetoes stay below the veto threshold.
pub fn tally_outcome(t: &TallyResult, p: &GovParams) -> bool {
    let total = t.total();
    if t.bonded == 0 || total == 0 {
        return false;
    }
    if Fraction::new(total.min(t.bonded), t.bonded) < p.quorum {
        return false;
    }
    let voting = t.yes + t.no + t.no_with_veto;
    if voting == 0 {
        return false;
    }
    Fraction::new(t.yes, voting) > p.threshold && Fraction::new(t.no_with_veto, total) < p.veto_threshold
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proposal {
    pub id: u64,
    pub title: String,
    pub kind: ProposalKind,
    pub submit_height: u64,
    pub voting_end: u64,
    pub status: ProposalStatus,
    pub votes: BTreeMap<Address, VoteOption>,
    pub tally: Option<TallyResult>,
    pub warnings: Vec<String>,
}

/// Result of tallying one proposal at the end of a block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TallyEvent {
    pub id: u64,
    pub height: u64,
    pub passed: bool,
    pub tally: TallyResult,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Governance {
    pub params: GovParams,
    proposals: BTreeMap<u64, Proposal>,
    next_id: u64,
    /// updates due at the start of the next block, by proposal
    pending: Vec<(u64, ParamUpdate)>,
}

impl Default for Governance {
    fn default() -> Self {
        Governance {
            params: GovParams::default(),
            proposals: BTreeMap::new(),
            next_id: 1,
            pending: Vec::new(),
        }
    }
}

impl Governance {
    pub fn new(params: GovParams) -> Result<Self> {
        params.validate()?;
        Ok(Governance {
            params,
            ..Default::default()
        })
    }

    pub fn proposal(&self, id: u64) -> Option<&Proposal> {
        self.proposals.get(&id)
    }

    pub fn proposals(&self) -> impl Iterator<Item = &Proposal> {
        self.proposals.values()
    }

    pub fn submit_proposal(&mut self, content: &ProposalContent, height: u64) -> Result<u64> {
        let mut warnings = Vec::new();
        let (title, kind) = match content {
            ProposalContent::Text { title } => (title.clone(), ProposalKind::Text),
            ProposalContent::ParamChange { title, changes } => {
                if changes.is_empty() {
                    return Err(Error::MalformedProposal("no changes".into()));
                }
                let updates = changes.iter().map(ParamUpdate::parse).collect::<Result<Vec<_>>>()?;
                let has_tax = updates.iter().any(|u| matches!(u, ParamUpdate::TaxPolicy(_)));
                let has_reward = updates.iter().any(|u| matches!(u, ParamUpdate::RewardPolicy(_)));
                if has_tax && !has_reward {
                    warnings.push(
                        "TaxPolicy changed without RewardPolicy: burned tax may be re-minted as rewards"
                            .to_string(),
                    );
                }
                (title.clone(), ProposalKind::ParamChange(updates))
            }
            ProposalContent::CommunityPoolSpend { title, recipient, amount } => {
                if amount.is_zero() {
                    return Err(Error::MalformedProposal("empty spend".into()));
                }
                (
                    title.clone(),
                    ProposalKind::CommunityPoolSpend {
                        target: recipient.clone(),
                        amount: amount.clone(),
                    },
                )
            }
        };
        let id = self.next_id;
        self.next_id += 1;
        for w in &warnings {
            log::warn!("proposal {id}: {w}");
        }
        self.proposals.insert(
            id,
            Proposal {
                id,
                title,
                kind,
                submit_height: height,
                voting_end: height + self.params.voting_period_blocks,
                status: ProposalStatus::Voting,
                votes: BTreeMap::new(),
                tally: None,
                warnings,
            },
        );
        Ok(id)
    }

    /// Records a vote; a later vote by the same voter replaces the earlier.
    pub fn vote(&mut self, voter: &str, id: u64, option: VoteOption, height: u64) -> Result<()> {
        let p = self.proposals.get_mut(&id).ok_or(Error::UnknownProposal(id))?;
        if p.status != ProposalStatus::Voting || height > p.voting_end {
            return Err(Error::VotingClosed(id));
        }
        p.votes.insert(voter.to_string(), option);
        Ok(())
    }

    /// Counts votes weighted by each voter's bonded stake now.
    pub fn tally(&mut self, id: u64, staking: &Staking, height: u64) -> Result<bool> {
        let params = self.params.clone();
        let p = self.proposals.get_mut(&id).ok_or(Error::UnknownProposal(id))?;
        if height < p.voting_end {
            return Err(Error::StillInVoting {
                id,
                voting_end: p.voting_end,
            });
        }
        if p.status != ProposalStatus::Voting {
            return Ok(!matches!(p.status, ProposalStatus::Rejected));
        }
        let mut t = TallyResult {
            bonded: staking.total_bonded_tokens(),
            ..Default::default()
        };
        for (voter, option) in &p.votes {
            let w = staking.bonded_by(voter);
            match option {
                VoteOption::Yes => t.yes += w,
                VoteOption::No => t.no += w,
                VoteOption::NoWithVeto => t.no_with_veto += w,
                VoteOption::Abstain => t.abstain += w,
            }
        }
        let passed = tally_outcome(&t, &params);
        p.tally = Some(t);
        p.status = if passed {
            ProposalStatus::Passed
        } else {
            ProposalStatus::Rejected
        };
        Ok(passed)
    }

    /// Schedules a passed proposal's effects.
    pub fn apply_param_change(
        &mut self,
        id: u64,
        treasury: &mut Treasury,
        distribution: &Distribution,
        ledger: &mut Ledger,
    ) -> Result<()> {
        let p = self.proposals.get_mut(&id).ok_or(Error::UnknownProposal(id))?;
        if p.status != ProposalStatus::Passed {
            return Err(Error::NotPassed(id));
        }
        let result = match &p.kind {
            ProposalKind::Text => Ok(()),
            ProposalKind::ParamChange(updates) => {
                let mut r = Ok(());
                for u in updates {
                    match u {
                        ParamUpdate::TaxPolicy(pc) => r = r.and(treasury.queue_policy(PolicyKind::Tax, pc.clone())),
                        ParamUpdate::RewardPolicy(pc) => {
                            r = r.and(treasury.queue_policy(PolicyKind::Reward, pc.clone()))
                        }
                        other => self.pending.push((id, other.clone())),
                    }
                }
                r
            }
            ProposalKind::CommunityPoolSpend { target, amount } => {
                distribution.community_pool_spend(ledger, target, amount)
            }
        };
        p.status = if result.is_ok() {
            ProposalStatus::Applied
        } else {
            ProposalStatus::Failed
        };
        result
    }

    /// Applies updates scheduled for this block. A proposal whose updates
    /// leave a module with invalid parameters is rolled back and marked
    /// failed.
    pub fn flush_pending(
        &mut self,
        staking: &mut Staking,
        distribution: &mut Distribution,
        transfer: &mut TransferParams,
    ) -> Vec<(u64, Error)> {
        let mut failures = Vec::new();
        let pending = std::mem::take(&mut self.pending);
        let mut by_id: BTreeMap<u64, Vec<ParamUpdate>> = BTreeMap::new();
        for (id, u) in pending {
            by_id.entry(id).or_default().push(u);
        }
        for (id, updates) in by_id {
            let mut sp = staking.params.clone();
            let mut dp = distribution.params;
            let mut tp = *transfer;
            for u in updates {
                match u {
                    ParamUpdate::CommunityTax(f) => dp.community_tax = f,
                    ParamUpdate::BaseProposerReward(f) => dp.base_proposer_reward = f,
                    ParamUpdate::BonusProposerReward(f) => dp.bonus_proposer_reward = f,
                    ParamUpdate::SendEnabled(b) => tp.send_enabled = b,
                    ParamUpdate::ReceiveEnabled(b) => tp.receive_enabled = b,
                    ParamUpdate::UnbondingPeriodBlocks(n) => sp.unbonding_period_blocks = n,
                    ParamUpdate::MaxDelegationPowerFraction(f) => sp.max_delegation_power_fraction = f,
                    ParamUpdate::TaxPolicy(_) | ParamUpdate::RewardPolicy(_) => {}
                }
            }
            match dp.validate().and_then(|_| sp.validate()) {
                Ok(()) => {
                    staking.params = sp;
                    distribution.params = dp;
                    *transfer = tp;
                }
                Err(e) => {
                    if let Some(p) = self.proposals.get_mut(&id) {
                        p.status = ProposalStatus::Failed;
                    }
                    failures.push((id, e));
                }
            }
        }
        failures
    }

    /// Tallies every proposal whose voting period ended by `height` and
    /// applies the ones that passed.
    pub fn end_block(
        &mut self,
        height: u64,
        staking: &Staking,
        treasury: &mut Treasury,
        distribution: &Distribution,
        ledger: &mut Ledger,
    ) -> Vec<TallyEvent> {
        let due: Vec<u64> = self
            .proposals
            .values()
            .filter(|p| p.status == ProposalStatus::Voting && p.voting_end <= height)
            .map(|p| p.id)
            .collect();
        let mut events = Vec::new();
        for id in due {
            let passed = self.tally(id, staking, height).expect("due proposal");
            let error = if passed {
                self.apply_param_change(id, treasury, distribution, ledger)
                    .err()
                    .map(|e| e.to_string())
            } else {
                None
            };
            let tally = self.proposals[&id].tally.expect("just tallied");
            events.push(TallyEvent {
                id,
                height,
                passed,
                tally,
                error,
            });
        }
        events
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coins::{Coin, MICRO, ULUNA};
    use crate::ledger::COMMUNITY_POOL;
    use crate::staking::{HeightGates, SoftwareVersion, StakingParams, ValidatorStatus};
    use proptest::prelude::*;
    use serde_json::json;

    fn prop3568() -> ProposalContent {
        ProposalContent::ParamChange {
            title: "Update tax policy".into(),
            changes: vec![
                ParamChange::new(
                    "treasury",
                    "TaxPolicy",
                    json!({"rate_min": "0.012", "rate_max": "0.012",
                           "cap": {"denom": "usdr", "amount": "10000000"}, "change_rate_max": "0.0"}),
                ),
                ParamChange::new(
                    "treasury",
                    "RewardPolicy",
                    json!({"rate_min": "1.0", "rate_max": "1.0",
                           "cap": {"denom": "unused", "amount": "0"}, "change_rate_max": "0.0"}),
                ),
            ],
        }
    }

    fn prop4080() -> ProposalContent {
        ProposalContent::ParamChange {
            title: String::new(),
            changes: vec![
                ParamChange::new("distribution", "communitytax", json!("0.500000000000000000")),
                ParamChange::new("distribution", "baseproposerreward", json!("0.030000000000000000")),
                ParamChange::new("distribution", "bonusproposerreward", json!("0.120000000000000000")),
            ],
        }
    }

    fn staking_with(stakes: &[(&str, u128)]) -> (Ledger, Staking) {
        let mut l = Ledger::default();
        let mut s = Staking::new(StakingParams::default(), HeightGates::default()).unwrap();
        for (v, t) in stakes {
            s.genesis_validator(&mut l, v, *t, SoftwareVersion::V21, ValidatorStatus::Active)
                .unwrap();
        }
        l.seal();
        (l, s)
    }

    #[test]
    fn submissions() {
        let mut g = Governance::default();
        assert_eq!(g.submit_proposal(&prop3568(), 10).unwrap(), 1);
        assert_eq!(g.submit_proposal(&prop4080(), 10).unwrap(), 2);
        assert_eq!(g.proposal(1).unwrap().voting_end, 10 + 12_343);
        assert!(g.proposal(1).unwrap().warnings.is_empty());
        let bad = ProposalContent::ParamChange {
            title: String::new(),
            changes: vec![ParamChange::new("oracle", "VotePeriod", json!("5"))],
        };
        assert!(matches!(g.submit_proposal(&bad, 10), Err(Error::MalformedProposal(_))));
        let lone_tax = ProposalContent::ParamChange {
            title: String::new(),
            changes: vec![ParamChange::new(
                "treasury",
                "TaxPolicy",
                json!("{\"rate_min\":\"0.012\",\"rate_max\":\"0.012\",\"cap\":{\"denom\":\"usdr\",\"amount\":\"1\"},\"change_rate_max\":\"0\"}"),
            )],
        };
        let id = g.submit_proposal(&lone_tax, 10).unwrap();
        assert_eq!(g.proposal(id).unwrap().warnings.len(), 1);
    }

    #[test]
    fn prop4095_figures_pass() {
        let m = 1_000_000u128;
        let t = TallyResult {
            yes: 149_000_000 * m,
            no: 16_320_000 * m,
            no_with_veto: 0,
            abstain: 0,
            bonded: 321_220_000 * m,
        };
        assert!(tally_outcome(&t, &GovParams::default()));
    }

    #[test]
    fn tally_gates() {
        let p = GovParams::default();
        let low_turnout = TallyResult { yes: 39, bonded: 100, ..Default::default() };
        assert!(!tally_outcome(&low_turnout, &p));
        let at_threshold = TallyResult { yes: 30, no: 30, bonded: 100, ..Default::default() };
        assert!(!tally_outcome(&at_threshold, &p));
        let just_over = TallyResult { yes: 31, no: 30, bonded: 100, ..Default::default() };
        assert!(tally_outcome(&just_over, &p));
        let vetoed = TallyResult { yes: 60, no_with_veto: 40, bonded: 100, ..Default::default() };
        assert!(!tally_outcome(&vetoed, &p));
        let abstained = TallyResult { abstain: 90, bonded: 100, ..Default::default() };
        assert!(!tally_outcome(&abstained, &p));
    }

    #[test]
    fn vote_lifecycle() {
        let (mut l, s) = staking_with(&[("val0", 3 * MICRO), ("val1", MICRO)]);
        let mut g = Governance::default();
        let mut t = Treasury::default();
        let d = Distribution::default();
        let id = g.submit_proposal(&prop4080(), 0).unwrap();
        g.vote("val1", id, VoteOption::Yes, 5).unwrap();
        g.vote("val1", id, VoteOption::No, 6).unwrap();
        g.vote("val0", id, VoteOption::Yes, 7).unwrap();
        assert!(matches!(g.tally(id, &s, 100), Err(Error::StillInVoting { .. })));
        assert!(matches!(
            g.apply_param_change(id, &mut t, &d, &mut l),
            Err(Error::NotPassed(_))
        ));
        let end = g.proposal(id).unwrap().voting_end;
        assert!(matches!(g.vote("val0", id, VoteOption::No, end + 1), Err(Error::VotingClosed(_))));
        let events = g.end_block(end, &s, &mut t, &d, &mut l);
        assert_eq!(events.len(), 1);
        assert!(events[0].passed);
        assert_eq!(events[0].tally.yes, 3 * MICRO);
        assert_eq!(events[0].tally.no, MICRO);
        assert_eq!(g.proposal(id).unwrap().status, ProposalStatus::Applied);
    }

    #[test]
    fn prop4080_applies_verbatim_next_block() {
        let (mut l, mut s) = staking_with(&[("val0", MICRO)]);
        let mut g = Governance::default();
        let mut t = Treasury::default();
        let mut d = Distribution::default();
        let mut tp = TransferParams::default();
        let id = g.submit_proposal(&prop4080(), 0).unwrap();
        g.vote("val0", id, VoteOption::Yes, 1).unwrap();
        g.end_block(12_343, &s, &mut t, &d, &mut l);
        assert_eq!(d.params, crate::distribution::DistributionParams::default());
        assert!(g.flush_pending(&mut s, &mut d, &mut tp).is_empty());
        assert_eq!(d.params.community_tax.to_string(), "0.5");
        assert_eq!(d.params.base_proposer_reward, "0.03".parse().unwrap());
        assert_eq!(d.params.bonus_proposer_reward, "0.12".parse().unwrap());
    }

    #[test]
    fn treasury_changes_queue_for_epoch() {
        let (mut l, s) = staking_with(&[("val0", MICRO)]);
        let mut g = Governance::default();
        let mut t = Treasury::default();
        let d = Distribution::default();
        let id = g.submit_proposal(&prop3568(), 0).unwrap();
        g.vote("val0", id, VoteOption::Yes, 1).unwrap();
        g.end_block(12_343, &s, &mut t, &d, &mut l);
        assert_eq!(t.get_tax_rate(), Fraction::ZERO);
        assert!(t.pending_policy(PolicyKind::Tax).is_some());
        assert!(t.pending_policy(PolicyKind::Reward).is_some());
    }

    #[test]
    fn text_and_spend() {
        let (mut l, s) = staking_with(&[("val0", MICRO)]);
        let mut g = Governance::default();
        let mut t = Treasury::default();
        let d = Distribution::default();
        let text = g.submit_proposal(&ProposalContent::Text { title: "gates".into() }, 0).unwrap();
        let spend = g
            .submit_proposal(
                &ProposalContent::CommunityPoolSpend {
                    title: String::new(),
                    recipient: SpendTarget::Burn,
                    amount: Coin::new(10, ULUNA).into(),
                },
                0,
            )
            .unwrap();
        g.vote("val0", text, VoteOption::Yes, 1).unwrap();
        g.vote("val0", spend, VoteOption::Yes, 1).unwrap();
        let before = l.clone();
        let events = g.end_block(12_343, &s, &mut t, &d, &mut l);
        assert_eq!(g.proposal(text).unwrap().status, ProposalStatus::Applied);
        assert!(events[1].error.is_some());
        assert_eq!(g.proposal(spend).unwrap().status, ProposalStatus::Failed);
        assert_eq!(l, before);
        assert!(l.module_balance(COMMUNITY_POOL).unwrap().is_zero());
    }

    #[test]
    fn invalid_combination_is_rolled_back() {
        let (mut l, mut s) = staking_with(&[("val0", MICRO)]);
        let mut g = Governance::default();
        let mut t = Treasury::default();
        let mut d = Distribution::default();
        let mut tp = TransferParams::default();
        let c = ProposalContent::ParamChange {
            title: String::new(),
            changes: vec![ParamChange::new("distribution", "communitytax", json!("0.99"))],
        };
        let id = g.submit_proposal(&c, 0).unwrap();
        g.vote("val0", id, VoteOption::Yes, 1).unwrap();
        g.end_block(12_343, &s, &mut t, &d, &mut l);
        assert_eq!(g.flush_pending(&mut s, &mut d, &mut tp).len(), 1);
        assert_eq!(d.params, crate::distribution::DistributionParams::default());
        assert_eq!(g.proposal(id).unwrap().status, ProposalStatus::Failed);
    }

    #[test]
    fn transfer_flags_parse() {
        let u = ParamUpdate::parse(&ParamChange::new("transfer", "SendEnabled", json!("true"))).unwrap();
        assert_eq!(u, ParamUpdate::SendEnabled(true));
        assert!(ParamUpdate::parse(&ParamChange::new("transfer", "SendEnabled", json!("yes"))).is_err());
    }

    proptest! {
        #[test]
        fn tally_ignores_vote_order(
            votes in proptest::collection::vec((0usize..6, 0u8..4), 1..20),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let names: Vec<String> = (0..6).map(|i| format!("val{i}")).collect();
            let stakes: Vec<(&str, u128)> = names.iter().enumerate().map(|(i, n)| (n.as_str(), (i as u128 + 1) * MICRO)).collect();
            let (_, s) = staking_with(&stakes);
            let opt = |o: u8| [VoteOption::Yes, VoteOption::No, VoteOption::NoWithVeto, VoteOption::Abstain][o as usize];
            // only the last vote per voter counts, so keep one per voter
            let mut last: BTreeMap<usize, u8> = BTreeMap::new();
            for (v, o) in &votes {
                last.insert(*v, *o);
            }
            let mut order: Vec<(usize, u8)> = last.into_iter().collect();
            let run = |order: &[(usize, u8)]| {
                let mut g = Governance::default();
                let id = g.submit_proposal(&ProposalContent::Text { title: String::new() }, 0).unwrap();
                for (v, o) in order {
                    g.vote(&names[*v], id, opt(*o), 1).unwrap();
                }
                let passed = g.tally(id, &s, 12_343).unwrap();
                (passed, g.proposal(id).unwrap().tally)
            };
            let a = run(&order);
            order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(a, run(&order));
        }
    }
}
