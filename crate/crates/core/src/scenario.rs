//! Scenario files: an ordered list of events keyed by slot.
//!
//! A slot is one block interval of wall-clock time. While the chain runs,
//! slot and height coincide; during a halt slots keep advancing and the
//! halted height is retried each slot.
//!
//! ```toml
//! name = "example"
//! inclusion_delay = 2
//! end_height = 1000
//!
//! [[events]]
//! at = 10
//! type = "upgrade-validator"
//! validator = "val3"
//! version = "v21"
//!
//! [[events]]
//! at = 12
//! type = "submit-tx"
//! tx = { fee_payer = "alice", fee = "20000uluna", msgs = [
//!   { type = "send", from = "alice", to = "bob", amount = "1000000uluna" },
//! ] }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ante::{Msg, Tx};
use crate::coins::{Coin, Coins};
use crate::distribution::SpendTarget;
use crate::error::{Error, Result};
use crate::fraction::Fraction;
use crate::governance::{ProposalContent, VoteOption};
use crate::staking::SoftwareVersion;

pub const DEFAULT_INCLUSION_DELAY: u64 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_delay")]
    pub inclusion_delay: u64,
    /// Last slot to simulate.
    pub end_height: u64,
    #[serde(default)]
    pub events: Vec<ScenarioEvent>,
}

fn default_delay() -> u64 {
    DEFAULT_INCLUSION_DELAY
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioEvent {
    pub at: u64,
    #[serde(flatten)]
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Action {
    SubmitTx {
        tx: Tx,
    },
    UpgradeValidator {
        validator: String,
        version: SoftwareVersion,
    },
    SubmitProposal {
        proposer: String,
        content: ProposalContent,
    },
    CastVote {
        voter: String,
        proposal_id: u64,
        option: VoteOption,
    },
    /// Delegates as soon as the committed height reaches `target`.
    SniperArm {
        target: u64,
        delegator: String,
        validator: String,
        amount: Coin,
        #[serde(default)]
        fee: Coins,
        #[serde(default)]
        gas_limit: u64,
    },
    /// Submits a community pool spend proposal.
    CommunitySpend {
        proposer: String,
        recipient: SpendTarget,
        amount: Coins,
    },
    RollbackTo {
        height: u64,
    },
    /// Precommit fraction for the block produced in this slot.
    PrecommitOverride {
        fraction: Fraction,
    },
}

impl Action {
    /// The transaction this event puts in the mempool, if any.
    pub fn as_tx(&self) -> Option<Tx> {
        let fee_free = |signer: &str, msg: Msg| Tx {
            msgs: vec![msg],
            fee_payer: signer.to_string(),
            fee: Coins::new(),
            gas_limit: 0,
        };
        match self {
            Action::SubmitTx { tx } => Some(tx.clone()),
            Action::SubmitProposal { proposer, content } => Some(fee_free(
                proposer,
                Msg::SubmitProposal {
                    proposer: proposer.clone(),
                    content: content.clone(),
                },
            )),
            Action::CastVote { voter, proposal_id, option } => Some(fee_free(
                voter,
                Msg::Vote {
                    voter: voter.clone(),
                    proposal_id: *proposal_id,
                    option: *option,
                },
            )),
            Action::CommunitySpend { proposer, recipient, amount } => Some(fee_free(
                proposer,
                Msg::SubmitProposal {
                    proposer: proposer.clone(),
                    content: ProposalContent::CommunityPoolSpend {
                        title: String::new(),
                        recipient: recipient.clone(),
                        amount: amount.clone(),
                    },
                },
            )),
            _ => None,
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut s: Scenario = toml::from_str(text).map_err(|e| Error::Parse(format!("scenario: {e}")))?;
        // stable: ties keep declaration order
        s.events.sort_by_key(|e| e.at);
        Ok(s)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self, genesis_height: u64) -> Result<()> {
        if self.end_height <= genesis_height {
            return Err(Error::Parse(format!(
                "end_height {} not after genesis height {genesis_height}",
                self.end_height
            )));
        }
        for e in &self.events {
            if e.at <= genesis_height {
                return Err(Error::Parse(format!(
                    "event at {} not after genesis height {genesis_height}",
                    e.at
                )));
            }
            if let Action::PrecommitOverride { fraction } = &e.action {
                if *fraction < Fraction::new(2, 3) || !fraction.is_at_most_one() {
                    return Err(Error::Parse(format!("precommit fraction {fraction} outside [2/3, 1]")));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_event_kind() {
        let text = r#"
name = "all"
end_height = 100

[[events]]
at = 5
type = "submit-tx"
tx = { fee_payer = "alice", fee = "10uluna", gas_limit = 10, msgs = [
  { type = "send", from = "alice", to = "bob", amount = "5uluna" },
  { type = "exec", grantee = "g", msgs = [ { type = "swap-send", from = "alice", to = "bob", offer = "3uluna", ask_denom = "uusd" } ] },
] }

[[events]]
at = 3
type = "upgrade-validator"
validator = "val0"
version = "v21"

[[events]]
at = 3
type = "sniper-arm"
target = 50
delegator = "s"
validator = "val0"
amount = "1000000uluna"

[[events]]
at = 4
type = "submit-proposal"
proposer = "alice"
content = { kind = "param-change", changes = [ { subspace = "distribution", key = "communitytax", value = "0.5" } ] }

[[events]]
at = 4
type = "submit-proposal"
proposer = "alice"
[events.content]
kind = "param-change"
[[events.content.changes]]
subspace = "treasury"
key = "TaxPolicy"
value = { rate_min = "0.012", rate_max = "0.012", cap = { denom = "usdr", amount = "10000000" }, change_rate_max = "0.0" }

[[events]]
at = 6
type = "cast-vote"
voter = "val0"
proposal_id = 1
option = "no-with-veto"

[[events]]
at = 7
type = "community-spend"
proposer = "alice"
recipient = "burn"
amount = "3500uluna"

[[events]]
at = 8
type = "rollback-to"
height = 2

[[events]]
at = 9
type = "precommit-override"
fraction = "0.7"
"#;
        let s = Scenario::from_toml(text).unwrap();
        assert_eq!(s.inclusion_delay, 2);
        let ats: Vec<u64> = s.events.iter().map(|e| e.at).collect();
        assert_eq!(ats, vec![3, 3, 4, 4, 5, 6, 7, 8, 9]);
        assert!(matches!(s.events[0].action, Action::UpgradeValidator { .. }));
        assert!(matches!(s.events[1].action, Action::SniperArm { .. }));
        assert!(s.events[2].action.as_tx().is_some());
        assert!(s.events[7].action.as_tx().is_none());
        s.validate(0).unwrap();
        assert!(s.validate(3).is_err());
    }

    #[test]
    fn rejects_unknown_event() {
        let text = "end_height = 5\n[[events]]\nat = 1\ntype = \"teleport\"\n";
        assert!(matches!(Scenario::from_toml(text), Err(Error::Parse(_))));
        assert!(Scenario::from_toml("name = \"x\"").is_err());
    }

    #[test]
    fn precommit_bounds() {
        let text = "end_height = 5\n[[events]]\nat = 1\ntype = \"precommit-override\"\nfraction = \"0.5\"\n";
        assert!(Scenario::from_toml(text).unwrap().validate(0).is_err());
    }
}
