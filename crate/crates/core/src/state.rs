//! The full deterministic world state and the per-block state machine.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ante::{self, GasConfig, Msg, Tx};
use crate::distribution::{Allocation, Distribution};
use crate::error::{Error, Result};
use crate::fraction::Fraction;
use crate::governance::{Governance, TallyEvent, TransferParams};
use crate::ledger::{Address, Ledger, FEE_COLLECTOR};
use crate::staking::{SoftwareVersion, Staking};
use crate::treasury::{EpochOutcome, Treasury};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainState {
    pub chain_id: String,
    /// Last committed height.
    pub height: u64,
    pub genesis_height: u64,
    pub genesis_time: u64,
    pub ledger: Ledger,
    pub staking: Staking,
    pub treasury: Treasury,
    pub distribution: Distribution,
    pub governance: Governance,
    pub transfer: TransferParams,
    pub gas: GasConfig,
    /// Proposer and precommit fraction of the last committed block; its fees
    /// are allocated at the start of the next one.
    pub last_proposer: Option<Address>,
    pub last_precommit: Fraction,
}

/// How a transaction fared in a block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", content = "error", rename_all = "lowercase")]
pub enum TxStatus {
    /// Admitted and every message executed.
    Ok,
    /// Admitted (fee charged) but a message failed; messages reverted.
    Failed(String),
    /// Not admitted; no state change.
    Rejected(String),
}

impl TxStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, TxStatus::Ok)
    }
}

/// Everything a block did besides the state change itself.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BlockEffects {
    pub fee_allocation: Allocation,
    pub epoch: Option<EpochOutcome>,
    pub matured_unbondings: usize,
    pub param_failures: Vec<(u64, String)>,
    pub txs: Vec<TxStatus>,
    pub tallies: Vec<TallyEvent>,
    pub burned_tax: crate::coins::Coins,
}

impl BlockEffects {
    /// Whether the block changed anything beyond height bookkeeping.
    pub fn is_dirty(&self) -> bool {
        !self.fee_allocation.total().map(|c| c.is_zero()).unwrap_or(false)
            || self.epoch.is_some()
            || self.matured_unbondings > 0
            || !self.param_failures.is_empty()
            || !self.txs.is_empty()
            || !self.tallies.is_empty()
    }
}

impl ChainState {
    /// SHA-256 over a canonical encoding: sorted maps, fixed-width
    /// big-endian integers.
    pub fn state_hash(&self) -> [u8; 32] {
        use bincode::Options;
        let bytes = bincode::DefaultOptions::new()
            .with_big_endian()
            .with_fixint_encoding()
            .serialize(self)
            .expect("state is always encodable");
        Sha256::digest(bytes).into()
    }

    pub fn state_hash_hex(&self) -> String {
        hex::encode(self.state_hash())
    }

    pub fn check_invariants(&self) -> Result<()> {
        let v = |detail: String| Error::InvariantViolation {
            height: self.height,
            detail,
        };
        self.ledger.check_invariants().map_err(v)?;
        self.staking.check_invariants(&self.ledger).map_err(v)?;
        self.distribution.check_invariants(&self.ledger).map_err(v)?;
        Ok(())
    }

    /// Executes one message under the staking rules of `rules`.
    pub fn execute_msg(&mut self, msg: &Msg, height: u64, rules: SoftwareVersion) -> Result<()> {
        match msg {
            Msg::Send { from, to, amount } => self.ledger.transfer(from, to, amount),
            Msg::MultiSend { inputs, outputs } => {
                let i: Vec<_> = inputs.iter().map(|e| (e.address.as_str(), &e.coins)).collect();
                let o: Vec<_> = outputs.iter().map(|e| (e.address.as_str(), &e.coins)).collect();
                self.ledger.multi_send(&i, &o)
            }
            Msg::SwapSend { from, to, offer, .. } => {
                self.ledger.transfer(from, to, &offer.clone().into())
            }
            Msg::InstantiateContract { sender, contract, funds }
            | Msg::ExecuteContract { sender, contract, funds } => {
                self.ledger.transfer(sender, contract, funds)
            }
            Msg::Exec { msgs, .. } => {
                for m in msgs {
                    self.execute_msg(m, height, rules)?;
                }
                Ok(())
            }
            Msg::Delegate { delegator, validator, amount } => {
                self.staking
                    .delegate(&mut self.ledger, delegator, validator, amount, height, rules)
            }
            Msg::Undelegate { delegator, validator, amount } => self
                .staking
                .undelegate(&mut self.ledger, delegator, validator, amount, height)
                .map(|_| ()),
            Msg::CreateValidator { operator, version } => {
                self.staking.create_validator(operator, *version, height, rules)
            }
            Msg::Vote { voter, proposal_id, option } => {
                self.governance.vote(voter, *proposal_id, *option, height)
            }
            Msg::SubmitProposal { content, .. } => {
                self.governance.submit_proposal(content, height).map(|_| ())
            }
        }
    }

    /// Runs admission and then the messages. Messages execute atomically:
    /// if one fails, all are reverted but the fee stays charged.
    pub fn deliver_tx(&mut self, tx: &Tx, height: u64, rules: SoftwareVersion) -> TxStatus {
        let params = self.treasury.tax_params();
        if let Err(e) = ante::run_ante_pipeline(
            &mut self.ledger,
            &mut self.treasury,
            tx,
            height,
            &params,
            &self.gas,
            false,
        ) {
            return TxStatus::Rejected(e.to_string());
        }
        let before = (self.ledger.clone(), self.staking.clone(), self.governance.clone());
        for m in &tx.msgs {
            if let Err(e) = self.execute_msg(m, height, rules) {
                (self.ledger, self.staking, self.governance) = before;
                return TxStatus::Failed(e.to_string());
            }
        }
        TxStatus::Ok
    }

    /// Start-of-block work: scheduled parameter updates, allocation of the
    /// previous block's fees, the epoch step and unbonding maturity.
    pub fn begin_block(&mut self, height: u64, effects: &mut BlockEffects) -> Result<()> {
        effects.param_failures = self
            .governance
            .flush_pending(&mut self.staking, &mut self.distribution, &mut self.transfer)
            .into_iter()
            .map(|(id, e)| (id, e.to_string()))
            .collect();

        let fees = self.ledger.module_balance(FEE_COLLECTOR)?.clone();
        if !fees.is_zero() {
            let proposer = self
                .last_proposer
                .as_deref()
                .filter(|p| self.staking.validator_power(p) > 0);
            effects.fee_allocation = self.distribution.allocate(
                &mut self.ledger,
                &self.staking,
                FEE_COLLECTOR,
                &fees,
                proposer,
                self.last_precommit,
            )?;
        }

        if self.treasury.is_epoch_boundary(height) {
            effects.epoch = Some(self.treasury.epoch_transition(
                &mut self.ledger,
                &mut self.distribution,
                &self.staking,
                height,
            )?);
        }

        effects.matured_unbondings = self.staking.mature_unbondings(&mut self.ledger, height)?.len();
        Ok(())
    }

    pub fn end_block(&mut self, height: u64, effects: &mut BlockEffects) {
        effects.tallies = self.governance.end_block(
            height,
            &self.staking,
            &mut self.treasury,
            &self.distribution,
            &mut self.ledger,
        );
    }

    /// Executes block `height` with `txs` under `rules`. Leaves
    /// `last_proposer`/`last_precommit` for the caller to set once consensus
    /// is decided.
    pub fn execute_block(&mut self, height: u64, txs: &[Tx], rules: SoftwareVersion) -> Result<BlockEffects> {
        let mut effects = BlockEffects::default();
        self.begin_block(height, &mut effects)?;
        let burned_before = self.treasury.epoch_burned().clone();
        for tx in txs {
            let status = self.deliver_tx(tx, height, rules);
            effects.txs.push(status);
        }
        effects.burned_tax = self.treasury.epoch_burned().saturating_sub(&burned_before);
        self.end_block(height, &mut effects);
        self.height = height;
        Ok(effects)
    }

    /// Deterministic power-weighted proposer for `height`: a Weyl sequence
    /// position over the cumulative powers of active validators, ordered by
    /// operator address.
    pub fn proposer_for(&self, height: u64) -> Option<Address> {
        let powers = self.staking.active_powers();
        let total: u128 = powers.iter().map(|(_, p)| p).sum();
        if total == 0 {
            return None;
        }
        let mut x = (height.wrapping_mul(0x9E37_79B9_7F4A_7C15) as u128) % total;
        for (v, p) in powers {
            if x < p {
                return Some(v.clone());
            }
            x -= p;
        }
        None
    }
}

/// Whether `version` would accept `msg` at `height` on top of `state`.
pub fn version_behavior(version: SoftwareVersion, msg: &Msg, height: u64, state: &ChainState) -> bool {
    state.clone().execute_msg(msg, height, version).is_ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coins::{Coin, Coins, ULUNA};
    use crate::config::GenesisConfig;
    use crate::ledger::BURN_MODULE;
    use crate::staking::SoftwareVersion::{V20, V21};

    fn state(gates: &str, genesis_height: u64, extra: &str) -> ChainState {
        let text = format!(
            r#"
[chain]
genesis_height = {genesis_height}

[[accounts]]
address = "alice"
coins = "1000000000000uluna"

[staking]
gates = "{gates}"

[[staking.validators]]
operator = "val0"
tokens = "5000000000"
version = "v21"

[[staking.validators]]
operator = "val1"
tokens = "30000000000"
version = "v21"

{extra}
"#
        );
        GenesisConfig::from_toml(&text).unwrap().build().unwrap()
    }

    fn delegate(amount: u128) -> Msg {
        Msg::Delegate {
            delegator: "alice".into(),
            validator: "val0".into(),
            amount: Coin::new(amount, ULUNA),
        }
    }

    fn send(amount: u128) -> Msg {
        Msg::Send {
            from: "alice".into(),
            to: "bob".into(),
            amount: Coins::single(amount, ULUNA),
        }
    }

    fn tx(msgs: Vec<Msg>, fee: u128, gas_limit: u64) -> Tx {
        Tx {
            msgs,
            fee_payer: "alice".into(),
            fee: Coins::single(fee, ULUNA),
            gas_limit,
        }
    }

    #[test]
    fn versions_disagree_only_where_gates_differ() {
        let s = state("testnet", 7_561_000, "");
        let d = delegate(1_000_000);
        // before the gate opens both accept
        assert!(version_behavior(V20, &d, 7_603_700, &s));
        assert!(version_behavior(V21, &d, 7_603_700, &s));
        // inside the window both refuse
        assert!(!version_behavior(V20, &d, 7_650_000, &s));
        assert!(!version_behavior(V21, &d, 7_650_000, &s));
        // after the revert only the new release accepts
        assert!(!version_behavior(V20, &d, 7_684_492, &s));
        assert!(version_behavior(V21, &d, 7_684_490, &s));
        assert!(version_behavior(V21, &d, 7_684_492, &s));
        // sends are unaffected
        assert!(version_behavior(V20, &send(5), 7_684_492, &s));
        let cv = Msg::CreateValidator {
            operator: "new".into(),
            version: V21,
        };
        assert!(!version_behavior(V21, &cv, 7_684_492, &s));
        assert!(version_behavior(V21, &cv, staking_revert(), &s));
    }

    fn staking_revert() -> u64 {
        crate::staking::HeightGates::testnet().staking_power_revert_height
    }

    #[test]
    fn failed_message_keeps_fee_only() {
        let mut s = state("mainnet", 100, "[fees]\ngas_price = \"0.1\"");
        let before = s.ledger.balance("alice").amount_of(ULUNA);
        // second message overdraws, so the send is reverted too
        let t = tx(vec![send(5), send(10_000_000_000_000)], 1_000, 10_000);
        let st = s.deliver_tx(&t, 101, V21);
        assert!(matches!(st, TxStatus::Failed(_)));
        assert_eq!(s.ledger.balance("alice").amount_of(ULUNA), before - 1_000);
        assert_eq!(s.ledger.balance("bob").amount_of(ULUNA), 0);
        assert_eq!(s.ledger.module_balance(FEE_COLLECTOR).unwrap().amount_of(ULUNA), 1_000);
    }

    #[test]
    fn rejected_tx_leaves_state_untouched() {
        let mut s = state("mainnet", 100, "[fees]\ngas_price = \"0.1\"");
        let h = s.state_hash();
        // fee below gas
        let st = s.deliver_tx(&tx(vec![send(5)], 999, 10_000), 101, V21);
        assert!(matches!(st, TxStatus::Rejected(_)));
        assert_eq!(s.state_hash(), h);
        // payer cannot cover the fee
        let mut poor = tx(vec![send(5)], 1_000, 10_000);
        poor.fee_payer = "bob".into();
        assert!(matches!(s.deliver_tx(&poor, 101, V21), TxStatus::Rejected(_)));
        assert_eq!(s.state_hash(), h);
    }

    #[test]
    fn burn_tax_burned_and_counted() {
        let mut s = state("mainnet", 0, "[treasury]\ntax_rate = \"0.012\"\n[fees]\ngas_price = \"0\"");
        let supply = s.ledger.total_supply(ULUNA);
        let e = s.execute_block(1, &[tx(vec![send(1_000_000)], 12_000, 0)], V21).unwrap();
        assert_eq!(e.txs, vec![TxStatus::Ok]);
        assert_eq!(e.burned_tax.amount_of(ULUNA), 12_000);
        assert_eq!(s.ledger.supply().burned(ULUNA), 12_000);
        assert_eq!(s.ledger.total_supply(ULUNA), supply - 12_000);
        assert_eq!(s.treasury.epoch_burned().amount_of(ULUNA), 12_000);
        assert!(s.ledger.module_balance(BURN_MODULE).unwrap().is_zero());
        s.check_invariants().unwrap();
        // tax is not covered by the fee
        let e = s.execute_block(2, &[tx(vec![send(1_000_000)], 11_999, 0)], V21).unwrap();
        assert!(matches!(e.txs[0], TxStatus::Rejected(_)));
    }

    #[test]
    fn fees_allocated_in_next_block() {
        let mut s = state("mainnet", 0, "[fees]\ngas_price = \"0\"");
        s.execute_block(1, &[tx(vec![send(1)], 10_000, 0)], V21).unwrap();
        s.last_proposer = Some("val1".into());
        s.last_precommit = Fraction::ONE;
        assert_eq!(s.ledger.module_balance(FEE_COLLECTOR).unwrap().amount_of(ULUNA), 10_000);
        let e = s.execute_block(2, &[], V21).unwrap();
        assert!(e.is_dirty());
        assert_eq!(e.fee_allocation.total().unwrap().amount_of(ULUNA), 10_000);
        assert!(s.ledger.module_balance(FEE_COLLECTOR).unwrap().is_zero());
        s.check_invariants().unwrap();
        assert!(!s.execute_block(3, &[], V21).unwrap().is_dirty());
    }

    #[test]
    fn proposer_is_deterministic_and_power_weighted() {
        let s = state("mainnet", 0, "");
        let mut counts = [0u32; 2];
        for h in 1..=4000 {
            let p = s.proposer_for(h).unwrap();
            assert_eq!(s.proposer_for(h).unwrap(), p);
            counts[if p == "val0" { 0 } else { 1 }] += 1;
        }
        // 1:6 power split
        assert!((480..660).contains(&counts[0]), "{counts:?}");
    }

    #[test]
    fn hash_covers_every_field() {
        let s = state("mainnet", 0, "");
        let mut t = s.clone();
        assert_eq!(t.state_hash(), s.state_hash());
        t.last_precommit = Fraction::new(2, 3);
        assert_ne!(t.state_hash(), s.state_hash());
        let mut u = s.clone();
        u.staking.set_version("val0", V20).unwrap();
        assert_ne!(u.state_hash(), s.state_hash());
        assert_eq!(s.state_hash_hex().len(), 64);
    }
}
