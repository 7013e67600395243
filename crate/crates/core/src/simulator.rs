//! Block production over scenario events with software-version consensus.
//!
//! Every block with transactions is executed once per software version run
//! by the active set. Versions whose results hash identically form a class;
//! the block commits with the largest class if it holds at least 2/3 of the
//! voting power, otherwise the chain halts at that height. A halted height
//! is retried every slot with the same transactions until upgrades produce a
//! 2/3 class, or for good in strict mode.

use std::collections::BTreeMap;

use crate::ante::Tx;
use crate::coins::Coins;
use crate::error::Result;
use crate::fraction::Fraction;
use crate::governance::TallyEvent;
use crate::ledger::COMMUNITY_POOL;
use crate::scenario::{Action, Scenario};
use crate::staking::SoftwareVersion;
use crate::state::{BlockEffects, ChainState, TxStatus};
use crate::treasury::EpochOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConsensusStatus {
    Committed,
    Halted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsensusOutcome {
    pub status: ConsensusStatus,
    pub height: u64,
    /// Power share of the largest agreeing version class.
    pub compatible_fraction: Fraction,
}

impl ConsensusOutcome {
    pub fn committed(&self) -> bool {
        self.status == ConsensusStatus::Committed
    }
}

fn two_thirds() -> Fraction {
    Fraction::new(2, 3)
}

/// Produces block `height = state.height + 1`. On commit `state` advances;
/// on halt it is left untouched.
pub fn produce_block(
    state: &mut ChainState,
    txs: &[Tx],
    precommit_override: Option<Fraction>,
) -> Result<(ConsensusOutcome, BlockEffects)> {
    let height = state.height + 1;
    let proposer = state.proposer_for(height);
    let mut by_version: BTreeMap<SoftwareVersion, u128> = BTreeMap::new();
    for (op, p) in state.staking.active_powers() {
        let v = state.staking.validator(op).expect("active validator").version;
        *by_version.entry(v).or_insert(0) += p;
    }
    let total: u128 = by_version.values().sum();

    let (effects, compatible) = if by_version.len() <= 1 || txs.is_empty() {
        let rules = by_version.keys().next().copied().unwrap_or(SoftwareVersion::V21);
        (state.execute_block(height, txs, rules)?, Fraction::ONE)
    } else {
        // hash -> (power, state, effects)
        let mut classes: BTreeMap<[u8; 32], (u128, ChainState, BlockEffects)> = BTreeMap::new();
        for (version, power) in &by_version {
            let mut s = state.clone();
            let e = s.execute_block(height, txs, *version)?;
            classes
                .entry(s.state_hash())
                .and_modify(|c| c.0 += power)
                .or_insert((*power, s, e));
        }
        let (best_power, best_state, best_effects) = classes
            .into_values()
            .max_by_key(|c| c.0)
            .expect("at least one version");
        let fraction = Fraction::new(best_power, total);
        if fraction < two_thirds() {
            return Ok((
                ConsensusOutcome {
                    status: ConsensusStatus::Halted,
                    height,
                    compatible_fraction: fraction,
                },
                BlockEffects::default(),
            ));
        }
        *state = best_state;
        (best_effects, fraction)
    };
    state.last_proposer = proposer;
    state.last_precommit = precommit_override
        .unwrap_or(compatible)
        .clamp_to(two_thirds(), Fraction::ONE);
    Ok((
        ConsensusOutcome {
            status: ConsensusStatus::Committed,
            height,
            compatible_fraction: compatible,
        },
        effects,
    ))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimOptions {
    /// Treat a halt as terminal.
    pub strict_halt: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HaltRecord {
    pub height: u64,
    pub slot: u64,
    pub compatible_fraction: Fraction,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Recovery {
    pub height: u64,
    pub slot: u64,
    pub halted_slots: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxRecord {
    pub slot: u64,
    pub height: u64,
    pub index: usize,
    pub status: TxStatus,
}

/// One row per slot: supply, cumulative burn and community pool per denom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockRow {
    pub slot: u64,
    pub height: u64,
    pub halted: bool,
    /// (supply, burned, community pool), in `SimReport::denoms` order
    pub per_denom: Vec<(u128, u128, u128)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimReport {
    pub scenario: String,
    pub genesis_height: u64,
    pub final_height: u64,
    pub final_hash: String,
    pub halted_at_end: bool,
    pub halts: Vec<HaltRecord>,
    pub recoveries: Vec<Recovery>,
    pub rollbacks: Vec<(u64, u64)>,
    pub tallies: Vec<TallyEvent>,
    pub epochs: Vec<EpochOutcome>,
    pub txs: Vec<TxRecord>,
    /// (height, state hash) after every block that changed state
    pub hash_trajectory: Vec<(u64, String)>,
    pub denoms: Vec<String>,
    pub rows: Vec<BlockRow>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
struct PendingTx {
    tx: Tx,
    include_at: u64,
}

#[derive(Debug, Clone)]
struct Sniper {
    target: u64,
    tx: Tx,
}

#[derive(Debug, Clone)]
struct Halt {
    height: u64,
    since_slot: u64,
    txs: Vec<Tx>,
}

pub struct Simulator {
    state: ChainState,
    scenario: Scenario,
    options: SimOptions,
    mempool: Vec<PendingTx>,
    snipers: Vec<Sniper>,
    snapshots: Option<BTreeMap<u64, ChainState>>,
    halt: Option<Halt>,
    report: SimReport,
}

impl Simulator {
    pub fn new(state: ChainState, scenario: Scenario, options: SimOptions) -> Result<Self> {
        scenario.validate(state.height)?;
        let keep = scenario
            .events
            .iter()
            .any(|e| matches!(e.action, Action::RollbackTo { .. }));
        let snapshots = keep.then(|| BTreeMap::from([(state.height, state.clone())]));
        let report = SimReport {
            scenario: scenario.name.clone(),
            genesis_height: state.height,
            denoms: state.ledger.supply().denoms().into_iter().collect(),
            ..Default::default()
        };
        Ok(Simulator {
            state,
            scenario,
            options,
            mempool: Vec::new(),
            snipers: Vec::new(),
            snapshots,
            halt: None,
            report,
        })
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn run(mut self) -> Result<(ChainState, SimReport)> {
        let events = std::mem::take(&mut self.scenario.events);
        let mut cursor = 0;
        let start = self.state.height + 1;
        for slot in start..=self.scenario.end_height {
            let mut precommit = None;
            let mut control = false;
            while cursor < events.len() && events[cursor].at == slot {
                let action = &events[cursor].action;
                cursor += 1;
                if let Some(tx) = action.as_tx() {
                    self.mempool.push(PendingTx { tx, include_at: slot });
                    continue;
                }
                control = true;
                match action {
                    Action::UpgradeValidator { validator, version } => {
                        if let Err(e) = self.state.staking.set_version(validator, *version) {
                            self.warn(slot, e);
                        }
                    }
                    Action::SniperArm { target, delegator, validator, amount, fee, gas_limit } => {
                        self.snipers.push(Sniper {
                            target: *target,
                            tx: Tx {
                                msgs: vec![crate::ante::Msg::Delegate {
                                    delegator: delegator.clone(),
                                    validator: validator.clone(),
                                    amount: amount.clone(),
                                }],
                                fee_payer: delegator.clone(),
                                fee: fee.clone(),
                                gas_limit: *gas_limit,
                            },
                        });
                    }
                    Action::RollbackTo { height } => self.rollback(slot, *height),
                    Action::PrecommitOverride { fraction } => precommit = Some(*fraction),
                    _ => unreachable!("tx-bearing actions handled above"),
                }
            }
            if control {
                self.snapshot();
            }

            let committed = self.state.height;
            let delay = self.scenario.inclusion_delay;
            self.snipers.retain(|s| {
                if committed >= s.target {
                    self.mempool.push(PendingTx {
                        tx: s.tx.clone(),
                        include_at: committed + delay,
                    });
                    false
                } else {
                    true
                }
            });

            let height = committed + 1;
            let txs: Vec<Tx> = match &self.halt {
                Some(h) => h.txs.clone(),
                None => {
                    let (ready, wait): (Vec<_>, Vec<_>) =
                        std::mem::take(&mut self.mempool).into_iter().partition(|p| p.include_at <= height);
                    self.mempool = wait;
                    ready.into_iter().map(|p| p.tx).collect()
                }
            };

            let (outcome, effects) = produce_block(&mut self.state, &txs, precommit)?;
            if outcome.committed() {
                if let Some(h) = self.halt.take() {
                    debug_assert_eq!(h.height, height);
                    self.report.recoveries.push(Recovery {
                        height,
                        slot,
                        halted_slots: slot - h.since_slot,
                    });
                    log::info!("height {height} recovered at slot {slot}");
                }
                self.record_commit(slot, height, &effects, control || precommit.is_some())?;
            } else {
                if self.halt.is_none() {
                    log::warn!(
                        "chain halted at height {height}: largest agreeing class holds {}",
                        outcome.compatible_fraction
                    );
                    self.report.halts.push(HaltRecord {
                        height,
                        slot,
                        compatible_fraction: outcome.compatible_fraction,
                    });
                    self.halt = Some(Halt {
                        height,
                        since_slot: slot,
                        txs,
                    });
                }
                self.push_row(slot, true);
                if self.options.strict_halt {
                    break;
                }
            }
        }
        self.report.final_height = self.state.height;
        self.report.final_hash = self.state.state_hash_hex();
        self.report.halted_at_end = self.halt.is_some();
        Ok((self.state, self.report))
    }

    fn warn(&mut self, slot: u64, e: impl std::fmt::Display) {
        log::warn!("slot {slot}: {e}");
        self.report.warnings.push(format!("slot {slot}: {e}"));
    }

    fn record_commit(&mut self, slot: u64, height: u64, effects: &BlockEffects, forced: bool) -> Result<()> {
        for (i, status) in effects.txs.iter().enumerate() {
            self.report.txs.push(TxRecord {
                slot,
                height,
                index: i,
                status: status.clone(),
            });
        }
        for (id, e) in &effects.param_failures {
            self.warn(slot, format!("proposal {id} failed to apply: {e}"));
        }
        self.report.tallies.extend(effects.tallies.iter().cloned());
        if let Some(e) = &effects.epoch {
            self.report.epochs.push(e.clone());
        }
        if effects.is_dirty() || forced {
            self.state.check_invariants()?;
            self.report
                .hash_trajectory
                .push((height, self.state.state_hash_hex()));
            self.snapshot();
        }
        self.push_row(slot, false);
        Ok(())
    }

    fn push_row(&mut self, slot: u64, halted: bool) {
        let ledger = &self.state.ledger;
        let pool = ledger.module_balance(COMMUNITY_POOL).cloned().unwrap_or_else(|_| Coins::new());
        let per_denom = self
            .report
            .denoms
            .iter()
            .map(|d| (ledger.total_supply(d), ledger.supply().burned(d), pool.amount_of(d)))
            .collect();
        self.report.rows.push(BlockRow {
            slot,
            height: self.state.height,
            halted,
            per_denom,
        });
    }

    fn snapshot(&mut self) {
        if let Some(snaps) = &mut self.snapshots {
            snaps.insert(self.state.height, self.state.clone());
        }
    }

    /// Restores the state as committed at `height`. Blocks between the
    /// nearest stored snapshot and `height` changed nothing but height
    /// bookkeeping, so they are replayed by adjusting those fields.
    fn rollback(&mut self, slot: u64, height: u64) {
        if height > self.state.height {
            self.warn(slot, format!("rollback to future height {height} ignored"));
            return;
        }
        let Some(snaps) = &mut self.snapshots else {
            return;
        };
        let Some((&at, base)) = snaps.range(..=height).next_back() else {
            self.warn(slot, format!("no snapshot at or below {height}"));
            return;
        };
        let mut s = base.clone();
        if at < height {
            s.height = height;
            s.last_proposer = s.proposer_for(height);
            s.last_precommit = Fraction::ONE;
        }
        snaps.split_off(&(height + 1));
        self.state = s;
        self.halt = None;
        self.report.rollbacks.push((slot, height));
        log::info!("slot {slot}: rolled back to height {height}");
    }
}

/// Runs a scenario from a genesis state.
pub fn run_scenario(state: ChainState, scenario: Scenario, options: SimOptions) -> Result<(ChainState, SimReport)> {
    Simulator::new(state, scenario, options)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ante::Msg;
    use crate::coins::{Coin, ULUNA};
    use crate::config::GenesisConfig;

    /// Gates at 10/50/60 with no capped window; four v21 validators hold
    /// 0.64 of power, the two v20 validators 0.36.
    fn genesis(mixed: bool) -> ChainState {
        let old = if mixed { "v20" } else { "v21" };
        let mut text = String::from(
            r#"
[[accounts]]
address = "sniper"
coins = "5000000000uluna"

[[accounts]]
address = "alice"
coins = "1000000000uluna"

[staking.gates]
staking_power_upgrade_height = 10
delegate_power_revert_height = 50
staking_power_revert_height = 60
protect_power_height = 50
"#,
        );
        for i in 0..4 {
            text += &format!("[[staking.validators]]\noperator = \"val{i}\"\ntokens = \"16000000\"\nversion = \"v21\"\n");
        }
        for i in 4..6 {
            text += &format!("[[staking.validators]]\noperator = \"val{i}\"\ntokens = \"18000000\"\nversion = \"{old}\"\n");
        }
        GenesisConfig::from_toml(&text).unwrap().build().unwrap()
    }

    fn scenario(end: u64, events: &str) -> Scenario {
        Scenario::from_toml(&format!("name = \"t\"\nend_height = {end}\n{events}")).unwrap()
    }

    const SNIPE: &str = r#"
[[events]]
at = 20
type = "sniper-arm"
target = 50
delegator = "sniper"
validator = "val0"
amount = "1000000000uluna"
"#;

    const UPGRADE: &str = r#"
[[events]]
at = 60
type = "upgrade-validator"
validator = "val4"
version = "v21"
"#;

    fn sniper_tx() -> Tx {
        Tx {
            msgs: vec![Msg::Delegate {
                delegator: "sniper".into(),
                validator: "val0".into(),
                amount: Coin::new(1_000_000_000, ULUNA),
            }],
            fee_payer: "sniper".into(),
            fee: Coins::new(),
            gas_limit: 0,
        }
    }

    fn run(state: ChainState, s: Scenario) -> (ChainState, SimReport) {
        run_scenario(state, s, SimOptions::default()).unwrap()
    }

    #[test]
    fn halts_then_recovers_after_upgrade() {
        let (s, r) = run(genesis(true), scenario(70, &format!("{SNIPE}{UPGRADE}")));
        assert_eq!(r.halts.len(), 1);
        assert_eq!(r.halts[0].height, 52);
        assert_eq!(r.halts[0].compatible_fraction, Fraction::new(16, 25));
        assert_eq!(r.recoveries, vec![Recovery { height: 52, slot: 60, halted_slots: 8 }]);
        // no state moves while halted
        for row in r.rows.iter().filter(|r| r.halted) {
            assert_eq!(row.height, 51);
        }
        assert_eq!(r.rows.iter().filter(|r| r.halted).count(), 8);
        assert_eq!(r.rows.len(), 70);
        assert_eq!(s.height, 62);
        assert_eq!(s.staking.delegation("sniper", "val0"), 1_000_000_000);
        assert!(!r.halted_at_end);
    }

    #[test]
    fn halted_height_keeps_state() {
        let mut s = genesis(true);
        s.height = 51;
        let h = s.state_hash();
        let (o, e) = produce_block(&mut s, &[sniper_tx()], None).unwrap();
        assert_eq!(o.status, ConsensusStatus::Halted);
        assert_eq!(e, BlockEffects::default());
        assert_eq!(s.state_hash(), h);
        // a block both versions agree on commits
        let (o, _) = produce_block(&mut s, &[], None).unwrap();
        assert!(o.committed());
    }

    #[test]
    fn recovery_matches_direct_processing() {
        let (recovered, r) = run(genesis(true), scenario(60, &format!("{SNIPE}{UPGRADE}")));
        assert_eq!(recovered.height, 52);
        let (mut direct, _) = run(genesis(true), scenario(51, SNIPE));
        direct.staking.set_version("val4", SoftwareVersion::V21).unwrap();
        let (o, _) = produce_block(&mut direct, &[sniper_tx()], None).unwrap();
        assert!(o.committed());
        assert_eq!(direct.state_hash(), recovered.state_hash());
        assert_eq!(r.final_hash, direct.state_hash_hex());
    }

    #[test]
    fn strict_mode_stops_at_halt() {
        let opts = SimOptions { strict_halt: true };
        let (s, r) = run_scenario(genesis(true), scenario(70, &format!("{SNIPE}{UPGRADE}")), opts).unwrap();
        assert!(r.halted_at_end);
        assert_eq!(s.height, 51);
        assert_eq!(r.rows.last().unwrap().slot, 52);
    }

    #[test]
    fn runs_are_deterministic() {
        let sc = scenario(70, &format!("{SNIPE}{UPGRADE}"));
        let a = run(genesis(true), sc.clone());
        let b = run(genesis(true), sc);
        assert_eq!(a.1, b.1);
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn late_sniper_fires_next_slot() {
        let late = SNIPE.replace("at = 20", "at = 55");
        let (s, r) = run(genesis(false), scenario(70, &late));
        // armed in slot 55 with 54 committed
        assert_eq!(r.txs.len(), 1);
        assert_eq!(r.txs[0].height, 56);
        assert!(r.txs[0].status.is_ok());
        assert_eq!(s.staking.delegation("sniper", "val0"), 1_000_000_000);
    }

    #[test]
    fn snipers_keep_declaration_order() {
        let second = SNIPE.replace("1000000000uluna", "4500000000uluna");
        let (_, r) = run(genesis(false), scenario(60, &format!("{SNIPE}{second}")));
        assert_eq!(r.txs.len(), 2);
        assert!(r.txs.iter().all(|t| t.height == 52));
        assert_eq!((r.txs[0].index, r.txs[1].index), (0, 1));
        assert!(r.txs[0].status.is_ok());
        // the second overdraws once the first has bonded
        assert!(matches!(r.txs[1].status, TxStatus::Failed(_)));
    }

    #[test]
    fn rollback_restores_committed_state() {
        let send = |at: u64| {
            format!(
                "[[events]]\nat = {at}\ntype = \"submit-tx\"\ntx = {{ fee_payer = \"alice\", msgs = [ {{ type = \"send\", from = \"alice\", to = \"bob\", amount = \"7uluna\" }} ] }}\n"
            )
        };
        let rb = "[[events]]\nat = 12\ntype = \"rollback-to\"\nheight = 7\n";
        let (s, r) = run(genesis(false), scenario(12, &format!("{}{}{rb}", send(5), send(10))));
        assert_eq!(r.rollbacks, vec![(12, 7)]);
        assert_eq!(s.height, 8);
        assert_eq!(s.ledger.balance("bob").amount_of(ULUNA), 7);
        let (direct, _) = run(genesis(false), scenario(8, &send(5)));
        assert_eq!(s.state_hash(), direct.state_hash());

        let future = "[[events]]\nat = 5\ntype = \"rollback-to\"\nheight = 9\n";
        let (_, r) = run(genesis(false), scenario(6, future));
        assert!(r.rollbacks.is_empty());
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn precommit_override_is_stored() {
        let ev = "[[events]]\nat = 3\ntype = \"precommit-override\"\nfraction = \"0.7\"\n";
        let (s, r) = run(genesis(false), scenario(3, ev));
        assert_eq!(s.last_precommit, Fraction::new(7, 10));
        assert_eq!(r.hash_trajectory.last().unwrap().0, 3);
    }
}
