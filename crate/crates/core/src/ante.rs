//! Transaction admission: validation, fee deduction and the burn-tax
//! decorator.
//!
//! Decorators run in order `validate -> deduct fee -> burn tax`. The burn-tax
//! step recomputes the taxes from the messages (the fee check already did so
//! once) and aborts admission if the two computations disagree. A rejected
//! transaction leaves the ledger and treasury untouched.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::coins::{Coin, Coins, ULUNA};
use crate::error::{Error, Result};
use crate::fraction::Fraction;
use crate::governance::{ProposalContent, VoteOption};
use crate::ledger::{Address, Ledger, BURN_MODULE, FEE_COLLECTOR};
use crate::staking::SoftwareVersion;
use crate::treasury::Treasury;

/// Maximum nesting of `Exec` messages accepted by validation.
pub const MAX_EXEC_DEPTH: usize = 8;

/// Default tax cap, large enough to never bind.
pub const DEFAULT_TAX_CAP: u128 = 1 << 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultiSendEntry {
    pub address: Address,
    pub coins: Coins,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Msg {
    Send {
        from: Address,
        to: Address,
        amount: Coins,
    },
    MultiSend {
        inputs: Vec<MultiSendEntry>,
        outputs: Vec<MultiSendEntry>,
    },
    /// Market swaps are disabled; the offered coin is delivered unchanged.
    SwapSend {
        from: Address,
        to: Address,
        offer: Coin,
        ask_denom: String,
    },
    InstantiateContract {
        sender: Address,
        contract: Address,
        #[serde(default)]
        funds: Coins,
    },
    ExecuteContract {
        sender: Address,
        contract: Address,
        #[serde(default)]
        funds: Coins,
    },
    Exec {
        grantee: Address,
        msgs: Vec<Msg>,
    },
    Delegate {
        delegator: Address,
        validator: Address,
        amount: Coin,
    },
    Undelegate {
        delegator: Address,
        validator: Address,
        amount: Coin,
    },
    CreateValidator {
        operator: Address,
        #[serde(default = "default_version")]
        version: SoftwareVersion,
    },
    Vote {
        voter: Address,
        proposal_id: u64,
        option: VoteOption,
    },
    SubmitProposal {
        proposer: Address,
        content: ProposalContent,
    },
}

fn default_version() -> SoftwareVersion {
    SoftwareVersion::V21
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MsgKind {
    Send,
    MultiSend,
    SwapSend,
    InstantiateContract,
    ExecuteContract,
    Exec,
    Delegate,
    Undelegate,
    CreateValidator,
    Vote,
    SubmitProposal,
}

impl MsgKind {
    pub const ALL: [MsgKind; 11] = [
        MsgKind::Send,
        MsgKind::MultiSend,
        MsgKind::SwapSend,
        MsgKind::InstantiateContract,
        MsgKind::ExecuteContract,
        MsgKind::Exec,
        MsgKind::Delegate,
        MsgKind::Undelegate,
        MsgKind::CreateValidator,
        MsgKind::Vote,
        MsgKind::SubmitProposal,
    ];

    /// Staking and governance messages never carry tax.
    pub fn is_tax_exempt(self) -> bool {
        matches!(
            self,
            MsgKind::Delegate
                | MsgKind::Undelegate
                | MsgKind::CreateValidator
                | MsgKind::Vote
                | MsgKind::SubmitProposal
        )
    }
}

impl Msg {
    pub fn kind(&self) -> MsgKind {
        match self {
            Msg::Send { .. } => MsgKind::Send,
            Msg::MultiSend { .. } => MsgKind::MultiSend,
            Msg::SwapSend { .. } => MsgKind::SwapSend,
            Msg::InstantiateContract { .. } => MsgKind::InstantiateContract,
            Msg::ExecuteContract { .. } => MsgKind::ExecuteContract,
            Msg::Exec { .. } => MsgKind::Exec,
            Msg::Delegate { .. } => MsgKind::Delegate,
            Msg::Undelegate { .. } => MsgKind::Undelegate,
            Msg::CreateValidator { .. } => MsgKind::CreateValidator,
            Msg::Vote { .. } => MsgKind::Vote,
            Msg::SubmitProposal { .. } => MsgKind::SubmitProposal,
        }
    }

    fn depth(&self) -> usize {
        match self {
            Msg::Exec { msgs, .. } => 1 + msgs.iter().map(Msg::depth).max().unwrap_or(0),
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tx {
    pub msgs: Vec<Msg>,
    pub fee_payer: Address,
    #[serde(default)]
    pub fee: Coins,
    #[serde(default)]
    pub gas_limit: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxParams {
    pub tax_rate: Fraction,
    pub tax_caps: BTreeMap<String, u128>,
    pub default_cap: u128,
    pub exempt_denoms: BTreeSet<String>,
    pub tax_power_upgrade_height: u64,
}

impl Default for TaxParams {
    fn default() -> Self {
        TaxParams {
            tax_rate: Fraction::ZERO,
            tax_caps: BTreeMap::new(),
            default_cap: DEFAULT_TAX_CAP,
            exempt_denoms: BTreeSet::new(),
            tax_power_upgrade_height: 0,
        }
    }
}

impl TaxParams {
    pub fn with_rate(rate: Fraction) -> Self {
        TaxParams {
            tax_rate: rate,
            ..Default::default()
        }
    }

    pub fn cap_for(&self, denom: &str) -> u128 {
        self.tax_caps.get(denom).copied().unwrap_or(self.default_cap)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.tax_rate.is_at_most_one() {
            return Err(Error::InvalidParams(format!("tax rate {} above 1", self.tax_rate)));
        }
        Ok(())
    }

    /// Whether the tax code is live at `height`.
    pub fn active_at(&self, height: u64) -> bool {
        height >= self.tax_power_upgrade_height
    }
}

/// Gas pricing used by the fee check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GasConfig {
    pub fee_denom: String,
    pub gas_price: Fraction,
}

impl Default for GasConfig {
    fn default() -> Self {
        GasConfig {
            fee_denom: ULUNA.to_string(),
            gas_price: Fraction::new(28_325, 100_000),
        }
    }
}

impl GasConfig {
    /// `ceil(gas_price * gas_limit)` in the fee denom.
    pub fn gas_fee(&self, gas_limit: u64) -> Coins {
        let p = self.gas_price;
        let n = p.numer() * gas_limit as u128;
        let fee = n.div_ceil(p.denom());
        Coins::single(fee, &self.fee_denom)
    }
}

/// Per denom: zero if exempt, else `min(floor(rate * amount), cap)`.
pub fn compute_tax(principal: &Coins, params: &TaxParams) -> Coins {
    principal.map_amounts(|denom, amount| {
        if params.exempt_denoms.contains(denom) {
            return 0;
        }
        params.tax_rate.mul_floor(amount).min(params.cap_for(denom))
    })
}

fn accumulate_tax(msg: &Msg, params: &TaxParams, out: &mut Coins) -> Result<()> {
    match msg {
        Msg::Send { amount, .. } => out.add(&compute_tax(amount, params)),
        Msg::MultiSend { outputs, .. } => {
            for o in outputs {
                out.add(&compute_tax(&o.coins, params))?;
            }
            Ok(())
        }
        Msg::SwapSend { offer, .. } => out.add(&compute_tax(&offer.clone().into(), params)),
        Msg::InstantiateContract { funds, .. } | Msg::ExecuteContract { funds, .. } => {
            out.add(&compute_tax(funds, params))
        }
        Msg::Exec { msgs, .. } => {
            for m in msgs {
                accumulate_tax(m, params, out)?;
            }
            Ok(())
        }
        Msg::Delegate { .. }
        | Msg::Undelegate { .. }
        | Msg::CreateValidator { .. }
        | Msg::Vote { .. }
        | Msg::SubmitProposal { .. } => Ok(()),
    }
}

/// Total tax owed by the tax-eligible messages.
pub fn filter_msgs_and_compute_tax(msgs: &[Msg], params: &TaxParams) -> Coins {
    let mut taxes = Coins::new();
    for m in msgs {
        // overflow would need more than 2^128 micro-units of tax
        accumulate_tax(m, params, &mut taxes).expect("tax sum overflow");
    }
    taxes
}

fn validate_msgs(msgs: &[Msg]) -> Result<()> {
    if msgs.is_empty() {
        return Err(Error::InvalidTx("no messages".into()));
    }
    for m in msgs {
        if m.depth() > MAX_EXEC_DEPTH {
            return Err(Error::InvalidTx(format!("exec nesting above {MAX_EXEC_DEPTH}")));
        }
        match m {
            Msg::Exec { msgs, .. } => validate_msgs(msgs)?,
            Msg::MultiSend { inputs, outputs } => {
                let mut i = Coins::new();
                let mut o = Coins::new();
                for e in inputs {
                    i.add(&e.coins)?;
                }
                for e in outputs {
                    o.add(&e.coins)?;
                }
                if inputs.is_empty() || outputs.is_empty() || i != o {
                    return Err(Error::InvalidTx("multi-send inputs and outputs differ".into()));
                }
            }
            _ => {}
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnteOutcome {
    pub fee_paid: Coins,
    pub tax: Coins,
    pub burned: Coins,
}

/// Moves the recomputed taxes from the fee collector to the burn module and
/// burns them. Inert before the tax upgrade height or when simulating.
pub fn burn_tax_decorator(
    ledger: &mut Ledger,
    treasury: &mut Treasury,
    tx: &Tx,
    height: u64,
    params: &TaxParams,
    simulate: bool,
) -> Result<Coins> {
    if simulate || !params.active_at(height) {
        return Ok(Coins::new());
    }
    // computed again; the fee check already did this once
    let taxes = filter_msgs_and_compute_tax(&tx.msgs, params);
    if !taxes.is_zero() {
        ledger
            .send_module_to_module(FEE_COLLECTOR, BURN_MODULE, &taxes)
            .map_err(|e| match e {
                Error::InsufficientFunds { .. } => e,
                other => Error::InvalidTx(other.to_string()),
            })?;
        ledger.burn(BURN_MODULE, &taxes)?;
        treasury.record_epoch_burn(&taxes)?;
    }
    Ok(taxes)
}

pub fn run_ante_pipeline(
    ledger: &mut Ledger,
    treasury: &mut Treasury,
    tx: &Tx,
    height: u64,
    params: &TaxParams,
    gas: &GasConfig,
    simulate: bool,
) -> Result<AnteOutcome> {
    let saved = (ledger.clone(), treasury.clone());
    let result = admit(ledger, treasury, tx, height, params, gas, simulate);
    if result.is_err() {
        (*ledger, *treasury) = saved;
    }
    result
}

fn admit(
    ledger: &mut Ledger,
    treasury: &mut Treasury,
    tx: &Tx,
    height: u64,
    params: &TaxParams,
    gas: &GasConfig,
    simulate: bool,
) -> Result<AnteOutcome> {
    validate_msgs(&tx.msgs)?;

    let tax = if simulate || !params.active_at(height) {
        Coins::new()
    } else {
        filter_msgs_and_compute_tax(&tx.msgs, params)
    };
    let required = gas.gas_fee(tx.gas_limit).checked_add(&tax)?;
    if let Some((denom, needed, available)) = tx.fee.shortfall(&required) {
        return Err(Error::InsufficientFunds {
            holder: "declared fee".into(),
            denom,
            needed,
            available,
        });
    }

    ledger.send_account_to_module(&tx.fee_payer, FEE_COLLECTOR, &tx.fee)?;

    let burned = burn_tax_decorator(ledger, treasury, tx, height, params, simulate)?;
    if burned != tax {
        return Err(Error::TaxMismatch {
            first: tax.to_string(),
            second: burned.to_string(),
        });
    }
    Ok(AnteOutcome {
        fee_paid: tx.fee.clone(),
        tax,
        burned,
    })
}
