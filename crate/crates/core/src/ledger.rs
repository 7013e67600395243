//! Account and module-account balances with explicit supply tracking.
//!
//! Supply only changes through [`Ledger::mint`] and [`Ledger::burn`] once
//! genesis is sealed. For every denom the ledger maintains
//!
//! ```text
//! total = genesis + minted - burned = sum(accounts) + sum(modules)
//! ```

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::coins::Coins;
use crate::error::{Error, Result};

pub type Address = String;

pub const FEE_COLLECTOR: &str = "FeeCollector";
pub const BURN_MODULE: &str = "BurnModule";
pub const COMMUNITY_POOL: &str = "CommunityPool";
pub const BONDED_POOL: &str = "BondedPool";
pub const NOT_BONDED_POOL: &str = "NotBondedPool";
pub const TREASURY: &str = "Treasury";
/// Holds validator and delegator rewards that have not been withdrawn.
pub const DISTRIBUTION: &str = "Distribution";

pub const MODULE_NAMES: [&str; 7] = [
    FEE_COLLECTOR,
    BURN_MODULE,
    COMMUNITY_POOL,
    BONDED_POOL,
    NOT_BONDED_POOL,
    TREASURY,
    DISTRIBUTION,
];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupplyLedger {
    genesis: BTreeMap<String, u128>,
    totals: BTreeMap<String, u128>,
    burned: BTreeMap<String, u128>,
    minted: BTreeMap<String, u128>,
}

impl SupplyLedger {
    pub fn total(&self, denom: &str) -> u128 {
        self.totals.get(denom).copied().unwrap_or(0)
    }

    pub fn genesis(&self, denom: &str) -> u128 {
        self.genesis.get(denom).copied().unwrap_or(0)
    }

    pub fn burned(&self, denom: &str) -> u128 {
        self.burned.get(denom).copied().unwrap_or(0)
    }

    pub fn minted(&self, denom: &str) -> u128 {
        self.minted.get(denom).copied().unwrap_or(0)
    }

    pub fn denoms(&self) -> BTreeSet<String> {
        self.totals
            .keys()
            .chain(self.burned.keys())
            .chain(self.minted.keys())
            .cloned()
            .collect()
    }
}

fn bump(map: &mut BTreeMap<String, u128>, denom: &str, by: u128) -> Result<()> {
    let slot = map.entry(denom.to_string()).or_insert(0);
    *slot = slot
        .checked_add(by)
        .ok_or_else(|| Error::AmountOverflow(denom.to_string()))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ledger {
    accounts: BTreeMap<Address, Coins>,
    modules: BTreeMap<String, Coins>,
    supply: SupplyLedger,
    sealed: bool,
}

impl Default for Ledger {
    fn default() -> Self {
        Ledger::new(MODULE_NAMES)
    }
}

impl Ledger {
    /// Creates a ledger with the given module accounts registered.
    pub fn new<I, S>(modules: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Ledger {
            accounts: BTreeMap::new(),
            modules: modules.into_iter().map(|m| (m.into(), Coins::new())).collect(),
            supply: SupplyLedger::default(),
            sealed: false,
        }
    }

    /// Credits genesis funds to an account. Only valid before [`Ledger::seal`].
    pub fn genesis_account(&mut self, address: &str, coins: &Coins) -> Result<()> {
        self.ensure_unsealed()?;
        self.credit_account(address, coins)?;
        self.genesis_supply(coins)
    }

    pub fn genesis_module(&mut self, module: &str, coins: &Coins) -> Result<()> {
        self.ensure_unsealed()?;
        self.module_mut(module)?.add(coins)?;
        self.genesis_supply(coins)
    }

    /// Ends genesis; supply changes afterwards only via mint and burn.
    pub fn seal(&mut self) {
        self.sealed = true;
    }

    fn ensure_unsealed(&self) -> Result<()> {
        if self.sealed {
            return Err(Error::InvalidParams("genesis already sealed".into()));
        }
        Ok(())
    }

    fn genesis_supply(&mut self, coins: &Coins) -> Result<()> {
        for (d, a) in coins.iter() {
            bump(&mut self.supply.genesis, d, a)?;
            bump(&mut self.supply.totals, d, a)?;
        }
        Ok(())
    }

    pub fn balance(&self, address: &str) -> Coins {
        self.accounts.get(address).cloned().unwrap_or_default()
    }

    pub fn module_balance(&self, module: &str) -> Result<&Coins> {
        self.modules
            .get(module)
            .ok_or_else(|| Error::UnknownModule(module.to_string()))
    }

    pub fn has_module(&self, module: &str) -> bool {
        self.modules.contains_key(module)
    }

    pub fn accounts(&self) -> impl Iterator<Item = (&Address, &Coins)> {
        self.accounts.iter()
    }

    pub fn modules(&self) -> impl Iterator<Item = (&String, &Coins)> {
        self.modules.iter()
    }

    pub fn supply(&self) -> &SupplyLedger {
        &self.supply
    }

    pub fn total_supply(&self, denom: &str) -> u128 {
        self.supply.total(denom)
    }

    fn module_mut(&mut self, module: &str) -> Result<&mut Coins> {
        self.modules
            .get_mut(module)
            .ok_or_else(|| Error::UnknownModule(module.to_string()))
    }

    fn credit_account(&mut self, address: &str, coins: &Coins) -> Result<()> {
        if coins.is_zero() {
            return Ok(());
        }
        let bal = self.accounts.entry(address.to_string()).or_default();
        bal.add(coins)
    }

    fn debit_account(&mut self, address: &str, coins: &Coins) -> Result<()> {
        if coins.is_zero() {
            return Ok(());
        }
        match self.accounts.get_mut(address) {
            Some(bal) => {
                bal.sub(coins, address)?;
                if bal.is_zero() {
                    self.accounts.remove(address);
                }
                Ok(())
            }
            None => {
                let (denom, needed, _) = Coins::new().shortfall(coins).expect("non-zero coins");
                Err(Error::InsufficientFunds {
                    holder: address.to_string(),
                    denom,
                    needed,
                    available: 0,
                })
            }
        }
    }

    /// Checks that a credit of `coins` cannot overflow the recipient.
    fn check_credit(current: &Coins, coins: &Coins) -> Result<()> {
        current.checked_add(coins).map(|_| ())
    }

    pub fn transfer(&mut self, from: &str, to: &str, coins: &Coins) -> Result<()> {
        if coins.is_zero() {
            return Ok(());
        }
        if from != to {
            Self::check_credit(&self.balance(to), coins)?;
        }
        self.debit_account(from, coins)?;
        self.credit_account(to, coins)
    }

    /// Debits every input and credits every output; all or nothing. The
    /// inputs and outputs must carry the same total.
    pub fn multi_send(&mut self, inputs: &[(&str, &Coins)], outputs: &[(&str, &Coins)]) -> Result<()> {
        let mut total_in = Coins::new();
        let mut total_out = Coins::new();
        let mut debits: BTreeMap<&str, Coins> = BTreeMap::new();
        for (a, c) in inputs {
            total_in.add(c)?;
            debits.entry(a).or_default().add(c)?;
        }
        for (_, c) in outputs {
            total_out.add(c)?;
        }
        if total_in != total_out {
            return Err(Error::InvalidTx(format!(
                "multi-send inputs {total_in} differ from outputs {total_out}"
            )));
        }
        for (a, c) in &debits {
            if let Some((denom, needed, available)) = self.balance(a).shortfall(c) {
                return Err(Error::InsufficientFunds {
                    holder: a.to_string(),
                    denom,
                    needed,
                    available,
                });
            }
        }
        for (a, c) in &debits {
            self.debit_account(a, c)?;
        }
        for (a, c) in outputs {
            // balances are bounded by total supply, so this cannot overflow
            self.credit_account(a, c)?;
        }
        Ok(())
    }

    pub fn send_account_to_module(&mut self, from: &str, module: &str, coins: &Coins) -> Result<()> {
        Self::check_credit(self.module_balance(module)?, coins)?;
        self.debit_account(from, coins)?;
        self.module_mut(module)?.add(coins)
    }

    pub fn send_module_to_account(&mut self, module: &str, to: &str, coins: &Coins) -> Result<()> {
        Self::check_credit(&self.balance(to), coins)?;
        self.module_mut(module)?.sub(coins, module)?;
        self.credit_account(to, coins)
    }

    pub fn send_module_to_module(&mut self, from: &str, to: &str, coins: &Coins) -> Result<()> {
        let to_bal = self.module_balance(to)?;
        Self::check_credit(to_bal, coins)?;
        self.module_mut(from)?.sub(coins, from)?;
        self.module_mut(to)?.add(coins)
    }

    /// Destroys coins held by `module`, reducing total supply.
    pub fn burn(&mut self, module: &str, coins: &Coins) -> Result<()> {
        self.module_mut(module)?.sub(coins, module)?;
        for (d, a) in coins.iter() {
            let total = self.supply.totals.entry(d.to_string()).or_insert(0);
            *total -= a;
            bump(&mut self.supply.burned, d, a)?;
        }
        Ok(())
    }

    /// Creates coins in `module`, increasing total supply.
    pub fn mint(&mut self, module: &str, coins: &Coins) -> Result<()> {
        let current = self.module_balance(module)?;
        Self::check_credit(current, coins)?;
        for (d, a) in coins.iter() {
            if self.supply.total(d).checked_add(a).is_none() {
                return Err(Error::AmountOverflow(d.to_string()));
            }
        }
        self.module_mut(module)?.add(coins)?;
        for (d, a) in coins.iter() {
            bump(&mut self.supply.totals, d, a)?;
            bump(&mut self.supply.minted, d, a)?;
        }
        Ok(())
    }

    /// Full-scan check of both supply identities.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let mut sums: BTreeMap<&str, u128> = BTreeMap::new();
        for coins in self.accounts.values().chain(self.modules.values()) {
            for (d, a) in coins.iter() {
                *sums.entry(d).or_insert(0) += a;
            }
        }
        for denom in self.supply.denoms() {
            let total = self.supply.total(&denom);
            let held = sums.get(denom.as_str()).copied().unwrap_or(0);
            if total != held {
                return Err(format!("{denom}: supply {total} but balances sum to {held}"));
            }
            let expected = (self.supply.genesis(&denom) + self.supply.minted(&denom))
                .checked_sub(self.supply.burned(&denom));
            if expected != Some(total) {
                return Err(format!(
                    "{denom}: supply {total} but genesis+minted-burned is {expected:?}"
                ));
            }
        }
        for (d, held) in sums {
            if !self.supply.totals.contains_key(d) {
                return Err(format!("{d}: balances hold {held} of an untracked denom"));
            }
        }
        Ok(())
    }
}
