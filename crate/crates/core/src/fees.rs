//! Client-side fee estimation: `new_fee = min(tax_rate * amount, tax_cap) + gas`.

use serde::{Deserialize, Serialize};

use crate::ante::TaxParams;
use crate::coins::Coin;
use crate::error::{Error, Result};
use crate::fraction::Fraction;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeeEstimate {
    #[serde(with = "crate::coins::amount_serde")]
    pub amount: u128,
    pub denom: String,
    pub tax_rate: Fraction,
    #[serde(with = "crate::coins::amount_serde")]
    pub tax_cap: u128,
    #[serde(with = "crate::coins::amount_serde")]
    pub gas: u128,
    #[serde(with = "crate::coins::amount_serde")]
    pub tax: u128,
    #[serde(with = "crate::coins::amount_serde")]
    pub new_fee: u128,
}

fn tax_on(amount: u128, denom: &str, params: &TaxParams) -> u128 {
    if params.exempt_denoms.contains(denom) {
        return 0;
    }
    params.tax_rate.mul_floor(amount).min(params.cap_for(denom))
}

/// Fee to declare for sending `amount` of `denom` given an estimated gas fee.
pub fn estimate_fee(amount: u128, denom: &str, gas: u128, params: &TaxParams) -> FeeEstimate {
    let tax = tax_on(amount, denom, params);
    FeeEstimate {
        amount,
        denom: denom.to_string(),
        tax_rate: params.tax_rate,
        tax_cap: params.cap_for(denom),
        gas,
        tax,
        new_fee: tax.saturating_add(gas),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetInfo {
    NativeToken { denom: String },
    Token { contract_addr: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Asset {
    pub info: AssetInfo,
    #[serde(with = "crate::coins::amount_serde")]
    pub amount: u128,
}

/// The amount left to send once tax is taken out of `asset`.
pub fn deduct_tax(asset: &Asset, params: &TaxParams) -> Result<Coin> {
    match &asset.info {
        AssetInfo::NativeToken { denom } => {
            let tax = tax_on(asset.amount, denom, params);
            // tax <= amount whenever the rate is at most 1
            let left = asset.amount.checked_sub(tax).ok_or(Error::AmountOverflow(denom.clone()))?;
            Ok(Coin::new(left, denom.clone()))
        }
        AssetInfo::Token { .. } => Err(Error::NonNativeAsset),
    }
}
