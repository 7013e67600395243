//! Report files: per-slot CSV, hash trajectory CSV and a JSON summary.
//!
//! Amounts are integer micro-units. JSON amounts above 2^53 are written as
//! strings so that consumers using doubles read them losslessly.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::coins::Coins;
use crate::error::{Error, Result};
use crate::ledger::COMMUNITY_POOL;
use crate::simulator::SimReport;
use crate::state::{ChainState, TxStatus};

pub const BLOCKS_CSV: &str = "blocks.csv";
pub const HASHES_CSV: &str = "hashes.csv";
pub const SUMMARY_JSON: &str = "summary.json";

const MAX_SAFE_JSON_INT: u128 = 1 << 53;

pub fn amount_json(v: u128) -> Value {
    if v <= MAX_SAFE_JSON_INT {
        Value::from(v as u64)
    } else {
        Value::String(v.to_string())
    }
}

fn coins_json(c: &Coins) -> Value {
    Value::Object(c.iter().map(|(d, a)| (d.to_string(), amount_json(a))).collect())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn write_blocks_csv<W: Write>(report: &SimReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["slot".to_string(), "height".into(), "halted".into()];
    for d in &report.denoms {
        header.push(format!("supply_{d}"));
        header.push(format!("burned_{d}"));
        header.push(format!("community_pool_{d}"));
    }
    w.write_record(&header).map_err(csv_err)?;
    let mut rec = Vec::with_capacity(header.len());
    for r in &report.rows {
        rec.clear();
        rec.push(r.slot.to_string());
        rec.push(r.height.to_string());
        rec.push(u8::from(r.halted).to_string());
        for (s, b, p) in &r.per_denom {
            rec.push(s.to_string());
            rec.push(b.to_string());
            rec.push(p.to_string());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_hashes_csv<W: Write>(report: &SimReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["height", "state_hash"]).map_err(csv_err)?;
    for (h, hash) in &report.hash_trajectory {
        w.write_record([h.to_string(), hash.clone()]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn summary_json(report: &SimReport, state: &ChainState) -> Value {
    let ledger = &state.ledger;
    let pool = ledger.module_balance(COMMUNITY_POOL).cloned().unwrap_or_default();
    let mut supply = Map::new();
    for d in ledger.supply().denoms() {
        supply.insert(
            d.clone(),
            json!({
                "total": amount_json(ledger.total_supply(&d)),
                "burned": amount_json(ledger.supply().burned(&d)),
                "minted": amount_json(ledger.supply().minted(&d)),
                "community_pool": amount_json(pool.amount_of(&d)),
            }),
        );
    }
    let (mut ok, mut failed, mut rejected) = (0u64, 0u64, 0u64);
    let mut tx_errors = Vec::new();
    for t in &report.txs {
        let err = match &t.status {
            TxStatus::Ok => {
                ok += 1;
                continue;
            }
            TxStatus::Failed(e) => {
                failed += 1;
                json!({"status": "failed", "error": e})
            }
            TxStatus::Rejected(e) => {
                rejected += 1;
                json!({"status": "rejected", "error": e})
            }
        };
        let mut obj = err;
        obj["slot"] = json!(t.slot);
        obj["height"] = json!(t.height);
        obj["index"] = json!(t.index);
        tx_errors.push(obj);
    }
    let proposals: Vec<Value> = state
        .governance
        .proposals()
        .map(|p| {
            json!({
                "id": p.id,
                "title": p.title,
                "status": serde_json::to_value(p.status).expect("status serializes"),
                "voting_end": p.voting_end,
                "warnings": p.warnings,
            })
        })
        .collect();
    json!({
        "scenario": report.scenario,
        "chain_id": state.chain_id,
        "genesis_height": report.genesis_height,
        "final_height": report.final_height,
        "final_hash": report.final_hash,
        "halted_at_end": report.halted_at_end,
        "halts": report.halts.iter().map(|h| json!({
            "height": h.height,
            "slot": h.slot,
            "compatible_fraction": h.compatible_fraction.to_string(),
        })).collect::<Vec<_>>(),
        "recoveries": report.recoveries.iter().map(|r| json!({
            "height": r.height,
            "slot": r.slot,
            "halted_slots": r.halted_slots,
        })).collect::<Vec<_>>(),
        "rollbacks": report.rollbacks.iter().map(|(slot, h)| json!({"slot": slot, "height": h})).collect::<Vec<_>>(),
        "tallies": report.tallies.iter().map(|t| json!({
            "proposal": t.id,
            "height": t.height,
            "passed": t.passed,
            "yes": amount_json(t.tally.yes),
            "no": amount_json(t.tally.no),
            "no_with_veto": amount_json(t.tally.no_with_veto),
            "abstain": amount_json(t.tally.abstain),
            "bonded": amount_json(t.tally.bonded),
            "error": t.error,
        })).collect::<Vec<_>>(),
        "proposals": proposals,
        "epochs": report.epochs.iter().map(|e| json!({
            "height": e.height,
            "minted": coins_json(&e.minted),
            "burned": coins_json(&e.burned),
            "distributed": coins_json(&e.distributed.total().unwrap_or_default()),
            "tax_rate": e.tax_rate.to_string(),
            "reward_weight": e.reward_weight.to_string(),
        })).collect::<Vec<_>>(),
        "txs": {"ok": ok, "failed": failed, "rejected": rejected, "errors": tx_errors},
        "supply": Value::Object(supply),
        "tax_rate": state.treasury.get_tax_rate().to_string(),
        "distribution_params": {
            "community_tax": state.distribution.params.community_tax.to_string(),
            "base_proposer_reward": state.distribution.params.base_proposer_reward.to_string(),
            "bonus_proposer_reward": state.distribution.params.bonus_proposer_reward.to_string(),
        },
        "warnings": report.warnings,
    })
}

/// Writes `blocks.csv`, `hashes.csv` and `summary.json` into `dir`.
pub fn write_reports(report: &SimReport, state: &ChainState, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_blocks_csv(report, std::io::BufWriter::new(std::fs::File::create(dir.join(BLOCKS_CSV))?))?;
    write_hashes_csv(report, std::io::BufWriter::new(std::fs::File::create(dir.join(HASHES_CSV))?))?;
    let mut text = serde_json::to_string_pretty(&summary_json(report, state)).expect("json");
    text.push('\n');
    std::fs::write(dir.join(SUMMARY_JSON), text)?;
    Ok(())
}
