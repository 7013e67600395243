use thiserror::Error;

/// Errors raised by the chain modules, the simulator and the config loaders.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("insufficient funds: {holder} needs {needed}{denom} but holds {available}{denom}")]
    InsufficientFunds {
        holder: String,
        denom: String,
        needed: u128,
        available: u128,
    },
    #[error("unknown module account `{0}`")]
    UnknownModule(String),
    #[error("amount overflow in denom {0}")]
    AmountOverflow(String),
    #[error("message type not supported at height {height}: {msg}")]
    MsgNotSupported { msg: &'static str, height: u64 },
    #[error("validator {0} already exists")]
    DuplicateValidator(String),
    #[error("unknown validator {0}")]
    UnknownValidator(String),
    #[error("validator {0} is jailed")]
    ValidatorJailed(String),
    #[error("delegation would raise validator power to {new_power}/{new_total}, above the cap")]
    PowerCapExceeded { new_power: u128, new_total: u128 },
    #[error("insufficient shares: requested {requested}, delegated {available}")]
    InsufficientShares { requested: u128, available: u128 },
    #[error("no delegation from {delegator} to {validator}")]
    UnknownDelegation { delegator: String, validator: String },
    #[error("invalid denom for this operation: expected {expected}, got {got}")]
    WrongDenom { expected: String, got: String },
    #[error("invalid transaction: {0}")]
    InvalidTx(String),
    #[error("internal inconsistency: taxes {first} recomputed as {second}")]
    TaxMismatch { first: String, second: String },
    #[error("unknown proposer {0}")]
    UnknownProposer(String),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("malformed proposal: {0}")]
    MalformedProposal(String),
    #[error("unknown proposal {0}")]
    UnknownProposal(u64),
    #[error("proposal {id} is still in voting until height {voting_end}")]
    StillInVoting { id: u64, voting_end: u64 },
    #[error("proposal {0} has not passed")]
    NotPassed(u64),
    #[error("proposal {0} is not in its voting period")]
    VotingClosed(u64),
    #[error("chain halted at height {0}")]
    ChainHalted(u64),
    #[error("cannot deduct tax from token asset")]
    NonNativeAsset,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invariant violation at height {height}: {detail}")]
    InvariantViolation { height: u64, detail: String },
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
