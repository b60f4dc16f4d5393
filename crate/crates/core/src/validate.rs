//! Parameter validation with stable reason codes.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    Structure,
    IdRateNotBelowBinRate,
    BinRateNotBelowInformation,
    BinRateNotBelowPoolRate,
    BinRateNotBelowOtherSum,
    PoolRateNotBelowBinSum,
    PoolRateNotAboveInformation,
    IdRateNotBelowEntropy,
    TransmissionRateOutOfRange,
    EpsTooLarge,
    PoolTooLarge,
}

impl Reason {
    pub fn code(self) -> &'static str {
        match self {
            Reason::Structure => "structure",
            Reason::IdRateNotBelowBinRate => "id-rate-not-below-bin-rate",
            Reason::BinRateNotBelowInformation => "bin-rate-not-below-information",
            Reason::BinRateNotBelowPoolRate => "bin-rate-not-below-pool-rate",
            Reason::BinRateNotBelowOtherSum => "bin-rate-not-below-other-sum",
            Reason::PoolRateNotBelowBinSum => "pool-rate-not-below-bin-sum",
            Reason::PoolRateNotAboveInformation => "pool-rate-not-above-information",
            Reason::IdRateNotBelowEntropy => "id-rate-not-below-entropy",
            Reason::TransmissionRateOutOfRange => "transmission-rate-out-of-range",
            Reason::EpsTooLarge => "eps-too-large",
            Reason::PoolTooLarge => "pool-too-large",
        }
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Severity {
    /// The construction's rate constraints fail.
    Error,
    /// The typicality slack exceeds the asymptotic requirement; the code is
    /// still well defined.
    Warning,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub reason: Reason,
    pub severity: Severity,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub issues: Vec<Issue>,
}

impl Validation {
    pub fn error(&mut self, reason: Reason, detail: impl Into<String>) {
        self.issues.push(Issue {
            reason,
            severity: Severity::Error,
            detail: detail.into(),
        });
    }

    pub fn warning(&mut self, reason: Reason, detail: impl Into<String>) {
        self.issues.push(Issue {
            reason,
            severity: Severity::Warning,
            detail: detail.into(),
        });
    }

    /// Records an error unless `lhs < rhs`.
    pub fn require_below(&mut self, reason: Reason, lhs: f64, rhs: f64, what: &str) {
        if !(lhs < rhs) {
            self.error(reason, format!("{what}: {lhs} is not below {rhs}"));
        }
    }

    pub fn is_valid(&self) -> bool {
        self.issues.iter().all(|i| i.severity != Severity::Error)
    }

    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn has(&self, reason: Reason) -> bool {
        self.issues.iter().any(|i| i.reason == reason)
    }

    /// Reason codes of the errors, comma separated.
    pub fn error_codes(&self) -> String {
        self.errors()
            .map(|i| i.reason.code())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn into_result(self) -> Result<Self> {
        if self.is_valid() {
            Ok(self)
        } else {
            Err(Error::Param(format!("invalid parameters: {}", self.error_codes())))
        }
    }
}
