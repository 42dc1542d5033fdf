//! Verdicts and replayable witnesses shared by audits and collusion checks.

use std::fmt;

use serde::Serialize;

/// Gains at or below this are treated as ties.
pub const GAIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Allocation,
    IndividualRationality,
    BurnBalance,
    Anonymity,
    Dsic,
    Mmic,
    Oca,
    Scp(usize),
    CollusionIc,
    CollusionIr,
    CollusionExPostIr,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Property::Allocation => write!(f, "single allocation"),
            Property::IndividualRationality => write!(f, "EPIR"),
            Property::BurnBalance => write!(f, "burn balance"),
            Property::Anonymity => write!(f, "anonymity"),
            Property::Dsic => write!(f, "DSIC"),
            Property::Mmic => write!(f, "MMIC"),
            Property::Oca => write!(f, "OCA-proof"),
            Property::Scp(c) => write!(f, "{c}-SCP"),
            Property::CollusionIc => write!(f, "collusion IC"),
            Property::CollusionIr => write!(f, "collusion IR"),
            Property::CollusionExPostIr => write!(f, "collusion ex-post IR"),
        }
    }
}

/// A concrete violation. `profile` is the honest bid vector, `deviant_profile`
/// what the mechanism actually sees (with `fake_slots` marking miner bids).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub profile: Vec<f64>,
    pub deviant_profile: Vec<f64>,
    pub fake_slots: Vec<usize>,
    pub coalition: Vec<usize>,
    pub description: String,
    pub honest_value: f64,
    pub deviant_value: f64,
}

impl Witness {
    pub fn gap(&self) -> f64 {
        self.deviant_value - self.honest_value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub property: Property,
    pub passed: bool,
    pub witness: Option<Witness>,
}

impl AuditReport {
    pub fn pass(property: Property) -> Self {
        AuditReport {
            property,
            passed: true,
            witness: None,
        }
    }

    pub fn fail(property: Property, witness: Witness) -> Self {
        AuditReport {
            property,
            passed: false,
            witness: Some(witness),
        }
    }

    pub fn from_witness(property: Property, witness: Option<Witness>) -> Self {
        match witness {
            Some(w) => Self::fail(property, w),
            None => Self::pass(property),
        }
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{}: {verdict}", self.property)?;
        if let Some(w) = &self.witness {
            write!(f, "\n  profile: {:?}", w.profile)?;
            if w.deviant_profile != w.profile {
                write!(f, "\n  deviant profile: {:?}", w.deviant_profile)?;
            }
            if !w.fake_slots.is_empty() {
                write!(f, "\n  fake slots: {:?}", w.fake_slots)?;
            }
            if !w.coalition.is_empty() {
                write!(f, "\n  coalition: {:?}", w.coalition)?;
            }
            write!(f, "\n  {}", w.description)?;
            write!(f, "\n  honest {} vs deviant {}", w.honest_value, w.deviant_value)?;
        }
        Ok(())
    }
}
