use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Per-query segmentation label: does this query start a new exploration?
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Label {
    Segment,
    Continue,
}

impl Label {
    pub fn is_segment(self) -> bool {
        self == Label::Segment
    }

    pub fn from_bool(segment: bool) -> Self {
        if segment {
            Label::Segment
        } else {
            Label::Continue
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Segment => "SEGMENT",
            Label::Continue => "CONTINUE",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "SEGMENT" => Ok(Label::Segment),
            "CONTINUE" => Ok(Label::Continue),
            other => Err(Error::UnknownLabel(other.to_string())),
        }
    }
}
