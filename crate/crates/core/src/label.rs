use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Binary target of the classifier. `Sexist` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Sexist,
    NotSexist,
}

impl Label {
    pub const ALL: [Label; 2] = [Label::Sexist, Label::NotSexist];

    pub fn is_sexist(self) -> bool {
        self == Label::Sexist
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Sexist => "sexist",
            Label::NotSexist => "not_sexist",
        }
    }

    pub fn other(self) -> Label {
        match self {
            Label::Sexist => Label::NotSexist,
            Label::NotSexist => Label::Sexist,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sexist" => Ok(Label::Sexist),
            "not_sexist" => Ok(Label::NotSexist),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}
