use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The two record tables that carry a photo column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Table {
    Employees,
    Students,
}

pub const PHOTO_COLUMN: &str = "myphoto";

impl Table {
    pub const ALL: [Table; 2] = [Table::Employees, Table::Students];

    /// Lower-case SQL name; `FromStr` also accepts the mixed-case
    /// `Tab_T_Emp_Details`, `Tab_T_EmpDetails` and `Tab_T_Students`.
    pub fn sql_name(self) -> &'static str {
        match self {
            Table::Employees => "tab_t_emp_details",
            Table::Students => "tab_t_students",
        }
    }

    pub fn id_column(self) -> &'static str {
        match self {
            Table::Employees => "emp_id",
            Table::Students => "student_id",
        }
    }

    /// Path segment used by the HTTP API and the CLI.
    pub fn slug(self) -> &'static str {
        match self {
            Table::Employees => "employees",
            Table::Students => "students",
        }
    }
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.sql_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown table {0:?} (expected employees or students)")]
pub struct UnknownTable(pub String);

impl FromStr for Table {
    type Err = UnknownTable;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "employees" | "employee" | "tab_t_emp_details" | "tab_t_empdetails" => {
                Ok(Table::Employees)
            }
            "students" | "student" | "tab_t_students" => Ok(Table::Students),
            _ => Err(UnknownTable(s.to_owned())),
        }
    }
}
