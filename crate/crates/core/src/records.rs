//! Employee and student records: validation, CRUD and CSV import/export.
//!
//! Every bound is checked before anything reaches the database, and values
//! are never truncated: a record either persists exactly or is rejected
//! with the offending field named.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};

use chrono::NaiveDate;
use postgres::error::SqlState;
use postgres::types::ToSql;
use postgres::{Client, Row};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::table::Table;

pub const BLOOD_GROUPS: [&str; 8] = ["A+", "A-", "B+", "B-", "AB+", "AB-", "O+", "O-"];
pub const NAME_MAX: usize = 50;
pub const SHORT_TEXT_MAX: usize = 20;
pub const GENDER_MAX: usize = 6;
pub const BLOOD_GROUP_MAX: usize = 6;
pub const REMARK_MAX: usize = 255;
pub const CONTACT_MAX_DIGITS: usize = 15;
/// Upper bound of the 16-bit "Integer" columns.
pub const SMALL_INT_MAX: i32 = i16::MAX as i32;
pub const SEMESTER_RANGE: std::ops::RangeInclusive<i32> = 1..=12;
pub const PAGE_LIMIT_MAX: u32 = 500;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Required,
    TooLong(usize),
    NotPositive,
    OutOfRange,
    NotInEnumeration,
    NotDigits,
    Precedes(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ValidationError {
    pub field: &'static str,
    pub violation: Violation,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let field = self.field;
        match &self.violation {
            Violation::Required => write!(f, "{field} is required"),
            Violation::TooLong(max) => write!(f, "{field} exceeds {max}"),
            Violation::NotPositive => write!(f, "{field} must be positive"),
            Violation::OutOfRange => write!(f, "{field} out of range"),
            Violation::NotInEnumeration => write!(f, "{field} not in enumeration"),
            Violation::NotDigits => {
                write!(f, "{field} must be 1 to {CONTACT_MAX_DIGITS} digits")
            }
            Violation::Precedes(other) => write!(f, "{field} precedes {other}"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RecordError {
    #[error("database error: {0}")]
    Db(#[from] postgres::Error),
    #[error("validation failed: {0}")]
    Validation(#[from] ValidationError),
    #[error("duplicate id {0}")]
    Duplicate(i32),
    #[error("bad paging bounds: limit must be in 1..={PAGE_LIMIT_MAX}, got {0}")]
    BadPage(u32),
    #[error("malformed csv at line {line}: {message}")]
    MalformedCsv { line: u64, message: String },
    #[error("unknown csv header {0:?}")]
    UnknownHeader(String),
    #[error("missing csv header {0:?}")]
    MissingHeader(&'static str),
    #[error("csv write failed: {0}")]
    CsvWrite(String),
}

struct Check {
    err: Option<ValidationError>,
}

impl Check {
    fn new() -> Self {
        Self { err: None }
    }

    fn fail(&mut self, field: &'static str, violation: Violation) {
        if self.err.is_none() {
            self.err = Some(ValidationError { field, violation });
        }
    }

    fn text(&mut self, field: &'static str, value: &str, max: usize) -> &mut Self {
        if value.trim().is_empty() {
            self.fail(field, Violation::Required);
        } else if value.chars().count() > max {
            self.fail(field, Violation::TooLong(max));
        }
        self
    }

    fn opt_text(&mut self, field: &'static str, value: Option<&str>, max: usize) -> &mut Self {
        if value.is_some_and(|v| v.chars().count() > max) {
            self.fail(field, Violation::TooLong(max));
        }
        self
    }

    fn id(&mut self, field: &'static str, value: i32) -> &mut Self {
        if value <= 0 {
            self.fail(field, Violation::NotPositive);
        }
        self
    }

    fn range(&mut self, field: &'static str, value: i32, lo: i32, hi: i32) -> &mut Self {
        if value < lo || value > hi {
            self.fail(field, Violation::OutOfRange);
        }
        self
    }

    fn contact(&mut self, field: &'static str, value: &str) -> &mut Self {
        if value.is_empty()
            || value.len() > CONTACT_MAX_DIGITS
            || !value.bytes().all(|b| b.is_ascii_digit())
        {
            self.fail(field, Violation::NotDigits);
        }
        self
    }

    fn blood_group(&mut self, value: &str) -> &mut Self {
        if value.chars().count() > BLOOD_GROUP_MAX {
            self.fail("blood_group", Violation::TooLong(BLOOD_GROUP_MAX));
        } else if !BLOOD_GROUPS.contains(&value) {
            self.fail("blood_group", Violation::NotInEnumeration);
        }
        self
    }

    fn not_before(
        &mut self,
        field: &'static str,
        later: NaiveDate,
        other: &'static str,
        earlier: NaiveDate,
    ) -> &mut Self {
        if later < earlier {
            self.fail(field, Violation::Precedes(other));
        }
        self
    }

    fn finish(&mut self) -> Result<(), ValidationError> {
        self.err.take().map_or(Ok(()), Err)
    }
}

/// One field's constraint, as published to clients.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rule {
    Text { max_len: usize, required: bool },
    Integer { min: i32, max: i32 },
    Digits { max_digits: usize },
    Enumeration { values: Vec<&'static str>, max_len: usize },
    Date { not_before: Option<&'static str> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldRule {
    pub field: &'static str,
    #[serde(flatten)]
    pub rule: Rule,
}

fn rule(field: &'static str, rule: Rule) -> FieldRule {
    FieldRule { field, rule }
}

fn text(max_len: usize, required: bool) -> Rule {
    Rule::Text { max_len, required }
}

/// The constraints `validate` enforces for `table`, in field order.
pub fn validation_rules(table: Table) -> Vec<FieldRule> {
    let id = Rule::Integer { min: 1, max: i32::MAX };
    let contact = Rule::Digits { max_digits: CONTACT_MAX_DIGITS };
    let blood = Rule::Enumeration {
        values: BLOOD_GROUPS.to_vec(),
        max_len: BLOOD_GROUP_MAX,
    };
    match table {
        Table::Employees => vec![
            rule("emp_id", id),
            rule("first_name", text(NAME_MAX, true)),
            rule("middle_name", text(NAME_MAX, false)),
            rule("last_name", text(NAME_MAX, true)),
            rule("emp_contact_no", contact),
            rule("date_of_birth", Rule::Date { not_before: None }),
            rule("dept", text(SHORT_TEXT_MAX, true)),
            rule("date_of_joining", Rule::Date { not_before: Some("date_of_birth") }),
            rule("highest_education", text(SHORT_TEXT_MAX, true)),
            rule("designation", text(SHORT_TEXT_MAX, true)),
            rule("employment_type", text(SHORT_TEXT_MAX, true)),
            rule("gender", text(GENDER_MAX, true)),
            rule("blood_group", blood),
            rule("years_of_experience", Rule::Integer { min: 0, max: SMALL_INT_MAX }),
            rule("remark", text(REMARK_MAX, false)),
        ],
        Table::Students => vec![
            rule("student_id", id.clone()),
            rule("first_name", text(NAME_MAX, true)),
            rule("middle_name", text(NAME_MAX, false)),
            rule("last_name", text(NAME_MAX, true)),
            rule("student_contact_no", contact),
            rule("date_of_birth", Rule::Date { not_before: None }),
            rule("branch", text(SHORT_TEXT_MAX, true)),
            rule("date_of_admission", Rule::Date { not_before: Some("date_of_birth") }),
            rule("session", text(SHORT_TEXT_MAX, true)),
            rule(
                "semester",
                Rule::Integer {
                    min: *SEMESTER_RANGE.start(),
                    max: *SEMESTER_RANGE.end(),
                },
            ),
            rule("aicte_course_id", id),
            rule("gender", text(GENDER_MAX, true)),
            rule("blood_group", blood),
            rule("remark", text(REMARK_MAX, false)),
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmployeeRecord {
    pub emp_id: i32,
    pub first_name: String,
    pub middle_name: Option<String>,
    pub last_name: String,
    pub emp_contact_no: String,
    pub date_of_birth: NaiveDate,
    pub dept: String,
    pub date_of_joining: NaiveDate,
    pub highest_education: String,
    pub designation: String,
    pub employment_type: String,
    pub gender: String,
    pub blood_group: String,
    pub years_of_experience: i32,
    pub remark: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudentRecord {
    pub student_id: i32,
    pub first_name: String,
    pub middle_name: Option<String>,
    pub last_name: String,
    pub student_contact_no: String,
    pub date_of_birth: NaiveDate,
    pub branch: String,
    pub date_of_admission: NaiveDate,
    pub session: String,
    pub semester: i32,
    pub aicte_course_id: i32,
    pub gender: String,
    pub blood_group: String,
    pub remark: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmployeeFilter {
    pub dept: Option<String>,
    pub designation: Option<String>,
    pub employment_type: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentFilter {
    pub branch: Option<String>,
    pub session: Option<String>,
    pub semester: Option<i32>,
}

type Params = Vec<Box<dyn ToSql + Sync>>;

/// A row type persisted in one of the managed tables.
pub trait Record: Serialize + DeserializeOwned + Clone + fmt::Debug + Send + Sync + 'static {
    const TABLE: Table;
    /// Canonical column names, id first. Also the CSV header.
    const FIELDS: &'static [&'static str];
    type Filter: Default + fmt::Debug + Send + Sync;

    fn id(&self) -> i32;
    fn validate(&self) -> Result<(), ValidationError>;
    /// Values in `FIELDS` order, typed for their SQL columns.
    fn to_params(&self) -> Params;
    fn from_row(row: &Row) -> Self;
    /// SQL predicates (using `$1..`) and their values.
    fn filter_sql(filter: &Self::Filter) -> (Vec<String>, Params);

    fn full_name(&self) -> String;
    /// Text for an ID-card slot: `name`, `id`, or any canonical field.
    fn card_field(&self, field: &str) -> Option<String>;
}

fn opt(s: &Option<String>) -> String {
    s.clone().unwrap_or_default()
}

fn join_name(first: &str, middle: Option<&str>, last: &str) -> String {
    [Some(first), middle, Some(last)]
        .into_iter()
        .flatten()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

fn push_eq<T: ToSql + Sync + Clone + 'static>(
    preds: &mut Vec<String>,
    params: &mut Params,
    column: &str,
    value: &Option<T>,
) {
    if let Some(v) = value {
        params.push(Box::new(v.clone()));
        preds.push(format!("{column} = ${}", params.len()));
    }
}

impl Record for EmployeeRecord {
    const TABLE: Table = Table::Employees;
    const FIELDS: &'static [&'static str] = &[
        "emp_id",
        "first_name",
        "middle_name",
        "last_name",
        "emp_contact_no",
        "date_of_birth",
        "dept",
        "date_of_joining",
        "highest_education",
        "designation",
        "employment_type",
        "gender",
        "blood_group",
        "years_of_experience",
        "remark",
    ];
    type Filter = EmployeeFilter;

    fn id(&self) -> i32 {
        self.emp_id
    }

    fn validate(&self) -> Result<(), ValidationError> {
        Check::new()
            .id("emp_id", self.emp_id)
            .text("first_name", &self.first_name, NAME_MAX)
            .opt_text("middle_name", self.middle_name.as_deref(), NAME_MAX)
            .text("last_name", &self.last_name, NAME_MAX)
            .contact("emp_contact_no", &self.emp_contact_no)
            .text("dept", &self.dept, SHORT_TEXT_MAX)
            .not_before(
                "date_of_joining",
                self.date_of_joining,
                "date_of_birth",
                self.date_of_birth,
            )
            .text("highest_education", &self.highest_education, SHORT_TEXT_MAX)
            .text("designation", &self.designation, SHORT_TEXT_MAX)
            .text("employment_type", &self.employment_type, SHORT_TEXT_MAX)
            .text("gender", &self.gender, GENDER_MAX)
            .blood_group(&self.blood_group)
            .range("years_of_experience", self.years_of_experience, 0, SMALL_INT_MAX)
            .opt_text("remark", self.remark.as_deref(), REMARK_MAX)
            .finish()
    }

    fn to_params(&self) -> Params {
        vec![
            Box::new(self.emp_id),
            Box::new(self.first_name.clone()),
            Box::new(self.middle_name.clone()),
            Box::new(self.last_name.clone()),
            Box::new(self.emp_contact_no.clone()),
            Box::new(self.date_of_birth),
            Box::new(self.dept.clone()),
            Box::new(self.date_of_joining),
            Box::new(self.highest_education.clone()),
            Box::new(self.designation.clone()),
            Box::new(self.employment_type.clone()),
            Box::new(self.gender.clone()),
            Box::new(self.blood_group.clone()),
            Box::new(self.years_of_experience as i16),
            Box::new(self.remark.clone()),
        ]
    }

    fn from_row(row: &Row) -> Self {
        Self {
            emp_id: row.get("emp_id"),
            first_name: row.get("first_name"),
            middle_name: row.get("middle_name"),
            last_name: row.get("last_name"),
            emp_contact_no: row.get("emp_contact_no"),
            date_of_birth: row.get("date_of_birth"),
            dept: row.get("dept"),
            date_of_joining: row.get("date_of_joining"),
            highest_education: row.get("highest_education"),
            designation: row.get("designation"),
            employment_type: row.get("employment_type"),
            gender: row.get("gender"),
            blood_group: row.get("blood_group"),
            years_of_experience: row.get::<_, i16>("years_of_experience") as i32,
            remark: row.get("remark"),
        }
    }

    fn filter_sql(filter: &EmployeeFilter) -> (Vec<String>, Params) {
        let (mut preds, mut params) = (Vec::new(), Params::new());
        push_eq(&mut preds, &mut params, "dept", &filter.dept);
        push_eq(&mut preds, &mut params, "designation", &filter.designation);
        push_eq(&mut preds, &mut params, "employment_type", &filter.employment_type);
        (preds, params)
    }

    fn full_name(&self) -> String {
        join_name(&self.first_name, self.middle_name.as_deref(), &self.last_name)
    }

    fn card_field(&self, field: &str) -> Option<String> {
        Some(match field {
            "name" => self.full_name(),
            "id" | "emp_id" => self.emp_id.to_string(),
            "first_name" => self.first_name.clone(),
            "middle_name" => opt(&self.middle_name),
            "last_name" => self.last_name.clone(),
            "emp_contact_no" => self.emp_contact_no.clone(),
            "date_of_birth" => self.date_of_birth.to_string(),
            "dept" => self.dept.clone(),
            "date_of_joining" => self.date_of_joining.to_string(),
            "highest_education" => self.highest_education.clone(),
            "designation" => self.designation.clone(),
            "employment_type" => self.employment_type.clone(),
            "gender" => self.gender.clone(),
            "blood_group" => self.blood_group.clone(),
            "years_of_experience" => self.years_of_experience.to_string(),
            "remark" => opt(&self.remark),
            _ => return None,
        })
    }
}

impl Record for StudentRecord {
    const TABLE: Table = Table::Students;
    const FIELDS: &'static [&'static str] = &[
        "student_id",
        "first_name",
        "middle_name",
        "last_name",
        "student_contact_no",
        "date_of_birth",
        "branch",
        "date_of_admission",
        "session",
        "semester",
        "aicte_course_id",
        "gender",
        "blood_group",
        "remark",
    ];
    type Filter = StudentFilter;

    fn id(&self) -> i32 {
        self.student_id
    }

    fn validate(&self) -> Result<(), ValidationError> {
        Check::new()
            .id("student_id", self.student_id)
            .text("first_name", &self.first_name, NAME_MAX)
            .opt_text("middle_name", self.middle_name.as_deref(), NAME_MAX)
            .text("last_name", &self.last_name, NAME_MAX)
            .contact("student_contact_no", &self.student_contact_no)
            .text("branch", &self.branch, SHORT_TEXT_MAX)
            .not_before(
                "date_of_admission",
                self.date_of_admission,
                "date_of_birth",
                self.date_of_birth,
            )
            .text("session", &self.session, SHORT_TEXT_MAX)
            .range("semester", self.semester, *SEMESTER_RANGE.start(), *SEMESTER_RANGE.end())
            .id("aicte_course_id", self.aicte_course_id)
            .text("gender", &self.gender, GENDER_MAX)
            .blood_group(&self.blood_group)
            .opt_text("remark", self.remark.as_deref(), REMARK_MAX)
            .finish()
    }

    fn to_params(&self) -> Params {
        vec![
            Box::new(self.student_id),
            Box::new(self.first_name.clone()),
            Box::new(self.middle_name.clone()),
            Box::new(self.last_name.clone()),
            Box::new(self.student_contact_no.clone()),
            Box::new(self.date_of_birth),
            Box::new(self.branch.clone()),
            Box::new(self.date_of_admission),
            Box::new(self.session.clone()),
            Box::new(self.semester as i16),
            Box::new(self.aicte_course_id),
            Box::new(self.gender.clone()),
            Box::new(self.blood_group.clone()),
            Box::new(self.remark.clone()),
        ]
    }

    fn from_row(row: &Row) -> Self {
        Self {
            student_id: row.get("student_id"),
            first_name: row.get("first_name"),
            middle_name: row.get("middle_name"),
            last_name: row.get("last_name"),
            student_contact_no: row.get("student_contact_no"),
            date_of_birth: row.get("date_of_birth"),
            branch: row.get("branch"),
            date_of_admission: row.get("date_of_admission"),
            session: row.get("session"),
            semester: row.get::<_, i16>("semester") as i32,
            aicte_course_id: row.get("aicte_course_id"),
            gender: row.get("gender"),
            blood_group: row.get("blood_group"),
            remark: row.get("remark"),
        }
    }

    fn filter_sql(filter: &StudentFilter) -> (Vec<String>, Params) {
        let (mut preds, mut params) = (Vec::new(), Params::new());
        push_eq(&mut preds, &mut params, "branch", &filter.branch);
        push_eq(&mut preds, &mut params, "session", &filter.session);
        push_eq(
            &mut preds,
            &mut params,
            "semester",
            &filter.semester.map(|s| s.clamp(i16::MIN as i32, i16::MAX as i32) as i16),
        );
        (preds, params)
    }

    fn full_name(&self) -> String {
        join_name(&self.first_name, self.middle_name.as_deref(), &self.last_name)
    }

    fn card_field(&self, field: &str) -> Option<String> {
        Some(match field {
            "name" => self.full_name(),
            "id" | "student_id" => self.student_id.to_string(),
            "first_name" => self.first_name.clone(),
            "middle_name" => opt(&self.middle_name),
            "last_name" => self.last_name.clone(),
            "student_contact_no" => self.student_contact_no.clone(),
            "date_of_birth" => self.date_of_birth.to_string(),
            "branch" => self.branch.clone(),
            "date_of_admission" => self.date_of_admission.to_string(),
            "session" => self.session.clone(),
            "semester" => self.semester.to_string(),
            "aicte_course_id" => self.aicte_course_id.to_string(),
            "gender" => self.gender.clone(),
            "blood_group" => self.blood_group.clone(),
            "remark" => opt(&self.remark),
            _ => return None,
        })
    }
}

fn refs(params: &Params) -> Vec<&(dyn ToSql + Sync)> {
    params.iter().map(|p| p.as_ref()).collect()
}

fn column_list<R: Record>() -> String {
    R::FIELDS.join(", ")
}

fn is_unique_violation(err: &postgres::Error) -> bool {
    err.code() == Some(&SqlState::UNIQUE_VIOLATION)
}

/// Inserts `rec` and returns its id.
pub fn create<R: Record>(client: &mut Client, rec: &R) -> Result<i32, RecordError> {
    rec.validate()?;
    let placeholders: Vec<String> = (1..=R::FIELDS.len()).map(|i| format!("${i}")).collect();
    let sql = format!(
        "INSERT INTO {} ({}) VALUES ({})",
        R::TABLE,
        column_list::<R>(),
        placeholders.join(", ")
    );
    let params = rec.to_params();
    match client.execute(&sql, &refs(&params)) {
        Ok(_) => Ok(rec.id()),
        Err(e) if is_unique_violation(&e) => Err(RecordError::Duplicate(rec.id())),
        Err(e) => Err(e.into()),
    }
}

pub fn get<R: Record>(client: &mut Client, id: i32) -> Result<Option<R>, RecordError> {
    let sql = format!(
        "SELECT {} FROM {} WHERE {} = $1",
        column_list::<R>(),
        R::TABLE,
        R::TABLE.id_column()
    );
    Ok(client.query_opt(&sql, &[&id])?.as_ref().map(R::from_row))
}

/// Replaces every field of the row with `rec`'s id; the photo is untouched.
/// Returns `false` when no such row exists.
pub fn update<R: Record>(client: &mut Client, rec: &R) -> Result<bool, RecordError> {
    rec.validate()?;
    let sets: Vec<String> = R::FIELDS
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, f)| format!("{f} = ${}", i + 1))
        .collect();
    let sql = format!(
        "UPDATE {} SET {} WHERE {} = $1",
        R::TABLE,
        sets.join(", "),
        R::TABLE.id_column()
    );
    let params = rec.to_params();
    Ok(client.execute(&sql, &refs(&params))? == 1)
}

/// Deletes the row; an attached large object is unlinked by the photo
/// trigger in the same transaction.
pub fn delete<R: Record>(client: &mut Client, id: i32) -> Result<bool, RecordError> {
    let sql = format!("DELETE FROM {} WHERE {} = $1", R::TABLE, R::TABLE.id_column());
    Ok(client.execute(&sql, &[&id])? == 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub offset: u64,
    pub limit: u32,
}

impl Page {
    pub fn new(offset: u64, limit: u32) -> Result<Self, RecordError> {
        if limit == 0 || limit > PAGE_LIMIT_MAX {
            return Err(RecordError::BadPage(limit));
        }
        Ok(Self { offset, limit })
    }
}

impl Default for Page {
    fn default() -> Self {
        Self {
            offset: 0,
            limit: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Listing<R> {
    pub items: Vec<R>,
    pub total: u64,
}

/// Records matching `filter`, ordered by id; `total` ignores paging.
pub fn list<R: Record>(
    client: &mut Client,
    filter: &R::Filter,
    page: Page,
) -> Result<Listing<R>, RecordError> {
    let page = Page::new(page.offset, page.limit)?;
    let (preds, mut params) = R::filter_sql(filter);
    let where_sql = if preds.is_empty() {
        String::new()
    } else {
        format!(" WHERE {}", preds.join(" AND "))
    };
    let total: i64 = client
        .query_one(
            &format!("SELECT count(*) FROM {}{where_sql}", R::TABLE),
            &refs(&params),
        )?
        .get(0);
    params.push(Box::new(page.limit as i64));
    params.push(Box::new(page.offset.min(i64::MAX as u64) as i64));
    let n = params.len();
    let sql = format!(
        "SELECT {} FROM {}{where_sql} ORDER BY {} LIMIT ${} OFFSET ${}",
        column_list::<R>(),
        R::TABLE,
        R::TABLE.id_column(),
        n - 1,
        n
    );
    let items = client.query(&sql, &refs(&params))?.iter().map(R::from_row).collect();
    Ok(Listing {
        items,
        total: total as u64,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ImportReport {
    pub inserted: u64,
    /// (line number, reason); the header is line 1.
    pub rejected: Vec<(u64, String)>,
}

fn deserialize_reason(err: &csv::Error, headers: &csv::StringRecord) -> String {
    if let csv::ErrorKind::Deserialize { err, .. } = err.kind() {
        let field = err
            .field()
            .and_then(|i| headers.get(i as usize))
            .unwrap_or("record");
        format!("{field}: {}", err.kind())
    } else {
        err.to_string()
    }
}

/// Imports CSV rows (RFC 4180, header of canonical field names). Each valid
/// row is inserted on its own; invalid rows are reported and skipped.
pub fn import_csv<R: Record>(
    client: &mut Client,
    input: impl Read,
) -> Result<ImportReport, RecordError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| RecordError::MalformedCsv {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    for h in headers.iter() {
        if !R::FIELDS.contains(&h) {
            return Err(RecordError::UnknownHeader(h.to_owned()));
        }
    }
    for f in R::FIELDS {
        if !headers.iter().any(|h| h == *f) {
            return Err(RecordError::MissingHeader(f));
        }
    }

    let mut report = ImportReport::default();
    let mut seen = HashSet::new();
    for row in reader.records() {
        let row = row.map_err(|e| RecordError::MalformedCsv {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let rec: R = match row.deserialize(Some(&headers)) {
            Ok(r) => r,
            Err(e) => {
                report.rejected.push((line, deserialize_reason(&e, &headers)));
                continue;
            }
        };
        if let Err(v) = rec.validate() {
            report.rejected.push((line, v.to_string()));
            continue;
        }
        if !seen.insert(rec.id()) {
            report.rejected.push((line, "duplicate id".to_owned()));
            continue;
        }
        match create(client, &rec) {
            Ok(_) => report.inserted += 1,
            Err(RecordError::Duplicate(_)) => report.rejected.push((line, "duplicate id".to_owned())),
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}

/// Writes every record of `R` in id order; returns the row count.
pub fn export_csv<R: Record>(client: &mut Client, out: impl Write) -> Result<u64, RecordError> {
    let sql = format!(
        "SELECT {} FROM {} ORDER BY {}",
        column_list::<R>(),
        R::TABLE,
        R::TABLE.id_column()
    );
    let rows = client.query(&sql, &[])?;
    let mut writer = csv::Writer::from_writer(out);
    if rows.is_empty() {
        writer
            .write_record(R::FIELDS)
            .map_err(|e| RecordError::CsvWrite(e.to_string()))?;
    }
    for row in &rows {
        writer
            .serialize(R::from_row(row))
            .map_err(|e| RecordError::CsvWrite(e.to_string()))?;
    }
    writer.flush().map_err(|e| RecordError::CsvWrite(e.to_string()))?;
    Ok(rows.len() as u64)
}

/// Reference employee: id 9, Sourav Bag, blood group A+.
pub fn sample_employee() -> EmployeeRecord {
    EmployeeRecord {
        emp_id: 9,
        first_name: "Sourav".into(),
        middle_name: None,
        last_name: "Bag".into(),
        emp_contact_no: "8131042345".into(),
        date_of_birth: NaiveDate::from_ymd_opt(1990, 1, 1).expect("valid date"),
        dept: "Electronics and Cor".into(),
        date_of_joining: NaiveDate::from_ymd_opt(2015, 7, 1).expect("valid date"),
        highest_education: "M.Tech".into(),
        designation: "Asst. Professor".into(),
        employment_type: "Employee".into(),
        gender: "Male".into(),
        blood_group: "A+".into(),
        years_of_experience: 1,
        remark: None,
    }
}

/// A minimal valid student.
pub fn sample_student() -> StudentRecord {
    StudentRecord {
        student_id: 1,
        first_name: "A".into(),
        middle_name: None,
        last_name: "B".into(),
        student_contact_no: "9674521008".into(),
        date_of_birth: NaiveDate::from_ymd_opt(2004, 3, 2).expect("valid date"),
        branch: "CSE".into(),
        date_of_admission: NaiveDate::from_ymd_opt(2022, 8, 1).expect("valid date"),
        session: "2022-2026".into(),
        semester: 1,
        aicte_course_id: 1,
        gender: "F".into(),
        blood_group: "O+".into(),
        remark: None,
    }
}
