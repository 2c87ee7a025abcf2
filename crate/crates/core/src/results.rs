//! Test outcome types shared by both frameworks and the report pipeline.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};

use crate::blockmodel::SinkSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestStatus {
    Passed,
    Failed,
    Error,
}

impl TestStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TestStatus::Passed => "passed",
            TestStatus::Failed => "failed",
            TestStatus::Error => "error",
        }
    }

    /// Numeric code used by `slunit_run` records and process exit codes.
    pub fn code(self) -> i64 {
        match self {
            TestStatus::Passed => 0,
            TestStatus::Failed => 1,
            TestStatus::Error => 2,
        }
    }
}

impl fmt::Display for TestStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "passed" => Ok(TestStatus::Passed),
            "failed" => Ok(TestStatus::Failed),
            "error" => Ok(TestStatus::Error),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

/// A failure or error message with an optional location: a source line for
/// DSL tests, an assertion block and step for model tests.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Message {
    pub text: String,
    pub file: Option<String>,
    pub line: Option<usize>,
    pub block: Option<String>,
    pub step: Option<usize>,
}

impl Message {
    pub fn new(text: impl Into<String>) -> Self {
        Message {
            text: text.into(),
            ..Default::default()
        }
    }

    pub fn at_line(mut self, file: impl Into<String>, line: usize) -> Self {
        self.file = Some(file.into());
        self.line = Some(line);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestCaseResult {
    pub name: String,
    pub status: TestStatus,
    pub duration_ms: u64,
    pub messages: Vec<Message>,
    /// Text printed by the test, including output forwarded from model runs.
    pub output: String,
    /// Recorded sink series, model tests only.
    pub trace: Vec<SinkSeries>,
}

impl TestCaseResult {
    pub fn passed(name: impl Into<String>) -> Self {
        TestCaseResult {
            name: name.into(),
            status: TestStatus::Passed,
            duration_ms: 0,
            messages: Vec::new(),
            output: String::new(),
            trace: Vec::new(),
        }
    }

    pub fn error(name: impl Into<String>, message: Message) -> Self {
        TestCaseResult {
            status: TestStatus::Error,
            messages: vec![message],
            ..Self::passed(name)
        }
    }

    pub fn failed(name: impl Into<String>, messages: Vec<Message>) -> Self {
        assert!(!messages.is_empty(), "a failed test needs a message");
        TestCaseResult {
            status: TestStatus::Failed,
            messages,
            ..Self::passed(name)
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub passed: usize,
    pub failed: usize,
    pub error: usize,
}

impl Counts {
    pub fn total(&self) -> usize {
        self.passed + self.failed + self.error
    }

    pub fn add_status(&mut self, status: TestStatus) {
        match status {
            TestStatus::Passed => self.passed += 1,
            TestStatus::Failed => self.failed += 1,
            TestStatus::Error => self.error += 1,
        }
    }

    pub fn all_passed(&self) -> bool {
        self.failed == 0 && self.error == 0
    }

    /// 0 when everything passed, 1 on failures, 2 if anything errored.
    pub fn exit_code(&self) -> i32 {
        if self.error > 0 {
            2
        } else if self.failed > 0 {
            1
        } else {
            0
        }
    }
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, rhs: Counts) {
        self.passed += rhs.passed;
        self.failed += rhs.failed;
        self.error += rhs.error;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub suite: String,
    pub source_file: String,
    pub started_at: DateTime<Utc>,
    pub duration_ms: u64,
    pub cases: Vec<TestCaseResult>,
}

impl SuiteResult {
    pub fn counts(&self) -> Counts {
        let mut c = Counts::default();
        for case in &self.cases {
            c.add_status(case.status);
        }
        c
    }
}

pub fn total_counts<'a>(suites: impl IntoIterator<Item = &'a SuiteResult>) -> Counts {
    let mut c = Counts::default();
    for s in suites {
        c += s.counts();
    }
    c
}

/// Current time truncated to whole seconds, the resolution reports use.
pub fn now() -> DateTime<Utc> {
    let t = Utc::now();
    DateTime::from_timestamp(t.timestamp(), 0).unwrap_or(t)
}

pub(crate) fn elapsed_ms(start: std::time::Instant) -> u64 {
    start.elapsed().as_millis().try_into().unwrap_or(u64::MAX)
}
