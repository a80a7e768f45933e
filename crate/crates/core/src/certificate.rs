use serde::Serialize;

/// One named residual with the tolerance it was judged against.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// A list of residual checks; passes when every check passes.
#[derive(Debug, Clone, Default, Serialize)]
pub struct CertificateReport {
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl CertificateReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `value <= tolerance`. NaN values fail.
    pub fn push(&mut self, name: impl Into<String>, value: f64, tolerance: f64) {
        let pass = value <= tolerance;
        self.checks.push(Check {
            name: name.into(),
            value,
            tolerance,
            pass,
        });
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}
