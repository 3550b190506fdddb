use std::fmt;

/// Position of a token in the source text.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Span {
    /// Byte offset.
    pub offset: usize,
    /// 1-based line.
    pub line: u32,
    /// 1-based column, counted in characters.
    pub column: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

/// Stable diagnostic codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Code {
    /// Unexpected or malformed token.
    Syntax,
    UnknownGroup,
    UnknownResource,
    /// Undeclared action or condition.
    UnknownLeaf,
    Arity,
    ParallelThreshold,
    Duplicate,
    /// Missing, unknown or out-of-range parameter.
    InvalidParameter,
    /// The same declared action appears at two leaves.
    ReusedAction,
    /// Two branches of one Parallel may use the same resource unguarded.
    ResourceConflict,
}

impl Code {
    pub fn as_str(self) -> &'static str {
        match self {
            Code::Syntax => "E001",
            Code::UnknownGroup => "E002",
            Code::UnknownResource => "E003",
            Code::UnknownLeaf => "E004",
            Code::Arity => "E005",
            Code::ParallelThreshold => "E006",
            Code::Duplicate => "E007",
            Code::InvalidParameter => "E008",
            Code::ReusedAction => "E009",
            Code::ResourceConflict => "W001",
        }
    }

    pub fn severity(self) -> Severity {
        match self {
            Code::ResourceConflict => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub code: Code,
    pub span: Span,
    pub message: String,
}

impl Diagnostic {
    pub fn new(code: Code, span: Span, message: impl Into<String>) -> Self {
        Diagnostic {
            code,
            span,
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.code.severity() == Severity::Error
    }

    /// `file:line:col: code: message`
    pub fn render(&self, file: &str) -> String {
        format!(
            "{file}:{}:{}: {}: {}",
            self.span.line, self.span.column, self.code, self.message
        )
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: {}: {}",
            self.span.line, self.span.column, self.code, self.message
        )
    }
}
