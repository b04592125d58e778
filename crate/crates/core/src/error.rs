use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("invalid number `{token}`{}", line.map(|l| format!(" on line {l}")).unwrap_or_default())]
    Number { token: String, line: Option<usize> },
    #[error("row {row} has {found} entries, expected {expected}")]
    Shape {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("missing header line `n=<count>`")]
    MissingHeader,
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
}

impl ParseError {
    pub(crate) fn at_line(self, line: usize) -> Self {
        match self {
            ParseError::Number { token, .. } => ParseError::Number {
                token,
                line: Some(line),
            },
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("self-loop ({0}, {0}) is not allowed; self weights are implicit")]
    SelfLoop(usize),
    #[error("edge ({receiver}, {sender}) has an endpoint outside 0..{n}")]
    OutOfRange {
        receiver: usize,
        sender: usize,
        n: usize,
    },
    #[error("graphs disagree on node count: {0} vs {1}")]
    NodeCountMismatch(usize, usize),
    #[error("cannot take the union of an empty list of graphs")]
    EmptyUnion,
    #[error("window starts must begin at 0 and be strictly increasing: {0:?}")]
    BadWindows(Vec<usize>),
    #[error("link probability {0} is outside [0, 1]")]
    BadProbability(f64),
    #[error("radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("graph must have at least one node")]
    NoNodes,
    #[error("no strongly connected sample after {0} attempts")]
    RejectionExhausted(usize),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WeightError {
    #[error("weight matrix is {found}x{found} but the graph has {expected} nodes")]
    Dimension { expected: usize, found: usize },
    #[error(
        "doubly stochastic baseline weights need a symmetric graph; edge ({receiver}, {sender}) has no reverse"
    )]
    Asymmetric { receiver: usize, sender: usize },
    #[error("weight matrix is not a valid column-stochastic matrix for the graph: {0}")]
    Invalid(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
}
