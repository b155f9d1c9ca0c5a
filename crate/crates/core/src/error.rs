use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed XML at line {line}: {message}")]
    Xml { line: u32, message: String },

    #[error("unsupported path command '{0}'")]
    UnsupportedPathCommand(char),

    #[error("bad path data: {0}")]
    PathData(String),

    #[error("no strokes found")]
    NoStrokes,

    #[error("cannot determine the codepoint of the kanji")]
    MissingCodepoint,

    #[error("part re-union cycle for element {0:?}")]
    PartCycle(String),

    #[error("invalid decomposition of {codepoint}: {message}")]
    Structure { codepoint: char, message: String },

    #[error("empty component")]
    EmptyComponent,

    #[error("raster resolution {0} is too coarse (minimum 8)")]
    ResolutionTooCoarse(usize),

    #[error("image resolutions differ ({0} vs {1})")]
    ResolutionMismatch(usize, usize),

    #[error("both images are empty")]
    EmptyImages,

    #[error("dense oracle limited to N <= 8, got {0}")]
    OracleTooLarge(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matching program has {0} variables (cap 10000)")]
    TooManyVariables(usize),

    #[error("matching solver gave up after {nodes} nodes (best distance {best}, bound {bound})")]
    SolverLimit { nodes: usize, best: f64, bound: f64 },

    #[error("unknown kanji {0}")]
    UnknownKanji(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
