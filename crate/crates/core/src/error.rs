use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("duplicate message id `{0}`")]
    DuplicateMessageId(String),

    #[error("alias `{alias}` maps to both `{first}` and `{second}`")]
    AliasCollision {
        alias: String,
        first: String,
        second: String,
    },

    #[error("alias file line {line}: {reason}")]
    AliasFormat { line: usize, reason: String },

    #[error("invalid scene detector config: {0}")]
    InvalidSceneConfig(String),

    #[error("line {line}: {reason}")]
    Record { line: usize, reason: String },

    #[error("dimension mismatch: `{first_id}` has {expected} components, `{id}` has {found}")]
    DimensionMismatch {
        first_id: String,
        expected: usize,
        id: String,
        found: usize,
    },

    #[error("non-finite value in vector `{0}`")]
    NonFinite(String),

    #[error("zero-norm vector")]
    ZeroNorm,

    #[error("centroid of an empty set")]
    EmptyCentroid,

    #[error("no candidate passes the selection filter")]
    NoCandidate,

    #[error("scene has messages without embeddings: {0:?}")]
    MissingEmbeddings(Vec<String>),

    #[error("scene has no messages")]
    EmptyScene,

    #[error("face `{face}` references unknown frame `{frame}`")]
    DanglingFrame { face: String, frame: String },

    #[error("subtitle cue {index}: {reason}")]
    Subtitle { index: String, reason: String },

    #[error("unknown speaker `{0}`")]
    UnknownSpeaker(String),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("invalid label space: {0}")]
    LabelSpace(String),

    #[error("invalid training config: {0}")]
    InvalidTrainConfig(String),

    #[error("no training examples")]
    NoExamples,

    #[error("example {index}: {reason}")]
    InvalidExample { index: usize, reason: String },

    #[error("non-finite loss at stage {stage}, epoch {epoch}, batch {batch} (last finite loss {last_loss})")]
    Diverged {
        stage: usize,
        epoch: usize,
        batch: usize,
        last_loss: f64,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("config: {0}")]
    Config(String),

    #[error("missing input file {}", .0.display())]
    MissingInput(PathBuf),

    #[error("stage `{stage}` needs `{}` from an earlier stage", .path.display())]
    MissingStageOutput { stage: &'static str, path: PathBuf },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
