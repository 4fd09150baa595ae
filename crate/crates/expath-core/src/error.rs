use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown entity: {0}")]
    UnknownEntity(String),

    #[error("unknown relation: {0}")]
    UnknownRelation(String),

    #[error("facts not present in the train split: {0}")]
    MissingFacts(String),

    #[error("head relation {0} has no train facts")]
    HeadRelationAbsent(String),

    #[error("self-loop prediction (head == tail) is unsupported")]
    SelfLoop,

    #[error("entity {0} would lose every incident fact")]
    DegenerateEntity(String),

    #[error("train split is empty")]
    EmptyTrainSplit,

    #[error("prediction is not in the test split: {0}")]
    NotInTestSplit(String),

    #[error("no eligible targets (reciprocal rank > 0.5); train the model longer")]
    NoEligibleTargets,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("rule parse error at position {position}: {message}")]
    RuleParse { position: usize, message: String },

    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
