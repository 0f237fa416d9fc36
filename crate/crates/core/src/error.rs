use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("attribute space document is malformed: {0}")]
    SpaceDocument(String),
    #[error("duplicate attribute name `{0}`")]
    DuplicateAttribute(String),
    #[error("attribute `{0}` has an empty domain")]
    EmptyDomain(String),
    #[error("attribute `{attr}` lists value `{value}` twice")]
    DuplicateDomainValue { attr: String, value: String },
    #[error("unknown attribute class `{0}`")]
    UnknownClass(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("value `{value}` is not in the domain of `{attr}`")]
    OutOfDomain { attr: String, value: String },
    #[error("attribute `{attr}` is {found}-class, expected {expected}-class")]
    WrongClass {
        attr: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("attribute `{0}` assigned more than once")]
    DuplicatePair(String),
    #[error("duplicate identifier `{0}`")]
    DuplicateId(String),
    #[error("public key already bound to subject `{0}`")]
    DuplicateKey(String),
    #[error("unknown subject `{0}`")]
    UnknownSubject(String),
    #[error("unknown object `{0}`")]
    UnknownObject(String),
    #[error("attribute `{0}` is not assigned on the subject")]
    NotAssigned(String),
    #[error("credential must name at least one attribute")]
    EmptyCredential,
    #[error("policy rule `{0}` has no constraints")]
    EmptyRule(String),
    #[error("sequence number {got} does not follow {last}")]
    NonMonotoneSeq { last: u64, got: u64 },

    #[error("seed must be 32 bytes, got {0}")]
    SeedLength(usize),
    #[error("reserved byte 0x{byte:02X} in `{text}`")]
    ReservedByte { byte: u8, text: String },
    #[error("malformed key material: {0}")]
    KeyMaterial(String),

    #[error("credential signature does not verify")]
    ForgedCredential,
    #[error("credential subject space is empty")]
    InvalidConfiguration,
    #[error("no subject holds at least {0} attributes")]
    EmptyCohort(usize),
    #[error("population is empty")]
    EmptyPopulation,

    #[error("rule `{rule}` references attribute `{attr}` absent from the weight list")]
    UnweightedAttribute { rule: String, attr: String },

    #[error("unknown test case `{0}`")]
    UnknownCase(String),
    #[error("unknown variant `{0}`")]
    UnknownVariant(String),
    #[error("scale must lie in (0, 1], got {0}")]
    Scale(f64),
    #[error("request stream is empty")]
    EmptyStream,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("corrupt file: {0}")]
    Corrupt(String),
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
