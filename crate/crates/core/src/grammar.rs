//! Token-stream automaton that turns per-window classes into puffs and sessions.
//!
//! A puff is one or more hand-to-lip tokens, a hand-on-lip run, and a closing
//! hand-off-lip token. Inside the run, short bursts of other tokens are tolerated.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::dataset::{MiniGesture, DEFAULT_SAMPLE_RATE_HZ};
use crate::models::argmax;
use crate::numerics::Matrix;

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("token {index} starts at sample {start}, not after previous start {prev}")]
    Unordered { index: usize, prev: usize, start: usize },
    #[error("invalid grammar config: {0}")]
    Config(String),
    #[error("{rows} prediction rows but {origins} window origins")]
    Length { rows: usize, origins: usize },
    #[error("prediction matrix has {0} columns, expected 4")]
    Width(usize),
    #[error("events file line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("events I/O on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Token {
    pub class: MiniGesture,
    pub start_sample: usize,
    pub confidence: f64,
}

impl Token {
    pub fn new(class: MiniGesture, start_sample: usize, confidence: f64) -> Self {
        Self {
            class,
            start_sample,
            confidence,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PuffEvent {
    /// First hand-to-lip token start.
    pub start_sample: usize,
    /// Start of the closing hand-off-lip token.
    pub end_sample: usize,
    pub hol_duration_s: f64,
    /// Indices of the first and last token of the match.
    pub token_span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub puffs: Vec<PuffEvent>,
    pub start_sample: usize,
    pub end_sample: usize,
}

/// Whether the hand-on-lip duration bounds admit equality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundMode {
    #[default]
    Inclusive,
    Exclusive,
}

impl std::str::FromStr for BoundMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inclusive" => Ok(BoundMode::Inclusive),
            "exclusive" => Ok(BoundMode::Exclusive),
            other => Err(format!("unknown bound mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrammarConfig {
    pub sample_rate_hz: f64,
    pub min_hol_s: f64,
    pub max_hol_s: f64,
    /// Longest burst of non-HOL tokens allowed between HOL tokens.
    pub noise_tolerance: usize,
    /// Samples between consecutive token starts.
    pub stride: usize,
    pub min_puffs: usize,
    pub max_gap_s: f64,
    pub bounds: BoundMode,
}

impl Default for GrammarConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            min_hol_s: 0.5,
            max_hol_s: 3.0,
            noise_tolerance: 2,
            stride: 1,
            min_puffs: 2,
            max_gap_s: 60.0,
            bounds: BoundMode::Inclusive,
        }
    }
}

impl GrammarConfig {
    pub fn validate(&self) -> Result<(), GrammarError> {
        let bad = |m: String| Err(GrammarError::Config(m));
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return bad(format!("sample rate must be positive, got {}", self.sample_rate_hz));
        }
        if !(self.min_hol_s.is_finite() && self.max_hol_s.is_finite() && self.min_hol_s >= 0.0) {
            return bad("duration bounds must be finite and non-negative".into());
        }
        if self.min_hol_s >= self.max_hol_s {
            return bad(format!(
                "min_hol_s ({}) must be below max_hol_s ({})",
                self.min_hol_s, self.max_hol_s
            ));
        }
        if self.stride == 0 {
            return bad("stride must be at least 1".into());
        }
        if !(self.max_gap_s.is_finite() && self.max_gap_s >= 0.0) {
            return bad(format!("max_gap_s must be non-negative, got {}", self.max_gap_s));
        }
        Ok(())
    }

    pub fn hol_duration(&self, first_hol_start: usize, last_hol_start: usize) -> f64 {
        (last_hol_start - first_hol_start + self.stride) as f64 / self.sample_rate_hz
    }

    pub fn duration_ok(&self, d: f64) -> bool {
        match self.bounds {
            BoundMode::Inclusive => self.min_hol_s <= d && d <= self.max_hol_s,
            BoundMode::Exclusive => self.min_hol_s < d && d < self.max_hol_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Armed,
    InPuff { first_hol: usize, last_hol: usize, noise: usize },
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    start_index: usize,
    start_sample: usize,
    phase: Phase,
}

/// Streaming parser. Each pushed token may complete at most one puff, and a
/// completed puff never changes when more tokens arrive.
#[derive(Debug, Clone)]
pub struct Parser {
    config: GrammarConfig,
    candidates: Vec<Candidate>,
    next_index: usize,
    last_start: Option<usize>,
}

impl Parser {
    pub fn new(config: GrammarConfig) -> Result<Self, GrammarError> {
        config.validate()?;
        Ok(Self {
            config,
            candidates: Vec::new(),
            next_index: 0,
            last_start: None,
        })
    }

    pub fn config(&self) -> &GrammarConfig {
        &self.config
    }

    pub fn push(&mut self, token: &Token) -> Result<Option<PuffEvent>, GrammarError> {
        let index = self.next_index;
        if let Some(prev) = self.last_start {
            if token.start_sample <= prev {
                return Err(GrammarError::Unordered {
                    index,
                    prev,
                    start: token.start_sample,
                });
            }
        }
        self.next_index += 1;
        self.last_start = Some(token.start_sample);
        let tol = self.config.noise_tolerance;

        if token.class == MiniGesture::HandOffLip {
            let mut best: Option<PuffEvent> = None;
            for c in &self.candidates {
                if let Phase::InPuff {
                    first_hol, last_hol, ..
                } = c.phase
                {
                    let d = self.config.hol_duration(first_hol, last_hol);
                    if self.config.duration_ok(d) && best.is_none_or(|b| c.start_index < b.token_span.0) {
                        best = Some(PuffEvent {
                            start_sample: c.start_sample,
                            end_sample: token.start_sample,
                            hol_duration_s: d,
                            token_span: (c.start_index, index),
                        });
                    }
                }
            }
            self.candidates.clear();
            return Ok(best);
        }

        let mut armed_exists = false;
        self.candidates.retain_mut(|c| match (c.phase, token.class) {
            (Phase::Armed, MiniGesture::HandToLip) => {
                armed_exists = true;
                true
            }
            (Phase::Armed, MiniGesture::HandOnLip) => {
                c.phase = Phase::InPuff {
                    first_hol: token.start_sample,
                    last_hol: token.start_sample,
                    noise: 0,
                };
                true
            }
            (Phase::Armed, _) => false,
            (Phase::InPuff { first_hol, .. }, MiniGesture::HandOnLip) => {
                c.phase = Phase::InPuff {
                    first_hol,
                    last_hol: token.start_sample,
                    noise: 0,
                };
                true
            }
            (Phase::InPuff { first_hol, last_hol, noise }, _) => {
                if noise < tol {
                    c.phase = Phase::InPuff {
                        first_hol,
                        last_hol,
                        noise: noise + 1,
                    };
                    true
                } else {
                    false
                }
            }
        });
        if token.class == MiniGesture::HandToLip && !armed_exists {
            self.candidates.push(Candidate {
                start_index: index,
                start_sample: token.start_sample,
                phase: Phase::Armed,
            });
        }
        Ok(None)
    }
}

/// Left-to-right scan of the whole token stream.
pub fn parse(tokens: &[Token], config: &GrammarConfig) -> Result<Vec<PuffEvent>, GrammarError> {
    let mut parser = Parser::new(config.clone())?;
    let mut events = Vec::new();
    for t in tokens {
        if let Some(e) = parser.push(t)? {
            events.push(e);
        }
    }
    Ok(events)
}

/// Greedy grouping of consecutive puffs whose gaps stay within `max_gap_s`.
pub fn group_sessions(puffs: &[PuffEvent], config: &GrammarConfig) -> Vec<Session> {
    let mut groups: Vec<Vec<PuffEvent>> = Vec::new();
    for p in puffs {
        match groups.last_mut() {
            Some(g) => {
                let prev = g.last().expect("groups are never empty");
                let gap = p.start_sample.saturating_sub(prev.end_sample) as f64 / config.sample_rate_hz;
                if gap <= config.max_gap_s {
                    g.push(*p);
                } else {
                    groups.push(vec![*p]);
                }
            }
            None => groups.push(vec![*p]),
        }
    }
    groups
        .into_iter()
        .filter(|g| g.len() >= config.min_puffs.max(1))
        .map(|puffs| Session {
            start_sample: puffs[0].start_sample,
            end_sample: puffs[puffs.len() - 1].end_sample,
            puffs,
        })
        .collect()
}

/// One token per prediction row: argmax class, max value as confidence.
pub fn tokenize(predictions: &Matrix, origins: &[usize]) -> Result<Vec<Token>, GrammarError> {
    if predictions.cols() != 4 {
        return Err(GrammarError::Width(predictions.cols()));
    }
    if predictions.rows() != origins.len() {
        return Err(GrammarError::Length {
            rows: predictions.rows(),
            origins: origins.len(),
        });
    }
    Ok(origins
        .iter()
        .enumerate()
        .map(|(r, &start)| {
            let row = predictions.row(r);
            let k = argmax(row);
            let class = MiniGesture::from_index(k).expect("argmax of a 4-wide row");
            Token::new(class, start, row[k])
        })
        .collect())
}

/// Tokens from per-sample labels, one per sample with full confidence.
pub fn tokens_from_labels(labels: &[MiniGesture]) -> Vec<Token> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &c)| Token::new(c, i, 1.0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Puff,
    Session,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            EventKind::Puff => "puff",
            EventKind::Session => "session",
        }
    }
}

/// One row of an events CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub kind: EventKind,
    pub start_sample: usize,
    pub end_sample: usize,
    pub hol_duration_s: Option<f64>,
    pub session_id: Option<usize>,
}

pub const EVENTS_HEADER: [&str; 5] = ["kind", "start_sample", "end_sample", "hol_duration_s", "session_id"];

/// Puff rows in order, then one row per session. Session ids count from 0.
pub fn event_records(puffs: &[PuffEvent], sessions: &[Session]) -> Vec<EventRecord> {
    let mut out = Vec::with_capacity(puffs.len() + sessions.len());
    for p in puffs {
        let session_id = sessions
            .iter()
            .position(|s| s.puffs.iter().any(|q| q.token_span == p.token_span && q.start_sample == p.start_sample));
        out.push(EventRecord {
            kind: EventKind::Puff,
            start_sample: p.start_sample,
            end_sample: p.end_sample,
            hol_duration_s: Some(p.hol_duration_s),
            session_id,
        });
    }
    for (id, s) in sessions.iter().enumerate() {
        out.push(EventRecord {
            kind: EventKind::Session,
            start_sample: s.start_sample,
            end_sample: s.end_sample,
            hol_duration_s: None,
            session_id: Some(id),
        });
    }
    out
}

pub fn write_events<W: Write>(writer: W, records: &[EventRecord]) -> Result<(), GrammarError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(EVENTS_HEADER)?;
    for r in records {
        w.write_record([
            r.kind.name().to_string(),
            r.start_sample.to_string(),
            r.end_sample.to_string(),
            r.hol_duration_s.map(|d| d.to_string()).unwrap_or_default(),
            r.session_id.map(|s| s.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_events_path(path: &Path, records: &[EventRecord]) -> Result<(), GrammarError> {
    let file = std::fs::File::create(path).map_err(|source| GrammarError::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_events(std::io::BufWriter::new(file), records)
}

pub fn read_events<R: Read>(reader: R) -> Result<Vec<EventRecord>, GrammarError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(EVENTS_HEADER) {
        return Err(GrammarError::Parse {
            line: 1,
            message: format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |message: String| GrammarError::Parse { line, message };
        let kind = match &rec[0] {
            "puff" => EventKind::Puff,
            "session" => EventKind::Session,
            other => return Err(err(format!("unknown event kind `{other}`"))),
        };
        let int = |s: &str| s.parse::<usize>().map_err(|e| err(format!("`{s}`: {e}")));
        let opt = |s: &str| -> Result<Option<usize>, GrammarError> {
            if s.is_empty() {
                Ok(None)
            } else {
                int(s).map(Some)
            }
        };
        let hol = if rec[3].is_empty() {
            None
        } else {
            Some(rec[3].parse::<f64>().map_err(|e| err(format!("`{}`: {e}", &rec[3])))?)
        };
        out.push(EventRecord {
            kind,
            start_sample: int(&rec[1])?,
            end_sample: int(&rec[2])?,
            hol_duration_s: hol,
            session_id: opt(&rec[4])?,
        });
    }
    Ok(out)
}

pub fn read_events_path(path: &Path) -> Result<Vec<EventRecord>, GrammarError> {
    let file = std::fs::File::open(path).map_err(|source| GrammarError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_events(std::io::BufReader::new(file))
}
