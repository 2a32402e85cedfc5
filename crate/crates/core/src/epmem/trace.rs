//! NDJSON trace files and event files.
//!
//! Line 1 of a trace is the header record, every further line one frame:
//!
//! ```text
//! {"type":"header","format_version":1,"task":"canonical-wrap","frame_rate":90.0,"entities":[...]}
//! {"type":"frame","t":0.0,"poses":{...},"twists":{...},"contacts":[...],"hands":[...],"gaze":{...},"sleeping":[...]}
//! ```
//!
//! Event files hold one event record per line.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EntityDescriptor, EntitySet, Event, Frame};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename = "header")]
pub struct TraceHeader {
    pub format_version: u32,
    pub task: String,
    pub frame_rate: f64,
    pub entities: Vec<EntityDescriptor>,
    /// Seed the trace was generated with, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl TraceHeader {
    pub fn validate(&self) -> Result<EntitySet> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::validation(format!(
                "unsupported trace format_version {}",
                self.format_version
            )));
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return Err(Error::validation(format!("invalid frame_rate {}", self.frame_rate)));
        }
        if self.task.is_empty() {
            return Err(Error::validation("trace header: empty task name"));
        }
        EntitySet::new(self.entities.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub frames: Vec<Frame>,
}

impl Trace {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for f in &self.frames {
            serde_json::to_writer(&mut w, f)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_ndjson(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Trace> {
        let f = std::fs::File::open(path)?;
        let mut r = TraceReader::new(BufReader::new(f), &path.display().to_string())?;
        let frames = r.by_ref().collect::<Result<Vec<_>>>()?;
        Ok(Trace {
            header: r.header,
            frames,
        })
    }

    pub fn from_ndjson(text: &str) -> Result<Trace> {
        let mut r = TraceReader::new(text.as_bytes(), "<memory>")?;
        let frames = r.by_ref().collect::<Result<Vec<_>>>()?;
        Ok(Trace {
            header: r.header,
            frames,
        })
    }
}

/// Streaming reader: the header is parsed eagerly, frames on iteration.
pub struct TraceReader<R> {
    pub header: TraceHeader,
    lines: std::io::Lines<R>,
    line_no: usize,
    origin: String,
}

fn json_error(origin: &str, line: usize, e: &serde_json::Error) -> Error {
    Error::Parse {
        path: origin.to_string(),
        line,
        column: e.column(),
        message: e.to_string(),
    }
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(reader: R, origin: &str) -> Result<Self> {
        let mut lines = reader.lines();
        let first = lines.next().ok_or_else(|| Error::Parse {
            path: origin.to_string(),
            line: 1,
            column: 1,
            message: "missing header line".into(),
        })??;
        let header: TraceHeader = serde_json::from_str(&first).map_err(|e| json_error(origin, 1, &e))?;
        header.validate()?;
        Ok(TraceReader {
            header,
            lines,
            line_no: 1,
            origin: origin.to_string(),
        })
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<Frame>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            return Some(serde_json::from_str(&line).map_err(|e| json_error(&self.origin, self.line_no, &e)));
        }
    }
}

pub fn write_events<'a, W: Write>(mut w: W, events: impl IntoIterator<Item = &'a Event>) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn events_to_ndjson<'a>(events: impl IntoIterator<Item = &'a Event>) -> String {
    let mut buf = Vec::new();
    write_events(&mut buf, events).expect("in-memory write");
    String::from_utf8(buf).expect("json is utf-8")
}

pub fn read_events<R: Read>(reader: R, origin: &str) -> Result<Vec<Event>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: Event = serde_json::from_str(&line).map_err(|e| json_error(origin, i + 1, &e))?;
        e.validate()?;
        out.push(e);
    }
    Ok(out)
}
