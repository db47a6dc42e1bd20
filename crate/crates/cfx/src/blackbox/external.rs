//! Bring-your-own black box over a line protocol.
//!
//! The adapter spawns a command and talks to it over stdin/stdout: a request
//! is one CSV line per instance (feature values in schema order, categoricals
//! as category names) terminated by a blank line; the reply is one class name
//! per line, in the same order and count, terminated by a blank line. The
//! child stays alive across batches.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use super::Predictor;
use crate::error::{Error, Result};
use crate::schema::{value_to_string, Feature, Instance, Schema};

pub struct ExternalPredictor {
    io: Mutex<Io>,
    features: Vec<Feature>,
    class_names: Vec<String>,
}

struct Io {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl ExternalPredictor {
    /// Spawns `command` through `/bin/sh -c` and keeps its pipes open.
    pub fn spawn(command: &str, schema: &Schema) -> Result<Self> {
        let mut child = Command::new("/bin/sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Process(format!("failed to spawn {:?}: {}", command, e)))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(ExternalPredictor {
            io: Mutex::new(Io { child, stdin, stdout }),
            features: schema.features.clone(),
            class_names: schema.class_names.clone(),
        })
    }

    fn encode_row(&self, x: &Instance) -> String {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        let record: Vec<String> = self
            .features
            .iter()
            .enumerate()
            .map(|(i, f)| value_to_string(f, &x[i]))
            .collect();
        writer.write_record(&record).expect("in-memory csv write");
        let bytes = writer.into_inner().expect("in-memory csv flush");
        let mut line = String::from_utf8(bytes).expect("csv output is utf-8");
        while line.ends_with('\n') || line.ends_with('\r') {
            line.pop();
        }
        line
    }

    /// One protocol round trip. Errors are sticky in the sense that a count
    /// mismatch leaves the stream unusable, so callers should drop the
    /// predictor after a protocol error.
    pub fn try_predict_batch(&self, xs: &[Instance]) -> Result<Vec<usize>> {
        if xs.is_empty() {
            return Ok(Vec::new());
        }
        let mut io = self.io.lock().expect("external predictor lock");
        let mut request = String::new();
        for x in xs {
            request.push_str(&self.encode_row(x));
            request.push('\n');
        }
        request.push('\n');
        io.stdin
            .write_all(request.as_bytes())
            .and_then(|_| io.stdin.flush())
            .map_err(|e| Error::Process(format!("writing request: {}", e)))?;
        let mut labels = Vec::with_capacity(xs.len());
        loop {
            let mut line = String::new();
            let read = io
                .stdout
                .read_line(&mut line)
                .map_err(|e| Error::Process(format!("reading reply: {}", e)))?;
            if read == 0 {
                return Err(Error::Protocol(format!(
                    "stream closed after {} of {} replies",
                    labels.len(),
                    xs.len()
                )));
            }
            let line = line.trim_end_matches(['\r', '\n']);
            if line.is_empty() {
                if labels.len() != xs.len() {
                    return Err(Error::Protocol(format!(
                        "reply carried {} labels for {} instances",
                        labels.len(),
                        xs.len()
                    )));
                }
                return Ok(labels);
            }
            if labels.len() == xs.len() {
                return Err(Error::Protocol(format!(
                    "reply carried more than {} labels",
                    xs.len()
                )));
            }
            let class = self
                .class_names
                .iter()
                .position(|c| c == line)
                .ok_or_else(|| Error::Protocol(format!("unknown class name {:?}", line)))?;
            labels.push(class);
        }
    }
}

impl Predictor for ExternalPredictor {
    /// Panics on process or protocol failure; a dead black box mid-search is
    /// not recoverable. Use [`ExternalPredictor::try_predict_batch`] where an
    /// error path is needed.
    fn predict(&self, x: &Instance) -> usize {
        self.try_predict_batch(std::slice::from_ref(x)).expect("external predictor")[0]
    }

    fn predict_batch(&self, xs: &[Instance]) -> Vec<usize> {
        self.try_predict_batch(xs).expect("external predictor")
    }
}

impl Drop for ExternalPredictor {
    fn drop(&mut self) {
        if let Ok(io) = self.io.get_mut() {
            let _ = io.child.kill();
            let _ = io.child.wait();
        }
    }
}
