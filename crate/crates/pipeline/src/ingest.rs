use std::collections::HashMap;
use std::path::{Path, PathBuf};

use actgen_core::text::tokenize;
use actgen_neural::Vocab;
use serde::{Deserialize, Serialize};

use crate::PipelineError;

pub const CORNELL_DELIMITER: &str = " +++$+++ ";
/// Above this share of malformed lines the corpus is rejected.
pub const MAX_MALFORMED_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    pub id: String,
    pub utterances: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CorpusReport {
    pub lines: usize,
    pub malformed: usize,
    /// Conversations with fewer than two usable utterances.
    pub dropped_conversations: usize,
    /// First few malformed locations, `file:line`.
    pub examples: Vec<String>,
}

impl CorpusReport {
    fn malformed_line(&mut self, file: &Path, line: usize) {
        self.malformed += 1;
        if self.examples.len() < 10 {
            self.examples.push(format!("{}:{line}", file.display()));
        }
    }

    pub fn pair_count(conversations: &[Conversation]) -> usize {
        conversations
            .iter()
            .map(|c| c.utterances.len().saturating_sub(1))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorpusSource {
    /// `movie_lines.txt` and `movie_conversations.txt` of the Cornell release.
    Cornell {
        lines: PathBuf,
        conversations: PathBuf,
    },
    /// One `{"id": str, "utterances": [str]}` object per line.
    Jsonl(PathBuf),
}

/// Cornell files are Latin-1; fall back to that when the bytes are not UTF-8.
fn read_text(path: &Path) -> Result<String, PipelineError> {
    let bytes = std::fs::read(path).map_err(|e| PipelineError::io(path, e))?;
    Ok(match String::from_utf8(bytes) {
        Ok(s) => s,
        Err(e) => e.into_bytes().into_iter().map(char::from).collect(),
    })
}

fn parse_cornell(
    lines_path: &Path,
    convs_path: &Path,
    report: &mut CorpusReport,
) -> Result<Vec<Conversation>, PipelineError> {
    let mut lines: HashMap<String, String> = HashMap::new();
    for (i, line) in read_text(lines_path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        report.lines += 1;
        let fields: Vec<&str> = line.splitn(5, CORNELL_DELIMITER).collect();
        if fields.len() != 5 || fields[0].trim().is_empty() {
            report.malformed_line(lines_path, i + 1);
            continue;
        }
        lines.insert(fields[0].trim().to_string(), fields[4].trim().to_string());
    }

    let mut out = Vec::new();
    for (i, line) in read_text(convs_path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        report.lines += 1;
        let fields: Vec<&str> = line.split(CORNELL_DELIMITER).collect();
        let ids = fields.get(3).and_then(|f| parse_id_list(f));
        let Some(ids) = ids.filter(|_| fields.len() == 4) else {
            report.malformed_line(convs_path, i + 1);
            continue;
        };
        let utterances: Option<Vec<String>> = ids.iter().map(|id| lines.get(id).cloned()).collect();
        let Some(utterances) = utterances else {
            report.malformed_line(convs_path, i + 1);
            continue;
        };
        let utterances: Vec<String> = utterances.into_iter().filter(|u| !u.is_empty()).collect();
        if utterances.len() < 2 {
            report.dropped_conversations += 1;
            continue;
        }
        out.push(Conversation {
            id: format!("{}:{}", fields[2].trim(), i + 1),
            utterances,
        });
    }
    Ok(out)
}

/// Parses `['L1', 'L2']`.
fn parse_id_list(field: &str) -> Option<Vec<String>> {
    let inner = field.trim().strip_prefix('[')?.strip_suffix(']')?;
    let ids: Vec<String> = inner
        .split(',')
        .map(|s| s.trim().trim_matches(|c| c == '\'' || c == '"').to_string())
        .filter(|s| !s.is_empty())
        .collect();
    (!ids.is_empty()).then_some(ids)
}

fn parse_jsonl(path: &Path, report: &mut CorpusReport) -> Result<Vec<Conversation>, PipelineError> {
    let mut out = Vec::new();
    for (i, line) in read_text(path)?.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        report.lines += 1;
        match serde_json::from_str::<Conversation>(line) {
            Ok(c) => {
                let utterances: Vec<String> = c
                    .utterances
                    .into_iter()
                    .map(|u| u.trim().to_string())
                    .filter(|u| !u.is_empty())
                    .collect();
                if utterances.len() < 2 {
                    report.dropped_conversations += 1;
                } else {
                    out.push(Conversation {
                        id: c.id,
                        utterances,
                    });
                }
            }
            Err(_) => report.malformed_line(path, i + 1),
        }
    }
    Ok(out)
}

/// Reads every source. Malformed lines are skipped and counted; more than
/// [`MAX_MALFORMED_FRACTION`] of them fails the whole corpus.
pub fn parse_corpus(
    sources: &[CorpusSource],
) -> Result<(Vec<Conversation>, CorpusReport), PipelineError> {
    let mut report = CorpusReport::default();
    let mut conversations = Vec::new();
    for source in sources {
        let mut batch = match source {
            CorpusSource::Cornell {
                lines,
                conversations,
            } => parse_cornell(lines, conversations, &mut report)?,
            CorpusSource::Jsonl(path) => parse_jsonl(path, &mut report)?,
        };
        conversations.append(&mut batch);
    }
    if report.lines > 0 && report.malformed as f64 > MAX_MALFORMED_FRACTION * report.lines as f64 {
        return Err(PipelineError::Corpus(format!(
            "{} of {} lines malformed (first: {})",
            report.malformed,
            report.lines,
            report.examples.join(", ")
        )));
    }
    Ok((conversations, report))
}

/// Vocabulary over every utterance. `max_size` includes the four reserved ids.
pub fn build_vocab(
    conversations: &[Conversation],
    max_size: usize,
) -> Result<Vocab, PipelineError> {
    let tokens: Vec<String> = conversations
        .iter()
        .flat_map(|c| c.utterances.iter())
        .flat_map(|u| tokenize(u))
        .collect();
    if tokens.is_empty() {
        return Err(PipelineError::Input("corpus has no tokens".into()));
    }
    Vocab::build(tokens.iter().map(String::as_str), max_size)
        .map_err(|e| PipelineError::Input(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn id_lists() {
        assert_eq!(
            parse_id_list("['L194', 'L195']").unwrap(),
            vec!["L194".to_string(), "L195".to_string()]
        );
        assert!(parse_id_list("L194").is_none());
        assert!(parse_id_list("[]").is_none());
    }

    #[test]
    fn vocab_by_frequency() {
        let convs = vec![Conversation {
            id: "c".into(),
            utterances: vec!["a a".into(), "b".into()],
        }];
        let v = build_vocab(&convs, 6).unwrap();
        assert_eq!((v.id("a"), v.id("b")), (4, 5));
        assert_eq!(v.id("c"), actgen_neural::vocab::UNK);
        assert!(matches!(
            build_vocab(&convs, 4),
            Err(PipelineError::Input(_))
        ));
        assert!(matches!(build_vocab(&[], 10), Err(PipelineError::Input(_))));
    }
}
