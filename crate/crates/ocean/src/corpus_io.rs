//! JSONL corpus files: one session object per line.

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ocean_core::corpus::{Session, SessionError};
use ocean_core::inventory::Inventory;
use ocean_core::traits::Domain;

#[derive(Debug, thiserror::Error)]
pub enum CorpusIoError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate session id {0:?}")]
    DuplicateSessionId(String),
    #[error("session {session_id}: item answers give {dimension} off by {delta}")]
    InconsistentGroundTruth { session_id: String, dimension: Domain, delta: f64 },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusIoError + '_ {
    move |source| CorpusIoError::Io { path: path.display().to_string(), source }
}

/// Reads sessions in file order. Blank lines are ignored.
pub fn load_sessions(path: &Path, inventory: &Inventory) -> Result<Vec<Session>, CorpusIoError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let session: Session = serde_json::from_str(&line)
            .map_err(|e| CorpusIoError::MalformedRecord { line: line_no, reason: e.to_string() })?;
        match session.validate(inventory) {
            Ok(()) => {}
            Err(SessionError::InconsistentGroundTruth { domain, delta }) => {
                return Err(CorpusIoError::InconsistentGroundTruth {
                    session_id: session.session_id,
                    dimension: domain,
                    delta,
                })
            }
            Err(e) => return Err(CorpusIoError::MalformedRecord { line: line_no, reason: e.to_string() }),
        }
        if !seen.insert(session.session_id.clone()) {
            return Err(CorpusIoError::DuplicateSessionId(session.session_id));
        }
        out.push(session);
    }
    Ok(out)
}

/// Serializes sessions one per line, in order.
pub fn sessions_to_jsonl(sessions: &[Session]) -> String {
    let mut out = String::new();
    for s in sessions {
        out.push_str(&serde_json::to_string(s).expect("sessions serialize"));
        out.push('\n');
    }
    out
}

/// Writes `sessions` atomically (temp file in the target directory, then rename).
pub fn save_sessions(path: &Path, sessions: &[Session]) -> Result<(), CorpusIoError> {
    write_atomic(path, sessions_to_jsonl(sessions).as_bytes()).map_err(io_err(path))
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ocean_core::corpus::Utterance;
    use ocean_core::traits::TraitScores;
    use std::collections::BTreeMap;

    fn sample(id: &str) -> Session {
        Session {
            session_id: id.into(),
            client_id: "c1".into(),
            counselor_id: "k1".into(),
            utterances: vec![Utterance::counselor("How are you?"), Utterance::client("Tired, honestly.")],
            ground_truth: Some(TraitScores::from_array([3.0, 2.5, 4.0, 3.25, 1.75])),
            item_ground_truth: None,
        }
    }

    fn write(dir: &Path, text: &str) -> std::path::PathBuf {
        let p = dir.join("c.jsonl");
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        let sessions = vec![sample("s1"), sample("s2")];
        save_sessions(&p, &sessions).unwrap();
        let inv = Inventory::bfi2().unwrap();
        assert_eq!(load_sessions(&p, &inv).unwrap(), sessions);
        assert_eq!(fs::read_to_string(&p).unwrap(), sessions_to_jsonl(&sessions));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), &sessions_to_jsonl(&[sample("s1"), sample("s1")]));
        let err = load_sessions(&p, &Inventory::bfi2().unwrap()).unwrap_err();
        assert!(matches!(err, CorpusIoError::DuplicateSessionId(id) if id == "s1"));
    }

    #[test]
    fn inconsistent_ground_truth_rejected() {
        let mut s = sample("s1");
        s.item_ground_truth = Some((1..=60u8).map(|i| (i, 3u8)).collect::<BTreeMap<_, _>>());
        s.ground_truth = Some(TraitScores::from_array([3.0, 3.0, 4.0, 3.0, 3.0]));
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), &sessions_to_jsonl(&[s]));
        let err = load_sessions(&p, &Inventory::bfi2().unwrap()).unwrap_err();
        match err {
            CorpusIoError::InconsistentGroundTruth { session_id, dimension, delta } => {
                assert_eq!(session_id, "s1");
                assert_eq!(dimension, Domain::Extraversion);
                assert!((delta.abs() - 1.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn malformed_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let good = sessions_to_jsonl(&[sample("s1")]);
        let p = write(dir.path(), &format!("{good}\n{{\"session_id\": 5}}\n"));
        let err = load_sessions(&p, &Inventory::bfi2().unwrap()).unwrap_err();
        assert!(matches!(err, CorpusIoError::MalformedRecord { line: 3, .. }), "{err}");
    }

    #[test]
    fn empty_utterance_rejected() {
        let mut s = sample("s1");
        s.utterances.push(Utterance::client("   "));
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), &sessions_to_jsonl(&[s]));
        assert!(matches!(
            load_sessions(&p, &Inventory::bfi2().unwrap()),
            Err(CorpusIoError::MalformedRecord { line: 1, .. })
        ));
    }
}
