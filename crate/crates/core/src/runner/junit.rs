//! JUnit-style XML results (pytest `--junitxml`, Maven Surefire).

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{RunnerError, TestRunOutcome, TestStatus};

fn attr(element: &BytesStart<'_>, name: &[u8]) -> Result<Option<String>, RunnerError> {
    for a in element.attributes() {
        let a = a.map_err(|e| RunnerError::ResultParseError(e.to_string()))?;
        if a.key.as_ref() == name {
            let value = a.unescape_value().map_err(|e| RunnerError::ResultParseError(e.to_string()))?;
            return Ok(Some(value.into_owned()));
        }
    }
    Ok(None)
}

#[derive(Default)]
struct Case {
    id: String,
    duration_ms: u64,
    failure: Option<(String, String)>,
    skipped: bool,
}

fn start_case(e: &BytesStart<'_>) -> Result<Case, RunnerError> {
    let name = attr(e, b"name")?.unwrap_or_default();
    let class = attr(e, b"classname")?.unwrap_or_default();
    let id = if class.is_empty() { name } else { format!("{class}.{name}") };
    let seconds: f64 = attr(e, b"time")?.and_then(|t| t.trim().parse().ok()).unwrap_or(0.0);
    Ok(Case { id, duration_ms: (seconds.max(0.0) * 1000.0).round() as u64, ..Case::default() })
}

fn finish(case: Case, out: &mut Vec<TestRunOutcome>) {
    if case.skipped && case.failure.is_none() {
        return;
    }
    let (status, failure_detail) = match case.failure {
        Some((message, body)) => {
            let detail = if !message.trim().is_empty() {
                message
            } else if !body.trim().is_empty() {
                body.trim().to_string()
            } else {
                "test failed".to_string()
            };
            (TestStatus::Failed, Some(detail))
        }
        None => (TestStatus::Passed, None),
    };
    out.push(TestRunOutcome { test_id: case.id, status, failure_detail, duration_ms: case.duration_ms });
}

/// Parses one JUnit XML document. Skipped tests are omitted; `<failure>` and
/// `<error>` both mark a test failed, with the `message` attribute (or the
/// element text) as detail.
pub fn parse_junit(xml: &str) -> Result<Vec<TestRunOutcome>, RunnerError> {
    let mut reader = Reader::from_str(xml);
    reader.config_mut().trim_text(false);
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut saw_root = false;
    let mut current: Option<Case> = None;
    let mut in_failure = false;
    loop {
        let event = reader
            .read_event()
            .map_err(|e| RunnerError::ResultParseError(format!("at byte {}: {e}", reader.buffer_position())))?;
        match event {
            Event::Start(e) => {
                depth += 1;
                saw_root = true;
                match e.name().as_ref() {
                    b"testcase" => current = Some(start_case(&e)?),
                    b"failure" | b"error" => {
                        if let Some(case) = current.as_mut() {
                            let message = attr(&e, b"message")?.unwrap_or_default();
                            case.failure.get_or_insert((message, String::new()));
                            in_failure = true;
                        }
                    }
                    b"skipped" => {
                        if let Some(case) = current.as_mut() {
                            case.skipped = true;
                        }
                    }
                    _ => {}
                }
            }
            Event::Empty(e) => {
                saw_root = true;
                match e.name().as_ref() {
                    b"testcase" => finish(start_case(&e)?, &mut out),
                    b"failure" | b"error" => {
                        if let Some(case) = current.as_mut() {
                            let message = attr(&e, b"message")?.unwrap_or_default();
                            case.failure.get_or_insert((message, String::new()));
                        }
                    }
                    b"skipped" => {
                        if let Some(case) = current.as_mut() {
                            case.skipped = true;
                        }
                    }
                    _ => {}
                }
            }
            Event::Text(t) if in_failure => {
                let text = t.unescape().map_err(|e| RunnerError::ResultParseError(e.to_string()))?;
                if let Some((_, body)) = current.as_mut().and_then(|c| c.failure.as_mut()) {
                    body.push_str(&text);
                }
            }
            Event::CData(t) if in_failure => {
                if let Some((_, body)) = current.as_mut().and_then(|c| c.failure.as_mut()) {
                    body.push_str(&String::from_utf8_lossy(&t));
                }
            }
            Event::End(e) => {
                depth = depth.saturating_sub(1);
                match e.name().as_ref() {
                    b"testcase" => {
                        if let Some(case) = current.take() {
                            finish(case, &mut out);
                        }
                    }
                    b"failure" | b"error" => in_failure = false,
                    _ => {}
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !saw_root {
        return Err(RunnerError::ResultParseError("document has no root element".into()));
    }
    if depth != 0 {
        return Err(RunnerError::ResultParseError("document is truncated (unclosed elements)".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"<?xml version="1.0" encoding="utf-8"?>
<testsuites>
  <testsuite name="pytest" tests="4" failures="1">
    <testcase classname="test_calc" name="test_add" time="0.001"/>
    <testcase classname="test_calc" name="test_div" time="0.010">
      <failure message="ZeroDivisionError: division by zero">Traceback ...</failure>
    </testcase>
    <testcase classname="test_calc" name="test_skip"><skipped message="later"/></testcase>
    <testcase classname="" name="test_err"><error>boom &amp; bust</error></testcase>
  </testsuite>
</testsuites>"#;

    #[test]
    fn maps_cases_and_failures() {
        let out = parse_junit(SAMPLE).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].test_id, "test_calc.test_add");
        assert_eq!(out[0].status, TestStatus::Passed);
        assert_eq!(out[0].duration_ms, 1);
        assert_eq!(out[1].status, TestStatus::Failed);
        assert_eq!(out[1].failure_detail.as_deref(), Some("ZeroDivisionError: division by zero"));
        assert_eq!(out[2].test_id, "test_err");
        assert_eq!(out[2].failure_detail.as_deref(), Some("boom & bust"));
    }

    #[test]
    fn empty_and_truncated_documents() {
        assert!(parse_junit("<testsuites/>").unwrap().is_empty());
        assert!(parse_junit("<testsuite tests=\"0\"></testsuite>").unwrap().is_empty());
        assert!(parse_junit(&SAMPLE[..SAMPLE.len() / 2]).is_err());
        assert!(parse_junit("").is_err());
        assert!(parse_junit("<testsuite><testcase name=\"a\"></testsuite>").is_err());
    }
}
