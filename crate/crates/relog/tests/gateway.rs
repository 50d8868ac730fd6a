use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use relog::gateway::remote::{RemoteConfig, RemoteProvider};
use relog::gateway::replay::{ReplayProvider, ReplayStore};
use relog::gateway::stub::{StubConfig, StubProvider};
use relog::gateway::{templates, DebugVerdict, Gateway, GatewayError, PromptEnvelope, ProviderKind, Schema};
use relog::profile::ToolchainProfile;

fn envelope(code: &str) -> PromptEnvelope {
    PromptEnvelope::new(templates::DEBUG_DIRECT, Schema::DebugVerdict)
        .slot("unit_path", "unit.rs")
        .slot("code", code)
        .slot("plan", r#"{"plan_id": "p", "revision": 0, "statements": []}"#)
        .slot("logs", "[]")
        .slot(
            "outcome",
            r#"{"status": "pass", "exit_code": 0, "events_total": 0, "events": [], "stdout_tail": "", "stderr_tail": "", "truncated": false}"#,
        )
}

/// Serves one scripted reply per request: (status, body). Collects the
/// request bodies.
fn serve(replies: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for (status, body) in replies {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut length = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        length = v.trim().parse().unwrap();
                    }
                }
            }
            let mut buf = vec![0; length];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(String::from_utf8(buf).unwrap());
            let mut stream = reader.into_inner();
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            )
            .unwrap();
        }
    });
    (format!("http://{addr}/v1"), seen)
}

fn chat(content: &str) -> String {
    serde_json::json!({"choices": [{"message": {"role": "assistant", "content": content}}]}).to_string()
}

fn remote(base_url: String) -> Gateway {
    let cfg = RemoteConfig {
        base_url,
        model: "test-model".into(),
        api_key_env: "UNUSED".into(),
        timeout_s: 10.0,
        temperature: 0.0,
    };
    Gateway::new(Box::new(RemoteProvider::with_key(cfg, "k".into())))
}

#[test]
fn remote_retries_after_prose_and_sends_the_error_back() {
    let answer = r#"Here you go: {"defect_reported": true, "location": {"file": "unit.rs", "line": 3}, "explanation": "off by one"}"#;
    let (url, seen) = serve(vec![(200, chat("I think it is line 3.")), (200, chat(answer))]);
    let gw = remote(url);
    let (verdict, resp) = gw.complete_as::<DebugVerdict>(&envelope("1 fn f() {}")).unwrap();
    assert!(verdict.defect_reported);
    assert_eq!(verdict.location.unwrap().line, Some(3));
    assert_eq!(resp.attempts, 2);
    assert_eq!(resp.provider, ProviderKind::Remote);
    let bodies = seen.lock().unwrap();
    assert_eq!(bodies.len(), 2);
    let second: serde_json::Value = serde_json::from_str(&bodies[1]).unwrap();
    assert_eq!(second["model"], "test-model");
    let messages = second["messages"].as_array().unwrap();
    assert!(messages.last().unwrap()["content"].as_str().unwrap().contains("rejected"));
}

#[test]
fn remote_gives_up_after_retry_limit() {
    let (url, _) = serve(vec![(200, chat("no")), (200, chat("still no")), (200, chat("never"))]);
    match remote(url).complete(&envelope("x")) {
        Err(GatewayError::MalformedAfterRetries { attempts, last_raw, .. }) => {
            assert_eq!(attempts, 3);
            assert_eq!(last_raw, "never");
        }
        other => panic!("expected malformed, got {other:?}"),
    }
}

#[test]
fn remote_server_error_is_unavailable() {
    let (url, _) = serve(vec![(500, "{}".into())]);
    assert!(matches!(remote(url).complete(&envelope("x")), Err(GatewayError::ProviderUnavailable(_))));
}

#[test]
fn recorded_answers_replay_and_misses_fail() {
    let dir = tempfile::tempdir().unwrap();
    let profile = ToolchainProfile::rustc();
    let stub = StubProvider::new(StubConfig::default(), &profile.render).unwrap();
    let recorder = Gateway::new(Box::new(stub)).recording_to(ReplayStore::open(dir.path()).unwrap());
    let env = envelope("1 fn f() {}");
    let live = recorder.complete(&env).unwrap();

    let replay = Gateway::new(Box::new(ReplayProvider::new(ReplayStore::open(dir.path()).unwrap())));
    let again = replay.complete(&env).unwrap();
    assert_eq!(again.payload, live.payload);
    assert_eq!(again.raw, live.raw);
    assert_eq!(again.digest, live.digest);
    assert_eq!(again.provider, ProviderKind::Replay);

    match replay.complete(&envelope("2 fn g() {}")) {
        Err(GatewayError::ReplayMiss { template_id, .. }) => assert_eq!(template_id, templates::DEBUG_DIRECT),
        other => panic!("expected a replay miss, got {other:?}"),
    }
}
