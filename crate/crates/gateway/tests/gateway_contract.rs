use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Barrier, Mutex};
use std::thread;
use std::time::Duration;

use thoughtlens_gateway::mock::MockProvider;
use thoughtlens_gateway::{
    Gateway, GatewayConfig, GatewayError, HttpProvider, JudgeRequest, Provider, ProviderError,
    ProviderReply, Request, RetryPolicy, Service, TemplateRef,
};

fn judge(prompt: &str) -> Request {
    Request::Judge(JudgeRequest {
        template: TemplateRef::new("extract-items", "v1"),
        prompt: prompt.into(),
        model_id: "judge-model".into(),
        params: Default::default(),
    })
}

fn config(max_in_flight: usize, attempts: u32) -> GatewayConfig {
    GatewayConfig {
        max_in_flight,
        retry: RetryPolicy::no_delay(attempts),
        cache_dir: None,
    }
}

#[test]
fn second_identical_call_is_a_byte_identical_cache_hit() {
    let mock = Arc::new(MockProvider::new(|r| {
        Ok(ProviderReply::text(format!("echo:{}", r.model_id())))
    }));
    let gw = Gateway::new(mock.clone(), config(4, 1)).unwrap();
    let first = gw.complete(&judge("p")).unwrap();
    let second = gw.complete(&judge("p")).unwrap();
    assert!(!first.cache_hit);
    assert_eq!(first.attempts, 1);
    assert!(second.cache_hit);
    assert_eq!(first.body.as_bytes(), second.body.as_bytes());
    assert_eq!(mock.calls(), 1);
}

#[test]
fn concurrent_identical_requests_make_one_upstream_call() {
    let mock = Arc::new(MockProvider::fixed("[]").with_latency(Duration::from_millis(100)));
    let gw = Arc::new(Gateway::new(mock.clone(), config(8, 1)).unwrap());
    let n = 16;
    let barrier = Arc::new(Barrier::new(n));
    let handles: Vec<_> = (0..n)
        .map(|_| {
            let gw = gw.clone();
            let barrier = barrier.clone();
            thread::spawn(move || {
                barrier.wait();
                gw.complete(&judge("same")).unwrap()
            })
        })
        .collect();
    let responses: Vec<_> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    assert_eq!(mock.calls(), 1);
    assert_eq!(responses.iter().filter(|r| !r.cache_hit).count(), 1);
    assert!(responses.iter().all(|r| r.body == "[]"));
}

#[test]
fn rate_limit_then_success_retries_once() {
    let mock = Arc::new(MockProvider::scripted(vec![
        Err(ProviderError::RateLimited { retry_after: None }),
        Ok(ProviderReply::text("ok")),
    ]));
    let slept = Arc::new(Mutex::new(Vec::new()));
    let log = slept.clone();
    let gw = Gateway::new(
        mock.clone(),
        GatewayConfig {
            max_in_flight: 1,
            retry: RetryPolicy {
                max_attempts: 3,
                base_delay: Duration::from_millis(250),
                max_delay: Duration::from_secs(1),
                jitter: true,
            },
            cache_dir: None,
        },
    )
    .unwrap()
    .with_sleeper(move |d| log.lock().unwrap().push(d));
    let resp = gw.complete(&judge("p")).unwrap();
    assert_eq!(resp.body, "ok");
    assert_eq!(resp.attempts, 2);
    assert_eq!(mock.calls(), 2);
    let slept = slept.lock().unwrap();
    assert_eq!(slept.len(), 1);
    assert!(slept[0] >= Duration::from_millis(125) && slept[0] <= Duration::from_millis(250));
}

#[test]
fn auth_failures_are_not_retried() {
    let mock = Arc::new(MockProvider::scripted(vec![Err(ProviderError::Auth(
        "bad key".into(),
    ))]));
    let gw = Gateway::new(mock.clone(), config(1, 5)).unwrap();
    assert!(matches!(gw.complete(&judge("p")), Err(GatewayError::Auth(_))));
    assert_eq!(mock.calls(), 1);
}

#[test]
fn persistent_failure_exhausts_retries_and_is_not_cached() {
    let mock = Arc::new(MockProvider::new(|_| {
        Err(ProviderError::Status {
            status: 503,
            message: "down".into(),
        })
    }));
    let gw = Gateway::new(mock.clone(), config(1, 3)).unwrap();
    match gw.complete(&judge("p")) {
        Err(GatewayError::ExhaustedRetries { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("unexpected {other:?}"),
    }
    assert!(gw.cache().is_empty());
    let _ = gw.complete(&judge("p"));
    assert_eq!(mock.calls(), 6);
}

#[test]
fn in_flight_upstream_calls_never_exceed_the_limit() {
    let mock = Arc::new(MockProvider::fixed("x").with_latency(Duration::from_millis(30)));
    let limit = 3;
    let gw = Arc::new(Gateway::new(mock.clone(), config(limit, 1)).unwrap());
    let handles: Vec<_> = (0..24)
        .map(|i| {
            let gw = gw.clone();
            thread::spawn(move || gw.complete(&judge(&format!("prompt {i}"))).unwrap())
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    assert_eq!(mock.calls(), 24);
    assert!(mock.peak_in_flight() <= limit, "peak {}", mock.peak_in_flight());
    assert_eq!(mock.peak_in_flight(), limit);
}

#[test]
fn disk_cache_survives_gateway_restart() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = GatewayConfig {
        cache_dir: Some(dir.path().to_path_buf()),
        ..config(2, 1)
    };
    let first = Arc::new(MockProvider::fixed("stored"));
    Gateway::new(first, cfg.clone())
        .unwrap()
        .complete(&judge("p"))
        .unwrap();

    let second = Arc::new(MockProvider::fixed("different"));
    let gw = Gateway::new(second.clone(), cfg).unwrap();
    let resp = gw.complete(&judge("p")).unwrap();
    assert!(resp.cache_hit);
    assert_eq!(resp.body, "stored");
    assert_eq!(second.calls(), 0);
}

#[test]
fn invalid_requests_never_reach_the_provider() {
    let mock = Arc::new(MockProvider::fixed("x"));
    let gw = Gateway::new(mock.clone(), config(1, 1)).unwrap();
    let bad = Request::Judge(JudgeRequest {
        template: TemplateRef::new("t", ""),
        prompt: "p".into(),
        model_id: "m".into(),
        params: Default::default(),
    });
    assert!(matches!(
        gw.complete(&bad),
        Err(GatewayError::InvalidRequest(_))
    ));
    assert_eq!(mock.calls(), 0);
}

/// Serves the given raw HTTP responses, one per connection.
fn serve(responses: Vec<String>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for resp in responses {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut content_length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    content_length = v.trim().parse().unwrap();
                }
                if line == "\r\n" || line.is_empty() {
                    break;
                }
            }
            let mut body = vec![0; content_length];
            reader.read_exact(&mut body).unwrap();
            stream.write_all(resp.as_bytes()).unwrap();
        }
    });
    format!("http://{addr}")
}

fn http_response(status: &str, extra_headers: &str, body: &str) -> String {
    format!(
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\n{extra_headers}Content-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
}

#[test]
fn http_adapter_retries_429_then_succeeds() {
    let ok = r#"{"choices":[{"message":{"content":"[\"desk\"]"}}],"usage":{"prompt_tokens":5,"completion_tokens":2,"total_tokens":7}}"#;
    let url = serve(vec![
        http_response("429 Too Many Requests", "Retry-After: 0\r\n", "{}"),
        http_response("200 OK", "", ok),
    ]);
    let provider = HttpProvider::new(Service::Judge, url, "secret", Duration::from_secs(5)).unwrap();
    let gw = Gateway::new(Arc::new(provider), config(1, 3)).unwrap();
    let resp = gw.complete(&judge("p")).unwrap();
    assert_eq!(resp.attempts, 2);
    assert_eq!(resp.body, "[\"desk\"]");
    assert_eq!(resp.usage.unwrap().total, 7);
}

#[test]
fn http_adapter_maps_401_to_auth() {
    let url = serve(vec![http_response("401 Unauthorized", "", "{\"error\":\"nope\"}")]);
    let provider = HttpProvider::new(Service::Judge, url, "bad", Duration::from_secs(5)).unwrap();
    assert!(matches!(
        provider.send(&judge("p")),
        Err(ProviderError::Auth(_))
    ));
}
