//! The HTTP provider against a small in-process server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use sentecon::embedding::{embed_texts, EmbedError, EmbeddingProvider, ServiceConfig, ServiceProvider};
use serde_json::{json, Value};

const DIM: usize = 3;

fn vector_for(text: &str) -> Vec<f32> {
    vec![text.len() as f32, 1.0, text.bytes().next().unwrap_or(0) as f32]
}

struct Server {
    url: String,
    requests: Arc<AtomicUsize>,
}

/// Serves `{"texts": [...]}` requests. The first `fail_first` requests get
/// a 500; `wrong_dim` makes every successful reply claim dimension 4
/// (after discovery).
fn serve(fail_first: usize, wrong_dim: bool) -> Server {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/embed", listener.local_addr().unwrap());
    let requests = Arc::new(AtomicUsize::new(0));
    let counter = requests.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let counter = counter.clone();
            std::thread::spawn(move || handle(stream, &counter, fail_first, wrong_dim));
        }
    });
    Server { url, requests }
}

fn handle(stream: TcpStream, counter: &AtomicUsize, fail_first: usize, wrong_dim: bool) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut out = stream;
    loop {
        let mut content_length = 0;
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        loop {
            line.clear();
            if reader.read_line(&mut line).unwrap_or(0) == 0 {
                return;
            }
            let l = line.trim_end();
            if l.is_empty() {
                break;
            }
            if let Some((k, v)) = l.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    content_length = v.trim().parse().unwrap();
                }
            }
        }
        let mut body = vec![0; content_length];
        reader.read_exact(&mut body).unwrap();
        let n = counter.fetch_add(1, Ordering::SeqCst);
        let (status, reply) = if n < fail_first {
            ("500 Internal Server Error", "{}".to_string())
        } else {
            let req: Value = serde_json::from_slice(&body).unwrap();
            let texts: Vec<String> = serde_json::from_value(req["texts"].clone()).unwrap();
            let dim = if wrong_dim && !texts.is_empty() { DIM + 1 } else { DIM };
            let vectors: Vec<Vec<f32>> = texts.iter().map(|t| vector_for(t)).collect();
            ("200 OK", json!({ "dim": dim, "vectors": vectors }).to_string())
        };
        let head = format!(
            "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n",
            reply.len()
        );
        if out
            .write_all(head.as_bytes())
            .and_then(|_| out.write_all(reply.as_bytes()))
            .is_err()
        {
            return;
        }
    }
}

fn fast(retries: u32, batch_size: usize) -> ServiceConfig {
    ServiceConfig {
        retries,
        backoff: Duration::from_millis(1),
        timeout: Duration::from_secs(5),
        batch_size,
    }
}

#[test]
fn discovers_dimension_and_embeds_in_order() {
    let server = serve(0, false);
    let p = ServiceProvider::connect(&server.url, fast(0, 2)).unwrap();
    assert_eq!(p.dim(), DIM);
    assert!(p.id().starts_with("service:http://127.0.0.1:"));
    let texts = ["a", "bb", "ccc", "dddd", "e"];
    let got = embed_texts(&p, &texts).unwrap();
    let want: Vec<Vec<f32>> = texts.iter().map(|t| vector_for(t)).collect();
    assert_eq!(got, want);
}

#[test]
fn retries_transient_failures() {
    let server = serve(2, false);
    let p = ServiceProvider::connect(&server.url, fast(3, 64)).unwrap();
    assert_eq!(p.embed("xyz").unwrap(), vector_for("xyz"));
    // two failures + discovery + one embed
    assert_eq!(server.requests.load(Ordering::SeqCst), 4);
}

#[test]
fn gives_up_after_retries() {
    let server = serve(usize::MAX, false);
    match ServiceProvider::connect(&server.url, fast(2, 64)) {
        Err(EmbedError::Transport { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("expected a transport error, got {other:?}"),
    }
    assert_eq!(server.requests.load(Ordering::SeqCst), 3);
}

#[test]
fn dimension_change_is_an_error() {
    let server = serve(0, true);
    let p = ServiceProvider::connect(&server.url, fast(0, 64)).unwrap();
    assert_eq!(
        p.embed("a"),
        Err(EmbedError::DimMismatch {
            expected: DIM,
            got: DIM + 1
        })
    );
}

#[test]
fn unreachable_service() {
    // bind then drop to get a port with nothing listening
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let url = format!("http://127.0.0.1:{port}/embed");
    assert!(matches!(
        ServiceProvider::connect(url, fast(1, 64)),
        Err(EmbedError::Transport { attempts: 2, .. })
    ));
}
