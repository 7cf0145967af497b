//! Socket server: NDJSON over TCP, the same frames over WebSocket, static files over HTTP.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;

use anyhow::{Context, Result};
use datawise_core::config::EngineConfig;
use datawise_core::session::Session;
use tungstenite::Message;

use crate::ServeArgs;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

fn new_session(config: &EngineConfig) -> Result<Session> {
    let id = format!("s{}", NEXT_ID.fetch_add(1, Ordering::Relaxed));
    Ok(Session::new(id, config.clone())?)
}

/// Lines arriving while earlier ones are handled are handled as one batch,
/// so a newer completion request supersedes the queued older ones.
fn drive<W: Write>(session: &mut Session, lines: mpsc::Receiver<String>, mut out: W, coalesce: bool) -> Result<()> {
    while let Ok(first) = lines.recv() {
        let mut batch = vec![first];
        if coalesce {
            batch.extend(lines.try_iter());
        }
        for reply in session.handle_lines(&batch) {
            writeln!(out, "{reply}")?;
        }
        out.flush()?;
    }
    Ok(())
}

fn pump<R: BufRead + Send + 'static>(reader: R) -> mpsc::Receiver<String> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in reader.lines() {
            let Ok(line) = line else { break };
            if tx.send(line).is_err() {
                break;
            }
        }
    });
    rx
}

pub fn stdio(config: EngineConfig, sequential: bool) -> Result<()> {
    let mut session = new_session(&config)?;
    let stdin = BufReader::new(std::io::stdin());
    drive(&mut session, pump(stdin), std::io::stdout().lock(), !sequential)
}

pub fn listen(args: &ServeArgs, config: EngineConfig) -> Result<()> {
    let listener = TcpListener::bind(&args.addr).with_context(|| format!("cannot bind {}", args.addr))?;
    eprintln!("listening on {}", listener.local_addr()?);
    let config = Arc::new(config);
    let coalesce = !args.sequential;
    let root = match &args.static_dir {
        Some(d) => Some(Arc::new(d.canonicalize().with_context(|| format!("no static dir {}", d.display()))?)),
        None => None,
    };
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                eprintln!("accept failed: {e}");
                continue;
            }
        };
        let config = Arc::clone(&config);
        let root = root.clone();
        thread::spawn(move || {
            if let Err(e) = connection(stream, &config, root.as_deref().map(PathBuf::as_path), coalesce) {
                eprintln!("connection closed: {e:#}");
            }
        });
    }
    Ok(())
}

enum Kind {
    Ndjson,
    WebSocket,
    Http,
}

/// Looks at the request head without consuming it.
fn sniff(stream: &TcpStream) -> Result<Kind> {
    let mut buf = [0u8; 4096];
    loop {
        let n = stream.peek(&mut buf)?;
        if n == 0 {
            return Ok(Kind::Ndjson);
        }
        let head = &buf[..n];
        if !b"GET ".starts_with(&head[..n.min(4)]) {
            return Ok(Kind::Ndjson);
        }
        if n >= 4 {
            let text = String::from_utf8_lossy(head).to_ascii_lowercase();
            if text.contains("\r\n\r\n") || n == buf.len() {
                return Ok(if text.contains("upgrade: websocket") { Kind::WebSocket } else { Kind::Http });
            }
        }
        thread::sleep(std::time::Duration::from_millis(5));
    }
}

fn connection(stream: TcpStream, config: &EngineConfig, root: Option<&Path>, coalesce: bool) -> Result<()> {
    match sniff(&stream)? {
        Kind::Ndjson => {
            let mut session = new_session(config)?;
            let reader = BufReader::new(stream.try_clone()?);
            drive(&mut session, pump(reader), stream, coalesce)
        }
        Kind::WebSocket => websocket(stream, config),
        Kind::Http => static_file(stream, root),
    }
}

fn websocket(stream: TcpStream, config: &EngineConfig) -> Result<()> {
    let mut ws = tungstenite::accept(stream).map_err(|e| anyhow::anyhow!("handshake failed: {e}"))?;
    let mut session = new_session(config)?;
    loop {
        let msg = match ws.read() {
            Ok(m) => m,
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(e.into()),
        };
        let text = match &msg {
            Message::Text(t) => t.as_str().to_string(),
            Message::Binary(b) => String::from_utf8_lossy(b).into_owned(),
            Message::Close(_) => return Ok(()),
            _ => continue,
        };
        // One frame may carry several newline-separated messages.
        let lines: Vec<&str> = text.lines().collect();
        for reply in session.handle_lines(&lines) {
            ws.send(Message::text(reply))?;
        }
    }
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    }
}

/// Maps a request path into `root`, refusing anything that climbs out of it.
pub(crate) fn resolve(root: &Path, url_path: &str) -> Option<PathBuf> {
    let path = url_path.split(['?', '#']).next().unwrap_or("");
    let mut out = root.to_path_buf();
    for c in Path::new(path.trim_start_matches('/')).components() {
        match c {
            Component::Normal(part) => out.push(part),
            Component::CurDir => {}
            _ => return None,
        }
    }
    if out.is_dir() {
        out.push("index.html");
    }
    let real = out.canonicalize().ok()?;
    real.starts_with(root).then_some(real)
}

fn static_file(mut stream: TcpStream, root: Option<&Path>) -> Result<()> {
    let mut head = Vec::new();
    let mut byte = [0u8; 1];
    while !head.ends_with(b"\r\n\r\n") && head.len() < 16 * 1024 {
        if stream.read(&mut byte)? == 0 {
            break;
        }
        head.push(byte[0]);
    }
    let head = String::from_utf8_lossy(&head);
    let target = head.lines().next().and_then(|l| l.split_whitespace().nth(1)).unwrap_or("/");
    let found = root.and_then(|r| resolve(r, target)).and_then(|p| std::fs::read(&p).ok().map(|b| (p, b)));
    match found {
        Some((path, body)) => {
            write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: {}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                content_type(&path),
                body.len()
            )?;
            stream.write_all(&body)?;
        }
        None => {
            let body = b"not found\n";
            write!(
                stream,
                "HTTP/1.1 404 Not Found\r\nContent-Type: text/plain\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
                body.len()
            )?;
            stream.write_all(body)?;
        }
    }
    stream.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn traversal_is_refused() {
        let dir = std::env::temp_dir().join(format!("datawise-static-{}", std::process::id()));
        std::fs::create_dir_all(dir.join("sub")).unwrap();
        std::fs::write(dir.join("index.html"), "hi").unwrap();
        let root = dir.canonicalize().unwrap();
        assert_eq!(resolve(&root, "/"), Some(root.join("index.html")));
        assert_eq!(resolve(&root, "/index.html?x=1"), Some(root.join("index.html")));
        assert_eq!(resolve(&root, "/../etc/passwd"), None);
        assert_eq!(resolve(&root, "/sub/../../x"), None);
        assert_eq!(resolve(&root, "/missing.js"), None);
    }
}
