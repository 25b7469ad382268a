//! HTTP endpoints behind the seed-review tool.
//!
//! - `GET /frames/{index}` returns the frame as PNG.
//! - `GET /candidates?frame={index}` returns that frame's ingested
//!   detections as JSON lines (default: the first readable frame).
//! - `GET /seeds` returns the current seeds file.
//! - `POST /seeds` takes seed records as JSON lines and writes them as the
//!   reviewed seeds file with provenance `human_reviewed`.

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use herdpipe_core::ingest::SequenceLayout;
use herdpipe_core::io::{parse_jsonl, read_detections, read_seeds, seeds_to_records, to_jsonl, write_seeds};
use herdpipe_core::overlay::encode_png;
use herdpipe_core::{Provenance, Seed, SeedSet};
use tiny_http::{Header, Method, Request, Response, Server};

use crate::error::CliError;
use crate::ledger::RootLock;
use crate::{Context, Slot, SEEDS_REVIEWED};

pub struct ReviewServer {
    server: Arc<Server>,
    worker: Option<JoinHandle<()>>,
    addr: SocketAddr,
    _lock: RootLock,
}

impl ReviewServer {
    /// Binds `addr` (port 0 picks a free port) and serves on a background
    /// thread. The layout root stays locked while the server runs.
    pub fn start(ctx: &Context, addr: &str) -> Result<Self, CliError> {
        let layout_dir = ctx.path(Slot::Layout);
        if !layout_dir.exists() {
            return Err(CliError::Dependency { stage: "review-serve".into(), path: layout_dir });
        }
        let layout = SequenceLayout::open(&layout_dir).map_err(|e| CliError::stage("review-serve", e))?;
        let lock = RootLock::acquire(ctx.root())?;
        let server = Server::http(addr).map_err(|e| CliError::Config(format!("cannot bind {addr}: {e}")))?;
        let bound = server.server_addr().to_ip().ok_or_else(|| CliError::Config(format!("{addr} is not a TCP address")))?;
        let server = Arc::new(server);
        let state = State { ctx: ctx.clone(), layout };
        let s = Arc::clone(&server);
        let worker = std::thread::spawn(move || {
            for request in s.incoming_requests() {
                state.handle(request);
            }
        });
        log::info!("review server listening on http://{bound}");
        Ok(ReviewServer { server, worker: Some(worker), addr: bound, _lock: lock })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Blocks until the server stops.
    pub fn wait(mut self) {
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

impl Drop for ReviewServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

struct State {
    ctx: Context,
    layout: SequenceLayout,
}

type Reply = Response<std::io::Cursor<Vec<u8>>>;

fn reply(status: u16, content_type: &str, body: Vec<u8>) -> Reply {
    let ct = Header::from_bytes("Content-Type", content_type).expect("static header");
    let cors = Header::from_bytes("Access-Control-Allow-Origin", "*").expect("static header");
    Response::from_data(body).with_status_code(status).with_header(ct).with_header(cors)
}

fn text(status: u16, msg: impl Into<String>) -> Reply {
    reply(status, "text/plain; charset=utf-8", msg.into().into_bytes())
}

fn jsonl(body: String) -> Reply {
    reply(200, "application/x-ndjson", body.into_bytes())
}

impl State {
    fn handle(&self, mut request: Request) {
        let url = request.url().to_string();
        let (path, query) = url.split_once('?').unwrap_or((&url, ""));
        let method = request.method().clone();
        let response = match (&method, path) {
            (Method::Get, p) if p.starts_with("/frames/") => self.frame(&p["/frames/".len()..]),
            (Method::Get, "/candidates") => self.candidates(query),
            (Method::Get, "/seeds") => self.seeds(),
            (Method::Post, "/seeds") => {
                let mut body = String::new();
                match request.as_reader().read_to_string(&mut body) {
                    Ok(_) => self.save_seeds(&body),
                    Err(e) => text(400, format!("unreadable body: {e}")),
                }
            }
            (Method::Options, _) => {
                let allow = Header::from_bytes("Access-Control-Allow-Methods", "GET, POST").expect("static header");
                text(204, "").with_header(allow)
            }
            _ => text(404, format!("no route for {method} {path}")),
        };
        log::debug!("{method} {url} -> {}", response.status_code().0);
        if let Err(e) = request.respond(response) {
            log::warn!("responding to {url}: {e}");
        }
    }

    fn first_frame(&self) -> Option<u32> {
        self.layout.records.iter().find(|r| r.error.is_none()).map(|r| r.global_index)
    }

    fn frame(&self, index: &str) -> Reply {
        let Ok(index) = index.parse::<u32>() else { return text(400, "frame index must be an integer") };
        if self.layout.record(index).is_none() {
            return text(404, format!("frame {index} is not in the layout"));
        }
        match self.layout.load_frame(index).and_then(|img| encode_png(&img)) {
            Ok(png) => reply(200, "image/png", png),
            Err(e) => text(500, e.to_string()),
        }
    }

    fn candidates(&self, query: &str) -> Reply {
        let frame = match query.split('&').find_map(|kv| kv.strip_prefix("frame=")) {
            Some(v) => match v.parse::<u32>() {
                Ok(f) => f,
                Err(_) => return text(400, "frame must be an integer"),
            },
            None => match self.first_frame() {
                Some(f) => f,
                None => return text(404, "layout has no readable frames"),
            },
        };
        let path = self.ctx.path(Slot::Detections);
        if !path.exists() {
            return text(404, "no detections have been ingested");
        }
        match read_detections(&path) {
            Ok(dets) => jsonl(to_jsonl(&dets.into_iter().filter(|d| d.frame == frame).collect::<Vec<_>>())),
            Err(e) => text(500, e.to_string()),
        }
    }

    fn seeds(&self) -> Reply {
        let path = self.ctx.path(Slot::Seeds);
        if !path.exists() {
            return text(404, "no seeds file yet");
        }
        match read_seeds(&path) {
            Ok(set) => jsonl(to_jsonl(&seeds_to_records(&set))),
            Err(e) => text(500, e.to_string()),
        }
    }

    fn save_seeds(&self, body: &str) -> Reply {
        let seeds: Vec<Seed> = match parse_jsonl(body.as_bytes(), std::path::Path::new("request")) {
            Ok(v) => v,
            Err(e) => return text(400, e.to_string()),
        };
        if seeds.is_empty() {
            return text(422, herdpipe_core::Error::NoSeeds.to_string());
        }
        for s in &seeds {
            let dims = match self.layout.load_frame(s.frame) {
                Ok(img) => img.dimensions(),
                Err(e) => return text(422, e.to_string()),
            };
            let b = &s.bbox;
            if b.x < 0.0 || b.y < 0.0 || b.right() > f64::from(dims.0) || b.bottom() > f64::from(dims.1) {
                return text(422, format!("{} lies outside the {}x{} frame", s.object_name, dims.0, dims.1));
            }
        }
        let frame = seeds.iter().map(|s| s.frame).max().unwrap_or(1);
        let set = SeedSet { frame, seeds, provenance: Provenance::HumanReviewed };
        if let Err(e) = set.validate() {
            return text(422, e.to_string());
        }
        let path = self.ctx.root().join("detections").join(SEEDS_REVIEWED);
        if let Some(dir) = path.parent() {
            if let Err(e) = std::fs::create_dir_all(dir) {
                return text(500, e.to_string());
            }
        }
        match write_seeds(&path, &set) {
            Ok(()) => jsonl(to_jsonl(&seeds_to_records(&set))),
            Err(e) => text(500, e.to_string()),
        }
    }
}
