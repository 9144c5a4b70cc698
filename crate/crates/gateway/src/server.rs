//! HTTP front end: a pool of workers feeding [`route`].

use std::io::{self, Read};
use std::net::SocketAddr;
use std::sync::{Arc, RwLock};
use std::thread::JoinHandle;

use bytes::Bytes;
use campuscloud::domain::Error;
use campuscloud::Cloud;
use tiny_http::{Header, Server};

use crate::api::{route, Method, Request, Response};

pub const DEFAULT_WORKERS: usize = 8;

pub struct ServerHandle {
    addr: SocketAddr,
    server: Arc<Server>,
    workers: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the server stops.
    pub fn join(mut self) {
        for worker in self.workers.drain(..) {
            let _ = worker.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        for _ in 0..self.workers.len() {
            self.server.unblock();
        }
        for worker in self.workers.drain(..) {
            let _ = worker.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Binds `addr` (port 0 picks a free port) and serves until shut down.
pub fn serve(addr: &str, cloud: Arc<RwLock<Cloud>>, workers: usize) -> io::Result<ServerHandle> {
    let server = Arc::new(Server::http(addr).map_err(io::Error::other)?);
    let local = server
        .server_addr()
        .to_ip()
        .ok_or_else(|| io::Error::other("server is not bound to an IP address"))?;
    let max_body = cloud.read().unwrap_or_else(|e| e.into_inner()).config().max_payload_bytes;
    let workers = (0..workers.max(1))
        .map(|_| {
            let server = Arc::clone(&server);
            let cloud = Arc::clone(&cloud);
            std::thread::spawn(move || {
                while let Ok(rq) = server.recv() {
                    handle(&cloud, max_body, rq);
                }
            })
        })
        .collect();
    Ok(ServerHandle {
        addr: local,
        server,
        workers,
    })
}

fn read_request(rq: &mut tiny_http::Request, max_body: u64) -> Result<Request, (u16, Error)> {
    let method = Method::parse(rq.method().as_str()).ok_or_else(|| {
        (405, Error::validation(format!("method {} not supported", rq.method())))
    })?;
    if rq.body_length().is_some_and(|n| n as u64 > max_body) {
        return Err((413, Error::validation(format!("request body exceeds {max_body} bytes"))));
    }
    let mut req = Request::new(method, rq.url());
    req.headers = rq
        .headers()
        .iter()
        .map(|h| (h.field.as_str().as_str().to_ascii_lowercase(), h.value.as_str().to_owned()))
        .collect();
    let mut body = Vec::new();
    rq.as_reader()
        .take(max_body + 1)
        .read_to_end(&mut body)
        .map_err(|e| (400, Error::validation(format!("reading request body: {e}"))))?;
    if body.len() as u64 > max_body {
        return Err((413, Error::validation(format!("request body exceeds {max_body} bytes"))));
    }
    req.body = Bytes::from(body);
    Ok(req)
}

fn handle(cloud: &RwLock<Cloud>, max_body: u64, mut rq: tiny_http::Request) {
    let resp = match read_request(&mut rq, max_body) {
        Ok(req) => route(cloud, &req),
        Err((status, err)) => {
            let mut resp = Response::error(&err);
            resp.status = status;
            resp
        }
    };
    let header = Header::from_bytes("Content-Type", resp.content_type).expect("static header");
    let out = tiny_http::Response::from_data(resp.body.to_vec())
        .with_status_code(resp.status)
        .with_header(header);
    let _ = rq.respond(out);
}
