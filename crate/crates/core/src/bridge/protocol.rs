//! Newline-delimited JSON over TCP between the bridge and a policy server.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};

use serde::{Deserialize, Serialize};

use super::action::ActionStep;
use super::BridgeError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyRequest {
    pub anchor_times: Vec<f64>,
    /// Proprioception at each anchor.
    pub proprio: Vec<Vec<f64>>,
    pub frame_refs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyResponse {
    pub anchor_time: f64,
    pub steps: Vec<ActionStep>,
}

fn write_line<T: Serialize>(w: &mut impl Write, msg: &T) -> Result<(), BridgeError> {
    let mut line = serde_json::to_string(msg).map_err(|e| BridgeError::Protocol(e.to_string()))?;
    line.push('\n');
    w.write_all(line.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn read_line<T: for<'de> Deserialize<'de>>(r: &mut impl BufRead) -> Result<Option<T>, BridgeError> {
    let mut line = String::new();
    if r.read_line(&mut line)? == 0 {
        return Ok(None);
    }
    serde_json::from_str(line.trim_end()).map(Some).map_err(|e| BridgeError::Protocol(e.to_string()))
}

pub struct PolicyClient {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl PolicyClient {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, BridgeError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self { reader: BufReader::new(stream.try_clone()?), writer: stream })
    }

    /// Sends one request and blocks for its response.
    pub fn request(&mut self, req: &PolicyRequest) -> Result<PolicyResponse, BridgeError> {
        write_line(&mut self.writer, req)?;
        read_line(&mut self.reader)?.ok_or_else(|| BridgeError::Protocol("server closed the connection".into()))
    }
}

/// Answers requests on one connection until the peer disconnects.
pub fn serve_connection(
    stream: TcpStream,
    mut handler: impl FnMut(&PolicyRequest) -> PolicyResponse,
) -> Result<usize, BridgeError> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = stream;
    let mut served = 0;
    while let Some(req) = read_line::<PolicyRequest>(&mut reader)? {
        write_line(&mut writer, &handler(&req))?;
        served += 1;
    }
    Ok(served)
}

/// Accepts a single client on `listener` and serves it.
pub fn serve_one(listener: &TcpListener, handler: impl FnMut(&PolicyRequest) -> PolicyResponse) -> Result<usize, BridgeError> {
    let (stream, _) = listener.accept()?;
    stream.set_nodelay(true)?;
    serve_connection(stream, handler)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_response_roundtrip() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            serve_one(&listener, |req| PolicyResponse {
                anchor_time: *req.anchor_times.last().unwrap(),
                steps: vec![ActionStep { t: req.anchor_times[1] + 0.1, action: vec![0.5; 23] }],
            })
            .unwrap()
        });
        let mut client = PolicyClient::connect(addr).unwrap();
        for k in 0..3 {
            let t = k as f64 * 0.1;
            let req = PolicyRequest { anchor_times: vec![t, t + 0.1], proprio: vec![vec![0.0]; 2], frame_refs: vec!["head/0".into()] };
            let resp = client.request(&req).unwrap();
            assert_eq!(resp.anchor_time, t + 0.1);
            assert_eq!(resp.steps[0].action.len(), 23);
        }
        drop(client);
        assert_eq!(server.join().unwrap(), 3);
    }

    #[test]
    fn malformed_line_is_a_protocol_error() {
        let mut r = BufReader::new(&b"{not json}\n"[..]);
        assert!(matches!(read_line::<PolicyResponse>(&mut r), Err(BridgeError::Protocol(_))));
    }
}
