use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::sync::Arc;
use std::time::Duration;

use squid_emu::io::{InstrumentSession, Server, ServerHandle, MAX_LINE};

fn start() -> ServerHandle {
    Server::bind("127.0.0.1:0", Arc::new(InstrumentSession::default))
        .unwrap()
        .spawn()
        .unwrap()
}

struct Client {
    w: TcpStream,
    r: BufReader<TcpStream>,
}

impl Client {
    fn connect(server: &ServerHandle) -> Self {
        let s = TcpStream::connect(server.local_addr()).unwrap();
        s.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
        Client {
            w: s.try_clone().unwrap(),
            r: BufReader::new(s),
        }
    }

    fn send_raw(&mut self, bytes: &[u8]) -> String {
        self.w.write_all(bytes).unwrap();
        let mut line = String::new();
        self.r.read_line(&mut line).unwrap();
        line
    }

    fn ask(&mut self, cmd: &str) -> String {
        let reply = self.send_raw(format!("{cmd}\n").as_bytes());
        assert!(reply.ends_with('\n'), "no reply to {cmd:?}");
        reply.trim_end().to_string()
    }
}

#[test]
fn example_dialogue() {
    let server = start();
    let mut c = Client::connect(&server);
    assert_eq!(c.ask("SET VTH0 0.090"), "OK");
    assert_eq!(c.ask("GET RIN"), "1000");
    assert_eq!(c.ask("PULSE 100e-6"), "1");
    assert_eq!(c.ask("PULSE 80e-6"), "0");
    assert!(c.ask("*IDN?").starts_with("SQUID-EMU,VIRTUAL,0,"));
    assert_eq!(c.ask("SCURVE 80e-6 100e-6 3 10"), "0.00000000e0,0.00000000e0,1.00000000e0");
}

#[test]
fn crlf_and_case() {
    let server = start();
    let mut c = Client::connect(&server);
    assert_eq!(c.send_raw(b"get rnorm\r\n"), "225\n");
}

#[test]
fn sessions_are_independent() {
    let server = start();
    let mut a = Client::connect(&server);
    let mut b = Client::connect(&server);
    assert_eq!(a.ask("SET RIN 2000"), "OK");
    assert_eq!(b.ask("GET RIN"), "1000");
    assert_eq!(a.ask("GET RIN"), "2000");
}

#[test]
fn pipelined_commands_answer_in_order() {
    let server = start();
    let mut c = Client::connect(&server);
    c.w.write_all(b"SET RIN 1500\nGET RIN\nBOGUS\nGET RIN\n").unwrap();
    let mut lines = Vec::new();
    for _ in 0..4 {
        let mut l = String::new();
        c.r.read_line(&mut l).unwrap();
        lines.push(l.trim_end().to_string());
    }
    assert_eq!(lines, ["OK", "1500", "ERR 1 unknown", "1500"]);
}

#[test]
fn oversized_line_is_rejected_and_link_survives() {
    let server = start();
    let mut c = Client::connect(&server);
    let mut big = vec![b'A'; MAX_LINE + 10];
    big.push(b'\n');
    assert_eq!(c.send_raw(&big), "ERR 2 parse\n");
    assert_eq!(c.ask("GET RIN"), "1000");
}

#[test]
fn quit_closes_after_ok() {
    let server = start();
    let mut c = Client::connect(&server);
    assert_eq!(c.ask("QUIT"), "OK");
    let mut rest = Vec::new();
    assert_eq!(c.r.read_to_end(&mut rest).unwrap(), 0);
}

#[test]
fn shutdown_stops_accepting() {
    let server = start();
    let addr = server.local_addr();
    let mut c = Client::connect(&server);
    assert_eq!(c.ask("GET RNORM"), "225");
    server.shutdown();
    // open connections keep working
    assert_eq!(c.ask("GET RIN"), "1000");
    let refused = TcpStream::connect(addr)
        .map(|s| {
            s.set_read_timeout(Some(Duration::from_secs(2))).unwrap();
            let mut buf = [0u8; 1];
            (&s).write_all(b"GET RIN\n").ok();
            matches!((&s).read(&mut buf), Ok(0) | Err(_))
        })
        .unwrap_or(true);
    assert!(refused);
}
