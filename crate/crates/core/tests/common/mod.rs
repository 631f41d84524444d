#![allow(dead_code)]

use std::io::Cursor;

use chrono::{DateTime, Utc};
use patina_core::domain::{
    create_comment, AnchorRect, AnchoredComment, Board, CommentCategory, CommentDraft, ImageRef,
};

pub fn png(width: u32, height: u32) -> Vec<u8> {
    let img = image::RgbImage::from_pixel(width, height, image::Rgb([200, 180, 40]));
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).unwrap();
    out.into_inner()
}

pub fn ts(secs: i64) -> DateTime<Utc> {
    DateTime::from_timestamp(secs, 0).unwrap()
}

pub fn empty_board(w: u32, h: u32) -> Board {
    Board::new("fixture", ImageRef::from_digest("0".repeat(64)), w, h, ts(1_500_000_000)).unwrap()
}

pub fn comment(
    anchors: Vec<AnchorRect>,
    likes: u64,
    category: Option<CommentCategory>,
    created: i64,
) -> AnchoredComment {
    let mut c = create_comment(CommentDraft { anchors, category, ..Default::default() }, ts(created)).unwrap();
    c.likes = likes;
    c
}

/// SplitMix64; small and reproducible across platforms.
pub struct Rng(u64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.next_u64() % n
    }

    /// A valid anchor with edges on a 1/1000 lattice.
    pub fn anchor(&mut self) -> AnchorRect {
        let x0 = self.below(1000);
        let y0 = self.below(1000);
        let x1 = x0 + 1 + self.below(1000 - x0);
        let y1 = y0 + 1 + self.below(1000 - y0);
        AnchorRect::new(x0 as f64 / 1000.0, y0 as f64 / 1000.0, (x1 - x0) as f64 / 1000.0, (y1 - y0) as f64 / 1000.0)
    }

    pub fn category(&mut self) -> Option<CommentCategory> {
        let i = self.below(9) as usize;
        CommentCategory::ALL.get(i).copied()
    }

    /// Random board with `comments` comments, each with 1..=max_anchors anchors and a few replies.
    pub fn board(&mut self, comments: usize, max_anchors: usize) -> Board {
        let mut board = empty_board(320 + self.below(960) as u32, 200 + self.below(800) as u32);
        for _ in 0..comments {
            let n = 1 + self.below(max_anchors as u64) as usize;
            let anchors = (0..n).map(|_| self.anchor()).collect();
            let created = 1_600_000_000 + self.below(86_400 * 30) as i64;
            let mut c = comment(anchors, self.below(50), self.category(), created);
            for _ in 0..self.below(4) {
                c.add_reply(Default::default(), ts(created + 60));
            }
            board.push_comment(c).unwrap();
        }
        board
    }
}

/// Minimal blocking HTTP/1.1 exchange for tests that drive a real server process.
pub fn http(
    addr: std::net::SocketAddr,
    method: &str,
    path: &str,
    body: Option<&str>,
) -> std::io::Result<(u16, String)> {
    use std::io::{Read, Write};
    let mut stream = std::net::TcpStream::connect(addr)?;
    stream.set_read_timeout(Some(std::time::Duration::from_secs(10)))?;
    let body = body.unwrap_or("");
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    )?;
    let mut raw = String::new();
    stream.read_to_string(&mut raw)?;
    let (head, payload) = raw.split_once("\r\n\r\n").unwrap_or((&raw, ""));
    let status = head.split_whitespace().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    Ok((status, payload.to_owned()))
}

/// A currently free loopback port.
pub fn free_addr() -> std::net::SocketAddr {
    std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap()
}

/// `patina serve` child process, killed with SIGKILL on drop.
pub struct Server {
    pub child: std::process::Child,
    pub addr: std::net::SocketAddr,
}

impl Server {
    pub fn start(data_dir: &std::path::Path) -> Server {
        for _ in 0..5 {
            let addr = free_addr();
            let child = std::process::Command::new(env!("CARGO_BIN_EXE_patina"))
                .args(["--data-dir"])
                .arg(data_dir)
                .args(["serve", "--addr", &addr.to_string()])
                .env("RUST_LOG", "warn")
                .stdout(std::process::Stdio::null())
                .stderr(std::process::Stdio::null())
                .spawn()
                .unwrap();
            let mut server = Server { child, addr };
            let deadline = std::time::Instant::now() + std::time::Duration::from_secs(10);
            while std::time::Instant::now() < deadline {
                if let Ok(Some(_)) = server.child.try_wait() {
                    break;
                }
                if matches!(http(addr, "GET", "/api/boards", None), Ok((200, _))) {
                    return server;
                }
                std::thread::sleep(std::time::Duration::from_millis(5));
            }
            server.kill();
        }
        panic!("server did not start");
    }

    pub fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.kill();
    }
}
