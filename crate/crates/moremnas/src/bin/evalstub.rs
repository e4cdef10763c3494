//! Line-delimited JSON evaluation worker used by the integration tests.
//! Answers every request with the library surrogate and can misbehave on
//! demand to exercise the client's failure handling.

use std::io::{BufRead, Write};
use std::time::Duration;

use clap::Parser;

use moremnas::eval::surrogate::{surrogate_psnr, SurrogateConfig};
use moremnas::space::{Genome, SpaceConfig};

#[derive(Parser)]
#[command(name = "evalstub", about = "surrogate-backed NDJSON eval worker")]
struct Args {
    /// Sleep this long before each reply.
    #[arg(long, default_value_t = 0)]
    delay_ms: u64,
    /// Swallow the first N requests without replying.
    #[arg(long, default_value_t = 0)]
    drop_first: usize,
    /// Emit replies for swallowed requests right after the next normal reply.
    #[arg(long)]
    replay_dropped: bool,
    /// Double every mse so it contradicts the reported psnr.
    #[arg(long)]
    bad_mse: bool,
    /// Shift every response id so it matches no outstanding request.
    #[arg(long)]
    alien_id: bool,
    /// Buffer requests in pairs and answer each pair in reverse order.
    #[arg(long)]
    swap_pairs: bool,
}

#[derive(serde::Deserialize)]
struct Request {
    id: u64,
    genome: Vec<u16>,
}

fn emit(out: &mut impl Write, req: &Request, args: &Args) {
    if args.delay_ms > 0 {
        std::thread::sleep(Duration::from_millis(args.delay_ms));
    }
    let genome = Genome::new(req.genome.clone()).expect("request carries a valid genome");
    let space = SpaceConfig { n: genome.len(), ..SpaceConfig::default() };
    let psnr = surrogate_psnr(&genome, &space, &SurrogateConfig::default()).expect("surrogate eval");
    let mut mse = 10f64.powf(-psnr / 10.0);
    if args.bad_mse {
        mse *= 2.0;
    }
    let id = if args.alien_id { req.id + 1_000_000 } else { req.id };
    writeln!(out, "{}", serde_json::json!({"id": id, "psnr": psnr, "mse": mse}))
        .expect("stdout write");
    out.flush().expect("stdout flush");
}

fn main() {
    let args = Args::parse();
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut seen = 0usize;
    let mut dropped: Vec<Request> = Vec::new();
    let mut held: Option<Request> = None;
    for line in stdin.lock().lines() {
        let line = match line {
            Ok(l) => l,
            Err(_) => break,
        };
        if line.trim().is_empty() {
            continue;
        }
        let req: Request = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(_) => break,
        };
        seen += 1;
        if seen <= args.drop_first {
            if args.replay_dropped {
                dropped.push(req);
            }
            continue;
        }
        if args.swap_pairs {
            match held.take() {
                None => held = Some(req),
                Some(first) => {
                    emit(&mut out, &req, &args);
                    emit(&mut out, &first, &args);
                }
            }
            continue;
        }
        emit(&mut out, &req, &args);
        for late in dropped.drain(..) {
            emit(&mut out, &late, &args);
        }
    }
}
