//! Plain-text trace files.
//!
//! ```text
//! #n=<n> q=<q> q'=<q'> seed=<seed>
//! 0110...
//!                      <- empty line: empty trace
//! ```

use std::io::{BufRead, Write};

use super::ChannelParams;
use crate::bits::Trace;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFileHeader {
    pub n: usize,
    pub channel: ChannelParams,
    pub seed: u64,
}

impl TraceFileHeader {
    pub fn to_line(&self) -> String {
        format!(
            "#n={} q={} q'={} seed={}",
            self.n,
            self.channel.q(),
            self.channel.q_ins(),
            self.seed
        )
    }

    pub fn parse(line: &str) -> Result<Self> {
        let body = line
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse("trace file header must start with '#'".into()))?;
        let (mut n, mut q, mut q_ins, mut seed) = (None, None, None, None);
        for field in body.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("malformed header field {field:?}")))?;
            let bad = |_| Error::Parse(format!("bad value in header field {field:?}"));
            match key {
                "n" => n = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "q" => q = Some(value.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "q'" => q_ins = Some(value.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|e| bad(e.to_string()))?),
                other => return Err(Error::Parse(format!("unknown header key {other:?}"))),
            }
        }
        let missing = |k: &str| Error::Parse(format!("header is missing {k}"));
        Ok(Self {
            n: n.ok_or_else(|| missing("n"))?,
            channel: ChannelParams::new(q.ok_or_else(|| missing("q"))?, q_ins.ok_or_else(|| missing("q'"))?)?,
            seed: seed.ok_or_else(|| missing("seed"))?,
        })
    }
}

pub fn write_traces<W: Write>(mut out: W, header: &TraceFileHeader, traces: &[Trace]) -> Result<()> {
    writeln!(out, "{}", header.to_line())?;
    for t in traces {
        writeln!(out, "{t}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_traces<R: BufRead>(input: R) -> Result<(TraceFileHeader, Vec<Trace>)> {
    let mut lines = input.lines();
    let header = match lines.next() {
        Some(line) => TraceFileHeader::parse(line?.trim_end_matches('\r'))?,
        None => return Err(Error::Parse("empty trace file".into())),
    };
    let mut traces = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let trace = line
            .trim_end_matches('\r')
            .parse::<Trace>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", i + 2)))?;
        traces.push(trace);
    }
    Ok((header, traces))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_round_trip() {
        let h = TraceFileHeader {
            n: 1000,
            channel: ChannelParams::new(0.1, 0.05).unwrap(),
            seed: 17,
        };
        assert_eq!(h.to_line(), "#n=1000 q=0.1 q'=0.05 seed=17");
        assert_eq!(TraceFileHeader::parse(&h.to_line()).unwrap(), h);
    }

    #[test]
    fn file_round_trip_with_empty_trace() {
        let h = TraceFileHeader {
            n: 4,
            channel: ChannelParams::new(0.5, 0.0).unwrap(),
            seed: 1,
        };
        let traces: Vec<Trace> = ["0110", "", "1"].iter().map(|s| s.parse().unwrap()).collect();
        let mut buf = Vec::new();
        write_traces(&mut buf, &h, &traces).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "#n=4 q=0.5 q'=0 seed=1\n0110\n\n1\n");
        let (h2, t2) = read_traces(&buf[..]).unwrap();
        assert_eq!(h2, h);
        assert_eq!(t2, traces);
    }

    #[test]
    fn malformed_inputs() {
        assert!(TraceFileHeader::parse("n=3 q=0 q'=0 seed=1").is_err());
        assert!(TraceFileHeader::parse("#n=3 q=0 seed=1").is_err());
        assert!(TraceFileHeader::parse("#n=3 q=1.2 q'=0 seed=1").is_err());
        assert!(read_traces(&b"#n=2 q=0 q'=0 seed=0\n01\n0a\n"[..]).is_err());
        assert!(read_traces(&b""[..]).is_err());
    }
}
