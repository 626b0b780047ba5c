use std::io::{Read, Write};
use std::net::Ipv4Addr;
use std::path::Path;

use crate::flow::FlowKey;

use super::{Label, TraceError, TraceRecord};

pub const TRACE_HEADER: &str = "ts_us,src_ip,dst_ip,src_port,dst_port,proto,payload_len";
pub const TRACE_HEADER_LABELED: &str = "ts_us,src_ip,dst_ip,src_port,dst_port,proto,payload_len,label";

pub fn load_trace(path: &Path) -> Result<Vec<TraceRecord>, TraceError> {
    let f = std::fs::File::open(path).map_err(|source| TraceError::Io { path: path.to_owned(), source })?;
    read_trace(std::io::BufReader::new(f))
}

/// Parses a CSV trace. Records come back in file order; timestamps must not
/// decrease.
pub fn read_trace<R: Read>(r: R) -> Result<Vec<TraceRecord>, TraceError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(r);
    let mut rows = rdr.records();
    let header = match rows.next() {
        Some(h) => h?,
        None => return Err(TraceError::Parse { line: 1, msg: "missing header".into() }),
    };
    let header_line = header.iter().collect::<Vec<_>>().join(",");
    let labeled = match header_line.as_str() {
        TRACE_HEADER => false,
        TRACE_HEADER_LABELED => true,
        other => return Err(TraceError::Parse { line: 1, msg: format!("unexpected header {other:?}") }),
    };
    let ncols = if labeled { 8 } else { 7 };

    let mut out = Vec::new();
    let mut prev: Option<u64> = None;
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let err = |msg: String| TraceError::Parse { line, msg };
        if row.len() != ncols {
            return Err(err(format!("expected {ncols} fields, found {}", row.len())));
        }
        fn num<T: std::str::FromStr>(s: &str, name: &str) -> Result<T, String> {
            s.trim().parse().map_err(|_| format!("bad {name} {s:?}"))
        }
        fn ip(s: &str, name: &str) -> Result<u32, String> {
            s.trim().parse::<Ipv4Addr>().map(u32::from).map_err(|_| format!("bad {name} {s:?}"))
        }
        let rec = (|| -> Result<TraceRecord, String> {
            let label = if labeled {
                let v: u8 = num(&row[7], "label")?;
                Some(Label::from_u8(v).ok_or_else(|| format!("label must be 0 or 1, got {v}"))?)
            } else {
                None
            };
            Ok(TraceRecord {
                ts_us: num(&row[0], "ts_us")?,
                key: FlowKey {
                    src_ip: ip(&row[1], "src_ip")?,
                    dst_ip: ip(&row[2], "dst_ip")?,
                    src_port: num(&row[3], "src_port")?,
                    dst_port: num(&row[4], "dst_port")?,
                    proto: num(&row[5], "proto")?,
                },
                payload_len: num(&row[6], "payload_len")?,
                label,
            })
        })()
        .map_err(err)?;
        if let Some(p) = prev {
            if rec.ts_us < p {
                return Err(TraceError::Order { line, previous: p, current: rec.ts_us });
            }
        }
        prev = Some(rec.ts_us);
        out.push(rec);
    }
    Ok(out)
}

/// Writes a trace in the same CSV format; the label column is included
/// when any record carries a label (unlabeled records are written as 0).
pub fn write_trace<W: Write>(w: W, records: &[TraceRecord]) -> Result<(), TraceError> {
    let labeled = records.iter().any(|r| r.label.is_some());
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    let header = if labeled { TRACE_HEADER_LABELED } else { TRACE_HEADER };
    wtr.write_record(header.split(','))?;
    for r in records {
        let mut row = vec![
            r.ts_us.to_string(),
            Ipv4Addr::from(r.key.src_ip).to_string(),
            Ipv4Addr::from(r.key.dst_ip).to_string(),
            r.key.src_port.to_string(),
            r.key.dst_port.to_string(),
            r.key.proto.to_string(),
            r.payload_len.to_string(),
        ];
        if labeled {
            row.push(r.label.map_or(0, Label::as_u8).to_string());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|e| TraceError::Csv(e.into()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_example_row() {
        let src = format!("{TRACE_HEADER}\n1000,10.0.0.1,10.0.0.2,1234,80,6,512\n");
        let recs = read_trace(src.as_bytes()).unwrap();
        assert_eq!(
            recs,
            vec![TraceRecord {
                ts_us: 1000,
                key: FlowKey { src_ip: 0x0a000001, dst_ip: 0x0a000002, src_port: 1234, dst_port: 80, proto: 6 },
                payload_len: 512,
                label: None,
            }]
        );
    }

    #[test]
    fn bad_ip_reports_line() {
        let src = format!("{TRACE_HEADER}\n1,10.0.0.1,10.0.0.2,1,2,6,3\n2,10.0.0.999,10.0.0.2,1,2,6,3\n");
        match read_trace(src.as_bytes()) {
            Err(TraceError::Parse { line: 3, msg }) => assert!(msg.contains("src_ip")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn decreasing_timestamps() {
        let src = format!("{TRACE_HEADER}\n5,1.1.1.1,2.2.2.2,1,2,6,3\n3,1.1.1.1,2.2.2.2,1,2,6,3\n");
        assert!(matches!(
            read_trace(src.as_bytes()),
            Err(TraceError::Order { line: 3, previous: 5, current: 3 })
        ));
    }

    #[test]
    fn header_is_checked() {
        assert!(read_trace("ts,src\n".as_bytes()).is_err());
        assert!(read_trace("".as_bytes()).is_err());
        let src = format!("{TRACE_HEADER_LABELED}\n5,1.1.1.1,2.2.2.2,1,2,6,3,2\n");
        assert!(matches!(read_trace(src.as_bytes()), Err(TraceError::Parse { line: 2, .. })));
    }

    #[test]
    fn write_read_round_trip() {
        let recs: Vec<_> = (0..5u32)
            .map(|i| TraceRecord {
                ts_us: i as u64 * 7,
                key: FlowKey { src_ip: i * 65537, dst_ip: !i, src_port: i as u16, dst_port: 443, proto: 17 },
                payload_len: 100 + i as u16,
                label: Some(if i % 2 == 0 { Label::Benign } else { Label::Ddos }),
            })
            .collect();
        let mut buf = Vec::new();
        write_trace(&mut buf, &recs).unwrap();
        assert!(buf.starts_with(TRACE_HEADER_LABELED.as_bytes()));
        assert_eq!(read_trace(buf.as_slice()).unwrap(), recs);
    }
}
