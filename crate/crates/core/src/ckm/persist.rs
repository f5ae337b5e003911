//! Line-oriented text format; the grammar is described in `docs/ckmdb-format.md`.

use std::io::{BufRead, Write};

use super::{BimEntry, CamCandidate, CamEntry, CkmDatabase, CkmError};
use crate::arrays::{AngleGrid, GridAngle, GridTuple, Point3};

pub const FORMAT_VERSION: &str = "v1";

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

impl CkmDatabase {
    /// Writes the header, one line per record, and an `END <count>` trailer.
    pub fn save<W: Write>(&self, mut w: W) -> Result<(), CkmError> {
        let kind = match (self.cam.is_empty(), self.bim.is_empty()) {
            (false, true) => "cam",
            (true, false) => "bim",
            (false, false) => "mixed",
            // An empty map is written as a CAM map without records.
            (true, true) => "cam",
        };
        let grid = match &self.grid {
            Some(g) => format!("{},{},{},{}", g.i_r, g.j_r, g.i_t, g.j_t),
            None => "none".into(),
        };
        let fp = match &self.codebooks {
            Some((t, r)) => format!("{t},{r}"),
            None => "none".into(),
        };
        writeln!(w, "CKMDB {FORMAT_VERSION}; kind={kind}; grid={grid}; codebook_fp={fp}; k={}", self.k)?;
        for e in &self.cam {
            let mut line = format!(
                "CAM {} {} {} {}",
                float(e.location[0]),
                float(e.location[1]),
                float(e.location[2]),
                e.candidates.len()
            );
            for c in &e.candidates {
                let t = &c.tuple;
                line.push_str(&format!(
                    " {} {} {} {} {}",
                    t.aod.zenith,
                    t.aod.azimuth,
                    t.aoa.zenith,
                    t.aoa.azimuth,
                    float(c.weight)
                ));
            }
            writeln!(w, "{line}")?;
        }
        for e in &self.bim {
            let mut line = format!(
                "BIM {} {} {} {}",
                float(e.location[0]),
                float(e.location[1]),
                float(e.location[2]),
                e.tx_beams.len()
            );
            for b in &e.tx_beams {
                line.push_str(&format!(" {b}"));
            }
            line.push_str(&format!(" {}", e.rx_beams.len()));
            for b in &e.rx_beams {
                line.push_str(&format!(" {b}"));
            }
            writeln!(w, "{line}")?;
        }
        writeln!(w, "END {}", self.cam.len() + self.bim.len())?;
        w.flush()?;
        Ok(())
    }

    /// Reads a map written by [`CkmDatabase::save`].
    ///
    /// When `expected_codebooks` is given, a BIM-bearing file must carry exactly
    /// those (tx, rx) fingerprints.
    pub fn load<R: BufRead>(r: R, expected_codebooks: Option<(&str, &str)>) -> Result<Self, CkmError> {
        let mut lines = r.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| CkmError::Truncated("missing header".into()))?;
        let header = header?;
        let head = parse_header(&header)?;
        if head.kind != "cam" && expected_codebooks.is_some() {
            if let (Some((et, er)), Some((ft, fr))) = (expected_codebooks, head.codebooks.as_ref()) {
                let expected = format!("{et},{er}");
                let found = format!("{ft},{fr}");
                if expected != found {
                    return Err(CkmError::Fingerprint { expected, found });
                }
            }
        }
        let mut cam = Vec::new();
        let mut bim = Vec::new();
        let mut trailer = None;
        for (idx, line) in lines {
            let line = line?;
            let lineno = idx + 1;
            if trailer.is_some() {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(parse_err(lineno, "content after END trailer"));
            }
            let mut tok = Tokens {
                it: line.split_ascii_whitespace(),
                line: lineno,
            };
            match tok.word()? {
                "CAM" => {
                    let location = tok.point()?;
                    let n = tok.usize()?;
                    let mut candidates = Vec::with_capacity(n);
                    for _ in 0..n {
                        let tuple = GridTuple {
                            aod: GridAngle {
                                zenith: tok.usize()?,
                                azimuth: tok.usize()?,
                            },
                            aoa: GridAngle {
                                zenith: tok.usize()?,
                                azimuth: tok.usize()?,
                            },
                        };
                        candidates.push(CamCandidate {
                            tuple,
                            weight: tok.f64()?,
                        });
                    }
                    tok.end()?;
                    cam.push(CamEntry { location, candidates });
                }
                "BIM" => {
                    let location = tok.point()?;
                    let nt = tok.usize()?;
                    let tx_beams = (0..nt).map(|_| tok.usize()).collect::<Result<Vec<_>, _>>()?;
                    let nr = tok.usize()?;
                    let rx_beams = (0..nr).map(|_| tok.usize()).collect::<Result<Vec<_>, _>>()?;
                    tok.end()?;
                    bim.push(BimEntry {
                        location,
                        tx_beams,
                        rx_beams,
                    });
                }
                "END" => {
                    let n = tok.usize()?;
                    tok.end()?;
                    trailer = Some(n);
                }
                other => return Err(parse_err(lineno, &format!("unknown record type `{other}`"))),
            }
        }
        let count = trailer.ok_or_else(|| CkmError::Truncated("missing END trailer".into()))?;
        if count != cam.len() + bim.len() {
            return Err(CkmError::Truncated(format!(
                "trailer announces {count} records, found {}",
                cam.len() + bim.len()
            )));
        }
        let kind_ok = match head.kind.as_str() {
            "cam" => bim.is_empty(),
            "bim" => cam.is_empty(),
            _ => true,
        };
        if !kind_ok {
            return Err(parse_err(1, "records do not match the declared kind"));
        }
        let mut db = CkmDatabase::new(head.k)?;
        if let Some(grid) = head.grid {
            db = db.with_cam(grid, cam)?;
        } else if !cam.is_empty() {
            return Err(parse_err(1, "CAM records need a grid"));
        }
        if let Some((t, r)) = head.codebooks {
            db = db.with_bim(&t, &r, bim)?;
        } else if !bim.is_empty() {
            return Err(parse_err(1, "BIM records need codebook fingerprints"));
        }
        Ok(db)
    }
}

struct Header {
    kind: String,
    grid: Option<AngleGrid>,
    codebooks: Option<(String, String)>,
    k: usize,
}

fn parse_err(line: usize, reason: &str) -> CkmError {
    CkmError::Parse {
        line,
        reason: reason.to_string(),
    }
}

fn parse_header(h: &str) -> Result<Header, CkmError> {
    let mut parts = h.split(';').map(str::trim);
    let magic = parts.next().unwrap_or_default();
    let version = magic
        .strip_prefix("CKMDB ")
        .ok_or_else(|| parse_err(1, "missing CKMDB magic"))?;
    if version != FORMAT_VERSION {
        return Err(CkmError::Version(version.to_string()));
    }
    let mut kind = None;
    let mut grid = None;
    let mut codebooks = None;
    let mut k = None;
    for p in parts {
        let (key, value) = p.split_once('=').ok_or_else(|| parse_err(1, &format!("bad field `{p}`")))?;
        match key {
            "kind" => {
                if !["cam", "bim", "mixed"].contains(&value) {
                    return Err(parse_err(1, &format!("unknown kind `{value}`")));
                }
                kind = Some(value.to_string());
            }
            "grid" => {
                if value != "none" {
                    let v: Vec<usize> = value
                        .split(',')
                        .map(|x| x.parse().map_err(|_| parse_err(1, "bad grid")))
                        .collect::<Result<_, _>>()?;
                    if v.len() != 4 || v.contains(&0) {
                        return Err(parse_err(1, "grid needs four positive sizes"));
                    }
                    grid = Some(AngleGrid::new(v[0], v[1], v[2], v[3]));
                }
            }
            "codebook_fp" => {
                if value != "none" {
                    let (t, r) = value
                        .split_once(',')
                        .ok_or_else(|| parse_err(1, "codebook_fp needs tx,rx"))?;
                    codebooks = Some((t.to_string(), r.to_string()));
                }
            }
            "k" => k = Some(value.parse().map_err(|_| parse_err(1, "bad k"))?),
            other => return Err(parse_err(1, &format!("unknown header field `{other}`"))),
        }
    }
    Ok(Header {
        kind: kind.ok_or_else(|| parse_err(1, "missing kind"))?,
        grid,
        codebooks,
        k: k.ok_or_else(|| parse_err(1, "missing k"))?,
    })
}

struct Tokens<'a> {
    it: std::str::SplitAsciiWhitespace<'a>,
    line: usize,
}

impl<'a> Tokens<'a> {
    fn word(&mut self) -> Result<&'a str, CkmError> {
        self.it
            .next()
            .ok_or_else(|| CkmError::Truncated(format!("line {} ends early", self.line)))
    }

    fn usize(&mut self) -> Result<usize, CkmError> {
        let w = self.word()?;
        w.parse().map_err(|_| parse_err(self.line, &format!("expected integer, got `{w}`")))
    }

    fn f64(&mut self) -> Result<f64, CkmError> {
        let w = self.word()?;
        let v: f64 = w
            .parse()
            .map_err(|_| parse_err(self.line, &format!("expected number, got `{w}`")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(parse_err(self.line, "non-finite number"))
        }
    }

    fn point(&mut self) -> Result<Point3, CkmError> {
        Ok([self.f64()?, self.f64()?, self.f64()?])
    }

    fn end(&mut self) -> Result<(), CkmError> {
        match self.it.next() {
            None => Ok(()),
            Some(extra) => Err(parse_err(self.line, &format!("unexpected trailing `{extra}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_round_trip() {
        let db = CkmDatabase::new(3).unwrap();
        let mut buf = Vec::new();
        db.save(&mut buf).unwrap();
        let back = CkmDatabase::load(buf.as_slice(), None).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.k(), 3);
    }

    #[test]
    fn truncation_detected() {
        let db = CkmDatabase::new(1)
            .unwrap()
            .with_bim(
                "t",
                "r",
                vec![BimEntry {
                    location: [1.0, 2.0, 3.0],
                    tx_beams: vec![4, 5],
                    rx_beams: vec![1],
                }],
            )
            .unwrap();
        let mut buf = Vec::new();
        db.save(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cut: String = text.lines().take(2).collect::<Vec<_>>().join("\n");
        assert!(matches!(CkmDatabase::load(cut.as_bytes(), None), Err(CkmError::Truncated(_))));
        assert!(matches!(
            CkmDatabase::load(text.as_bytes(), Some(("t", "other"))),
            Err(CkmError::Fingerprint { .. })
        ));
        let bad = text.replacen("v1", "v9", 1);
        assert!(matches!(CkmDatabase::load(bad.as_bytes(), None), Err(CkmError::Version(_))));
    }
}
