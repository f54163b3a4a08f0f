//! Text fixture formats.
//!
//! Tensors:
//!
//! ```text
//! FXT1 Q2.9 <channels> <height> <width>
//! <raw integers, one image row per line, channels in order>
//! ```
//!
//! Filters:
//!
//! ```text
//! BWF1 <n_out> <n_in> <k>
//! <k lines of k '+'/'-' characters per filter, filters (o, i) row-major>
//! ```
//!
//! Lines starting with `#` and blank lines are ignored in both formats.

use std::fmt::Write as _;
use std::path::Path;

use super::{BinaryFilter, FeatureMap, FilterSet};
use crate::error::{Error, Result};
use crate::fxp::QFormat;

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn header_fields<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    magic: &str,
    count: usize,
) -> Result<(usize, Vec<&'a str>)> {
    let (line, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, format!("missing {magic} header")))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.first() != Some(&magic) || fields.len() != count + 1 {
        return Err(Error::parse(line, format!("expected `{magic}` header with {count} fields")));
    }
    Ok((line, fields[1..].to_vec()))
}

fn parse_dim(line: usize, s: &str) -> Result<usize> {
    match s.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(Error::parse(line, format!("bad dimension {s:?}"))),
    }
}

pub fn parse_tensor(text: &str) -> Result<FeatureMap> {
    let mut lines = content_lines(text);
    let (hline, f) = header_fields(&mut lines, "FXT1", 4)?;
    let fmt: QFormat = f[0]
        .parse()
        .map_err(|e: Error| Error::parse(hline, e.to_string()))?;
    if fmt != FeatureMap::FORMAT {
        return Err(Error::parse(hline, format!("tensor format {fmt} is not Q2.9")));
    }
    let (c, h, w) = (parse_dim(hline, f[1])?, parse_dim(hline, f[2])?, parse_dim(hline, f[3])?);
    let mut raw = Vec::with_capacity(c * h * w);
    let mut last = hline;
    for (line, l) in lines {
        last = line;
        for tok in l.split_whitespace() {
            let v: i64 = tok
                .parse()
                .map_err(|_| Error::parse(line, format!("bad sample {tok:?}")))?;
            if !fmt.contains_raw(v) {
                return Err(Error::parse(line, format!("sample {v} outside {fmt}")));
            }
            raw.push(v);
        }
    }
    if raw.len() != c * h * w {
        return Err(Error::parse(
            last,
            format!("expected {} samples, found {}", c * h * w, raw.len()),
        ));
    }
    FeatureMap::new(c, h, w, raw)
}

pub fn format_tensor(map: &FeatureMap) -> String {
    let mut s = format!(
        "FXT1 {} {} {} {}\n",
        FeatureMap::FORMAT,
        map.channels(),
        map.height(),
        map.width()
    );
    for row in map.raw().chunks(map.width()) {
        let mut first = true;
        for v in row {
            if !first {
                s.push(' ');
            }
            first = false;
            write!(s, "{v}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn parse_filters(text: &str) -> Result<FilterSet> {
    let mut lines = content_lines(text);
    let (hline, f) = header_fields(&mut lines, "BWF1", 3)?;
    let (n_out, n_in, k) = (parse_dim(hline, f[0])?, parse_dim(hline, f[1])?, parse_dim(hline, f[2])?);
    let mut filters = Vec::with_capacity(n_out * n_in);
    let mut bits = Vec::with_capacity(k * k);
    for (line, l) in lines {
        if l.len() != k {
            return Err(Error::parse(line, format!("filter row must have {k} characters")));
        }
        for ch in l.chars() {
            bits.push(match ch {
                '+' => true,
                '-' => false,
                _ => return Err(Error::parse(line, format!("bad weight character {ch:?}"))),
            });
        }
        if bits.len() == k * k {
            filters.push(BinaryFilter::from_bits(k, std::mem::take(&mut bits))?);
        }
    }
    if !bits.is_empty() || filters.len() != n_out * n_in {
        return Err(Error::parse(
            hline,
            format!("expected {} complete filters, found {}", n_out * n_in, filters.len()),
        ));
    }
    FilterSet::new(n_out, n_in, filters)
}

pub fn format_filters(set: &FilterSet) -> String {
    let k = set.kernel_size();
    let mut s = format!("BWF1 {} {} {}\n", set.n_out(), set.n_in(), k);
    for f in set.filters() {
        for row in f.bits().chunks(k) {
            s.extend(row.iter().map(|&b| if b { '+' } else { '-' }));
            s.push('\n');
        }
    }
    s
}

pub fn read_tensor(path: &Path) -> Result<FeatureMap> {
    parse_tensor(&std::fs::read_to_string(path)?)
}

pub fn write_tensor(path: &Path, map: &FeatureMap) -> Result<()> {
    Ok(std::fs::write(path, format_tensor(map))?)
}

pub fn read_filters(path: &Path) -> Result<FilterSet> {
    parse_filters(&std::fs::read_to_string(path)?)
}

pub fn write_filters(path: &Path, set: &FilterSet) -> Result<()> {
    Ok(std::fs::write(path, format_filters(set))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tensor_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let map = FeatureMap::random(3, 4, 5, &mut rng);
        let text = format_tensor(&map);
        assert!(text.starts_with("FXT1 Q2.9 3 4 5\n"));
        assert_eq!(parse_tensor(&text).unwrap(), map);
    }

    #[test]
    fn tensor_errors() {
        assert!(matches!(parse_tensor(""), Err(Error::Parse { .. })));
        assert!(parse_tensor("FXT1 Q7.9 1 1 1\n0\n").is_err());
        assert!(parse_tensor("FXT1 Q2.9 1 1 2\n0\n").is_err());
        assert!(parse_tensor("FXT1 Q2.9 1 1 1\n5000\n").is_err());
        match parse_tensor("FXT1 Q2.9 1 1 1\n# c\nxyz\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let ok = parse_tensor("# comment\nFXT1 Q2.9 1 2 2\n1 2\n\n-3 4\n").unwrap();
        assert_eq!(ok.raw(), &[1, 2, -3, 4]);
    }

    #[test]
    fn filter_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let set = FilterSet::random(2, 3, 3, &mut rng);
        let text = format_filters(&set);
        assert_eq!(parse_filters(&text).unwrap(), set);
    }

    #[test]
    fn filter_errors() {
        assert!(parse_filters("BWF1 1 1 2\n+-\n").is_err());
        assert!(parse_filters("BWF1 1 1 2\n+-\n+x\n").is_err());
        assert!(parse_filters("BWF1 1 1 2\n+-\n+++\n").is_err());
        let f = parse_filters("BWF1 1 1 2\n+-\n-+\n").unwrap();
        assert_eq!(f.get(0, 0).weights(), vec![1, -1, -1, 1]);
    }
}
