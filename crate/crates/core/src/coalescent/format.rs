//! Plain-text and JSON encodings of a genealogy.
//!
//! Text form: a header `n=<int> alpha=<real|none> seed=<u64>` followed by
//! one `t=<real> merge=<id,...> into=<id>` line per event. Reals are printed
//! in shortest round-trip form, so parsing reproduces the tree bit for bit.

use std::fmt::Write;

use super::tree::{GenealogyTree, MergeEvent};
use crate::error::{Error, Result};

pub fn to_lines(tree: &GenealogyTree) -> String {
    let mut out = String::new();
    let alpha = tree.alpha().map_or("none".to_string(), |a| format!("{a:?}"));
    writeln!(out, "n={} alpha={} seed={}", tree.n(), alpha, tree.seed()).unwrap();
    for e in tree.events() {
        let ids: Vec<String> = e.merged.iter().map(u32::to_string).collect();
        writeln!(out, "t={:?} merge={} into={}", e.time, ids.join(","), e.into).unwrap();
    }
    out
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn field<'a>(tok: Option<&'a str>, key: &str, line: usize) -> Result<&'a str> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing `{key}=`")))?;
    tok.strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| parse_err(line, format!("expected `{key}=`, found `{tok}`")))
}

fn num<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| parse_err(line, format!("bad number `{s}`")))
}

pub fn from_lines(text: &str) -> Result<GenealogyTree> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let mut toks = header.split_whitespace();
    let n: usize = num(field(toks.next(), "n", 1)?, 1)?;
    let alpha = match field(toks.next(), "alpha", 1)? {
        "none" => None,
        a => Some(num(a, 1)?),
    };
    let seed: u64 = num(field(toks.next(), "seed", 1)?, 1)?;
    let mut events = Vec::new();
    for (i, l) in lines {
        let ln = i + 1;
        let mut toks = l.split_whitespace();
        let time: f64 = num(field(toks.next(), "t", ln)?, ln)?;
        let merged = field(toks.next(), "merge", ln)?
            .split(',')
            .map(|s| num(s, ln))
            .collect::<Result<Vec<u32>>>()?;
        let into: u32 = num(field(toks.next(), "into", ln)?, ln)?;
        if let Some(extra) = toks.next() {
            return Err(parse_err(ln, format!("unexpected `{extra}`")));
        }
        events.push(MergeEvent { time, merged, into });
    }
    GenealogyTree::from_events(n, alpha, seed, events)
}

pub fn to_json(tree: &GenealogyTree) -> String {
    serde_json::to_string(tree).expect("genealogy serializes")
}

pub fn from_json(text: &str) -> Result<GenealogyTree> {
    serde_json::from_str(text).map_err(|e| parse_err(e.line(), e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coalescent::{simulate_coalescent, Stop};
    use crate::rates::LambdaMeasure;
    use crate::rng::RngStream;

    #[test]
    fn round_trips_are_exact() {
        let m = LambdaMeasure::beta(1.37).unwrap();
        let t = simulate_coalescent(40, &m, RngStream::new(11, 2), Stop::AtMrca).unwrap();
        assert_eq!(from_lines(&to_lines(&t)).unwrap(), t);
        assert_eq!(from_json(&to_json(&t)).unwrap(), t);
        let k = simulate_coalescent(5, &LambdaMeasure::KingmanAtom, RngStream::new(1, 0), Stop::AtMrca).unwrap();
        assert!(to_lines(&k).starts_with("n=5 alpha=none seed=1\n"));
        assert_eq!(from_lines(&to_lines(&k)).unwrap(), k);
    }

    #[test]
    fn reports_bad_lines() {
        let err = from_lines("n=3 alpha=none seed=0\nt=1 merge=0,1 into=3\nt=x merge=2,3 into=4\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert!(from_lines("n=3 alpha=none\n").is_err());
        assert!(from_json("{\"n\":2,\"alpha\":null,\"seed\":0,\"events\":[{\"time\":1.0,\"merged\":[0],\"into\":2}]}").is_err());
    }
}
