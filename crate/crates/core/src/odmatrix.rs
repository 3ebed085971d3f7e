//! OD matrices: the O-format text codec, expansion into trips, and
//! aggregation of routes or trips back into matrices.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::demand::Trip;
use crate::error::{Error, Result};
use crate::routing::Route;
use crate::taz::TazSet;
use crate::xml::{self, escape, floor2, fmt2, fmt_exact};

pub const O_FORMAT_HEADER: &str = "$OR;D2";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWindow {
    pub begin: f64,
    pub end: f64,
}

impl TimeWindow {
    pub fn new(begin: f64, end: f64) -> Result<Self> {
        if !(begin.is_finite() && end.is_finite() && begin >= 0.0 && begin < end) {
            return Err(Error::Window { begin, end });
        }
        Ok(Self { begin, end })
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.begin && t < self.end
    }

    pub fn duration(&self) -> f64 {
        self.end - self.begin
    }

    /// `n` contiguous sub-windows of equal length.
    pub fn split(&self, n: usize) -> Vec<TimeWindow> {
        let len = self.duration() / n as f64;
        (0..n)
            .map(|k| TimeWindow {
                begin: self.begin + k as f64 * len,
                end: if k + 1 == n {
                    self.end
                } else {
                    self.begin + (k + 1) as f64 * len
                },
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ODMatrix {
    pub window: TimeWindow,
    pub factor: f64,
    pub cells: BTreeMap<(String, String), f64>,
}

impl ODMatrix {
    pub fn new(window: TimeWindow) -> Self {
        Self {
            window,
            factor: 1.0,
            cells: BTreeMap::new(),
        }
    }

    /// Vehicles after scaling, `factor * Σ cells`.
    pub fn mass(&self) -> f64 {
        self.factor * self.cells.values().sum::<f64>()
    }
}

/// `H.MM` to seconds; the fractional digits are minutes.
fn parse_clock(token: &str, line: usize) -> Result<f64> {
    let bad = || Error::Parse {
        line,
        message: format!("invalid HOUR.MINUTE time `{token}`"),
    };
    let (h, m) = token.split_once('.').unwrap_or((token, "0"));
    let h: u32 = h.parse().map_err(|_| bad())?;
    let m: u32 = if m.is_empty() { 0 } else { m.parse().map_err(|_| bad())? };
    if m >= 60 {
        return Err(bad());
    }
    Ok(h as f64 * 3600.0 + m as f64 * 60.0)
}

fn format_clock(seconds: f64) -> Result<String> {
    let minutes = seconds / 60.0;
    if minutes.fract() != 0.0 || minutes < 0.0 {
        return Err(Error::OdFormat(format!(
            "time {seconds} s is not a whole minute and cannot be written as HOUR.MINUTE"
        )));
    }
    let minutes = minutes as u64;
    Ok(format!("{}.{:02}", minutes / 60, minutes % 60))
}

fn format_amount(v: f64) -> String {
    if xml::round2(v) == v {
        fmt2(v)
    } else {
        fmt_exact(v)
    }
}

fn parse_amount(token: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = token.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid {what} `{token}`"),
    })?;
    if !v.is_finite() || v < 0.0 {
        return Err(Error::Value {
            line,
            message: format!("{what} must be nonnegative, got {token}"),
        });
    }
    Ok(v)
}

pub fn parse_o_format(text: &str) -> Result<ODMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('*'));
    match lines.next() {
        Some((_, O_FORMAT_HEADER)) => {}
        Some((n, other)) => {
            return Err(Error::OdFormat(format!(
                "line {n}: expected `{O_FORMAT_HEADER}` header, found `{other}`"
            )))
        }
        None => return Err(Error::OdFormat(format!("missing `{O_FORMAT_HEADER}` header"))),
    }
    let (n, time_line) = lines
        .next()
        .ok_or_else(|| Error::OdFormat("missing time range line".into()))?;
    let times: Vec<&str> = time_line.split_whitespace().collect();
    if times.len() != 2 {
        return Err(Error::Parse {
            line: n,
            message: format!("expected `HOUR.MINUTE HOUR.MINUTE`, found `{time_line}`"),
        });
    }
    let window = TimeWindow::new(parse_clock(times[0], n)?, parse_clock(times[1], n)?)?;
    let (n, factor_line) = lines
        .next()
        .ok_or_else(|| Error::OdFormat("missing factor line".into()))?;
    let factor = parse_amount(factor_line, n, "factor")?;
    let mut m = ODMatrix {
        window,
        factor,
        cells: BTreeMap::new(),
    };
    for (n, line) in lines {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 3 {
            return Err(Error::Parse {
                line: n,
                message: format!("expected `FROM TO NUMVEHICLES`, found `{line}`"),
            });
        }
        let v = parse_amount(tokens[2], n, "vehicle count")?;
        *m.cells
            .entry((tokens[0].to_string(), tokens[1].to_string()))
            .or_insert(0.0) += v;
    }
    Ok(m)
}

pub fn write_o_format(m: &ODMatrix) -> Result<String> {
    let mut out = format!(
        "{O_FORMAT_HEADER}\n* From-Time  To-Time\n{} {}\n* Factor\n{}\n",
        format_clock(m.window.begin)?,
        format_clock(m.window.end)?,
        format_amount(m.factor)
    );
    for ((from, to), v) in &m.cells {
        out.push_str(&format!("{from:>10} {to:>10} {:>10}\n", format_amount(*v)));
    }
    Ok(out)
}

/// Reads `<tazRelation from to count>` entries grouped by `<interval>`,
/// one matrix per interval.
pub fn parse_taz_relations(text: &str) -> Result<Vec<ODMatrix>> {
    let root = xml::parse_document(text)?;
    let mut out = Vec::new();
    for interval in root.descendants_named("interval") {
        let window = TimeWindow::new(interval.parse_required("begin")?, interval.parse_required("end")?)?;
        let mut m = ODMatrix::new(window);
        for rel in interval.children_named("tazRelation") {
            let count: f64 = rel.parse_optional("count")?.unwrap_or(0.0);
            if !(count.is_finite() && count >= 0.0) {
                return Err(rel.error(format!("count must be nonnegative, got {count}")));
            }
            *m.cells
                .entry((rel.required("from")?.to_string(), rel.required("to")?.to_string()))
                .or_insert(0.0) += count;
        }
        out.push(m);
    }
    Ok(out)
}

pub fn write_taz_relations(matrices: &[ODMatrix]) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<data>\n");
    for (i, m) in matrices.iter().enumerate() {
        out.push_str(&format!(
            "    <interval id=\"{i}\" begin=\"{}\" end=\"{}\">\n",
            fmt2(m.window.begin),
            fmt2(m.window.end)
        ));
        for ((from, to), v) in &m.cells {
            let count = m.factor * v;
            let count = if count.fract() == 0.0 {
                format!("{count}")
            } else {
                fmt_exact(count)
            };
            out.push_str(&format!(
                "        <tazRelation from=\"{}\" to=\"{}\" count=\"{count}\"/>\n",
                escape(from),
                escape(to)
            ));
        }
        out.push_str("    </interval>\n");
    }
    out.push_str("</data>\n");
    out
}

/// Either dialect: XML when the first non-blank character is `<`.
pub fn parse_od_text(text: &str) -> Result<Vec<ODMatrix>> {
    if text.trim_start().starts_with('<') {
        parse_taz_relations(text)
    } else {
        Ok(vec![parse_o_format(text)?])
    }
}

pub fn read_od_file(path: &Path) -> Result<Vec<ODMatrix>> {
    parse_od_text(&xml::read_file(path)?)
}

fn zone_edges<'a>(tazs: &'a TazSet, id: &str) -> Result<&'a [String]> {
    let zone = tazs.zone(id).ok_or_else(|| Error::UnknownTaz(id.to_string()))?;
    if zone.edge_ids.is_empty() {
        return Err(Error::EmptyZone(id.to_string()));
    }
    Ok(&zone.edge_ids)
}

/// Expands matrices into trips. Each cell yields `⌊v⌋` trips plus one more
/// with probability `v - ⌊v⌋`, where `v = factor * value`; departures are
/// uniform over the matrix window and edges uniform within each zone. The
/// combined list is sorted by departure and numbered from zero.
pub fn od_to_trips_many(matrices: &[ODMatrix], tazs: &TazSet, seed: u64, prefix: &str) -> Result<Vec<Trip>> {
    for m in matrices {
        for (from, to) in m.cells.keys() {
            zone_edges(tazs, from)?;
            zone_edges(tazs, to)?;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut drawn: Vec<(f64, String, String)> = Vec::new();
    for m in matrices {
        for ((from, to), value) in &m.cells {
            let v = m.factor * value;
            let mut n = v.floor() as u64;
            let frac = v - v.floor();
            if frac > 0.0 && rng.random_bool(frac) {
                n += 1;
            }
            let (src, dst) = (zone_edges(tazs, from)?, zone_edges(tazs, to)?);
            for _ in 0..n {
                let depart = floor2(rng.random_range(m.window.begin..m.window.end)).max(m.window.begin);
                let f = &src[rng.random_range(0..src.len())];
                let t = &dst[rng.random_range(0..dst.len())];
                drawn.push((depart, f.clone(), t.clone()));
            }
        }
    }
    drawn.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(drawn
        .into_iter()
        .enumerate()
        .map(|(i, (depart, from_edge, to_edge))| Trip {
            id: format!("{prefix}{i}"),
            depart,
            from_edge,
            to_edge,
        })
        .collect())
}

pub fn od_to_trips(m: &ODMatrix, tazs: &TazSet, seed: u64, prefix: &str) -> Result<Vec<Trip>> {
    od_to_trips_many(std::slice::from_ref(m), tazs, seed, prefix)
}

/// Restricts matrices to `[begin, end)`: windows are clipped and matrices
/// outside the range dropped. Cell values are kept as they are.
pub fn clip_matrices(matrices: Vec<ODMatrix>, begin: Option<f64>, end: Option<f64>) -> Result<Vec<ODMatrix>> {
    let b = begin.unwrap_or(f64::NEG_INFINITY);
    let e = end.unwrap_or(f64::INFINITY);
    if b >= e {
        return Err(Error::Window { begin: b, end: e });
    }
    Ok(matrices
        .into_iter()
        .filter_map(|mut m| {
            let (nb, ne) = (m.window.begin.max(b), m.window.end.min(e));
            (nb < ne).then(|| {
                m.window = TimeWindow { begin: nb, end: ne };
                m
            })
        })
        .collect())
}

/// Anything with a departure time and terminal edges.
pub trait OdSource {
    fn depart(&self) -> f64;
    fn origin_edge(&self) -> Option<&str>;
    fn destination_edge(&self) -> Option<&str>;
}

impl OdSource for Route {
    fn depart(&self) -> f64 {
        self.depart
    }
    fn origin_edge(&self) -> Option<&str> {
        self.edges.first().map(String::as_str)
    }
    fn destination_edge(&self) -> Option<&str> {
        self.edges.last().map(String::as_str)
    }
}

impl OdSource for Trip {
    fn depart(&self) -> f64 {
        self.depart
    }
    fn origin_edge(&self) -> Option<&str> {
        Some(&self.from_edge)
    }
    fn destination_edge(&self) -> Option<&str> {
        Some(&self.to_edge)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdAggregation {
    /// One matrix per sub-window, factor 1.
    pub matrices: Vec<ODMatrix>,
    /// Entries whose first or last edge lies in no zone.
    pub unresolved: usize,
    pub out_of_window: usize,
}

impl OdAggregation {
    pub fn mass(&self) -> f64 {
        self.matrices.iter().map(ODMatrix::mass).sum()
    }
}

/// Counts each entry once in the cell (zone of first edge, zone of last
/// edge) of the sub-window holding its departure. `intervals` splits the
/// window into that many equal parts.
pub fn route_to_od<T: OdSource>(
    entries: &[T],
    tazs: &TazSet,
    window: TimeWindow,
    intervals: Option<usize>,
) -> Result<OdAggregation> {
    let n = intervals.unwrap_or(1);
    if n == 0 {
        return Err(Error::invalid("interval count must be at least 1"));
    }
    let windows = window.split(n);
    let mut matrices: Vec<ODMatrix> = windows.iter().map(|w| ODMatrix::new(*w)).collect();
    let owner = tazs.edge_owner();
    let mut unresolved = 0;
    let mut out_of_window = 0;
    for entry in entries {
        let t = entry.depart();
        if !window.contains(t) {
            out_of_window += 1;
            continue;
        }
        let zones = entry
            .origin_edge()
            .and_then(|e| owner.get(e))
            .zip(entry.destination_edge().and_then(|e| owner.get(e)));
        let Some((from, to)) = zones else {
            unresolved += 1;
            continue;
        };
        let k = windows.iter().position(|w| w.contains(t)).unwrap_or(n - 1);
        *matrices[k]
            .cells
            .entry((from.to_string(), to.to_string()))
            .or_insert(0.0) += 1.0;
    }
    Ok(OdAggregation {
        matrices,
        unresolved,
        out_of_window,
    })
}
