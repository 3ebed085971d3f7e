//! Minimal element tree on top of `quick-xml`, shared by every file reader.
//!
//! Writers in this crate format XML by hand so the byte layout stays fixed;
//! only reading goes through this module.

use std::borrow::Cow;
use std::str::FromStr;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use crate::error::{Error, Result};

pub(crate) const XSI_NS: &str = "http://www.w3.org/2001/XMLSchema-instance";

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Element>,
    /// 1-based line of the opening tag.
    pub line: usize,
}

impl Element {
    pub fn attr(&self, key: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn required(&self, key: &str) -> Result<&str> {
        self.attr(key).ok_or_else(|| Error::Xml {
            line: self.line,
            message: format!("<{}> is missing required attribute `{key}`", self.name),
        })
    }

    pub fn parse_required<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.required(key)?;
        self.parse_value(key, raw)
    }

    pub fn parse_optional<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.attr(key).map(|raw| self.parse_value(key, raw)).transpose()
    }

    fn parse_value<T: FromStr>(&self, key: &str, raw: &str) -> Result<T> {
        raw.trim().parse().map_err(|_| Error::Xml {
            line: self.line,
            message: format!("<{}> attribute `{key}` has invalid value `{raw}`", self.name),
        })
    }

    pub fn children_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Element> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }

    /// Depth-first, document order.
    pub fn descendants_named<'a>(&'a self, name: &'a str) -> Vec<&'a Element> {
        let mut out = Vec::new();
        fn walk<'a>(el: &'a Element, name: &str, out: &mut Vec<&'a Element>) {
            for child in &el.children {
                if child.name == name {
                    out.push(child);
                }
                walk(child, name, out);
            }
        }
        walk(self, name, &mut out);
        out
    }

    pub(crate) fn error(&self, message: impl Into<String>) -> Error {
        Error::Xml {
            line: self.line,
            message: message.into(),
        }
    }
}

/// Line numbers for monotonically increasing byte offsets.
struct LineCounter<'a> {
    text: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> LineCounter<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            text: text.as_bytes(),
            pos: 0,
            line: 1,
        }
    }

    fn line_at(&mut self, pos: usize) -> usize {
        let pos = pos.min(self.text.len()).max(self.pos);
        self.line += self.text[self.pos..pos].iter().filter(|&&b| b == b'\n').count();
        self.pos = pos;
        self.line
    }
}

fn element_from(start: &BytesStart<'_>, line: usize) -> Result<Element> {
    let name = String::from_utf8_lossy(start.name().as_ref()).into_owned();
    let mut attrs = Vec::new();
    for attr in start.attributes() {
        let attr = attr.map_err(|e| Error::Xml {
            line,
            message: e.to_string(),
        })?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr
            .unescape_value()
            .map_err(|e| Error::Xml {
                line,
                message: e.to_string(),
            })?
            .into_owned();
        attrs.push((key, value));
    }
    Ok(Element {
        name,
        attrs,
        children: Vec::new(),
        line,
    })
}

/// Parses a whole document and returns its root element. Text content is
/// dropped; every format handled here is attribute-only.
pub fn parse_document(text: &str) -> Result<Element> {
    let mut reader = Reader::from_str(text);
    reader.config_mut().trim_text(true);
    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;
    let mut lines = LineCounter::new(text);
    loop {
        let pos = reader.buffer_position() as usize;
        let line = lines.line_at(pos + leading_ws(&text[pos.min(text.len())..]));
        let event = reader.read_event().map_err(|e| Error::Xml {
            line: lines.line_at(reader.buffer_position() as usize),
            message: e.to_string(),
        })?;
        match event {
            Event::Start(start) => stack.push(element_from(&start, line)?),
            Event::Empty(start) => {
                let el = element_from(&start, line)?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None if root.is_none() => root = Some(el),
                    None => {
                        return Err(Error::Xml {
                            line,
                            message: "multiple root elements".into(),
                        })
                    }
                }
            }
            Event::End(_) => {
                let el = stack.pop().ok_or_else(|| Error::Xml {
                    line,
                    message: "unbalanced closing tag".into(),
                })?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None if root.is_none() => root = Some(el),
                    None => {
                        return Err(Error::Xml {
                            line,
                            message: "multiple root elements".into(),
                        })
                    }
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if let Some(open) = stack.last() {
        return Err(Error::Xml {
            line: open.line,
            message: format!("<{}> is never closed", open.name),
        });
    }
    root.ok_or_else(|| Error::Xml {
        line: 1,
        message: "document has no root element".into(),
    })
}

fn leading_ws(s: &str) -> usize {
    s.len() - s.trim_start().len()
}

pub(crate) fn escape(value: &str) -> Cow<'_, str> {
    quick_xml::escape::escape(value)
}

/// Two fixed decimals, the layout SUMO uses for times and lengths.
pub(crate) fn fmt2(value: f64) -> String {
    format!("{value:.2}")
}

/// Shortest representation that parses back to the same `f64`, always with
/// a decimal point ("0.0", "12.35").
pub(crate) fn fmt_exact(value: f64) -> String {
    format!("{value:?}")
}

/// Rounds to the 0.01 grid so that values survive a `fmt2` round trip.
pub(crate) fn round2(value: f64) -> f64 {
    (value * 100.0).round() / 100.0
}

/// Floors to the 0.01 grid.
pub(crate) fn floor2(value: f64) -> f64 {
    (value * 100.0).floor() / 100.0
}

pub(crate) fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_file(path: &std::path::Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| Error::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
    }
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
