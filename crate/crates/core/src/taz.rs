//! Traffic analysis zones: polygon containment, zone extraction from
//! polygons and square-grid zoning.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::netgraph::RoadNetwork;
use crate::xml::{self, escape, fmt2, XSI_NS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// A simple polygon, implicitly closed.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub id: String,
    vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(id: impl Into<String>, vertices: Vec<Point>) -> Result<Self> {
        let id = id.into();
        if vertices.len() < 3 {
            return Err(Error::invalid(format!("polygon `{id}` needs at least 3 vertices")));
        }
        if vertices.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(Error::invalid(format!("polygon `{id}` has a non-finite vertex")));
        }
        let poly = Self { id, vertices };
        if poly.signed_area() == 0.0 {
            return Err(Error::invalid(format!("polygon `{}` has zero area", poly.id)));
        }
        Ok(poly)
    }

    pub fn rectangle(id: impl Into<String>, x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        Self::new(
            id,
            vec![
                Point::new(x0, y0),
                Point::new(x1, y0),
                Point::new(x1, y1),
                Point::new(x0, y1),
            ],
        )
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|i| {
                let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
                a.x * b.y - b.x * a.y
            })
            .sum::<f64>()
            / 2.0
    }

    fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }
}

fn on_segment(p: Point, a: Point, b: Point) -> bool {
    let cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    let scale = (b.x - a.x).abs() + (b.y - a.y).abs();
    if cross.abs() > 1e-9 * scale.max(1.0) {
        return false;
    }
    p.x >= a.x.min(b.x) - 1e-9 && p.x <= a.x.max(b.x) + 1e-9 && p.y >= a.y.min(b.y) - 1e-9 && p.y <= a.y.max(b.y) + 1e-9
}

/// Even-odd ray crossing test; points on the boundary count as inside.
pub fn point_in_polygon(p: Point, poly: &Polygon) -> bool {
    if poly.edges().any(|(a, b)| on_segment(p, a, b)) {
        return true;
    }
    let mut inside = false;
    for (a, b) in poly.edges() {
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    /// Deterministic color from a zone id (FNV-1a).
    pub fn from_id(id: &str) -> Self {
        let mut h: u32 = 0x811c_9dc5;
        for b in id.bytes() {
            h ^= u32::from(b);
            h = h.wrapping_mul(0x0100_0193);
        }
        Rgb((h >> 16) as u8, (h >> 8) as u8, h as u8)
    }

    fn parse(s: &str) -> Option<Self> {
        let mut parts = s.split(',').map(|p| p.trim().parse::<u8>());
        let rgb = Rgb(parts.next()?.ok()?, parts.next()?.ok()?, parts.next()?.ok()?);
        // an alpha channel may follow
        Some(rgb)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TazZone {
    pub id: String,
    pub color: Rgb,
    pub edge_ids: Vec<String>,
}

/// Ordered zones; ids are unique and no edge belongs to two zones.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TazSet {
    zones: Vec<TazZone>,
}

impl TazSet {
    pub fn new(zones: Vec<TazZone>) -> Result<Self> {
        let mut ids = HashSet::new();
        let mut owner: HashMap<&str, &str> = HashMap::new();
        for z in &zones {
            if !ids.insert(z.id.as_str()) {
                return Err(Error::invalid(format!("duplicate TAZ id `{}`", z.id)));
            }
            for e in &z.edge_ids {
                if let Some(prev) = owner.insert(e.as_str(), z.id.as_str()) {
                    if prev != z.id {
                        return Err(Error::invalid(format!(
                            "edge `{e}` belongs to both TAZ `{prev}` and `{}`",
                            z.id
                        )));
                    }
                }
            }
        }
        Ok(Self { zones })
    }

    pub fn zones(&self) -> &[TazZone] {
        &self.zones
    }

    pub fn zone(&self, id: &str) -> Option<&TazZone> {
        self.zones.iter().find(|z| z.id == id)
    }

    pub fn len(&self) -> usize {
        self.zones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zones.is_empty()
    }

    /// Edge id → owning zone id.
    pub fn edge_owner(&self) -> HashMap<&str, &str> {
        self.zones
            .iter()
            .flat_map(|z| z.edge_ids.iter().map(move |e| (e.as_str(), z.id.as_str())))
            .collect()
    }

    /// Checks that every listed edge exists in `net`.
    pub fn check_against(&self, net: &RoadNetwork) -> Result<()> {
        for z in &self.zones {
            for e in &z.edge_ids {
                net.require_edge(e)?;
            }
        }
        Ok(())
    }

    pub fn to_xml(&self) -> String {
        let mut out = format!(
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<tazs xmlns:xsi=\"{XSI_NS}\" xsi:noNamespaceSchemaLocation=\"http://sumo.dlr.de/xsd/taz_file.xsd\">\n"
        );
        for z in &self.zones {
            let Rgb(r, g, b) = z.color;
            out.push_str(&format!(
                "    <taz id=\"{}\" color=\"{r},{g},{b}\" edges=\"{}\"/>\n",
                escape(&z.id),
                escape(&z.edge_ids.join(" "))
            ));
        }
        out.push_str("</tazs>\n");
        out
    }

    /// Reads `<tazs>`; edges come from the `edges` attribute and from any
    /// `tazSource`/`tazSink` children.
    pub fn from_xml(text: &str) -> Result<Self> {
        let root = xml::parse_document(text)?;
        if root.name != "tazs" && root.name != "additional" {
            return Err(root.error(format!("expected <tazs> root, found <{}>", root.name)));
        }
        let mut zones = Vec::new();
        for el in root.children_named("taz") {
            let id = el.required("id")?.to_string();
            let color = match el.attr("color") {
                Some(c) => Rgb::parse(c).ok_or_else(|| el.error(format!("invalid color `{c}`")))?,
                None => Rgb::from_id(&id),
            };
            let mut edge_ids: Vec<String> = el
                .attr("edges")
                .map(|s| s.split_whitespace().map(str::to_string).collect())
                .unwrap_or_default();
            for child in &el.children {
                if child.name == "tazSource" || child.name == "tazSink" {
                    let e = child.required("id")?;
                    if !edge_ids.iter().any(|x| x == e) {
                        edge_ids.push(e.to_string());
                    }
                }
            }
            zones.push(TazZone { id, color, edge_ids });
        }
        Self::new(zones)
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        Self::from_xml(&xml::read_file(path)?)
    }
}

/// Assigns each edge to the first polygon (in input order) containing its
/// midpoint. One zone per polygon; uncovered edges are left out.
pub fn edges_in_districts(net: &RoadNetwork, polygons: &[Polygon]) -> Result<TazSet> {
    let mut members: Vec<Vec<String>> = vec![Vec::new(); polygons.len()];
    for (idx, edge) in net.edges().iter().enumerate() {
        let Some((x, y)) = net.midpoint(idx) else { continue };
        let p = Point::new(x, y);
        if let Some(k) = polygons.iter().position(|poly| point_in_polygon(p, poly)) {
            members[k].push(edge.id.clone());
        }
    }
    let zones = polygons
        .iter()
        .zip(members)
        .map(|(poly, edge_ids)| TazZone {
            id: poly.id.clone(),
            color: Rgb::from_id(&poly.id),
            edge_ids,
        })
        .collect();
    TazSet::new(zones)
}

/// Tiles the network's bounding box with `cell_size` squares and zones the
/// edges by midpoint. Cells that receive no edge are dropped.
pub fn grid_districts(net: &RoadNetwork, cell_size: f64) -> Result<(Vec<Polygon>, TazSet)> {
    if !(cell_size > 0.0 && cell_size.is_finite()) {
        return Err(Error::invalid(format!("cell size must be positive, got {cell_size}")));
    }
    let Some((x0, y0, x1, y1)) = net.bounding_box() else {
        return Ok((Vec::new(), TazSet::default()));
    };
    let count = |lo: f64, hi: f64| {
        let mut n = (((hi - lo) / cell_size).ceil() as usize).max(1);
        while lo + n as f64 * cell_size < hi {
            n += 1;
        }
        n
    };
    let (nx, ny) = (count(x0, x1), count(y0, y1));
    let mut cells = Vec::with_capacity(nx * ny);
    for row in 0..ny {
        for col in 0..nx {
            let (cx, cy) = (x0 + col as f64 * cell_size, y0 + row as f64 * cell_size);
            cells.push(Polygon::rectangle(
                format!("cell_{col}_{row}"),
                cx,
                cy,
                cx + cell_size,
                cy + cell_size,
            )?);
        }
    }
    let all = edges_in_districts(net, &cells)?;
    let (polys, zones): (Vec<_>, Vec<_>) = cells
        .into_iter()
        .zip(all.zones)
        .filter(|(_, z)| !z.edge_ids.is_empty())
        .unzip();
    Ok((polys, TazSet::new(zones)?))
}

pub fn polygons_to_xml(polygons: &[Polygon]) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<polygons>\n");
    for p in polygons {
        let shape: Vec<String> = p
            .vertices
            .iter()
            .map(|v| format!("{},{}", fmt2(v.x), fmt2(v.y)))
            .collect();
        out.push_str(&format!(
            "    <poly id=\"{}\" shape=\"{}\"/>\n",
            escape(&p.id),
            shape.join(" ")
        ));
    }
    out.push_str("</polygons>\n");
    out
}

/// Reads `<poly id shape="x,y x,y ...">` elements under any root.
pub fn polygons_from_xml(text: &str) -> Result<Vec<Polygon>> {
    let root = xml::parse_document(text)?;
    let mut out = Vec::new();
    for el in root.children_named("poly") {
        let id = el.required("id")?;
        let shape = el.required("shape")?;
        let mut vertices = Vec::new();
        for pair in shape.split_whitespace() {
            let (x, y) = pair
                .split_once(',')
                .ok_or_else(|| el.error(format!("malformed shape point `{pair}`")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| el.error(format!("malformed shape point `{pair}`")))
            };
            vertices.push(Point::new(parse(x)?, parse(y)?));
        }
        // explicit closing vertex
        if vertices.len() > 3 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        out.push(Polygon::new(id, vertices).map_err(|e| el.error(e.to_string()))?);
    }
    Ok(out)
}
