//! Lane-area detector definitions, the additional-file codec and the
//! random per-zone placer.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::netgraph::RoadNetwork;
use crate::taz::TazSet;
use crate::xml::{self, escape, fmt_exact, XSI_NS};

pub const DEFAULT_PERIOD: f64 = 100.0;
/// Placed detectors never exceed this length.
pub const MAX_PLACED_LENGTH: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSpec {
    pub id: String,
    pub edge: String,
    pub lane: u32,
    pub pos: f64,
    pub length: f64,
    pub period: f64,
    pub file: String,
}

impl DetectorSpec {
    /// SUMO lane id, `<edge>_<index>`.
    pub fn lane_id(&self) -> String {
        format!("{}_{}", self.edge, self.lane)
    }

    pub fn validate(&self, net: &RoadNetwork) -> Result<()> {
        let edge = net.edge(net.require_edge(&self.edge)?);
        let fail = |msg: String| Err(Error::Validation(format!("detector `{}`: {msg}", self.id)));
        if self.lane >= edge.lane_count {
            return fail(format!(
                "lane {} but edge `{}` has {} lane(s)",
                self.lane, edge.id, edge.lane_count
            ));
        }
        if !(self.pos.is_finite() && self.pos >= 0.0) {
            return fail(format!("invalid pos {}", self.pos));
        }
        if !(self.length.is_finite() && self.length > 0.0) {
            return fail(format!("invalid length {}", self.length));
        }
        // written lengths carry six decimals, allow that much slack
        if self.pos + self.length > edge.length + 1e-6 {
            return fail(format!(
                "pos {} + length {} exceeds edge length {}",
                self.pos, self.length, edge.length
            ));
        }
        if !(self.period.is_finite() && self.period > 0.0) {
            return fail(format!("invalid period {}", self.period));
        }
        Ok(())
    }
}

fn format_period(p: f64) -> String {
    if p.fract() == 0.0 && p.abs() < 1e15 {
        format!("{}", p as i64)
    } else {
        fmt_exact(p)
    }
}

pub fn write_additional(specs: &[DetectorSpec]) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    if specs.is_empty() {
        out.push_str("<additional/>\n");
        return out;
    }
    out.push_str(&format!(
        "<additional xmlns:xsi=\"{XSI_NS}\" xsi:noNamespaceSchemaLocation=\"http://sumo.dlr.de/xsd/additional_file.xsd\">\n"
    ));
    for d in specs {
        out.push_str(&format!(
            "    <laneAreaDetector id=\"{}\" lane=\"{}\" pos=\"{}\" length=\"{:.6}\" period=\"{}\" file=\"{}\"/>\n",
            escape(&d.id),
            escape(&d.lane_id()),
            fmt_exact(d.pos),
            d.length,
            format_period(d.period),
            escape(&d.file)
        ));
    }
    out.push_str("</additional>\n");
    out
}

/// Collects every `<laneAreaDetector>` in the document, whatever the root.
pub fn parse_additional(text: &str) -> Result<Vec<DetectorSpec>> {
    let root = xml::parse_document(text)?;
    root.descendants_named("laneAreaDetector")
        .into_iter()
        .map(|el| {
            let lane = el.required("lane")?;
            let (edge, index) = lane
                .rsplit_once('_')
                .and_then(|(e, i)| Some((e, i.parse::<u32>().ok()?)))
                .ok_or_else(|| el.error(format!("lane `{lane}` is not of the form <edge>_<index>")))?;
            Ok(DetectorSpec {
                id: el.required("id")?.to_string(),
                edge: edge.to_string(),
                lane: index,
                pos: el.parse_optional("pos")?.unwrap_or(0.0),
                length: el.parse_required("length")?,
                period: el
                    .parse_optional("period")?
                    .or(el.parse_optional("freq")?)
                    .unwrap_or(DEFAULT_PERIOD),
                file: el.required("file")?.to_string(),
            })
        })
        .collect()
}

/// Parses and checks every detector against the network.
pub fn parse_additional_for(text: &str, net: &RoadNetwork) -> Result<Vec<DetectorSpec>> {
    let specs = parse_additional(text)?;
    for s in &specs {
        s.validate(net)?;
    }
    Ok(specs)
}

pub fn read_additional(path: &std::path::Path) -> Result<Vec<DetectorSpec>> {
    parse_additional(&xml::read_file(path)?)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    /// Edge probability proportional to its lane count.
    ByLanes,
    /// Edge probability proportional to an attribute of an edgedata file.
    ByWeight { attribute: String, edgedata: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementParams {
    pub probability: f64,
    pub strategy: Strategy,
    pub period: f64,
    pub seed: u64,
}

impl PlacementParams {
    pub fn new(probability: f64, strategy: Strategy) -> Self {
        Self {
            probability,
            strategy,
            period: DEFAULT_PERIOD,
            seed: crate::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Placement {
    pub detectors: Vec<DetectorSpec>,
    /// Zones passed over because none of their edges can be chosen.
    pub skipped: Vec<String>,
}

/// One trial per zone: with probability `p` the zone gets a single
/// detector on lane 0 of an edge drawn by the strategy.
pub fn place_random(net: &RoadNetwork, tazs: &TazSet, params: &PlacementParams) -> Result<Placement> {
    let p = params.probability;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("probability must be in [0, 1], got {p}")));
    }
    if !(params.period.is_finite() && params.period > 0.0) {
        return Err(Error::invalid(format!(
            "period must be positive, got {}",
            params.period
        )));
    }
    tazs.check_against(net)?;
    let weight_of: Box<dyn Fn(usize) -> f64> = match &params.strategy {
        Strategy::ByLanes => Box::new(|e| net.edge(e).lane_count as f64),
        Strategy::ByWeight { attribute, edgedata } => {
            let values: BTreeMap<String, f64> = crate::demand::parse_edge_values(edgedata, attribute)?;
            if values.is_empty() {
                return Err(Error::config(format!("edgedata has no `{attribute}` attribute")));
            }
            Box::new(move |e| values.get(&net.edge(e).id).copied().unwrap_or(0.0))
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut out = Placement::default();
    for zone in tazs.zones() {
        let edges: Vec<usize> = zone
            .edge_ids
            .iter()
            .map(|id| net.require_edge(id))
            .collect::<Result<_>>()?;
        let weights: Vec<f64> = edges.iter().map(|&e| weight_of(e)).collect();
        let Ok(dist) = WeightedIndex::new(&weights) else {
            out.skipped.push(zone.id.clone());
            continue;
        };
        if !rng.random_bool(p) {
            continue;
        }
        let edge = net.edge(edges[dist.sample(&mut rng)]);
        let index = out.detectors.len();
        out.detectors.push(DetectorSpec {
            id: format!("e2_{index}"),
            edge: edge.id.clone(),
            lane: 0,
            pos: 0.0,
            length: edge.length.min(MAX_PLACED_LENGTH),
            period: params.period,
            file: format!("lane_output/e2_{index}.xml"),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::{generate_grid, GeneratorOptions};
    use crate::taz::grid_districts;

    pub(crate) const LISTING: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<additional xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance"
	xsi:noNamespaceSchemaLocation="http://sumo.dlr.de/xsd/additional_file.xsd">
    <laneAreaDetector id="e2_0" lane="-159327011#2_0" pos="0.0"
    		length="138.630000" period="100" file="lane_output/e2_0.xml"/>
    <laneAreaDetector id="e2_1" lane="15497309#1_0" pos="0.0"
    		length="1.940000" period="100" file="lane_output/e2_1.xml"/>
</additional>
"#;

    #[test]
    fn listing_round_trip() {
        let specs = parse_additional(LISTING).unwrap();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[0].edge, "-159327011#2");
        assert_eq!(specs[0].lane, 0);
        assert_eq!(specs[0].length, 138.63);
        assert_eq!(specs[1].file, "lane_output/e2_1.xml");
        let text = write_additional(&specs);
        assert!(text.contains(
            "<laneAreaDetector id=\"e2_0\" lane=\"-159327011#2_0\" pos=\"0.0\" length=\"138.630000\" period=\"100\" file=\"lane_output/e2_0.xml\"/>"
        ));
        assert_eq!(parse_additional(&text).unwrap(), specs);
        assert_eq!(write_additional(&parse_additional(&text).unwrap()), text);
    }

    #[test]
    fn empty_list() {
        let text = write_additional(&[]);
        assert!(text.ends_with("<additional/>\n"));
        assert!(parse_additional(&text).unwrap().is_empty());
    }

    #[test]
    fn bounds_checked_against_network() {
        let net = generate_grid(2, 100.0, &GeneratorOptions::default()).unwrap();
        let mut d = DetectorSpec {
            id: "d".into(),
            edge: net.edge(0).id.clone(),
            lane: 0,
            pos: 60.0,
            length: 40.0,
            period: 10.0,
            file: "x.xml".into(),
        };
        assert!(d.validate(&net).is_ok());
        d.length = 41.0;
        assert!(d.validate(&net).is_err());
        d.length = 10.0;
        d.lane = 1;
        assert!(d.validate(&net).is_err());
        let text = write_additional(&[DetectorSpec {
            lane: 0,
            pos: 95.0,
            ..d
        }]);
        assert!(matches!(parse_additional_for(&text, &net), Err(Error::Validation(_))));
    }

    #[test]
    fn probability_extremes() {
        let net = generate_grid(4, 100.0, &GeneratorOptions::default()).unwrap();
        let (_, tazs) = grid_districts(&net, 150.0).unwrap();
        let none = place_random(&net, &tazs, &PlacementParams::new(0.0, Strategy::ByLanes)).unwrap();
        assert!(none.detectors.is_empty());
        let all = place_random(&net, &tazs, &PlacementParams::new(1.0, Strategy::ByLanes)).unwrap();
        assert_eq!(all.detectors.len(), tazs.len());
        for (i, d) in all.detectors.iter().enumerate() {
            assert_eq!(d.id, format!("e2_{i}"));
            assert_eq!(d.length, 50.0);
            d.validate(&net).unwrap();
        }
        assert!(place_random(&net, &tazs, &PlacementParams::new(1.5, Strategy::ByLanes)).is_err());
    }

    #[test]
    fn weight_strategy_needs_attribute() {
        let net = generate_grid(3, 100.0, &GeneratorOptions::default()).unwrap();
        let (_, tazs) = grid_districts(&net, 1000.0).unwrap();
        let target = net.edge(3).id.clone();
        let edgedata = format!(
            "<meandata><interval begin=\"0\" end=\"1\"><edge id=\"{target}\" entered=\"7\"/></interval></meandata>"
        );
        let by = |attr: &str| Strategy::ByWeight {
            attribute: attr.into(),
            edgedata: edgedata.clone(),
        };
        let placed = place_random(&net, &tazs, &PlacementParams::new(1.0, by("entered"))).unwrap();
        assert_eq!(placed.detectors[0].edge, target);
        assert!(matches!(
            place_random(&net, &tazs, &PlacementParams::new(1.0, by("speed"))),
            Err(Error::Config { .. })
        ));
    }
}
