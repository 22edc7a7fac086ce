use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::hypercore::{EdgeId, EdgeOrigin, EdgeStatus, Hyperedge, ImageManifest, MetaValue};

pub const DEFAULT_BINS: usize = 10;

fn meta_edge(id: u64, name: String, members: Vec<usize>) -> Hyperedge {
    Hyperedge::new(EdgeId(id), name, members, EdgeStatus::Original, EdgeOrigin::Metadata)
}

/// Edges derived from one metadata field: `has:{field}` with every image
/// holding a valid value, then one edge per distinct value (`{field}={value}`)
/// or, when every valid value is numeric, one per nonempty equal-width bin
/// over the observed range (`{field}∈[lo,hi)`, the last bin closed).
/// Ids are assigned consecutively from `first_id`.
pub fn metadata_edges(manifest: &ImageManifest, field: &str, bins: usize, first_id: EdgeId) -> Result<Vec<Hyperedge>> {
    if bins == 0 {
        return Err(Error::Parameter("bins must be at least 1".into()));
    }
    let present: Vec<(usize, &MetaValue)> = manifest
        .images
        .iter()
        .enumerate()
        .filter_map(|(i, img)| img.field(field).map(|v| (i, v)))
        .collect();
    if present.is_empty() {
        return Err(Error::not_found("metadata field", field));
    }
    let mut next = first_id.0;
    let mut id = || {
        next += 1;
        next - 1
    };
    let mut out = vec![meta_edge(id(), format!("has:{field}"), present.iter().map(|p| p.0).collect())];

    let numbers: Option<Vec<(usize, f64)>> = present
        .iter()
        .map(|&(i, v)| match v {
            MetaValue::Number(x) => Some((i, *x)),
            MetaValue::Text(_) => None,
        })
        .collect();
    match numbers {
        Some(values) => {
            let lo = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
            let hi = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
            let width = (hi - lo) / bins as f64;
            let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for (i, x) in values {
                let b = if width > 0.0 {
                    (((x - lo) / width).floor() as usize).min(bins - 1)
                } else {
                    0
                };
                groups.entry(b).or_default().push(i);
            }
            let bins_used = if width > 0.0 { bins } else { 1 };
            for (b, members) in groups {
                let a = lo + width * b as f64;
                let name = if b + 1 == bins_used {
                    format!("{field}∈[{a},{hi}]")
                } else {
                    format!("{field}∈[{a},{})", lo + width * (b + 1) as f64)
                };
                out.push(meta_edge(id(), name, members));
            }
        }
        None => {
            let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
            for (i, v) in present {
                groups.entry(v.as_key()).or_default().push(i);
            }
            for (value, members) in groups {
                out.push(meta_edge(id(), format!("{field}={value}"), members));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(values: Vec<Option<MetaValue>>) -> ImageManifest {
        let mut m = ImageManifest::from_paths((0..values.len()).map(|i| format!("img{i}.jpg")));
        for (img, v) in m.images.iter_mut().zip(values) {
            img.metadata.insert("f".into(), v);
        }
        m
    }

    fn text(s: &str) -> Option<MetaValue> {
        Some(MetaValue::Text(s.into()))
    }

    fn num(x: f64) -> Option<MetaValue> {
        Some(MetaValue::Number(x))
    }

    #[test]
    fn categorical() {
        let m = manifest(vec![text("A"), text("A"), text("B"), text("")]);
        let e = metadata_edges(&m, "f", DEFAULT_BINS, EdgeId(10)).unwrap();
        let summary: Vec<(u64, &str, Vec<usize>)> =
            e.iter().map(|e| (e.id.0, e.name.as_str(), e.members.clone())).collect();
        assert_eq!(
            summary,
            vec![(10, "has:f", vec![0, 1, 2]), (11, "f=A", vec![0, 1]), (12, "f=B", vec![2])]
        );
        assert!(e.iter().all(|e| e.origin == EdgeOrigin::Metadata));
    }

    #[test]
    fn numeric_bins() {
        let m = manifest(vec![num(0.0), num(99.0), num(100.0), num(15.0), None]);
        let e = metadata_edges(&m, "f", 10, EdgeId(0)).unwrap();
        let names: Vec<&str> = e.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, vec!["has:f", "f∈[0,10)", "f∈[10,20)", "f∈[90,100]"]);
        assert_eq!(e[3].members, vec![1, 2]);
        assert_eq!(e[0].members, vec![0, 1, 2, 3]);
    }

    #[test]
    fn single_value_everywhere() {
        let m = manifest(vec![num(3.0); 3]);
        let e = metadata_edges(&m, "f", 10, EdgeId(0)).unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!(e[0].members, e[1].members);
        assert_eq!(e[1].name, "f∈[3,3]");
    }

    #[test]
    fn value_edges_partition_has_edge() {
        let m = manifest(vec![text("x"), num(1.0), text("y"), None, text("x")]);
        let e = metadata_edges(&m, "f", 10, EdgeId(0)).unwrap();
        let mut union: Vec<usize> = e[1..].iter().flat_map(|e| e.members.clone()).collect();
        union.sort();
        assert_eq!(union, e[0].members);
    }

    #[test]
    fn missing_field() {
        let m = manifest(vec![None, text(" ")]);
        assert!(matches!(metadata_edges(&m, "f", 10, EdgeId(0)), Err(Error::NotFound { .. })));
        assert!(metadata_edges(&m, "g", 10, EdgeId(0)).is_err());
    }
}
