//! Source-level filtering: topical match, interaction threshold, low-signal flags.

use serde::{Deserialize, Serialize};

use super::SourceItem;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Case-insensitive substrings matched against category tags and the
    /// certification field. Empty list matches everything.
    pub keywords: Vec<String>,
    /// Sources with a viewer count must strictly exceed this.
    pub min_viewers: u64,
}

impl Default for FilterConfig {
    fn default() -> FilterConfig {
        FilterConfig {
            keywords: Vec::new(),
            min_viewers: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub source_id: String,
    pub reason: String,
}

fn keyword_match(item: &SourceItem, keywords: &[String]) -> bool {
    if keywords.is_empty() {
        return true;
    }
    let mut haystacks: Vec<String> = item.category_tags.iter().map(|t| t.to_lowercase()).collect();
    if let Some(cert) = &item.certification {
        haystacks.push(cert.to_lowercase());
    }
    keywords.iter().any(|kw| {
        let kw = kw.to_lowercase();
        haystacks.iter().any(|h| h.contains(&kw))
    })
}

/// Splits items into retained and rejected. Filtering is total: every input
/// lands in exactly one of the two lists, and each rejection names the first
/// failed criterion.
pub fn filter_sources(
    items: Vec<SourceItem>,
    criteria: &FilterConfig,
) -> (Vec<SourceItem>, Vec<Rejection>) {
    let mut retained = Vec::new();
    let mut rejected = Vec::new();
    for item in items {
        if !keyword_match(&item, &criteria.keywords) {
            rejected.push(Rejection {
                source_id: item.source_id,
                reason: "no keyword match".into(),
            });
        } else if item
            .viewer_count
            .is_some_and(|count| count <= criteria.min_viewers)
        {
            rejected.push(Rejection {
                source_id: item.source_id,
                reason: "interaction threshold".into(),
            });
        } else if !item.flags.is_empty() {
            rejected.push(Rejection {
                source_id: item.source_id,
                reason: "low-signal".into(),
            });
        } else {
            retained.push(item);
        }
    }
    (retained, rejected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{SourceFlag, SourceKind};
    use crate::schema::Domain;
    use std::collections::BTreeSet;

    fn item(id: &str) -> SourceItem {
        SourceItem {
            source_id: id.into(),
            kind: SourceKind::LiveStream,
            domain: Domain::Automotive,
            category_tags: vec!["vehicle sales".into()],
            certification: None,
            viewer_count: Some(1500),
            flags: BTreeSet::new(),
            payload_path: "unused".into(),
        }
    }

    fn config() -> FilterConfig {
        FilterConfig {
            keywords: vec!["vehicle".into()],
            min_viewers: 1000,
        }
    }

    #[test]
    fn busy_stream_with_matching_tag_is_retained() {
        let (retained, rejected) = filter_sources(vec![item("a")], &config());
        assert_eq!(retained.len(), 1);
        assert!(rejected.is_empty());
    }

    #[test]
    fn below_threshold_stream_is_rejected() {
        let mut low = item("a");
        low.viewer_count = Some(500);
        let (retained, rejected) = filter_sources(vec![low], &config());
        assert!(retained.is_empty());
        assert_eq!(rejected[0].reason, "interaction threshold");
    }

    #[test]
    fn threshold_is_strict() {
        let mut exact = item("a");
        exact.viewer_count = Some(1000);
        let (retained, rejected) = filter_sources(vec![exact], &config());
        assert!(retained.is_empty());
        assert_eq!(rejected[0].reason, "interaction threshold");
    }

    #[test]
    fn advertising_flag_rejects_despite_matching_tags() {
        let mut ad = item("a");
        ad.flags.insert(SourceFlag::AdvertisingOnly);
        let (retained, rejected) = filter_sources(vec![ad], &config());
        assert!(retained.is_empty());
        assert_eq!(rejected[0].reason, "low-signal");
    }

    #[test]
    fn missing_viewer_count_skips_the_threshold() {
        let mut page = item("a");
        page.kind = SourceKind::WebPage;
        page.viewer_count = None;
        let (retained, _) = filter_sources(vec![page], &config());
        assert_eq!(retained.len(), 1);
    }

    #[test]
    fn certification_counts_for_keyword_match() {
        let mut certified = item("a");
        certified.category_tags = vec!["entertainment".into()];
        certified.certification = Some("Certified Vehicle Dealer".into());
        let (retained, _) = filter_sources(vec![certified], &config());
        assert_eq!(retained.len(), 1);
    }

    #[test]
    fn retained_and_rejected_partition_the_input() {
        let items: Vec<SourceItem> = (0..20)
            .map(|i| {
                let mut it = item(&format!("s{i}"));
                if i % 3 == 0 {
                    it.viewer_count = Some(10);
                }
                if i % 5 == 0 {
                    it.flags.insert(SourceFlag::EntertainmentOnly);
                }
                it
            })
            .collect();
        let total = items.len();
        let ids: BTreeSet<String> = items.iter().map(|i| i.source_id.clone()).collect();
        let (retained, rejected) = filter_sources(items, &config());
        assert_eq!(retained.len() + rejected.len(), total);
        let mut seen = BTreeSet::new();
        for r in &retained {
            assert!(seen.insert(r.source_id.clone()));
        }
        for r in &rejected {
            assert!(seen.insert(r.source_id.clone()));
        }
        assert_eq!(seen, ids);
    }
}
