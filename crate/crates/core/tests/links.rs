use voltbound::links::{enumerate_links, prune, raw_link_count, span_rank, verify_annihilation};

#[test]
fn raw_counts_follow_the_closed_form() {
    for (n, count) in [(1, 5), (2, 32), (3, 123), (4, 344)] {
        let catalog = enumerate_links::<f64>(n);
        assert_eq!(catalog.raw_count, count);
        assert_eq!(raw_link_count(n), n.pow(4) + n.pow(3) + n.pow(2) + 2 * n);
    }
}

#[test]
fn pruning_keeps_the_span_and_annihilation() {
    for n in 1..=3 {
        let raw = enumerate_links::<f64>(n);
        let kept = prune(&raw);
        assert!(kept.pruned && kept.len() <= raw.len());
        assert_eq!(span_rank(&kept), span_rank(&raw));
        assert_eq!(span_rank(&kept), kept.len());
        verify_annihilation(&kept, 50).unwrap();
    }
}

#[test]
fn dump_lists_every_link() {
    let catalog = enumerate_links::<f64>(2);
    let json = catalog.to_json();
    assert_eq!(json.links.len(), catalog.len());
    assert_eq!(json.count_by_family.values().sum::<usize>(), catalog.len());
    let text = serde_json::to_string(&json).unwrap();
    assert!(text.contains("\"raw_count\":32"));
}
