use cgnn::io::{
    format_partition, load_checkpoint, load_dataset_json, load_edge_list_graph, load_graph_json, parse_edge_list,
    parse_labels, parse_partition, save_checkpoint, save_dataset_json, save_graph_json, subgraph_dump, PartitionFile,
};
use cgnn_core::pipelines::prepare_views;
use cgnn_core::synth::{synth_sbm, triangle_dataset};
use cgnn_core::{Augmentation, CoarsenMethod, GcnParams, Labels, Matrix, PartitionMatrix};

#[test]
fn graph_json_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = synth_sbm(&[20, 15], 0.3, 0.05, 4, 3).unwrap();
    let path = dir.path().join("g.json");
    save_graph_json(&path, &g).unwrap();
    assert_eq!(load_graph_json(&path).unwrap(), g);
}

#[test]
fn regression_targets_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = synth_sbm(&[6, 6], 0.5, 0.1, 2, 1).unwrap();
    let t = Matrix::from_vec(12, 2, (0..24).map(|i| i as f64 * 0.1 + 1e-17).collect()).unwrap();
    let g = g.with_labels(Labels::Targets(t)).unwrap();
    let path = dir.path().join("g.json");
    save_graph_json(&path, &g).unwrap();
    assert_eq!(load_graph_json(&path).unwrap(), g);
}

#[test]
fn dataset_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ds = triangle_dataset(12, 7, 2).unwrap();
    let path = dir.path().join("d.json");
    save_dataset_json(&path, &ds).unwrap();
    assert_eq!(load_dataset_json(&path).unwrap(), ds);
}

#[test]
fn edge_list_with_side_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    std::fs::write(p("e.txt"), "# triangle plus tail\n0 1\n1 2 2.5\n0,2\n2 3\n1 0\n").unwrap();
    std::fs::write(p("x.csv"), "1,0\n0,1\n1,1\n0.5,0.5\n").unwrap();
    std::fs::write(p("y.txt"), "0\n1\n1\n0\n").unwrap();
    std::fs::write(p("s.txt"), "train\nval\ntest\nnone\n").unwrap();
    let g = load_edge_list_graph(None, &p("e.txt"), Some(&p("x.csv")), Some(&p("y.txt")), Some(&p("s.txt"))).unwrap();
    assert_eq!(g.n(), 4);
    assert_eq!(g.num_edges(), 4);
    // (0,1) listed in both orientations stays a single unit edge
    assert_eq!(g.adjacency().get(0, 1), 1.0);
    assert_eq!(g.adjacency().get(2, 1), 2.5);
    assert_eq!(g.degrees(), &[2.0, 3.5, 4.5, 1.0]);
    assert_eq!(g.labels(), &Labels::classes(vec![0, 1, 1, 0]));
}

#[test]
fn malformed_inputs_are_rejected() {
    assert!(parse_edge_list("0 1 2 3\n").is_err());
    assert!(parse_edge_list("0 x\n").is_err());
    assert!(matches!(parse_labels("1.5\n2\n").unwrap(), Labels::Targets(_)));
    assert!(parse_partition("2 3 heavy_edge 0\n0\n1\n").is_err());
    assert!(parse_partition("3 3 heavy_edge 0\n0\n1\n1\n").is_err());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"n": 2, "edges": [[0, 5]]}"#).unwrap();
    assert!(load_graph_json(&path).is_err());
}

#[test]
fn partition_round_trip() {
    let f = PartitionFile {
        partition: PartitionMatrix::from_assignment(vec![0, 0, 1, 2, 1]).unwrap(),
        method: CoarsenMethod::NeighborhoodGrowth,
        seed: 42,
    };
    let text = format_partition(&f);
    assert!(text.starts_with("3 5 neighborhood_growth 42\n"));
    assert_eq!(parse_partition(&text).unwrap(), f);
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    let p = GcnParams::init(7, 13, 3, 4, 99).unwrap();
    save_checkpoint(&path, &p).unwrap();
    let q = load_checkpoint(&path).unwrap();
    for (a, b) in p.matrices().zip(q.matrices()) {
        let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a), bits(b));
    }
    assert_eq!(p, q);
}

#[test]
fn checkpoint_version_is_checked() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    save_checkpoint(&path, &GcnParams::init(2, 3, 1, 2, 0).unwrap()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap().replace("\"version\":1", "\"version\":9");
    std::fs::write(&path, text).unwrap();
    assert!(load_checkpoint(&path).is_err());
}

#[test]
fn subgraph_dump_lists_every_core_node_once() {
    let g = synth_sbm(&[15, 15], 0.3, 0.05, 3, 4).unwrap();
    let views = prepare_views(&g, 0.2, CoarsenMethod::HeavyEdge, Augmentation::Cluster, 0).unwrap();
    let dump = subgraph_dump(&views.subgraphs);
    let mut seen = vec![0; g.n()];
    for s in &dump {
        for (id, prov) in s.global_ids.iter().zip(&s.provenance) {
            if prov == "core" {
                seen[*id] += 1;
            }
        }
        assert_eq!(s.mask.len(), s.global_ids.len());
    }
    assert!(seen.iter().all(|&c| c == 1));
}
